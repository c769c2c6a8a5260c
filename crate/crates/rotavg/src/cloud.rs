//! Point cloud readers: whitespace-separated XYZ text and ASCII PLY.

use std::fs;
use std::path::Path;

use rotavg_core::registration::PointCloud;
use rotavg_core::Vec3;
use thiserror::Error;

/// Synthetic bunny-like cloud shipped with the crate (4000 points).
pub const STANDIN_CLOUD: &str = include_str!("../data/standin_cloud.xyz");

#[derive(Debug, Error)]
pub enum CloudError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("PLY header: {0}")]
    Header(String),
    #[error(transparent)]
    Cloud(#[from] rotavg_core::Error),
}

fn parse_error(line: usize, message: impl Into<String>) -> CloudError {
    CloudError::Parse {
        line,
        message: message.into(),
    }
}

fn parse_number(tok: &str, line: usize) -> Result<f64, CloudError> {
    tok.parse::<f64>()
        .map_err(|_| parse_error(line, format!("`{tok}` is not a number")))
}

/// One point per line, first three numbers are x y z. Blank lines and `#`
/// comments are skipped.
pub fn parse_xyz(text: &str) -> Result<PointCloud, CloudError> {
    let mut points = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.len() < 3 {
            return Err(parse_error(line, format!("expected 3 coordinates, found {}", toks.len())));
        }
        points.push(Vec3::new(
            parse_number(toks[0], line)?,
            parse_number(toks[1], line)?,
            parse_number(toks[2], line)?,
        ));
    }
    Ok(PointCloud::new(points)?)
}

struct Element {
    name: String,
    count: usize,
    properties: Vec<String>,
}

/// ASCII PLY. Elements are read in header order; only `vertex` rows are kept
/// and only their `x`, `y` and `z` properties are used.
pub fn parse_ply(text: &str) -> Result<PointCloud, CloudError> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == "ply" => {}
        _ => return Err(CloudError::Header("missing `ply` magic".into())),
    }

    let mut elements: Vec<Element> = Vec::new();
    let mut ascii = false;
    loop {
        let Some((_, raw)) = lines.next() else {
            return Err(CloudError::Header("missing end_header".into()));
        };
        let toks: Vec<&str> = raw.split_whitespace().collect();
        match toks.as_slice() {
            ["end_header"] => break,
            ["format", fmt, ..] => {
                if *fmt != "ascii" {
                    return Err(CloudError::Header(format!("unsupported format `{fmt}`")));
                }
                ascii = true;
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| CloudError::Header(format!("bad element count `{count}`")))?,
                properties: Vec::new(),
            }),
            ["property", "list", _, _, name] | ["property", _, name] => elements
                .last_mut()
                .ok_or_else(|| CloudError::Header("property before element".into()))?
                .properties
                .push(name.to_string()),
            _ => return Err(CloudError::Header(format!("unrecognised line `{raw}`"))),
        }
    }
    if !ascii {
        return Err(CloudError::Header("missing format line".into()));
    }

    let mut points = Vec::new();
    let mut found_vertex = false;
    for element in &elements {
        let columns = if element.name == "vertex" {
            found_vertex = true;
            let find = |axis: &str| {
                element
                    .properties
                    .iter()
                    .position(|p| p == axis)
                    .ok_or_else(|| CloudError::Header(format!("vertex has no `{axis}` property")))
            };
            Some([find("x")?, find("y")?, find("z")?])
        } else {
            None
        };
        for _ in 0..element.count {
            let Some((idx, raw)) = lines.next() else {
                return Err(parse_error(0, format!("file ends inside element `{}`", element.name)));
            };
            let Some(columns) = columns else { continue };
            let toks: Vec<&str> = raw.split_whitespace().collect();
            let line = idx + 1;
            if toks.len() < element.properties.len() {
                return Err(parse_error(line, format!(
                    "expected {} values, found {}",
                    element.properties.len(),
                    toks.len()
                )));
            }
            points.push(Vec3::new(
                parse_number(toks[columns[0]], line)?,
                parse_number(toks[columns[1]], line)?,
                parse_number(toks[columns[2]], line)?,
            ));
        }
    }
    if !found_vertex {
        return Err(CloudError::Header("no vertex element".into()));
    }
    Ok(PointCloud::new(points)?)
}

/// Reads a cloud, choosing PLY when the file starts with the `ply` magic.
pub fn read_cloud(path: &Path) -> Result<PointCloud, CloudError> {
    let text = fs::read_to_string(path).map_err(|source| CloudError::Io {
        path: path.display().to_string(),
        source,
    })?;
    if text.trim_start().starts_with("ply") {
        parse_ply(&text)
    } else {
        parse_xyz(&text)
    }
}

pub fn standin_cloud() -> PointCloud {
    parse_xyz(STANDIN_CLOUD).expect("bundled cloud parses")
}
