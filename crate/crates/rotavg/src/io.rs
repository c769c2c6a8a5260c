//! Rotation text format.
//!
//! One rotation per line, either nine row-major matrix entries (`mat9`) or a
//! quaternion `w x y z` (`quat`, normalised on read). Blank lines and lines
//! starting with `#` are ignored. Rotations are always written as `mat9` with
//! 17 significant digits, which round-trips `f64` exactly.

use std::fmt::Write as _;
use std::io::{self, Write};
use std::str::FromStr;

use rotavg_core::so3::{project_to_so3, Mat3};
use rotavg_core::Rotation;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RotationFormat {
    #[default]
    Mat9,
    Quat,
}

impl FromStr for RotationFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mat9" => Ok(Self::Mat9),
            "quat" => Ok(Self::Quat),
            other => Err(format!("unknown rotation format `{other}` (expected mat9 or quat)")),
        }
    }
}

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: {source}")]
    Invariant {
        line: usize,
        source: rotavg_core::Error,
    },
    #[error("no rotations found")]
    Empty,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedRotations {
    pub rotations: Vec<Rotation>,
    /// Line numbers (1-based) whose matrix was projected onto SO(3).
    pub repaired_lines: Vec<usize>,
}

fn quaternion_matrix(w: f64, x: f64, y: f64, z: f64) -> Mat3 {
    Mat3::new(
        1.0 - 2.0 * (y * y + z * z),
        2.0 * (x * y - w * z),
        2.0 * (x * z + w * y),
        2.0 * (x * y + w * z),
        1.0 - 2.0 * (x * x + z * z),
        2.0 * (y * z - w * x),
        2.0 * (x * z - w * y),
        2.0 * (y * z + w * x),
        1.0 - 2.0 * (x * x + y * y),
    )
}

/// Parses rotations from text. With `repair`, matrices failing the rotation
/// invariants are projected onto SO(3) instead of rejected.
pub fn parse_rotations(
    text: &str,
    format: RotationFormat,
    repair: bool,
) -> Result<ParsedRotations, ReadError> {
    let expected = match format {
        RotationFormat::Mat9 => 9,
        RotationFormat::Quat => 4,
    };
    let mut rotations = Vec::new();
    let mut repaired_lines = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let values = content
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| ReadError::Parse {
                        line,
                        message: format!("`{tok}` is not a finite number"),
                    })
            })
            .collect::<Result<Vec<f64>, _>>()?;
        if values.len() != expected {
            return Err(ReadError::Parse {
                line,
                message: format!("expected {expected} numbers, found {}", values.len()),
            });
        }
        let m = match format {
            RotationFormat::Mat9 => Mat3::from_row_slice(&values),
            RotationFormat::Quat => {
                let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    return Err(ReadError::Parse {
                        line,
                        message: "zero quaternion".into(),
                    });
                }
                let [w, x, y, z] = [values[0], values[1], values[2], values[3]].map(|v| v / norm);
                quaternion_matrix(w, x, y, z)
            }
        };
        let rotation = match Rotation::from_matrix(m) {
            Ok(r) => r,
            Err(_) if repair => {
                let r = project_to_so3(&m).map_err(|source| ReadError::Invariant { line, source })?;
                repaired_lines.push(line);
                r
            }
            Err(source) => return Err(ReadError::Invariant { line, source }),
        };
        rotations.push(rotation);
    }
    if rotations.is_empty() {
        return Err(ReadError::Empty);
    }
    Ok(ParsedRotations {
        rotations,
        repaired_lines,
    })
}

/// `mat9` line for one rotation, 17 significant digits per entry.
pub fn format_rotation(r: &Rotation) -> String {
    let mut line = String::new();
    for (i, v) in r.to_row_array().iter().enumerate() {
        if i > 0 {
            line.push(' ');
        }
        let _ = write!(line, "{v:.16e}");
    }
    line
}

pub fn write_rotations<W: Write>(mut out: W, rotations: &[Rotation]) -> io::Result<()> {
    for r in rotations {
        writeln!(out, "{}", format_rotation(r))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rotavg_core::synth::{random_outlier, stream_rng};

    #[test]
    fn identity_line() {
        let parsed = parse_rotations("1 0 0 0 1 0 0 0 1\n", RotationFormat::Mat9, false).unwrap();
        assert_eq!(parsed.rotations, vec![Rotation::identity()]);
        assert!(parsed.repaired_lines.is_empty());
    }

    #[test]
    fn wrong_count_names_the_line() {
        let text = "# header\n1 0 0 0 1 0 0 0 1\n1 2 3 4 5 6 7\n";
        match parse_rotations(text, RotationFormat::Mat9, false) {
            Err(ReadError::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("found 7"));
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            parse_rotations("1 0 0 0 1 0 0 0 x\n", RotationFormat::Mat9, false),
            Err(ReadError::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_rotations("\n# only comments\n", RotationFormat::Mat9, false),
            Err(ReadError::Empty)
        ));
    }

    #[test]
    fn invalid_matrix_rejected_unless_repaired() {
        let text = "1.001 0 0 0 1 0 0 0 1\n";
        assert!(matches!(
            parse_rotations(text, RotationFormat::Mat9, false),
            Err(ReadError::Invariant { line: 1, .. })
        ));
        let parsed = parse_rotations(text, RotationFormat::Mat9, true).unwrap();
        assert_eq!(parsed.repaired_lines, vec![1]);
        assert!((parsed.rotations[0].matrix() - Mat3::identity()).norm() < 1e-12);
        // Reflections cannot be repaired into the same orientation class but
        // still project onto a rotation.
        let reflection = "1 0 0 0 1 0 0 0 -1\n";
        assert!(parse_rotations(reflection, RotationFormat::Mat9, true).is_ok());
        let singular = "1 0 0 0 1 0 0 0 0\n";
        assert!(matches!(
            parse_rotations(singular, RotationFormat::Mat9, true),
            Err(ReadError::Invariant { line: 1, .. })
        ));
    }

    #[test]
    fn quaternions_are_normalised() {
        // 90 degrees about z, scaled by 2.
        let h = std::f64::consts::FRAC_1_SQRT_2 * 2.0;
        let text = format!("{h} 0 0 {h}\n");
        let parsed = parse_rotations(&text, RotationFormat::Quat, false).unwrap();
        let expected = Mat3::new(0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0);
        assert!((parsed.rotations[0].matrix() - expected).norm() < 1e-12);
        assert!(parse_rotations("0 0 0 0\n", RotationFormat::Quat, false).is_err());
    }

    #[test]
    fn written_rotations_read_back_exactly() {
        let mut rng = stream_rng(500, 0, 0);
        let rotations: Vec<_> = (0..200).map(|_| random_outlier(&mut rng)).collect();
        let mut buf = Vec::new();
        write_rotations(&mut buf, &rotations).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let parsed = parse_rotations(&text, RotationFormat::Mat9, false).unwrap();
        assert_eq!(parsed.rotations, rotations);
    }

    #[test]
    fn format_names() {
        assert_eq!("mat9".parse::<RotationFormat>().unwrap(), RotationFormat::Mat9);
        assert_eq!("quat".parse::<RotationFormat>().unwrap(), RotationFormat::Quat);
        assert!("euler".parse::<RotationFormat>().is_err());
    }
}
