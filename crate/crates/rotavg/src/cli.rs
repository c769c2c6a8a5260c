//! `rotavg` subcommands. Exit codes: 0 ok, 2 input error, 3 numeric or
//! invariant failure.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rotavg_core::registration::{harvest_hypotheses, registration_pair, RegistrationScenario};
use rotavg_core::synth::BenchScenario;
use rotavg_core::{geodesic_distance, robust_average, AveragingResult, Rotation, TludConfig};
use serde::Serialize;

use crate::bench::{desk_preset, summary_table, sweep, write_csv, Method, RunOptions};
use crate::cloud::{read_cloud, standin_cloud, CloudError};
use crate::io::{parse_rotations, write_rotations, ReadError, RotationFormat};

#[derive(Debug, Parser)]
#[command(name = "rotavg", version, about = "Robust single rotation averaging")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Average the rotations in a file and print the result as JSON.
    Average(AverageArgs),
    /// Monte-Carlo accuracy sweep over synthetic rotation sets.
    Bench(BenchArgs),
    /// Rotation between two point clouds from averaged 3-point hypotheses.
    Register(RegisterArgs),
}

#[derive(Debug, Clone, Args)]
pub struct EstimatorArgs {
    /// Chordal inlier threshold.
    #[arg(long, default_value_t = 0.5)]
    pub epsilon_c: f64,
    /// Weiszfeld update-norm stop threshold (radians).
    #[arg(long, default_value_t = 0.001)]
    pub delta: f64,
    /// Maximum Weiszfeld iterations.
    #[arg(long, default_value_t = 10)]
    pub it_max: usize,
    /// Extra inlier re-selection rounds after the first refinement.
    #[arg(long, default_value_t = 0)]
    pub realternate: usize,
}

impl EstimatorArgs {
    fn config(&self, parallel: bool) -> Result<TludConfig, CliError> {
        let config = TludConfig {
            epsilon_c: self.epsilon_c,
            delta: self.delta,
            it_max: self.it_max,
            realternate: self.realternate,
            parallel,
            ..TludConfig::default()
        };
        config.validate().map_err(|e| CliError::Input(e.to_string()))?;
        Ok(config)
    }
}

#[derive(Debug, Args)]
pub struct AverageArgs {
    /// Rotation file, one rotation per line.
    pub input: PathBuf,
    #[arg(long, default_value = "mat9")]
    pub format: RotationFormat,
    /// Project invalid matrices onto SO(3) instead of rejecting them.
    #[arg(long)]
    pub repair: bool,
    /// Accepted for interface uniformity; averaging draws no random numbers.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Write the JSON result here instead of stdout.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write the estimate in rotation text format.
    #[arg(long)]
    pub out_rotation: Option<PathBuf>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Scenario preset; `desk` runs N=1000, sigma=5 at 90% (100 trials) and 99% (200 trials).
    #[arg(long, value_parser = ["desk"])]
    pub preset: Option<String>,
    /// Sample counts (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "100")]
    pub n: Vec<usize>,
    /// Outlier ratios in [0, 1) (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0.9")]
    pub ratio: Vec<f64>,
    /// Inlier noise levels in degrees (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "5")]
    pub sigma: Vec<f64>,
    #[arg(long, default_value_t = 100)]
    pub trials: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Estimators to run: tlud, l1 (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "tlud")]
    pub method: Vec<Method>,
    /// Per-trial CSV; stdout when absent.
    #[arg(long)]
    pub out_csv: Option<PathBuf>,
    /// Per-scenario JSON summary.
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Record estimator wall time (makes outputs run-dependent).
    #[arg(long)]
    pub timing: bool,
    /// Run trials on one thread.
    #[arg(long)]
    pub serial: bool,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug, Args)]
pub struct RegisterArgs {
    /// Source cloud (XYZ or ASCII PLY). Defaults to the bundled stand-in cloud.
    #[arg(long)]
    pub src: Option<PathBuf>,
    /// Destination cloud with positional correspondences. Without it a
    /// corrupted copy of the source is generated from the scenario flags.
    #[arg(long)]
    pub dst: Option<PathBuf>,
    /// Points kept after downsampling the source (scenario mode).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Similarity scale; drawn uniformly from (1, 5) when absent.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    /// Per-coordinate Gaussian noise on the destination.
    #[arg(long, default_value_t = RegistrationScenario::DEFAULT_NOISE_SIGMA)]
    pub sigma: f64,
    #[arg(long, default_value_t = RegistrationScenario::DEFAULT_HYPOTHESES)]
    pub hypotheses: usize,
    /// Accepted spread of the three triangle side ratios.
    #[arg(long, default_value_t = RegistrationScenario::DEFAULT_RATIO_TOLERANCE)]
    pub ratio_tol: f64,
    #[arg(long, default_value_t = RegistrationScenario::DEFAULT_ATTEMPT_CAP)]
    pub attempt_cap: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub out_json: Option<PathBuf>,
    /// Write the harvested hypotheses in rotation text format.
    #[arg(long)]
    pub out_hypotheses: Option<PathBuf>,
    /// Write the estimate in rotation text format.
    #[arg(long)]
    pub out_rotation: Option<PathBuf>,
    #[arg(long)]
    pub serial: bool,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
}

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

impl From<ReadError> for CliError {
    fn from(e: ReadError) -> Self {
        match e {
            ReadError::Invariant { .. } => CliError::Numeric(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<CloudError> for CliError {
    fn from(e: CloudError) -> Self {
        CliError::Input(e.to_string())
    }
}

fn numeric(e: rotavg_core::Error) -> CliError {
    CliError::Numeric(e.to_string())
}

fn output_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("{}: {e}", path.display()))
}

fn write_file(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| output_error(path, e))?;
    let mut out = BufWriter::new(file);
    f(&mut out).and_then(|_| out.flush()).map_err(|e| output_error(path, e))
}

fn emit_json<T: Serialize>(value: &T, path: Option<&Path>) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("serialisable result");
    match path {
        Some(path) => write_file(path, |out| writeln!(out, "{text}")),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

#[derive(Debug, Serialize)]
struct AverageOutput {
    estimate: [f64; 9],
    inlier_indices: Vec<usize>,
    init_index: Option<usize>,
    iterations: usize,
    final_cost: f64,
    converged: bool,
    update_norms: Vec<f64>,
    repaired_lines: Vec<usize>,
}

impl AverageOutput {
    fn new(result: AveragingResult, repaired_lines: Vec<usize>) -> Self {
        Self {
            estimate: result.estimate.to_row_array(),
            inlier_indices: result.inliers.into_vec(),
            init_index: result.init_index,
            iterations: result.iterations,
            final_cost: result.final_cost,
            converged: result.converged,
            update_norms: result.update_norms,
            repaired_lines,
        }
    }
}

pub fn cmd_average(args: &AverageArgs) -> Result<(), CliError> {
    let config = args.estimator.config(true)?;
    let text = fs::read_to_string(&args.input).map_err(|e| output_error(&args.input, e))?;
    let parsed = parse_rotations(&text, args.format, args.repair)?;
    if !parsed.repaired_lines.is_empty() {
        eprintln!("warning: projected {} rotation(s) onto SO(3)", parsed.repaired_lines.len());
    }
    let result = robust_average(&parsed.rotations, &config).map_err(numeric)?;
    if let Some(path) = &args.out_rotation {
        write_file(path, |out| write_rotations(out, &[result.estimate]))?;
    }
    emit_json(&AverageOutput::new(result, parsed.repaired_lines), args.out_json.as_deref())
}

pub fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let config = args.estimator.config(false)?;
    let scenarios = match args.preset.as_deref() {
        Some("desk") => desk_preset(args.seed),
        _ => {
            let mut scenarios = Vec::new();
            for &n in &args.n {
                for &ratio in &args.ratio {
                    for &sigma in &args.sigma {
                        scenarios.push(BenchScenario {
                            n_samples: n,
                            outlier_ratio: ratio,
                            sigma_deg: sigma,
                            n_trials: args.trials,
                            seed: args.seed,
                        });
                    }
                }
            }
            scenarios
        }
    };
    if scenarios.iter().any(|s| s.n_trials == 0) {
        return Err(CliError::Input("--trials must be at least 1".into()));
    }
    for s in &scenarios {
        s.validate().map_err(|e| CliError::Input(e.to_string()))?;
    }
    let options = RunOptions {
        config,
        timing: args.timing,
        parallel: !args.serial,
    };
    let (reports, records) = sweep(&scenarios, &args.method, &options).map_err(numeric)?;

    let table = summary_table(&reports);
    match &args.out_csv {
        Some(path) => {
            write_file(path, |out| write_csv(out, &records).map_err(io::Error::other))?;
            print!("{table}");
        }
        None => {
            write_csv(io::stdout().lock(), &records).map_err(|e| CliError::Input(e.to_string()))?;
            eprint!("{table}");
        }
    }
    if let Some(path) = &args.out_json {
        emit_json(&reports, Some(path))?;
    }
    Ok(())
}

#[derive(Debug, Serialize)]
struct RegisterOutput {
    mode: &'static str,
    estimate: [f64; 9],
    inlier_count: usize,
    init_index: Option<usize>,
    iterations: usize,
    final_cost: f64,
    n_hypotheses: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<[f64; 9]>,
    #[serde(skip_serializing_if = "Option::is_none")]
    scale: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_rad: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    error_deg: Option<f64>,
}

pub fn cmd_register(args: &RegisterArgs) -> Result<(), CliError> {
    let config = args.estimator.config(!args.serial)?;
    let base = match &args.src {
        Some(path) => read_cloud(path)?,
        None => standin_cloud(),
    };

    let mut scen = RegistrationScenario::random(args.seed, args.outlier_fraction);
    if let Some(scale) = args.scale {
        scen.scale = scale;
    }
    scen.noise_sigma = args.sigma;
    scen.n_hypotheses = args.hypotheses;
    scen.ratio_tolerance = args.ratio_tol;
    scen.attempt_cap = args.attempt_cap;
    scen.parallel = !args.serial;
    scen.validate().map_err(|e| CliError::Input(e.to_string()))?;

    let (src, dst, truth) = match &args.dst {
        Some(path) => (base, read_cloud(path)?, None),
        None => {
            let (src, dst) = registration_pair(&base, args.n, &scen).map_err(|e| CliError::Input(e.to_string()))?;
            (src, dst, Some(scen.rotation))
        }
    };
    if src.len() != dst.len() {
        return Err(CliError::Input(format!(
            "clouds differ in length ({} vs {})",
            src.len(),
            dst.len()
        )));
    }

    let hypotheses = harvest_hypotheses(&src, &dst, &scen).map_err(numeric)?;
    if let Some(path) = &args.out_hypotheses {
        write_file(path, |out| write_rotations(out, &hypotheses))?;
    }
    let result = robust_average(&hypotheses, &config).map_err(numeric)?;
    if let Some(path) = &args.out_rotation {
        write_file(path, |out| write_rotations(out, &[result.estimate]))?;
    }

    let error_rad = truth.map(|t: Rotation| geodesic_distance(&result.estimate, &t));
    let output = RegisterOutput {
        mode: if truth.is_some() { "scenario" } else { "files" },
        estimate: result.estimate.to_row_array(),
        inlier_count: result.inliers.len(),
        init_index: result.init_index,
        iterations: result.iterations,
        final_cost: result.final_cost,
        n_hypotheses: hypotheses.len(),
        truth: truth.map(|t| t.to_row_array()),
        scale: truth.map(|_| scen.scale),
        error_rad,
        error_deg: error_rad.map(f64::to_degrees),
    };
    emit_json(&output, args.out_json.as_deref())
}

pub fn run(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Average(args) => cmd_average(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Register(args) => cmd_register(args),
    }
}
