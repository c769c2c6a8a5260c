//! Monte-Carlo accuracy and timing harness over synthetic rotation sets.
//!
//! Each trial draws its data from its own random stream, so trials can run
//! in parallel and reports are identical to a serial run. Wall times are
//! only recorded on request because they are the one non-reproducible column.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use rotavg_core::synth::BenchScenario;
use rotavg_core::{geodesic_distance, geodesic_l1_mean, robust_average, AveragingResult, TludConfig};
use serde::Serialize;

/// Trials with a larger error (degrees) count as failures.
pub const FAILURE_THRESHOLD_DEG: f64 = 10.0;

/// CSV header, in contract order.
pub const CSV_COLUMNS: [&str; 7] = ["method", "N", "ratio", "sigma_deg", "trial", "error_deg", "runtime_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Proxy initialisation + truncated inlier set + Weiszfeld.
    Tlud,
    /// Weiszfeld geodesic L1 median over all samples.
    L1,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Tlud => "tlud",
            Method::L1 => "l1",
        }
    }

    pub fn run(self, samples: &[rotavg_core::Rotation], config: &TludConfig) -> rotavg_core::Result<AveragingResult> {
        match self {
            Method::Tlud => robust_average(samples, config),
            Method::L1 => geodesic_l1_mean(samples, config.delta, L1_IT_MAX),
        }
    }
}

/// Iteration budget of the plain L1 baseline, which starts farther from its
/// optimum than the inlier-seeded TLUD refinement.
pub const L1_IT_MAX: usize = 100;

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tlud" => Ok(Method::Tlud),
            "l1" => Ok(Method::L1),
            other => Err(format!("unknown method `{other}` (expected tlud or l1)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOptions {
    pub config: TludConfig,
    /// Record wall time of each estimator call.
    pub timing: bool,
    /// Run trials on the rayon pool.
    pub parallel: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self {
            config: TludConfig::default(),
            timing: false,
            parallel: true,
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrialRecord {
    pub method: Method,
    #[serde(rename = "N")]
    pub n: usize,
    pub ratio: f64,
    pub sigma_deg: f64,
    pub trial: usize,
    /// `None` when the estimator returned an error.
    pub error_deg: Option<f64>,
    pub runtime_ms: Option<f64>,
    #[serde(skip)]
    pub descent_violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchReport {
    pub method: Method,
    pub n_samples: usize,
    pub outlier_ratio: f64,
    pub sigma_deg: f64,
    pub n_trials: usize,
    pub seed: u64,
    pub per_trial_error_deg: Vec<Option<f64>>,
    /// Over trials where the estimator succeeded.
    pub mean_error_deg: Option<f64>,
    pub median_error_deg: Option<f64>,
    /// Trials with error above [`FAILURE_THRESHOLD_DEG`] or an estimator error.
    pub failure_count: usize,
    pub median_runtime_ms: Option<f64>,
    /// Weiszfeld iterations that raised the inlier cost (tolerance 1e-12).
    pub descent_violations: usize,
}

pub fn median(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    Some(if v.len().is_multiple_of(2) {
        (v[mid - 1] + v[mid]) / 2.0
    } else {
        v[mid]
    })
}

impl BenchReport {
    fn from_records(scenario: &BenchScenario, method: Method, records: &[TrialRecord]) -> Self {
        let per_trial_error_deg: Vec<Option<f64>> = records.iter().map(|r| r.error_deg).collect();
        let ok: Vec<f64> = per_trial_error_deg.iter().flatten().copied().collect();
        let failure_count = per_trial_error_deg
            .iter()
            .filter(|e| e.is_none_or(|e| e > FAILURE_THRESHOLD_DEG))
            .count();
        let runtimes: Vec<f64> = records.iter().filter_map(|r| r.runtime_ms).collect();
        Self {
            method,
            n_samples: scenario.n_samples,
            outlier_ratio: scenario.outlier_ratio,
            sigma_deg: scenario.sigma_deg,
            n_trials: scenario.n_trials,
            seed: scenario.seed,
            mean_error_deg: (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64),
            median_error_deg: median(&ok),
            failure_count,
            median_runtime_ms: median(&runtimes),
            descent_violations: records.iter().map(|r| r.descent_violations).sum(),
            per_trial_error_deg,
        }
    }
}

fn run_trial(scenario: &BenchScenario, method: Method, options: &RunOptions, trial: usize) -> TrialRecord {
    let set = scenario.trial(trial).expect("scenario validated before running");
    let start = Instant::now();
    let outcome = method.run(&set.samples, &options.config);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let (error_deg, descent_violations) = match &outcome {
        Ok(result) => (
            Some(geodesic_distance(&result.estimate, &set.truth).to_degrees()),
            result.descent_violations(1e-12),
        ),
        Err(_) => (None, 0),
    };
    TrialRecord {
        method,
        n: scenario.n_samples,
        ratio: scenario.outlier_ratio,
        sigma_deg: scenario.sigma_deg,
        trial,
        error_deg,
        runtime_ms: options.timing.then_some(elapsed_ms),
        descent_violations,
    }
}

/// Runs every trial of `scenario` with `method`.
pub fn run_scenario(
    scenario: &BenchScenario,
    method: Method,
    options: &RunOptions,
) -> rotavg_core::Result<(BenchReport, Vec<TrialRecord>)> {
    scenario.validate()?;
    options.config.validate()?;
    let records: Vec<TrialRecord> = if options.parallel {
        (0..scenario.n_trials)
            .into_par_iter()
            .map(|t| run_trial(scenario, method, options, t))
            .collect()
    } else {
        (0..scenario.n_trials)
            .map(|t| run_trial(scenario, method, options, t))
            .collect()
    };
    Ok((BenchReport::from_records(scenario, method, &records), records))
}

/// Every (scenario, method) pair, scenario-major.
pub fn sweep(
    scenarios: &[BenchScenario],
    methods: &[Method],
    options: &RunOptions,
) -> rotavg_core::Result<(Vec<BenchReport>, Vec<TrialRecord>)> {
    let mut reports = Vec::with_capacity(scenarios.len() * methods.len());
    let mut records = Vec::new();
    for scenario in scenarios {
        for &method in methods {
            let (report, rows) = run_scenario(scenario, method, options)?;
            reports.push(report);
            records.extend(rows);
        }
    }
    Ok((reports, records))
}

pub fn write_csv<W: Write>(out: W, records: &[TrialRecord]) -> csv::Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    if records.is_empty() {
        writer.write_record(CSV_COLUMNS)?;
    }
    for r in records {
        writer.serialize(r)?;
    }
    writer.flush()?;
    Ok(())
}

/// Fixed-width summary, one line per report.
pub fn summary_table(reports: &[BenchReport]) -> String {
    let mut out = format!(
        "{:<6} {:>7} {:>7} {:>7} {:>7} {:>10} {:>10} {:>8} {:>10}\n",
        "method", "N", "ratio", "sigma", "trials", "mean_deg", "median_deg", "failures", "median_ms"
    );
    let opt = |v: Option<f64>, digits: usize| v.map_or_else(|| "-".to_string(), |v| format!("{v:.digits$}"));
    for r in reports {
        out.push_str(&format!(
            "{:<6} {:>7} {:>7} {:>7} {:>7} {:>10} {:>10} {:>8} {:>10}\n",
            r.method.name(),
            r.n_samples,
            r.outlier_ratio,
            r.sigma_deg,
            r.n_trials,
            opt(r.mean_error_deg, 3),
            opt(r.median_error_deg, 3),
            r.failure_count,
            opt(r.median_runtime_ms, 2),
        ));
    }
    out
}

/// Scenarios matching the desk-scale robustness checks: N = 1000, σ = 5°,
/// 90% outliers over 100 trials and 99% outliers over 200 trials.
pub fn desk_preset(seed: u64) -> Vec<BenchScenario> {
    vec![
        BenchScenario {
            n_samples: 1000,
            outlier_ratio: 0.9,
            sigma_deg: 5.0,
            n_trials: 100,
            seed,
        },
        BenchScenario {
            n_samples: 1000,
            outlier_ratio: 0.99,
            sigma_deg: 5.0,
            n_trials: 200,
            seed,
        },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scenario(ratio: f64, sigma: f64, trials: usize) -> BenchScenario {
        BenchScenario {
            n_samples: 50,
            outlier_ratio: ratio,
            sigma_deg: sigma,
            n_trials: trials,
            seed: 3,
        }
    }

    #[test]
    fn clean_scenario_has_zero_error() {
        let (report, _) = run_scenario(&scenario(0.0, 0.0, 5), Method::Tlud, &RunOptions::default()).unwrap();
        assert!(report.per_trial_error_deg.iter().all(|e| e.unwrap() < 1e-6));
        assert_eq!(report.failure_count, 0);
        assert_eq!(report.median_runtime_ms, None);
    }

    #[test]
    fn statistics_follow_from_the_list() {
        let (report, records) =
            run_scenario(&scenario(0.5, 5.0, 9), Method::Tlud, &RunOptions::default()).unwrap();
        assert_eq!(records.len(), 9);
        let errs: Vec<f64> = report.per_trial_error_deg.iter().map(|e| e.unwrap()).collect();
        assert_eq!(report.median_error_deg, median(&errs));
        let mean = errs.iter().sum::<f64>() / 9.0;
        assert!((report.mean_error_deg.unwrap() - mean).abs() < 1e-12);
    }

    #[test]
    fn timing_is_opt_in() {
        let options = RunOptions {
            timing: true,
            ..RunOptions::default()
        };
        let (report, records) = run_scenario(&scenario(0.5, 5.0, 3), Method::L1, &options).unwrap();
        assert!(report.median_runtime_ms.is_some());
        assert!(records.iter().all(|r| r.runtime_ms.is_some()));
    }

    #[test]
    fn invalid_scenario_is_rejected() {
        assert!(run_scenario(&scenario(1.0, 5.0, 3), Method::Tlud, &RunOptions::default()).is_err());
    }

    #[test]
    fn sweep_shapes() {
        let (reports, records) = sweep(&[], &[Method::Tlud, Method::L1], &RunOptions::default()).unwrap();
        assert!(reports.is_empty() && records.is_empty());
        let scenarios: Vec<_> = [0.0, 0.3, 0.6].iter().map(|&r| scenario(r, 5.0, 2)).collect();
        let (reports, records) = sweep(&scenarios, &[Method::Tlud, Method::L1], &RunOptions::default()).unwrap();
        assert_eq!(reports.len(), 6);
        assert_eq!(records.len(), 12);
    }

    #[test]
    fn csv_header_and_empty_cells() {
        let mut buf = Vec::new();
        write_csv(&mut buf, &[]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "method,N,ratio,sigma_deg,trial,error_deg,runtime_ms\n");
        let record = TrialRecord {
            method: Method::Tlud,
            n: 100,
            ratio: 0.9,
            sigma_deg: 5.0,
            trial: 0,
            error_deg: Some(1.5),
            runtime_ms: None,
            descent_violations: 0,
        };
        let mut buf = Vec::new();
        write_csv(&mut buf, &[record]).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "method,N,ratio,sigma_deg,trial,error_deg,runtime_ms\ntlud,100,0.9,5.0,0,1.5,\n"
        );
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&[]), None);
        assert_eq!(median(&[3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), Some(2.5));
    }
}
