use std::collections::BTreeMap;

use serde::Serialize;

/// Time series recorded along one Monte-Carlo path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathRecord {
    pub path: usize,
    pub seed: u64,
    pub times: Vec<f64>,
    pub diameters: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lengths: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub contained: Option<Vec<bool>>,
    pub jitter_max: f64,
}

/// Per-path line of an [`ExperimentReport`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathSummary {
    pub path: usize,
    pub seed: u64,
    /// The experiment's scalar outcome for this path.
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    pub jitter_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub n_paths: usize,
    pub mean: f64,
    /// Sample standard deviation over `√n_paths`.
    pub se: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub success_count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wilson_95: Option<[f64; 2]>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, f64>,
}

impl Aggregate {
    pub fn from_summaries(paths: &[PathSummary]) -> Self {
        let values: Vec<f64> = paths.iter().map(|p| p.value).collect();
        let (mean, se) = mean_se(&values);
        let flags: Vec<bool> = paths.iter().filter_map(|p| p.success).collect();
        let (success_count, frequency, wilson_95) = if flags.len() == paths.len() && !flags.is_empty()
        {
            let k = flags.iter().filter(|&&s| s).count();
            (
                Some(k),
                Some(k as f64 / flags.len() as f64),
                Some(wilson_interval(k, flags.len(), 1.96)),
            )
        } else {
            (None, None, None)
        };
        Self {
            n_paths: paths.len(),
            mean,
            se,
            success_count,
            frequency,
            wilson_95,
            extra: BTreeMap::new(),
        }
    }
}

/// Structured record of an experiment run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub paths: Vec<PathSummary>,
    pub aggregate: Aggregate,
    pub notes: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl ExperimentReport {
    pub fn new(command: &str, paths: Vec<PathSummary>) -> Self {
        let aggregate = Aggregate::from_summaries(&paths);
        Self {
            version: crate::VERSION.to_string(),
            command: command.to_string(),
            config: serde_json::Value::Null,
            paths,
            aggregate,
            notes: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn jitter_max(&self) -> f64 {
        self.paths.iter().map(|p| p.jitter_max).fold(0.0, f64::max)
    }
}

/// Report plus the per-path time series behind it.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub records: Vec<PathRecord>,
}

/// Sample mean and standard error (`NaN` for empty input, SE 0 for one value).
pub fn mean_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: usize, n: usize, z: f64) -> [f64; 2] {
    if n == 0 {
        return [0.0, 1.0];
    }
    let nf = n as f64;
    let p = k as f64 / nf;
    let z2 = z * z;
    let denom = 1.0 + z2 / nf;
    let center = (p + z2 / (2.0 * nf)) / denom;
    let half = z * (p * (1.0 - p) / nf + z2 / (4.0 * nf * nf)).sqrt() / denom;
    [(center - half).max(0.0), (center + half).min(1.0)]
}
