//! Report types shared by every subcommand, plus hashing and CSV helpers.
//!
//! Reports are designed to be byte-reproducible: maps are ordered, restart
//! entries are sorted by index, and every wall-time field is optional so
//! that `--strip-timings` can null the only nondeterministic values.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Everything that determines a fit, echoed back for provenance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitEcho {
    pub bindings: BTreeMap<String, f64>,
    pub freed: Vec<String>,
    pub fixed: BTreeMap<String, f64>,
    pub observables: Vec<String>,
    pub mode: String,
    pub epsilon: f64,
    pub max_iters: usize,
    pub init_lo: f64,
    pub init_hi: f64,
    pub restarts: usize,
    pub seed: u64,
}

/// One restart of the estimator.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RestartReport {
    pub index: usize,
    pub seed: u64,
    pub init: Vec<f64>,
    pub valuation: Vec<f64>,
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub loglik_trace: Vec<f64>,
    pub wall_time_s: Option<f64>,
}

/// Relative errors `|estimate - truth| / |truth|` per estimated parameter,
/// present only when true values were supplied.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ErrorStats {
    pub names: Vec<String>,
    pub truth: Vec<f64>,
    pub delta_best: Vec<f64>,
    pub delta_mean: Vec<f64>,
    pub l1_per_restart: Vec<f64>,
    pub linf_per_restart: Vec<f64>,
    pub mean_l1: f64,
    pub mean_linf: f64,
    pub median_l1: f64,
    pub median_linf: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub best_restart: usize,
    pub best_valuation: Vec<f64>,
    pub best_loglik: f64,
    pub all_converged: bool,
    pub max_iterations: usize,
    pub mean_wall_time_s: Option<f64>,
    pub error: Option<ErrorStats>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub model_sha256: String,
    pub dataset_sha256: Option<String>,
    pub parameters: Vec<String>,
    pub config: FitEcho,
    pub restarts: Vec<RestartReport>,
    pub aggregate: Aggregate,
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report serialization");
    s.push('\n');
    s
}

pub fn median(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty(), "median of an empty slice");
    let mut sorted = xs.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Render one CSV field; floats use the shortest round-trip form.
pub fn csv_field(v: Option<f64>) -> String {
    match v {
        Some(x) => format!("{x}"),
        None => String::new(),
    }
}
