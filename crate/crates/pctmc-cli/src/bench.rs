//! Estimation benchmark on the bundled tandem queueing model.
//!
//! For each queue capacity `c` the model is compiled with `mu1a`, `mu1b`,
//! `mu2`, and `kappa` freed, a timed dataset is simulated at the reference
//! rates, and both estimators fit it from random restarts. Rows report the
//! relative-error norms against the reference rates.

use std::collections::BTreeMap;
use std::time::Instant;

use pctmc::{prism, Error, ObservationKind, Result};
use serde::{Deserialize, Serialize};

use crate::drive::{aggregate, fit_restarts, FitSpec};
use crate::report::sha256_hex;

pub const TANDEM_SOURCE: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/tandem.prism"));

pub const TANDEM_OBSERVABLES: [&str; 2] = ["sc", "ph"];
pub const TANDEM_FREE: [&str; 4] = ["mu1a", "mu1b", "mu2", "kappa"];
pub const TANDEM_TRUTHS: [f64; 4] = [0.2, 1.8, 2.0, 4.0];

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchOptions {
    pub cmin: u32,
    pub cmax: u32,
    pub step: u32,
    /// Wall-clock budget in seconds; rows past it are marked skipped.
    pub timeout_s: f64,
    pub seqs: usize,
    pub len: usize,
    pub restarts: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub max_iters: usize,
    pub init_lo: f64,
    pub init_hi: f64,
    pub strip_timings: bool,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            cmin: 4,
            cmax: 8,
            step: 2,
            timeout_s: 3600.0,
            seqs: 100,
            len: 30,
            restarts: 10,
            seed: 0,
            epsilon: 1e-2,
            max_iters: 100,
            init_lo: 0.1,
            init_hi: 5.0,
            strip_timings: false,
        }
    }
}

/// One (capacity, estimator) cell of the benchmark table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchRow {
    pub c: u32,
    pub states: usize,
    pub transitions: usize,
    pub mode: String,
    pub skipped: bool,
    pub all_converged: Option<bool>,
    pub mean_l1: Option<f64>,
    pub mean_linf: Option<f64>,
    pub median_l1: Option<f64>,
    pub median_linf: Option<f64>,
    pub mean_wall_time_s: Option<f64>,
    pub row_wall_time_s: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchReport {
    pub command: String,
    pub model_sha256: String,
    pub truths: BTreeMap<String, f64>,
    pub options: BenchOptions,
    pub rows: Vec<BenchRow>,
}

pub fn tandem_truths() -> BTreeMap<String, f64> {
    TANDEM_FREE.iter().zip(TANDEM_TRUTHS).map(|(n, v)| (n.to_string(), v)).collect()
}

pub fn bench_tandem(opts: &BenchOptions) -> Result<BenchReport> {
    if opts.cmin == 0 || opts.step == 0 || opts.cmax < opts.cmin {
        return Err(Error::Invalid("capacity range needs cmin >= 1, step >= 1, cmax >= cmin".into()));
    }
    let observables: Vec<String> = TANDEM_OBSERVABLES.iter().map(|s| s.to_string()).collect();
    let free: Vec<String> = TANDEM_FREE.iter().map(|s| s.to_string()).collect();
    let truths = tandem_truths();
    let started = Instant::now();
    let mut rows = Vec::new();

    let mut c = opts.cmin;
    while c <= opts.cmax {
        let bindings = BTreeMap::from([("c".to_string(), c as f64)]);
        let chain = prism::build_model(TANDEM_SOURCE, &bindings, &free, &observables)?;
        let data = pctmc::observations::simulate_dataset(
            &chain.instantiate(&TANDEM_TRUTHS)?,
            observables.clone(),
            opts.seqs,
            opts.len,
            ObservationKind::Timed,
            opts.seed,
        )?;
        for mode in [ObservationKind::Timed, ObservationKind::Untimed] {
            let mode_name = match mode {
                ObservationKind::Timed => "timed",
                ObservationKind::Untimed => "untimed",
            };
            if started.elapsed().as_secs_f64() > opts.timeout_s {
                rows.push(BenchRow {
                    c,
                    states: chain.n_states(),
                    transitions: chain.n_transitions(),
                    mode: mode_name.into(),
                    skipped: true,
                    all_converged: None,
                    mean_l1: None,
                    mean_linf: None,
                    median_l1: None,
                    median_linf: None,
                    mean_wall_time_s: None,
                    row_wall_time_s: None,
                });
                continue;
            }
            let row_started = Instant::now();
            let spec = FitSpec {
                epsilon: opts.epsilon,
                max_iters: opts.max_iters,
                init_lo: opts.init_lo,
                init_hi: opts.init_hi,
                restarts: opts.restarts,
                seed: opts.seed,
                mode: Some(mode),
                fixed: BTreeMap::new(),
                strip_timings: opts.strip_timings,
            };
            let restarts = fit_restarts(&chain, &data, &spec)?;
            let agg = aggregate(&restarts, chain.params().names(), &spec.fixed, Some(&truths))?;
            let err = agg.error.expect("truths were supplied");
            rows.push(BenchRow {
                c,
                states: chain.n_states(),
                transitions: chain.n_transitions(),
                mode: mode_name.into(),
                skipped: false,
                all_converged: Some(agg.all_converged),
                mean_l1: Some(err.mean_l1),
                mean_linf: Some(err.mean_linf),
                median_l1: Some(err.median_l1),
                median_linf: Some(err.median_linf),
                mean_wall_time_s: agg.mean_wall_time_s,
                row_wall_time_s: (!opts.strip_timings)
                    .then(|| row_started.elapsed().as_secs_f64()),
            });
        }
        c += opts.step;
    }

    Ok(BenchReport {
        command: "bench-tandem".into(),
        model_sha256: sha256_hex(TANDEM_SOURCE.as_bytes()),
        truths,
        options: opts.clone(),
        rows,
    })
}

pub fn bench_csv(report: &BenchReport) -> String {
    let mut out = String::from(
        "c,states,transitions,mode,skipped,all_converged,mean_l1,mean_linf,median_l1,median_linf,mean_wall_time_s,row_wall_time_s\n",
    );
    for r in &report.rows {
        let conv = r.all_converged.map(|b| b.to_string()).unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.c,
            r.states,
            r.transitions,
            r.mode,
            r.skipped,
            conv,
            crate::report::csv_field(r.mean_l1),
            crate::report::csv_field(r.mean_linf),
            crate::report::csv_field(r.median_l1),
            crate::report::csv_field(r.median_linf),
            crate::report::csv_field(r.mean_wall_time_s),
            crate::report::csv_field(r.row_wall_time_s),
        ));
    }
    out
}
