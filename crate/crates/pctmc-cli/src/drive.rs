//! Multi-restart fitting shared by `fit`, the benchmark, and the case study.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use pctmc::{
    fit, Dataset, Error, EstimatorConfig, InitSpec, ObservationKind, ParametricCtmc, Result,
};
use rayon::prelude::*;

use crate::report::{median, sha256_hex, Aggregate, ErrorStats, RestartReport};

/// Fit configuration for one batch of restarts. Restart `r` runs with seed
/// `seed + r`, so a batch is reproducible independently of scheduling.
#[derive(Debug, Clone)]
pub struct FitSpec {
    pub epsilon: f64,
    pub max_iters: usize,
    pub init_lo: f64,
    pub init_hi: f64,
    pub restarts: usize,
    pub seed: u64,
    pub mode: Option<ObservationKind>,
    pub fixed: BTreeMap<String, f64>,
    pub strip_timings: bool,
}

impl Default for FitSpec {
    fn default() -> Self {
        FitSpec {
            epsilon: 1e-2,
            max_iters: 100,
            init_lo: 0.1,
            init_hi: 5.0,
            restarts: 10,
            seed: 0,
            mode: None,
            fixed: BTreeMap::new(),
            strip_timings: false,
        }
    }
}

/// Run `spec.restarts` independent fits concurrently; the result is ordered
/// by restart index regardless of scheduling.
pub fn fit_restarts(
    chain: &ParametricCtmc,
    data: &Dataset,
    spec: &FitSpec,
) -> Result<Vec<RestartReport>> {
    if spec.restarts == 0 {
        return Err(Error::Invalid("at least one restart is required".into()));
    }
    let runs: Vec<Result<RestartReport>> = (0..spec.restarts)
        .into_par_iter()
        .map(|r| {
            let seed = spec.seed.wrapping_add(r as u64);
            let cfg = EstimatorConfig {
                epsilon: spec.epsilon,
                max_iters: spec.max_iters,
                init: InitSpec::Range { lo: spec.init_lo, hi: spec.init_hi },
                seed,
                mode: spec.mode,
                fixed: spec.fixed.clone(),
                ..EstimatorConfig::default()
            };
            let started = Instant::now();
            let res = fit(chain, data, &cfg)?;
            let elapsed = started.elapsed().as_secs_f64();
            Ok(RestartReport {
                index: r,
                seed,
                init: res.init,
                valuation: res.valuation,
                loglik: res.loglik,
                iterations: res.iterations,
                converged: res.converged,
                loglik_trace: res.loglik_trace,
                wall_time_s: (!spec.strip_timings).then_some(elapsed),
            })
        })
        .collect();
    runs.into_iter().collect()
}

/// Summarize a batch of restarts; relative errors are filled in only when
/// `truth` supplies a value for every estimated (non-fixed) parameter.
pub fn aggregate(
    restarts: &[RestartReport],
    names: &[String],
    fixed: &BTreeMap<String, f64>,
    truth: Option<&BTreeMap<String, f64>>,
) -> Result<Aggregate> {
    let best_restart = restarts
        .iter()
        .enumerate()
        .max_by(|(_, a), (_, b)| a.loglik.total_cmp(&b.loglik))
        .map(|(i, _)| i)
        .ok_or_else(|| Error::Invalid("no restarts to aggregate".into()))?;
    let mean_wall_time_s = restarts
        .iter()
        .map(|r| r.wall_time_s)
        .sum::<Option<f64>>()
        .map(|t| t / restarts.len() as f64);

    let error = match truth {
        None => None,
        Some(truth) => Some(error_stats(restarts, best_restart, names, fixed, truth)?),
    };
    Ok(Aggregate {
        best_restart,
        best_valuation: restarts[best_restart].valuation.clone(),
        best_loglik: restarts[best_restart].loglik,
        all_converged: restarts.iter().all(|r| r.converged),
        max_iterations: restarts.iter().map(|r| r.iterations).max().unwrap_or(0),
        mean_wall_time_s,
        error,
    })
}

fn error_stats(
    restarts: &[RestartReport],
    best_restart: usize,
    names: &[String],
    fixed: &BTreeMap<String, f64>,
    truth: &BTreeMap<String, f64>,
) -> Result<ErrorStats> {
    let mut indices = Vec::new();
    let mut est_names = Vec::new();
    let mut truths = Vec::new();
    for (i, name) in names.iter().enumerate() {
        if fixed.contains_key(name) {
            continue;
        }
        let t = *truth.get(name).ok_or_else(|| {
            Error::Invalid(format!("no true value supplied for parameter `{name}`"))
        })?;
        if t == 0.0 {
            return Err(Error::Invalid(format!(
                "relative error against `{name}` is undefined: its true value is 0"
            )));
        }
        indices.push(i);
        est_names.push(name.clone());
        truths.push(t);
    }
    if indices.is_empty() {
        return Err(Error::Invalid("all parameters are fixed, nothing to score".into()));
    }

    let delta_of = |r: &RestartReport| -> Vec<f64> {
        indices
            .iter()
            .zip(&truths)
            .map(|(&i, t)| (r.valuation[i] - t).abs() / t.abs())
            .collect()
    };
    let deltas: Vec<Vec<f64>> = restarts.iter().map(delta_of).collect();
    let l1: Vec<f64> = deltas.iter().map(|d| d.iter().sum()).collect();
    let linf: Vec<f64> = deltas.iter().map(|d| d.iter().fold(0.0, |m, x| x.max(m))).collect();
    let mut delta_mean = vec![0.0; indices.len()];
    for d in &deltas {
        for (m, x) in delta_mean.iter_mut().zip(d) {
            *m += x / restarts.len() as f64;
        }
    }
    Ok(ErrorStats {
        names: est_names,
        truth: truths,
        delta_best: deltas[best_restart].clone(),
        delta_mean,
        mean_l1: l1.iter().sum::<f64>() / l1.len() as f64,
        mean_linf: linf.iter().sum::<f64>() / linf.len() as f64,
        median_l1: median(&l1),
        median_linf: median(&linf),
        l1_per_restart: l1,
        linf_per_restart: linf,
    })
}

/// Read a model source file, returning the text and its content hash.
pub fn read_model(path: &Path) -> Result<(String, String)> {
    let text = std::fs::read_to_string(path)?;
    let sha = sha256_hex(text.as_bytes());
    Ok((text, sha))
}

/// Read a dataset file, returning the sequences and its content hash.
pub fn read_dataset(path: &Path) -> Result<(Dataset, String)> {
    let bytes = std::fs::read(path)?;
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::DatasetFormat { line: 0, msg: "file is not valid UTF-8".into() })?;
    let data = Dataset::from_jsonl(text)?;
    Ok((data, sha256_hex(&bytes)))
}
