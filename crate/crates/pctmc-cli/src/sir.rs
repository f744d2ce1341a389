//! Two-step estimation pipeline on the bundled epidemic model.
//!
//! Training data is simulated from the full model at reference parameter
//! values; the rates are then re-estimated on a reduced model whose
//! susceptible count is implicit and whose recovered count is rescaled to
//! a small number of buckets. Step one fits the infection and recovery
//! coefficients on data without lockdown (plock = 1); step two fits the
//! lockdown factor with those coefficients pinned.

use std::collections::BTreeMap;

use pctmc::{prism, Dataset, Error, ObservationKind, Result};
use serde::{Deserialize, Serialize};

use crate::drive::{aggregate, fit_restarts, FitSpec};
use crate::report::{sha256_hex, Aggregate, RestartReport};

pub const SIR_SOURCE: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/sir.prism"));

pub const FULL_POPULATION: i64 = 100_000;
pub const BETA_TRUTH: f64 = 0.122128;
pub const GAMMA_TRUTH: f64 = 0.127283;
pub const PLOCK_TRUTH: f64 = 0.472081;

/// Buckets for the rescaled recovered count, as in the reduced model.
const NB_R: i64 = 10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SirOptions {
    /// Population divisor: the pipeline runs at SIZE = 100000 / scale.
    pub scale: u32,
    pub seqs: usize,
    pub len: usize,
    pub seed: u64,
    pub restarts: usize,
    pub epsilon: f64,
    pub max_iters: usize,
    pub init_lo: f64,
    pub init_hi: f64,
    pub strip_timings: bool,
}

impl Default for SirOptions {
    fn default() -> Self {
        SirOptions {
            scale: 100,
            seqs: 1,
            len: 30,
            seed: 0,
            restarts: 10,
            epsilon: 1e-2,
            max_iters: 100,
            init_lo: 0.01,
            init_hi: 1.0,
            strip_timings: false,
        }
    }
}

/// Variable bounds of the reduced model, chosen from the training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SirBounds {
    pub size: i64,
    pub lbound_i: i64,
    pub ubound_i: i64,
    pub nb_r: i64,
    pub r_total: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SirStep {
    pub name: String,
    pub bindings: BTreeMap<String, f64>,
    pub parameters: Vec<String>,
    pub dataset_sha256: String,
    pub restarts: Vec<RestartReport>,
    pub aggregate: Aggregate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SirReport {
    pub command: String,
    pub options: SirOptions,
    pub truths: BTreeMap<String, f64>,
    pub data_model_sha256: String,
    pub fit_model_sha256: String,
    pub fit_model_source: String,
    pub bounds: SirBounds,
    pub step1: SirStep,
    pub step2: SirStep,
    pub estimates: BTreeMap<String, f64>,
    pub absolute_errors: BTreeMap<String, f64>,
}

pub fn sir_truths() -> BTreeMap<String, f64> {
    BTreeMap::from([
        ("beta".to_string(), BETA_TRUTH),
        ("gamma".to_string(), GAMMA_TRUTH),
        ("plock".to_string(), PLOCK_TRUTH),
    ])
}

/// The reduced source: infected counts bounded by `lbound_i..ubound_i`
/// (left to the caller to bind), recovered counts rescaled so that one unit
/// of `r` stands for `r_total / nb_r` recoveries.
pub fn reduced_source(size: i64, r_total: i64) -> String {
    format!(
        "ctmc

// reduced epidemic model: susceptibles implicit, recoveries bucketed
const int ubound_i;
const int lbound_i;
const int nb_r = {NB_R};
const double size_r = {r_total}/nb_r;
const double beta;
const double gamma;
const double plock;
const int SIZE = {size};

module SIR
i : [lbound_i..ubound_i] init 48;
r : [0..nb_r-1] init 0;

[infection] i>0 & i<ubound_i -> i*(SIZE-(i+(r+0.5)*size_r)) : (i'=i+1);
[recovery] i>0 & r<nb_r-1 -> i*((size_r)-1)/(size_r) : (i'=i-1);
[recovery] i>0 & r<nb_r-1 -> i*1/(size_r) : (r'=r+1)&(i'=i-1);
[recovery] i>0 & r=nb_r-1 -> i : (i'=i-1);
endmodule

module Rates
[infection] true -> beta*plock/SIZE : true;
[recovery] true -> gamma*plock : true;
endmodule
"
    )
}

/// Infected-count range and per-sequence recovery counts seen in the data.
fn observed_shape(datasets: &[&Dataset]) -> Result<(i64, i64, i64)> {
    let mut min_i = i64::MAX;
    let mut max_i = i64::MIN;
    let mut max_recoveries = 0i64;
    for data in datasets {
        for seq in data.iter() {
            let mut recoveries = 0;
            for (t, label) in seq.labels.iter().enumerate() {
                let i = label.0[0];
                min_i = min_i.min(i);
                max_i = max_i.max(i);
                if t > 0 && i < seq.labels[t - 1].0[0] {
                    recoveries += 1;
                }
            }
            max_recoveries = max_recoveries.max(recoveries);
        }
    }
    if min_i > max_i {
        return Err(Error::Invalid("empty training data".into()));
    }
    Ok((min_i, max_i, max_recoveries))
}

fn derive_bounds(size: i64, datasets: &[&Dataset]) -> Result<SirBounds> {
    let (min_i, max_i, max_recoveries) = observed_shape(datasets)?;
    let ubound_i = max_i + (max_i / 5).max(5);
    let lbound_i = (min_i - 5).max(0);
    let r_total = (max_recoveries + (max_recoveries / 5).max(5)).max(NB_R);
    if ubound_i + r_total >= size {
        return Err(Error::Invalid(format!(
            "training data spans {ubound_i} infections and {r_total} recoveries, too close to the population {size} for the reduced model"
        )));
    }
    Ok(SirBounds { size, lbound_i, ubound_i, nb_r: NB_R, r_total })
}

fn simulate_training(
    size: i64,
    plock: f64,
    seqs: usize,
    len: usize,
    seed: u64,
) -> Result<Dataset> {
    let bindings = BTreeMap::from([
        ("SIZE".to_string(), size as f64),
        ("beta".to_string(), BETA_TRUTH),
        ("gamma".to_string(), GAMMA_TRUTH),
        ("plock".to_string(), plock),
    ]);
    let compiled = prism::compile(SIR_SOURCE, &bindings, &[])?;
    compiled.simulate_dataset(&["i".to_string()], seqs, len, ObservationKind::Timed, seed)
}

fn run_step(
    source: &str,
    bindings: &BTreeMap<String, f64>,
    name: &str,
    data: &Dataset,
    truth: &BTreeMap<String, f64>,
    opts: &SirOptions,
) -> Result<SirStep> {
    let chain = prism::build_model(source, bindings, &[], data.observables())?;
    let spec = FitSpec {
        epsilon: opts.epsilon,
        max_iters: opts.max_iters,
        init_lo: opts.init_lo,
        init_hi: opts.init_hi,
        restarts: opts.restarts,
        seed: opts.seed,
        mode: None,
        fixed: BTreeMap::new(),
        strip_timings: opts.strip_timings,
    };
    let restarts = fit_restarts(&chain, data, &spec)?;
    let agg = aggregate(&restarts, chain.params().names(), &spec.fixed, Some(truth))?;
    Ok(SirStep {
        name: name.into(),
        bindings: bindings.clone(),
        parameters: chain.params().names().to_vec(),
        dataset_sha256: sha256_hex(data.to_jsonl().as_bytes()),
        restarts,
        aggregate: agg,
    })
}

pub fn run_case(opts: &SirOptions) -> Result<(SirReport, Dataset, Dataset)> {
    if opts.scale == 0 || FULL_POPULATION / (opts.scale as i64) < 200 {
        return Err(Error::Invalid(
            "scale must be between 1 and 500 so the population stays above 200".into(),
        ));
    }
    let size = FULL_POPULATION / opts.scale as i64;
    let d1 = simulate_training(size, 1.0, opts.seqs, opts.len, opts.seed)?;
    let d2 = simulate_training(size, PLOCK_TRUTH, opts.seqs, opts.len, opts.seed.wrapping_add(1))?;

    let bounds = derive_bounds(size, &[&d1, &d2])?;
    let source = reduced_source(size, bounds.r_total);
    let bound_consts = [
        ("ubound_i".to_string(), bounds.ubound_i as f64),
        ("lbound_i".to_string(), bounds.lbound_i as f64),
    ];

    let mut bindings1 = BTreeMap::from(bound_consts.clone());
    bindings1.insert("plock".to_string(), 1.0);
    let step1 = run_step(
        &source,
        &bindings1,
        "infection-recovery",
        &d1,
        &BTreeMap::from([("beta".to_string(), BETA_TRUTH), ("gamma".to_string(), GAMMA_TRUTH)]),
        opts,
    )?;
    let beta_hat = step1.aggregate.best_valuation[0];
    let gamma_hat = step1.aggregate.best_valuation[1];

    let mut bindings2 = BTreeMap::from(bound_consts);
    bindings2.insert("beta".to_string(), beta_hat);
    bindings2.insert("gamma".to_string(), gamma_hat);
    let step2 = run_step(
        &source,
        &bindings2,
        "lockdown",
        &d2,
        &BTreeMap::from([("plock".to_string(), PLOCK_TRUTH)]),
        opts,
    )?;
    let plock_hat = step2.aggregate.best_valuation[0];

    let estimates = BTreeMap::from([
        ("beta".to_string(), beta_hat),
        ("gamma".to_string(), gamma_hat),
        ("plock".to_string(), plock_hat),
    ]);
    let truths = sir_truths();
    let absolute_errors = estimates
        .iter()
        .map(|(name, value)| (name.clone(), (value - truths[name]).abs()))
        .collect();

    let report = SirReport {
        command: "case-sir".into(),
        options: opts.clone(),
        truths,
        data_model_sha256: sha256_hex(SIR_SOURCE.as_bytes()),
        fit_model_sha256: sha256_hex(source.as_bytes()),
        fit_model_source: source,
        bounds,
        step1,
        step2,
        estimates,
        absolute_errors,
    };
    Ok((report, d1, d2))
}

/// The parameter table as CSV: name, truth, estimate, absolute error.
pub fn sir_csv(report: &SirReport) -> String {
    let mut out = String::from("parameter,truth,estimate,absolute_error\n");
    for (name, truth) in &report.truths {
        out.push_str(&format!(
            "{},{},{},{}\n",
            name, truth, report.estimates[name], report.absolute_errors[name]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use pctmc::Label;
    use pctmc::TimedObservation;

    fn dataset_of(values: &[&[i64]]) -> Dataset {
        let seqs = values
            .iter()
            .map(|vs| {
                let labels = vs.iter().map(|&v| Label(vec![v])).collect::<Vec<_>>();
                let dwells = vec![0.5; vs.len() - 1];
                TimedObservation::new(labels, dwells).unwrap()
            })
            .collect();
        Dataset::timed(vec!["i".to_string()], seqs).unwrap()
    }

    #[test]
    fn bounds_cover_the_observed_range_with_margin() {
        let d = dataset_of(&[&[48, 49, 48, 47, 46], &[48, 47, 46, 45, 44]]);
        let b = derive_bounds(1000, &[&d]).unwrap();
        assert_eq!(b.ubound_i, 49 + 9);
        assert_eq!(b.lbound_i, 44 - 5);
        assert_eq!(b.nb_r, 10);
        assert_eq!(b.r_total, 10);
    }

    #[test]
    fn recovery_counts_use_the_worst_sequence() {
        let d = dataset_of(&[&[48, 47, 46, 45, 44, 43, 42, 41, 40, 39, 38, 37]]);
        let b = derive_bounds(1000, &[&d]).unwrap();
        assert_eq!(b.r_total, 16);
        assert_eq!(b.lbound_i, 32);
    }

    #[test]
    fn the_reduced_model_compiles_and_splits_recoveries() {
        let source = reduced_source(1000, 40);
        let bindings = BTreeMap::from([
            ("ubound_i".to_string(), 60.0),
            ("lbound_i".to_string(), 30.0),
            ("plock".to_string(), 1.0),
        ]);
        let compiled = prism::compile(&source, &bindings, &[]).unwrap();
        assert_eq!(compiled.params().names(), ["beta", "gamma"]);
        assert_eq!(compiled.initial_state(), vec![48, 0]);
        let succ = compiled.successors(&[48, 0]).unwrap();
        assert_eq!(succ.len(), 3);
        // total recovery rate stays gamma * i regardless of the bucket split
        let recovery_coeff: f64 = succ
            .iter()
            .filter(|(_, r)| r.terms()[0].exponents() == [0, 1])
            .map(|(_, r)| r.terms()[0].coeff())
            .sum();
        assert!((recovery_coeff - 48.0).abs() < 1e-9);
        // at the top bucket recovery no longer advances r
        let top = compiled.successors(&[48, 9]).unwrap();
        assert_eq!(top.len(), 2);
        let top_recovery: Vec<_> =
            top.iter().filter(|(s, _)| s == &vec![47, 9]).collect();
        assert_eq!(top_recovery.len(), 1);
        assert!((top_recovery[0].1.terms()[0].coeff() - 48.0).abs() < 1e-9);
    }

    #[test]
    fn a_desk_scale_case_lands_near_the_references() {
        let opts = SirOptions {
            seqs: 2,
            len: 60,
            restarts: 3,
            strip_timings: true,
            ..SirOptions::default()
        };
        let (report, d1, d2) = run_case(&opts).unwrap();
        assert_eq!(report.bounds.size, 1000);
        assert_eq!(d1.len(), 2);
        assert_eq!(d2.len(), 2);
        assert_eq!(report.step1.parameters, vec!["beta", "gamma"]);
        assert_eq!(report.step2.parameters, vec!["plock"]);
        assert!(report.absolute_errors["beta"] < 0.1, "{:?}", report.absolute_errors);
        assert!(report.absolute_errors["gamma"] < 0.1, "{:?}", report.absolute_errors);
        assert!(report.absolute_errors["plock"] < 0.2, "{:?}", report.absolute_errors);
        let csv = sir_csv(&report);
        assert_eq!(csv.lines().count(), 4);
    }
}
