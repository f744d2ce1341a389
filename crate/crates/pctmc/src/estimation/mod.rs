//! Maximum-likelihood estimation of rate parameters from partial
//! observations, by iterated minorize-maximize updates.
//!
//! One iteration at the current valuation `v`:
//!
//! 1. instantiate the chain and run forward-backward over every sequence;
//! 2. fold the posteriors into per-state occupancies (dwell-weighted when
//!    timed, visit counts when untimed) and per-transition usage weights;
//! 3. for each free parameter, solve a one-dimensional polynomial equation
//!    whose unique positive root maximizes a concave surrogate that touches
//!    the log-likelihood at `v` from below.
//!
//! Because each update maximizes a minorizer, the data log-likelihood never
//! decreases from one iteration to the next, for timed and untimed data
//! alike. When every transition mentioning a parameter has the same total
//! degree, the root has a closed form and no iteration is needed.

mod fb;

pub use fb::{forward_backward, omega, posteriors, FbTables, Posteriors, FB_CHECK_TOL};

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctmc::{ConcreteCtmc, ParametricCtmc};
use crate::error::{Error, Result};
use crate::observations::{Dataset, ObservationKind, SeqView};
use crate::polysolve::{UpdatePolynomial, ROOT_TOL};

/// Default lower bound keeping parameter values strictly positive.
pub const MIN_PARAM: f64 = 1e-12;

/// Expected data statistics at one valuation, summed over all sequences.
///
/// `gamma[s]` is the expected dwell time in state `s` (timed mode) or the
/// expected number of visits among positions `0..k` (untimed mode);
/// `xi[r]` is the expected number of uses of transition `r`. Both ignore
/// the final position of each sequence, which emits no jump.
#[derive(Debug, Clone)]
pub struct Accumulators {
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
    pub loglik: f64,
    pub kind: ObservationKind,
}

/// Per-sequence contribution: `(gamma, xi, loglik)`.
type SeqStats = (Vec<f64>, Vec<f64>, f64);

fn accumulate_sequence(m: &ConcreteCtmc, seq: SeqView<'_>, j: usize) -> Result<SeqStats> {
    let tables = forward_backward(m, seq.labels, seq.dwells)?;
    if !tables.feasible() {
        return Err(Error::Estimation(format!(
            "sequence {j} has zero likelihood under the current parameters"
        )));
    }
    let post = posteriors(&tables, m, seq.labels, seq.dwells)?;
    let n = m.n_states();
    let nt = m.n_transitions();
    let k = seq.labels.len() - 1;
    let mut gamma = vec![0.0; n];
    let mut xi = vec![0.0; nt];
    for t in 0..k {
        let weight = seq.dwells.map_or(1.0, |taus| taus[t]);
        for (s, g) in gamma.iter_mut().enumerate() {
            *g += weight * post.gamma(t, s);
        }
        for (r, x) in xi.iter_mut().enumerate() {
            *x += post.xi(t, r);
        }
    }
    Ok((gamma, xi, tables.loglik))
}

/// Instantiate at `v` and fold posterior statistics over the dataset.
///
/// Sequences are processed in parallel; the reduction runs in sequence
/// order, so results are bitwise reproducible regardless of thread count.
pub fn accumulate(p: &ParametricCtmc, v: &[f64], data: &Dataset) -> Result<Accumulators> {
    let m = p.instantiate(v)?;
    let per_seq: Vec<Result<SeqStats>> = (0..data.len())
        .into_par_iter()
        .map(|j| accumulate_sequence(&m, data.sequence(j), j))
        .collect();

    let mut out = Accumulators {
        gamma: vec![0.0; m.n_states()],
        xi: vec![0.0; m.n_transitions()],
        loglik: 0.0,
        kind: data.kind(),
    };
    for result in per_seq {
        let (gamma, xi, loglik) = result?;
        for (a, b) in out.gamma.iter_mut().zip(&gamma) {
            *a += b;
        }
        for (a, b) in out.xi.iter_mut().zip(&xi) {
            *a += b;
        }
        out.loglik += loglik;
    }
    Ok(out)
}

/// How a parameter fared in one update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamStatus {
    /// Pinned by configuration; never touched.
    Fixed,
    /// Occurs in no transition rate; the data carry no information on it.
    NotInModel,
    /// Updated through the uniform-degree closed form.
    ClosedForm,
    /// Updated by solving the update polynomial numerically.
    RootSolve,
    /// Expected usage was zero; value floored at the configured minimum.
    FlooredAtMin,
    /// Degenerate denominator; value kept, estimate is not informative.
    KeptDegenerate,
    /// No update has been applied yet.
    Untouched,
}

/// The ingredients of one coordinate update: solve
/// `sum over terms of coeff * y^degree = numerator`.
#[derive(Debug, Clone)]
pub struct UpdateInputs {
    /// Expected number of uses of the parameter, `sum_r xi[r] * a_ri`.
    pub numerator: f64,
    /// `(total degree, coefficient)` pairs, like terms merged.
    pub terms: Vec<(u32, f64)>,
    /// `sum_r f_r(v) * a_ri * w_src`, the closed-form denominator.
    pub denominator: f64,
    /// `Some(c)` when every transition mentioning the parameter has total
    /// degree `c`, enabling the closed form.
    pub uniform_degree: Option<u32>,
}

/// Occupancy weight of a source state in the update equations.
fn source_weight(acc: &Accumulators, m: &ConcreteCtmc, s: usize) -> f64 {
    match acc.kind {
        ObservationKind::Timed => acc.gamma[s],
        // untimed visits are converted to expected time via the current exit rate
        ObservationKind::Untimed => {
            if m.exit(s) > 0.0 {
                acc.gamma[s] / m.exit(s)
            } else {
                0.0
            }
        }
    }
}

/// Assemble the update equation for parameter `i`, or `None` when the
/// parameter occurs in no transition.
pub fn update_inputs(
    p: &ParametricCtmc,
    v: &[f64],
    acc: &Accumulators,
    i: usize,
) -> Result<Option<UpdateInputs>> {
    if !p.param_in_model(i) {
        return Ok(None);
    }
    if v[i] <= 0.0 {
        return Err(Error::Estimation(format!(
            "current value of `{}` must be positive to form an update, got {}",
            p.params().name(i),
            v[i]
        )));
    }
    let m = p.instantiate(v)?;
    let mut numerator = 0.0;
    let mut denominator = 0.0;
    let mut terms: Vec<(u32, f64)> = Vec::new();
    let mut uniform: Option<Option<u32>> = None;
    for (r, tr) in p.transitions().iter().enumerate() {
        let a_ri = tr.rate.exponent(i);
        if a_ri == 0 {
            continue;
        }
        numerator += acc.xi[r] * a_ri as f64;
        let degree = tr.rate.total_degree();
        uniform = Some(match uniform {
            None => Some(degree),
            Some(Some(d)) if d == degree => Some(degree),
            _ => None,
        });
        let contribution =
            tr.rate.eval(v) * a_ri as f64 * source_weight(acc, &m, tr.source);
        denominator += contribution;
        let coeff = contribution / v[i].powi(degree as i32);
        match terms.iter_mut().find(|(d, _)| *d == degree) {
            Some((_, c)) => *c += coeff,
            None => terms.push((degree, coeff)),
        }
    }
    terms.sort_by_key(|(d, _)| *d);
    Ok(Some(UpdateInputs {
        numerator,
        terms,
        denominator,
        uniform_degree: uniform.flatten(),
    }))
}

/// Result of one sweep of coordinate updates.
#[derive(Debug, Clone)]
pub struct MmStep {
    pub valuation: Vec<f64>,
    pub statuses: Vec<ParamStatus>,
}

fn mm_step(
    p: &ParametricCtmc,
    v: &[f64],
    acc: &Accumulators,
    kind: ObservationKind,
    min_param: f64,
) -> Result<MmStep> {
    if acc.kind != kind {
        return Err(Error::Estimation(format!(
            "{kind} update applied to {} statistics",
            acc.kind
        )));
    }
    p.params().check_valuation(v)?;
    let mut out = v.to_vec();
    let mut statuses = vec![ParamStatus::Untouched; v.len()];
    for i in 0..v.len() {
        if p.params().is_fixed(i) {
            statuses[i] = ParamStatus::Fixed;
            continue;
        }
        let Some(inputs) = update_inputs(p, v, acc, i)? else {
            statuses[i] = ParamStatus::NotInModel;
            continue;
        };
        if inputs.numerator <= 0.0 {
            // the data never use this parameter's transitions at the
            // current point; push it to the floor rather than divide by zero
            out[i] = min_param.min(v[i]);
            statuses[i] = ParamStatus::FlooredAtMin;
            continue;
        }
        if inputs.denominator <= 0.0 {
            out[i] = v[i];
            statuses[i] = ParamStatus::KeptDegenerate;
            continue;
        }
        let (value, status) = match inputs.uniform_degree {
            Some(c) => {
                let root = (v[i].powi(c as i32) * inputs.numerator / inputs.denominator)
                    .powf(1.0 / c as f64);
                (root, ParamStatus::ClosedForm)
            }
            None => {
                let poly = UpdatePolynomial::new(inputs.terms.clone(), inputs.numerator)?;
                (poly.positive_root(ROOT_TOL)?, ParamStatus::RootSolve)
            }
        };
        out[i] = value.max(min_param.min(v[i]));
        statuses[i] = status;
    }
    Ok(MmStep { valuation: out, statuses })
}

/// One update sweep against timed statistics.
pub fn mm_step_timed(
    p: &ParametricCtmc,
    v: &[f64],
    acc: &Accumulators,
    min_param: f64,
) -> Result<MmStep> {
    mm_step(p, v, acc, ObservationKind::Timed, min_param)
}

/// One update sweep against untimed statistics.
pub fn mm_step_untimed(
    p: &ParametricCtmc,
    v: &[f64],
    acc: &Accumulators,
    min_param: f64,
) -> Result<MmStep> {
    mm_step(p, v, acc, ObservationKind::Untimed, min_param)
}

/// Evaluate the surrogate minorizer at `v`, up to an additive constant that
/// does not depend on `v`. Differences of this function at fixed statistics
/// lower-bound log-likelihood differences:
/// `loglik(v) - loglik(v_m) >= surrogate(v) - surrogate(v_m)`.
pub fn surrogate(
    p: &ParametricCtmc,
    v_m: &[f64],
    acc: &Accumulators,
    v: &[f64],
) -> Result<f64> {
    p.params().check_valuation(v_m)?;
    p.params().check_valuation(v)?;
    let m = p.instantiate(v_m)?;
    let mut total = 0.0;
    for (r, tr) in p.transitions().iter().enumerate() {
        if tr.rate.is_constant() {
            continue;
        }
        let degree = tr.rate.total_degree();
        let w = source_weight(acc, &m, tr.source);
        let f_vm = tr.rate.eval(v_m);
        for i in 0..v.len() {
            let a_ri = tr.rate.exponent(i);
            if a_ri == 0 {
                continue;
            }
            if acc.xi[r] > 0.0 {
                total += acc.xi[r] * a_ri as f64 * v[i].ln();
            }
            if f_vm > 0.0 && w > 0.0 {
                if v_m[i] <= 0.0 {
                    return Err(Error::Estimation(format!(
                        "surrogate anchor value for `{}` must be positive",
                        p.params().name(i)
                    )));
                }
                total -= f_vm * w * a_ri as f64 / degree as f64
                    * (v[i] / v_m[i]).powi(degree as i32);
            }
        }
    }
    Ok(total)
}

/// Starting point for the fit.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum InitSpec {
    /// Explicit full valuation (fixed entries are overwritten).
    Values(Vec<f64>),
    /// Sample free parameters uniformly from `[lo, hi]`.
    Range { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Stop once the log-likelihood improves by at most this much.
    pub epsilon: f64,
    /// Maximum number of update sweeps.
    pub max_iters: usize,
    pub init: InitSpec,
    /// Seed for sampling the starting point (`InitSpec::Range`).
    pub seed: u64,
    /// Force timed or untimed treatment; `None` follows the dataset.
    /// Timed data can be fit untimed (times are dropped), not vice versa.
    pub mode: Option<ObservationKind>,
    /// Parameters pinned to known values, by name.
    pub fixed: BTreeMap<String, f64>,
    /// Strictly positive floor for parameter values.
    pub min_param: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        EstimatorConfig {
            epsilon: 1e-2,
            max_iters: 100,
            init: InitSpec::Range { lo: 0.1, hi: 5.0 },
            seed: 0,
            mode: None,
            fixed: BTreeMap::new(),
            min_param: MIN_PARAM,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Final parameter values, aligned with the chain's parameter names.
    pub valuation: Vec<f64>,
    /// Log-likelihood at the final valuation.
    pub loglik: f64,
    /// Log-likelihood after 0, 1, 2, ... update sweeps; never decreasing.
    pub loglik_trace: Vec<f64>,
    /// Number of update sweeps applied.
    pub iterations: usize,
    /// Whether the improvement threshold was reached within the budget.
    pub converged: bool,
    /// Starting point actually used.
    pub init: Vec<f64>,
    /// Status of each parameter in the most recent sweep.
    pub statuses: Vec<ParamStatus>,
}

fn initial_valuation(
    p: &ParametricCtmc,
    cfg: &EstimatorConfig,
) -> Result<Vec<f64>> {
    let n = p.params().len();
    let mut v = match &cfg.init {
        InitSpec::Values(values) => {
            if values.len() != n {
                return Err(Error::dim(format!(
                    "initial valuation has {} entries for {n} parameters",
                    values.len()
                )));
            }
            values.clone()
        }
        InitSpec::Range { lo, hi } => {
            if !(lo.is_finite() && hi.is_finite()) || *lo <= 0.0 || lo > hi {
                return Err(Error::invalid(format!(
                    "initial range [{lo}, {hi}] must satisfy 0 < lo <= hi"
                )));
            }
            let mut rng = ChaCha12Rng::seed_from_u64(cfg.seed);
            (0..n).map(|_| rng.gen_range(*lo..=*hi)).collect()
        }
    };
    for (&i, &value) in p.params().fixed() {
        v[i] = value;
    }
    p.params().check_valuation(&v)?;
    for i in p.params().free_indices() {
        if v[i] < cfg.min_param {
            return Err(Error::invalid(format!(
                "initial value {} for `{}` is below the floor {}",
                v[i],
                p.params().name(i),
                cfg.min_param
            )));
        }
    }
    Ok(v)
}

/// Run the iteration to convergence from one starting point.
pub fn fit(p: &ParametricCtmc, data: &Dataset, cfg: &EstimatorConfig) -> Result<EstimationResult> {
    if !cfg.epsilon.is_finite() || cfg.epsilon < 0.0 {
        return Err(Error::invalid(format!("epsilon must be finite and nonnegative, got {}", cfg.epsilon)));
    }
    if !cfg.min_param.is_finite() || cfg.min_param <= 0.0 {
        return Err(Error::invalid(format!("min_param must be positive, got {}", cfg.min_param)));
    }
    let space = p.params().with_fixed(&cfg.fixed)?;
    let p = p.with_params(space)?;

    let stripped;
    let (data, kind) = match (cfg.mode, data.kind()) {
        (None, k) => (data, k),
        (Some(k), dk) if k == dk => (data, k),
        (Some(ObservationKind::Untimed), ObservationKind::Timed) => {
            stripped = data.strip_times();
            (&stripped, ObservationKind::Untimed)
        }
        (Some(ObservationKind::Timed), ObservationKind::Untimed) => {
            return Err(Error::Estimation(
                "cannot fit an untimed dataset in timed mode".into(),
            ));
        }
        _ => unreachable!(),
    };

    let init = initial_valuation(&p, cfg)?;
    let mut v = init.clone();
    let mut statuses = vec![ParamStatus::Untouched; v.len()];
    let mut trace = Vec::new();
    let converged;
    loop {
        let acc = accumulate(&p, &v, data)?;
        trace.push(acc.loglik);
        let m = trace.len() - 1;
        if m > 0 && trace[m] - trace[m - 1] <= cfg.epsilon {
            converged = true;
            break;
        }
        if m >= cfg.max_iters {
            converged = false;
            break;
        }
        let step = mm_step(&p, &v, &acc, kind, cfg.min_param)?;
        v = step.valuation;
        statuses = step.statuses;
    }
    Ok(EstimationResult {
        loglik: *trace.last().expect("at least one evaluation"),
        iterations: trace.len() - 1,
        valuation: v,
        loglik_trace: trace,
        converged,
        init,
        statuses,
    })
}
