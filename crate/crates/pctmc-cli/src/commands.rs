//! Implementations behind the `build`, `simulate`, and `fit` subcommands.

use std::collections::BTreeMap;

use pctmc::prism;
use pctmc::{Dataset, ObservationKind, Result};
use serde::{Deserialize, Serialize};

use crate::drive::{aggregate, fit_restarts, FitSpec};
use crate::report::{sha256_hex, FitEcho, RunReport};

/// What `build` prints: the compiled chain in numbers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BuildSummary {
    pub model_sha256: String,
    pub states: usize,
    pub transitions: usize,
    pub parameters: Vec<String>,
    pub observables: Vec<String>,
}

/// Compile and explore a model. With no explicit observables every
/// variable is observable.
pub fn build_summary(
    src: &str,
    bindings: &BTreeMap<String, f64>,
    free: &[String],
    observables: Option<&[String]>,
) -> Result<BuildSummary> {
    let compiled = prism::compile(src, bindings, free)?;
    let observables: Vec<String> = match observables {
        Some(names) => names.to_vec(),
        None => compiled.var_names().to_vec(),
    };
    let chain = compiled.build(&observables)?;
    Ok(BuildSummary {
        model_sha256: sha256_hex(src.as_bytes()),
        states: chain.n_states(),
        transitions: chain.n_transitions(),
        parameters: chain.params().names().to_vec(),
        observables,
    })
}

/// Simulate a dataset by walking the model on the fly; the state space is
/// never built, so this scales to models far beyond what `build` explores.
pub fn simulate_dataset(
    src: &str,
    bindings: &BTreeMap<String, f64>,
    observables: &[String],
    n_seqs: usize,
    steps: usize,
    kind: ObservationKind,
    seed: u64,
) -> Result<Dataset> {
    let compiled = prism::compile(src, bindings, &[])?;
    compiled.simulate_dataset(observables, n_seqs, steps, kind, seed)
}

/// Compile a model against a dataset's observables and run a restart batch.
#[allow(clippy::too_many_arguments)]
pub fn run_fit(
    src: &str,
    bindings: &BTreeMap<String, f64>,
    free: &[String],
    data: &Dataset,
    dataset_sha256: Option<String>,
    spec: &FitSpec,
    truth: Option<&BTreeMap<String, f64>>,
) -> Result<RunReport> {
    let chain = prism::build_model(src, bindings, free, data.observables())?;
    let names = chain.params().names().to_vec();
    let restarts = fit_restarts(&chain, data, spec)?;
    let agg = aggregate(&restarts, &names, &spec.fixed, truth)?;
    let mode = match spec.mode.unwrap_or_else(|| data.kind()) {
        ObservationKind::Timed => "timed",
        ObservationKind::Untimed => "untimed",
    };
    Ok(RunReport {
        command: "fit".into(),
        model_sha256: sha256_hex(src.as_bytes()),
        dataset_sha256,
        parameters: names,
        config: FitEcho {
            bindings: bindings.clone(),
            freed: free.to_vec(),
            fixed: spec.fixed.clone(),
            observables: data.observables().to_vec(),
            mode: mode.into(),
            epsilon: spec.epsilon,
            max_iters: spec.max_iters,
            init_lo: spec.init_lo,
            init_hi: spec.init_hi,
            restarts: spec.restarts,
            seed: spec.seed,
        },
        restarts,
        aggregate: agg,
    })
}
