//! Test-only helpers: random models and a brute-force likelihood oracle.
//!
//! The oracle enumerates every state path compatible with an observation
//! and sums the path densities directly from the transition list. It shares
//! no code with the scaled forward-backward sweep, so agreement between the
//! two is meaningful evidence. Keep observations short when calling it: the
//! enumeration is exponential in the horizon by design.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::ctmc::{ConcreteCtmc, Label, ParametricCtmc};
use crate::observations::{self, Dataset, ObservationKind};
use crate::params::ParamSpace;
use crate::rate::{Monomial, RateExpr};

/// A randomly generated model together with a positive valuation.
pub struct RandomModel {
    pub model: ParametricCtmc,
    pub truth: Vec<f64>,
}

/// Generate a small random model, deterministic in `seed`.
///
/// States carry fewer distinct labels than there are states, so the state
/// is genuinely hidden. Rates mix constants with monomials of total degree
/// one or two; a third of the seeds use degree one everywhere, a third
/// degree two everywhere, the rest mix degrees.
pub fn random_model(seed: u64) -> RandomModel {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_states = rng.gen_range(2..=5usize);
    let n_params = rng.gen_range(1..=3usize);
    let n_labels = rng.gen_range(1..=n_states.min(3));
    let style = rng.gen_range(0..3u8);

    let params = ParamSpace::new((0..n_params).map(|i| format!("p{i}")).collect())
        .expect("generated names are distinct");
    let labels: Vec<Label> = (0..n_states).map(|s| Label(vec![(s % n_labels) as i64])).collect();

    let mut edges = Vec::new();
    for s in 0..n_states {
        for t in 0..n_states {
            if s == t || rng.gen::<f64>() < 0.4 {
                continue;
            }
            let coeff = rng.gen_range(0.2..2.0);
            let expr = if rng.gen::<f64>() < 0.4 {
                RateExpr::constant(coeff, n_params).expect("positive coefficient")
            } else {
                let degree = match style {
                    0 => 1,
                    1 => 2,
                    _ => rng.gen_range(1..=2),
                };
                let mut exps = vec![0u32; n_params];
                for _ in 0..degree {
                    exps[rng.gen_range(0..n_params)] += 1;
                }
                RateExpr::from_monomial(Monomial::new(coeff, exps).expect("positive coefficient"))
            };
            edges.push((s, t, expr));
        }
    }
    if !edges.iter().any(|(s, _, _)| *s == 0) {
        let expr = RateExpr::constant(1.0, n_params).expect("positive coefficient");
        edges.push((0, n_states - 1, expr));
    }

    let initial = if rng.gen::<bool>() {
        let mut v = vec![0.0; n_states];
        v[rng.gen_range(0..n_states)] = 1.0;
        v
    } else {
        let w: Vec<f64> = (0..n_states).map(|_| rng.gen_range(0.1..1.0)).collect();
        let total: f64 = w.iter().sum();
        w.iter().map(|x| x / total).collect()
    };

    let truth: Vec<f64> = (0..n_params).map(|_| rng.gen_range(0.3..2.0)).collect();
    let model = ParametricCtmc::new(params, labels, initial, edges)
        .expect("generated model is well formed");
    RandomModel { model, truth }
}

/// A valuation with entries drawn uniformly from `[lo, hi]`.
pub fn random_valuation(seed: u64, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.gen_range(lo..=hi)).collect()
}

/// Simulate a dataset from the model at its bundled valuation.
pub fn random_dataset(
    rm: &RandomModel,
    n_seqs: usize,
    steps: usize,
    kind: ObservationKind,
    seed: u64,
) -> Dataset {
    let c = rm.model.instantiate(&rm.truth).expect("truth valuation is valid");
    observations::simulate_dataset(&c, vec!["o".into()], n_seqs, steps, kind, seed)
        .expect("simulation parameters are valid")
}

fn exit_of(m: &ConcreteCtmc, s: usize) -> f64 {
    m.transitions().iter().filter(|t| t.source == s).map(|t| t.rate).sum()
}

fn paths_from(
    m: &ConcreteCtmc,
    s: usize,
    t: usize,
    labels: &[Label],
    dwells: Option<&[f64]>,
) -> f64 {
    if t + 1 == labels.len() {
        return 1.0;
    }
    let exit = exit_of(m, s);
    if exit == 0.0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for tr in m.transitions().iter().filter(|tr| tr.source == s) {
        if *m.label(tr.target) != labels[t + 1] {
            continue;
        }
        let step = match dwells {
            Some(d) => tr.rate * (-exit * d[t]).exp(),
            None => tr.rate / exit,
        };
        sum += step * paths_from(m, tr.target, t + 1, labels, dwells);
    }
    sum
}

/// Log-likelihood of one observation by exhaustive path enumeration.
///
/// Pass dwell times for the timed semantics, `None` for the untimed one.
/// Returns negative infinity when no state path fits.
pub fn brute_force_loglik(m: &ConcreteCtmc, labels: &[Label], dwells: Option<&[f64]>) -> f64 {
    assert!(!labels.is_empty());
    if let Some(d) = dwells {
        assert_eq!(d.len(), labels.len() - 1);
    }
    let mut total = 0.0;
    for s in 0..m.n_states() {
        let pi = m.initial()[s];
        if pi > 0.0 && *m.label(s) == labels[0] {
            total += pi * paths_from(m, s, 0, labels, dwells);
        }
    }
    if total > 0.0 {
        total.ln()
    } else {
        f64::NEG_INFINITY
    }
}

/// Dataset log-likelihood by path enumeration: the per-sequence sum.
pub fn brute_force_dataset_loglik(p: &ParametricCtmc, v: &[f64], data: &Dataset) -> f64 {
    let c = p.instantiate(v).expect("valuation is valid");
    let mut total = 0.0;
    for seq in data.iter() {
        total += brute_force_loglik(&c, seq.labels, seq.dwells);
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_chain() -> ParametricCtmc {
        let params = ParamSpace::new(vec!["a".into()]).unwrap();
        let edges = vec![
            (0, 1, RateExpr::constant(2.0, 1).unwrap()),
            (1, 0, RateExpr::constant(3.0, 1).unwrap()),
        ];
        ParametricCtmc::new(
            params,
            vec![Label(vec![0]), Label(vec![1])],
            vec![1.0, 0.0],
            edges,
        )
        .unwrap()
    }

    #[test]
    fn oracle_matches_hand_computation() {
        let c = two_state_chain().instantiate(&[1.0]).unwrap();
        let labels = vec![Label(vec![0]), Label(vec![1]), Label(vec![0])];
        let dwells = [0.5, 0.2];
        let timed = brute_force_loglik(&c, &labels, Some(&dwells));
        assert!((timed - (6.0f64.ln() - 1.6)).abs() < 1e-12);
        let untimed = brute_force_loglik(&c, &labels, None);
        assert!(untimed.abs() < 1e-12);
    }

    #[test]
    fn oracle_reports_impossible_observations() {
        let c = two_state_chain().instantiate(&[1.0]).unwrap();
        let labels = vec![Label(vec![0]), Label(vec![0])];
        assert_eq!(brute_force_loglik(&c, &labels, None), f64::NEG_INFINITY);
    }

    #[test]
    fn generated_models_are_reproducible() {
        for seed in 0..30 {
            let a = random_model(seed);
            let b = random_model(seed);
            assert_eq!(a.truth, b.truth);
            assert_eq!(a.model.n_states(), b.model.n_states());
            assert_eq!(a.model.n_transitions(), b.model.n_transitions());
            assert!(a.model.n_states() >= 2);
            let c = a.model.instantiate(&a.truth).unwrap();
            assert!(c.exit(0) > 0.0);
        }
    }
}
