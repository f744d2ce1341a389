//! Scaled forward-backward recursions over the embedded jump chain.
//!
//! For an observation `l_0 .. l_k` (optionally with dwell times
//! `tau_0 .. tau_{k-1}`) the per-position emission weight of state `s` is
//!
//! - timed, `t < k`:  `[label(s) = l_t] * E(s) * exp(-E(s) * tau_t)`
//! - timed, `t = k`:  `[label(s) = l_t]`
//! - untimed:         `[label(s) = l_t]`
//!
//! and transitions are weighted by the jump probabilities `R(s,s')/E(s)`.
//! Summing the forward variables at `t = k` then yields the sequence
//! likelihood: each surviving path contributes the product of its jump
//! densities (timed) or jump probabilities (untimed).
//!
//! Both recursions are scaled per position by the forward normalizer `c_t`,
//! so likelihoods as small as `exp(-10^5)` pose no underflow problem. The
//! scaled tables satisfy `sum_s alpha[t][s] * beta[t][s] = 1` at every
//! position; this identity is checked on every run and a violation is
//! reported as a hard error rather than silently degraded output.

use crate::ctmc::{ConcreteCtmc, Label};
use crate::error::{Error, Result};

/// Tolerance for the mandatory `sum_s alpha * beta = 1` self-check.
pub const FB_CHECK_TOL: f64 = 1e-9;

/// Emission weight of state `s` at position `t`.
pub fn omega(m: &ConcreteCtmc, s: usize, t: usize, labels: &[Label], dwells: Option<&[f64]>) -> f64 {
    if m.label(s) != &labels[t] {
        return 0.0;
    }
    match dwells {
        Some(taus) if t < taus.len() => {
            let e = m.exit(s);
            e * (-e * taus[t]).exp()
        }
        _ => 1.0,
    }
}

/// Scaled forward and backward tables for one observation sequence.
///
/// Rows are positions `0 ..= k`, columns are states. `scale[t]` is the
/// forward normalizer `c_t`; the sequence log-likelihood is
/// `sum_t ln c_t`. An observation with zero likelihood under the chain
/// yields `loglik = -inf` and zeroed tables.
#[derive(Debug, Clone)]
pub struct FbTables {
    n_states: usize,
    horizon: usize,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    scale: Vec<f64>,
    pub loglik: f64,
}

impl FbTables {
    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// Number of jumps `k`; the tables have `k + 1` rows.
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn alpha(&self, t: usize, s: usize) -> f64 {
        self.alpha[t * self.n_states + s]
    }

    pub fn beta(&self, t: usize, s: usize) -> f64 {
        self.beta[t * self.n_states + s]
    }

    pub fn scale(&self) -> &[f64] {
        &self.scale
    }

    pub fn feasible(&self) -> bool {
        self.loglik.is_finite()
    }
}

fn check_sequence(m: &ConcreteCtmc, labels: &[Label], dwells: Option<&[f64]>) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::invalid("an observation needs at least one label"));
    }
    if let Some(taus) = dwells {
        if taus.len() + 1 != labels.len() {
            return Err(Error::dim(format!(
                "{} labels need {} dwell times, got {}",
                labels.len(),
                labels.len() - 1,
                taus.len()
            )));
        }
    }
    let width = m.labels()[0].0.len();
    if labels.iter().any(|l| l.0.len() != width) {
        return Err(Error::dim(format!(
            "observation labels must have width {width} to match the chain"
        )));
    }
    Ok(())
}

/// Run both recursions and the normalization self-check.
pub fn forward_backward(
    m: &ConcreteCtmc,
    labels: &[Label],
    dwells: Option<&[f64]>,
) -> Result<FbTables> {
    check_sequence(m, labels, dwells)?;
    let n = m.n_states();
    let k = labels.len() - 1;

    let mut w = vec![0.0; (k + 1) * n];
    for t in 0..=k {
        for s in 0..n {
            w[t * n + s] = omega(m, s, t, labels, dwells);
        }
    }

    let infeasible = FbTables {
        n_states: n,
        horizon: k,
        alpha: vec![0.0; (k + 1) * n],
        beta: vec![0.0; (k + 1) * n],
        scale: Vec::new(),
        loglik: f64::NEG_INFINITY,
    };

    // forward, scaled: alpha[t] = normalize(w[t] .* (P^T alpha[t-1]))
    let mut alpha = vec![0.0; (k + 1) * n];
    let mut scale = Vec::with_capacity(k + 1);
    for s in 0..n {
        alpha[s] = m.initial()[s] * w[s];
    }
    for t in 0..=k {
        if t > 0 {
            let (prev, cur) = alpha.split_at_mut(t * n);
            let prev = &prev[(t - 1) * n..];
            let cur = &mut cur[..n];
            for tr in m.transitions() {
                if tr.rate > 0.0 && prev[tr.source] > 0.0 {
                    cur[tr.target] += tr.rate / m.exit(tr.source) * prev[tr.source];
                }
            }
            for s in 0..n {
                cur[s] *= w[t * n + s];
            }
        }
        let c: f64 = alpha[t * n..(t + 1) * n].iter().sum();
        if !(c.is_finite() && c > 0.0) {
            return Ok(infeasible);
        }
        for s in 0..n {
            alpha[t * n + s] /= c;
        }
        scale.push(c);
    }

    // backward, scaled by the forward normalizers
    let mut beta = vec![0.0; (k + 1) * n];
    beta[k * n..].fill(1.0);
    for t in (0..k).rev() {
        let (cur, next) = beta.split_at_mut((t + 1) * n);
        let cur = &mut cur[t * n..];
        let next = &next[..n];
        for tr in m.transitions() {
            if tr.rate > 0.0 {
                cur[tr.source] +=
                    tr.rate / m.exit(tr.source) * w[(t + 1) * n + tr.target] * next[tr.target];
            }
        }
        let c = scale[t + 1];
        for x in cur.iter_mut() {
            *x /= c;
        }
    }

    let loglik: f64 = scale.iter().map(|c| c.ln()).sum();
    let tables = FbTables { n_states: n, horizon: k, alpha, beta, scale, loglik };

    for t in 0..=k {
        let total: f64 = (0..n).map(|s| tables.alpha(t, s) * tables.beta(t, s)).sum();
        if (total - 1.0).abs() > FB_CHECK_TOL {
            return Err(Error::Numerical(format!(
                "forward-backward consistency: sum alpha*beta at position {t} is {total}, \
                 expected 1 within {FB_CHECK_TOL:e}"
            )));
        }
    }
    Ok(tables)
}

/// Posterior state and transition weights for one sequence.
///
/// `gamma[t * n_states + s]` is the probability of being in `s` at position
/// `t` given the whole observation; `xi[t * n_transitions + r]` is the
/// probability that the jump from position `t` to `t + 1` used transition
/// `r`. Each row of either table sums to one.
#[derive(Debug, Clone)]
pub struct Posteriors {
    n_states: usize,
    n_transitions: usize,
    pub gamma: Vec<f64>,
    pub xi: Vec<f64>,
}

impl Posteriors {
    pub fn gamma(&self, t: usize, s: usize) -> f64 {
        self.gamma[t * self.n_states + s]
    }

    pub fn xi(&self, t: usize, r: usize) -> f64 {
        self.xi[t * self.n_transitions + r]
    }
}

/// Combine the tables into posterior weights.
pub fn posteriors(
    tables: &FbTables,
    m: &ConcreteCtmc,
    labels: &[Label],
    dwells: Option<&[f64]>,
) -> Result<Posteriors> {
    if !tables.feasible() {
        return Err(Error::Estimation(
            "cannot take posteriors of a zero-likelihood observation".into(),
        ));
    }
    check_sequence(m, labels, dwells)?;
    let n = m.n_states();
    let nt = m.n_transitions();
    let k = tables.horizon();
    if n != tables.n_states() || labels.len() != k + 1 {
        return Err(Error::dim("tables do not match the chain and observation"));
    }

    let mut gamma = vec![0.0; (k + 1) * n];
    let mut xi = vec![0.0; k * nt];
    for t in 0..=k {
        let norm: f64 = (0..n).map(|s| tables.alpha(t, s) * tables.beta(t, s)).sum();
        for s in 0..n {
            gamma[t * n + s] = tables.alpha(t, s) * tables.beta(t, s) / norm;
        }
        if t < k {
            let c_next = tables.scale()[t + 1];
            for (r, tr) in m.transitions().iter().enumerate() {
                if tr.rate > 0.0 {
                    let w_next = omega(m, tr.target, t + 1, labels, dwells);
                    xi[t * nt + r] = tables.alpha(t, tr.source) * tr.rate / m.exit(tr.source)
                        * w_next
                        * tables.beta(t + 1, tr.target)
                        / (c_next * norm);
                }
            }
        }
    }
    Ok(Posteriors { n_states: n, n_transitions: nt, gamma, xi })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ctmc::ConcreteCtmc;

    fn l(v: i64) -> Label {
        Label(vec![v])
    }

    /// Two states, fully observable: A --2--> B --3--> A.
    fn ab_chain() -> ConcreteCtmc {
        ConcreteCtmc::new(
            vec![l(0), l(1)],
            vec![1.0, 0.0],
            vec![(0, 1, 2.0), (1, 0, 3.0)],
        )
        .unwrap()
    }

    #[test]
    fn omega_weights() {
        let m = ab_chain();
        let labels = [l(0), l(1), l(0)];
        let dwells = [0.5, 0.2];
        // matching label, interior position: E * exp(-E tau)
        let w = omega(&m, 0, 0, &labels, Some(&dwells));
        assert!((w - 2.0 * (-1.0f64).exp()).abs() < 1e-15);
        // mismatching label
        assert_eq!(omega(&m, 1, 0, &labels, Some(&dwells)), 0.0);
        // final position: indicator only
        assert_eq!(omega(&m, 0, 2, &labels, Some(&dwells)), 1.0);
        // untimed: indicator at all positions
        assert_eq!(omega(&m, 0, 0, &labels, None), 1.0);
    }

    #[test]
    fn fully_observable_timed_sequence_by_hand() {
        // only path is A,B,A; likelihood 2 e^{-1} * 3 e^{-0.6}
        let m = ab_chain();
        let labels = [l(0), l(1), l(0)];
        let dwells = [0.5, 0.2];
        let t = forward_backward(&m, &labels, Some(&dwells)).unwrap();
        let expect = (6.0f64).ln() - 1.6;
        assert!((t.loglik - expect).abs() < 1e-12, "got {}", t.loglik);

        let post = posteriors(&t, &m, &labels, Some(&dwells)).unwrap();
        for (tt, s) in [(0, 0), (1, 1), (2, 0)] {
            assert!((post.gamma(tt, s) - 1.0).abs() < 1e-12);
        }
        assert!((post.xi(0, 0) - 1.0).abs() < 1e-12);
        assert_eq!(post.xi(0, 1), 0.0);
        assert!((post.xi(1, 1) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn untimed_likelihood_is_a_jump_probability() {
        // untimed [0,1,0]: single path with jump probabilities 1 * 1
        let m = ab_chain();
        let labels = [l(0), l(1), l(0)];
        let t = forward_backward(&m, &labels, None).unwrap();
        assert!((t.loglik - 0.0).abs() < 1e-12);
    }

    #[test]
    fn impossible_label_yields_minus_infinity() {
        let m = ab_chain();
        let labels = [l(0), l(7)];
        let t = forward_backward(&m, &labels, Some(&[1.0])).unwrap();
        assert_eq!(t.loglik, f64::NEG_INFINITY);
        assert!(!t.feasible());
        assert!(posteriors(&t, &m, &labels, Some(&[1.0])).is_err());

        // impossible first label as well
        let t = forward_backward(&m, &[l(5), l(1)], None).unwrap();
        assert!(!t.feasible());
    }

    #[test]
    fn hidden_state_posteriors_sum_to_one() {
        // two states sharing a label, so the path is genuinely hidden
        let m = ConcreteCtmc::new(
            vec![l(0), l(0), l(1)],
            vec![0.5, 0.5, 0.0],
            vec![(0, 2, 1.0), (1, 2, 4.0), (2, 0, 1.0), (2, 1, 1.0)],
        )
        .unwrap();
        let labels = [l(0), l(1), l(0)];
        let dwells = [0.3, 0.9];
        let t = forward_backward(&m, &labels, Some(&dwells)).unwrap();
        assert!(t.feasible());
        let post = posteriors(&t, &m, &labels, Some(&dwells)).unwrap();
        for tt in 0..=2 {
            let g: f64 = (0..3).map(|s| post.gamma(tt, s)).sum();
            assert!((g - 1.0).abs() < 1e-9);
        }
        for tt in 0..2 {
            let x: f64 = (0..4).map(|r| post.xi(tt, r)).sum();
            assert!((x - 1.0).abs() < 1e-9);
        }
        // both hidden states are plausible at position 0
        assert!(post.gamma(0, 0) > 0.0 && post.gamma(0, 1) > 0.0);
    }

    #[test]
    fn scaling_survives_long_sequences() {
        // dwell times of 50 at exit rate 2 give per-step factors near e^{-100}
        let m = ab_chain();
        let mut labels = Vec::new();
        let mut dwells = Vec::new();
        for i in 0..200 {
            labels.push(l((i % 2) as i64));
            if i < 199 {
                dwells.push(50.0);
            }
        }
        let t = forward_backward(&m, &labels, Some(&dwells)).unwrap();
        assert!(t.feasible());
        assert!(t.loglik < -10_000.0);
    }

    #[test]
    fn sequence_validation() {
        let m = ab_chain();
        assert!(forward_backward(&m, &[], None).is_err());
        assert!(forward_backward(&m, &[l(0), l(1)], Some(&[])).is_err());
        assert!(forward_backward(&m, &[Label(vec![0, 0])], None).is_err());
    }
}
