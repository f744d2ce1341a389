//! Parametric and concrete continuous-time Markov chains.
//!
//! A parametric chain carries one monomial rate per transition; an edge
//! whose rate is a longer polynomial is split into parallel transitions,
//! one per monomial, when the chain is constructed. The total rate between
//! two states is the sum over parallel transitions, so splitting never
//! changes the chain's behaviour, but it gives estimation one coefficient
//! and one exponent vector per transition to work with.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ParamSpace;
use crate::rate::{Monomial, RateExpr};

/// Tolerance for checking that an initial distribution sums to one.
pub const INITIAL_DIST_TOL: f64 = 1e-12;

/// State label: the tuple of observable variable values exposed to an
/// observer. States with equal labels are indistinguishable in the data.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Label(pub Vec<i64>);

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// One transition of a parametric chain, with a single-monomial rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub source: usize,
    pub target: usize,
    pub rate: Monomial,
}

/// A CTMC whose transition rates are monomials in a shared parameter space.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParametricCtmc {
    params: ParamSpace,
    labels: Vec<Label>,
    initial: Vec<f64>,
    transitions: Vec<Transition>,
}

fn check_initial(initial: &[f64], n_states: usize) -> Result<()> {
    if initial.len() != n_states {
        return Err(Error::dim(format!(
            "initial distribution has {} entries for {n_states} states",
            initial.len()
        )));
    }
    let mut sum = 0.0;
    for p in initial {
        if !p.is_finite() || *p < 0.0 {
            return Err(Error::invalid(format!("initial probability {p} out of range")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > INITIAL_DIST_TOL {
        return Err(Error::invalid(format!(
            "initial distribution sums to {sum}, expected 1 within {INITIAL_DIST_TOL:e}"
        )));
    }
    Ok(())
}

impl ParametricCtmc {
    /// Build a chain from edges carrying polynomial rates.
    ///
    /// Each edge is normalized on the way in: the polynomial is split into
    /// its monomials, producing one parallel transition per monomial, and
    /// zero-coefficient terms (in particular identically-zero edges) are
    /// dropped.
    pub fn new(
        params: ParamSpace,
        labels: Vec<Label>,
        initial: Vec<f64>,
        edges: Vec<(usize, usize, RateExpr)>,
    ) -> Result<Self> {
        let n_states = labels.len();
        if n_states == 0 {
            return Err(Error::invalid("a chain needs at least one state"));
        }
        check_initial(&initial, n_states)?;
        let width = labels[0].0.len();
        if labels.iter().any(|l| l.0.len() != width) {
            return Err(Error::dim("all state labels must have the same width"));
        }
        let mut transitions = Vec::new();
        for (source, target, rate) in edges {
            if source >= n_states || target >= n_states {
                return Err(Error::invalid(format!(
                    "transition {source} -> {target} out of range for {n_states} states"
                )));
            }
            if rate.n_params() != params.len() {
                return Err(Error::dim(format!(
                    "rate over {} parameters in a chain with {}",
                    rate.n_params(),
                    params.len()
                )));
            }
            for m in rate.terms() {
                transitions.push(Transition { source, target, rate: m.clone() });
            }
        }
        Ok(ParametricCtmc { params, labels, initial, transitions })
    }

    pub fn params(&self) -> &ParamSpace {
        &self.params
    }

    /// Replace the parameter space (same names required) to attach fixed values.
    pub fn with_params(&self, params: ParamSpace) -> Result<Self> {
        if params.names() != self.params.names() {
            return Err(Error::invalid("parameter names must match the chain's space"));
        }
        let mut out = self.clone();
        out.params = params;
        Ok(out)
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, s: usize) -> &Label {
        &self.labels[s]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    /// Total polynomial rate from `s` to `t`: the sum over parallel transitions.
    pub fn rate_expr(&self, s: usize, t: usize) -> RateExpr {
        let terms = self
            .transitions
            .iter()
            .filter(|tr| tr.source == s && tr.target == t)
            .map(|tr| tr.rate.clone())
            .collect();
        RateExpr::from_monomials(self.params.len(), terms).expect("stored monomials are well-formed")
    }

    /// True if parameter `i` occurs with positive exponent in some transition.
    pub fn param_in_model(&self, i: usize) -> bool {
        self.transitions.iter().any(|t| t.rate.exponent(i) > 0)
    }

    /// Evaluate every rate at `v`, preserving transition order and indices.
    pub fn instantiate(&self, v: &[f64]) -> Result<ConcreteCtmc> {
        self.params.check_valuation(v)?;
        let rates: Vec<(usize, usize, f64)> = self
            .transitions
            .iter()
            .map(|t| (t.source, t.target, t.rate.eval(v)))
            .collect();
        ConcreteCtmc::new(self.labels.clone(), self.initial.clone(), rates)
    }
}

/// One transition of a concrete chain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcreteTransition {
    pub source: usize,
    pub target: usize,
    pub rate: f64,
}

/// A CTMC with numeric rates, stored as a transition list plus per-state
/// adjacency indices and exit rates.
///
/// When produced by [`ParametricCtmc::instantiate`], transition indices
/// coincide with the parametric chain's, so per-transition statistics
/// computed here can be mapped back onto monomials directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcreteCtmc {
    labels: Vec<Label>,
    initial: Vec<f64>,
    transitions: Vec<ConcreteTransition>,
    exit: Vec<f64>,
    out_offsets: Vec<u32>,
    out_ids: Vec<u32>,
    in_offsets: Vec<u32>,
    in_ids: Vec<u32>,
}

impl ConcreteCtmc {
    pub fn new(
        labels: Vec<Label>,
        initial: Vec<f64>,
        transitions: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        let n_states = labels.len();
        if n_states == 0 {
            return Err(Error::invalid("a chain needs at least one state"));
        }
        if n_states >= u32::MAX as usize || transitions.len() >= u32::MAX as usize {
            return Err(Error::invalid("chain too large"));
        }
        check_initial(&initial, n_states)?;
        let mut trs = Vec::with_capacity(transitions.len());
        let mut exit = vec![0.0; n_states];
        for (source, target, rate) in transitions {
            if source >= n_states || target >= n_states {
                return Err(Error::invalid(format!(
                    "transition {source} -> {target} out of range for {n_states} states"
                )));
            }
            if !rate.is_finite() || rate < 0.0 {
                return Err(Error::invalid(format!(
                    "transition rate must be finite and nonnegative, got {rate}"
                )));
            }
            exit[source] += rate;
            trs.push(ConcreteTransition { source, target, rate });
        }

        let index = |by: &dyn Fn(&ConcreteTransition) -> usize| {
            let mut offsets = vec![0u32; n_states + 1];
            for t in &trs {
                offsets[by(t) + 1] += 1;
            }
            for s in 0..n_states {
                offsets[s + 1] += offsets[s];
            }
            let mut ids = vec![0u32; trs.len()];
            let mut cursor = offsets.clone();
            for (i, t) in trs.iter().enumerate() {
                let slot = cursor[by(t)];
                ids[slot as usize] = i as u32;
                cursor[by(t)] += 1;
            }
            (offsets, ids)
        };
        let (out_offsets, out_ids) = index(&|t: &ConcreteTransition| t.source);
        let (in_offsets, in_ids) = index(&|t: &ConcreteTransition| t.target);

        Ok(ConcreteCtmc {
            labels,
            initial,
            transitions: trs,
            exit,
            out_offsets,
            out_ids,
            in_offsets,
            in_ids,
        })
    }

    pub fn n_states(&self) -> usize {
        self.labels.len()
    }

    pub fn n_transitions(&self) -> usize {
        self.transitions.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn label(&self, s: usize) -> &Label {
        &self.labels[s]
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn transitions(&self) -> &[ConcreteTransition] {
        &self.transitions
    }

    /// Exit rate `E(s)`: sum of all outgoing rates.
    pub fn exit(&self, s: usize) -> f64 {
        self.exit[s]
    }

    pub fn is_absorbing(&self, s: usize) -> bool {
        self.exit[s] == 0.0
    }

    /// Indices of transitions leaving `s`, in transition-list order.
    pub fn outgoing(&self, s: usize) -> &[u32] {
        &self.out_ids[self.out_offsets[s] as usize..self.out_offsets[s + 1] as usize]
    }

    /// Indices of transitions entering `s`, in transition-list order.
    pub fn incoming(&self, s: usize) -> &[u32] {
        &self.in_ids[self.in_offsets[s] as usize..self.in_offsets[s + 1] as usize]
    }

    /// Total rate from `s` to `t` (sum over parallel transitions).
    pub fn rate(&self, s: usize, t: usize) -> f64 {
        self.outgoing(s)
            .iter()
            .map(|&i| &self.transitions[i as usize])
            .filter(|tr| tr.target == t)
            .map(|tr| tr.rate)
            .sum()
    }

    /// Jump chain rows: for each state, `(target, probability)` pairs with
    /// parallel transitions merged. An absorbing state gets a self loop.
    pub fn embedded_dtmc(&self) -> Vec<Vec<(usize, f64)>> {
        (0..self.n_states())
            .map(|s| {
                if self.is_absorbing(s) {
                    return vec![(s, 1.0)];
                }
                let mut row: Vec<(usize, f64)> = Vec::new();
                for &i in self.outgoing(s) {
                    let t = &self.transitions[i as usize];
                    let p = t.rate / self.exit[s];
                    match row.iter_mut().find(|(tgt, _)| *tgt == t.target) {
                        Some((_, q)) => *q += p,
                        None => row.push((t.target, p)),
                    }
                }
                row
            })
            .collect()
    }
}
