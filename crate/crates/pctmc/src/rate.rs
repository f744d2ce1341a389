//! Polynomial transition rates.
//!
//! A rate is a polynomial in the model parameters with nonnegative
//! coefficients and natural exponents: a sum of monomials
//! `b * x_1^{a_1} * ... * x_n^{a_n}` with `b >= 0`. These polynomials are
//! closed under addition and multiplication, which is exactly what parallel
//! composition of modules needs (sums of alternatives, products of
//! synchronizing rates).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A single term `coeff * prod_i x_i^{exponents[i]}`.
///
/// Invariants: `coeff` is finite and nonnegative; one exponent slot per
/// parameter of the ambient space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    coeff: f64,
    exponents: Vec<u32>,
}

impl Monomial {
    pub fn new(coeff: f64, exponents: Vec<u32>) -> Result<Self> {
        if !coeff.is_finite() || coeff < 0.0 {
            return Err(Error::invalid(format!(
                "monomial coefficient must be finite and nonnegative, got {coeff}"
            )));
        }
        Ok(Monomial { coeff, exponents })
    }

    /// Constant term `c` in a space with `n_params` parameters.
    pub fn constant(c: f64, n_params: usize) -> Result<Self> {
        Monomial::new(c, vec![0; n_params])
    }

    pub fn coeff(&self) -> f64 {
        self.coeff
    }

    pub fn exponents(&self) -> &[u32] {
        &self.exponents
    }

    pub fn exponent(&self, i: usize) -> u32 {
        self.exponents[i]
    }

    pub fn n_params(&self) -> usize {
        self.exponents.len()
    }

    /// True when no parameter occurs (or the coefficient is zero).
    pub fn is_constant(&self) -> bool {
        self.coeff == 0.0 || self.exponents.iter().all(|&e| e == 0)
    }

    /// Sum of all exponents.
    pub fn total_degree(&self) -> u32 {
        self.exponents.iter().sum()
    }

    /// Evaluate at a full valuation. The caller guarantees the length matches.
    pub fn eval(&self, v: &[f64]) -> f64 {
        debug_assert_eq!(v.len(), self.exponents.len());
        let mut out = self.coeff;
        for (x, &e) in v.iter().zip(&self.exponents) {
            if e > 0 {
                out *= x.powi(e as i32);
            }
        }
        out
    }
}

/// A polynomial rate: canonical sum of monomials, kept sorted by exponent
/// vector with like terms merged and zero terms dropped. The empty sum is
/// the zero rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateExpr {
    n_params: usize,
    terms: Vec<Monomial>,
}

impl RateExpr {
    pub fn zero(n_params: usize) -> Self {
        RateExpr { n_params, terms: Vec::new() }
    }

    pub fn constant(c: f64, n_params: usize) -> Result<Self> {
        Ok(RateExpr::from_monomial(Monomial::constant(c, n_params)?))
    }

    /// The single parameter `x_i`.
    pub fn var(i: usize, n_params: usize) -> Result<Self> {
        if i >= n_params {
            return Err(Error::invalid(format!(
                "parameter index {i} out of range for {n_params} parameters"
            )));
        }
        let mut exps = vec![0; n_params];
        exps[i] = 1;
        Ok(RateExpr::from_monomial(Monomial::new(1.0, exps)?))
    }

    pub fn from_monomial(m: Monomial) -> Self {
        let n = m.n_params();
        RateExpr::canonical(n, vec![m])
    }

    pub fn from_monomials(n_params: usize, terms: Vec<Monomial>) -> Result<Self> {
        for t in &terms {
            if t.n_params() != n_params {
                return Err(Error::dim(format!(
                    "monomial over {} parameters in an expression over {n_params}",
                    t.n_params()
                )));
            }
        }
        Ok(RateExpr::canonical(n_params, terms))
    }

    fn canonical(n_params: usize, mut terms: Vec<Monomial>) -> Self {
        terms.retain(|t| t.coeff != 0.0);
        terms.sort_by(|a, b| a.exponents.cmp(&b.exponents));
        let mut merged: Vec<Monomial> = Vec::with_capacity(terms.len());
        for t in terms {
            match merged.last_mut() {
                Some(last) if last.exponents == t.exponents => last.coeff += t.coeff,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        RateExpr { n_params, terms: merged }
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// `Some(c)` when the expression is a constant (including zero).
    pub fn as_constant(&self) -> Option<f64> {
        match self.terms.len() {
            0 => Some(0.0),
            1 if self.terms[0].is_constant() => Some(self.terms[0].coeff),
            _ => None,
        }
    }

    pub fn evaluate(&self, v: &[f64]) -> Result<f64> {
        if v.len() != self.n_params {
            return Err(Error::dim(format!(
                "valuation has {} entries, expression has {} parameters",
                v.len(),
                self.n_params
            )));
        }
        Ok(self.terms.iter().map(|t| t.eval(v)).sum())
    }

    fn check_same_space(&self, other: &RateExpr) -> Result<()> {
        if self.n_params != other.n_params {
            return Err(Error::dim(format!(
                "expressions over {} and {} parameters",
                self.n_params, other.n_params
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &RateExpr) -> Result<RateExpr> {
        self.check_same_space(other)?;
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        Ok(RateExpr::canonical(self.n_params, terms))
    }

    pub fn mul(&self, other: &RateExpr) -> Result<RateExpr> {
        self.check_same_space(other)?;
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for a in &self.terms {
            for b in &other.terms {
                let exps: Vec<u32> = a
                    .exponents
                    .iter()
                    .zip(&b.exponents)
                    .map(|(x, y)| {
                        x.checked_add(*y).expect("exponent overflow in rate product")
                    })
                    .collect();
                terms.push(Monomial { coeff: a.coeff * b.coeff, exponents: exps });
            }
        }
        Ok(RateExpr::canonical(self.n_params, terms))
    }

    /// Subtraction that fails if any resulting coefficient would be negative.
    /// Rates must stay in the nonnegative-coefficient fragment.
    pub fn checked_sub(&self, other: &RateExpr) -> Result<RateExpr> {
        self.check_same_space(other)?;
        let mut terms = self.terms.clone();
        for b in &other.terms {
            match terms.iter_mut().find(|t| t.exponents == b.exponents) {
                Some(t) if t.coeff >= b.coeff => t.coeff -= b.coeff,
                _ => {
                    return Err(Error::invalid(
                        "subtraction would produce a negative rate coefficient",
                    ))
                }
            }
        }
        Ok(RateExpr::canonical(self.n_params, terms))
    }

    pub fn scale(&self, c: f64) -> Result<RateExpr> {
        if !c.is_finite() || c < 0.0 {
            return Err(Error::invalid(format!(
                "scale factor must be finite and nonnegative, got {c}"
            )));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Monomial { coeff: t.coeff * c, exponents: t.exponents.clone() })
            .collect();
        Ok(RateExpr::canonical(self.n_params, terms))
    }

    /// Divide by a positive constant.
    pub fn div_const(&self, c: f64) -> Result<RateExpr> {
        if !c.is_finite() || c <= 0.0 {
            return Err(Error::invalid(format!("divisor must be finite and positive, got {c}")));
        }
        self.scale(1.0 / c)
    }
}
