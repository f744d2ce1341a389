//! Root finding for per-parameter update polynomials.
//!
//! Each coordinate update solves `sum_d c_d * y^d = N` with `c_d >= 0` and
//! `N > 0`. The left side is zero at the origin and strictly increasing
//! wherever some `c_d > 0` with `d >= 1`, so there is exactly one positive
//! root. We bracket it by doubling and then run bisection-safeguarded
//! Newton iterations until the bracket is relatively tight.

use crate::error::{Error, Result};

/// Default relative width at which the root bracket is accepted.
pub const ROOT_TOL: f64 = 1e-12;

/// Iteration budget for bracketing plus refinement.
pub const ROOT_MAX_ITERS: usize = 200;

/// `P(y) = sum_d coeff_d * y^d - constant`, with positive degrees,
/// nonnegative coefficients and a positive subtracted constant.
#[derive(Debug, Clone, PartialEq)]
pub struct UpdatePolynomial {
    terms: Vec<(u32, f64)>,
    constant: f64,
}

impl UpdatePolynomial {
    pub fn new(terms: Vec<(u32, f64)>, constant: f64) -> Result<Self> {
        if !constant.is_finite() {
            return Err(Error::invalid(format!("polynomial constant {constant} not finite")));
        }
        let mut merged: Vec<(u32, f64)> = Vec::with_capacity(terms.len());
        for (d, c) in terms {
            if d == 0 {
                return Err(Error::invalid("update polynomial terms must have positive degree"));
            }
            if !c.is_finite() || c < 0.0 {
                return Err(Error::invalid(format!(
                    "update polynomial coefficient must be finite and nonnegative, got {c}"
                )));
            }
            match merged.iter_mut().find(|(dd, _)| *dd == d) {
                Some((_, cc)) => *cc += c,
                None => merged.push((d, c)),
            }
        }
        merged.retain(|(_, c)| *c > 0.0);
        merged.sort_by_key(|(d, _)| *d);
        Ok(UpdatePolynomial { terms: merged, constant })
    }

    pub fn terms(&self) -> &[(u32, f64)] {
        &self.terms
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    pub fn eval(&self, y: f64) -> f64 {
        let s: f64 = self.terms.iter().map(|(d, c)| c * y.powi(*d as i32)).sum();
        s - self.constant
    }

    pub fn derivative(&self, y: f64) -> f64 {
        self.terms
            .iter()
            .map(|(d, c)| c * (*d as f64) * y.powi(*d as i32 - 1))
            .sum()
    }

    /// The unique positive root, to relative tolerance `tol`.
    pub fn positive_root(&self, tol: f64) -> Result<f64> {
        if self.constant <= 0.0 {
            return Err(Error::NoRoot(format!(
                "constant {} is not positive, no positive root exists",
                self.constant
            )));
        }
        if self.terms.is_empty() {
            return Err(Error::NoRoot("all polynomial coefficients are zero".into()));
        }

        let mut iters = 0usize;
        let mut lo = 0.0f64;
        let mut hi = 1.0f64;
        loop {
            let f = self.eval(hi);
            if !f.is_finite() {
                return Err(Error::NoRoot(format!("polynomial overflows at bracket {hi}")));
            }
            if f >= 0.0 {
                break;
            }
            lo = hi;
            hi *= 2.0;
            iters += 1;
            if iters >= ROOT_MAX_ITERS {
                return Err(Error::NoRoot("bracket expansion exhausted its budget".into()));
            }
        }

        let mut x = 0.5 * (lo + hi);
        while iters < ROOT_MAX_ITERS {
            iters += 1;
            let f = self.eval(x);
            if f == 0.0 {
                return Ok(x);
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            let df = self.derivative(x);
            let newton = if df > 0.0 { x - f / df } else { x };
            let next = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            if (hi - lo) <= tol * next.max(f64::MIN_POSITIVE) || next == x {
                return Ok(next);
            }
            x = next;
        }
        Err(Error::NoRoot(format!(
            "no convergence within {ROOT_MAX_ITERS} iterations (bracket [{lo}, {hi}])"
        )))
    }
}
