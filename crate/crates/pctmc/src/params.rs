//! Parameter spaces: named nonnegative rate parameters, with optional
//! fixed values for parameters that estimation must not touch.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// An ordered list of distinct parameter names, plus a partial map of
/// parameters pinned to known values. Indices into the list are used
/// everywhere else in the crate (monomial exponents, valuations).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSpace {
    names: Vec<String>,
    fixed: BTreeMap<usize, f64>,
}

impl ParamSpace {
    /// A space with the given names. Names must be nonempty and pairwise distinct.
    pub fn new(names: Vec<String>) -> Result<Self> {
        for (i, n) in names.iter().enumerate() {
            if n.is_empty() {
                return Err(Error::invalid("parameter name must be nonempty"));
            }
            if names[..i].contains(n) {
                return Err(Error::invalid(format!("duplicate parameter name `{n}`")));
            }
        }
        Ok(ParamSpace { names, fixed: BTreeMap::new() })
    }

    /// The space of a fully concrete model: no parameters.
    pub fn empty() -> Self {
        ParamSpace { names: Vec::new(), fixed: BTreeMap::new() }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Pin parameter `i` to `value`; estimation leaves pinned parameters unchanged.
    pub fn fix(&mut self, i: usize, value: f64) -> Result<()> {
        if i >= self.names.len() {
            return Err(Error::invalid(format!("parameter index {i} out of range")));
        }
        if !value.is_finite() || value < 0.0 {
            return Err(Error::invalid(format!(
                "fixed value for `{}` must be finite and nonnegative, got {value}",
                self.names[i]
            )));
        }
        self.fixed.insert(i, value);
        Ok(())
    }

    /// A copy of this space with the named parameters pinned.
    pub fn with_fixed(&self, pairs: &BTreeMap<String, f64>) -> Result<Self> {
        let mut out = self.clone();
        for (name, value) in pairs {
            let i = out
                .index_of(name)
                .ok_or_else(|| Error::invalid(format!("unknown parameter `{name}`")))?;
            out.fix(i, *value)?;
        }
        Ok(out)
    }

    pub fn fixed(&self) -> &BTreeMap<usize, f64> {
        &self.fixed
    }

    pub fn is_fixed(&self, i: usize) -> bool {
        self.fixed.contains_key(&i)
    }

    pub fn free_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.names.len()).filter(|i| !self.fixed.contains_key(i))
    }

    /// Check that `v` is a full valuation for this space: right length,
    /// finite, nonnegative, and matching every pinned value exactly is not
    /// required (callers overwrite pinned entries themselves).
    pub fn check_valuation(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.names.len() {
            return Err(Error::dim(format!(
                "valuation has {} entries, space has {} parameters",
                v.len(),
                self.names.len()
            )));
        }
        for (i, x) in v.iter().enumerate() {
            if !x.is_finite() || *x < 0.0 {
                return Err(Error::invalid(format!(
                    "value for `{}` must be finite and nonnegative, got {x}",
                    self.names[i]
                )));
            }
        }
        Ok(())
    }

    /// Pair names with values for reporting.
    pub fn named_valuation(&self, v: &[f64]) -> BTreeMap<String, f64> {
        self.names.iter().cloned().zip(v.iter().copied()).collect()
    }
}
