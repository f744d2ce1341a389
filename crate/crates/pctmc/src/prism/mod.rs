//! Frontend for a guarded-command modeling language.
//!
//! A model file declares a continuous-time chain (`ctmc`), constants, and
//! one or more modules of bounded integer variables and guarded commands.
//! Undefined `double` constants become the parameters of the compiled
//! chain; undefined `int` constants must be bound before compilation.
//!
//! The pipeline is [`parse`] (source to syntax tree), [`elaborate`]
//! (resolve constants, determine parameters), and [`CompiledModel::compile`]
//! (check modules and prepare successor enumeration). A compiled model can
//! then [`CompiledModel::build`] its explicit state space or, when all
//! parameters are bound, walk it on the fly.

mod ast;
mod build;
mod elaborate;
mod eval;
mod lexer;
mod parser;

pub use build::{CompiledModel, DEFAULT_MAX_STATES};
pub use elaborate::{elaborate, Elaborated};
pub use eval::Value;
pub use parser::parse;

use std::collections::BTreeMap;

use crate::ctmc::ParametricCtmc;
use crate::error::Result;

/// Parse, elaborate and compile a model source in one call.
pub fn compile(
    src: &str,
    bindings: &BTreeMap<String, f64>,
    free: &[String],
) -> Result<CompiledModel> {
    let ast = parse(src)?;
    let elab = elaborate(&ast, bindings, free)?;
    CompiledModel::compile(&ast, &elab)
}

/// Parse, elaborate, compile and build the explicit chain in one call.
pub fn build_model(
    src: &str,
    bindings: &BTreeMap<String, f64>,
    free: &[String],
    observables: &[String],
) -> Result<ParametricCtmc> {
    compile(src, bindings, free)?.build(observables)
}
