//! Constant resolution and parameter extraction.
//!
//! Defined constants are folded to values, iterating until every
//! definition's dependencies are available. Command-line bindings may give
//! values to undefined constants (and only to those). What remains after
//! folding decides the parameter space: every still-undefined `double`
//! becomes a rate parameter, in declaration order, while a still-undefined
//! `int` is an error because the state space needs concrete bounds.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::params::ParamSpace;

use super::ast::{ConstDecl, ConstType, ModelAst};
use super::eval::{eval, EvalCtx, Value};

/// Outcome of elaboration: the model's parameters and every constant's value.
#[derive(Debug, Clone)]
pub struct Elaborated {
    pub params: ParamSpace,
    pub consts: BTreeMap<String, Value>,
}

fn coerce(decl: &ConstDecl, value: Value) -> Result<Value> {
    match (decl.ty, value) {
        (ConstType::Int, Value::Int(v)) => Ok(Value::Int(v)),
        (ConstType::Double, Value::Int(v)) => Ok(Value::Double(v as f64)),
        (ConstType::Double, Value::Double(v)) => Ok(Value::Double(v)),
        (ConstType::Int, Value::Double(v)) => Err(Error::semantic(format!(
            "constant `{}` is declared int but evaluates to the double {v}",
            decl.name
        ))),
        (_, other) => Err(Error::semantic(format!(
            "constant `{}` evaluates to a {}, expected a number",
            decl.name,
            other.type_name()
        ))),
    }
}

fn coerce_binding(decl: &ConstDecl, value: f64) -> Result<Value> {
    if !value.is_finite() {
        return Err(Error::semantic(format!(
            "binding for `{}` must be finite, got {value}",
            decl.name
        )));
    }
    match decl.ty {
        ConstType::Double => Ok(Value::Double(value)),
        ConstType::Int => {
            if value.fract() != 0.0 || value.abs() > i64::MAX as f64 {
                return Err(Error::semantic(format!(
                    "constant `{}` is an int, cannot bind it to {value}",
                    decl.name
                )));
            }
            Ok(Value::Int(value as i64))
        }
    }
}

/// Resolve constants with the given bindings, after removing the
/// definitions of the constants named in `free` (turning them into
/// parameters to estimate).
pub fn elaborate(
    ast: &ModelAst,
    bindings: &BTreeMap<String, f64>,
    free: &[String],
) -> Result<Elaborated> {
    let mut decls: Vec<ConstDecl> = ast.consts.clone();
    for (i, d) in decls.iter().enumerate() {
        if decls[..i].iter().any(|e| e.name == d.name) {
            return Err(Error::semantic(format!("constant `{}` declared twice", d.name)));
        }
    }

    for name in free {
        let decl = decls
            .iter_mut()
            .find(|d| d.name == *name)
            .ok_or_else(|| Error::semantic(format!("cannot free `{name}`: no such constant")))?;
        if decl.ty != ConstType::Double {
            return Err(Error::semantic(format!(
                "cannot free `{name}`: only double constants can become parameters"
            )));
        }
        if bindings.contains_key(name) {
            return Err(Error::semantic(format!(
                "`{name}` cannot be both freed and bound to a value"
            )));
        }
        decl.value = None;
    }

    let mut consts: BTreeMap<String, Value> = BTreeMap::new();
    for (name, value) in bindings {
        let decl = decls
            .iter()
            .find(|d| d.name == *name)
            .ok_or_else(|| Error::semantic(format!("binding for unknown constant `{name}`")))?;
        if decl.value.is_some() {
            return Err(Error::semantic(format!(
                "constant `{name}` is already defined in the model, it cannot be bound"
            )));
        }
        consts.insert(name.clone(), coerce_binding(decl, *value)?);
    }

    // parameters: undefined, unbound doubles, in declaration order
    let mut param_names = Vec::new();
    for d in &decls {
        if d.value.is_none() && !consts.contains_key(&d.name) {
            match d.ty {
                ConstType::Double => param_names.push(d.name.clone()),
                ConstType::Int => {
                    return Err(Error::semantic(format!(
                        "integer constant `{}` has no value; bind it to build the model",
                        d.name
                    )));
                }
            }
        }
    }
    let params = ParamSpace::new(param_names)?;

    // fold definitions until a pass makes no progress
    let empty = ParamSpace::empty();
    loop {
        let mut progress = false;
        for d in &decls {
            if consts.contains_key(&d.name) {
                continue;
            }
            let Some(expr) = &d.value else { continue };
            let mut deps = BTreeSet::new();
            expr.idents(&mut deps);
            if !deps.iter().all(|n| consts.contains_key(n)) {
                continue;
            }
            let ctx = EvalCtx::constants_only(&consts, &empty);
            let value = eval(expr, &ctx)
                .map_err(|e| Error::semantic(format!("in constant `{}`: {e}", d.name)))?;
            consts.insert(d.name.clone(), coerce(d, value)?);
            progress = true;
        }
        if !progress {
            break;
        }
    }

    for d in &decls {
        if let (Some(value), false) = (&d.value, consts.contains_key(&d.name)) {
            let mut deps = BTreeSet::new();
            value.idents(&mut deps);
            let missing: Vec<&str> = deps
                .iter()
                .filter(|n| !consts.contains_key(*n))
                .map(|n| n.as_str())
                .collect();
            if missing.iter().any(|n| params.index_of(n).is_some()) {
                return Err(Error::semantic(format!(
                    "constant `{}` depends on the parameter(s) {}; parameters may only appear in rates",
                    d.name,
                    missing.join(", ")
                )));
            }
            return Err(Error::semantic(format!(
                "constant `{}` cannot be resolved (cyclic or undefined dependencies: {})",
                d.name,
                missing.join(", ")
            )));
        }
    }

    Ok(Elaborated { params, consts })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::parser::parse;

    fn b(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    const SRC: &str = "
ctmc
const int c;
const double lambda = 4*c;
const double mu1a = 0.2;
const double beta;
const double gamma;

module m
  x : [0..c] init 0;
  [] x<c -> lambda*beta : (x'=x+1);
endmodule
";

    #[test]
    fn undefined_doubles_become_parameters_in_order() {
        let ast = parse(SRC).unwrap();
        let el = elaborate(&ast, &b(&[("c", 4.0)]), &[]).unwrap();
        assert_eq!(el.params.names(), &["beta".to_string(), "gamma".to_string()]);
        assert_eq!(el.consts.get("c"), Some(&Value::Int(4)));
        assert_eq!(el.consts.get("lambda"), Some(&Value::Double(16.0)));
        assert_eq!(el.consts.get("mu1a"), Some(&Value::Double(0.2)));
    }

    #[test]
    fn binding_a_parameter_removes_it() {
        let ast = parse(SRC).unwrap();
        let el = elaborate(&ast, &b(&[("c", 4.0), ("beta", 0.5)]), &[]).unwrap();
        assert_eq!(el.params.names(), &["gamma".to_string()]);
        assert_eq!(el.consts.get("beta"), Some(&Value::Double(0.5)));
    }

    #[test]
    fn unbound_int_is_an_error() {
        let ast = parse(SRC).unwrap();
        let err = elaborate(&ast, &b(&[]), &[]).unwrap_err().to_string();
        assert!(err.contains("`c`"), "{err}");
    }

    #[test]
    fn binding_errors() {
        let ast = parse(SRC).unwrap();
        // fractional value for an int constant
        assert!(elaborate(&ast, &b(&[("c", 2.5)]), &[]).is_err());
        // binding a defined constant
        assert!(elaborate(&ast, &b(&[("c", 4.0), ("mu1a", 1.0)]), &[]).is_err());
        // binding an unknown name
        assert!(elaborate(&ast, &b(&[("c", 4.0), ("zz", 1.0)]), &[]).is_err());
    }

    #[test]
    fn freeing_a_defined_double_makes_it_a_parameter() {
        let ast = parse(SRC).unwrap();
        let el = elaborate(&ast, &b(&[("c", 4.0)]), &["mu1a".into()]).unwrap();
        assert_eq!(
            el.params.names(),
            &["mu1a".to_string(), "beta".to_string(), "gamma".to_string()]
        );
        // freeing an int constant is rejected
        assert!(elaborate(&ast, &b(&[("c", 4.0)]), &["c".into()]).is_err());
        // freeing and binding at once is contradictory
        assert!(elaborate(&ast, &b(&[("c", 4.0), ("mu1a", 1.0)]), &["mu1a".into()]).is_err());
    }

    #[test]
    fn chained_and_cyclic_definitions() {
        let src = "
ctmc
const double a = b + 1;
const double b = 2;
module m
  x : [0..1] init 0;
  [] x<1 -> a : (x'=x+1);
endmodule
";
        let ast = parse(src).unwrap();
        let el = elaborate(&ast, &b(&[]), &[]).unwrap();
        assert_eq!(el.consts.get("a"), Some(&Value::Double(3.0)));

        let cyclic = "
ctmc
const double a = b;
const double b = a;
module m
  x : [0..1] init 0;
  [] x<1 -> a : (x'=x+1);
endmodule
";
        let ast = parse(cyclic).unwrap();
        let err = elaborate(&ast, &b(&[]), &[]).unwrap_err().to_string();
        assert!(err.contains("cyclic") || err.contains("resolved"), "{err}");
    }

    #[test]
    fn constants_may_not_depend_on_parameters() {
        let src = "
ctmc
const double beta;
const double twice = 2*beta;
module m
  x : [0..1] init 0;
  [] x<1 -> twice : (x'=x+1);
endmodule
";
        let ast = parse(src).unwrap();
        let err = elaborate(&ast, &b(&[]), &[]).unwrap_err().to_string();
        assert!(err.contains("parameter"), "{err}");
    }
}
