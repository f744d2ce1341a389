//! Expression evaluation over constants, parameters and state variables.
//!
//! Evaluation is exact where possible: integer arithmetic stays in `i64`,
//! division always produces a double, and any arithmetic touching an
//! unbound parameter is lifted into polynomial rate expressions. Parameters
//! may only flow into rates; guards, bounds and updates must fold to
//! concrete values.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::params::ParamSpace;
use crate::rate::RateExpr;

use super::ast::{BinOp, Expr, UnOp};

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Double(f64),
    Bool(bool),
    /// A polynomial in the model parameters.
    Rate(RateExpr),
}

impl Value {
    pub fn type_name(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Double(_) => "double",
            Value::Bool(_) => "bool",
            Value::Rate(_) => "parametric rate",
        }
    }

    fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(v) => Some(*v as f64),
            Value::Double(v) => Some(*v),
            _ => None,
        }
    }
}

/// Name resolution for one evaluation: resolved constants, the parameter
/// space, and (during state exploration) variable values.
pub struct EvalCtx<'a> {
    pub consts: &'a BTreeMap<String, Value>,
    pub params: &'a ParamSpace,
    pub var_names: &'a [String],
    pub var_values: Option<&'a [i64]>,
}

impl<'a> EvalCtx<'a> {
    pub fn constants_only(consts: &'a BTreeMap<String, Value>, params: &'a ParamSpace) -> Self {
        EvalCtx { consts, params, var_names: &[], var_values: None }
    }
}

fn to_rate(v: &Value, n_params: usize) -> Result<RateExpr> {
    match v {
        Value::Rate(r) => Ok(r.clone()),
        Value::Int(i) if *i >= 0 => RateExpr::constant(*i as f64, n_params),
        Value::Double(d) if *d >= 0.0 => RateExpr::constant(*d, n_params),
        Value::Int(_) | Value::Double(_) => Err(Error::semantic(
            "negative value combined with a parametric rate expression",
        )),
        Value::Bool(_) => Err(Error::semantic("boolean combined with a rate expression")),
    }
}

pub fn eval(expr: &Expr, ctx: &EvalCtx<'_>) -> Result<Value> {
    match expr {
        Expr::Int(v) => Ok(Value::Int(*v)),
        Expr::Double(v) => Ok(Value::Double(*v)),
        Expr::Bool(v) => Ok(Value::Bool(*v)),
        Expr::Ident(name) => lookup(name, ctx),
        Expr::Unary(op, e) => {
            let v = eval(e, ctx)?;
            match (op, v) {
                (UnOp::Neg, Value::Int(i)) => i
                    .checked_neg()
                    .map(Value::Int)
                    .ok_or_else(|| Error::semantic("integer overflow in negation")),
                (UnOp::Neg, Value::Double(d)) => Ok(Value::Double(-d)),
                (UnOp::Neg, v) => Err(Error::semantic(format!("cannot negate {}", v.type_name()))),
                (UnOp::Not, Value::Bool(b)) => Ok(Value::Bool(!b)),
                (UnOp::Not, v) => {
                    Err(Error::semantic(format!("`!` applied to {}", v.type_name())))
                }
            }
        }
        Expr::Binary(op, a, b) => {
            let va = eval(a, ctx)?;
            let vb = eval(b, ctx)?;
            binary(*op, va, vb, ctx.params.len())
        }
    }
}

fn lookup(name: &str, ctx: &EvalCtx<'_>) -> Result<Value> {
    if let Some(values) = ctx.var_values {
        if let Some(i) = ctx.var_names.iter().position(|n| n == name) {
            return Ok(Value::Int(values[i]));
        }
    }
    if let Some(v) = ctx.consts.get(name) {
        return Ok(v.clone());
    }
    if let Some(i) = ctx.params.index_of(name) {
        return Ok(Value::Rate(RateExpr::var(i, ctx.params.len())?));
    }
    Err(Error::semantic(format!("unknown identifier `{name}`")))
}

fn binary(op: BinOp, a: Value, b: Value, n_params: usize) -> Result<Value> {
    use BinOp::*;
    match op {
        Add | Sub | Mul => {
            if matches!(a, Value::Rate(_)) || matches!(b, Value::Rate(_)) {
                let ra = to_rate(&a, n_params)?;
                let rb = to_rate(&b, n_params)?;
                let r = match op {
                    Add => ra.add(&rb)?,
                    Mul => ra.mul(&rb)?,
                    Sub => ra.checked_sub(&rb).map_err(|_| {
                        Error::semantic(
                            "subtraction would make a rate coefficient negative",
                        )
                    })?,
                    _ => unreachable!(),
                };
                return Ok(simplify(r));
            }
            match (a, b) {
                (Value::Int(x), Value::Int(y)) => {
                    let r = match op {
                        Add => x.checked_add(y),
                        Sub => x.checked_sub(y),
                        Mul => x.checked_mul(y),
                        _ => unreachable!(),
                    };
                    r.map(Value::Int)
                        .ok_or_else(|| Error::semantic("integer overflow in constant arithmetic"))
                }
                (x, y) => {
                    let (fx, fy) = float_pair(&x, &y, op_name(op))?;
                    Ok(Value::Double(match op {
                        Add => fx + fy,
                        Sub => fx - fy,
                        Mul => fx * fy,
                        _ => unreachable!(),
                    }))
                }
            }
        }
        Div => {
            let divisor = match &b {
                Value::Rate(r) => r.as_constant().ok_or_else(|| {
                    Error::semantic("division by a parametric expression is not supported")
                })?,
                other => other
                    .as_f64()
                    .ok_or_else(|| Error::semantic(format!("division by {}", other.type_name())))?,
            };
            if divisor == 0.0 {
                return Err(Error::semantic("division by zero"));
            }
            match a {
                Value::Rate(r) => {
                    if divisor < 0.0 {
                        return Err(Error::semantic(
                            "dividing a rate by a negative constant",
                        ));
                    }
                    Ok(simplify(r.div_const(divisor)?))
                }
                other => {
                    let fa = other.as_f64().ok_or_else(|| {
                        Error::semantic(format!("cannot divide {}", other.type_name()))
                    })?;
                    Ok(Value::Double(fa / divisor))
                }
            }
        }
        And | Or => match (a, b) {
            (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(match op {
                And => x && y,
                Or => x || y,
                _ => unreachable!(),
            })),
            (x, y) => Err(Error::semantic(format!(
                "`{}` needs booleans, got {} and {}",
                op_name(op),
                x.type_name(),
                y.type_name()
            ))),
        },
        Eq | Ne | Lt | Le | Gt | Ge => {
            if let (Value::Int(x), Value::Int(y)) = (&a, &b) {
                return Ok(Value::Bool(compare(op, *x, *y)));
            }
            let (fx, fy) = float_pair(&a, &b, op_name(op))?;
            Ok(Value::Bool(compare(op, fx, fy)))
        }
    }
}

fn compare<T: PartialOrd>(op: BinOp, x: T, y: T) -> bool {
    match op {
        BinOp::Eq => x == y,
        BinOp::Ne => x != y,
        BinOp::Lt => x < y,
        BinOp::Le => x <= y,
        BinOp::Gt => x > y,
        BinOp::Ge => x >= y,
        _ => unreachable!(),
    }
}

fn float_pair(a: &Value, b: &Value, what: &str) -> Result<(f64, f64)> {
    match (a.as_f64(), b.as_f64()) {
        (Some(x), Some(y)) => Ok((x, y)),
        _ => Err(Error::semantic(format!(
            "`{what}` needs numeric operands, got {} and {}",
            a.type_name(),
            b.type_name()
        ))),
    }
}

fn op_name(op: BinOp) -> &'static str {
    match op {
        BinOp::Add => "+",
        BinOp::Sub => "-",
        BinOp::Mul => "*",
        BinOp::Div => "/",
        BinOp::And => "&",
        BinOp::Or => "|",
        BinOp::Eq => "=",
        BinOp::Ne => "!=",
        BinOp::Lt => "<",
        BinOp::Le => "<=",
        BinOp::Gt => ">",
        BinOp::Ge => ">=",
    }
}

/// Collapse a constant polynomial back into a plain number.
fn simplify(r: RateExpr) -> Value {
    match r.as_constant() {
        Some(c) => Value::Double(c),
        None => Value::Rate(r),
    }
}

/// Evaluate an expression that must produce an integer.
pub fn eval_int(expr: &Expr, ctx: &EvalCtx<'_>, what: &str) -> Result<i64> {
    match eval(expr, ctx)? {
        Value::Int(v) => Ok(v),
        other => Err(Error::semantic(format!(
            "{what} must be an integer, got {}",
            other.type_name()
        ))),
    }
}

/// Evaluate an expression that must produce a boolean.
pub fn eval_bool(expr: &Expr, ctx: &EvalCtx<'_>, what: &str) -> Result<bool> {
    match eval(expr, ctx)? {
        Value::Bool(v) => Ok(v),
        other => Err(Error::semantic(format!(
            "{what} must be a boolean, got {}",
            other.type_name()
        ))),
    }
}

/// Evaluate an expression that must produce a (possibly parametric) rate.
pub fn eval_rate(expr: &Expr, ctx: &EvalCtx<'_>, what: &str) -> Result<RateExpr> {
    let v = eval(expr, ctx)?;
    match &v {
        Value::Int(i) if *i < 0 => {
            Err(Error::semantic(format!("{what} must be nonnegative, got {i}")))
        }
        Value::Double(d) if *d < 0.0 => {
            Err(Error::semantic(format!("{what} must be nonnegative, got {d}")))
        }
        Value::Bool(_) => Err(Error::semantic(format!("{what} must be numeric, got a boolean"))),
        _ => to_rate(&v, ctx.params.len()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prism::parser::parse;

    fn expr_of(guard_src: &str) -> Expr {
        let src = format!(
            "ctmc\nmodule m\nx : [0..100] init 0;\n[] {guard_src} -> 1 : true;\nendmodule"
        );
        parse(&src).unwrap().modules[0].commands[0].guard.clone()
    }

    fn rate_of(rate_src: &str) -> Expr {
        let src = format!(
            "ctmc\nmodule m\nx : [0..100] init 0;\n[] x<1 -> {rate_src} : true;\nendmodule"
        );
        parse(&src).unwrap().modules[0].commands[0].updates[0].rate.clone()
    }

    fn ctx_fixture() -> (BTreeMap<String, Value>, ParamSpace, Vec<String>) {
        let mut consts = BTreeMap::new();
        consts.insert("c".into(), Value::Int(4));
        consts.insert("mu".into(), Value::Double(1.5));
        let params = ParamSpace::new(vec!["beta".into(), "gamma".into()]).unwrap();
        (consts, params, vec!["x".into()])
    }

    fn eval_with_x(e: &Expr, x: i64) -> Result<Value> {
        let (consts, params, vars) = ctx_fixture();
        let values = [x];
        let ctx = EvalCtx {
            consts: &consts,
            params: &params,
            var_names: &vars,
            var_values: Some(&values),
        };
        eval(e, &ctx)
    }

    #[test]
    fn integer_arithmetic_stays_exact() {
        let e = expr_of("x+2*c = 11");
        assert_eq!(eval_with_x(&e, 3).unwrap(), Value::Bool(true));
        assert_eq!(eval_with_x(&e, 4).unwrap(), Value::Bool(false));
    }

    #[test]
    fn division_always_yields_doubles() {
        let e = rate_of("(c-1)/c");
        match eval_with_x(&e, 0).unwrap() {
            Value::Double(v) => assert!((v - 0.75).abs() < 1e-15),
            other => panic!("expected a double, got {other:?}"),
        }
    }

    #[test]
    fn parameters_lift_arithmetic_into_rates() {
        let e = rate_of("beta*x*mu/c");
        match eval_with_x(&e, 2).unwrap() {
            Value::Rate(r) => {
                let v = r.evaluate(&[3.0, 0.0]).unwrap();
                assert!((v - 3.0 * 2.0 * 1.5 / 4.0).abs() < 1e-12);
            }
            other => panic!("expected a rate, got {other:?}"),
        }
    }

    #[test]
    fn constant_rate_expressions_collapse_to_numbers() {
        // beta - beta is the zero polynomial, which is the constant 0
        let e = rate_of("beta - beta + 2");
        assert_eq!(eval_with_x(&e, 0).unwrap(), Value::Double(2.0));
    }

    #[test]
    fn parameters_cannot_reach_guards() {
        let e = expr_of("beta > 1");
        let err = eval_with_x(&e, 0).unwrap_err().to_string();
        assert!(err.contains("numeric operands"), "{err}");

        let e = expr_of("x < 2 & gamma = 1");
        assert!(eval_with_x(&e, 0).is_err());
    }

    #[test]
    fn negative_rates_are_rejected() {
        let (consts, params, vars) = ctx_fixture();
        let values = [0i64];
        let ctx = EvalCtx { consts: &consts, params: &params, var_names: &vars, var_values: Some(&values) };
        let e = rate_of("x - 5");
        assert!(eval_rate(&e, &ctx, "rate").is_err());
        let e = rate_of("2 - beta");
        assert!(eval_rate(&e, &ctx, "rate").is_err());
        let e = rate_of("beta - beta");
        assert!(eval_rate(&e, &ctx, "rate").is_ok());
    }

    #[test]
    fn division_by_zero_and_by_parameters_fails() {
        let e = rate_of("mu/(c-4)");
        assert!(eval_with_x(&e, 0).unwrap_err().to_string().contains("zero"));
        let e = rate_of("mu/beta");
        assert!(eval_with_x(&e, 0).unwrap_err().to_string().contains("parametric"));
    }

    #[test]
    fn unknown_identifiers_are_reported() {
        let e = expr_of("nosuch = 1");
        let err = eval_with_x(&e, 0).unwrap_err().to_string();
        assert!(err.contains("nosuch"), "{err}");
    }
}
