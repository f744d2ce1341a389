//! Fidelity checks for the bundled benchmark models: state-space sizes,
//! initial-state rates, and agreement between the monolithic and the
//! compositional formulation of the epidemic model.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use pctmc::prism::{compile, elaborate, parse, CompiledModel, Value};
use pctmc::RateExpr;

const TANDEM: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/tandem.prism"));
const SIR: &str = include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/sir.prism"));
const SIR_COMPOSED: &str =
    include_str!(concat!(env!("CARGO_MANIFEST_DIR"), "/../../models/sir_composed.prism"));

fn bind(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn tandem_source_shape() {
    let ast = parse(TANDEM).unwrap();
    assert_eq!(ast.modules.len(), 2);
    let actions: BTreeSet<String> = ast
        .modules
        .iter()
        .flat_map(|m| m.commands.iter().filter_map(|c| c.action.clone()))
        .collect();
    assert_eq!(actions.into_iter().collect::<Vec<_>>(), ["route"]);
}

#[test]
fn tandem_constants_resolve_from_the_capacity() {
    let ast = parse(TANDEM).unwrap();
    let elab = elaborate(&ast, &bind(&[("c", 4.0)]), &[]).unwrap();
    assert!(elab.params.is_empty());
    for (name, want) in
        [("lambda", 16.0), ("mu1a", 0.2), ("mu1b", 1.8), ("mu2", 2.0), ("kappa", 4.0)]
    {
        assert!(
            matches!(elab.consts.get(name), Some(Value::Double(x)) if *x == want),
            "{name} should elaborate to {want}, got {:?}",
            elab.consts.get(name)
        );
    }
    assert!(matches!(elab.consts.get("c"), Some(Value::Int(4))));

    let freed = elaborate(&ast, &bind(&[("c", 4.0)]), &["mu1a".into()]).unwrap();
    assert_eq!(freed.params.names(), ["mu1a"]);
}

#[test]
fn tandem_capacity_four_state_space() {
    let m = compile(TANDEM, &bind(&[("c", 4.0)]), &[]).unwrap();
    let p = m.build(&["sc".into(), "ph".into()]).unwrap();
    assert_eq!(p.n_states(), 45);
    assert_eq!(p.n_transitions(), 123);
}

#[test]
fn tandem_needs_its_capacity_bound() {
    let err = compile(TANDEM, &BTreeMap::new(), &[]).unwrap_err().to_string();
    assert!(err.contains("c"), "{err}");
}

#[test]
fn epidemic_initial_state_rates_at_full_population() {
    let m = compile(SIR, &bind(&[("SIZE", 100000.0)]), &[]).unwrap();
    assert_eq!(m.params().names(), ["beta", "gamma", "plock"]);
    assert_eq!(m.initial_state(), vec![99936, 48, 16]);
    let succ = m.successors(&m.initial_state()).unwrap();
    assert_eq!(succ.len(), 2);

    let (infection_target, infection_rate) = &succ[0];
    assert_eq!(infection_target, &vec![99935, 49, 16]);
    assert_eq!(infection_rate.terms().len(), 1);
    assert_eq!(infection_rate.terms()[0].exponents(), &[1, 0, 1]);
    assert!((infection_rate.terms()[0].coeff() - 47.96928).abs() < 1e-9);

    let (recovery_target, recovery_rate) = &succ[1];
    assert_eq!(recovery_target, &vec![99936, 47, 17]);
    assert_eq!(recovery_rate.terms().len(), 1);
    assert_eq!(recovery_rate.terms()[0].exponents(), &[0, 1, 1]);
    assert_eq!(recovery_rate.terms()[0].coeff(), 48.0);
}

const SIR_FIXED_SIZE: &str = "ctmc
// SIR model parameters
const double beta; const double gamma;
const double plock;
const int SIZE = 100000; // population size

module SIR
s : [0..SIZE] init 99936;
i : [0..SIZE] init 48;
r : [0..SIZE] init 16;

[] i>0 & i<SIZE & s>0 -> beta*s*i*plock/SIZE : (s'=s-1)&(i'=i+1);
[] i>0 & r<SIZE -> gamma*i*plock : (i'=i-1)&(r'=r+1);
endmodule
";

#[test]
fn epidemic_source_shape_and_bindings() {
    let ast = parse(SIR_FIXED_SIZE).unwrap();
    assert_eq!(ast.modules.len(), 1);
    assert_eq!(ast.modules[0].vars.len(), 3);
    assert_eq!(ast.modules[0].commands.len(), 2);

    let m = compile(SIR_FIXED_SIZE, &BTreeMap::new(), &[]).unwrap();
    assert_eq!(m.params().names(), ["beta", "gamma", "plock"]);

    let m = compile(SIR_FIXED_SIZE, &bind(&[("plock", 0.472081)]), &[]).unwrap();
    assert_eq!(m.params().names(), ["beta", "gamma"]);

    // the bundled source reproduces this model once SIZE matches
    let bundled = compile(SIR, &bind(&[("SIZE", 100000.0)]), &[]).unwrap();
    assert_eq!(bundled.initial_state(), m.initial_state());
}

type Successors = Vec<(Vec<i64>, RateExpr)>;

fn explore(m: &CompiledModel) -> BTreeMap<Vec<i64>, Successors> {
    let mut out: BTreeMap<Vec<i64>, Successors> = BTreeMap::new();
    let mut queue = VecDeque::from([m.initial_state()]);
    while let Some(state) = queue.pop_front() {
        if out.contains_key(&state) {
            continue;
        }
        let mut succ = m.successors(&state).unwrap();
        succ.sort_by(|a, b| a.0.cmp(&b.0));
        for (next, _) in &succ {
            if !out.contains_key(next) {
                queue.push_back(next.clone());
            }
        }
        out.insert(state, succ);
    }
    out
}

fn rates_match(a: &RateExpr, b: &RateExpr) -> bool {
    a.terms().len() == b.terms().len()
        && a.terms().iter().zip(b.terms()).all(|(x, y)| {
            x.exponents() == y.exponents()
                && (x.coeff() - y.coeff()).abs() <= 1e-12 * x.coeff().abs().max(y.coeff().abs())
        })
}

#[test]
fn monolithic_and_compositional_epidemics_agree() {
    let size = 100.0;
    let mono = compile(SIR, &bind(&[("SIZE", size)]), &[]).unwrap();
    let comp = compile(SIR_COMPOSED, &bind(&[("SIZE", size)]), &[]).unwrap();
    assert_eq!(mono.params().names(), comp.params().names());
    assert_eq!(mono.initial_state(), comp.initial_state());

    let a = explore(&mono);
    let b = explore(&comp);
    assert_eq!(a.len(), b.len());
    assert!(a.len() > 100, "exploration covered only {} states", a.len());
    for (state, succ_a) in &a {
        let succ_b = b.get(state).unwrap_or_else(|| panic!("{state:?} unreachable in one model"));
        assert_eq!(succ_a.len(), succ_b.len(), "at {state:?}");
        for ((ta, ra), (tb, rb)) in succ_a.iter().zip(succ_b) {
            assert_eq!(ta, tb, "at {state:?}");
            assert!(rates_match(ra, rb), "at {state:?}: {ra:?} vs {rb:?}");
        }
    }

    let obs = ["i".to_string()];
    let built_a = mono.build(&obs).unwrap();
    let built_b = comp.build(&obs).unwrap();
    assert_eq!(built_a.n_states(), built_b.n_states());
    assert_eq!(built_a.n_transitions(), built_b.n_transitions());
}

#[test]
fn tandem_direct_walk_equals_walk_on_the_built_chain() {
    let m = compile(TANDEM, &bind(&[("c", 3.0)]), &[]).unwrap();
    let obs = vec!["sc".to_string(), "ph".to_string()];
    let built = m.build(&obs).unwrap().instantiate(&[]).unwrap();
    for seed in 0..4 {
        let direct = m.simulate(&obs, 25, seed).unwrap();
        let explicit = pctmc::observations::simulate(&built, 25, seed);
        assert_eq!(direct, explicit);
    }
}
