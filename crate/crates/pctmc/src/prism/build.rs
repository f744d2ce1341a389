//! State-space construction and on-the-fly walks.
//!
//! Modules compose by synchronizing on shared action names: a command
//! without an action fires alone; commands carrying action `a` fire jointly,
//! one from every module whose alphabet contains `a`, with the composite
//! rate being the product of the component rates. Alternatives within a
//! command contribute one transition each, and a composed update that would
//! push a variable outside its declared range is discarded.
//!
//! The same successor enumeration backs two consumers: a breadth-first
//! exploration producing an explicit parametric chain, and a random walk
//! that never materializes the state space, for models too large to build
//! but cheap to simulate.

use std::collections::BTreeMap;
use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::ctmc::{Label, ParametricCtmc};
use crate::error::{Error, Result};
use crate::observations::{Dataset, ObservationKind, TimedObservation};
use crate::params::ParamSpace;
use crate::rate::RateExpr;

use super::ast::{Command, ModelAst};
use super::elaborate::Elaborated;
use super::eval::{eval_bool, eval_int, eval_rate, EvalCtx, Value};

/// Bail out of exploration once this many states have been discovered.
pub const DEFAULT_MAX_STATES: usize = 2_000_000;

#[derive(Debug, Clone)]
struct VarInfo {
    name: String,
    lo: i64,
    hi: i64,
    init: i64,
    module: usize,
}

#[derive(Debug, Clone)]
struct CommandIr {
    module: usize,
    line: u32,
    action: Option<String>,
    guard: super::ast::Expr,
    updates: Vec<UpdateIr>,
}

#[derive(Debug, Clone)]
struct UpdateIr {
    rate: super::ast::Expr,
    assigns: Vec<(usize, super::ast::Expr)>,
}

/// One enabled update alternative: its rate and the assignments it makes.
type Alternative = (RateExpr, Vec<(usize, i64)>);

/// A model with resolved constants, ready to explore or walk.
#[derive(Debug, Clone)]
pub struct CompiledModel {
    params: ParamSpace,
    consts: BTreeMap<String, Value>,
    vars: Vec<VarInfo>,
    var_names: Vec<String>,
    commands: Vec<CommandIr>,
    unlabeled: Vec<usize>,
    /// `(action, commands grouped by participating module)`.
    actions: Vec<(String, Vec<Vec<usize>>)>,
}

impl CompiledModel {
    pub fn compile(ast: &ModelAst, elab: &Elaborated) -> Result<Self> {
        let params = elab.params.clone();
        let consts = elab.consts.clone();

        let mut vars: Vec<VarInfo> = Vec::new();
        let const_ctx = EvalCtx::constants_only(&consts, &params);
        for (mi, module) in ast.modules.iter().enumerate() {
            for v in &module.vars {
                if vars.iter().any(|w| w.name == v.name) {
                    return Err(Error::semantic(format!(
                        "variable `{}` declared in more than one module",
                        v.name
                    )));
                }
                if consts.contains_key(&v.name) || params.index_of(&v.name).is_some() {
                    return Err(Error::semantic(format!(
                        "variable `{}` shadows a constant or parameter",
                        v.name
                    )));
                }
                let what = format!("bound of `{}`", v.name);
                let lo = eval_int(&v.lo, &const_ctx, &what)?;
                let hi = eval_int(&v.hi, &const_ctx, &what)?;
                let init = eval_int(&v.init, &const_ctx, &format!("initial value of `{}`", v.name))?;
                if lo > hi {
                    return Err(Error::semantic(format!(
                        "variable `{}` has an empty range [{lo}..{hi}]",
                        v.name
                    )));
                }
                if init < lo || init > hi {
                    return Err(Error::semantic(format!(
                        "initial value {init} of `{}` is outside [{lo}..{hi}]",
                        v.name
                    )));
                }
                vars.push(VarInfo { name: v.name.clone(), lo, hi, init, module: mi });
            }
        }
        let var_names: Vec<String> = vars.iter().map(|v| v.name.clone()).collect();

        let var_index = |name: &str| var_names.iter().position(|n| n == name);
        let mut commands = Vec::new();
        for (mi, module) in ast.modules.iter().enumerate() {
            for cmd in &module.commands {
                commands.push(compile_command(cmd, mi, &module.name, &vars, &var_index)?);
            }
        }

        let mut unlabeled = Vec::new();
        let mut actions: Vec<(String, Vec<Vec<usize>>)> = Vec::new();
        let n_modules = ast.modules.len();
        for (ci, cmd) in commands.iter().enumerate() {
            match &cmd.action {
                None => unlabeled.push(ci),
                Some(name) => {
                    let entry = match actions.iter_mut().find(|(n, _)| n == name) {
                        Some(e) => e,
                        None => {
                            actions.push((name.clone(), vec![Vec::new(); n_modules]));
                            actions.last_mut().expect("just pushed")
                        }
                    };
                    entry.1[cmd.module].push(ci);
                }
            }
        }
        // keep only the participating modules, in module order
        for (_, groups) in &mut actions {
            groups.retain(|g| !g.is_empty());
        }

        Ok(CompiledModel {
            params,
            consts,
            vars,
            var_names,
            commands,
            unlabeled,
            actions,
        })
    }

    pub fn params(&self) -> &ParamSpace {
        &self.params
    }

    pub fn var_names(&self) -> &[String] {
        &self.var_names
    }

    pub fn initial_state(&self) -> Vec<i64> {
        self.vars.iter().map(|v| v.init).collect()
    }

    fn ctx<'a>(&'a self, state: &'a [i64]) -> EvalCtx<'a> {
        EvalCtx {
            consts: &self.consts,
            params: &self.params,
            var_names: &self.var_names,
            var_values: Some(state),
        }
    }

    fn command_fail(&self, ci: usize, e: Error) -> Error {
        let cmd = &self.commands[ci];
        let action = cmd
            .action
            .as_ref()
            .map_or_else(|| "[]".to_string(), |a| format!("[{a}]"));
        let msg = match e {
            Error::Semantic(m) => m,
            other => other.to_string(),
        };
        Error::semantic(format!("in command {action} at line {}: {msg}", cmd.line))
    }

    /// Enabled updates of one command at `state`: `(rate, assignments)`.
    fn enabled(&self, ci: usize, state: &[i64]) -> Result<Option<Vec<Alternative>>> {
        let cmd = &self.commands[ci];
        let ctx = self.ctx(state);
        if !eval_bool(&cmd.guard, &ctx, "guard").map_err(|e| self.command_fail(ci, e))? {
            return Ok(None);
        }
        let mut out = Vec::with_capacity(cmd.updates.len());
        for u in &cmd.updates {
            let rate =
                eval_rate(&u.rate, &ctx, "rate").map_err(|e| self.command_fail(ci, e))?;
            if rate.is_zero() {
                continue;
            }
            let mut assigns = Vec::with_capacity(u.assigns.len());
            for (vi, expr) in &u.assigns {
                let value = eval_int(expr, &ctx, "assignment")
                    .map_err(|e| self.command_fail(ci, e))?;
                assigns.push((*vi, value));
            }
            out.push((rate, assigns));
        }
        Ok(Some(out))
    }

    fn apply(&self, state: &[i64], assigns: &[(usize, i64)]) -> Option<Vec<i64>> {
        let mut next = state.to_vec();
        for &(vi, value) in assigns {
            if value < self.vars[vi].lo || value > self.vars[vi].hi {
                return None;
            }
            next[vi] = value;
        }
        Some(next)
    }

    /// All transitions leaving `state`, in a deterministic order:
    /// unlabeled commands first (module order, then declaration order,
    /// then alternative order), then synchronized actions in first-occurrence
    /// order with participants composed left to right.
    pub fn successors(&self, state: &[i64]) -> Result<Vec<(Vec<i64>, RateExpr)>> {
        let mut out = Vec::new();
        for &ci in &self.unlabeled {
            if let Some(updates) = self.enabled(ci, state)? {
                for (rate, assigns) in updates {
                    if let Some(next) = self.apply(state, &assigns) {
                        out.push((next, rate));
                    }
                }
            }
        }
        for (_, groups) in &self.actions {
            // per participant, the enabled alternatives of all its commands
            let mut options: Vec<Vec<Alternative>> = Vec::with_capacity(groups.len());
            let mut blocked = false;
            for group in groups {
                let mut opts = Vec::new();
                for &ci in group {
                    if let Some(mut updates) = self.enabled(ci, state)? {
                        opts.append(&mut updates);
                    }
                }
                if opts.is_empty() {
                    blocked = true;
                    break;
                }
                options.push(opts);
            }
            if blocked {
                continue;
            }
            let mut choice = vec![0usize; options.len()];
            loop {
                let mut rate = RateExpr::constant(1.0, self.params.len())?;
                let mut assigns: Vec<(usize, i64)> = Vec::new();
                for (gi, &oi) in choice.iter().enumerate() {
                    let (r, a) = &options[gi][oi];
                    rate = rate.mul(r)?;
                    assigns.extend_from_slice(a);
                }
                if !rate.is_zero() {
                    if let Some(next) = self.apply(state, &assigns) {
                        out.push((next, rate));
                    }
                }
                // odometer over the per-participant choices
                let mut done = true;
                for gi in (0..choice.len()).rev() {
                    choice[gi] += 1;
                    if choice[gi] < options[gi].len() {
                        done = false;
                        break;
                    }
                    choice[gi] = 0;
                }
                if done {
                    break;
                }
            }
        }
        Ok(out)
    }

    fn observable_indices(&self, observables: &[String]) -> Result<Vec<usize>> {
        if observables.is_empty() {
            return Err(Error::semantic("at least one observable variable is required"));
        }
        let mut indices = Vec::with_capacity(observables.len());
        for name in observables {
            let i = self
                .var_names
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| Error::semantic(format!("unknown observable variable `{name}`")))?;
            if indices.contains(&i) {
                return Err(Error::semantic(format!("observable `{name}` listed twice")));
            }
            indices.push(i);
        }
        Ok(indices)
    }

    fn project(indices: &[usize], state: &[i64]) -> Label {
        Label(indices.iter().map(|&i| state[i]).collect())
    }

    /// Explore the reachable states breadth-first and build the chain,
    /// labelling states by the values of the `observables` variables.
    pub fn build(&self, observables: &[String]) -> Result<ParametricCtmc> {
        self.build_bounded(observables, DEFAULT_MAX_STATES)
    }

    pub fn build_bounded(
        &self,
        observables: &[String],
        max_states: usize,
    ) -> Result<ParametricCtmc> {
        let obs = self.observable_indices(observables)?;
        let mut states: Vec<Vec<i64>> = vec![self.initial_state()];
        let mut index: HashMap<Vec<i64>, usize> = HashMap::new();
        index.insert(states[0].clone(), 0);
        let mut edges: Vec<(usize, usize, RateExpr)> = Vec::new();

        let mut head = 0;
        while head < states.len() {
            let state = states[head].clone();
            for (next, rate) in self.successors(&state)? {
                let target = match index.get(&next) {
                    Some(&t) => t,
                    None => {
                        if states.len() >= max_states {
                            return Err(Error::semantic(format!(
                                "state space exceeds the limit of {max_states} states"
                            )));
                        }
                        let t = states.len();
                        index.insert(next.clone(), t);
                        states.push(next);
                        t
                    }
                };
                edges.push((head, target, rate));
            }
            head += 1;
        }

        let labels: Vec<Label> = states.iter().map(|s| Self::project(&obs, s)).collect();
        let mut initial = vec![0.0; states.len()];
        initial[0] = 1.0;
        ParametricCtmc::new(self.params.clone(), labels, initial, edges)
    }

    fn check_concrete(&self) -> Result<()> {
        if !self.params.is_empty() {
            return Err(Error::semantic(format!(
                "cannot simulate with unbound parameters: {}",
                self.params.names().join(", ")
            )));
        }
        Ok(())
    }

    /// Walk the model without building it, drawing dwell times by inversion
    /// and successors by a cumulative-rate scan, exactly like simulation on
    /// an explicit chain. All parameters must be bound.
    pub fn simulate_with<R: Rng>(
        &self,
        observables: &[String],
        steps: usize,
        rng: &mut R,
    ) -> Result<TimedObservation> {
        self.check_concrete()?;
        let obs = self.observable_indices(observables)?;
        let mut state = self.initial_state();
        // one draw for the (deterministic) initial state, matching the
        // explicit-chain simulator's consumption pattern
        let _: f64 = rng.gen();
        let mut labels = vec![Self::project(&obs, &state)];
        let mut dwells = Vec::new();
        for _ in 0..steps {
            let succs = self.successors(&state)?;
            let rates: Vec<f64> = succs
                .iter()
                .map(|(_, r)| r.evaluate(&[]).expect("concrete model"))
                .collect();
            let exit: f64 = rates.iter().sum();
            if exit == 0.0 {
                break;
            }
            let u = loop {
                let u: f64 = rng.gen();
                if u > 0.0 {
                    break u;
                }
            };
            let dwell = -(-u).ln_1p() / exit;
            let w: f64 = rng.gen::<f64>() * exit;
            let mut acc = 0.0;
            let mut chosen = succs.len() - 1;
            for (i, r) in rates.iter().enumerate() {
                acc += r;
                if w < acc {
                    chosen = i;
                    break;
                }
            }
            dwells.push(dwell);
            state = succs[chosen].0.clone();
            labels.push(Self::project(&obs, &state));
        }
        TimedObservation::new(labels, dwells)
    }

    pub fn simulate(
        &self,
        observables: &[String],
        steps: usize,
        seed: u64,
    ) -> Result<TimedObservation> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        self.simulate_with(observables, steps, &mut rng)
    }

    /// Simulate a dataset with one ChaCha12 stream per sequence.
    pub fn simulate_dataset(
        &self,
        observables: &[String],
        n_seqs: usize,
        steps: usize,
        kind: ObservationKind,
        seed: u64,
    ) -> Result<Dataset> {
        if n_seqs == 0 {
            return Err(Error::invalid("a dataset needs at least one sequence"));
        }
        self.check_concrete()?;
        self.observable_indices(observables)?;
        let seqs: Vec<Result<TimedObservation>> = (0..n_seqs)
            .into_par_iter()
            .map(|j| {
                let mut rng = ChaCha12Rng::seed_from_u64(seed);
                rng.set_stream(j as u64);
                self.simulate_with(observables, steps, &mut rng)
            })
            .collect();
        let seqs: Vec<TimedObservation> = seqs.into_iter().collect::<Result<_>>()?;
        let d = Dataset::timed(observables.to_vec(), seqs)?;
        Ok(match kind {
            ObservationKind::Timed => d,
            ObservationKind::Untimed => d.strip_times(),
        })
    }
}

fn compile_command(
    cmd: &Command,
    module_idx: usize,
    module_name: &str,
    vars: &[VarInfo],
    var_index: &impl Fn(&str) -> Option<usize>,
) -> Result<CommandIr> {
    let mut updates = Vec::with_capacity(cmd.updates.len());
    for u in &cmd.updates {
        let mut assigns = Vec::with_capacity(u.assigns.len());
        for (name, expr) in &u.assigns {
            let vi = var_index(name).ok_or_else(|| {
                Error::semantic(format!(
                    "line {}: assignment to unknown variable `{name}`",
                    cmd.line
                ))
            })?;
            if vars[vi].module != module_idx {
                return Err(Error::semantic(format!(
                    "line {}: module `{module_name}` assigns to `{name}`, which belongs to another module",
                    cmd.line
                )));
            }
            if assigns.iter().any(|(w, _)| *w == vi) {
                return Err(Error::semantic(format!(
                    "line {}: `{name}` assigned twice in one update",
                    cmd.line
                )));
            }
            assigns.push((vi, expr.clone()));
        }
        updates.push(UpdateIr { rate: u.rate.clone(), assigns });
    }
    Ok(CommandIr {
        module: module_idx,
        line: cmd.line,
        action: cmd.action.clone(),
        guard: cmd.guard.clone(),
        updates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::observations;
    use crate::prism::parser::parse;
    use crate::prism::elaborate::elaborate;

    fn compiled(src: &str) -> CompiledModel {
        let ast = parse(src).unwrap();
        let elab = elaborate(&ast, &BTreeMap::new(), &[]).unwrap();
        CompiledModel::compile(&ast, &elab).unwrap()
    }

    fn compile_err(src: &str) -> String {
        let ast = parse(src).unwrap();
        let elab = elaborate(&ast, &BTreeMap::new(), &[]).unwrap();
        CompiledModel::compile(&ast, &elab).unwrap_err().to_string()
    }

    const SYNC: &str = "
        ctmc
        const double lambda;
        module a
          x : [0..2] init 0;
          [go] x<2 -> lambda:(x'=x+1);
          [] x>0 -> 1:(x'=x-1);
        endmodule
        module b
          y : [0..1] init 0;
          [go] y=0 -> 2:(y'=1);
          [go] y=1 -> 3:(y'=0);
        endmodule
    ";

    #[test]
    fn synchronized_rates_multiply() {
        let m = compiled(SYNC);
        let succ = m.successors(&[0, 0]).unwrap();
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, vec![1, 1]);
        assert_eq!(succ[0].1.evaluate(&[5.0]).unwrap(), 10.0);

        let succ = m.successors(&[1, 1]).unwrap();
        assert_eq!(succ.len(), 2);
        assert_eq!(succ[0].0, vec![0, 1]);
        assert_eq!(succ[0].1.evaluate(&[5.0]).unwrap(), 1.0);
        assert_eq!(succ[1].0, vec![2, 0]);
        assert_eq!(succ[1].1.evaluate(&[5.0]).unwrap(), 15.0);
    }

    #[test]
    fn blocked_participant_disables_action() {
        let m = compiled(SYNC);
        let succ = m.successors(&[2, 0]).unwrap();
        assert_eq!(succ.len(), 1);
        assert_eq!(succ[0].0, vec![1, 0]);
    }

    #[test]
    fn out_of_range_update_is_discarded() {
        let m = compiled(
            "ctmc
             module m
               x : [0..3] init 0;
               [] x>=0 -> 1:(x'=x+2);
             endmodule",
        );
        assert_eq!(m.successors(&[2]).unwrap().len(), 0);
        assert_eq!(m.successors(&[1]).unwrap()[0].0, vec![3]);
    }

    #[test]
    fn build_projects_labels_in_observable_order() {
        let m = compiled(
            "ctmc
             module m
               x : [0..2] init 0;
               [] x<2 -> 2:(x'=x+1);
             endmodule
             module n
               y : [0..1] init 1;
             endmodule",
        );
        let p = m.build(&["y".into(), "x".into()]).unwrap();
        assert_eq!(p.n_states(), 3);
        assert_eq!(p.n_transitions(), 2);
        assert_eq!(p.label(0).0, vec![1, 0]);
        assert_eq!(p.label(2).0, vec![1, 2]);
        assert_eq!(p.initial(), &[1.0, 0.0, 0.0]);
    }

    #[test]
    fn state_cap_is_enforced() {
        let m = compiled(
            "ctmc
             module m
               x : [0..9] init 0;
               [] x<9 -> 1:(x'=x+1);
             endmodule",
        );
        let err = m.build_bounded(&["x".into()], 4).unwrap_err().to_string();
        assert!(err.contains("limit"), "{err}");
    }

    #[test]
    fn walk_matches_simulation_on_the_built_chain() {
        let src = "ctmc
             module m
               x : [0..4] init 0;
               [] x<4 -> 1.5:(x'=x+1);
               [] x>0 -> 0.7:(x'=x-1);
             endmodule";
        let m = compiled(src);
        let built = m.build(&["x".into()]).unwrap().instantiate(&[]).unwrap();
        for seed in 0..5 {
            let direct = m.simulate(&["x".into()], 40, seed).unwrap();
            let explicit = observations::simulate(&built, 40, seed);
            assert_eq!(direct, explicit);
        }
    }

    #[test]
    fn walk_dataset_uses_one_stream_per_sequence() {
        let src = "ctmc
             module m
               x : [0..4] init 0;
               [] x<4 -> 1.5:(x'=x+1);
               [] x>0 -> 0.7:(x'=x-1);
             endmodule";
        let m = compiled(src);
        let obs = vec!["x".to_string()];
        let d = m
            .simulate_dataset(&obs, 3, 25, ObservationKind::Timed, 11)
            .unwrap();
        let built = m.build(&obs).unwrap().instantiate(&[]).unwrap();
        let d2 = observations::simulate_dataset(&built, obs, 3, 25, ObservationKind::Timed, 11)
            .unwrap();
        assert_eq!(d.to_jsonl(), d2.to_jsonl());
    }

    #[test]
    fn unbound_parameters_block_simulation() {
        let m = compiled(SYNC);
        let err = m.simulate(&["x".into()], 10, 0).unwrap_err().to_string();
        assert!(err.contains("lambda"), "{err}");
    }

    #[test]
    fn observable_names_are_checked() {
        let m = compiled(SYNC);
        let err = m.build(&["z".into()]).unwrap_err().to_string();
        assert!(err.contains("unknown observable"), "{err}");
        let err = m.build(&["x".into(), "x".into()]).unwrap_err().to_string();
        assert!(err.contains("twice"), "{err}");
        let err = m.build(&[]).unwrap_err().to_string();
        assert!(err.contains("at least one"), "{err}");
    }

    #[test]
    fn variable_declarations_are_validated() {
        let err = compile_err(
            "ctmc
             module a
               x : [0..1] init 0;
             endmodule
             module b
               x : [0..1] init 0;
             endmodule",
        );
        assert!(err.contains("more than one module"), "{err}");

        let err = compile_err(
            "ctmc
             const int c = 3;
             module a
               c : [0..1] init 0;
             endmodule",
        );
        assert!(err.contains("shadows"), "{err}");

        let err = compile_err(
            "ctmc
             module a
               x : [2..1] init 2;
             endmodule",
        );
        assert!(err.contains("empty range"), "{err}");

        let err = compile_err(
            "ctmc
             module a
               x : [0..1] init 2;
             endmodule",
        );
        assert!(err.contains("outside"), "{err}");
    }

    #[test]
    fn assignments_stay_in_their_module() {
        let err = compile_err(
            "ctmc
             module a
               x : [0..1] init 0;
             endmodule
             module b
               y : [0..1] init 0;
               [] y=0 -> 1:(x'=1);
             endmodule",
        );
        assert!(err.contains("belongs to another module"), "{err}");

        let err = compile_err(
            "ctmc
             module a
               x : [0..3] init 0;
               [] x<2 -> 1:(x'=x+1)&(x'=x+2);
             endmodule",
        );
        assert!(err.contains("assigned twice"), "{err}");
    }

    #[test]
    fn guard_errors_name_the_command() {
        let m = compiled(
            "ctmc
             const double lambda;
             module a
               x : [0..1] init 0;
               [] x<lambda -> 1:(x'=1);
             endmodule",
        );
        let err = m.successors(&[0]).unwrap_err().to_string();
        assert!(err.contains("line 5"), "{err}");
    }
}
