//! Observed executions and datasets.
//!
//! An execution of a chain is seen through its state labels only. A timed
//! observation records the label sequence together with the dwell time
//! spent in each state except the last; an untimed observation keeps just
//! the labels. Datasets are stored line-delimited: a JSON header object
//! (kind and observable names) followed by one JSON record per sequence.
//!
//! Simulation draws dwell times by inversion (`-ln(1-u)/E(s)`) and picks
//! successors by a cumulative-rate scan over the outgoing transitions in
//! transition-list order, consuming exactly two uniform draws per jump from
//! a ChaCha12 stream. Sequence `j` of a dataset uses stream `j` of the
//! dataset seed, so datasets are reproducible independently of thread count.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ctmc::{ConcreteCtmc, Label};
use crate::error::{Error, Result};

/// Whether a dataset carries dwell times.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObservationKind {
    Timed,
    Untimed,
}

impl std::fmt::Display for ObservationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ObservationKind::Timed => write!(f, "timed"),
            ObservationKind::Untimed => write!(f, "untimed"),
        }
    }
}

/// Label sequence with one dwell time per non-final position.
#[derive(Debug, Clone, PartialEq)]
pub struct TimedObservation {
    labels: Vec<Label>,
    dwells: Vec<f64>,
}

impl TimedObservation {
    pub fn new(labels: Vec<Label>, dwells: Vec<f64>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("an observation needs at least one label"));
        }
        if dwells.len() + 1 != labels.len() {
            return Err(Error::dim(format!(
                "{} labels need {} dwell times, got {}",
                labels.len(),
                labels.len() - 1,
                dwells.len()
            )));
        }
        for d in &dwells {
            if !d.is_finite() || *d <= 0.0 {
                return Err(Error::invalid(format!("dwell times must be positive, got {d}")));
            }
        }
        Ok(TimedObservation { labels, dwells })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn dwells(&self) -> &[f64] {
        &self.dwells
    }

    /// Number of jumps (labels minus one).
    pub fn horizon(&self) -> usize {
        self.dwells.len()
    }

    pub fn strip_times(&self) -> UntimedObservation {
        UntimedObservation { labels: self.labels.clone() }
    }
}

/// Label sequence without timing information.
#[derive(Debug, Clone, PartialEq)]
pub struct UntimedObservation {
    labels: Vec<Label>,
}

impl UntimedObservation {
    pub fn new(labels: Vec<Label>) -> Result<Self> {
        if labels.is_empty() {
            return Err(Error::invalid("an observation needs at least one label"));
        }
        Ok(UntimedObservation { labels })
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn horizon(&self) -> usize {
        self.labels.len() - 1
    }
}

/// Borrowed view of one sequence: labels plus dwells when timed.
#[derive(Debug, Clone, Copy)]
pub struct SeqView<'a> {
    pub labels: &'a [Label],
    pub dwells: Option<&'a [f64]>,
}

#[derive(Debug, Clone)]
enum Sequences {
    Timed(Vec<TimedObservation>),
    Untimed(Vec<UntimedObservation>),
}

/// A homogeneous collection of observations plus the names of the
/// observable variables the labels project onto.
#[derive(Debug, Clone)]
pub struct Dataset {
    observables: Vec<String>,
    sequences: Sequences,
}

impl Dataset {
    pub fn timed(observables: Vec<String>, seqs: Vec<TimedObservation>) -> Result<Self> {
        let d = Dataset { observables, sequences: Sequences::Timed(seqs) };
        d.validate()?;
        Ok(d)
    }

    pub fn untimed(observables: Vec<String>, seqs: Vec<UntimedObservation>) -> Result<Self> {
        let d = Dataset { observables, sequences: Sequences::Untimed(seqs) };
        d.validate()?;
        Ok(d)
    }

    fn validate(&self) -> Result<()> {
        if self.is_empty() {
            return Err(Error::invalid("a dataset needs at least one sequence"));
        }
        let width = self.observables.len();
        for j in 0..self.len() {
            if self.sequence(j).labels.iter().any(|l| l.0.len() != width) {
                return Err(Error::dim(format!(
                    "sequence {j} has labels of width other than {width}"
                )));
            }
        }
        Ok(())
    }

    pub fn kind(&self) -> ObservationKind {
        match self.sequences {
            Sequences::Timed(_) => ObservationKind::Timed,
            Sequences::Untimed(_) => ObservationKind::Untimed,
        }
    }

    pub fn observables(&self) -> &[String] {
        &self.observables
    }

    pub fn len(&self) -> usize {
        match &self.sequences {
            Sequences::Timed(v) => v.len(),
            Sequences::Untimed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn sequence(&self, j: usize) -> SeqView<'_> {
        match &self.sequences {
            Sequences::Timed(v) => SeqView { labels: v[j].labels(), dwells: Some(v[j].dwells()) },
            Sequences::Untimed(v) => SeqView { labels: v[j].labels(), dwells: None },
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = SeqView<'_>> {
        (0..self.len()).map(move |j| self.sequence(j))
    }

    /// Distinct labels occurring anywhere in the dataset.
    pub fn alphabet(&self) -> BTreeSet<&Label> {
        self.iter().flat_map(|s| s.labels.iter()).collect()
    }

    /// Drop dwell times, keeping the label sequences.
    pub fn strip_times(&self) -> Dataset {
        let seqs = match &self.sequences {
            Sequences::Timed(v) => v.iter().map(TimedObservation::strip_times).collect(),
            Sequences::Untimed(v) => v.clone(),
        };
        Dataset { observables: self.observables.clone(), sequences: Sequences::Untimed(seqs) }
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            kind: self.kind(),
            observables: self.observables.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for j in 0..self.len() {
            let s = self.sequence(j);
            let rec = Record {
                labels: s.labels.iter().map(|l| l.0.clone()).collect(),
                times: s.dwells.map(|d| d.to_vec()),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (line_no, header_line) = lines
            .next()
            .ok_or_else(|| Error::DatasetFormat { line: 1, msg: "empty dataset file".into() })?;
        let header: Header = serde_json::from_str(header_line).map_err(|e| Error::DatasetFormat {
            line: line_no + 1,
            msg: format!("bad header: {e}"),
        })?;
        let width = header.observables.len();

        let mut timed = Vec::new();
        let mut untimed = Vec::new();
        for (idx, line) in lines {
            let line_no = idx + 1;
            let fail = |msg: String| Error::DatasetFormat { line: line_no, msg };
            let rec: Record = serde_json::from_str(line)
                .map_err(|e| fail(format!("bad record: {e}")))?;
            if rec.labels.iter().any(|l| l.len() != width) {
                return Err(fail(format!("label width does not match {width} observables")));
            }
            let labels: Vec<Label> = rec.labels.into_iter().map(Label).collect();
            match header.kind {
                ObservationKind::Timed => {
                    let times = rec.times.unwrap_or_default();
                    let obs = TimedObservation::new(labels, times)
                        .map_err(|e| fail(e.to_string()))?;
                    timed.push(obs);
                }
                ObservationKind::Untimed => {
                    if rec.times.is_some() {
                        return Err(fail("untimed dataset must not carry times".into()));
                    }
                    let obs =
                        UntimedObservation::new(labels).map_err(|e| fail(e.to_string()))?;
                    untimed.push(obs);
                }
            }
        }
        match header.kind {
            ObservationKind::Timed => Dataset::timed(header.observables, timed),
            ObservationKind::Untimed => Dataset::untimed(header.observables, untimed),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = File::create(path)?;
        f.write_all(self.to_jsonl().as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Dataset::from_jsonl(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct Header {
    kind: ObservationKind,
    observables: Vec<String>,
}

#[derive(Serialize, Deserialize)]
struct Record {
    labels: Vec<Vec<i64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    times: Option<Vec<f64>>,
}

fn positive_uniform<R: Rng>(rng: &mut R) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 {
            return u;
        }
    }
}

/// Simulate one execution with a caller-provided generator.
///
/// The walk starts from a state sampled from the initial distribution and
/// stops after `steps` jumps or earlier in an absorbing state.
pub fn simulate_with<R: Rng>(m: &ConcreteCtmc, steps: usize, rng: &mut R) -> TimedObservation {
    let mut state = {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = m.n_states() - 1;
        for (s, p) in m.initial().iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = s;
                break;
            }
        }
        chosen
    };
    let mut labels = vec![m.label(state).clone()];
    let mut dwells = Vec::new();
    for _ in 0..steps {
        let exit = m.exit(state);
        if exit == 0.0 {
            break;
        }
        let u = positive_uniform(rng);
        let dwell = -(-u).ln_1p() / exit;
        let w: f64 = rng.gen::<f64>() * exit;
        let mut acc = 0.0;
        let mut next = state;
        for &i in m.outgoing(state) {
            let t = &m.transitions()[i as usize];
            acc += t.rate;
            next = t.target;
            if w < acc {
                break;
            }
        }
        dwells.push(dwell);
        state = next;
        labels.push(m.label(state).clone());
    }
    TimedObservation { labels, dwells }
}

/// Simulate one execution from a seed (ChaCha12, stream 0).
pub fn simulate(m: &ConcreteCtmc, steps: usize, seed: u64) -> TimedObservation {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    simulate_with(m, steps, &mut rng)
}

/// Simulate a dataset of `n_seqs` independent executions.
///
/// Sequence `j` uses ChaCha12 stream `j` of `seed`, so the result does not
/// depend on scheduling. `observables` only names the label components.
pub fn simulate_dataset(
    m: &ConcreteCtmc,
    observables: Vec<String>,
    n_seqs: usize,
    steps: usize,
    kind: ObservationKind,
    seed: u64,
) -> Result<Dataset> {
    if n_seqs == 0 {
        return Err(Error::invalid("a dataset needs at least one sequence"));
    }
    if m.labels()[0].0.len() != observables.len() {
        return Err(Error::dim(format!(
            "chain labels have width {}, got {} observable names",
            m.labels()[0].0.len(),
            observables.len()
        )));
    }
    let seqs: Vec<TimedObservation> = (0..n_seqs)
        .into_par_iter()
        .map(|j| {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            rng.set_stream(j as u64);
            simulate_with(m, steps, &mut rng)
        })
        .collect();
    let d = Dataset::timed(observables, seqs)?;
    Ok(match kind {
        ObservationKind::Timed => d,
        ObservationKind::Untimed => d.strip_times(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_state_loop(rate_ab: f64, rate_ba: f64) -> ConcreteCtmc {
        ConcreteCtmc::new(
            vec![Label(vec![0]), Label(vec![1])],
            vec![1.0, 0.0],
            vec![(0, 1, rate_ab), (1, 0, rate_ba)],
        )
        .unwrap()
    }

    #[test]
    fn observation_invariants() {
        let l = |v: i64| Label(vec![v]);
        assert!(TimedObservation::new(vec![], vec![]).is_err());
        assert!(TimedObservation::new(vec![l(0), l(1)], vec![]).is_err());
        assert!(TimedObservation::new(vec![l(0), l(1)], vec![0.0]).is_err());
        assert!(TimedObservation::new(vec![l(0), l(1)], vec![-1.0]).is_err());
        assert!(TimedObservation::new(vec![l(0), l(1)], vec![0.5]).is_ok());
        assert!(UntimedObservation::new(vec![]).is_err());
    }

    #[test]
    fn simulation_is_reproducible_per_seed_and_stream() {
        let m = two_state_loop(2.0, 3.0);
        let a = simulate(&m, 20, 7);
        let b = simulate(&m, 20, 7);
        assert_eq!(a, b);
        let c = simulate(&m, 20, 8);
        assert_ne!(a, c);

        let d1 = simulate_dataset(&m, vec!["x".into()], 4, 20, ObservationKind::Timed, 42).unwrap();
        let d2 = simulate_dataset(&m, vec!["x".into()], 4, 20, ObservationKind::Timed, 42).unwrap();
        assert_eq!(d1.to_jsonl(), d2.to_jsonl());
        // distinct streams give distinct draws
        assert_ne!(d1.sequence(0).dwells, d1.sequence(1).dwells);
    }

    #[test]
    fn simulation_alternates_labels_on_a_loop() {
        let m = two_state_loop(2.0, 3.0);
        let o = simulate(&m, 15, 1);
        assert_eq!(o.labels().len(), 16);
        assert_eq!(o.dwells().len(), 15);
        for (i, l) in o.labels().iter().enumerate() {
            assert_eq!(l.0[0], (i % 2) as i64);
        }
        assert!(o.dwells().iter().all(|d| *d > 0.0));
    }

    #[test]
    fn simulation_stops_in_absorbing_states() {
        let m = ConcreteCtmc::new(
            vec![Label(vec![0]), Label(vec![1])],
            vec![1.0, 0.0],
            vec![(0, 1, 5.0)],
        )
        .unwrap();
        let o = simulate(&m, 10, 3);
        assert_eq!(o.labels().len(), 2);
        assert_eq!(o.dwells().len(), 1);
    }

    #[test]
    fn dwell_times_match_exit_rates_on_average() {
        let m = two_state_loop(4.0, 0.5);
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for _ in 0..400 {
            let o = simulate_with(&m, 10, &mut rng);
            for (i, d) in o.dwells().iter().enumerate() {
                sums[i % 2] += d;
                counts[i % 2] += 1;
            }
        }
        let mean0 = sums[0] / counts[0] as f64;
        let mean1 = sums[1] / counts[1] as f64;
        assert!((mean0 - 0.25).abs() < 0.02, "mean dwell in state 0 was {mean0}");
        assert!((mean1 - 2.0).abs() < 0.2, "mean dwell in state 1 was {mean1}");
    }

    #[test]
    fn jsonl_round_trip_is_byte_identical() {
        let m = two_state_loop(1.5, 2.5);
        let d = simulate_dataset(&m, vec!["x".into()], 3, 12, ObservationKind::Timed, 5).unwrap();
        let text = d.to_jsonl();
        let back = Dataset::from_jsonl(&text).unwrap();
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(back.kind(), ObservationKind::Timed);
        assert_eq!(back.len(), 3);

        let u = d.strip_times();
        let text = u.to_jsonl();
        let back = Dataset::from_jsonl(&text).unwrap();
        assert_eq!(back.to_jsonl(), text);
        assert_eq!(back.kind(), ObservationKind::Untimed);
    }

    #[test]
    fn malformed_datasets_are_rejected_with_line_numbers() {
        let cases = [
            ("", "empty"),
            ("{\"observables\":[\"x\"]}\n", "header"),
            ("{\"kind\":\"timed\",\"observables\":[\"x\"]}\nnot json\n", "record"),
            (
                "{\"kind\":\"timed\",\"observables\":[\"x\"]}\n{\"labels\":[[0],[1]],\"times\":[-1.0]}\n",
                "positive",
            ),
            (
                "{\"kind\":\"timed\",\"observables\":[\"x\"]}\n{\"labels\":[[0],[1]],\"times\":[]}\n",
                "dwell",
            ),
            (
                "{\"kind\":\"timed\",\"observables\":[\"x\",\"y\"]}\n{\"labels\":[[0]],\"times\":[]}\n",
                "width",
            ),
            (
                "{\"kind\":\"untimed\",\"observables\":[\"x\"]}\n{\"labels\":[[0],[1]],\"times\":[1.0]}\n",
                "untimed",
            ),
            ("{\"kind\":\"timed\",\"observables\":[\"x\"]}\n", "at least one"),
        ];
        for (text, needle) in cases {
            let err = Dataset::from_jsonl(text).unwrap_err().to_string();
            assert!(
                err.to_lowercase().contains(needle),
                "expected `{needle}` in error for {text:?}, got: {err}"
            );
        }
    }

    #[test]
    fn alphabet_collects_distinct_labels() {
        let m = two_state_loop(1.0, 1.0);
        let d = simulate_dataset(&m, vec!["x".into()], 2, 9, ObservationKind::Untimed, 1).unwrap();
        let alpha = d.alphabet();
        assert_eq!(alpha.len(), 2);
    }
}
