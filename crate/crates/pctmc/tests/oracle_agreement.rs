//! The scaled forward sweep must reproduce the likelihood obtained by
//! exhaustively enumerating all label-compatible state paths.

use pctmc::estimation::forward_backward;
use pctmc::testing::{brute_force_loglik, random_dataset, random_model};
use pctmc::{Label, ObservationKind};

fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    if a == b {
        return true;
    }
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}

#[test]
fn forward_matches_path_enumeration() {
    for seed in 0..40 {
        let rm = random_model(seed);
        let c = rm.model.instantiate(&rm.truth).unwrap();
        let timed = random_dataset(&rm, 3, 4, ObservationKind::Timed, seed);
        for seq in timed.iter() {
            let tables = forward_backward(&c, seq.labels, seq.dwells).unwrap();
            let oracle = brute_force_loglik(&c, seq.labels, seq.dwells);
            assert!(
                rel_close(tables.loglik, oracle, 1e-9),
                "timed seed {seed}: swept {} vs enumerated {oracle}",
                tables.loglik
            );
            let tables = forward_backward(&c, seq.labels, None).unwrap();
            let oracle = brute_force_loglik(&c, seq.labels, None);
            assert!(
                rel_close(tables.loglik, oracle, 1e-9),
                "untimed seed {seed}: swept {} vs enumerated {oracle}",
                tables.loglik
            );
        }
    }
}

#[test]
fn both_routes_agree_on_impossible_observations() {
    for seed in 0..10 {
        let rm = random_model(seed);
        let c = rm.model.instantiate(&rm.truth).unwrap();
        // no generated label uses this value
        let labels = vec![Label(vec![77]), Label(vec![77])];
        let tables = forward_backward(&c, &labels, None).unwrap();
        assert_eq!(tables.loglik, f64::NEG_INFINITY);
        assert_eq!(brute_force_loglik(&c, &labels, None), f64::NEG_INFINITY);
    }
}

#[test]
fn forward_matches_enumeration_under_rare_dwells() {
    // long dwells shrink every path weight; scaling must not distort them
    let rm = random_model(7);
    let c = rm.model.instantiate(&rm.truth).unwrap();
    let timed = random_dataset(&rm, 1, 4, ObservationKind::Timed, 3);
    let seq = timed.sequence(0);
    let stretched: Vec<f64> = seq.dwells.unwrap().iter().map(|d| d * 40.0).collect();
    let tables = forward_backward(&c, seq.labels, Some(&stretched)).unwrap();
    let oracle = brute_force_loglik(&c, seq.labels, Some(&stretched));
    assert!(rel_close(tables.loglik, oracle, 1e-9));
}
