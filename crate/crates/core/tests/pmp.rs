mod common;

use common::{apply, expm};
use fracdose::model::{simulate, DoseResponse};
use fracdose::pmp::{
    bang_bang_oracle, evaluate_switching, hamiltonian, switching_coefficient, ImpliedAction, OracleSpec,
};
use fracdose::{episode_cost, ModelParams, PopulationState};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn hamiltonian_splits_into_drift_and_switching_term() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let responses = [
        DoseResponse::Linear,
        DoseResponse::Power { exponent: 2.5 },
        DoseResponse::Hill {
            coefficient: 2.0,
            half_effect: 0.3,
        },
    ];
    for i in 0..100 {
        let p = ModelParams {
            dose_response: responses[i % 3],
            ..ModelParams::default()
        };
        let phi = rng.gen_range(0.0..=1.0);
        let u = rng.gen_range(0.0..=1.0);
        let lambda = rng.gen_range(-5.0..5.0);
        let lhs = hamiltonian(&p, phi, u, lambda).unwrap();
        let rhs = hamiltonian(&p, phi, 0.0, lambda).unwrap()
            + p.dose_response.eval(u) * switching_coefficient(&p, phi, lambda).unwrap();
        assert!((lhs - rhs).abs() <= 1e-12, "phi {phi}, u {u}, lambda {lambda}");
        let diff = hamiltonian(&p, phi, 1.0, lambda).unwrap() - hamiltonian(&p, phi, 0.0, lambda).unwrap();
        assert!((diff - switching_coefficient(&p, phi, lambda).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn implied_action_matches_sign_of_coefficient() {
    let p = ModelParams::default();
    for &(phi, lambda) in &[(0.2, 1.0), (0.2, -1.0), (0.9, 0.5), (0.5, 0.0)] {
        let e = evaluate_switching(&p, phi, lambda).unwrap();
        let expected = if e.coefficient == 0.0 {
            ImpliedAction::Indeterminate
        } else if e.coefficient < 0.0 {
            ImpliedAction::Treat
        } else {
            ImpliedAction::Pause
        };
        assert_eq!(e.action, expected);
    }
}

/// `log N(T)/N(0)` of a piecewise-constant schedule in the memoryless system,
/// from matrix exponentials.
fn exact_cost(p: &ModelParams, schedule: &[f64], interval: f64) -> f64 {
    let mut x = [1000.0, 0.0];
    for &u in schedule {
        x = apply(&expm(&p.transition_matrix(u).unwrap(), interval), &x);
    }
    ((x[0] + x[1]) / 1000.0).ln()
}

#[test]
fn oracle_table_agrees_with_matrix_exponentials() {
    let p = ModelParams::default();
    let spec = OracleSpec::new(4, vec![0.0, 0.5, 1.0], 4.0);
    let result = bang_bang_oracle(&p, &spec).unwrap();
    assert_eq!(result.table.len(), 81);
    // Second-order scheme at h = 0.01 over 4 h: errors of order 1e-6.
    let mut exact_best = (f64::INFINITY, vec![]);
    for entry in &result.table {
        let exact = exact_cost(&p, &entry.schedule, 1.0);
        if exact < exact_best.0 {
            exact_best = (exact, entry.schedule.clone());
        }
        assert!((entry.cost - exact).abs() <= 1e-5, "{:?}: {} vs {exact}", entry.schedule, entry.cost);
    }
    // Lexicographic order of the table.
    assert_eq!(result.table[0].schedule, vec![0.0; 4]);
    assert_eq!(result.table[1].schedule, vec![0.0, 0.0, 0.0, 0.5]);
    assert_eq!(result.table[80].schedule, vec![1.0; 4]);
    let min = result.table.iter().map(|e| e.cost).fold(f64::INFINITY, f64::min);
    assert_eq!(result.best.cost, min);
    assert_eq!(result.best.schedule, exact_best.1);
}

#[test]
fn single_interval_oracle_is_the_cheaper_extreme() {
    for mu in [1.0, 0.7] {
        let p = ModelParams::default().with_mu(mu);
        let spec = OracleSpec::new(1, vec![0.0, 1.0], 1.0);
        let result = bang_bang_oracle(&p, &spec).unwrap();
        let cost = |u: f64| {
            episode_cost(&simulate(&p, PopulationState::new(1000.0, 0.0), 0.01, &[u; 100]).unwrap())
        };
        let (c0, c1) = (cost(0.0), cost(1.0));
        assert_eq!(result.best.schedule, vec![if c1 < c0 { 1.0 } else { 0.0 }]);
        assert_eq!(result.best.cost, c0.min(c1));
    }
}

#[test]
fn restricted_best_is_a_binary_schedule() {
    let p = ModelParams::default();
    let result = bang_bang_oracle(&p, &OracleSpec::new(3, vec![0.0, 0.5, 1.0], 3.0)).unwrap();
    let binary = result.best_restricted(&[0.0, 1.0]).unwrap();
    assert!(binary.schedule.iter().all(|&u| u == 0.0 || u == 1.0));
    assert!(result.interior_advantage().unwrap() >= 0.0);
}
