use fracdose::model::{simulate, DoseResponse};
use fracdose::{ModelParams, PopulationState};
use proptest::prelude::*;

fn dose_response() -> impl Strategy<Value = DoseResponse> {
    prop_oneof![
        Just(DoseResponse::Linear),
        (0.2f64..5.0).prop_map(|exponent| DoseResponse::Power { exponent }),
        (0.5f64..4.0, 0.05f64..0.95).prop_map(|(coefficient, half_effect)| DoseResponse::Hill {
            coefficient,
            half_effect
        }),
    ]
}

fn params() -> impl Strategy<Value = ModelParams> {
    (
        (0.01f64..0.3, -0.3f64..-0.01, 0.01f64..0.3, -0.3f64..-0.01),
        (0.01f64..1.0, 0.01f64..1.0, 0.3f64..=1.0),
        dose_response(),
    )
        .prop_map(|((ksmax, ksmin, krmax, krmin), (a, d, mu), g)| ModelParams {
            kappa_s_max: ksmax,
            kappa_s_min: ksmin,
            kappa_r_max: krmax,
            kappa_r_min: krmin,
            alpha_max: a,
            delta_max: d,
            mu,
            dose_response: g,
        })
}

/// Central differences of the simulated fraction against the reduced
/// fraction dynamics, at points where the dose is the same on both sides.
fn riccati_mismatch(p: &ModelParams, schedule: &[f64]) -> f64 {
    let h = 0.01;
    let traj = simulate(p, PopulationState::new(1000.0, 0.0), h, schedule).unwrap();
    let phi = traj.fractions();
    let mut worst: f64 = 0.0;
    for k in 1..schedule.len() {
        if schedule[k - 1] != schedule[k] {
            continue;
        }
        let numeric = (phi[k + 1] - phi[k - 1]) / (2.0 * h);
        let exact = p.riccati_rhs(phi[k], schedule[k]).unwrap();
        let err = (numeric - exact).abs() / exact.abs().max(1e-2);
        worst = worst.max(err);
    }
    worst
}

#[test]
fn fraction_dynamics_match_finite_differences() {
    let p = ModelParams::default();
    let constant = vec![1.0; 1_000];
    assert!(riccati_mismatch(&p, &constant) <= 1e-3);
    let blocks: Vec<f64> = (0..3_000).map(|k| if (k / 40) % 2 == 0 { 1.0 } else { 0.0 }).collect();
    assert!(riccati_mismatch(&p, &blocks) <= 1e-3);
    let half = vec![0.5; 1_000];
    assert!(riccati_mismatch(&p, &half) <= 1e-3);
}

proptest! {
    #[test]
    fn rates_are_monotone_in_dose(p in params(), a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r0 = p.effective_rates(lo).unwrap();
        let r1 = p.effective_rates(hi).unwrap();
        prop_assert!(r1.kappa_s <= r0.kappa_s);
        prop_assert!(r1.kappa_r >= r0.kappa_r);
        prop_assert!(r1.alpha >= r0.alpha);
        prop_assert!(r1.delta <= r0.delta);
    }

    #[test]
    fn transition_matrix_columns_sum_to_growth(p in params(), u in 0.0f64..=1.0) {
        let a = p.transition_matrix(u).unwrap();
        let r = p.effective_rates(u).unwrap();
        prop_assert!((a[0][0] + a[1][0] - r.kappa_s).abs() <= 1e-15);
        prop_assert!((a[0][1] + a[1][1] - r.kappa_r).abs() <= 1e-15);
        prop_assert!(a[0][1] >= 0.0 && a[1][0] >= 0.0);
    }

    #[test]
    fn populations_stay_nonnegative(p in params(), seed in prop::collection::vec(any::<bool>(), 20)) {
        let p = p.with_mu(1.0);
        let schedule: Vec<f64> = seed
            .iter()
            .flat_map(|&treat| std::iter::repeat_n(if treat { 1.0 } else { 0.0 }, 50))
            .collect();
        let traj = simulate(&p, PopulationState::new(1000.0, 0.0), 0.01, &schedule).unwrap();
        for pt in &traj.points {
            prop_assert!(pt.state.susceptible >= -1e-9 * 1000.0);
            prop_assert!(pt.state.resistant >= -1e-9 * 1000.0);
        }
    }

    #[test]
    fn riccati_endpoints(p in params(), u in 0.0f64..=1.0) {
        let r = p.effective_rates(u).unwrap();
        prop_assert!((p.riccati_rhs(0.0, u).unwrap() - r.alpha).abs() <= 1e-15);
        prop_assert!((p.riccati_rhs(1.0, u).unwrap() + r.delta).abs() <= 1e-15);
        prop_assert_eq!(p.instantaneous_growth(0.0, u).unwrap(), r.kappa_s);
        prop_assert_eq!(p.instantaneous_growth(1.0, u).unwrap(), r.kappa_r);
    }

    #[test]
    fn params_round_trip_through_json(p in params()) {
        let json = serde_json::to_string(&p).unwrap();
        prop_assert_eq!(serde_json::from_str::<ModelParams>(&json).unwrap(), p);
    }
}
