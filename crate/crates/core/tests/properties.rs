use proptest::prelude::*;

use privsit::curves::{check_convexity, privacy_grid, sweep_privacy_distortion};
use privsit::equilibrium::{
    distortion_gain_form, distortion_residual_form, solve_alpha_quadratic, solve_setting1, solve_setting2,
    solve_setting3, transmit_power,
};
use privsit::model::LinearObservation;
use privsit::oracle::covariance_mmse;
use privsit::{ChannelSpec, Scenario, SourceModel};

fn models() -> impl Strategy<Value = SourceModel> {
    (0.1f64..10.0, 0.1f64..3.0, 0.02f64..0.98)
        .prop_map(|(s, r, frac)| SourceModel::new(s, frac * r.sqrt(), r).unwrap())
}

/// A model and a privacy target in its range, endpoints included.
fn model_and_target() -> impl Strategy<Value = (SourceModel, f64)> {
    (models(), 0.0f64..=1.0).prop_map(|(m, u)| {
        let b = m.privacy_bounds();
        (m, b.dp_min + u * (b.dp_max - b.dp_min))
    })
}

fn channels() -> impl Strategy<Value = ChannelSpec> {
    (0.05f64..20.0, 0.0f64..5.0).prop_map(|(p, z)| ChannelSpec::new(p, z).unwrap())
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

proptest! {
    #[test]
    fn noiseless_solution_is_on_target_and_in_range((m, t) in model_and_target()) {
        let s = solve_setting1(&m, t).unwrap();
        prop_assert_eq!(s.policy.noise_var, 0.0);
        prop_assert!(s.policy.alpha >= m.orthogonalizing_alpha() && s.policy.alpha <= 0.0);
        if s.constraint_active {
            prop_assert!(close(s.d_p, t, 1e-9), "{} vs {}", s.d_p, t);
        }
    }

    #[test]
    fn chosen_root_has_lower_distortion((m, t) in model_and_target()) {
        let s = solve_setting1(&m, t).unwrap();
        prop_assume!(s.constraint_active);
        let (a, b) = solve_alpha_quadratic(&m, t / m.sigma_x2(), 0.0).unwrap();
        let dc = |x: f64| m.mmse(&LinearObservation::noiseless(x)).d_c;
        prop_assert!(s.d_c <= dc(a).min(dc(b)) + 1e-12 * m.sigma_x2());
    }

    #[test]
    fn compression_solution_is_on_target((m, t) in model_and_target(), n in 1e-3f64..10.0) {
        let sigma_n2 = n * m.sigma_x2();
        let s = solve_setting2(&m, t, sigma_n2).unwrap();
        prop_assert!(s.policy.alpha >= m.orthogonalizing_alpha() && s.policy.alpha <= 0.0);
        if s.constraint_active {
            prop_assert!(close(s.d_p, t, 1e-9));
        } else {
            prop_assert_eq!(s.policy.alpha, 0.0);
            prop_assert!(s.d_p >= t);
        }
    }

    #[test]
    fn distortion_forms_agree(m in models(), u in 0.0f64..1.0, n in 1e-3f64..100.0) {
        let alpha = (2.0 * m.orthogonalizing_alpha() - 0.5) + u * (1.0 - 2.0 * m.orthogonalizing_alpha());
        let n = n * m.sigma_x2();
        prop_assert!(close(distortion_gain_form(&m, alpha, n), distortion_residual_form(&m, alpha, n), 1e-10));
    }

    #[test]
    fn channel_solution_spends_the_budget((m, t) in model_and_target(), ch in channels()) {
        prop_assume!(t >= Scenario::Channel(ch).privacy_floor(&m));
        let s = solve_setting3(&m, t, &ch).unwrap();
        prop_assert_eq!(s.policy.noise_var, 0.0);
        prop_assert!(close(transmit_power(&m, &s.policy), ch.p_t(), 1e-10));
        if s.constraint_active {
            prop_assert!(close(s.d_p, t, 1e-9));
        }
    }

    #[test]
    fn channel_never_beats_noiseless((m, t) in model_and_target(), ch in channels()) {
        prop_assume!(t >= Scenario::Channel(ch).privacy_floor(&m));
        let noisy = solve_setting3(&m, t, &ch).unwrap();
        let clean = solve_setting1(&m, t).unwrap();
        prop_assert!(noisy.d_c >= clean.d_c - 1e-12 * m.sigma_x2());
    }

    #[test]
    fn covariance_algebra_matches_formulas(
        m in models(),
        alpha in -3.0f64..1.0,
        beta in 0.1f64..3.0,
        enc in 0.0f64..4.0,
        chan in 0.0f64..4.0,
    ) {
        let obs = LinearObservation { alpha, beta, encoder_noise: enc * m.sigma_x2(), channel_noise: chan };
        let a = m.mmse(&obs);
        let b = covariance_mmse(&m, &obs);
        let tol = 1e-12 * m.sigma_x2() * m.r().max(1.0);
        prop_assert!((a.d_c - b.d_c).abs() <= tol && (a.d_p - b.d_p).abs() <= tol, "{:?} {:?}", a, b);
    }

    #[test]
    fn max_privacy_output_is_orthogonal_to_theta(m in models()) {
        let s = solve_setting1(&m, m.privacy_bounds().dp_max).unwrap();
        let obs = LinearObservation::noiseless(s.policy.alpha);
        prop_assert!(m.cov_theta_y(&obs).abs() <= 1e-12 * m.sigma_x2() * m.r());
        prop_assert!(close(s.d_c, m.sigma_x2() * m.rho() * m.rho() / m.r(), 1e-12));
    }

    #[test]
    fn compression_distortion_falls_with_the_target(m in models(), n in 1e-2f64..5.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
        let b = m.privacy_bounds();
        let (lo, hi) = if u < v { (u, v) } else { (v, u) };
        let at = |w: f64| solve_setting2(&m, b.dp_min + w * (b.dp_max - b.dp_min), n * m.sigma_x2()).unwrap().d_c;
        prop_assert!(at(lo) <= at(hi) + 1e-12 * m.sigma_x2());
    }

    #[test]
    fn curves_are_increasing_convex_and_span_the_range(m in models(), ch in channels()) {
        for sc in [Scenario::Simple, Scenario::Channel(ch)] {
            let curve = sweep_privacy_distortion(&m, &sc, 64).unwrap();
            let report = check_convexity(&curve).unwrap();
            prop_assert!(report.monotone && report.passed, "{:?}", report);
            let (floor, top) = (sc.privacy_floor(&m), m.privacy_bounds().dp_max);
            let targets = privacy_grid(&m, &sc, 64).unwrap();
            prop_assert_eq!((targets[0], targets[63]), (floor, top));
            // Achieved values carry rounding from the evaluation.
            let xy = curve.xy();
            prop_assert!(close(xy[0].0, floor, 1e-12) && close(xy[63].0, top, 1e-12));
        }
    }
}
