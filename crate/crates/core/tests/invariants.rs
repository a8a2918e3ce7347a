use proptest::prelude::*;
use twistlab::config::RunConfig;
use twistlab::experiments::fit_power_law;
use twistlab::longitudinal::{GroundStates, Kernel1d, Line};
use twistlab::montecarlo::{survival_probability, HalfSpace, McSetup};
use twistlab::nash::{big_gamma, gamma};
use twistlab::report::fmt_sig;
use twistlab::TwistProfile;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn twelve_digits_parse_back(m in -1.0f64..1.0, e in -30i32..30) {
        let x = m * 10f64.powi(e);
        let y: f64 = fmt_sig(x).parse().unwrap();
        prop_assert!((x - y).abs() <= 5e-12 * x.abs(), "{x} -> {}", fmt_sig(x));
    }

    #[test]
    fn twist_vanishes_outside_support(beta in -5.0f64..5.0, r in 0.2f64..4.0, s in 1.0f64..10.0) {
        let p = TwistProfile::new(beta, r).unwrap();
        prop_assert_eq!(p.theta_dot(s * r), 0.0);
        prop_assert_eq!(p.theta_dot(-s * r), 0.0);
        prop_assert_eq!(p.theta(-s * r), 0.0);
        prop_assert!((p.theta(s * r) - p.theta(r)).abs() < 1e-12);
    }

    #[test]
    fn power_law_fit_is_exact(c in 0.01f64..100.0, a in -3.0f64..1.0, t0 in 0.5f64..4.0) {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| {
            let t = t0 * 1.5f64.powi(i);
            (t, c * t.powf(a))
        }).collect();
        let f = fit_power_law(&pts, (0.0, f64::INFINITY)).unwrap();
        prop_assert!((f.slope - a).abs() < 1e-10);
        prop_assert!((f.intercept.exp() - c).abs() < 1e-8 * c);
    }

    #[test]
    fn envelope_functions_are_continuous_and_decreasing(t in 0.01f64..100.0, dt in 1e-6f64..1.0) {
        prop_assert!(gamma(t + dt) < gamma(t));
        prop_assert!(big_gamma(t + dt) < big_gamma(t));
        prop_assert!(gamma(t) <= big_gamma(t));
        prop_assert!((gamma(1.0 + 1e-12) - gamma(1.0)).abs() < 1e-9);
        prop_assert!((big_gamma(1.0 + 1e-12) - big_gamma(1.0)).abs() < 1e-9);
    }

    #[test]
    fn config_round_trips(seed in any::<u64>(), beta in -4.0f64..4.0, h in 0.01f64..0.1, trials in 1usize..500) {
        let mut cfg = RunConfig::default();
        cfg.seed = seed;
        cfg.geometry.beta = beta;
        cfg.geometry.h = h;
        cfg.nash.trials = trials;
        let text = serde_json::to_string(&cfg).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(back, cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn one_dimensional_kernel_is_symmetric_and_monotone(beta in 0.0f64..4.0, r in -3.0f64..3.0, s in -3.0f64..3.0, t in 0.2f64..20.0) {
        let profile = TwistProfile::new(beta, 1.0).unwrap();
        let k = Kernel1d::new(&profile, Line::new(8.0, 0.125).unwrap());
        let (a, b) = (k.q(t, r, s).value, k.q(t, s, r).value);
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(1e-300));
        let d0 = k.q(t, r, r).value;
        let d1 = k.q(1.5 * t, r, r).value;
        prop_assert!(d0 >= 0.0 && d1 <= d0 * (1.0 + 1e-12));
    }

    #[test]
    fn ground_states_are_normalised_and_positive(beta in 0.3f64..4.0, x in -30.0f64..30.0) {
        let profile = TwistProfile::new(beta, 1.0).unwrap();
        let gs = GroundStates::new(&profile, 1e-3).unwrap();
        prop_assert!((gs.g1(0.0) - 1.0).abs() < 1e-9 && (gs.g2(0.0) - 1.0).abs() < 1e-9);
        prop_assert!(gs.g1(x) > 0.0 && gs.g2(x) > 0.0);
        prop_assert!((gs.g0(x) - 0.5 * (gs.g1(x) + gs.g2(x))).abs() < 1e-12 * gs.g0(x));
    }

    #[test]
    fn survival_estimate_is_a_probability(d in 0.6f64..2.0, t in 0.1f64..2.0, seed in any::<u64>()) {
        let m = 400;
        let est = survival_probability(&HalfSpace { d }, [0.0; 3], t, &McSetup::bisection(m, 1.0 / 64.0, false), seed).unwrap();
        prop_assert!((0.0..=1.0).contains(&est.p_hat));
        let se = (est.p_hat * (1.0 - est.p_hat) / m as f64).sqrt();
        prop_assert!((est.std_err - se).abs() < 1e-12);
    }
}
