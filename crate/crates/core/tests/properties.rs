use proptest::prelude::*;
use wcsgd_core::metrics::sample_indices;
use wcsgd_core::moreau::prox_point;
use wcsgd_core::optim::clip;
use wcsgd_core::problems::{problem_preset, DEFAULT_PROBLEM_SEED};
use wcsgd_core::rate::fit_rate;
use wcsgd_core::stats::order_quantile;
use wcsgd_core::theory::theory_bound;
use wcsgd_core::vecops::{dist, norm};
use wcsgd_core::{BoundKind, FeasibleSet, MoreauConfig, TheoryConstants};

fn vec_in(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

proptest! {
    #[test]
    fn quantile_matches_sorted_rank(values in prop::collection::vec(-1e6f64..1e6, 1..200), q in 0.0f64..=1.0) {
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let rank = ((q * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
        prop_assert_eq!(order_quantile(&values, q), sorted[rank - 1]);
    }

    #[test]
    fn rate_fit_recovers_power_law(a in -2.0f64..1.0, c in 1e-3f64..1e3) {
        let pts: Vec<(f64, f64)> = [1e2, 1e3, 1e4, 1e5].iter().map(|&t| (t, c * f64::powf(t, a))).collect();
        prop_assert!((fit_rate(&pts).unwrap() - a).abs() < 1e-9);
    }

    #[test]
    fn clip_respects_level_and_direction(g in vec_in(6, 100.0), lam in 0.0f64..50.0) {
        let out = clip(&g, lam);
        let n = norm(&g);
        prop_assert!(norm(&out) <= lam.max(0.0) * (1.0 + 1e-12) || out == g);
        if n <= lam {
            prop_assert_eq!(&out, &g);
        } else if lam > 0.0 {
            let cos: f64 = out.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / (norm(&out) * n);
            prop_assert!((cos - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn ball_projection_is_feasible_idempotent_nonexpansive(y in vec_in(5, 30.0), z in vec_in(5, 30.0), r in 0.1f64..10.0) {
        let set = FeasibleSet::ball(vec![0.5; 5], r).unwrap();
        let py = set.project(&y).unwrap();
        let pz = set.project(&z).unwrap();
        prop_assert!(set.contains(&py, 1e-12));
        prop_assert!(dist(&set.project(&py).unwrap(), &py) <= 1e-12 * (1.0 + norm(&py)));
        prop_assert!(dist(&py, &pz) <= dist(&y, &z) * (1.0 + 1e-12) + 1e-12);
    }

    #[test]
    fn sampled_indices_cover_both_ends(t in 1usize..200_000, points in 2usize..400) {
        let idx = sample_indices(t, points);
        prop_assert_eq!(idx[0], 1);
        prop_assert_eq!(*idx.last().unwrap(), t);
        prop_assert!(idx.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn fixed_horizon_bounds_decrease_in_t(
        sigma in 0.0f64..5.0,
        lam in 0.1f64..5.0,
        g in 0.1f64..5.0,
        p in 1.1f64..=2.0,
        eta0 in 0.1f64..5.0,
        delta1 in 0.0f64..10.0,
        t in 1.0f64..1e6,
    ) {
        let c = |t: f64| TheoryConstants {
            theta: Some(0.5),
            sigma: Some(sigma),
            g: Some(g),
            rho: Some(0.1),
            delta: Some(0.05),
            t: Some(t),
            p: Some(p),
            lam: Some(lam),
            eta0: Some(eta0),
            batch: Some(1.0),
            delta1: Some(delta1),
            ..Default::default()
        };
        for kind in [BoundKind::Cor2, BoundKind::Thm3, BoundKind::Thm5] {
            let a = theory_bound(&c(t), kind).unwrap();
            let b = theory_bound(&c(2.0 * t), kind).unwrap();
            prop_assert!(b <= a, "{:?}: {} then {}", kind, a, b);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn prox_never_increases_objective(x in vec_in(10, 6.0), factor in 1.5f64..4.0) {
        let problem = problem_preset("abs_reg_d10", DEFAULT_PROBLEM_SEED).unwrap();
        let cfg = MoreauConfig::scaled(&problem, factor);
        let r = prox_point(&problem, &cfg, &x).unwrap();
        prop_assert!(problem.value(&r.x_hat) <= problem.value(&x) + r.value_gap + 1e-9);
        prop_assert!(problem.set.contains(&r.x_hat, 1e-9));
    }
}
