//! Property tests over randomized models, times, and synthetic series.

use ndarray::Array2;
use proptest::prelude::*;

use qsd_core::asymptotics::{estimate_kappa, rank1_factor_test, LogGSeries, SeriesTarget};
use qsd_core::kernel::{transition_matrix, KernelMethod};
use qsd_core::model::ModelSpec;
use qsd_core::numeric::log_spaced;
use qsd_core::{build_generator, validate_generator};

fn rate() -> impl Strategy<Value = f64> {
    0.05f64..10.0
}

/// Any model of the zoo with admissible parameters.
fn model() -> impl Strategy<Value = ModelSpec> {
    prop_oneof![
        (rate(), rate()).prop_map(|(p, q)| ModelSpec::killed_mm1(p, q).unwrap()),
        rate().prop_map(|rho| ModelSpec::critical_linear_bd(rho).unwrap()),
        (rate(), rate()).prop_map(|(p, q)| ModelSpec::random_walk_z(p, q).unwrap()),
        (proptest::collection::vec(rate(), 12), proptest::collection::vec(rate(), 12)).prop_map(
            |(birth, death)| ModelSpec::killed_birth_death(birth, death).unwrap()
        ),
        (proptest::collection::vec(rate(), 9), proptest::collection::vec(rate(), 10)).prop_map(
            |(birth, death)| ModelSpec::custom_tridiagonal(birth, death).unwrap()
        ),
    ]
}

proptest! {
    #[test]
    fn built_generators_satisfy_invariants(spec in model(), n in 2usize..40) {
        let g = build_generator(&spec, n).unwrap();
        let d = validate_generator(&g);
        prop_assert!(d.all_ok(), "{:?}", d.messages);
        // every off-diagonal entry is non-negative and every row balances to
        // at most zero
        for k in 0..g.dim() {
            prop_assert!(g.row_balance(k) <= 1e-12 * g.max_rate());
        }
        prop_assert!(d.boundary_leak >= 0.0);
    }

    #[test]
    fn truncations_are_nested(spec in model(), n in 3usize..30, extra in 1usize..20) {
        let small = build_generator(&spec, n).unwrap();
        let large = build_generator(&spec, n + extra).unwrap();
        let shared = small.dim().min(large.dim()).saturating_sub(1);
        prop_assert_eq!(&small.diag[..shared], &large.diag[..shared]);
        prop_assert_eq!(&small.absorb[..shared], &large.absorb[..shared]);
        if shared > 0 {
            prop_assert_eq!(&small.sub[..shared - 1], &large.sub[..shared - 1]);
            prop_assert_eq!(&small.sup[..shared - 1], &large.sup[..shared - 1]);
        }
    }

    #[test]
    fn model_json_round_trips(spec in model()) {
        let text = serde_json::to_string(&spec).unwrap();
        let back: ModelSpec = serde_json::from_str(&text).unwrap();
        prop_assert_eq!(spec, back);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chapman_kolmogorov_composition(
        spec in model(),
        n in 4usize..24,
        s in 0.05f64..2.0,
        t in 0.05f64..2.0,
    ) {
        let g = build_generator(&spec, n).unwrap();
        let tol = 1e-12;
        let ps = transition_matrix(&g, s, KernelMethod::Uniformization, tol).unwrap();
        let pt = transition_matrix(&g, t, KernelMethod::Uniformization, tol).unwrap();
        let pst = transition_matrix(&g, s + t, KernelMethod::Uniformization, tol).unwrap();
        let composed = ps.trans.dot(&pt.trans);
        let defect = (&composed - &pst.trans)
            .iter()
            .fold(0.0f64, |a, v| a.max(v.abs()));
        prop_assert!(defect <= 1e-8, "defect {defect:.2e}");
    }

    #[test]
    fn survival_is_monotone_under_uniformization(
        p in 0.1f64..4.0,
        q in 0.1f64..4.0,
        n in 5usize..40,
    ) {
        let spec = ModelSpec::killed_mm1(p, q).unwrap();
        let g = build_generator(&spec, n).unwrap();
        let mut prev = 1.0 + 1e-14;
        for k in 0..12 {
            let t = 0.3 * k as f64;
            let kern = transition_matrix(&g, t, KernelMethod::Uniformization, 1e-12).unwrap();
            let surv: f64 = kern.trans.row(0).sum();
            prop_assert!(surv <= prev + 1e-10, "survival increased at t = {t}");
            prev = surv;
        }
    }
}

proptest! {
    #[test]
    fn exact_power_laws_are_recovered(
        kappa in 0.2f64..3.5,
        log_c in -2.0f64..2.0,
        t0 in 1.0f64..50.0,
        span in 2.0f64..50.0,
    ) {
        let t_grid = log_spaced(t0, t0 * span, 16);
        let log_g: Vec<f64> = t_grid.iter().map(|t| log_c - kappa * t.ln()).collect();
        let series = LogGSeries::from_oracle(
            SeriesTarget::Entry { i: 1, j: 1 },
            0.0,
            t_grid.clone(),
            log_g,
        )
        .unwrap();
        let est = estimate_kappa(&series, (t0, t0 * span)).unwrap();
        prop_assert!((est.kappa - kappa).abs() < 1e-9, "kappa {} vs {}", est.kappa, kappa);
        prop_assert!((est.constant.ln() - log_c).abs() < 1e-9);
        prop_assert!(!est.trend_flag);
    }

    #[test]
    fn outer_products_are_exactly_rank_one(
        x in proptest::collection::vec(0.05f64..20.0, 2..6),
        m in proptest::collection::vec(0.05f64..20.0, 2..6),
        a in 0.1f64..10.0,
    ) {
        let (nr, nc) = (x.len(), m.len());
        let mut l = Array2::zeros((nr, nc));
        for r in 0..nr {
            for c in 0..nc {
                l[[r, c]] = a * x[r] * m[c];
            }
        }
        let rows: Vec<i64> = (1..=nr as i64).collect();
        let cols: Vec<i64> = (1..=nc as i64).collect();
        let rep = rank1_factor_test(&l, &rows, &cols, &x, &m, None).unwrap();
        prop_assert!(rep.max_cross_ratio_dev < 1e-11);
        prop_assert!((rep.a_fit / a - 1.0).abs() < 1e-11);
        prop_assert!(rep.a_spread < 1e-11);
    }
}
