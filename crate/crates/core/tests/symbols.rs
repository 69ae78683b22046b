mod common;

use paralab::filterbank::{build_filter_bank, BumpProfile};
use paralab::norms::ExponentProfile;
use paralab::operators::SymbolGrid;
use paralab::symbols::*;
use paralab::{Error, GridSpec, C64};
use proptest::prelude::*;

fn profile(ps: &[f64]) -> ExponentProfile {
    ExponentProfile::new(ps.to_vec()).unwrap()
}

#[test]
fn constant_symbol_has_its_modulus_as_constant() {
    let spec = GridSpec::unit_1d(32).unwrap();
    let sigma = SymbolGrid::constant(2, spec, C64::new(0.0, 2.5)).unwrap();
    for class in [SymbolClass::Hormander, SymbolClass::Marcinkiewicz] {
        let report = check_symbol_class(&sigma, class, 2).unwrap();
        assert!((report.best_constant - 2.5).abs() < 1e-12, "{class:?}: {}", report.best_constant);
        assert!(report.points_tested > 0);
    }
}

#[test]
fn rough_symbol_reports_violations() {
    let spec = GridSpec::unit_1d(32).unwrap();
    let sigma = SymbolGrid::from_fn(2, spec, vec![1.0, 1.0], None, |x| {
        C64::new((1.3 * x[0][0] + 0.7 * x[1][0]).cos(), 0.0)
    })
    .unwrap();
    let report = check_symbol_class(&sigma, SymbolClass::Hormander, 1).unwrap();
    assert!(report.best_constant > 1.0);
    assert!(report.violation_count > 0);
    assert!(!report.violations.is_empty());
    assert!(report.violations.windows(2).all(|w| w[0].ratio >= w[1].ratio));
}

#[test]
fn high_derivative_orders_are_refused() {
    let spec = GridSpec::unit_1d(32).unwrap();
    let sigma = SymbolGrid::constant(2, spec, C64::new(1.0, 0.0)).unwrap();
    assert!(matches!(check_symbol_class(&sigma, SymbolClass::Hormander, MAX_STABLE_ORDER + 1), Err(Error::Stability(_))));
}

#[test]
fn gamma_sums_reciprocals_over_comparable_slots() {
    let p = profile(&[2.0, 4.0, f64::INFINITY]);
    let lambda = [1.0, -0.5, 0.1];
    assert!((gamma_exponent(&lambda, &p, 2.0).unwrap() - 0.75).abs() < 1e-15);
    assert!((gamma_exponent(&lambda, &p, 1.0).unwrap() - 0.5).abs() < 1e-15);
    assert!((gamma_exponent(&lambda, &p, 10.0).unwrap() - 0.75).abs() < 1e-15);
    assert!(matches!(gamma_exponent(&lambda, &p, 0.5), Err(Error::Argument(_))));
    assert!(matches!(gamma_exponent(&[1.0, 0.0, 1.0], &p, 2.0), Err(Error::Validation(_))));
    assert!(matches!(gamma_exponent(&[1.0], &p, 2.0), Err(Error::Structural(_))));
}

#[test]
fn uniformity_classes() {
    let finite = classify_uniformity(&[1.0, 0.01], &profile(&[2.0, 2.0]), 2.0).unwrap();
    assert_eq!(finite.class, Uniformity::UniformA);
    assert_eq!(finite.ratio, None);

    let b = classify_uniformity(&[0.01, 1.0], &profile(&[f64::INFINITY, 2.0]), 2.0).unwrap();
    assert_eq!(b.class, Uniformity::UniformB);
    assert!((b.gamma - 0.5).abs() < 1e-15);

    let bad = classify_uniformity(&[1.0, 0.01], &profile(&[f64::INFINITY, 2.0]), 2.0).unwrap();
    assert_eq!(bad.class, Uniformity::Nonuniform);
    assert!((bad.ratio.unwrap() - 100.0).abs() < 1e-12);

    let open = classify_uniformity(&[1.0, 1.0], &profile(&[f64::INFINITY, 4.0]), 2.0).unwrap();
    assert_eq!(open.class, Uniformity::Unknown);
    assert_eq!(Uniformity::Unknown.label(), "unknown");
}

#[test]
fn decomposition_reproduces_the_model_symbol() {
    let (rel, cone) = common::decomposition_errors();
    assert!(rel <= 1e-3, "reconstruction error {rel}");
    assert!(cone <= 1e-12, "cone partition {cone}");
}

#[test]
fn decomposition_needs_a_wide_plateau() {
    let spec = GridSpec::unit_1d(64).unwrap();
    let b = build_filter_bank(&BumpProfile::annulus(0.5, 2.0, 2), &BumpProfile::ball(1.0, 2.0, 2), 2, spec, (-4, 0))
        .unwrap();
    let sigma = SymbolGrid::constant(2, spec, C64::new(1.0, 0.0)).unwrap();
    let r = decompose_multiplier(&sigma, &[1.0, 1.0], &b, default_weight_order(1, 2), DEFAULT_U_BUDGET);
    assert!(matches!(r, Err(Error::Construction(_))));
    let r = decompose_multiplier(&sigma, &[1.0], &b, 1, DEFAULT_U_BUDGET);
    assert!(matches!(r, Err(Error::Structural(_))));
}

#[test]
fn cone_cutoffs_vanish_at_the_origin() {
    assert_eq!(cone_cutoffs(&[1.0, 2.0], &[[0.0, 0.0], [0.0, 0.0]], 2), vec![0.0, 0.0]);
}

proptest! {
    #[test]
    fn cone_cutoffs_partition_unity(
        lam in prop::collection::vec(0.01f64..4.0, 1..5),
        xs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 5),
        d in 1usize..=2,
    ) {
        let n = lam.len();
        let xis: Vec<[f64; 2]> = xs[..n].iter().map(|&(a, b)| [a, if d == 2 { b } else { 0.0 }]).collect();
        prop_assume!(xis.iter().any(|x| x[0] != 0.0 || x[1] != 0.0));
        let z = cone_cutoffs(&lam, &xis, d);
        prop_assert!((z.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let total: f64 = xis.iter().zip(&lam).map(|(x, l)| l * x[..d].iter().map(|v| v * v).sum::<f64>().sqrt()).sum();
        for (l, (x, zl)) in xis.iter().zip(&z).enumerate() {
            prop_assert!(*zl >= 0.0);
            let a = lam[l] * x[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
            if 2.0 * n as f64 * a < total {
                prop_assert_eq!(*zl, 0.0);
            }
        }
    }

    #[test]
    fn gamma_is_monotone_in_the_factor(l in prop::collection::vec(0.01f64..10.0, 3), f1 in 1.0f64..8.0, df in 0.0f64..8.0) {
        let p = profile(&[1.5, 3.0, f64::INFINITY]);
        prop_assert!(gamma_exponent(&l, &p, f1 + df).unwrap() >= gamma_exponent(&l, &p, f1).unwrap());
    }
}
