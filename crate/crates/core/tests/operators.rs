mod common;

use paralab::operators::*;
use paralab::runner::band_limited_sample;
use paralab::{Error, GridSpec, SampledFunction, C64};
use proptest::prelude::*;

fn inner(u: &SampledFunction, v: &SampledFunction) -> C64 {
    u.values().iter().zip(v.values()).map(|(a, b)| a * b.conj()).sum()
}

#[test]
fn model_operator_matches_its_oracles() {
    let [constants, one_slot, spatial, permutation] = common::model_operator_errors();
    assert!(constants <= 1e-12, "constants {constants}");
    assert!(one_slot <= 1e-10, "one-slot oracle {one_slot}");
    assert!(spatial <= 1e-8, "spatial path {spatial}");
    assert!(permutation <= 1e-12, "permutation {permutation}");
}

#[test]
fn shear_limit_approaches_classical_paraproduct() {
    let gaps = common::paraproduct_gaps();
    assert!(gaps.windows(2).all(|w| w[1] < w[0]), "{gaps:?}");
    assert!(gaps[2] <= 1e-3, "{gaps:?}");
}

#[test]
fn hilbert_transform_identities() {
    let (cos_sin, square) = common::hilbert_errors();
    assert!(cos_sin <= 1e-10);
    assert!(square <= 1e-10);
}

#[test]
fn hilbert_annihilates_mean_and_nyquist() {
    let spec = GridSpec::unit_1d(32).unwrap();
    let nyquist = SampledFunction::from_real_fn(spec, |x| (16.0 * x[0]).cos() + 3.0);
    assert!(hilbert_transform(&nyquist).unwrap().max_abs() < 1e-13);
}

#[test]
fn unit_symbol_multiplies_pointwise() {
    let spec = GridSpec::unit_1d(128).unwrap();
    let f = band_limited_sample(spec, 32, 3, 0);
    let g = band_limited_sample(spec, 32, 3, 1);
    let one = SymbolGrid::constant(2, spec, C64::new(1.0, 0.0)).unwrap();
    let out = apply_multiplier(&one, &[&f, &g]).unwrap();
    assert!(out.max_diff(&f.mul(&g).unwrap()) < 1e-12);
}

#[test]
fn frequency_sums_past_nyquist_are_refused() {
    let spec = GridSpec::unit_1d(32).unwrap();
    let f = SampledFunction::from_real_fn(spec, |x| (12.0 * x[0]).cos());
    let one = SymbolGrid::constant(2, spec, C64::new(1.0, 0.0)).unwrap();
    assert!(matches!(apply_multiplier(&one, &[&f, &f]), Err(Error::Aliasing(_))));
}

#[test]
fn symbol_grid_reproduces_the_operator() {
    let b = common::bank(64, 4, (-4, 1));
    let params = ModelOperatorParams::new(vec![0.5, 1.0], vec![0.5, 1.0], ScaleWeights::discrete_constant(-4, 1, 1.0)).unwrap();
    let op = ModelOperator::from_bank(params, &b).unwrap();
    let band = SymbolOperator::band_for(&b.spec, 2);
    let sym = op.symbol_grid(b.spec, Some(band)).unwrap();
    let f = band_limited_sample(b.spec, band, 4, 0);
    let g = band_limited_sample(b.spec, band, 4, 1);
    let direct = op.apply(&[&f, &g]).unwrap();
    let via_symbol = apply_multiplier(&sym, &[&f, &g]).unwrap();
    assert!(via_symbol.max_diff(&direct) < 1e-12 * (1.0 + direct.max_abs()));
}

#[test]
fn adjoint_satisfies_the_duality_identity() {
    let spec = GridSpec::unit_1d(32).unwrap();
    let sym = SymbolGrid::from_fn(2, spec, vec![1.0, 2.0], Some(8), |x| C64::new((x[0][0] - x[1][0]).cos(), x[1][0] / 10.0))
        .unwrap();
    let op = SymbolOperator::new(sym);
    let band = op.input_band();
    let f = band_limited_sample(spec, band, 5, 0);
    let g = band_limited_sample(spec, band, 5, 1);
    let h = band_limited_sample(spec, 16, 5, 2);
    let lhs = inner(&op.apply(&[&f, &g]).unwrap(), &h);
    for slot in 0..2 {
        let w = op.adjoint(slot, &[&f, &g], &h).unwrap();
        let rhs = inner([&f, &g][slot], &w);
        assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()), "slot {slot}: {lhs} vs {rhs}");
    }
}

#[test]
fn oversized_dilations_are_rejected() {
    let b = common::bank(64, 4, (-4, 1));
    let params = ModelOperatorParams::new(vec![4.0, 1.0], vec![1.0, 1.0], ScaleWeights::discrete_constant(-4, 1, 1.0)).unwrap();
    assert!(matches!(ModelOperator::from_bank(params, &b), Err(Error::ScaleWindow(_))));
}

#[test]
fn spatial_path_is_one_dimensional() {
    let spec = GridSpec::new(2, 16, std::f64::consts::TAU).unwrap();
    let b = paralab::filterbank::build_filter_bank(
        &paralab::filterbank::BumpProfile::annulus(0.5, 2.0, 2),
        &paralab::filterbank::BumpProfile::ball(1.0, 2.0, 2),
        1,
        spec,
        (-2, 1),
    )
    .unwrap();
    let params = ModelOperatorParams::new(vec![1.0], vec![1.0], ScaleWeights::discrete_constant(-2, 1, 1.0)).unwrap();
    let op = ModelOperator::from_bank(params, &b).unwrap();
    let f = SampledFunction::zeros(spec);
    assert!(matches!(op.apply_spatial(&[&f], 1e-12), Err(Error::Unsupported(_))));
}

#[test]
fn kernel_row_agrees_with_pointwise_evaluation() {
    let b = common::bank(64, 4, (-4, 1));
    let params = ModelOperatorParams::new(vec![0.5, 1.0], vec![1.0, 1.0], ScaleWeights::discrete_constant(-4, 1, 1.0)).unwrap();
    let op = ModelOperator::from_bank(params, &b).unwrap();
    let f = band_limited_sample(b.spec, 10, 6, 0);
    let x = [1.0];
    let row = kernel_row(&op, &[&f], &x).unwrap();
    for j in [0usize, 5, 20, 40, 63] {
        let z = b.spec.point(j);
        let k = kernel_eval(&op, &[&f], &x, &z[..1]).unwrap();
        assert!((k - row.values()[j]).norm() < 1e-10 * (1.0 + k.norm()), "z index {j}");
    }
    assert!(matches!(kernel_eval(&op, &[&f], &x, &x), Err(Error::Singularity(_))));
}

#[test]
fn kernel_reproduces_the_operator_on_the_last_slot() {
    let b = common::bank(64, 4, (-4, 1));
    let params = ModelOperatorParams::new(vec![0.5, 1.0], vec![1.0, 1.0], ScaleWeights::discrete_constant(-4, 1, 1.0)).unwrap();
    let op = ModelOperator::from_bank(params, &b).unwrap();
    let f = band_limited_sample(b.spec, 10, 7, 0);
    let g = band_limited_sample(b.spec, 10, 7, 1);
    let full = op.apply(&[&f, &g]).unwrap();
    let cell = b.spec.cell();
    for j in [0usize, 17, 50] {
        let x = b.spec.point(j);
        let row = kernel_row(&op, &[&f], &x[..1]).unwrap();
        let v: C64 = row.values().iter().zip(g.values()).map(|(k, gv)| k * gv * cell).sum();
        assert!((v - full.values()[j]).norm() < 1e-10 * (1.0 + full.max_abs()), "x index {j}");
    }
}

#[test]
fn kernel_constant_stays_bounded_across_lambda() {
    let cs = common::kernel_constants();
    let max = cs.iter().cloned().fold(0.0, f64::max);
    let min = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(max / min <= 2.0, "{cs:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn model_operator_is_multilinear(a in -3.0f64..3.0, seed in 0u64..1000) {
        let b = common::bank(64, 4, (-4, 1));
        let params = ModelOperatorParams::new(vec![1.0, -0.5], vec![0.7, 1.0], ScaleWeights::discrete_constant(-4, 1, 1.0)).unwrap();
        let op = ModelOperator::from_bank(params, &b).unwrap();
        let f1 = band_limited_sample(b.spec, 16, seed, 0);
        let f2 = band_limited_sample(b.spec, 16, seed, 1);
        let g = band_limited_sample(b.spec, 16, seed, 2);
        let combo = f1.scale_real(a).add(&f2).unwrap();
        let lhs = op.apply(&[&combo, &g]).unwrap();
        let rhs = op.apply(&[&f1, &g]).unwrap().scale_real(a).add(&op.apply(&[&f2, &g]).unwrap()).unwrap();
        prop_assert!(lhs.max_diff(&rhs) < 1e-12 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn hilbert_is_an_isometry_on_mean_zero_inputs(seed in 0u64..1000) {
        let spec = GridSpec::unit_1d(64).unwrap();
        let f = band_limited_sample(spec, 32, seed, 0);
        let f = f.sub(&SampledFunction::constant(spec, f.mean())).unwrap();
        let h = hilbert_transform(&f).unwrap();
        let (a, b) = (inner(&h, &h).re, inner(&f, &f).re);
        prop_assert!((a - b).abs() < 1e-12 * b.max(1.0));
    }
}
