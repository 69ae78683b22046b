//! Criterion measurements shared by the acceptance target and the per-module suites.
#![allow(dead_code)]

use std::path::Path;

use paralab::czlab::{make_atom, validate_atom, DyadicCube};
use paralab::estimator::{counterexample_pointwise_gap, counterexample_run, lambda_sweep, CounterexampleConfig, EstimatorConfig};
use paralab::filterbank::{build_filter_bank, calderon_reproduce, BumpProfile, Filter, FilterBank, LogQuadrature};
use paralab::norms::{lp_norm, square_function, ExponentProfile, SquareMode};
use paralab::operators::{
    apply_multiplier, classical_paraproduct, hilbert_transform, kernel_decay_constant, ModelOperator,
    ModelOperatorParams, ParaproductSlot, ScaleWeights,
};
use paralab::runner::{band_limited_sample, cz_trial, spiky_sample, ExperimentConfig, Experiment};
use paralab::symbols::{apply_decomposition, cone_cutoffs, decompose_multiplier, default_weight_order, DEFAULT_U_BUDGET};
use paralab::{GridSpec, SampledFunction, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Result of one criterion: whether it holds plus a one-line summary of what was measured.
pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String) -> Self {
        Outcome { pass, detail }
    }
}

fn sci(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

pub fn bank(n: usize, smoothness: usize, window: (i32, i32)) -> FilterBank {
    build_filter_bank(
        &BumpProfile::annulus(0.5, 2.0, smoothness),
        &BumpProfile::ball(1.0, 2.0, smoothness),
        2,
        GridSpec::unit_1d(n).unwrap(),
        window,
    )
    .unwrap()
}

pub fn relative_l2(a: &SampledFunction, b: &SampledFunction) -> f64 {
    lp_norm(&a.sub(b).unwrap(), 2.0) / lp_norm(b, 2.0)
}

pub fn littlewood_paley() -> Outcome {
    let b = bank(256, 4, (-6, 1));
    let mut worst: f64 = 0.0;
    for i in 0..50 {
        let f = b.restrict_to_band(&band_limited_sample(b.spec, 128, 101, i));
        let s = square_function(&f, &b, SquareMode::Discrete).unwrap();
        let n = lp_norm(&f, 2.0);
        worst = worst.max((lp_norm(&s, 2.0) - n).abs() / n);
    }
    Outcome::new(worst <= 1e-10, format!("worst relative deviation {worst:.3e} over 50 inputs"))
}

pub fn calderon() -> Outcome {
    let b = bank(256, 4, (-6, 1));
    let q = LogQuadrature::new(1.0 / 256.0, 8.0, 8).unwrap();
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        let f = b.restrict_to_band(&band_limited_sample(b.spec, 128, 102, i));
        let g = calderon_reproduce(&f, &b, &q, 1, 1e-6).unwrap();
        worst = worst.max(relative_l2(&g, &f));
    }
    Outcome::new(worst <= 1e-6, format!("worst relative L2 error {worst:.3e} at 8 nodes per octave"))
}

pub fn cz_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    let mut failures = Vec::new();
    for i in 0..100u64 {
        let spec = if i % 4 == 3 { GridSpec::new(2, 64, 1.0).unwrap() } else { GridSpec::unit_1d(256).unwrap() };
        let f = spiky_sample(spec, 103, i);
        let factor = rng.gen_range(1.0..16.0);
        let (t, _) = cz_trial(&f, factor, 1.0).unwrap();
        if !t.passed(f.max_abs()) {
            failures.push(i);
        }
    }
    Outcome::new(failures.is_empty(), format!("100 trials, failing: {failures:?}"))
}

pub fn atom_suite() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    let mut bad_atoms = 0;
    let mut missed = 0;
    for i in 0..100u64 {
        let two_d = i % 3 == 2;
        let spec = if two_d { GridSpec::new(2, 64, 1.0).unwrap() } else { GridSpec::unit_1d(256).unwrap() };
        let level = rng.gen_range(1..=3);
        let index = [rng.gen_range(0..1usize << level), if two_d { rng.gen_range(0..1usize << level) } else { 0 }];
        let q1: f64 = [1.0, 0.75, 0.5, 0.4][(i % 4) as usize];
        let q1 = if two_d { q1.max(0.5) } else { q1 };
        let atom = make_atom(&spec, DyadicCube::new(&spec, level, index).unwrap(), q1, 1000 + i).unwrap();
        if !validate_atom(&atom).passed() {
            bad_atoms += 1;
        }
        if i < 10 {
            let mut c = atom.clone();
            match i % 3 {
                0 => {
                    let outside = (0..spec.len()).find(|&j| !atom.cube.contains(&spec, j)).unwrap();
                    c.values.values_mut()[outside] = C64::new(1e-6, 0.0);
                }
                1 => {
                    let inside = atom.cube.cells(&spec)[1];
                    c.values.values_mut()[inside] += C64::new(1e-6, 0.0);
                }
                _ => c.values = c.values.scale_real(1.01),
            }
            if validate_atom(&c).passed() {
                missed += 1;
            }
        }
    }
    Outcome::new(
        bad_atoms == 0 && missed == 0,
        format!("{bad_atoms} of 100 atoms rejected, {missed} of 10 corruptions missed"),
    )
}

/// Worst error of the four model-operator checks, in order:
/// constants, one-slot symbol oracle, spatial path, permutation.
pub fn model_operator_errors() -> [f64; 4] {
    let b = bank(256, 4, (-5, 1));
    let weights = ScaleWeights::discrete_fn(b.k_min, b.k_max, |k| 1.0 + 0.25 * k as f64);
    let one = SampledFunction::constant(b.spec, C64::new(1.0, 0.0));

    let p2 = ModelOperatorParams::new(vec![1.0, -0.5], vec![1.0, 0.5], weights.clone()).unwrap();
    let op2 = ModelOperator::from_bank(p2.clone(), &b).unwrap();
    let constants = op2.apply(&[&one, &one]).unwrap().max_abs();

    let p1 = ModelOperatorParams::new(vec![0.75], vec![0.6], weights.clone()).unwrap();
    let op1 = ModelOperator::from_bank(p1, &b).unwrap();
    let f = band_limited_sample(b.spec, 100, 105, 0);
    let out = op1.apply(&[&f]).unwrap();
    let hat = f.spectrum();
    let oracle = hat
        .multiply(|xi| {
            let mut m = C64::new(0.0, 0.0);
            for (t, w) in weights.scales() {
                m += b.psi.eval(&[0.6 * 0.75 * t * xi[0]]) * b.phis[0].eval(&[0.75 * t * xi[0]]) * w;
            }
            m
        })
        .to_sampled();
    let one_slot = out.max_diff(&oracle) / oracle.max_abs();

    let g = band_limited_sample(b.spec, 40, 105, 1);
    let h = band_limited_sample(b.spec, 40, 105, 2);
    let spectral = op2.apply(&[&g, &h]).unwrap();
    let spatial = op2.apply_spatial(&[&g, &h], 1e-14).unwrap();
    let spatial_err = spatial.max_diff(&spectral) / spectral.max_abs();

    let perm = [1, 0];
    let swapped = ModelOperator::new(p2.permuted(&perm), b.psi.clone(), vec![op2.phis[1].clone(), op2.phis[0].clone()])
        .unwrap();
    let permuted = swapped.apply(&[&h, &g]).unwrap();
    let perm_err = permuted.max_diff(&spectral) / spectral.max_abs();

    [constants, one_slot, spatial_err, perm_err]
}

pub fn model_operator() -> Outcome {
    let [c, o, s, p] = model_operator_errors();
    Outcome::new(
        c <= 1e-12 && o <= 1e-10 && s <= 1e-8 && p <= 1e-12,
        format!("constants {c:.2e}, symbol oracle {o:.2e}, spatial {s:.2e}, permutation {p:.2e}"),
    )
}

/// Relative gaps `‖T_ε − Π‖₂ / ‖Π‖₂` for `ε = 2^{-2}, 2^{-4}, 2^{-6}`.
pub fn paraproduct_gaps() -> Vec<f64> {
    let b = bank(256, 4, (-5, 1));
    let weights = ScaleWeights::discrete_constant(b.k_min, b.k_max, 1.0);
    let f = band_limited_sample(b.spec, 64, 1, 0);
    let g = band_limited_sample(b.spec, 8, 1, 1);
    let slots = vec![
        ParaproductSlot::new(Filter::product(b.psi.clone(), b.phis[0].clone()), 1.0, true),
        ParaproductSlot::new(b.phis[1].clone(), 0.125, false),
    ];
    let classical = classical_paraproduct(&slots, &weights, &[&f, &g]).unwrap();
    [2, 4, 6]
        .iter()
        .map(|&e| {
            let eps = (-(e as f64)).exp2();
            let p = ModelOperatorParams::new(vec![1.0, 0.125], vec![1.0, eps], weights.clone()).unwrap();
            let t = ModelOperator::from_bank(p, &b).unwrap().apply(&[&f, &g]).unwrap();
            relative_l2(&t, &classical)
        })
        .collect()
}

pub fn paraproduct_limit() -> Outcome {
    let gaps = paraproduct_gaps();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    Outcome::new(decreasing && gaps[2] <= 1e-3, format!("gaps {}", sci(&gaps)))
}

pub fn uniformity() -> Outcome {
    let b = bank(256, 2, (-5, 1));
    let params = ModelOperatorParams::new(vec![1.0, 1.0], vec![1.0, 1.0], ScaleWeights::discrete_constant(-5, 1, 1.0)).unwrap();
    let profile = ExponentProfile::new(vec![2.0, 2.0]).unwrap();
    let grid: Vec<Vec<f64>> = (0..=8).map(|j| vec![(-(j as f64)).exp2(), 1.0]).collect();
    let r = lambda_sweep(&params, &b, &profile, &grid, &EstimatorConfig::new(20, 11)).unwrap();
    let values: Vec<f64> = r.rows.iter().map(|row| row.estimate.value).collect();
    Outcome::new(r.uniformity_ratio <= 2.0, format!("uniformity ratio {:.4}, estimates {values:.4?}", r.uniformity_ratio))
}

/// Norm estimates of the counterexample operators over `λ₂/λ₁ = 2^2..2^10`.
pub fn blowup_estimates() -> Vec<f64> {
    let spec = GridSpec::unit_1d(1024).unwrap();
    let cfg = CounterexampleConfig::new(spec, 20, 1);
    let lambda2 = 1.0 / 64.0;
    let pairs: Vec<(f64, f64)> = (2..=10).map(|j| (lambda2 / (j as f64).exp2(), lambda2)).collect();
    counterexample_run(1.0 / 64.0, &pairs, &cfg).unwrap().rows.iter().map(|r| r.estimate.value).collect()
}

/// `max_x |U(f, g) − f·H(g)|` at `λ₁ = 2^{-2}, 2^{-4}, 2^{-6}`.
pub fn pointwise_gaps() -> Vec<f64> {
    let spec = GridSpec::new(1, 1024, std::f64::consts::TAU * 64.0).unwrap();
    let cfg = CounterexampleConfig::new(spec, 1, 1);
    let f = SampledFunction::from_real_fn(spec, |x| 1.0 + 0.5 * (x[0] / 8.0).cos());
    let g = SampledFunction::from_real_fn(spec, |x| x[0].cos() + 0.5 * (2.0 * x[0]).sin());
    let l1: Vec<f64> = [2, 4, 6].iter().map(|&j| (-(j as f64)).exp2()).collect();
    counterexample_pointwise_gap(1.0 / 64.0, &l1, 1.0, &f, &g, &cfg).unwrap()
}

pub fn blowup() -> Outcome {
    let est = blowup_estimates();
    let nondecreasing = est.windows(2).all(|w| w[1] >= 0.9 * w[0]);
    let growth = est[est.len() - 1] / est[0];
    let gaps = pointwise_gaps();
    let converging = gaps.windows(2).all(|w| w[1] <= 0.5 * w[0]);
    Outcome::new(
        nondecreasing && growth >= 2.0 && converging,
        format!(
            "estimates {est:.4?}, final/initial {growth:.3} (nondecreasing {nondecreasing}), pointwise gaps {}",
            sci(&gaps)
        ),
    )
}

pub fn hilbert_errors() -> (f64, f64) {
    let spec = GridSpec::unit_1d(512).unwrap();
    let mut cos_sin: f64 = 0.0;
    for k in [1.0, 7.0, 100.0, 255.0] {
        let c = SampledFunction::from_real_fn(spec, |x| (k * x[0]).cos());
        let s = SampledFunction::from_real_fn(spec, |x| (k * x[0]).sin());
        cos_sin = cos_sin.max(hilbert_transform(&c).unwrap().max_diff(&s));
    }
    let mut square: f64 = 0.0;
    for i in 0..5 {
        let f = band_limited_sample(spec, 256, 109, i);
        let f = f.sub(&SampledFunction::constant(spec, f.mean())).unwrap();
        let hh = hilbert_transform(&hilbert_transform(&f).unwrap()).unwrap();
        square = square.max(hh.add(&f).unwrap().max_abs());
    }
    (cos_sin, square)
}

pub fn hilbert() -> Outcome {
    let (a, b) = hilbert_errors();
    Outcome::new(a <= 1e-10 && b <= 1e-10, format!("H(cos) - sin {a:.2e}, H^2 + I {b:.2e}"))
}

/// Relative L² error of the emitted pieces against the multiplier, and the worst cone-sum deviation.
pub fn decomposition_errors() -> (f64, f64) {
    let spec = GridSpec::unit_1d(256).unwrap();
    let b = build_filter_bank(&BumpProfile::annulus(0.5, 2.0, 2), &BumpProfile::ball(8.0, 16.0, 2), 2, spec, (-6, 0))
        .unwrap();
    let lambda = vec![1.0, 0.5];
    let params = ModelOperatorParams::new(lambda.clone(), vec![1.0, 1.0], ScaleWeights::discrete_constant(-4, -2, 1.0)).unwrap();
    let op = ModelOperator::new(params, b.psi.clone(), vec![Filter::ball(1.0, 2.0).unwrap(); 2]).unwrap();
    let sigma = op.symbol_grid(spec, None).unwrap();
    let f = band_limited_sample(spec, 64, 110, 0);
    let g = band_limited_sample(spec, 64, 110, 1);
    let exact = apply_multiplier(&sigma, &[&f, &g]).unwrap();
    let dec = decompose_multiplier(&sigma, &lambda, &b, default_weight_order(1, 2), DEFAULT_U_BUDGET).unwrap();
    let rebuilt = apply_decomposition(&dec, &[&f, &g]).unwrap();

    let mut rng = ChaCha8Rng::seed_from_u64(110);
    let mut cone: f64 = 0.0;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=4);
        let lam: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..4.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
        let d = rng.gen_range(1..=2);
        let xis: Vec<[f64; 2]> =
            (0..n).map(|_| [rng.gen_range(-100.0..100.0), if d == 2 { rng.gen_range(-100.0..100.0) } else { 0.0 }]).collect();
        let s: f64 = cone_cutoffs(&lam, &xis, d).iter().sum();
        cone = cone.max((s - 1.0).abs());
    }
    (relative_l2(&rebuilt, &exact), cone)
}

pub fn decomposition() -> Outcome {
    let (rel, cone) = decomposition_errors();
    Outcome::new(rel <= 1e-3 && cone <= 1e-12, format!("reconstruction error {rel:.3e}, cone partition {cone:.2e}"))
}

/// `sup |K(x, z)| |x − z|` per `λ₁ = 2^{-j}`, `j = 0..8`, at `λ₂ = 1`, maximized over a frozen family.
pub fn kernel_constants() -> Vec<f64> {
    let b = bank(256, 4, (-5, 1));
    let spec = b.spec;
    let mut family = vec![SampledFunction::constant(spec, C64::new(1.0, 0.0))];
    for (i, band) in [4usize, 16, 64].iter().enumerate() {
        let f = band_limited_sample(spec, *band, 2, i as u64);
        family.push(f.scale_real(1.0 / f.max_abs()));
    }
    for k in [1.0, 4.0, 16.0, 60.0] {
        family.push(SampledFunction::from_real_fn(spec, move |x| (k * x[0]).cos()));
    }
    (0..=8)
        .map(|j| {
            let l1 = (-(j as f64)).exp2();
            let params =
                ModelOperatorParams::new(vec![l1, 1.0], vec![1.0, 1.0], ScaleWeights::discrete_constant(-5, 1, 1.0)).unwrap();
            let op = ModelOperator::from_bank(params, &b).unwrap();
            let mut c: f64 = 0.0;
            for f in &family {
                for jx in 0..32 {
                    let x = jx as f64 * std::f64::consts::TAU / 32.0;
                    c = c.max(kernel_decay_constant(&op, &[f], &[x]).unwrap());
                }
            }
            c
        })
        .collect()
}

pub fn kernel_bounds() -> Outcome {
    let cs = kernel_constants();
    let max = cs.iter().cloned().fold(0.0, f64::max);
    let min = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    Outcome::new(max / min <= 2.0, format!("constants {cs:.3?}, spread {:.3}", max / min))
}

fn collect_files(root: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().into_owned();
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    out.sort();
    out
}

pub fn determinism() -> Outcome {
    let config = ExperimentConfig::defaults(Experiment::Selftest);
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    paralab::runner::run(&config, a.path()).unwrap();
    paralab::runner::run(&config, b.path()).unwrap();
    let (fa, fb) = (collect_files(a.path()), collect_files(b.path()));
    let differing: Vec<&str> = fa.iter().zip(&fb).filter(|(x, y)| x != y).map(|(x, _)| x.0.as_str()).collect();
    Outcome::new(
        fa.len() == fb.len() && !fa.is_empty() && differing.is_empty(),
        format!("{} files per run, differing: {differing:?}", fa.len()),
    )
}
