//! The invariant suite behind the `selftest` experiment.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::czlab::{make_atom, validate_atom, DyadicCube};
use crate::error::{Error, Result};
use crate::filterbank::{build_filter_bank, calderon_reproduce, BumpProfile, FilterBank, LogQuadrature};
use crate::grid::{GridSpec, SampledFunction, C64};
use crate::norms::{lp_norm, square_function, SquareMode};
use crate::operators::{hilbert_transform, model_operator, ModelOperatorParams, ScaleWeights, SymbolGrid};
use crate::symbols::cone_cutoffs;

use super::config::{Experiment, ExperimentConfig};
use super::report::{json_f64, pretty, write_text};
use super::{band_limited_sample, cz_trial, run, spiky_sample, RunSummary};

/// One measured property: passes when `value ≤ tolerance`.
#[derive(Clone, Debug, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub value: f64,
    pub tolerance: f64,
}

impl Check {
    pub fn passed(&self) -> bool {
        self.value <= self.tolerance
    }
}

fn bank_256() -> Result<FilterBank> {
    build_filter_bank(
        &BumpProfile::annulus(0.5, 2.0, 4),
        &BumpProfile::ball(1.0, 2.0, 4),
        2,
        GridSpec::unit_1d(256)?,
        (-6, 1),
    )
}

fn relative(a: &SampledFunction, b: &SampledFunction) -> Result<f64> {
    Ok(lp_norm(&a.sub(b)?, 2.0) / lp_norm(b, 2.0))
}

fn littlewood_paley(bank: &FilterBank, seed: u64) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..5 {
        let f = bank.restrict_to_band(&band_limited_sample(bank.spec, 128, seed, i));
        let s = square_function(&f, bank, SquareMode::Discrete)?;
        let (a, b) = (lp_norm(&s, 2.0), lp_norm(&f, 2.0));
        worst = worst.max((a - b).abs() / b);
    }
    Ok(worst)
}

fn calderon(bank: &FilterBank, seed: u64) -> Result<f64> {
    let f = bank.restrict_to_band(&band_limited_sample(bank.spec, 128, seed, 100));
    let q = LogQuadrature::new(1.0 / 256.0, 8.0, 8)?;
    relative(&calderon_reproduce(&f, bank, &q, 1, 1e-6)?, &f)
}

fn cz_failures(seed: u64) -> Result<f64> {
    let spec = GridSpec::unit_1d(256)?;
    let mut failures = 0;
    for i in 0..10 {
        let f = spiky_sample(spec, seed, 200 + i);
        let (t, _) = cz_trial(&f, 4.0, 1.0)?;
        if !t.passed(f.max_abs()) {
            failures += 1;
        }
    }
    Ok(failures as f64)
}

/// Counts generated atoms that fail validation plus corrupted atoms that pass it.
fn atom_misclassifications(seed: u64) -> Result<f64> {
    let spec = GridSpec::unit_1d(256)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(300);
    let mut wrong = 0;
    for i in 0..10 {
        let level = rng.gen_range(2..=4);
        let index = rng.gen_range(0..1usize << level);
        let q1 = [1.0, 0.5, 0.4][i % 3];
        let atom = make_atom(&spec, DyadicCube::new(&spec, level, [index, 0])?, q1, seed + i as u64)?;
        if !validate_atom(&atom).passed() {
            wrong += 1;
        }
        let mut corrupted = atom.clone();
        if i % 2 == 0 {
            let outside = (0..spec.len()).find(|&j| !atom.cube.contains(&spec, j)).expect("cube is proper");
            corrupted.values.values_mut()[outside] = C64::new(1e-3, 0.0);
        } else {
            let inside = atom.cube.cells(&spec)[0];
            corrupted.values.values_mut()[inside] += C64::new(1e-3, 0.0);
        }
        if validate_atom(&corrupted).passed() {
            wrong += 1;
        }
    }
    Ok(wrong as f64)
}

fn constants_vanish(bank: &FilterBank) -> Result<f64> {
    let params = ModelOperatorParams::new(
        vec![1.0, 0.5],
        vec![1.0, 1.0],
        ScaleWeights::discrete_constant(bank.k_min, bank.k_max, 1.0),
    )?;
    let one = SampledFunction::constant(bank.spec, C64::new(1.0, 0.0));
    Ok(model_operator(&params, bank, &[&one, &one])?.max_abs())
}

fn hilbert_checks() -> Result<(f64, f64)> {
    let spec = GridSpec::unit_1d(256)?;
    let c = SampledFunction::from_real_fn(spec, |x| (5.0 * x[0]).cos());
    let s = SampledFunction::from_real_fn(spec, |x| (5.0 * x[0]).sin());
    let cos_sin = hilbert_transform(&c)?.max_diff(&s);
    let f = band_limited_sample(spec, 100, 17, 0);
    let f = f.sub(&SampledFunction::constant(spec, f.mean()))?;
    let hh = hilbert_transform(&hilbert_transform(&f)?)?;
    Ok((cos_sin, hh.add(&f)?.max_abs()))
}

fn cone_partition(seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(400);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let lambda = [rng.gen_range(0.1..2.0), -rng.gen_range(0.1..2.0), rng.gen_range(0.1..2.0)];
        let xis: Vec<[f64; 2]> = (0..3).map(|_| [rng.gen_range(-50.0..50.0), 0.0]).collect();
        let sum: f64 = cone_cutoffs(&lambda, &xis, 1).iter().sum();
        worst = worst.max((sum - 1.0).abs());
    }
    worst
}

fn round_trips() -> Result<f64> {
    let mut broken = 0;
    for e in Experiment::ALL {
        let mut c = ExperimentConfig::defaults(e);
        if e == Experiment::SymbolDecompose {
            c.operator.symbol_file = Some("symbol.txt".into());
            c.bank.phi_plateau = 8.0;
            c.bank.phi_outer = 16.0;
        }
        if ExperimentConfig::parse(&c.to_text())? != c {
            broken += 1;
        }
    }
    let spec = GridSpec::unit_1d(16)?;
    let sigma = SymbolGrid::from_fn(2, spec, vec![1.0, 0.5], None, |x| C64::new(x[0][0].cos(), x[1][0]))?;
    let mut buf = Vec::new();
    sigma.write(&mut buf)?;
    if SymbolGrid::read(&buf[..])? != sigma {
        broken += 1;
    }
    Ok(broken as f64)
}

/// A small vanishing-at-origin bilinear symbol for the decomposition sub-run.
fn demo_symbol() -> Result<SymbolGrid> {
    let spec = GridSpec::unit_1d(32)?;
    SymbolGrid::from_fn(2, spec, vec![1.0, 1.0], None, |x| {
        let r2 = x[0][0] * x[0][0] + x[1][0] * x[1][0];
        C64::new((1.0 - (-r2 / 4.0).exp()) * (-r2 / 64.0).exp(), 0.0)
    })
}

fn sub_configs(config: &ExperimentConfig, out: &Path) -> Result<Vec<ExperimentConfig>> {
    let seeded = |e: Experiment| {
        let mut c = ExperimentConfig::defaults(e);
        c.seed = config.seed;
        c.output.dir = PathBuf::from(e.name());
        c.output.formats = config.output.formats.clone();
        c
    };

    let mut sweep = seeded(Experiment::NormSweep);
    sweep.grid.samples = 64;
    sweep.bank.k_min = -4;
    sweep.sweep.lambda = vec![vec![1.0, 1.0], vec![0.5, 1.0], vec![0.25, 1.0]];
    sweep.estimator.budget = 4;
    sweep.estimator.refine_steps = 2;

    let mut ce = seeded(Experiment::Counterexample);
    ce.grid.samples = 128;
    ce.counterexample.epsilon = 0.25;
    ce.counterexample.lambda2 = 0.125;
    ce.counterexample.nodes_per_octave = 2;
    ce.counterexample.log2_ratios = vec![1, 2, 3];
    ce.counterexample.pointwise_lambda1 = vec![1.0 / 16.0, 1.0 / 64.0];
    ce.estimator.budget = 3;
    ce.estimator.refine_steps = 2;

    let mut cz = seeded(Experiment::CzDemo);
    cz.grid.samples = 64;
    cz.cz.trials = 3;

    let sigma = demo_symbol()?;
    let dir = out.join("symbol-decompose");
    std::fs::create_dir_all(&dir).map_err(|e| Error::Io(format!("cannot create {}: {e}", dir.display())))?;
    let symbol_path = dir.join("symbol.txt");
    let file = std::fs::File::create(&symbol_path)
        .map_err(|e| Error::Io(format!("cannot write {}: {e}", symbol_path.display())))?;
    let mut w = std::io::BufWriter::new(file);
    sigma.write(&mut w)?;
    std::io::Write::flush(&mut w)?;
    let mut dec = super::decompose_config(&sigma, PathBuf::from("symbol-decompose/symbol.txt"), "symbol-decompose".into());
    dec.seed = config.seed;

    Ok(vec![sweep, ce, cz, dec])
}

/// Runs every check and the small sub-experiments, writing `selftest.json` under `out`.
pub fn run_selftest(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let seed = config.seed;
    let bank = bank_256()?;
    let (cos_sin, hh) = hilbert_checks()?;
    let checks = vec![
        Check { name: "littlewood_paley_isometry", value: littlewood_paley(&bank, seed)?, tolerance: 1e-10 },
        Check { name: "calderon_reproduction", value: calderon(&bank, seed)?, tolerance: 1e-6 },
        Check { name: "cz_decomposition_failures", value: cz_failures(seed)?, tolerance: 0.0 },
        Check { name: "atom_misclassifications", value: atom_misclassifications(seed)?, tolerance: 0.0 },
        Check { name: "model_operator_constants", value: constants_vanish(&bank)?, tolerance: 1e-12 },
        Check { name: "hilbert_cos_to_sin", value: cos_sin, tolerance: 1e-10 },
        Check { name: "hilbert_square_minus_identity", value: hh, tolerance: 1e-10 },
        Check { name: "cone_partition_of_unity", value: cone_partition(seed), tolerance: 1e-12 },
        Check { name: "round_trip_failures", value: round_trips()?, tolerance: 0.0 },
    ];

    let mut summary = RunSummary::default();
    let mut runs = Vec::new();
    for sub in sub_configs(config, out)? {
        let result = run(&sub, out)?;
        runs.push(json!({ "experiment": sub.experiment.name(), "artifacts": result.artifacts.len() }));
        summary.artifacts.extend(result.artifacts);
    }

    let rows: Vec<_> = checks
        .iter()
        .map(|c| json!({ "name": c.name, "value": json_f64(c.value), "tolerance": json_f64(c.tolerance), "passed": c.passed() }))
        .collect();
    let path = out.join("selftest.json");
    write_text(&path, &pretty(&json!({ "seed": seed, "checks": rows, "runs": runs }))?)?;
    summary.artifacts.push(path);

    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed()).map(|c| c.name).collect();
    if failed.is_empty() {
        Ok(summary)
    } else {
        Err(Error::Tolerance(format!("selftest checks failed: {}", failed.join(", "))))
    }
}
