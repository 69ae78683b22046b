//! Configuration-driven experiment runner.
//!
//! [`run`] executes one [`ExperimentConfig`] and writes its reports under the configured
//! output directory; [`exit_code`] maps failures onto the documented process exit codes.

pub mod config;
pub mod report;
pub mod selftest;

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::czlab::cz_decompose;
use crate::error::{Error, Result};
use crate::estimator::{counterexample_pointwise_gap, counterexample_run, lambda_sweep, CounterexampleConfig, SweepReport};
use crate::grid::{GridSpec, SampledFunction, C64};
use crate::norms::lp_norm;
use crate::operators::{apply_multiplier, SymbolGrid, SymbolOperator};
use crate::symbols::{apply_decomposition, classify_uniformity, decompose_multiplier, default_weight_order};

pub use config::{Experiment, ExperimentConfig, ReportFormat};
pub use report::emit_report;

/// Exit status for a run that completed and passed its checks.
pub const EXIT_OK: i32 = 0;
/// Exit status for a configuration or invariant violation.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit status for a numerical-tolerance failure.
pub const EXIT_TOLERANCE: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Tolerance(_)
        | Error::Stability(_)
        | Error::Singularity(_)
        | Error::ZeroEstimate(_)
        | Error::Budget(_)
        | Error::Refusal(_) => EXIT_TOLERANCE,
        _ => EXIT_VALIDATION,
    }
}

/// Files a run produced, in the order they were written.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub artifacts: Vec<PathBuf>,
}

/// Loads `path` and runs it, resolving relative output and symbol paths against the
/// config file's directory.
pub fn run_config(path: &Path) -> Result<RunSummary> {
    let config = ExperimentConfig::load(path)?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    run(&config, &base)
}

pub fn run(config: &ExperimentConfig, base: &Path) -> Result<RunSummary> {
    config.validate()?;
    let out = base.join(&config.output.dir);
    fs::create_dir_all(&out).map_err(|e| Error::Io(format!("cannot create {}: {e}", out.display())))?;
    match config.experiment {
        Experiment::NormSweep => norm_sweep(config, &out),
        Experiment::Counterexample => counterexample(config, &out),
        Experiment::CzDemo => cz_demo(config, &out),
        Experiment::SymbolDecompose => symbol_decompose(config, base, &out),
        Experiment::Selftest => selftest::run_selftest(config, &out),
    }
}

/// Recomputes `γ` and the uniformity class of every row with comparability `factor`.
fn reclassify(report: SweepReport, factor: f64) -> Result<SweepReport> {
    let profile = report.profile.clone();
    let target = report.target;
    let rows = report
        .rows
        .into_iter()
        .map(|mut row| {
            let u = classify_uniformity(&row.lambda, &profile, factor)?;
            row.gamma = u.gamma;
            row.classification = u.class;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    SweepReport::new(rows, profile, target)
}

fn write_sweep(report: &SweepReport, config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let mut summary = RunSummary::default();
    for &format in &config.output.formats {
        let path = out.join(format!("report.{}", format.name()));
        emit_report(report, format, &path)?;
        summary.artifacts.push(path);
    }
    if config.output.witnesses {
        summary.artifacts.extend(report::write_witnesses(report, out)?);
    }
    Ok(summary)
}

fn norm_sweep(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let bank = config.filter_bank()?;
    let profile = config.exponent_profile()?;
    let template = config.model_params(config.sweep.lambda[0].clone())?;
    let report = lambda_sweep(&template, &bank, &profile, &config.sweep.lambda, &config.estimator_config())?;
    let report = reclassify(report, config.sweep.comparability)?;
    write_sweep(&report, config, out)
}

pub fn counterexample_config(config: &ExperimentConfig) -> Result<CounterexampleConfig> {
    let ce = &config.counterexample;
    let mut c = CounterexampleConfig::new(config.grid_spec()?, config.estimator.budget, config.seed);
    c.estimator = config.estimator_config();
    c.zeta_sigma = ce.zeta_sigma;
    c.psi_r0 = ce.psi_inner;
    c.psi_r1 = ce.psi_outer;
    c.nodes_per_octave = ce.nodes_per_octave;
    c.p = config.profile.first().copied().unwrap_or(2.0);
    Ok(c)
}

fn counterexample(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let ce = &config.counterexample;
    let cfg = counterexample_config(config)?;
    let pairs: Vec<(f64, f64)> = ce.log2_ratios.iter().map(|&j| (ce.lambda2 / (j as f64).exp2(), ce.lambda2)).collect();
    let report = counterexample_run(ce.epsilon, &pairs, &cfg)?;
    let report = reclassify(report, config.sweep.comparability)?;
    let mut summary = write_sweep(&report, config, out)?;
    if !ce.pointwise_lambda1.is_empty() {
        let w = &report.rows[0].estimate.witness;
        let gaps = counterexample_pointwise_gap(ce.epsilon, &ce.pointwise_lambda1, ce.lambda2, &w[0], &w[1], &cfg)?;
        let mut text = String::from("lambda1,gap\n");
        for (l, g) in ce.pointwise_lambda1.iter().zip(&gaps) {
            text.push_str(&format!("{},{}\n", report::fmt_f64(*l), report::fmt_f64(*g)));
        }
        let path = out.join("pointwise.csv");
        report::write_text(&path, &text)?;
        summary.artifacts.push(path);
    }
    Ok(summary)
}

/// A real sample with occasional tall spikes, drawn from stream `stream` of `seed`.
pub fn spiky_sample(spec: GridSpec, seed: u64, stream: u64) -> SampledFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let values = (0..spec.len())
        .map(|_| {
            let base: f64 = rng.gen_range(-1.0..1.0);
            let spike = if rng.gen_bool(0.05) { rng.gen_range(5.0..50.0) } else { 1.0 };
            C64::new(base * spike, 0.0)
        })
        .collect();
    SampledFunction::new(spec, values).expect("length matches")
}

/// A real function with random spectrum on `|k| < band`, drawn from stream `stream` of `seed`.
pub fn band_limited_sample(spec: GridSpec, band: usize, seed: u64, stream: u64) -> SampledFunction {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let values = (0..spec.len()).map(|_| C64::new(rng.gen_range(-1.0..1.0), 0.0)).collect();
    SampledFunction::new(spec, values).expect("length matches").band_limit(band).map(|v| C64::new(v.re, 0.0))
}

/// Outcome of one Calderón–Zygmund trial.
#[derive(Clone, Debug, PartialEq)]
pub struct CzTrial {
    pub alpha: f64,
    pub pieces: usize,
    pub reconstruction_error: f64,
    pub max_piece_mean: f64,
    pub disjoint: bool,
    pub g_sup: f64,
    pub g_bound: f64,
    pub total_measure: f64,
    pub measure_bound: f64,
}

impl CzTrial {
    pub fn passed(&self, f_sup: f64) -> bool {
        self.reconstruction_error <= 1e-12 * f_sup.max(1.0)
            && self.max_piece_mean <= 1e-12 * f_sup
            && self.disjoint
            && self.g_sup <= self.g_bound * (1.0 + 1e-12)
            && self.total_measure <= self.measure_bound * (1.0 + 1e-12)
    }
}

/// Decomposes `f` at `factor` times its global q1-average and measures every property.
pub fn cz_trial(f: &SampledFunction, factor: f64, q1: f64) -> Result<(CzTrial, crate::czlab::CZParts)> {
    let spec = *f.spec();
    let global = lp_norm(f, q1) / spec.volume().powf(1.0 / q1);
    let alpha = factor * global;
    let parts = cz_decompose(f, alpha, q1)?;
    let trial = CzTrial {
        alpha,
        pieces: parts.pieces.len(),
        reconstruction_error: parts.reconstruct().max_diff(f),
        max_piece_mean: parts.max_piece_mean(),
        disjoint: parts.cubes_disjoint(),
        g_sup: parts.g.max_abs(),
        g_bound: (spec.dimension() as f64).exp2() * alpha,
        total_measure: parts.total_measure(),
        measure_bound: lp_norm(f, 1.0) / alpha,
    };
    Ok((trial, parts))
}

fn cz_demo(config: &ExperimentConfig, out: &Path) -> Result<RunSummary> {
    let spec = config.grid_spec()?;
    let mut summary = RunSummary::default();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for i in 0..config.cz.trials {
        let f = spiky_sample(spec, config.seed, i as u64);
        let (t, parts) = cz_trial(&f, config.cz.level_factor, config.cz.q1)?;
        let ok = t.passed(f.max_abs());
        if !ok {
            failures.push(i);
        }
        if i == 0 {
            let path = out.join("cz_pieces_000.txt");
            let file = fs::File::create(&path).map_err(|e| Error::Io(format!("cannot write {}: {e}", path.display())))?;
            parts.write(std::io::BufWriter::new(file))?;
            summary.artifacts.push(path);
        }
        let f64j = report::json_f64;
        rows.push(json!({
            "trial": i,
            "alpha": f64j(t.alpha),
            "pieces": t.pieces,
            "reconstruction_error": f64j(t.reconstruction_error),
            "max_piece_mean": f64j(t.max_piece_mean),
            "disjoint": t.disjoint,
            "g_sup": f64j(t.g_sup),
            "g_bound": f64j(t.g_bound),
            "total_measure": f64j(t.total_measure),
            "measure_bound": f64j(t.measure_bound),
            "passed": ok,
        }));
    }
    let path = out.join("cz_summary.json");
    report::write_text(&path, &report::pretty(&json!({ "q1": report::json_f64(config.cz.q1), "trials": rows }))?)?;
    summary.artifacts.push(path);
    if failures.is_empty() {
        Ok(summary)
    } else {
        Err(Error::Tolerance(format!("Calderón–Zygmund trials {failures:?} violate a decomposition property")))
    }
}

pub fn read_symbol_file(path: &Path) -> Result<SymbolGrid> {
    let file = fs::File::open(path).map_err(|e| Error::Io(format!("cannot read symbol file {}: {e}", path.display())))?;
    SymbolGrid::read(BufReader::new(file))
}

/// A config for decomposing `symbol` with a bank sized to its grid and arity.
pub fn decompose_config(symbol: &SymbolGrid, symbol_file: PathBuf, out_dir: PathBuf) -> ExperimentConfig {
    let spec = symbol.spec();
    let n = symbol.arity();
    let mut c = ExperimentConfig::defaults(Experiment::SymbolDecompose);
    c.grid = config::GridSection { dimension: spec.dimension(), samples: spec.samples(), period: spec.period() };
    c.operator.rho = vec![1.0; n];
    c.operator.symbol_file = Some(symbol_file);
    c.bank.phi_plateau = 4.0 * n as f64;
    c.bank.phi_outer = 8.0 * n as f64;
    c.bank.k_min = -((spec.nyquist() / c.bank.psi_outer).log2().floor() as i32);
    c.bank.k_max = c.bank.k_min.max(0);
    c.output.dir = out_dir;
    c
}

fn symbol_decompose(config: &ExperimentConfig, base: &Path, out: &Path) -> Result<RunSummary> {
    let file = config.operator.symbol_file.as_ref().expect("validated");
    let sigma = read_symbol_file(&base.join(file))?;
    let spec = *sigma.spec();
    if spec != config.grid_spec()? {
        return Err(Error::Validation("symbol file grid differs from grid.* settings".into()));
    }
    let bank = config.filter_bank()?;
    let n = sigma.arity();
    let order = config.decompose.weight_order.unwrap_or_else(|| default_weight_order(spec.dimension(), n));
    let lambda = sigma.lambda().to_vec();
    let dec = decompose_multiplier(&sigma, &lambda, &bank, order, config.decompose.u_budget)?;

    let band = SymbolOperator::band_for(&spec, n);
    let inputs: Vec<SampledFunction> =
        (0..n).map(|i| band_limited_sample(spec, band, config.seed, i as u64)).collect();
    let refs: Vec<&SampledFunction> = inputs.iter().collect();
    let exact = apply_multiplier(&sigma, &refs)?;
    let approx = apply_decomposition(&dec, &refs)?;
    let scale = lp_norm(&exact, 2.0);
    let error = if scale > 0.0 { lp_norm(&approx.sub(&exact)?, 2.0) / scale } else { lp_norm(&approx, 2.0) };

    let f64j = report::json_f64;
    let blocks: Vec<_> = dec
        .blocks
        .iter()
        .map(|b| {
            json!({
                "l": b.l,
                "k": b.k,
                "box_radius": b.box_radius,
                "total_modes": b.total_modes,
                "retained": b.retained,
                "tail_mass": f64j(b.tail_mass),
                "l_bound": f64j(b.l_bound),
            })
        })
        .collect();
    let doc = json!({
        "lambda": lambda.iter().map(|&l| f64j(l)).collect::<Vec<_>>(),
        "weight_order": order,
        "u_budget": dec.u_budget,
        "plateau_required": f64j(dec.plateau_required),
        "pieces": dec.pieces.len(),
        "tail_mass": f64j(dec.tail_mass),
        "relative_residual": f64j(dec.relative_residual),
        "l_sup": f64j(dec.l_sup),
        "warning": dec.warning,
        "reconstruction_error": f64j(error),
        "blocks": blocks,
    });
    let mut summary = RunSummary::default();
    let path = out.join("decomposition.json");
    report::write_text(&path, &report::pretty(&doc)?)?;
    summary.artifacts.push(path);

    let mut csv = String::from("l,k,u,weight_re,weight_im,l_re,l_im\n");
    for p in &dec.pieces {
        let u: Vec<String> = p.u.iter().map(|&x| report::fmt_f64(x)).collect();
        csv.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            p.l,
            p.k,
            u.join(" "),
            report::fmt_f64(p.weight.re),
            report::fmt_f64(p.weight.im),
            report::fmt_f64(p.l_value.re),
            report::fmt_f64(p.l_value.im)
        ));
    }
    let path = out.join("pieces.csv");
    report::write_text(&path, &csv)?;
    summary.artifacts.push(path);

    if error > config.decompose.tolerance {
        return Err(Error::Tolerance(format!(
            "decomposition reconstructs the multiplier with relative L² error {error:.3e} above {:.1e}",
            config.decompose.tolerance
        )));
    }
    Ok(summary)
}
