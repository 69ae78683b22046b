//! Key-value experiment configuration.
//!
//! One `key = value` per line, keys dotted by section (`grid.samples = 256`), `#` starts a
//! comment. Lists are whitespace separated; sweep points are separated by `;`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::estimator::{EstimatorConfig, DEFAULT_REFINE_STEPS};
use crate::filterbank::{build_filter_bank, BumpProfile, FilterBank};
use crate::grid::GridSpec;
use crate::norms::ExponentProfile;
use crate::operators::{ModelOperatorParams, ScaleWeights};
use crate::symbols::{DEFAULT_COMPARABILITY, DEFAULT_U_BUDGET};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    NormSweep,
    Counterexample,
    CzDemo,
    SymbolDecompose,
    Selftest,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::NormSweep,
        Experiment::Counterexample,
        Experiment::CzDemo,
        Experiment::SymbolDecompose,
        Experiment::Selftest,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::NormSweep => "norm-sweep",
            Experiment::Counterexample => "counterexample",
            Experiment::CzDemo => "cz-demo",
            Experiment::SymbolDecompose => "symbol-decompose",
            Experiment::Selftest => "selftest",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|e| e.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    pub fn name(&self) -> &'static str {
        match self {
            ReportFormat::Csv => "csv",
            ReportFormat::Json => "json",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GridSection {
    pub dimension: usize,
    pub samples: usize,
    pub period: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BankSection {
    pub psi_inner: f64,
    pub psi_outer: f64,
    pub phi_plateau: f64,
    pub phi_outer: f64,
    pub smoothness: usize,
    pub k_min: i32,
    pub k_max: i32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorSection {
    pub rho: Vec<f64>,
    /// Constant value of `L` over the bank's scale window.
    pub weight: f64,
    pub symbol_file: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSection {
    pub lambda: Vec<Vec<f64>>,
    pub comparability: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CounterexampleSection {
    pub epsilon: f64,
    pub zeta_sigma: f64,
    pub psi_inner: f64,
    pub psi_outer: f64,
    pub nodes_per_octave: usize,
    pub lambda2: f64,
    /// Exponents `j` of the ratios `λ₂/λ₁ = 2^j`.
    pub log2_ratios: Vec<i32>,
    /// `λ₁` values for the pointwise comparison with `f·H(g)`; empty skips it.
    pub pointwise_lambda1: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CzSection {
    /// Level `α` as a multiple of the global q1-average of the sample.
    pub level_factor: f64,
    pub q1: f64,
    pub trials: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecomposeSection {
    pub u_budget: usize,
    pub weight_order: Option<usize>,
    /// Largest accepted relative L² reconstruction error.
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub formats: Vec<ReportFormat>,
    pub witnesses: bool,
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub grid: GridSection,
    pub bank: BankSection,
    pub operator: OperatorSection,
    pub profile: Vec<f64>,
    pub sweep: SweepSection,
    pub estimator: EstimatorSection,
    pub counterexample: CounterexampleSection,
    pub cz: CzSection,
    pub decompose: DecomposeSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorSection {
    pub budget: usize,
    pub refine_steps: usize,
}

impl ExperimentConfig {
    /// Defaults for `experiment`: a 1-d grid of 256 samples on `[0, 2π)`.
    pub fn defaults(experiment: Experiment) -> Self {
        ExperimentConfig {
            experiment,
            seed: 1,
            grid: GridSection { dimension: 1, samples: 256, period: std::f64::consts::TAU },
            bank: BankSection {
                psi_inner: 0.5,
                psi_outer: 2.0,
                phi_plateau: 1.0,
                phi_outer: 2.0,
                smoothness: 4,
                k_min: -5,
                k_max: 1,
            },
            operator: OperatorSection { rho: vec![1.0, 1.0], weight: 1.0, symbol_file: None },
            profile: vec![2.0, 2.0],
            sweep: SweepSection { lambda: vec![vec![1.0, 1.0]], comparability: DEFAULT_COMPARABILITY },
            estimator: EstimatorSection { budget: 20, refine_steps: DEFAULT_REFINE_STEPS },
            counterexample: CounterexampleSection {
                epsilon: 1.0 / 64.0,
                zeta_sigma: 1.0,
                psi_inner: 0.5,
                psi_outer: 2.0,
                nodes_per_octave: 8,
                lambda2: 1.0 / 64.0,
                log2_ratios: vec![2, 4, 6, 8, 10],
                pointwise_lambda1: Vec::new(),
            },
            cz: CzSection { level_factor: 4.0, q1: 1.0, trials: 10 },
            decompose: DecomposeSection { u_budget: DEFAULT_U_BUDGET, weight_order: None, tolerance: 1e-3 },
            output: OutputSection {
                dir: PathBuf::from("out"),
                formats: vec![ReportFormat::Csv, ReportFormat::Json],
                witnesses: true,
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut table = Table::parse(text)?;
        let experiment = table
            .take("experiment")
            .ok_or_else(|| config_err("experiment", "missing; expected one of norm-sweep, counterexample, cz-demo, symbol-decompose, selftest"))?;
        let experiment = Experiment::parse(&experiment)
            .ok_or_else(|| config_err("experiment", &format!("unknown experiment `{experiment}`")))?;
        let mut c = Self::defaults(experiment);

        table.scalar("seed", &mut c.seed)?;
        table.scalar("grid.dimension", &mut c.grid.dimension)?;
        table.scalar("grid.samples", &mut c.grid.samples)?;
        table.scalar("grid.period", &mut c.grid.period)?;

        table.scalar("bank.psi_inner", &mut c.bank.psi_inner)?;
        table.scalar("bank.psi_outer", &mut c.bank.psi_outer)?;
        table.scalar("bank.phi_plateau", &mut c.bank.phi_plateau)?;
        table.scalar("bank.phi_outer", &mut c.bank.phi_outer)?;
        table.scalar("bank.smoothness", &mut c.bank.smoothness)?;
        table.scalar("bank.k_min", &mut c.bank.k_min)?;
        table.scalar("bank.k_max", &mut c.bank.k_max)?;

        table.list("operator.rho", &mut c.operator.rho)?;
        table.scalar("operator.weight", &mut c.operator.weight)?;
        if let Some(v) = table.take("operator.symbol_file") {
            c.operator.symbol_file = Some(PathBuf::from(v));
        }

        table.list("profile.p", &mut c.profile)?;

        if let Some(v) = table.take("sweep.lambda") {
            c.sweep.lambda = v
                .split(';')
                .map(|point| parse_list::<f64>("sweep.lambda", point))
                .collect::<Result<Vec<_>>>()?;
        }
        table.scalar("sweep.comparability", &mut c.sweep.comparability)?;

        table.scalar("estimator.budget", &mut c.estimator.budget)?;
        table.scalar("estimator.refine_steps", &mut c.estimator.refine_steps)?;

        let ce = &mut c.counterexample;
        table.scalar("counterexample.epsilon", &mut ce.epsilon)?;
        table.scalar("counterexample.zeta_sigma", &mut ce.zeta_sigma)?;
        table.scalar("counterexample.psi_inner", &mut ce.psi_inner)?;
        table.scalar("counterexample.psi_outer", &mut ce.psi_outer)?;
        table.scalar("counterexample.nodes_per_octave", &mut ce.nodes_per_octave)?;
        table.scalar("counterexample.lambda2", &mut ce.lambda2)?;
        table.list("counterexample.log2_ratios", &mut ce.log2_ratios)?;
        table.list("counterexample.pointwise_lambda1", &mut ce.pointwise_lambda1)?;

        table.scalar("cz.level_factor", &mut c.cz.level_factor)?;
        table.scalar("cz.q1", &mut c.cz.q1)?;
        table.scalar("cz.trials", &mut c.cz.trials)?;

        table.scalar("decompose.u_budget", &mut c.decompose.u_budget)?;
        if let Some(v) = table.take("decompose.weight_order") {
            c.decompose.weight_order = Some(parse_value("decompose.weight_order", &v)?);
        }
        table.scalar("decompose.tolerance", &mut c.decompose.tolerance)?;

        if let Some(v) = table.take("output.dir") {
            c.output.dir = PathBuf::from(v);
        }
        if let Some(v) = table.take("output.formats") {
            c.output.formats = v
                .split_whitespace()
                .map(|f| match f {
                    "csv" => Ok(ReportFormat::Csv),
                    "json" => Ok(ReportFormat::Json),
                    other => Err(config_err("output.formats", &format!("unknown format `{other}`"))),
                })
                .collect::<Result<Vec<_>>>()?;
        }
        table.scalar("output.witnesses", &mut c.output.witnesses)?;

        table.finish()?;
        c.validate()?;
        Ok(c)
    }

    /// Serializes every key, so that [`ExperimentConfig::parse`] reproduces `self`.
    pub fn to_text(&self) -> String {
        fn list<T: std::fmt::Display>(v: &[T]) -> String {
            v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ")
        }
        let mut s = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        kv("experiment", self.experiment.name().into());
        kv("seed", self.seed.to_string());
        kv("grid.dimension", self.grid.dimension.to_string());
        kv("grid.samples", self.grid.samples.to_string());
        kv("grid.period", self.grid.period.to_string());
        let b = &self.bank;
        kv("bank.psi_inner", b.psi_inner.to_string());
        kv("bank.psi_outer", b.psi_outer.to_string());
        kv("bank.phi_plateau", b.phi_plateau.to_string());
        kv("bank.phi_outer", b.phi_outer.to_string());
        kv("bank.smoothness", b.smoothness.to_string());
        kv("bank.k_min", b.k_min.to_string());
        kv("bank.k_max", b.k_max.to_string());
        kv("operator.rho", list(&self.operator.rho));
        kv("operator.weight", self.operator.weight.to_string());
        if let Some(p) = &self.operator.symbol_file {
            kv("operator.symbol_file", p.display().to_string());
        }
        kv("profile.p", list(&self.profile));
        kv("sweep.lambda", self.sweep.lambda.iter().map(|p| list(p)).collect::<Vec<_>>().join("; "));
        kv("sweep.comparability", self.sweep.comparability.to_string());
        kv("estimator.budget", self.estimator.budget.to_string());
        kv("estimator.refine_steps", self.estimator.refine_steps.to_string());
        let ce = &self.counterexample;
        kv("counterexample.epsilon", ce.epsilon.to_string());
        kv("counterexample.zeta_sigma", ce.zeta_sigma.to_string());
        kv("counterexample.psi_inner", ce.psi_inner.to_string());
        kv("counterexample.psi_outer", ce.psi_outer.to_string());
        kv("counterexample.nodes_per_octave", ce.nodes_per_octave.to_string());
        kv("counterexample.lambda2", ce.lambda2.to_string());
        kv("counterexample.log2_ratios", list(&ce.log2_ratios));
        kv("counterexample.pointwise_lambda1", list(&ce.pointwise_lambda1));
        kv("cz.level_factor", self.cz.level_factor.to_string());
        kv("cz.q1", self.cz.q1.to_string());
        kv("cz.trials", self.cz.trials.to_string());
        kv("decompose.u_budget", self.decompose.u_budget.to_string());
        if let Some(w) = self.decompose.weight_order {
            kv("decompose.weight_order", w.to_string());
        }
        kv("decompose.tolerance", self.decompose.tolerance.to_string());
        kv("output.dir", self.output.dir.display().to_string());
        kv("output.formats", self.output.formats.iter().map(|f| f.name()).collect::<Vec<_>>().join(" "));
        kv("output.witnesses", self.output.witnesses.to_string());
        s
    }

    /// Checks every invariant of the types the configured experiment will build.
    pub fn validate(&self) -> Result<()> {
        let spec = self.grid_spec()?;
        if !(self.sweep.comparability >= 1.0) {
            return Err(config_err("sweep.comparability", "comparability factor must be at least 1"));
        }
        if self.estimator.budget == 0 {
            return Err(config_err("estimator.budget", "budget must be positive"));
        }
        if self.output.formats.is_empty() {
            return Err(config_err("output.formats", "at least one report format is required"));
        }
        match self.experiment {
            Experiment::NormSweep => {
                let profile = self.exponent_profile()?;
                if self.sweep.lambda.is_empty() {
                    return Err(config_err("sweep.lambda", "sweep needs at least one λ point"));
                }
                for point in &self.sweep.lambda {
                    if point.len() != profile.arity() {
                        return Err(config_err(
                            "sweep.lambda",
                            &format!("point {point:?} has {} entries for arity {}", point.len(), profile.arity()),
                        ));
                    }
                    self.model_params(point.clone())?.validate_against(&spec)?;
                }
                self.filter_bank()?;
            }
            Experiment::Counterexample => {
                let ce = &self.counterexample;
                if spec.dimension() != 1 {
                    return Err(config_err("grid.dimension", "the counterexample is one-dimensional"));
                }
                if !(ce.epsilon > 0.0 && ce.epsilon < 1.0) {
                    return Err(config_err("counterexample.epsilon", "ε must lie in (0, 1)"));
                }
                if ce.log2_ratios.is_empty() {
                    return Err(config_err("counterexample.log2_ratios", "at least one ratio is required"));
                }
                if !(ce.lambda2.is_finite() && ce.lambda2 != 0.0) {
                    return Err(config_err("counterexample.lambda2", "λ₂ must be finite and nonzero"));
                }
                let t_max = 1.0 / ce.epsilon;
                let half = 0.5 * spec.period();
                let widest = ce.lambda2.abs().max(ce.pointwise_lambda1.iter().fold(0.0, |a, l| a.max(l.abs())));
                if widest * t_max > half * (1.0 + 1e-12) {
                    return Err(Error::ScaleWindow(format!(
                        "λ = {widest} at t = 1/ε = {t_max} exceeds half the period {half}"
                    )));
                }
            }
            Experiment::CzDemo => {
                if !(self.cz.level_factor >= 1.0 && self.cz.level_factor.is_finite()) {
                    return Err(config_err("cz.level_factor", "the level must be at least the global average"));
                }
                if !(self.cz.q1 >= 1.0 && self.cz.q1.is_finite()) {
                    return Err(config_err("cz.q1", "q1 must lie in [1, ∞)"));
                }
                if self.cz.trials == 0 {
                    return Err(config_err("cz.trials", "at least one trial is required"));
                }
            }
            Experiment::SymbolDecompose => {
                if self.operator.symbol_file.is_none() {
                    return Err(config_err("operator.symbol_file", "symbol-decompose needs a symbol file"));
                }
                if self.decompose.u_budget == 0 {
                    return Err(config_err("decompose.u_budget", "budget must be positive"));
                }
                self.filter_bank()?;
            }
            Experiment::Selftest => {}
        }
        Ok(())
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.dimension, self.grid.samples, self.grid.period)
    }

    pub fn exponent_profile(&self) -> Result<ExponentProfile> {
        ExponentProfile::new(self.profile.clone())
    }

    pub fn filter_bank(&self) -> Result<FilterBank> {
        let b = &self.bank;
        let n = self.operator.rho.len().max(1);
        build_filter_bank(
            &BumpProfile::annulus(b.psi_inner, b.psi_outer, b.smoothness),
            &BumpProfile::ball(b.phi_plateau, b.phi_outer, b.smoothness),
            n,
            self.grid_spec()?,
            (b.k_min, b.k_max),
        )
    }

    /// Model-operator parameters at `lambda` with `L` constant over the bank window.
    pub fn model_params(&self, lambda: Vec<f64>) -> Result<ModelOperatorParams> {
        let weights = ScaleWeights::discrete_constant(self.bank.k_min, self.bank.k_max, self.operator.weight);
        ModelOperatorParams::new(lambda, self.operator.rho.clone(), weights)
    }

    pub fn estimator_config(&self) -> EstimatorConfig {
        EstimatorConfig { budget: self.estimator.budget, refine_steps: self.estimator.refine_steps, seed: self.seed }
    }
}

fn config_err(key: &str, message: &str) -> Error {
    Error::Config { key: key.into(), message: message.into() }
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| config_err(key, &format!("cannot parse `{}`", v.trim())))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| parse_value(key, t))
        .collect()
}

/// Raw key-value pairs; every key must be consumed before [`Table::finish`].
struct Table {
    entries: BTreeMap<String, String>,
}

impl Table {
    fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for raw in text.lines() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(line, "malformed line, expected `key = value`"))?;
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.') {
                return Err(config_err(key, "malformed key"));
            }
            if entries.insert(key.to_string(), value.trim().to_string()).is_some() {
                return Err(config_err(key, "duplicate key"));
            }
        }
        Ok(Table { entries })
    }

    fn take(&mut self, key: &str) -> Option<String> {
        self.entries.remove(key)
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str, slot: &mut T) -> Result<()> {
        if let Some(v) = self.take(key) {
            *slot = parse_value(key, &v)?;
        }
        Ok(())
    }

    fn list<T: std::str::FromStr>(&mut self, key: &str, slot: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.take(key) {
            *slot = parse_list(key, &v)?;
        }
        Ok(())
    }

    fn finish(self) -> Result<()> {
        match self.entries.into_keys().next() {
            Some(k) => Err(config_err(&k, "unknown key")),
            None => Ok(()),
        }
    }
}
