//! Lower-bound operator-norm estimation, λ sweeps, and the counterexample harness.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::czlab::{make_atom, DyadicCube};
use crate::error::{Error, Result};
use crate::filterbank::{log_bump, Filter, FilterBank, LogQuadrature};
use crate::grid::{GridSpec, SampledFunction, SpectrumFunction, C64};
use crate::norms::{bmo_norm, lp_norm, weak_lp_quasinorm, ExponentProfile};
use crate::operators::{hilbert_transform, ModelOperator, ModelOperatorParams, MultilinearOperator, ScaleWeights, SymbolOperator};
use crate::symbols::{classify_uniformity, Uniformity, DEFAULT_COMPARABILITY};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Alternating refinement sweeps applied to every candidate by default.
pub const DEFAULT_REFINE_STEPS: usize = 6;

/// Output space the ratio is measured in.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Target {
    Lp(f64),
    WeakLp(f64),
    Bmo,
}

impl Target {
    /// `L^p` with the profile's target exponent, or BMO when every slot is `L^∞`.
    pub fn for_profile(profile: &ExponentProfile) -> Self {
        let p = profile.target();
        if p.is_finite() {
            Target::Lp(p)
        } else {
            Target::Bmo
        }
    }

    pub fn norm(&self, f: &SampledFunction) -> Result<f64> {
        match *self {
            Target::Lp(p) => Ok(lp_norm(f, p)),
            Target::WeakLp(p) => weak_lp_quasinorm(f, p),
            Target::Bmo => Ok(bmo_norm(f)),
        }
    }

    pub fn label(&self) -> String {
        match self {
            Target::Lp(p) => format!("L^{p}"),
            Target::WeakLp(p) => format!("L^{p},inf"),
            Target::Bmo => "BMO".into(),
        }
    }

    fn dual_exponent(&self) -> Option<f64> {
        match *self {
            Target::Lp(p) | Target::WeakLp(p) if p.is_finite() => Some(p),
            _ => None,
        }
    }
}

/// Structured input families the search draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Family {
    RandomBand,
    SingleBlock,
    Atom,
    Indicator,
    Tied,
}

impl Family {
    const ALL: [Family; 5] = [Family::RandomBand, Family::SingleBlock, Family::Atom, Family::Indicator, Family::Tied];

    pub fn label(&self) -> &'static str {
        match self {
            Family::RandomBand => "random-band",
            Family::SingleBlock => "single-block",
            Family::Atom => "atom",
            Family::Indicator => "indicator",
            Family::Tied => "tied",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchMeta {
    pub iterations: usize,
    pub refine_steps: usize,
    pub seed: u64,
    /// Family of the winning candidate.
    pub family: Family,
    /// Index of the winning candidate.
    pub candidate: usize,
}

/// A certified lower bound `‖T(w)‖_target / Π ‖w_i‖_{p_i}` with its witness `w`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    pub witness: Vec<SampledFunction>,
    pub profile: ExponentProfile,
    pub target: Target,
    pub meta: SearchMeta,
}

impl NormEstimate {
    /// Re-evaluates the ratio at the stored witness.
    pub fn recompute(&self, op: &dyn MultilinearOperator) -> Result<f64> {
        let refs: Vec<&SampledFunction> = self.witness.iter().collect();
        ratio(op, &self.profile, self.target, &refs)?
            .ok_or_else(|| Error::ZeroEstimate("witness has a zero slot".into()))
    }
}

/// `‖T(f)‖_target / Π ‖f_i‖_{p_i}`, or `None` when some input vanishes.
pub fn ratio(
    op: &dyn MultilinearOperator,
    profile: &ExponentProfile,
    target: Target,
    inputs: &[&SampledFunction],
) -> Result<Option<f64>> {
    let mut denom = 1.0;
    for (f, &p) in inputs.iter().zip(profile.p_list()) {
        let v = lp_norm(f, p);
        if v == 0.0 || !v.is_finite() {
            return Ok(None);
        }
        denom *= v;
    }
    let out = op.apply(inputs)?;
    Ok(Some(target.norm(&out)? / denom))
}

/// Search settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Number of random candidates.
    pub budget: usize,
    /// Alternating refinement sweeps per candidate.
    pub refine_steps: usize,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn new(budget: usize, seed: u64) -> Self {
        EstimatorConfig { budget, refine_steps: DEFAULT_REFINE_STEPS, seed }
    }
}

fn random_spectrum(spec: &GridSpec, rng: &mut ChaCha8Rng, keep: impl Fn([i64; 2]) -> bool, real: bool) -> SampledFunction {
    let coeffs: Vec<C64> = (0..spec.len())
        .map(|j| {
            let k = spec.integer_frequency(j);
            let c = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            if keep(k) {
                c
            } else {
                ZERO
            }
        })
        .collect();
    let f = SpectrumFunction::new(*spec, coeffs).expect("length matches").to_sampled();
    if real {
        f.map(|v| C64::new(v.re, 0.0))
    } else {
        f
    }
}

fn in_band(k: [i64; 2], band: i64) -> bool {
    k[0].abs() < band && k[1].abs() < band
}

/// A ±1 pattern on random runs, smoothed by a narrow Gaussian and band-limited.
fn sign_profile(spec: &GridSpec, band: usize, rng: &mut ChaCha8Rng) -> SampledFunction {
    let n = spec.samples();
    let run = rng.gen_range(1..=(n / 8).max(1));
    let d = spec.dimension();
    let mut signs = vec![1.0; n.pow(d as u32)];
    let flips: Vec<f64> = (0..n.div_ceil(run) + 1).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    let flips2: Vec<f64> = (0..n.div_ceil(run) + 1).map(|_| if rng.gen_bool(0.5) { 1.0 } else { -1.0 }).collect();
    for (j, s) in signs.iter_mut().enumerate() {
        let a = spec.axes(j);
        *s = flips[a[0] / run] * if d == 2 { flips2[a[1] / run] } else { 1.0 };
    }
    let f = SampledFunction::new(*spec, signs.into_iter().map(|s| C64::new(s, 0.0)).collect()).expect("length matches");
    let width = 2.0 * spec.spacing();
    let smooth = Filter::Gaussian { sigma: width }.convolve(&f, 1.0);
    real_band_limit(&smooth, band)
}

fn real_band_limit(f: &SampledFunction, band: usize) -> SampledFunction {
    f.band_limit(band).map(|v| C64::new(v.re, 0.0))
}

fn draw_slot(
    spec: &GridSpec,
    band: usize,
    p: f64,
    family: Family,
    rng: &mut ChaCha8Rng,
) -> SampledFunction {
    if p.is_infinite() {
        return sign_profile(spec, band, rng);
    }
    let b = band as i64;
    match family {
        Family::RandomBand | Family::Tied => random_spectrum(spec, rng, |k| in_band(k, b), family == Family::Tied),
        Family::SingleBlock => {
            let top = (band.max(2) as f64).log2().floor() as u32;
            let j = rng.gen_range(0..top.max(1));
            let (lo, hi) = (1i64 << j, (1i64 << (j + 1)).min(b));
            random_spectrum(
                spec,
                rng,
                |k| {
                    let m = k[0].abs().max(k[1].abs());
                    m >= lo && m < hi
                },
                false,
            )
        }
        Family::Atom => {
            let n = spec.samples();
            let max_level = (n.trailing_zeros()).saturating_sub(2).max(1);
            let level = rng.gen_range(1..=max_level);
            let per = 1usize << level;
            let index = [rng.gen_range(0..per), if spec.dimension() == 2 { rng.gen_range(0..per) } else { 0 }];
            let seed = rng.gen::<u64>();
            match DyadicCube::new(spec, level, index).and_then(|c| make_atom(spec, c, 1.0, seed)) {
                Ok(a) => real_band_limit(&a.values, band),
                Err(_) => random_spectrum(spec, rng, |k| in_band(k, b), true),
            }
        }
        Family::Indicator => {
            let n = spec.samples();
            let len = rng.gen_range(1..=n / 2);
            let start = rng.gen_range(0..n);
            let start2 = rng.gen_range(0..n);
            let d = spec.dimension();
            let vals: Vec<C64> = (0..spec.len())
                .map(|j| {
                    let a = spec.axes(j);
                    let inside0 = (a[0] + n - start) % n < len;
                    let inside1 = d == 1 || (a[1] + n - start2) % n < len;
                    C64::new(if inside0 && inside1 { 1.0 } else { 0.0 }, 0.0)
                })
                .collect();
            let f = SampledFunction::new(*spec, vals).expect("length matches");
            real_band_limit(&f, band)
        }
    }
}

fn draw_candidate(op: &dyn MultilinearOperator, profile: &ExponentProfile, family: Family, rng: &mut ChaCha8Rng) -> Vec<SampledFunction> {
    let spec = *op.spec();
    let band = op.input_band();
    let p = profile.p_list();
    if family == Family::Tied {
        let mut shared: Vec<(f64, SampledFunction)> = Vec::new();
        return p
            .iter()
            .map(|&pi| {
                if let Some((_, f)) = shared.iter().find(|(q, _)| *q == pi) {
                    return f.clone();
                }
                let f = draw_slot(&spec, band, pi, family, rng);
                shared.push((pi, f.clone()));
                f
            })
            .collect();
    }
    p.iter().map(|&pi| draw_slot(&spec, band, pi, family, rng)).collect()
}

/// `|y|^{p−1} y/|y|`, the direction attaining `‖y‖_p` in duality.
fn dual_direction(y: &SampledFunction, p: f64) -> SampledFunction {
    y.map(|v| {
        let m = v.norm();
        if m == 0.0 {
            ZERO
        } else {
            v * (m.powf(p - 1.0) / m)
        }
    })
}

/// Maximizer of `Re⟨f, w⟩` over the unit ball of `L^p`, up to scale, band-limited.
fn primal_direction(w: &SampledFunction, p: f64, band: usize) -> SampledFunction {
    let out = if p.is_infinite() {
        w.map(|v| {
            let m = v.norm();
            if m == 0.0 {
                ZERO
            } else {
                v / m
            }
        })
    } else if p <= 1.0 {
        let (j, _) = w
            .values()
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (j, v)| if v.norm() > acc.1 { (j, v.norm()) } else { acc });
        let mut vals = vec![ZERO; w.values().len()];
        vals[j] = w.values()[j];
        SampledFunction::new(*w.spec(), vals).expect("length matches")
    } else {
        let q = p / (p - 1.0);
        dual_direction(w, q)
    };
    out.band_limit(band)
}

struct Outcome {
    value: f64,
    witness: Vec<SampledFunction>,
}

fn refine(
    op: &dyn MultilinearOperator,
    profile: &ExponentProfile,
    target: Target,
    start: Vec<SampledFunction>,
    steps: usize,
) -> Result<Option<Outcome>> {
    let score = |f: &[SampledFunction]| -> Result<Option<f64>> {
        let refs: Vec<&SampledFunction> = f.iter().collect();
        ratio(op, profile, target, &refs)
    };
    let mut best = score(&start)?.map(|v| Outcome { value: v, witness: start.clone() });
    let Some(q) = target.dual_exponent() else { return Ok(best) };
    let band = op.input_band();
    let mut cur = start;
    for _ in 0..steps {
        for slot in 0..cur.len() {
            let refs: Vec<&SampledFunction> = cur.iter().collect();
            let y = op.apply(&refs)?;
            if y.max_abs() == 0.0 {
                return Ok(best);
            }
            let h = dual_direction(&y, q);
            let w = op.adjoint(slot, &refs, &h)?;
            if w.max_abs() == 0.0 {
                continue;
            }
            let next = primal_direction(&w, profile.p_list()[slot], band);
            let scale = next.max_abs();
            if scale == 0.0 {
                continue;
            }
            cur[slot] = next.scale_real(1.0 / scale);
            if let Some(v) = score(&cur)? {
                if best.as_ref().map_or(true, |b| v > b.value) {
                    best = Some(Outcome { value: v, witness: cur.clone() });
                }
            }
        }
    }
    Ok(best)
}

/// Randomized search with alternating refinement; deterministic for a given seed.
pub fn estimate_operator_norm(
    op: &dyn MultilinearOperator,
    profile: &ExponentProfile,
    target: Target,
    budget: usize,
    seed: u64,
) -> Result<NormEstimate> {
    estimate_with(op, profile, target, &EstimatorConfig::new(budget, seed))
}

pub fn estimate_with(
    op: &dyn MultilinearOperator,
    profile: &ExponentProfile,
    target: Target,
    config: &EstimatorConfig,
) -> Result<NormEstimate> {
    if profile.arity() != op.arity() {
        return Err(Error::Structural(format!(
            "profile has {} exponents for an operator of arity {}",
            profile.arity(),
            op.arity()
        )));
    }
    if config.budget == 0 {
        return Err(Error::Argument("the search budget must be positive".into()));
    }
    let results: Vec<Result<Option<(usize, Outcome)>>> = (0..config.budget)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            let family = Family::ALL[i % Family::ALL.len()];
            let start = draw_candidate(op, profile, family, &mut rng);
            Ok(refine(op, profile, target, start, config.refine_steps)?.map(|o| (i, o)))
        })
        .collect();
    let mut best: Option<(usize, Outcome)> = None;
    for r in results {
        if let Some((i, o)) = r? {
            if best.as_ref().map_or(true, |(_, b)| o.value > b.value) {
                best = Some((i, o));
            }
        }
    }
    match best {
        Some((i, o)) if o.value > 0.0 => Ok(NormEstimate {
            value: o.value,
            witness: o.witness,
            profile: profile.clone(),
            target,
            meta: SearchMeta {
                iterations: config.budget,
                refine_steps: config.refine_steps,
                seed: config.seed,
                family: Family::ALL[i % Family::ALL.len()],
                candidate: i,
            },
        }),
        _ => Err(Error::ZeroEstimate("every candidate input lies in the kernel of the operator".into())),
    }
}

/// One sweep point.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub estimate: NormEstimate,
    pub gamma: f64,
    pub classification: Uniformity,
    /// `‖f·H(g)‖_p / (‖f‖_p ‖g‖_∞)` at the row's witness, for counterexample runs.
    pub limit_value: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<SweepRow>,
    /// `max estimate / min estimate`.
    pub uniformity_ratio: f64,
    /// Classification at the row with the largest `max|λ| / min|λ|`.
    pub classification: Uniformity,
    pub profile: ExponentProfile,
    pub target: Target,
}

impl SweepReport {
    pub fn new(rows: Vec<SweepRow>, profile: ExponentProfile, target: Target) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Validation("a sweep report needs at least one row".into()));
        }
        let max = rows.iter().map(|r| r.estimate.value).fold(0.0, f64::max);
        let min = rows.iter().map(|r| r.estimate.value).fold(f64::INFINITY, f64::min);
        let spread = |l: &[f64]| {
            let a = l.iter().map(|v| v.abs()).fold(0.0, f64::max);
            let b = l.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
            a / b
        };
        let extreme = rows
            .iter()
            .enumerate()
            .max_by(|a, b| spread(&a.1.lambda).total_cmp(&spread(&b.1.lambda)).then(b.0.cmp(&a.0)))
            .map(|(_, r)| r.classification)
            .unwrap_or(Uniformity::Unknown);
        Ok(SweepReport { uniformity_ratio: max / min, rows, classification: extreme, profile, target })
    }
}

/// Estimates the norm of the model operator `template` with `λ` replaced by each grid point,
/// all points sharing the same seed.
pub fn lambda_sweep_operator(
    template: &ModelOperator,
    spec: GridSpec,
    profile: &ExponentProfile,
    target: Target,
    lambda_grid: &[Vec<f64>],
    config: &EstimatorConfig,
) -> Result<SweepReport> {
    let rows: Vec<Result<SweepRow>> = lambda_grid
        .par_iter()
        .map(|lambda| {
            let mut params = template.params.clone();
            params.lambda = lambda.clone();
            params.validate_against(&spec)?;
            let op = ModelOperator::new(params.clone(), template.psi.clone(), template.phis.clone())?;
            let band = SymbolOperator::band_for(&spec, params.n);
            let sym = SymbolOperator::new(op.symbol_grid(spec, Some(band))?);
            let estimate = estimate_with(&sym, profile, target, config)?;
            let u = classify_uniformity(lambda, profile, DEFAULT_COMPARABILITY)?;
            Ok(SweepRow {
                lambda: lambda.clone(),
                rho: params.rho.clone(),
                estimate,
                gamma: u.gamma,
                classification: u.class,
                limit_value: None,
            })
        })
        .collect();
    SweepReport::new(rows.into_iter().collect::<Result<Vec<_>>>()?, profile.clone(), target)
}

/// [`lambda_sweep_operator`] with `Ψ` and `Φ^i` taken from a bank.
pub fn lambda_sweep(
    template: &ModelOperatorParams,
    bank: &FilterBank,
    profile: &ExponentProfile,
    lambda_grid: &[Vec<f64>],
    config: &EstimatorConfig,
) -> Result<SweepReport> {
    if bank.phis.len() < template.n {
        return Err(Error::Validation(format!("bank has {} Φ filters for arity {}", bank.phis.len(), template.n)));
    }
    let op = ModelOperator { params: template.clone(), psi: bank.psi.clone(), phis: bank.phis[..template.n].to_vec() };
    lambda_sweep_operator(&op, bank.spec, profile, Target::for_profile(profile), lambda_grid, config)
}

/// Settings for the counterexample operators `U_{ε,λ}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CounterexampleConfig {
    pub spec: GridSpec,
    /// Width of the Gaussian `ζ` (nonnegative, unit mass).
    pub zeta_sigma: f64,
    /// Log-annulus `[r0, r1]` carrying `Ψ̂`.
    pub psi_r0: f64,
    pub psi_r1: f64,
    pub nodes_per_octave: usize,
    /// Exponent `p` of `L^p × L^∞ → L^p`.
    pub p: f64,
    pub estimator: EstimatorConfig,
}

impl CounterexampleConfig {
    pub fn new(spec: GridSpec, budget: usize, seed: u64) -> Self {
        CounterexampleConfig {
            spec,
            zeta_sigma: 1.0,
            psi_r0: 0.5,
            psi_r1: 2.0,
            nodes_per_octave: 8,
            p: 2.0,
            estimator: EstimatorConfig::new(budget, seed),
        }
    }
}

/// `Ψ̂ = a · sign(ξ) · bump` with `a` fixed so `∫_0^∞ Ψ̂(s) ζ̂(s) ds/s = −i`, making the
/// `λ₁ → 0`, `ε → 0` limit of `U_{ε,λ}(f, g)` equal to `f · H(g)`.
pub fn counterexample_filters(config: &CounterexampleConfig) -> Result<(Filter, Filter)> {
    let zeta = Filter::gaussian(config.zeta_sigma)?;
    let (r0, r1) = (config.psi_r0, config.psi_r1);
    if !(r0 > 0.0 && r1 > r0) {
        return Err(Error::Construction(format!("Ψ annulus [{r0}, {r1}] is empty")));
    }
    let nodes = 1 << 14;
    let (a, b) = (r0.ln(), r1.ln());
    let h = (b - a) / nodes as f64;
    let mut integral = 0.0;
    for j in 1..nodes {
        let s = (a + j as f64 * h).exp();
        let x = ((s.log2() - 0.5 * (r0.log2() + r1.log2())) / (0.5 * (r1.log2() - r0.log2()))).clamp(-1.0, 1.0);
        integral += log_bump(x) * zeta.eval(&[s]).re * h;
    }
    let psi = Filter::signed_bump(r0, r1, C64::new(0.0, -1.0 / integral))?;
    Ok((psi, zeta))
}

/// The operator `U_{ε,λ}` with `ρ = (1, 1)` and unit weight on `t ∈ [ε, 1/ε]`.
pub fn counterexample_operator(epsilon: f64, lambda: [f64; 2], config: &CounterexampleConfig) -> Result<ModelOperator> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::Argument(format!("ε = {epsilon} must lie in (0, 1)")));
    }
    if config.spec.dimension() != 1 {
        return Err(Error::Unsupported("the counterexample is one-dimensional".into()));
    }
    let (psi, zeta) = counterexample_filters(config)?;
    let q = LogQuadrature::new(epsilon, 1.0 / epsilon, config.nodes_per_octave)?;
    let params = ModelOperatorParams::new(lambda.to_vec(), vec![1.0, 1.0], ScaleWeights::continuous_fn(q, |_| 1.0))?;
    params.validate_against(&config.spec)?;
    ModelOperator::new(params, psi, vec![zeta.clone(), zeta])
}

/// `‖f·H(g)‖_p / (‖f‖_p ‖g‖_∞)`.
pub fn hilbert_limit_ratio(f: &SampledFunction, g: &SampledFunction, p: f64) -> Result<f64> {
    let fh = f.mul(&hilbert_transform(g)?)?;
    Ok(lp_norm(&fh, p) / (lp_norm(f, p) * lp_norm(g, f64::INFINITY)))
}

/// Norm estimates of `U_{ε,λ}` from `L^p × L^∞` to `L^p` per `(λ₁, λ₂)` pair, each row also
/// carrying the analytic-limit ratio at its own witness.
pub fn counterexample_run(
    epsilon: f64,
    lambda_pairs: &[(f64, f64)],
    config: &CounterexampleConfig,
) -> Result<SweepReport> {
    let profile = ExponentProfile::new(vec![config.p, f64::INFINITY])?;
    let target = Target::Lp(config.p);
    let spec = config.spec;
    let rows: Vec<Result<SweepRow>> = lambda_pairs
        .par_iter()
        .map(|&(l1, l2)| {
            let op = counterexample_operator(epsilon, [l1, l2], config)?;
            let band = SymbolOperator::band_for(&spec, 2);
            let sym = SymbolOperator::new(op.symbol_grid(spec, Some(band))?);
            let estimate = estimate_with(&sym, &profile, target, &config.estimator)?;
            let limit = hilbert_limit_ratio(&estimate.witness[0], &estimate.witness[1], config.p)?;
            let u = classify_uniformity(&[l1, l2], &profile, DEFAULT_COMPARABILITY)?;
            Ok(SweepRow {
                lambda: vec![l1, l2],
                rho: vec![1.0, 1.0],
                estimate,
                gamma: u.gamma,
                classification: u.class,
                limit_value: Some(limit),
            })
        })
        .collect();
    SweepReport::new(rows.into_iter().collect::<Result<Vec<_>>>()?, profile, target)
}

/// `max_x |U_{ε,λ}(f, g)(x) − f(x) H(g)(x)|` for each `λ₁` at fixed `λ₂`.
pub fn counterexample_pointwise_gap(
    epsilon: f64,
    lambda1: &[f64],
    lambda2: f64,
    f: &SampledFunction,
    g: &SampledFunction,
    config: &CounterexampleConfig,
) -> Result<Vec<f64>> {
    let limit = f.mul(&hilbert_transform(g)?)?;
    lambda1
        .iter()
        .map(|&l1| {
            let op = counterexample_operator(epsilon, [l1, lambda2], config)?;
            Ok(op.apply(&[f, g])?.max_diff(&limit))
        })
        .collect()
}
