//! Symbol-class checks, the γ exponent with its uniformity classifier, and the
//! decomposition of a multiplier into translated paraproduct pieces.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{smooth_step, Filter, FilterBank};
use crate::grid::{fft_1d, GridSpec, SampledFunction, SpectrumFunction, C64};
use crate::norms::ExponentProfile;
use crate::operators::SymbolGrid;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Highest derivative order the central-difference stencils support.
pub const MAX_STABLE_ORDER: usize = 3;

/// Default factor `c` in `|λ_j| ≃ max |λ_l|`, read as `c |λ_j| ≥ max |λ_l|`.
pub const DEFAULT_COMPARABILITY: f64 = 2.0;

/// Number of largest violations kept in a report.
pub const REPORTED_VIOLATIONS: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolClass {
    /// `|∂^m σ| ≤ C (Σ |ξ_i|)^{−|m|}`.
    Hormander,
    /// `|∂^m σ| ≤ C Π |λ_i|^{|m_i|} d_λ(ξ)^{−|m|}`.
    LambdaMarcinkiewicz,
    /// `|∂^m σ| ≤ C Π |ξ_i|^{−|m_i|}`.
    Marcinkiewicz,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub xi: Vec<f64>,
    /// Derivative order per slot and axis, slot-major.
    pub order: Vec<usize>,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SymbolClassReport {
    pub class: SymbolClass,
    pub max_orders: Vec<usize>,
    /// Largest `|∂^m σ| / bound` over every tested point and order.
    pub best_constant: f64,
    pub points_tested: usize,
    /// Number of (point, order) pairs with ratio above 1.
    pub violation_count: usize,
    /// The largest violations, in decreasing ratio.
    pub violations: Vec<Violation>,
}

fn stencil(order: usize) -> &'static [(i64, f64)] {
    match order {
        0 => &[(0, 1.0)],
        1 => &[(-1, -0.5), (1, 0.5)],
        2 => &[(-1, 1.0), (0, -2.0), (1, 1.0)],
        _ => &[(-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)],
    }
}

fn stencil_reach(order: usize) -> i64 {
    match order {
        0 => 0,
        1 | 2 => 1,
        _ => 2,
    }
}

fn band_ok(spec: &GridSpec, k: i64, band: i64) -> bool {
    let h = spec.samples() as i64 / 2;
    (-h..h).contains(&k) && k.abs() < band
}

/// Flat symbol index of integer frequencies given slot-major per axis.
fn symbol_index(sigma: &SymbolGrid, ks: &[i64]) -> usize {
    let spec = sigma.spec();
    let d = spec.dimension();
    let slots: Vec<usize> = ks
        .chunks(d)
        .map(|k| spec.flat([spec.fold_index(k[0]), spec.fold_index(if d == 2 { k[1] } else { 0 })]))
        .collect();
    sigma.flat_index(&slots)
}

fn integer_frequencies(sigma: &SymbolGrid, flat: usize) -> Vec<i64> {
    let spec = sigma.spec();
    let d = spec.dimension();
    sigma.slot_indices(flat).iter().flat_map(|&j| spec.integer_frequency(j)[..d].to_vec()).collect()
}

/// Central finite difference `∂^order σ` at integer frequencies `ks` (slot-major per axis),
/// or `None` when the stencil leaves `[−N/2, N/2)` or the optional band.
pub fn finite_difference(sigma: &SymbolGrid, ks: &[i64], order: &[usize], band: Option<usize>) -> Option<C64> {
    let spec = sigma.spec();
    let band = band.map(|b| b as i64).unwrap_or(i64::MAX);
    for (&k, &o) in ks.iter().zip(order) {
        let r = stencil_reach(o);
        if !band_ok(spec, k - r, band) || !band_ok(spec, k + r, band) {
            return None;
        }
    }
    let h = spec.fundamental();
    let total: usize = order.iter().sum();
    let mut acc = ZERO;
    let mut pos = vec![0usize; ks.len()];
    let mut point = ks.to_vec();
    loop {
        let mut coeff = 1.0;
        for a in 0..ks.len() {
            let (off, c) = stencil(order[a])[pos[a]];
            point[a] = ks[a] + off;
            coeff *= c;
        }
        acc += sigma.values()[symbol_index(sigma, &point)] * coeff;
        let mut a = ks.len();
        loop {
            if a == 0 {
                return Some(acc / h.powi(total as i32));
            }
            a -= 1;
            pos[a] += 1;
            if pos[a] < stencil(order[a]).len() {
                break;
            }
            pos[a] = 0;
        }
    }
}

fn order_vectors(n: usize, d: usize, max_order: usize) -> Vec<Vec<usize>> {
    let axes = n * d;
    let mut out = Vec::new();
    let mut cur = vec![0usize; axes];
    loop {
        if cur.chunks(d).all(|c| c.iter().sum::<usize>() <= max_order) {
            out.push(cur.clone());
        }
        let mut a = axes;
        loop {
            if a == 0 {
                return out;
            }
            a -= 1;
            cur[a] += 1;
            if cur[a] <= max_order {
                break;
            }
            cur[a] = 0;
        }
    }
}

#[derive(Default)]
struct Acc {
    best: f64,
    tested: usize,
    count: usize,
    top: Vec<Violation>,
}

impl Acc {
    fn trim(&mut self) {
        self.top.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
        self.top.truncate(REPORTED_VIOLATIONS);
    }

    fn merge(mut self, other: Acc) -> Acc {
        self.best = self.best.max(other.best);
        self.tested += other.tested;
        self.count += other.count;
        self.top.extend(other.top);
        self.trim();
        self
    }
}

/// Checks a symbol class with central differences of per-slot order up to `max_order`.
pub fn check_symbol_class(sigma: &SymbolGrid, class: SymbolClass, max_order: usize) -> Result<SymbolClassReport> {
    check_symbol_class_in_band(sigma, class, max_order, None)
}

/// As [`check_symbol_class`], testing only points whose stencils stay within `|k| < band`.
pub fn check_symbol_class_in_band(
    sigma: &SymbolGrid,
    class: SymbolClass,
    max_order: usize,
    band: Option<usize>,
) -> Result<SymbolClassReport> {
    if max_order > MAX_STABLE_ORDER {
        return Err(Error::Stability(format!(
            "derivative order {max_order} exceeds the stable finite-difference order {MAX_STABLE_ORDER}"
        )));
    }
    let spec = *sigma.spec();
    if spec.samples() < 4 * (max_order + 1) {
        return Err(Error::Stability(format!(
            "{} samples per axis cannot resolve derivatives of order {max_order}",
            spec.samples()
        )));
    }
    let n = sigma.arity();
    let d = spec.dimension();
    let w0 = spec.fundamental();
    let orders = order_vectors(n, d, max_order);
    let lambda = sigma.lambda().to_vec();
    let acc = (0..sigma.values().len())
        .into_par_iter()
        .fold(Acc::default, |mut acc, flat| {
            let ks = integer_frequencies(sigma, flat);
            let mags: Vec<f64> = ks
                .chunks(d)
                .map(|k| w0 * k.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt())
                .collect();
            let plain: f64 = mags.iter().sum();
            let d_lambda: f64 = mags.iter().zip(&lambda).map(|(m, l)| m * l.abs()).sum();
            for order in &orders {
                let per_slot: Vec<usize> = order.chunks(d).map(|c| c.iter().sum()).collect();
                let total: usize = per_slot.iter().sum();
                let bound = match class {
                    _ if total == 0 => 1.0,
                    SymbolClass::Hormander => plain.powi(-(total as i32)),
                    SymbolClass::LambdaMarcinkiewicz => {
                        let num: f64 = lambda.iter().zip(&per_slot).map(|(l, &m)| l.abs().powi(m as i32)).product();
                        num * d_lambda.powi(-(total as i32))
                    }
                    SymbolClass::Marcinkiewicz => {
                        mags.iter().zip(&per_slot).map(|(x, &m)| x.powi(-(m as i32))).product()
                    }
                };
                if !bound.is_finite() {
                    continue;
                }
                let Some(dv) = finite_difference(sigma, &ks, order, band) else { continue };
                let ratio = dv.norm() / bound;
                acc.tested += 1;
                acc.best = acc.best.max(ratio);
                if ratio > 1.0 {
                    acc.count += 1;
                    acc.top.push(Violation {
                        xi: ks.iter().map(|&k| k as f64 * w0).collect(),
                        order: order.clone(),
                        ratio,
                    });
                    if acc.top.len() > 4 * REPORTED_VIOLATIONS {
                        acc.trim();
                    }
                }
            }
            acc
        })
        .reduce(Acc::default, Acc::merge);
    let mut acc = acc;
    acc.trim();
    Ok(SymbolClassReport {
        class,
        max_orders: vec![max_order; n],
        best_constant: acc.best,
        points_tested: acc.tested,
        violation_count: acc.count,
        violations: acc.top,
    })
}

/// `γ = Σ 1/p_j` over slots with `factor · |λ_j| ≥ max_l |λ_l|`.
pub fn gamma_exponent(lambda: &[f64], profile: &ExponentProfile, factor: f64) -> Result<f64> {
    if lambda.len() != profile.arity() {
        return Err(Error::Structural(format!("{} λ values for {} exponents", lambda.len(), profile.arity())));
    }
    if lambda.iter().any(|l| *l == 0.0 || !l.is_finite()) {
        return Err(Error::Validation("every λ_i must be finite and nonzero".into()));
    }
    if !(factor >= 1.0) {
        return Err(Error::Argument(format!("comparability factor {factor} must be at least 1")));
    }
    let max = lambda.iter().map(|l| l.abs()).fold(0.0, f64::max);
    Ok(lambda
        .iter()
        .zip(profile.p_list())
        .filter(|(l, _)| factor * l.abs() >= max)
        .map(|(_, p)| if p.is_infinite() { 0.0 } else { 1.0 / p })
        .sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Uniformity {
    UniformA,
    UniformB,
    Nonuniform,
    Unknown,
}

impl Uniformity {
    pub fn label(&self) -> &'static str {
        match self {
            Uniformity::UniformA => "uniform_a",
            Uniformity::UniformB => "uniform_b",
            Uniformity::Nonuniform => "nonuniform",
            Uniformity::Unknown => "unknown",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct UniformityReport {
    pub class: Uniformity,
    pub gamma: f64,
    /// `max |λ| / min |λ|`, attached when no uniform bound is predicted.
    pub ratio: Option<f64>,
}

pub fn classify_uniformity(lambda: &[f64], profile: &ExponentProfile, factor: f64) -> Result<UniformityReport> {
    let gamma = gamma_exponent(lambda, profile, factor)?;
    let class = if profile.p_list().iter().all(|p| p.is_finite()) {
        Uniformity::UniformA
    } else if gamma >= 0.5 {
        Uniformity::UniformB
    } else if profile.target().is_finite() && gamma == 0.0 {
        Uniformity::Nonuniform
    } else {
        Uniformity::Unknown
    };
    let ratio = match class {
        Uniformity::UniformA | Uniformity::UniformB => None,
        _ => {
            let max = lambda.iter().map(|l| l.abs()).fold(0.0, f64::max);
            let min = lambda.iter().map(|l| l.abs()).fold(f64::INFINITY, f64::min);
            Some(max / min)
        }
    };
    Ok(UniformityReport { class, gamma, ratio })
}

/// Homogeneous cone cutoffs `ζ_l(ξ)`, supported where `2n |λ_l ξ_l| ≥ d_λ(ξ)` and summing to 1
/// away from the origin; all zero at the origin.
pub fn cone_cutoffs(lambda: &[f64], xis: &[[f64; 2]], d: usize) -> Vec<f64> {
    let n = lambda.len();
    let a: Vec<f64> = xis
        .iter()
        .zip(lambda)
        .map(|(x, l)| l.abs() * x[..d].iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    let total: f64 = a.iter().sum();
    if total == 0.0 {
        return vec![0.0; n];
    }
    let raw: Vec<f64> = a.iter().map(|v| smooth_step(2.0 * n as f64 * v / total - 1.0)).collect();
    let s: f64 = raw.iter().sum();
    raw.iter().map(|v| v / s).collect()
}

/// One translated paraproduct: scale `2^k`, large slot `l`, Fourier node `u` of `σ_{l,k}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ParaproductPiece {
    pub l: usize,
    pub k: i32,
    /// Node `u ∈ ℝ^{dn}`, slot-major.
    pub u: Vec<f64>,
    /// Integer DFT mode of `u` on the block's sample box.
    pub modes: Vec<i64>,
    /// The coefficient `L(l,k,u) / (1+|u|²)^N`.
    pub weight: C64,
    /// `L(l,k,u)`.
    pub l_value: C64,
}

/// Per-(l,k) bookkeeping of a decomposition.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BlockSummary {
    pub l: usize,
    pub k: i32,
    /// Largest `|k|` per slot of the sample box.
    pub box_radius: Vec<usize>,
    pub total_modes: usize,
    pub retained: usize,
    /// `Σ |weight|` over dropped nodes.
    pub tail_mass: f64,
    /// `Σ |weight|²` over dropped and over all nodes.
    pub tail_energy: f64,
    pub energy: f64,
    /// `2^{N−1} (‖σ_{l,k}‖₁ + (π²/4)^N ‖Δ^N σ_{l,k}‖₁)`, normalized by the box size.
    pub l_bound: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Decomposition {
    pub spec: GridSpec,
    pub lambda: Vec<f64>,
    pub weight_order: usize,
    pub u_budget: usize,
    pub psi: Filter,
    pub phi: Filter,
    /// Smallest Φ̂ plateau radius the cone construction needs, `2n r1(Ψ)`.
    pub plateau_required: f64,
    pub pieces: Vec<ParaproductPiece>,
    pub blocks: Vec<BlockSummary>,
    pub tail_mass: f64,
    /// Relative ℓ² error of the truncated `σ_{l,k}` expansions, summed over blocks.
    pub relative_residual: f64,
    pub l_sup: f64,
    pub warning: Option<String>,
}

/// Residual above which a decomposition carries a warning.
pub const RESIDUAL_WARNING: f64 = 1e-3;

/// Nodes kept per `(l, k)` block when the caller does not choose.
pub const DEFAULT_U_BUDGET: usize = 16384;

/// The `(1+|u|²)^N` order used when none is given: `d n + 2`.
pub fn default_weight_order(d: usize, n: usize) -> usize {
    d * n + 2
}

fn fft_box(data: &mut [C64], dims: &[usize], inverse: bool) {
    let total = data.len();
    let mut stride = total;
    let mut line = Vec::new();
    for &m in dims {
        stride /= m;
        if m == 1 {
            continue;
        }
        line.resize(m, ZERO);
        let block = m * stride;
        for outer in (0..total).step_by(block) {
            for inner in 0..stride {
                for (q, v) in line.iter_mut().enumerate() {
                    *v = data[outer + inner + q * stride];
                }
                fft_1d(&mut line, inverse);
                for (q, v) in line.iter().enumerate() {
                    data[outer + inner + q * stride] = *v;
                }
            }
        }
    }
}

fn periodic_laplacian(data: &[C64], dims: &[usize], spacing: &[f64]) -> Vec<C64> {
    let total = data.len();
    let mut out = vec![ZERO; total];
    let mut stride = total;
    for (&m, &h) in dims.iter().zip(spacing) {
        stride /= m;
        let inv = 1.0 / (h * h);
        for (idx, o) in out.iter_mut().enumerate() {
            let q = (idx / stride) % m;
            let base = idx - q * stride;
            let up = base + ((q + 1) % m) * stride;
            let down = base + ((q + m - 1) % m) * stride;
            *o += (data[up] + data[down] - data[idx] * 2.0) * inv;
        }
    }
    out
}

struct Block {
    summary: BlockSummary,
    pieces: Vec<ParaproductPiece>,
}

fn signed_mode(q: usize, m: usize) -> i64 {
    if q <= m / 2 {
        q as i64
    } else {
        q as i64 - m as i64
    }
}

/// Scale `2^k` dilation per slot: `η_j = 2^k λ_j ξ_j`.
fn block_scales(lambda: &[f64], k: i32) -> Vec<f64> {
    lambda.iter().map(|l| (k as f64).exp2() * l).collect()
}

fn box_radii(spec: &GridSpec, scales: &[f64], radii: &[f64]) -> Vec<usize> {
    let cap = spec.samples() / 2 - 1;
    scales
        .iter()
        .zip(radii)
        .map(|(s, r)| ((r / (s.abs() * spec.fundamental())).floor() as usize).min(cap))
        .collect()
}

fn build_block(
    sigma: &SymbolGrid,
    lambda: &[f64],
    psi: &Filter,
    phi: &Filter,
    l: usize,
    k: i32,
    radii: &[f64],
    weight_order: usize,
    u_budget: usize,
) -> Option<Block> {
    let spec = *sigma.spec();
    let d = spec.dimension();
    let n = lambda.len();
    let w0 = spec.fundamental();
    let scales = block_scales(lambda, k);
    let kr = box_radii(&spec, &scales, radii);
    let dims: Vec<usize> = kr.iter().flat_map(|&r| vec![2 * r + 1; d]).collect();
    let spacing: Vec<f64> = scales.iter().flat_map(|s| vec![s.abs() * w0; d]).collect();
    let total: usize = dims.iter().product();
    let mut data = vec![ZERO; total];
    let mut ks = vec![0i64; n * d];
    let mut any = false;
    for (idx, slot) in data.iter_mut().enumerate() {
        let mut r = idx;
        for a in (0..n * d).rev() {
            let m = dims[a];
            let q = r % m;
            r /= m;
            ks[a] = q as i64 - kr[a / d] as i64;
        }
        let value = sample_sigma_lk(sigma, lambda, psi, phi, l, &scales, &ks);
        if value != ZERO {
            any = true;
        }
        *slot = value;
    }
    if !any {
        return None;
    }
    // Re-home samples so array position q holds frequency q mod M along each axis.
    let mut folded = vec![ZERO; total];
    for (idx, v) in data.iter().enumerate() {
        let mut r = idx;
        let mut target = 0usize;
        let mut mult = 1usize;
        for a in (0..n * d).rev() {
            let m = dims[a];
            let q = (r % m) as i64 - kr[a / d] as i64;
            r /= m;
            target += (q.rem_euclid(m as i64) as usize) * mult;
            mult *= m;
        }
        folded[target] = *v;
    }
    let norm1: f64 = folded.iter().map(|v| v.norm()).sum::<f64>() / total as f64;
    let mut lap = folded.clone();
    for _ in 0..weight_order {
        lap = periodic_laplacian(&lap, &dims, &spacing);
    }
    let norm_lap: f64 = lap.iter().map(|v| v.norm()).sum::<f64>() / total as f64;
    let big_n = weight_order as i32;
    let l_bound = 2f64.powi(big_n - 1)
        * (norm1 + (std::f64::consts::PI.powi(2) / 4.0).powi(big_n) * norm_lap);
    fft_box(&mut folded, &dims, false);
    let inv = 1.0 / total as f64;
    let mut coeffs: Vec<(usize, C64)> =
        folded.iter().enumerate().map(|(j, c)| (j, c * inv)).filter(|(_, c)| *c != ZERO).collect();
    coeffs.sort_by(|a, b| b.1.norm().total_cmp(&a.1.norm()).then(a.0.cmp(&b.0)));
    let energy: f64 = coeffs.iter().map(|(_, c)| c.norm_sqr()).sum();
    let keep = coeffs.len().min(u_budget);
    let tail_mass: f64 = coeffs[keep..].iter().map(|(_, c)| c.norm()).sum();
    let tail_energy: f64 = coeffs[keep..].iter().map(|(_, c)| c.norm_sqr()).sum();
    let pieces = coeffs[..keep]
        .iter()
        .map(|&(j, c)| {
            let mut r = j;
            let mut modes = vec![0i64; n * d];
            for a in (0..n * d).rev() {
                modes[a] = signed_mode(r % dims[a], dims[a]);
                r /= dims[a];
            }
            let u: Vec<f64> = modes
                .iter()
                .enumerate()
                .map(|(a, &m)| 2.0 * std::f64::consts::PI * m as f64 / (dims[a] as f64 * scales[a / d] * w0))
                .collect();
            let u2: f64 = u.iter().map(|v| v * v).sum();
            ParaproductPiece { l, k, u, modes, weight: c, l_value: c * (1.0 + u2).powi(big_n) }
        })
        .collect();
    Some(Block {
        summary: BlockSummary {
            l,
            k,
            box_radius: kr,
            total_modes: coeffs.len(),
            retained: keep,
            tail_mass,
            tail_energy,
            energy,
            l_bound,
        },
        pieces,
    })
}

/// `σ_{l,k}` at the box sample with integer frequencies `ks`:
/// `σ(ξ) ζ_l(ξ) Ψ̂(2^k λ_l ξ_l) Π_{j≠l} Φ̂(2^k λ_j ξ_j)`.
pub fn sample_sigma_lk(
    sigma: &SymbolGrid,
    lambda: &[f64],
    psi: &Filter,
    phi: &Filter,
    l: usize,
    scales: &[f64],
    ks: &[i64],
) -> C64 {
    let spec = sigma.spec();
    let d = spec.dimension();
    let w0 = spec.fundamental();
    let xis: Vec<[f64; 2]> = ks
        .chunks(d)
        .map(|k| [k[0] as f64 * w0, if d == 2 { k[1] as f64 * w0 } else { 0.0 }])
        .collect();
    let zeta = cone_cutoffs(lambda, &xis, d)[l];
    if zeta == 0.0 {
        return ZERO;
    }
    let mut v = C64::new(zeta, 0.0);
    for (j, x) in xis.iter().enumerate() {
        let eta = [scales[j] * x[0], scales[j] * x[1]];
        let f = if j == l { psi } else { phi };
        v *= f.eval(&eta[..d]);
        if v == ZERO {
            return ZERO;
        }
    }
    v * sigma.values()[symbol_index(sigma, ks)]
}

/// Range of `k` for which `Ψ̂(2^k λ_l ξ)` meets a nonzero grid frequency.
fn scale_range(spec: &GridSpec, psi: &Filter, lambda_l: f64) -> (i32, i32) {
    let d = spec.dimension() as f64;
    let top = spec.nyquist() * d.sqrt();
    let lo = (psi.inner_radius() / (lambda_l.abs() * top)).log2().floor() as i32;
    let hi = (psi.support_radius() / (lambda_l.abs() * spec.fundamental())).log2().ceil() as i32;
    (lo, hi)
}

/// Decomposes `σ` into translated paraproduct pieces with the bank's Ψ and its first Φ,
/// keeping the `u_budget` largest nodes per `(l, k)`.
pub fn decompose_multiplier(
    sigma: &SymbolGrid,
    lambda: &[f64],
    bank: &FilterBank,
    weight_order: usize,
    u_budget: usize,
) -> Result<Decomposition> {
    let spec = *sigma.spec();
    let n = sigma.arity();
    let d = spec.dimension();
    if lambda.len() != n {
        return Err(Error::Structural(format!("{} λ values for a symbol of arity {n}", lambda.len())));
    }
    if lambda.iter().any(|l| *l == 0.0 || !l.is_finite()) {
        return Err(Error::Validation("every λ_i must be finite and nonzero".into()));
    }
    if bank.spec != spec {
        return Err(Error::Structural("bank and symbol live on different grids".into()));
    }
    if weight_order == 0 {
        return Err(Error::Argument("the weight order N must be positive".into()));
    }
    let psi = bank.psi.clone();
    let phi = bank.phis.first().cloned().ok_or_else(|| Error::Construction("bank has no Φ filter".into()))?;
    let r1 = psi.support_radius();
    let plateau_required = 2.0 * n as f64 * r1;
    match phi {
        Filter::Ball { plateau, .. } if plateau >= plateau_required => {}
        Filter::Ball { plateau, .. } => {
            return Err(Error::Construction(format!(
                "Φ̂ plateau {plateau} is below the required 2n·r1 = {plateau_required}"
            )))
        }
        _ => return Err(Error::Construction("the decomposition needs a ball-profile Φ".into())),
    }
    let report = check_symbol_class(sigma, SymbolClass::LambdaMarcinkiewicz, 1)?;
    if !report.best_constant.is_finite() {
        return Err(Error::Refusal("the symbol has no finite λ-Marcinkiewicz constant".into()));
    }
    let mut jobs = Vec::new();
    for l in 0..n {
        let (lo, hi) = scale_range(&spec, &psi, lambda[l]);
        for k in lo..=hi {
            jobs.push((l, k));
        }
    }
    let radii: Vec<Vec<f64>> =
        (0..n).map(|l| (0..n).map(|j| if j == l { r1 } else { plateau_required }).collect()).collect();
    let blocks: Vec<Block> = jobs
        .par_iter()
        .filter_map(|&(l, k)| build_block(sigma, lambda, &psi, &phi, l, k, &radii[l], weight_order, u_budget))
        .collect();
    let mut pieces = Vec::new();
    let mut summaries = Vec::new();
    let (mut tail, mut tail_e, mut energy) = (0.0, 0.0, 0.0);
    for b in blocks {
        let m: f64 = b.summary.box_radius.iter().map(|&r| ((2 * r + 1) as f64).powi(d as i32)).product();
        tail += b.summary.tail_mass;
        tail_e += b.summary.tail_energy * m;
        energy += b.summary.energy * m;
        pieces.extend(b.pieces);
        summaries.push(b.summary);
    }
    let relative_residual = if energy > 0.0 { (tail_e / energy).sqrt() } else { 0.0 };
    let l_sup = pieces.iter().map(|p| p.l_value.norm()).fold(0.0, f64::max);
    let warning = (relative_residual > RESIDUAL_WARNING).then(|| {
        format!("truncated expansion leaves relative residual {relative_residual:.3e} above {RESIDUAL_WARNING:e}")
    });
    Ok(Decomposition {
        spec,
        lambda: lambda.to_vec(),
        weight_order,
        u_budget,
        psi,
        phi,
        plateau_required,
        pieces,
        blocks: summaries,
        tail_mass: tail,
        relative_residual,
        l_sup,
        warning,
    })
}

/// Evaluates `Σ weight · [(τ_{u_l}Ψ)_{λ_l 2^k} ∗ f_l] Π_{j≠l} [(τ_{u_j}Φ)_{λ_j 2^k} ∗ f_j]` over all pieces.
pub fn apply_decomposition(dec: &Decomposition, f: &[&SampledFunction]) -> Result<SampledFunction> {
    let spec = dec.spec;
    let n = dec.lambda.len();
    let d = spec.dimension();
    if f.len() != n {
        return Err(Error::Structural(format!("decomposition has {n} slots, got {} inputs", f.len())));
    }
    if f.iter().any(|g| *g.spec() != spec) {
        return Err(Error::Structural("inputs live on a different grid than the decomposition".into()));
    }
    let hats: Vec<SpectrumFunction> = f.iter().map(|g| g.spectrum()).collect();
    let results: Vec<Vec<C64>> = dec
        .blocks
        .par_iter()
        .map(|b| {
            let scales = block_scales(&dec.lambda, b.k);
            let base: Vec<SpectrumFunction> = (0..n)
                .map(|j| {
                    let r = b.box_radius[j] as i64;
                    let filter = if j == b.l { &dec.psi } else { &dec.phi };
                    let s = scales[j];
                    let mut h = hats[j].clone();
                    for (idx, c) in h.coefficients_mut().iter_mut().enumerate() {
                        let kk = spec.integer_frequency(idx);
                        if kk[..d].iter().any(|v| v.abs() > r) {
                            *c = ZERO;
                        } else {
                            let xi = spec.frequency(idx);
                            *c *= filter.eval(&[s * xi[0], s * xi[1]][..d]);
                        }
                    }
                    h
                })
                .collect();
            let mut out = vec![ZERO; spec.len()];
            for p in dec.pieces.iter().filter(|p| p.l == b.l && p.k == b.k) {
                let mut prod = vec![p.weight; spec.len()];
                for j in 0..n {
                    let s = scales[j];
                    let u = &p.u[j * d..(j + 1) * d];
                    let g = base[j]
                        .multiply(|xi| {
                            let phase: f64 = (0..d).map(|a| s * xi[a] * u[a]).sum();
                            C64::from_polar(1.0, phase)
                        })
                        .to_sampled();
                    for (a, v) in prod.iter_mut().zip(g.values()) {
                        *a *= v;
                    }
                }
                for (a, v) in out.iter_mut().zip(&prod) {
                    *a += v;
                }
            }
            out
        })
        .collect();
    let mut total = vec![ZERO; spec.len()];
    for r in results {
        for (a, v) in total.iter_mut().zip(r) {
            *a += v;
        }
    }
    SampledFunction::new(spec, total)
}
