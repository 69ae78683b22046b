//! Smooth frequency-localized bumps: the annular Littlewood–Paley generator Ψ,
//! ball bumps Φ with Φ̂(0)=1, the Calderón-admissible ψ, and helpers built on them.

use std::f64::consts::LN_2;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledFunction, SpectrumFunction, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// The compact bump `exp(−1/(1−s²))` on `|s| < 1`.
pub fn log_bump(s: f64) -> f64 {
    if s.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - s * s)).exp()
    }
}

/// Smooth monotone step, 0 for `x ≤ 0` and 1 for `x ≥ 1`.
pub fn smooth_step(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else if x >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / x).exp();
        let b = (-1.0 / (1.0 - x)).exp();
        a / (a + b)
    }
}

fn radius(xi: &[f64]) -> f64 {
    xi.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Log-scale coordinate of `|ξ|` inside an annulus `[r0, r1]`, mapped to `[−1, 1]`.
fn log_coordinate(r: f64, r0: f64, r1: f64) -> f64 {
    let (a, b) = (r0.log2(), r1.log2());
    (r.log2() - 0.5 * (a + b)) / (0.5 * (b - a))
}

/// A frequency-side filter, evaluable at any angular frequency vector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Filter {
    /// Annular bump on `[r0, r1]` normalized so `Σ_k |Ψ̂(2^k ξ)|² = 1` for every `ξ ≠ 0`.
    Annular { r0: f64, r1: f64 },
    /// Equal to 1 for `|ξ| ≤ plateau`, decaying smoothly to 0 at `|ξ| = outer`.
    Ball { plateau: f64, outer: f64 },
    /// Transform `exp(−σ²|ξ|²/2)` of a unit-mass Gaussian with standard deviation σ.
    Gaussian { sigma: f64 },
    /// `amplitude · sign(ξ) · bump` in one dimension, radial `amplitude · bump` in two.
    SignedBump { r0: f64, r1: f64, amplitude: C64 },
    Product(Box<Filter>, Box<Filter>),
}

impl Filter {
    pub fn annular(r0: f64, r1: f64) -> Result<Self> {
        if !(r0 > 0.0 && r1.is_finite()) {
            return Err(Error::Construction(format!("annulus needs 0 < r0 < r1, got [{r0}, {r1}]")));
        }
        if r1 <= 2.0 * r0 {
            return Err(Error::Construction(format!(
                "annulus [{r0}, {r1}] does not cover an octave, so its dyadic dilates leave gaps"
            )));
        }
        Ok(Filter::Annular { r0, r1 })
    }

    pub fn ball(plateau: f64, outer: f64) -> Result<Self> {
        if !(plateau >= 0.0 && outer > plateau && outer.is_finite()) {
            return Err(Error::Construction(format!(
                "ball bump needs 0 <= plateau < outer, got [{plateau}, {outer}]"
            )));
        }
        Ok(Filter::Ball { plateau, outer })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Construction(format!("gaussian width must be positive, got {sigma}")));
        }
        Ok(Filter::Gaussian { sigma })
    }

    pub fn signed_bump(r0: f64, r1: f64, amplitude: C64) -> Result<Self> {
        if !(r0 > 0.0 && r1 > r0 && r1.is_finite()) {
            return Err(Error::Construction(format!("signed bump needs 0 < r0 < r1, got [{r0}, {r1}]")));
        }
        Ok(Filter::SignedBump { r0, r1, amplitude })
    }

    pub fn product(a: Filter, b: Filter) -> Self {
        Filter::Product(Box::new(a), Box::new(b))
    }

    pub fn eval(&self, xi: &[f64]) -> C64 {
        match self {
            Filter::Annular { r0, r1 } => C64::new(annular_value(radius(xi), *r0, *r1), 0.0),
            Filter::Ball { plateau, outer } => {
                let r = radius(xi);
                C64::new(1.0 - smooth_step((r - plateau) / (outer - plateau)), 0.0)
            }
            Filter::Gaussian { sigma } => {
                let r2: f64 = xi.iter().map(|v| v * v).sum();
                C64::new((-0.5 * sigma * sigma * r2).exp(), 0.0)
            }
            Filter::SignedBump { r0, r1, amplitude } => {
                let r = radius(xi);
                if r <= *r0 || r >= *r1 {
                    return ZERO;
                }
                let b = log_bump(log_coordinate(r, *r0, *r1));
                if xi.len() == 1 {
                    amplitude * (b * xi[0].signum())
                } else {
                    amplitude * b
                }
            }
            Filter::Product(a, b) => a.eval(xi) * b.eval(xi),
        }
    }

    /// Evaluates the dilate `ξ ↦ filter(tξ)`.
    pub fn eval_scaled(&self, xi: &[f64], t: f64) -> C64 {
        match xi.len() {
            1 => self.eval(&[t * xi[0]]),
            _ => self.eval(&[t * xi[0], t * xi[1]]),
        }
    }

    /// Radius beyond which the filter is zero (numerically zero for Gaussians).
    pub fn support_radius(&self) -> f64 {
        match self {
            Filter::Annular { r1, .. } | Filter::SignedBump { r1, .. } => *r1,
            Filter::Ball { outer, .. } => *outer,
            Filter::Gaussian { sigma } => 9.0 / sigma,
            Filter::Product(a, b) => a.support_radius().min(b.support_radius()),
        }
    }

    /// Radius below which the filter vanishes identically.
    pub fn inner_radius(&self) -> f64 {
        match self {
            Filter::Annular { r0, .. } | Filter::SignedBump { r0, .. } => *r0,
            Filter::Ball { .. } | Filter::Gaussian { .. } => 0.0,
            Filter::Product(a, b) => a.inner_radius().max(b.inner_radius()),
        }
    }

    pub fn vanishes_at_origin(&self, d: usize) -> bool {
        self.eval(&vec![0.0; d]) == ZERO
    }

    /// Applies the dilated multiplier `filter(tξ)` to a spectrum.
    pub fn apply_spectrum(&self, f: &SpectrumFunction, t: f64) -> SpectrumFunction {
        f.multiply(|xi| self.eval_scaled(xi, t))
    }

    /// Returns `Θ_t ∗ f` for the L¹-normalized dilate `Θ_t` of this filter's kernel.
    pub fn convolve(&self, f: &SampledFunction, t: f64) -> SampledFunction {
        self.apply_spectrum(&f.spectrum(), t).to_sampled()
    }

    /// Periodized samples of the kernel `Θ_t`, whose coefficients are `Θ̂(tξ)/Λ^d`.
    pub fn kernel(&self, spec: GridSpec, t: f64) -> SampledFunction {
        let vol = spec.volume();
        SpectrumFunction::from_fn(spec, |xi| self.eval_scaled(xi, t) / vol).to_sampled()
    }
}

fn annular_value(r: f64, r0: f64, r1: f64) -> f64 {
    if r <= r0 || r >= r1 {
        return 0.0;
    }
    let s = log_coordinate(r, r0, r1);
    let w = 0.5 * (r1.log2() - r0.log2());
    let lo = (w * (-1.0 - s)).ceil() as i64;
    let hi = (w * (1.0 - s)).floor() as i64;
    let mut total = 0.0;
    for j in lo..=hi {
        total += log_bump(s + j as f64 / w).powi(2);
    }
    log_bump(s) / total.sqrt()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BumpKind {
    Annulus,
    Ball,
}

/// Frequency-side radii of a bump, plus the derivative order it must be adapted to.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub smoothness_order: usize,
    pub kind: BumpKind,
}

impl BumpProfile {
    pub fn annulus(r0: f64, r1: f64, smoothness_order: usize) -> Self {
        BumpProfile { inner_radius: r0, outer_radius: r1, smoothness_order, kind: BumpKind::Annulus }
    }

    pub fn ball(plateau: f64, outer: f64, smoothness_order: usize) -> Self {
        BumpProfile { inner_radius: plateau, outer_radius: outer, smoothness_order, kind: BumpKind::Ball }
    }

    pub fn validate(&self) -> Result<()> {
        let (r0, r1) = (self.inner_radius, self.outer_radius);
        if !(r0 >= 0.0 && r1 > r0 && r1.is_finite()) {
            return Err(Error::Construction(format!("profile radii must satisfy 0 <= r0 < r1, got [{r0}, {r1}]")));
        }
        if self.kind == BumpKind::Annulus && r0 <= 0.0 {
            return Err(Error::Construction("annulus profile requires r0 > 0".into()));
        }
        Ok(())
    }

    pub fn to_filter(&self) -> Result<Filter> {
        self.validate()?;
        match self.kind {
            BumpKind::Annulus => Filter::annular(self.inner_radius, self.outer_radius),
            BumpKind::Ball => Filter::ball(self.inner_radius, self.outer_radius),
        }
    }
}

/// Log-uniform nodes `t_m = t_min 2^{m/M}` with weights `Δlog t = ln 2 / M`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogQuadrature {
    pub t_min: f64,
    pub t_max: f64,
    pub nodes_per_octave: usize,
}

impl LogQuadrature {
    pub fn new(t_min: f64, t_max: f64, nodes_per_octave: usize) -> Result<Self> {
        if !(t_min > 0.0 && t_max >= t_min && t_max.is_finite()) || nodes_per_octave == 0 {
            return Err(Error::Argument(format!(
                "log quadrature needs 0 < t_min <= t_max and nodes per octave > 0, got [{t_min}, {t_max}] x {nodes_per_octave}"
            )));
        }
        Ok(LogQuadrature { t_min, t_max, nodes_per_octave })
    }

    /// Pairs `(t, Δlog t)`; the final node lands on or just past `t_max`.
    pub fn nodes(&self) -> Vec<(f64, f64)> {
        let m = self.nodes_per_octave as f64;
        let count = ((self.t_max / self.t_min).log2() * m - 1e-9).ceil().max(0.0) as usize;
        let w = LN_2 / m;
        (0..=count).map(|j| (self.t_min * (j as f64 / m).exp2(), w)).collect()
    }
}

/// Half-width, in octaves, of the Calderón generator's log-scale support.
pub const CALDERON_HALF_WIDTH: f64 = 3.0;

/// The triple (Ψ, Φ¹..Φⁿ, ψ) on a given grid and dyadic scale window.
#[derive(Clone, Debug, PartialEq)]
pub struct FilterBank {
    pub spec: GridSpec,
    pub psi: Filter,
    pub phis: Vec<Filter>,
    pub calderon: Filter,
    pub calderon_c: f64,
    pub k_min: i32,
    pub k_max: i32,
    pub adaptedness_order: usize,
    pub ck_values: Vec<f64>,
}

/// Builds a bank whose dyadic dilates `Ψ̂(2^k ·)`, `k_min ≤ k ≤ k_max`, fit inside the grid band.
pub fn build_filter_bank(
    profile_psi: &BumpProfile,
    profile_phi: &BumpProfile,
    n: usize,
    spec: GridSpec,
    scale_window: (i32, i32),
) -> Result<FilterBank> {
    if profile_psi.kind != BumpKind::Annulus || profile_phi.kind != BumpKind::Ball {
        return Err(Error::Construction("Ψ needs an annulus profile and Φ a ball profile".into()));
    }
    if n == 0 {
        return Err(Error::Construction("a bank needs at least one Φ slot".into()));
    }
    let psi = profile_psi.to_filter()?;
    let phi = profile_phi.to_filter()?;
    let (k_min, k_max) = scale_window;
    if k_min > k_max {
        return Err(Error::ScaleWindow(format!("empty scale window [{k_min}, {k_max}]")));
    }
    let finest = profile_psi.outer_radius * (-(k_min as f64)).exp2();
    if finest > spec.nyquist() {
        return Err(Error::ScaleWindow(format!(
            "scale 2^{k_min} places Ψ̂ support out to {finest:.4} beyond Nyquist {:.4}",
            spec.nyquist()
        )));
    }
    let calderon = calderon_generator(spec.dimension())?;
    let calderon_c = calderon_constant(&calderon);
    let mut bank = FilterBank {
        spec,
        psi,
        phis: vec![phi; n],
        calderon,
        calderon_c,
        k_min,
        k_max,
        adaptedness_order: profile_psi.smoothness_order,
        ck_values: Vec::new(),
    };
    let k = bank.adaptedness_order;
    let mut ck = vec![schwartz_coefficient(&bank.psi.kernel(spec, 1.0), k)?];
    ck.extend(bank.phis.iter().map(|p| schwartz_coefficient(&p.kernel(spec, 1.0), k)).collect::<Result<Vec<_>>>()?);
    ck.push(schwartz_coefficient(&bank.calderon.kernel(spec, 1.0), k)?);
    bank.ck_values = ck;
    Ok(bank)
}

/// The Calderón generator: odd with imaginary transform in 1-d, radial in 2-d.
pub fn calderon_generator(d: usize) -> Result<Filter> {
    let amplitude = if d == 1 { C64::new(0.0, -1.0) } else { C64::new(1.0, 0.0) };
    let h = CALDERON_HALF_WIDTH.exp2();
    Filter::signed_bump(1.0 / h, h, amplitude)
}

/// `c(ψ) = ∫_0^∞ |ψ̂(tξ)|² dt/t` by a dense log-scale trapezoid at `|ξ| = 1`.
pub fn calderon_constant(psi: &Filter) -> f64 {
    calderon_integral_at(psi, 1.0)
}

/// Evaluates `∫_0^∞ |ψ̂(t r)|² dt/t` along the positive axis at radius `r`.
pub fn calderon_integral_at(psi: &Filter, r: f64) -> f64 {
    let (r0, r1) = (psi.inner_radius().max(1e-300), psi.support_radius());
    let (a, b) = ((r0 / r).ln(), (r1 / r).ln());
    let m = 1 << 14;
    let h = (b - a) / m as f64;
    (1..m)
        .map(|j| {
            let t = (a + j as f64 * h).exp();
            psi.eval(&[t * r]).norm_sqr()
        })
        .sum::<f64>()
        * h
}

impl FilterBank {
    pub fn dimension(&self) -> usize {
        self.spec.dimension()
    }

    /// Frequencies `|ξ|` in this band receive the full dyadic partition from the window.
    pub fn resolvable_band(&self) -> (f64, f64) {
        let r0 = self.psi.inner_radius();
        let r1 = self.psi.support_radius();
        (r1 * (-(self.k_max as f64)).exp2(), r0 * (-(self.k_min as f64)).exp2())
    }

    /// `Σ_{k in window} |Ψ̂(2^k ξ)|²`.
    pub fn partition_sum(&self, xi: &[f64]) -> f64 {
        (self.k_min..=self.k_max).map(|k| self.psi.eval_scaled(xi, (k as f64).exp2()).norm_sqr()).sum()
    }

    /// Largest in-band integer index per axis that the window fully resolves.
    pub fn band_index(&self) -> usize {
        let hi = self.resolvable_band().1;
        let w = self.spec.fundamental();
        let d = self.spec.dimension() as f64;
        ((hi / w) / d.sqrt()).floor().max(0.0) as usize
    }

    /// Returns a band-limited version of `f` whose nonzero frequencies all lie in the resolvable band.
    pub fn restrict_to_band(&self, f: &SampledFunction) -> SampledFunction {
        let (lo, hi) = self.resolvable_band();
        f.spectrum()
            .multiply(|xi| {
                let r = radius(xi);
                if r >= lo && r <= hi {
                    C64::new(1.0, 0.0)
                } else {
                    ZERO
                }
            })
            .to_sampled()
    }
}

/// `c_K(ζ) = sup_x (1+|x|)^K max_{|α|≤K} |∂^α ζ(x)|` with `|x|` folded about the origin.
pub fn schwartz_coefficient(zeta: &SampledFunction, k: usize) -> Result<f64> {
    schwartz_coefficient_about(zeta, k, &[0.0, 0.0][..zeta.spec().dimension()])
}

pub fn schwartz_coefficient_about(zeta: &SampledFunction, k: usize, center: &[f64]) -> Result<f64> {
    let spec = *zeta.spec();
    let d = spec.dimension();
    if center.len() != d {
        return Err(Error::Structural(format!("center has {} components, grid has {d}", center.len())));
    }
    let hat = zeta.spectrum();
    let mut best = vec![0.0f64; spec.len()];
    for order in multi_indices(d, k) {
        let der = hat
            .multiply(|xi| {
                let mut m = C64::new(1.0, 0.0);
                for (a, &o) in order.iter().enumerate() {
                    m *= C64::new(0.0, xi[a]).powu(o as u32);
                }
                m
            })
            .to_sampled();
        for (b, v) in best.iter_mut().zip(der.values()) {
            *b = b.max(v.norm());
        }
    }
    Ok(best
        .iter()
        .enumerate()
        .map(|(j, &b)| {
            let p = spec.point(j);
            (1.0 + spec.torus_distance(&p[..d], center)).powi(k as i32) * b
        })
        .fold(0.0, f64::max))
}

/// All multi-indices of length `d` with total order at most `k`.
pub fn multi_indices(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if d == 1 {
        for a in 0..=k {
            out.push(vec![a]);
        }
    } else {
        for a in 0..=k {
            for b in 0..=(k - a) {
                out.push(vec![a, b]);
            }
        }
    }
    out
}

/// Discrete Calderón reproduction `c(ψ)^{−1} Σ_t Σ_q ⟨f, ψ_{t,q}⟩ ψ_{t,q} Δlog t` over a stride-`q_stride` lattice.
pub fn calderon_reproduce(
    f: &SampledFunction,
    bank: &FilterBank,
    t_nodes: &LogQuadrature,
    q_stride: usize,
    tolerance: f64,
) -> Result<SampledFunction> {
    let spec = *f.spec();
    if spec != bank.spec {
        return Err(Error::Structural("function and bank live on different grids".into()));
    }
    let n = spec.samples();
    if q_stride == 0 || n % q_stride != 0 {
        return Err(Error::Argument(format!("stride {q_stride} must divide {n}")));
    }
    let nodes = t_nodes.nodes();
    let psi = &bank.calderon;
    let c = bank.calderon_c;
    let hat = f.spectrum();
    let peak = hat.coefficients().iter().map(|v| v.norm()).fold(0.0, f64::max);
    let d = spec.dimension();
    for (j, v) in hat.coefficients().iter().enumerate() {
        if v.norm() <= 1e-13 * peak {
            continue;
        }
        let xi = spec.frequency(j);
        let cover: f64 = nodes.iter().map(|&(t, w)| psi.eval_scaled(&xi[..d], t).norm_sqr() * w).sum();
        if (cover - c).abs() > tolerance * c {
            return Err(Error::Coverage(format!(
                "frequency {:?} receives {cover:.6e} of c(ψ)={c:.6e} from the t-nodes",
                &xi[..d]
            )));
        }
    }
    let mut acc = vec![ZERO; spec.len()];
    if q_stride == 1 {
        for (j, v) in hat.coefficients().iter().enumerate() {
            if *v == ZERO {
                continue;
            }
            let xi = spec.frequency(j);
            let m: f64 = nodes.iter().map(|&(t, w)| psi.eval_scaled(&xi[..d], t).norm_sqr() * w).sum();
            acc[j] = v * (m / c);
        }
    } else {
        let lattice_weight = (q_stride as f64).powi(d as i32);
        for &(t, w) in &nodes {
            let coeffs = hat.multiply(|xi| psi.eval_scaled(xi, t).conj());
            let mut analysis = coeffs.to_sampled();
            for (j, v) in analysis.values_mut().iter_mut().enumerate() {
                let a = spec.axes(j);
                let on_lattice = a[0] % q_stride == 0 && (d == 1 || a[1] % q_stride == 0);
                *v = if on_lattice { *v * lattice_weight } else { ZERO };
            }
            let synth = analysis.spectrum().multiply(|xi| psi.eval_scaled(xi, t));
            for (a, s) in acc.iter_mut().zip(synth.coefficients()) {
                *a += s * (w / c);
            }
        }
    }
    Ok(SpectrumFunction::new(spec, acc)?.to_sampled())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bank1(n: usize) -> FilterBank {
        let spec = GridSpec::unit_1d(n).unwrap();
        build_filter_bank(&BumpProfile::annulus(0.5, 2.0, 2), &BumpProfile::ball(1.0, 2.0, 2), 2, spec, (-5, 1))
            .unwrap()
    }

    #[test]
    fn annulus_must_cover_an_octave() {
        assert!(matches!(Filter::annular(1.0, 1.9), Err(Error::Construction(_))));
        assert!(BumpProfile::annulus(0.0, 1.0, 2).to_filter().is_err());
    }

    #[test]
    fn ball_is_one_at_origin_and_zero_outside() {
        let phi = Filter::ball(1.0, 2.0).unwrap();
        assert_eq!(phi.eval(&[0.0]), C64::new(1.0, 0.0));
        assert_eq!(phi.eval(&[0.7, 0.7]), C64::new(1.0, 0.0));
        assert_eq!(phi.eval(&[2.0]), ZERO);
        let mid = phi.eval(&[1.5]).re;
        assert!(mid > 0.0 && mid < 1.0);
    }

    #[test]
    fn annulus_exact_zero_outside_support() {
        let psi = Filter::annular(0.5, 2.0).unwrap();
        assert_eq!(psi.eval(&[0.5]), ZERO);
        assert_eq!(psi.eval(&[0.0]), ZERO);
        assert_eq!(psi.eval(&[-2.5]), ZERO);
    }

    #[test]
    fn window_beyond_nyquist_is_rejected() {
        let spec = GridSpec::unit_1d(32).unwrap();
        let r = build_filter_bank(&BumpProfile::annulus(0.5, 2.0, 2), &BumpProfile::ball(1.0, 2.0, 2), 1, spec, (-4, 0));
        assert!(matches!(r, Err(Error::ScaleWindow(_))));
    }

    #[test]
    fn calderon_generator_is_odd() {
        let psi = calderon_generator(1).unwrap();
        assert_eq!(psi.eval(&[0.0]), ZERO);
        let a = psi.eval(&[0.9]);
        let b = psi.eval(&[-0.9]);
        assert!((a + b).norm() < 1e-16);
    }

    #[test]
    fn quadrature_nodes_span_the_window() {
        let q = LogQuadrature::new(0.25, 4.0, 8).unwrap();
        let nodes = q.nodes();
        assert_eq!(nodes.len(), 33);
        assert!((nodes.last().unwrap().0 - 4.0).abs() < 1e-12);
    }

    #[test]
    fn resolvable_band_from_window() {
        let b = bank1(256);
        let (lo, hi) = b.resolvable_band();
        assert!((lo - 1.0).abs() < 1e-15);
        assert!((hi - 16.0).abs() < 1e-15);
    }

    #[test]
    fn ck_values_are_finite() {
        let b = bank1(128);
        assert_eq!(b.ck_values.len(), 4);
        assert!(b.ck_values.iter().all(|v| v.is_finite() && *v > 0.0));
    }

    #[test]
    fn coverage_gap_is_reported() {
        let b = bank1(256);
        let f = SampledFunction::from_real_fn(b.spec, |x| (3.0 * x[0]).cos());
        let q = LogQuadrature::new(1.0, 2.0, 8).unwrap();
        assert!(matches!(calderon_reproduce(&f, &b, &q, 1, 1e-6), Err(Error::Coverage(_))));
    }
}
