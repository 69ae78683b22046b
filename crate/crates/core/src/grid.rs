//! Periodic sampled functions on the torus `[0, Λ)^d` and their spectra.
//!
//! Samples sit at `x_j = jΛ/N` in row-major axis order. Spectral coefficients
//! are stored in FFT order and normalized so that
//! `f(x) = Σ_k f̂(k) e^{i x·ξ_k}` with angular frequency `ξ_k = 2πk/Λ`.

use std::cell::RefCell;
use std::f64::consts::PI;
use std::io::{BufRead, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Upper bound on the number of samples a single grid may hold.
pub const MAX_SAMPLES: usize = 1 << 22;

/// Shape of a periodic grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    dimension: usize,
    samples: usize,
    period: f64,
}

impl GridSpec {
    pub fn new(dimension: usize, samples: usize, period: f64) -> Result<Self> {
        if !(1..=2).contains(&dimension) {
            return Err(Error::Validation(format!(
                "grid dimension must be 1 or 2, got {dimension}"
            )));
        }
        if samples < 8 || !samples.is_power_of_two() {
            return Err(Error::Validation(format!(
                "samples per axis must be a power of two >= 8, got {samples}"
            )));
        }
        if !(period.is_finite() && period > 0.0) {
            return Err(Error::Validation(format!("period must be positive, got {period}")));
        }
        let total = samples.checked_pow(dimension as u32).unwrap_or(usize::MAX);
        if total > MAX_SAMPLES {
            return Err(Error::Validation(format!(
                "grid of {samples}^{dimension} samples exceeds the budget of {MAX_SAMPLES}"
            )));
        }
        Ok(GridSpec { dimension, samples, period })
    }

    /// One-dimensional grid of period `2π`, so angular and integer frequencies coincide.
    pub fn unit_1d(samples: usize) -> Result<Self> {
        Self::new(1, samples, 2.0 * PI)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn len(&self) -> usize {
        self.samples.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.period / self.samples as f64
    }

    /// Riemann-sum weight `(Λ/N)^d` of one sample.
    pub fn cell(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    /// Total measure `Λ^d` of the torus.
    pub fn volume(&self) -> f64 {
        self.period.powi(self.dimension as i32)
    }

    /// Angular spacing `2π/Λ` between neighbouring frequencies.
    pub fn fundamental(&self) -> f64 {
        2.0 * PI / self.period
    }

    /// Largest representable angular frequency `πN/Λ`.
    pub fn nyquist(&self) -> f64 {
        PI * self.samples as f64 / self.period
    }

    /// Signed integer frequency of an FFT-ordered axis index.
    pub fn signed_index(&self, j: usize) -> i64 {
        let n = self.samples as i64;
        let j = j as i64;
        if j < n / 2 {
            j
        } else {
            j - n
        }
    }

    /// Axis index of a signed integer frequency, folded modulo `N`.
    pub fn fold_index(&self, k: i64) -> usize {
        k.rem_euclid(self.samples as i64) as usize
    }

    /// Per-axis indices of a flat index (axis 0 first).
    pub fn axes(&self, flat: usize) -> [usize; 2] {
        if self.dimension == 1 {
            [flat, 0]
        } else {
            [flat / self.samples, flat % self.samples]
        }
    }

    pub fn flat(&self, axes: [usize; 2]) -> usize {
        if self.dimension == 1 {
            axes[0]
        } else {
            axes[0] * self.samples + axes[1]
        }
    }

    /// Signed integer frequency vector of a flat spectral index.
    pub fn integer_frequency(&self, flat: usize) -> [i64; 2] {
        let a = self.axes(flat);
        let k0 = self.signed_index(a[0]);
        if self.dimension == 1 {
            [k0, 0]
        } else {
            [k0, self.signed_index(a[1])]
        }
    }

    /// Angular frequency vector `2πk/Λ` of a flat spectral index.
    pub fn frequency(&self, flat: usize) -> [f64; 2] {
        let k = self.integer_frequency(flat);
        let w = self.fundamental();
        [k[0] as f64 * w, k[1] as f64 * w]
    }

    /// Physical coordinates of a flat sample index.
    pub fn point(&self, flat: usize) -> [f64; 2] {
        let a = self.axes(flat);
        let h = self.spacing();
        if self.dimension == 1 {
            [a[0] as f64 * h, 0.0]
        } else {
            [a[0] as f64 * h, a[1] as f64 * h]
        }
    }

    /// Coordinate difference folded into `[−Λ/2, Λ/2)`.
    pub fn fold_coordinate(&self, x: f64) -> f64 {
        let l = self.period;
        (x + 0.5 * l).rem_euclid(l) - 0.5 * l
    }

    /// Euclidean distance between two points measured on the torus.
    pub fn torus_distance(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.dimension)
            .map(|a| self.fold_coordinate(x[a] - y[a]).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    fn ensure_same(&self, other: &GridSpec) -> Result<()> {
        if self != other {
            return Err(Error::Structural(format!(
                "grid mismatch: {self:?} versus {other:?}"
            )));
        }
        Ok(())
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(n: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(n)
        } else {
            p.plan_fft_forward(n)
        }
    })
}

/// Unnormalized in-place d-dimensional FFT on row-major data.
pub(crate) fn fft_nd(data: &mut [C64], n: usize, d: usize, inverse: bool) {
    let f = plan(n, inverse);
    f.process(data);
    if d == 2 {
        let mut col = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            f.process(&mut col);
            for r in 0..n {
                data[r * n + c] = col[r];
            }
        }
    }
}

/// Unnormalized in-place 1-d FFT of arbitrary length.
pub(crate) fn fft_1d(data: &mut [C64], inverse: bool) {
    plan(data.len(), inverse).process(data);
}

/// Complex samples of a periodic function.
#[derive(Clone, Debug, PartialEq)]
pub struct SampledFunction {
    spec: GridSpec,
    values: Vec<C64>,
}

impl SampledFunction {
    pub fn new(spec: GridSpec, values: Vec<C64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Structural(format!(
                "expected {} samples, got {}",
                spec.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Structural("non-finite sample value".into()));
        }
        Ok(SampledFunction { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        SampledFunction { spec, values: vec![C64::new(0.0, 0.0); spec.len()] }
    }

    pub fn constant(spec: GridSpec, c: C64) -> Self {
        SampledFunction { spec, values: vec![c; spec.len()] }
    }

    /// Samples `f(x_j)`; the closure receives a coordinate slice of length `d`.
    pub fn from_fn(spec: GridSpec, f: impl Fn(&[f64]) -> C64) -> Self {
        let d = spec.dimension();
        let values = (0..spec.len())
            .map(|j| {
                let p = spec.point(j);
                f(&p[..d])
            })
            .collect();
        SampledFunction { spec, values }
    }

    pub fn from_real_fn(spec: GridSpec, f: impl Fn(&[f64]) -> f64) -> Self {
        Self::from_fn(spec, |x| C64::new(f(x), 0.0))
    }

    /// Discrete delta of unit mass at sample `j`.
    pub fn delta(spec: GridSpec, j: usize) -> Self {
        let mut out = Self::zeros(spec);
        out.values[j] = C64::new(1.0 / spec.cell(), 0.0);
        out
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [C64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<C64> {
        self.values
    }

    pub fn spectrum(&self) -> SpectrumFunction {
        let n = self.spec.samples();
        let d = self.spec.dimension();
        let mut data = self.values.clone();
        fft_nd(&mut data, n, d, false);
        let scale = 1.0 / self.spec.len() as f64;
        for c in &mut data {
            *c *= scale;
        }
        SpectrumFunction { spec: self.spec, coefficients: data }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Riemann-sum integral `Σ f(x_j) (Λ/N)^d`.
    pub fn integral(&self) -> C64 {
        self.values.iter().sum::<C64>() * self.spec.cell()
    }

    pub fn mean(&self) -> C64 {
        self.values.iter().sum::<C64>() / self.spec.len() as f64
    }

    pub fn map(&self, f: impl Fn(C64) -> C64) -> Self {
        SampledFunction { spec: self.spec, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn scale(&self, c: C64) -> Self {
        self.map(|v| v * c)
    }

    pub fn scale_real(&self, c: f64) -> Self {
        self.map(|v| v * c)
    }

    fn zip(&self, other: &Self, f: impl Fn(C64, C64) -> C64) -> Result<Self> {
        self.spec.ensure_same(&other.spec)?;
        Ok(SampledFunction {
            spec: self.spec,
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a * b)
    }

    pub fn conj(&self) -> Self {
        self.map(|v| v.conj())
    }

    /// Keeps only frequencies with every `|k_axis| < band`.
    pub fn band_limit(&self, band: usize) -> Self {
        self.spectrum().band_limit(band).to_sampled()
    }

    /// Largest pointwise gap `max |f − g|`.
    pub fn max_diff(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Fourier coefficients of a periodic function in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumFunction {
    spec: GridSpec,
    coefficients: Vec<C64>,
}

impl SpectrumFunction {
    pub fn new(spec: GridSpec, coefficients: Vec<C64>) -> Result<Self> {
        if coefficients.len() != spec.len() {
            return Err(Error::Structural(format!(
                "expected {} coefficients, got {}",
                spec.len(),
                coefficients.len()
            )));
        }
        if coefficients.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Structural("non-finite coefficient".into()));
        }
        Ok(SpectrumFunction { spec, coefficients })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        SpectrumFunction { spec, coefficients: vec![C64::new(0.0, 0.0); spec.len()] }
    }

    /// Coefficients `m(ξ_k)` of a closure evaluated at angular frequencies.
    pub fn from_fn(spec: GridSpec, m: impl Fn(&[f64]) -> C64) -> Self {
        let d = spec.dimension();
        let coefficients = (0..spec.len())
            .map(|j| {
                let xi = spec.frequency(j);
                m(&xi[..d])
            })
            .collect();
        SpectrumFunction { spec, coefficients }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn coefficients(&self) -> &[C64] {
        &self.coefficients
    }

    pub fn coefficients_mut(&mut self) -> &mut [C64] {
        &mut self.coefficients
    }

    pub fn to_sampled(&self) -> SampledFunction {
        let n = self.spec.samples();
        let mut data = self.coefficients.clone();
        fft_nd(&mut data, n, self.spec.dimension(), true);
        SampledFunction { spec: self.spec, values: data }
    }

    /// Pointwise product with a multiplier evaluated at angular frequencies.
    pub fn multiply(&self, m: impl Fn(&[f64]) -> C64) -> Self {
        let d = self.spec.dimension();
        let coefficients = self
            .coefficients
            .iter()
            .enumerate()
            .map(|(j, &c)| {
                if c == C64::new(0.0, 0.0) {
                    c
                } else {
                    let xi = self.spec.frequency(j);
                    c * m(&xi[..d])
                }
            })
            .collect();
        SpectrumFunction { spec: self.spec, coefficients }
    }

    pub fn band_limit(&self, band: usize) -> Self {
        let b = band as i64;
        let mut out = self.clone();
        for (j, c) in out.coefficients.iter_mut().enumerate() {
            let k = self.spec.integer_frequency(j);
            if k[0].abs() >= b || k[1].abs() >= b {
                *c = C64::new(0.0, 0.0);
            }
        }
        out
    }

    /// Largest per-axis `|k|` carrying a coefficient above `threshold`.
    pub fn max_active_index(&self, threshold: f64) -> i64 {
        self.coefficients
            .iter()
            .enumerate()
            .filter(|(_, c)| c.norm() > threshold)
            .map(|(j, _)| {
                let k = self.spec.integer_frequency(j);
                k[0].abs().max(k[1].abs())
            })
            .max()
            .unwrap_or(0)
    }
}

/// Periodic convolution `∫ f(y) g(x−y) dy` computed spectrally.
pub fn convolve(f: &SampledFunction, g: &SampledFunction) -> Result<SampledFunction> {
    f.spec.ensure_same(&g.spec)?;
    let fh = f.spectrum();
    let gh = g.spectrum();
    let vol = f.spec.volume();
    let coefficients = fh.coefficients.iter().zip(&gh.coefficients).map(|(a, b)| a * b * vol).collect();
    Ok(SpectrumFunction { spec: f.spec, coefficients }.to_sampled())
}

/// Relative amplitude tolerated outside the representable band when rescaling.
pub const RESCALE_TOLERANCE: f64 = 1e-10;

/// Returns `ζ_{t,q}(x) = t^{−d} ζ((x−q)/t)` by spectral interpolation.
///
/// `ζ` is read as a function concentrated near the origin (its samples are
/// folded to `[−Λ/2, Λ/2)^d`), so its continuous transform can be evaluated at
/// the scaled frequencies `tξ`.
pub fn rescale_translate(zeta: &SampledFunction, t: f64, q: &[f64]) -> Result<SampledFunction> {
    let spec = *zeta.spec();
    let d = spec.dimension();
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Argument(format!("dilation must be positive, got {t}")));
    }
    if q.len() != d {
        return Err(Error::Structural(format!("translation has {} components, grid has {d}", q.len())));
    }
    let n = spec.samples();
    let spectrum = zeta.spectrum();
    let total: f64 = spectrum.coefficients.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    if t < 1.0 {
        let cut = (t * n as f64 / 2.0).floor() as i64;
        let lost: f64 = spectrum
            .coefficients
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                let k = spec.integer_frequency(*j);
                k[0].abs() > cut || k[1].abs() > cut
            })
            .map(|(_, c)| c.norm_sqr())
            .sum::<f64>()
            .sqrt();
        if lost > RESCALE_TOLERANCE * total {
            return Err(Error::ScaleWindow(format!(
                "dilation t={t} pushes relative spectral amplitude {:.3e} beyond Nyquist",
                lost / total
            )));
        }
    } else if t > 1.0 {
        let radius = spec.period() / (2.0 * t);
        let all: f64 = zeta.values.iter().map(|v| v.norm()).sum();
        let outside: f64 = zeta
            .values
            .iter()
            .enumerate()
            .filter(|(j, _)| {
                let p = spec.point(*j);
                (0..d).any(|a| spec.fold_coordinate(p[a]).abs() >= radius)
            })
            .map(|(_, v)| v.norm())
            .sum();
        if outside > RESCALE_TOLERANCE * all {
            return Err(Error::ScaleWindow(format!(
                "dilation t={t} wraps relative mass {:.3e} around the period",
                outside / all
            )));
        }
    }

    let coords: Vec<f64> = (0..n).map(|j| spec.fold_coordinate(j as f64 * spec.spacing())).collect();
    let w = spec.fundamental();
    let eval_freqs: Vec<(f64, bool)> = (0..n)
        .map(|j| {
            let k = spec.signed_index(j) as f64;
            let eta = t * k * w;
            (eta, eta.abs() <= spec.nyquist() * (1.0 + 1e-12))
        })
        .collect();
    let kernel: Vec<C64> = (0..n * n)
        .map(|idx| {
            let (i, j) = (idx / n, idx % n);
            C64::from_polar(1.0 / n as f64, -coords[j] * eval_freqs[i].0)
        })
        .collect();
    let transform_axis = |row: &[C64], out: &mut [C64]| {
        for i in 0..n {
            out[i] = if eval_freqs[i].1 {
                kernel[i * n..(i + 1) * n].iter().zip(row).map(|(a, b)| a * b).sum()
            } else {
                C64::new(0.0, 0.0)
            };
        }
    };

    let mut data = zeta.values.clone();
    if d == 1 {
        let mut out = vec![C64::new(0.0, 0.0); n];
        transform_axis(&data, &mut out);
        data = out;
    } else {
        let mut out = vec![C64::new(0.0, 0.0); n];
        for r in 0..n {
            transform_axis(&data[r * n..(r + 1) * n], &mut out);
            data[r * n..(r + 1) * n].copy_from_slice(&out);
        }
        let mut col = vec![C64::new(0.0, 0.0); n];
        for c in 0..n {
            for r in 0..n {
                col[r] = data[r * n + c];
            }
            transform_axis(&col, &mut out);
            for r in 0..n {
                data[r * n + c] = out[r];
            }
        }
    }
    for (j, c) in data.iter_mut().enumerate() {
        let xi = spec.frequency(j);
        let phase: f64 = (0..d).map(|a| q[a] * xi[a]).sum();
        *c *= C64::from_polar(1.0, -phase);
    }
    data[0] = spectrum.coefficients[0];
    Ok(SpectrumFunction { spec, coefficients: data }.to_sampled())
}

/// Writes the text dump: a header line `d N Λ` then one `re im` line per sample.
pub fn write_dump(f: &SampledFunction, mut w: impl Write) -> Result<()> {
    let s = f.spec();
    writeln!(w, "{} {} {:.16e}", s.dimension(), s.samples(), s.period())?;
    for v in f.values() {
        writeln!(w, "{:.16e} {:.16e}", v.re, v.im)?;
    }
    Ok(())
}

pub fn read_dump(r: impl BufRead) -> Result<SampledFunction> {
    let mut lines = r.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Structural("empty grid dump".into()))??;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(Error::Structural(format!("bad grid dump header `{header}`")));
    }
    let parse_err = |what: &str| Error::Structural(format!("bad grid dump {what}"));
    let d: usize = parts[0].parse().map_err(|_| parse_err("dimension"))?;
    let n: usize = parts[1].parse().map_err(|_| parse_err("sample count"))?;
    let l: f64 = parts[2].parse().map_err(|_| parse_err("period"))?;
    let spec = GridSpec::new(d, n, l)?;
    let mut values = Vec::with_capacity(spec.len());
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split_whitespace();
        let re: f64 = it.next().ok_or_else(|| parse_err("value"))?.parse().map_err(|_| parse_err("value"))?;
        let im: f64 = it.next().ok_or_else(|| parse_err("value"))?.parse().map_err(|_| parse_err("value"))?;
        values.push(C64::new(re, im));
    }
    SampledFunction::new(spec, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec1(n: usize) -> GridSpec {
        GridSpec::unit_1d(n).unwrap()
    }

    #[test]
    fn rejects_bad_specs() {
        assert!(GridSpec::new(3, 8, 1.0).is_err());
        assert!(GridSpec::new(1, 12, 1.0).is_err());
        assert!(GridSpec::new(1, 4, 1.0).is_err());
        assert!(GridSpec::new(1, 8, -1.0).is_err());
    }

    #[test]
    fn constant_maps_to_unit_spike() {
        let s = GridSpec::new(2, 16, 3.0).unwrap();
        let f = SampledFunction::constant(s, C64::new(1.0, 0.0));
        let h = f.spectrum();
        assert!((h.coefficients()[0] - C64::new(1.0, 0.0)).norm() < 1e-15);
        assert!(h.coefficients()[1..].iter().all(|c| c.norm() < 1e-15));
    }

    #[test]
    fn impulse_has_flat_spectrum() {
        let s = spec1(32);
        let mut v = vec![C64::new(0.0, 0.0); 32];
        v[0] = C64::new(1.0, 0.0);
        let h = SampledFunction::new(s, v).unwrap().spectrum();
        for c in h.coefficients() {
            assert!((c - C64::new(1.0 / 32.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn length_mismatch_is_structural() {
        let s = spec1(8);
        assert!(matches!(
            SampledFunction::new(s, vec![C64::new(0.0, 0.0); 7]),
            Err(Error::Structural(_))
        ));
    }

    #[test]
    fn signed_index_layout() {
        let s = spec1(8);
        let ks: Vec<i64> = (0..8).map(|j| s.signed_index(j)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        assert_eq!(s.fold_index(-3), 5);
    }

    #[test]
    fn cosine_lands_on_its_frequency_pair() {
        let s = GridSpec::new(1, 16, 4.0).unwrap();
        let f = SampledFunction::from_real_fn(s, |x| (2.0 * PI * 3.0 * x[0] / 4.0).cos());
        let h = f.spectrum();
        assert!((h.coefficients()[3].re - 0.5).abs() < 1e-14);
        assert!((h.coefficients()[13].re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn convolution_with_constant_averages() {
        let s = GridSpec::new(1, 32, 5.0).unwrap();
        let g = SampledFunction::from_real_fn(s, |x| (x[0]).sin() + 0.3);
        let one = SampledFunction::constant(s, C64::new(1.0, 0.0));
        let c = convolve(&one, &g).unwrap();
        let total = g.integral();
        for v in c.values() {
            assert!((v - total).norm() < 1e-12);
        }
    }

    #[test]
    fn convolution_spec_mismatch() {
        let a = SampledFunction::zeros(spec1(8));
        let b = SampledFunction::zeros(spec1(16));
        assert!(matches!(convolve(&a, &b), Err(Error::Structural(_))));
    }

    #[test]
    fn rescale_identity() {
        let s = GridSpec::new(1, 64, 20.0).unwrap();
        let z = SampledFunction::from_real_fn(s, |x| {
            let y = s.fold_coordinate(x[0]);
            (-y * y).exp()
        });
        let r = rescale_translate(&z, 1.0, &[0.0]).unwrap();
        assert!(r.max_diff(&z) < 1e-12);
    }

    #[test]
    fn rescale_rejects_aliasing_and_wraparound() {
        let s = GridSpec::new(1, 64, 20.0).unwrap();
        let z = SampledFunction::from_real_fn(s, |x| {
            let y = s.fold_coordinate(x[0]);
            (-y * y).exp()
        });
        assert!(matches!(rescale_translate(&z, 0.05, &[0.0]), Err(Error::ScaleWindow(_))));
        assert!(matches!(rescale_translate(&z, 8.0, &[0.0]), Err(Error::ScaleWindow(_))));
    }

    #[test]
    fn dump_roundtrip() {
        let s = GridSpec::new(2, 8, 1.5).unwrap();
        let f = SampledFunction::from_fn(s, |x| C64::new(x[0].sin(), x[1] * 0.1));
        let mut buf = Vec::new();
        write_dump(&f, &mut buf).unwrap();
        let g = read_dump(&buf[..]).unwrap();
        assert_eq!(f, g);
    }
}
