//! Symbols on the product frequency grid and the multilinear multipliers they define.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, SampledFunction, SpectrumFunction, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Largest number of entries a symbol grid may hold.
pub const MAX_SYMBOL_ENTRIES: usize = 1 << 22;

/// Spectral coefficients below this fraction of the slot maximum are treated as zero.
pub const ACTIVE_THRESHOLD: f64 = 1e-15;

/// Values `σ(ξ_1, .., ξ_n)` over the product of `n` copies of the grid's frequency lattice.
///
/// Entries are slot-major: the flat index is `((i_1 N^d + i_2) N^d + ..)` with each
/// `i_s` an FFT-ordered spectral index of slot `s`.
#[derive(Clone, Debug, PartialEq)]
pub struct SymbolGrid {
    n: usize,
    spec: GridSpec,
    values: Vec<C64>,
    lambda: Vec<f64>,
}

fn entry_count(n: usize, spec: &GridSpec) -> Result<usize> {
    let per = spec.len();
    let total = (0..n).try_fold(1usize, |acc, _| acc.checked_mul(per));
    match total {
        Some(t) if t <= MAX_SYMBOL_ENTRIES => Ok(t),
        _ => Err(Error::Budget(format!(
            "a symbol over {n} slots of {per} frequencies exceeds {MAX_SYMBOL_ENTRIES} entries"
        ))),
    }
}

impl SymbolGrid {
    pub fn new(n: usize, spec: GridSpec, values: Vec<C64>, lambda: Vec<f64>) -> Result<Self> {
        if n == 0 {
            return Err(Error::Structural("symbol needs at least one slot".into()));
        }
        let total = entry_count(n, &spec)?;
        if values.len() != total {
            return Err(Error::Structural(format!("symbol shape needs {total} values, got {}", values.len())));
        }
        if lambda.len() != n {
            return Err(Error::Structural(format!("symbol has {n} slots but {} λ weights", lambda.len())));
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Structural("non-finite symbol value".into()));
        }
        Ok(SymbolGrid { n, spec, values, lambda })
    }

    /// Evaluates `σ` at every product frequency whose slots all satisfy `|k| < band`
    /// (per axis); other entries are zero. `None` fills the whole grid.
    pub fn from_fn<F>(n: usize, spec: GridSpec, lambda: Vec<f64>, band: Option<usize>, f: F) -> Result<Self>
    where
        F: Fn(&[[f64; 2]]) -> C64 + Sync,
    {
        if lambda.len() != n || n == 0 {
            return Err(Error::Structural(format!("symbol has {n} slots but {} λ weights", lambda.len())));
        }
        let total = entry_count(n, &spec)?;
        let per = spec.len();
        let band = band.map(|b| b as i64).unwrap_or(i64::MAX);
        let inside = |j: usize| {
            let k = spec.integer_frequency(j);
            k[0].abs() < band && k[1].abs() < band
        };
        let chunk = total / per;
        let mut values = vec![ZERO; total];
        values.par_chunks_mut(chunk).enumerate().for_each(|(first, out)| {
            if !inside(first) {
                return;
            }
            let mut xis = vec![[0.0; 2]; n];
            xis[0] = spec.frequency(first);
            for (rest, slot) in out.iter_mut().enumerate() {
                let mut r = rest;
                let mut ok = true;
                for s in (1..n).rev() {
                    let j = r % per;
                    r /= per;
                    if !inside(j) {
                        ok = false;
                        break;
                    }
                    xis[s] = spec.frequency(j);
                }
                if ok {
                    *slot = f(&xis);
                }
            }
        });
        SymbolGrid::new(n, spec, values, lambda)
    }

    pub fn constant(n: usize, spec: GridSpec, c: C64) -> Result<Self> {
        let total = entry_count(n, &spec)?;
        SymbolGrid::new(n, spec, vec![c; total], vec![1.0; n])
    }

    /// The Hilbert multiplier `−i sign(ξ)` with `sign(0) = 0` and the Nyquist entry zeroed.
    pub fn hilbert(spec: GridSpec) -> Result<Self> {
        if spec.dimension() != 1 {
            return Err(Error::Unsupported("the Hilbert transform is one-dimensional".into()));
        }
        let values = (0..spec.len())
            .map(|j| hilbert_multiplier(&spec, spec.integer_frequency(j)[0]))
            .collect();
        SymbolGrid::new(1, spec, values, vec![1.0])
    }

    pub fn arity(&self) -> usize {
        self.n
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[C64] {
        &self.values
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn flat_index(&self, slots: &[usize]) -> usize {
        let per = self.spec.len();
        slots.iter().fold(0, |acc, &j| acc * per + j)
    }

    /// Per-slot spectral indices of a flat entry.
    pub fn slot_indices(&self, mut flat: usize) -> Vec<usize> {
        let per = self.spec.len();
        let mut out = vec![0; self.n];
        for s in (0..self.n).rev() {
            out[s] = flat % per;
            flat /= per;
        }
        out
    }

    pub fn value(&self, slots: &[usize]) -> C64 {
        self.values[self.flat_index(slots)]
    }

    /// The disturbed distance `d_λ(ξ) = Σ |λ_i| |ξ_i|`.
    pub fn d_lambda(&self, xis: &[[f64; 2]]) -> f64 {
        xis.iter()
            .zip(&self.lambda)
            .map(|(x, l)| l.abs() * (x[0] * x[0] + x[1] * x[1]).sqrt())
            .sum()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == ZERO)
    }

    /// Text form: a header `n d N Λ`, a line with the `n` weights `λ_i`, then one
    /// `re im` line per entry in slot-major order.
    pub fn write(&self, mut w: impl Write) -> Result<()> {
        let s = self.spec;
        writeln!(w, "{} {} {} {:.16e}", self.n, s.dimension(), s.samples(), s.period())?;
        let lambda: Vec<String> = self.lambda.iter().map(|l| format!("{l:.16e}")).collect();
        writeln!(w, "{}", lambda.join(" "))?;
        for v in &self.values {
            writeln!(w, "{:.16e} {:.16e}", v.re, v.im)?;
        }
        Ok(())
    }

    pub fn read(r: impl BufRead) -> Result<Self> {
        let bad = |what: &str| Error::Structural(format!("bad symbol file {what}"));
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| bad("header"))??;
        let h: Vec<&str> = header.split_whitespace().collect();
        if h.len() != 4 {
            return Err(bad("header"));
        }
        let n: usize = h[0].parse().map_err(|_| bad("arity"))?;
        let d: usize = h[1].parse().map_err(|_| bad("dimension"))?;
        let samples: usize = h[2].parse().map_err(|_| bad("sample count"))?;
        let period: f64 = h[3].parse().map_err(|_| bad("period"))?;
        let spec = GridSpec::new(d, samples, period)?;
        let lambda_line = lines.next().ok_or_else(|| bad("λ line"))??;
        let lambda = lambda_line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad("λ value")))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::new();
        for line in lines {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace().map(|t| t.parse::<f64>().map_err(|_| bad("value")));
            let re = it.next().ok_or_else(|| bad("value"))??;
            let im = it.next().ok_or_else(|| bad("value"))??;
            values.push(C64::new(re, im));
        }
        SymbolGrid::new(n, spec, values, lambda)
    }
}

pub(crate) fn hilbert_multiplier(spec: &GridSpec, k: i64) -> C64 {
    let nyq = spec.samples() as i64 / 2;
    if k == 0 || k == -nyq {
        ZERO
    } else {
        C64::new(0.0, -(k.signum() as f64))
    }
}

/// Nonzero spectral entries of one slot: (flat index, integer frequency, coefficient).
type Active = Vec<(usize, [i64; 2], C64)>;

fn active_entries(hat: &SpectrumFunction) -> Active {
    let peak = hat.coefficients().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let thr = ACTIVE_THRESHOLD * peak;
    hat.coefficients()
        .iter()
        .enumerate()
        .filter(|(_, c)| c.norm() > thr)
        .map(|(j, &c)| (j, hat.spec().integer_frequency(j), c))
        .collect()
}

fn in_band(spec: &GridSpec, k: [i64; 2]) -> bool {
    let h = spec.samples() as i64 / 2;
    let ok = |v: i64| (-h..h).contains(&v);
    ok(k[0]) && (spec.dimension() == 1 || ok(k[1]))
}

fn output_index(spec: &GridSpec, k: [i64; 2]) -> usize {
    spec.flat([spec.fold_index(k[0]), spec.fold_index(k[1])])
}

fn check_inputs(sigma: &SymbolGrid, f: &[&SampledFunction]) -> Result<()> {
    if f.len() != sigma.n {
        return Err(Error::Structural(format!("symbol has {} slots, got {} inputs", sigma.n, f.len())));
    }
    if let Some(g) = f.iter().find(|g| *g.spec() != sigma.spec) {
        return Err(Error::Structural(format!("input grid {:?} differs from symbol grid {:?}", g.spec(), sigma.spec)));
    }
    Ok(())
}

/// Walks every combination of active entries, calling `visit(slot indices, frequency sum, product)`.
fn for_each_combination(lists: &[Active], mut visit: impl FnMut(&[usize], [i64; 2], C64) -> Result<()>) -> Result<()> {
    let n = lists.len();
    if lists.iter().any(|l| l.is_empty()) {
        return Ok(());
    }
    let mut pos = vec![0usize; n];
    let mut idx = vec![0usize; n];
    loop {
        let mut ksum = [0i64; 2];
        let mut prod = C64::new(1.0, 0.0);
        for s in 0..n {
            let (j, k, c) = lists[s][pos[s]];
            idx[s] = j;
            ksum[0] += k[0];
            ksum[1] += k[1];
            prod *= c;
        }
        visit(&idx, ksum, prod)?;
        let mut s = n;
        loop {
            if s == 0 {
                return Ok(());
            }
            s -= 1;
            pos[s] += 1;
            if pos[s] < lists[s].len() {
                break;
            }
            pos[s] = 0;
        }
    }
}

/// `T(f_1, .., f_n)(x) = Σ_ξ e^{ix·Σξ_i} σ(ξ) Π f̂_i(ξ_i)`, synthesized on the grid.
pub fn apply_multiplier(sigma: &SymbolGrid, f: &[&SampledFunction]) -> Result<SampledFunction> {
    check_inputs(sigma, f)?;
    let spec = sigma.spec;
    let lists: Vec<Active> = f.iter().map(|g| active_entries(&g.spectrum())).collect();
    let mut out = vec![ZERO; spec.len()];
    for_each_combination(&lists, |idx, ksum, prod| {
        let s = sigma.value(idx);
        if s == ZERO {
            return Ok(());
        }
        if !in_band(&spec, ksum) {
            return Err(Error::Aliasing(format!(
                "frequency sum {:?} lies beyond Nyquist with nonzero energy",
                &ksum[..spec.dimension()]
            )));
        }
        out[output_index(&spec, ksum)] += s * prod;
        Ok(())
    })?;
    Ok(SpectrumFunction::new(spec, out)?.to_sampled())
}

/// A multilinear operator the estimator can probe through forward and adjoint applications.
pub trait MultilinearOperator: Sync {
    fn arity(&self) -> usize;
    fn spec(&self) -> &GridSpec;
    /// Inputs must have every `|k_axis| < input_band()`.
    fn input_band(&self) -> usize;
    fn apply(&self, inputs: &[&SampledFunction]) -> Result<SampledFunction>;
    /// The function `w` with `⟨T(.., f_slot, ..), h⟩ = ⟨f_slot, w⟩` for the other inputs fixed.
    fn adjoint(&self, slot: usize, inputs: &[&SampledFunction], h: &SampledFunction) -> Result<SampledFunction>;
}

/// A [`SymbolGrid`] viewed as an operator on inputs band-limited to `|k| < N/(2n)`.
#[derive(Clone, Debug)]
pub struct SymbolOperator {
    pub symbol: SymbolGrid,
}

impl SymbolOperator {
    pub fn new(symbol: SymbolGrid) -> Self {
        SymbolOperator { symbol }
    }

    /// Per-slot band that keeps every frequency sum strictly inside the grid band.
    pub fn band_for(spec: &GridSpec, n: usize) -> usize {
        let b = spec.samples() / (2 * n);
        if n == 1 {
            b
        } else {
            b.max(1)
        }
    }
}

impl MultilinearOperator for SymbolOperator {
    fn arity(&self) -> usize {
        self.symbol.n
    }

    fn spec(&self) -> &GridSpec {
        &self.symbol.spec
    }

    fn input_band(&self) -> usize {
        Self::band_for(&self.symbol.spec, self.symbol.n)
    }

    fn apply(&self, inputs: &[&SampledFunction]) -> Result<SampledFunction> {
        apply_multiplier(&self.symbol, inputs)
    }

    fn adjoint(&self, slot: usize, inputs: &[&SampledFunction], h: &SampledFunction) -> Result<SampledFunction> {
        let sigma = &self.symbol;
        check_inputs(sigma, inputs)?;
        if slot >= sigma.n {
            return Err(Error::Argument(format!("slot {slot} out of range for arity {}", sigma.n)));
        }
        let spec = sigma.spec;
        let hh = h.spectrum();
        let band = self.input_band() as i64;
        let full: Active = (0..spec.len())
            .map(|j| (j, spec.integer_frequency(j), C64::new(1.0, 0.0)))
            .filter(|(_, k, _)| k[0].abs() < band && k[1].abs() < band)
            .collect();
        let lists: Vec<Active> = (0..sigma.n)
            .map(|s| if s == slot { full.clone() } else { active_entries(&inputs[s].spectrum()) })
            .collect();
        let mut out = vec![ZERO; spec.len()];
        for_each_combination(&lists, |idx, ksum, prod| {
            if !in_band(&spec, ksum) {
                return Ok(());
            }
            let s = sigma.value(idx);
            if s != ZERO {
                out[idx[slot]] += (s * prod).conj() * hh.coefficients()[output_index(&spec, ksum)];
            }
            Ok(())
        })?;
        Ok(SpectrumFunction::new(spec, out)?.to_sampled())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symbol_file_round_trips() {
        let spec = GridSpec::unit_1d(8).unwrap();
        let s = SymbolGrid::from_fn(2, spec, vec![0.5, -2.0], None, |x| C64::new(x[0][0], x[1][0].sin())).unwrap();
        let mut buf = Vec::new();
        s.write(&mut buf).unwrap();
        assert_eq!(SymbolGrid::read(&buf[..]).unwrap(), s);
    }

    #[test]
    fn shape_is_checked() {
        let spec = GridSpec::unit_1d(8).unwrap();
        assert!(SymbolGrid::new(2, spec, vec![ZERO; 63], vec![1.0, 1.0]).is_err());
        assert!(SymbolGrid::new(2, spec, vec![ZERO; 64], vec![1.0]).is_err());
        let big = GridSpec::new(2, 128, 1.0).unwrap();
        assert!(matches!(SymbolGrid::constant(2, big, ZERO), Err(Error::Budget(_))));
    }

    #[test]
    fn flat_index_roundtrip() {
        let spec = GridSpec::unit_1d(8).unwrap();
        let s = SymbolGrid::constant(3, spec, ZERO).unwrap();
        let idx = s.flat_index(&[3, 1, 7]);
        assert_eq!(s.slot_indices(idx), vec![3, 1, 7]);
    }

    #[test]
    fn from_fn_respects_band() {
        let spec = GridSpec::unit_1d(16).unwrap();
        let s = SymbolGrid::from_fn(2, spec, vec![1.0, 1.0], Some(4), |x| C64::new(x[0][0] + 10.0 * x[1][0], 0.0)).unwrap();
        assert_eq!(s.value(&[3, 2]), C64::new(23.0, 0.0));
        assert_eq!(s.value(&[15, 1]), C64::new(9.0, 0.0));
        assert_eq!(s.value(&[4, 1]), ZERO);
    }

    #[test]
    fn aliasing_is_detected() {
        let spec = GridSpec::unit_1d(16).unwrap();
        let s = SymbolGrid::constant(2, spec, C64::new(1.0, 0.0)).unwrap();
        let f = SampledFunction::from_real_fn(spec, |x| (6.0 * x[0]).cos());
        assert!(matches!(apply_multiplier(&s, &[&f, &f]), Err(Error::Aliasing(_))));
    }

    #[test]
    fn arity_mismatch_is_structural() {
        let spec = GridSpec::unit_1d(16).unwrap();
        let s = SymbolGrid::constant(2, spec, C64::new(1.0, 0.0)).unwrap();
        let f = SampledFunction::zeros(spec);
        assert!(matches!(apply_multiplier(&s, &[&f]), Err(Error::Structural(_))));
    }
}
