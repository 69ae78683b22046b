//! The model operators `T_{ρ,λ,L}` (dyadic scales) and `U_{ρ,λ,L}` (continuous scales).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::{Filter, FilterBank, LogQuadrature};
use crate::grid::{fft_1d, GridSpec, SampledFunction, SpectrumFunction, C64};
use crate::operators::multiplier::SymbolGrid;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Largest number of product-frequency terms summed per scale by the spectral path.
pub const MAX_TERMS_PER_SCALE: usize = 1 << 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Discrete,
    Continuous,
}

/// The scale weights `L`: dyadic `k ↦ L(k)` or continuous `t ↦ L(t)` on quadrature nodes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ScaleWeights {
    Discrete { k_min: i32, k_max: i32, values: Vec<f64> },
    Continuous { quadrature: LogQuadrature, values: Vec<f64> },
}

impl ScaleWeights {
    pub fn discrete_constant(k_min: i32, k_max: i32, value: f64) -> Self {
        let len = (k_max - k_min + 1).max(0) as usize;
        ScaleWeights::Discrete { k_min, k_max, values: vec![value; len] }
    }

    pub fn discrete_fn(k_min: i32, k_max: i32, l: impl Fn(i32) -> f64) -> Self {
        ScaleWeights::Discrete { k_min, k_max, values: (k_min..=k_max).map(l).collect() }
    }

    pub fn continuous_fn(quadrature: LogQuadrature, l: impl Fn(f64) -> f64) -> Self {
        let values = quadrature.nodes().iter().map(|&(t, _)| l(t)).collect();
        ScaleWeights::Continuous { quadrature, values }
    }

    pub fn mode(&self) -> Mode {
        match self {
            ScaleWeights::Discrete { .. } => Mode::Discrete,
            ScaleWeights::Continuous { .. } => Mode::Continuous,
        }
    }

    /// Pairs `(t, weight)`: `(2^k, L(k))` or `(t_m, L(t_m) Δlog t)`.
    pub fn scales(&self) -> Vec<(f64, f64)> {
        match self {
            ScaleWeights::Discrete { k_min, values, .. } => values
                .iter()
                .enumerate()
                .map(|(j, &l)| (((*k_min + j as i32) as f64).exp2(), l))
                .collect(),
            ScaleWeights::Continuous { quadrature, values } => {
                quadrature.nodes().iter().zip(values).map(|(&(t, w), &l)| (t, l * w)).collect()
            }
        }
    }

    pub fn sup_norm(&self) -> f64 {
        let v = match self {
            ScaleWeights::Discrete { values, .. } | ScaleWeights::Continuous { values, .. } => values,
        };
        v.iter().map(|x| x.abs()).fold(0.0, f64::max)
    }

    /// Same weights with every scale multiplied by `2^shift` (dyadic windows move by `shift`).
    pub fn shifted(&self, shift: i32) -> Self {
        match self {
            ScaleWeights::Discrete { k_min, k_max, values } => {
                ScaleWeights::Discrete { k_min: k_min + shift, k_max: k_max + shift, values: values.clone() }
            }
            ScaleWeights::Continuous { quadrature, values } => {
                let s = (shift as f64).exp2();
                ScaleWeights::Continuous {
                    quadrature: LogQuadrature { t_min: quadrature.t_min * s, t_max: quadrature.t_max * s, ..*quadrature },
                    values: values.clone(),
                }
            }
        }
    }

    fn label(&self, j: usize) -> String {
        match self {
            ScaleWeights::Discrete { k_min, .. } => format!("k={}", k_min + j as i32),
            ScaleWeights::Continuous { .. } => format!("t-node {j}"),
        }
    }
}

/// Full parameterization `(n, λ, ρ, L)` of a model operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelOperatorParams {
    pub n: usize,
    pub lambda: Vec<f64>,
    pub rho: Vec<f64>,
    pub weights: ScaleWeights,
}

impl ModelOperatorParams {
    pub fn new(lambda: Vec<f64>, rho: Vec<f64>, weights: ScaleWeights) -> Result<Self> {
        let p = ModelOperatorParams { n: lambda.len(), lambda, rho, weights };
        p.validate()?;
        Ok(p)
    }

    pub fn mode(&self) -> Mode {
        self.weights.mode()
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.lambda.len() != self.n || self.rho.len() != self.n {
            return Err(Error::Validation(format!(
                "arity {} needs matching λ ({}) and ρ ({}) lists",
                self.n,
                self.lambda.len(),
                self.rho.len()
            )));
        }
        for (i, &r) in self.rho.iter().enumerate() {
            if !(r > 0.0 && r <= 1.0) {
                return Err(Error::Validation(format!("ρ_{} = {r} violates ρ ∈ (0,1]", i + 1)));
            }
        }
        for (i, &l) in self.lambda.iter().enumerate() {
            if !(l != 0.0 && l.is_finite()) {
                return Err(Error::Validation(format!("λ_{} = {l} violates λ ≠ 0", i + 1)));
            }
        }
        let (len, values) = match &self.weights {
            ScaleWeights::Discrete { k_min, k_max, values } => {
                if k_min > k_max {
                    return Err(Error::Validation(format!("empty scale window [{k_min}, {k_max}]")));
                }
                ((k_max - k_min + 1) as usize, values)
            }
            ScaleWeights::Continuous { quadrature, values } => (quadrature.nodes().len(), values),
        };
        if values.len() != len {
            return Err(Error::Validation(format!("L has {} values for {len} scales", values.len())));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Validation("L must be bounded and finite".into()));
        }
        Ok(())
    }

    /// Checks that every dilate `Φ^i_{λ_i t}` fits in half a period.
    pub fn validate_against(&self, spec: &GridSpec) -> Result<()> {
        self.validate()?;
        let half = 0.5 * spec.period();
        for (j, (t, _)) in self.weights.scales().iter().enumerate() {
            for (i, &l) in self.lambda.iter().enumerate() {
                if l.abs() * t > half * (1.0 + 1e-12) {
                    return Err(Error::ScaleWindow(format!(
                        "scale {} with λ_{} = {l} dilates Φ to width {:.4} beyond half the period {half:.4}",
                        self.weights.label(j),
                        i + 1,
                        l.abs() * t
                    )));
                }
            }
        }
        Ok(())
    }

    /// Joint permutation of the slot parameters.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        ModelOperatorParams {
            n: self.n,
            lambda: perm.iter().map(|&i| self.lambda[i]).collect(),
            rho: perm.iter().map(|&i| self.rho[i]).collect(),
            weights: self.weights.clone(),
        }
    }
}

/// A model operator with concrete filters.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelOperator {
    pub params: ModelOperatorParams,
    pub psi: Filter,
    pub phis: Vec<Filter>,
}

impl ModelOperator {
    pub fn new(params: ModelOperatorParams, psi: Filter, phis: Vec<Filter>) -> Result<Self> {
        params.validate()?;
        if phis.len() != params.n {
            return Err(Error::Validation(format!("{} Φ filters for arity {}", phis.len(), params.n)));
        }
        Ok(ModelOperator { params, psi, phis })
    }

    pub fn from_bank(params: ModelOperatorParams, bank: &FilterBank) -> Result<Self> {
        if bank.phis.len() < params.n {
            return Err(Error::Validation(format!("bank has {} Φ filters, operator needs {}", bank.phis.len(), params.n)));
        }
        params.validate_against(&bank.spec)?;
        Self::new(params.clone(), bank.psi.clone(), bank.phis[..params.n].to_vec())
    }

    /// `Σ_t w_t Ψ̂(t Σ ρ_i λ_i ξ_i) Π Φ̂^i(λ_i t ξ_i)` for frequency vectors of dimension `d`.
    pub fn symbol(&self, xis: &[[f64; 2]], d: usize) -> C64 {
        let mut total = ZERO;
        for (t, w) in self.params.weights.scales() {
            if w != 0.0 {
                total += self.symbol_at_scale(xis, t, d) * w;
            }
        }
        total
    }

    /// The summand of [`ModelOperator::symbol`] at one scale, without its weight.
    pub fn symbol_at_scale(&self, xis: &[[f64; 2]], t: f64, d: usize) -> C64 {
        let p = &self.params;
        let mut prod = C64::new(1.0, 0.0);
        let mut comb = [0.0; 2];
        for i in 0..p.n {
            let s = p.lambda[i] * t;
            let v = self.phis[i].eval(&[s * xis[i][0], s * xis[i][1]][..d]);
            if v == ZERO {
                return ZERO;
            }
            prod *= v;
            comb[0] += p.rho[i] * s * xis[i][0];
            comb[1] += p.rho[i] * s * xis[i][1];
        }
        prod * self.psi.eval(&comb[..d])
    }

    /// The operator's symbol sampled on the product grid, restricted to `|k| < band` per slot.
    pub fn symbol_grid(&self, spec: GridSpec, band: Option<usize>) -> Result<SymbolGrid> {
        let d = spec.dimension();
        SymbolGrid::from_fn(self.params.n, spec, self.params.lambda.clone(), band, |x| self.symbol(x, d))
    }

    fn check_inputs(&self, f: &[&SampledFunction]) -> Result<GridSpec> {
        if f.len() != self.params.n {
            return Err(Error::Structural(format!("operator has {} slots, got {} inputs", self.params.n, f.len())));
        }
        let spec = *f[0].spec();
        if f.iter().any(|g| *g.spec() != spec) {
            return Err(Error::Structural("inputs live on different grids".into()));
        }
        self.params.validate_against(&spec)?;
        Ok(spec)
    }

    /// Spectral evaluation: the product-frequency sum per scale, synthesized at `Σ ξ_i` folded to the grid.
    pub fn apply(&self, f: &[&SampledFunction]) -> Result<SampledFunction> {
        let spec = self.check_inputs(f)?;
        let p = &self.params;
        let d = spec.dimension();
        let hats: Vec<SpectrumFunction> = f.iter().map(|g| g.spectrum()).collect();
        let scales = p.weights.scales();
        let per_scale: Vec<Result<Vec<C64>>> = scales
            .par_iter()
            .map(|&(t, w)| {
                let mut out = vec![ZERO; spec.len()];
                if w == 0.0 {
                    return Ok(out);
                }
                let lists: Vec<Vec<(usize, [f64; 2], [i64; 2], C64)>> = (0..p.n)
                    .map(|i| {
                        let s = p.lambda[i] * t;
                        hats[i]
                            .coefficients()
                            .iter()
                            .enumerate()
                            .filter(|(_, c)| **c != ZERO)
                            .filter_map(|(j, &c)| {
                                let xi = spec.frequency(j);
                                let v = self.phis[i].eval(&[s * xi[0], s * xi[1]][..d]) * c;
                                (v != ZERO).then(|| {
                                    let r = p.rho[i] * s;
                                    (j, [r * xi[0], r * xi[1]], spec.integer_frequency(j), v)
                                })
                            })
                            .collect()
                    })
                    .collect();
                let terms = lists.iter().try_fold(1usize, |acc, l| acc.checked_mul(l.len()));
                match terms {
                    Some(0) => return Ok(out),
                    Some(m) if m <= MAX_TERMS_PER_SCALE => {}
                    _ => return Err(Error::Budget(format!("scale t={t} needs more than {MAX_TERMS_PER_SCALE} terms"))),
                }
                let n = p.n;
                let mut pos = vec![0usize; n];
                loop {
                    let mut comb = [0.0; 2];
                    let mut ks = [0i64; 2];
                    let mut prod = C64::new(w, 0.0);
                    for s in 0..n {
                        let (_, c, k, v) = lists[s][pos[s]];
                        comb[0] += c[0];
                        comb[1] += c[1];
                        ks[0] += k[0];
                        ks[1] += k[1];
                        prod *= v;
                    }
                    let psi = self.psi.eval(&comb[..d]);
                    if psi != ZERO {
                        out[spec.flat([spec.fold_index(ks[0]), spec.fold_index(ks[1])])] += psi * prod;
                    }
                    let mut s = n;
                    let done = loop {
                        if s == 0 {
                            break true;
                        }
                        s -= 1;
                        pos[s] += 1;
                        if pos[s] < lists[s].len() {
                            break false;
                        }
                        pos[s] = 0;
                    };
                    if done {
                        break;
                    }
                }
                Ok(out)
            })
            .collect();
        let mut total = vec![ZERO; spec.len()];
        for r in per_scale {
            for (a, b) in total.iter_mut().zip(r?) {
                *a += b;
            }
        }
        Ok(SpectrumFunction::new(spec, total)?.to_sampled())
    }

    /// Physical-space evaluation in one dimension: per scale, a trapezoid rule in `s = y/t`
    /// against tabulated `Ψ(s)`, with every slot shifted by `ρ_i λ_i t s`.
    pub fn apply_spatial(&self, f: &[&SampledFunction], tail_tolerance: f64) -> Result<SampledFunction> {
        let spec = self.check_inputs(f)?;
        if spec.dimension() != 1 {
            return Err(Error::Unsupported("the spatial path is one-dimensional".into()));
        }
        let p = &self.params;
        let n_s = spec.samples();
        let hats: Vec<SpectrumFunction> = f.iter().map(|g| g.spectrum()).collect();
        let r_psi = self.psi.support_radius();
        let mut total = vec![ZERO; n_s];
        for (t, w) in p.weights.scales() {
            if w == 0.0 {
                continue;
            }
            let filtered: Vec<SpectrumFunction> =
                (0..p.n).map(|i| self.phis[i].apply_spectrum(&hats[i], p.lambda[i] * t)).collect();
            let mut bandwidth = r_psi;
            for (i, g) in filtered.iter().enumerate() {
                let kmax = g.max_active_index(0.0) as f64 * spec.fundamental();
                bandwidth += p.rho[i] * p.lambda[i].abs() * t * kmax;
            }
            let h = std::f64::consts::PI / (1.1 * bandwidth);
            let table = spatial_profile(&self.psi, h, tail_tolerance)?;
            let m = table.len() as i64 / 2;
            for (j, &psi_s) in table.iter().enumerate() {
                if psi_s == ZERO {
                    continue;
                }
                let s = (j as i64 - m) as f64 * h;
                let mut prod = vec![C64::new(w * h, 0.0) * psi_s; n_s];
                for i in 0..p.n {
                    let shift = p.rho[i] * p.lambda[i] * t * s;
                    let shifted = filtered[i].multiply(|xi| C64::from_polar(1.0, -xi[0] * shift)).to_sampled();
                    for (a, b) in prod.iter_mut().zip(shifted.values()) {
                        *a *= b;
                    }
                }
                for (a, b) in total.iter_mut().zip(&prod) {
                    *a += b;
                }
            }
        }
        SampledFunction::new(spec, total)
    }
}

/// Samples `Ψ(s) = (2π)^{−1} ∫ Ψ̂(ω) e^{isω} dω` at `s = jh` for `|j| ≤ m`, returned in order
/// `j = −m..=m` and truncated where the remaining tail mass falls below `tail_tolerance`.
pub fn spatial_profile(psi: &Filter, h: f64, tail_tolerance: f64) -> Result<Vec<C64>> {
    let r1 = psi.support_radius();
    let r0 = psi.inner_radius();
    if h * r1 >= std::f64::consts::PI {
        return Err(Error::Argument(format!("step {h} does not resolve a filter supported out to {r1}")));
    }
    let dw_target = ((r1 - r0).max(r1 * 0.1)) / 4096.0;
    let needed = 2.0 * std::f64::consts::PI / (dw_target * h);
    let size = (needed.ceil() as usize).next_power_of_two().clamp(1 << 12, 1 << 23);
    let dw = 2.0 * std::f64::consts::PI / (size as f64 * h);
    let mut data: Vec<C64> = (0..size)
        .map(|j| {
            let m = if j < size / 2 { j as f64 } else { j as f64 - size as f64 };
            psi.eval(&[m * dw])
        })
        .collect();
    fft_1d(&mut data, true);
    let scale = dw / (2.0 * std::f64::consts::PI);
    let half = size / 2;
    let value = |j: i64| data[j.rem_euclid(size as i64) as usize] * scale;
    let mags: Vec<f64> = (0..half as i64).map(|j| value(j).norm() + value(-j).norm()).collect();
    let total: f64 = mags.iter().sum();
    let mut tail = 0.0;
    let mut m = half - 1;
    while m > 0 && tail + mags[m] <= tail_tolerance * total {
        tail += mags[m];
        m -= 1;
    }
    Ok((-(m as i64)..=m as i64).map(value).collect())
}

/// Spectral evaluation of the model operator with filters from a bank.
pub fn model_operator(params: &ModelOperatorParams, bank: &FilterBank, f: &[&SampledFunction]) -> Result<SampledFunction> {
    ModelOperator::from_bank(params.clone(), bank)?.apply(f)
}
