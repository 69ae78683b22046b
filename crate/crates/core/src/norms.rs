//! Norm functionals and maximal operators.

use serde::{Deserialize, Serialize};

use crate::czlab::DyadicCube;
use crate::error::{Error, Result};
use crate::filterbank::{Filter, FilterBank, LogQuadrature};
use crate::grid::{SampledFunction, C64};

/// Exponents `(p_1, .., p_n)` with `1/p = Σ 1/p_i`; `f64::INFINITY` encodes `p_i = ∞`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExponentProfile {
    p_list: Vec<f64>,
}

impl ExponentProfile {
    pub fn new(p_list: Vec<f64>) -> Result<Self> {
        if p_list.is_empty() {
            return Err(Error::Validation("exponent profile needs at least one exponent".into()));
        }
        if let Some(bad) = p_list.iter().find(|p| !(**p > 0.0) || p.is_nan()) {
            return Err(Error::Validation(format!("exponent {bad} is outside (0, ∞]")));
        }
        Ok(ExponentProfile { p_list })
    }

    pub fn p_list(&self) -> &[f64] {
        &self.p_list
    }

    pub fn arity(&self) -> usize {
        self.p_list.len()
    }

    /// `Σ 1/p_i` with `1/∞ = 0`.
    pub fn reciprocal(&self) -> f64 {
        self.p_list.iter().map(|p| if p.is_infinite() { 0.0 } else { 1.0 / p }).sum()
    }

    /// Target exponent `p`, infinite when every slot is `L^∞`.
    pub fn target(&self) -> f64 {
        let r = self.reciprocal();
        if r == 0.0 {
            f64::INFINITY
        } else {
            1.0 / r
        }
    }

    /// Slots with `p_i = 1`.
    pub fn s1(&self) -> Vec<usize> {
        (0..self.arity()).filter(|&i| self.p_list[i] == 1.0).collect()
    }

    /// Slots with `p_i = ∞`.
    pub fn s2(&self) -> Vec<usize> {
        (0..self.arity()).filter(|&i| self.p_list[i].is_infinite()).collect()
    }

    /// Remaining slots.
    pub fn s3(&self) -> Vec<usize> {
        (0..self.arity()).filter(|&i| self.p_list[i] != 1.0 && self.p_list[i].is_finite()).collect()
    }

    pub fn permuted(&self, perm: &[usize]) -> Self {
        ExponentProfile { p_list: perm.iter().map(|&i| self.p_list[i]).collect() }
    }
}

/// Riemann-sum `L^p` (quasi)norm; `p = ∞` gives the largest magnitude.
pub fn lp_norm(f: &SampledFunction, p: f64) -> f64 {
    if p.is_infinite() {
        return f.max_abs();
    }
    let cell = f.spec().cell();
    if p == 2.0 {
        return (f.values().iter().map(|v| v.norm_sqr()).sum::<f64>() * cell).sqrt();
    }
    (f.values().iter().map(|v| v.norm().powf(p)).sum::<f64>() * cell).powf(1.0 / p)
}

/// `sup_α α |{|f| > α}|^{1/p}`, exact over the attained magnitudes.
pub fn weak_lp_quasinorm(f: &SampledFunction, p: f64) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Argument(format!("weak norm needs 0 < p < ∞, got {p}")));
    }
    let mut m: Vec<f64> = f.values().iter().map(|v| v.norm()).collect();
    m.sort_by(|a, b| b.total_cmp(a));
    let cell = f.spec().cell();
    Ok(m.iter()
        .enumerate()
        .map(|(j, &v)| v * ((j + 1) as f64 * cell).powf(1.0 / p))
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SquareMode {
    /// Dyadic sum over the bank's scale window.
    Discrete,
    /// Log-quadrature version of `∫ |Ψ_t ∗ f|² dt/t`.
    Continuous(LogQuadrature),
}

/// Pointwise Littlewood–Paley square function of `f`.
pub fn square_function(f: &SampledFunction, bank: &FilterBank, mode: SquareMode) -> Result<SampledFunction> {
    if *f.spec() != bank.spec {
        return Err(Error::Structural("function and bank live on different grids".into()));
    }
    let hat = f.spectrum();
    let scales: Vec<(f64, f64)> = match mode {
        SquareMode::Discrete => (bank.k_min..=bank.k_max).map(|k| ((k as f64).exp2(), 1.0)).collect(),
        SquareMode::Continuous(q) => q.nodes(),
    };
    let mut acc = vec![0.0f64; f.spec().len()];
    for (t, w) in scales {
        let piece = bank.psi.apply_spectrum(&hat, t).to_sampled();
        for (a, v) in acc.iter_mut().zip(piece.values()) {
            *a += w * v.norm_sqr();
        }
    }
    SampledFunction::new(*f.spec(), acc.into_iter().map(|a| C64::new(a.sqrt(), 0.0)).collect())
}

/// Fraction of the spectral energy of `f` lying outside the bank's resolvable band.
pub fn uncovered_energy(f: &SampledFunction, bank: &FilterBank) -> f64 {
    let hat = f.spectrum();
    let spec = f.spec();
    let d = spec.dimension();
    let (lo, hi) = bank.resolvable_band();
    let mut total = 0.0;
    let mut outside = 0.0;
    for (j, c) in hat.coefficients().iter().enumerate() {
        let xi = spec.frequency(j);
        let r = xi[..d].iter().map(|v| v * v).sum::<f64>().sqrt();
        total += c.norm_sqr();
        if r < lo || r > hi {
            outside += c.norm_sqr();
        }
    }
    if total == 0.0 {
        0.0
    } else {
        outside / total
    }
}

/// `‖S_Ψ f‖_p`.
pub fn hardy_norm(f: &SampledFunction, p: f64, bank: &FilterBank, mode: SquareMode) -> Result<f64> {
    if !(p > 0.0 && p.is_finite()) {
        return Err(Error::Argument(format!("Hardy norm needs 0 < p < ∞, got {p}")));
    }
    Ok(lp_norm(&square_function(f, bank, mode)?, p))
}

/// Supremum over all dyadic cubes of the mean oscillation `⨍_Q |f − f_Q|`.
pub fn bmo_norm(f: &SampledFunction) -> f64 {
    let spec = f.spec();
    let n = spec.samples();
    let d = spec.dimension();
    let v = f.values();
    let mut best = 0.0f64;
    let mut side = n;
    while side >= 1 {
        let per_axis = n / side;
        let cubes = per_axis.pow(d as u32);
        for c in 0..cubes {
            let cells = cube_cells(n, d, side, c);
            let count = cells.len() as f64;
            let mean: C64 = cells.iter().map(|&j| v[j]).sum::<C64>() / count;
            let osc: f64 = cells.iter().map(|&j| (v[j] - mean).norm()).sum::<f64>() / count;
            best = best.max(osc);
        }
        side /= 2;
    }
    best
}

/// Flat indices of the `c`-th cube of side `side` cells (row-major cube numbering).
pub(crate) fn cube_cells(n: usize, d: usize, side: usize, c: usize) -> Vec<usize> {
    let per_axis = n / side;
    if d == 1 {
        (c * side..(c + 1) * side).collect()
    } else {
        let (ci, cj) = (c / per_axis, c % per_axis);
        let mut out = Vec::with_capacity(side * side);
        for i in ci * side..(ci + 1) * side {
            for j in cj * side..(cj + 1) * side {
                out.push(i * n + j);
            }
        }
        out
    }
}

/// Radii (in cells) over which centered averages are taken.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RadiusSet {
    /// 0, 1, 2, 4, ... and the largest radius that fits in one period.
    Dyadic,
    /// Every radius from 0 to the largest that fits.
    All,
}

#[derive(Clone, Debug, PartialEq)]
pub enum MaximalVariant<'a> {
    HardyLittlewood(RadiusSet),
    /// `(M_HL(M_HL(|f|^r)))^{1/r}`.
    IteratedPower { r: f64 },
    /// `sup_t sup_y (1 + |y|/t)^{−b} |Φ_t ∗ f(x − y)|` over the quadrature nodes.
    Peetre { phi: &'a Filter, b: f64, t_nodes: LogQuadrature },
    Marcinkiewicz(&'a [DyadicCube]),
}

pub fn maximal(f: &SampledFunction, variant: &MaximalVariant<'_>) -> Result<SampledFunction> {
    match variant {
        MaximalVariant::HardyLittlewood(set) => Ok(hardy_littlewood(&f.map(|v| C64::new(v.norm(), 0.0)), *set)),
        MaximalVariant::IteratedPower { r } => {
            if !(*r > 0.0 && r.is_finite()) {
                return Err(Error::Argument(format!("power r must be positive, got {r}")));
            }
            let g = f.map(|v| C64::new(v.norm().powf(*r), 0.0));
            let m = hardy_littlewood(&hardy_littlewood(&g, RadiusSet::Dyadic), RadiusSet::Dyadic);
            Ok(m.map(|v| C64::new(v.re.max(0.0).powf(1.0 / r), 0.0)))
        }
        MaximalVariant::Peetre { phi, b, t_nodes } => peetre(f, phi, *b, t_nodes),
        MaximalVariant::Marcinkiewicz(cubes) => marcinkiewicz(f, cubes),
    }
}

fn radii(n: usize, set: RadiusSet) -> Vec<usize> {
    let r_max = n / 2 - 1;
    match set {
        RadiusSet::All => (0..=r_max).collect(),
        RadiusSet::Dyadic => {
            let mut out = vec![0];
            let mut r = 1;
            while r < r_max {
                out.push(r);
                r *= 2;
            }
            out.push(r_max);
            out
        }
    }
}

/// Centered cube averages of a nonnegative real function over the given radii.
fn hardy_littlewood(g: &SampledFunction, set: RadiusSet) -> SampledFunction {
    let spec = *g.spec();
    let n = spec.samples();
    let d = spec.dimension();
    let vals: Vec<f64> = g.values().iter().map(|v| v.re).collect();
    let rs = radii(n, set);
    let out: Vec<f64> = if d == 1 {
        let mut prefix = vec![0.0; 3 * n + 1];
        for j in 0..3 * n {
            prefix[j + 1] = prefix[j] + vals[j % n];
        }
        (0..n)
            .map(|x| {
                rs.iter()
                    .map(|&r| {
                        let (a, b) = (n + x - r, n + x + r + 1);
                        (prefix[b] - prefix[a]) / (2 * r + 1) as f64
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    } else {
        let m = 3 * n;
        let mut table = vec![0.0; (m + 1) * (m + 1)];
        for i in 0..m {
            for j in 0..m {
                table[(i + 1) * (m + 1) + j + 1] = vals[(i % n) * n + j % n] + table[i * (m + 1) + j + 1]
                    + table[(i + 1) * (m + 1) + j]
                    - table[i * (m + 1) + j];
            }
        }
        let rect = |i0: usize, i1: usize, j0: usize, j1: usize| {
            table[i1 * (m + 1) + j1] - table[i0 * (m + 1) + j1] - table[i1 * (m + 1) + j0] + table[i0 * (m + 1) + j0]
        };
        (0..n * n)
            .map(|x| {
                let (xi, xj) = (x / n, x % n);
                rs.iter()
                    .map(|&r| {
                        let s = rect(n + xi - r, n + xi + r + 1, n + xj - r, n + xj + r + 1);
                        s / ((2 * r + 1) * (2 * r + 1)) as f64
                    })
                    .fold(0.0, f64::max)
            })
            .collect()
    };
    SampledFunction::new(spec, out.into_iter().map(|v| C64::new(v, 0.0)).collect())
        .expect("maximal averages are finite")
}

fn peetre(f: &SampledFunction, phi: &Filter, b: f64, t_nodes: &LogQuadrature) -> Result<SampledFunction> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::Argument(format!("decay exponent b must be positive, got {b}")));
    }
    let spec = *f.spec();
    let n = spec.samples();
    let d = spec.dimension();
    let h = spec.spacing();
    let mut offsets: Vec<(f64, [i64; 2])> = (0..spec.len())
        .map(|j| {
            let k = spec.integer_frequency(j);
            let dist = ((k[0] * k[0] + k[1] * k[1]) as f64).sqrt() * h;
            (dist, k)
        })
        .collect();
    offsets.sort_by(|a, b| a.0.total_cmp(&b.0));
    let hat = f.spectrum();
    let mut best = vec![0.0f64; spec.len()];
    for (t, _) in t_nodes.nodes() {
        let g: Vec<f64> = phi.apply_spectrum(&hat, t).to_sampled().values().iter().map(|v| v.norm()).collect();
        let g_max = g.iter().cloned().fold(0.0, f64::max);
        for (x, bx) in best.iter_mut().enumerate() {
            let xa = spec.axes(x);
            for &(dist, k) in &offsets {
                let w = (1.0 + dist / t).powf(-b);
                if w * g_max <= *bx {
                    break;
                }
                let i0 = (xa[0] as i64 - k[0]).rem_euclid(n as i64) as usize;
                let y = if d == 1 { i0 } else { i0 * n + (xa[1] as i64 - k[1]).rem_euclid(n as i64) as usize };
                *bx = bx.max(w * g[y]);
            }
        }
    }
    SampledFunction::new(spec, best.into_iter().map(|v| C64::new(v, 0.0)).collect())
}

fn marcinkiewicz(f: &SampledFunction, cubes: &[DyadicCube]) -> Result<SampledFunction> {
    if cubes.is_empty() {
        return Err(Error::Argument("Marcinkiewicz function needs a nonempty cube list".into()));
    }
    let spec = *f.spec();
    let d = spec.dimension();
    let geo: Vec<([f64; 2], f64)> = cubes.iter().map(|c| (c.center(&spec), c.side_length(&spec))).collect();
    let vals = (0..spec.len())
        .map(|j| {
            let p = spec.point(j);
            let s: f64 = geo
                .iter()
                .map(|(c, l)| (1.0 + spec.torus_distance(&p[..d], &c[..d]) / l).powi(-(d as i32 + 1)))
                .sum();
            C64::new(s, 0.0)
        })
        .collect();
    SampledFunction::new(spec, vals)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn profile_partition() {
        let p = ExponentProfile::new(vec![1.0, f64::INFINITY, 3.0, 2.0]).unwrap();
        assert_eq!(p.s1(), vec![0]);
        assert_eq!(p.s2(), vec![1]);
        assert_eq!(p.s3(), vec![2, 3]);
        assert_eq!(p.reciprocal(), 1.0 + 1.0 / 3.0 + 0.5);
        assert!(ExponentProfile::new(vec![0.0]).is_err());
        assert!(ExponentProfile::new(vec![f64::INFINITY]).unwrap().target().is_infinite());
    }

    #[test]
    fn indicator_of_unit_interval_has_unit_norms() {
        let spec = GridSpec::new(1, 64, 8.0).unwrap();
        let f = SampledFunction::from_real_fn(spec, |x| if x[0] < 1.0 { 1.0 } else { 0.0 });
        for p in [0.5, 1.0, 2.0, 3.0, f64::INFINITY] {
            assert!((lp_norm(&f, p) - 1.0).abs() < 1e-14, "p={p}");
        }
        for p in [0.5, 1.0, 2.0] {
            assert!((weak_lp_quasinorm(&f, p).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bmo_of_constant_is_zero() {
        let spec = GridSpec::new(2, 16, 1.0).unwrap();
        assert_eq!(bmo_norm(&SampledFunction::constant(spec, C64::new(2.5, -1.0))), 0.0);
    }

    #[test]
    fn dyadic_radii_include_extremes() {
        assert_eq!(radii(32, RadiusSet::Dyadic), vec![0, 1, 2, 4, 8, 15]);
        assert_eq!(radii(8, RadiusSet::All), vec![0, 1, 2, 3]);
    }

    #[test]
    fn marcinkiewicz_needs_cubes() {
        let spec = GridSpec::unit_1d(16).unwrap();
        let f = SampledFunction::zeros(spec);
        assert!(matches!(maximal(&f, &MaximalVariant::Marcinkiewicz(&[])), Err(Error::Argument(_))));
    }
}
