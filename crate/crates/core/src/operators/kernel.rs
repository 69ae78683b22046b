//! Kernel of the operator obtained by freezing all but the last slot of a model operator.

use crate::error::{Error, Result};
use crate::grid::{fft_nd, GridSpec, SampledFunction, C64};
use crate::operators::model::ModelOperator;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Per-scale data shared by point and row evaluations.
struct ScaleTerms {
    /// Weighted `ρ_j λ_j t ξ_j`-sums paired with `Π Ĝ_j(ξ_j) e^{ix·Σξ_j}` over the frozen slots.
    frozen: Vec<([f64; 2], C64)>,
    /// Lattice frequencies `η` of the last slot with `Φ̂^n(λ_n t η) ≠ 0`, and that value.
    last: Vec<([i64; 2], [f64; 2], C64)>,
    t: f64,
    weight: f64,
}

fn scale_terms(op: &ModelOperator, frozen: &[&SampledFunction], spec: &GridSpec, x: &[f64]) -> Vec<ScaleTerms> {
    let p = &op.params;
    let n = p.n;
    let d = spec.dimension();
    let w0 = spec.fundamental();
    let hats: Vec<_> = frozen.iter().map(|f| f.spectrum()).collect();
    p.weights
        .scales()
        .into_iter()
        .filter(|(_, w)| *w != 0.0)
        .map(|(t, weight)| {
            let mut frozen_terms: Vec<([f64; 2], C64)> = vec![([0.0; 2], C64::new(1.0, 0.0))];
            for j in 0..n - 1 {
                let s = p.lambda[j] * t;
                let mut next = Vec::new();
                let entries: Vec<([f64; 2], C64)> = hats[j]
                    .coefficients()
                    .iter()
                    .enumerate()
                    .filter(|(_, c)| **c != ZERO)
                    .filter_map(|(idx, &c)| {
                        let xi = spec.frequency(idx);
                        let v = op.phis[j].eval(&[s * xi[0], s * xi[1]][..d]) * c;
                        let phase: f64 = (0..d).map(|a| x[a] * xi[a]).sum();
                        (v != ZERO).then(|| {
                            ([p.rho[j] * s * xi[0], p.rho[j] * s * xi[1]], v * C64::from_polar(1.0, phase))
                        })
                    })
                    .collect();
                for (c0, v0) in &frozen_terms {
                    for (c1, v1) in &entries {
                        next.push(([c0[0] + c1[0], c0[1] + c1[1]], v0 * v1));
                    }
                }
                frozen_terms = next;
            }
            let s_n = p.lambda[n - 1] * t;
            let reach = (op.phis[n - 1].support_radius() / (s_n.abs() * w0)).ceil() as i64;
            let mut last = Vec::new();
            let range: Vec<i64> = (-reach..=reach).collect();
            let second: Vec<i64> = if d == 2 { range.clone() } else { vec![0] };
            for &k0 in &range {
                for &k1 in &second {
                    let eta = [k0 as f64 * w0, k1 as f64 * w0];
                    let v = op.phis[n - 1].eval(&[s_n * eta[0], s_n * eta[1]][..d]);
                    if v != ZERO {
                        last.push(([k0, k1], eta, v));
                    }
                }
            }
            ScaleTerms { frozen: frozen_terms, last, t, weight }
        })
        .collect()
}

fn check(op: &ModelOperator, frozen: &[&SampledFunction]) -> Result<GridSpec> {
    let n = op.params.n;
    if frozen.len() + 1 != n {
        return Err(Error::Structural(format!("arity {n} needs {} frozen slots, got {}", n - 1, frozen.len())));
    }
    if frozen.is_empty() {
        return Err(Error::Structural("kernel evaluation needs the grid of at least one frozen slot".into()));
    }
    let spec = *frozen[0].spec();
    if frozen.iter().any(|f| *f.spec() != spec) {
        return Err(Error::Structural("frozen slots live on different grids".into()));
    }
    op.params.validate_against(&spec)?;
    Ok(spec)
}

/// `K(x, z) = Σ_t w_t ∫ Ψ_t(y) Π_{j<n} (Φ^j_{λ_j t} ∗ f_j)(x − ρ_j λ_j y) Φ^n_{λ_n t}(x − ρ_n λ_n y − z) dy`,
/// with the `y`-integral evaluated exactly in frequency.
pub fn kernel_eval(op: &ModelOperator, frozen: &[&SampledFunction], x: &[f64], z: &[f64]) -> Result<C64> {
    let spec = check(op, frozen)?;
    let d = spec.dimension();
    if x.len() != d || z.len() != d {
        return Err(Error::Structural("points must have the grid dimension".into()));
    }
    if spec.torus_distance(x, z) == 0.0 {
        return Err(Error::Singularity("the kernel is not evaluated on the diagonal x = z".into()));
    }
    let p = &op.params;
    let rho_n = p.rho[p.n - 1] * p.lambda[p.n - 1];
    let vol = spec.volume();
    let mut total = ZERO;
    for s in scale_terms(op, frozen, &spec, x) {
        let mut acc = ZERO;
        for &(_, eta, phi) in &s.last {
            let phase: f64 = (0..d).map(|a| (x[a] - z[a]) * eta[a]).sum();
            let e = C64::from_polar(1.0, phase) * phi;
            let tail = [s.t * rho_n * eta[0], s.t * rho_n * eta[1]];
            for (c, v) in &s.frozen {
                let psi = op.psi.eval(&[c[0] + tail[0], c[1] + tail[1]][..d]);
                if psi != ZERO {
                    acc += psi * v * e;
                }
            }
        }
        total += acc * (s.weight / vol);
    }
    Ok(total)
}

/// `K(x, z)` for every grid point `z`; the diagonal entry is the smooth finite value of the sum.
pub fn kernel_row(op: &ModelOperator, frozen: &[&SampledFunction], x: &[f64]) -> Result<SampledFunction> {
    let spec = check(op, frozen)?;
    let d = spec.dimension();
    if x.len() != d {
        return Err(Error::Structural("point must have the grid dimension".into()));
    }
    let p = &op.params;
    let rho_n = p.rho[p.n - 1] * p.lambda[p.n - 1];
    let vol = spec.volume();
    let mut coeffs = vec![ZERO; spec.len()];
    for s in scale_terms(op, frozen, &spec, x) {
        for &(k, eta, phi) in &s.last {
            let phase: f64 = (0..d).map(|a| x[a] * eta[a]).sum();
            let e = C64::from_polar(1.0, phase) * phi;
            let tail = [s.t * rho_n * eta[0], s.t * rho_n * eta[1]];
            let mut acc = ZERO;
            for (c, v) in &s.frozen {
                let psi = op.psi.eval(&[c[0] + tail[0], c[1] + tail[1]][..d]);
                if psi != ZERO {
                    acc += psi * v;
                }
            }
            let idx = spec.flat([spec.fold_index(-k[0]), spec.fold_index(-k[1])]);
            coeffs[idx] += acc * e * (s.weight / vol);
        }
    }
    fft_nd(&mut coeffs, spec.samples(), d, true);
    SampledFunction::new(spec, coeffs)
}

/// `sup_{z ≠ x} |K(x, z)| |x − z|^d` over grid points `z`.
pub fn kernel_decay_constant(op: &ModelOperator, frozen: &[&SampledFunction], x: &[f64]) -> Result<f64> {
    let row = kernel_row(op, frozen, x)?;
    let spec = *row.spec();
    let d = spec.dimension();
    Ok(row
        .values()
        .iter()
        .enumerate()
        .map(|(j, v)| {
            let p = spec.point(j);
            let r = spec.torus_distance(&p[..d], x);
            if r == 0.0 {
                0.0
            } else {
                v.norm() * r.powi(d as i32)
            }
        })
        .fold(0.0, f64::max))
}
