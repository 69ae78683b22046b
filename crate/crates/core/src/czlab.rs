//! Calderón–Zygmund decomposition on torus-aligned dyadic cubes, and H^{q1} atoms.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filterbank::multi_indices;
use crate::grid::{GridSpec, SampledFunction, C64};
use crate::norms::cube_cells;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Cube of side `Λ/2^level` whose lower corner sits at `index · Λ/2^level`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicCube {
    pub level: u32,
    pub index: [usize; 2],
}

impl DyadicCube {
    pub fn new(spec: &GridSpec, level: u32, index: [usize; 2]) -> Result<Self> {
        let n = spec.samples();
        if (1usize << level) > n {
            return Err(Error::Argument(format!("level {level} is finer than the grid of {n} samples")));
        }
        let per_axis = 1usize << level;
        let used = if spec.dimension() == 1 { &index[..1] } else { &index[..] };
        if used.iter().any(|&i| i >= per_axis) || (spec.dimension() == 1 && index[1] != 0) {
            return Err(Error::Argument(format!("cube index {index:?} out of range at level {level}")));
        }
        Ok(DyadicCube { level, index })
    }

    pub fn root() -> Self {
        DyadicCube { level: 0, index: [0, 0] }
    }

    /// Side length in samples.
    pub fn side_cells(&self, spec: &GridSpec) -> usize {
        spec.samples() >> self.level
    }

    pub fn side_length(&self, spec: &GridSpec) -> f64 {
        spec.period() / (1u64 << self.level) as f64
    }

    pub fn measure(&self, spec: &GridSpec) -> f64 {
        self.side_length(spec).powi(spec.dimension() as i32)
    }

    pub fn center(&self, spec: &GridSpec) -> [f64; 2] {
        let l = self.side_length(spec);
        let c0 = (self.index[0] as f64 + 0.5) * l;
        if spec.dimension() == 1 {
            [c0, 0.0]
        } else {
            [c0, (self.index[1] as f64 + 0.5) * l]
        }
    }

    fn number(&self, spec: &GridSpec) -> usize {
        if spec.dimension() == 1 {
            self.index[0]
        } else {
            self.index[0] * (1usize << self.level) + self.index[1]
        }
    }

    /// Flat sample indices inside the cube.
    pub fn cells(&self, spec: &GridSpec) -> Vec<usize> {
        cube_cells(spec.samples(), spec.dimension(), self.side_cells(spec), self.number(spec))
    }

    pub fn contains(&self, spec: &GridSpec, flat: usize) -> bool {
        let side = self.side_cells(spec);
        let a = spec.axes(flat);
        a[0] / side == self.index[0] && (spec.dimension() == 1 || a[1] / side == self.index[1])
    }

    pub fn children(&self, spec: &GridSpec) -> Vec<DyadicCube> {
        let level = self.level + 1;
        let [i, j] = self.index;
        if spec.dimension() == 1 {
            vec![DyadicCube { level, index: [2 * i, 0] }, DyadicCube { level, index: [2 * i + 1, 0] }]
        } else {
            vec![
                DyadicCube { level, index: [2 * i, 2 * j] },
                DyadicCube { level, index: [2 * i, 2 * j + 1] },
                DyadicCube { level, index: [2 * i + 1, 2 * j] },
                DyadicCube { level, index: [2 * i + 1, 2 * j + 1] },
            ]
        }
    }

    /// Whether the cube dilated by `factor` about its center covers the point, on the torus.
    pub fn dilate_contains(&self, spec: &GridSpec, factor: f64, point: &[f64]) -> bool {
        let c = self.center(spec);
        let half = 0.5 * factor * self.side_length(spec);
        (0..spec.dimension()).all(|a| spec.fold_coordinate(point[a] - c[a]).abs() <= half)
    }
}

/// A bad piece `b_k`, stored on the cells of its cube.
#[derive(Clone, Debug, PartialEq)]
pub struct CZPiece {
    pub cube: DyadicCube,
    pub values: Vec<C64>,
}

impl CZPiece {
    pub fn to_function(&self, spec: &GridSpec) -> SampledFunction {
        let mut out = SampledFunction::zeros(*spec);
        for (&j, &v) in self.cube.cells(spec).iter().zip(&self.values) {
            out.values_mut()[j] = v;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CZParts {
    pub g: SampledFunction,
    pub pieces: Vec<CZPiece>,
    pub alpha: f64,
    pub q1: f64,
    /// Threshold the q1-averages were compared with.
    pub level: f64,
}

/// Calderón–Zygmund decomposition at height `α`, selecting maximal cubes whose q1-average exceeds `α`.
pub fn cz_decompose(f: &SampledFunction, alpha: f64, q1: f64) -> Result<CZParts> {
    cz_decompose_scaled(f, alpha, q1, q1)
}

/// Variant with threshold `α^{q/q1}`.
pub fn cz_decompose_scaled(f: &SampledFunction, alpha: f64, q1: f64, q: f64) -> Result<CZParts> {
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::Argument(format!("level α must be positive, got {alpha}")));
    }
    if !(q1 >= 1.0 && q1.is_finite()) {
        return Err(Error::Argument(format!("q1 must lie in [1, ∞), got {q1}")));
    }
    if !(q > 0.0 && q.is_finite()) {
        return Err(Error::Argument(format!("q must be positive and finite, got {q}")));
    }
    if f.max_abs() == 0.0 {
        return Err(Error::Argument("decomposition of the zero function".into()));
    }
    let level = alpha.powf(q / q1);
    let spec = *f.spec();
    let stat = |cube: &DyadicCube| -> f64 {
        let cells = cube.cells(&spec);
        let s: f64 = cells.iter().map(|&j| f.values()[j].norm().powf(q1)).sum();
        (s / cells.len() as f64).powf(1.0 / q1)
    };
    let root = DyadicCube::root();
    let global = stat(&root);
    if global > level {
        return Err(Error::DegenerateLevel(format!(
            "the q1-average {global:.6e} over the whole torus exceeds the level {level:.6e}; \
             raise α above the global average"
        )));
    }
    let max_level = spec.samples().trailing_zeros();
    let mut selected = Vec::new();
    let mut stack = vec![root];
    while let Some(cube) = stack.pop() {
        if cube.level == max_level {
            continue;
        }
        for child in cube.children(&spec).into_iter().rev() {
            if stat(&child) > level {
                selected.push(child);
            } else {
                stack.push(child);
            }
        }
    }
    let mut g = f.clone();
    let mut pieces = Vec::with_capacity(selected.len());
    for cube in selected {
        let cells = cube.cells(&spec);
        let mean = cells.iter().map(|&j| f.values()[j]).sum::<C64>() / cells.len() as f64;
        let values = cells.iter().map(|&j| f.values()[j] - mean).collect();
        for &j in &cells {
            g.values_mut()[j] = mean;
        }
        pieces.push(CZPiece { cube, values });
    }
    Ok(CZParts { g, pieces, alpha, q1, level })
}

impl CZParts {
    pub fn spec(&self) -> &GridSpec {
        self.g.spec()
    }

    /// `g + Σ b_k`.
    pub fn reconstruct(&self) -> SampledFunction {
        let spec = *self.spec();
        let mut out = self.g.clone();
        for p in &self.pieces {
            for (&j, &v) in p.cube.cells(&spec).iter().zip(&p.values) {
                out.values_mut()[j] += v;
            }
        }
        out
    }

    /// `Σ |Q_k|`.
    pub fn total_measure(&self) -> f64 {
        self.pieces.iter().map(|p| p.cube.measure(self.spec())).sum()
    }

    /// Largest magnitude of a piece mean `⨍_{Q_k} b_k`.
    pub fn max_piece_mean(&self) -> f64 {
        let cell = self.spec().cell();
        self.pieces
            .iter()
            .map(|p| (p.values.iter().sum::<C64>() * cell).norm() / p.cube.measure(self.spec()))
            .fold(0.0, f64::max)
    }

    pub fn cubes_disjoint(&self) -> bool {
        let spec = self.spec();
        let mut seen = vec![false; spec.len()];
        for p in &self.pieces {
            for j in p.cube.cells(spec) {
                if seen[j] {
                    return false;
                }
                seen[j] = true;
            }
        }
        true
    }

    /// `max_x Σ_k 1_{10 Q_k}(x)` over grid samples.
    pub fn overlap_count(&self) -> usize {
        let spec = *self.spec();
        let d = spec.dimension();
        (0..spec.len())
            .map(|j| {
                let p = spec.point(j);
                self.pieces.iter().filter(|b| b.cube.dilate_contains(&spec, 10.0, &p[..d])).count()
            })
            .max()
            .unwrap_or(0)
    }

    /// Text serialization: one `level i j` line per cube followed by grid dumps of g and each piece.
    pub fn write(&self, mut w: impl std::io::Write) -> Result<()> {
        let spec = *self.spec();
        writeln!(w, "cz alpha={:.16e} q1={:.16e} level={:.16e} pieces={}", self.alpha, self.q1, self.level, self.pieces.len())?;
        for p in &self.pieces {
            writeln!(w, "cube {} {} {}", p.cube.level, p.cube.index[0], p.cube.index[1])?;
        }
        crate::grid::write_dump(&self.g, &mut w)?;
        for p in &self.pieces {
            crate::grid::write_dump(&p.to_function(&spec), &mut w)?;
        }
        Ok(())
    }
}

/// An L²-normalized H^{q1} atom.
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub cube: DyadicCube,
    pub values: SampledFunction,
    pub q1: f64,
    pub moment_order: usize,
}

/// `[d/q1 − d]`, the highest vanishing moment order an H^{q1} atom needs.
pub fn moment_order(d: usize, q1: f64) -> usize {
    let v = d as f64 / q1 - d as f64;
    (v + 1e-9).floor().max(0.0) as usize
}

/// Highest moment order the atom builder accepts.
pub const MAX_MOMENT_ORDER: usize = 4;

fn local_coordinates(spec: &GridSpec, cube: &DyadicCube, j: usize) -> [f64; 2] {
    let p = spec.point(j);
    let c = cube.center(spec);
    let half = 0.5 * cube.side_length(spec);
    [(p[0] - c[0]) / half, (p[1] - c[1]) / half]
}

fn monomial(u: [f64; 2], alpha: &[usize]) -> f64 {
    alpha.iter().enumerate().map(|(a, &e)| u[a].powi(e as i32)).product()
}

/// Random atom on `Q` with moments up to `[d/q1 − d]` projected out and `‖a‖₂ = |Q|^{1/2−1/q1}`.
pub fn make_atom(spec: &GridSpec, cube: DyadicCube, q1: f64, seed: u64) -> Result<Atom> {
    let d = spec.dimension();
    if !(q1 > 0.0 && q1 <= 1.0) {
        return Err(Error::Argument(format!("atom exponent q1 must lie in (0, 1], got {q1}")));
    }
    let order = moment_order(d, q1);
    if order > MAX_MOMENT_ORDER {
        return Err(Error::Argument(format!(
            "q1={q1} requires moments up to order {order}, above the supported {MAX_MOMENT_ORDER}"
        )));
    }
    let cube = DyadicCube::new(spec, cube.level, cube.index)?;
    let cells = cube.cells(spec);
    let exps = multi_indices(d, order);
    if cells.len() < exps.len() + 1 {
        return Err(Error::CubeSize(format!(
            "cube of {} cells cannot carry {} moment constraints",
            cells.len(),
            exps.len()
        )));
    }
    let coords: Vec<[f64; 2]> = cells.iter().map(|&j| local_coordinates(spec, &cube, j)).collect();
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for e in &exps {
        let mut v: Vec<f64> = coords.iter().map(|&u| monomial(u, e)).collect();
        for _ in 0..2 {
            for b in &basis {
                let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
                v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
            }
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-10 {
            return Err(Error::CubeSize("monomials are degenerate on this cube".into()));
        }
        basis.push(v.into_iter().map(|x| x / norm).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut r: Vec<f64> = (0..cells.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
    for _ in 0..2 {
        for b in &basis {
            let dot: f64 = r.iter().zip(b).map(|(x, y)| x * y).sum();
            r.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
    }
    let norm = (r.iter().map(|x| x * x).sum::<f64>() * spec.cell()).sqrt();
    if norm == 0.0 {
        return Err(Error::CubeSize("projection left nothing on the cube".into()));
    }
    let target = cube.measure(spec).powf(0.5 - 1.0 / q1);
    let mut values = SampledFunction::zeros(*spec);
    for (&j, x) in cells.iter().zip(&r) {
        values.values_mut()[j] = C64::new(x * target / norm, 0.0);
    }
    Ok(Atom { cube, values, q1, moment_order: order })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AtomReport {
    pub support_ok: bool,
    /// `Σ |a|·cell` outside the cube.
    pub leaked_mass: f64,
    pub l2_norm: f64,
    pub l2_bound: f64,
    /// `log₂(bound / ‖a‖₂)`, negative when the bound fails.
    pub l2_slack: f64,
    pub l2_ok: bool,
    /// Per multi-index: `|Σ ((x−c)/(ℓ/2))^α a(x)·cell| / ‖a‖₁`.
    pub moment_residuals: Vec<(Vec<usize>, f64)>,
    pub moments_ok: bool,
}

impl AtomReport {
    pub fn passed(&self) -> bool {
        self.support_ok && self.l2_ok && self.moments_ok
    }
}

pub const MOMENT_TOLERANCE: f64 = 1e-12;

pub fn validate_atom(a: &Atom) -> AtomReport {
    let spec = *a.values.spec();
    let d = spec.dimension();
    let cell = spec.cell();
    let mut leaked = 0.0;
    let mut l1 = 0.0;
    for (j, v) in a.values.values().iter().enumerate() {
        if *v == ZERO {
            continue;
        }
        l1 += v.norm() * cell;
        if !a.cube.contains(&spec, j) {
            leaked += v.norm() * cell;
        }
    }
    let l2 = crate::norms::lp_norm(&a.values, 2.0);
    let bound = a.cube.measure(&spec).powf(0.5 - 1.0 / a.q1);
    let slack = (bound / l2).log2();
    let mut residuals = Vec::new();
    for e in multi_indices(d, a.moment_order) {
        let mut m = ZERO;
        for (j, v) in a.values.values().iter().enumerate() {
            if *v != ZERO {
                m += v * monomial(local_coordinates(&spec, &a.cube, j), &e);
            }
        }
        let scale = if l1 > 0.0 { l1 } else { 1.0 };
        residuals.push((e, (m * cell).norm() / scale));
    }
    let moments_ok = residuals.iter().all(|(_, r)| *r <= MOMENT_TOLERANCE);
    AtomReport {
        support_ok: leaked == 0.0,
        leaked_mass: leaked,
        l2_norm: l2,
        l2_bound: bound,
        l2_slack: slack,
        l2_ok: l2 <= bound * (1.0 + 1e-12),
        moment_residuals: residuals,
        moments_ok,
    }
}
