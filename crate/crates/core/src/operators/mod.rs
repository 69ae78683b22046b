//! Model operators, classical paraproducts, multilinear multipliers, the Hilbert transform
//! and frozen-slot kernels.

pub mod kernel;
pub mod model;
pub mod multiplier;

pub use kernel::{kernel_decay_constant, kernel_eval, kernel_row};
pub use model::{model_operator, spatial_profile, Mode, ModelOperator, ModelOperatorParams, ScaleWeights};
pub use multiplier::{apply_multiplier, MultilinearOperator, SymbolGrid, SymbolOperator};

use crate::error::{Error, Result};
use crate::filterbank::Filter;
use crate::grid::{SampledFunction, C64};

/// `H f` with multiplier `−i sign(ξ)`; the mean and the Nyquist entry are annihilated.
pub fn hilbert_transform(f: &SampledFunction) -> Result<SampledFunction> {
    let spec = *f.spec();
    if spec.dimension() != 1 {
        return Err(Error::Unsupported(format!("the Hilbert transform needs d = 1, got d = {}", spec.dimension())));
    }
    let mut hat = f.spectrum();
    for (j, c) in hat.coefficients_mut().iter_mut().enumerate() {
        *c *= multiplier::hilbert_multiplier(&spec, spec.integer_frequency(j)[0]);
    }
    Ok(hat.to_sampled())
}

/// One slot `π^i_t = filter(dilation · t · ξ)` of a classical paraproduct.
#[derive(Clone, Debug, PartialEq)]
pub struct ParaproductSlot {
    pub filter: Filter,
    pub dilation: f64,
    /// Declares `π̂^i_t(0) = 0`; the declaration is checked against the filter.
    pub vanishing: bool,
}

impl ParaproductSlot {
    pub fn new(filter: Filter, dilation: f64, vanishing: bool) -> Self {
        ParaproductSlot { filter, dilation, vanishing }
    }
}

/// `Π(f_1, .., f_n) = Σ_t w_t Π_i (π^i_t ∗ f_i)` over the scales of `weights`.
pub fn classical_paraproduct(
    slots: &[ParaproductSlot],
    weights: &ScaleWeights,
    f: &[&SampledFunction],
) -> Result<SampledFunction> {
    if slots.len() != f.len() || slots.is_empty() {
        return Err(Error::Structural(format!("{} filter families for {} inputs", slots.len(), f.len())));
    }
    let spec = *f[0].spec();
    if f.iter().any(|g| *g.spec() != spec) {
        return Err(Error::Structural("inputs live on different grids".into()));
    }
    let d = spec.dimension();
    if !slots.iter().any(|s| s.vanishing) {
        return Err(Error::Validation("a paraproduct needs at least one slot with π̂(0) = 0".into()));
    }
    for (i, s) in slots.iter().enumerate() {
        if s.vanishing && !s.filter.vanishes_at_origin(d) {
            return Err(Error::Validation(format!("slot {} is declared vanishing but π̂(0) ≠ 0", i + 1)));
        }
        if !(s.dilation != 0.0 && s.dilation.is_finite()) {
            return Err(Error::Validation(format!("slot {} has dilation {}", i + 1, s.dilation)));
        }
    }
    let hats: Vec<_> = f.iter().map(|g| g.spectrum()).collect();
    let mut total = vec![C64::new(0.0, 0.0); spec.len()];
    for (t, w) in weights.scales() {
        if w == 0.0 {
            continue;
        }
        let mut prod = vec![C64::new(w, 0.0); spec.len()];
        for (s, hat) in slots.iter().zip(&hats) {
            let g = s.filter.apply_spectrum(hat, s.dilation * t).to_sampled();
            for (a, b) in prod.iter_mut().zip(g.values()) {
                *a *= b;
            }
        }
        for (a, b) in total.iter_mut().zip(&prod) {
            *a += b;
        }
    }
    SampledFunction::new(spec, total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridSpec;

    #[test]
    fn hilbert_of_cosine_is_sine() {
        let spec = GridSpec::unit_1d(64).unwrap();
        let f = SampledFunction::from_real_fn(spec, |x| (3.0 * x[0]).cos());
        let h = hilbert_transform(&f).unwrap();
        let s = SampledFunction::from_real_fn(spec, |x| (3.0 * x[0]).sin());
        assert!(h.max_diff(&s) < 1e-12);
    }

    #[test]
    fn hilbert_rejects_two_dimensions() {
        let spec = GridSpec::new(2, 8, 1.0).unwrap();
        assert!(matches!(hilbert_transform(&SampledFunction::zeros(spec)), Err(Error::Unsupported(_))));
    }

    #[test]
    fn paraproduct_needs_a_vanishing_slot() {
        let spec = GridSpec::unit_1d(32).unwrap();
        let f = SampledFunction::constant(spec, C64::new(1.0, 0.0));
        let ball = Filter::ball(1.0, 2.0).unwrap();
        let slots = vec![ParaproductSlot::new(ball.clone(), 1.0, false), ParaproductSlot::new(ball, 1.0, false)];
        let w = ScaleWeights::discrete_constant(-3, 0, 1.0);
        assert!(matches!(classical_paraproduct(&slots, &w, &[&f, &f]), Err(Error::Validation(_))));
    }

    #[test]
    fn false_vanishing_declaration_is_caught() {
        let spec = GridSpec::unit_1d(32).unwrap();
        let f = SampledFunction::constant(spec, C64::new(1.0, 0.0));
        let slots = vec![ParaproductSlot::new(Filter::ball(1.0, 2.0).unwrap(), 1.0, true)];
        let w = ScaleWeights::discrete_constant(-3, 0, 1.0);
        assert!(classical_paraproduct(&slots, &w, &[&f]).is_err());
    }
}
