//! Numerical laboratory for multilinear paraproducts on periodic grids.
//!
//! The crate realizes model paraproduct operators, the norms they are measured
//! in, Calderón–Zygmund and atomic decompositions, symbol-class checks, and an
//! operator-norm estimator with sweep harnesses.

pub mod czlab;
pub mod error;
pub mod estimator;
pub mod filterbank;
pub mod grid;
pub mod norms;
pub mod operators;
pub mod runner;
pub mod symbols;

pub use error::{Error, Result};
pub use grid::{GridSpec, SampledFunction, SpectrumFunction, C64};
