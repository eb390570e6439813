//! Numerical laboratory for m-linear Fourier multipliers (m <= 3) acting on Hardy spaces.

pub mod atoms;
pub mod dyadic_frame;
pub mod error;
pub mod experiments;
pub mod function_spaces;
pub mod grid;
pub mod lp_frame;
pub mod maximal;
pub mod multiplier;
pub mod regions;
pub mod surrogates;

pub use error::{Error, Result};
pub use grid::{GridFunction, GridSpec, SpectralFunction, C64};
pub use lp_frame::{AnnularPartition, Kind, LpFamily};
