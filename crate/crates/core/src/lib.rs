//! Slices of Moran-type Sierpinski carpets by lines of rational slope.
//!
//! The carpet `F_σ` applies, at level `j`, either the eight-map base-3 system
//! (`σ_j = 0`) or the twelve-map base-4 system (`σ_j = 1`). For a line
//! `y = (M/N) x + a` the number of level-`k` cells it meets is a product of
//! small nonnegative integer matrices selected by a greedy expansion of `a`;
//! [`transfer::matrix_counts`] computes it and [`slicing::oracle_counts`]
//! checks it against the geometry.
//!
//! Exact geometry is generic over the integer backing of [`Ratio`]
//! ([`scalar::ExactInt`]); logarithmic outputs are generic over
//! [`scalar::Real`]. The aliases below fix the common choices.

pub mod app;
pub mod carpet;
pub mod dimension;
pub mod error;
pub mod multifractal;
pub mod render;
pub mod scalar;
pub mod slicing;
pub mod transfer;

use num_bigint::BigInt;
use num_rational::Ratio;

pub use carpet::{carpet_dimension, cell_rect, CellWord, Digit, LevelTag, MoranSequence};
pub use dimension::{box_dim_sequence, verify_matrix_counts, DimensionEstimate, Method};
pub use error::{Error, Result};
pub use multifractal::{
    cylinder_measure, lyapunov_estimate, pressure_estimate, spectrum_upper_bound,
    chord_witness, PressureCurve, SymbolWord,
};
pub use render::{render_svg, RenderOptions};
pub use slicing::{count_oracle, greedy_expand, Intercept, Slope};
pub use transfer::{matrix_count, TransferMatrix, TransferSet};

/// Arbitrary-precision rational.
pub type Rational = Ratio<BigInt>;
/// Fast rational for shallow depths and small denominators.
pub type Rational64 = Ratio<i64>;
pub type Rational128 = Ratio<i128>;

pub type CellRect = carpet::Rect<BigInt>;
pub type Expansion = slicing::GreedyExpansion<BigInt>;
pub type ExactIntercept = slicing::Intercept<BigInt>;
pub type Estimate = DimensionEstimate<f64>;
pub type Pressure = multifractal::PressureValue<f64>;
