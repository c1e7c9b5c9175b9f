//! Numerical laboratory for the zeros of Gaussian random holomorphic
//! sections of `O(N) → CP^m` with the Fubini–Study metric.

pub mod chart;
pub mod currents;
pub mod deviations;
pub mod domain;
pub mod ensemble;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod quadrature;
pub mod rng;
pub mod zeros;

pub use chart::ChartPoint;
pub use ensemble::{sample_section, EnsembleSpec, MultiIndex, PolySection};
pub use error::{Error, Result};
pub use num_complex::Complex64;
