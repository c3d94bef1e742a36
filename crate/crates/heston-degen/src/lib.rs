//! Solver and verifier for the degenerate parabolic Heston pricing problem
//! on the upper half-plane `H = R x (0, inf)`.
//!
//! The crate discretizes the Heston operator in weighted Sobolev spaces,
//! evolves the pricing Cauchy problem with a transport equation governing
//! the degenerate boundary row `xi = 0`, and cross-checks the solver against
//! independent oracles (Monte Carlo, characteristic-function pricing, heat
//! kernel convolution) together with numeric verifiers for maximum-principle
//! bounds, barrier sign certificates, semigroup smoothing rates, and
//! trace / Hardy-Sobolev inequalities.

pub mod barriers;
pub mod cli;
pub mod config;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod operator;
pub mod oracles;
pub mod params;
pub mod report;
pub mod spaces;
pub mod traces;

pub use error::Error;
pub use field::Field;
pub use grid::Grid2D;
pub use params::{ModelParams, ValidityReport, WeightParams};
