//! Numerical laboratory for the two-dimensional free-boundary plasma problem
//!
//! ```text
//!   -Δv = [v]_+^p   in Ω,   v = γ on ∂Ω,   ∫ [v]_+^p = I
//! ```
//!
//! and its singularly perturbed form `-ε²Δv = [v-1]_+^p`, `v = 0` on `∂Ω`.
//!
//! The crate is organised bottom-up:
//!
//! - [`emden`]: the radial Emden solution `φ` on the unit disk and its
//!   `(p+k)`-integrals, the universal constants used everywhere else.
//! - [`entire`]: the classified finite-mass entire solutions, the rescaling
//!   operator, and the one-dimensional infinite-mass family.
//! - [`scales`]: the transcendental relation defining the refined length
//!   scale `s` and amplification `θ` from `ε`.
//! - [`profile`]: Dancer–Yan model spikes on the unit-area disk.
//! - [`grid`], [`solver`]: masked finite-difference grids and a damped Newton
//!   solver with `ε`-continuation.
//! - [`spikes`]: peak extraction, normalized rescaling, Type I / Type II /
//!   Fading / Vanishing classification, roundness and mass quantization.
//! - [`green`]: Dirichlet Green functions on disks and rectangles and the
//!   Kirchhoff–Routh Hamiltonian.
//! - [`experiment`]: reproducible end-to-end pipelines with JSON/CSV output.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod emden;
pub mod entire;
pub mod experiment;
pub mod field_io;
pub mod green;
pub mod grid;
pub mod ode;
pub mod profile;
pub mod quadrature;
pub mod scales;
pub mod solver;
pub mod spikes;

pub use emden::{solve_emden, EmdenConfig, EmdenError, EmdenSolution};
pub use entire::{EntireError, EntireSolution, OneDimSolution};
pub use green::{GreenError, GreenFn, KrConfig};
pub use grid::{GridDomain, Shape};
pub use profile::{DyProfile, ProfileError};
pub use scales::{solve_scale, ScaleError, ScaleParams};
pub use solver::{GridSolution, InitialGuess, ParameterSet, SolverConfig, SolverError};
pub use spikes::{SpikeLabel, SpikeRecord, SpikeSequence};

/// `√π`, the radius scale of the unit-area disk is `1/√π`.
pub const SQRT_PI: f64 = 1.772_453_850_905_516;

/// Radius of the disk of unit area.
pub const UNIT_AREA_RADIUS: f64 = 1.0 / SQRT_PI;
