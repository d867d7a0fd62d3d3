//! Multi-mode quantum Rabi model: an emitter coupled to every symmetric mode
//! of a one-dimensional cavity.
//!
//! Three engines check one another:
//!
//! * [`analytic`]: the coherent-state solution of the coupling-only problem,
//! * [`exact`]: exact diagonalization in a truncated Fock basis,
//! * [`mps`]: TEBD on the nearest-neighbour chain produced by [`chain`].
//!
//! [`observables`] turns their output into field maps, revival statistics and
//! light-cone diagnostics.

pub mod analytic;
pub mod chain;
pub mod error;
pub mod exact;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod observables;
pub mod series;

pub use error::{Error, Result};
pub use model::{EmitterKind, Geometry, HamiltonianTerms, ModelParams, UnitsConvention};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
