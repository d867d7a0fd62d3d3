//! TEBD on the emitter + chain matrix product state.
//!
//! Site 0 is the emitter, site `i + 1` is chain site `b_i`. The emitter only
//! couples to `b_0`, so every term is nearest-neighbour and no swap gates are
//! needed.

mod checkpoint;
mod evolve;
mod gates;
mod state;

pub use checkpoint::{params_hash, Checkpoint};
pub use evolve::{evolve, ground_state_imaginary, trotter_step, GroundState, ImaginaryConfig, Observer};
pub use gates::{bond_hamiltonians, trotter_gates, EvolutionConfig, GateSet, TimeMode};
pub use state::{init_product_state, Direction, EmitterState, MpsState, SiteTensor, Truncation};
