//! Exactly solvable complex-valued linear oscillator network.
//!
//! The network `dx/dt = (i*omega*I + K) x` is propagated in closed form in the
//! eigenbasis of its generator. On top of that sit inverse input design,
//! local-order readout and three task families: logic gates, short-term
//! memory and a chimera-alphabet message protocol.

pub mod crypto;
pub mod decode;
pub mod error;
pub mod lif;
pub mod network;
pub mod patterns;
pub mod propagator;
pub mod reference;
pub mod seeding;
pub mod state;
pub mod sweep;
pub mod tasks;

pub use error::{CvnnError, Result};
pub use network::{build_ring_coupling, CouplingMatrix, ModelParams, Topology};
pub use propagator::{spectral_factorize, Propagator, CONDITION_GUARD};
pub use state::{amplitude_stats, AmplitudeStats, NetworkState, Trajectory};
