//! Consensus propagation: an asynchronous distributed averaging protocol
//! built on Gaussian belief propagation, plus the spectral tooling used to
//! study its convergence time and a pairwise-averaging baseline.
//!
//! The crate is organized bottom-up:
//!
//! - [`graph`]: graphs, directed-edge indexing and the graph families used
//!   in experiments (cycles, tori, random regular graphs, trees).
//! - [`engine`]: the message-passing state machine and its schedules.
//! - [`analysis`]: Laplacian mode solve, the directed-edge Markov chain,
//!   Cesàro mixing time and the pairwise mixing time.
//! - [`baseline`]: synchronous pairwise averaging.
//! - [`adaptive`]: doubling search over the unknown mixing time.
//! - [`harness`]: experiment configuration, sweeps and result emission.

pub mod adaptive;
pub mod analysis;
pub mod baseline;
pub mod engine;
mod error;
pub mod graph;
pub mod harness;
pub mod norms;

pub use error::{Error, Result};
