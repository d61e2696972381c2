//! Exact-diagonalization toolkit for thermal states of 1D spin chains:
//! conditional mutual information, maximum-entropy local Gibbs fits,
//! quantum belief propagation and recovery channels.
//!
//! All entropies are in nats. Site 0 is the slowest-varying tensor index.

pub mod beliefprop;
pub mod error;
pub mod hilbert;
pub mod info;
pub mod io;
pub mod linalg;
pub mod maxent;
pub mod random;
pub mod recovery;
pub mod states;
pub mod thermal;

pub use error::{Error, Result};
