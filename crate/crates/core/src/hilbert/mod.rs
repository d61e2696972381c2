//! Tensor-product bookkeeping on chains: geometry, labelled operators and
//! states, Hermitian matrix functions, state metrics and CP maps.

mod channel;
mod funcs;
mod geometry;
mod operator;
mod state;

pub use channel::{channel_apply, Channel, ChannelReport, Register, CHOI_CAP};
pub use funcs::{hermitian_fn, psd_power, support_projector, MatFn, Support, EIG_CUTOFF, NEG_TOL};
pub use geometry::{Boundary, ChainGeometry, SiteSet, DEFAULT_MAX_DIM};
pub use operator::Operator;
pub use state::{fidelity, state_metrics, trace_distance, DensityMatrix, StateMetrics};
