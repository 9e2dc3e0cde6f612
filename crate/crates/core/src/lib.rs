//! Annealed Langevin sampling for MIMO symbol detection and channel estimation.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod detect;
pub mod error;
pub mod model;
pub mod sampler;
pub mod schedule;
pub mod score;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    ChannelModel, ChannelSpec, ComplexMatrix, ComplexVector, Constellation, ForwardModel,
    LinearChannel, Svd, C64,
};
pub use sampler::{anneal_run, compile_scheme, ensemble_run, SamplerState, SchemeSpec};
pub use schedule::{
    AnnealSchedule, DynamicsParams, MassMode, Order, PrecondMode, ScheduleConfig, StepRule,
};
pub use score::ScoreModel;
