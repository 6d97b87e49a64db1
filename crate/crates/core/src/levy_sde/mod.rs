//! One-dimensional Lévy-driven flows: noise sampling, exact and Euler
//! propagation, interlacing of large jumps and coupled-noise diagnostics.

mod ddi;
mod flow;
mod model;
mod noise;

pub use ddi::{ddi_check, DdiReport, Scheme};
pub use flow::{interlaced_flow, simulate_affine, simulate_flow_euler, FlowResult, DIVERGENCE_BOUND};
pub use model::{
    Atom, JumpMap, LargeJumpSizes, LargeJumps, LevyMeasure, LevyModel, ModelValidation, ScalarFn,
    SmallJumps, StateJumpFn, DEFAULT_CUTOFF, DENSITY_PANELS,
};
pub use noise::{
    derive_seed, sample_noise_path, stream_rng, Jump, JumpEvent, JumpKind, NoisePath, PathNode,
};
