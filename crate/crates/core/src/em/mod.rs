//! Offline EM learning of the parameter set from joint observations.

mod fit;
mod mstep;
mod stats;

pub use fit::{
    em_fit, multi_start_fit, start_seed, EmOptions, FitReport, MultiStartReport, StartOutcome, DEFAULT_TOLERANCE,
};
pub use mstep::{m_step, MStepReport, WeightingMode, ZeroMassRow, VARIANCE_FLOOR_FACTOR};
pub use stats::{
    compute_stats, forward_backward, joint_index, joint_init, joint_transition, log_likelihood, ChainPosterior,
    SufficientStats,
};
