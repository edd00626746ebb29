//! Distributed parametric-symmetry estimator.

pub mod decouple;
pub mod dictionary;
pub mod dps;
pub mod extrapolate;
pub mod gain;
pub mod stopping;
pub mod upa;

pub use decouple::{decouple_angle, decouple_distance, decouple_range, AngleEstimate, ANGLE_LIMIT};
pub use dictionary::{ml_delay_detect, DelayDictionary, Detection};
pub use dps::{
    reconstruct_channel, run_dps, DpsConfig, DpsOutput, GainCombining, PathEstimate,
    Reconstruction, SquintModel, Termination,
};
pub use extrapolate::{
    extrapolate_delays, extrapolation_step, search_halfwidth, SubarrayDelayTrack,
};
pub use gain::{estimate_gain_lpu, gain_regressor, geometry_only, regressor_for, residual_update};
pub use stopping::{stopping_threshold, StoppingRule};
pub use upa::{upa_decouple, UpaEstimate};
