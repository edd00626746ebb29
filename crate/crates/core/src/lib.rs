//! Wideband near-field XL-MIMO channel estimation under beam squint.
//!
//! The crate is organised around the processing chain of a hybrid,
//! subarray-partitioned uniform linear array:
//!
//! * [`model`] synthesises the exact and subarray-approximate wideband
//!   near-field channels, hardware impairments and the planar-array delay
//!   model.
//! * [`frontend`] applies the block-diagonal analog combiner and noise.
//! * [`estimator`] holds the per-LPU delay machinery, the parametric-symmetry
//!   decoupling of angle, distance and range, and the sequential path loop.
//! * [`runtime`] runs the same loop as an explicit LPU/CPU message exchange.
//! * [`bounds`] computes Fisher information, CRLBs and distributed lower
//!   bounds.
//! * [`harness`] provides NMSE accounting, baselines, configuration and the
//!   Monte Carlo sweep.

pub mod bounds;
pub mod error;
pub mod estimator;
pub mod frontend;
pub mod harness;
pub mod model;
pub mod runtime;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub use bounds::{
    bounds_report, crlb_closed_form, crlb_closed_form_corrected, crlb_numeric, fim_numeric,
    lb_closed_form, resolution_predicate, BoundsReport, FimReport, LowerBounds, Resolution,
};
pub use estimator::{
    run_dps, DelayDictionary, DpsConfig, DpsOutput, PathEstimate, StoppingRule, SubarrayDelayTrack,
};
pub use frontend::{AnalogCombiner, ReceivedSignal};
pub use model::{
    ArrayGeometry, Impairments, PathParams, SteeringMode, SubcarrierGrid, UpaGeometry, UpaPath,
    WidebandChannel, SPEED_OF_LIGHT,
};
