//! Geometry, path and channel types plus wideband near-field synthesis.

pub mod channel;
pub mod geometry;
pub mod impairments;
pub mod path;
pub mod steering;
pub mod upa;

pub use channel::{
    read_complex_matrix, synthesize_channel, synthesize_channel_exact,
    synthesize_channel_subarray_approx, write_complex_matrix, WidebandChannel,
};
pub use geometry::{index_offset, ArrayGeometry, SubcarrierGrid, SPEED_OF_LIGHT};
pub use impairments::{apply_impairments, Impairments};
pub use path::{
    distance_at, distance_variation_approx, fresnel_variation, scatterer_antenna_distance,
    subarray_observed_params, PathParams,
};
pub use steering::{
    beam_squint_matrix_full, delay_steering, freq_steering, near_field_steering, subarray_steering,
    SteeringMode,
};
pub use upa::{upa_delay_map, upa_normalized_delays, upa_per_antenna_delay, UpaGeometry, UpaPath};
