//! Geometry, field and observation data model.

pub mod field;
pub mod grid;
pub mod mask;
pub mod observe;
pub mod pgm;

pub use field::{FlowField, FluidProps};
pub use grid::Map2;
pub use mask::{BorderSegment, Cell, ChannelMask, Edge, InletSpec, OutletSpec, Port, Sidecar};
pub use observe::{
    preprocess_observations, Observation, ObservationSet, ObservationSource, RawSample,
};
