//! Flow-aware navigation for magnetically actuated micro-robots.
//!
//! The pipeline predicts steady channel flow from a pixel mask ([`fvm`]), corrects it
//! with sparse velocity observations ([`refine`]), plans paths that exploit or avoid the
//! current ([`planner`]) and tracks references with flow compensation ([`control`],
//! [`simloop`]).

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod control;
pub mod domain;
pub mod error;
pub mod fixtures;
pub mod fvm;
pub mod planner;
pub mod refine;
pub mod simloop;

/// Planar vector in meters or meters per second.
pub type Vec2 = nalgebra::Vector2<f64>;

pub use domain::{
    BorderSegment, Cell, ChannelMask, Edge, FlowField, FluidProps, InletSpec, Map2, Observation,
    ObservationSet, ObservationSource, OutletSpec, RawSample, Sidecar,
};
pub use error::{Error, Result};
