//! Principal autoparallel analysis: local-PCA direction fields traced into
//! curves, data projected along those curves onto affine base spaces, and
//! the procedure repeated one direction at a time.
//!
//! Everything is generic over the scalar type ([`Real`], implemented for
//! `f32` and `f64`); the aliases below fix it to `f64`.

pub mod datasets;
pub mod error;
pub mod frame;
pub mod io;
pub mod linalg;
pub mod neighbors;
pub mod pipeline;
pub mod projection;
pub mod scalar;
pub mod tracer;
pub mod types;

pub use error::{PapaError, Result};
pub use frame::{first_principal_direction, frame_at, DEFAULT_TIE_THRESHOLD};
pub use neighbors::{
    build_index, distance_histogram, distance_histogram_multi, estimate_radius, DistanceHistogram, Neighbor,
    SpatialIndex,
};
pub use pipeline::{isotropy_test, run_papa, IsotropyReport, IsotropySettings, LevelCount, PapaConfig, RadiusPolicy};
pub use projection::{choose_base_space, plane_crossings, project_all, project_point, BaseStrategy, PlaneCrossing};
pub use scalar::Real;
pub use tracer::{loop_defect, nonholonomic_map, trace_autoparallel, trace_from_point, TraceConfig};
pub use types::{
    validate_cloud, AutoparallelTrace, BaseSpace, FiberProjection, FrameEstimate, NeighborhoodSpec, PapaLevel,
    PapaModel, PointCloud, StopReason, Termination, TraceState,
};

pub type Cloud = types::PointCloud<f64>;
pub type Index = neighbors::SpatialIndex<f64>;
pub type Spec = types::NeighborhoodSpec<f64>;
pub type Frame = types::FrameEstimate<f64>;
pub type Trace = types::AutoparallelTrace<f64>;
pub type Base = types::BaseSpace<f64>;
pub type Projection = types::FiberProjection<f64>;
pub type Model = types::PapaModel<f64>;
pub type Config = pipeline::PapaConfig<f64>;
pub type Tracing = tracer::TraceConfig<f64>;
