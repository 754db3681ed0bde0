//! Pedestrian environment model.
//!
//! Builds tracked identities, 3D world positions and 3D skeletons from
//! per-frame 2D pedestrian skeletons and ego-vehicle localization.
//!
//! The numeric core ([`geometry`], [`skeleton`], [`tracker`], [`position`])
//! is generic over the scalar type through [`Real`]; the aliases below fix it
//! to `f64` or `f32`. Scene generation and the file-based harness work in
//! `f64`.

pub mod geometry;
pub mod harness;
pub mod position;
pub mod scalar;
pub mod scenegen;
pub mod skeleton;
pub mod tracker;

pub use scalar::Real;

pub type CameraModel64 = geometry::CameraModel<f64>;
pub type CameraModel32 = geometry::CameraModel<f32>;
pub type Ray64 = geometry::Ray<f64>;
pub type Ray32 = geometry::Ray<f32>;
pub type Skeleton2D64 = skeleton::Skeleton2D<f64>;
pub type Skeleton2D32 = skeleton::Skeleton2D<f32>;
pub type Skeleton3D64 = skeleton::Skeleton3D<f64>;
pub type Skeleton3D32 = skeleton::Skeleton3D<f32>;
pub type BBox64 = skeleton::BBox<f64>;
pub type BBox32 = skeleton::BBox<f32>;
pub type EgoPose64 = tracker::EgoPose<f64>;
pub type EgoPose32 = tracker::EgoPose<f32>;
pub type Tracker64 = tracker::Tracker<f64>;
pub type Tracker32 = tracker::Tracker<f32>;
pub type Track64 = tracker::Track<f64>;
pub type Track32 = tracker::Track<f32>;
pub type KalmanCV64 = position::KalmanCV<f64>;
pub type KalmanCV32 = position::KalmanCV<f32>;
pub type RefineConfig64 = position::RefineConfig<f64>;
pub type RefineConfig32 = position::RefineConfig<f32>;
pub type PedestrianEstimate64 = position::PedestrianEstimate<f64>;
pub type PedestrianEstimate32 = position::PedestrianEstimate<f32>;
