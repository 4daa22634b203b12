//! Pose tracking by fusing single-frame joint predictions with spatial (bone)
//! and temporal (displacement) joint relations.
//!
//! The crate is organised bottom-up:
//!
//! - [`skeleton`]: joint trees, pose sequences and the relation-index function.
//! - [`relations`]: bone vectors, displacements, distance and weight maps,
//!   weighted relation-map decoding and the weighted L1 loss.
//! - [`tracker`]: the spatiotemporal least-squares tracker and its dense oracle.
//! - [`metrics`]: joint/bone/displacement errors, PCF and difficulty bins.
//! - [`synth`]: seeded synthetic motion and prediction noise.
//! - [`formats`]: versioned JSON file formats.

pub mod formats;
pub mod linalg;
pub mod metrics;
pub mod relations;
pub mod skeleton;
pub mod synth;
pub mod tracker;

pub use relations::{RelationMap, RelationVectors, WeightFamily, WeightMap, WeightSpec};
pub use skeleton::{JointTree, PoseSequence, RelationKind};
pub use synth::{FrameRate, MotionSpec, NoiseSpec};
pub use tracker::{DurationSet, Preset, TrackedResult, TrackerConfig, TrackingProblem};
