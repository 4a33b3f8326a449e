//! Autonomous sorting of cluttered piles with a two-finger gripper.
//!
//! The pipeline has a fixed-function first stage and a learned second stage:
//!
//! * [`heightmap`] holds the grid containers and image operations.
//! * [`grasp`] enumerates *closed grasps* on a heightmap with a monotonic
//!   stack, samples them by a rudimentary quality value and expands each
//!   one with the extra finger openings the heightmap allows.
//! * [`features`] turns a grasp hypothesis into fixed-length vectors.
//! * [`forest`] is an extremely randomized trees ensemble used both as the
//!   grasp-success classifier and the class-proportion regressor.
//! * [`policy`] ranks proposals by purity-weighted expected recovery.
//! * [`feedback`] converts drop-zone depth/RGB frames into per-class pixel
//!   counts, which are the training labels.
//! * [`simworld`] simulates the conveyor, the gripper and the drop zone.
//! * [`experiment`] runs the self-supervised loop and computes metrics.

pub mod class;
pub mod error;
pub mod experiment;
pub mod features;
pub mod feedback;
pub mod forest;
pub mod grasp;
pub mod heightmap;
pub mod policy;
pub mod simworld;

pub use class::{ObjectClass, NUM_OUTPUT_CLASSES};
pub use error::{Error, Result};
pub use experiment::{BlockMetrics, ExperimentConfig, ModelPair, PickRecord, TrainingExample};
pub use features::{FeatureLayout, FeatureVector};
pub use feedback::{ColorCounts, FrameStack, HsvBoxes};
pub use forest::{Forest, ForestKind, ForestParams};
pub use grasp::{Grasp1D, GraspRectangle, GripperGeometry, OpeningCurve};
pub use heightmap::{Heightmap, RgbMap, UnknownMask};
pub use policy::{Decision, EvaluatedGrasp};
pub use simworld::{GraspOutcome, Scene, SimObject, WorldConfig};
