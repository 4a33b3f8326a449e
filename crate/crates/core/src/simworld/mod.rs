//! Rule-based stand-in for the conveyor, the gantry robot and both cameras.
//!
//! There are no rigid-body dynamics: objects stack on whatever is beneath
//! their footprint, grasps are resolved geometrically and the drop-zone
//! camera is rendered as top-down silhouettes. All randomness flows through
//! the caller's generator so every run is reproducible from its seed.

mod dropzone;
mod gripper;
mod scene;

pub use dropzone::{silhouette_areas, synthesize_dropzone, DropzoneConfig};
pub use gripper::{execute_grasp, GraspOutcome, SlipModel};
pub use scene::{generate_pile, PileConfig, Pose, Scene, Shape, SimObject};

use crate::heightmap::CaptureConfig;
use crate::{Error, Result};

/// Everything that defines the simulated world.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldConfig {
    pub width_px: usize,
    pub height_px: usize,
    pub resolution_mm: f64,
    /// Horizontal position of the working-area camera, mm.
    pub camera_x_mm: f64,
    pub capture: CaptureConfig,
    pub pile: PileConfig,
    pub slip: SlipModel,
    /// Objects disturbed by a pick are re-dropped within this radius.
    pub disturb_radius_mm: f64,
    /// Contacts shallower than this, mm, are below what the heightmap
    /// resolves: fingers clip object edges by this much without stopping,
    /// and objects may exceed the opening by this much.
    pub contact_tolerance_mm: f64,
    pub dropzone: DropzoneConfig,
}

impl Default for WorldConfig {
    fn default() -> Self {
        WorldConfig {
            width_px: 400,
            height_px: 300,
            resolution_mm: 5.0,
            camera_x_mm: 1000.0,
            capture: CaptureConfig::default(),
            pile: PileConfig::default(),
            slip: SlipModel::default(),
            disturb_radius_mm: 30.0,
            contact_tolerance_mm: 2.5,
            dropzone: DropzoneConfig::default(),
        }
    }
}

impl WorldConfig {
    pub fn width_mm(&self) -> f64 {
        self.width_px as f64 * self.resolution_mm
    }

    pub fn height_mm(&self) -> f64 {
        self.height_px as f64 * self.resolution_mm
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 || !(self.resolution_mm > 0.0) {
            return Err(Error::Config("working area must be non-empty".into()));
        }
        if !(self.contact_tolerance_mm >= 0.0) {
            return Err(Error::Config("contact tolerance must be non-negative".into()));
        }
        self.pile.validate()?;
        self.slip.validate()?;
        self.dropzone.validate()
    }

    pub fn empty_scene(&self) -> Scene {
        Scene::new(self.width_px, self.height_px, self.resolution_mm)
    }
}
