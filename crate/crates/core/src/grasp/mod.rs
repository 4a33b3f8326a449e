//! Fixed-function first stage: closed-grasp enumeration, weighted
//! subsampling and extra-opening expansion.

mod openings;
mod sample;
mod search;

pub use openings::{apply_openings, apply_openings_with};
pub use sample::weighted_sample;
pub use search::{closed_grasps, closed_grasps_1d, AngleScan, ScanSet};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Number of scan directions over [0, π).
pub const DEFAULT_NUM_ANGLES: usize = 16;

/// Proposals kept after weighted subsampling.
pub const DEFAULT_SAMPLE_SIZE: usize = 2000;

/// One closed grasp on a scan line: fingers centred at `i0` and `i1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grasp1D {
    pub i0: usize,
    pub i1: usize,
    /// Grasp height, `max(h[i0], h[i1])`.
    pub z: f64,
    /// Sum of the two inner step heights.
    pub v: f64,
}

/// Oriented grasp hypothesis in heightmap coordinates (mm).
///
/// The opening axis points along `(cos angle, sin angle)`; the rectangle's
/// short sides are the inner faces of the two fingers.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GraspRectangle {
    pub center_x: f64,
    pub center_y: f64,
    pub angle: f64,
    /// Distance between the inner finger faces at the closed position.
    pub inner_span: f64,
    pub finger_width: f64,
    pub z: f64,
    /// Additional symmetric opening commanded before descending.
    pub extra_opening: f64,
    pub value: f64,
}

impl GraspRectangle {
    pub fn axis(&self) -> (f64, f64) {
        let (s, c) = self.angle.sin_cos();
        (c, s)
    }

    /// Centres of the left and right fingers at the opened position, mm.
    pub fn finger_centers(&self, gripper: &GripperGeometry) -> ((f64, f64), (f64, f64)) {
        let (offset, _) = gripper.opening_curve.eval(self.extra_opening);
        let d = self.inner_span / 2.0 + offset + gripper.finger_thickness / 2.0;
        let (ux, uy) = self.axis();
        (
            (self.center_x - d * ux, self.center_y - d * uy),
            (self.center_x + d * ux, self.center_y + d * uy),
        )
    }
}

/// Piecewise-linear model of the finger movement: extra opening (mm) →
/// (outward offset of each inner face, fingertip lift), both mm. The last
/// segment is extrapolated.
#[derive(Debug, Clone, PartialEq)]
pub struct OpeningCurve {
    points: Vec<(f64, f64, f64)>,
}

impl OpeningCurve {
    /// Each face moves out by half the extra opening and lifts by
    /// `lift_ratio` times its offset.
    pub fn linear(lift_ratio: f64) -> Self {
        OpeningCurve {
            points: vec![(0.0, 0.0, 0.0), (100.0, 50.0, 50.0 * lift_ratio)],
        }
    }

    /// `points` are `(extra, offset, lift)`; must start at the origin and be
    /// nondecreasing in every column.
    pub fn from_table(points: Vec<(f64, f64, f64)>) -> Result<Self> {
        if points.first() != Some(&(0.0, 0.0, 0.0)) {
            return Err(Error::Config("opening curve must start at (0, 0, 0)".into()));
        }
        for w in points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if !(b.0 > a.0 && b.1 >= a.1 && b.2 >= a.2) {
                return Err(Error::Config("opening curve must be increasing in extra opening and nondecreasing in offset and lift".into()));
            }
        }
        Ok(OpeningCurve { points })
    }

    pub fn points(&self) -> &[(f64, f64, f64)] {
        &self.points
    }

    pub fn eval(&self, extra: f64) -> (f64, f64) {
        if extra <= 0.0 || self.points.len() < 2 {
            return (0.0, 0.0);
        }
        let k = self
            .points
            .windows(2)
            .position(|w| extra <= w[1].0)
            .unwrap_or(self.points.len() - 2);
        let (a, b) = (self.points[k], self.points[k + 1]);
        let t = (extra - a.0) / (b.0 - a.0);
        (a.1 + t * (b.1 - a.1), a.2 + t * (b.2 - a.2))
    }

    /// Smallest fingertip lift at which a face has moved out by `offset` mm.
    pub fn lift_at_offset(&self, offset: f64) -> f64 {
        if offset <= 0.0 || self.points.len() < 2 {
            return 0.0;
        }
        for w in self.points.windows(2) {
            let (a, b) = (w[0], w[1]);
            if offset <= b.1 && b.1 > a.1 {
                return a.2 + (offset - a.1) / (b.1 - a.1) * (b.2 - a.2);
            }
        }
        let (a, b) = (self.points[self.points.len() - 2], self.points[self.points.len() - 1]);
        if b.1 > a.1 {
            b.2 + (offset - b.1) / (b.1 - a.1) * (b.2 - a.2)
        } else {
            b.2
        }
    }
}

impl Default for OpeningCurve {
    fn default() -> Self {
        OpeningCurve::linear(0.15)
    }
}

/// Two-finger gripper dimensions, mm.
#[derive(Debug, Clone, PartialEq)]
pub struct GripperGeometry {
    pub finger_thickness: f64,
    pub finger_width: f64,
    pub min_opening: f64,
    pub max_opening: f64,
    pub opening_curve: OpeningCurve,
}

impl Default for GripperGeometry {
    fn default() -> Self {
        GripperGeometry {
            finger_thickness: 25.0,
            finger_width: 45.0,
            min_opening: 20.0,
            max_opening: 400.0,
            opening_curve: OpeningCurve::default(),
        }
    }
}

/// Gripper dimensions converted to heightmap pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GripperPx {
    pub finger_thickness: usize,
    pub finger_width: usize,
    pub min_opening: usize,
    pub max_opening: usize,
}

impl GripperGeometry {
    pub fn validate(&self) -> Result<()> {
        if !(self.finger_thickness > 0.0 && self.finger_width > 0.0) {
            return Err(Error::Config("finger dimensions must be positive".into()));
        }
        if !(0.0 < self.min_opening && self.min_opening < self.max_opening) {
            return Err(Error::Config("need 0 < min_opening < max_opening".into()));
        }
        Ok(())
    }

    /// Kernel sizes round up; the opening bounds round inwards so every
    /// pixel span maps back into `[min_opening, max_opening]`.
    pub fn in_pixels(&self, resolution: f64) -> GripperPx {
        let eps = 1e-9;
        GripperPx {
            finger_thickness: ((self.finger_thickness / resolution - eps).ceil() as usize).max(1),
            finger_width: ((self.finger_width / resolution - eps).ceil() as usize).max(1),
            min_opening: ((self.min_opening / resolution - eps).ceil() as usize).max(1),
            max_opening: (self.max_opening / resolution + eps).floor() as usize,
        }
    }
}
