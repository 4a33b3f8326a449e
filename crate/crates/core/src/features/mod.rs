//! Fixed-length feature vectors for a grasp hypothesis.
//!
//! Every image feature comes from an 80×39 px window of the map rotated into
//! the grasp frame, so its long axis runs along the opening direction. The
//! success model sees height (minus the grasp height), RGB and unknown
//! windows at the left finger, the centre and the right finger pooled by 4;
//! the color model sees the centre height and RGB windows pooled by 8. Six
//! scalars follow the image blocks: inner span, extra opening, z, centre x,
//! centre y and angle.
//!
//! [`extract_slice`] and the `*_features` functions are the direct
//! definition. [`FeatureContext`] computes the same values from per-angle
//! summed-area tables, one feature at a time, which is what the planner uses
//! to score thousands of proposals.

mod context;

pub use context::{FeatureContext, PreparedGrasp};

use serde::{Deserialize, Serialize};

use crate::grasp::{GraspRectangle, GripperGeometry};
use crate::heightmap::{Heightmap, RgbMap, RotationFrame, UnknownMask, BELT_GRAY};
use crate::{Error, Result};

/// Window length along the opening axis, px.
pub const SLICE_LEN: usize = 80;
/// Window width along the fingers, px.
pub const SLICE_WIDTH: usize = 39;
pub const NUM_SCALARS: usize = 6;

const SUCCESS_POOL: usize = 4;
const COLOR_POOL: usize = 8;
const SUCCESS_CHANNELS: usize = 5;
const COLOR_CHANNELS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureLayout {
    Success,
    Color,
}

impl FeatureLayout {
    pub fn len(self) -> usize {
        self.image_len() + NUM_SCALARS
    }

    pub fn image_len(self) -> usize {
        match self {
            FeatureLayout::Success => 3 * SUCCESS_CHANNELS * Pooling::SUCCESS.cells(),
            FeatureLayout::Color => COLOR_CHANNELS * Pooling::COLOR.cells(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureLayout::Success => "success",
            FeatureLayout::Color => "color",
        }
    }
}

/// Flat feature vector tagged with its layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub layout: FeatureLayout,
    pub values: Vec<f64>,
}

impl FeatureVector {
    pub fn new(layout: FeatureLayout, values: Vec<f64>) -> Result<Self> {
        if values.len() != layout.len() {
            return Err(Error::DimensionMismatch { expected: layout.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format(format!("feature {i} is not finite")));
        }
        Ok(FeatureVector { layout, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Success and color vectors of one proposal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVectors {
    pub success: FeatureVector,
    pub color: FeatureVector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Anchor {
    Left,
    Center,
    Right,
}

impl Anchor {
    pub const ALL: [Anchor; 3] = [Anchor::Left, Anchor::Center, Anchor::Right];

    fn sign(self) -> f64 {
        match self {
            Anchor::Left => -1.0,
            Anchor::Center => 0.0,
            Anchor::Right => 1.0,
        }
    }
}

/// Average pooling of an 80×39 window to a fixed grid; the last row absorbs
/// the leftover source rows.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Pooling {
    pub factor: usize,
    pub cols: usize,
    pub rows: usize,
}

impl Pooling {
    pub const SUCCESS: Pooling = Pooling { factor: SUCCESS_POOL, cols: SLICE_LEN / SUCCESS_POOL, rows: SLICE_WIDTH.div_ceil(SUCCESS_POOL) };
    pub const COLOR: Pooling = Pooling { factor: COLOR_POOL, cols: SLICE_LEN / COLOR_POOL, rows: SLICE_WIDTH.div_ceil(COLOR_POOL) };

    pub fn cells(self) -> usize {
        self.cols * self.rows
    }

    /// Half-open window rectangle `(u0, u1, v0, v1)` of pooled cell `(row, col)`.
    #[inline]
    pub fn cell(self, row: usize, col: usize) -> (usize, usize, usize, usize) {
        let v1 = if row + 1 == self.rows { SLICE_WIDTH } else { (row + 1) * self.factor };
        (col * self.factor, (col + 1) * self.factor, row * self.factor, v1)
    }

    pub fn apply(self, window: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.cells());
        for row in 0..self.rows {
            for col in 0..self.cols {
                let (u0, u1, v0, v1) = self.cell(row, col);
                let mut sum = 0.0;
                for v in v0..v1 {
                    sum += window[v * SLICE_LEN + u0..v * SLICE_LEN + u1].iter().sum::<f64>();
                }
                out.push(sum / ((u1 - u0) * (v1 - v0)) as f64);
            }
        }
        out
    }
}

/// Top-left corner, in the grasp's rotated frame, of the window at `anchor`.
pub(crate) fn window_origin(
    frame: &RotationFrame,
    resolution: f64,
    grasp: &GraspRectangle,
    gripper: &GripperGeometry,
    anchor: Anchor,
) -> (isize, isize) {
    let sx = grasp.center_x / resolution - 0.5;
    let sy = grasp.center_y / resolution - 0.5;
    let (xr, yr) = frame.from_source(sx, sy);
    let (offset, _) = gripper.opening_curve.eval(grasp.extra_opening);
    let reach = (grasp.inner_span / 2.0 + offset + gripper.finger_thickness / 2.0) / resolution;
    let ax = (xr + anchor.sign() * reach + 0.5).floor() as isize;
    let ay = (yr + 0.5).floor() as isize;
    (ax - (SLICE_LEN / 2) as isize, ay - (SLICE_WIDTH / 2) as isize)
}

/// A grid that windows can be cut from.
pub trait SliceSource {
    type Item: Copy;
    fn dims(&self) -> (usize, usize);
    fn cells(&self) -> &[Self::Item];
    /// Value seen beyond the map edge.
    fn fill(&self) -> Self::Item;
}

impl SliceSource for Heightmap {
    type Item = f64;
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
    fn cells(&self) -> &[f64] {
        self.data()
    }
    fn fill(&self) -> f64 {
        0.0
    }
}

impl SliceSource for RgbMap {
    type Item = [u8; 3];
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
    fn cells(&self) -> &[[u8; 3]] {
        self.data()
    }
    fn fill(&self) -> [u8; 3] {
        BELT_GRAY
    }
}

impl SliceSource for UnknownMask {
    type Item = bool;
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }
    fn cells(&self) -> &[bool] {
        self.data()
    }
    fn fill(&self) -> bool {
        false
    }
}

/// The 80×39 window (row-major, 80 per row) of `map` in the grasp frame,
/// centred at `anchor`, sampled nearest-neighbour.
pub fn extract_slice<M: SliceSource>(
    map: &M,
    resolution: f64,
    grasp: &GraspRectangle,
    gripper: &GripperGeometry,
    anchor: Anchor,
) -> Vec<M::Item> {
    let (w, h) = map.dims();
    let frame = RotationFrame::new(w, h, grasp.angle);
    let (x0, y0) = window_origin(&frame, resolution, grasp, gripper, anchor);
    let cells = map.cells();
    let mut out = Vec::with_capacity(SLICE_LEN * SLICE_WIDTH);
    for v in 0..SLICE_WIDTH as isize {
        for u in 0..SLICE_LEN as isize {
            out.push(match frame.source_pixel(x0 + u, y0 + v) {
                Some((x, y)) => cells[y * w + x],
                None => map.fill(),
            });
        }
    }
    out
}

fn scalars(grasp: &GraspRectangle) -> [f64; NUM_SCALARS] {
    [grasp.inner_span, grasp.extra_opening, grasp.z, grasp.center_x, grasp.center_y, grasp.angle]
}

fn channel_windows(rgb: &[[u8; 3]]) -> [Vec<f64>; 3] {
    std::array::from_fn(|c| rgb.iter().map(|p| p[c] as f64 / 255.0).collect())
}

/// Success-model vector, computed directly from the maps.
pub fn success_features(
    grasp: &GraspRectangle,
    gripper: &GripperGeometry,
    hm: &Heightmap,
    rgb: &RgbMap,
    um: &UnknownMask,
) -> FeatureVector {
    let res = hm.resolution();
    let pool = Pooling::SUCCESS;
    let mut values = Vec::with_capacity(FeatureLayout::Success.len());
    for anchor in Anchor::ALL {
        let heights = extract_slice(hm, res, grasp, gripper, anchor);
        values.extend(pool.apply(&heights).into_iter().map(|v| v - grasp.z));
        for ch in channel_windows(&extract_slice(rgb, res, grasp, gripper, anchor)) {
            values.extend(pool.apply(&ch));
        }
        let unknown: Vec<f64> = extract_slice(um, res, grasp, gripper, anchor)
            .into_iter()
            .map(|u| if u { 1.0 } else { 0.0 })
            .collect();
        values.extend(pool.apply(&unknown));
    }
    values.extend(scalars(grasp));
    FeatureVector { layout: FeatureLayout::Success, values }
}

/// Color-model vector, computed directly from the maps.
pub fn color_features(grasp: &GraspRectangle, gripper: &GripperGeometry, hm: &Heightmap, rgb: &RgbMap) -> FeatureVector {
    let res = hm.resolution();
    let pool = Pooling::COLOR;
    let mut values = Vec::with_capacity(FeatureLayout::Color.len());
    let heights = extract_slice(hm, res, grasp, gripper, Anchor::Center);
    values.extend(pool.apply(&heights).into_iter().map(|v| v - grasp.z));
    for ch in channel_windows(&extract_slice(rgb, res, grasp, gripper, Anchor::Center)) {
        values.extend(pool.apply(&ch));
    }
    values.extend(scalars(grasp));
    FeatureVector { layout: FeatureLayout::Color, values }
}
