//! Drop-zone feedback: turns a short recording of the uncluttered drop zone
//! into per-class pixel counts.
//!
//! Steps, per recording:
//! 1. per-pixel background = 20th percentile (nearest rank) of depth over time;
//! 2. foreground = pixels at least 6 mm closer than the background;
//! 3. per-frame volume above background inside the region of interest;
//! 4. temporal minimum filter (window 9) on the volumes, best frame = max;
//! 5. HSV box classification of the best frame's foreground pixels.

use serde::{Deserialize, Serialize};

use crate::heightmap::{Heightmap, RgbMap};
use crate::{Error, ObjectClass, Result, NUM_OUTPUT_CLASSES};

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    /// Distance from the camera, mm.
    pub depth: Heightmap,
    pub rgb: RgbMap,
}

/// Half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Roi {
    pub x0: usize,
    pub y0: usize,
    pub x1: usize,
    pub y1: usize,
}

impl Roi {
    pub fn full(width: usize, height: usize) -> Self {
        Roi { x0: 0, y0: 0, x1: width, y1: height }
    }

    pub fn inset(width: usize, height: usize, border: usize) -> Self {
        let bx = border.min(width / 2);
        let by = border.min(height / 2);
        Roi {
            x0: bx,
            y0: by,
            x1: width - bx,
            y1: height - by,
        }
    }

    pub fn area(&self) -> usize {
        (self.x1 - self.x0) * (self.y1 - self.y0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameStack {
    frames: Vec<Frame>,
    roi: Roi,
}

impl FrameStack {
    pub fn new(frames: Vec<Frame>, roi: Roi) -> Result<Self> {
        if frames.len() < 2 {
            return Err(Error::Format(format!("need at least 2 frames, got {}", frames.len())));
        }
        let (w, h) = (frames[0].depth.width(), frames[0].depth.height());
        for (i, f) in frames.iter().enumerate() {
            if f.depth.width() != w || f.depth.height() != h || f.rgb.width() != w || f.rgb.height() != h {
                return Err(Error::Format(format!("frame {i} dimensions differ from frame 0")));
            }
        }
        if roi.x0 >= roi.x1 || roi.y0 >= roi.y1 || roi.x1 > w || roi.y1 > h {
            return Err(Error::Format(format!("roi {roi:?} outside {w}x{h} frames")));
        }
        Ok(FrameStack { frames, roi })
    }

    pub fn frames(&self) -> &[Frame] {
        &self.frames
    }

    pub fn roi(&self) -> Roi {
        self.roi
    }

    pub fn width(&self) -> usize {
        self.frames[0].depth.width()
    }

    pub fn height(&self) -> usize {
        self.frames[0].depth.height()
    }
}

/// Pixel counts `(red, yellow, bluegreen, unknown)`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorCounts {
    pub counts: [u64; NUM_OUTPUT_CLASSES],
}

impl ColorCounts {
    pub fn new(counts: [u64; NUM_OUTPUT_CLASSES]) -> Self {
        ColorCounts { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn get(&self, class: ObjectClass) -> u64 {
        self.counts[class.index()]
    }

    /// Counts normalised to sum to one; all zeros when empty.
    pub fn proportions(&self) -> [f64; NUM_OUTPUT_CLASSES] {
        let total = self.total();
        let mut p = [0.0; NUM_OUTPUT_CLASSES];
        if total > 0 {
            for (o, c) in p.iter_mut().zip(self.counts) {
                *o = c as f64 / total as f64;
            }
        }
        p
    }
}

/// `(h°, s, v)` with `s, v ∈ [0, 1]`.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let (r, g, b) = (r as f64 / 255.0, g as f64 / 255.0, b as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * ((g - b) / delta).rem_euclid(6.0)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

/// One class's box: a union of hue intervals with saturation/value floors.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvBox {
    pub hue_ranges: Vec<(f64, f64)>,
    pub min_saturation: f64,
    pub min_value: f64,
}

impl HsvBox {
    pub fn contains(&self, (h, s, v): (f64, f64, f64)) -> bool {
        s >= self.min_saturation
            && v >= self.min_value
            && self.hue_ranges.iter().any(|&(lo, hi)| h >= lo && h <= hi)
    }
}

/// Boxes for red, yellow and blue-green, tried in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct HsvBoxes {
    pub boxes: [HsvBox; 3],
}

impl Default for HsvBoxes {
    fn default() -> Self {
        let b = |ranges: &[(f64, f64)]| HsvBox {
            hue_ranges: ranges.to_vec(),
            min_saturation: 0.35,
            min_value: 0.25,
        };
        HsvBoxes {
            boxes: [
                b(&[(0.0, 20.0), (340.0, 360.0)]),
                b(&[(40.0, 80.0)]),
                b(&[(150.0, 260.0)]),
            ],
        }
    }
}

impl HsvBoxes {
    pub fn classify(&self, rgb: [u8; 3]) -> ObjectClass {
        let hsv = rgb_to_hsv(rgb);
        self.boxes
            .iter()
            .position(|b| b.contains(hsv))
            .map(|i| ObjectClass::SORTABLE[i])
            .unwrap_or(ObjectClass::Unknown)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackConfig {
    pub percentile: f64,
    pub foreground_step_mm: f64,
    pub min_filter_window: usize,
    pub boxes: HsvBoxes,
}

impl Default for FeedbackConfig {
    fn default() -> Self {
        FeedbackConfig {
            percentile: 0.2,
            foreground_step_mm: 6.0,
            min_filter_window: 9,
            boxes: HsvBoxes::default(),
        }
    }
}

/// Per-pixel nearest-rank percentile of depth over time; rank
/// `⌈q·n⌉` (1-based, ascending).
pub fn background_level_at(frames: &[Frame], q: f64) -> Heightmap {
    assert!(!frames.is_empty());
    let (w, h) = (frames[0].depth.width(), frames[0].depth.height());
    let n = frames.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    let mut series = vec![0.0; n];
    let mut out = Vec::with_capacity(w * h);
    for i in 0..w * h {
        for (s, f) in series.iter_mut().zip(frames) {
            *s = f.depth.data()[i];
        }
        let (_, v, _) = series.select_nth_unstable_by(rank - 1, f64::total_cmp);
        out.push(*v);
    }
    Heightmap::from_data(w, h, frames[0].depth.resolution(), out).expect("depths are valid")
}

/// The 20th-percentile background.
pub fn background_level(frames: &[Frame]) -> Heightmap {
    background_level_at(frames, 0.2)
}

/// Centred temporal minimum filter; the window is clamped at both ends of
/// the sequence.
pub fn min_filter_1d(values: &[f64], window: usize) -> Vec<f64> {
    let before = window.saturating_sub(1) / 2;
    let after = window.saturating_sub(1) - before;
    (0..values.len())
        .map(|t| {
            let lo = t.saturating_sub(before);
            let hi = (t + after).min(values.len() - 1);
            values[lo..=hi].iter().copied().fold(f64::INFINITY, f64::min)
        })
        .collect()
}

/// Per-frame foreground volume inside the ROI (pixel area taken as 1).
pub fn frame_volumes(stack: &FrameStack, background: &Heightmap, step_mm: f64) -> Vec<f64> {
    let roi = stack.roi();
    let w = stack.width();
    stack
        .frames()
        .iter()
        .map(|f| {
            let mut vol = 0.0;
            for y in roi.y0..roi.y1 {
                for x in roi.x0..roi.x1 {
                    let i = y * w + x;
                    let (bg, d) = (background.data()[i], f.depth.data()[i]);
                    if d <= bg - step_mm {
                        vol += bg - d;
                    }
                }
            }
            vol
        })
        .collect()
}

/// Runs the whole feedback pipeline; see the module docs.
pub fn result(stack: &FrameStack, cfg: &FeedbackConfig) -> ColorCounts {
    let background = background_level_at(stack.frames(), cfg.percentile);
    let volumes = frame_volumes(stack, &background, cfg.foreground_step_mm);
    let filtered = min_filter_1d(&volumes, cfg.min_filter_window);
    let mut best = 0;
    for (t, v) in filtered.iter().enumerate() {
        if *v > filtered[best] {
            best = t;
        }
    }
    if !(filtered[best] > 0.0) {
        return ColorCounts::default();
    }
    let frame = &stack.frames()[best];
    let roi = stack.roi();
    let w = stack.width();
    let mut counts = [0u64; NUM_OUTPUT_CLASSES];
    for y in roi.y0..roi.y1 {
        for x in roi.x0..roi.x1 {
            let i = y * w + x;
            if frame.depth.data()[i] <= background.data()[i] - cfg.foreground_step_mm {
                counts[cfg.boxes.classify(frame.rgb.get(x, y)).index()] += 1;
            }
        }
    }
    ColorCounts::new(counts)
}
