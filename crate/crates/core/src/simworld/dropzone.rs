use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::SimObject;
use crate::feedback::{Frame, FrameStack, Roi};
use crate::heightmap::{Heightmap, RgbMap, BELT_GRAY};
use crate::{Error, Result, NUM_OUTPUT_CLASSES};

/// Simulated drop-zone camera looking straight down at a running conveyor.
#[derive(Debug, Clone, PartialEq)]
pub struct DropzoneConfig {
    pub width_px: usize,
    pub height_px: usize,
    pub resolution_mm: f64,
    /// Camera-to-belt distance.
    pub background_depth_mm: f64,
    pub noise_sigma_mm: f64,
    pub frames: usize,
    /// Inclusive range of the frame at which the thrown objects enter.
    pub entry_frame: (usize, usize),
    /// Frames the objects need to cross the whole view.
    pub traverse_frames: f64,
    /// Lane pitch across the belt and column pitch along it, pixels.
    pub slot_px: usize,
    pub column_px: usize,
    pub roi_border_px: usize,
}

impl Default for DropzoneConfig {
    fn default() -> Self {
        DropzoneConfig {
            width_px: 320,
            height_px: 200,
            resolution_mm: 4.0,
            background_depth_mm: 1200.0,
            noise_sigma_mm: 1.5,
            frames: 50,
            entry_frame: (5, 15),
            traverse_frames: 25.0,
            slot_px: 60,
            column_px: 64,
            roi_border_px: 10,
        }
    }
}

impl DropzoneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frames < 2 || self.entry_frame.0 > self.entry_frame.1 || self.traverse_frames <= 0.0 {
            return Err(Error::Config("invalid drop-zone timing".into()));
        }
        if self.lanes() == 0 || self.noise_sigma_mm < 0.0 || !(self.resolution_mm > 0.0) {
            return Err(Error::Config("invalid drop-zone geometry".into()));
        }
        Ok(())
    }

    fn lanes(&self) -> usize {
        self.height_px.saturating_sub(2 * self.roi_border_px) / self.slot_px.max(1)
    }

    pub fn roi(&self) -> Roi {
        Roi::inset(self.width_px, self.height_px, self.roi_border_px)
    }
}

/// Objects laid out in lanes across the belt; returns copies posed in
/// drop-zone pixel coordinates relative to the convoy head.
fn layout(picked: &[SimObject], cfg: &DropzoneConfig) -> Vec<(SimObject, f64, f64)> {
    let lanes = cfg.lanes();
    picked
        .iter()
        .enumerate()
        .map(|(i, o)| {
            let (col, lane) = (i / lanes, i % lanes);
            let dx = -((col * cfg.column_px) as f64);
            let y = (cfg.roi_border_px + cfg.slot_px / 2 + lane * cfg.slot_px) as f64;
            (o.clone(), dx, y)
        })
        .collect()
}

fn convoy_length(n: usize, cfg: &DropzoneConfig) -> f64 {
    let cols = n.div_ceil(cfg.lanes()).max(1);
    (cfg.slot_px + (cols - 1) * cfg.column_px) as f64
}

/// Paints one object centred at pixel `(cx, cy)`; returns painted pixels.
fn paint(obj: &SimObject, cx: f64, cy: f64, res: f64, mut put: impl FnMut(usize, usize), w: usize, h: usize) {
    let ex = obj.half_extent(1.0, 0.0) / res;
    let ey = obj.half_extent(0.0, 1.0) / res;
    let x0 = (cx - ex - 1.0).floor().max(0.0) as usize;
    let y0 = (cy - ey - 1.0).floor().max(0.0) as usize;
    let x1 = ((cx + ex + 1.0).ceil() as isize).min(w as isize - 1);
    let y1 = ((cy + ey + 1.0).ceil() as isize).min(h as isize - 1);
    let mut probe = obj.clone();
    probe.pose.x = 0.0;
    probe.pose.y = 0.0;
    for y in y0 as isize..=y1 {
        for x in x0 as isize..=x1 {
            let px = (x as f64 + 0.5 - cx) * res;
            let py = (y as f64 + 0.5 - cy) * res;
            if probe.contains(px, py) {
                put(x as usize, y as usize);
            }
        }
    }
}

/// Ground-truth silhouette area per class (pixels) for objects fully in
/// view, in the order `red, yellow, bluegreen, unknown`.
pub fn silhouette_areas(picked: &[SimObject], cfg: &DropzoneConfig) -> [usize; NUM_OUTPUT_CLASSES] {
    let mut areas = [0usize; NUM_OUTPUT_CLASSES];
    let head = cfg.width_px as f64 / 2.0 + convoy_length(picked.len(), cfg) / 2.0 - cfg.slot_px as f64 / 2.0;
    for (obj, dx, y) in layout(picked, cfg) {
        let mut n = 0;
        paint(&obj, head + dx, y, cfg.resolution_mm, |_, _| n += 1, usize::MAX / 2, usize::MAX / 2);
        areas[obj.class.index()] += n;
    }
    areas
}

/// Renders the drop-zone camera while the picked objects ride through.
///
/// Background depth is a flat plane with per-pixel Gaussian noise. The
/// objects enter at a random frame in `entry_frame`, cross the view in about
/// `traverse_frames` and leave; their top faces sit `thickness` closer to
/// the camera than the belt.
pub fn synthesize_dropzone<R: Rng + ?Sized>(picked: &[SimObject], cfg: &DropzoneConfig, rng: &mut R) -> FrameStack {
    let (w, h) = (cfg.width_px, cfg.height_px);
    let enter = rng.random_range(cfg.entry_frame.0..=cfg.entry_frame.1) as f64;
    let length = convoy_length(picked.len(), cfg);
    let speed = (w as f64 + length) / cfg.traverse_frames;
    let start = -(cfg.slot_px as f64) / 2.0;
    let placed = layout(picked, cfg);
    let noise = Normal::new(0.0, cfg.noise_sigma_mm.max(0.0)).expect("finite sigma");

    let mut frames = Vec::with_capacity(cfg.frames);
    for t in 0..cfg.frames {
        let mut depth = vec![cfg.background_depth_mm; w * h];
        let mut rgb = RgbMap::filled(w, h, BELT_GRAY);
        if t as f64 >= enter {
            let head = start + speed * (t as f64 - enter);
            for (obj, dx, y) in &placed {
                let surface = cfg.background_depth_mm - obj.thickness;
                paint(
                    obj,
                    head + dx,
                    *y,
                    cfg.resolution_mm,
                    |px, py| {
                        depth[py * w + px] = depth[py * w + px].min(surface);
                        rgb.set(px, py, obj.color);
                    },
                    w,
                    h,
                );
            }
        }
        if cfg.noise_sigma_mm > 0.0 {
            for d in depth.iter_mut() {
                *d = (*d + noise.sample(rng)).max(0.0);
            }
        }
        let depth = Heightmap::from_data(w, h, cfg.resolution_mm, depth).expect("valid depth frame");
        frames.push(Frame { depth, rgb });
    }
    FrameStack::new(frames, cfg.roi()).expect("synthesized stack is consistent")
}
