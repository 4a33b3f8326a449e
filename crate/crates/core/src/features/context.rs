use super::{window_origin, Anchor, FeatureLayout, FeatureVector, Pooling, NUM_SCALARS};
use crate::grasp::{GraspRectangle, GripperGeometry};
use crate::heightmap::{cached_indices, gather, Heightmap, RgbMap, RotationFrame, UnknownMask, BELT_GRAY};

/// Summed-area table with one row and column of leading zeros.
#[derive(Debug, Clone)]
struct Integral<T> {
    stride: usize,
    width: usize,
    height: usize,
    sums: Vec<T>,
}

impl<T> Integral<T>
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    fn new(values: &[T], width: usize, height: usize) -> Self {
        debug_assert_eq!(values.len(), width * height);
        let stride = width + 1;
        let mut sums = vec![T::default(); stride * (height + 1)];
        for (y, src) in values.chunks_exact(width.max(1)).take(height).enumerate() {
            let (done, rest) = sums.split_at_mut((y + 1) * stride);
            let above = &done[y * stride + 1..];
            let mut row = T::default();
            for ((out, &up), &v) in rest[1..stride].iter_mut().zip(above).zip(src) {
                row = row + v;
                *out = up + row;
            }
        }
        Integral { stride, width, height, sums }
    }

    /// Sum over the part of `[x0, x1) × [y0, y1)` inside the grid, and the
    /// number of cells that part covers.
    #[inline]
    fn sum(&self, x0: isize, x1: isize, y0: isize, y1: isize) -> (T, usize) {
        let cx0 = x0.clamp(0, self.width as isize) as usize;
        let cx1 = x1.clamp(0, self.width as isize) as usize;
        let cy0 = y0.clamp(0, self.height as isize) as usize;
        let cy1 = y1.clamp(0, self.height as isize) as usize;
        if cx0 >= cx1 || cy0 >= cy1 {
            return (T::default(), 0);
        }
        let s = &self.sums;
        let (a, b) = (cy0 * self.stride, cy1 * self.stride);
        ((s[b + cx1] + s[a + cx0]) - (s[a + cx1] + s[b + cx0]), (cx1 - cx0) * (cy1 - cy0))
    }
}

#[derive(Debug, Clone)]
struct AngleTables {
    angle: f64,
    frame: RotationFrame,
    height: Integral<f64>,
    rgb: [Integral<u32>; 3],
    unknown: Integral<u32>,
}

/// A grasp resolved against the tables of its angle.
#[derive(Debug, Clone, Copy)]
pub struct PreparedGrasp {
    table: usize,
    origins: [(isize, isize); 3],
    z: f64,
    scalars: [f64; NUM_SCALARS],
}

impl PreparedGrasp {
    /// Orders grasps so that consecutive ones read nearby table entries.
    pub fn locality_key(&self) -> (usize, isize, isize) {
        (self.table, self.origins[1].1, self.origins[1].0)
    }
}

/// Per-angle summed-area tables of one captured scene, for feature values
/// computed on demand. Values agree with the direct definition up to
/// floating-point summation order.
pub struct FeatureContext<'a> {
    hm: &'a Heightmap,
    rgb: &'a RgbMap,
    um: &'a UnknownMask,
    gripper: GripperGeometry,
    tables: Vec<AngleTables>,
}

impl<'a> FeatureContext<'a> {
    pub fn new(hm: &'a Heightmap, rgb: &'a RgbMap, um: &'a UnknownMask, gripper: &GripperGeometry) -> Self {
        FeatureContext { hm, rgb, um, gripper: gripper.clone(), tables: Vec::new() }
    }

    fn table_for(&mut self, angle: f64) -> usize {
        if let Some(i) = self.tables.iter().position(|t| t.angle.to_bits() == angle.to_bits()) {
            return i;
        }
        let frame = RotationFrame::new(self.hm.width(), self.hm.height(), angle);
        let (w, h) = (frame.out_width, frame.out_height);
        let idx = cached_indices(&frame);
        let height = Integral::new(&gather(self.hm.data(), &idx, 0.0), w, h);
        let colors = gather(self.rgb.data(), &idx, BELT_GRAY);
        let rgb = std::array::from_fn(|c| Integral::new(&colors.iter().map(|p| p[c] as u32).collect::<Vec<_>>(), w, h));
        let mask: Vec<u32> = gather(self.um.data(), &idx, false).into_iter().map(u32::from).collect();
        let unknown = Integral::new(&mask, w, h);
        self.tables.push(AngleTables { angle, frame, height, rgb, unknown });
        self.tables.len() - 1
    }

    pub fn prepare(&mut self, grasp: &GraspRectangle) -> PreparedGrasp {
        let table = self.table_for(grasp.angle);
        let frame = &self.tables[table].frame;
        let res = self.hm.resolution();
        let origins = Anchor::ALL.map(|a| window_origin(frame, res, grasp, &self.gripper, a));
        PreparedGrasp {
            table,
            origins,
            z: grasp.z,
            scalars: [grasp.inner_span, grasp.extra_opening, grasp.z, grasp.center_x, grasp.center_y, grasp.angle],
        }
    }

    /// Pooled value of `channel` (0 height, 1–3 RGB, 4 unknown) over one
    /// cell of the window at `origin`.
    #[inline]
    fn pooled(&self, p: &PreparedGrasp, origin: (isize, isize), pool: Pooling, channel: usize, cell: usize) -> f64 {
        let t = &self.tables[p.table];
        let (u0, u1, v0, v1) = pool.cell(cell / pool.cols, cell % pool.cols);
        let (x0, y0) = origin;
        let (x0, x1, y0, y1) = (x0 + u0 as isize, x0 + u1 as isize, y0 + v0 as isize, y0 + v1 as isize);
        let area = (u1 - u0) * (v1 - v0);
        match channel {
            0 => t.height.sum(x0, x1, y0, y1).0 / area as f64 - p.z,
            1..=3 => {
                let (s, n) = t.rgb[channel - 1].sum(x0, x1, y0, y1);
                let total = s as u64 + (area - n) as u64 * BELT_GRAY[channel - 1] as u64;
                total as f64 / 255.0 / area as f64
            }
            _ => t.unknown.sum(x0, x1, y0, y1).0 as f64 / area as f64,
        }
    }

    /// Feature `j` of the success layout.
    #[inline]
    pub fn success_value(&self, p: &PreparedGrasp, j: usize) -> f64 {
        let pool = Pooling::SUCCESS;
        let block = pool.cells();
        let image = FeatureLayout::Success.image_len();
        if j >= image {
            return p.scalars[j - image];
        }
        let per_anchor = 5 * block;
        let anchor = j / per_anchor;
        let rem = j % per_anchor;
        self.pooled(p, p.origins[anchor], pool, rem / block, rem % block)
    }

    /// Feature `j` of the color layout.
    #[inline]
    pub fn color_value(&self, p: &PreparedGrasp, j: usize) -> f64 {
        let pool = Pooling::COLOR;
        let block = pool.cells();
        let image = FeatureLayout::Color.image_len();
        if j >= image {
            return p.scalars[j - image];
        }
        self.pooled(p, p.origins[1], pool, j / block, j % block)
    }

    pub fn success_features(&self, p: &PreparedGrasp) -> FeatureVector {
        let values = (0..FeatureLayout::Success.len()).map(|j| self.success_value(p, j)).collect();
        FeatureVector { layout: FeatureLayout::Success, values }
    }

    pub fn color_features(&self, p: &PreparedGrasp) -> FeatureVector {
        let values = (0..FeatureLayout::Color.len()).map(|j| self.color_value(p, j)).collect();
        FeatureVector { layout: FeatureLayout::Color, values }
    }
}
