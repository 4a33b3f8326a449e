use super::{Grasp1D, GraspRectangle, GripperGeometry};
use crate::heightmap::{maximum_filter, rotate_grid, Heightmap, RotationFrame};

/// All closed grasps on one scan line with finger-centre distance in
/// `[d_min, d_max]`.
///
/// A pair `(i0, i1)` is closed when every interior height exceeds
/// `z = max(h[i0], h[i1])`. The stack holds the left ends of rising steps;
/// each fall pops the ends it closes against. Pairs with an empty interior
/// (`i1 = i0 + 1`) are trivially closed and are emitted directly.
///
/// ```
/// use pilesort::grasp::closed_grasps_1d;
/// let g = closed_grasps_1d(&[0.0, 3.0, 1.0, 3.0, 0.0], 2, 4);
/// let mut q: Vec<_> = g.iter().map(|g| (g.i0, g.i1, g.z, g.v)).collect();
/// q.sort_by_key(|t| (t.0, t.1));
/// assert_eq!(q, [(0, 2, 1.0, 5.0), (0, 4, 0.0, 6.0), (2, 4, 1.0, 5.0)]);
/// ```
pub fn closed_grasps_1d(h: &[f64], d_min: usize, d_max: usize) -> Vec<Grasp1D> {
    let mut out = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    let adjacent = d_min <= 1 && d_max >= 1;
    for i in 1..h.len() {
        if adjacent {
            out.push(Grasp1D { i0: i - 1, i1: i, z: h[i - 1].max(h[i]), v: 0.0 });
        }
        if h[i] > h[i - 1] {
            stack.push(i - 1);
        } else if h[i] < h[i - 1] {
            while let Some(&top) = stack.last() {
                let d = i - top;
                if d >= d_min && d <= d_max {
                    out.push(Grasp1D {
                        i0: top,
                        i1: i,
                        z: h[top].max(h[i]),
                        v: h[top + 1] - h[top] + h[i - 1] - h[i],
                    });
                }
                if h[i] > h[top] {
                    break;
                }
                stack.pop();
                // A plateau at the current height closes off every deeper end.
                if h[i] == h[top] {
                    break;
                }
            }
        }
    }
    out
}

/// One scan direction: the rotation and the max-filtered rotated map.
#[derive(Debug, Clone)]
pub struct AngleScan {
    pub frame: RotationFrame,
    pub filtered: Heightmap,
}

impl AngleScan {
    pub fn new(h: &Heightmap, g: &GripperGeometry, angle: f64) -> Self {
        let px = g.in_pixels(h.resolution());
        let frame = RotationFrame::new(h.width(), h.height(), angle);
        let rotated = Heightmap::from_valid(frame.out_width, frame.out_height, h.resolution(), rotate_grid(h.data(), &frame, 0.0));
        let filtered = maximum_filter(&rotated, px.finger_thickness, px.finger_width);
        AngleScan { frame, filtered }
    }

    /// Height of the filtered map at a rotated column of row `y`; belt
    /// level outside.
    #[inline]
    pub fn at(&self, x: isize, y: usize) -> f64 {
        if x < 0 || x as usize >= self.filtered.width() {
            0.0
        } else {
            self.filtered.get(x as usize, y)
        }
    }

    fn grasps(&self, h: &Heightmap, g: &GripperGeometry, out: &mut Vec<GraspRectangle>) {
        let res = h.resolution();
        let px = g.in_pixels(res);
        let d_min = px.min_opening + px.finger_thickness;
        let d_max = px.max_opening + px.finger_thickness;
        let (w, hh) = (h.width() as f64, h.height() as f64);
        for y in 0..self.filtered.height() {
            for g1 in closed_grasps_1d(self.filtered.row(y), d_min, d_max) {
                let xc = (g1.i0 + g1.i1) as f64 / 2.0;
                let (sx, sy) = self.frame.to_source(xc, y as f64);
                if sx < -0.5 || sy < -0.5 || sx >= w - 0.5 || sy >= hh - 0.5 {
                    continue;
                }
                out.push(GraspRectangle {
                    center_x: h.px_to_mm(sx),
                    center_y: h.px_to_mm(sy),
                    angle: self.frame.angle,
                    inner_span: (g1.i1 - g1.i0 - px.finger_thickness) as f64 * res,
                    finger_width: g.finger_width,
                    z: g1.z,
                    extra_opening: 0.0,
                    value: g1.v,
                });
            }
        }
    }
}

/// Per-angle scans of one heightmap, reusable by the search, the opening
/// expansion and the feature extractor.
#[derive(Debug, Clone)]
pub struct ScanSet {
    pub scans: Vec<AngleScan>,
}

impl ScanSet {
    /// Scans at `α = kπ/num_angles`, `k = 0..num_angles`.
    pub fn new(h: &Heightmap, g: &GripperGeometry, num_angles: usize) -> Self {
        let scans = (0..num_angles)
            .map(|k| AngleScan::new(h, g, k as f64 * std::f64::consts::PI / num_angles as f64))
            .collect();
        ScanSet { scans }
    }

    /// Scans for the distinct angles of `grasps`, in first-seen order.
    pub fn for_angles(h: &Heightmap, g: &GripperGeometry, grasps: &[GraspRectangle]) -> Self {
        let mut scans: Vec<AngleScan> = Vec::new();
        for r in grasps {
            if !scans.iter().any(|s| s.frame.angle.to_bits() == r.angle.to_bits()) {
                scans.push(AngleScan::new(h, g, r.angle));
            }
        }
        ScanSet { scans }
    }

    pub fn find(&self, angle: f64) -> Option<&AngleScan> {
        self.scans.iter().find(|s| s.frame.angle.to_bits() == angle.to_bits())
    }

    /// Closed grasps in angle, row, column order.
    pub fn closed_grasps(&self, h: &Heightmap, g: &GripperGeometry) -> Vec<GraspRectangle> {
        let mut out = Vec::new();
        for scan in &self.scans {
            scan.grasps(h, g, &mut out);
        }
        out
    }
}

/// Exhaustive closed-grasp search over `num_angles` directions.
pub fn closed_grasps(h: &Heightmap, g: &GripperGeometry, num_angles: usize) -> Vec<GraspRectangle> {
    ScanSet::new(h, g, num_angles).closed_grasps(h, g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute(h: &[f64], d_min: usize, d_max: usize) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for i0 in 0..h.len() {
            for i1 in i0 + 1..h.len() {
                let d = i1 - i0;
                if d < d_min || d > d_max {
                    continue;
                }
                let z = h[i0].max(h[i1]);
                if (i0 + 1..i1).all(|i| h[i] > z) {
                    out.push((i0, i1, z, h[i0 + 1] - h[i0] + h[i1 - 1] - h[i1]));
                }
            }
        }
        out.sort_by_key(|p| (p.0, p.1));
        out
    }

    fn fast(h: &[f64], d_min: usize, d_max: usize) -> Vec<(usize, usize, f64, f64)> {
        let mut out: Vec<_> = closed_grasps_1d(h, d_min, d_max)
            .into_iter()
            .map(|g| (g.i0, g.i1, g.z, g.v))
            .collect();
        out.sort_by_key(|p| (p.0, p.1));
        out
    }

    #[test]
    fn small_profile() {
        let h = [0.0, 3.0, 1.0, 3.0, 0.0];
        assert_eq!(
            fast(&h, 2, 4),
            vec![(0, 2, 1.0, 5.0), (0, 4, 0.0, 6.0), (2, 4, 1.0, 5.0)]
        );
    }

    #[test]
    fn flat_and_monotone_profiles_have_no_grasps() {
        assert!(closed_grasps_1d(&[2.0; 20], 2, 10).is_empty());
        let up: Vec<f64> = (0..20).map(f64::from).collect();
        assert!(closed_grasps_1d(&up, 2, 10).is_empty());
    }

    #[test]
    fn matches_brute_force_on_random_integer_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let n = rng.random_range(0..=64usize);
            let h: Vec<f64> = (0..n).map(|_| rng.random_range(0..16) as f64).collect();
            let d_min = rng.random_range(1..=8usize);
            let d_max = d_min + rng.random_range(0..=60usize);
            assert_eq!(fast(&h, d_min, d_max), brute(&h, d_min, d_max), "h={h:?} d={d_min}..{d_max}");
        }
    }

    #[test]
    fn overlapping_grasps_are_nested() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..2_000 {
            let h: Vec<f64> = (0..48).map(|_| rng.random_range(0..10) as f64).collect();
            let gs = closed_grasps_1d(&h, 1, 48);
            for a in &gs {
                for b in &gs {
                    let overlap = a.i0 < b.i1 && b.i0 < a.i1;
                    if overlap {
                        let nested = (a.i0 <= b.i0 && b.i1 <= a.i1) || (b.i0 <= a.i0 && a.i1 <= b.i1);
                        assert!(nested, "{a:?} {b:?} in {h:?}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn prop_matches_brute_force(
            h in prop::collection::vec(0u8..6, 0..40),
            d_min in 1usize..5,
            extra in 0usize..40,
        ) {
            let h: Vec<f64> = h.into_iter().map(f64::from).collect();
            prop_assert_eq!(fast(&h, d_min, d_min + extra), brute(&h, d_min, d_min + extra));
        }
    }

    fn block_map() -> Heightmap {
        let mut h = Heightmap::zeros(60, 50, 5.0);
        for y in 20..30 {
            for x in 22..38 {
                h.set(x, y, 40.0);
            }
        }
        h
    }

    #[test]
    fn flat_map_has_no_grasps() {
        let g = GripperGeometry::default();
        assert!(closed_grasps(&Heightmap::zeros(40, 30, 5.0), &g, 16).is_empty());
        // Off-map samples read belt level, so only the unrotated scan sees a
        // raised plateau as flat.
        assert!(closed_grasps(&Heightmap::filled(40, 30, 5.0, 12.0), &g, 1).is_empty());
    }

    #[test]
    fn block_is_grasped_across_its_width() {
        let g = GripperGeometry::default();
        let h = block_map();
        let gs = closed_grasps(&h, &g, 16);
        let best = gs
            .iter()
            .filter(|r| r.angle == 0.0)
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .unwrap();
        assert_eq!(best.z, 0.0);
        assert_eq!(best.value, 80.0);
        // The filter widens the 16 px block by 4 px; subtracting the finger
        // thickness from the 21 px centre distance recovers the block width.
        assert!((best.inner_span - 80.0).abs() < 1e-9);
        assert!((best.center_x - 150.0).abs() <= 2.5);
    }

    #[test]
    fn every_rectangle_is_closed_in_its_frame() {
        let g = GripperGeometry::default();
        let px = g.in_pixels(5.0);
        let mut h = block_map();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..60 {
            let (x, y) = (rng.random_range(0..60), rng.random_range(0..50));
            h.set(x, y, rng.random_range(0.0..70.0));
        }
        let scans = ScanSet::new(&h, &g, 16);
        let gs = scans.closed_grasps(&h, &g);
        assert!(!gs.is_empty());
        for r in &gs {
            let span_px = (r.inner_span / 5.0).round() as usize;
            assert!(span_px >= px.min_opening && span_px <= px.max_opening);
            assert!(r.inner_span >= g.min_opening && r.inner_span <= g.max_opening);
            let scan = scans.find(r.angle).unwrap();
            let (xr, yr) = scan.frame.from_source(h.mm_to_px(r.center_x), h.mm_to_px(r.center_y));
            let y = yr.round() as usize;
            let d = span_px + px.finger_thickness;
            let x0 = (xr - d as f64 / 2.0).round() as isize;
            let x1 = x0 + d as isize;
            let z = scan.at(x0, y).max(scan.at(x1, y));
            assert_eq!(z, r.z);
            for x in x0 + 1..x1 {
                assert!(scan.at(x, y) > z);
            }
        }
    }

    #[test]
    fn output_is_deterministic_and_angle_ordered() {
        let g = GripperGeometry::default();
        let h = block_map();
        let a = closed_grasps(&h, &g, 8);
        assert_eq!(a, closed_grasps(&h, &g, 8));
        assert!(a.windows(2).all(|w| w[0].angle <= w[1].angle));
        assert!(a.iter().all(|r| r.extra_opening == 0.0 && r.angle >= 0.0 && r.angle < std::f64::consts::PI));
    }
}
