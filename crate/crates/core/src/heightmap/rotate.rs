use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use super::Heightmap;

/// Geometry of an image rotated by `angle` onto its rotated bounding box.
///
/// Output pixel `(xo, yo)` shows the source at
/// `src_centre + R(angle) · ((xo, yo) − out_centre)`, so the output x axis
/// runs along direction `(cos angle, sin angle)` of the source frame.
/// Everything that samples a rotated map goes through this type so that the
/// grasp search, the opening expansion and the feature slices agree on every
/// pixel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationFrame {
    pub angle: f64,
    cos: f64,
    sin: f64,
    pub src_width: usize,
    pub src_height: usize,
    pub out_width: usize,
    pub out_height: usize,
    src_cx: f64,
    src_cy: f64,
    out_cx: f64,
    out_cy: f64,
}

impl RotationFrame {
    pub fn new(src_width: usize, src_height: usize, angle: f64) -> Self {
        let (sin, cos) = angle.sin_cos();
        let (w, h) = (src_width as f64, src_height as f64);
        // The epsilon keeps cos(π/2) ≈ 6e-17 from adding a spurious column.
        let out_width = ((w * cos.abs() + h * sin.abs()) - 1e-9).ceil().max(1.0) as usize;
        let out_height = ((w * sin.abs() + h * cos.abs()) - 1e-9).ceil().max(1.0) as usize;
        RotationFrame {
            angle,
            cos,
            sin,
            src_width,
            src_height,
            out_width,
            out_height,
            src_cx: (w - 1.0) / 2.0,
            src_cy: (h - 1.0) / 2.0,
            out_cx: (out_width as f64 - 1.0) / 2.0,
            out_cy: (out_height as f64 - 1.0) / 2.0,
        }
    }

    /// Rotated-frame coordinates to source coordinates (continuous).
    #[inline]
    pub fn to_source(&self, xo: f64, yo: f64) -> (f64, f64) {
        let dx = xo - self.out_cx;
        let dy = yo - self.out_cy;
        (
            self.src_cx + self.cos * dx - self.sin * dy,
            self.src_cy + self.sin * dx + self.cos * dy,
        )
    }

    /// Source coordinates to rotated-frame coordinates (continuous).
    #[inline]
    pub fn from_source(&self, x: f64, y: f64) -> (f64, f64) {
        let dx = x - self.src_cx;
        let dy = y - self.src_cy;
        (
            self.out_cx + self.cos * dx + self.sin * dy,
            self.out_cy - self.sin * dx + self.cos * dy,
        )
    }

    /// Nearest source pixel for rotated pixel `(xo, yo)`, if it lies inside
    /// the source.
    #[inline]
    pub fn source_pixel(&self, xo: isize, yo: isize) -> Option<(usize, usize)> {
        let (sx, sy) = self.to_source(xo as f64, yo as f64);
        let (sx, sy) = (round(sx), round(sy));
        if sx < 0.0 || sy < 0.0 || sx >= self.src_width as f64 || sy >= self.src_height as f64 {
            None
        } else {
            Some((sx as usize, sy as usize))
        }
    }

    pub fn in_output(&self, xo: isize, yo: isize) -> bool {
        xo >= 0 && yo >= 0 && (xo as usize) < self.out_width && (yo as usize) < self.out_height
    }

    /// Unit vector of the rotated x axis in the source frame.
    pub fn axis(&self) -> (f64, f64) {
        (self.cos, self.sin)
    }

    /// Row-major source index of every output pixel, `None` where the
    /// sample falls outside the source. Same arithmetic as
    /// [`RotationFrame::source_pixel`], with the per-column terms hoisted.
    pub fn source_indices(&self) -> Vec<Option<u32>> {
        let cols: Vec<(f64, f64)> = (0..self.out_width)
            .map(|xo| {
                let dx = xo as f64 - self.out_cx;
                (self.src_cx + self.cos * dx, self.src_cy + self.sin * dx)
            })
            .collect();
        let (w, h) = (self.src_width as f64, self.src_height as f64);
        let mut out = Vec::with_capacity(self.out_width * self.out_height);
        for yo in 0..self.out_height {
            let dy = yo as f64 - self.out_cy;
            let (sdy, cdy) = (self.sin * dy, self.cos * dy);
            out.extend(cols.iter().map(|&(a, b)| {
                let (sx, sy) = (round(a - sdy), round(b + cdy));
                if sx < 0.0 || sy < 0.0 || sx >= w || sy >= h {
                    None
                } else {
                    Some((sy as usize * self.src_width + sx as usize) as u32)
                }
            }));
        }
        out
    }
}

/// [`RotationFrame::source_indices`], memoized per source size and angle.
/// A run rotates maps of one size by the same few angles on every tick.
pub fn cached_indices(frame: &RotationFrame) -> Arc<Vec<Option<u32>>> {
    type Key = (usize, usize, u64);
    static CACHE: OnceLock<Mutex<HashMap<Key, Arc<Vec<Option<u32>>>>>> = OnceLock::new();
    let key = (frame.src_width, frame.src_height, frame.angle.to_bits());
    let cache = CACHE.get_or_init(Default::default);
    if let Some(hit) = cache.lock().expect("rotation cache lock").get(&key) {
        return hit.clone();
    }
    let fresh = Arc::new(frame.source_indices());
    let mut map = cache.lock().expect("rotation cache lock");
    if map.len() >= 64 {
        map.clear();
    }
    map.entry(key).or_insert(fresh).clone()
}

/// `f64::round` (half away from zero) without a library call; the
/// fractional part of a float below 2^52 is exact.
#[inline]
fn round(x: f64) -> f64 {
    if !(x.abs() < 4.5e15) {
        return x.round();
    }
    let t = (x as i64 as f64).copysign(x);
    let f = x - t;
    if f >= 0.5 {
        t + 1.0
    } else if f <= -0.5 {
        t - 1.0
    } else {
        t
    }
}

/// Gathers `data` through [`RotationFrame::source_indices`].
pub fn gather<T: Copy>(data: &[T], indices: &[Option<u32>], fill: T) -> Vec<T> {
    indices.iter().map(|i| i.map_or(fill, |i| data[i as usize])).collect()
}

/// Nearest-neighbour rotation of any row-major grid; samples falling outside
/// the source read `fill`.
pub fn rotate_grid<T: Copy>(data: &[T], frame: &RotationFrame, fill: T) -> Vec<T> {
    debug_assert_eq!(data.len(), frame.src_width * frame.src_height);
    gather(data, &cached_indices(frame), fill)
}

/// Rotates a heightmap onto its rotated bounding box. Out-of-bounds samples
/// read belt level.
pub fn rotate_heightmap(h: &Heightmap, angle: f64) -> Heightmap {
    let frame = RotationFrame::new(h.width(), h.height(), angle);
    let data = rotate_grid(h.data(), &frame, 0.0);
    Heightmap::from_valid(frame.out_width, frame.out_height, h.resolution(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

    #[test]
    fn fast_round_matches_std() {
        let mut v = vec![0.5, -0.5, 1.5, -1.5, 2.5, 0.49999999999999994, -0.49999999999999994, 4503599627370495.5, 1e300, -0.0];
        let mut x = 0.37f64;
        for _ in 0..100_000 {
            x = (x * 7919.0 + 0.123).fract() * 2000.0 - 1000.0;
            v.push(x);
            v.push(x.trunc() + 0.5);
        }
        for x in v {
            assert_eq!(round(x).to_bits(), x.round().to_bits(), "{x}");
        }
    }

    #[test]
    fn indices_match_source_pixel() {
        for (w, h) in [(37, 23), (1, 1), (400, 300)] {
            for i in 0..16 {
                let f = RotationFrame::new(w, h, i as f64 * std::f64::consts::PI / 16.0);
                let idx = f.source_indices();
                for yo in 0..f.out_height {
                    for xo in 0..f.out_width {
                        let want = f.source_pixel(xo as isize, yo as isize).map(|(x, y)| (y * w + x) as u32);
                        assert_eq!(idx[yo * f.out_width + xo], want);
                    }
                }
            }
        }
    }

    #[test]
    fn zero_angle_is_identity() {
        let data: Vec<f64> = (0..35).map(|v| v as f64).collect();
        let h = Heightmap::from_data(7, 5, 5.0, data).unwrap();
        assert_eq!(rotate_heightmap(&h, 0.0), h);
    }

    #[test]
    fn flat_map_stays_flat_on_bounding_box() {
        let h = Heightmap::filled(20, 10, 5.0, 30.0);
        let r = rotate_heightmap(&h, FRAC_PI_2);
        assert_eq!((r.width(), r.height()), (10, 20));
        assert!(r.data().iter().all(|v| *v == 30.0));

        let r = rotate_heightmap(&h, FRAC_PI_4);
        let frame = RotationFrame::new(20, 10, FRAC_PI_4);
        assert_eq!((r.width(), r.height()), (frame.out_width, frame.out_height));
        assert_eq!((r.width(), r.height()), (22, 22));
        // Interior stays at the constant; corners of the bounding box are belt.
        assert_eq!(r.get(11, 11), 30.0);
        assert_eq!(r.get(0, 0), 0.0);
    }

    #[test]
    fn centre_peak_survives_quarter_turn() {
        let mut h = Heightmap::zeros(9, 9, 5.0);
        h.set(4, 4, 100.0);
        let r = rotate_heightmap(&h, FRAC_PI_2);
        assert_eq!((r.width(), r.height()), (9, 9));
        assert_eq!(r.get(4, 4), 100.0);
        assert_eq!(r.data().iter().filter(|v| **v > 0.0).count(), 1);
    }

    #[test]
    fn frame_round_trips_coordinates() {
        let f = RotationFrame::new(40, 30, 0.7);
        let (xo, yo) = f.from_source(12.25, 7.5);
        let (x, y) = f.to_source(xo, yo);
        assert!((x - 12.25).abs() < 1e-9 && (y - 7.5).abs() < 1e-9);
    }

    #[test]
    fn output_axis_points_along_angle() {
        // A bar along source direction (cos a, sin a) becomes a horizontal bar.
        let a = FRAC_PI_2;
        let mut h = Heightmap::zeros(11, 11, 5.0);
        for y in 2..9 {
            h.set(5, y, 10.0);
        }
        let r = rotate_heightmap(&h, a);
        for x in 2..9 {
            assert_eq!(r.get(x, 5), 10.0, "x = {x}");
        }
    }
}
