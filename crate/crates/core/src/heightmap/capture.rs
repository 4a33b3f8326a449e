use super::{Heightmap, RgbMap, UnknownMask};
use crate::simworld::Scene;

/// Virtual working-area camera used to decide which cells are occluded.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaptureConfig {
    /// Camera height above the belt.
    pub camera_height_mm: f64,
    /// Minimum height difference between occluder and hidden surface for a
    /// cell to be flagged unknown.
    pub occlusion_depth_step_mm: f64,
}

impl Default for CaptureConfig {
    fn default() -> Self {
        CaptureConfig {
            camera_height_mm: 2000.0,
            occlusion_depth_step_mm: 20.0,
        }
    }
}

/// Orthographic top-down capture of a scene with occlusion-aware unknown
/// marking.
///
/// Every row is ray-marched outwards from the camera nadir `camera_x` in the
/// x–z plane. A cell whose line of sight to the camera passes under a nearer
/// surface is hidden; if the occluder is more than
/// `occlusion_depth_step_mm` taller it is flagged unknown and given the
/// occluder's height (and colour).
pub fn capture(scene: &Scene, camera_x: f64, cfg: &CaptureConfig) -> (Heightmap, RgbMap, UnknownMask) {
    let (mut hm, mut rgb) = scene.rasterize();
    let mut unknown = UnknownMask::known(hm.width(), hm.height());
    let res = hm.resolution();
    let cam_h = cfg.camera_height_mm;
    let w = hm.width();

    let mut truth = vec![0.0; w];
    let mut truth_rgb = vec![[0u8; 3]; w];
    for y in 0..hm.height() {
        truth.copy_from_slice(hm.row(y));
        for (x, c) in truth_rgb.iter_mut().enumerate() {
            *c = rgb.get(x, y);
        }
        let first_right = (0..w).find(|&x| (x as f64 + 0.5) * res > camera_x).unwrap_or(w);
        let right = first_right..w;
        let left = (0..first_right).rev().filter(|&x| (x as f64 + 0.5) * res < camera_x);
        for dir in [right.collect::<Vec<_>>(), left.collect::<Vec<_>>()] {
            // (ratio (H - h) / dx, occluder column) of the steepest surface so far
            let mut steepest: Option<(f64, usize)> = None;
            for x in dir {
                let dx = ((x as f64 + 0.5) * res - camera_x).abs();
                let ratio = (cam_h - truth[x]) / dx;
                if let Some((r_occ, ox)) = steepest {
                    let occ_h = truth[ox];
                    if r_occ < ratio && occ_h - truth[x] > cfg.occlusion_depth_step_mm {
                        unknown.set(x, y, true);
                        hm.set(x, y, occ_h);
                        rgb.set(x, y, truth_rgb[ox]);
                    }
                }
                if steepest.is_none_or(|(r, _)| ratio < r) {
                    steepest = Some((ratio, x));
                }
            }
        }
    }
    (hm, rgb, unknown)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simworld::Shape;
    use crate::ObjectClass;

    fn scene_with_box(x: f64, side: f64, thickness: f64) -> Scene {
        let mut s = Scene::new(400, 300, 5.0);
        let shape = Shape::Box { length: side, width: side };
        s.drop_object(ObjectClass::Red, shape, thickness, 0.5, x, 750.0, 0.0, [200, 30, 30]);
        s
    }

    #[test]
    fn empty_scene_is_flat_and_known() {
        let s = Scene::new(400, 300, 5.0);
        let (hm, _, um) = capture(&s, 1000.0, &CaptureConfig::default());
        assert!(hm.data().iter().all(|&h| h == 0.0));
        assert_eq!(um.count(), 0);
    }

    #[test]
    fn box_at_nadir_casts_no_unknown_cells() {
        let s = scene_with_box(1000.0, 100.0, 100.0);
        let (hm, _, um) = capture(&s, 1000.0, &CaptureConfig::default());
        assert_eq!(um.count(), 0);
        assert_eq!(hm.data().iter().filter(|&&h| h == 100.0).count(), 20 * 20);
    }

    #[test]
    fn offset_box_shadow_matches_line_of_sight() {
        let (cam_x, top, cfg) = (1000.0, 200.0, CaptureConfig::default());
        let s = scene_with_box(1300.0, 100.0, top);
        let (hm, _, um) = capture(&s, cam_x, &cfg);
        let (truth, _) = s.rasterize();
        // A belt cell at distance d is hidden when the ray to the camera
        // passes below the box's far edge cell at distance e: d < e·H/(H − top).
        let mut expected = 0;
        for y in 0..300 {
            let far_edge = (0..400)
                .filter(|&x| truth.get(x, y) > 0.0)
                .map(|x| (x as f64 + 0.5) * 5.0 - cam_x)
                .fold(None, |m: Option<f64>, d| Some(m.map_or(d, |m| m.max(d))));
            for x in 0..400 {
                let d = (x as f64 + 0.5) * 5.0 - cam_x;
                let hidden = far_edge.is_some_and(|e| truth.get(x, y) == 0.0 && d > e && d < e * cfg.camera_height_mm / (cfg.camera_height_mm - top));
                assert_eq!(um.get(x, y), hidden, "cell ({x}, {y})");
                if hidden {
                    assert_eq!(hm.get(x, y), top);
                    expected += 1;
                }
            }
        }
        assert_eq!(expected, 7 * 20);
        assert_eq!(um.count(), expected);
    }

    #[test]
    fn small_steps_stay_known() {
        let s = scene_with_box(1300.0, 100.0, 15.0);
        let (hm, _, um) = capture(&s, 1000.0, &CaptureConfig::default());
        assert_eq!(um.count(), 0);
        assert_eq!(hm, s.rasterize().0);
    }
}
