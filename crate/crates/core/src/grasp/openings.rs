use super::{GraspRectangle, GripperGeometry, ScanSet};
use crate::heightmap::Heightmap;

fn round_half_up(x: f64) -> f64 {
    (x + 0.5).floor()
}

/// Expands each closed grasp into its feasible extra-opening variants.
///
/// Opening the fingers by `e` moves each inner face out by the curve's
/// offset. A finger that leaves its closed position overlaps the next
/// filtered pixel before it has lifted, so pixel `k` beyond the closed
/// position is cleared at lift `lift_at_offset((k − 1)·res)`. `z` rises to
/// clear every swept pixel; a variant is kept while both inner faces still
/// touch material above the raised `z`. The `e = 0` grasp is always kept.
pub fn apply_openings(grasps: &[GraspRectangle], h: &Heightmap, g: &GripperGeometry) -> Vec<GraspRectangle> {
    let scans = ScanSet::for_angles(h, g, grasps);
    apply_openings_with(grasps, h, g, &scans)
}

/// As [`apply_openings`], reusing precomputed scans. Grasps whose angle has
/// no scan keep only their closed variant.
pub fn apply_openings_with(
    grasps: &[GraspRectangle],
    h: &Heightmap,
    g: &GripperGeometry,
    scans: &ScanSet,
) -> Vec<GraspRectangle> {
    let res = h.resolution();
    let px = g.in_pixels(res);
    let mut out = Vec::with_capacity(grasps.len());
    for r in grasps {
        out.push(*r);
        let Some(scan) = scans.find(r.angle) else { continue };
        let (xr, yr) = scan.frame.from_source(h.mm_to_px(r.center_x), h.mm_to_px(r.center_y));
        let y = round_half_up(yr);
        if y < 0.0 || y >= scan.filtered.height() as f64 {
            continue;
        }
        let y = y as usize;
        let inner_px = round_half_up(r.inner_span / res) as isize;
        let d = inner_px + px.finger_thickness as isize;
        let x0 = round_half_up(xr - d as f64 / 2.0) as isize;
        let x1 = x0 + d;
        let floor_left = scan.at(x0 + 1, y);
        let floor_right = scan.at(x1 - 1, y);
        let max_extra = ((g.max_opening - r.inner_span) / res + 1e-9).floor();
        if max_extra < 1.0 {
            continue;
        }
        let mut z = r.z;
        let mut covered = 0usize;
        for e_px in 1..=max_extra as usize {
            let e = e_px as f64 * res;
            let (offset, _) = g.opening_curve.eval(e);
            let cover = (offset / res - 1e-9).ceil().max(0.0) as usize;
            while covered < cover {
                let lift = g.opening_curve.lift_at_offset(covered as f64 * res);
                covered += 1;
                let k = covered as isize;
                z = z.max(scan.at(x0 - k, y) - lift).max(scan.at(x1 + k, y) - lift);
            }
            if !(z < floor_left && z < floor_right) {
                break;
            }
            out.push(GraspRectangle { extra_opening: e, z, ..*r });
        }
    }
    out
}
