use rand::Rng;

use super::{Scene, Shape, SimObject, WorldConfig};
use crate::grasp::{GraspRectangle, GripperGeometry};
use crate::{Error, Result};

/// Per-object probability of slipping out of the closed gripper.
#[derive(Debug, Clone, PartialEq)]
pub struct SlipModel {
    pub base: f64,
    pub per_kg: f64,
    /// Objects gripped over less than this height get `shallow_penalty`.
    pub shallow_grip_mm: f64,
    pub shallow_penalty: f64,
    /// Objects covering less than this fraction of the finger width get
    /// `edge_penalty`.
    pub edge_overlap_fraction: f64,
    pub edge_penalty: f64,
    pub cap: f64,
}

impl Default for SlipModel {
    fn default() -> Self {
        SlipModel {
            base: 0.02,
            per_kg: 0.02,
            shallow_grip_mm: 10.0,
            shallow_penalty: 0.5,
            edge_overlap_fraction: 0.25,
            edge_penalty: 0.4,
            cap: 0.9,
        }
    }
}

impl SlipModel {
    pub fn disabled() -> Self {
        SlipModel {
            base: 0.0,
            per_kg: 0.0,
            shallow_grip_mm: 0.0,
            shallow_penalty: 0.0,
            edge_overlap_fraction: 0.0,
            edge_penalty: 0.0,
            cap: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let probs = [self.base, self.shallow_penalty, self.edge_penalty, self.cap];
        if probs.iter().any(|p| !(0.0..=1.0).contains(p)) || self.per_kg < 0.0 {
            return Err(Error::Config("slip probabilities must lie in [0, 1]".into()));
        }
        Ok(())
    }

    pub fn probability(&self, mass: f64, grip_depth: f64, band_fraction: f64) -> f64 {
        let mut p = self.base + self.per_kg * mass;
        if grip_depth < self.shallow_grip_mm {
            p += self.shallow_penalty;
        }
        if band_fraction < self.edge_overlap_fraction {
            p += self.edge_penalty;
        }
        p.min(self.cap)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraspOutcome {
    /// Objects carried to the drop zone.
    pub picked: Vec<SimObject>,
    /// Objects lifted but lost before release; they fall back onto the belt.
    pub slipped: Vec<SimObject>,
    /// Ids of objects that rested on lifted ones and were re-dropped.
    pub disturbed: Vec<u32>,
    /// Opening sensor reading after closing, mm. Zero means nothing held.
    pub gripper_closed_to: f64,
    pub success_before_release: bool,
    /// Height the fingers actually reached.
    pub effective_z: f64,
}

impl GraspOutcome {
    fn nothing(z: f64) -> Self {
        GraspOutcome {
            picked: Vec::new(),
            slipped: Vec::new(),
            disturbed: Vec::new(),
            gripper_closed_to: 0.0,
            success_before_release: false,
            effective_z: z,
        }
    }

    pub fn sensor_failure(&self) -> bool {
        self.gripper_closed_to <= 0.0
    }
}

/// Axis-aligned rectangle in the grasp frame: `u` along the opening, `v`
/// along the fingers.
struct GraspFrame {
    origin: (f64, f64),
    u: (f64, f64),
    v: (f64, f64),
}

impl GraspFrame {
    fn local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.origin.0, y - self.origin.1);
        (dx * self.u.0 + dy * self.u.1, dx * self.v.0 + dy * self.v.1)
    }

    /// Strict overlap of an object footprint with `[u0,u1] × [v0,v1]`.
    fn intersects(&self, obj: &SimObject, (u0, u1): (f64, f64), (v0, v1): (f64, f64)) -> bool {
        let (cu, cv) = self.local(obj.pose.x, obj.pose.y);
        match obj.shape {
            Shape::Disc { diameter } => {
                let du = cu - cu.clamp(u0, u1);
                let dv = cv - cv.clamp(v0, v1);
                du * du + dv * dv < diameter * diameter / 4.0
            }
            Shape::Box { length, width } => {
                // Separating axes: the rectangle's u and v, then the box's own axes.
                let eu = obj.half_extent(self.u.0, self.u.1);
                let ev = obj.half_extent(self.v.0, self.v.1);
                if cu + eu <= u0 || cu - eu >= u1 || cv + ev <= v0 || cv - ev >= v1 {
                    return false;
                }
                let (s, c) = obj.pose.yaw.sin_cos();
                let corners = [(u0, v0), (u0, v1), (u1, v0), (u1, v1)];
                for (axis, half) in [((c, s), length / 2.0), ((-s, c), width / 2.0)] {
                    // axis expressed in (u, v)
                    let au = axis.0 * self.u.0 + axis.1 * self.u.1;
                    let av = axis.0 * self.v.0 + axis.1 * self.v.1;
                    let centre = cu * au + cv * av;
                    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                    for (pu, pv) in corners {
                        let p = pu * au + pv * av;
                        lo = lo.min(p);
                        hi = hi.max(p);
                    }
                    if centre + half <= lo || centre - half >= hi {
                        return false;
                    }
                }
                true
            }
        }
    }
}

/// Resolves one pick against the scene and mutates it.
///
/// The fingers descend opened by `inner_span + extra_opening` and stop on
/// anything under their footprint. Objects between the fingers that reach
/// above the stop height and, within the finger band, fit inside the
/// opening are lifted; each may
/// slip according to the slip model. Lifted objects leave the scene (slipped
/// ones fall back nearby) and whatever rested on them is re-dropped.
pub fn execute_grasp<R: Rng + ?Sized>(
    scene: &mut Scene,
    grasp: &GraspRectangle,
    gripper: &GripperGeometry,
    world: &WorldConfig,
    rng: &mut R,
) -> GraspOutcome {
    if !scene.contains_point(grasp.center_x, grasp.center_y) {
        return GraspOutcome::nothing(grasp.z);
    }
    let (s, c) = grasp.angle.sin_cos();
    let frame = GraspFrame {
        origin: (grasp.center_x, grasp.center_y),
        u: (c, s),
        v: (-s, c),
    };
    let (offset, lift) = gripper.opening_curve.eval(grasp.extra_opening);
    let half = grasp.inner_span / 2.0 + offset;
    let ft = gripper.finger_thickness;
    let band = (-gripper.finger_width / 2.0, gripper.finger_width / 2.0);

    // Finger footprints shrunk by the tolerance on every side.
    let m = world.contact_tolerance_mm.min(ft / 2.0).min(gripper.finger_width / 2.0);
    let finger_band = (band.0 + m, band.1 - m);
    let mut stop = grasp.z + lift;
    for obj in &scene.objects {
        if frame.intersects(obj, (-half - ft + m, -half - m), finger_band)
            || frame.intersects(obj, (half + m, half + ft - m), finger_band)
        {
            stop = stop.max(obj.top());
        }
    }
    let z_eff = stop - lift;

    // Inside the finger band an object fits if it stays within the opening,
    // up to the tolerance; parts outside the band pass beside the fingers.
    let eps = 1e-9;
    let far = 1e9;
    let lifted: Vec<usize> = scene
        .objects
        .iter()
        .enumerate()
        .filter(|(_, o)| o.top() > z_eff + eps && frame.intersects(o, (-half, half), band))
        .filter(|(_, o)| !frame.intersects(o, (-far, -half - m), band) && !frame.intersects(o, (half + m, far), band))
        .map(|(i, _)| i)
        .collect();
    if lifted.is_empty() {
        return GraspOutcome::nothing(z_eff);
    }

    let mut held = Vec::new();
    let mut slipped = Vec::new();
    for &i in &lifted {
        let o = &scene.objects[i];
        let depth = o.top() - o.pose.rest_height.max(z_eff);
        let (vlo, vhi) = o.project(frame.origin, frame.v);
        let covered = (vhi.min(band.1) - vlo.max(band.0)).max(0.0) / gripper.finger_width;
        let p = world.slip.probability(o.mass, depth, covered);
        if rng.random::<f64>() < p {
            slipped.push(o.clone());
        } else {
            held.push(o.clone());
        }
    }

    let lifted_ids: Vec<u32> = lifted.iter().map(|&i| scene.objects[i].id).collect();
    let disturbed_ids = scene.supported_by(&lifted_ids);
    let disturbed: Vec<SimObject> = scene
        .objects
        .iter()
        .filter(|o| disturbed_ids.contains(&o.id))
        .cloned()
        .collect();
    scene
        .objects
        .retain(|o| !lifted_ids.contains(&o.id) && !disturbed_ids.contains(&o.id));
    scene.settle();
    for obj in disturbed.into_iter().chain(slipped.iter().cloned()) {
        let (x, y) = scatter(scene, obj.pose.x, obj.pose.y, world.disturb_radius_mm, rng);
        scene.redrop(obj, x, y);
    }

    let gripper_closed_to = if held.is_empty() {
        0.0
    } else {
        let (lo, hi) = held.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
            let (a, b) = o.project(frame.origin, frame.u);
            (lo.min(a), hi.max(b))
        });
        (hi.max(-half) - lo.min(half)).clamp(0.0, 2.0 * half)
    };
    GraspOutcome {
        success_before_release: !held.is_empty(),
        picked: held,
        slipped,
        disturbed: disturbed_ids,
        gripper_closed_to,
        effective_z: z_eff,
    }
}

fn scatter<R: Rng + ?Sized>(scene: &Scene, x: f64, y: f64, radius: f64, rng: &mut R) -> (f64, f64) {
    let r = radius * rng.random::<f64>().sqrt();
    let a = rng.random::<f64>() * std::f64::consts::TAU;
    let max_x = (scene.width_mm() - 1e-6).max(0.0);
    let max_y = (scene.height_mm() - 1e-6).max(0.0);
    ((x + r * a.cos()).clamp(0.0, max_x), (y + r * a.sin()).clamp(0.0, max_y))
}
