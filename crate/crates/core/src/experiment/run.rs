use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{train, ExperimentConfig, ModelPair, ModelStore, TrainingExample};
use crate::features::{FeatureContext, FeatureVectors};
use crate::feedback::{result, ColorCounts, FeedbackConfig};
use crate::grasp::{apply_openings_with, weighted_sample, GraspRectangle, ScanSet};
use crate::heightmap::{capture, Heightmap, RgbMap, UnknownMask};
use crate::policy::{best_with, select, Decision, EvaluatedGrasp};
use crate::simworld::{execute_grasp, synthesize_dropzone, Scene};
use crate::{ObjectClass, Result};

/// A grasp proposal with both feature vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub grasp: GraspRectangle,
    pub features: FeatureVectors,
}

struct Plan {
    hm: Heightmap,
    rgb: RgbMap,
    um: UnknownMask,
    grasps: Vec<GraspRectangle>,
}

/// Capture, closed-grasp search, weighted sampling and opening expansion.
fn plan<R: Rng + ?Sized>(scene: &Scene, cfg: &ExperimentConfig, rng: &mut R) -> Plan {
    let (hm, rgb, um) = capture(scene, cfg.world.camera_x_mm, &cfg.world.capture);
    let scans = ScanSet::new(&hm, &cfg.gripper, cfg.num_angles);
    let closed = scans.closed_grasps(&hm, &cfg.gripper);
    let sampled = weighted_sample(&closed, cfg.sample_size, rng);
    let grasps = apply_openings_with(&sampled, &hm, &cfg.gripper, &scans);
    Plan { hm, rgb, um, grasps }
}

/// Proposals for the current scene with materialized features.
pub fn proposed_grasps<R: Rng + ?Sized>(scene: &Scene, cfg: &ExperimentConfig, rng: &mut R) -> Vec<Proposal> {
    let p = plan(scene, cfg, rng);
    let mut ctx = FeatureContext::new(&p.hm, &p.rgb, &p.um, &cfg.gripper);
    p.grasps
        .iter()
        .map(|g| {
            let prep = ctx.prepare(g);
            Proposal {
                grasp: *g,
                features: FeatureVectors { success: ctx.success_features(&prep), color: ctx.color_features(&prep) },
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Executed,
    Skipped,
    /// The pick aborted before release; no feedback was recorded.
    Fault,
}

/// One loop iteration. Grasp and prediction fields describe the best
/// proposal and are empty when there was none; observation fields are
/// empty unless the pick was executed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PickRecord {
    pub tick: usize,
    pub outcome: Outcome,
    pub model_version: u64,
    pub proposals: usize,
    pub center_x: Option<f64>,
    pub center_y: Option<f64>,
    pub angle: Option<f64>,
    pub inner_span: Option<f64>,
    pub extra_opening: Option<f64>,
    pub z: Option<f64>,
    pub p_success: Option<f64>,
    pub exp_red: Option<f64>,
    pub exp_yellow: Option<f64>,
    pub exp_bluegreen: Option<f64>,
    pub exp_unknown: Option<f64>,
    pub target: Option<ObjectClass>,
    pub value: Option<f64>,
    pub red: Option<u64>,
    pub yellow: Option<u64>,
    pub bluegreen: Option<u64>,
    pub unknown: Option<u64>,
    pub succeeded: Option<bool>,
    /// Observed pixels of the predicted target class.
    pub target_px: Option<u64>,
}

impl PickRecord {
    fn new(tick: usize, outcome: Outcome, model_version: u64, proposals: usize, best: Option<&EvaluatedGrasp>) -> Self {
        let g = best.map(|e| e.grasp);
        let c = best.map(|e| e.expected_colors);
        PickRecord {
            tick,
            outcome,
            model_version,
            proposals,
            center_x: g.map(|g| g.center_x),
            center_y: g.map(|g| g.center_y),
            angle: g.map(|g| g.angle),
            inner_span: g.map(|g| g.inner_span),
            extra_opening: g.map(|g| g.extra_opening),
            z: g.map(|g| g.z),
            p_success: best.map(|e| e.p_success),
            exp_red: c.map(|c| c[0]),
            exp_yellow: c.map(|c| c[1]),
            exp_bluegreen: c.map(|c| c[2]),
            exp_unknown: c.map(|c| c[3]),
            target: best.map(|e| e.target),
            value: best.map(|e| e.value),
            red: None,
            yellow: None,
            bluegreen: None,
            unknown: None,
            succeeded: None,
            target_px: None,
        }
    }

    fn observe(&mut self, counts: ColorCounts) {
        let [r, y, b, u] = counts.counts;
        (self.red, self.yellow, self.bluegreen, self.unknown) = (Some(r), Some(y), Some(b), Some(u));
        self.succeeded = Some(counts.total() > 0);
        self.target_px = self.target.map(|t| counts.get(t));
    }

    pub fn counts(&self) -> Option<ColorCounts> {
        Some(ColorCounts::new([self.red?, self.yellow?, self.bluegreen?, self.unknown?]))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub log: Vec<PickRecord>,
    pub models: ModelPair,
    pub examples: Vec<TrainingExample>,
    /// Footprint area share per sortable class over every pile dropped.
    pub pile_class_share: [f64; 3],
}

impl RunOutput {
    pub fn executed(&self) -> usize {
        self.log.iter().filter(|r| r.outcome == Outcome::Executed).count()
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(id);
    r
}

/// Runs the pick loop until `cfg.picks` picks were executed or the tick
/// limit is reached.
///
/// The world, the planner and the trainer draw from separate streams of
/// the seed. Training happens between ticks; a pick always sees the models
/// published before it started.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> Result<RunOutput> {
    cfg.validate()?;
    let mut world_rng = stream(seed, 1);
    let mut plan_rng = stream(seed, 2);
    let mut train_rng = stream(seed, 3);
    let feedback = FeedbackConfig::default();

    let mix = cfg.world.pile.class_mix;
    let total: f64 = mix.iter().sum();
    let initial = if cfg.learning {
        ModelPair::null()
    } else {
        ModelPair::prior([mix[0] / total, mix[1] / total, mix[2] / total, 0.0])
    };
    let store = ModelStore::new(initial);

    let mut scene = cfg.world.empty_scene();
    let mut next_new_id = 0u32;
    let mut pile_area = [0.0; 3];
    let mut log = Vec::new();
    let mut examples: Vec<TrainingExample> = Vec::new();
    let mut trained_on = 0usize;
    let mut skips = 0usize;
    let mut executed = 0usize;

    for tick in 0..cfg.tick_limit() {
        if executed >= cfg.picks {
            break;
        }
        if scene.len() < cfg.refresh_below || skips >= cfg.refresh_after_skips {
            scene.add_pile(&cfg.world.pile, &mut world_rng);
            let first_new = next_new_id;
            for o in scene.objects.iter().filter(|o| o.id >= first_new) {
                pile_area[o.class.index()] += o.shape.area();
                next_new_id = next_new_id.max(o.id + 1);
            }
            skips = 0;
        }

        let models = store.latest();
        let p = plan(&scene, cfg, &mut plan_rng);
        let mut ctx = FeatureContext::new(&p.hm, &p.rgb, &p.um, &cfg.gripper);
        let prepared: Vec<_> = p.grasps.iter().map(|g| (*g, ctx.prepare(g))).collect();
        let best = best_with(&models, &ctx, &prepared, &cfg.policy);
        let top: Vec<EvaluatedGrasp> = best.iter().map(|b| b.1.clone()).collect();
        let (Decision::Execute(_), Some((i, chosen))) = (select(&top, &mut plan_rng, &cfg.policy), &best) else {
            skips += 1;
            log.push(PickRecord::new(tick, Outcome::Skipped, models.version, prepared.len(), best.as_ref().map(|b| &b.1)));
            continue;
        };
        let i = *i;
        skips = 0;
        let outcome = execute_grasp(&mut scene, &chosen.grasp, &cfg.gripper, &cfg.world, &mut world_rng);
        if cfg.robot_fault_probability > 0.0 && world_rng.random::<f64>() < cfg.robot_fault_probability {
            log.push(PickRecord::new(tick, Outcome::Fault, models.version, prepared.len(), Some(chosen)));
            continue;
        }
        let counts = if outcome.sensor_failure() {
            ColorCounts::default()
        } else {
            let frames = synthesize_dropzone(&outcome.picked, &cfg.world.dropzone, &mut world_rng);
            result(&frames, &feedback)
        };
        let mut record = PickRecord::new(tick, Outcome::Executed, models.version, prepared.len(), Some(chosen));
        record.observe(counts);
        log.push(record);
        executed += 1;

        let prep = &prepared[i].1;
        examples.push(TrainingExample::new(ctx.success_features(prep), ctx.color_features(prep), counts));
        let fresh = examples.len() - trained_on;
        if cfg.learning && fresh >= cfg.retrain_every && fresh as f64 >= cfg.retrain_growth * trained_on as f64 {
            let pair = train(&examples, &cfg.success_forest, &cfg.color_forest, &mut train_rng)?;
            store.publish(pair);
            trained_on = examples.len();
        }
    }

    let area_total: f64 = pile_area.iter().sum();
    let pile_class_share = if area_total > 0.0 { pile_area.map(|a| a / area_total) } else { [0.0; 3] };
    Ok(RunOutput { log, models: (*store.latest()).clone(), examples, pile_class_share })
}

/// Share of the pile's most common class, by footprint area.
pub fn majority_share(share: &[f64; 3]) -> f64 {
    share.iter().cloned().fold(0.0, f64::max)
}
