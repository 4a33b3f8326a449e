//! Grasp evaluation and selection.
//!
//! A proposal's utility is `PurityValue(purity) × c_target × p`: expected
//! target-class pixels recovered, weighted by a logistic preference for
//! proposals expected to be pure.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::{FeatureContext, FeatureVectors, PreparedGrasp};
use crate::grasp::GraspRectangle;
use crate::{ObjectClass, Result, NUM_OUTPUT_CLASSES};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolicyConfig {
    /// Purity at which the purity value is one half.
    pub purity_center: f64,
    pub purity_slope: f64,
    /// Nominal pixel count that predicted proportions are scaled to.
    pub pixel_scale: f64,
    /// Best grasps below this success probability are usually skipped.
    pub skip_below: f64,
    pub skip_probability: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig { purity_center: 0.8, purity_slope: 20.0, pixel_scale: 5000.0, skip_below: 0.1, skip_probability: 0.95 }
    }
}

impl PolicyConfig {
    pub fn purity_value(&self, purity: f64) -> f64 {
        1.0 / (1.0 + (-self.purity_slope * (purity - self.purity_center)).exp())
    }
}

/// Logistic purity preference centred at 0.8 with slope 20.
pub fn purity_value(purity: f64) -> f64 {
    PolicyConfig::default().purity_value(purity)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluatedGrasp {
    pub grasp: GraspRectangle,
    pub p_success: f64,
    /// Expected pixels per output class (red, yellow, blue-green, unknown).
    pub expected_colors: [f64; NUM_OUTPUT_CLASSES],
    pub target: ObjectClass,
    pub purity: f64,
    pub value: f64,
}

/// Target, purity and utility for one prediction. Ties in the expected
/// colors go to the lowest class index.
pub fn score(p_success: f64, colors: [f64; NUM_OUTPUT_CLASSES], cfg: &PolicyConfig) -> (ObjectClass, f64, f64) {
    let mut t = 0;
    for (j, &c) in colors.iter().enumerate() {
        if c > colors[t] {
            t = j;
        }
    }
    let total: f64 = colors.iter().sum();
    let purity = if total > 0.0 { colors[t] / total } else { 0.0 };
    let value = cfg.purity_value(purity) * colors[t] * p_success;
    (ObjectClass::from_index(t).expect("index below class count"), purity, value)
}

fn evaluated(grasp: GraspRectangle, p_success: f64, proportions: [f64; NUM_OUTPUT_CLASSES], cfg: &PolicyConfig) -> EvaluatedGrasp {
    let p_success = p_success.clamp(0.0, 1.0);
    let expected_colors = proportions.map(|q| q.max(0.0) * cfg.pixel_scale);
    let (target, purity, value) = score(p_success, expected_colors, cfg);
    EvaluatedGrasp { grasp, p_success, expected_colors, target, purity, value }
}

/// Evaluates materialized proposals.
pub fn evaluate(
    models: &crate::experiment::ModelPair,
    proposals: &[(GraspRectangle, FeatureVectors)],
    cfg: &PolicyConfig,
) -> Result<Vec<EvaluatedGrasp>> {
    proposals
        .iter()
        .map(|(g, f)| {
            let s = &f.success.values;
            let c = &f.color.values;
            models.check_dims(s.len(), c.len())?;
            Ok(evaluated(*g, models.success_probability(|j| s[j]), models.proportions(|j| c[j]), cfg))
        })
        .collect()
}

/// Evaluates proposals whose features are read on demand from `ctx`.
pub fn evaluate_with(
    models: &crate::experiment::ModelPair,
    ctx: &FeatureContext<'_>,
    proposals: &[(GraspRectangle, PreparedGrasp)],
    cfg: &PolicyConfig,
) -> Vec<EvaluatedGrasp> {
    proposals
        .iter()
        .map(|(g, p)| {
            let ps = models.success_probability(|j| ctx.success_value(p, j));
            let colors = models.proportions(|j| ctx.color_value(p, j));
            evaluated(*g, ps, colors, cfg)
        })
        .collect()
}

/// The grasp `choosemax(&evaluate_with(..))` would pick, with the same
/// evaluation. Proposals are dropped as soon as their success probability,
/// and then their largest class proportion, can no longer reach the best
/// value found so far.
pub fn best_with(
    models: &crate::experiment::ModelPair,
    ctx: &FeatureContext<'_>,
    proposals: &[(GraspRectangle, PreparedGrasp)],
    cfg: &PolicyConfig,
) -> Option<(usize, EvaluatedGrasp)> {
    let ceiling = cfg.pixel_scale * models.max_proportion() * cfg.purity_value(0.0).max(cfg.purity_value(1.0)) * (1.0 + 1e-9);
    // A spread-out sample first finds a strong incumbent early; the rest
    // follows in table order.
    let stride = 64;
    let mut order: Vec<usize> = (0..proposals.len()).step_by(stride).collect();
    let mut rest: Vec<usize> = (0..proposals.len()).filter(|i| i % stride != 0).collect();
    rest.sort_by_key(|&i| proposals[i].1.locality_key());
    order.extend(rest);
    let mut best: Option<(usize, EvaluatedGrasp)> = None;
    for i in order {
        let (g, prep) = &proposals[i];
        let floor = best.as_ref().map_or(f64::NEG_INFINITY, |(_, b)| b.value / ceiling);
        let Some(p) = models.success_probability_above(|j| ctx.success_value(prep, j), floor) else {
            continue;
        };
        if p.clamp(0.0, 1.0) < floor {
            continue;
        }
        let reach = ceiling * p.clamp(0.0, 1.0);
        let p_floor = match &best {
            Some((_, b)) if reach > 0.0 => b.value / reach,
            _ => f64::NEG_INFINITY,
        };
        let Some(colors) = models.proportions_above(|j| ctx.color_value(prep, j), p_floor) else {
            continue;
        };
        let e = evaluated(*g, p, colors, cfg);
        if best.as_ref().is_none_or(|(bi, b)| e.value > b.value || (e.value == b.value && i < *bi)) {
            best = Some((i, e));
        }
    }
    best
}

/// Index of the highest-value grasp; the lowest index wins ties.
pub fn choosemax(evaluated: &[EvaluatedGrasp]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, e) in evaluated.iter().enumerate() {
        if best.is_none_or(|b| e.value > evaluated[b].value) {
            best = Some(i);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Decision {
    /// Execute the grasp at this index of the evaluated list.
    Execute(usize),
    Skip,
}

/// Picks the best grasp, skipping it with the configured probability when
/// its success probability is low. Consumes exactly one uniform draw.
pub fn select<R: Rng + ?Sized>(evaluated: &[EvaluatedGrasp], rng: &mut R, cfg: &PolicyConfig) -> Decision {
    let u: f64 = rng.random();
    match choosemax(evaluated) {
        None => Decision::Skip,
        Some(i) if evaluated[i].p_success < cfg.skip_below && u < cfg.skip_probability => Decision::Skip,
        Some(i) => Decision::Execute(i),
    }
}
