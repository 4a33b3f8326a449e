//! The self-supervised pick loop: propose, evaluate, select, execute,
//! observe, append and retrain.

mod config;
mod metrics;
mod run;

pub use config::{parse_entries, parse_gripper, Entry, ExperimentConfig, LOOP_FOREST};
pub use metrics::{block_metrics, read_log, write_curves, write_log, BlockMetrics};
pub use run::{majority_share, proposed_grasps, run, Outcome, PickRecord, Proposal, RunOutput};

use std::sync::{Arc, RwLock};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::features::FeatureVector;
use crate::feedback::ColorCounts;
use crate::forest::{Forest, ForestKind, ForestParams};
use crate::{Error, Result, NUM_OUTPUT_CLASSES};

/// One executed pick with feedback.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub success_features: FeatureVector,
    pub color_features: FeatureVector,
    pub counts: ColorCounts,
    pub succeeded: bool,
}

impl TrainingExample {
    pub fn new(success_features: FeatureVector, color_features: FeatureVector, counts: ColorCounts) -> Self {
        TrainingExample { success_features, color_features, succeeded: counts.total() > 0, counts }
    }
}

/// A predictor slot: the untrained null model, a fixed output, or a forest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Model {
    Null,
    Constant(Vec<f64>),
    Forest(Forest),
}

/// The success classifier and the class-proportion regressor in use.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPair {
    pub success: Model,
    pub color: Model,
    pub version: u64,
}

impl ModelPair {
    /// Predicts certain success and all-unknown material for every grasp.
    pub fn null() -> Self {
        ModelPair { success: Model::Null, color: Model::Null, version: 0 }
    }

    /// Feature-blind baseline: certain success and the given class
    /// proportions for every grasp, so the majority class is always the
    /// target.
    pub fn prior(proportions: [f64; NUM_OUTPUT_CLASSES]) -> Self {
        ModelPair { success: Model::Null, color: Model::Constant(proportions.to_vec()), version: 0 }
    }

    pub(crate) fn check_dims(&self, success: usize, color: usize) -> Result<()> {
        for (m, got) in [(&self.success, success), (&self.color, color)] {
            if let Model::Forest(f) = m {
                if f.input_dim != got {
                    return Err(Error::DimensionMismatch { expected: f.input_dim, got });
                }
            }
        }
        Ok(())
    }

    /// Probability of the success class.
    pub fn success_probability<F: Fn(usize) -> f64>(&self, x: F) -> f64 {
        match &self.success {
            Model::Null => 1.0,
            Model::Constant(v) => v[1],
            Model::Forest(f) => f.predict_with(x)[1],
        }
    }

    /// Success probability, or `None` once it is certain to be below `floor`.
    pub fn success_probability_above<F: Fn(usize) -> f64>(&self, x: F, floor: f64) -> Option<f64> {
        match &self.success {
            Model::Forest(f) => f.predict_above(x, Some(1), 1.0, floor).map(|v| v[1]),
            _ => Some(self.success_probability(x)),
        }
    }

    /// Class proportions, or `None` once every one of them is certain to
    /// be below `floor`.
    pub fn proportions_above<F: Fn(usize) -> f64>(&self, x: F, floor: f64) -> Option<[f64; NUM_OUTPUT_CLASSES]> {
        match &self.color {
            Model::Forest(f) => f.predict_above(x, None, 1.0, floor).map(|v| std::array::from_fn(|i| v[i])),
            _ => Some(self.proportions(x)),
        }
    }

    /// Upper bound on any predicted proportion.
    pub fn max_proportion(&self) -> f64 {
        match &self.color {
            Model::Constant(v) => v.iter().cloned().fold(1.0, f64::max),
            Model::Null | Model::Forest(_) => 1.0,
        }
    }

    /// Predicted (red, yellow, blue-green, unknown) proportions.
    pub fn proportions<F: Fn(usize) -> f64>(&self, x: F) -> [f64; NUM_OUTPUT_CLASSES] {
        let v = match &self.color {
            Model::Null => return [0.0, 0.0, 0.0, 1.0],
            Model::Constant(v) => v.clone(),
            Model::Forest(f) => f.predict_with(x),
        };
        std::array::from_fn(|i| v[i])
    }
}

/// Latest published models, shared between a trainer and the pick loop.
/// Readers always see a complete pair.
#[derive(Debug, Clone)]
pub struct ModelStore {
    inner: Arc<RwLock<Arc<ModelPair>>>,
}

impl ModelStore {
    pub fn new(initial: ModelPair) -> Self {
        ModelStore { inner: Arc::new(RwLock::new(Arc::new(initial))) }
    }

    pub fn latest(&self) -> Arc<ModelPair> {
        self.inner.read().expect("model store lock").clone()
    }

    /// Installs `pair` with the next version number and returns it.
    pub fn publish(&self, mut pair: ModelPair) -> u64 {
        let mut slot = self.inner.write().expect("model store lock");
        pair.version = slot.version + 1;
        let v = pair.version;
        *slot = Arc::new(pair);
        v
    }
}

/// Trains both models from scratch on all examples: the classifier on every
/// example, the regressor on the proportions of the successful ones. Slots
/// without data stay null.
pub fn train<R: Rng + ?Sized>(
    data: &[TrainingExample],
    success_params: &ForestParams,
    color_params: &ForestParams,
    rng: &mut R,
) -> Result<ModelPair> {
    let mut pair = ModelPair::null();
    if data.is_empty() {
        return Ok(pair);
    }
    let rows: Vec<&[f64]> = data.iter().map(|e| e.success_features.values.as_slice()).collect();
    let labels: Vec<usize> = data.iter().map(|e| usize::from(e.succeeded)).collect();
    pair.success = Model::Forest(Forest::fit_classifier(&rows, &labels, 2, success_params, rng)?);
    let ok: Vec<&TrainingExample> = data.iter().filter(|e| e.succeeded).collect();
    if !ok.is_empty() {
        let rows: Vec<&[f64]> = ok.iter().map(|e| e.color_features.values.as_slice()).collect();
        let targets: Vec<[f64; NUM_OUTPUT_CLASSES]> = ok.iter().map(|e| e.counts.proportions()).collect();
        pair.color = Model::Forest(Forest::fit(ForestKind::Regressor, &rows, &targets, color_params, rng)?);
    }
    Ok(pair)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureLayout;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn example(seed: u64, counts: [u64; 4]) -> TrainingExample {
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let s = (0..FeatureLayout::Success.len()).map(|_| r.random_range(0.0..1.0)).collect();
        let c = (0..FeatureLayout::Color.len()).map(|_| r.random_range(0.0..1.0)).collect();
        TrainingExample::new(
            FeatureVector { layout: FeatureLayout::Success, values: s },
            FeatureVector { layout: FeatureLayout::Color, values: c },
            ColorCounts::new(counts),
        )
    }

    fn small() -> ForestParams {
        ForestParams { num_trees: 10, ..ForestParams::default() }
    }

    #[test]
    fn success_flag_follows_counts() {
        assert!(!example(0, [0; 4]).succeeded);
        assert!(example(0, [0, 0, 0, 3]).succeeded);
    }

    #[test]
    fn empty_data_gives_null_models() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let m = train(&[], &small(), &small(), &mut rng).unwrap();
        assert_eq!(m, ModelPair::null());
        assert_eq!(m.success_probability(|_| 0.0), 1.0);
        assert_eq!(m.proportions(|_| 0.0), [0.0, 0.0, 0.0, 1.0]);
    }

    #[test]
    fn failures_only_leave_the_regressor_null() {
        let data: Vec<_> = (0..8).map(|i| example(i, [0; 4])).collect();
        let m = train(&data, &small(), &small(), &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        assert!(matches!(m.success, Model::Forest(_)));
        assert_eq!(m.color, Model::Null);
        let x = &data[0].success_features.values;
        assert_eq!(m.success_probability(|j| x[j]), 0.0);
    }

    #[test]
    fn red_successes_predict_red() {
        let data: Vec<_> = (0..12).map(|i| example(i, [900 + i, 0, 0, 0])).collect();
        let m = train(&data, &small(), &small(), &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
        for e in &data {
            let x = &e.color_features.values;
            let p = m.proportions(|j| x[j]);
            assert!((p[0] - 1.0).abs() < 1e-12 && p[1..].iter().all(|&v| v.abs() < 1e-12));
        }
    }

    #[test]
    fn store_versions_increase() {
        let store = ModelStore::new(ModelPair::null());
        assert_eq!(store.latest().version, 0);
        assert_eq!(store.publish(ModelPair::null()), 1);
        let reader = store.clone();
        let h = std::thread::spawn(move || reader.latest().version);
        assert_eq!(store.publish(ModelPair::null()), 2);
        assert!(h.join().unwrap() >= 1);
        assert_eq!(store.latest().version, 2);
    }

    #[test]
    fn prior_targets_its_majority() {
        let m = ModelPair::prior([0.5, 0.3, 0.2, 0.0]);
        assert_eq!(m.proportions(|_| 0.0), [0.5, 0.3, 0.2, 0.0]);
    }
}
