//! Flat `key = value` configuration files.
//!
//! Blank lines and `#` comments are ignored. Every key must be known to the
//! reader and may appear once; list values are comma separated.

use std::collections::HashSet;

use crate::forest::ForestParams;
use crate::grasp::{GripperGeometry, OpeningCurve, DEFAULT_NUM_ANGLES, DEFAULT_SAMPLE_SIZE};
use crate::policy::PolicyConfig;
use crate::simworld::WorldConfig;
use crate::{Error, Result};

/// One `key = value` line.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

impl Entry {
    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::parse(self.line, format!("{}: {msg}", self.key))
    }

    pub fn f64(&self) -> Result<f64> {
        let v: f64 = self.value.parse().map_err(|_| self.err("expected a number"))?;
        if !v.is_finite() {
            return Err(self.err("expected a finite number"));
        }
        Ok(v)
    }

    pub fn usize(&self) -> Result<usize> {
        self.value.parse().map_err(|_| self.err("expected a non-negative integer"))
    }

    pub fn u64(&self) -> Result<u64> {
        self.value.parse().map_err(|_| self.err("expected a non-negative integer"))
    }

    pub fn bool(&self) -> Result<bool> {
        match self.value.as_str() {
            "true" | "yes" | "1" => Ok(true),
            "false" | "no" | "0" => Ok(false),
            _ => Err(self.err("expected true or false")),
        }
    }

    pub fn list(&self) -> Result<Vec<f64>> {
        self.value
            .split(',')
            .map(|s| s.trim().parse::<f64>().map_err(|_| self.err("expected comma-separated numbers")))
            .collect()
    }

    pub fn pair(&self) -> Result<(f64, f64)> {
        match self.list()?[..] {
            [a, b] => Ok((a, b)),
            _ => Err(self.err("expected two comma-separated numbers")),
        }
    }

    /// `0` means "use the default".
    fn optional(&self) -> Result<Option<usize>> {
        Ok(Some(self.usize()?).filter(|&v| v > 0))
    }
}

/// Splits a config text into entries, rejecting malformed and repeated keys.
pub fn parse_entries(text: &str) -> Result<Vec<Entry>> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| Error::parse(line, "expected `key = value`"))?;
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::parse(line, "empty key"));
        }
        if !seen.insert(key.clone()) {
            return Err(Error::parse(line, format!("duplicate key {key}")));
        }
        out.push(Entry { line, key, value: value.trim().to_string() });
    }
    Ok(out)
}

/// Applies a gripper key; `Ok(false)` if the key is not a gripper key.
fn apply_gripper(g: &mut GripperGeometry, e: &Entry) -> Result<bool> {
    match e.key.as_str() {
        "finger_thickness" => g.finger_thickness = e.f64()?,
        "finger_width" => g.finger_width = e.f64()?,
        "min_opening" => g.min_opening = e.f64()?,
        "max_opening" => g.max_opening = e.f64()?,
        "lift_ratio" => g.opening_curve = OpeningCurve::linear(e.f64()?),
        "opening_curve" => {
            let v = e.list()?;
            if v.len() % 3 != 0 {
                return Err(e.err("expected extra,offset,lift triples"));
            }
            let points = v.chunks(3).map(|c| (c[0], c[1], c[2])).collect();
            g.opening_curve = OpeningCurve::from_table(points).map_err(|err| e.err(err))?;
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Reads a gripper description. Keys: `finger_thickness`, `finger_width`,
/// `min_opening`, `max_opening` (mm), and either `lift_ratio` or
/// `opening_curve = e0,o0,l0, e1,o1,l1, …`.
pub fn parse_gripper(text: &str) -> Result<GripperGeometry> {
    let mut g = GripperGeometry::default();
    for e in parse_entries(text)? {
        if !apply_gripper(&mut g, &e)? {
            return Err(e.err("unknown key"));
        }
    }
    g.validate()?;
    Ok(g)
}

/// Forest size used by the loop, which refits after every pick.
pub const LOOP_FOREST: ForestParams = ForestParams { num_trees: 25, max_features: None, min_samples_split: None };

/// Everything a simulated run needs besides its seed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    /// Executed picks to perform.
    pub picks: usize,
    /// Hard stop on loop iterations, skips included; 0 means `20 × picks`.
    pub max_ticks: usize,
    pub num_angles: usize,
    pub sample_size: usize,
    /// When false the loop keeps the untrained prior forever.
    pub learning: bool,
    /// Retrain once at least this many examples arrived since the last fit.
    pub retrain_every: usize,
    /// Also wait for the dataset to grow by this fraction since the last fit.
    pub retrain_growth: f64,
    pub success_forest: ForestParams,
    pub color_forest: ForestParams,
    /// Refresh the pile when fewer objects remain.
    pub refresh_below: usize,
    /// Refresh the pile after this many consecutive skips.
    pub refresh_after_skips: usize,
    /// Probability that an executed pick aborts before release.
    pub robot_fault_probability: f64,
    pub block_size: usize,
    pub gripper: GripperGeometry,
    pub policy: PolicyConfig,
    pub world: WorldConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            picks: 500,
            max_ticks: 0,
            num_angles: DEFAULT_NUM_ANGLES,
            sample_size: DEFAULT_SAMPLE_SIZE,
            learning: true,
            retrain_every: 1,
            retrain_growth: 0.0,
            success_forest: LOOP_FOREST,
            color_forest: LOOP_FOREST,
            refresh_below: 3,
            refresh_after_skips: 5,
            robot_fault_probability: 0.0,
            block_size: 25,
            gripper: GripperGeometry::default(),
            policy: PolicyConfig::default(),
            world: WorldConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn tick_limit(&self) -> usize {
        if self.max_ticks > 0 {
            self.max_ticks
        } else {
            self.picks.saturating_mul(20)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_angles == 0 || self.sample_size == 0 || self.retrain_every == 0 || self.block_size == 0 {
            return Err(Error::Config("num_angles, sample_size, retrain_every and block_size must be positive".into()));
        }
        if self.success_forest.num_trees == 0 || self.color_forest.num_trees == 0 {
            return Err(Error::Config("forests need at least one tree".into()));
        }
        if !(0.0..=1.0).contains(&self.robot_fault_probability) || self.retrain_growth < 0.0 {
            return Err(Error::Config("robot_fault_probability must lie in [0, 1] and retrain_growth be ≥ 0".into()));
        }
        self.gripper.validate()?;
        self.world.validate()
    }

    /// Parses a config file on top of the defaults.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = ExperimentConfig::default();
        for e in parse_entries(text)? {
            c.apply(&e)?;
        }
        c.validate()?;
        Ok(c)
    }

    fn apply(&mut self, e: &Entry) -> Result<()> {
        if apply_gripper(&mut self.gripper, e)? {
            return Ok(());
        }
        let w = &mut self.world;
        match e.key.as_str() {
            "picks" => self.picks = e.usize()?,
            "max_ticks" => self.max_ticks = e.usize()?,
            "num_angles" => self.num_angles = e.usize()?,
            "sample_size" => self.sample_size = e.usize()?,
            "learning" => self.learning = e.bool()?,
            "retrain_every" => self.retrain_every = e.usize()?,
            "retrain_growth" => self.retrain_growth = e.f64()?,
            "num_trees" => {
                let m = e.usize()?;
                self.success_forest.num_trees = m;
                self.color_forest.num_trees = m;
            }
            "success_max_features" => self.success_forest.max_features = e.optional()?,
            "success_min_split" => self.success_forest.min_samples_split = e.optional()?,
            "color_max_features" => self.color_forest.max_features = e.optional()?,
            "color_min_split" => self.color_forest.min_samples_split = e.optional()?,
            "refresh_below" => self.refresh_below = e.usize()?,
            "refresh_after_skips" => self.refresh_after_skips = e.usize()?,
            "robot_fault_probability" => self.robot_fault_probability = e.f64()?,
            "block_size" => self.block_size = e.usize()?,
            "purity_center" => self.policy.purity_center = e.f64()?,
            "purity_slope" => self.policy.purity_slope = e.f64()?,
            "pixel_scale" => self.policy.pixel_scale = e.f64()?,
            "skip_below" => self.policy.skip_below = e.f64()?,
            "skip_probability" => self.policy.skip_probability = e.f64()?,
            "width_px" => w.width_px = e.usize()?,
            "height_px" => w.height_px = e.usize()?,
            "resolution_mm" => w.resolution_mm = e.f64()?,
            "camera_x_mm" => w.camera_x_mm = e.f64()?,
            "camera_height_mm" => w.capture.camera_height_mm = e.f64()?,
            "occlusion_depth_step_mm" => w.capture.occlusion_depth_step_mm = e.f64()?,
            "disturb_radius_mm" => w.disturb_radius_mm = e.f64()?,
            "contact_tolerance_mm" => w.contact_tolerance_mm = e.f64()?,
            "pile_count_min" => w.pile.count_min = e.usize()?,
            "pile_count_max" => w.pile.count_max = e.usize()?,
            "pile_center" => w.pile.center = e.pair()?,
            "pile_extent" => w.pile.extent = e.pair()?,
            "class_mix" => {
                w.pile.class_mix = match e.list()?[..] {
                    [a, b, c] => [a, b, c],
                    _ => return Err(e.err("expected three weights")),
                }
            }
            "box_fraction" => w.pile.box_fraction = e.f64()?,
            "box_side" => w.pile.box_side = e.pair()?,
            "disc_diameter" => w.pile.disc_diameter = e.pair()?,
            "thickness" => w.pile.thickness = e.pair()?,
            "density" => w.pile.density = e.pair()?,
            "mass_clamp" => w.pile.mass_clamp = e.pair()?,
            "slip_base" => w.slip.base = e.f64()?,
            "slip_per_kg" => w.slip.per_kg = e.f64()?,
            "slip_shallow_grip_mm" => w.slip.shallow_grip_mm = e.f64()?,
            "slip_shallow_penalty" => w.slip.shallow_penalty = e.f64()?,
            "slip_edge_overlap" => w.slip.edge_overlap_fraction = e.f64()?,
            "slip_edge_penalty" => w.slip.edge_penalty = e.f64()?,
            "slip_cap" => w.slip.cap = e.f64()?,
            "dropzone_frames" => w.dropzone.frames = e.usize()?,
            "dropzone_noise_mm" => w.dropzone.noise_sigma_mm = e.f64()?,
            _ => return Err(e.err("unknown key")),
        }
        Ok(())
    }
}
