//! Seeded inputs shared by the benchmarks.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pilesort::feedback::FrameStack;
use pilesort::simworld::{generate_pile, synthesize_dropzone};
use pilesort::{Heightmap, RgbMap, Scene, UnknownMask, WorldConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A 1D height profile of `n` integer heights in `0..16`.
pub fn profile(n: usize, seed: u64) -> Vec<f64> {
    let mut r = rng(seed);
    (0..n).map(|_| r.random_range(0..16) as f64).collect()
}

/// A random pile on the default belt.
pub fn pile(seed: u64) -> Scene {
    let w = WorldConfig::default();
    generate_pile(w.width_px, w.height_px, w.resolution_mm, &w.pile, &mut rng(seed))
}

/// The captured maps of [`pile`].
pub fn captured(seed: u64) -> (Heightmap, RgbMap, UnknownMask) {
    let w = WorldConfig::default();
    pilesort::heightmap::capture(&pile(seed), w.camera_x_mm, &w.capture)
}

/// A drop-zone stack showing the first three objects of a pile.
pub fn dropzone(seed: u64) -> FrameStack {
    let scene = pile(seed);
    let picked: Vec<_> = scene.objects.iter().take(3).cloned().collect();
    synthesize_dropzone(&picked, &WorldConfig::default().dropzone, &mut rng(seed))
}

/// `n` rows of `d` uniform features with a binary label on the first one.
pub fn labelled(n: usize, d: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
    let mut r = rng(seed);
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| r.random()).collect()).collect();
    let labels = rows.iter().map(|x| usize::from(x[0] + 0.2 * x[1] > 0.6)).collect();
    (rows, labels)
}
