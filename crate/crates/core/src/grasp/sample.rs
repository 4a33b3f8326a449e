use rand::Rng;

use super::GraspRectangle;

const MIN_WEIGHT: f64 = 1e-9;

/// Draws `n` distinct candidates with probability proportional to their
/// value, without replacement.
///
/// Each candidate gets the key `ln(u)/w`; the `n` largest keys win and are
/// returned in decreasing key order, which is itself a weighted random
/// permutation. Values `≤ 0` are treated as a tiny positive weight. With
/// at most `n` candidates all of them are returned in that order.
pub fn weighted_sample<R: Rng + ?Sized>(cands: &[GraspRectangle], n: usize, rng: &mut R) -> Vec<GraspRectangle> {
    let mut keyed: Vec<(f64, usize)> = cands
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let w = if c.value > 0.0 { c.value } else { MIN_WEIGHT };
            let u: f64 = rng.random();
            // ln(0) would give -inf for every weight; 1 - u lies in (0, 1].
            ((1.0 - u).ln() / w, i)
        })
        .collect();
    let by_key = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
    if n > 0 && n < keyed.len() {
        keyed.select_nth_unstable_by(n - 1, by_key);
    }
    keyed.truncate(n);
    keyed.sort_by(by_key);
    keyed.into_iter().map(|(_, i)| cands[i]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cand(value: f64, tag: f64) -> GraspRectangle {
        GraspRectangle {
            center_x: tag,
            center_y: 0.0,
            angle: 0.0,
            inner_span: 50.0,
            finger_width: 45.0,
            z: 0.0,
            extra_opening: 0.0,
            value,
        }
    }

    #[test]
    fn small_input_is_returned_whole() {
        let cs: Vec<_> = (0..5).map(|i| cand(1.0, i as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut tags: Vec<i64> = weighted_sample(&cs, 2000, &mut rng).iter().map(|c| c.center_x as i64).collect();
        tags.sort();
        assert_eq!(tags, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn small_input_order_is_random() {
        let cs: Vec<_> = (0..5).map(|i| cand(1.0, i as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let firsts: std::collections::HashSet<i64> =
            (0..200).map(|_| weighted_sample(&cs, 2000, &mut rng)[0].center_x as i64).collect();
        assert_eq!(firsts.len(), 5);
    }

    #[test]
    fn sample_is_distinct_and_sized() {
        let cs: Vec<_> = (0..100).map(|i| cand((i % 7) as f64, i as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = weighted_sample(&cs, 30, &mut rng);
        assert_eq!(s.len(), 30);
        let mut tags: Vec<i64> = s.iter().map(|c| c.center_x as i64).collect();
        tags.sort();
        tags.dedup();
        assert_eq!(tags.len(), 30);
    }

    #[test]
    fn equal_weights_are_uniform() {
        let k = 5;
        let cs: Vec<_> = (0..k).map(|i| cand(2.0, i as f64)).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let trials = 100_000;
        let mut hits = vec![0usize; k];
        for _ in 0..trials {
            hits[weighted_sample(&cs, 1, &mut rng)[0].center_x as usize] += 1;
        }
        let p = 1.0 / k as f64;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        for h in hits {
            assert!((h as f64 - trials as f64 * p).abs() <= 3.0 * sigma, "{h}");
        }
    }

    #[test]
    fn heavy_candidate_dominates() {
        let mut cs: Vec<_> = (0..10).map(|i| cand(1e-9, i as f64)).collect();
        cs[3].value = 1e6;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hits = (0..10_000)
            .filter(|_| weighted_sample(&cs, 1, &mut rng)[0].center_x == 3.0)
            .count();
        assert!(hits >= 9_990);
    }

    #[test]
    fn nonpositive_values_are_still_drawable() {
        let cs = vec![cand(0.0, 0.0), cand(-3.0, 1.0), cand(0.0, 2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let s = weighted_sample(&cs, 2, &mut rng);
        assert_eq!(s.len(), 2);
    }

    #[test]
    fn inclusion_follows_weights() {
        // Two of three with weights 1, 1, 2: P(heavy excluded) = 1/2·1/3·2 = 1/6.
        let cs = vec![cand(1.0, 0.0), cand(1.0, 1.0), cand(2.0, 2.0)];
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let trials = 60_000;
        let missed = (0..trials)
            .filter(|_| weighted_sample(&cs, 2, &mut rng).iter().all(|c| c.center_x != 2.0))
            .count();
        let p = 1.0 / 6.0;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((missed as f64 - trials as f64 * p).abs() <= 3.0 * sigma);
    }
}
