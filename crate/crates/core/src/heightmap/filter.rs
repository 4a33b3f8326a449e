use std::collections::VecDeque;

use super::Heightmap;

/// Sliding-window maximum over `input` with a window of `k` samples.
///
/// Output `i` covers `[i − k/2, i + k − 1 − k/2]` clamped to the slice, so odd
/// windows are centred and even ones lean left by half a sample. Runs in
/// O(n) with a monotonic deque of indices (values strictly decreasing from
/// front to back).
pub fn sliding_max(input: &[f64], k: usize, out: &mut [f64]) {
    assert!(k >= 1);
    assert_eq!(input.len(), out.len());
    let n = input.len();
    if n == 0 {
        return;
    }
    let before = k / 2;
    let after = k - 1 - before;
    let mut deque: VecDeque<usize> = VecDeque::with_capacity(k.min(n) + 1);
    let mut next = 0;
    for (i, o) in out.iter_mut().enumerate() {
        let hi = (i + after).min(n - 1);
        while next <= hi {
            let v = input[next];
            while deque.back().is_some_and(|&j| input[j] <= v) {
                deque.pop_back();
            }
            deque.push_back(next);
            next += 1;
        }
        let lo = i.saturating_sub(before);
        while deque.front().is_some_and(|&j| j < lo) {
            deque.pop_front();
        }
        *o = input[*deque.front().expect("window is never empty")];
    }
}

/// Heights are never NaN, so a plain comparison suffices.
#[inline(always)]
fn max(a: f64, b: f64) -> f64 {
    if a >= b {
        a
    } else {
        b
    }
}

/// [`sliding_max`] by running maxima forwards and backwards inside blocks of
/// `k` samples; `fwd` and `bwd` are scratch of the input's length.
fn block_max(input: &[f64], k: usize, out: &mut [f64], fwd: &mut [f64], bwd: &mut [f64]) {
    let n = input.len();
    let mut m = 0;
    for i in 0..n {
        fwd[i] = if m == 0 { input[i] } else { max(fwd[i - 1], input[i]) };
        m = if m + 1 == k { 0 } else { m + 1 };
    }
    // Block ends are the indices i with (i + 1) % k == 0, plus the last one.
    let mut m = n % k;
    for i in (0..n).rev() {
        m = if m == 0 { k - 1 } else { m - 1 };
        bwd[i] = if i + 1 == n || m == k - 1 { input[i] } else { max(bwd[i + 1], input[i]) };
    }
    let (before, after) = (k / 2, k - 1 - k / 2);
    let (mut lo, mut lo_mod, mut lo_blk) = (0, 0, 0);
    let mut hi = after.min(n - 1);
    let (mut hi_mod, mut hi_blk) = (hi % k, hi / k);
    for (i, o) in out.iter_mut().enumerate() {
        *o = if lo_blk != hi_blk {
            max(bwd[lo], fwd[hi])
        } else if lo_mod == 0 {
            fwd[hi]
        } else {
            bwd[lo]
        };
        if i + 1 > before {
            lo += 1;
            lo_mod += 1;
            if lo_mod == k {
                lo_mod = 0;
                lo_blk += 1;
            }
        }
        if hi + 1 < n {
            hi += 1;
            hi_mod += 1;
            if hi_mod == k {
                hi_mod = 0;
                hi_blk += 1;
            }
        }
    }
}

/// Vertical sliding maximum with the windows of [`sliding_max`], computed a
/// whole row at a time: running maxima forwards and backwards inside blocks
/// of `k` rows cover any window with at most two lookups.
fn column_max(rows: &[f64], w: usize, ht: usize, k: usize) -> Vec<f64> {
    let row = |y: usize| y * w..(y + 1) * w;
    let mut fwd = rows.to_vec();
    for y in 1..ht {
        if y % k != 0 {
            let (done, cur) = fwd.split_at_mut(y * w);
            for (c, p) in cur[..w].iter_mut().zip(&done[(y - 1) * w..]) {
                *c = max(*c, *p);
            }
        }
    }
    let mut bwd = rows.to_vec();
    for y in (0..ht.saturating_sub(1)).rev() {
        if (y + 1) % k != 0 {
            let (cur, done) = bwd.split_at_mut((y + 1) * w);
            for (c, n) in cur[y * w..].iter_mut().zip(&done[..w]) {
                *c = max(*c, *n);
            }
        }
    }
    let (before, after) = (k / 2, k - 1 - k / 2);
    let mut out = vec![0.0; w * ht];
    for y in 0..ht {
        let lo = y.saturating_sub(before);
        let hi = (y + after).min(ht - 1);
        let dst = &mut out[row(y)];
        if lo / k != hi / k {
            for ((o, a), b) in dst.iter_mut().zip(&bwd[row(lo)]).zip(&fwd[row(hi)]) {
                *o = max(*a, *b);
            }
        } else if lo % k == 0 {
            dst.copy_from_slice(&fwd[row(hi)]);
        } else {
            dst.copy_from_slice(&bwd[row(lo)]);
        }
    }
    out
}

/// Maximum over a `kernel_w × kernel_h` window around each pixel (clamped at
/// the borders). Separable: a sliding maximum along rows, then the same
/// window down columns.
pub fn maximum_filter(h: &Heightmap, kernel_w: usize, kernel_h: usize) -> Heightmap {
    assert!(kernel_w >= 1 && kernel_h >= 1, "kernel dimensions must be >= 1");
    let (w, ht) = (h.width(), h.height());
    let mut rows = vec![0.0; w * ht];
    if kernel_w == 1 {
        rows.copy_from_slice(h.data());
    } else {
        let (mut fwd, mut bwd) = (vec![0.0; w], vec![0.0; w]);
        for y in 0..ht {
            block_max(h.row(y), kernel_w, &mut rows[y * w..(y + 1) * w], &mut fwd, &mut bwd);
        }
    }
    let out = if kernel_h > 1 { column_max(&rows, w, ht, kernel_h) } else { rows };
    Heightmap::from_valid(w, ht, h.resolution(), out)
}
