//! Rank and linear correlation coefficients.
//!
//! Each function returns `Ok(None)` when the coefficient is undefined because
//! one input has no variation.

use std::cmp::Ordering;

use crate::error::{Error, Result};

fn check(xs: &[f64], ys: &[f64]) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Invalid(format!(
            "correlation inputs differ in length ({} vs {})",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::Invalid("correlation needs at least two observations".into()));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Invalid("correlation inputs must be finite".into()));
    }
    Ok(())
}

/// Number of unordered pairs among runs of equal values in a sorted sequence.
fn tied_pairs<T, F: Fn(&T, &T) -> bool>(sorted: &[T], eq: F) -> u64 {
    let mut total = 0;
    let mut run = 1u64;
    for w in sorted.windows(2) {
        if eq(&w[0], &w[1]) {
            run += 1;
        } else {
            total += run * (run - 1) / 2;
            run = 1;
        }
    }
    total + run * (run - 1) / 2
}

/// Merge sort by y, returning the number of inversions (swaps).
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = {
        let (left, right) = v.split_at_mut(mid);
        let (bl, br) = buf.split_at_mut(mid);
        sort_counting_swaps(left, bl) + sort_counting_swaps(right, br)
    };
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    let k = k + mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Tie-corrected Kendall tau-b (Knight's O(n log n) algorithm).
pub fn kendall_tau(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    check(xs, ys)?;
    let n = xs.len() as u64;
    let mut pairs: Vec<(f64, f64)> = xs.iter().copied().zip(ys.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = n * (n - 1) / 2;
    let tied_x = tied_pairs(&pairs, |a, b| a.0 == b.0);
    let tied_xy = tied_pairs(&pairs, |a, b| a == b);
    let mut y_sorted: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; y_sorted.len()];
    let swaps = sort_counting_swaps(&mut y_sorted, &mut buf);
    let tied_y = tied_pairs(&y_sorted, |a, b| a == b);
    if tied_x == n0 || tied_y == n0 {
        return Ok(None);
    }
    let score = (n0 + tied_xy) as i64 - (tied_x + tied_y) as i64 - 2 * swaps as i64;
    Ok(Some(tau_b(score, n0, tied_x, tied_y)))
}

/// `(concordant - discordant) / sqrt((n0 - n1)(n0 - n2))`.
pub fn tau_b(score: i64, n0: u64, tied_x: u64, tied_y: u64) -> f64 {
    let denom = ((n0 - tied_x) as f64 * (n0 - tied_y) as f64).sqrt();
    (score as f64 / denom).clamp(-1.0, 1.0)
}

/// Sample Pearson correlation.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    check(xs, ys)?;
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Ok(None);
    }
    Ok(Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]].total_cmp(&values[order[start]]) == Ordering::Equal {
            end += 1;
        }
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson correlation of average ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
    check(xs, ys)?;
    pearson(&average_ranks(xs), &average_ranks(ys))
}
