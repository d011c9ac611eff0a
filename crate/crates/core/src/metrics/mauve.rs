//! MAUVE: area under the divergence frontier of two quantized distributions.

use serde::{Deserialize, Serialize};

use super::histogram::{quantize, Histogram};
use super::kmeans::{kmeans, Codebook, DEFAULT_MAX_ITERS};
use super::lex_cmp;
use crate::embeddings::EmbeddingSet;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MauveParams {
    /// Codebook size; `None` means `max(2, (|P| + |Q|) / 10)`.
    pub k: Option<usize>,
    /// Scaling constant of the frontier.
    pub c: f64,
    /// Number of interior mixture weights.
    pub grid: usize,
    pub max_iters: usize,
}

impl Default for MauveParams {
    fn default() -> Self {
        MauveParams {
            k: None,
            c: 5.0,
            grid: 100,
            max_iters: DEFAULT_MAX_ITERS,
        }
    }
}

impl MauveParams {
    pub fn codebook_size(&self, total_points: usize) -> usize {
        self.k.unwrap_or_else(|| (total_points / 10).max(2))
    }
}

/// KL(p ‖ r) in nats, with 0·log 0 = 0.
fn kl(p: &[f64], r: &[f64]) -> f64 {
    p.iter()
        .zip(r)
        .filter(|(&a, _)| a > 0.0)
        .map(|(&a, &b)| a * (a / b).ln())
        .sum()
}

/// Frontier points `(exp(-c·KL(p‖r)), exp(-c·KL(q‖r)))` for the mixtures
/// `r = λp + (1-λ)q`, `λ = i / (grid + 1)`, plus the endpoints (0,1) and (1,0),
/// sorted by x.
pub fn divergence_curve(p: &Histogram, q: &Histogram, c: f64, grid: usize) -> Vec<(f64, f64)> {
    assert_eq!(p.bins(), q.bins(), "divergence_curve: histograms differ in bin count");
    assert!(grid >= 2, "divergence_curve: grid must be at least 2");
    let (p, q) = (p.mass(), q.mass());
    let mut points = Vec::with_capacity(grid + 2);
    let mut mix = vec![0.0; p.len()];
    for i in 1..=grid {
        let lambda = i as f64 / (grid + 1) as f64;
        for ((r, &a), &b) in mix.iter_mut().zip(p).zip(q) {
            *r = lambda * a + (1.0 - lambda) * b;
        }
        points.push(((-c * kl(p, &mix)).exp(), (-c * kl(q, &mix)).exp()));
    }
    points.push((0.0, 1.0));
    points.push((1.0, 0.0));
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(b.1.total_cmp(&a.1)));
    points
}

/// Trapezoidal area under an x-sorted curve.
pub fn curve_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

pub fn mauve_from_histograms(p: &Histogram, q: &Histogram, c: f64, grid: usize) -> f64 {
    curve_area(&divergence_curve(p, q, c, grid)).clamp(0.0, 1.0)
}

/// MAUVE of two point sets quantized with a given codebook.
pub fn mauve_with_codebook<P: AsRef<[f64]>>(
    p: &[P],
    q: &[P],
    codebook: &Codebook,
    c: f64,
    grid: usize,
) -> Result<f64> {
    let hp = quantize(p, codebook)?;
    let hq = quantize(q, codebook)?;
    Ok(mauve_from_histograms(&hp, &hq, c, grid))
}

/// Set-level MAUVE between two embedded sets: joint k-means over the union of
/// their non-degenerate sentence vectors, then the frontier area of the two
/// histograms.
pub fn mauve(p: &EmbeddingSet, q: &EmbeddingSet, params: &MauveParams, seed: u64) -> Result<f64> {
    let vp = p.usable_vectors();
    let vq = q.usable_vectors();
    if vp.is_empty() || vq.is_empty() {
        return Err(Error::Invalid(format!(
            "MAUVE between `{}` and `{}`: a set has no usable sentence vectors",
            p.corpus_name, q.corpus_name
        )));
    }
    mauve_points(&vp, &vq, params, seed)
}

pub fn mauve_points<P: AsRef<[f64]>>(p: &[P], q: &[P], params: &MauveParams, seed: u64) -> Result<f64> {
    if p.is_empty() || q.is_empty() {
        return Err(Error::Invalid("MAUVE needs two non-empty sets".into()));
    }
    let total = p.len() + q.len();
    let k = params.codebook_size(total);
    if k > total {
        return Err(Error::Invalid(format!("MAUVE codebook size {k} exceeds {total} points")));
    }
    let mut union: Vec<&[f64]> = p.iter().chain(q).map(AsRef::as_ref).collect();
    union.sort_by(|a, b| lex_cmp(a, b));
    let codebook = kmeans(&union, k, seed, params.max_iters)?;
    mauve_with_codebook(p, q, &codebook, params.c, params.grid)
}
