//! The sampling protocol: draw `k` texts from each corpus, embed them, and
//! score the two sets either as the mean over all `k × k` cross pairs or as a
//! single set-level comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cosine::cosine;
use super::histogram::{jsd, quantize, Histogram};
use super::kmeans::kmeans;
use super::mauve::{mauve, MauveParams};
use super::transport::{wasserstein, wasserstein_points};
use super::{lex_cmp, MetricKind, MetricMode, MetricScore};
use crate::corpus::{sample_k, Corpus};
use crate::embeddings::{embed_set, EmbeddingSet, WordVectorTable};
use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricModes {
    pub cosine: MetricMode,
    pub mauve: MetricMode,
    pub wstn: MetricMode,
    pub jsd: MetricMode,
}

impl Default for MetricModes {
    fn default() -> Self {
        MetricModes {
            cosine: MetricMode::Pairwise,
            mauve: MetricMode::SetLevel,
            wstn: MetricMode::Pairwise,
            jsd: MetricMode::Pairwise,
        }
    }
}

impl MetricModes {
    pub fn get(&self, metric: MetricKind) -> MetricMode {
        match metric {
            MetricKind::Cosine => self.cosine,
            MetricKind::Mauve => self.mauve,
            MetricKind::Wstn => self.wstn,
            MetricKind::Jsd => self.jsd,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Texts drawn from each corpus.
    pub sample_k: usize,
    pub seed: u64,
    /// Codebook size for JSD histograms.
    pub jsd_bins: usize,
    pub mauve: MauveParams,
    pub modes: MetricModes,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            sample_k: 20,
            seed: 0,
            jsd_bins: 8,
            mauve: MauveParams::default(),
            modes: MetricModes::default(),
        }
    }
}

impl MetricConfig {
    pub fn validate(&self) -> Result<()> {
        if self.sample_k < 2 {
            return Err(Error::Config("sample_k must be at least 2".into()));
        }
        if self.jsd_bins == 0 {
            return Err(Error::Config("jsd_bins must be positive".into()));
        }
        if self.mauve.grid < 2 {
            return Err(Error::Config("mauve grid must be at least 2".into()));
        }
        if !(self.mauve.c > 0.0) {
            return Err(Error::Config("mauve c must be positive".into()));
        }
        if self.modes.mauve == MetricMode::Pairwise {
            return Err(Error::Config(
                "MAUVE is only defined at set level; pairwise mode is not supported".into(),
            ));
        }
        Ok(())
    }

    /// Seed of the `sample_k` draw for a corpus. Depends only on the corpus
    /// identity, so a corpus contributes the same draw to every pair.
    pub fn draw_seed(&self, corpus: &Corpus) -> u64 {
        derive_seed(self.seed, &[&corpus.name, &corpus.split.to_string(), "sample"])
    }

    /// Seed for codebooks fit while scoring a (train, test) pair.
    pub fn codebook_seed(&self, train: &str, test: &str) -> u64 {
        derive_seed(self.seed, &[train, test, "codebook"])
    }
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> (f64, usize, usize) {
    let (mut sum, mut evaluated, mut excluded) = (0.0, 0, 0);
    for v in values {
        match v {
            Some(v) => {
                sum += v;
                evaluated += 1;
            }
            None => excluded += 1,
        }
    }
    (sum / evaluated as f64, evaluated, excluded)
}

/// Evaluate `f` on every cross pair in row-major order. Rows run in parallel;
/// the reduction order is fixed.
fn cross_pairs<F>(n: usize, m: usize, f: F) -> Vec<Option<f64>>
where
    F: Fn(usize, usize) -> Option<f64> + Sync,
{
    (0..n)
        .into_par_iter()
        .map(|i| (0..m).map(|j| f(i, j)).collect::<Vec<_>>())
        .collect::<Vec<_>>()
        .into_iter()
        .flatten()
        .collect()
}

/// Mean of the metric over all `|A| × |B|` cross pairs. Pairs with a
/// degenerate member are excluded and counted.
pub fn pairwise_mean(
    a: &EmbeddingSet,
    b: &EmbeddingSet,
    metric: MetricKind,
    config: &MetricConfig,
    seed: u64,
) -> Result<MetricScore> {
    let values = match metric {
        MetricKind::Cosine => cross_pairs(a.len(), b.len(), |i, j| {
            let (u, v) = (&a.sentence_vectors[i], &b.sentence_vectors[j]);
            if u.degenerate || v.degenerate {
                return None;
            }
            let c = cosine(&u.vector, &v.vector);
            (!c.degenerate).then_some(c.value)
        }),
        MetricKind::Wstn => cross_pairs(a.len(), b.len(), |i, j| wasserstein(&a.clouds[i], &b.clouds[j])),
        MetricKind::Jsd => {
            let (ha, hb) = token_histograms(a, b, config.jsd_bins, config.mauve.max_iters, seed)?;
            cross_pairs(a.len(), b.len(), |i, j| match (&ha[i], &hb[j]) {
                (Some(p), Some(q)) => Some(jsd(p, q)),
                _ => None,
            })
        }
        MetricKind::Mauve => {
            return Err(Error::Config(
                "MAUVE is only defined at set level; pairwise mode is not supported".into(),
            ))
        }
    };
    let (mean, evaluated, excluded) = mean_of(values.into_iter());
    if evaluated == 0 {
        return Err(Error::Invalid(format!(
            "{metric} between `{}` and `{}`: every pair is degenerate",
            a.corpus_name, b.corpus_name
        )));
    }
    Ok(MetricScore::new(metric, mean, evaluated, excluded))
}

/// Per-text histograms of token clouds under one codebook fit on the union of
/// all token vectors of both sets. Degenerate clouds map to `None`.
fn token_histograms(
    a: &EmbeddingSet,
    b: &EmbeddingSet,
    bins: usize,
    max_iters: usize,
    seed: u64,
) -> Result<(Vec<Option<Histogram>>, Vec<Option<Histogram>>)> {
    let mut union: Vec<&[f64]> = a
        .clouds
        .iter()
        .chain(&b.clouds)
        .flat_map(|c| c.points.iter().map(Vec::as_slice))
        .collect();
    if union.is_empty() {
        return Err(Error::Invalid(format!(
            "JSD between `{}` and `{}`: no in-vocabulary tokens",
            a.corpus_name, b.corpus_name
        )));
    }
    union.sort_by(|x, y| lex_cmp(x, y));
    let codebook = kmeans(&union, bins.min(union.len()), seed, max_iters)?;
    let hist = |set: &EmbeddingSet| -> Result<Vec<Option<Histogram>>> {
        set.clouds
            .iter()
            .map(|c| {
                if c.is_degenerate() {
                    Ok(None)
                } else {
                    quantize(&c.points, &codebook).map(Some)
                }
            })
            .collect()
    };
    Ok((hist(a)?, hist(b)?))
}

fn mean_vector(vectors: &[&[f64]]) -> Vec<f64> {
    let mut mean = vec![0.0; vectors[0].len()];
    for v in vectors {
        for (m, x) in mean.iter_mut().zip(v.iter()) {
            *m += x;
        }
    }
    let n = vectors.len() as f64;
    mean.iter_mut().for_each(|m| *m /= n);
    mean
}

/// One comparison between the two sets as wholes, on their non-degenerate
/// sentence vectors.
pub fn set_level(
    a: &EmbeddingSet,
    b: &EmbeddingSet,
    metric: MetricKind,
    config: &MetricConfig,
    seed: u64,
) -> Result<MetricScore> {
    let va = a.usable_vectors();
    let vb = b.usable_vectors();
    let excluded = a.degenerate_count() + b.degenerate_count();
    let empty = || {
        Error::Invalid(format!(
            "{metric} between `{}` and `{}`: a set has no usable sentence vectors",
            a.corpus_name, b.corpus_name
        ))
    };
    if va.is_empty() || vb.is_empty() {
        return Err(empty());
    }
    let value = match metric {
        MetricKind::Cosine => {
            let c = cosine(&mean_vector(&va), &mean_vector(&vb));
            if c.degenerate {
                return Err(empty());
            }
            c.value
        }
        MetricKind::Wstn => wasserstein_points(&va, &vb).ok_or_else(empty)?,
        MetricKind::Jsd => {
            let mut union: Vec<&[f64]> = va.iter().chain(&vb).copied().collect();
            union.sort_by(|x, y| lex_cmp(x, y));
            let codebook = kmeans(&union, config.jsd_bins.min(union.len()), seed, config.mauve.max_iters)?;
            jsd(&quantize(&va, &codebook)?, &quantize(&vb, &codebook)?)
        }
        MetricKind::Mauve => mauve(a, b, &config.mauve, seed)?,
    };
    Ok(MetricScore::new(metric, value, 1, excluded))
}

/// Dispatch on the configured mode of `metric`.
pub fn score_sets(
    a: &EmbeddingSet,
    b: &EmbeddingSet,
    metric: MetricKind,
    config: &MetricConfig,
    seed: u64,
) -> Result<MetricScore> {
    match config.modes.get(metric) {
        MetricMode::Pairwise => pairwise_mean(a, b, metric, config, seed),
        MetricMode::SetLevel => set_level(a, b, metric, config, seed),
    }
}

/// Draw `config.sample_k` texts from the corpus with its derived seed and embed them.
pub fn sample_and_embed(table: &WordVectorTable, corpus: &Corpus, config: &MetricConfig) -> Result<EmbeddingSet> {
    let drawn = sample_k(corpus, config.sample_k, config.draw_seed(corpus))?;
    Ok(embed_set(table, &drawn))
}

/// Similarity of a test corpus to a training corpus under the sampling protocol.
pub fn corpus_similarity(
    table: &WordVectorTable,
    train: &Corpus,
    test: &Corpus,
    metric: MetricKind,
    config: &MetricConfig,
) -> Result<MetricScore> {
    config.validate()?;
    let a = sample_and_embed(table, train, config)?;
    let b = sample_and_embed(table, test, config)?;
    score_sets(&a, &b, metric, config, config.codebook_seed(&train.name, &test.name))
}
