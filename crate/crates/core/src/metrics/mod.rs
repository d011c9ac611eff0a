//! Similarity and distance metrics between embedded texts and embedded sets.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub mod cosine;
pub mod histogram;
pub mod kmeans;
pub mod mauve;
pub mod protocol;
pub mod transport;

pub use cosine::{cosine, Cosine};
pub use histogram::{jsd, quantize, Histogram};
pub use kmeans::{kmeans, Codebook, DEFAULT_MAX_ITERS};
pub use mauve::{curve_area, divergence_curve, mauve, mauve_from_histograms, MauveParams};
pub use protocol::{corpus_similarity, pairwise_mean, score_sets, set_level, MetricConfig};
pub use transport::{wasserstein, wasserstein_points};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MetricKind {
    Cosine,
    Mauve,
    Wstn,
    #[serde(rename = "JSD", alias = "Jsd")]
    Jsd,
}

impl MetricKind {
    pub const ALL: [MetricKind; 4] = [
        MetricKind::Cosine,
        MetricKind::Mauve,
        MetricKind::Wstn,
        MetricKind::Jsd,
    ];

    pub fn orientation(self) -> Orientation {
        match self {
            MetricKind::Cosine | MetricKind::Mauve => Orientation::SimilarityHigherCloser,
            MetricKind::Wstn | MetricKind::Jsd => Orientation::DistanceLowerCloser,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::Cosine => "Cosine",
            MetricKind::Mauve => "Mauve",
            MetricKind::Wstn => "Wstn",
            MetricKind::Jsd => "JSD",
        }
    }

    /// Closed range every score of this metric lies in.
    pub fn range(self) -> (f64, f64) {
        match self {
            MetricKind::Cosine => (-1.0, 1.0),
            MetricKind::Mauve | MetricKind::Jsd => (0.0, 1.0),
            MetricKind::Wstn => (0.0, f64::INFINITY),
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cosine" | "cos" => Ok(MetricKind::Cosine),
            "mauve" => Ok(MetricKind::Mauve),
            "wstn" | "wasserstein" => Ok(MetricKind::Wstn),
            "jsd" | "jensen-shannon" => Ok(MetricKind::Jsd),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Orientation {
    SimilarityHigherCloser,
    DistanceLowerCloser,
}

impl Orientation {
    /// +1 for similarities, -1 for distances.
    pub fn sign(self) -> f64 {
        match self {
            Orientation::SimilarityHigherCloser => 1.0,
            Orientation::DistanceLowerCloser => -1.0,
        }
    }
}

/// How a metric consumes the two sampled sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricMode {
    /// Mean over all cross pairs of individual texts.
    Pairwise,
    /// One comparison between the two sets as wholes.
    SetLevel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricScore {
    pub metric: MetricKind,
    pub value: f64,
    pub orientation: Orientation,
    /// Comparisons that produced a value.
    pub evaluated: usize,
    /// Comparisons skipped because an input was degenerate.
    pub excluded: usize,
}

impl MetricScore {
    pub(crate) fn new(metric: MetricKind, value: f64, evaluated: usize, excluded: usize) -> Self {
        let (lo, hi) = metric.range();
        MetricScore {
            metric,
            value: value.clamp(lo, hi),
            orientation: metric.orientation(),
            evaluated,
            excluded,
        }
    }
}

/// Squared Euclidean distance.
pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

pub(crate) fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    sq_dist(a, b).sqrt()
}

/// Lexicographic order on vectors, used to make set-level computations
/// independent of argument order.
pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| a.len().cmp(&b.len()))
}
