use serde::{Deserialize, Serialize};

use super::kmeans::Codebook;
use crate::error::{Error, Result};

/// Probability mass over codebook bins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    mass: Vec<f64>,
}

impl Histogram {
    pub fn new(mass: Vec<f64>) -> Result<Self> {
        if mass.is_empty() {
            return Err(Error::Invalid("histogram needs at least one bin".into()));
        }
        if mass.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Invalid("histogram mass must be nonnegative".into()));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Invalid(format!("histogram sums to {total}, not 1")));
        }
        Ok(Histogram { mass })
    }

    /// Normalize nonnegative counts into a histogram.
    pub fn from_counts(counts: &[f64]) -> Result<Self> {
        let total: f64 = counts.iter().sum();
        if !(total > 0.0) {
            return Err(Error::Invalid("histogram counts sum to zero".into()));
        }
        Histogram::new(counts.iter().map(|c| c / total).collect())
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn bins(&self) -> usize {
        self.mass.len()
    }
}

/// Nearest-centroid counts, normalized. Ties go to the lowest centroid index.
pub fn quantize<P: AsRef<[f64]>>(points: &[P], codebook: &Codebook) -> Result<Histogram> {
    if points.is_empty() {
        return Err(Error::Invalid("cannot quantize an empty point set".into()));
    }
    let mut counts = vec![0.0; codebook.k()];
    for p in points {
        let p = p.as_ref();
        if p.len() != codebook.dim() {
            return Err(Error::Invalid(format!(
                "point of dimension {} against codebook of dimension {}",
                p.len(),
                codebook.dim()
            )));
        }
        counts[codebook.nearest(p)] += 1.0;
    }
    Histogram::from_counts(&counts)
}

/// Jensen-Shannon distance with base-2 logarithms, in [0, 1].
pub fn jsd(p: &Histogram, q: &Histogram) -> f64 {
    assert_eq!(p.bins(), q.bins(), "jsd: histograms differ in bin count");
    let mut divergence = 0.0;
    for (&a, &b) in p.mass.iter().zip(&q.mass) {
        let m = 0.5 * (a + b);
        if a > 0.0 {
            divergence += 0.5 * a * (a / m).log2();
        }
        if b > 0.0 {
            divergence += 0.5 * b * (b / m).log2();
        }
    }
    divergence.clamp(0.0, 1.0).sqrt()
}
