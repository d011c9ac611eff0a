//! Performance tables, ID/OOD performance gaps, and per-training-set
//! correlation between performance and similarity.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::io::Read;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricKind;
use crate::pipeline::report::SimilarityReport;

pub mod stats;

pub use stats::{kendall_tau, pearson, spearman};

/// Agreement threshold for [`consistency_count`]: a metric is consistent for a
/// training set when its orientation-adjusted coefficient is non-negative.
pub const DEFAULT_CONSISTENCY_THRESHOLD: f64 = 0.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Measure {
    #[serde(rename = "accuracy", alias = "Accuracy")]
    Accuracy,
    #[serde(rename = "f1", alias = "F1")]
    F1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerformanceRow {
    pub train: String,
    pub test: String,
    pub score: f64,
    pub measure: Measure,
}

impl PerformanceRow {
    pub fn is_id(&self) -> bool {
        self.train == self.test
    }
}

/// Externally measured model scores per (train, test) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceTable {
    rows: Vec<PerformanceRow>,
}

impl PerformanceTable {
    pub fn new(rows: Vec<PerformanceRow>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        let mut id_rows: BTreeMap<&str, usize> = BTreeMap::new();
        for row in &rows {
            if !(0.0..=1.0).contains(&row.score) {
                return Err(Error::Invalid(format!(
                    "performance {} -> {}: score {} outside [0, 1]",
                    row.train, row.test, row.score
                )));
            }
            if !seen.insert((row.train.as_str(), row.test.as_str())) {
                return Err(Error::Invalid(format!(
                    "duplicate performance row {} -> {}",
                    row.train, row.test
                )));
            }
            let ids = id_rows.entry(row.train.as_str()).or_insert(0);
            if row.is_id() {
                *ids += 1;
            }
        }
        if let Some((train, _)) = id_rows.iter().find(|(_, &n)| n != 1) {
            return Err(Error::Invalid(format!(
                "train set `{train}` has no in-domain row (train = test)"
            )));
        }
        Ok(PerformanceTable { rows })
    }

    pub fn rows(&self) -> &[PerformanceRow] {
        &self.rows
    }

    pub fn train_sets(&self) -> BTreeSet<&str> {
        self.rows.iter().map(|r| r.train.as_str()).collect()
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut csv = csv::Reader::from_reader(reader);
        let rows = csv
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::Invalid(format!("performance row {}: {e}", i + 1))))
            .collect::<Result<Vec<PerformanceRow>>>()?;
        PerformanceTable::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        PerformanceTable::from_csv_reader(file)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.rows {
            w.serialize(row).map_err(|e| Error::Invalid(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub train: String,
    pub id_score: f64,
    /// Best out-of-domain score; `None` when the train set has only its ID row.
    pub max_ood_score: Option<f64>,
    /// Some OOD score is at least the ID score.
    pub is_exception: bool,
    /// Some OOD score strictly exceeds the ID score.
    pub strictly_greater: bool,
    /// The best OOD score equals the ID score.
    pub tie: bool,
}

/// Per training set, whether any out-of-domain score reaches the in-domain
/// score. Rows are ordered by train name.
pub fn id_ood_gap(perf: &PerformanceTable) -> Vec<GapRow> {
    let mut by_train: BTreeMap<&str, (Option<f64>, Option<f64>)> = BTreeMap::new();
    for row in perf.rows() {
        let entry = by_train.entry(row.train.as_str()).or_default();
        if row.is_id() {
            entry.0 = Some(row.score);
        } else {
            entry.1 = Some(entry.1.map_or(row.score, |m: f64| m.max(row.score)));
        }
    }
    by_train
        .into_iter()
        .map(|(train, (id, ood))| {
            // PerformanceTable guarantees exactly one ID row per train set.
            let id_score = id.unwrap_or(f64::NAN);
            GapRow {
                train: train.to_owned(),
                id_score,
                max_ood_score: ood,
                is_exception: ood.is_some_and(|m| m >= id_score),
                strictly_greater: ood.is_some_and(|m| m > id_score),
                tie: ood == Some(id_score),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CorrMethod {
    KendallTau,
    Pearson,
    Spearman,
}

impl CorrMethod {
    pub fn apply(self, xs: &[f64], ys: &[f64]) -> Result<Option<f64>> {
        match self {
            CorrMethod::KendallTau => kendall_tau(xs, ys),
            CorrMethod::Pearson => pearson(xs, ys),
            CorrMethod::Spearman => spearman(xs, ys),
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            CorrMethod::KendallTau => "kendall",
            CorrMethod::Pearson => "pearson",
            CorrMethod::Spearman => "spearman",
        }
    }
}

impl fmt::Display for CorrMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrMethod::KendallTau => "Kendall",
            CorrMethod::Pearson => "Pearson",
            CorrMethod::Spearman => "Spearman",
        })
    }
}

impl FromStr for CorrMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "kendall" | "kendalltau" | "kendall_tau" | "tau" => Ok(CorrMethod::KendallTau),
            "pearson" => Ok(CorrMethod::Pearson),
            "spearman" => Ok(CorrMethod::Spearman),
            other => Err(Error::Config(format!("unknown correlation method `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationEntry {
    pub train: String,
    pub metric: MetricKind,
    /// Raw coefficient between performance and the metric; `None` when undefined.
    pub coefficient: Option<f64>,
    /// Coefficient with distance metrics negated, so higher always means the
    /// metric tracks performance.
    pub agreement: Option<f64>,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub method: CorrMethod,
    pub include_id: bool,
    pub entries: Vec<CorrelationEntry>,
}

impl CorrelationReport {
    pub fn train_sets(&self) -> Vec<&str> {
        let mut seen = Vec::new();
        for e in &self.entries {
            if !seen.contains(&e.train.as_str()) {
                seen.push(e.train.as_str());
            }
        }
        seen
    }

    pub fn metrics(&self) -> Vec<MetricKind> {
        let present: BTreeSet<MetricKind> = self.entries.iter().map(|e| e.metric).collect();
        present.into_iter().collect()
    }

    pub fn get(&self, train: &str, metric: MetricKind) -> Option<&CorrelationEntry> {
        self.entries
            .iter()
            .find(|e| e.train == train && e.metric == metric)
    }
}

/// Correlate performance with every metric of `sims`, one coefficient per
/// (train set, metric), over that train set's test rows. The in-domain row is
/// included unless `include_id` is false.
pub fn correlate(
    perf: &PerformanceTable,
    sims: &SimilarityReport,
    method: CorrMethod,
    include_id: bool,
) -> Result<CorrelationReport> {
    let mut values: HashMap<(&str, &str, MetricKind), f64> = HashMap::new();
    for rec in &sims.records {
        if values
            .insert((rec.train.as_str(), rec.test.as_str(), rec.metric), rec.value)
            .is_some()
        {
            return Err(Error::KeyMismatch(format!(
                "duplicate similarity record {} -> {} ({})",
                rec.train, rec.test, rec.metric
            )));
        }
    }
    let metrics: BTreeSet<MetricKind> = sims.records.iter().map(|r| r.metric).collect();
    let perf_keys: BTreeSet<(&str, &str)> = perf
        .rows()
        .iter()
        .map(|r| (r.train.as_str(), r.test.as_str()))
        .collect();
    if let Some(rec) = sims
        .records
        .iter()
        .find(|r| !perf_keys.contains(&(r.train.as_str(), r.test.as_str())))
    {
        return Err(Error::KeyMismatch(format!(
            "similarity pair {} -> {} has no performance row",
            rec.train, rec.test
        )));
    }

    let mut entries = Vec::new();
    for train in perf.train_sets() {
        let mut rows: Vec<&PerformanceRow> = perf
            .rows()
            .iter()
            .filter(|r| r.train == train && (include_id || !r.is_id()))
            .collect();
        rows.sort_by(|a, b| a.test.cmp(&b.test));
        let scores: Vec<f64> = rows.iter().map(|r| r.score).collect();
        for &metric in &metrics {
            let column = rows
                .iter()
                .map(|r| {
                    values
                        .get(&(r.train.as_str(), r.test.as_str(), metric))
                        .copied()
                        .ok_or_else(|| {
                            Error::KeyMismatch(format!(
                                "no {metric} score for {} -> {}",
                                r.train, r.test
                            ))
                        })
                })
                .collect::<Result<Vec<f64>>>()?;
            let coefficient = if rows.len() < 2 {
                None
            } else {
                method.apply(&scores, &column)?
            };
            entries.push(CorrelationEntry {
                train: train.to_owned(),
                metric,
                coefficient,
                agreement: coefficient.map(|c| c * metric.orientation().sign()),
                n: rows.len(),
            });
        }
    }
    Ok(CorrelationReport {
        method,
        include_id,
        entries,
    })
}

/// Per metric, the number of train sets whose agreement is at least `threshold`.
pub fn consistency_count(report: &CorrelationReport, threshold: f64) -> BTreeMap<MetricKind, usize> {
    let mut counts: BTreeMap<MetricKind, usize> = report.metrics().into_iter().map(|m| (m, 0)).collect();
    for e in &report.entries {
        if e.agreement.is_some_and(|a| a >= threshold) {
            *counts.entry(e.metric).or_insert(0) += 1;
        }
    }
    counts
}
