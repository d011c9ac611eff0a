//! Similarity report records and their CSV/JSON encodings.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::MetricKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRecord {
    pub train: String,
    pub test: String,
    pub metric: MetricKind,
    pub value: f64,
    /// Pairs or texts left out because they were degenerate.
    pub excluded: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub tool_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub records: Vec<SimilarityRecord>,
    #[serde(default)]
    pub provenance: Provenance,
}

impl SimilarityReport {
    pub fn new(records: Vec<SimilarityRecord>) -> Self {
        SimilarityReport {
            records,
            provenance: Provenance::default(),
        }
    }

    /// Check the one-record-per-triple and metric-range invariants.
    pub fn validate(&self) -> Result<()> {
        let mut seen = std::collections::HashSet::new();
        for r in &self.records {
            if !seen.insert((r.train.as_str(), r.test.as_str(), r.metric)) {
                return Err(Error::Invalid(format!(
                    "duplicate similarity record {} -> {} ({})",
                    r.train, r.test, r.metric
                )));
            }
            let (lo, hi) = r.metric.range();
            if !(r.value >= lo && r.value <= hi) {
                return Err(Error::Invalid(format!(
                    "{} value {} for {} -> {} outside [{lo}, {hi}]",
                    r.metric, r.value, r.train, r.test
                )));
            }
        }
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.records {
            w.serialize(r).map_err(|e| Error::Invalid(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn from_csv_reader<R: std::io::Read>(reader: R) -> Result<Self> {
        let records = csv::Reader::from_reader(reader)
            .deserialize()
            .enumerate()
            .map(|(i, r)| r.map_err(|e| Error::Invalid(format!("similarity row {}: {e}", i + 1))))
            .collect::<Result<Vec<SimilarityRecord>>>()?;
        let report = SimilarityReport::new(records);
        report.validate()?;
        Ok(report)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let report: SimilarityReport =
            serde_json::from_str(text).map_err(|e| Error::Invalid(format!("similarity JSON: {e}")))?;
        report.validate()?;
        Ok(report)
    }

    /// Load from `.json`, or CSV for any other extension.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        if path.extension().is_some_and(|e| e == "json") {
            SimilarityReport::from_json(&text)
        } else {
            SimilarityReport::from_csv_reader(text.as_bytes())
        }
    }

    /// Write `similarity.csv` and `similarity.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        write_file(&dir.join("similarity.csv"), &self.to_csv()?)?;
        write_file(&dir.join("similarity.json"), &self.to_json()?)
    }
}

pub(crate) fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}
