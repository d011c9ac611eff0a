//! Run configuration, read from TOML or JSON.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::{Format, Split, Task};
use crate::correlation::{CorrMethod, DEFAULT_CONSISTENCY_THRESHOLD};
use crate::embeddings::VectorFormat;
use crate::error::{Error, Result};
use crate::metrics::mauve::MauveParams;
use crate::metrics::protocol::{MetricConfig, MetricModes};
use crate::metrics::MetricKind;
use crate::seed::sha256_hex;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub name: String,
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: Format,
    pub task: Task,
    pub split: Split,
}

fn default_format() -> Format {
    Format::Jsonl
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSpec {
    pub path: PathBuf,
    #[serde(default = "default_vector_format")]
    pub format: VectorFormat,
}

fn default_vector_format() -> VectorFormat {
    VectorFormat::Text
}

/// An ordered (train corpus, test corpus) designation, by name.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairSpec {
    pub train: String,
    pub test: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelationSpec {
    pub methods: Vec<CorrMethod>,
    pub include_id: bool,
    pub threshold: f64,
}

impl Default for CorrelationSpec {
    fn default() -> Self {
        CorrelationSpec {
            methods: vec![CorrMethod::KendallTau, CorrMethod::Pearson],
            include_id: true,
            threshold: DEFAULT_CONSISTENCY_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PrepareSpec {
    /// Where prepared corpora go; defaults to `<output_dir>/prepared`.
    pub output_dir: Option<PathBuf>,
    /// Tasks whose corpora are class-balanced before size matching.
    pub balance_tasks: Vec<Task>,
}

impl Default for PrepareSpec {
    fn default() -> Self {
        PrepareSpec {
            output_dir: None,
            balance_tasks: vec![Task::Sentiment, Task::Nli],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub corpora: Vec<CorpusSpec>,
    pub embeddings: Option<EmbeddingSpec>,
    #[serde(default = "default_sample_k")]
    pub sample_k: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_metrics")]
    pub metrics: Vec<MetricKind>,
    #[serde(default = "default_jsd_bins")]
    pub jsd_bins: usize,
    #[serde(default)]
    pub mauve: MauveParams,
    #[serde(default)]
    pub modes: MetricModes,
    /// Explicit pairs; when empty every train-split corpus is paired with every
    /// test-split corpus of the same task.
    #[serde(default)]
    pub pairs: Vec<PairSpec>,
    #[serde(default)]
    pub performance: Option<PathBuf>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub correlation: CorrelationSpec,
    #[serde(default)]
    pub prepare: PrepareSpec,
}

fn default_sample_k() -> usize {
    20
}

fn default_metrics() -> Vec<MetricKind> {
    MetricKind::ALL.to_vec()
}

fn default_jsd_bins() -> usize {
    8
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    /// Parse TOML or JSON (by extension, falling back to content sniffing) and
    /// resolve relative paths against the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let is_json = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => true,
            Some("toml") => false,
            _ => text.trim_start().starts_with('{'),
        };
        let mut config: RunConfig = if is_json {
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        };
        if let Some(base) = path.parent() {
            config.resolve_paths(base);
        }
        Ok(config)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for c in &mut self.corpora {
            fix(&mut c.path);
        }
        if let Some(e) = &mut self.embeddings {
            fix(&mut e.path);
        }
        if let Some(p) = &mut self.performance {
            fix(p);
        }
        fix(&mut self.output_dir);
        if let Some(p) = &mut self.prepare.output_dir {
            fix(p);
        }
    }

    pub fn metric_config(&self) -> MetricConfig {
        MetricConfig {
            sample_k: self.sample_k,
            seed: self.seed,
            jsd_bins: self.jsd_bins,
            mauve: self.mauve.clone(),
            modes: self.modes.clone(),
        }
    }

    /// Structural checks plus existence of every referenced input file.
    pub fn validate(&self) -> Result<()> {
        self.metric_config().validate()?;
        if self.metrics.is_empty() {
            return Err(Error::Config("at least one metric is required".into()));
        }
        if self.corpora.is_empty() {
            return Err(Error::Config("no corpora configured".into()));
        }
        let mut keys = BTreeSet::new();
        for c in &self.corpora {
            if !keys.insert((c.name.as_str(), c.split)) {
                return Err(Error::Config(format!(
                    "corpus `{}` ({}) is listed twice",
                    c.name, c.split
                )));
            }
            if !c.path.is_file() {
                return Err(Error::Config(format!(
                    "corpus `{}`: {} does not exist",
                    c.name,
                    c.path.display()
                )));
            }
        }
        if let Some(e) = &self.embeddings {
            if !e.path.is_file() {
                return Err(Error::Config(format!(
                    "embedding file {} does not exist",
                    e.path.display()
                )));
            }
        }
        if let Some(p) = &self.performance {
            if !p.is_file() {
                return Err(Error::Config(format!(
                    "performance table {} does not exist",
                    p.display()
                )));
            }
        }
        self.pairs()?;
        Ok(())
    }

    pub fn corpus(&self, name: &str, split: Split) -> Option<&CorpusSpec> {
        self.corpora.iter().find(|c| c.name == name && c.split == split)
    }

    /// (train, test) corpus designations in evaluation order.
    pub fn pairs(&self) -> Result<Vec<(&CorpusSpec, &CorpusSpec)>> {
        if self.pairs.is_empty() {
            let trains = self.corpora.iter().filter(|c| c.split == Split::Train);
            let pairs: Vec<_> = trains
                .flat_map(|tr| {
                    self.corpora
                        .iter()
                        .filter(move |te| te.split == Split::Test && te.task == tr.task)
                        .map(move |te| (tr, te))
                })
                .collect();
            return Ok(pairs);
        }
        self.pairs
            .iter()
            .map(|p| {
                let train = self.corpus(&p.train, Split::Train).ok_or_else(|| {
                    Error::Config(format!("pair names unknown train corpus `{}`", p.train))
                })?;
                let test = self
                    .corpus(&p.test, Split::Test)
                    .or_else(|| self.corpus(&p.test, Split::Validation))
                    .ok_or_else(|| {
                        Error::Config(format!("pair names unknown test corpus `{}`", p.test))
                    })?;
                if train.task != test.task {
                    return Err(Error::Config(format!(
                        "pair {} -> {} mixes tasks {} and {}",
                        train.name, test.name, train.task, test.task
                    )));
                }
                Ok((train, test))
            })
            .collect()
    }

    /// SHA-256 of the canonical JSON encoding of this configuration.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).unwrap_or_default().as_bytes())
    }
}
