//! End-to-end runs: corpus preparation, similarity scoring, correlation
//! analysis and report emission.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::{Path, PathBuf};

use log::info;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{
    consistency_count, correlate, CorrMethod, CorrelationReport, PerformanceTable,
};
use crate::corpus::{
    balance_classes, cap_classes, downsample_group, label_histogram, load_corpus_as, write_jsonl,
    Corpus, Format, Split, Task,
};
use crate::embeddings::{load_word_vectors, EmbeddingSet, WordVectorTable};
use crate::error::{Error, Result};
use crate::metrics::protocol::{sample_and_embed, score_sets};
use crate::metrics::MetricKind;

pub mod config;
pub mod heatmap;
pub mod report;

pub use config::{CorpusSpec, RunConfig};
pub use heatmap::emit_heatmap;
pub use report::{Provenance, SimilarityRecord, SimilarityReport};

use report::write_file;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_spec(spec: &CorpusSpec) -> Result<Corpus> {
    load_corpus_as(&spec.path, spec.format, spec.task, spec.split, Some(&spec.name))
}

fn load_table(config: &RunConfig) -> Result<WordVectorTable> {
    let spec = config
        .embeddings
        .as_ref()
        .ok_or_else(|| Error::Config("no embedding file configured".into()))?;
    load_word_vectors(&spec.path, spec.format)
}

/// Score every configured (train, test) pair with every enabled metric.
/// Records are ordered by pair, then by metric.
pub fn compute_similarity(config: &RunConfig) -> Result<SimilarityReport> {
    config.validate()?;
    let metric_config = config.metric_config();
    let table = load_table(config)?;
    let pairs = config.pairs()?;

    let mut needed: Vec<&CorpusSpec> = Vec::new();
    for (train, test) in &pairs {
        for spec in [*train, *test] {
            if !needed.iter().any(|s| s.name == spec.name && s.split == spec.split) {
                needed.push(spec);
            }
        }
    }
    let embedded: HashMap<(String, Split), EmbeddingSet> = needed
        .par_iter()
        .map(|spec| {
            let corpus = load_spec(spec)?;
            let set = sample_and_embed(&table, &corpus, &metric_config)?;
            Ok(((spec.name.clone(), spec.split), set))
        })
        .collect::<Result<_>>()?;

    let mut metrics = config.metrics.clone();
    metrics.sort();
    metrics.dedup();
    let units: Vec<(&CorpusSpec, &CorpusSpec, MetricKind)> = pairs
        .iter()
        .flat_map(|(tr, te)| metrics.iter().map(move |m| (*tr, *te, *m)))
        .collect();
    let records = units
        .par_iter()
        .map(|(train, test, metric)| {
            let a = &embedded[&(train.name.clone(), train.split)];
            let b = &embedded[&(test.name.clone(), test.split)];
            let seed = metric_config.codebook_seed(&train.name, &test.name);
            let score = score_sets(a, b, *metric, &metric_config, seed)?;
            Ok(SimilarityRecord {
                train: train.name.clone(),
                test: test.name.clone(),
                metric: *metric,
                value: score.value,
                excluded: score.excluded,
                seed: config.seed,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SimilarityReport {
        records,
        provenance: Provenance {
            config_hash: config.hash(),
            tool_version: TOOL_VERSION.to_owned(),
        },
    })
}

/// [`compute_similarity`], then write `similarity.csv` and `similarity.json`
/// into the output directory.
pub fn run_similarity(config: &RunConfig) -> Result<SimilarityReport> {
    let report = compute_similarity(config)?;
    ensure_dir(&config.output_dir)?;
    report.write(&config.output_dir)?;
    info!(
        "wrote {} similarity records to {}",
        report.records.len(),
        config.output_dir.display()
    );
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConsistencyRow {
    pub method: CorrMethod,
    pub metric: MetricKind,
    pub count: usize,
    pub of: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationOutput {
    pub threshold: f64,
    pub reports: Vec<CorrelationReport>,
    pub consistency: Vec<ConsistencyRow>,
}

impl CorrelationOutput {
    pub fn report(&self, method: CorrMethod) -> Option<&CorrelationReport> {
        self.reports.iter().find(|r| r.method == method)
    }

    pub fn counts(&self, method: CorrMethod) -> BTreeMap<MetricKind, usize> {
        self.consistency
            .iter()
            .filter(|c| c.method == method)
            .map(|c| (c.metric, c.count))
            .collect()
    }

    pub fn to_csv(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Row<'a> {
            method: CorrMethod,
            train: &'a str,
            metric: MetricKind,
            coefficient: Option<f64>,
            agreement: Option<f64>,
            n: usize,
            include_id: bool,
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.reports {
            for e in &r.entries {
                w.serialize(Row {
                    method: r.method,
                    train: &e.train,
                    metric: e.metric,
                    coefficient: e.coefficient,
                    agreement: e.agreement,
                    n: e.n,
                    include_id: r.include_id,
                })
                .map_err(|e| Error::Invalid(e.to_string()))?;
            }
        }
        let bytes = w.into_inner().map_err(|e| Error::Invalid(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Invalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Invalid(format!("correlation JSON: {e}")))
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        ensure_dir(dir)?;
        write_file(&dir.join("correlation.csv"), &self.to_csv()?)?;
        write_file(&dir.join("correlation.json"), &self.to_json()?)
    }
}

/// Correlate performance with similarity for each method and count, per
/// metric, the train sets whose agreement reaches `threshold`.
pub fn compute_correlation(
    sims: &SimilarityReport,
    perf: &PerformanceTable,
    methods: &[CorrMethod],
    include_id: bool,
    threshold: f64,
) -> Result<CorrelationOutput> {
    if methods.is_empty() {
        return Err(Error::Config("no correlation methods requested".into()));
    }
    let mut reports = Vec::new();
    let mut consistency = Vec::new();
    let unique: BTreeSet<CorrMethod> = methods.iter().copied().collect();
    for method in unique {
        let report = correlate(perf, sims, method, include_id)?;
        let of = report.train_sets().len();
        for (metric, count) in consistency_count(&report, threshold) {
            consistency.push(ConsistencyRow {
                method,
                metric,
                count,
                of,
            });
        }
        reports.push(report);
    }
    Ok(CorrelationOutput {
        threshold,
        reports,
        consistency,
    })
}

/// Load the performance table, correlate, and write `correlation.csv` and
/// `correlation.json` into `out_dir`.
pub fn run_correlation(
    sims: &SimilarityReport,
    performance: &Path,
    config: &config::CorrelationSpec,
    out_dir: &Path,
) -> Result<CorrelationOutput> {
    let perf = PerformanceTable::load(performance)?;
    let output = compute_correlation(sims, &perf, &config.methods, config.include_id, config.threshold)?;
    output.write(out_dir)?;
    Ok(output)
}

/// Write `heatmap_<method>.svg` (and its CSV matrix) for every report.
pub fn emit_heatmaps(output: &CorrelationOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    ensure_dir(out_dir)?;
    let mut paths = Vec::new();
    for report in &output.reports {
        if report.entries.is_empty() {
            continue;
        }
        let path = out_dir.join(format!("heatmap_{}.svg", report.method.slug()));
        emit_heatmap(report, &path)?;
        paths.push(path);
    }
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub task: Task,
    pub split: Split,
    pub file: String,
    pub size: usize,
    pub labels: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
}

/// Balance (for configured tasks) and size-match every (task, split) group,
/// writing `<name>.<split>.jsonl` files and `manifest.json` into the prepare
/// directory.
pub fn prepare_data(config: &RunConfig) -> Result<Manifest> {
    let out_dir = prepare_dir(config);
    ensure_dir(&out_dir)?;
    let mut groups: BTreeMap<(Task, Split), Vec<&CorpusSpec>> = BTreeMap::new();
    for spec in &config.corpora {
        groups.entry((spec.task, spec.split)).or_default().push(spec);
    }
    let mut entries = Vec::new();
    for ((task, split), specs) in groups {
        let corpora = specs.iter().map(|s| load_spec(s)).collect::<Result<Vec<_>>>()?;
        let prepared = if config.prepare.balance_tasks.contains(&task) {
            size_match_balanced(&corpora, config.seed)?
        } else {
            downsample_group(&corpora, config.seed)?
        };
        for corpus in prepared {
            let file = format!("{}.{}.jsonl", corpus.name, split);
            write_jsonl(&corpus, &out_dir.join(&file))?;
            entries.push(ManifestEntry {
                name: corpus.name.clone(),
                task,
                split,
                file,
                size: corpus.len(),
                labels: label_histogram(&corpus),
            });
        }
    }
    entries.sort_by(|a, b| (a.task, a.split, &a.name).cmp(&(b.task, b.split, &b.name)));
    let manifest = Manifest { entries };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Invalid(e.to_string()))?;
    write_file(&out_dir.join("manifest.json"), &json)?;
    Ok(manifest)
}

pub fn prepare_dir(config: &RunConfig) -> PathBuf {
    config
        .prepare
        .output_dir
        .clone()
        .unwrap_or_else(|| config.output_dir.join("prepared"))
}

/// Balance each corpus, then cap every class at the smallest per-class count
/// across the group so the group ends up equal in size and still balanced.
/// Groups whose label sets differ fall back to plain downsampling.
fn size_match_balanced(corpora: &[Corpus], seed: u64) -> Result<Vec<Corpus>> {
    let balanced = corpora
        .iter()
        .map(|c| balance_classes(c, seed))
        .collect::<Result<Vec<_>>>()?;
    let histograms: Vec<_> = balanced.iter().map(label_histogram).collect();
    let same_labels = histograms
        .windows(2)
        .all(|w| w[0].keys().eq(w[1].keys()));
    if !same_labels {
        return downsample_group(&balanced, seed);
    }
    let per_class = histograms
        .iter()
        .filter_map(|h| h.values().copied().min())
        .min()
        .unwrap_or(0);
    balanced
        .iter()
        .map(|c| cap_classes(c, per_class, seed))
        .collect()
}

/// A copy of `config` whose corpora point at the prepared files.
pub fn with_prepared_corpora(config: &RunConfig, manifest: &Manifest) -> RunConfig {
    let dir = prepare_dir(config);
    let mut next = config.clone();
    for spec in &mut next.corpora {
        if let Some(entry) = manifest
            .entries
            .iter()
            .find(|e| e.name == spec.name && e.split == spec.split)
        {
            spec.path = dir.join(&entry.file);
            spec.format = Format::Jsonl;
        }
    }
    next
}

#[derive(Debug, Clone)]
pub struct RunAllOutput {
    pub manifest: Manifest,
    pub similarity: SimilarityReport,
    pub correlation: Option<CorrelationOutput>,
    pub heatmaps: Vec<PathBuf>,
}

/// prepare → similarity → correlation and heatmaps (when a performance table
/// is configured).
pub fn run_all(config: &RunConfig) -> Result<RunAllOutput> {
    config.validate()?;
    let manifest = prepare_data(config)?;
    let prepared = with_prepared_corpora(config, &manifest);
    let similarity = run_similarity(&prepared)?;
    let (correlation, heatmaps) = match &config.performance {
        Some(perf) => {
            let output = run_correlation(&similarity, perf, &config.correlation, &config.output_dir)?;
            let heatmaps = emit_heatmaps(&output, &config.output_dir)?;
            (Some(output), heatmaps)
        }
        None => (None, Vec::new()),
    };
    Ok(RunAllOutput {
        manifest,
        similarity,
        correlation,
        heatmaps,
    })
}
