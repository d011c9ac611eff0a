//! Task-typed text corpora: loading, validation and seeded size control.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::seed::derive_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Task {
    Sentiment,
    #[serde(rename = "MCQ", alias = "Mcq")]
    Mcq,
    #[serde(rename = "ExtractiveQA", alias = "ExtractiveQa")]
    ExtractiveQa,
    #[serde(rename = "NLI", alias = "Nli")]
    Nli,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Sentiment => "Sentiment",
            Task::Mcq => "MCQ",
            Task::ExtractiveQa => "ExtractiveQA",
            Task::Nli => "NLI",
        })
    }
}

impl FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sentiment" => Ok(Task::Sentiment),
            "mcq" => Ok(Task::Mcq),
            "extractiveqa" | "extractive_qa" | "qa" => Ok(Task::ExtractiveQa),
            "nli" => Ok(Task::Nli),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    #[serde(alias = "Train")]
    Train,
    #[serde(alias = "Validation")]
    Validation,
    #[serde(alias = "Test")]
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        })
    }
}

impl FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "train" => Ok(Split::Train),
            "validation" | "val" | "dev" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Format {
    #[serde(rename = "jsonl", alias = "JSONL")]
    Jsonl,
    #[serde(rename = "csv", alias = "CSV")]
    Csv,
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            other => Err(Error::Config(format!("unknown corpus format `{other}`"))),
        }
    }
}

/// One task instance. Which optional fields are populated depends on the task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub id: String,
    pub task: Task,
    /// Review, question or premise.
    pub text_primary: String,
    /// Context or hypothesis.
    pub text_secondary: Option<String>,
    /// MCQ answer pool.
    pub choices: Option<Vec<String>>,
    pub label: Option<String>,
}

impl Sample {
    pub fn sentiment(id: impl Into<String>, text: impl Into<String>, label: impl Into<String>) -> Self {
        Sample {
            id: id.into(),
            task: Task::Sentiment,
            text_primary: text.into(),
            text_secondary: None,
            choices: None,
            label: Some(label.into()),
        }
    }

    pub fn nli(
        id: impl Into<String>,
        premise: impl Into<String>,
        hypothesis: impl Into<String>,
        label: impl Into<String>,
    ) -> Self {
        Sample {
            id: id.into(),
            task: Task::Nli,
            text_primary: premise.into(),
            text_secondary: Some(hypothesis.into()),
            choices: None,
            label: Some(label.into()),
        }
    }

    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.text_primary.trim().is_empty() {
            return Err(format!("sample `{}`: primary text is empty", self.id));
        }
        if self.choices.is_some() != (self.task == Task::Mcq) {
            return Err(format!(
                "sample `{}`: choices must be present exactly for MCQ samples",
                self.id
            ));
        }
        match self.task {
            Task::ExtractiveQa | Task::Nli if self.text_secondary.is_none() => Err(format!(
                "sample `{}`: {} samples need a secondary text",
                self.id, self.task
            )),
            Task::Sentiment if self.text_secondary.is_some() => Err(format!(
                "sample `{}`: sentiment samples carry a single text",
                self.id
            )),
            _ => Ok(()),
        }
    }
}

/// Single-string rendering used as the embedding input: primary text, then
/// secondary text, then choices, joined by one space.
pub fn flatten(sample: &Sample) -> String {
    let mut parts: Vec<&str> = vec![sample.text_primary.as_str()];
    if let Some(secondary) = &sample.text_secondary {
        parts.push(secondary);
    }
    if let Some(choices) = &sample.choices {
        parts.extend(choices.iter().map(String::as_str));
    }
    parts.join(" ")
}

/// A named, task-typed, non-empty collection of samples with unique ids.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corpus {
    pub name: String,
    pub task: Task,
    pub split: Split,
    samples: Vec<Sample>,
}

impl Corpus {
    pub fn new(name: impl Into<String>, task: Task, split: Split, samples: Vec<Sample>) -> Result<Self> {
        let name = name.into();
        if samples.is_empty() {
            return Err(Error::Corpus(format!("corpus `{name}` is empty")));
        }
        let mut seen = HashSet::with_capacity(samples.len());
        for sample in &samples {
            if sample.task != task {
                return Err(Error::Corpus(format!(
                    "corpus `{name}` is {task} but sample `{}` is {}",
                    sample.id, sample.task
                )));
            }
            sample.validate().map_err(Error::Corpus)?;
            if !seen.insert(sample.id.as_str()) {
                return Err(Error::Corpus(format!(
                    "corpus `{name}` has duplicate sample id `{}`",
                    sample.id
                )));
            }
        }
        Ok(Corpus {
            name,
            task,
            split,
            samples,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }

    fn with_indices(&self, mut keep: Vec<usize>) -> Corpus {
        keep.sort_unstable();
        Corpus {
            name: self.name.clone(),
            task: self.task,
            split: self.split,
            samples: keep.into_iter().map(|i| self.samples[i].clone()).collect(),
        }
    }
}

fn rng_for(seed: u64, name: &str, role: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(seed, &[name, role]))
}

/// Uniform sample of exactly `k` samples without replacement. The result keeps
/// the corpus order of the chosen samples.
pub fn sample_k(corpus: &Corpus, k: usize, seed: u64) -> Result<Corpus> {
    if k == 0 {
        return Err(Error::Invalid("sample size k must be positive".into()));
    }
    if k > corpus.len() {
        return Err(Error::Invalid(format!(
            "cannot sample {k} instances from `{}` ({} samples)",
            corpus.name,
            corpus.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = index::sample(&mut rng, corpus.len(), k).into_vec();
    Ok(corpus.with_indices(picked))
}

/// Downsample every corpus to the size of the smallest one. Corpora already at
/// the minimum size are returned unchanged.
pub fn downsample_group(corpora: &[Corpus], seed: u64) -> Result<Vec<Corpus>> {
    let first = corpora
        .first()
        .ok_or_else(|| Error::Invalid("downsample_group needs at least one corpus".into()))?;
    if let Some(odd) = corpora
        .iter()
        .find(|c| c.task != first.task || c.split != first.split)
    {
        return Err(Error::Invalid(format!(
            "corpus `{}` ({} {}) does not match group role ({} {})",
            odd.name, odd.task, odd.split, first.task, first.split
        )));
    }
    let target = corpora.iter().map(Corpus::len).min().unwrap_or(0);
    corpora
        .iter()
        .map(|c| {
            if c.len() == target {
                Ok(c.clone())
            } else {
                let mut rng = rng_for(seed, &c.name, "downsample");
                Ok(c.with_indices(index::sample(&mut rng, c.len(), target).into_vec()))
            }
        })
        .collect()
}

/// Remove samples from over-represented classes until every label occurs as
/// often as the rarest one.
pub fn balance_classes(corpus: &Corpus, seed: u64) -> Result<Corpus> {
    let by_label = group_by_label(corpus)?;
    let n_min = by_label.values().map(Vec::len).min().unwrap_or(0);
    Ok(cap_groups(corpus, &by_label, n_min, seed))
}

/// Keep at most `per_class` samples of every label, removing uniformly at
/// random within larger classes.
pub fn cap_classes(corpus: &Corpus, per_class: usize, seed: u64) -> Result<Corpus> {
    let by_label = group_by_label(corpus)?;
    Ok(cap_groups(corpus, &by_label, per_class, seed))
}

fn group_by_label(corpus: &Corpus) -> Result<BTreeMap<&str, Vec<usize>>> {
    let mut by_label: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, sample) in corpus.samples.iter().enumerate() {
        let label = sample.label.as_deref().ok_or_else(|| {
            Error::Invalid(format!(
                "cannot balance `{}`: sample `{}` has no label",
                corpus.name, sample.id
            ))
        })?;
        by_label.entry(label).or_default().push(i);
    }
    Ok(by_label)
}

fn cap_groups(corpus: &Corpus, by_label: &BTreeMap<&str, Vec<usize>>, cap: usize, seed: u64) -> Corpus {
    let mut rng = rng_for(seed, &corpus.name, "balance");
    let mut keep = Vec::with_capacity(cap * by_label.len());
    for members in by_label.values() {
        if members.len() <= cap {
            keep.extend_from_slice(members);
        } else {
            keep.extend(
                index::sample(&mut rng, members.len(), cap)
                    .into_iter()
                    .map(|j| members[j]),
            );
        }
    }
    corpus.with_indices(keep)
}

pub fn label_histogram(corpus: &Corpus) -> BTreeMap<String, usize> {
    let mut hist = BTreeMap::new();
    for sample in corpus.samples() {
        if let Some(label) = &sample.label {
            *hist.entry(label.clone()).or_insert(0) += 1;
        }
    }
    hist
}

/// Load and validate a corpus. Missing ids become the zero-based record index.
pub fn load_corpus(path: &Path, format: Format, task: Task) -> Result<Corpus> {
    load_corpus_as(path, format, task, Split::Test, None)
}

/// [`load_corpus`] with an explicit split tag and corpus name (defaults to the
/// file stem).
pub fn load_corpus_as(
    path: &Path,
    format: Format,
    task: Task,
    split: Split,
    name: Option<&str>,
) -> Result<Corpus> {
    let samples = match format {
        Format::Jsonl => read_jsonl(path, task)?,
        Format::Csv => read_csv(path, task)?,
    };
    if samples.is_empty() {
        return Err(Error::EmptyFile(path.to_path_buf()));
    }
    let name = name.map(str::to_owned).unwrap_or_else(|| {
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "corpus".to_owned())
    });
    Corpus::new(name, task, split, samples)
}

fn scalar_string(value: &Value) -> Option<String> {
    match value {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        Value::Bool(b) => Some(b.to_string()),
        _ => None,
    }
}

struct RecordCtx<'a> {
    path: &'a Path,
    line: usize,
    task: Task,
}

impl RecordCtx<'_> {
    fn missing(&self, field: &'static str) -> Error {
        Error::MissingField {
            path: self.path.to_path_buf(),
            line: self.line,
            field,
            task: self.task.to_string(),
        }
    }

    fn bad(&self, message: String) -> Error {
        Error::Record {
            path: self.path.to_path_buf(),
            line: self.line,
            message,
        }
    }

    fn required(&self, obj: &Map<String, Value>, field: &'static str) -> Result<String> {
        match obj.get(field) {
            None | Some(Value::Null) => Err(self.missing(field)),
            Some(v) => scalar_string(v)
                .ok_or_else(|| self.bad(format!("field `{field}` must be a string"))),
        }
    }

    fn optional(&self, obj: &Map<String, Value>, field: &'static str) -> Result<Option<String>> {
        match obj.get(field) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => scalar_string(v)
                .map(Some)
                .ok_or_else(|| self.bad(format!("field `{field}` must be a string"))),
        }
    }
}

fn sample_from_object(ctx: &RecordCtx<'_>, obj: &Map<String, Value>, index: usize) -> Result<Sample> {
    let id = ctx.optional(obj, "id")?.unwrap_or_else(|| index.to_string());
    let sample = match ctx.task {
        Task::Sentiment => Sample {
            id,
            task: ctx.task,
            text_primary: ctx.required(obj, "text")?,
            text_secondary: None,
            choices: None,
            label: Some(ctx.required(obj, "label")?),
        },
        Task::Nli => Sample {
            id,
            task: ctx.task,
            text_primary: ctx.required(obj, "premise")?,
            text_secondary: Some(ctx.required(obj, "hypothesis")?),
            choices: None,
            label: Some(ctx.required(obj, "label")?),
        },
        Task::Mcq => {
            let choices = match obj.get("choices") {
                Some(Value::Array(items)) => items
                    .iter()
                    .map(|v| {
                        scalar_string(v)
                            .ok_or_else(|| ctx.bad("`choices` entries must be strings".into()))
                    })
                    .collect::<Result<Vec<_>>>()?,
                None | Some(Value::Null) => return Err(ctx.missing("choices")),
                Some(_) => return Err(ctx.bad("`choices` must be an array".into())),
            };
            Sample {
                id,
                task: ctx.task,
                text_primary: ctx.required(obj, "question")?,
                text_secondary: ctx.optional(obj, "context")?,
                choices: Some(choices),
                label: Some(ctx.required(obj, "label")?),
            }
        }
        Task::ExtractiveQa => Sample {
            id,
            task: ctx.task,
            text_primary: ctx.required(obj, "question")?,
            text_secondary: Some(ctx.required(obj, "context")?),
            choices: None,
            label: ctx.optional(obj, "answer")?,
        },
    };
    sample.validate().map_err(|m| ctx.bad(m))?;
    Ok(sample)
}

fn read_jsonl(path: &Path, task: Task) -> Result<Vec<Sample>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut samples = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ctx = RecordCtx {
            path,
            line: lineno + 1,
            task,
        };
        let value: Value =
            serde_json::from_str(&line).map_err(|e| ctx.bad(format!("malformed JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| ctx.bad("record is not a JSON object".into()))?;
        samples.push(sample_from_object(&ctx, obj, samples.len())?);
    }
    Ok(samples)
}

fn read_csv(path: &Path, task: Task) -> Result<Vec<Sample>> {
    if task != Task::Sentiment {
        return Err(Error::Config(format!(
            "CSV input is only supported for flat text,label corpora, not {task}"
        )));
    }
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| headers.iter().position(|h| h.trim() == name);
    let id_col = column("id");
    let (text_col, label_col) = match (column("text"), column("label")) {
        (Some(t), Some(l)) => (t, l),
        (None, _) => return Err(RecordCtx { path, line: 1, task }.missing("text")),
        (_, None) => return Err(RecordCtx { path, line: 1, task }.missing("label")),
    };
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let ctx = RecordCtx { path, line, task };
        let field = |col: usize, name: &'static str| {
            record
                .get(col)
                .map(str::to_owned)
                .ok_or_else(|| ctx.missing(name))
        };
        let id = match id_col.and_then(|c| record.get(c)) {
            Some(id) if !id.is_empty() => id.to_owned(),
            _ => samples.len().to_string(),
        };
        let sample = Sample::sentiment(id, field(text_col, "text")?, field(label_col, "label")?);
        sample.validate().map_err(|m| ctx.bad(m))?;
        samples.push(sample);
    }
    Ok(samples)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map_or(0, |p| p.line() as usize);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        kind => Error::Record {
            path: path.to_path_buf(),
            line,
            message: format!("{kind:?}"),
        },
    }
}

/// JSON object for one sample in the canonical JSONL schema of its task.
pub fn sample_to_json(sample: &Sample) -> Value {
    let mut obj = Map::new();
    obj.insert("id".into(), Value::String(sample.id.clone()));
    let text = |s: &str| Value::String(s.to_owned());
    match sample.task {
        Task::Sentiment => {
            obj.insert("text".into(), text(&sample.text_primary));
        }
        Task::Nli => {
            obj.insert("premise".into(), text(&sample.text_primary));
            if let Some(h) = &sample.text_secondary {
                obj.insert("hypothesis".into(), text(h));
            }
        }
        Task::Mcq | Task::ExtractiveQa => {
            obj.insert("question".into(), text(&sample.text_primary));
            if let Some(c) = &sample.text_secondary {
                obj.insert("context".into(), text(c));
            }
            if let Some(choices) = &sample.choices {
                obj.insert(
                    "choices".into(),
                    Value::Array(choices.iter().map(|c| text(c)).collect()),
                );
            }
        }
    }
    if let Some(label) = &sample.label {
        let key = if sample.task == Task::ExtractiveQa {
            "answer"
        } else {
            "label"
        };
        obj.insert(key.into(), text(label));
    }
    Value::Object(obj)
}

/// Write a corpus as canonical JSONL; [`load_corpus`] reads it back unchanged.
pub fn write_jsonl(corpus: &Corpus, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for sample in corpus.samples() {
        let line = serde_json::to_string(&sample_to_json(sample))
            .map_err(|e| Error::Invalid(e.to_string()))?;
        writeln!(out, "{line}").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}
