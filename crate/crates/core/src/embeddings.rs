//! Static word-vector tables and the text → vector transforms built on them.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::corpus::{flatten, Corpus};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VectorFormat {
    Text,
    Binary,
}

impl FromStr for VectorFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "text" | "txt" => Ok(VectorFormat::Text),
            "binary" | "bin" => Ok(VectorFormat::Binary),
            other => Err(Error::Config(format!("unknown vector format `{other}`"))),
        }
    }
}

/// Token → vector lookup with a fixed dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct WordVectorTable {
    dim: usize,
    tokens: Vec<String>,
    index: HashMap<String, usize>,
    data: Vec<f64>,
    source_path: PathBuf,
    duplicates: usize,
}

impl WordVectorTable {
    /// Build a table from in-memory entries. Later duplicates of a token are
    /// dropped and counted.
    pub fn from_entries<I, S>(dim: usize, entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, Vec<f64>)>,
        S: Into<String>,
    {
        let mut table = WordVectorTable::empty(dim, PathBuf::new())?;
        for (token, vector) in entries {
            table.push(token.into(), vector)?;
        }
        Ok(table)
    }

    fn empty(dim: usize, source_path: PathBuf) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Vectors("dimension must be positive".into()));
        }
        Ok(WordVectorTable {
            dim,
            tokens: Vec::new(),
            index: HashMap::new(),
            data: Vec::new(),
            source_path,
            duplicates: 0,
        })
    }

    fn push(&mut self, token: String, vector: Vec<f64>) -> Result<()> {
        if token.is_empty() || token.chars().any(char::is_whitespace) {
            return Err(Error::Vectors(format!("invalid token {token:?}")));
        }
        if vector.len() != self.dim {
            return Err(Error::Vectors(format!(
                "token `{token}` has {} values, expected {}",
                vector.len(),
                self.dim
            )));
        }
        if let Some(bad) = vector.iter().find(|v| !v.is_finite()) {
            return Err(Error::Vectors(format!("token `{token}` has non-finite entry {bad}")));
        }
        if self.index.contains_key(&token) {
            self.duplicates += 1;
            return Ok(());
        }
        self.index.insert(token.clone(), self.tokens.len());
        self.tokens.push(token);
        self.data.extend_from_slice(&vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Number of duplicate rows dropped while loading.
    pub fn duplicates(&self) -> usize {
        self.duplicates
    }

    pub fn source_path(&self) -> &Path {
        &self.source_path
    }

    pub fn get(&self, token: &str) -> Option<&[f64]> {
        self.index
            .get(token)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    /// Entries in file order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f64])> {
        self.tokens
            .iter()
            .zip(self.data.chunks_exact(self.dim))
            .map(|(t, v)| (t.as_str(), v))
    }

    pub fn write_text(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(out, "{} {}", self.len(), self.dim).map_err(io)?;
        for (token, vector) in self.iter() {
            write!(out, "{token}").map_err(io)?;
            for v in vector {
                write!(out, " {v}").map_err(io)?;
            }
            writeln!(out).map_err(io)?;
        }
        out.flush().map_err(io)
    }

    pub fn write_binary(&self, path: &Path) -> Result<()> {
        let mut out = BufWriter::new(File::create(path).map_err(|e| Error::io(path, e))?);
        let io = |e| Error::io(path, e);
        writeln!(out, "{} {}", self.len(), self.dim).map_err(io)?;
        for (token, vector) in self.iter() {
            out.write_all(token.as_bytes()).map_err(io)?;
            out.write_all(b" ").map_err(io)?;
            for &v in vector {
                out.write_all(&(v as f32).to_le_bytes()).map_err(io)?;
            }
        }
        out.flush().map_err(io)
    }
}

fn parse_header(line: &str) -> Result<(usize, usize)> {
    let mut parts = line.split_whitespace();
    let mut next = |what: &str| -> Result<usize> {
        parts
            .next()
            .and_then(|p| p.parse().ok())
            .ok_or_else(|| Error::Vectors(format!("bad header {line:?}: missing {what}")))
    };
    let count = next("vocabulary count")?;
    let dim = next("dimension")?;
    Ok((count, dim))
}

/// Load a word-vector file. See [`VectorFormat`] for the two layouts.
pub fn load_word_vectors(path: &Path, format: VectorFormat) -> Result<WordVectorTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = String::new();
    reader.read_line(&mut header).map_err(|e| Error::io(path, e))?;
    let (count, dim) = parse_header(header.trim_end())?;
    let mut table = WordVectorTable::empty(dim, path.to_path_buf())?;
    match format {
        VectorFormat::Text => read_text_rows(&mut reader, &mut table, count, path)?,
        VectorFormat::Binary => read_binary_rows(&mut reader, &mut table, count, path)?,
    }
    if table.duplicates > 0 {
        warn!("{}: dropped {} duplicate token rows", path.display(), table.duplicates);
    }
    Ok(table)
}

fn read_text_rows<R: BufRead>(reader: &mut R, table: &mut WordVectorTable, count: usize, path: &Path) -> Result<()> {
    let mut rows = 0;
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split_whitespace();
        let token = parts.next().unwrap_or_default().to_owned();
        let vector = parts
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Vectors(format!("token `{token}`: non-numeric entry {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        table.push(token, vector)?;
        rows += 1;
    }
    if rows != count {
        return Err(Error::Vectors(format!(
            "header declares {count} tokens but file has {rows}"
        )));
    }
    Ok(())
}

fn read_binary_rows<R: BufRead>(reader: &mut R, table: &mut WordVectorTable, count: usize, path: &Path) -> Result<()> {
    let dim = table.dim;
    let mut payload = vec![0u8; dim * 4];
    let mut token = Vec::new();
    for row in 0..count {
        token.clear();
        reader
            .read_until(b' ', &mut token)
            .map_err(|e| Error::io(path, e))?;
        if token.pop() != Some(b' ') {
            return Err(Error::Vectors(format!(
                "truncated binary payload: expected {count} tokens, found {row}"
            )));
        }
        // word2vec writers emit a newline after each vector
        let start = token.iter().position(|&b| b != b'\n').unwrap_or(token.len());
        let word = String::from_utf8(token[start..].to_vec())
            .map_err(|_| Error::Vectors(format!("row {row}: token is not UTF-8")))?;
        reader.read_exact(&mut payload).map_err(|_| {
            Error::Vectors(format!("truncated binary payload in vector for `{word}`"))
        })?;
        let vector = payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
            .collect();
        table.push(word, vector)?;
    }
    Ok(())
}

/// Lowercase, split on whitespace, strip ASCII punctuation from both ends of
/// each piece, drop empties.
pub fn tokenize(text: &str) -> Vec<String> {
    text.to_lowercase()
        .split_whitespace()
        .map(|piece| piece.trim_matches(|c: char| c.is_ascii_punctuation()))
        .filter(|piece| !piece.is_empty())
        .map(str::to_owned)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEmbedding {
    pub vector: Vec<f64>,
    /// Fraction of tokens missing from the table.
    pub oov_ratio: f64,
    pub degenerate: bool,
}

/// Uniformly weighted point cloud of token vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenCloud {
    pub points: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
}

impl TokenCloud {
    pub fn uniform(points: Vec<Vec<f64>>) -> Self {
        let n = points.len();
        let weights = vec![1.0 / n as f64; n];
        TokenCloud { points, weights }
    }

    /// Normalizes `weights` to sum to one. Weights must be positive.
    pub fn weighted(points: Vec<Vec<f64>>, weights: Vec<f64>) -> Result<Self> {
        if points.len() != weights.len() {
            return Err(Error::Invalid("points and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Invalid("cloud weights must be positive".into()));
        }
        let total: f64 = weights.iter().sum();
        Ok(TokenCloud {
            points,
            weights: weights.into_iter().map(|w| w / total).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_degenerate(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> Option<usize> {
        self.points.first().map(Vec::len)
    }
}

fn in_vocab<'t>(table: &'t WordVectorTable, tokens: &[String]) -> Vec<&'t [f64]> {
    tokens.iter().filter_map(|t| table.get(t)).collect()
}

/// Mean of the in-vocabulary token vectors. Text with no known tokens yields
/// the zero vector flagged degenerate.
pub fn embed_sentence(table: &WordVectorTable, text: &str) -> SentenceEmbedding {
    embed_tokens(table, &tokenize(text))
}

fn embed_tokens(table: &WordVectorTable, tokens: &[String]) -> SentenceEmbedding {
    let known = in_vocab(table, tokens);
    let mut vector = vec![0.0; table.dim()];
    if known.is_empty() {
        return SentenceEmbedding {
            vector,
            oov_ratio: 1.0,
            degenerate: true,
        };
    }
    for v in &known {
        for (acc, x) in vector.iter_mut().zip(v.iter()) {
            *acc += x;
        }
    }
    let n = known.len() as f64;
    vector.iter_mut().for_each(|x| *x /= n);
    SentenceEmbedding {
        vector,
        oov_ratio: 1.0 - n / tokens.len() as f64,
        degenerate: false,
    }
}

/// One uniformly weighted point per in-vocabulary token occurrence.
pub fn token_cloud(table: &WordVectorTable, text: &str) -> TokenCloud {
    cloud_tokens(table, &tokenize(text))
}

fn cloud_tokens(table: &WordVectorTable, tokens: &[String]) -> TokenCloud {
    TokenCloud::uniform(in_vocab(table, tokens).into_iter().map(<[f64]>::to_vec).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingSet {
    pub corpus_name: String,
    pub sentence_vectors: Vec<SentenceEmbedding>,
    pub clouds: Vec<TokenCloud>,
}

impl EmbeddingSet {
    pub fn len(&self) -> usize {
        self.sentence_vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentence_vectors.is_empty()
    }

    pub fn degenerate_count(&self) -> usize {
        self.sentence_vectors.iter().filter(|s| s.degenerate).count()
    }

    /// Sentence vectors of the non-degenerate entries.
    pub fn usable_vectors(&self) -> Vec<&[f64]> {
        self.sentence_vectors
            .iter()
            .filter(|s| !s.degenerate)
            .map(|s| s.vector.as_slice())
            .collect()
    }

    /// Build a set directly from texts, in order.
    pub fn from_texts<S: AsRef<str>>(table: &WordVectorTable, name: impl Into<String>, texts: &[S]) -> Self {
        let mut sentence_vectors = Vec::with_capacity(texts.len());
        let mut clouds = Vec::with_capacity(texts.len());
        for text in texts {
            let tokens = tokenize(text.as_ref());
            sentence_vectors.push(embed_tokens(table, &tokens));
            clouds.push(cloud_tokens(table, &tokens));
        }
        EmbeddingSet {
            corpus_name: name.into(),
            sentence_vectors,
            clouds,
        }
    }
}

/// Flatten, tokenize and embed every sample of `corpus`, keeping order.
pub fn embed_set(table: &WordVectorTable, corpus: &Corpus) -> EmbeddingSet {
    let texts: Vec<String> = corpus.samples().iter().map(flatten).collect();
    EmbeddingSet::from_texts(table, corpus.name.clone(), &texts)
}
