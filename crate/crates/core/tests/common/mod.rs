//! Shared fixtures and brute-force oracles for the integration tests.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use itertools::Itertools;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oodsim::corpus::{Corpus, Sample, Split, Task};
use oodsim::embeddings::WordVectorTable;

pub fn data_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize, dim: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect()
}

pub fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// W1 between equal-size uniform clouds by trying every matching.
pub fn brute_w1(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len();
    (0..n)
        .permutations(n)
        .map(|perm| perm.iter().enumerate().map(|(i, &j)| euclid(&a[i], &b[j])).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
        / n as f64
}

/// Tau-b from explicit pair enumeration. `None` when either side is constant.
pub fn brute_kendall(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let (mut s, mut n0, mut tx, mut ty) = (0i64, 0u64, 0u64, 0u64);
    for i in 0..xs.len() {
        for j in i + 1..xs.len() {
            n0 += 1;
            let dx = xs[i].partial_cmp(&xs[j]).unwrap() as i64;
            let dy = ys[i].partial_cmp(&ys[j]).unwrap() as i64;
            if dx == 0 {
                tx += 1;
            }
            if dy == 0 {
                ty += 1;
            }
            s += dx * dy;
        }
    }
    let denom = (n0 - tx) * (n0 - ty);
    (denom > 0).then(|| s as f64 / (denom as f64).sqrt())
}

/// Sample Pearson r straight from the covariance / standard deviation formula.
pub fn brute_pearson(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let cov: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let vx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let vy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    (vx > 0.0 && vy > 0.0).then(|| cov / (vx * vy).sqrt())
}

/// Rank of each value: 1 + number smaller + half the other ties.
pub fn brute_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let less = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn brute_spearman(xs: &[f64], ys: &[f64]) -> Option<f64> {
    brute_pearson(&brute_ranks(xs), &brute_ranks(ys))
}

pub fn close(a: Option<f64>, b: Option<f64>, tol: f64) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        (None, None) => true,
        _ => false,
    }
}

/// Vocabulary `w0 .. w{size-1}` with uniform random vectors.
pub fn vocabulary(size: usize, dim: usize, seed: u64) -> WordVectorTable {
    let mut r = rng(seed);
    let entries: Vec<(String, Vec<f64>)> = (0..size)
        .map(|i| (format!("w{i}"), (0..dim).map(|_| r.gen_range(-1.0..1.0)).collect()))
        .collect();
    WordVectorTable::from_entries(dim, entries).unwrap()
}

/// A sentence of 5..15 tokens drawn from a window of the vocabulary starting at
/// `offset`, so corpora with different offsets overlap only partially.
pub fn sentence(r: &mut ChaCha8Rng, vocab: usize, offset: usize, window: usize) -> String {
    let len = r.gen_range(5..15);
    (0..len)
        .map(|_| format!("w{}", (offset + r.gen_range(0..window)) % vocab))
        .join(" ")
}

pub fn synthetic_texts(n: usize, vocab: usize, offset: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    (0..n).map(|_| sentence(&mut r, vocab, offset, vocab / 2)).collect()
}

pub fn sentiment_corpus(name: &str, split: Split, texts: &[String]) -> Corpus {
    let samples = texts
        .iter()
        .enumerate()
        .map(|(i, t)| Sample::sentiment(i.to_string(), t.as_str(), if i % 2 == 0 { "pos" } else { "neg" }))
        .collect();
    Corpus::new(name, Task::Sentiment, split, samples).unwrap()
}

/// JSONL sentiment corpus with `n` rows and labels in the ratio `pos_every`:1.
pub fn write_sentiment_jsonl(path: &Path, n: usize, vocab: usize, offset: usize, seed: u64, pos_every: usize) {
    let mut r = rng(seed);
    let mut out = String::new();
    for i in 0..n {
        let label = if i % pos_every == 0 { "pos" } else { "neg" };
        let text = sentence(&mut r, vocab, offset, vocab / 2);
        let _ = writeln!(out, "{}", serde_json::json!({ "text": text, "label": label }));
    }
    std::fs::write(path, out).unwrap();
}

/// Three synthetic sentiment corpora (train and test splits of `n` rows each),
/// a 50-dimensional vocabulary and a performance table, plus a TOML config
/// tying them together. Returns the config path.
pub fn synthetic_workspace(dir: &Path, n: usize, dim: usize) -> PathBuf {
    let vocab = 300;
    vocabulary(vocab, dim, 11).write_text(&dir.join("vectors.txt")).unwrap();
    let names = ["Alpha", "Beta", "Gamma"];
    let mut config = String::from("seed = 7\nperformance = \"performance.csv\"\noutput_dir = \"out\"\n\n[embeddings]\npath = \"vectors.txt\"\n");
    for (c, name) in names.iter().enumerate() {
        for (s, split) in ["train", "test"].iter().enumerate() {
            let file = format!("{}_{split}.jsonl", name.to_lowercase());
            write_sentiment_jsonl(&dir.join(&file), n, vocab, c * 100, (c * 2 + s) as u64, 2);
            let _ = write!(
                config,
                "\n[[corpora]]\nname = \"{name}\"\npath = \"{file}\"\ntask = \"Sentiment\"\nsplit = \"{split}\"\n"
            );
        }
    }
    let mut perf = String::from("train,test,score,measure\n");
    let mut r = rng(5);
    for a in names {
        for b in names {
            let score: f64 = if a == b { 0.9 } else { r.gen_range(0.3..0.8) };
            let _ = writeln!(perf, "{a},{b},{score:.3},accuracy");
        }
    }
    std::fs::write(dir.join("performance.csv"), perf).unwrap();
    let path = dir.join("config.toml");
    std::fs::write(&path, config).unwrap();
    path
}

/// Shuffle rows of a CSV body, keeping the header first.
pub fn shuffle_csv(text: &str, seed: u64) -> String {
    let mut lines: Vec<&str> = text.lines().collect();
    let header = lines.remove(0);
    lines.shuffle(&mut rng(seed));
    let mut out = format!("{header}\n");
    for l in lines {
        out.push_str(l);
        out.push('\n');
    }
    out
}
