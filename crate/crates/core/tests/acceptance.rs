//! Acceptance suite. Runs without the libtest harness so every criterion prints
//! one PASS/FAIL line; the process exits non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::Rng;
use rand_distr::{Distribution, Normal};

use oodsim::correlation::{
    consistency_count, id_ood_gap, kendall_tau, pearson, spearman, CorrMethod, PerformanceTable,
    DEFAULT_CONSISTENCY_THRESHOLD,
};
use oodsim::corpus::Split;
use oodsim::embeddings::TokenCloud;
use oodsim::metrics::mauve::{mauve_points, mauve_with_codebook};
use oodsim::metrics::protocol::MetricConfig;
use oodsim::metrics::transport::transport_cost;
use oodsim::metrics::{
    corpus_similarity, jsd, quantize, wasserstein, wasserstein_points, Codebook, Histogram, MauveParams, MetricKind,
};
use oodsim::pipeline::config::CorrelationSpec;
use oodsim::pipeline::{run_correlation, SimilarityReport};

use common::*;

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn run(number: usize, title: &str, budget: Duration, body: impl FnOnce() -> Check) -> bool {
    let start = Instant::now();
    let outcome = catch_unwind(AssertUnwindSafe(body)).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    let elapsed = start.elapsed();
    let outcome = match outcome {
        Ok(detail) if elapsed > budget => Err(format!("{detail}; took {elapsed:?}, budget {budget:?}")),
        other => other,
    };
    let (tag, detail) = match &outcome {
        Ok(d) => ("PASS", d),
        Err(d) => ("FAIL", d),
    };
    println!("[{tag}] criterion {number}: {title} ({:.2?}) {detail}", elapsed);
    outcome.is_ok()
}

fn three_exceptions() -> Check {
    let perf = PerformanceTable::load(&data_dir().join("reference_performance.csv")).map_err(|e| e.to_string())?;
    let gaps = id_ood_gap(&perf);
    ensure!(gaps.len() == 12, "expected 12 train sets, got {}", gaps.len());
    let flagged: Vec<&str> = gaps.iter().filter(|g| g.is_exception).map(|g| g.train.as_str()).collect();
    ensure!(flagged == ["CS", "News", "WNLI"], "flagged {flagged:?}");
    ensure!(gaps.iter().all(|g| !g.tie), "unexpected tie");
    Ok(format!("exceptions {flagged:?}"))
}

/// Raw Kendall coefficients of the reference similarity scores per train set [Cosine, Mauve, Wstn, JSD],
/// recomputed independently with scipy when the fixture was built.
const SCIPY_KENDALL: [(&str, [f64; 4]); 12] = [
    ("CS", [-1.0, -1.0, 1.0 / 3.0, 1.0]),
    ("IMDb", [1.0, 1.0, -1.0 / 3.0, -1.0]),
    ("MNLI", [-1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 0.816]),
    ("News", [1.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]),
    ("QASC", [1.0 / 3.0, 1.0, -1.0, -1.0 / 3.0]),
    ("QNLI", [1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]),
    ("SCIQ", [1.0, 0.816, -0.816, -1.0]),
    ("SQUAD", [1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0, 0.816]),
    ("SST2", [-1.0 / 3.0, 1.0, -1.0 / 3.0, 1.0 / 3.0]),
    ("Trivia", [0.816, 0.0, -1.0 / 3.0, -1.0 / 3.0]),
    ("WNLI", [-1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 0.0]),
    ("Yelp", [1.0 / 3.0, 1.0 / 3.0, -1.0 / 3.0, -1.0]),
];

fn reference_correlation() -> Check {
    let sims = SimilarityReport::load(&data_dir().join("reference_similarity.csv")).map_err(|e| e.to_string())?;
    let perf_path = data_dir().join("reference_performance.csv");
    let perf = PerformanceTable::load(&perf_path).map_err(|e| e.to_string())?;
    let out_dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = CorrelationSpec::default();
    let output = run_correlation(&sims, &perf_path, &spec, out_dir.path()).map_err(|e| e.to_string())?;
    ensure!(output.threshold == DEFAULT_CONSISTENCY_THRESHOLD, "threshold {}", output.threshold);

    let mut columns: BTreeMap<(&str, MetricKind), Vec<(String, f64)>> = BTreeMap::new();
    for r in &sims.records {
        columns.entry((r.train.as_str(), r.metric)).or_default().push((r.test.clone(), r.value));
    }
    let perf_of = |train: &str, test: &str| {
        perf.rows().iter().find(|r| r.train == train && r.test == test).map(|r| r.score).unwrap()
    };

    let mut checked = 0;
    let mut oracle_agreement: Vec<(MetricKind, f64)> = Vec::new();
    for method in [CorrMethod::KendallTau, CorrMethod::Pearson] {
        let report = output.report(method).ok_or("missing report")?;
        ensure!(report.train_sets().len() == 12, "{method}: {} train sets", report.train_sets().len());
        ensure!(report.entries.len() == 48, "{method}: {} cells", report.entries.len());
        for e in &report.entries {
            let col = &columns[&(e.train.as_str(), e.metric)];
            let xs: Vec<f64> = col.iter().map(|(test, _)| perf_of(&e.train, test)).collect();
            let ys: Vec<f64> = col.iter().map(|(_, v)| *v).collect();
            let (want, ok) = match method {
                CorrMethod::KendallTau => {
                    let want = brute_kendall(&xs, &ys);
                    if let Some(w) = want {
                        oracle_agreement.push((e.metric, w * e.metric.orientation().sign()));
                    }
                    (want, e.coefficient == want)
                }
                _ => {
                    let want = brute_pearson(&xs, &ys);
                    (want, close(e.coefficient, want, 1e-9))
                }
            };
            ensure!(ok, "{method} {} {}: got {:?}, oracle {:?}", e.train, e.metric, e.coefficient, want);
            ensure!(e.n == 3, "n = {}", e.n);
            checked += 1;
        }
        if method == CorrMethod::KendallTau {
            for (train, row) in SCIPY_KENDALL {
                for (metric, want) in MetricKind::ALL.iter().zip(row) {
                    let got = report.get(train, *metric).and_then(|e| e.coefficient).ok_or("undefined")?;
                    ensure!((got - want).abs() < 1e-3, "{train} {metric}: {got} vs scipy {want}");
                }
            }
        }
    }

    let kendall = output.report(CorrMethod::KendallTau).unwrap();
    let pearson_r = output.report(CorrMethod::Pearson).unwrap();
    let fmt = |c: &BTreeMap<MetricKind, usize>| {
        c.iter().map(|(m, n)| format!("{m}={n}")).collect::<Vec<_>>().join(" ")
    };
    for threshold in [0.0, 0.5] {
        let counts = consistency_count(kendall, threshold);
        for metric in MetricKind::ALL {
            let want = oracle_agreement.iter().filter(|(m, a)| *m == metric && *a >= threshold).count();
            ensure!(counts[&metric] == want, "threshold {threshold}: {metric} count {} vs oracle {want}", counts[&metric]);
        }
        println!(
            "    threshold {threshold}: Kendall [{}]  Pearson [{}]  (of 12)",
            fmt(&consistency_count(kendall, threshold)),
            fmt(&consistency_count(pearson_r, threshold))
        );
    }
    let counts = output.counts(CorrMethod::KendallTau);
    let wstn = counts[&MetricKind::Wstn];
    ensure!(
        counts.values().all(|&c| c <= wstn),
        "Wstn does not lead under Kendall at threshold {}: {}",
        output.threshold,
        fmt(&counts)
    );
    let pc = output.counts(CorrMethod::Pearson);
    Ok(format!(
        "{checked} coefficients match the oracles; at threshold {} Kendall Wstn {wstn}/12, Pearson Wstn {}/12 and Cosine {}/12",
        output.threshold, pc[&MetricKind::Wstn], pc[&MetricKind::Cosine]
    ))
}

fn wasserstein_oracle() -> Check {
    let mut r = rng(3);
    let mut pairs = 0;
    let mut worst: f64 = 0.0;
    while pairs < 1200 {
        let n = r.gen_range(1..=6);
        let dim = r.gen_range(1..=5);
        let a = random_points(&mut r, n, dim);
        let b = random_points(&mut r, n, dim);
        let got = wasserstein_points(&a, &b).ok_or("degenerate")?;
        let want = brute_w1(&a, &b);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-9, "n={n} dim={dim}: {got} vs brute {want}");

        // the general solver on the same uniform instance
        let cost: Vec<f64> = a.iter().flat_map(|x| b.iter().map(move |y| euclid(x, y))).collect();
        let uniform = vec![1.0 / n as f64; n];
        let simplex = transport_cost(&uniform, &uniform, &cost);
        ensure!((simplex - want).abs() <= 1e-9, "simplex {simplex} vs brute {want}");
        pairs += 1;
    }
    for _ in 0..300 {
        let n = r.gen_range(1..=6);
        let dim = r.gen_range(1..=5);
        let clouds: Vec<TokenCloud> = (0..3).map(|_| TokenCloud::uniform(random_points(&mut r, n, dim))).collect();
        let d = |i: usize, j: usize| wasserstein(&clouds[i], &clouds[j]).unwrap();
        ensure!(d(0, 0).abs() <= 1e-9, "identity violated: {}", d(0, 0));
        ensure!((d(0, 1) - d(1, 0)).abs() <= 1e-9, "symmetry violated");
        ensure!(d(0, 2) <= d(0, 1) + d(1, 2) + 1e-9, "triangle violated");
    }
    Ok(format!("{pairs} pairs, max |error| {worst:.1e}; axioms on 300 triples"))
}

/// Independent frontier: nearest-centroid histograms, natural-log KL, sorted
/// trapezoid sum.
fn oracle_mauve(p: &[Vec<f64>], q: &[Vec<f64>], centroids: &[Vec<f64>], c: f64, grid: usize) -> f64 {
    let hist = |pts: &[Vec<f64>]| {
        let mut h = vec![0.0; centroids.len()];
        for x in pts {
            let mut best = 0;
            for (j, cen) in centroids.iter().enumerate() {
                if euclid(x, cen) < euclid(x, &centroids[best]) {
                    best = j;
                }
            }
            h[best] += 1.0;
        }
        h.iter().map(|v| v / pts.len() as f64).collect::<Vec<f64>>()
    };
    let (hp, hq) = (hist(p), hist(q));
    let kl = |a: &[f64], m: &[f64]| -> f64 {
        a.iter().zip(m).map(|(x, y)| if *x > 0.0 { x * (x / y).ln() } else { 0.0 }).sum()
    };
    let mut pts = vec![(0.0, 1.0), (1.0, 0.0)];
    for i in 1..=grid {
        let l = i as f64 / (grid + 1) as f64;
        let m: Vec<f64> = hp.iter().zip(&hq).map(|(a, b)| l * a + (1.0 - l) * b).collect();
        pts.push(((-c * kl(&hp, &m)).exp(), (-c * kl(&hq, &m)).exp()));
    }
    pts.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    pts.windows(2).map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0).sum()
}

fn mauve_properties() -> Check {
    let mut r = rng(4);
    let params = MauveParams::default();
    for i in 0..100 {
        let n = r.gen_range(4..40);
        let dim = r.gen_range(1..8);
        let p = random_points(&mut r, n, dim);
        let m = mauve_points(&p, &p, &params, i).map_err(|e| e.to_string())?;
        ensure!((m - 1.0).abs() <= 1e-6, "mauve(P,P) = {m}");
    }
    for i in 0..50 {
        let dim = r.gen_range(1..6);
        let p = { let n = r.gen_range(5..30); random_points(&mut r, n, dim) };
        let q: Vec<Vec<f64>> = { let n = r.gen_range(5..30); random_points(&mut r, n, dim) }
            .into_iter()
            .map(|v| v.into_iter().map(|x| x + 0.7).collect())
            .collect();
        let pq = mauve_points(&p, &q, &params, i).map_err(|e| e.to_string())?;
        let qp = mauve_points(&q, &p, &params, i).map_err(|e| e.to_string())?;
        ensure!((pq - qp).abs() <= 1e-9, "asymmetric: {pq} vs {qp}");
    }
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let dim = r.gen_range(1..5);
        let k = r.gen_range(2..8);
        let centroids = random_points(&mut r, k, dim);
        let codebook = Codebook::from_centroids(centroids.clone()).map_err(|e| e.to_string())?;
        let p = { let n = r.gen_range(3..30); random_points(&mut r, n, dim) };
        let q = { let n = r.gen_range(3..30); random_points(&mut r, n, dim) };
        let c = r.gen_range(0.5..10.0);
        let got = mauve_with_codebook(&p, &q, &codebook, c, 100).map_err(|e| e.to_string())?;
        let want = oracle_mauve(&p, &q, &centroids, c, 100);
        worst = worst.max((got - want).abs());
        ensure!((got - want).abs() <= 1e-9, "AUC {got} vs oracle {want}");
    }
    let normal = Normal::new(0.0, 1.0).unwrap();
    let gauss = |r: &mut rand_chacha::ChaCha8Rng, shift: f64| -> Vec<Vec<f64>> {
        (0..50).map(|_| (0..5).map(|_| normal.sample(r) + shift).collect()).collect()
    };
    let p = gauss(&mut r, 0.0);
    let q = gauss(&mut r, 20.0);
    let far = mauve_points(&p, &q, &params, 9).map_err(|e| e.to_string())?;
    ensure!(far < 0.05, "far-separated Gaussians give {far}");
    Ok(format!("AUC max |error| {worst:.1e}; far Gaussians {far:.4}"))
}

fn protocol_fidelity() -> Check {
    let table = vocabulary(120, 16, 1);
    let train = sentiment_corpus("Train", Split::Train, &synthetic_texts(100, 120, 0, 1));
    let test = sentiment_corpus("Test", Split::Test, &synthetic_texts(100, 120, 40, 2));
    let config = MetricConfig { sample_k: 20, seed: 42, ..MetricConfig::default() };
    let mut details = Vec::new();
    for metric in [MetricKind::Cosine, MetricKind::Wstn, MetricKind::Jsd] {
        let s = corpus_similarity(&table, &train, &test, metric, &config).map_err(|e| e.to_string())?;
        ensure!(s.evaluated + s.excluded == 400, "{metric}: {} evaluations", s.evaluated + s.excluded);
        ensure!(s.evaluated == 400, "{metric}: {} pairs excluded", s.excluded);
        for _ in 0..3 {
            let again = corpus_similarity(&table, &train, &test, metric, &config).map_err(|e| e.to_string())?;
            ensure!(again.value.to_bits() == s.value.to_bits(), "{metric} not deterministic");
        }
        details.push(format!("{metric}={:.4}", s.value));
    }
    let s = corpus_similarity(&table, &train, &test, MetricKind::Mauve, &config).map_err(|e| e.to_string())?;
    let again = corpus_similarity(&table, &train, &test, MetricKind::Mauve, &config).map_err(|e| e.to_string())?;
    ensure!(s.value.to_bits() == again.value.to_bits(), "Mauve not deterministic");
    Ok(format!("400 evaluations per pairwise metric; {}", details.join(" ")))
}

fn correlation_oracles() -> Check {
    let mut r = rng(6);
    let mut undefined = 0;
    for i in 0..10_000 {
        let n = r.gen_range(2..=50);
        // small integer ranges force ties; every fourth case is continuous
        let levels = if i % 4 == 0 { 0 } else { r.gen_range(1..8) };
        let mut draw = || -> Vec<f64> {
            (0..n)
                .map(|_| if levels == 0 { r.gen_range(-5.0..5.0) } else { r.gen_range(0..levels) as f64 })
                .collect()
        };
        let xs = draw();
        let ys = draw();
        let k = kendall_tau(&xs, &ys).map_err(|e| e.to_string())?;
        let p = pearson(&xs, &ys).map_err(|e| e.to_string())?;
        let s = spearman(&xs, &ys).map_err(|e| e.to_string())?;
        ensure!(close(k, brute_kendall(&xs, &ys), 1e-9), "kendall {k:?} vs {:?} on {xs:?} {ys:?}", brute_kendall(&xs, &ys));
        ensure!(close(p, brute_pearson(&xs, &ys), 1e-9), "pearson {p:?} vs {:?}", brute_pearson(&xs, &ys));
        ensure!(close(s, brute_spearman(&xs, &ys), 1e-9), "spearman {s:?} vs {:?}", brute_spearman(&xs, &ys));
        undefined += k.is_none() as usize;
    }
    let x = [1.0, 2.0, 3.0];
    let get = |v: std::result::Result<Option<f64>, oodsim::Error>| v.ok().flatten().unwrap_or(f64::NAN);
    ensure!(get(kendall_tau(&x, &[10.0, 20.0, 30.0])) == 1.0, "kendall identical");
    ensure!(get(kendall_tau(&x, &[3.0, 2.0, 1.0])) == -1.0, "kendall reversed");
    ensure!(get(kendall_tau(&x, &[1.0, 3.0, 2.0])) == 1.0 / 3.0, "kendall 1/3");
    ensure!(get(pearson(&x, &[3.0, 5.0, 7.0])) == 1.0, "pearson affine");
    ensure!(get(pearson(&x, &[-1.0, -2.0, -3.0])) == -1.0, "pearson negated");
    let p = get(pearson(&x, &[1.0, 2.0, 4.0]));
    ensure!((p - 0.9820).abs() < 1e-4, "pearson worked example {p}");
    ensure!(get(spearman(&x, &[1.0, 8.0, 27.0])) == 1.0, "spearman cubic");
    ensure!(get(spearman(&x, &[3.0, 2.0, 1.0])) == -1.0, "spearman reversed");
    ensure!(get(spearman(&x, &[2.0, 1.0, 3.0])) == 0.5, "spearman 0.5");
    Ok(format!("10000 random vectors ({undefined} undefined cases agree); worked examples exact"))
}

fn random_simplex(r: &mut rand_chacha::ChaCha8Rng, k: usize) -> Histogram {
    let mut w: Vec<f64> = (0..k).map(|_| if r.gen_bool(0.2) { 0.0 } else { r.gen_range(0.0..1.0) }).collect();
    if w.iter().all(|&x| x == 0.0) {
        w[0] = 1.0;
    }
    Histogram::from_counts(&w).unwrap()
}

fn jsd_properties() -> Check {
    let mut r = rng(8);
    for _ in 0..5000 {
        let k = r.gen_range(1..12);
        let (p, q, s) = (random_simplex(&mut r, k), random_simplex(&mut r, k), random_simplex(&mut r, k));
        let (pq, qp) = (jsd(&p, &q), jsd(&q, &p));
        ensure!((0.0..=1.0).contains(&pq), "out of bounds {pq}");
        ensure!((pq - qp).abs() <= 1e-9, "asymmetric");
        ensure!(jsd(&p, &p).abs() <= 1e-9, "jsd(p,p) = {}", jsd(&p, &p));
        ensure!(pq <= jsd(&p, &s) + jsd(&s, &q) + 1e-9, "triangle violated");
        // entropy form, base 2
        let h = |v: &[f64]| -> f64 { v.iter().filter(|x| **x > 0.0).map(|x| -x * x.log2()).sum() };
        let m: Vec<f64> = p.mass().iter().zip(q.mass()).map(|(a, b)| (a + b) / 2.0).collect();
        let want = (h(&m) - (h(p.mass()) + h(q.mass())) / 2.0).max(0.0).sqrt();
        ensure!((pq - want).abs() <= 1e-6, "jsd {pq} vs entropy form {want}");
    }
    for _ in 0..2000 {
        let dim = r.gen_range(1..6);
        let k = r.gen_range(1..10);
        let codebook = Codebook::from_centroids(random_points(&mut r, k, dim)).unwrap();
        let pts = { let n = r.gen_range(1..60); random_points(&mut r, n, dim) };
        let h = quantize(&pts, &codebook).map_err(|e| e.to_string())?;
        let total: f64 = h.mass().iter().sum();
        ensure!((total - 1.0).abs() <= 1e-9, "histogram sums to {total}");
    }
    let one_hot = |i| Histogram::new(if i == 0 { vec![1.0, 0.0] } else { vec![0.0, 1.0] }).unwrap();
    ensure!((jsd(&one_hot(0), &one_hot(1)) - 1.0).abs() <= 1e-12, "disjoint supports");
    Ok("5000 simplex triples, 2000 quantizations".into())
}

fn desk_scale_run() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let config = synthetic_workspace(dir.path(), 1000, 50);
    let status = Command::new(env!("CARGO_BIN_EXE_oodsim"))
        .args(["run-all", "--config"])
        .arg(&config)
        .output()
        .map_err(|e| e.to_string())?;
    ensure!(
        status.status.success(),
        "run-all failed: {}",
        String::from_utf8_lossy(&status.stderr)
    );
    let out = dir.path().join("out");
    let artifacts = [
        "similarity.csv",
        "similarity.json",
        "correlation.csv",
        "correlation.json",
        "heatmap_kendall.svg",
        "heatmap_pearson.svg",
        "prepared/manifest.json",
    ];
    for a in artifacts {
        let meta = std::fs::metadata(out.join(a)).map_err(|e| format!("{a}: {e}"))?;
        ensure!(meta.len() > 0, "{a} is empty");
    }
    let sims = SimilarityReport::load(&out.join("similarity.csv")).map_err(|e| e.to_string())?;
    ensure!(sims.records.len() == 36, "{} records", sims.records.len());
    Ok(format!("3 corpora x 1000 samples, 36 records, {} artifacts", artifacts.len()))
}

fn main() -> ExitCode {
    let s = Duration::from_secs(1);
    let m = Duration::from_secs(60);
    let results = [
        run(1, "three ID/OOD exceptions on the performance fixture", s, three_exceptions),
        run(2, "correlation recomputation on the similarity fixture", s, reference_correlation),
        run(3, "Wasserstein solver vs brute-force matchings", m, wasserstein_oracle),
        run(4, "MAUVE properties", m, mauve_properties),
        run(5, "sampling protocol fidelity", m, protocol_fidelity),
        run(6, "correlation coefficient oracles", m, correlation_oracles),
        run(7, "JSD and quantization properties", m, jsd_properties),
        run(8, "desk-scale run-all", m, desk_scale_run),
    ];
    let passed = results.iter().filter(|ok| **ok).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
