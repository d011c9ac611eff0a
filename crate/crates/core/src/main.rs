use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use oodsim::correlation::CorrMethod;
use oodsim::embeddings::VectorFormat;
use oodsim::error::{Error, Result};
use oodsim::metrics::MetricKind;
use oodsim::pipeline::config::{EmbeddingSpec, RunConfig};
use oodsim::pipeline::{self, CorrelationOutput, SimilarityReport};

#[derive(Parser)]
#[command(name = "oodsim", version, about = "Estimate out-of-distribution shift between text corpora")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Balance and size-match corpora, writing prepared JSONL and a manifest.
    Prepare(Common),
    /// Score every (train, test) pair with the enabled metrics.
    Similarity(Common),
    /// Correlate similarity scores with a performance table.
    Correlate {
        #[command(flatten)]
        common: Common,
        /// Similarity report (CSV or JSON); defaults to <out>/similarity.csv.
        #[arg(long)]
        similarity: Option<PathBuf>,
        /// Performance table CSV (train,test,score,measure).
        #[arg(long)]
        performance: Option<PathBuf>,
        /// Correlation methods, comma separated (kendall, pearson, spearman).
        #[arg(long, value_delimiter = ',')]
        methods: Vec<CorrMethod>,
        /// Consistency threshold on orientation-adjusted coefficients.
        #[arg(long)]
        threshold: Option<f64>,
        /// Leave in-domain rows out of each train set's correlation.
        #[arg(long)]
        exclude_id: bool,
    },
    /// Render heatmaps from a correlation report.
    Heatmap {
        #[command(flatten)]
        common: Common,
        /// correlation.json; defaults to <out>/correlation.json.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// prepare, similarity, correlate and heatmap in one go.
    RunAll(Common),
}

#[derive(Args, Clone)]
struct Common {
    /// Run configuration (TOML or JSON).
    #[arg(long, env = "OODSIM_CONFIG")]
    config: Option<PathBuf>,
    #[arg(long, env = "OODSIM_SEED")]
    seed: Option<u64>,
    #[arg(long, env = "OODSIM_SAMPLE_K")]
    sample_k: Option<usize>,
    /// Comma separated subset of Cosine,Mauve,Wstn,JSD.
    #[arg(long, env = "OODSIM_METRICS", value_delimiter = ',')]
    metrics: Vec<MetricKind>,
    /// Output directory.
    #[arg(long, env = "OODSIM_OUT")]
    out: Option<PathBuf>,
    /// Word-vector file.
    #[arg(long, env = "OODSIM_EMBEDDINGS")]
    embeddings: Option<PathBuf>,
    /// Word-vector file format: text or binary.
    #[arg(long, env = "OODSIM_EMBEDDINGS_FORMAT")]
    format: Option<VectorFormat>,
}

impl Common {
    /// Config file values overridden by flags (and their env fallbacks).
    fn resolve(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig {
                corpora: Vec::new(),
                embeddings: None,
                sample_k: 20,
                seed: 0,
                metrics: MetricKind::ALL.to_vec(),
                jsd_bins: 8,
                mauve: Default::default(),
                modes: Default::default(),
                pairs: Vec::new(),
                performance: None,
                output_dir: PathBuf::from("out"),
                correlation: Default::default(),
                prepare: Default::default(),
            },
        };
        if let Some(seed) = self.seed {
            config.seed = seed;
        }
        if let Some(k) = self.sample_k {
            config.sample_k = k;
        }
        if !self.metrics.is_empty() {
            config.metrics = self.metrics.clone();
        }
        if let Some(out) = &self.out {
            config.output_dir = out.clone();
        }
        match (&self.embeddings, &mut config.embeddings) {
            (Some(path), Some(spec)) => spec.path = path.clone(),
            (Some(path), None) => {
                config.embeddings = Some(EmbeddingSpec {
                    path: path.clone(),
                    format: VectorFormat::Text,
                })
            }
            _ => {}
        }
        if let (Some(format), Some(spec)) = (self.format, &mut config.embeddings) {
            spec.format = format;
        }
        Ok(config)
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Prepare(common) => {
            let config = common.resolve()?;
            config.validate()?;
            let manifest = pipeline::prepare_data(&config)?;
            for e in &manifest.entries {
                println!("{}\t{}\t{}\t{}", e.task, e.split, e.name, e.size);
            }
        }
        Command::Similarity(common) => {
            let config = common.resolve()?;
            let report = pipeline::run_similarity(&config)?;
            println!(
                "{} records -> {}",
                report.records.len(),
                config.output_dir.join("similarity.csv").display()
            );
        }
        Command::Correlate {
            common,
            similarity,
            performance,
            methods,
            threshold,
            exclude_id,
        } => {
            let config = common.resolve()?;
            let sims_path = similarity.unwrap_or_else(|| config.output_dir.join("similarity.csv"));
            let sims = SimilarityReport::load(&sims_path)?;
            let perf = performance
                .or_else(|| config.performance.clone())
                .ok_or_else(|| Error::Config("no performance table given".into()))?;
            let mut spec = config.correlation.clone();
            if !methods.is_empty() {
                spec.methods = methods;
            }
            if let Some(t) = threshold {
                spec.threshold = t;
            }
            if exclude_id {
                spec.include_id = false;
            }
            let output = pipeline::run_correlation(&sims, &perf, &spec, &config.output_dir)?;
            print_consistency(&output);
        }
        Command::Heatmap { common, report } => {
            let config = common.resolve()?;
            let path = report.unwrap_or_else(|| config.output_dir.join("correlation.json"));
            let text = std::fs::read_to_string(&path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
            let output = CorrelationOutput::from_json(&text)?;
            for p in pipeline::emit_heatmaps(&output, &config.output_dir)? {
                println!("{}", p.display());
            }
        }
        Command::RunAll(common) => {
            let config = common.resolve()?;
            let out = pipeline::run_all(&config)?;
            println!("{} similarity records", out.similarity.records.len());
            if let Some(corr) = &out.correlation {
                print_consistency(corr);
            }
            for p in &out.heatmaps {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn print_consistency(output: &CorrelationOutput) {
    for row in &output.consistency {
        println!(
            "{}\t{}\t{}/{} (agreement >= {})",
            row.method, row.metric, row.count, row.of, output.threshold
        );
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
