//! lmsense: self-supervised sensitivity evaluation for language models.

use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lmsense::corpus::CorpusFormat;
use lmsense::harness::{
    self, compare, emit_comparison, emit_report, BackendKind, EvalReport, MetricKind, RunConfig,
};

#[derive(Parser)]
#[command(
    name = "lmsense",
    version,
    about = "Self-supervised LM sensitivity evaluation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct ConfigArgs {
    /// Run configuration file (TOML). CLI flags override config keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Apply a named preset before other overrides (available: paper).
    #[arg(long)]
    preset: Option<String>,
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Corpus format: text | jsonl
    #[arg(long)]
    format: Option<String>,
    /// Field name holding text in jsonl records.
    #[arg(long)]
    text_field: Option<String>,
    #[arg(long)]
    num_samples: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    concurrency: Option<usize>,
    /// Backend: "reference:TRAIN_PATH" or a remote base URL with --model.
    #[arg(long)]
    backend: Option<String>,
    /// Remote model name.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    wordlist: Option<PathBuf>,
    /// Tokenizer vocab JSON (GPT-2 format); requires --merges.
    #[arg(long)]
    vocab: Option<PathBuf>,
    #[arg(long)]
    merges: Option<PathBuf>,
    /// Prepend a begin-of-sequence token when encoding.
    #[arg(long)]
    bos: bool,
    /// Comma-separated metric list to enable.
    #[arg(long)]
    metrics: Option<String>,
    /// Restrict negation to each document's first sentence.
    #[arg(long)]
    first_sentence_only: bool,
    /// Trigger word for the toxicity transforms.
    #[arg(long)]
    trigger: Option<String>,
    /// Replace every transform with identity (calibration).
    #[arg(long)]
    identity_calibration: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Reuse a cache directory across runs against the same backend.
    #[arg(long)]
    shared_cache: Option<PathBuf>,
}

impl ConfigArgs {
    fn build(&self) -> Result<RunConfig> {
        let mut config = match &self.config {
            Some(path) => RunConfig::from_file(path)?,
            None => RunConfig::default(),
        };
        if let Some(preset) = &self.preset {
            match preset.as_str() {
                "paper" => config.apply_paper_preset(),
                other => bail!("unknown preset {other:?} (available: paper)"),
            }
        }
        if let Some(corpus) = &self.corpus {
            config.corpus.path = corpus.clone();
        }
        if let Some(format) = &self.format {
            config.corpus.format =
                CorpusFormat::from_str(format).map_err(|e| anyhow::anyhow!(e))?;
        }
        if let Some(field) = &self.text_field {
            config.corpus.text_field = field.clone();
        }
        if let Some(n) = self.num_samples {
            config.n_samples = n;
        }
        if let Some(seed) = self.seed {
            config.seed = Some(seed);
        }
        if let Some(c) = self.concurrency {
            config.concurrency = c;
        }
        if let Some(backend) = &self.backend {
            if let Some(train) = backend.strip_prefix("reference:") {
                config.backend.kind = BackendKind::Reference;
                config.backend.train_path = Some(PathBuf::from(train));
            } else {
                config.backend.kind = BackendKind::Remote;
                config.backend.base_url = Some(backend.clone());
            }
        }
        if let Some(model) = &self.model {
            config.backend.model = Some(model.clone());
        }
        if let Some(wordlist) = &self.wordlist {
            config.wordlist = Some(wordlist.clone());
        }
        match (&self.vocab, &self.merges) {
            (Some(vocab), Some(merges)) => {
                config.tokenizer = Some(harness::TokenizerConfig {
                    vocab: vocab.clone(),
                    merges: merges.clone(),
                    bos: self.bos,
                });
            }
            (None, None) => {
                if self.bos {
                    if let Some(t) = &mut config.tokenizer {
                        t.bos = true;
                    }
                }
            }
            _ => bail!("--vocab and --merges must be given together"),
        }
        if let Some(metrics) = &self.metrics {
            let enabled: Result<Vec<MetricKind>, String> = metrics
                .split(',')
                .map(|m| MetricKind::from_str(m.trim()))
                .collect();
            config.metrics.enabled = enabled.map_err(|e| anyhow::anyhow!(e))?;
        }
        if self.first_sentence_only {
            config.metrics.negation.first_sentence_only = true;
        }
        if let Some(trigger) = &self.trigger {
            config.metrics.toxicity.trigger = Some(trigger.clone());
        }
        if self.identity_calibration {
            config.identity_calibration = true;
        }
        if let Some(out) = &self.out {
            config.out_dir = out.clone();
        }
        if let Some(cache) = &self.shared_cache {
            config.shared_cache = Some(cache.clone());
        }
        Ok(config)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run the enabled metrics and write report.json, scores.csv, radar.json.
    Run(ConfigArgs),
    /// Compare two or more reports; writes comparison.csv and radar.json.
    Compare {
        /// Paths to report.json files from prior runs.
        reports: Vec<PathBuf>,
        #[arg(long, default_value = "comparison")]
        out: PathBuf,
    },
    /// Emit transform pairs for one metric as JSON lines, without scoring.
    Transform {
        #[command(flatten)]
        config: ConfigArgs,
        /// Which metric's transform to apply.
        #[arg(long)]
        metric: String,
    },
    /// Entropy diagnostics: next-token and mean per-token Shannon entropy.
    Entropy(ConfigArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run(args) => {
            let config = args.build()?;
            let report = harness::run(&config).context("run failed")?;
            let files = emit_report(&report, &config.out_dir)?;
            for (metric, score) in &report.body.scores {
                let flag = if report
                    .body
                    .under_sampled
                    .get(metric)
                    .copied()
                    .unwrap_or(false)
                {
                    "  [under-sampled]"
                } else {
                    ""
                };
                println!(
                    "{metric}: {:.6} (stderr {:.6}, n {}){flag}",
                    score.value, score.stderr, score.n
                );
            }
            for warning in &report.body.warnings {
                eprintln!("warning: {warning}");
            }
            println!("requests: {}", report.timing.request_count);
            for file in files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Compare { reports, out } => {
            if reports.len() < 2 {
                bail!("compare needs at least two report files");
            }
            let loaded: Result<Vec<EvalReport>, _> =
                reports.iter().map(|p| EvalReport::from_file(p)).collect();
            let comparison = compare(&loaded?)?;
            for row in &comparison.rows {
                let cells: Vec<String> = row.values.iter().map(|v| format!("{v:.6}")).collect();
                println!("{}: {}", row.metric, cells.join("  "));
            }
            let files = emit_comparison(&comparison, &out)?;
            for file in files {
                println!("wrote {}", file.display());
            }
            Ok(())
        }
        Command::Transform { config, metric } => {
            let config = config.build()?;
            let metric = MetricKind::from_str(&metric).map_err(|e| anyhow::anyhow!(e))?;
            let outcomes = harness::transform_dry_run(&config, metric)?;
            for outcome in outcomes {
                println!("{}", serde_json::to_string(&outcome)?);
            }
            Ok(())
        }
        Command::Entropy(args) => {
            let config = args.build()?;
            let report = harness::entropy_run(&config)?;
            println!(
                "next_token_entropy: {:.6} (stderr {:.6})",
                report.next_token_entropy.value, report.next_token_entropy.stderr
            );
            println!(
                "mean_token_entropy: {:.6} (stderr {:.6})",
                report.mean_token_entropy.value, report.mean_token_entropy.stderr
            );
            let out = config.out_dir.join("entropy.json");
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent)?;
            }
            std::fs::write(&out, serde_json::to_vec_pretty(&report)?)?;
            println!("wrote {}", out.display());
            Ok(())
        }
    }
}
