use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use altbot::error::{Error, Result};
use altbot::eval::constant_positive_f1;
use altbot::ingest::harvest::{harvest_scores, HarvestCheckpoint, HarvestConfig, StoreProvider, SystemClock};
use altbot::ingest::{parse_articles, parse_scores, write_scores_csv, ArticleFormat};
use altbot::pipeline::{
    evaluate, health_ztest, load_labeled, prepare, run_report, summarize, train_model, write_json, ModelFile,
    ModelKind, PipelineConfig, REPORT_FILE, VERSION, ZTEST_FILE,
};
use altbot::scoring::{read_labeled_csv, score_summary, user_bot_score, write_labeled_csv};
use altbot::stats::two_proportion_ztest;
use altbot::synth::{generate_dataset, write_dataset, SynthConfig, ARTICLES_FILE, SCORES_FILE};

const PRECEDENCE: &str = "Settings resolve as: command-line flags, then the --config file, then built-in defaults.";

/// Bot-amplification analysis for scholarly articles shared on social media.
#[derive(Parser)]
#[command(name = "altbot", version, after_help = PRECEDENCE)]
struct Cli {
    /// Flat TOML file with pipeline settings.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-user bot scores (sum of the eight metrics) and their summary.
    Score {
        #[arg(long)]
        scores: PathBuf,
        /// CSV with user_id,bot_score.
        #[arg(long)]
        out: PathBuf,
    },
    /// Aggregate tweeter scores per article and apply the threshold.
    Label {
        #[arg(long)]
        articles: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Labeled CSV to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Split, upsample and fit one model on a labeled file.
    Train {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        model: String,
        /// Model file to write.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
    /// Evaluate a model file on the held-out split of a labeled file.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        labeled: PathBuf,
        /// Score every row instead of the held-out split.
        #[arg(long)]
        all_rows: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Two-proportion z-test of spam ratios, health versus other disciplines.
    Ztest {
        #[arg(long, required_unless_present = "counts")]
        labeled: Option<PathBuf>,
        /// Raw counts instead of a labeled file: X1 N1 X2 N2.
        #[arg(long, num_args = 4, value_names = ["X1", "N1", "X2", "N2"])]
        counts: Option<Vec<u64>>,
        /// JSON file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Group ratios and medians by discipline, location and health partition.
    Summarize {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic dataset in the ingest file formats.
    Synth {
        #[arg(long = "n", default_value_t = SynthConfig::default().n_articles)]
        n_articles: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = SynthConfig::default().spam_prevalence)]
        prevalence: f64,
        #[arg(long, default_value_t = SynthConfig::default().health_share)]
        health_share: f64,
        /// Planted signal strength; 0 makes labels independent of features.
        #[arg(long, default_value_t = SynthConfig::default().signal_strength)]
        signal: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fetch scores for every tweeter of an articles file, rate limited and
    /// resumable through an append-only checkpoint.
    Harvest {
        #[arg(long)]
        articles: PathBuf,
        /// Scores file standing in for the remote scoring service.
        #[arg(long)]
        source: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Requests per second.
        #[arg(long, default_value_t = 10.0)]
        rate_limit: f64,
        #[arg(long, default_value_t = 5)]
        max_attempts: u32,
        /// Scores CSV to write once harvesting finishes.
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: label, split, upsample, train all models, evaluate,
    /// z-test and summarize.
    Report {
        /// Directory holding articles.jsonl and scores.csv.
        #[arg(long = "in")]
        input: Option<PathBuf>,
        #[arg(long)]
        articles: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        pipeline: PipelineArgs,
    },
}

/// Overrides for config-file settings.
#[derive(Args, Default)]
struct PipelineArgs {
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    train_fraction: Option<f64>,
    /// Split without stratifying by class.
    #[arg(long)]
    unstratified: bool,
    /// Comma-separated subset of lr,knn,svm.
    #[arg(long, value_delimiter = ',')]
    models: Option<Vec<String>>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    max_epochs: Option<usize>,
    #[arg(long)]
    tolerance: Option<f64>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    svm_step: Option<f64>,
    #[arg(long)]
    svm_epochs: Option<usize>,
    #[arg(long)]
    svm_l2: Option<f64>,
    /// Upsample the whole dataset before splitting (leaks duplicates into
    /// the test set).
    #[arg(long)]
    resample_before_split: bool,
    #[arg(long)]
    bootstrap_rounds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

impl PipelineArgs {
    fn apply(&self, c: &mut PipelineConfig) -> Result<()> {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = self.$field.clone() {
                    c.$field = v;
                })*
            };
        }
        set!(threshold, train_fraction, learning_rate, max_epochs, tolerance, l2, k, svm_step, svm_epochs, svm_l2, bootstrap_rounds, seed);
        if self.unstratified {
            c.stratified = false;
        }
        if self.resample_before_split {
            c.resample_before_split = true;
        }
        if let Some(models) = &self.models {
            c.models = models.iter().map(|m| m.parse()).collect::<Result<_>>()?;
        }
        Ok(())
    }
}

fn base_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.to_path_buf(),
        source: e,
    })
}

fn run(cli: Cli) -> Result<()> {
    let mut config = base_config(cli.config.as_deref())?;
    match cli.command {
        Command::Score { scores, out } => {
            let parsed = parse_scores(&scores)?;
            let mut w = csv::Writer::from_path(&out).map_err(|e| Error::Validation(format!("{}: {e}", out.display())))?;
            let mut values = Vec::with_capacity(parsed.store.len());
            let csv_err = |e: csv::Error| Error::Validation(format!("{}: {e}", out.display()));
            w.write_record(["user_id", "bot_score"]).map_err(csv_err)?;
            for (id, m) in parsed.store.iter() {
                let s = user_bot_score(m);
                values.push(s);
                w.write_record([id, &s.to_string()]).map_err(csv_err)?;
            }
            w.flush().map_err(|e| Error::Io { path: out.clone(), source: e })?;
            let summary = score_summary(&values)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
        }
        Command::Label {
            articles,
            scores,
            threshold,
            out,
        } => {
            if let Some(t) = threshold {
                config.threshold = t;
            }
            config.articles = articles.or(config.articles);
            config.scores = scores.or(config.scores);
            config.validate()?;
            let missing = |f: &str| Error::Config {
                field: f.into(),
                message: "no path given in flags or config".into(),
            };
            let a = config.articles.clone().ok_or_else(|| missing("articles"))?;
            let s = config.scores.clone().ok_or_else(|| missing("scores"))?;
            let (labeled, counts) = load_labeled(&a, &s, config.threshold)?;
            write_labeled_csv(&out, &labeled)?;
            let spammed = labeled.iter().filter(|x| x.is_spammed).count();
            println!(
                "labeled {} articles, {spammed} spammed, {} unscored",
                labeled.len(),
                counts.unscored_articles
            );
        }
        Command::Train {
            labeled,
            model,
            out,
            pipeline,
        } => {
            pipeline.apply(&mut config)?;
            config.validate()?;
            let kind: ModelKind = model.parse()?;
            let articles = read_labeled_csv(&labeled)?;
            let prepared = prepare(&articles, &config)?;
            let trained = train_model(kind, &prepared.train, &config)?;
            ModelFile {
                version: VERSION.to_string(),
                config,
                encoder: prepared.encoder,
                model: trained,
            }
            .save(&out)?;
        }
        Command::Eval {
            model,
            labeled,
            all_rows,
            out,
        } => {
            let file = ModelFile::load(&model)?;
            let articles = read_labeled_csv(&labeled)?;
            let rows = if all_rows {
                file.encoder.transform(&articles)?
            } else {
                prepare(&articles, &file.config)?.test
            };
            create_dir(&out)?;
            let evaluation = evaluate(&file.model, &rows, &out)?;
            let prevalence = rows.class_counts().1 as f64 / rows.n_rows() as f64;
            let body = serde_json::json!({
                "model": file.model.kind(),
                "rows": rows.n_rows(),
                "baseline_constant_positive_f1": constant_positive_f1(prevalence),
                "evaluation": evaluation,
            });
            write_json(&out.join(format!("eval_{}.json", file.model.kind())), &body)?;
            println!(
                "{}: positive F1 {:.4}, accuracy {:.4}, AUC {:.4}",
                file.model.kind(),
                evaluation.report.positive.f1,
                evaluation.report.accuracy,
                evaluation.auc
            );
        }
        Command::Ztest { labeled, counts, out } => {
            let result = match (counts, labeled) {
                (Some(c), _) => two_proportion_ztest(c[0], c[1], c[2], c[3])?,
                (None, Some(path)) => health_ztest(&read_labeled_csv(&path)?)?,
                (None, None) => unreachable!("clap requires --labeled or --counts"),
            };
            write_json(&out, &result)?;
            println!(
                "z = {:.4}, two-tailed p = {:e}{}",
                result.z,
                result.p_two_tailed,
                if result.underflow { " (underflow)" } else { "" }
            );
        }
        Command::Summarize { labeled, out } => {
            create_dir(&out)?;
            let articles = read_labeled_csv(&labeled)?;
            for g in summarize(&articles, &out)? {
                println!("{}: {} of {} spammed ({:.2}%)", g.key, g.n_spammed, g.n_articles, 100.0 * g.ratio);
            }
        }
        Command::Synth {
            n_articles,
            seed,
            prevalence,
            health_share,
            signal,
            out,
        } => {
            let synth = SynthConfig {
                n_articles,
                seed,
                spam_prevalence: prevalence,
                health_share,
                signal_strength: signal,
                ..SynthConfig::default()
            };
            let data = generate_dataset(&synth)?;
            write_dataset(&out, &data)?;
            println!(
                "wrote {} articles and {} users to {}",
                data.articles.len(),
                data.scores.len(),
                out.display()
            );
        }
        Command::Harvest {
            articles,
            source,
            checkpoint,
            rate_limit,
            max_attempts,
            out,
        } => {
            let records = parse_articles(&articles, ArticleFormat::from_path(&articles))?.records;
            let users: Vec<String> = records.into_iter().flat_map(|r| r.tweeter_user_ids).collect();
            let mut provider = StoreProvider::new(parse_scores(&source)?.store);
            let mut ck = HarvestCheckpoint::open(&checkpoint)?;
            let harvest = HarvestConfig {
                max_attempts,
                ..HarvestConfig::with_rate(rate_limit)
            };
            let report = harvest_scores(&users, &mut provider, &harvest, &mut ck, &SystemClock::new())?;
            for f in &report.failures {
                log::warn!("{}: gave up after {} attempts: {}", f.user_id, f.attempts, f.reason);
            }
            write_scores_csv(&out, &report.store)?;
            println!(
                "{} users scored ({} this run), {} failed",
                report.store.len(),
                report.completed_this_run,
                report.failures.len()
            );
        }
        Command::Report {
            input,
            articles,
            scores,
            out,
            pipeline,
        } => {
            pipeline.apply(&mut config)?;
            if let Some(dir) = &input {
                config.articles = Some(dir.join(ARTICLES_FILE));
                config.scores = Some(dir.join(SCORES_FILE));
            }
            config.articles = articles.or(config.articles);
            config.scores = scores.or(config.scores);
            config.out_dir = out.or(config.out_dir);
            let report = run_report(&config)?;
            let out_dir = config.out_dir.as_deref().expect("validated by run_report");
            for (kind, e) in &report.models {
                println!("{kind}: positive F1 {:.4}, AUC {:.4}", e.report.positive.f1, e.auc);
            }
            println!("wrote {} and {}", out_dir.join(REPORT_FILE).display(), out_dir.join(ZTEST_FILE).display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
