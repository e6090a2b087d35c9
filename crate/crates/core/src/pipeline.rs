//! End-to-end orchestration: configuration, model files and the run report.
//!
//! Randomness flows from the single `seed` through per-stage derivation
//! (`split`, `upsample`, `importance`), so every stage has its own stream.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{auc, confusion, constant_positive_f1, report, roc_points, write_roc_csv, ClassificationReport, ConfusionMatrix};
use crate::features::{feature_correlation, FeatureEncoder, FeatureMatrix, FEATURE_COLUMNS};
use crate::ingest::{parse_articles, parse_scores, ArticleFormat};
use crate::learn::{
    feature_importance, knn_predict, logistic_predict, split_indices, svm_predict, train_knn, train_logistic,
    train_svm, upsample_indices, KnnModel, LogisticHyper, LogisticModel, Predictions, SplitSpec, SvmHyper,
    SvmModel, DEFAULT_BOOTSTRAP_ROUNDS, DEFAULT_K,
};
use crate::scoring::{label_articles, score_summary, write_labeled_csv, LabeledArticle, ScoreSummary, DEFAULT_THRESHOLD};
use crate::seed::derive_seed;
use crate::stats::{
    group_summaries, two_proportion_ztest, write_groups_csv, GroupKey, GroupSummary, ZTestResult, PARTITION_HEALTH,
    PARTITION_OTHER,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub const REPORT_FILE: &str = "report.json";
pub const ZTEST_FILE: &str = "ztest.json";
pub const LABELED_FILE: &str = "labeled.csv";
pub const GROUPS_FILE: &str = "groups.csv";
pub const GROUPS_LOCATION_FILE: &str = "groups_location.csv";
pub const GROUPS_HEALTH_FILE: &str = "groups_health.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Lr,
    Knn,
    Svm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Lr, ModelKind::Knn, ModelKind::Svm];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Lr => "lr",
            ModelKind::Knn => "knn",
            ModelKind::Svm => "svm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "lr" => Ok(ModelKind::Lr),
            "knn" => Ok(ModelKind::Knn),
            "svm" => Ok(ModelKind::Svm),
            other => Err(Error::config("model", format!("unknown model `{other}` (expected lr, knn or svm)"))),
        }
    }
}

/// Flat configuration. Every field has a default, so a config file may name
/// any subset of them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub articles: Option<PathBuf>,
    pub scores: Option<PathBuf>,
    /// Not echoed into reports, so runs differing only in destination match.
    #[serde(skip_serializing)]
    pub out_dir: Option<PathBuf>,
    pub threshold: f64,
    pub train_fraction: f64,
    pub stratified: bool,
    pub models: Vec<ModelKind>,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub l2: f64,
    pub k: usize,
    pub svm_step: f64,
    pub svm_epochs: usize,
    pub svm_l2: f64,
    pub resample_before_split: bool,
    pub bootstrap_rounds: usize,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lr = LogisticHyper::default();
        let svm = SvmHyper::default();
        Self {
            articles: None,
            scores: None,
            out_dir: None,
            threshold: DEFAULT_THRESHOLD,
            train_fraction: SplitSpec::default().train_fraction,
            stratified: true,
            models: ModelKind::ALL.to_vec(),
            learning_rate: lr.learning_rate,
            max_epochs: lr.max_epochs,
            tolerance: lr.tolerance,
            l2: lr.l2,
            k: DEFAULT_K,
            svm_step: svm.step,
            svm_epochs: svm.epochs,
            svm_l2: svm.l2,
            resample_before_split: false,
            bootstrap_rounds: DEFAULT_BOOTSTRAP_ROUNDS,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let field = e
                .message()
                .split('`')
                .nth(1)
                .map_or_else(|| "config".to_string(), str::to_string);
            Error::config(field, e.message().trim().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.threshold.is_finite() {
            return Err(Error::config("threshold", "must be finite"));
        }
        self.split_spec().validate()?;
        if self.models.is_empty() {
            return Err(Error::config("models", "name at least one model"));
        }
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate", "must be positive"));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::config("tolerance", "must be non-negative"));
        }
        if !(self.l2 >= 0.0) {
            return Err(Error::config("l2", "must be non-negative"));
        }
        if self.k == 0 {
            return Err(Error::config("k", "must be at least 1"));
        }
        if !(self.svm_step > 0.0) {
            return Err(Error::config("svm_step", "must be positive"));
        }
        if !(self.svm_l2 >= 0.0) {
            return Err(Error::config("svm_l2", "must be non-negative"));
        }
        if self.bootstrap_rounds == 0 {
            return Err(Error::config("bootstrap_rounds", "must be at least 1"));
        }
        Ok(())
    }

    pub fn split_spec(&self) -> SplitSpec {
        SplitSpec {
            train_fraction: self.train_fraction,
            seed: derive_seed(self.seed, "split"),
            stratified: self.stratified,
        }
    }

    pub fn logistic_hyper(&self) -> LogisticHyper {
        LogisticHyper {
            learning_rate: self.learning_rate,
            max_epochs: self.max_epochs,
            tolerance: self.tolerance,
            l2: self.l2,
        }
    }

    pub fn svm_hyper(&self) -> SvmHyper {
        SvmHyper {
            step: self.svm_step,
            epochs: self.svm_epochs,
            l2: self.svm_l2,
        }
    }

    fn required(&self, path: &Option<PathBuf>, field: &str) -> Result<PathBuf> {
        path.clone()
            .ok_or_else(|| Error::config(field, "no path given in flags or config"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InputCounts {
    pub article_rows_read: usize,
    pub article_rows_rejected: usize,
    pub score_rows_rejected: usize,
    pub duplicate_score_rows: usize,
    pub users_scored: usize,
    pub missing_user_refs: usize,
    pub unscored_articles: usize,
}

/// Reads articles and scores and labels every article that has at least one
/// scored tweeter.
pub fn load_labeled(articles: &Path, scores: &Path, threshold: f64) -> Result<(Vec<LabeledArticle>, InputCounts)> {
    let parsed_articles = parse_articles(articles, ArticleFormat::from_path(articles))?;
    for r in &parsed_articles.rejects {
        log::warn!("{}: row {}: {}", articles.display(), r.row, r.reason);
    }
    let parsed_scores = parse_scores(scores)?;
    for r in &parsed_scores.rejects {
        log::warn!("{}: row {}: {}", scores.display(), r.row, r.reason);
    }
    let outcome = label_articles(&parsed_articles.records, &parsed_scores.store, threshold)?;
    if outcome.articles.is_empty() {
        return Err(Error::validation("no article has a scored tweeter"));
    }
    let counts = InputCounts {
        article_rows_read: parsed_articles.rows_read(),
        article_rows_rejected: parsed_articles.rejects.len(),
        score_rows_rejected: parsed_scores.rejects.len(),
        duplicate_score_rows: parsed_scores.duplicates,
        users_scored: parsed_scores.store.len(),
        missing_user_refs: outcome.missing_user_refs,
        unscored_articles: outcome.unscored.len(),
    };
    Ok((outcome.articles, counts))
}

/// Encoded train and test matrices ready for fitting.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub encoder: FeatureEncoder,
    /// Training rows before upsampling.
    pub train_rows: usize,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

/// Splits, encodes and balances. By default the split comes first and only
/// the training part is upsampled, with the encoder fitted on training
/// articles. With `resample_before_split` the whole set is encoded and
/// upsampled before splitting, so duplicated rows can land on both sides.
pub fn prepare(articles: &[LabeledArticle], config: &PipelineConfig) -> Result<Prepared> {
    let labels: Vec<bool> = articles.iter().map(|a| a.is_spammed).collect();
    let upsample_seed = derive_seed(config.seed, "upsample");
    if config.resample_before_split {
        let encoder = FeatureEncoder::fit(articles)?;
        let all = encoder.transform(articles)?;
        let balanced = all.select(&upsample_indices(&labels, upsample_seed)?);
        let (train, test) = split_indices(balanced.labels(), &config.split_spec())?;
        return Ok(Prepared {
            encoder,
            train_rows: train.len(),
            train: balanced.select(&train),
            test: balanced.select(&test),
        });
    }
    let (train_idx, test_idx) = split_indices(&labels, &config.split_spec())?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| articles[i].clone()).collect::<Vec<_>>();
    let train_articles = pick(&train_idx);
    let encoder = FeatureEncoder::fit(&train_articles)?;
    let train = encoder.transform(&train_articles)?;
    let test = encoder.transform(&pick(&test_idx))?;
    let balanced = train.select(&upsample_indices(train.labels(), upsample_seed)?);
    Ok(Prepared {
        encoder,
        train_rows: train.n_rows(),
        train: balanced,
        test,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum TrainedModel {
    Lr(LogisticModel),
    Knn(KnnModel),
    Svm(SvmModel),
}

impl TrainedModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            TrainedModel::Lr(_) => ModelKind::Lr,
            TrainedModel::Knn(_) => ModelKind::Knn,
            TrainedModel::Svm(_) => ModelKind::Svm,
        }
    }

    pub fn predict(&self, rows: &FeatureMatrix) -> Result<Predictions> {
        match self {
            TrainedModel::Lr(m) => logistic_predict(m, rows),
            TrainedModel::Knn(m) => knn_predict(m, rows),
            TrainedModel::Svm(m) => svm_predict(m, rows),
        }
    }
}

pub fn train_model(kind: ModelKind, train: &FeatureMatrix, config: &PipelineConfig) -> Result<TrainedModel> {
    Ok(match kind {
        ModelKind::Lr => TrainedModel::Lr(train_logistic(train, &config.logistic_hyper())?),
        ModelKind::Knn => TrainedModel::Knn(train_knn(train, config.k)?),
        ModelKind::Svm => TrainedModel::Svm(train_svm(train, &config.svm_hyper())?),
    })
}

/// A trained model with everything needed to score new articles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub config: PipelineConfig,
    pub encoder: FeatureEncoder,
    pub model: TrainedModel,
}

impl ModelFile {
    pub fn save(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub report: ClassificationReport,
    pub auc: f64,
    pub roc_file: String,
}

/// Scores `rows` and writes the ROC points to `roc_<kind>.csv` in `out_dir`.
pub fn evaluate(model: &TrainedModel, rows: &FeatureMatrix, out_dir: &Path) -> Result<Evaluation> {
    let (scores, predicted) = model.predict(rows)?;
    let cm = confusion(rows.labels(), &predicted)?;
    let curve = roc_points(rows.labels(), &scores)?;
    let roc_file = format!("roc_{}.csv", model.kind());
    write_roc_csv(&out_dir.join(&roc_file), &curve)?;
    Ok(Evaluation {
        confusion: cm,
        report: report(&cm),
        auc: auc(&curve),
        roc_file,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetCounts {
    pub input: InputCounts,
    pub labeled: usize,
    pub spammed: usize,
    pub prevalence: f64,
    pub overall_score: ScoreSummary,
    /// `all`, `health` and `other` partitions.
    pub by_partition: Vec<GroupSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplitCounts {
    pub train_rows: usize,
    pub train_rows_upsampled: usize,
    pub test_rows: usize,
    pub test_positive: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Baseline {
    /// Positive-class F1 of flagging every test article.
    pub constant_positive_f1: f64,
    pub test_prevalence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Correlation {
    pub columns: Vec<String>,
    pub matrix: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub seed: u64,
    pub config: PipelineConfig,
    pub dataset: DatasetCounts,
    pub split: SplitCounts,
    pub baseline: Baseline,
    pub models: BTreeMap<ModelKind, Evaluation>,
    pub feature_importance: BTreeMap<String, f64>,
    pub ztest: ZTestResult,
    pub correlation: Correlation,
    pub vocabulary_fingerprints: BTreeMap<String, String>,
}

/// Health versus other disciplines.
pub fn health_ztest(articles: &[LabeledArticle]) -> Result<ZTestResult> {
    let parts = group_summaries(articles, GroupKey::HealthPartition)?;
    let find = |key: &str| {
        parts
            .iter()
            .find(|g| g.key == key)
            .ok_or_else(|| Error::validation(format!("no articles in the {key} partition")))
    };
    let (h, o) = (find(PARTITION_HEALTH)?, find(PARTITION_OTHER)?);
    two_proportion_ztest(h.n_spammed as u64, h.n_articles as u64, o.n_spammed as u64, o.n_articles as u64)
}

/// Writes `groups.csv` (by discipline), `groups_location.csv` and
/// `groups_health.csv` and returns the health partition.
pub fn summarize(articles: &[LabeledArticle], out_dir: &Path) -> Result<Vec<GroupSummary>> {
    write_groups_csv(&out_dir.join(GROUPS_FILE), &group_summaries(articles, GroupKey::Discipline)?)?;
    write_groups_csv(
        &out_dir.join(GROUPS_LOCATION_FILE),
        &group_summaries(articles, GroupKey::AuthorLocation)?,
    )?;
    let health = group_summaries(articles, GroupKey::HealthPartition)?;
    write_groups_csv(&out_dir.join(GROUPS_HEALTH_FILE), &health)?;
    Ok(health)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let json = serde_json::to_string_pretty(value).map_err(|e| Error::Numeric(e.to_string()))?;
    std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
}

/// Runs score, label, split, upsample, train, evaluate, z-test and group
/// summaries, writing every artifact, `labeled.csv` and `report.json` into
/// the output directory.
pub fn run_report(config: &PipelineConfig) -> Result<RunReport> {
    config.validate()?;
    let articles_path = config.required(&config.articles, "articles")?;
    let scores_path = config.required(&config.scores, "scores")?;
    let out_dir = config.required(&config.out_dir, "out_dir")?;
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;

    let (articles, input) = load_labeled(&articles_path, &scores_path, config.threshold)?;
    log::info!("labeled {} articles", articles.len());
    write_labeled_csv(&out_dir.join(LABELED_FILE), &articles)?;
    let report = report_from_labeled(&articles, input, config, &out_dir)?;
    write_json(&out_dir.join(REPORT_FILE), &report)?;
    Ok(report)
}

/// The part of [`run_report`] after labeling; writes every artifact except
/// `report.json`.
pub fn report_from_labeled(
    articles: &[LabeledArticle],
    input: InputCounts,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<RunReport> {
    config.validate()?;
    let spammed = articles.iter().filter(|a| a.is_spammed).count();
    let overall: Vec<f64> = articles.iter().map(|a| a.overall_score).collect();
    let by_partition = summarize(articles, out_dir)?;
    let ztest = health_ztest(articles)?;
    write_json(&out_dir.join(ZTEST_FILE), &ztest)?;

    let prepared = prepare(articles, config)?;
    log::info!(
        "split: {} train rows ({} after upsampling), {} test rows",
        prepared.train_rows,
        prepared.train.n_rows(),
        prepared.test.n_rows()
    );
    let mut models = BTreeMap::new();
    for &kind in &config.models {
        let model = train_model(kind, &prepared.train, config)?;
        let evaluation = evaluate(&model, &prepared.test, out_dir)?;
        log::info!("{kind}: positive F1 {:.4}, AUC {:.4}", evaluation.report.positive.f1, evaluation.auc);
        models.insert(kind, evaluation);
    }

    let importance = feature_importance(
        &prepared.train,
        config.bootstrap_rounds,
        derive_seed(config.seed, "importance"),
        &config.logistic_hyper(),
    )?;
    let test_positive = prepared.test.class_counts().1;
    let test_prevalence = test_positive as f64 / prepared.test.n_rows() as f64;
    let mut columns: Vec<String> = FEATURE_COLUMNS.iter().map(|c| c.to_string()).collect();
    let matrix = feature_correlation(&prepared.encoder.transform(articles)?)?;
    columns.push("is_spammed".into());

    Ok(RunReport {
        version: VERSION.to_string(),
        seed: config.seed,
        config: config.clone(),
        dataset: DatasetCounts {
            input,
            labeled: articles.len(),
            spammed,
            prevalence: spammed as f64 / articles.len() as f64,
            overall_score: score_summary(&overall)?,
            by_partition,
        },
        split: SplitCounts {
            train_rows: prepared.train_rows,
            train_rows_upsampled: prepared.train.n_rows(),
            test_rows: prepared.test.n_rows(),
            test_positive,
        },
        baseline: Baseline {
            constant_positive_f1: constant_positive_f1(test_prevalence),
            test_prevalence,
        },
        models,
        feature_importance: FEATURE_COLUMNS.iter().map(|c| c.to_string()).zip(importance).collect(),
        ztest,
        correlation: Correlation { columns, matrix },
        vocabulary_fingerprints: prepared.encoder.fingerprints(),
    })
}
