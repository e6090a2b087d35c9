//! Per-user bot scores, per-article median aggregation and the binary
//! amplification label.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{ArticleRecord, BotometerMetrics, ScoreStore, UNKNOWN};

pub const DEFAULT_THRESHOLD: f64 = 20.0;
pub const MAX_USER_SCORE: f64 = 40.0;

/// Sum of the eight metrics, in `[0, 40]`.
pub fn user_bot_score(m: &BotometerMetrics) -> f64 {
    m.to_array().iter().sum()
}

/// Median; even lengths average the two middle order statistics.
pub fn median(values: &[f64]) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::validation("median of an empty sequence"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted_median(&sorted))
}

fn sorted_median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

/// Article-level score: the median of its tweeters' user scores.
pub fn article_overall_score(scores: &[f64]) -> Result<f64> {
    median(scores)
}

/// Strictly above the threshold counts as amplified.
pub fn label_article(overall_score: f64, threshold: f64) -> bool {
    overall_score > threshold
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScoreSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
}

/// Quartiles are medians of the lower and upper halves, excluding the middle
/// element when the length is odd. A single value is its own quartiles.
pub fn score_summary(scores: &[f64]) -> Result<ScoreSummary> {
    if scores.is_empty() {
        return Err(Error::validation("summary of an empty sequence"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mean = sorted.iter().sum::<f64>() / n as f64;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64;
    let (q1, q3) = if n == 1 {
        (sorted[0], sorted[0])
    } else {
        let half = n / 2;
        (sorted_median(&sorted[..half]), sorted_median(&sorted[n - half..]))
    };
    Ok(ScoreSummary {
        count: n,
        min: sorted[0],
        max: sorted[n - 1],
        mean,
        std: var.sqrt(),
        q1,
        median: sorted_median(&sorted),
        q3,
    })
}

/// Most frequent known location; ties go to the lexicographically smallest.
/// Falls back to `unknown` only when no tweeter has a known location.
pub fn author_location(locations: &[String]) -> String {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for loc in locations.iter().map(String::as_str).filter(|l| *l != UNKNOWN && !l.is_empty()) {
        *counts.entry(loc).or_default() += 1;
    }
    // BTreeMap iterates in key order, so the first maximum is the smallest key.
    let mut best: Option<(&str, usize)> = None;
    for (loc, n) in counts {
        if best.is_none_or(|(_, b)| n > b) {
            best = Some((loc, n));
        }
    }
    best.map_or_else(|| UNKNOWN.to_string(), |(loc, _)| loc.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledArticle {
    pub altmetric_id: String,
    pub overall_score: f64,
    pub discipline: String,
    pub journal: String,
    pub research_type: String,
    pub publisher: String,
    pub altmetric_score: f64,
    pub author_location: String,
    pub is_spammed: bool,
}

#[derive(Debug, Clone, Default)]
pub struct LabelOutcome {
    pub articles: Vec<LabeledArticle>,
    /// Articles none of whose tweeters have scores.
    pub unscored: Vec<String>,
    /// Tweeter references with no entry in the score store.
    pub missing_user_refs: usize,
}

impl LabelOutcome {
    pub fn spammed(&self) -> usize {
        self.articles.iter().filter(|a| a.is_spammed).count()
    }
}

/// Scores and labels every article. Tweeters absent from `store` are skipped;
/// an article with no scored tweeter at all is reported in `unscored`.
pub fn label_articles(records: &[ArticleRecord], store: &ScoreStore, threshold: f64) -> Result<LabelOutcome> {
    if !threshold.is_finite() {
        return Err(Error::validation(format!("threshold {threshold} is not finite")));
    }
    let mut out = LabelOutcome::default();
    for r in records {
        let scores: Vec<f64> = r
            .tweeter_user_ids
            .iter()
            .filter_map(|id| store.get(id))
            .map(user_bot_score)
            .collect();
        out.missing_user_refs += r.tweeter_user_ids.len() - scores.len();
        if scores.is_empty() {
            out.unscored.push(r.altmetric_id.clone());
            continue;
        }
        let overall = article_overall_score(&scores)?;
        out.articles.push(LabeledArticle {
            altmetric_id: r.altmetric_id.clone(),
            overall_score: overall,
            discipline: r.discipline.clone(),
            journal: r.journal.clone(),
            research_type: r.research_type.clone(),
            publisher: r.publisher.clone(),
            altmetric_score: r.altmetric_score,
            author_location: author_location(&r.tweeter_locations),
            is_spammed: label_article(overall, threshold),
        });
    }
    Ok(out)
}

/// Re-applies a threshold to already-aggregated articles.
pub fn relabel(articles: &mut [LabeledArticle], threshold: f64) {
    for a in articles {
        a.is_spammed = label_article(a.overall_score, threshold);
    }
}

const LABELED_COLUMNS: [&str; 9] = [
    "altmetric_id",
    "overall_score",
    "discipline",
    "journal",
    "research_type",
    "publisher",
    "altmetric_score",
    "author_location",
    "is_spammed",
];

pub fn write_labeled_csv(path: &Path, articles: &[LabeledArticle]) -> Result<()> {
    let csv_err = |e: csv::Error| Error::Validation(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(LABELED_COLUMNS).map_err(csv_err)?;
    for a in articles {
        w.write_record([
            a.altmetric_id.as_str(),
            &a.overall_score.to_string(),
            &a.discipline,
            &a.journal,
            &a.research_type,
            &a.publisher,
            &a.altmetric_score.to_string(),
            &a.author_location,
            if a.is_spammed { "true" } else { "false" },
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_labeled_csv(path: &Path) -> Result<Vec<LabeledArticle>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::validation(format!("{}: {other:?}", path.display())),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| Error::validation(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().map(str::trim).ne(LABELED_COLUMNS) {
        return Err(Error::Schema {
            path: path.to_path_buf(),
            message: format!("expected header {}", LABELED_COLUMNS.join(",")),
        });
    }
    let mut out = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::validation(format!("{}: row {row}: {e}", path.display())))?;
        let num = |col: usize| -> Result<f64> {
            record[col].trim().parse::<f64>().map_err(|_| {
                Error::validation(format!(
                    "{}: row {row}: `{}` is not a number",
                    path.display(),
                    &record[col]
                ))
            })
        };
        let is_spammed = match record[8].trim() {
            "true" => true,
            "false" => false,
            other => {
                return Err(Error::validation(format!(
                    "{}: row {row}: is_spammed must be true/false, got `{other}`",
                    path.display()
                )))
            }
        };
        out.push(LabeledArticle {
            altmetric_id: record[0].to_string(),
            overall_score: num(1)?,
            discipline: record[2].to_string(),
            journal: record[3].to_string(),
            research_type: record[4].to_string(),
            publisher: record[5].to_string(),
            altmetric_score: num(6)?,
            author_location: record[7].to_string(),
            is_spammed,
        });
    }
    Ok(out)
}
