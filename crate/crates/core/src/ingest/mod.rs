//! Reading article and score files, and harvesting per-user scores from a
//! remote provider.

mod articles;
pub mod harvest;
mod scores;

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use articles::{
    parse_articles, select_primary_discipline, write_articles, ArticleFormat, ParsedArticles,
};
pub(crate) use articles::csv_error;
pub use scores::{parse_scores, write_scores_csv, ParsedScores};

/// Location sentinel used when a tweeter has no usable location.
pub const UNKNOWN: &str = "unknown";

/// The eight per-account metric names, in file column order.
pub const METRIC_NAMES: [&str; 8] = [
    "content",
    "language",
    "friend",
    "network",
    "sentiment",
    "temporal",
    "universal",
    "user",
];

pub const METRIC_MIN: f64 = 0.0;
pub const METRIC_MAX: f64 = 5.0;

/// One scholarly article with the accounts that tweeted it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArticleRecord {
    pub altmetric_id: String,
    pub discipline: String,
    pub journal: String,
    pub research_type: String,
    pub publisher: String,
    pub altmetric_score: f64,
    pub tweeter_user_ids: Vec<String>,
    /// Positionally aligned with `tweeter_user_ids`.
    pub tweeter_locations: Vec<String>,
}

/// Per-account bot-likeness scores, each in `[0, 5]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BotometerMetrics {
    pub content: f64,
    pub language: f64,
    pub friend: f64,
    pub network: f64,
    pub sentiment: f64,
    pub temporal: f64,
    pub universal: f64,
    pub user: f64,
}

impl BotometerMetrics {
    /// Builds metrics from values in [`METRIC_NAMES`] order, rejecting any
    /// value outside `[0, 5]`.
    pub fn from_array(values: [f64; 8]) -> Result<Self> {
        for (name, v) in METRIC_NAMES.iter().zip(values) {
            if !(METRIC_MIN..=METRIC_MAX).contains(&v) {
                return Err(Error::validation(format!(
                    "metric `{name}` = {v} outside [{METRIC_MIN}, {METRIC_MAX}]"
                )));
            }
        }
        let [content, language, friend, network, sentiment, temporal, universal, user] = values;
        Ok(Self {
            content,
            language,
            friend,
            network,
            sentiment,
            temporal,
            universal,
            user,
        })
    }

    pub fn uniform(value: f64) -> Result<Self> {
        Self::from_array([value; 8])
    }

    pub fn to_array(&self) -> [f64; 8] {
        [
            self.content,
            self.language,
            self.friend,
            self.network,
            self.sentiment,
            self.temporal,
            self.universal,
            self.user,
        ]
    }

    pub fn validate(&self) -> Result<()> {
        Self::from_array(self.to_array()).map(|_| ())
    }
}

/// User ID → metrics, iterated in user-ID order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreStore {
    entries: BTreeMap<String, BotometerMetrics>,
}

impl ScoreStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts or replaces; returns the previous entry if there was one.
    pub fn insert(&mut self, user_id: impl Into<String>, m: BotometerMetrics) -> Option<BotometerMetrics> {
        self.entries.insert(user_id.into(), m)
    }

    pub fn get(&self, user_id: &str) -> Option<&BotometerMetrics> {
        self.entries.get(user_id)
    }

    pub fn contains(&self, user_id: &str) -> bool {
        self.entries.contains_key(user_id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BotometerMetrics)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_scores_csv(path, self)
    }
}

impl FromIterator<(String, BotometerMetrics)> for ScoreStore {
    fn from_iter<I: IntoIterator<Item = (String, BotometerMetrics)>>(iter: I) -> Self {
        Self {
            entries: iter.into_iter().collect(),
        }
    }
}

/// A row that could not be turned into a record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RowReject {
    /// 1-based data row (CSV, header excluded) or line number (JSONL).
    pub row: usize,
    pub reason: String,
}
