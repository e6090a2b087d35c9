//! Numeric encoding of labeled articles.
//!
//! Categorical columns are label-encoded by sorted category order and scaled
//! to `[0, 1]`; the Altmetric score is min-max normalized with bounds learned
//! from training data. The result is a six-column design matrix in the order
//! of [`FEATURE_COLUMNS`].

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::UNKNOWN;
use crate::scoring::LabeledArticle;

pub const FEATURE_COLUMNS: [&str; 6] = [
    "discipline",
    "journal",
    "research_type",
    "publisher",
    "altmetric_score",
    "author_location",
];

/// Index of the Altmetric score in [`FEATURE_COLUMNS`].
pub const ALTMETRIC_COLUMN: usize = 4;

/// The categorical columns, in [`FEATURE_COLUMNS`] order.
pub const CATEGORICAL_COLUMNS: [&str; 5] = [
    "discipline",
    "journal",
    "research_type",
    "publisher",
    "author_location",
];

fn categorical_value<'a>(a: &'a LabeledArticle, column: &str) -> &'a str {
    match column {
        "discipline" => &a.discipline,
        "journal" => &a.journal,
        "research_type" => &a.research_type,
        "publisher" => &a.publisher,
        "author_location" => &a.author_location,
        other => unreachable!("not a categorical column: {other}"),
    }
}

/// Category → integer code, codes assigned in lexicographic category order.
/// Always contains [`UNKNOWN`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vocabulary {
    pub feature: String,
    pub codes: BTreeMap<String, usize>,
}

pub fn build_vocabulary<'a>(feature: &str, values: impl IntoIterator<Item = &'a str>) -> Vocabulary {
    let mut categories: BTreeMap<String, usize> = values.into_iter().map(|v| (v.to_string(), 0)).collect();
    categories.entry(UNKNOWN.to_string()).or_default();
    for (code, slot) in categories.values_mut().enumerate() {
        *slot = code;
    }
    Vocabulary {
        feature: feature.to_string(),
        codes: categories,
    }
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.codes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codes.is_empty()
    }

    pub fn code(&self, value: &str) -> usize {
        match self.codes.get(value) {
            Some(&c) => c,
            None => self.codes[UNKNOWN],
        }
    }

    /// `code / (n - 1)`; a one-category vocabulary encodes everything as 0.
    pub fn encode(&self, value: &str) -> f64 {
        let n = self.codes.len();
        if n <= 1 {
            return 0.0;
        }
        self.code(value) as f64 / (n - 1) as f64
    }

    /// SHA-256 over the sorted category list, hex encoded.
    pub fn fingerprint(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.feature.as_bytes());
        for (category, code) in &self.codes {
            hasher.update([0u8]);
            hasher.update(category.as_bytes());
            hasher.update(code.to_le_bytes());
        }
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

pub fn encode_categorical<'a>(values: impl IntoIterator<Item = &'a str>, vocab: &Vocabulary) -> Vec<f64> {
    values.into_iter().map(|v| vocab.encode(v)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MinMaxFit {
    pub min: f64,
    pub max: f64,
}

impl MinMaxFit {
    pub fn learn(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::validation("cannot fit min-max bounds on no values"));
        }
        let (min, max) = values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
        if !(min.is_finite() && max.is_finite()) {
            return Err(Error::validation("non-finite value in min-max fit"));
        }
        Ok(Self { min, max })
    }

    /// Maps into `[0, 1]`, clipping values outside the fitted range. A
    /// constant fit maps everything to 0.
    pub fn apply(&self, x: f64) -> f64 {
        if self.max == self.min {
            return 0.0;
        }
        ((x - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
    }
}

/// Normalizes `values`, learning the bounds from them when `fit` is `None`.
pub fn normalize_minmax(values: &[f64], fit: Option<MinMaxFit>) -> Result<(Vec<f64>, MinMaxFit)> {
    if values.is_empty() {
        return Err(Error::validation("cannot normalize an empty sequence"));
    }
    let fit = match fit {
        Some(f) if f.max < f.min || !f.min.is_finite() || !f.max.is_finite() => {
            return Err(Error::validation(format!(
                "invalid min-max fit ({}, {})",
                f.min, f.max
            )))
        }
        Some(f) => f,
        None => MinMaxFit::learn(values)?,
    };
    Ok((values.iter().map(|&x| fit.apply(x)).collect(), fit))
}

/// Dense row-major matrix with a boolean label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    columns: Vec<String>,
    data: Vec<f64>,
    labels: Vec<bool>,
}

impl FeatureMatrix {
    pub fn new(columns: Vec<String>, data: Vec<f64>, labels: Vec<bool>) -> Result<Self> {
        if columns.is_empty() {
            return Err(Error::validation("feature matrix needs at least one column"));
        }
        if data.len() != columns.len() * labels.len() {
            return Err(Error::validation(format!(
                "{} values do not fill {} rows of {} columns",
                data.len(),
                labels.len(),
                columns.len()
            )));
        }
        Ok(Self {
            columns,
            data,
            labels,
        })
    }

    /// Builds a matrix with generic column names `x0, x1, ...`.
    pub fn from_rows(rows: &[Vec<f64>], labels: &[bool]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, Vec::len);
        if rows.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} rows but {} labels",
                rows.len(),
                labels.len()
            )));
        }
        if rows.iter().any(|r| r.len() != n_cols) {
            return Err(Error::validation("ragged rows"));
        }
        let columns = (0..n_cols).map(|i| format!("x{i}")).collect();
        Self::new(columns, rows.concat(), labels.to_vec())
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        &self.data[i * c..(i + 1) * c]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.n_cols())
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// `(negatives, positives)`.
    pub fn class_counts(&self) -> (usize, usize) {
        let pos = self.labels.iter().filter(|&&l| l).count();
        (self.labels.len() - pos, pos)
    }

    /// Rows at `indices`, in that order; indices may repeat.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(indices.len() * self.n_cols());
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            columns: self.columns.clone(),
            data,
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
        }
    }

    pub fn ensure_columns(&self, expected: usize) -> Result<()> {
        if self.n_cols() != expected {
            return Err(Error::validation(format!(
                "model expects {expected} columns, matrix has {}",
                self.n_cols()
            )));
        }
        Ok(())
    }
}

/// One vocabulary per categorical column plus the Altmetric-score bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoder {
    pub vocabularies: Vec<Vocabulary>,
    pub altmetric_fit: MinMaxFit,
}

impl FeatureEncoder {
    pub fn fit(articles: &[LabeledArticle]) -> Result<Self> {
        if articles.is_empty() {
            return Err(Error::validation("cannot fit an encoder on no articles"));
        }
        let vocabularies = CATEGORICAL_COLUMNS
            .iter()
            .map(|col| build_vocabulary(col, articles.iter().map(|a| categorical_value(a, col))))
            .collect();
        let scores: Vec<f64> = articles.iter().map(|a| a.altmetric_score).collect();
        Ok(Self {
            vocabularies,
            altmetric_fit: MinMaxFit::learn(&scores)?,
        })
    }

    pub fn transform(&self, articles: &[LabeledArticle]) -> Result<FeatureMatrix> {
        assemble_features(articles, &self.vocabularies, Some(self.altmetric_fit)).map(|(m, _)| m)
    }

    /// `{column: {category: code}}` for audit export.
    pub fn vocabulary_export(&self) -> BTreeMap<String, BTreeMap<String, usize>> {
        self.vocabularies
            .iter()
            .map(|v| (v.feature.clone(), v.codes.clone()))
            .collect()
    }

    pub fn fingerprints(&self) -> BTreeMap<String, String> {
        self.vocabularies
            .iter()
            .map(|v| (v.feature.clone(), v.fingerprint()))
            .collect()
    }
}

/// Encodes articles into the six-column design matrix. `vocabs` must be in
/// [`CATEGORICAL_COLUMNS`] order.
pub fn assemble_features(
    articles: &[LabeledArticle],
    vocabs: &[Vocabulary],
    fit: Option<MinMaxFit>,
) -> Result<(FeatureMatrix, MinMaxFit)> {
    if articles.is_empty() {
        return Err(Error::validation("no articles to encode"));
    }
    if vocabs.len() != CATEGORICAL_COLUMNS.len()
        || vocabs.iter().zip(CATEGORICAL_COLUMNS).any(|(v, c)| v.feature != c)
    {
        return Err(Error::validation(format!(
            "expected vocabularies for {}",
            CATEGORICAL_COLUMNS.join(", ")
        )));
    }
    let scores: Vec<f64> = articles.iter().map(|a| a.altmetric_score).collect();
    let (normalized, fit) = normalize_minmax(&scores, fit)?;

    let mut data = Vec::with_capacity(articles.len() * FEATURE_COLUMNS.len());
    for (a, &score) in articles.iter().zip(&normalized) {
        data.push(vocabs[0].encode(&a.discipline));
        data.push(vocabs[1].encode(&a.journal));
        data.push(vocabs[2].encode(&a.research_type));
        data.push(vocabs[3].encode(&a.publisher));
        data.push(score);
        data.push(vocabs[4].encode(&a.author_location));
    }
    let columns = FEATURE_COLUMNS.iter().map(|c| c.to_string()).collect();
    let labels = articles.iter().map(|a| a.is_spammed).collect();
    Ok((FeatureMatrix::new(columns, data, labels)?, fit))
}

/// Pearson correlation; 0 when either input is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let constant = |v: &[f64]| v.iter().all(|&a| a == v[0]);
    if x.is_empty() || constant(x) || constant(y) {
        return 0.0;
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (&a, &b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0)
}

/// Correlations among every feature column plus the label (as 0/1), label
/// last. Symmetric with an exact unit diagonal.
pub fn feature_correlation(matrix: &FeatureMatrix) -> Result<Vec<Vec<f64>>> {
    if matrix.n_rows() < 2 {
        return Err(Error::validation("correlation needs at least two rows"));
    }
    let mut variables: Vec<Vec<f64>> = (0..matrix.n_cols()).map(|j| matrix.column(j)).collect();
    variables.push(matrix.labels().iter().map(|&l| if l { 1.0 } else { 0.0 }).collect());

    let k = variables.len();
    let mut corr = vec![vec![0.0; k]; k];
    for i in 0..k {
        corr[i][i] = 1.0;
        for j in i + 1..k {
            let r = pearson(&variables[i], &variables[j]);
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }
    Ok(corr)
}
