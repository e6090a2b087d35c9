use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::Deserialize;

use super::{ArticleRecord, RowReject, UNKNOWN};
use crate::error::{Error, Result};

const ARTICLE_COLUMNS: [&str; 8] = [
    "altmetric_id",
    "discipline",
    "journal",
    "research_type",
    "publisher",
    "altmetric_score",
    "tweeter_user_ids",
    "tweeter_locations",
];

const LIST_SEPARATOR: char = ';';

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArticleFormat {
    Jsonl,
    Csv,
}

impl ArticleFormat {
    /// `.csv` is CSV; anything else is treated as JSONL.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("csv") => ArticleFormat::Csv,
            _ => ArticleFormat::Jsonl,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParsedArticles {
    pub records: Vec<ArticleRecord>,
    pub rejects: Vec<RowReject>,
}

impl ParsedArticles {
    pub fn rows_read(&self) -> usize {
        self.records.len() + self.rejects.len()
    }
}

/// Reduces a multi-discipline entry to its first listed discipline.
pub fn select_primary_discipline(raw: &str) -> Result<String> {
    let primary = raw.split(LIST_SEPARATOR).next().unwrap_or("").trim();
    if primary.is_empty() {
        return Err(Error::validation(format!(
            "empty primary discipline in `{raw}`"
        )));
    }
    Ok(primary.to_string())
}

/// Field values before validation. Every field is optional so that a missing
/// field becomes a row reject instead of a parse failure.
#[derive(Debug, Default, Deserialize)]
struct RawArticle {
    altmetric_id: Option<String>,
    discipline: Option<String>,
    journal: Option<String>,
    research_type: Option<String>,
    publisher: Option<String>,
    altmetric_score: Option<f64>,
    tweeter_user_ids: Option<Vec<String>>,
    tweeter_locations: Option<Vec<String>>,
}

fn required<'a>(value: &'a Option<String>, field: &str) -> Result<&'a str, String> {
    match value.as_deref().map(str::trim) {
        Some(v) if !v.is_empty() => Ok(v),
        _ => Err(format!("missing required field `{field}`")),
    }
}

impl RawArticle {
    fn validate(self) -> Result<ArticleRecord, String> {
        let altmetric_id = required(&self.altmetric_id, "altmetric_id")?.to_string();
        let discipline = select_primary_discipline(required(&self.discipline, "discipline")?)
            .map_err(|e| e.to_string())?;
        let journal = required(&self.journal, "journal")?.to_string();
        let research_type = required(&self.research_type, "research_type")?.to_string();
        let publisher = required(&self.publisher, "publisher")?.to_string();

        let altmetric_score = self
            .altmetric_score
            .ok_or_else(|| "missing required field `altmetric_score`".to_string())?;
        if !altmetric_score.is_finite() || altmetric_score < 0.0 {
            return Err(format!("altmetric_score {altmetric_score} is not a non-negative number"));
        }

        let ids = self
            .tweeter_user_ids
            .ok_or_else(|| "missing required field `tweeter_user_ids`".to_string())?;
        let locations = self
            .tweeter_locations
            .ok_or_else(|| "missing required field `tweeter_locations`".to_string())?;
        if ids.is_empty() {
            return Err("article has no tweeters".to_string());
        }
        if ids.len() != locations.len() {
            return Err(format!(
                "{} tweeter ids but {} locations",
                ids.len(),
                locations.len()
            ));
        }
        let tweeter_user_ids = ids
            .into_iter()
            .map(|id| {
                let id = id.trim().to_string();
                if id.is_empty() {
                    Err("empty tweeter user id".to_string())
                } else {
                    Ok(id)
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let tweeter_locations = locations
            .into_iter()
            .map(|loc| match loc.trim() {
                "" => UNKNOWN.to_string(),
                l => l.to_string(),
            })
            .collect();

        Ok(ArticleRecord {
            altmetric_id,
            discipline,
            journal,
            research_type,
            publisher,
            altmetric_score,
            tweeter_user_ids,
            tweeter_locations,
        })
    }
}

/// Reads an articles file. Invalid rows are collected in `rejects`; a
/// repeated `altmetric_id` aborts the whole parse.
pub fn parse_articles(path: &Path, format: ArticleFormat) -> Result<ParsedArticles> {
    let rows = match format {
        ArticleFormat::Jsonl => read_jsonl_rows(path)?,
        ArticleFormat::Csv => read_csv_rows(path)?,
    };

    let mut parsed = ParsedArticles::default();
    let mut seen = HashSet::new();
    for (row, raw) in rows {
        match raw.and_then(RawArticle::validate) {
            Ok(record) => {
                if !seen.insert(record.altmetric_id.clone()) {
                    return Err(Error::DuplicateId(record.altmetric_id));
                }
                parsed.records.push(record);
            }
            Err(reason) => parsed.rejects.push(RowReject { row, reason }),
        }
    }
    if !parsed.rejects.is_empty() {
        log::warn!(
            "{}: rejected {} of {} rows",
            path.display(),
            parsed.rejects.len(),
            parsed.rows_read()
        );
    }
    Ok(parsed)
}

type RawRows = Vec<(usize, Result<RawArticle, String>)>;

fn read_jsonl_rows(path: &Path) -> Result<RawRows> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let raw = serde_json::from_str::<RawArticle>(&line).map_err(|e| format!("malformed JSON: {e}"));
        rows.push((i + 1, raw));
    }
    Ok(rows)
}

fn split_list(field: &str) -> Vec<String> {
    if field.is_empty() {
        Vec::new()
    } else {
        field.split(LIST_SEPARATOR).map(str::to_string).collect()
    }
}

fn read_csv_rows(path: &Path) -> Result<RawRows> {
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let index: Vec<usize> = ARTICLE_COLUMNS
        .iter()
        .map(|col| {
            headers.iter().position(|h| h.trim() == *col).ok_or_else(|| Error::Schema {
                path: path.to_path_buf(),
                message: format!("missing column `{col}`"),
            })
        })
        .collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = match record {
            Ok(r) => r,
            Err(e) => {
                rows.push((row, Err(format!("malformed CSV row: {e}"))));
                continue;
            }
        };
        let field = |col: usize| record.get(index[col]).map(str::to_string);
        let score = match field(5) {
            None => None,
            Some(s) if s.trim().is_empty() => None,
            Some(s) => match s.trim().parse::<f64>() {
                Ok(v) => Some(v),
                Err(_) => {
                    rows.push((row, Err(format!("altmetric_score `{s}` is not a number"))));
                    continue;
                }
            },
        };
        let raw = RawArticle {
            altmetric_id: field(0),
            discipline: field(1),
            journal: field(2),
            research_type: field(3),
            publisher: field(4),
            altmetric_score: score,
            tweeter_user_ids: field(6).map(|s| split_list(&s)),
            tweeter_locations: field(7).map(|s| {
                // One tweeter with an empty location still has one entry.
                if s.is_empty() && field(6).is_some_and(|ids| !ids.is_empty() && !ids.contains(LIST_SEPARATOR)) {
                    vec![String::new()]
                } else {
                    split_list(&s)
                }
            }),
        };
        rows.push((row, Ok(raw)));
    }
    Ok(rows)
}

pub(crate) fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        other => Error::Schema {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

/// Writes records in the given format, the inverse of [`parse_articles`].
pub fn write_articles(path: &Path, records: &[ArticleRecord], format: ArticleFormat) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    let io = |e| Error::io(path, e);
    match format {
        ArticleFormat::Jsonl => {
            for r in records {
                let line = serde_json::to_string(r).expect("article records always serialize");
                writeln!(out, "{line}").map_err(io)?;
            }
        }
        ArticleFormat::Csv => {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(ARTICLE_COLUMNS).map_err(|e| csv_error(path, e))?;
            for r in records {
                let score = r.altmetric_score.to_string();
                let ids = r.tweeter_user_ids.join(";");
                let locations = r.tweeter_locations.join(";");
                w.write_record([
                    r.altmetric_id.as_str(),
                    &r.discipline,
                    &r.journal,
                    &r.research_type,
                    &r.publisher,
                    &score,
                    &ids,
                    &locations,
                ])
                .map_err(|e| csv_error(path, e))?;
            }
            w.flush().map_err(io)?;
        }
    }
    out.flush().map_err(io)
}
