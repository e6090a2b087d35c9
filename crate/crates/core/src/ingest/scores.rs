use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::articles::csv_error;
use super::{BotometerMetrics, RowReject, ScoreStore, METRIC_NAMES};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Default)]
pub struct ParsedScores {
    pub store: ScoreStore,
    pub rejects: Vec<RowReject>,
    /// Rows whose user ID had already been seen; the later row wins.
    pub duplicates: usize,
}

/// Reads a scores file (CSV with header, or JSONL objects when the extension
/// is `.jsonl`).
pub fn parse_scores(path: &Path) -> Result<ParsedScores> {
    let jsonl = path
        .extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| e.eq_ignore_ascii_case("jsonl"));
    let rows = if jsonl {
        read_jsonl(path)?
    } else {
        read_csv(path)?
    };

    let mut parsed = ParsedScores::default();
    for (row, result) in rows {
        match result {
            Ok((user_id, metrics)) => {
                if parsed.store.insert(user_id, metrics).is_some() {
                    parsed.duplicates += 1;
                }
            }
            Err(reason) => parsed.rejects.push(RowReject { row, reason }),
        }
    }
    if parsed.duplicates > 0 {
        log::warn!(
            "{}: {} duplicate user rows, last entry kept",
            path.display(),
            parsed.duplicates
        );
    }
    Ok(parsed)
}

type ScoreRows = Vec<(usize, Result<(String, BotometerMetrics), String>)>;

fn read_csv(path: &Path) -> Result<ScoreRows> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Schema {
                path: path.to_path_buf(),
                message: format!("missing column `{name}`"),
            })
    };
    let user_col = column("user_id")?;
    let metric_cols: Vec<usize> = METRIC_NAMES.iter().map(|m| column(m)).collect::<Result<_>>()?;

    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let parsed = record
            .map_err(|e| format!("malformed CSV row: {e}"))
            .and_then(|record| {
                let user_id = record.get(user_col).unwrap_or("").trim().to_string();
                let mut values = [0.0; 8];
                for (slot, (&col, name)) in values.iter_mut().zip(metric_cols.iter().zip(METRIC_NAMES)) {
                    let raw = record.get(col).unwrap_or("").trim();
                    *slot = raw
                        .parse()
                        .map_err(|_| format!("metric `{name}` value `{raw}` is not a number"))?;
                }
                validated(user_id, values)
            });
        rows.push((row, parsed));
    }
    Ok(rows)
}

fn read_jsonl(path: &Path) -> Result<ScoreRows> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row = i + 1;
        let value: serde_json::Value = match serde_json::from_str(&line) {
            Ok(v) => v,
            Err(e) => {
                rows.push((row, Err(format!("malformed JSON: {e}"))));
                continue;
            }
        };
        let mut values = [0.0; 8];
        for (slot, name) in values.iter_mut().zip(METRIC_NAMES) {
            match value.get(name) {
                None => {
                    return Err(Error::Schema {
                        path: path.to_path_buf(),
                        message: format!("line {row}: missing metric `{name}`"),
                    })
                }
                Some(v) => *slot = v.as_f64().unwrap_or(f64::NAN),
            }
        }
        let user_id = value
            .get("user_id")
            .and_then(|v| v.as_str())
            .unwrap_or("")
            .trim()
            .to_string();
        rows.push((row, validated(user_id, values)));
    }
    Ok(rows)
}

fn validated(user_id: String, values: [f64; 8]) -> Result<(String, BotometerMetrics), String> {
    if user_id.is_empty() {
        return Err("missing user_id".to_string());
    }
    let metrics = BotometerMetrics::from_array(values).map_err(|e| e.to_string())?;
    Ok((user_id, metrics))
}

pub fn write_scores_csv(path: &Path, store: &ScoreStore) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    let mut header = vec!["user_id"];
    header.extend(METRIC_NAMES);
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (user, m) in store.iter() {
        let mut row = vec![user.to_string()];
        row.extend(m.to_array().iter().map(f64::to_string));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
