//! Rate-limited, resumable collection of per-user scores.
//!
//! The harvester asks a [`ScoreProvider`] for each user that is not yet in the
//! [`HarvestCheckpoint`], paces requests through a [`RateLimiter`] driven by an
//! abstract [`Clock`], and appends every success to the checkpoint before
//! counting it as done. Killing the process at any point and re-running with
//! the same checkpoint yields the same final store.

use std::cell::Cell;
use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::{BotometerMetrics, ScoreStore};
use crate::error::{Error, Result};

pub trait Clock {
    /// Time elapsed since the clock's origin.
    fn now(&self) -> Duration;
    fn sleep(&self, d: Duration);
}

/// Wall-clock time measured from construction.
#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }

    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

/// Simulated time: `sleep` advances the clock instantly.
#[derive(Debug, Default)]
pub struct MockClock {
    now: Cell<Duration>,
}

impl MockClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, d: Duration) {
        self.now.set(self.now.get() + d);
    }
}

impl Clock for MockClock {
    fn now(&self) -> Duration {
        self.now.get()
    }

    fn sleep(&self, d: Duration) {
        self.advance(d);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProviderError {
    /// Transient failure (throttling, timeouts); the request may be repeated.
    Retryable(String),
    Permanent(String),
}

pub trait ScoreProvider {
    fn fetch(&mut self, user_id: &str) -> std::result::Result<BotometerMetrics, ProviderError>;
}

/// Serves scores from an in-memory store; unknown users fail permanently.
/// Used to replay a scores file as if it were the remote service.
#[derive(Debug, Clone)]
pub struct StoreProvider {
    store: ScoreStore,
}

impl StoreProvider {
    pub fn new(store: ScoreStore) -> Self {
        Self { store }
    }
}

impl ScoreProvider for StoreProvider {
    fn fetch(&mut self, user_id: &str) -> std::result::Result<BotometerMetrics, ProviderError> {
        self.store
            .get(user_id)
            .copied()
            .ok_or_else(|| ProviderError::Permanent(format!("no scores for user `{user_id}`")))
    }
}

/// Spaces requests at least `1 / limit` seconds apart, so any half-open
/// one-second window holds at most `ceil(limit)` requests.
#[derive(Debug, Clone)]
pub struct RateLimiter {
    interval: Duration,
    next_slot: Option<Duration>,
}

impl RateLimiter {
    pub fn new(limit_per_sec: f64) -> Result<Self> {
        if !(limit_per_sec.is_finite() && limit_per_sec > 0.0) {
            return Err(Error::validation(format!(
                "rate limit must be a positive number, got {limit_per_sec}"
            )));
        }
        // Round the spacing up so the realised rate never exceeds the limit.
        let nanos = (1e9 / limit_per_sec).ceil().max(1.0) as u64;
        Ok(Self {
            interval: Duration::from_nanos(nanos),
            next_slot: None,
        })
    }

    pub fn interval(&self) -> Duration {
        self.interval
    }

    /// Blocks on `clock` until a request may be issued; returns the issue time.
    pub fn acquire(&mut self, clock: &dyn Clock) -> Duration {
        let now = clock.now();
        let issue_at = match self.next_slot {
            Some(slot) if slot > now => {
                clock.sleep(slot - now);
                slot
            }
            _ => now,
        };
        self.next_slot = Some(issue_at + self.interval);
        issue_at
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointEntry {
    user_id: String,
    #[serde(flatten)]
    metrics: BotometerMetrics,
}

/// Append-only JSONL log of completed users.
#[derive(Debug)]
pub struct HarvestCheckpoint {
    path: PathBuf,
    writer: BufWriter<File>,
    completed: ScoreStore,
}

impl HarvestCheckpoint {
    /// Opens (or creates) a checkpoint and replays its entries. A trailing
    /// line without a newline is an interrupted write and is discarded.
    pub fn open(path: &Path) -> Result<Self> {
        let mut file = OpenOptions::new()
            .read(true)
            .append(true)
            .create(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        let mut contents = String::new();
        file.read_to_string(&mut contents)
            .map_err(|e| Error::io(path, e))?;

        let complete_len = contents.rfind('\n').map_or(0, |i| i + 1);
        if complete_len < contents.len() {
            log::warn!(
                "{}: discarding {} bytes of an unfinished entry",
                path.display(),
                contents.len() - complete_len
            );
            file.set_len(complete_len as u64)
                .map_err(|e| Error::io(path, e))?;
        }

        let mut completed = ScoreStore::new();
        for (i, line) in contents[..complete_len].lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let entry: CheckpointEntry = serde_json::from_str(line).map_err(|e| {
                Error::Checkpoint(format!("{}: line {}: {e}", path.display(), i + 1))
            })?;
            entry.metrics.validate().map_err(|e| {
                Error::Checkpoint(format!("{}: line {}: {e}", path.display(), i + 1))
            })?;
            completed.insert(entry.user_id, entry.metrics);
        }

        Ok(Self {
            path: path.to_path_buf(),
            writer: BufWriter::new(file),
            completed,
        })
    }

    /// Reads a checkpoint without keeping it open.
    pub fn replay(path: &Path) -> Result<ScoreStore> {
        Ok(Self::open(path)?.completed)
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn completed(&self) -> &ScoreStore {
        &self.completed
    }

    pub fn is_complete(&self, user_id: &str) -> bool {
        self.completed.contains(user_id)
    }

    /// Appends one entry and flushes it to the OS before returning.
    pub fn append(&mut self, user_id: &str, metrics: BotometerMetrics) -> Result<()> {
        let entry = CheckpointEntry {
            user_id: user_id.to_string(),
            metrics,
        };
        let line = serde_json::to_string(&entry).expect("checkpoint entries always serialize");
        let fail = |e: std::io::Error| Error::Checkpoint(format!("{}: {e}", self.path.display()));
        writeln!(self.writer, "{line}").map_err(fail)?;
        self.writer.flush().map_err(fail)?;
        self.completed.insert(entry.user_id, metrics);
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct HarvestConfig {
    /// Requests per second.
    pub rate_limit: f64,
    pub max_attempts: u32,
    pub initial_backoff: Duration,
    pub backoff_factor: u32,
    /// Stop after this many new users have completed (a per-run quota).
    pub stop_after: Option<usize>,
}

impl HarvestConfig {
    pub fn with_rate(rate_limit: f64) -> Self {
        Self {
            rate_limit,
            ..Self::default()
        }
    }
}

impl Default for HarvestConfig {
    fn default() -> Self {
        Self {
            rate_limit: 1.0,
            max_attempts: 5,
            initial_backoff: Duration::from_secs(1),
            backoff_factor: 2,
            stop_after: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HarvestFailure {
    pub user_id: String,
    pub attempts: u32,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct HarvestReport {
    /// Checkpoint contents after the run: earlier entries plus new ones.
    pub store: ScoreStore,
    pub failures: Vec<HarvestFailure>,
    pub requests_issued: usize,
    pub completed_this_run: usize,
    /// True when the run stopped early because of `stop_after`.
    pub interrupted: bool,
    pub finished_at: Duration,
}

/// Queries every user missing from `checkpoint`, exactly once successfully.
pub fn harvest_scores<P: ScoreProvider + ?Sized>(
    user_ids: &[String],
    provider: &mut P,
    config: &HarvestConfig,
    checkpoint: &mut HarvestCheckpoint,
    clock: &dyn Clock,
) -> Result<HarvestReport> {
    if config.max_attempts == 0 {
        return Err(Error::validation("max_attempts must be at least 1"));
    }
    let mut limiter = RateLimiter::new(config.rate_limit)?;

    let mut seen = HashSet::new();
    let pending: Vec<&str> = user_ids
        .iter()
        .map(String::as_str)
        .filter(|id| seen.insert(*id) && !checkpoint.is_complete(id))
        .collect();

    let mut failures = Vec::new();
    let mut requests_issued = 0;
    let mut completed_this_run = 0;
    let mut interrupted = false;

    for user_id in pending {
        if config.stop_after.is_some_and(|n| completed_this_run >= n) {
            interrupted = true;
            break;
        }
        let mut backoff = config.initial_backoff;
        let mut attempt = 0;
        loop {
            attempt += 1;
            limiter.acquire(clock);
            requests_issued += 1;
            match provider.fetch(user_id) {
                Ok(metrics) => {
                    if let Err(e) = metrics.validate() {
                        failures.push(HarvestFailure {
                            user_id: user_id.to_string(),
                            attempts: attempt,
                            reason: e.to_string(),
                        });
                        break;
                    }
                    checkpoint.append(user_id, metrics)?;
                    completed_this_run += 1;
                    break;
                }
                Err(ProviderError::Retryable(reason)) if attempt < config.max_attempts => {
                    log::debug!("retrying {user_id} after {backoff:?}: {reason}");
                    clock.sleep(backoff);
                    backoff *= config.backoff_factor;
                }
                Err(ProviderError::Retryable(reason) | ProviderError::Permanent(reason)) => {
                    failures.push(HarvestFailure {
                        user_id: user_id.to_string(),
                        attempts: attempt,
                        reason,
                    });
                    break;
                }
            }
        }
    }

    Ok(HarvestReport {
        store: checkpoint.completed().clone(),
        failures,
        requests_issued,
        completed_this_run,
        interrupted,
        finished_at: clock.now(),
    })
}
