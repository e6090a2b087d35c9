//! Synthetic articles and tweeter scores with a known label mechanism.
//!
//! Each article is bot-amplified with probability
//! `sigmoid(intercept + sum_j w_j (x_j - 0.5) + health_shift * is_health)`,
//! where `x_j` is the encoded value of feature column `j` and `w_j` is the
//! planted weight times the signal strength. The intercept is found by
//! bisection so the share of bot-amplified articles hits the target
//! prevalence. Bot-amplified articles get a strict majority of bot tweeters,
//! others a minority, so the median tweeter score lands on the intended side
//! of the threshold.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Beta, Binomial, Distribution, Geometric, LogNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FEATURE_COLUMNS;
use crate::ingest::{write_articles, write_scores_csv, ArticleFormat, ArticleRecord, BotometerMetrics, ScoreStore, UNKNOWN};
use crate::scoring::{score_summary, user_bot_score};
use crate::seed::stage_rng;
use crate::stats::HEALTH_DISCIPLINES;

pub const ARTICLES_FILE: &str = "articles.jsonl";
pub const SCORES_FILE: &str = "scores.csv";
pub const GROUND_TRUTH_FILE: &str = "ground_truth.json";

/// Per-metric ceiling, so a user score never exceeds 8 * 4.8125 = 38.5.
const METRIC_SCALE: f64 = 4.8125;
const USER_Q3_LIMIT: f64 = 16.0;
const USER_MAX_LIMIT: f64 = 38.5;
const ALTMETRIC_MIN: f64 = 0.25;
const ALTMETRIC_MAX: f64 = 8268.56;
const TWEETS_PER_USER: f64 = 3.0;
const EMPTY_LOCATION_SHARE: f64 = 0.2;
/// Chance that a tweeter on an ordinary article is a bot.
const BACKGROUND_BOT_SHARE: f64 = 0.2;

const OTHER_DISCIPLINES: [&str; 15] = [
    "Agricultural and Biological Sciences",
    "Arts and Humanities",
    "Business, Management and Accounting",
    "Chemical Engineering",
    "Chemistry",
    "Computer Science",
    "Earth and Planetary Sciences",
    "Economics, Econometrics and Finance",
    "Energy",
    "Engineering",
    "Environmental Science",
    "Materials Science",
    "Mathematics",
    "Physics and Astronomy",
    "Social Sciences",
];
const RESEARCH_TYPES: [&str; 5] = ["article", "book-chapter", "editorial", "letter", "review"];
const N_JOURNALS: usize = 40;
const N_PUBLISHERS: usize = 12;
const LOCATIONS: [(&str, f64); 10] = [
    ("Australia", 0.05),
    ("Brazil", 0.04),
    ("Canada", 0.06),
    ("China", 0.04),
    ("France", 0.04),
    ("Germany", 0.05),
    ("India", 0.07),
    ("Japan", 0.05),
    ("United Kingdom", 0.2),
    ("United States", 0.4),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub n_articles: usize,
    pub seed: u64,
    pub spam_prevalence: f64,
    pub health_share: f64,
    pub altmetric_mean: f64,
    pub altmetric_sd: f64,
    pub mean_tweets: f64,
    pub signal_strength: f64,
    /// Weights per feature column at signal strength 1.
    pub planted_weights: [f64; 6],
    /// Log-odds boost for health articles, independent of the signal.
    pub health_shift: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_articles: 10_000,
            seed: 0,
            spam_prevalence: 0.1443,
            health_share: 0.8427,
            altmetric_mean: 114.61,
            altmetric_sd: 326.36,
            mean_tweets: 7.0,
            signal_strength: 1.0,
            planted_weights: [0.0, 8.0, -4.0, 0.0, 0.0, 0.0],
            health_shift: 0.25,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: String| Err(Error::config(field, msg));
        if self.n_articles < 10 {
            return bad("n_articles", format!("must be at least 10, got {}", self.n_articles));
        }
        for (field, v) in [("spam_prevalence", self.spam_prevalence), ("health_share", self.health_share)] {
            if !(v > 0.0 && v < 1.0) {
                return bad(field, format!("must lie strictly between 0 and 1, got {v}"));
            }
        }
        if !(self.altmetric_mean > 0.0) || !(self.altmetric_sd > 0.0) {
            return bad("altmetric_mean", "mean and sd must be positive".into());
        }
        if !(self.mean_tweets >= 1.0) || !self.mean_tweets.is_finite() {
            return bad("mean_tweets", format!("must be at least 1, got {}", self.mean_tweets));
        }
        if !(self.signal_strength >= 0.0) || !self.signal_strength.is_finite() {
            return bad("signal_strength", format!("must be finite and non-negative, got {}", self.signal_strength));
        }
        if self.planted_weights.iter().any(|w| !w.is_finite()) || !self.health_shift.is_finite() {
            return bad("planted_weights", "weights must be finite".into());
        }
        // Author location is derived from the tweeters after labeling.
        if self.planted_weights[5] != 0.0 {
            return bad("planted_weights", "the author_location weight must be 0".into());
        }
        Ok(())
    }

    /// Log-normal `(mu, sigma)` with the configured mean and sd.
    pub fn lognormal_params(&self) -> (f64, f64) {
        let var = (1.0 + (self.altmetric_sd / self.altmetric_mean).powi(2)).ln();
        (self.altmetric_mean.ln() - var / 2.0, var.sqrt())
    }
}

/// The label mechanism actually used, plus realized statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub columns: Vec<String>,
    /// Effective weights: planted weights times signal strength.
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub centre: f64,
    pub health_shift: f64,
    pub intended_prevalence: f64,
    pub health_share: f64,
    pub n_users: usize,
    pub user_score_q3: f64,
    pub user_score_max: f64,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub articles: Vec<ArticleRecord>,
    pub scores: ScoreStore,
    pub truth: GroundTruth,
}

struct Skeleton {
    discipline: String,
    health: bool,
    journal: usize,
    research_type: usize,
    publisher: usize,
    altmetric_score: f64,
    tweets: usize,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Encoded position of category `i` among `n` plus the always-present
/// unknown category, which sorts last for every generated vocabulary.
fn encoded(i: usize, n: usize) -> f64 {
    i as f64 / n as f64
}

fn discipline_code(d: &str) -> f64 {
    let mut all: Vec<&str> = HEALTH_DISCIPLINES.iter().chain(&OTHER_DISCIPLINES).copied().collect();
    all.sort_unstable();
    encoded(all.iter().position(|x| *x == d).expect("generated discipline"), all.len())
}

/// Smallest intercept whose count of `u < sigmoid(intercept + base)` reaches
/// `target`. The count is monotone in the intercept for fixed draws.
fn calibrate_intercept(base: &[f64], u: &[f64], target: usize) -> f64 {
    let count = |a: f64| base.iter().zip(u).filter(|(b, u)| **u < sigmoid(a + **b)).count();
    let (mut lo, mut hi) = (-60.0, 60.0);
    for _ in 0..200 {
        let mid = (lo + hi) / 2.0;
        if count(mid) >= target {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

fn user_metrics(rng: &mut impl Rng, beta: &Beta<f64>) -> BotometerMetrics {
    let mut values = [0.0; 8];
    for v in values.iter_mut() {
        *v = (METRIC_SCALE * beta.sample(rng) * 100.0).round() / 100.0;
    }
    BotometerMetrics::from_array(values).expect("metrics are inside [0, 5] by construction")
}

pub fn generate_dataset(config: &SynthConfig) -> Result<SynthDataset> {
    config.validate()?;
    let n = config.n_articles;
    let mut rng = stage_rng(config.seed, "synth");
    let (mu, sigma) = config.lognormal_params();
    let altmetric = LogNormal::new(mu, sigma).map_err(|e| Error::config("altmetric_sd", e.to_string()))?;
    let tweets = Geometric::new(1.0 / config.mean_tweets).map_err(|e| Error::config("mean_tweets", e.to_string()))?;

    let n_health = (config.health_share * n as f64).round() as usize;
    let mut health_flags: Vec<bool> = (0..n).map(|i| i < n_health).collect();
    health_flags.shuffle(&mut rng);

    let skeletons: Vec<Skeleton> = health_flags
        .iter()
        .map(|&health| {
            let pool: &[&str] = if health { &HEALTH_DISCIPLINES } else { &OTHER_DISCIPLINES };
            let journal = rng.random_range(0..N_JOURNALS);
            Skeleton {
                discipline: pool[rng.random_range(0..pool.len())].to_string(),
                health,
                journal,
                research_type: rng.random_range(0..RESEARCH_TYPES.len()),
                publisher: if rng.random_bool(0.8) {
                    journal % N_PUBLISHERS
                } else {
                    rng.random_range(0..N_PUBLISHERS)
                },
                altmetric_score: (altmetric.sample(&mut rng).clamp(ALTMETRIC_MIN, ALTMETRIC_MAX) * 100.0).round() / 100.0,
                tweets: 1 + tweets.sample(&mut rng) as usize,
            }
        })
        .collect();

    let weights: Vec<f64> = config.planted_weights.iter().map(|w| w * config.signal_strength).collect();
    let base: Vec<f64> = skeletons
        .iter()
        .map(|s| {
            let x = [
                discipline_code(&s.discipline),
                encoded(s.journal, N_JOURNALS),
                encoded(s.research_type, RESEARCH_TYPES.len()),
                encoded(s.publisher, N_PUBLISHERS),
                (s.altmetric_score - ALTMETRIC_MIN) / (ALTMETRIC_MAX - ALTMETRIC_MIN),
            ];
            let linear: f64 = weights.iter().zip(x).map(|(w, x)| w * (x - 0.5)).sum();
            linear + if s.health { config.health_shift } else { 0.0 }
        })
        .collect();
    let u: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let target = (config.spam_prevalence * n as f64).round().max(1.0) as usize;
    let intercept = calibrate_intercept(&base, &u, target);
    let amplified: Vec<bool> = base.iter().zip(&u).map(|(b, u)| *u < sigmoid(intercept + b)).collect();

    // Bot or human for every tweet slot.
    let slots: Vec<Vec<bool>> = skeletons
        .iter()
        .zip(&amplified)
        .map(|(s, &amp)| {
            let t = s.tweets;
            let n_bots = if amp {
                let majority = t / 2 + 1;
                majority + binomial(&mut rng, (t - majority) as u64, 0.5)
            } else {
                binomial(&mut rng, ((t - 1) / 2) as u64, BACKGROUND_BOT_SHARE)
            };
            let mut v: Vec<bool> = (0..t).map(|i| i < n_bots).collect();
            v.shuffle(&mut rng);
            v
        })
        .collect();

    let bot_tweets: usize = slots.iter().flatten().filter(|&&b| b).count();
    let human_tweets: usize = slots.iter().map(Vec::len).sum::<usize>() - bot_tweets;
    let n_bot_users = ((bot_tweets as f64 / TWEETS_PER_USER).ceil() as usize).max(1);
    let n_human_users = ((human_tweets as f64 / TWEETS_PER_USER).ceil() as usize).max(1);
    let n_users = n_bot_users + n_human_users;

    // Opaque ids: a shuffled numbering hides which pool a user came from.
    let mut ids: Vec<usize> = (0..n_users).collect();
    ids.shuffle(&mut rng);
    let width = n_users.to_string().len().max(6);
    let user_id = |k: usize| format!("u{:0width$}", ids[k]);
    let human_beta = Beta::new(2.0, 6.0).expect("valid beta");
    let bot_beta = Beta::new(6.0, 2.0).expect("valid beta");
    let cumulative: Vec<f64> = LOCATIONS
        .iter()
        .scan(0.0, |acc, (_, w)| {
            *acc += w;
            Some(*acc)
        })
        .collect();
    let mut locations = Vec::with_capacity(n_users);
    let mut store = ScoreStore::new();
    let mut user_scores = Vec::with_capacity(n_users);
    for k in 0..n_users {
        let beta = if k < n_bot_users { &bot_beta } else { &human_beta };
        let m = user_metrics(&mut rng, beta);
        user_scores.push(user_bot_score(&m));
        store.insert(user_id(k), m);
        let location = if rng.random_bool(EMPTY_LOCATION_SHARE) {
            UNKNOWN
        } else {
            let r = rng.random::<f64>() * cumulative[cumulative.len() - 1];
            LOCATIONS[cumulative.iter().position(|c| r < *c).unwrap_or(LOCATIONS.len() - 1)].0
        };
        locations.push(location);
    }

    let summary = score_summary(&user_scores)?;
    if summary.q3 >= USER_Q3_LIMIT {
        return Err(Error::Infeasible {
            target: format!("user score 75th percentile < {USER_Q3_LIMIT}"),
            detail: format!(
                "prevalence {} needs {} bot accounts of {n_users}, giving a 75th percentile of {:.2}",
                config.spam_prevalence, n_bot_users, summary.q3
            ),
        });
    }
    if summary.max > USER_MAX_LIMIT {
        return Err(Error::Infeasible {
            target: format!("user score max <= {USER_MAX_LIMIT}"),
            detail: format!("maximum {}", summary.max),
        });
    }

    let articles: Vec<ArticleRecord> = skeletons
        .iter()
        .zip(&slots)
        .enumerate()
        .map(|(i, (s, slots))| {
            let users: Vec<usize> = slots
                .iter()
                .map(|&bot| {
                    if bot {
                        rng.random_range(0..n_bot_users)
                    } else {
                        n_bot_users + rng.random_range(0..n_human_users)
                    }
                })
                .collect();
            ArticleRecord {
                altmetric_id: format!("{}", 1_000_000 + i),
                discipline: s.discipline.clone(),
                journal: format!("Journal {:02}", s.journal),
                research_type: RESEARCH_TYPES[s.research_type].to_string(),
                publisher: format!("Publisher {:02}", s.publisher),
                altmetric_score: s.altmetric_score,
                tweeter_user_ids: users.iter().map(|&k| user_id(k)).collect(),
                tweeter_locations: users.iter().map(|&k| locations[k].to_string()).collect(),
            }
        })
        .collect();

    Ok(SynthDataset {
        articles,
        scores: store,
        truth: GroundTruth {
            columns: FEATURE_COLUMNS.iter().map(|c| c.to_string()).collect(),
            weights,
            intercept,
            centre: 0.5,
            health_shift: config.health_shift,
            intended_prevalence: amplified.iter().filter(|&&a| a).count() as f64 / n as f64,
            health_share: n_health as f64 / n as f64,
            n_users,
            user_score_q3: summary.q3,
            user_score_max: summary.max,
        },
    })
}

fn binomial(rng: &mut impl Rng, n: u64, p: f64) -> usize {
    if n == 0 {
        return 0;
    }
    Binomial::new(n, p).expect("valid binomial").sample(rng) as usize
}

/// Writes the ingest formats plus `ground_truth.json` into `dir`.
pub fn write_dataset(dir: &Path, data: &SynthDataset) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_articles(&dir.join(ARTICLES_FILE), &data.articles, ArticleFormat::Jsonl)?;
    write_scores_csv(&dir.join(SCORES_FILE), &data.scores)?;
    let path = dir.join(GROUND_TRUTH_FILE);
    let json = serde_json::to_string_pretty(&data.truth).expect("ground truth serializes");
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(path, e))
}
