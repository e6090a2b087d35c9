//! Group ratios and medians, the health-discipline partition and the pooled
//! two-proportion z-test.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scoring::{median, LabeledArticle};

pub const HEALTH_DISCIPLINES: [&str; 12] = [
    "Biochemistry",
    "Genetics and Molecular Biology",
    "Medicine",
    "Life Sciences",
    "Health Sciences",
    "Psychology",
    "Dentistry",
    "Health Professions",
    "Nursing",
    "Pharmacology, Toxicology, and Pharmaceutics",
    "Immunology and Microbiology",
    "Neuroscience",
];

/// Case-insensitive, whitespace-trimmed membership in [`HEALTH_DISCIPLINES`].
pub fn is_health_discipline(discipline: &str) -> bool {
    let d = discipline.trim();
    HEALTH_DISCIPLINES.iter().any(|h| h.eq_ignore_ascii_case(d))
}

/// What group statistics need from an article.
pub trait GroupItem {
    fn discipline(&self) -> &str;
    fn author_location(&self) -> &str;
    fn overall_score(&self) -> f64;
    fn is_spammed(&self) -> bool;
}

impl GroupItem for LabeledArticle {
    fn discipline(&self) -> &str {
        &self.discipline
    }
    fn author_location(&self) -> &str {
        &self.author_location
    }
    fn overall_score(&self) -> f64 {
        self.overall_score
    }
    fn is_spammed(&self) -> bool {
        self.is_spammed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupKey {
    Discipline,
    AuthorLocation,
    /// Exactly three groups: `all`, `health` and `other`.
    HealthPartition,
}

pub const PARTITION_ALL: &str = "all";
pub const PARTITION_HEALTH: &str = "health";
pub const PARTITION_OTHER: &str = "other";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub key: String,
    pub n_articles: usize,
    pub n_spammed: usize,
    pub ratio: f64,
    pub median_overall_score: f64,
}

#[derive(Default)]
struct Accumulator {
    n_spammed: usize,
    scores: Vec<f64>,
}

impl Accumulator {
    fn add<T: GroupItem>(&mut self, item: &T) {
        self.n_spammed += usize::from(item.is_spammed());
        self.scores.push(item.overall_score());
    }

    fn summary(self, key: String) -> Result<GroupSummary> {
        let n = self.scores.len();
        Ok(GroupSummary {
            key,
            n_articles: n,
            n_spammed: self.n_spammed,
            ratio: self.n_spammed as f64 / n as f64,
            median_overall_score: median(&self.scores)?,
        })
    }
}

/// One summary per group, sorted by key; the health partition instead comes
/// out in the order all, health, other (empty parts are omitted).
pub fn group_summaries<T: GroupItem>(items: &[T], key: GroupKey) -> Result<Vec<GroupSummary>> {
    if items.is_empty() {
        return Err(Error::validation("group statistics need at least one article"));
    }
    match key {
        GroupKey::Discipline | GroupKey::AuthorLocation => {
            let mut groups: BTreeMap<&str, Accumulator> = BTreeMap::new();
            for item in items {
                let k = if key == GroupKey::Discipline {
                    item.discipline()
                } else {
                    item.author_location()
                };
                groups.entry(k).or_default().add(item);
            }
            groups.into_iter().map(|(k, acc)| acc.summary(k.to_string())).collect()
        }
        GroupKey::HealthPartition => {
            let mut all = Accumulator::default();
            let mut health = Accumulator::default();
            let mut other = Accumulator::default();
            for item in items {
                all.add(item);
                if is_health_discipline(item.discipline()) {
                    health.add(item);
                } else {
                    other.add(item);
                }
            }
            [(PARTITION_ALL, all), (PARTITION_HEALTH, health), (PARTITION_OTHER, other)]
                .into_iter()
                .filter(|(_, acc)| !acc.scores.is_empty())
                .map(|(k, acc)| acc.summary(k.to_string()))
                .collect()
        }
    }
}

pub fn group_spam_ratio<T: GroupItem>(items: &[T], key: GroupKey) -> Result<Vec<GroupSummary>> {
    group_summaries(items, key)
}

pub fn group_median_score<T: GroupItem>(items: &[T], key: GroupKey) -> Result<Vec<GroupSummary>> {
    group_summaries(items, key)
}

pub fn write_groups_csv(path: &Path, groups: &[GroupSummary]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| crate::ingest::csv_error(path, e))?;
    let write = |w: &mut csv::Writer<std::fs::File>| -> csv::Result<()> {
        w.write_record(["key", "n", "n_spammed", "ratio", "median_score"])?;
        for g in groups {
            w.write_record([
                g.key.clone(),
                g.n_articles.to_string(),
                g.n_spammed.to_string(),
                g.ratio.to_string(),
                g.median_overall_score.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    };
    write(&mut w).map_err(|e| crate::ingest::csv_error(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTestResult {
    pub z: f64,
    pub p_two_tailed: f64,
    /// The tail is too small to report; `p_two_tailed` is 0.
    pub underflow: bool,
    pub pooled: f64,
    pub p1: f64,
    pub p2: f64,
}

/// Pooled-variance test of whether `x1 / n1` differs from `x2 / n2`.
pub fn two_proportion_ztest(x1: u64, n1: u64, x2: u64, n2: u64) -> Result<ZTestResult> {
    if n1 == 0 || n2 == 0 {
        return Err(Error::validation("both groups need at least one observation"));
    }
    if x1 > n1 || x2 > n2 {
        return Err(Error::validation(format!(
            "successes exceed group size ({x1}/{n1}, {x2}/{n2})"
        )));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let pooled = (x1 + x2) as f64 / (n1f + n2f);
    if pooled <= 0.0 || pooled >= 1.0 {
        return Err(Error::validation(format!(
            "pooled proportion {pooled} gives zero standard error"
        )));
    }
    let p1 = x1 as f64 / n1f;
    let p2 = x2 as f64 / n2f;
    let se = (pooled * (1.0 - pooled) * (1.0 / n1f + 1.0 / n2f)).sqrt();
    let z = (p1 - p2) / se;
    let (p_two_tailed, underflow) = normal_two_tailed_p(z);
    Ok(ZTestResult {
        z,
        p_two_tailed,
        underflow,
        pooled,
        p1,
        p2,
    })
}

/// Beyond this |z| the two-tailed p is reported as exactly 0 and flagged.
pub const UNDERFLOW_Z: f64 = 30.0;

/// `2 (1 - Phi(|z|)) = erfc(|z| / sqrt 2)`, with an underflow flag past
/// [`UNDERFLOW_Z`].
pub fn normal_two_tailed_p(z: f64) -> (f64, bool) {
    let a = z.abs();
    if a > UNDERFLOW_Z {
        return (0.0, true);
    }
    (erfc(a / std::f64::consts::SQRT_2).clamp(0.0, 1.0), false)
}

// Rational approximations from FreeBSD's s_erf.c (Sun Microsystems, 1993).
const ERX: f64 = 8.45062911510467529297e-01;
const PP0: f64 = 1.28379167095512558561e-01;
const PP1: f64 = -3.25042107247001499370e-01;
const PP2: f64 = -2.84817495755985104766e-02;
const PP3: f64 = -5.77027029648944159157e-03;
const PP4: f64 = -2.37630166566501626084e-05;
const QQ1: f64 = 3.97917223959155352819e-01;
const QQ2: f64 = 6.50222499887672944485e-02;
const QQ3: f64 = 5.08130628187576562776e-03;
const QQ4: f64 = 1.32494738004321644526e-04;
const QQ5: f64 = -3.96022827877536812320e-06;
const PA0: f64 = -2.36211856075265944077e-03;
const PA1: f64 = 4.14856118683748331666e-01;
const PA2: f64 = -3.72207876035701323847e-01;
const PA3: f64 = 3.18346619901161753674e-01;
const PA4: f64 = -1.10894694282396677476e-01;
const PA5: f64 = 3.54783043256182359371e-02;
const PA6: f64 = -2.16637559486879084300e-03;
const QA1: f64 = 1.06420880400844228286e-01;
const QA2: f64 = 5.40397917702171048937e-01;
const QA3: f64 = 7.18286544141962662868e-02;
const QA4: f64 = 1.26171219808761642112e-01;
const QA5: f64 = 1.36370839120290507362e-02;
const QA6: f64 = 1.19844998467991074170e-02;
const RA0: f64 = -9.86494403484714822705e-03;
const RA1: f64 = -6.93858572707181764372e-01;
const RA2: f64 = -1.05586262253232909814e+01;
const RA3: f64 = -6.23753324503260060396e+01;
const RA4: f64 = -1.62396669462573470355e+02;
const RA5: f64 = -1.84605092906711035994e+02;
const RA6: f64 = -8.12874355063065934246e+01;
const RA7: f64 = -9.81432934416914548592e+00;
const SA1: f64 = 1.96512716674392571292e+01;
const SA2: f64 = 1.37657754143519042600e+02;
const SA3: f64 = 4.34565877475229228821e+02;
const SA4: f64 = 6.45387271733267880336e+02;
const SA5: f64 = 4.29008140027567833386e+02;
const SA6: f64 = 1.08635005541779435134e+02;
const SA7: f64 = 6.57024977031928170135e+00;
const SA8: f64 = -6.04244152148580987438e-02;
const RB0: f64 = -9.86494292470009928597e-03;
const RB1: f64 = -7.99283237680523006574e-01;
const RB2: f64 = -1.77579549177547519889e+01;
const RB3: f64 = -1.60636384855821916062e+02;
const RB4: f64 = -6.37566443368389627722e+02;
const RB5: f64 = -1.02509513161107724954e+03;
const RB6: f64 = -4.83519191608651397019e+02;
const SB1: f64 = 3.03380607434824582924e+01;
const SB2: f64 = 3.25792512996573918826e+02;
const SB3: f64 = 1.53672958608443695994e+03;
const SB4: f64 = 3.19985821950859553908e+03;
const SB5: f64 = 2.55305040643316442583e+03;
const SB6: f64 = 4.74528541206955367215e+02;
const SB7: f64 = -2.24409524465858183362e+01;

/// Complementary error function.
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    let neg = x < 0.0;
    let a = x.abs();
    if a < 0.84375 {
        let t = if a < 1.0 / (1u64 << 56) as f64 {
            a
        } else {
            let z = a * a;
            let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
            let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
            let y = r / s;
            if a < 0.25 {
                a + a * y
            } else {
                0.5 + (a * y + (a - 0.5))
            }
        };
        return if neg { 1.0 + t } else { 1.0 - t };
    }
    if a < 1.25 {
        let s = a - 1.0;
        let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
        let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
        return if neg { 1.0 + ERX + p / q } else { 1.0 - ERX - p / q };
    }
    if a >= 28.0 {
        return if neg { 2.0 } else { 0.0 };
    }
    if neg && a > 6.0 {
        return 2.0;
    }
    let s = 1.0 / (a * a);
    let (r, q) = if a < 1.0 / 0.35 {
        (
            RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
            1.0 + s * (SA1 + s * (SA2 + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
        )
    } else {
        (
            RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
            1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
        )
    };
    // Split a into a high part with a short mantissa so exp(-a^2) keeps precision.
    let hi = f64::from_bits(a.to_bits() & 0xffff_ffff_0000_0000);
    let tail = (-hi * hi - 0.5625).exp() * ((hi - a) * (hi + a) + r / q).exp() / a;
    if neg {
        2.0 - tail
    } else {
        tail
    }
}
