//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

use std::cell::RefCell;
use std::path::Path;
use std::process::{Command, ExitCode, Stdio};
use std::time::{Duration, Instant};

use proptest::prelude::*;
use proptest::test_runner::{Config as ProptestConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use altbot::eval::{auc, confusion, report, roc_points};
use altbot::features::{normalize_minmax, FeatureMatrix};
use altbot::ingest::harvest::{
    harvest_scores, Clock, HarvestCheckpoint, HarvestConfig, MockClock, ProviderError, ScoreProvider,
};
use altbot::ingest::{BotometerMetrics, ScoreStore};
use altbot::learn::{knn_predict, logistic_gradient, logistic_loss, train_knn, upsample_indices};
use altbot::pipeline::{run_report, PipelineConfig, RunReport};
use altbot::scoring::{label_article, median, user_bot_score};
use altbot::stats::{group_spam_ratio, two_proportion_ztest, GroupItem, GroupKey};
use altbot::synth::{generate_dataset, write_dataset, SynthConfig, ARTICLES_FILE, SCORES_FILE};

const PROPERTY_CASES: u32 = 256;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// One article reduced to its health flag and spam label.
struct Row {
    health: bool,
    spammed: bool,
}

impl GroupItem for Row {
    fn discipline(&self) -> &str {
        if self.health {
            "Medicine"
        } else {
            "Energy"
        }
    }
    fn author_location(&self) -> &str {
        "unknown"
    }
    fn overall_score(&self) -> f64 {
        if self.spammed {
            25.0
        } else {
            10.0
        }
    }
    fn is_spammed(&self) -> bool {
        self.spammed
    }
}

const HEALTH: (u64, u64) = (174_876, 1_178_085);
const OTHER: (u64, u64) = (26_803, 219_922);

fn ztest_reproduction() -> Outcome {
    let t = Instant::now();
    let r = two_proportion_ztest(HEALTH.0, HEALTH.1, OTHER.0, OTHER.1).expect("valid counts");
    let elapsed = t.elapsed();
    let pass = (32.3..=32.7).contains(&r.z) && r.p_two_tailed < 0.001 && r.underflow && elapsed < Duration::from_secs(1);
    outcome(
        pass,
        format!("z = {:.4}, p = {}, underflow = {}, {elapsed:?}", r.z, r.p_two_tailed, r.underflow),
    )
}

fn ratio_reproduction() -> Outcome {
    let t = Instant::now();
    let mut rows = Vec::with_capacity((HEALTH.1 + OTHER.1) as usize);
    for (health, (x, n)) in [(true, HEALTH), (false, OTHER)] {
        rows.extend((0..n).map(|i| Row { health, spammed: i < x }));
    }
    let groups = group_spam_ratio(&rows, GroupKey::HealthPartition).expect("non-empty");
    let elapsed = t.elapsed();
    let expected = [("all", 14.43), ("health", 14.84), ("other", 12.19)];
    let mut pass = elapsed < Duration::from_secs(1) && groups.len() == 3;
    let mut detail = Vec::new();
    for (g, (key, pct)) in groups.iter().zip(expected) {
        let got = 100.0 * g.ratio;
        pass &= g.key == key && (got - pct).abs() <= 0.005;
        detail.push(format!("{key} {got:.4}% (n = {})", g.n_articles));
    }
    pass &= groups[0].n_articles == 1_398_007;
    outcome(pass, format!("{}, {elapsed:?}", detail.join(", ")))
}

fn normalization_endpoints() -> Outcome {
    let values = [3.0, 0.25, 114.61, 8268.56, 47.2];
    let (scaled, _) = normalize_minmax(&values, None).expect("finite values");
    let pass = scaled[1] == 0.0 && scaled[3] == 1.0;
    outcome(pass, format!("0.25 -> {}, 8268.56 -> {}", scaled[1], scaled[3]))
}

fn run_synthetic(dir: &Path, signal: f64) -> RunReport {
    let data = generate_dataset(&SynthConfig {
        n_articles: 20_000,
        seed: 42,
        spam_prevalence: 0.1443,
        signal_strength: signal,
        ..SynthConfig::default()
    })
    .expect("feasible config");
    let input = dir.join("data");
    write_dataset(&input, &data).expect("write dataset");
    run_report(&PipelineConfig {
        articles: Some(input.join(ARTICLES_FILE)),
        scores: Some(input.join(SCORES_FILE)),
        out_dir: Some(dir.join("report")),
        seed: 42,
        ..PipelineConfig::default()
    })
    .expect("pipeline runs")
}

fn planted_signal_metrics() -> Outcome {
    let t = Instant::now();
    let strong_dir = tempfile::tempdir().expect("tempdir");
    let null_dir = tempfile::tempdir().expect("tempdir");
    let strong = run_synthetic(strong_dir.path(), 1.0);
    let null = run_synthetic(null_dir.path(), 0.0);
    let elapsed = t.elapsed();

    let mut pass = elapsed < Duration::from_secs(60);
    let mut detail = Vec::new();
    for (name, r, check) in [
        ("signal 1", &strong, (|f1: f64, b: f64| f1 - b >= 0.2) as fn(f64, f64) -> bool),
        ("signal 0", &null, |f1: f64, b: f64| (f1 - b).abs() <= 0.05),
    ] {
        let baseline = r.baseline.constant_positive_f1;
        let f1s: Vec<String> = r
            .models
            .iter()
            .map(|(kind, e)| {
                pass &= check(e.report.positive.f1, baseline);
                format!("{kind} {:.3}", e.report.positive.f1)
            })
            .collect();
        pass &= r.models.len() == 3;
        detail.push(format!("{name}: baseline {baseline:.3}, {}", f1s.join(" ")));
    }
    outcome(pass, format!("{}; {elapsed:?}", detail.join("; ")))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for point in 0..25 {
        let n = rng.random_range(5..40);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.random::<f64>()).collect()).collect();
        let mut labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.4)).collect();
        labels[0] = true;
        labels[1] = false;
        let data = FeatureMatrix::from_rows(&rows, &labels).expect("rectangular");
        let params: Vec<f64> = (0..7).map(|_| rng.random_range(-2.0..2.0)).collect();
        let l2 = if point % 2 == 0 { 0.0 } else { 0.1 };
        let analytic = logistic_gradient(&params, &data, l2);
        for j in 0..params.len() {
            let mut up = params.clone();
            let mut down = params.clone();
            up[j] += h;
            down[j] -= h;
            let numeric = (logistic_loss(&up, &data, l2) - logistic_loss(&down, &data, l2)) / (2.0 * h);
            let scale = analytic[j].abs().max(numeric.abs()).max(1e-6);
            worst = worst.max((analytic[j] - numeric).abs() / scale);
        }
    }
    outcome(worst < 1e-4, format!("max relative error {worst:.2e} over 25 points"))
}

fn eval_fixture() -> Outcome {
    let t = [true, true, true, true, false, false, false, false, false, false];
    let p = [true, true, true, false, false, false, false, false, true, true];
    let cm = confusion(&t, &p).expect("equal lengths");
    let r = report(&cm);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-4;
    let truth = [true, true, false, false];
    let perfect = auc(&roc_points(&truth, &[0.9, 0.8, 0.3, 0.1]).unwrap());
    let anti = auc(&roc_points(&truth, &[0.1, 0.3, 0.8, 0.9]).unwrap());
    let tied = auc(&roc_points(&truth, &[0.5; 4]).unwrap());
    let pass = (cm.tp, cm.fn_, cm.fp, cm.tn) == (3, 1, 2, 4)
        && close(r.positive.precision, 0.6)
        && close(r.positive.recall, 0.75)
        && close(r.positive.f1, 0.6667)
        && close(r.accuracy, 0.7)
        && perfect == 1.0
        && anti == 0.0
        && tied == 0.5;
    outcome(
        pass,
        format!(
            "P {:.4} R {:.4} F1 {:.4} acc {:.4}; AUC {perfect}/{anti}/{tied}",
            r.positive.precision, r.positive.recall, r.positive.f1, r.accuracy
        ),
    )
}

/// Provider that logs the simulated time of every request.
struct TimedProvider<'a> {
    clock: &'a MockClock,
    log: RefCell<Vec<Duration>>,
}

impl ScoreProvider for TimedProvider<'_> {
    fn fetch(&mut self, user_id: &str) -> Result<BotometerMetrics, ProviderError> {
        self.log.borrow_mut().push(self.clock.now());
        let k: u32 = user_id[1..].parse().expect("numeric id");
        Ok(BotometerMetrics::uniform(f64::from(k % 50) / 10.0).expect("in range"))
    }
}

fn max_in_window(times: &[Duration], window: Duration) -> usize {
    let mut best = 0;
    let mut start = 0;
    for end in 0..times.len() {
        while times[end] - times[start] >= window {
            start += 1;
        }
        best = best.max(end - start + 1);
    }
    best
}

fn harvest(users: &[String], path: &Path, stop_after: Option<usize>) -> (ScoreStore, Vec<Duration>, Duration) {
    let clock = MockClock::new();
    let mut provider = TimedProvider {
        clock: &clock,
        log: RefCell::new(Vec::new()),
    };
    let config = HarvestConfig {
        stop_after,
        ..HarvestConfig::with_rate(10.0)
    };
    let mut ck = HarvestCheckpoint::open(path).expect("checkpoint opens");
    let r = harvest_scores(users, &mut provider, &config, &mut ck, &clock).expect("harvest runs");
    (r.store, provider.log.into_inner(), r.finished_at)
}

fn harvester_contract() -> Outcome {
    let users: Vec<String> = (0..1000).map(|i| format!("u{i:04}")).collect();
    let dir = tempfile::tempdir().expect("tempdir");

    let (full, times, finished) = harvest(&users, &dir.path().join("full.jsonl"), None);
    let busiest = max_in_window(&times, Duration::from_secs(1));

    let resumed_path = dir.path().join("resumed.jsonl");
    let (partial, _, _) = harvest(&users, &resumed_path, Some(500));
    let (resumed, second_times, _) = harvest(&users, &resumed_path, None);

    let pass = full.len() == 1000
        && finished >= Duration::from_millis(99_900)
        && busiest <= 10
        && partial.len() == 500
        && second_times.len() == 500
        && resumed == full;
    outcome(
        pass,
        format!(
            "{} users in {:.3} s simulated, busiest 1 s window {busiest}; resume after {} gave {} entries, identical = {}",
            full.len(),
            finished.as_secs_f64(),
            partial.len(),
            resumed.len(),
            resumed == full
        ),
    )
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().expect("tempdir");
    let bin = env!("CARGO_BIN_EXE_altbot");
    let data = dir.path().join("data");
    let run = |args: &[&str]| {
        Command::new(bin)
            .args(args)
            .stdout(Stdio::null())
            .status()
            .map(|s| s.success())
            .unwrap_or(false)
    };
    let d = data.to_str().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let mut pass = run(&["synth", "--n", "4000", "--seed", "7", "--out", d])
        && run(&["report", "--in", d, "--out", a.to_str().unwrap(), "--seed", "7"])
        && run(&["report", "--in", d, "--out", b.to_str().unwrap(), "--seed", "7"]);
    let mut files = 0;
    if pass {
        let mut names: Vec<_> = std::fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        for name in names {
            files += 1;
            pass &= std::fs::read(a.join(&name)).ok() == std::fs::read(b.join(&name)).ok();
        }
        pass &= files >= 8;
    }
    outcome(pass, format!("{files} output files compared byte-for-byte"))
}

fn property(name: &str, test: impl Fn(&mut TestRunner) -> Result<(), String>) -> (String, bool, String) {
    let mut runner = TestRunner::new(ProptestConfig {
        cases: PROPERTY_CASES,
        failure_persistence: None,
        ..ProptestConfig::default()
    });
    match test(&mut runner) {
        Ok(()) => (name.to_string(), true, format!("{PROPERTY_CASES} cases")),
        Err(e) => (name.to_string(), false, e),
    }
}

fn metrics_strategy() -> impl Strategy<Value = [f64; 8]> {
    prop::array::uniform8(0.0..=5.0f64)
}

fn invariant_suites() -> Vec<(String, bool, String)> {
    vec![
        property("score monotonicity and bounds", |r| {
            r.run(&(metrics_strategy(), 0..8usize, 0.0..=5.0f64), |(m, j, bump)| {
                let base = BotometerMetrics::from_array(m).unwrap();
                let s = user_bot_score(&base);
                prop_assert!((0.0..=40.0).contains(&s));
                let mut raised = m;
                raised[j] = raised[j].max(bump);
                prop_assert!(user_bot_score(&BotometerMetrics::from_array(raised).unwrap()) >= s);
                Ok(())
            })
            .map_err(|e| e.to_string())
        }),
        property("median permutation invariance and bounds", |r| {
            let strat = prop::collection::vec(0.0..=40.0f64, 1..60).prop_flat_map(|v| (Just(v.clone()), Just(v).prop_shuffle()));
            r.run(&strat, |(v, shuffled)| {
                let m = median(&v).unwrap();
                prop_assert_eq!(m, median(&shuffled).unwrap());
                let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(lo <= m && m <= hi);
                Ok(())
            })
            .map_err(|e| e.to_string())
        }),
        property("threshold monotonicity", |r| {
            let strat = (prop::collection::vec(0.0..=40.0f64, 1..80), 0.0..=40.0f64, 0.0..=40.0f64);
            r.run(&strat, |(scores, a, b)| {
                let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
                let count = |t: f64| scores.iter().filter(|&&s| label_article(s, t)).count();
                prop_assert!(count(hi) <= count(lo));
                for &s in &scores {
                    prop_assert!(!label_article(s, hi) || label_article(s, lo));
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
        }),
        property("upsampling conservation", |r| {
            let strat = (prop::collection::vec(any::<bool>(), 2..200), any::<u64>())
                .prop_filter("both classes", |(l, _)| l.iter().any(|&x| x) && l.iter().any(|&x| !x));
            r.run(&strat, |(labels, seed)| {
                let idx = upsample_indices(&labels, seed).unwrap();
                let pos = labels.iter().filter(|&&x| x).count();
                let neg = labels.len() - pos;
                let minority = pos < neg;
                prop_assert_eq!(&idx[..labels.len()], &(0..labels.len()).collect::<Vec<_>>()[..]);
                prop_assert_eq!(idx.len(), 2 * pos.max(neg));
                let new_pos = idx.iter().filter(|&&i| labels[i]).count();
                prop_assert_eq!(new_pos, idx.len() - new_pos);
                for &i in &idx[labels.len()..] {
                    prop_assert_eq!(labels[i], minority);
                }
                Ok(())
            })
            .map_err(|e| e.to_string())
        }),
        property("z-test antisymmetry", |r| {
            let strat = (1u64..5000, 1u64..5000).prop_flat_map(|(n1, n2)| (0..=n1, Just(n1), 0..=n2, Just(n2)));
            r.run(&strat, |(x1, n1, x2, n2)| {
                let pooled = (x1 + x2) as f64 / (n1 + n2) as f64;
                prop_assume!(pooled > 0.0 && pooled < 1.0);
                let a = two_proportion_ztest(x1, n1, x2, n2).unwrap();
                let b = two_proportion_ztest(x2, n2, x1, n1).unwrap();
                prop_assert_eq!(a.z, -b.z);
                prop_assert_eq!(a.p_two_tailed, b.p_two_tailed);
                prop_assert!((0.0..=1.0).contains(&a.p_two_tailed));
                Ok(())
            })
            .map_err(|e| e.to_string())
        }),
        property("AUC monotone-transform invariance", |r| {
            let strat = prop::collection::vec((0u32..1000, any::<bool>()), 2..150)
                .prop_filter("both classes", |v| v.iter().any(|x| x.1) && v.iter().any(|x| !x.1));
            r.run(&strat, |rows| {
                let truth: Vec<bool> = rows.iter().map(|x| x.1).collect();
                let scores: Vec<f64> = rows.iter().map(|x| f64::from(x.0)).collect();
                let warped: Vec<f64> = scores.iter().map(|s| s * s * s + 7.0 * s - 3.0).collect();
                let a = auc(&roc_points(&truth, &scores).unwrap());
                prop_assert_eq!(a, auc(&roc_points(&truth, &warped).unwrap()));
                prop_assert!((0.0..=1.0).contains(&a));
                Ok(())
            })
            .map_err(|e| e.to_string())
        }),
        property("KNN translation invariance", |r| {
            // Dyadic coordinates and integer shifts keep every distance exact.
            let point = prop::array::uniform3(0u8..32);
            let strat = (
                prop::collection::vec((point.clone(), any::<bool>()), 4..40),
                prop::collection::vec(point, 1..10),
                prop::array::uniform3(-8i8..8),
                1usize..4,
            )
                .prop_filter("both classes", |(t, ..)| t.iter().any(|x| x.1) && t.iter().any(|x| !x.1));
            r.run(&strat, |(train, queries, shift, k)| {
                let coords = |p: &[u8; 3], d: [f64; 3]| -> Vec<f64> {
                    p.iter().zip(d).map(|(&c, s)| f64::from(c) / 8.0 + s).collect()
                };
                let zero = [0.0; 3];
                let delta = shift.map(f64::from);
                let labels: Vec<bool> = train.iter().map(|x| x.1).collect();
                let build = |d: [f64; 3]| {
                    let rows: Vec<Vec<f64>> = train.iter().map(|x| coords(&x.0, d)).collect();
                    FeatureMatrix::from_rows(&rows, &labels).unwrap()
                };
                let q = |d: [f64; 3]| {
                    let rows: Vec<Vec<f64>> = queries.iter().map(|p| coords(p, d)).collect();
                    FeatureMatrix::from_rows(&rows, &vec![false; rows.len()]).unwrap()
                };
                let k = k.min(train.len());
                let a = knn_predict(&train_knn(&build(zero), k).unwrap(), &q(zero)).unwrap();
                let b = knn_predict(&train_knn(&build(delta), k).unwrap(), &q(delta)).unwrap();
                prop_assert_eq!(a, b);
                Ok(())
            })
            .map_err(|e| e.to_string())
        }),
    ]
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 z-test reproduction", ztest_reproduction),
        ("2 ratio reproduction", ratio_reproduction),
        ("3 normalization endpoints", normalization_endpoints),
        ("4 planted-signal model metrics", planted_signal_metrics),
        ("5 logistic gradient check", gradient_check),
        ("6 evaluation fixture", eval_fixture),
        ("7 harvester contract", harvester_contract),
        ("8 report determinism", determinism),
    ];
    let mut failures = 0;
    for (name, check) in criteria {
        let o = check();
        failures += usize::from(!o.pass);
        println!("criterion {name}: {} ({})", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    let suites = invariant_suites();
    let all = suites.iter().all(|s| s.1);
    failures += usize::from(!all);
    for (name, pass, detail) in &suites {
        println!("criterion 9 invariant {name}: {} ({detail})", if *pass { "PASS" } else { "FAIL" });
    }
    println!("criterion 9 invariant suites: {}", if all { "PASS" } else { "FAIL" });
    if failures == 0 {
        println!("acceptance: all criteria pass");
        ExitCode::SUCCESS
    } else {
        println!("acceptance: {failures} criteria fail");
        ExitCode::FAILURE
    }
}
