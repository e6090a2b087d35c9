use rand::Rng;

use super::logistic::{train_logistic, LogisticHyper};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::scoring::median;
use crate::seed::stage_rng;

/// Odd, so the median is an attained coefficient.
pub const DEFAULT_BOOTSTRAP_ROUNDS: usize = 11;

/// Per-feature median of logistic coefficients over `rounds` bootstrap
/// resamples of `train`. One round skips resampling and returns the plain
/// fitted coefficients.
pub fn feature_importance(
    train: &FeatureMatrix,
    rounds: usize,
    seed: u64,
    hyper: &LogisticHyper,
) -> Result<Vec<f64>> {
    if rounds == 0 {
        return Err(Error::config("bootstrap_rounds", "must be at least 1"));
    }
    if rounds == 1 {
        return Ok(train_logistic(train, hyper)?.weights);
    }
    let n = train.n_rows();
    let mut coefficients: Vec<Vec<f64>> = vec![Vec::with_capacity(rounds); train.n_cols()];
    for round in 0..rounds {
        let mut rng = stage_rng(seed, &format!("bootstrap-{round}"));
        let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        let model = train_logistic(&train.select(&sample), hyper)?;
        for (column, w) in coefficients.iter_mut().zip(model.weights) {
            column.push(w);
        }
    }
    coefficients.iter().map(|c| median(c)).collect()
}
