use serde::{Deserialize, Serialize};

use super::Predictions;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmHyper {
    pub step: f64,
    pub epochs: usize,
    pub l2: f64,
}

impl Default for SvmHyper {
    fn default() -> Self {
        Self {
            step: 0.5,
            epochs: 500,
            l2: 1e-4,
        }
    }
}

/// Linear soft-margin classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub hyper: SvmHyper,
}

fn margin(weights: &[f64], bias: f64, row: &[f64]) -> f64 {
    weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + bias
}

fn signed(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

/// Mean hinge loss `max(0, 1 - y f(x))` with `y` in {-1, +1}, plus
/// `(l2 / 2) * |w|^2`.
pub fn hinge_objective(weights: &[f64], bias: f64, data: &FeatureMatrix, l2: f64) -> f64 {
    let hinge: f64 = data
        .rows()
        .zip(data.labels())
        .map(|(row, &y)| (1.0 - signed(y) * margin(weights, bias, row)).max(0.0))
        .sum();
    hinge / data.n_rows() as f64 + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Full-batch subgradient descent with step `step / sqrt(t)`. Subgradient
/// steps do not decrease the objective monotonically, so the iterate with
/// the lowest objective seen is returned.
pub fn train_svm(train: &FeatureMatrix, hyper: &SvmHyper) -> Result<SvmModel> {
    let (neg, pos) = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::validation("SVM needs both classes in training data"));
    }
    if !(hyper.step > 0.0) || hyper.l2 < 0.0 {
        return Err(Error::config("svm_step", "step must be positive and L2 non-negative"));
    }
    let d = train.n_cols();
    let n = train.n_rows() as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut best = (hinge_objective(&w, b, train, hyper.l2), w.clone(), b);

    let mut gw = vec![0.0; d];
    for t in 1..=hyper.epochs {
        gw.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (row, &label) in train.rows().zip(train.labels()) {
            let y = signed(label);
            if y * margin(&w, b, row) < 1.0 {
                for (g, x) in gw.iter_mut().zip(row) {
                    *g -= y * x;
                }
                gb -= y;
            }
        }
        let eta = hyper.step / (t as f64).sqrt();
        for (wi, g) in w.iter_mut().zip(&gw) {
            *wi -= eta * (g / n + hyper.l2 * *wi);
        }
        b -= eta * gb / n;

        let objective = hinge_objective(&w, b, train, hyper.l2);
        if !objective.is_finite() {
            return Err(Error::Numeric(format!("non-finite SVM objective {objective}")));
        }
        if objective < best.0 {
            best = (objective, w.clone(), b);
        }
    }
    let (_, weights, bias) = best;
    Ok(SvmModel {
        weights,
        bias,
        hyper: *hyper,
    })
}

/// Signed margins; positive iff the margin is strictly above zero.
pub fn svm_predict(model: &SvmModel, rows: &FeatureMatrix) -> Result<Predictions> {
    rows.ensure_columns(model.weights.len())?;
    let margins: Vec<f64> = rows.rows().map(|r| margin(&model.weights, model.bias, r)).collect();
    let labels = margins.iter().map(|&m| m > 0.0).collect();
    Ok((margins, labels))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(weights: Vec<f64>, bias: f64) -> SvmModel {
        SvmModel {
            weights,
            bias,
            hyper: SvmHyper::default(),
        }
    }

    #[test]
    fn hinge_by_hand() {
        // f(x) = 2 x0 - x1 + 0.5
        // (1, 0) +1: f = 2.5, hinge 0
        // (0, 1) -1: f = -0.5, hinge 0.5
        // (0, 0) +1: f = 0.5, hinge 0.5
        // (1, 1) -1: f = 1.5, hinge 2.5
        let data = FeatureMatrix::from_rows(
            &[vec![1.0, 0.0], vec![0.0, 1.0], vec![0.0, 0.0], vec![1.0, 1.0]],
            &[true, false, true, false],
        )
        .unwrap();
        let obj = hinge_objective(&[2.0, -1.0], 0.5, &data, 0.0);
        assert!((obj - 3.5 / 4.0).abs() < 1e-15);
        let obj = hinge_objective(&[2.0, -1.0], 0.5, &data, 0.2);
        assert!((obj - (3.5 / 4.0 + 0.1 * 5.0)).abs() < 1e-15);
    }

    #[test]
    fn zero_model_hinge_is_one() {
        let data = FeatureMatrix::from_rows(&[vec![3.0], vec![-7.0], vec![0.1]], &[true, false, false]).unwrap();
        assert_eq!(hinge_objective(&[0.0], 0.0, &data, 1e-4), 1.0);
    }

    #[test]
    fn separable_data() {
        let rows: Vec<Vec<f64>> = (0..100).map(|i| vec![(i % 2) as f64]).collect();
        let labels: Vec<bool> = (0..100).map(|i| i % 2 == 1).collect();
        let data = FeatureMatrix::from_rows(&rows, &labels).unwrap();
        let m = train_svm(&data, &SvmHyper::default()).unwrap();
        let (_, l) = svm_predict(&m, &data).unwrap();
        assert_eq!(l, labels);
    }

    #[test]
    fn prediction_rules() {
        let rows = FeatureMatrix::from_rows(&[vec![1.0], vec![-2.0]], &[true, false]).unwrap();
        let (s, l) = svm_predict(&model(vec![0.0], 0.0), &rows).unwrap();
        assert_eq!(s, vec![0.0, 0.0]);
        assert_eq!(l, vec![false, false]);
        let (_, l) = svm_predict(&model(vec![0.0], 3.2), &rows).unwrap();
        assert_eq!(l, vec![true, true]);
        let (_, l) = svm_predict(&model(vec![0.0], -0.001), &rows).unwrap();
        assert_eq!(l, vec![false, false]);
        assert!(svm_predict(&model(vec![0.0, 1.0], 0.0), &rows).is_err());
    }
}
