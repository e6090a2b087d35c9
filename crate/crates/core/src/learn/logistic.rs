use serde::{Deserialize, Serialize};

use super::Predictions;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

/// Probabilities are clipped to `[PROB_CLIP, 1 - PROB_CLIP]`.
pub const PROB_CLIP: f64 = 1e-12;
const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticHyper {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub l2: f64,
}

impl Default for LogisticHyper {
    fn default() -> Self {
        Self {
            learning_rate: 0.5,
            max_epochs: 500,
            tolerance: 1e-8,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    /// Loss before training followed by the loss after each epoch.
    pub loss_log: Vec<f64>,
    pub hyper: LogisticHyper,
}

impl LogisticModel {
    /// All-zero parameters; predicts 0.5 everywhere.
    pub fn zeros(n_features: usize, hyper: LogisticHyper) -> Self {
        Self {
            weights: vec![0.0; n_features],
            bias: 0.0,
            loss_log: Vec::new(),
            hyper,
        }
    }
}

fn raw_sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Logistic function clipped away from 0 and 1.
pub fn sigmoid(z: f64) -> f64 {
    raw_sigmoid(z).clamp(PROB_CLIP, 1.0 - PROB_CLIP)
}

fn affine(weights: &[f64], bias: f64, row: &[f64]) -> f64 {
    weights.iter().zip(row).map(|(w, x)| w * x).sum::<f64>() + bias
}

/// Mean binary cross-entropy plus `(l2 / 2) * |w|^2`. `params` holds the
/// weights followed by the bias.
pub fn logistic_loss(params: &[f64], data: &FeatureMatrix, l2: f64) -> f64 {
    let (weights, bias) = params.split_at(params.len() - 1);
    let bias = bias[0];
    let n = data.n_rows() as f64;
    let ce: f64 = data
        .rows()
        .zip(data.labels())
        .map(|(row, &y)| {
            let p = sigmoid(affine(weights, bias, row));
            if y {
                -p.ln()
            } else {
                -(1.0 - p).ln()
            }
        })
        .sum();
    ce / n + 0.5 * l2 * weights.iter().map(|w| w * w).sum::<f64>()
}

/// Analytic gradient of [`logistic_loss`] with respect to `params`.
pub fn logistic_gradient(params: &[f64], data: &FeatureMatrix, l2: f64) -> Vec<f64> {
    let (weights, bias) = params.split_at(params.len() - 1);
    let bias = bias[0];
    let mut grad = vec![0.0; params.len()];
    for (row, &y) in data.rows().zip(data.labels()) {
        let residual = raw_sigmoid(affine(weights, bias, row)) - if y { 1.0 } else { 0.0 };
        for (g, x) in grad.iter_mut().zip(row) {
            *g += residual * x;
        }
        *grad.last_mut().unwrap() += residual;
    }
    let n = data.n_rows() as f64;
    for g in grad.iter_mut() {
        *g /= n;
    }
    for (g, w) in grad.iter_mut().zip(weights) {
        *g += l2 * w;
    }
    grad
}

/// Full-batch gradient descent from zero. Each epoch starts at the base
/// learning rate and halves it (at most 30 times) until the step does not
/// increase the loss; training stops when the loss changes by less than the
/// tolerance or no acceptable step exists.
pub fn train_logistic(train: &FeatureMatrix, hyper: &LogisticHyper) -> Result<LogisticModel> {
    let (neg, pos) = train.class_counts();
    if neg == 0 || pos == 0 {
        return Err(Error::validation("logistic regression needs both classes in training data"));
    }
    if !(hyper.learning_rate > 0.0) || hyper.l2 < 0.0 {
        return Err(Error::config("learning_rate", "learning rate must be positive and L2 non-negative"));
    }

    let mut params = vec![0.0; train.n_cols() + 1];
    let mut loss = logistic_loss(&params, train, hyper.l2);
    let mut loss_log = vec![loss];

    for _ in 0..hyper.max_epochs {
        let grad = logistic_gradient(&params, train, hyper.l2);
        let mut step = hyper.learning_rate;
        let mut accepted = None;
        for _ in 0..=MAX_HALVINGS {
            let candidate: Vec<f64> = params.iter().zip(&grad).map(|(p, g)| p - step * g).collect();
            let candidate_loss = logistic_loss(&candidate, train, hyper.l2);
            if !candidate_loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss {candidate_loss}")));
            }
            if candidate_loss <= loss {
                accepted = Some((candidate, candidate_loss));
                break;
            }
            step /= 2.0;
        }
        let Some((candidate, candidate_loss)) = accepted else {
            break;
        };
        params = candidate;
        let delta = (loss - candidate_loss).abs();
        loss = candidate_loss;
        loss_log.push(loss);
        if delta < hyper.tolerance {
            break;
        }
    }

    let bias = params.pop().expect("bias is always present");
    if params.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
        return Err(Error::Numeric("non-finite logistic weights".into()));
    }
    Ok(LogisticModel {
        weights: params,
        bias,
        loss_log,
        hyper: *hyper,
    })
}

/// Clipped probabilities and labels at `probability > 0.5`.
pub fn logistic_predict(model: &LogisticModel, rows: &FeatureMatrix) -> Result<Predictions> {
    rows.ensure_columns(model.weights.len())?;
    let probs: Vec<f64> = rows
        .rows()
        .map(|r| sigmoid(affine(&model.weights, model.bias, r)))
        .collect();
    let labels = probs.iter().map(|&p| p > 0.5).collect();
    Ok((probs, labels))
}
