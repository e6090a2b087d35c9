//! Splitting, class balancing, the three classifiers and bootstrap feature
//! importance.

mod importance;
mod knn;
mod logistic;
mod resample;
mod svm;

pub use importance::{feature_importance, DEFAULT_BOOTSTRAP_ROUNDS};
pub use knn::{knn_predict, train_knn, KnnModel, DEFAULT_K};
pub use logistic::{
    logistic_gradient, logistic_loss, logistic_predict, sigmoid, train_logistic, LogisticHyper,
    LogisticModel, PROB_CLIP,
};
pub use resample::{split_indices, split_train_test, upsample_indices, upsample_minority, SplitSpec};
pub use svm::{hinge_objective, svm_predict, train_svm, SvmHyper, SvmModel};

/// Scores (probabilities, vote fractions or margins) and hard labels.
pub type Predictions = (Vec<f64>, Vec<bool>);
