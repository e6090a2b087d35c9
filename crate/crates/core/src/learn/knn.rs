use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::Predictions;
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub const DEFAULT_K: usize = 34;

/// Lazy learner: the training rows themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    pub train: FeatureMatrix,
    pub k: usize,
}

#[derive(Serialize, Deserialize)]
struct KnnModelRepr {
    k: usize,
    columns: Vec<String>,
    rows: Vec<Vec<f64>>,
    labels: Vec<bool>,
}

impl Serialize for KnnModel {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        KnnModelRepr {
            k: self.k,
            columns: self.train.columns().to_vec(),
            rows: self.train.rows().map(<[f64]>::to_vec).collect(),
            labels: self.train.labels().to_vec(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for KnnModel {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = KnnModelRepr::deserialize(d)?;
        let train = FeatureMatrix::new(repr.columns, repr.rows.concat(), repr.labels)
            .map_err(serde::de::Error::custom)?;
        Ok(KnnModel { train, k: repr.k })
    }
}

pub fn train_knn(train: &FeatureMatrix, k: usize) -> Result<KnnModel> {
    if k == 0 || k > train.n_rows() {
        return Err(Error::validation(format!(
            "k = {k} must lie in 1..={} (training rows)",
            train.n_rows()
        )));
    }
    Ok(KnnModel {
        train: train.clone(),
        k,
    })
}

fn by_distance_then_index(a: &(f64, usize), b: &(f64, usize)) -> Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Euclidean k-nearest-neighbour vote. Distance ties go to the lower training
/// index; a vote of exactly one half is negative. Query rows are processed in
/// parallel but results keep input order.
pub fn knn_predict(model: &KnnModel, rows: &FeatureMatrix) -> Result<Predictions> {
    rows.ensure_columns(model.train.n_cols())?;
    let train = &model.train;
    let k = model.k;
    let positives: Vec<usize> = (0..rows.n_rows())
        .into_par_iter()
        .map_init(
            || Vec::with_capacity(train.n_rows()),
            |dist: &mut Vec<(f64, usize)>, q| {
                let query = rows.row(q);
                dist.clear();
                dist.extend(train.rows().enumerate().map(|(i, r)| {
                    let d2: f64 = r.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
                    (d2, i)
                }));
                if k < dist.len() {
                    dist.select_nth_unstable_by(k - 1, by_distance_then_index);
                }
                dist[..k].iter().filter(|&&(_, i)| train.labels()[i]).count()
            },
        )
        .collect();

    let scores = positives.iter().map(|&p| p as f64 / k as f64).collect();
    let labels = positives.iter().map(|&p| 2 * p > k).collect();
    Ok((scores, labels))
}
