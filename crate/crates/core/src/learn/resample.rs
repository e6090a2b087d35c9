use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::seed::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        Self {
            train_fraction: 0.7,
            seed: 0,
            stratified: true,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::config(
                "train_fraction",
                format!("must lie strictly between 0 and 1, got {}", self.train_fraction),
            ));
        }
        Ok(())
    }
}

fn train_count(n: usize, fraction: f64) -> usize {
    // The epsilon absorbs products like 10 * 0.7 landing just below 7.
    ((n as f64 * fraction + 1e-9).floor() as usize).min(n)
}

/// Partitions row indices into `(train, test)`, both sorted ascending. Each
/// class (or the whole set, unstratified) sends `floor(n * fraction)` rows to
/// train and the rest to test.
pub fn split_indices(labels: &[bool], spec: &SplitSpec) -> Result<(Vec<usize>, Vec<usize>)> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let groups: Vec<Vec<usize>> = if spec.stratified {
        let (pos, neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
        for (name, g) in [("false", &neg), ("true", &pos)] {
            if g.len() < 2 {
                return Err(Error::validation(format!(
                    "stratified split needs at least 2 rows of class {name}, found {}",
                    g.len()
                )));
            }
        }
        vec![neg, pos]
    } else {
        vec![(0..labels.len()).collect()]
    };

    let mut train = Vec::new();
    let mut test = Vec::new();
    for mut group in groups {
        group.shuffle(&mut rng);
        let k = train_count(group.len(), spec.train_fraction);
        train.extend_from_slice(&group[..k]);
        test.extend_from_slice(&group[k..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok((train, test))
}

pub fn split_train_test(matrix: &FeatureMatrix, spec: &SplitSpec) -> Result<(FeatureMatrix, FeatureMatrix)> {
    let (train, test) = split_indices(matrix.labels(), spec)?;
    Ok((matrix.select(&train), matrix.select(&test)))
}

/// All original indices in order, followed by minority indices drawn
/// uniformly with replacement until both classes are the same size.
pub fn upsample_indices(labels: &[bool], seed: u64) -> Result<Vec<usize>> {
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| labels[i]);
    if pos.is_empty() || neg.is_empty() {
        return Err(Error::validation("upsampling needs both classes present"));
    }
    let (minority, majority) = if pos.len() < neg.len() { (pos, neg) } else { (neg, pos) };
    let mut out: Vec<usize> = (0..labels.len()).collect();
    let mut rng = rng_from_seed(seed);
    out.extend((0..majority.len() - minority.len()).map(|_| minority[rng.random_range(0..minority.len())]));
    Ok(out)
}

pub fn upsample_minority(train: &FeatureMatrix, seed: u64) -> Result<FeatureMatrix> {
    Ok(train.select(&upsample_indices(train.labels(), seed)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(neg: usize, pos: usize) -> Vec<bool> {
        let mut v = vec![false; neg];
        v.extend(vec![true; pos]);
        v
    }

    #[test]
    fn unstratified_counts() {
        let spec = SplitSpec {
            stratified: false,
            seed: 3,
            ..SplitSpec::default()
        };
        let (train, test) = split_indices(&labels(5, 5), &spec).unwrap();
        assert_eq!((train.len(), test.len()), (7, 3));
    }

    #[test]
    fn stratified_counts() {
        let l = labels(80, 20);
        let spec = SplitSpec {
            seed: 11,
            ..SplitSpec::default()
        };
        let (train, test) = split_indices(&l, &spec).unwrap();
        let pos = train.iter().filter(|&&i| l[i]).count();
        assert_eq!((train.len() - pos, pos), (56, 14));
        let mut all: Vec<usize> = train.iter().chain(&test).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        assert_eq!(split_indices(&l, &spec).unwrap(), (train, test));
    }

    #[test]
    fn stratified_needs_two_per_class() {
        assert!(split_indices(&labels(10, 1), &SplitSpec::default()).is_err());
        let bad = SplitSpec {
            train_fraction: 1.0,
            ..SplitSpec::default()
        };
        assert!(split_indices(&labels(10, 10), &bad).is_err());
    }

    #[test]
    fn upsample_examples() {
        let idx = upsample_indices(&labels(85, 15), 1).unwrap();
        let l = labels(85, 15);
        let pos = idx.iter().filter(|&&i| l[i]).count();
        assert_eq!((idx.len() - pos, pos), (85, 85));
        assert!(idx[100..].iter().all(|&i| i >= 85));

        let idx = upsample_indices(&labels(50, 50), 1).unwrap();
        assert_eq!(idx, (0..100).collect::<Vec<_>>());
        assert!(upsample_indices(&labels(5, 0), 1).is_err());
    }

    #[test]
    fn upsample_reported_counts() {
        let l = labels(1_196_328, 201_679);
        let idx = upsample_indices(&l, 7).unwrap();
        let pos = idx.iter().filter(|&&i| l[i]).count();
        assert_eq!((idx.len() - pos, pos), (1_196_328, 1_196_328));
    }
}
