use serde::{Deserialize, Serialize};

use super::{Classifier, Samples};
use crate::error::bail;
use crate::prelude::*;
use crate::Result;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KnnConfig {
    pub k: usize,
}

impl Default for KnnConfig {
    fn default() -> Self {
        KnnConfig { k: 5 }
    }
}

/// Weight added to the tie-break winner so that the argmax of the
/// probabilities agrees with the vote.
const TIE_NUDGE: f64 = 1e-9;

/// Brute-force Euclidean k-nearest-neighbour classifier.
///
/// Neighbours at equal distance are ordered by training index. A tied vote
/// goes to the class of the nearest neighbour among the tied classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Knn {
    k: usize,
    n_classes: usize,
    dim: usize,
    points: Vec<f64>,
    labels: Vec<usize>,
}

impl Knn {
    pub fn fit(train: &Samples, n_classes: usize, cfg: &KnnConfig) -> Result<Knn> {
        if cfg.k == 0 || cfg.k > train.len() {
            bail!(Config, "k = {} must be between 1 and the training size {}", cfg.k, train.len());
        }
        if let Some(&l) = train.labels().iter().find(|&&l| l >= n_classes) {
            bail!(Input, "label {l} is outside the {n_classes} classes");
        }
        Ok(Knn {
            k: cfg.k,
            n_classes,
            dim: train.sample_len(),
            points: (0..train.len()).flat_map(|i| train.sample(i).iter().copied()).collect(),
            labels: train.labels().to_vec(),
        })
    }

    /// Indices of the `k` nearest training points, nearest first.
    pub fn neighbours(&self, x: &[f64]) -> Vec<usize> {
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(self.k + 1);
        for (i, p) in self.points.chunks_exact(self.dim).enumerate() {
            let d: f64 = p.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum();
            if best.len() == self.k && d >= best[self.k - 1].0 {
                continue;
            }
            let at = best.partition_point(|&(bd, _)| bd <= d);
            best.insert(at, (d, i));
            best.truncate(self.k);
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    fn vote(&self, x: &[f64]) -> (Vec<usize>, usize) {
        let nn = self.neighbours(x);
        let mut counts = vec![0usize; self.n_classes];
        for &i in &nn {
            counts[self.labels[i]] += 1;
        }
        let top = *counts.iter().max().unwrap_or(&0);
        let winner = nn.iter().map(|&i| self.labels[i]).find(|&c| counts[c] == top).unwrap_or(0);
        (counts, winner)
    }
}

impl Classifier for Knn {
    fn n_classes(&self) -> usize {
        self.n_classes
    }

    fn predict_proba(&self, sample: &[f64]) -> Vec<f64> {
        let (counts, winner) = self.vote(sample);
        let total = self.k as f64 + TIE_NUDGE;
        counts
            .iter()
            .enumerate()
            .map(|(c, &n)| (n as f64 + if c == winner { TIE_NUDGE } else { 0.0 }) / total)
            .collect()
    }

    fn predict(&self, sample: &[f64]) -> usize {
        self.vote(sample).1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(points: &[[f64; 2]], labels: &[usize]) -> Samples {
        Samples::new(1, 2, points.concat(), labels.to_vec(), vec![0; labels.len()]).unwrap()
    }

    #[test]
    fn majority_of_three() {
        let train = samples(&[[0.0, 0.0]; 3].iter().chain(&[[1.0, 1.0]; 3]).copied().collect::<Vec<_>>(), &[0, 0, 0, 1, 1, 1]);
        let knn = Knn::fit(&train, 2, &KnnConfig { k: 3 }).unwrap();
        assert_eq!(knn.predict(&[0.1, 0.0]), 0);
        let p = knn.predict_proba(&[0.1, 0.0]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exact_match_with_k1() {
        let train = samples(&[[0.0, 0.0], [2.0, 1.0], [5.0, 5.0]], &[0, 2, 1]);
        let knn = Knn::fit(&train, 3, &KnnConfig { k: 1 }).unwrap();
        assert_eq!(knn.predict(&[2.0, 1.0]), 2);
    }

    #[test]
    fn tie_goes_to_nearest_neighbours_class() {
        let train = samples(&[[0.0, 0.0], [3.0, 0.0], [1.0, 0.0], [4.0, 0.0]], &[1, 1, 0, 0]);
        let knn = Knn::fit(&train, 2, &KnnConfig { k: 4 }).unwrap();
        // votes 2-2; nearest to 0.9 is the class-0 point at 1.0
        assert_eq!(knn.predict(&[0.9, 0.0]), 0);
        assert_eq!(super::super::argmax(&knn.predict_proba(&[0.9, 0.0])), 0);
        assert_eq!(knn.predict(&[0.1, 0.0]), 1);
        assert_eq!(super::super::argmax(&knn.predict_proba(&[0.1, 0.0])), 1);
    }

    #[test]
    fn k_larger_than_training_set_is_rejected() {
        let train = samples(&[[0.0, 0.0]], &[0]);
        assert!(Knn::fit(&train, 1, &KnnConfig { k: 2 }).is_err());
    }
}
