//! k-nearest neighbours under cosine similarity.

use serde::{Deserialize, Serialize};

use super::text::FeatureVector;
use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KNeighbors {
    pub k: usize,
    pub x: Vec<FeatureVector>,
    pub y: Vec<bool>,
}

impl KNeighbors {
    pub fn fit(data: &Dataset, k: usize) -> Self {
        KNeighbors {
            k: k.max(1),
            x: data.x.clone(),
            y: data.y.clone(),
        }
    }

    /// Fraction of positive labels among the `k` most similar training
    /// vectors; equal similarities keep the earlier training example.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut sims: Vec<(f64, usize)> = self
            .x
            .iter()
            .enumerate()
            .map(|(i, t)| (t.dot(x), i))
            .collect();
        sims.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let k = self.k.min(sims.len());
        if k == 0 {
            return 0.0;
        }
        let pos = sims[..k].iter().filter(|(_, i)| self.y[*i]).count();
        pos as f64 / k as f64
    }
}
