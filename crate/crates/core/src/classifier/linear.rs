//! Linear support-vector classifier trained with Pegasos sub-gradient
//! steps on the hinge loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::text::FeatureVector;
use super::Dataset;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    /// Inverse regularization strength.
    pub c: f64,
    pub epochs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    /// Weight of the constant feature.
    pub bias: f64,
}

impl LinearSvm {
    pub fn fit(data: &Dataset, params: SvmParams, seed: u64) -> Self {
        let n = data.y.len();
        let lambda = 1.0 / (params.c * n as f64);
        // w = scale * v keeps the shrink step O(1).
        let mut v = vec![0.0; data.n_features];
        let mut v_bias = 0.0;
        let mut scale = 1.0f64;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let steps = params.epochs.max(1) * n;
        for t in 1..=steps {
            let i = rng.random_range(0..n);
            let x = &data.x[i];
            let y = if data.y[i] { 1.0 } else { -1.0 };
            let eta = 1.0 / (lambda * t as f64);
            let margin = scale * (x.entries.iter().map(|&(f, w)| v[f as usize] * w).sum::<f64>() + v_bias);
            let shrink = 1.0 - eta * lambda;
            if shrink <= 0.0 {
                // First step (t = 1) zeroes the previous iterate.
                v.iter_mut().for_each(|w| *w = 0.0);
                v_bias = 0.0;
                scale = 1.0;
            } else {
                scale *= shrink;
            }
            if y * margin < 1.0 {
                let step = eta * y / scale;
                for &(f, w) in &x.entries {
                    v[f as usize] += step * w;
                }
                v_bias += step;
            }
            if scale < 1e-9 {
                v.iter_mut().for_each(|w| *w *= scale);
                v_bias *= scale;
                scale = 1.0;
            }
        }
        LinearSvm {
            weights: v.into_iter().map(|w| w * scale).collect(),
            bias: v_bias * scale,
        }
    }

    pub fn decision(&self, x: &FeatureVector) -> f64 {
        x.entries
            .iter()
            .filter_map(|&(f, w)| self.weights.get(f as usize).map(|c| c * w))
            .sum::<f64>()
            + self.bias
    }

    /// Logistic squashing of the margin; 0.5 on the separating hyperplane.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        1.0 / (1.0 + (-self.decision(x)).exp())
    }
}
