//! Bernoulli naive Bayes over term presence.

use serde::{Deserialize, Serialize};

use super::text::FeatureVector;
use super::Dataset;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BernoulliNb {
    /// Log prior of the negative and positive class.
    pub log_prior: [f64; 2],
    /// Per class: `ln p(present)` and `ln p(absent)` for each feature.
    pub log_present: [Vec<f64>; 2],
    pub log_absent: [Vec<f64>; 2],
    /// Sum of `log_absent`, so scoring only touches present features.
    pub absent_total: [f64; 2],
}

impl BernoulliNb {
    pub fn fit(data: &Dataset, alpha: f64) -> Self {
        let mut count = [0.0f64; 2];
        let mut present = [vec![0.0; data.n_features], vec![0.0; data.n_features]];
        for (x, &y) in data.x.iter().zip(&data.y) {
            let c = y as usize;
            count[c] += 1.0;
            for &(f, w) in &x.entries {
                if w > 0.0 {
                    present[c][f as usize] += 1.0;
                }
            }
        }
        let n = count[0] + count[1];
        let mut log_present = [Vec::new(), Vec::new()];
        let mut log_absent = [Vec::new(), Vec::new()];
        let mut absent_total = [0.0; 2];
        for c in 0..2 {
            let p: Vec<f64> = present[c]
                .iter()
                .map(|k| (k + alpha) / (count[c] + 2.0 * alpha))
                .collect();
            log_present[c] = p.iter().map(|p| p.ln()).collect();
            log_absent[c] = p.iter().map(|p| (1.0 - p).ln()).collect();
            absent_total[c] = log_absent[c].iter().sum();
        }
        BernoulliNb {
            log_prior: [(count[0] / n).ln(), (count[1] / n).ln()],
            log_present,
            log_absent,
            absent_total,
        }
    }

    /// Posterior probability of the positive class.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut joint = [0.0; 2];
        for (c, j) in joint.iter_mut().enumerate() {
            *j = self.log_prior[c] + self.absent_total[c];
            for &(f, w) in &x.entries {
                let f = f as usize;
                if w > 0.0 && f < self.log_present[c].len() {
                    *j += self.log_present[c][f] - self.log_absent[c][f];
                }
            }
        }
        1.0 / (1.0 + (joint[0] - joint[1]).exp())
    }
}
