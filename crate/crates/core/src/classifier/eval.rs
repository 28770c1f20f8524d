//! Metrics, k-fold cross-validation and randomized hyperparameter search.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, resolve_hyperparameters, train, Family, HyperValue, Hyperparameters};
use crate::annotation::LabeledExample;
use crate::error::{Error, Result};

pub const DEFAULT_THRESHOLD: f64 = 0.5;
pub const DEFAULT_FOLDS: usize = 10;

/// Named candidate values per hyperparameter.
pub type Grid = BTreeMap<String, Vec<HyperValue>>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    /// `None` when the truth holds a single class.
    pub auc: Option<f64>,
}

/// Precision, recall and F1 of `score >= threshold`, and the rank AUC
/// with tied pairs counting one half. Empty denominators give 0.
pub fn evaluate(scores: &[f64], truth: &[bool], threshold: f64) -> Result<EvalMetrics> {
    if scores.len() != truth.len() {
        return Err(Error::arg(format!(
            "{} scores for {} labels",
            scores.len(),
            truth.len()
        )));
    }
    if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::arg(format!("score {s} outside [0, 1]")));
    }
    let (mut tp, mut fp, mut fn_) = (0u64, 0u64, 0u64);
    for (&s, &t) in scores.iter().zip(truth) {
        match (s >= threshold, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fn_ += 1,
            (false, false) => {}
        }
    }
    let ratio = |a: u64, b: u64| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok(EvalMetrics {
        precision,
        recall,
        f1,
        auc: auc(scores, truth),
    })
}

/// Mann-Whitney statistic over positives, using mid-ranks for ties.
fn auc(scores: &[f64], truth: &[bool]) -> Option<f64> {
    let pos = truth.iter().filter(|&&t| t).count();
    let neg = truth.len() - pos;
    if pos == 0 || neg == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // Ranks i+1 ..= j+1 share their mean.
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| truth[k]).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (pos * (pos + 1)) as f64 / 2.0;
    Some(u / (pos as f64 * neg as f64))
}

/// Shuffles `0..n` with `seed` and cuts it into `folds` contiguous parts
/// whose sizes differ by at most one.
pub fn fold_assignment(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>> {
    if folds < 2 {
        return Err(Error::arg(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::arg(format!("{n} examples cannot fill {folds} folds")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / folds, n % folds);
    let mut out = Vec::with_capacity(folds);
    let mut start = 0;
    for f in 0..folds {
        let len = base + usize::from(f < extra);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub mean: EvalMetrics,
    pub folds: Vec<EvalMetrics>,
}

/// k-fold cross-validation. Examples are put in a canonical order before
/// the seeded shuffle, so the input order does not matter. The mean AUC
/// covers the folds where it is defined.
pub fn cross_validate(
    family: Family,
    labeled: &[LabeledExample],
    hyperparameters: &Hyperparameters,
    folds: usize,
    seed: u64,
) -> Result<CvReport> {
    let mut data: Vec<&LabeledExample> = labeled.iter().collect();
    data.sort_by(|a, b| {
        (a.comment_id(), a.body(), a.label()).cmp(&(b.comment_id(), b.body(), b.label()))
    });
    let parts = fold_assignment(data.len(), folds, seed)?;
    let mut per_fold = Vec::with_capacity(folds);
    for (f, test) in parts.iter().enumerate() {
        let mut held_out = vec![false; data.len()];
        test.iter().for_each(|&i| held_out[i] = true);
        let train_set: Vec<LabeledExample> = data
            .iter()
            .zip(&held_out)
            .filter(|(_, &h)| !h)
            .map(|(e, _)| (*e).clone())
            .collect();
        let model = train(family, &train_set, hyperparameters, derive_seed(seed, f as u64))?;
        let scores: Vec<f64> = test.iter().map(|&i| model.score(data[i].body())).collect();
        let truth: Vec<bool> = test.iter().map(|&i| data[i].label()).collect();
        per_fold.push(evaluate(&scores, &truth, DEFAULT_THRESHOLD)?);
    }
    let k = per_fold.len() as f64;
    let aucs: Vec<f64> = per_fold.iter().filter_map(|m| m.auc).collect();
    let mean = EvalMetrics {
        precision: per_fold.iter().map(|m| m.precision).sum::<f64>() / k,
        recall: per_fold.iter().map(|m| m.recall).sum::<f64>() / k,
        f1: per_fold.iter().map(|m| m.f1).sum::<f64>() / k,
        auc: (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64),
    };
    Ok(CvReport {
        mean,
        folds: per_fold,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: Hyperparameters,
    pub cv_f1: f64,
    /// Every evaluated combination with its CV F1, in sampling order.
    pub trials: Vec<(Hyperparameters, f64)>,
}

fn decode(grid: &Grid, mut index: usize) -> Hyperparameters {
    let mut h = Hyperparameters::new();
    for (k, values) in grid {
        h.insert(k.clone(), values[index % values.len()].clone());
        index /= values.len();
    }
    h
}

/// Samples `iterations` distinct grid points (all of them if the grid is
/// smaller), scores each by 10-fold CV F1 and keeps the first best.
pub fn randomized_search(
    family: Family,
    labeled: &[LabeledExample],
    grid: &Grid,
    iterations: usize,
    seed: u64,
) -> Result<SearchResult> {
    if grid.is_empty() || grid.values().any(Vec::is_empty) {
        return Err(Error::arg("hyperparameter grid is empty"));
    }
    if iterations == 0 {
        return Err(Error::arg("iterations must be at least 1"));
    }
    let total = grid
        .values()
        .try_fold(1usize, |acc, v| acc.checked_mul(v.len()));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points: Vec<usize> = match total {
        Some(t) => rand::seq::index::sample(&mut rng, t, iterations.min(t)).into_vec(),
        None => (0..iterations).map(|_| rng.random_range(0..usize::MAX)).collect(),
    };
    let mut trials = Vec::with_capacity(points.len());
    for p in points {
        let h = resolve_hyperparameters(family, &decode(grid, p))?;
        let f1 = cross_validate(family, labeled, &h, DEFAULT_FOLDS, seed)?.mean.f1;
        trials.push((h, f1));
    }
    let (best, cv_f1) = trials
        .iter()
        .fold(None::<&(Hyperparameters, f64)>, |acc, t| match acc {
            Some(b) if b.1 >= t.1 => Some(b),
            _ => Some(t),
        })
        .cloned()
        .expect("at least one trial");
    Ok(SearchResult { best, cv_f1, trials })
}

/// Reads a grid from a `.json` or `.toml` file.
pub fn load_grid(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let grid: Grid = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text)?
    } else {
        toml::from_str(&text)?
    };
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::super::tests::toy;
    use super::*;

    #[test]
    fn hand_computed_confusion() {
        // TP=9, FP=1, FN=3, TN=7.
        let mut scores = vec![0.9; 9];
        scores.push(0.8);
        scores.extend([0.1; 3]);
        scores.extend([0.2; 7]);
        let mut truth = vec![true; 9];
        truth.push(false);
        truth.extend([true; 3]);
        truth.extend([false; 7]);
        let m = evaluate(&scores, &truth, 0.5).unwrap();
        assert!((m.precision - 0.9).abs() < 1e-15);
        assert!((m.recall - 0.75).abs() < 1e-15);
        assert!((m.f1 - 9.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn auc_conventions() {
        let truth = [false, false, true, true];
        assert_eq!(evaluate(&[0.1, 0.2, 0.8, 0.9], &truth, 0.5).unwrap().auc, Some(1.0));
        assert_eq!(evaluate(&[0.5; 4], &truth, 0.5).unwrap().auc, Some(0.5));
        assert_eq!(evaluate(&[0.3, 0.2], &[true, true], 0.5).unwrap().auc, None);
        // One positive ties one negative: (1 + 0.5) / 2.
        assert_eq!(evaluate(&[0.2, 0.5, 0.5, 0.9], &truth, 0.5).unwrap().auc, Some(0.875));
    }

    #[test]
    fn no_predicted_positives() {
        let m = evaluate(&[0.1, 0.2], &[true, false], 0.5).unwrap();
        assert_eq!((m.precision, m.recall, m.f1), (0.0, 0.0, 0.0));
    }

    #[test]
    fn bad_inputs() {
        assert!(evaluate(&[0.1], &[true, false], 0.5).is_err());
        assert!(evaluate(&[1.5], &[true], 0.5).is_err());
        assert!(fold_assignment(5, 10, 0).is_err());
        assert!(fold_assignment(5, 1, 0).is_err());
    }

    #[test]
    fn folds_partition() {
        let parts = fold_assignment(23, 10, 4).unwrap();
        let mut all: Vec<usize> = parts.iter().flatten().copied().collect();
        all.sort();
        assert_eq!(all, (0..23).collect::<Vec<_>>());
        assert!(parts.iter().all(|p| p.len() == 2 || p.len() == 3));
    }

    #[test]
    fn separable_cv_is_perfect() {
        let data = toy(60);
        let r = cross_validate(Family::NaiveBayesBernoulli, &data, &Hyperparameters::new(), 10, 1).unwrap();
        assert_eq!(r.mean.f1, 1.0);
        assert_eq!(r.folds.len(), 10);
    }

    #[test]
    fn cv_ignores_input_order() {
        let data = toy(40);
        let mut rev = data.clone();
        rev.reverse();
        let h = Hyperparameters::new();
        assert_eq!(
            cross_validate(Family::SupportVector, &data, &h, 5, 2).unwrap(),
            cross_validate(Family::SupportVector, &rev, &h, 5, 2).unwrap()
        );
    }

    #[test]
    fn singleton_grid() {
        let mut grid = Grid::new();
        grid.insert("k".into(), vec![HyperValue::Int(3)]);
        let r = randomized_search(Family::KNeighbors, &toy(30), &grid, 4, 0).unwrap();
        assert_eq!(r.best["k"], HyperValue::Int(3));
        assert_eq!(r.trials.len(), 1);
    }

    #[test]
    fn deeper_tree_wins_or_ties() {
        let mut grid = Grid::new();
        grid.insert("max_depth".into(), vec![HyperValue::Int(1), HyperValue::Int(50)]);
        let data = toy(60);
        let r = randomized_search(Family::DecisionTree, &data, &grid, 2, 5).unwrap();
        let score = |d: i64| r.trials.iter().find(|t| t.0["max_depth"] == HyperValue::Int(d)).unwrap().1;
        assert!(score(50) >= score(1));
        assert_eq!(r.cv_f1, score(50).max(score(1)));
    }

    #[test]
    fn search_is_seeded() {
        let data = toy(30);
        let grid = Family::KNeighbors.default_grid();
        let a = randomized_search(Family::KNeighbors, &data, &grid, 3, 11).unwrap();
        let b = randomized_search(Family::KNeighbors, &data, &grid, 3, 11).unwrap();
        assert_eq!(a, b);
    }
}
