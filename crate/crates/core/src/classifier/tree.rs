//! CART decision trees over sparse non-negative features, and bagged
//! forests of them.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::text::FeatureVector;
use super::{derive_seed, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum MaxFeatures {
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, n_features: usize) -> usize {
        let k = match self {
            MaxFeatures::Sqrt => (n_features as f64).sqrt().floor() as usize,
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
        };
        k.clamp(1, n_features.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    /// `None` grows until the other stopping rules apply.
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
}

/// Flat node array; children always follow their parent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Node {
    /// `(feature, threshold, left, right)`; values `<= threshold` go left.
    Split(u32, f64, u32, u32),
    /// Weighted fraction of positive training samples.
    Leaf(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        let mut at = 0usize;
        loop {
            match self.nodes[at] {
                Node::Leaf(p) => return p,
                Node::Split(f, t, l, r) => {
                    at = if x.get(f) <= t { l as usize } else { r as usize };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match nodes[at] {
                Node::Leaf(_) => 0,
                Node::Split(_, _, l, r) => 1 + go(nodes, l as usize).max(go(nodes, r as usize)),
            }
        }
        go(&self.nodes, 0)
    }
}

/// Column-major view of a dataset: for every feature, the samples with a
/// non-zero value, in sample order.
pub(crate) struct Columns {
    cols: Vec<Vec<(u32, f64)>>,
}

impl Columns {
    pub(crate) fn new(data: &Dataset) -> Self {
        let mut cols = vec![Vec::new(); data.n_features];
        for (s, x) in data.x.iter().enumerate() {
            for &(f, v) in &x.entries {
                cols[f as usize].push((s as u32, v));
            }
        }
        Columns { cols }
    }
}

struct Builder<'a> {
    cols: &'a Columns,
    y: &'a [bool],
    params: TreeParams,
    max_features: usize,
    /// Bootstrap multiplicity of each sample in the node being split.
    weight_in_node: Vec<u32>,
    goes_right: Vec<bool>,
    features: Vec<u32>,
    rng: ChaCha8Rng,
    nodes: Vec<Node>,
}

struct Best {
    feature: u32,
    threshold: f64,
    impurity: f64,
}

fn gini_sum(w: f64, pos: f64) -> f64 {
    // w * gini = w * (1 - p^2 - q^2) = 2 * pos * neg / w
    if w <= 0.0 {
        0.0
    } else {
        2.0 * pos * (w - pos) / w
    }
}

impl Builder<'_> {
    fn build(mut self, samples: Vec<(u32, u32)>) -> Tree {
        self.grow(samples, 0);
        Tree { nodes: self.nodes }
    }

    /// `samples` holds distinct `(sample, multiplicity)` pairs.
    fn grow(&mut self, samples: Vec<(u32, u32)>, depth: usize) -> u32 {
        let id = self.nodes.len() as u32;
        let w: u32 = samples.iter().map(|s| s.1).sum();
        let pos: u32 = samples
            .iter()
            .filter(|s| self.y[s.0 as usize])
            .map(|s| s.1)
            .sum();
        let leaf = Node::Leaf(if w == 0 { 0.0 } else { pos as f64 / w as f64 });
        self.nodes.push(leaf.clone());

        let depth_capped = self.params.max_depth.is_some_and(|d| depth >= d);
        if depth_capped
            || (w as usize) < self.params.min_samples_split
            || (w as usize) < 2 * self.params.min_samples_leaf
            || pos == 0
            || pos == w
        {
            return id;
        }

        let Some(best) = self.find_split(&samples, w, pos) else {
            return id;
        };

        for &(s, v) in &self.cols.cols[best.feature as usize] {
            if v > best.threshold {
                self.goes_right[s as usize] = true;
            }
        }
        let (right, left): (Vec<_>, Vec<_>) = samples
            .into_iter()
            .partition(|s| self.goes_right[s.0 as usize]);
        for &(s, _) in &self.cols.cols[best.feature as usize] {
            self.goes_right[s as usize] = false;
        }

        let l = self.grow(left, depth + 1);
        let r = self.grow(right, depth + 1);
        self.nodes[id as usize] = Node::Split(best.feature, best.threshold, l, r);
        id
    }

    fn find_split(&mut self, samples: &[(u32, u32)], w: u32, pos: u32) -> Option<Best> {
        for &(s, m) in samples {
            self.weight_in_node[s as usize] = m;
        }
        let parent = gini_sum(w as f64, pos as f64);
        let min_leaf = self.params.min_samples_leaf as u32;
        let n_features = self.features.len();
        let mut best: Option<Best> = None;
        let mut non_constant = 0usize;
        let mut values: Vec<(f64, u32, u32)> = Vec::new();

        // Lazy Fisher-Yates over the feature list. Keep drawing past
        // `max_features` until at least one non-constant feature is seen.
        for i in 0..n_features {
            if i >= self.max_features && non_constant > 0 {
                break;
            }
            let j = self.rng.random_range(i..n_features);
            self.features.swap(i, j);
            let f = self.features[i];

            values.clear();
            for &(s, v) in &self.cols.cols[f as usize] {
                let m = self.weight_in_node[s as usize];
                if m > 0 {
                    values.push((v, m, if self.y[s as usize] { m } else { 0 }));
                }
            }
            if values.is_empty() {
                continue;
            }
            let nz_w: u32 = values.iter().map(|v| v.1).sum();
            let nz_pos: u32 = values.iter().map(|v| v.2).sum();
            values.sort_by(|a, b| a.0.total_cmp(&b.0));
            if nz_w == w && values[0].0 == values[values.len() - 1].0 {
                continue;
            }
            non_constant += 1;

            // Sweep thresholds; the implicit zero block comes first.
            let (mut lw, mut lpos) = (w - nz_w, pos - nz_pos);
            let mut prev = 0.0f64;
            let mut k = 0;
            if lw == 0 {
                // No zeros: start with the first distinct value on the left.
                prev = values[0].0;
                while k < values.len() && values[k].0 == prev {
                    lw += values[k].1;
                    lpos += values[k].2;
                    k += 1;
                }
            }
            loop {
                if k >= values.len() {
                    break;
                }
                let rw = w - lw;
                if lw >= min_leaf && rw >= min_leaf {
                    let impurity = gini_sum(lw as f64, lpos as f64)
                        + gini_sum(rw as f64, (pos - lpos) as f64);
                    if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                        best = Some(Best {
                            feature: f,
                            threshold: prev + (values[k].0 - prev) / 2.0,
                            impurity,
                        });
                    }
                }
                prev = values[k].0;
                while k < values.len() && values[k].0 == prev {
                    lw += values[k].1;
                    lpos += values[k].2;
                    k += 1;
                }
            }
        }
        for &(s, _) in samples {
            self.weight_in_node[s as usize] = 0;
        }
        best.filter(|b| b.impurity < parent - 1e-12)
    }
}

/// Fits one tree on `rows` (with multiplicities).
pub(crate) fn fit_tree(
    data: &Dataset,
    cols: &Columns,
    rows: Vec<(u32, u32)>,
    params: TreeParams,
    seed: u64,
) -> Tree {
    let builder = Builder {
        cols,
        y: &data.y,
        params,
        max_features: params.max_features.resolve(data.n_features),
        weight_in_node: vec![0; data.y.len()],
        goes_right: vec![false; data.y.len()],
        features: (0..data.n_features as u32).collect(),
        rng: ChaCha8Rng::seed_from_u64(seed),
        nodes: Vec::new(),
    };
    builder.build(rows)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub bootstrap: bool,
    pub tree: TreeParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    /// Each tree gets a seed derived from `(seed, tree index)`, so the
    /// result is the same whatever the worker count.
    pub fn fit(data: &Dataset, params: ForestParams, seed: u64) -> Forest {
        let cols = Columns::new(data);
        let n = data.y.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = derive_seed(seed, t as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(tree_seed);
                let rows = if params.bootstrap {
                    let mut counts = vec![0u32; n];
                    for _ in 0..n {
                        counts[rng.random_range(0..n)] += 1;
                    }
                    counts
                        .into_iter()
                        .enumerate()
                        .filter(|&(_, c)| c > 0)
                        .map(|(s, c)| (s as u32, c))
                        .collect()
                } else {
                    (0..n as u32).map(|s| (s, 1)).collect()
                };
                fit_tree(data, &cols, rows, params.tree, rng.random())
            })
            .collect();
        Forest { trees }
    }

    /// Fraction of trees voting positive.
    pub fn predict(&self, x: &FeatureVector) -> f64 {
        if self.trees.is_empty() {
            return 0.0;
        }
        let votes = self.trees.iter().filter(|t| t.predict(x) > 0.5).count();
        votes as f64 / self.trees.len() as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fv(entries: &[(u32, f64)]) -> FeatureVector {
        FeatureVector {
            entries: entries.to_vec(),
            version: String::new(),
        }
    }

    fn toy() -> Dataset {
        // Feature 0 present only in positives; feature 1 noise.
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..40 {
            let pos = i % 2 == 0;
            let mut e = Vec::new();
            if pos {
                e.push((0, 0.5 + (i as f64) / 100.0));
            }
            if i % 3 == 0 {
                e.push((1, 0.3));
            }
            x.push(fv(&e));
            y.push(pos);
        }
        Dataset { x, y, n_features: 2 }
    }

    fn params(depth: Option<usize>) -> TreeParams {
        TreeParams {
            max_depth: depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
        }
    }

    #[test]
    fn single_tree_separates() {
        let d = toy();
        let cols = Columns::new(&d);
        let rows = (0..40).map(|s| (s, 1)).collect();
        let t = fit_tree(&d, &cols, rows, params(None), 1);
        assert_eq!(t.depth(), 1);
        for (x, &y) in d.x.iter().zip(&d.y) {
            assert_eq!(t.predict(x) > 0.5, y);
        }
    }

    #[test]
    fn depth_zero_is_prior() {
        let d = toy();
        let cols = Columns::new(&d);
        let rows = (0..40).map(|s| (s, 1)).collect();
        let t = fit_tree(&d, &cols, rows, params(Some(0)), 1);
        assert_eq!(t.nodes, vec![Node::Leaf(0.5)]);
    }

    #[test]
    fn min_leaf_respected() {
        // One positive outlier cannot be isolated with min leaf 2.
        let x = vec![fv(&[(0, 1.0)]), fv(&[]), fv(&[]), fv(&[])];
        let d = Dataset { x, y: vec![true, false, false, false], n_features: 1 };
        let cols = Columns::new(&d);
        let rows = (0..4).map(|s| (s, 1)).collect();
        let mut p = params(None);
        p.min_samples_leaf = 2;
        let t = fit_tree(&d, &cols, rows, p, 0);
        assert_eq!(t.nodes.len(), 1);
    }

    #[test]
    fn forest_deterministic() {
        let d = toy();
        let p = ForestParams {
            n_trees: 25,
            bootstrap: true,
            tree: TreeParams { max_features: MaxFeatures::Sqrt, ..params(None) },
        };
        let a = Forest::fit(&d, p, 7);
        let b = Forest::fit(&d, p, 7);
        assert_eq!(a, b);
        assert!(d.x.iter().zip(&d.y).all(|(x, &y)| (a.predict(x) > 0.5) == y));
    }
}
