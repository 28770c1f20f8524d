//! Comment classification: featurization, the five model families,
//! evaluation and model persistence.

mod bayes;
mod eval;
mod knn;
mod linear;
pub mod text;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::annotation::LabeledExample;
use crate::error::{Error, Result};
use crate::ingestion::Corpus;

pub use bayes::BernoulliNb;
pub use eval::{
    cross_validate, evaluate, fold_assignment, load_grid, randomized_search, CvReport, EvalMetrics,
    Grid, SearchResult, DEFAULT_FOLDS, DEFAULT_THRESHOLD,
};
pub use knn::KNeighbors;
pub use linear::{LinearSvm, SvmParams};
pub use text::{featurize, tokenize, FeatureVector, Vocabulary};
pub use tree::{Forest, ForestParams, MaxFeatures, Node, Tree, TreeParams};

pub const MODEL_FORMAT: &str = "mentorscope-model";
pub const MODEL_VERSION: u32 = 1;

/// Featurized training data.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<FeatureVector>,
    pub y: Vec<bool>,
    pub n_features: usize,
}

/// Mixes a master seed with an index (splitmix64 finalizer).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    #[serde(alias = "rf")]
    RandomForest,
    #[serde(alias = "svm")]
    SupportVector,
    #[serde(alias = "nb")]
    NaiveBayesBernoulli,
    #[serde(alias = "dt")]
    DecisionTree,
    #[serde(alias = "knn")]
    KNeighbors,
}

impl Family {
    pub const ALL: [Family; 5] = [
        Family::RandomForest,
        Family::SupportVector,
        Family::NaiveBayesBernoulli,
        Family::DecisionTree,
        Family::KNeighbors,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::RandomForest => "random-forest",
            Family::SupportVector => "support-vector",
            Family::NaiveBayesBernoulli => "naive-bayes-bernoulli",
            Family::DecisionTree => "decision-tree",
            Family::KNeighbors => "k-neighbors",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Family::RandomForest => "rf",
            Family::SupportVector => "svm",
            Family::NaiveBayesBernoulli => "nb",
            Family::DecisionTree => "dt",
            Family::KNeighbors => "knn",
        }
    }

    /// Default hyperparameters. The forest's are the tuned values
    /// reported for the original study.
    pub fn defaults(self) -> Hyperparameters {
        use HyperValue::*;
        let pairs: Vec<(&str, HyperValue)> = match self {
            Family::RandomForest => vec![
                ("n_estimators", Int(2800)),
                ("max_depth", Int(73)),
                ("min_samples_split", Int(20)),
                ("min_samples_leaf", Int(2)),
                ("bootstrap", Bool(true)),
                ("max_features", Text("sqrt".into())),
            ],
            Family::DecisionTree => vec![
                ("max_depth", Text("none".into())),
                ("min_samples_split", Int(2)),
                ("min_samples_leaf", Int(1)),
                ("max_features", Text("all".into())),
            ],
            Family::NaiveBayesBernoulli => vec![("alpha", Float(1.0))],
            Family::SupportVector => vec![("c", Float(1.0)), ("epochs", Int(20))],
            Family::KNeighbors => vec![("k", Int(5))],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }

    /// Search space used when no grid file is given.
    pub fn default_grid(self) -> Grid {
        use HyperValue::*;
        let pairs: Vec<(&str, Vec<HyperValue>)> = match self {
            Family::RandomForest => vec![
                ("n_estimators", vec![Int(100), Int(500), Int(1000), Int(2800)]),
                ("max_depth", vec![Int(10), Int(30), Int(73), Text("none".into())]),
                ("min_samples_split", vec![Int(2), Int(10), Int(20)]),
                ("min_samples_leaf", vec![Int(1), Int(2), Int(4)]),
                ("bootstrap", vec![Bool(true), Bool(false)]),
            ],
            Family::DecisionTree => vec![
                ("max_depth", vec![Int(5), Int(10), Int(30), Text("none".into())]),
                ("min_samples_split", vec![Int(2), Int(10), Int(20)]),
                ("min_samples_leaf", vec![Int(1), Int(2), Int(4)]),
            ],
            Family::NaiveBayesBernoulli => {
                vec![("alpha", vec![Float(0.01), Float(0.1), Float(0.5), Float(1.0)])]
            }
            Family::SupportVector => vec![
                ("c", vec![Float(0.1), Float(1.0), Float(10.0), Float(100.0)]),
                ("epochs", vec![Int(10), Int(20), Int(50)]),
            ],
            Family::KNeighbors => vec![("k", vec![Int(1), Int(3), Int(5), Int(9), Int(15)])],
        };
        pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim().to_ascii_lowercase();
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s || f.short() == s)
            .ok_or_else(|| Error::arg(format!("unknown classifier family {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Bool(b) => write!(f, "{b}"),
            HyperValue::Int(i) => write!(f, "{i}"),
            HyperValue::Float(x) => write!(f, "{x}"),
            HyperValue::Text(s) => f.write_str(s),
        }
    }
}

pub type Hyperparameters = BTreeMap<String, HyperValue>;

fn get_usize(h: &Hyperparameters, key: &str, min: usize) -> Result<usize> {
    match h.get(key) {
        Some(HyperValue::Int(i)) if *i >= min as i64 => Ok(*i as usize),
        other => Err(Error::arg(format!("{key} must be an integer >= {min}, got {other:?}"))),
    }
}

fn get_positive(h: &Hyperparameters, key: &str) -> Result<f64> {
    let x = match h.get(key) {
        Some(HyperValue::Float(x)) => *x,
        Some(HyperValue::Int(i)) => *i as f64,
        other => return Err(Error::arg(format!("{key} must be a number, got {other:?}"))),
    };
    if x.is_finite() && x > 0.0 {
        Ok(x)
    } else {
        Err(Error::arg(format!("{key} must be positive, got {x}")))
    }
}

fn get_depth(h: &Hyperparameters) -> Result<Option<usize>> {
    match h.get("max_depth") {
        Some(HyperValue::Text(s)) if s.eq_ignore_ascii_case("none") => Ok(None),
        _ => get_usize(h, "max_depth", 1).map(Some),
    }
}

fn get_max_features(h: &Hyperparameters) -> Result<MaxFeatures> {
    match h.get("max_features") {
        Some(HyperValue::Text(s)) if s == "sqrt" => Ok(MaxFeatures::Sqrt),
        Some(HyperValue::Text(s)) if s == "all" => Ok(MaxFeatures::All),
        _ => get_usize(h, "max_features", 1).map(MaxFeatures::Count),
    }
}

fn tree_params(h: &Hyperparameters) -> Result<TreeParams> {
    Ok(TreeParams {
        max_depth: get_depth(h)?,
        min_samples_split: get_usize(h, "min_samples_split", 2)?,
        min_samples_leaf: get_usize(h, "min_samples_leaf", 1)?,
        max_features: get_max_features(h)?,
    })
}

/// Overlays `overrides` on the family defaults, rejecting unknown keys
/// and out-of-range values.
pub fn resolve_hyperparameters(family: Family, overrides: &Hyperparameters) -> Result<Hyperparameters> {
    let mut h = family.defaults();
    for (k, v) in overrides {
        if !h.contains_key(k) {
            return Err(Error::arg(format!("{family} has no hyperparameter {k:?}")));
        }
        h.insert(k.clone(), v.clone());
    }
    match family {
        Family::RandomForest => {
            get_usize(&h, "n_estimators", 1)?;
            if !matches!(h.get("bootstrap"), Some(HyperValue::Bool(_))) {
                return Err(Error::arg("bootstrap must be true or false"));
            }
            tree_params(&h)?;
        }
        Family::DecisionTree => {
            tree_params(&h)?;
        }
        Family::NaiveBayesBernoulli => {
            get_positive(&h, "alpha")?;
        }
        Family::SupportVector => {
            get_positive(&h, "c")?;
            get_usize(&h, "epochs", 1)?;
        }
        Family::KNeighbors => {
            get_usize(&h, "k", 1)?;
        }
    }
    Ok(h)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FittedState {
    Forest(Forest),
    Tree(Tree),
    Svm(LinearSvm),
    NaiveBayes(BernoulliNb),
    KNeighbors(KNeighbors),
}

impl FittedState {
    fn predict(&self, x: &FeatureVector) -> f64 {
        match self {
            FittedState::Forest(m) => m.predict(x),
            FittedState::Tree(m) => m.predict(x),
            FittedState::Svm(m) => m.predict(x),
            FittedState::NaiveBayes(m) => m.predict(x),
            FittedState::KNeighbors(m) => m.predict(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub family: Family,
    pub hyperparameters: Hyperparameters,
    pub seed: u64,
    pub vocabulary: Vocabulary,
    pub state: FittedState,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    #[serde(flatten)]
    model: serde_json::Value,
}

impl TrainedModel {
    /// Positive-class score in `[0, 1]`.
    pub fn score(&self, body: &str) -> f64 {
        self.state.predict(&featurize(body, Some(&self.vocabulary)))
    }

    pub fn predict(&self, body: &str) -> bool {
        self.score(body) >= DEFAULT_THRESHOLD
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = ModelFile {
            format: MODEL_FORMAT.to_string(),
            version: MODEL_VERSION,
            model: serde_json::to_value(self)?,
        };
        let text = serde_json::to_string(&file)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&text)?;
        if file.format != MODEL_FORMAT {
            return Err(Error::Malformed(format!(
                "{} is not a model file (format {:?})",
                path.display(),
                file.format
            )));
        }
        if file.version != MODEL_VERSION {
            return Err(Error::ModelVersion {
                found: file.version,
                expected: MODEL_VERSION,
            });
        }
        Ok(serde_json::from_value(file.model)?)
    }
}

/// Fits a vocabulary on `bodies` and featurizes them with it.
pub fn build_dataset<'a>(
    bodies: impl IntoIterator<Item = &'a str>,
    labels: Vec<bool>,
) -> (Vocabulary, Dataset) {
    let tokens: Vec<Vec<String>> = bodies.into_iter().map(tokenize).collect();
    let vocabulary = Vocabulary::fit(tokens.iter().map(Vec::as_slice));
    let x = tokens.iter().map(|t| vocabulary.vectorize(t)).collect();
    let n_features = vocabulary.len();
    (vocabulary, Dataset { x, y: labels, n_features })
}

pub fn train(
    family: Family,
    labeled: &[LabeledExample],
    hyperparameters: &Hyperparameters,
    seed: u64,
) -> Result<TrainedModel> {
    let h = resolve_hyperparameters(family, hyperparameters)?;
    let positives = labeled.iter().filter(|e| e.label()).count();
    if positives == 0 || positives == labeled.len() {
        return Err(Error::Training(format!(
            "training set needs both classes ({positives} positive of {})",
            labeled.len()
        )));
    }
    let (vocabulary, data) = build_dataset(
        labeled.iter().map(LabeledExample::body),
        labeled.iter().map(LabeledExample::label).collect(),
    );
    let state = match family {
        Family::RandomForest => {
            let params = ForestParams {
                n_trees: get_usize(&h, "n_estimators", 1)?,
                bootstrap: h.get("bootstrap") == Some(&HyperValue::Bool(true)),
                tree: tree_params(&h)?,
            };
            FittedState::Forest(Forest::fit(&data, params, seed))
        }
        Family::DecisionTree => {
            let params = ForestParams {
                n_trees: 1,
                bootstrap: false,
                tree: tree_params(&h)?,
            };
            let mut forest = Forest::fit(&data, params, seed);
            FittedState::Tree(forest.trees.pop().expect("one tree"))
        }
        Family::NaiveBayesBernoulli => {
            FittedState::NaiveBayes(BernoulliNb::fit(&data, get_positive(&h, "alpha")?))
        }
        Family::SupportVector => {
            let params = SvmParams {
                c: get_positive(&h, "c")?,
                epochs: get_usize(&h, "epochs", 1)?,
            };
            FittedState::Svm(LinearSvm::fit(&data, params, seed))
        }
        Family::KNeighbors => FittedState::KNeighbors(KNeighbors::fit(&data, get_usize(&h, "k", 1)?)),
    };
    Ok(TrainedModel {
        family,
        hyperparameters: h,
        seed,
        vocabulary,
        state,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub label: bool,
    pub score: f64,
}

/// Scores every comment in the corpus, keyed by comment id.
pub fn classify_corpus(model: &TrainedModel, corpus: &Corpus) -> BTreeMap<u64, Classification> {
    corpus
        .comments
        .par_iter()
        .map(|c| {
            let score = model.score(&c.body);
            (
                c.comment_id,
                Classification {
                    label: score >= DEFAULT_THRESHOLD,
                    score,
                },
            )
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct ScoreRow {
    comment_id: u64,
    score: f64,
    label: bool,
}

pub fn write_scores(path: &Path, scores: &BTreeMap<u64, Classification>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    if scores.is_empty() {
        w.write_record(["comment_id", "score", "label"])?;
    }
    for (&comment_id, c) in scores {
        w.serialize(ScoreRow {
            comment_id,
            score: c.score,
            label: c.label,
        })?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    w.into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?
        .flush()
        .map_err(|e| Error::io(path, e))
}

pub fn read_scores(path: &Path) -> Result<BTreeMap<u64, Classification>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut out = BTreeMap::new();
    for row in r.deserialize::<ScoreRow>() {
        let row = row?;
        if !(0.0..=1.0).contains(&row.score) {
            return Err(Error::Malformed(format!(
                "score {} for comment {} outside [0, 1]",
                row.score, row.comment_id
            )));
        }
        if out
            .insert(row.comment_id, Classification { label: row.label, score: row.score })
            .is_some()
        {
            return Err(Error::Malformed(format!("duplicate comment {} in scores", row.comment_id)));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::annotation::RuleTag;
    use std::collections::BTreeSet;

    pub(crate) fn toy(n: usize) -> Vec<LabeledExample> {
        let fillers = ["looks", "fine", "please", "update", "the", "docs", "test", "naming", "here", "later"];
        (0..n)
            .map(|i| {
                let pos = i % 2 == 0;
                let words: Vec<&str> = (0..4).map(|j| fillers[(i * 7 + j * 3) % fillers.len()]).collect();
                let body = if pos {
                    format!("{} because {}", words[..2].join(" "), words[2..].join(" "))
                } else {
                    words.join(" ")
                };
                let tags: BTreeSet<RuleTag> = if pos { [RuleTag::Suggestion].into() } else { BTreeSet::new() };
                LabeledExample::new(i as u64, body, pos, "a", tags, pos).unwrap()
            })
            .collect()
    }

    #[test]
    fn forest_defaults() {
        let h = Family::RandomForest.defaults();
        assert_eq!(h["n_estimators"], HyperValue::Int(2800));
        assert_eq!(h["max_depth"], HyperValue::Int(73));
        assert_eq!(h["min_samples_split"], HyperValue::Int(20));
        assert_eq!(h["min_samples_leaf"], HyperValue::Int(2));
        assert_eq!(h["bootstrap"], HyperValue::Bool(true));
        assert_eq!(h["max_features"], HyperValue::Text("sqrt".into()));
    }

    #[test]
    fn family_aliases() {
        assert_eq!("rf".parse::<Family>().unwrap(), Family::RandomForest);
        assert_eq!("k-neighbors".parse::<Family>().unwrap(), Family::KNeighbors);
        assert!("cnn".parse::<Family>().is_err());
        let f: Family = serde_json::from_str("\"svm\"").unwrap();
        assert_eq!(f, Family::SupportVector);
    }

    #[test]
    fn bad_hyperparameters_rejected() {
        let mut h = Hyperparameters::new();
        h.insert("depth".into(), HyperValue::Int(3));
        assert!(resolve_hyperparameters(Family::DecisionTree, &h).is_err());
        let mut h = Hyperparameters::new();
        h.insert("k".into(), HyperValue::Int(0));
        assert!(resolve_hyperparameters(Family::KNeighbors, &h).is_err());
    }

    #[test]
    fn single_class_is_training_error() {
        let data: Vec<_> = toy(10).into_iter().filter(|e| !e.label()).collect();
        for family in Family::ALL {
            assert!(matches!(
                train(family, &data, &Hyperparameters::new(), 1),
                Err(Error::Training(_))
            ));
        }
    }

    #[test]
    fn separable_training_accuracy() {
        let data = toy(60);
        for family in Family::ALL {
            let mut h = Hyperparameters::new();
            if family == Family::RandomForest {
                h.insert("n_estimators".into(), HyperValue::Int(50));
                h.insert("min_samples_split".into(), HyperValue::Int(2));
                h.insert("min_samples_leaf".into(), HyperValue::Int(1));
            }
            if family == Family::KNeighbors {
                h.insert("k".into(), HyperValue::Int(1));
            }
            let m = train(family, &data, &h, 3).unwrap();
            let correct = data.iter().filter(|e| m.predict(e.body()) == e.label()).count();
            assert_eq!(correct, data.len(), "{family}");
        }
    }

    #[test]
    fn deterministic_and_persistent() {
        let data = toy(40);
        let mut h = Hyperparameters::new();
        h.insert("n_estimators".into(), HyperValue::Int(30));
        let a = train(Family::RandomForest, &data, &h, 9).unwrap();
        let b = train(Family::RandomForest, &data, &h, 9).unwrap();
        assert_eq!(a, b);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        a.save(&path).unwrap();
        let c = TrainedModel::load(&path).unwrap();
        for probe in ["tests because docs", "looks fine", ""] {
            assert_eq!(a.score(probe), c.score(probe));
        }
    }

    #[test]
    fn model_version_checked() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(&path, r#"{"format":"mentorscope-model","version":9}"#).unwrap();
        assert!(matches!(
            TrainedModel::load(&path),
            Err(Error::ModelVersion { found: 9, expected: 1 })
        ));
    }

    #[test]
    fn empty_corpus_scores_nothing() {
        let m = train(Family::NaiveBayesBernoulli, &toy(10), &Hyperparameters::new(), 0).unwrap();
        assert!(classify_corpus(&m, &Corpus::default()).is_empty());
    }

    #[test]
    fn scores_roundtrip() {
        let mut s = BTreeMap::new();
        s.insert(3, Classification { label: true, score: 0.1 + 0.2 });
        s.insert(1, Classification { label: false, score: 0.0 });
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.csv");
        write_scores(&path, &s).unwrap();
        assert_eq!(read_scores(&path).unwrap(), s);
        write_scores(&path, &BTreeMap::new()).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "comment_id,score,label\n");
        assert!(read_scores(&path).unwrap().is_empty());
    }

    #[test]
    fn derived_seeds_differ() {
        let s: BTreeSet<u64> = (0..1000).map(|i| derive_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
        assert_ne!(derive_seed(7, 0), derive_seed(8, 0));
    }
}
