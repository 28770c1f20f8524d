//! Comment text normalization and tf-idf features.

use std::collections::{BTreeMap, HashMap};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const URL_TOKEN: &str = "__url__";
pub const CODE_TOKEN: &str = "__code__";

fn fenced_code() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?s)```.*?(```|$)|`[^`\n]*`").expect("static regex"))
}

fn url() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?:https?|ftp)://\S+|www\.\S+").expect("static regex"))
}

/// Lowercases, collapses code and URLs into placeholders, splits on
/// non-word characters and drops single-character tokens.
pub fn tokenize(body: &str) -> Vec<String> {
    let lowered = body.to_lowercase();
    let no_code = fenced_code().replace_all(&lowered, format!(" {CODE_TOKEN} "));
    let no_urls = url().replace_all(&no_code, format!(" {URL_TOKEN} "));
    no_urls
        .split(|c: char| !(c.is_alphanumeric() || c == '_'))
        .filter(|t| t.chars().count() > 1)
        .map(str::to_string)
        .collect()
}

/// Frozen term list with inverse document frequencies `ln(N / df)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Vocabulary {
    terms: Vec<String>,
    idf: Vec<f64>,
    #[serde(skip)]
    index: OnceLock<HashMap<String, u32>>,
}

impl Vocabulary {
    /// Fits on tokenized training documents. Terms are sorted, so the
    /// result does not depend on document order.
    pub fn fit<'a>(docs: impl IntoIterator<Item = &'a [String]>) -> Self {
        let mut df: BTreeMap<&str, u64> = BTreeMap::new();
        let mut n = 0u64;
        for doc in docs {
            n += 1;
            let mut seen: Vec<&str> = doc.iter().map(String::as_str).collect();
            seen.sort_unstable();
            seen.dedup();
            for t in seen {
                *df.entry(t).or_default() += 1;
            }
        }
        let (terms, idf) = df
            .into_iter()
            .map(|(t, d)| (t.to_string(), (n as f64 / d as f64).ln()))
            .unzip();
        Vocabulary {
            terms,
            idf,
            index: OnceLock::new(),
        }
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    /// Vocabulary of a single document with unit idf.
    fn local(tokens: &[String]) -> Self {
        let mut terms = tokens.to_vec();
        terms.sort();
        terms.dedup();
        let idf = vec![1.0; terms.len()];
        Vocabulary {
            terms,
            idf,
            index: OnceLock::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.lookup(term).map(|i| self.idf[i as usize])
    }

    pub fn lookup(&self, term: &str) -> Option<u32> {
        self.index
            .get_or_init(|| {
                self.terms
                    .iter()
                    .enumerate()
                    .map(|(i, t)| (t.clone(), i as u32))
                    .collect()
            })
            .get(term)
            .copied()
    }

    /// Short content hash identifying this term list.
    pub fn version(&self) -> String {
        let mut h = Sha256::new();
        for t in &self.terms {
            h.update(t.as_bytes());
            h.update([0u8]);
        }
        hex::encode(&h.finalize()[..6])
    }

    pub fn vectorize(&self, tokens: &[String]) -> FeatureVector {
        let mut tf: BTreeMap<u32, f64> = BTreeMap::new();
        for t in tokens {
            if let Some(i) = self.lookup(t) {
                *tf.entry(i).or_default() += 1.0;
            }
        }
        let mut entries: Vec<(u32, f64)> = tf
            .into_iter()
            .map(|(i, c)| (i, c * self.idf[i as usize]))
            .filter(|&(_, w)| w > 0.0)
            .collect();
        let norm = entries.iter().map(|(_, w)| w * w).sum::<f64>().sqrt();
        if norm > 0.0 {
            for e in &mut entries {
                e.1 /= norm;
            }
        }
        FeatureVector {
            entries,
            version: self.version(),
        }
    }
}

impl PartialEq for Vocabulary {
    fn eq(&self, other: &Self) -> bool {
        self.terms == other.terms && self.idf == other.idf
    }
}

/// L2-normalized sparse tf-idf vector, sorted by term index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub entries: Vec<(u32, f64)>,
    pub version: String,
}

impl FeatureVector {
    pub fn get(&self, index: u32) -> f64 {
        self.entries
            .binary_search_by_key(&index, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn dot(&self, other: &FeatureVector) -> f64 {
        let (mut i, mut j, mut acc) = (0, 0, 0.0);
        let (a, b) = (&self.entries, &other.entries);
        while i < a.len() && j < b.len() {
            match a[i].0.cmp(&b[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    acc += a[i].1 * b[j].1;
                    i += 1;
                    j += 1;
                }
            }
        }
        acc
    }
}

/// Featurizes one comment. Without a vocabulary the document's own terms
/// are used with unit idf; with one, out-of-vocabulary terms are ignored.
pub fn featurize(body: &str, vocabulary: Option<&Vocabulary>) -> FeatureVector {
    let tokens = tokenize(body);
    match vocabulary {
        Some(v) => v.vectorize(&tokens),
        None => Vocabulary::local(&tokens).vectorize(&tokens),
    }
}
