//! Labeled training data: sample sizing, reproducible sampling, rulebook
//! labels, annotation sessions and inter-rater agreement.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::Corpus;
use crate::stats::dist::normal_quantile;

/// Rulebook categories of guidance a comment can carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RuleTag {
    Instruction,
    Suggestion,
    FixMechanism,
}

impl RuleTag {
    pub const ALL: [RuleTag; 3] = [RuleTag::Instruction, RuleTag::Suggestion, RuleTag::FixMechanism];

    pub fn key(self) -> char {
        match self {
            RuleTag::Instruction => 'i',
            RuleTag::Suggestion => 's',
            RuleTag::FixMechanism => 'f',
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            RuleTag::Instruction => "instruction",
            RuleTag::Suggestion => "suggestion",
            RuleTag::FixMechanism => "fix-mechanism",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct LabeledExampleRepr {
    comment_id: u64,
    body: String,
    label: bool,
    annotator: String,
    #[serde(default)]
    rule_tags: BTreeSet<RuleTag>,
    #[serde(default)]
    has_explanation: bool,
}

/// A comment with a binary implicit-mentoring label.
///
/// A positive label requires at least one rule tag *and* an explanation;
/// construction (including deserialization) rejects anything else.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "LabeledExampleRepr", into = "LabeledExampleRepr")]
pub struct LabeledExample {
    comment_id: u64,
    body: String,
    label: bool,
    annotator: String,
    rule_tags: BTreeSet<RuleTag>,
    has_explanation: bool,
}

impl LabeledExample {
    pub fn new(
        comment_id: u64,
        body: impl Into<String>,
        label: bool,
        annotator: impl Into<String>,
        rule_tags: BTreeSet<RuleTag>,
        has_explanation: bool,
    ) -> Result<Self> {
        if label && !(has_explanation && !rule_tags.is_empty()) {
            return Err(Error::arg(format!(
                "comment {comment_id}: a positive label needs an explanation and at least one rule tag"
            )));
        }
        Ok(LabeledExample {
            comment_id,
            body: body.into(),
            label,
            annotator: annotator.into(),
            rule_tags,
            has_explanation,
        })
    }

    pub fn comment_id(&self) -> u64 {
        self.comment_id
    }
    pub fn body(&self) -> &str {
        &self.body
    }
    pub fn label(&self) -> bool {
        self.label
    }
    pub fn annotator(&self) -> &str {
        &self.annotator
    }
    pub fn rule_tags(&self) -> &BTreeSet<RuleTag> {
        &self.rule_tags
    }
    pub fn has_explanation(&self) -> bool {
        self.has_explanation
    }
}

impl TryFrom<LabeledExampleRepr> for LabeledExample {
    type Error = Error;

    fn try_from(r: LabeledExampleRepr) -> Result<Self> {
        LabeledExample::new(r.comment_id, r.body, r.label, r.annotator, r.rule_tags, r.has_explanation)
    }
}

impl From<LabeledExample> for LabeledExampleRepr {
    fn from(e: LabeledExample) -> Self {
        LabeledExampleRepr {
            comment_id: e.comment_id,
            body: e.body,
            label: e.label,
            annotator: e.annotator,
            rule_tags: e.rule_tags,
            has_explanation: e.has_explanation,
        }
    }
}

pub fn read_labels(path: &Path) -> Result<Vec<LabeledExample>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[LabeledExample]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for l in labels {
        serde_json::to_writer(&mut w, l)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Cochran's sample size with `p = 0.5`, finite-population corrected and
/// rounded up.
pub fn required_sample_size(population: u64, confidence: f64, margin: f64) -> Result<u64> {
    if population == 0 {
        return Err(Error::arg("population must be at least 1"));
    }
    if !(confidence > 0.0 && confidence < 1.0) {
        return Err(Error::arg(format!("confidence {confidence} outside (0, 1)")));
    }
    if !(margin > 0.0 && margin < 1.0) {
        return Err(Error::arg(format!("margin {margin} outside (0, 1)")));
    }
    let z = normal_quantile(1.0 - (1.0 - confidence) / 2.0);
    let n0 = z * z * 0.25 / (margin * margin);
    let n = n0 / (1.0 + (n0 - 1.0) / population as f64);
    // Absorb representation error so exact integers do not round up.
    let n = (n - 1e-9).ceil().max(1.0) as u64;
    Ok(n.min(population))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampledComment {
    pub comment_id: u64,
    pub project: String,
    pub pr: u64,
    pub body: String,
}

/// One annotator's judgement of one comment.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelEntry {
    pub annotator: String,
    pub comment_id: u64,
    pub label: bool,
    #[serde(default)]
    pub rule_tags: BTreeSet<RuleTag>,
    #[serde(default)]
    pub has_explanation: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum SessionLine {
    Header { seed: u64, population: u64, size: u64 },
    Item(SampledComment),
    Label(LabelEntry),
    Resolve(LabelEntry),
}

/// A reproducible sample plus the labels recorded against it.
///
/// Persisted as append-only newline-delimited JSON; a later entry for the
/// same annotator and comment supersedes an earlier one.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotationSession {
    pub seed: u64,
    pub population: u64,
    pub sample: Vec<SampledComment>,
    /// annotator -> comment id -> entry.
    pub labels: BTreeMap<String, BTreeMap<u64, LabelEntry>>,
    /// Adjudicated outcomes for comments the annotators disagreed on.
    pub resolutions: BTreeMap<u64, LabelEntry>,
}

/// Uniform sample without replacement of `size` comments, deterministic in
/// `seed`.
pub fn draw_sample(corpus: &Corpus, size: usize, seed: u64) -> Result<AnnotationSession> {
    let population = corpus.comments.len();
    if size > population {
        return Err(Error::arg(format!(
            "sample size {size} exceeds the {population} available comments"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let picked = rand::seq::index::sample(&mut rng, population, size);
    let sample = picked
        .iter()
        .map(|i| {
            let c = &corpus.comments[i];
            SampledComment {
                comment_id: c.comment_id,
                project: c.project.clone(),
                pr: c.pr,
                body: c.body.clone(),
            }
        })
        .collect();
    Ok(AnnotationSession {
        seed,
        population: population as u64,
        sample,
        labels: BTreeMap::new(),
        resolutions: BTreeMap::new(),
    })
}

/// Comment pairs two annotators labelled differently, or that the same
/// annotator labelled differently in two merged sessions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub comment_id: u64,
    pub first: LabelEntry,
    pub second: LabelEntry,
}

impl AnnotationSession {
    pub fn record(&mut self, entry: LabelEntry) {
        self.labels
            .entry(entry.annotator.clone())
            .or_default()
            .insert(entry.comment_id, entry);
    }

    pub fn resolve(&mut self, entry: LabelEntry) {
        self.resolutions.insert(entry.comment_id, entry);
    }

    pub fn annotators(&self) -> Vec<&str> {
        self.labels.keys().map(String::as_str).collect()
    }

    /// Sampled comments `annotator` has not labelled yet, in sample order.
    pub fn pending(&self, annotator: &str) -> Vec<&SampledComment> {
        let done = self.labels.get(annotator);
        self.sample
            .iter()
            .filter(|s| done.is_none_or(|d| !d.contains_key(&s.comment_id)))
            .collect()
    }

    /// Unions the labels of two sessions over the same sample. Entries from
    /// `other` win; same-annotator disagreements are listed in comment-id
    /// then annotator order.
    pub fn merge(&self, other: &AnnotationSession) -> Result<(AnnotationSession, Vec<Conflict>)> {
        if self.seed != other.seed || self.sample != other.sample {
            return Err(Error::arg("sessions were drawn from different samples"));
        }
        let mut merged = self.clone();
        let mut conflicts = Vec::new();
        for (annotator, entries) in &other.labels {
            for entry in entries.values() {
                if let Some(prev) = self.labels.get(annotator).and_then(|m| m.get(&entry.comment_id)) {
                    if prev.label != entry.label {
                        conflicts.push(Conflict {
                            comment_id: entry.comment_id,
                            first: prev.clone(),
                            second: entry.clone(),
                        });
                    }
                }
                merged.record(entry.clone());
            }
        }
        for r in other.resolutions.values() {
            merged.resolve(r.clone());
        }
        conflicts.sort_by(|a, b| {
            (a.comment_id, &a.first.annotator).cmp(&(b.comment_id, &b.first.annotator))
        });
        Ok((merged, conflicts))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut put = |line: &SessionLine| -> Result<()> {
            serde_json::to_writer(&mut w, line)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))
        };
        put(&SessionLine::Header {
            seed: self.seed,
            population: self.population,
            size: self.sample.len() as u64,
        })?;
        for s in &self.sample {
            put(&SessionLine::Item(s.clone()))?;
        }
        for entries in self.labels.values() {
            for e in entries.values() {
                put(&SessionLine::Label(e.clone()))?;
            }
        }
        for r in self.resolutions.values() {
            put(&SessionLine::Resolve(r.clone()))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Appends label entries to an existing session file.
    pub fn append_labels(path: &Path, entries: &[LabelEntry]) -> Result<()> {
        let mut file = fs::OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        for e in entries {
            let line = serde_json::to_string(&SessionLine::Label(e.clone()))?;
            writeln!(file, "{line}").map_err(|err| Error::io(path, err))?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut session: Option<AnnotationSession> = None;
        let mut expected = 0;
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parsed: SessionLine = serde_json::from_str(line)
                .map_err(|e| Error::Malformed(format!("{}:{}: {e}", path.display(), i + 1)))?;
            match (parsed, session.as_mut()) {
                (SessionLine::Header { seed, population, size }, None) => {
                    expected = size as usize;
                    session = Some(AnnotationSession {
                        seed,
                        population,
                        sample: Vec::with_capacity(expected),
                        labels: BTreeMap::new(),
                        resolutions: BTreeMap::new(),
                    });
                }
                (SessionLine::Header { .. }, Some(_)) => {
                    return Err(Error::Malformed(format!("{}:{}: second header", path.display(), i + 1)))
                }
                (_, None) => {
                    return Err(Error::Malformed(format!("{}: missing header", path.display())))
                }
                (SessionLine::Item(item), Some(s)) => s.sample.push(item),
                (SessionLine::Label(e), Some(s)) => s.record(e),
                (SessionLine::Resolve(e), Some(s)) => s.resolve(e),
            }
        }
        let session = session.ok_or_else(|| Error::Malformed(format!("{}: empty session", path.display())))?;
        if session.sample.len() != expected {
            return Err(Error::Malformed(format!(
                "{}: header announces {expected} items, found {}",
                path.display(),
                session.sample.len()
            )));
        }
        Ok(session)
    }
}

/// Cohen's kappa for two aligned binary label vectors.
///
/// When chance agreement is 1 (both raters used a single, identical label)
/// the ratio is 0/0; the result is then 1.0 for perfect observed agreement
/// and 0.0 otherwise.
pub fn cohens_kappa(a: &[bool], b: &[bool]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::arg(format!(
            "label vectors differ in length ({} vs {})",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::arg("kappa needs at least one paired label"));
    }
    let n = a.len() as f64;
    let agree = a.iter().zip(b).filter(|(x, y)| x == y).count() as f64;
    let pa = a.iter().filter(|&&x| x).count() as f64 / n;
    let pb = b.iter().filter(|&&x| x).count() as f64 / n;
    let po = agree / n;
    let pe = pa * pb + (1.0 - pa) * (1.0 - pb);
    if pe >= 1.0 {
        return Ok(if po >= 1.0 { 1.0 } else { 0.0 });
    }
    Ok((po - pe) / (1.0 - pe))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IrrReport {
    pub first: String,
    pub second: String,
    pub overlap: usize,
    pub observed_agreement: f64,
    pub kappa: f64,
    pub disagreements: Vec<u64>,
}

/// Pairwise agreement for every annotator pair with at least one shared
/// comment.
pub fn irr(session: &AnnotationSession) -> Vec<IrrReport> {
    let names = session.annotators();
    let mut out = Vec::new();
    for (i, a) in names.iter().enumerate() {
        for b in &names[i + 1..] {
            let la = &session.labels[*a];
            let lb = &session.labels[*b];
            let shared: Vec<u64> = la.keys().filter(|k| lb.contains_key(k)).copied().collect();
            if shared.is_empty() {
                continue;
            }
            let xa: Vec<bool> = shared.iter().map(|k| la[k].label).collect();
            let xb: Vec<bool> = shared.iter().map(|k| lb[k].label).collect();
            let agree = xa.iter().zip(&xb).filter(|(x, y)| x == y).count();
            out.push(IrrReport {
                first: a.to_string(),
                second: b.to_string(),
                overlap: shared.len(),
                observed_agreement: agree as f64 / shared.len() as f64,
                kappa: cohens_kappa(&xa, &xb).expect("aligned non-empty vectors"),
                disagreements: shared
                    .iter()
                    .zip(xa.iter().zip(&xb))
                    .filter(|(_, (x, y))| x != y)
                    .map(|(k, _)| *k)
                    .collect(),
            });
        }
    }
    out
}

/// Final training labels from a session.
///
/// Comments with a resolution use it. Otherwise all annotators must agree
/// on the label; any open disagreement aborts the export.
pub fn export_labels(session: &AnnotationSession) -> Result<Vec<LabeledExample>> {
    let mut out = Vec::new();
    let mut unresolved = Vec::new();
    for item in &session.sample {
        let id = item.comment_id;
        let entry = if let Some(r) = session.resolutions.get(&id) {
            r
        } else {
            let votes: Vec<&LabelEntry> = session.labels.values().filter_map(|m| m.get(&id)).collect();
            let Some(&first) = votes.first() else {
                continue;
            };
            if votes.iter().any(|v| v.label != first.label) {
                unresolved.push(id);
                continue;
            }
            first
        };
        out.push(LabeledExample::new(
            id,
            item.body.clone(),
            entry.label,
            entry.annotator.clone(),
            entry.rule_tags.clone(),
            entry.has_explanation,
        )?);
    }
    if !unresolved.is_empty() {
        return Err(Error::arg(format!(
            "{} disagreement(s) need resolution before export: {:?}",
            unresolved.len(),
            unresolved
        )));
    }
    Ok(out)
}

/// Terminal labelling loop.
///
/// For every pending comment: prints the text, asks for rule tags
/// (letters `i`, `s`, `f`), whether an explanation is given, and the final
/// label. A positive label that breaks the rulebook is refused and asked
/// again. `q` at any prompt stops the loop; entries collected so far are
/// returned.
pub fn label_loop<R: BufRead, W: Write>(
    session: &AnnotationSession,
    annotator: &str,
    mut input: R,
    mut out: W,
) -> Result<Vec<LabelEntry>> {
    let io = |e: std::io::Error| Error::io("<terminal>", e);
    let mut entries = Vec::new();
    let pending = session.pending(annotator);
    let total = pending.len();

    let mut ask = |out: &mut W, prompt: &str| -> Result<Option<String>> {
        write!(out, "{prompt}").map_err(io)?;
        out.flush().map_err(io)?;
        let mut line = String::new();
        if input.read_line(&mut line).map_err(io)? == 0 {
            return Ok(None);
        }
        let line = line.trim().to_lowercase();
        Ok((line != "q").then_some(line))
    };

    'items: for (n, item) in pending.into_iter().enumerate() {
        writeln!(out, "\n[{}/{}] comment {} ({}#{})", n + 1, total, item.comment_id, item.project, item.pr).map_err(io)?;
        writeln!(out, "{}", item.body).map_err(io)?;
        let legend: Vec<String> = RuleTag::ALL.iter().map(|t| format!("{}={}", t.key(), t.name())).collect();
        writeln!(out, "rule tags: {}", legend.join(" ")).map_err(io)?;

        let Some(tags) = ask(&mut out, "tags> ")? else { break };
        let rule_tags: BTreeSet<RuleTag> = RuleTag::ALL
            .iter()
            .copied()
            .filter(|t| tags.contains(t.key()))
            .collect();
        let Some(expl) = ask(&mut out, "explanation given? [y/n]> ")? else { break };
        let has_explanation = expl.starts_with('y');
        let suggested = has_explanation && !rule_tags.is_empty();
        loop {
            let prompt = format!(
                "implicit mentoring? [y/n] (rulebook: {})> ",
                if suggested { "y" } else { "n" }
            );
            let Some(answer) = ask(&mut out, &prompt)? else { break 'items };
            let label = match answer.as_str() {
                "" => suggested,
                a if a.starts_with('y') => true,
                a if a.starts_with('n') => false,
                _ => continue,
            };
            if label && !suggested {
                writeln!(out, "a positive label needs an explanation and a rule tag").map_err(io)?;
                continue;
            }
            entries.push(LabelEntry {
                annotator: annotator.to_string(),
                comment_id: item.comment_id,
                label,
                rule_tags: rule_tags.clone(),
                has_explanation,
            });
            break;
        }
    }
    Ok(entries)
}
