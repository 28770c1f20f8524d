//! Name-based gender inference, confidence cutoff, project exclusion and
//! mentor/mentee gender pairs.
//!
//! The inference is binary because the upstream services are; the labels
//! say nothing about how anyone identifies.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::thread;
use std::time::Duration;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingestion::{Contributor, Corpus};
use crate::relations::{Direction, MentoringInstance};
use crate::stats::{self, StatResult};

pub const CONFIDENCE_CUTOFF: f64 = 0.90;
pub const API_KEY_VAR: &str = "MENTORSCOPE_GENDER_API_KEY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Woman,
    Man,
}

impl Gender {
    pub fn key(self) -> char {
        match self {
            Gender::Woman => 'w',
            Gender::Man => 'm',
        }
    }

    /// Maps a score on the -1 (man) .. +1 (woman) scale to a class and a
    /// confidence `|score|`.
    pub fn from_scale(score: f64) -> Option<(Gender, f64)> {
        if !score.is_finite() || score == 0.0 {
            return None;
        }
        let g = if score > 0.0 { Gender::Woman } else { Gender::Man };
        Some((g, score.abs().min(1.0)))
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Gender::Woman => "woman",
            Gender::Man => "man",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenderRecord {
    pub contributor: String,
    pub inferred: Gender,
    pub probability: f64,
    pub source: String,
}

/// A client's answer for one name: class and confidence in `[0, 1]`, or
/// `None` when the service has no opinion.
pub type Inference = Option<(Gender, f64)>;

pub trait GenderClient: Sync {
    fn source(&self) -> &str;
    fn infer(&self, name: &str, location: Option<&str>) -> Result<Inference>;
}

/// Offline client backed by a `name<TAB>score` table, scores on the -1..+1
/// scale. Unknown names get no answer.
pub struct FixtureGenderClient {
    scores: BTreeMap<String, f64>,
    calls: AtomicUsize,
}

impl FixtureGenderClient {
    pub fn new(scores: BTreeMap<String, f64>) -> Self {
        FixtureGenderClient {
            scores,
            calls: AtomicUsize::new(0),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scores = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let (name, score) = line
                .rsplit_once('\t')
                .ok_or_else(|| Error::Malformed(format!("{}:{}: expected name<TAB>score", path.display(), i + 1)))?;
            let score: f64 = score
                .trim()
                .parse()
                .map_err(|_| Error::Malformed(format!("{}:{}: bad score {score:?}", path.display(), i + 1)))?;
            if !(-1.0..=1.0).contains(&score) {
                return Err(Error::Malformed(format!("{}:{}: score outside -1..+1", path.display(), i + 1)));
            }
            scores.insert(name.trim().to_string(), score);
        }
        Ok(Self::new(scores))
    }

    pub fn calls(&self) -> usize {
        self.calls.load(Ordering::SeqCst)
    }
}

impl GenderClient for FixtureGenderClient {
    fn source(&self) -> &str {
        "fixture"
    }

    fn infer(&self, name: &str, _location: Option<&str>) -> Result<Inference> {
        self.calls.fetch_add(1, Ordering::SeqCst);
        Ok(self.scores.get(name).and_then(|&s| Gender::from_scale(s)))
    }
}

/// Adapter for a Namsor-style REST service:
/// `GET {base}/api2/json/gender/{first}/{last}` with an `X-API-KEY`
/// header, answering `{"genderScale": s}` with `s` in -1 (man) .. +1
/// (woman). The key comes from [`API_KEY_VAR`].
pub struct HttpGenderClient {
    agent: ureq::Agent,
    base: url::Url,
    key: String,
    attempts: u32,
    backoff: Duration,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct ScaleResponse {
    gender_scale: Option<f64>,
}

impl HttpGenderClient {
    pub const DEFAULT_BASE: &'static str = "https://v2.namsor.com/NamSorAPIv2";

    pub fn from_env(base: &str) -> Result<Self> {
        let key = std::env::var(API_KEY_VAR)
            .ok()
            .filter(|k| !k.is_empty())
            .ok_or_else(|| Error::Client(format!("{API_KEY_VAR} is not set")))?;
        Self::new(base, key)
    }

    pub fn new(base: &str, key: String) -> Result<Self> {
        let base = url::Url::parse(base).map_err(|e| Error::arg(format!("bad base url {base:?}: {e}")))?;
        if base.cannot_be_a_base() {
            return Err(Error::arg(format!("bad base url {base}")));
        }
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(30)))
            .build()
            .new_agent();
        Ok(HttpGenderClient {
            agent,
            base,
            key,
            attempts: 4,
            backoff: Duration::from_millis(500),
        })
    }

    /// Overrides the retry policy: `attempts` tries, doubling `backoff`.
    pub fn with_retry(mut self, attempts: u32, backoff: Duration) -> Self {
        self.attempts = attempts.max(1);
        self.backoff = backoff;
        self
    }

    fn url(&self, name: &str) -> url::Url {
        let mut parts = name.split_whitespace();
        let first = parts.next().unwrap_or("");
        let rest: Vec<&str> = parts.collect();
        let last = if rest.is_empty() { "-".to_string() } else { rest.join(" ") };
        let mut u = self.base.clone();
        u.path_segments_mut()
            .expect("checked in new")
            .pop_if_empty()
            .extend(["api2", "json", "gender", first, &last]);
        u
    }

    fn attempt(&self, url: &str) -> std::result::Result<Inference, (bool, String)> {
        let mut resp = self
            .agent
            .get(url)
            .header("X-API-KEY", &self.key)
            .header("Accept", "application/json")
            .call()
            .map_err(|e| (true, e.to_string()))?;
        let status = resp.status().as_u16();
        if status == 429 || status >= 500 {
            return Err((true, format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err((false, format!("HTTP {status}")));
        }
        let body: ScaleResponse = resp
            .body_mut()
            .read_json()
            .map_err(|e| (false, format!("bad response: {e}")))?;
        Ok(body.gender_scale.and_then(Gender::from_scale))
    }
}

impl GenderClient for HttpGenderClient {
    fn source(&self) -> &str {
        "http"
    }

    fn infer(&self, name: &str, _location: Option<&str>) -> Result<Inference> {
        let url = self.url(name);
        let mut wait = self.backoff;
        let mut last = String::new();
        for i in 0..self.attempts {
            match self.attempt(url.as_str()) {
                Ok(v) => return Ok(v),
                Err((retry, msg)) => {
                    last = msg;
                    if !retry {
                        break;
                    }
                    if i + 1 < self.attempts {
                        thread::sleep(wait);
                        wait *= 2;
                    }
                }
            }
        }
        // The key is never part of the message.
        Err(Error::Client(format!("gender lookup for {name:?} failed: {last}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct CacheRow {
    name: String,
    location: String,
    /// `woman`, `man`, or `unknown` when the service had no answer.
    class: String,
    confidence: f64,
}

/// On-disk answers keyed by `(name, location)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct GenderCache {
    entries: BTreeMap<(String, String), Inference>,
}

impl GenderCache {
    /// A missing file is an empty cache.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Ok(Self::default());
        }
        let mut r = csv::Reader::from_path(path)?;
        let mut entries = BTreeMap::new();
        for row in r.deserialize::<CacheRow>() {
            let row = row?;
            let value = match row.class.as_str() {
                "woman" => Some((Gender::Woman, row.confidence)),
                "man" => Some((Gender::Man, row.confidence)),
                "unknown" => None,
                other => return Err(Error::Malformed(format!("cache class {other:?}"))),
            };
            entries.insert((row.name, row.location), value);
        }
        Ok(GenderCache { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        if self.entries.is_empty() {
            w.write_record(["name", "location", "class", "confidence"])?;
        }
        for ((name, location), value) in &self.entries {
            let (class, confidence) = match value {
                Some((g, c)) => (g.to_string(), *c),
                None => ("unknown".to_string(), 0.0),
            };
            w.serialize(CacheRow {
                name: name.clone(),
                location: location.clone(),
                class,
                confidence,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, name: &str, location: Option<&str>) -> Option<&Inference> {
        self.entries
            .get(&(name.to_string(), location.unwrap_or("").to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unresolved {
    pub contributor: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InferenceOutcome {
    /// Contributors above the cutoff, by login.
    pub records: Vec<GenderRecord>,
    pub unresolved: Vec<Unresolved>,
}

impl InferenceOutcome {
    pub fn genders(&self) -> BTreeMap<String, Gender> {
        self.records
            .iter()
            .map(|r| (r.contributor.clone(), r.inferred))
            .collect()
    }
}

/// Writes gender records as CSV: contributor, gender, probability, source.
pub fn write_genders(path: &Path, records: &[GenderRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["contributor", "gender", "probability", "source"])?;
    for r in records {
        let g = match r.inferred {
            Gender::Woman => "woman",
            Gender::Man => "man",
        };
        w.write_record([r.contributor.as_str(), g, &r.probability.to_string(), r.source.as_str()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Looks up every contributor, consulting `cache` first and adding fresh
/// answers to it. Only confidences above [`CONFIDENCE_CUTOFF`] become
/// records; client failures and missing names are reported as unresolved
/// and not cached.
pub fn infer_genders(
    contributors: &[Contributor],
    client: &dyn GenderClient,
    cache: &mut GenderCache,
) -> InferenceOutcome {
    let key = |c: &Contributor| {
        c.display_name
            .as_deref()
            .map(str::trim)
            .filter(|n| !n.is_empty())
            .map(|n| (n.to_string(), c.location.clone().unwrap_or_default()))
    };
    let missing: BTreeSet<(String, String)> = contributors
        .iter()
        .filter_map(key)
        .filter(|k| !cache.entries.contains_key(k))
        .collect();
    let fetched: Vec<((String, String), Result<Inference>)> = missing
        .into_par_iter()
        .map(|k| {
            let loc = (!k.1.is_empty()).then_some(k.1.as_str());
            let v = client.infer(&k.0, loc);
            (k, v)
        })
        .collect();
    let mut failures = BTreeMap::new();
    for (k, v) in fetched {
        match v {
            Ok(v) => {
                cache.entries.insert(k, v);
            }
            Err(e) => {
                failures.insert(k, e.to_string());
            }
        }
    }
    let mut out = InferenceOutcome::default();
    for c in contributors {
        let Some(k) = key(c) else {
            out.unresolved.push(Unresolved {
                contributor: c.login.clone(),
                reason: "no display name".into(),
            });
            continue;
        };
        if let Some(reason) = failures.get(&k) {
            out.unresolved.push(Unresolved {
                contributor: c.login.clone(),
                reason: reason.clone(),
            });
            continue;
        }
        if let Some(Some((g, p))) = cache.entries.get(&k) {
            if *p > CONFIDENCE_CUTOFF {
                out.records.push(GenderRecord {
                    contributor: c.login.clone(),
                    inferred: *g,
                    probability: *p,
                    source: client.source().to_string(),
                });
            }
        }
    }
    out
}

/// Projects that have at least one confidently gendered woman among their
/// contributors (PR or comment authors). Projects with no gendered
/// contributor at all are therefore dropped too.
pub fn exclude_ungendered_projects(corpus: &Corpus, genders: &BTreeMap<String, Gender>) -> Vec<String> {
    let mut women: BTreeSet<&str> = BTreeSet::new();
    let activity = corpus
        .prs
        .iter()
        .map(|p| (&p.project, &p.author))
        .chain(corpus.comments.iter().map(|c| (&c.project, &c.author)));
    for (project, login) in activity {
        if genders.get(login) == Some(&Gender::Woman) {
            women.insert(project);
        }
    }
    corpus
        .projects
        .iter()
        .map(|p| p.name.clone())
        .filter(|p| women.contains(p.as_str()))
        .collect()
}

/// Mentor-gender to mentee-gender tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PairCounts {
    pub ww: u64,
    pub wm: u64,
    pub mw: u64,
    pub mm: u64,
    /// Instances with an ungendered endpoint.
    pub dropped: u64,
}

impl PairCounts {
    pub fn total(&self) -> u64 {
        self.ww + self.wm + self.mw + self.mm
    }

    fn add(&mut self, mentor: Option<Gender>, mentee: Option<Gender>) {
        match (mentor, mentee) {
            (Some(Gender::Woman), Some(Gender::Woman)) => self.ww += 1,
            (Some(Gender::Woman), Some(Gender::Man)) => self.wm += 1,
            (Some(Gender::Man), Some(Gender::Woman)) => self.mw += 1,
            (Some(Gender::Man), Some(Gender::Man)) => self.mm += 1,
            _ => self.dropped += 1,
        }
    }
}

pub fn pair_counts(instances: &[MentoringInstance], genders: &BTreeMap<String, Gender>) -> PairCounts {
    let mut out = PairCounts::default();
    for i in instances {
        out.add(genders.get(&i.mentor).copied(), genders.get(&i.mentee).copied());
    }
    out
}

/// Pair counts per project-frame direction.
pub fn pair_counts_by_direction(
    instances: &[MentoringInstance],
    genders: &BTreeMap<String, Gender>,
) -> BTreeMap<Direction, PairCounts> {
    let mut out: BTreeMap<Direction, PairCounts> =
        Direction::ALL.into_iter().map(|d| (d, PairCounts::default())).collect();
    for i in instances {
        out.get_mut(&i.project_direction)
            .expect("all directions present")
            .add(genders.get(&i.mentor).copied(), genders.get(&i.mentee).copied());
    }
    out
}

/// `(ww + mm) / total`, `None` for an empty table.
pub fn homophily_rate(c: &PairCounts) -> Option<f64> {
    let t = c.total();
    (t > 0).then(|| (c.ww + c.mm) as f64 / t as f64)
}

/// Per-gender activity on the retained projects.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderActivity {
    /// Distinct comment authors.
    pub commenters: u64,
    /// Distinct authors of at least one mentoring comment.
    pub mentors: u64,
    pub comments: u64,
    pub mentoring_comments: u64,
    /// Mentoring comments per project-frame direction.
    pub mentoring_by_direction: [u64; 3],
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenderSummary {
    pub women: GenderActivity,
    pub men: GenderActivity,
}

impl GenderSummary {
    pub fn get(&self, g: Gender) -> &GenderActivity {
        match g {
            Gender::Woman => &self.women,
            Gender::Man => &self.men,
        }
    }
}

fn direction_slot(d: Direction) -> usize {
    match d {
        Direction::TopDown => 0,
        Direction::Peer => 1,
        Direction::BottomUp => 2,
    }
}

/// Tallies gendered comment authors and their mentoring. `corpus` and
/// `instances` should already be restricted to the retained projects.
pub fn gender_summary(
    corpus: &Corpus,
    instances: &[MentoringInstance],
    genders: &BTreeMap<String, Gender>,
) -> GenderSummary {
    let mut s = GenderSummary::default();
    let mut commenters: BTreeSet<&str> = BTreeSet::new();
    let mut mentors: BTreeSet<&str> = BTreeSet::new();
    for c in &corpus.comments {
        if let Some(&g) = genders.get(&c.author) {
            let a = if g == Gender::Woman { &mut s.women } else { &mut s.men };
            a.comments += 1;
            if commenters.insert(&c.author) {
                a.commenters += 1;
            }
        }
    }
    for i in instances {
        if let Some(&g) = genders.get(&i.mentor) {
            let a = if g == Gender::Woman { &mut s.women } else { &mut s.men };
            a.mentoring_comments += 1;
            a.mentoring_by_direction[direction_slot(i.project_direction)] += 1;
            if mentors.insert(&i.mentor) {
                a.mentors += 1;
            }
        }
    }
    s
}

/// Column of a gender test table: all mentoring, or one direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Column {
    Overall,
    TopDown,
    Peer,
    BottomUp,
}

impl Column {
    pub const ALL: [Column; 4] = [Column::Overall, Column::TopDown, Column::Peer, Column::BottomUp];

    pub fn direction(self) -> Option<Direction> {
        match self {
            Column::Overall => None,
            Column::TopDown => Some(Direction::TopDown),
            Column::Peer => Some(Direction::Peer),
            Column::BottomUp => Some(Direction::BottomUp),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Column::Overall => "overall",
            Column::TopDown => "top-down",
            Column::Peer => "peer",
            Column::BottomUp => "bottom-up",
        }
    }
}

/// Inputs and outcome of one two-proportion test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionTest {
    pub column: Column,
    pub x1: u64,
    pub n1: u64,
    pub x2: u64,
    pub n2: u64,
    pub result: std::result::Result<StatResult, String>,
}

fn z_test(column: Column, x1: u64, n1: u64, x2: u64, n2: u64, alpha: f64) -> ProportionTest {
    ProportionTest {
        column,
        x1,
        n1,
        x2,
        n2,
        result: stats::two_prop_z_test(x1, n1, x2, n2)
            .map(|r| r.with_alpha(alpha))
            .map_err(|e| e.to_string()),
    }
}

/// Men (group 1) against women (group 2): share of their comments that
/// are mentoring. In a direction column the numerator counts mentoring in
/// that direction and the denominator leaves out mentoring in the others.
pub fn gender_mentoring_tests(summary: &GenderSummary, alpha: f64) -> Vec<ProportionTest> {
    let counts = |a: &GenderActivity, col: Column| -> (u64, u64) {
        match col.direction() {
            None => (a.mentoring_comments, a.comments),
            Some(d) => {
                let x = a.mentoring_by_direction[direction_slot(d)];
                (x, a.comments - (a.mentoring_comments - x))
            }
        }
    };
    Column::ALL
        .into_iter()
        .map(|col| {
            let (x1, n1) = counts(&summary.men, col);
            let (x2, n2) = counts(&summary.women, col);
            z_test(col, x1, n1, x2, n2, alpha)
        })
        .collect()
}

fn pairs_for(col: Column, overall: &PairCounts, by_dir: &BTreeMap<Direction, PairCounts>) -> PairCounts {
    match col.direction() {
        None => *overall,
        Some(d) => by_dir.get(&d).copied().unwrap_or_default(),
    }
}

/// Cross-gender mentoring: `mw / (mm + mw)` for men against
/// `wm / (ww + wm)` for women.
pub fn cross_gender_tests(
    overall: &PairCounts,
    by_direction: &BTreeMap<Direction, PairCounts>,
    alpha: f64,
) -> Vec<ProportionTest> {
    Column::ALL
        .into_iter()
        .map(|col| {
            let p = pairs_for(col, overall, by_direction);
            z_test(col, p.mw, p.mm + p.mw, p.wm, p.ww + p.wm, alpha)
        })
        .collect()
}

/// Homophilic against cross-gender pairs over the same total.
pub fn homophily_tests(
    overall: &PairCounts,
    by_direction: &BTreeMap<Direction, PairCounts>,
    alpha: f64,
) -> Vec<ProportionTest> {
    Column::ALL
        .into_iter()
        .map(|col| {
            let p = pairs_for(col, overall, by_direction);
            z_test(col, p.ww + p.mm, p.total(), p.wm + p.mw, p.total(), alpha)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::{BufRead, BufReader, Write};
    use std::net::TcpListener;

    fn contributor(login: &str, name: Option<&str>) -> Contributor {
        Contributor {
            login: login.into(),
            display_name: name.map(str::to_string),
            location: None,
            account_created_at: None,
            deleted: false,
        }
    }

    fn fixture() -> FixtureGenderClient {
        FixtureGenderClient::new(
            [("Ana Ruiz", 0.95), ("Bo Chen", -0.89), ("Carl Diaz", -0.99), ("Dee Ode", 0.90)]
                .into_iter()
                .map(|(n, s)| (n.to_string(), s))
                .collect(),
        )
    }

    #[test]
    fn cutoff_and_missing_names() {
        let people = [
            contributor("ana", Some("Ana Ruiz")),
            contributor("bo", Some("Bo Chen")),
            contributor("carl", Some("Carl Diaz")),
            contributor("dee", Some("Dee Ode")),
            contributor("anon", None),
            contributor("zed", Some("Zed Unknown")),
        ];
        let client = fixture();
        let mut cache = GenderCache::default();
        let out = infer_genders(&people, &client, &mut cache);
        let g = out.genders();
        assert_eq!(g.len(), 2);
        assert_eq!(g["ana"], Gender::Woman);
        assert_eq!(g["carl"], Gender::Man);
        assert_eq!(out.unresolved.len(), 1);
        assert_eq!(out.unresolved[0].contributor, "anon");
        assert_eq!(client.calls(), 5);
    }

    #[test]
    fn cached_second_run_makes_no_calls() {
        let people = [contributor("ana", Some("Ana Ruiz")), contributor("zed", Some("Zed"))];
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache.csv");
        let mut cache = GenderCache::load(&path).unwrap();
        let first = infer_genders(&people, &fixture(), &mut cache);
        cache.save(&path).unwrap();
        let mut again = GenderCache::load(&path).unwrap();
        assert_eq!(again, cache);
        let client = fixture();
        let second = infer_genders(&people, &client, &mut again);
        assert_eq!(client.calls(), 0);
        assert_eq!(first, second);
    }

    #[test]
    fn homophily_examples() {
        let c = |ww, wm, mw, mm| PairCounts { ww, wm, mw, mm, dropped: 0 };
        assert!((homophily_rate(&c(95, 295, 1353, 24887)).unwrap() - 0.9381).abs() < 5e-5);
        assert_eq!(homophily_rate(&c(1, 0, 0, 0)), Some(1.0));
        assert_eq!(homophily_rate(&c(0, 1, 1, 0)), Some(0.0));
        assert_eq!(homophily_rate(&c(0, 0, 0, 0)), None);
    }

    #[test]
    fn cross_gender_reference_overall() {
        let p = PairCounts { ww: 95, wm: 295, mw: 1353, mm: 24887, dropped: 0 };
        let t = cross_gender_tests(&p, &BTreeMap::new(), 0.05 / 3.0);
        let r = t[0].result.as_ref().unwrap();
        assert_eq!((t[0].x1, t[0].n1, t[0].x2, t[0].n2), (1353, 26240, 295, 390));
        assert_eq!(format!("{:.2}", r.statistic.abs()), "57.35");
        assert_eq!(format!("{:.2}", r.effect_size), "1.65");
        assert!(t[1].result.is_err());
    }

    fn serve(responses: Vec<String>) -> String {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let addr = listener.local_addr().unwrap();
        thread::spawn(move || {
            for body in responses {
                let (mut s, _) = listener.accept().unwrap();
                let mut r = BufReader::new(s.try_clone().unwrap());
                let mut line = String::new();
                while r.read_line(&mut line).unwrap() > 2 {
                    line.clear();
                }
                s.write_all(body.as_bytes()).unwrap();
            }
        });
        format!("http://{addr}/v2")
    }

    #[test]
    fn http_client_retries_then_answers() {
        let json = r#"{"genderScale":0.97,"likelyGender":"female"}"#;
        let ok = format!(
            "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{json}",
            json.len()
        );
        let busy = "HTTP/1.1 503 Busy\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
        let base = serve(vec![busy.to_string(), ok]);
        let client = HttpGenderClient::new(&base, "k".into())
            .unwrap()
            .with_retry(3, Duration::from_millis(1));
        assert_eq!(client.infer("Ana Ruiz", None).unwrap(), Some((Gender::Woman, 0.97)));
        assert!(client.url("Ana María Ruiz").as_str().ends_with("/v2/api2/json/gender/Ana/Mar%C3%ADa%20Ruiz"));
    }

    #[test]
    fn http_client_gives_up() {
        let busy = "HTTP/1.1 503 Busy\r\nContent-Length: 0\r\nConnection: close\r\n\r\n";
        let base = serve(vec![busy.to_string(), busy.to_string()]);
        let client = HttpGenderClient::new(&base, "secret".into())
            .unwrap()
            .with_retry(2, Duration::from_millis(1));
        let e = client.infer("Ana", None).unwrap_err().to_string();
        assert!(e.contains("503") && !e.contains("secret"));
    }
}
