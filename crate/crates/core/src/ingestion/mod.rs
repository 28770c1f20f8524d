//! Pull-request corpus: record types, loading, exclusion rules and
//! per-project summary statistics.

mod client;
mod store;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::stats;

pub use client::{fetch_corpus, ExportClient, GitHubClient, HostingClient};
pub use store::{load_corpus, load_records, write_store, RawRecords, COMMENTS_EXT, CONTRIBUTORS_EXT, PRS_EXT};

pub type Timestamp = DateTime<Utc>;

/// Accepts RFC 3339 timestamps or bare `YYYY-MM-DD` dates (midnight UTC).
pub fn parse_timestamp(s: &str) -> Option<Timestamp> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc())
}

pub(crate) mod ts {
    use super::{parse_timestamp, Timestamp};
    use serde::{de::Error as _, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Timestamp, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&t.to_rfc3339_opts(chrono::SecondsFormat::AutoSi, true))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Timestamp, D::Error> {
        let s = String::deserialize(d)?;
        parse_timestamp(&s).ok_or_else(|| D::Error::custom(format!("bad timestamp {s:?}")))
    }

    pub mod option {
        use super::*;

        pub fn serialize<S: Serializer>(t: &Option<Timestamp>, s: S) -> Result<S::Ok, S::Error> {
            match t {
                Some(t) => super::serialize(t, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<Timestamp>, D::Error> {
            match Option::<String>::deserialize(d)? {
                None => Ok(None),
                Some(s) => parse_timestamp(&s)
                    .map(Some)
                    .ok_or_else(|| D::Error::custom(format!("bad timestamp {s:?}"))),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Contributor {
    pub login: String,
    #[serde(default)]
    pub display_name: Option<String>,
    #[serde(default)]
    pub location: Option<String>,
    /// Absent for accounts whose profile could not be retrieved.
    #[serde(default, with = "ts::option")]
    pub account_created_at: Option<Timestamp>,
    #[serde(default)]
    pub deleted: bool,
}

impl Contributor {
    /// A missing profile payload marks the account as deleted.
    pub(crate) fn normalize(mut self) -> Self {
        if self.account_created_at.is_none() {
            self.deleted = true;
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrState {
    Open,
    Closed,
    Merged,
}

/// Project-scoped pull-request identifier.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PrKey {
    pub project: String,
    pub pr_id: u64,
}

impl fmt::Display for PrKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.project, self.pr_id)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullRequest {
    pub pr_id: u64,
    pub project: String,
    pub author: String,
    #[serde(default)]
    pub description: String,
    #[serde(with = "ts")]
    pub created_at: Timestamp,
    #[serde(default)]
    pub reopened: bool,
    pub state: PrState,
}

impl PullRequest {
    pub fn key(&self) -> PrKey {
        PrKey {
            project: self.project.clone(),
            pr_id: self.pr_id,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrComment {
    pub comment_id: u64,
    /// Set from the file the record was read from when absent.
    #[serde(default)]
    pub project: String,
    /// Parent pull request's `pr_id` within `project`.
    pub pr: u64,
    pub author: String,
    pub body: String,
    #[serde(with = "ts")]
    pub created_at: Timestamp,
}

impl PrComment {
    pub fn pr_key(&self) -> PrKey {
        PrKey {
            project: self.project.clone(),
            pr_id: self.pr,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Project {
    pub name: String,
}

/// An immutable, validated set of pull-request records.
///
/// All collections are sorted by their identifiers, so two loads of the same
/// files compare equal.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corpus {
    pub projects: Vec<Project>,
    pub prs: Vec<PullRequest>,
    pub comments: Vec<PrComment>,
    pub contributors: Vec<Contributor>,
}

impl Corpus {
    pub fn is_empty(&self) -> bool {
        self.prs.is_empty() && self.comments.is_empty()
    }

    pub fn pr_index(&self) -> BTreeMap<PrKey, &PullRequest> {
        self.prs.iter().map(|p| (p.key(), p)).collect()
    }

    pub fn contributor_index(&self) -> BTreeMap<&str, &Contributor> {
        self.contributors
            .iter()
            .map(|c| (c.login.as_str(), c))
            .collect()
    }

    pub fn comment_index(&self) -> BTreeMap<u64, &PrComment> {
        self.comments.iter().map(|c| (c.comment_id, c)).collect()
    }

    /// Comments grouped by parent PR, in comment-id order.
    pub fn comments_by_pr(&self) -> BTreeMap<PrKey, Vec<&PrComment>> {
        let mut out: BTreeMap<PrKey, Vec<&PrComment>> = BTreeMap::new();
        for c in &self.comments {
            out.entry(c.pr_key()).or_default().push(c);
        }
        out
    }

    pub(crate) fn sort(&mut self) {
        self.projects.sort();
        self.projects.dedup();
        self.prs.sort_by_key(|a| a.key());
        self.comments.sort_by_key(|c| c.comment_id);
        self.contributors.sort_by(|a, b| a.login.cmp(&b.login));
    }
}

/// Why a record was not admitted into the corpus.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub source: String,
    pub line: Option<usize>,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadOutcome {
    pub corpus: Corpus,
    pub rejections: Vec<Rejection>,
}

/// A record paired with where it came from, for rejection reports.
#[derive(Debug, Clone)]
pub struct Located<T> {
    pub source: String,
    pub line: Option<usize>,
    pub record: T,
}

impl<T> Located<T> {
    fn reject(&self, reason: impl Into<String>) -> Rejection {
        Rejection {
            source: self.source.clone(),
            line: self.line,
            reason: reason.into(),
        }
    }
}

/// Validates raw records into a corpus, enforcing referential integrity,
/// id uniqueness and timestamp ordering. Offending records are reported,
/// never silently dropped.
pub fn assemble(raw: RawRecords) -> LoadOutcome {
    let RawRecords {
        projects,
        prs,
        comments,
        contributors,
        mut rejections,
    } = raw;

    let mut people: BTreeMap<String, Contributor> = BTreeMap::new();
    for rec in contributors {
        let c = rec.record.clone().normalize();
        if c.login.trim().is_empty() {
            rejections.push(rec.reject("empty login"));
            continue;
        }
        match people.get(&c.login) {
            Some(existing) if *existing == c => {}
            Some(_) => rejections.push(rec.reject(format!(
                "conflicting duplicate contributor {}",
                c.login
            ))),
            None => {
                people.insert(c.login.clone(), c);
            }
        }
    }

    let created_ok = |login: &str, at: Timestamp| -> Result<(), String> {
        match people.get(login) {
            None => Err(format!("unknown contributor {login}")),
            Some(c) => match c.account_created_at {
                Some(created) if at < created => Err(format!(
                    "timestamp precedes account creation of {login}"
                )),
                _ => Ok(()),
            },
        }
    };

    let mut pr_map: BTreeMap<PrKey, PullRequest> = BTreeMap::new();
    for rec in prs {
        let pr = &rec.record;
        if let Err(reason) = created_ok(&pr.author, pr.created_at) {
            rejections.push(rec.reject(reason));
            continue;
        }
        let key = pr.key();
        if pr_map.contains_key(&key) {
            rejections.push(rec.reject(format!("duplicate pull request {key}")));
            continue;
        }
        pr_map.insert(key, pr.clone());
    }

    let mut comment_map: BTreeMap<u64, PrComment> = BTreeMap::new();
    for rec in comments {
        let c = &rec.record;
        if c.body.trim().is_empty() {
            rejections.push(rec.reject("empty comment body"));
            continue;
        }
        let Some(parent) = pr_map.get(&c.pr_key()) else {
            rejections.push(rec.reject(format!("missing pull request {}", c.pr_key())));
            continue;
        };
        if c.created_at < parent.created_at {
            rejections.push(rec.reject("comment precedes its pull request"));
            continue;
        }
        if let Err(reason) = created_ok(&c.author, c.created_at) {
            rejections.push(rec.reject(reason));
            continue;
        }
        if comment_map.contains_key(&c.comment_id) {
            rejections.push(rec.reject(format!("duplicate comment {}", c.comment_id)));
            continue;
        }
        comment_map.insert(c.comment_id, c.clone());
    }

    let mut project_names: BTreeSet<String> = projects.into_iter().collect();
    project_names.extend(pr_map.keys().map(|k| k.project.clone()));

    let mut corpus = Corpus {
        projects: project_names.into_iter().map(|name| Project { name }).collect(),
        prs: pr_map.into_values().collect(),
        comments: comment_map.into_values().collect(),
        contributors: people.into_values().collect(),
    };
    corpus.sort();
    LoadOutcome { corpus, rejections }
}

/// Drops comments made by the PR's own author and every contribution by a
/// deleted account. PRs left without comments stay.
pub fn apply_exclusions(corpus: &Corpus) -> Corpus {
    let deleted: BTreeSet<&str> = corpus
        .contributors
        .iter()
        .filter(|c| c.deleted)
        .map(|c| c.login.as_str())
        .collect();

    let prs: Vec<PullRequest> = corpus
        .prs
        .iter()
        .filter(|p| !deleted.contains(p.author.as_str()))
        .cloned()
        .collect();
    let authors: BTreeMap<PrKey, &str> = prs.iter().map(|p| (p.key(), p.author.as_str())).collect();

    let comments = corpus
        .comments
        .iter()
        .filter(|c| !deleted.contains(c.author.as_str()))
        .filter(|c| matches!(authors.get(&c.pr_key()), Some(a) if *a != c.author))
        .cloned()
        .collect();

    Corpus {
        projects: corpus.projects.clone(),
        prs,
        comments,
        contributors: corpus
            .contributors
            .iter()
            .filter(|c| !c.deleted)
            .cloned()
            .collect(),
    }
}

/// Per-project raw counts feeding [`corpus_stats`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectProfile {
    pub project: String,
    pub developers: usize,
    pub prs: usize,
    pub comments: usize,
    pub age_weeks: f64,
}

/// Distinct contributors, PRs, non-author comments and activity span of
/// every project.
pub fn project_profiles(corpus: &Corpus) -> Vec<ProjectProfile> {
    #[derive(Default)]
    struct Acc<'a> {
        devs: BTreeSet<&'a str>,
        prs: usize,
        comments: usize,
        first: Option<Timestamp>,
        last: Option<Timestamp>,
    }
    impl Acc<'_> {
        fn touch(&mut self, t: Timestamp) {
            self.first = Some(self.first.map_or(t, |f| f.min(t)));
            self.last = Some(self.last.map_or(t, |l| l.max(t)));
        }
    }

    let mut acc: BTreeMap<&str, Acc> = corpus
        .projects
        .iter()
        .map(|p| (p.name.as_str(), Acc::default()))
        .collect();
    for pr in &corpus.prs {
        let a = acc.entry(pr.project.as_str()).or_default();
        a.devs.insert(&pr.author);
        a.prs += 1;
        a.touch(pr.created_at);
    }
    for c in &corpus.comments {
        let a = acc.entry(c.project.as_str()).or_default();
        a.devs.insert(&c.author);
        a.comments += 1;
        a.touch(c.created_at);
    }
    acc.into_iter()
        .map(|(name, a)| {
            let span = match (a.first, a.last) {
                (Some(f), Some(l)) => l - f,
                _ => Duration::zero(),
            };
            ProjectProfile {
                project: name.to_string(),
                developers: a.devs.len(),
                prs: a.prs,
                comments: a.comments,
                age_weeks: span.num_seconds() as f64 / (7.0 * 86_400.0),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dimension {
    Developers,
    TotalPrs,
    NonAuthorComments,
    ProjectAgeWeeks,
}

impl Dimension {
    pub const ALL: [Dimension; 4] = [
        Dimension::Developers,
        Dimension::TotalPrs,
        Dimension::NonAuthorComments,
        Dimension::ProjectAgeWeeks,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Dimension::Developers => "Developers",
            Dimension::TotalPrs => "Total pull requests",
            Dimension::NonAuthorComments => "Total PR comments (non-author)",
            Dimension::ProjectAgeWeeks => "Project age (weeks)",
        }
    }

    fn of(self, p: &ProjectProfile) -> f64 {
        match self {
            Dimension::Developers => p.developers as f64,
            Dimension::TotalPrs => p.prs as f64,
            Dimension::NonAuthorComments => p.comments as f64,
            Dimension::ProjectAgeWeeks => p.age_weeks,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub dimension: Dimension,
    pub max: f64,
    pub min: f64,
    pub mean: f64,
    pub median: f64,
}

/// Max/min/mean/median over projects. `rows` is empty for a corpus with no
/// projects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSummary {
    pub projects: usize,
    pub rows: Vec<SummaryRow>,
}

impl CorpusSummary {
    pub fn row(&self, d: Dimension) -> Option<&SummaryRow> {
        self.rows.iter().find(|r| r.dimension == d)
    }
}

pub fn corpus_stats(corpus: &Corpus) -> CorpusSummary {
    let profiles = project_profiles(corpus);
    if profiles.is_empty() {
        return CorpusSummary {
            projects: 0,
            rows: Vec::new(),
        };
    }
    let rows = Dimension::ALL
        .iter()
        .map(|&d| {
            let xs: Vec<f64> = profiles.iter().map(|p| d.of(p)).collect();
            SummaryRow {
                dimension: d,
                max: xs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                min: xs.iter().copied().fold(f64::INFINITY, f64::min),
                mean: stats::mean(&xs),
                median: stats::median(&xs).unwrap_or(f64::NAN),
            }
        })
        .collect();
    CorpusSummary {
        projects: profiles.len(),
        rows,
    }
}
