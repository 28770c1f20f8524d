//! Mentoring instances, contributor experience, direction and group arity.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::classifier::Classification;
use crate::error::{Error, Result};
use crate::ingestion::{Corpus, PrKey, Timestamp};
use crate::stats;

pub const DEFAULT_THRESHOLD_DAYS: i64 = 183;

const SECONDS_PER_DAY: f64 = 86_400.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    TopDown,
    Peer,
    BottomUp,
}

impl Direction {
    pub const ALL: [Direction; 3] = [Direction::TopDown, Direction::Peer, Direction::BottomUp];

    pub fn label(self) -> &'static str {
        match self {
            Direction::TopDown => "top-down",
            Direction::Peer => "peer",
            Direction::BottomUp => "bottom-up",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Arity {
    Dyad,
    Triad,
    Quadrad,
}

impl Arity {
    pub const ALL: [Arity; 3] = [Arity::Dyad, Arity::Triad, Arity::Quadrad];

    pub fn label(self) -> &'static str {
        match self {
            Arity::Dyad => "dyad",
            Arity::Triad => "triad",
            Arity::Quadrad => ">=quadrad",
        }
    }

    /// Group of `mentors` distinct mentors plus the mentee.
    pub fn from_mentors(mentors: usize) -> Result<Self> {
        match mentors {
            0 => Err(Error::arg("arity needs at least one mentor")),
            1 => Ok(Arity::Dyad),
            2 => Ok(Arity::Triad),
            _ => Ok(Arity::Quadrad),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Frame {
    Project,
    Global,
}

/// One positively classified comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MentoringInstance {
    pub project: String,
    pub pr_id: u64,
    pub comment_id: u64,
    /// PR author.
    pub mentee: String,
    /// Comment author.
    pub mentor: String,
    pub project_direction: Direction,
    /// Absent when either account creation date is unknown.
    pub global_direction: Option<Direction>,
    /// Mentee's first date minus the mentor's, in days.
    pub experience_delta_project: f64,
    pub experience_delta_global: Option<f64>,
}

impl MentoringInstance {
    pub fn pr_key(&self) -> PrKey {
        PrKey {
            project: self.project.clone(),
            pr_id: self.pr_id,
        }
    }

    pub fn direction(&self, frame: Frame) -> Option<Direction> {
        match frame {
            Frame::Project => Some(self.project_direction),
            Frame::Global => self.global_direction,
        }
    }

    pub fn delta(&self, frame: Frame) -> Option<f64> {
        match frame {
            Frame::Project => Some(self.experience_delta_project),
            Frame::Global => self.experience_delta_global,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperienceRecord {
    pub contributor: String,
    /// Earliest PR or comment per project.
    pub project_first_contribution: BTreeMap<String, Timestamp>,
    pub account_created_at: Option<Timestamp>,
}

/// First contribution per project and account age anchor for every
/// contributor that appears in the corpus.
pub fn experience(corpus: &Corpus) -> BTreeMap<String, ExperienceRecord> {
    let mut out: BTreeMap<String, ExperienceRecord> = corpus
        .contributors
        .iter()
        .map(|c| {
            (
                c.login.clone(),
                ExperienceRecord {
                    contributor: c.login.clone(),
                    project_first_contribution: BTreeMap::new(),
                    account_created_at: c.account_created_at,
                },
            )
        })
        .collect();
    let activity = corpus
        .prs
        .iter()
        .map(|p| (&p.author, &p.project, p.created_at))
        .chain(corpus.comments.iter().map(|c| (&c.author, &c.project, c.created_at)));
    for (login, project, at) in activity {
        let rec = out.entry(login.clone()).or_insert_with(|| ExperienceRecord {
            contributor: login.clone(),
            project_first_contribution: BTreeMap::new(),
            account_created_at: None,
        });
        rec.project_first_contribution
            .entry(project.clone())
            .and_modify(|t| *t = (*t).min(at))
            .or_insert(at);
    }
    out
}

/// Direction of `mentee_first - mentor_first`; strictly beyond the
/// threshold on either side, otherwise peer.
pub fn classify_direction(mentor_first: Timestamp, mentee_first: Timestamp, threshold_days: i64) -> Direction {
    let delta = mentee_first - mentor_first;
    let limit = Duration::days(threshold_days);
    if delta > limit {
        Direction::TopDown
    } else if delta < -limit {
        Direction::BottomUp
    } else {
        Direction::Peer
    }
}

fn days(d: Duration) -> f64 {
    d.num_milliseconds() as f64 / 1000.0 / SECONDS_PER_DAY
}

/// One instance per positive comment whose author is not the PR author.
pub fn build_instances(
    corpus: &Corpus,
    classifications: &BTreeMap<u64, Classification>,
    threshold_days: i64,
) -> Result<Vec<MentoringInstance>> {
    let prs = corpus.pr_index();
    let exp = experience(corpus);
    let mut out = Vec::new();
    for c in &corpus.comments {
        let class = classifications
            .get(&c.comment_id)
            .ok_or_else(|| Error::arg(format!("comment {} has no classification", c.comment_id)))?;
        if !class.label {
            continue;
        }
        let pr = prs
            .get(&c.pr_key())
            .ok_or_else(|| Error::arg(format!("comment {} has no parent PR", c.comment_id)))?;
        if c.author == pr.author {
            continue;
        }
        let (mentor, mentee) = (&exp[&c.author], &exp[&pr.author]);
        let first = |r: &ExperienceRecord| r.project_first_contribution[&c.project];
        let (mf, ef) = (first(mentor), first(mentee));
        let global = mentor.account_created_at.zip(mentee.account_created_at);
        out.push(MentoringInstance {
            project: c.project.clone(),
            pr_id: c.pr,
            comment_id: c.comment_id,
            mentee: pr.author.clone(),
            mentor: c.author.clone(),
            project_direction: classify_direction(mf, ef, threshold_days),
            global_direction: global.map(|(m, e)| classify_direction(m, e, threshold_days)),
            experience_delta_project: days(ef - mf),
            experience_delta_global: global.map(|(m, e)| days(e - m)),
        });
    }
    Ok(out)
}

/// Group arity of one PR from its distinct mentors.
pub fn arity(pr: &PrKey, instances: &[MentoringInstance]) -> Result<Arity> {
    let mentors: BTreeSet<&str> = instances
        .iter()
        .filter(|i| i.project == pr.project && i.pr_id == pr.pr_id)
        .map(|i| i.mentor.as_str())
        .collect();
    Arity::from_mentors(mentors.len()).map_err(|_| Error::arg(format!("{pr} has no mentoring instances")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArityRow {
    pub arity: Arity,
    pub prs: usize,
    pub share: f64,
}

/// Arity of every PR with at least one instance.
pub fn arity_distribution(instances: &[MentoringInstance]) -> Vec<ArityRow> {
    let mut mentors: BTreeMap<PrKey, BTreeSet<&str>> = BTreeMap::new();
    for i in instances {
        mentors.entry(i.pr_key()).or_default().insert(&i.mentor);
    }
    let total = mentors.len();
    let mut counts: BTreeMap<Arity, usize> = BTreeMap::new();
    for m in mentors.values() {
        *counts.entry(Arity::from_mentors(m.len()).expect("non-empty")).or_default() += 1;
    }
    Arity::ALL
        .into_iter()
        .map(|a| {
            let prs = counts.get(&a).copied().unwrap_or(0);
            ArityRow {
                arity: a,
                prs,
                share: if total == 0 { 0.0 } else { prs as f64 / total as f64 },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionRow {
    pub direction: Direction,
    pub count: usize,
    pub share: f64,
    /// Mean and sample standard deviation of `|delta|` in days.
    pub mean_gap_days: Option<f64>,
    pub sd_gap_days: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectionDistribution {
    pub frame: Frame,
    pub total: usize,
    pub rows: Vec<DirectionRow>,
}

impl DirectionDistribution {
    pub fn row(&self, d: Direction) -> &DirectionRow {
        self.rows.iter().find(|r| r.direction == d).expect("all directions present")
    }
}

/// Counts, shares and gap statistics per direction; instances without a
/// direction in `frame` are left out.
pub fn direction_distribution(instances: &[MentoringInstance], frame: Frame) -> DirectionDistribution {
    let mut gaps: BTreeMap<Direction, Vec<f64>> = BTreeMap::new();
    for i in instances {
        if let (Some(d), Some(delta)) = (i.direction(frame), i.delta(frame)) {
            gaps.entry(d).or_default().push(delta.abs());
        }
    }
    let total: usize = gaps.values().map(Vec::len).sum();
    let rows = Direction::ALL
        .into_iter()
        .map(|d| {
            let g = gaps.get(&d).map(Vec::as_slice).unwrap_or(&[]);
            DirectionRow {
                direction: d,
                count: g.len(),
                share: if total == 0 { 0.0 } else { g.len() as f64 / total as f64 },
                mean_gap_days: (!g.is_empty()).then(|| stats::mean(g)),
                sd_gap_days: stats::sample_sd(g),
            }
        })
        .collect();
    DirectionDistribution { frame, total, rows }
}

pub fn write_instances(path: &Path, instances: &[MentoringInstance]) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for i in instances {
        serde_json::to_writer(&mut w, i)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_instances(path: &Path) -> Result<Vec<MentoringInstance>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(Error::from))
        .collect()
}
