//! PR-level prevalence of mentoring and its relation to PR complexity.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::ingestion::{Corpus, PrKey};
use crate::relations::MentoringInstance;
use crate::stats::{self, StatResult};

/// Number of simultaneous hypotheses the complexity tests are corrected for.
pub const COMPLEXITY_HYPOTHESES: u32 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prevalence {
    pub prs: usize,
    pub prs_with_mentoring: usize,
    pub commenters: usize,
    pub mentors: usize,
    /// `None` for an empty corpus.
    pub pr_fraction: Option<f64>,
    pub mentor_fraction: Option<f64>,
    /// Non-author comments per PR.
    pub mean_comments_per_pr: Option<f64>,
    pub sd_comments_per_pr: Option<f64>,
}

pub fn prevalence(corpus: &Corpus, instances: &[MentoringInstance]) -> Prevalence {
    let prs = corpus.pr_index();
    let mut per_pr: BTreeMap<PrKey, f64> = prs.keys().map(|k| (k.clone(), 0.0)).collect();
    let mut commenters = BTreeSet::new();
    for c in &corpus.comments {
        let key = c.pr_key();
        if prs.get(&key).is_some_and(|p| p.author != c.author) {
            *per_pr.get_mut(&key).expect("indexed") += 1.0;
            commenters.insert(c.author.as_str());
        }
    }
    let with: BTreeSet<PrKey> = instances.iter().map(MentoringInstance::pr_key).collect();
    let mentors: BTreeSet<&str> = instances.iter().map(|i| i.mentor.as_str()).collect();
    let counts: Vec<f64> = per_pr.into_values().collect();
    let frac = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
    Prevalence {
        prs: prs.len(),
        prs_with_mentoring: with.len(),
        commenters: commenters.len(),
        mentors: mentors.len(),
        pr_fraction: frac(with.len(), prs.len()),
        mentor_fraction: frac(mentors.len(), commenters.len()),
        mean_comments_per_pr: (!counts.is_empty()).then(|| stats::mean(&counts)),
        sd_comments_per_pr: stats::sample_sd(&counts),
    }
}

fn markup() -> &'static [(Regex, &'static str)] {
    static RE: OnceLock<Vec<(Regex, &'static str)>> = OnceLock::new();
    RE.get_or_init(|| {
        [
            (r"(?s)```.*?(```|$)", " "),
            (r"(?s)<!--.*?-->", " "),
            (r"!\[[^\]]*\]\([^)]*\)", " "),
            (r"\[([^\]]*)\]\([^)]*\)", "$1"),
            (r"</?[A-Za-z][^>]*>", " "),
            (r"`([^`]*)`", "$1"),
            (r"(?m)^\s{0,3}(#{1,6}|>|[-*+]|\d+\.)\s+", ""),
            (r"(\*\*|__|\*|~~)", ""),
        ]
        .into_iter()
        .map(|(p, r)| (Regex::new(p).expect("static regex"), r))
        .collect()
    })
}

/// Drops code blocks, comments, images, tags and emphasis; keeps link
/// text and inline code.
pub fn strip_markup(text: &str) -> String {
    let mut s = text.to_string();
    for (re, rep) in markup() {
        s = re.replace_all(&s, *rep).into_owned();
    }
    s
}

pub fn word_count(description: &str) -> usize {
    strip_markup(description).split_whitespace().count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordinessRow {
    pub pr: PrKey,
    pub words: usize,
    pub wordy: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WordinessSplit {
    pub median_words: Option<f64>,
    pub rows: Vec<WordinessRow>,
}

/// A PR is wordy when its description has strictly more words than the
/// corpus median.
pub fn wordiness_split(corpus: &Corpus) -> WordinessSplit {
    let words: Vec<(PrKey, usize)> = corpus
        .prs
        .iter()
        .map(|p| (p.key(), word_count(&p.description)))
        .collect();
    let counts: Vec<f64> = words.iter().map(|w| w.1 as f64).collect();
    let median = stats::median(&counts);
    let rows = words
        .into_iter()
        .map(|(pr, n)| WordinessRow {
            pr,
            words: n,
            wordy: median.is_some_and(|m| n as f64 > m),
        })
        .collect();
    WordinessSplit {
        median_words: median,
        rows,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupTest {
    pub name: String,
    /// PRs in the flagged group (wordy, reopened) and in the rest.
    pub n1: usize,
    pub n2: usize,
    pub result: Result<StatResult, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComplexityTests {
    pub alpha_adjusted: f64,
    pub wordiness: GroupTest,
    pub reopened: GroupTest,
}

fn group_test(name: &str, counts: &BTreeMap<PrKey, f64>, flag: impl Fn(&PrKey) -> bool, alpha: f64) -> GroupTest {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (k, &c) in counts {
        if flag(k) {
            a.push(c);
        } else {
            b.push(c);
        }
    }
    GroupTest {
        name: name.to_string(),
        n1: a.len(),
        n2: b.len(),
        result: stats::welch_t_test(&a, &b)
            .map(|r| r.with_alpha(alpha))
            .map_err(|e| e.to_string()),
    }
}

/// Welch tests of mentoring comments per PR: wordy against other PRs and
/// reopened against other PRs. A failing test does not stop the other.
pub fn complexity_tests(corpus: &Corpus, instances: &[MentoringInstance], alpha: f64) -> ComplexityTests {
    let alpha_adjusted = stats::bonferroni(alpha, COMPLEXITY_HYPOTHESES).expect("m >= 1");
    let mut counts: BTreeMap<PrKey, f64> = corpus.prs.iter().map(|p| (p.key(), 0.0)).collect();
    for i in instances {
        if let Some(c) = counts.get_mut(&i.pr_key()) {
            *c += 1.0;
        }
    }
    let split = wordiness_split(corpus);
    let wordy: BTreeSet<&PrKey> = split.rows.iter().filter(|r| r.wordy).map(|r| &r.pr).collect();
    let reopened: BTreeSet<PrKey> = corpus.prs.iter().filter(|p| p.reopened).map(|p| p.key()).collect();
    ComplexityTests {
        alpha_adjusted,
        wordiness: group_test("wordy", &counts, |k| wordy.contains(k), alpha_adjusted),
        reopened: group_test("reopened", &counts, |k| reopened.contains(k), alpha_adjusted),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingestion::{PrState, PullRequest};
    use chrono::{TimeZone, Utc};

    fn pr(id: u64, desc: &str, reopened: bool) -> PullRequest {
        PullRequest {
            pr_id: id,
            project: "p".into(),
            author: "a".into(),
            description: desc.to_string(),
            created_at: Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            reopened,
            state: PrState::Open,
        }
    }

    fn inst(pr_id: u64, mentor: &str) -> MentoringInstance {
        MentoringInstance {
            project: "p".into(),
            pr_id,
            comment_id: 0,
            mentee: "a".into(),
            mentor: mentor.into(),
            project_direction: crate::relations::Direction::Peer,
            global_direction: None,
            experience_delta_project: 0.0,
            experience_delta_global: None,
        }
    }

    #[test]
    fn pr_fraction() {
        let corpus = Corpus {
            prs: (1..=10).map(|i| pr(i, "", false)).collect(),
            ..Default::default()
        };
        let p = prevalence(&corpus, &[inst(1, "b"), inst(2, "b"), inst(2, "c"), inst(3, "d")]);
        assert_eq!(p.pr_fraction, Some(0.3));
        assert_eq!(p.mean_comments_per_pr, Some(0.0));
        let empty = prevalence(&Corpus::default(), &[]);
        assert_eq!(empty.pr_fraction, None);
        assert_eq!(empty.mentor_fraction, None);
    }

    #[test]
    fn markup_is_stripped() {
        assert_eq!(word_count(""), 0);
        assert_eq!(word_count("## Fix\nSee [the docs](http://x.y) and `foo()`\n```\nlet a = 1;\n```"), 6);
        assert_eq!(word_count("<b>bold</b> **move** ![img](a.png)"), 2);
    }

    #[test]
    fn equal_lengths_none_wordy() {
        let corpus = Corpus {
            prs: (1..=4).map(|i| pr(i, "two words", false)).collect(),
            ..Default::default()
        };
        let s = wordiness_split(&corpus);
        assert_eq!(s.median_words, Some(2.0));
        assert!(s.rows.iter().all(|r| !r.wordy));
    }

    #[test]
    fn failing_test_does_not_block_other() {
        let mut prs: Vec<_> = (1..=6).map(|i| pr(i, "x", i <= 3)).collect();
        prs[0].description = "a much longer description".into();
        let corpus = Corpus { prs, ..Default::default() };
        let inst = [inst(1, "b"), inst(1, "c"), inst(2, "b"), inst(4, "b")];
        let t = complexity_tests(&corpus, &inst, 0.05);
        assert_eq!(format!("{:.3}", t.alpha_adjusted), "0.017");
        // Only one wordy PR: the sample is too small.
        assert!(t.wordiness.result.is_err());
        let r = t.reopened.result.as_ref().unwrap();
        assert!(r.estimate > 0.0);
        assert_eq!((t.reopened.n1, t.reopened.n2), (3, 3));
    }
}
