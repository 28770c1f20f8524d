//! Seeded generators for synthetic labelled comments and the bundled
//! fixture corpus.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Duration, TimeZone, Utc};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::annotation::{self, AnnotationSession, LabelEntry, LabeledExample, RuleTag};
use crate::error::{Error, Result};
use crate::ingestion::{self, Contributor, Corpus, PrComment, PrState, Project, PullRequest};

const SUBJECTS: &[&str] = &[
    "this loop", "the helper", "the config parser", "this test", "the cache", "the retry logic",
    "this method", "the builder", "the serializer", "the handler", "this constant", "the index",
];

const MENTOR_OPENERS: &[(&str, RuleTag)] = &[
    ("you should rename", RuleTag::Instruction),
    ("please move", RuleTag::Instruction),
    ("make sure to close", RuleTag::Instruction),
    ("consider extracting", RuleTag::Suggestion),
    ("it might be cleaner to split", RuleTag::Suggestion),
    ("maybe we could simplify", RuleTag::Suggestion),
    ("to fix the failure, guard", RuleTag::FixMechanism),
    ("the build breaks here; wrap", RuleTag::FixMechanism),
    ("to avoid the null pointer, check", RuleTag::FixMechanism),
];

const REASONS: &[&str] = &[
    "because otherwise the resource leaks under load",
    "since callers rely on the ordering guarantee",
    "so that future readers understand the intent",
    "because the convention in this project is explicit naming",
    "since that keeps the public interface smaller",
    "so that the error surfaces early instead of later",
    "because concurrent access would corrupt the state",
];

const PLAIN: &[&str] = &[
    "lgtm", "thanks for the update", "merged", "nice work", "+1", "looks good to me",
    "rebased on trunk", "ci is green now", "ping", "done", "approved", "duplicate of the other ticket",
];

const QUESTIONS: &[&str] = &[
    "what does {} return here?",
    "is {} still used anywhere?",
    "did you run the benchmarks for {}?",
    "who owns {} now?",
];

/// A mentoring-style comment: an instruction, suggestion or fix hint
/// followed by an explanation.
pub fn mentoring_comment(rng: &mut impl Rng) -> (String, RuleTag) {
    let (opener, tag) = *MENTOR_OPENERS.choose(rng).expect("non-empty");
    let subject = SUBJECTS.choose(rng).expect("non-empty");
    let reason = REASONS.choose(rng).expect("non-empty");
    (format!("{opener} {subject} {reason}"), tag)
}

/// An acknowledgement or a bare question.
pub fn plain_comment(rng: &mut impl Rng) -> String {
    if rng.random_bool(0.5) {
        PLAIN.choose(rng).expect("non-empty").to_string()
    } else {
        let q = QUESTIONS.choose(rng).expect("non-empty");
        q.replace("{}", SUBJECTS.choose(rng).expect("non-empty"))
    }
}

/// `n` labelled comments, alternating classes, with ids `1..=n`.
pub fn labeled_corpus(n: usize, seed: u64) -> Vec<LabeledExample> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let id = i as u64 + 1;
            if i % 2 == 0 {
                let (body, tag) = mentoring_comment(&mut rng);
                LabeledExample::new(id, body, true, "synthetic", BTreeSet::from([tag]), true)
            } else {
                LabeledExample::new(id, plain_comment(&mut rng), false, "synthetic", BTreeSet::new(), false)
            }
            .expect("valid by construction")
        })
        .collect()
}

/// Display name, location and name score of each fixture contributor,
/// indexed by login number. Scores are on the -1 (man) .. +1 (woman)
/// scale; `None` means the name is unknown to the fixture client.
const PEOPLE: &[(&str, Option<&str>, Option<f64>)] = &[
    ("Arjun Mehta", Some("Pune"), Some(-0.98)),
    ("Maria Rossi", Some("Milan"), Some(0.99)),
    ("Lukas Weber", None, Some(-0.97)),
    ("Tomasz Nowak", Some("Krakow"), Some(-0.99)),
    ("Ana Souza", Some("Recife"), Some(0.96)),
    ("Kenji Sato", None, Some(-0.95)),
    ("Ingrid Berg", Some("Bergen"), Some(0.98)),
    ("Pedro Alves", None, Some(-0.99)),
    ("Oleg Petrov", Some("Kazan"), Some(-0.93)),
    ("Fatima Khan", Some("Lahore"), Some(0.97)),
    ("David Cohen", None, Some(-0.99)),
    ("Rahul Gupta", Some("Delhi"), Some(-0.98)),
    ("Chen Jing", None, Some(0.40)),
    ("Sofia Greco", Some("Bari"), Some(0.99)),
    ("Marco Bianchi", None, Some(-0.99)),
    ("Emma Lindqvist", Some("Umea"), Some(0.99)),
    ("Jonas Becker", None, Some(-0.96)),
    ("Aisha Bello", Some("Lagos"), Some(0.95)),
    ("Samuel Okafor", None, Some(-0.97)),
    ("Ravi Iyer", Some("Chennai"), Some(-0.92)),
    ("Quinn Harper", None, None),
    ("Zhu Wei", None, None),
    ("Victor Lemaire", None, Some(-0.99)),
    ("Nora Salo", None, Some(0.99)),
];

fn login(i: usize) -> String {
    format!("dev{:02}", i + 1)
}

/// Project name, PR count and member logins (zero-based). The third
/// project's members are all men.
const PROJECTS: &[(&str, usize, &[usize])] = &[
    ("alpha", 22, &[0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 22]),
    ("beta", 18, &[7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 23]),
    ("gamma", 10, &[0, 2, 3, 5, 7, 8, 10, 14]),
];

const DELETED_FLAGGED: usize = 22;
const DELETED_MISSING_PROFILE: usize = 23;

const WORDS: &[&str] = &[
    "adds", "support", "for", "the", "new", "parser", "and", "fixes", "a", "regression", "in", "cache",
    "eviction", "when", "entries", "expire", "under", "load", "see", "linked", "issue", "details",
];

fn description(rng: &mut impl Rng) -> String {
    let n = rng.random_range(0..30);
    let words: Vec<&str> = (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect();
    if n > 10 && rng.random_bool(0.5) {
        format!("## Summary\n{}\n```\ncargo test\n```", words.join(" "))
    } else {
        words.join(" ")
    }
}

/// The bundled three-project corpus: 50 PRs, two deleted accounts,
/// self-comments, heavier mentoring on reopened PRs and one comment
/// pointing at a PR that does not exist.
pub fn fixture_corpus(seed: u64) -> Corpus {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let epoch = Utc.with_ymd_and_hms(2019, 1, 7, 9, 0, 0).single().expect("valid date");
    let contributors = PEOPLE
        .iter()
        .enumerate()
        .map(|(i, (name, location, _))| Contributor {
            login: login(i),
            display_name: Some(name.to_string()),
            location: location.map(str::to_string),
            account_created_at: (i != DELETED_MISSING_PROFILE)
                .then(|| epoch - Duration::days(200 + 150 * i as i64)),
            deleted: i == DELETED_FLAGGED,
        })
        .collect();
    let mut prs = Vec::new();
    let mut comments = Vec::new();
    let mut next_comment = 1001u64;
    for (project, n_prs, members) in PROJECTS {
        for pr_id in 1..=*n_prs as u64 {
            let created = epoch + Duration::days(38 * pr_id as i64 + rng.random_range(0..30)) + Duration::hours(rng.random_range(0..24));
            let author = *members.choose(&mut rng).expect("non-empty");
            let reopened = rng.random_bool(0.3);
            prs.push(PullRequest {
                pr_id,
                project: project.to_string(),
                author: login(author),
                description: description(&mut rng),
                created_at: created,
                reopened,
                state: *[PrState::Open, PrState::Closed, PrState::Merged].choose(&mut rng).expect("non-empty"),
            });
            let n_plain = rng.random_range(0..3);
            let n_mentoring = rng.random_range(0..2) + if reopened { 2 } else { 0 };
            let mut kinds: Vec<bool> = std::iter::repeat_n(false, n_plain).chain(std::iter::repeat_n(true, n_mentoring)).collect();
            if rng.random_bool(0.2) {
                kinds.push(false);
            }
            for (k, mentoring) in kinds.into_iter().enumerate() {
                let commenter = if k == 0 && rng.random_bool(0.15) {
                    author
                } else {
                    *members.choose(&mut rng).expect("non-empty")
                };
                let body = if mentoring { mentoring_comment(&mut rng).0 } else { plain_comment(&mut rng) };
                comments.push(PrComment {
                    comment_id: next_comment,
                    project: project.to_string(),
                    pr: pr_id,
                    author: login(commenter),
                    body,
                    created_at: created + Duration::hours(6 + 20 * k as i64),
                });
                next_comment += 1;
            }
        }
    }
    comments.push(PrComment {
        comment_id: next_comment,
        project: "beta".into(),
        pr: 999,
        author: login(8),
        body: "is this still needed?".into(),
        created_at: epoch + Duration::days(400),
    });
    Corpus {
        projects: PROJECTS.iter().map(|p| Project { name: p.0.to_string() }).collect(),
        prs,
        comments,
        contributors,
    }
}

/// `name<TAB>score` lines for the fixture client.
pub fn fixture_names() -> String {
    let mut out = String::new();
    for (name, _, score) in PEOPLE {
        if let Some(s) = score {
            let _ = writeln!(out, "{name}\t{s}");
        }
    }
    out
}

fn heuristic_label(annotator: &str, comment_id: u64, body: &str) -> LabelEntry {
    let label = ["because", "since", "so that"].iter().any(|w| body.contains(w));
    LabelEntry {
        annotator: annotator.to_string(),
        comment_id,
        label,
        rule_tags: if label { BTreeSet::from([RuleTag::Suggestion]) } else { BTreeSet::new() },
        has_explanation: label,
    }
}

/// A two-annotator session over `corpus`, with a few planted
/// disagreements and their resolutions.
pub fn fixture_session(corpus: &Corpus, size: usize, seed: u64) -> Result<AnnotationSession> {
    let mut session = annotation::draw_sample(corpus, size, seed)?;
    let items: Vec<(u64, String)> = session.sample.iter().map(|s| (s.comment_id, s.body.clone())).collect();
    for (i, (id, body)) in items.iter().enumerate() {
        let first = heuristic_label("annotator-1", *id, body);
        let mut second = heuristic_label("annotator-2", *id, body);
        if i % 9 == 4 {
            second.label = !second.label;
            second.has_explanation = second.label;
            second.rule_tags = if second.label { BTreeSet::from([RuleTag::Instruction]) } else { BTreeSet::new() };
            let mut resolved = first.clone();
            resolved.annotator = "adjudicated".into();
            session.resolve(resolved);
        }
        session.record(first);
        session.record(second);
    }
    Ok(session)
}

pub const FIXTURE_SEED: u64 = 20230112;
pub const FIXTURE_CONFIG: &str = "fixture.toml";
pub const GOLDEN_DIR: &str = "golden";

const CONFIG_TEXT: &str = "\
store = \"store\"
labels = \"labels.ndjson\"
session = \"session.ndjson\"

[seeds]
sample = 20230112
train = 20230113

[analysis]
alpha = 0.05
threshold_days = 183
confidence = 0.95
margin = 0.05

[classifier]
family = \"random-forest\"
folds = 10

[demography]
client = \"fixture\"
names = \"names.tsv\"
";

/// Writes the fixture inputs into `dir`: the record store, training
/// labels, fixture names, annotation session and `fixture.toml`.
pub fn write_fixture(dir: &Path, seed: u64) -> Result<()> {
    let corpus = fixture_corpus(seed);
    let store = dir.join("store");
    if store.exists() {
        fs::remove_dir_all(&store).map_err(|e| Error::io(&store, e))?;
    }
    ingestion::write_store(&store, &corpus, &[])?;
    annotation::write_labels(&dir.join("labels.ndjson"), &labeled_corpus(400, seed))?;
    let names = dir.join("names.tsv");
    fs::write(&names, fixture_names()).map_err(|e| Error::io(&names, e))?;
    let retained = ingestion::apply_exclusions(&ingestion::load_corpus(&store)?.corpus);
    fixture_session(&retained, 40, seed)?.save(&dir.join("session.ndjson"))?;
    let config = dir.join(FIXTURE_CONFIG);
    fs::write(&config, CONFIG_TEXT).map_err(|e| Error::io(&config, e))
}
