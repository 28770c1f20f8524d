use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use mentorscope_core::classifier::{self, Classification, Family, Hyperparameters};
use mentorscope_core::demography::{self, FixtureGenderClient, GenderCache};
use mentorscope_core::ingestion::{self, Dimension};
use mentorscope_core::metrics;
use mentorscope_core::relations;

fn store() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/store")
}

fn lines(suffix: &str) -> usize {
    let mut n = 0;
    for e in fs::read_dir(store()).unwrap() {
        let p = e.unwrap().path();
        if p.to_string_lossy().ends_with(suffix) {
            n += fs::read_to_string(&p).unwrap().lines().filter(|l| !l.trim().is_empty()).count();
        }
    }
    n
}

#[test]
fn record_counts_match_line_counts() {
    let out = ingestion::load_corpus(&store()).unwrap();
    assert_eq!(out.corpus.prs.len(), lines(".prs.ndjson"));
    assert_eq!(out.corpus.prs.len(), 50);
    // One comment points at a PR that does not exist.
    assert_eq!(out.corpus.comments.len(), lines(".comments.ndjson") - 1);
    assert_eq!(out.rejections.len(), 1);
    assert!(out.rejections[0].reason.contains("missing pull request"));
}

#[test]
fn exclusions_match_brute_force_filter() {
    let raw = ingestion::load_corpus(&store()).unwrap().corpus;
    let c = ingestion::apply_exclusions(&raw);
    let deleted: BTreeSet<&str> = raw.contributors.iter().filter(|c| c.deleted).map(|c| c.login.as_str()).collect();
    assert_eq!(deleted, BTreeSet::from(["dev23", "dev24"]));
    let prs: Vec<_> = raw.prs.iter().filter(|p| !deleted.contains(p.author.as_str())).collect();
    let comments: Vec<_> = raw
        .comments
        .iter()
        .filter(|cm| {
            let pr = prs.iter().find(|p| p.project == cm.project && p.pr_id == cm.pr);
            pr.is_some_and(|p| p.author != cm.author) && !deleted.contains(cm.author.as_str())
        })
        .collect();
    assert_eq!(c.prs.len(), prs.len());
    assert_eq!(c.comments.iter().collect::<Vec<_>>(), comments);
    assert_eq!((c.prs.len(), c.comments.len()), (45, 95));
}

#[test]
fn corpus_stats_match_independent_computation() {
    let c = ingestion::apply_exclusions(&ingestion::load_corpus(&store()).unwrap().corpus);
    let s = ingestion::corpus_stats(&c);
    let close = |a: f64, b: f64| (a - b).abs() < 1e-9;
    let expect = [
        (Dimension::ALL[0], 15.0, 8.0, 35.0 / 3.0, 12.0),
        (Dimension::ALL[1], 19.0, 10.0, 15.0, 16.0),
        (Dimension::ALL[2], 42.0, 20.0, 95.0 / 3.0, 33.0),
    ];
    for (d, max, min, mean, median) in expect {
        let r = s.row(d).unwrap();
        assert!(close(r.max, max) && close(r.min, min) && close(r.mean, mean) && close(r.median, median), "{r:?}");
    }
    let age = s.row(Dimension::ALL[3]).unwrap();
    assert!(close(age.max, 111.898_809_523_809_52));
    assert!(close(age.min, 48.785_714_285_714_285));
}

#[test]
fn planted_structure_is_recovered() {
    let labels = mentorscope_core::annotation::read_labels(&store().join("../labels.ndjson")).unwrap();
    let model = classifier::train(Family::NaiveBayesBernoulli, &labels, &Hyperparameters::new(), 1).unwrap();
    let c = ingestion::apply_exclusions(&ingestion::load_corpus(&store()).unwrap().corpus);
    let scores = classifier::classify_corpus(&model, &c);
    for cm in &c.comments {
        let planted = ["because", "since", "so that"].iter().any(|w| cm.body.contains(w));
        assert_eq!(scores[&cm.comment_id].label, planted, "{}", cm.body);
    }

    let instances = relations::build_instances(&c, &scores, 183).unwrap();
    let brute: Vec<u64> = c
        .comments
        .iter()
        .filter(|cm| {
            let pr = c.prs.iter().find(|p| p.project == cm.project && p.pr_id == cm.pr).unwrap();
            scores[&cm.comment_id].label && pr.author != cm.author
        })
        .map(|cm| cm.comment_id)
        .collect();
    assert_eq!(instances.iter().map(|i| i.comment_id).collect::<Vec<_>>(), brute);

    let t = metrics::complexity_tests(&c, &instances, 0.05);
    assert!(t.reopened.result.as_ref().unwrap().estimate > 0.0);

    let client = FixtureGenderClient::load(&store().join("../names.tsv")).unwrap();
    let outcome = demography::infer_genders(&c.contributors, &client, &mut GenderCache::default());
    let retained = demography::exclude_ungendered_projects(&c, &outcome.genders());
    assert_eq!(retained, ["alpha", "beta"]);
}

#[test]
fn all_positive_scores_are_accepted() {
    let c = ingestion::apply_exclusions(&ingestion::load_corpus(&store()).unwrap().corpus);
    let scores = c
        .comments
        .iter()
        .map(|cm| (cm.comment_id, Classification { label: true, score: 1.0 }))
        .collect();
    let instances = relations::build_instances(&c, &scores, 183).unwrap();
    assert_eq!(instances.len(), c.comments.len());
}
