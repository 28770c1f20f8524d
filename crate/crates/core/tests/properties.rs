use std::collections::BTreeSet;

use chrono::{Duration, TimeZone, Utc};
use proptest::prelude::*;

use mentorscope_core::annotation::{cohens_kappa, required_sample_size};
use mentorscope_core::classifier::{evaluate, fold_assignment};
use mentorscope_core::demography::{homophily_rate, PairCounts};
use mentorscope_core::ingestion::{apply_exclusions, Contributor, Corpus, PrComment, PrState, Project, PullRequest};
use mentorscope_core::metrics::{prevalence, wordiness_split};
use mentorscope_core::relations::{classify_direction, Direction};
use mentorscope_core::stats::welch_t_test;

fn corpus_strategy() -> impl Strategy<Value = Corpus> {
    let people = 4usize;
    (
        prop::collection::vec(any::<bool>(), people),
        prop::collection::vec((0..people, 0..40u32, any::<bool>()), 0..12),
        prop::collection::vec((0..12u64, 0..people, 0..4usize), 0..30),
    )
        .prop_map(move |(deleted, prs, comments)| {
            let t0 = Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap();
            let contributors = (0..people)
                .map(|i| Contributor {
                    login: format!("u{i}"),
                    display_name: None,
                    location: None,
                    account_created_at: Some(t0),
                    deleted: deleted[i],
                })
                .collect();
            let prs: Vec<PullRequest> = prs
                .into_iter()
                .enumerate()
                .map(|(id, (author, words, reopened))| PullRequest {
                    pr_id: id as u64,
                    project: "p".into(),
                    author: format!("u{author}"),
                    description: vec!["w"; words as usize].join(" "),
                    created_at: t0 + Duration::days(id as i64),
                    reopened,
                    state: PrState::Open,
                })
                .collect();
            let n = prs.len() as u64;
            let comments = comments
                .into_iter()
                .filter(|_| n > 0)
                .enumerate()
                .map(|(i, (pr, author, day))| PrComment {
                    comment_id: i as u64,
                    project: "p".into(),
                    pr: pr % n,
                    author: format!("u{author}"),
                    body: "b".into(),
                    created_at: t0 + Duration::days(20 + day as i64),
                })
                .collect();
            Corpus {
                projects: vec![Project { name: "p".into() }],
                prs,
                comments,
                contributors,
            }
        })
}

proptest! {
    #[test]
    fn exclusions_idempotent(c in corpus_strategy()) {
        let once = apply_exclusions(&c);
        prop_assert_eq!(apply_exclusions(&once), once.clone());
        prop_assert!(once.comments.len() <= c.comments.len());
        prop_assert!(once.prs.len() <= c.prs.len());
    }

    #[test]
    fn kappa_symmetric(pairs in prop::collection::vec((any::<bool>(), any::<bool>()), 1..100)) {
        let (a, b): (Vec<bool>, Vec<bool>) = pairs.into_iter().unzip();
        let k1 = cohens_kappa(&a, &b).unwrap();
        let k2 = cohens_kappa(&b, &a).unwrap();
        prop_assert!((k1 - k2).abs() < 1e-12);
        prop_assert!(k1 <= 1.0 + 1e-12);
    }

    #[test]
    fn sample_size_monotone(n in 1u64..2_000_000, extra in 0u64..1000) {
        let a = required_sample_size(n, 0.95, 0.05).unwrap();
        let b = required_sample_size(n + extra, 0.95, 0.05).unwrap();
        prop_assert!(a <= b);
        prop_assert!(a <= n);
    }

    #[test]
    fn welch_antisymmetric(
        a in prop::collection::vec(-100.0f64..100.0, 2..30),
        b in prop::collection::vec(-100.0f64..100.0, 2..30),
    ) {
        if let (Ok(x), Ok(y)) = (welch_t_test(&a, &b), welch_t_test(&b, &a)) {
            prop_assert!((x.statistic + y.statistic).abs() <= 1e-9 * x.statistic.abs().max(1.0));
            prop_assert!((x.p_value - y.p_value).abs() < 1e-12);
        }
    }

    #[test]
    fn auc_invariant_under_monotone_map(rows in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..60)) {
        let (scores, truth): (Vec<f64>, Vec<bool>) = rows.into_iter().unzip();
        let mapped: Vec<f64> = scores.iter().map(|s| s.powi(3)).collect();
        let a = evaluate(&scores, &truth, 0.5).unwrap().auc;
        let b = evaluate(&mapped, &truth, 0.5).unwrap().auc;
        match (a, b) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn folds_partition(n in 2usize..300, k in 2usize..12, seed in any::<u64>()) {
        prop_assume!(k <= n);
        let folds = fold_assignment(n, k, seed).unwrap();
        prop_assert_eq!(folds.len(), k);
        let all: BTreeSet<usize> = folds.iter().flatten().copied().collect();
        prop_assert_eq!(all.len(), n);
        prop_assert_eq!(folds.iter().map(Vec::len).sum::<usize>(), n);
        let sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
    }

    #[test]
    fn direction_antisymmetric_and_translation_invariant(
        a in -1_000_000_000i64..1_000_000_000,
        b in -1_000_000_000i64..1_000_000_000,
        shift in -1_000_000_000i64..1_000_000_000,
        days in 0i64..400,
    ) {
        let t = |s: i64| Utc.timestamp_opt(2_000_000_000 + s, 0).unwrap();
        let d = classify_direction(t(a), t(b), days);
        let mirrored = match classify_direction(t(b), t(a), days) {
            Direction::TopDown => Direction::BottomUp,
            Direction::BottomUp => Direction::TopDown,
            Direction::Peer => Direction::Peer,
        };
        prop_assert_eq!(d, mirrored);
        prop_assert_eq!(d, classify_direction(t(a + shift), t(b + shift), days));
    }

    #[test]
    fn homophily_label_swap(ww in 0u64..10_000, wm in 0u64..10_000, mw in 0u64..10_000, mm in 0u64..10_000) {
        let c = PairCounts { ww, wm, mw, mm, dropped: 0 };
        let swapped = PairCounts { ww: mm, wm: mw, mw: wm, mm: ww, dropped: 0 };
        prop_assert_eq!(homophily_rate(&c), homophily_rate(&swapped));
        if let Some(r) = homophily_rate(&c) {
            prop_assert!((0.0..=1.0).contains(&r));
        }
    }

    #[test]
    fn wordy_group_at_most_half(c in corpus_strategy()) {
        let s = wordiness_split(&c);
        prop_assert_eq!(s.rows.len(), c.prs.len());
        let wordy = s.rows.iter().filter(|r| r.wordy).count();
        prop_assert!(wordy <= c.prs.len().div_ceil(2));
    }

    #[test]
    fn prevalence_fractions_bounded(c in corpus_strategy()) {
        let p = prevalence(&apply_exclusions(&c), &[]);
        for f in [p.pr_fraction, p.mentor_fraction].into_iter().flatten() {
            prop_assert!((0.0..=1.0).contains(&f));
        }
    }
}
