//! Newline-delimited JSON record files, three per project:
//! `<project>.prs.ndjson`, `<project>.comments.ndjson` and
//! `<project>.contributors.ndjson`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{assemble, Contributor, Corpus, LoadOutcome, Located, PrComment, PullRequest, Rejection};
use crate::error::{Error, Result};

pub const PRS_EXT: &str = ".prs.ndjson";
pub const COMMENTS_EXT: &str = ".comments.ndjson";
pub const CONTRIBUTORS_EXT: &str = ".contributors.ndjson";
pub const REJECTIONS_FILE: &str = "rejections.ndjson";

/// Parsed but unvalidated records.
#[derive(Debug, Default)]
pub struct RawRecords {
    pub projects: Vec<String>,
    pub prs: Vec<Located<PullRequest>>,
    pub comments: Vec<Located<PrComment>>,
    pub contributors: Vec<Located<Contributor>>,
    pub rejections: Vec<Rejection>,
}

fn read_ndjson<T: DeserializeOwned>(
    path: &Path,
    out: &mut Vec<Located<T>>,
    rejections: &mut Vec<Rejection>,
) -> Result<()> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<T>(&line) {
            Ok(record) => out.push(Located {
                source: name.clone(),
                line: Some(i + 1),
                record,
            }),
            Err(e) => rejections.push(Rejection {
                source: name.clone(),
                line: Some(i + 1),
                reason: format!("schema: {e}"),
            }),
        }
    }
    Ok(())
}

/// Reads every record file in `dir` without cross-record validation.
pub fn load_records(dir: &Path) -> Result<RawRecords> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok())
        .filter(|e| e.file_type().map(|t| t.is_file()).unwrap_or(false))
        .map(|e| e.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();

    let mut raw = RawRecords::default();
    for name in &names {
        let path = dir.join(name);
        if let Some(project) = name.strip_suffix(PRS_EXT) {
            raw.projects.push(project.to_string());
            let start = raw.prs.len();
            read_ndjson(&path, &mut raw.prs, &mut raw.rejections)?;
            // A PR filed under the wrong project file is a schema error.
            let mut kept = Vec::with_capacity(raw.prs.len());
            for rec in raw.prs.drain(start..) {
                if rec.record.project == project {
                    kept.push(rec);
                } else {
                    raw.rejections.push(rec.reject(format!(
                        "project {:?} does not match file",
                        rec.record.project
                    )));
                }
            }
            raw.prs.extend(kept);
        } else if let Some(project) = name.strip_suffix(COMMENTS_EXT) {
            let start = raw.comments.len();
            read_ndjson(&path, &mut raw.comments, &mut raw.rejections)?;
            for rec in &mut raw.comments[start..] {
                if rec.record.project.is_empty() {
                    rec.record.project = project.to_string();
                }
            }
        } else if name.ends_with(CONTRIBUTORS_EXT) {
            read_ndjson(&path, &mut raw.contributors, &mut raw.rejections)?;
        }
    }
    Ok(raw)
}

/// Loads and validates a directory of record files.
///
/// An unreadable directory is fatal; individual malformed or inconsistent
/// records end up in [`LoadOutcome::rejections`].
pub fn load_corpus(dir: &Path) -> Result<LoadOutcome> {
    Ok(assemble(load_records(dir)?))
}

fn write_ndjson<'a, T: Serialize + 'a>(
    path: &Path,
    items: impl IntoIterator<Item = &'a T>,
) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Persists a corpus in the same record format it is loaded from, plus the
/// rejection report. Each project gets its own contributor file listing the
/// accounts active in it.
pub fn write_store(dir: &Path, corpus: &Corpus, rejections: &[Rejection]) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let people = corpus.contributor_index();
    for project in &corpus.projects {
        let name = &project.name;
        let prs: Vec<&PullRequest> = corpus.prs.iter().filter(|p| &p.project == name).collect();
        let comments: Vec<&PrComment> = corpus
            .comments
            .iter()
            .filter(|c| &c.project == name)
            .collect();
        let mut logins: Vec<&str> = prs
            .iter()
            .map(|p| p.author.as_str())
            .chain(comments.iter().map(|c| c.author.as_str()))
            .collect();
        logins.sort_unstable();
        logins.dedup();
        let active: Vec<&Contributor> = logins.iter().filter_map(|l| people.get(l).copied()).collect();

        write_ndjson(&dir.join(format!("{name}{PRS_EXT}")), prs)?;
        write_ndjson(&dir.join(format!("{name}{COMMENTS_EXT}")), comments)?;
        write_ndjson(&dir.join(format!("{name}{CONTRIBUTORS_EXT}")), active)?;
    }
    write_ndjson(&dir.join(REJECTIONS_FILE), rejections)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, lines: &[&str]) {
        fs::write(dir.join(name), lines.join("\n") + "\n").unwrap();
    }

    #[test]
    fn empty_directory_gives_empty_corpus() {
        let dir = tempfile::tempdir().unwrap();
        let out = load_corpus(dir.path()).unwrap();
        assert!(out.corpus.is_empty());
        assert!(out.rejections.is_empty());
    }

    #[test]
    fn missing_directory_is_fatal() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_corpus(&dir.path().join("nope")),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn malformed_line_is_a_rejection() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "p.contributors.ndjson",
            &[
                r#"{"login":"a","account_created_at":"2015-01-01"}"#,
                r#"{"login":"b","account_created_at":"2015-01-01"}"#,
            ],
        );
        write(
            dir.path(),
            "p.prs.ndjson",
            &[
                r#"{"pr_id":1,"project":"p","author":"a","created_at":"2016-01-01","state":"merged"}"#,
                r#"{"pr_id":2,"project":"p","author":"a","created_at":"not a date","state":"merged"}"#,
                r#"{"pr_id":3,"project":"q","author":"a","created_at":"2016-01-01","state":"open"}"#,
            ],
        );
        write(
            dir.path(),
            "p.comments.ndjson",
            &[r#"{"comment_id":7,"pr":1,"author":"b","body":"ok","created_at":"2016-01-02T10:00:00Z"}"#],
        );
        let out = load_corpus(dir.path()).unwrap();
        assert_eq!(out.corpus.prs.len(), 1);
        assert_eq!(out.corpus.comments.len(), 1);
        assert_eq!(out.corpus.comments[0].project, "p");
        assert_eq!(out.rejections.len(), 2);
        assert_eq!(out.rejections[0].line, Some(2));
    }

    #[test]
    fn store_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        write(
            dir.path(),
            "p.contributors.ndjson",
            &[
                r#"{"login":"a","display_name":"Ann A","account_created_at":"2015-01-01"}"#,
                r#"{"login":"b","location":"Lima","account_created_at":"2015-01-01T00:00:00Z"}"#,
            ],
        );
        write(
            dir.path(),
            "p.prs.ndjson",
            &[r#"{"pr_id":1,"project":"p","author":"a","description":"x y","created_at":"2016-01-01","reopened":true,"state":"closed"}"#],
        );
        write(
            dir.path(),
            "p.comments.ndjson",
            &[r#"{"comment_id":7,"pr":1,"author":"b","body":"ok","created_at":"2016-01-02T10:00:00Z"}"#],
        );
        let first = load_corpus(dir.path()).unwrap();
        let out = tempfile::tempdir().unwrap();
        write_store(out.path(), &first.corpus, &first.rejections).unwrap();
        let second = load_corpus(out.path()).unwrap();
        assert_eq!(first.corpus, second.corpus);
    }
}
