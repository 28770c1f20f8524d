//! Hosting-platform clients.

use std::path::Path;
use std::thread;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Deserialize;

use super::{
    assemble, load_records, parse_timestamp, Contributor, Corpus, LoadOutcome, Located, PrComment,
    PrState, PullRequest, RawRecords, Rejection,
};
use crate::error::{Error, Result};

/// Source of pull-request records for one or more projects.
pub trait HostingClient {
    fn fetch_prs(&self, project: &str) -> Result<Vec<PullRequest>>;
    fn fetch_comments(&self, pr: &PullRequest) -> Result<Vec<PrComment>>;
    /// `Ok(None)` when the account no longer exists.
    fn fetch_profile(&self, login: &str) -> Result<Option<Contributor>>;
}

/// Pulls every project through `client` and validates the result exactly
/// like a file load. Fetch failures for one project are recorded as
/// rejections and do not abort the others.
pub fn fetch_corpus(client: &dyn HostingClient, projects: &[String]) -> LoadOutcome {
    let mut raw = RawRecords::default();
    let mut logins = std::collections::BTreeSet::new();
    for project in projects {
        raw.projects.push(project.clone());
        let prs = match client.fetch_prs(project) {
            Ok(prs) => prs,
            Err(e) => {
                raw.rejections.push(Rejection {
                    source: project.clone(),
                    line: None,
                    reason: format!("fetch pull requests: {e}"),
                });
                continue;
            }
        };
        for pr in prs {
            logins.insert(pr.author.clone());
            match client.fetch_comments(&pr) {
                Ok(comments) => {
                    for c in comments {
                        logins.insert(c.author.clone());
                        raw.comments.push(located(project, c));
                    }
                }
                Err(e) => raw.rejections.push(Rejection {
                    source: format!("{}", pr.key()),
                    line: None,
                    reason: format!("fetch comments: {e}"),
                }),
            }
            raw.prs.push(located(project, pr));
        }
    }
    for login in logins {
        let profile = match client.fetch_profile(&login) {
            Ok(Some(c)) => c,
            Ok(None) => Contributor {
                login: login.clone(),
                display_name: None,
                location: None,
                account_created_at: None,
                deleted: true,
            },
            Err(e) => {
                raw.rejections.push(Rejection {
                    source: login.clone(),
                    line: None,
                    reason: format!("fetch profile: {e}"),
                });
                continue;
            }
        };
        raw.contributors.push(located("profiles", profile));
    }
    assemble(raw)
}

fn located<T>(source: &str, record: T) -> Located<T> {
    Located {
        source: source.to_string(),
        line: None,
        record,
    }
}

/// Offline client over an export directory.
#[derive(Debug, Clone)]
pub struct ExportClient {
    corpus: Corpus,
}

impl ExportClient {
    pub fn open(dir: &Path) -> Result<Self> {
        let raw = load_records(dir)?;
        // Profiles are served raw; deletion is decided by fetch_corpus.
        let corpus = Corpus {
            projects: Vec::new(),
            prs: raw.prs.into_iter().map(|r| r.record).collect(),
            comments: raw.comments.into_iter().map(|r| r.record).collect(),
            contributors: raw.contributors.into_iter().map(|r| r.record).collect(),
        };
        Ok(ExportClient { corpus })
    }

    pub fn projects(&self) -> Vec<String> {
        let mut names: Vec<String> = self.corpus.prs.iter().map(|p| p.project.clone()).collect();
        names.sort();
        names.dedup();
        names
    }
}

impl HostingClient for ExportClient {
    fn fetch_prs(&self, project: &str) -> Result<Vec<PullRequest>> {
        Ok(self
            .corpus
            .prs
            .iter()
            .filter(|p| p.project == project)
            .cloned()
            .collect())
    }

    fn fetch_comments(&self, pr: &PullRequest) -> Result<Vec<PrComment>> {
        Ok(self
            .corpus
            .comments
            .iter()
            .filter(|c| c.project == pr.project && c.pr == pr.pr_id)
            .cloned()
            .collect())
    }

    fn fetch_profile(&self, login: &str) -> Result<Option<Contributor>> {
        Ok(self
            .corpus
            .contributors
            .iter()
            .find(|c| c.login == login && c.account_created_at.is_some() && !c.deleted)
            .cloned())
    }
}

/// GitHub REST v3 client with `Link`-header pagination and a rate-limit
/// budget read from the `X-RateLimit-*` headers.
pub struct GitHubClient {
    agent: ureq::Agent,
    base: String,
    token: Option<String>,
    /// Requests kept in reserve before the client sleeps until reset.
    reserve: u64,
}

#[derive(Deserialize)]
struct GhUser {
    login: String,
}

#[derive(Deserialize)]
struct GhPull {
    number: u64,
    user: Option<GhUser>,
    body: Option<String>,
    created_at: String,
    state: String,
    merged_at: Option<String>,
}

#[derive(Deserialize)]
struct GhComment {
    id: u64,
    user: Option<GhUser>,
    body: Option<String>,
    created_at: String,
}

#[derive(Deserialize)]
struct GhEvent {
    event: String,
}

#[derive(Deserialize)]
struct GhProfile {
    login: String,
    name: Option<String>,
    location: Option<String>,
    created_at: String,
}

impl GitHubClient {
    pub const DEFAULT_BASE: &'static str = "https://api.github.com";

    /// Reads the token from `GITHUB_TOKEN` when present.
    pub fn new(base: impl Into<String>) -> Self {
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .new_agent();
        GitHubClient {
            agent,
            base: base.into().trim_end_matches('/').to_string(),
            token: std::env::var("GITHUB_TOKEN").ok().filter(|t| !t.is_empty()),
            reserve: 5,
        }
    }

    fn get_page(&self, url: &str) -> Result<Option<(String, Option<String>)>> {
        let mut req = self
            .agent
            .get(url)
            .header("Accept", "application/vnd.github+json")
            .header("User-Agent", "mentorscope");
        if let Some(t) = &self.token {
            req = req.header("Authorization", &format!("Bearer {t}"));
        }
        let mut resp = req.call().map_err(|e| Error::Client(e.to_string()))?;
        let header = |name: &str| {
            resp.headers()
                .get(name)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        };
        let remaining = header("x-ratelimit-remaining").and_then(|v| v.parse::<u64>().ok());
        let reset = header("x-ratelimit-reset").and_then(|v| v.parse::<u64>().ok());
        let next = header("link").and_then(|l| next_link(&l));
        let status = resp.status().as_u16();
        if status == 404 {
            return Ok(None);
        }
        if let (Some(remaining), Some(reset)) = (remaining, reset) {
            if remaining <= self.reserve {
                let now = SystemTime::now()
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs())
                    .unwrap_or(0);
                thread::sleep(Duration::from_secs(reset.saturating_sub(now) + 1));
            }
        }
        if !(200..300).contains(&status) {
            return Err(Error::Client(format!("GET {url}: HTTP {status}")));
        }
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| Error::Client(e.to_string()))?;
        Ok(Some((body, next)))
    }

    fn get_all<T: for<'de> Deserialize<'de>>(&self, first: String) -> Result<Vec<T>> {
        let mut out = Vec::new();
        let mut url = Some(first);
        while let Some(u) = url {
            let Some((body, next)) = self.get_page(&u)? else {
                break;
            };
            let mut page: Vec<T> = serde_json::from_str(&body)?;
            out.append(&mut page);
            url = next;
        }
        Ok(out)
    }
}

fn ts(s: &str) -> Result<super::Timestamp> {
    parse_timestamp(s).ok_or_else(|| Error::Malformed(format!("timestamp {s:?}")))
}

fn ghost(user: Option<GhUser>) -> String {
    user.map(|u| u.login).unwrap_or_else(|| "ghost".to_string())
}

impl HostingClient for GitHubClient {
    fn fetch_prs(&self, project: &str) -> Result<Vec<PullRequest>> {
        let pulls: Vec<GhPull> = self.get_all(format!(
            "{}/repos/{project}/pulls?state=all&per_page=100",
            self.base
        ))?;
        let mut out = Vec::with_capacity(pulls.len());
        for p in pulls {
            let events: Vec<GhEvent> = self.get_all(format!(
                "{}/repos/{project}/issues/{}/events?per_page=100",
                self.base, p.number
            ))?;
            let state = if p.merged_at.is_some() {
                PrState::Merged
            } else if p.state == "open" {
                PrState::Open
            } else {
                PrState::Closed
            };
            out.push(PullRequest {
                pr_id: p.number,
                project: project.to_string(),
                author: ghost(p.user),
                description: p.body.unwrap_or_default(),
                created_at: ts(&p.created_at)?,
                reopened: events.iter().any(|e| e.event == "reopened"),
                state,
            });
        }
        Ok(out)
    }

    fn fetch_comments(&self, pr: &PullRequest) -> Result<Vec<PrComment>> {
        let mut raw: Vec<GhComment> = self.get_all(format!(
            "{}/repos/{}/issues/{}/comments?per_page=100",
            self.base, pr.project, pr.pr_id
        ))?;
        raw.extend(self.get_all::<GhComment>(format!(
            "{}/repos/{}/pulls/{}/comments?per_page=100",
            self.base, pr.project, pr.pr_id
        ))?);
        raw.into_iter()
            .map(|c| {
                Ok(PrComment {
                    comment_id: c.id,
                    project: pr.project.clone(),
                    pr: pr.pr_id,
                    author: ghost(c.user),
                    body: c.body.unwrap_or_default(),
                    created_at: ts(&c.created_at)?,
                })
            })
            .collect()
    }

    fn fetch_profile(&self, login: &str) -> Result<Option<Contributor>> {
        let Some((body, _)) = self.get_page(&format!("{}/users/{login}", self.base))? else {
            return Ok(None);
        };
        let p: GhProfile = serde_json::from_str(&body)?;
        Ok(Some(Contributor {
            login: p.login,
            display_name: p.name.filter(|n| !n.trim().is_empty()),
            location: p.location.filter(|l| !l.trim().is_empty()),
            account_created_at: Some(ts(&p.created_at)?),
            deleted: false,
        }))
    }
}

/// Extracts the `rel="next"` target from an RFC 8288 `Link` header.
fn next_link(header: &str) -> Option<String> {
    header.split(',').find_map(|part| {
        let mut pieces = part.split(';');
        let url = pieces.next()?.trim();
        let is_next = pieces.any(|p| p.trim() == "rel=\"next\"");
        (is_next && url.starts_with('<') && url.ends_with('>'))
            .then(|| url[1..url.len() - 1].to_string())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn link_header_next() {
        let h = r#"<https://api.github.com/x?page=2>; rel="next", <https://api.github.com/x?page=9>; rel="last""#;
        assert_eq!(next_link(h).as_deref(), Some("https://api.github.com/x?page=2"));
        assert_eq!(next_link(r#"<https://a/x?page=1>; rel="prev""#), None);
    }

    struct Flaky;

    impl HostingClient for Flaky {
        fn fetch_prs(&self, project: &str) -> Result<Vec<PullRequest>> {
            if project == "broken" {
                return Err(Error::Client("boom".into()));
            }
            Ok(vec![PullRequest {
                pr_id: 1,
                project: project.into(),
                author: "a".into(),
                description: String::new(),
                created_at: parse_timestamp("2020-01-01").unwrap(),
                reopened: false,
                state: PrState::Open,
            }])
        }

        fn fetch_comments(&self, pr: &PullRequest) -> Result<Vec<PrComment>> {
            Ok(vec![PrComment {
                comment_id: 9,
                project: pr.project.clone(),
                pr: pr.pr_id,
                author: "gone".into(),
                body: "hello".into(),
                created_at: parse_timestamp("2020-01-02").unwrap(),
            }])
        }

        fn fetch_profile(&self, login: &str) -> Result<Option<Contributor>> {
            Ok((login != "gone").then(|| Contributor {
                login: login.into(),
                display_name: None,
                location: None,
                account_created_at: parse_timestamp("2010-01-01"),
                deleted: false,
            }))
        }
    }

    #[test]
    fn fetch_marks_missing_profiles_deleted_and_keeps_going() {
        let out = fetch_corpus(&Flaky, &["ok".into(), "broken".into()]);
        assert_eq!(out.corpus.prs.len(), 1);
        assert_eq!(out.rejections.len(), 1);
        let gone = out
            .corpus
            .contributors
            .iter()
            .find(|c| c.login == "gone")
            .unwrap();
        assert!(gone.deleted);
        let filtered = crate::ingestion::apply_exclusions(&out.corpus);
        assert!(filtered.comments.is_empty());
    }
}
