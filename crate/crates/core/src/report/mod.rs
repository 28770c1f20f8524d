//! Pipeline orchestration: one declarative config in, a bundle of tables
//! out.

mod table;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::annotation::{irr, read_labels, required_sample_size, AnnotationSession, LabeledExample};
use crate::classifier::{self, Classification, Family, Hyperparameters, TrainedModel};
use crate::demography::{self as demo, FixtureGenderClient, GenderCache, GenderClient, HttpGenderClient};
use crate::error::{Error, Result};
use crate::ingestion::{self, Corpus, Dimension};
use crate::metrics;
use crate::relations::{self, Direction, Frame, MentoringInstance};
use crate::stats::{self, Alternative};

pub use table::{render, Cell, Format, Table};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub sample: u64,
    pub train: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Analysis {
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_threshold_days")]
    pub threshold_days: i64,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_margin")]
    pub margin: f64,
}

fn default_alpha() -> f64 {
    stats::DEFAULT_ALPHA
}
fn default_threshold_days() -> i64 {
    relations::DEFAULT_THRESHOLD_DAYS
}
fn default_confidence() -> f64 {
    0.95
}
fn default_margin() -> f64 {
    0.05
}

impl Default for Analysis {
    fn default() -> Self {
        Analysis {
            alpha: default_alpha(),
            threshold_days: default_threshold_days(),
            confidence: default_confidence(),
            margin: default_margin(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifierConfig {
    /// Family used to score the corpus.
    #[serde(default = "default_family")]
    pub family: Family,
    /// Families cross-validated for the metrics table.
    #[serde(default = "all_families")]
    pub evaluate: Vec<Family>,
    #[serde(default = "default_folds")]
    pub folds: usize,
    /// Per-family overrides of the default hyperparameters.
    #[serde(default)]
    pub hyperparameters: BTreeMap<Family, Hyperparameters>,
}

fn default_family() -> Family {
    Family::RandomForest
}
fn all_families() -> Vec<Family> {
    Family::ALL.to_vec()
}
fn default_folds() -> usize {
    classifier::DEFAULT_FOLDS
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        ClassifierConfig {
            family: default_family(),
            evaluate: all_families(),
            folds: default_folds(),
            hyperparameters: BTreeMap::new(),
        }
    }
}

impl ClassifierConfig {
    pub fn hyperparameters_for(&self, family: Family) -> Hyperparameters {
        self.hyperparameters.get(&family).cloned().unwrap_or_default()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClientMode {
    Fixture,
    Http,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemographyConfig {
    pub client: ClientMode,
    /// `name<TAB>score` table for the fixture client.
    #[serde(default)]
    pub names: Option<PathBuf>,
    #[serde(default)]
    pub cache: Option<PathBuf>,
    #[serde(default)]
    pub base_url: Option<String>,
}

/// Declarative run description. Relative paths are taken from the
/// directory holding the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    /// Directory of record files.
    pub store: PathBuf,
    /// Labelled comments for training and cross-validation.
    #[serde(default)]
    pub labels: Option<PathBuf>,
    /// Pre-trained model; when absent one is trained from `labels`.
    #[serde(default)]
    pub model: Option<PathBuf>,
    /// Annotation session for the agreement table.
    #[serde(default)]
    pub session: Option<PathBuf>,
    pub seeds: Seeds,
    #[serde(default)]
    pub analysis: Analysis,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    pub demography: DemographyConfig,
    /// Hex SHA-256 of the config text.
    #[serde(skip)]
    pub hash: String,
}

impl Config {
    pub fn parse(text: &str, base: &Path) -> Result<Config> {
        let mut c: Config = toml::from_str(text)?;
        c.hash = hex::encode(Sha256::digest(text.as_bytes()));
        let abs = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        abs(&mut c.store);
        for p in [&mut c.labels, &mut c.model, &mut c.session, &mut c.demography.names, &mut c.demography.cache]
            .into_iter()
            .flatten()
        {
            abs(p);
        }
        if !(0.0..1.0).contains(&c.analysis.alpha) || c.analysis.alpha == 0.0 {
            return Err(Error::arg(format!("alpha {} outside (0, 1)", c.analysis.alpha)));
        }
        if c.analysis.threshold_days < 0 {
            return Err(Error::arg("threshold_days must be non-negative"));
        }
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Config> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Self::parse(&text, &base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Ingest,
    Annotation,
    Classify,
    Relations,
    Demography,
    Metrics,
}

impl Stage {
    pub const ALL: [Stage; 6] = [
        Stage::Ingest,
        Stage::Annotation,
        Stage::Classify,
        Stage::Relations,
        Stage::Demography,
        Stage::Metrics,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Annotation => "annotation",
            Stage::Classify => "classify",
            Stage::Relations => "relations",
            Stage::Demography => "demography",
            Stage::Metrics => "metrics",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StageStatus {
    Ok,
    Failed,
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageOutcome {
    pub stage: Stage,
    pub status: StageStatus,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bundle {
    pub config_hash: String,
    pub seed_sample: u64,
    pub seed_train: u64,
    pub stages: Vec<StageOutcome>,
    pub tables: Vec<Table>,
}

impl Bundle {
    pub fn is_partial(&self) -> bool {
        self.stages.iter().any(|s| s.status != StageStatus::Ok)
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn stage(&self, stage: Stage) -> Option<&StageOutcome> {
        self.stages.iter().find(|s| s.stage == stage)
    }
}

const TEST_COLUMNS: &[&str] = &[
    "column", "x1", "n1", "x2", "n2", "z", "p", "p_one_sided", "estimate", "cohens_h", "alpha", "significant", "error",
];

/// Every table the pipeline emits, with its producing stage.
fn layout() -> Vec<(Stage, Table)> {
    vec![
        (Stage::Ingest, Table::new("corpus_counts", "Records loaded and retained", &["measure", "loaded", "retained"])),
        (Stage::Ingest, Table::new("corpus_stats", "Per-project corpus statistics", &["dimension", "max", "min", "mean", "median"])),
        (Stage::Ingest, Table::new("rejections", "Rejected records", &["source", "line", "reason"])),
        (Stage::Annotation, Table::new("sample_size", "Annotation sample size", &["population", "confidence", "margin", "sample_size"])),
        (Stage::Annotation, Table::new("irr", "Inter-rater agreement", &["first", "second", "overlap", "agreement", "kappa", "disagreements"])),
        (Stage::Classify, Table::new("classifier_metrics", "Cross-validated classifier metrics", &["family", "precision", "recall", "f1", "auc"])),
        (Stage::Classify, Table::new("classification", "Corpus classification", &["family", "vocabulary", "comments", "positive", "positive_share"])),
        (Stage::Relations, Table::new("direction", "Mentoring direction", &["frame", "direction", "instances", "share", "mean_gap_days", "sd_gap_days"])),
        (Stage::Relations, Table::new("arity", "Mentoring group arity", &["arity", "prs", "share"])),
        (Stage::Demography, Table::new("gender_projects", "Projects kept for gender analysis", &["project", "retained"])),
        (Stage::Demography, Table::new("gender_summary", "Mentoring by gender", &["measure", "women", "women_share", "men", "men_share", "total"])),
        (Stage::Demography, Table::new("gender_tests", "Mentoring share, men (1) vs women (2)", TEST_COLUMNS)),
        (
            Stage::Demography,
            Table::new(
                "pair_counts",
                "Mentor to mentee gender pairs",
                &["pair", "overall", "overall_share", "top_down", "top_down_share", "peer", "peer_share", "bottom_up", "bottom_up_share"],
            ),
        ),
        (Stage::Demography, Table::new("cross_gender_tests", "Cross-gender mentoring, m->w share vs w->m share", TEST_COLUMNS)),
        (Stage::Demography, Table::new("homophily_tests", "Same-gender vs cross-gender pairs", TEST_COLUMNS)),
        (Stage::Metrics, Table::new("prevalence", "Prevalence of mentoring", &["measure", "value"])),
        (
            Stage::Metrics,
            Table::new(
                "complexity",
                "Mentoring comments per PR by complexity",
                &["test", "n1", "n2", "t", "df", "p", "estimate", "cohens_d", "alpha", "significant", "error"],
            ),
        ),
    ]
}

/// Tables being filled for one run.
struct Tables(Vec<(Stage, Table)>);

impl Tables {
    fn get(&mut self, name: &str) -> &mut Table {
        &mut self
            .0
            .iter_mut()
            .find(|(_, t)| t.name == name)
            .unwrap_or_else(|| panic!("no table {name}"))
            .1
    }

    fn clear(&mut self, stage: Stage) {
        for (s, t) in &mut self.0 {
            if *s == stage {
                t.rows.clear();
            }
        }
    }
}

/// Intermediate results handed between stages.
#[derive(Default)]
struct State {
    corpus: Option<Corpus>,
    scores: Option<BTreeMap<u64, Classification>>,
    instances: Option<Vec<MentoringInstance>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Refuse network clients.
    pub offline: bool,
}

/// Runs every stage in order. A failed stage is recorded, its tables are
/// left empty and the stages that need its output are skipped.
pub fn run_pipeline(config: &Config, options: RunOptions) -> Bundle {
    let mut tables = Tables(layout());
    let mut state = State::default();
    let mut stages = Vec::new();
    for stage in Stage::ALL {
        let ready = match stage {
            Stage::Ingest => true,
            Stage::Annotation | Stage::Classify => state.corpus.is_some(),
            Stage::Relations => state.scores.is_some(),
            Stage::Demography | Stage::Metrics => state.instances.is_some(),
        };
        let (status, detail) = if !ready {
            (StageStatus::Skipped, "an earlier stage failed".to_string())
        } else {
            match run_stage(stage, config, options, &mut state, &mut tables) {
                Ok(detail) => (StageStatus::Ok, detail),
                Err(e) => {
                    tables.clear(stage);
                    (StageStatus::Failed, e.to_string())
                }
            }
        };
        stages.push(StageOutcome { stage, status, detail });
    }
    let mut all = vec![{
        let mut t = Table::new("stages", "Pipeline stages", &["stage", "status", "detail"]);
        for s in &stages {
            let status = match s.status {
                StageStatus::Ok => "ok",
                StageStatus::Failed => "failed",
                StageStatus::Skipped => "skipped",
            };
            t.push(vec![Cell::text(s.stage.name()), Cell::text(status), Cell::text(&s.detail)]);
        }
        t
    }];
    all.extend(tables.0.into_iter().map(|(_, t)| t));
    Bundle {
        config_hash: config.hash.clone(),
        seed_sample: config.seeds.sample,
        seed_train: config.seeds.train,
        stages,
        tables: all,
    }
}

fn run_stage(stage: Stage, config: &Config, options: RunOptions, state: &mut State, tables: &mut Tables) -> Result<String> {
    match stage {
        Stage::Ingest => ingest(config, state, tables),
        Stage::Annotation => annotation(config, state, tables),
        Stage::Classify => classify(config, state, tables),
        Stage::Relations => relate(config, state, tables),
        Stage::Demography => demography(config, options, state, tables),
        Stage::Metrics => complexity(config, state, tables),
    }
}

fn count(n: usize) -> Cell {
    Cell::Count(n as u64)
}

fn ingest(config: &Config, state: &mut State, tables: &mut Tables) -> Result<String> {
    let outcome = ingestion::load_corpus(&config.store)?;
    let raw = &outcome.corpus;
    let corpus = ingestion::apply_exclusions(raw);
    let t = tables.get("corpus_counts");
    let measures = [
        ("projects", raw.projects.len(), corpus.projects.len()),
        ("prs", raw.prs.len(), corpus.prs.len()),
        ("comments", raw.comments.len(), corpus.comments.len()),
        ("contributors", raw.contributors.len(), corpus.contributors.len()),
    ];
    for (m, a, b) in measures {
        t.push(vec![Cell::text(m), count(a), count(b)]);
    }
    let summary = ingestion::corpus_stats(&corpus);
    let t = tables.get("corpus_stats");
    for d in Dimension::ALL {
        if let Some(r) = summary.row(d) {
            t.push(vec![
                Cell::text(d.label()),
                Cell::Stat(r.max),
                Cell::Stat(r.min),
                Cell::Stat(r.mean),
                Cell::Stat(r.median),
            ]);
        }
    }
    let t = tables.get("rejections");
    for r in &outcome.rejections {
        t.push(vec![
            Cell::text(&r.source),
            r.line.map_or(Cell::Missing, count),
            Cell::text(&r.reason),
        ]);
    }
    let detail = format!(
        "{} PRs, {} comments after exclusions; {} rejected records",
        corpus.prs.len(),
        corpus.comments.len(),
        outcome.rejections.len()
    );
    state.corpus = Some(corpus);
    Ok(detail)
}

fn annotation(config: &Config, state: &mut State, tables: &mut Tables) -> Result<String> {
    let corpus = state.corpus.as_ref().expect("ready");
    let population = corpus.comments.len() as u64;
    let a = &config.analysis;
    if population > 0 {
        let n = required_sample_size(population, a.confidence, a.margin)?;
        tables.get("sample_size").push(vec![
            Cell::Count(population),
            Cell::Percent(a.confidence),
            Cell::Percent(a.margin),
            Cell::Count(n),
        ]);
    }
    let Some(path) = &config.session else {
        return Ok("no annotation session configured".into());
    };
    let session = AnnotationSession::load(path)?;
    let reports = irr(&session);
    let t = tables.get("irr");
    for r in &reports {
        t.push(vec![
            Cell::text(&r.first),
            Cell::text(&r.second),
            count(r.overlap),
            Cell::Percent(r.observed_agreement),
            Cell::Stat(r.kappa),
            count(r.disagreements.len()),
        ]);
    }
    Ok(format!("{} sampled comments, {} annotator pairs", session.sample.len(), reports.len()))
}

fn classify(config: &Config, state: &mut State, tables: &mut Tables) -> Result<String> {
    let corpus = state.corpus.as_ref().expect("ready");
    let cc = &config.classifier;
    let seed = config.seeds.train;
    let labels: Option<Vec<LabeledExample>> = config.labels.as_deref().map(read_labels).transpose()?;
    if let Some(labels) = &labels {
        for &family in &cc.evaluate {
            let cv = classifier::cross_validate(family, labels, &cc.hyperparameters_for(family), cc.folds, seed)?;
            tables.get("classifier_metrics").push(vec![
                Cell::text(family.name()),
                Cell::Stat(cv.mean.precision),
                Cell::Stat(cv.mean.recall),
                Cell::Stat(cv.mean.f1),
                Cell::opt_stat(cv.mean.auc),
            ]);
        }
    }
    let model = match (&config.model, &labels) {
        (Some(path), _) if path.exists() => TrainedModel::load(path)?,
        (_, Some(labels)) => classifier::train(cc.family, labels, &cc.hyperparameters_for(cc.family), seed)?,
        _ => return Err(Error::arg("neither a model file nor training labels are available")),
    };
    let scores = classifier::classify_corpus(&model, corpus);
    let positive = scores.values().filter(|c| c.label).count();
    tables.get("classification").push(vec![
        Cell::text(model.family.name()),
        Cell::text(model.vocabulary.version()),
        count(scores.len()),
        count(positive),
        Cell::opt_percent((!scores.is_empty()).then(|| positive as f64 / scores.len() as f64)),
    ]);
    state.scores = Some(scores);
    Ok(format!("{} model, {positive} positive comments", model.family))
}

fn relate(config: &Config, state: &mut State, tables: &mut Tables) -> Result<String> {
    let corpus = state.corpus.as_ref().expect("ready");
    let scores = state.scores.as_ref().expect("ready");
    let instances = relations::build_instances(corpus, scores, config.analysis.threshold_days)?;
    for frame in [Frame::Project, Frame::Global] {
        let d = relations::direction_distribution(&instances, frame);
        let frame_name = match frame {
            Frame::Project => "project",
            Frame::Global => "global",
        };
        let t = tables.get("direction");
        for r in &d.rows {
            t.push(vec![
                Cell::text(frame_name),
                Cell::text(r.direction.label()),
                count(r.count),
                Cell::Percent(r.share),
                Cell::opt_stat(r.mean_gap_days),
                Cell::opt_stat(r.sd_gap_days),
            ]);
        }
    }
    let t = tables.get("arity");
    for r in relations::arity_distribution(&instances) {
        t.push(vec![Cell::text(r.arity.label()), count(r.prs), Cell::Percent(r.share)]);
    }
    let detail = format!("{} mentoring instances", instances.len());
    state.instances = Some(instances);
    Ok(detail)
}

fn test_rows(t: &mut Table, tests: &[demo::ProportionTest]) {
    for pt in tests {
        let base = vec![
            Cell::text(pt.column.label()),
            Cell::Count(pt.x1),
            Cell::Count(pt.n1),
            Cell::Count(pt.x2),
            Cell::Count(pt.n2),
        ];
        let rest = match &pt.result {
            Ok(r) => {
                let alt = if r.statistic < 0.0 { Alternative::Less } else { Alternative::Greater };
                let one = stats::two_prop_z_test_with(pt.x1, pt.n1, pt.x2, pt.n2, alt)
                    .map(|o| Cell::PValue(o.p_value))
                    .unwrap_or(Cell::Missing);
                vec![
                    Cell::Stat(r.statistic),
                    Cell::PValue(r.p_value),
                    one,
                    Cell::Stat(r.estimate),
                    Cell::Stat(r.effect_size),
                    Cell::Alpha(r.alpha_adjusted),
                    Cell::Flag(r.significant()),
                    Cell::Missing,
                ]
            }
            Err(e) => {
                let mut v = vec![Cell::Missing; 7];
                v.push(Cell::text(e));
                v
            }
        };
        t.push(base.into_iter().chain(rest).collect());
    }
}

fn restrict(corpus: &Corpus, projects: &[String]) -> Corpus {
    let keep = |p: &String| projects.binary_search(p).is_ok();
    let mut c = Corpus {
        projects: corpus.projects.iter().filter(|p| keep(&p.name)).cloned().collect(),
        prs: corpus.prs.iter().filter(|p| keep(&p.project)).cloned().collect(),
        comments: corpus.comments.iter().filter(|c| keep(&c.project)).cloned().collect(),
        contributors: corpus.contributors.clone(),
    };
    c.sort();
    c
}

/// Builds the configured gender client. The HTTP client is refused when
/// `offline` is set.
pub fn gender_client(dc: &DemographyConfig, offline: bool) -> Result<Box<dyn GenderClient>> {
    Ok(match dc.client {
        ClientMode::Fixture => {
            let names = dc
                .names
                .as_deref()
                .ok_or_else(|| Error::arg("the fixture gender client needs a names file"))?;
            Box::new(FixtureGenderClient::load(names)?)
        }
        ClientMode::Http if offline => {
            return Err(Error::Client("the http gender client is disabled in offline mode".into()))
        }
        ClientMode::Http => Box::new(HttpGenderClient::from_env(
            dc.base_url.as_deref().unwrap_or(HttpGenderClient::DEFAULT_BASE),
        )?),
    })
}

type Row<T> = (&'static str, fn(&T) -> u64);

fn demography(config: &Config, options: RunOptions, state: &mut State, tables: &mut Tables) -> Result<String> {
    let corpus = state.corpus.as_ref().expect("ready");
    let instances = state.instances.as_ref().expect("ready");
    let dc = &config.demography;
    let client = gender_client(dc, options.offline)?;
    let mut cache = match &dc.cache {
        Some(p) => GenderCache::load(p)?,
        None => GenderCache::default(),
    };
    let outcome = demo::infer_genders(&corpus.contributors, client.as_ref(), &mut cache);
    if let Some(p) = &dc.cache {
        cache.save(p)?;
    }
    let genders = outcome.genders();
    let retained = demo::exclude_ungendered_projects(corpus, &genders);
    let t = tables.get("gender_projects");
    for p in &corpus.projects {
        t.push(vec![Cell::text(&p.name), Cell::Flag(retained.binary_search(&p.name).is_ok())]);
    }
    let kept = restrict(corpus, &retained);
    let kept_instances: Vec<MentoringInstance> = instances
        .iter()
        .filter(|i| retained.binary_search(&i.project).is_ok())
        .cloned()
        .collect();
    let summary = demo::gender_summary(&kept, &kept_instances, &genders);
    let t = tables.get("gender_summary");
    let rows: [Row<demo::GenderActivity>; 4] = [
        ("comment authors", |a| a.commenters),
        ("mentors", |a| a.mentors),
        ("comments", |a| a.comments),
        ("mentoring comments", |a| a.mentoring_comments),
    ];
    for (label, f) in rows {
        let (w, m) = (f(&summary.women), f(&summary.men));
        let total = w + m;
        let share = |x: u64| Cell::opt_percent((total > 0).then(|| x as f64 / total as f64));
        t.push(vec![Cell::text(label), Cell::Count(w), share(w), Cell::Count(m), share(m), Cell::Count(total)]);
    }

    let alpha = stats::bonferroni(config.analysis.alpha, 3)?;
    test_rows(tables.get("gender_tests"), &demo::gender_mentoring_tests(&summary, alpha));

    let overall = demo::pair_counts(&kept_instances, &genders);
    let by_dir = demo::pair_counts_by_direction(&kept_instances, &genders);
    let columns: Vec<demo::PairCounts> = std::iter::once(overall)
        .chain(Direction::ALL.iter().map(|d| by_dir[d]))
        .collect();
    let t = tables.get("pair_counts");
    let pair_rows: [Row<demo::PairCounts>; 5] = [
        ("w->w", |p| p.ww),
        ("w->m", |p| p.wm),
        ("m->w", |p| p.mw),
        ("m->m", |p| p.mm),
        ("total", |p| p.total()),
    ];
    for (label, f) in pair_rows {
        let mut row = vec![Cell::text(label)];
        for p in &columns {
            let total = p.total();
            row.push(Cell::Count(f(p)));
            row.push(Cell::opt_percent((total > 0).then(|| f(p) as f64 / total as f64)));
        }
        t.push(row);
    }
    let mut row = vec![Cell::text("homophily")];
    for p in &columns {
        row.push(Cell::Missing);
        row.push(Cell::opt_percent(demo::homophily_rate(p)));
    }
    t.push(row);
    let mut row = vec![Cell::text("dropped")];
    for p in &columns {
        row.push(Cell::Count(p.dropped));
        row.push(Cell::Missing);
    }
    t.push(row);

    test_rows(tables.get("cross_gender_tests"), &demo::cross_gender_tests(&overall, &by_dir, alpha));
    test_rows(tables.get("homophily_tests"), &demo::homophily_tests(&overall, &by_dir, alpha));
    Ok(format!(
        "{} gendered contributors, {} unresolved, {} of {} projects retained",
        outcome.records.len(),
        outcome.unresolved.len(),
        retained.len(),
        corpus.projects.len()
    ))
}

fn complexity(config: &Config, state: &mut State, tables: &mut Tables) -> Result<String> {
    let corpus = state.corpus.as_ref().expect("ready");
    let instances = state.instances.as_ref().expect("ready");
    let p = metrics::prevalence(corpus, instances);
    let t = tables.get("prevalence");
    let rows = [
        ("prs", count(p.prs)),
        ("prs with mentoring", count(p.prs_with_mentoring)),
        ("pr fraction", Cell::opt_percent(p.pr_fraction)),
        ("comment authors", count(p.commenters)),
        ("mentors", count(p.mentors)),
        ("mentor fraction", Cell::opt_percent(p.mentor_fraction)),
        ("mean comments per pr", Cell::opt_stat(p.mean_comments_per_pr)),
        ("sd comments per pr", Cell::opt_stat(p.sd_comments_per_pr)),
    ];
    for (m, v) in rows {
        t.push(vec![Cell::text(m), v]);
    }
    let c = metrics::complexity_tests(corpus, instances, config.analysis.alpha);
    let t = tables.get("complexity");
    for g in [&c.wordiness, &c.reopened] {
        let mut row = vec![Cell::text(&g.name), count(g.n1), count(g.n2)];
        match &g.result {
            Ok(r) => row.extend([
                Cell::Stat(r.statistic),
                Cell::opt_stat(r.df),
                Cell::PValue(r.p_value),
                Cell::Stat(r.estimate),
                Cell::Stat(r.effect_size),
                Cell::Alpha(r.alpha_adjusted),
                Cell::Flag(r.significant()),
                Cell::Missing,
            ]),
            Err(e) => {
                row.extend(vec![Cell::Missing; 7]);
                row.push(Cell::text(e));
            }
        }
        t.push(row);
    }
    Ok(format!("{} of {} PRs with mentoring", p.prs_with_mentoring, p.prs))
}

/// Renders the bundle in every format, each into `dir/<format name>`.
pub fn render_all(bundle: &Bundle, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    for f in Format::ALL {
        let sub = dir.join(f.name());
        if sub.exists() {
            fs::remove_dir_all(&sub).map_err(|e| Error::io(&sub, e))?;
        }
        out.extend(render(bundle, f, &sub)?);
    }
    Ok(out)
}

/// Writes the fixture inputs into `dir`, runs them offline and renders the
/// golden bundle into `dir/golden`.
pub fn write_fixture_and_golden(dir: &Path, seed: u64) -> Result<Bundle> {
    crate::synth::write_fixture(dir, seed)?;
    let config = Config::load(&dir.join(crate::synth::FIXTURE_CONFIG))?;
    let bundle = run_pipeline(&config, RunOptions { offline: true });
    render_all(&bundle, &dir.join(crate::synth::GOLDEN_DIR))?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path, extra: &str) -> Config {
        let text = format!(
            "store = \"store\"\n{extra}\n[seeds]\nsample = 1\ntrain = 2\n[demography]\nclient = \"fixture\"\nnames = \"names.tsv\"\n"
        );
        Config::parse(&text, dir).unwrap()
    }

    #[test]
    fn relative_paths_and_hash() {
        let c = config(Path::new("/tmp/x"), "");
        assert_eq!(c.store, Path::new("/tmp/x/store"));
        assert_eq!(c.demography.names.as_deref(), Some(Path::new("/tmp/x/names.tsv")));
        assert_eq!(c.hash.len(), 64);
        assert_eq!(c.classifier.family, Family::RandomForest);
        assert!(Config::parse("store = 1", Path::new(".")).is_err());
    }

    #[test]
    fn missing_store_is_partial() {
        let dir = tempfile::tempdir().unwrap();
        let b = run_pipeline(&config(dir.path(), ""), RunOptions::default());
        assert!(b.is_partial());
        assert_eq!(b.stage(Stage::Ingest).unwrap().status, StageStatus::Failed);
        assert_eq!(b.stage(Stage::Metrics).unwrap().status, StageStatus::Skipped);
        assert!(b.table("corpus_counts").unwrap().rows.is_empty());
    }

    #[test]
    fn empty_corpus_gives_empty_tables() {
        let dir = tempfile::tempdir().unwrap();
        fs::create_dir(dir.path().join("store")).unwrap();
        fs::write(dir.path().join("names.tsv"), "").unwrap();
        let labels: Vec<_> = crate::synth::labeled_corpus(20, 1);
        crate::annotation::write_labels(&dir.path().join("labels.ndjson"), &labels).unwrap();
        let mut c = config(dir.path(), "labels = \"labels.ndjson\"");
        c.classifier.evaluate = vec![Family::NaiveBayesBernoulli];
        let b = run_pipeline(&c, RunOptions::default());
        assert!(!b.is_partial(), "{:?}", b.stages);
        assert!(b.table("direction").unwrap().rows.iter().all(|r| r[2] == Cell::Count(0)));
        assert!(b.table("corpus_stats").unwrap().rows.is_empty());
        assert_eq!(b, run_pipeline(&c, RunOptions::default()));
    }
}
