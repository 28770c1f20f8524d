//! `mentorscope`: ingest pull-request data, label and classify review
//! comments, and report on implicit mentoring.

use std::io;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mentorscope_core::annotation::{self, AnnotationSession};
use mentorscope_core::classifier::{self, Family};
use mentorscope_core::demography::{self, GenderCache};
use mentorscope_core::ingestion::{self, Corpus, GitHubClient};
use mentorscope_core::relations::{self, Frame};
use mentorscope_core::report::{self, Cell, ClientMode, Config, DemographyConfig, Format, RunOptions, Table};
use mentorscope_core::synth;
use mentorscope_core::{Error, Result};

const EXIT_PARTIAL: u8 = 1;
const EXIT_FATAL: u8 = 2;

#[derive(Parser)]
#[command(name = "mentorscope", version, about = "Implicit mentoring in pull-request review comments")]
struct Cli {
    /// Pipeline config file, or `fixture` for the bundled fixture.
    #[arg(long, global = true)]
    config: Option<String>,
    /// Overrides the sampling seed.
    #[arg(long, global = true)]
    seed_sample: Option<u64>,
    /// Overrides the training seed.
    #[arg(long, global = true)]
    seed_train: Option<u64>,
    /// Refuse every network client.
    #[arg(long, global = true)]
    offline: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum ClientArg {
    Http,
    Fixture,
}

#[derive(Subcommand)]
enum Command {
    /// Load records from an export directory or a hosting API into a store.
    Ingest {
        /// Export directory or API base URL.
        #[arg(long)]
        source: String,
        #[arg(long)]
        out: PathBuf,
        /// Projects to fetch, as `owner/name`, when the source is a URL.
        #[arg(long = "project")]
        projects: Vec<String>,
    },
    /// Draw an annotation sample.
    Sample {
        #[arg(long)]
        store: Option<PathBuf>,
        /// `auto` or a number of comments.
        #[arg(long, default_value = "auto")]
        size: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label pending comments of a session at the terminal.
    Label {
        #[arg(long)]
        session: PathBuf,
        #[arg(long)]
        annotator: String,
    },
    /// Agreement between the annotators of a session.
    Irr {
        #[arg(long)]
        session: PathBuf,
        /// Also write the adjudicated labels here.
        #[arg(long)]
        export: Option<PathBuf>,
    },
    /// Train a classifier, optionally after a randomized search.
    Train {
        #[arg(long)]
        labels: Option<PathBuf>,
        #[arg(long, default_value = "rf")]
        family: Family,
        /// Grid file (json or toml) for randomized search.
        #[arg(long)]
        search: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        iterations: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score every comment of a store.
    Classify {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Extract mentoring instances from a store and its scores.
    Relations {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        threshold_days: Option<i64>,
    },
    /// Infer contributor genders.
    Genders {
        #[arg(long)]
        store: Option<PathBuf>,
        #[arg(long, value_enum)]
        client: Option<ClientArg>,
        /// `name<TAB>score` table for the fixture client.
        #[arg(long)]
        names: Option<PathBuf>,
        #[arg(long)]
        cache: Option<PathBuf>,
        #[arg(long)]
        base_url: Option<String>,
        /// Write the confident records as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the whole pipeline and print the tables.
    Analyze,
    /// Run the whole pipeline and write the tables.
    Report {
        #[arg(long, default_value = "report")]
        out: PathBuf,
        /// plain, csv, json-lines or all.
        #[arg(long, default_value = "all")]
        format: String,
    },
    /// Regenerate the bundled fixture and its golden outputs.
    Fixtures {
        #[arg(long, default_value = "fixtures")]
        out: PathBuf,
        #[arg(long, default_value_t = synth::FIXTURE_SEED)]
        seed: u64,
    },
}

fn config_path(arg: &str) -> PathBuf {
    if arg == "fixture" {
        let local = Path::new("fixtures").join(synth::FIXTURE_CONFIG);
        if local.exists() {
            return local;
        }
        return Path::new(env!("CARGO_MANIFEST_DIR"))
            .join("../../fixtures")
            .join(synth::FIXTURE_CONFIG);
    }
    PathBuf::from(arg)
}

struct Ctx {
    config: Option<Config>,
    seed_sample: Option<u64>,
    seed_train: Option<u64>,
    offline: bool,
}

impl Ctx {
    fn new(cli: &Cli) -> Result<Ctx> {
        let mut config = cli.config.as_deref().map(|c| Config::load(&config_path(c))).transpose()?;
        if let Some(c) = &mut config {
            c.seeds.sample = cli.seed_sample.unwrap_or(c.seeds.sample);
            c.seeds.train = cli.seed_train.unwrap_or(c.seeds.train);
        }
        Ok(Ctx {
            seed_sample: cli.seed_sample.or(config.as_ref().map(|c| c.seeds.sample)),
            seed_train: cli.seed_train.or(config.as_ref().map(|c| c.seeds.train)),
            config,
            offline: cli.offline,
        })
    }

    fn config(&self) -> Result<&Config> {
        self.config.as_ref().ok_or_else(|| Error::arg("this command needs --config"))
    }

    fn store(&self, arg: Option<PathBuf>) -> Result<PathBuf> {
        arg.or_else(|| self.config.as_ref().map(|c| c.store.clone()))
            .ok_or_else(|| Error::arg("no store given (--store or --config)"))
    }

    fn corpus(&self, arg: Option<PathBuf>) -> Result<Corpus> {
        let outcome = ingestion::load_corpus(&self.store(arg)?)?;
        Ok(ingestion::apply_exclusions(&outcome.corpus))
    }
}

fn seed(arg: Option<u64>, fallback: Option<u64>, what: &str) -> Result<u64> {
    arg.or(fallback)
        .ok_or_else(|| Error::arg(format!("no {what} seed given (--seed, --seed-{what} or --config)")))
}

fn print_table(t: &Table) {
    println!("## {}", t.title);
    print!("{}", t.plain());
}

fn run(cli: Cli) -> Result<u8> {
    let ctx = Ctx::new(&cli)?;
    match cli.command {
        Command::Ingest { source, out, projects } => {
            let outcome = if source.starts_with("http://") || source.starts_with("https://") {
                if ctx.offline {
                    return Err(Error::Client("refusing to reach a hosting API in offline mode".into()));
                }
                if projects.is_empty() {
                    return Err(Error::arg("a URL source needs at least one --project"));
                }
                ingestion::fetch_corpus(&GitHubClient::new(source), &projects)
            } else {
                ingestion::load_corpus(Path::new(&source))?
            };
            ingestion::write_store(&out, &outcome.corpus, &outcome.rejections)?;
            let c = &outcome.corpus;
            println!(
                "{} projects, {} PRs, {} comments, {} contributors; {} rejected records",
                c.projects.len(),
                c.prs.len(),
                c.comments.len(),
                c.contributors.len(),
                outcome.rejections.len()
            );
            for r in &outcome.rejections {
                eprintln!("rejected {}:{}: {}", r.source, r.line.map_or(String::new(), |l| l.to_string()), r.reason);
            }
        }
        Command::Sample { store, size, seed: s, out } => {
            let corpus = ctx.corpus(store)?;
            let population = corpus.comments.len() as u64;
            let n = if size == "auto" {
                let a = ctx.config.as_ref().map(|c| c.analysis.clone()).unwrap_or_default();
                annotation::required_sample_size(population, a.confidence, a.margin)?.min(population)
            } else {
                size.parse().map_err(|_| Error::arg(format!("bad sample size {size:?}")))?
            };
            let session = annotation::draw_sample(&corpus, n as usize, seed(s, ctx.seed_sample, "sample")?)?;
            session.save(&out)?;
            println!("sampled {} of {} comments into {}", session.sample.len(), population, out.display());
        }
        Command::Label { session, annotator } => {
            let s = AnnotationSession::load(&session)?;
            let entries = annotation::label_loop(&s, &annotator, io::stdin().lock(), io::stdout().lock())?;
            AnnotationSession::append_labels(&session, &entries)?;
            println!("recorded {} labels", entries.len());
        }
        Command::Irr { session, export } => {
            let s = AnnotationSession::load(&session)?;
            let mut t = Table::new("irr", "Inter-rater agreement", &["first", "second", "overlap", "agreement", "kappa", "disagreements"]);
            for r in annotation::irr(&s) {
                t.push(vec![
                    Cell::text(r.first),
                    Cell::text(r.second),
                    Cell::Count(r.overlap as u64),
                    Cell::Percent(r.observed_agreement),
                    Cell::Stat(r.kappa),
                    Cell::Count(r.disagreements.len() as u64),
                ]);
            }
            print_table(&t);
            if let Some(path) = export {
                let labels = annotation::export_labels(&s)?;
                annotation::write_labels(&path, &labels)?;
                println!("exported {} labels to {}", labels.len(), path.display());
            }
        }
        Command::Train { labels, family, search, iterations, seed: s, out } => {
            let path = labels
                .or_else(|| ctx.config.as_ref().and_then(|c| c.labels.clone()))
                .ok_or_else(|| Error::arg("no labels given (--labels or --config)"))?;
            let labeled = annotation::read_labels(&path)?;
            let s = seed(s, ctx.seed_train, "train")?;
            let mut hp = ctx.config.as_ref().map(|c| c.classifier.hyperparameters_for(family)).unwrap_or_default();
            if let Some(grid) = search {
                let result = classifier::randomized_search(family, &labeled, &classifier::load_grid(&grid)?, iterations, s)?;
                println!("search: {} trials, best cross-validated F1 {:.4}", result.trials.len(), result.cv_f1);
                hp = result.best;
            }
            let model = classifier::train(family, &labeled, &hp, s)?;
            model.save(&out)?;
            println!("trained {} on {} examples into {}", family, labeled.len(), out.display());
        }
        Command::Classify { model, store, out } => {
            let model = classifier::TrainedModel::load(&model)?;
            let scores = classifier::classify_corpus(&model, &ctx.corpus(store)?);
            classifier::write_scores(&out, &scores)?;
            let positive = scores.values().filter(|c| c.label).count();
            println!("scored {} comments, {} positive", scores.len(), positive);
        }
        Command::Relations { store, scores, out, threshold_days } => {
            let threshold = threshold_days
                .or(ctx.config.as_ref().map(|c| c.analysis.threshold_days))
                .unwrap_or(relations::DEFAULT_THRESHOLD_DAYS);
            let corpus = ctx.corpus(store)?;
            let instances = relations::build_instances(&corpus, &classifier::read_scores(&scores)?, threshold)?;
            relations::write_instances(&out, &instances)?;
            println!("{} mentoring instances", instances.len());
            for frame in [Frame::Project, Frame::Global] {
                let d = relations::direction_distribution(&instances, frame);
                for r in &d.rows {
                    println!("{frame:?} {}: {} ({})", r.direction.label(), r.count, Cell::Percent(r.share).render());
                }
            }
        }
        Command::Genders { store, client, names, cache, base_url, out } => {
            let base = ctx.config.as_ref().map(|c| c.demography.clone());
            let dc = DemographyConfig {
                client: match client {
                    Some(ClientArg::Http) => ClientMode::Http,
                    Some(ClientArg::Fixture) => ClientMode::Fixture,
                    None => base.as_ref().map(|b| b.client).ok_or_else(|| Error::arg("no --client given"))?,
                },
                names: names.or_else(|| base.as_ref().and_then(|b| b.names.clone())),
                cache: cache.or_else(|| base.as_ref().and_then(|b| b.cache.clone())),
                base_url: base_url.or_else(|| base.as_ref().and_then(|b| b.base_url.clone())),
            };
            let corpus = ctx.corpus(store)?;
            let client = report::gender_client(&dc, ctx.offline)?;
            let mut cache = match &dc.cache {
                Some(p) => GenderCache::load(p)?,
                None => GenderCache::default(),
            };
            let outcome = demography::infer_genders(&corpus.contributors, client.as_ref(), &mut cache);
            if let Some(p) = &dc.cache {
                cache.save(p)?;
            }
            if let Some(p) = &out {
                demography::write_genders(p, &outcome.records)?;
            }
            let retained = demography::exclude_ungendered_projects(&corpus, &outcome.genders());
            println!(
                "{} of {} contributors gendered, {} unresolved; projects retained: {}",
                outcome.records.len(),
                corpus.contributors.len(),
                outcome.unresolved.len(),
                retained.join(", ")
            );
            for u in &outcome.unresolved {
                eprintln!("unresolved {}: {}", u.contributor, u.reason);
            }
        }
        Command::Analyze => {
            let bundle = report::run_pipeline(ctx.config()?, RunOptions { offline: ctx.offline });
            for t in &bundle.tables {
                print_table(t);
                println!();
            }
            return Ok(if bundle.is_partial() { EXIT_PARTIAL } else { 0 });
        }
        Command::Report { out, format } => {
            let formats: Vec<Format> = if format == "all" { Format::ALL.to_vec() } else { vec![format.parse()?] };
            let bundle = report::run_pipeline(ctx.config()?, RunOptions { offline: ctx.offline });
            for f in formats {
                let files = report::render(&bundle, f, &out.join(f.name()))?;
                println!("{}: {} files in {}", f.name(), files.len(), out.join(f.name()).display());
            }
            for s in &bundle.stages {
                println!("{} {:?}: {}", s.stage.name(), s.status, s.detail);
            }
            return Ok(if bundle.is_partial() { EXIT_PARTIAL } else { 0 });
        }
        Command::Fixtures { out, seed } => {
            let bundle = report::write_fixture_and_golden(&out, seed)?;
            println!("fixture and golden bundle written to {}", out.display());
            return Ok(if bundle.is_partial() { EXIT_PARTIAL } else { 0 });
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(EXIT_FATAL)
        }
    }
}
