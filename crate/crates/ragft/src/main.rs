use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ragft::config::RunConfig;
use ragft::error::{AppError, AppResult};
use ragft::service::{self, ServiceState};
use ragft::{evalio, io, ProviderSet, Stage};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "ragft", version, about = "Dual-retrieval compliance assistant and fine-tuning dataset generator")]
struct Cli {
    /// JSON run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory that relative artifact paths resolve against.
    #[arg(long, global = true, default_value = ".")]
    workdir: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Hybrid blend weight for all retrievers.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chunk the documentation projects and standards, load questions, assign splits.
    Ingest {
        /// Directory whose subdirectories are documentation projects.
        #[arg(long)]
        docs: PathBuf,
        /// Standards files or directories.
        #[arg(long, required = true, num_args = 1..)]
        standards: Vec<PathBuf>,
        /// JSON array of {id, text, origin} question records.
        #[arg(long)]
        questions: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Build the document, standards and question indices.
    Index {
        #[arg(long)]
        force: bool,
    },
    /// Pair every training chunk with its most relevant question.
    Pair {
        /// Continue an interrupted journal.
        #[arg(long)]
        resume: bool,
        #[arg(long)]
        force: bool,
    },
    /// Build training instances, generate answers, sample for review, export.
    Generate {
        #[arg(long)]
        include_flagged: bool,
        #[arg(long)]
        review_fraction: Option<f64>,
        #[arg(long)]
        force: bool,
    },
    /// Check an export and its sidecar for structural and hygiene violations.
    VerifyDataset,
    /// Re-export with review decisions applied.
    Export {
        #[arg(long)]
        include_flagged: bool,
        #[arg(long)]
        force: bool,
    },
    /// Answer one compliance question.
    Query { question: String },
    /// Serve the query and review endpoints.
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
    /// Pair two response sets into blind A/B items and a separate key.
    EvalBlind {
        #[arg(long)]
        responses_1: PathBuf,
        #[arg(long)]
        responses_2: PathBuf,
        #[arg(long, default_value = "model1")]
        model1_name: String,
        #[arg(long, default_value = "model2")]
        model2_name: String,
        #[arg(long)]
        items: PathBuf,
        #[arg(long)]
        key: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Unblind ratings and report means and improvement.
    EvalReport {
        #[arg(long)]
        ratings: PathBuf,
        #[arg(long)]
        key: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Print statistics.
    Stats { what: StatsKind },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsKind {
    Questions,
    Review,
    Dataset,
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("serializable summary"));
}

fn load_config(cli: &Cli) -> AppResult<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(alpha) = cli.alpha {
        cfg.retrieval.alpha = alpha;
    }
    match &cli.command {
        Command::Generate { review_fraction: Some(f), .. } => cfg.review_fraction = *f,
        Command::Serve { bind: Some(b) } => cfg.bind = b.clone(),
        _ => {}
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: Cli) -> AppResult<ExitCode> {
    let cfg = load_config(&cli)?;
    let stage = Stage::new(cfg, &cli.workdir);
    let providers = || ProviderSet::from_config(&stage.config.providers);
    match cli.command {
        Command::Ingest { docs, standards, questions, force } => {
            print_json(&stage.ingest(&docs, &standards, &questions, force)?);
        }
        Command::Index { force } => print_json(&stage.index(&providers()?, force)?),
        Command::Pair { resume, force } => print_json(&stage.pair(&providers()?, resume, force)?),
        Command::Generate { include_flagged, force, .. } => {
            print_json(&stage.generate(&providers()?, include_flagged, force)?);
        }
        Command::VerifyDataset => {
            let violations = stage.verify()?;
            for v in &violations {
                eprintln!("violation {:?} at line {:?}: {}", v.kind, v.line, v.detail);
            }
            print_json(&serde_json::json!({ "ok": violations.is_empty(), "violations": violations }));
            if !violations.is_empty() {
                return Err(AppError::Verification(violations.len()));
            }
        }
        Command::Export { include_flagged, force } => print_json(&stage.export(include_flagged, force)?),
        Command::Query { question } => {
            let engine = stage.query_engine(&providers()?)?;
            match engine.answer_query(&question) {
                Ok(answer) => print_json(&answer),
                Err(failure) => {
                    print_json(&failure);
                    return Ok(ExitCode::FAILURE);
                }
            }
        }
        Command::Serve { .. } => {
            let engine = stage.query_engine(&providers()?)?;
            let state = ServiceState::load(&stage.paths, Some(engine))?;
            service::serve(state, &stage.config.bind, Some(&stage.paths.static_dir))?;
        }
        Command::EvalBlind { responses_1, responses_2, model1_name, model2_name, items, key, force } => {
            let blind = evalio::write_blind_set(
                &responses_1,
                &responses_2,
                (&model1_name, &model2_name),
                stage.config.seed,
                &items,
                &key,
                force,
            )?;
            print_json(&serde_json::json!({ "items": blind.len(), "items_file": items, "key_file": key }));
        }
        Command::EvalReport { ratings, key, json } => {
            let report = evalio::report(&ratings, &key)?;
            eprint!("{}", report.render_text());
            if let Some(path) = json {
                io::write_json(&path, &report)?;
            }
            print_json(&report);
        }
        Command::Stats { what } => match what {
            StatsKind::Questions => print_json(&stage.question_stats()?),
            StatsKind::Review => print_json(&stage.review_stats()?),
            StatsKind::Dataset => {
                let meta: ragft::datasetgen::ExportMeta = {
                    io::require(&stage.paths.export_meta, "generate")?;
                    io::read_json(&stage.paths.export_meta)?
                };
                print_json(&serde_json::json!({
                    "summary": meta.summary,
                    "seed": meta.seed,
                    "hyperparameters": meta.hyperparameters,
                    "training_entries": meta.training_entries,
                    "validation_entries": meta.validation_entries,
                    "approx_tokens": meta.approx_tokens,
                    "dataset_sha256": meta.dataset_sha256,
                }));
            }
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
