use std::io::{self, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use lightbot::analysis::{analyze, AnalysisOptions, PoolScope};
use lightbot::compress::{compress, CompressionConfig};
use lightbot::ppo::{self, Hyperparams};
use lightbot::program::{execute, ExecutionLimits, Program};
use lightbot::service::config::ServerConfig;
use lightbot::service::store::{parse_jsonl, read_jsonl_file};
use lightbot::service::{self, ConditionId, EventStore, ExperimentService, ExportFilter, PuzzleSet, SystemClock};
use lightbot::solver::bfs_shortest;
use lightbot::world::{Action, Puzzle};

#[derive(Parser)]
#[command(name = "lightbot", version, about = "Lightbot puzzles, programs, solvers and experiment server")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Find a shortest flat solution.
    Solve(SolveArgs),
    /// Compress an action sequence into a hierarchical program.
    Compress {
        /// Token file (one per line or comma-separated); stdin if omitted.
        input: Option<PathBuf>,
        /// Skip the recursion pass.
        #[arg(long)]
        no_recursion: bool,
    },
    /// Execute a program on a puzzle and print the trace.
    Run {
        puzzle: PathBuf,
        program: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        max_steps: usize,
        #[arg(long, default_value_t = 1_000)]
        max_depth: usize,
    },
    /// Compute per-puzzle and per-condition statistics from exported logs.
    Analyze {
        logs: PathBuf,
        #[arg(long)]
        puzzles: PathBuf,
        /// Output directory for the CSV tables.
        #[arg(long, default_value = "analysis")]
        out: PathBuf,
        /// Normalize within each condition instead of across conditions.
        #[arg(long)]
        within_condition: bool,
        #[arg(long, default_value_t = 0.50)]
        max_bonus: f64,
    },
    /// Run the experiment server.
    Serve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write session logs as JSONL.
    Export {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        condition: Option<ConditionId>,
        #[arg(long)]
        session: Option<String>,
        /// Output file; stdout if omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Load a JSONL export into the server's data directory.
    Import {
        #[arg(long)]
        config: PathBuf,
        input: PathBuf,
    },
}

#[derive(Args)]
struct SolveArgs {
    puzzle: PathBuf,
    #[arg(long, conflicts_with = "ppo", required_unless_present = "ppo")]
    exact: bool,
    #[arg(long)]
    ppo: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// TOML file of PPO hyperparameters.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 100)]
    rollouts: usize,
}

type Result<T> = std::result::Result<T, String>;

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_puzzle(path: &Path) -> Result<Puzzle> {
    Puzzle::from_text(&read_file(path)?).map_err(|e| format!("{}: {e}", path.display()))
}

fn print_json(v: &impl serde::Serialize) -> Result<()> {
    let mut out = io::stdout().lock();
    serde_json::to_writer(&mut out, v).map_err(|e| e.to_string())?;
    writeln!(out).map_err(|e| e.to_string())
}

fn tokens(text: &str) -> Result<Vec<Action>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| Action::from_token(t).ok_or_else(|| format!("unknown action token {t:?}")))
        .collect()
}

fn solve(a: SolveArgs) -> Result<()> {
    let puzzle = load_puzzle(&a.puzzle)?;
    if a.exact {
        let path = bfs_shortest(&puzzle).ok_or("puzzle has no solution")?;
        return print_json(&json!({"actions": path, "length": path.len()}));
    }
    let mut hyper = match &a.config {
        Some(p) => toml::from_str::<Hyperparams>(&read_file(p)?).map_err(|e| format!("{}: {e}", p.display()))?,
        None => Hyperparams::default(),
    };
    if let Some(s) = a.seed {
        hyper.seed = s;
    }
    let (best, outcome) = ppo::solve(&puzzle, &hyper, a.rollouts).map_err(|e| e.to_string())?;
    for rec in &outcome.history {
        let mut v = serde_json::to_value(rec).map_err(|e| e.to_string())?;
        v["record"] = json!("update");
        print_json(&v)?;
    }
    print_json(&json!({
        "record": "result",
        "actions": best,
        "length": best.len(),
        "converged": outcome.converged,
        "env_steps": outcome.env_steps,
    }))
}

fn open_service(cfg: &ServerConfig) -> Result<ExperimentService> {
    let puzzles = PuzzleSet::load_dir(&cfg.puzzle_dir).map_err(|e| e.to_string())?;
    let store = EventStore::open(&cfg.data_dir).map_err(|e| e.to_string())?;
    Ok(ExperimentService::new(puzzles, store, Arc::new(SystemClock))
        .map_err(|e| e.to_string())?
        .with_condition_seeds(cfg.condition_seeds.clone()))
}

fn serve(config: &Path) -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "info".into()))
        .init();
    let cfg = ServerConfig::load(config).map_err(|e| e.to_string())?;
    let svc = Arc::new(open_service(&cfg)?);
    let app = service::http::router(svc, cfg.static_dir.as_deref());
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let addr = format!("{}:{}", cfg.bind, cfg.port);
        let listener = tokio::net::TcpListener::bind(&addr).await.map_err(|e| format!("{addr}: {e}"))?;
        tracing::info!("listening on {addr}");
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| e.to_string())
    })
}

fn run() -> Result<()> {
    match Cli::parse().command {
        Command::Solve(a) => solve(a),
        Command::Compress { input, no_recursion } => {
            let text = match input {
                Some(p) => read_file(&p)?,
                None => {
                    let mut s = String::new();
                    io::stdin().read_to_string(&mut s).map_err(|e| e.to_string())?;
                    s
                }
            };
            let config = CompressionConfig { recursion: !no_recursion, ..Default::default() };
            let result = compress(&tokens(&text)?, &config).map_err(|e| e.to_string())?;
            print_json(&result.summary())
        }
        Command::Run { puzzle, program, max_steps, max_depth } => {
            let puzzle = load_puzzle(&puzzle)?;
            let program = Program::from_text(&read_file(&program)?).map_err(|e| e.to_string())?;
            if max_steps == 0 || max_depth == 0 {
                return Err("limits must be positive".into());
            }
            let trace = execute(&puzzle, &program, ExecutionLimits::new(max_steps, max_depth)).map_err(|e| e.to_string())?;
            print_json(&trace.to_export())
        }
        Command::Analyze { logs, puzzles, out, within_condition, max_bonus } => {
            let events = read_jsonl_file(&logs).map_err(|e| e.to_string())?;
            let set = PuzzleSet::load_dir(&puzzles).map_err(|e| e.to_string())?;
            let opts = AnalysisOptions {
                scope: if within_condition { PoolScope::WithinCondition } else { PoolScope::AcrossConditions },
                max_bonus,
                ..Default::default()
            };
            let report = analyze(&events, &set, &opts).map_err(|e| e.to_string())?;
            report.write_csv(&out).map_err(|e| e.to_string())?;
            for n in &report.notes {
                eprintln!("note: {n}");
            }
            eprintln!("{} records analyzed, tables in {}", report.records.len(), out.display());
            Ok(())
        }
        Command::Serve { config } => serve(&config),
        Command::Export { config, condition, session, output } => {
            let cfg = ServerConfig::load(&config).map_err(|e| e.to_string())?;
            let svc = open_service(&cfg)?;
            let text = svc.export_sessions(&ExportFilter { condition, session }).map_err(|e| e.to_string())?;
            match output {
                Some(p) => std::fs::write(&p, text).map_err(|e| format!("{}: {e}", p.display())),
                None => io::stdout().write_all(text.as_bytes()).map_err(|e| e.to_string()),
            }
        }
        Command::Import { config, input } => {
            let cfg = ServerConfig::load(&config).map_err(|e| e.to_string())?;
            let text = read_file(&input)?;
            parse_jsonl(&text).map_err(|e| e.to_string())?;
            let store = EventStore::open(&cfg.data_dir).map_err(|e| e.to_string())?;
            let n = service::import_jsonl(&store, &text).map_err(|e| e.to_string())?;
            eprintln!("imported {n} records");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
