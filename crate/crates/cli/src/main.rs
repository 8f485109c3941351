use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ctf_core::arena::{evaluate, generate_expert_demos, PolicySource};
use ctf_core::demos::{demo_stats, list_demo_files, read_demo, validate_demo};
use ctf_core::training::{train, TrainConfig, TrainError};
use ctf_core::ArenaConfig;
use ctf_server::{start_server, ServerConfig};
use serde::Serialize;

#[derive(Parser)]
#[command(
    name = "ctf",
    version,
    about = "Capture-the-flag simulator: demos, play server, training, evaluation"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a play session server.
    Serve {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        /// Checkpoint that drives every seat without a human.
        #[arg(long)]
        bots: Option<PathBuf>,
    },
    /// Record scripted-expert sessions (six demo files per session).
    ExpertDemos {
        #[arg(long)]
        sessions: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// `default`, `curriculum` or a JSON arena file.
        #[arg(long, default_value = "default")]
        arena: String,
    },
    /// Inspect demonstration files.
    Demo {
        #[command(subcommand)]
        cmd: DemoCmd,
    },
    /// Train a policy from a JSON config.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Leaf override such as `ppo.lr=0.001`; repeatable.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Play matches between two policy sources and report round statistics.
    Eval {
        /// `expert`, `random` or a checkpoint path.
        #[arg(long)]
        blue: String,
        #[arg(long)]
        white: String,
        #[arg(long)]
        episodes: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value = "default")]
        arena: String,
        #[arg(long)]
        json: bool,
        /// Also write the per-episode log as CSV.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Check files (or directories of files) for format problems.
    Validate {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
    /// Steps, rounds, duration and action histogram per file.
    Stats {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
        #[arg(long)]
        json: bool,
    },
}

/// Failure classes mapped to exit codes.
enum Fail {
    /// Bad input the user can fix: missing files, bad configs.
    Usage(String),
    /// Validation or runtime failure.
    Failed(String),
}

impl Fail {
    fn code(&self) -> u8 {
        match self {
            Fail::Failed(_) => 1,
            Fail::Usage(_) => 2,
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.cmd) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            match &f {
                Fail::Usage(m) | Fail::Failed(m) if !m.is_empty() => eprintln!("error: {m}"),
                _ => {}
            }
            ExitCode::from(f.code())
        }
    }
}

fn run(cmd: Cmd) -> Result<(), Fail> {
    match cmd {
        Cmd::Serve { config, port, bots } => serve(config, port, bots),
        Cmd::ExpertDemos {
            sessions,
            seed,
            out,
            arena,
        } => {
            let arena = parse_arena(&arena)?;
            let bundles = generate_expert_demos(&arena, sessions, seed, &out)
                .map_err(|e| Fail::Failed(e.to_string()))?;
            for p in bundles.iter().flatten() {
                println!("{}", p.display());
            }
            Ok(())
        }
        Cmd::Demo { cmd } => match cmd {
            DemoCmd::Validate { paths, json } => demo_validate(&paths, json),
            DemoCmd::Stats { paths, json } => demo_stats_cmd(&paths, json),
        },
        Cmd::Train { config, overrides } => {
            if !config.is_file() {
                return Err(Fail::Usage(format!(
                    "config file {} not found",
                    config.display()
                )));
            }
            let cfg =
                TrainConfig::load(&config, &overrides).map_err(|e| Fail::Usage(e.to_string()))?;
            let out = train(&cfg).map_err(|e| match e {
                TrainError::Config(m) => Fail::Usage(m),
                e => Fail::Failed(e.to_string()),
            })?;
            println!("{}", out.checkpoint_path.display());
            Ok(())
        }
        Cmd::Eval {
            blue,
            white,
            episodes,
            seed,
            arena,
            json,
            csv,
        } => {
            let arena = parse_arena(&arena)?;
            let b = PolicySource::parse(&blue).map_err(|e| Fail::Usage(e.to_string()))?;
            let w = PolicySource::parse(&white).map_err(|e| Fail::Usage(e.to_string()))?;
            let m = evaluate(&arena, &b, &w, episodes, seed)
                .map_err(|e| Fail::Failed(e.to_string()))?;
            if let Some(p) = csv {
                std::fs::write(&p, m.csv())
                    .map_err(|e| Fail::Failed(format!("{}: {e}", p.display())))?;
            }
            if json {
                println!(
                    "{}",
                    serde_json::to_string_pretty(&m).expect("metrics serialize")
                );
            } else {
                println!("{} (blue) vs {} (white)", b.name(), w.name());
                print!("{}", m.table());
            }
            Ok(())
        }
    }
}

fn serve(config: Option<PathBuf>, port: Option<u16>, bots: Option<PathBuf>) -> Result<(), Fail> {
    let mut cfg = match &config {
        Some(p) if !p.is_file() => {
            return Err(Fail::Usage(format!(
                "config file {} not found",
                p.display()
            )))
        }
        Some(p) => ServerConfig::load(p).map_err(|e| Fail::Usage(e.to_string()))?,
        None => ServerConfig::default(),
    };
    if let Some(p) = port {
        cfg.port = p;
    }
    if bots.is_some() {
        cfg.bot_checkpoint = bots;
    }
    let handle = start_server(cfg).map_err(|e| Fail::Usage(e.to_string()))?;
    eprintln!("serving on ws://{}", handle.local_addr());
    let summary = handle.wait().map_err(|e| Fail::Failed(e.to_string()))?;
    eprintln!(
        "session ended after {} ticks, {} rounds",
        summary.ticks, summary.rounds
    );
    Ok(())
}

fn parse_arena(s: &str) -> Result<ArenaConfig, Fail> {
    let arena = match s {
        "default" => ArenaConfig::default(),
        "curriculum" => ArenaConfig::fetch_flag_curriculum(),
        path => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| Fail::Usage(format!("arena file {path}: {e}")))?;
            serde_json::from_str(&text)
                .map_err(|e| Fail::Usage(format!("arena file {path}: {e}")))?
        }
    };
    arena.validate().map_err(|e| Fail::Usage(e.to_string()))?;
    Ok(arena)
}

/// Expands directories into the demo files they contain.
fn expand(paths: &[PathBuf]) -> Result<Vec<PathBuf>, Fail> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            out.extend(list_demo_files(p).map_err(|e| Fail::Usage(e.to_string()))?);
        } else {
            out.push(p.clone());
        }
    }
    Ok(out)
}

#[derive(Serialize)]
struct FileResult<T: Serialize> {
    path: PathBuf,
    #[serde(flatten)]
    result: T,
}

fn demo_validate(paths: &[PathBuf], json: bool) -> Result<(), Fail> {
    let files = expand(paths)?;
    let reports: Vec<_> = files
        .iter()
        .map(|p| FileResult {
            path: p.clone(),
            result: validate_demo(p),
        })
        .collect();
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&reports).expect("reports serialize")
        );
    } else {
        for r in &reports {
            let v = &r.result;
            if v.ok {
                println!(
                    "ok    {}  steps={} rounds={} duration={:.2}s",
                    r.path.display(),
                    v.steps,
                    v.rounds,
                    v.duration_s
                );
            } else {
                println!("FAIL  {}", r.path.display());
                for p in &v.problems {
                    println!("      {p}");
                }
            }
        }
    }
    let bad = reports.iter().filter(|r| !r.result.ok).count();
    if bad > 0 {
        return Err(Fail::Failed(format!(
            "{bad} of {} files failed validation",
            reports.len()
        )));
    }
    Ok(())
}

fn demo_stats_cmd(paths: &[PathBuf], json: bool) -> Result<(), Fail> {
    let files = expand(paths)?;
    let mut stats = Vec::new();
    for p in &files {
        let t = read_demo(p).map_err(|e| Fail::Failed(e.to_string()))?;
        stats.push(FileResult {
            path: p.clone(),
            result: demo_stats(&t),
        });
    }
    if json {
        println!(
            "{}",
            serde_json::to_string_pretty(&stats).expect("stats serialize")
        );
    } else {
        for s in &stats {
            let r = &s.result;
            println!("{}", s.path.display());
            println!(
                "  steps {}  rounds {}  duration {:.2}s",
                r.steps, r.rounds, r.duration_s
            );
            let h = &r.action_histogram;
            println!("  move x  -:{} 0:{} +:{}", h[0][0], h[0][1], h[0][2]);
            println!("  move y  -:{} 0:{} +:{}", h[1][0], h[1][1], h[1][2]);
            println!("  throw   no:{} yes:{}", h[2][0], h[2][1]);
        }
    }
    Ok(())
}
