mod commands;
mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use serde::Serialize;
use serde_json::Value;

use commands::{CliError, Outcome};
use config::{Command, Format, RunConfig};

pub const SCHEMA: &str = "dpminimax.report/v1";

#[derive(Serialize)]
struct Envelope<'a> {
    schema: &'static str,
    tool: &'static str,
    version: &'static str,
    seed: u64,
    config: &'a RunConfig,
    result: &'a Value,
}

fn default_trials(cmd: &Command) -> u64 {
    match cmd {
        Command::Couple(_) => 100_000,
        Command::Verify(_) => 20_000,
        Command::Experiment(config::ExperimentCmd::Dpsgml(_)) => 1_000,
        Command::Experiment(_) => 10_000,
        Command::Bounds(_) | Command::Replay { .. } => 0,
    }
}

fn load_replay(file: &Path, output: Option<PathBuf>) -> Result<RunConfig, CliError> {
    let text = fs::read_to_string(file)?;
    let v: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", file.display())))?;
    let cfg = v.get("config").cloned().unwrap_or(v);
    let mut cfg: RunConfig =
        serde_json::from_value(cfg).map_err(|e| CliError::Usage(format!("{}: bad config: {e}", file.display())))?;
    if output.is_some() {
        cfg.output = output;
    }
    Ok(cfg)
}

/// Fills every defaulted field so the embedded config reproduces the run.
fn resolve(mut cfg: RunConfig) -> Result<RunConfig, CliError> {
    if let Command::Replay { file } = &cfg.command {
        let file = file.clone();
        cfg = load_replay(&file, cfg.output.take())?;
        if matches!(cfg.command, Command::Replay { .. }) {
            return Err(CliError::Usage("a replayed config cannot itself be a replay".into()));
        }
    }
    if cfg.trials.is_none() {
        cfg.trials = Some(default_trials(&cfg.command));
    }
    if cfg.workers.is_none() {
        cfg.workers = Some(std::thread::available_parallelism().map_or(1, |n| n.get()));
    }
    if cfg.workers == Some(0) {
        return Err(CliError::Usage("--workers must be >= 1".into()));
    }
    Ok(cfg)
}

fn execute(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let trials = cfg.trials.expect("resolved");
    match &cfg.command {
        Command::Bounds(b) => commands::bounds(b),
        Command::Couple(c) => commands::couple(c, trials, cfg.seed),
        Command::Verify(v) => commands::verify(v, trials, cfg.seed),
        Command::Experiment(e) => commands::experiment(e, trials, cfg.seed),
        Command::Replay { .. } => unreachable!("resolved"),
    }
}

fn render_json(cfg: &RunConfig, result: &Value) -> String {
    let env = Envelope {
        schema: SCHEMA,
        tool: "dpminimax",
        version: env!("CARGO_PKG_VERSION"),
        seed: cfg.seed,
        config: cfg,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env).expect("envelope serializes");
    s.push('\n');
    s
}

/// CSV with `#` metadata lines; read it back with a comment-aware parser.
fn render_csv(cfg: &RunConfig, body: &str) -> String {
    format!(
        "# schema: {SCHEMA}\n# version: {}\n# seed: {}\n# config: {}\n{body}",
        env!("CARGO_PKG_VERSION"),
        cfg.seed,
        serde_json::to_string(cfg).expect("config serializes")
    )
}

fn emit(cfg: &RunConfig, out: &Outcome) -> Result<(), CliError> {
    let json = || render_json(cfg, &out.result);
    let csv = || render_csv(cfg, &out.csv);
    match (&cfg.output, &cfg.command) {
        (Some(path), Command::Experiment(_)) => {
            fs::write(path.with_extension("json"), json())?;
            fs::write(path.with_extension("csv"), csv())?;
        }
        (Some(path), _) => fs::write(
            path,
            match cfg.format {
                Format::Json => json(),
                Format::Csv => csv(),
            },
        )?,
        (None, _) => print!(
            "{}",
            match cfg.format {
                Format::Json => json(),
                Format::Csv => csv(),
            }
        ),
    }
    Ok(())
}

fn run(cfg: RunConfig) -> Result<Option<String>, CliError> {
    let cfg = resolve(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers.expect("resolved"))
        .build()
        .map_err(|e| CliError::Failed(e.to_string()))?;
    let out = pool.install(|| execute(&cfg))?;
    emit(&cfg, &out)?;
    Ok(out.failure)
}

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cfg) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(failure)) => {
            eprintln!("{failure}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("\n{}", RunConfig::command().render_usage());
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
