use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rcpl::gallery::{emit_config, gallery, NAMES};
use rcpl::{json, load_config, run, CliError, RunConfig, RunOptions, Task};

#[derive(Parser)]
#[command(
    name = "rcpl",
    version,
    about = "Curvature and RC-positivity certification for Hermitian bundles"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the tasks listed in a TOML configuration.
    Run {
        /// TOML configuration file.
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Run only the given tasks (default: certify) from a configuration.
    Certify {
        config: PathBuf,
        #[arg(long = "task", value_name = "TASK")]
        tasks: Vec<Task>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// List the built-in examples, run one, or print its configuration.
    Gallery {
        name: Option<String>,
        /// Print the entry as TOML instead of running it.
        #[arg(long)]
        emit_config: bool,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Seed for the optimizer's random starts.
    #[arg(long)]
    seed: Option<u64>,
    /// Number of optimizer starts per search.
    #[arg(long, value_name = "STARTS")]
    budget: Option<usize>,
    /// Optimizer convergence tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Record wall time in the report.
    #[arg(long)]
    timing: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(b) = self.budget {
            cfg.budget.starts = b;
        }
        if let Some(t) = self.tol {
            cfg.budget.tol = t;
        }
        if let Some(o) = &self.out {
            cfg.output = Some(o.clone());
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run { config, overrides } => execute(load_config(&config)?, &overrides),
        Command::Certify {
            config,
            tasks,
            overrides,
        } => {
            let mut cfg = load_config(&config)?;
            cfg.tasks = if tasks.is_empty() { vec![Task::Certify] } else { tasks };
            execute(cfg, &overrides)
        }
        Command::Gallery { name: None, .. } => {
            for n in NAMES {
                println!("{n}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Gallery {
            name: Some(name),
            emit_config: emit,
            overrides,
        } => {
            let mut cfg = gallery(&name)?;
            if emit {
                overrides.apply(&mut cfg);
                print!("{}", emit_config(&cfg));
                Ok(ExitCode::SUCCESS)
            } else {
                execute(cfg, &overrides)
            }
        }
    }
}

fn execute(mut cfg: RunConfig, overrides: &Overrides) -> Result<ExitCode, CliError> {
    overrides.apply(&mut cfg);
    cfg.validate()?;
    let report = run(
        &cfg,
        RunOptions {
            timing: overrides.timing,
        },
    );
    let text = json::to_string(&report).map_err(|e| CliError::Output(e.to_string()))?;
    match &cfg.output {
        Some(path) => write_report(path, &text)?,
        None => print!("{text}"),
    }
    for t in report.tasks.iter().filter(|t| t.error.is_some()) {
        eprintln!("task {}: {}", t.task.name(), t.error.as_deref().unwrap_or_default());
    }
    Ok(if report.passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn write_report(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}
