use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;
use vortexlab_cli::config::{CommandKind, RunConfig};
use vortexlab_cli::output::OutDir;
use vortexlab_cli::{commands, CliError};

#[derive(Parser, Debug)]
#[command(name = "vortexlab", version, about = "Desingularized point-vortex experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `out` in the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Random seed; overrides `seed` in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Integrate the point-vortex system.
    SimulateVortices,
    /// Euler runs over an ε list against the point-vortex path.
    ConvergenceStudy,
    /// Solve one angular mode of the linearized operator.
    ModeSolve,
    /// Near- and far-field residual of the ansatz.
    CheckAnsatz,
    /// Inner and outer transport contracts.
    TransportProbe,
    /// Quadratic-form gap on random orthogonal fields.
    GapTest,
}

impl Command {
    fn kind(self) -> CommandKind {
        match self {
            Command::SimulateVortices => CommandKind::SimulateVortices,
            Command::ConvergenceStudy => CommandKind::ConvergenceStudy,
            Command::ModeSolve => CommandKind::ModeSolve,
            Command::CheckAnsatz => CommandKind::CheckAnsatz,
            Command::TransportProbe => CommandKind::TransportProbe,
            Command::GapTest => CommandKind::GapTest,
        }
    }
}

fn execute(cli: Cli) -> Result<String, CliError> {
    let path = cli.config.ok_or_else(|| CliError::Invalid("--config is required".into()))?;
    let mut cfg = RunConfig::load(&path)?;
    let kind = cli.command.kind();
    if cfg.command != kind {
        return Err(CliError::Invalid(format!(
            "command: config is for {} but {} was invoked",
            cfg.command.name(),
            kind.name()
        )));
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = cli.out {
        cfg.out = Some(o);
    }
    let out = cfg
        .out
        .clone()
        .ok_or_else(|| CliError::Invalid("out: no output directory (set `out` or pass --out)".into()))?;
    if let Some(n) = cli.threads {
        set_threads(n)?;
    }
    cfg.validate()?;
    let dir = OutDir::create(&out)?;
    commands::run(&cfg, &dir)
}

#[cfg(feature = "parallel")]
fn set_threads(n: usize) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Invalid(format!("threads: {e}")))
}

#[cfg(not(feature = "parallel"))]
fn set_threads(n: usize) -> Result<(), CliError> {
    if n > 1 {
        eprintln!("warning: built without the parallel feature; --threads {n} ignored");
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
