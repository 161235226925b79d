//! `ledkkl` — command-line front end for the LED link observer toolkit.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 missing or
//! malformed artifact, 4 numerical failure (divergence, lost series decay).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{keys_help, ConfigError, RunConfig, Source};
use ledkkl::CoreError;

#[derive(Parser)]
#[command(
    name = "ledkkl",
    version,
    about = "LED optical link observer toolkit: dataset generation, training, evaluation",
    after_help = "Every subcommand reads the same flat `section.key = value` config file;\n\
                  its --help lists the keys it uses. Angles in files are radians; on the\n\
                  command line a `deg` suffix is accepted (--set channel.receiver_offset=6deg)."
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

/// Flags shared by every subcommand.
#[derive(Args)]
struct CommonArgs {
    /// Config file of `section.key = value` lines.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Global seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory; overrides `paths.out`.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override one config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Sample a transition dataset and write it as CSV.
    #[command(after_help = keys_help(&["channel.sample_time", "data.", "paths.dataset", "run."]))]
    Generate(CommonArgs),

    /// Train the encoder and decoder on a stored dataset.
    #[command(after_help = keys_help(&["channel.", "latent.", "train.", "paths.", "run."]))]
    Train(CommonArgs),

    /// Run the standard scenarios against saved checkpoints.
    #[command(after_help = keys_help(&["channel.", "noise.", "eval.", "paths.checkpoints", "paths.out", "run."]))]
    Evaluate(CommonArgs),

    /// Re-run scenarios across link distances and summarize.
    #[command(after_help = keys_help(&["channel.", "noise.", "sweep.", "paths.checkpoints", "paths.out", "run."]))]
    Sweep(CommonArgs),

    /// Verify the latent series against its defining equation.
    #[command(name = "oracle-check", after_help = keys_help(&["channel.", "latent.", "data.u_bar", "oracle.", "paths.checkpoints", "paths.out", "run."]))]
    OracleCheck(CommonArgs),
}

impl Cmd {
    fn common(&self) -> &CommonArgs {
        match self {
            Cmd::Generate(c)
            | Cmd::Train(c)
            | Cmd::Evaluate(c)
            | Cmd::Sweep(c)
            | Cmd::OracleCheck(c) => c,
        }
    }

    fn run(&self, cfg: &RunConfig) -> ledkkl::Result<()> {
        match self {
            Cmd::Generate(_) => commands::generate(cfg),
            Cmd::Train(_) => commands::train(cfg),
            Cmd::Evaluate(_) => commands::evaluate(cfg),
            Cmd::Sweep(_) => commands::sweep(cfg),
            Cmd::OracleCheck(_) => commands::oracle_check(cfg),
        }
    }
}

/// Resolution order: defaults, then the config file, then `--set`, then the
/// dedicated flags. Later sources win.
fn resolve(common: &CommonArgs) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &common.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        cfg.apply_file_text(&text, path)?;
    }
    for assignment in &common.set {
        cfg.apply_flag(assignment)?;
    }
    if let Some(seed) = common.seed {
        cfg.apply(
            "run.seed",
            &seed.to_string(),
            Source::Flag,
        )?;
    }
    if let Some(out) = &common.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn exit_for(err: &CoreError) -> u8 {
    match err {
        CoreError::InvalidConfig(_) => 2,
        CoreError::MissingArtifact(_) | CoreError::MalformedArtifact { .. } | CoreError::Io(_) => 3,
        CoreError::TrainingDiverged(_)
        | CoreError::NumericalFailure(_)
        | CoreError::SummandDecayFailure { .. } => 4,
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let cfg = match resolve(cli.cmd.common()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    match cli.cmd.run(&cfg) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
