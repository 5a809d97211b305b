use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use laminate::cli::{
    command_check_condition, command_check_law, command_run, command_sweep, command_verify, Outcome,
};
use laminate::config::{parse_config, RunConfig};
use laminate::Error;

#[derive(Parser)]
#[command(
    name = "laminate",
    version,
    about = "Two-layer laminate with gradient damage and a cohesive interface"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Runs the evolution and writes trace, snapshots and manifest.
    Run(Common),
    /// Checks the interface law against the structural assumptions.
    CheckLaw(Common),
    /// Prints the regularity margin of the layers and interface.
    CheckCondition(Common),
    /// Re-checks a stored trace and reproduces the run.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Runs the `[sweep]` block of the configuration.
    Sweep(Common),
}

fn load(common: &Common) -> laminate::Result<RunConfig> {
    let mut config = parse_config(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn dispatch(command: &Command) -> laminate::Result<Outcome> {
    match command {
        Command::Run(c) => command_run(&load(c)?, &c.out),
        Command::CheckLaw(c) => command_check_law(&load(c)?, &c.out),
        Command::CheckCondition(c) => command_check_condition(&load(c)?, &c.out),
        Command::Verify { common, trace } => command_verify(&load(common)?, trace, &common.out),
        Command::Sweep(c) => command_sweep(&load(c)?, &c.out),
    }
}

fn out_dir(command: &Command) -> &Path {
    match command {
        Command::Run(c) | Command::CheckLaw(c) | Command::CheckCondition(c) | Command::Sweep(c) => {
            &c.out
        }
        Command::Verify { common, .. } => &common.out,
    }
}

fn error_record(err: &Error) -> String {
    let kind = match err {
        Error::Config(_) => "config",
        Error::Io(_) | Error::Read { .. } => "io",
        Error::Format { .. } => "format",
        Error::InvalidLoad(_) => "load",
        Error::InvalidMaterial(_) | Error::NonPositiveModulus { .. } => "material",
        Error::InvalidProfile(_) | Error::NonMonotone { .. } => "law",
        _ => "data",
    };
    let mut table = toml::Table::new();
    table.insert("kind".into(), kind.into());
    table.insert("message".into(), err.to_string().into());
    if let Error::Config(issues) = err {
        let list = issues
            .iter()
            .map(|i| {
                let mut t = toml::Table::new();
                t.insert("path".into(), i.path.clone().into());
                t.insert("message".into(), i.message.clone().into());
                toml::Value::Table(t)
            })
            .collect::<Vec<_>>();
        table.insert("issues".into(), list.into());
    }
    let mut root = toml::Table::new();
    root.insert("error".into(), table.into());
    toml::to_string(&root).expect("error record serializes")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.command) {
        Ok(outcome) => {
            print!("{}", outcome.report);
            if outcome.ok {
                ExitCode::SUCCESS
            } else {
                eprintln!("failed checks: {}", outcome.failed().join(", "));
                ExitCode::from(1)
            }
        }
        Err(err) => {
            let record = error_record(&err);
            eprint!("{record}");
            let dir = out_dir(&cli.command);
            if std::fs::create_dir_all(dir).is_ok() {
                let _ = std::fs::write(dir.join("error.toml"), &record);
            }
            ExitCode::from(2)
        }
    }
}
