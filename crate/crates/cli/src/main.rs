use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dgff::verify::{run_suite, SUITES};
use dgff_cli::{init_threads, run_from_path, CliError};

#[derive(Parser)]
#[command(name = "dgff", version, about = "DGFF level sets and chaos experiments")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run an experiment from a config or manifest JSON file.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a field or measure CSV to a 16-bit PGM.
    Render { input: PathBuf, output: PathBuf },
    /// Run self-check suites (all by default).
    Verify { suite: Option<String> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(2)
        }
    }
}

fn dispatch(cmd: Cmd) -> Result<bool, CliError> {
    init_threads()?;
    match cmd {
        Cmd::Run { config, seed, out } => {
            let outcome = run_from_path(&config, seed, out)?;
            emit(&serde_json::to_string(&outcome.manifest)?)?;
            Ok(outcome.pass)
        }
        Cmd::Render { input, output } => {
            let meta = dgff::io::render_file(&input, &output)?;
            emit(&serde_json::to_string(&meta)?)?;
            Ok(true)
        }
        Cmd::Verify { suite } => {
            let names: Vec<String> = match suite {
                Some(s) => vec![s],
                None => SUITES.iter().map(|s| s.to_string()).collect(),
            };
            let mut pass = true;
            let mut reports = vec![];
            for n in names {
                let r = run_suite(&n)?;
                pass &= r.pass;
                reports.push(r);
            }
            emit(&serde_json::to_string_pretty(&reports)?)?;
            Ok(pass)
        }
    }
}

/// Prints a line, treating a closed pipe as success.
fn emit(line: &str) -> Result<(), CliError> {
    match writeln!(std::io::stdout().lock(), "{line}") {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}
