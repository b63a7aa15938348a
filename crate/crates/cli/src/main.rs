mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use serde_json::json;

use args::{Cli, Command};
use selinf::Error;

/// Exit status for each error family. Usage errors share clap's status 2.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidFamily(_) | Error::UnsupportedFamily(_) => 2,
        Error::Io(_)
        | Error::MissingColumn(_)
        | Error::AllMissing(_)
        | Error::Parse { .. }
        | Error::InvalidInput(_)
        | Error::Dimension(_) => 3,
        Error::ReplicateFailure { .. } => 5,
        Error::Repetition { source, .. } => match exit_code(source) {
            2 | 3 => exit_code(source),
            _ => 5,
        },
        _ => 4,
    }
}

fn run(cli: Cli) -> Result<(String, commands::Written), Error> {
    match cli.command {
        Command::Fit(f) => Ok(("fit".into(), commands::fit(&f.resolve("fit")?)?)),
        Command::Ci(f) => Ok(("ci".into(), commands::ci(&f.resolve("ci")?)?)),
        Command::Simulate(f) => Ok(("simulate".into(), commands::simulate(&f.resolve("simulate")?)?)),
        Command::Compare(f) => Ok(("compare".into(), commands::compare(&f.resolve("compare")?)?)),
        Command::Rerun { manifest, out } => commands::rerun(&manifest, out.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok((command, w)) => {
            let record = json!({
                "status": "ok",
                "command": command,
                "out_dir": w.out_dir.display().to_string(),
                "files": w.files,
            });
            println!("{record}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let code = exit_code(&e);
            let record = json!({
                "status": "error",
                "kind": e.kind(),
                "exit_code": code,
                "message": e.to_string(),
            });
            eprintln!("{record}");
            ExitCode::from(code)
        }
    }
}
