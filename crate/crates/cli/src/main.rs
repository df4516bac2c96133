use std::process::ExitCode;

use clap::Parser;
use fedosov_cli::{run, Cli};
use serde_json::json;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let report = match run(&cli) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("{}", json!({ "error": "input", "command": cli.command.name(), "message": format!("{e:#}") }));
            return ExitCode::from(2);
        }
    };
    if let Some(path) = &cli.common.report {
        if let Err(e) = std::fs::write(path, report.to_json()) {
            eprintln!("{}", json!({ "error": "input", "message": format!("writing {}: {e}", path.display()) }));
            return ExitCode::from(2);
        }
    }
    if cli.common.json {
        print!("{}", report.to_json());
    } else {
        print!("{}", report.summary(cli.common.verbose));
    }
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
