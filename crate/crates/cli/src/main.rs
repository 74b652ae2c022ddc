#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod args;
mod commands;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use args::Cli;
use commands::Failure;

const OUTPUT_DIR_VAR: &str = "CEVMIX_OUTPUT_DIR";

fn main() -> ExitCode {
    let argv = match args::merge_config(std::env::args().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::try_parse_from(argv).unwrap_or_else(|e| e.exit());
    let common = cli.command.common();
    let table = match commands::run(&cli.command) {
        Ok(t) => t,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
        Err(Failure::Unsupported(msg)) => {
            eprintln!("error: regime not supported: {msg}");
            return ExitCode::from(3);
        }
    };
    let bytes = table.render(common.format);
    let target = common
        .output
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(|d| PathBuf::from(d).join(format!("{}.{}", cli.command.name(), common.format.extension()))));
    let written = match &target {
        Some(path) => std::fs::write(path, &bytes).map_err(|e| format!("cannot write {}: {e}", path.display())),
        None => std::io::stdout().write_all(&bytes).map_err(|e| e.to_string()),
    };
    if let Err(e) = written {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let failed = table.failed_rows();
    if failed > 0 {
        eprintln!("{failed} of {} rows failed; see the error column", table.rows.len());
        return ExitCode::from(1);
    }
    ExitCode::SUCCESS
}
