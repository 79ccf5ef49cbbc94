//! Command-line front end: argument parsing, report documents and SVG plots.

pub mod args;
pub mod commands;
pub mod error;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::path::Path;

use clap::error::ErrorKind;
use clap::Parser;

use args::{AuditCommand, Cli, Command, SynthCommand};
pub use error::{CliError, Result};
use report::{Payload, ReportDocument};

/// Parses `argv` (program name first) and runs it. Returns the exit code:
/// 0 on success, 1 on a usage error, 2 on a data or model error.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
        }
    };
    let argv: Vec<String> = argv
        .iter()
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match execute(&cli, argv) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cli: &Cli, argv: Vec<String>) -> Result<()> {
    match cli.threads {
        Some(0) => Err(CliError::usage("--threads must be at least 1")),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?
            .install(|| dispatch(cli, argv)),
        None => dispatch(cli, argv),
    }
}

fn subcommand_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Synth(SynthCommand::Grid(_)) => "synth grid",
        Command::Synth(SynthCommand::Wall(_)) => "synth wall",
        Command::Cv(_) => "cv",
        Command::Contrast(_) => "contrast",
        Command::Audit(AuditCommand::Omission(_)) => "audit omission",
        Command::Audit(AuditCommand::Underspec(_)) => "audit underspec",
        Command::Audit(AuditCommand::Overfit(_)) => "audit overfit",
        Command::Explain(_) => "explain",
        Command::Tune(_) => "tune",
        Command::Plot(_) => "plot",
    }
}

fn report_path(cmd: &Command) -> Option<&Path> {
    let p = match cmd {
        Command::Synth(SynthCommand::Grid(a) | SynthCommand::Wall(a)) => &a.report,
        Command::Cv(a) => &a.report,
        Command::Contrast(a) => &a.report,
        Command::Audit(AuditCommand::Omission(a)) => &a.report,
        Command::Audit(AuditCommand::Underspec(a)) => &a.report,
        Command::Audit(AuditCommand::Overfit(a)) => &a.report,
        Command::Explain(a) => &a.report,
        Command::Tune(a) => &a.report,
        Command::Plot(_) => return None,
    };
    p.as_deref()
}

fn dispatch(cli: &Cli, argv: Vec<String>) -> Result<()> {
    let payload: Payload = match &cli.command {
        Command::Plot(a) => return commands::plot(a),
        Command::Synth(c) => commands::synth(c)?,
        Command::Cv(a) => commands::cv(a)?,
        Command::Contrast(a) => commands::contrast(a)?,
        Command::Audit(c) => commands::audit(c)?,
        Command::Explain(a) => commands::explain(a)?,
        Command::Tune(a) => commands::tune_cmd(a)?,
    };
    let config = serde_json::to_value(cli).map_err(|e| CliError::json("command echo", e))?;
    let doc = ReportDocument::new(argv, subcommand_name(&cli.command), config, payload);
    let text = doc.to_json()?;
    match report_path(&cli.command) {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::io(path, e)),
        // Synth already wrote its files; only analyses print by default.
        None if matches!(cli.command, Command::Synth(_)) => Ok(()),
        None => {
            use std::io::Write;
            match writeln!(std::io::stdout().lock(), "{text}") {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    Err(CliError::io("<stdout>", e))
                }
                _ => Ok(()),
            }
        }
    }
}
