//! The `diagnose` subcommand: a report from a persisted trace.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use geomc::diagnostics::DiagnosticsReport;
use geomc::ChainTrace;

use crate::error::{CliError, CliResult};
use crate::output::create_dir;
use crate::run::write_report;

pub fn load_trace(path: &Path) -> CliResult<ChainTrace> {
    let file = File::open(path).map_err(|e| CliError::Usage(format!("cannot open trace {}: {e}", path.display())))?;
    ChainTrace::read_csv(BufReader::new(file)).map_err(|e| CliError::Invalid(format!("{}: {e}", path.display())))
}

/// Prints the report and, with `out`, writes the same files `run` writes.
pub fn diagnose(trace_path: &Path, max_lag: usize, out: Option<&Path>) -> CliResult<DiagnosticsReport> {
    let trace = load_trace(trace_path)?;
    if trace.len() < 2 {
        return Err(CliError::Invalid(format!("{}: need at least 2 states", trace_path.display())));
    }
    let report =
        DiagnosticsReport::from_trace(&trace, max_lag).map_err(|e| CliError::runtime("computing diagnostics", e))?;
    if let Some(dir) = out {
        create_dir(dir)?;
        write_report(dir, &report)?;
    }
    Ok(report)
}
