//! The `verify` subcommand: ordering checks on finite-state fixtures.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use geomc::ordering::{default_fixtures, verify_fixture, Fixture, FixtureReport};

use crate::error::{CliError, CliResult};
use crate::output::{create_dir, write_json};

#[derive(Deserialize)]
#[serde(untagged)]
enum FixtureFile {
    One(Fixture),
    Many(Vec<Fixture>),
}

/// Every `*.json` file in `dir`, in file-name order. A file holds one
/// fixture or an array of them.
pub fn load_fixtures(dir: &Path) -> CliResult<Vec<Fixture>> {
    let entries =
        fs::read_dir(dir).map_err(|e| CliError::Usage(format!("fixture directory {}: {e}", dir.display())))?;
    let mut paths: Vec<_> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    let mut out = Vec::new();
    for p in paths {
        let text = fs::read_to_string(&p).map_err(|e| CliError::io(&p, e))?;
        let parsed: FixtureFile =
            serde_json::from_str(&text).map_err(|e| CliError::Invalid(format!("{}: {e}", p.display())))?;
        match parsed {
            FixtureFile::One(f) => out.push(f),
            FixtureFile::Many(v) => out.extend(v),
        }
    }
    Ok(out)
}

/// Writes each fixture to `dir/<name>.json`.
pub fn export_fixtures(fixtures: &[Fixture], dir: &Path) -> CliResult<()> {
    create_dir(dir)?;
    for f in fixtures {
        write_json(&dir.join(format!("{}.json", f.name)), f)?;
    }
    Ok(())
}

pub fn format_report(r: &FixtureReport) -> String {
    let mut s = format!(
        "{:<28} {} states  peskun {:.4}  c_eps {:.4}  {}\n",
        r.name,
        r.states,
        r.peskun,
        r.c_epsilon,
        if r.passed() { "PASS" } else { "FAIL" }
    );
    for c in r.failures() {
        s.push_str(&format!("    {} violated: slack {:.3e}", c.name, c.slack));
        if !c.detail.is_empty() {
            s.push_str(&format!(" ({})", c.detail));
        }
        s.push('\n');
    }
    s
}

/// Runs all checks; fails with the names of violated checks when any
/// fixture fails.
pub fn verify(fixtures: &[Fixture], trials: usize, seed: u64) -> CliResult<Vec<FixtureReport>> {
    if fixtures.is_empty() {
        return Err(CliError::Usage("the fixture set is empty".into()));
    }
    if trials == 0 {
        return Err(CliError::invalid("trials", "must be at least 1"));
    }
    let mut reports = Vec::with_capacity(fixtures.len());
    for (i, fx) in fixtures.iter().enumerate() {
        let r = verify_fixture(fx, trials, seed.wrapping_add(i as u64))
            .map_err(|e| CliError::Invalid(format!("fixture {}: {e}", fx.name)))?;
        print!("{}", format_report(&r));
        reports.push(r);
    }
    let failed: Vec<String> =
        reports.iter().flat_map(|r| r.failures().map(move |c| format!("{}: {}", r.name, c.name))).collect();
    if failed.is_empty() {
        Ok(reports)
    } else {
        Err(CliError::Verification(failed.join(", ")))
    }
}

pub fn fixtures_from(dir: Option<&Path>) -> CliResult<Vec<Fixture>> {
    match dir {
        Some(d) => load_fixtures(d),
        None => Ok(default_fixtures()),
    }
}
