//! CSV and JSON emission.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde_json::json;

use crate::config::{ExperimentConfig, OutputFormat};
use crate::harness::{AggregateRecord, BoundTable};
use crate::HarnessError;

pub const CSV_HEADER: &str = "n,mean_gap,std_gap,min_gap,max_gap,bound";

pub fn to_csv(record: &AggregateRecord) -> String {
    let mut s = String::from(CSV_HEADER);
    s.push('\n');
    for r in &record.rows {
        let bound = r.bound.map(|b| format!("{b:e}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{:e},{:e},{:e},{:e},{}",
            r.n, r.mean_gap, r.std_gap, r.min_gap, r.max_gap, bound
        );
    }
    s
}

/// Run record with the configuration echo and the library version.
pub fn to_json(record: &AggregateRecord, cfg: &ExperimentConfig) -> String {
    let v = json!({
        "version": subcorr::VERSION,
        "config": cfg,
        "record": record,
        "passed": record.passed(),
    });
    serde_json::to_string_pretty(&v).expect("records serialize") + "\n"
}

pub fn bounds_csv(table: &BoundTable) -> String {
    let mut s = String::from("n,bound\n");
    for (n, b) in table.values.iter().enumerate() {
        let _ = writeln!(s, "{n},{b:e}");
    }
    s
}

fn write(dir: &Path, file: &str, contents: &str) -> Result<PathBuf, HarnessError> {
    std::fs::create_dir_all(dir)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(file);
    std::fs::write(&path, contents)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    Ok(path)
}

/// Writes `<name>.csv` and/or `<name>.json` into `dir` and returns the paths.
pub fn emit(
    record: &AggregateRecord,
    cfg: &ExperimentConfig,
    format: OutputFormat,
    dir: &Path,
) -> Result<Vec<PathBuf>, HarnessError> {
    let mut out = Vec::new();
    if matches!(format, OutputFormat::Csv | OutputFormat::Both) {
        out.push(write(dir, &format!("{}.csv", cfg.name), &to_csv(record))?);
    }
    if matches!(format, OutputFormat::Json | OutputFormat::Both) {
        out.push(write(
            dir,
            &format!("{}.json", cfg.name),
            &to_json(record, cfg),
        )?);
    }
    Ok(out)
}

pub fn emit_bounds(
    table: &BoundTable,
    cfg: &ExperimentConfig,
    dir: &Path,
) -> Result<PathBuf, HarnessError> {
    write(dir, &format!("{}_bounds.csv", cfg.name), &bounds_csv(table))
}
