//! Result-file helpers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use quadfuse::biosignal::NbpRecord;
use quadfuse::training::TrainReport;
use serde::Serialize;

use crate::failure::{input, CliResult};

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> CliResult<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in rows {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

pub fn read_nbp(path: &Path) -> CliResult<Vec<NbpRecord>> {
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: NbpRecord = serde_json::from_str(line).map_err(|e| input(format!("{}:{}: {e}", path.display(), i + 1)))?;
        out.push(r);
    }
    Ok(out)
}

/// Writes the report as JSON and the per-epoch table as CSV, with checkpoint
/// paths relative to `out`.
pub fn write_train_report(out: &Path, prefix: &str, report: &mut TrainReport) -> CliResult<()> {
    for c in &mut report.checkpoints {
        if let Ok(rel) = Path::new(c.as_str()).strip_prefix(out) {
            *c = rel.display().to_string();
        }
    }
    std::fs::write(out.join(format!("{prefix}_report.json")), report.to_json())?;
    std::fs::write(out.join(format!("{prefix}_epochs.csv")), report.to_csv())?;
    Ok(())
}
