//! Writes a run's artifacts to a directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::energy::write_trace_csv;
use crate::physics::write_trajectory_csv;
use crate::runner::RunOutput;
use crate::simnet::write_jsonl;

pub const EVENTS_FILE: &str = "events.jsonl";
pub const REPORT_FILE: &str = "report.json";
pub const TRACE_FILE: &str = "trace.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";

#[derive(Debug, Error)]
#[error("cannot write {path}: {reason}")]
pub struct OutputError {
    pub path: PathBuf,
    pub reason: String,
}

fn create(path: &Path) -> Result<BufWriter<File>, OutputError> {
    File::create(path).map(BufWriter::new).map_err(|e| OutputError { path: path.to_path_buf(), reason: e.to_string() })
}

fn fail(path: &Path) -> impl Fn(String) -> OutputError + '_ {
    move |reason| OutputError { path: path.to_path_buf(), reason }
}

/// Writes `events.jsonl`, `report.json`, `trace.csv` and, when physics ran,
/// `trajectory.csv`. Returns the paths written.
pub fn emit_outputs(out: &RunOutput, dir: &Path) -> Result<Vec<PathBuf>, OutputError> {
    std::fs::create_dir_all(dir).map_err(|e| fail(dir)(e.to_string()))?;
    let mut written = Vec::new();

    let p = dir.join(EVENTS_FILE);
    let mut w = create(&p)?;
    write_jsonl(&out.events, &mut w).and_then(|_| w.flush()).map_err(|e| fail(&p)(e.to_string()))?;
    written.push(p);

    let p = dir.join(REPORT_FILE);
    let mut w = create(&p)?;
    serde_json::to_writer_pretty(&mut w, &out.report).map_err(|e| fail(&p)(e.to_string()))?;
    w.write_all(b"\n").and_then(|_| w.flush()).map_err(|e| fail(&p)(e.to_string()))?;
    written.push(p);

    let p = dir.join(TRACE_FILE);
    write_trace_csv(&out.master_trace, create(&p)?).map_err(|e| fail(&p)(e.to_string()))?;
    written.push(p);

    if let Some(traj) = &out.trajectory {
        let p = dir.join(TRAJECTORY_FILE);
        write_trajectory_csv(traj, create(&p)?).map_err(|e| fail(&p)(e.to_string()))?;
        written.push(p);
    }
    Ok(written)
}
