//! Resumable evaluations.
//!
//! Optimizer runs are deterministic for a given configuration, so a run is
//! resumed by replaying it: every finished evaluation is appended to a JSON
//! lines file, and on restart evaluations whose decision matches a recorded
//! one bit for bit return the recorded value instead of simulating again.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::CliError;

const FORMAT: &str = "uavtilt-checkpoint-1";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format: String,
    pub config_hash: String,
    /// Which problem of the experiment the evaluations belong to.
    pub problem: String,
}

#[derive(Serialize, Deserialize)]
struct Entry {
    x: Vec<f64>,
    y: Vec<f64>,
}

fn key(x: &[f64]) -> Vec<u64> {
    x.iter().map(|v| v.to_bits()).collect()
}

pub struct EvalLog {
    path: PathBuf,
    known: HashMap<Vec<u64>, Vec<f64>>,
    file: Mutex<File>,
    replayed: AtomicUsize,
}

impl EvalLog {
    /// Open `path`, creating it when absent. An existing file written for a
    /// different configuration or problem is refused.
    pub fn open(path: &Path, config_hash: &str, problem: &str) -> Result<Self, CliError> {
        let header = CheckpointHeader {
            format: FORMAT.into(),
            config_hash: config_hash.into(),
            problem: problem.into(),
        };
        let io = |e: std::io::Error| CliError::Runtime(format!("checkpoint {}: {e}", path.display()));
        let mut known = HashMap::new();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(io)?);
            let mut lines = reader.lines();
            let first = lines.next().transpose().map_err(io)?.unwrap_or_default();
            let found: CheckpointHeader = serde_json::from_str(&first).map_err(|e| {
                CliError::Checkpoint(format!(
                    "{} has an unreadable header ({e}); remove it to start over",
                    path.display()
                ))
            })?;
            if found != header {
                return Err(CliError::Checkpoint(mismatch(path, &found, &header)));
            }
            let rest: Vec<String> = lines.collect::<Result<_, _>>().map_err(io)?;
            let n = rest.len();
            for (i, line) in rest.iter().enumerate() {
                match serde_json::from_str::<Entry>(line) {
                    Ok(e) => {
                        known.insert(key(&e.x), e.y);
                    }
                    // a run killed mid-write leaves a partial last line
                    Err(_) if i + 1 == n => {}
                    Err(e) => {
                        return Err(CliError::Checkpoint(format!("{} line {}: {e}", path.display(), i + 2)));
                    }
                }
            }
            // rewrite so that a dropped partial line cannot glue onto the next entry
            let mut text = serde_json::to_string(&header).expect("header") + "\n";
            for line in rest.iter().filter(|l| serde_json::from_str::<Entry>(l).is_ok()) {
                text.push_str(line);
                text.push('\n');
            }
            std::fs::write(path, text).map_err(io)?;
        } else {
            let mut f = File::create(path).map_err(io)?;
            writeln!(f, "{}", serde_json::to_string(&header).expect("header")).map_err(io)?;
        }
        let file = OpenOptions::new().append(true).open(path).map_err(io)?;
        Ok(Self {
            path: path.to_path_buf(),
            known,
            file: Mutex::new(file),
            replayed: AtomicUsize::new(0),
        })
    }

    pub fn n_recorded(&self) -> usize {
        self.known.len()
    }

    pub fn n_replayed(&self) -> usize {
        self.replayed.load(Ordering::Relaxed)
    }

    /// Recorded outputs for `x`, or `compute(x)` appended to the log.
    pub fn get_or_eval(
        &self,
        x: &[f64],
        compute: impl FnOnce() -> uavtilt::Result<Vec<f64>>,
    ) -> uavtilt::Result<Vec<f64>> {
        if let Some(y) = self.known.get(&key(x)) {
            self.replayed.fetch_add(1, Ordering::Relaxed);
            return Ok(y.clone());
        }
        let y = compute()?;
        let line = serde_json::to_string(&Entry {
            x: x.to_vec(),
            y: y.clone(),
        })?;
        let mut f = self.file.lock().expect("checkpoint lock");
        writeln!(f, "{line}").and_then(|_| f.flush()).map_err(|e| {
            uavtilt::Error::Io(std::io::Error::new(
                e.kind(),
                format!("cannot append to {}: {e}", self.path.display()),
            ))
        })?;
        Ok(y)
    }
}

fn mismatch(path: &Path, found: &CheckpointHeader, want: &CheckpointHeader) -> String {
    let mut diffs = Vec::new();
    if found.format != want.format {
        diffs.push(format!("format {} (expected {})", found.format, want.format));
    }
    if found.config_hash != want.config_hash {
        diffs.push(format!(
            "config hash {} (this run {})",
            found.config_hash, want.config_hash
        ));
    }
    if found.problem != want.problem {
        diffs.push(format!("problem `{}` (this run `{}`)", found.problem, want.problem));
    }
    format!(
        "refusing to resume from {}: it was written with {}; use another --out directory or delete the checkpoint",
        path.display(),
        diffs.join(", ")
    )
}
