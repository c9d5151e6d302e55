//! Output files. Every file carries the config hash, seed and build id:
//! CSVs in a leading `#` line, JSON in a `provenance` field.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

pub const BUILD_ID: &str = env!("UAVTILT_BUILD_ID");

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub build: String,
}

impl Provenance {
    pub fn new(config_hash: String, seed: u64) -> Self {
        Self {
            config_hash,
            seed,
            build: BUILD_ID.to_string(),
        }
    }

    pub fn csv_header(&self) -> String {
        format!(
            "# uavtilt config_hash={} seed={} build={}\n",
            self.config_hash, self.seed, self.build
        )
    }
}

pub struct OutputDir {
    pub root: PathBuf,
    pub provenance: Provenance,
}

impl OutputDir {
    pub fn create(root: PathBuf, provenance: Provenance) -> Result<Self, CliError> {
        fs::create_dir_all(&root).map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", root.display())))?;
        Ok(Self { root, provenance })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    fn write_atomic(&self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.path(name);
        let tmp = self.path(&format!(".{name}.tmp"));
        fs::write(&tmp, bytes)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    /// A CSV produced by `body`, behind the provenance line.
    pub fn csv(&self, name: &str, body: impl FnOnce(&mut Vec<u8>) -> uavtilt::Result<()>) -> Result<(), CliError> {
        let mut buf = self.provenance.csv_header().into_bytes();
        body(&mut buf)?;
        self.write_atomic(name, &buf)
    }

    /// `value` (a JSON object) with a `provenance` field added.
    pub fn json(&self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut v = serde_json::to_value(value).map_err(|e| CliError::Runtime(e.to_string()))?;
        match &mut v {
            Value::Object(m) => {
                m.insert("provenance".into(), json!(self.provenance));
            }
            other => {
                v = json!({ "value": other.take(), "provenance": self.provenance });
            }
        }
        let mut text = serde_json::to_vec_pretty(&v).map_err(|e| CliError::Runtime(e.to_string()))?;
        text.write_all(b"\n").expect("vec write");
        self.write_atomic(name, &text)
    }
}

/// Read a JSON output file, dropping its provenance field.
pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text =
        fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut v: Value = serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if let Value::Object(m) = &mut v {
        m.remove("provenance");
    }
    Ok(v)
}
