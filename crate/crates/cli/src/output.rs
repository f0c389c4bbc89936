//! Error reporting and output provenance.
//!
//! Every CSV written starts with a `# config_hash=<hex>` comment line and
//! every JSON object carries a `config_hash` key. The hash is SHA-256 over
//! the canonical JSON of the tool version, subcommand and computation
//! settings; output paths are excluded so relocating outputs keeps it.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rankval_core::model::Dataset;
use rankval_core::prior_fit::DataFingerprint;
use rankval_core::{Error, ErrorClass};
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_DATA: u8 = 3;
pub const EXIT_NUMERIC: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub message: String,
    pub exit: u8,
}

impl CliError {
    pub fn usage(code: &str, message: impl Into<String>) -> Self {
        Self {
            code: code.into(),
            message: message.into(),
            exit: EXIT_USAGE,
        }
    }

    pub fn to_json(&self) -> String {
        json!({
            "error": {
                "code": self.code,
                "message": self.message,
                "exit_code": self.exit,
            }
        })
        .to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let exit = match e.class() {
            ErrorClass::Usage => EXIT_USAGE,
            ErrorClass::Data => EXIT_DATA,
            ErrorClass::Numeric => EXIT_NUMERIC,
        };
        Self {
            code: e.code().into(),
            message: e.to_string(),
            exit,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e).into()
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e).into()
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e).into()
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub fn check_input(path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::usage(
            "InputNotFound",
            format!("input file '{}' does not exist", path.display()),
        ))
    }
}

pub fn check_output(path: &Path) -> CliResult<()> {
    let parent = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    if !parent.is_dir() {
        return Err(CliError::usage(
            "OutputDirMissing",
            format!("directory '{}' for output '{}' does not exist", parent.display(), path.display()),
        ));
    }
    if path.is_dir() {
        return Err(CliError::usage(
            "OutputIsDirectory",
            format!("output '{}' is a directory", path.display()),
        ));
    }
    Ok(())
}

/// `table.csv` -> `table.<suffix>`.
pub fn sibling(path: &Path, suffix: &str) -> PathBuf {
    path.with_extension(suffix)
}

#[derive(Serialize)]
struct InputRecord {
    path: String,
    unit_count: usize,
    data_hash: String,
}

/// Collects what a run read and wrote, and writes the manifest.
pub struct Provenance {
    subcommand: &'static str,
    config: Value,
    hash: String,
    seed: Option<u64>,
    inputs: Vec<InputRecord>,
    outputs: Vec<String>,
    started: Instant,
    mark: Instant,
    timings: BTreeMap<String, f64>,
}

impl Provenance {
    pub fn new<T: Serialize>(subcommand: &'static str, settings: &T) -> CliResult<Self> {
        let config = json!({
            "tool": "rankval",
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": rankval_core::VERSION,
            "subcommand": subcommand,
            "settings": serde_json::to_value(settings)?,
        });
        let hash = hex(&Sha256::digest(serde_json::to_vec(&config)?));
        let now = Instant::now();
        Ok(Self {
            subcommand,
            config,
            hash,
            seed: None,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: now,
            mark: now,
            timings: BTreeMap::new(),
        })
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Record the time since the previous phase ended.
    pub fn phase(&mut self, name: &str) {
        let now = Instant::now();
        *self.timings.entry(name.into()).or_insert(0.0) += (now - self.mark).as_secs_f64();
        self.mark = now;
    }

    pub fn input(&mut self, path: &Path, ds: &Dataset) {
        let fp = DataFingerprint::of(ds);
        self.inputs.push(InputRecord {
            path: path.display().to_string(),
            unit_count: fp.unit_count,
            data_hash: fp.data_hash,
        });
    }

    pub fn write_csv<F>(&mut self, path: &Path, body: F) -> CliResult<()>
    where
        F: FnOnce(&mut Vec<u8>) -> CliResult<()>,
    {
        let mut buf = format!("# config_hash={}\n", self.hash).into_bytes();
        body(&mut buf)?;
        fs::write(path, buf)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    pub fn write_json(&mut self, path: &Path, value: Value) -> CliResult<()> {
        let mut value = value;
        if let Value::Object(map) = &mut value {
            map.insert("config_hash".into(), Value::String(self.hash.clone()));
        }
        let mut text = serde_json::to_string_pretty(&value)?;
        text.push('\n');
        fs::write(path, text)?;
        self.outputs.push(path.display().to_string());
        Ok(())
    }

    /// Write the manifest. `created_unix` and `timings_s` are the only
    /// fields that change between identical runs.
    pub fn finish(self, path: &Path) -> CliResult<()> {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let mut timings = self.timings;
        timings.insert("total".into(), self.started.elapsed().as_secs_f64());
        let manifest = json!({
            "tool": "rankval",
            "version": env!("CARGO_PKG_VERSION"),
            "core_version": rankval_core::VERSION,
            "subcommand": self.subcommand,
            "config_hash": self.hash,
            "config": self.config,
            "seed": self.seed,
            "threads": rayon::current_num_threads(),
            "inputs": self.inputs,
            "outputs": self.outputs,
            "created_unix": created,
            "timings_s": timings,
        });
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
