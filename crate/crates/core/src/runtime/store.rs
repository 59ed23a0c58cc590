//! On-disk run store: one directory per run, every file hashed in a
//! manifest so tampering is detected on load.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::report::RunReport;
use crate::decide::DecisionRecord;
use crate::error::{Error, Result};
use crate::jsonl;
use crate::llm::PromptRecord;

pub const CONFIG_SNAPSHOT: &str = "config.snapshot.json";
pub const RECORDS: &str = "records.jsonl";
pub const EXCLUDED: &str = "excluded.jsonl";
pub const CLASSIFIED: &str = "classified.jsonl";
pub const REDACTED: &str = "redacted.jsonl";
pub const ASSESSMENTS: &str = "assessments.jsonl";
pub const SHORTLIST: &str = "shortlist.jsonl";
pub const DECISIONS: &str = "decisions.jsonl";
pub const TRANSCRIPT: &str = "transcript.jsonl";
pub const PROMPTS: &str = "prompts.jsonl";
pub const REPORT: &str = "report.json";
pub const MANIFEST: &str = "manifest.json";
const LOCK: &str = ".lock";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

/// Writer for a run directory that is still being produced.
#[derive(Debug)]
pub struct RunHandle {
    pub run_id: String,
    pub dir: PathBuf,
    manifest: Manifest,
}

impl RunHandle {
    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.manifest
            .files
            .insert(name.to_string(), sha256_hex(bytes));
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&mut self, name: &str, items: &[T]) -> Result<()> {
        let text = jsonl::to_string(items)?;
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Writes the manifest; the run becomes loadable afterwards.
    pub fn finalize(&mut self) -> Result<()> {
        let bytes = serde_json::to_vec_pretty(&self.manifest)?;
        write_atomic(&self.dir.join(MANIFEST), &bytes)
    }
}

#[derive(Debug, Clone)]
pub struct RunStore {
    root: PathBuf,
}

fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

impl RunStore {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_dir(&self, run_id: &str) -> Result<PathBuf> {
        if !valid_run_id(run_id) {
            return Err(Error::NotFound(format!("run `{run_id}`")));
        }
        Ok(self.root.join(run_id))
    }

    /// Reserves a fresh run directory named `<timestamp>-<config hash>` and
    /// writes the config snapshot into it.
    pub fn create_run(&self, cfg: &RunConfig) -> Result<RunHandle> {
        fs::create_dir_all(&self.root).map_err(|e| Error::io(&self.root, e))?;
        let base = format!(
            "{}-{}",
            Utc::now().format("%Y%m%dT%H%M%S%.3fZ"),
            cfg.short_hash()
        );
        let mut suffix = 1;
        let (run_id, dir) = loop {
            let id = if suffix == 1 {
                base.clone()
            } else {
                format!("{base}-{suffix}")
            };
            let dir = self.root.join(&id);
            match fs::create_dir(&dir) {
                Ok(()) => break (id, dir),
                Err(e) if e.kind() == ErrorKind::AlreadyExists => suffix += 1,
                Err(e) => return Err(Error::io(&dir, e)),
            }
        };
        let mut handle = RunHandle {
            run_id,
            dir,
            manifest: Manifest::default(),
        };
        handle.write_json(CONFIG_SNAPSHOT, cfg)?;
        Ok(handle)
    }

    /// Run ids with a manifest, oldest first.
    pub fn list_runs(&self) -> Result<Vec<String>> {
        let entries = match fs::read_dir(&self.root) {
            Ok(e) => e,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(Error::io(&self.root, e)),
        };
        let mut ids: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter(|e| e.path().join(MANIFEST).is_file())
            .filter_map(|e| e.file_name().to_str().map(str::to_string))
            .filter(|id| valid_run_id(id))
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Checks every file listed in the manifest against its hash.
    pub fn verify(&self, run_id: &str) -> Result<Manifest> {
        let dir = self.run_dir(run_id)?;
        if !dir.is_dir() {
            return Err(Error::NotFound(format!("run `{run_id}`")));
        }
        let manifest_path = dir.join(MANIFEST);
        let manifest: Manifest = match fs::read(&manifest_path) {
            Ok(bytes) => serde_json::from_slice(&bytes).map_err(|e| {
                Error::integrity(
                    format!("unreadable manifest: {e}"),
                    vec![manifest_path.clone()],
                )
            })?,
            Err(_) => return Err(Error::integrity("manifest missing", vec![manifest_path])),
        };
        let mut missing = Vec::new();
        let mut tampered = Vec::new();
        for (name, hash) in &manifest.files {
            let path = dir.join(name);
            match fs::read(&path) {
                Ok(bytes) if sha256_hex(&bytes) == *hash => {}
                Ok(_) => tampered.push(path),
                Err(_) => missing.push(path),
            }
        }
        if !manifest.files.contains_key(REPORT) {
            missing.push(dir.join(REPORT));
        }
        if missing.is_empty() && tampered.is_empty() {
            return Ok(manifest);
        }
        let message = format!(
            "run `{run_id}`: {} missing, {} modified",
            missing.len(),
            tampered.len()
        );
        missing.extend(tampered);
        Err(Error::integrity(message, missing))
    }

    pub fn load_run(&self, run_id: &str) -> Result<RunReport> {
        self.verify(run_id)?;
        let path = self.run_dir(run_id)?.join(REPORT);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, run_id: &str, name: &str) -> Result<Vec<T>> {
        self.verify(run_id)?;
        jsonl::read(&self.run_dir(run_id)?.join(name))
    }

    fn lock(&self, run_id: &str) -> Result<File> {
        let path = self.run_dir(run_id)?.join(LOCK);
        let file = OpenOptions::new()
            .create(true)
            .truncate(false)
            .write(true)
            .open(&path)
            .map_err(|e| Error::io(&path, e))?;
        file.lock().map_err(|e| Error::io(&path, e))?;
        Ok(file)
    }

    /// Adds a decision to a finished run. A decision with the same mode and
    /// criteria as an existing one is a conflict unless `force` is set.
    pub fn append_decision(
        &self,
        run_id: &str,
        record: DecisionRecord,
        prompts: &[PromptRecord],
        force: bool,
    ) -> Result<RunReport> {
        let _guard = self.lock(run_id)?;
        let mut manifest = self.verify(run_id)?;
        let mut report = self.load_run(run_id)?;
        if !force
            && report
                .decisions
                .iter()
                .any(|d| d.mode == record.mode && d.criteria == record.criteria)
        {
            return Err(Error::Conflict(format!(
                "run `{run_id}` already has a {:?} decision for these criteria",
                record.mode
            )));
        }
        report.decisions.push(record);
        let dir = self.run_dir(run_id)?;
        let mut handle = RunHandle {
            run_id: run_id.to_string(),
            dir: dir.clone(),
            manifest: std::mem::take(&mut manifest),
        };
        handle.write_jsonl(DECISIONS, &report.decisions)?;
        if !prompts.is_empty() {
            let mut all: Vec<PromptRecord> = jsonl::read(&dir.join(PROMPTS))?;
            all.extend_from_slice(prompts);
            handle.write_jsonl(PROMPTS, &all)?;
        }
        handle.write_json(REPORT, &report)?;
        handle.finalize()?;
        Ok(report)
    }
}
