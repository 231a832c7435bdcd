//! File-backed project store: one canonical JSON document per project under
//! a data directory, written atomically.

use std::collections::{BTreeMap, HashMap};
use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ProjectId, RevisionEntry, ScriptProject, Stage, StageState};
use crate::pipeline::blocking_violations;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StorageError {
    #[error("i/o error on {path}: {message}")]
    Io { path: String, message: String },
    #[error("corrupt project file {path}: {message}")]
    Corrupt { path: String, message: String },
}

impl StorageError {
    fn io(path: &Path, err: std::io::Error) -> Self {
        StorageError::Io {
            path: path.display().to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub id: ProjectId,
    pub title: String,
    pub revision: u64,
    pub stages: BTreeMap<Stage, StageState>,
}

pub const DATA_DIR_ENV: &str = "COOPERA_DATA_DIR";

#[derive(Debug)]
pub struct Store {
    data_dir: PathBuf,
    locks: Mutex<HashMap<String, Arc<Mutex<()>>>>,
    fail_before_rename: AtomicBool,
}

impl Store {
    /// Open a store, creating the directory if needed.
    pub fn open(data_dir: impl Into<PathBuf>) -> Result<Self> {
        let data_dir = data_dir.into();
        fs::create_dir_all(&data_dir).map_err(|e| StorageError::io(&data_dir, e))?;
        Ok(Store {
            data_dir,
            locks: Mutex::new(HashMap::new()),
            fail_before_rename: AtomicBool::new(false),
        })
    }

    /// `COOPERA_DATA_DIR`, or `./data`.
    pub fn from_env() -> Result<Self> {
        Self::open(std::env::var(DATA_DIR_ENV).unwrap_or_else(|_| "data".to_string()))
    }

    pub fn data_dir(&self) -> &Path {
        &self.data_dir
    }

    fn path_for(&self, id: &ProjectId) -> Result<PathBuf> {
        if !id.is_well_formed() {
            return Err(Error::InvalidRequest(format!("malformed project id {id:?}")));
        }
        Ok(self.data_dir.join(format!("{}.json", id.as_str())))
    }

    fn lock_for(&self, id: &ProjectId) -> Arc<Mutex<()>> {
        let mut locks = self.locks.lock().unwrap_or_else(|e| e.into_inner());
        locks.entry(id.0.clone()).or_default().clone()
    }

    /// Make the next save fail after the temporary file is written but
    /// before it replaces the real one.
    #[doc(hidden)]
    pub fn inject_failure_before_rename(&self) {
        self.fail_before_rename.store(true, Ordering::SeqCst);
    }

    /// Validate, then write to a temporary file, sync it and rename it over
    /// the previous version.
    pub fn save(&self, project: &ScriptProject) -> Result<()> {
        let path = self.path_for(&project.id)?;
        let report = blocking_violations(project);
        if !report.is_empty() {
            return Err(Error::Validation(report));
        }
        let lock = self.lock_for(&project.id);
        let _guard = lock.lock().unwrap_or_else(|e| e.into_inner());
        let tmp = self.data_dir.join(format!(".{}.json.tmp", project.id.as_str()));
        let write = || -> std::io::Result<()> {
            let mut file = File::create(&tmp)?;
            file.write_all(project.to_canonical_json().as_bytes())?;
            file.sync_all()
        };
        write().map_err(|e| StorageError::io(&tmp, e))?;
        if self.fail_before_rename.swap(false, Ordering::SeqCst) {
            let _ = fs::remove_file(&tmp);
            return Err(StorageError::Io {
                path: path.display().to_string(),
                message: "simulated crash before rename".into(),
            }
            .into());
        }
        fs::rename(&tmp, &path).map_err(|e| StorageError::io(&path, e))?;
        if let Ok(dir) = File::open(&self.data_dir) {
            let _ = dir.sync_all();
        }
        Ok(())
    }

    pub fn load(&self, id: &ProjectId) -> Result<ScriptProject> {
        let path = self.path_for(id)?;
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                return Err(Error::NotFound(format!("project {id}")))
            }
            Err(e) => return Err(StorageError::io(&path, e).into()),
        };
        ScriptProject::from_json(&text).map_err(|e| {
            StorageError::Corrupt {
                path: path.display().to_string(),
                message: e.to_string(),
            }
            .into()
        })
    }

    pub fn exists(&self, id: &ProjectId) -> bool {
        self.path_for(id).map(|p| p.exists()).unwrap_or(false)
    }

    /// Summaries of every stored project, ordered by id.
    pub fn list(&self) -> Result<Vec<ProjectSummary>> {
        let entries = fs::read_dir(&self.data_dir).map_err(|e| StorageError::io(&self.data_dir, e))?;
        let mut out = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| StorageError::io(&self.data_dir, e))?;
            let name = entry.file_name();
            let Some(name) = name.to_str() else { continue };
            let Some(stem) = name.strip_suffix(".json") else { continue };
            if stem.starts_with('.') {
                continue;
            }
            let project = self.load(&ProjectId(stem.to_string()))?;
            out.push(ProjectSummary {
                stages: Stage::ALL.iter().map(|s| (*s, project.state(*s))).collect(),
                id: project.id,
                title: project.title,
                revision: project.revision,
            });
        }
        out.sort_by(|a, b| a.id.0.cmp(&b.id.0));
        Ok(out)
    }

    /// Revision entries in revision order, optionally for one stage only.
    pub fn history(&self, id: &ProjectId, stage: Option<Stage>) -> Result<Vec<RevisionEntry>> {
        let project = self.load(id)?;
        let mut entries: Vec<RevisionEntry> = project
            .revision_log
            .into_iter()
            .filter(|e| stage.is_none_or(|s| e.stage == s))
            .collect();
        entries.sort_by_key(|e| e.revision);
        Ok(entries)
    }
}
