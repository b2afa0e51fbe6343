//! Run manifest: spec hash, seeds and the task completion map of one run
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{input_err, io_err, json_err, Result};
use crate::spec::{SweepSpec, Task};
use crate::table::SCHEMA_VERSION;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub l: usize,
    pub p: f64,
    pub seed: u64,
    pub complete: bool,
    pub completed_unix: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub spec_hash: String,
    pub schema_version: u32,
    pub code_version: String,
    pub master_seed: u64,
    pub spec: SweepSpec,
    pub tasks: BTreeMap<String, TaskRecord>,
    pub created_unix: u64,
    pub updated_unix: u64,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(spec: &SweepSpec) -> Result<Self> {
        let t = now();
        Ok(RunManifest {
            spec_hash: spec.hash()?,
            schema_version: SCHEMA_VERSION,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            master_seed: spec.master_seed,
            spec: spec.clone(),
            tasks: spec
                .tasks()
                .into_iter()
                .map(|Task { id, l, p, seed }| {
                    let rec = TaskRecord {
                        l,
                        p,
                        seed,
                        complete: false,
                        completed_unix: None,
                    };
                    (id, rec)
                })
                .collect(),
            created_unix: t,
            updated_unix: t,
        })
    }

    pub fn path(run_dir: &Path) -> PathBuf {
        run_dir.join(MANIFEST_FILE)
    }

    /// Existing manifest of `run_dir`, or a fresh one. An existing manifest
    /// must belong to the same spec.
    pub fn load_or_create(run_dir: &Path, spec: &SweepSpec) -> Result<Self> {
        let path = Self::path(run_dir);
        if !path.exists() {
            return Self::new(spec);
        }
        let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
        let m: RunManifest = serde_json::from_str(&text).map_err(json_err(&path))?;
        if m.spec_hash != spec.hash()? {
            return input_err(format!("{} belongs to a different sweep spec", path.display()));
        }
        if m.schema_version != SCHEMA_VERSION {
            return input_err(format!(
                "{} was written with schema version {}, this build writes {SCHEMA_VERSION}",
                path.display(),
                m.schema_version
            ));
        }
        Ok(m)
    }

    pub fn mark_complete(&mut self, id: &str) {
        let t = now();
        if let Some(rec) = self.tasks.get_mut(id) {
            rec.complete = true;
            rec.completed_unix = Some(t);
        }
        self.updated_unix = t;
    }

    pub fn mark_incomplete(&mut self, id: &str) {
        if let Some(rec) = self.tasks.get_mut(id) {
            rec.complete = false;
            rec.completed_unix = None;
        }
    }

    pub fn is_complete(&self, id: &str) -> bool {
        self.tasks.get(id).is_some_and(|r| r.complete)
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let path = Self::path(run_dir);
        let tmp = path.with_extension("json.partial");
        let json = serde_json::to_string_pretty(self).map_err(json_err(&path))?;
        std::fs::write(&tmp, json).map_err(io_err(&tmp))?;
        std::fs::rename(&tmp, &path).map_err(io_err(&path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use bernoulli_core::Backend;

    #[test]
    fn manifest_round_trips_and_tracks_completion() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec::new(Backend::Statmech1, vec![16, 32], vec![0.5]);
        let mut m = RunManifest::load_or_create(dir.path(), &spec).unwrap();
        assert_eq!(m.tasks.len(), 2);
        assert!(!m.is_complete("L16_p0.5"));
        m.mark_complete("L16_p0.5");
        m.save(dir.path()).unwrap();
        let back = RunManifest::load_or_create(dir.path(), &spec).unwrap();
        assert!(back.is_complete("L16_p0.5") && !back.is_complete("L32_p0.5"));
        assert_eq!(back, m);
    }

    #[test]
    fn foreign_manifest_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let spec = SweepSpec::new(Backend::Statmech1, vec![16], vec![0.5]);
        RunManifest::new(&spec).unwrap().save(dir.path()).unwrap();
        let other = SweepSpec { master_seed: 9, ..spec };
        assert!(RunManifest::load_or_create(dir.path(), &other).is_err());
    }
}
