use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use sensiloop_core::model::{load, save, TrainedModel};
use sensiloop_core::session::{FeatureConfig, Job, JobKind, Session};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use tokio::sync::{Mutex, OwnedMutexGuard};

use crate::error::ApiError;

/// What a mutating request does when another mutation is still running.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum ConflictPolicy {
    /// Answer 409.
    #[default]
    Reject,
    /// Wait for the running mutation to finish.
    Queue,
}

#[derive(Debug, Clone, Default)]
pub struct ServiceConfig {
    pub conflict: ConflictPolicy,
    /// Models and feature configs are kept here and reloaded on start.
    pub data_dir: Option<PathBuf>,
    /// Seed for sessions created without one.
    pub seed: u64,
}

pub struct Slot {
    pub session: RwLock<Session>,
    mutation: Arc<Mutex<()>>,
    pub saved_features: RwLock<Option<FeatureConfig>>,
}

impl Slot {
    fn new(session: Session) -> Self {
        Slot { session: RwLock::new(session), mutation: Arc::new(Mutex::new(())), saved_features: RwLock::new(None) }
    }

    pub fn revision(&self) -> u64 {
        self.read().revision()
    }

    pub fn read(&self) -> std::sync::RwLockReadGuard<'_, Session> {
        self.session.read().unwrap_or_else(|e| e.into_inner())
    }

    pub fn write(&self) -> std::sync::RwLockWriteGuard<'_, Session> {
        self.session.write().unwrap_or_else(|e| e.into_inner())
    }
}

pub struct JobEntry {
    pub session_id: String,
    pub job: Job,
}

struct Inner {
    config: ServiceConfig,
    sessions: RwLock<HashMap<String, Arc<Slot>>>,
    jobs: RwLock<HashMap<String, JobEntry>>,
    next_session: AtomicU64,
    next_job: AtomicU64,
}

#[derive(Clone)]
pub struct AppState(Arc<Inner>);

#[derive(Serialize, Deserialize)]
struct SessionMeta {
    seed: u64,
}

impl AppState {
    /// Builds the state, restoring persisted sessions from the data directory.
    pub fn new(config: ServiceConfig) -> std::io::Result<Self> {
        let state = AppState(Arc::new(Inner {
            config,
            sessions: RwLock::new(HashMap::new()),
            jobs: RwLock::new(HashMap::new()),
            next_session: AtomicU64::new(1),
            next_job: AtomicU64::new(1),
        }));
        if let Some(dir) = state.0.config.data_dir.clone() {
            state.restore(&dir.join("sessions"))?;
        }
        Ok(state)
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.0.config
    }

    fn restore(&self, root: &Path) -> std::io::Result<()> {
        if !root.is_dir() {
            return Ok(());
        }
        let mut max_id = 0;
        let mut dirs: Vec<PathBuf> = fs::read_dir(root)?.filter_map(|e| e.ok().map(|e| e.path())).collect();
        dirs.sort();
        for dir in dirs {
            let Some(id) = dir.file_name().and_then(|n| n.to_str()).map(str::to_string) else { continue };
            let Ok(meta) = fs::read_to_string(dir.join("session.json")) else { continue };
            let meta: SessionMeta = serde_json::from_str(&meta).map_err(std::io::Error::other)?;
            let mut session = Session::new(id.clone(), meta.seed);
            let mut files: Vec<PathBuf> = fs::read_dir(dir.join("models"))
                .map(|rd| rd.filter_map(|e| e.ok().map(|e| e.path())).collect())
                .unwrap_or_default();
            files.sort();
            for f in files {
                let model = load(&f).map_err(std::io::Error::other)?;
                session.add_model(model);
            }
            let slot = Slot::new(session);
            if let Ok(text) = fs::read_to_string(dir.join("features.json")) {
                *slot.saved_features.write().unwrap_or_else(|e| e.into_inner()) = serde_json::from_str(&text).ok();
            }
            if let Some(n) = id.strip_prefix('s').and_then(|n| n.parse::<u64>().ok()) {
                max_id = max_id.max(n);
            }
            self.0.sessions.write().unwrap_or_else(|e| e.into_inner()).insert(id, Arc::new(slot));
        }
        self.0.next_session.store(max_id + 1, Ordering::SeqCst);
        Ok(())
    }

    fn session_dir(&self, id: &str) -> Option<PathBuf> {
        self.0.config.data_dir.as_ref().map(|d| d.join("sessions").join(id))
    }

    pub fn create_session(&self, seed: Option<u64>) -> Result<(String, Arc<Slot>), ApiError> {
        let n = self.0.next_session.fetch_add(1, Ordering::SeqCst);
        let id = format!("s{n}");
        let seed = seed.unwrap_or(self.0.config.seed);
        if let Some(dir) = self.session_dir(&id) {
            fs::create_dir_all(&dir).map_err(io_error)?;
            let meta = serde_json::to_string(&SessionMeta { seed }).expect("meta serializes");
            fs::write(dir.join("session.json"), meta).map_err(io_error)?;
        }
        let slot = Arc::new(Slot::new(Session::new(id.clone(), seed)));
        self.0.sessions.write().unwrap_or_else(|e| e.into_inner()).insert(id.clone(), slot.clone());
        Ok((id, slot))
    }

    pub fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.0
            .sessions
            .read()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found(format!("session `{id}`")))
    }

    /// Takes the session's mutation token according to the conflict policy.
    pub async fn begin_mutation(&self, slot: &Slot) -> Result<OwnedMutexGuard<()>, ApiError> {
        match self.0.config.conflict {
            ConflictPolicy::Reject => {
                slot.mutation.clone().try_lock_owned().map_err(|_| ApiError::conflict().at(slot.revision()))
            }
            ConflictPolicy::Queue => Ok(slot.mutation.clone().lock_owned().await),
        }
    }

    pub fn persist_model(&self, session_id: &str, model_id: &str, model: &TrainedModel) -> Result<(), ApiError> {
        if let Some(dir) = self.session_dir(session_id) {
            let dir = dir.join("models");
            fs::create_dir_all(&dir).map_err(io_error)?;
            save(model, dir.join(format!("{model_id}.model")))?;
        }
        Ok(())
    }

    pub fn persist_features(&self, session_id: &str, config: &FeatureConfig) -> Result<(), ApiError> {
        if let Some(dir) = self.session_dir(session_id) {
            fs::create_dir_all(&dir).map_err(io_error)?;
            let text = serde_json::to_string_pretty(config).expect("config serializes");
            fs::write(dir.join("features.json"), text).map_err(io_error)?;
        }
        Ok(())
    }

    pub fn new_job(&self, session_id: &str, kind: JobKind) -> String {
        let id = format!("job{}", self.0.next_job.fetch_add(1, Ordering::SeqCst));
        self.0
            .jobs
            .write()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), JobEntry { session_id: session_id.to_string(), job: Job::new(id.clone(), kind) });
        id
    }

    pub fn job(&self, id: &str) -> Result<(String, Job), ApiError> {
        let jobs = self.0.jobs.read().unwrap_or_else(|e| e.into_inner());
        let e = jobs.get(id).ok_or_else(|| ApiError::not_found(format!("job `{id}`")))?;
        Ok((e.session_id.clone(), e.job.clone()))
    }

    pub fn update_job(&self, id: &str, f: impl FnOnce(&mut Job) -> sensiloop_core::Result<()>) {
        let mut jobs = self.0.jobs.write().unwrap_or_else(|e| e.into_inner());
        if let Some(e) = jobs.get_mut(id) {
            // a refused transition means the job already ended; keep it as is
            let _ = f(&mut e.job);
        }
    }

    pub fn finish_job(&self, id: &str, outcome: Result<Value, String>) {
        self.update_job(id, |j| match outcome {
            Ok(v) => j.finish(v),
            Err(msg) => j.fail(msg),
        });
    }
}

fn io_error(e: std::io::Error) -> ApiError {
    ApiError::from(sensiloop_core::Error::from(e))
}
