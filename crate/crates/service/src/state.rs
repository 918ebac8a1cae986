use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use parking_lot::RwLock;
use stsem_core::graph_model::load_corpus;
use stsem_core::learner::DEFAULT_LEVELS;
use stsem_core::semantics::Ranking;
use stsem_core::session::Session;
use stsem_core::Corpus;

use crate::error::ApiError;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub default_levels: usize,
    pub default_beam_width: usize,
    /// Snapshots are written here after every accepted mutation.
    pub session_dir: Option<PathBuf>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            default_levels: DEFAULT_LEVELS,
            default_beam_width: 0,
            session_dir: None,
        }
    }
}

/// A session state together with the ranking computed for it.
#[derive(Debug)]
pub struct Committed {
    pub session: Session,
    pub ranking: Option<Ranking>,
}

/// Mutations hold `writer` for their whole duration; readers only clone the
/// `current` pointer, so a long ranking never blocks them.
pub struct SessionSlot {
    pub corpus: Arc<Corpus>,
    pub writer: tokio::sync::Mutex<()>,
    current: RwLock<Arc<Committed>>,
}

impl SessionSlot {
    pub fn new(corpus: Arc<Corpus>, committed: Committed) -> Self {
        Self {
            corpus,
            writer: tokio::sync::Mutex::new(()),
            current: RwLock::new(Arc::new(committed)),
        }
    }

    pub fn current(&self) -> Arc<Committed> {
        self.current.read().clone()
    }

    pub fn publish(&self, committed: Committed) {
        *self.current.write() = Arc::new(committed);
    }
}

pub struct AppState {
    pub config: ServiceConfig,
    corpora: RwLock<HashMap<String, Arc<Corpus>>>,
    sessions: RwLock<HashMap<String, Arc<SessionSlot>>>,
}

impl AppState {
    pub fn new(config: ServiceConfig) -> Self {
        Self {
            config,
            corpora: RwLock::new(HashMap::new()),
            sessions: RwLock::new(HashMap::new()),
        }
    }

    /// Registers a corpus under its content id; re-adding is a no-op.
    pub fn add_corpus(&self, corpus: Corpus) -> (String, Arc<Corpus>) {
        let id = corpus.content_id();
        let mut corpora = self.corpora.write();
        let entry = corpora.entry(id.clone()).or_insert_with(|| Arc::new(corpus));
        (id, entry.clone())
    }

    pub fn corpus(&self, id: &str) -> Result<Arc<Corpus>, ApiError> {
        self.corpora
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("corpus_not_found", format!("corpus `{id}` is not loaded")))
    }

    pub fn insert_session(&self, id: String, slot: SessionSlot) -> Arc<SessionSlot> {
        let slot = Arc::new(slot);
        self.sessions.write().insert(id, slot.clone());
        slot
    }

    pub fn session(&self, id: &str) -> Result<Arc<SessionSlot>, ApiError> {
        self.sessions
            .read()
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("session_not_found", format!("session `{id}` does not exist")))
    }

    pub fn persist(&self, id: &str, session: &Session) -> Result<(), ApiError> {
        let Some(dir) = &self.config.session_dir else {
            return Ok(());
        };
        write_atomically(&dir.join(format!("{id}.json")), &session.to_snapshot_bytes())
            .map_err(|e| ApiError::internal(format!("could not persist session: {e}")))
    }

    /// Loads every `*.json` corpus file in `dir`, in name order.
    pub fn load_corpus_dir(&self, dir: &Path) -> anyhow::Result<Vec<String>> {
        let mut ids = Vec::new();
        for path in json_files(dir)? {
            let bytes = fs::read(&path)?;
            let corpus = load_corpus(&bytes).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            ids.push(self.add_corpus(corpus).0);
        }
        Ok(ids)
    }

    /// Re-opens persisted sessions whose corpus is loaded. Returns the ids
    /// restored and a message per skipped file.
    pub fn restore_sessions(&self, dir: &Path) -> anyhow::Result<(Vec<String>, Vec<String>)> {
        let mut restored = Vec::new();
        let mut skipped = Vec::new();
        for path in json_files(dir)? {
            let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
                continue;
            };
            let outcome = fs::read(&path)
                .map_err(|e| e.to_string())
                .and_then(|bytes| Session::from_snapshot_bytes(&bytes).map_err(|e| e.to_string()))
                .and_then(|session| {
                    let corpus = self.corpus(&session.corpus_id).map_err(|e| e.message)?;
                    session.check_corpus(&corpus).map_err(|e| e.to_string())?;
                    let ranking = session.rank(&corpus, None).map_err(|e| e.to_string())?;
                    Ok((corpus, Committed { session, ranking }))
                });
            match outcome {
                Ok((corpus, committed)) => {
                    self.insert_session(id.clone(), SessionSlot::new(corpus, committed));
                    restored.push(id);
                }
                Err(e) => skipped.push(format!("{}: {e}", path.display())),
            }
        }
        Ok((restored, skipped))
    }
}

fn json_files(dir: &Path) -> std::io::Result<Vec<PathBuf>> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    paths.sort();
    Ok(paths)
}

fn write_atomically(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)
}
