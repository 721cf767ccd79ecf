//! On-disk session store: one directory per session under
//! `<data_dir>/sessions/`, plus `index.json` listing every id.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::data::{read_csv_path, DomainPair, LabelSpace};
use crate::engine::{SessionInput, SessionState, Step, TestEvidence, TestRequest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Source,
    Target,
}

impl Role {
    pub fn file_name(self) -> &'static str {
        match self {
            Role::Source => "source.csv",
            Role::Target => "target.csv",
        }
    }
}

impl std::str::FromStr for Role {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "source" => Ok(Role::Source),
            "target" => Ok(Role::Target),
            other => Err(Error::InvalidArgument(format!("role must be source or target, got `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredDataset {
    pub file: String,
    pub rows: usize,
    pub columns: usize,
    pub labeled: bool,
    pub bytes: usize,
    pub uploaded_at: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Datasets {
    pub source: Option<StoredDataset>,
    pub target: Option<StoredDataset>,
}

impl Datasets {
    pub fn get(&self, role: Role) -> Option<&StoredDataset> {
        match role {
            Role::Source => self.source.as_ref(),
            Role::Target => self.target.as_ref(),
        }
    }

    pub fn set(&mut self, role: Role, d: StoredDataset) {
        match role {
            Role::Source => self.source = Some(d),
            Role::Target => self.target = Some(d),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobStatus {
    Running,
    Done,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub id: String,
    pub request: TestRequest,
    pub status: JobStatus,
    pub result: Option<TestEvidence>,
    pub error: Option<String>,
    pub created_at: u64,
    pub finished_at: Option<u64>,
}

/// Everything persisted for one session. `inputs` lists every applied
/// engine input in order, so replaying them reproduces `state`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionRecord {
    pub state: SessionState,
    /// SHA-256 of the bearer token that created the session.
    pub owner: String,
    pub inputs: Vec<SessionInput>,
    pub datasets: Datasets,
    pub jobs: Vec<Job>,
    pub created_at: u64,
    pub updated_at: u64,
}

/// One live session. `writer` serializes state transitions; `record` is the
/// last committed version and is what readers see.
pub struct Slot {
    pub dir: PathBuf,
    pub writer: tokio::sync::Mutex<()>,
    pub record: RwLock<SessionRecord>,
    pub pair: RwLock<Option<Arc<DomainPair>>>,
    persist: Mutex<()>,
}

impl Slot {
    pub fn snapshot(&self) -> SessionRecord {
        self.record.read().expect("record lock").clone()
    }

    pub fn pair(&self) -> Option<Arc<DomainPair>> {
        self.pair.read().expect("pair lock").clone()
    }

    /// Applies `f` to the committed record and writes it to disk.
    pub fn commit(&self, f: impl FnOnce(&mut SessionRecord)) -> Result<SessionRecord> {
        let _guard = self.persist.lock().expect("persist lock");
        let rec = {
            let mut rec = self.record.write().expect("record lock");
            f(&mut rec);
            rec.clone()
        };
        write_json(&self.dir.join("session.json"), &rec)?;
        Ok(rec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct IndexEntry {
    created_at: u64,
    updated_at: u64,
    step: Step,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct Index {
    sessions: BTreeMap<String, IndexEntry>,
}

pub struct Store {
    root: PathBuf,
    slots: RwLock<HashMap<String, Arc<Slot>>>,
    index: Mutex<Index>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, serde_json::to_vec_pretty(value)?)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn pair_from_files(dir: &Path, source: &StoredDataset, target: &StoredDataset) -> Result<DomainPair> {
    let s = read_csv_path(&dir.join(&source.file))?;
    let t = read_csv_path(&dir.join(&target.file))?;
    let space = LabelSpace::infer(&[&s, &t])?;
    DomainPair::new(s, t, space)
}

impl Store {
    /// Opens or creates the store under `data_dir`. Jobs left running by a
    /// previous process are marked failed.
    pub fn open(data_dir: &Path) -> Result<Self> {
        let root = data_dir.join("sessions");
        std::fs::create_dir_all(&root)?;
        let index_path = root.join("index.json");
        let index: Index = if index_path.exists() {
            serde_json::from_slice(&std::fs::read(&index_path)?)?
        } else {
            Index::default()
        };
        let mut slots = HashMap::new();
        for id in index.sessions.keys() {
            let dir = root.join(id);
            let mut rec: SessionRecord = serde_json::from_slice(&std::fs::read(dir.join("session.json"))?)?;
            for job in rec.jobs.iter_mut().filter(|j| j.status == JobStatus::Running) {
                job.status = JobStatus::Failed;
                job.error = Some("interrupted by service restart".into());
            }
            let pair = match (&rec.datasets.source, &rec.datasets.target) {
                (Some(s), Some(t)) => Some(Arc::new(pair_from_files(&dir, s, t)?)),
                _ => None,
            };
            slots.insert(
                id.clone(),
                Arc::new(Slot {
                    dir,
                    writer: tokio::sync::Mutex::new(()),
                    record: RwLock::new(rec),
                    pair: RwLock::new(pair),
                    persist: Mutex::new(()),
                }),
            );
        }
        log::info!("session store at {} holds {} sessions", root.display(), slots.len());
        Ok(Self {
            root,
            slots: RwLock::new(slots),
            index: Mutex::new(index),
        })
    }

    pub fn get(&self, id: &str) -> Option<Arc<Slot>> {
        self.slots.read().expect("slots lock").get(id).cloned()
    }

    pub fn insert(&self, rec: SessionRecord) -> Result<Arc<Slot>> {
        let id = rec.state.id.clone();
        let dir = self.root.join(&id);
        std::fs::create_dir_all(&dir)?;
        write_json(&dir.join("session.json"), &rec)?;
        let slot = Arc::new(Slot {
            dir,
            writer: tokio::sync::Mutex::new(()),
            record: RwLock::new(rec.clone()),
            pair: RwLock::new(None),
            persist: Mutex::new(()),
        });
        self.slots.write().expect("slots lock").insert(id, slot.clone());
        self.touch(&rec)?;
        Ok(slot)
    }

    /// Refreshes the index entry of `rec`.
    pub fn touch(&self, rec: &SessionRecord) -> Result<()> {
        let mut index = self.index.lock().expect("index lock");
        index.sessions.insert(
            rec.state.id.clone(),
            IndexEntry {
                created_at: rec.created_at,
                updated_at: rec.updated_at,
                step: rec.state.step,
            },
        );
        write_json(&self.root.join("index.json"), &*index)
    }
}
