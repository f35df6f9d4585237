//! Autobiographical memory: one record per behavior or plan, bounded by
//! snapshots and carrying a sampled world stream.
//!
//! On disk each session is an append-only JSONL file next to an
//! `index.json` listing every session in the directory.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ActivityOutcome, Goal, Initiator};
use crate::adaptive::{Entity, EntityId};
use crate::log::{DriveLevel, LogRecord};
use crate::reactive::BehaviorKind;
use crate::world::{ObjectId, Region};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub time_s: f64,
    pub opc: Vec<Entity>,
    pub drives: Vec<DriveLevel>,
    pub goal: Option<Goal>,
}

impl Snapshot {
    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.opc.iter().find(|e| e.id == id)
    }

    pub fn label_of(&self, id: &str) -> Option<&str> {
        self.entity(id).and_then(|e| e.label.as_deref())
    }

    pub fn region_of(&self, id: &str) -> Option<Region> {
        self.entity(id).and_then(|e| e.region())
    }

    /// Equal knowledge and drive state, ignoring the time stamp.
    pub fn same_state(&self, other: &Snapshot) -> bool {
        let strip = |s: &Snapshot| -> Vec<Entity> {
            s.opc
                .iter()
                .cloned()
                .map(|mut e| {
                    e.saliency = 0.0;
                    e
                })
                .collect()
        };
        strip(self) == strip(other) && self.drives == other.drives
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectSample {
    pub id: ObjectId,
    pub region: Region,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSample {
    pub tick: u64,
    pub time_s: f64,
    pub objects: Vec<ObjectSample>,
    pub human_present: bool,
    pub robot_primitive: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub id: u64,
    pub session: String,
    pub activity: u64,
    pub start_tick: u64,
    pub end_tick: u64,
    pub start_s: f64,
    pub end_s: f64,
    pub behavior: BehaviorKind,
    pub goal: Option<Goal>,
    pub target: Option<EntityId>,
    pub initiator: Initiator,
    pub outcome: ActivityOutcome,
    pub pre: Snapshot,
    pub post: Snapshot,
    pub stream: Vec<StreamSample>,
    pub events: Vec<LogRecord>,
}

impl EpisodeRecord {
    pub fn involves(&self, entity: &str) -> bool {
        self.target.as_deref() == Some(entity)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AbmQuery {
    /// Episodes overlapping `[from, to]` seconds.
    pub time: Option<(f64, f64)>,
    pub initiator: Option<Initiator>,
    pub human_order: Option<bool>,
    pub outcome: Option<ActivityOutcome>,
    pub entity: Option<EntityId>,
    pub session: Option<String>,
}

impl AbmQuery {
    pub fn matches(&self, e: &EpisodeRecord) -> bool {
        if let Some((from, to)) = self.time {
            if e.end_s < from || e.start_s > to {
                return false;
            }
        }
        if self.initiator.is_some_and(|i| i != e.initiator) {
            return false;
        }
        if let Some(h) = self.human_order {
            if (e.initiator == Initiator::HumanOrder) != h {
                return false;
            }
        }
        if self.outcome.is_some_and(|o| o != e.outcome) {
            return false;
        }
        if let Some(id) = &self.entity {
            if !e.involves(id) {
                return false;
            }
        }
        if let Some(s) = &self.session {
            if *s != e.session {
                return false;
            }
        }
        true
    }
}

#[derive(Debug, thiserror::Error)]
pub enum AbmError {
    #[error("{path}: line {line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("episode {id} ends before it starts")]
    Bounds { id: u64 },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> AbmError + '_ {
    move |source| AbmError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SessionEntry {
    pub session: String,
    pub file: String,
    pub episodes: u64,
    pub first_tick: Option<u64>,
    pub last_tick: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AbmIndex {
    pub sessions: Vec<SessionEntry>,
}

pub const INDEX_FILE: &str = "index.json";

/// Single-writer store. Episodes from earlier sessions in the same
/// directory are loaded on open and are queryable alongside new ones.
#[derive(Debug)]
pub struct Abm {
    session: String,
    episodes: Vec<EpisodeRecord>,
    dir: Option<PathBuf>,
    index: AbmIndex,
}

impl Abm {
    pub fn in_memory(session: impl Into<String>) -> Self {
        Self {
            session: session.into(),
            episodes: Vec::new(),
            dir: None,
            index: AbmIndex::default(),
        }
    }

    pub fn open(dir: impl AsRef<Path>, session: impl Into<String>) -> Result<Self, AbmError> {
        let dir = dir.as_ref().to_path_buf();
        fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let session = session.into();
        let mut index = read_index(&dir)?;
        let episodes = load_dir_with(&dir, &index)?;
        if !index.sessions.iter().any(|s| s.session == session) {
            index.sessions.push(SessionEntry {
                session: session.clone(),
                file: format!("{session}.jsonl"),
                ..Default::default()
            });
        }
        let abm = Self {
            session,
            episodes,
            dir: Some(dir),
            index,
        };
        abm.write_index()?;
        Ok(abm)
    }

    pub fn session(&self) -> &str {
        &self.session
    }

    pub fn next_id(&self) -> u64 {
        self.episodes.iter().map(|e| e.id + 1).max().unwrap_or(0)
    }

    pub fn record(&mut self, mut episode: EpisodeRecord) -> Result<u64, AbmError> {
        if episode.end_tick < episode.start_tick {
            return Err(AbmError::Bounds { id: episode.id });
        }
        episode.session = self.session.clone();
        if let Some(dir) = &self.dir {
            let entry = self
                .index
                .sessions
                .iter_mut()
                .find(|s| s.session == self.session)
                .expect("own session is indexed");
            let path = dir.join(&entry.file);
            let mut f = OpenOptions::new()
                .create(true)
                .append(true)
                .open(&path)
                .map_err(io_err(&path))?;
            let line = serde_json::to_string(&episode).expect("episodes serialize");
            writeln!(f, "{line}").map_err(io_err(&path))?;
            entry.episodes += 1;
            entry.first_tick.get_or_insert(episode.start_tick);
            entry.last_tick = Some(episode.end_tick);
            self.write_index()?;
        }
        let id = episode.id;
        self.episodes.push(episode);
        Ok(id)
    }

    fn write_index(&self) -> Result<(), AbmError> {
        let Some(dir) = &self.dir else { return Ok(()) };
        let path = dir.join(INDEX_FILE);
        let text = serde_json::to_string_pretty(&self.index).expect("index serializes");
        fs::write(&path, text).map_err(io_err(&path))
    }

    pub fn episodes(&self) -> &[EpisodeRecord] {
        &self.episodes
    }

    pub fn current_session(&self) -> impl Iterator<Item = &EpisodeRecord> {
        self.episodes.iter().filter(move |e| e.session == self.session)
    }

    pub fn query(&self, q: &AbmQuery) -> Vec<&EpisodeRecord> {
        self.episodes.iter().filter(|e| q.matches(e)).collect()
    }

    pub fn get(&self, id: u64) -> Option<&EpisodeRecord> {
        self.episodes.iter().find(|e| e.id == id)
    }
}

fn read_index(dir: &Path) -> Result<AbmIndex, AbmError> {
    let path = dir.join(INDEX_FILE);
    match fs::read_to_string(&path) {
        Ok(text) => serde_json::from_str(&text).map_err(|e| AbmError::Parse {
            path: path.display().to_string(),
            line: e.line(),
            message: e.to_string(),
        }),
        Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(AbmIndex::default()),
        Err(e) => Err(io_err(&path)(e)),
    }
}

fn load_dir_with(dir: &Path, index: &AbmIndex) -> Result<Vec<EpisodeRecord>, AbmError> {
    let mut out = Vec::new();
    for s in &index.sessions {
        let path = dir.join(&s.file);
        let f = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => continue,
            Err(e) => return Err(io_err(&path)(e)),
        };
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            let ep: EpisodeRecord = serde_json::from_str(&line).map_err(|e| AbmError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(ep);
        }
    }
    Ok(out)
}

/// Read every episode in a directory without taking the writer role.
pub fn load_dir(dir: impl AsRef<Path>) -> Result<Vec<EpisodeRecord>, AbmError> {
    let dir = dir.as_ref();
    load_dir_with(dir, &read_index(dir)?)
}
