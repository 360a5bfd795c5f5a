//! Append-only journal of round events with periodic snapshots.
//!
//! Each line of `round-<r>-journal.jsonl` is one event tagged with a sequence
//! number. A snapshot stores the state after some sequence number; replay
//! loads it and applies the later events. Every append is synced before the
//! in-memory state changes.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::Utc;
use serde::{Deserialize, Serialize};

use super::assign::AnnotationTask;
use super::round::{Event, RoundState};
use super::AnnotationError;
use crate::curation::{Label, LabeledPair};

pub const DEFAULT_SNAPSHOT_EVERY: u64 = 200;

#[derive(Serialize, Deserialize)]
struct Line {
    seq: u64,
    #[serde(flatten)]
    event: Event,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    seq: u64,
    state: RoundState,
}

#[derive(Debug, Clone, Serialize)]
pub struct LabelAck {
    pub seq: u64,
    pub pair_id: String,
    pub annotator_id: String,
    pub label: Label,
    pub previous: Option<Label>,
    pub labeled: usize,
    pub assigned: usize,
}

pub fn journal_path(dir: &Path, round: u32) -> PathBuf {
    dir.join(format!("round-{round}-journal.jsonl"))
}

pub fn snapshot_path(dir: &Path, round: u32) -> PathBuf {
    dir.join(format!("round-{round}-snapshot.json"))
}

pub struct RoundStore {
    dir: PathBuf,
    state: RoundState,
    journal: File,
    seq: u64,
    since_snapshot: u64,
    snapshot_every: u64,
}

impl RoundStore {
    /// Starts a new round. Fails if a journal for it already exists.
    pub fn create(dir: &Path, round: u32, tasks: Vec<AnnotationTask>) -> Result<Self, AnnotationError> {
        fs::create_dir_all(dir)?;
        let path = journal_path(dir, round);
        let journal = OpenOptions::new().create_new(true).append(true).open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::AlreadyExists {
                AnnotationError::Config(format!("round {round} already has a journal at {}", path.display()))
            } else {
                e.into()
            }
        })?;
        let mut store = Self {
            dir: dir.to_path_buf(),
            state: RoundState::new(round, Vec::new()),
            journal,
            seq: 0,
            since_snapshot: 0,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        };
        store.append(Event::Opened { round, tasks })?;
        Ok(store)
    }

    /// Rebuilds a round from its snapshot and journal. A torn final line
    /// left by a crash is cut off.
    pub fn open(dir: &Path, round: u32) -> Result<Self, AnnotationError> {
        let path = journal_path(dir, round);
        let jerr = |message: String| AnnotationError::Journal {
            path: path.display().to_string(),
            message,
        };
        let (mut state, mut seq) = match fs::read(snapshot_path(dir, round)) {
            Ok(bytes) => {
                let mut snap: Snapshot = serde_json::from_slice(&bytes)?;
                snap.state.reindex();
                (Some(snap.state), snap.seq)
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => (None, 0),
            Err(e) => return Err(e.into()),
        };
        let file = File::open(&path).map_err(|e| {
            if e.kind() == std::io::ErrorKind::NotFound {
                AnnotationError::NotFound(format!("round {round}"))
            } else {
                e.into()
            }
        })?;
        let mut reader = BufReader::new(file);
        let mut good_bytes = 0u64;
        let mut buf = String::new();
        let mut since = 0;
        loop {
            buf.clear();
            let n = reader.read_line(&mut buf)?;
            if n == 0 {
                break;
            }
            if !buf.ends_with('\n') {
                log::warn!("{}: dropping torn final line", path.display());
                break;
            }
            let line: Line = serde_json::from_str(buf.trim_end()).map_err(|e| jerr(format!("at byte {good_bytes}: {e}")))?;
            good_bytes += n as u64;
            if line.seq <= seq && state.is_some() {
                continue;
            }
            if line.seq != seq + 1 {
                return Err(jerr(format!("sequence gap: expected {}, found {}", seq + 1, line.seq)));
            }
            let st = state.get_or_insert_with(|| RoundState::new(round, Vec::new()));
            st.apply(&line.event);
            seq = line.seq;
            since += 1;
        }
        let state = state.ok_or_else(|| jerr("empty journal".into()))?;
        if state.round != round {
            return Err(jerr(format!("journal holds round {}", state.round)));
        }
        let journal = OpenOptions::new().write(true).open(&path)?;
        journal.set_len(good_bytes)?;
        let journal = OpenOptions::new().append(true).open(&path)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            state,
            journal,
            seq,
            since_snapshot: since,
            snapshot_every: DEFAULT_SNAPSHOT_EVERY,
        })
    }

    pub fn with_snapshot_every(mut self, n: u64) -> Self {
        self.snapshot_every = n.max(1);
        self
    }

    pub fn state(&self) -> &RoundState {
        &self.state
    }

    pub fn round(&self) -> u32 {
        self.state.round
    }

    pub fn seq(&self) -> u64 {
        self.seq
    }

    fn append(&mut self, event: Event) -> Result<Option<Label>, AnnotationError> {
        let line = Line { seq: self.seq + 1, event };
        let mut bytes = serde_json::to_vec(&line)?;
        bytes.push(b'\n');
        self.journal.write_all(&bytes)?;
        self.journal.sync_data()?;
        self.seq += 1;
        let prev = self.state.apply(&line.event);
        self.since_snapshot += 1;
        if self.since_snapshot >= self.snapshot_every {
            self.snapshot()?;
        }
        Ok(prev)
    }

    /// Writes the current state atomically via rename.
    pub fn snapshot(&mut self) -> Result<(), AnnotationError> {
        let path = snapshot_path(&self.dir, self.state.round);
        let tmp = path.with_extension("json.tmp");
        {
            let mut f = File::create(&tmp)?;
            serde_json::to_writer(
                &mut f,
                &Snapshot {
                    seq: self.seq,
                    state: self.state.clone(),
                },
            )?;
            f.sync_all()?;
        }
        fs::rename(&tmp, &path)?;
        self.since_snapshot = 0;
        Ok(())
    }

    pub fn record_label(&mut self, pair_id: &str, annotator_id: &str, label: u8) -> Result<LabelAck, AnnotationError> {
        let event = self.state.label_event(pair_id, annotator_id, label, Utc::now())?;
        let previous = self.append(event)?;
        let p = self.state.progress();
        let mine = &p.annotators[annotator_id];
        Ok(LabelAck {
            seq: self.seq,
            pair_id: pair_id.to_string(),
            annotator_id: annotator_id.to_string(),
            label: Label::try_from(label).expect("validated"),
            previous,
            labeled: mine.labeled,
            assigned: mine.assigned,
        })
    }

    pub fn adjudicate(&mut self, pair_id: &str, label: u8, note: Option<String>) -> Result<(), AnnotationError> {
        let event = self.state.adjudication_event(pair_id, label, note, Utc::now())?;
        self.append(event)?;
        Ok(())
    }

    /// Closes the round and returns its final labels.
    pub fn close(&mut self) -> Result<Vec<LabeledPair>, AnnotationError> {
        let event = self.state.close_event(Utc::now())?;
        let labels = self.state.final_labels()?;
        self.append(event)?;
        self.snapshot()?;
        Ok(labels)
    }
}
