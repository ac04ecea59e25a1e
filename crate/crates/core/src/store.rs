//! Append-only JSONL event log per session, one file per session id.
//!
//! A session is rebuilt by re-submitting every logged rating to a fresh
//! [`Session`]; logged designs must match the recomputed ones exactly.

use std::fs::{self, File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acquisition::AcquisitionDiagnostics;
use crate::design::DesignParams;
use crate::objectives::QuestionnaireResponse;
use crate::session::{IssuedDesign, Phase, Session, SessionConfig, SessionError, Step};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session {0} not found")]
    NotFound(String),
    #[error("session {0} already exists")]
    AlreadyExists(String),
    #[error("invalid session id {0:?}")]
    InvalidId(String),
    #[error("{path}:{line}: {message}")]
    Corrupt { path: PathBuf, line: usize, message: String },
    #[error("replay diverged at iteration {iteration}")]
    ReplayMismatch { iteration: usize },
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    SessionStarted {
        session_id: String,
        config: SessionConfig,
    },
    DesignIssued {
        iteration: usize,
        phase: Phase,
        design: DesignParams,
        diagnostics: Option<AcquisitionDiagnostics>,
    },
    RatingReceived {
        iteration: usize,
        response: QuestionnaireResponse,
    },
    SessionFinished {
        stopped_early: bool,
    },
}

impl Event {
    fn issued(d: &IssuedDesign) -> Self {
        Event::DesignIssued {
            iteration: d.iteration,
            phase: d.phase,
            design: d.design,
            diagnostics: d.diagnostics.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogLine {
    /// ISO-8601 UTC.
    pub ts: String,
    #[serde(flatten)]
    pub event: Event,
}

/// Session ids become file names, so they are restricted to
/// `[A-Za-z0-9_-]{1,64}`.
pub fn is_valid_id(id: &str) -> bool {
    (1..=64).contains(&id.len()) && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_' || b == b'-')
}

#[derive(Debug, Clone)]
pub struct SessionStore {
    root: PathBuf,
}

impl SessionStore {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root)?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, id: &str) -> PathBuf {
        self.root.join(format!("{id}.jsonl"))
    }

    pub fn exists(&self, id: &str) -> bool {
        is_valid_id(id) && self.path_of(id).is_file()
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let mut ids: Vec<String> = fs::read_dir(&self.root)?
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let name = e.file_name().into_string().ok()?;
                name.strip_suffix(".jsonl").filter(|s| is_valid_id(s)).map(str::to_owned)
            })
            .collect();
        ids.sort();
        Ok(ids)
    }

    /// Starts a session and writes its first two events.
    pub fn create(&self, id: &str, config: SessionConfig) -> Result<Session, StoreError> {
        if !is_valid_id(id) {
            return Err(StoreError::InvalidId(id.to_string()));
        }
        let session = Session::start(id, config.clone())?;
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(self.path_of(id))
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => StoreError::AlreadyExists(id.to_string()),
                _ => e.into(),
            })?;
        let first = session.pending().expect("fresh session has a design");
        write_events(
            &mut file,
            &[
                Event::SessionStarted { session_id: id.to_string(), config },
                Event::issued(first),
            ],
        )?;
        Ok(session)
    }

    /// Applies a rating and logs it with its consequence. The log is only
    /// written once the session accepted the rating.
    pub fn submit(&self, session: &mut Session, response: QuestionnaireResponse) -> Result<Step, StoreError> {
        let iteration = session.iteration() + 1;
        let step = session.submit_rating(response.clone())?;
        let follow = match &step {
            Step::NextDesign(d) => Event::issued(d),
            Step::Finished { stopped_early } => Event::SessionFinished { stopped_early: *stopped_early },
        };
        let mut file = OpenOptions::new().append(true).open(self.path_of(session.id()))?;
        write_events(&mut file, &[Event::RatingReceived { iteration, response }, follow])?;
        Ok(step)
    }

    pub fn read_events(&self, id: &str) -> Result<Vec<LogLine>, StoreError> {
        if !self.exists(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let path = self.path_of(id);
        let reader = BufReader::new(File::open(&path)?);
        let mut out = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let parsed = serde_json::from_str(&line).map_err(|e| StoreError::Corrupt {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?;
            out.push(parsed);
        }
        Ok(out)
    }

    /// Rebuilds a session from its log. A log cut off between a rating and
    /// its follow-up event is completed in place.
    pub fn load(&self, id: &str) -> Result<Session, StoreError> {
        let events = self.read_events(id)?;
        let path = self.path_of(id);
        let corrupt = |line: usize, message: &str| StoreError::Corrupt {
            path: path.clone(),
            line,
            message: message.to_string(),
        };
        let mut iter = events.into_iter().enumerate();
        let mut session = match iter.next() {
            Some((_, LogLine { event: Event::SessionStarted { session_id, config }, .. })) if session_id == id => {
                Session::start(session_id, config)?
            }
            _ => return Err(corrupt(1, "log must open with session_started for this id")),
        };

        // `awaiting` is the follow-up event still owed after the last rating.
        let mut awaiting: Option<Step> = None;
        let mut issued_first = false;
        for (i, line) in iter {
            match line.event {
                Event::SessionStarted { .. } => return Err(corrupt(i + 1, "duplicate session_started")),
                Event::DesignIssued { iteration, design, .. } => {
                    let expected = match awaiting.take() {
                        Some(Step::NextDesign(d)) => d,
                        None if !issued_first => session.pending().cloned().ok_or_else(|| corrupt(i + 1, "no design pending"))?,
                        _ => return Err(corrupt(i + 1, "unexpected design_issued")),
                    };
                    issued_first = true;
                    if expected.iteration != iteration || expected.design != design {
                        return Err(StoreError::ReplayMismatch { iteration });
                    }
                }
                Event::RatingReceived { iteration, response } => {
                    if awaiting.is_some() || iteration != session.iteration() + 1 {
                        return Err(corrupt(i + 1, "rating out of sequence"));
                    }
                    awaiting = Some(session.submit_rating(response)?);
                }
                Event::SessionFinished { stopped_early } => match awaiting.take() {
                    Some(Step::Finished { stopped_early: s }) if s == stopped_early => {}
                    _ => return Err(corrupt(i + 1, "unexpected session_finished")),
                },
            }
        }

        let owed = match awaiting {
            Some(Step::NextDesign(d)) => Some(Event::issued(&d)),
            Some(Step::Finished { stopped_early }) => Some(Event::SessionFinished { stopped_early }),
            None if !issued_first => session.pending().map(Event::issued),
            None => None,
        };
        if let Some(ev) = owed {
            let mut file = OpenOptions::new().append(true).open(&path)?;
            write_events(&mut file, &[ev])?;
        }
        Ok(session)
    }
}

fn write_events(file: &mut File, events: &[Event]) -> Result<(), StoreError> {
    let ts = Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true);
    let mut buf = String::new();
    for event in events {
        let line = LogLine { ts: ts.clone(), event: event.clone() };
        buf.push_str(&serde_json::to_string(&line).expect("events serialize"));
        buf.push('\n');
    }
    file.write_all(buf.as_bytes())?;
    file.sync_data()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acquisition::AcquisitionConfig;
    use crate::surrogate::FitOptions;
    use crate::synthetic::SyntheticRater;

    fn config() -> SessionConfig {
        SessionConfig {
            acquisition: AcquisitionConfig { n_candidates: 48, n_mc_samples: 16, ..Default::default() },
            fit: FitOptions { restarts: 2, max_iters: 30, ..Default::default() },
            total_iterations: 8,
            ..Default::default()
        }
    }

    fn drive(store: &SessionStore, s: &mut Session, ratings: usize) {
        let rater = SyntheticRater { noise_sd: 0.15, ..SyntheticRater::new([0.7; 9], 11) };
        for _ in 0..ratings {
            let Some(p) = s.pending().cloned() else { break };
            let r = rater.rate(&p.design, p.iteration as u64, &s.config().scales);
            store.submit(s, r).unwrap();
        }
    }

    #[test]
    fn replay_reproduces_session() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut s = store.create("s1", config()).unwrap();
        drive(&store, &mut s, 6);
        let loaded = store.load("s1").unwrap();
        assert_eq!(loaded, s);
        assert_eq!(loaded.export_jsonl(), s.export_jsonl());
        assert_eq!(store.ids().unwrap(), vec!["s1".to_string()]);
    }

    #[test]
    fn events_carry_timestamps() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        store.create("t", config()).unwrap();
        let ev = store.read_events("t").unwrap();
        assert_eq!(ev.len(), 2);
        assert!(chrono::DateTime::parse_from_rfc3339(&ev[0].ts).is_ok());
        let text = fs::read_to_string(store.path_of("t")).unwrap();
        assert!(text.starts_with("{\"ts\":"));
        assert!(text.contains("\"event\":\"session_started\""));
    }

    #[test]
    fn truncated_log_is_completed() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut s = store.create("cut", config()).unwrap();
        drive(&store, &mut s, 6);
        let path = store.path_of("cut");
        let text = fs::read_to_string(&path).unwrap();
        let kept: Vec<&str> = text.lines().collect();
        fs::write(&path, kept[..kept.len() - 1].join("\n") + "\n").unwrap();

        let loaded = store.load("cut").unwrap();
        assert_eq!(loaded, s);
        assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), kept.len());
    }

    #[test]
    fn tampered_design_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        let mut s = store.create("bad", config()).unwrap();
        drive(&store, &mut s, 2);
        let path = store.path_of("bad");
        let text = fs::read_to_string(&path).unwrap();
        let mut lines: Vec<String> = text.lines().map(str::to_owned).collect();
        let mut ev: LogLine = serde_json::from_str(&lines[1]).unwrap();
        if let Event::DesignIssued { design, .. } = &mut ev.event {
            *design = DesignParams::splat(0.123).unwrap();
        }
        lines[1] = serde_json::to_string(&ev).unwrap();
        fs::write(&path, lines.join("\n")).unwrap();
        assert!(matches!(store.load("bad"), Err(StoreError::ReplayMismatch { iteration: 1 })));
    }

    #[test]
    fn ids_are_checked() {
        let dir = tempfile::tempdir().unwrap();
        let store = SessionStore::open(dir.path()).unwrap();
        assert!(matches!(store.create("../x", config()), Err(StoreError::InvalidId(_))));
        store.create("dup", config()).unwrap();
        assert!(matches!(store.create("dup", config()), Err(StoreError::AlreadyExists(_))));
        assert!(matches!(store.load("nope"), Err(StoreError::NotFound(_))));
    }
}
