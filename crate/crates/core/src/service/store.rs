//! JSON-lines session logs: a header line, then one event per line.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{replay_whatifs, Event, Session};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::model::Model;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub(super) struct Header {
    pub id: String,
    pub created_at: String,
    pub model: Value,
    pub dataset: Option<String>,
    pub point: Value,
}

#[derive(Debug)]
pub(super) struct SessionLog {
    file: File,
}

fn write_line(file: &mut File, value: &impl Serialize) -> Result<()> {
    let mut line = serde_json::to_vec(value).map_err(|e| Error::Io(e.into()))?;
    line.push(b'\n');
    file.write_all(&line)?;
    file.sync_data()?;
    Ok(())
}

impl SessionLog {
    pub fn create(dir: &Path, id: &str, header: &Header) -> Result<Self> {
        let mut file = OpenOptions::new()
            .create_new(true)
            .append(true)
            .open(dir.join(format!("{id}.jsonl")))?;
        write_line(&mut file, header)?;
        Ok(SessionLog { file })
    }

    pub fn append(&mut self, event: &Event) -> Result<()> {
        write_line(&mut self.file, event)
    }
}

/// Reloads every `*.jsonl` session in `dir`. Unreadable files are skipped
/// with a warning; a torn final line is dropped.
pub(super) fn load_all(dir: &Path) -> Result<Vec<Session>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
        .collect();
    paths.sort();
    let mut sessions = Vec::new();
    for path in paths {
        match load(&path) {
            Ok(s) => sessions.push(s),
            Err(e) => log::warn!("skipping session log {}: {e}", path.display()),
        }
    }
    Ok(sessions)
}

fn load(path: &Path) -> Result<Session> {
    let text = std::fs::read_to_string(path)?;
    let at = |line: usize| format!("{} line {line}", path.display());
    let mut lines = text.split_inclusive('\n');
    let header_line = lines.next().ok_or_else(|| Error::parse(at(1), "empty session log"))?;
    let header: Header = serde_json::from_str(header_line).map_err(|e| Error::parse(at(1), e.to_string()))?;
    let model = Model::from_json(&header.model)?;
    let dataset = header
        .dataset
        .as_ref()
        .map(|csv| Dataset::from_csv(model.schema().clone(), csv.as_bytes()))
        .transpose()?;
    let initial = model.schema().point_from_json(&header.point)?;
    let mut history: Vec<Event> = Vec::new();
    let mut good_len = header_line.len();
    for (i, line) in lines.enumerate() {
        let parsed = if line.ends_with('\n') {
            serde_json::from_str::<Event>(line).map_err(|e| e.to_string())
        } else {
            Err("incomplete line".to_string())
        };
        match parsed {
            Ok(e) if e.seq == history.len() as u64 + 1 => {
                history.push(e);
                good_len += line.len();
            }
            Ok(e) => return Err(Error::parse(at(i + 2), format!("event seq {} out of order", e.seq))),
            Err(e) => {
                log::warn!("{}: dropping torn tail: {e}", at(i + 2));
                break;
            }
        }
    }
    let file = OpenOptions::new().append(true).open(path)?;
    if good_len < text.len() {
        file.set_len(good_len as u64)?;
    }
    let current = replay_whatifs(&model, &initial, &history)?;
    Ok(Session {
        id: header.id,
        updated_at: history
            .last()
            .map(|e| e.timestamp.clone())
            .unwrap_or_else(|| header.created_at.clone()),
        created_at: header.created_at,
        model: Arc::new(model),
        dataset: dataset.map(Arc::new),
        initial_point: initial,
        current_point: current,
        history,
        log: Some(SessionLog { file }),
    })
}
