//! Append-only JSONL event log, one file per session.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use super::{EventRecord, ServiceError};

#[derive(Debug, Clone)]
pub struct EventStore {
    dir: PathBuf,
}

fn io_err(path: &Path, e: io::Error) -> ServiceError {
    ServiceError::Storage(format!("{}: {e}", path.display()))
}

impl EventStore {
    /// Opens (creating if needed) a log directory. Any file whose last
    /// line lacks its newline was cut off mid-append and is truncated back
    /// to the last complete record.
    pub fn open(dir: impl Into<PathBuf>) -> Result<EventStore, ServiceError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| io_err(&dir, e))?;
        let store = EventStore { dir };
        for path in store.log_files()? {
            repair_tail(&path).map_err(|e| io_err(&path, e))?;
        }
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path_for(&self, session_id: &str) -> PathBuf {
        self.dir.join(format!("{session_id}.jsonl"))
    }

    fn log_files(&self) -> Result<Vec<PathBuf>, ServiceError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.dir).map_err(|e| io_err(&self.dir, e))? {
            let path = entry.map_err(|e| io_err(&self.dir, e))?.path();
            if path.extension().is_some_and(|x| x == "jsonl") {
                out.push(path);
            }
        }
        out.sort();
        Ok(out)
    }

    /// Writes the record as one line with a single `write` and syncs it.
    pub fn append(&self, record: &EventRecord) -> Result<(), ServiceError> {
        let path = self.path_for(&record.session_id);
        let mut line = serde_json::to_string(record).map_err(|e| ServiceError::Storage(e.to_string()))?;
        line.push('\n');
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(|e| io_err(&path, e))?;
        f.write_all(line.as_bytes()).map_err(|e| io_err(&path, e))?;
        f.sync_data().map_err(|e| io_err(&path, e))
    }

    /// Raw JSONL text of one session's log, empty if it has none.
    pub fn read_raw(&self, session_id: &str) -> Result<String, ServiceError> {
        let path = self.path_for(session_id);
        match fs::read_to_string(&path) {
            Ok(s) => Ok(s),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(String::new()),
            Err(e) => Err(io_err(&path, e)),
        }
    }

    pub fn read(&self, session_id: &str) -> Result<Vec<EventRecord>, ServiceError> {
        parse_jsonl(&self.read_raw(session_id)?)
    }

    /// Session ids with a log, sorted.
    pub fn session_ids(&self) -> Result<Vec<String>, ServiceError> {
        Ok(self
            .log_files()?
            .iter()
            .filter_map(|p| p.file_stem().and_then(|s| s.to_str()).map(str::to_string))
            .collect())
    }
}

fn repair_tail(path: &Path) -> io::Result<()> {
    let mut f = OpenOptions::new().read(true).write(true).open(path)?;
    let mut buf = Vec::new();
    f.read_to_end(&mut buf)?;
    if buf.is_empty() || buf.ends_with(b"\n") {
        return Ok(());
    }
    let keep = buf.iter().rposition(|&b| b == b'\n').map_or(0, |i| i + 1);
    f.set_len(keep as u64)?;
    f.seek(SeekFrom::End(0))?;
    f.sync_all()?;
    Ok(())
}

/// Parses JSONL; blank lines are ignored.
pub fn parse_jsonl(text: &str) -> Result<Vec<EventRecord>, ServiceError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| ServiceError::BadLog(format!("line {}: {e}", i + 1)))
        })
        .collect()
}

/// Serializes records one per line, exactly as the store writes them.
pub fn to_jsonl(records: &[EventRecord]) -> String {
    let mut out = String::new();
    for r in records {
        out.push_str(&serde_json::to_string(r).expect("event serializes"));
        out.push('\n');
    }
    out
}

/// Reads a JSONL export from a file.
pub fn read_jsonl_file(path: &Path) -> Result<Vec<EventRecord>, ServiceError> {
    let mut s = String::new();
    File::open(path).and_then(|mut f| f.read_to_string(&mut s)).map_err(|e| io_err(path, e))?;
    parse_jsonl(&s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::service::EventKind;
    use serde_json::json;

    fn rec(ts: u64) -> EventRecord {
        EventRecord {
            session_id: "s1".into(),
            timestamp: ts,
            kind: EventKind::InstructionAdded,
            payload: json!({"token": "walk", "index": 0}),
        }
    }

    #[test]
    fn append_and_read_back_in_order() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        for ts in [1, 2, 3] {
            store.append(&rec(ts)).unwrap();
        }
        let got = store.read("s1").unwrap();
        assert_eq!(got.iter().map(|r| r.timestamp).collect::<Vec<_>>(), vec![1, 2, 3]);
        assert_eq!(to_jsonl(&got), store.read_raw("s1").unwrap());
    }

    #[test]
    fn torn_append_is_dropped_on_reopen() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        store.append(&rec(1)).unwrap();
        let path = dir.path().join("s1.jsonl");
        let full = serde_json::to_string(&rec(2)).unwrap();
        let mut f = OpenOptions::new().append(true).open(&path).unwrap();
        f.write_all(&full.as_bytes()[..full.len() / 2]).unwrap();
        drop(f);

        let store = EventStore::open(dir.path()).unwrap();
        let got = store.read("s1").unwrap();
        assert_eq!(got, vec![rec(1)]);
        store.append(&rec(3)).unwrap();
        assert_eq!(store.read("s1").unwrap(), vec![rec(1), rec(3)]);
    }

    #[test]
    fn missing_session_reads_empty() {
        let dir = tempfile::tempdir().unwrap();
        let store = EventStore::open(dir.path()).unwrap();
        assert!(store.read("nope").unwrap().is_empty());
    }

    #[test]
    fn bad_lines_are_reported() {
        assert!(matches!(parse_jsonl("{}\n"), Err(ServiceError::BadLog(_))));
    }
}
