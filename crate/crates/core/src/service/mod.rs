//! Experiment backend.
//!
//! Sessions walk a participant through three tutorials in fixed order and
//! six test puzzles in two independently shuffled blocks of three. The
//! server owns every number that ends up in the record: program length,
//! execution, completion and skip timing. Every state change is appended
//! to the session's JSONL log before it is acknowledged, and a session can
//! be rebuilt from its log alone.

pub mod config;
pub mod http;
pub mod store;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::program::{
    execute, program_length, validate_program, ExecutionLimits, Program, TraceExport, Violation,
};
use crate::world::{Action, Puzzle};
pub use store::EventStore;

/// Minimum time on a puzzle before it may be skipped.
pub const SKIP_AFTER_MS: u64 = 360_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConditionId {
    EfficientFlat,
    DefaultFlat,
    EfficientHierarchy,
    DefaultHierarchy,
}

impl ConditionId {
    pub const ALL: [ConditionId; 4] = [
        ConditionId::EfficientFlat,
        ConditionId::DefaultFlat,
        ConditionId::EfficientHierarchy,
        ConditionId::DefaultHierarchy,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ConditionId::EfficientFlat => "efficient_flat",
            ConditionId::DefaultFlat => "default_flat",
            ConditionId::EfficientHierarchy => "efficient_hierarchy",
            ConditionId::DefaultHierarchy => "default_hierarchy",
        }
    }

    pub fn spec(self) -> ConditionSpec {
        use BonusMode::*;
        let (subprocesses_allowed, counter_visible, efficiency_instructions, bonus_mode) = match self {
            ConditionId::EfficientFlat => (0, false, true, LengthLinear),
            ConditionId::DefaultFlat => (0, false, false, PerPuzzleFixed),
            ConditionId::EfficientHierarchy => (4, true, true, LengthLinear),
            ConditionId::DefaultHierarchy => (4, false, false, PerPuzzleFixed),
        };
        ConditionSpec { id: self, subprocesses_allowed, counter_visible, efficiency_instructions, bonus_mode }
    }

    pub fn is_flat(self) -> bool {
        self.spec().subprocesses_allowed == 0
    }
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ConditionId {
    type Err = ServiceError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ConditionId::ALL
            .into_iter()
            .find(|c| c.as_str() == s)
            .ok_or_else(|| ServiceError::UnknownCondition(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BonusMode {
    PerPuzzleFixed,
    LengthLinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub id: ConditionId,
    /// 0 (flat) or 4.
    pub subprocesses_allowed: usize,
    pub counter_visible: bool,
    pub efficiency_instructions: bool,
    pub bonus_mode: BonusMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ServiceError {
    #[error("unknown condition {0:?}")]
    UnknownCondition(String),
    #[error("unknown session {0:?}")]
    UnknownSession(String),
    #[error("unknown puzzle {0:?}")]
    UnknownPuzzle(String),
    #[error("session {0:?} is finished")]
    SessionFinished(String),
    #[error("puzzle {requested:?} is not the active puzzle ({active:?})")]
    NotActivePuzzle { requested: String, active: String },
    #[error("skip not yet available, {remaining_seconds} s remaining")]
    SkipTooEarly { remaining_seconds: u64 },
    #[error("event kind {0} is recorded by the server only")]
    ServerOwnedEvent(EventKind),
    #[error("puzzle set: {0}")]
    PuzzleSet(String),
    #[error("storage failure: {0}")]
    Storage(String),
    #[error("malformed log: {0}")]
    BadLog(String),
    #[error("session {0:?} already has a log")]
    SessionExists(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// Condition, seed and puzzle order; written when the session is created.
    SessionStart,
    InstructionAdded,
    InstructionRemoved,
    InstructionReordered,
    TestRun,
    PuzzleComplete,
    PuzzleSkipped,
    SessionEnd,
}

impl EventKind {
    pub fn client_loggable(self) -> bool {
        matches!(
            self,
            EventKind::InstructionAdded | EventKind::InstructionRemoved | EventKind::InstructionReordered
        )
    }
}

impl fmt::Display for EventKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = serde_json::to_value(self).expect("kind serializes");
        f.write_str(v.as_str().unwrap_or("?"))
    }
}

/// One line of a session log. `timestamp` is milliseconds since the Unix
/// epoch on the server clock.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub session_id: String,
    pub timestamp: u64,
    pub kind: EventKind,
    pub payload: Value,
}

pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
    }
}

/// Settable clock for tests and scripted runs.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> ManualClock {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn advance_ms(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }

    pub fn set_ms(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

impl<C: Clock + ?Sized> Clock for Arc<C> {
    fn now_ms(&self) -> u64 {
        (**self).now_ms()
    }
}

/// Three tutorials and six test puzzles.
#[derive(Debug, Clone)]
pub struct PuzzleSet {
    pub tutorials: Vec<(String, Puzzle)>,
    pub tests: Vec<(String, Puzzle)>,
}

impl PuzzleSet {
    pub fn new(tutorials: Vec<(String, Puzzle)>, tests: Vec<(String, Puzzle)>) -> Result<PuzzleSet, ServiceError> {
        if tutorials.len() != 3 || tests.len() != 6 {
            return Err(ServiceError::PuzzleSet(format!(
                "need 3 tutorials and 6 test puzzles, found {} and {}",
                tutorials.len(),
                tests.len()
            )));
        }
        Ok(PuzzleSet { tutorials, tests })
    }

    /// Loads `tutorial-1..3.json` and `puzzle-1..6.json` from `dir`.
    pub fn load_dir(dir: &Path) -> Result<PuzzleSet, ServiceError> {
        let load = |prefix: &str, n: usize| -> Result<Vec<(String, Puzzle)>, ServiceError> {
            (1..=n)
                .map(|i| {
                    let id = format!("{prefix}-{i}");
                    let path = dir.join(format!("{id}.json"));
                    let text = std::fs::read_to_string(&path)
                        .map_err(|e| ServiceError::PuzzleSet(format!("{}: {e}", path.display())))?;
                    let p = Puzzle::from_text(&text)
                        .map_err(|e| ServiceError::PuzzleSet(format!("{}: {e}", path.display())))?;
                    Ok((id, p))
                })
                .collect()
        };
        PuzzleSet::new(load("tutorial", 3)?, load("puzzle", 6)?)
    }

    pub fn get(&self, id: &str) -> Option<&Puzzle> {
        self.tutorials.iter().chain(&self.tests).find(|(i, _)| i == id).map(|(_, p)| p)
    }

    pub fn is_test(&self, id: &str) -> bool {
        self.tests.iter().any(|(i, _)| i == id)
    }

    /// Tutorials in order, then the first three tests shuffled, then the
    /// last three shuffled.
    pub fn session_order(&self, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<String> = self.tutorials.iter().map(|(i, _)| i.clone()).collect();
        for block in self.tests.chunks(3) {
            let mut ids: Vec<String> = block.iter().map(|(i, _)| i.clone()).collect();
            ids.shuffle(&mut rng);
            order.extend(ids);
        }
        order
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Active,
    Finished,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Session {
    pub id: String,
    pub condition: ConditionId,
    pub seed: u64,
    pub order: Vec<String>,
    pub cursor: usize,
    /// Server time the active puzzle was shown.
    pub puzzle_started_ms: u64,
    pub status: SessionStatus,
    pub last_timestamp: u64,
}

impl Session {
    pub fn active_puzzle(&self) -> Option<&str> {
        (self.status == SessionStatus::Active).then(|| self.order.get(self.cursor).map(String::as_str)).flatten()
    }

    fn advance(&mut self, now: u64) {
        self.cursor += 1;
        self.puzzle_started_ms = now;
        if self.cursor >= self.order.len() {
            self.status = SessionStatus::Finished;
        }
    }

    /// Rebuilds a session from its log.
    pub fn replay(events: &[EventRecord]) -> Result<Session, ServiceError> {
        let first = events.first().ok_or_else(|| ServiceError::BadLog("empty session log".into()))?;
        if first.kind != EventKind::SessionStart {
            return Err(ServiceError::BadLog(format!("{}: first event is not session_start", first.session_id)));
        }
        let start: SessionStartPayload = serde_json::from_value(first.payload.clone())
            .map_err(|e| ServiceError::BadLog(format!("{}: {e}", first.session_id)))?;
        let mut s = Session {
            id: first.session_id.clone(),
            condition: start.condition,
            seed: start.seed,
            order: start.order,
            cursor: 0,
            puzzle_started_ms: first.timestamp,
            status: SessionStatus::Active,
            last_timestamp: first.timestamp,
        };
        for e in &events[1..] {
            s.last_timestamp = s.last_timestamp.max(e.timestamp);
            match e.kind {
                EventKind::PuzzleComplete | EventKind::PuzzleSkipped => s.advance(e.timestamp),
                EventKind::SessionEnd => s.status = SessionStatus::Finished,
                _ => {}
            }
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionStartPayload {
    pub condition: ConditionId,
    pub seed: u64,
    pub order: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestRunPayload {
    pub puzzle_id: String,
    pub program: Program,
    pub valid: bool,
    pub completed: bool,
    pub program_length: usize,
    pub actions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleCompletePayload {
    pub puzzle_id: String,
    pub program: Program,
    pub program_length: usize,
    pub actions: usize,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleSkippedPayload {
    pub puzzle_id: String,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_elapsed_ms: Option<u64>,
}

/// What a client learns about a new session. Subprocess slots appear only
/// in hierarchy conditions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionCreated {
    pub session_id: String,
    pub condition: ConditionId,
    pub puzzle_count: usize,
    pub counter_visible: bool,
    pub efficiency_instructions: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subprocess_slots: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PuzzleView {
    pub session_id: String,
    pub puzzle_id: String,
    pub index: usize,
    pub total: usize,
    pub tutorial: bool,
    pub puzzle: Value,
    /// Instruction tokens the editor may offer.
    pub palette: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subprocess_slots: Option<usize>,
    pub counter_visible: bool,
    pub skip_available_in_seconds: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubmitResponse {
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<Violation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TraceExport>,
    pub completed: bool,
    /// Present only when the condition shows the length counter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub program_length: Option<usize>,
    pub counter_visible: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_puzzle: Option<String>,
    pub session_finished: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkipResponse {
    pub skipped: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub next_puzzle: Option<String>,
    pub session_finished: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExportFilter {
    #[serde(default)]
    pub condition: Option<ConditionId>,
    #[serde(default)]
    pub session: Option<String>,
}

type SessionHandle = Arc<Mutex<Session>>;

pub struct ExperimentService {
    puzzles: PuzzleSet,
    store: EventStore,
    clock: Arc<dyn Clock>,
    limits: ExecutionLimits,
    condition_seeds: BTreeMap<ConditionId, u64>,
    sessions: Mutex<HashMap<String, SessionHandle>>,
}

fn lock<T>(m: &Mutex<T>) -> MutexGuard<'_, T> {
    m.lock().unwrap_or_else(|e| e.into_inner())
}

impl ExperimentService {
    /// Opens the store and rebuilds every logged session.
    pub fn new(puzzles: PuzzleSet, store: EventStore, clock: Arc<dyn Clock>) -> Result<Self, ServiceError> {
        let mut sessions = HashMap::new();
        for id in store.session_ids()? {
            let events = store.read(&id)?;
            if events.is_empty() {
                continue;
            }
            sessions.insert(id, Arc::new(Mutex::new(Session::replay(&events)?)));
        }
        Ok(ExperimentService {
            puzzles,
            store,
            clock,
            limits: ExecutionLimits::default(),
            condition_seeds: BTreeMap::new(),
            sessions: Mutex::new(sessions),
        })
    }

    pub fn with_limits(mut self, limits: ExecutionLimits) -> Self {
        self.limits = limits;
        self
    }

    /// Base seed per condition for sessions created without an explicit seed.
    pub fn with_condition_seeds(mut self, seeds: BTreeMap<ConditionId, u64>) -> Self {
        self.condition_seeds = seeds;
        self
    }

    pub fn puzzles(&self) -> &PuzzleSet {
        &self.puzzles
    }

    fn handle(&self, id: &str) -> Result<SessionHandle, ServiceError> {
        lock(&self.sessions).get(id).cloned().ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    /// Appends under the session lock with a timestamp that never goes
    /// backwards within the session.
    fn record(&self, s: &mut Session, kind: EventKind, payload: Value) -> Result<u64, ServiceError> {
        let ts = self.clock.now_ms().max(s.last_timestamp);
        self.store.append(&EventRecord { session_id: s.id.clone(), timestamp: ts, kind, payload })?;
        s.last_timestamp = ts;
        Ok(ts)
    }

    pub fn create_session(&self, condition: ConditionId, seed: Option<u64>) -> Result<SessionCreated, ServiceError> {
        let mut sessions = lock(&self.sessions);
        let n = sessions.len() as u64 + 1;
        let id = format!("session-{n:05}");
        let seed = seed.unwrap_or_else(|| self.condition_seeds.get(&condition).copied().unwrap_or(0) + n);
        let order = self.puzzles.session_order(seed);
        let now = self.clock.now_ms();
        let mut session = Session {
            id: id.clone(),
            condition,
            seed,
            order: order.clone(),
            cursor: 0,
            puzzle_started_ms: now,
            status: SessionStatus::Active,
            last_timestamp: now,
        };
        let payload = serde_json::to_value(SessionStartPayload { condition, seed, order }).expect("payload");
        self.record(&mut session, EventKind::SessionStart, payload)?;
        sessions.insert(id.clone(), Arc::new(Mutex::new(session.clone())));
        let spec = condition.spec();
        Ok(SessionCreated {
            session_id: id,
            condition,
            puzzle_count: session.order.len(),
            counter_visible: spec.counter_visible,
            efficiency_instructions: spec.efficiency_instructions,
            subprocess_slots: (spec.subprocesses_allowed > 0).then_some(spec.subprocesses_allowed),
        })
    }

    pub fn create_session_named(&self, condition: &str, seed: Option<u64>) -> Result<SessionCreated, ServiceError> {
        self.create_session(condition.parse()?, seed)
    }

    pub fn session(&self, id: &str) -> Result<Session, ServiceError> {
        let h = self.handle(id)?;
        let s = lock(&h).clone();
        Ok(s)
    }

    fn active<'a>(s: &'a Session) -> Result<&'a str, ServiceError> {
        s.active_puzzle().ok_or_else(|| ServiceError::SessionFinished(s.id.clone()))
    }

    pub fn current_puzzle(&self, id: &str) -> Result<PuzzleView, ServiceError> {
        let h = self.handle(id)?;
        let s = lock(&h);
        let pid = Self::active(&s)?.to_string();
        let puzzle = self.puzzles.get(&pid).ok_or_else(|| ServiceError::UnknownPuzzle(pid.clone()))?;
        let spec = s.condition.spec();
        let mut palette: Vec<String> = Action::ALL.iter().map(|a| a.token().to_string()).collect();
        palette.extend((1..=spec.subprocesses_allowed).map(|k| format!("call{k}")));
        let elapsed = self.clock.now_ms().saturating_sub(s.puzzle_started_ms);
        Ok(PuzzleView {
            session_id: s.id.clone(),
            index: s.cursor,
            total: s.order.len(),
            tutorial: !self.puzzles.is_test(&pid),
            puzzle: serde_json::from_str(&puzzle.to_text()).expect("puzzle json"),
            puzzle_id: pid,
            palette,
            subprocess_slots: (spec.subprocesses_allowed > 0).then_some(spec.subprocesses_allowed),
            counter_visible: spec.counter_visible,
            skip_available_in_seconds: SKIP_AFTER_MS.saturating_sub(elapsed).div_ceil(1000),
        })
    }

    fn check_active(s: &Session, puzzle_id: &str) -> Result<(), ServiceError> {
        let active = Self::active(s)?;
        if active != puzzle_id {
            return Err(ServiceError::NotActivePuzzle { requested: puzzle_id.into(), active: active.into() });
        }
        Ok(())
    }

    fn finish_puzzle(&self, s: &mut Session) -> Result<(Option<String>, bool), ServiceError> {
        s.advance(self.clock.now_ms().max(s.last_timestamp));
        if s.status == SessionStatus::Finished {
            self.record(s, EventKind::SessionEnd, json!({}))?;
        }
        Ok((s.active_puzzle().map(str::to_string), s.status == SessionStatus::Finished))
    }

    /// Validates and runs a program on the active puzzle. A completing run
    /// moves the session to the next puzzle.
    pub fn submit_program(&self, id: &str, puzzle_id: &str, program: &Program) -> Result<SubmitResponse, ServiceError> {
        let h = self.handle(id)?;
        let mut s = lock(&h);
        Self::check_active(&s, puzzle_id)?;
        let spec = s.condition.spec();
        let puzzle = self.puzzles.get(puzzle_id).ok_or_else(|| ServiceError::UnknownPuzzle(puzzle_id.into()))?;
        let length = program_length(program);
        let counter = spec.counter_visible.then_some(length);

        let mut run = TestRunPayload {
            puzzle_id: puzzle_id.into(),
            program: program.clone(),
            valid: false,
            completed: false,
            program_length: length,
            actions: 0,
        };
        if let Err(violations) = validate_program(program, &spec) {
            self.record(&mut s, EventKind::TestRun, serde_json::to_value(&run).expect("payload"))?;
            return Ok(SubmitResponse {
                valid: false,
                violations,
                trace: None,
                completed: false,
                program_length: counter,
                counter_visible: spec.counter_visible,
                next_puzzle: None,
                session_finished: false,
            });
        }
        let trace = execute(puzzle, program, self.limits).expect("validated program has no dangling calls");
        run.valid = true;
        run.completed = trace.completed();
        run.actions = trace.actions.len();
        let ts = self.record(&mut s, EventKind::TestRun, serde_json::to_value(&run).expect("payload"))?;

        let (mut next_puzzle, mut session_finished) = (None, false);
        if trace.completed() {
            let done = PuzzleCompletePayload {
                puzzle_id: puzzle_id.into(),
                program: program.clone(),
                program_length: length,
                actions: trace.actions.len(),
                duration_ms: ts.saturating_sub(s.puzzle_started_ms),
            };
            self.record(&mut s, EventKind::PuzzleComplete, serde_json::to_value(&done).expect("payload"))?;
            (next_puzzle, session_finished) = self.finish_puzzle(&mut s)?;
        }
        Ok(SubmitResponse {
            valid: true,
            violations: Vec::new(),
            trace: Some(trace.to_export()),
            completed: trace.completed(),
            program_length: counter,
            counter_visible: spec.counter_visible,
            next_puzzle,
            session_finished,
        })
    }

    /// Skips the active puzzle once six minutes of server time have passed
    /// since it was shown. The client's own timer is only logged.
    pub fn skip_puzzle(&self, id: &str, puzzle_id: &str, client_elapsed_ms: Option<u64>) -> Result<SkipResponse, ServiceError> {
        let h = self.handle(id)?;
        let mut s = lock(&h);
        Self::check_active(&s, puzzle_id)?;
        let elapsed = self.clock.now_ms().saturating_sub(s.puzzle_started_ms);
        if elapsed < SKIP_AFTER_MS {
            return Err(ServiceError::SkipTooEarly { remaining_seconds: (SKIP_AFTER_MS - elapsed).div_ceil(1000) });
        }
        let payload = PuzzleSkippedPayload { puzzle_id: puzzle_id.into(), elapsed_ms: elapsed, client_elapsed_ms };
        self.record(&mut s, EventKind::PuzzleSkipped, serde_json::to_value(payload).expect("payload"))?;
        let (next_puzzle, session_finished) = self.finish_puzzle(&mut s)?;
        Ok(SkipResponse { skipped: puzzle_id.into(), next_puzzle, session_finished })
    }

    /// Records an editor event from the client.
    pub fn log_event(&self, id: &str, kind: EventKind, payload: Value) -> Result<(), ServiceError> {
        if !kind.client_loggable() {
            return Err(ServiceError::ServerOwnedEvent(kind));
        }
        let h = self.handle(id)?;
        let mut s = lock(&h);
        self.record(&mut s, kind, payload).map(|_| ())
    }

    /// JSONL of every matching session, sessions in id order. All matching
    /// sessions are locked while their logs are read.
    pub fn export_sessions(&self, filter: &ExportFilter) -> Result<String, ServiceError> {
        let sessions = lock(&self.sessions);
        let mut ids: Vec<&String> = sessions.keys().collect();
        ids.sort();
        let handles: Vec<(&String, &SessionHandle)> = ids.into_iter().map(|id| (id, &sessions[id])).collect();
        let guards: Vec<(&String, MutexGuard<'_, Session>)> = handles.iter().map(|(id, h)| (*id, lock(h))).collect();
        let mut out = String::new();
        for (id, s) in &guards {
            if filter.condition.is_some_and(|c| c != s.condition) {
                continue;
            }
            if filter.session.as_ref().is_some_and(|want| want != *id) {
                continue;
            }
            out.push_str(&self.store.read_raw(id)?);
        }
        Ok(out)
    }
}

/// Writes an exported JSONL stream into `store`, one log per session,
/// preserving record order. Refuses sessions the store already holds.
/// Returns the number of records written.
pub fn import_jsonl(store: &EventStore, text: &str) -> Result<usize, ServiceError> {
    let records = store::parse_jsonl(text)?;
    let existing = store.session_ids()?;
    let mut seen = std::collections::BTreeSet::new();
    for r in &records {
        if seen.insert(r.session_id.clone()) && existing.contains(&r.session_id) {
            return Err(ServiceError::SessionExists(r.session_id.clone()));
        }
    }
    for r in &records {
        store.append(r)?;
    }
    Ok(records.len())
}

/// A `test_run` whose logged completion flag disagrees with re-execution.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplayMismatch {
    pub session_id: String,
    pub timestamp: u64,
    pub puzzle_id: String,
    pub logged: bool,
    pub replayed: bool,
}

/// Re-executes every logged `test_run` against its puzzle. Returns how
/// many runs were checked, or the disagreements.
pub fn verify_test_runs(events: &[EventRecord], puzzles: &PuzzleSet, limits: ExecutionLimits) -> Result<usize, Vec<ReplayMismatch>> {
    let mut checked = 0;
    let mut bad = Vec::new();
    for e in events.iter().filter(|e| e.kind == EventKind::TestRun) {
        let Ok(run) = serde_json::from_value::<TestRunPayload>(e.payload.clone()) else {
            bad.push(ReplayMismatch {
                session_id: e.session_id.clone(),
                timestamp: e.timestamp,
                puzzle_id: String::new(),
                logged: false,
                replayed: false,
            });
            continue;
        };
        let replayed = match (puzzles.get(&run.puzzle_id), run.valid) {
            (Some(p), true) => execute(p, &run.program, limits).map(|t| t.completed()).unwrap_or(false),
            _ => false,
        };
        checked += 1;
        if replayed != run.completed {
            bad.push(ReplayMismatch {
                session_id: e.session_id.clone(),
                timestamp: e.timestamp,
                puzzle_id: run.puzzle_id,
                logged: run.completed,
                replayed,
            });
        }
    }
    if bad.is_empty() {
        Ok(checked)
    } else {
        Err(bad)
    }
}
