//! Solution statistics over exported session logs.
//!
//! Records are read from the JSONL event stream. Only completed test
//! puzzles enter the statistics; skipped puzzles and tutorials are dropped
//! at load. Per puzzle, lengths are measured as distance from the BFS
//! optimum and min-max normalized over the analyzed pool.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use num_rational::Ratio;
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};
use thiserror::Error;

use crate::compress::{compress, CompressionConfig};
use crate::program::{execute, program_length, ExecutionLimits, Program};
use crate::service::{
    ConditionId, EventKind, EventRecord, PuzzleCompletePayload, PuzzleSet, PuzzleSkippedPayload, SessionStartPayload,
    TestRunPayload,
};
use crate::solver::bfs_shortest;
use crate::world::Puzzle;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("degenerate pool: every value is {0}")]
    DegeneratePool(f64),
    #[error("value {value} lies outside the pool range [{min}, {max}]")]
    OutsidePool { value: f64, min: f64, max: f64 },
    #[error("sample of size {0} is too small (need at least 2)")]
    SampleTooSmall(usize),
    #[error("both samples have zero variance")]
    ZeroVariance,
    #[error("record for {puzzle_id} in {session_id} is marked complete but its program does not complete the puzzle")]
    NotCompleting { session_id: String, puzzle_id: String },
    #[error("unknown puzzle {0:?}")]
    UnknownPuzzle(String),
    #[error("puzzle {0:?} has no solution")]
    Unsolvable(String),
    #[error("session {0:?} has events before its session_start")]
    MissingStart(String),
    #[error("bad {kind} payload in {session_id}: {message}")]
    BadPayload { session_id: String, kind: EventKind, message: String },
    #[error("empty sequence")]
    Empty,
    #[error("{0}")]
    Io(String),
}

/// One participant's final attempt at one puzzle.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolutionRecord {
    pub participant_id: String,
    pub condition: ConditionId,
    pub puzzle_id: String,
    pub program: Program,
    pub completed: bool,
    pub duration_ms: u64,
}

/// Every `puzzle_complete` and `puzzle_skipped` event as a record. A skipped
/// record carries the last program tested on that puzzle, if any.
pub fn records_from_events(events: &[EventRecord]) -> Result<Vec<SolutionRecord>, AnalysisError> {
    let mut condition: HashMap<&str, ConditionId> = HashMap::new();
    let mut last_tested: HashMap<(&str, String), Program> = HashMap::new();
    let mut out = Vec::new();
    for e in events {
        let sid = e.session_id.as_str();
        let bad = |m: serde_json::Error| AnalysisError::BadPayload {
            session_id: e.session_id.clone(),
            kind: e.kind,
            message: m.to_string(),
        };
        if e.kind == EventKind::SessionStart {
            let p: SessionStartPayload = serde_json::from_value(e.payload.clone()).map_err(bad)?;
            condition.insert(sid, p.condition);
            continue;
        }
        let cond = *condition.get(sid).ok_or_else(|| AnalysisError::MissingStart(e.session_id.clone()))?;
        match e.kind {
            EventKind::TestRun => {
                let p: TestRunPayload = serde_json::from_value(e.payload.clone()).map_err(bad)?;
                last_tested.insert((sid, p.puzzle_id), p.program);
            }
            EventKind::PuzzleComplete => {
                let p: PuzzleCompletePayload = serde_json::from_value(e.payload.clone()).map_err(bad)?;
                out.push(SolutionRecord {
                    participant_id: e.session_id.clone(),
                    condition: cond,
                    puzzle_id: p.puzzle_id,
                    program: p.program,
                    completed: true,
                    duration_ms: p.duration_ms,
                });
            }
            EventKind::PuzzleSkipped => {
                let p: PuzzleSkippedPayload = serde_json::from_value(e.payload.clone()).map_err(bad)?;
                let program = last_tested.remove(&(sid, p.puzzle_id.clone())).unwrap_or_default();
                out.push(SolutionRecord {
                    participant_id: e.session_id.clone(),
                    condition: cond,
                    puzzle_id: p.puzzle_id,
                    program,
                    completed: false,
                    duration_ms: p.elapsed_ms,
                });
            }
            _ => {}
        }
    }
    Ok(out)
}

/// Completed records on test puzzles.
pub fn analyzable(records: Vec<SolutionRecord>, puzzles: &PuzzleSet) -> Vec<SolutionRecord> {
    records.into_iter().filter(|r| r.completed && puzzles.is_test(&r.puzzle_id)).collect()
}

/// Range of one quantity over a pool.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PuzzleNorms {
    pub min: f64,
    pub max: f64,
}

impl PuzzleNorms {
    pub fn from_values<I: IntoIterator<Item = f64>>(values: I) -> Result<PuzzleNorms, AnalysisError> {
        let mut it = values.into_iter();
        let first = it.next().ok_or(AnalysisError::Empty)?;
        let (min, max) = it.fold((first, first), |(lo, hi), v| (lo.min(v), hi.max(v)));
        Ok(PuzzleNorms { min, max })
    }

    /// `(value - min) / (max - min)`.
    pub fn normalize(&self, value: f64) -> Result<f64, AnalysisError> {
        if self.max == self.min {
            return Err(AnalysisError::DegeneratePool(self.min));
        }
        if value < self.min || value > self.max {
            return Err(AnalysisError::OutsidePool { value, min: self.min, max: self.max });
        }
        Ok((value - self.min) / (self.max - self.min))
    }
}

/// Distance `len - optimal`, normalized by the pool's distance range.
pub fn normalized_distance(len: usize, optimal: usize, norms: &PuzzleNorms) -> Result<f64, AnalysisError> {
    norms.normalize(len as f64 - optimal as f64)
}

/// Number of actions the program performs before the puzzle completes.
pub fn flattened_length(record: &SolutionRecord, puzzle: &Puzzle, limits: ExecutionLimits) -> Result<usize, AnalysisError> {
    Ok(completing_actions(record, puzzle, limits)?.len())
}

fn completing_actions(
    record: &SolutionRecord,
    puzzle: &Puzzle,
    limits: ExecutionLimits,
) -> Result<Vec<crate::world::Action>, AnalysisError> {
    let not_completing = || AnalysisError::NotCompleting {
        session_id: record.participant_id.clone(),
        puzzle_id: record.puzzle_id.clone(),
    };
    let trace = execute(puzzle, &record.program, limits).map_err(|_| not_completing())?;
    if !trace.completed() {
        return Err(not_completing());
    }
    Ok(trace.actions)
}

/// Compressibility of the record's flattened action sequence under the
/// default compression config. An empty sequence scores 0.
pub fn solution_compressibility(
    record: &SolutionRecord,
    puzzle: &Puzzle,
    limits: ExecutionLimits,
) -> Result<Ratio<u64>, AnalysisError> {
    let actions = completing_actions(record, puzzle, limits)?;
    if actions.is_empty() {
        return Ok(Ratio::from_integer(0));
    }
    let c = compress(&actions, &CompressionConfig::default()).expect("non-empty sequence with default config");
    Ok(c.compressibility)
}

fn ratio_f64(r: Ratio<u64>) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WelchResult {
    pub t: f64,
    pub df: f64,
    /// Two-sided.
    pub p: f64,
}

fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// Welch's unequal-variance t test with Welch-Satterthwaite degrees of
/// freedom.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<WelchResult, AnalysisError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(AnalysisError::SampleTooSmall(s.len()));
        }
    }
    let (ma, va) = mean_var(a);
    let (mb, vb) = mean_var(b);
    let (qa, qb) = (va / a.len() as f64, vb / b.len() as f64);
    let se2 = qa + qb;
    if se2 == 0.0 {
        return Err(AnalysisError::ZeroVariance);
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2 / (qa * qa / (a.len() as f64 - 1.0) + qb * qb / (b.len() as f64 - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    let p = (2.0 * dist.cdf(-t.abs())).min(1.0);
    Ok(WelchResult { t, df, p })
}

/// `max_bonus * (1 - (len - best) / (worst - best))`, clamped to
/// `[0, max_bonus]`.
pub fn bonus(record_len: usize, best_len: usize, worst_len: usize, max_bonus: f64) -> Result<f64, AnalysisError> {
    if worst_len <= best_len {
        return Err(AnalysisError::DegeneratePool(best_len as f64));
    }
    let frac = (record_len as f64 - best_len as f64) / (worst_len as f64 - best_len as f64);
    Ok((max_bonus * (1.0 - frac)).clamp(0.0, max_bonus))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PoolScope {
    /// Norms per puzzle over every condition's records.
    #[default]
    AcrossConditions,
    /// Norms per puzzle and condition.
    WithinCondition,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AnalysisOptions {
    pub scope: PoolScope,
    pub max_bonus: f64,
    pub limits: ExecutionLimits,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        AnalysisOptions { scope: PoolScope::default(), max_bonus: 0.50, limits: ExecutionLimits::default() }
    }
}

/// Per-record measurements. Normalized values are `None` when the pool
/// was degenerate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecordMetrics {
    pub participant_id: String,
    pub condition: ConditionId,
    pub puzzle_id: String,
    pub program_length: usize,
    pub flattened_length: usize,
    pub optimal_length: usize,
    pub compressibility: f64,
    pub normalized_distance: Option<f64>,
    pub normalized_flattened_length: Option<f64>,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GroupRow {
    pub puzzle_id: String,
    pub condition: ConditionId,
    pub n: usize,
    pub mean_program_length: f64,
    pub mean_flattened_length: f64,
    pub mean_normalized_distance: Option<f64>,
    pub mean_normalized_flattened_length: Option<f64>,
    pub mean_compressibility: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub metric: &'static str,
    pub condition_a: ConditionId,
    pub condition_b: ConditionId,
    pub n_a: usize,
    pub n_b: usize,
    pub t: Option<f64>,
    pub df: Option<f64>,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BonusRow {
    pub participant_id: String,
    pub condition: ConditionId,
    pub puzzle_id: String,
    pub program_length: usize,
    pub amount: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Report {
    pub records: Vec<RecordMetrics>,
    pub per_puzzle: Vec<GroupRow>,
    pub per_condition: Vec<GroupRow>,
    pub comparisons: Vec<ComparisonRow>,
    pub bonuses: Vec<BonusRow>,
    /// Degenerate pools and skipped comparisons.
    pub notes: Vec<String>,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

fn mean_opt<'a>(xs: impl IntoIterator<Item = &'a Option<f64>>) -> Option<f64> {
    let v: Vec<f64> = xs.into_iter().flatten().copied().collect();
    (!v.is_empty()).then(|| mean(v))
}

fn group_row(puzzle_id: &str, condition: ConditionId, rs: &[&RecordMetrics]) -> GroupRow {
    GroupRow {
        puzzle_id: puzzle_id.to_string(),
        condition,
        n: rs.len(),
        mean_program_length: mean(rs.iter().map(|r| r.program_length as f64)),
        mean_flattened_length: mean(rs.iter().map(|r| r.flattened_length as f64)),
        mean_normalized_distance: mean_opt(rs.iter().map(|r| &r.normalized_distance)),
        mean_normalized_flattened_length: mean_opt(rs.iter().map(|r| &r.normalized_flattened_length)),
        mean_compressibility: mean(rs.iter().map(|r| r.compressibility)),
    }
}

/// Runs the full pipeline over an exported event stream.
pub fn analyze(events: &[EventRecord], puzzles: &PuzzleSet, opts: &AnalysisOptions) -> Result<Report, AnalysisError> {
    let records = analyzable(records_from_events(events)?, puzzles);
    let mut optimal: HashMap<&str, usize> = HashMap::new();
    for (id, p) in &puzzles.tests {
        let n = bfs_shortest(p).ok_or_else(|| AnalysisError::Unsolvable(id.clone()))?.len();
        optimal.insert(id, n);
    }

    let mut report = Report::default();
    for r in &records {
        let puzzle = puzzles.get(&r.puzzle_id).ok_or_else(|| AnalysisError::UnknownPuzzle(r.puzzle_id.clone()))?;
        report.records.push(RecordMetrics {
            participant_id: r.participant_id.clone(),
            condition: r.condition,
            puzzle_id: r.puzzle_id.clone(),
            program_length: program_length(&r.program),
            flattened_length: flattened_length(r, puzzle, opts.limits)?,
            optimal_length: optimal[r.puzzle_id.as_str()],
            compressibility: ratio_f64(solution_compressibility(r, puzzle, opts.limits)?),
            normalized_distance: None,
            normalized_flattened_length: None,
            duration_ms: r.duration_ms,
        });
    }

    // pools: puzzle (and condition, when scoped) -> record indices
    let mut pools: BTreeMap<(String, Option<ConditionId>), Vec<usize>> = BTreeMap::new();
    for (i, m) in report.records.iter().enumerate() {
        let c = (opts.scope == PoolScope::WithinCondition).then_some(m.condition);
        pools.entry((m.puzzle_id.clone(), c)).or_default().push(i);
    }
    for ((pid, c), idx) in &pools {
        let label = match c {
            Some(c) => format!("{pid}/{c}"),
            None => pid.clone(),
        };
        let dist = |m: &RecordMetrics| m.program_length as f64 - m.optimal_length as f64;
        let flat = |m: &RecordMetrics| m.flattened_length as f64 - m.optimal_length as f64;
        let dn = PuzzleNorms::from_values(idx.iter().map(|&i| dist(&report.records[i])))?;
        let fnm = PuzzleNorms::from_values(idx.iter().map(|&i| flat(&report.records[i])))?;
        for &i in idx {
            let m = &report.records[i];
            let (d, f) = (dn.normalize(dist(m)).ok(), fnm.normalize(flat(m)).ok());
            report.records[i].normalized_distance = d;
            report.records[i].normalized_flattened_length = f;
        }
        if dn.min == dn.max {
            report.notes.push(format!("{label}: degenerate distance pool (all {})", dn.min));
        }
        if fnm.min == fnm.max {
            report.notes.push(format!("{label}: degenerate flattened-length pool (all {})", fnm.min));
        }
    }

    let mut by_pc: BTreeMap<(String, ConditionId), Vec<&RecordMetrics>> = BTreeMap::new();
    let mut by_c: BTreeMap<ConditionId, Vec<&RecordMetrics>> = BTreeMap::new();
    for m in &report.records {
        by_pc.entry((m.puzzle_id.clone(), m.condition)).or_default().push(m);
        by_c.entry(m.condition).or_default().push(m);
    }
    report.per_puzzle = by_pc.iter().map(|((p, c), rs)| group_row(p, *c, rs)).collect();
    report.per_condition = by_c.iter().map(|(c, rs)| group_row("all", *c, rs)).collect();

    type Metric = fn(&RecordMetrics) -> Option<f64>;
    let metrics: [(&'static str, Metric); 3] = [
        ("normalized_distance", |m| m.normalized_distance),
        ("normalized_flattened_length", |m| m.normalized_flattened_length),
        ("compressibility", |m| Some(m.compressibility)),
    ];
    let conds: Vec<ConditionId> = by_c.keys().copied().collect();
    for (name, f) in metrics {
        for (i, &ca) in conds.iter().enumerate() {
            for &cb in &conds[i + 1..] {
                let a: Vec<f64> = by_c[&ca].iter().filter_map(|m| f(m)).collect();
                let b: Vec<f64> = by_c[&cb].iter().filter_map(|m| f(m)).collect();
                let w = welch_t(&a, &b);
                if let Err(e) = &w {
                    report.notes.push(format!("{name} {ca} vs {cb}: {e}"));
                }
                let w = w.ok();
                report.comparisons.push(ComparisonRow {
                    metric: name,
                    condition_a: ca,
                    condition_b: cb,
                    n_a: a.len(),
                    n_b: b.len(),
                    t: w.map(|w| w.t),
                    df: w.map(|w| w.df),
                    p: w.map(|w| w.p),
                });
            }
        }
    }

    report.bonuses = bonuses(&report.records, opts.max_bonus, &mut report.notes);
    Ok(report)
}

/// Fixed-bonus conditions pay `max_bonus` per completed puzzle. Linear
/// conditions pay on the line from the pool's shortest program (full
/// bonus) to its longest (nothing), per puzzle and condition.
fn bonuses(records: &[RecordMetrics], max_bonus: f64, notes: &mut Vec<String>) -> Vec<BonusRow> {
    use crate::service::BonusMode;
    let mut range: BTreeMap<(&str, ConditionId), (usize, usize)> = BTreeMap::new();
    for m in records {
        let e = range.entry((&m.puzzle_id, m.condition)).or_insert((m.program_length, m.program_length));
        e.0 = e.0.min(m.program_length);
        e.1 = e.1.max(m.program_length);
    }
    let mut noted = std::collections::BTreeSet::new();
    records
        .iter()
        .map(|m| {
            let amount = match m.condition.spec().bonus_mode {
                BonusMode::PerPuzzleFixed => Some(max_bonus),
                BonusMode::LengthLinear => {
                    let (best, worst) = range[&(m.puzzle_id.as_str(), m.condition)];
                    match bonus(m.program_length, best, worst, max_bonus) {
                        Ok(v) => Some(v),
                        Err(e) => {
                            if noted.insert((m.puzzle_id.clone(), m.condition)) {
                                notes.push(format!("bonus {}/{}: {e}", m.puzzle_id, m.condition));
                            }
                            None
                        }
                    }
                }
            };
            BonusRow {
                participant_id: m.participant_id.clone(),
                condition: m.condition,
                puzzle_id: m.puzzle_id.clone(),
                program_length: m.program_length,
                amount,
            }
        })
        .collect()
}

impl Report {
    /// Writes `records.csv`, `per_puzzle.csv`, `per_condition.csv`,
    /// `comparisons.csv`, `bonuses.csv` and `notes.txt` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<(), AnalysisError> {
        let io = |e: &dyn std::fmt::Display| AnalysisError::Io(e.to_string());
        std::fs::create_dir_all(dir).map_err(|e| io(&e))?;
        fn write<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), AnalysisError> {
            let mut w = csv::Writer::from_path(path).map_err(|e| AnalysisError::Io(e.to_string()))?;
            for r in rows {
                w.serialize(r).map_err(|e| AnalysisError::Io(e.to_string()))?;
            }
            w.flush().map_err(|e| AnalysisError::Io(e.to_string()))
        }
        write(&dir.join("records.csv"), &self.records)?;
        write(&dir.join("per_puzzle.csv"), &self.per_puzzle)?;
        write(&dir.join("per_condition.csv"), &self.per_condition)?;
        write(&dir.join("comparisons.csv"), &self.comparisons)?;
        write(&dir.join("bonuses.csv"), &self.bonuses)?;
        let mut notes = self.notes.join("\n");
        notes.push('\n');
        std::fs::write(dir.join("notes.txt"), notes).map_err(|e| io(&e))
    }
}
