//! Hierarchical programs: a main instruction list plus up to four
//! subprocesses that may call each other and themselves.
//!
//! Both [`flatten`] and [`execute`] are driven by the same [`Unroller`], so
//! the action stream an execution consumes is always a prefix of the
//! syntactic flattening.

use std::collections::HashSet;
use std::fmt;

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::service::ConditionSpec;
use crate::world::{Action, Puzzle, WorldState};

/// Maximum number of subprocess slots.
pub const MAX_PROCS: usize = 4;

/// A primitive action or a call to subprocess `k` (1-based, as written in
/// program files: `call1` is `Call(1)` and runs `procs[0]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Instruction {
    Primitive(Action),
    Call(u8),
}

impl Instruction {
    pub fn token(&self) -> String {
        match self {
            Instruction::Primitive(a) => a.token().to_string(),
            Instruction::Call(k) => format!("call{k}"),
        }
    }

    pub fn from_token(s: &str) -> Option<Instruction> {
        if let Some(a) = Action::from_token(s) {
            return Some(Instruction::Primitive(a));
        }
        let k: u8 = s.strip_prefix("call")?.parse().ok()?;
        (k >= 1).then_some(Instruction::Call(k))
    }
}

impl From<Action> for Instruction {
    fn from(a: Action) -> Self {
        Instruction::Primitive(a)
    }
}

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.token())
    }
}

impl Serialize for Instruction {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.token())
    }
}

impl<'de> Deserialize<'de> for Instruction {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Instruction::from_token(&s)
            .ok_or_else(|| de::Error::custom(format!("unknown instruction token {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct Program {
    pub main: Vec<Instruction>,
    #[serde(default)]
    pub procs: Vec<Vec<Instruction>>,
}

#[derive(Debug, Error)]
pub enum ProgramTextError {
    #[error("invalid program document: {0}")]
    Syntax(#[from] serde_json::Error),
    #[error("{0} subprocesses defined, at most {MAX_PROCS} are allowed")]
    TooManyProcs(usize),
}

impl Program {
    /// A call-free program.
    pub fn flat(actions: &[Action]) -> Program {
        Program { main: actions.iter().map(|&a| a.into()).collect(), procs: Vec::new() }
    }

    pub fn from_text(text: &str) -> Result<Program, ProgramTextError> {
        let p: Program = serde_json::from_str(text)?;
        if p.procs.len() > MAX_PROCS {
            return Err(ProgramTextError::TooManyProcs(p.procs.len()));
        }
        Ok(p)
    }

    pub fn to_text(&self) -> String {
        serde_json::to_string(self).expect("program serializes")
    }

    pub fn has_calls(&self) -> bool {
        self.main.iter().chain(self.procs.iter().flatten()).any(|i| matches!(i, Instruction::Call(_)))
    }

    fn body(&self, frame: Body) -> &[Instruction] {
        match frame {
            Body::Main => &self.main,
            Body::Proc(k) => &self.procs[k],
        }
    }
}

/// Number of stored instructions; a call counts once regardless of what it
/// expands to.
pub fn program_length(p: &Program) -> usize {
    p.main.len() + p.procs.iter().map(Vec::len).sum::<usize>()
}

/// Nested demonstration program: 13 stored instructions that generate 38
/// actions. `P2 = [walk x4]`, `P1 = [call2, call2, light]`,
/// `main = [call1 x4, right, walk]`.
pub fn demo_program() -> Program {
    use Action::*;
    use Instruction::{Call, Primitive as P};
    Program {
        main: vec![Call(1), Call(1), Call(1), Call(1), P(TurnRight), P(Walk)],
        procs: vec![vec![Call(2), Call(2), P(Light)], vec![P(Walk), P(Walk), P(Walk), P(Walk)]],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExecutionLimits {
    /// Primitive actions; calls are free.
    pub max_steps: usize,
    /// Call-stack frames, the main program included.
    pub max_depth: usize,
}

impl ExecutionLimits {
    pub fn new(max_steps: usize, max_depth: usize) -> ExecutionLimits {
        assert!(max_steps >= 1 && max_depth >= 1, "execution limits must be positive");
        ExecutionLimits { max_steps, max_depth }
    }
}

impl Default for ExecutionLimits {
    fn default() -> Self {
        ExecutionLimits { max_steps: 10_000, max_depth: 1_000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum ProgramError {
    #[error("call stack exceeded {max_depth} frames")]
    DepthExceeded { max_depth: usize },
    #[error("call{proc} refers to an undefined subprocess")]
    DanglingCall { proc: u8 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Body {
    Main,
    Proc(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Frame {
    body: Body,
    pc: usize,
}

/// Depth-first expansion of a program into primitive actions.
///
/// A call whose caller has nothing left to run replaces the caller's frame
/// (tail call), so `P1 = [.., call1]` loops in constant stack space. A run
/// of calls with no primitive in between that returns to a stack it has
/// already been in can never produce an action; it is reported as
/// [`ProgramError::DepthExceeded`].
#[derive(Debug, Clone)]
pub struct Unroller<'a> {
    program: &'a Program,
    stack: Vec<Frame>,
    max_depth: usize,
    /// Stacks seen at calls since the last primitive.
    silent: HashSet<Vec<Frame>>,
    fused: bool,
}

impl<'a> Unroller<'a> {
    pub fn new(program: &'a Program, max_depth: usize) -> Unroller<'a> {
        Unroller {
            program,
            stack: vec![Frame { body: Body::Main, pc: 0 }],
            max_depth,
            silent: HashSet::new(),
            fused: false,
        }
    }

    fn pop_finished(&mut self) {
        while let Some(top) = self.stack.last() {
            if top.pc >= self.program.body(top.body).len() {
                self.stack.pop();
            } else {
                break;
            }
        }
    }

    fn fail(&mut self, e: ProgramError) -> Option<Result<Action, ProgramError>> {
        self.fused = true;
        Some(Err(e))
    }
}

impl Iterator for Unroller<'_> {
    type Item = Result<Action, ProgramError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.fused {
            return None;
        }
        loop {
            self.pop_finished();
            let top = self.stack.last_mut()?;
            let ins = self.program.body(top.body)[top.pc];
            top.pc += 1;
            match ins {
                Instruction::Primitive(a) => {
                    if !self.silent.is_empty() {
                        self.silent.clear();
                    }
                    return Some(Ok(a));
                }
                Instruction::Call(k) => {
                    if k == 0 || k as usize > self.program.procs.len() {
                        return self.fail(ProgramError::DanglingCall { proc: k });
                    }
                    if !self.silent.insert(self.stack.clone()) {
                        return self.fail(ProgramError::DepthExceeded { max_depth: self.max_depth });
                    }
                    self.pop_finished();
                    if self.stack.len() >= self.max_depth {
                        return self.fail(ProgramError::DepthExceeded { max_depth: self.max_depth });
                    }
                    self.stack.push(Frame { body: Body::Proc(k as usize - 1), pc: 0 });
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flattened {
    pub actions: Vec<Action>,
    /// The unrolling continues past `limits.max_steps`.
    pub truncated: bool,
}

/// Syntactic flattening, independent of any puzzle.
pub fn flatten(p: &Program, limits: ExecutionLimits) -> Result<Flattened, ProgramError> {
    let mut it = Unroller::new(p, limits.max_depth);
    let mut actions = Vec::new();
    while actions.len() < limits.max_steps {
        match it.next() {
            None => return Ok(Flattened { actions, truncated: false }),
            Some(Ok(a)) => actions.push(a),
            Some(Err(e)) => return Err(e),
        }
    }
    match it.next() {
        None => Ok(Flattened { actions, truncated: false }),
        Some(Err(e @ ProgramError::DanglingCall { .. })) => Err(e),
        Some(_) => Ok(Flattened { actions, truncated: true }),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExecutionStatus {
    Completed,
    ProgramEnded,
    StepBudgetExhausted,
    DepthExceeded,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExecutionTrace {
    pub actions: Vec<Action>,
    /// `states[0]` is the start state; `states[i + 1]` follows `actions[i]`.
    pub states: Vec<WorldState>,
    pub status: ExecutionStatus,
}

impl ExecutionTrace {
    pub fn final_state(&self) -> &WorldState {
        self.states.last().expect("trace has a start state")
    }

    pub fn completed(&self) -> bool {
        self.status == ExecutionStatus::Completed
    }

    pub fn to_export(&self) -> TraceExport {
        TraceExport {
            actions: self.actions.iter().map(|a| a.token().to_string()).collect(),
            frames: self
                .states
                .iter()
                .map(|s| TraceFrame {
                    x: s.pose.x,
                    y: s.pose.y,
                    dir: s.pose.heading.letter().to_string(),
                    lit_bits: s.lit,
                })
                .collect(),
            status: self.status,
        }
    }
}

/// Wire form of a trace, used by the CLI, the API and the C ABI.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceExport {
    pub actions: Vec<String>,
    pub frames: Vec<TraceFrame>,
    pub status: ExecutionStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceFrame {
    pub x: usize,
    pub y: usize,
    pub dir: String,
    pub lit_bits: u64,
}

/// Runs `p` from the puzzle's start. Completion is checked after every
/// primitive, so a recursive program stops as soon as the last light is on.
pub fn execute(
    puzzle: &Puzzle,
    p: &Program,
    limits: ExecutionLimits,
) -> Result<ExecutionTrace, ProgramError> {
    let mut state = puzzle.initial_state();
    let mut actions = Vec::new();
    let mut states = vec![state];
    let finish = |actions, states, status| Ok(ExecutionTrace { actions, states, status });
    if puzzle.is_complete(&state) {
        return finish(actions, states, ExecutionStatus::Completed);
    }
    let mut it = Unroller::new(p, limits.max_depth);
    loop {
        match it.next() {
            None => return finish(actions, states, ExecutionStatus::ProgramEnded),
            Some(Err(ProgramError::DepthExceeded { .. })) => {
                return finish(actions, states, ExecutionStatus::DepthExceeded)
            }
            Some(Err(e)) => return Err(e),
            Some(Ok(a)) => {
                if actions.len() == limits.max_steps {
                    return finish(actions, states, ExecutionStatus::StepBudgetExhausted);
                }
                state = puzzle.step(state, a).0;
                actions.push(a);
                states.push(state);
                if puzzle.is_complete(&state) {
                    return finish(actions, states, ExecutionStatus::Completed);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "frame", content = "index", rename_all = "snake_case")]
pub enum Location {
    Main,
    /// 1-based subprocess number.
    Proc(usize),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    SubprocessNotPermitted,
    ProcIdOutOfRange { proc: u8, allowed: usize },
    DanglingCall { proc: u8 },
    TooManyProcs { count: usize, allowed: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub location: Location,
    /// Instruction position within the frame.
    pub position: usize,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let at = match self.location {
            Location::Main => format!("main[{}]", self.position),
            Location::Proc(k) => format!("proc{}[{}]", k, self.position),
        };
        match &self.kind {
            ViolationKind::SubprocessNotPermitted => write!(f, "{at}: subprocess use not permitted"),
            ViolationKind::ProcIdOutOfRange { proc, allowed } => {
                write!(f, "{at}: call{proc} exceeds the {allowed} available subprocesses")
            }
            ViolationKind::DanglingCall { proc } => {
                write!(f, "{at}: call{proc} refers to an undefined subprocess")
            }
            ViolationKind::TooManyProcs { count, allowed } => {
                write!(f, "{at}: {count} subprocesses defined, {allowed} allowed")
            }
        }
    }
}

/// Checks a program against a condition's subprocess rules. Lengths are
/// never limited.
pub fn validate_program(p: &Program, condition: &ConditionSpec) -> Result<(), Vec<Violation>> {
    let allowed = condition.subprocesses_allowed;
    let mut out = Vec::new();
    if allowed == 0 {
        for (k, body) in p.procs.iter().enumerate() {
            if !body.is_empty() {
                out.push(Violation {
                    location: Location::Proc(k + 1),
                    position: 0,
                    kind: ViolationKind::SubprocessNotPermitted,
                });
            }
        }
    } else if p.procs.len() > allowed {
        out.push(Violation {
            location: Location::Proc(allowed + 1),
            position: 0,
            kind: ViolationKind::TooManyProcs { count: p.procs.len(), allowed },
        });
    }
    let frames = std::iter::once((Location::Main, &p.main))
        .chain(p.procs.iter().enumerate().map(|(k, b)| (Location::Proc(k + 1), b)));
    for (location, body) in frames {
        for (position, ins) in body.iter().enumerate() {
            let Instruction::Call(k) = *ins else { continue };
            if allowed == 0 {
                out.push(Violation { location, position, kind: ViolationKind::SubprocessNotPermitted });
            } else if k as usize > allowed {
                out.push(Violation {
                    location,
                    position,
                    kind: ViolationKind::ProcIdOutOfRange { proc: k, allowed },
                });
            }
            if k == 0 || k as usize > p.procs.len() {
                out.push(Violation { location, position, kind: ViolationKind::DanglingCall { proc: k } });
            }
        }
    }
    if out.is_empty() {
        Ok(())
    } else {
        Err(out)
    }
}
