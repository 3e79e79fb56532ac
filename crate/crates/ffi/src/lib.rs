//! C ABI over the lightbot core library.
//!
//! Objects are opaque heap handles created by `*_parse` / `lb_execute` and
//! released with the matching `*_free`. Every fallible call returns an
//! [`LbStatus`]; on failure a message is available from
//! [`lb_last_error_message`] until the next failing call on the same thread.
//! Strings returned through out-parameters are owned by the caller and must
//! be released with [`lb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use lightbot::compress::{compress, CompressionConfig};
use lightbot::program::{execute, program_length, ExecutionLimits, ExecutionStatus, ExecutionTrace, Program};
use lightbot::solver::bfs_shortest;
use lightbot::world::{Action, Puzzle};

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Parse = 3,
    Execution = 4,
    Unsolvable = 5,
    Compression = 6,
    Panic = 7,
}

/// How an execution ended.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LbExecStatus {
    Completed = 0,
    ProgramEnded = 1,
    StepBudgetExhausted = 2,
    DepthExceeded = 3,
}

impl From<ExecutionStatus> for LbExecStatus {
    fn from(s: ExecutionStatus) -> Self {
        match s {
            ExecutionStatus::Completed => LbExecStatus::Completed,
            ExecutionStatus::ProgramEnded => LbExecStatus::ProgramEnded,
            ExecutionStatus::StepBudgetExhausted => LbExecStatus::StepBudgetExhausted,
            ExecutionStatus::DepthExceeded => LbExecStatus::DepthExceeded,
        }
    }
}

/// A validated puzzle.
pub struct LbPuzzle(Puzzle);

/// A hierarchical program.
pub struct LbProgram(Program);

/// The result of running a program on a puzzle.
pub struct LbTrace(ExecutionTrace);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

type Fallible<T> = Result<T, (LbStatus, String)>;

fn guard(f: impl FnOnce() -> Fallible<()>) -> LbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => LbStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            LbStatus::Panic
        }
    }
}

unsafe fn text<'a>(s: *const c_char) -> Fallible<&'a str> {
    if s.is_null() {
        return Err((LbStatus::NullPointer, "null string".into()));
    }
    CStr::from_ptr(s).to_str().map_err(|e| (LbStatus::InvalidUtf8, e.to_string()))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Fallible<&'a T> {
    p.as_ref().ok_or_else(|| (LbStatus::NullPointer, format!("null {what}")))
}

unsafe fn put<T>(out: *mut T, value: T) -> Fallible<()> {
    if out.is_null() {
        return Err((LbStatus::NullPointer, "null out-parameter".into()));
    }
    out.write(value);
    Ok(())
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s).expect("JSON has no interior NUL").into_raw()
}

/// Message for the last failing call on this thread, or NULL. The pointer
/// stays valid until the next failing call on this thread.
#[no_mangle]
pub extern "C" fn lb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version, a static string.
#[no_mangle]
pub extern "C" fn lb_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Parses a puzzle document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_puzzle_parse(json: *const c_char, out: *mut *mut LbPuzzle) -> LbStatus {
    guard(|| {
        let p = Puzzle::from_text(text(json)?).map_err(|e| (LbStatus::Parse, e.to_string()))?;
        put(out, Box::into_raw(Box::new(LbPuzzle(p))))
    })
}

/// # Safety
/// `puzzle` must come from [`lb_puzzle_parse`] and not be used afterwards.
/// NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lb_puzzle_free(puzzle: *mut LbPuzzle) {
    if !puzzle.is_null() {
        drop(Box::from_raw(puzzle));
    }
}

/// Parses a program document.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_program_parse(json: *const c_char, out: *mut *mut LbProgram) -> LbStatus {
    guard(|| {
        let p = Program::from_text(text(json)?).map_err(|e| (LbStatus::Parse, e.to_string()))?;
        put(out, Box::into_raw(Box::new(LbProgram(p))))
    })
}

/// # Safety
/// `program` must come from [`lb_program_parse`] and not be used
/// afterwards. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn lb_program_free(program: *mut LbProgram) {
    if !program.is_null() {
        drop(Box::from_raw(program));
    }
}

/// Stored instruction count over main and every subprocess.
///
/// # Safety
/// `program` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_program_length(program: *const LbProgram, out: *mut usize) -> LbStatus {
    guard(|| put(out, program_length(&handle(program, "program")?.0)))
}

/// Runs `program` on `puzzle`. Zero limits select the defaults.
///
/// # Safety
/// Both handles must be live and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_execute(
    puzzle: *const LbPuzzle,
    program: *const LbProgram,
    max_steps: usize,
    max_depth: usize,
    out: *mut *mut LbTrace,
) -> LbStatus {
    guard(|| {
        let (puzzle, program) = (handle(puzzle, "puzzle")?, handle(program, "program")?);
        let d = ExecutionLimits::default();
        let limits = ExecutionLimits::new(
            if max_steps == 0 { d.max_steps } else { max_steps },
            if max_depth == 0 { d.max_depth } else { max_depth },
        );
        let t = execute(&puzzle.0, &program.0, limits).map_err(|e| (LbStatus::Execution, e.to_string()))?;
        put(out, Box::into_raw(Box::new(LbTrace(t))))
    })
}

/// # Safety
/// `trace` must come from [`lb_execute`] and not be used afterwards. NULL
/// is ignored.
#[no_mangle]
pub unsafe extern "C" fn lb_trace_free(trace: *mut LbTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// # Safety
/// `trace` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_trace_status(trace: *const LbTrace, out: *mut LbExecStatus) -> LbStatus {
    guard(|| put(out, handle(trace, "trace")?.0.status.into()))
}

/// Number of primitive actions executed.
///
/// # Safety
/// `trace` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_trace_action_count(trace: *const LbTrace, out: *mut usize) -> LbStatus {
    guard(|| put(out, handle(trace, "trace")?.0.actions.len()))
}

/// Lights on in the final state.
///
/// # Safety
/// `trace` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_trace_lights_on(trace: *const LbTrace, out: *mut u32) -> LbStatus {
    guard(|| put(out, handle(trace, "trace")?.0.final_state().lights_on()))
}

/// Trace as JSON (`actions`, `frames`, `status`).
///
/// # Safety
/// `trace` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_trace_to_json(trace: *const LbTrace, out: *mut *mut c_char) -> LbStatus {
    guard(|| {
        let json = serde_json::to_string(&handle(trace, "trace")?.0.to_export()).expect("trace serializes");
        put(out, owned_string(json))
    })
}

/// Compresses a JSON array of action tokens (`"walk"`, `"jump"`, `"left"`,
/// `"right"`, `"light"`) and writes the summary JSON.
///
/// # Safety
/// `actions_json` must be a NUL-terminated string and `out` a writable
/// pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_compress(
    actions_json: *const c_char,
    max_procs: usize,
    recursion: bool,
    out: *mut *mut c_char,
) -> LbStatus {
    guard(|| {
        let actions: Vec<Action> =
            serde_json::from_str(text(actions_json)?).map_err(|e| (LbStatus::Parse, e.to_string()))?;
        let config = CompressionConfig { max_procs, recursion, ..Default::default() };
        let r = compress(&actions, &config).map_err(|e| (LbStatus::Compression, e.to_string()))?;
        put(out, owned_string(serde_json::to_string(&r.summary()).expect("summary serializes")))
    })
}

/// Shortest flat solution as a JSON array of action tokens.
/// Returns `LB_STATUS_UNSOLVABLE` if no sequence completes the puzzle.
///
/// # Safety
/// `puzzle` must be a live handle and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn lb_solve_exact(puzzle: *const LbPuzzle, out: *mut *mut c_char) -> LbStatus {
    guard(|| {
        let path = bfs_shortest(&handle(puzzle, "puzzle")?.0)
            .ok_or_else(|| (LbStatus::Unsolvable, "no action sequence completes the puzzle".into()))?;
        put(out, owned_string(serde_json::to_string(&path).expect("actions serialize")))
    })
}

/// # Safety
/// `s` must come from this library and not be used afterwards. NULL is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn lb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
