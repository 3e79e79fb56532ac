//! Greedy compression of a flat action sequence into a hierarchical program.
//!
//! Each round picks the repeated subsequence with the largest net saving,
//! stores it as a new subprocess and replaces its occurrences in the
//! working sequence by a call. Later rounds see those calls as ordinary
//! tokens, which is how nested subprocesses arise. When the rounds are done
//! and the main program is a single call repeated, the repetition is folded
//! into a recursive tail call.
//!
//! Occurrences are always counted greedily left to right without overlap.
//! A candidate of length `L` occurring `k` times saves `k*L - (k + L)`
//! stored instructions; ties go to the longer candidate, then to the one
//! that occurs first.

use std::collections::HashMap;

use num_rational::Ratio;
use serde::Serialize;
use thiserror::Error;

use crate::program::{program_length, Instruction, Program};
use crate::world::Action;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CompressionConfig {
    pub max_procs: usize,
    pub min_len: usize,
    pub min_reps: usize,
    /// Run the recursion pass after the extraction rounds.
    pub recursion: bool,
}

impl Default for CompressionConfig {
    fn default() -> Self {
        CompressionConfig { max_procs: 4, min_len: 2, min_reps: 2, recursion: true }
    }
}

impl CompressionConfig {
    fn check(&self) -> Result<(), CompressError> {
        if self.min_len < 2 || self.min_reps < 2 {
            return Err(CompressError::BadConfig { min_len: self.min_len, min_reps: self.min_reps });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum CompressError {
    #[error("cannot compress an empty sequence")]
    EmptySequence,
    #[error("min_len and min_reps must both be at least 2 (got {min_len}, {min_reps})")]
    BadConfig { min_len: usize, min_reps: usize },
    #[error("compressibility needs 1 <= compressed ({compressed}) <= flat ({flat})")]
    BadLengths { flat: usize, compressed: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Candidate {
    pub subsequence: Vec<Instruction>,
    pub occurrences: usize,
    pub savings: usize,
    /// Index of the first occurrence in the scanned sequence.
    pub first: usize,
}

impl Candidate {
    fn rank(&self) -> (usize, usize, std::cmp::Reverse<usize>) {
        (self.savings, self.subsequence.len(), std::cmp::Reverse(self.first))
    }
}

fn count_non_overlapping(positions: &[usize], len: usize) -> usize {
    let mut next_free = 0;
    let mut k = 0;
    for &p in positions {
        if p >= next_free {
            k += 1;
            next_free = p + len;
        }
    }
    k
}

/// The best subsequence to store next, if any qualifies.
pub fn find_best_candidate(seq: &[Instruction], config: &CompressionConfig) -> Option<Candidate> {
    let n = seq.len();
    let mut best: Option<Candidate> = None;
    let max_len = n / config.min_reps.max(1);
    for len in config.min_len..=max_len {
        let mut windows: HashMap<&[Instruction], Vec<usize>> = HashMap::new();
        for i in 0..=n - len {
            windows.entry(&seq[i..i + len]).or_default().push(i);
        }
        let mut any_repeat = false;
        for (window, positions) in &windows {
            if positions.len() < 2 {
                continue;
            }
            any_repeat = true;
            let k = count_non_overlapping(positions, len);
            if k < config.min_reps {
                continue;
            }
            let cand = Candidate {
                subsequence: window.to_vec(),
                occurrences: k,
                savings: k * len - (k + len),
                first: positions[0],
            };
            if best.as_ref().is_none_or(|b| cand.rank() > b.rank()) {
                best = Some(cand);
            }
        }
        // A repeat of length len+1 contains a repeat of length len.
        if !any_repeat {
            break;
        }
    }
    best
}

fn replace_occurrences(seq: &[Instruction], pattern: &[Instruction], with: Instruction) -> Vec<Instruction> {
    let mut out = Vec::with_capacity(seq.len());
    let mut i = 0;
    while i < seq.len() {
        if seq[i..].starts_with(pattern) {
            out.push(with);
            i += pattern.len();
        } else {
            out.push(seq[i]);
            i += 1;
        }
    }
    out
}

/// If main is `[call k] * n` with `n >= 2`, appends `call k` to subprocess
/// `k` and shrinks main to a single call. Returns whether it fired.
pub fn recursion_pass(p: &Program) -> (Program, bool) {
    let Some(&first @ Instruction::Call(k)) = p.main.first() else {
        return (p.clone(), false);
    };
    let idx = k as usize;
    if p.main.len() < 2 || idx == 0 || idx > p.procs.len() || p.main.iter().any(|&i| i != first) {
        return (p.clone(), false);
    }
    let mut out = p.clone();
    out.procs[idx - 1].push(first);
    out.main = vec![first];
    (out, true)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CompressionResult {
    pub program: Program,
    pub flat_length: usize,
    pub compressed_length: usize,
    pub compressibility: Ratio<u64>,
    pub recursion_applied: bool,
}

impl CompressionResult {
    pub fn compressibility_f64(&self) -> f64 {
        *self.compressibility.numer() as f64 / *self.compressibility.denom() as f64
    }

    pub fn summary(&self) -> CompressionSummary<'_> {
        CompressionSummary {
            program: &self.program,
            flat_length: self.flat_length,
            compressed_length: self.compressed_length,
            compressibility: self.compressibility_f64(),
            compressibility_exact: self.compressibility.to_string(),
            recursion_applied: self.recursion_applied,
        }
    }
}

/// JSON record emitted by the `compress` command.
#[derive(Debug, Serialize)]
pub struct CompressionSummary<'a> {
    pub program: &'a Program,
    pub flat_length: usize,
    pub compressed_length: usize,
    pub compressibility: f64,
    pub compressibility_exact: String,
    pub recursion_applied: bool,
}

/// `(flat - compressed) / flat`, exactly.
pub fn compressibility(flat_length: usize, compressed_length: usize) -> Result<Ratio<u64>, CompressError> {
    if flat_length == 0 || compressed_length == 0 || compressed_length > flat_length {
        return Err(CompressError::BadLengths { flat: flat_length, compressed: compressed_length });
    }
    Ok(Ratio::new((flat_length - compressed_length) as u64, flat_length as u64))
}

pub fn compress(seq: &[Action], config: &CompressionConfig) -> Result<CompressionResult, CompressError> {
    config.check()?;
    if seq.is_empty() {
        return Err(CompressError::EmptySequence);
    }
    let mut work: Vec<Instruction> = seq.iter().map(|&a| a.into()).collect();
    let mut procs: Vec<Vec<Instruction>> = Vec::new();
    while procs.len() < config.max_procs {
        let Some(best) = find_best_candidate(&work, config) else { break };
        let call = Instruction::Call(procs.len() as u8 + 1);
        work = replace_occurrences(&work, &best.subsequence, call);
        procs.push(best.subsequence);
    }
    let mut program = Program { main: work, procs };
    let mut recursion_applied = false;
    if config.recursion {
        (program, recursion_applied) = recursion_pass(&program);
    }
    let compressed_length = program_length(&program);
    Ok(CompressionResult {
        compressibility: compressibility(seq.len(), compressed_length)?,
        program,
        flat_length: seq.len(),
        compressed_length,
        recursion_applied,
    })
}
