//! Lightbot: a deterministic block-world MDP with a hierarchical program
//! language on top of it.
//!
//! The crate is split along the lines of the problem:
//!
//! * [`world`] holds the grid, the robot kinematics and the five primitive
//!   actions, plus the puzzle file format.
//! * [`program`] is the instruction language: main program plus up to four
//!   subprocesses, length accounting, flattening and the interpreter.
//! * [`compress`] turns a flat action sequence back into a hierarchical
//!   program and scores how compressible it was.
//! * [`solver`] finds shortest flat solutions exactly (BFS), and [`ppo`]
//!   finds them by reinforcement learning.
//! * [`analysis`] computes the per-puzzle statistics over solution pools.
//! * [`service`] runs experiment sessions and exposes the `/v1/` JSON API.

pub mod analysis;
pub mod compress;
pub mod ppo;
pub mod program;
pub mod service;
pub mod solver;
pub mod world;

pub use compress::{compress, CompressionConfig, CompressionResult};
pub use program::{
    execute, flatten, program_length, ExecutionLimits, ExecutionStatus, ExecutionTrace,
    Instruction, Program,
};
pub use world::{Action, Heading, Pose, Puzzle, Tile, WorldState};
