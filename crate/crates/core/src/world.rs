//! The Lightbot block world.
//!
//! A puzzle is a rectangular grid of tiles, each with a height and an
//! optional light. The robot has a position and a heading; the goal is to
//! light every light tile. Everything here is total: an action that cannot
//! be carried out leaves the state unchanged.
//!
//! Conventions: the grid origin is the top-left tile, `y` grows southward,
//! and headings are ordered N, E, S, W wherever an ordering is observable
//! (state encoding, file format).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Lights are tracked in a `u64` bitmask.
pub const MAX_LIGHTS: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn turn_right(self) -> Heading {
        Heading::ALL[(self.index() + 1) % 4]
    }

    pub fn turn_left(self) -> Heading {
        Heading::ALL[(self.index() + 3) % 4]
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn letter(self) -> &'static str {
        match self {
            Heading::North => "N",
            Heading::East => "E",
            Heading::South => "S",
            Heading::West => "W",
        }
    }
}

impl FromStr for Heading {
    type Err = PuzzleError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "N" => Ok(Heading::North),
            "E" => Ok(Heading::East),
            "S" => Ok(Heading::South),
            "W" => Ok(Heading::West),
            other => Err(PuzzleError::BadHeading(other.to_string())),
        }
    }
}

impl fmt::Display for Heading {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

/// The five primitive actions. Serialized as their tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    #[serde(rename = "walk")]
    Walk,
    #[serde(rename = "jump")]
    Jump,
    #[serde(rename = "left")]
    TurnLeft,
    #[serde(rename = "right")]
    TurnRight,
    #[serde(rename = "light")]
    Light,
}

impl Action {
    /// Fixed order, also used as the breadth-first expansion order and as
    /// the index of the policy output.
    pub const ALL: [Action; 5] = [
        Action::Walk,
        Action::Jump,
        Action::TurnLeft,
        Action::TurnRight,
        Action::Light,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Action> {
        Action::ALL.get(i).copied()
    }

    /// Token used in program and trace files.
    pub fn token(self) -> &'static str {
        match self {
            Action::Walk => "walk",
            Action::Jump => "jump",
            Action::TurnLeft => "left",
            Action::TurnRight => "right",
            Action::Light => "light",
        }
    }

    pub fn from_token(s: &str) -> Option<Action> {
        match s {
            "walk" => Some(Action::Walk),
            "jump" => Some(Action::Jump),
            "left" => Some(Action::TurnLeft),
            "right" => Some(Action::TurnRight),
            "light" => Some(Action::Light),
            _ => None,
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct Tile {
    pub height: u32,
    pub is_light: bool,
}

impl Tile {
    pub fn floor(height: u32) -> Tile {
        Tile { height, is_light: false }
    }

    pub fn light(height: u32) -> Tile {
        Tile { height, is_light: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pose {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
}

impl Pose {
    pub fn new(x: usize, y: usize, heading: Heading) -> Pose {
        Pose { x, y, heading }
    }
}

/// Robot pose plus the set of lit lights (bit `i` refers to
/// `puzzle.light_index()[i]`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WorldState {
    pub pose: Pose,
    pub lit: u64,
}

impl WorldState {
    pub fn lights_on(&self) -> u32 {
        self.lit.count_ones()
    }
}

/// What a single step did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StepEvent {
    pub moved: bool,
    pub light_turned_on: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PuzzleError {
    #[error("invalid puzzle document: {0}")]
    Syntax(String),
    #[error("grid must have at least one row and one column (width {width}, height {height})")]
    EmptyGrid { width: i64, height: i64 },
    #[error("`height` is {declared} but `tiles` has {found} rows")]
    RowCount { declared: usize, found: usize },
    #[error("row {row} has {found} tiles, expected `width` = {expected}")]
    RaggedRow { row: usize, expected: usize, found: usize },
    #[error("tile ({x},{y}) has negative height {height}")]
    NegativeHeight { x: usize, y: usize, height: i64 },
    #[error("tile ({x},{y}) height {height} is too large")]
    HeightOverflow { x: usize, y: usize, height: i64 },
    #[error("`start` ({x},{y}) is outside the {width}x{height} grid")]
    StartOutOfBounds { x: i64, y: i64, width: usize, height: usize },
    #[error("`start.dir` must be one of N, E, S, W, got {0:?}")]
    BadHeading(String),
    #[error("no light tiles")]
    NoLights,
    #[error("{0} light tiles, at most 64 are supported")]
    TooManyLights(usize),
}

/// A validated puzzle.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Puzzle {
    name: String,
    width: usize,
    height: usize,
    tiles: Vec<Tile>,
    start: Pose,
    light_index: Vec<(usize, usize)>,
    light_of_tile: Vec<Option<u8>>,
    max_height: u32,
}

impl Puzzle {
    /// Builds a puzzle from row-major tiles, enforcing every invariant
    /// including "at least one light".
    pub fn new(
        name: impl Into<String>,
        width: usize,
        height: usize,
        tiles: Vec<Tile>,
        start: Pose,
    ) -> Result<Puzzle, PuzzleError> {
        let p = Puzzle::new_unchecked_lights(name, width, height, tiles, start)?;
        if p.light_index.is_empty() {
            return Err(PuzzleError::NoLights);
        }
        Ok(p)
    }

    /// Like [`Puzzle::new`] but allows a puzzle with no lights. Such a
    /// puzzle is trivially complete; it is only useful in tests.
    pub fn new_unchecked_lights(
        name: impl Into<String>,
        width: usize,
        height: usize,
        tiles: Vec<Tile>,
        start: Pose,
    ) -> Result<Puzzle, PuzzleError> {
        if width == 0 || height == 0 {
            return Err(PuzzleError::EmptyGrid { width: width as i64, height: height as i64 });
        }
        if tiles.len() != width * height {
            return Err(PuzzleError::RowCount { declared: height, found: tiles.len() / width });
        }
        if start.x >= width || start.y >= height {
            return Err(PuzzleError::StartOutOfBounds {
                x: start.x as i64,
                y: start.y as i64,
                width,
                height,
            });
        }
        let mut light_index = Vec::new();
        let mut light_of_tile = vec![None; tiles.len()];
        for (i, t) in tiles.iter().enumerate() {
            if t.is_light {
                if light_index.len() == MAX_LIGHTS {
                    let total = tiles.iter().filter(|t| t.is_light).count();
                    return Err(PuzzleError::TooManyLights(total));
                }
                light_of_tile[i] = Some(light_index.len() as u8);
                light_index.push((i % width, i / width));
            }
        }
        let max_height = tiles.iter().map(|t| t.height).max().unwrap_or(0);
        Ok(Puzzle {
            name: name.into(),
            width,
            height,
            tiles,
            start,
            light_index,
            light_of_tile,
            max_height,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn start_pose(&self) -> Pose {
        self.start
    }

    pub fn max_height(&self) -> u32 {
        self.max_height
    }

    pub fn tile(&self, x: usize, y: usize) -> Option<&Tile> {
        if x < self.width && y < self.height {
            self.tiles.get(y * self.width + x)
        } else {
            None
        }
    }

    pub fn tiles(&self) -> &[Tile] {
        &self.tiles
    }

    /// Coordinates of every light tile, row-major.
    pub fn light_index(&self) -> &[(usize, usize)] {
        &self.light_index
    }

    pub fn num_lights(&self) -> usize {
        self.light_index.len()
    }

    /// Bitmask with every light set.
    pub fn all_lit(&self) -> u64 {
        match self.light_index.len() {
            0 => 0,
            64 => u64::MAX,
            n => (1u64 << n) - 1,
        }
    }

    pub fn initial_state(&self) -> WorldState {
        WorldState { pose: self.start, lit: 0 }
    }

    /// Size of the full state space `W * H * 4 * 2^L`, saturating.
    pub fn state_space_size(&self) -> u128 {
        let base = (self.width * self.height * 4) as u128;
        base.saturating_mul(1u128 << self.light_index.len().min(100))
    }

    /// Same grid and lights, different start pose.
    pub fn with_start(&self, start: Pose) -> Result<Puzzle, PuzzleError> {
        Puzzle::new_unchecked_lights(
            self.name.clone(),
            self.width,
            self.height,
            self.tiles.clone(),
            start,
        )
    }

    fn neighbour(&self, pose: Pose) -> Option<(usize, usize)> {
        let (dx, dy) = pose.heading.delta();
        let nx = pose.x.checked_add_signed(dx)?;
        let ny = pose.y.checked_add_signed(dy)?;
        (nx < self.width && ny < self.height).then_some((nx, ny))
    }

    /// The transition function.
    pub fn step(&self, state: WorldState, action: Action) -> (WorldState, StepEvent) {
        let pose = state.pose;
        let here = self.tiles[pose.y * self.width + pose.x];
        let mut next = state;
        let mut event = StepEvent::default();
        match action {
            Action::TurnLeft => next.pose.heading = pose.heading.turn_left(),
            Action::TurnRight => next.pose.heading = pose.heading.turn_right(),
            Action::Walk | Action::Jump => {
                if let Some((nx, ny)) = self.neighbour(pose) {
                    let target = self.tiles[ny * self.width + nx].height as i64;
                    let delta = target - here.height as i64;
                    let ok = match action {
                        Action::Walk => delta == 0,
                        _ => delta == 1 || delta <= -1,
                    };
                    if ok {
                        next.pose.x = nx;
                        next.pose.y = ny;
                        event.moved = true;
                    }
                }
            }
            Action::Light => {
                if let Some(i) = self.light_of_tile[pose.y * self.width + pose.x] {
                    let bit = 1u64 << i;
                    if state.lit & bit == 0 {
                        next.lit |= bit;
                        event.light_turned_on = Some(i as usize);
                    }
                }
            }
        }
        (next, event)
    }

    pub fn is_complete(&self, state: &WorldState) -> bool {
        state.lit & self.all_lit() == self.all_lit()
    }

    /// Length of [`Puzzle::encode_state`] output.
    pub fn feature_len(&self) -> usize {
        4 + (self.max_height as usize + 1) + self.width + self.height + self.light_index.len()
    }

    /// Binary feature vector: heading one-hot (N,E,S,W), current tile
    /// height one-hot over `0..=max_height`, x one-hot, y one-hot, then one
    /// entry per light.
    pub fn encode_state(&self, state: &WorldState) -> Vec<f64> {
        let mut out = vec![0.0; self.feature_len()];
        self.encode_into(state, &mut out);
        out
    }

    pub fn encode_into(&self, state: &WorldState, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.feature_len());
        out.fill(0.0);
        let pose = state.pose;
        let mut off = 0;
        out[off + pose.heading.index()] = 1.0;
        off += 4;
        let h = self.tiles[pose.y * self.width + pose.x].height as usize;
        out[off + h] = 1.0;
        off += self.max_height as usize + 1;
        out[off + pose.x] = 1.0;
        off += self.width;
        out[off + pose.y] = 1.0;
        off += self.height;
        for i in 0..self.light_index.len() {
            if state.lit >> i & 1 == 1 {
                out[off + i] = 1.0;
            }
        }
    }

    /// Canonical text form: compact JSON, keys in file order, LF-terminated.
    pub fn to_text(&self) -> String {
        let doc = PuzzleDoc {
            width: self.width as i64,
            height: self.height as i64,
            tiles: self
                .tiles
                .chunks(self.width)
                .map(|row| {
                    row.iter()
                        .map(|t| TileDoc { h: t.height as i64, light: t.is_light })
                        .collect()
                })
                .collect(),
            start: StartDoc {
                x: self.start.x as i64,
                y: self.start.y as i64,
                dir: self.start.heading.letter().to_string(),
            },
            name: self.name.clone(),
        };
        let mut s = serde_json::to_string(&doc).expect("puzzle serializes");
        s.push('\n');
        s
    }

    /// Parses and validates a puzzle document.
    pub fn from_text(text: &str) -> Result<Puzzle, PuzzleError> {
        let doc: PuzzleDoc =
            serde_json::from_str(text).map_err(|e| PuzzleError::Syntax(e.to_string()))?;
        doc.into_puzzle()
    }

    /// Minimal puzzle builder from an ASCII picture, handy in tests and for
    /// authoring. Each cell is a height digit, optionally followed by `*`
    /// for a light; cells are whitespace separated.
    pub fn from_ascii(name: &str, rows: &[&str], start: Pose) -> Result<Puzzle, PuzzleError> {
        let mut tiles = Vec::new();
        let mut width = None;
        for (y, row) in rows.iter().enumerate() {
            let cells: Vec<&str> = row.split_whitespace().collect();
            match width {
                None => width = Some(cells.len()),
                Some(w) if w != cells.len() => {
                    return Err(PuzzleError::RaggedRow { row: y, expected: w, found: cells.len() })
                }
                _ => {}
            }
            for c in cells {
                let (digits, light) = match c.strip_suffix('*') {
                    Some(d) => (d, true),
                    None => (c, false),
                };
                let h: u32 = digits.parse().map_err(|_| PuzzleError::Syntax(format!("bad cell {c:?}")))?;
                tiles.push(Tile { height: h, is_light: light });
            }
        }
        Puzzle::new(name, width.unwrap_or(0), rows.len(), tiles, start)
    }
}

#[derive(Serialize, Deserialize)]
struct TileDoc {
    h: i64,
    light: bool,
}

#[derive(Serialize, Deserialize)]
struct StartDoc {
    x: i64,
    y: i64,
    dir: String,
}

#[derive(Serialize, Deserialize)]
struct PuzzleDoc {
    width: i64,
    height: i64,
    tiles: Vec<Vec<TileDoc>>,
    start: StartDoc,
    #[serde(default)]
    name: String,
}

impl PuzzleDoc {
    fn into_puzzle(self) -> Result<Puzzle, PuzzleError> {
        if self.width < 1 || self.height < 1 {
            return Err(PuzzleError::EmptyGrid { width: self.width, height: self.height });
        }
        let (width, height) = (self.width as usize, self.height as usize);
        if self.tiles.len() != height {
            return Err(PuzzleError::RowCount { declared: height, found: self.tiles.len() });
        }
        let mut tiles = Vec::with_capacity(width * height);
        for (y, row) in self.tiles.iter().enumerate() {
            if row.len() != width {
                return Err(PuzzleError::RaggedRow { row: y, expected: width, found: row.len() });
            }
            for (x, t) in row.iter().enumerate() {
                if t.h < 0 {
                    return Err(PuzzleError::NegativeHeight { x, y, height: t.h });
                }
                let h = u32::try_from(t.h)
                    .map_err(|_| PuzzleError::HeightOverflow { x, y, height: t.h })?;
                tiles.push(Tile { height: h, is_light: t.light });
            }
        }
        let StartDoc { x, y, dir } = self.start;
        if x < 0 || y < 0 || x as usize >= width || y as usize >= height {
            return Err(PuzzleError::StartOutOfBounds { x, y, width, height });
        }
        let heading: Heading = dir.parse()?;
        Puzzle::new(self.name, width, height, tiles, Pose::new(x as usize, y as usize, heading))
    }
}
