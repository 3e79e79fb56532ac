//! Exact shortest flat solutions.
//!
//! [`bfs_shortest`] is a breadth-first search over `(pose, lit)` states.
//! [`enumerate_shortest`] is the brute-force reference: it accounts for
//! every one of the `5^m` action sequences of each length `m`, grouping
//! sequences that reach the same state so the count stays exact without
//! materialising them.

use std::collections::{HashMap, VecDeque};

use crate::world::{Action, Puzzle, WorldState};

/// Puzzles with at most this many states are searched with flat arrays.
const DENSE_LIMIT: u128 = 1 << 22;

/// Maps states to array slots when the state space is small enough.
struct Dense {
    width: usize,
    lights: u32,
}

impl Dense {
    fn new(puzzle: &Puzzle) -> Option<(Dense, usize)> {
        let size = puzzle.state_space_size();
        (size <= DENSE_LIMIT).then(|| {
            (Dense { width: puzzle.width(), lights: puzzle.num_lights() as u32 }, size as usize)
        })
    }

    fn slot(&self, s: &WorldState) -> usize {
        let cell = s.pose.y * self.width + s.pose.x;
        (((cell * 4 + s.pose.heading.index()) as u64) << self.lights | s.lit) as usize
    }
}

/// A shortest action sequence that lights every light, or `None` if no
/// sequence does. Actions are expanded in [`Action::ALL`] order from a FIFO
/// queue, so the returned path is deterministic.
pub fn bfs_shortest(puzzle: &Puzzle) -> Option<Vec<Action>> {
    let start = puzzle.initial_state();
    if puzzle.is_complete(&start) {
        return Some(Vec::new());
    }
    match Dense::new(puzzle) {
        Some((dense, size)) => {
            let mut parent: Vec<Option<(WorldState, Action)>> = vec![None; size];
            let mut seen = vec![false; size];
            seen[dense.slot(&start)] = true;
            bfs(puzzle, start, |s| !std::mem::replace(&mut seen[dense.slot(s)], true), |s, link| {
                parent[dense.slot(s)] = Some(link)
            })
            .map(|end| walk_back(start, end, |s| parent[dense.slot(s)].expect("visited state has a parent")))
        }
        None => {
            let mut parent: HashMap<WorldState, (WorldState, Action)> = HashMap::new();
            let mut seen = std::collections::HashSet::from([start]);
            bfs(puzzle, start, |s| seen.insert(*s), |s, link| {
                parent.insert(*s, link);
            })
            .map(|end| walk_back(start, end, |s| parent[s]))
        }
    }
}

/// Returns the first complete state and the action that reached it.
fn bfs(
    puzzle: &Puzzle,
    start: WorldState,
    mut first_visit: impl FnMut(&WorldState) -> bool,
    mut link: impl FnMut(&WorldState, (WorldState, Action)),
) -> Option<(WorldState, (WorldState, Action))> {
    let mut queue = VecDeque::from([start]);
    while let Some(state) = queue.pop_front() {
        for action in Action::ALL {
            let (next, _) = puzzle.step(state, action);
            if !first_visit(&next) {
                continue;
            }
            if puzzle.is_complete(&next) {
                return Some((next, (state, action)));
            }
            link(&next, (state, action));
            queue.push_back(next);
        }
    }
    None
}

fn walk_back(
    start: WorldState,
    (_, (mut cur, last)): (WorldState, (WorldState, Action)),
    parent: impl Fn(&WorldState) -> (WorldState, Action),
) -> Vec<Action> {
    let mut path = vec![last];
    while cur != start {
        let (prev, a) = parent(&cur);
        path.push(a);
        cur = prev;
    }
    path.reverse();
    path
}

/// Minimal completing length up to `max_len` and the number of action
/// sequences of that length that complete the puzzle.
///
/// Every sequence of length `m` either completes for the first time at some
/// step `<= m` or reaches a non-complete state; both groups are tracked, so
/// the count equals what literal enumeration of `5^m` sequences would give.
pub fn enumerate_shortest(puzzle: &Puzzle, max_len: usize) -> Option<(usize, u128)> {
    let start = puzzle.initial_state();
    if puzzle.is_complete(&start) {
        return Some((0, 1));
    }
    let Some((dense, size)) = Dense::new(puzzle) else {
        return enumerate_sparse(puzzle, start, max_len);
    };
    let mut counts = vec![0u128; size];
    let mut frontier: Vec<(WorldState, u128)> = vec![(start, 1)];
    let mut next: Vec<WorldState> = Vec::new();
    for len in 1..=max_len {
        let mut completing: u128 = 0;
        for &(state, count) in &frontier {
            for action in Action::ALL {
                let (s, _) = puzzle.step(state, action);
                if puzzle.is_complete(&s) {
                    completing += count;
                    continue;
                }
                let c = &mut counts[dense.slot(&s)];
                if *c == 0 {
                    next.push(s);
                }
                *c += count;
            }
        }
        if completing > 0 {
            return Some((len, completing));
        }
        frontier.clear();
        for s in next.drain(..) {
            frontier.push((s, std::mem::take(&mut counts[dense.slot(&s)])));
        }
    }
    None
}

fn enumerate_sparse(puzzle: &Puzzle, start: WorldState, max_len: usize) -> Option<(usize, u128)> {
    let mut frontier: HashMap<WorldState, u128> = HashMap::from([(start, 1)]);
    for len in 1..=max_len {
        let mut next: HashMap<WorldState, u128> = HashMap::with_capacity(frontier.len());
        let mut completing: u128 = 0;
        for (&state, &count) in &frontier {
            for action in Action::ALL {
                let (s, _) = puzzle.step(state, action);
                if puzzle.is_complete(&s) {
                    completing += count;
                } else {
                    *next.entry(s).or_default() += count;
                }
            }
        }
        if completing > 0 {
            return Some((len, completing));
        }
        frontier = next;
    }
    None
}
