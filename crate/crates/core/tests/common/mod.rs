//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use lightbot::ppo::mlp::Mlp;
use lightbot::world::{Action, Heading, Pose, Puzzle, Tile};

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data")
}

pub fn load(rel: &str) -> Puzzle {
    let text = std::fs::read_to_string(data_dir().join(rel)).unwrap();
    Puzzle::from_text(&text).unwrap()
}

pub fn letters(s: &str) -> Vec<Action> {
    s.chars()
        .map(|c| match c {
            'W' => Action::Walk,
            'J' => Action::Jump,
            'L' => Action::TurnLeft,
            'R' => Action::TurnRight,
            'T' => Action::Light,
            _ => panic!("bad letter {c}"),
        })
        .collect()
}

/// Fewest tokens needed to write `s` using single actions and the given
/// blocks (each block costs one token wherever it matches).
fn min_parse(s: &[Action], blocks: &[&[Action]]) -> usize {
    let mut best = vec![usize::MAX; s.len() + 1];
    best[0] = 0;
    for i in 0..s.len() {
        if best[i] == usize::MAX {
            continue;
        }
        let here = best[i] + 1;
        best[i + 1] = best[i + 1].min(here);
        for b in blocks {
            if !b.is_empty() && s[i..].starts_with(b) {
                best[i + b.len()] = best[i + b.len()].min(here);
            }
        }
    }
    best[s.len()]
}

/// Smallest program length over every decomposition of `s` into a main
/// program and at most two non-recursive subprocesses, where the second
/// subprocess may call the first. Subprocess bodies range over all
/// substrings of `s` of length at least 2.
pub fn brute_force_two_proc_optimum(s: &[Action]) -> usize {
    let subs: Vec<&[Action]> = {
        let mut set = BTreeSet::new();
        for i in 0..s.len() {
            for j in i + 2..=s.len() {
                set.insert(&s[i..j]);
            }
        }
        set.into_iter().collect()
    };
    let mut best = s.len();
    for a in &subs {
        best = best.min(a.len() + min_parse(s, &[a]));
        for b in &subs {
            let cost = a.len() + min_parse(b, &[a]) + min_parse(s, &[a, b]);
            best = best.min(cost);
        }
    }
    best
}

/// Central finite differences of `f` at `params`.
pub fn numeric_grad(params: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut p = params.to_vec();
    (0..p.len())
        .map(|i| {
            let orig = p[i];
            p[i] = orig + h;
            let up = f(&p);
            p[i] = orig - h;
            let down = f(&p);
            p[i] = orig;
            (up - down) / (2.0 * h)
        })
        .collect()
}

/// Largest `|a - n| / max(|a|, |n|, floor)` over the components.
pub fn max_rel_err(analytic: &[f64], numeric: &[f64], floor: f64) -> f64 {
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
        .fold(0.0, f64::max)
}

pub fn with_params(net: &Mlp, params: &[f64]) -> Mlp {
    let mut n = net.clone();
    n.params.copy_from_slice(params);
    n
}

/// All height maps over `w x h` cells with heights in `0..=max_h`.
pub fn all_height_maps(w: usize, h: usize, max_h: u32) -> Vec<Vec<u32>> {
    let cells = w * h;
    let base = max_h as usize + 1;
    (0..base.pow(cells as u32))
        .map(|mut code| {
            (0..cells)
                .map(|_| {
                    let v = (code % base) as u32;
                    code /= base;
                    v
                })
                .collect()
        })
        .collect()
}

/// Every set of one or two light cells.
pub fn light_placements(cells: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = (0..cells).map(|i| vec![i]).collect();
    for i in 0..cells {
        for j in i + 1..cells {
            out.push(vec![i, j]);
        }
    }
    out
}

pub fn all_poses(w: usize, h: usize) -> Vec<Pose> {
    let mut out = Vec::new();
    for y in 0..h {
        for x in 0..w {
            for d in Heading::ALL {
                out.push(Pose::new(x, y, d));
            }
        }
    }
    out
}

pub fn build(w: usize, h: usize, heights: &[u32], lights: &[usize], start: Pose) -> Puzzle {
    let tiles = heights
        .iter()
        .enumerate()
        .map(|(i, &ht)| Tile { height: ht, is_light: lights.contains(&i) })
        .collect();
    Puzzle::new("family", w, h, tiles, start).unwrap()
}

/// Compares analytic and central-difference gradients of the policy
/// log-probability, the clipped-surrogate policy loss and the value loss on
/// one random configuration. Returns the three max relative errors.
pub fn gradient_check(seed: u64, h: f64) -> [f64; 3] {
    use lightbot::ppo::mlp::log_softmax;
    use lightbot::ppo::update::{log_prob_grads, policy_loss, value_loss, Sample};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input = rng.random_range(2..8);
    let hidden = rng.random_range(2..7);
    let random_net = |rng: &mut ChaCha8Rng, out: usize| {
        let mut net = Mlp::zeros(input, hidden, out);
        for p in net.params.iter_mut() {
            *p = rng.random_range(-1.0..1.0);
        }
        net
    };
    let policy = random_net(&mut rng, 5);
    let value = random_net(&mut rng, 1);
    let clip = 0.2;
    let batch: Vec<Sample> = (0..rng.random_range(1..6))
        .map(|_| {
            let features: Vec<f64> = (0..input).map(|_| rng.random_range(-1.0..1.0)).collect();
            let action = Action::ALL[rng.random_range(0..5)];
            let lp = log_softmax(&policy.forward(&features).output)[action.index()];
            // keep the ratio clear of the clip kinks so differences are smooth
            let shift = loop {
                let s: f64 = rng.random_range(-0.5..0.5);
                let r = (-s).exp();
                if (r - (1.0 + clip)).abs() > 1e-3 && (r - (1.0 - clip)).abs() > 1e-3 {
                    break s;
                }
            };
            Sample {
                features,
                action,
                old_log_prob: lp + shift,
                advantage: rng.random_range(-2.0..2.0),
                ret: rng.random_range(-3.0..3.0),
            }
        })
        .collect();
    let floor = 1e-6;

    let s0 = &batch[0];
    let (_, analytic, _) = log_prob_grads(&policy, &s0.features, s0.action);
    let numeric = numeric_grad(&policy.params, h, |p| {
        log_softmax(&with_params(&policy, p).forward(&s0.features).output)[s0.action.index()]
    });
    let e_logp = max_rel_err(&analytic, &numeric, floor);

    let (_, analytic, _) = policy_loss(&policy, &batch, clip, 0.01);
    let numeric = numeric_grad(&policy.params, h, |p| policy_loss(&with_params(&policy, p), &batch, clip, 0.01).0);
    let e_surr = max_rel_err(&analytic, &numeric, floor);

    let (_, analytic) = value_loss(&value, &batch);
    let numeric = numeric_grad(&value.params, h, |p| value_loss(&with_params(&value, p), &batch).0);
    let e_value = max_rel_err(&analytic, &numeric, floor);

    [e_logp, e_surr, e_value]
}

/// One element of the symmetry group of a `w x h` grid: optional mirror in
/// x, then in y, then an optional transpose (square grids only).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSym {
    pub flip_x: bool,
    pub flip_y: bool,
    pub transpose: bool,
}

impl GridSym {
    pub fn group(w: usize, h: usize) -> Vec<GridSym> {
        let mut out = Vec::new();
        for transpose in [false, true] {
            if transpose && w != h {
                continue;
            }
            for flip_x in [false, true] {
                for flip_y in [false, true] {
                    out.push(GridSym { flip_x, flip_y, transpose });
                }
            }
        }
        out
    }

    pub fn cell(self, w: usize, h: usize, x: usize, y: usize) -> (usize, usize) {
        let x = if self.flip_x { w - 1 - x } else { x };
        let y = if self.flip_y { h - 1 - y } else { y };
        if self.transpose {
            (y, x)
        } else {
            (x, y)
        }
    }

    pub fn heading(self, d: Heading) -> Heading {
        use Heading::*;
        let d = match (self.flip_x, d) {
            (true, East) => West,
            (true, West) => East,
            (_, d) => d,
        };
        let d = match (self.flip_y, d) {
            (true, North) => South,
            (true, South) => North,
            (_, d) => d,
        };
        match (self.transpose, d) {
            (true, North) => West,
            (true, West) => North,
            (true, East) => South,
            (true, South) => East,
            (_, d) => d,
        }
    }

    /// Row-major cell values after the transformation.
    pub fn map_cells<T: Copy + Default>(self, w: usize, h: usize, cells: &[T]) -> Vec<T> {
        let (nw, _) = if self.transpose { (h, w) } else { (w, h) };
        let mut out = vec![T::default(); cells.len()];
        for y in 0..h {
            for x in 0..w {
                let (tx, ty) = self.cell(w, h, x, y);
                out[ty * nw + tx] = cells[y * w + x];
            }
        }
        out
    }

    pub fn pose(self, w: usize, h: usize, p: Pose) -> Pose {
        let (x, y) = self.cell(w, h, p.x, p.y);
        Pose::new(x, y, self.heading(p.heading))
    }
}
