//! Two-layer perceptron with hand-written backpropagation.
//!
//! Parameters live in one flat vector (`w1`, `b1`, `w2`, `b2`, row-major,
//! output-major) so the optimizer and finite-difference checks can treat
//! them uniformly.

use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    input: usize,
    hidden: usize,
    output: usize,
    pub params: Vec<f64>,
}

/// Activations kept from a forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct Cache {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("expected {expected} input features, got {found}")]
pub struct DimensionMismatch {
    pub expected: usize,
    pub found: usize,
}

impl Mlp {
    pub fn zeros(input: usize, hidden: usize, output: usize) -> Mlp {
        let n = hidden * input + hidden + output * hidden + output;
        Mlp { input, hidden, output, params: vec![0.0; n] }
    }

    /// Orthogonal weights scaled by `hidden_gain` and `output_gain`, zero
    /// biases.
    pub fn orthogonal<R: Rng + ?Sized>(
        input: usize,
        hidden: usize,
        output: usize,
        hidden_gain: f64,
        output_gain: f64,
        rng: &mut R,
    ) -> Mlp {
        let mut net = Mlp::zeros(input, hidden, output);
        let w1 = orthogonal_matrix(hidden, input, hidden_gain, rng);
        let w2 = orthogonal_matrix(output, hidden, output_gain, rng);
        let (o1, o2) = (net.w1_offset(), net.w2_offset());
        net.params[o1..o1 + w1.len()].copy_from_slice(&w1);
        net.params[o2..o2 + w2.len()].copy_from_slice(&w2);
        net
    }

    pub fn input_len(&self) -> usize {
        self.input
    }

    pub fn hidden_len(&self) -> usize {
        self.hidden
    }

    pub fn output_len(&self) -> usize {
        self.output
    }

    fn w1_offset(&self) -> usize {
        0
    }

    fn b1_offset(&self) -> usize {
        self.hidden * self.input
    }

    fn w2_offset(&self) -> usize {
        self.b1_offset() + self.hidden
    }

    fn b2_offset(&self) -> usize {
        self.w2_offset() + self.output * self.hidden
    }

    pub fn check_input(&self, x: &[f64]) -> Result<(), DimensionMismatch> {
        if x.len() == self.input {
            Ok(())
        } else {
            Err(DimensionMismatch { expected: self.input, found: x.len() })
        }
    }

    /// Panics on a dimension mismatch; see [`Mlp::check_input`].
    pub fn forward(&self, x: &[f64]) -> Cache {
        assert_eq!(x.len(), self.input, "input dimension");
        let p = &self.params;
        let (w1, b1, w2, b2) = (self.w1_offset(), self.b1_offset(), self.w2_offset(), self.b2_offset());
        let hidden: Vec<f64> = (0..self.hidden)
            .map(|j| {
                let row = &p[w1 + j * self.input..w1 + (j + 1) * self.input];
                let z = p[b1 + j] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
                z.tanh()
            })
            .collect();
        let output = (0..self.output)
            .map(|k| {
                let row = &p[w2 + k * self.hidden..w2 + (k + 1) * self.hidden];
                p[b2 + k] + row.iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>()
            })
            .collect();
        Cache { hidden, output }
    }

    /// Accumulates `d loss / d params` into `grad` given `d loss / d output`.
    /// Returns `d loss / d input` when `want_input` is set.
    pub fn backward(
        &self,
        x: &[f64],
        cache: &Cache,
        d_output: &[f64],
        grad: &mut [f64],
        want_input: bool,
    ) -> Option<Vec<f64>> {
        debug_assert_eq!(grad.len(), self.params.len());
        let p = &self.params;
        let (w1, b1, w2, b2) = (self.w1_offset(), self.b1_offset(), self.w2_offset(), self.b2_offset());
        let mut d_hidden = vec![0.0; self.hidden];
        for (k, &g) in d_output.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            grad[b2 + k] += g;
            let row = w2 + k * self.hidden;
            for j in 0..self.hidden {
                grad[row + j] += g * cache.hidden[j];
                d_hidden[j] += g * p[row + j];
            }
        }
        let mut d_input = want_input.then(|| vec![0.0; self.input]);
        for j in 0..self.hidden {
            let h = cache.hidden[j];
            let dz = d_hidden[j] * (1.0 - h * h);
            if dz == 0.0 {
                continue;
            }
            grad[b1 + j] += dz;
            let row = w1 + j * self.input;
            for i in 0..self.input {
                grad[row + i] += dz * x[i];
            }
            if let Some(di) = d_input.as_mut() {
                for i in 0..self.input {
                    di[i] += dz * p[row + i];
                }
            }
        }
        d_input
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|v| v.is_finite())
    }
}

/// `rows x cols` matrix with orthonormal rows or columns (whichever is
/// shorter), times `gain`.
fn orthogonal_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, gain: f64, rng: &mut R) -> Vec<f64> {
    let (tall, short) = (rows.max(cols), rows.min(cols));
    // `short` orthonormal vectors of length `tall`, by Gram-Schmidt
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(short);
    while basis.len() < short {
        let mut v: Vec<f64> = (0..tall).map(|_| rng.sample(StandardNormal)).collect();
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(b).for_each(|(a, b)| *a -= d * b);
        }
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|a| *a /= norm);
            basis.push(v);
        }
    }
    let mut m = vec![0.0; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            m[r * cols + c] = gain * if rows >= cols { basis[c][r] } else { basis[r][c] };
        }
    }
    m
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = logits.iter().map(|l| (l - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|l| (l - m).exp()).sum::<f64>().ln();
    logits.iter().map(|l| l - lse).collect()
}
