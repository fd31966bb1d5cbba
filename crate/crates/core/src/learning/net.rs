//! Two-layer tanh trunk shared by a categorical policy head and a value head.
//!
//! Parameters live in one flat vector, laid out as
//! `W1 (h×in) | b1 | W2 (h×h) | b2 | Wpi (A×h) | bpi | Wv (h) | bv`,
//! with row-major weight matrices.

use rand::Rng;
use serde::{Deserialize, Serialize};

/// Number of discrete navigation actions.
pub const ACTIONS: usize = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyNet {
    pub input: usize,
    pub hidden: usize,
    pub params: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Layout {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    wp: usize,
    bp: usize,
    wv: usize,
    bv: usize,
    len: usize,
}

impl Layout {
    fn new(input: usize, hidden: usize) -> Self {
        let w1 = 0;
        let b1 = w1 + hidden * input;
        let w2 = b1 + hidden;
        let b2 = w2 + hidden * hidden;
        let wp = b2 + hidden;
        let bp = wp + ACTIONS * hidden;
        let wv = bp + ACTIONS;
        let bv = wv + hidden;
        Self { w1, b1, w2, b2, wp, bp, wv, bv, len: bv + 1 }
    }
}

/// Activations kept from a forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub x: Vec<f64>,
    pub h1: Vec<f64>,
    pub h2: Vec<f64>,
    pub logits: [f64; ACTIONS],
    pub value: f64,
}

fn affine(w: &[f64], b: &[f64], x: &[f64], out: &mut [f64]) {
    let n = x.len();
    for (i, o) in out.iter_mut().enumerate() {
        let row = &w[i * n..(i + 1) * n];
        *o = b[i] + row.iter().zip(x).map(|(a, b)| a * b).sum::<f64>();
    }
}

impl PolicyNet {
    pub fn param_count(input: usize, hidden: usize) -> usize {
        Layout::new(input, hidden).len
    }

    /// Glorot-uniform trunk and value head, policy head scaled by 0.01 so the
    /// initial policy is close to uniform. Biases start at zero.
    pub fn new<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let l = Layout::new(input, hidden);
        let mut params = vec![0.0; l.len];
        let mut fill = |range: std::ops::Range<usize>, fan_in: usize, fan_out: usize, gain: f64| {
            let a = gain * (6.0 / (fan_in + fan_out) as f64).sqrt();
            for p in &mut params[range] {
                *p = rng.gen_range(-a..a);
            }
        };
        fill(l.w1..l.b1, input, hidden, 1.0);
        fill(l.w2..l.b2, hidden, hidden, 1.0);
        fill(l.wp..l.bp, hidden, ACTIONS, 0.01);
        fill(l.wv..l.bv, hidden, 1, 1.0);
        Self { input, hidden, params }
    }

    fn layout(&self) -> Layout {
        Layout::new(self.input, self.hidden)
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(x.len(), self.input, "observation width");
        let l = self.layout();
        let p = &self.params;
        let h = self.hidden;
        let mut h1 = vec![0.0; h];
        affine(&p[l.w1..l.b1], &p[l.b1..l.w2], x, &mut h1);
        h1.iter_mut().for_each(|v| *v = v.tanh());
        let mut h2 = vec![0.0; h];
        affine(&p[l.w2..l.b2], &p[l.b2..l.wp], &h1, &mut h2);
        h2.iter_mut().for_each(|v| *v = v.tanh());
        let mut logits = [0.0; ACTIONS];
        affine(&p[l.wp..l.bp], &p[l.bp..l.wv], &h2, &mut logits);
        let value = p[l.bv] + p[l.wv..l.bv].iter().zip(&h2).map(|(a, b)| a * b).sum::<f64>();
        ForwardCache { x: x.to_vec(), h1, h2, logits, value }
    }

    /// Accumulates into `grad` the parameter gradient given upstream
    /// gradients on the logits and the value.
    pub fn backward(&self, cache: &ForwardCache, d_logits: &[f64; ACTIONS], d_value: f64, grad: &mut [f64]) {
        let l = self.layout();
        let p = &self.params;
        let h = self.hidden;
        let mut d_h2 = vec![0.0; h];
        for a in 0..ACTIONS {
            let row = l.wp + a * h;
            for j in 0..h {
                grad[row + j] += d_logits[a] * cache.h2[j];
                d_h2[j] += d_logits[a] * p[row + j];
            }
            grad[l.bp + a] += d_logits[a];
        }
        for j in 0..h {
            grad[l.wv + j] += d_value * cache.h2[j];
            d_h2[j] += d_value * p[l.wv + j];
        }
        grad[l.bv] += d_value;

        let d_z2: Vec<f64> = d_h2.iter().zip(&cache.h2).map(|(d, y)| d * (1.0 - y * y)).collect();
        let mut d_h1 = vec![0.0; h];
        for i in 0..h {
            let row = l.w2 + i * h;
            for j in 0..h {
                grad[row + j] += d_z2[i] * cache.h1[j];
                d_h1[j] += d_z2[i] * p[row + j];
            }
            grad[l.b2 + i] += d_z2[i];
        }

        let n = self.input;
        for i in 0..h {
            let d_z1 = d_h1[i] * (1.0 - cache.h1[i] * cache.h1[i]);
            let row = l.w1 + i * n;
            for j in 0..n {
                grad[row + j] += d_z1 * cache.x[j];
            }
            grad[l.b1 + i] += d_z1;
        }
    }
}

/// Numerically stable softmax and log-softmax of a logit vector.
pub fn log_softmax(logits: &[f64; ACTIONS]) -> ([f64; ACTIONS], [f64; ACTIONS]) {
    let m = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + logits.iter().map(|z| (z - m).exp()).sum::<f64>().ln();
    let mut logp = [0.0; ACTIONS];
    let mut p = [0.0; ACTIONS];
    for a in 0..ACTIONS {
        logp[a] = logits[a] - lse;
        p[a] = logp[a].exp();
    }
    (p, logp)
}

pub fn entropy(p: &[f64; ACTIONS], logp: &[f64; ACTIONS]) -> f64 {
    -p.iter().zip(logp).map(|(a, b)| a * b).sum::<f64>()
}
