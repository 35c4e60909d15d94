//! Feed-forward joint encoder (tanh hidden layer, L2-normalized output) and
//! the triplet margin loss.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointModel {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub output_dim: usize,
    /// Row-major hidden × input.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Row-major output × hidden.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

/// Intermediate values of one forward pass.
pub struct Forward {
    pub hidden: Vec<f64>,
    pub raw: Vec<f64>,
    pub norm: f64,
    pub out: Vec<f64>,
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// max(0, β + d(anchor, pos) − d(anchor, neg)) with Euclidean d.
pub fn triplet_loss(anchor: &[f64], pos: &[f64], neg: &[f64], margin: f64) -> f64 {
    (margin + (euclidean(anchor, pos) - euclidean(anchor, neg))).max(0.0)
}

/// Gradients of the triplet loss with respect to the three outputs.
pub fn triplet_loss_grad(anchor: &[f64], pos: &[f64], neg: &[f64], margin: f64) -> Option<[Vec<f64>; 3]> {
    let dp = euclidean(anchor, pos);
    let dn = euclidean(anchor, neg);
    if margin + (dp - dn) <= 0.0 {
        return None;
    }
    let unit = |x: &[f64], d: f64| -> Vec<f64> {
        if d == 0.0 {
            vec![0.0; x.len()]
        } else {
            anchor.iter().zip(x).map(|(a, b)| (a - b) / d).collect()
        }
    };
    let up = unit(pos, dp);
    let un = unit(neg, dn);
    let ga = up.iter().zip(&un).map(|(p, n)| p - n).collect();
    let gp = up.iter().map(|p| -p).collect();
    Some([ga, gp, un])
}

impl JointModel {
    pub fn new(input_dim: usize, hidden_dim: usize, output_dim: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut xavier = |fan_in: usize, fan_out: usize| -> Vec<f64> {
            let l = (6.0 / (fan_in + fan_out) as f64).sqrt();
            (0..fan_in * fan_out).map(|_| rng.random_range(-l..l)).collect()
        };
        let w1 = xavier(input_dim, hidden_dim);
        let w2 = xavier(hidden_dim, output_dim);
        JointModel { input_dim, hidden_dim, output_dim, w1, b1: vec![0.0; hidden_dim], w2, b2: vec![0.0; output_dim] }
    }

    pub fn num_params(&self) -> usize {
        self.w1.len() + self.b1.len() + self.w2.len() + self.b2.len()
    }

    pub fn params(&self) -> Vec<f64> {
        [&self.w1[..], &self.b1, &self.w2, &self.b2].concat()
    }

    pub fn set_params(&mut self, p: &[f64]) {
        let (a, rest) = p.split_at(self.w1.len());
        let (b, rest) = rest.split_at(self.b1.len());
        let (c, d) = rest.split_at(self.w2.len());
        self.w1.copy_from_slice(a);
        self.b1.copy_from_slice(b);
        self.w2.copy_from_slice(c);
        self.b2.copy_from_slice(d);
    }

    pub fn is_finite(&self) -> bool {
        self.params().iter().all(|x| x.is_finite())
    }

    pub fn forward(&self, x: &[f64]) -> Forward {
        let hidden: Vec<f64> = (0..self.hidden_dim)
            .map(|h| {
                let row = &self.w1[h * self.input_dim..(h + 1) * self.input_dim];
                (row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b1[h]).tanh()
            })
            .collect();
        let raw: Vec<f64> = (0..self.output_dim)
            .map(|o| {
                let row = &self.w2[o * self.hidden_dim..(o + 1) * self.hidden_dim];
                row.iter().zip(&hidden).map(|(w, v)| w * v).sum::<f64>() + self.b2[o]
            })
            .collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let out = if norm > 0.0 { raw.iter().map(|v| v / norm).collect() } else { vec![0.0; self.output_dim] };
        Forward { hidden, raw, norm, out }
    }

    pub fn embed(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).out
    }

    /// Accumulates dL/dparams into `grad` (flat, same layout as `params`)
    /// given dL/d(out) for one forward pass.
    pub fn backward(&self, x: &[f64], f: &Forward, g_out: &[f64], grad: &mut [f64]) {
        if f.norm == 0.0 {
            return;
        }
        let dot: f64 = f.out.iter().zip(g_out).map(|(o, g)| o * g).sum();
        let g_raw: Vec<f64> = f.out.iter().zip(g_out).map(|(o, g)| (g - o * dot) / f.norm).collect();
        let (gw1, rest) = grad.split_at_mut(self.w1.len());
        let (gb1, rest) = rest.split_at_mut(self.b1.len());
        let (gw2, gb2) = rest.split_at_mut(self.w2.len());
        let mut g_hidden = vec![0.0; self.hidden_dim];
        for o in 0..self.output_dim {
            let g = g_raw[o];
            gb2[o] += g;
            let row = o * self.hidden_dim;
            for h in 0..self.hidden_dim {
                gw2[row + h] += g * f.hidden[h];
                g_hidden[h] += g * self.w2[row + h];
            }
        }
        for h in 0..self.hidden_dim {
            let g = g_hidden[h] * (1.0 - f.hidden[h] * f.hidden[h]);
            gb1[h] += g;
            let row = &mut gw1[h * self.input_dim..(h + 1) * self.input_dim];
            row.iter_mut().zip(x).for_each(|(r, v)| *r += g * v);
        }
    }
}
