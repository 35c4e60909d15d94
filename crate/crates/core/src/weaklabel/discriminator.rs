//! One-hidden-layer relatedness classifier trained on soft labels.
//!
//! Pair inputs are `doc ‖ col ‖ pair`, where `pair` holds optional per-pair
//! features. The first layer is evaluated per document and per column
//! separately (`W·[x;y;p] = W_d·x + W_c·y + W_p·p`), which makes full-batch
//! training over a Cartesian pair universe cheap.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscConfig {
    pub hidden: usize,
    pub learning_rate: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub seed: u64,
}

/// Training data: feature tables plus `(doc index, col index, soft label)`.
pub struct PairData<'a> {
    pub docs: &'a [Vec<f64>],
    pub cols: &'a [Vec<f64>],
    pub pairs: &'a [(usize, usize, f64)],
    /// Empty, or one feature vector per entry of `pairs`.
    pub pair_feats: &'a [Vec<f64>],
    /// Cross-entropy weights of the negative and positive label mass.
    pub class_weights: [f64; 2],
}

impl<'a> PairData<'a> {
    pub fn new(docs: &'a [Vec<f64>], cols: &'a [Vec<f64>], pairs: &'a [(usize, usize, f64)]) -> Self {
        PairData { docs, cols, pairs, pair_feats: &[], class_weights: [1.0, 1.0] }
    }

    pub fn with_pair_features(mut self, feats: &'a [Vec<f64>]) -> Self {
        self.pair_feats = feats;
        self
    }

    /// Weight both classes so each carries half of the total loss mass.
    pub fn balanced(mut self) -> Self {
        let n = self.pairs.len() as f64;
        let pos: f64 = self.pairs.iter().map(|p| p.2).sum();
        let neg = n - pos;
        if pos > 0.0 && neg > 0.0 {
            self.class_weights = [n / (2.0 * neg), n / (2.0 * pos)];
        }
        self
    }

    fn pair(&self, i: usize) -> &[f64] {
        self.pair_feats.get(i).map_or(&[], Vec::as_slice)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discriminator {
    pub doc_dim: usize,
    pub col_dim: usize,
    #[serde(default)]
    pub pair_dim: usize,
    pub hidden: usize,
    /// W1 (hidden × (doc_dim+col_dim+pair_dim), row-major), b1, w2, b2.
    pub params: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

impl Discriminator {
    pub fn new(doc_dim: usize, col_dim: usize, hidden: usize, seed: u64) -> Self {
        Self::with_pair_dim(doc_dim, col_dim, 0, hidden, seed)
    }

    pub fn with_pair_dim(doc_dim: usize, col_dim: usize, pair_dim: usize, hidden: usize, seed: u64) -> Self {
        let input = doc_dim + col_dim + pair_dim;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = vec![0.0; hidden * input + 2 * hidden + 1];
        let l1 = (6.0 / (input + hidden) as f64).sqrt();
        for p in &mut params[..hidden * input] {
            *p = rng.random_range(-l1..l1);
        }
        let l2 = (6.0 / (hidden + 1) as f64).sqrt();
        let w2 = hidden * input + hidden;
        for p in &mut params[w2..w2 + hidden] {
            *p = rng.random_range(-l2..l2);
        }
        Discriminator { doc_dim, col_dim, pair_dim, hidden, params }
    }

    fn input(&self) -> usize {
        self.doc_dim + self.col_dim + self.pair_dim
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.hidden * self.input();
        (w1, w1 + self.hidden, w1 + 2 * self.hidden)
    }

    /// First-layer partial products for one input block.
    fn side(&self, x: &[f64], offset: usize) -> Vec<f64> {
        let input = self.input();
        (0..self.hidden)
            .map(|h| {
                let row = &self.params[h * input + offset..h * input + offset + x.len()];
                row.iter().zip(x).map(|(w, v)| w * v).sum()
            })
            .collect()
    }

    fn pair_side(&self, p: &[f64]) -> Vec<f64> {
        if p.is_empty() {
            vec![0.0; self.hidden]
        } else {
            self.side(p, self.doc_dim + self.col_dim)
        }
    }

    fn logit(&self, a: &[f64], b: &[f64], c: &[f64], hidden_out: Option<&mut Vec<f64>>) -> f64 {
        let (b1, w2, b2) = self.offsets();
        let mut z = self.params[b2];
        let mut hs = Vec::with_capacity(self.hidden);
        for h in 0..self.hidden {
            let act = (a[h] + b[h] + c[h] + self.params[b1 + h]).tanh();
            z += self.params[w2 + h] * act;
            hs.push(act);
        }
        if let Some(out) = hidden_out {
            *out = hs;
        }
        z
    }

    /// `pair` must have `pair_dim` entries (empty when the model has none).
    pub fn predict(&self, doc: &[f64], col: &[f64], pair: &[f64]) -> f64 {
        sigmoid(self.logit(&self.side(doc, 0), &self.side(col, self.doc_dim), &self.pair_side(pair), None))
    }

    /// Relatedness for every listed pair.
    pub fn predict_pairs(&self, data: &PairData) -> Vec<f64> {
        let a: Vec<Vec<f64>> = data.docs.iter().map(|x| self.side(x, 0)).collect();
        let b: Vec<Vec<f64>> = data.cols.iter().map(|x| self.side(x, self.doc_dim)).collect();
        data.pairs
            .iter()
            .enumerate()
            .map(|(i, &(d, c, _))| sigmoid(self.logit(&a[d], &b[c], &self.pair_side(data.pair(i)), None)))
            .collect()
    }

    /// Mean class-weighted cross-entropy against soft labels, and its gradient.
    pub fn loss_and_grad(&self, data: &PairData) -> (f64, Vec<f64>) {
        let input = self.input();
        let (b1, w2, b2) = self.offsets();
        let [wn, wp] = data.class_weights;
        let a: Vec<Vec<f64>> = data.docs.iter().map(|x| self.side(x, 0)).collect();
        let b: Vec<Vec<f64>> = data.cols.iter().map(|x| self.side(x, self.doc_dim)).collect();
        let mut ga = vec![vec![0.0; self.hidden]; a.len()];
        let mut gb = vec![vec![0.0; self.hidden]; b.len()];
        let mut grad = vec![0.0; self.params.len()];
        let n = data.pairs.len().max(1) as f64;
        let mut loss = 0.0;
        let mut hs = Vec::new();
        let pair_off = self.doc_dim + self.col_dim;
        for (i, &(d, c, y)) in data.pairs.iter().enumerate() {
            let pf = data.pair(i);
            let z = self.logit(&a[d], &b[c], &self.pair_side(pf), Some(&mut hs));
            loss += wp * y * softplus(-z) + wn * (1.0 - y) * softplus(z);
            let sz = sigmoid(z);
            let dz = (wn * (1.0 - y) * sz - wp * y * (1.0 - sz)) / n;
            grad[b2] += dz;
            for h in 0..self.hidden {
                grad[w2 + h] += dz * hs[h];
                let dpre = dz * self.params[w2 + h] * (1.0 - hs[h] * hs[h]);
                grad[b1 + h] += dpre;
                ga[d][h] += dpre;
                gb[c][h] += dpre;
                for (k, v) in pf.iter().enumerate() {
                    grad[h * input + pair_off + k] += dpre * v;
                }
            }
        }
        for (g, x) in ga.iter().zip(data.docs) {
            for h in 0..self.hidden {
                if g[h] != 0.0 {
                    let row = &mut grad[h * input..h * input + self.doc_dim];
                    row.iter_mut().zip(x).for_each(|(r, v)| *r += g[h] * v);
                }
            }
        }
        for (g, x) in gb.iter().zip(data.cols) {
            for h in 0..self.hidden {
                if g[h] != 0.0 {
                    let row = &mut grad[h * input + self.doc_dim..h * input + pair_off];
                    row.iter_mut().zip(x).for_each(|(r, v)| *r += g[h] * v);
                }
            }
        }
        (loss / n, grad)
    }

    pub fn loss(&self, data: &PairData) -> f64 {
        self.loss_and_grad(data).0
    }

    /// Full-batch gradient descent; returns the model and its loss history.
    pub fn train(data: &PairData, cfg: &DiscConfig) -> Result<(Self, Vec<f64>)> {
        let doc_dim = data.docs.first().map_or(0, Vec::len);
        let col_dim = data.cols.first().map_or(0, Vec::len);
        let pair_dim = data.pair_feats.first().map_or(0, Vec::len);
        if data.pairs.is_empty() {
            return Err(Error::EmptyTrainingSet);
        }
        if !data.pair_feats.is_empty() && data.pair_feats.len() != data.pairs.len() {
            return Err(Error::InvalidQuery("pair features must align with pairs".into()));
        }
        let mut model = Discriminator::with_pair_dim(doc_dim, col_dim, pair_dim, cfg.hidden, cfg.seed);
        let mut history = Vec::new();
        let mut prev = f64::INFINITY;
        for step in 0..cfg.max_iter {
            let (loss, grad) = model.loss_and_grad(data);
            if !loss.is_finite() {
                return Err(Error::NonFiniteLoss { stage: "discriminator", step });
            }
            history.push(loss);
            if (prev - loss).abs() < cfg.tol {
                break;
            }
            prev = loss;
            for (p, g) in model.params.iter_mut().zip(&grad) {
                *p -= cfg.learning_rate * g;
            }
        }
        Ok((model, history))
    }
}

/// Cosine similarity of two equal-length slices; 0 when either is zero.
pub fn cosine_sim(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        0.0
    } else {
        dot / (na * nb)
    }
}

/// Pair features over `metadata ‖ content` encodings: the cosine of each half.
pub fn encoding_similarities(doc: &[f64], col: &[f64]) -> Vec<f64> {
    let h = doc.len() / 2;
    vec![cosine_sim(&doc[..h], &col[..h]), cosine_sim(&doc[h..], &col[h..])]
}
