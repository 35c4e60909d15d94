//! Maximum-weight one-to-one matching (Hungarian algorithm).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matching {
    /// (row, col) pairs in row order.
    pub pairs: Vec<(usize, usize)>,
    pub total: f64,
}

/// Maximum-weight matching over the cells of `scores` that reach
/// `min_pair_score`; other cells are treated as 0 and never reported.
pub fn max_bipartite_matching(scores: &[Vec<f64>], min_pair_score: f64) -> Matching {
    let rows = scores.len();
    let cols = scores.iter().map(Vec::len).max().unwrap_or(0);
    let n = rows.max(cols);
    if n == 0 {
        return Matching { pairs: Vec::new(), total: 0.0 };
    }
    let weight = |r: usize, c: usize| -> f64 {
        let w = scores.get(r).and_then(|row| row.get(c)).copied().unwrap_or(0.0);
        if w >= min_pair_score && w > 0.0 {
            w
        } else {
            0.0
        }
    };
    let top = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|(r, c)| weight(r, c)).fold(0.0, f64::max);
    // Minimise top − w on the padded square matrix; 1-based potentials.
    let cost = |r: usize, c: usize| top - weight(r, c);
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut p = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost(i0 - 1, j - 1) - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![usize::MAX; n];
    for j in 1..=n {
        if p[j] > 0 {
            assign[p[j] - 1] = j - 1;
        }
    }
    let pairs: Vec<(usize, usize)> =
        (0..rows).filter(|&r| assign[r] < cols && weight(r, assign[r]) > 0.0).map(|r| (r, assign[r])).collect();
    let total = pairs.iter().map(|&(r, c)| weight(r, c)).sum();
    Matching { pairs, total }
}

/// Exhaustive search over injections of rows into columns; the test oracle.
pub fn brute_force_matching(scores: &[Vec<f64>], min_pair_score: f64) -> f64 {
    let rows = scores.len();
    let cols = scores.iter().map(Vec::len).max().unwrap_or(0);
    let weight = |r: usize, c: usize| {
        let w = scores[r].get(c).copied().unwrap_or(0.0);
        if w >= min_pair_score && w > 0.0 {
            w
        } else {
            0.0
        }
    };
    fn go(r: usize, rows: usize, cols: usize, used: &mut Vec<bool>, acc: f64, w: &dyn Fn(usize, usize) -> f64) -> f64 {
        if r == rows {
            return acc;
        }
        // Row r may stay unmatched.
        let mut best = go(r + 1, rows, cols, used, acc, w);
        for c in 0..cols {
            if !used[c] {
                used[c] = true;
                best = best.max(go(r + 1, rows, cols, used, acc + w(r, c), w));
                used[c] = false;
            }
        }
        best
    }
    go(0, rows, cols, &mut vec![false; cols], 0.0, &weight)
}
