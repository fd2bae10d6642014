//! One-dimensional boundary-extended correlations stored as sparse matrices,
//! and their separable application along image rows and columns.
//!
//! A [`LineOperator`] is the exact `n x n` matrix of
//! `out[k] = sum_t h[t] * x[ext(k + offset[t])]`, where `ext` folds indices
//! back into `0..n`. The transpose is stored alongside, so adjoints are exact
//! and both directions are gathers (parallel over rows, deterministic).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// How indices outside `0..n` are mapped back into the signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Half-sample reflection: `x[-1] = x[0]`, `x[n] = x[n-1]`.
    Symmetric,
    Periodic,
}

pub(crate) fn extend_index(i: isize, n: usize, boundary: Boundary) -> usize {
    let n = n as isize;
    match boundary {
        Boundary::Periodic => i.rem_euclid(n) as usize,
        Boundary::Symmetric => {
            let m = i.rem_euclid(2 * n);
            (if m < n { m } else { 2 * n - 1 - m }) as usize
        }
    }
}

#[derive(Debug, Clone)]
struct Csr {
    offsets: Vec<usize>,
    index: Vec<u32>,
    weight: Vec<f64>,
}

impl Csr {
    fn row(&self, k: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.offsets[k]..self.offsets[k + 1];
        self.index[r.clone()]
            .iter()
            .zip(&self.weight[r])
            .map(|(&i, &w)| (i as usize, w))
    }

    fn transpose(&self, n: usize) -> Csr {
        let mut counts = vec![0usize; n + 1];
        for &i in &self.index {
            counts[i as usize + 1] += 1;
        }
        for k in 0..n {
            counts[k + 1] += counts[k];
        }
        let mut next = counts.clone();
        let mut index = vec![0u32; self.index.len()];
        let mut weight = vec![0.0; self.index.len()];
        for k in 0..n {
            for (i, w) in self.row(k) {
                let slot = next[i];
                index[slot] = k as u32;
                weight[slot] = w;
                next[i] += 1;
            }
        }
        Csr {
            offsets: counts,
            index,
            weight,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LineOperator {
    n: usize,
    fwd: Csr,
    adj: Csr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Adjoint,
}

impl LineOperator {
    /// Correlation with `taps` at integer `offsets` on a signal of length `n`.
    pub fn correlation(n: usize, taps: &[f64], offsets: &[isize], boundary: Boundary) -> Self {
        assert_eq!(taps.len(), offsets.len());
        let mut fwd = Csr {
            offsets: Vec::with_capacity(n + 1),
            index: Vec::with_capacity(n * taps.len()),
            weight: Vec::with_capacity(n * taps.len()),
        };
        fwd.offsets.push(0);
        for k in 0..n {
            for (&h, &o) in taps.iter().zip(offsets) {
                if h != 0.0 {
                    fwd.index
                        .push(extend_index(k as isize + o, n, boundary) as u32);
                    fwd.weight.push(h);
                }
            }
            fwd.offsets.push(fwd.index.len());
        }
        let adj = fwd.transpose(n);
        Self { n, fwd, adj }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn matrix(&self, dir: Direction) -> &Csr {
        match dir {
            Direction::Forward => &self.fwd,
            Direction::Adjoint => &self.adj,
        }
    }

    pub fn apply_1d(&self, x: &[f64], dir: Direction) -> Vec<f64> {
        let m = self.matrix(dir);
        (0..self.n)
            .map(|k| m.row(k).map(|(i, w)| w * x[i]).sum())
            .collect()
    }

    /// Applies the operator along every row of a `width x height` image.
    pub fn along_rows(&self, input: &[f64], out: &mut [f64], dir: Direction) {
        let w = self.n;
        let m = self.matrix(dir);
        out.par_chunks_mut(w)
            .zip(input.par_chunks(w))
            .for_each(|(o, x)| {
                for (k, ok) in o.iter_mut().enumerate() {
                    *ok = m.row(k).map(|(i, wt)| wt * x[i]).sum();
                }
            });
    }

    /// Applies the operator along every column; `width` is the row length.
    pub fn along_cols(&self, input: &[f64], out: &mut [f64], width: usize, dir: Direction) {
        let m = self.matrix(dir);
        out.par_chunks_mut(width).enumerate().for_each(|(k, o)| {
            o.fill(0.0);
            for (i, wt) in m.row(k) {
                let src = &input[i * width..(i + 1) * width];
                for (ov, sv) in o.iter_mut().zip(src) {
                    *ov += wt * sv;
                }
            }
        });
    }
}
