//! Single-head additive attention restricted to a sparse neighborhood.

use ndarray::Array2;

use crate::graph::SparseMatrix;

pub const LEAKY_SLOPE: f64 = 0.2;

/// Score vector split into its source and destination halves.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionParams {
    pub src: Vec<f64>,
    pub dst: Vec<f64>,
}

impl AttentionParams {
    /// Splits a `1 × 2d` row.
    pub fn from_row(row: &[f64]) -> Self {
        let d = row.len() / 2;
        AttentionParams { src: row[..d].to_vec(), dst: row[d..].to_vec() }
    }

    pub fn dim(&self) -> usize {
        self.src.len()
    }
}

/// Coefficients aligned with the CSR layout of `pattern`.
#[derive(Debug, Clone)]
pub struct Attention {
    /// Neighborhood with the original weights as values; always holds the diagonal.
    pub pattern: SparseMatrix,
    /// Softmax-normalized coefficients, one per stored entry.
    pub alpha: Vec<f64>,
    /// Pre-activation scores `src·h_i + dst·h_j`.
    pub logits: Vec<f64>,
}

impl Attention {
    /// Effective edge weights: `weight · α` when `weighted`, `α` alone otherwise.
    pub fn effective(&self, weighted: bool) -> SparseMatrix {
        let mut m = self.pattern.clone();
        for (v, a) in m.values.iter_mut().zip(&self.alpha) {
            *v = if weighted { *v * a } else { *a };
        }
        m
    }
}

pub fn leaky_relu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        LEAKY_SLOPE * x
    }
}

/// Adds a zero-weight diagonal entry to every row lacking one, so that every
/// neighborhood contains its own node.
pub fn with_self_support(m: &SparseMatrix) -> SparseMatrix {
    let rows = (0..m.nrows)
        .map(|i| {
            let mut row: Vec<(usize, f64)> = m.row(i).collect();
            if !row.iter().any(|&(j, _)| j == i) {
                row.push((i, 0.0));
                row.sort_unstable_by_key(|&(j, _)| j);
            }
            row
        })
        .collect();
    SparseMatrix::from_rows(m.nrows, m.ncols, rows)
}

/// Per-node softmax over the neighborhood of exponentiated LeakyReLU scores.
///
/// Coefficients are strictly positive on the neighborhood and sum to one per
/// row; pairs outside the pattern implicitly receive zero.
pub fn attention_coefficients(h: &Array2<f64>, params: &AttentionParams, support: &SparseMatrix) -> Attention {
    assert_eq!(h.ncols(), params.dim(), "attention parameter width mismatch");
    let pattern = with_self_support(support);
    let src: Vec<f64> = h.rows().into_iter().map(|r| r.iter().zip(&params.src).map(|(a, b)| a * b).sum()).collect();
    let dst: Vec<f64> = h.rows().into_iter().map(|r| r.iter().zip(&params.dst).map(|(a, b)| a * b).sum()).collect();
    let mut logits = vec![0.0; pattern.nnz()];
    let mut alpha = vec![0.0; pattern.nnz()];
    for i in 0..pattern.nrows {
        let range = pattern.indptr[i]..pattern.indptr[i + 1];
        let mut max = f64::NEG_INFINITY;
        for k in range.clone() {
            let e = src[i] + dst[pattern.indices[k]];
            logits[k] = e;
            max = max.max(leaky_relu(e));
        }
        let mut total = 0.0;
        for k in range.clone() {
            let s = (leaky_relu(logits[k]) - max).exp();
            alpha[k] = s;
            total += s;
        }
        for k in range {
            alpha[k] /= total;
        }
    }
    Attention { pattern, alpha, logits }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SignedMatrix;

    fn path3() -> SparseMatrix {
        let mut m = SignedMatrix::new(3);
        m.set(0, 1, 1.0);
        m.set(1, 2, -1.0);
        m.to_csr()
    }

    #[test]
    fn equal_scores_give_uniform_coefficients() {
        let h = Array2::zeros((3, 2));
        let params = AttentionParams { src: vec![0.3, -0.2], dst: vec![1.0, 0.5] };
        let att = attention_coefficients(&h, &params, &path3());
        // node 1 has neighbors {0, 2} plus itself
        let row: Vec<f64> = (att.pattern.indptr[1]..att.pattern.indptr[2]).map(|k| att.alpha[k]).collect();
        assert_eq!(row.len(), 3);
        for a in row {
            assert!((a - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn rows_sum_to_one_and_are_positive() {
        let h = Array2::from_shape_fn((3, 2), |(i, j)| (i as f64 - 1.0) * (j as f64 + 0.5));
        let params = AttentionParams { src: vec![2.0, -1.0], dst: vec![-0.5, 3.0] };
        let att = attention_coefficients(&h, &params, &path3());
        for i in 0..3 {
            let r = att.pattern.indptr[i]..att.pattern.indptr[i + 1];
            let s: f64 = att.alpha[r.clone()].iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(att.alpha[r].iter().all(|&a| a > 0.0));
        }
        // 0 and 2 are not adjacent
        assert_eq!(att.effective(false).get(0, 2), 0.0);
    }

    #[test]
    fn isolated_node_gets_self_coefficient_one() {
        let m = SignedMatrix::new(2).to_csr();
        let h = Array2::ones((2, 1));
        let att = attention_coefficients(&h, &AttentionParams { src: vec![1.0], dst: vec![1.0] }, &m);
        assert_eq!(att.alpha, vec![1.0, 1.0]);
        assert_eq!(att.effective(false).get(1, 1), 1.0);
    }

    #[test]
    fn weighted_effective_keeps_sign() {
        let h = Array2::from_shape_fn((3, 1), |(i, _)| i as f64);
        let att = attention_coefficients(&h, &AttentionParams { src: vec![0.7], dst: vec![-0.4] }, &path3());
        let eff = att.effective(true);
        assert!(eff.get(1, 2) < 0.0);
        assert!(eff.get(0, 1) > 0.0);
    }
}
