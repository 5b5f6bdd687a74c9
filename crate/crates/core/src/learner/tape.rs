//! Reverse-mode differentiation over a fixed sequence of matrix operations.
//!
//! Every node holds its forward value. `backward` walks the tape in reverse
//! and returns gradients for the nodes registered as parameters.

use std::sync::Arc;

use ndarray::{Array2, Axis, Zip};

use super::attention::{attention_coefficients, Attention, AttentionParams, LEAKY_SLOPE};
use crate::graph::SparseMatrix;

pub type NodeId = usize;

enum Op {
    Input,
    Param(usize),
    MatMul(NodeId, NodeId),
    SpMM(Arc<SparseMatrix>, NodeId),
    Attend {
        attention: Attention,
        weighted: bool,
        z: NodeId,
        params: NodeId,
    },
    Relu(NodeId),
    Tanh(NodeId),
    /// `x + δ·x⊙(1 − x⊙x)`
    DoubleWell(NodeId, f64),
    /// Elementwise product with a constant.
    Mask(NodeId, Array2<f64>),
    ConcatRows(NodeId, NodeId),
    /// `x ⊙ scale + bias`; scale and bias are either `x`-shaped or `1 × d`, broadcast over rows.
    AffineRows(NodeId, NodeId, NodeId),
}

struct Node {
    value: Array2<f64>,
    op: Op,
}

#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    fn push(&mut self, value: Array2<f64>, op: Op) -> NodeId {
        self.nodes.push(Node { value, op });
        self.nodes.len() - 1
    }

    pub fn value(&self, id: NodeId) -> &Array2<f64> {
        &self.nodes[id].value
    }

    pub fn input(&mut self, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Input)
    }

    /// Leaf whose gradient is reported under `slot`.
    pub fn param(&mut self, slot: usize, value: Array2<f64>) -> NodeId {
        self.push(value, Op::Param(slot))
    }

    pub fn matmul(&mut self, a: NodeId, b: NodeId) -> NodeId {
        let v = self.value(a).dot(self.value(b));
        self.push(v, Op::MatMul(a, b))
    }

    pub fn spmm(&mut self, m: Arc<SparseMatrix>, x: NodeId) -> NodeId {
        let v = m.matmul(self.value(x));
        self.push(v, Op::SpMM(m, x))
    }

    /// `out_i = Σ_j w_ij α_ij(z) z_j` over the support of `pattern`, with
    /// `w_ij = 1` unless `weighted`.
    pub fn attend(&mut self, pattern: &SparseMatrix, weighted: bool, z: NodeId, params: NodeId) -> NodeId {
        let row = self.value(params).row(0).to_vec();
        let attention = attention_coefficients(self.value(z), &AttentionParams::from_row(&row), pattern);
        let v = attention.effective(weighted).matmul(self.value(z));
        debug_assert!(attention.alpha.iter().all(|&a| a > 0.0));
        self.push(v, Op::Attend { attention, weighted, z, params })
    }

    /// Attention coefficients of an `attend` node.
    pub fn attention(&self, id: NodeId) -> Option<&Attention> {
        match &self.nodes[id].op {
            Op::Attend { attention, .. } => Some(attention),
            _ => None,
        }
    }

    pub fn relu(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).mapv(|a| a.max(0.0));
        self.push(v, Op::Relu(x))
    }

    pub fn tanh(&mut self, x: NodeId) -> NodeId {
        let v = self.value(x).mapv(f64::tanh);
        self.push(v, Op::Tanh(x))
    }

    pub fn double_well(&mut self, x: NodeId, delta: f64) -> NodeId {
        let v = self.value(x).mapv(|a| a + delta * a * (1.0 - a * a));
        self.push(v, Op::DoubleWell(x, delta))
    }

    pub fn mask(&mut self, x: NodeId, mask: Array2<f64>) -> NodeId {
        let v = self.value(x) * &mask;
        self.push(v, Op::Mask(x, mask))
    }

    pub fn concat_rows(&mut self, top: NodeId, bottom: NodeId) -> NodeId {
        let v = ndarray::concatenate![Axis(0), *self.value(top), *self.value(bottom)];
        self.push(v, Op::ConcatRows(top, bottom))
    }

    pub fn affine_rows(&mut self, x: NodeId, scale: NodeId, bias: NodeId) -> NodeId {
        let v = self.value(x) * self.value(scale) + self.value(bias);
        self.push(v, Op::AffineRows(x, scale, bias))
    }

    /// Propagates `seed = ∂L/∂out` back through the tape. Returns one slot per
    /// parameter index (`None` where the parameter did not influence `out`).
    pub fn backward(&self, out: NodeId, seed: Array2<f64>, num_params: usize) -> Vec<Option<Array2<f64>>> {
        let mut grads: Vec<Option<Array2<f64>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[out] = Some(seed);
        let mut params = vec![None; num_params];

        fn accumulate(slot: &mut Option<Array2<f64>>, g: Array2<f64>) {
            match slot {
                Some(acc) => *acc += &g,
                None => *slot = Some(g),
            }
        }

        for id in (0..=out).rev() {
            let Some(g) = grads[id].take() else { continue };
            let node = &self.nodes[id];
            match &node.op {
                Op::Input => {}
                Op::Param(slot) => accumulate(&mut params[*slot], g),
                Op::MatMul(a, b) => {
                    let ga = g.dot(&self.value(*b).t());
                    let gb = self.value(*a).t().dot(&g);
                    accumulate(&mut grads[*a], ga);
                    accumulate(&mut grads[*b], gb);
                }
                Op::SpMM(m, x) => accumulate(&mut grads[*x], m.transpose_matmul(&g)),
                Op::Attend { attention, weighted, z, params: p } => {
                    let (gz, gp) = attend_backward(attention, *weighted, self.value(*z), self.value(*p), &g);
                    accumulate(&mut grads[*z], gz);
                    accumulate(&mut grads[*p], gp);
                }
                Op::Relu(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(self.value(*x)).for_each(|gv, &xv| {
                        if xv <= 0.0 {
                            *gv = 0.0;
                        }
                    });
                    accumulate(&mut grads[*x], gx);
                }
                Op::Tanh(x) => {
                    let mut gx = g;
                    Zip::from(&mut gx).and(&node.value).for_each(|gv, &y| *gv *= 1.0 - y * y);
                    accumulate(&mut grads[*x], gx);
                }
                Op::DoubleWell(x, delta) => {
                    let mut gx = g;
                    Zip::from(&mut gx)
                        .and(self.value(*x))
                        .for_each(|gv, &a| *gv *= 1.0 + delta * (1.0 - 3.0 * a * a));
                    accumulate(&mut grads[*x], gx);
                }
                Op::Mask(x, mask) => accumulate(&mut grads[*x], g * mask),
                Op::ConcatRows(top, bottom) => {
                    let n = self.value(*top).nrows();
                    let gt = g.slice(ndarray::s![..n, ..]).to_owned();
                    let gb = g.slice(ndarray::s![n.., ..]).to_owned();
                    accumulate(&mut grads[*top], gt);
                    accumulate(&mut grads[*bottom], gb);
                }
                Op::AffineRows(x, scale, bias) => {
                    let fold = |m: Array2<f64>, like: NodeId| {
                        if self.value(like).nrows() == m.nrows() {
                            m
                        } else {
                            m.sum_axis(Axis(0)).insert_axis(Axis(0))
                        }
                    };
                    let gs = fold(&g * self.value(*x), *scale);
                    let gb = fold(g.clone(), *bias);
                    let gx = &g * self.value(*scale);
                    accumulate(&mut grads[*x], gx);
                    accumulate(&mut grads[*scale], gs);
                    accumulate(&mut grads[*bias], gb);
                }
            }
        }
        params
    }
}

fn attend_backward(
    att: &Attention,
    weighted: bool,
    z: &Array2<f64>,
    params: &Array2<f64>,
    g: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let pattern = &att.pattern;
    let d = z.ncols();
    let p = params.row(0);
    let (src, dst) = (p.slice(ndarray::s![..d]), p.slice(ndarray::s![d..]));

    // direct path through the weighted sum
    let mut gz = att.effective(weighted).transpose_matmul(g);
    let mut g_src = ndarray::Array1::<f64>::zeros(d);
    let mut g_dst = ndarray::Array1::<f64>::zeros(d);

    for i in 0..pattern.nrows {
        let range = pattern.indptr[i]..pattern.indptr[i + 1];
        // ∂L/∂α_ij = w_ij (g_i · z_j)
        let d_alpha: Vec<f64> = range
            .clone()
            .map(|k| {
                let w = if weighted { pattern.values[k] } else { 1.0 };
                w * g.row(i).dot(&z.row(pattern.indices[k]))
            })
            .collect();
        let mean: f64 = range.clone().zip(&d_alpha).map(|(k, da)| att.alpha[k] * da).sum();
        let mut g_e_src = 0.0;
        for (k, da) in range.zip(&d_alpha) {
            let j = pattern.indices[k];
            let ds = att.alpha[k] * (da - mean);
            let de = ds * if att.logits[k] > 0.0 { 1.0 } else { LEAKY_SLOPE };
            g_e_src += de;
            g_dst.scaled_add(de, &z.row(j));
            gz.row_mut(j).scaled_add(de, &dst);
        }
        g_src.scaled_add(g_e_src, &z.row(i));
        gz.row_mut(i).scaled_add(g_e_src, &src);
    }
    let gp = ndarray::concatenate![Axis(0), g_src, g_dst].insert_axis(Axis(0));
    (gz, gp)
}
