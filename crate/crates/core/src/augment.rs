//! Collapsing nodes: connection matrix, augmented adjacency `A_c` and the
//! label-based adjacency `A_y`.
//!
//! CNs are appended after the original nodes, at indices `N..N+K`.

use std::io::Write;

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::graph::{LabeledGraph, SignedMatrix};
use crate::{Error, Result};

/// How CN feature rows are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureInit {
    /// Class mean of the training features through a learnable per-CN elementwise affine map.
    ClassMeanLinear,
    /// Free rows, small random init, trained.
    LearnableEmbedding,
    Zeros,
}

/// Bottom-right `K × K` block of `A_c`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CnCnPolicy {
    /// Zero block.
    None,
    /// Every CN pair joined by a `-1` edge.
    Negative,
    /// Identity: CN self-loops only.
    IdentityBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CollapsingNodeSet {
    /// Class id of each CN.
    pub labels: Vec<usize>,
    pub multiplicity: usize,
    pub feature_init: FeatureInit,
    /// Seed for [`FeatureInit::LearnableEmbedding`].
    pub seed: u64,
}

impl CollapsingNodeSet {
    /// `m` CNs per class, `K = m·C`, grouped by class.
    pub fn per_class(num_classes: usize, multiplicity: usize, feature_init: FeatureInit) -> Self {
        let labels = (0..num_classes)
            .flat_map(|c| std::iter::repeat_n(c, multiplicity))
            .collect();
        CollapsingNodeSet { labels, multiplicity, feature_init, seed: 0 }
    }

    pub fn count(&self) -> usize {
        self.labels.len()
    }
}

/// `N × K` matrix with entries in `{+1, -1, 0}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConnectionMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<i8>,
}

impl ConnectionMatrix {
    /// `N × 0`: no collapsing nodes.
    pub fn empty(rows: usize) -> Self {
        ConnectionMatrix { rows, cols: 0, entries: Vec::new() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, k: usize) -> i8 {
        self.entries[i * self.cols + k]
    }

    pub fn row(&self, i: usize) -> &[i8] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn negative_count(&self) -> usize {
        self.entries.iter().filter(|&&e| e < 0).count()
    }

    pub fn to_dense(&self) -> Array2<f64> {
        Array2::from_shape_fn((self.rows, self.cols), |(i, k)| self.get(i, k) as f64)
    }
}

/// `C_ik = +1` if train node `i` shares CN `k`'s label, `-1` if it does not,
/// and `0` for every node outside the train mask.
pub fn build_connection_matrix(
    labels: &[Option<usize>],
    train_mask: &[bool],
    cn_labels: &[usize],
) -> Result<ConnectionMatrix> {
    if cn_labels.is_empty() {
        return Err(Error::InvalidArgument("no collapsing nodes".into()));
    }
    if labels.len() != train_mask.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels vs {} mask entries",
            labels.len(),
            train_mask.len()
        )));
    }
    let cols = cn_labels.len();
    let mut entries = vec![0i8; labels.len() * cols];
    for (i, (&label, &train)) in labels.iter().zip(train_mask).enumerate() {
        if !train {
            continue;
        }
        let y = label.ok_or(Error::UnlabeledTrainNode(i))?;
        for (k, &cn) in cn_labels.iter().enumerate() {
            entries[i * cols + k] = if cn == y { 1 } else { -1 };
        }
    }
    Ok(ConnectionMatrix { rows: labels.len(), cols, entries })
}

#[derive(Debug, Clone)]
pub struct AugmentedGraph {
    pub base: LabeledGraph,
    pub cns: CollapsingNodeSet,
    pub connection: ConnectionMatrix,
    /// `(N+K) × (N+K)` block matrix `[[A, C], [Cᵀ, B]]`.
    pub a_c: SignedMatrix,
    /// Initial CN feature rows, `K × d`.
    pub cn_features: Array2<f64>,
    pub cn_cn_policy: CnCnPolicy,
    pub self_loops: bool,
}

impl AugmentedGraph {
    pub fn num_base(&self) -> usize {
        self.base.num_nodes
    }

    pub fn num_cns(&self) -> usize {
        self.cns.count()
    }

    pub fn num_nodes(&self) -> usize {
        self.num_base() + self.num_cns()
    }

    pub fn is_cn(&self, node: usize) -> bool {
        node >= self.num_base()
    }

    /// Base features stacked over the CN rows.
    pub fn stacked_features(&self) -> Array2<f64> {
        ndarray::concatenate![ndarray::Axis(0), self.base.features, self.cn_features]
    }

    pub fn negative_edges(&self) -> NegativeEdgeCount {
        count_negative_edges(&self.a_c, self.num_cns(), self.base.train_nodes().len())
    }

    /// CSV edge list `src,dst,weight,#cn`; the marker is `1` on rows touching a CN.
    pub fn write_edge_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "src,dst,weight,#cn")?;
        for (i, j, w) in self.a_c.upper() {
            let marker = u8::from(self.is_cn(i) || self.is_cn(j));
            writeln!(out, "{i},{j},{w},{marker}")?;
        }
        Ok(())
    }
}

/// Assembles `A_c = [[A, C], [Cᵀ, B]]` with `B` chosen by `policy` and, when
/// `add_self_loops` is set, a `+1` diagonal over all `N+K` nodes.
pub fn assemble_augmented(
    graph: &LabeledGraph,
    connection: ConnectionMatrix,
    cns: CollapsingNodeSet,
    policy: CnCnPolicy,
    add_self_loops: bool,
) -> Result<AugmentedGraph> {
    let n = graph.num_nodes;
    let k = cns.count();
    if connection.rows() != n || connection.cols() != k {
        return Err(Error::DimensionMismatch(format!(
            "connection matrix is {}x{}, expected {n}x{k}",
            connection.rows(),
            connection.cols()
        )));
    }
    let mut a_c = SignedMatrix::new(n + k);
    for &(i, j) in &graph.edges {
        a_c.set(i, j, 1.0);
    }
    for i in 0..n {
        for (c, &e) in connection.row(i).iter().enumerate() {
            if e != 0 {
                a_c.set(i, n + c, e as f64);
            }
        }
    }
    match policy {
        CnCnPolicy::None => {}
        CnCnPolicy::Negative => {
            for p in 0..k {
                for q in (p + 1)..k {
                    a_c.set(n + p, n + q, -1.0);
                }
            }
        }
        CnCnPolicy::IdentityBlock => {
            for p in 0..k {
                a_c.set(n + p, n + p, 1.0);
            }
        }
    }
    if add_self_loops {
        for i in 0..n + k {
            a_c.set(i, i, 1.0);
        }
    }
    let cn_features = init_cn_features(graph, &cns)?;
    Ok(AugmentedGraph {
        base: graph.clone(),
        cns,
        connection,
        a_c,
        cn_features,
        cn_cn_policy: policy,
        self_loops: add_self_loops,
    })
}

/// Connection matrix plus assembly in one step.
pub fn augment(
    graph: &LabeledGraph,
    cns: CollapsingNodeSet,
    policy: CnCnPolicy,
    add_self_loops: bool,
) -> Result<AugmentedGraph> {
    if !graph.train_mask.iter().any(|&b| b) {
        return Err(Error::EmptyTrainMask);
    }
    let connection = build_connection_matrix(&graph.labels, &graph.train_mask, &cns.labels)?;
    assemble_augmented(graph, connection, cns, policy, add_self_loops)
}

/// `A_y`: edges between two training nodes get `+1` for equal labels and
/// `-1` otherwise; every other edge keeps `+1`.
pub fn build_label_adjacency(graph: &LabeledGraph) -> SignedMatrix {
    let mut a_y = SignedMatrix::new(graph.num_nodes);
    for &(i, j) in &graph.edges {
        let w = match (graph.labels[i], graph.labels[j]) {
            (Some(a), Some(b)) if graph.train_mask[i] && graph.train_mask[j] => {
                if a == b {
                    1.0
                } else {
                    -1.0
                }
            }
            _ => 1.0,
        };
        a_y.set(i, j, w);
    }
    a_y
}

/// Initial CN feature block, `K × d`.
pub fn init_cn_features(graph: &LabeledGraph, cns: &CollapsingNodeSet) -> Result<Array2<f64>> {
    let k = cns.count();
    let d = graph.feature_dim();
    match cns.feature_init {
        FeatureInit::Zeros => Ok(Array2::zeros((k, d))),
        FeatureInit::LearnableEmbedding => {
            let mut rng = ChaCha8Rng::seed_from_u64(cns.seed);
            let scale = 1.0 / (d.max(1) as f64).sqrt();
            Ok(Array2::from_shape_simple_fn((k, d), || {
                let z: f64 = StandardNormal.sample(&mut rng);
                z * scale
            }))
        }
        FeatureInit::ClassMeanLinear => {
            let train = graph.train_nodes();
            if train.is_empty() {
                return Err(Error::EmptyTrainMask);
            }
            let mut sums = Array2::<f64>::zeros((graph.num_classes, d));
            let mut counts = vec![0usize; graph.num_classes];
            let mut global = ndarray::Array1::<f64>::zeros(d);
            for &i in &train {
                let y = graph.labels[i].ok_or(Error::UnlabeledTrainNode(i))?;
                sums.row_mut(y).scaled_add(1.0, &graph.features.row(i));
                counts[y] += 1;
                global.scaled_add(1.0, &graph.features.row(i));
            }
            global /= train.len() as f64;
            let mut out = Array2::zeros((k, d));
            for (row, &c) in cns.labels.iter().enumerate() {
                if c >= graph.num_classes {
                    return Err(Error::InvalidArgument(format!("CN label {c} out of range")));
                }
                if counts[c] == 0 {
                    log::warn!("class {c} has no training nodes; CN {row} starts from the global train mean");
                    out.row_mut(row).assign(&global);
                } else {
                    out.row_mut(row).assign(&(&sums.row(c) / counts[c] as f64));
                }
            }
            Ok(out)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NegativeEdgeCount {
    /// `|ℰ⁻|`
    pub count: usize,
    /// `K(K−1)/2 + K(|𝒯|−1)`
    pub theorem_bound: usize,
}

pub fn negative_edge_bound(k: usize, train_size: usize) -> usize {
    k * k.saturating_sub(1) / 2 + k * train_size.saturating_sub(1)
}

pub fn count_negative_edges(a: &SignedMatrix, k: usize, train_size: usize) -> NegativeEdgeCount {
    NegativeEdgeCount { count: a.negative_edges(), theorem_bound: negative_edge_bound(k, train_size) }
}
