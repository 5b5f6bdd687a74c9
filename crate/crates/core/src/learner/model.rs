use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::tape::{NodeId, Tape};
use crate::augment::{AugmentedGraph, FeatureInit};
use crate::graph::{mask_indices, normalize_rw, normalize_sym, LabeledGraph, SignedMatrix, SparseMatrix};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Gcn,
    Gat,
    Uygcn,
    Uygat,
    Grand,
    Acmp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] =
        [ModelKind::Gcn, ModelKind::Gat, ModelKind::Uygcn, ModelKind::Uygat, ModelKind::Grand, ModelKind::Acmp];

    pub fn uses_attention(self) -> bool {
        matches!(self, ModelKind::Gat | ModelKind::Uygat)
    }

    /// Runs on the CN-augmented graph.
    pub fn is_augmented(self) -> bool {
        matches!(self, ModelKind::Uygcn | ModelKind::Uygat)
    }

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Gat => "gat",
            ModelKind::Uygcn => "uygcn",
            ModelKind::Uygat => "uygat",
            ModelKind::Grand => "grand",
            ModelKind::Acmp => "acmp",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown model kind {s:?}")))
    }
}

/// Training hyperparameters. Adam moments are fixed at `β₁ = 0.9`,
/// `β₂ = 0.999`, `ε = 1e-8`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub dropout: f64,
    pub hidden_dim: usize,
    pub layers: usize,
    pub epochs_max: usize,
    pub seed: u64,
    /// Double-well coefficient; `0` disables the term.
    pub delta: f64,
    /// ACMP's constant `β`.
    pub beta: f64,
    /// Euler step of the GRAND and ACMP propagation layers.
    pub step: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.01,
            weight_decay: 0.005,
            dropout: 0.5,
            hidden_dim: 16,
            layers: 2,
            epochs_max: 200,
            seed: 0,
            delta: 0.0,
            beta: 0.1,
            step: 0.5,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr > 0.0) {
            return Err(Error::InvalidArgument(format!("lr must be positive, got {}", self.lr)));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::InvalidArgument(format!("dropout must be in [0, 1), got {}", self.dropout)));
        }
        if self.layers == 0 || self.hidden_dim == 0 {
            return Err(Error::InvalidArgument("layers and hidden_dim must be positive".into()));
        }
        if self.weight_decay < 0.0 || self.delta < 0.0 {
            return Err(Error::InvalidArgument("weight_decay and delta must be non-negative".into()));
        }
        Ok(())
    }
}

/// Everything a forward pass needs besides the parameters.
#[derive(Debug, Clone)]
pub struct Problem {
    pub kind: ModelKind,
    /// `(N+K) × (N+K)` propagation operator.
    pub propagation: Arc<SparseMatrix>,
    pub num_base: usize,
    pub num_cns: usize,
    pub base_features: Array2<f64>,
    /// Initial CN rows, `K × d₀`.
    pub cn_init: Array2<f64>,
    pub cn_policy: FeatureInit,
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

impl Problem {
    /// Baseline kinds on the original graph.
    pub fn from_graph(graph: &LabeledGraph, kind: ModelKind, config: &TrainConfig) -> Result<Self> {
        if kind.is_augmented() {
            return Err(Error::InvalidArgument(format!("{kind} needs an augmented graph")));
        }
        let propagation = propagation_for(kind, &graph.adjacency(), graph.num_nodes, config)?;
        Ok(Problem {
            kind,
            propagation: Arc::new(propagation),
            num_base: graph.num_nodes,
            num_cns: 0,
            base_features: graph.features.clone(),
            cn_init: Array2::zeros((0, graph.feature_dim())),
            cn_policy: FeatureInit::Zeros,
            labels: graph.labels.clone(),
            num_classes: graph.num_classes,
            train_mask: graph.train_mask.clone(),
            val_mask: graph.val_mask.clone(),
            test_mask: graph.test_mask.clone(),
        })
    }

    /// UYGCN / UYGAT on `A_c`. Self-loops are added at normalization unless
    /// the augmented adjacency already carries them.
    pub fn from_augmented(aug: &AugmentedGraph, kind: ModelKind, config: &TrainConfig) -> Result<Self> {
        if !kind.is_augmented() {
            return Err(Error::InvalidArgument(format!("{kind} runs on the original graph")));
        }
        let propagation = if aug.self_loops {
            normalize_sym(&aug.a_c, false)?
        } else {
            normalize_sym(&aug.a_c, true)?
        };
        let _ = config;
        Ok(Problem {
            kind,
            propagation: Arc::new(propagation.to_csr()),
            num_base: aug.num_base(),
            num_cns: aug.num_cns(),
            base_features: aug.base.features.clone(),
            cn_init: aug.cn_features.clone(),
            cn_policy: aug.cns.feature_init,
            labels: aug.base.labels.clone(),
            num_classes: aug.base.num_classes,
            train_mask: aug.base.train_mask.clone(),
            val_mask: aug.base.val_mask.clone(),
            test_mask: aug.base.test_mask.clone(),
        })
    }

    pub fn num_nodes(&self) -> usize {
        self.num_base + self.num_cns
    }

    pub fn feature_dim(&self) -> usize {
        self.base_features.ncols()
    }

    pub fn train_rows(&self) -> Vec<usize> {
        mask_indices(&self.train_mask)
    }
}

fn propagation_for(kind: ModelKind, adjacency: &SignedMatrix, n: usize, config: &TrainConfig) -> Result<SparseMatrix> {
    Ok(match kind {
        ModelKind::Gcn | ModelKind::Gat | ModelKind::Uygcn | ModelKind::Uygat => {
            normalize_sym(adjacency, true)?.to_csr()
        }
        ModelKind::Grand => {
            // one Euler step of Σ_j a_ij (h_j − h_i) with row-stochastic a
            let rw = normalize_rw(adjacency, true)?;
            let rows = (0..n)
                .map(|i| {
                    rw.row(i)
                        .map(|(j, w)| {
                            let id = if i == j { 1.0 - config.step } else { 0.0 };
                            (j, id + config.step * w)
                        })
                        .collect()
                })
                .collect();
            SparseMatrix::from_rows(n, n, rows)
        }
        ModelKind::Acmp => {
            // Σ_j (a_ij − β)(h_j − h_i) over original edges
            let rw = normalize_rw(adjacency, true)?;
            let rows = (0..n)
                .map(|i| {
                    let coeffs: Vec<(usize, f64)> =
                        rw.row(i).filter(|&(j, _)| j != i).map(|(j, w)| (j, w - config.beta)).collect();
                    let total: f64 = coeffs.iter().map(|c| c.1).sum();
                    let mut row: Vec<(usize, f64)> =
                        coeffs.into_iter().map(|(j, c)| (j, config.step * c)).collect();
                    row.push((i, 1.0 - config.step * total));
                    row.sort_unstable_by_key(|&(j, _)| j);
                    row
                })
                .collect();
            SparseMatrix::from_rows(n, n, rows)
        }
    })
}

/// Named parameter tensors. Gradients use the same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub names: Vec<String>,
    pub tensors: Vec<Array2<f64>>,
}

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        ModelParams {
            names: self.names.clone(),
            tensors: self.tensors.iter().map(|t| Array2::zeros(t.dim())).collect(),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Array2<f64>> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    fn push(&mut self, name: String, t: Array2<f64>) {
        self.names.push(name);
        self.tensors.push(t);
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors.iter().flat_map(|t| t.iter()).map(|x| x * x).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().flat_map(|t| t.iter()).all(|x| x.is_finite())
    }

    /// Layer widths: `d_ℓ → d'_ℓ → d_{ℓ+1}` with `d'_ℓ = hidden`, `d_L = C`.
    pub fn init(problem: &Problem, config: &TrainConfig, rng: &mut impl Rng) -> Self {
        let mut params = ModelParams { names: Vec::new(), tensors: Vec::new() };
        let mut d_in = problem.feature_dim();
        for l in 0..config.layers {
            let d_out = if l + 1 == config.layers { problem.num_classes } else { config.hidden_dim };
            params.push(format!("layer{l}.w_in"), glorot(d_in, config.hidden_dim, rng));
            params.push(format!("layer{l}.w_out"), glorot(config.hidden_dim, d_out, rng));
            if problem.kind.uses_attention() {
                params.push(format!("layer{l}.att"), glorot(1, 2 * config.hidden_dim, rng));
            }
            d_in = d_out;
        }
        if problem.num_cns > 0 {
            let d = problem.feature_dim();
            match problem.cn_policy {
                FeatureInit::ClassMeanLinear => {
                    params.push("cn.scale".into(), Array2::ones((problem.num_cns, d)));
                    params.push("cn.bias".into(), Array2::zeros((problem.num_cns, d)));
                }
                FeatureInit::LearnableEmbedding => params.push("cn.embedding".into(), problem.cn_init.clone()),
                FeatureInit::Zeros => {}
            }
        }
        params
    }
}

fn glorot(rows: usize, cols: usize, rng: &mut impl Rng) -> Array2<f64> {
    let a = (6.0 / (rows + cols) as f64).sqrt();
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-a..a))
}

/// Tape of one forward pass.
pub struct Forward {
    pub tape: Tape,
    pub logits: NodeId,
    /// Per layer: the node after propagation, activation and double-well.
    pub propagated: Vec<NodeId>,
    /// Per layer attention node, when the kind attends.
    pub attention: Vec<NodeId>,
}

/// Records the forward pass. With `dropout_rng` set, inverted dropout is
/// applied to the input of every `W_in` product.
pub fn forward_tape(
    params: &ModelParams,
    problem: &Problem,
    config: &TrainConfig,
    mut dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<Forward> {
    let mut tape = Tape::new();
    let slots: Vec<NodeId> = params
        .tensors
        .iter()
        .enumerate()
        .map(|(i, t)| tape.param(i, t.clone()))
        .collect();
    let slot = |name: &str| params.index_of(name).map(|i| slots[i]);

    let base = tape.input(problem.base_features.clone());
    let mut h = if problem.num_cns == 0 {
        base
    } else {
        let cn_rows = match problem.cn_policy {
            FeatureInit::ClassMeanLinear => {
                let means = tape.input(problem.cn_init.clone());
                let scale = slot("cn.scale").ok_or(Error::MissingParameter("cn.scale"))?;
                let bias = slot("cn.bias").ok_or(Error::MissingParameter("cn.bias"))?;
                tape.affine_rows(means, scale, bias)
            }
            FeatureInit::LearnableEmbedding => slot("cn.embedding").ok_or(Error::MissingParameter("cn.embedding"))?,
            FeatureInit::Zeros => tape.input(Array2::zeros(problem.cn_init.dim())),
        };
        tape.concat_rows(base, cn_rows)
    };

    let mut propagated = Vec::new();
    let mut attention = Vec::new();
    for l in 0..config.layers {
        if let Some(rng) = dropout_rng.as_deref_mut() {
            if config.dropout > 0.0 {
                let keep = 1.0 - config.dropout;
                let dim = tape.value(h).dim();
                let mask = Array2::from_shape_simple_fn(dim, || if rng.random::<f64>() < keep { 1.0 / keep } else { 0.0 });
                h = tape.mask(h, mask);
            }
        }
        let w_in = slot(&format!("layer{l}.w_in")).ok_or(Error::MissingParameter("w_in"))?;
        let w_out = slot(&format!("layer{l}.w_out")).ok_or(Error::MissingParameter("w_out"))?;
        let z = tape.matmul(h, w_in);
        let mut p = if problem.kind.uses_attention() {
            let att = slot(&format!("layer{l}.att")).ok_or(Error::MissingParameter("att"))?;
            let node = tape.attend(&problem.propagation, problem.kind == ModelKind::Uygat, z, att);
            attention.push(node);
            node
        } else {
            tape.spmm(problem.propagation.clone(), z)
        };
        if l + 1 < config.layers {
            p = tape.relu(p);
        }
        if config.delta > 0.0 {
            p = tape.double_well(p, config.delta);
        }
        propagated.push(p);
        h = tape.matmul(p, w_out);
        if tape.value(h).iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(l));
        }
    }
    Ok(Forward { tape, logits: h, propagated, attention })
}

/// Evaluation-mode logits for all `N+K` rows.
pub fn forward(params: &ModelParams, problem: &Problem, config: &TrainConfig) -> Result<Array2<f64>> {
    let f = forward_tape(params, problem, config, None)?;
    Ok(f.tape.value(f.logits).clone())
}

/// Deduplicated, sorted row indices over which the loss is averaged.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Batch(Vec<usize>);

impl Batch {
    pub fn from_mask(mask: &[bool]) -> Self {
        Batch(mask_indices(mask))
    }

    /// Repeated indices count once.
    pub fn from_indices(mut rows: Vec<usize>) -> Self {
        rows.sort_unstable();
        rows.dedup();
        Batch(rows)
    }

    pub fn rows(&self) -> &[usize] {
        &self.0
    }
}

/// Mean cross-entropy over `rows` and its gradient w.r.t. the logits.
pub fn cross_entropy(logits: &Array2<f64>, labels: &[Option<usize>], rows: &[usize]) -> Result<(f64, Array2<f64>)> {
    if rows.is_empty() {
        return Err(Error::EmptyTrainMask);
    }
    let mut grad = Array2::zeros(logits.dim());
    let mut loss = 0.0;
    let n = rows.len() as f64;
    for &i in rows {
        let y = labels[i].ok_or(Error::UnlabeledTrainNode(i))?;
        let row = logits.row(i);
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        let z: f64 = row.iter().map(|&v| (v - max).exp()).sum();
        let log_z = max + z.ln();
        loss -= row[y] - log_z;
        for (c, &v) in row.iter().enumerate() {
            let p = (v - log_z).exp();
            grad[[i, c]] = (p - if c == y { 1.0 } else { 0.0 }) / n;
        }
    }
    Ok((loss / n, grad))
}

/// Mean cross-entropy plus `weight_decay·‖θ‖²/2`, and exact gradients.
pub fn loss_and_gradients(
    params: &ModelParams,
    problem: &Problem,
    batch: &Batch,
    config: &TrainConfig,
    dropout_rng: Option<&mut ChaCha8Rng>,
) -> Result<(f64, ModelParams)> {
    let f = forward_tape(params, problem, config, dropout_rng)?;
    let (ce, seed) = cross_entropy(f.tape.value(f.logits), &problem.labels, batch.rows())?;
    let raw = f.tape.backward(f.logits, seed, params.tensors.len());
    let mut grads = params.zeros_like();
    for ((g, slot), p) in grads.tensors.iter_mut().zip(raw).zip(&params.tensors) {
        if let Some(s) = slot {
            *g = s;
        }
        if config.weight_decay > 0.0 {
            g.scaled_add(config.weight_decay, p);
        }
    }
    let loss = ce + 0.5 * config.weight_decay * params.squared_norm();
    Ok((loss, grads))
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
