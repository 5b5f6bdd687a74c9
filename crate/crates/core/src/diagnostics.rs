//! Numerical checks of the theory: over-smoothing probe, sensitivity bound,
//! signed spectrum, Forman curvature and energy traces.

use std::collections::BTreeSet;
use std::io::Write;

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::augment::AugmentedGraph;
use crate::eig::{spectral_norm, symmetric_eig_sparse};
use crate::graph::{dirichlet_energy, signed_laplacian, LabeledGraph, SignedEdgeList, SignedMatrix, SparseMatrix};
use crate::{Error, Result};

/// Eigenvalues below this count as negative.
pub const NEGATIVE_EIGENVALUE_THRESHOLD: f64 = -1e-10;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OsmProbe {
    /// Standard deviation of the first `N` entries after the last iteration.
    pub x_block_std: f64,
    pub converged_to_constant: bool,
    /// One or zero original nodes: trivially constant.
    pub degenerate: bool,
    pub iterations: usize,
}

/// Power iteration `h ← Â h` with sup-norm renormalization from a seeded
/// uniform start; reports how far the original-node block is from constant.
pub fn osm_fixed_point_probe(
    a_hat: &SparseMatrix,
    num_base: usize,
    iterations: usize,
    tolerance: f64,
    seed: u64,
) -> Result<OsmProbe> {
    let n = a_hat.nrows;
    if a_hat.ncols != n || num_base > n {
        return Err(Error::DimensionMismatch(format!("{}x{} operator, {num_base} base nodes", n, a_hat.ncols)));
    }
    if num_base <= 1 {
        return Ok(OsmProbe { x_block_std: 0.0, converged_to_constant: true, degenerate: true, iterations: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut h = Array2::from_shape_simple_fn((n, 1), || rng.random_range(-1.0..1.0));
    for _ in 0..iterations {
        h = a_hat.matmul(&h);
        let sup = h.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if sup == 0.0 || !sup.is_finite() {
            break;
        }
        h /= sup;
    }
    let x = h.column(0).slice(ndarray::s![..num_base]).to_owned();
    let mean = x.sum() / num_base as f64;
    let std = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / num_base as f64).sqrt();
    Ok(OsmProbe { x_block_std: std, converged_to_constant: std < tolerance, degenerate: false, iterations })
}

/// `h^{(ℓ+1)} = σ(Â h^{(ℓ)} W^{(ℓ)})` with `σ = tanh`, the model used for the
/// sensitivity bound.
pub fn tanh_propagate(a_hat: &SparseMatrix, weights: &[Array2<f64>], x: &Array2<f64>, r: usize) -> Array2<f64> {
    let mut h = x.clone();
    for w in &weights[..r] {
        h = a_hat.matmul(&h.dot(w)).mapv(f64::tanh);
    }
    h
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityPair {
    pub i: usize,
    pub s: usize,
    pub empirical: f64,
    pub bound: f64,
    pub satisfied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    pub r: usize,
    pub alpha: f64,
    pub beta_in: f64,
    pub pairs: Vec<SensitivityPair>,
    pub violations: usize,
}

pub const FD_STEP: f64 = 1e-5;

/// `(Σ_{ℓ=0}^{r} |Â|^ℓ)_{·,s}` as a dense column.
fn path_sum_column(abs_a: &SparseMatrix, s: usize, r: usize) -> Array1<f64> {
    let n = abs_a.nrows;
    let mut v = Array2::zeros((n, 1));
    v[[s, 0]] = 1.0;
    let mut total = v.clone();
    for _ in 0..r {
        v = abs_a.matmul(&v);
        total += &v;
    }
    total.column(0).to_owned()
}

/// Compares the central-difference Jacobian `∂h_i^{(r)}/∂x_s` (spectral norm)
/// with `(2αβ)^r (Σ_{ℓ≤r} |Â|^ℓ)_{is}` where `β` is the largest spectral norm
/// of the first `r` weight matrices.
pub fn sensitivity_check(
    weights: &[Array2<f64>],
    a_hat: &SparseMatrix,
    x: &Array2<f64>,
    r: usize,
    alpha: f64,
    pairs: &[(usize, usize)],
) -> Result<SensitivityReport> {
    if weights.len() < r {
        return Err(Error::InvalidArgument(format!("{r} layers requested, {} weights given", weights.len())));
    }
    if x.nrows() != a_hat.nrows {
        return Err(Error::DimensionMismatch(format!("{} feature rows, {} nodes", x.nrows(), a_hat.nrows)));
    }
    let mut width = x.ncols();
    for w in &weights[..r] {
        if w.nrows() != width {
            return Err(Error::DimensionMismatch(format!("weight has {} rows, expected {width}", w.nrows())));
        }
        width = w.ncols();
    }
    let beta_in = weights[..r].iter().map(spectral_norm).collect::<Result<Vec<_>>>()?.into_iter().fold(0.0, f64::max);
    let mut abs_a = a_hat.clone();
    abs_a.values.iter_mut().for_each(|v| *v = v.abs());
    let factor = (2.0 * alpha * beta_in).powi(r as i32);

    let d0 = x.ncols();
    let mut out = Vec::with_capacity(pairs.len());
    for &(i, s) in pairs {
        if i >= x.nrows() || s >= x.nrows() {
            return Err(Error::InvalidArgument(format!("pair ({i}, {s}) out of range")));
        }
        let mut jac = Array2::zeros((width, d0));
        for c in 0..d0 {
            let mut plus = x.clone();
            plus[[s, c]] += FD_STEP;
            let mut minus = x.clone();
            minus[[s, c]] -= FD_STEP;
            let hp = tanh_propagate(a_hat, weights, &plus, r);
            let hm = tanh_propagate(a_hat, weights, &minus, r);
            for k in 0..width {
                jac[[k, c]] = (hp[[i, k]] - hm[[i, k]]) / (2.0 * FD_STEP);
            }
        }
        let empirical = spectral_norm(&jac)?;
        let bound = factor * path_sum_column(&abs_a, s, r)[i];
        let satisfied = empirical <= bound * (1.0 + 1e-6);
        out.push(SensitivityPair { i, s, empirical, bound, satisfied });
    }
    let violations = out.iter().filter(|p| !p.satisfied).count();
    Ok(SensitivityReport { r, alpha, beta_in, pairs: out, violations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub negative_count: usize,
    pub theorem_bound: usize,
    pub edge_negative_count: usize,
    pub within_theorem_bound: bool,
    pub within_edge_bound: bool,
}

impl SpectrumReport {
    pub fn write_eigenvalue_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "index,eigenvalue")?;
        for (k, v) in self.eigenvalues.iter().enumerate() {
            writeln!(out, "{k},{v}")?;
        }
        Ok(())
    }
}

/// Spectrum of the signed Laplacian of `a`'s off-diagonal entries.
pub fn signed_spectrum(a: &SignedMatrix, theorem_bound: usize) -> Result<SpectrumReport> {
    let edges = SignedEdgeList::from_matrix(a);
    let l = signed_laplacian(&edges);
    let eig = symmetric_eig_sparse(&l)?;
    let negative_count = eig.negative_count(NEGATIVE_EIGENVALUE_THRESHOLD);
    let edge_negative_count = edges.negative_count();
    if negative_count > edge_negative_count || negative_count > theorem_bound {
        log::warn!(
            "{negative_count} negative eigenvalues exceed a bound (|E-| = {edge_negative_count}, theorem {theorem_bound})"
        );
    }
    Ok(SpectrumReport {
        eigenvalues: eig.values,
        negative_count,
        theorem_bound,
        edge_negative_count,
        within_theorem_bound: negative_count <= theorem_bound,
        within_edge_bound: negative_count <= edge_negative_count,
    })
}

pub fn spectrum_report(aug: &AugmentedGraph) -> Result<SpectrumReport> {
    signed_spectrum(&aug.a_c, aug.negative_edges().theorem_bound)
}

/// Off-diagonal support of `|m|` as sorted neighbor sets.
pub fn support_neighbors(m: &SignedMatrix) -> Vec<BTreeSet<usize>> {
    let mut nb = vec![BTreeSet::new(); m.dim()];
    for (i, j, _) in m.off_diagonal() {
        nb[i].insert(j);
        nb[j].insert(i);
    }
    nb
}

/// `FC₃(i,j) = 4 − d_i − d_j + 3·#triangles(i,j)` on the support of `m`.
pub fn forman_fc3(m: &SignedMatrix, i: usize, j: usize) -> Result<f64> {
    fc3_from_neighbors(&support_neighbors(m), i, j)
}

fn fc3_from_neighbors(nb: &[BTreeSet<usize>], i: usize, j: usize) -> Result<f64> {
    if i >= nb.len() || j >= nb.len() || i == j || !nb[i].contains(&j) {
        return Err(Error::InvalidArgument(format!("({i}, {j}) is not an edge")));
    }
    let triangles = nb[i].intersection(&nb[j]).count();
    Ok(4.0 - nb[i].len() as f64 - nb[j].len() as f64 + 3.0 * triangles as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EdgeCurvature {
    pub i: usize,
    pub j: usize,
    pub before: f64,
    pub after: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvatureReport {
    pub edges: Vec<EdgeCurvature>,
    pub min_delta: f64,
    pub mean_delta: f64,
}

/// FC₃ of every original edge before and after augmentation.
pub fn curvature_delta_report(graph: &LabeledGraph, aug: &AugmentedGraph) -> Result<CurvatureReport> {
    let before = support_neighbors(&graph.adjacency());
    let after = support_neighbors(&aug.a_c);
    let edges = graph
        .edges
        .iter()
        .map(|&(i, j)| {
            let b = fc3_from_neighbors(&before, i, j)?;
            let a = fc3_from_neighbors(&after, i, j)?;
            Ok(EdgeCurvature { i, j, before: b, after: a, delta: a - b })
        })
        .collect::<Result<Vec<_>>>()?;
    let (min_delta, mean_delta) = if edges.is_empty() {
        (0.0, 0.0)
    } else {
        (
            edges.iter().map(|e| e.delta).fold(f64::INFINITY, f64::min),
            edges.iter().map(|e| e.delta).sum::<f64>() / edges.len() as f64,
        )
    };
    Ok(CurvatureReport { edges, min_delta, mean_delta })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EnergyStep {
    pub t: f64,
    pub norm_sq: f64,
    pub dirichlet: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyTrace {
    pub lambda_max: f64,
    pub steps: Vec<EnergyStep>,
    /// Steps where the Dirichlet energy exceeds `λ_max‖h‖²`.
    pub inconsistent_steps: Vec<usize>,
}

impl EnergyTrace {
    pub fn max_norm_sq(&self) -> f64 {
        self.steps.iter().map(|s| s.norm_sq).fold(0.0, f64::max)
    }

    /// `‖h‖²` at the first recorded time `≥ t`.
    pub fn norm_sq_at(&self, t: f64) -> Option<f64> {
        self.steps.iter().find(|s| s.t >= t - 1e-12).map(|s| s.norm_sq)
    }
}

/// Records `‖h‖²`, `tr(hᵀLh)` and `λ_max‖h‖²` for every state.
pub fn energy_trace(times: &[f64], states: &[Array2<f64>], l_c: &SignedMatrix) -> Result<EnergyTrace> {
    if times.len() != states.len() {
        return Err(Error::DimensionMismatch(format!("{} times, {} states", times.len(), states.len())));
    }
    let lambda_max = symmetric_eig_sparse(l_c)?.max();
    let mut steps = Vec::with_capacity(states.len());
    let mut inconsistent = Vec::new();
    for (k, (&t, h)) in times.iter().zip(states).enumerate() {
        let norm_sq: f64 = h.iter().map(|x| x * x).sum();
        let dirichlet = dirichlet_energy(l_c, h)?;
        let bound = lambda_max * norm_sq;
        if dirichlet > bound * (1.0 + 1e-8) + 1e-12 {
            inconsistent.push(k);
        }
        steps.push(EnergyStep { t, norm_sq, dirichlet, bound });
    }
    Ok(EnergyTrace { lambda_max, steps, inconsistent_steps: inconsistent })
}
