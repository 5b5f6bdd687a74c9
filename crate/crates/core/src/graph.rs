//! Graph and signed-matrix primitives.
//!
//! Degrees are always absolute: `D_ii = Σ_j |m_ij|`. Normalizations never
//! divide by a signed row sum, which may vanish or flip sign.

use std::collections::BTreeMap;

use ndarray::{Array2, ArrayView2};
use serde::Serialize;

use crate::{Error, Result};

/// Undirected graph with node features, partial labels and split masks.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledGraph {
    pub num_nodes: usize,
    /// Canonical `(min, max)` pairs, sorted, without duplicates or self-loops.
    pub edges: Vec<(usize, usize)>,
    pub features: Array2<f64>,
    pub labels: Vec<Option<usize>>,
    pub num_classes: usize,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

impl LabeledGraph {
    /// Builds a graph with empty masks. Edges are canonicalized and
    /// deduplicated; self-loops are dropped with a warning.
    pub fn new(
        num_nodes: usize,
        edges: impl IntoIterator<Item = (usize, usize)>,
        features: Array2<f64>,
        labels: Vec<Option<usize>>,
        num_classes: usize,
    ) -> Result<Self> {
        let mut canon = Vec::new();
        let mut self_loops = 0usize;
        for (a, b) in edges {
            if a >= num_nodes || b >= num_nodes {
                return Err(Error::InvalidGraph(format!(
                    "edge ({a}, {b}) out of range for {num_nodes} nodes"
                )));
            }
            if a == b {
                self_loops += 1;
                continue;
            }
            canon.push((a.min(b), a.max(b)));
        }
        if self_loops > 0 {
            log::warn!("dropped {self_loops} self-loop(s)");
        }
        canon.sort_unstable();
        canon.dedup();
        let graph = LabeledGraph {
            num_nodes,
            edges: canon,
            features,
            labels,
            num_classes,
            train_mask: vec![false; num_nodes],
            val_mask: vec![false; num_nodes],
            test_mask: vec![false; num_nodes],
        };
        graph.validate()?;
        Ok(graph)
    }

    pub fn with_masks(mut self, train: Vec<bool>, val: Vec<bool>, test: Vec<bool>) -> Result<Self> {
        self.train_mask = train;
        self.val_mask = val;
        self.test_mask = test;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_nodes;
        if self.features.nrows() != n {
            return Err(Error::InvalidGraph(format!(
                "feature matrix has {} rows, expected {n}",
                self.features.nrows()
            )));
        }
        if self.labels.len() != n {
            return Err(Error::InvalidGraph(format!("{} labels for {n} nodes", self.labels.len())));
        }
        if let Some((i, c)) = self
            .labels
            .iter()
            .enumerate()
            .find_map(|(i, l)| l.filter(|&c| c >= self.num_classes).map(|c| (i, c)))
        {
            return Err(Error::InvalidGraph(format!(
                "node {i} has class {c} >= {}",
                self.num_classes
            )));
        }
        for mask in [&self.train_mask, &self.val_mask, &self.test_mask] {
            if mask.len() != n {
                return Err(Error::InvalidGraph(format!("mask length {} != {n}", mask.len())));
            }
        }
        for i in 0..n {
            let hits = [self.train_mask[i], self.val_mask[i], self.test_mask[i]]
                .iter()
                .filter(|&&b| b)
                .count();
            if hits > 1 {
                return Err(Error::InvalidGraph(format!("node {i} appears in more than one mask")));
            }
        }
        for w in self.edges.windows(2) {
            if w[0] >= w[1] {
                return Err(Error::InvalidGraph("edges not canonical".into()));
            }
        }
        if self.edges.iter().any(|&(a, b)| a >= b || b >= n) {
            return Err(Error::InvalidGraph("edges not canonical".into()));
        }
        Ok(())
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn neighbors(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.num_nodes];
        for &(a, b) in &self.edges {
            adj[a].push(b);
            adj[b].push(a);
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_nodes];
        for &(a, b) in &self.edges {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Unit-weight adjacency.
    pub fn adjacency(&self) -> SignedMatrix {
        let mut m = SignedMatrix::new(self.num_nodes);
        for &(a, b) in &self.edges {
            m.set(a, b, 1.0);
        }
        m
    }

    pub fn train_nodes(&self) -> Vec<usize> {
        mask_indices(&self.train_mask)
    }

    pub fn is_connected(&self) -> bool {
        if self.num_nodes == 0 {
            return true;
        }
        let adj = self.neighbors();
        let mut seen = vec![false; self.num_nodes];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.num_nodes
    }
}

pub fn mask_indices(mask: &[bool]) -> Vec<usize> {
    mask.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HomophilyScore {
    pub score: f64,
    /// Labeled nodes that contributed to the mean.
    pub evaluated: usize,
    /// Labeled nodes skipped for having no neighbors.
    pub skipped_isolated: usize,
}

/// Mean over labeled nodes of the fraction of neighbors sharing the node's label.
pub fn homophily_score(graph: &LabeledGraph) -> Result<HomophilyScore> {
    if graph.labels.iter().all(Option::is_none) {
        return Err(Error::NoLabels);
    }
    let adj = graph.neighbors();
    let mut total = 0.0;
    let mut evaluated = 0;
    let mut skipped = 0;
    for (i, nbrs) in adj.iter().enumerate() {
        let Some(y) = graph.labels[i] else { continue };
        if nbrs.is_empty() {
            skipped += 1;
            continue;
        }
        let same = nbrs.iter().filter(|&&j| graph.labels[j] == Some(y)).count();
        total += same as f64 / nbrs.len() as f64;
        evaluated += 1;
    }
    let score = if evaluated == 0 { 0.0 } else { total / evaluated as f64 };
    Ok(HomophilyScore { score, evaluated, skipped_isolated: skipped })
}

/// Symmetric sparse matrix with real, possibly negative, weights.
///
/// Only the upper triangle (including the diagonal) is stored, keyed by
/// `(min, max)`, so `M[i][j] == M[j][i]` holds exactly. Zeros are never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedMatrix {
    dim: usize,
    entries: BTreeMap<(usize, usize), f64>,
}

impl SignedMatrix {
    pub fn new(dim: usize) -> Self {
        SignedMatrix { dim, entries: BTreeMap::new() }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::new(dim);
        for i in 0..dim {
            m.set(i, i, 1.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored upper-triangle entries.
    pub fn stored(&self) -> usize {
        self.entries.len()
    }

    fn key(i: usize, j: usize) -> (usize, usize) {
        (i.min(j), i.max(j))
    }

    pub fn set(&mut self, i: usize, j: usize, w: f64) {
        assert!(i < self.dim && j < self.dim, "index ({i}, {j}) out of range {}", self.dim);
        if w == 0.0 {
            self.entries.remove(&Self::key(i, j));
        } else {
            self.entries.insert(Self::key(i, j), w);
        }
    }

    pub fn add(&mut self, i: usize, j: usize, w: f64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + w);
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries.get(&Self::key(i, j)).copied().unwrap_or(0.0)
    }

    /// Upper-triangle entries `(i, j, w)` with `i <= j`.
    pub fn upper(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(i, j), &w)| (i, j, w))
    }

    /// Off-diagonal upper entries: the edges.
    pub fn off_diagonal(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.upper().filter(|&(i, j, _)| i != j)
    }

    /// Both orientations of every off-diagonal entry plus each diagonal entry once.
    pub fn full(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.upper().flat_map(|(i, j, w)| {
            let mirror = (i != j).then_some((j, i, w));
            std::iter::once((i, j, w)).chain(mirror)
        })
    }

    pub fn rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![Vec::new(); self.dim];
        for (i, j, w) in self.full() {
            rows[i].push((j, w));
        }
        for r in &mut rows {
            r.sort_unstable_by_key(|&(j, _)| j);
        }
        rows
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.dim, self.dim));
        for (i, j, w) in self.full() {
            d[[i, j]] = w;
        }
        d
    }

    /// Reads a dense matrix, rejecting asymmetry beyond `tol`.
    pub fn from_dense(m: ArrayView2<f64>, tol: f64) -> Result<Self> {
        let n = m.nrows();
        if m.ncols() != n {
            return Err(Error::DimensionMismatch(format!("{}x{} is not square", n, m.ncols())));
        }
        let mut out = Self::new(n);
        for i in 0..n {
            for j in i..n {
                if (m[[i, j]] - m[[j, i]]).abs() > tol {
                    return Err(Error::InvalidArgument(format!("matrix not symmetric at ({i}, {j})")));
                }
                out.set(i, j, m[[i, j]]);
            }
        }
        Ok(out)
    }

    pub fn abs(&self) -> Self {
        SignedMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|(&k, &w)| (k, w.abs())).collect(),
        }
    }

    pub fn with_self_loops(&self) -> Self {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.add(i, i, 1.0);
        }
        m
    }

    /// Number of strictly negative off-diagonal entries (unordered pairs).
    pub fn negative_edges(&self) -> usize {
        self.off_diagonal().filter(|&(_, _, w)| w < 0.0).count()
    }

    pub fn to_csr(&self) -> SparseMatrix {
        SparseMatrix::from_rows(self.dim, self.dim, self.rows())
    }
}

/// General (not necessarily symmetric) matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_rows(nrows: usize, ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(nrows + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (j, w) in row {
                indices.push(j);
                values.push(w);
            }
            indptr.push(indices.len());
        }
        SparseMatrix { nrows, ncols, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|&(c, _)| c == j).map_or(0.0, |(_, w)| w)
    }

    pub fn to_dense(&self) -> Array2<f64> {
        let mut d = Array2::zeros((self.nrows, self.ncols));
        for i in 0..self.nrows {
            for (j, w) in self.row(i) {
                d[[i, j]] += w;
            }
        }
        d
    }

    /// `self · h`
    pub fn matmul(&self, h: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.ncols, h.nrows(), "sparse matmul dimension mismatch");
        let mut out = Array2::zeros((self.nrows, h.ncols()));
        for i in 0..self.nrows {
            let mut row = out.row_mut(i);
            for (j, w) in self.row(i) {
                row.scaled_add(w, &h.row(j));
            }
        }
        out
    }

    /// `selfᵀ · g`
    pub fn transpose_matmul(&self, g: &Array2<f64>) -> Array2<f64> {
        assert_eq!(self.nrows, g.nrows(), "sparse matmul dimension mismatch");
        let mut out = Array2::zeros((self.ncols, g.ncols()));
        for i in 0..self.nrows {
            for (j, w) in self.row(i) {
                out.row_mut(j).scaled_add(w, &g.row(i));
            }
        }
        out
    }

    pub fn row_abs_sums(&self) -> Vec<f64> {
        (0..self.nrows).map(|i| self.row(i).map(|(_, w)| w.abs()).sum()).collect()
    }
}

/// Absolute degrees `D_ii = Σ_j |m_ij|`.
pub fn absolute_degree(m: &SignedMatrix) -> Vec<f64> {
    let mut deg = vec![0.0; m.dim()];
    for (i, _, w) in m.full() {
        deg[i] += w.abs();
    }
    deg
}

fn loops_and_degrees(m: &SignedMatrix, add_self_loops: bool) -> Result<(SignedMatrix, Vec<f64>)> {
    let m = if add_self_loops { m.with_self_loops() } else { m.clone() };
    let deg = absolute_degree(&m);
    if let Some(i) = deg.iter().position(|&d| d == 0.0) {
        return Err(Error::IsolatedNode(i));
    }
    Ok((m, deg))
}

/// `D⁻¹(M + I)` (or `D⁻¹M`), degrees taken after self-loop insertion.
///
/// The result is not symmetric in general, hence the CSR return type.
pub fn normalize_rw(m: &SignedMatrix, add_self_loops: bool) -> Result<SparseMatrix> {
    let (m, deg) = loops_and_degrees(m, add_self_loops)?;
    let rows = m
        .rows()
        .into_iter()
        .enumerate()
        .map(|(i, row)| row.into_iter().map(|(j, w)| (j, w / deg[i])).collect())
        .collect();
    Ok(SparseMatrix::from_rows(m.dim(), m.dim(), rows))
}

/// `D^{-1/2}(M + I)D^{-1/2}` (or without the identity).
pub fn normalize_sym(m: &SignedMatrix, add_self_loops: bool) -> Result<SignedMatrix> {
    let (m, deg) = loops_and_degrees(m, add_self_loops)?;
    let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut out = SignedMatrix::new(m.dim());
    for (i, j, w) in m.upper() {
        out.set(i, j, w * inv_sqrt[i] * inv_sqrt[j]);
    }
    Ok(out)
}

/// Weighted undirected edge list; the signed Laplacian factors as `E W Eᵀ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedEdgeList {
    pub num_nodes: usize,
    /// `(i, j, w)` with `i < j`.
    pub edges: Vec<(usize, usize, f64)>,
}

impl SignedEdgeList {
    /// Takes the off-diagonal entries of `m` as edges; self-loops carry no
    /// gradient and are dropped.
    pub fn from_matrix(m: &SignedMatrix) -> Self {
        SignedEdgeList { num_nodes: m.dim(), edges: m.off_diagonal().collect() }
    }

    pub fn negative_count(&self) -> usize {
        self.edges.iter().filter(|e| e.2 < 0.0).count()
    }

    /// Oriented incidence matrix, `(num_nodes) × |edges|`: `+1` at the tail, `-1` at the head.
    pub fn incidence(&self) -> Array2<f64> {
        let mut e = Array2::zeros((self.num_nodes, self.edges.len()));
        for (k, &(i, j, _)) in self.edges.iter().enumerate() {
            e[[i, k]] = 1.0;
            e[[j, k]] = -1.0;
        }
        e
    }

    pub fn weights(&self) -> Vec<f64> {
        self.edges.iter().map(|e| e.2).collect()
    }
}

/// `L = E W Eᵀ`: `L_ii = Σ_j w_ij`, `L_ij = -w_ij`.
pub fn signed_laplacian(edges: &SignedEdgeList) -> SignedMatrix {
    let mut l = SignedMatrix::new(edges.num_nodes);
    for &(i, j, w) in &edges.edges {
        l.add(i, i, w);
        l.add(j, j, w);
        l.add(i, j, -w);
    }
    l
}

fn check_rows(dim: usize, h: &Array2<f64>) -> Result<()> {
    if h.nrows() != dim {
        return Err(Error::DimensionMismatch(format!(
            "state has {} rows, matrix dimension is {dim}",
            h.nrows()
        )));
    }
    Ok(())
}

fn row_gap_sq(h: &Array2<f64>, i: usize, j: usize) -> f64 {
    h.row(i).iter().zip(h.row(j).iter()).map(|(a, b)| (a - b) * (a - b)).sum()
}

/// Quadratic form `tr(hᵀ L h)`.
pub fn dirichlet_energy(l: &SignedMatrix, h: &Array2<f64>) -> Result<f64> {
    check_rows(l.dim(), h)?;
    let mut total = 0.0;
    for (i, j, w) in l.full() {
        total += w * h.row(i).dot(&h.row(j));
    }
    Ok(total)
}

/// Edge-sum form `Σ_edges w_ij ‖h_i − h_j‖²`.
pub fn edge_sum_energy(edges: &SignedEdgeList, h: &Array2<f64>) -> Result<f64> {
    check_rows(edges.num_nodes, h)?;
    Ok(edges.edges.iter().map(|&(i, j, w)| w * row_gap_sq(h, i, j)).sum())
}

/// Both Dirichlet forms of the same energy, after checking they agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DirichletEnergy {
    pub quadratic: f64,
    pub edge_sum: f64,
}

/// Builds `L` from `edges`, evaluates both forms and fails if they disagree
/// beyond `1e-9` relative.
pub fn dirichlet_energy_checked(edges: &SignedEdgeList, h: &Array2<f64>) -> Result<DirichletEnergy> {
    let l = signed_laplacian(edges);
    let quadratic = dirichlet_energy(&l, h)?;
    let edge_sum = edge_sum_energy(edges, h)?;
    let scale = quadratic.abs().max(edge_sum.abs()).max(1.0);
    if (quadratic - edge_sum).abs() > 1e-9 * scale {
        return Err(Error::InvalidArgument(format!(
            "Laplacian assembly inconsistent: quadratic {quadratic} vs edge sum {edge_sum}"
        )));
    }
    Ok(DirichletEnergy { quadratic, edge_sum })
}

/// `E⁻(H) = Σ_{i<j} (A_c)_ij ‖h_i − h_j‖²`; negative when repulsion dominates.
pub fn signed_energy(a_c: &SignedMatrix, h: &Array2<f64>) -> Result<f64> {
    check_rows(a_c.dim(), h)?;
    Ok(a_c.off_diagonal().map(|(i, j, w)| w * row_gap_sq(h, i, j)).sum())
}

/// `tr(Hᵀ(I − A_c)H)`. Agrees with [`signed_energy`] only for suitably
/// degree-normalized `A_c`; kept for comparison.
pub fn trace_form_energy(a_c: &SignedMatrix, h: &Array2<f64>) -> Result<f64> {
    check_rows(a_c.dim(), h)?;
    let mut total: f64 = h.iter().map(|x| x * x).sum();
    for (i, j, w) in a_c.full() {
        total -= w * h.row(i).dot(&h.row(j));
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn graph(n: usize, edges: &[(usize, usize)], labels: &[usize]) -> LabeledGraph {
        LabeledGraph::new(
            n,
            edges.iter().copied(),
            Array2::zeros((n, 1)),
            labels.iter().map(|&l| Some(l)).collect(),
            labels.iter().max().map_or(1, |m| m + 1),
        )
        .unwrap()
    }

    fn signed_triangle() -> SignedMatrix {
        let mut m = SignedMatrix::new(3);
        m.set(0, 1, 1.0);
        m.set(1, 2, 1.0);
        m.set(0, 2, -1.0);
        m
    }

    #[test]
    fn homophily_trivial_cases() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)], &[0, 0, 0]);
        assert_eq!(homophily_score(&tri).unwrap().score, 1.0);
        let pair = graph(2, &[(0, 1)], &[0, 1]);
        assert_eq!(homophily_score(&pair).unwrap().score, 0.0);
    }

    #[test]
    fn homophily_skips_isolated_and_rejects_unlabeled() {
        let g = graph(3, &[(0, 1)], &[0, 0, 1]);
        let s = homophily_score(&g).unwrap();
        assert_eq!(s.skipped_isolated, 1);
        assert_eq!(s.evaluated, 2);

        let mut g = g;
        g.labels = vec![None; 3];
        assert!(matches!(homophily_score(&g), Err(Error::NoLabels)));
    }

    #[test]
    fn ingestion_canonicalizes_edges() {
        let g = graph(3, &[(1, 0), (0, 1), (2, 2), (2, 1)], &[0, 0, 0]);
        assert_eq!(g.edges, vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn overlapping_masks_rejected() {
        let g = graph(2, &[(0, 1)], &[0, 1]);
        let r = g.with_masks(vec![true, false], vec![true, false], vec![false, false]);
        assert!(r.is_err());
    }

    #[test]
    fn absolute_degree_examples() {
        let mut m = SignedMatrix::new(2);
        m.set(0, 1, 1.0);
        assert_eq!(absolute_degree(&m), vec![1.0, 1.0]);
        m.set(0, 1, -1.0);
        assert_eq!(absolute_degree(&m), vec![1.0, 1.0]);
        assert_eq!(absolute_degree(&signed_triangle()), vec![2.0, 2.0, 2.0]);
    }

    #[test]
    fn zero_weights_are_not_stored() {
        let mut m = SignedMatrix::new(2);
        m.set(0, 1, 1.0);
        m.add(1, 0, -1.0);
        assert_eq!(m.stored(), 0);
    }

    #[test]
    fn normalize_rw_examples() {
        let id = normalize_rw(&SignedMatrix::identity(3), true).unwrap();
        assert!(id.row_abs_sums().iter().all(|&s| (s - 1.0).abs() < 1e-15));

        let mut m = SignedMatrix::new(2);
        m.set(0, 1, 1.0);
        let rw = normalize_rw(&m, true).unwrap();
        assert!(rw.values.iter().all(|&v| v == 0.5));

        let tri = normalize_rw(&signed_triangle(), false).unwrap();
        for s in tri.row_abs_sums() {
            assert!((s - 1.0).abs() < 1e-15);
        }
        assert_eq!(tri.get(0, 2), -0.5);
    }

    #[test]
    fn normalize_rejects_isolated_node() {
        let mut m = SignedMatrix::new(3);
        m.set(0, 1, 1.0);
        assert!(matches!(normalize_rw(&m, false), Err(Error::IsolatedNode(2))));
        assert!(matches!(normalize_sym(&m, false), Err(Error::IsolatedNode(2))));
    }

    #[test]
    fn normalize_sym_examples() {
        let single = normalize_sym(&SignedMatrix::new(1), true).unwrap();
        assert_eq!(single.get(0, 0), 1.0);

        let mut m = SignedMatrix::new(2);
        m.set(0, 1, 1.0);
        assert_eq!(normalize_sym(&m, false).unwrap().get(0, 1), 1.0);

        let tri = signed_triangle();
        let n = normalize_sym(&tri, true).unwrap();
        for (i, j, w) in tri.off_diagonal() {
            assert_eq!(n.get(i, j).signum(), w.signum());
            assert_eq!(n.get(i, j), n.get(j, i));
        }
    }

    #[test]
    fn laplacian_examples() {
        let pos = SignedEdgeList { num_nodes: 2, edges: vec![(0, 1, 1.0)] };
        assert_eq!(signed_laplacian(&pos).to_dense(), array![[1.0, -1.0], [-1.0, 1.0]]);
        let neg = SignedEdgeList { num_nodes: 2, edges: vec![(0, 1, -1.0)] };
        assert_eq!(signed_laplacian(&neg).to_dense(), array![[-1.0, 1.0], [1.0, -1.0]]);
        let tri = SignedEdgeList::from_matrix(&signed_triangle());
        assert_eq!(
            signed_laplacian(&tri).to_dense(),
            array![[0.0, -1.0, 1.0], [-1.0, 2.0, -1.0], [1.0, -1.0, 0.0]]
        );
    }

    #[test]
    fn laplacian_matches_incidence_product() {
        let el = SignedEdgeList::from_matrix(&signed_triangle());
        let e = el.incidence();
        let w = Array2::from_diag(&ndarray::Array1::from(el.weights()));
        let l = e.dot(&w).dot(&e.t());
        assert_eq!(l, signed_laplacian(&el).to_dense());
    }

    #[test]
    fn energy_examples() {
        let pos = SignedEdgeList { num_nodes: 2, edges: vec![(0, 1, 1.0)] };
        let h = array![[0.0], [2.0]];
        assert_eq!(dirichlet_energy(&signed_laplacian(&pos), &h).unwrap(), 4.0);
        let c = array![[3.0], [3.0]];
        assert_eq!(dirichlet_energy(&signed_laplacian(&pos), &c).unwrap(), 0.0);

        let mut neg = SignedMatrix::new(2);
        neg.set(0, 1, -1.0);
        assert_eq!(signed_energy(&neg, &h).unwrap(), -4.0);
        assert_eq!(signed_energy(&neg, &c).unwrap(), 0.0);
    }

    #[test]
    fn energy_dimension_mismatch() {
        let l = SignedMatrix::identity(3);
        assert!(matches!(dirichlet_energy(&l, &Array2::zeros((2, 1))), Err(Error::DimensionMismatch(_))));
        assert!(signed_energy(&l, &Array2::zeros((4, 1))).is_err());
    }

    #[test]
    fn mixed_triangle_energy_matches_quadratic_form() {
        let a = signed_triangle();
        let h = array![[0.3, -1.0], [2.0, 0.5], [-0.7, 0.1]];
        let e = signed_energy(&a, &h).unwrap();
        let both = dirichlet_energy_checked(&SignedEdgeList::from_matrix(&a), &h).unwrap();
        assert!((e - both.quadratic).abs() < 1e-12);
    }

    #[test]
    fn trace_form_differs_from_edge_sum_without_normalization() {
        let mut a = SignedMatrix::new(2);
        a.set(0, 1, 1.0);
        let h = array![[1.0], [3.0]];
        // tr(hᵀ(I − A)h) = 1 + 9 − 2·3 = 4 = edge sum here by coincidence of degree 1 ...
        assert_eq!(trace_form_energy(&a, &h).unwrap(), 4.0);
        assert_eq!(signed_energy(&a, &h).unwrap(), 4.0);
        // ... but not once the degree exceeds one.
        a = SignedMatrix::new(3);
        a.set(0, 1, 1.0);
        a.set(0, 2, 1.0);
        let h = array![[1.0], [3.0], [3.0]];
        assert_eq!(signed_energy(&a, &h).unwrap(), 8.0);
        assert_eq!(trace_form_energy(&a, &h).unwrap(), 19.0 - 12.0);
    }
}
