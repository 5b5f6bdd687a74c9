//! Continuous-time feature diffusion on (signed) graphs.
//!
//! Every variant has the form `dh_i/dt = Σ_j w_ij (h_j − h_i) [+ δ h_i(1 − h_i²)]`
//! and differs only in how `w_ij` is formed.

use std::io::Write;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::eig::{symmetric_eig_sparse, SymmetricEigen};
use crate::graph::{SignedMatrix, SparseMatrix};
use crate::learner::{attention_coefficients, AttentionParams};
use crate::{Error, Result};

/// Largest spectral multiplier `e^{−λt}` before the solution is flagged explosive.
pub const EXPLOSION_CLAMP: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Grand,
    Acmp,
    Uygcn,
    Uygat,
    LabelUniverse,
}

impl std::str::FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "grand" => Variant::Grand,
            "acmp" => Variant::Acmp,
            "uygcn" => Variant::Uygcn,
            "uygat" => Variant::Uygat,
            "label_universe" => Variant::LabelUniverse,
            _ => return Err(Error::InvalidArgument(format!("unknown dynamics variant {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Similarity {
    FixedWeights,
    Attention,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsSpec {
    pub variant: Variant,
    pub delta: f64,
    pub beta: Option<f64>,
    pub similarity: Similarity,
    pub step_size: f64,
    pub horizon: f64,
    /// Frozen attention parameters; required for `uygat` and for attention similarity.
    pub attention: Option<AttentionParams>,
}

impl DynamicsSpec {
    pub fn new(variant: Variant, step_size: f64, horizon: f64) -> Self {
        DynamicsSpec {
            variant,
            delta: 0.0,
            beta: None,
            similarity: if variant == Variant::Uygat { Similarity::Attention } else { Similarity::FixedWeights },
            step_size,
            horizon,
            attention: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidArgument(format!("step size must be positive, got {}", self.step_size)));
        }
        if !(self.horizon >= self.step_size) {
            return Err(Error::InvalidArgument("horizon must be at least one step".into()));
        }
        if !(self.delta >= 0.0) {
            return Err(Error::InvalidArgument("delta must be non-negative".into()));
        }
        if self.variant == Variant::Acmp && self.beta.is_none() {
            return Err(Error::MissingParameter("beta"));
        }
        if self.uses_attention() && self.attention.is_none() {
            return Err(Error::MissingParameter("attention"));
        }
        Ok(())
    }

    fn uses_attention(&self) -> bool {
        self.variant == Variant::Uygat || self.similarity == Similarity::Attention
    }

    pub fn num_steps(&self) -> usize {
        (self.horizon / self.step_size).round() as usize
    }
}

/// Time-indexed states; `states[0]` is the initial condition.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Array2<f64>>,
    /// Some entry grew beyond `EXPLOSION_CLAMP` times its initial scale.
    pub explosive: bool,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &Array2<f64> {
        self.states.last().expect("trajectory holds the initial state")
    }

    /// Long-format CSV `t,node_id,component_id,value`, every `stride`-th state.
    pub fn write_csv<W: Write>(&self, mut out: W, stride: usize) -> std::io::Result<()> {
        writeln!(out, "t,node_id,component_id,value")?;
        let stride = stride.max(1);
        let last = self.len().saturating_sub(1);
        for (k, (t, h)) in self.times.iter().zip(&self.states).enumerate() {
            if k % stride != 0 && k != last {
                continue;
            }
            for ((i, c), v) in h.indexed_iter() {
                writeln!(out, "{t},{i},{c},{v}")?;
            }
        }
        Ok(())
    }
}

/// Elementwise `δ·h(1 − h²)`.
pub fn double_well(h: &Array2<f64>, delta: f64) -> Array2<f64> {
    h.mapv(|x| delta * x * (1.0 - x * x))
}

/// Off-diagonal effective weights for the fixed-weight variants.
fn fixed_weights(spec: &DynamicsSpec, a_c: &SignedMatrix, a_y: Option<&SignedMatrix>) -> Result<SparseMatrix> {
    let n = a_c.dim();
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    let base = match spec.variant {
        Variant::LabelUniverse => {
            let a_y = a_y.ok_or(Error::MissingParameter("a_y"))?;
            if a_y.dim() > n {
                return Err(Error::DimensionMismatch(format!("A_y is {}, A_c is {n}", a_y.dim())));
            }
            a_y.dim()
        }
        _ => n,
    };
    for (i, j, w) in a_c.full() {
        if i == j {
            continue;
        }
        let eff = match spec.variant {
            Variant::Grand => w.max(0.0),
            Variant::Acmp => w - spec.beta.ok_or(Error::MissingParameter("beta"))?,
            Variant::Uygcn | Variant::Uygat => w,
            Variant::LabelUniverse => {
                if i < base && j < base {
                    let s = a_y.map(|m| m.get(i, j)).unwrap_or(0.0);
                    s.signum() * s.abs().min(1.0) * w
                } else {
                    w
                }
            }
        };
        if eff != 0.0 {
            rows[i].push((j, eff));
        }
    }
    Ok(SparseMatrix::from_rows(n, n, rows))
}

fn attention_weights(weights: &SparseMatrix, params: &AttentionParams, h: &Array2<f64>) -> Result<SparseMatrix> {
    if params.dim() != h.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "attention parameters have width {}, state has {}",
            params.dim(),
            h.ncols()
        )));
    }
    let att = attention_coefficients(h, params, weights);
    let mut eff = att.effective(true);
    // self entries carry no force
    for i in 0..eff.nrows {
        for k in eff.indptr[i]..eff.indptr[i + 1] {
            if eff.indices[k] == i {
                eff.values[k] = 0.0;
            }
        }
    }
    Ok(eff)
}

fn diffuse(w: &SparseMatrix, h: &Array2<f64>) -> Array2<f64> {
    let mut out = w.matmul(h);
    for i in 0..w.nrows {
        let s: f64 = w.row(i).map(|(_, v)| v).sum();
        if s != 0.0 {
            out.row_mut(i).scaled_add(-s, &h.row(i));
        }
    }
    out
}

/// Precomputed generator; attention variants recompute coefficients per call.
struct Generator<'a> {
    spec: &'a DynamicsSpec,
    weights: SparseMatrix,
}

impl<'a> Generator<'a> {
    fn new(spec: &'a DynamicsSpec, a_c: &SignedMatrix, a_y: Option<&SignedMatrix>) -> Result<Self> {
        spec.validate()?;
        Ok(Generator { spec, weights: fixed_weights(spec, a_c, a_y)? })
    }

    fn eval(&self, h: &Array2<f64>) -> Result<Array2<f64>> {
        if h.nrows() != self.weights.nrows {
            return Err(Error::DimensionMismatch(format!(
                "state has {} rows, graph has {} nodes",
                h.nrows(),
                self.weights.nrows
            )));
        }
        let mut dh = if self.spec.uses_attention() {
            let params = self.spec.attention.as_ref().ok_or(Error::MissingParameter("attention"))?;
            diffuse(&attention_weights(&self.weights, params, h)?, h)
        } else {
            diffuse(&self.weights, h)
        };
        if self.spec.delta > 0.0 && self.spec.variant != Variant::Grand {
            dh += &double_well(h, self.spec.delta);
        }
        Ok(dh)
    }
}

/// Time derivative of the state under `spec`.
///
/// `grand` keeps only positive similarities and ignores `delta`; `acmp` uses
/// `w − β` on every stored edge; `label_universe` multiplies the leading
/// `A_y`-sized block by the sign of `A_y` and keeps the CN edges as they are.
pub fn rhs(spec: &DynamicsSpec, a_c: &SignedMatrix, a_y: Option<&SignedMatrix>, h: &Array2<f64>) -> Result<Array2<f64>> {
    Generator::new(spec, a_c, a_y)?.eval(h)
}

/// Forward Euler `h ← h + Δt·rhs(h)`, recording every step.
///
/// A non-finite state aborts with [`Error::Divergence`] carrying the
/// trajectory up to the last finite state.
pub fn integrate_euler(
    spec: &DynamicsSpec,
    a_c: &SignedMatrix,
    a_y: Option<&SignedMatrix>,
    h0: &Array2<f64>,
) -> Result<Trajectory> {
    if h0.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidArgument("initial state is not finite".into()));
    }
    let generator = Generator::new(spec, a_c, a_y)?;
    let steps = spec.num_steps();
    let limit = EXPLOSION_CLAMP * h0.iter().fold(1.0f64, |m, x| m.max(x.abs()));
    let mut traj = Trajectory { times: vec![0.0], states: vec![h0.clone()], explosive: false };
    traj.times.reserve(steps);
    traj.states.reserve(steps);
    let mut h = h0.clone();
    for k in 1..=steps {
        let dh = generator.eval(&h)?;
        h.scaled_add(spec.step_size, &dh);
        let t = k as f64 * spec.step_size;
        if h.iter().any(|x| !x.is_finite()) {
            traj.explosive = true;
            return Err(Error::Divergence { t, partial: Box::new(traj) });
        }
        if !traj.explosive && h.iter().any(|x| x.abs() > limit) {
            log::warn!("state exceeded {EXPLOSION_CLAMP:e} times its initial scale at t = {t}");
            traj.explosive = true;
        }
        traj.times.push(t);
        traj.states.push(h.clone());
    }
    Ok(traj)
}

/// `H(t) = U e^{−Λt} Uᵀ H(0)` from one eigendecomposition of `L_c`.
#[derive(Debug, Clone)]
pub struct SpectralPropagator {
    pub eigen: SymmetricEigen,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedForm {
    pub state: Array2<f64>,
    /// At least one multiplier `e^{−λt}` was clamped to `EXPLOSION_CLAMP`.
    pub explosive: bool,
}

impl SpectralPropagator {
    pub fn new(l_c: &SignedMatrix) -> Result<Self> {
        Ok(SpectralPropagator { eigen: symmetric_eig_sparse(l_c)? })
    }

    pub fn apply(&self, h0: &Array2<f64>, t: f64) -> Result<ClosedForm> {
        let u = &self.eigen.vectors;
        if h0.nrows() != u.nrows() {
            return Err(Error::DimensionMismatch(format!("state has {} rows, L_c is {}", h0.nrows(), u.nrows())));
        }
        if t == 0.0 {
            return Ok(ClosedForm { state: h0.clone(), explosive: false });
        }
        let mut explosive = false;
        let mut coeffs = u.t().dot(h0);
        for (mut row, &lambda) in coeffs.rows_mut().into_iter().zip(&self.eigen.values) {
            let mut m = (-lambda * t).exp();
            if !(m <= EXPLOSION_CLAMP) {
                m = EXPLOSION_CLAMP;
                explosive = true;
            }
            row *= m;
        }
        Ok(ClosedForm { state: u.dot(&coeffs), explosive })
    }
}

pub fn closed_form_solution(l_c: &SignedMatrix, h0: &Array2<f64>, t: f64) -> Result<ClosedForm> {
    if t == 0.0 {
        return Ok(ClosedForm { state: h0.clone(), explosive: false });
    }
    SpectralPropagator::new(l_c)?.apply(h0, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlockingReport {
    /// Per group: sup over the trailing window of the group diameter.
    pub within_diameters: Vec<f64>,
    /// Per group: diameter at the first recorded time.
    pub initial_diameters: Vec<f64>,
    /// Smallest cross-group gap at the final time.
    pub between_separation: f64,
    pub t_star: Option<f64>,
    pub c_prime: f64,
    pub window: usize,
    pub flocked: bool,
}

/// Gap between two rows: the largest per-component difference.
fn component_gap(h: &Array2<f64>, i: usize, j: usize) -> f64 {
    h.row(i).iter().zip(h.row(j)).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
}

fn diameter(h: &Array2<f64>, group: &[usize]) -> f64 {
    let mut d = 0.0f64;
    for (a, &i) in group.iter().enumerate() {
        for &j in &group[a + 1..] {
            d = d.max(component_gap(h, i, j));
        }
    }
    d
}

fn separation(h: &Array2<f64>, g1: &[usize], g2: &[usize]) -> f64 {
    let mut s = f64::INFINITY;
    for &i in g1 {
        for &j in g2 {
            s = s.min(component_gap(h, i, j));
        }
    }
    s
}

/// Bi-cluster flocking test over the recorded states.
///
/// Within-group boundedness means the sup of each group's diameter over the
/// last `window` states stays below ten times its initial diameter. The
/// between-group condition holds when there is a recorded `t*`, no later than
/// the start of that window, after which the minimum cross-group gap never
/// drops below `c_prime`.
pub fn detect_bicluster_flocking(
    traj: &Trajectory,
    group1: &[usize],
    group2: &[usize],
    c_prime: f64,
    window: usize,
) -> Result<FlockingReport> {
    if group1.is_empty() || group2.is_empty() {
        return Err(Error::InvalidArgument("flocking groups must be nonempty".into()));
    }
    if group1.iter().any(|i| group2.contains(i)) {
        return Err(Error::InvalidArgument("flocking groups must be disjoint".into()));
    }
    if traj.len() <= window || window == 0 {
        return Err(Error::InvalidArgument(format!(
            "trajectory of length {} too short for window {window}",
            traj.len()
        )));
    }
    let rows = traj.states[0].nrows();
    if group1.iter().chain(group2).any(|&i| i >= rows) {
        return Err(Error::InvalidArgument("flocking group index out of range".into()));
    }
    let start = traj.len() - window;
    let groups = [group1, group2];
    let initial_diameters: Vec<f64> = groups.iter().map(|g| diameter(&traj.states[0], g)).collect();
    let within_diameters: Vec<f64> = groups
        .iter()
        .map(|g| traj.states[start..].iter().map(|h| diameter(h, g)).fold(0.0, f64::max))
        .collect();
    let bounded = within_diameters
        .iter()
        .zip(&initial_diameters)
        .all(|(&w, &d0)| w.is_finite() && w <= 10.0 * d0.max(1e-12));

    // earliest index from which separation stays ≥ C'
    let mut first_ok = None;
    for k in (0..traj.len()).rev() {
        if separation(&traj.states[k], group1, group2) >= c_prime {
            first_ok = Some(k);
        } else {
            break;
        }
    }
    let t_star = first_ok.filter(|&k| k <= start).map(|k| traj.times[k]);
    let between_separation = separation(traj.last(), group1, group2);
    Ok(FlockingReport {
        within_diameters,
        initial_diameters,
        between_separation,
        t_star,
        c_prime,
        window,
        flocked: bounded && t_star.is_some(),
    })
}
