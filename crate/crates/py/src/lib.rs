//! Python bindings: graphs, augmentation, spectra, training and dynamics.

use std::path::PathBuf;

use ndarray::Array2;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyAny;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use uygraph::augment::{augment, AugmentedGraph, CnCnPolicy, CollapsingNodeSet, FeatureInit};
use uygraph::datasets::{generate_sbm, load_dataset, make_split, save_dataset, SbmSpec};
use uygraph::diagnostics::{curvature_delta_report, spectrum_report};
use uygraph::dynamics::{detect_bicluster_flocking, integrate_euler, DynamicsSpec, Variant};
use uygraph::graph::{homophily_score, normalize_sym, LabeledGraph};
use uygraph::learner::{train as train_model, AttentionParams, ModelKind, Problem, TrainConfig};
use uygraph::Error;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Io(_) | Error::MissingFile(_) | Error::Parse { .. } => PyIOError::new_err(e.to_string()),
        e if e.is_numerical() => PyRuntimeError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn to_json<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn matrix(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

fn cn_cn(name: &str) -> PyResult<CnCnPolicy> {
    match name {
        "none" => Ok(CnCnPolicy::None),
        "negative" => Ok(CnCnPolicy::Negative),
        "identity" => Ok(CnCnPolicy::IdentityBlock),
        _ => Err(PyValueError::new_err(format!("unknown cn_cn policy {name:?}"))),
    }
}

fn feature_init(name: &str) -> PyResult<FeatureInit> {
    match name {
        "class_mean_linear" => Ok(FeatureInit::ClassMeanLinear),
        "learnable_embedding" => Ok(FeatureInit::LearnableEmbedding),
        "zeros" => Ok(FeatureInit::Zeros),
        _ => Err(PyValueError::new_err(format!("unknown feature init {name:?}"))),
    }
}

/// Undirected labeled graph with train/val/test masks.
#[pyclass(name = "Graph", module = "uygraph", skip_from_py_object)]
#[derive(Clone)]
struct PyGraph {
    inner: LabeledGraph,
}

#[pymethods]
impl PyGraph {
    #[getter]
    fn num_nodes(&self) -> usize {
        self.inner.num_nodes
    }

    #[getter]
    fn num_classes(&self) -> usize {
        self.inner.num_classes
    }

    #[getter]
    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges.clone()
    }

    #[getter]
    fn features(&self) -> Vec<Vec<f64>> {
        matrix(&self.inner.features)
    }

    #[getter]
    fn labels(&self) -> Vec<Option<usize>> {
        self.inner.labels.clone()
    }

    #[getter]
    fn train_mask(&self) -> Vec<bool> {
        self.inner.train_mask.clone()
    }

    #[getter]
    fn val_mask(&self) -> Vec<bool> {
        self.inner.val_mask.clone()
    }

    #[getter]
    fn test_mask(&self) -> Vec<bool> {
        self.inner.test_mask.clone()
    }

    fn homophily(&self) -> PyResult<f64> {
        Ok(homophily_score(&self.inner).map_err(to_py)?.score)
    }

    /// Stratified split: `per_class_train` train nodes per class.
    #[pyo3(signature = (per_class_train, val_fraction=0.5, seed=0))]
    fn split(&self, per_class_train: usize, val_fraction: f64, seed: u64) -> PyResult<PyGraph> {
        let split = make_split(&self.inner, per_class_train, val_fraction, seed).map_err(to_py)?;
        Ok(PyGraph { inner: split.apply(self.inner.clone()).map_err(to_py)? })
    }

    /// Writes the four CSV files and returns their checksum.
    fn save(&self, dir: PathBuf) -> PyResult<String> {
        save_dataset(&self.inner, &dir).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(num_nodes={}, num_edges={}, num_classes={})",
            self.inner.num_nodes,
            self.inner.edges.len(),
            self.inner.num_classes
        )
    }
}

/// Graph plus collapsing nodes.
#[pyclass(name = "AugmentedGraph", module = "uygraph")]
struct PyAugmented {
    inner: AugmentedGraph,
}

#[pymethods]
impl PyAugmented {
    #[getter]
    fn num_base(&self) -> usize {
        self.inner.num_base()
    }

    #[getter]
    fn num_cns(&self) -> usize {
        self.inner.num_cns()
    }

    #[getter]
    fn negative_edges(&self) -> usize {
        self.inner.negative_edges().count
    }

    #[getter]
    fn theorem_bound(&self) -> usize {
        self.inner.negative_edges().theorem_bound
    }

    /// Upper-triangle entries `(i, j, weight)` of the augmented adjacency.
    fn edges(&self) -> Vec<(usize, usize, f64)> {
        self.inner.a_c.upper().collect()
    }

    /// Rows of the connection matrix.
    fn connection(&self) -> Vec<Vec<i8>> {
        (0..self.inner.num_base()).map(|i| self.inner.connection.row(i).to_vec()).collect()
    }

    fn cn_features(&self) -> Vec<Vec<f64>> {
        matrix(&self.inner.cn_features)
    }

    fn spectrum<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_json(py, &spectrum_report(&self.inner).map_err(to_py)?)
    }

    fn curvature<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_json(py, &curvature_delta_report(&self.inner.base, &self.inner).map_err(to_py)?)
    }
}

#[pyfunction]
#[pyo3(signature = (num_classes=2, nodes_per_class=100, p_in=0.1, p_out=0.01, feature_dim=8, separation=1.0, noise=1.0, seed=0, require_connected=true))]
#[allow(clippy::too_many_arguments)]
fn sbm(
    num_classes: usize,
    nodes_per_class: usize,
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    separation: f64,
    noise: f64,
    seed: u64,
    require_connected: bool,
) -> PyResult<PyGraph> {
    let spec = SbmSpec { num_classes, nodes_per_class, p_in, p_out, feature_dim, separation, noise, seed, require_connected };
    Ok(PyGraph { inner: generate_sbm(&spec).map_err(to_py)?.graph })
}

#[pyfunction]
fn load(dir: PathBuf) -> PyResult<PyGraph> {
    Ok(PyGraph { inner: load_dataset(&dir).map_err(to_py)?.graph })
}

#[pyfunction(name = "augment")]
#[pyo3(signature = (graph, multiplicity=1, cn_cn="negative", feature_init="class_mean_linear", self_loops=false, seed=0))]
fn py_augment(
    graph: &PyGraph,
    multiplicity: usize,
    cn_cn: &str,
    feature_init: &str,
    self_loops: bool,
    seed: u64,
) -> PyResult<PyAugmented> {
    let mut cns = CollapsingNodeSet::per_class(graph.inner.num_classes, multiplicity, self::feature_init(feature_init)?);
    cns.seed = seed;
    let aug = augment(&graph.inner, cns, self::cn_cn(cn_cn)?, self_loops).map_err(to_py)?;
    Ok(PyAugmented { inner: aug })
}

/// Trains one model and returns its metrics as a dict.
#[pyfunction]
#[pyo3(signature = (graph, model="uygcn", multiplicity=1, cn_cn="negative", feature_init="learnable_embedding", lr=0.01, weight_decay=0.005, dropout=0.5, hidden=16, layers=2, epochs=200, delta=0.0, seed=0))]
#[allow(clippy::too_many_arguments)]
fn train<'py>(
    py: Python<'py>,
    graph: &PyGraph,
    model: &str,
    multiplicity: usize,
    cn_cn: &str,
    feature_init: &str,
    lr: f64,
    weight_decay: f64,
    dropout: f64,
    hidden: usize,
    layers: usize,
    epochs: usize,
    delta: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let kind: ModelKind = model.parse().map_err(to_py)?;
    let config = TrainConfig {
        lr,
        weight_decay,
        dropout,
        hidden_dim: hidden,
        layers,
        epochs_max: epochs,
        seed,
        delta,
        ..TrainConfig::default()
    };
    let problem = if kind.is_augmented() {
        let aug = py_augment(graph, multiplicity, cn_cn, feature_init, false, seed)?;
        Problem::from_augmented(&aug.inner, kind, &config)
    } else {
        Problem::from_graph(&graph.inner, kind, &config)
    }
    .map_err(to_py)?;
    let outcome = py.detach(|| train_model(&problem, &config)).map_err(to_py)?;
    to_json(py, &outcome.metrics)
}

/// Integrates the dynamics on the normalized augmented graph from centered
/// features and reports bi-cluster flocking between class 0 and the rest.
#[pyfunction]
#[pyo3(signature = (aug, variant="uygat", delta=1.0, step_size=0.05, horizon=50.0, c_prime=0.5, window=200, seed=0))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    aug: &PyAugmented,
    variant: &str,
    delta: f64,
    step_size: f64,
    horizon: f64,
    c_prime: f64,
    window: usize,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let variant: Variant = variant.parse().map_err(to_py)?;
    let a = &aug.inner;
    let norm = normalize_sym(&a.a_c, !a.self_loops).map_err(to_py)?;
    let mut h0 = a.stacked_features();
    if let Some(mean) = h0.mean_axis(ndarray::Axis(0)) {
        h0 -= &mean;
    }
    let mut spec = DynamicsSpec::new(variant, step_size, horizon);
    spec.delta = delta;
    spec.beta = Some(0.1);
    if variant == Variant::Uygat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row: Vec<f64> = (0..2 * h0.ncols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        spec.attention = Some(AttentionParams::from_row(&row));
    }
    let a_y = (variant == Variant::LabelUniverse).then(|| uygraph::augment::build_label_adjacency(&a.base));
    let traj = match integrate_euler(&spec, &norm, a_y.as_ref(), &h0) {
        Ok(t) => t,
        Err(Error::Divergence { partial, .. }) => *partial,
        Err(e) => return Err(to_py(e)),
    };
    let label = |i: usize| if i < a.num_base() { a.base.labels[i] } else { Some(a.cns.labels[i - a.num_base()]) };
    let g1: Vec<usize> = (0..a.num_nodes()).filter(|&i| label(i) == Some(0)).collect();
    let g2: Vec<usize> = (0..a.num_nodes()).filter(|&i| matches!(label(i), Some(c) if c != 0)).collect();
    let flocking = if traj.len() > window {
        Some(detect_bicluster_flocking(&traj, &g1, &g2, c_prime, window).map_err(to_py)?)
    } else {
        None
    };
    to_json(py, &serde_json::json!({ "explosive": traj.explosive, "steps": traj.len(), "flocking": flocking }))
}

#[pymodule]
#[pyo3(name = "uygraph")]
fn uygraph_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyAugmented>()?;
    m.add_function(wrap_pyfunction!(sbm, m)?)?;
    m.add_function(wrap_pyfunction!(load, m)?)?;
    m.add_function(wrap_pyfunction!(py_augment, m)?)?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
