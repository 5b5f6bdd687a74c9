use std::collections::BTreeMap;
use std::path::Path;

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use uygraph::augment::{
    assemble_augmented, augment, build_label_adjacency, AugmentedGraph, CollapsingNodeSet, ConnectionMatrix,
};
use uygraph::datasets::{generate_sbm, load_dataset, make_split, DatasetBundle, SbmSpec};
use uygraph::diagnostics::{
    curvature_delta_report, energy_trace, osm_fixed_point_probe, sensitivity_check, spectrum_report,
};
use uygraph::dynamics::{detect_bicluster_flocking, integrate_euler, DynamicsSpec, Trajectory, Variant};
use uygraph::graph::{normalize_rw, normalize_sym, signed_laplacian, LabeledGraph, SignedEdgeList, SignedMatrix};
use uygraph::learner::{train, write_checkpoint, AttentionParams, ModelKind, Problem, TrainOutcome};
use uygraph::Error;

use crate::config::RunConfig;
use crate::output::{write_atomic, write_json};
use crate::CliError;

/// Where graphs come from: a loaded CSV dataset with fixed splits, or an
/// SBM regenerated and split per seed.
#[derive(Debug, Clone)]
pub enum DataSource {
    Loaded(DatasetBundle),
    Sbm(SbmSpec),
}

impl DataSource {
    pub fn from_config(cfg: &RunConfig) -> Result<Self, CliError> {
        match (&cfg.dataset, &cfg.sbm) {
            (Some(dir), _) => Ok(DataSource::Loaded(load_dataset(dir)?)),
            (None, Some(spec)) => Ok(DataSource::Sbm(spec.clone())),
            (None, None) => Err(CliError::Usage("one of dataset or sbm is required".into())),
        }
    }

    pub fn graph(&self, cfg: &RunConfig, seed: u64) -> Result<LabeledGraph, CliError> {
        match self {
            DataSource::Loaded(bundle) => Ok(bundle.graph.clone()),
            DataSource::Sbm(spec) => {
                let bundle = generate_sbm(&SbmSpec { seed, ..spec.clone() })?;
                let split = make_split(&bundle.graph, cfg.train_per_class, cfg.val_fraction, seed)?;
                Ok(split.apply(bundle.graph)?)
            }
        }
    }

    pub fn describe(&self) -> Value {
        match self {
            DataSource::Loaded(bundle) => json!({ "dataset": bundle.summary(), "source": bundle.source }),
            DataSource::Sbm(spec) => json!({ "sbm": spec }),
        }
    }
}

/// `m` CNs per class; `m = 0` keeps the graph as it is.
pub fn augment_graph(graph: &LabeledGraph, cfg: &RunConfig, multiplicity: usize, seed: u64) -> Result<AugmentedGraph, CliError> {
    let mut cns = CollapsingNodeSet::per_class(graph.num_classes, multiplicity, cfg.cn_init);
    cns.seed = seed;
    let aug = if multiplicity == 0 {
        assemble_augmented(graph, ConnectionMatrix::empty(graph.num_nodes), cns, cfg.cn_cn, cfg.self_loops)?
    } else {
        augment(graph, cns, cfg.cn_cn, cfg.self_loops)?
    };
    Ok(aug)
}

pub fn build_problem(
    graph: &LabeledGraph,
    cfg: &RunConfig,
    kind: ModelKind,
    multiplicity: usize,
    seed: u64,
) -> Result<Problem, CliError> {
    let tc = cfg.train_config(seed, cfg.train.lr);
    if kind.is_augmented() {
        let aug = augment_graph(graph, cfg, multiplicity, seed)?;
        Ok(Problem::from_augmented(&aug, kind, &tc)?)
    } else {
        Ok(Problem::from_graph(graph, kind, &tc)?)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub seed: u64,
    pub test_accuracy: f64,
    pub test_macro_f1: f64,
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub epochs_run: usize,
    pub diverged: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct LrResult {
    pub lr: f64,
    pub mean_val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainReport {
    pub model: ModelKind,
    pub multiplicity: usize,
    /// Learning rate of the reported runs.
    pub lr: f64,
    /// Mean best-validation accuracy per grid point, when a grid was searched.
    pub lr_search: Vec<LrResult>,
    pub runs: Vec<RunSummary>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub mean_macro_f1: f64,
    pub data: Value,
    pub seeds: Vec<u64>,
    pub config: BTreeMap<String, String>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 { xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
    (mean, var.sqrt())
}

/// Trains `kind` once per seed, in parallel. With a non-empty `lr_grid` every
/// grid point is run and the one with the best mean validation accuracy is
/// reported.
pub fn train_runs(
    cfg: &RunConfig,
    source: &DataSource,
    kind: ModelKind,
    multiplicity: usize,
) -> Result<(TrainReport, Vec<TrainOutcome>), CliError> {
    let problems = cfg
        .seeds
        .iter()
        .map(|&s| build_problem(&source.graph(cfg, s)?, cfg, kind, multiplicity, s))
        .collect::<Result<Vec<_>, CliError>>()?;
    let grid = if cfg.lr_grid.is_empty() { vec![cfg.train.lr] } else { cfg.lr_grid.clone() };
    let mut search = Vec::new();
    let mut best: Option<(f64, f64, Vec<TrainOutcome>)> = None;
    for &lr in &grid {
        let outcomes = problems
            .par_iter()
            .zip(cfg.seeds.par_iter())
            .map(|(p, &s)| train(p, &cfg.train_config(s, lr)))
            .collect::<Result<Vec<_>, Error>>()?;
        let vals: Vec<f64> = outcomes.iter().map(|o| o.metrics.best_val_accuracy).collect();
        let (mean_val, _) = mean_std(&vals);
        log::info!("{kind} m={multiplicity} lr={lr}: mean validation accuracy {mean_val:.4}");
        search.push(LrResult { lr, mean_val_accuracy: mean_val });
        if best.as_ref().is_none_or(|b| mean_val > b.1) {
            best = Some((lr, mean_val, outcomes));
        }
    }
    let (lr, _, outcomes) = best.expect("grid is never empty");
    let runs: Vec<RunSummary> = outcomes
        .iter()
        .zip(&cfg.seeds)
        .map(|(o, &seed)| RunSummary {
            seed,
            test_accuracy: o.metrics.test.accuracy,
            test_macro_f1: o.metrics.test.macro_f1,
            best_epoch: o.metrics.best_epoch,
            best_val_accuracy: o.metrics.best_val_accuracy,
            epochs_run: o.metrics.epochs.len(),
            diverged: o.metrics.diverged,
        })
        .collect();
    let accs: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let f1s: Vec<f64> = runs.iter().map(|r| r.test_macro_f1).collect();
    let (mean, std) = mean_std(&accs);
    let report = TrainReport {
        model: kind,
        multiplicity: if kind.is_augmented() { multiplicity } else { 0 },
        lr,
        lr_search: if cfg.lr_grid.is_empty() { Vec::new() } else { search },
        runs,
        mean_test_accuracy: mean,
        std_test_accuracy: std,
        mean_macro_f1: mean_std(&f1s).0,
        data: source.describe(),
        seeds: cfg.seeds.clone(),
        config: cfg.resolved.clone(),
    };
    Ok((report, outcomes))
}

pub fn cmd_train(cfg: &RunConfig) -> Result<TrainReport, CliError> {
    let source = DataSource::from_config(cfg)?;
    let (report, outcomes) = train_runs(cfg, &source, cfg.model, cfg.cn_mult)?;
    let kind = cfg.model;
    for (o, seed) in outcomes.iter().zip(&cfg.seeds) {
        let jsonl = o.metrics.to_jsonl();
        write_atomic(&cfg.out.join(format!("metrics_{kind}_seed{seed}.jsonl")), |w| w.write_all(jsonl.as_bytes()))?;
        write_atomic(&cfg.out.join(format!("checkpoint_{kind}_seed{seed}.csv")), |w| write_checkpoint(&o.params, w))?;
    }
    write_json(&cfg.out.join(format!("train_report_{kind}.json")), &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub multiplicity: usize,
    pub k: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub runs: usize,
}

/// Mean test accuracy per CN multiplicity with every other setting fixed.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>, CliError> {
    if !cfg.model.is_augmented() {
        return Err(CliError::Usage(format!("sweep needs an augmented model, got {}", cfg.model)));
    }
    let source = DataSource::from_config(cfg)?;
    let fixed = RunConfig { lr_grid: Vec::new(), ..cfg.clone() };
    let num_classes = source.graph(cfg, cfg.seeds[0])?.num_classes;
    let rows = cfg
        .cn_mults
        .par_iter()
        .map(|&m| {
            let (report, _) = train_runs(&fixed, &source, cfg.model, m)?;
            Ok(SweepRow {
                multiplicity: m,
                k: m * num_classes,
                mean_accuracy: report.mean_test_accuracy,
                std_accuracy: report.std_test_accuracy,
                runs: report.runs.len(),
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    write_atomic(&cfg.out.join("sweep.csv"), |w| {
        writeln!(w, "multiplicity,k,mean_accuracy,std_accuracy,runs")?;
        for r in &rows {
            writeln!(w, "{},{},{},{},{}", r.multiplicity, r.k, r.mean_accuracy, r.std_accuracy, r.runs)?;
        }
        Ok(())
    })?;
    write_json(
        &cfg.out.join("sweep_report.json"),
        &json!({ "model": cfg.model, "rows": rows, "data": source.describe(), "seeds": cfg.seeds, "config": cfg.resolved }),
    )?;
    Ok(rows)
}

pub fn cmd_augment(cfg: &RunConfig) -> Result<Value, CliError> {
    let source = DataSource::from_config(cfg)?;
    let seed = cfg.seeds[0];
    let graph = source.graph(cfg, seed)?;
    if cfg.cn_mult == 0 {
        return Err(CliError::Usage("cn_mult must be at least 1 for augment".into()));
    }
    let aug = augment_graph(&graph, cfg, cfg.cn_mult, seed)?;
    write_atomic(&cfg.out.join("augmented_edges.csv"), |w| aug.write_edge_csv(w))?;
    write_atomic(&cfg.out.join("connection.csv"), |w| {
        let header: Vec<String> = (0..aug.num_cns()).map(|k| format!("cn{k}")).collect();
        writeln!(w, "node_id,{}", header.join(","))?;
        for i in 0..aug.num_base() {
            let row: Vec<String> = aug.connection.row(i).iter().map(|e| e.to_string()).collect();
            writeln!(w, "{i},{}", row.join(","))?;
        }
        Ok(())
    })?;
    write_atomic(&cfg.out.join("cn_features.csv"), |w| {
        let d = aug.cn_features.ncols();
        let header: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        writeln!(w, "node_id,label,{}", header.join(","))?;
        for (k, row) in aug.cn_features.rows().into_iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{},{},{}", aug.num_base() + k, aug.cns.labels[k], vals.join(","))?;
        }
        Ok(())
    })?;
    let neg = aug.negative_edges();
    let summary = json!({
        "num_base": aug.num_base(),
        "num_cns": aug.num_cns(),
        "multiplicity": cfg.cn_mult,
        "cn_cn": aug.cn_cn_policy,
        "self_loops": aug.self_loops,
        "train_size": graph.train_nodes().len(),
        "negative_edges": neg.count,
        "theorem_bound": neg.theorem_bound,
        "data": source.describe(),
        "seed": seed,
        "config": cfg.resolved,
    });
    write_json(&cfg.out.join("augment_summary.json"), &summary)?;
    Ok(summary)
}

/// Glorot-uniform weights `d₀ → hidden → … → hidden` for the tanh probe.
fn probe_weights(d0: usize, hidden: usize, r: usize, rng: &mut ChaCha8Rng) -> Vec<Array2<f64>> {
    (0..r)
        .map(|l| {
            let rows = if l == 0 { d0 } else { hidden };
            let a = (6.0 / (rows + hidden) as f64).sqrt();
            Array2::from_shape_simple_fn((rows, hidden), || rng.random_range(-a..a))
        })
        .collect()
}

pub fn cmd_diagnose(cfg: &RunConfig) -> Result<Value, CliError> {
    let source = DataSource::from_config(cfg)?;
    let seed = cfg.seeds[0];
    let graph = source.graph(cfg, seed)?;
    let aug = augment_graph(&graph, cfg, cfg.cn_mult.max(1), seed)?;

    let spectrum = if cfg.spectrum {
        let report = spectrum_report(&aug)?;
        write_atomic(&cfg.out.join("eigenvalues.csv"), |w| report.write_eigenvalue_csv(w))?;
        Some(report)
    } else {
        None
    };
    let curvature = curvature_delta_report(&graph, &aug)?;
    let osm_aug = osm_fixed_point_probe(&normalize_rw(&aug.a_c, true)?, aug.num_base(), cfg.osm_iterations, 1e-6, seed)?;
    let osm_base = osm_fixed_point_probe(&normalize_rw(&graph.adjacency(), true)?, graph.num_nodes, cfg.osm_iterations, 1e-6, seed)?;

    let sensitivity = if cfg.sens_pairs > 0 {
        let a_hat = normalize_sym(&aug.a_c, !aug.self_loops)?.to_csr();
        let x = aug.stacked_features();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let weights = probe_weights(x.ncols(), cfg.train.hidden_dim, cfg.sens_r, &mut rng);
        let n = aug.num_nodes();
        let pairs: Vec<(usize, usize)> =
            (0..cfg.sens_pairs).map(|_| (rng.random_range(0..n), rng.random_range(0..n))).collect();
        Some(sensitivity_check(&weights, &a_hat, &x, cfg.sens_r, 1.0, &pairs)?)
    } else {
        None
    };

    let report = json!({
        "spectrum": spectrum,
        "curvature": curvature,
        "osm": { "augmented": osm_aug, "baseline": osm_base },
        "sensitivity": sensitivity,
        "data": source.describe(),
        "seed": seed,
        "config": cfg.resolved,
    });
    write_json(&cfg.out.join("diagnose_report.json"), &report)?;
    Ok(report)
}

/// Everything needed to integrate one dynamics run.
#[derive(Debug, Clone)]
pub struct Simulation {
    /// Symmetrically normalized `A_c`.
    pub a: SignedMatrix,
    pub a_y: Option<SignedMatrix>,
    /// Stacked base and CN features, column-centered.
    pub h0: Array2<f64>,
    pub spec: DynamicsSpec,
    /// Nodes (CNs included) with label 0, and with any other label.
    pub group1: Vec<usize>,
    pub group2: Vec<usize>,
}

pub fn simulation_setup(graph: &LabeledGraph, cfg: &RunConfig, seed: u64) -> Result<Simulation, CliError> {
    let aug = augment_graph(graph, cfg, cfg.cn_mult, seed)?;
    let a = normalize_sym(&aug.a_c, !aug.self_loops)?;
    let mut h0 = aug.stacked_features();
    if let Some(mean) = h0.mean_axis(Axis(0)) {
        h0 -= &mean;
    }
    let mut spec = DynamicsSpec::new(cfg.variant, cfg.dt, cfg.horizon);
    spec.delta = cfg.train.delta;
    if cfg.variant == Variant::Acmp {
        spec.beta = Some(cfg.train.beta);
    }
    if cfg.variant == Variant::Uygat {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let row: Vec<f64> = (0..2 * h0.ncols()).map(|_| rng.random_range(-1.0..1.0)).collect();
        spec.attention = Some(AttentionParams::from_row(&row));
    }
    let a_y = (cfg.variant == Variant::LabelUniverse).then(|| build_label_adjacency(graph));
    let label = |i: usize| if i < aug.num_base() { graph.labels[i] } else { Some(aug.cns.labels[i - aug.num_base()]) };
    let (mut group1, mut group2) = (Vec::new(), Vec::new());
    for i in 0..aug.num_nodes() {
        match label(i) {
            Some(0) => group1.push(i),
            Some(_) => group2.push(i),
            None => {}
        }
    }
    Ok(Simulation { a, a_y, h0, spec, group1, group2 })
}

fn write_trajectory(path: &Path, traj: &Trajectory, stride: usize) -> std::io::Result<()> {
    write_atomic(path, |w| traj.write_csv(w, stride))
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Value, CliError> {
    let source = DataSource::from_config(cfg)?;
    let seed = cfg.seeds[0];
    let graph = source.graph(cfg, seed)?;
    let sim = simulation_setup(&graph, cfg, seed)?;
    let traj_path = cfg.out.join("trajectory.csv");
    let report_path = cfg.out.join("flocking_report.json");
    let traj = match integrate_euler(&sim.spec, &sim.a, sim.a_y.as_ref(), &sim.h0) {
        Ok(t) => t,
        Err(Error::Divergence { t, partial }) => {
            write_trajectory(&traj_path, &partial, cfg.stride)?;
            write_json(
                &report_path,
                &json!({ "explosive": true, "diverged_at": t, "steps": partial.len(), "flocking": null,
                         "data": source.describe(), "seed": seed, "config": cfg.resolved }),
            )?;
            return Err(Error::Divergence { t, partial }.into());
        }
        Err(e) => return Err(e.into()),
    };
    write_trajectory(&traj_path, &traj, cfg.stride)?;
    let flocking = if traj.len() > cfg.window && cfg.window > 0 {
        Some(detect_bicluster_flocking(&traj, &sim.group1, &sim.group2, cfg.c_prime, cfg.window)?)
    } else {
        log::warn!("trajectory of {} states is too short for window {}; flocking not assessed", traj.len(), cfg.window);
        None
    };
    let l_c = signed_laplacian(&SignedEdgeList::from_matrix(&sim.a));
    let energy = energy_trace(&traj.times, &traj.states, &l_c)?;
    let report = json!({
        "explosive": traj.explosive,
        "steps": traj.len(),
        "flocking": flocking,
        "energy": {
            "lambda_max": energy.lambda_max,
            "norm_sq_initial": energy.steps.first().map(|s| s.norm_sq),
            "norm_sq_t1": energy.norm_sq_at(1.0),
            "norm_sq_max": energy.max_norm_sq(),
            "inconsistent_steps": energy.inconsistent_steps.len(),
        },
        "data": source.describe(),
        "seed": seed,
        "config": cfg.resolved,
    });
    write_json(&report_path, &report)?;
    Ok(report)
}
