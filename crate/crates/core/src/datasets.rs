//! CSV datasets and synthetic stochastic block models.
//!
//! A dataset directory holds four files, each with a header row:
//!
//! | file | columns |
//! |------|---------|
//! | `edges.csv` | `src,dst` |
//! | `features.csv` | `node_id,f0,...,f{d-1}` |
//! | `labels.csv` | `node_id,label` (unlabeled nodes omitted) |
//! | `splits.csv` | `node_id,split` with split in `train`, `val`, `test` |

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::graph::{homophily_score, LabeledGraph};
use crate::{Error, Result};

pub const FILES: [&str; 4] = ["edges.csv", "features.csv", "labels.csv", "splits.csv"];

/// Connectivity resampling budget of [`generate_sbm`].
pub const MAX_SBM_ATTEMPTS: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetBundle {
    pub graph: LabeledGraph,
    pub name: String,
    /// Directory the files came from; `None` for generated data.
    pub source: Option<PathBuf>,
    /// SHA-256 over the four CSV files, in the order of [`FILES`].
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub num_nodes: usize,
    pub num_edges: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub homophily: Option<f64>,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub checksum: String,
}

impl DatasetBundle {
    pub fn summary(&self) -> DatasetSummary {
        let g = &self.graph;
        let count = |m: &[bool]| m.iter().filter(|&&b| b).count();
        DatasetSummary {
            name: self.name.clone(),
            num_nodes: g.num_nodes,
            num_edges: g.edges.len(),
            num_classes: g.num_classes,
            feature_dim: g.feature_dim(),
            homophily: homophily_score(g).ok().map(|h| h.score),
            train: count(&g.train_mask),
            val: count(&g.val_mask),
            test: count(&g.test_mask),
            checksum: self.checksum.clone(),
        }
    }
}

fn parse_err(file: &Path, line: u64, msg: impl Into<String>) -> Error {
    Error::Parse { file: file.to_path_buf(), line, msg: msg.into() }
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(bytes)
}

fn records(bytes: &[u8], path: &Path) -> Result<Vec<(u64, csv::StringRecord)>> {
    let mut rdr = reader(bytes);
    rdr.headers().map_err(|e| parse_err(path, 1, e.to_string()))?;
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        out.push((line, rec));
    }
    Ok(out)
}

fn parse_id(field: &str, n: Option<usize>, path: &Path, line: u64) -> Result<usize> {
    let id: usize = field.parse().map_err(|_| parse_err(path, line, format!("invalid node id {field:?}")))?;
    if let Some(n) = n {
        if id >= n {
            return Err(parse_err(path, line, format!("node id {id} out of range for {n} nodes")));
        }
    }
    Ok(id)
}

fn read_file(dir: &Path, name: &str) -> Result<(PathBuf, Vec<u8>)> {
    let path = dir.join(name);
    match fs::read(&path) {
        Ok(b) => Ok((path, b)),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(Error::MissingFile(path)),
        Err(e) => Err(e.into()),
    }
}

pub fn checksum_of(parts: &[&[u8]]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update(p);
    }
    hex::encode(h.finalize())
}

/// Reads and validates a dataset directory.
pub fn load_dataset(dir: &Path) -> Result<DatasetBundle> {
    let (edges_path, edges_bytes) = read_file(dir, FILES[0])?;
    let (feat_path, feat_bytes) = read_file(dir, FILES[1])?;
    let (label_path, label_bytes) = read_file(dir, FILES[2])?;
    let (split_path, split_bytes) = read_file(dir, FILES[3])?;

    // features fix N
    let feat_rows = records(&feat_bytes, &feat_path)?;
    let n = feat_rows.len();
    let d = feat_rows.first().map(|(_, r)| r.len().saturating_sub(1)).unwrap_or(0);
    let mut features = Array2::zeros((n, d));
    let mut seen = vec![false; n];
    for (line, rec) in &feat_rows {
        let id = parse_id(&rec[0], Some(n), &feat_path, *line)?;
        if std::mem::replace(&mut seen[id], true) {
            return Err(parse_err(&feat_path, *line, format!("duplicate node id {id}")));
        }
        for (c, field) in rec.iter().skip(1).enumerate() {
            features[[id, c]] = field
                .parse::<f64>()
                .map_err(|_| parse_err(&feat_path, *line, format!("non-numeric feature {field:?}")))?;
        }
    }

    let mut edges = Vec::new();
    for (line, rec) in records(&edges_bytes, &edges_path)? {
        if rec.len() != 2 {
            return Err(parse_err(&edges_path, line, "expected src,dst"));
        }
        edges.push((parse_id(&rec[0], Some(n), &edges_path, line)?, parse_id(&rec[1], Some(n), &edges_path, line)?));
    }

    let mut labels = vec![None; n];
    for (line, rec) in records(&label_bytes, &label_path)? {
        if rec.len() != 2 {
            return Err(parse_err(&label_path, line, "expected node_id,label"));
        }
        let id = parse_id(&rec[0], Some(n), &label_path, line)?;
        let y: usize = rec[1].parse().map_err(|_| parse_err(&label_path, line, format!("invalid label {:?}", &rec[1])))?;
        if labels[id].replace(y).is_some() {
            return Err(parse_err(&label_path, line, format!("duplicate label for node {id}")));
        }
    }
    let num_classes = labels.iter().flatten().max().map_or(0, |&m| m + 1);

    let mut masks = [vec![false; n], vec![false; n], vec![false; n]];
    for (line, rec) in records(&split_bytes, &split_path)? {
        if rec.len() != 2 {
            return Err(parse_err(&split_path, line, "expected node_id,split"));
        }
        let id = parse_id(&rec[0], Some(n), &split_path, line)?;
        let k = match &rec[1] {
            "train" => 0,
            "val" => 1,
            "test" => 2,
            other => return Err(parse_err(&split_path, line, format!("unknown split {other:?}"))),
        };
        if masks.iter().enumerate().any(|(m, mask)| m != k && mask[id]) {
            return Err(parse_err(&split_path, line, format!("node {id} in overlapping masks")));
        }
        masks[k][id] = true;
    }

    let [train, val, test] = masks;
    let graph = LabeledGraph::new(n, edges, features, labels, num_classes)?.with_masks(train, val, test)?;
    if let Some(i) = graph.train_nodes().into_iter().find(|&i| graph.labels[i].is_none()) {
        return Err(Error::UnlabeledTrainNode(i));
    }
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(DatasetBundle {
        graph,
        name,
        source: Some(dir.to_path_buf()),
        checksum: checksum_of(&[&edges_bytes, &feat_bytes, &label_bytes, &split_bytes]),
    })
}

/// The four CSV files as bytes, in the order of [`FILES`].
pub fn encode_dataset(graph: &LabeledGraph) -> [Vec<u8>; 4] {
    let mut edges = b"src,dst\n".to_vec();
    for &(a, b) in &graph.edges {
        writeln!(edges, "{a},{b}").expect("write to vec");
    }
    let mut feats = Vec::new();
    let header: Vec<String> = std::iter::once("node_id".to_string())
        .chain((0..graph.feature_dim()).map(|c| format!("f{c}")))
        .collect();
    writeln!(feats, "{}", header.join(",")).expect("write to vec");
    for (i, row) in graph.features.rows().into_iter().enumerate() {
        write!(feats, "{i}").expect("write to vec");
        for v in row {
            // Debug formatting is the shortest representation that parses back exactly
            write!(feats, ",{v:?}").expect("write to vec");
        }
        feats.push(b'\n');
    }
    let mut labels = b"node_id,label\n".to_vec();
    for (i, y) in graph.labels.iter().enumerate() {
        if let Some(y) = y {
            writeln!(labels, "{i},{y}").expect("write to vec");
        }
    }
    let mut splits = b"node_id,split\n".to_vec();
    for i in 0..graph.num_nodes {
        let s = if graph.train_mask[i] {
            "train"
        } else if graph.val_mask[i] {
            "val"
        } else if graph.test_mask[i] {
            "test"
        } else {
            continue;
        };
        writeln!(splits, "{i},{s}").expect("write to vec");
    }
    [edges, feats, labels, splits]
}

/// Writes the four CSV files into `dir`, creating it if needed.
pub fn save_dataset(graph: &LabeledGraph, dir: &Path) -> Result<String> {
    fs::create_dir_all(dir)?;
    let parts = encode_dataset(graph);
    for (name, bytes) in FILES.iter().zip(&parts) {
        fs::write(dir.join(name), bytes)?;
    }
    Ok(checksum_of(&[&parts[0], &parts[1], &parts[2], &parts[3]]))
}

/// Planted-partition graph with Gaussian class-conditional features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub num_classes: usize,
    pub nodes_per_class: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    /// Class `c` has mean `separation · e_{c mod d}`.
    pub separation: f64,
    /// Per-coordinate noise standard deviation.
    pub noise: f64,
    pub seed: u64,
    pub require_connected: bool,
}

impl Default for SbmSpec {
    fn default() -> Self {
        SbmSpec {
            num_classes: 2,
            nodes_per_class: 100,
            p_in: 0.1,
            p_out: 0.01,
            feature_dim: 8,
            separation: 1.0,
            noise: 1.0,
            seed: 0,
            require_connected: true,
        }
    }
}

impl SbmSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidArgument(format!("{name} = {p} is not a probability")));
            }
        }
        if self.num_classes == 0 || self.nodes_per_class == 0 {
            return Err(Error::InvalidArgument("SBM needs at least one class and one node per class".into()));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::InvalidArgument("noise must be non-negative".into()));
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.num_classes * self.nodes_per_class
    }
}

/// `(n−1)p_in / ((n−1)p_in + n(C−1)p_out)`.
pub fn expected_sbm_homophily(spec: &SbmSpec) -> f64 {
    let n = spec.nodes_per_class as f64;
    let within = (n - 1.0) * spec.p_in;
    let across = n * (spec.num_classes as f64 - 1.0) * spec.p_out;
    if within + across == 0.0 {
        0.0
    } else {
        within / (within + across)
    }
}

fn sample_sbm(spec: &SbmSpec, rng: &mut ChaCha8Rng) -> Result<LabeledGraph> {
    let n = spec.num_nodes();
    let class = |i: usize| i / spec.nodes_per_class;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let p = if class(i) == class(j) { spec.p_in } else { spec.p_out };
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    let normal = Normal::new(0.0, spec.noise).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let d = spec.feature_dim;
    let mut features = Array2::from_shape_simple_fn((n, d), || normal.sample(rng));
    if d > 0 {
        for i in 0..n {
            features[[i, class(i) % d]] += spec.separation;
        }
    }
    let labels = (0..n).map(|i| Some(class(i))).collect();
    LabeledGraph::new(n, edges, features, labels, spec.num_classes)
}

/// Samples an SBM; with `require_connected`, resamples up to
/// [`MAX_SBM_ATTEMPTS`] times before giving up.
pub fn generate_sbm(spec: &SbmSpec) -> Result<DatasetBundle> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    for attempt in 0..MAX_SBM_ATTEMPTS {
        let graph = sample_sbm(spec, &mut rng)?;
        if spec.require_connected && !graph.is_connected() {
            log::debug!("SBM attempt {attempt} disconnected, resampling");
            continue;
        }
        let parts = encode_dataset(&graph);
        return Ok(DatasetBundle {
            graph,
            name: format!(
                "sbm-c{}-n{}-pin{}-pout{}-s{}",
                spec.num_classes, spec.nodes_per_class, spec.p_in, spec.p_out, spec.seed
            ),
            source: None,
            checksum: checksum_of(&[&parts[0], &parts[1], &parts[2], &parts[3]]),
        });
    }
    Err(Error::Disconnected(MAX_SBM_ATTEMPTS))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<bool>,
    pub val: Vec<bool>,
    pub test: Vec<bool>,
}

impl Split {
    pub fn apply(self, graph: LabeledGraph) -> Result<LabeledGraph> {
        graph.with_masks(self.train, self.val, self.test)
    }
}

/// Stratified split: exactly `per_class_train` train nodes per class, then
/// `val_fraction` of the remaining labeled nodes for validation and the rest
/// for test. Unlabeled nodes are left out of every mask.
pub fn make_split(graph: &LabeledGraph, per_class_train: usize, val_fraction: f64, seed: u64) -> Result<Split> {
    if per_class_train == 0 {
        return Err(Error::InvalidArgument("per_class_train must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&val_fraction) {
        return Err(Error::InvalidArgument(format!("val_fraction {val_fraction} outside [0, 1]")));
    }
    let n = graph.num_nodes;
    let mut by_class = vec![Vec::new(); graph.num_classes];
    for (i, y) in graph.labels.iter().enumerate() {
        if let Some(y) = y {
            by_class[*y].push(i);
        }
    }
    if let Some(c) = by_class.iter().position(Vec::is_empty) {
        return Err(Error::ClassAbsent(c));
    }
    if let Some(c) = by_class.iter().position(|v| v.len() < per_class_train) {
        return Err(Error::InvalidArgument(format!(
            "class {c} has {} nodes, cannot place {per_class_train} in train",
            by_class[c].len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = vec![false; n];
    let mut rest = Vec::new();
    for nodes in &mut by_class {
        nodes.shuffle(&mut rng);
        for &i in &nodes[..per_class_train] {
            train[i] = true;
        }
        rest.extend_from_slice(&nodes[per_class_train..]);
    }
    rest.shuffle(&mut rng);
    let n_val = (val_fraction * rest.len() as f64).round() as usize;
    let mut val = vec![false; n];
    let mut test = vec![false; n];
    for (k, &i) in rest.iter().enumerate() {
        if k < n_val {
            val[i] = true;
        } else {
            test[i] = true;
        }
    }
    Ok(Split { train, val, test })
}
