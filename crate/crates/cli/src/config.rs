//! Flat `key = value` run configuration: defaults, then a config file, then flags.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use uygraph::augment::{CnCnPolicy, FeatureInit};
use uygraph::datasets::SbmSpec;
use uygraph::dynamics::Variant;
use uygraph::learner::{ModelKind, TrainConfig};

use crate::CliError;

/// Every accepted key with its default.
pub const KEYS: &[(&str, &str)] = &[
    ("dataset", ""),
    ("sbm", ""),
    ("model", "uygcn"),
    ("cn_mult", "1"),
    ("cn_mults", "1,2,3,4,5"),
    ("cn_cn", "negative"),
    ("cn_init", "learnable_embedding"),
    ("self_loops", "false"),
    ("lr", "0.01"),
    ("lr_grid", ""),
    ("weight_decay", "0.005"),
    ("dropout", "0.5"),
    ("hidden", "16"),
    ("layers", "2"),
    ("epochs", "200"),
    ("delta", "0"),
    ("beta", "0.1"),
    ("step", "0.5"),
    ("seeds", "0"),
    ("train_per_class", "20"),
    ("val_fraction", "0.5"),
    ("out", "out"),
    ("spectrum", "true"),
    ("sens_r", "3"),
    ("sens_pairs", "20"),
    ("osm_iterations", "2000"),
    ("variant", "uygat"),
    ("dt", "0.05"),
    ("horizon", "50"),
    ("c_prime", "0.5"),
    ("window", "200"),
    ("stride", "1"),
];

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub sbm: Option<SbmSpec>,
    pub model: ModelKind,
    pub cn_mult: usize,
    pub cn_mults: Vec<usize>,
    pub cn_cn: CnCnPolicy,
    pub cn_init: FeatureInit,
    pub self_loops: bool,
    pub train: TrainConfig,
    pub lr_grid: Vec<f64>,
    pub seeds: Vec<u64>,
    pub train_per_class: usize,
    pub val_fraction: f64,
    pub out: PathBuf,
    pub spectrum: bool,
    pub sens_r: usize,
    pub sens_pairs: usize,
    pub osm_iterations: usize,
    pub variant: Variant,
    pub dt: f64,
    pub horizon: f64,
    pub c_prime: f64,
    pub window: usize,
    pub stride: usize,
    /// Every key with its final value, echoed into reports.
    pub resolved: BTreeMap<String, String>,
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str, source: &Path) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| usage(format!("{}:{}: expected key = value", source.display(), n + 1)))?;
        let key = k.trim().to_string();
        if !is_key(&key) {
            return Err(usage(format!("{}:{}: unknown key {key:?}", source.display(), n + 1)));
        }
        out.push((key, v.trim().to_string()));
    }
    Ok(out)
}

pub fn is_key(key: &str) -> bool {
    KEYS.iter().any(|(k, _)| *k == key)
}

fn field<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<T, CliError> {
    let raw = &map[key];
    raw.parse().map_err(|_| usage(format!("invalid value {raw:?} for {key}")))
}

fn list<T: std::str::FromStr>(raw: &str, key: &str) -> Result<Vec<T>, CliError> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|_| usage(format!("invalid entry {s:?} in {key}"))))
        .collect()
}

/// `"0,1,2"` or the half-open range `"0..10"`.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>, CliError> {
    let seeds = if let Some((a, b)) = raw.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| usage(format!("invalid seed range {raw:?}")))?;
        let b: u64 = b.trim().parse().map_err(|_| usage(format!("invalid seed range {raw:?}")))?;
        (a..b).collect()
    } else {
        list(raw, "seeds")?
    };
    if seeds.is_empty() {
        return Err(usage("at least one seed is required"));
    }
    Ok(seeds)
}

/// Comma-separated `field=value` overrides of the default [`SbmSpec`].
pub fn parse_sbm(raw: &str) -> Result<SbmSpec, CliError> {
    let mut spec = SbmSpec::default();
    for part in raw.split(',').map(str::trim).filter(|s| !s.is_empty() && *s != "default") {
        let (k, v) = part.split_once('=').ok_or_else(|| usage(format!("sbm entry {part:?} is not field=value")))?;
        let bad = || usage(format!("invalid sbm value {v:?} for {k}"));
        match k.trim() {
            "num_classes" => spec.num_classes = v.parse().map_err(|_| bad())?,
            "nodes_per_class" => spec.nodes_per_class = v.parse().map_err(|_| bad())?,
            "p_in" => spec.p_in = v.parse().map_err(|_| bad())?,
            "p_out" => spec.p_out = v.parse().map_err(|_| bad())?,
            "feature_dim" => spec.feature_dim = v.parse().map_err(|_| bad())?,
            "separation" => spec.separation = v.parse().map_err(|_| bad())?,
            "noise" => spec.noise = v.parse().map_err(|_| bad())?,
            "require_connected" => spec.require_connected = v.parse().map_err(|_| bad())?,
            other => return Err(usage(format!("unknown sbm field {other:?}"))),
        }
    }
    spec.validate().map_err(|e| usage(e.to_string()))?;
    Ok(spec)
}

pub fn parse_cn_cn(raw: &str) -> Result<CnCnPolicy, CliError> {
    match raw {
        "none" => Ok(CnCnPolicy::None),
        "negative" => Ok(CnCnPolicy::Negative),
        "identity" | "identity_block" => Ok(CnCnPolicy::IdentityBlock),
        _ => Err(usage(format!("cn_cn must be none, negative or identity, got {raw:?}"))),
    }
}

pub fn parse_cn_init(raw: &str) -> Result<FeatureInit, CliError> {
    match raw {
        "class_mean_linear" => Ok(FeatureInit::ClassMeanLinear),
        "learnable_embedding" => Ok(FeatureInit::LearnableEmbedding),
        "zeros" => Ok(FeatureInit::Zeros),
        _ => Err(usage(format!("cn_init must be class_mean_linear, learnable_embedding or zeros, got {raw:?}"))),
    }
}

impl RunConfig {
    /// Defaults, overlaid by `file` entries and then by `flags`.
    pub fn resolve(file: &[(String, String)], flags: &[(String, String)]) -> Result<Self, CliError> {
        let mut map: BTreeMap<String, String> = KEYS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        for (k, v) in file.iter().chain(flags) {
            if !is_key(k) {
                return Err(usage(format!("unknown key {k:?}")));
            }
            map.insert(k.clone(), v.clone());
        }
        Self::from_map(map)
    }

    pub fn from_pairs<'a>(pairs: impl IntoIterator<Item = (&'a str, &'a str)>) -> Result<Self, CliError> {
        let flags: Vec<(String, String)> = pairs.into_iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        Self::resolve(&[], &flags)
    }

    fn from_map(map: BTreeMap<String, String>) -> Result<Self, CliError> {
        let dataset = Some(map["dataset"].clone()).filter(|s| !s.is_empty()).map(PathBuf::from);
        let sbm = if map["sbm"].is_empty() { None } else { Some(parse_sbm(&map["sbm"])?) };
        if dataset.is_some() && sbm.is_some() {
            return Err(usage("dataset and sbm are mutually exclusive"));
        }
        let model: ModelKind = map["model"].parse().map_err(|e: uygraph::Error| usage(e.to_string()))?;
        let variant: Variant = map["variant"].parse().map_err(|e: uygraph::Error| usage(e.to_string()))?;
        let train = TrainConfig {
            lr: field(&map, "lr")?,
            weight_decay: field(&map, "weight_decay")?,
            dropout: field(&map, "dropout")?,
            hidden_dim: field(&map, "hidden")?,
            layers: field(&map, "layers")?,
            epochs_max: field(&map, "epochs")?,
            seed: 0,
            delta: field(&map, "delta")?,
            beta: field(&map, "beta")?,
            step: field(&map, "step")?,
        };
        train.validate().map_err(|e| usage(e.to_string()))?;
        let lr_grid: Vec<f64> = list(&map["lr_grid"], "lr_grid")?;
        if lr_grid.iter().any(|&lr| !(lr > 0.0)) {
            return Err(usage("lr_grid entries must be positive"));
        }
        let cn_mult: usize = field(&map, "cn_mult")?;
        let cn_mults: Vec<usize> = list(&map["cn_mults"], "cn_mults")?;
        if cn_mults.is_empty() {
            return Err(usage("cn_mults must list at least one multiplicity"));
        }
        let val_fraction: f64 = field(&map, "val_fraction")?;
        if !(0.0..=1.0).contains(&val_fraction) {
            return Err(usage("val_fraction must lie in [0, 1]"));
        }
        let stride: usize = field(&map, "stride")?;
        if stride == 0 {
            return Err(usage("stride must be at least 1"));
        }
        Ok(RunConfig {
            dataset,
            sbm,
            model,
            cn_mult,
            cn_mults,
            cn_cn: parse_cn_cn(&map["cn_cn"])?,
            cn_init: parse_cn_init(&map["cn_init"])?,
            self_loops: field(&map, "self_loops")?,
            train,
            lr_grid,
            seeds: parse_seeds(&map["seeds"])?,
            train_per_class: field(&map, "train_per_class")?,
            val_fraction,
            out: PathBuf::from(&map["out"]),
            spectrum: field(&map, "spectrum")?,
            sens_r: field(&map, "sens_r")?,
            sens_pairs: field(&map, "sens_pairs")?,
            osm_iterations: field(&map, "osm_iterations")?,
            variant,
            dt: field(&map, "dt")?,
            horizon: field(&map, "horizon")?,
            c_prime: field(&map, "c_prime")?,
            window: field(&map, "window")?,
            stride,
            resolved: map,
        })
    }

    /// Training hyperparameters for one run.
    pub fn train_config(&self, seed: u64, lr: f64) -> TrainConfig {
        TrainConfig { seed, lr, ..self.train.clone() }
    }
}
