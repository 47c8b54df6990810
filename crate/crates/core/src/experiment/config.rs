//! `key = value` configuration files.
//!
//! One setting per line, `#` starts a comment, lists are comma separated.
//! Every key is known in advance; an unknown or repeated key is an error so
//! that typos never silently fall back to defaults.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::booster::BoosterConfig;
use crate::dataset::CsvSchema;
use crate::loss::{LossError, LossFamily, LossSpec};
use crate::tree::TreeConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`, found `{text}`")]
    Syntax { line: usize, text: String },
    #[error("key `{0}` is set more than once")]
    Duplicate(String),
    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),
    #[error("invalid value for {key}: `{value}` ({reason})")]
    Invalid { key: String, value: String, reason: String },
    #[error("cannot read configuration {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

fn invalid(key: &str, value: impl ToString, reason: impl ToString) -> ConfigError {
    ConfigError::Invalid {
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

/// Ordered raw settings, before interpretation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    entries: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut settings = Settings::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                text: raw.to_string(),
            })?;
            let key = k.trim();
            if key.is_empty() {
                return Err(ConfigError::Syntax {
                    line: i + 1,
                    text: raw.to_string(),
                });
            }
            if settings.entries.insert(key.to_string(), v.trim().to_string()).is_some() {
                return Err(ConfigError::Duplicate(key.to_string()));
            }
        }
        Ok(settings)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Sets or replaces a key (command-line overrides).
    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.trim().to_string(), value.trim().to_string());
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }
}

/// Where the examples come from.
#[derive(Debug, Clone, PartialEq)]
pub enum DatasetSource {
    Csv {
        path: PathBuf,
        schema: CsvSchema,
    },
    /// A generated fixture, see [`super::synthetic`].
    Synthetic {
        name: String,
        seed: u64,
    },
}

impl DatasetSource {
    /// Short name used in result files.
    pub fn name(&self) -> String {
        match self {
            DatasetSource::Csv { path, .. } => path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "data".to_string()),
            DatasetSource::Synthetic { name, .. } => name.clone(),
        }
    }
}

/// Search grid for the sweep. An axis only applies to methods whose loss
/// uses that parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub r: Vec<f64>,
    pub q: Vec<f64>,
    pub learning_rate: Vec<f64>,
    pub n_rounds: Vec<usize>,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            r: vec![0.5, 1.0, 2.0],
            q: vec![0.3, 0.5, 0.7],
            learning_rate: vec![0.05, 0.1],
            n_rounds: vec![100, 300],
        }
    }
}

/// A named method: a loss plus the grid axes it is tuned over.
#[derive(Debug, Clone, PartialEq)]
pub struct MethodSpec {
    pub name: String,
    pub loss: LossSpec,
    pub r_grid: Vec<f64>,
    pub q_grid: Vec<f64>,
}

impl MethodSpec {
    /// Tunes `r` and `q` over the grid when the family uses them, otherwise
    /// keeps the single value from `loss`.
    pub fn tuned(name: &str, loss: LossSpec, grid: &Grid) -> Self {
        MethodSpec {
            name: name.to_string(),
            loss,
            r_grid: if loss.uses_r() { grid.r.clone() } else { vec![loss.r] },
            q_grid: if loss.uses_q() { grid.q.clone() } else { vec![loss.q] },
        }
    }

    /// Every loss the method is tuned over, `r` varying slowest.
    pub fn candidates(&self) -> Vec<LossSpec> {
        let mut out = Vec::with_capacity(self.r_grid.len() * self.q_grid.len());
        for &r in &self.r_grid {
            for &q in &self.q_grid {
                out.push(LossSpec { r, q, ..self.loss });
            }
        }
        out
    }
}

/// The three ablation variants: full RFL, RFL with `r = 0` (which is GCE),
/// and the `q → 0` limit (which is FL).
pub fn ablation_methods(base: &LossSpec, grid: &Grid) -> Vec<MethodSpec> {
    let rfl = LossSpec {
        family: LossFamily::Rfl,
        ..*base
    };
    let mut no_focus = MethodSpec::tuned("rfl_r0", rfl, grid);
    no_focus.r_grid = vec![0.0];
    let fl = LossSpec {
        family: LossFamily::Focal,
        ..*base
    };
    vec![
        MethodSpec::tuned("rfl", rfl, grid),
        no_focus,
        MethodSpec::tuned("rfl_q0", fl, grid),
    ]
}

/// Everything the commands need, interpreted and validated.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub dataset: DatasetSource,
    pub noise_levels: Vec<f64>,
    pub repeats: usize,
    pub split_fraction: f64,
    /// Share of the noisy training set used for fitting during tuning.
    pub tune_fraction: f64,
    pub stratified: bool,
    pub wrap_last_class: bool,
    pub methods: Vec<MethodSpec>,
    pub grid: Grid,
    /// Single-model settings for `train`, and the tree/booster base for sweeps.
    pub booster: BoosterConfig,
    /// Held-out share for `train` (validation log and early stopping).
    pub valid_fraction: Option<f64>,
    /// Label noise rate for `inject`.
    pub noise_rate: f64,
    pub out_dir: PathBuf,
    pub seed: u64,
    /// Worker threads; 0 picks the number of cores.
    pub threads: usize,
}

const KNOWN_KEYS: &[&str] = &[
    "dataset",
    "data_seed",
    "label_column",
    "missing_tokens",
    "delimiter",
    "noise_levels",
    "repeats",
    "split_fraction",
    "tune_fraction",
    "stratified",
    "wrap_last_class",
    "methods",
    "grid.r",
    "grid.q",
    "grid.learning_rate",
    "grid.n_rounds",
    "learning_rate",
    "n_rounds",
    "n_classes",
    "early_stopping_rounds",
    "subsample",
    "one_vs_all",
    "lambda",
    "min_samples_leaf",
    "min_sum_hessian",
    "min_gain",
    "max_depth",
    "max_leaves",
    "valid_fraction",
    "noise_rate",
    "out",
    "seed",
    "threads",
];

fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, ConfigError> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| invalid(key, value, "not a number"))
}

fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>, ConfigError> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<Result<_, _>>()?;
    if items.is_empty() {
        return Err(invalid(key, value, "empty list"));
    }
    Ok(items)
}

fn flag(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value.trim().to_ascii_lowercase().as_str() {
        "true" | "1" | "yes" | "on" => Ok(true),
        "false" | "0" | "no" | "off" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn loss_error(e: LossError, settings: &Settings) -> ConfigError {
    match e {
        LossError::Parameter { name, value, reason } => {
            let shown = settings.get(name).map_or_else(|| value.to_string(), str::to_string);
            invalid(name, shown, reason)
        }
        LossError::UnknownFamily(f) => invalid("family", f, "unknown loss family"),
        other => invalid("loss", other.to_string(), "malformed loss option"),
    }
}

impl ExperimentConfig {
    pub fn from_settings(settings: &Settings) -> Result<Self, ConfigError> {
        for key in settings.keys() {
            if !KNOWN_KEYS.contains(&key) && !LossSpec::is_option(key) {
                return Err(ConfigError::UnknownKey(key.to_string()));
            }
        }
        let get = |k: &str| settings.get(k);

        let mut loss = LossSpec::default();
        for key in settings.keys().filter(|k| LossSpec::is_option(k)) {
            let value = settings.get(key).unwrap_or_default();
            loss.set_option(key, value).map_err(|e| match e {
                LossError::Malformed(_) => invalid(key, value, "malformed value"),
                other => loss_error(other, settings),
            })?;
        }
        loss.validate().map_err(|e| loss_error(e, settings))?;

        let dataset = match get("dataset") {
            None => DatasetSource::Synthetic {
                name: "imbalanced".to_string(),
                seed: 0,
            },
            Some(v) => match v.strip_prefix("synthetic:") {
                Some(name) => {
                    if !super::synthetic::FIXTURES.contains(&name) {
                        return Err(invalid("dataset", v, "unknown synthetic fixture"));
                    }
                    DatasetSource::Synthetic {
                        name: name.to_string(),
                        seed: get("data_seed").map_or(Ok(0), |s| num("data_seed", s))?,
                    }
                }
                None => {
                    let mut schema = CsvSchema::with_label(get("label_column").unwrap_or("label"));
                    if let Some(tokens) = get("missing_tokens") {
                        schema.missing_tokens = tokens.split(',').map(|t| t.trim().to_string()).collect();
                    }
                    if let Some(d) = get("delimiter") {
                        let d = if d == "tab" { "\t" } else { d };
                        if d.len() != 1 {
                            return Err(invalid("delimiter", d, "must be a single byte"));
                        }
                        schema.delimiter = d.as_bytes()[0];
                    }
                    DatasetSource::Csv {
                        path: PathBuf::from(v),
                        schema,
                    }
                }
            },
        };

        let noise_levels: Vec<f64> = match get("noise_levels") {
            Some(v) => list("noise_levels", v)?,
            None => vec![0.0, 0.1, 0.2, 0.3, 0.4],
        };
        if let Some(&g) = noise_levels.iter().find(|g| !(**g >= 0.0 && **g < 0.5)) {
            return Err(invalid("noise_levels", g, "each level must lie in [0, 0.5)"));
        }
        let repeats: usize = get("repeats").map_or(Ok(5), |v| num("repeats", v))?;
        if repeats == 0 {
            return Err(invalid("repeats", 0, "must be at least 1"));
        }
        let fraction = |key: &str, default: f64| -> Result<f64, ConfigError> {
            let f: f64 = get(key).map_or(Ok(default), |v| num(key, v))?;
            if !(f > 0.0 && f < 1.0) {
                return Err(invalid(key, f, "must lie in (0, 1)"));
            }
            Ok(f)
        };
        let split_fraction = fraction("split_fraction", 0.8)?;
        let tune_fraction = fraction("tune_fraction", 0.75)?;
        let valid_fraction = match get("valid_fraction") {
            Some(_) => Some(fraction("valid_fraction", 0.8)?),
            None => None,
        };
        let noise_rate: f64 = get("noise_rate").map_or(Ok(0.0), |v| num("noise_rate", v))?;
        if !(0.0..0.5).contains(&noise_rate) {
            return Err(invalid("noise_rate", noise_rate, "must lie in [0, 0.5)"));
        }

        let mut grid = Grid::default();
        if let Some(v) = get("grid.r") {
            grid.r = list("grid.r", v)?;
        }
        if let Some(v) = get("grid.q") {
            grid.q = list("grid.q", v)?;
        }
        if let Some(v) = get("grid.learning_rate") {
            grid.learning_rate = list("grid.learning_rate", v)?;
        }
        if let Some(v) = get("grid.n_rounds") {
            grid.n_rounds = list("grid.n_rounds", v)?;
        }
        for &r in &grid.r {
            LossSpec { r, ..loss }
                .validate()
                .map_err(|_| invalid("grid.r", r, "must be a finite value >= 0"))?;
        }
        for &q in &grid.q {
            LossSpec { q, ..loss }
                .validate()
                .map_err(|_| invalid("grid.q", q, "must lie in (0, 1]"))?;
        }
        if let Some(&lr) = grid.learning_rate.iter().find(|lr| !(**lr > 0.0 && lr.is_finite())) {
            return Err(invalid("grid.learning_rate", lr, "must be positive"));
        }
        if grid.n_rounds.contains(&0) {
            return Err(invalid("grid.n_rounds", 0, "must be at least 1"));
        }

        let methods = match get("methods") {
            None => ["rfl", "cce", "fl", "gce", "sce", "mae", "nce"]
                .iter()
                .map(|m| method(m, &loss, &grid))
                .collect::<Result<Vec<_>, _>>()?,
            Some(v) => {
                let names: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
                if names.is_empty() {
                    return Err(invalid("methods", v, "empty list"));
                }
                let mut out: Vec<MethodSpec> = Vec::new();
                for name in names {
                    let m = method(name, &loss, &grid)?;
                    if out.iter().any(|o| o.name == m.name) {
                        return Err(invalid("methods", v, format!("`{}` listed twice", m.name)));
                    }
                    out.push(m);
                }
                out
            }
        };

        let mut tree = TreeConfig::default();
        if let Some(v) = get("lambda") {
            tree.lambda = num("lambda", v)?;
        }
        if let Some(v) = get("min_samples_leaf") {
            tree.min_samples_leaf = num("min_samples_leaf", v)?;
        }
        if let Some(v) = get("min_sum_hessian") {
            tree.min_sum_hessian = num("min_sum_hessian", v)?;
        }
        if let Some(v) = get("min_gain") {
            tree.min_gain = num("min_gain", v)?;
        }
        if let Some(v) = get("max_depth") {
            tree.max_depth = num("max_depth", v)?;
        }
        if let Some(v) = get("max_leaves") {
            tree.max_leaves = num("max_leaves", v)?;
        }
        let mut booster = BoosterConfig {
            loss,
            tree,
            ..BoosterConfig::default()
        };
        if let Some(v) = get("learning_rate") {
            booster.learning_rate = num("learning_rate", v)?;
        }
        if let Some(v) = get("n_rounds") {
            booster.n_rounds = num("n_rounds", v)?;
        }
        if let Some(v) = get("n_classes") {
            booster.n_classes = num("n_classes", v)?;
        }
        if let Some(v) = get("early_stopping_rounds") {
            booster.early_stopping_rounds = Some(num("early_stopping_rounds", v)?);
        }
        if let Some(v) = get("subsample") {
            booster.subsample = num("subsample", v)?;
        }
        if let Some(v) = get("one_vs_all") {
            booster.one_vs_all = flag("one_vs_all", v)?;
        }
        booster.seed = get("seed").map_or(Ok(0), |v| num("seed", v))?;
        booster.validate().map_err(|e| match e {
            crate::booster::BoosterError::Parameter { name, reason } => invalid(name, get(name).unwrap_or(""), reason),
            crate::booster::BoosterError::Tree(crate::tree::TreeError::Parameter { name, reason }) => {
                invalid(name, get(name).unwrap_or(""), reason)
            }
            other => invalid("booster", "", other),
        })?;

        Ok(ExperimentConfig {
            dataset,
            noise_levels,
            repeats,
            split_fraction,
            tune_fraction,
            stratified: get("stratified").map_or(Ok(true), |v| flag("stratified", v))?,
            wrap_last_class: get("wrap_last_class").map_or(Ok(true), |v| flag("wrap_last_class", v))?,
            methods,
            grid,
            booster,
            valid_fraction,
            noise_rate,
            out_dir: PathBuf::from(get("out").unwrap_or("out")),
            seed: booster.seed,
            threads: get("threads").map_or(Ok(0), |v| num("threads", v))?,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        Self::from_settings(&Settings::parse(text)?)
    }
}

fn method(name: &str, base: &LossSpec, grid: &Grid) -> Result<MethodSpec, ConfigError> {
    let family: LossFamily = name
        .parse()
        .map_err(|_| invalid("methods", name, "unknown loss family"))?;
    let loss = LossSpec { family, ..*base };
    Ok(MethodSpec::tuned(family.name(), loss, grid))
}
