//! Noise-level sweeps: split, corrupt the training labels, tune on an
//! internal split of the noisy data, refit, score on the clean test set.

use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, MethodSpec};
use super::ExperimentError;
use crate::booster::{train_recorded, BoosterConfig, Record};
use crate::dataset::{format_float, train_test_split, SplitPlan, TabularDataset};
use crate::loss::LossSpec;
use crate::noise::{inject, FlipLog, NoiseSpec};

/// Stream tags mixed into derived seeds.
const SPLIT: u64 = 1;
const NOISE: u64 = 2;
const TUNE: u64 = 3;
const TRAIN: u64 = 4;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Folds `parts` into `master` one splitmix64 step at a time.
pub fn derive_seed(master: u64, parts: &[u64]) -> u64 {
    parts.iter().fold(splitmix64(master), |s, &p| splitmix64(s ^ p))
}

/// Seeds of one (γ, repeat) cell. They do not depend on the method, so every
/// method in a cell sees the same split, noise and tuning split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellSeeds {
    pub split: u64,
    pub noise: u64,
    pub tune: u64,
    pub train: u64,
}

impl CellSeeds {
    pub fn new(master: u64, gamma: f64, repeat: usize) -> Self {
        let g = gamma.to_bits();
        let r = repeat as u64;
        CellSeeds {
            split: derive_seed(master, &[SPLIT, r]),
            noise: derive_seed(master, &[NOISE, g, r]),
            tune: derive_seed(master, &[TUNE, g, r]),
            train: derive_seed(master, &[TRAIN, g, r]),
        }
    }
}

/// Train/test split and noisy training labels of one (γ, repeat) cell.
#[derive(Debug, Clone)]
pub struct NoisyCell {
    pub gamma: f64,
    pub repeat: usize,
    pub plan: SplitPlan,
    /// Noisy training subset, rows in `plan.train_indices` order.
    pub train: TabularDataset,
    pub test: TabularDataset,
    /// Flips indexed by row of the full dataset.
    pub flips: FlipLog,
}

/// Splits, then corrupts the training labels only.
pub fn prepare_cell(
    data: &TabularDataset,
    config: &ExperimentConfig,
    gamma: f64,
    repeat: usize,
) -> Result<NoisyCell, ExperimentError> {
    let seeds = CellSeeds::new(config.seed, gamma, repeat);
    let plan = train_test_split(
        &data.labels,
        data.n_classes(),
        config.split_fraction,
        seeds.split,
        config.stratified,
        &data.class_names,
    )?;
    let clean_train = data.subset(&plan.train_indices)?;
    let test = data.subset(&plan.test_indices)?;
    let spec = NoiseSpec::for_classes(data.n_classes(), gamma, seeds.noise, config.wrap_last_class);
    let (noisy, local_flips) = inject(&clean_train.labels, data.n_classes(), &spec)?;
    let flips = local_flips.remap(&plan.train_indices);
    audit_purity(&flips, &plan, gamma, repeat)?;
    Ok(NoisyCell {
        gamma,
        repeat,
        train: clean_train.with_labels(noisy)?,
        test,
        plan,
        flips,
    })
}

/// Fails if any flipped row belongs to the test set.
pub fn audit_purity(flips: &FlipLog, plan: &SplitPlan, gamma: f64, repeat: usize) -> Result<(), ExperimentError> {
    for index in flips.indices() {
        if plan.test_indices.binary_search(&index).is_ok() {
            return Err(ExperimentError::Purity { gamma, repeat, index });
        }
    }
    Ok(())
}

/// Hyperparameters picked by tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Choice {
    pub loss: LossSpec,
    pub learning_rate: f64,
    pub n_rounds: usize,
    /// Validation metric that selected it.
    pub score: f64,
}

/// Grid search on a seeded internal split of the noisy training data.
///
/// Each (loss, learning rate) candidate is trained once for the largest
/// round count with a validation log; smaller round counts are read from the
/// log, which equals training them separately since rounds never look ahead.
/// The first candidate in grid order wins ties.
pub fn tune(
    train_set: &TabularDataset,
    method: &MethodSpec,
    config: &ExperimentConfig,
    seeds: CellSeeds,
) -> Result<Choice, ExperimentError> {
    let plan = train_test_split(
        &train_set.labels,
        train_set.n_classes(),
        config.tune_fraction,
        seeds.tune,
        config.stratified,
        &train_set.class_names,
    )?;
    let fit_set = train_set.subset(&plan.train_indices)?;
    let valid_set = train_set.subset(&plan.test_indices)?;
    let max_rounds = *config.grid.n_rounds.iter().max().expect("grid validated non-empty");
    let mut best: Option<Choice> = None;
    for loss in method.candidates() {
        for &learning_rate in &config.grid.learning_rate {
            let booster = cell_booster(config, train_set.n_classes(), loss, learning_rate, max_rounds, seeds);
            let record = Record {
                train: false,
                valid_at: Some(&config.grid.n_rounds),
            };
            let run = train_recorded(&fit_set, Some(&valid_set), &booster, record)?;
            for &n_rounds in &config.grid.n_rounds {
                let score = run.log[n_rounds - 1].valid_metric.unwrap_or(f64::NAN);
                let score = if score.is_nan() { f64::NEG_INFINITY } else { score };
                if best.is_none_or(|b| score > b.score) {
                    best = Some(Choice {
                        loss,
                        learning_rate,
                        n_rounds,
                        score,
                    });
                }
            }
        }
    }
    Ok(best.expect("at least one candidate"))
}

fn cell_booster(
    config: &ExperimentConfig,
    n_classes: usize,
    loss: LossSpec,
    learning_rate: f64,
    n_rounds: usize,
    seeds: CellSeeds,
) -> BoosterConfig {
    BoosterConfig {
        loss,
        learning_rate,
        n_rounds,
        n_classes,
        seed: seeds.train,
        early_stopping_rounds: None,
        ..config.booster
    }
}

/// One row of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellResult {
    pub dataset: String,
    pub method: String,
    pub gamma: f64,
    pub repeat: usize,
    /// Test AUCPR (binary) or accuracy (multi-class).
    pub metric: f64,
    pub r: f64,
    pub q: f64,
    pub learning_rate: f64,
    pub n_rounds: usize,
    pub flips: usize,
}

/// Tunes, refits on the whole noisy training set and scores on clean test.
pub fn run_method(
    cell: &NoisyCell,
    method: &MethodSpec,
    config: &ExperimentConfig,
    dataset: &str,
) -> Result<CellResult, ExperimentError> {
    let seeds = CellSeeds::new(config.seed, cell.gamma, cell.repeat);
    let choice = tune(&cell.train, method, config, seeds)?;
    let booster = cell_booster(
        config,
        cell.train.n_classes(),
        choice.loss,
        choice.learning_rate,
        choice.n_rounds,
        seeds,
    );
    let quiet = Record {
        train: false,
        valid_at: Some(&[]),
    };
    let model = train_recorded(&cell.train, None, &booster, quiet)?.model;
    let metric = model.evaluate(&cell.test)?;
    Ok(CellResult {
        dataset: dataset.to_string(),
        method: method.name.clone(),
        gamma: cell.gamma,
        repeat: cell.repeat,
        metric,
        r: choice.loss.r,
        q: choice.loss.q,
        learning_rate: choice.learning_rate,
        n_rounds: choice.n_rounds,
        flips: cell.flips.len(),
    })
}

/// Results of a sweep plus the per-cell audit material.
#[derive(Debug, Clone)]
pub struct SweepOutcome {
    /// Sorted by (dataset, method, γ, repeat).
    pub results: Vec<CellResult>,
    /// One per (γ, repeat), in γ-list then repeat order.
    pub cells: Vec<NoisyCell>,
}

/// Runs every (γ, repeat, method) cell of `methods` on `data`.
pub fn run_sweep(
    data: &TabularDataset,
    dataset: &str,
    config: &ExperimentConfig,
    methods: &[MethodSpec],
) -> Result<SweepOutcome, ExperimentError> {
    let mut keys = Vec::new();
    for &gamma in &config.noise_levels {
        for repeat in 0..config.repeats {
            keys.push((gamma, repeat));
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| ExperimentError::Runtime(e.to_string()))?;
    pool.install(|| {
        let cells: Vec<NoisyCell> = keys
            .par_iter()
            .map(|&(gamma, repeat)| prepare_cell(data, config, gamma, repeat))
            .collect::<Result<_, _>>()?;
        let jobs: Vec<(&NoisyCell, &MethodSpec)> =
            cells.iter().flat_map(|c| methods.iter().map(move |m| (c, m))).collect();
        let mut results: Vec<CellResult> = jobs
            .par_iter()
            .map(|(cell, method)| run_method(cell, method, config, dataset))
            .collect::<Result<_, _>>()?;
        sort_results(&mut results);
        Ok(SweepOutcome { results, cells })
    })
}

/// Canonical order: dataset, method, γ, repeat.
pub fn sort_results(results: &mut [CellResult]) {
    results.sort_by(|a, b| {
        a.dataset
            .cmp(&b.dataset)
            .then_with(|| a.method.cmp(&b.method))
            .then_with(|| a.gamma.total_cmp(&b.gamma))
            .then_with(|| a.repeat.cmp(&b.repeat))
    });
}

pub const RESULTS_HEADER: [&str; 10] = [
    "dataset",
    "method",
    "gamma",
    "repeat",
    "metric",
    "r",
    "q",
    "learning_rate",
    "n_rounds",
    "flips",
];

pub fn write_results<W: io::Write>(writer: W, results: &[CellResult]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(RESULTS_HEADER)?;
    for r in results {
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            format_float(r.gamma),
            r.repeat.to_string(),
            format_float(r.metric),
            format_float(r.r),
            format_float(r.q),
            format_float(r.learning_rate),
            r.n_rounds.to_string(),
            r.flips.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Mean and sample standard deviation of the metric per (dataset, method, γ).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub method: String,
    pub gamma: f64,
    pub mean: f64,
    pub std: f64,
    pub n: usize,
}

/// Expects `results` in canonical order.
pub fn summarize(results: &[CellResult]) -> Vec<SummaryRow> {
    let mut out: Vec<SummaryRow> = Vec::new();
    for group in results.chunk_by(|a, b| a.dataset == b.dataset && a.method == b.method && a.gamma == b.gamma) {
        let n = group.len();
        let mean = group.iter().map(|r| r.metric).sum::<f64>() / n as f64;
        let std = if n > 1 {
            (group.iter().map(|r| (r.metric - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
        } else {
            0.0
        };
        out.push(SummaryRow {
            dataset: group[0].dataset.clone(),
            method: group[0].method.clone(),
            gamma: group[0].gamma,
            mean,
            std,
            n,
        });
    }
    out
}

pub fn write_summary<W: io::Write>(writer: W, rows: &[SummaryRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["dataset", "method", "gamma", "mean_metric", "std_metric", "n"])?;
    for r in rows {
        w.write_record([
            r.dataset.clone(),
            r.method.clone(),
            format_float(r.gamma),
            format_float(r.mean),
            format_float(r.std),
            r.n.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `results.csv`, `summary.csv` and `flips/<dataset>_g<γ>_r<repeat>.csv` under `dir`.
pub fn write_outputs(dir: &Path, dataset: &str, outcome: &SweepOutcome) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir.join("flips"))?;
    write_results(std::fs::File::create(dir.join("results.csv"))?, &outcome.results)?;
    write_summary(
        std::fs::File::create(dir.join("summary.csv"))?,
        &summarize(&outcome.results),
    )?;
    for cell in &outcome.cells {
        let name = format!("{dataset}_g{}_r{}.csv", format_float(cell.gamma), cell.repeat);
        cell.flips
            .write_csv(std::fs::File::create(dir.join("flips").join(name))?)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::synthetic;

    fn small_config(extra: &str) -> ExperimentConfig {
        let text = format!(
            "noise_levels = 0, 0.2\nrepeats = 2\nmethods = rfl, cce\ngrid.r = 1\ngrid.q = 0.5\n\
             grid.learning_rate = 0.3\ngrid.n_rounds = 3, 6\nmax_depth = 2\n{extra}"
        );
        ExperimentConfig::parse(&text).unwrap()
    }

    #[test]
    fn seeds_are_stable_and_distinct() {
        let a = CellSeeds::new(7, 0.1, 0);
        assert_eq!(a, CellSeeds::new(7, 0.1, 0));
        assert_ne!(a.noise, CellSeeds::new(7, 0.2, 0).noise);
        assert_ne!(a.noise, CellSeeds::new(7, 0.1, 1).noise);
        // the split is shared across noise levels
        assert_eq!(a.split, CellSeeds::new(7, 0.3, 0).split);
        assert_ne!(a.split, CellSeeds::new(8, 0.1, 0).split);
    }

    #[test]
    fn noise_stays_in_training_rows() {
        let data = synthetic::imbalanced(400, 5.0, 3);
        let config = small_config("");
        let cell = prepare_cell(&data, &config, 0.3, 1).unwrap();
        assert!(!cell.flips.is_empty());
        for i in cell.flips.indices() {
            assert!(cell.plan.train_indices.binary_search(&i).is_ok());
        }
        // test labels are the clean ones
        let clean: Vec<usize> = cell.plan.test_indices.iter().map(|&i| data.labels[i]).collect();
        assert_eq!(cell.test.labels, clean);
    }

    #[test]
    fn sweep_cardinality_and_order() {
        let data = synthetic::imbalanced(300, 5.0, 1);
        let config = small_config("threads = 2");
        let out = run_sweep(&data, "imbalanced", &config, &config.methods).unwrap();
        assert_eq!(out.results.len(), 2 * 2 * 2);
        assert_eq!(out.results[0].method, "cce");
        assert_eq!(out.results[0].gamma, 0.0);
        assert!(out.results.iter().all(|r| (0.0..=1.0).contains(&r.metric)));
        let summary = summarize(&out.results);
        assert_eq!(summary.len(), 4);
        assert!(summary.iter().all(|s| s.n == 2));
    }

    #[test]
    fn purity_audit_detects_overlap() {
        let plan = SplitPlan {
            train_indices: vec![0, 1],
            test_indices: vec![2, 3],
            fraction_bits: 0.5f64.to_bits(),
            seed: 0,
            stratified: false,
        };
        let mut log = FlipLog::default();
        log.records.push(crate::noise::FlipRecord {
            sample_index: 3,
            old_label: 0,
            new_label: 1,
        });
        assert!(matches!(
            audit_purity(&log, &plan, 0.1, 0),
            Err(ExperimentError::Purity { index: 3, .. })
        ));
    }
}
