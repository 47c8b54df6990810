//! `rgbdt`: train, predict, corrupt labels, sweep noise levels, run the
//! ablation and build rank reports.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error.

use std::fs::{self, File};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use robust_gbdt::booster::{self, BoosterModel};
use robust_gbdt::dataset::{format_float, train_test_split, TabularDataset};
use robust_gbdt::experiment::{
    ablation_methods, build_report, derive_seed, load_dataset, read_results, run_sweep, sweep, write_outputs,
    write_report, ConfigError, DatasetSource, ExperimentConfig, ExperimentError, Settings,
};
use robust_gbdt::noise::{inject, NoiseSpec};

#[derive(Parser, Debug)]
#[command(
    name = "rgbdt",
    version,
    about = "Gradient-boosted trees with robust losses under label noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides `out`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Master seed (overrides `seed`).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Extra `key=value` setting, applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit one model; writes model.json and train_log.csv.
    Train,
    /// Score a dataset with a saved model; writes predictions.csv.
    Predict {
        /// Model file (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        /// CSV path or `synthetic:<name>` (default: the configured dataset).
        #[arg(long)]
        data: Option<String>,
    },
    /// Corrupt the dataset's labels at `noise_rate`; writes noisy.csv and flips.csv.
    Inject {
        /// Noise rate (overrides `noise_rate`).
        #[arg(long)]
        rate: Option<f64>,
    },
    /// Noise-level sweep over the configured methods.
    Sweep,
    /// Full RFL against its r = 0 and q -> 0 reductions.
    Ablate,
    /// Rank tables from results files (default: <out>/results.csv).
    Report { results: Vec<PathBuf> },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            let code = err
                .chain()
                .find_map(|e| e.downcast_ref::<ExperimentError>().map(ExperimentError::exit_code))
                .or_else(|| err.chain().find_map(|e| e.downcast_ref::<ConfigError>().map(|_| 2)))
                .unwrap_or(1);
            ExitCode::from(code as u8)
        }
    }
}

fn load_config(common: &Common, extra: &[(&str, String)]) -> Result<ExperimentConfig, ConfigError> {
    let mut settings = match &common.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    for item in &common.set {
        let (k, v) = item.split_once('=').ok_or_else(|| ConfigError::Syntax {
            line: 0,
            text: item.clone(),
        })?;
        settings.set(k, v);
    }
    if let Some(out) = &common.out {
        settings.set("out", &out.to_string_lossy());
    }
    if let Some(seed) = common.seed {
        settings.set("seed", &seed.to_string());
    }
    if let Some(threads) = common.threads {
        settings.set("threads", &threads.to_string());
    }
    for (k, v) in extra {
        settings.set(k, v);
    }
    ExperimentConfig::from_settings(&settings)
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Train => cmd_train(&load_config(&cli.common, &[])?),
        Command::Predict { model, data } => {
            let extra: Vec<(&str, String)> = data.into_iter().map(|d| ("dataset", d)).collect();
            let config = load_config(&cli.common, &extra)?;
            let model = model.unwrap_or_else(|| config.out_dir.join("model.json"));
            cmd_predict(&config, &model)
        }
        Command::Inject { rate } => {
            let extra: Vec<(&str, String)> = rate.into_iter().map(|r| ("noise_rate", r.to_string())).collect();
            cmd_inject(&load_config(&cli.common, &extra)?)
        }
        Command::Sweep => cmd_sweep(&load_config(&cli.common, &[])?),
        Command::Ablate => cmd_ablate(&load_config(&cli.common, &[])?),
        Command::Report { results } => {
            let config = load_config(&cli.common, &[])?;
            let inputs = if results.is_empty() {
                vec![config.out_dir.join("results.csv")]
            } else {
                results
            };
            cmd_report(&config, &inputs)
        }
    }
}

fn dataset(config: &ExperimentConfig) -> Result<TabularDataset> {
    load_dataset(&config.dataset).with_context(|| format!("loading dataset {}", describe(&config.dataset)))
}

fn describe(source: &DatasetSource) -> String {
    match source {
        DatasetSource::Csv { path, .. } => path.display().to_string(),
        DatasetSource::Synthetic { name, seed } => format!("synthetic:{name} (seed {seed})"),
    }
}

fn create_out(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn cmd_train(config: &ExperimentConfig) -> Result<()> {
    let data = dataset(config)?;
    let booster_config = booster::BoosterConfig {
        n_classes: data.n_classes(),
        ..config.booster
    };
    let (fit_set, valid_set) = match config.valid_fraction {
        Some(fraction) => {
            let plan = train_test_split(
                &data.labels,
                data.n_classes(),
                fraction,
                derive_seed(config.seed, &[0x76_616c_6964]),
                config.stratified,
                &data.class_names,
            )?;
            (
                data.subset(&plan.train_indices)?,
                Some(data.subset(&plan.test_indices)?),
            )
        }
        None => (data, None),
    };
    let run = booster::train(&fit_set, valid_set.as_ref(), &booster_config)?;
    create_out(&config.out_dir)?;
    let model_path = config.out_dir.join("model.json");
    run.model.save(&model_path)?;
    let mut w = csv::Writer::from_writer(File::create(config.out_dir.join("train_log.csv"))?);
    w.write_record(["round", "train_loss", "train_metric", "valid_metric"])?;
    for row in &run.log {
        w.write_record([
            row.round.to_string(),
            format_float(row.train_loss),
            format_float(row.train_metric),
            row.valid_metric.map(format_float).unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    let last = run.log.last().context("empty training log")?;
    println!(
        "trained {} rounds ({}) on {} samples; final train metric {}",
        run.model.n_rounds(),
        booster_config.loss,
        fit_set.n_samples(),
        format_float(last.train_metric)
    );
    if let Some(best) = run.best_round {
        println!("best validation round {best}");
    }
    println!("model written to {}", model_path.display());
    Ok(())
}

fn cmd_predict(config: &ExperimentConfig, model_path: &Path) -> Result<()> {
    let model = BoosterModel::load(model_path).with_context(|| format!("loading {}", model_path.display()))?;
    let data = dataset(config)?;
    let proba = model.predict_proba(&data.features)?;
    let labels = model.predict_labels(&data.features)?;
    create_out(&config.out_dir)?;
    let mut w = csv::Writer::from_writer(File::create(config.out_dir.join("predictions.csv"))?);
    let mut header = vec!["row".to_string(), "predicted".to_string()];
    header.extend((0..model.n_classes).map(|k| format!("p{k}")));
    w.write_record(&header)?;
    for (i, (p, l)) in proba.iter().zip(&labels).enumerate() {
        let mut row = vec![i.to_string(), l.to_string()];
        row.extend(p.iter().map(|v| format_float(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    let metric = model.evaluate(&data)?;
    fs::write(
        config.out_dir.join("predict_metric.txt"),
        format!("{}\n", format_float(metric)),
    )?;
    println!("metric {}", format_float(metric));
    Ok(())
}

fn cmd_inject(config: &ExperimentConfig) -> Result<()> {
    let data = dataset(config)?;
    let spec = NoiseSpec::for_classes(data.n_classes(), config.noise_rate, config.seed, config.wrap_last_class);
    let (noisy, flips) = inject(&data.labels, data.n_classes(), &spec)?;
    create_out(&config.out_dir)?;
    let label_column = match &config.dataset {
        DatasetSource::Csv { schema, .. } => schema.label_column.clone(),
        DatasetSource::Synthetic { .. } => "label".to_string(),
    };
    data.with_labels(noisy)?
        .save_csv(config.out_dir.join("noisy.csv"), &label_column)?;
    flips.write_csv(File::create(config.out_dir.join("flips.csv"))?)?;
    println!(
        "flipped {} of {} labels at rate {}",
        flips.len(),
        data.n_samples(),
        format_float(config.noise_rate)
    );
    Ok(())
}

fn cmd_sweep(config: &ExperimentConfig) -> Result<()> {
    let data = dataset(config)?;
    let name = config.dataset.name();
    let outcome = run_sweep(&data, &name, config, &config.methods)?;
    write_outputs(&config.out_dir, &name, &outcome)?;
    let report = build_report(&outcome.results)?;
    write_report(&config.out_dir, &report)?;
    println!(
        "{} results for {} methods written to {}",
        outcome.results.len(),
        config.methods.len(),
        config.out_dir.display()
    );
    Ok(())
}

fn cmd_ablate(config: &ExperimentConfig) -> Result<()> {
    let data = dataset(config)?;
    let name = config.dataset.name();
    let methods = ablation_methods(&config.booster.loss, &config.grid);
    let outcome = run_sweep(&data, &name, config, &methods)?;
    write_outputs(&config.out_dir, &name, &outcome)?;
    fs::rename(config.out_dir.join("results.csv"), config.out_dir.join("ablation.csv"))?;
    for row in sweep::summarize(&outcome.results) {
        println!("{:<7} gamma={:<4} mean={:.4}", row.method, row.gamma, row.mean);
    }
    Ok(())
}

fn cmd_report(config: &ExperimentConfig, inputs: &[PathBuf]) -> Result<()> {
    let mut results = Vec::new();
    for path in inputs {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        results.extend(read_results(file)?);
    }
    let report = build_report(&results)?;
    write_report(&config.out_dir, &report)?;
    println!("{:<8} {:>12}", "method", "average rank");
    for (m, rank) in report.methods.iter().zip(&report.table.average_rank) {
        println!("{m:<8} {rank:>12.3}");
    }
    Ok(())
}
