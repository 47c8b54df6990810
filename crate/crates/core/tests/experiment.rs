use robust_gbdt::experiment::{
    ablation_methods, build_report, run_sweep, synthetic, write_outputs, ExperimentConfig, MethodSpec, Settings,
};
use robust_gbdt::loss::LossSpec;

fn config(text: &str) -> ExperimentConfig {
    ExperimentConfig::from_settings(&Settings::parse(text).unwrap()).unwrap()
}

const QUICK: &str = "
noise_levels = 0, 0.2
repeats = 2
grid.learning_rate = 0.3
grid.n_rounds = 5, 10
max_depth = 3
max_leaves = 6
seed = 17
";

#[test]
fn no_focus_variant_replays_a_direct_gce_run() {
    let data = synthetic::imbalanced(400, 5.0, 2);
    let cfg = config(QUICK);
    let ablation = run_sweep(&data, "imb", &cfg, &ablation_methods(&cfg.booster.loss, &cfg.grid)).unwrap();
    let gce = MethodSpec::tuned("gce", LossSpec::gce(0.5), &cfg.grid);
    let direct = run_sweep(&data, "imb", &cfg, &[gce]).unwrap();
    let r0: Vec<_> = ablation.results.iter().filter(|r| r.method == "rfl_r0").collect();
    assert_eq!(r0.len(), direct.results.len());
    for (a, b) in r0.iter().zip(&direct.results) {
        assert_eq!((a.gamma, a.repeat), (b.gamma, b.repeat));
        assert_eq!(a.metric.to_bits(), b.metric.to_bits());
        assert_eq!((a.q, a.learning_rate, a.n_rounds), (b.q, b.learning_rate, b.n_rounds));
    }
}

#[test]
fn ablation_has_three_variants_per_cell() {
    let data = synthetic::imbalanced(300, 4.0, 3);
    let cfg = config(QUICK);
    let out = run_sweep(&data, "imb", &cfg, &ablation_methods(&cfg.booster.loss, &cfg.grid)).unwrap();
    assert_eq!(out.results.len(), 3 * 2 * 2);
    let mut names: Vec<&str> = out.results.iter().map(|r| r.method.as_str()).collect();
    names.dedup();
    assert_eq!(names, ["rfl", "rfl_q0", "rfl_r0"]);
}

#[test]
fn separable_data_is_learned_by_every_variant() {
    let data = synthetic::separable(200, 0);
    let cfg = config("noise_levels = 0\nrepeats = 2\ngrid.n_rounds = 100\nseed = 1");
    let out = run_sweep(
        &data,
        "separable",
        &cfg,
        &ablation_methods(&cfg.booster.loss, &cfg.grid),
    )
    .unwrap();
    for r in &out.results {
        assert!(r.metric >= 0.99, "{} repeat {}: {}", r.method, r.repeat, r.metric);
    }
}

#[test]
fn default_protocol_cardinality() {
    let data = synthetic::imbalanced(2000, 20.0, 0);
    let cfg = config("grid.learning_rate = 0.1\ngrid.n_rounds = 2, 3");
    assert_eq!(cfg.noise_levels, [0.0, 0.1, 0.2, 0.3, 0.4]);
    assert_eq!(cfg.repeats, 5);
    let out = run_sweep(&data, "imbalanced", &cfg, &cfg.methods).unwrap();
    assert_eq!(out.results.len(), 5 * 5 * cfg.methods.len());
    let report = build_report(&out.results).unwrap();
    assert_eq!(report.units.len(), 5);
}

#[test]
fn sweeps_are_reproducible_and_thread_independent() {
    let data = synthetic::blobs(240, 3, 5);
    let base = format!("{QUICK}\nmethods = cce, rfl, gce\nthreads = 1");
    let one = config(&base);
    let many = config(&base.replace("threads = 1", "threads = 3"));
    let a = run_sweep(&data, "blobs", &one, &one.methods).unwrap();
    let b = run_sweep(&data, "blobs", &many, &many.methods).unwrap();
    assert_eq!(a.results, b.results);
    let (da, db) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    write_outputs(da.path(), "blobs", &a).unwrap();
    write_outputs(db.path(), "blobs", &b).unwrap();
    for name in ["results.csv", "summary.csv", "flips/blobs_g0.2_r1.csv"] {
        assert_eq!(
            std::fs::read(da.path().join(name)).unwrap(),
            std::fs::read(db.path().join(name)).unwrap(),
            "{name}"
        );
    }
    let other = config(&base.replace("seed = 17", "seed = 18"));
    assert_ne!(
        run_sweep(&data, "blobs", &other, &other.methods).unwrap().results,
        a.results
    );
}

#[test]
fn noise_never_reaches_test_rows() {
    let data = synthetic::imbalanced(600, 8.0, 6);
    let cfg = config(&format!(
        "{}\nnoise_levels = 0.1, 0.3, 0.45\nmethods = cce",
        QUICK.replace("noise_levels = 0, 0.2", "")
    ));
    let out = run_sweep(&data, "imb", &cfg, &cfg.methods).unwrap();
    for cell in &out.cells {
        assert!(cell
            .flips
            .indices()
            .all(|i| cell.plan.test_indices.binary_search(&i).is_err()));
        assert_eq!(cell.test.labels, data.subset(&cell.plan.test_indices).unwrap().labels);
        if cell.gamma > 0.0 {
            assert!(!cell.flips.is_empty());
        }
    }
}
