//! Experiment runs against the file system.

use std::fs;

use fibflow::algorithms::{train, TrainConfig, Variant};
use fibflow::diagnostics::BoundConstants;
use fibflow::harness::{
    bounds_from_trace, cell_dir, generate_data, generate_samples, load_model, read_trace, reference_base,
    reference_experiment, replicate, run_experiment, CellOutcome, DataSpec, ExperimentConfig, RunSummary,
    SUMMARY_FILE,
};
use fibflow::rkhs::evaluate;
use fibflow::spectral::StepSpec;

fn small_sinusoid(seed: u64) -> DataSpec {
    DataSpec { n: 120, ..DataSpec::reference_sinusoid(seed) }
}

fn single_method(iterations: usize) -> ExperimentConfig {
    let data = small_sinusoid(1);
    let method = TrainConfig::new(Variant::Fibonacci, reference_base(&data), StepSpec::Golden { eta0: 0.5 }, iterations)
        .with_coefficients(vec![0.5, 0.3]);
    ExperimentConfig::new(data, vec![method])
}

#[test]
fn single_cell_writes_one_of_each_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let summary = run_experiment(&single_method(10), dir.path()).unwrap();
    assert!(summary.all_ok());
    assert_eq!(summary.cells.len(), 1);
    let cell = cell_dir(dir.path(), "fibonacci", 0);
    let mut files: Vec<String> = fs::read_dir(&cell).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    files.sort();
    assert_eq!(files, ["model.json", "trace.csv"]);
    let on_disk: RunSummary = serde_json::from_str(&fs::read_to_string(dir.path().join(SUMMARY_FILE)).unwrap()).unwrap();
    assert_eq!(on_disk, summary);
    match &summary.cells[0].outcome {
        CellOutcome::Ok { trace_path, model_path, .. } => assert!(trace_path.exists() && model_path.exists()),
        CellOutcome::Failed { message } => panic!("{message}"),
    }
}

#[test]
fn five_method_reference_config_has_one_row_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_experiment(small_sinusoid(2), 15, 2);
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    assert!(summary.all_ok(), "{:?}", summary.failures().collect::<Vec<_>>());
    assert_eq!(summary.cells.len(), 5 * 2);
    assert_eq!(summary.replications.len(), 2);
}

#[test]
fn rerun_gives_byte_identical_traces() {
    let cfg = reference_experiment(small_sinusoid(3), 12, 1);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run_experiment(&cfg, a.path()).unwrap();
    run_experiment(&cfg, b.path()).unwrap();
    for m in &cfg.methods {
        let label = m.label();
        let read = |root: &std::path::Path| fs::read(cell_dir(root, &label, 0).join("trace.csv")).unwrap();
        assert_eq!(read(a.path()), read(b.path()), "{label}");
    }
}

#[test]
fn summary_rmse_and_saved_model_match_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = ExperimentConfig { replications: 2, ..single_method(20) };
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    for cell in &summary.cells {
        let CellOutcome::Ok { final_test_rmse, trace_path, model_path, .. } = &cell.outcome else {
            panic!("cell failed")
        };
        let (tr, te) = generate_data(&cfg.data_for(cell.replication)).unwrap();
        let run = train(&replicate(&cfg.methods[0], cell.replication), &tr, Some(&te)).unwrap();
        assert_eq!(final_test_rmse.to_bits(), run.trace.last().unwrap().test_rmse.to_bits());

        let trace = read_trace(fs::File::open(trace_path).unwrap()).unwrap();
        assert_eq!(trace.len(), 20);
        assert_eq!(trace.last().unwrap().test_risk.to_bits(), run.trace.last().unwrap().test_risk.to_bits());

        let model = load_model(model_path).unwrap();
        let a = evaluate(&model, te.inputs()).unwrap();
        let b = evaluate(&run.predictor, te.inputs()).unwrap();
        assert!((a - b).amax() <= 1e-12);
    }
}

#[test]
fn failing_cell_is_recorded_and_others_continue() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = single_method(5);
    let mut bad = cfg.methods[0].clone();
    bad.name = Some("blows-up".into());
    // overflows f64 within a few iterations
    bad.coefficients = Some(vec![1e200, 1e200]);
    bad.iterations = 5;
    cfg.methods.push(bad);
    let summary = run_experiment(&cfg, dir.path()).unwrap();
    assert_eq!(summary.cells.len(), 2);
    assert!(matches!(summary.cells[0].outcome, CellOutcome::Ok { .. }));
    assert!(!summary.all_ok());
    assert!(dir.path().join(SUMMARY_FILE).exists());
}

#[test]
fn noise_variance_matches_sigma() {
    let spec = DataSpec { n: 100_000, noise: 0.5, ..DataSpec::reference_sinusoid(11) };
    let data = generate_samples(&spec).unwrap();
    let residuals: Vec<f64> = (0..data.len())
        .map(|i| data.targets()[i] - spec.target.eval(data.inputs().row(i)))
        .collect();
    let mean = residuals.iter().sum::<f64>() / residuals.len() as f64;
    let var = residuals.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (residuals.len() - 1) as f64;
    assert!((var / 0.25 - 1.0).abs() < 0.03, "{var}");
}

#[test]
fn bounds_from_a_stored_trace_are_at_least_the_gap() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = single_method(25);
    run_experiment(&cfg, dir.path()).unwrap();
    let trace = read_trace(fs::File::open(cell_dir(dir.path(), "fibonacci", 0).join("trace.csv")).unwrap()).unwrap();
    let report = bounds_from_trace(&trace, &cfg.methods[0], &cfg.data, 0.05, BoundConstants::default()).unwrap();
    assert!(report.combined.is_finite());
    assert!(report.holds);
    assert_eq!(report.inputs.n, 84);
}

#[test]
fn config_file_round_trip_through_toml() {
    let cfg = reference_experiment(DataSpec::reference_friedman(4), 30, 3);
    let text = cfg.to_toml().unwrap();
    assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
}
