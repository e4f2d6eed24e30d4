use stabilize_core::experiments::{
    default_truth, fig_spec, read_csv, render_svg, run_sweep, write_csv, GridPoint, Metric, Param, SweepSpec, CSV_HEADER,
};
use stabilize_core::rng::substream;
use stabilize_core::stabilizer::{run_algorithm1, FailureReason};

fn small_spec() -> SweepSpec {
    SweepSpec {
        name: "small".into(),
        swept: Param::Tau,
        panel: None,
        points: vec![GridPoint::new(1.0, 1.0, 1.0, 1, 1.0), GridPoint::new(3.0, 1.0, 1.0, 2, 1.0)],
        replicates: 8,
        base_seed: 99,
        truth: default_truth(),
    }
}

#[test]
fn csv_round_trips() {
    let results = run_sweep(&small_spec(), 2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.csv");
    write_csv(&results, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    let rows = read_csv(&path).unwrap();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1].n, 2);
    assert_eq!(rows[1].success_rate, results[1].success_rate);
    assert_eq!(rows[0].seed, 99);
}

#[test]
fn counts_add_up() {
    for r in run_sweep(&small_spec(), 1).unwrap() {
        assert_eq!(r.n_success + r.n_care_failed + r.n_overflow + r.n_unstable, r.replicates);
        assert!((r.success_rate - r.n_success as f64 / r.replicates as f64).abs() < 1e-15);
    }
}

#[test]
fn results_ignore_thread_count() {
    let spec = small_spec();
    let a = run_sweep(&spec, 1).unwrap();
    let b = run_sweep(&spec, 4).unwrap();
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.success_rate, y.success_rate);
        assert_eq!(x.error.median.to_bits(), y.error.median.to_bits());
    }
}

#[test]
fn canned_sweeps_validate_and_plot() {
    for fig in 1..=4 {
        let spec = fig_spec(fig).unwrap().with_replicates(1);
        spec.validate().unwrap();
    }
    assert!(fig_spec(5).is_err());
    let results = run_sweep(&small_spec(), 1).unwrap();
    let svg = render_svg(&results, Metric::SuccessRate).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn short_exploration_with_no_data_still_reports() {
    let truth = default_truth();
    let mut cfg = stabilize_core::stabilizer::StabilizationConfig::new(3, 2);
    cfg.tau = 0.0;
    let out = run_algorithm1(&truth, &cfg, &mut substream(0, 0, 0)).unwrap();
    assert!(out.sample.is_some());
    assert_ne!(out.failure_reason, FailureReason::Overflow);
}
