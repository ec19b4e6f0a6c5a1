use cellfree::experiment::{
    emit_cdf, median, run_monte_carlo, run_sweep, ExperimentSpec, SolverKind, SUMMARY_HEADER, UE_HEADER,
};

fn small_spec(n: usize, jobs: usize) -> ExperimentSpec {
    let mut spec = ExperimentSpec::preset("small-36x5").unwrap();
    spec.num_realizations = n;
    spec.solvers = vec![SolverKind::Apg, SolverKind::Heu];
    spec.parallelism = jobs;
    spec
}

fn ue_column(spec: &ExperimentSpec) -> String {
    let res = run_sweep(spec).unwrap();
    let mut buf = Vec::new();
    res.write_ue_rows(csv::Writer::from_writer(&mut buf)).unwrap();
    String::from_utf8(buf).unwrap()
}

#[test]
fn written_rows_match_dry_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = small_spec(3, 1);
    spec.output_dir = dir.path().to_path_buf();
    let counts = spec.dry_run();
    run_monte_carlo(&spec).unwrap();

    let mut ue = csv::Reader::from_path(dir.path().join("ue_se.csv")).unwrap();
    assert_eq!(ue.headers().unwrap(), UE_HEADER.as_slice());
    assert_eq!(ue.records().count(), counts.ue_rows);

    let mut summary = csv::Reader::from_path(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.headers().unwrap(), SUMMARY_HEADER.as_slice());
    assert_eq!(summary.records().count(), counts.summary_rows);

    let saved = ExperimentSpec::load(&dir.path().join("spec.json")).unwrap();
    assert_eq!(saved, spec);
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let sequential = ue_column(&small_spec(4, 1));
    assert_eq!(sequential, ue_column(&small_spec(4, 1)));
    assert_eq!(sequential, ue_column(&small_spec(4, 3)));
}

#[test]
fn records_sorted_and_complete() {
    let res = run_sweep(&small_spec(3, 2)).unwrap();
    let keys: Vec<_> = res.records.iter().map(|r| (r.realization, r.solver)).collect();
    let mut sorted = keys.clone();
    sorted.sort();
    assert_eq!(keys, sorted);
    assert_eq!(keys.len(), 6);
    assert!(res.records.iter().all(|r| r.outcome.is_ok()));
}

#[test]
fn summary_median_matches_cdf() {
    let res = run_sweep(&small_spec(5, 1)).unwrap();
    for s in res.summaries() {
        let values = res.sum_se(s.solver);
        let cdf = emit_cdf(&values, 0).unwrap();
        assert_eq!(cdf.len(), 5);
        assert_eq!(Some(s.median_sum_se), median(&values));
    }
}

#[test]
fn preset_overrides_merge_into_network() {
    let spec = ExperimentSpec::from_json(
        r#"{"preset": "large-150x40", "num_realizations": 2, "network": {"rng_seed": 9}}"#,
    )
    .unwrap();
    assert_eq!(spec.network.num_aps, 150);
    assert_eq!(spec.network.max_served, 15);
    assert_eq!(spec.network.rng_seed, 9);
    assert_eq!(spec.num_realizations, 2);
    assert!(ExperimentSpec::from_json(r#"{"preset": "large-150x40", "parallelism": 0}"#).is_err());
}
