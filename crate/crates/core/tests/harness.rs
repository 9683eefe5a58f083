use fris_im::codebook::SelectionMethod;
use fris_im::geometry::GranularityMode;
use fris_im::harness::{self, emit_table, ExperimentConfig, ResultTable, BER_COLUMNS, THROUGHPUT_COLUMNS};
use fris_im::Error;

fn small() -> ExperimentConfig {
    ExperimentConfig::parse(
        "
        grid.rows = 4
        grid.cols = 4
        geometry.modes = element, group:2x2
        geometry.n_act = 4
        candidates.m_samples = 40
        codebook.methods = response_maxmin_greedy, random, layout_maxmin
        codebook.k = 4
        detection.snr_db = 0:5:10
        detection.trials = 500
        run.seeds = 1..3
        ",
    )
    .unwrap()
}

#[test]
fn zero_trials_gives_empty_tables_with_schema() {
    let cfg = ExperimentConfig { trials: 0, ..small() };
    let out = harness::run_pipeline(&cfg).unwrap();
    assert!(out.ber.rows.is_empty() && out.throughput.rows.is_empty());
    assert_eq!(out.ber.columns, BER_COLUMNS);
    assert_eq!(out.throughput.columns, THROUGHPUT_COLUMNS);
    assert_eq!(out.ber.meta("config_hash"), Some(cfg.hash().as_str()));
}

#[test]
fn rows_follow_mode_method_snr_order() {
    let cfg = small();
    let out = harness::run_pipeline(&cfg).unwrap();
    assert!(out.failures.is_empty());
    assert_eq!(out.ber.rows.len(), 2 * 3 * 3);
    assert_eq!(out.ber_per_seed.rows.len(), 2 * 3 * 3 * 3);
    assert_eq!(out.throughput.rows.len(), 2);
    let mode = out.ber.column("mode").unwrap();
    assert_eq!(out.ber.rows[0][mode].as_str(), Some("element"));
    assert_eq!(out.ber.rows[17][mode].as_str(), Some("group:2x2"));
}

#[test]
fn identical_configs_give_identical_bytes() {
    let a = harness::run_pipeline(&small()).unwrap();
    let b = harness::run_pipeline(&small()).unwrap();
    for (x, y) in a.tables().iter().zip(b.tables()) {
        assert_eq!(x.to_csv(), y.to_csv());
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let three = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let a = one.install(|| harness::run_pipeline(&small()).unwrap());
    let b = three.install(|| harness::run_pipeline(&small()).unwrap());
    assert_eq!(a.ber.to_csv(), b.ber.to_csv());
    assert_eq!(a.throughput.to_csv(), b.throughput.to_csv());
}

#[test]
fn failed_combination_goes_to_manifest() {
    // all 16 elements active leaves a single candidate, too few for a codebook
    let cfg = ExperimentConfig {
        n_act: 16,
        methods: vec![SelectionMethod::ResponseMaxminGreedy],
        modes: vec![GranularityMode::Element],
        ..small()
    };
    let out = harness::run_pipeline(&cfg).unwrap();
    assert!(out.ber.rows.is_empty());
    assert_eq!(out.errors.rows.len(), out.failures.len());
    let f = &out.failures[0];
    assert_eq!(f.stage, "codebook");
    assert!(f.params.contains("mode=element") && f.params.contains("seed=1"), "{}", f.params);
    assert_eq!(harness::exit_code(&f.error), 2);
    let back = ResultTable::from_csv(&out.errors.to_csv()).unwrap();
    assert_eq!(back.rows.len(), out.failures.len());
}

#[test]
fn invalid_config_reports_every_violation() {
    let cfg = ExperimentConfig { k: 1, seeds: vec![], n_act: 0, ..small() };
    match harness::run_pipeline(&cfg) {
        Err(Error::Config(v)) => assert!(v.len() >= 3, "{v:?}"),
        other => panic!("{other:?}"),
    }
}

#[test]
fn unsatisfiable_spacing_is_infeasible() {
    let cfg = ExperimentConfig { min_unit_spacing: Some(10.0), ..small() };
    let err = harness::run_pipeline(&cfg).unwrap_err();
    assert!(matches!(err, Error::Infeasible { .. }));
    assert_eq!(harness::exit_code(&err), 3);
}

#[test]
fn scenario_configs_have_documented_shape() {
    let a = harness::scenario_a_config();
    assert_eq!(a.snr_db.len(), 11);
    assert_eq!(a.methods.len(), 4);
    assert!(a.seeds.len() >= 200);
    a.validate().unwrap();
    let b = harness::scenario_b_config();
    assert_eq!(b.modes.len(), 3);
    b.validate().unwrap();
}

#[test]
fn scenario_b_table_has_three_rows() {
    let dir = tempfile::tempdir().unwrap();
    let t = harness::reproduce_scenario_b(dir.path()).unwrap();
    assert_eq!(t.rows.len(), 3);
    let text = std::fs::read_to_string(dir.path().join("scenario_b.csv")).unwrap();
    assert_eq!(ResultTable::from_csv(&text).unwrap(), t);
}

#[test]
fn design_writes_codebooks() {
    let dir = tempfile::tempdir().unwrap();
    let (t, failures) = harness::design(&small(), dir.path()).unwrap();
    assert!(failures.is_empty());
    assert_eq!(t.rows.len(), 6);
    assert!(dir.path().join("codebook_group-2x2_random.txt").exists());
    let written = std::fs::read_to_string(dir.path().join("design.csv")).unwrap();
    assert_eq!(written, t.to_csv());
    emit_table(&t, &dir.path().join("again.csv")).unwrap();
}

#[test]
fn hash_ignores_key_order_and_output_dir() {
    let a = ExperimentConfig::parse("codebook.k = 6\nrun.seeds = 1..4\noutput.dir = x").unwrap();
    let b = ExperimentConfig::parse("output.dir = y\nrun.seeds = 1, 2, 3, 4\ncodebook.k = 6").unwrap();
    assert_eq!(a.hash(), b.hash());
}
