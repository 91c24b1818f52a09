use cayley_sieve::harness::{
    emit_results, rows_from_csv, rows_from_json, rows_to_csv, run_alon_roichman, run_sieve_experiment,
    AlonRoichmanConfig, BRule, ExperimentConfig, OutputFormat, COLUMNS,
};
use cayley_sieve::instances::{InstanceMode, InstanceSpec, Partition};

fn two_blocks() -> InstanceSpec {
    InstanceSpec::Coloring {
        r: 2,
        c: 3,
        partition: Partition::Triples,
        mode: InstanceMode::Permissive,
        zero_is_color: true,
    }
}

fn base_config(seed: u64, k_grid: Vec<u64>, trials: u64) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::new(two_blocks(), 0.5, seed, k_grid, trials);
    cfg.b_rule = BRule::Explicit { values: vec![1.0, 2.0] };
    cfg
}

#[test]
fn random_cube_graphs_expand_at_the_prescribed_rate() {
    let cfg = AlonRoichmanConfig {
        moduli: vec![3, 3, 3],
        b: 2.0,
        delta: 0.5,
        trials: 2000,
        seed: 11,
        kappa_override: None,
    };
    let rep = run_alon_roichman(&cfg).unwrap();
    assert_eq!(rep.kappa, 46);
    assert_eq!(rep.order, 27);
    assert!(rep.failure_fraction <= (-2f64).exp());
    assert!(rep.p_value > 0.99, "p = {}", rep.p_value);
    assert!(rep.strict_failures >= rep.failures);
}

#[test]
fn single_generator_never_expands() {
    let cfg = AlonRoichmanConfig {
        moduli: vec![3, 3, 3],
        b: 2.0,
        delta: 0.5,
        trials: 500,
        seed: 1,
        kappa_override: Some(1),
    };
    let rep = run_alon_roichman(&cfg).unwrap();
    assert_eq!(rep.failures, 500);
    assert!(rep.p_value < 1e-12);
}

#[test]
fn zero_start_has_no_survivors_at_time_zero() {
    let out = run_sieve_experiment(&base_config(3, vec![0, 3], 2000)).unwrap();
    assert_eq!(out.rows[0].freq, 0.0);
    assert_eq!(out.rows[0].instance_freq, 0.0);
    assert!(out.rows[0].exact.unwrap().abs() < 1e-12);
}

#[test]
fn runs_are_reproducible_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let mut payloads = Vec::new();
    for (threads, name) in [(1, "a.csv"), (4, "b.csv"), (4, "c.json"), (2, "d.json")] {
        let mut cfg = base_config(42, vec![1, 4, 16], 5000);
        cfg.threads = Some(threads);
        cfg.output = Some(dir.path().join("nested").join(name));
        run_sieve_experiment(&cfg).unwrap();
        payloads.push(std::fs::read(cfg.output.unwrap()).unwrap());
    }
    assert_eq!(payloads[0], payloads[1]);
    assert_eq!(payloads[2], payloads[3]);
    let csv_rows = rows_from_csv(std::str::from_utf8(&payloads[0]).unwrap()).unwrap();
    let json_rows = rows_from_json(std::str::from_utf8(&payloads[2]).unwrap()).unwrap();
    assert_eq!(csv_rows, json_rows);
    assert_eq!(csv_rows.len(), 3);
}

#[test]
fn config_survives_serialization() {
    let cfg = base_config(5, vec![2, 8], 1000);
    let text = serde_json::to_string(&cfg).unwrap();
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
    assert_eq!(run_sieve_experiment(&back).unwrap().rows, run_sieve_experiment(&cfg).unwrap().rows);
}

#[test]
fn empty_results_write_only_the_header() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("empty.csv");
    emit_results(&[], OutputFormat::Csv, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.trim_end(), COLUMNS.join(","));
    let mut buf = Vec::new();
    rows_to_csv(&[], &mut buf).unwrap();
    assert_eq!(buf, text.as_bytes());
    assert!(COLUMNS.starts_with(&[
        "k", "trials", "freq", "ci_lo", "ci_hi", "exact", "bound_proof", "bound_stated", "vacuous", "window_ok"
    ]));
}

#[test]
fn output_errors_name_the_path() {
    let dir = tempfile::tempdir().unwrap();
    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("out.csv");
    let err = emit_results(&[], OutputFormat::Csv, &target).unwrap_err();
    assert!(err.to_string().contains("file"), "{err}");
}

#[test]
fn survival_decays_from_a_clean_start_toward_stationarity() {
    let ks = vec![0, 1, 2, 4, 8, 16, 32, 64, 128, 512];
    let trials = 20_000;
    let mut cfg = base_config(2026, ks.clone(), trials);
    cfg.start = Some("c=3; e1-2:1,e1-3:2,e4-5:1,e4-6:2".into());
    let rows = run_sieve_experiment(&cfg).unwrap().rows;
    assert_eq!(rows[0].freq, 1.0);
    let sigma = |p: f64| (p * (1.0 - p) / trials as f64).sqrt();
    for w in rows.windows(2) {
        let slack = 3.0 * sigma(w[0].freq).max(sigma(w[1].freq));
        assert!(w[1].freq <= w[0].freq + slack, "k {} -> {}: {} > {}", w[0].k, w[1].k, w[1].freq, w[0].freq);
    }
    for row in &rows {
        assert!((0.0..=1.0).contains(&row.freq));
        assert!(row.instance_freq <= row.freq + 3.0 * sigma(row.freq).max(1.0 / trials as f64));
        let exact = row.exact.unwrap();
        assert!(row.ci_lo <= exact && exact <= row.ci_hi, "k {}: {exact} not in [{}, {}]", row.k, row.ci_lo, row.ci_hi);
    }
    let stationary = (8.0f64 / 9.0).powi(2);
    let last = rows.last().unwrap();
    assert!((last.exact.unwrap() - stationary).abs() < 1e-6);
    assert!(last.ci_lo <= stationary && stationary <= last.ci_hi);
}

#[test]
fn bounds_are_reported_for_both_modes() {
    let rows = run_sieve_experiment(&base_config(9, vec![1, 100], 500)).unwrap().rows;
    for row in rows {
        let proof = row.bound_proof.unwrap();
        assert!(row.window_ok);
        assert!(row.vacuous == (proof >= 1.0));
        assert!(row.bound_stated.is_some());
    }
}
