use langevin_cli::{run_task, ExperimentConfig, Task};

fn sweep(methods: &[&str]) -> ExperimentConfig {
    let mut cfg = ExperimentConfig {
        timing: false,
        ..Default::default()
    };
    cfg.model.n_r = 8;
    cfg.model.n_u = 2;
    cfg.model.rho = 0.0;
    cfg.model.channel = "iid-rayleigh".into();
    cfg.sweep.methods = methods.iter().map(|m| m.to_string()).collect();
    cfg
}

#[test]
fn linear_detector_is_nearly_error_free_at_high_snr() {
    let mut cfg = sweep(&["mmse"]);
    cfg.sweep.snr_db = vec![40.0];
    cfg.sweep.n_channels = 50;
    cfg.sweep.symbols_per_channel = 100;
    let rows = run_task(&cfg).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].n_symbols, 10_000);
    assert!(rows[0].ser_or_nmse <= 1e-3, "{:?}", rows[0]);
}

#[test]
fn zero_symbols_give_no_rows() {
    let mut cfg = sweep(&["langevin", "mmse"]);
    cfg.sweep.symbols_per_channel = 0;
    assert!(run_task(&cfg).unwrap().is_empty());
}

#[test]
fn repeated_runs_agree() {
    let mut cfg = sweep(&["langevin", "mmse", "vblast", "ml"]);
    cfg.sweep.snr_db = vec![8.0, 14.0];
    cfg.sweep.n_channels = 3;
    cfg.sweep.symbols_per_channel = 4;
    let a = run_task(&cfg).unwrap();
    let b = run_task(&cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.len(), 8);
    for r in &a {
        assert!(r.errors <= r.n_symbols);
        assert!(r.ser_or_nmse.is_finite());
        assert_eq!(r.wall_ns_per_symbol, 0.0);
    }
    cfg.seed = 1;
    assert_ne!(run_task(&cfg).unwrap(), a);
}

#[test]
fn oracle_beyond_its_limit_is_a_config_error() {
    let mut cfg = sweep(&["ml"]);
    cfg.model.n_u = 6;
    cfg.sweep.ml_max_candidates = 1000;
    let err = run_task(&cfg).unwrap_err();
    assert_eq!(err.exit_code(), 2, "{err}");
}

#[test]
fn verification_tasks_report_passing_rows() {
    let mut cfg = ExperimentConfig {
        timing: false,
        task: Task::FdtTest,
        ..Default::default()
    };
    cfg.sampler.tau = 1.0;
    let rows = run_task(&cfg).unwrap();
    assert_eq!(rows.len(), 2 + 2 * 4);
    assert!(rows.iter().all(|r| r.errors == 0), "{rows:?}");

    cfg.task = Task::StationaryTest;
    cfg.stationary.n_samples = 400_000;
    cfg.stationary.eps = 0.05;
    let rows = run_task(&cfg).unwrap();
    assert_eq!(rows.len(), 2 + 3);
    // Short run: the third-order chain mixes slowly, so only a coarse bound here.
    assert!(rows.iter().all(|r| r.ser_or_nmse < 0.15), "{rows:?}");

    let mut toy = ExperimentConfig::default();
    toy.apply_preset("channel-toy").unwrap();
    toy.timing = false;
    toy.toy.trials = 4;
    let rows = run_task(&toy).unwrap();
    assert_eq!(rows.len(), 2);
    assert!(
        (rows[0].ser_or_nmse - rows[1].ser_or_nmse).abs() < 1.0,
        "{rows:?}"
    );
}
