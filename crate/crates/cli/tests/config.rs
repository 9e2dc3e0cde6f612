use langevin_cli::config::{preset_names, CHANNEL_TOY_PRESET};
use langevin_cli::{run_table1_preset, CliError, ExperimentConfig, Task};

fn tuple(cfg: &ExperimentConfig) -> (f64, f64, f64, usize, f64) {
    let s = &cfg.sampler;
    (s.sigma1, s.sigma_last, s.eps0, s.t_inner, s.tau)
}

#[test]
fn table_presets_carry_their_hyperparameters() {
    assert_eq!(
        tuple(&run_table1_preset("overdamped", 10).unwrap()),
        (1.0, 0.01, 3e-5, 70, 0.5)
    );
    assert_eq!(
        tuple(&run_table1_preset("underdamped", 5).unwrap()),
        (0.4, 0.02, 6e-4, 30, 0.01)
    );
    assert_eq!(
        tuple(&run_table1_preset("third", 20).unwrap()),
        (1.0, 0.01, 5e-5, 70, 0.084)
    );
    assert_eq!(
        tuple(&run_table1_preset("third", 5).unwrap()),
        (0.4, 0.02, 2.2e-4, 30, 0.023)
    );
    let cfg = run_table1_preset("third", 5).unwrap();
    assert_eq!(cfg.sampler.order, 3);
    assert_eq!(cfg.sampler.levels, 5);
    assert_eq!(cfg.sampler.trajectories, 20);
    assert!(matches!(
        run_table1_preset("third", 7),
        Err(CliError::Core(_))
    ));
    assert!(run_table1_preset("fourth", 5).is_err());
}

#[test]
fn every_listed_preset_applies() {
    let names = preset_names();
    assert_eq!(names.len(), 10);
    for name in names {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_preset(&name).unwrap();
        cfg.validate().unwrap();
    }
    let mut cfg = ExperimentConfig::default();
    cfg.apply_preset(CHANNEL_TOY_PRESET).unwrap();
    assert_eq!(cfg.task, Task::ChannelToy);
    assert_eq!(cfg.toy.alpha_p, 0.6);
    let err = cfg.apply_preset("third-L6").unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn toml_round_trip_and_partial_files() {
    let cfg = run_table1_preset("underdamped", 10).unwrap();
    let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
    assert_eq!(back, cfg);

    let partial =
        ExperimentConfig::from_toml_str("task = \"channel-toy\"\nseed = 9\n[toy]\nalpha_p = 1.0\n")
            .unwrap();
    assert_eq!(partial.task, Task::ChannelToy);
    assert_eq!(partial.seed, 9);
    assert_eq!(partial.toy.alpha_p, 1.0);
    assert_eq!(partial.toy.trials, ExperimentConfig::default().toy.trials);
}

#[test]
fn invalid_configs_are_rejected_as_config_errors() {
    let cases = [
        "[sampler]\norder = 4\n",
        "[sampler]\nscheme = \"BAOAB\"\norder = 3\n",
        "[sampler]\nmass_mode = \"heavy\"\n",
        "[sampler]\ntrajectories = 0\n",
        "[model]\nconstellation = \"QAM8\"\n",
        "[model]\nrho = 1.5\n",
        "[sweep]\nsnr_db = []\n",
        "[sweep]\nmethods = [\"zf\"]\n",
        "task = \"channel-toy\"\n[toy]\nalpha_p = 0.0\n",
        "task = \"stationary-test\"\n[stationary]\nlambda = [1.0]\n",
        "task = \"fdt-test\"\n[fdt]\nmass = [-1.0]\n",
    ];
    for text in cases {
        let err = ExperimentConfig::from_toml_str(text)
            .and_then(|c| c.validate())
            .unwrap_err();
        assert_eq!(err.exit_code(), 2, "{text}: {err}");
    }
    for text in [
        "unknown_key = 1\n",
        "task = \"sweep\"\n",
        "[model]\nn_r = \"many\"\n",
    ] {
        assert!(matches!(
            ExperimentConfig::from_toml_str(text),
            Err(CliError::Config(_))
        ));
    }
}

#[test]
fn readme_example_parses() {
    let readme = include_str!("../../../README.md");
    let start = readme.find("```toml\n").expect("toml block") + "```toml\n".len();
    let len = readme[start..].find("```").unwrap();
    let cfg = ExperimentConfig::from_toml_str(&readme[start..start + len]).unwrap();
    cfg.validate().unwrap();
    assert_eq!(cfg, {
        let mut d = run_table1_preset("third", 5).unwrap();
        d.sweep.snr_db = vec![10.0, 13.0, 16.0];
        d.sweep.methods = ["langevin", "mmse", "vblast", "ml"]
            .map(String::from)
            .to_vec();
        d
    });
}
