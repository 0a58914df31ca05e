use ppcat_cli::{CliError, Config, Experiment, Overrides};

#[test]
fn flags_override_file_and_file_overrides_defaults() {
    let file = "seed = 9\n[simulation]\ntrajectories = 400\ndt = 0.002\n[model]\nkappa1 = 0.5\n";
    let mut c = Config::from_toml(Experiment::Transient, file).unwrap();
    let defaults = Config::defaults(Experiment::Transient);
    assert_eq!(c.seed, 9);
    assert_eq!(c.simulation.trajectories, 400);
    assert_eq!(c.model.kappa1, 0.5);
    assert_eq!(c.model.kappa2, defaults.model.kappa2);
    assert_eq!(c.simulation.subensembles, defaults.simulation.subensembles);

    c.apply(&Overrides {
        seed: Some(11),
        trajectories: Some(800),
        subensembles: None,
        dt: None,
        no_oracle: true,
    });
    assert_eq!(c.seed, 11);
    assert_eq!(c.simulation.trajectories, 800);
    assert_eq!(c.simulation.dt, 0.002);
    assert!(!c.oracle.enabled);
}

#[test]
fn experiment_defaults_differ_where_documented() {
    let pd = Config::defaults(Experiment::ParityDecay);
    assert_eq!(pd.initial.kind, "cat");
    assert_eq!((pd.model.kappa1, pd.model.kappa2), (1e-3, 1.0));
    assert_eq!(Config::defaults(Experiment::MomentumScan).model.sites, 7);
    assert_eq!(Config::defaults(Experiment::Transient).simulation.subensembles, 100);
    assert_eq!(Config::defaults(Experiment::RegimeSweep).simulation.subensembles, 20);
}

#[test]
fn resolved_config_round_trips_through_toml() {
    for e in [
        Experiment::Transient,
        Experiment::RegimeSweep,
        Experiment::ParityDecay,
        Experiment::MomentumScan,
        Experiment::Reconstruct,
        Experiment::Oracle,
    ] {
        let mut c = Config::defaults(e);
        c.initial.zeta = Some([1.0, -1.0]);
        c.oracle.cutoffs = Some(vec![12]);
        let back = Config::from_toml(e, &c.to_toml()).unwrap();
        assert_eq!(back, c);
    }
}

fn config_error(result: Result<impl std::fmt::Debug, CliError>) -> String {
    match result {
        Err(CliError::Config(msg)) => msg,
        other => panic!("expected a configuration error, got {other:?}"),
    }
}

#[test]
fn unknown_keys_and_bad_types_are_rejected() {
    let msg = config_error(Config::from_toml(Experiment::Transient, "[model]\nkapa1 = 1.0\n"));
    assert!(msg.contains("kapa1"), "{msg}");
    let msg = config_error(Config::from_toml(
        Experiment::Transient,
        "[simulation]\ntrajectories = \"many\"\n",
    ));
    assert!(msg.contains("trajectories"), "{msg}");
}

#[test]
fn validation_messages_name_the_field() {
    let base = Config::defaults(Experiment::Transient);
    let cases: Vec<(Box<dyn Fn(&mut Config)>, &str)> = vec![
        (
            Box::new(|c| c.simulation.trajectories = 1001),
            "simulation.trajectories",
        ),
        (Box::new(|c| c.simulation.subensembles = 0), "simulation.subensembles"),
        (Box::new(|c| c.simulation.dt = -1.0), "simulation.dt"),
        (
            Box::new(|c| c.simulation.scheme = "gauge_p".into()),
            "simulation.scheme",
        ),
        (Box::new(|c| c.model.kappa2 = -0.1), "model.kappa2"),
        (Box::new(|c| c.model.sites = 0), "model.sites"),
        (Box::new(|c| c.model.gamma = 1.0), "model.gamma"),
        (Box::new(|c| c.model.boundary = "twisted".into()), "model.boundary"),
        (Box::new(|c| c.initial.kind = "fock".into()), "initial.kind"),
        (
            Box::new(|c| {
                c.initial.kind = "cat".into();
                c.initial.sign = 2;
            }),
            "initial.sign",
        ),
    ];
    for (mutate, field) in cases {
        let mut c = base.clone();
        mutate(&mut c);
        let msg = config_error(c.scheme().and_then(|s| c.run_config(s, 1)));
        assert!(msg.starts_with(field), "expected `{field}` in `{msg}`");
    }
    let mut c = base.clone();
    c.oracle.step_norm = 3.0;
    assert!(config_error(c.oracle_config()).starts_with("oracle.step_norm"));
    let mut c = base;
    c.oracle.cutoffs = Some(vec![10, 10]);
    assert!(config_error(c.oracle_config()).starts_with("oracle.cutoffs"));
}

#[test]
fn default_cat_amplitude_is_the_steady_lobe() {
    let c = Config::defaults(Experiment::ParityDecay);
    let z = c.cat_zeta().unwrap();
    // ε = 1, κ₂ = 1: ζ² = −2i.
    assert!((z * z - ppcat_core::C64::new(0.0, -2.0)).norm() < 1e-14);
}

#[test]
fn shipped_manifests_load_and_validate() {
    let experiments = [
        Experiment::Transient,
        Experiment::RegimeSweep,
        Experiment::ParityDecay,
        Experiment::MomentumScan,
        Experiment::Reconstruct,
        Experiment::Oracle,
    ];
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/large-scale");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
        let prefix = stem.split('-').next().unwrap();
        let experiment = experiments
            .into_iter()
            .find(|e| e.as_str() == prefix)
            .unwrap_or_else(|| panic!("{stem}: no experiment named {prefix}"));
        let c = Config::load(experiment, Some(&path)).unwrap_or_else(|e| panic!("{stem}: {e}"));
        c.scheme()
            .and_then(|s| c.run_config(s, c.seed))
            .unwrap_or_else(|e| panic!("{stem}: {e}"));
        seen += 1;
    }
    assert!(seen >= 6);
}
