use paralab::runner::*;
use paralab::Error;
use proptest::prelude::*;
use std::path::Path;

fn sweep_text(dir: &str) -> String {
    format!(
        "experiment = norm-sweep\n\
         seed = 4\n\
         grid.samples = 64\n\
         bank.k_min = -4\n\
         sweep.lambda = 1 1; 0.5 1; 0.25 1\n\
         estimator.budget = 4\n\
         output.dir = {dir}\n"
    )
}

fn read_all(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn defaults_round_trip_through_text() {
    for e in Experiment::ALL {
        let c = ExperimentConfig::defaults(e);
        if c.validate().is_err() {
            continue;
        }
        assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c, "{}", e.name());
    }
}

#[test]
fn unknown_keys_and_bad_values_name_the_key() {
    let err = ExperimentConfig::parse("experiment = selftest\ngrid.colour = red\n").unwrap_err();
    assert!(matches!(&err, Error::Config { key, .. } if key == "grid.colour"), "{err:?}");
    let err = ExperimentConfig::parse("experiment = selftest\ngrid.samples = many\n").unwrap_err();
    assert!(matches!(&err, Error::Config { key, .. } if key == "grid.samples"), "{err:?}");
    let err = ExperimentConfig::parse("seed = 3\n").unwrap_err();
    assert!(matches!(&err, Error::Config { key, .. } if key == "experiment"), "{err:?}");
    assert_eq!(exit_code(&err), EXIT_VALIDATION);
}

#[test]
fn invalid_experiments_are_rejected_before_running() {
    let bad_rho = ExperimentConfig::parse(&(sweep_text("out") + "operator.rho = 1.5 1\n"));
    assert!(bad_rho.is_err());
    assert_eq!(exit_code(&bad_rho.unwrap_err()), EXIT_VALIDATION);
    let wide = ExperimentConfig::parse("experiment = counterexample\ncounterexample.lambda2 = 1\n");
    assert!(matches!(wide, Err(Error::ScaleWindow(_))));
    let no_symbol = ExperimentConfig::parse("experiment = symbol-decompose\n");
    assert!(matches!(no_symbol, Err(Error::Config { .. })));
}

#[test]
fn exit_codes_separate_validation_from_tolerance() {
    assert_eq!(exit_code(&Error::Tolerance("x".into())), EXIT_TOLERANCE);
    assert_eq!(exit_code(&Error::Stability("x".into())), EXIT_TOLERANCE);
    assert_eq!(exit_code(&Error::Validation("x".into())), EXIT_VALIDATION);
    assert_eq!(exit_code(&Error::ScaleWindow("x".into())), EXIT_VALIDATION);
    assert_ne!(EXIT_OK, EXIT_VALIDATION);
}

#[test]
fn norm_sweep_writes_one_csv_row_per_point_deterministically() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("sweep.cfg");
    std::fs::write(&path, sweep_text("first")).unwrap();
    let summary = run_config(&path).unwrap();
    assert!(!summary.artifacts.is_empty());
    let csv = std::fs::read_to_string(tmp.path().join("first/report.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 4, "{csv}");
    assert!(lines[0].starts_with("lambda1,lambda2,rho1,rho2,p1,p2,estimate"));
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(tmp.path().join("first/report.json")).unwrap()).unwrap();
    assert!(json.is_object());

    std::fs::write(&path, sweep_text("second")).unwrap();
    run_config(&path).unwrap();
    assert_eq!(read_all(&tmp.path().join("first")), read_all(&tmp.path().join("second")));
}

#[test]
fn cz_demo_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let c = ExperimentConfig::parse("experiment = cz-demo\ngrid.samples = 64\ncz.trials = 3\n").unwrap();
    let summary = run(&c, tmp.path()).unwrap();
    assert!(summary.artifacts.iter().all(|p| p.exists()));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn config_text_round_trips(
        seed in 0u64..1_000_000,
        budget in 1usize..100,
        points in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0), 1..4),
        formats in prop_oneof![Just("csv"), Just("json"), Just("csv json")],
        weight in 0.1f64..3.0,
    ) {
        let lambda: Vec<String> = points.iter().map(|(a, b)| format!("{a} {b}")).collect();
        let text = format!(
            "experiment = norm-sweep\nseed = {seed}\nestimator.budget = {budget}\nsweep.lambda = {}\n\
             output.formats = {formats}\noperator.weight = {weight}\n",
            lambda.join("; ")
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        prop_assert_eq!(c.seed, seed);
        prop_assert_eq!(c.sweep.lambda.len(), points.len());
        prop_assert_eq!(ExperimentConfig::parse(&c.to_text()).unwrap(), c);
    }
}
