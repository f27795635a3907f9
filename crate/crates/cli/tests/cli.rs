use std::path::Path;
use std::process::{Command, Output};

fn langevin(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_langevin"))
        .args(args)
        .output()
        .expect("spawn langevin")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn convergence(out_dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["convergence", "--out", out_dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    langevin(&args)
}

const EXAMPLE: [&str; 12] = [
    "--model",
    "pendulum",
    "--schemes",
    "trunc2-sym",
    "--dts",
    "2^-4,2^-5,2^-6",
    "--ref-dt",
    "2^-13",
    "--paths",
    "100",
    "--seed",
    "42",
];

#[test]
fn convergence_example_reports_second_order() {
    let dir = tempfile::tempdir().unwrap();
    let out = convergence(dir.path(), &EXAMPLE);
    assert!(out.status.success(), "{}", stderr(&out));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.contains("trunc2-sym"), "{stdout}");

    let csv = std::fs::read_to_string(dir.path().join("errors.csv")).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config={"));
    assert_eq!(
        lines.next().unwrap(),
        "model,scheme,dt,mean_error,std_error,n_paths_used,n_excluded"
    );
    assert_eq!(lines.count(), 3);

    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    let slope = report["results"][0]["slope"].as_f64().unwrap();
    assert!((slope - 2.0).abs() < 0.25, "slope {slope}");
    assert_eq!(report["provenance"]["path_seeds"].as_array().unwrap().len(), 100);
}

#[test]
fn config_echo_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let second = dir.path().join("second");
    let args = [
        "--model",
        "harmonic",
        "--gamma",
        "0.5",
        "--schemes",
        "svv,direct-ab",
        "--dts",
        "2^-3,2^-4,2^-5",
        "--ref-dt",
        "2^-9",
        "--paths",
        "8",
        "--seed",
        "3",
    ];
    assert!(convergence(&first, &args).status.success());
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(first.join("report.json")).unwrap()).unwrap();
    let config = dir.path().join("config.json");
    std::fs::write(&config, serde_json::to_vec(&report["config"]).unwrap()).unwrap();

    let out = convergence(&second, &["--config", config.to_str().unwrap()]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(
        std::fs::read(first.join("report.json")).unwrap(),
        std::fs::read(second.join("report.json")).unwrap()
    );
    assert_eq!(
        std::fs::read(first.join("errors.csv")).unwrap(),
        std::fs::read(second.join("errors.csv")).unwrap()
    );
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let missing_model = convergence(dir.path(), &["--dts", "2^-4,2^-5,2^-6", "--ref-dt", "2^-10"]);
    assert_eq!(missing_model.status.code(), Some(2));

    let mut zero_paths = EXAMPLE.to_vec();
    zero_paths[9] = "0";
    assert_eq!(convergence(dir.path(), &zero_paths).status.code(), Some(2));

    let mut bad_scheme = EXAMPLE.to_vec();
    bad_scheme[3] = "leapfrog";
    let out = convergence(dir.path(), &bad_scheme);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("trunc3-neri"), "{}", stderr(&out));

    let out = convergence(
        dir.path(),
        &["--model", "double-well", "--dts", "0.1", "--ref-dt", "0.01"],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("pendulum"));

    let ragged = convergence(
        dir.path(),
        &["--model", "pendulum", "--dts", "0.3,0.2,0.1", "--ref-dt", "0.001"],
    );
    assert_eq!(ragged.status.code(), Some(2));

    assert_eq!(
        langevin(&["simulate", "--model", "pendulum", "--scheme", "svv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn simulate_is_reproducible_for_a_seed() {
    let run = |seed: &str| {
        langevin(&[
            "simulate",
            "--model",
            "pendulum",
            "--scheme",
            "trunc2-sym",
            "--dt",
            "2^-5",
            "--seed",
            seed,
        ])
        .stdout
    };
    let a = run("5");
    assert!(!a.is_empty());
    assert_eq!(a, run("5"));
    assert_ne!(a, run("6"));
}

#[test]
fn simulate_writes_a_trajectory_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("lj7.csv");
    let out = langevin(&[
        "simulate",
        "--model",
        "lj7",
        "--scheme",
        "trunc3-neri",
        "--dt",
        "2^-8",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = std::fs::read_to_string(path).unwrap();
    let mut lines = csv.lines();
    assert!(lines.next().unwrap().starts_with("# config="));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 1 + 21 + 21 + 1);
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 65);
    for row in rows {
        assert!(row.split(',').all(|v| v.parse::<f64>().unwrap().is_finite()), "{row}");
    }
}

#[test]
fn conservative_neri_keeps_energy() {
    let out = langevin(&[
        "simulate",
        "--model",
        "harmonic",
        "--scheme",
        "trunc3-neri",
        "--dt",
        "2^-6",
        "--gamma",
        "0",
        "--sigma",
        "0",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let text = String::from_utf8(out.stdout).unwrap();
    let drift = text
        .lines()
        .skip(2)
        .map(|l| l.rsplit(',').next().unwrap().parse::<f64>().unwrap().abs())
        .fold(0.0, f64::max);
    assert!(drift < 1e-8, "drift {drift}");
}

#[test]
fn noise_check_passes_and_catches_a_perturbation() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("noise.json");
    let ok = langevin(&[
        "noise-check",
        "--dts",
        "0.5,0.05",
        "--samples",
        "20000",
        "--ratio",
        "64",
        "--json",
        json.to_str().unwrap(),
    ]);
    assert!(ok.status.success(), "{}", String::from_utf8_lossy(&ok.stdout));
    let report: serde_json::Value = serde_json::from_slice(&std::fs::read(&json).unwrap()).unwrap();
    assert_eq!(report["entries"].as_array().unwrap().len(), 4);

    let bad = langevin(&[
        "noise-check",
        "--dts",
        "0.1",
        "--samples",
        "100000",
        "--ratio",
        "16",
        "--perturb",
        "0.05",
    ]);
    assert_eq!(bad.status.code(), Some(3));
}
