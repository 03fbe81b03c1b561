use std::path::{Path, PathBuf};
use std::process::Command;

use compact6::cli::{parse_config, parse_config_str, run_experiment, write_report, ConfigError, Report};

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run_str(text: &str) -> Report {
    run_experiment(&parse_config_str(text).unwrap()).unwrap()
}

fn file<'a>(report: &'a Report, name: &str) -> &'a str {
    &report.files.iter().find(|(n, _)| n == name).unwrap_or_else(|| panic!("no {name}")).1
}

fn rows(csv: &str) -> Vec<Vec<f64>> {
    csv.lines()
        .skip(1)
        .map(|l| l.split(',').map(|c| c.parse().unwrap_or(f64::NAN)).collect())
        .collect()
}

#[test]
fn bundled_configs_parse() {
    let mut count = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "json") {
            parse_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            count += 1;
        }
    }
    assert_eq!(count, 15);
    let cfg = parse_config(&configs_dir().join("example4_1.json")).unwrap();
    assert_eq!((cfg.domain.x.a, cfg.domain.x.b), (0.0, 30.0));
    assert_eq!(cfg.ladder, vec![40, 80, 160, 320]);
}

#[test]
fn malformed_configs_are_rejected() {
    assert!(matches!(parse_config_str(""), Err(ConfigError::Json(_))));
    let small = r#"{"experiment": "custom", "model": {"kind": "bbmb"},
        "domain": {"a": 0, "b": 1, "n": 4}, "time": {"t_final": 1, "tau": 0.1}}"#;
    match parse_config_str(small) {
        Err(ConfigError::Invalid(msgs)) => {
            assert!(msgs.iter().any(|m| m.contains("/domain/n") && m.contains('8')), "{msgs:?}")
        }
        other => panic!("expected a validation error, got {other:?}"),
    }
    // Every problem is listed, not just the first.
    let many = r#"{"experiment": "nope", "model": {"kind": "bbmb", "extra": 1},
        "domain": {"a": 1, "b": 0, "n": 10}, "time": {"t_final": -1, "tau": "h7"}}"#;
    match parse_config_str(many) {
        Err(ConfigError::Invalid(msgs)) => assert!(msgs.len() >= 4, "{msgs:?}"),
        other => panic!("expected a validation error, got {other:?}"),
    }
    let missing = tempfile::tempdir().unwrap();
    assert!(matches!(parse_config(&missing.path().join("none.json")), Err(ConfigError::Io { .. })));
}

const SMALL_BBMB: &str = r#"{"experiment": "custom", "model": {"kind": "bbmb"},
    "domain": {"a": -10, "b": 10, "n": 8}, "time": {"t_final": 0.5, "tau": 0.01},
    "outputs": {"sample_times": [0, 0.25, 0.5]}}"#;

#[test]
fn series_files_have_one_row_per_node() {
    let report = run_str(SMALL_BBMB);
    let series = file(&report, "series_001.csv");
    assert_eq!(series.lines().next(), Some("x,u"));
    assert_eq!(series.lines().count(), 10);
    let index = rows(file(&report, "series_index.csv"));
    assert_eq!(index.len(), 3);
    // Full precision round trip of the node coordinates.
    let xs: Vec<f64> = rows(series).iter().map(|r| r[0]).collect();
    assert_eq!(xs[1], -10.0 + 2.5);
}

#[test]
fn identical_configs_give_identical_files() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        write_report(&run_str(SMALL_BBMB), d.path()).unwrap();
    }
    let mut names: Vec<_> = std::fs::read_dir(dirs[0].path())
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    assert!(names.len() >= 4);
    for n in names {
        let a = std::fs::read(dirs[0].path().join(&n)).unwrap();
        let b = std::fs::read(dirs[1].path().join(&n)).unwrap();
        assert_eq!(a, b, "{n:?} differs");
    }
}

#[test]
fn single_grid_ladder_has_no_rates() {
    let report = run_str(
        r#"{"experiment": "convergence_space",
            "model": {"kind": "linear_sobolev", "alpha": 0, "gamma": 1, "delta": 1},
            "domain": {"a": 0, "b": 30, "n": 40}, "time": {"t_final": 0.1, "tau": 0.01},
            "ladder": [40]}"#,
    );
    let csv = file(&report, "convergence.csv");
    assert_eq!(csv.lines().next(), Some("N,Linf,rate,L1,rate,L2,rate"));
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "40");
    assert!(row[1].contains('e'));
    assert_eq!((row[2], row[4], row[6]), ("", "", ""));
}

#[test]
fn tiny_step_sweep_is_bounded() {
    let report = run_str(
        r#"{"experiment": "stability_sweep",
            "model": {"kind": "linear_sobolev", "alpha": 0, "gamma": 1, "delta": 1},
            "domain": {"a": 0, "b": 3.141592653589793, "n": 100},
            "time": {"t_final": 0.01, "tau": "h6"}, "taus": [1e-6],
            "expect": {"bounded": [1e-6]}}"#,
    );
    assert!(report.passed());
    assert!(file(&report, "stability.csv").contains("bounded"));
}

#[test]
fn zero_profile_has_zero_invariants() {
    let report = run_str(
        r#"{"experiment": "solitary", "model": {"kind": "ew_solitary", "c": 0, "x0": 10, "delta": 1},
            "domain": {"a": 0, "b": 30, "n": 40}, "time": {"t_final": 1, "tau": 0.1}}"#,
    );
    for r in rows(file(&report, "invariants.csv")) {
        assert_eq!((r[1], r[3], r[5]), (0.0, 0.0, 0.0));
    }
}

/// Largest forward difference slope magnitude.
fn max_slope(series: &str) -> f64 {
    let r = rows(series);
    r.windows(2).map(|w| ((w[1][1] - w[0][1]) / (w[1][0] - w[0][0])).abs()).fold(0.0, f64::max)
}

#[test]
fn bore_front_steepens() {
    let report = run_str(
        r#"{"experiment": "bore", "model": {"kind": "ew_bore", "u0": 0.1, "d": 5, "xc": 0, "delta": 1},
            "domain": {"a": -20, "b": 80, "n": 200}, "time": {"t_final": 70, "tau": "h6"},
            "outputs": {"sample_times": [0, 35, 70]}}"#,
    );
    let s0 = max_slope(file(&report, "series_000.csv"));
    let s1 = max_slope(file(&report, "series_001.csv"));
    let s2 = max_slope(file(&report, "series_002.csv"));
    assert!(s0 < s1 && s1 < s2, "{s0} {s1} {s2}");
}

#[test]
fn solitary_peak_travels_at_its_speed() {
    let report = run_str(
        r#"{"experiment": "solitary", "model": {"kind": "ew_solitary", "c": 0.03, "x0": 10, "delta": 1},
            "domain": {"a": 0, "b": 30, "n": 40}, "time": {"t_final": 200, "tau": "h6"},
            "outputs": {"sample_times": [200]}}"#,
    );
    let r = rows(file(&report, "series_000.csv"));
    let peak = r.iter().fold((0.0, f64::MIN), |best, row| if row[1] > best.1 { (row[0], row[1]) } else { best });
    assert!((peak.0 - 16.0).abs() <= 0.75, "peak at {}", peak.0);
}

fn cli(args: &[&str]) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_compact6")).args(args).output().unwrap();
    (out.status.code().unwrap(), String::from_utf8_lossy(&out.stdout).into_owned())
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let write = |name: &str, text: &str| {
        let p = dir.path().join(name);
        std::fs::write(&p, text).unwrap();
        p.to_str().unwrap().to_string()
    };
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();

    let ok = write(
        "ok.json",
        r#"{"experiment": "stability_sweep",
            "model": {"kind": "linear_sobolev", "alpha": 0, "gamma": 1, "delta": 1},
            "domain": {"a": 0, "b": 3.141592653589793, "n": 20},
            "time": {"t_final": 0.01, "tau": "h6"}, "taus": [1e-3], "expect": {"bounded": [1e-3]}}"#,
    );
    let (code, stdout) = cli(&["stability", "--config", &ok, "--out", out]);
    assert_eq!(code, 0);
    assert!(stdout.lines().any(|l| l.starts_with("PASS ")));
    assert!(Path::new(out).join("stability.csv").exists());
    assert!(Path::new(out).join("verdicts.csv").exists());

    let failing = write("fail.json", &std::fs::read_to_string(&ok).unwrap().replace("\"bounded\"", "\"diverged\""));
    let (code, stdout) = cli(&["stability", "--config", &failing, "--out", out]);
    assert_eq!(code, 1);
    assert!(stdout.lines().any(|l| l.starts_with("FAIL ")));

    let blowup = write(
        "blowup.json",
        r#"{"experiment": "custom",
            "model": {"kind": "linear_sobolev", "alpha": 1, "gamma": 0, "delta": 0},
            "domain": {"a": 0, "b": 6.283185307179586, "n": 50},
            "time": {"t_final": 10000, "tau": 10}}"#,
    );
    assert_eq!(cli(&["simulate", "--config", &blowup, "--out", out]).0, 1);

    let bad = write("bad.json", r#"{"experiment": "custom"}"#);
    assert_eq!(cli(&["simulate", "--config", &bad]).0, 2);
    assert_eq!(cli(&["convergence", "--config", &ok, "--out", out]).0, 2);
    assert_eq!(cli(&["simulate"]).0, 2);
}
