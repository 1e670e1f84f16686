use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn fractalcell(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fractalcell"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&fractalcell(&["nonsense"], dir.path())), 2);
    assert_eq!(code(&fractalcell(&["coverage", "--bogus-flag"], dir.path())), 2);
    assert_eq!(code(&fractalcell(&["coverage", "--sigma", "1.2"], dir.path())), 2);
    assert_eq!(code(&fractalcell(&["coverage", "--engine", "quantum"], dir.path())), 2);
    assert_eq!(code(&fractalcell(&["coverage", "--sweep", "r=10:20:5"], dir.path())), 2);
    assert_eq!(code(&fractalcell(&["handoff-rate", "--engine", "analytic"], dir.path())), 2);
    let o = fractalcell(&["coverage", "--sweep", "tau-db=30,20"], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("strictly increasing"));
}

#[test]
fn analytic_coverage_curve_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let o = fractalcell(
        &["coverage", "--engine", "analytic", "--sweep", "tau-db=20:30:5", "--ptx-dbm", "33"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("coverage.csv")).unwrap();
    assert!(text.contains("# seed=1"));
    assert!(text.contains("# config_sha256="));
    assert!(text.contains("\"engine\":\"analytic\""));
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data[0], "tau-db,analytic,upper_bound,mc,mc_lower,mc_upper,mc_std_error,mc_samples");
    assert_eq!(data.len(), 4);
    let values: Vec<f64> = data[1..].iter().map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert!(values.windows(2).all(|w| w[1] < w[0]));
    let summary = fs::read_to_string(dir.path().join("summary.json")).unwrap();
    assert!(summary.contains("\"quantity\": \"coverage\""));
    assert!(String::from_utf8_lossy(&o.stdout).contains("coverage.csv"));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["coverage", "--engine", "mc", "--drops", "300", "--seed", "9", "--sweep", "tau-db=15,25", "--format", "json"];
    for dir in [a.path(), b.path()] {
        assert_eq!(code(&fractalcell(&args, dir)), 0);
    }
    for name in ["coverage.json", "summary.json"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
    }
    let c = tempfile::tempdir().unwrap();
    let mut other = args.to_vec();
    other[6] = "10";
    assert_eq!(code(&fractalcell(&other, c.path())), 0);
    assert_ne!(
        fs::read(a.path().join("coverage.json")).unwrap(),
        fs::read(c.path().join("coverage.json")).unwrap()
    );
}

#[test]
fn config_file_and_series() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("model.json");
    fs::write(&cfg, r#"{"model": {"mu": 5.0}, "antenna": {"beam_tx_deg": 20}}"#).unwrap();
    let out = dir.path().join("run");
    let o = fractalcell(
        &[
            "association",
            "--config",
            cfg.to_str().unwrap(),
            "--engine",
            "analytic",
            "--sweep",
            "r=50,200",
            "--series",
            "sigma=0,1.2",
        ],
        &out,
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let low = fs::read_to_string(out.join("association_sigma=0.csv")).unwrap();
    let high = fs::read_to_string(out.join("association_sigma=1.2.csv")).unwrap();
    assert!(low.contains("\"mu\":5.0"));
    let at = |t: &str, row: usize| -> f64 {
        t.lines().filter(|l| !l.starts_with('#')).nth(row).unwrap().split(',').nth(1).unwrap().parse().unwrap()
    };
    assert!(at(&high, 1) < at(&low, 1));
    assert!(at(&high, 2) > at(&low, 2));

    fs::write(&cfg, r#"{"model": {"unknown": 1}}"#).unwrap();
    assert_eq!(code(&fractalcell(&["coverage", "--config", cfg.to_str().unwrap()], &out)), 2);
}

#[test]
fn tessellation_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let o = fractalcell(&["tessellate", "--resolution", "48", "--sigma", "1", "--sections", "5"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["cells.pgm", "voronoi.pgm", "boundary.csv", "stations.csv", "deployment.csv", "summary.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    assert_eq!(code(&fractalcell(&["tessellate", "--resolution", "8"], dir.path())), 2);
}

#[test]
fn handoff_rate_trace_counting_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = fractalcell(
        &[
            "handoff-rate",
            "--sweep",
            "sigma=0.5",
            "--drops",
            "2",
            "--duration",
            "40",
            "--counting",
            "changed-server",
        ],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("handoff-rate.csv")).unwrap();
    assert!(text.contains("changed-server"));
    assert_eq!(code(&fractalcell(&["handoff-rate", "--counting", "sometimes"], dir.path())), 2);
}

#[test]
fn validate_reports_each_check() {
    let dir = tempfile::tempdir().unwrap();
    let o = fractalcell(&["validate", "--drops", "400"], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    let checks: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")).collect();
    assert!(checks.len() >= 10, "{stdout}");
    let failed = checks.iter().any(|l| l.starts_with("FAIL"));
    assert_eq!(code(&o), if failed { 4 } else { 0 });
    assert!(checks.iter().any(|l| l.starts_with("PASS quadrature beta identity")));
}
