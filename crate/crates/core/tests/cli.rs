use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_polariton");

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(BIN)
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let path = dir.join("c.toml");
    let text = format!(
        "[cavity]\ndelta0 = 0.8\nkappa = 0.02\nn_modes = 3\nwaist_ratio = 1000.0\n\
         [drive]\nb_m = 0.9\nepsilon = 0.19\n\
         [sweep]\nomega_points = 60\nlambda_ratio_sq_points = 12\nb_m_points = 4\nepsilon_points = 3\n{extra}"
    );
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn zero_coupling_poles_are_bare_cavity_poles() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let o = run(&["poles"], &cfg, dir.path());
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("poles.json")).unwrap()).unwrap();
    assert!(v["comment"]
        .as_str()
        .unwrap()
        .contains(v["config_hash"].as_str().unwrap()));
    let poles = v["result"]["poles"].as_array().unwrap();
    assert_eq!(poles.len(), 6);
    for d in [0.8, 0.61, 0.42] {
        for sign in [-1.0, 1.0] {
            let hit = poles.iter().any(|p| {
                (p["re"].as_f64().unwrap() - sign * d).abs() < 1e-9 && (p["im"].as_f64().unwrap() + 0.02).abs() < 1e-12
            });
            assert!(hit, "missing pole at {}", sign * d);
        }
    }
}

#[test]
fn outputs_are_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("out");
    let run_all = |threads: &str| {
        for cmd in ["sweep-lambda", "crossing", "overlaps"] {
            let o = Command::new(BIN)
                .args([cmd, "--threads", threads])
                .arg("--config")
                .arg(&cfg)
                .arg("--out")
                .arg(&out)
                .output()
                .unwrap();
            assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        }
        [
            "sweep-lambda.csv",
            "crossing.json",
            "overlaps.csv",
            "resolved-config.toml",
        ]
        .map(|f| std::fs::read(out.join(f)).unwrap())
    };
    let first = run_all("1");
    let again = run_all("1");
    let threaded = run_all("3");
    assert!(first == again, "repeated runs differ");
    assert!(first == threaded, "thread count changes output");
}

#[test]
fn csv_files_start_with_hash_header() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[coupling]\nlambda_ratio_sq = 0.3\n");
    for (cmd, file) in [
        ("spectrum", "spectrum.csv"),
        ("weights", "weights.csv"),
        ("profile", "profile.csv"),
        ("sweep-bm", "sweep-bm.csv"),
    ] {
        let o = run(&[cmd], &cfg, dir.path());
        assert!(o.status.success(), "{cmd}: {}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(dir.path().join(file)).unwrap();
        assert!(text.starts_with("# polariton"), "{file}");
        assert!(text.lines().nth(1).unwrap().starts_with("# config_hash "));
    }
    let resolved = std::fs::read_to_string(dir.path().join("resolved-config.toml")).unwrap();
    assert!(resolved.contains("eta_atom = 0.000001"));
}

#[test]
fn spectrum_header_and_grid_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(run(&["sweep-lambda", "--entry", "1,1"], &cfg, dir.path())
        .status
        .success());
    let text = std::fs::read_to_string(dir.path().join("sweep-lambda.csv")).unwrap();
    let header = text.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "omega,lambda_ratio_sq,a11");
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 60 * 12);
    assert!(run(&["spectrum", "--entry", "0,1"], &cfg, dir.path()).status.success());
    let text = std::fs::read_to_string(dir.path().join("spectrum.csv")).unwrap();
    assert!(text.lines().any(|l| l == "omega,a01_re,a01_im"));
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(
        &bad,
        "[cavity]\ndelta0 = 0.8\nkappa = -0.02\nn_modes = 2\nwaist_ratio = 10.0\n",
    )
    .unwrap();
    let o = run(&["poles"], &bad, dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("line 3") && err.contains("kappa"), "{err}");

    let cfg = small_config(dir.path(), "");
    assert_eq!(
        run(&["poles", "--entry", "5,0"], &cfg, dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        run(&["poles"], &dir.path().join("missing.toml"), dir.path())
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        Command::new(BIN).arg("no-such-command").output().unwrap().status.code(),
        Some(1)
    );
}

#[test]
fn numerical_failures_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    // a ceiling below threshold leaves nothing to normalize against
    let cfg = small_config(dir.path(), "lambda_hi = 0.01\n");
    let o = run(&["sweep-lambda"], &cfg, dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sweep-lambda"));
}

#[test]
fn renormalize_flag_changes_hash() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(run(&["overlaps"], &cfg, &a).status.success());
    assert!(Command::new(BIN)
        .args(["overlaps", "--renormalize", "true"])
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&b)
        .output()
        .unwrap()
        .status
        .success());
    let ra = std::fs::read_to_string(a.join("resolved-config.toml")).unwrap();
    let rb = std::fs::read_to_string(b.join("resolved-config.toml")).unwrap();
    assert_ne!(ra.lines().next(), rb.lines().next());
    assert!(rb.contains("renormalize = true"));
}

#[test]
fn shipped_configs_are_valid() {
    for name in ["avoided-crossings.toml", "instability-map.toml", "threshold-curve.toml"] {
        let c = polariton::config::parse_config(&configs().join(name)).unwrap();
        polariton::response::Model::new(c.spec.clone()).unwrap();
    }
}

#[test]
fn small_phase_diagram_and_threshold_curve() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    assert!(run(&["phase-diagram"], &cfg, dir.path()).status.success());
    let text = std::fs::read_to_string(dir.path().join("phase-diagram.csv")).unwrap();
    assert!(text.lines().any(|l| l == "epsilon,b_m,kind,lambda_c,frequency"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 4);
    assert!(run(&["lambda-c"], &cfg, dir.path()).status.success());
    let text = std::fs::read_to_string(dir.path().join("lambda-c.csv")).unwrap();
    let first = text.lines().filter(|l| !l.starts_with('#')).nth(1).unwrap();
    // B_m = 0 reduces to the single-mode threshold
    let lc: f64 = first.split(',').nth(2).unwrap().parse().unwrap();
    assert!((lc / (0.6404f64 / 3.2).sqrt() - 1.0).abs() < 1e-5, "{first}");
}

#[test]
fn weight_estimators_both_normalize() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "[coupling]\nlambda_ratio_sq = 0.5\n");
    for method in ["eigenvector", "spectral"] {
        let o = run(&["weights", "--method", method], &cfg, dir.path());
        assert!(o.status.success(), "{method}: {}", String::from_utf8_lossy(&o.stderr));
        let text = std::fs::read_to_string(dir.path().join("weights.csv")).unwrap();
        assert!(text.contains(&format!("# method {method}\n")));
        let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).skip(1).collect();
        assert!(!rows.is_empty());
        for row in rows {
            let sum: f64 = row.split(',').skip(3).map(|x| x.parse::<f64>().unwrap()).sum();
            assert!((sum - 1.0).abs() < 1e-12, "{method}: {row}");
        }
    }
    assert_eq!(
        run(&["weights", "--method", "histogram"], &cfg, dir.path())
            .status
            .code(),
        Some(1)
    );
}
