use std::io::Write;
use std::process::{Command, Output};

use bagcv::mixture::Preset;

fn bagcv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bagcv")).args(args).output().unwrap()
}

fn data_file(n: usize, seed: u64) -> tempfile::NamedTempFile {
    let mut f = tempfile::NamedTempFile::new().unwrap();
    writeln!(f, "carrier,delay").unwrap();
    for (i, x) in Preset::D1.mixture().draw(n, seed).iter().enumerate() {
        writeln!(f, "C{},{:.3}", i % 7, x).unwrap();
    }
    f
}

fn path(f: &tempfile::NamedTempFile) -> &str {
    f.path().to_str().unwrap()
}

#[test]
fn select_json_is_reproducible_and_keyed() {
    let f = data_file(3_000, 1);
    let args = [
        "select",
        "--input",
        path(&f),
        "--column",
        "delay",
        "--jitter",
        "0.0005",
        "--m",
        "300",
        "--N",
        "20",
        "--seed",
        "9",
        "--no-timing",
    ];
    let a = bagcv(&args);
    let b = bagcv(&args);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let v: serde_json::Value = serde_json::from_slice(&a.stdout).unwrap();
    for key in ["bandwidth", "m", "N", "boundary_hits", "seed", "version"] {
        assert!(v.get(key).is_some(), "missing {key}");
    }
    assert!(v.get("elapsed_seconds").is_none());
    assert_eq!(v["m"], 300);
    assert!(v["ties"].as_u64().unwrap() > 0);
    let h = v["bandwidth"].as_f64().unwrap();
    assert!(h > 0.05 && h < 1.0, "h = {h}");

    let timed = bagcv(&args[..args.len() - 1]);
    let t: serde_json::Value = serde_json::from_slice(&timed.stdout).unwrap();
    assert!(t["elapsed_seconds"].as_f64().unwrap() >= 0.0);
    assert_eq!(t["bandwidth"], v["bandwidth"]);
}

#[test]
fn select_without_m_reports_the_estimated_m() {
    let f = data_file(2_000, 2);
    let out = bagcv(&[
        "select",
        "--input",
        path(&f),
        "--column",
        "delay",
        "--N",
        "10",
        "--s",
        "3",
        "--r",
        "300",
        "--seed",
        "4",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["m"], v["m0"]["m_hat"]);
    assert_eq!(v["m0"]["model"]["curve"].as_array().unwrap().len(), 50);
}

#[test]
fn exit_codes_distinguish_failures() {
    let mut bad = tempfile::NamedTempFile::new().unwrap();
    write!(bad, "1.0\n2.0\nx\n3.0\n?\n").unwrap();
    let out = bagcv(&["select", "--input", path(&bad), "--m", "2"]);
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("line(s) 3, 5"), "{err}");

    assert_eq!(bagcv(&["select", "--m", "3"]).status.code(), Some(2));
    let f = data_file(500, 3);
    assert_eq!(
        bagcv(&["select", "--input", path(&f), "--column", "delay", "--m", "5000"])
            .status
            .code(),
        Some(2)
    );
    let out = bagcv(&[
        "select",
        "--input",
        path(&f),
        "--column",
        "delay",
        "--m",
        "200",
        "--N",
        "8",
        "--lower",
        "5",
        "--upper",
        "9",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["boundary_hits"], 8);
}

#[test]
fn density_writes_a_512_point_grid() {
    let f = data_file(1_000, 5);
    let out_file = tempfile::NamedTempFile::new().unwrap();
    let out = bagcv(&[
        "density",
        "--input",
        path(&f),
        "--column",
        "delay",
        "--bandwidth",
        "0.2",
        "--output",
        path(&out_file),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_file.path()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "x,density");
    assert_eq!(lines.len(), 513);
    let first: f64 = lines[1].split(',').next().unwrap().parse().unwrap();
    let min = Preset::D1
        .mixture()
        .draw(1_000, 5)
        .iter()
        .map(|x| (x * 1000.0).round() / 1000.0)
        .fold(f64::INFINITY, f64::min);
    assert!((first - (min - 0.6)).abs() < 1e-9);
}

#[test]
fn table1_and_sim_write_csv() {
    let out = bagcv(&["table1"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("density,mu_rescale,mu_cv,m_crit\n"));
    assert_eq!(text.lines().count(), 7);

    let mut cfg = tempfile::NamedTempFile::new().unwrap();
    write!(
        cfg,
        r#"{{"density": "std_normal", "n": 1000, "reps": 2, "N": 5, "m_list": [100, "analytic"], "seed": 3}}"#
    )
    .unwrap();
    let out = bagcv(&["sim", "--config", path(&cfg)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("rep,method,m,value\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 3);
    let out = bagcv(&["sim", "--config", path(&cfg), "--kind", "ise"]);
    assert!(String::from_utf8(out.stdout).unwrap().starts_with("rep,m,ratio\n"));
}

#[test]
fn shipped_configs_parse() {
    let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut count = 0;
    for entry in std::fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        let spec = bagcv::experiments::StudySpec::from_json(&std::fs::read_to_string(&p).unwrap());
        assert!(spec.is_ok(), "{}: {:?}", p.display(), spec.err());
        count += 1;
    }
    assert!(count >= 4);
}
