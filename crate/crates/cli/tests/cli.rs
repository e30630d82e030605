use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn afcsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_afcsim"))
        .args(args)
        .env_remove("AFCSIM_SEED")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn empty_timetag_file_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let input = dir.path().join("empty.bin");
    fs::write(&input, b"").unwrap();
    let out = afcsim(&[
        "--out",
        path(dir.path()),
        "analyze",
        "--input",
        path(&input),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("empty stream"));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "[source]\npump_power = 2.0\n").unwrap();
    let out = afcsim(&["--config", path(&cfg), "--out", path(dir.path()), "budget"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("flat.toml");
    // Negative Rabi frequencies give a non-positive slope.
    fs::write(&cfg, "[nutation]\npoints = [[1.0, -1.0], [2.0, -1.4]]\n").unwrap();
    let out = afcsim(&[
        "--config",
        path(&cfg),
        "--out",
        path(dir.path()),
        "nutation",
    ]);
    assert_eq!(
        out.status.code(),
        Some(3),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn table1_matches_listed_losses() {
    let dir = tempfile::tempdir().unwrap();
    let out = afcsim(&["--out", path(dir.path()), "reproduce", "table1"]);
    assert!(out.status.success());
    let text = fs::read_to_string(dir.path().join("table1.csv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(2) {
        let f: Vec<f64> = line
            .split(',')
            .skip(2)
            .map(|v| v.parse().unwrap())
            .collect();
        assert!((f[0] - f[1]).abs() <= 0.02, "{line}");
        assert!((f[4] - f[5]).abs() <= 0.1, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 6);
}

#[test]
fn outputs_embed_hash_and_repeat_exactly() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("short.toml");
    fs::write(
        &cfg,
        "seed = 9\n[source]\nduration_s = 0.5\nhbt_signal = true\n",
    )
    .unwrap();
    for d in [a.path(), b.path()] {
        let out = afcsim(&["--config", path(&cfg), "--out", path(d), "source"]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.path().join("report.json")).unwrap()).unwrap();
    let hash = report["config_hash"].as_str().unwrap();
    for entry in report["outputs"].as_array().unwrap() {
        let name = entry["path"].as_str().unwrap();
        let x = fs::read(a.path().join(name)).unwrap();
        assert_eq!(x, fs::read(b.path().join(name)).unwrap(), "{name} differs");
        if name.ends_with(".csv") || name.ends_with(".json") {
            let text = String::from_utf8(x).unwrap();
            assert!(text.contains(hash), "{name} lacks the config hash");
        }
    }
}

#[test]
fn source_output_round_trips_through_analyze() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("src.toml");
    fs::write(&cfg, "[source]\nduration_s = 2.0\nhbt_signal = true\n").unwrap();
    let gen = dir.path().join("gen");
    assert!(afcsim(&[
        "--config",
        path(&cfg),
        "--out",
        path(&gen),
        "--format",
        "json",
        "source"
    ])
    .status
    .success());
    let out = afcsim(&[
        "--out",
        path(&dir.path().join("an")),
        "--format",
        "json",
        "analyze",
        "--input",
        path(&gen.join("timetags.bin")),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("an/summary.json")).unwrap())
            .unwrap();
    let g = summary["g2_si"]["g2"].as_f64().unwrap();
    assert!(g > 5.0 && g < 30.0, "{g}");
    assert!(summary["heralded"]["g2"].as_f64().unwrap() < 1.0);
}

#[test]
fn seed_flag_overrides_config() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    afcsim(&["--out", path(a.path()), "--seed", "5", "nutation"]);
    let out = Command::new(env!("CARGO_BIN_EXE_afcsim"))
        .args(["--out", path(b.path()), "nutation"])
        .env("AFCSIM_SEED", "5")
        .output()
        .unwrap();
    assert!(out.status.success());
    let read = |d: &Path| fs::read_to_string(d.join("summary.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    assert!(read(a.path()).contains("\"seed\": 5"));
}

#[test]
fn fig5b_fit_recovers_dephasing_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = afcsim(&[
        "--out",
        path(dir.path()),
        "--format",
        "json",
        "reproduce",
        "fig5b",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap())
            .unwrap();
    let t2 = summary["t2star_us"]["value"].as_f64().unwrap();
    assert!((t2 - 8.0).abs() / 8.0 < 0.15, "{t2}");
    let rows: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("fig5b.json")).unwrap()).unwrap();
    assert_eq!(rows["rows"].as_array().unwrap().len(), 5);
}
