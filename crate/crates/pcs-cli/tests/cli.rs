//! End-to-end checks of the binary: exit codes, config validation, output
//! determinism across worker counts.

use std::path::PathBuf;
use std::process::Command;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_pcs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("pcs-cli-test-{name}-{}", std::process::id()));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const BASE_CONFIG: &str = r#"
[crystal]
lattice_nm = 884.4
radius_nm = 276.0
thickness_nm = 200.0
index_model = "constant"
n_constant = 2.0

[guided_bands]
epsilon_eff = 2.95
kx_max_fraction = 0.08
kx_points = 4

[cavity_scan]
length_mm = 17.4
input_transmission_ppm = 455.0
membrane = "fixed"
membrane_one_minus_r_ppm = 530.0
membrane_transmission_ppm = 100.0
lambda_start_nm = 1070.8
span_fsr = 2.4
samples = 120000
noise_rms = 0.0018
scan_speed_jitter = 0.03
"#;

#[test]
fn guided_bands_runs_and_writes_the_expected_columns() {
    let dir = scratch("guided");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, BASE_CONFIG).unwrap();
    let status = Command::new(bin())
        .args(["guided-bands", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .status()
        .unwrap();
    assert!(status.success());
    let csv = std::fs::read_to_string(dir.join("out/guided_bands.csv")).unwrap();
    assert!(csv.contains("pol,p_x,p_y,k_x,omega_over_2pi_c,symmetry"));
    // 8 bands x 4 points
    let data_rows = csv.lines().filter(|l| l.starts_with("T")).count();
    assert_eq!(data_rows, 32);
    assert!(dir.join("out/guided_bands_report.json").exists());
}

#[test]
fn missing_section_exits_with_config_code() {
    let dir = scratch("missing-section");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, "[crystal]\nlattice_nm = 884.4\nradius_nm = 276.0\nthickness_nm = 200.0\nindex_model = \"constant\"\nn_constant = 2.0\n").unwrap();
    let output = Command::new(bin())
        .args(["band-map", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("\"error\":\"config\""), "stderr: {stderr}");
}

#[test]
fn unknown_keys_are_rejected() {
    let dir = scratch("unknown-key");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, format!("{BASE_CONFIG}\n[band_map]\nkx_max_fraction = 0.1\nkx_points = 2\nnu_over_c_min_per_um = 0.85\nnu_over_c_max_per_um = 0.9\nnu_points = 16\npolarization = \"s\"\nnot_a_real_key = 1\n")).unwrap();
    let output = Command::new(bin())
        .args(["band-map", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn scan_outputs_are_byte_identical_across_worker_counts() {
    let dir = scratch("determinism");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, BASE_CONFIG).unwrap();
    let mut outputs = Vec::new();
    for (threads, out) in [("1", "out1"), ("4", "out2")] {
        let status = Command::new(bin())
            .args(["cavity-scan", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(out))
            .args(["--threads", threads, "--seed", "42"])
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push((
            std::fs::read(dir.join(out).join("cavity_scan_trace.csv")).unwrap(),
            std::fs::read(dir.join(out).join("cavity_scan_report.json")).unwrap(),
        ));
    }
    assert_eq!(outputs[0].0, outputs[1].0, "traces differ across thread counts");
    assert_eq!(outputs[0].1, outputs[1].1, "reports differ across thread counts");
}

#[test]
fn different_seeds_give_different_noise() {
    let dir = scratch("seeds");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, BASE_CONFIG).unwrap();
    let mut traces = Vec::new();
    for (seed, out) in [("1", "s1"), ("2", "s2")] {
        let status = Command::new(bin())
            .args(["cavity-scan", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(out))
            .args(["--seed", seed])
            .status()
            .unwrap();
        assert!(status.success());
        traces.push(std::fs::read(dir.join(out).join("cavity_scan_trace.csv")).unwrap());
    }
    assert_ne!(traces[0], traces[1]);
}

#[test]
fn band_map_is_deterministic_across_worker_counts() {
    let dir = scratch("map-det");
    let cfg = dir.join("run.toml");
    std::fs::write(
        &cfg,
        format!(
            "{BASE_CONFIG}\n[truncation]\nn = 2\n\n[band_map]\nkx_max_fraction = 0.06\nkx_points = 3\nnu_over_c_min_per_um = 0.86\nnu_over_c_max_per_um = 0.90\nnu_points = 10\npolarization = \"s\"\n"
        ),
    )
    .unwrap();
    let mut maps = Vec::new();
    for (threads, out) in [("1", "m1"), ("4", "m2")] {
        let status = Command::new(bin())
            .args(["band-map", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.join(out))
            .args(["--threads", threads])
            .status()
            .unwrap();
        assert!(status.success());
        maps.push(std::fs::read(dir.join(out).join("band_map.csv")).unwrap());
    }
    assert_eq!(maps[0], maps[1], "band maps differ across thread counts");
}

#[test]
fn json_format_emits_json_tables() {
    let dir = scratch("json-format");
    let cfg = dir.join("run.toml");
    std::fs::write(&cfg, BASE_CONFIG).unwrap();
    let status = Command::new(bin())
        .args(["guided-bands", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.join("out"))
        .args(["--format", "json"])
        .status()
        .unwrap();
    assert!(status.success());
    assert!(dir.join("out/guided_bands.json").exists());
    assert!(!dir.join("out/guided_bands.csv").exists());
}
