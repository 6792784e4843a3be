use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn qpm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qpm"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).unwrap()
}

/// Value of a `key = value` line, first token only.
fn value(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('='))
        .unwrap_or_else(|| panic!("no `{key}` in\n{text}"))
        .split([',', ' '])
        .find(|s| !s.is_empty())
        .unwrap()
        .parse()
        .unwrap()
}

fn values(text: &str, key: &str) -> Vec<f64> {
    text.lines()
        .find_map(|l| l.strip_prefix(key)?.trim_start().strip_prefix('='))
        .unwrap()
        .split(',')
        .map(|s| s.trim().parse().unwrap())
        .collect()
}

fn crystal_file() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ppktp_triple_1560.toml")
}

#[test]
fn mismatch_zzz_at_room_temperature() {
    let out = stdout(&qpm(&[
        "mismatch",
        "--process",
        "zzz",
        "--lambda-nm",
        "1560",
        "--temp-c",
        "25",
    ]));
    let dk = value(&out, "delta_k_per_m");
    assert!((dk - 2.510e5).abs() < 0.02 * 2.510e5);
    assert!((value(&out, "period_um") - 25.03).abs() < 0.02 * 25.03);
}

#[test]
fn calibrated_yzy_mismatch() {
    let out = stdout(&qpm(&[
        "mismatch",
        "--process",
        "yzy",
        "--lambda-nm",
        "1560",
        "--temp-c",
        "40",
        "--calibrated",
    ]));
    let dk = value(&out, "delta_k_per_m");
    assert!((dk - 1.348e5).abs() < 0.01 * 1.348e5, "{dk}");
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(
        qpm(&["mismatch", "--process", "xzz"]).status.code(),
        Some(2)
    );
    assert_eq!(qpm(&["frobnicate"]).status.code(), Some(2));
    assert_eq!(
        qpm(&["--coeff-set", "nope", "mismatch", "--process", "zzz"])
            .status
            .code(),
        Some(2)
    );
    assert_eq!(
        qpm(&["calibrate", "--point", "20:1e5", "--point", "oops"])
            .status
            .code(),
        Some(2)
    );
    let missing = qpm(&["render", "--design", "/nonexistent/design.qpm"]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn computation_errors_exit_1() {
    // Out of the dispersion model's wavelength range.
    assert_eq!(
        qpm(&["mismatch", "--process", "zzz", "--lambda-nm", "5000"])
            .status
            .code(),
        Some(1)
    );
    // Rationally dependent targets admit no independent basis.
    let out = qpm(&[
        "design",
        "--targets",
        "1e5,2e5,3e5",
        "--basis",
        "search",
        "--max-order",
        "1",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("basis search failed"));
    let degenerate = qpm(&["calibrate", "--point", "30:1.39e5", "--point", "30:1.40e5"]);
    assert_eq!(degenerate.status.code(), Some(1));
}

#[test]
fn sweep_step_zero_is_config_error() {
    let crystal = crystal_file();
    let out = qpm(&[
        "sweep",
        "--crystal",
        crystal.to_str().unwrap(),
        "--process",
        "yzy",
        "--min",
        "5",
        "--max",
        "65",
        "--step",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("step"));
}

#[test]
fn calibrate_reference_points() {
    let out = stdout(&qpm(&["calibrate"]));
    assert!((value(&out, "slope_per_m_per_K") - 22.34).abs() < 0.05 * 22.34);
    assert!((value(&out, "period_um") - 46.6).abs() < 0.1);
    let rigid = stdout(&qpm(&["calibrate", "--rigid"]));
    assert!((value(&rigid, "slope_per_m_per_K") - 23.35).abs() < 0.01);
}

#[test]
fn design_with_published_split() {
    let out = stdout(&qpm(&[
        "design",
        "--targets",
        "2.510e5,9.061e5",
        "--couplings",
        "15.4,3.75",
        "--split",
        "0.6206",
    ]));
    let tiles = values(&out, "tile_lengths_um");
    assert!((tiles[0] - 3.37).abs() < 0.005 * 3.37);
    assert!((tiles[1] - 2.64).abs() < 0.005 * 2.64);
    assert!((value(&out, "balance_ratio") - 0.70).abs() < 0.02);
}

#[test]
fn single_target_design_is_periodic() {
    let out = stdout(&qpm(&["design", "--targets", "2.510e5"]));
    assert_eq!(values(&out, "duties"), vec![0.5]);
    assert!((value(&out, "tile_lengths_um") - 25.0326).abs() < 1e-3);
    assert!((value(&out, "abs_G[2.510000e5]") - 2.0 / std::f64::consts::PI).abs() < 1e-3);
}

#[test]
fn optimizer_balances_couplings() {
    let out = stdout(&qpm(&[
        "design",
        "--targets",
        "2.510e5,9.061e5",
        "--couplings",
        "15.4,3.75",
    ]));
    assert!(value(&out, "balance_ratio") > 0.95);
    assert!(value(&out, "candidates_evaluated") > 0.0);
}

#[test]
fn design_file_round_trips_through_crystal() {
    let dir = tempfile::tempdir().unwrap();
    let design = dir.path().join("zzz_zyy.qpm");
    let report = stdout(&qpm(&[
        "design",
        "--targets",
        "2.510e5,9.061e5",
        "--couplings",
        "15.4,3.75",
        "--split",
        "0.6206",
        "--output",
        design.to_str().unwrap(),
    ]));
    let reported = [
        value(&report, "abs_G[2.510000e5]"),
        value(&report, "abs_G[9.061000e5]"),
    ];

    let crystal = dir.path().join("crystal.toml");
    std::fs::write(
        &crystal,
        r#"name = "round-trip"

[dimensions]
length_mm = 5.0
width_mm = 2.0
thickness_mm = 1.0

[[sections]]
kind = "dualgrid"
length_mm = 5.0
design = "zzz_zyy.qpm"
processes = ["ZZZ", "ZYY"]
"#,
    )
    .unwrap();
    let crystal = crystal.to_str().unwrap();

    let fourier = stdout(&qpm(&["fourier", "--crystal", crystal]));
    let rows: Vec<Vec<f64>> = fourier
        .lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with('k'))
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 2);
    for (row, g) in rows.iter().zip(reported) {
        assert!((row[1] - g).abs() < 1e-9, "{} vs {g}", row[1]);
    }

    let report = stdout(&qpm(&["report", "--crystal", crystal]));
    assert!((value(&report, "ZZZ.abs_G[2.510000e5]") - reported[0]).abs() < 1e-9);
    assert!((value(&report, "ZYY.abs_G[9.061000e5]") - reported[1]).abs() < 1e-9);

    let sweep = stdout(&qpm(&[
        "sweep",
        "--crystal",
        crystal,
        "--process",
        "zzz",
        "--min",
        "20",
        "--max",
        "50",
    ]));
    assert!(sweep.contains("# structure: round-trip/main"));
    assert!(sweep.contains("temperature_C,eta_rel"));

    let rendered = stdout(&qpm(&["render", "--design", design.to_str().unwrap()]));
    let domains = rendered.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert!(rendered.contains(&format!("# domains: {domains}")));
}

#[test]
fn five_channel_sweep_writes_one_csv_per_channel() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("curves");
    let crystal = crystal_file();
    stdout(&qpm(&[
        "sweep",
        "--crystal",
        crystal.to_str().unwrap(),
        "--process",
        "yzy",
        "--min",
        "5",
        "--max",
        "65",
        "--output",
        out_dir.to_str().unwrap(),
    ]));
    let mut names: Vec<String> = std::fs::read_dir(&out_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "yzy-45.9um.csv",
            "yzy-46.3um.csv",
            "yzy-46.7um.csv",
            "yzy-47.2um.csv",
            "yzy-47.7um.csv"
        ]
    );
    let csv = std::fs::read_to_string(out_dir.join("yzy-46.3um.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "# process: YZY");
    assert_eq!(lines[4], "temperature_C,eta_rel");
    assert_eq!(lines.len(), 5 + 241);
}

#[test]
fn wavelength_sweep_of_one_channel() {
    let crystal = crystal_file();
    let out = stdout(&qpm(&[
        "sweep",
        "--crystal",
        crystal.to_str().unwrap(),
        "--channel",
        "yzy-46.3um",
        "--process",
        "zzz",
        "--variable",
        "wavelength",
        "--min",
        "1559",
        "--max",
        "1561",
        "--temp-c",
        "37",
    ]));
    assert!(out.contains("# fixed: temperature_C=37"));
    assert!(out.contains("wavelength_nm,eta_rel"));
    assert_eq!(out.lines().filter(|l| l.starts_with("15")).count(), 41);
}

#[test]
fn render_periodic_grating() {
    let out = stdout(&qpm(&["render", "--period-um", "46.3", "--length-mm", "5"]));
    assert!(out.contains("# domains: 216"));
    assert!(out.lines().nth(3).unwrap() == "length_nm,sign");
}

#[test]
fn unknown_channel_is_usage_error() {
    let crystal = crystal_file();
    let out = qpm(&[
        "fourier",
        "--crystal",
        crystal.to_str().unwrap(),
        "--channel",
        "nope",
    ]);
    assert_eq!(out.status.code(), Some(2));
}
