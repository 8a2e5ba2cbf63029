//! End-to-end runs of the `qoct` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use qoct_cli::Config;

fn configs() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn qoct(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qoct"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .arg("--quiet")
        .env_remove("QOCT_THREADS")
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

/// Small Monte Carlo setup, fast enough for a debug build.
const SMALL_MC: &str = "[source]\nmodel = coherent\ncenter_wavelength_nm = 1550\nsigma_nm = 20\nalpha = 0.1\n\
[grid]\nspan_nm = 100\npoints = 32\n[mirror]\nopd_um = 20\n[fiber_a]\nlength_km = 5\n[fiber_b]\nlength_km = 5\n\
[run]\nn_pulses = 20000\nseed = 4\n";

fn hash_of(config: &Path) -> String {
    Config::load(config).unwrap().hash
}

#[test]
fn simulate_joint_is_deterministic_and_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("fig5a.conf");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(qoct(&["simulate-joint"], &cfg, &a).status.success());
    assert!(qoct(&["simulate-joint"], &cfg, &b).status.success());
    let ja = std::fs::read(a.join("joint.csv")).unwrap();
    assert_eq!(ja, std::fs::read(b.join("joint.csv")).unwrap());
    let text = String::from_utf8(ja).unwrap();
    assert!(text.contains(&format!("# config_hash={}", hash_of(&cfg))));
    assert!(text.contains("# kind=probability"));
}

#[test]
fn perfect_mirror_at_zero_depth_gives_zero_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "flat.conf",
        "[source]\nmodel = coherent\ncenter_wavelength_nm = 1550\nsigma_nm = 40\n[grid]\nspan_nm = 115\npoints = 16\n[mirror]\nopd_um = 0\n",
    );
    assert!(qoct(&["simulate-joint"], &cfg, dir.path()).status.success());
    let js = qoct_cli::commands::read_joint(&dir.path().join("joint.csv")).unwrap();
    assert!(js.max() < 1e-15, "{}", js.max());
}

#[test]
fn zero_pulses_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "zero.conf", &SMALL_MC.replace("n_pulses = 20000", "n_pulses = 0"));
    let out = qoct(&["simulate-tags"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(!dir.path().join("tags.qtag").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let unknown = write_config(dir.path(), "u.conf", &SMALL_MC.replace("seed = 4", "sead = 4"));
    assert_eq!(qoct(&["simulate-tags"], &unknown, dir.path()).status.code(), Some(2));
    let missing = dir.path().join("nope.conf");
    assert_eq!(qoct(&["simulate-joint"], &missing, dir.path()).status.code(), Some(2));
    let no_run = write_config(dir.path(), "r.conf", SMALL_MC.split("[run]").next().unwrap());
    assert_eq!(qoct(&["simulate-tags"], &no_run, dir.path()).status.code(), Some(2));
    let threads = Command::new(env!("CARGO_BIN_EXE_qoct"))
        .args(["simulate-joint", "--quiet", "--config"])
        .arg(configs().join("fig5a.conf"))
        .arg("--out")
        .arg(dir.path())
        .env("QOCT_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(threads.status.code(), Some(2));
}

#[test]
fn tags_round_trip_through_process_tags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mc.conf", SMALL_MC);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(qoct(&["simulate-tags"], &cfg, &a).status.success());
    assert!(qoct(&["simulate-tags"], &cfg, &b).status.success());
    let tags = std::fs::read(a.join("tags.qtag")).unwrap();
    assert_eq!(tags, std::fs::read(b.join("tags.qtag")).unwrap());
    let meta = std::fs::read_to_string(a.join("tags.qtag.meta")).unwrap();
    assert!(meta.contains(&format!("config_hash={}", hash_of(&cfg))));
    assert!(meta.contains("n_pulses=20000"));

    let c = dir.path().join("c");
    assert!(qoct(&["simulate-tags", "--seed", "5"], &cfg, &c).status.success());
    assert_ne!(tags, std::fs::read(c.join("tags.qtag")).unwrap());

    assert!(qoct(&["process-tags"], &cfg, &a).status.success());
    let js = qoct_cli::commands::read_joint(&a.join("joint_mc.csv")).unwrap();
    assert_eq!(js.metadata.get("n_pulses").map(String::as_str), Some("20000"));
    let config = Config::load(&cfg).unwrap();
    let expected = qoct_cli::commands::expected_pair_spectrum(&config).unwrap();
    let tv = qoct_core::analysis::total_variation(&js, &expected).unwrap();
    assert!(tv < 0.02, "TV {tv}");
}

#[test]
fn corrupt_tag_file_is_a_data_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "mc.conf", SMALL_MC);
    assert!(qoct(&["simulate-tags"], &cfg, dir.path()).status.success());
    let p = dir.path().join("tags.qtag");
    let mut bytes = std::fs::read(&p).unwrap();
    bytes.truncate(bytes.len() - 3);
    std::fs::write(&p, bytes).unwrap();
    let out = qoct(&["process-tags"], &cfg, dir.path());
    assert_eq!(out.status.code(), Some(3));
    assert!(!dir.path().join("joint_mc.csv").exists());
}

#[test]
fn reconstruct_writes_ascan_and_bscan() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("mirror273.conf");
    assert!(qoct(&["simulate-joint"], &cfg, dir.path()).status.success());
    let joint = dir.path().join("joint.csv");
    let joint_s = joint.to_str().unwrap();
    assert!(qoct(&["reconstruct", "--input", joint_s], &cfg, dir.path()).status.success());
    let ascan = std::fs::read_to_string(dir.path().join("ascan_row.csv")).unwrap();
    let pos: f64 = ascan
        .lines()
        .find_map(|l| l.strip_prefix("# peak_position_um="))
        .unwrap()
        .parse()
        .unwrap();
    assert!((pos - 273.0).abs() < 10.0, "{pos}");

    let out = qoct(&["reconstruct", "--mode", "diagonal", "--input", joint_s, "--input", joint_s], &cfg, dir.path());
    assert!(out.status.success());
    let pgm = std::fs::read(dir.path().join("bscan_diagonal.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n"));
    let header = String::from_utf8_lossy(&pgm[..400.min(pgm.len())]).to_string();
    assert!(header.contains(&hash_of(&cfg)));
    assert!(dir.path().join("bscan_diagonal.csv").exists());
}

#[test]
fn glass_stack_bscan_from_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("glass_stack.conf");
    assert!(qoct(&["reconstruct"], &cfg, dir.path()).status.success());
    let csv = std::fs::read_to_string(dir.path().join("bscan_column.csv")).unwrap();
    let header = csv.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header.split(',').count(), 11);
}

#[test]
fn rolloff_curve_is_monotone_with_finite_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("rolloff.conf");
    assert!(qoct(&["rolloff"], &cfg, dir.path()).status.success());
    let text = std::fs::read_to_string(dir.path().join("rolloff.csv")).unwrap();
    let range = text.lines().find_map(|l| l.strip_prefix("# six_db_range_um=")).unwrap();
    assert!(range.parse::<f64>().is_ok(), "{range}");
    let db: Vec<f64> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse().unwrap())
        .collect();
    assert_eq!(db.len(), 10);
    assert!(db.windows(2).all(|w| w[1] <= w[0]));
}

#[test]
fn compare_reports_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_qoct"))
        .args(["compare", "--config"])
        .arg(configs().join("compare.conf"))
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success());
    let stdout = String::from_utf8(out.stdout).unwrap();
    let ratio: f64 = stdout
        .lines()
        .find_map(|l| l.strip_prefix("resolution_ratio="))
        .unwrap()
        .parse()
        .unwrap();
    assert!(ratio < 0.55);
    let file = std::fs::read_to_string(dir.path().join("compare.txt")).unwrap();
    assert!(file.starts_with("config_hash="));
}

#[test]
fn shipped_configs_parse() {
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        Config::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
    }
}
