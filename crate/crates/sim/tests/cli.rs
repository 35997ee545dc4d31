use std::fs;
use std::path::{Path, PathBuf};

use semagg::cli::run;
use semagg::config::parse_config_str;
use semagg::harness::{experiment_nmse_vs_sensors, Scheme};
use semagg::io::{read_gain, read_results};
use semagg_core::Matrix;
use tempfile::TempDir;

const SCALAR: &str = "plant = custom\na = [[0.95]]\nw = [[1]]\ntopology = sequential\nsensors = 6\nn_r = 1\nn_t = 1\n\
channel = rayleigh\nrayleigh_scale = 3\nsnr_db = 12.5\np = 0.3\nhorizon = 40\nn_runs = 4\nseed = 9\n\
cssca_iters = 100\ncssca_eps0 = auto\ncssca_eps1 = auto\ncurvature_samples = 500\nvalidation_samples = 2000\n";

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn invoke(args: &[&str], config: &Path, out: &Path) -> i32 {
    let mut argv = vec!["semagg"];
    argv.extend_from_slice(args);
    argv.extend([
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--threads",
        "2",
    ]);
    run(argv)
}

fn read_dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn data_lines(path: &Path) -> Vec<String> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(str::to_string)
        .collect()
}

#[test]
fn zero_iterations_return_the_initial_gain() {
    let dir = TempDir::new().unwrap();
    let text = SCALAR.replace("cssca_iters = 100", "cssca_iters = 0\nk_init = [[0.4375]]");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(invoke(&["optimize-gain"], &cfg, &out), 0);
    assert_eq!(
        read_gain(&out.join("gain.txt")).unwrap(),
        Matrix::from_rows(&[&[0.4375]]).unwrap()
    );
    assert_eq!(data_lines(&out.join("gain_trace.csv")).len(), 0);
}

#[test]
fn optimizer_trace_has_one_row_per_iteration() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let out = dir.path().join("out");
    assert_eq!(invoke(&["optimize-gain"], &cfg, &out), 0);
    let text = fs::read_to_string(out.join("gain_trace.csv")).unwrap();
    assert!(text.starts_with("r,f0_hat,f1_hat,step_norm,feasibility_flag\n"));
    assert_eq!(text.lines().count(), 101);
    assert!(fs::read_to_string(out.join("stability.txt"))
        .unwrap()
        .contains("stable = "));
}

#[test]
fn repeated_invocations_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let text = format!("{SCALAR}m_values = [3, 6]\n");
    let cfg = write_config(dir.path(), &text);
    for cmd in [
        &["optimize-gain"][..],
        &["simulate"],
        &["experiment", "fig2"],
        &["experiment", "fig3"],
    ] {
        let a = dir.path().join(format!("a-{}", cmd.join("-")));
        let b = dir.path().join(format!("b-{}", cmd.join("-")));
        assert_eq!(invoke(cmd, &cfg, &a), 0);
        assert_eq!(invoke(cmd, &cfg, &b), 0);
        assert_eq!(read_dir_bytes(&a), read_dir_bytes(&b), "{cmd:?}");
    }
}

#[test]
fn seed_flag_overrides_config_and_is_recorded() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), SCALAR);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert_eq!(invoke(&["simulate"], &cfg, &a), 0);
    assert_eq!(invoke(&["simulate", "--seed", "12345"], &cfg, &b), 0);
    let manifest = fs::read_to_string(b.join("manifest.txt")).unwrap();
    assert!(manifest.contains("seed = 12345\n"), "{manifest}");
    assert!(manifest.contains("command = simulate\n"));
    assert_ne!(
        fs::read(a.join("simulate.csv")).unwrap(),
        fs::read(b.join("simulate.csv")).unwrap()
    );
}

#[test]
fn fig3_has_one_row_per_slot_and_scheme() {
    let dir = TempDir::new().unwrap();
    let text = "plant = eq22\ntopology = sequential\nsensors = 6\nn_r = 3\nn_t = 3\nchannel = rayleigh\n\
rayleigh_scale = 3\nsnr_db = 12.5\np = 0.3\nhorizon = 300\nn_runs = 2\nseed = 4\ncssca_iters = 50\n";
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    assert_eq!(invoke(&["experiment", "fig3"], &cfg, &out), 0);
    let lines = data_lines(&out.join("fig3.csv"));
    assert_eq!(lines.len(), 4 * 300);
    for scheme in Scheme::ALL {
        let rows: Vec<_> = lines.iter().filter(|l| l.starts_with(&format!("{scheme},"))).collect();
        assert_eq!(rows.len(), 300, "{scheme}");
    }
    let proposed: Vec<_> = read_results(&out.join("fig3.csv"))
        .unwrap()
        .into_iter()
        .filter(|r| r.scheme == "proposed")
        .collect();
    assert!(proposed.windows(2).all(|w| w[1].mean >= w[0].mean));
}

#[test]
fn fig2_with_one_size_and_scheme_is_a_single_row() {
    let dir = TempDir::new().unwrap();
    let text = format!("{SCALAR}m_values = [6]\nschemes = aloha\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(invoke(&["experiment", "fig2"], &cfg, &out), 0);
    let text = fs::read_to_string(out.join("fig2.csv")).unwrap();
    assert!(text.starts_with("scheme,M,metric,mean,std_err,n_runs,seed\n"));
    assert_eq!(data_lines(&out.join("fig2.csv")).len(), 1);
}

#[test]
fn csv_values_round_trip_exactly() {
    let dir = TempDir::new().unwrap();
    let text = format!("{SCALAR}m_values = [3, 6]\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(invoke(&["experiment", "fig2"], &cfg, &out), 0);

    let rc = parse_config_str(&text).unwrap();
    let direct = experiment_nmse_vs_sensors(&rc.setup(), &[3, 6], &rc.schemes, rc.n_runs).unwrap();
    let parsed = read_results(&out.join("fig2.csv")).unwrap();
    assert_eq!(parsed.len(), direct.len());
    for (p, d) in parsed.iter().zip(&direct) {
        assert_eq!(p.mean.to_bits(), d.mean.to_bits());
        assert_eq!(p.std_err.to_bits(), d.std_err.to_bits());
        assert_eq!((p.x, p.n_runs, p.seed), (d.x, d.n_runs, d.seed));
    }
}

#[test]
fn simulate_writes_one_trace_row_per_slot() {
    let dir = TempDir::new().unwrap();
    let text = SCALAR
        .replace("horizon = 40", "horizon = 10")
        .replace("n_runs = 4", "n_runs = 1");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(invoke(&["simulate"], &cfg, &out), 0);
    for scheme in Scheme::ALL {
        assert_eq!(
            data_lines(&out.join(format!("trace_{scheme}.csv"))).len(),
            10,
            "{scheme}"
        );
    }
    assert_eq!(data_lines(&out.join("simulate.csv")).len(), 8);
}

#[test]
fn fig4_produces_a_row_per_dimension_and_scheme() {
    let dir = TempDir::new().unwrap();
    let text =
        format!("{SCALAR}s_values = [2, 4]\ncpu_slots = 50\ncpu_reps = 1\ncpu_warmup = 5\ncpu_design_iters = 5\n")
            .replace("topology = sequential", "topology = gaussian");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert_eq!(invoke(&["experiment", "fig4"], &cfg, &out), 0);
    let rows = read_results(&out.join("fig4.csv")).unwrap();
    assert_eq!(rows.len(), 8);
    assert!(rows.iter().all(|r| r.metric == "wall_time_s" && r.mean >= 0.0));
}

#[test]
fn exit_codes_and_cleanup() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");

    let cfg = write_config(dir.path(), &SCALAR.replace("p = 0.3", "p = 1.5"));
    assert_eq!(invoke(&["simulate"], &cfg, &out), 2);
    assert!(!out.exists());

    let cfg = write_config(dir.path(), SCALAR);
    assert_eq!(invoke(&["experiment", "fig2"], &cfg, &out), 2, "m_values is required");

    // An explicit topology only fits its own sensor count, so M = 2 fails mid-run.
    let text = SCALAR
        .replace(
            "topology = sequential",
            "topology = explicit\nc = [[[1]], [[1]], [[1]], [[1]], [[1]], [[1]]]",
        )
        .replace("n_runs = 4", "n_runs = 1")
        + "m_values = [6, 2]\n";
    let cfg = write_config(dir.path(), &text);
    assert_eq!(invoke(&["experiment", "fig2"], &cfg, &out), 3);
    assert!(!out.exists(), "partial output left behind");
}

#[test]
fn binary_reports_exit_codes() {
    let status = std::process::Command::new(env!("CARGO_BIN_EXE_semagg"))
        .args(["simulate", "--config", "/nonexistent.conf"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&status.stderr).contains("nonexistent"));
}
