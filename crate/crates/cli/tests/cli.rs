use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BASE: &str = "[geometry]\ndim = 1\nlengths = [1.0]\n";

fn platelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_platelab"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_with(toml: &str, cmd: &str, dir: &Path) -> Output {
    let cfg = dir.join("cfg.toml");
    fs::write(&cfg, toml).unwrap();
    let out = dir.join("out");
    platelab(&[cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()])
}

fn csv_rows(path: &Path) -> Vec<Vec<f64>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').filter_map(|c| c.parse().ok()).collect())
        .collect()
}

#[test]
fn full_damping_spectrum_has_every_root_and_the_right_abscissa() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!("{BASE}[damping]\nd = 1.0\nell = 1.0\n[discretization]\nn_modes = 64\n");
    let o = run_with(&toml, "spectrum", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("out/spectrum.csv"));
    assert_eq!(rows.len(), 128);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("out/spectrum.json")).unwrap()).unwrap();
    let abscissa = json["spectral_abscissa"].as_f64().unwrap();
    let target = -std::f64::consts::PI.powi(2) / 2.0;
    assert!((abscissa - target).abs() < 1e-8 * target.abs());
}

#[test]
fn undamped_simulation_conserves_energy() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!(
        "{BASE}[damping]\nd = 0.0\nell = 0.0\n[discretization]\nn_modes = 16\n[simulate]\nt_final = 10.0\nsamples = 100\nwindow = [1.0, 10.0]\n"
    );
    let o = run_with(&toml, "simulate", dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&dir.path().join("out/trace.csv"));
    assert_eq!(rows.len(), 101);
    let e0 = rows[0][1];
    for r in &rows {
        assert!((r[1] - e0).abs() <= 1e-10 * e0);
    }
}

#[test]
fn config_errors_exit_1_and_write_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!("{BASE}[damping]\nd = 1.0\nell = 1.5\n[discretization]\nn_modes = 8\n");
    let o = run_with(&toml, "spectrum", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("damping.ell"));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn unknown_keys_are_named() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!("{BASE}[damping]\nd = 1.0\nell = 0.3\ncoeff = 2\n");
    let o = run_with(&toml, "spectrum", dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("coeff"));
}

#[test]
fn commands_other_than_verify_need_a_config() {
    let dir = tempfile::tempdir().unwrap();
    let o = platelab(&["sweep", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn shift_on_the_spectrum_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // with no damping, μ = π² is the first eigenfrequency
    let toml = format!(
        "{BASE}[damping]\nd = 0.0\nell = 0.0\n[discretization]\nn_modes = 8\n[resolvent_case]\nmu = [{}]\n",
        std::f64::consts::PI.powi(2)
    );
    let o = run_with(&toml, "resolvent-case", dir.path());
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!dir.path().join("out").exists());
}

#[test]
fn seed_flag_changes_simulated_data() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        format!(
            "{BASE}[damping]\nd = 1.0\nell = 0.3\n[discretization]\nn_modes = 8\n[simulate]\nt_final = 2.0\nsamples = 20\nwindow = [0.5, 2.0]\n"
        ),
    )
    .unwrap();
    let trace = |seed: &str, name: &str| {
        let out = dir.path().join(name);
        let o = platelab(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--seed",
            seed,
        ]);
        assert_eq!(o.status.code(), Some(0));
        fs::read_to_string(out.join("trace.csv")).unwrap()
    };
    assert_ne!(trace("1", "a"), trace("2", "b"));
    assert_eq!(trace("1", "c"), trace("1", "d"));
}

#[test]
fn plot_data_is_opt_in() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    fs::write(
        &cfg,
        format!("{BASE}[damping]\nd = 1.0\nell = 0.3\n[discretization]\nn_modes = 8\n"),
    )
    .unwrap();
    for (flag, expect) in [(false, false), (true, true)] {
        let out = dir.path().join(format!("o{flag}"));
        let mut args = vec![
            "spectrum",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        if flag {
            args.push("--plot-data");
        }
        assert_eq!(platelab(&args).status.code(), Some(0));
        assert_eq!(out.join("spectrum.dat").exists(), expect);
    }
}
