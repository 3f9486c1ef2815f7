use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use ising_market::io::{self, Table};
use ising_market::panel::Panel;
use ising_market::pipeline::RunManifest;
use ising_market::xcorr::CorrelationMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

const SMALL: &str = "\
[model]
side = 8
assets = 6
therm_sweeps = 50
collect_sweeps = 800
[window]
length = 200
[analysis]
max_lag = 50
";

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ising-market"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.toml");
    fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn data_files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "manifest.json" {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn pipeline_into(tmp: &TempDir, name: &str, extra: &[&str]) -> PathBuf {
    let cfg = write_config(tmp.path(), SMALL);
    let out = tmp.path().join(name);
    let mut args = vec!["--preset", "desk", "--config", s(&cfg), "--out", s(&out)];
    args.extend_from_slice(extra);
    args.push("pipeline");
    let o = run(&args);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    out
}

#[test]
fn pipeline_reruns_are_byte_identical_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let a = pipeline_into(&tmp, "a", &["--threads", "1"]);
    let b = pipeline_into(&tmp, "b", &["--threads", "1"]);
    let c = pipeline_into(&tmp, "c", &["--threads", "3"]);
    let fa = data_files(&a);
    assert!(fa.len() > 10);
    assert_eq!(fa, data_files(&b));
    assert_eq!(fa, data_files(&c));
    let d = pipeline_into(&tmp, "d", &["--seed", "99"]);
    let panel = |dir: &Path| fs::read(dir.join("panel.csv")).unwrap();
    assert_ne!(panel(&a), panel(&d));
}

#[test]
fn manifest_lists_every_stage_and_file() {
    let tmp = TempDir::new().unwrap();
    let out = pipeline_into(&tmp, "out", &[]);
    let m = RunManifest::read(&out).unwrap();
    assert!(m.failure.is_none());
    let stages: Vec<&str> = m.stages.iter().map(|s| s.stage.as_str()).collect();
    assert_eq!(stages, ["generate-coupling", "simulate", "analyze", "spectra"]);
    let listed: Vec<&str> = m.files().collect();
    for f in &listed {
        assert!(out.join(f).is_file(), "{f} listed but missing");
    }
    for f in data_files(&out).iter().map(|(f, _)| f) {
        assert!(listed.contains(&f.as_str()), "{f} written but not listed");
    }
    for f in ["panel.csv", "acf.csv", "tau.csv", "histogram.csv", "crf_ret.csv", "ipr_abs.csv", "mp_reference.csv"] {
        assert!(listed.contains(&f));
    }
    assert!(!out.join("panel.csv.partial").exists());
}

#[test]
fn emitted_files_parse_back() {
    let tmp = TempDir::new().unwrap();
    let out = pipeline_into(&tmp, "out", &[]);
    let cfg = write_config(tmp.path(), SMALL);
    assert!(run(&["--preset", "desk", "--config", s(&cfg), "--out", s(&out), "xcorr"]).status.success());

    let text = fs::read_to_string(out.join("panel.csv")).unwrap();
    let panel = io::panel_from_csv(&text).unwrap();
    assert_eq!((panel.assets(), panel.len()), (6, 800));
    assert_eq!(io::panel_to_csv(&panel), text);

    let acf = Table::from_csv(&fs::read_to_string(out.join("acf.csv")).unwrap()).unwrap();
    assert_eq!(acf.column("lag").unwrap().len(), 51);
    assert_eq!(acf.column("rho_ret").unwrap()[0], 1.0);

    let crf = Table::from_csv(&fs::read_to_string(out.join("crf_ret.csv")).unwrap()).unwrap();
    assert_eq!(crf.column("window_end").unwrap(), [200.0, 400.0, 600.0, 800.0]);

    let corr_text = fs::read_to_string(out.join("xcorr_abs/corr_00000400.csv")).unwrap();
    let c = CorrelationMatrix::from_csv(&corr_text, 400).unwrap();
    assert_eq!(c.n(), 6);
    assert_eq!(c.to_csv(), corr_text);
}

#[test]
fn full_scale_preset_is_the_default_and_validates_without_running() {
    let o = run(&["--preset", "paper", "validate"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).starts_with("ok "));
    assert_eq!(run(&["validate"]).stdout, o.stdout);
    assert_ne!(run(&["--preset", "desk", "validate"]).stdout, o.stdout);
}

#[test]
fn config_errors_exit_2() {
    let tmp = TempDir::new().unwrap();
    let unknown = write_config(tmp.path(), "[model]\nlattice = 3\n");
    assert_eq!(run(&["--preset", "desk", "--config", s(&unknown), "validate"]).status.code(), Some(2));
    let bad = write_config(tmp.path(), "[model]\nbeta = -1.0\n");
    assert_eq!(run(&["--preset", "desk", "--config", s(&bad), "validate"]).status.code(), Some(2));
    assert_eq!(run(&["--config", "/nonexistent.toml", "validate"]).status.code(), Some(2));
    assert_eq!(run(&["--threads", "0", "validate"]).status.code(), Some(2));
}

#[test]
fn runtime_errors_exit_3() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["--out", s(&out), "analyze", "--panel", "/nonexistent/panel.csv"]);
    assert_eq!(o.status.code(), Some(3));
    let garbage = tmp.path().join("garbage.csv");
    fs::write(&garbage, "t,a0\n0,not-a-number\n").unwrap();
    let o = run(&["--out", s(&out), "spectra", "--panel", s(&garbage)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn full_scale_coupling_has_8970_entries() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = run(&["--preset", "paper", "--out", s(&out), "generate-coupling"]);
    assert!(o.status.success());
    let sparse = fs::read_to_string(out.join("coupling_sparse.txt")).unwrap();
    let mut lines = sparse.lines();
    assert_eq!(lines.next(), Some("n=300"));
    assert_eq!(lines.next(), Some("j,k,value"));
    let triplets: Vec<&str> = lines.collect();
    assert_eq!(triplets.len(), 8970);
    assert!(triplets.iter().all(|l| {
        let f: Vec<&str> = l.split(',').collect();
        f.len() == 3 && f[0] != f[1]
    }));
    let diag: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("coupling_diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["nonzero"], 8970);
}

#[test]
fn zero_density_coupling_is_empty_and_loadable() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}[coupling]\ndensity = 0.0\n"));
    let out = tmp.path().join("out");
    assert!(run(&["--preset", "desk", "--config", s(&cfg), "--out", s(&out), "generate-coupling"]).status.success());
    let sparse = fs::read_to_string(out.join("coupling_sparse.txt")).unwrap();
    assert_eq!(sparse.lines().count(), 2);

    let reuse = write_config(
        tmp.path(),
        &format!("{SMALL}[coupling]\npath = \"out/coupling_sparse.txt\"\n"),
    );
    assert!(run(&["--preset", "desk", "--config", s(&reuse), "--out", s(&out), "simulate"]).status.success());
}

fn gaussian_panel(assets: usize, len: usize, seed: u64) -> Panel {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let rows = (0..assets)
        .map(|_| (0..len).map(|_| rng.random_range(-0.5..0.5)).collect())
        .collect();
    Panel::from_rows(rows).unwrap()
}

#[test]
fn single_window_when_length_equals_window() {
    let tmp = TempDir::new().unwrap();
    let panel = tmp.path().join("panel.csv");
    fs::write(&panel, io::panel_to_csv(&gaussian_panel(5, 200, 1))).unwrap();
    let out = tmp.path().join("out");
    let o = run(&["--preset", "desk", "--out", s(&out), "spectra", "--panel", s(&panel)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    for f in ["crf_ret.csv", "crf_abs.csv", "ipr_ret.csv"] {
        let t = Table::from_csv(&fs::read_to_string(out.join(f)).unwrap()).unwrap();
        assert_eq!(t.column("window_end").unwrap(), [200.0]);
    }
}

#[test]
fn spectra_emits_marchenko_pastur_edges() {
    let tmp = TempDir::new().unwrap();
    let panel = tmp.path().join("panel.csv");
    fs::write(&panel, io::panel_to_csv(&gaussian_panel(300, 400, 2))).unwrap();
    let cfg = write_config(tmp.path(), "[window]\nlength = 400\n");
    let out = tmp.path().join("out");
    let o = run(&["--preset", "desk", "--config", s(&cfg), "--out", s(&out), "spectra", "--panel", s(&panel)]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let flags: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("spectra_flags.json")).unwrap()).unwrap();
    let plus = flags["mp"]["lambda_plus"].as_f64().unwrap();
    let minus = flags["mp"]["lambda_minus"].as_f64().unwrap();
    assert!((plus - 3.482).abs() < 5e-4, "{plus}");
    assert!((minus - 0.01795).abs() < 5e-6, "{minus}");
    let mp = Table::from_csv(&fs::read_to_string(out.join("mp_reference.csv")).unwrap()).unwrap();
    let lambda = mp.column("lambda").unwrap();
    assert_eq!(lambda.len(), 512);
    assert!(lambda.iter().all(|&l| (minus..=plus).contains(&l)));
}

#[test]
fn shuffled_spectra_run_and_report_the_seed() {
    let tmp = TempDir::new().unwrap();
    let out = pipeline_into(&tmp, "out", &[]);
    let cfg = write_config(tmp.path(), SMALL);
    let o = run(&["--preset", "desk", "--config", s(&cfg), "--out", s(&out), "spectra", "--shuffle-seed", "5"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("seed 5"));
    assert!(o.stdout.is_empty(), "data goes to files, not stdout");
    let m = RunManifest::read(&out).unwrap();
    assert_eq!(m.stages.iter().filter(|s| s.stage == "spectra").count(), 1);
}
