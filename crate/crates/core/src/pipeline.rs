//! Experiment stages and the run manifest.
//!
//! Each `cmd_*` function reads its inputs from / writes its outputs to
//! `config.output.dir` and returns a [`StageReport`]. Data files depend only
//! on the configuration and seeds, never on the thread count or timing.
//! Progress goes to standard error.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::config::{CouplingSource, ExperimentConfig, SummaryFormat};
use crate::coupling::{generate_coupling, validate_coupling, CouplingMatrix};
use crate::error::Error;
use crate::io::{self, Table};
use crate::market;
use crate::panel::Panel;
use crate::series::{self, AcfCurve, DistributionStats, SeriesError, TauEstimate};
use crate::spectra::{self, SpectralTrajectory};
use crate::xcorr::{self, CorrelationMode, CorrelationSeries};

pub const PANEL_FILE: &str = "panel.csv";
pub const COUPLING_DENSE_FILE: &str = "coupling.csv";
pub const COUPLING_SPARSE_FILE: &str = "coupling_sparse.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: String,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
    pub seconds: f64,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub master_seed: u64,
    pub tool_version: String,
    pub config: ExperimentConfig,
    pub stages: Vec<StageReport>,
    pub failure: Option<StageFailure>,
}

impl RunManifest {
    pub fn new(config: &ExperimentConfig) -> Self {
        Self {
            config_hash: config.hash(),
            master_seed: config.model.master_seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            stages: Vec::new(),
            failure: None,
        }
    }

    pub fn files(&self) -> impl Iterator<Item = &str> {
        self.stages.iter().flat_map(|s| s.files.iter().map(String::as_str))
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf, Error> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }

    pub fn read(dir: &Path) -> Result<Self, Error> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Runs `f` on a rayon pool with `threads` workers (all cores if `None`).
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> T {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    builder.build().expect("thread pool").install(f)
}

/// Collects the files a stage writes.
struct Stage<'a> {
    dir: &'a Path,
    report: StageReport,
    started: Instant,
}

impl<'a> Stage<'a> {
    fn start(name: &str, dir: &'a Path) -> Result<Self, Error> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        eprintln!("[{name}] started");
        Ok(Self {
            dir,
            report: StageReport {
                stage: name.to_string(),
                files: Vec::new(),
                seconds: 0.0,
                notes: Vec::new(),
            },
            started: Instant::now(),
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), Error> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        io::write_atomic(&path, contents).map_err(|e| Error::io(&path, e))?;
        self.report.files.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, msg: String) {
        eprintln!("[{}] {msg}", self.report.stage);
        self.report.notes.push(msg);
    }

    fn finish(mut self) -> StageReport {
        self.report.seconds = self.started.elapsed().as_secs_f64();
        eprintln!("[{}] done in {:.2}s", self.report.stage, self.report.seconds);
        self.report
    }
}

fn read_text(path: &Path) -> Result<String, Error> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Loads a coupling matrix in either the dense or the sparse text format.
pub fn load_coupling(path: &Path) -> Result<CouplingMatrix, Error> {
    let text = read_text(path)?;
    let sparse = text.lines().nth(1).is_none_or(|l| l.trim() == "j,k,value");
    Ok(if sparse {
        CouplingMatrix::from_sparse_text(&text)?
    } else {
        CouplingMatrix::from_dense_csv(&text)?
    })
}

/// The coupling the configuration describes: loaded or generated, then
/// optionally symmetrized.
pub fn resolve_coupling(config: &ExperimentConfig) -> Result<CouplingMatrix, Error> {
    let gamma = match &config.coupling.source {
        CouplingSource::File(path) => load_coupling(path)?,
        CouplingSource::Generate { .. } => generate_coupling(&config.coupling_spec().expect("generate")),
    };
    Ok(if config.coupling.symmetrize {
        gamma.symmetrized()
    } else {
        gamma
    })
}

pub fn load_panel(path: &Path) -> Result<Panel, Error> {
    Ok(io::panel_from_csv(&read_text(path)?)?)
}

pub fn default_panel_path(config: &ExperimentConfig) -> PathBuf {
    config.output.dir.join(PANEL_FILE)
}

pub fn cmd_generate_coupling(config: &ExperimentConfig) -> Result<StageReport, Error> {
    let mut stage = Stage::start("generate-coupling", &config.output.dir)?;
    let gamma = resolve_coupling(config)?;
    let diag = validate_coupling(&gamma);
    stage.write(COUPLING_DENSE_FILE, &gamma.to_dense_csv())?;
    stage.write(COUPLING_SPARSE_FILE, &gamma.to_sparse_text())?;
    let diag_json = serde_json::to_string_pretty(&diag).expect("serializes") + "\n";
    stage.write("coupling_diagnostics.json", &diag_json)?;
    stage.note(format!(
        "n={} nonzero={} diagonal_zero={}",
        diag.n, diag.nonzero, diag.diagonal_zero
    ));
    Ok(stage.finish())
}

pub fn cmd_simulate(config: &ExperimentConfig) -> Result<StageReport, Error> {
    let mut stage = Stage::start("simulate", &config.output.dir)?;
    let gamma = resolve_coupling(config)?;
    let params = &config.model;
    let started = Instant::now();
    let panel = market::run_simulation(params, &gamma)?;
    let sweeps = (params.therm_sweeps + params.collect_sweeps) as f64;
    stage.note(format!(
        "{} assets, {} sweeps, {:.1} sweeps/s",
        params.assets,
        sweeps,
        sweeps / started.elapsed().as_secs_f64()
    ));
    stage.write(PANEL_FILE, &io::panel_to_csv(&panel))?;
    Ok(stage.finish())
}

/// Outputs of the single-series statistics for one panel.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesAnalysis {
    /// Assets whose return series has zero variance; excluded from every
    /// statistic below.
    pub degenerate: Vec<usize>,
    /// Asset-averaged ACF of return, |return| and return^2.
    pub acf: Option<[AcfCurve; 3]>,
    /// Per asset (non-degenerate only): tau of return, |return|, return^2.
    pub tau: Vec<(usize, [Result<TauEstimate, SeriesError>; 3])>,
    pub pooled: Option<DistributionStats>,
    pub volatility_index: Vec<f64>,
}

fn mean_acf(rows: &[Vec<f64>], max_lag: usize) -> Option<AcfCurve> {
    let curves: Vec<AcfCurve> = rows.iter().filter_map(|r| series::acf(r, max_lag).ok()).collect();
    let first = curves.first()?;
    let n = curves.len() as f64;
    let rho = (0..=max_lag)
        .map(|l| curves.iter().map(|c| c.rho[l]).sum::<f64>() / n)
        .collect();
    Some(AcfCurve {
        rho,
        noise_band: first.noise_band,
    })
}

/// Everything `analyze` writes, computed in memory.
pub fn analyze_panel(panel: &Panel, config: &ExperimentConfig) -> SeriesAnalysis {
    let a = &config.analysis;
    let (good, degenerate): (Vec<usize>, Vec<usize>) =
        (0..panel.assets()).partition(|&k| series::variance(panel.row(k)) > 0.0);
    let volatility_index = series::volatility_index(panel);
    if good.is_empty() || panel.len() < 2 {
        return SeriesAnalysis {
            degenerate: (0..panel.assets()).collect(),
            acf: None,
            tau: Vec::new(),
            pooled: None,
            volatility_index,
        };
    }
    let kinds: [Vec<Vec<f64>>; 3] = [
        good.iter().map(|&k| panel.row(k).to_vec()).collect(),
        good.iter().map(|&k| panel.row(k).iter().map(|x| x.abs()).collect()).collect(),
        good.iter().map(|&k| panel.row(k).iter().map(|x| x * x).collect()).collect(),
    ];
    let max_lag = a.max_lag.min(panel.len() - 1);
    let acf = match [0, 1, 2].map(|i| mean_acf(&kinds[i], max_lag)) {
        [Some(r), Some(b), Some(s)] => Some([r, b, s]),
        _ => None,
    };
    let tau = good
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            (
                k,
                [0, 1, 2].map(|kind| series::integrated_autocorr_time(&kinds[kind][i], a.tau_c)),
            )
        })
        .collect();
    let normalized = Panel::from_rows(
        good.iter()
            .map(|&k| series::standardize(panel.row(k)).expect("nonzero variance"))
            .collect(),
    )
    .expect("rectangular");
    let pooled = series::distribution_stats(&normalized, true, a.histogram)
        .ok()
        .and_then(|mut v| v.pop());
    SeriesAnalysis {
        degenerate,
        acf,
        tau,
        pooled,
        volatility_index,
    }
}

fn kv_text(value: &serde_json::Value) -> String {
    let mut out = String::new();
    if let serde_json::Value::Object(map) = value {
        for (k, v) in map {
            out.push_str(&format!("{k}={v}\n"));
        }
    }
    out
}

pub fn cmd_analyze(config: &ExperimentConfig, panel_path: &Path) -> Result<StageReport, Error> {
    let mut stage = Stage::start("analyze", &config.output.dir)?;
    let panel = load_panel(panel_path)?;
    let result = analyze_panel(&panel, config);
    if !result.degenerate.is_empty() {
        stage.note(format!("degenerate assets: {:?}", result.degenerate));
    }

    let mut vi = Table::new(["t", "I"]);
    for (t, &v) in result.volatility_index.iter().enumerate() {
        vi.push(vec![t as f64, v]);
    }
    stage.write("volatility_index.csv", &vi.to_csv(&["t"]))?;

    let mut acf = Table::new(["lag", "rho_ret", "rho_abs", "rho_sq"]);
    if let Some([r, b, s]) = &result.acf {
        for l in 0..r.rho.len() {
            acf.push(vec![l as f64, r.rho[l], b.rho[l], s.rho[l]]);
        }
    }
    stage.write("acf.csv", &acf.to_csv(&["lag"]))?;

    let mut tau = Table::new(["asset", "tau_ret", "err_ret", "tau_abs", "err_abs", "tau_sq", "err_sq"]);
    for (k, est) in &result.tau {
        let mut row = vec![*k as f64];
        for e in est {
            match e {
                Ok(t) => row.extend([t.tau, t.error]),
                Err(_) => row.extend([f64::NAN, f64::NAN]),
            }
        }
        tau.push(row);
    }
    stage.write("tau.csv", &tau.to_csv(&["asset"]))?;

    let mut hist = Table::new(["bin_center", "density"]);
    if let Some(p) = &result.pooled {
        for (c, d) in p.histogram.centers().into_iter().zip(p.histogram.density()) {
            hist.push(vec![c, d]);
        }
    }
    stage.write("histogram.csv", &hist.to_csv(&[]))?;

    let mean_tau = |kind: usize| {
        let ok: Vec<f64> = result
            .tau
            .iter()
            .filter_map(|(_, e)| e[kind].as_ref().ok().map(|t| t.tau))
            .collect();
        (!ok.is_empty()).then(|| series::mean(&ok))
    };
    let summary = json!({
        "assets": panel.assets(),
        "length": panel.len(),
        "degenerate_assets": result.degenerate,
        "count": result.pooled.as_ref().map(|p| p.count),
        "mean": result.pooled.as_ref().map(|p| p.mean),
        "variance": result.pooled.as_ref().map(|p| p.variance),
        "skewness": result.pooled.as_ref().map(|p| p.skewness),
        "kurtosis": result.pooled.as_ref().map(|p| p.kurtosis),
        "histogram_underflow": result.pooled.as_ref().map(|p| p.histogram.underflow),
        "histogram_overflow": result.pooled.as_ref().map(|p| p.histogram.overflow),
        "noise_band": result.acf.as_ref().map(|a| a[0].noise_band),
        "mean_tau_ret": mean_tau(0),
        "mean_tau_abs": mean_tau(1),
        "mean_tau_sq": mean_tau(2),
    });
    match config.output.summary_format {
        SummaryFormat::Json => stage.write("moments.json", &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?,
        SummaryFormat::Text => stage.write("moments.txt", &kv_text(&summary))?,
    }
    Ok(stage.finish())
}

fn mode_tag(mode: CorrelationMode) -> &'static str {
    match mode {
        CorrelationMode::Return => "ret",
        CorrelationMode::AbsoluteReturn => "abs",
    }
}

const MODES: [CorrelationMode; 2] = [CorrelationMode::Return, CorrelationMode::AbsoluteReturn];

fn correlation_manifest(series: &CorrelationSeries) -> String {
    let v = json!({
        "mode": series.spec.mode,
        "spec": series.spec,
        "window_ends": series.matrices.iter().map(|c| c.window_end).collect::<Vec<_>>(),
        "degenerate_windows": series.degenerate,
    });
    serde_json::to_string_pretty(&v).expect("json") + "\n"
}

pub fn cmd_xcorr(config: &ExperimentConfig, panel_path: &Path) -> Result<StageReport, Error> {
    let mut stage = Stage::start("xcorr", &config.output.dir)?;
    let panel = load_panel(panel_path)?;
    for mode in MODES {
        let series = xcorr::rolling_correlations(&panel, &config.window.spec(mode))?;
        let tag = mode_tag(mode);
        for c in &series.matrices {
            stage.write(&format!("xcorr_{tag}/corr_{:08}.csv", c.window_end), &c.to_csv())?;
        }
        stage.write(&format!("xcorr_{tag}.json"), &correlation_manifest(&series))?;
        if !series.degenerate.is_empty() {
            stage.note(format!("{tag}: {} degenerate (asset, window) pairs", series.degenerate.len()));
        }
    }
    Ok(stage.finish())
}

/// Correlation series and spectra for both modes.
pub fn spectra_for_panel(
    panel: &Panel,
    config: &ExperimentConfig,
) -> Result<Vec<(CorrelationSeries, SpectralTrajectory)>, Error> {
    let top_m = config.analysis.top_m.min(panel.assets());
    MODES
        .iter()
        .map(|&mode| {
            let series = xcorr::rolling_correlations(panel, &config.window.spec(mode))?;
            let traj = spectra::spectral_trajectory(&series.matrices, top_m, config.window.length)?;
            Ok((series, traj))
        })
        .collect()
}

/// Mean of the volatility index over each window `[end - M, end)`.
pub fn window_volatility(panel: &Panel, window: usize, ends: &[usize]) -> Vec<f64> {
    let vi = series::volatility_index(panel);
    ends.iter().map(|&e| series::mean(&vi[e - window..e])).collect()
}

pub fn cmd_spectra(
    config: &ExperimentConfig,
    panel_path: &Path,
    shuffle_seed: Option<u64>,
) -> Result<StageReport, Error> {
    let mut stage = Stage::start("spectra", &config.output.dir)?;
    let mut panel = load_panel(panel_path)?;
    if let Some(seed) = shuffle_seed {
        panel = series::shuffle_in_time(&panel, seed);
        stage.note(format!("time-shuffled each asset with seed {seed}"));
    }
    let results = spectra_for_panel(&panel, config)?;
    let mut flags = serde_json::Map::new();
    for ((series, traj), mode) in results.iter().zip(MODES) {
        let tag = mode_tag(mode);
        let top_m = traj.top_m;

        let mut crf = Table::new(std::iter::once("window_end".to_string()).chain((1..=top_m).map(|m| format!("CRF{m}"))));
        let mut ipr = Table::new(["window_end", "IPR1", "IPR6_1"]);
        for s in &traj.summaries {
            let mut row = vec![s.window_end as f64];
            row.extend_from_slice(&s.crf[..top_m]);
            crf.push(row);
            ipr.push(vec![s.window_end as f64, s.ipr[0], s.ipr6[0]]);
        }
        stage.write(&format!("crf_{tag}.csv"), &crf.to_csv(&["window_end"]))?;
        stage.write(&format!("ipr_{tag}.csv"), &ipr.to_csv(&["window_end"]))?;

        let mut scatter = Table::new(["window_end", "l", "lambda", "ipr"]);
        for (end, l, lambda, v) in traj.scatter() {
            scatter.push(vec![end as f64, l as f64, lambda, v]);
        }
        stage.write(&format!("scatter_{tag}.csv"), &scatter.to_csv(&["window_end", "l"]))?;

        let non_unique: Vec<serde_json::Value> = traj
            .summaries
            .iter()
            .filter(|s| s.non_unique[..top_m].iter().any(|&f| f))
            .map(|s| json!({"window_end": s.window_end, "non_unique": &s.non_unique[..top_m]}))
            .collect();
        flags.insert(
            tag.to_string(),
            json!({
                "windows": series.matrices.len(),
                "degenerate_windows": series.degenerate,
                "failures": traj.failures,
                "non_unique_eigenvectors": non_unique,
            }),
        );
        if !traj.failures.is_empty() {
            stage.note(format!("{tag}: {} windows failed", traj.failures.len()));
        }
    }

    let ends: Vec<usize> = results[0].1.summaries.iter().map(|s| s.window_end).collect();
    let mut wv = Table::new(["window_end", "I_mean"]);
    for (e, v) in ends.iter().zip(window_volatility(&panel, config.window.length, &ends)) {
        wv.push(vec![*e as f64, v]);
    }
    stage.write("window_volatility.csv", &wv.to_csv(&["window_end"]))?;

    match spectra::mp_reference(config.window.length, panel.assets()) {
        Ok(mp) => {
            let mut t = Table::new(["lambda", "rho"]);
            for (l, r) in mp.sample(config.analysis.mp_points) {
                t.push(vec![l, r]);
            }
            stage.write("mp_reference.csv", &t.to_csv(&[]))?;
            flags.insert("mp".into(), json!(mp));
        }
        Err(e) => stage.note(format!("no Marchenko-Pastur reference: {e}")),
    }
    stage.write(
        "spectra_flags.json",
        &(serde_json::to_string_pretty(&serde_json::Value::Object(flags)).expect("json") + "\n"),
    )?;
    Ok(stage.finish())
}

type StageFn<'a> = Box<dyn Fn() -> Result<StageReport, Error> + 'a>;

/// generate-coupling, simulate, analyze, spectra (and xcorr when
/// `output.write_matrices` is set). A failing stage stops the run; the
/// manifest records how far it got.
pub fn cmd_pipeline(config: &ExperimentConfig) -> (RunManifest, Result<(), Error>) {
    let mut manifest = RunManifest::new(config);
    let panel = default_panel_path(config);
    let mut stages: Vec<(&str, StageFn)> = vec![
        ("generate-coupling", Box::new(|| cmd_generate_coupling(config))),
        ("simulate", Box::new(|| cmd_simulate(config))),
        ("analyze", Box::new(|| cmd_analyze(config, &panel))),
    ];
    if config.output.write_matrices {
        stages.push(("xcorr", Box::new(|| cmd_xcorr(config, &panel))));
    }
    stages.push(("spectra", Box::new(|| cmd_spectra(config, &panel, None))));
    if let Err(e) = config.validate() {
        manifest.failure = Some(StageFailure {
            stage: "validate".into(),
            error: e.to_string(),
        });
        return (manifest, Err(e));
    }
    for (name, run) in stages {
        match run() {
            Ok(report) => manifest.stages.push(report),
            Err(e) => {
                manifest.failure = Some(StageFailure {
                    stage: name.into(),
                    error: e.to_string(),
                });
                return (manifest, Err(e));
            }
        }
    }
    (manifest, Ok(()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::desk();
        cfg.apply_toml(
            "[model]\nside = 6\nassets = 3\ntherm_sweeps = 10\ncollect_sweeps = 300\n[window]\nlength = 100\n[analysis]\nmax_lag = 20\ntop_m = 3\n",
            dir,
        )
        .unwrap();
        cfg.output.dir = dir.join("out");
        cfg
    }

    #[test]
    fn failing_stage_halts_and_is_recorded() {
        let tmp = tempfile::tempdir().unwrap();
        let bad = tmp.path().join("gamma.txt");
        fs::write(&bad, "n=3\nj,k,value\n0,9,1.0\n").unwrap();
        let mut cfg = small(tmp.path());
        cfg.coupling.source = CouplingSource::File(bad);
        let (manifest, result) = cmd_pipeline(&cfg);
        assert!(result.is_err());
        assert!(manifest.stages.is_empty());
        assert_eq!(manifest.failure.unwrap().stage, "generate-coupling");
        assert!(!cfg.output.dir.join(PANEL_FILE).exists());
    }

    #[test]
    fn invalid_config_fails_before_any_stage() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = small(tmp.path());
        cfg.analysis.top_m = 4;
        let (manifest, result) = cmd_pipeline(&cfg);
        assert_eq!(result.unwrap_err().exit_code(), 2);
        assert_eq!(manifest.failure.unwrap().stage, "validate");
        assert!(!cfg.output.dir.exists());
    }

    #[test]
    fn write_matrices_adds_the_xcorr_stage() {
        let tmp = tempfile::tempdir().unwrap();
        let mut cfg = small(tmp.path());
        cfg.output.write_matrices = true;
        let (manifest, result) = cmd_pipeline(&cfg);
        result.unwrap();
        let names: Vec<&str> = manifest.stages.iter().map(|s| s.stage.as_str()).collect();
        assert_eq!(names, ["generate-coupling", "simulate", "analyze", "xcorr", "spectra"]);
        assert!(cfg.output.dir.join("xcorr_ret/corr_00000300.csv").is_file());
    }

    #[test]
    fn constant_assets_are_reported_and_skipped() {
        let rows = vec![
            (0..50).map(|t| ((t * 7 % 11) as f64 - 5.0) / 100.0).collect(),
            vec![0.0; 50],
            (0..50).map(|t| ((t * 3 % 7) as f64 - 3.0) / 100.0).collect(),
        ];
        let panel = Panel::from_rows(rows).unwrap();
        let mut cfg = ExperimentConfig::desk();
        cfg.analysis.max_lag = 200;
        let a = analyze_panel(&panel, &cfg);
        assert_eq!(a.degenerate, [1]);
        assert_eq!(a.tau.iter().map(|(k, _)| *k).collect::<Vec<_>>(), [0, 2]);
        assert_eq!(a.acf.unwrap()[0].rho.len(), 50);
        assert_eq!(a.pooled.unwrap().count, 100);
    }

    #[test]
    fn window_volatility_averages_the_index() {
        let panel = Panel::from_rows(vec![vec![0.1, -0.3, 0.2, 0.0], vec![-0.1, 0.1, 0.0, 0.4]]).unwrap();
        let v = window_volatility(&panel, 2, &[2, 4]);
        assert!((v[0] - 0.15).abs() < 1e-15);
        assert!((v[1] - 0.15).abs() < 1e-15);
    }
}
