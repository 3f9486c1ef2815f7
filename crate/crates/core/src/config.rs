//! Experiment configuration.
//!
//! A config starts from a preset ([`Preset::Paper`] or [`Preset::Desk`]),
//! then takes overrides from a TOML file whose every key is optional:
//!
//! ```toml
//! [model]
//! side = 32            # lattice side L
//! assets = 20          # N
//! j = 1.0
//! alpha = 60.0
//! beta = 2.3
//! therm_sweeps = 1000
//! collect_sweeps = 10000
//! seed = 1
//!
//! [coupling]
//! density = 0.1
//! mean = 0.05
//! variance = 0.01      # variance, not standard deviation
//! seed = 7             # defaults to the model seed
//! # path = "coupling_sparse.txt"   # load instead of generating
//! symmetrize = false
//!
//! [window]
//! length = 200
//! stride = 200            # defaults to length
//! normalization = "window"   # or "global"
//!
//! [analysis]
//! max_lag = 200
//! top_m = 5
//! histogram_bins = 81
//! histogram_range = 10.0
//! tau_c = 5.0
//! mp_points = 512
//!
//! [output]
//! dir = "out"
//! write_matrices = false
//! summary_format = "json"    # or "text"
//!
//! [run]
//! threads = 4
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::coupling::CouplingSpec;
use crate::error::Error;
use crate::market::ModelParams;
use crate::series::HistogramSpec;
use crate::xcorr::{CorrelationMode, Normalization, WindowSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    Paper,
    Desk,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSource {
    Generate {
        density: f64,
        mean: f64,
        variance: f64,
        /// `None` means "use the model's master seed".
        seed: Option<u64>,
    },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSettings {
    pub source: CouplingSource,
    pub symmetrize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowSettings {
    pub length: usize,
    /// `None` means non-overlapping windows (stride = length).
    pub stride: Option<usize>,
    pub normalization: Normalization,
}

impl WindowSettings {
    pub fn spec(&self, mode: CorrelationMode) -> WindowSpec {
        WindowSpec {
            window: self.length,
            stride: self.stride.unwrap_or(self.length),
            mode,
            normalization: self.normalization,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub max_lag: usize,
    pub top_m: usize,
    pub histogram: HistogramSpec,
    /// Window constant `c` of the integrated autocorrelation time.
    pub tau_c: f64,
    pub mp_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryFormat {
    Json,
    Text,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputSettings {
    pub dir: PathBuf,
    pub write_matrices: bool,
    pub summary_format: SummaryFormat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub preset: Preset,
    pub model: ModelParams,
    pub coupling: CouplingSettings,
    pub window: WindowSettings,
    pub analysis: AnalysisSettings,
    pub output: OutputSettings,
    /// Worker threads; `None` uses every available core.
    pub threads: Option<usize>,
}

impl ExperimentConfig {
    pub fn preset(preset: Preset) -> Self {
        let (model, window, max_lag) = match preset {
            Preset::Paper => (ModelParams::full_scale(), 400, 1000),
            Preset::Desk => (ModelParams::desk(), 200, 200),
        };
        Self {
            preset,
            model,
            coupling: CouplingSettings {
                source: CouplingSource::Generate {
                    density: 0.10,
                    mean: 0.05,
                    variance: 0.01,
                    seed: None,
                },
                symmetrize: false,
            },
            window: WindowSettings {
                length: window,
                stride: None,
                normalization: Normalization::Window,
            },
            analysis: AnalysisSettings {
                max_lag,
                top_m: 5,
                histogram: HistogramSpec::default(),
                tau_c: 5.0,
                mp_points: 512,
            },
            output: OutputSettings {
                dir: PathBuf::from("out"),
                write_matrices: false,
                summary_format: SummaryFormat::Json,
            },
            threads: None,
        }
    }

    pub fn full_scale() -> Self {
        Self::preset(Preset::Paper)
    }

    pub fn desk() -> Self {
        Self::preset(Preset::Desk)
    }

    /// Applies the overrides in a TOML document. Relative coupling paths are
    /// resolved against `base_dir`.
    pub fn apply_toml(&mut self, text: &str, base_dir: &Path) -> Result<(), Error> {
        let file: ConfigFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.apply(self, base_dir);
        Ok(())
    }

    pub fn load(preset: Preset, path: &Path) -> Result<Self, Error> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::preset(preset);
        cfg.apply_toml(&text, path.parent().unwrap_or(Path::new(".")))?;
        Ok(cfg)
    }

    pub fn coupling_spec(&self) -> Option<CouplingSpec> {
        match &self.coupling.source {
            CouplingSource::Generate {
                density,
                mean,
                variance,
                seed,
            } => Some(CouplingSpec {
                n: self.model.assets,
                density: *density,
                mean: *mean,
                variance: *variance,
                seed: seed.unwrap_or(self.model.master_seed),
            }),
            CouplingSource::File(_) => None,
        }
    }

    /// Checks every downstream precondition before any work starts.
    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::Config(m));
        self.model.validate().map_err(|e| Error::Config(e.to_string()))?;
        match &self.coupling.source {
            CouplingSource::File(p) => {
                if !p.is_file() {
                    return bad(format!("coupling file {} not found", p.display()));
                }
            }
            CouplingSource::Generate { .. } => {
                self.coupling_spec()
                    .expect("generate source")
                    .validate()
                    .map_err(|e| Error::Config(e.to_string()))?;
            }
        }
        let w = &self.window;
        if w.length < 1 || w.stride == Some(0) {
            return bad("window length and stride must be at least 1".into());
        }
        let t = self.model.collect_sweeps;
        if w.length > t {
            return bad(format!("window length {} exceeds collect_sweeps {t}", w.length));
        }
        let a = &self.analysis;
        if a.max_lag < 1 || a.max_lag >= t {
            return bad(format!("max_lag {} must be in 1..{t}", a.max_lag));
        }
        if a.top_m < 1 || a.top_m > self.model.assets {
            return bad(format!("top_m {} must be in 1..={}", a.top_m, self.model.assets));
        }
        a.histogram.validate().map_err(|e| Error::Config(e.to_string()))?;
        if !(a.tau_c > 0.0 && a.tau_c.is_finite()) {
            return bad("tau_c must be positive".into());
        }
        if a.mp_points < 2 {
            return bad("mp_points must be at least 2".into());
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 over every setting that affects data files (not the output
    /// directory or thread count).
    pub fn hash(&self) -> String {
        let key = serde_json::json!({
            "model": self.model,
            "coupling": self.coupling,
            "coupling_seed": self.coupling_spec().map(|s| s.seed),
            "window": self.window,
            "analysis": self.analysis,
        });
        let digest = Sha256::digest(key.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: Option<ModelSection>,
    coupling: Option<CouplingSection>,
    window: Option<WindowSection>,
    analysis: Option<AnalysisSection>,
    output: Option<OutputSection>,
    run: Option<RunSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    side: Option<usize>,
    assets: Option<usize>,
    j: Option<f64>,
    alpha: Option<f64>,
    beta: Option<f64>,
    therm_sweeps: Option<usize>,
    collect_sweeps: Option<usize>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CouplingSection {
    density: Option<f64>,
    mean: Option<f64>,
    variance: Option<f64>,
    seed: Option<u64>,
    path: Option<PathBuf>,
    symmetrize: Option<bool>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WindowSection {
    length: Option<usize>,
    stride: Option<usize>,
    normalization: Option<Normalization>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct AnalysisSection {
    max_lag: Option<usize>,
    top_m: Option<usize>,
    histogram_bins: Option<usize>,
    histogram_range: Option<f64>,
    tau_c: Option<f64>,
    mp_points: Option<usize>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct OutputSection {
    dir: Option<PathBuf>,
    write_matrices: Option<bool>,
    summary_format: Option<SummaryFormat>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunSection {
    threads: Option<usize>,
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

impl ConfigFile {
    fn apply(self, cfg: &mut ExperimentConfig, base_dir: &Path) {
        if let Some(m) = self.model {
            let p = &mut cfg.model;
            set(&mut p.side, m.side);
            set(&mut p.assets, m.assets);
            set(&mut p.coupling_j, m.j);
            set(&mut p.alpha, m.alpha);
            set(&mut p.beta, m.beta);
            set(&mut p.therm_sweeps, m.therm_sweeps);
            set(&mut p.collect_sweeps, m.collect_sweeps);
            set(&mut p.master_seed, m.seed);
        }
        if let Some(c) = self.coupling {
            set(&mut cfg.coupling.symmetrize, c.symmetrize);
            if let Some(path) = c.path {
                cfg.coupling.source = CouplingSource::File(base_dir.join(path));
            } else if let CouplingSource::Generate {
                density,
                mean,
                variance,
                seed,
            } = &mut cfg.coupling.source
            {
                set(density, c.density);
                set(mean, c.mean);
                set(variance, c.variance);
                if c.seed.is_some() {
                    *seed = c.seed;
                }
            }
        }
        if let Some(w) = self.window {
            set(&mut cfg.window.length, w.length);
            if w.stride.is_some() {
                cfg.window.stride = w.stride;
            }
            set(&mut cfg.window.normalization, w.normalization);
        }
        if let Some(a) = self.analysis {
            let s = &mut cfg.analysis;
            set(&mut s.max_lag, a.max_lag);
            set(&mut s.top_m, a.top_m);
            set(&mut s.histogram.bins, a.histogram_bins);
            if let Some(r) = a.histogram_range {
                s.histogram.lo = -r;
                s.histogram.hi = r;
            }
            set(&mut s.tau_c, a.tau_c);
            set(&mut s.mp_points, a.mp_points);
        }
        if let Some(o) = self.output {
            if let Some(d) = o.dir {
                cfg.output.dir = base_dir.join(d);
            }
            set(&mut cfg.output.write_matrices, o.write_matrices);
            set(&mut cfg.output.summary_format, o.summary_format);
        }
        if let Some(r) = self.run {
            cfg.threads = r.threads.or(cfg.threads);
        }
    }
}
