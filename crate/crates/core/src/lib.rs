//! Multi-asset Ising market simulator.
//!
//! `N` square spin lattices, one per asset, evolve under heat-bath dynamics
//! with a ferromagnetic neighbour term, a minority term `-alpha * s * |M|`
//! and a cross-asset term `sum_j gamma_jk * M_j`. The change in each
//! lattice's magnetization is that asset's return. The rest of the crate
//! analyses the resulting return panel: autocorrelations, integrated
//! autocorrelation times, return distributions, a volatility index,
//! rolling equal-time correlation matrices and their spectra (cumulative
//! risk fraction, Marchenko-Pastur reference, IPR / IPR6).
//!
//! ```no_run
//! use ising_market::{coupling, market, ModelParams};
//!
//! let params = ModelParams::desk();
//! let gamma = coupling::generate_coupling(&coupling::CouplingSpec::new(params.assets, 7));
//! let panel = market::run_simulation(&params, &gamma).unwrap();
//! println!("{} assets x {} sweeps", panel.assets(), panel.len());
//! ```

pub mod config;
pub mod coupling;
pub mod error;
pub mod io;
pub mod market;
pub mod panel;
pub mod pipeline;
pub mod series;
pub mod spectra;
pub mod xcorr;

pub use config::ExperimentConfig;
pub use coupling::{CouplingMatrix, CouplingSpec};
pub use error::Error;
pub use market::{ModelParams, RngPlan};
pub use panel::{Panel, ReturnPanel};
pub use spectra::SpectralSummary;
pub use xcorr::{CorrelationMatrix, CorrelationMode, WindowSpec};
