//! Run configuration: one TOML file plus `key=value` overrides.
//!
//! Every key is optional; missing keys take the defaults below. Unknown keys
//! are rejected. Example:
//!
//! ```toml
//! levels = 2          # wavelet modes J
//! degree = 3          # Hermite degree K
//! t0 = 64             # calibration window, bars
//! alpha1 = 0.05
//! alpha2 = 0.05
//! theta = 0.25
//! bar_interval = 60   # seconds
//!
//! [synth]
//! bars = 10000
//! kappa = 0.005
//! sigma = 0.001
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{BacktestConfig, ParcelConfig};
use crate::portfolio::OptimizerConfig;
use crate::signal::{DensityMode, EngineConfig, NswEngine, SignalConfig, WaveletSpec};
use crate::stationary::GridSpec;
use crate::timeseries::{simulate_sde, ColumnSpec, GapPolicy, PriceSeries, SimulationError};
use crate::wavelet::WaveletFamily;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed config: {0}")]
    Parse(String),
    #[error("malformed override `{0}` (expected key=value)")]
    Override(String),
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Parameters of the synthetic mean-reverting generator. The log-price
/// follows `dy = (v - κ y) dt + σ dW₁` with a slowly varying trend
/// `dv = -γ v dt + η dW₂`, plus a deterministic drift. `eta = 0` gives a
/// plain Ornstein–Uhlenbeck log-price.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub bars: usize,
    pub instruments: usize,
    /// Mean-reversion rate per bar.
    pub kappa: f64,
    /// Log-price volatility per √bar.
    pub sigma: f64,
    /// Decay rate of the trend component per bar.
    pub gamma: f64,
    /// Trend volatility.
    pub eta: f64,
    /// Deterministic log-price drift per bar.
    pub trend: f64,
    pub price0: f64,
    /// Unix time of the first bar.
    pub start: i64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            bars: 10_000,
            instruments: 1,
            kappa: 0.005,
            sigma: 0.001,
            gamma: 0.002,
            eta: 1e-4,
            trend: 0.0,
            price0: 100.0,
            start: 1_230_768_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub wavelet_family: WaveletFamily,
    pub wavelet_order: u32,
    /// Number of wavelet modes `J`.
    pub levels: u32,
    /// Hermite degree `K`.
    pub degree: u32,
    /// Calibration window `T0` in bars.
    pub t0: usize,
    /// Stationarity displacement `T`; defaults to `t0`.
    pub displacement: Option<usize>,
    pub alpha1: f64,
    pub alpha2: f64,
    pub density_mode: DensityMode,
    pub ks_k: Option<f64>,
    pub invert_sign: bool,
    pub grid_span: f64,
    pub grid_points: usize,
    pub refit_stride: usize,
    pub diffusion_floor: Option<f64>,
    /// Parcel compromise parameter `θ`.
    pub theta: f64,
    /// Parcel re-optimization interval `T1`; defaults to `t0`.
    pub t1: Option<usize>,
    pub tau0: usize,
    pub optimizer_tol: f64,
    pub optimizer_max_iters: usize,
    pub cost_bps: f64,
    /// Bar spacing in seconds.
    pub bar_interval: i64,
    pub timestamp_column: String,
    pub price_column: String,
    pub delimiter: char,
    pub gap_policy: GapPolicy,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            wavelet_family: WaveletFamily::Haar,
            wavelet_order: 1,
            levels: 2,
            degree: 3,
            t0: 64,
            displacement: None,
            alpha1: 0.05,
            alpha2: 0.05,
            density_mode: DensityMode::Plain,
            ks_k: None,
            invert_sign: false,
            grid_span: 5.0,
            grid_points: 1024,
            refit_stride: 1,
            diffusion_floor: None,
            theta: 0.25,
            t1: None,
            tau0: 1,
            optimizer_tol: 1e-8,
            optimizer_max_iters: 200_000,
            cost_bps: 0.0,
            bar_interval: 60,
            timestamp_column: "timestamp".into(),
            price_column: "price".into(),
            delimiter: ',',
            gap_policy: GapPolicy::Reject,
            seed: 2009,
            output_dir: PathBuf::from("runs"),
            synth: SynthConfig::default(),
        }
    }
}

/// Parses the right-hand side of an override as a TOML value, falling back
/// to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError::Override(spec.into()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(spec.into()));
    }
    let mut parts: Vec<&str> = key.split('.').collect();
    let leaf = parts.pop().expect("split yields at least one part");
    let mut node = table;
    for p in parts {
        node = node
            .entry(p)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()))
            .as_table_mut()
            .ok_or_else(|| ConfigError::Override(spec.into()))?;
    }
    node.insert(leaf.into(), parse_value(raw.trim()));
    Ok(())
}

impl RunConfig {
    /// Parses TOML text, applies overrides in order, then validates.
    pub fn from_toml_str(text: &str, overrides: &[String]) -> Result<Self, ConfigError> {
        let mut table: toml::Table = text.parse().map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        let cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| ConfigError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads `path` (or the defaults when `None`) and applies overrides.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self, ConfigError> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read {
                path: p.to_path_buf(),
                source,
            })?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        NswEngine::new(self.engine_config()).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.theta) {
            return bad(format!("theta must lie in [0, 1], got {}", self.theta));
        }
        if self.t1() == 0 || self.tau0 == 0 {
            return bad("t1 and tau0 must be positive".into());
        }
        if self.grid_points < 16 || !(self.grid_span > 0.0) {
            return bad("grid needs at least 16 points and a positive span".into());
        }
        if self.bar_interval <= 0 {
            return bad(format!("bar_interval must be positive, got {}", self.bar_interval));
        }
        if !self.delimiter.is_ascii() {
            return bad("delimiter must be a single ASCII character".into());
        }
        if !(self.cost_bps >= 0.0 && self.cost_bps < 10_000.0) {
            return bad(format!("cost_bps out of range: {}", self.cost_bps));
        }
        let s = &self.synth;
        if s.bars < 2 || s.instruments == 0 {
            return bad("synth needs at least 2 bars and 1 instrument".into());
        }
        if !(s.sigma >= 0.0 && s.eta >= 0.0 && s.price0 > 0.0) {
            return bad("synth needs sigma, eta >= 0 and price0 > 0".into());
        }
        if !(s.kappa.is_finite() && s.gamma.is_finite() && s.trend.is_finite()) {
            return bad("synth rates must be finite".into());
        }
        Ok(())
    }

    pub fn t1(&self) -> usize {
        self.t1.unwrap_or(self.t0)
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            wavelet: WaveletSpec {
                family: self.wavelet_family,
                order: self.wavelet_order,
            },
            levels: self.levels,
            degree: self.degree,
            signal: SignalConfig {
                alpha1: self.alpha1,
                alpha2: self.alpha2,
                t0: self.t0,
                displacement: self.displacement,
                density_mode: self.density_mode,
                invert_sign: self.invert_sign,
                ks_k: self.ks_k,
            },
            grid: GridSpec {
                span: self.grid_span,
                points: self.grid_points,
            },
            refit_stride: self.refit_stride,
            diffusion_floor: self.diffusion_floor,
        }
    }

    pub fn parcel_config(&self) -> ParcelConfig {
        ParcelConfig {
            theta: self.theta,
            t1: self.t1(),
            tau0: self.tau0,
            optimizer: OptimizerConfig {
                tol: self.optimizer_tol,
                max_iters: self.optimizer_max_iters,
            },
        }
    }

    pub fn backtest_config(&self) -> BacktestConfig {
        BacktestConfig {
            cost_bps: self.cost_bps,
        }
    }

    pub fn column_spec(&self) -> ColumnSpec {
        ColumnSpec {
            timestamp: self.timestamp_column.clone(),
            price: self.price_column.clone(),
            delimiter: self.delimiter as u8,
            gaps: self.gap_policy,
            bar_interval: Some(self.bar_interval),
        }
    }

    /// Fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

/// Synthetic price series, one per instrument, seeded `seed + i`.
pub fn synthesize(cfg: &RunConfig) -> Result<Vec<PriceSeries>, SimulationError> {
    let s = cfg.synth;
    (0..s.instruments)
        .map(|i| {
            let seed = cfg.seed.wrapping_add(i as u64);
            let path = simulate_sde(
                |y: &[f64]| vec![y[1] - s.kappa * y[0], -s.gamma * y[1]],
                |_: &[f64]| vec![s.sigma, s.eta],
                &[0.0, 0.0],
                1.0,
                s.bars - 1,
                seed,
            )?;
            let prices = path
                .component(0)
                .iter()
                .enumerate()
                .map(|(t, y)| s.price0 * (y + s.trend * t as f64).exp())
                .collect();
            Ok(PriceSeries::from_prices(
                format!("SYN{}", i + 1),
                prices,
                s.start,
                cfg.bar_interval,
            )
            .expect("synthetic prices are positive and regular"))
        })
        .collect()
}

/// Written next to every run's outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub config: RunConfig,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config: config.clone(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: impl AsRef<Path>) -> std::io::Result<PathBuf> {
        let path = dir.as_ref().join("manifest.json");
        let json = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(&path, json)?;
        Ok(path)
    }
}
