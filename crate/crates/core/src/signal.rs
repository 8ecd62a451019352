//! Per-bar purchase/sale decisions for a single instrument.
//!
//! Each bar runs: wavelet transform → rolling SDE fit over the last `T0`
//! coefficient vectors → stationary density of mode 1 → quasi-stationarity
//! check against the density fitted `T` bars earlier → rule table.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sde_fit::{fit_model, FitConfig};
use crate::stationary::{
    density_convolution, ks_quasistationarity, stationary_density, GridSpec, StationaryDensity,
};
use crate::timeseries::PriceSeries;
use crate::wavelet::{make_wavelet, Transformer, WaveletError, WaveletFamily};

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("engine needs {needed} bars before it can decide, has {have}")]
    NotWarmedUp { needed: usize, have: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Wavelet(#[from] WaveletError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    #[default]
    Plain,
    Convolution,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    /// Calibration window length `T0` in bars.
    pub t0: usize,
    /// Stationarity displacement `T`; `None` means `T0`.
    pub displacement: Option<usize>,
    pub density_mode: DensityMode,
    pub invert_sign: bool,
    /// Replaces the asymptotic Kolmogorov quantile when set.
    pub ks_k: Option<f64>,
}

impl Default for SignalConfig {
    fn default() -> Self {
        Self {
            alpha1: 0.05,
            alpha2: 0.05,
            t0: 64,
            displacement: None,
            density_mode: DensityMode::Plain,
            invert_sign: false,
            ks_k: None,
        }
    }
}

impl SignalConfig {
    pub fn displacement(&self) -> usize {
        self.displacement.unwrap_or(self.t0)
    }

    pub fn validate(&self) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if !(self.alpha1 > 0.0 && self.alpha1 < 0.5) {
            return bad(format!("alpha1 must be in (0, 0.5), got {}", self.alpha1));
        }
        if !(self.alpha2 > 0.0 && self.alpha2 < 0.5) {
            return bad(format!("alpha2 must be in (0, 0.5), got {}", self.alpha2));
        }
        if self.t0 < 32 {
            return bad(format!("t0 must be at least 32, got {}", self.t0));
        }
        if self.displacement() == 0 {
            return bad("displacement must be positive".into());
        }
        if let Some(k) = self.ks_k {
            if !(k > 0.0) {
                return bad(format!("ks_k must be positive, got {k}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SignalKind {
    Buy,
    Sell,
    Hold,
}

impl SignalKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SignalKind::Buy => "buy",
            SignalKind::Sell => "sell",
            SignalKind::Hold => "hold",
        }
    }
}

/// One bar's decision. `p_s` is NaN when no density could be formed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub kind: SignalKind,
    pub p_s: f64,
    pub dy1: f64,
    /// True when the quasi-stationarity check (or a failed fit) blocked the bar.
    pub gated: bool,
}

/// The rule table: buy on `-dy₁ > 0, P_s > 1-α₁`, sell on `-dy₁ < 0, P_s < α₁`.
pub fn decide(dy1: f64, p_s: f64, ks_pass: bool, cfg: &SignalConfig) -> Signal {
    if !ks_pass {
        return Signal {
            kind: SignalKind::Hold,
            p_s,
            dy1,
            gated: true,
        };
    }
    let kind = if -dy1 > 0.0 && p_s > 1.0 - cfg.alpha1 {
        SignalKind::Buy
    } else if -dy1 < 0.0 && p_s < cfg.alpha1 {
        SignalKind::Sell
    } else {
        SignalKind::Hold
    };
    Signal {
        kind,
        p_s,
        dy1,
        gated: false,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WaveletSpec {
    pub family: WaveletFamily,
    pub order: u32,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self {
            family: WaveletFamily::Haar,
            order: 1,
        }
    }
}

/// Everything one engine needs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EngineConfig {
    pub wavelet: WaveletSpec,
    /// Number of wavelet modes `J`.
    pub levels: u32,
    /// Hermite degree `K`.
    pub degree: u32,
    pub signal: SignalConfig,
    pub grid: GridSpec,
    /// Refit every this many bars.
    pub refit_stride: usize,
    pub diffusion_floor: Option<f64>,
}

impl Default for EngineConfig {
    fn default() -> Self {
        Self {
            wavelet: WaveletSpec::default(),
            levels: 2,
            degree: 3,
            signal: SignalConfig::default(),
            grid: GridSpec::default(),
            refit_stride: 1,
            diffusion_floor: None,
        }
    }
}

/// Streaming single-instrument engine.
#[derive(Debug, Clone)]
pub struct NswEngine {
    cfg: EngineConfig,
    transformer: Transformer,
    prices: Vec<f64>,
    coeffs: Vec<Vec<f64>>,
    /// Densities for the last `T + 1` coefficient bars, newest at the back.
    densities: VecDeque<Option<StationaryDensity>>,
    since_fit: usize,
}

impl NswEngine {
    pub fn new(cfg: EngineConfig) -> Result<Self, EngineError> {
        cfg.signal.validate()?;
        if cfg.levels == 0 {
            return Err(EngineError::Config("levels must be at least 1".into()));
        }
        if cfg.refit_stride == 0 {
            return Err(EngineError::Config("refit_stride must be at least 1".into()));
        }
        let filter = make_wavelet(cfg.wavelet.family, cfg.wavelet.order)?;
        let transformer = Transformer::new(&filter, cfg.levels)?;
        Ok(Self {
            cfg,
            transformer,
            prices: Vec::new(),
            coeffs: Vec::new(),
            densities: VecDeque::new(),
            since_fit: 0,
        })
    }

    pub fn config(&self) -> &EngineConfig {
        &self.cfg
    }

    /// Bars that must be fed before the first decision.
    pub fn warmup_bars(&self) -> usize {
        self.transformer.support() + self.cfg.signal.t0 + self.cfg.signal.displacement() - 1
    }

    pub fn bars_seen(&self) -> usize {
        self.prices.len()
    }

    /// Feeds one bar. The bar is absorbed even when `NotWarmedUp` is returned.
    pub fn step(&mut self, price: f64) -> Result<Signal, EngineError> {
        self.prices.push(price);
        let t = self.prices.len() - 1;
        let Some(mut y) = self.transformer.coefficients_at(&self.prices, t) else {
            return Err(self.not_ready());
        };
        if self.cfg.signal.invert_sign {
            y.iter_mut().for_each(|v| *v = -*v);
        }
        self.coeffs.push(y);

        let t0 = self.cfg.signal.t0;
        let shift = self.cfg.signal.displacement();
        let n = self.coeffs.len();
        if n >= t0 {
            let density = if self.since_fit == 0 || self.densities.is_empty() {
                self.fit_density()
            } else {
                self.densities.back().cloned().flatten()
            };
            self.since_fit = (self.since_fit + 1) % self.cfg.refit_stride;
            self.densities.push_back(density);
            while self.densities.len() > shift + 1 {
                self.densities.pop_front();
            }
        }
        if n < t0 + shift {
            return Err(self.not_ready());
        }

        let dy1 = self.coeffs[n - 1][0] - self.coeffs[n - 2][0];
        let (Some(now), Some(before)) = (
            self.densities.back().cloned().flatten(),
            self.densities.front().cloned().flatten(),
        ) else {
            return Ok(blocked(dy1));
        };
        let points: Vec<f64> = self.coeffs[n - t0..].iter().map(|v| v[0]).collect();
        let sig = &self.cfg.signal;
        let Ok(ks) = ks_quasistationarity(&now, &before, &points, sig.alpha2, sig.ks_k) else {
            return Ok(blocked(dy1));
        };
        let p_s = match sig.density_mode {
            DensityMode::Plain => now.p_s,
            DensityMode::Convolution => match density_convolution(&now, &before) {
                Ok(d) => d.p_s,
                Err(_) => return Ok(blocked(dy1)),
            },
        };
        Ok(decide(dy1, p_s, ks.pass, sig))
    }

    fn not_ready(&self) -> EngineError {
        EngineError::NotWarmedUp {
            needed: self.warmup_bars(),
            have: self.prices.len(),
        }
    }

    fn fit_density(&self) -> Option<StationaryDensity> {
        let t0 = self.cfg.signal.t0;
        let window = &self.coeffs[self.coeffs.len() - t0..];
        let span = self.transformer.support() + t0 - 1;
        let recent = &self.prices[self.prices.len().saturating_sub(span)..];
        let level = recent.iter().sum::<f64>() / recent.len() as f64;
        let fit_cfg = FitConfig {
            degree: self.cfg.degree,
            dt: 1.0,
            diffusion_floor: self.cfg.diffusion_floor,
            min_std: 1e-9 * level,
        };
        let model = fit_model(window, &fit_cfg).ok()?;
        stationary_density(&model, 1, self.cfg.grid).ok()
    }
}

fn blocked(dy1: f64) -> Signal {
    Signal {
        kind: SignalKind::Hold,
        p_s: f64::NAN,
        dy1,
        gated: true,
    }
}

/// Signals for every bar of a series; `None` while warming up.
pub fn run_signals(cfg: &EngineConfig, series: &PriceSeries) -> Result<Vec<Option<Signal>>, EngineError> {
    let mut engine = NswEngine::new(*cfg)?;
    series
        .prices()
        .iter()
        .map(|&p| match engine.step(p) {
            Ok(s) => Ok(Some(s)),
            Err(EngineError::NotWarmedUp { .. }) => Ok(None),
            Err(e) => Err(e),
        })
        .collect()
}

/// Writes `t,kind,p_s,dy1,gated` for the bars that produced a signal.
pub fn write_signal_log(
    path: impl AsRef<Path>,
    timestamps: &[i64],
    signals: &[Option<Signal>],
) -> std::io::Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "t,kind,p_s,dy1,gated")?;
    for (t, s) in timestamps.iter().zip(signals) {
        if let Some(s) = s {
            writeln!(f, "{t},{},{},{},{}", s.kind.as_str(), s.p_s, s.dy1, s.gated)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> SignalConfig {
        SignalConfig::default()
    }

    #[test]
    fn rule_examples() {
        assert_eq!(decide(-0.3, 0.97, true, &cfg()).kind, SignalKind::Buy);
        assert_eq!(decide(0.3, 0.02, true, &cfg()).kind, SignalKind::Sell);
        assert_eq!(decide(-0.3, 0.5, true, &cfg()).kind, SignalKind::Hold);
        let g = decide(-0.3, 0.97, false, &cfg());
        assert_eq!(g.kind, SignalKind::Hold);
        assert!(g.gated);
    }

    #[test]
    fn zero_increment_always_holds() {
        for p in [0.0, 0.01, 0.5, 0.99, 1.0] {
            assert_eq!(decide(0.0, p, true, &cfg()).kind, SignalKind::Hold);
        }
    }

    #[test]
    fn config_validation() {
        let mut c = cfg();
        c.alpha1 = 0.5;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.t0 = 31;
        assert!(c.validate().is_err());
        assert!(cfg().validate().is_ok());
    }

    #[test]
    fn warmup_is_reported() {
        let mut e = NswEngine::new(EngineConfig::default()).unwrap();
        let need = e.warmup_bars();
        assert_eq!(need, 8 + 64 + 64 - 1);
        for i in 0..need - 1 {
            assert!(matches!(e.step(100.0 + (i % 7) as f64), Err(EngineError::NotWarmedUp { .. })));
        }
        assert!(e.step(101.0).is_ok());
    }

    #[test]
    fn constant_prices_hold() {
        let s = PriceSeries::from_prices("c", vec![42.0; 400], 0, 60).unwrap();
        let sig = run_signals(&EngineConfig::default(), &s).unwrap();
        assert!(sig.iter().flatten().all(|s| s.kind == SignalKind::Hold));
        assert!(sig.iter().flatten().count() > 0);
    }
}
