//! Classical indicator strategies: price channel, Bollinger bands, MACD
//! and RSI, plus an exhaustive in-sample parameter search.
//!
//! Each indicator exists twice: as batch value series (`rsi`, `macd`, ...)
//! that are easy to check by hand, and as a streaming [`IndicatorState`]
//! that the backtester drives bar by bar. The signal rules are:
//!
//! * price channel: buy when the close exceeds the high of the previous `L`
//!   closes, sell when it falls below their low;
//! * Bollinger: buy below `mean - w·std`, sell above `mean + w·std`, with the
//!   population std of the last `L` closes including the current one;
//! * MACD: buy when `macd - signal` turns positive, sell when it turns
//!   negative (EMAs with `α = 2/(span+1)` seeded by the first close);
//! * RSI (Wilder smoothing): buy when RSI rises through `lower`, sell when it
//!   falls through `upper`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backtest::{run_backtest, BacktestConfig, BacktestError, IndicatorSource};
use crate::signal::SignalKind;
use crate::timeseries::PriceSeries;

#[derive(Debug, Error, PartialEq)]
pub enum BaselineError {
    #[error("invalid indicator parameters: {0}")]
    InvalidParams(String),
    #[error("indicator needs bar index {needed}, asked for {t}")]
    NotWarmedUp { needed: usize, t: usize },
    #[error("bar index {t} is past the end of a {len}-bar series")]
    OutOfRange { t: usize, len: usize },
    #[error("parameter grid is empty")]
    EmptyGrid,
    #[error(transparent)]
    Backtest(#[from] Box<BacktestError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IndicatorKind {
    PriceChannel,
    Bollinger,
    Macd,
    Rsi,
}

impl IndicatorKind {
    pub const ALL: [IndicatorKind; 4] = [
        IndicatorKind::PriceChannel,
        IndicatorKind::Bollinger,
        IndicatorKind::Macd,
        IndicatorKind::Rsi,
    ];

    /// Column label used in comparison tables.
    pub fn label(self) -> &'static str {
        match self {
            IndicatorKind::PriceChannel => "PC",
            IndicatorKind::Bollinger => "BB",
            IndicatorKind::Macd => "MACD",
            IndicatorKind::Rsi => "RSI",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum IndicatorConfig {
    PriceChannel { lookback: usize },
    Bollinger { lookback: usize, width: f64 },
    Macd { fast: usize, slow: usize, signal: usize },
    Rsi { lookback: usize, lower: f64, upper: f64 },
}

impl IndicatorConfig {
    pub fn kind(&self) -> IndicatorKind {
        match self {
            IndicatorConfig::PriceChannel { .. } => IndicatorKind::PriceChannel,
            IndicatorConfig::Bollinger { .. } => IndicatorKind::Bollinger,
            IndicatorConfig::Macd { .. } => IndicatorKind::Macd,
            IndicatorConfig::Rsi { .. } => IndicatorKind::Rsi,
        }
    }

    /// Parameters in declaration order, for tie-breaking.
    pub fn params(&self) -> Vec<f64> {
        match *self {
            IndicatorConfig::PriceChannel { lookback } => vec![lookback as f64],
            IndicatorConfig::Bollinger { lookback, width } => vec![lookback as f64, width],
            IndicatorConfig::Macd { fast, slow, signal } => {
                vec![fast as f64, slow as f64, signal as f64]
            }
            IndicatorConfig::Rsi {
                lookback,
                lower,
                upper,
            } => vec![lookback as f64, lower, upper],
        }
    }

    pub fn validate(&self) -> Result<(), BaselineError> {
        let bad = |m: String| Err(BaselineError::InvalidParams(m));
        match *self {
            IndicatorConfig::PriceChannel { lookback } if lookback < 2 => {
                bad(format!("price channel lookback {lookback} < 2"))
            }
            IndicatorConfig::Bollinger { lookback, width } => {
                if lookback < 2 {
                    bad(format!("Bollinger lookback {lookback} < 2"))
                } else if !(width > 0.0 && width.is_finite()) {
                    bad(format!("Bollinger width {width} must be positive"))
                } else {
                    Ok(())
                }
            }
            IndicatorConfig::Macd { fast, slow, signal } => {
                if fast < 2 || slow < 2 || signal < 2 {
                    bad("MACD spans must be at least 2".into())
                } else if fast >= slow {
                    bad(format!("MACD fast span {fast} must be below slow span {slow}"))
                } else {
                    Ok(())
                }
            }
            IndicatorConfig::Rsi {
                lookback,
                lower,
                upper,
            } => {
                if lookback < 2 {
                    bad(format!("RSI lookback {lookback} < 2"))
                } else if !(0.0 < lower && lower < upper && upper < 100.0) {
                    bad(format!("RSI thresholds need 0 < {lower} < {upper} < 100"))
                } else {
                    Ok(())
                }
            }
            _ => Ok(()),
        }
    }

    /// First bar index at which a signal can be emitted.
    pub fn warmup(&self) -> usize {
        match *self {
            IndicatorConfig::PriceChannel { lookback } => lookback,
            IndicatorConfig::Bollinger { lookback, .. } => lookback - 1,
            IndicatorConfig::Macd { slow, signal, .. } => slow + signal - 1,
            IndicatorConfig::Rsi { lookback, .. } => lookback + 1,
        }
    }
}

impl std::fmt::Display for IndicatorConfig {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            IndicatorConfig::PriceChannel { lookback } => write!(f, "PC({lookback})"),
            IndicatorConfig::Bollinger { lookback, width } => write!(f, "BB({lookback}, {width})"),
            IndicatorConfig::Macd { fast, slow, signal } => {
                write!(f, "MACD({fast}, {slow}, {signal})")
            }
            IndicatorConfig::Rsi {
                lookback,
                lower,
                upper,
            } => write!(f, "RSI({lookback}, {lower}, {upper})"),
        }
    }
}

/// The default tuning grid for one indicator.
pub fn standard_grid(kind: IndicatorKind) -> Vec<IndicatorConfig> {
    match kind {
        IndicatorKind::PriceChannel => [10, 20, 40, 80]
            .into_iter()
            .map(|lookback| IndicatorConfig::PriceChannel { lookback })
            .collect(),
        IndicatorKind::Bollinger => {
            let mut g = Vec::new();
            for lookback in [10, 20, 40] {
                for width in [1.5, 2.0, 2.5] {
                    g.push(IndicatorConfig::Bollinger { lookback, width });
                }
            }
            g
        }
        IndicatorKind::Macd => [(6, 13, 5), (12, 26, 9), (24, 52, 18)]
            .into_iter()
            .map(|(fast, slow, signal)| IndicatorConfig::Macd { fast, slow, signal })
            .collect(),
        IndicatorKind::Rsi => {
            let mut g = Vec::new();
            for lookback in [7, 14, 28] {
                for (lower, upper) in [(20.0, 80.0), (30.0, 70.0), (40.0, 60.0)] {
                    g.push(IndicatorConfig::Rsi {
                        lookback,
                        lower,
                        upper,
                    });
                }
            }
            g
        }
    }
}

/// Highest and lowest of the previous `lookback` closes; `None` before bar `lookback`.
pub fn price_channel(prices: &[f64], lookback: usize) -> Vec<Option<(f64, f64)>> {
    (0..prices.len())
        .map(|t| {
            (t >= lookback).then(|| {
                let w = &prices[t - lookback..t];
                (
                    w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                    w.iter().copied().fold(f64::INFINITY, f64::min),
                )
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Band {
    pub lower: f64,
    pub mid: f64,
    pub upper: f64,
}

fn band_of(window: &[f64], width: f64) -> Band {
    let n = window.len() as f64;
    let mid = window.iter().sum::<f64>() / n;
    let var = window.iter().map(|p| (p - mid).powi(2)).sum::<f64>() / n;
    let half = width * var.sqrt();
    Band {
        lower: mid - half,
        mid,
        upper: mid + half,
    }
}

/// Bollinger bands over the last `lookback` closes including the current one.
pub fn bollinger(prices: &[f64], lookback: usize, width: f64) -> Vec<Option<Band>> {
    (0..prices.len())
        .map(|t| (t + 1 >= lookback).then(|| band_of(&prices[t + 1 - lookback..=t], width)))
        .collect()
}

/// Exponential moving average with `α = 2/(span+1)`, seeded by the first value.
pub fn ema(values: &[f64], span: usize) -> Vec<f64> {
    let alpha = 2.0 / (span as f64 + 1.0);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = None;
    for &v in values {
        let next = match acc {
            None => v,
            Some(prev) => prev + alpha * (v - prev),
        };
        acc = Some(next);
        out.push(next);
    }
    out
}

/// `(macd line, signal line)` per bar.
pub fn macd(prices: &[f64], fast: usize, slow: usize, signal: usize) -> Vec<(f64, f64)> {
    let f = ema(prices, fast);
    let s = ema(prices, slow);
    let line: Vec<f64> = f.iter().zip(&s).map(|(a, b)| a - b).collect();
    let sig = ema(&line, signal);
    line.into_iter().zip(sig).collect()
}

fn rsi_from(gain: f64, loss: f64) -> f64 {
    if loss == 0.0 {
        if gain == 0.0 {
            50.0
        } else {
            100.0
        }
    } else {
        100.0 - 100.0 / (1.0 + gain / loss)
    }
}

/// Wilder RSI; defined from bar `lookback` on. A flat stretch reads 50.
pub fn rsi(prices: &[f64], lookback: usize) -> Vec<Option<f64>> {
    let mut out = vec![None; prices.len()];
    if prices.len() <= lookback {
        return out;
    }
    let l = lookback as f64;
    let (mut gain, mut loss) = (0.0, 0.0);
    for t in 1..=lookback {
        let d = prices[t] - prices[t - 1];
        gain += d.max(0.0);
        loss += (-d).max(0.0);
    }
    gain /= l;
    loss /= l;
    out[lookback] = Some(rsi_from(gain, loss));
    for t in lookback + 1..prices.len() {
        let d = prices[t] - prices[t - 1];
        gain = (gain * (l - 1.0) + d.max(0.0)) / l;
        loss = (loss * (l - 1.0) + (-d).max(0.0)) / l;
        out[t] = Some(rsi_from(gain, loss));
    }
    out
}

/// Streaming evaluation of one indicator's signal rule.
#[derive(Debug, Clone)]
pub struct IndicatorState {
    cfg: IndicatorConfig,
    bars: usize,
    window: VecDeque<f64>,
    last: Option<f64>,
    fast: f64,
    slow: f64,
    signal: f64,
    prev_hist: f64,
    gain: f64,
    loss: f64,
    prev_rsi: f64,
}

impl IndicatorState {
    pub fn new(cfg: IndicatorConfig) -> Result<Self, BaselineError> {
        cfg.validate()?;
        Ok(Self {
            cfg,
            bars: 0,
            window: VecDeque::new(),
            last: None,
            fast: 0.0,
            slow: 0.0,
            signal: 0.0,
            prev_hist: 0.0,
            gain: 0.0,
            loss: 0.0,
            prev_rsi: 0.0,
        })
    }

    pub fn config(&self) -> &IndicatorConfig {
        &self.cfg
    }

    /// Feeds the next close; `None` until the indicator is warmed up.
    pub fn update(&mut self, price: f64) -> Option<SignalKind> {
        let t = self.bars;
        self.bars += 1;
        let out = match self.cfg {
            IndicatorConfig::PriceChannel { lookback } => {
                let out = (self.window.len() == lookback).then(|| {
                    let hi = self.window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let lo = self.window.iter().copied().fold(f64::INFINITY, f64::min);
                    if price > hi {
                        SignalKind::Buy
                    } else if price < lo {
                        SignalKind::Sell
                    } else {
                        SignalKind::Hold
                    }
                });
                self.window.push_back(price);
                if self.window.len() > lookback {
                    self.window.pop_front();
                }
                out
            }
            IndicatorConfig::Bollinger { lookback, width } => {
                self.window.push_back(price);
                if self.window.len() > lookback {
                    self.window.pop_front();
                }
                (self.window.len() == lookback).then(|| {
                    let band = band_of(self.window.make_contiguous(), width);
                    if price < band.lower {
                        SignalKind::Buy
                    } else if price > band.upper {
                        SignalKind::Sell
                    } else {
                        SignalKind::Hold
                    }
                })
            }
            IndicatorConfig::Macd { fast, slow, signal } => {
                let step = |acc: f64, v: f64, span: usize| acc + 2.0 / (span as f64 + 1.0) * (v - acc);
                if t == 0 {
                    self.fast = price;
                    self.slow = price;
                    self.signal = 0.0;
                } else {
                    self.fast = step(self.fast, price, fast);
                    self.slow = step(self.slow, price, slow);
                    self.signal = step(self.signal, self.fast - self.slow, signal);
                }
                let hist = (self.fast - self.slow) - self.signal;
                let kind = if self.prev_hist <= 0.0 && hist > 0.0 {
                    SignalKind::Buy
                } else if self.prev_hist >= 0.0 && hist < 0.0 {
                    SignalKind::Sell
                } else {
                    SignalKind::Hold
                };
                let out = (t >= self.cfg.warmup()).then_some(kind);
                self.prev_hist = hist;
                out
            }
            IndicatorConfig::Rsi {
                lookback,
                lower,
                upper,
            } => {
                let l = lookback as f64;
                let mut out = None;
                if let Some(prev) = self.last {
                    let d = price - prev;
                    let (up, down) = (d.max(0.0), (-d).max(0.0));
                    if t < lookback {
                        self.gain += up;
                        self.loss += down;
                    } else if t == lookback {
                        self.gain = (self.gain + up) / l;
                        self.loss = (self.loss + down) / l;
                    } else {
                        self.gain = (self.gain * (l - 1.0) + up) / l;
                        self.loss = (self.loss * (l - 1.0) + down) / l;
                    }
                    if t >= lookback {
                        let value = rsi_from(self.gain, self.loss);
                        if t > lookback {
                            out = Some(if self.prev_rsi <= lower && value > lower {
                                SignalKind::Buy
                            } else if self.prev_rsi >= upper && value < upper {
                                SignalKind::Sell
                            } else {
                                SignalKind::Hold
                            });
                        }
                        self.prev_rsi = value;
                    }
                }
                out
            }
        };
        self.last = Some(price);
        out
    }
}

/// Signal for every bar; `None` during warm-up.
pub fn indicator_signals(
    cfg: &IndicatorConfig,
    prices: &[f64],
) -> Result<Vec<Option<SignalKind>>, BaselineError> {
    let mut state = IndicatorState::new(*cfg)?;
    Ok(prices.iter().map(|&p| state.update(p)).collect())
}

/// Signal at bar `t`, computed from bars `0..=t` only.
pub fn indicator_signal(
    cfg: &IndicatorConfig,
    series: &PriceSeries,
    t: usize,
) -> Result<SignalKind, BaselineError> {
    cfg.validate()?;
    if t >= series.len() {
        return Err(BaselineError::OutOfRange {
            t,
            len: series.len(),
        });
    }
    let needed = cfg.warmup();
    if t < needed {
        return Err(BaselineError::NotWarmedUp { needed, t });
    }
    let signals = indicator_signals(cfg, &series.prices()[..=t])?;
    Ok(signals[t].expect("warm-up index matches the streaming state"))
}

fn param_order(a: &IndicatorConfig, b: &IndicatorConfig) -> std::cmp::Ordering {
    a.kind().cmp(&b.kind()).then_with(|| {
        a.params()
            .partial_cmp(&b.params())
            .unwrap_or(std::cmp::Ordering::Equal)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TunedBaseline {
    pub config: IndicatorConfig,
    pub final_z: f64,
    /// Every evaluated cell, in grid order.
    pub cells: Vec<(IndicatorConfig, f64)>,
}

/// Exhaustive in-sample search maximizing final profitability.
/// Ties go to the lexicographically smallest parameter vector.
pub fn tune_baseline(
    grid: &[IndicatorConfig],
    series: &PriceSeries,
    bt: &BacktestConfig,
) -> Result<TunedBaseline, BaselineError> {
    if grid.is_empty() {
        return Err(BaselineError::EmptyGrid);
    }
    for cfg in grid {
        cfg.validate()?;
    }
    let cells = grid
        .par_iter()
        .map(|cfg| {
            let mut src = IndicatorSource::new(*cfg)?;
            let report = run_backtest(&mut src, series, bt).map_err(Box::new)?;
            Ok((*cfg, report.final_z))
        })
        .collect::<Result<Vec<_>, BaselineError>>()?;
    let (config, final_z) = cells
        .iter()
        .copied()
        .reduce(|best, cell| {
            if cell.1 > best.1 || (cell.1 == best.1 && param_order(&cell.0, &best.0).is_lt()) {
                cell
            } else {
                best
            }
        })
        .expect("grid is nonempty");
    Ok(TunedBaseline {
        config,
        final_z,
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(prices: Vec<f64>) -> PriceSeries {
        PriceSeries::from_prices("X", prices, 0, 60).unwrap()
    }

    /// Flat, a one-bar crash at bar 22, then recovery.
    fn v_series() -> Vec<f64> {
        let mut p: Vec<f64> = (0..22).map(|i| if i % 2 == 0 { 100.0 } else { 100.2 }).collect();
        p.extend([95.0, 98.5, 99.5, 100.0, 100.2, 100.0, 100.2, 100.0]);
        p
    }

    #[test]
    fn validation() {
        assert!(IndicatorConfig::PriceChannel { lookback: 1 }.validate().is_err());
        assert!(IndicatorConfig::Macd { fast: 26, slow: 12, signal: 9 }.validate().is_err());
        assert!(IndicatorConfig::Rsi { lookback: 14, lower: 70.0, upper: 30.0 }.validate().is_err());
        assert!(IndicatorConfig::Rsi { lookback: 14, lower: 0.0, upper: 30.0 }.validate().is_err());
        assert!(IndicatorConfig::Bollinger { lookback: 20, width: 0.0 }.validate().is_err());
        for kind in IndicatorKind::ALL {
            for cfg in standard_grid(kind) {
                cfg.validate().unwrap();
            }
        }
    }

    #[test]
    fn rising_prices_saturate_rsi() {
        let p: Vec<f64> = (0..60).map(|i| 100.0 + i as f64).collect();
        for v in rsi(&p, 14).into_iter().flatten() {
            assert_eq!(v, 100.0);
        }
        let cfg = IndicatorConfig::Rsi { lookback: 14, lower: 30.0, upper: 70.0 };
        let s = indicator_signals(&cfg, &p).unwrap();
        assert!(s.iter().all(|k| *k != Some(SignalKind::Buy)));
    }

    #[test]
    fn constant_prices_keep_macd_at_zero() {
        let p = vec![42.0; 100];
        for (line, sig) in macd(&p, 12, 26, 9) {
            assert_eq!(line, 0.0);
            assert_eq!(sig, 0.0);
        }
        let cfg = IndicatorConfig::Macd { fast: 12, slow: 26, signal: 9 };
        let s = indicator_signals(&cfg, &p).unwrap();
        assert!(s.iter().flatten().all(|k| *k == SignalKind::Hold));
    }

    #[test]
    fn bollinger_buys_once_at_the_trough() {
        let p = v_series();
        let cfg = IndicatorConfig::Bollinger { lookback: 20, width: 2.0 };
        let s = indicator_signals(&cfg, &p).unwrap();
        let buys: Vec<usize> = s
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == Some(SignalKind::Buy))
            .map(|(i, _)| i)
            .collect();
        assert_eq!(buys, vec![22]);
        // Oracle: direct mean and std of the trailing twenty closes.
        let w = &p[3..23];
        let mean: f64 = w.iter().sum::<f64>() / 20.0;
        let std = (w.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 20.0).sqrt();
        assert!(p[22] < mean - 2.0 * std);
        let band = bollinger(&p, 20, 2.0)[22].unwrap();
        assert!((band.lower - (mean - 2.0 * std)).abs() < 1e-12);
        assert!(((band.upper - band.mid) - (band.mid - band.lower)).abs() < 1e-12);
    }

    #[test]
    fn price_channel_breakouts() {
        let p = vec![1.0, 2.0, 1.5, 2.5, 0.5, 1.0];
        let cfg = IndicatorConfig::PriceChannel { lookback: 3 };
        let s = indicator_signals(&cfg, &p).unwrap();
        assert_eq!(
            s,
            vec![None, None, None, Some(SignalKind::Buy), Some(SignalKind::Sell), Some(SignalKind::Hold)]
        );
        assert_eq!(price_channel(&p, 3)[3], Some((2.0, 1.0)));
    }

    #[test]
    fn streaming_matches_batch_series() {
        let p: Vec<f64> = (0..300)
            .map(|i| 100.0 + 5.0 * (i as f64 * 0.07).sin() + 2.0 * (i as f64 * 0.31).cos())
            .collect();
        let (fast, slow, signal) = (12, 26, 9);
        let m = macd(&p, fast, slow, signal);
        let s = indicator_signals(&IndicatorConfig::Macd { fast, slow, signal }, &p).unwrap();
        for t in slow + signal - 1..p.len() {
            let (h0, h1) = (m[t - 1].0 - m[t - 1].1, m[t].0 - m[t].1);
            let want = if h0 <= 0.0 && h1 > 0.0 {
                SignalKind::Buy
            } else if h0 >= 0.0 && h1 < 0.0 {
                SignalKind::Sell
            } else {
                SignalKind::Hold
            };
            assert_eq!(s[t], Some(want), "bar {t}");
        }
        let r = rsi(&p, 14);
        let cfg = IndicatorConfig::Rsi { lookback: 14, lower: 30.0, upper: 70.0 };
        let s = indicator_signals(&cfg, &p).unwrap();
        for t in 15..p.len() {
            let (a, b) = (r[t - 1].unwrap(), r[t].unwrap());
            assert!((0.0..=100.0).contains(&b));
            let want = if a <= 30.0 && b > 30.0 {
                SignalKind::Buy
            } else if a >= 70.0 && b < 70.0 {
                SignalKind::Sell
            } else {
                SignalKind::Hold
            };
            assert_eq!(s[t], Some(want), "bar {t}");
        }
        assert!(s[..15].iter().all(Option::is_none));
    }

    #[test]
    fn single_bar_query_and_warmup() {
        let ser = series(v_series());
        let cfg = IndicatorConfig::Bollinger { lookback: 20, width: 2.0 };
        assert_eq!(indicator_signal(&cfg, &ser, 22).unwrap(), SignalKind::Buy);
        assert_eq!(indicator_signal(&cfg, &ser, 19).unwrap(), SignalKind::Hold);
        assert_eq!(
            indicator_signal(&cfg, &ser, 18),
            Err(BaselineError::NotWarmedUp { needed: 19, t: 18 })
        );
        assert!(matches!(indicator_signal(&cfg, &ser, 30), Err(BaselineError::OutOfRange { .. })));
    }

    #[test]
    fn tuner_prefers_profitable_and_breaks_ties() {
        let ser = series(v_series());
        let bt = BacktestConfig::default();
        assert_eq!(tune_baseline(&[], &ser, &bt), Err(BaselineError::EmptyGrid));
        let only = IndicatorConfig::PriceChannel { lookback: 25 };
        assert_eq!(tune_baseline(&[only], &ser, &bt).unwrap().config, only);
        // Bollinger buys the trough and rides the recovery; a 25-bar channel never trades.
        let bb = IndicatorConfig::Bollinger { lookback: 20, width: 2.0 };
        let tuned = tune_baseline(&[only, bb], &ser, &bt).unwrap();
        assert_eq!(tuned.config, bb);
        assert!(tuned.final_z > 1.0);
        let a = IndicatorConfig::PriceChannel { lookback: 26 };
        assert_eq!(tune_baseline(&[a, only], &ser, &bt).unwrap().config, only);
    }
}
