//! Long-flat backtesting of signal sources, the multi-instrument parcel
//! variant, and the strategy comparison table.
//!
//! Equity is `Z(t) = C(t)/C(t₀)`: a Buy opens a full position at the bar's
//! close when flat, a Sell closes it when long, repeated signals are ignored
//! and an open position is marked to market.

use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{tune_baseline, BaselineError, IndicatorConfig, IndicatorKind, IndicatorState};
use crate::portfolio::{
    estimate_moments, higher_moment_diagnostic, log_returns, objective_p, optimize_parcel,
    HigherMoments, OptimizerConfig, ParcelWeights, PortfolioError,
};
use crate::signal::{EngineConfig, EngineError, NswEngine, Signal, SignalKind};
use crate::timeseries::PriceSeries;

/// Band in which the fraction of bars carrying a trade is considered typical.
pub const DECISION_FRACTION_RANGE: (f64, f64) = (0.005, 0.05);

#[derive(Debug, Error)]
pub enum BacktestError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Baseline(#[from] BaselineError),
    #[error(transparent)]
    Portfolio(#[from] PortfolioError),
    #[error("series are not aligned: {0}")]
    MisalignedSeries(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("no series given")]
    NoSeries,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl PartialEq for BacktestError {
    fn eq(&self, other: &Self) -> bool {
        self.to_string() == other.to_string()
    }
}

/// Anything that turns a stream of closes into decisions.
pub trait SignalSource {
    /// Feeds one bar. `None` means the bar is not decision-eligible (warm-up).
    fn on_bar(&mut self, price: f64) -> Result<Option<SignalKind>, BacktestError>;
    fn name(&self) -> String;
    /// Parameters echoed into reports.
    fn describe(&self) -> serde_json::Value;
}

/// NSW engine adapter; keeps the per-bar signal log.
#[derive(Debug, Clone)]
pub struct NswSource {
    engine: NswEngine,
    log: Vec<Option<Signal>>,
}

impl NswSource {
    pub fn new(cfg: EngineConfig) -> Result<Self, BacktestError> {
        Ok(Self {
            engine: NswEngine::new(cfg)?,
            log: Vec::new(),
        })
    }

    pub fn signals(&self) -> &[Option<Signal>] {
        &self.log
    }
}

impl SignalSource for NswSource {
    fn on_bar(&mut self, price: f64) -> Result<Option<SignalKind>, BacktestError> {
        match self.engine.step(price) {
            Ok(s) => {
                self.log.push(Some(s));
                Ok(Some(s.kind))
            }
            Err(EngineError::NotWarmedUp { .. }) => {
                self.log.push(None);
                Ok(None)
            }
            Err(e) => Err(e.into()),
        }
    }

    fn name(&self) -> String {
        "NSW".into()
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(self.engine.config()).unwrap_or_default()
    }
}

#[derive(Debug, Clone)]
pub struct IndicatorSource {
    state: IndicatorState,
}

impl IndicatorSource {
    pub fn new(cfg: IndicatorConfig) -> Result<Self, BaselineError> {
        Ok(Self {
            state: IndicatorState::new(cfg)?,
        })
    }
}

impl SignalSource for IndicatorSource {
    fn on_bar(&mut self, price: f64) -> Result<Option<SignalKind>, BacktestError> {
        Ok(self.state.update(price))
    }

    fn name(&self) -> String {
        self.state.config().kind().label().into()
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::to_value(self.state.config()).unwrap_or_default()
    }
}

/// A fixed list of decisions, one per bar.
#[derive(Debug, Clone)]
pub struct ScriptedSource {
    script: Vec<Option<SignalKind>>,
    pos: usize,
}

impl ScriptedSource {
    pub fn new(script: Vec<Option<SignalKind>>) -> Self {
        Self { script, pos: 0 }
    }
}

impl SignalSource for ScriptedSource {
    fn on_bar(&mut self, _price: f64) -> Result<Option<SignalKind>, BacktestError> {
        let s = self.script.get(self.pos).copied().flatten();
        self.pos += 1;
        Ok(s)
    }

    fn name(&self) -> String {
        "scripted".into()
    }

    fn describe(&self) -> serde_json::Value {
        serde_json::Value::Null
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BacktestConfig {
    /// Proportional cost per fill, in basis points.
    pub cost_bps: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self { cost_bps: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Buy,
    Sell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub bar: usize,
    pub timestamp: i64,
    pub side: Side,
    pub price: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub strategy: String,
    pub instrument: String,
    pub timestamps: Vec<i64>,
    pub equity: Vec<f64>,
    pub trades: Vec<Trade>,
    pub eligible_bars: usize,
    pub decision_fraction: f64,
    pub final_z: f64,
    pub config: serde_json::Value,
}

/// The machine-readable part of a report, without per-bar curves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportSummary {
    pub strategy: String,
    pub instrument: String,
    pub final_z: f64,
    pub trades: usize,
    pub eligible_bars: usize,
    pub decision_fraction: f64,
    pub config: serde_json::Value,
}

impl BacktestReport {
    pub fn summary(&self) -> ReportSummary {
        ReportSummary {
            strategy: self.strategy.clone(),
            instrument: self.instrument.clone(),
            final_z: self.final_z,
            trades: self.trades.len(),
            eligible_bars: self.eligible_bars,
            decision_fraction: self.decision_fraction,
            config: self.config.clone(),
        }
    }

    /// Price ratios of completed round trips, in order.
    pub fn round_trip_ratios(&self) -> Vec<f64> {
        self.trades
            .chunks(2)
            .filter(|c| c.len() == 2)
            .map(|c| c[1].price / c[0].price)
            .collect()
    }

    /// Logs the decision fraction and warns when it falls outside the typical band.
    pub fn check_decision_fraction(&self) -> bool {
        let (lo, hi) = DECISION_FRACTION_RANGE;
        let inside = (lo..=hi).contains(&self.decision_fraction);
        if inside {
            log::info!(
                "{} on {}: decision fraction {:.4}",
                self.strategy,
                self.instrument,
                self.decision_fraction
            );
        } else {
            log::warn!(
                "{} on {}: decision fraction {:.4} outside [{lo}, {hi}]",
                self.strategy,
                self.instrument,
                self.decision_fraction
            );
        }
        inside
    }

    pub fn write_equity_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,Z")?;
        for (t, z) in self.timestamps.iter().zip(&self.equity) {
            writeln!(f, "{t},{z}")?;
        }
        f.flush()
    }

    pub fn write_trades_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,side,price")?;
        for tr in &self.trades {
            let side = match tr.side {
                Side::Buy => "buy",
                Side::Sell => "sell",
            };
            writeln!(f, "{},{side},{}", tr.timestamp, tr.price)?;
        }
        f.flush()
    }

    /// `report.json`, `equity.csv` and `trades.csv` under `dir`.
    pub fn write_to(&self, dir: impl AsRef<Path>) -> Result<(), BacktestError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        let json = serde_json::to_string_pretty(&self.summary())?;
        std::fs::write(dir.join("report.json"), json)?;
        self.write_equity_csv(dir.join("equity.csv"))?;
        self.write_trades_csv(dir.join("trades.csv"))?;
        Ok(())
    }
}

/// Drives `source` over every bar of `series`.
pub fn run_backtest(
    source: &mut dyn SignalSource,
    series: &PriceSeries,
    cfg: &BacktestConfig,
) -> Result<BacktestReport, BacktestError> {
    if !(cfg.cost_bps >= 0.0 && cfg.cost_bps < 10_000.0) {
        return Err(BacktestError::Config(format!("cost_bps {} out of range", cfg.cost_bps)));
    }
    let fee = 1.0 - cfg.cost_bps * 1e-4;
    let mut closed = 1.0;
    let mut entry: Option<f64> = None;
    let mut trades = Vec::new();
    let mut equity = Vec::with_capacity(series.len());
    let mut eligible = 0;
    for (bar, (&ts, &price)) in series.timestamps().iter().zip(series.prices()).enumerate() {
        if let Some(kind) = source.on_bar(price)? {
            eligible += 1;
            match (kind, entry) {
                (SignalKind::Buy, None) => {
                    entry = Some(price);
                    closed *= fee;
                    trades.push(Trade {
                        bar,
                        timestamp: ts,
                        side: Side::Buy,
                        price,
                    });
                }
                (SignalKind::Sell, Some(open)) => {
                    closed *= price / open * fee;
                    entry = None;
                    trades.push(Trade {
                        bar,
                        timestamp: ts,
                        side: Side::Sell,
                        price,
                    });
                }
                _ => {}
            }
        }
        equity.push(match entry {
            Some(open) => closed * (price / open),
            None => closed,
        });
    }
    let final_z = equity.last().copied().unwrap_or(1.0);
    Ok(BacktestReport {
        strategy: source.name(),
        instrument: series.symbol().to_string(),
        timestamps: series.timestamps().to_vec(),
        equity,
        decision_fraction: if eligible == 0 {
            0.0
        } else {
            trades.len() as f64 / eligible as f64
        },
        trades,
        eligible_bars: eligible,
        final_z,
        config: source.describe(),
    })
}

/// NSW backtest plus the engine's per-bar signal log.
pub fn run_nsw_backtest(
    cfg: &EngineConfig,
    series: &PriceSeries,
    bt: &BacktestConfig,
) -> Result<(BacktestReport, Vec<Option<Signal>>), BacktestError> {
    let mut src = NswSource::new(*cfg)?;
    let report = run_backtest(&mut src, series, bt)?;
    Ok((report, src.log))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ParcelConfig {
    /// Risk/return compromise `θ`.
    pub theta: f64,
    /// Bars between re-optimizations, also the moment window.
    pub t1: usize,
    /// Return horizon in bars.
    pub tau0: usize,
    pub optimizer: OptimizerConfig,
}

impl Default for ParcelConfig {
    fn default() -> Self {
        Self {
            theta: 0.25,
            t1: 64,
            tau0: 1,
            optimizer: OptimizerConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightRow {
    pub bar: usize,
    pub timestamp: i64,
    pub n: Vec<f64>,
    pub slack: f64,
    /// NaN before the first optimization.
    pub p_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcelReport {
    pub instruments: Vec<String>,
    pub timestamps: Vec<i64>,
    pub equity: Vec<f64>,
    pub final_z: f64,
    pub weights: Vec<WeightRow>,
    pub higher_moments: Option<HigherMoments>,
    pub config: serde_json::Value,
}

impl ParcelReport {
    pub fn write_weights_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let names: Vec<String> = (1..=self.instruments.len()).map(|i| format!("n_{i}")).collect();
        writeln!(f, "t,{},slack,P_theta", names.join(","))?;
        for row in &self.weights {
            let n: Vec<String> = row.n.iter().map(f64::to_string).collect();
            writeln!(f, "{},{},{},{}", row.timestamp, n.join(","), row.slack, row.p_theta)?;
        }
        f.flush()
    }

    pub fn write_equity_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "t,Z")?;
        for (t, z) in self.timestamps.iter().zip(&self.equity) {
            writeln!(f, "{t},{z}")?;
        }
        f.flush()
    }
}

/// Parcel equity from per-instrument equity curves on a common clock.
///
/// Weights start at `1/M` and are re-optimized every `t1` bars from the
/// trailing `t1` returns of horizon `tau0`; slack is held flat.
pub fn parcel_from_equities(
    instruments: Vec<String>,
    timestamps: &[i64],
    equities: &[Vec<f64>],
    cfg: &ParcelConfig,
) -> Result<ParcelReport, BacktestError> {
    let m = equities.len();
    if m == 0 {
        return Err(BacktestError::NoSeries);
    }
    if cfg.t1 == 0 || cfg.tau0 == 0 {
        return Err(BacktestError::Config("t1 and tau0 must be positive".into()));
    }
    let len = timestamps.len();
    if equities.iter().any(|e| e.len() != len) {
        return Err(BacktestError::MisalignedSeries("equity curves differ in length".into()));
    }
    let mut weights = ParcelWeights::equal(m);
    let mut rows = vec![WeightRow {
        bar: 0,
        timestamp: timestamps.first().copied().unwrap_or(0),
        n: weights.n.clone(),
        slack: weights.slack,
        p_theta: f64::NAN,
    }];
    let mut equity = Vec::with_capacity(len);
    let mut base = 1.0;
    let mut anchor = 0;
    for t in 0..len {
        let growth: f64 = weights
            .n
            .iter()
            .zip(equities)
            .map(|(n, z)| n * z[t] / z[anchor])
            .sum::<f64>()
            + weights.slack;
        let value = base * growth;
        equity.push(value);
        if t > 0 && t % cfg.t1 == 0 && t + 1 < len {
            base = value;
            anchor = t;
            if t + 1 >= cfg.tau0 + cfg.t1 {
                let returns = equities
                    .iter()
                    .map(|z| log_returns(&z[..=t], cfg.tau0))
                    .collect::<Result<Vec<_>, _>>()?;
                let moments = estimate_moments(&returns, cfg.t1, cfg.tau0)?;
                let out = optimize_parcel(&moments, cfg.theta, &cfg.optimizer)?;
                weights = out.weights;
                rows.push(WeightRow {
                    bar: t,
                    timestamp: timestamps[t],
                    n: weights.n.clone(),
                    slack: weights.slack,
                    p_theta: objective_p(&weights.n, &moments, cfg.theta)?,
                });
            }
        }
    }
    let higher_moments = equities
        .iter()
        .map(|z| log_returns(z, cfg.tau0))
        .collect::<Result<Vec<_>, _>>()
        .ok()
        .and_then(|r| higher_moment_diagnostic(&r).ok());
    if let Some(h) = &higher_moments {
        log::info!(
            "standardized cross-cumulants: third {:.4}, fourth {:.4}",
            h.third,
            h.fourth
        );
    }
    Ok(ParcelReport {
        instruments,
        timestamps: timestamps.to_vec(),
        final_z: equity.last().copied().unwrap_or(1.0),
        equity,
        weights: rows,
        higher_moments,
        config: serde_json::to_value(cfg)?,
    })
}

pub fn check_aligned(series: &[PriceSeries]) -> Result<(), BacktestError> {
    let first = series.first().ok_or(BacktestError::NoSeries)?;
    for s in &series[1..] {
        if s.timestamps() != first.timestamps() {
            return Err(BacktestError::MisalignedSeries(format!(
                "{} and {} have different timestamps",
                first.symbol(),
                s.symbol()
            )));
        }
    }
    Ok(())
}

/// Runs one NSW engine per series concurrently, then the parcel aggregator.
pub fn run_parcel_backtest(
    engine: &EngineConfig,
    series: &[PriceSeries],
    cfg: &ParcelConfig,
    bt: &BacktestConfig,
) -> Result<(ParcelReport, Vec<BacktestReport>), BacktestError> {
    check_aligned(series)?;
    let reports = series
        .par_iter()
        .map(|s| run_nsw_backtest(engine, s, bt).map(|(r, _)| r))
        .collect::<Result<Vec<_>, _>>()?;
    let equities: Vec<Vec<f64>> = reports.iter().map(|r| r.equity.clone()).collect();
    let names = series.iter().map(|s| s.symbol().to_string()).collect();
    let parcel = parcel_from_equities(names, series[0].timestamps(), &equities, cfg)?;
    Ok((parcel, reports))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub final_z: f64,
    /// The parameters used (tuned for baselines).
    pub config: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub instrument: String,
    pub cells: Vec<ComparisonCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub columns: Vec<String>,
    pub rows: Vec<ComparisonRow>,
}

/// Published full-year minute-bar results, kept for layout comparison only.
pub const REFERENCE_TABLE: [(&str, [f64; 5]); 3] = [
    ("Bank of America 2009", [1.596, 1.631, 1.273, 1.683, 1.852]),
    ("Dell 2009", [1.131, 1.377, 1.311, 1.185, 1.524]),
    ("AT&T 2009", [1.433, 1.431, 1.254, 1.439, 1.721]),
];

/// Published results for a two-month falling market (columns as above).
pub const REFERENCE_DOWNTREND: (&str, [f64; 5]) =
    ("Bank of America May-Jun 2010", [0.99, 0.908, 0.918, 0.872, 1.078]);

impl ComparisonTable {
    pub fn render(&self) -> String {
        let width = self
            .rows
            .iter()
            .map(|r| r.instrument.len())
            .chain(REFERENCE_TABLE.iter().map(|r| r.0.len()))
            .chain([REFERENCE_DOWNTREND.0.len(), 10])
            .max()
            .unwrap_or(10);
        let mut out = format!("{:width$}", "");
        for c in &self.columns {
            out.push_str(&format!(" {c:>7}"));
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{:width$}", r.instrument));
            for c in &r.cells {
                out.push_str(&format!(" {:>7.3}", c.final_z));
            }
            out.push('\n');
        }
        out
    }

    /// The published reference rows in the same layout.
    pub fn render_reference() -> String {
        let width = REFERENCE_TABLE
            .iter()
            .map(|r| r.0.len())
            .chain([REFERENCE_DOWNTREND.0.len()])
            .max()
            .unwrap_or(10);
        let mut out = format!("{:width$}", "");
        for c in ["PC", "BB", "MACD", "RSI", "NSW"] {
            out.push_str(&format!(" {c:>7}"));
        }
        out.push('\n');
        for (name, vals) in REFERENCE_TABLE.iter().chain([&REFERENCE_DOWNTREND]) {
            out.push_str(&format!("{name:width$}"));
            for v in vals {
                out.push_str(&format!(" {v:>7.3}"));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "instrument,{}", self.columns.join(","))?;
        for r in &self.rows {
            let v: Vec<String> = r.cells.iter().map(|c| c.final_z.to_string()).collect();
            writeln!(f, "{},{}", r.instrument, v.join(","))?;
        }
        f.flush()
    }
}

/// Final profitability per instrument and strategy. Baselines are tuned
/// in-sample on each series; NSW runs once, causally, when configured.
pub fn compare_strategies(
    series: &[PriceSeries],
    nsw: Option<&EngineConfig>,
    grids: &[(IndicatorKind, Vec<IndicatorConfig>)],
    bt: &BacktestConfig,
) -> Result<ComparisonTable, BacktestError> {
    if series.is_empty() {
        return Err(BacktestError::NoSeries);
    }
    if grids.is_empty() && nsw.is_none() {
        return Err(BacktestError::Config("nothing to compare".into()));
    }
    let mut columns: Vec<String> = grids.iter().map(|(k, _)| k.label().to_string()).collect();
    if nsw.is_some() {
        columns.push("NSW".into());
    }
    let rows = series
        .par_iter()
        .map(|s| {
            let mut cells = Vec::new();
            for (_, grid) in grids {
                let tuned = tune_baseline(grid, s, bt)?;
                cells.push(ComparisonCell {
                    final_z: tuned.final_z,
                    config: tuned.config.to_string(),
                });
            }
            if let Some(cfg) = nsw {
                let (report, _) = run_nsw_backtest(cfg, s, bt)?;
                report.check_decision_fraction();
                cells.push(ComparisonCell {
                    final_z: report.final_z,
                    config: "NSW".into(),
                });
            }
            Ok(ComparisonRow {
                instrument: s.symbol().to_string(),
                cells,
            })
        })
        .collect::<Result<Vec<_>, BacktestError>>()?;
    Ok(ComparisonTable { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(prices: Vec<f64>) -> PriceSeries {
        PriceSeries::from_prices("X", prices, 0, 60).unwrap()
    }

    fn run(script: Vec<Option<SignalKind>>, prices: Vec<f64>) -> BacktestReport {
        run_backtest(&mut ScriptedSource::new(script), &series(prices), &BacktestConfig::default()).unwrap()
    }

    use SignalKind::{Buy, Hold, Sell};

    #[test]
    fn no_signals_is_flat() {
        let r = run(vec![None; 5], vec![1.0, 2.0, 3.0, 2.0, 1.0]);
        assert_eq!(r.equity, vec![1.0; 5]);
        assert!(r.trades.is_empty());
        assert_eq!(r.decision_fraction, 0.0);
    }

    #[test]
    fn single_round_trip() {
        let r = run(
            vec![Some(Buy), Some(Hold), Some(Sell), Some(Hold)],
            vec![1.0, 1.05, 1.1, 1.3],
        );
        assert_eq!(r.final_z, 1.1);
        assert_eq!(r.equity, vec![1.0, 1.05, 1.1, 1.1]);
        assert_eq!(r.decision_fraction, 0.5);
    }

    #[test]
    fn duplicates_ignored_and_open_position_marked() {
        let r = run(
            vec![Some(Sell), Some(Buy), Some(Buy), Some(Sell), Some(Sell), Some(Buy)],
            vec![5.0, 2.0, 3.0, 4.0, 1.0, 2.0],
        );
        assert_eq!(r.trades.len(), 3);
        assert_eq!(r.round_trip_ratios(), vec![2.0]);
        assert_eq!(r.final_z, 2.0);
        let r = run(vec![None, Some(Buy), None], vec![1.0, 2.0, 3.0]);
        assert_eq!(r.final_z, 1.5);
        assert_eq!(r.eligible_bars, 1);
    }

    #[test]
    fn costs_are_charged_per_fill() {
        let s = series(vec![1.0, 1.0]);
        let r = run_backtest(
            &mut ScriptedSource::new(vec![Some(Buy), Some(Sell)]),
            &s,
            &BacktestConfig { cost_bps: 10.0 },
        )
        .unwrap();
        assert!((r.final_z - 0.999 * 0.999).abs() < 1e-15);
    }

    #[test]
    fn parcel_of_one_follows_its_instrument() {
        let z: Vec<f64> = (0..400).map(|i| 1.0 + 0.001 * i as f64 + 0.01 * (i as f64 * 0.3).sin()).collect();
        let ts: Vec<i64> = (0..400).collect();
        let cfg = ParcelConfig { theta: 1e-9, t1: 50, ..ParcelConfig::default() };
        let p = parcel_from_equities(vec!["A".into()], &ts, std::slice::from_ref(&z), &cfg).unwrap();
        for (a, b) in p.equity.iter().zip(&z) {
            assert!((a - b / z[0]).abs() < 1e-9);
        }
        assert!(p.weights.iter().all(|w| (w.n[0] - 1.0).abs() < 1e-9));
    }

    #[test]
    fn flat_instruments_keep_equal_weights() {
        let ts: Vec<i64> = (0..300).collect();
        let eq = vec![vec![1.0; 300]; 3];
        let p = parcel_from_equities(vec!["A".into(), "B".into(), "C".into()], &ts, &eq, &ParcelConfig::default()).unwrap();
        assert!(p.equity.iter().all(|z| *z == 1.0));
        assert!(p.weights.len() > 1);
        for w in &p.weights {
            for n in &w.n {
                assert!((n - 1.0 / 3.0).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn misaligned_series_rejected() {
        let a = PriceSeries::from_prices("A", vec![1.0; 10], 0, 60).unwrap();
        let b = PriceSeries::from_prices("B", vec![1.0; 10], 60, 60).unwrap();
        let err = run_parcel_backtest(&EngineConfig::default(), &[a, b], &ParcelConfig::default(), &BacktestConfig::default());
        assert!(matches!(err, Err(BacktestError::MisalignedSeries(_))));
    }

    #[test]
    fn comparison_cells_match_direct_runs() {
        let prices: Vec<f64> = (0..200).map(|i| 100.0 + 3.0 * (i as f64 * 0.2).sin()).collect();
        let s = series(prices);
        let cfg = IndicatorConfig::Rsi { lookback: 7, lower: 30.0, upper: 70.0 };
        let table = compare_strategies(
            std::slice::from_ref(&s),
            None,
            &[(IndicatorKind::Rsi, vec![cfg])],
            &BacktestConfig::default(),
        )
        .unwrap();
        assert_eq!(table.rows.len(), 1);
        assert_eq!(table.columns, vec!["RSI".to_string()]);
        let direct = run_backtest(&mut IndicatorSource::new(cfg).unwrap(), &s, &BacktestConfig::default()).unwrap();
        assert_eq!(table.rows[0].cells[0].final_z, direct.final_z);
        assert!(table.render().contains("RSI"));
        assert!(ComparisonTable::render_reference().contains("1.852"));
    }
}
