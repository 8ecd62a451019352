//! Price bars and synthetic SDE sample paths.
//!
//! Bar files are delimited text with a header row; by default the columns
//! are `timestamp,price` (epoch seconds, decimal price). Synthetic paths
//! are produced with an Euler–Maruyama scheme driven by a seeded ChaCha8
//! generator; standard normals are drawn with `rand_distr::StandardNormal`
//! (ziggurat), so a given seed reproduces a path bit for bit.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SeriesError {
    #[error("bar file not found: {0}")]
    MissingFile(String),
    #[error("parse error at row {row}: {msg}")]
    ParseError { row: usize, msg: String },
    #[error("timestamp not strictly increasing at row {0}")]
    NonMonotonicTimestamp(usize),
    #[error("non-positive price at row {0}")]
    NonPositivePrice(usize),
    #[error("bar spacing at row {row} is {found}s, expected {expected}s")]
    IrregularSpacing { row: usize, found: i64, expected: i64 },
    #[error("series needs at least 2 bars, got {0}")]
    TooShort(usize),
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, PartialEq)]
pub enum SimulationError {
    #[error("time step must be positive, got {0}")]
    InvalidStep(f64),
    #[error("need at least one step")]
    NoSteps,
    #[error("diffusion returned a negative value {value} at step {step}")]
    NegativeDiffusion { step: usize, value: f64 },
    #[error("drift/diffusion returned {got} components, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
}

/// What to do when consecutive bars are more than one interval apart.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapPolicy {
    #[default]
    Reject,
    ForwardFill,
}

/// Column mapping for [`load_bars`].
#[derive(Debug, Clone)]
pub struct ColumnSpec {
    pub timestamp: String,
    pub price: String,
    pub delimiter: u8,
    pub gaps: GapPolicy,
    /// Expected spacing; inferred from the first two rows when `None`.
    pub bar_interval: Option<i64>,
}

impl Default for ColumnSpec {
    fn default() -> Self {
        Self {
            timestamp: "timestamp".into(),
            price: "price".into(),
            delimiter: b',',
            gaps: GapPolicy::Reject,
            bar_interval: None,
        }
    }
}

/// Uniformly spaced, strictly positive price observations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceSeries {
    symbol: String,
    timestamps: Vec<i64>,
    prices: Vec<f64>,
    bar_interval: i64,
}

impl PriceSeries {
    /// Builds a validated series. Row numbers in errors are 1-based data rows.
    pub fn new(
        symbol: impl Into<String>,
        timestamps: Vec<i64>,
        prices: Vec<f64>,
        bar_interval: i64,
    ) -> Result<Self, SeriesError> {
        if timestamps.len() != prices.len() {
            return Err(SeriesError::ParseError {
                row: timestamps.len().min(prices.len()) + 1,
                msg: "timestamp and price columns differ in length".into(),
            });
        }
        if prices.len() < 2 {
            return Err(SeriesError::TooShort(prices.len()));
        }
        validate_rows(&timestamps, &prices, bar_interval)?;
        Ok(Self {
            symbol: symbol.into(),
            timestamps,
            prices,
            bar_interval,
        })
    }

    /// Series with timestamps `start, start + interval, ...`.
    pub fn from_prices(
        symbol: impl Into<String>,
        prices: Vec<f64>,
        start: i64,
        bar_interval: i64,
    ) -> Result<Self, SeriesError> {
        let timestamps = (0..prices.len() as i64)
            .map(|k| start + k * bar_interval)
            .collect();
        Self::new(symbol, timestamps, prices, bar_interval)
    }

    pub fn symbol(&self) -> &str {
        &self.symbol
    }

    pub fn timestamps(&self) -> &[i64] {
        &self.timestamps
    }

    pub fn prices(&self) -> &[f64] {
        &self.prices
    }

    pub fn bar_interval(&self) -> i64 {
        self.bar_interval
    }

    pub fn len(&self) -> usize {
        self.prices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prices.is_empty()
    }

    /// First `n` bars (at least 2).
    pub fn prefix(&self, n: usize) -> Result<Self, SeriesError> {
        let n = n.min(self.len());
        Self::new(
            self.symbol.clone(),
            self.timestamps[..n].to_vec(),
            self.prices[..n].to_vec(),
            self.bar_interval,
        )
    }

    /// Every price multiplied by `factor` (> 0).
    pub fn scaled(&self, factor: f64) -> Result<Self, SeriesError> {
        Self::new(
            self.symbol.clone(),
            self.timestamps.clone(),
            self.prices.iter().map(|p| p * factor).collect(),
            self.bar_interval,
        )
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<(), SeriesError> {
        let mut w = csv::Writer::from_path(path.as_ref()).map_err(csv_io)?;
        w.write_record(["timestamp", "price"]).map_err(csv_io)?;
        for (t, p) in self.timestamps.iter().zip(&self.prices) {
            // `{}` on f64 prints the shortest string that round-trips exactly.
            w.write_record([t.to_string(), format!("{p}")])
                .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_io(e: csv::Error) -> SeriesError {
    SeriesError::Io(std::io::Error::other(e.to_string()))
}

fn validate_rows(ts: &[i64], prices: &[f64], interval: i64) -> Result<(), SeriesError> {
    for (i, &p) in prices.iter().enumerate() {
        if !(p > 0.0) || !p.is_finite() {
            return Err(SeriesError::NonPositivePrice(i + 1));
        }
    }
    for i in 1..ts.len() {
        let step = ts[i] - ts[i - 1];
        if step <= 0 {
            return Err(SeriesError::NonMonotonicTimestamp(i + 1));
        }
        if step != interval {
            return Err(SeriesError::IrregularSpacing {
                row: i + 1,
                found: step,
                expected: interval,
            });
        }
    }
    Ok(())
}

/// Reads a delimited bar file and validates it.
pub fn load_bars(path: impl AsRef<Path>, spec: &ColumnSpec) -> Result<PriceSeries, SeriesError> {
    let path = path.as_ref();
    if !path.exists() {
        return Err(SeriesError::MissingFile(path.display().to_string()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(spec.delimiter)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| SeriesError::ParseError {
            row: 0,
            msg: e.to_string(),
        })?;
    let headers = rdr
        .headers()
        .map_err(|e| SeriesError::ParseError {
            row: 0,
            msg: e.to_string(),
        })?
        .clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| SeriesError::MissingColumn(name.to_string()))
    };
    let (ti, pi) = (col(&spec.timestamp)?, col(&spec.price)?);

    let mut timestamps = Vec::new();
    let mut prices = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let row = idx + 1;
        let rec = rec.map_err(|e| SeriesError::ParseError {
            row,
            msg: e.to_string(),
        })?;
        let field = |i: usize| {
            rec.get(i).ok_or_else(|| SeriesError::ParseError {
                row,
                msg: "missing field".into(),
            })
        };
        let t: i64 = field(ti)?.parse().map_err(|e| SeriesError::ParseError {
            row,
            msg: format!("timestamp: {e}"),
        })?;
        let p: f64 = field(pi)?.parse().map_err(|e| SeriesError::ParseError {
            row,
            msg: format!("price: {e}"),
        })?;
        if !(p > 0.0) || !p.is_finite() {
            return Err(SeriesError::NonPositivePrice(row));
        }
        if let Some(&last) = timestamps.last() {
            if t <= last {
                return Err(SeriesError::NonMonotonicTimestamp(row));
            }
        }
        timestamps.push(t);
        prices.push(p);
    }
    if prices.len() < 2 {
        return Err(SeriesError::TooShort(prices.len()));
    }

    let interval = spec.bar_interval.unwrap_or(timestamps[1] - timestamps[0]);
    let (timestamps, prices) = match spec.gaps {
        GapPolicy::Reject => (timestamps, prices),
        GapPolicy::ForwardFill => forward_fill(&timestamps, &prices, interval)?,
    };
    PriceSeries::new(
        path.file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        timestamps,
        prices,
        interval,
    )
}

fn forward_fill(
    ts: &[i64],
    prices: &[f64],
    interval: i64,
) -> Result<(Vec<i64>, Vec<f64>), SeriesError> {
    let mut out_t = vec![ts[0]];
    let mut out_p = vec![prices[0]];
    for i in 1..ts.len() {
        let step = ts[i] - ts[i - 1];
        if step % interval != 0 {
            return Err(SeriesError::IrregularSpacing {
                row: i + 1,
                found: step,
                expected: interval,
            });
        }
        let mut t = ts[i - 1] + interval;
        while t < ts[i] {
            out_t.push(t);
            out_p.push(prices[i - 1]);
            t += interval;
        }
        out_t.push(ts[i]);
        out_p.push(prices[i]);
    }
    Ok((out_t, out_p))
}

/// A simulated realization of a J-dimensional Ito process.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplePath {
    pub values: Vec<Vec<f64>>,
    pub dt: f64,
    pub seed: u64,
}

impl SamplePath {
    pub fn dim(&self) -> usize {
        self.values.first().map_or(0, Vec::len)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// One coordinate as a flat vector.
    pub fn component(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|v| v[j]).collect()
    }

    /// Interprets coordinate `j` as a log-price around `base`, giving
    /// `base * exp(y)` on a uniform bar grid.
    pub fn to_price_series(
        &self,
        j: usize,
        base: f64,
        symbol: &str,
        start: i64,
        bar_interval: i64,
    ) -> Result<PriceSeries, SeriesError> {
        let prices = self.values.iter().map(|v| base * v[j].exp()).collect();
        PriceSeries::from_prices(symbol, prices, start, bar_interval)
    }
}

/// Euler–Maruyama integration of `dY = F(Y) dτ + G(Y) dω` with diagonal `G`.
///
/// Returns `n_steps + 1` states starting at `y0`.
pub fn simulate_sde<F, G>(
    drift: F,
    diffusion: G,
    y0: &[f64],
    dt: f64,
    n_steps: usize,
    seed: u64,
) -> Result<SamplePath, SimulationError>
where
    F: Fn(&[f64]) -> Vec<f64>,
    G: Fn(&[f64]) -> Vec<f64>,
{
    if !(dt > 0.0) {
        return Err(SimulationError::InvalidStep(dt));
    }
    if n_steps == 0 {
        return Err(SimulationError::NoSteps);
    }
    let dim = y0.len();
    let sqrt_dt = dt.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(n_steps + 1);
    values.push(y0.to_vec());
    for step in 0..n_steps {
        let y = &values[step];
        let f = drift(y);
        let g = diffusion(y);
        if f.len() != dim {
            return Err(SimulationError::DimensionMismatch {
                expected: dim,
                got: f.len(),
            });
        }
        if g.len() != dim {
            return Err(SimulationError::DimensionMismatch {
                expected: dim,
                got: g.len(),
            });
        }
        let mut next = Vec::with_capacity(dim);
        for j in 0..dim {
            if g[j] < 0.0 {
                return Err(SimulationError::NegativeDiffusion { step, value: g[j] });
            }
            let xi: f64 = StandardNormal.sample(&mut rng);
            next.push(y[j] + f[j] * dt + g[j] * sqrt_dt * xi);
        }
        values.push(next);
    }
    Ok(SamplePath { values, dt, seed })
}

/// Writes one path coordinate as a `timestamp,value` file (diagnostics).
pub fn write_path_csv(
    path: &SamplePath,
    j: usize,
    out: impl AsRef<Path>,
    bar_interval: i64,
) -> Result<(), SeriesError> {
    let mut f = std::io::BufWriter::new(File::create(out)?);
    writeln!(f, "timestamp,price")?;
    for (k, v) in path.values.iter().enumerate() {
        writeln!(f, "{},{}", k as i64 * bar_interval, v[j])?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn two_row_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "timestamp,price\n0,1.0\n60,1.1\n");
        let s = load_bars(&p, &ColumnSpec::default()).unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s.bar_interval(), 60);
        assert_eq!(s.prices(), &[1.0, 1.1]);
    }

    #[test]
    fn negative_price_row_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "timestamp,price\n0,1.0\n60,1.1\n120,-1\n");
        match load_bars(&p, &ColumnSpec::default()) {
            Err(SeriesError::NonPositivePrice(3)) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_monotonic_row_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "timestamp,price\n0,1\n60,1\n60,1\n");
        assert!(matches!(
            load_bars(&p, &ColumnSpec::default()),
            Err(SeriesError::NonMonotonicTimestamp(3))
        ));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(
            load_bars("/nonexistent/bars.csv", &ColumnSpec::default()),
            Err(SeriesError::MissingFile(_))
        ));
    }

    #[test]
    fn bad_number_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "timestamp,price\n0,1\n60,abc\n");
        assert!(matches!(
            load_bars(&p, &ColumnSpec::default()),
            Err(SeriesError::ParseError { row: 2, .. })
        ));
    }

    #[test]
    fn gaps_rejected_or_filled() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "timestamp,price\n0,1\n60,2\n240,3\n");
        assert!(matches!(
            load_bars(&p, &ColumnSpec::default()),
            Err(SeriesError::IrregularSpacing { row: 3, .. })
        ));
        let spec = ColumnSpec {
            gaps: GapPolicy::ForwardFill,
            ..ColumnSpec::default()
        };
        let s = load_bars(&p, &spec).unwrap();
        assert_eq!(s.timestamps(), &[0, 60, 120, 180, 240]);
        assert_eq!(s.prices(), &[1.0, 2.0, 2.0, 2.0, 3.0]);
    }

    #[test]
    fn custom_columns() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "close;time\n5.0;100\n5.5;160\n");
        let spec = ColumnSpec {
            timestamp: "time".into(),
            price: "close".into(),
            delimiter: b';',
            ..ColumnSpec::default()
        };
        let s = load_bars(&p, &spec).unwrap();
        assert_eq!(s.timestamps(), &[100, 160]);
    }

    #[test]
    fn deterministic_decay() {
        let p = simulate_sde(|y| vec![-y[0]], |_| vec![0.0], &[1.0], 0.1, 1, 7).unwrap();
        assert_eq!(p.values[1][0], 0.9);
    }

    #[test]
    fn same_seed_same_path() {
        let run = |seed| {
            simulate_sde(|y| vec![-y[0]], |_| vec![1.0], &[0.0], 0.01, 500, seed).unwrap()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn simulation_errors() {
        assert_eq!(
            simulate_sde(|y| y.to_vec(), |_| vec![1.0], &[0.0], 0.0, 1, 0).unwrap_err(),
            SimulationError::InvalidStep(0.0)
        );
        assert!(matches!(
            simulate_sde(|y| y.to_vec(), |_| vec![-1.0], &[0.0], 0.1, 1, 0),
            Err(SimulationError::NegativeDiffusion { step: 0, .. })
        ));
    }

    #[test]
    fn zero_diffusion_matches_explicit_euler() {
        let drift = |y: &[f64]| vec![y[1], -y[0] - 0.1 * y[1]];
        let p = simulate_sde(drift, |_| vec![0.0, 0.0], &[1.0, 0.0], 0.01, 1000, 1).unwrap();
        let mut y = [1.0_f64, 0.0];
        for k in 0..1000 {
            let f = drift(&y);
            y = [y[0] + f[0] * 0.01, y[1] + f[1] * 0.01];
            assert!((p.values[k + 1][0] - y[0]).abs() < 1e-12);
            assert!((p.values[k + 1][1] - y[1]).abs() < 1e-12);
        }
    }
}
