//! Stationary densities of fitted models and the quasi-stationarity check.

use std::io::Write;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sde_fit::SdeModel;

/// Fraction of grid points at each end that count as the boundary band.
const EDGE_FRACTION: f64 = 0.05;
/// Boundary-band mass above this means the grid does not contain the density.
const EDGE_MASS_LIMIT: f64 = 0.01;

#[derive(Debug, Error, PartialEq)]
pub enum DensityError {
    #[error("density mass {edge_mass:.4} sits on the grid boundary; widen the grid")]
    NonIntegrable { edge_mass: f64 },
    #[error("mode {mode} outside 1..={dims}")]
    BadMode { mode: usize, dims: usize },
    #[error("grid needs at least 3 points and a positive span")]
    BadGrid,
    #[error("density grids do not overlap")]
    GridMismatch,
    #[error("need at least 8 sample points, got {0}")]
    TooFewPoints(usize),
    #[error("risk level must lie in (0, 1), got {0}")]
    BadRiskLevel(f64),
}

/// Grid policy: `mean ± span·std` of the mode's calibration sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub span: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            span: 5.0,
            points: 1024,
        }
    }
}

/// Gridded density with its CDF and `p_s = CDF(0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationaryDensity {
    pub grid: Vec<f64>,
    pub pdf: Vec<f64>,
    pub cdf: Vec<f64>,
    pub p_s: f64,
}

impl StationaryDensity {
    /// Normalizes `weights` on a uniform `grid` and derives the CDF.
    pub fn from_unnormalized(grid: Vec<f64>, weights: Vec<f64>) -> Result<Self, DensityError> {
        if grid.len() < 3 || grid.len() != weights.len() {
            return Err(DensityError::BadGrid);
        }
        let mut cum = vec![0.0; grid.len()];
        for i in 1..grid.len() {
            cum[i] = cum[i - 1] + 0.5 * (weights[i] + weights[i - 1]) * (grid[i] - grid[i - 1]);
        }
        let total = cum[cum.len() - 1];
        if !(total > 0.0) || !total.is_finite() {
            return Err(DensityError::NonIntegrable {
                edge_mass: f64::NAN,
            });
        }
        let pdf: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut cdf: Vec<f64> = cum.iter().map(|c| c / total).collect();
        let last = cdf.len() - 1;
        cdf[last] = 1.0;
        let mut d = Self {
            grid,
            pdf,
            cdf,
            p_s: 0.0,
        };
        d.p_s = d.cdf_at(0.0);
        Ok(d)
    }

    pub fn step(&self) -> f64 {
        self.grid[1] - self.grid[0]
    }

    pub fn lower(&self) -> f64 {
        self.grid[0]
    }

    pub fn upper(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// CDF by linear interpolation, 0 below the grid and 1 above it.
    pub fn cdf_at(&self, y: f64) -> f64 {
        interp(&self.grid, &self.cdf, y, 0.0, 1.0)
    }

    pub fn pdf_at(&self, y: f64) -> f64 {
        interp(&self.grid, &self.pdf, y, 0.0, 0.0)
    }

    /// Trapezoidal integral of the pdf.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.grid, &self.pdf)
    }

    /// Grid point with the largest density.
    pub fn argmax(&self) -> f64 {
        let i = self
            .pdf
            .iter()
            .enumerate()
            .fold(0, |best, (i, p)| if *p > self.pdf[best] { i } else { best });
        self.grid[i]
    }

    /// Local maxima of the pdf that exceed `rel` times the global maximum.
    pub fn modes(&self, rel: f64) -> Vec<f64> {
        let top = self.pdf.iter().cloned().fold(0.0, f64::max);
        (1..self.pdf.len() - 1)
            .filter(|&i| {
                self.pdf[i] >= self.pdf[i - 1] && self.pdf[i] > self.pdf[i + 1] && self.pdf[i] > rel * top
            })
            .map(|i| self.grid[i])
            .collect()
    }

    /// Density of `-Y`.
    pub fn reflected(&self) -> Self {
        let grid: Vec<f64> = self.grid.iter().rev().map(|y| -y).collect();
        let weights: Vec<f64> = self.pdf.iter().rev().copied().collect();
        Self::from_unnormalized(grid, weights).expect("reflection of a valid density")
    }

    /// Writes `y,pdf,cdf`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "y,pdf,cdf")?;
        for ((y, p), c) in self.grid.iter().zip(&self.pdf).zip(&self.cdf) {
            writeln!(f, "{y},{p},{c}")?;
        }
        Ok(())
    }

    fn resampled(&self, start: f64, step: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| self.pdf_at(start + step * i as f64)).collect()
    }
}

fn interp(xs: &[f64], ys: &[f64], x: f64, below: f64, above: f64) -> f64 {
    let n = xs.len();
    if x < xs[0] {
        return below;
    }
    if x > xs[n - 1] {
        return above;
    }
    let h = xs[1] - xs[0];
    let pos = ((x - xs[0]) / h).clamp(0.0, (n - 1) as f64);
    let i = (pos.floor() as usize).min(n - 2);
    let w = pos - i as f64;
    ys[i] * (1.0 - w) + ys[i + 1] * w
}

fn trapezoid(xs: &[f64], ys: &[f64]) -> f64 {
    xs.windows(2)
        .zip(ys.windows(2))
        .map(|(x, y)| 0.5 * (y[0] + y[1]) * (x[1] - x[0]))
        .sum()
}

/// Density `∝ exp(∫ 2F/G² dy)` of one mode, other modes held at their
/// calibration means.
pub fn stationary_density(
    model: &SdeModel,
    mode: usize,
    grid: GridSpec,
) -> Result<StationaryDensity, DensityError> {
    let dims = model.dims();
    if mode == 0 || mode > dims {
        return Err(DensityError::BadMode { mode, dims });
    }
    if grid.points < 3 || !(grid.span > 0.0) {
        return Err(DensityError::BadGrid);
    }
    let j = mode - 1;
    let std = &model.basis.standardization;
    let (mu, sigma) = (std[j].mean, std[j].std);
    let lo = mu - grid.span * sigma;
    let h = 2.0 * grid.span * sigma / (grid.points - 1) as f64;
    let ys: Vec<f64> = (0..grid.points).map(|i| lo + h * i as f64).collect();

    let mut point: Vec<f64> = std.iter().map(|s| s.mean).collect();
    let integrand: Vec<f64> = ys
        .iter()
        .map(|&y| {
            point[j] = y;
            let (f, g) = model.eval(&point);
            2.0 * f[j] / (g[j] * g[j])
        })
        .collect();
    if integrand.iter().any(|v| !v.is_finite()) {
        return Err(DensityError::NonIntegrable {
            edge_mass: f64::NAN,
        });
    }
    let mut w = vec![0.0; ys.len()];
    for i in 1..ys.len() {
        w[i] = w[i - 1] + 0.5 * (integrand[i] + integrand[i - 1]) * h;
    }
    let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = w.iter().map(|v| (v - wmax).exp()).collect();
    let density = StationaryDensity::from_unnormalized(ys, weights)?;

    let band = ((grid.points as f64 * EDGE_FRACTION).ceil() as usize).max(1);
    let n = grid.points;
    let edge_mass = density.cdf[band] + (1.0 - density.cdf[n - 1 - band]);
    if edge_mass > EDGE_MASS_LIMIT {
        return Err(DensityError::NonIntegrable { edge_mass });
    }
    Ok(density)
}

/// `f(z) = ∫ f_now(y) f_shifted(y + z) dy` on a common grid, via FFT.
pub fn density_convolution(
    d_now: &StationaryDensity,
    d_shifted: &StationaryDensity,
) -> Result<StationaryDensity, DensityError> {
    if d_now.upper() < d_shifted.lower() || d_shifted.upper() < d_now.lower() {
        return Err(DensityError::GridMismatch);
    }
    let h = d_now.step().min(d_shifted.step());
    let count = |d: &StationaryDensity| ((d.upper() - d.lower()) / h).round() as usize + 1;
    let (n1, n2) = (count(d_now), count(d_shifted));
    let f1 = d_now.resampled(d_now.lower(), h, n1);
    let f2 = d_shifted.resampled(d_shifted.lower(), h, n2);

    let len = (n1 + n2 - 1).next_power_of_two();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);
    let pad = |v: &[f64]| {
        let mut out: Vec<Complex<f64>> = v.iter().map(|&x| Complex::new(x, 0.0)).collect();
        out.resize(len, Complex::new(0.0, 0.0));
        out
    };
    let (mut a, mut b) = (pad(&f1), pad(&f2));
    fwd.process(&mut a);
    fwd.process(&mut b);
    let mut c: Vec<Complex<f64>> = a.iter().zip(&b).map(|(x, y)| x.conj() * y).collect();
    inv.process(&mut c);

    // Lag k = m - i runs from -(n1-1) to n2-1.
    let z0 = d_shifted.lower() - d_now.lower();
    let mut grid = Vec::with_capacity(n1 + n2 - 1);
    let mut weights = Vec::with_capacity(n1 + n2 - 1);
    for k in -(n1 as i64 - 1)..=(n2 as i64 - 1) {
        let idx = k.rem_euclid(len as i64) as usize;
        grid.push(z0 + k as f64 * h);
        weights.push((c[idx].re / len as f64 * h).max(0.0));
    }
    StationaryDensity::from_unnormalized(grid, weights)
}

/// Asymptotic Kolmogorov quantile `k(α) = sqrt(-ln(α/2) / 2)`.
pub fn kolmogorov_k(alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsOutcome {
    pub statistic: f64,
    pub threshold: f64,
    pub pass: bool,
}

/// Compares two model CDFs at `sample_points`; passes when the largest gap
/// is below `k(α₂)/√N`. `k_override` replaces the asymptotic quantile.
pub fn ks_quasistationarity(
    d_now: &StationaryDensity,
    d_shifted: &StationaryDensity,
    sample_points: &[f64],
    alpha2: f64,
    k_override: Option<f64>,
) -> Result<KsOutcome, DensityError> {
    let n = sample_points.len();
    if n < 8 {
        return Err(DensityError::TooFewPoints(n));
    }
    if !(alpha2 > 0.0 && alpha2 < 1.0) {
        return Err(DensityError::BadRiskLevel(alpha2));
    }
    let statistic = sample_points
        .iter()
        .map(|&y| (d_now.cdf_at(y) - d_shifted.cdf_at(y)).abs())
        .fold(0.0, f64::max);
    let threshold = k_override.unwrap_or_else(|| kolmogorov_k(alpha2)) / (n as f64).sqrt();
    Ok(KsOutcome {
        statistic,
        threshold,
        pass: statistic < threshold,
    })
}
