//! Analyzing wavelets and the causal undecimated transform.
//!
//! The level-`j` analyzing filter is the base high-pass filter with each tap
//! held for `2^j` samples and scaled by `2^{-j/2}`, a sampled version of
//! `2^{-j/2} ψ(2^{-j} t)`. The filter is applied to the most recent samples
//! ending at bar `t`, tap 0 on the oldest sample, so the output at `t` never
//! depends on later bars.
//!
//! Modes are numbered from the coarsest level: mode 1 is level `J`, mode `J`
//! is level 1.

use std::f64::consts::{PI, SQRT_2};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timeseries::PriceSeries;

/// Taps smaller than this are dropped from the Battle–Lemarié filters.
pub const BATTLE_LEMARIE_CUTOFF: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum WaveletError {
    #[error("unsupported wavelet {family:?} of order {order}")]
    UnsupportedFamily { family: WaveletFamily, order: u32 },
    #[error("series of {len} bars is shorter than the coarsest support {support}")]
    SeriesTooShort { len: usize, support: usize },
    #[error("need at least one level")]
    NoLevels,
    #[error("bar {t} / mode {mode} outside the coefficient range")]
    OutOfRange { t: usize, mode: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WaveletFamily {
    Haar,
    Daubechies,
    BattleLemarie,
}

/// A zero-mean, unit-energy high-pass filter plus its companion low-pass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletFilter {
    pub family: WaveletFamily,
    pub order: u32,
    /// High-pass (wavelet) taps, oldest-sample first.
    pub taps: Vec<f64>,
    /// Low-pass (scaling) taps, `Σ = √2`.
    pub lowpass: Vec<f64>,
    /// Largest magnitude dropped by truncation (0 for compact families).
    pub discarded_max: f64,
}

impl WaveletFilter {
    pub fn effective_support(&self) -> usize {
        self.taps.len()
    }

    /// Samples covered by the level-`j` filter.
    pub fn support_at(&self, level: u32) -> usize {
        self.taps.len() << level
    }

    /// Level-`j` analyzing filter.
    pub fn dilated(&self, level: u32) -> Vec<f64> {
        let scale = 2f64.powf(-(level as f64) / 2.0);
        let rep = 1usize << level;
        self.taps
            .iter()
            .flat_map(|&c| std::iter::repeat_n(c * scale, rep))
            .collect()
    }
}

/// Builds the analyzing filter for `family` and `order`.
///
/// Haar ignores `order` (pass 1). Daubechies orders 2 and 3 are the 4- and
/// 6-tap filters. Battle–Lemarié orders 1..=3 are the orthonormalized linear,
/// quadratic and cubic spline wavelets, truncated at [`BATTLE_LEMARIE_CUTOFF`].
pub fn make_wavelet(family: WaveletFamily, order: u32) -> Result<WaveletFilter, WaveletError> {
    let unsupported = Err(WaveletError::UnsupportedFamily { family, order });
    match family {
        WaveletFamily::Haar => {
            if order > 1 {
                return unsupported;
            }
            let h = vec![1.0 / SQRT_2, 1.0 / SQRT_2];
            Ok(WaveletFilter {
                family,
                order: 1,
                taps: quadrature_mirror(&h),
                lowpass: h,
                discarded_max: 0.0,
            })
        }
        WaveletFamily::Daubechies => {
            let h = match order {
                2 => {
                    let s3 = 3f64.sqrt();
                    let d = 4.0 * SQRT_2;
                    vec![(1.0 + s3) / d, (3.0 + s3) / d, (3.0 - s3) / d, (1.0 - s3) / d]
                }
                3 => {
                    let s10 = 10f64.sqrt();
                    let r = (5.0 + 2.0 * s10).sqrt();
                    let d = 16.0 * SQRT_2;
                    vec![
                        (1.0 + s10 + r) / d,
                        (5.0 + s10 + 3.0 * r) / d,
                        (10.0 - 2.0 * s10 + 2.0 * r) / d,
                        (10.0 - 2.0 * s10 - 2.0 * r) / d,
                        (5.0 + s10 - 3.0 * r) / d,
                        (1.0 + s10 - r) / d,
                    ]
                }
                _ => return unsupported,
            };
            Ok(WaveletFilter {
                family,
                order,
                taps: quadrature_mirror(&h),
                lowpass: h,
                discarded_max: 0.0,
            })
        }
        WaveletFamily::BattleLemarie => {
            if !(1..=3).contains(&order) {
                return unsupported;
            }
            Ok(battle_lemarie(order))
        }
    }
}

/// `g_n = (-1)^n h_{N-1-n}`.
fn quadrature_mirror(h: &[f64]) -> Vec<f64> {
    let n = h.len();
    (0..n)
        .map(|k| {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * h[n - 1 - k]
        })
        .collect()
}

/// `Σ_k sinc(x + πk)^{2m}`, the periodized B-spline autocorrelation.
fn spline_autocorrelation(omega: f64, m: i32) -> f64 {
    let x = omega / 2.0;
    let sinc = |u: f64| if u.abs() < 1e-12 { 1.0 } else { u.sin() / u };
    // Terms fall off like k^{-2m}; 4000 terms leaves < 1e-13 for m >= 2.
    let mut total = 0.0;
    for k in -2000..=2000 {
        total += sinc(x + PI * k as f64).powi(2 * m);
    }
    total
}

fn battle_lemarie(order: u32) -> WaveletFilter {
    // Spline order (polynomial degree + 1).
    let m = order as i32 + 1;
    let shift = if m % 2 == 1 { 0.5 } else { 0.0 };
    let samples = 2048;
    let amplitude: Vec<f64> = (0..samples)
        .map(|i| {
            let w = -PI + 2.0 * PI * i as f64 / samples as f64;
            (w / 2.0).cos().powi(m)
                * (spline_autocorrelation(w, m) / spline_autocorrelation(2.0 * w, m)).sqrt()
        })
        .collect();
    // h_n = √2/(2π) ∫ A(ω) cos(ω (n - shift)) dω, trapezoid on the period.
    let coeff = |n: i64| -> f64 {
        let s: f64 = amplitude
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let w = -PI + 2.0 * PI * i as f64 / samples as f64;
                a * (w * (n as f64 - shift)).cos()
            })
            .sum();
        SQRT_2 * s / samples as f64
    };
    let span = 80i64;
    let h: Vec<(i64, f64)> = (-span..=span).map(|n| (n, coeff(n))).collect();
    let lookup = |n: i64| h.iter().find(|(k, _)| *k == n).map_or(0.0, |(_, v)| *v);
    // g_n = (-1)^n h_{1-n}
    let g: Vec<(i64, f64)> = (-span + 1..=span)
        .map(|n| {
            let sign = if n.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            (n, sign * lookup(1 - n))
        })
        .collect();

    let (lowpass, _) = truncate(&h.iter().map(|p| p.1).collect::<Vec<_>>());
    let (mut taps, discarded_max) = truncate(&g.iter().map(|p| p.1).collect::<Vec<_>>());
    let mean = taps.iter().sum::<f64>() / taps.len() as f64;
    taps.iter_mut().for_each(|t| *t -= mean);
    let norm = taps.iter().map(|t| t * t).sum::<f64>().sqrt();
    taps.iter_mut().for_each(|t| *t /= norm);
    let lsum: f64 = lowpass.iter().sum();
    let lowpass = lowpass.iter().map(|v| v * SQRT_2 / lsum).collect();

    WaveletFilter {
        family: WaveletFamily::BattleLemarie,
        order,
        taps,
        lowpass,
        discarded_max,
    }
}

/// Keeps the contiguous block between the first and last tap with
/// magnitude above the cutoff; returns it with the largest dropped magnitude.
fn truncate(v: &[f64]) -> (Vec<f64>, f64) {
    let first = v.iter().position(|x| x.abs() >= BATTLE_LEMARIE_CUTOFF).unwrap_or(0);
    let last = v
        .iter()
        .rposition(|x| x.abs() >= BATTLE_LEMARIE_CUTOFF)
        .unwrap_or(v.len() - 1);
    let dropped = v[..first]
        .iter()
        .chain(&v[last + 1..])
        .fold(0.0f64, |m, x| m.max(x.abs()));
    (v[first..=last].to_vec(), dropped)
}

/// Per-bar coefficient vectors `Y(t)`, defined from `valid_from` on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveletCoeffSeries {
    pub levels: u32,
    pub valid_from: usize,
    coeffs: Vec<Vec<f64>>,
}

impl WaveletCoeffSeries {
    pub fn from_parts(levels: u32, valid_from: usize, coeffs: Vec<Vec<f64>>) -> Self {
        Self {
            levels,
            valid_from,
            coeffs,
        }
    }

    /// Coefficients at bar `t`, `None` before `valid_from` or past the end.
    pub fn at(&self, t: usize) -> Option<&[f64]> {
        t.checked_sub(self.valid_from)
            .and_then(|i| self.coeffs.get(i))
            .map(Vec::as_slice)
    }

    /// Index one past the last bar with coefficients.
    pub fn end(&self) -> usize {
        self.valid_from + self.coeffs.len()
    }

    /// All coefficient vectors in bar order.
    pub fn vectors(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// The `len` vectors ending at bar `t` (inclusive).
    pub fn window(&self, t: usize, len: usize) -> Option<&[Vec<f64>]> {
        let end = t.checked_sub(self.valid_from)? + 1;
        let start = end.checked_sub(len)?;
        self.coeffs.get(start..end)
    }

    /// One mode (1-based) as a flat series.
    pub fn mode(&self, mode: usize) -> Vec<f64> {
        self.coeffs.iter().map(|v| v[mode - 1]).collect()
    }

    pub fn negated(&self) -> Self {
        Self {
            levels: self.levels,
            valid_from: self.valid_from,
            coeffs: self
                .coeffs
                .iter()
                .map(|v| v.iter().map(|x| -x).collect())
                .collect(),
        }
    }

    /// Writes `t,Y1,...,YJ`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        let header: Vec<String> = (1..=self.levels).map(|j| format!("Y{j}")).collect();
        writeln!(f, "t,{}", header.join(","))?;
        for (i, v) in self.coeffs.iter().enumerate() {
            let row: Vec<String> = v.iter().map(|x| x.to_string()).collect();
            writeln!(f, "{},{}", self.valid_from + i, row.join(","))?;
        }
        Ok(())
    }
}

/// Precomputed dilated filters for a fixed family and depth.
#[derive(Debug, Clone)]
pub struct Transformer {
    levels: u32,
    /// Indexed by mode - 1, i.e. coarsest first.
    filters: Vec<Vec<f64>>,
}

impl Transformer {
    pub fn new(filter: &WaveletFilter, levels: u32) -> Result<Self, WaveletError> {
        if levels == 0 {
            return Err(WaveletError::NoLevels);
        }
        let filters = (1..=levels).rev().map(|j| filter.dilated(j)).collect();
        Ok(Self { levels, filters })
    }

    pub fn levels(&self) -> u32 {
        self.levels
    }

    /// Samples needed for the coarsest level.
    pub fn support(&self) -> usize {
        self.filters[0].len()
    }

    pub fn valid_from(&self) -> usize {
        self.support() - 1
    }

    /// `Y(t)` from `prices[..=t]`; `None` before full support.
    pub fn coefficients_at(&self, prices: &[f64], t: usize) -> Option<Vec<f64>> {
        if t < self.valid_from() || t >= prices.len() {
            return None;
        }
        Some(
            self.filters
                .iter()
                .map(|d| {
                    let start = t + 1 - d.len();
                    d.iter().zip(&prices[start..=t]).map(|(a, x)| a * x).sum()
                })
                .collect(),
        )
    }

    pub fn apply(&self, prices: &[f64]) -> Result<WaveletCoeffSeries, WaveletError> {
        if prices.len() < self.support() {
            return Err(WaveletError::SeriesTooShort {
                len: prices.len(),
                support: self.support(),
            });
        }
        let coeffs = (self.valid_from()..prices.len())
            .map(|t| self.coefficients_at(prices, t).expect("t within range"))
            .collect();
        Ok(WaveletCoeffSeries::from_parts(self.levels, self.valid_from(), coeffs))
    }
}

/// Sliding transform of a price series into `levels` coefficient modes.
pub fn transform(
    series: &PriceSeries,
    filter: &WaveletFilter,
    levels: u32,
) -> Result<WaveletCoeffSeries, WaveletError> {
    Transformer::new(filter, levels)?.apply(series.prices())
}

/// `dY_mode(t) = Y_mode(t) - Y_mode(t-1)`.
pub fn coeff_increment(
    coeffs: &WaveletCoeffSeries,
    mode: usize,
    t: usize,
) -> Result<f64, WaveletError> {
    let out = WaveletError::OutOfRange { t, mode };
    if mode == 0 || mode > coeffs.levels as usize || t <= coeffs.valid_from {
        return Err(out);
    }
    match (coeffs.at(t), coeffs.at(t - 1)) {
        (Some(now), Some(prev)) => Ok(now[mode - 1] - prev[mode - 1]),
        _ => Err(out),
    }
}
