//! Parcel weights that maximize `P(θ) = Φ((1-θ) Z / σ)`.
//!
//! `Z = Σ nᵢ Xᵢ` is the parcel's mean log-return and `σ² = nᵀ Λ n` its
//! variance, both from trailing-window moments of per-instrument equity
//! curves. Weights live in `{nᵢ ≥ 0, Σ nᵢ ≤ 1}`; the unused fraction
//! (slack) is held flat.
//!
//! `P` depends on `n` only through `Z/σ`, so it is constant along rays from
//! the origin. After convergence the optimizer therefore scales any
//! positive-return parcel up to full investment, which picks one point of
//! the maximizing ray without changing `P`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use thiserror::Error;

/// Tolerance on negative parcel variance and on Λ's smallest eigenvalue.
pub const PSD_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PortfolioError {
    #[error("equity must be positive, found {value} at {index}")]
    NonPositiveEquity { index: usize, value: f64 },
    #[error("sequence of length {len} is too short (need {needed})")]
    TooShort { len: usize, needed: usize },
    #[error("window of {t1} bars exceeds available length {len}")]
    WindowTooShort { t1: usize, len: usize },
    #[error("parcel variance {0} is negative")]
    NegativeVariance(f64),
    #[error("covariance matrix is not positive semidefinite (min eigenvalue {0})")]
    NotPsd(f64),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("sequence {0} has zero variance")]
    Degenerate(usize),
    #[error("theta must lie in [0, 1], got {0}")]
    BadTheta(f64),
}

/// `ln(equity[t + τ₀] / equity[t])`.
pub fn log_returns(equity: &[f64], tau0: usize) -> Result<Vec<f64>, PortfolioError> {
    if let Some((index, &value)) = equity.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(PortfolioError::NonPositiveEquity { index, value });
    }
    if tau0 == 0 || equity.len() <= tau0 {
        return Err(PortfolioError::TooShort {
            len: equity.len(),
            needed: tau0 + 1,
        });
    }
    Ok(equity
        .iter()
        .zip(&equity[tau0..])
        .map(|(a, b)| (b / a).ln())
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentEstimate {
    /// Mean log-return per instrument.
    pub x: Vec<f64>,
    /// Covariance `λᵢⱼ`, row-major.
    pub lambda: Vec<Vec<f64>>,
    pub t1: usize,
    pub tau0: usize,
}

impl MomentEstimate {
    pub fn new(x: Vec<f64>, lambda: Vec<Vec<f64>>) -> Result<Self, PortfolioError> {
        let m = x.len();
        if m == 0 || lambda.len() != m || lambda.iter().any(|r| r.len() != m) {
            return Err(PortfolioError::Dimension(format!(
                "{m} means vs {}x? covariance",
                lambda.len()
            )));
        }
        Ok(Self {
            x,
            lambda,
            t1: 0,
            tau0: 0,
        })
    }

    pub fn instruments(&self) -> usize {
        self.x.len()
    }

    /// `(Z, σ²)` of a parcel.
    pub fn parcel_moments(&self, n: &[f64]) -> (f64, f64) {
        let z = self.x.iter().zip(n).map(|(x, w)| x * w).sum();
        let lam_n = self.lambda_times(n);
        let var = n.iter().zip(&lam_n).map(|(a, b)| a * b).sum();
        (z, var)
    }

    fn lambda_times(&self, n: &[f64]) -> Vec<f64> {
        self.lambda
            .iter()
            .map(|row| row.iter().zip(n).map(|(a, b)| a * b).sum())
            .collect()
    }

    fn min_eigenvalue(&self) -> f64 {
        let m = self.instruments();
        let mat = DMatrix::from_fn(m, m, |i, j| 0.5 * (self.lambda[i][j] + self.lambda[j][i]));
        SymmetricEigen::new(mat).eigenvalues.min()
    }
}

/// Trailing-window means and `1/T1` covariances of `returns`.
pub fn estimate_moments(
    returns: &[Vec<f64>],
    t1: usize,
    tau0: usize,
) -> Result<MomentEstimate, PortfolioError> {
    if returns.is_empty() {
        return Err(PortfolioError::Dimension("no return sequences".into()));
    }
    if t1 == 0 {
        return Err(PortfolioError::WindowTooShort { t1, len: 0 });
    }
    for r in returns {
        if r.len() < t1 {
            return Err(PortfolioError::WindowTooShort { t1, len: r.len() });
        }
    }
    let windows: Vec<&[f64]> = returns.iter().map(|r| &r[r.len() - t1..]).collect();
    let x: Vec<f64> = windows
        .iter()
        .map(|w| w.iter().sum::<f64>() / t1 as f64)
        .collect();
    let m = returns.len();
    let mut lambda = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in i..m {
            let c = windows[i]
                .iter()
                .zip(windows[j])
                .map(|(a, b)| (a - x[i]) * (b - x[j]))
                .sum::<f64>()
                / t1 as f64;
            lambda[i][j] = c;
            lambda[j][i] = c;
        }
    }
    Ok(MomentEstimate {
        x,
        lambda,
        t1,
        tau0,
    })
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

fn normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Probability that the parcel return exceeds `θ·Z` under a Gaussian law.
pub fn objective_p(n: &[f64], m: &MomentEstimate, theta: f64) -> Result<f64, PortfolioError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(PortfolioError::BadTheta(theta));
    }
    let (z, var) = m.parcel_moments(n);
    if var < -PSD_TOLERANCE {
        return Err(PortfolioError::NegativeVariance(var));
    }
    let sigma = var.max(0.0).sqrt();
    let edge = (1.0 - theta) * z;
    if sigma == 0.0 {
        return Ok(if edge > 0.0 {
            1.0
        } else if edge == 0.0 {
            0.5
        } else {
            0.0
        });
    }
    Ok(normal_cdf(edge / sigma))
}

/// Gradient of [`objective_p`]; zero where `σ = 0`.
pub fn objective_gradient(n: &[f64], m: &MomentEstimate, theta: f64) -> Vec<f64> {
    let (z, var) = m.parcel_moments(n);
    let sigma = var.max(0.0).sqrt();
    if sigma == 0.0 {
        return vec![0.0; n.len()];
    }
    let r = (1.0 - theta) * z / sigma;
    let dens = normal_pdf(r);
    let lam_n = m.lambda_times(n);
    m.x.iter()
        .zip(&lam_n)
        .map(|(x, ln)| dens * (1.0 - theta) * (x / sigma - z * ln / (sigma * sigma * sigma)))
        .collect()
}

/// Euclidean projection onto `{n ≥ 0, Σ n ≤ 1}`.
pub fn project_feasible(v: &[f64]) -> Vec<f64> {
    let clipped: Vec<f64> = v.iter().map(|x| x.max(0.0)).collect();
    if clipped.iter().sum::<f64>() <= 1.0 {
        return clipped;
    }
    // Projection onto the unit simplex.
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut shift = 0.0;
    for (k, u) in sorted.iter().enumerate() {
        cum += u;
        let t = (cum - 1.0) / (k + 1) as f64;
        if u - t > 0.0 {
            shift = t;
        }
    }
    v.iter().map(|x| (x - shift).max(0.0)).collect()
}

/// `‖Proj(n + ∇P) - n‖`, zero exactly at KKT points.
pub fn kkt_residual(n: &[f64], m: &MomentEstimate, theta: f64) -> f64 {
    let g = objective_gradient(n, m, theta);
    let moved: Vec<f64> = n.iter().zip(&g).map(|(a, b)| a + b).collect();
    project_feasible(&moved)
        .iter()
        .zip(n)
        .map(|(p, a)| (p - a).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParcelWeights {
    pub n: Vec<f64>,
    pub slack: f64,
}

impl ParcelWeights {
    /// Clamps to exact feasibility.
    pub fn new(mut n: Vec<f64>) -> Self {
        n.iter_mut().for_each(|v| *v = v.max(0.0));
        let total: f64 = n.iter().sum();
        if total > 1.0 {
            n.iter_mut().for_each(|v| *v /= total);
        }
        let slack = (1.0 - n.iter().sum::<f64>()).max(0.0);
        Self { n, slack }
    }

    pub fn equal(m: usize) -> Self {
        Self::new(vec![1.0 / m as f64; m])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub tol: f64,
    pub max_iters: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 200_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizeOutcome {
    pub weights: ParcelWeights,
    pub p_theta: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Objective after each accepted step, starting value first.
    pub history: Vec<f64>,
}

struct Ascent {
    n: Vec<f64>,
    value: f64,
    iterations: usize,
    converged: bool,
    history: Vec<f64>,
}

fn ascend(
    mut n: Vec<f64>,
    m: &MomentEstimate,
    theta: f64,
    cfg: &OptimizerConfig,
) -> Result<Ascent, PortfolioError> {
    let mut value = objective_p(&n, m, theta)?;
    let mut history = vec![value];
    let mut step = 1.0;
    let mut iterations = 0;
    let mut converged = false;

    while iterations < cfg.max_iters {
        if kkt_residual(&n, m, theta) < cfg.tol {
            converged = true;
            break;
        }
        iterations += 1;
        let g = objective_gradient(&n, m, theta);
        let mut s = step;
        let mut accepted = None;
        while s > 1e-30 {
            let cand = project_feasible(
                &n.iter().zip(&g).map(|(a, b)| a + s * b).collect::<Vec<_>>(),
            );
            let predicted: f64 = g.iter().zip(cand.iter().zip(&n)).map(|(gi, (c, a))| gi * (c - a)).sum();
            let cand_value = objective_p(&cand, m, theta)?;
            if cand_value >= value + 1e-4 * predicted && cand_value >= value {
                accepted = Some((cand, cand_value));
                break;
            }
            s *= 0.5;
        }
        let Some((cand, cand_value)) = accepted else {
            // No ascent possible at machine precision.
            converged = kkt_residual(&n, m, theta) < cfg.tol;
            break;
        };
        n = cand;
        value = cand_value;
        history.push(value);
        step = (s * 2.0).min(1e6);
    }
    Ok(Ascent {
        n,
        value,
        iterations,
        converged,
        history,
    })
}

/// Projected gradient ascent from `nᵢ = 1/M` with Armijo backtracking.
pub fn optimize_parcel(
    m: &MomentEstimate,
    theta: f64,
    cfg: &OptimizerConfig,
) -> Result<OptimizeOutcome, PortfolioError> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(PortfolioError::BadTheta(theta));
    }
    let scale = m
        .lambda
        .iter()
        .enumerate()
        .map(|(i, r)| r[i].abs())
        .fold(1.0f64, f64::max);
    let min_eig = m.min_eigenvalue();
    if min_eig < -PSD_TOLERANCE * scale {
        return Err(PortfolioError::NotPsd(min_eig));
    }

    let dim = m.instruments();
    let mut run = ascend(vec![1.0 / dim as f64; dim], m, theta, cfg)?;
    // Where Z > 0, P is increasing in the pseudo-concave ratio Z/σ, so any
    // stationary point there is global. A run ending at Z <= 0 is restarted
    // from the best single instrument when some instrument has X > 0.
    if m.parcel_moments(&run.n).0 <= 0.0 {
        let best = (0..dim)
            .filter(|&i| m.x[i] > 0.0)
            .max_by(|&a, &b| {
                let sharpe = |i: usize| m.x[i] / m.lambda[i][i].max(f64::MIN_POSITIVE).sqrt();
                sharpe(a).total_cmp(&sharpe(b))
            });
        if let Some(i) = best {
            let mut vertex = vec![0.0; dim];
            vertex[i] = 1.0;
            let restart = ascend(vertex, m, theta, cfg)?;
            if restart.value > run.value {
                let mut history = std::mem::take(&mut run.history);
                history.extend(restart.history.iter().filter(|v| **v > run.value));
                run = Ascent {
                    history,
                    iterations: run.iterations + restart.iterations,
                    ..restart
                };
            }
        }
    }
    if !run.converged {
        log::warn!(
            "parcel optimizer stopped after {} iterations, KKT residual {:.3e}",
            run.iterations,
            kkt_residual(&run.n, m, theta)
        );
    }
    let Ascent {
        mut n,
        value,
        iterations,
        converged,
        history,
    } = run;

    // The empty parcel scores 0.5 and is unreachable by gradient steps.
    let zero = vec![0.0; dim];
    if objective_p(&zero, m, theta)? > value {
        n = zero;
    } else {
        let (z, _) = m.parcel_moments(&n);
        let total: f64 = n.iter().sum();
        if z > 0.0 && total > 0.0 && total < 1.0 {
            let scaled: Vec<f64> = n.iter().map(|v| v / total).collect();
            let scaled_value = objective_p(&scaled, m, theta)?;
            if scaled_value >= value - 1e-12 {
                n = scaled;
            }
        }
    }
    let weights = ParcelWeights::new(n);
    let kkt = kkt_residual(&weights.n, m, theta);
    Ok(OptimizeOutcome {
        p_theta: objective_p(&weights.n, m, theta)?,
        weights,
        kkt_residual: kkt,
        iterations,
        converged,
        history,
    })
}

/// Largest standardized third- and fourth-order cross-cumulants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HigherMoments {
    pub third: f64,
    pub fourth: f64,
}

pub fn higher_moment_diagnostic(returns: &[Vec<f64>]) -> Result<HigherMoments, PortfolioError> {
    if returns.is_empty() {
        return Err(PortfolioError::Dimension("no return sequences".into()));
    }
    let len = returns[0].len();
    if returns.iter().any(|r| r.len() != len) {
        return Err(PortfolioError::Dimension("sequences differ in length".into()));
    }
    if len < 100 {
        return Err(PortfolioError::TooShort { len, needed: 100 });
    }
    let centered: Vec<Vec<f64>> = returns
        .iter()
        .map(|r| {
            let mean = r.iter().sum::<f64>() / len as f64;
            r.iter().map(|v| v - mean).collect()
        })
        .collect();
    let moment = |idx: &[usize]| -> f64 {
        (0..len)
            .map(|t| idx.iter().map(|&i| centered[i][t]).product::<f64>())
            .sum::<f64>()
            / len as f64
    };
    let m = returns.len();
    let var: Vec<f64> = (0..m).map(|i| moment(&[i, i])).collect();
    if let Some(i) = var.iter().position(|v| !(*v > 0.0)) {
        return Err(PortfolioError::Degenerate(i));
    }
    let mut third = 0.0f64;
    let mut fourth = 0.0f64;
    for i in 0..m {
        for j in i..m {
            let cij = moment(&[i, j]);
            for k in j..m {
                let k3 = moment(&[i, j, k]) / (var[i] * var[j] * var[k]).sqrt();
                third = third.max(k3.abs());
                let cik = moment(&[i, k]);
                let cjk = moment(&[j, k]);
                for l in k..m {
                    let k4 = moment(&[i, j, k, l])
                        - cij * moment(&[k, l])
                        - cik * moment(&[j, l])
                        - moment(&[i, l]) * cjk;
                    let norm = (var[i] * var[j] * var[k] * var[l]).sqrt();
                    fourth = fourth.max((k4 / norm).abs());
                }
            }
        }
    }
    Ok(HigherMoments { third, fourth })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(x: Vec<f64>, lambda: Vec<Vec<f64>>) -> MomentEstimate {
        MomentEstimate::new(x, lambda).unwrap()
    }

    #[test]
    fn log_return_examples() {
        assert_eq!(log_returns(&[2.0; 5], 1).unwrap(), vec![0.0; 4]);
        let doubling: Vec<f64> = (0..6).map(|k| 2f64.powi(k)).collect();
        for r in log_returns(&doubling, 1).unwrap() {
            assert!((r - 2f64.ln()).abs() < 1e-15);
        }
        let r = log_returns(&[1.0, 1.1, 1.21], 1).unwrap();
        assert_eq!(r.len(), 2);
        for v in r {
            assert!((v - 1.1f64.ln()).abs() < 1e-12);
        }
        assert!(matches!(log_returns(&[1.0, 0.0], 1), Err(PortfolioError::NonPositiveEquity { index: 1, .. })));
        assert!(matches!(log_returns(&[1.0, 2.0], 2), Err(PortfolioError::TooShort { .. })));
    }

    #[test]
    fn covariance_identities() {
        let a: Vec<f64> = (0..50).map(|i| ((i * 7) % 11) as f64 * 0.01).collect();
        let neg: Vec<f64> = a.iter().map(|v| -v).collect();
        let m = estimate_moments(&[a.clone(), a.clone(), neg], 40, 1).unwrap();
        let w = &a[10..];
        let mean = w.iter().sum::<f64>() / 40.0;
        let var = w.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 40.0;
        assert!((m.lambda[0][0] - var).abs() < 1e-15);
        assert_eq!(m.lambda[0][1], m.lambda[0][0]);
        assert!((m.lambda[0][2] + m.lambda[0][0]).abs() < 1e-12);
        assert!(matches!(estimate_moments(&[a], 51, 1), Err(PortfolioError::WindowTooShort { .. })));
    }

    #[test]
    fn objective_examples() {
        let m = moments(vec![0.1], vec![vec![0.04]]);
        let p = objective_p(&[1.0], &m, 0.25).unwrap();
        assert!((p - normal_cdf(0.375)).abs() < 1e-15);
        assert!((p - 0.6462).abs() < 1e-4);
        assert_eq!(objective_p(&[1.0], &m, 1.0).unwrap(), 0.5);
        assert_eq!(objective_p(&[0.0], &m, 0.25).unwrap(), 0.5);
        let zero_mean = moments(vec![0.0, 0.0], vec![vec![0.1, 0.0], vec![0.0, 0.2]]);
        assert_eq!(objective_p(&[0.3, 0.6], &zero_mean, 0.25).unwrap(), 0.5);
        let indefinite = moments(vec![0.1, 0.1], vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(matches!(objective_p(&[0.5, -0.5], &indefinite, 0.2), Err(PortfolioError::NegativeVariance(_))));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let m = moments(vec![0.05, 0.02, -0.01], vec![
            vec![0.04, 0.01, 0.0],
            vec![0.01, 0.02, 0.005],
            vec![0.0, 0.005, 0.03],
        ]);
        let n = [0.3, 0.2, 0.1];
        let g = objective_gradient(&n, &m, 0.25);
        for i in 0..3 {
            let h = 1e-6;
            let mut up = n;
            let mut dn = n;
            up[i] += h;
            dn[i] -= h;
            let fd = (objective_p(&up, &m, 0.25).unwrap() - objective_p(&dn, &m, 0.25).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7, "{i}: {fd} vs {}", g[i]);
        }
    }

    #[test]
    fn projection_is_feasible_and_idempotent() {
        for v in [vec![0.2, 0.3], vec![2.0, -1.0, 0.5], vec![0.9, 0.9, 0.9], vec![-1.0, -2.0]] {
            let p = project_feasible(&v);
            assert!(p.iter().all(|x| *x >= 0.0));
            assert!(p.iter().sum::<f64>() <= 1.0 + 1e-12);
            let again = project_feasible(&p);
            for (a, b) in p.iter().zip(&again) {
                assert!((a - b).abs() < 1e-15);
            }
        }
        assert_eq!(project_feasible(&[0.9, 0.9]), vec![0.5, 0.5]);
    }

    #[test]
    fn single_asset_full_investment() {
        let m = moments(vec![0.1], vec![vec![0.04]]);
        let out = optimize_parcel(&m, 0.25, &OptimizerConfig::default()).unwrap();
        assert!((out.weights.n[0] - 1.0).abs() < 1e-8);
        // Grid oracle: P is flat in n > 0, maximal everywhere except 0.
        let best = (1..=1000)
            .map(|i| objective_p(&[i as f64 / 1000.0], &m, 0.25).unwrap())
            .fold(0.0, f64::max);
        assert!(out.p_theta >= best - 1e-12);
    }

    #[test]
    fn symmetric_assets_get_equal_weights() {
        let m = moments(vec![0.03, 0.03], vec![vec![0.01, 0.0], vec![0.0, 0.01]]);
        let out = optimize_parcel(&m, 0.25, &OptimizerConfig::default()).unwrap();
        assert!((out.weights.n[0] - out.weights.n[1]).abs() < 1e-8);
    }

    #[test]
    fn two_asset_example_matches_grid() {
        let m = moments(vec![0.10, 0.02], vec![vec![0.04, 0.0], vec![0.0, 0.0004]]);
        let out = optimize_parcel(&m, 0.25, &OptimizerConfig::default()).unwrap();
        assert!(out.converged);
        // Optimal direction ∝ Λ⁻¹X = (2.5, 50).
        let (a, b) = (out.weights.n[0], out.weights.n[1]);
        assert!((a - 1.0 / 21.0).abs() < 1e-4 && (b - 20.0 / 21.0).abs() < 1e-4, "{a} {b}");
        let mut best = (0.0, 0.0, 0.0);
        for i in 0..=100 {
            for j in 0..=(100 - i) {
                let n = [i as f64 / 100.0, j as f64 / 100.0];
                let p = objective_p(&n, &m, 0.25).unwrap();
                if p > best.0 {
                    best = (p, n[0], n[1]);
                }
            }
        }
        assert!(out.p_theta >= best.0 - 1e-6);
        let s = best.1 + best.2;
        assert!((a - best.1 / s).abs() < 0.02 && (b - best.2 / s).abs() < 0.02);
    }

    #[test]
    fn ascent_is_monotone() {
        let m = moments(vec![0.02, 0.05, 0.01], vec![
            vec![0.03, 0.01, 0.0],
            vec![0.01, 0.05, -0.01],
            vec![0.0, -0.01, 0.02],
        ]);
        let out = optimize_parcel(&m, 0.5, &OptimizerConfig::default()).unwrap();
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0]);
        }
        assert!(out.kkt_residual < 1e-6);
    }

    #[test]
    fn negative_returns_prefer_cash() {
        let m = moments(vec![-0.02, -0.01], vec![vec![0.01, 0.0], vec![0.0, 0.02]]);
        let out = optimize_parcel(&m, 0.25, &OptimizerConfig::default()).unwrap();
        assert_eq!(out.weights.n, vec![0.0, 0.0]);
        assert_eq!(out.p_theta, 0.5);
        assert_eq!(out.weights.slack, 1.0);
    }

    #[test]
    fn flat_objective_keeps_start() {
        let m = moments(vec![0.0; 3], vec![vec![0.0; 3]; 3]);
        let out = optimize_parcel(&m, 0.25, &OptimizerConfig::default()).unwrap();
        for w in &out.weights.n {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn negative_start_still_finds_the_profitable_asset() {
        // Equal weights lose money; only the third asset has X > 0.
        let m = moments(vec![-0.05, -0.04, 0.01], vec![
            vec![0.01, 0.009, 0.0],
            vec![0.009, 0.01, 0.0],
            vec![0.0, 0.0, 0.04],
        ]);
        let out = optimize_parcel(&m, 0.25, &OptimizerConfig::default()).unwrap();
        assert!((out.weights.n[2] - 1.0).abs() < 1e-6, "{:?}", out.weights);
        assert!((out.p_theta - normal_cdf(0.75 * 0.01 / 0.2)).abs() < 1e-9);
        for w in out.history.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn not_psd_is_rejected() {
        let m = moments(vec![0.1, 0.1], vec![vec![1.0, 2.0], vec![2.0, 1.0]]);
        assert!(matches!(optimize_parcel(&m, 0.25, &OptimizerConfig::default()), Err(PortfolioError::NotPsd(_))));
    }

    #[test]
    fn higher_moments_detect_skew() {
        let exp: Vec<f64> = (1..=2000).map(|i| -(1.0 - i as f64 / 2001.0f64).ln()).collect();
        let h = higher_moment_diagnostic(&[exp]).unwrap();
        assert!(h.third > 0.1, "{h:?}");
        assert!(matches!(higher_moment_diagnostic(&[vec![1.0; 200]]), Err(PortfolioError::Degenerate(0))));
        assert!(matches!(higher_moment_diagnostic(&[vec![1.0; 50]]), Err(PortfolioError::TooShort { .. })));
    }
}
