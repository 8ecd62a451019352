//! Drift and diffusion reconstruction over a Hermite polynomial basis.
//!
//! Given a window of coefficient vectors `Y(t)`, the drift of dimension `j`
//! is the least-squares regression of `ΔY_j / dt` on the basis evaluated at
//! `Y(t)`, and the squared diffusion is the regression of the squared
//! increment residuals over `dt` on the same basis. Both systems are solved
//! through an SVD, which yields the minimum-norm solution when the design is
//! rank deficient.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Condition numbers above this are logged.
pub const CONDITION_WARNING: f64 = 1e8;

#[derive(Debug, Error, PartialEq)]
pub enum FitError {
    #[error("window of {len} vectors is too short, need at least {needed}")]
    WindowTooShort { len: usize, needed: usize },
    #[error("dimension {0} has zero variance in the window")]
    DegenerateWindow(usize),
    #[error("window vectors have inconsistent dimensions")]
    RaggedWindow,
    #[error("non-finite value in window")]
    NonFinite,
    #[error("least-squares solve failed: {0}")]
    Solve(String),
}

/// Probabilists' Hermite polynomials `He_0..=He_degree` at `x`.
pub fn hermite_values(x: f64, degree: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(degree as usize + 1);
    out.push(1.0);
    if degree >= 1 {
        out.push(x);
    }
    for k in 1..degree as usize {
        let next = x * out[k] - k as f64 * out[k - 1];
        out.push(next);
    }
    out
}

/// Monomial coefficients of `He_k`, lowest power first.
fn hermite_monomials(k: usize) -> Vec<f64> {
    let mut prev = vec![1.0];
    if k == 0 {
        return prev;
    }
    let mut cur = vec![0.0, 1.0];
    for n in 1..k {
        let mut next = vec![0.0; n + 2];
        for (i, c) in cur.iter().enumerate() {
            next[i + 1] += c;
        }
        for (i, c) in prev.iter().enumerate() {
            next[i] -= n as f64 * c;
        }
        prev = cur;
        cur = next;
    }
    cur
}

/// Per-dimension affine standardization `ŷ = (y - mean) / std`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HermiteBasis {
    pub dims: usize,
    pub degree: u32,
    /// Multi-indices with total degree ≤ `degree`, graded order.
    pub terms: Vec<Vec<u32>>,
    pub standardization: Vec<Standardization>,
}

impl HermiteBasis {
    pub fn new(degree: u32, standardization: Vec<Standardization>) -> Self {
        let dims = standardization.len();
        let mut terms = Vec::new();
        let mut current = vec![0u32; dims];
        collect_terms(0, degree, &mut current, &mut terms);
        terms.sort_by(|a, b| {
            let (da, db) = (a.iter().sum::<u32>(), b.iter().sum::<u32>());
            da.cmp(&db).then_with(|| b.cmp(a))
        });
        Self {
            dims,
            degree,
            terms,
            standardization,
        }
    }

    /// Basis with identity standardization.
    pub fn unit(dims: usize, degree: u32) -> Self {
        Self::new(
            degree,
            vec![
                Standardization {
                    mean: 0.0,
                    std: 1.0
                };
                dims
            ],
        )
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn standardize(&self, y: &[f64]) -> Vec<f64> {
        y.iter()
            .zip(&self.standardization)
            .map(|(v, s)| (v - s.mean) / s.std)
            .collect()
    }

    /// Position of a multi-index in the term list.
    pub fn index_of(&self, term: &[u32]) -> Option<usize> {
        self.terms.iter().position(|t| t == term)
    }
}

fn collect_terms(dim: usize, remaining: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if dim == current.len() {
        out.push(current.clone());
        return;
    }
    for k in 0..=remaining {
        current[dim] = k;
        collect_terms(dim + 1, remaining - k, current, out);
    }
    current[dim] = 0;
}

/// `Π_i He_{k_i}(ŷ_i)` for every term of the basis.
pub fn hermite_eval(basis: &HermiteBasis, y: &[f64]) -> Vec<f64> {
    let z = basis.standardize(y);
    let tables: Vec<Vec<f64>> = z.iter().map(|&x| hermite_values(x, basis.degree)).collect();
    basis
        .terms
        .iter()
        .map(|term| {
            term.iter()
                .zip(&tables)
                .map(|(&k, tab)| tab[k as usize])
                .product()
        })
        .collect()
}

/// Fitting options.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Maximum total Hermite degree K.
    pub degree: u32,
    /// Model time per step of the window.
    pub dt: f64,
    /// Lower bound on the diffusion; `None` uses `1e-6 · rms(ΔY) / √dt`.
    pub diffusion_floor: Option<f64>,
    /// A dimension whose window std is at or below this is degenerate.
    pub min_std: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            degree: 3,
            dt: 1.0,
            diffusion_floor: None,
            min_std: 0.0,
        }
    }
}

/// Fitted drift `λ` and squared-diffusion `Q` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SdeModel {
    pub basis: HermiteBasis,
    /// `dims × terms` drift coefficients.
    pub lambda: Vec<Vec<f64>>,
    /// `dims × terms` coefficients of `G²`.
    pub q: Vec<Vec<f64>>,
    pub dt: f64,
    pub calib_len: usize,
    pub diffusion_floor: f64,
    pub condition_number: f64,
}

impl SdeModel {
    /// Model with given coefficients (no fitting).
    pub fn from_parts(
        basis: HermiteBasis,
        lambda: Vec<Vec<f64>>,
        q: Vec<Vec<f64>>,
        dt: f64,
        diffusion_floor: f64,
    ) -> Self {
        Self {
            basis,
            lambda,
            q,
            dt,
            calib_len: 0,
            diffusion_floor,
            condition_number: 1.0,
        }
    }

    pub fn dims(&self) -> usize {
        self.basis.dims
    }

    pub fn eval_drift(&self, y: &[f64]) -> Vec<f64> {
        let h = hermite_eval(&self.basis, y);
        self.lambda.iter().map(|row| dot(row, &h)).collect()
    }

    /// Diagonal diffusion entries, never below the floor.
    pub fn eval_diffusion(&self, y: &[f64]) -> Vec<f64> {
        let h = hermite_eval(&self.basis, y);
        let floor2 = self.diffusion_floor * self.diffusion_floor;
        self.q
            .iter()
            .map(|row| dot(row, &h).max(floor2).sqrt())
            .collect()
    }

    /// Drift and diffusion together, sharing one basis evaluation.
    pub fn eval(&self, y: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let h = hermite_eval(&self.basis, y);
        let floor2 = self.diffusion_floor * self.diffusion_floor;
        (
            self.lambda.iter().map(|row| dot(row, &h)).collect(),
            self.q
                .iter()
                .map(|row| dot(row, &h).max(floor2).sqrt())
                .collect(),
        )
    }

    /// For a one-dimensional model, the drift as a polynomial in the raw
    /// coordinate `y`, lowest power first.
    pub fn drift_monomials(&self) -> Option<Vec<f64>> {
        (self.dims() == 1).then(|| self.monomials(&self.lambda[0]))
    }

    /// As [`Self::drift_monomials`] for `G²` (before flooring).
    pub fn diffusion_sq_monomials(&self) -> Option<Vec<f64>> {
        (self.dims() == 1).then(|| self.monomials(&self.q[0]))
    }

    fn monomials(&self, coeffs: &[f64]) -> Vec<f64> {
        let deg = self.basis.degree as usize;
        let Standardization { mean, std } = self.basis.standardization[0];
        // Polynomial in ŷ first.
        let mut in_z = vec![0.0; deg + 1];
        for (term, c) in self.basis.terms.iter().zip(coeffs) {
            for (p, m) in hermite_monomials(term[0] as usize).iter().enumerate() {
                in_z[p] += c * m;
            }
        }
        // ŷ^p = (y - mean)^p / std^p
        let mut out = vec![0.0; deg + 1];
        for (p, cz) in in_z.iter().enumerate() {
            let scale = cz / std.powi(p as i32);
            for (i, o) in out.iter_mut().enumerate().take(p + 1) {
                *o += scale * binomial(p, i) * (-mean).powi((p - i) as i32);
            }
        }
        out
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Number of basis terms `C(dims + degree, degree)`.
pub fn term_count(dims: usize, degree: u32) -> usize {
    binomial(dims + degree as usize, degree as usize).round() as usize
}

/// Least-squares fit of drift and diffusion over `window`.
pub fn fit_model(window: &[Vec<f64>], cfg: &FitConfig) -> Result<SdeModel, FitError> {
    let n = window.len();
    let dims = window.first().map_or(0, Vec::len);
    if dims == 0 {
        return Err(FitError::WindowTooShort { len: n, needed: 2 });
    }
    if window.iter().any(|v| v.len() != dims) {
        return Err(FitError::RaggedWindow);
    }
    if window.iter().flatten().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    let terms = term_count(dims, cfg.degree);
    let needed = 2 * terms + 1;
    if n < needed {
        return Err(FitError::WindowTooShort { len: n, needed });
    }

    let standardization = (0..dims)
        .map(|j| {
            let mean = window.iter().map(|v| v[j]).sum::<f64>() / n as f64;
            let var = window.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            if !(std > cfg.min_std) || std == 0.0 {
                Err(FitError::DegenerateWindow(j))
            } else {
                Ok(Standardization { mean, std })
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let basis = HermiteBasis::new(cfg.degree, standardization);

    let rows = n - 1;
    let mut design = DMatrix::<f64>::zeros(rows, terms);
    let mut rates = DMatrix::<f64>::zeros(rows, dims);
    let mut sq_incr = 0.0;
    for t in 0..rows {
        let h = hermite_eval(&basis, &window[t]);
        for (k, v) in h.iter().enumerate() {
            design[(t, k)] = *v;
        }
        for j in 0..dims {
            let d = window[t + 1][j] - window[t][j];
            sq_incr += d * d;
            rates[(t, j)] = d / cfg.dt;
        }
    }

    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let condition_number = if smin > 0.0 { smax / smin } else { f64::INFINITY };
    if condition_number > CONDITION_WARNING {
        log::warn!("ill-conditioned Hermite design: condition number {condition_number:.3e}");
    }
    let eps = smax * rows.max(terms) as f64 * f64::EPSILON;
    let lambda = svd.solve(&rates, eps).map_err(|e| FitError::Solve(e.into()))?;

    // Squared increment residuals per unit time.
    let fitted = &design * &lambda;
    let mut sq_resid = DMatrix::<f64>::zeros(rows, dims);
    for t in 0..rows {
        for j in 0..dims {
            let r = (rates[(t, j)] - fitted[(t, j)]) * cfg.dt;
            sq_resid[(t, j)] = r * r / cfg.dt;
        }
    }
    let q = svd.solve(&sq_resid, eps).map_err(|e| FitError::Solve(e.into()))?;

    let rms = (sq_incr / (rows * dims) as f64).sqrt();
    let diffusion_floor = cfg
        .diffusion_floor
        .unwrap_or(1e-6 * rms / cfg.dt.sqrt())
        .max(f64::MIN_POSITIVE);

    let to_rows = |m: &DMatrix<f64>| -> Vec<Vec<f64>> {
        (0..dims)
            .map(|j| m.column(j).iter().copied().collect())
            .collect()
    };
    let model = SdeModel {
        basis,
        lambda: to_rows(&lambda),
        q: to_rows(&q),
        dt: cfg.dt,
        calib_len: n,
        diffusion_floor,
        condition_number,
    };
    if model.lambda.iter().chain(&model.q).flatten().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    Ok(model)
}

/// Drift residuals `ΔY/dt - F(Y)` for each step of the window (diagnostic).
pub fn drift_residuals(model: &SdeModel, window: &[Vec<f64>]) -> Vec<Vec<f64>> {
    window
        .windows(2)
        .map(|w| {
            let f = model.eval_drift(&w[0]);
            (0..model.dims())
                .map(|j| (w[1][j] - w[0][j]) / model.dt - f[j])
                .collect()
        })
        .collect()
}
