//! Analytic side: the mean degree parameter `μ`, Poisson upper tails, the
//! focusing index `k_n` and the predicted two-point law of the maximum
//! degree.

use serde::{Deserialize, Serialize};
use statrs::function::factorial::ln_factorial;
use thiserror::Error;

use crate::model::ModelParams;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TheoryError {
    #[error("no focusing index: n(1-v) = {0} must exceed 1")]
    NoFocusingIndex(f64),
    #[error("radius {0} for the requested mu is not below 0.5")]
    RadiusOutOfRange(f64),
    #[error("mu target must be positive and finite, got {0}")]
    InvalidTarget(f64),
}

/// `μ = (α/2) n r² (1 − v)(1 − q)`.
pub fn mu(params: &ModelParams) -> f64 {
    mu_from(params.n as f64, params.alpha, params.r, params.v, params.q)
}

pub fn mu_from(n: f64, alpha: f64, r: f64, v: f64, q: f64) -> f64 {
    0.5 * alpha * n * r * r * (1.0 - v) * (1.0 - q)
}

/// Radius that makes `μ` equal `mu_target`; it must stay below 0.5.
pub fn radius_for_mu(
    n: u64,
    alpha: f64,
    v: f64,
    q: f64,
    mu_target: f64,
) -> Result<f64, TheoryError> {
    if !(mu_target > 0.0 && mu_target.is_finite()) {
        return Err(TheoryError::InvalidTarget(mu_target));
    }
    let r = (2.0 * mu_target / (alpha * n as f64 * (1.0 - v) * (1.0 - q))).sqrt();
    if !(r < 0.5) {
        return Err(TheoryError::RadiusOutOfRange(r));
    }
    Ok(r)
}

/// `ln P(Poi(mu) = k)`; `mu = 0` is the point mass at zero.
pub fn ln_poisson_pmf(mu: f64, k: u64) -> f64 {
    if mu == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    k as f64 * mu.ln() - mu - ln_factorial(k)
}

pub fn poisson_pmf(mu: f64, k: u64) -> f64 {
    ln_poisson_pmf(mu, k).exp()
}

/// Stop adding terms once one falls below this fraction of the partial sum.
const TAIL_STOP: f64 = 1e-17;

/// `P(Poi(mu) ≥ j)` for `mu ≥ 0`.
///
/// For `j > mu` the terms from `j` upward decrease, so they are summed as
/// ratios to the leading pmf, which is evaluated in log space. Otherwise the
/// complement `P(X ≤ j − 1)` is summed downward from `j − 1`, which is then
/// at or below the mode, and the tail is at least about one half.
pub fn poisson_tail(mu: f64, j: u64) -> f64 {
    if j == 0 {
        return 1.0;
    }
    if mu == 0.0 {
        return 0.0;
    }
    if j as f64 > mu {
        let lead = ln_poisson_pmf(mu, j);
        if lead < -745.2 {
            return 0.0;
        }
        let (mut sum, mut term, mut k) = (1.0f64, 1.0f64, j);
        loop {
            k += 1;
            term *= mu / k as f64;
            sum += term;
            if term < TAIL_STOP * sum {
                break;
            }
        }
        (lead.exp() * sum).min(1.0)
    } else {
        let top = j - 1;
        let (mut sum, mut term) = (1.0f64, 1.0f64);
        for k in (1..=top).rev() {
            term *= k as f64 / mu;
            sum += term;
            if term < TAIL_STOP * sum {
                break;
            }
        }
        (1.0 - ln_poisson_pmf(mu, top).exp() * sum).max(0.0)
    }
}

/// `P(Poi(mu) ∈ {j : j ≥ t})` for an integer threshold that may be negative.
pub(crate) fn tail_from(mu: f64, t: i64) -> f64 {
    if t <= 0 {
        1.0
    } else {
        poisson_tail(mu, t as u64)
    }
}

/// The focusing index pair `(j_n, k_n)`.
///
/// `j_n` is the smallest `j` with `n ξ(j) ≤ 1/(1 − v)`, where
/// `ξ(j) = P(Poi(μ) ≥ j)`, so that `n ξ(j_n − 1) > 1/(1 − v) ≥ n ξ(j_n)`.
/// Then `k_n = j_n − 1` when `(1 − v) n ξ(j_n) ≤ sqrt(ξ(j_n)/ξ(j_n − 1))`
/// and `k_n = j_n` otherwise.
pub fn select_kn(n: u64, v: f64, mu: f64) -> Result<(u64, u64), TheoryError> {
    let nf = n as f64;
    let scale = nf * (1.0 - v);
    if !(scale > 1.0) {
        return Err(TheoryError::NoFocusingIndex(scale));
    }
    let threshold = 1.0 / (1.0 - v);
    let mut prev = 1.0; // ξ(0)
    let mut j = 1u64;
    loop {
        let xi = poisson_tail(mu, j);
        if nf * xi <= threshold {
            let k = if scale * xi <= (xi / prev).sqrt() {
                j - 1
            } else {
                j
            };
            return Ok((j, k));
        }
        prev = xi;
        j += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocusingPrediction {
    pub mu: f64,
    pub j_n: u64,
    pub k_n: u64,
    /// `ξ(k_n) = P(Poi(μ) ≥ k_n)`.
    pub xi_at_k: f64,
    /// `a = n (1 − v) ξ(k_n)`.
    pub a: f64,
    /// Predicted `P(Δ = k_n − 1) = e^{−a}`.
    pub p_km1: f64,
    /// Predicted `P(Δ = k_n) = 1 − e^{−a}`.
    pub p_k: f64,
}

impl FocusingPrediction {
    /// Build the two-point law around a given `k` (used for overrides).
    pub fn at_k(n: u64, v: f64, mu: f64, j_n: u64, k_n: u64) -> Self {
        let xi_at_k = poisson_tail(mu, k_n);
        let a = n as f64 * (1.0 - v) * xi_at_k;
        let p_km1 = (-a).exp();
        Self {
            mu,
            j_n,
            k_n,
            xi_at_k,
            a,
            p_km1,
            p_k: 1.0 - p_km1,
        }
    }
}

/// Predicted two-point law of the maximum out- or in-degree. The same law
/// is predicted for both sides and both point-process modes.
pub fn predict(params: &ModelParams) -> Result<FocusingPrediction, TheoryError> {
    let m = mu(params);
    let (j, k) = select_kn(params.n, params.v, m)?;
    Ok(FocusingPrediction::at_k(params.n, params.v, m, j, k))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeReport {
    pub mu: f64,
    /// `μ / n^{1/6}`.
    pub mu_over_pow: f64,
    /// `μ^{1+ε} / ln n`.
    pub focusing_ratio: f64,
    pub epsilon: f64,
    pub warnings: Vec<String>,
}

/// Heuristic finite-n diagnostics; warnings are informational only.
pub fn check_regime(params: &ModelParams, epsilon: f64) -> RegimeReport {
    let m = mu(params);
    let n = params.n as f64;
    let focusing_ratio = m.powf(1.0 + epsilon) / n.ln();
    let mu_over_pow = m / n.powf(1.0 / 6.0);
    let mut warnings = Vec::new();
    if !(focusing_ratio <= 1.0) {
        warnings.push(format!(
            "mu^(1+eps)/ln n = {focusing_ratio:.4} exceeds 1: degrees may not focus on two values"
        ));
    }
    if mu_over_pow > 1.0 {
        warnings.push(format!(
            "mu/n^(1/6) = {mu_over_pow:.4} exceeds 1: binomial and Poisson modes may disagree"
        ));
    }
    if m < 0.01 {
        warnings.push(format!(
            "mu = {m:.3e} is below 0.01: the graph is nearly empty"
        ));
    }
    RegimeReport {
        mu: m,
        mu_over_pow,
        focusing_ratio,
        epsilon,
        warnings,
    }
}
