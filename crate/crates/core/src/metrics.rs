//! Distances between models and distributions, and sample-complexity calculators.

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::model::{densify, Model, ResponseMatrix};

/// Mean column-wise classical fidelity, `2^-n Σ_ij √(a_ij b_ij)`.
pub fn matrix_fidelity(a: &ResponseMatrix, b: &ResponseMatrix) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::WidthMismatch { left: a.n(), right: b.n() });
    }
    let total: f64 = a
        .as_column_major()
        .iter()
        .zip(b.as_column_major())
        .map(|(x, y)| (x * y).sqrt())
        .sum();
    Ok((total / a.dim() as f64).min(1.0))
}

/// [`matrix_fidelity`] of two models, densifying each first.
pub fn model_fidelity(a: &Model, b: &Model) -> Result<f64> {
    if a.n() != b.n() {
        return Err(Error::WidthMismatch { left: a.n(), right: b.n() });
    }
    matrix_fidelity(&densify(a)?, &densify(b)?)
}

/// `Σ_i |p_i - q_i|`. Note: not halved; ranges over `[0, 2]` for distributions.
pub fn tv_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch { left: p.len(), right: q.len() });
    }
    Ok(p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum())
}

/// The conventional halved total variation distance, in `[0, 1]`.
pub fn tv_distance_halved(p: &[f64], q: &[f64]) -> Result<f64> {
    Ok(0.5 * tv_distance(p, q)?)
}

fn check_open_unit(name: &'static str, v: f64) -> Result<()> {
    if !(v > 0.0 && v < 1.0) {
        return Err(Error::InvalidParameter { name, detail: format!("must lie in (0, 1), got {v}") });
    }
    Ok(())
}

/// Binomial(n, p) probability mass function, by the multiplicative recurrence.
fn binomial_pmf(n: u64, p: f64) -> Vec<f64> {
    let mut pmf = Vec::with_capacity(n as usize + 1);
    let ln_q = (1.0 - p).ln();
    let ratio = p / (1.0 - p);
    let mut log_term = n as f64 * ln_q;
    for k in 0..=n {
        pmf.push(log_term.exp());
        if k < n {
            log_term += (((n - k) as f64) / ((k + 1) as f64)).ln() + ratio.ln();
        }
    }
    pmf
}

/// Smallest `k` with `P(Q > k) ≤ ε` for `Q ~ Binomial(n, p_e)`: the heaviest
/// error weight that has to be retained.
pub fn truncation_weight(n: u64, p_e: f64, epsilon: f64) -> Result<u64> {
    check_open_unit("p_e", p_e)?;
    check_open_unit("epsilon", epsilon)?;
    let pmf = binomial_pmf(n, p_e);
    // Upper tails summed from the top to avoid cancellation.
    let mut tail_above = 0.0;
    let mut tails = vec![0.0; pmf.len()];
    for k in (0..pmf.len()).rev() {
        tails[k] = tail_above;
        tail_above += pmf[k];
    }
    Ok(tails.iter().position(|&t| t <= epsilon).unwrap_or(n as usize) as u64)
}

/// Binary entropy in bits.
pub fn binary_entropy(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    -p * p.log2() - (1.0 - p) * (1.0 - p).log2()
}

/// Number of error syndromes of weight at most `k`, with its entropy bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RetainedOutcomes {
    /// `Σ_{i≤k} C(n, i)`; exact for `n ≤ 64`, otherwise absent.
    pub exact: Option<u128>,
    /// `log2` of the count, available at any `n`.
    pub log2: f64,
    /// `2^{nH(k/n)} / √(8k(1-k/n))`, when `0 < k/n ≤ 1/2`.
    pub lower: Option<f64>,
    /// `2^{nH(k/n)}`, when `0 < k/n ≤ 1/2`.
    pub upper: Option<f64>,
}

fn ln_choose(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

pub fn retained_outcomes(n: u64, k: u64) -> Result<RetainedOutcomes> {
    if k > n {
        return Err(Error::InvalidParameter { name: "k", detail: format!("k = {k} exceeds n = {n}") });
    }
    let exact = (n <= 64).then(|| {
        let mut c: u128 = 1;
        let mut total: u128 = 1;
        for i in 0..k {
            c = c * (n - i) as u128 / (i + 1) as u128;
            total += c;
        }
        total
    });
    let log2 = match exact {
        Some(v) => (v as f64).log2(),
        None => {
            // log-sum-exp over the binomial coefficients.
            let terms: Vec<f64> = (0..=k).map(|i| ln_choose(n, i)).collect();
            let top = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            (top + terms.iter().map(|t| (t - top).exp()).sum::<f64>().ln()) / std::f64::consts::LN_2
        }
    };
    let ratio = k as f64 / n as f64;
    let (lower, upper) = if k > 0 && ratio <= 0.5 {
        let up = (n as f64 * binary_entropy(ratio)).exp2();
        (Some(up / (8.0 * k as f64 * (1.0 - ratio)).sqrt()), Some(up))
    } else {
        (None, None)
    };
    Ok(RetainedOutcomes { exact, log2, lower, upper })
}

/// Normal approximation to [`truncation_weight`] with a 0.5 continuity correction.
pub fn normal_approx_weight(n: u64, p_e: f64, epsilon: f64) -> Result<f64> {
    check_open_unit("p_e", p_e)?;
    check_open_unit("epsilon", epsilon)?;
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", detail: "must be positive".into() });
    }
    let mean = n as f64 * p_e;
    let sd = (mean * (1.0 - p_e)).sqrt();
    let z = Normal::standard().inverse_cdf(1.0 - epsilon);
    Ok(mean + sd * z + 0.5)
}

/// Shots needed so that an `N`-outcome empirical distribution is within
/// (unhalved) total variation `ε` of the truth with probability `1 - γ`:
/// the smallest integer `m > (√N + √(2 ln(1/γ)))² / ε²`.
pub fn berend_shot_requirement(outcomes: f64, epsilon: f64, gamma: f64) -> Result<u64> {
    if !(outcomes >= 1.0) {
        return Err(Error::InvalidParameter { name: "N", detail: format!("must be at least 1, got {outcomes}") });
    }
    check_open_unit("epsilon", epsilon)?;
    check_open_unit("gamma", gamma)?;
    let root = outcomes.sqrt() + (2.0 * (1.0 / gamma).ln()).sqrt();
    let bound = root * root / (epsilon * epsilon);
    Ok(bound.floor() as u64 + 1)
}

/// Expected-distance bound `√(N/m)`.
pub fn berend_expectation_bound(outcomes: f64, shots: u64) -> f64 {
    (outcomes / shots as f64).sqrt()
}

/// Tail bound `exp(-(m/2)(ε - √(N/m))²)` on `P[δ > ε]`, valid for `ε ≥ √(N/m)`.
pub fn berend_concentration_bound(outcomes: f64, shots: u64, epsilon: f64) -> Option<f64> {
    let floor = berend_expectation_bound(outcomes, shots);
    (epsilon >= floor).then(|| (-(shots as f64) / 2.0 * (epsilon - floor).powi(2)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComplexityReport {
    pub n: u64,
    pub p_e: f64,
    pub epsilon: f64,
    pub gamma: f64,
    pub k: u64,
    pub k_normal_approx: f64,
    #[serde(rename = "N")]
    pub retained: RetainedOutcomes,
    /// `n H(p_e)`, reported for the `< 10` tractability rule of thumb.
    pub n_entropy: f64,
    pub m_required: u64,
}

pub fn complexity_report(n: u64, p_e: f64, epsilon: f64, gamma: f64) -> Result<ComplexityReport> {
    let k = truncation_weight(n, p_e, epsilon)?;
    let retained = retained_outcomes(n, k)?;
    let count = retained.exact.map_or(retained.log2.exp2(), |v| v as f64);
    Ok(ComplexityReport {
        n,
        p_e,
        epsilon,
        gamma,
        k,
        k_normal_approx: normal_approx_weight(n, p_e, epsilon)?,
        m_required: berend_shot_requirement(count, epsilon, gamma)?,
        n_entropy: n as f64 * binary_entropy(p_e),
        retained,
    })
}
