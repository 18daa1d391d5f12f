//! Walsh–Hadamard machinery for bit-flip-averaged models.
//!
//! Every averaged matrix `M̃ = Σ_s p̃(s) X^(s)` is diagonalised by `H^{⊗n}`,
//! so its spectrum, its inverse and its action on a vector all reduce to
//! length-`2^n` transforms.

use crate::error::{Error, Result};
use crate::model::SyndromeDistribution;

/// Default smallest admissible `|λ|` before an averaged model is treated as singular.
pub const EIGENVALUE_FLOOR: f64 = 1e-8;

/// Convolutions of at most this many entries use the direct double loop.
pub const DIRECT_CONVOLVE_MAX: usize = 64;

fn check_len(len: usize) -> Result<()> {
    if !len.is_power_of_two() {
        return Err(Error::NotPowerOfTwo(len));
    }
    Ok(())
}

/// Unnormalised in-place butterfly: `v ← √N · H^{⊗n} v`.
fn butterfly(v: &mut [f64]) {
    let len = v.len();
    let mut h = 1;
    while h < len {
        for block in v.chunks_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
}

/// In-place normalised transform `v ← H^{⊗n} v` with `H = [[1, 1], [1, -1]] / √2`.
pub fn fwht_in_place(v: &mut [f64]) -> Result<()> {
    check_len(v.len())?;
    butterfly(v);
    let scale = 1.0 / (v.len() as f64).sqrt();
    v.iter_mut().for_each(|x| *x *= scale);
    Ok(())
}

pub fn fwht(v: &[f64]) -> Result<Vec<f64>> {
    let mut out = v.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Eigenvalues of an averaged response matrix, `λ_i = Σ_s p̃(s) (-1)^{s·i}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumVector {
    pub n: usize,
    pub lambda: Vec<f64>,
}

impl SpectrumVector {
    /// `(index, value)` of the eigenvalue with the smallest magnitude.
    pub fn min_abs(&self) -> (usize, f64) {
        self.lambda
            .iter()
            .copied()
            .enumerate()
            .min_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
            .expect("spectrum is never empty")
    }
}

/// Coefficients `q̃` of the inverse, `M̃^{-1} = Σ_s q̃(s) X^(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InverseCoefficients {
    pub n: usize,
    pub q_tilde: Vec<f64>,
}

/// `λ = √(2^n) · H^{⊗n} p̃`.
pub fn eigenvalues(d: &SyndromeDistribution) -> SpectrumVector {
    let mut lambda = fwht(d.probabilities()).expect("distribution length is 2^n");
    let root = (lambda.len() as f64).sqrt();
    lambda.iter_mut().for_each(|x| *x *= root);
    SpectrumVector { n: d.n(), lambda }
}

/// How eigenvalues below the floor are treated by [`analytic_inverse_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SmallEigenvalues {
    /// Fail with [`Error::NearSingular`].
    Reject,
    /// Replace `|λ| < floor` by `±floor`, keeping the sign. For exploratory use.
    Clamp,
}

/// `q̃ = H^{⊗n} λ^{-1} / √(2^n)`, rejecting eigenvalues below [`EIGENVALUE_FLOOR`].
pub fn analytic_inverse(d: &SyndromeDistribution) -> Result<InverseCoefficients> {
    analytic_inverse_with(d, EIGENVALUE_FLOOR, SmallEigenvalues::Reject)
}

pub fn analytic_inverse_with(
    d: &SyndromeDistribution,
    floor: f64,
    policy: SmallEigenvalues,
) -> Result<InverseCoefficients> {
    let spectrum = eigenvalues(d);
    let mut reciprocal = Vec::with_capacity(spectrum.lambda.len());
    for (index, &value) in spectrum.lambda.iter().enumerate() {
        let value = if value.abs() < floor {
            match policy {
                SmallEigenvalues::Reject => return Err(Error::NearSingular { index, value }),
                SmallEigenvalues::Clamp => floor.copysign(value),
            }
        } else {
            value
        };
        reciprocal.push(1.0 / value);
    }
    let mut q = fwht(&reciprocal)?;
    let root = (q.len() as f64).sqrt();
    q.iter_mut().for_each(|x| *x /= root);
    Ok(InverseCoefficients { n: d.n(), q_tilde: q })
}

/// `out[σ] = Σ_s coeffs[s] · p[σ ⊕ s]`, i.e. `(Σ_s coeffs[s] X^(s)) · p`.
pub fn xor_convolve(coeffs: &[f64], p: &[f64]) -> Result<Vec<f64>> {
    if coeffs.len() != p.len() {
        return Err(Error::LengthMismatch { left: coeffs.len(), right: p.len() });
    }
    check_len(p.len())?;
    if p.len() <= DIRECT_CONVOLVE_MAX {
        Ok(xor_convolve_direct(coeffs, p))
    } else {
        Ok(xor_convolve_fast(coeffs, p))
    }
}

pub(crate) fn xor_convolve_direct(coeffs: &[f64], p: &[f64]) -> Vec<f64> {
    (0..p.len())
        .map(|sigma| {
            coeffs
                .iter()
                .enumerate()
                .filter(|(_, &c)| c != 0.0)
                .map(|(s, &c)| c * p[sigma ^ s])
                .sum()
        })
        .collect()
}

pub(crate) fn xor_convolve_fast(coeffs: &[f64], p: &[f64]) -> Vec<f64> {
    let mut a = coeffs.to_vec();
    let mut b = p.to_vec();
    butterfly(&mut a);
    butterfly(&mut b);
    a.iter_mut().zip(&b).for_each(|(x, y)| *x *= y);
    butterfly(&mut a);
    let scale = 1.0 / a.len() as f64;
    a.iter_mut().for_each(|x| *x *= scale);
    a
}
