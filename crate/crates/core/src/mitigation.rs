//! Recovering true outcome distributions from observed ones.
//!
//! Two solvers are offered: direct inversion of the model (analytic for
//! bit-flip-averaged models, per-qubit for TPN, LU for dense matrices) and
//! least squares over the probability simplex by projected gradient.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::counts::CountsTable;
use crate::error::{Error, Result};
use crate::model::{Model, ResponseMatrix, SyndromeDistribution, TpnModel};
use crate::sim::{Basis, MeasurementSetting};
use crate::wht::{analytic_inverse_with, xor_convolve, SmallEigenvalues, EIGENVALUE_FLOOR};

/// Dense inversions with a 1-norm condition number above this are refused.
pub const CONDITION_LIMIT: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Inverse,
    Lsq,
    LsqReduced,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Inverse => "inverse",
            Method::Lsq => "lsq",
            Method::LsqReduced => "lsq-reduced",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(Method::Inverse),
            "lsq" => Ok(Method::Lsq),
            "lsq-reduced" => Ok(Method::LsqReduced),
            other => Err(Error::InvalidParameter {
                name: "method",
                detail: format!("unknown method {other:?}"),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MitigationResult {
    /// Unprojected solution; may contain negative entries.
    pub quasi: Vec<f64>,
    /// Nearest point of the probability simplex (or the lsq optimum).
    pub physical: Vec<f64>,
    pub method: Method,
    /// `‖p_obs - M · physical‖₂`.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Max-norm change of the final lsq iteration; zero for the inverse.
    pub last_change: f64,
}

impl MitigationResult {
    /// Turn an unconverged lsq result into [`Error::NonConvergence`].
    pub fn check_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NonConvergence { iterations: self.iterations, last_change: self.last_change })
        }
    }
}

fn check_observed(p_obs: &[f64], n: usize) -> Result<()> {
    if p_obs.len() != 1 << n {
        return Err(Error::LengthMismatch { left: p_obs.len(), right: 1 << n });
    }
    if let Some((i, &v)) = p_obs.iter().enumerate().find(|(_, v)| !v.is_finite()) {
        return Err(Error::InvalidProbability { location: format!("observed entry {i}"), value: v });
    }
    Ok(())
}

/// Apply 2×2 matrices qubit by qubit; `mats[q][row][col]` acts on qubit `q`.
fn apply_qubitwise(v: &[f64], mats: &[[[f64; 2]; 2]]) -> Vec<f64> {
    let mut out = v.to_vec();
    for (q, m) in mats.iter().enumerate() {
        let stride = 1usize << q;
        for block in out.chunks_mut(2 * stride) {
            let (lo, hi) = block.split_at_mut(stride);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x0, x1) = (*a, *b);
                *a = m[0][0] * x0 + m[0][1] * x1;
                *b = m[1][0] * x0 + m[1][1] * x1;
            }
        }
    }
    out
}

fn transpose2(m: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
    [[m[0][0], m[1][0]], [m[0][1], m[1][1]]]
}

/// A model in the form cheapest to apply.
#[derive(Debug, Clone)]
enum Forward {
    Dense(ResponseMatrix),
    Syndrome(Vec<f64>),
    Qubitwise(Vec<[[f64; 2]; 2]>),
    /// Dense matrix over a subset of outcomes, row-major `dim × dim`.
    Restricted { dim: usize, rows: Vec<f64> },
}

impl Forward {
    fn new(model: &Model) -> Result<Self> {
        Ok(match model {
            Model::Dense(m) => Forward::Dense(m.clone()),
            Model::Tpn(t) => Forward::Qubitwise((0..t.n()).map(|q| t.qubit_matrix(q)).collect()),
            Model::Syndrome(d) => Forward::Syndrome(d.probabilities().to_vec()),
            Model::Grouped(g) => Forward::Syndrome(g.to_syndrome()?.probabilities().to_vec()),
        })
    }

    fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Forward::Dense(m) => m.apply(v).expect("length checked on entry"),
            Forward::Syndrome(p) => xor_convolve(p, v).expect("length checked on entry"),
            Forward::Qubitwise(mats) => apply_qubitwise(v, mats),
            Forward::Restricted { dim, rows } => {
                rows.chunks(*dim).map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
            }
        }
    }

    fn apply_transpose(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Forward::Dense(m) => m.apply_transpose(v).expect("length checked on entry"),
            // p̃(σ ⊕ σ') is symmetric in its two arguments.
            Forward::Syndrome(p) => xor_convolve(p, v).expect("length checked on entry"),
            Forward::Qubitwise(mats) => {
                let t: Vec<_> = mats.iter().map(|&m| transpose2(m)).collect();
                apply_qubitwise(v, &t)
            }
            Forward::Restricted { dim, rows } => {
                let mut out = vec![0.0; *dim];
                for (r, &x) in rows.chunks(*dim).zip(v) {
                    for (o, a) in out.iter_mut().zip(r) {
                        *o += a * x;
                    }
                }
                out
            }
        }
    }

    /// Upper bound on `‖M‖₂²` from `‖M‖₁ ‖M‖_∞`.
    fn lipschitz(&self) -> f64 {
        fn bound(dim: usize, get: impl Fn(usize, usize) -> f64) -> f64 {
            let mut col_max: f64 = 0.0;
            let mut row_sums = vec![0.0; dim];
            for c in 0..dim {
                let mut s = 0.0;
                for (r, rs) in row_sums.iter_mut().enumerate() {
                    let a = get(r, c).abs();
                    s += a;
                    *rs += a;
                }
                col_max = col_max.max(s);
            }
            col_max * row_sums.into_iter().fold(0.0, f64::max)
        }
        match self {
            Forward::Dense(m) => bound(m.dim(), |r, c| m.get(r, c)),
            Forward::Syndrome(p) => {
                let s: f64 = p.iter().map(|x| x.abs()).sum();
                s * s
            }
            Forward::Qubitwise(mats) => mats.iter().map(|m| bound(2, |r, c| m[r][c])).product(),
            Forward::Restricted { dim, rows } => bound(*dim, |r, c| rows[r * dim + c]),
        }
    }
}

fn l2_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn residual_of(forward: &Forward, p_obs: &[f64], x: &[f64]) -> f64 {
    l2_distance(p_obs, &forward.apply(x))
}

/// Euclidean projection onto `{x ≥ 0, Σx = 1}` by the sort-and-threshold rule.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut theta = 0.0;
    for (j, &x) in u.iter().enumerate() {
        cumsum += x;
        let t = (cumsum - 1.0) / (j + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Zero the negative entries and rescale to unit sum. Biased, but sometimes preferred.
pub fn clip_and_renormalise(quasi: &[f64]) -> Result<Vec<f64>> {
    let clipped: Vec<f64> = quasi.iter().map(|&x| x.max(0.0)).collect();
    let sum: f64 = clipped.iter().sum();
    if !(sum > 0.0) {
        return Err(Error::InvalidParameter {
            name: "quasi",
            detail: "no positive entries to renormalise".into(),
        });
    }
    Ok(clipped.into_iter().map(|x| x / sum).collect())
}

fn lu_solve(m: &ResponseMatrix, p_obs: &[f64]) -> Result<Vec<f64>> {
    let dim = m.dim();
    let a = DMatrix::from_column_slice(dim, dim, m.as_column_major());
    let norm1 = |x: &DMatrix<f64>| {
        x.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    };
    let lu = a.clone().lu();
    let inverse = lu.try_inverse().ok_or(Error::IllConditioned { estimate: f64::INFINITY })?;
    let kappa = norm1(&a) * norm1(&inverse);
    if !kappa.is_finite() || kappa > CONDITION_LIMIT {
        return Err(Error::IllConditioned { estimate: kappa });
    }
    Ok((inverse * DVector::from_column_slice(p_obs)).as_slice().to_vec())
}

fn tpn_inverse(t: &TpnModel, p_obs: &[f64], floor: f64, policy: SmallEigenvalues) -> Result<Vec<f64>> {
    let mut mats = Vec::with_capacity(t.n());
    for q in 0..t.n() {
        let m = t.qubit_matrix(q);
        let mut det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        if det.abs() < floor {
            match policy {
                SmallEigenvalues::Reject => return Err(Error::NearSingular { index: q, value: det }),
                SmallEigenvalues::Clamp => det = floor.copysign(det),
            }
        }
        mats.push([[m[1][1] / det, -m[0][1] / det], [-m[1][0] / det, m[0][0] / det]]);
    }
    Ok(apply_qubitwise(p_obs, &mats))
}

/// `M^{-1} p_obs`, projected onto the simplex.
pub fn mitigate_inverse(p_obs: &[f64], model: &Model) -> Result<MitigationResult> {
    mitigate_inverse_with(p_obs, model, SmallEigenvalues::Reject)
}

/// As [`mitigate_inverse`], choosing how eigenvalues (or per-qubit
/// determinants) below [`EIGENVALUE_FLOOR`] are handled.
pub fn mitigate_inverse_with(p_obs: &[f64], model: &Model, policy: SmallEigenvalues) -> Result<MitigationResult> {
    check_observed(p_obs, model.n())?;
    let quasi = match model {
        Model::Dense(m) => lu_solve(m, p_obs)?,
        Model::Tpn(t) if !t.is_symmetric() => tpn_inverse(t, p_obs, EIGENVALUE_FLOOR, policy)?,
        _ => {
            let d = model.as_syndrome().expect("every remaining family has a syndrome form")?;
            let inv = analytic_inverse_with(&d, EIGENVALUE_FLOOR, policy)?;
            xor_convolve(&inv.q_tilde, p_obs)?
        }
    };
    let physical = project_simplex(&quasi);
    let residual = residual_of(&Forward::new(model)?, p_obs, &physical);
    Ok(MitigationResult {
        quasi,
        physical,
        method: Method::Inverse,
        residual,
        iterations: 0,
        converged: true,
        last_change: 0.0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LsqOptions {
    /// Stop once an iteration moves no entry by more than this.
    pub tol: f64,
    /// Iteration cap; `None` means `50 · 2^n`.
    pub max_iter: Option<usize>,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: None }
    }
}

impl LsqOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter { name: "tol", detail: format!("must be positive, got {}", self.tol) });
        }
        Ok(())
    }
}

/// Projected gradient descent on `½‖p_obs - M x‖²` over the simplex.
#[derive(Debug, Clone)]
pub struct LsqSolver {
    forward: Forward,
    target: Vec<f64>,
    x: Vec<f64>,
    step_size: f64,
    iterations: usize,
    last_change: f64,
}

impl LsqSolver {
    fn from_parts(forward: Forward, target: Vec<f64>, start: Vec<f64>) -> Self {
        let lipschitz = forward.lipschitz();
        Self {
            step_size: if lipschitz > 0.0 { 1.0 / lipschitz } else { 1.0 },
            forward,
            target,
            x: project_simplex(&start),
            iterations: 0,
            last_change: f64::INFINITY,
        }
    }

    /// Solver started from the projection of `start`.
    pub fn new(p_obs: &[f64], model: &Model, start: &[f64]) -> Result<Self> {
        check_observed(p_obs, model.n())?;
        check_observed(start, model.n())?;
        Ok(Self::from_parts(Forward::new(model)?, p_obs.to_vec(), start.to_vec()))
    }

    /// One projected-gradient step; returns the max-norm change.
    pub fn step(&mut self) -> f64 {
        let r: Vec<f64> = self.forward.apply(&self.x).iter().zip(&self.target).map(|(a, b)| a - b).collect();
        let g = self.forward.apply_transpose(&r);
        let moved: Vec<f64> = self.x.iter().zip(&g).map(|(x, g)| x - self.step_size * g).collect();
        let next = project_simplex(&moved);
        let change = next.iter().zip(&self.x).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        self.x = next;
        self.iterations += 1;
        self.last_change = change;
        change
    }

    pub fn residual(&self) -> f64 {
        residual_of(&self.forward, &self.target, &self.x)
    }

    pub fn solution(&self) -> &[f64] {
        &self.x
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Iterate until the change drops below `tol` or `max_iter` steps are taken.
    fn run(&mut self, tol: f64, max_iter: usize) -> bool {
        while self.iterations < max_iter {
            if self.step() < tol {
                return true;
            }
        }
        false
    }
}

/// Least squares over the probability simplex.
///
/// Starts from the projected inverse when the model is invertible, so the
/// result never fits worse than [`mitigate_inverse`]'s physical output.
/// Hitting the iteration cap is reported through `converged`, not an error;
/// see [`MitigationResult::check_converged`].
pub fn mitigate_lsq(p_obs: &[f64], model: &Model, opts: LsqOptions) -> Result<MitigationResult> {
    opts.validate()?;
    check_observed(p_obs, model.n())?;
    let start = match mitigate_inverse(p_obs, model) {
        Ok(r) => r.physical,
        Err(_) => p_obs.to_vec(),
    };
    let mut solver = LsqSolver::new(p_obs, model, &start)?;
    let max_iter = opts.max_iter.unwrap_or(50 << model.n());
    let converged = solver.run(opts.tol, max_iter);
    let residual = solver.residual();
    let physical = solver.x;
    Ok(MitigationResult {
        quasi: physical.clone(),
        physical,
        method: Method::Lsq,
        residual,
        iterations: solver.iterations,
        converged,
        last_change: solver.last_change,
    })
}

/// Check that `support` maps into itself under XOR with every syndrome of
/// nonzero probability; returns the sorted, deduplicated support.
pub fn check_support_closure(d: &SyndromeDistribution, support: &[usize]) -> Result<Vec<usize>> {
    let dim = 1usize << d.n();
    let mut sorted = support.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() {
        return Err(Error::InvalidParameter { name: "support", detail: "empty support".into() });
    }
    if let Some(&x) = sorted.iter().find(|&&x| x >= dim) {
        return Err(Error::ValueOutOfRange { value: x as u64, width: d.n() });
    }
    let mut member = vec![false; dim];
    sorted.iter().for_each(|&x| member[x] = true);
    for s in d.support() {
        if let Some(&x) = sorted.iter().find(|&&x| !member[x ^ s]) {
            return Err(Error::SupportNotClosed {
                syndrome: crate::bitstring::format_bits(s, d.n()),
                outcome: crate::bitstring::format_bits(x, d.n()),
            });
        }
    }
    Ok(sorted)
}

/// Least squares restricted to a closed outcome subset; entries outside
/// `support` are fixed to zero.
pub fn mitigate_lsq_reduced(
    p_obs: &[f64],
    d: &SyndromeDistribution,
    support: &[usize],
    opts: LsqOptions,
) -> Result<MitigationResult> {
    opts.validate()?;
    check_observed(p_obs, d.n())?;
    let support = check_support_closure(d, support)?;
    let dim = support.len();
    let mut rows = Vec::with_capacity(dim * dim);
    for &r in &support {
        rows.extend(support.iter().map(|&c| d.prob(r ^ c)));
    }
    let target: Vec<f64> = support.iter().map(|&x| p_obs[x]).collect();
    let mut solver = LsqSolver::from_parts(Forward::Restricted { dim, rows }, target.clone(), target);
    let max_iter = opts.max_iter.unwrap_or(50 * dim);
    let converged = solver.run(opts.tol, max_iter);
    let mut physical = vec![0.0; p_obs.len()];
    for (&x, &v) in support.iter().zip(solver.solution()) {
        physical[x] = v;
    }
    let residual = residual_of(&Forward::Syndrome(d.probabilities().to_vec()), p_obs, &physical);
    Ok(MitigationResult {
        quasi: physical.clone(),
        physical,
        method: Method::LsqReduced,
        residual,
        iterations: solver.iterations,
        converged,
        last_change: solver.last_change,
    })
}

/// Qubits of generator `i` on a chain of `n`: `i-1, i, i+1`, truncated at the ends.
pub fn generator_qubits(n: usize, i: usize) -> Vec<usize> {
    (i.saturating_sub(1)..=(i + 1).min(n - 1)).collect()
}

/// `⟨Z_{i-1} X_i Z_{i+1}⟩` from an outcome distribution (or quasi-distribution)
/// measured in `setting`.
pub fn stabilizer_expectation(dist: &[f64], setting: &MeasurementSetting, i: usize) -> Result<f64> {
    let n = setting.n();
    if dist.len() != 1 << n {
        return Err(Error::LengthMismatch { left: dist.len(), right: 1 << n });
    }
    if i >= n {
        return Err(Error::InvalidParameter { name: "generator", detail: format!("{i} out of range for n = {n}") });
    }
    let qubits = generator_qubits(n, i);
    for &q in &qubits {
        let want = if q == i { Basis::X } else { Basis::Z };
        if setting.bases[q] != want {
            return Err(Error::SettingMismatch { generator: i });
        }
    }
    let mask = qubits.iter().fold(0usize, |m, &q| m | 1 << q);
    Ok(dist
        .iter()
        .enumerate()
        .map(|(sigma, &p)| if (sigma & mask).count_ones() % 2 == 0 { p } else { -p })
        .sum())
}

pub fn stabilizer_expectation_counts(counts: &CountsTable, setting: &MeasurementSetting, i: usize) -> Result<f64> {
    if counts.n() != setting.n() {
        return Err(Error::WidthMismatch { left: counts.n(), right: setting.n() });
    }
    stabilizer_expectation(&counts.frequencies()?, setting, i)
}

/// `⟨G_i⟩` for every generator, even ones read from the `even_x`
/// distribution and odd ones from `odd_x`.
pub fn generator_expectations(even_x: Option<&[f64]>, odd_x: Option<&[f64]>, n: usize) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::InvalidParameter { name: "n", detail: "must be positive".into() });
    }
    let even_setting = MeasurementSetting::even_x(n);
    let odd_setting = MeasurementSetting::odd_x(n);
    (0..n)
        .map(|i| {
            if i % 2 == 0 {
                let d = even_x.ok_or_else(|| Error::MissingInput("even_x setting".into()))?;
                stabilizer_expectation(d, &even_setting, i)
            } else {
                let d = odd_x.ok_or_else(|| Error::MissingInput("odd_x setting".into()))?;
                stabilizer_expectation(d, &odd_setting, i)
            }
        })
        .collect()
}

/// `F_n = (1/n) Σ_i ⟨G_i⟩`.
pub fn graph_fidelity_estimate(even_x: Option<&[f64]>, odd_x: Option<&[f64]>, n: usize) -> Result<f64> {
    let g = generator_expectations(even_x, odd_x, n)?;
    Ok(g.iter().sum::<f64>() / n as f64)
}
