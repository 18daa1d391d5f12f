//! Response-matrix model families.
//!
//! A response matrix `M` maps true outcome probabilities to observed ones,
//! `M[σ][σ'] = p(σ|σ')`. Four families are supported:
//!
//! * [`ResponseMatrix`]: the full dense matrix, stored column-major.
//! * [`SyndromeDistribution`]: the bit-flip-averaged model, fully described
//!   by the probability `p̃(s)` of each error syndrome `s`, with
//!   `M̃[σ][σ'] = p̃(σ ⊕ σ')`.
//! * [`TpnModel`]: independent per-qubit errors.
//! * [`GroupedModel`]: independent groups of qubits, each carrying its own
//!   syndrome distribution.

use crate::bitstring::{adjacent_pair_count, check_width, format_bits};
use crate::error::{Error, Result};

/// Column-sum deviation accepted (and renormalised away) on construction.
pub const PROB_TOL: f64 = 1e-9;

/// Largest register width that may be materialised as a dense matrix.
pub const DENSE_MAX: usize = 14;

fn check_dense(n: usize) -> Result<()> {
    if n == 0 || n > DENSE_MAX {
        return Err(Error::WidthOutOfRange { width: n, max: DENSE_MAX });
    }
    Ok(())
}

/// Validate one probability vector in place, renormalising small drift.
fn normalise_probabilities(values: &mut [f64], location: impl Fn() -> String) -> Result<()> {
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || !(0.0..=1.0 + PROB_TOL).contains(&v) {
            return Err(Error::InvalidProbability {
                location: format!("{} entry {}", location(), i),
                value: v,
            });
        }
    }
    let sum: f64 = values.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::NotNormalised { location: location(), sum });
    }
    // Drift at the level of summation roundoff is left alone.
    if (sum - 1.0).abs() > 1e-12 {
        for v in values.iter_mut() {
            *v = (*v / sum).min(1.0);
        }
    }
    Ok(())
}

fn check_rate(v: f64, location: impl Fn() -> String) -> Result<()> {
    if !v.is_finite() || !(0.0..=1.0).contains(&v) {
        return Err(Error::InvalidProbability { location: location(), value: v });
    }
    Ok(())
}

/// Dense column-stochastic response matrix, column-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseMatrix {
    n: usize,
    data: Vec<f64>,
}

impl ResponseMatrix {
    /// Build from column-major entries, `data[col * 2^n + row]`.
    pub fn from_column_major(n: usize, mut data: Vec<f64>) -> Result<Self> {
        check_dense(n)?;
        let dim = 1usize << n;
        if data.len() != dim * dim {
            return Err(Error::LengthMismatch { left: data.len(), right: dim * dim });
        }
        for (c, col) in data.chunks_mut(dim).enumerate() {
            normalise_probabilities(col, || format!("column {}", format_bits(c, n)))?;
        }
        Ok(Self { n, data })
    }

    pub fn from_columns(n: usize, columns: Vec<Vec<f64>>) -> Result<Self> {
        check_dense(n)?;
        let dim = 1usize << n;
        if columns.len() != dim {
            return Err(Error::LengthMismatch { left: columns.len(), right: dim });
        }
        let mut data = Vec::with_capacity(dim * dim);
        for col in columns {
            if col.len() != dim {
                return Err(Error::LengthMismatch { left: col.len(), right: dim });
            }
            data.extend(col);
        }
        Self::from_column_major(n, data)
    }

    /// Build from row-major nested rows, the way matrices are usually printed.
    pub fn from_rows(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        check_dense(n)?;
        let dim = 1usize << n;
        if rows.len() != dim || rows.iter().any(|r| r.len() != dim) {
            return Err(Error::LengthMismatch { left: rows.len(), right: dim });
        }
        let mut data = vec![0.0; dim * dim];
        for (r, row) in rows.iter().enumerate() {
            for (c, &v) in row.iter().enumerate() {
                data[c * dim + r] = v;
            }
        }
        Self::from_column_major(n, data)
    }

    pub fn identity(n: usize) -> Result<Self> {
        check_dense(n)?;
        let dim = 1usize << n;
        let mut data = vec![0.0; dim * dim];
        for i in 0..dim {
            data[i * dim + i] = 1.0;
        }
        Ok(Self { n, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        1 << self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[col * self.dim() + row]
    }

    pub fn column(&self, col: usize) -> &[f64] {
        let dim = self.dim();
        &self.data[col * dim..(col + 1) * dim]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim())
    }

    pub fn as_column_major(&self) -> &[f64] {
        &self.data
    }

    /// `M · v`.
    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        if v.len() != dim {
            return Err(Error::LengthMismatch { left: v.len(), right: dim });
        }
        let mut out = vec![0.0; dim];
        for (col, &x) in self.columns().zip(v) {
            if x != 0.0 {
                for (o, &m) in out.iter_mut().zip(col) {
                    *o += m * x;
                }
            }
        }
        Ok(out)
    }

    /// `Mᵀ · v`.
    pub fn apply_transpose(&self, v: &[f64]) -> Result<Vec<f64>> {
        let dim = self.dim();
        if v.len() != dim {
            return Err(Error::LengthMismatch { left: v.len(), right: dim });
        }
        Ok(self
            .columns()
            .map(|col| col.iter().zip(v).map(|(m, x)| m * x).sum())
            .collect())
    }
}

/// Bit-flip-averaged response model, indexed by syndrome.
#[derive(Debug, Clone, PartialEq)]
pub struct SyndromeDistribution {
    n: usize,
    p: Vec<f64>,
}

impl SyndromeDistribution {
    pub fn new(n: usize, mut p: Vec<f64>) -> Result<Self> {
        check_width(n)?;
        if p.len() != 1 << n {
            return Err(Error::LengthMismatch { left: p.len(), right: 1 << n });
        }
        normalise_probabilities(&mut p, || "syndrome distribution".to_string())?;
        Ok(Self { n, p })
    }

    /// The error-free model, `p̃ = δ_0`.
    pub fn identity(n: usize) -> Result<Self> {
        check_width(n)?;
        let mut p = vec![0.0; 1 << n];
        p[0] = 1.0;
        Ok(Self { n, p })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.p
    }

    pub fn prob(&self, syndrome: usize) -> f64 {
        self.p[syndrome]
    }

    /// Syndromes carrying nonzero probability.
    pub fn support(&self) -> impl Iterator<Item = usize> + '_ {
        self.p.iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(s, _)| s)
    }

    pub fn to_matrix(&self) -> Result<ResponseMatrix> {
        check_dense(self.n)?;
        let dim = 1usize << self.n;
        let mut data = vec![0.0; dim * dim];
        for col in 0..dim {
            for row in 0..dim {
                data[col * dim + row] = self.p[row ^ col];
            }
        }
        Ok(ResponseMatrix { n: self.n, data })
    }
}

/// Independent per-qubit readout errors.
#[derive(Debug, Clone, PartialEq)]
pub struct TpnModel {
    /// `(p(1|0), p(0|1))` per qubit, qubit 0 first.
    rates: Vec<(f64, f64)>,
    symmetric: bool,
}

impl TpnModel {
    pub fn new(rates: Vec<(f64, f64)>) -> Result<Self> {
        check_width(rates.len())?;
        for (i, &(p10, p01)) in rates.iter().enumerate() {
            check_rate(p10, || format!("qubit {i} p(1|0)"))?;
            check_rate(p01, || format!("qubit {i} p(0|1)"))?;
        }
        Ok(Self { rates, symmetric: false })
    }

    /// Symmetric model with a single flip probability per qubit.
    pub fn symmetric(p_tilde: Vec<f64>) -> Result<Self> {
        check_width(p_tilde.len())?;
        for (i, &p) in p_tilde.iter().enumerate() {
            check_rate(p, || format!("qubit {i} flip probability"))?;
        }
        Ok(Self {
            rates: p_tilde.into_iter().map(|p| (p, p)).collect(),
            symmetric: true,
        })
    }

    pub fn n(&self) -> usize {
        self.rates.len()
    }

    pub fn rates(&self) -> &[(f64, f64)] {
        &self.rates
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// Single-qubit response matrix as `[[p(0|0), p(0|1)], [p(1|0), p(1|1)]]`.
    pub fn qubit_matrix(&self, qubit: usize) -> [[f64; 2]; 2] {
        let (p10, p01) = self.rates[qubit];
        [[1.0 - p10, p01], [p10, 1.0 - p01]]
    }

    pub fn to_matrix(&self) -> Result<ResponseMatrix> {
        let n = self.n();
        check_dense(n)?;
        let factors = (0..n)
            .rev()
            .map(|q| {
                let m = self.qubit_matrix(q);
                ResponseMatrix::from_rows(1, &[m[0].to_vec(), m[1].to_vec()])
            })
            .collect::<Result<Vec<_>>>()?;
        build_tensor(&factors)
    }

    /// Syndrome form; only meaningful (and only allowed) for symmetric models.
    pub fn to_syndrome(&self) -> Result<SyndromeDistribution> {
        if !self.symmetric {
            return Err(Error::InvalidParameter {
                name: "tpn",
                detail: "only a symmetric TPN model has a syndrome form".into(),
            });
        }
        let n = self.n();
        let mut p = vec![1.0; 1 << n];
        for (s, v) in p.iter_mut().enumerate() {
            for (q, &(r, _)) in self.rates.iter().enumerate() {
                *v *= if (s >> q) & 1 == 1 { r } else { 1.0 - r };
            }
        }
        SyndromeDistribution::new(n, p)
    }
}

/// One block of a [`GroupedModel`]. Local bit `j` of the group distribution
/// is the `j`-th smallest qubit index in `qubits`.
#[derive(Debug, Clone, PartialEq)]
pub struct Group {
    pub qubits: Vec<usize>,
    pub distribution: SyndromeDistribution,
}

impl Group {
    /// Local syndrome index of the group's bits within a global syndrome.
    pub fn local_index(&self, global: usize) -> usize {
        self.qubits
            .iter()
            .enumerate()
            .fold(0, |acc, (j, &q)| acc | (((global >> q) & 1) << j))
    }
}

/// Tensor product of independent, internally correlated qubit groups.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedModel {
    n: usize,
    groups: Vec<Group>,
}

/// Check that `partition` is a partition of `0..n` and return it with each
/// group sorted ascending.
pub fn check_partition(n: usize, partition: &[Vec<usize>]) -> Result<Vec<Vec<usize>>> {
    check_width(n)?;
    let mut seen = vec![false; n];
    let mut out = Vec::with_capacity(partition.len());
    for group in partition {
        if group.is_empty() {
            return Err(Error::InvalidPartition("empty group".into()));
        }
        for &q in group {
            if q >= n {
                return Err(Error::InvalidPartition(format!("qubit {q} out of range for n = {n}")));
            }
            if std::mem::replace(&mut seen[q], true) {
                return Err(Error::InvalidPartition(format!("qubit {q} appears twice")));
            }
        }
        let mut g = group.clone();
        g.sort_unstable();
        out.push(g);
    }
    if let Some(q) = seen.iter().position(|s| !s) {
        return Err(Error::InvalidPartition(format!("qubit {q} not covered")));
    }
    Ok(out)
}

impl GroupedModel {
    pub fn new(n: usize, groups: Vec<(Vec<usize>, SyndromeDistribution)>) -> Result<Self> {
        let qubit_sets: Vec<Vec<usize>> = groups.iter().map(|(q, _)| q.clone()).collect();
        let sorted = check_partition(n, &qubit_sets)?;
        let groups = sorted
            .into_iter()
            .zip(groups)
            .map(|(qubits, (_, distribution))| {
                if distribution.n() != qubits.len() {
                    return Err(Error::WidthMismatch {
                        left: distribution.n(),
                        right: qubits.len(),
                    });
                }
                Ok(Group { qubits, distribution })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { n, groups })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn groups(&self) -> &[Group] {
        &self.groups
    }

    /// The equivalent full syndrome distribution: the product of group marginals.
    pub fn to_syndrome(&self) -> Result<SyndromeDistribution> {
        let p = (0..1usize << self.n)
            .map(|s| {
                self.groups
                    .iter()
                    .map(|g| g.distribution.prob(g.local_index(s)))
                    .product()
            })
            .collect();
        SyndromeDistribution::new(self.n, p)
    }
}

/// Any of the supported model families.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Dense(ResponseMatrix),
    Syndrome(SyndromeDistribution),
    Tpn(TpnModel),
    Grouped(GroupedModel),
}

impl Model {
    pub fn n(&self) -> usize {
        match self {
            Model::Dense(m) => m.n(),
            Model::Syndrome(d) => d.n(),
            Model::Tpn(t) => t.n(),
            Model::Grouped(g) => g.n(),
        }
    }

    /// Whether the model is invariant under conjugation by every `X^(s)`.
    pub fn claims_symmetry(&self) -> bool {
        match self {
            Model::Dense(_) => false,
            Model::Syndrome(_) | Model::Grouped(_) => true,
            Model::Tpn(t) => t.is_symmetric(),
        }
    }

    /// Syndrome form for models that have one.
    pub fn as_syndrome(&self) -> Option<Result<SyndromeDistribution>> {
        match self {
            Model::Syndrome(d) => Some(Ok(d.clone())),
            Model::Tpn(t) if t.is_symmetric() => Some(t.to_syndrome()),
            Model::Grouped(g) => Some(g.to_syndrome()),
            _ => None,
        }
    }
}

impl From<ResponseMatrix> for Model {
    fn from(m: ResponseMatrix) -> Self {
        Model::Dense(m)
    }
}

impl From<SyndromeDistribution> for Model {
    fn from(d: SyndromeDistribution) -> Self {
        Model::Syndrome(d)
    }
}

impl From<TpnModel> for Model {
    fn from(t: TpnModel) -> Self {
        Model::Tpn(t)
    }
}

impl From<GroupedModel> for Model {
    fn from(g: GroupedModel) -> Self {
        Model::Grouped(g)
    }
}

/// Kronecker product; the first factor acts on the highest-index qubits.
pub fn build_tensor(factors: &[ResponseMatrix]) -> Result<ResponseMatrix> {
    let Some((first, rest)) = factors.split_first() else {
        return Err(Error::InvalidParameter {
            name: "factors",
            detail: "at least one factor is required".into(),
        });
    };
    let total: usize = factors.iter().map(|f| f.n()).sum();
    check_dense(total)?;
    let mut acc = first.clone();
    for b in rest {
        let (da, db) = (acc.dim(), b.dim());
        let dim = da * db;
        let mut data = vec![0.0; dim * dim];
        for ca in 0..da {
            for cb in 0..db {
                let col = ca * db + cb;
                for ra in 0..da {
                    let a = acc.get(ra, ca);
                    if a == 0.0 {
                        continue;
                    }
                    for rb in 0..db {
                        data[col * dim + ra * db + rb] = a * b.get(rb, cb);
                    }
                }
            }
        }
        acc = ResponseMatrix { n: acc.n + b.n, data };
    }
    Ok(acc)
}

/// Bit-flip average of a dense matrix: `p̃(σ) = 2^-n Σ_s M[σ⊕s][s]`.
pub fn symmetrise(m: &ResponseMatrix) -> SyndromeDistribution {
    let dim = m.dim();
    let scale = 1.0 / dim as f64;
    let p: Vec<f64> = (0..dim)
        .map(|sigma| (0..dim).map(|s| m.get(sigma ^ s, s)).sum::<f64>() * scale)
        .collect();
    SyndromeDistribution::new(m.n(), p).expect("average of stochastic columns is stochastic")
}

/// Bit-flip average of a TPN model: each qubit's two error rates are averaged.
pub fn symmetrise_tpn(t: &TpnModel) -> TpnModel {
    let p = t.rates().iter().map(|&(a, b)| 0.5 * (a + b)).collect();
    TpnModel::symmetric(p).expect("average of valid rates is valid")
}

/// Multiply each entry by `gamma^k`, where `k` is the number of adjacent
/// erroneous qubit pairs in its syndrome, then renormalise every column.
pub fn boost_correlations(m: &ResponseMatrix, gamma: f64) -> Result<ResponseMatrix> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(Error::InvalidParameter {
            name: "gamma",
            detail: format!("must be positive, got {gamma}"),
        });
    }
    if gamma == 1.0 {
        return Ok(m.clone());
    }
    let dim = m.dim();
    let mut data = m.data.clone();
    for (col, column) in data.chunks_mut(dim).enumerate() {
        for (row, v) in column.iter_mut().enumerate() {
            *v *= gamma.powi(adjacent_pair_count(row ^ col) as i32);
        }
        let sum: f64 = column.iter().sum();
        column.iter_mut().for_each(|v| *v /= sum);
    }
    Ok(ResponseMatrix { n: m.n, data })
}

/// Dense matrix realising any model exactly.
pub fn densify(model: &Model) -> Result<ResponseMatrix> {
    check_dense(model.n())?;
    match model {
        Model::Dense(m) => Ok(m.clone()),
        Model::Syndrome(d) => d.to_matrix(),
        Model::Tpn(t) => t.to_matrix(),
        Model::Grouped(g) => g.to_syndrome()?.to_matrix(),
    }
}

/// Findings from [`diagnose_columns`] / [`validate`]. Empty means healthy.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Diagnostics {
    /// `(column, sum - 1)` for columns off by more than [`PROB_TOL`].
    pub column_deviations: Vec<(usize, f64)>,
    /// `(row, column, value)` for negative entries.
    pub negative_entries: Vec<(usize, usize, f64)>,
    /// `max_s |M - X^(s) M X^(s)|`, reported only for models claiming symmetry.
    pub symmetry_residual: Option<f64>,
}

impl Diagnostics {
    pub fn is_clean(&self) -> bool {
        self.column_deviations.is_empty()
            && self.negative_entries.is_empty()
            && self.symmetry_residual.is_none_or(|r| r <= PROB_TOL)
    }
}

/// Inspect raw column-major data without rejecting it.
pub fn diagnose_columns(n: usize, data: &[f64], check_symmetry: bool) -> Diagnostics {
    let dim = 1usize << n;
    let mut d = Diagnostics::default();
    for (c, col) in data.chunks(dim).enumerate() {
        let dev = col.iter().sum::<f64>() - 1.0;
        if dev.abs() > PROB_TOL {
            d.column_deviations.push((c, dev));
        }
        for (r, &v) in col.iter().enumerate() {
            if v < 0.0 {
                d.negative_entries.push((r, c, v));
            }
        }
    }
    if check_symmetry && data.len() == dim * dim {
        // Entries related by a common XOR shift share the difference σ ⊕ σ';
        // the worst pairwise gap inside each such orbit is the residual.
        let mut residual: f64 = 0.0;
        for diff in 0..dim {
            let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
            for col in 0..dim {
                let v = data[col * dim + (col ^ diff)];
                lo = lo.min(v);
                hi = hi.max(v);
            }
            residual = residual.max(hi - lo);
        }
        d.symmetry_residual = Some(residual);
    }
    d
}

pub fn validate(model: &Model) -> Result<Diagnostics> {
    let m = densify(model)?;
    Ok(diagnose_columns(m.n(), m.as_column_major(), model.claims_symmetry()))
}
