//! Calibration runs and the estimators for each model family.
//!
//! Estimators only see [`CountsTable`]s, so tables read from files go
//! through exactly the same path as simulated ones.

use rand::Rng;

use crate::bitstring::format_bits;
use crate::counts::CountsTable;
use crate::error::{Error, Result};
use crate::model::{check_partition, GroupedModel, ResponseMatrix, SyndromeDistribution, TpnModel};
use crate::sim::{input_counts, Channel};

/// How the calibration shots were taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProtocolTag {
    /// Basis states prepared and read out directly.
    Plain,
    /// Only `0…0`, with per-shot random bit flips undone after readout.
    Bfa,
}

/// Which calibration experiment to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationProtocol {
    /// Every one of the `2^n` basis states.
    Full,
    /// Only `0…0` and `1…1`.
    Tpn,
    /// Only `0…0`, bit-flip averaged.
    Bfa,
}

impl CalibrationProtocol {
    pub fn tag(self) -> ProtocolTag {
        match self {
            CalibrationProtocol::Bfa => ProtocolTag::Bfa,
            _ => ProtocolTag::Plain,
        }
    }

    pub fn inputs(self, n: usize) -> Vec<usize> {
        match self {
            CalibrationProtocol::Full => (0..1 << n).collect(),
            CalibrationProtocol::Tpn => vec![0, (1 << n) - 1],
            CalibrationProtocol::Bfa => vec![0],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    n: usize,
    protocol: ProtocolTag,
    tables: Vec<(usize, CountsTable)>,
}

impl CalibrationSet {
    pub fn new(n: usize, protocol: ProtocolTag, mut tables: Vec<(usize, CountsTable)>) -> Result<Self> {
        for (input, t) in &tables {
            if t.n() != n {
                return Err(Error::WidthMismatch { left: t.n(), right: n });
            }
            if input >> n != 0 {
                return Err(Error::ValueOutOfRange { value: *input as u64, width: n });
            }
        }
        tables.sort_by_key(|(i, _)| *i);
        if tables.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::Format("duplicate calibration input".into()));
        }
        if protocol == ProtocolTag::Bfa && (tables.len() != 1 || tables[0].0 != 0) {
            return Err(Error::Format(
                "a bit-flip-averaged calibration holds exactly the all-zeros input".into(),
            ));
        }
        Ok(Self { n, protocol, tables })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn protocol(&self) -> ProtocolTag {
        self.protocol
    }

    pub fn tables(&self) -> &[(usize, CountsTable)] {
        &self.tables
    }

    pub fn table(&self, input: usize) -> Result<&CountsTable> {
        self.tables
            .binary_search_by_key(&input, |(i, _)| *i)
            .map(|k| &self.tables[k].1)
            .map_err(|_| Error::MissingInput(format_bits(input, self.n)))
    }

    pub fn total_shots(&self) -> u64 {
        self.tables.iter().map(|(_, t)| t.shots()).sum()
    }

    fn require(&self, tag: ProtocolTag) -> Result<()> {
        if self.protocol != tag {
            return Err(Error::InvalidParameter {
                name: "protocol",
                detail: format!("estimator needs a {:?} calibration, got {:?}", tag, self.protocol),
            });
        }
        Ok(())
    }
}

/// `budget / k` shots per state, with the remainder going to the lowest inputs.
pub fn split_budget(budget: u64, states: usize) -> Vec<u64> {
    let k = states as u64;
    let (base, extra) = (budget / k, budget % k);
    (0..k).map(|i| base + u64::from(i < extra)).collect()
}

/// Simulate a calibration of `protocol` against the true matrix `m`.
pub fn run_calibration<R: Rng + ?Sized>(
    m: &ResponseMatrix,
    protocol: CalibrationProtocol,
    budget: u64,
    rng: &mut R,
) -> Result<CalibrationSet> {
    run_calibration_on(&Channel::new(m), protocol, budget, rng)
}

/// [`run_calibration`] with a prebuilt channel sampler.
pub fn run_calibration_on<R: Rng + ?Sized>(
    channel: &Channel,
    protocol: CalibrationProtocol,
    budget: u64,
    rng: &mut R,
) -> Result<CalibrationSet> {
    let n = channel.n();
    let inputs = protocol.inputs(n);
    if budget < inputs.len() as u64 {
        return Err(Error::InvalidParameter {
            name: "shots",
            detail: format!("budget {budget} is below the {} required input states", inputs.len()),
        });
    }
    let bfa = protocol == CalibrationProtocol::Bfa;
    let tables = inputs
        .iter()
        .zip(split_budget(budget, inputs.len()))
        .map(|(&input, shots)| (input, input_counts(input, channel, shots, bfa, rng)))
        .collect();
    CalibrationSet::new(n, protocol.tag(), tables)
}

/// Column `k` is the empirical distribution observed for input `k`.
pub fn estimate_full(c: &CalibrationSet) -> Result<ResponseMatrix> {
    c.require(ProtocolTag::Plain)?;
    let dim = 1usize << c.n();
    let mut data = Vec::with_capacity(dim * dim);
    for input in 0..dim {
        data.extend(c.table(input)?.frequencies()?);
    }
    ResponseMatrix::from_column_major(c.n(), data)
}

/// Observed outcome frequencies of the `0…0` run are the syndrome probabilities.
pub fn estimate_bfa(c: &CalibrationSet) -> Result<SyndromeDistribution> {
    c.require(ProtocolTag::Bfa)?;
    SyndromeDistribution::new(c.n(), c.table(0)?.frequencies()?)
}

fn marginal_rate(t: &CountsTable, qubit: usize, value: u64) -> Result<f64> {
    let m = t.marginal(&[qubit])?;
    Ok(m[value as usize] as f64 / t.shots() as f64)
}

/// Per-qubit `p(1|0)` from the `0…0` run and `p(0|1)` from the `1…1` run.
pub fn estimate_tpn(c: &CalibrationSet) -> Result<TpnModel> {
    c.require(ProtocolTag::Plain)?;
    let n = c.n();
    let zeros = c.table(0)?;
    let ones = c.table((1 << n) - 1)?;
    let rates = (0..n)
        .map(|q| Ok((marginal_rate(zeros, q, 1)?, marginal_rate(ones, q, 0)?)))
        .collect::<Result<Vec<_>>>()?;
    TpnModel::new(rates)
}

/// Symmetric per-qubit flip rates from the marginals of the averaged `0…0` run.
pub fn estimate_bfa_tpn(c: &CalibrationSet) -> Result<TpnModel> {
    c.require(ProtocolTag::Bfa)?;
    let t = c.table(0)?;
    let p = (0..c.n()).map(|q| marginal_rate(t, q, 1)).collect::<Result<Vec<_>>>()?;
    TpnModel::symmetric(p)
}

/// One syndrome distribution per group, from the group's marginal counts.
pub fn estimate_grouped(c: &CalibrationSet, partition: &[Vec<usize>]) -> Result<GroupedModel> {
    c.require(ProtocolTag::Bfa)?;
    let groups = check_partition(c.n(), partition)?;
    let t = c.table(0)?;
    let total = t.shots() as f64;
    let fitted = groups
        .into_iter()
        .map(|qubits| {
            let counts = t.marginal(&qubits)?;
            let p = counts.iter().map(|&k| k as f64 / total).collect();
            Ok((qubits.clone(), SyndromeDistribution::new(qubits.len(), p)?))
        })
        .collect::<Result<Vec<_>>>()?;
    GroupedModel::new(c.n(), fitted)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::model_fidelity;
    use crate::model::{symmetrise, Model};
    use crate::sim::seeded;
    use crate::example;

    fn bfa_set(t: CountsTable) -> CalibrationSet {
        CalibrationSet::new(t.n(), ProtocolTag::Bfa, vec![(0, t)]).unwrap()
    }

    /// Integer "expected" counts: every example entry is a multiple of 1e-6.
    fn exact_table(p: &[f64], n: usize, scale: f64) -> CountsTable {
        CountsTable::from_pairs(n, p.iter().enumerate().map(|(o, &x)| (o, (x * scale).round() as u64))).unwrap()
    }

    #[test]
    fn budget_split() {
        assert_eq!(split_budget(1600, 16), vec![100; 16]);
        assert_eq!(split_budget(10, 4), vec![3, 3, 2, 2]);
        let m = example::response_matrix();
        let c = run_calibration(&m, CalibrationProtocol::Full, 1600, &mut seeded(1)).unwrap();
        assert_eq!(c.tables().len(), 16);
        assert!(c.tables().iter().all(|(_, t)| t.shots() == 100));
        assert_eq!(c.total_shots(), 1600);
        let c = run_calibration(&m, CalibrationProtocol::Tpn, 1001, &mut seeded(1)).unwrap();
        assert_eq!(c.total_shots(), 1001);
        assert_eq!(c.table(0).unwrap().shots(), 501);
        assert!(run_calibration(&m, CalibrationProtocol::Full, 15, &mut seeded(1)).is_err());
    }

    #[test]
    fn identity_calibration_is_concentrated() {
        let m = ResponseMatrix::identity(3).unwrap();
        for p in [CalibrationProtocol::Full, CalibrationProtocol::Tpn, CalibrationProtocol::Bfa] {
            let c = run_calibration(&m, p, 800, &mut seeded(2)).unwrap();
            for (input, t) in c.tables() {
                assert_eq!(t.get(*input), t.shots());
            }
        }
    }

    #[test]
    fn example_bfa_estimate() {
        let c = bfa_set(example::calibration_counts());
        let est = estimate_bfa(&c).unwrap();
        for &(s, k) in example::CALIBRATION_COUNTS.iter() {
            assert_eq!(est.prob(s), k as f64 / 10_000.0);
        }
        assert_eq!(est.prob(0), 0.8091);
        let truth = symmetrise(&example::response_matrix());
        let infid = 1.0 - model_fidelity(&est.into(), &truth.into()).unwrap();
        assert!((5e-5..=2e-4).contains(&infid), "{infid}");
    }

    #[test]
    fn example_marginal_estimates() {
        let c = bfa_set(example::calibration_counts());
        let t = estimate_bfa_tpn(&c).unwrap();
        assert_eq!(t.rates()[0].0, 0.0682);
        assert_eq!(t.rates()[3].0, 0.0505);
        assert!(t.is_symmetric());

        let g = estimate_grouped(&c, &example::partition()).unwrap();
        let pair = g.groups().iter().find(|g| g.qubits == vec![1, 2]).unwrap();
        assert_eq!(pair.distribution.probabilities(), &[0.9141, 0.0, 0.0, 0.0859]);
        let truth = symmetrise(&example::response_matrix());
        let infid = 1.0 - model_fidelity(&g.clone().into(), &truth.into()).unwrap();
        assert!((1e-5..=6e-5).contains(&infid), "{infid}");

        // n singletons coincide with the symmetric TPN estimate.
        let singles: Vec<Vec<usize>> = (0..4).map(|q| vec![q]).collect();
        let gs = estimate_grouped(&c, &singles).unwrap().to_syndrome().unwrap();
        let ts = t.to_syndrome().unwrap();
        for s in 0..16 {
            assert!((gs.prob(s) - ts.prob(s)).abs() < 1e-15);
        }
        // One group covering everything is the full averaged estimate.
        let whole = estimate_grouped(&c, &[vec![0, 1, 2, 3]]).unwrap().to_syndrome().unwrap();
        assert_eq!(whole, estimate_bfa(&c).unwrap());
        assert!(estimate_grouped(&c, &[vec![0, 1], vec![1, 2, 3]]).is_err());
    }

    #[test]
    fn uniform_noise_gives_half() {
        let t = CountsTable::from_dense(3, &[10; 8]).unwrap();
        let est = estimate_bfa_tpn(&bfa_set(t)).unwrap();
        assert!(est.rates().iter().all(|r| r.0 == 0.5));
    }

    #[test]
    fn exact_tables_recover_models() {
        let m = example::response_matrix();
        let scale = 1e6;
        // Averaged run at infinite shots: syndrome distribution of the matrix.
        let avg = symmetrise(&m);
        let est = estimate_bfa(&bfa_set(exact_table(avg.probabilities(), 4, 1e12))).unwrap();
        for s in 0..16 {
            assert!((est.prob(s) - avg.prob(s)).abs() < 1e-12);
        }
        // Plain runs recover every column and the TPN marginals.
        let tables: Vec<_> = (0..16).map(|k| (k, exact_table(m.column(k), 4, scale))).collect();
        let c = CalibrationSet::new(4, ProtocolTag::Plain, tables).unwrap();
        let full = estimate_full(&c).unwrap();
        for (a, b) in full.as_column_major().iter().zip(m.as_column_major()) {
            assert!((a - b).abs() < 1e-12);
        }
        let tpn = estimate_tpn(&c).unwrap();
        assert!((tpn.rates()[0].0 - 0.03).abs() < 1e-12);
        assert!((tpn.rates()[0].1 - 0.11).abs() < 1e-12);
        assert!((tpn.rates()[3].0 - 0.02).abs() < 1e-12);
    }

    #[test]
    fn exact_tables_from_true_tpn() {
        let t = TpnModel::new(vec![(0.01, 0.05), (0.02, 0.08), (0.04, 0.1)]).unwrap();
        let m = t.to_matrix().unwrap();
        let tables = vec![(0, exact_table(m.column(0), 3, 1e6)), (7, exact_table(m.column(7), 3, 1e6))];
        let c = CalibrationSet::new(3, ProtocolTag::Plain, tables).unwrap();
        let est = estimate_tpn(&c).unwrap();
        for (a, b) in est.rates().iter().zip(t.rates()) {
            assert!((a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
        }
        let noiseless = CalibrationSet::new(
            3,
            ProtocolTag::Plain,
            vec![
                (0, CountsTable::from_pairs(3, [(0, 10)]).unwrap()),
                (7, CountsTable::from_pairs(3, [(7, 10)]).unwrap()),
            ],
        )
        .unwrap();
        assert!(estimate_tpn(&noiseless).unwrap().rates().iter().all(|r| *r == (0.0, 0.0)));
    }

    #[test]
    fn single_shot_columns_are_valid() {
        let m = example::response_matrix();
        let c = run_calibration(&m, CalibrationProtocol::Full, 16, &mut seeded(8)).unwrap();
        let full = estimate_full(&c).unwrap();
        for col in full.columns() {
            assert_eq!(col.iter().filter(|&&x| x == 1.0).count(), 1);
        }
    }

    #[test]
    fn bfa_tpn_within_binomial_ci() {
        let truth = TpnModel::symmetric(vec![0.02, 0.05, 0.08]).unwrap();
        let m = truth.to_matrix().unwrap();
        let c = run_calibration(&m, CalibrationProtocol::Bfa, 1_000_000, &mut seeded(12)).unwrap();
        let est = estimate_bfa_tpn(&c).unwrap();
        for (e, t) in est.rates().iter().zip(truth.rates()) {
            let sd = (t.0 * (1.0 - t.0) / 1e6).sqrt();
            assert!((e.0 - t.0).abs() <= 3.0 * sd, "{} vs {}", e.0, t.0);
        }
    }

    #[test]
    fn missing_tables_and_wrong_protocols() {
        let c = CalibrationSet::new(
            2,
            ProtocolTag::Plain,
            vec![(0, CountsTable::from_pairs(2, [(0, 5)]).unwrap())],
        )
        .unwrap();
        assert!(matches!(estimate_full(&c), Err(Error::MissingInput(s)) if s == "01"));
        assert!(matches!(estimate_tpn(&c), Err(Error::MissingInput(s)) if s == "11"));
        assert!(estimate_bfa(&c).is_err());
        assert!(CalibrationSet::new(
            2,
            ProtocolTag::Bfa,
            vec![(1, CountsTable::from_pairs(2, [(0, 5)]).unwrap())]
        )
        .is_err());
    }

    #[test]
    fn full_estimate_is_worse_than_bfa_at_small_budget() {
        // Five-qubit asymmetric TPN truth; budget 100 x 2^5 for both protocols.
        let truth = TpnModel::new(vec![(0.02, 0.06), (0.01, 0.08), (0.03, 0.05), (0.02, 0.1), (0.04, 0.07)]).unwrap();
        let m = truth.to_matrix().unwrap();
        let target = symmetrise(&m);
        let (mut f_full, mut f_bfa) = (0.0, 0.0);
        for trial in 0..5 {
            let mut rng = seeded(100 + trial);
            let full = estimate_full(&run_calibration(&m, CalibrationProtocol::Full, 3200, &mut rng).unwrap()).unwrap();
            let bfa = estimate_bfa(&run_calibration(&m, CalibrationProtocol::Bfa, 3200, &mut rng).unwrap()).unwrap();
            f_full += model_fidelity(&Model::Dense(full), &Model::Dense(m.clone())).unwrap();
            f_bfa += model_fidelity(&bfa.into(), &target.clone().into()).unwrap();
        }
        assert!(f_bfa / 5.0 > f_full / 5.0 + 0.01, "{} vs {}", f_bfa / 5.0, f_full / 5.0);
    }
}
