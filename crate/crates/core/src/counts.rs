use std::collections::BTreeMap;

use crate::bitstring::{check_width, format_bits};
use crate::error::{Error, Result};

/// Shot counts per outcome index. Absent outcomes have zero counts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountsTable {
    n: usize,
    shots: u64,
    counts: BTreeMap<usize, u64>,
}

impl CountsTable {
    pub fn empty(n: usize) -> Result<Self> {
        check_width(n)?;
        Ok(Self { n, shots: 0, counts: BTreeMap::new() })
    }

    pub fn from_pairs(n: usize, pairs: impl IntoIterator<Item = (usize, u64)>) -> Result<Self> {
        let mut t = Self::empty(n)?;
        for (outcome, k) in pairs {
            t.add(outcome, k)?;
        }
        Ok(t)
    }

    /// Build from a dense count vector of length `2^n`.
    pub fn from_dense(n: usize, counts: &[u64]) -> Result<Self> {
        if counts.len() != 1 << n {
            return Err(Error::LengthMismatch { left: counts.len(), right: 1 << n });
        }
        Self::from_pairs(n, counts.iter().copied().enumerate())
    }

    /// Like [`from_pairs`](Self::from_pairs) but with a declared total that
    /// must equal the sum of counts.
    pub fn with_total(n: usize, shots: u64, pairs: impl IntoIterator<Item = (usize, u64)>) -> Result<Self> {
        let t = Self::from_pairs(n, pairs)?;
        if t.shots != shots {
            return Err(Error::Format(format!(
                "counts sum to {} but the table declares {} shots",
                t.shots, shots
            )));
        }
        Ok(t)
    }

    pub fn add(&mut self, outcome: usize, k: u64) -> Result<()> {
        if outcome >> self.n != 0 {
            return Err(Error::ValueOutOfRange { value: outcome as u64, width: self.n });
        }
        if k > 0 {
            *self.counts.entry(outcome).or_insert(0) += k;
            self.shots += k;
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn record(&mut self, outcome: usize) {
        *self.counts.entry(outcome).or_insert(0) += 1;
        self.shots += 1;
    }

    pub fn merge(&mut self, other: &CountsTable) -> Result<()> {
        if other.n != self.n {
            return Err(Error::WidthMismatch { left: self.n, right: other.n });
        }
        for (&o, &k) in &other.counts {
            self.add(o, k)?;
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn shots(&self) -> u64 {
        self.shots
    }

    pub fn get(&self, outcome: usize) -> u64 {
        self.counts.get(&outcome).copied().unwrap_or(0)
    }

    /// Nonzero entries in increasing outcome order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, u64)> + '_ {
        self.counts.iter().map(|(&o, &k)| (o, k))
    }

    /// Empirical distribution over all `2^n` outcomes.
    pub fn frequencies(&self) -> Result<Vec<f64>> {
        if self.shots == 0 {
            return Err(Error::InvalidParameter {
                name: "counts",
                detail: "table has no shots".into(),
            });
        }
        let mut f = vec![0.0; 1 << self.n];
        let total = self.shots as f64;
        for (&o, &k) in &self.counts {
            f[o] = k as f64 / total;
        }
        Ok(f)
    }

    /// Counts summed over every qubit outside `qubits`; local bit `j` is `qubits[j]`.
    pub fn marginal(&self, qubits: &[usize]) -> Result<Vec<u64>> {
        if let Some(&q) = qubits.iter().find(|&&q| q >= self.n) {
            return Err(Error::InvalidPartition(format!("qubit {q} out of range for n = {}", self.n)));
        }
        let mut out = vec![0u64; 1 << qubits.len()];
        for (&o, &k) in &self.counts {
            let local = qubits
                .iter()
                .enumerate()
                .fold(0, |acc, (j, &q)| acc | (((o >> q) & 1) << j));
            out[local] += k;
        }
        Ok(out)
    }

    pub fn label(&self, outcome: usize) -> String {
        format_bits(outcome, self.n)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn totals_and_marginals() {
        let t = crate::example::calibration_counts();
        assert_eq!(t.shots(), 10_000);
        assert_eq!(t.marginal(&[0]).unwrap(), vec![9318, 682]);
        assert_eq!(t.marginal(&[1, 2]).unwrap(), vec![9141, 0, 0, 859]);
        assert_eq!(t.marginal(&[3]).unwrap(), vec![9495, 505]);
        assert_eq!(t.label(0b0110), "0110");
        assert!(t.marginal(&[4]).is_err());
    }

    #[test]
    fn declared_total_must_match() {
        assert!(CountsTable::with_total(2, 10, [(0, 4), (3, 6)]).is_ok());
        assert!(CountsTable::with_total(2, 11, [(0, 4), (3, 6)]).is_err());
        assert!(CountsTable::from_pairs(2, [(4, 1)]).is_err());
    }

    #[test]
    fn merge_is_additive() {
        let mut a = CountsTable::from_pairs(2, [(0, 3), (1, 1)]).unwrap();
        let b = CountsTable::from_pairs(2, [(1, 2), (3, 5)]).unwrap();
        a.merge(&b).unwrap();
        assert_eq!(a.shots(), 11);
        assert_eq!(a.get(1), 3);
        assert_eq!(a.frequencies().unwrap()[3], 5.0 / 11.0);
        assert!(CountsTable::empty(2).unwrap().frequencies().is_err());
    }
}
