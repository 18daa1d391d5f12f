//! Reference data for the worked four-qubit example: a response matrix in
//! which qubits 1 and 2 always fail together, its bit-flip-averaged form,
//! a 10 000-shot calibration run, and a noisy GHZ readout.
//!
//! Syndrome and outcome indices use qubit 0 as the least significant bit, so
//! index `0b0110` is the string `"0110"` (qubits 1 and 2 flipped).

use crate::counts::CountsTable;
use crate::model::{build_tensor, GroupedModel, ResponseMatrix, SyndromeDistribution};

/// The three tensor factors, highest qubits first: qubit 3, qubits 2 and 1, qubit 0.
pub fn factors() -> [ResponseMatrix; 3] {
    let q3 = ResponseMatrix::from_rows(1, &[vec![0.98, 0.08], vec![0.02, 0.92]]);
    let q21 = ResponseMatrix::from_rows(
        2,
        &[
            vec![0.96, 0.0, 0.0, 0.16],
            vec![0.0, 0.94, 0.1, 0.0],
            vec![0.0, 0.06, 0.9, 0.0],
            vec![0.04, 0.0, 0.0, 0.84],
        ],
    );
    let q0 = ResponseMatrix::from_rows(1, &[vec![0.97, 0.11], vec![0.03, 0.89]]);
    [q3.unwrap(), q21.unwrap(), q0.unwrap()]
}

/// The full 16 x 16 response matrix.
pub fn response_matrix() -> ResponseMatrix {
    build_tensor(&factors()).expect("reference factors are valid")
}

/// Nonzero syndrome probabilities of the averaged matrix, rounded to 4 d.p..
pub const SYNDROME_PROBABILITIES: [(usize, f64); 8] = [
    (0b0000, 0.8040),
    (0b0001, 0.0605),
    (0b0110, 0.0795),
    (0b0111, 0.0060),
    (0b1000, 0.0423),
    (0b1001, 0.0032),
    (0b1110, 0.0042),
    (0b1111, 0.0003),
];

/// Observed outcome counts from the 10 000-shot bit-flip-averaged calibration
/// of input `0000`. They sum to 10 000 and reproduce the marginals below.
pub const CALIBRATION_COUNTS: [(usize, u64); 8] = [
    (0b0000, 8091),
    (0b0001, 595),
    (0b0110, 748),
    (0b0111, 61),
    (0b1000, 433),
    (0b1001, 22),
    (0b1110, 46),
    (0b1111, 4),
];

pub const CALIBRATION_SHOTS: u64 = 10_000;

pub fn calibration_counts() -> CountsTable {
    CountsTable::from_pairs(4, CALIBRATION_COUNTS.iter().copied()).expect("reference counts are valid")
}

/// Marginal calibration counts: qubit 0, qubits {1, 2}, qubit 3 (each indexed locally).
pub const MARGINAL_QUBIT0: [u64; 2] = [9318, 682];
pub const MARGINAL_QUBITS21: [u64; 4] = [9141, 0, 0, 859];
pub const MARGINAL_QUBIT3: [u64; 2] = [9495, 505];

/// The averaged model's exact grouped form, `(0.95, 0.05) ⊗ (0.91, 0, 0, 0.09) ⊗ (0.93, 0.07)`.
pub fn grouped_true_model() -> GroupedModel {
    GroupedModel::new(
        4,
        vec![
            (vec![3], SyndromeDistribution::new(1, vec![0.95, 0.05]).unwrap()),
            (vec![1, 2], SyndromeDistribution::new(2, vec![0.91, 0.0, 0.0, 0.09]).unwrap()),
            (vec![0], SyndromeDistribution::new(1, vec![0.93, 0.07]).unwrap()),
        ],
    )
    .expect("reference partition is valid")
}

/// The partition used for the grouped estimate: {3}, {2, 1}, {0}.
pub fn partition() -> Vec<Vec<usize>> {
    vec![vec![3], vec![2, 1], vec![0]]
}

/// Expected noisy GHZ probabilities under bit-flip averaging (the eight
/// reachable outcomes; all others are zero).
pub const GHZ_NOISY_EXPECTED: [(usize, f64); 8] = [
    (0b0000, 0.40215),
    (0b0001, 0.03235),
    (0b0110, 0.04135),
    (0b0111, 0.02415),
    (0b1000, 0.02415),
    (0b1001, 0.04135),
    (0b1110, 0.03235),
    (0b1111, 0.40215),
];

/// Observed GHZ probabilities from 10 000 shots.
pub const GHZ_NOISY_OBSERVED: [(usize, f64); 8] = [
    (0b0000, 0.4048),
    (0b0001, 0.0330),
    (0b0110, 0.0407),
    (0b0111, 0.0243),
    (0b1000, 0.0235),
    (0b1001, 0.0414),
    (0b1110, 0.0316),
    (0b1111, 0.4007),
];

/// The eight outcomes reachable from the GHZ state under the reference errors.
pub const GHZ_SUPPORT: [usize; 8] = [
    0b0000, 0b0001, 0b0110, 0b0111, 0b1000, 0b1001, 0b1110, 0b1111,
];

/// Expand `(index, value)` pairs into a dense vector of length `2^n`.
pub fn dense_vector(n: usize, pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; 1 << n];
    for &(i, p) in pairs {
        v[i] = p;
    }
    v
}
