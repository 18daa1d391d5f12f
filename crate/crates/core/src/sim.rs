//! Shot-level simulation of classical readout noise.
//!
//! Noiseless outcomes are drawn from an ideal distribution and then passed
//! through a response matrix column by column. Under bit-flip averaging each
//! shot is XOR-ed with a uniformly random string before the noisy readout and
//! XOR-ed back afterwards.
//!
//! All randomness comes from ChaCha8 streams keyed by 64-bit seeds, so a seed
//! reproduces the same shots on every platform.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;

use crate::bitstring::{check_width, BitString};
use crate::counts::CountsTable;
use crate::error::{Error, Result};
use crate::model::{ResponseMatrix, PROB_TOL};

/// The generator used for every simulated shot.
pub type ShotRng = ChaCha8Rng;

/// Seed used when a caller does not supply one.
pub const DEFAULT_SEED: u64 = 0xB17F_11B5;

/// Shots per independently seeded block in [`sample_counts_sharded`].
pub const SHARD_BLOCK: u64 = 1 << 14;

pub fn seeded(seed: u64) -> ShotRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Child seed for stream `index` of `base` (SplitMix64 finaliser over both words).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse-CDF sampler over a fixed probability vector.
#[derive(Debug, Clone)]
pub struct Cumulative {
    cdf: Vec<f64>,
    last: usize,
}

impl Cumulative {
    pub fn new(p: &[f64]) -> Self {
        let mut acc = 0.0;
        let cdf = p
            .iter()
            .map(|&x| {
                acc += x;
                acc
            })
            .collect();
        let last = p.iter().rposition(|&x| x > 0.0).unwrap_or(0);
        Self { cdf, last }
    }

    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf.partition_point(|&c| c <= u).min(self.last)
    }
}

/// Check that `dist` is a probability vector over `2^n` outcomes; returns `n`.
pub fn check_distribution(dist: &[f64]) -> Result<usize> {
    if !dist.len().is_power_of_two() || dist.len() < 2 {
        return Err(Error::NotPowerOfTwo(dist.len()));
    }
    for (i, &v) in dist.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::InvalidProbability { location: format!("outcome {i}"), value: v });
        }
    }
    let sum: f64 = dist.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Error::NotNormalised { location: "distribution".into(), sum });
    }
    Ok(dist.len().trailing_zeros() as usize)
}

/// Precomputed per-column samplers for one response matrix.
#[derive(Debug, Clone)]
pub struct Channel {
    n: usize,
    columns: Vec<Cumulative>,
}

impl Channel {
    pub fn new(m: &ResponseMatrix) -> Self {
        Self {
            n: m.n(),
            columns: m.columns().map(Cumulative::new).collect(),
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Observed outcome for a shot whose true outcome is `truth`.
    #[inline]
    pub fn corrupt<R: Rng + ?Sized>(&self, truth: usize, rng: &mut R) -> usize {
        self.columns[truth].sample(rng)
    }

    /// Flip by a uniform random string, read out noisily, flip back.
    #[inline]
    pub fn bfa_shot<R: Rng + ?Sized>(&self, truth: usize, rng: &mut R) -> usize {
        let flips = rng.random_range(0..1u32 << self.n) as usize;
        self.corrupt(truth ^ flips, rng) ^ flips
    }
}

/// One noisy readout of `truth` through `m`.
pub fn corrupt_readout<R: Rng + ?Sized>(truth: BitString, m: &ResponseMatrix, rng: &mut R) -> Result<BitString> {
    if truth.width() != m.n() {
        return Err(Error::WidthMismatch { left: truth.width(), right: m.n() });
    }
    let col = Cumulative::new(m.column(truth.index()));
    BitString::new(col.sample(rng) as u32, m.n())
}

/// One bit-flip-averaged noisy readout of `truth` through `m`.
pub fn bfa_shot<R: Rng + ?Sized>(truth: BitString, m: &ResponseMatrix, rng: &mut R) -> Result<BitString> {
    let flips = BitString::new(rng.random_range(0..1u32 << m.n()), m.n())?;
    let seen = corrupt_readout(truth.xor(flips)?, m, rng)?;
    seen.xor(flips)
}

/// Measurement basis of one qubit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    Z,
    X,
}

/// Per-qubit measurement bases; index `i` is qubit `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MeasurementSetting {
    pub bases: Vec<Basis>,
}

impl MeasurementSetting {
    /// X on even qubits, Z on odd ones.
    pub fn even_x(n: usize) -> Self {
        Self {
            bases: (0..n).map(|i| if i % 2 == 0 { Basis::X } else { Basis::Z }).collect(),
        }
    }

    /// X on odd qubits, Z on even ones.
    pub fn odd_x(n: usize) -> Self {
        Self {
            bases: (0..n).map(|i| if i % 2 == 1 { Basis::X } else { Basis::Z }).collect(),
        }
    }

    /// The setting in which generator `i` (X on qubit `i`) is measured.
    pub fn for_generator(n: usize, i: usize) -> Self {
        if i % 2 == 0 {
            Self::even_x(n)
        } else {
            Self::odd_x(n)
        }
    }

    pub fn n(&self) -> usize {
        self.bases.len()
    }
}

/// Largest register simulated with a dense statevector.
pub const STATEVECTOR_MAX: usize = 16;

fn apply_hadamard(amps: &mut [f64], qubit: usize) {
    let stride = 1usize << qubit;
    let r = std::f64::consts::FRAC_1_SQRT_2;
    for block in amps.chunks_mut(2 * stride) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = (x + y) * r;
            *b = (x - y) * r;
        }
    }
}

fn apply_cz(amps: &mut [f64], q1: usize, q2: usize) {
    let mask = (1usize << q1) | (1usize << q2);
    for (i, a) in amps.iter_mut().enumerate() {
        if i & mask == mask {
            *a = -*a;
        }
    }
}

/// Outcome distribution of the linear graph state measured in `setting`.
///
/// Built as `|0…0⟩ → H^{⊗n} → CZ(i, i+1) → H on X-measured qubits`; all the
/// gates involved are real, so amplitudes are kept as `f64`.
pub fn graph_state_distribution(n: usize, setting: &MeasurementSetting) -> Result<Vec<f64>> {
    if !(1..=STATEVECTOR_MAX).contains(&n) {
        return Err(Error::WidthOutOfRange { width: n, max: STATEVECTOR_MAX });
    }
    if setting.n() != n {
        return Err(Error::WidthMismatch { left: setting.n(), right: n });
    }
    let mut amps = vec![0.0; 1 << n];
    amps[0] = 1.0;
    for q in 0..n {
        apply_hadamard(&mut amps, q);
    }
    for q in 0..n - 1 {
        apply_cz(&mut amps, q, q + 1);
    }
    for (q, b) in setting.bases.iter().enumerate() {
        if *b == Basis::X {
            apply_hadamard(&mut amps, q);
        }
    }
    let mut p: Vec<f64> = amps.iter().map(|a| a * a).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    Ok(p)
}

/// `(|0…0⟩ + |1…1⟩)/√2` measured in Z.
pub fn ghz_distribution(n: usize) -> Result<Vec<f64>> {
    check_width(n)?;
    let mut p = vec![0.0; 1 << n];
    p[0] = 0.5;
    p[(1 << n) - 1] += 0.5;
    Ok(p)
}

/// Multinomial draw of `shots` outcomes from `dist`, by successive binomials.
pub fn sample_counts<R: Rng + ?Sized>(dist: &[f64], shots: u64, rng: &mut R) -> Result<CountsTable> {
    let n = check_distribution(dist)?;
    if shots == 0 {
        return Err(Error::InvalidParameter { name: "shots", detail: "must be at least 1".into() });
    }
    let mut table = CountsTable::empty(n)?;
    let mut remaining = shots;
    let mut mass_left = 1.0;
    for (outcome, &p) in dist.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        let k = if p <= 0.0 {
            0
        } else if p >= mass_left {
            remaining
        } else {
            let q = (p / mass_left).clamp(0.0, 1.0);
            Binomial::new(remaining, q).expect("q in [0, 1]").sample(rng)
        };
        table.add(outcome, k)?;
        remaining -= k;
        mass_left -= p;
    }
    // Rounding can leave a few shots unassigned; they belong to the last live outcome.
    if remaining > 0 {
        let last = dist.iter().rposition(|&p| p > 0.0).unwrap_or(0);
        table.add(last, remaining)?;
    }
    Ok(table)
}

/// [`sample_counts`] split into fixed blocks of [`SHARD_BLOCK`] shots, each
/// seeded by `derive_seed(seed, block)`. The merged table depends only on
/// `(dist, shots, seed)`, never on `workers`.
pub fn sample_counts_sharded(dist: &[f64], shots: u64, seed: u64, workers: usize) -> Result<CountsTable> {
    let n = check_distribution(dist)?;
    let blocks = shots.div_ceil(SHARD_BLOCK);
    let run = || {
        (0..blocks)
            .into_par_iter()
            .map(|b| {
                let len = SHARD_BLOCK.min(shots - b * SHARD_BLOCK);
                sample_counts(dist, len, &mut seeded(derive_seed(seed, b)))
            })
            .collect::<Result<Vec<_>>>()
    };
    let parts = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter { name: "workers", detail: e.to_string() })?
        .install(run)?;
    let mut total = CountsTable::empty(n)?;
    for p in &parts {
        total.merge(p)?;
    }
    Ok(total)
}

/// Reproducible stream of noisy shots of an ideal distribution.
pub struct ShotStream {
    seed: u64,
    rng: ShotRng,
    ideal: Cumulative,
    channel: Channel,
    bit_flip_averaging: bool,
    draws: u64,
}

impl ShotStream {
    pub fn new(seed: u64, ideal: &[f64], m: &ResponseMatrix, bit_flip_averaging: bool) -> Result<Self> {
        let n = check_distribution(ideal)?;
        if n != m.n() {
            return Err(Error::WidthMismatch { left: n, right: m.n() });
        }
        Ok(Self {
            seed,
            rng: seeded(seed),
            ideal: Cumulative::new(ideal),
            channel: Channel::new(m),
            bit_flip_averaging,
            draws: 0,
        })
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Shots drawn so far.
    pub fn draws(&self) -> u64 {
        self.draws
    }

    pub fn next_shot(&mut self) -> usize {
        self.draws += 1;
        let truth = self.ideal.sample(&mut self.rng);
        if self.bit_flip_averaging {
            self.channel.bfa_shot(truth, &mut self.rng)
        } else {
            self.channel.corrupt(truth, &mut self.rng)
        }
    }

    pub fn take_counts(&mut self, shots: u64) -> CountsTable {
        let mut t = CountsTable::empty(self.channel.n()).expect("width checked on construction");
        for _ in 0..shots {
            t.record(self.next_shot());
        }
        t
    }
}

/// Noisy counts of `shots` ideal draws passed through `channel`.
pub fn noisy_counts<R: Rng + ?Sized>(
    ideal: &Cumulative,
    channel: &Channel,
    shots: u64,
    bit_flip_averaging: bool,
    rng: &mut R,
) -> CountsTable {
    let mut t = CountsTable::empty(channel.n()).expect("channel width is valid");
    for _ in 0..shots {
        let truth = ideal.sample(rng);
        let seen = if bit_flip_averaging {
            channel.bfa_shot(truth, rng)
        } else {
            channel.corrupt(truth, rng)
        };
        t.record(seen);
    }
    t
}

/// Shots of a single fixed input through `channel`.
pub fn input_counts<R: RngCore + ?Sized>(
    input: usize,
    channel: &Channel,
    shots: u64,
    bit_flip_averaging: bool,
    rng: &mut R,
) -> CountsTable {
    let mut t = CountsTable::empty(channel.n()).expect("channel width is valid");
    for _ in 0..shots {
        let seen = if bit_flip_averaging {
            channel.bfa_shot(input, rng)
        } else {
            channel.corrupt(input, rng)
        };
        t.record(seen);
    }
    t
}
