//! End-to-end use of the public API: simulate, calibrate, estimate, mitigate.

use bfa_core::calibration::{estimate_bfa, estimate_full, estimate_tpn, run_calibration, CalibrationProtocol};
use bfa_core::io;
use bfa_core::metrics::{matrix_fidelity, tv_distance_halved};
use bfa_core::mitigation::{mitigate_inverse, mitigate_lsq, LsqOptions};
use bfa_core::model::{boost_correlations, densify, symmetrise, Model};
use bfa_core::sim::{ghz_distribution, noisy_counts, seeded, Channel, Cumulative};
use bfa_core::{example, SyndromeDistribution, TpnModel};
use proptest::prelude::*;

fn noisy_model() -> bfa_core::ResponseMatrix {
    let tpn = TpnModel::new(vec![(0.02, 0.06), (0.03, 0.08), (0.01, 0.05)]).unwrap();
    boost_correlations(&tpn.to_matrix().unwrap(), 5.0).unwrap()
}

#[test]
fn bfa_mitigation_recovers_ghz_populations() {
    let m = noisy_model();
    let mut rng = seeded(42);
    let cal = run_calibration(&m, CalibrationProtocol::Bfa, 200_000, &mut rng).unwrap();
    let fitted: Model = estimate_bfa(&cal).unwrap().into();

    let ideal = ghz_distribution(3).unwrap();
    let counts = noisy_counts(&Cumulative::new(&ideal), &Channel::new(&m), 200_000, true, &mut rng);
    let p_obs = counts.frequencies().unwrap();

    let raw = tv_distance_halved(&p_obs, &ideal).unwrap();
    let fixed = mitigate_inverse(&p_obs, &fitted).unwrap();
    let after = tv_distance_halved(&fixed.physical, &ideal).unwrap();
    assert!(after < raw / 5.0, "raw {raw}, mitigated {after}");
}

#[test]
fn full_estimate_beats_tpn_on_correlated_noise() {
    let m = noisy_model();
    let mut rng = seeded(7);
    let full = run_calibration(&m, CalibrationProtocol::Full, 400_000, &mut rng).unwrap();
    let tpn = run_calibration(&m, CalibrationProtocol::Tpn, 400_000, &mut rng).unwrap();
    let f_full = matrix_fidelity(&estimate_full(&full).unwrap(), &m).unwrap();
    let f_tpn = matrix_fidelity(&estimate_tpn(&tpn).unwrap().to_matrix().unwrap(), &m).unwrap();
    assert!(f_full > f_tpn, "full {f_full}, tpn {f_tpn}");
}

#[test]
fn lsq_and_inverse_agree_when_inverse_is_physical() {
    let model: Model = symmetrise(&example::response_matrix()).into();
    let p_obs = example::dense_vector(4, &example::GHZ_NOISY_EXPECTED);
    let inv = mitigate_inverse(&p_obs, &model).unwrap();
    let lsq = mitigate_lsq(&p_obs, &model, LsqOptions::default()).unwrap().check_converged().unwrap();
    for (a, b) in inv.physical.iter().zip(&lsq.physical) {
        assert!((a - b).abs() < 1e-6);
    }
}

fn syndrome(n: usize) -> impl Strategy<Value = SyndromeDistribution> {
    prop::collection::vec(0.0f64..1.0, 1 << n).prop_map(move |mut w| {
        w[0] += (1 << n) as f64;
        let total: f64 = w.iter().sum();
        SyndromeDistribution::new(n, w.into_iter().map(|x| x / total).collect()).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn model_json_round_trips_bit_exactly(d in (1usize..=4).prop_flat_map(syndrome)) {
        let dense: Model = d.to_matrix().unwrap().into();
        let sparse: Model = d.into();
        for model in [dense, sparse] {
            let back = io::model_from_json(&io::model_to_json(&model)).unwrap();
            prop_assert_eq!(back, model);
        }
    }

    #[test]
    fn symmetrising_a_syndrome_matrix_is_a_no_op(d in (1usize..=4).prop_flat_map(syndrome)) {
        let again = symmetrise(&densify(&d.clone().into()).unwrap());
        for (a, b) in again.probabilities().iter().zip(d.probabilities()) {
            prop_assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn inverse_undoes_a_dominant_channel(d in (1usize..=4).prop_flat_map(syndrome), seed in any::<u64>()) {
        let n = d.n();
        let mut rng = seeded(seed);
        let truth: Vec<f64> = {
            use rand::Rng;
            let w: Vec<f64> = (0..1 << n).map(|_| rng.random::<f64>() + 0.01).collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|x| x / s).collect()
        };
        let m = d.to_matrix().unwrap();
        let p_obs = m.apply(&truth).unwrap();
        let r = mitigate_inverse(&p_obs, &d.into()).unwrap();
        for (a, b) in r.quasi.iter().zip(&truth) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}
