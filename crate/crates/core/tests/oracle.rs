//! Cross-checks of the photon-statistics pipeline against the brute-force
//! reference computations in `satnet-testkit`.

use approx::{assert_abs_diff_eq, assert_relative_eq};
use proptest::prelude::*;

use satnet::coincidence::{self, CoincidenceProbs, RateContext};
use satnet::detect::{self, DetectorKind, DetectorSpec};
use satnet::keyrate::{self, LinkScenario, MultiplexMode, OptimizerSettings};
use satnet::source::{self, SpdcSource, SqueezeParam};
use satnet::TruncatedSpace;
use satnet_testkit as oracle;

const WINDOW: f64 = 1e-9;

fn detector(eta: f64, nu: f64, kind: DetectorKind) -> DetectorSpec<f64> {
    DetectorSpec { efficiency: eta, dark_rate: nu / WINDOW, dead_time: 0.0, jitter: 0.0, kind, coincidence_window: WINDOW }
}

fn source(chi: f64, dim: usize) -> SpdcSource<f64> {
    SpdcSource::new(SqueezeParam::with_default_bound(chi).unwrap(), dim).unwrap()
}

fn as_array(p: &CoincidenceProbs<f64>) -> [f64; 4] {
    [p.hh, p.hv, p.vh, p.vv]
}

#[test]
fn configuration_tensor_matches_enumeration() {
    let dim = 3;
    let space = TruncatedSpace::single_mode(dim).unwrap();
    for chi in [0.05, 0.1, 0.2] {
        let src = source(chi, dim);
        let state = src.four_mode_state().unwrap();
        for eta in [0.1, 0.5, 1.0] {
            for nu in [0.0, 1e-6] {
                let spec = detector(eta, nu, DetectorKind::Bucket);
                let povm = detect::bucket_povm(&spec, space).unwrap();
                let dense = coincidence::raw_config_probs(&state, &povm, &povm).unwrap();
                let fast = coincidence::source_config_probs(&src, &povm, &povm).unwrap();
                let arm = oracle::ArmDetector { eta, nu, pnr: false };
                let reference = oracle::config_tensor(chi, dim, arm, arm);
                for k in 0..16 {
                    let (w, x, y, z) = (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
                    let r = reference[w][x][y][z];
                    assert_abs_diff_eq!(dense.get(w, x, y, z), r, epsilon = 1e-9);
                    assert_abs_diff_eq!(fast.get(w, x, y, z), r, epsilon = 1e-9);
                }
                let squashed = as_array(&coincidence::squash(&dense));
                let expected = oracle::squash(&reference);
                for i in 0..4 {
                    assert_abs_diff_eq!(squashed[i], expected[i], epsilon = 1e-9);
                }
                let q = coincidence::qber(&coincidence::squash(&dense)).unwrap();
                assert_abs_diff_eq!(q, oracle::qber(&expected), epsilon = 1e-9);
            }
        }
    }
}

#[test]
fn pnr_click_statistics_match_enumeration() {
    let dim = 4;
    let space = TruncatedSpace::single_mode(dim).unwrap();
    let src = source(0.2, dim);
    let a = detect::pnr_povm(&detector(0.6, 1e-4, DetectorKind::Pnr), space, dim - 1).unwrap();
    let b = detect::bucket_povm(&detector(0.3, 1e-6, DetectorKind::Bucket), space).unwrap();
    let t = coincidence::source_config_probs(&src, &a, &b).unwrap();
    let reference = oracle::config_tensor(
        0.2,
        dim,
        oracle::ArmDetector { eta: 0.6, nu: 1e-4, pnr: true },
        oracle::ArmDetector { eta: 0.3, nu: 1e-6, pnr: false },
    );
    for k in 0..16 {
        let (w, x, y, z) = (k >> 3 & 1, k >> 2 & 1, k >> 1 & 1, k & 1);
        assert_abs_diff_eq!(t.get(w, x, y, z), reference[w][x][y][z], epsilon = 1e-9);
    }
}

#[test]
fn squashing_agrees_with_simulation() {
    let dim = 3;
    let space = TruncatedSpace::single_mode(dim).unwrap();
    let povm = detect::bucket_povm(&detector(1.0, 0.0, DetectorKind::Bucket), space).unwrap();
    let t = coincidence::source_config_probs(&source(0.1, dim), &povm, &povm).unwrap();
    let squashed = as_array(&coincidence::squash(&t));
    let samples = 10_000_000;
    let simulated = oracle::squash_monte_carlo(&t.0, samples, 7);
    for i in 0..4 {
        let p = squashed[i];
        let sigma = (p * (1.0 - p) / samples as f64).sqrt().max(1.0 / samples as f64);
        assert!((simulated[i] - p).abs() <= 3.0 * sigma, "outcome {i}: {} vs {p} (sigma {sigma})", simulated[i]);
    }
}

#[test]
fn satellite_link_qber_matches_enumeration() {
    // chi = 0.1, eta = 0.5 on both detectors, default dark counts, 40 dB uplink
    let dim = 3;
    let space = TruncatedSpace::single_mode(dim).unwrap();
    let ground = DetectorSpec::ground_snspd().with_efficiency(0.5);
    let sat = detect::fold_loss(&DetectorSpec::satellite_apd().with_efficiency(0.5), 1e-4).unwrap();
    let pa = detect::bucket_povm(&ground, space).unwrap();
    let pb = detect::bucket_povm(&sat, space).unwrap();
    let probs = coincidence::squash(&coincidence::source_config_probs(&source(0.1, dim), &pa, &pb).unwrap());
    let reference = oracle::squash(&oracle::config_tensor(
        0.1,
        dim,
        oracle::ArmDetector { eta: 0.5, nu: 1e-7, pnr: false },
        oracle::ArmDetector { eta: 0.5e-4, nu: 1e-6, pnr: false },
    ));
    assert_abs_diff_eq!(coincidence::qber(&probs).unwrap(), oracle::qber(&reference), epsilon = 1e-9);
}

/// Key rate of one channel rebuilt from the testkit pieces: enumeration,
/// squashing, per-term dead time on both detectors and the key formula.
fn oracle_skr(chi: f64, ground_loss_db: f64) -> f64 {
    let dim = source::required_dim(chi, source::DEFAULT_DIM).unwrap();
    let eta_a = 10f64.powf(-ground_loss_db / 10.0);
    let t = oracle::config_tensor(
        chi,
        dim,
        oracle::ArmDetector { eta: eta_a, nu: 100.0 * WINDOW, pnr: false },
        oracle::ArmDetector { eta: 1e-4, nu: 1000.0 * WINDOW, pnr: false },
    );
    let rep = 80e6;
    let saturated = oracle::squash(&t).map(|x| x / (1.0 + x * rep * 1e-6) / (1.0 + x * rep * 10e-9));
    let total: f64 = saturated.iter().sum();
    let q = oracle::qber(&saturated);
    let key = 0.5 * total * (1.0 - (1.0 + 1.17 + q) * oracle::entropy(q));
    key.max(0.0) * rep
}

#[test]
fn end_to_end_key_rate_matches_oracle_pipeline() {
    let scenario = LinkScenario::<f64>::default();
    let settings = OptimizerSettings::default();
    let best = keyrate::optimize_multiplexed(&scenario, 1, MultiplexMode::TimeFrequency, &settings).unwrap();
    let chi = best.aggregate.chi_opt.unwrap();
    assert_relative_eq!(best.aggregate.skr, oracle_skr(chi, 0.0), max_relative = 1e-9);

    let (_, grid_best) = oracle::grid_max(|c| oracle_skr(c, 0.0), 0.05, 0.6, 56);
    assert!(best.aggregate.skr >= grid_best * (1.0 - 1e-9), "{} < {grid_best}", best.aggregate.skr);

    // frozen regression values of the default satellite link
    assert_relative_eq!(best.aggregate.skr, 272.087_050, max_relative = 1e-6);
    assert_abs_diff_eq!(chi, 0.299_55, epsilon = 1e-3);
    assert_abs_diff_eq!(best.aggregate.qber, 0.050_232, epsilon = 1e-5);
}

#[test]
fn key_rate_vanishes_at_the_qber_threshold() {
    let threshold = oracle::qber_threshold(1.17);
    assert_abs_diff_eq!(threshold, 0.092, epsilon = 0.002);
    let below = keyrate::key_fraction(1.0, threshold - 1e-6, 1.17).unwrap();
    let above = keyrate::key_fraction(1.0, threshold + 1e-6, 1.17).unwrap();
    assert!(below > 0.0);
    assert_eq!(above, 0.0);
}

#[test]
fn dead_time_matches_count_rate_formula() {
    let ctx = RateContext::<f64>::default();
    for ideal in [1e3, 1e5, 1e6, 1e7] {
        let corrected = coincidence::dead_time_correct(ideal / ctx.rep_rate, &ctx, 1e-6) * ctx.rep_rate;
        assert_relative_eq!(corrected, ideal / (1.0 + ideal * 1e-6), max_relative = 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn povm_weights_match_reference(eta in 0.0f64..=1.0, nu in 0.0f64..1e-3, dim in 2usize..6) {
        let space = TruncatedSpace::single_mode(dim).unwrap();
        let bucket = detect::bucket_povm(&detector(eta, nu, DetectorKind::Bucket), space).unwrap();
        let pnr = detect::pnr_povm(&detector(eta, nu, DetectorKind::Pnr), space, dim - 1).unwrap();
        let (click, _) = bucket.click_pair();
        for m in 0..dim {
            prop_assert!((click.get(m, m).re - (1.0 - oracle::bucket_silent(m, eta, nu, dim))).abs() < 1e-12);
            for n in 0..dim {
                prop_assert!((pnr.elements()[n].get(m, m).re - oracle::pnr_reports(n, m, eta, nu, dim)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn squashed_total_counts_two_sided_clicks(chi in 0.0f64..0.25, eta in 0.0f64..=1.0, nu in 0.0f64..1e-3) {
        let dim = 3;
        let space = TruncatedSpace::single_mode(dim).unwrap();
        let povm = detect::bucket_povm(&detector(eta, nu, DetectorKind::Bucket), space).unwrap();
        let t = coincidence::source_config_probs(&source(chi, dim), &povm, &povm).unwrap();
        prop_assert!((coincidence::squash(&t).total() - t.both_sides_click()).abs() < 1e-12);
        prop_assert!((t.sum() - 1.0).abs() < 1e-9);
    }
}
