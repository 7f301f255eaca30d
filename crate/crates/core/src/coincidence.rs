//! Squashed two-fold coincidences, dead-time saturation and QBER.
//!
//! Arm A (ground) measures modes `a_H, a_V`, arm B (satellite) measures
//! `b_H, b_V`. Each mode carries a binary click/no-click POVM; double clicks
//! on one side are squashed to a uniformly random polarization.

use thiserror::Error;

use crate::detect::{Povm, CLICK, NO_CLICK};
use crate::fock::{self, FockError, Operator, StateVector};
use crate::scalar::Real;
use crate::source::SpdcSource;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CoincidenceError {
    #[error("coincidence model needs a four-mode state, got {0} modes")]
    NotFourMode(usize),
    #[error("no two-fold coincidences: QBER undefined")]
    NoTwofolds,
    #[error("invalid rate context: {0}")]
    InvalidContext(String),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Outcome probabilities indexed `[a_H][a_V][b_H][b_V]`, each index
/// [`CLICK`] or [`NO_CLICK`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigTensor<T: Real>(pub [[[[T; 2]; 2]; 2]; 2]);

impl<T: Real> ConfigTensor<T> {
    pub fn zeros() -> Self {
        Self([[[[T::zero(); 2]; 2]; 2]; 2])
    }

    #[inline]
    pub fn get(&self, ah: usize, av: usize, bh: usize, bv: usize) -> T {
        self.0[ah][av][bh][bv]
    }

    pub fn set(&mut self, ah: usize, av: usize, bh: usize, bv: usize, value: T) {
        self.0[ah][av][bh][bv] = value;
    }

    pub fn sum(&self) -> T {
        self.0.iter().flatten().flatten().flatten().copied().sum()
    }

    /// Probability that each side registers at least one click.
    pub fn both_sides_click(&self) -> T {
        let mut total = T::zero();
        for a in [(0, 0), (0, 1), (1, 0)] {
            for b in [(0, 0), (0, 1), (1, 0)] {
                total = total + self.get(a.0, a.1, b.0, b.1);
            }
        }
        total
    }

    /// `[a_H][a_V][b_H][b_V]` → `[a_V][a_H][b_V][b_H]`.
    pub fn swap_polarizations(&self) -> Self {
        let mut out = Self::zeros();
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        out.set(j, i, l, k, self.get(i, j, k, l));
                    }
                }
            }
        }
        out
    }
}

/// Per-pulse squashed coincidence probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CoincidenceProbs<T: Real> {
    pub hh: T,
    pub hv: T,
    pub vh: T,
    pub vv: T,
}

impl<T: Real> CoincidenceProbs<T> {
    pub fn zero() -> Self {
        Self { hh: T::zero(), hv: T::zero(), vh: T::zero(), vv: T::zero() }
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.hh, self.hv, self.vh, self.vv]
    }

    /// All two-folds, `HH + HV + VH + VV`.
    pub fn total(&self) -> T {
        self.hh + self.hv + self.vh + self.vv
    }

    /// Erroneous two-folds for the `a_H b_V / a_V b_H` correlated source.
    pub fn errors(&self) -> T {
        self.hh + self.vv
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self { hh: f(self.hh), hv: f(self.hv), vh: f(self.vh), vv: f(self.vv) }
    }

    pub fn zip_with(&self, other: &Self, f: impl Fn(T, T) -> T) -> Self {
        Self {
            hh: f(self.hh, other.hh),
            hv: f(self.hv, other.hv),
            vh: f(self.vh, other.vh),
            vv: f(self.vv, other.vv),
        }
    }

    pub fn scaled(&self, factor: T) -> Self {
        self.map(|x| x * factor)
    }
}

/// Pulse rate, integration time and the two dead times.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateContext<T: Real> {
    pub rep_rate: T,
    pub integration_time: T,
    pub dead_time_sat: T,
    pub dead_time_ground: T,
}

impl<T: Real> Default for RateContext<T> {
    fn default() -> Self {
        Self {
            rep_rate: T::lit(80e6),
            integration_time: T::one(),
            dead_time_sat: T::lit(1e-6),
            dead_time_ground: T::lit(10e-9),
        }
    }
}

impl<T: Real> RateContext<T> {
    pub fn validate(&self) -> Result<(), CoincidenceError> {
        for (name, v) in [("rep_rate", self.rep_rate), ("integration_time", self.integration_time)] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(CoincidenceError::InvalidContext(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("dead_time_sat", self.dead_time_sat), ("dead_time_ground", self.dead_time_ground)] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(CoincidenceError::InvalidContext(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// Joint click statistics of the four modes.
pub fn raw_config_probs<T: Real>(
    state: &StateVector<T>,
    povm_a: &Povm<T>,
    povm_b: &Povm<T>,
) -> Result<ConfigTensor<T>, CoincidenceError> {
    if state.space().n_modes() != 4 {
        return Err(CoincidenceError::NotFourMode(state.space().n_modes()));
    }
    let a = binary_elements(povm_a);
    let b = binary_elements(povm_b);
    let mut tensor = ConfigTensor::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    let e = fock::expectation_product(&[a[i], a[j], b[k], b[l]], state)?;
                    tensor.set(i, j, k, l, e.norm());
                }
            }
        }
    }
    Ok(tensor)
}

fn binary_elements<T: Real>(povm: &Povm<T>) -> [&Operator<T>; 2] {
    let (click, none) = povm.click_pair();
    let mut out = [none; 2];
    out[CLICK] = click;
    out[NO_CLICK] = none;
    out
}

/// Same statistics as [`raw_config_probs`], computed on the two independent
/// pair states of an [`SpdcSource`] instead of the four-mode product.
pub fn source_config_probs<T: Real>(
    source: &SpdcSource<T>,
    povm_a: &Povm<T>,
    povm_b: &Povm<T>,
) -> Result<ConfigTensor<T>, CoincidenceError> {
    let a = binary_elements(povm_a);
    let b = binary_elements(povm_b);
    let pair = source.pair_state();
    // pair 1 spans (a_H, b_V); pair 2 spans (b_H, a_V)
    let mut first = [[T::zero(); 2]; 2];
    let mut second = [[T::zero(); 2]; 2];
    for x in 0..2 {
        for y in 0..2 {
            first[x][y] = fock::expectation_product(&[a[x], b[y]], pair)?.norm();
            second[x][y] = fock::expectation_product(&[b[y], a[x]], pair)?.norm();
        }
    }
    let mut tensor = ConfigTensor::zeros();
    for i in 0..2 {
        for j in 0..2 {
            for k in 0..2 {
                for l in 0..2 {
                    tensor.set(i, j, k, l, first[i][l] * second[j][k]);
                }
            }
        }
    }
    Ok(tensor)
}

/// Probability that one arm-B mode clicks under `click`, marginal over
/// everything else.
pub fn arm_b_click_marginal<T: Real>(
    source: &SpdcSource<T>,
    click: &Operator<T>,
) -> Result<T, CoincidenceError> {
    let id = Operator::identity(click.space());
    Ok(fock::expectation_product(&[click, &id], source.pair_state())?.re)
}

/// Squashing: single clicks map to their polarization, a double click on one
/// side contributes half to each of its two outcomes, double clicks on both
/// sides a quarter to each of the four.
pub fn squash<T: Real>(t: &ConfigTensor<T>) -> CoincidenceProbs<T> {
    let (c, n) = (CLICK, NO_CLICK);
    let half = T::lit(0.5);
    let both_double = T::lit(0.25) * t.get(c, c, c, c);
    CoincidenceProbs {
        hh: t.get(c, n, c, n) + half * (t.get(c, c, c, n) + t.get(c, n, c, c)) + both_double,
        hv: t.get(c, n, n, c) + half * (t.get(c, c, n, c) + t.get(c, n, c, c)) + both_double,
        vh: t.get(n, c, c, n) + half * (t.get(c, c, c, n) + t.get(n, c, c, c)) + both_double,
        vv: t.get(n, c, n, c) + half * (t.get(c, c, n, c) + t.get(n, c, c, c)) + both_double,
    }
}

/// Raw click statistics followed by squashing.
pub fn measure_twofolds<T: Real>(
    state: &StateVector<T>,
    povm_a: &Povm<T>,
    povm_b: &Povm<T>,
) -> Result<CoincidenceProbs<T>, CoincidenceError> {
    Ok(squash(&raw_config_probs(state, povm_a, povm_b)?))
}

/// Dead-time saturated count rate, `R / (1 + R·T_D)`.
pub fn dead_time_correct_rate<T: Real>(rate: T, dead_time: T) -> T {
    rate / (T::one() + rate * dead_time)
}

/// Saturates a per-pulse probability: converted to counts over the
/// integration time, corrected as `N/(1 + N·T_D/T_INT)`, converted back.
pub fn dead_time_correct<T: Real>(prob: T, ctx: &RateContext<T>, dead_time: T) -> T {
    let counts = prob * ctx.rep_rate * ctx.integration_time;
    let corrected = counts / (T::one() + counts * dead_time / ctx.integration_time);
    corrected / (ctx.rep_rate * ctx.integration_time)
}

fn survival<T: Real>(prob: T, ctx: &RateContext<T>, dead_time: T) -> T {
    if prob <= T::zero() {
        T::one()
    } else {
        dead_time_correct(prob, ctx, dead_time) / prob
    }
}

/// Applies dead time to one channel's coincidences.
///
/// Each term is corrected on its own, per detector. `shared` holds the terms
/// summed over every channel landing on the satellite detector; the extra
/// saturation that load causes beyond the channel's own total is applied as
/// one factor to all four terms.
pub fn saturate<T: Real>(
    probs: &CoincidenceProbs<T>,
    shared: &CoincidenceProbs<T>,
    ctx: &RateContext<T>,
) -> CoincidenceProbs<T> {
    let t_sat = ctx.dead_time_sat;
    let load = survival(shared.total(), ctx, t_sat) / survival(probs.total(), ctx, t_sat);
    probs.map(|x| x * survival(x, ctx, t_sat) * survival(x, ctx, ctx.dead_time_ground) * load)
}

/// `(HH + VV) / (HH + HV + VH + VV)`.
pub fn qber<T: Real>(probs: &CoincidenceProbs<T>) -> Result<T, CoincidenceError> {
    let total = probs.total();
    if total <= T::zero() {
        return Err(CoincidenceError::NoTwofolds);
    }
    Ok((probs.errors() / total).min(T::one()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detect::{bucket_povm, DetectorKind, DetectorSpec};
    use crate::fock::TruncatedSpace;
    use crate::source::{build_spdc_state, SqueezeParam};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn detector(eta: f64, dark_rate: f64) -> DetectorSpec<f64> {
        DetectorSpec {
            efficiency: eta,
            dark_rate,
            dead_time: 0.0,
            jitter: 0.0,
            kind: DetectorKind::Bucket,
            coincidence_window: 1e-9,
        }
    }

    fn setup(chi: f64, dim: usize, eta_a: f64, eta_b: f64, rate: f64) -> ConfigTensor<f64> {
        let psi = build_spdc_state(SqueezeParam::with_default_bound(chi).unwrap(), TruncatedSpace::new(dim, 4).unwrap()).unwrap();
        let mode = TruncatedSpace::single_mode(dim).unwrap();
        let pa = bucket_povm(&detector(eta_a, rate), mode).unwrap();
        let pb = bucket_povm(&detector(eta_b, rate), mode).unwrap();
        raw_config_probs(&psi, &pa, &pb).unwrap()
    }

    #[test]
    fn factorized_matches_four_mode() {
        let mode = TruncatedSpace::single_mode(4).unwrap();
        let pa = bucket_povm(&detector(0.4, 5e4), mode).unwrap();
        let pb = bucket_povm(&detector(0.9, 1e3), mode).unwrap();
        for chi in [0.0, 0.07, 0.33] {
            let src = SpdcSource::new(SqueezeParam::with_default_bound(chi).unwrap(), 4).unwrap();
            let full = raw_config_probs(&src.four_mode_state().unwrap(), &pa, &pb).unwrap();
            let fast = source_config_probs(&src, &pa, &pb).unwrap();
            for (x, y) in full.0.iter().flatten().flatten().flatten().zip(fast.0.iter().flatten().flatten().flatten()) {
                assert_abs_diff_eq!(x, y, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn vacuum_never_clicks() {
        let t = setup(0.0, 3, 0.7, 0.7, 0.0);
        assert_abs_diff_eq!(t.get(NO_CLICK, NO_CLICK, NO_CLICK, NO_CLICK), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.sum(), 1.0, epsilon = 1e-15);
        assert_eq!(squash(&t), CoincidenceProbs::zero());
    }

    #[test]
    fn symmetric_detectors_give_swap_symmetric_tensor() {
        let t = setup(0.2, 4, 0.6, 0.3, 2000.0);
        let s = t.swap_polarizations();
        for (x, y) in t.0.iter().flatten().flatten().flatten().zip(s.0.iter().flatten().flatten().flatten()) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-14);
        }
        let p = squash(&t);
        assert_abs_diff_eq!(p.hv, p.vh, epsilon = 1e-12);
    }

    #[test]
    fn squash_edge_cases() {
        assert_eq!(squash(&ConfigTensor::<f64>::zeros()), CoincidenceProbs::zero());
        let mut t = ConfigTensor::zeros();
        t.set(CLICK, CLICK, CLICK, CLICK, 0.2);
        let p = squash(&t);
        for x in p.as_array() {
            assert_abs_diff_eq!(x, 0.05, epsilon = 1e-16);
        }
    }

    #[test]
    fn dead_time_examples() {
        let ctx = RateContext::<f64>::default();
        assert_eq!(dead_time_correct(0.0, &ctx, 1e-6), 0.0);
        assert_abs_diff_eq!(dead_time_correct_rate(1e6, 1e-6), 5e5, epsilon = 1e-9);
        let prob = 1e6 / ctx.rep_rate;
        assert_abs_diff_eq!(dead_time_correct(prob, &ctx, 1e-6) * ctx.rep_rate, 5e5, epsilon = 1e-6);
        let limit: f64 = dead_time_correct_rate(1e12, 1e-6);
        assert!((limit - 1e6).abs() / 1e6 < 1e-5);
    }

    #[test]
    fn saturation_with_single_channel_matches_direct_correction() {
        let ctx = RateContext::<f64>::default();
        let p = CoincidenceProbs { hh: 1e-4, hv: 3e-3, vh: 2e-3, vv: 0.0 };
        let s = saturate(&p, &p, &ctx);
        let sat = dead_time_correct(3e-3, &ctx, ctx.dead_time_sat) / 3e-3;
        let ground = dead_time_correct(3e-3, &ctx, ctx.dead_time_ground) / 3e-3;
        assert!(s.hv < p.hv);
        assert_abs_diff_eq!(s.hv / p.hv, sat * ground, epsilon = 1e-12);
        assert_eq!(s.vv, 0.0);
    }

    #[test]
    fn shared_load_scales_terms_uniformly() {
        let ctx = RateContext::<f64>::default();
        let p = CoincidenceProbs { hh: 1e-4, hv: 3e-3, vh: 2e-3, vv: 5e-5 };
        let alone = saturate(&p, &p, &ctx);
        let loaded = saturate(&p, &p.scaled(10.0), &ctx);
        let ratios = [loaded.hh / alone.hh, loaded.hv / alone.hv, loaded.vh / alone.vh, loaded.vv / alone.vv];
        assert!(ratios[0] < 1.0);
        for r in &ratios[1..] {
            assert_abs_diff_eq!(*r, ratios[0], epsilon = 1e-12);
        }
        assert_abs_diff_eq!(qber(&loaded).unwrap(), qber(&alone).unwrap(), epsilon = 1e-15);
    }

    #[test]
    fn qber_cases() {
        let singlet = CoincidenceProbs { hh: 0.0, hv: 0.1, vh: 0.1, vv: 0.0 };
        assert_eq!(qber(&singlet).unwrap(), 0.0);
        let mixed = CoincidenceProbs { hh: 0.1, hv: 0.1, vh: 0.1, vv: 0.1 };
        assert_abs_diff_eq!(qber(&mixed).unwrap(), 0.5);
        assert_eq!(qber(&CoincidenceProbs::<f64>::zero()), Err(CoincidenceError::NoTwofolds));
    }

    #[test]
    fn qber_vanishes_with_squeezing() {
        let q = |chi: f64| qber(&squash(&setup(chi, 5, 1.0, 1.0, 0.0))).unwrap();
        let (q3, q1, q01) = (q(0.3), q(0.1), q(0.01));
        assert!(q3 > q1 && q1 > q01);
        assert!(q01 < 1e-3);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn tensor_is_a_distribution(chi in 0.0f64..0.35, eta_a in 0.0f64..=1.0, eta_b in 0.0f64..=1.0, rate in 0.0f64..1e5) {
            let t = setup(chi, 4, eta_a, eta_b, rate);
            prop_assert!(t.0.iter().flatten().flatten().flatten().all(|&x| x >= 0.0));
            prop_assert!((t.sum() - 1.0).abs() < 1e-9);
            let p = squash(&t);
            prop_assert!((p.total() - t.both_sides_click()).abs() < 1e-14);
            prop_assert!((p.hv - p.vh).abs() < 1e-12);
        }

        #[test]
        fn dead_time_monotone_concave(p in 0.0f64..1.0, dp in 1e-6f64..1e-2, td in 1e-9f64..1e-5) {
            let ctx = RateContext::<f64>::default();
            let f = |x: f64| dead_time_correct(x, &ctx, td);
            prop_assert!(f(p) <= p);
            prop_assert!(f(p + dp) >= f(p));
            // concavity: midpoint above chord
            prop_assert!(f(p + dp / 2.0) >= 0.5 * (f(p) + f(p + dp)) - 1e-15);
        }
    }
}
