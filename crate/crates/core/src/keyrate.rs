//! Secure key rate, multiplexed-channel aggregation and squeezing optimization.
//!
//! The key fraction follows the reference implementation the published curves
//! were produced with: `q·P·(1 − (1 + f_ec + δ)·H₂(δ))` with `q = 1/2`,
//! where `P` is the total two-fold probability per pulse and `δ` the QBER.
//! Read literally, the error-correction inefficiency would be the constant
//! `f_ec` with a separate phase-error term; the two readings differ only in
//! how quickly the rate falls near threshold.

use thiserror::Error;

use crate::coincidence::{self, CoincidenceError, CoincidenceProbs, RateContext};
use crate::detect::{self, DetectError, DetectorSpec};
use crate::fock::TruncatedSpace;
use crate::netplan::{self, PlanError};
use crate::scalar::Real;
use crate::source::{SourceError, SpdcSource, SqueezeParam, DEFAULT_CHI_MAX, DEFAULT_DIM};

/// Sifting factor of BBM92 with unbiased basis choice.
const SIFTING: f64 = 0.5;

/// Error-correction inefficiency of the modeled link.
pub const DEFAULT_F_EC: f64 = 1.17;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KeyRateError {
    #[error("binary entropy argument {0} outside [0, 1]")]
    Domain(f64),
    #[error("at least one channel required")]
    NoChannels,
    #[error("{requested} channels requested, capacity is {capacity}")]
    CapacityExceeded { requested: usize, capacity: usize },
    #[error("invalid settings: {0}")]
    InvalidSettings(String),
    #[error(transparent)]
    Source(#[from] SourceError),
    #[error(transparent)]
    Detect(#[from] DetectError),
    #[error(transparent)]
    Coincidence(#[from] CoincidenceError),
    #[error(transparent)]
    Plan(#[from] PlanError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SkrResult<T: Real> {
    /// Secure key rate in bits/s.
    pub skr: T,
    pub qber: T,
    /// Two-fold coincidences per second.
    pub twofold_rate: T,
    pub chi_opt: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum MultiplexMode {
    /// Frequency channels mapped onto separate time slots: independent channels.
    TimeFrequency,
    /// Frequency channels only; the satellite detector sees every channel.
    OneSidedFrequency,
}

/// `H₂(x) = −x log₂ x − (1−x) log₂(1−x)`, zero at both ends.
pub fn binary_entropy<T: Real>(x: T) -> Result<T, KeyRateError> {
    if !(x >= T::zero() && x <= T::one()) {
        return Err(KeyRateError::Domain(x.to_f64().unwrap_or(f64::NAN)));
    }
    let term = |p: T| if p <= T::zero() { T::zero() } else { -p * p.log2() };
    Ok(term(x) + term(T::one() - x))
}

/// Secure key per pulse for total two-fold probability `twofolds` at QBER `qber`.
pub fn key_fraction<T: Real>(twofolds: T, qber: T, f_ec: T) -> Result<T, KeyRateError> {
    if qber >= T::lit(0.5) {
        return Ok(T::zero());
    }
    let h = binary_entropy(qber)?;
    let key = twofolds * T::lit(SIFTING) * (T::one() - (T::one() + f_ec + qber) * h);
    Ok(key.max(T::zero()))
}

/// Key rate of one channel from its (saturated) coincidence probabilities.
///
/// Without any two-fold the rate is zero and the QBER is reported as 1/2.
pub fn skr_single<T: Real>(
    probs: &CoincidenceProbs<T>,
    ctx: &RateContext<T>,
    f_ec: T,
) -> Result<SkrResult<T>, KeyRateError> {
    let total = probs.total();
    if !(total > T::zero()) {
        return Ok(SkrResult { skr: T::zero(), qber: T::lit(0.5), twofold_rate: T::zero(), chi_opt: None });
    }
    let qber = coincidence::qber(probs)?;
    Ok(SkrResult {
        skr: key_fraction(total, qber, f_ec)? * ctx.rep_rate,
        qber: qber.min(T::lit(0.5)),
        twofold_rate: total * ctx.rep_rate,
        chi_opt: None,
    })
}

/// Key rate computed on summed coincidence counts of several channels.
pub fn skr_aggregate<T: Real>(
    channels: &[CoincidenceProbs<T>],
    ctx: &RateContext<T>,
    f_ec: T,
) -> Result<SkrResult<T>, KeyRateError> {
    let sum = channels.iter().fold(CoincidenceProbs::zero(), |acc, p| acc.zip_with(p, |x, y| x + y));
    skr_single(&sum, ctx, f_ec)
}

/// One entanglement link: arm A is the ground user, arm B the receiver
/// (satellite or a second ground user). Losses are in dB on top of the
/// detector efficiencies.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkScenario<T: Real> {
    pub arm_a: DetectorSpec<T>,
    pub arm_b: DetectorSpec<T>,
    pub arm_a_loss_db: T,
    pub arm_b_loss_db: T,
    pub rep_rate: T,
    pub integration_time: T,
    pub f_ec: T,
    /// Minimum Fock cutoff; raised automatically at large `χ`.
    pub dim: usize,
    pub chi_max: T,
}

impl<T: Real> Default for LinkScenario<T> {
    /// Ground SNSPD on arm A, satellite APD behind 40 dB on arm B.
    fn default() -> Self {
        Self {
            arm_a: DetectorSpec::ground_snspd(),
            arm_b: DetectorSpec::satellite_apd(),
            arm_a_loss_db: T::zero(),
            arm_b_loss_db: T::lit(40.0),
            rep_rate: T::lit(80e6),
            integration_time: T::one(),
            f_ec: T::lit(DEFAULT_F_EC),
            dim: DEFAULT_DIM,
            chi_max: T::lit(DEFAULT_CHI_MAX),
        }
    }
}

impl<T: Real> LinkScenario<T> {
    /// Two ground users sharing `total_loss_db` evenly.
    pub fn ground_pair(total_loss_db: T) -> Self {
        let half = total_loss_db / T::lit(2.0);
        Self {
            arm_b: DetectorSpec::ground_snspd(),
            arm_a_loss_db: half,
            arm_b_loss_db: half,
            ..Self::default()
        }
    }

    pub fn with_arm_a_loss(&self, loss_db: T) -> Self {
        Self { arm_a_loss_db: loss_db, ..self.clone() }
    }

    pub fn rate_context(&self) -> RateContext<T> {
        RateContext {
            rep_rate: self.rep_rate,
            integration_time: self.integration_time,
            dead_time_sat: self.arm_b.dead_time,
            dead_time_ground: self.arm_a.dead_time,
        }
    }

    /// Frequency-time channels the arm-B jitter leaves room for; `None` when
    /// the jitter is zero.
    pub fn channel_capacity(&self) -> Result<Option<usize>, KeyRateError> {
        if self.arm_b.jitter <= T::zero() {
            return Ok(None);
        }
        Ok(Some(netplan::channel_capacity(self.rep_rate, self.arm_b.jitter)?))
    }

    fn validate(&self) -> Result<(), KeyRateError> {
        self.arm_a.validate()?;
        self.arm_b.validate()?;
        self.rate_context().validate()?;
        for (name, v) in [("arm_a_loss_db", self.arm_a_loss_db), ("arm_b_loss_db", self.arm_b_loss_db)] {
            if !(v.is_finite() && v >= T::zero()) {
                return Err(KeyRateError::InvalidSettings(format!("{name} must be non-negative, got {v}")));
            }
        }
        if !(self.f_ec >= T::zero()) {
            return Err(KeyRateError::InvalidSettings(format!("f_ec must be non-negative, got {}", self.f_ec)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiplexResult<T: Real> {
    pub n_channels: usize,
    pub mode: MultiplexMode,
    pub per_channel: Vec<SkrResult<T>>,
    pub aggregate: SkrResult<T>,
}

/// Mean extra dark counts per window on arm B from `others` channels whose
/// photons reach the same detector: each adds a click probability `p` with
/// no partner in this channel's time frame.
fn crosstalk_counts<T: Real>(source: &SpdcSource<T>, arm_b: &DetectorSpec<T>, others: usize) -> Result<T, KeyRateError> {
    if others == 0 {
        return Ok(T::zero());
    }
    let space = TruncatedSpace::single_mode(source.dim()).map_err(SourceError::from)?;
    let quiet = DetectorSpec { dark_rate: T::zero(), ..*arm_b };
    let povm = detect::bucket_povm(&quiet, space)?;
    let p = coincidence::arm_b_click_marginal(source, povm.click_pair().0)?;
    let p = p.max(T::zero()).min(T::one() - T::epsilon());
    Ok(T::from_count(others) * -(T::one() - p).ln())
}

/// Evaluates `n_channels` identical channels at squeezing `chi`.
///
/// Time-frequency channels are independent apart from sharing the arm-B
/// detector dead time. In one-sided mode every other channel's arm-B clicks
/// enter this channel as extra dark counts. The channel count is checked
/// against the jitter-limited capacity only in time-frequency mode.
pub fn skr_multiplexed<T: Real>(
    chi: T,
    scenario: &LinkScenario<T>,
    n_channels: usize,
    mode: MultiplexMode,
) -> Result<MultiplexResult<T>, KeyRateError> {
    if n_channels == 0 {
        return Err(KeyRateError::NoChannels);
    }
    scenario.validate()?;
    if mode == MultiplexMode::TimeFrequency {
        if let Some(capacity) = scenario.channel_capacity()? {
            if n_channels > capacity {
                return Err(KeyRateError::CapacityExceeded { requested: n_channels, capacity });
            }
        }
    }
    let source = SpdcSource::with_auto_dim(SqueezeParam::new(chi, scenario.chi_max)?, scenario.dim)?;
    let space = TruncatedSpace::single_mode(source.dim()).map_err(SourceError::from)?;
    let arm_a = detect::fold_loss(&scenario.arm_a, detect::db_to_transmittance(scenario.arm_a_loss_db))?;
    let mut arm_b = detect::fold_loss(&scenario.arm_b, detect::db_to_transmittance(scenario.arm_b_loss_db))?;
    if mode == MultiplexMode::OneSidedFrequency && n_channels > 1 {
        if arm_b.coincidence_window <= T::zero() {
            return Err(KeyRateError::InvalidSettings("one-sided mode needs a positive coincidence window".into()));
        }
        let extra = crosstalk_counts(&source, &arm_b, n_channels - 1)?;
        arm_b.dark_rate = arm_b.dark_rate + extra / arm_b.coincidence_window;
    }
    let povm_a = detect::povm_for(&arm_a, space)?;
    let povm_b = detect::povm_for(&arm_b, space)?;
    let probs = coincidence::squash(&coincidence::source_config_probs(&source, &povm_a, &povm_b)?);

    let ctx = scenario.rate_context();
    let shared = probs.scaled(T::from_count(n_channels));
    let saturated = coincidence::saturate(&probs, &shared, &ctx);
    let single = skr_single(&saturated, &ctx, scenario.f_ec)?;
    let channels = vec![saturated; n_channels];
    let aggregate = skr_aggregate(&channels, &ctx, scenario.f_ec)?;
    Ok(MultiplexResult { n_channels, mode, per_channel: vec![single; n_channels], aggregate })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerSettings<T: Real> {
    pub chi_min: T,
    pub chi_max: T,
    /// Absolute tolerance on `χ`.
    pub tolerance: T,
    /// Points of the validation grid.
    pub grid_points: usize,
}

impl<T: Real> Default for OptimizerSettings<T> {
    fn default() -> Self {
        Self { chi_min: T::lit(1e-3), chi_max: T::lit(DEFAULT_CHI_MAX), tolerance: T::lit(1e-4), grid_points: 50 }
    }
}

impl<T: Real> OptimizerSettings<T> {
    pub fn validate(&self) -> Result<(), KeyRateError> {
        if !(self.chi_min > T::zero() && self.chi_min <= self.chi_max && self.chi_max.is_finite()) {
            return Err(KeyRateError::InvalidSettings(format!(
                "chi bounds must satisfy 0 < chi_min <= chi_max, got [{}, {}]",
                self.chi_min, self.chi_max
            )));
        }
        if !(self.tolerance > T::zero()) {
            return Err(KeyRateError::InvalidSettings(format!("tolerance must be positive, got {}", self.tolerance)));
        }
        Ok(())
    }

    fn grid(&self) -> Vec<T> {
        let n = self.grid_points.max(2);
        let step = (self.chi_max - self.chi_min) / T::from_count(n - 1);
        (0..n).map(|i| if i + 1 == n { self.chi_max } else { self.chi_min + step * T::from_count(i) }).collect()
    }
}

/// Golden-section maximization of `f` on `[lo, hi]` down to width `tol`.
fn golden_max<T: Real, F>(f: &mut F, mut lo: T, mut hi: T, tol: T) -> Result<(T, SkrResult<T>), KeyRateError>
where
    F: FnMut(T) -> Result<SkrResult<T>, KeyRateError>,
{
    let ratio = (T::lit(5.0).sqrt() - T::one()) / T::lit(2.0);
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let mut f1 = f(x1)?;
    let mut f2 = f(x2)?;
    while hi - lo > tol {
        if f1.skr >= f2.skr {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2)?;
        }
    }
    Ok(if f1.skr >= f2.skr { (x1, f1) } else { (x2, f2) })
}

/// Maximizes the key rate returned by `objective` over `χ`.
///
/// A golden-section search over the whole interval is checked against a
/// uniform grid; when a grid point does better, the search is repeated
/// between that point's neighbours. If no `χ` yields key, the lower bound is
/// returned with zero rate.
pub fn optimize_chi<T: Real, F>(settings: &OptimizerSettings<T>, mut objective: F) -> Result<SkrResult<T>, KeyRateError>
where
    F: FnMut(T) -> Result<SkrResult<T>, KeyRateError>,
{
    settings.validate()?;
    let finish = |chi: T, mut r: SkrResult<T>| {
        r.chi_opt = Some(chi);
        r
    };
    if settings.chi_max - settings.chi_min <= settings.tolerance {
        let chi = settings.chi_min;
        return Ok(finish(chi, objective(chi)?));
    }

    let grid = settings.grid();
    let mut grid_best = (0, objective(grid[0])?);
    for (i, &chi) in grid.iter().enumerate().skip(1) {
        let r = objective(chi)?;
        if r.skr > grid_best.1.skr {
            grid_best = (i, r);
        }
    }
    let mut best = golden_max(&mut objective, settings.chi_min, settings.chi_max, settings.tolerance)?;
    if grid_best.1.skr > best.1.skr {
        let i = grid_best.0;
        let lo = grid[i.saturating_sub(1)];
        let hi = grid[(i + 1).min(grid.len() - 1)];
        let local = golden_max(&mut objective, lo, hi, settings.tolerance)?;
        best = if local.1.skr >= grid_best.1.skr { local } else { (grid[i], grid_best.1) };
    }
    if !(best.1.skr > T::zero()) {
        let chi = settings.chi_min;
        let mut r = objective(chi)?;
        r.skr = T::zero();
        return Ok(finish(chi, r));
    }
    Ok(finish(best.0, best.1))
}

/// Optimizes the aggregate key rate of a multiplexed link over `χ`.
pub fn optimize_multiplexed<T: Real>(
    scenario: &LinkScenario<T>,
    n_channels: usize,
    mode: MultiplexMode,
    settings: &OptimizerSettings<T>,
) -> Result<MultiplexResult<T>, KeyRateError> {
    let best = optimize_chi(settings, |chi| Ok(skr_multiplexed(chi, scenario, n_channels, mode)?.aggregate))?;
    let chi = best.chi_opt.unwrap_or(settings.chi_min);
    let mut result = skr_multiplexed(chi, scenario, n_channels, mode)?;
    result.aggregate = best;
    for r in &mut result.per_channel {
        r.chi_opt = Some(chi);
        if best.skr <= T::zero() {
            r.skr = T::zero();
        }
    }
    Ok(result)
}

/// Largest arm-A loss (dB) in `[0, max_db]` at which the optimized aggregate
/// key rate stays positive, located by bisection to `resolution_db`.
/// Returns `None` when there is no key even at zero loss.
pub fn max_tolerable_loss<T: Real>(
    scenario: &LinkScenario<T>,
    n_channels: usize,
    mode: MultiplexMode,
    settings: &OptimizerSettings<T>,
    max_db: T,
    resolution_db: T,
) -> Result<Option<T>, KeyRateError> {
    let positive = |loss: T| -> Result<bool, KeyRateError> {
        let s = scenario.with_arm_a_loss(loss);
        Ok(optimize_multiplexed(&s, n_channels, mode, settings)?.aggregate.skr > T::zero())
    };
    if !positive(T::zero())? {
        return Ok(None);
    }
    if positive(max_db)? {
        return Ok(Some(max_db));
    }
    let (mut lo, mut hi) = (T::zero(), max_db);
    while hi - lo > resolution_db {
        let mid = (lo + hi) / T::lit(2.0);
        if positive(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(lo))
}
