//! Pulsed SPDC source: the four-mode polarization-entangled state.
//!
//! Each polarization pair is an independent two-mode squeezer
//! `exp(iχ(a†b† + ab))` acting on vacuum. The two pairs are tensored and the
//! modes reordered so that the result lives in [`MODE_ORDER`].

use std::sync::atomic::{AtomicUsize, Ordering};

use num_complex::Complex;
use thiserror::Error;

use crate::fock::{self, FockError, Operator, StateVector, TruncatedSpace};
use crate::scalar::Real;

/// Mode labels of the four-mode source state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Arm A (ground), horizontal.
    AH,
    /// Arm A (ground), vertical.
    AV,
    /// Arm B (satellite), horizontal.
    BH,
    /// Arm B (satellite), vertical.
    BV,
}

/// Mode order of every four-mode state in the crate.
pub const MODE_ORDER: [Mode; 4] = [Mode::AH, Mode::AV, Mode::BH, Mode::BV];

/// Reorders `pair1 ⊗ pair2 = (a₁, b₁, a₂, b₂)` into `(a_H, a_V, b_H, b_V)`:
/// pair 1 populates `a_H b_V`, pair 2 populates `a_V b_H`.
pub const SPDC_PAIR_PERMUTATION: [usize; 4] = [0, 3, 2, 1];

/// Default Fock cutoff per mode.
pub const DEFAULT_DIM: usize = 4;

/// Default upper bound on the squeezing parameter.
pub const DEFAULT_CHI_MAX: f64 = 1.0;

/// Largest tolerated probability mass lost to the Fock cutoff.
pub const TAIL_TOLERANCE: f64 = 1e-3;

/// Cutoff ceiling for automatic escalation.
pub const MAX_AUTO_DIM: usize = 24;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SourceError {
    #[error("squeezing parameter {chi} outside [0, {max}]")]
    ChiOutOfRange { chi: f64, max: f64 },
    #[error("Fock cutoff {dim} loses {deficit:.3e} of the state norm at chi = {chi} (limit {TAIL_TOLERANCE:e})")]
    TruncationTail { chi: f64, dim: usize, deficit: f64 },
    #[error("the SPDC state needs a four-mode space, got {0} modes")]
    NotFourMode(usize),
    #[error("invalid source specification: {0}")]
    InvalidSpec(String),
    #[error(transparent)]
    Fock(#[from] FockError),
}

/// Dimensionless squeezing parameter `χ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SqueezeParam<T: Real> {
    chi: T,
}

impl<T: Real> SqueezeParam<T> {
    pub fn new(chi: T, chi_max: T) -> Result<Self, SourceError> {
        if !(chi >= T::zero() && chi <= chi_max) {
            return Err(SourceError::ChiOutOfRange {
                chi: chi.to_f64().unwrap_or(f64::NAN),
                max: chi_max.to_f64().unwrap_or(f64::NAN),
            });
        }
        Ok(Self { chi })
    }

    /// Validates against [`DEFAULT_CHI_MAX`].
    pub fn with_default_bound(chi: T) -> Result<Self, SourceError> {
        Self::new(chi, T::lit(DEFAULT_CHI_MAX))
    }

    pub fn chi(&self) -> T {
        self.chi
    }
}

/// Probability mass above the cutoff for both pair processes,
/// `1 − (1 − tanh^{2·dim} χ)²`.
pub fn truncation_tail<T: Real>(chi: T, dim: usize) -> T {
    let per_pair = chi.tanh().powi(2 * dim as i32);
    T::one() - (T::one() - per_pair).powi(2)
}

/// Smallest cutoff `≥ min_dim` whose truncation tail is within [`TAIL_TOLERANCE`].
pub fn required_dim<T: Real>(chi: T, min_dim: usize) -> Result<usize, SourceError> {
    let min_dim = min_dim.max(2);
    (min_dim..=MAX_AUTO_DIM.max(min_dim))
        .find(|&d| truncation_tail(chi, d) <= T::lit(TAIL_TOLERANCE))
        .ok_or_else(|| SourceError::TruncationTail {
            chi: chi.to_f64().unwrap_or(f64::NAN),
            dim: MAX_AUTO_DIM,
            deficit: truncation_tail(chi, MAX_AUTO_DIM).to_f64().unwrap_or(f64::NAN),
        })
}

/// `exp(iχ(a†⊗b† + a⊗b))` on two modes of cutoff `dim`.
pub fn two_mode_squeezer<T: Real>(chi: T, dim: usize) -> Result<Operator<T>, SourceError> {
    let one = TruncatedSpace::single_mode(dim)?;
    let a = fock::annihilation::<T>(one)?;
    let ad = fock::creation::<T>(one)?;
    let generator = fock::tensor(&[&ad, &ad])?.add(&fock::tensor(&[&a, &a])?)?;
    Ok(fock::expm(&generator.scale(Complex::new(T::zero(), chi)))?)
}

static WARNED_DIM: AtomicUsize = AtomicUsize::new(0);

/// Squeezed vacuum of one polarization pair, kept in its two-mode form.
///
/// The four-mode state is `pair ⊗ pair` reordered by
/// [`SPDC_PAIR_PERMUTATION`]; pair 1 occupies `(a_H, b_V)` and pair 2
/// occupies `(b_H, a_V)` in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct SpdcSource<T: Real> {
    chi: T,
    pair: StateVector<T>,
}

impl<T: Real> SpdcSource<T> {
    /// Builds the source at cutoff `dim`, rejecting a truncation tail above
    /// [`TAIL_TOLERANCE`].
    pub fn new(chi: SqueezeParam<T>, dim: usize) -> Result<Self, SourceError> {
        let deficit = truncation_tail(chi.chi(), dim);
        if deficit > T::lit(TAIL_TOLERANCE) {
            return Err(SourceError::TruncationTail {
                chi: chi.chi().to_f64().unwrap_or(f64::NAN),
                dim,
                deficit: deficit.to_f64().unwrap_or(f64::NAN),
            });
        }
        let pair_space = TruncatedSpace::new(dim, 2)?;
        let pair = two_mode_squeezer(chi.chi(), dim)?
            .apply(&StateVector::vacuum(pair_space))?
            .normalized();
        Ok(Self { chi: chi.chi(), pair })
    }

    /// Like [`SpdcSource::new`], raising the cutoff above `min_dim` when the
    /// truncation tail requires it.
    pub fn with_auto_dim(chi: SqueezeParam<T>, min_dim: usize) -> Result<Self, SourceError> {
        let dim = required_dim(chi.chi(), min_dim)?;
        // warn once per cutoff level rather than on every optimizer step
        if dim > min_dim && WARNED_DIM.fetch_max(dim, Ordering::Relaxed) < dim {
            log::warn!(
                "chi = {} needs Fock cutoff {dim} (configured {min_dim}); escalating",
                chi.chi()
            );
        }
        Self::new(chi, dim)
    }

    pub fn chi(&self) -> T {
        self.chi
    }

    pub fn dim(&self) -> usize {
        self.pair.space().dim()
    }

    /// Two-mode squeezed vacuum of a single polarization pair.
    pub fn pair_state(&self) -> &StateVector<T> {
        &self.pair
    }

    /// Full four-mode state in [`MODE_ORDER`].
    pub fn four_mode_state(&self) -> Result<StateVector<T>, SourceError> {
        let joint = fock::tensor_states(&[&self.pair, &self.pair])?;
        Ok(fock::permute_modes(&joint, &SPDC_PAIR_PERMUTATION)?)
    }
}

/// Four-mode polarization-entangled SPDC state in [`MODE_ORDER`].
pub fn build_spdc_state<T: Real>(
    chi: SqueezeParam<T>,
    space: TruncatedSpace,
) -> Result<StateVector<T>, SourceError> {
    if space.n_modes() != 4 {
        return Err(SourceError::NotFourMode(space.n_modes()));
    }
    SpdcSource::new(chi, space.dim())?.four_mode_state()
}

/// Like [`build_spdc_state`], raising the cutoff above `min_dim` when needed.
pub fn build_spdc_state_auto<T: Real>(
    chi: SqueezeParam<T>,
    min_dim: usize,
) -> Result<StateVector<T>, SourceError> {
    SpdcSource::with_auto_dim(chi, min_dim)?.four_mode_state()
}

/// Mean photon-pair number summed over both polarization pairs, `μ = 2 sinh²χ`.
pub fn expected_pair_number<T: Real>(chi: T) -> T {
    T::lit(2.0) * chi.sinh().powi(2)
}

/// Half the mean pair number, `λ = μ/2 = sinh²χ`.
pub fn half_pair_number<T: Real>(chi: T) -> T {
    expected_pair_number(chi) / T::lit(2.0)
}

/// Pulsed pump and down-converted spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSpec {
    pub rep_rate_hz: f64,
    pub pump_center_nm: f64,
    pub pump_bandwidth_nm: f64,
    pub signal_center_nm: f64,
    pub signal_bandwidth_nm: f64,
    pub idler_center_nm: f64,
    pub idler_bandwidth_nm: f64,
}

/// Allowed relative energy-conservation mismatch between the three centers.
pub const ENERGY_CONSERVATION_TOLERANCE: f64 = 2e-3;

impl Default for SourceSpec {
    fn default() -> Self {
        Self {
            rep_rate_hz: 80e6,
            pump_center_nm: 521.4,
            pump_bandwidth_nm: 2.0,
            signal_center_nm: 787.5,
            signal_bandwidth_nm: 15.0,
            idler_center_nm: 1543.2,
            idler_bandwidth_nm: 39.0,
        }
    }
}

impl SourceSpec {
    /// Pulse period in seconds.
    pub fn period_s(&self) -> f64 {
        1.0 / self.rep_rate_hz
    }

    /// `|1/pump − (1/signal + 1/idler)| / (1/pump)`.
    pub fn energy_mismatch(&self) -> f64 {
        let pump = 1.0 / self.pump_center_nm;
        (pump - (1.0 / self.signal_center_nm + 1.0 / self.idler_center_nm)).abs() / pump
    }

    pub fn validate(&self) -> Result<(), SourceError> {
        let fields = [
            ("rep_rate_hz", self.rep_rate_hz),
            ("pump_center_nm", self.pump_center_nm),
            ("pump_bandwidth_nm", self.pump_bandwidth_nm),
            ("signal_center_nm", self.signal_center_nm),
            ("signal_bandwidth_nm", self.signal_bandwidth_nm),
            ("idler_center_nm", self.idler_center_nm),
            ("idler_bandwidth_nm", self.idler_bandwidth_nm),
        ];
        if let Some((name, v)) = fields.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            return Err(SourceError::InvalidSpec(format!("{name} must be positive, got {v}")));
        }
        let mismatch = self.energy_mismatch();
        if mismatch > ENERGY_CONSERVATION_TOLERANCE {
            return Err(SourceError::InvalidSpec(format!(
                "signal/idler centers violate energy conservation (relative mismatch {mismatch:.2e})"
            )));
        }
        Ok(())
    }
}
