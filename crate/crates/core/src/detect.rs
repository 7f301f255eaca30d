//! Detector models: bucket (threshold) and photon-number-resolving POVMs.
//!
//! All elements are diagonal in the Fock basis of one mode. The efficiency of
//! a [`DetectorSpec`] carries any channel transmittance folded into it.

use thiserror::Error;

use crate::fock::{FockError, Operator, TruncatedSpace};
use crate::scalar::Real;

/// Index of the click element in a binary POVM.
pub const CLICK: usize = 0;
/// Index of the no-click element in a binary POVM.
pub const NO_CLICK: usize = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DetectError {
    #[error("efficiency {0} outside [0, 1]")]
    EfficiencyOutOfRange(f64),
    #[error("transmittance {0} outside [0, 1]")]
    TransmittanceOutOfRange(f64),
    #[error("{name} must be finite and non-negative, got {value}")]
    NegativeParameter { name: &'static str, value: f64 },
    #[error("expected a {expected:?} detector, got {got:?}")]
    WrongKind { expected: DetectorKind, got: DetectorKind },
    #[error("photon-number cap {n_max} exceeds cutoff level {max}")]
    PhotonCapOutOfRange { n_max: usize, max: usize },
    #[error(transparent)]
    Fock(#[from] FockError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DetectorKind {
    Bucket,
    Pnr,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorSpec<T: Real> {
    /// Overall detection efficiency, channel transmittance included.
    pub efficiency: T,
    /// Dark counts per second.
    pub dark_rate: T,
    /// Dead time in seconds.
    pub dead_time: T,
    /// Timing jitter in seconds.
    pub jitter: T,
    pub kind: DetectorKind,
    /// Coincidence window in seconds.
    pub coincidence_window: T,
}

impl<T: Real> DetectorSpec<T> {
    /// Satellite Si-APD: 1000 cps dark, 130 ps jitter, 1 µs dead time, 1 ns window.
    pub fn satellite_apd() -> Self {
        Self {
            efficiency: T::one(),
            dark_rate: T::lit(1000.0),
            dead_time: T::lit(1e-6),
            jitter: T::lit(130e-12),
            kind: DetectorKind::Bucket,
            coincidence_window: T::lit(1e-9),
        }
    }

    /// Ground SNSPD: 100 cps dark, 10 ns dead time, 1 ns window.
    pub fn ground_snspd() -> Self {
        Self {
            efficiency: T::one(),
            dark_rate: T::lit(100.0),
            dead_time: T::lit(10e-9),
            jitter: T::zero(),
            kind: DetectorKind::Bucket,
            coincidence_window: T::lit(1e-9),
        }
    }

    pub fn with_kind(self, kind: DetectorKind) -> Self {
        Self { kind, ..self }
    }

    pub fn with_efficiency(self, efficiency: T) -> Self {
        Self { efficiency, ..self }
    }

    /// Mean dark counts per coincidence window, `ν`.
    pub fn mean_dark_counts(&self) -> T {
        self.dark_rate * self.coincidence_window
    }

    pub fn validate(&self) -> Result<(), DetectError> {
        if !(self.efficiency >= T::zero() && self.efficiency <= T::one()) {
            return Err(DetectError::EfficiencyOutOfRange(to_f64(self.efficiency)));
        }
        for (name, value) in [
            ("dark_rate", self.dark_rate),
            ("dead_time", self.dead_time),
            ("jitter", self.jitter),
            ("coincidence_window", self.coincidence_window),
        ] {
            if !(value.is_finite() && value >= T::zero()) {
                return Err(DetectError::NegativeParameter { name, value: to_f64(value) });
            }
        }
        Ok(())
    }
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Converts a loss in dB to a power transmittance, `10^(−dB/10)`.
pub fn db_to_transmittance<T: Real>(loss_db: T) -> T {
    T::lit(10.0).powf(-loss_db / T::lit(10.0))
}

/// Multiplies the detector efficiency by a channel transmittance.
pub fn fold_loss<T: Real>(spec: &DetectorSpec<T>, transmittance: T) -> Result<DetectorSpec<T>, DetectError> {
    if !(transmittance >= T::zero() && transmittance <= T::one()) {
        return Err(DetectError::TransmittanceOutOfRange(to_f64(transmittance)));
    }
    Ok(DetectorSpec { efficiency: spec.efficiency * transmittance, ..*spec })
}

/// Poisson dark-count distribution with mean `dark_rate·window`, truncated to
/// `k < dim` and renormalized.
pub fn dark_distribution<T: Real>(dark_rate: T, window: T, dim: usize) -> Result<Vec<T>, DetectError> {
    let nu = dark_rate * window;
    if !(nu.is_finite() && nu >= T::zero()) {
        return Err(DetectError::NegativeParameter { name: "dark_rate*window", value: to_f64(nu) });
    }
    let mut probs = Vec::with_capacity(dim);
    let mut term = (-nu).exp();
    for k in 0..dim {
        if k > 0 {
            term = term * nu / T::from_count(k);
        }
        probs.push(term);
    }
    let total: T = probs.iter().copied().sum();
    Ok(probs.into_iter().map(|p| p / total).collect())
}

/// Ordered set of POVM elements on one mode.
///
/// Bucket: `[click, no-click]` (see [`CLICK`], [`NO_CLICK`]).
/// PNR: `[E⁽⁰⁾, …, E⁽ⁿᵐᵃˣ⁾, remainder]`, the remainder completing the set.
#[derive(Debug, Clone, PartialEq)]
pub struct Povm<T: Real> {
    kind: DetectorKind,
    elements: Vec<Operator<T>>,
}

impl<T: Real> Povm<T> {
    pub fn kind(&self) -> DetectorKind {
        self.kind
    }

    pub fn elements(&self) -> &[Operator<T>] {
        &self.elements
    }

    pub fn space(&self) -> TruncatedSpace {
        self.elements[0].space()
    }

    /// `(click, no-click)` pair used by the squashing model. A PNR detector
    /// reports a click only on exactly one count; higher counts are discarded.
    pub fn click_pair(&self) -> (&Operator<T>, &Operator<T>) {
        match self.kind {
            DetectorKind::Bucket => (&self.elements[CLICK], &self.elements[NO_CLICK]),
            DetectorKind::Pnr => (&self.elements[1], &self.elements[0]),
        }
    }

    /// The PNR completeness remainder, if any.
    pub fn remainder(&self) -> Option<&Operator<T>> {
        match self.kind {
            DetectorKind::Bucket => None,
            DetectorKind::Pnr => self.elements.last(),
        }
    }

    /// Sum of all elements.
    pub fn total(&self) -> Operator<T> {
        self.elements
            .iter()
            .skip(1)
            .fold(self.elements[0].clone(), |acc, e| acc.add(e).expect("elements share a space"))
    }
}

/// Builds the POVM matching `spec.kind` (PNR resolves up to `dim − 1` counts).
pub fn povm_for<T: Real>(spec: &DetectorSpec<T>, space: TruncatedSpace) -> Result<Povm<T>, DetectError> {
    match spec.kind {
        DetectorKind::Bucket => bucket_povm(spec, space),
        DetectorKind::Pnr => pnr_povm(spec, space, space.dim() - 1),
    }
}

/// Threshold detector, click entries `1 − D(0)(1−η)^m`.
pub fn bucket_povm<T: Real>(spec: &DetectorSpec<T>, space: TruncatedSpace) -> Result<Povm<T>, DetectError> {
    if spec.kind != DetectorKind::Bucket {
        return Err(DetectError::WrongKind { expected: DetectorKind::Bucket, got: spec.kind });
    }
    spec.validate()?;
    if space.n_modes() != 1 {
        return Err(FockError::NotSingleMode(space.n_modes()).into());
    }
    let d0 = dark_distribution(spec.dark_rate, spec.coincidence_window, space.dim())?[0];
    let miss = T::one() - spec.efficiency;
    let click: Vec<T> = (0..space.dim()).map(|m| T::one() - d0 * miss.powi(m as i32)).collect();
    let click = Operator::from_diagonal(space, &click)?;
    let no_click = Operator::identity(space).sub(&click)?;
    Ok(Povm { kind: DetectorKind::Bucket, elements: vec![click, no_click] })
}

fn binomial<T: Real>(n: usize, k: usize) -> T {
    if k > n {
        return T::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(T::one(), |acc, i| acc * T::from_count(n - i) / T::from_count(i + 1))
}

/// Photon-number-resolving detector: `E⁽ⁿ⁾` for `n = 0..=n_max` plus a
/// remainder `I − Σ E⁽ⁿ⁾`.
///
/// The entry of `E⁽ⁿ⁾` on `|p⟩` sums, over `k` dark counts, the probability
/// of registering exactly `n − k` of the `p` photons.
pub fn pnr_povm<T: Real>(
    spec: &DetectorSpec<T>,
    space: TruncatedSpace,
    n_max: usize,
) -> Result<Povm<T>, DetectError> {
    if spec.kind != DetectorKind::Pnr {
        return Err(DetectError::WrongKind { expected: DetectorKind::Pnr, got: spec.kind });
    }
    spec.validate()?;
    if space.n_modes() != 1 {
        return Err(FockError::NotSingleMode(space.n_modes()).into());
    }
    let dim = space.dim();
    if n_max > dim - 1 {
        return Err(DetectError::PhotonCapOutOfRange { n_max, max: dim - 1 });
    }
    let dark = dark_distribution(spec.dark_rate, spec.coincidence_window, dim)?;
    let eta = spec.efficiency;
    let miss = T::one() - eta;

    let mut elements = Vec::with_capacity(n_max + 2);
    for n in 0..=n_max {
        let diag: Vec<T> = (0..dim)
            .map(|p| {
                (0..=n)
                    .filter(|&k| n - k <= p)
                    .map(|k| {
                        let detected = n - k;
                        dark[k]
                            * binomial::<T>(p, p - detected)
                            * eta.powi(detected as i32)
                            * miss.powi((p - detected) as i32)
                    })
                    .sum()
            })
            .collect();
        elements.push(Operator::from_diagonal(space, &diag)?);
    }
    let covered = elements
        .iter()
        .skip(1)
        .try_fold(elements[0].clone(), |acc, e| acc.add(e))?;
    elements.push(Operator::identity(space).sub(&covered)?);
    Ok(Povm { kind: DetectorKind::Pnr, elements })
}
