//! Entanglement-based QKD network simulator.
//!
//! Photon statistics are computed in a truncated Fock space: a polarization
//! entangled SPDC source ([`source`]) is measured by bucket or
//! photon-number-resolving detectors ([`detect`]), the click patterns are
//! squashed into two-fold coincidences ([`coincidence`]) and turned into a
//! BBM92 secure key rate ([`keyrate`]). [`netplan`] handles the wavelength
//! and time-slot plan of a multi-user network.
//!
//! The numerical core is generic over [`Real`] (`f32` or `f64`); the aliases
//! below fix it to `f64`.

pub mod coincidence;
pub mod detect;
pub mod fock;
pub mod keyrate;
pub mod netplan;
pub mod scalar;
pub mod source;

pub use coincidence::{CoincidenceError, CoincidenceProbs, ConfigTensor, RateContext};
pub use detect::{DetectError, DetectorKind, DetectorSpec, Povm};
pub use fock::{FockError, Operator, StateVector, TruncatedSpace};
pub use keyrate::{KeyRateError, LinkScenario, MultiplexMode, MultiplexResult, OptimizerSettings, SkrResult};
pub use netplan::PlanError;
pub use scalar::{Cplx, Real};
pub use source::{SourceError, SourceSpec, SpdcSource, SqueezeParam};

pub type Operator64 = Operator<f64>;
pub type StateVector64 = StateVector<f64>;
pub type SqueezeParam64 = SqueezeParam<f64>;
pub type SpdcSource64 = SpdcSource<f64>;
pub type DetectorSpec64 = DetectorSpec<f64>;
pub type Povm64 = Povm<f64>;
pub type ConfigTensor64 = ConfigTensor<f64>;
pub type CoincidenceProbs64 = CoincidenceProbs<f64>;
pub type RateContext64 = RateContext<f64>;
pub type SkrResult64 = SkrResult<f64>;
pub type LinkScenario64 = LinkScenario<f64>;
pub type OptimizerSettings64 = OptimizerSettings<f64>;
pub type MultiplexResult64 = MultiplexResult<f64>;
