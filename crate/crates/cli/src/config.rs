//! TOML scenario configuration. Every key is optional; omitted keys fall back
//! to the modeled deployment (80 MHz source, Si-APD on the satellite, SNSPDs
//! on the ground, 40 dB uplink).

use std::path::PathBuf;

use serde::Deserialize;

use satnet::detect::{DetectorKind, DetectorSpec};
use satnet::keyrate::{LinkScenario, MultiplexMode, OptimizerSettings, DEFAULT_F_EC};
use satnet::netplan::{GridSpec, LinkBudget, LinkPath, MonthlyPlan, TopologyKind};
use satnet::source::{SourceSpec, DEFAULT_DIM};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub source: SourceSection,
    pub detectors: DetectorsSection,
    pub link: LinkSection,
    pub scenario: ScenarioSection,
    pub sweep: SweepSection,
    pub optimizer: OptimizerSection,
    pub network: NetworkSection,
    pub monthly: MonthlySection,
    pub output: OutputSection,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SourceSection {
    pub rep_rate_hz: f64,
    pub pump_center_nm: f64,
    pub pump_bandwidth_nm: f64,
    pub signal_center_nm: f64,
    pub signal_bandwidth_nm: f64,
    pub idler_center_nm: f64,
    pub idler_bandwidth_nm: f64,
    /// Minimum Fock cutoff per mode.
    pub dim: usize,
}

impl Default for SourceSection {
    fn default() -> Self {
        let s = SourceSpec::default();
        Self {
            rep_rate_hz: s.rep_rate_hz,
            pump_center_nm: s.pump_center_nm,
            pump_bandwidth_nm: s.pump_bandwidth_nm,
            signal_center_nm: s.signal_center_nm,
            signal_bandwidth_nm: s.signal_bandwidth_nm,
            idler_center_nm: s.idler_center_nm,
            idler_bandwidth_nm: s.idler_bandwidth_nm,
            dim: DEFAULT_DIM,
        }
    }
}

impl SourceSection {
    pub fn spec(&self) -> SourceSpec {
        SourceSpec {
            rep_rate_hz: self.rep_rate_hz,
            pump_center_nm: self.pump_center_nm,
            pump_bandwidth_nm: self.pump_bandwidth_nm,
            signal_center_nm: self.signal_center_nm,
            signal_bandwidth_nm: self.signal_bandwidth_nm,
            idler_center_nm: self.idler_center_nm,
            idler_bandwidth_nm: self.idler_bandwidth_nm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KindName {
    Bucket,
    Pnr,
}

impl From<KindName> for DetectorKind {
    fn from(k: KindName) -> Self {
        match k {
            KindName::Bucket => DetectorKind::Bucket,
            KindName::Pnr => DetectorKind::Pnr,
        }
    }
}

/// Overrides on top of a detector preset.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorSection {
    pub efficiency: Option<f64>,
    pub dark_rate_cps: Option<f64>,
    pub dead_time_s: Option<f64>,
    pub jitter_s: Option<f64>,
    pub coincidence_window_s: Option<f64>,
    pub kind: Option<KindName>,
}

impl DetectorSection {
    pub fn resolve(&self, base: DetectorSpec<f64>) -> DetectorSpec<f64> {
        DetectorSpec {
            efficiency: self.efficiency.unwrap_or(base.efficiency),
            dark_rate: self.dark_rate_cps.unwrap_or(base.dark_rate),
            dead_time: self.dead_time_s.unwrap_or(base.dead_time),
            jitter: self.jitter_s.unwrap_or(base.jitter),
            coincidence_window: self.coincidence_window_s.unwrap_or(base.coincidence_window),
            kind: self.kind.map_or(base.kind, DetectorKind::from),
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorsSection {
    pub satellite: DetectorSection,
    pub ground: DetectorSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyName {
    /// Ground user against the satellite receiver.
    Satellite,
    /// Two ground users.
    Ground,
}

impl From<TopologyName> for TopologyKind {
    fn from(t: TopologyName) -> Self {
        match t {
            TopologyName::Satellite => TopologyKind::SatellitePass,
            TopologyName::Ground => TopologyKind::Ground,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinkSection {
    pub satellite_loss_db: f64,
    pub fibre_length_km: f64,
    pub atten_signal_db_per_km: f64,
    pub atten_idler_db_per_km: f64,
    pub integration_time_s: f64,
    pub f_ec: f64,
}

impl Default for LinkSection {
    fn default() -> Self {
        let b = LinkBudget::default();
        Self {
            satellite_loss_db: b.satellite_loss_db,
            fibre_length_km: b.fibre_length_km,
            atten_signal_db_per_km: b.atten_signal_db_per_km,
            atten_idler_db_per_km: b.atten_idler_db_per_km,
            integration_time_s: 1.0,
            f_ec: DEFAULT_F_EC,
        }
    }
}

impl LinkSection {
    pub fn budget(&self) -> LinkBudget {
        LinkBudget {
            fibre_length_km: self.fibre_length_km,
            atten_signal_db_per_km: self.atten_signal_db_per_km,
            atten_idler_db_per_km: self.atten_idler_db_per_km,
            satellite_loss_db: self.satellite_loss_db,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ModeName {
    TimeFrequency,
    OneSided,
}

impl ModeName {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeName::TimeFrequency => "time-frequency",
            ModeName::OneSided => "one-sided",
        }
    }
}

impl From<ModeName> for MultiplexMode {
    fn from(m: ModeName) -> Self {
        match m {
            ModeName::TimeFrequency => MultiplexMode::TimeFrequency,
            ModeName::OneSided => MultiplexMode::OneSidedFrequency,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub topology: TopologyName,
    pub mode: ModeName,
    pub n_channels: usize,
    /// Swept link loss of a single run (`optimize-chi`, `compare-detectors`).
    pub loss_db: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        Self { topology: TopologyName::Satellite, mode: ModeName::TimeFrequency, n_channels: 1, loss_db: 0.0 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub loss_start_db: f64,
    pub loss_stop_db: f64,
    pub loss_step_db: f64,
    pub channels_min: usize,
    pub channels_max: usize,
    /// Loss at which `sweep-channels` runs.
    pub channels_loss_db: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            loss_start_db: 0.0,
            loss_stop_db: 60.0,
            loss_step_db: 1.0,
            channels_min: 1,
            channels_max: 6,
            channels_loss_db: 30.0,
        }
    }
}

impl SweepSection {
    /// Loss points of the sweep, endpoints included.
    pub fn losses(&self) -> Result<Vec<f64>, CliError> {
        let (a, b, step) = (self.loss_start_db, self.loss_stop_db, self.loss_step_db);
        if !(a.is_finite() && b.is_finite() && a >= 0.0 && b >= a) {
            return Err(CliError::Config(format!("sweep: need 0 <= loss_start_db <= loss_stop_db, got {a}..{b}")));
        }
        if !(step > 0.0) {
            return Err(CliError::Config(format!("sweep: loss_step_db must be positive, got {step}")));
        }
        let n = ((b - a) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| a + step * i as f64).collect())
    }

    pub fn channel_counts(&self) -> Result<Vec<usize>, CliError> {
        if self.channels_min == 0 || self.channels_max < self.channels_min {
            return Err(CliError::Config(format!(
                "sweep: need 1 <= channels_min <= channels_max, got {}..{}",
                self.channels_min, self.channels_max
            )));
        }
        Ok((self.channels_min..=self.channels_max).collect())
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerSection {
    pub chi_min: f64,
    pub chi_max: f64,
    pub tolerance: f64,
    pub grid_points: usize,
}

impl Default for OptimizerSection {
    fn default() -> Self {
        let o = OptimizerSettings::<f64>::default();
        Self { chi_min: o.chi_min, chi_max: o.chi_max, tolerance: o.tolerance, grid_points: o.grid_points }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    pub topology: TopologyName,
    pub users: usize,
    /// Channels to allocate; defaults to the frequency-time capacity.
    pub channels: Option<usize>,
    pub first_itu_channel: i32,
    pub spacing_ghz: f64,
    /// Signal-side channel spacing used for the dispersion requirement.
    pub channel_spacing_nm: f64,
}

impl Default for NetworkSection {
    fn default() -> Self {
        let g = GridSpec::default();
        Self {
            topology: TopologyName::Ground,
            users: 4,
            channels: Some(6),
            first_itu_channel: g.first_itu_channel,
            spacing_ghz: g.spacing_ghz,
            channel_spacing_nm: 0.4,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MonthlySection {
    pub users: usize,
    pub passes: f64,
    pub pass_duration_s: f64,
    pub seconds_per_month: f64,
    pub ground_duty: f64,
}

impl Default for MonthlySection {
    fn default() -> Self {
        let m = MonthlyPlan::default();
        Self {
            users: 14,
            passes: m.passes,
            pass_duration_s: m.pass_duration_s,
            seconds_per_month: m.seconds_per_month,
            ground_duty: m.ground_duty,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub path: Option<PathBuf>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            CliError::Config(msg) => CliError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn satellite_detector(&self) -> DetectorSpec<f64> {
        self.detectors.satellite.resolve(DetectorSpec::satellite_apd())
    }

    pub fn ground_detector(&self) -> DetectorSpec<f64> {
        self.detectors.ground.resolve(DetectorSpec::ground_snspd())
    }

    pub fn optimizer(&self) -> OptimizerSettings<f64> {
        OptimizerSettings {
            chi_min: self.optimizer.chi_min,
            chi_max: self.optimizer.chi_max,
            tolerance: self.optimizer.tolerance,
            grid_points: self.optimizer.grid_points,
        }
    }

    fn base_scenario(&self) -> LinkScenario<f64> {
        LinkScenario {
            arm_a: self.ground_detector(),
            arm_b: self.satellite_detector(),
            arm_a_loss_db: 0.0,
            arm_b_loss_db: self.link.satellite_loss_db,
            rep_rate: self.source.rep_rate_hz,
            integration_time: self.link.integration_time_s,
            f_ec: self.link.f_ec,
            dim: self.source.dim,
            chi_max: self.optimizer.chi_max,
        }
    }

    /// Link at swept loss `loss_db`: the ground arm of a satellite link, or
    /// the total loss of a ground pair split evenly between both users.
    pub fn scenario_at(&self, loss_db: f64) -> LinkScenario<f64> {
        let base = self.base_scenario();
        match self.scenario.topology {
            TopologyName::Satellite => LinkScenario { arm_a_loss_db: loss_db, ..base },
            TopologyName::Ground => LinkScenario {
                arm_b: self.ground_detector(),
                arm_a_loss_db: loss_db / 2.0,
                arm_b_loss_db: loss_db / 2.0,
                ..base
            },
        }
    }

    /// Link along a physical path of the link budget.
    pub fn scenario_for_path(&self, path: LinkPath) -> LinkScenario<f64> {
        let (a, b) = satnet::netplan::arm_losses_db(&self.link.budget(), path);
        let base = self.base_scenario();
        match path {
            LinkPath::Satellite { .. } => LinkScenario { arm_a_loss_db: a, arm_b_loss_db: b, ..base },
            LinkPath::GroundPair { .. } => {
                LinkScenario { arm_b: self.ground_detector(), arm_a_loss_db: a, arm_b_loss_db: b, ..base }
            }
        }
    }

    pub fn grid(&self) -> GridSpec {
        GridSpec {
            pump_nm: self.source.pump_center_nm,
            first_itu_channel: self.network.first_itu_channel,
            spacing_ghz: self.network.spacing_ghz,
        }
    }

    /// Checks value ranges that would otherwise surface deep in a run.
    pub fn check(&self) -> Result<(), CliError> {
        let cfg = |e: &dyn std::fmt::Display| CliError::Config(e.to_string());
        self.source.spec().validate().map_err(|e| cfg(&e))?;
        if self.source.dim < 2 {
            return Err(CliError::Config(format!("source: dim must be at least 2, got {}", self.source.dim)));
        }
        self.satellite_detector().validate().map_err(|e| cfg(&format!("detectors.satellite: {e}")))?;
        self.ground_detector().validate().map_err(|e| cfg(&format!("detectors.ground: {e}")))?;
        self.link.budget().validate().map_err(|e| cfg(&format!("link: {e}")))?;
        if !(self.link.integration_time_s > 0.0) {
            return Err(CliError::Config("link: integration_time_s must be positive".into()));
        }
        if !(self.link.f_ec >= 0.0) {
            return Err(CliError::Config("link: f_ec must be non-negative".into()));
        }
        if self.scenario.n_channels == 0 {
            return Err(CliError::Config("scenario: n_channels must be at least 1".into()));
        }
        if !(self.scenario.loss_db.is_finite() && self.scenario.loss_db >= 0.0) {
            return Err(CliError::Config("scenario: loss_db must be non-negative".into()));
        }
        self.optimizer().validate().map_err(|e| cfg(&format!("optimizer: {e}")))?;
        self.sweep.losses()?;
        self.sweep.channel_counts()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let c = ScenarioConfig::from_toml("").unwrap();
        assert_eq!(c.source.rep_rate_hz, 80e6);
        assert_eq!(c.satellite_detector(), DetectorSpec::satellite_apd());
        assert_eq!(c.ground_detector(), DetectorSpec::ground_snspd());
        assert_eq!(c.link.satellite_loss_db, 40.0);
        c.check().unwrap();
    }

    #[test]
    fn partial_detector_override_keeps_preset() {
        let c = ScenarioConfig::from_toml("[detectors.satellite]\ndark_rate_cps = 500\nkind = \"bucket\"\n").unwrap();
        let d = c.satellite_detector();
        assert_eq!(d.dark_rate, 500.0);
        assert_eq!(d.dead_time, 1e-6);
    }

    #[test]
    fn unknown_key_reports_location() {
        let err = ScenarioConfig::from_toml("[link]\nsatelite_loss_db = 30\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("satelite_loss_db"), "{msg}");
        assert!(msg.contains("line 2"), "{msg}");
    }

    #[test]
    fn loss_grid_includes_endpoint() {
        let s = SweepSection { loss_start_db: 0.0, loss_stop_db: 1.0, loss_step_db: 0.1, ..SweepSection::default() };
        let l = s.losses().unwrap();
        assert_eq!(l.len(), 11);
        assert!((l[10] - 1.0).abs() < 1e-12);
        let bad = SweepSection { loss_step_db: 0.0, ..SweepSection::default() };
        assert!(bad.losses().is_err());
    }

    #[test]
    fn ground_topology_splits_loss() {
        let c = ScenarioConfig::from_toml("[scenario]\ntopology = \"ground\"\n").unwrap();
        let s = c.scenario_at(20.0);
        assert_eq!((s.arm_a_loss_db, s.arm_b_loss_db), (10.0, 10.0));
        assert_eq!(s.arm_b, DetectorSpec::ground_snspd());
    }
}
