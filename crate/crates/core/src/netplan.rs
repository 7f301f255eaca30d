//! Network-layer planning: frequency-time channel capacity, wavelength pairs,
//! user allocation for both network configurations, link budgets and the
//! monthly key accounting.

use std::fmt::Write as _;

use thiserror::Error;

use crate::scalar::Real;

/// Speed of light in nm·THz.
const C_NM_THZ: f64 = 299_792.458;

/// ITU DWDM channel `n` sits at `190 THz + n·100 GHz`.
const ITU_BASE_THZ: f64 = 190.0;
const ITU_SPACING_THZ: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("timing jitter must be positive, got {0}")]
    NonPositiveJitter(f64),
    #[error("channel spacing must be positive, got {0}")]
    NonPositiveSpacing(f64),
    #[error("nonphysical wavelength pairing: pump {pump_nm} nm, idler {idler_nm} nm")]
    Nonphysical { pump_nm: f64, idler_nm: f64 },
    #[error("{topology:?} topology with {users} users needs {needed} channels, only {available} available")]
    InsufficientChannels { topology: TopologyKind, users: usize, needed: usize, available: usize },
    #[error("at least {min} users required, got {got}")]
    TooFewUsers { min: usize, got: usize },
    #[error("at least one channel required")]
    NoChannels,
    #[error("invalid link budget: {0}")]
    InvalidBudget(String),
}

/// Frequency-time channels that fit in one pulse period: `⌊period/jitter⌋`
/// slots minus one guard slot, never below 1.
pub fn channel_capacity<T: Real>(rep_rate: T, jitter: T) -> Result<usize, PlanError> {
    if !(jitter > T::zero() && jitter.is_finite()) {
        return Err(PlanError::NonPositiveJitter(jitter.to_f64().unwrap_or(f64::NAN)));
    }
    let slots = (T::one() / (rep_rate * jitter) + T::lit(1e-9)).floor();
    let slots = slots.to_usize().unwrap_or(usize::MAX);
    Ok(slots.saturating_sub(1).max(1))
}

/// Minimum group-delay dispersion (ps/nm) separating adjacent channels by one
/// jitter width.
pub fn min_gdd(jitter_ps: f64, channel_spacing_nm: f64) -> Result<f64, PlanError> {
    if !(channel_spacing_nm > 0.0) {
        return Err(PlanError::NonPositiveSpacing(channel_spacing_nm));
    }
    Ok(jitter_ps / channel_spacing_nm)
}

/// `n(n−1)/2`.
pub fn pair_count(users: usize) -> usize {
    users * users.saturating_sub(1) / 2
}

/// Largest user count whose full pairwise mesh fits in `channels`, and the
/// channels left over.
pub fn max_users(channels: usize) -> Result<(usize, usize), PlanError> {
    if channels == 0 {
        return Err(PlanError::NoChannels);
    }
    let mut n = 2;
    while pair_count(n + 1) <= channels {
        n += 1;
    }
    Ok((n, channels - pair_count(n)))
}

/// Signal wavelength conjugate to `idler_nm` under energy conservation,
/// `1/signal = 1/pump − 1/idler`.
pub fn pair_wavelengths(pump_nm: f64, idler_nm: f64) -> Result<f64, PlanError> {
    let inv = 1.0 / pump_nm - 1.0 / idler_nm;
    if !(pump_nm > 0.0 && idler_nm > pump_nm && inv > 0.0) {
        return Err(PlanError::Nonphysical { pump_nm, idler_nm });
    }
    Ok(1.0 / inv)
}

/// Wavelength of ITU 100 GHz channel `n`.
pub fn itu_wavelength_nm(channel: i32) -> f64 {
    C_NM_THZ / (ITU_BASE_THZ + ITU_SPACING_THZ * f64::from(channel))
}

/// Wavelength of the `k`-th channel of a grid starting at ITU channel
/// `first` with spacing `spacing_ghz`.
pub fn grid_wavelength_nm(first: i32, spacing_ghz: f64, k: usize) -> f64 {
    let f = ITU_BASE_THZ + ITU_SPACING_THZ * f64::from(first) + spacing_ghz * 1e-3 * k as f64;
    C_NM_THZ / f
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TopologyKind {
    /// Every ground user linked to the satellite receiver.
    SatellitePass,
    /// Fully connected pairwise ground mesh.
    Ground,
}

/// Who uses a channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Assignment {
    /// Ground user (index) paired with the satellite.
    Satellite(usize),
    /// Two ground users.
    Pair(usize, usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    pub kind: TopologyKind,
    pub n_users: usize,
    /// Entry `i` serves channel `i`; `None` marks an idle channel.
    pub assignment: Vec<Option<Assignment>>,
}

impl Topology {
    /// Channels used by `user`.
    pub fn channels_of(&self, user: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, a)| match a {
                Some(Assignment::Satellite(u)) => *u == user,
                Some(Assignment::Pair(x, y)) => *x == user || *y == user,
                None => false,
            })
            .map(|(i, _)| i)
            .collect()
    }
}

/// Circulant ordering of all user pairs: neighbours first (`i, i+1`), then
/// pairs at distance 2, and so on.
pub fn pairwise_order(n_users: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(pair_count(n_users));
    for d in 1..=n_users / 2 {
        let starts = if 2 * d == n_users { n_users / 2 } else { n_users };
        for i in 0..starts {
            let j = (i + d) % n_users;
            pairs.push((i.min(j), i.max(j)));
        }
    }
    pairs
}

/// Assigns `channels` to users.
///
/// Ground: the first `n(n−1)/2` channels follow [`pairwise_order`]; surplus
/// channels repeat that order, giving the leading pairs preferred
/// connections. SatellitePass: channel `i` goes to user `i mod n`, so surplus
/// channels land on the first users.
pub fn allocate(kind: TopologyKind, n_users: usize, channels: usize) -> Result<Topology, PlanError> {
    if n_users < 2 && kind == TopologyKind::Ground {
        return Err(PlanError::TooFewUsers { min: 2, got: n_users });
    }
    if n_users == 0 {
        return Err(PlanError::TooFewUsers { min: 1, got: 0 });
    }
    let needed = match kind {
        TopologyKind::Ground => pair_count(n_users),
        TopologyKind::SatellitePass => n_users,
    };
    if channels < needed {
        return Err(PlanError::InsufficientChannels { topology: kind, users: n_users, needed, available: channels });
    }
    let assignment = match kind {
        TopologyKind::Ground => {
            let pairs = pairwise_order(n_users);
            (0..channels).map(|i| {
                let (a, b) = pairs[i % pairs.len()];
                Some(Assignment::Pair(a, b))
            }).collect()
        }
        TopologyKind::SatellitePass => (0..channels).map(|i| Some(Assignment::Satellite(i % n_users))).collect(),
    };
    Ok(Topology { kind, n_users, assignment })
}

/// Correlated signal/idler wavelengths of one channel.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPair {
    pub signal_nm: f64,
    pub idler_nm: f64,
    pub itu_channel: Option<i32>,
    pub time_slot: Option<usize>,
}

impl ChannelPair {
    /// Relative violation of `1/pump = 1/signal + 1/idler`.
    pub fn energy_mismatch(&self, pump_nm: f64) -> f64 {
        let p = 1.0 / pump_nm;
        (p - (1.0 / self.signal_nm + 1.0 / self.idler_nm)).abs() / p
    }
}

/// Grid the idler channels are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    pub pump_nm: f64,
    /// ITU channel number of the first idler channel.
    pub first_itu_channel: i32,
    pub spacing_ghz: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { pump_nm: 521.4, first_itu_channel: 40, spacing_ghz: 100.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelPlan {
    pub channels: Vec<ChannelPair>,
    pub topology: Topology,
    pub user_names: Vec<String>,
}

/// Conventional names for the first users; later users are numbered.
pub fn user_name(index: usize) -> String {
    const NAMES: [&str; 4] = ["Alice", "Bob", "Charlie", "Dana"];
    NAMES.get(index).map_or_else(|| format!("User{}", index + 1), |s| s.to_string())
}

/// Builds the wavelength plan: idlers climb the grid from the first channel
/// (wavelength decreasing), signals follow from energy conservation.
pub fn build_plan(kind: TopologyKind, n_users: usize, channels: usize, grid: &GridSpec) -> Result<ChannelPlan, PlanError> {
    let topology = allocate(kind, n_users, channels)?;
    let on_itu_grid = (grid.spacing_ghz - 100.0).abs() < 1e-9;
    let channels = (0..channels)
        .map(|k| {
            let idler_nm = grid_wavelength_nm(grid.first_itu_channel, grid.spacing_ghz, k);
            Ok(ChannelPair {
                signal_nm: pair_wavelengths(grid.pump_nm, idler_nm)?,
                idler_nm,
                itu_channel: on_itu_grid.then_some(grid.first_itu_channel + k as i32),
                time_slot: (kind == TopologyKind::SatellitePass).then_some(k),
            })
        })
        .collect::<Result<Vec<_>, PlanError>>()?;
    let user_names = (0..n_users).map(user_name).collect();
    Ok(ChannelPlan { channels, topology, user_names })
}

/// CSV header of [`plan_to_csv`].
pub const PLAN_CSV_HEADER: &str = "channel_index,signal_nm,idler_nm,itu_channel,time_slot,user_a,user_b";

/// Serializes a plan; channel indices are 1-based, empty fields for absent values.
pub fn plan_to_csv(plan: &ChannelPlan) -> String {
    let mut out = String::from(PLAN_CSV_HEADER);
    out.push('\n');
    for (i, (ch, a)) in plan.channels.iter().zip(&plan.topology.assignment).enumerate() {
        let (ua, ub) = match a {
            Some(Assignment::Pair(x, y)) => (plan.user_names[*x].clone(), plan.user_names[*y].clone()),
            Some(Assignment::Satellite(u)) => (plan.user_names[*u].clone(), "Satellite".to_string()),
            None => (String::new(), String::new()),
        };
        let itu = ch.itu_channel.map(|c| c.to_string()).unwrap_or_default();
        let slot = ch.time_slot.map(|c| c.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{:.3},{:.3},{itu},{slot},{ua},{ub}", i + 1, ch.signal_nm, ch.idler_nm);
    }
    out
}

/// Fibre and free-space losses of the deployment.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkBudget {
    /// Distance from the source site to each ground user.
    pub fibre_length_km: f64,
    /// Attenuation at the signal wavelength (787.5 nm band).
    pub atten_signal_db_per_km: f64,
    /// Attenuation at the idler wavelength (C band).
    pub atten_idler_db_per_km: f64,
    pub satellite_loss_db: f64,
}

impl Default for LinkBudget {
    fn default() -> Self {
        Self { fibre_length_km: 16.0, atten_signal_db_per_km: 3.5, atten_idler_db_per_km: 0.2, satellite_loss_db: 40.0 }
    }
}

impl LinkBudget {
    pub fn validate(&self) -> Result<(), PlanError> {
        for (name, v) in [
            ("fibre_length_km", self.fibre_length_km),
            ("atten_signal_db_per_km", self.atten_signal_db_per_km),
            ("atten_idler_db_per_km", self.atten_idler_db_per_km),
            ("satellite_loss_db", self.satellite_loss_db),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlanError::InvalidBudget(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }
}

/// A photon path through the network.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkPath {
    /// Two ground users served from the source: signal over `signal_km`,
    /// idler over `idler_km`.
    GroundPair { signal_km: f64, idler_km: f64 },
    /// Idler to a ground user over `idler_km`, signal up to the satellite.
    Satellite { idler_km: f64 },
}

/// Per-arm losses `(arm A, arm B)` in dB. Arm A is the idler; arm B is the
/// signal (ground fibre or satellite uplink).
pub fn arm_losses_db(budget: &LinkBudget, path: LinkPath) -> (f64, f64) {
    match path {
        LinkPath::GroundPair { signal_km, idler_km } => {
            (idler_km * budget.atten_idler_db_per_km, signal_km * budget.atten_signal_db_per_km)
        }
        LinkPath::Satellite { idler_km } => (idler_km * budget.atten_idler_db_per_km, budget.satellite_loss_db),
    }
}

/// Total loss of a path in dB.
pub fn link_loss_db(budget: &LinkBudget, path: LinkPath) -> f64 {
    let (a, b) = arm_losses_db(budget, path);
    a + b
}

/// Inputs of the monthly key accounting.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthlyPlan {
    pub passes: f64,
    pub pass_duration_s: f64,
    pub seconds_per_month: f64,
    /// Fraction of the month the ground network runs.
    pub ground_duty: f64,
    /// Frequency-time channels a user holds during a pass.
    pub channels_for_user: usize,
}

impl Default for MonthlyPlan {
    fn default() -> Self {
        Self { passes: 10.0, pass_duration_s: 100.0, seconds_per_month: 30.0 * 86_400.0, ground_duty: 1.0, channels_for_user: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonthlyKey {
    pub ground_bits: f64,
    pub satellite_bits: f64,
}

/// Monthly key from a ground-pair key rate and a per-channel satellite key rate (bits/s).
pub fn monthly_key(plan: &MonthlyPlan, ground_skr_bps: f64, satellite_skr_per_channel_bps: f64) -> MonthlyKey {
    MonthlyKey {
        ground_bits: ground_skr_bps * plan.seconds_per_month * plan.ground_duty,
        satellite_bits: satellite_skr_per_channel_bps
            * plan.passes
            * plan.pass_duration_s
            * plan.channels_for_user as f64,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn capacity_cases() {
        assert_eq!(channel_capacity(80e6, 130e-12).unwrap(), 95);
        assert_eq!(channel_capacity(80e6, 12.5e-9).unwrap(), 1);
        assert_eq!(channel_capacity(80e6, 20e-9).unwrap(), 1);
        assert_eq!(channel_capacity(80e6, 35e-12).unwrap(), 356);
        assert!(channel_capacity(80e6, 0.0).is_err());
    }

    #[test]
    fn gdd_cases() {
        assert_abs_diff_eq!(min_gdd(130.0, 0.4).unwrap(), 325.0, epsilon = 1e-12);
        assert_eq!(min_gdd(0.0, 0.4).unwrap(), 0.0);
        assert_abs_diff_eq!(min_gdd(130.0, 0.2).unwrap(), 650.0, epsilon = 1e-12);
        assert!(min_gdd(130.0, 0.0).is_err());
    }

    #[test]
    fn user_capacity_cases() {
        assert_eq!(max_users(95).unwrap(), (14, 4));
        assert_eq!(max_users(6).unwrap(), (4, 0));
        assert_eq!(max_users(1).unwrap(), (2, 0));
        assert!(max_users(0).is_err());
    }

    #[test]
    fn wavelength_pairing() {
        assert_abs_diff_eq!(pair_wavelengths(521.4, 1543.2).unwrap(), 787.46, epsilon = 0.01);
        assert_abs_diff_eq!(pair_wavelengths(521.4, 1e12).unwrap(), 521.4, epsilon = 1e-6);
        assert_abs_diff_eq!(pair_wavelengths(521.4, 1545.32).unwrap(), 786.90, epsilon = 0.01);
        assert!(pair_wavelengths(521.4, 500.0).is_err());
    }

    #[test]
    fn itu_grid_values() {
        for (ch, nm) in [(40, 1545.32), (41, 1544.53), (42, 1543.73), (43, 1542.94), (44, 1542.14), (45, 1541.35)] {
            assert_abs_diff_eq!(itu_wavelength_nm(ch), nm, epsilon = 0.005);
        }
    }

    #[test]
    fn four_user_ground_mesh() {
        let t = allocate(TopologyKind::Ground, 4, 6).unwrap();
        let pairs: Vec<_> = t.assignment.iter().map(|a| a.unwrap()).collect();
        use Assignment::Pair;
        assert_eq!(pairs, vec![Pair(0, 1), Pair(1, 2), Pair(2, 3), Pair(0, 3), Pair(0, 2), Pair(1, 3)]);
    }

    #[test]
    fn four_user_satellite_pass() {
        let t = allocate(TopologyKind::SatellitePass, 4, 6).unwrap();
        assert_eq!(t.channels_of(0), vec![0, 4]);
        assert_eq!(t.channels_of(1), vec![1, 5]);
        assert_eq!(t.channels_of(2), vec![2]);
        assert_eq!(t.channels_of(3), vec![3]);
    }

    #[test]
    fn allocation_errors() {
        assert!(matches!(allocate(TopologyKind::Ground, 15, 95), Err(PlanError::InsufficientChannels { needed: 105, .. })));
        assert!(matches!(allocate(TopologyKind::SatellitePass, 5, 4), Err(PlanError::InsufficientChannels { .. })));
        assert_eq!(allocate(TopologyKind::Ground, 2, 1).unwrap().assignment, vec![Some(Assignment::Pair(0, 1))]);
    }

    #[test]
    fn plan_csv_layout() {
        let plan = build_plan(TopologyKind::Ground, 4, 6, &GridSpec::default()).unwrap();
        let csv = plan_to_csv(&plan);
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], PLAN_CSV_HEADER);
        assert_eq!(lines.len(), 7);
        assert!(lines[1].starts_with("1,786.9"));
        assert!(lines[1].ends_with(",40,,Alice,Bob"));
        let sat = plan_to_csv(&build_plan(TopologyKind::SatellitePass, 4, 6, &GridSpec::default()).unwrap());
        assert!(sat.lines().nth(5).unwrap().ends_with(",44,4,Alice,Satellite"));
    }

    #[test]
    fn link_losses() {
        let zero = LinkBudget { satellite_loss_db: 0.0, ..LinkBudget::default() };
        assert_eq!(link_loss_db(&zero, LinkPath::GroundPair { signal_km: 0.0, idler_km: 0.0 }), 0.0);
        let b = LinkBudget::default();
        assert_abs_diff_eq!(link_loss_db(&b, LinkPath::GroundPair { signal_km: 0.0, idler_km: 16.0 }), 3.2, epsilon = 1e-12);
        assert_abs_diff_eq!(link_loss_db(&b, LinkPath::Satellite { idler_km: 16.0 }), 43.2, epsilon = 1e-12);
    }

    #[test]
    fn monthly_arithmetic() {
        let plan = MonthlyPlan { channels_for_user: 7, ..MonthlyPlan::default() };
        let k = monthly_key(&plan, 1000.0, 50.0);
        assert_abs_diff_eq!(k.ground_bits, 1000.0 * 2_592_000.0);
        assert_abs_diff_eq!(k.satellite_bits, 50.0 * 10.0 * 100.0 * 7.0);
        let none = MonthlyPlan { passes: 0.0, ..plan };
        assert_eq!(monthly_key(&none, 1000.0, 50.0).satellite_bits, 0.0);
    }

    proptest! {
        #[test]
        fn ground_mesh_is_complete(n in 2usize..20, extra in 0usize..10) {
            let t = allocate(TopologyKind::Ground, n, pair_count(n) + extra).unwrap();
            let base = &t.assignment[..pair_count(n)];
            let mut seen = std::collections::HashSet::new();
            for a in base {
                let Some(Assignment::Pair(x, y)) = a else { panic!("unassigned base channel") };
                prop_assert!(x < y);
                prop_assert!(seen.insert((*x, *y)));
            }
            prop_assert_eq!(seen.len(), pair_count(n));
            for u in 0..n {
                let touching = base.iter().filter(|a| matches!(a, Some(Assignment::Pair(x, y)) if *x == u || *y == u)).count();
                prop_assert_eq!(touching, n - 1);
            }
        }

        #[test]
        fn satellite_pass_covers_everyone(n in 1usize..20, extra in 0usize..30) {
            let t = allocate(TopologyKind::SatellitePass, n, n + extra).unwrap();
            for u in 0..n {
                prop_assert!(!t.channels_of(u).is_empty());
            }
        }

        #[test]
        fn max_users_inverts_pair_count(n in 2usize..=20) {
            prop_assert_eq!(max_users(pair_count(n)).unwrap(), (n, 0));
        }

        #[test]
        fn capacity_monotone(j in 1e-12f64..1e-8, dj in 0.0f64..1e-9, rate in 1e6f64..1e9, dr in 0.0f64..1e6) {
            prop_assert!(channel_capacity(rate, j + dj).unwrap() <= channel_capacity(rate, j).unwrap());
            // a lower rep rate means a longer period
            prop_assert!(channel_capacity((rate - dr).max(1e5), j).unwrap() >= channel_capacity(rate, j).unwrap());
        }

        #[test]
        fn pairing_conserves_energy(pump in 400.0f64..600.0, idler in 1200.0f64..1700.0) {
            let signal = pair_wavelengths(pump, idler).unwrap();
            let pair = ChannelPair { signal_nm: signal, idler_nm: idler, itu_channel: None, time_slot: None };
            prop_assert!(pair.energy_mismatch(pump) < 1e-13);
        }
    }
}
