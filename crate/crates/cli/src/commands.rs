//! Subcommand bodies. Each returns the CSV text and a short summary; floats
//! are written with nine significant digits so reruns are byte-identical.

use std::fmt::Write as _;

use rayon::prelude::*;

use satnet::detect::DetectorKind;
use satnet::keyrate::{self, LinkScenario, MultiplexMode, MultiplexResult};
use satnet::netplan::{self, LinkPath, MonthlyPlan, TopologyKind};

use crate::config::{ModeName, ScenarioConfig, TopologyName};
use crate::{CliError, Report};

/// Header shared by `sweep-loss`, `sweep-channels` and `optimize-chi`.
pub const RATE_HEADER: &str = "loss_db,n_channels,mode,chi_opt,qber,twofold_rate_cps,skr_bps";

pub const COMPARE_HEADER: &str =
    "loss_db,n_channels,mode,chi_opt_bucket,skr_bucket_bps,chi_opt_pnr,skr_pnr_bps,relative_difference";

pub const MONTHLY_HEADER: &str =
    "configuration,loss_a_db,loss_b_db,n_channels,mode,chi_opt,qber,skr_bps_per_channel,channels_per_user,seconds,total_bits";

/// Fixed scientific notation with nine significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn optimize(cfg: &ScenarioConfig, scenario: &LinkScenario<f64>, n: usize) -> Result<MultiplexResult<f64>, CliError> {
    Ok(keyrate::optimize_multiplexed(scenario, n, cfg.scenario.mode.into(), &cfg.optimizer())?)
}

fn rate_row(loss_db: f64, n: usize, mode: ModeName, r: &MultiplexResult<f64>) -> String {
    let a = &r.aggregate;
    format!(
        "{},{n},{},{},{},{},{}",
        num(loss_db),
        mode.as_str(),
        num(a.chi_opt.unwrap_or(f64::NAN)),
        num(a.qber),
        num(a.twofold_rate),
        num(a.skr)
    )
}

fn describe(cfg: &ScenarioConfig) -> String {
    let what = match cfg.scenario.topology {
        TopologyName::Satellite => "ground-arm loss, satellite arm fixed",
        TopologyName::Ground => "total loss split between two ground users",
    };
    format!("{what}; mode {}", cfg.scenario.mode.as_str())
}

/// Optimized key rate at every loss of the sweep.
pub fn sweep_loss(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let losses = cfg.sweep.losses()?;
    let n = cfg.scenario.n_channels;
    let results: Vec<_> = losses
        .par_iter()
        .map(|&loss| optimize(cfg, &cfg.scenario_at(loss), n))
        .collect::<Result<_, _>>()?;
    let mut csv = format!("{RATE_HEADER}\n");
    for (loss, r) in losses.iter().zip(&results) {
        let _ = writeln!(csv, "{}", rate_row(*loss, n, cfg.scenario.mode, r));
    }
    let last_positive = losses.iter().zip(&results).filter(|(_, r)| r.aggregate.skr > 0.0).map(|(l, _)| *l).last();
    let mut summary = format!("sweep-loss: {} points, {n} channel(s), {}\n", losses.len(), describe(cfg));
    match last_positive {
        Some(l) => {
            let _ = writeln!(summary, "largest swept loss with positive key: {l} dB");
        }
        None => summary.push_str("no positive key anywhere in the sweep\n"),
    }
    Ok(Report { csv: Some(csv), summary })
}

/// Optimized key rate for every channel count of the sweep.
pub fn sweep_channels(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let counts = cfg.sweep.channel_counts()?;
    let loss = cfg.sweep.channels_loss_db;
    let scenario = cfg.scenario_at(loss);
    let results: Vec<_> = counts.par_iter().map(|&n| optimize(cfg, &scenario, n)).collect::<Result<_, _>>()?;
    let mut csv = format!("{RATE_HEADER}\n");
    for (n, r) in counts.iter().zip(&results) {
        let _ = writeln!(csv, "{}", rate_row(loss, *n, cfg.scenario.mode, r));
    }
    let mut summary = format!("sweep-channels: n = {}..={} at {loss} dB, {}\n", counts[0], counts[counts.len() - 1], describe(cfg));
    if let (Some(first), Some(last)) = (results.first(), results.last()) {
        if first.aggregate.skr > 0.0 {
            let _ = writeln!(
                summary,
                "key rate ratio n={} / n={}: {:.4}",
                last.n_channels,
                first.n_channels,
                last.aggregate.skr / first.aggregate.skr
            );
        }
    }
    Ok(Report { csv: Some(csv), summary })
}

fn with_ground_kind(cfg: &ScenarioConfig, scenario: &LinkScenario<f64>, kind: DetectorKind) -> LinkScenario<f64> {
    let mut s = scenario.clone();
    s.arm_a.kind = kind;
    if cfg.scenario.topology == TopologyName::Ground {
        s.arm_b.kind = kind;
    }
    s
}

/// `(pnr − bucket) / bucket`; zero when both vanish.
fn relative_difference(bucket: f64, pnr: f64) -> f64 {
    if bucket > 0.0 {
        (pnr - bucket) / bucket
    } else if pnr > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

/// Bucket against number-resolving detectors at the ground nodes, per loss.
pub fn compare_detectors(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let losses = cfg.sweep.losses()?;
    let n = cfg.scenario.n_channels;
    let results: Vec<_> = losses
        .par_iter()
        .map(|&loss| {
            let s = cfg.scenario_at(loss);
            let bucket = optimize(cfg, &with_ground_kind(cfg, &s, DetectorKind::Bucket), n)?;
            let pnr = optimize(cfg, &with_ground_kind(cfg, &s, DetectorKind::Pnr), n)?;
            Ok((bucket.aggregate, pnr.aggregate))
        })
        .collect::<Result<_, CliError>>()?;
    let mut csv = format!("{COMPARE_HEADER}\n");
    let mut worst_high_loss: f64 = 0.0;
    for (loss, (b, p)) in losses.iter().zip(&results) {
        let rel = relative_difference(b.skr, p.skr);
        if *loss >= 30.0 {
            worst_high_loss = worst_high_loss.max(rel.abs());
        }
        let _ = writeln!(
            csv,
            "{},{n},{},{},{},{},{},{}",
            num(*loss),
            cfg.scenario.mode.as_str(),
            num(b.chi_opt.unwrap_or(f64::NAN)),
            num(b.skr),
            num(p.chi_opt.unwrap_or(f64::NAN)),
            num(p.skr),
            num(rel)
        );
    }
    let summary = format!(
        "compare-detectors: {} points, {}\nlargest |relative difference| at >= 30 dB: {:.3e}\n",
        losses.len(),
        describe(cfg),
        worst_high_loss
    );
    Ok(Report { csv: Some(csv), summary })
}

/// Frequency-time channels the satellite detector jitter allows.
fn capacity(cfg: &ScenarioConfig) -> Result<usize, CliError> {
    Ok(netplan::channel_capacity(cfg.source.rep_rate_hz, cfg.satellite_detector().jitter)?)
}

/// Channel plan for the configured network.
pub fn plan_network(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let cap = capacity(cfg)?;
    let channels = cfg.network.channels.unwrap_or(cap);
    let kind: TopologyKind = cfg.network.topology.into();
    if kind == TopologyKind::SatellitePass && channels > cap {
        return Err(CliError::Infeasible(format!(
            "{channels} channels requested, the satellite detector resolves {cap}"
        )));
    }
    let plan = netplan::build_plan(kind, cfg.network.users, channels, &cfg.grid())?;
    let jitter_ps = cfg.satellite_detector().jitter * 1e12;
    let gdd = netplan::min_gdd(jitter_ps, cfg.network.channel_spacing_nm)?;
    let (max_users, surplus) = netplan::max_users(cap)?;
    let mut summary = format!(
        "plan-network: {:?} topology, {} users on {channels} channels\n",
        kind, cfg.network.users
    );
    let _ = writeln!(summary, "frequency-time capacity: {cap} channels");
    let _ = writeln!(summary, "minimum dispersion: {gdd:.1} ps/nm at {} nm spacing", cfg.network.channel_spacing_nm);
    let _ = writeln!(summary, "full ground mesh on {cap} channels: {max_users} users, {surplus} surplus");
    for (u, name) in plan.user_names.iter().enumerate() {
        let chans: Vec<String> = plan.topology.channels_of(u).iter().map(|c| (c + 1).to_string()).collect();
        let _ = writeln!(summary, "  {name}: channels {}", chans.join(" "));
    }
    Ok(Report { csv: Some(netplan::plan_to_csv(&plan)), summary })
}

/// Monthly key of a ground user pair and of a ground user during satellite passes.
pub fn monthly_budget(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let channels = capacity(cfg)?;
    let users = cfg.monthly.users;
    let km = cfg.link.fibre_length_km;
    let mode: MultiplexMode = cfg.scenario.mode.into();

    netplan::allocate(TopologyKind::Ground, users, channels)?;
    let ground = cfg.scenario_for_path(LinkPath::GroundPair { signal_km: km, idler_km: km });
    let ground_r = keyrate::optimize_multiplexed(&ground, 1, mode, &cfg.optimizer())?;

    let pass = netplan::allocate(TopologyKind::SatellitePass, users, channels)?;
    let per_user = pass.channels_of(0).len();
    let sat = cfg.scenario_for_path(LinkPath::Satellite { idler_km: km });
    let sat_r = keyrate::optimize_multiplexed(&sat, channels, mode, &cfg.optimizer())?;

    let plan = MonthlyPlan {
        passes: cfg.monthly.passes,
        pass_duration_s: cfg.monthly.pass_duration_s,
        seconds_per_month: cfg.monthly.seconds_per_month,
        ground_duty: cfg.monthly.ground_duty,
        channels_for_user: per_user,
    };
    let ground_skr = ground_r.per_channel[0].skr;
    let sat_skr = sat_r.per_channel[0].skr;
    let month = netplan::monthly_key(&plan, ground_skr, sat_skr);

    let mut csv = format!("{MONTHLY_HEADER}\n");
    let rows = [
        ("ground-pair", &ground, &ground_r, 1, plan.seconds_per_month * plan.ground_duty, month.ground_bits),
        ("satellite", &sat, &sat_r, per_user, plan.passes * plan.pass_duration_s, month.satellite_bits),
    ];
    for (name, s, r, used, seconds, bits) in rows {
        let c = &r.per_channel[0];
        let _ = writeln!(
            csv,
            "{name},{},{},{},{},{},{},{},{used},{},{}",
            num(s.arm_a_loss_db),
            num(s.arm_b_loss_db),
            r.n_channels,
            cfg.scenario.mode.as_str(),
            num(c.chi_opt.unwrap_or(f64::NAN)),
            num(c.qber),
            num(c.skr),
            num(seconds),
            num(bits)
        );
    }
    let summary = format!(
        "monthly-budget: {users} users, {channels} channels, {km} km fibre per user\n\
         ground pair: {:.3e} bits/month ({:.1} + {:.1} dB)\n\
         satellite user: {:.3e} bits/month ({per_user} channels, {:.1} + {:.1} dB)\n",
        month.ground_bits, ground.arm_a_loss_db, ground.arm_b_loss_db, month.satellite_bits, sat.arm_a_loss_db, sat.arm_b_loss_db
    );
    Ok(Report { csv: Some(csv), summary })
}

/// Single optimization at `[scenario] loss_db`.
pub fn optimize_chi(cfg: &ScenarioConfig) -> Result<Report, CliError> {
    let loss = cfg.scenario.loss_db;
    let n = cfg.scenario.n_channels;
    let r = optimize(cfg, &cfg.scenario_at(loss), n)?;
    let csv = format!("{RATE_HEADER}\n{}\n", rate_row(loss, n, cfg.scenario.mode, &r));
    let summary = format!(
        "optimize-chi: chi = {:.5}, skr = {:.4e} bit/s, qber = {:.4} ({})\n",
        r.aggregate.chi_opt.unwrap_or(f64::NAN),
        r.aggregate.skr,
        r.aggregate.qber,
        describe(cfg)
    );
    Ok(Report { csv: Some(csv), summary })
}

/// Lists the resolved configuration and every detected problem.
pub fn validate(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let mut issues = Vec::new();
    let src = cfg.source.spec();
    let sat = cfg.satellite_detector();
    let gnd = cfg.ground_detector();
    let opt = cfg.optimizer();

    let _ = writeln!(out, "[source]");
    let _ = writeln!(out, "  rep_rate_hz = {}", src.rep_rate_hz);
    let _ = writeln!(out, "  pump = {} nm (bandwidth {} nm)", src.pump_center_nm, src.pump_bandwidth_nm);
    let _ = writeln!(out, "  signal = {} nm (bandwidth {} nm)", src.signal_center_nm, src.signal_bandwidth_nm);
    let _ = writeln!(out, "  idler = {} nm (bandwidth {} nm)", src.idler_center_nm, src.idler_bandwidth_nm);
    let _ = writeln!(out, "  dim = {}", cfg.source.dim);
    for (name, d) in [("satellite", &sat), ("ground", &gnd)] {
        let _ = writeln!(out, "[detectors.{name}]");
        let _ = writeln!(
            out,
            "  kind = {:?}, efficiency = {}, dark_rate = {} cps, dead_time = {:e} s, jitter = {:e} s, window = {:e} s",
            d.kind, d.efficiency, d.dark_rate, d.dead_time, d.jitter, d.coincidence_window
        );
    }
    let l = &cfg.link;
    let _ = writeln!(out, "[link]");
    let _ = writeln!(
        out,
        "  satellite_loss = {} dB, fibre = {} km, attenuation = {} dB/km (signal), {} dB/km (idler)",
        l.satellite_loss_db, l.fibre_length_km, l.atten_signal_db_per_km, l.atten_idler_db_per_km
    );
    let _ = writeln!(out, "  integration_time = {} s, f_ec = {}", l.integration_time_s, l.f_ec);
    let _ = writeln!(
        out,
        "[scenario]\n  topology = {:?}, mode = {}, n_channels = {}, loss_db = {}",
        cfg.scenario.topology,
        cfg.scenario.mode.as_str(),
        cfg.scenario.n_channels,
        cfg.scenario.loss_db
    );
    let _ = writeln!(
        out,
        "[optimizer]\n  chi in [{}, {}], tolerance = {}, grid = {}",
        opt.chi_min, opt.chi_max, opt.tolerance, opt.grid_points
    );

    if let Err(e) = cfg.check() {
        issues.push(e.to_string());
    }
    if let Err(e) = src.validate() {
        let msg = format!("energy conservation: {e}");
        if !issues.contains(&msg) {
            issues.push(msg);
        }
    }
    let period = 1.0 / src.rep_rate_hz;
    let cap = if sat.jitter > 0.0 && src.rep_rate_hz > 0.0 {
        match netplan::channel_capacity(src.rep_rate_hz, sat.jitter) {
            Ok(c) => {
                if sat.jitter >= period {
                    issues.push(format!(
                        "warning: satellite jitter {:e} s is not shorter than the pulse period {:e} s; capacity {c}",
                        sat.jitter, period
                    ));
                }
                Some(c)
            }
            Err(e) => {
                issues.push(e.to_string());
                None
            }
        }
    } else {
        None
    };
    if let Some(c) = cap {
        let _ = writeln!(out, "frequency-time capacity: {c} channels");
        if cfg.scenario.mode == ModeName::TimeFrequency && cfg.scenario.n_channels > c {
            issues.push(format!("infeasible: {} channels exceed capacity {c}", cfg.scenario.n_channels));
        }
        let pairs = netplan::pair_count(cfg.monthly.users);
        if pairs > c {
            issues.push(format!(
                "infeasible: {} users need {pairs} channels for a full ground mesh, only {c} available",
                cfg.monthly.users
            ));
        }
        let channels = cfg.network.channels.unwrap_or(c);
        if let Err(e) = netplan::allocate(cfg.network.topology.into(), cfg.network.users, channels) {
            issues.push(format!("infeasible: network plan: {e}"));
        }
    }

    if issues.is_empty() {
        out.push_str("valid\n");
    } else {
        for i in &issues {
            let _ = writeln!(out, "{i}");
        }
        let _ = writeln!(out, "invalid ({} issue(s))", issues.len());
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick(extra: &str) -> ScenarioConfig {
        let text = format!("[optimizer]\ngrid_points = 12\ntolerance = 1e-3\n{extra}");
        ScenarioConfig::from_toml(&text).unwrap()
    }

    #[test]
    fn number_format_is_fixed() {
        assert_eq!(num(1.0), "1.00000000e0");
        assert_eq!(num(123456.789), "1.23456789e5");
        assert_eq!(num(0.0), "0.00000000e0");
    }

    #[test]
    fn sweep_loss_rows_echo_inputs() {
        let cfg = quick("[sweep]\nloss_start_db = 0\nloss_stop_db = 20\nloss_step_db = 10\n");
        let r = sweep_loss(&cfg).unwrap();
        let csv = r.csv.unwrap();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines[0], RATE_HEADER);
        assert_eq!(lines.len(), 4);
        assert!(lines[2].starts_with("1.00000000e1,1,time-frequency,"));
    }

    #[test]
    fn plan_network_default_matches_four_user_table() {
        let r = plan_network(&ScenarioConfig::default()).unwrap();
        let csv = r.csv.unwrap();
        let users: Vec<String> = csv.lines().skip(1).map(|l| l.rsplitn(3, ',').take(2).collect::<Vec<_>>().join("-")).collect();
        assert_eq!(users, ["Bob-Alice", "Charlie-Bob", "Dana-Charlie", "Dana-Alice", "Charlie-Alice", "Dana-Bob"]);
        assert!(r.summary.contains("capacity: 95"));
        assert!(r.summary.contains("325.0 ps/nm"));
        assert!(r.summary.contains("14 users, 4 surplus"));
    }

    #[test]
    fn oversized_ground_mesh_is_infeasible() {
        let cfg = quick("[network]\nusers = 15\nchannels = 95\n");
        let err = plan_network(&cfg).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn validate_reports() {
        assert!(validate(&ScenarioConfig::default()).ends_with("valid\n"));
        let slow = ScenarioConfig::from_toml("[detectors.satellite]\njitter_s = 2e-8\n").unwrap();
        assert!(validate(&slow).contains("warning: satellite jitter"));
        let crowded = ScenarioConfig::from_toml("[monthly]\nusers = 15\n").unwrap();
        let report = validate(&crowded);
        assert!(report.contains("15 users need 105 channels"), "{report}");
    }

    #[test]
    fn relative_difference_edge_cases() {
        assert_eq!(relative_difference(0.0, 0.0), 0.0);
        assert_eq!(relative_difference(2.0, 1.0), -0.5);
        assert!(relative_difference(0.0, 1.0).is_infinite());
    }
}
