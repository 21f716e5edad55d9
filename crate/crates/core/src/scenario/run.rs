use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Duration, Instant};

use super::{limit_command, ClampFlags, Command, IsoMode, ScenarioConfig, ScenarioError};
use crate::dynamics::{
    run_iso4138_continuous, run_iso4138_discrete, speed_controller, step, understeer_gradient, DriveInput,
    DynamicsError, Iso4138Options, SingleTrack, VehicleState,
};
use crate::fmt::num;
use crate::net::{check_sr_class, simulate, stats_csv, SimConfig, TrafficClass};
use crate::ptp::{run_sync_simulation, SyncConfig, SyncResult, SyncTopology};
use crate::sensors::{coverage_map, min_full_coverage_range, GridWindow, Modality, Rig, SweepOptions};
use crate::store::{calibration_from_rig, Map, PoseState, Recording, Ride, RideSource, RideStore};

pub const DYNAMICS_CSV_HEADER: &str = "time_s,x_m,y_m,psi_rad,vx_mps,vy_mps,yawrate_radps,delta_rad,fx_N";

/// Sample period of the recorded trajectory [s].
const TRACE_PERIOD: f64 = 0.01;

/// Lateral acceleration range used for the understeer gradient fit [m/s^2].
const LINEAR_RANGE: f64 = 4.0;

#[derive(Debug, Clone, PartialEq)]
pub enum SectionBody {
    Disabled,
    NotRun,
    Lines(Vec<String>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportSection {
    pub title: &'static str,
    pub body: SectionBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub name: String,
    pub seed: u64,
    pub mode: &'static str,
    pub ride_id: Option<String>,
    pub sections: Vec<ReportSection>,
    /// (passed, description)
    pub checks: Vec<(bool, String)>,
    /// Set when a subsystem aborted the run
    pub incomplete: Option<String>,
    pub effective_config: String,
    /// Wall-clock time; not part of the rendered text
    pub runtime: Duration,
}

impl ScenarioReport {
    fn new(cfg: &ScenarioConfig) -> Self {
        let section = |title, on: bool| ReportSection {
            title,
            body: if on { SectionBody::NotRun } else { SectionBody::Disabled },
        };
        Self {
            name: cfg.name.clone(),
            seed: cfg.seed,
            mode: cfg.mode.name(),
            ride_id: None,
            sections: vec![
                section("dynamics", true),
                section("iso4138", cfg.iso4138.is_some()),
                section("coverage", cfg.coverage.is_some()),
                section("ptp", cfg.ptp.is_some()),
                section("network", cfg.network.is_some()),
                section("store", cfg.store.is_some()),
            ],
            checks: Vec::new(),
            incomplete: None,
            effective_config: cfg.effective_toml(),
            runtime: Duration::ZERO,
        }
    }

    fn fill(&mut self, title: &str, lines: Vec<String>) {
        if let Some(s) = self.sections.iter_mut().find(|s| s.title == title) {
            s.body = SectionBody::Lines(lines);
        }
    }

    pub fn section(&self, title: &str) -> Option<&ReportSection> {
        self.sections.iter().find(|s| s.title == title)
    }

    pub fn passed(&self) -> bool {
        self.incomplete.is_none() && self.checks.iter().all(|c| c.0)
    }

    /// 0 when everything passed, 3 when a check failed. Aborted runs carry
    /// their own code on the error.
    pub fn exit_code(&self) -> i32 {
        if self.checks.iter().all(|c| c.0) {
            0
        } else {
            3
        }
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "scenario: {}", self.name);
        let _ = writeln!(out, "seed: {}", self.seed);
        let _ = writeln!(out, "mode: {}", self.mode);
        let _ = writeln!(out, "ride: {}", self.ride_id.as_deref().unwrap_or("none"));
        let status = match &self.incomplete {
            Some(e) => format!("INCOMPLETE ({e})"),
            None if self.passed() => "ok".into(),
            None => format!("FAIL ({} failed checks)", self.checks.iter().filter(|c| !c.0).count()),
        };
        let _ = writeln!(out, "status: {status}");
        for s in &self.sections {
            let _ = writeln!(out, "\n== {} ==", s.title);
            match &s.body {
                SectionBody::Disabled => out.push_str("disabled\n"),
                SectionBody::NotRun => out.push_str("not run\n"),
                SectionBody::Lines(lines) => {
                    for l in lines {
                        let _ = writeln!(out, "{l}");
                    }
                }
            }
        }
        out.push_str("\n== checks ==\n");
        if self.checks.is_empty() {
            out.push_str("none\n");
        }
        for (pass, what) in &self.checks {
            let _ = writeln!(out, "{} {what}", if *pass { "PASS" } else { "FAIL" });
        }
        out.push_str("\n== effective config ==\n");
        out.push_str(&self.effective_config);
        if !self.effective_config.ends_with('\n') {
            out.push('\n');
        }
        out
    }
}

#[derive(Debug)]
pub struct ScenarioRun {
    pub report: ScenarioReport,
    /// (file name, contents) of every CSV artifact
    pub artifacts: Vec<(String, String)>,
    pub store: Option<RideStore>,
}

#[derive(Debug)]
pub struct RunFailure {
    pub error: ScenarioError,
    pub partial: ScenarioRun,
}

/// Runs every enabled subsystem in a fixed order: dynamics, ISO 4138,
/// coverage, PTP, network, store.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<ScenarioRun, Box<RunFailure>> {
    let started = Instant::now();
    let mut run = ScenarioRun { report: ScenarioReport::new(cfg), artifacts: Vec::new(), store: None };
    let result = execute(cfg, &mut run);
    run.report.runtime = started.elapsed();
    match result {
        Ok(()) => Ok(run),
        Err(error) => {
            run.report.incomplete = Some(error.to_string());
            Err(Box::new(RunFailure { error, partial: run }))
        }
    }
}

fn execute(cfg: &ScenarioConfig, run: &mut ScenarioRun) -> Result<(), ScenarioError> {
    let model = cfg.load_vehicle()?;
    let rig = cfg.load_rig()?;

    let dynamics = run_dynamics(cfg, &model)?;
    run.report.fill("dynamics", dynamics.lines(cfg));
    run.artifacts.push(("dynamics.csv".into(), dynamics.csv()));

    if let Some(iso) = &cfg.iso4138 {
        let swa = iso.swa_deg.to_radians();
        let speeds: Vec<f64> = iso.speeds_kmh.iter().map(|v| v / 3.6).collect();
        let opts = Iso4138Options::default();
        let rep = match iso.mode {
            IsoMode::Discrete => run_iso4138_discrete(&model, swa, &speeds, &opts),
            IsoMode::Continuous => run_iso4138_continuous(&model, swa, iso.accel_rate, &speeds, &opts),
        }
        .map_err(dynamics_error)?;
        let converged = rep.converged_points().count();
        let mut lines = vec![
            format!(
                "test: {} at steering-wheel angle {} deg",
                match iso.mode {
                    IsoMode::Discrete => "discrete speed steps".to_string(),
                    IsoMode::Continuous => format!("continuous ramp at {} m/s^2", num(iso.accel_rate)),
                },
                num(iso.swa_deg)
            ),
            format!("points: {}, converged: {converged}, flagged: {}", rep.points.len(), rep.points.len() - converged),
        ];
        if let Some(p) = rep.converged_points().max_by(|a, b| a.lateral_accel.abs().total_cmp(&b.lateral_accel.abs()))
        {
            lines.push(format!(
                "max lateral accel: {} m/s^2 at {} m/s",
                num(p.lateral_accel),
                num(p.speed)
            ));
        }
        match understeer_gradient(&rep, &model.params, LINEAR_RANGE) {
            Ok(k) => lines.push(format!("understeer gradient: {} rad/(m/s^2)", num(k))),
            Err(e) => lines.push(format!("understeer gradient: n/a ({e})")),
        }
        for p in rep.points.iter().filter(|p| !p.converged) {
            lines.push(format!("not converged at {} m/s", num(p.speed)));
        }
        run.report.fill("iso4138", lines);
        run.artifacts.push(("iso4138.csv".into(), rep.to_csv()));
    }

    if let Some(c) = &cfg.coverage {
        let (lines, csv) = coverage_section(&rig, c)?;
        run.report.fill("coverage", lines);
        run.artifacts.push(("coverage.csv".into(), csv));
    }

    let mut clocks = None;
    if let Some(p) = &cfg.ptp {
        let ocs: Vec<String> = rig.devices().into_iter().map(String::from).collect();
        let topo = SyncTopology::vehicle_chain(&ocs, &p.chain).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
        let sync = SyncConfig {
            duration: p.duration,
            sync_interval: p.sync_interval,
            seed: cfg.seed,
            trace_interval: Some(p.trace_interval),
            ..SyncConfig::default()
        };
        let res = run_sync_simulation(&topo, &sync).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
        let s = &res.summary;
        let mut lines = vec![
            format!("clocks: {} (gm, bc, tc and {} ordinary)", res.node_ids.len(), ocs.len()),
            format!("simulated: {} s at sync interval {} s", num(p.duration), num(p.sync_interval)),
            format!("exchanges: {}", s.exchanges),
            format!("max |offset|: {} s", num(s.max_abs_offset)),
            format!("steady-state rms offset: {} s", num(s.steady_rms)),
        ];
        if let Some(w) = s.nodes.iter().max_by(|a, b| a.steady_rms.total_cmp(&b.steady_rms)) {
            lines.push(format!("worst clock: {} (rms {} s)", w.id, num(w.steady_rms)));
        }
        run.report.fill("ptp", lines);
        run.artifacts.push(("ptp_offsets.csv".into(), res.to_csv()));
        if p.stamp_sensors {
            clocks = Some(OffsetTable::new(&res));
        }
    }

    if cfg.network.is_some() {
        let (lines, checks, csv) = run_network(cfg, &rig)?;
        run.report.fill("network", lines);
        run.report.checks.extend(checks);
        run.artifacts.push(("net_stats.csv".into(), csv));
    }

    if let Some(sc) = &cfg.store {
        let measurements: Vec<Vec<f64>> = rig
            .primary_specs()
            .iter()
            .map(|m| sensor_timestamps(&m.spec.device, m.spec.rate, cfg.duration, clocks.as_ref()))
            .collect();
        let rec = Recording {
            ride: Ride {
                id: sc.ride_id.clone(),
                start: 0.0,
                end: cfg.duration,
                vehicle: cfg.vehicle.clone(),
                rig: cfg.rig.clone(),
                source: RideSource::Simulation,
                map_id: sc.map_id.clone(),
            },
            map: Map { id: sc.map_id.clone(), name: sc.map_id.clone(), reference: format!("map://{}", sc.map_id) },
            sensors: calibration_from_rig(&rig, &sc.ride_id),
            measurements,
            poses: dynamics.poses(),
            scene_duration: sc.scene_duration,
            scene_cuts: None,
            tolerance: sc.tolerance,
            anchor: None,
        };
        let mut store = RideStore::new();
        let summary = store.ingest(&rec).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
        let integrity = store.integrity_check();
        let mut lines = vec![
            format!("ride: {}", sc.ride_id),
            format!(
                "scenes: {}, samples: {}, sample data: {}, tags: {}",
                summary.scenes, summary.samples, summary.sample_data, summary.tags
            ),
            format!("alignment tolerance: {} s", num(summary.tolerance)),
            format!("sensor clocks: {}", if clocks.is_some() { "ptp offsets applied" } else { "ideal" }),
        ];
        if let (Some(a), Some(b)) = (store.ego_poses.first(), store.ego_poses.last()) {
            lines.push(format!(
                "ego pose displacement: {} m",
                num((b.pose.x - a.pose.x).hypot(b.pose.y - a.pose.y))
            ));
        }
        if integrity.is_clean() {
            lines.push("integrity: clean".into());
        } else {
            lines.push(format!("integrity: {} violations", integrity.violations.len()));
            lines.extend(integrity.render().lines().map(|l| format!("  {l}")));
        }
        run.report.checks.push((
            integrity.is_clean(),
            format!("store integrity of ride {} ({} violations)", sc.ride_id, integrity.violations.len()),
        ));
        run.report.fill("store", lines);
        run.report.ride_id = Some(sc.ride_id.clone());
        run.store = Some(store);
    }
    Ok(())
}

fn dynamics_error(e: DynamicsError) -> ScenarioError {
    match e {
        DynamicsError::Divergence { .. } => ScenarioError::Divergence(e.to_string()),
        other => ScenarioError::Runtime(other.to_string()),
    }
}

// ---- dynamics ---------------------------------------------------------------

#[derive(Debug, Default)]
struct ClampCounts {
    speed: usize,
    accel: usize,
    steering_rate: usize,
    lateral: usize,
    steering_saturation: usize,
}

struct DynamicsOutcome {
    steps: usize,
    trace: Vec<(f64, VehicleState, DriveInput)>,
    clamps: ClampCounts,
    distance: f64,
    max_speed: f64,
    max_lateral_accel: f64,
}

impl DynamicsOutcome {
    fn lines(&self, cfg: &ScenarioConfig) -> Vec<String> {
        let (t, s, _) = self.trace.last().copied().unwrap_or_default();
        let mut lines = vec![
            format!("steps: {} at dt = {} s", self.steps, num(cfg.dt)),
            format!("final time: {} s", num(t)),
            format!(
                "final state: x = {} m, y = {} m, psi = {} rad, v_x = {} m/s, v_y = {} m/s, yaw rate = {} rad/s",
                num(s.x),
                num(s.y),
                num(s.psi),
                num(s.v_x),
                num(s.v_y),
                num(s.psi_dot)
            ),
            format!("distance: {} m", num(self.distance)),
            format!("max speed: {} m/s", num(self.max_speed)),
            format!("max lateral accel: {} m/s^2", num(self.max_lateral_accel)),
        ];
        if cfg.mode.allows_actuation() {
            let c = &self.clamps;
            lines.push(format!(
                "clamped steps: speed {}, accel {}, steering rate {}, lateral {}, steering saturation {}",
                c.speed, c.accel, c.steering_rate, c.lateral, c.steering_saturation
            ));
        } else {
            lines.push(format!("actuation: none ({} mode)", cfg.mode.name()));
        }
        lines
    }

    fn csv(&self) -> String {
        let mut out = format!("{DYNAMICS_CSV_HEADER}\n");
        for (t, s, u) in &self.trace {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                num(*t),
                num(s.x),
                num(s.y),
                num(s.psi),
                num(s.v_x),
                num(s.v_y),
                num(s.psi_dot),
                num(u.delta),
                num(u.f_x_drive)
            );
        }
        out
    }

    fn poses(&self) -> Vec<(f64, PoseState)> {
        self.trace
            .iter()
            .map(|(t, s, _)| {
                (*t, PoseState { x: s.x, y: s.y, psi: s.psi, v_x: s.v_x, v_y: s.v_y, psi_dot: s.psi_dot })
            })
            .collect()
    }
}

struct Active {
    speed: f64,
    swa: f64,
    accel: Option<f64>,
    steering_rate: f64,
}

fn run_dynamics(cfg: &ScenarioConfig, model: &SingleTrack) -> Result<DynamicsOutcome, ScenarioError> {
    let dt = cfg.dt;
    let n = ((cfg.duration / dt).round() as usize).max(1);
    let every = ((TRACE_PERIOD / dt).round() as usize).max(1);
    let p = &model.params;
    let max_swa = p.max_road_wheel_angle * p.steering_ratio;
    let m = &cfg.maneuver;
    let actuated = cfg.mode.allows_actuation();

    let mut state = VehicleState::moving_straight(cfg.initial_speed);
    let mut active = Active { speed: cfg.initial_speed, swa: 0.0, accel: None, steering_rate: m.steering_rate };
    let mut swa = 0.0f64;
    let mut next = 0;
    let mut out = DynamicsOutcome {
        steps: n,
        trace: Vec::with_capacity(n / every + 2),
        clamps: ClampCounts::default(),
        distance: 0.0,
        max_speed: state.speed(),
        max_lateral_accel: 0.0,
    };

    for k in 0..n {
        let t = k as f64 * dt;
        while next < m.steps.len() && m.steps[next].t <= t + 0.5 * dt {
            let s = &m.steps[next];
            active.speed = s.speed.unwrap_or(active.speed);
            active.swa = s.swa_deg.map(f64::to_radians).unwrap_or(active.swa);
            active.accel = s.accel.or(active.accel);
            active.steering_rate = s.steering_rate.unwrap_or(active.steering_rate);
            next += 1;
        }

        let input = if actuated {
            let mut flags = ClampFlags::default();
            let first = limit_command(
                cfg.mode,
                &cfg.limits,
                Command { speed_target: active.speed, steering_rate: active.steering_rate, accel: 0.0 },
            )?;
            flags.speed = first.flags.speed;
            flags.steering_rate = first.flags.steering_rate && swa != active.swa;
            let mut target = first.command.speed_target;
            let curvature = (swa / p.steering_ratio).tan().abs() / p.wheelbase();
            if cfg.limits.max_lateral_accel.is_finite() && curvature > 0.0 {
                let cap = (cfg.limits.max_lateral_accel / curvature).sqrt();
                if target > cap {
                    target = cap;
                    out.clamps.lateral += 1;
                }
            }
            let mut accel = m.speed_gain * (target - state.v_x);
            if let Some(a) = active.accel {
                accel = accel.clamp(-a, a);
            }
            let second = limit_command(
                cfg.mode,
                &cfg.limits,
                Command { speed_target: target, steering_rate: first.command.steering_rate, accel },
            )?;
            flags.accel = second.flags.accel;
            out.clamps.speed += flags.speed as usize;
            out.clamps.accel += flags.accel as usize;
            out.clamps.steering_rate += flags.steering_rate as usize;

            let rate = second.command.steering_rate;
            swa += (active.swa - swa).clamp(-rate * dt, rate * dt);
            if swa.abs() > max_swa {
                swa = max_swa.copysign(swa);
                out.clamps.steering_saturation += 1;
            }
            speed_controller(model, &state, swa / p.steering_ratio, 0.0, second.command.accel, 0.0)
        } else {
            // no actuation: the driver holds speed and keeps the wheel straight
            speed_controller(model, &state, 0.0, 0.0, 0.0, 0.0)
        };

        if k % every == 0 {
            out.trace.push((t, state, input));
        }
        let mut next_state = step(model, t, &state, &input, dt).map_err(dynamics_error)?;
        // brakes hold the vehicle once it has stopped
        if next_state.v_x < 0.0 {
            next_state.v_x = 0.0;
        }
        out.distance += (next_state.x - state.x).hypot(next_state.y - state.y);
        state = next_state;
        out.max_speed = out.max_speed.max(state.speed());
        out.max_lateral_accel = out.max_lateral_accel.max((state.v_x * state.psi_dot).abs());
    }
    let t_end = n as f64 * dt;
    let last = out.trace.last().map(|r| r.2).unwrap_or_default();
    out.trace.push((t_end, state, last));
    Ok(out)
}

// ---- coverage ---------------------------------------------------------------

fn coverage_section(rig: &Rig, c: &super::CoverageConfig) -> Result<(Vec<String>, String), ScenarioError> {
    let err = |e: crate::sensors::SensorsError| ScenarioError::Runtime(e.to_string());
    let window = GridWindow::centered(c.window, c.window, c.cell);
    let map = coverage_map(rig, &window, c.height).map_err(err)?;
    let (nx, ny) = map.shape();
    let mut lines = vec![
        format!(
            "grid: {nx} x {ny} cells of {} m over +/-{} m at height {} m",
            num(c.cell),
            num(c.window),
            num(c.height)
        ),
        format!("footprint cells: {}", map.footprint_cells()),
    ];
    let present = rig.modalities();
    let perception: Vec<Modality> = Modality::ALL.into_iter().filter(|m| m.is_perception() && present.contains(m)).collect();
    for &m in &perception {
        lines.push(format!(
            "{}: devices {}, max overlap {}, uncovered cells {}",
            m.name(),
            rig.device_count(m),
            map.max_count(m),
            map.zero_cells(&[m])
        ));
    }
    let cell_area = window.cell_area();
    let zero = map.zero_cells(&perception);
    lines.push(format!(
        "uncovered by all perception sensors: {zero} cells ({} m^2)",
        num(zero as f64 * cell_area)
    ));
    let regions = map.blind_regions(&perception);
    match regions.first() {
        Some(r) => lines.push(format!(
            "blind regions: {}, largest {} m^2 around ({}, {}) m",
            regions.len(),
            num(r.area),
            num(r.centroid[0]),
            num(r.centroid[1])
        )),
        None => lines.push("blind regions: 0".into()),
    }
    if c.min_range {
        let opts = SweepOptions { query_height: c.height, ..SweepOptions::default() };
        for &m in &perception {
            match min_full_coverage_range(rig, m, &opts).map_err(err)? {
                Some(r) => lines.push(format!("{} gap-free from radius {} m", m.name(), num(r))),
                None => lines.push(format!("{} never gap-free within range", m.name())),
            }
        }
    }
    Ok((lines, map.to_csv()))
}

// ---- network ----------------------------------------------------------------

/// Runs the configured network and checks every stream-reservation flow
/// against its class budget. Returns report lines, checks and the stats CSV.
#[allow(clippy::type_complexity)]
pub fn run_network(
    cfg: &ScenarioConfig,
    rig: &Rig,
) -> Result<(Vec<String>, Vec<(bool, String)>, String), ScenarioError> {
    let Some(n) = &cfg.network else {
        return Err(ScenarioError::Config("scenario has no [network] section".into()));
    };
    let (topo, flows) = super::build_network(n, rig, &cfg.base_dir)?;
    let sim = SimConfig {
        duration: n.duration,
        qos: n.qos,
        queue_cap: n.queue_cap,
        reservation_factor: n.reservation_factor,
        reservation: n.reservation,
        enforce_min_duration: true,
    };
    let rep = simulate(&topo, &flows, &sim).map_err(|e| ScenarioError::Runtime(e.to_string()))?;
    let qos = match n.qos {
        crate::net::QosMode::Fifo => "fifo",
        crate::net::QosMode::StrictPriority => "strict-priority",
        crate::net::QosMode::Cbs => "cbs",
    };
    let mut lines = vec![
        format!(
            "topology: {} nodes, {} links, {} flows",
            topo.nodes().len(),
            topo.links().len(),
            flows.len()
        ),
        format!("qos: {qos}, simulated {} s", num(n.duration)),
        format!("events: {}, max queue: {} frames", rep.events, rep.max_queue),
        format!("credit checks: {}, violations: {}", rep.credit_checks, rep.credit_violations),
    ];
    let mut checks = Vec::new();
    for s in &rep.flows {
        let drops = if s.drops > 0 { format!(", {} drops", s.drops) } else { String::new() };
        if s.class == TrafficClass::BestEffort {
            lines.push(format!(
                "info {} {}: {} messages, max latency {} s{drops}",
                s.flow_id,
                s.class.name(),
                s.count,
                num(s.lat_max)
            ));
            continue;
        }
        let c = check_sr_class(s, s.class, &n.budgets);
        let margin = |m: Option<f64>| m.map(|m| format!(" (margin {} s)", num(m))).unwrap_or_default();
        let mut text = format!(
            "{} {}: max latency {} s{}, jitter {} s{}{drops}",
            s.flow_id,
            s.class.name(),
            num(s.lat_max),
            margin(c.latency_margin),
            num(s.jitter),
            margin(c.jitter_margin),
        );
        if let Some(r) = &c.reason {
            let _ = write!(text, ", {r}");
        }
        lines.push(format!("{} {text}", if c.pass { "PASS" } else { "FAIL" }));
        checks.push((c.pass, format!("network flow {text}")));
    }
    if rep.credit_violations > 0 {
        checks.push((false, format!("network credit bounds: {} violations", rep.credit_violations)));
    }
    Ok((lines, checks, stats_csv(&rep.flows)))
}

// ---- sensor timestamps ------------------------------------------------------

/// Per-clock offset traces for interpolation.
struct OffsetTable {
    ids: Vec<String>,
    series: Vec<Vec<(f64, f64)>>,
}

impl OffsetTable {
    fn new(res: &SyncResult) -> Self {
        let mut series = vec![Vec::new(); res.node_ids.len()];
        for s in &res.trace {
            series[s.node].push((s.time, s.offset));
        }
        Self { ids: res.node_ids.clone(), series }
    }

    fn offset(&self, id: &str, t: f64) -> f64 {
        let Some(i) = self.ids.iter().position(|n| n == id) else {
            return 0.0;
        };
        let s = &self.series[i];
        let k = s.partition_point(|p| p.0 < t);
        match (k, s.len()) {
            (_, 0) => 0.0,
            (0, _) => s[0].1,
            (k, len) if k >= len => s[len - 1].1,
            (k, _) => {
                let (a, b) = (s[k - 1], s[k]);
                a.1 + (t - a.0) / (b.0 - a.0) * (b.1 - a.1)
            }
        }
    }
}

/// Nominal emission times `k / rate`, shifted by the device clock's offset.
/// Stamps that fall outside the ride are dropped.
fn sensor_timestamps(device: &str, rate: f64, duration: f64, clocks: Option<&OffsetTable>) -> Vec<f64> {
    let n = (duration * rate + 1e-9).floor() as usize;
    (0..=n)
        .map(|k| {
            let t = k as f64 / rate;
            t + clocks.map_or(0.0, |c| c.offset(device, t))
        })
        .filter(|&t| (0.0..=duration).contains(&t))
        .collect()
}

// ---- output -----------------------------------------------------------------

/// Writes report.txt, the CSV artifacts and the ride store under `dir`.
pub fn write_outputs(run: &ScenarioRun, dir: &Path, export_csv: bool) -> Result<(), ScenarioError> {
    let io = |e: std::io::Error| ScenarioError::Io(format!("{}: {e}", dir.display()));
    fs::create_dir_all(dir).map_err(io)?;
    for (name, text) in &run.artifacts {
        fs::write(dir.join(name), text).map_err(io)?;
    }
    if let Some(store) = &run.store {
        let ride = dir.join("ride");
        // replace a store left by an earlier run, nothing else
        if ride.join("taxonomy.jsonl").is_file() {
            fs::remove_dir_all(&ride).map_err(io)?;
        }
        store.save(&ride).map_err(|e| ScenarioError::Io(e.to_string()))?;
        if export_csv {
            store.export_csv(&dir.join("ride_csv")).map_err(|e| ScenarioError::Io(e.to_string()))?;
        }
    }
    fs::write(dir.join("report.txt"), run.report.render()).map_err(io)?;
    Ok(())
}
