//! Scenario files, driving-mode limits and the end-to-end runner.
//!
//! A scenario is a TOML file. Top-level keys describe the run, optional
//! tables switch subsystems on:
//!
//! ```toml
//! name = "ring"
//! duration = 20.0
//! mode = "autonomous"
//! initial_speed_kmh = 30.0
//!
//! [[maneuver.step]]
//! t = 5.0
//! swa_deg = 30.0
//!
//! [store]
//! scene_duration = 10.0
//! ```
//!
//! `[coverage]`, `[iso4138]`, `[ptp]`, `[network]` and `[store]` are each
//! enabled by their presence. Without any of them only the dynamics run.

mod limits;
mod run;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{self, SingleTrack, MAX_DT};
use crate::net::{
    ClassBudgets, EdgarNetOptions, Flow, NetTopology, NetworkDescription, QosMode, ReservationPolicy,
    SevenHopOptions,
};
use crate::ptp::ChainParams;
use crate::sensors::{self, Rig};

pub use limits::{
    limit_command, ClampFlags, Command, DrivingMode, Limited, ModeLimits, HIGH_DYNAMIC_MAX_SPEED,
};
pub use run::{
    run_network, SectionBody, run_scenario, write_outputs, ReportSection, RunFailure, ScenarioReport, ScenarioRun,
    DYNAMICS_CSV_HEADER,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScenarioError {
    #[error("config error: {0}")]
    Config(String),
    #[error("actuation requested in {} mode, where the drive-by-wire system is electronically separated", .0.name())]
    Actuation(DrivingMode),
    #[error("{0}")]
    Runtime(String),
    #[error("simulation diverged: {0}")]
    Divergence(String),
    #[error("io error: {0}")]
    Io(String),
}

impl ScenarioError {
    /// 1 for configuration problems, 2 for everything that fails while running.
    pub fn exit_code(&self) -> i32 {
        match self {
            ScenarioError::Config(_) | ScenarioError::Actuation(_) => 1,
            _ => 2,
        }
    }
}

// ---- raw file layout --------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    name: Option<String>,
    duration: f64,
    dt: Option<f64>,
    seed: Option<u64>,
    mode: Option<DrivingMode>,
    vehicle: Option<String>,
    rig: Option<String>,
    initial_speed: Option<f64>,
    initial_speed_kmh: Option<f64>,
    output: Option<String>,
    limits: Option<RawLimits>,
    maneuver: Option<RawManeuver>,
    coverage: Option<CoverageConfig>,
    iso4138: Option<Iso4138Config>,
    ptp: Option<RawPtp>,
    network: Option<RawNetwork>,
    store: Option<RawStore>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLimits {
    max_speed: Option<f64>,
    max_speed_kmh: Option<f64>,
    max_accel: Option<f64>,
    max_decel: Option<f64>,
    max_lateral_accel: Option<f64>,
    max_steering_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawManeuver {
    speed_gain: Option<f64>,
    steering_rate: Option<f64>,
    #[serde(default)]
    step: Vec<RawStep>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStep {
    t: f64,
    speed: Option<f64>,
    speed_kmh: Option<f64>,
    swa_deg: Option<f64>,
    accel: Option<f64>,
    steering_rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPtp {
    duration: Option<f64>,
    sync_interval: Option<f64>,
    trace_interval: Option<f64>,
    stamp_sensors: Option<bool>,
    #[serde(default)]
    chain: ChainParams,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNetwork {
    preset: Option<NetPreset>,
    file: Option<String>,
    duration: Option<f64>,
    qos: Option<QosMode>,
    queue_cap: Option<usize>,
    reservation_factor: Option<f64>,
    reservation: Option<ReservationPolicy>,
    #[serde(default)]
    budgets: ClassBudgets,
    #[serde(default)]
    edgar: EdgarNetOptions,
    #[serde(default)]
    seven_hop: SevenHopOptions,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStore {
    scene_duration: Option<f64>,
    tolerance: Option<f64>,
    ride_id: Option<String>,
    map_id: Option<String>,
    export_csv: Option<bool>,
}

// ---- resolved configuration -------------------------------------------------

/// One timed maneuver command. Unset channels keep their previous value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ManeuverStep {
    /// [s]
    pub t: f64,
    /// Speed target [m/s]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub speed: Option<f64>,
    /// Steering-wheel angle target [deg]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub swa_deg: Option<f64>,
    /// Acceleration used to approach the speed target [m/s^2]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accel: Option<f64>,
    /// Steering-wheel rate towards the angle target [rad/s]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steering_rate: Option<f64>,
}

impl ManeuverStep {
    fn actuates(&self) -> bool {
        let nz = |x: Option<f64>| x.is_some_and(|v| v != 0.0);
        nz(self.speed) || nz(self.swa_deg) || nz(self.accel) || nz(self.steering_rate)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Maneuver {
    /// Proportional speed-controller gain [1/s]
    pub speed_gain: f64,
    /// Steering-wheel rate used when a step gives none [rad/s]
    pub steering_rate: f64,
    #[serde(rename = "step")]
    pub steps: Vec<ManeuverStep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CoverageConfig {
    /// Half extent of the square grid [m]
    pub window: f64,
    /// [m]
    pub cell: f64,
    /// Query plane height [m]
    pub height: f64,
    /// Also search the smallest gap-free radius per perception modality.
    pub min_range: bool,
}

impl Default for CoverageConfig {
    fn default() -> Self {
        Self { window: 40.0, cell: 0.25, height: sensors::DEFAULT_QUERY_HEIGHT, min_range: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IsoMode {
    #[default]
    Discrete,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Iso4138Config {
    pub swa_deg: f64,
    pub mode: IsoMode,
    pub speeds_kmh: Vec<f64>,
    /// Ramp rate of the continuous test [m/s^2]
    pub accel_rate: f64,
}

impl Default for Iso4138Config {
    fn default() -> Self {
        Self {
            swa_deg: 45.0,
            mode: IsoMode::Discrete,
            speeds_kmh: (1..=26).map(|k| (5 * k) as f64).collect(),
            accel_rate: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PtpConfig {
    /// [s]
    pub duration: f64,
    /// [s]
    pub sync_interval: f64,
    /// [s]
    pub trace_interval: f64,
    /// Perturb sensor timestamps by their clock offsets.
    pub stamp_sensors: bool,
    pub chain: ChainParams,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NetPreset {
    /// Flows derived from the rig on a single-switch star
    #[default]
    Edgar,
    SevenHop,
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NetworkConfig {
    pub preset: NetPreset,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    /// [s]
    pub duration: f64,
    pub qos: QosMode,
    pub queue_cap: usize,
    pub reservation_factor: f64,
    pub reservation: ReservationPolicy,
    pub budgets: ClassBudgets,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub edgar: Option<EdgarNetOptions>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seven_hop: Option<SevenHopOptions>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StoreConfig {
    /// [s]
    pub scene_duration: f64,
    /// Alignment window [s]; half the fastest sensor period when unset
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    pub ride_id: String,
    pub map_id: String,
    /// Also write every table as CSV next to the ride.
    pub export_csv: bool,
}

/// Fully resolved scenario. Serializing it gives the effective configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// [s]
    pub duration: f64,
    /// [s]
    pub dt: f64,
    pub seed: u64,
    pub mode: DrivingMode,
    pub vehicle: String,
    pub rig: String,
    /// [m/s]
    pub initial_speed: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<String>,
    pub limits: ModeLimits,
    pub maneuver: Maneuver,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub coverage: Option<CoverageConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iso4138: Option<Iso4138Config>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ptp: Option<PtpConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub network: Option<NetworkConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub store: Option<StoreConfig>,
    /// Directory that relative paths are resolved against
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Default steering-wheel rate request when neither mode nor maneuver caps it [rad/s].
pub const DEFAULT_STEERING_RATE: f64 = 10.0;

/// Reads and resolves a scenario file. Relative paths inside it are taken
/// relative to the file's directory.
pub fn parse_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    parse_scenario_seeded(path, None)
}

/// Like [`parse_scenario`], with `seed` replacing the file's seed before
/// anything derived from it is resolved.
pub fn parse_scenario_seeded(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, ScenarioError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    parse_scenario_str_seeded(&text, &base, seed)
}

pub fn parse_scenario_str(text: &str, base_dir: &Path) -> Result<ScenarioConfig, ScenarioError> {
    parse_scenario_str_seeded(text, base_dir, None)
}

pub fn parse_scenario_str_seeded(
    text: &str,
    base_dir: &Path,
    seed: Option<u64>,
) -> Result<ScenarioConfig, ScenarioError> {
    let mut raw: RawScenario = toml::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
    raw.seed = seed.or(raw.seed);
    Resolver { text, base_dir }.resolve(raw)
}

struct Resolver<'a> {
    text: &'a str,
    base_dir: &'a Path,
}

impl Resolver<'_> {
    /// 1-based line of the `nth` line that starts with `needle` (after whitespace).
    fn line_of(&self, needle: &str, nth: usize) -> Option<usize> {
        self.text
            .lines()
            .enumerate()
            .filter(|(_, l)| {
                let l = l.trim_start();
                l.starts_with(needle)
                    && l[needle.len()..].trim_start().starts_with(['=', ']', '.'])
            })
            .nth(nth)
            .map(|(i, _)| i + 1)
    }

    fn err(&self, key: &str, message: String) -> ScenarioError {
        match self.line_of(key, 0) {
            Some(line) => ScenarioError::Config(format!("line {line}: {message}")),
            None => ScenarioError::Config(message),
        }
    }

    fn step_err(&self, index: usize, message: String) -> ScenarioError {
        let line = self
            .text
            .lines()
            .enumerate()
            .filter(|(_, l)| l.trim() == "[[maneuver.step]]")
            .nth(index)
            .map(|(i, _)| i + 1);
        match line {
            Some(line) => ScenarioError::Config(format!("line {line}: {message}")),
            None => ScenarioError::Config(format!("maneuver step {index}: {message}")),
        }
    }

    fn one_of(&self, key: &str, si: Option<f64>, kmh: Option<f64>) -> Result<Option<f64>, ScenarioError> {
        match (si, kmh) {
            (Some(_), Some(_)) => Err(self.err(key, format!("give either {key} or {key}_kmh, not both"))),
            (Some(v), None) => Ok(Some(v)),
            (None, Some(v)) => Ok(Some(v / 3.6)),
            (None, None) => Ok(None),
        }
    }

    fn resolve(&self, raw: RawScenario) -> Result<ScenarioConfig, ScenarioError> {
        if !(raw.duration.is_finite() && raw.duration > 0.0) {
            return Err(self.err("duration", format!("duration must be positive, got {}", raw.duration)));
        }
        let dt = raw.dt.unwrap_or(dynamics::DEFAULT_DT);
        if !(dt > 0.0 && dt <= MAX_DT) {
            return Err(self.err("dt", format!("dt must be in (0, {MAX_DT}] s, got {dt}")));
        }
        if raw.duration / dt > 1e8 {
            return Err(self.err("dt", "more than 1e8 integration steps".into()));
        }
        let name = raw.name.unwrap_or_else(|| "scenario".into());
        let seed = raw.seed.unwrap_or(1);
        let mode = raw.mode.unwrap_or_default();
        let vehicle = raw.vehicle.unwrap_or_else(|| "edgar".into());
        let rig = raw.rig.unwrap_or_else(|| "edgar".into());
        load_vehicle_ref(&vehicle, self.base_dir).map_err(|e| self.err("vehicle", e.to_string()))?;
        let rig_model = load_rig_ref(&rig, self.base_dir).map_err(|e| self.err("rig", e.to_string()))?;

        let initial_speed =
            self.one_of("initial_speed", raw.initial_speed, raw.initial_speed_kmh)?.unwrap_or(0.0);
        if !(initial_speed.is_finite() && initial_speed >= 0.0) {
            return Err(self.err("initial_speed", "initial speed must be non-negative".into()));
        }

        let limits = self.resolve_limits(mode, raw.limits)?;
        let maneuver = self.resolve_maneuver(mode, &limits, raw.maneuver.unwrap_or_default(), raw.duration)?;

        if let Some(c) = &raw.coverage {
            if rig_model.sensors().is_empty() {
                return Err(self.err("[coverage", "coverage needs a rig with sensors".into()));
            }
            crate::sensors::GridWindow::centered(c.window, c.window, c.cell)
                .validate()
                .map_err(|e| self.err("[coverage", e.to_string()))?;
            if !(c.height.is_finite()) {
                return Err(self.err("[coverage", "height must be finite".into()));
            }
        }
        if let Some(iso) = &raw.iso4138 {
            if iso.speeds_kmh.is_empty() {
                return Err(self.err("[iso4138", "speeds_kmh must not be empty".into()));
            }
        }

        let ptp = raw
            .ptp
            .map(|p| {
                let c = PtpConfig {
                    duration: p.duration.unwrap_or(raw.duration),
                    sync_interval: p.sync_interval.unwrap_or(1.0),
                    trace_interval: p.trace_interval.unwrap_or(0.1),
                    stamp_sensors: p.stamp_sensors.unwrap_or(true),
                    chain: p.chain,
                };
                if !(c.duration > 0.0 && c.sync_interval > 0.0 && c.trace_interval > 0.0) {
                    return Err(self.err("[ptp", "duration, sync_interval and trace_interval must be positive".into()));
                }
                Ok(c)
            })
            .transpose()?;

        let network = raw.network.map(|n| self.resolve_network(n, &rig_model)).transpose()?;

        let store = raw
            .store
            .map(|s| {
                let ride_id = s.ride_id.unwrap_or_else(|| format!("{}-{seed:04}", name.replace('/', "-")));
                if ride_id.is_empty() || ride_id.contains('/') || ride_id.contains('\\') {
                    return Err(self.err("ride_id", format!("invalid ride id '{ride_id}'")));
                }
                let c = StoreConfig {
                    scene_duration: s.scene_duration.unwrap_or(20.0),
                    tolerance: s.tolerance,
                    ride_id,
                    map_id: s.map_id.unwrap_or_else(|| "edgar-test-area".into()),
                    export_csv: s.export_csv.unwrap_or(false),
                };
                if !(c.scene_duration > 0.0) || c.tolerance.is_some_and(|t| !(t > 0.0)) {
                    return Err(self.err("[store", "scene_duration and tolerance must be positive".into()));
                }
                if rig_model.sensors().is_empty() {
                    return Err(self.err("[store", "recording a ride needs a rig with sensors".into()));
                }
                Ok(c)
            })
            .transpose()?;

        Ok(ScenarioConfig {
            name,
            duration: raw.duration,
            dt,
            seed,
            mode,
            vehicle,
            rig,
            initial_speed,
            output: raw.output,
            limits,
            maneuver,
            coverage: raw.coverage,
            iso4138: raw.iso4138,
            ptp,
            network,
            store,
            base_dir: self.base_dir.to_path_buf(),
        })
    }

    fn resolve_limits(&self, mode: DrivingMode, raw: Option<RawLimits>) -> Result<ModeLimits, ScenarioError> {
        let mut l = ModeLimits::for_mode(mode);
        let Some(r) = raw else {
            return Ok(l);
        };
        if !mode.allows_actuation() {
            return Err(self.err("[limits", format!("{} mode has no actuation to limit", mode.name())));
        }
        if let Some(v) = self.one_of("max_speed", r.max_speed, r.max_speed_kmh)? {
            l.max_speed = v;
        }
        l.max_accel = r.max_accel.unwrap_or(l.max_accel);
        l.max_decel = r.max_decel.unwrap_or(l.max_decel);
        l.max_lateral_accel = r.max_lateral_accel.unwrap_or(l.max_lateral_accel);
        l.max_steering_rate = r.max_steering_rate.unwrap_or(l.max_steering_rate);
        l.validate().map_err(|e| self.err("[limits", e.to_string()))?;
        if l.max_speed > HIGH_DYNAMIC_MAX_SPEED * (1.0 + 1e-12) {
            return Err(self.err("max_speed", "max_speed above the 130 km/h vehicle limit".into()));
        }
        Ok(l)
    }

    fn resolve_maneuver(
        &self,
        mode: DrivingMode,
        limits: &ModeLimits,
        raw: RawManeuver,
        duration: f64,
    ) -> Result<Maneuver, ScenarioError> {
        let speed_gain = raw.speed_gain.unwrap_or(1.0);
        if !(speed_gain.is_finite() && speed_gain > 0.0) {
            return Err(self.err("speed_gain", "speed_gain must be positive".into()));
        }
        let steering_rate = match raw.steering_rate {
            Some(r) if r.is_finite() && r > 0.0 => r,
            Some(r) => return Err(self.err("steering_rate", format!("steering_rate must be positive, got {r}"))),
            None if mode.allows_actuation() => limits.max_steering_rate.min(DEFAULT_STEERING_RATE),
            None => DEFAULT_STEERING_RATE,
        };
        let mut steps = Vec::with_capacity(raw.step.len());
        let mut last = f64::NEG_INFINITY;
        for (i, s) in raw.step.into_iter().enumerate() {
            let speed = match (s.speed, s.speed_kmh) {
                (Some(_), Some(_)) => return Err(self.step_err(i, "give either speed or speed_kmh, not both".into())),
                (a, b) => a.or(b.map(|v| v / 3.6)),
            };
            let step = ManeuverStep { t: s.t, speed, swa_deg: s.swa_deg, accel: s.accel, steering_rate: s.steering_rate };
            if !(step.t >= 0.0 && step.t <= duration) {
                return Err(self.step_err(i, format!("step time {} s outside [0, {duration}] s", step.t)));
            }
            if step.t < last {
                return Err(self.step_err(i, "step times must be non-decreasing".into()));
            }
            last = step.t;
            let finite = [step.speed, step.swa_deg, step.accel, step.steering_rate]
                .iter()
                .all(|v| v.is_none_or(f64::is_finite));
            if !finite {
                return Err(self.step_err(i, "non-finite command".into()));
            }
            if step.speed.is_some_and(|v| v < 0.0) {
                return Err(self.step_err(i, "reverse driving is not modelled; speed must be >= 0".into()));
            }
            if step.accel.is_some_and(|v| v < 0.0) || step.steering_rate.is_some_and(|v| v < 0.0) {
                return Err(self.step_err(i, "accel and steering_rate are magnitudes and must be >= 0".into()));
            }
            if !mode.allows_actuation() && step.actuates() {
                return Err(self.step_err(
                    i,
                    format!(
                        "step at t = {} s commands actuation, but in {} mode the drive-by-wire system is electronically separated",
                        step.t,
                        mode.name()
                    ),
                ));
            }
            steps.push(step);
        }
        Ok(Maneuver { speed_gain, steering_rate, steps })
    }

    fn resolve_network(&self, n: RawNetwork, rig: &Rig) -> Result<NetworkConfig, ScenarioError> {
        let preset = n.preset.unwrap_or_default();
        if preset != NetPreset::File && n.file.is_some() {
            return Err(self.err("file", "file is only used with preset = \"file\"".into()));
        }
        let d = crate::net::SimConfig::default();
        let mut cfg = NetworkConfig {
            preset,
            file: n.file,
            duration: 0.0,
            qos: n.qos.unwrap_or(d.qos),
            queue_cap: n.queue_cap.unwrap_or(d.queue_cap),
            reservation_factor: n.reservation_factor.unwrap_or(d.reservation_factor),
            reservation: n.reservation.unwrap_or(d.reservation),
            budgets: n.budgets,
            edgar: (preset == NetPreset::Edgar).then_some(n.edgar),
            seven_hop: (preset == NetPreset::SevenHop).then_some(n.seven_hop),
        };
        let (_, flows) = build_network(&cfg, rig, self.base_dir).map_err(|e| self.err("[network", e.to_string()))?;
        let slowest = flows.iter().map(|f| f.period).max().unwrap_or(0);
        cfg.duration = n.duration.unwrap_or(100.0 * crate::net::ps_to_secs(slowest));
        if !(cfg.duration > 0.0 && cfg.duration.is_finite()) {
            return Err(self.err("[network", "network duration must be positive; give duration = <s>".into()));
        }
        Ok(cfg)
    }
}

/// Topology and flows of a network section.
pub fn build_network(n: &NetworkConfig, rig: &Rig, base: &Path) -> Result<(NetTopology, Vec<Flow>), ScenarioError> {
    let net = |e: crate::net::NetError| ScenarioError::Config(e.to_string());
    match n.preset {
        NetPreset::Edgar => {
            if rig.sensors().is_empty() {
                return Err(ScenarioError::Config(
                    "the edgar network preset derives its flows from the rig, which is empty".into(),
                ));
            }
            crate::net::edgar_network(rig, n.edgar.as_ref().unwrap_or(&EdgarNetOptions::default())).map_err(net)
        }
        NetPreset::SevenHop => {
            crate::net::seven_hop_scenario(n.seven_hop.as_ref().unwrap_or(&SevenHopOptions::default())).map_err(net)
        }
        NetPreset::File => {
            let Some(f) = &n.file else {
                return Err(ScenarioError::Config("preset = \"file\" needs file = <path>".into()));
            };
            let path = base.join(f);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ScenarioError::Config(format!("cannot read {}: {e}", path.display())))?;
            NetworkDescription::parse(&text).and_then(|d| d.build()).map_err(net)
        }
    }
}

impl ScenarioConfig {
    /// The configuration as TOML with every default filled in.
    pub fn effective_toml(&self) -> String {
        toml::to_string(self).unwrap_or_else(|e| format!("# effective config not serializable: {e}\n"))
    }

    pub fn load_vehicle(&self) -> Result<SingleTrack, ScenarioError> {
        load_vehicle_ref(&self.vehicle, &self.base_dir)
    }

    pub fn load_rig(&self) -> Result<Rig, ScenarioError> {
        load_rig_ref(&self.rig, &self.base_dir)
    }
}

/// `"edgar"` or a path to a vehicle file.
pub fn load_vehicle_ref(r: &str, base: &Path) -> Result<SingleTrack, ScenarioError> {
    if r == "edgar" {
        return Ok(SingleTrack::edgar());
    }
    let path = base.join(r);
    let text = std::fs::read_to_string(&path)
        .map_err(|e| ScenarioError::Config(format!("cannot read vehicle {}: {e}", path.display())))?;
    dynamics::load_vehicle(&text).map_err(|e| ScenarioError::Config(e.to_string()))
}

/// `"edgar"`, `"none"` or a path to a rig file.
pub fn load_rig_ref(r: &str, base: &Path) -> Result<Rig, ScenarioError> {
    match r {
        "edgar" => Ok(sensors::edgar_rig()),
        "none" => Ok(Rig::empty()),
        _ => {
            let path = base.join(r);
            let text = std::fs::read_to_string(&path)
                .map_err(|e| ScenarioError::Config(format!("cannot read rig {}: {e}", path.display())))?;
            sensors::load_rig(&text).map_err(|e| ScenarioError::Config(e.to_string()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ScenarioConfig, ScenarioError> {
        parse_scenario_str(text, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse("duration = 5.0\n").unwrap();
        assert_eq!(c.dt, 0.001);
        assert_eq!(c.mode, DrivingMode::Autonomous);
        assert_eq!(c.limits, ModeLimits::for_mode(DrivingMode::Autonomous));
        assert_eq!(c.maneuver.steering_rate, 0.3);
        assert!(c.coverage.is_none() && c.ptp.is_none() && c.network.is_none() && c.store.is_none());
        let echo = c.effective_toml();
        assert!(echo.contains("seed = 1"), "{echo}");
        assert!(echo.contains("[limits]"), "{echo}");
    }

    #[test]
    fn unknown_key_is_named() {
        let err = parse("duration = 5.0\nwheelbase = 3.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("wheelbase") && msg.contains("line 2"), "{msg}");
        assert_eq!(err.exit_code(), 1);
        let err = parse("duration = 5.0\n[store]\nscene = 3\n").unwrap_err();
        assert!(err.to_string().contains("scene"), "{err}");
    }

    #[test]
    fn series_mode_refuses_commands() {
        let text = "duration = 5.0\nmode = \"series\"\n\n[[maneuver.step]]\nt = 0.0\nspeed = 0.0\n\n[[maneuver.step]]\nt = 1.0\nswa_deg = 10.0\n";
        let msg = parse(text).unwrap_err().to_string();
        assert!(msg.contains("electronically separated") && msg.contains("line 8"), "{msg}");
        // zero commands are no actuation
        assert!(parse("duration = 5.0\nmode = \"measurement\"\n[[maneuver.step]]\nt = 0.0\nspeed = 0.0\n").is_ok());
        assert!(parse("duration = 5.0\nmode = \"series\"\n[limits]\nmax_accel = 1.0\n").is_err());
    }

    #[test]
    fn validation() {
        assert!(parse("duration = 0.0\n").is_err());
        assert!(parse("duration = 1.0\ndt = 0.02\n").is_err());
        assert!(parse("duration = 1.0\nmode = \"ludicrous\"\n").is_err());
        assert!(parse("duration = 1.0\n[limits]\nmax_speed_kmh = 150.0\n").is_err());
        assert!(parse("duration = 1.0\n[[maneuver.step]]\nt = 2.0\n").is_err());
        assert!(parse("duration = 1.0\nrig = \"none\"\n[store]\n").is_err());
        let c = parse("duration = 1.0\ninitial_speed_kmh = 36.0\n[limits]\nmax_speed_kmh = 80.0\n").unwrap();
        assert_eq!(c.initial_speed, 10.0);
        assert!((c.limits.max_speed - 80.0 / 3.6).abs() < 1e-12);
        assert_eq!(c.limits.max_accel, 2.5);
    }

    #[test]
    fn network_duration_defaults_to_hundred_periods() {
        let c = parse("duration = 1.0\n[network]\npreset = \"seven_hop\"\n").unwrap();
        let n = c.network.unwrap();
        assert!((n.duration - 0.0125).abs() < 1e-12);
        assert!(n.seven_hop.is_some() && n.edgar.is_none());
    }
}
