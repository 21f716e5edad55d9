//! C ABI over `edgar-twin`.
//!
//! Objects are opaque handles created by `et_*_new`/`et_*_load`/`et_*_parse`
//! functions and released with the matching `et_*_free`. Every fallible call
//! returns an [`EtStatus`]; on failure a message is available from
//! [`et_last_error`] on the same thread. Strings returned by the library are
//! owned by the caller and must be released with [`et_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use edgar_twin::dynamics::{self, DriveInput, SingleTrack, VehicleState};
use edgar_twin::scenario::{self, DrivingMode, ModeLimits, ScenarioConfig, ScenarioError, ScenarioRun};
use edgar_twin::sensors::{self, Rig};
use edgar_twin::store::RideStore;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Config = 4,
    Runtime = 5,
    Divergence = 6,
    Io = 7,
    /// The run completed but a check failed
    CheckFailed = 8,
    Panic = 9,
}

/// Driving modes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EtMode {
    Series = 0,
    Measurement = 1,
    Autonomous = 2,
    HighDynamic = 3,
}

impl From<EtMode> for DrivingMode {
    fn from(m: EtMode) -> Self {
        match m {
            EtMode::Series => DrivingMode::Series,
            EtMode::Measurement => DrivingMode::Measurement,
            EtMode::Autonomous => DrivingMode::Autonomous,
            EtMode::HighDynamic => DrivingMode::HighDynamic,
        }
    }
}

/// Planar body state; velocities in the body frame.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EtState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub psi_dot: f64,
}

impl From<EtState> for VehicleState {
    fn from(s: EtState) -> Self {
        VehicleState { x: s.x, y: s.y, psi: s.psi, v_x: s.v_x, v_y: s.v_y, psi_dot: s.psi_dot }
    }
}

impl From<VehicleState> for EtState {
    fn from(s: VehicleState) -> Self {
        EtState { x: s.x, y: s.y, psi: s.psi, v_x: s.v_x, v_y: s.v_y, psi_dot: s.psi_dot }
    }
}

/// Speed target [m/s], steering-wheel rate [rad/s], acceleration [m/s^2].
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct EtCommand {
    pub speed_target: f64,
    pub steering_rate: f64,
    pub accel: f64,
}

pub const ET_CLAMPED_SPEED: u32 = 1;
pub const ET_CLAMPED_STEERING_RATE: u32 = 2;
pub const ET_CLAMPED_ACCEL: u32 = 4;

pub struct EtVehicle(SingleTrack);
pub struct EtRig(Rig);
pub struct EtScenario(ScenarioConfig);
pub struct EtReport(ScenarioRun);
pub struct EtStore(RideStore);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(EtStatus, String);

impl From<ScenarioError> for Fail {
    fn from(e: ScenarioError) -> Self {
        let status = match e {
            ScenarioError::Config(_) | ScenarioError::Actuation(_) => EtStatus::Config,
            ScenarioError::Divergence(_) => EtStatus::Divergence,
            ScenarioError::Io(_) => EtStatus::Io,
            ScenarioError::Runtime(_) => EtStatus::Runtime,
        };
        Fail(status, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> EtStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EtStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EtStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(EtStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(EtStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn c_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).map(CString::into_raw).unwrap_or(ptr::null_mut())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn et_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, static storage.
#[no_mangle]
pub extern "C" fn et_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn et_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

// ---- vehicle ----------------------------------------------------------------

/// The EDGAR van with its identified parameters.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn et_vehicle_new_edgar(out: *mut *mut EtVehicle) -> EtStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(EtVehicle(SingleTrack::edgar())));
        Ok(())
    })
}

/// Vehicle from TOML text; missing keys keep the EDGAR values.
///
/// # Safety
/// `toml` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn et_vehicle_parse(toml: *const c_char, out: *mut *mut EtVehicle) -> EtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let model = dynamics::load_vehicle(str_arg(toml, "toml")?).map_err(|e| Fail(EtStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(EtVehicle(model)));
        Ok(())
    })
}

/// # Safety
/// `v` must come from this library and not have been freed, or be null.
#[no_mangle]
pub unsafe extern "C" fn et_vehicle_free(v: *mut EtVehicle) {
    free(v)
}

/// Static front and rear axle loads [N].
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn et_vehicle_axle_loads(v: *const EtVehicle, f_z_f: *mut f64, f_z_r: *mut f64) -> EtStatus {
    guard(|| {
        let v = handle(v, "vehicle")?;
        *out_arg(f_z_f, "f_z_f")? = v.0.loads.f_z_f;
        *out_arg(f_z_r, "f_z_r")? = v.0.loads.f_z_r;
        Ok(())
    })
}

/// One RK4 step of `dt` seconds with road-wheel angle `delta` [rad] and net
/// drive force `f_x` [N] held. `state` is updated in place.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn et_vehicle_step(
    v: *const EtVehicle,
    state: *mut EtState,
    delta: f64,
    f_x: f64,
    dt: f64,
) -> EtStatus {
    guard(|| {
        let v = handle(v, "vehicle")?;
        let state = out_arg(state, "state")?;
        let input = DriveInput { delta, f_x_drive: f_x };
        let next = dynamics::step(&v.0, 0.0, &(*state).into(), &input, dt).map_err(|e| {
            let status = match e {
                dynamics::DynamicsError::Divergence { .. } => EtStatus::Divergence,
                _ => EtStatus::InvalidArgument,
            };
            Fail(status, e.to_string())
        })?;
        *state = next.into();
        Ok(())
    })
}

// ---- rig --------------------------------------------------------------------

/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn et_rig_new_edgar(out: *mut *mut EtRig) -> EtStatus {
    guard(|| {
        *out_arg(out, "out")? = Box::into_raw(Box::new(EtRig(sensors::edgar_rig())));
        Ok(())
    })
}

/// # Safety
/// `toml` must be a NUL-terminated string, `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn et_rig_parse(toml: *const c_char, out: *mut *mut EtRig) -> EtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let rig = sensors::load_rig(str_arg(toml, "toml")?).map_err(|e| Fail(EtStatus::Config, e.to_string()))?;
        *out = Box::into_raw(Box::new(EtRig(rig)));
        Ok(())
    })
}

/// # Safety
/// `r` must come from this library and not have been freed, or be null.
#[no_mangle]
pub unsafe extern "C" fn et_rig_free(r: *mut EtRig) {
    free(r)
}

/// Number of physical devices.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn et_rig_device_count(r: *const EtRig, out: *mut usize) -> EtStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(r, "rig")?.0.devices().len();
        Ok(())
    })
}

/// Whether the sensor (device or pattern id) sees the vehicle-frame point,
/// including occlusion by the vehicle body.
///
/// # Safety
/// All pointers must be valid; `sensor_id` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn et_rig_is_point_visible(
    r: *const EtRig,
    sensor_id: *const c_char,
    x: f64,
    y: f64,
    z: f64,
    out: *mut bool,
) -> EtStatus {
    guard(|| {
        let r = handle(r, "rig")?;
        let id = str_arg(sensor_id, "sensor_id")?;
        let out = out_arg(out, "out")?;
        *out = sensors::is_point_visible(&r.0, id, &[x, y, z])
            .map_err(|e| Fail(EtStatus::InvalidArgument, e.to_string()))?;
        Ok(())
    })
}

// ---- driving modes ----------------------------------------------------------

/// Clamps `cmd` to the default limits of `mode`. `flags` receives a bit set
/// of `ET_CLAMPED_*`. Series and measurement modes fail with `Config`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn et_limit_command(
    mode: EtMode,
    cmd: EtCommand,
    out: *mut EtCommand,
    flags: *mut u32,
) -> EtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let flags = out_arg(flags, "flags")?;
        let mode = DrivingMode::from(mode);
        let c = scenario::Command { speed_target: cmd.speed_target, steering_rate: cmd.steering_rate, accel: cmd.accel };
        let l = scenario::limit_command(mode, &ModeLimits::for_mode(mode), c)?;
        *out = EtCommand {
            speed_target: l.command.speed_target,
            steering_rate: l.command.steering_rate,
            accel: l.command.accel,
        };
        let bit = |set: bool, b: u32| if set { b } else { 0 };
        *flags = bit(l.flags.speed, ET_CLAMPED_SPEED)
            | bit(l.flags.steering_rate, ET_CLAMPED_STEERING_RATE)
            | bit(l.flags.accel, ET_CLAMPED_ACCEL);
        Ok(())
    })
}

// ---- scenarios --------------------------------------------------------------

/// Parses a scenario file. A negative `seed` keeps the file's seed.
///
/// # Safety
/// `path` must be NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn et_scenario_load(path: *const c_char, seed: i64, out: *mut *mut EtScenario) -> EtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let path = str_arg(path, "path")?;
        let seed = u64::try_from(seed).ok();
        let cfg = scenario::parse_scenario_seeded(Path::new(path), seed)?;
        *out = Box::into_raw(Box::new(EtScenario(cfg)));
        Ok(())
    })
}

/// Parses scenario text; relative paths resolve against `base_dir`
/// (the current directory when null).
///
/// # Safety
/// `text` and a non-null `base_dir` must be NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn et_scenario_parse(
    text: *const c_char,
    base_dir: *const c_char,
    out: *mut *mut EtScenario,
) -> EtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let text = str_arg(text, "text")?;
        let base = if base_dir.is_null() { "." } else { str_arg(base_dir, "base_dir")? };
        let cfg = scenario::parse_scenario_str(text, Path::new(base))?;
        *out = Box::into_raw(Box::new(EtScenario(cfg)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not have been freed, or be null.
#[no_mangle]
pub unsafe extern "C" fn et_scenario_free(s: *mut EtScenario) {
    free(s)
}

/// Effective configuration as TOML. Free with `et_string_free`.
///
/// # Safety
/// `s` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn et_scenario_effective_config(s: *const EtScenario) -> *mut c_char {
    match handle(s, "scenario") {
        Ok(s) => c_string(s.0.effective_toml()),
        Err(Fail(_, m)) => {
            set_error(&m);
            ptr::null_mut()
        }
    }
}

/// Runs the scenario. With a non-null `out_dir` the report, CSVs and ride
/// are written there. A report is returned through `out` whenever the run
/// got far enough to produce one: on success, on `CheckFailed`, and as a
/// partial report on `Runtime`/`Divergence`.
///
/// # Safety
/// `s` and `out` must be valid; a non-null `out_dir` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn et_scenario_run(
    s: *const EtScenario,
    out_dir: *const c_char,
    out: *mut *mut EtReport,
) -> EtStatus {
    guard(|| {
        let s = handle(s, "scenario")?;
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let dir = if out_dir.is_null() { None } else { Some(str_arg(out_dir, "out_dir")?) };
        let export = s.0.store.as_ref().is_some_and(|st| st.export_csv);
        match scenario::run_scenario(&s.0) {
            Ok(run) => {
                if let Some(d) = dir {
                    scenario::write_outputs(&run, Path::new(d), export)?;
                }
                let passed = run.report.passed();
                let summary = run.report.checks.iter().filter(|c| !c.0).map(|c| c.1.clone()).collect::<Vec<_>>();
                *out = Box::into_raw(Box::new(EtReport(run)));
                if passed {
                    Ok(())
                } else {
                    Err(Fail(EtStatus::CheckFailed, summary.join("; ")))
                }
            }
            Err(f) => {
                if let Some(d) = dir {
                    let _ = scenario::write_outputs(&f.partial, Path::new(d), false);
                }
                *out = Box::into_raw(Box::new(EtReport(f.partial)));
                Err(f.error.into())
            }
        }
    })
}

/// # Safety
/// `r` must come from this library and not have been freed, or be null.
#[no_mangle]
pub unsafe extern "C" fn et_report_free(r: *mut EtReport) {
    free(r)
}

/// report.txt contents. Free with `et_string_free`.
///
/// # Safety
/// `r` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn et_report_render(r: *const EtReport) -> *mut c_char {
    match handle(r, "report") {
        Ok(r) => c_string(r.0.report.render()),
        Err(Fail(_, m)) => {
            set_error(&m);
            ptr::null_mut()
        }
    }
}

/// Process exit code the CLI would use for this report: 0 or 3.
///
/// # Safety
/// `r` must be a valid handle.
#[no_mangle]
pub unsafe extern "C" fn et_report_exit_code(r: *const EtReport) -> i32 {
    r.as_ref().map_or(-1, |r| r.0.report.exit_code())
}

/// Contents of one CSV artifact (e.g. "dynamics.csv"); null if absent.
/// Free with `et_string_free`.
///
/// # Safety
/// `r` must be a valid handle, `name` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn et_report_artifact(r: *const EtReport, name: *const c_char) -> *mut c_char {
    let (Some(r), Ok(name)) = (r.as_ref(), str_arg(name, "name")) else {
        set_error("report or name is null or invalid");
        return ptr::null_mut();
    };
    match r.0.artifacts.iter().find(|a| a.0 == name) {
        Some(a) => c_string(a.1.clone()),
        None => {
            set_error(&format!("no artifact '{name}'"));
            ptr::null_mut()
        }
    }
}

// ---- store ------------------------------------------------------------------

/// # Safety
/// `dir` must be NUL-terminated, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn et_store_load(dir: *const c_char, out: *mut *mut EtStore) -> EtStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let store = RideStore::load(Path::new(str_arg(dir, "dir")?)).map_err(|e| Fail(EtStatus::Io, e.to_string()))?;
        *out = Box::into_raw(Box::new(EtStore(store)));
        Ok(())
    })
}

/// # Safety
/// `s` must come from this library and not have been freed, or be null.
#[no_mangle]
pub unsafe extern "C" fn et_store_free(s: *mut EtStore) {
    free(s)
}

/// Number of integrity violations; the rendered list is the last error
/// message when it is nonzero.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn et_store_check(s: *const EtStore, violations: *mut usize) -> EtStatus {
    guard(|| {
        let s = handle(s, "store")?;
        let out = out_arg(violations, "violations")?;
        let report = s.0.integrity_check();
        *out = report.violations.len();
        if !report.is_clean() {
            set_error(&report.render());
        }
        Ok(())
    })
}

/// Scene ids matching a tag expression, one per line. Free with
/// `et_string_free`.
///
/// # Safety
/// All pointers must be valid; `expr` NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn et_store_query(s: *const EtStore, expr: *const c_char, out: *mut *mut c_char) -> EtStatus {
    guard(|| {
        let s = handle(s, "store")?;
        let out = out_arg(out, "out")?;
        let ids = s.0.query(str_arg(expr, "expr")?).map_err(|e| Fail(EtStatus::InvalidArgument, e.to_string()))?;
        let mut text = String::new();
        for id in ids {
            text.push_str(&id);
            text.push('\n');
        }
        *out = c_string(text);
        Ok(())
    })
}
