//! Constant steering-wheel angle steady-state circular driving tests.
//!
//! Both variants hold the road-wheel angle at `swa / steering_ratio` and
//! regulate the drive force so that the vehicle follows a speed target. The
//! discrete variant settles at each speed separately; the continuous variant
//! ramps the target slowly and samples quasi-steady values at checkpoints.

use std::collections::VecDeque;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::integrator::{step_with, DEFAULT_DT};
use super::model::{resistance_forces, DriveInput, SingleTrack, VehicleState};
use super::params::VehicleParams;
use super::DynamicsError;

pub const MIN_TEST_SPEED: f64 = 5.0 / 3.6;
pub const MAX_TEST_SPEED: f64 = 130.0 / 3.6;
pub const MAX_TEST_SWA: f64 = 540.0 * std::f64::consts::PI / 180.0;

const SPEED_TOLERANCE: f64 = 1e-3;

/// One row of a steady-state report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStatePoint {
    /// Longitudinal speed [m/s]
    pub speed: f64,
    /// Steering-wheel angle [rad]
    pub swa: f64,
    /// Yaw rate [rad/s]
    pub yaw_rate: f64,
    /// Body lateral acceleration [m/s^2]
    pub lateral_accel: f64,
    /// Path radius [m]; `None` when the yaw rate is zero
    pub radius: Option<f64>,
    /// Body sideslip angle [rad]
    pub sideslip: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SteadyStateReport {
    pub points: Vec<SteadyStatePoint>,
}

impl SteadyStateReport {
    pub const CSV_HEADER: &'static str = "speed_mps,swa_rad,yawrate_radps,ay_mps2,radius_m,sideslip_rad,converged";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for p in &self.points {
            let radius = p.radius.map(|r| r.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                p.speed, p.swa, p.yaw_rate, p.lateral_accel, radius, p.sideslip, p.converged
            );
        }
        out
    }

    pub fn converged_points(&self) -> impl Iterator<Item = &SteadyStatePoint> {
        self.points.iter().filter(|p| p.converged)
    }
}

/// Knobs of the test procedures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Iso4138Options {
    pub dt: f64,
    /// Length of the moving window used for settling [s]
    pub settle_window: f64,
    /// Yaw-rate standard deviation over the window that counts as settled [rad/s]
    pub settle_std: f64,
    /// Simulated time budget per discrete point [s]
    pub time_budget: f64,
    /// Proportional speed-controller gain [1/s]
    pub speed_gain: f64,
    /// Yaw-rate sampling period for the settling window [s]
    pub sample_period: f64,
}

impl Default for Iso4138Options {
    fn default() -> Self {
        Self {
            dt: DEFAULT_DT,
            settle_window: 2.0,
            settle_std: 1e-4,
            time_budget: 60.0,
            speed_gain: 2.0,
            sample_period: 0.01,
        }
    }
}

/// Discrete test speeds from 5 to 130 km/h in 5 km/h increments.
pub fn default_speeds() -> Vec<f64> {
    (1..=26).map(|k| (5 * k) as f64 / 3.6).collect()
}

/// Feedforward plus proportional drive force for a speed target.
///
/// Feedforward cancels drag, rolling resistance, the longitudinal component of
/// the front lateral force and the centripetal coupling term.
pub(crate) fn speed_controller(
    model: &SingleTrack,
    state: &VehicleState,
    delta: f64,
    target: f64,
    target_accel: f64,
    gain: f64,
) -> DriveInput {
    let p = &model.params;
    let probe = DriveInput { delta, f_x_drive: 0.0 };
    let forces = model.forces(state, &probe);
    let (drag, roll) = resistance_forces(state, p);
    let mut f_x = p.m * (gain * (target - state.v_x) + target_accel) + drag + roll
        + forces.f_y_front * delta.sin()
        - p.m * state.v_y * state.psi_dot;
    let (mu_f, mu_r) = model.friction_limits();
    f_x = f_x.clamp(-(mu_f + mu_r), mu_f + mu_r);
    DriveInput { delta, f_x_drive: f_x }
}

fn validate(model: &SingleTrack, swa: f64) -> Result<f64, DynamicsError> {
    if !swa.is_finite() || swa.abs() > MAX_TEST_SWA * (1.0 + 1e-12) {
        return Err(DynamicsError::OutOfEnvelope(format!(
            "steering-wheel angle {swa} rad outside +/-540 deg"
        )));
    }
    let delta = swa / model.params.steering_ratio;
    if delta.abs() > model.params.max_road_wheel_angle {
        return Err(DynamicsError::OutOfEnvelope(format!(
            "road-wheel angle {delta} rad exceeds the configured maximum"
        )));
    }
    Ok(delta)
}

fn check_speed(v: f64) -> Result<(), DynamicsError> {
    if !(MIN_TEST_SPEED - SPEED_TOLERANCE..=MAX_TEST_SPEED + SPEED_TOLERANCE).contains(&v) {
        return Err(DynamicsError::OutOfEnvelope(format!(
            "test speed {v} m/s outside 5..130 km/h"
        )));
    }
    Ok(())
}

fn measure(model: &SingleTrack, state: &VehicleState, input: &DriveInput, swa: f64, converged: bool) -> SteadyStatePoint {
    let lateral_accel = match model.state_derivative(state, input) {
        Ok(rate) => rate.v_y + state.v_x * state.psi_dot,
        Err(_) => f64::NAN,
    };
    let radius = if state.psi_dot != 0.0 { Some(state.v_x / state.psi_dot) } else { None };
    SteadyStatePoint {
        speed: state.v_x,
        swa,
        yaw_rate: state.psi_dot,
        lateral_accel,
        radius,
        sideslip: state.sideslip(),
        converged: converged && lateral_accel.is_finite(),
    }
}

/// Fixed-length window of yaw-rate samples with a running standard deviation.
struct SettleWindow {
    samples: VecDeque<f64>,
    capacity: usize,
}

impl SettleWindow {
    fn new(capacity: usize) -> Self {
        Self { samples: VecDeque::with_capacity(capacity), capacity }
    }

    fn push(&mut self, v: f64) {
        if self.samples.len() == self.capacity {
            self.samples.pop_front();
        }
        self.samples.push_back(v);
    }

    fn std(&self) -> Option<f64> {
        if self.samples.len() < self.capacity {
            return None;
        }
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        let var = self.samples.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        Some(var.sqrt())
    }
}

/// Holds `target` speed and road-wheel angle `delta` from `initial` until the
/// yaw rate settles or the time budget runs out. Returns the final state and
/// whether it settled.
fn settle(
    model: &SingleTrack,
    initial: VehicleState,
    delta: f64,
    target: f64,
    opts: &Iso4138Options,
) -> Result<(VehicleState, bool), DynamicsError> {
    let steps_per_sample = ((opts.sample_period / opts.dt).round() as usize).max(1);
    let window_len = ((opts.settle_window / (steps_per_sample as f64 * opts.dt)).round() as usize).max(2);
    let max_steps = (opts.time_budget / opts.dt).ceil() as usize;
    let mut window = SettleWindow::new(window_len);
    let mut state = initial;
    for k in 0..max_steps {
        let t = k as f64 * opts.dt;
        state = step_with(model, t, &state, opts.dt, |_, s| {
            speed_controller(model, s, delta, target, 0.0, opts.speed_gain)
        })?;
        if (k + 1) % steps_per_sample == 0 {
            window.push(state.psi_dot);
            if let Some(std) = window.std() {
                if std < opts.settle_std {
                    return Ok((state, true));
                }
            }
        }
        if state.v_x < 0.0 || state.sideslip().abs() > 1.0 {
            return Ok((state, false));
        }
    }
    Ok((state, false))
}

/// Discrete speed-increase test: one settled point per requested speed.
pub fn run_iso4138_discrete(
    model: &SingleTrack,
    swa: f64,
    speeds: &[f64],
    opts: &Iso4138Options,
) -> Result<SteadyStateReport, DynamicsError> {
    let delta = validate(model, swa)?;
    for pair in speeds.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(DynamicsError::OutOfEnvelope("test speeds must be strictly increasing".into()));
        }
    }
    let mut report = SteadyStateReport::default();
    for &speed in speeds {
        check_speed(speed)?;
        let initial = VehicleState::moving_straight(speed);
        let point = match settle(model, initial, delta, speed, opts) {
            Ok((state, settled)) => {
                let input = speed_controller(model, &state, delta, speed, 0.0, opts.speed_gain);
                measure(model, &state, &input, swa, settled)
            }
            Err(DynamicsError::Divergence { .. }) => SteadyStatePoint {
                speed,
                swa,
                yaw_rate: f64::NAN,
                lateral_accel: f64::NAN,
                radius: None,
                sideslip: f64::NAN,
                converged: false,
            },
            Err(e) => return Err(e),
        };
        report.points.push(point);
    }
    Ok(report)
}

/// Continuous speed-increase test.
///
/// The vehicle first settles at the lowest checkpoint speed, then the speed
/// target ramps at `accel_rate`. Each checkpoint is recorded by linear
/// interpolation between the two integration steps that bracket it.
pub fn run_iso4138_continuous(
    model: &SingleTrack,
    swa: f64,
    accel_rate: f64,
    checkpoints: &[f64],
    opts: &Iso4138Options,
) -> Result<SteadyStateReport, DynamicsError> {
    let delta = validate(model, swa)?;
    if !(accel_rate > 0.0 && accel_rate <= 1.0) {
        return Err(DynamicsError::OutOfEnvelope(format!(
            "ramp rate {accel_rate} m/s^2 outside (0, 1] quasi-steady range"
        )));
    }
    let mut report = SteadyStateReport::default();
    let Some(&first) = checkpoints.first() else {
        return Ok(report);
    };
    for pair in checkpoints.windows(2) {
        if !(pair[1] > pair[0]) {
            return Err(DynamicsError::OutOfEnvelope("checkpoints must be strictly increasing".into()));
        }
    }
    for &c in checkpoints {
        check_speed(c)?;
    }

    let (mut state, settled) = settle(model, VehicleState::moving_straight(first), delta, first, opts)?;
    let input = speed_controller(model, &state, delta, first, 0.0, opts.speed_gain);
    report.points.push(measure(model, &state, &input, swa, settled));

    let ramp_time = (checkpoints[checkpoints.len() - 1] - first) / accel_rate;
    let max_steps = ((ramp_time + opts.time_budget) / opts.dt).ceil() as usize;
    // the target keeps ramping past the last checkpoint so that it is crossed
    let control = |t: f64, s: &VehicleState| {
        speed_controller(model, s, delta, first + accel_rate * t, accel_rate, opts.speed_gain)
    };

    let mut next = 1;
    let ok = settled;
    for k in 0..max_steps {
        if next >= checkpoints.len() {
            break;
        }
        let t = k as f64 * opts.dt;
        let prev = state;
        state = match step_with(model, t, &state, opts.dt, control) {
            Ok(s) => s,
            Err(DynamicsError::Divergence { .. }) => break,
            Err(e) => return Err(e),
        };
        if state.sideslip().abs() > 1.0 {
            break;
        }
        while next < checkpoints.len() && state.v_x >= checkpoints[next] {
            let c = checkpoints[next];
            let w = if state.v_x > prev.v_x { (c - prev.v_x) / (state.v_x - prev.v_x) } else { 1.0 };
            let a = prev.to_array();
            let b = state.to_array();
            let mut mix = [0.0; 6];
            for i in 0..6 {
                mix[i] = a[i] + w * (b[i] - a[i]);
            }
            let at = VehicleState::from_array(mix);
            let input = control(t + w * opts.dt, &at);
            report.points.push(measure(model, &at, &input, swa, ok));
            next += 1;
        }
    }
    for &c in &checkpoints[next..] {
        report.points.push(SteadyStatePoint {
            speed: c,
            swa,
            yaw_rate: f64::NAN,
            lateral_accel: f64::NAN,
            radius: None,
            sideslip: f64::NAN,
            converged: false,
        });
    }
    Ok(report)
}

/// Least-squares understeer gradient [rad per m/s^2].
///
/// Regresses `delta - (l_f + l_r) / R` on lateral acceleration over converged
/// points with `|a_y| <= max_lateral_accel`.
pub fn understeer_gradient(
    report: &SteadyStateReport,
    params: &VehicleParams,
    max_lateral_accel: f64,
) -> Result<f64, DynamicsError> {
    let l = params.wheelbase();
    let pts: Vec<(f64, f64)> = report
        .converged_points()
        .filter(|p| p.lateral_accel.abs() <= max_lateral_accel)
        .filter_map(|p| {
            let r = p.radius?;
            Some((p.lateral_accel, p.swa / params.steering_ratio - l / r))
        })
        .collect();
    if pts.len() < 3 {
        return Err(DynamicsError::InsufficientPoints { needed: 3, got: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx <= f64::EPSILON * n * mx.abs().max(1.0) {
        return Err(DynamicsError::InsufficientPoints { needed: 3, got: 1 });
    }
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(gradient: f64) -> SteadyStateReport {
        let p = VehicleParams::default();
        let l = p.wheelbase();
        let delta = 0.05;
        // pick lateral accelerations, derive radius so that delta - l/R = K * a_y
        let points = [0.5, 1.0, 1.5, 2.0, 3.0, 3.5]
            .iter()
            .map(|&ay| {
                let r = l / (delta - gradient * ay);
                SteadyStatePoint {
                    speed: (ay * r).sqrt(),
                    swa: delta * p.steering_ratio,
                    yaw_rate: ay / (ay * r).sqrt(),
                    lateral_accel: ay,
                    radius: Some(r),
                    sideslip: 0.0,
                    converged: true,
                }
            })
            .collect();
        SteadyStateReport { points }
    }

    #[test]
    fn neutral_steer_gives_zero_gradient() {
        let k = understeer_gradient(&synthetic(0.0), &VehicleParams::default(), 4.0).unwrap();
        assert!(k.abs() < 1e-12, "{k}");
    }

    #[test]
    fn injected_gradient_is_recovered() {
        let k = understeer_gradient(&synthetic(0.002), &VehicleParams::default(), 4.0).unwrap();
        assert!((k - 0.002).abs() < 1e-9, "{k}");
    }

    #[test]
    fn too_few_points() {
        let mut r = synthetic(0.001);
        r.points.truncate(2);
        assert!(matches!(
            understeer_gradient(&r, &VehicleParams::default(), 4.0),
            Err(DynamicsError::InsufficientPoints { .. })
        ));
    }

    #[test]
    fn zero_steering_has_no_radius() {
        let m = SingleTrack::edgar();
        let rep = run_iso4138_discrete(&m, 0.0, &[20.0 / 3.6], &Iso4138Options::default()).unwrap();
        let p = rep.points[0];
        assert!(p.converged);
        assert_eq!(p.yaw_rate, 0.0);
        assert!(p.radius.is_none());
    }

    #[test]
    fn envelope_is_enforced() {
        let m = SingleTrack::edgar();
        let o = Iso4138Options::default();
        assert!(run_iso4138_discrete(&m, 0.5, &[1.0], &o).is_err());
        assert!(run_iso4138_discrete(&m, 0.5, &[40.0], &o).is_err());
        assert!(run_iso4138_discrete(&m, 10.0, &[10.0], &o).is_err());
        assert!(run_iso4138_discrete(&m, 0.5, &[10.0, 5.0], &o).is_err());
    }

    #[test]
    fn csv_has_header_and_empty_radius() {
        let rep = SteadyStateReport {
            points: vec![SteadyStatePoint {
                speed: 2.0,
                swa: 0.0,
                yaw_rate: 0.0,
                lateral_accel: 0.0,
                radius: None,
                sideslip: 0.0,
                converged: true,
            }],
        };
        let csv = rep.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some(SteadyStateReport::CSV_HEADER));
        assert_eq!(lines.next(), Some("2,0,0,0,,0,true"));
    }

    #[test]
    fn continuous_zero_steer_stays_straight() {
        let m = SingleTrack::edgar();
        let rep = run_iso4138_continuous(&m, 0.0, 0.5, &[10.0, 12.0, 14.0], &Iso4138Options::default()).unwrap();
        assert_eq!(rep.points.len(), 3);
        for p in &rep.points {
            assert!(p.converged);
            assert_eq!(p.yaw_rate, 0.0);
        }
        assert!(rep.points.windows(2).all(|w| w[1].speed > w[0].speed));
    }
}
