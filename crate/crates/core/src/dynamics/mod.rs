//! Nonlinear single-track vehicle dynamics.

mod integrator;
mod iso4138;
mod model;
mod params;
mod tire;

use serde::Deserialize;
use thiserror::Error;

pub use integrator::{integrate, step, step_with, DEFAULT_DT, MAX_DT};
pub use iso4138::{
    default_speeds, run_iso4138_continuous, run_iso4138_discrete, understeer_gradient, Iso4138Options,
    SteadyStatePoint, SteadyStateReport, MAX_TEST_SPEED, MAX_TEST_SWA, MIN_TEST_SPEED,
};
pub(crate) use iso4138::speed_controller;
pub use model::{
    resistance_forces, slip_angles, DriveInput, ForceBreakdown, SingleTrack, VehicleState,
    KINEMATIC_RELAXATION, LOW_SPEED_GUARD,
};
pub use params::{static_axle_loads, AxleLoads, AxleTires, TireParams, VehicleParams};
pub use tire::{combined_slip_scale, pacejka_lateral_force};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("integration step {dt} s outside (0, {max}] s", max = MAX_DT)]
    InvalidStep { dt: f64 },
    #[error("longitudinal speed {v_x} m/s below slip-angle guard")]
    BelowSlipGuard { v_x: f64 },
    #[error("non-finite state derivative")]
    NonFiniteDerivative,
    #[error("simulation diverged at t = {time} s")]
    Divergence { time: f64 },
    #[error("outside test envelope: {0}")]
    OutOfEnvelope(String),
    #[error("need at least {needed} converged points spanning lateral acceleration, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("vehicle config: {0}")]
    Config(String),
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleSection {
    l_f: Option<f64>,
    l_r: Option<f64>,
    l_table: Option<f64>,
    m: Option<f64>,
    i_z: Option<f64>,
    rho: Option<f64>,
    a: Option<f64>,
    c_d: Option<f64>,
    f_r: Option<f64>,
    steering_ratio: Option<f64>,
    g: Option<f64>,
    max_road_wheel_angle: Option<f64>,
    max_road_wheel_angle_deg: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TireSection {
    b: Option<f64>,
    c: Option<f64>,
    d_scale: Option<f64>,
    e: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TiresSection {
    #[serde(default)]
    front: TireSection,
    #[serde(default)]
    rear: TireSection,
}

/// On-disk vehicle description. Every key is optional; missing keys keep the
/// EDGAR defaults.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    #[serde(default)]
    vehicle: VehicleSection,
    #[serde(default)]
    tires: TiresSection,
}

impl VehicleConfig {
    pub fn parse(text: &str) -> Result<Self, DynamicsError> {
        toml::from_str(text).map_err(|e| DynamicsError::Config(e.to_string()))
    }

    /// Resolves defaults, converts degree keys and validates.
    pub fn build(&self) -> Result<SingleTrack, DynamicsError> {
        let d = VehicleParams::default();
        let v = &self.vehicle;
        if v.max_road_wheel_angle.is_some() && v.max_road_wheel_angle_deg.is_some() {
            return Err(DynamicsError::Config(
                "give max_road_wheel_angle either in rad or in deg, not both".into(),
            ));
        }
        let params = VehicleParams {
            l_f: v.l_f.unwrap_or(d.l_f),
            l_r: v.l_r.unwrap_or(d.l_r),
            l_table: v.l_table.unwrap_or(d.l_table),
            m: v.m.unwrap_or(d.m),
            i_z: v.i_z.unwrap_or(d.i_z),
            rho: v.rho.unwrap_or(d.rho),
            a: v.a.unwrap_or(d.a),
            c_d: v.c_d.unwrap_or(d.c_d),
            f_r: v.f_r.unwrap_or(d.f_r),
            steering_ratio: v.steering_ratio.unwrap_or(d.steering_ratio),
            g: v.g.unwrap_or(d.g),
            max_road_wheel_angle: v
                .max_road_wheel_angle
                .or(v.max_road_wheel_angle_deg.map(f64::to_radians))
                .unwrap_or(d.max_road_wheel_angle),
        };
        let tire = |s: &TireSection, base: TireParams| TireParams {
            b: s.b.unwrap_or(base.b),
            c: s.c.unwrap_or(base.c),
            d_scale: s.d_scale.unwrap_or(base.d_scale),
            e: s.e.unwrap_or(base.e),
        };
        let tires = AxleTires {
            front: tire(&self.tires.front, TireParams::FRONT),
            rear: tire(&self.tires.rear, TireParams::REAR),
        };
        SingleTrack::new(params, tires)
    }
}

/// Parses and builds a vehicle model from configuration text.
pub fn load_vehicle(text: &str) -> Result<SingleTrack, DynamicsError> {
    VehicleConfig::parse(text)?.build()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_is_default_vehicle() {
        let m = load_vehicle("").unwrap();
        assert_eq!(m.params, VehicleParams::default());
        assert_eq!(m.tires, AxleTires::default());
    }

    #[test]
    fn degrees_are_converted() {
        let m = load_vehicle("[vehicle]\nmax_road_wheel_angle_deg = 30.0\n").unwrap();
        assert!((m.params.max_road_wheel_angle - 30f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn unknown_key_is_named() {
        let err = load_vehicle("[vehicle]\nmass = 3\n").unwrap_err();
        assert!(err.to_string().contains("mass"), "{err}");
    }

    #[test]
    fn zero_mass_rejected_on_load() {
        assert!(load_vehicle("[vehicle]\nm = 0.0\n").is_err());
    }

    #[test]
    fn tire_overrides() {
        let m = load_vehicle("[tires.rear]\nb = 11.0\n").unwrap();
        assert_eq!(m.tires.rear.b, 11.0);
        assert_eq!(m.tires.rear.c, 1.8);
    }
}
