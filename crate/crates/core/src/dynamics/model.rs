use serde::{Deserialize, Serialize};

use super::params::{static_axle_loads, AxleLoads, AxleTires, VehicleParams};
use super::tire::{combined_slip_scale, pacejka_lateral_force};
use super::DynamicsError;

/// Below this longitudinal speed [m/s] slip angles are not evaluated and the
/// model relaxes towards the kinematic bicycle.
pub const LOW_SPEED_GUARD: f64 = 0.5;

/// Relaxation time constant [s] of lateral states in the kinematic regime.
pub const KINEMATIC_RELAXATION: f64 = 0.05;

/// Planar body state. Velocities are expressed in the body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub psi_dot: f64,
}

impl VehicleState {
    pub fn moving_straight(v_x: f64) -> Self {
        Self { v_x, ..Self::default() }
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.x, self.y, self.psi, self.v_x, self.v_y, self.psi_dot]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { x: a[0], y: a[1], psi: a[2], v_x: a[3], v_y: a[4], psi_dot: a[5] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }

    /// `self + h * rate`, componentwise.
    pub(crate) fn offset(self, rate: &VehicleState, h: f64) -> Self {
        let mut a = self.to_array();
        for (s, r) in a.iter_mut().zip(rate.to_array()) {
            *s += h * r;
        }
        Self::from_array(a)
    }

    /// Body sideslip angle [rad].
    pub fn sideslip(&self) -> f64 {
        if self.v_x == 0.0 && self.v_y == 0.0 {
            0.0
        } else {
            self.v_y.atan2(self.v_x)
        }
    }

    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }
}

/// Actuator input held by the integrator over a step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DriveInput {
    /// Road-wheel steering angle [rad]
    pub delta: f64,
    /// Net longitudinal drive (+) or brake (-) force at the wheels [N]
    pub f_x_drive: f64,
}

/// Tire forces at one evaluation point, exposed for controllers and reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForceBreakdown {
    pub f_x_front: f64,
    pub f_x_rear: f64,
    pub f_y_front: f64,
    pub f_y_rear: f64,
    pub f_drag: f64,
    pub f_roll: f64,
}

/// Dynamic single-track model with static axle loads.
#[derive(Debug, Clone, Copy)]
pub struct SingleTrack {
    pub params: VehicleParams,
    pub tires: AxleTires,
    pub loads: AxleLoads,
}

impl SingleTrack {
    pub fn new(params: VehicleParams, tires: AxleTires) -> Result<Self, DynamicsError> {
        let params = params.validated()?;
        let tires = AxleTires {
            front: tires.front.validated()?,
            rear: tires.rear.validated()?,
        };
        Ok(Self { loads: static_axle_loads(&params), params, tires })
    }

    pub fn edgar() -> Self {
        Self::new(VehicleParams::default(), AxleTires::default()).expect("default parameters are valid")
    }

    /// Friction-limited loads `D_scale * F_z` per axle.
    pub fn friction_limits(&self) -> (f64, f64) {
        (
            self.tires.front.d_scale * self.loads.f_z_f,
            self.tires.rear.d_scale * self.loads.f_z_r,
        )
    }

    /// Splits a net drive force over the axles proportionally to static load
    /// and clips each share to the axle's friction limit.
    pub fn axle_drive_forces(&self, f_x_drive: f64) -> (f64, f64) {
        let weight = self.loads.f_z_f + self.loads.f_z_r;
        let (mu_f, mu_r) = self.friction_limits();
        let front = (f_x_drive * self.loads.f_z_f / weight).clamp(-mu_f, mu_f);
        let rear = (f_x_drive * self.loads.f_z_r / weight).clamp(-mu_r, mu_r);
        (front, rear)
    }

    pub fn forces(&self, state: &VehicleState, input: &DriveInput) -> ForceBreakdown {
        let (f_drag, f_roll) = resistance_forces(state, &self.params);
        let (f_x_front, f_x_rear) = self.axle_drive_forces(input.f_x_drive);
        let (f_y_front, f_y_rear) = match slip_angles(state, input.delta, &self.params) {
            Ok((alpha_f, alpha_r)) => {
                let (mu_f, mu_r) = self.friction_limits();
                (
                    combined_slip_scale(f_x_front, mu_f)
                        * pacejka_lateral_force(alpha_f, &self.tires.front, self.loads.f_z_f),
                    combined_slip_scale(f_x_rear, mu_r)
                        * pacejka_lateral_force(alpha_r, &self.tires.rear, self.loads.f_z_r),
                )
            }
            Err(_) => (0.0, 0.0),
        };
        ForceBreakdown { f_x_front, f_x_rear, f_y_front, f_y_rear, f_drag, f_roll }
    }

    /// Time derivative of the state under a held input.
    pub fn state_derivative(
        &self,
        state: &VehicleState,
        input: &DriveInput,
    ) -> Result<VehicleState, DynamicsError> {
        let p = &self.params;
        if !input.delta.is_finite() || !input.f_x_drive.is_finite() {
            return Err(DynamicsError::InvalidInput(format!("non-finite input {input:?}")));
        }
        if input.delta.abs() > p.max_road_wheel_angle * (1.0 + 1e-12) {
            return Err(DynamicsError::InvalidInput(format!(
                "road-wheel angle {} rad exceeds the configured maximum {} rad",
                input.delta, p.max_road_wheel_angle
            )));
        }
        let delta = input.delta;
        let f = self.forces(state, input);
        let f_x = f.f_x_front + f.f_x_rear;
        let (sin_psi, cos_psi) = state.psi.sin_cos();

        let mut rate = VehicleState {
            x: state.v_x * cos_psi - state.v_y * sin_psi,
            y: state.v_x * sin_psi + state.v_y * cos_psi,
            psi: state.psi_dot,
            ..VehicleState::default()
        };

        if state.v_x < LOW_SPEED_GUARD {
            let l = p.wheelbase();
            let a_x = (f_x - f.f_drag - f.f_roll) / p.m;
            let curvature = delta.tan() / l;
            let yaw_target = state.v_x * curvature;
            rate.v_x = a_x;
            rate.psi_dot = a_x * curvature + (yaw_target - state.psi_dot) / KINEMATIC_RELAXATION;
            rate.v_y = p.l_r * a_x * curvature + (p.l_r * yaw_target - state.v_y) / KINEMATIC_RELAXATION;
        } else {
            let (sin_d, cos_d) = delta.sin_cos();
            rate.v_x = (f_x - f.f_drag - f.f_roll - f.f_y_front * sin_d) / p.m + state.v_y * state.psi_dot;
            rate.v_y = (f.f_y_front * cos_d + f.f_y_rear) / p.m - state.v_x * state.psi_dot;
            rate.psi_dot = (p.l_f * f.f_y_front * cos_d - p.l_r * f.f_y_rear) / p.i_z;
        }

        if rate.is_finite() {
            Ok(rate)
        } else {
            Err(DynamicsError::NonFiniteDerivative)
        }
    }
}

/// Front and rear slip angles [rad]; fails below [`LOW_SPEED_GUARD`].
pub fn slip_angles(
    state: &VehicleState,
    delta: f64,
    params: &VehicleParams,
) -> Result<(f64, f64), DynamicsError> {
    if !(state.v_x >= LOW_SPEED_GUARD) {
        return Err(DynamicsError::BelowSlipGuard { v_x: state.v_x });
    }
    let alpha_f = delta - ((state.v_y + params.l_f * state.psi_dot) / state.v_x).atan();
    let alpha_r = -((state.v_y - params.l_r * state.psi_dot) / state.v_x).atan();
    Ok((alpha_f, alpha_r))
}

/// Aerodynamic drag and rolling resistance [N], both opposing forward motion.
pub fn resistance_forces(state: &VehicleState, params: &VehicleParams) -> (f64, f64) {
    let drag = 0.5 * params.rho * params.c_d * params.a * state.v_x * state.v_x;
    let roll = if state.v_x > 0.0 {
        params.f_r * params.m * params.g
    } else if state.v_x < 0.0 {
        -params.f_r * params.m * params.g
    } else {
        0.0
    };
    (drag, roll)
}
