use serde::{Deserialize, Serialize};

use super::ScenarioError;

/// Operating modes of the vehicle. Only autonomous and high-dynamic let the
/// software actuate; in the other two the drive-by-wire path is cut off.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DrivingMode {
    Series,
    Measurement,
    #[default]
    Autonomous,
    HighDynamic,
}

impl DrivingMode {
    pub fn name(self) -> &'static str {
        match self {
            DrivingMode::Series => "series",
            DrivingMode::Measurement => "measurement",
            DrivingMode::Autonomous => "autonomous",
            DrivingMode::HighDynamic => "high_dynamic",
        }
    }

    pub fn allows_actuation(self) -> bool {
        matches!(self, DrivingMode::Autonomous | DrivingMode::HighDynamic)
    }
}

/// Per-channel magnitude limits. Infinite means unlimited.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModeLimits {
    /// [m/s]
    pub max_speed: f64,
    /// [m/s^2]
    pub max_accel: f64,
    /// [m/s^2], positive
    pub max_decel: f64,
    /// [m/s^2]
    pub max_lateral_accel: f64,
    /// Steering-wheel rate [rad/s]
    pub max_steering_rate: f64,
}

pub const HIGH_DYNAMIC_MAX_SPEED: f64 = 130.0 / 3.6;

impl ModeLimits {
    pub fn for_mode(mode: DrivingMode) -> Self {
        match mode {
            DrivingMode::HighDynamic => Self {
                max_speed: HIGH_DYNAMIC_MAX_SPEED,
                max_accel: f64::INFINITY,
                max_decel: f64::INFINITY,
                max_lateral_accel: f64::INFINITY,
                max_steering_rate: f64::INFINITY,
            },
            DrivingMode::Autonomous => Self {
                max_speed: 50.0 / 3.6,
                max_accel: 2.5,
                max_decel: 2.5,
                max_lateral_accel: 2.5,
                max_steering_rate: 0.3,
            },
            DrivingMode::Series | DrivingMode::Measurement => Self {
                max_speed: 0.0,
                max_accel: 0.0,
                max_decel: 0.0,
                max_lateral_accel: 0.0,
                max_steering_rate: 0.0,
            },
        }
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        for (name, v) in [
            ("max_speed", self.max_speed),
            ("max_accel", self.max_accel),
            ("max_decel", self.max_decel),
            ("max_lateral_accel", self.max_lateral_accel),
            ("max_steering_rate", self.max_steering_rate),
        ] {
            if !(v > 0.0) {
                return Err(ScenarioError::Config(format!("limits.{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// A request on the three actuated channels.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    /// [m/s]
    pub speed_target: f64,
    /// Steering-wheel rate [rad/s]
    pub steering_rate: f64,
    /// [m/s^2]
    pub accel: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ClampFlags {
    pub speed: bool,
    pub steering_rate: bool,
    pub accel: bool,
}

impl ClampFlags {
    pub fn any(&self) -> bool {
        self.speed || self.steering_rate || self.accel
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Limited {
    pub command: Command,
    pub flags: ClampFlags,
}

fn clamp_sym(x: f64, max: f64) -> (f64, bool) {
    if x.abs() > max {
        (max.copysign(x), true)
    } else {
        (x, false)
    }
}

/// Clamps every channel of `cmd` to `limits`. Speed and steering rate are
/// limited symmetrically; acceleration to `[-max_decel, max_accel]`.
pub fn limit_command(mode: DrivingMode, limits: &ModeLimits, cmd: Command) -> Result<Limited, ScenarioError> {
    if !mode.allows_actuation() {
        return Err(ScenarioError::Actuation(mode));
    }
    if !(cmd.speed_target.is_finite() && cmd.steering_rate.is_finite() && cmd.accel.is_finite()) {
        return Err(ScenarioError::Runtime(format!("non-finite command {cmd:?}")));
    }
    let (speed_target, speed) = clamp_sym(cmd.speed_target, limits.max_speed);
    let (steering_rate, steer) = clamp_sym(cmd.steering_rate, limits.max_steering_rate);
    let (accel, acc) = if cmd.accel > limits.max_accel {
        (limits.max_accel, true)
    } else if cmd.accel < -limits.max_decel {
        (-limits.max_decel, true)
    } else {
        (cmd.accel, false)
    };
    Ok(Limited {
        command: Command { speed_target, steering_rate, accel },
        flags: ClampFlags { speed, steering_rate: steer, accel: acc },
    })
}
