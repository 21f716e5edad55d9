use serde::{Deserialize, Serialize};

use super::DynamicsError;

/// Single-track geometry, mass and resistance parameters.
///
/// Defaults are the identified values of the EDGAR van. `l_table` is the
/// tabulated wheelbase; every computation uses `l_f + l_r` instead because the
/// two do not agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleParams {
    /// Front axle to center of gravity [m]
    pub l_f: f64,
    /// Rear axle to center of gravity [m]
    pub l_r: f64,
    /// Tabulated wheelbase [m], stored but unused
    pub l_table: f64,
    /// Vehicle mass [kg]
    pub m: f64,
    /// Yaw moment of inertia [kg m^2]
    pub i_z: f64,
    /// Air density [kg/m^3]
    pub rho: f64,
    /// Frontal area [m^2]
    pub a: f64,
    /// Drag coefficient [-]
    pub c_d: f64,
    /// Rolling resistance coefficient [-]
    pub f_r: f64,
    /// Steering-wheel to road-wheel angle ratio [-]
    pub steering_ratio: f64,
    /// Gravitational acceleration [m/s^2]
    pub g: f64,
    /// Largest admissible road-wheel angle [rad]
    pub max_road_wheel_angle: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        Self {
            l_f: 1.724,
            l_r: 1.247,
            l_table: 3.128,
            m: 2520.0,
            i_z: 13600.0,
            rho: 1.225,
            a: 2.9,
            c_d: 0.35,
            f_r: 0.012,
            steering_ratio: 14.3,
            g: 9.81,
            max_road_wheel_angle: 40f64.to_radians(),
        }
    }
}

impl VehicleParams {
    /// Checks the invariants and returns the parameters unchanged if they hold.
    pub fn validated(self) -> Result<Self, DynamicsError> {
        let positive = [
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("l_table", self.l_table),
            ("m", self.m),
            ("i_z", self.i_z),
            ("rho", self.rho),
            ("a", self.a),
            ("steering_ratio", self.steering_ratio),
            ("g", self.g),
            ("max_road_wheel_angle", self.max_road_wheel_angle),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParameter {
                    name,
                    reason: format!("must be finite and positive, got {value}"),
                });
            }
        }
        for (name, value) in [("c_d", self.c_d), ("f_r", self.f_r)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DynamicsError::InvalidParameter {
                    name,
                    reason: format!("must be finite and non-negative, got {value}"),
                });
            }
        }
        Ok(self)
    }

    /// Effective wheelbase used by all force, moment and kinematic terms.
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }
}

/// Magic Formula lateral tire coefficients for one axle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TireParams {
    /// Stiffness factor B
    pub b: f64,
    /// Shape factor C
    pub c: f64,
    /// Peak value D as a multiple of the static vertical load
    pub d_scale: f64,
    /// Curvature factor E
    pub e: f64,
}

impl TireParams {
    pub const FRONT: TireParams = TireParams { b: 10.0, c: 1.0, d_scale: 1.1, e: -5.0 };
    pub const REAR: TireParams = TireParams { b: 12.4, c: 1.8, d_scale: 2.1, e: -5.0 };

    pub fn validated(self) -> Result<Self, DynamicsError> {
        for (name, value) in [("B", self.b), ("C", self.c), ("D_scale", self.d_scale)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(DynamicsError::InvalidParameter {
                    name,
                    reason: format!("must be finite and positive, got {value}"),
                });
            }
        }
        if !self.e.is_finite() {
            return Err(DynamicsError::InvalidParameter {
                name: "E",
                reason: "must be finite".into(),
            });
        }
        Ok(self)
    }
}

/// Front and rear tire coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxleTires {
    pub front: TireParams,
    pub rear: TireParams,
}

impl Default for AxleTires {
    fn default() -> Self {
        Self { front: TireParams::FRONT, rear: TireParams::REAR }
    }
}

/// Static vertical tire loads per axle [N].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxleLoads {
    pub f_z_f: f64,
    pub f_z_r: f64,
}

/// Static moment balance about the center of gravity.
pub fn static_axle_loads(params: &VehicleParams) -> AxleLoads {
    let weight = params.m * params.g;
    let l = params.wheelbase();
    AxleLoads {
        f_z_f: weight * params.l_r / l,
        f_z_r: weight * params.l_f / l,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mass_is_rejected() {
        let p = VehicleParams { m: 0.0, ..Default::default() };
        assert!(matches!(p.validated(), Err(DynamicsError::InvalidParameter { name: "m", .. })));
    }

    #[test]
    fn negative_drag_is_rejected_but_zero_is_fine() {
        assert!(VehicleParams { c_d: 0.0, ..Default::default() }.validated().is_ok());
        assert!(VehicleParams { c_d: -0.1, ..Default::default() }.validated().is_err());
    }

    #[test]
    fn symmetric_geometry_splits_weight_evenly() {
        let p = VehicleParams { l_f: 1.5, l_r: 1.5, ..Default::default() };
        let loads = static_axle_loads(&p);
        assert_eq!(loads.f_z_f, loads.f_z_r);
        assert!((loads.f_z_f - p.m * p.g / 2.0).abs() < 1e-9);
    }

    #[test]
    fn loads_sum_to_weight() {
        let p = VehicleParams::default();
        let loads = static_axle_loads(&p);
        let w = p.m * p.g;
        assert!(((loads.f_z_f + loads.f_z_r) - w).abs() / w < 1e-9);
    }

    #[test]
    fn tire_defaults_validate() {
        assert!(TireParams::FRONT.validated().is_ok());
        assert!(TireParams::REAR.validated().is_ok());
        assert!(TireParams { b: 0.0, ..TireParams::FRONT }.validated().is_err());
    }
}
