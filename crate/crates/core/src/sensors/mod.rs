//! Geometric model of the perception sensor suite.

mod coverage;
mod geometry;
mod rig;

use thiserror::Error;

pub use coverage::{
    blind_spot_regions, coverage_gaps, coverage_map, min_full_coverage_range, sensor_flow_spec, BlindRegion,
    CoverageMap, FlowSpec, GridWindow, SweepOptions, DEFAULT_QUERY_HEIGHT,
};
pub use geometry::{
    is_simple_polygon, point_in_polygon, polygon_area, rotation_rpy, segment_inside_intervals, to_sensor_frame,
    Point2, Point3,
};
pub use rig::{
    edgar_rig, load_rig, Modality, MountedSensor, Rig, SensorPose, SensorSpec, DEFAULT_BODY_HEIGHT,
    DEFAULT_NEAR_FIELD_RANGE, EDGAR_RIG_TOML,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SensorsError {
    #[error("rig parse error: {0}")]
    Parse(String),
    #[error("duplicate sensor id '{0}'")]
    DuplicateId(String),
    #[error("unit error: {0}")]
    Units(String),
    #[error("invalid rig: {0}")]
    Invalid(String),
    #[error("unknown sensor id '{0}'")]
    UnknownSensor(String),
    #[error("degenerate window: {0}")]
    DegenerateWindow(String),
    #[error("no sensor of modality {0}")]
    NoSensors(Modality),
}

/// Sensor-frame direction test without occlusion: range, azimuth and elevation.
pub fn in_field_of_view(m: &MountedSensor, point: &Point3) -> bool {
    in_field_of_view_with(m, &m.pose.rotation(), point)
}

pub(crate) fn in_field_of_view_with(m: &MountedSensor, rot: &[[f64; 3]; 3], point: &Point3) -> bool {
    let p = to_sensor_frame(rot, &m.pose.translation, point);
    let range = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    let spec = &m.spec;
    if range < spec.min_range || range > spec.max_range {
        return false;
    }
    if range == 0.0 {
        return true;
    }
    let horizontal = p[0].hypot(p[1]);
    if !spec.is_omnidirectional() && p[1].atan2(p[0]).abs() > 0.5 * spec.h_fov {
        return false;
    }
    p[2].atan2(horizontal).abs() <= 0.5 * spec.v_fov
}

/// True when the straight line from the sensor to `point` passes over the
/// footprint interior lower than the vehicle body.
pub fn occluded_by_body(rig: &Rig, origin: &Point3, point: &Point3) -> bool {
    let fp = rig.footprint();
    if fp.is_empty() {
        return false;
    }
    let h = rig.body_height();
    segment_inside_intervals(&[origin[0], origin[1]], &[point[0], point[1]], fp)
        .into_iter()
        .any(|(t0, t1)| {
            let z0 = origin[2] + t0 * (point[2] - origin[2]);
            let z1 = origin[2] + t1 * (point[2] - origin[2]);
            z0.min(z1) < h
        })
}

fn pattern_visible(rig: &Rig, m: &MountedSensor, point: &Point3) -> bool {
    in_field_of_view(m, point) && !occluded_by_body(rig, &m.pose.translation, point)
}

/// Patterns with cached rotations, grouped by device.
pub(crate) struct PreparedDevice<'a> {
    pub modality: Modality,
    patterns: Vec<(&'a MountedSensor, [[f64; 3]; 3])>,
}

impl<'a> PreparedDevice<'a> {
    pub fn all(rig: &'a Rig) -> Vec<Self> {
        rig.devices()
            .into_iter()
            .map(|d| {
                let patterns: Vec<_> = rig
                    .sensors()
                    .iter()
                    .filter(|m| m.spec.device == d)
                    .map(|m| (m, m.pose.rotation()))
                    .collect();
                PreparedDevice { modality: patterns[0].0.spec.modality, patterns }
            })
            .collect()
    }

    pub fn sees(&self, rig: &Rig, point: &Point3) -> bool {
        self.patterns
            .iter()
            .any(|(m, rot)| in_field_of_view_with(m, rot, point) && !occluded_by_body(rig, &m.pose.translation, point))
    }
}

/// Visibility of a vehicle-frame point. `sensor_id` may name a device (any of
/// its patterns counts) or a single pattern such as `radar_front/near`.
pub fn is_point_visible(rig: &Rig, sensor_id: &str, point: &Point3) -> Result<bool, SensorsError> {
    let patterns = rig.patterns(sensor_id);
    if patterns.is_empty() {
        return Err(SensorsError::UnknownSensor(sensor_id.to_string()));
    }
    Ok(patterns.into_iter().any(|m| pattern_visible(rig, m, point)))
}
