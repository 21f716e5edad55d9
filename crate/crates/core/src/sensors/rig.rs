use std::collections::BTreeSet;
use std::f64::consts::TAU;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::geometry::{is_simple_polygon, rotation_rpy, Point2, Point3};
use super::SensorsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Modality {
    Camera,
    Lidar,
    Radar,
    Microphone,
    Gnss,
}

impl Modality {
    pub const ALL: [Modality; 5] = [
        Modality::Camera,
        Modality::Lidar,
        Modality::Radar,
        Modality::Microphone,
        Modality::Gnss,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Modality::Camera => "camera",
            Modality::Lidar => "lidar",
            Modality::Radar => "radar",
            Modality::Microphone => "microphone",
            Modality::Gnss => "gnss",
        }
    }

    pub fn is_perception(self) -> bool {
        matches!(self, Modality::Camera | Modality::Lidar | Modality::Radar)
    }
}

impl fmt::Display for Modality {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Modality {
    type Err = SensorsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Modality::ALL
            .into_iter()
            .find(|m| m.name() == s)
            .ok_or_else(|| SensorsError::Invalid(format!("unknown modality '{s}'")))
    }
}

/// Field of view, range and data rate of one sensing pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensorSpec {
    /// Pattern id; equals `device` unless the device has several patterns.
    pub id: String,
    /// Physical device the pattern belongs to.
    pub device: String,
    pub modality: Modality,
    /// Horizontal FOV [rad]; `2 pi` for rotating lidars
    pub h_fov: f64,
    /// Vertical FOV [rad]
    pub v_fov: f64,
    pub max_range: f64,
    pub min_range: f64,
    /// Frame rate [Hz]
    pub rate: f64,
    /// Bytes per frame
    pub payload_per_frame: u64,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
}

impl SensorSpec {
    pub fn is_omnidirectional(&self) -> bool {
        self.h_fov >= TAU - 1e-12
    }

    fn validate(&self) -> Result<(), SensorsError> {
        let bad = |what: &str| Err(SensorsError::Invalid(format!("sensor '{}': {what}", self.id)));
        if !(self.h_fov > 0.0 && self.h_fov <= TAU + 1e-12) {
            return bad("h_fov must be in (0, 360] deg");
        }
        if !(self.v_fov > 0.0 && self.v_fov <= std::f64::consts::PI + 1e-12) {
            return bad("v_fov must be in (0, 180] deg");
        }
        if !(self.max_range.is_finite() && self.max_range > 0.0) {
            return bad("max_range must be positive");
        }
        if !(self.min_range >= 0.0 && self.min_range < self.max_range) {
            return bad("min_range must be in [0, max_range)");
        }
        if !(self.rate.is_finite() && self.rate > 0.0) {
            return bad("rate must be positive");
        }
        Ok(())
    }
}

/// Sensor pose in the vehicle frame (origin at the middle of the rear axle,
/// x forward, y left, z up).
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SensorPose {
    pub translation: Point3,
    /// roll, pitch, yaw [rad]
    pub orientation: [f64; 3],
}

impl SensorPose {
    pub fn rotation(&self) -> [[f64; 3]; 3] {
        rotation_rpy(self.orientation[0], self.orientation[1], self.orientation[2])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MountedSensor {
    pub spec: SensorSpec,
    pub pose: SensorPose,
}

/// Validated sensor rig. Immutable after loading.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rig {
    sensors: Vec<MountedSensor>,
    footprint: Vec<Point2>,
    body_height: f64,
}

pub const DEFAULT_BODY_HEIGHT: f64 = 1.9;

impl Rig {
    pub fn new(sensors: Vec<MountedSensor>, footprint: Vec<Point2>, body_height: f64) -> Result<Self, SensorsError> {
        let mut ids = BTreeSet::new();
        let mut devices: Vec<(&str, Modality)> = Vec::new();
        for s in &sensors {
            s.spec.validate()?;
            if !s.pose.translation.iter().chain(&s.pose.orientation).all(|v| v.is_finite()) {
                return Err(SensorsError::Invalid(format!("sensor '{}': non-finite pose", s.spec.id)));
            }
            if !ids.insert(s.spec.id.as_str()) {
                return Err(SensorsError::DuplicateId(s.spec.id.clone()));
            }
            match devices.iter().find(|(d, _)| *d == s.spec.device) {
                Some((_, m)) if *m != s.spec.modality => {
                    return Err(SensorsError::Invalid(format!(
                        "device '{}' mixes modalities",
                        s.spec.device
                    )))
                }
                Some(_) => {}
                None => devices.push((&s.spec.device, s.spec.modality)),
            }
        }
        // a device id may not collide with a pattern id of another device
        for s in &sensors {
            if sensors.iter().any(|o| o.spec.id == s.spec.device && o.spec.device != s.spec.device) {
                return Err(SensorsError::DuplicateId(s.spec.device.clone()));
            }
        }
        if !footprint.is_empty() && !is_simple_polygon(&footprint) {
            return Err(SensorsError::Invalid("vehicle footprint is not a simple polygon".into()));
        }
        if !(body_height.is_finite() && body_height >= 0.0) {
            return Err(SensorsError::Invalid("body_height must be non-negative".into()));
        }
        Ok(Self { sensors, footprint, body_height })
    }

    pub fn empty() -> Self {
        Self { sensors: Vec::new(), footprint: Vec::new(), body_height: DEFAULT_BODY_HEIGHT }
    }

    pub fn sensors(&self) -> &[MountedSensor] {
        &self.sensors
    }

    pub fn footprint(&self) -> &[Point2] {
        &self.footprint
    }

    pub fn body_height(&self) -> f64 {
        self.body_height
    }

    /// Physical device ids in order of first appearance.
    pub fn devices(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for s in &self.sensors {
            if !out.contains(&s.spec.device.as_str()) {
                out.push(&s.spec.device);
            }
        }
        out
    }

    /// First pattern of each device, in device order.
    pub fn primary_specs(&self) -> Vec<&MountedSensor> {
        self.devices()
            .into_iter()
            .filter_map(|d| self.sensors.iter().find(|s| s.spec.device == d))
            .collect()
    }

    pub fn device_modality(&self, device: &str) -> Option<Modality> {
        self.sensors.iter().find(|s| s.spec.device == device).map(|s| s.spec.modality)
    }

    pub fn device_count(&self, modality: Modality) -> usize {
        self.devices().into_iter().filter(|d| self.device_modality(d) == Some(modality)).count()
    }

    pub fn perception_device_count(&self) -> usize {
        Modality::ALL.into_iter().filter(|m| m.is_perception()).map(|m| self.device_count(m)).sum()
    }

    /// Patterns addressed by `id`, which may name a device or a single pattern.
    pub fn patterns(&self, id: &str) -> Vec<&MountedSensor> {
        self.sensors.iter().filter(|s| s.spec.id == id || s.spec.device == id).collect()
    }

    pub fn modalities(&self) -> BTreeSet<Modality> {
        self.sensors.iter().map(|s| s.spec.modality).collect()
    }

    /// Applies a planar rigid motion (rotation `yaw` about z, then translation)
    /// to every pose and to the footprint.
    pub fn transformed(&self, yaw: f64, translation: Point3) -> Rig {
        let (s, c) = yaw.sin_cos();
        let move2 = |p: Point2| [c * p[0] - s * p[1] + translation[0], s * p[0] + c * p[1] + translation[1]];
        let sensors = self
            .sensors
            .iter()
            .map(|m| {
                let t = m.pose.translation;
                let xy = move2([t[0], t[1]]);
                let mut pose = m.pose;
                pose.translation = [xy[0], xy[1], t[2] + translation[2]];
                pose.orientation[2] += yaw;
                MountedSensor { spec: m.spec.clone(), pose }
            })
            .collect();
        Rig {
            sensors,
            footprint: self.footprint.iter().map(|p| move2(*p)).collect(),
            body_height: self.body_height + translation[2],
        }
    }
}

// ---- rig description file -------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RigFile {
    #[serde(default)]
    vehicle: Option<VehicleShape>,
    #[serde(default, rename = "sensor")]
    sensors: Vec<SensorEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct VehicleShape {
    #[serde(default)]
    footprint: Vec<Point2>,
    body_height: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SensorEntry {
    id: String,
    modality: Modality,
    h_fov: Option<f64>,
    h_fov_deg: Option<f64>,
    v_fov: Option<f64>,
    v_fov_deg: Option<f64>,
    max_range: f64,
    #[serde(default)]
    min_range: f64,
    rate: f64,
    #[serde(default)]
    payload_per_frame: u64,
    position: Point3,
    orientation: Option<[f64; 3]>,
    orientation_deg: Option<[f64; 3]>,
    near_h_fov: Option<f64>,
    near_h_fov_deg: Option<f64>,
    near_v_fov: Option<f64>,
    near_v_fov_deg: Option<f64>,
    near_max_range: Option<f64>,
    #[serde(default)]
    notes: String,
}

/// Near-field range used for a radar that declares a near pattern without a range.
pub const DEFAULT_NEAR_FIELD_RANGE: f64 = 70.0;

fn angle(id: &str, key: &str, rad: Option<f64>, deg: Option<f64>) -> Result<Option<f64>, SensorsError> {
    match (rad, deg) {
        (Some(_), Some(_)) => Err(SensorsError::Units(format!(
            "sensor '{id}': both {key} and {key}_deg given"
        ))),
        (Some(r), None) => Ok(Some(r)),
        (None, Some(d)) => Ok(Some(d.to_radians())),
        (None, None) => Ok(None),
    }
}

fn required(id: &str, key: &str, v: Option<f64>) -> Result<f64, SensorsError> {
    v.ok_or_else(|| SensorsError::Units(format!("sensor '{id}': missing {key} (rad) or {key}_deg")))
}

impl SensorEntry {
    fn into_mounted(self) -> Result<Vec<MountedSensor>, SensorsError> {
        let id = self.id.clone();
        let h_fov = required(&id, "h_fov", angle(&id, "h_fov", self.h_fov, self.h_fov_deg)?)?;
        let v_fov = required(&id, "v_fov", angle(&id, "v_fov", self.v_fov, self.v_fov_deg)?)?;
        let orientation = match (self.orientation, self.orientation_deg) {
            (Some(_), Some(_)) => {
                return Err(SensorsError::Units(format!(
                    "sensor '{id}': both orientation and orientation_deg given"
                )))
            }
            (Some(r), None) => r,
            (None, Some(d)) => d.map(f64::to_radians),
            (None, None) => [0.0; 3],
        };
        let near_h = angle(&id, "near_h_fov", self.near_h_fov, self.near_h_fov_deg)?;
        let near_v = angle(&id, "near_v_fov", self.near_v_fov, self.near_v_fov_deg)?;
        let pose = SensorPose { translation: self.position, orientation };
        let base = SensorSpec {
            id: id.clone(),
            device: id.clone(),
            modality: self.modality,
            h_fov,
            v_fov,
            max_range: self.max_range,
            min_range: self.min_range,
            rate: self.rate,
            payload_per_frame: self.payload_per_frame,
            notes: self.notes,
        };
        if near_h.is_none() && near_v.is_none() && self.near_max_range.is_none() {
            return Ok(vec![MountedSensor { spec: base, pose }]);
        }
        let near_h = near_h.ok_or_else(|| SensorsError::Units(format!("sensor '{id}': near pattern without near_h_fov")))?;
        let far = SensorSpec { id: format!("{id}/far"), ..base.clone() };
        let near = SensorSpec {
            id: format!("{id}/near"),
            h_fov: near_h,
            v_fov: near_v.unwrap_or(v_fov),
            max_range: self.near_max_range.unwrap_or(DEFAULT_NEAR_FIELD_RANGE),
            // both patterns share one data stream
            payload_per_frame: 0,
            ..base
        };
        Ok(vec![MountedSensor { spec: far, pose }, MountedSensor { spec: near, pose }])
    }
}

/// Parses and validates a rig description.
pub fn load_rig(text: &str) -> Result<Rig, SensorsError> {
    let file: RigFile = toml::from_str(text).map_err(|e| SensorsError::Parse(e.to_string()))?;
    let mut sensors = Vec::new();
    for entry in file.sensors {
        sensors.extend(entry.into_mounted()?);
    }
    let (footprint, body_height) = match file.vehicle {
        Some(v) => (v.footprint, v.body_height.unwrap_or(DEFAULT_BODY_HEIGHT)),
        None => (Vec::new(), DEFAULT_BODY_HEIGHT),
    };
    Rig::new(sensors, footprint, body_height)
}

/// Shipped default rig description (EDGAR sensor suite, default poses).
pub const EDGAR_RIG_TOML: &str = include_str!("edgar_rig.toml");

pub fn edgar_rig() -> Rig {
    load_rig(EDGAR_RIG_TOML).expect("shipped rig is valid")
}
