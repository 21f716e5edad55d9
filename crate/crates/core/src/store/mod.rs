//! Relational ride store: rides, maps, calibrated sensors, scenes, samples,
//! sample data, ego poses and hierarchical scene tags.
//!
//! On disk a store is a directory holding `taxonomy.jsonl` and one directory
//! per ride with one JSON Lines file per table:
//!
//! | file | one line per | fields |
//! |------|--------------|--------|
//! | `ride.jsonl` | ride | `id`, `start`, `end` [s], `vehicle`, `rig`, `source` (`simulation`/`replay`), `map_id` |
//! | `map.jsonl` | map | `id`, `name`, `reference` (opaque URI) |
//! | `calibrated_sensor.jsonl` | sensor | `id`, `ride_id`, `sensor_id`, `modality`, `intrinsic` (3x3 or null), `translation` [m], `rotation` (roll, pitch, yaw) [rad] in the rear-axle frame |
//! | `scene.jsonl` | scene | `id`, `ride_id`, `start`, `end` [s] |
//! | `sample.jsonl` | sample | `id`, `scene_id`, `timestamp` [s] |
//! | `sample_data.jsonl` | measurement | `id`, `sample_id`, `sensor_id` (calibrated sensor id), `timestamp` [s], `payload` (opaque) |
//! | `ego_pose.jsonl` | sample | `sample_id`, `x`, `y` [m], `psi` [rad], `v_x`, `v_y` [m/s], `psi_dot` [rad/s] |
//! | `tag.jsonl` | scene tag | `scene_id`, `category`, `group`, `name`, `origin` (`manual`/`auto`) |
//!
//! `taxonomy.jsonl` lists the allowed `(category, group)` pairs. Records are
//! written sorted by id, so saving a loaded store reproduces its files byte
//! for byte. Records whose ride cannot be resolved go to `unassigned/`.

mod align;
mod query;

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use align::{align_samples, align_samples_detailed, default_tolerance, slowest_stream, AlignedSample};
pub use query::{ExprError, TagExpr, TagLiteral};

use crate::sensors::{Modality, Rig};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{table} '{id}' already exists")]
    Duplicate { table: &'static str, id: String },
    #[error("{table} '{id}' references unknown {target} '{target_id}'")]
    Dangling { table: &'static str, id: String, target: &'static str, target_id: String },
    #[error("invalid {table} '{id}': {reason}")]
    Invalid { table: &'static str, id: String, reason: String },
    #[error("{path}:{line}: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error(transparent)]
    Expr(#[from] ExprError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RideSource {
    Simulation,
    Replay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Ride {
    pub id: String,
    pub start: f64,
    pub end: f64,
    pub vehicle: String,
    pub rig: String,
    pub source: RideSource,
    pub map_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Map {
    pub id: String,
    pub name: String,
    pub reference: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibratedSensor {
    pub id: String,
    pub ride_id: String,
    pub sensor_id: String,
    pub modality: Modality,
    pub intrinsic: Option<[[f64; 3]; 3]>,
    pub translation: [f64; 3],
    pub rotation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scene {
    pub id: String,
    pub ride_id: String,
    pub start: f64,
    pub end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sample {
    pub id: String,
    pub scene_id: String,
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleData {
    pub id: String,
    pub sample_id: String,
    pub sensor_id: String,
    pub timestamp: f64,
    pub payload: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PoseState {
    pub x: f64,
    pub y: f64,
    pub psi: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub psi_dot: f64,
}

impl PoseState {
    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    fn lerp(&self, other: &PoseState, w: f64) -> PoseState {
        let l = |a: f64, b: f64| a + w * (b - a);
        PoseState {
            x: l(self.x, other.x),
            y: l(self.y, other.y),
            psi: l(self.psi, other.psi),
            v_x: l(self.v_x, other.v_x),
            v_y: l(self.v_y, other.v_y),
            psi_dot: l(self.psi_dot, other.psi_dot),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EgoPose {
    pub sample_id: String,
    #[serde(flatten)]
    pub pose: PoseState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TagOrigin {
    Manual,
    Auto,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tag {
    pub scene_id: String,
    pub category: String,
    pub group: String,
    pub name: String,
    pub origin: TagOrigin,
}

impl Tag {
    fn key(&self) -> (&str, &str, &str, &str) {
        (&self.scene_id, &self.category, &self.group, &self.name)
    }

    pub fn literal(&self) -> TagLiteral {
        TagLiteral { category: self.category.clone(), group: self.group.clone(), name: self.name.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaxonomyEntry {
    category: String,
    group: String,
}

/// Minimal taxonomy; extend with [`RideStore::add_tag_group`].
pub const DEFAULT_TAXONOMY: &[(&str, &str)] = &[
    ("dynamics", "maneuver"),
    ("dynamics", "speed"),
    ("scenario", "road"),
    ("scenario", "situation"),
    ("sensors", "modality"),
    ("weather", "condition"),
    ("weather", "light"),
];

/// Speed bucket edges [m/s]: 0.5, 30 km/h, 60 km/h.
pub const SPEED_BUCKETS: [(f64, &str); 3] = [(0.5, "standstill"), (30.0 / 3.6, "low"), (60.0 / 3.6, "medium")];

pub fn speed_bucket(speed: f64) -> &'static str {
    SPEED_BUCKETS.iter().find(|(edge, _)| speed < *edge).map_or("high", |(_, name)| name)
}

/// Auto tags of one scene: its speed bucket from the largest ego speed and
/// one tag per sensor modality present.
pub fn auto_tags(scene_id: &str, poses: &[PoseState], modalities: &BTreeSet<Modality>) -> Vec<Tag> {
    let tag = |category: &str, group: &str, name: &str| Tag {
        scene_id: scene_id.into(),
        category: category.into(),
        group: group.into(),
        name: name.into(),
        origin: TagOrigin::Auto,
    };
    let mut out = Vec::new();
    if !poses.is_empty() {
        let vmax = poses.iter().map(PoseState::speed).fold(0.0, f64::max);
        out.push(tag("dynamics", "speed", speed_bucket(vmax)));
    }
    for m in modalities {
        out.push(tag("sensors", "modality", m.name()));
    }
    out
}

/// Consecutive windows of `duration` covering `[start, end)`; the last one
/// may be shorter.
pub fn segment_scenes(start: f64, end: f64, duration: f64) -> Vec<(f64, f64)> {
    if !(duration > 0.0) || !(end > start) || !start.is_finite() || !end.is_finite() {
        return Vec::new();
    }
    let n = (((end - start) / duration) - 1e-9).ceil().max(1.0) as usize;
    let mut out: Vec<(f64, f64)> = (0..n).map(|k| (start + k as f64 * duration, start + (k + 1) as f64 * duration)).collect();
    out[n - 1].1 = end;
    out
}

/// Scenes split at the given interior cut points.
pub fn scenes_from_cuts(start: f64, end: f64, cuts: &[f64]) -> Vec<(f64, f64)> {
    let mut cuts: Vec<f64> = cuts.iter().copied().filter(|&c| c > start && c < end).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = vec![start];
    edges.extend(cuts);
    edges.push(end);
    edges.windows(2).map(|w| (w[0], w[1])).collect()
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Violation {
    pub table: &'static str,
    pub id: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct IntegrityReport {
    pub violations: Vec<Violation>,
}

impl IntegrityReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn render(&self) -> String {
        let mut out = format!("{} violation(s)\n", self.violations.len());
        for v in &self.violations {
            out.push_str(&format!("{} {}: {}\n", v.table, v.id, v.message));
        }
        out
    }
}

#[derive(Debug, Clone, Default)]
pub struct RideStore {
    taxonomy: BTreeSet<TaxonomyEntry>,
    pub rides: Vec<Ride>,
    pub maps: Vec<Map>,
    pub calibrated_sensors: Vec<CalibratedSensor>,
    pub scenes: Vec<Scene>,
    pub samples: Vec<Sample>,
    pub sample_data: Vec<SampleData>,
    pub ego_poses: Vec<EgoPose>,
    pub tags: Vec<Tag>,
    index: Index,
}

#[derive(Debug, Clone, Default)]
struct Index {
    rides: HashSet<String>,
    maps: HashSet<String>,
    sensors: HashMap<String, String>,
    scenes: HashMap<String, String>,
    samples: HashMap<String, String>,
    sample_data: HashSet<String>,
    poses: HashSet<String>,
    tags: HashSet<(String, String, String, String)>,
}

fn check_id(table: &'static str, id: &str) -> Result<(), StoreError> {
    let ok = !id.is_empty()
        && id != "."
        && id != ".."
        && id != "unassigned"
        && id.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | ':' | '/'));
    if ok {
        Ok(())
    } else {
        Err(StoreError::Invalid { table, id: id.into(), reason: "ids use [A-Za-z0-9_.:/-]".into() })
    }
}

fn check_finite(table: &'static str, id: &str, values: &[f64]) -> Result<(), StoreError> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(StoreError::Invalid { table, id: id.into(), reason: "non-finite number".into() })
    }
}

fn dangling(table: &'static str, id: &str, target: &'static str, target_id: &str) -> StoreError {
    StoreError::Dangling { table, id: id.into(), target, target_id: target_id.into() }
}

const TABLES: [&str; 8] = ["ride", "map", "calibrated_sensor", "scene", "sample", "sample_data", "ego_pose", "tag"];

impl RideStore {
    pub fn new() -> Self {
        let mut s = Self::default();
        for (c, g) in DEFAULT_TAXONOMY {
            s.add_tag_group(c, g);
        }
        s
    }

    pub fn add_tag_group(&mut self, category: &str, group: &str) {
        self.taxonomy.insert(TaxonomyEntry { category: category.into(), group: group.into() });
    }

    pub fn has_tag_group(&self, category: &str, group: &str) -> bool {
        self.taxonomy.iter().any(|e| e.category == category && e.group == group)
    }

    pub fn add_map(&mut self, map: Map) -> Result<(), StoreError> {
        check_id("map", &map.id)?;
        if !self.index.maps.insert(map.id.clone()) {
            return Err(StoreError::Duplicate { table: "map", id: map.id });
        }
        self.maps.push(map);
        Ok(())
    }

    pub fn create_ride(&mut self, ride: Ride) -> Result<(), StoreError> {
        check_id("ride", &ride.id)?;
        if ride.id.contains('/') {
            return Err(StoreError::Invalid { table: "ride", id: ride.id, reason: "ride ids name directories".into() });
        }
        check_finite("ride", &ride.id, &[ride.start, ride.end])?;
        if ride.end < ride.start {
            return Err(StoreError::Invalid { table: "ride", id: ride.id, reason: "end before start".into() });
        }
        if !self.index.maps.contains(&ride.map_id) {
            return Err(dangling("ride", &ride.id, "map", &ride.map_id));
        }
        if self.index.rides.contains(&ride.id) {
            return Err(StoreError::Duplicate { table: "ride", id: ride.id });
        }
        self.index.rides.insert(ride.id.clone());
        self.rides.push(ride);
        Ok(())
    }

    pub fn add_calibrated_sensor(&mut self, s: CalibratedSensor) -> Result<(), StoreError> {
        check_id("calibrated_sensor", &s.id)?;
        let mut values = s.translation.to_vec();
        values.extend(s.rotation);
        values.extend(s.intrinsic.iter().flatten().flatten());
        check_finite("calibrated_sensor", &s.id, &values)?;
        if !self.index.rides.contains(&s.ride_id) {
            return Err(dangling("calibrated_sensor", &s.id, "ride", &s.ride_id));
        }
        if self.index.sensors.contains_key(&s.id) {
            return Err(StoreError::Duplicate { table: "calibrated_sensor", id: s.id });
        }
        self.index.sensors.insert(s.id.clone(), s.ride_id.clone());
        self.calibrated_sensors.push(s);
        Ok(())
    }

    pub fn add_scene(&mut self, scene: Scene) -> Result<(), StoreError> {
        check_id("scene", &scene.id)?;
        check_finite("scene", &scene.id, &[scene.start, scene.end])?;
        if !(scene.end > scene.start) {
            return Err(StoreError::Invalid { table: "scene", id: scene.id, reason: "empty interval".into() });
        }
        if !self.index.rides.contains(&scene.ride_id) {
            return Err(dangling("scene", &scene.id, "ride", &scene.ride_id));
        }
        if self.index.scenes.contains_key(&scene.id) {
            return Err(StoreError::Duplicate { table: "scene", id: scene.id });
        }
        self.index.scenes.insert(scene.id.clone(), scene.ride_id.clone());
        self.scenes.push(scene);
        Ok(())
    }

    pub fn add_sample(&mut self, sample: Sample) -> Result<(), StoreError> {
        check_id("sample", &sample.id)?;
        check_finite("sample", &sample.id, &[sample.timestamp])?;
        let Some(ride) = self.index.scenes.get(&sample.scene_id).cloned() else {
            return Err(dangling("sample", &sample.id, "scene", &sample.scene_id));
        };
        if self.index.samples.contains_key(&sample.id) {
            return Err(StoreError::Duplicate { table: "sample", id: sample.id });
        }
        self.index.samples.insert(sample.id.clone(), ride);
        self.samples.push(sample);
        Ok(())
    }

    pub fn add_sample_data(&mut self, d: SampleData) -> Result<(), StoreError> {
        check_id("sample_data", &d.id)?;
        check_finite("sample_data", &d.id, &[d.timestamp])?;
        let Some(ride) = self.index.samples.get(&d.sample_id) else {
            return Err(dangling("sample_data", &d.id, "sample", &d.sample_id));
        };
        if self.index.sensors.get(&d.sensor_id) != Some(ride) {
            return Err(dangling("sample_data", &d.id, "calibrated_sensor", &d.sensor_id));
        }
        if !self.index.sample_data.insert(d.id.clone()) {
            return Err(StoreError::Duplicate { table: "sample_data", id: d.id });
        }
        self.sample_data.push(d);
        Ok(())
    }

    pub fn add_ego_pose(&mut self, p: EgoPose) -> Result<(), StoreError> {
        let q = p.pose;
        check_finite("ego_pose", &p.sample_id, &[q.x, q.y, q.psi, q.v_x, q.v_y, q.psi_dot])?;
        if !self.index.samples.contains_key(&p.sample_id) {
            return Err(dangling("ego_pose", &p.sample_id, "sample", &p.sample_id));
        }
        if !self.index.poses.insert(p.sample_id.clone()) {
            return Err(StoreError::Duplicate { table: "ego_pose", id: p.sample_id });
        }
        self.ego_poses.push(p);
        Ok(())
    }

    pub fn add_tag(&mut self, tag: Tag) -> Result<(), StoreError> {
        let id = format!("{}:{}.{}.{}", tag.scene_id, tag.category, tag.group, tag.name);
        for part in [&tag.category, &tag.group, &tag.name] {
            if part.is_empty() || !part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') {
                return Err(StoreError::Invalid { table: "tag", id, reason: "tag parts use [A-Za-z0-9_-]".into() });
            }
        }
        if !self.index.scenes.contains_key(&tag.scene_id) {
            return Err(dangling("tag", &id, "scene", &tag.scene_id));
        }
        if !self.has_tag_group(&tag.category, &tag.group) {
            return Err(StoreError::Invalid {
                table: "tag",
                id,
                reason: format!("group '{}' is not in category '{}'", tag.group, tag.category),
            });
        }
        let key = (tag.scene_id.clone(), tag.category.clone(), tag.group.clone(), tag.name.clone());
        if !self.index.tags.insert(key) {
            return Err(StoreError::Duplicate { table: "tag", id });
        }
        self.tags.push(tag);
        Ok(())
    }

    pub fn ride(&self, id: &str) -> Option<&Ride> {
        self.rides.iter().find(|r| r.id == id)
    }

    /// Scenes of a ride in time order.
    pub fn scenes_of(&self, ride_id: &str) -> Vec<&Scene> {
        let mut v: Vec<&Scene> = self.scenes.iter().filter(|s| s.ride_id == ride_id).collect();
        v.sort_by(|a, b| a.start.total_cmp(&b.start).then_with(|| a.id.cmp(&b.id)));
        v
    }

    /// Ids of the scenes matching `expr`, ordered by ride id and scene start.
    pub fn query_scenes(&self, expr: &TagExpr) -> Vec<String> {
        let mut tags: HashMap<&str, HashSet<TagLiteral>> = HashMap::new();
        for t in &self.tags {
            tags.entry(&t.scene_id).or_default().insert(t.literal());
        }
        let empty = HashSet::new();
        let mut scenes: Vec<&Scene> = self.scenes.iter().collect();
        scenes.sort_by(|a, b| {
            a.ride_id.cmp(&b.ride_id).then(a.start.total_cmp(&b.start)).then_with(|| a.id.cmp(&b.id))
        });
        scenes
            .into_iter()
            .filter(|s| {
                let set = tags.get(s.id.as_str()).unwrap_or(&empty);
                expr.eval(&|l| set.contains(l))
            })
            .map(|s| s.id.clone())
            .collect()
    }

    pub fn query(&self, expr: &str) -> Result<Vec<String>, StoreError> {
        Ok(self.query_scenes(&TagExpr::parse(expr)?))
    }

    /// Checks every schema invariant. Violations are reported, never raised.
    pub fn integrity_check(&self) -> IntegrityReport {
        let mut out = Vec::new();
        let mut v = |table: &'static str, id: &str, message: String| out.push(Violation { table, id: id.into(), message });

        let mut seen = HashSet::new();
        let maps: HashSet<&str> = self.maps.iter().map(|m| m.id.as_str()).collect();
        for m in &self.maps {
            if !seen.insert(&m.id) {
                v("map", &m.id, "duplicate id".into());
            }
        }
        let mut rides: HashMap<&str, &Ride> = HashMap::new();
        for r in &self.rides {
            if rides.insert(&r.id, r).is_some() {
                v("ride", &r.id, "duplicate id".into());
            }
            if !(r.end >= r.start) {
                v("ride", &r.id, "end before start".into());
            }
            if !maps.contains(r.map_id.as_str()) {
                v("ride", &r.id, format!("unknown map '{}'", r.map_id));
            }
        }
        let mut sensors: HashMap<&str, &CalibratedSensor> = HashMap::new();
        for s in &self.calibrated_sensors {
            if sensors.insert(&s.id, s).is_some() {
                v("calibrated_sensor", &s.id, "duplicate id".into());
            }
            if !rides.contains_key(s.ride_id.as_str()) {
                v("calibrated_sensor", &s.id, format!("unknown ride '{}'", s.ride_id));
            }
        }
        let mut per_ride_sensor = HashSet::new();
        for s in &self.calibrated_sensors {
            if !per_ride_sensor.insert((&s.ride_id, &s.sensor_id)) {
                v("calibrated_sensor", &s.id, format!("sensor '{}' calibrated twice in ride", s.sensor_id));
            }
        }

        let mut scenes: HashMap<&str, &Scene> = HashMap::new();
        for s in &self.scenes {
            if scenes.insert(&s.id, s).is_some() {
                v("scene", &s.id, "duplicate id".into());
            }
            match rides.get(s.ride_id.as_str()) {
                None => v("scene", &s.id, format!("unknown ride '{}'", s.ride_id)),
                Some(r) => {
                    if s.start < r.start || s.end > r.end || !(s.end > s.start) {
                        v("scene", &s.id, format!("[{}, {}] outside ride [{}, {}]", s.start, s.end, r.start, r.end));
                    }
                }
            }
        }
        let mut rides_sorted: Vec<&Ride> = self.rides.iter().collect();
        rides_sorted.sort_by(|a, b| a.id.cmp(&b.id));
        rides_sorted.dedup_by(|a, b| a.id == b.id);
        for r in &rides_sorted {
            let list = self.scenes_of(&r.id);
            if list.is_empty() {
                continue;
            }
            if list[0].start != r.start {
                v("scene", &list[0].id, format!("first scene starts at {}, ride at {}", list[0].start, r.start));
            }
            for w in list.windows(2) {
                if w[1].start < w[0].end {
                    v("scene", &w[1].id, format!("overlaps scene '{}'", w[0].id));
                } else if w[1].start > w[0].end {
                    v("scene", &w[1].id, format!("gap after scene '{}'", w[0].id));
                }
            }
            let last = list[list.len() - 1];
            if last.end != r.end {
                v("scene", &last.id, format!("last scene ends at {}, ride at {}", last.end, r.end));
            }
        }

        let mut samples: HashMap<&str, &Sample> = HashMap::new();
        for s in &self.samples {
            if samples.insert(&s.id, s).is_some() {
                v("sample", &s.id, "duplicate id".into());
            }
            match scenes.get(s.scene_id.as_str()) {
                None => v("sample", &s.id, format!("unknown scene '{}'", s.scene_id)),
                Some(sc) => {
                    if s.timestamp < sc.start || s.timestamp > sc.end {
                        v("sample", &s.id, format!("timestamp {} outside scene '{}'", s.timestamp, sc.id));
                    }
                }
            }
        }
        let ride_of_sample = |id: &str| -> Option<&str> {
            let s = samples.get(id)?;
            scenes.get(s.scene_id.as_str()).map(|sc| sc.ride_id.as_str())
        };

        let mut data_ids = HashSet::new();
        let mut covered: HashSet<(&str, &str)> = HashSet::new();
        for d in &self.sample_data {
            if !data_ids.insert(&d.id) {
                v("sample_data", &d.id, "duplicate id".into());
            }
            if !samples.contains_key(d.sample_id.as_str()) {
                v("sample_data", &d.id, format!("unknown sample '{}'", d.sample_id));
                continue;
            }
            match sensors.get(d.sensor_id.as_str()) {
                None => v("sample_data", &d.id, format!("unknown calibrated sensor '{}'", d.sensor_id)),
                Some(cs) => {
                    if ride_of_sample(&d.sample_id).is_some_and(|r| r != cs.ride_id) {
                        v("sample_data", &d.id, format!("sensor '{}' belongs to another ride", d.sensor_id));
                    }
                    covered.insert((&d.sample_id, &d.sensor_id));
                }
            }
        }
        let mut pose_count: HashMap<&str, usize> = HashMap::new();
        for p in &self.ego_poses {
            if !samples.contains_key(p.sample_id.as_str()) {
                v("ego_pose", &p.sample_id, "unknown sample".into());
            }
            *pose_count.entry(&p.sample_id).or_default() += 1;
        }
        let mut sensors_by_ride: HashMap<&str, Vec<&str>> = HashMap::new();
        for s in &self.calibrated_sensors {
            sensors_by_ride.entry(&s.ride_id).or_default().push(&s.id);
        }
        for s in &self.samples {
            match pose_count.get(s.id.as_str()).copied().unwrap_or(0) {
                1 => {}
                n => v("sample", &s.id, format!("{n} ego poses")),
            }
            if let Some(ride) = ride_of_sample(&s.id) {
                let mut missing: Vec<&str> = sensors_by_ride
                    .get(ride)
                    .into_iter()
                    .flatten()
                    .copied()
                    .filter(|cs| !covered.contains(&(s.id.as_str(), *cs)))
                    .collect();
                missing.sort_unstable();
                if !missing.is_empty() {
                    v("sample", &s.id, format!("no sample data from {}", missing.join(", ")));
                }
            }
        }

        let mut tag_keys = HashSet::new();
        for t in &self.tags {
            let id = format!("{}:{}.{}.{}", t.scene_id, t.category, t.group, t.name);
            if !scenes.contains_key(t.scene_id.as_str()) {
                v("tag", &id, format!("unknown scene '{}'", t.scene_id));
            }
            if !tag_keys.insert(t.key()) {
                v("tag", &id, "duplicate tag in scene".into());
            }
            if !self.has_tag_group(&t.category, &t.group) {
                v("tag", &id, format!("group '{}' is not in category '{}'", t.group, t.category));
            }
        }

        out.sort();
        IntegrityReport { violations: out }
    }

    // ---- persistence -----------------------------------------------------

    /// Ride owning each record; `None` for records with broken references.
    fn partition(&self) -> BTreeMap<Option<String>, RideStore> {
        let rides: HashSet<&str> = self.rides.iter().map(|r| r.id.as_str()).collect();
        let known = |r: Option<&str>| r.filter(|r| rides.contains(r)).map(str::to_string);
        let scene_ride: HashMap<&str, &str> = self.scenes.iter().map(|s| (s.id.as_str(), s.ride_id.as_str())).collect();
        let sample_ride: HashMap<&str, &str> = self
            .samples
            .iter()
            .filter_map(|s| scene_ride.get(s.scene_id.as_str()).map(|r| (s.id.as_str(), *r)))
            .collect();
        let mut parts: BTreeMap<Option<String>, RideStore> = BTreeMap::new();
        for r in &self.rides {
            let p = parts.entry(Some(r.id.clone())).or_default();
            p.rides.push(r.clone());
            if let Some(m) = self.maps.iter().find(|m| m.id == r.map_id) {
                if !p.maps.contains(m) {
                    p.maps.push(m.clone());
                }
            }
        }
        let used_maps: HashSet<&str> = self.rides.iter().map(|r| r.map_id.as_str()).collect();
        for m in self.maps.iter().filter(|m| !used_maps.contains(m.id.as_str())) {
            parts.entry(None).or_default().maps.push(m.clone());
        }
        for s in &self.calibrated_sensors {
            parts.entry(known(Some(&s.ride_id))).or_default().calibrated_sensors.push(s.clone());
        }
        for s in &self.scenes {
            parts.entry(known(Some(&s.ride_id))).or_default().scenes.push(s.clone());
        }
        for s in &self.samples {
            parts.entry(known(scene_ride.get(s.scene_id.as_str()).copied())).or_default().samples.push(s.clone());
        }
        for d in &self.sample_data {
            parts.entry(known(sample_ride.get(d.sample_id.as_str()).copied())).or_default().sample_data.push(d.clone());
        }
        for p in &self.ego_poses {
            parts.entry(known(sample_ride.get(p.sample_id.as_str()).copied())).or_default().ego_poses.push(p.clone());
        }
        for t in &self.tags {
            parts.entry(known(scene_ride.get(t.scene_id.as_str()).copied())).or_default().tags.push(t.clone());
        }
        parts
    }

    pub fn save(&self, dir: &Path) -> Result<(), StoreError> {
        let io = |p: &Path| {
            let path = p.display().to_string();
            move |source| StoreError::Io { path: path.clone(), source }
        };
        fs::create_dir_all(dir).map_err(io(dir))?;
        let taxonomy: Vec<&TaxonomyEntry> = self.taxonomy.iter().collect();
        write_jsonl(&dir.join("taxonomy.jsonl"), &taxonomy)?;
        for (ride, mut part) in self.partition() {
            let sub = dir.join(ride.as_deref().unwrap_or("unassigned"));
            fs::create_dir_all(&sub).map_err(io(&sub))?;
            part.canonicalize();
            write_jsonl(&sub.join("ride.jsonl"), &part.rides)?;
            write_jsonl(&sub.join("map.jsonl"), &part.maps)?;
            write_jsonl(&sub.join("calibrated_sensor.jsonl"), &part.calibrated_sensors)?;
            write_jsonl(&sub.join("scene.jsonl"), &part.scenes)?;
            write_jsonl(&sub.join("sample.jsonl"), &part.samples)?;
            write_jsonl(&sub.join("sample_data.jsonl"), &part.sample_data)?;
            write_jsonl(&sub.join("ego_pose.jsonl"), &part.ego_poses)?;
            write_jsonl(&sub.join("tag.jsonl"), &part.tags)?;
        }
        Ok(())
    }

    fn canonicalize(&mut self) {
        self.rides.sort_by(|a, b| a.id.cmp(&b.id));
        self.maps.sort_by(|a, b| a.id.cmp(&b.id));
        self.calibrated_sensors.sort_by(|a, b| a.id.cmp(&b.id));
        self.scenes.sort_by(|a, b| a.id.cmp(&b.id));
        self.samples.sort_by(|a, b| a.id.cmp(&b.id));
        self.sample_data.sort_by(|a, b| a.id.cmp(&b.id));
        self.ego_poses.sort_by(|a, b| a.sample_id.cmp(&b.sample_id));
        self.tags.sort_by(|a, b| a.key().cmp(&b.key()));
    }

    /// Loads every ride directory below `dir`. References are not checked;
    /// use [`RideStore::integrity_check`].
    pub fn load(dir: &Path) -> Result<Self, StoreError> {
        let mut store = RideStore::default();
        let tax = dir.join("taxonomy.jsonl");
        if tax.exists() {
            store.taxonomy = read_jsonl::<TaxonomyEntry>(&tax)?.into_iter().collect();
        } else {
            store = RideStore::new();
        }
        let entries = fs::read_dir(dir).map_err(|source| StoreError::Io { path: dir.display().to_string(), source })?;
        let mut subdirs: Vec<_> = entries.filter_map(Result::ok).map(|e| e.path()).filter(|p| p.is_dir()).collect();
        subdirs.sort();
        for sub in subdirs {
            if !TABLES.iter().any(|t| sub.join(format!("{t}.jsonl")).exists()) {
                continue;
            }
            let read = |t: &str| sub.join(format!("{t}.jsonl"));
            store.rides.extend(read_jsonl(&read("ride"))?);
            for m in read_jsonl::<Map>(&read("map"))? {
                if !store.maps.contains(&m) {
                    store.maps.push(m);
                }
            }
            store.calibrated_sensors.extend(read_jsonl(&read("calibrated_sensor"))?);
            store.scenes.extend(read_jsonl(&read("scene"))?);
            store.samples.extend(read_jsonl(&read("sample"))?);
            store.sample_data.extend(read_jsonl(&read("sample_data"))?);
            store.ego_poses.extend(read_jsonl(&read("ego_pose"))?);
            store.tags.extend(read_jsonl(&read("tag"))?);
        }
        store.rebuild_index();
        Ok(store)
    }

    fn rebuild_index(&mut self) {
        let mut ix = Index::default();
        ix.rides = self.rides.iter().map(|r| r.id.clone()).collect();
        ix.maps = self.maps.iter().map(|m| m.id.clone()).collect();
        ix.sensors = self.calibrated_sensors.iter().map(|s| (s.id.clone(), s.ride_id.clone())).collect();
        ix.scenes = self.scenes.iter().map(|s| (s.id.clone(), s.ride_id.clone())).collect();
        ix.samples = self
            .samples
            .iter()
            .filter_map(|s| ix.scenes.get(&s.scene_id).map(|r| (s.id.clone(), r.clone())))
            .collect();
        ix.sample_data = self.sample_data.iter().map(|d| d.id.clone()).collect();
        ix.poses = self.ego_poses.iter().map(|p| p.sample_id.clone()).collect();
        ix.tags = self
            .tags
            .iter()
            .map(|t| (t.scene_id.clone(), t.category.clone(), t.group.clone(), t.name.clone()))
            .collect();
        self.index = ix;
    }

    /// One CSV file per table.
    pub fn export_csv(&self, dir: &Path) -> Result<(), StoreError> {
        fs::create_dir_all(dir).map_err(|source| StoreError::Io { path: dir.display().to_string(), source })?;
        let mut s = self.clone();
        s.canonicalize();
        let f = |x: f64| x.to_string();
        let q = |x: &str| {
            if x.contains([',', '"', '\n']) {
                format!("\"{}\"", x.replace('"', "\"\""))
            } else {
                x.to_string()
            }
        };
        let mut files: Vec<(&str, String)> = Vec::new();
        let mut t = String::from("id,start,end,vehicle,rig,source,map_id\n");
        for r in &s.rides {
            let src = if r.source == RideSource::Simulation { "simulation" } else { "replay" };
            t += &format!("{},{},{},{},{},{},{}\n", q(&r.id), f(r.start), f(r.end), q(&r.vehicle), q(&r.rig), src, q(&r.map_id));
        }
        files.push(("ride", t));
        let mut t = String::from("id,name,reference\n");
        for m in &s.maps {
            t += &format!("{},{},{}\n", q(&m.id), q(&m.name), q(&m.reference));
        }
        files.push(("map", t));
        let mut t = String::from("id,ride_id,sensor_id,modality,x,y,z,roll,pitch,yaw\n");
        for c in &s.calibrated_sensors {
            let [x, y, z] = c.translation;
            let [ro, pi, ya] = c.rotation;
            t += &format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                q(&c.id),
                q(&c.ride_id),
                q(&c.sensor_id),
                c.modality,
                f(x),
                f(y),
                f(z),
                f(ro),
                f(pi),
                f(ya)
            );
        }
        files.push(("calibrated_sensor", t));
        let mut t = String::from("id,ride_id,start,end\n");
        for c in &s.scenes {
            t += &format!("{},{},{},{}\n", q(&c.id), q(&c.ride_id), f(c.start), f(c.end));
        }
        files.push(("scene", t));
        let mut t = String::from("id,scene_id,timestamp\n");
        for c in &s.samples {
            t += &format!("{},{},{}\n", q(&c.id), q(&c.scene_id), f(c.timestamp));
        }
        files.push(("sample", t));
        let mut t = String::from("id,sample_id,sensor_id,timestamp,payload\n");
        for c in &s.sample_data {
            t += &format!("{},{},{},{},{}\n", q(&c.id), q(&c.sample_id), q(&c.sensor_id), f(c.timestamp), q(&c.payload));
        }
        files.push(("sample_data", t));
        let mut t = String::from("sample_id,x,y,psi,v_x,v_y,psi_dot\n");
        for c in &s.ego_poses {
            let p = c.pose;
            t += &format!("{},{},{},{},{},{},{}\n", q(&c.sample_id), f(p.x), f(p.y), f(p.psi), f(p.v_x), f(p.v_y), f(p.psi_dot));
        }
        files.push(("ego_pose", t));
        let mut t = String::from("scene_id,category,group,name,origin\n");
        for c in &s.tags {
            let o = if c.origin == TagOrigin::Auto { "auto" } else { "manual" };
            t += &format!("{},{},{},{},{}\n", q(&c.scene_id), c.category, c.group, c.name, o);
        }
        files.push(("tag", t));
        for (name, text) in files {
            let p = dir.join(format!("{name}.csv"));
            fs::write(&p, text).map_err(|source| StoreError::Io { path: p.display().to_string(), source })?;
        }
        Ok(())
    }

    /// Records a complete ride: calibration, fixed-duration scenes, aligned
    /// samples with one ego pose each, and auto tags.
    pub fn ingest(&mut self, rec: &Recording) -> Result<IngestSummary, StoreError> {
        let ride_id = rec.ride.id.clone();
        if rec.sensors.len() != rec.measurements.len() {
            return Err(StoreError::Invalid {
                table: "ride",
                id: ride_id,
                reason: "one measurement stream per calibrated sensor required".into(),
            });
        }
        if !self.index.maps.contains(&rec.map.id) {
            self.add_map(rec.map.clone())?;
        }
        self.create_ride(rec.ride.clone())?;
        for s in &rec.sensors {
            self.add_calibrated_sensor(s.clone())?;
        }
        let windows = match &rec.scene_cuts {
            Some(cuts) => scenes_from_cuts(rec.ride.start, rec.ride.end, cuts),
            None => segment_scenes(rec.ride.start, rec.ride.end, rec.scene_duration),
        };
        let scene_ids: Vec<String> = (0..windows.len()).map(|k| format!("{ride_id}-scene-{k:04}")).collect();
        for (id, &(start, end)) in scene_ids.iter().zip(&windows) {
            self.add_scene(Scene { id: id.clone(), ride_id: ride_id.clone(), start, end })?;
        }
        let tolerance = rec.tolerance.or_else(|| default_tolerance(&rec.measurements)).unwrap_or(0.0);
        let aligned = align_samples_detailed(&rec.measurements, tolerance, rec.anchor);
        let mut scene_poses: Vec<Vec<PoseState>> = vec![Vec::new(); windows.len()];
        let mut summary = IngestSummary { scenes: windows.len(), tolerance, ..Default::default() };
        let last = windows.len().saturating_sub(1);
        for a in aligned {
            let t = a.timestamp;
            let Some(k) =
                windows.iter().position(|&(s, e)| t >= s && t < e).or_else(|| (t == rec.ride.end && !windows.is_empty()).then_some(last))
            else {
                continue;
            };
            let sample_id = format!("{ride_id}-sample-{:06}", summary.samples);
            self.add_sample(Sample { id: sample_id.clone(), scene_id: scene_ids[k].clone(), timestamp: t })?;
            for (s, &m) in rec.sensors.iter().zip(&a.members) {
                let id = format!("{ride_id}-sd-{:07}", summary.sample_data);
                self.add_sample_data(SampleData {
                    id,
                    sample_id: sample_id.clone(),
                    sensor_id: s.id.clone(),
                    timestamp: m,
                    payload: format!("sim://{ride_id}/{}/{}", s.sensor_id, crate::fmt::num(m)),
                })?;
                summary.sample_data += 1;
            }
            let pose = interpolate_pose(&rec.poses, t).unwrap_or_default();
            self.add_ego_pose(EgoPose { sample_id, pose })?;
            scene_poses[k].push(pose);
            summary.samples += 1;
        }
        let modalities: BTreeSet<Modality> = rec.sensors.iter().map(|s| s.modality).collect();
        for (id, poses) in scene_ids.iter().zip(&scene_poses) {
            if poses.is_empty() {
                continue;
            }
            for tag in auto_tags(id, poses, &modalities) {
                self.add_tag(tag)?;
                summary.tags += 1;
            }
        }
        Ok(summary)
    }
}

/// One calibrated sensor per physical device of the rig, posed like the
/// device's first pattern.
pub fn calibration_from_rig(rig: &Rig, ride_id: &str) -> Vec<CalibratedSensor> {
    rig.primary_specs()
        .into_iter()
        .map(|m| {
            CalibratedSensor {
                id: format!("{ride_id}-cs-{}", m.spec.device),
                ride_id: ride_id.into(),
                sensor_id: m.spec.device.clone(),
                modality: m.spec.modality,
                intrinsic: None,
                translation: m.pose.translation,
                rotation: m.pose.orientation,
            }
        })
        .collect()
}

/// Everything needed to record one ride.
#[derive(Debug, Clone)]
pub struct Recording {
    pub ride: Ride,
    pub map: Map,
    pub sensors: Vec<CalibratedSensor>,
    /// Measurement timestamps per calibrated sensor [s]
    pub measurements: Vec<Vec<f64>>,
    /// Ego trajectory sorted by time
    pub poses: Vec<(f64, PoseState)>,
    /// [s]
    pub scene_duration: f64,
    /// Interior scene boundaries; overrides `scene_duration`
    pub scene_cuts: Option<Vec<f64>>,
    /// Defaults to half the fastest sensor period
    pub tolerance: Option<f64>,
    /// Defaults to the slowest sensor
    pub anchor: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct IngestSummary {
    pub scenes: usize,
    pub samples: usize,
    pub sample_data: usize,
    pub tags: usize,
    pub tolerance: f64,
}

/// Linear interpolation in a time-sorted trajectory, clamped at both ends.
pub fn interpolate_pose(trace: &[(f64, PoseState)], t: f64) -> Option<PoseState> {
    let first = trace.first()?;
    if t <= first.0 {
        return Some(first.1);
    }
    let i = trace.partition_point(|(ti, _)| *ti <= t);
    if i >= trace.len() {
        return Some(trace[trace.len() - 1].1);
    }
    let (t0, p0) = trace[i - 1];
    let (t1, p1) = trace[i];
    let w = if t1 > t0 { (t - t0) / (t1 - t0) } else { 0.0 };
    Some(p0.lerp(&p1, w))
}

fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), StoreError> {
    let err = |source| StoreError::Io { path: path.display().to_string(), source };
    let mut buf = Vec::new();
    for r in rows {
        serde_json::to_writer(&mut buf, r).map_err(|e| StoreError::Invalid {
            table: "store",
            id: path.display().to_string(),
            reason: e.to_string(),
        })?;
        buf.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(err)?;
    f.write_all(&buf).map_err(err)?;
    f.flush().map_err(err)
}

fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, StoreError> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let text = fs::read_to_string(path).map_err(|source| StoreError::Io { path: path.display().to_string(), source })?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| StoreError::Parse {
                path: path.display().to_string(),
                line: i + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_segmentation() {
        assert_eq!(segment_scenes(0.0, 100.0, 20.0).len(), 5);
        let s = segment_scenes(0.0, 95.0, 20.0);
        assert_eq!(s.len(), 5);
        assert_eq!(s[4], (80.0, 95.0));
        assert!(segment_scenes(0.0, 10.0, 0.0).is_empty());
        assert_eq!(scenes_from_cuts(0.0, 10.0, &[7.0, 3.0, 12.0]), vec![(0.0, 3.0), (3.0, 7.0), (7.0, 10.0)]);
    }

    #[test]
    fn speed_buckets() {
        assert_eq!(speed_bucket(0.0), "standstill");
        assert_eq!(speed_bucket(5.0), "low");
        assert_eq!(speed_bucket(10.0), "medium");
        assert_eq!(speed_bucket(30.0), "high");
        let tags = auto_tags("s", &[PoseState::default()], &[Modality::Radar].into_iter().collect());
        assert_eq!(tags[0].name, "standstill");
        assert_eq!((tags[1].category.as_str(), tags[1].group.as_str(), tags[1].name.as_str()), ("sensors", "modality", "radar"));
    }

    #[test]
    fn references_are_checked_on_insert() {
        let mut s = RideStore::new();
        let ride = Ride {
            id: "r1".into(),
            start: 0.0,
            end: 10.0,
            vehicle: "edgar".into(),
            rig: "edgar".into(),
            source: RideSource::Simulation,
            map_id: "m".into(),
        };
        assert!(matches!(s.create_ride(ride.clone()), Err(StoreError::Dangling { .. })));
        s.add_map(Map { id: "m".into(), name: "test track".into(), reference: "file://track".into() }).unwrap();
        s.create_ride(ride.clone()).unwrap();
        assert!(matches!(s.create_ride(ride), Err(StoreError::Duplicate { .. })));
        let cs = CalibratedSensor {
            id: "c".into(),
            ride_id: "nope".into(),
            sensor_id: "cam".into(),
            modality: Modality::Camera,
            intrinsic: None,
            translation: [0.0; 3],
            rotation: [0.0; 3],
        };
        assert!(matches!(s.add_calibrated_sensor(cs), Err(StoreError::Dangling { .. })));
        s.add_scene(Scene { id: "sc".into(), ride_id: "r1".into(), start: 0.0, end: 10.0 }).unwrap();
        let tag = |c: &str, g: &str| Tag {
            scene_id: "sc".into(),
            category: c.into(),
            group: g.into(),
            name: "x".into(),
            origin: TagOrigin::Manual,
        };
        assert!(s.add_tag(tag("weather", "speed")).is_err());
        s.add_tag(tag("weather", "condition")).unwrap();
        assert!(matches!(s.add_tag(tag("weather", "condition")), Err(StoreError::Duplicate { .. })));
    }

    #[test]
    fn pose_interpolation() {
        let p = |x| PoseState { x, ..Default::default() };
        let tr = vec![(0.0, p(0.0)), (1.0, p(10.0))];
        assert_eq!(interpolate_pose(&tr, 0.25).unwrap().x, 2.5);
        assert_eq!(interpolate_pose(&tr, 5.0).unwrap().x, 10.0);
        assert!(interpolate_pose(&[], 1.0).is_none());
    }
}
