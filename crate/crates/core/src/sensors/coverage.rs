use std::collections::VecDeque;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::geometry::point_in_polygon;
use super::rig::{Modality, Rig, SensorSpec};
use super::{PreparedDevice, SensorsError};

/// Height of BEV query points above ground [m].
pub const DEFAULT_QUERY_HEIGHT: f64 = 1.0;

/// Axis-aligned BEV window in the vehicle frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridWindow {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub cell: f64,
}

impl GridWindow {
    pub fn centered(half_x: f64, half_y: f64, cell: f64) -> Self {
        Self { x_min: -half_x, x_max: half_x, y_min: -half_y, y_max: half_y, cell }
    }

    pub fn validate(&self) -> Result<(), SensorsError> {
        let all = [self.x_min, self.x_max, self.y_min, self.y_max, self.cell];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(SensorsError::DegenerateWindow("non-finite bound".into()));
        }
        if !(self.cell > 0.0) {
            return Err(SensorsError::DegenerateWindow("cell size must be positive".into()));
        }
        if !(self.x_max > self.x_min && self.y_max > self.y_min) {
            return Err(SensorsError::DegenerateWindow("empty extent".into()));
        }
        let (nx, ny) = self.shape();
        if nx.saturating_mul(ny) > 50_000_000 {
            return Err(SensorsError::DegenerateWindow(format!("{nx} x {ny} cells is too many")));
        }
        Ok(())
    }

    /// Number of cells along x and y. Partial cells at the far edge count.
    pub fn shape(&self) -> (usize, usize) {
        let n = |span: f64| ((span / self.cell) - 1e-9).ceil().max(1.0) as usize;
        (n(self.x_max - self.x_min), n(self.y_max - self.y_min))
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.x_min + (ix as f64 + 0.5) * self.cell,
            self.y_min + (iy as f64 + 0.5) * self.cell,
        ]
    }

    pub fn cell_area(&self) -> f64 {
        self.cell * self.cell
    }
}

/// Per-cell, per-modality count of devices that see the cell center.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageMap {
    pub window: GridWindow,
    pub query_height: f64,
    nx: usize,
    ny: usize,
    /// `counts[modality][iy * nx + ix]`
    counts: Vec<Vec<u16>>,
    footprint: Vec<bool>,
}

const CSV_CELL_HEADER: &str = "ix,iy,x_m,y_m,footprint,camera,lidar,radar,microphone,gnss";
const CSV_META_HEADER: &str = "x_min,x_max,y_min,y_max,cell,query_height,nx,ny";

impl CoverageMap {
    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn count(&self, modality: Modality, ix: usize, iy: usize) -> u16 {
        self.counts[modality.index()][self.index(ix, iy)]
    }

    /// Sum over a modality set.
    pub fn count_in(&self, modalities: &[Modality], ix: usize, iy: usize) -> u32 {
        let i = self.index(ix, iy);
        modalities.iter().map(|m| u32::from(self.counts[m.index()][i])).sum()
    }

    pub fn in_footprint(&self, ix: usize, iy: usize) -> bool {
        self.footprint[self.index(ix, iy)]
    }

    pub fn max_count(&self, modality: Modality) -> u16 {
        self.counts[modality.index()].iter().copied().max().unwrap_or(0)
    }

    /// Cells outside the footprint with zero count over `modalities`.
    pub fn zero_cells(&self, modalities: &[Modality]) -> usize {
        (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .filter(|&(ix, iy)| !self.in_footprint(ix, iy) && self.count_in(modalities, ix, iy) == 0)
            .count()
    }

    pub fn footprint_cells(&self) -> usize {
        self.footprint.iter().filter(|f| **f).count()
    }

    pub fn to_csv(&self) -> String {
        let w = &self.window;
        let mut out = String::new();
        let _ = writeln!(out, "{CSV_META_HEADER}");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            w.x_min, w.x_max, w.y_min, w.y_max, w.cell, self.query_height, self.nx, self.ny
        );
        let _ = writeln!(out, "{CSV_CELL_HEADER}");
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = w.cell_center(ix, iy);
                let i = self.index(ix, iy);
                let _ = write!(out, "{ix},{iy},{},{},{}", c[0], c[1], u8::from(self.footprint[i]));
                for m in Modality::ALL {
                    let _ = write!(out, ",{}", self.counts[m.index()][i]);
                }
                out.push('\n');
            }
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, SensorsError> {
        let bad = |what: &str| SensorsError::Parse(format!("coverage csv: {what}"));
        let mut lines = text.lines();
        if lines.next() != Some(CSV_META_HEADER) {
            return Err(bad("missing metadata header"));
        }
        let meta: Vec<&str> = lines.next().ok_or_else(|| bad("missing metadata"))?.split(',').collect();
        if meta.len() != 8 {
            return Err(bad("metadata has wrong arity"));
        }
        let f = |i: usize| meta[i].parse::<f64>().map_err(|_| bad("bad number in metadata"));
        let u = |i: usize| meta[i].parse::<usize>().map_err(|_| bad("bad size in metadata"));
        let window = GridWindow { x_min: f(0)?, x_max: f(1)?, y_min: f(2)?, y_max: f(3)?, cell: f(4)? };
        window.validate()?;
        let (nx, ny) = (u(6)?, u(7)?);
        if window.shape() != (nx, ny) {
            return Err(bad("grid shape does not match window"));
        }
        if lines.next() != Some(CSV_CELL_HEADER) {
            return Err(bad("missing cell header"));
        }
        let mut counts = vec![vec![0u16; nx * ny]; Modality::ALL.len()];
        let mut footprint = vec![false; nx * ny];
        let mut seen = 0;
        for line in lines.filter(|l| !l.is_empty()) {
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 + Modality::ALL.len() {
                return Err(bad("cell row has wrong arity"));
            }
            let ix: usize = cols[0].parse().map_err(|_| bad("bad ix"))?;
            let iy: usize = cols[1].parse().map_err(|_| bad("bad iy"))?;
            if ix >= nx || iy >= ny {
                return Err(bad("cell index out of range"));
            }
            let i = iy * nx + ix;
            footprint[i] = cols[4] == "1";
            for (k, c) in cols[5..].iter().enumerate() {
                counts[k][i] = c.parse().map_err(|_| bad("bad count"))?;
            }
            seen += 1;
        }
        if seen != nx * ny {
            return Err(bad("cell rows missing"));
        }
        Ok(Self { window, query_height: f(5)?, nx, ny, counts, footprint })
    }

    /// Plain PGM (P2) of the summed count over `modalities`; row 0 is the
    /// largest y so the image reads like a map with x to the right.
    pub fn to_pgm(&self, modalities: &[Modality]) -> String {
        let maxval = (0..self.ny)
            .flat_map(|iy| (0..self.nx).map(move |ix| (ix, iy)))
            .map(|(ix, iy)| self.count_in(modalities, ix, iy))
            .max()
            .unwrap_or(0)
            .max(1);
        let mut out = format!("P2\n{} {}\n{}\n", self.nx, self.ny, maxval);
        for iy in (0..self.ny).rev() {
            let row: Vec<String> =
                (0..self.nx).map(|ix| self.count_in(modalities, ix, iy).to_string()).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        out
    }

    /// 4-connected components of zero-count cells outside the footprint,
    /// largest first.
    pub fn blind_regions(&self, modalities: &[Modality]) -> Vec<BlindRegion> {
        let (nx, ny) = (self.nx, self.ny);
        let blind = |i: usize| !self.footprint[i] && self.count_in(modalities, i % nx, i / nx) == 0;
        let mut label = vec![false; nx * ny];
        let mut regions = Vec::new();
        for start in 0..nx * ny {
            if label[start] || !blind(start) {
                continue;
            }
            label[start] = true;
            let mut queue = VecDeque::from([start]);
            let (mut cells, mut sx, mut sy) = (0usize, 0.0, 0.0);
            while let Some(i) = queue.pop_front() {
                let (ix, iy) = (i % nx, i / nx);
                let c = self.window.cell_center(ix, iy);
                cells += 1;
                sx += c[0];
                sy += c[1];
                let mut visit = |j: usize| {
                    if !label[j] && blind(j) {
                        label[j] = true;
                        queue.push_back(j);
                    }
                };
                if ix > 0 {
                    visit(i - 1);
                }
                if ix + 1 < nx {
                    visit(i + 1);
                }
                if iy > 0 {
                    visit(i - nx);
                }
                if iy + 1 < ny {
                    visit(i + nx);
                }
            }
            regions.push(BlindRegion {
                cells,
                area: cells as f64 * self.window.cell_area(),
                centroid: [sx / cells as f64, sy / cells as f64],
            });
        }
        regions.sort_by_key(|r| std::cmp::Reverse(r.cells));
        regions
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlindRegion {
    pub cells: usize,
    /// [m^2]
    pub area: f64,
    pub centroid: [f64; 2],
}

/// Evaluates every device at every cell center.
pub fn coverage_map(rig: &Rig, window: &GridWindow, query_height: f64) -> Result<CoverageMap, SensorsError> {
    window.validate()?;
    if !query_height.is_finite() {
        return Err(SensorsError::DegenerateWindow("non-finite query height".into()));
    }
    let (nx, ny) = window.shape();
    let devices = PreparedDevice::all(rig);
    let mut counts = vec![vec![0u16; nx * ny]; Modality::ALL.len()];
    let mut footprint = vec![false; nx * ny];
    for iy in 0..ny {
        for ix in 0..nx {
            let c = window.cell_center(ix, iy);
            let i = iy * nx + ix;
            footprint[i] = !rig.footprint().is_empty() && point_in_polygon(&c, rig.footprint());
            let p = [c[0], c[1], query_height];
            for d in &devices {
                if d.sees(rig, &p) {
                    counts[d.modality.index()][i] += 1;
                }
            }
        }
    }
    Ok(CoverageMap { window: *window, query_height, nx, ny, counts, footprint })
}

pub fn blind_spot_regions(
    rig: &Rig,
    modalities: &[Modality],
    window: &GridWindow,
    query_height: f64,
) -> Result<Vec<BlindRegion>, SensorsError> {
    Ok(coverage_map(rig, window, query_height)?.blind_regions(modalities))
}

/// Options for the azimuth sweep around the vehicle-frame origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub query_height: f64,
    /// [rad]
    pub azimuth_step: f64,
    /// Largest radius tried; defaults to the longest max_range of the modality.
    pub max_radius: Option<f64>,
    /// Coarse radial scan step [m]
    pub radial_step: f64,
    /// Bisection tolerance [m]
    pub tolerance: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            query_height: DEFAULT_QUERY_HEIGHT,
            azimuth_step: 0.1f64.to_radians(),
            max_radius: None,
            radial_step: 0.05,
            tolerance: 1e-6,
        }
    }
}

fn bearing_samples(step: f64) -> usize {
    (TAU / step).round().max(1.0) as usize
}

fn covered_bearings(rig: &Rig, devices: &[PreparedDevice], radius: f64, opts: &SweepOptions) -> Vec<bool> {
    let n = bearing_samples(opts.azimuth_step);
    (0..n)
        .map(|k| {
            let a = TAU * k as f64 / n as f64;
            let p = [radius * a.cos(), radius * a.sin(), opts.query_height];
            devices.iter().any(|d| d.sees(rig, &p))
        })
        .collect()
}

fn modality_devices(rig: &Rig, modality: Modality) -> Result<Vec<PreparedDevice<'_>>, SensorsError> {
    let devices: Vec<_> = PreparedDevice::all(rig).into_iter().filter(|d| d.modality == modality).collect();
    if devices.is_empty() {
        return Err(SensorsError::NoSensors(modality));
    }
    Ok(devices)
}

/// Uncovered azimuth intervals `[start, end]` [rad, in [0, 2 pi)] at horizontal
/// distance `radius` from the origin. An interval may wrap through zero, in
/// which case `start > end`.
pub fn coverage_gaps(
    rig: &Rig,
    modality: Modality,
    radius: f64,
    opts: &SweepOptions,
) -> Result<Vec<(f64, f64)>, SensorsError> {
    let devices = modality_devices(rig, modality)?;
    let covered = covered_bearings(rig, &devices, radius, opts);
    let n = covered.len();
    let angle = |k: usize| TAU * k as f64 / n as f64;
    if covered.iter().all(|c| !c) {
        return Ok(vec![(0.0, angle(n - 1))]);
    }
    // start scanning just after a covered sample so runs never split at zero
    let first = covered.iter().position(|c| *c).unwrap_or(0);
    let mut gaps = Vec::new();
    let mut run: Option<usize> = None;
    for off in 1..=n {
        let k = (first + off) % n;
        match (covered[k], run) {
            (false, None) => run = Some(k),
            (true, Some(s)) => {
                gaps.push((angle(s), angle((k + n - 1) % n)));
                run = None;
            }
            _ => {}
        }
    }
    gaps.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(gaps)
}

/// Smallest radius at which every sampled bearing is covered by at least one
/// device of `modality`; `None` if no radius up to the limit achieves it.
pub fn min_full_coverage_range(rig: &Rig, modality: Modality, opts: &SweepOptions) -> Result<Option<f64>, SensorsError> {
    let devices = modality_devices(rig, modality)?;
    let limit = opts.max_radius.unwrap_or_else(|| {
        rig.sensors()
            .iter()
            .filter(|m| m.spec.modality == modality)
            .map(|m| m.spec.max_range)
            .fold(0.0, f64::max)
    });
    let full = |r: f64| covered_bearings(rig, &devices, r, opts).iter().all(|c| *c);
    if full(0.0) {
        return Ok(Some(0.0));
    }
    let mut lo = 0.0;
    let mut k = 1usize;
    loop {
        let r = (k as f64 * opts.radial_step).min(limit);
        if full(r) {
            let mut hi = r;
            while hi - lo > opts.tolerance {
                let mid = 0.5 * (lo + hi);
                if full(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Ok(Some(hi));
        }
        if r >= limit {
            return Ok(None);
        }
        lo = r;
        k += 1;
    }
}

/// Network load of one sensor stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowSpec {
    /// [bit/s]
    pub bitrate: f64,
    /// [s]
    pub period: f64,
    /// [bytes]
    pub frame_size: u64,
}

pub fn sensor_flow_spec(spec: &SensorSpec) -> FlowSpec {
    FlowSpec {
        bitrate: spec.payload_per_frame as f64 * 8.0 * spec.rate,
        period: 1.0 / spec.rate,
        frame_size: spec.payload_per_frame,
    }
}
