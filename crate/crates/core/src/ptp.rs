//! Cascaded PTP clock hierarchy: two-step exchanges, transparent-clock
//! residence correction and a PI servo on every boundary and ordinary clock.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt::Write as _;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Oscillator drift of the grandmaster: 0.25 s per year.
pub const GM_DRIFT_RATE: f64 = 0.25 / (365.25 * 86_400.0);
pub const MAX_DRIFT_RATE: f64 = 1e-4;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PtpError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("{0:?} clocks do not run a servo")]
    NoServo(ClockRole),
    #[error("negative residence time {0} s")]
    NegativeResidence(f64),
    #[error("invalid clock: {0}")]
    Clock(String),
    #[error("invalid sync configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ClockRole {
    Gm,
    Bc,
    Tc,
    Oc,
}

impl ClockRole {
    pub fn name(self) -> &'static str {
        match self {
            ClockRole::Gm => "GM",
            ClockRole::Bc => "BC",
            ClockRole::Tc => "TC",
            ClockRole::Oc => "OC",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ServoGains {
    pub kp: f64,
    pub ki: f64,
}

impl Default for ServoGains {
    fn default() -> Self {
        Self { kp: 0.7, ki: 0.3 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ServoState {
    /// Frequency correction added to the free-running drift [s/s]
    pub freq_adj: f64,
    pub last_correction: f64,
    /// Sum of all offset estimates fed to the servo [s]
    pub integral: f64,
}

/// Local clock: `local(t) = t + offset + (drift_rate + freq_adj) (t - epoch)`,
/// plus Gaussian noise on timestamping reads.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClockModel {
    pub role: ClockRole,
    /// Offset from true time at `epoch` [s]
    pub offset: f64,
    pub drift_rate: f64,
    pub timestamp_noise_sigma: f64,
    pub epoch: f64,
    pub servo: ServoState,
}

impl ClockModel {
    pub fn new(role: ClockRole, offset: f64, drift_rate: f64, timestamp_noise_sigma: f64) -> Result<Self, PtpError> {
        let c = Self { role, offset, drift_rate, timestamp_noise_sigma, epoch: 0.0, servo: ServoState::default() };
        c.validate()?;
        Ok(c)
    }

    pub fn ideal(role: ClockRole) -> Self {
        Self { role, offset: 0.0, drift_rate: 0.0, timestamp_noise_sigma: 0.0, epoch: 0.0, servo: ServoState::default() }
    }

    pub fn validate(&self) -> Result<(), PtpError> {
        if !(self.offset.is_finite() && self.drift_rate.is_finite() && self.epoch.is_finite()) {
            return Err(PtpError::Clock("non-finite state".into()));
        }
        if self.drift_rate.abs() > MAX_DRIFT_RATE {
            return Err(PtpError::Clock(format!("|drift_rate| {} exceeds {MAX_DRIFT_RATE}", self.drift_rate)));
        }
        if !(self.timestamp_noise_sigma >= 0.0 && self.timestamp_noise_sigma.is_finite()) {
            return Err(PtpError::Clock("noise sigma must be non-negative".into()));
        }
        Ok(())
    }

    pub fn rate(&self) -> f64 {
        self.drift_rate + self.servo.freq_adj
    }

    /// Offset from true time at `t`, noise free.
    pub fn offset_at(&self, t: f64) -> f64 {
        self.offset + self.rate() * (t - self.epoch)
    }

    /// Noise-free read, used for reporting.
    pub fn read(&self, t: f64) -> f64 {
        t + self.offset_at(t)
    }

    /// Timestamping read with Gaussian noise.
    pub fn timestamp<R: Rng + ?Sized>(&self, t: f64, rng: &mut R) -> f64 {
        let noise = if self.timestamp_noise_sigma > 0.0 {
            Normal::new(0.0, self.timestamp_noise_sigma).expect("sigma checked").sample(rng)
        } else {
            0.0
        };
        self.read(t) + noise
    }
}

/// `read_clock` with optional timestamp noise; `rng = None` gives the noise-free read.
pub fn read_clock<R: Rng + ?Sized>(clock: &ClockModel, true_time: f64, rng: Option<&mut R>) -> f64 {
    match rng {
        Some(r) => clock.timestamp(true_time, r),
        None => clock.read(true_time),
    }
}

/// PI correction applied at true time `t`: steps the phase by `-kp * theta`
/// and the frequency by `-ki * theta / interval`.
pub fn servo_update(
    clock: &mut ClockModel,
    offset_estimate: f64,
    t: f64,
    interval: f64,
    gains: ServoGains,
) -> Result<(), PtpError> {
    if matches!(clock.role, ClockRole::Gm | ClockRole::Tc) {
        return Err(PtpError::NoServo(clock.role));
    }
    let phase = clock.offset_at(t);
    let step = -gains.kp * offset_estimate;
    clock.offset = phase + step;
    clock.epoch = t;
    clock.servo.freq_adj -= gains.ki * offset_estimate / interval;
    clock.servo.last_correction = step;
    clock.servo.integral += offset_estimate;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MessageKind {
    Sync,
    FollowUp,
    DelayReq,
    DelayResp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PtpMessageRecord {
    pub kind: MessageKind,
    /// Sender clock at transmission [s]
    pub origin_timestamp: f64,
    /// Receiver clock at reception [s]
    pub receive_timestamp: f64,
    pub correction_field: f64,
}

impl PtpMessageRecord {
    pub fn new(kind: MessageKind) -> Self {
        Self { kind, origin_timestamp: 0.0, receive_timestamp: 0.0, correction_field: 0.0 }
    }
}

/// What a transparent clock does to a passing event message.
pub fn transparent_correction(message: PtpMessageRecord, residence: f64) -> Result<PtpMessageRecord, PtpError> {
    if !(residence >= 0.0) {
        return Err(PtpError::NegativeResidence(residence));
    }
    Ok(PtpMessageRecord { correction_field: message.correction_field + residence, ..message })
}

/// Delays between a master and a slave. Residences list one entry per
/// transparent clock traversed in that direction.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SyncPath {
    pub link_delay_ms: f64,
    pub link_delay_sm: f64,
    pub residence_ms: Vec<f64>,
    pub residence_sm: Vec<f64>,
}

impl SyncPath {
    pub fn symmetric(delay: f64) -> Self {
        Self { link_delay_ms: delay, link_delay_sm: delay, ..Default::default() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExchangeResult {
    pub offset_estimate: f64,
    pub delay_estimate: f64,
    /// True time the DelayReq reaches the master
    pub completed_at: f64,
    pub sync: PtpMessageRecord,
    pub delay_req: PtpMessageRecord,
}

/// Two-step exchange started at true time `t_send`. The slave sends its
/// DelayReq `turnaround` seconds after receiving the Sync. With
/// `apply_correction = false` the transparent clocks are treated as plain
/// bridges that leave the correction field untouched.
pub fn sync_exchange<R: Rng + ?Sized>(
    master: &ClockModel,
    slave: &ClockModel,
    path: &SyncPath,
    t_send: f64,
    turnaround: f64,
    apply_correction: bool,
    rng: &mut R,
) -> Result<ExchangeResult, PtpError> {
    let traverse = |mut msg: PtpMessageRecord, link: f64, residences: &[f64]| -> Result<(PtpMessageRecord, f64), PtpError> {
        let mut delay = link;
        for &r in residences {
            if apply_correction {
                msg = transparent_correction(msg, r)?;
            } else if r < 0.0 {
                return Err(PtpError::NegativeResidence(r));
            }
            delay += r;
        }
        Ok((msg, delay))
    };

    let mut sync = PtpMessageRecord::new(MessageKind::Sync);
    sync.origin_timestamp = master.timestamp(t_send, rng);
    let (mut sync, d_ms) = traverse(sync, path.link_delay_ms, &path.residence_ms)?;
    let t2_true = t_send + d_ms;
    sync.receive_timestamp = slave.timestamp(t2_true, rng);

    let t3_true = t2_true + turnaround;
    let mut req = PtpMessageRecord::new(MessageKind::DelayReq);
    req.origin_timestamp = slave.timestamp(t3_true, rng);
    let (mut req, d_sm) = traverse(req, path.link_delay_sm, &path.residence_sm)?;
    let t4_true = t3_true + d_sm;
    req.receive_timestamp = master.timestamp(t4_true, rng);

    let ms = sync.receive_timestamp - sync.origin_timestamp - sync.correction_field;
    let sm = req.receive_timestamp - req.origin_timestamp - req.correction_field;
    Ok(ExchangeResult {
        offset_estimate: 0.5 * (ms - sm),
        delay_estimate: 0.5 * (ms + sm),
        completed_at: t4_true,
        sync,
        delay_req: req,
    })
}

// ---- topology ----------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct SyncNode {
    pub id: String,
    pub clock: ClockModel,
    pub parent: Option<usize>,
    /// Propagation delay parent -> node and node -> parent [s]
    pub delay_down: f64,
    pub delay_up: f64,
    /// Uniform residence-time bounds for transparent clocks [s]
    pub residence: (f64, f64),
}

/// Clock tree rooted at the grandmaster.
#[derive(Debug, Clone, PartialEq)]
pub struct SyncTopology {
    nodes: Vec<SyncNode>,
    /// For each node that synchronizes: its master and the TCs in between.
    plans: Vec<Option<SyncPlan>>,
}

#[derive(Debug, Clone, PartialEq)]
struct SyncPlan {
    master: usize,
    /// Nodes from just below the master down to the slave.
    chain: Vec<usize>,
    depth: usize,
}

/// Parameters for the vehicle's GM -> BC -> TC -> OC chain.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChainParams {
    pub link_delay: f64,
    pub residence_min: f64,
    pub residence_max: f64,
    pub drift_rate: f64,
    pub noise_sigma: f64,
    /// Initial offset of every synchronizing clock [s]
    pub initial_offset: f64,
}

impl Default for ChainParams {
    fn default() -> Self {
        Self {
            link_delay: 1e-6,
            residence_min: 1e-6,
            residence_max: 10e-6,
            drift_rate: GM_DRIFT_RATE,
            noise_sigma: 100e-9,
            initial_offset: 0.0,
        }
    }
}

impl SyncTopology {
    pub fn new(nodes: Vec<SyncNode>) -> Result<Self, PtpError> {
        let bad = |m: String| Err(PtpError::Topology(m));
        let gms: Vec<usize> = nodes.iter().enumerate().filter(|(_, n)| n.clock.role == ClockRole::Gm).map(|(i, _)| i).collect();
        if gms.len() != 1 {
            return bad(format!("expected exactly one GM, found {}", gms.len()));
        }
        let mut ids = std::collections::HashSet::new();
        for (i, n) in nodes.iter().enumerate() {
            n.clock.validate()?;
            if !ids.insert(n.id.as_str()) {
                return bad(format!("duplicate node id '{}'", n.id));
            }
            match (n.clock.role, n.parent) {
                (ClockRole::Gm, Some(_)) => return bad("the GM cannot have a parent".into()),
                (ClockRole::Gm, None) => {}
                (_, None) => return bad(format!("node '{}' has no parent", n.id)),
                (_, Some(p)) if p >= nodes.len() || p == i => return bad(format!("node '{}' has an invalid parent", n.id)),
                _ => {}
            }
            if !(n.delay_down >= 0.0 && n.delay_up >= 0.0 && n.delay_down.is_finite() && n.delay_up.is_finite()) {
                return bad(format!("node '{}' has an invalid link delay", n.id));
            }
            let (lo, hi) = n.residence;
            if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
                return bad(format!("node '{}' has invalid residence bounds", n.id));
            }
        }
        let mut plans = Vec::with_capacity(nodes.len());
        for i in 0..nodes.len() {
            // walk up to the GM, detecting cycles
            let mut seen = 0;
            let mut cur = i;
            while let Some(p) = nodes[cur].parent {
                cur = p;
                seen += 1;
                if seen > nodes.len() {
                    return bad(format!("cycle above node '{}'", nodes[i].id));
                }
            }
            if matches!(nodes[i].clock.role, ClockRole::Gm | ClockRole::Tc) {
                plans.push(None);
                continue;
            }
            let mut chain = vec![i];
            let mut m = nodes[i].parent.expect("non-GM has parent");
            while nodes[m].clock.role == ClockRole::Tc {
                chain.push(m);
                m = nodes[m].parent.expect("TC has parent");
            }
            if nodes[m].clock.role == ClockRole::Oc {
                return bad(format!("node '{}' would take time from ordinary clock '{}'", nodes[i].id, nodes[m].id));
            }
            chain.reverse();
            plans.push(Some(SyncPlan { master: m, chain, depth: 0 }));
        }
        // sync depth: 1 for clocks fed by the GM
        for i in 0..nodes.len() {
            let mut depth = 0;
            let mut cur = i;
            while let Some(plan) = &plans[cur] {
                depth += 1;
                cur = plan.master;
            }
            if let Some(plan) = &mut plans[i] {
                plan.depth = depth;
            }
        }
        Ok(Self { nodes, plans })
    }

    /// GM -> BC (compute node) -> TC (switch) -> one OC per entry of `ocs`.
    pub fn vehicle_chain(ocs: &[String], p: &ChainParams) -> Result<Self, PtpError> {
        let clock = |role, drift: f64, sigma| ClockModel::new(role, 0.0, drift, sigma);
        let mut nodes = vec![
            SyncNode {
                id: "gm".into(),
                clock: clock(ClockRole::Gm, p.drift_rate, p.noise_sigma)?,
                parent: None,
                delay_down: 0.0,
                delay_up: 0.0,
                residence: (0.0, 0.0),
            },
            SyncNode {
                id: "hpc0".into(),
                clock: ClockModel::new(ClockRole::Bc, p.initial_offset, -p.drift_rate, p.noise_sigma)?,
                parent: Some(0),
                delay_down: p.link_delay,
                delay_up: p.link_delay,
                residence: (0.0, 0.0),
            },
            SyncNode {
                id: "switch".into(),
                clock: ClockModel::ideal(ClockRole::Tc),
                parent: Some(1),
                delay_down: p.link_delay,
                delay_up: p.link_delay,
                residence: (p.residence_min, p.residence_max),
            },
        ];
        for (k, id) in ocs.iter().enumerate() {
            // alternate the oscillator error sign so neighbours disagree
            let drift = if k % 2 == 0 { p.drift_rate } else { -p.drift_rate };
            nodes.push(SyncNode {
                id: id.clone(),
                clock: ClockModel::new(ClockRole::Oc, p.initial_offset, drift, p.noise_sigma)?,
                parent: Some(2),
                delay_down: p.link_delay,
                delay_up: p.link_delay,
                residence: (0.0, 0.0),
            });
        }
        Self::new(nodes)
    }

    pub fn nodes(&self) -> &[SyncNode] {
        &self.nodes
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    /// Scales every TC residence interval by `factor`.
    pub fn with_residence_scaled(&self, factor: f64) -> Result<Self, PtpError> {
        let mut nodes = self.nodes.clone();
        for n in &mut nodes {
            n.residence = (n.residence.0 * factor, n.residence.1 * factor);
        }
        Self::new(nodes)
    }
}

// ---- simulation --------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SyncConfig {
    pub duration: f64,
    pub sync_interval: f64,
    pub seed: u64,
    /// Slave delay between Sync reception and DelayReq [s]
    pub turnaround: f64,
    /// Offset between successive levels of the tree within one interval [s]
    pub stagger: f64,
    /// Trace sampling period; defaults to the sync interval
    pub trace_interval: Option<f64>,
    pub gains: ServoGains,
    pub apply_correction: bool,
}

impl Default for SyncConfig {
    fn default() -> Self {
        Self {
            duration: 600.0,
            sync_interval: 1.0,
            seed: 1,
            turnaround: 100e-6,
            stagger: 1e-3,
            trace_interval: None,
            gains: ServoGains::default(),
            apply_correction: true,
        }
    }
}

impl SyncConfig {
    fn validate(&self) -> Result<(), PtpError> {
        let bad = |m: &str| Err(PtpError::Config(m.into()));
        if !(self.duration > 0.0 && self.duration.is_finite()) {
            return bad("duration must be positive");
        }
        if !(self.sync_interval > 0.0 && self.sync_interval.is_finite()) {
            return bad("sync_interval must be positive");
        }
        if !(self.turnaround >= 0.0 && self.stagger >= 0.0) {
            return bad("turnaround and stagger must be non-negative");
        }
        if let Some(t) = self.trace_interval {
            if !(t > 0.0) {
                return bad("trace_interval must be positive");
            }
        }
        if self.duration / self.sync_interval > 1e7 {
            return bad("too many sync intervals");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceSample {
    pub time: f64,
    pub node: usize,
    /// Offset from the grandmaster clock [s]
    pub offset: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NodeSummary {
    pub id: String,
    pub role: ClockRole,
    pub max_abs_offset: f64,
    pub steady_rms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SyncSummary {
    pub nodes: Vec<NodeSummary>,
    pub max_abs_offset: f64,
    /// Largest per-node RMS over the second half of the run
    pub steady_rms: f64,
    pub exchanges: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyncResult {
    pub node_ids: Vec<String>,
    pub trace: Vec<TraceSample>,
    pub summary: SyncSummary,
    pub final_clocks: Vec<ClockModel>,
}

impl SyncResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time_s,node_id,offset_s\n");
        for s in &self.trace {
            let _ = writeln!(out, "{},{},{:e}", crate::fmt::num(s.time), self.node_ids[s.node], s.offset);
        }
        out
    }

    /// Offset of `node` from the GM at `t`, linearly interpolated between samples.
    pub fn offset_at(&self, node: &str, t: f64) -> Option<f64> {
        let idx = self.node_ids.iter().position(|n| n == node)?;
        let samples: Vec<&TraceSample> = self.trace.iter().filter(|s| s.node == idx).collect();
        let first = samples.first()?;
        if t <= first.time {
            return Some(first.offset);
        }
        for w in samples.windows(2) {
            if t <= w[1].time {
                let f = (t - w[0].time) / (w[1].time - w[0].time);
                return Some(w[0].offset + f * (w[1].offset - w[0].offset));
            }
        }
        samples.last().map(|s| s.offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Event {
    Sample,
    Exchange { slave: usize },
    Servo { slave: usize, theta: f64 },
}

#[derive(Debug, PartialEq)]
struct Queued {
    time: f64,
    seq: u64,
    event: Event,
}

impl Eq for Queued {}

impl Ord for Queued {
    fn cmp(&self, other: &Self) -> Ordering {
        // min-heap on (time, seq)
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Runs periodic exchanges down the tree with a single event queue.
pub fn run_sync_simulation(topology: &SyncTopology, cfg: &SyncConfig) -> Result<SyncResult, PtpError> {
    cfg.validate()?;
    let nodes = &topology.nodes;
    let mut clocks: Vec<ClockModel> = nodes.iter().map(|n| n.clock).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let gm = nodes.iter().position(|n| n.clock.role == ClockRole::Gm).expect("validated");
    let reported: Vec<usize> = (0..nodes.len()).filter(|&i| topology.plans[i].is_some()).collect();

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut push = |heap: &mut BinaryHeap<Queued>, time: f64, event: Event| {
        heap.push(Queued { time, seq, event });
        seq += 1;
    };
    let trace_dt = cfg.trace_interval.unwrap_or(cfg.sync_interval);
    let n_samples = (cfg.duration / trace_dt + 1e-9).floor() as u64;
    for j in 0..=n_samples {
        push(&mut heap, j as f64 * trace_dt, Event::Sample);
    }
    let n_sync = (cfg.duration / cfg.sync_interval + 1e-9).floor() as u64;
    for k in 0..n_sync {
        for &i in &reported {
            let depth = topology.plans[i].as_ref().map_or(1, |p| p.depth);
            let t = k as f64 * cfg.sync_interval + (depth - 1) as f64 * cfg.stagger;
            if t < cfg.duration {
                push(&mut heap, t, Event::Exchange { slave: i });
            }
        }
    }

    let mut trace = Vec::new();
    let mut exchanges = 0usize;
    while let Some(Queued { time, event, .. }) = heap.pop() {
        match event {
            Event::Sample => {
                let reference = clocks[gm].read(time);
                for &i in &reported {
                    trace.push(TraceSample { time, node: i, offset: clocks[i].read(time) - reference });
                }
            }
            Event::Exchange { slave } => {
                let plan = topology.plans[slave].as_ref().expect("scheduled only for syncing nodes");
                let mut path = SyncPath::default();
                for &c in &plan.chain {
                    path.link_delay_ms += nodes[c].delay_down;
                    path.link_delay_sm += nodes[c].delay_up;
                }
                // residences drawn in path order, down then up
                let tcs: Vec<usize> = plan.chain.iter().copied().filter(|&c| nodes[c].clock.role == ClockRole::Tc).collect();
                let draw = |rng: &mut ChaCha8Rng, c: usize| {
                    let (lo, hi) = nodes[c].residence;
                    if hi > lo {
                        rng.gen_range(lo..hi)
                    } else {
                        lo
                    }
                };
                path.residence_ms = tcs.iter().map(|&c| draw(&mut rng, c)).collect();
                path.residence_sm = tcs.iter().rev().map(|&c| draw(&mut rng, c)).collect();
                let r = sync_exchange(
                    &clocks[plan.master],
                    &clocks[slave],
                    &path,
                    time,
                    cfg.turnaround,
                    cfg.apply_correction,
                    &mut rng,
                )?;
                exchanges += 1;
                push(&mut heap, r.completed_at, Event::Servo { slave, theta: r.offset_estimate });
            }
            Event::Servo { slave, theta } => {
                servo_update(&mut clocks[slave], theta, time, cfg.sync_interval, cfg.gains)?;
            }
        }
    }

    let half = 0.5 * cfg.duration;
    let mut summaries = Vec::new();
    for &i in &reported {
        let samples: Vec<f64> = trace.iter().filter(|s| s.node == i).map(|s| s.offset).collect();
        let steady: Vec<f64> = trace.iter().filter(|s| s.node == i && s.time >= half).map(|s| s.offset).collect();
        let rms = if steady.is_empty() {
            0.0
        } else {
            (steady.iter().map(|o| o * o).sum::<f64>() / steady.len() as f64).sqrt()
        };
        summaries.push(NodeSummary {
            id: nodes[i].id.clone(),
            role: nodes[i].clock.role,
            max_abs_offset: samples.iter().fold(0.0, |m, o| m.max(o.abs())),
            steady_rms: rms,
        });
    }
    let summary = SyncSummary {
        max_abs_offset: summaries.iter().fold(0.0, |m, s| m.max(s.max_abs_offset)),
        steady_rms: summaries.iter().fold(0.0, |m, s| m.max(s.steady_rms)),
        nodes: summaries,
        exchanges,
    };
    Ok(SyncResult {
        node_ids: nodes.iter().map(|n| n.id.clone()).collect(),
        trace,
        summary,
        final_clocks: clocks,
    })
}
