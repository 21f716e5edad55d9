use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use serde::{Deserialize, Serialize};

use super::cbs::{cbs_advance_raw, hi_credit_second, hi_credit_top, lo_credit, CbsState};
use super::{ps_to_secs, secs_to_ps, transmission_ps, Flow, NetError, NetTopology, Ps, TrafficClass};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QosMode {
    /// One FIFO per port, no priorities and no shaping.
    Fifo,
    StrictPriority,
    /// Strict priority with credit-based shaping on SR queues.
    Cbs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReservationPolicy {
    /// Average wire bitrate of each flow.
    AverageRate,
    /// Worst-case bits per class measurement interval, capped at the
    /// source link rate.
    ClassInterval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// [s]
    pub duration: f64,
    pub qos: QosMode,
    /// Frames per egress queue before tail drop
    pub queue_cap: usize,
    /// idleSlope = factor * reserved bandwidth, capped at the port rate
    pub reservation_factor: f64,
    pub reservation: ReservationPolicy,
    /// Refuse runs shorter than 100 periods of the slowest flow.
    pub enforce_min_duration: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            duration: 1.0,
            qos: QosMode::Cbs,
            queue_cap: 4096,
            reservation_factor: 1.2,
            reservation: ReservationPolicy::ClassInterval,
            enforce_min_duration: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowStats {
    pub flow_id: String,
    pub class: TrafficClass,
    /// Messages delivered completely
    pub count: u64,
    /// End-to-end message latency: generation to arrival of the last frame [s]
    pub lat_min: f64,
    pub lat_mean: f64,
    pub lat_max: f64,
    pub jitter: f64,
    /// Frames dropped at full queues
    pub drops: u64,
    pub frames_generated: u64,
    pub frames_delivered: u64,
    pub frames_in_flight: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub flows: Vec<FlowStats>,
    pub events: u64,
    /// Credit updates audited against [loCredit, hiCredit]
    pub credit_checks: u64,
    pub credit_violations: u64,
    /// Largest queue occupancy seen on any port [frames]
    pub max_queue: usize,
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    flow: u32,
    message: u32,
    last: bool,
    size: u64,
    hop: u16,
    generated: Ps,
}

#[derive(Debug, Clone, Copy)]
enum Event {
    Generate { flow: u32, message: u32 },
    Enqueue { port: u32, frame: Frame },
    TxDone { port: u32 },
    Arrive { frame: Frame },
    Wake { port: u32 },
    TryTransmit { port: u32 },
}

impl Event {
    /// Order among events at the same instant: every arrival is queued
    /// before any port picks its next frame.
    fn rank(&self) -> u8 {
        match self {
            Event::Generate { .. } | Event::Enqueue { .. } | Event::Arrive { .. } => 0,
            Event::TxDone { .. } | Event::TryTransmit { .. } => 1,
            Event::Wake { .. } => 2,
        }
    }
}

struct Port {
    rate: u64,
    propagation: Ps,
    queues: [VecDeque<Frame>; 8],
    cbs: [Option<CbsState>; 8],
    busy: Option<(usize, Frame)>,
    last_update: Ps,
    wake_at: Option<Ps>,
    try_pending: bool,
}

struct FlowRun {
    route: Vec<usize>,
    sizes: Vec<u64>,
    class: TrafficClass,
    damaged: Vec<bool>,
    lat_min: Ps,
    lat_max: Ps,
    lat_sum: f64,
    count: u64,
    drops: u64,
    generated: u64,
    delivered: u64,
}

struct Sim<'a> {
    topo: &'a NetTopology,
    cfg: SimConfig,
    ports: Vec<Port>,
    flows: Vec<FlowRun>,
    heap: BinaryHeap<Reverse<(Ps, u8, u64, usize)>>,
    events: Vec<Event>,
    free: Vec<usize>,
    seq: u64,
    processed: u64,
    credit_checks: u64,
    credit_violations: u64,
    max_queue: usize,
}

impl Sim<'_> {
    fn schedule(&mut self, time: Ps, event: Event) {
        let slot = match self.free.pop() {
            Some(i) => {
                self.events[i] = event;
                i
            }
            None => {
                self.events.push(event);
                self.events.len() - 1
            }
        };
        self.heap.push(Reverse((time, event.rank(), self.seq, slot)));
        self.seq += 1;
    }

    fn queue_index(&self, class: TrafficClass) -> usize {
        match self.cfg.qos {
            QosMode::Fifo => 0,
            _ => class.priority(),
        }
    }

    /// Brings every shaped queue of the port to `now`.
    fn advance_credits(&mut self, p: usize, now: Ps) {
        let port = &mut self.ports[p];
        let dt = ps_to_secs(now - port.last_update);
        port.last_update = now;
        if dt == 0.0 {
            return;
        }
        for q in 0..8 {
            if let Some(state) = port.cbs[q].as_mut() {
                let transmitting = matches!(port.busy, Some((bq, _)) if bq == q);
                let raw = cbs_advance_raw(state, dt, transmitting, !port.queues[q].is_empty());
                state.credit = raw;
                self.credit_checks += 1;
                if !state.within_bounds() {
                    self.credit_violations += 1;
                }
                state.credit = raw.clamp(state.lo_credit, state.hi_credit);
            }
        }
    }

    fn try_transmit(&mut self, p: usize, now: Ps) {
        self.advance_credits(p, now);
        let port = &mut self.ports[p];
        if port.busy.is_some() {
            return;
        }
        let mut wake: Option<Ps> = None;
        let mut pick = None;
        for q in (0..8).rev() {
            if port.queues[q].is_empty() {
                continue;
            }
            match &port.cbs[q] {
                Some(s) if !s.eligible() => {
                    let wait = secs_to_ps_ceil(-s.credit / s.idle_slope).max(1);
                    wake = Some(wake.map_or(now + wait, |w: Ps| w.min(now + wait)));
                }
                _ => {
                    pick = Some(q);
                    break;
                }
            }
        }
        if let Some(q) = pick {
            let frame = port.queues[q].pop_front().expect("non-empty");
            port.busy = Some((q, frame));
            let done = now + transmission_ps(frame.size, port.rate);
            self.schedule(done, Event::TxDone { port: p as u32 });
        } else if let Some(w) = wake {
            if port.wake_at.is_none_or(|cur| cur <= now || w < cur) {
                port.wake_at = Some(w);
                self.schedule(w, Event::Wake { port: p as u32 });
            }
        }
    }

    fn handle(&mut self, now: Ps, event: Event) {
        match event {
            Event::Generate { flow, message } => {
                let f = &mut self.flows[flow as usize];
                let n = f.sizes.len();
                let first_port = f.route[0];
                let frames: Vec<Frame> = f
                    .sizes
                    .iter()
                    .enumerate()
                    .map(|(i, &size)| Frame { flow, message, last: i + 1 == n, size, hop: 0, generated: now })
                    .collect();
                f.generated += n as u64;
                for frame in frames {
                    self.enqueue(first_port, frame, now);
                }
            }
            Event::Enqueue { port, frame } => {
                self.enqueue(port as usize, frame, now);
            }
            Event::TryTransmit { port } => {
                self.ports[port as usize].try_pending = false;
                self.try_transmit(port as usize, now);
            }
            Event::TxDone { port } => {
                let p = port as usize;
                self.advance_credits(p, now);
                let (_, mut frame) = self.ports[p].busy.take().expect("TxDone while idle");
                frame.hop += 1;
                let arrive = now + self.ports[p].propagation;
                self.schedule(arrive, Event::Arrive { frame });
                self.try_transmit(p, now);
            }
            Event::Arrive { frame } => {
                let f = &mut self.flows[frame.flow as usize];
                if usize::from(frame.hop) == f.route.len() {
                    f.delivered += 1;
                    if frame.last && !f.damaged[frame.message as usize] {
                        let lat = now - frame.generated;
                        f.count += 1;
                        f.lat_min = f.lat_min.min(lat);
                        f.lat_max = f.lat_max.max(lat);
                        f.lat_sum += lat as f64;
                    }
                } else {
                    let next = f.route[usize::from(frame.hop)];
                    let node = self.topo.port(next).from;
                    let processing = self.topo.nodes()[node].processing;
                    self.schedule(now + processing, Event::Enqueue { port: next as u32, frame });
                }
            }
            Event::Wake { port } => {
                let p = port as usize;
                if self.ports[p].wake_at == Some(now) {
                    self.ports[p].wake_at = None;
                }
                self.try_transmit(p, now);
            }
        }
    }

    fn enqueue(&mut self, p: usize, frame: Frame, now: Ps) {
        self.advance_credits(p, now);
        let q = self.queue_index(self.flows[frame.flow as usize].class);
        let cap = self.cfg.queue_cap;
        let port = &mut self.ports[p];
        if port.queues[q].len() >= cap {
            let f = &mut self.flows[frame.flow as usize];
            f.drops += 1;
            f.damaged[frame.message as usize] = true;
            return;
        }
        port.queues[q].push_back(frame);
        self.max_queue = self.max_queue.max(port.queues[q].len());
        if port.busy.is_none() && !port.try_pending {
            port.try_pending = true;
            self.schedule(now, Event::TryTransmit { port: p as u32 });
        }
    }
}

fn secs_to_ps_ceil(s: f64) -> Ps {
    (s * 1e12).ceil().max(0.0) as Ps
}

/// Bandwidth reserved for one flow on every port it crosses [bit/s].
fn reserved_rate(flow: &Flow, policy: ReservationPolicy, source_rate: u64) -> f64 {
    match (policy, flow.class.class_interval()) {
        (_, None) => 0.0,
        (ReservationPolicy::AverageRate, _) => flow.bitrate(),
        (ReservationPolicy::ClassInterval, Some(interval)) => {
            let interval_ps = secs_to_ps(interval);
            let messages = interval_ps.div_ceil(flow.period).max(1);
            let bits = (messages * flow.wire_bytes_per_message() * 8) as f64;
            (bits / interval).min(source_rate as f64)
        }
    }
}

/// Event-driven run of `flows` over `topology`.
pub fn simulate(topology: &NetTopology, flows: &[Flow], cfg: &SimConfig) -> Result<SimReport, NetError> {
    if !(cfg.duration > 0.0 && cfg.duration.is_finite()) {
        return Err(NetError::Config("duration must be positive".into()));
    }
    if cfg.queue_cap == 0 || !(cfg.reservation_factor > 0.0) {
        return Err(NetError::Config("queue_cap and reservation_factor must be positive".into()));
    }
    let mut runs = Vec::with_capacity(flows.len());
    let mut ids = std::collections::HashSet::new();
    for f in flows {
        f.validate()?;
        if !ids.insert(f.id.as_str()) {
            return Err(NetError::Flow(format!("duplicate flow id '{}'", f.id)));
        }
        let src = topology.node_index(&f.source).ok_or_else(|| NetError::UnknownNode(f.source.clone()))?;
        let dst = topology.node_index(&f.destination).ok_or_else(|| NetError::UnknownNode(f.destination.clone()))?;
        let route = topology.route(src, dst).ok_or_else(|| NetError::NoRoute {
            flow: f.id.clone(),
            from: f.source.clone(),
            to: f.destination.clone(),
        })?;
        let link_rate = topology.port(route[0]).rate;
        if f.bitrate() > link_rate as f64 {
            return Err(NetError::FlowRate { flow: f.id.clone(), bitrate: f.bitrate(), link_rate });
        }
        runs.push(FlowRun {
            route,
            sizes: f.frame_sizes(),
            class: f.class,
            damaged: Vec::new(),
            lat_min: Ps::MAX,
            lat_max: 0,
            lat_sum: 0.0,
            count: 0,
            drops: 0,
            generated: 0,
            delivered: 0,
        });
    }
    if cfg.enforce_min_duration {
        if let Some(slowest) = flows.iter().map(|f| f.period).max() {
            let needed = 100.0 * ps_to_secs(slowest);
            if cfg.duration + 1e-12 < needed {
                return Err(NetError::Duration { needed, got: cfg.duration });
            }
        }
    }

    let mut ports: Vec<Port> = (0..topology.port_count())
        .map(|p| {
            let info = topology.port(p);
            Port {
                rate: info.rate,
                propagation: info.propagation,
                queues: Default::default(),
                cbs: [None; 8],
                busy: None,
                last_update: 0,
                wake_at: None,
                try_pending: false,
            }
        })
        .collect();

    if cfg.qos == QosMode::Cbs {
        let classes = [TrafficClass::SrA, TrafficClass::SrB];
        for (p, port) in ports.iter_mut().enumerate() {
            let rate = port.rate as f64;
            let mut reserved = [0.0f64; 2];
            let mut max_frame = [0u64; 3];
            for (f, run) in flows.iter().zip(&runs) {
                if !run.route.contains(&p) {
                    continue;
                }
                let biggest = run.sizes.iter().copied().max().unwrap_or(0);
                let source_rate = topology.port(run.route[0]).rate;
                match f.class {
                    TrafficClass::SrA => {
                        reserved[0] += reserved_rate(f, cfg.reservation, source_rate);
                        max_frame[0] = max_frame[0].max(biggest);
                    }
                    TrafficClass::SrB => {
                        reserved[1] += reserved_rate(f, cfg.reservation, source_rate);
                        max_frame[1] = max_frame[1].max(biggest);
                    }
                    TrafficClass::BestEffort => max_frame[2] = max_frame[2].max(biggest),
                }
            }
            let mut top: Option<CbsState> = None;
            for (k, class) in classes.iter().enumerate() {
                if reserved[k] <= 0.0 {
                    continue;
                }
                let idle = (cfg.reservation_factor * reserved[k]).min(rate);
                let interference = (max_frame[k + 1..].iter().copied().max().unwrap_or(0) * 8) as f64;
                let hi = if k == 0 {
                    hi_credit_top(interference, idle, rate)
                } else {
                    hi_credit_second(interference, idle, rate, top.as_ref())
                };
                let lo = lo_credit((max_frame[k] * 8) as f64, idle, rate);
                let state = CbsState::new(idle, rate, hi, lo);
                port.cbs[class.priority()] = Some(state);
                if k == 0 {
                    top = Some(state);
                }
            }
        }
    }

    let end = secs_to_ps(cfg.duration);
    let mut sim = Sim {
        topo: topology,
        cfg: *cfg,
        ports,
        flows: runs,
        heap: BinaryHeap::new(),
        events: Vec::new(),
        free: Vec::new(),
        seq: 0,
        processed: 0,
        credit_checks: 0,
        credit_violations: 0,
        max_queue: 0,
    };
    // generation events are seeded lazily: each one schedules the next
    for (i, f) in flows.iter().enumerate() {
        let count = if f.offset < end { (end - f.offset).div_ceil(f.period) } else { 0 };
        sim.flows[i].damaged = vec![false; count as usize];
        if count > 0 {
            sim.schedule(f.offset, Event::Generate { flow: i as u32, message: 0 });
        }
    }
    while let Some(Reverse((time, _, _, slot))) = sim.heap.pop() {
        if time > end {
            break;
        }
        let event = sim.events[slot];
        sim.free.push(slot);
        sim.processed += 1;
        if let Event::Generate { flow, message } = event {
            let f = &flows[flow as usize];
            let next = message + 1;
            if (next as usize) < sim.flows[flow as usize].damaged.len() {
                sim.schedule(f.offset + u64::from(next) * f.period, Event::Generate { flow, message: next });
            }
        }
        sim.handle(time, event);
    }

    let stats = flows
        .iter()
        .zip(&sim.flows)
        .map(|(f, r)| {
            let (lat_min, lat_max, lat_mean) = if r.count > 0 {
                (ps_to_secs(r.lat_min), ps_to_secs(r.lat_max), r.lat_sum / r.count as f64 / 1e12)
            } else {
                (0.0, 0.0, 0.0)
            };
            FlowStats {
                flow_id: f.id.clone(),
                class: f.class,
                count: r.count,
                lat_min,
                lat_mean,
                lat_max,
                jitter: ps_to_secs(if r.count > 0 { r.lat_max - r.lat_min } else { 0 }),
                drops: r.drops,
                frames_generated: r.generated,
                frames_delivered: r.delivered,
                frames_in_flight: r.generated - r.delivered - r.drops,
            }
        })
        .collect();
    Ok(SimReport {
        flows: stats,
        events: sim.processed,
        credit_checks: sim.credit_checks,
        credit_violations: sim.credit_violations,
        max_queue: sim.max_queue,
    })
}
