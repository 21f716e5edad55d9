//! Discrete-event model of the in-vehicle Ethernet: store-and-forward
//! switches, eight egress queues per port, strict priority and
//! credit-based shaping for the stream-reservation classes.

mod cbs;
mod presets;
mod sim;

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use cbs::{cbs_advance, cbs_advance_raw, hi_credit_second, hi_credit_top, lo_credit, CbsState, CREDIT_EPS};
pub use presets::{
    edgar_network, flows_from_rig, seven_hop_closed_form, seven_hop_scenario, EdgarNetOptions, RigFlowOptions,
    SevenHopOptions, ETHERNET_OVERHEAD, MTU_PAYLOAD,
};
pub use sim::{simulate, FlowStats, QosMode, ReservationPolicy, SimConfig, SimReport};

/// Simulation time in picoseconds.
pub type Ps = u64;

pub const PS_PER_S: f64 = 1e12;

pub fn secs_to_ps(s: f64) -> Ps {
    (s * PS_PER_S).round() as Ps
}

pub fn ps_to_secs(ps: Ps) -> f64 {
    ps as f64 / PS_PER_S
}

/// Serialization time of `bytes` on a link of `rate` bit/s, rounded up to
/// the next picosecond.
pub fn transmission_ps(bytes: u64, rate: u64) -> Ps {
    let num = u128::from(bytes) * 8 * 1_000_000_000_000u128;
    num.div_ceil(u128::from(rate)) as Ps
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetError {
    #[error("invalid topology: {0}")]
    Topology(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("flow '{flow}': no path from '{from}' to '{to}'")]
    NoRoute { flow: String, from: String, to: String },
    #[error("flow '{flow}': {bitrate} bit/s exceeds the {link_rate} bit/s source link")]
    FlowRate { flow: String, bitrate: f64, link_rate: u64 },
    #[error("invalid flow: {0}")]
    Flow(String),
    #[error("duration {got} s is shorter than 100 periods of the slowest flow ({needed} s)")]
    Duration { needed: f64, got: f64 },
    #[error("network config: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Endpoint,
    Switch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetNode {
    pub id: String,
    pub kind: NodeKind,
    /// Forwarding delay of a switch [ps]; zero for endpoints
    pub processing: Ps,
}

/// Full-duplex link; each direction is an independent egress port.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Link {
    pub a: usize,
    pub b: usize,
    /// [bit/s]
    pub rate: u64,
    pub propagation: Ps,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetTopology {
    nodes: Vec<NetNode>,
    links: Vec<Link>,
    /// (neighbor, egress port) per node, in link order
    adjacency: Vec<Vec<(usize, usize)>>,
}

/// Egress port `2 * link + dir`; `dir = 0` sends a -> b.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PortInfo {
    pub from: usize,
    pub to: usize,
    pub rate: u64,
    pub propagation: Ps,
}

impl NetTopology {
    pub fn new(nodes: Vec<NetNode>, links: Vec<Link>) -> Result<Self, NetError> {
        let bad = |m: String| Err(NetError::Topology(m));
        if nodes.is_empty() {
            return bad("no nodes".into());
        }
        let mut ids = HashMap::new();
        for (i, n) in nodes.iter().enumerate() {
            if ids.insert(n.id.as_str(), i).is_some() {
                return bad(format!("duplicate node id '{}'", n.id));
            }
            if n.kind == NodeKind::Endpoint && n.processing != 0 {
                return bad(format!("endpoint '{}' cannot have a processing delay", n.id));
            }
        }
        let mut adjacency = vec![Vec::new(); nodes.len()];
        for (i, l) in links.iter().enumerate() {
            if l.a >= nodes.len() || l.b >= nodes.len() || l.a == l.b {
                return bad(format!("link {i} has invalid endpoints"));
            }
            if l.rate == 0 {
                return bad(format!("link {}-{} has zero rate", nodes[l.a].id, nodes[l.b].id));
            }
            adjacency[l.a].push((l.b, 2 * i));
            adjacency[l.b].push((l.a, 2 * i + 1));
        }
        // connected, ignoring forwarding rules
        let mut seen = vec![false; nodes.len()];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return bad(format!("node '{}' is disconnected", nodes[i].id));
        }
        Ok(Self { nodes, links, adjacency })
    }

    pub fn nodes(&self) -> &[NetNode] {
        &self.nodes
    }

    pub fn links(&self) -> &[Link] {
        &self.links
    }

    pub fn node_index(&self, id: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.id == id)
    }

    pub fn port_count(&self) -> usize {
        2 * self.links.len()
    }

    pub fn port(&self, port: usize) -> PortInfo {
        let l = &self.links[port / 2];
        let (from, to) = if port.is_multiple_of(2) { (l.a, l.b) } else { (l.b, l.a) };
        PortInfo { from, to, rate: l.rate, propagation: l.propagation }
    }

    /// Egress ports from `src` to `dst`, fewest hops first. Only switches forward.
    pub fn route(&self, src: usize, dst: usize) -> Option<Vec<usize>> {
        if src == dst {
            return None;
        }
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; self.nodes.len()];
        let mut seen = vec![false; self.nodes.len()];
        seen[src] = true;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            if u != src && self.nodes[u].kind != NodeKind::Switch {
                continue;
            }
            for &(v, port) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    prev[v] = Some((u, port));
                    queue.push_back(v);
                }
            }
        }
        if !seen[dst] {
            return None;
        }
        let mut ports = Vec::new();
        let mut cur = dst;
        while let Some((u, port)) = prev[cur] {
            ports.push(port);
            cur = u;
        }
        ports.reverse();
        Some(ports)
    }

    /// Rate of the first link out of `node`.
    pub fn access_rate(&self, node: usize) -> Option<u64> {
        self.adjacency[node].first().map(|&(_, p)| self.port(p).rate)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrafficClass {
    #[serde(rename = "sr-a")]
    SrA,
    #[serde(rename = "sr-b")]
    SrB,
    #[serde(rename = "best-effort")]
    BestEffort,
}

impl TrafficClass {
    /// 802.1Q priority code point.
    pub fn priority(self) -> usize {
        match self {
            TrafficClass::SrA => 3,
            TrafficClass::SrB => 2,
            TrafficClass::BestEffort => 0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            TrafficClass::SrA => "SR-A",
            TrafficClass::SrB => "SR-B",
            TrafficClass::BestEffort => "BE",
        }
    }

    /// Class measurement interval of the reservation [s].
    pub fn class_interval(self) -> Option<f64> {
        match self {
            TrafficClass::SrA => Some(125e-6),
            TrafficClass::SrB => Some(250e-6),
            TrafficClass::BestEffort => None,
        }
    }
}

/// Periodic message stream. Each message of `message_bytes` is cut into
/// chunks of at most `mtu` bytes; every chunk carries `overhead` extra bytes
/// on the wire.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Flow {
    pub id: String,
    pub source: String,
    pub destination: String,
    pub class: TrafficClass,
    pub message_bytes: u64,
    pub mtu: u64,
    pub overhead: u64,
    pub period: Ps,
    pub offset: Ps,
}

impl Flow {
    /// Single-frame flow of `frame_size` wire bytes.
    pub fn frames(id: &str, source: &str, destination: &str, class: TrafficClass, frame_size: u64, period_s: f64) -> Self {
        Self {
            id: id.into(),
            source: source.into(),
            destination: destination.into(),
            class,
            message_bytes: frame_size,
            mtu: frame_size.max(1),
            overhead: 0,
            period: secs_to_ps(period_s),
            offset: 0,
        }
    }

    /// Wire sizes of the frames of one message.
    pub fn frame_sizes(&self) -> Vec<u64> {
        if self.message_bytes == 0 {
            return Vec::new();
        }
        let full = self.message_bytes / self.mtu;
        let rest = self.message_bytes % self.mtu;
        let mut sizes = vec![self.mtu + self.overhead; full as usize];
        if rest > 0 {
            sizes.push(rest + self.overhead);
        }
        sizes
    }

    pub fn wire_bytes_per_message(&self) -> u64 {
        self.frame_sizes().iter().sum()
    }

    /// Average wire bitrate [bit/s].
    pub fn bitrate(&self) -> f64 {
        self.wire_bytes_per_message() as f64 * 8.0 / ps_to_secs(self.period)
    }

    pub fn validate(&self) -> Result<(), NetError> {
        let bad = |m: &str| Err(NetError::Flow(format!("'{}': {m}", self.id)));
        if self.period == 0 {
            return bad("period must be positive");
        }
        if self.mtu == 0 || self.mtu + self.overhead > MTU_PAYLOAD + ETHERNET_OVERHEAD {
            return bad("frames must fit 1500 B of payload plus 42 B of overhead");
        }
        if self.message_bytes == 0 {
            return bad("message is empty");
        }
        Ok(())
    }
}

/// Per-class latency and jitter budgets [s]. `None` means unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassBudgets {
    pub sr_a_latency: f64,
    pub sr_a_jitter: f64,
    pub sr_b_latency: f64,
    pub sr_b_jitter: Option<f64>,
}

impl Default for ClassBudgets {
    fn default() -> Self {
        Self { sr_a_latency: 2e-3, sr_a_jitter: 125e-6, sr_b_latency: 50e-3, sr_b_jitter: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SrCheck {
    pub pass: bool,
    /// budget - max latency [s]
    pub latency_margin: Option<f64>,
    /// budget - jitter [s]
    pub jitter_margin: Option<f64>,
    pub reason: Option<String>,
}

/// Strict-inequality budget check of one flow's statistics.
pub fn check_sr_class(stats: &FlowStats, class: TrafficClass, budgets: &ClassBudgets) -> SrCheck {
    let (lat, jit) = match class {
        TrafficClass::SrA => (Some(budgets.sr_a_latency), Some(budgets.sr_a_jitter)),
        TrafficClass::SrB => (Some(budgets.sr_b_latency), budgets.sr_b_jitter),
        TrafficClass::BestEffort => {
            return SrCheck { pass: true, latency_margin: None, jitter_margin: None, reason: None }
        }
    };
    if stats.count == 0 {
        return SrCheck {
            pass: false,
            latency_margin: None,
            jitter_margin: None,
            reason: Some("no message delivered".into()),
        };
    }
    let latency_margin = lat.map(|b| b - stats.lat_max);
    let jitter_margin = jit.map(|b| b - stats.jitter);
    let mut reasons = Vec::new();
    if latency_margin.is_some_and(|m| m <= 0.0) {
        reasons.push("latency");
    }
    if jitter_margin.is_some_and(|m| m <= 0.0) {
        reasons.push("jitter");
    }
    if stats.drops > 0 {
        reasons.push("drops");
    }
    SrCheck {
        pass: reasons.is_empty(),
        latency_margin,
        jitter_margin,
        reason: (!reasons.is_empty()).then(|| format!("{} budget exceeded", reasons.join(" and "))),
    }
}

pub const STATS_CSV_HEADER: &str = "flow_id,class,count,lat_min_s,lat_mean_s,lat_max_s,jitter_s,drops";

pub fn stats_csv(stats: &[FlowStats]) -> String {
    use crate::fmt::num;
    let mut out = format!("{STATS_CSV_HEADER}\n");
    for s in stats {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.flow_id,
            s.class.name(),
            s.count,
            num(s.lat_min),
            num(s.lat_mean),
            num(s.lat_max),
            num(s.jitter),
            s.drops
        );
    }
    out
}

// ---- configuration file --------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeEntry {
    id: String,
    kind: NodeKind,
    #[serde(default)]
    processing_us: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LinkEntry {
    a: String,
    b: String,
    rate_bps: f64,
    #[serde(default)]
    propagation_ns: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FlowEntry {
    id: String,
    source: String,
    destination: String,
    class: TrafficClass,
    /// Wire size of each frame
    frame_size: Option<u64>,
    /// Payload per message, cut into MTU chunks
    message_bytes: Option<u64>,
    period_s: f64,
    #[serde(default)]
    offset_s: f64,
}

/// Explicit network description: `[[node]]`, `[[link]]`, `[[flow]]` tables.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDescription {
    #[serde(default, rename = "node")]
    nodes: Vec<NodeEntry>,
    #[serde(default, rename = "link")]
    links: Vec<LinkEntry>,
    #[serde(default, rename = "flow")]
    flows: Vec<FlowEntry>,
}

impl NetworkDescription {
    pub fn parse(text: &str) -> Result<Self, NetError> {
        toml::from_str(text).map_err(|e| NetError::Config(e.to_string()))
    }

    pub fn build(&self) -> Result<(NetTopology, Vec<Flow>), NetError> {
        let nodes: Vec<NetNode> = self
            .nodes
            .iter()
            .map(|n| {
                if !(n.processing_us >= 0.0 && n.processing_us.is_finite()) {
                    return Err(NetError::Config(format!("node '{}': bad processing delay", n.id)));
                }
                Ok(NetNode { id: n.id.clone(), kind: n.kind, processing: secs_to_ps(n.processing_us * 1e-6) })
            })
            .collect::<Result<_, _>>()?;
        let index = |id: &str| nodes.iter().position(|n| n.id == id).ok_or_else(|| NetError::UnknownNode(id.to_string()));
        let mut links = Vec::new();
        for l in &self.links {
            if !(l.rate_bps >= 1.0 && l.rate_bps.is_finite() && l.propagation_ns >= 0.0) {
                return Err(NetError::Config(format!("link {}-{}: bad rate or delay", l.a, l.b)));
            }
            links.push(Link {
                a: index(&l.a)?,
                b: index(&l.b)?,
                rate: l.rate_bps.round() as u64,
                propagation: secs_to_ps(l.propagation_ns * 1e-9),
            });
        }
        let topo = NetTopology::new(nodes.clone(), links)?;
        let mut flows = Vec::new();
        for f in &self.flows {
            if !(f.period_s > 0.0 && f.offset_s >= 0.0) {
                return Err(NetError::Config(format!("flow '{}': bad period or offset", f.id)));
            }
            let mut flow = match (f.frame_size, f.message_bytes) {
                (Some(size), None) => Flow::frames(&f.id, &f.source, &f.destination, f.class, size, f.period_s),
                (None, Some(bytes)) => Flow {
                    id: f.id.clone(),
                    source: f.source.clone(),
                    destination: f.destination.clone(),
                    class: f.class,
                    message_bytes: bytes,
                    mtu: MTU_PAYLOAD,
                    overhead: ETHERNET_OVERHEAD,
                    period: secs_to_ps(f.period_s),
                    offset: 0,
                },
                _ => {
                    return Err(NetError::Config(format!(
                        "flow '{}': give exactly one of frame_size or message_bytes",
                        f.id
                    )))
                }
            };
            flow.offset = secs_to_ps(f.offset_s);
            flows.push(flow);
        }
        Ok((topo, flows))
    }
}
