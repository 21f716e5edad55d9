use serde::{Deserialize, Serialize};

use super::{secs_to_ps, transmission_ps, Flow, Link, NetError, NetNode, NetTopology, NodeKind, Ps, TrafficClass};
use crate::sensors::{sensor_flow_spec, Modality, Rig};

/// Largest payload per frame [bytes].
pub const MTU_PAYLOAD: u64 = 1500;
/// Header, FCS, preamble and inter-frame gap per frame [bytes].
pub const ETHERNET_OVERHEAD: u64 = 42;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RigFlowOptions {
    pub camera: TrafficClass,
    pub lidar: TrafficClass,
    pub radar: TrafficClass,
    pub microphone: TrafficClass,
    pub gnss: TrafficClass,
    /// Flows are assigned round-robin to these compute nodes.
    pub destinations: Vec<String>,
    /// Start offset between consecutive sensors [s]
    pub stagger: f64,
}

impl Default for RigFlowOptions {
    fn default() -> Self {
        Self {
            camera: TrafficClass::SrB,
            lidar: TrafficClass::SrB,
            radar: TrafficClass::SrA,
            microphone: TrafficClass::SrB,
            gnss: TrafficClass::SrA,
            destinations: vec!["hpc0".into(), "hpc1".into()],
            stagger: 0.0,
        }
    }
}

impl RigFlowOptions {
    fn class_of(&self, m: Modality) -> TrafficClass {
        match m {
            Modality::Camera => self.camera,
            Modality::Lidar => self.lidar,
            Modality::Radar => self.radar,
            Modality::Microphone => self.microphone,
            Modality::Gnss => self.gnss,
        }
    }
}

/// One periodic flow per physical device, named after the device.
/// Patterns without payload (secondary radar lobes) add nothing.
pub fn flows_from_rig(rig: &Rig, opts: &RigFlowOptions) -> Vec<Flow> {
    let mut flows = Vec::new();
    for m in rig.primary_specs() {
        let spec = sensor_flow_spec(&m.spec);
        if spec.frame_size == 0 || !(spec.period > 0.0 && spec.period.is_finite()) {
            continue;
        }
        let period = secs_to_ps(spec.period);
        let i = flows.len();
        let destination = if opts.destinations.is_empty() {
            "hpc0".to_string()
        } else {
            opts.destinations[i % opts.destinations.len()].clone()
        };
        flows.push(Flow {
            id: m.spec.device.clone(),
            source: m.spec.device.clone(),
            destination,
            class: opts.class_of(m.spec.modality),
            message_bytes: spec.frame_size,
            mtu: MTU_PAYLOAD,
            overhead: ETHERNET_OVERHEAD,
            period,
            offset: secs_to_ps(opts.stagger * i as f64) % period,
        });
    }
    flows
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EdgarNetOptions {
    /// [bit/s]
    pub sensor_link: f64,
    pub radar_link: f64,
    pub uplink: f64,
    /// Switch forwarding delay [s]
    pub processing: f64,
    /// Per-link propagation [s]
    pub propagation: f64,
    /// Adds a GNSS receiver when the rig has none: (payload bytes, rate Hz).
    pub gnss: Option<(u64, f64)>,
    pub flows: RigFlowOptions,
}

impl Default for EdgarNetOptions {
    fn default() -> Self {
        Self {
            sensor_link: 1e9,
            radar_link: 1e8,
            uplink: 40e9,
            processing: 2e-6,
            propagation: 25e-9,
            gnss: Some((256, 100.0)),
            flows: RigFlowOptions::default(),
        }
    }
}

/// Star around one switch: every sensor on its own access link, one
/// uplink per compute node.
pub fn edgar_network(rig: &Rig, opts: &EdgarNetOptions) -> Result<(NetTopology, Vec<Flow>), NetError> {
    for (name, v) in [("sensor_link", opts.sensor_link), ("radar_link", opts.radar_link), ("uplink", opts.uplink)] {
        if !(v >= 1.0 && v.is_finite()) {
            return Err(NetError::Config(format!("{name} must be a positive rate")));
        }
    }
    if !(opts.processing >= 0.0 && opts.propagation >= 0.0) {
        return Err(NetError::Config("delays must be non-negative".into()));
    }
    let prop = secs_to_ps(opts.propagation);
    let mut nodes = vec![NetNode { id: "sw0".into(), kind: NodeKind::Switch, processing: secs_to_ps(opts.processing) }];
    let mut links = Vec::new();
    let mut attach = |nodes: &mut Vec<NetNode>, id: &str, rate: f64| {
        nodes.push(NetNode { id: id.into(), kind: NodeKind::Endpoint, processing: 0 });
        links.push(Link { a: nodes.len() - 1, b: 0, rate: rate.round() as u64, propagation: prop });
    };
    let mut hpcs = opts.flows.destinations.clone();
    if hpcs.is_empty() {
        hpcs.push("hpc0".into());
    }
    for h in &hpcs {
        attach(&mut nodes, h, opts.uplink);
    }
    for d in rig.devices() {
        let rate = match rig.device_modality(d) {
            Some(Modality::Radar) => opts.radar_link,
            _ => opts.sensor_link,
        };
        attach(&mut nodes, d, rate);
    }
    let mut flows = flows_from_rig(rig, &opts.flows);
    if let Some((bytes, rate)) = opts.gnss {
        if rig.device_count(Modality::Gnss) == 0 {
            if !(rate > 0.0) || bytes == 0 {
                return Err(NetError::Config("gnss needs a positive payload and rate".into()));
            }
            attach(&mut nodes, "gnss", opts.sensor_link);
            flows.push(Flow {
                id: "gnss".into(),
                source: "gnss".into(),
                destination: hpcs[0].clone(),
                class: opts.flows.gnss,
                message_bytes: bytes,
                mtu: MTU_PAYLOAD,
                overhead: ETHERNET_OVERHEAD,
                period: secs_to_ps(1.0 / rate),
                offset: 0,
            });
        }
    }
    Ok((NetTopology::new(nodes, links)?, flows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SevenHopOptions {
    /// Number of switches in the chain
    pub hops: usize,
    /// [bit/s]
    pub link_rate: f64,
    /// [s]
    pub processing: f64,
    pub propagation: f64,
    /// Wire size of the SR-A frames [bytes]
    pub sr_frame: u64,
    /// [s]
    pub sr_period: f64,
    /// Best-effort talkers attached to the first switch
    pub cross_flows: usize,
    /// Rate of each cross flow [bit/s]
    pub cross_rate: f64,
    pub cross_frame: u64,
}

impl Default for SevenHopOptions {
    fn default() -> Self {
        Self {
            hops: 7,
            link_rate: 1e9,
            processing: 2e-6,
            propagation: 0.0,
            sr_frame: 128,
            sr_period: 125e-6,
            cross_flows: 2,
            cross_rate: 0.6e9,
            cross_frame: 1500,
        }
    }
}

/// talker -> S1 -> ... -> Sn -> listener with one SR-A stream. Cross traffic
/// enters at S1 and shares every switch-to-switch link with the stream.
pub fn seven_hop_scenario(opts: &SevenHopOptions) -> Result<(NetTopology, Vec<Flow>), NetError> {
    if opts.hops == 0 {
        return Err(NetError::Config("chain needs at least one switch".into()));
    }
    if !(opts.link_rate >= 1.0 && opts.sr_period > 0.0 && opts.processing >= 0.0 && opts.propagation >= 0.0) {
        return Err(NetError::Config("invalid chain parameters".into()));
    }
    let rate = opts.link_rate.round() as u64;
    let prop = secs_to_ps(opts.propagation);
    let mut nodes = vec![NetNode { id: "talker".into(), kind: NodeKind::Endpoint, processing: 0 }];
    for i in 1..=opts.hops {
        nodes.push(NetNode { id: format!("S{i}"), kind: NodeKind::Switch, processing: secs_to_ps(opts.processing) });
    }
    nodes.push(NetNode { id: "listener".into(), kind: NodeKind::Endpoint, processing: 0 });
    let mut links: Vec<Link> = (0..=opts.hops).map(|i| Link { a: i, b: i + 1, rate, propagation: prop }).collect();
    let mut flows = vec![Flow::frames("sr_a", "talker", "listener", TrafficClass::SrA, opts.sr_frame, opts.sr_period)];
    if opts.cross_flows > 0 {
        if !(opts.cross_rate > 0.0) || opts.cross_frame == 0 {
            return Err(NetError::Config("cross traffic needs a positive rate and frame size".into()));
        }
        let period = opts.cross_frame as f64 * 8.0 / opts.cross_rate;
        for k in 0..opts.cross_flows {
            let id = format!("cross{k}");
            nodes.push(NetNode { id: id.clone(), kind: NodeKind::Endpoint, processing: 0 });
            links.push(Link { a: nodes.len() - 1, b: 1, rate, propagation: prop });
            let mut f = Flow::frames(&id, &id, "listener", TrafficClass::BestEffort, opts.cross_frame, period);
            f.offset = f.period * k as u64 / opts.cross_flows as u64;
            flows.push(f);
        }
    }
    Ok((NetTopology::new(nodes, links)?, flows))
}

/// Idle-network latency of one SR-A frame through the chain [ps].
pub fn seven_hop_closed_form(opts: &SevenHopOptions) -> Ps {
    let links = opts.hops as u64 + 1;
    let rate = opts.link_rate.round() as u64;
    links * (transmission_ps(opts.sr_frame, rate) + secs_to_ps(opts.propagation))
        + opts.hops as u64 * secs_to_ps(opts.processing)
}
