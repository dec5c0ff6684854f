//! Scenario configuration: a flat key=value text format, validation,
//! and the builders that turn a scenario into nodes, mobility models
//! and traffic flows.
//!
//! The format is deliberately plain — one `key = value` per line, `#`
//! comments — so scenario files diff cleanly. Unknown keys are rejected
//! rather than ignored: a typo must never silently change an
//! experiment.

use rand::Rng;
use thiserror::Error;

use crate::engine::{Engine, EngineKind, ProtocolParams};
use crate::golden;
use crate::messages::NodeId;
use crate::rng::{stream, StreamPurpose};
use crate::sim::mobility::{MobilityModel, Point};
use crate::sim::traffic::Flow;
use crate::time::SimTime;

/// How flow source nodes are chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowSources {
    /// Each flow draws a uniform random source.
    Random,
    /// Flow `i` originates at node `i` (requires flows ≤ node_count).
    Distinct,
}

#[derive(Debug, Clone)]
pub struct Scenario {
    pub engine: EngineKind,
    pub seed: u64,
    pub node_count: u16,
    /// Area rectangle, meters.
    pub area: (f64, f64),
    /// Maximum node speed, m/s; zero freezes all nodes.
    pub v_max: f64,
    /// Pause at each waypoint, seconds.
    pub pause: f64,
    /// Simulated duration, seconds.
    pub duration: f64,
    /// Number of traffic flows.
    pub flows: u32,
    /// Packets per second during an ON phase.
    pub flow_rate: f64,
    /// Data payload size, bytes.
    pub packet_bytes: usize,
    /// ON phase length, seconds.
    pub on_time: f64,
    /// OFF phase length, seconds.
    pub off_time: f64,
    /// Probability that a flow's destination is the hotspot node (the
    /// highest node id).
    pub hotspot_prob: f64,
    pub flow_sources: FlowSources,
    /// Flow start times are uniform in [0, start_spread) seconds.
    pub start_spread: f64,
    /// Radio range, meters (strictly-less-than disk).
    pub range: f64,
    /// Propagation delay, seconds.
    pub prop_delay: f64,
    /// Upper bound of the per-transmission signaling jitter, seconds.
    pub jitter: f64,
    /// Independent per-receiver loss probability for signaling.
    pub loss_prob: f64,
    /// Protocol timer granularity, seconds.
    pub tick_interval: f64,
    /// Loop-monitor probe period, seconds.
    pub monitor_interval: f64,
    pub protocol: ProtocolParams,
    /// Scripted starting positions (presets); length must equal
    /// node_count when present.
    pub positions: Option<Vec<(f64, f64)>>,
    /// Scripted flows as (src, dest, start); replaces random flow
    /// construction when present.
    pub preset_flows: Option<Vec<(NodeId, NodeId, SimTime)>>,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            engine: EngineKind::Adara,
            seed: 1,
            node_count: 25,
            area: (300.0, 1000.0),
            v_max: 20.0,
            pause: 0.0,
            duration: 60.0,
            flows: 10,
            flow_rate: 15.0,
            packet_bytes: 512,
            on_time: 1.0,
            off_time: 1.0,
            hotspot_prob: 0.5,
            flow_sources: FlowSources::Random,
            start_spread: 1.0,
            range: 250.0,
            prop_delay: 0.001,
            jitter: 0.010,
            loss_prob: 0.0,
            tick_interval: 0.1,
            monitor_interval: 1.0,
            protocol: ProtocolParams::default(),
            positions: None,
            preset_flows: None,
        }
    }
}

#[derive(Debug, Error)]
#[error("config line {line}: {msg}")]
pub struct ConfigError {
    pub line: usize,
    pub msg: String,
}

fn parse_f64(key: &str, v: &str) -> Result<f64, String> {
    let x: f64 = v
        .parse()
        .map_err(|_| format!("`{key}` wants a number, got `{v}`"))?;
    if !x.is_finite() {
        return Err(format!("`{key}` must be finite"));
    }
    Ok(x)
}

fn parse_int<T: std::str::FromStr>(key: &str, v: &str) -> Result<T, String> {
    v.parse()
        .map_err(|_| format!("`{key}` wants an integer, got `{v}`"))
}

fn parse_bool(key: &str, v: &str) -> Result<bool, String> {
    match v {
        "true" => Ok(true),
        "false" => Ok(false),
        _ => Err(format!("`{key}` wants true or false, got `{v}`")),
    }
}

impl Scenario {
    /// Parse a config file body on top of the defaults. Later keys
    /// override earlier ones; `preset = golden` loads the scripted
    /// handshake scenario and can itself be refined by following keys.
    pub fn parse(text: &str) -> Result<Scenario, ConfigError> {
        let mut sc = Scenario::default();
        for (i, raw) in text.lines().enumerate() {
            let lineno = i + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError {
                line: lineno,
                msg: format!("expected `key = value`, got `{line}`"),
            })?;
            sc.set_key(key.trim(), value.trim())
                .map_err(|msg| ConfigError { line: lineno, msg })?;
        }
        Ok(sc)
    }

    /// Apply one key. Shared by the file parser, CLI overrides, and
    /// sweep axes.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "engine" => {
                self.engine = EngineKind::parse(value)
                    .ok_or_else(|| format!("`engine` wants adara or aodv, got `{value}`"))?;
            }
            "seed" => self.seed = parse_int("seed", value)?,
            "node_count" => self.node_count = parse_int("node_count", value)?,
            "area_width" => self.area.0 = parse_f64("area_width", value)?,
            "area_height" => self.area.1 = parse_f64("area_height", value)?,
            "v_max" => self.v_max = parse_f64("v_max", value)?,
            "pause" => self.pause = parse_f64("pause", value)?,
            "duration" => self.duration = parse_f64("duration", value)?,
            "flows" => self.flows = parse_int("flows", value)?,
            "flow_rate" => self.flow_rate = parse_f64("flow_rate", value)?,
            "packet_bytes" => self.packet_bytes = parse_int("packet_bytes", value)?,
            "on_time" => self.on_time = parse_f64("on_time", value)?,
            "off_time" => self.off_time = parse_f64("off_time", value)?,
            "hotspot_prob" => self.hotspot_prob = parse_f64("hotspot_prob", value)?,
            "flow_sources" => {
                self.flow_sources = match value {
                    "random" => FlowSources::Random,
                    "distinct" => FlowSources::Distinct,
                    _ => return Err(format!("`flow_sources` wants random or distinct, got `{value}`")),
                };
            }
            "start_spread" => self.start_spread = parse_f64("start_spread", value)?,
            "range" => self.range = parse_f64("range", value)?,
            "prop_delay" => self.prop_delay = parse_f64("prop_delay", value)?,
            "jitter" => self.jitter = parse_f64("jitter", value)?,
            "loss_prob" => self.loss_prob = parse_f64("loss_prob", value)?,
            "tick_interval" => self.tick_interval = parse_f64("tick_interval", value)?,
            "monitor_interval" => self.monitor_interval = parse_f64("monitor_interval", value)?,
            "hello_interval" => {
                self.protocol.hello_interval =
                    SimTime::from_secs_f64(nonneg("hello_interval", value)?);
            }
            "allowed_hello_loss" => {
                self.protocol.allowed_hello_loss = parse_int("allowed_hello_loss", value)?;
            }
            "route_lifetime" => {
                self.protocol.route_lifetime = SimTime::from_secs_f64(nonneg("route_lifetime", value)?);
            }
            "prt_lifetime" => {
                self.protocol.prt_lifetime = SimTime::from_secs_f64(nonneg("prt_lifetime", value)?);
            }
            "rreq_retries" => self.protocol.rreq_retries = parse_int("rreq_retries", value)?,
            "rreq_timeout" => {
                self.protocol.rreq_timeout = SimTime::from_secs_f64(nonneg("rreq_timeout", value)?);
            }
            "buffer_capacity" => {
                self.protocol.buffer_capacity = parse_int("buffer_capacity", value)?;
            }
            "buffer_max_age" => {
                self.protocol.buffer_max_age = SimTime::from_secs_f64(nonneg("buffer_max_age", value)?);
            }
            "data_ttl" => self.protocol.data_ttl = parse_int("data_ttl", value)?,
            "gc_lifetime" => {
                self.protocol.gc_lifetime = SimTime::from_secs_f64(nonneg("gc_lifetime", value)?);
            }
            "strict_mode" => self.protocol.strict_mode = parse_bool("strict_mode", value)?,
            "preset" => match value {
                "golden" => {
                    let engine = self.engine;
                    *self = golden::scenario(engine);
                }
                _ => return Err(format!("unknown preset `{value}`")),
            },
            _ => return Err(format!("unknown key `{key}`")),
        }
        Ok(())
    }

    /// Reject impossible scenarios with a human-readable reason.
    pub fn validate(&self) -> Result<(), String> {
        if self.node_count == 0 {
            return Err("node_count must be at least 1".into());
        }
        if !(self.duration > 0.0) {
            return Err("duration must be positive".into());
        }
        if !(self.range > 0.0) {
            return Err("range must be positive".into());
        }
        if !(self.area.0 > 0.0 && self.area.1 > 0.0) {
            return Err("area dimensions must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.hotspot_prob) {
            return Err("hotspot_prob must lie in [0, 1]".into());
        }
        if !(0.0..1.0).contains(&self.loss_prob) {
            return Err("loss_prob must lie in [0, 1) — a link that loses everything is no link".into());
        }
        if self.v_max < 0.0 || self.pause < 0.0 || self.start_spread < 0.0 {
            return Err("v_max, pause and start_spread must be non-negative".into());
        }
        if self.prop_delay < 0.0 || self.jitter < 0.0 {
            return Err("prop_delay and jitter must be non-negative".into());
        }
        if !(self.tick_interval > 0.0) {
            return Err("tick_interval must be positive".into());
        }
        if !(self.monitor_interval > 0.0) {
            return Err("monitor_interval must be positive".into());
        }
        if self.flows > 0 {
            if self.node_count < 2 {
                return Err("flows need at least 2 nodes".into());
            }
            if !(self.flow_rate > 0.0) || !(self.on_time > 0.0) || self.off_time < 0.0 {
                return Err("flow_rate and on_time must be positive, off_time non-negative".into());
            }
            if self.per_on() == 0 {
                return Err("flow_rate × on_time must yield at least one packet".into());
            }
            if self.packet_bytes == 0 {
                return Err("packet_bytes must be positive".into());
            }
            if self.flow_sources == FlowSources::Distinct && self.flows as u32 > self.node_count as u32
            {
                return Err("distinct flow_sources needs flows <= node_count".into());
            }
        }
        if self.protocol.buffer_capacity == 0 {
            return Err("buffer_capacity must be at least 1".into());
        }
        if self.protocol.data_ttl == 0 {
            return Err("data_ttl must be at least 1".into());
        }
        if let Some(pos) = &self.positions {
            if pos.len() != self.node_count as usize {
                return Err(format!(
                    "positions list has {} entries for {} nodes",
                    pos.len(),
                    self.node_count
                ));
            }
            for &(x, y) in pos {
                if !(0.0..=self.area.0).contains(&x) || !(0.0..=self.area.1).contains(&y) {
                    return Err(format!("position ({x}, {y}) lies outside the area"));
                }
            }
        }
        if let Some(flows) = &self.preset_flows {
            for &(src, dest, _) in flows {
                if src == dest || src.0 >= self.node_count || dest.0 >= self.node_count {
                    return Err(format!("preset flow {} -> {} is invalid", src.0, dest.0));
                }
            }
        }
        Ok(())
    }

    /// The designated hotspot: the node with the highest id.
    pub fn hotspot(&self) -> NodeId {
        NodeId(self.node_count - 1)
    }

    pub fn end(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration)
    }

    fn per_on(&self) -> u64 {
        (self.flow_rate * self.on_time).round() as u64
    }

    pub fn build_engine(&self, id: NodeId) -> Engine {
        Engine::new(self.engine, id, self.protocol.clone())
    }

    /// One mobility model per node, each on its own random stream so a
    /// node's path depends only on (seed, node id).
    pub fn build_mobility(&self) -> Vec<MobilityModel> {
        let pause = SimTime::from_secs_f64(self.pause);
        (0..self.node_count)
            .map(|i| {
                let rng = stream(self.seed, StreamPurpose::Mobility, i as u32);
                match &self.positions {
                    Some(pos) => {
                        let (x, y) = pos[i as usize];
                        MobilityModel::new_at(Point { x, y }, self.area, self.v_max, pause, rng)
                    }
                    None => MobilityModel::new(self.area, self.v_max, pause, rng),
                }
            })
            .collect()
    }

    /// Flow endpoints and start times, one random stream per flow. The
    /// destination is the hotspot with probability `hotspot_prob`,
    /// otherwise (or when the source is the hotspot itself) uniform
    /// among the other nodes.
    pub fn build_flows(&self) -> Vec<Flow> {
        let on = SimTime::from_secs_f64(self.on_time);
        let off = SimTime::from_secs_f64(self.off_time);
        let per_on = self.per_on();
        if let Some(preset) = &self.preset_flows {
            return preset
                .iter()
                .map(|&(src, dest, start)| Flow {
                    src,
                    dest,
                    start,
                    on,
                    off,
                    per_on,
                    packet_bytes: self.packet_bytes,
                })
                .collect();
        }
        (0..self.flows)
            .map(|i| {
                let mut rng = stream(self.seed, StreamPurpose::Traffic, i);
                let src = match self.flow_sources {
                    FlowSources::Random => NodeId(rng.gen_range(0..self.node_count)),
                    FlowSources::Distinct => NodeId(i as u16),
                };
                let hotspot = self.hotspot();
                let dest = if rng.gen::<f64>() < self.hotspot_prob && hotspot != src {
                    hotspot
                } else {
                    loop {
                        let d = NodeId(rng.gen_range(0..self.node_count));
                        if d != src {
                            break d;
                        }
                    }
                };
                let start = SimTime::from_secs_f64(rng.gen::<f64>() * self.start_spread);
                Flow {
                    src,
                    dest,
                    start,
                    on,
                    off,
                    per_on,
                    packet_bytes: self.packet_bytes,
                }
            })
            .collect()
    }
}

fn nonneg(key: &str, value: &str) -> Result<f64, String> {
    let x = parse_f64(key, value)?;
    if x < 0.0 {
        return Err(format!("`{key}` must be non-negative"));
    }
    Ok(x)
}
