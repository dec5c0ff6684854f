//! Plain-text run traces.
//!
//! One tab-separated line per observable event:
//!
//! ```text
//! time \t node \t event \t kind \t key=value \t key=value ...
//! ```
//!
//! `time` is seconds with six decimals, `node` the raw node id. Events
//! are `origin` (application handed a packet to its router), `bcast` /
//! `ucast` / `mcast` (a transmission and its addressing), `deliver`
//! (application-level receipt at the destination) and `drop`. Kinds are
//! the packet kinds: `rreq`, `rrep`, `rerr`, `hello`, `data`.
//!
//! The format is the ground truth for metrics: everything the metric
//! pass needs (including reconstructing wire sizes) is parseable from
//! these lines alone.

use std::fmt::Write as _;

use thiserror::Error;

use crate::engine::DropReason;
use crate::messages::{DataPacket, Hello, NodeId, PacketKind, Rerr, Rreq, Rrep, SignalingPacket};
use crate::time::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceEvent {
    Origin,
    Bcast,
    Ucast,
    Mcast,
    Deliver,
    Drop,
}

impl TraceEvent {
    pub fn as_str(self) -> &'static str {
        match self {
            TraceEvent::Origin => "origin",
            TraceEvent::Bcast => "bcast",
            TraceEvent::Ucast => "ucast",
            TraceEvent::Mcast => "mcast",
            TraceEvent::Deliver => "deliver",
            TraceEvent::Drop => "drop",
        }
    }

    pub fn parse(s: &str) -> Option<TraceEvent> {
        Some(match s {
            "origin" => TraceEvent::Origin,
            "bcast" => TraceEvent::Bcast,
            "ucast" => TraceEvent::Ucast,
            "mcast" => TraceEvent::Mcast,
            "deliver" => TraceEvent::Deliver,
            "drop" => TraceEvent::Drop,
            _ => return None,
        })
    }

    /// Is this line a radio transmission (as opposed to an
    /// application-level or bookkeeping event)?
    pub fn is_transmission(self) -> bool {
        matches!(self, TraceEvent::Bcast | TraceEvent::Ucast | TraceEvent::Mcast)
    }
}

#[derive(Debug, Error)]
#[error("trace line {line}: {msg}")]
pub struct TraceError {
    pub line: usize,
    pub msg: String,
}

impl TraceError {
    fn new(line: usize, msg: impl Into<String>) -> Self {
        TraceError {
            line,
            msg: msg.into(),
        }
    }
}

/// A parsed trace line. `lineno` is 1-based, for error reporting.
#[derive(Debug, Clone)]
pub struct TraceLine {
    pub lineno: usize,
    pub time: SimTime,
    pub node: NodeId,
    pub event: TraceEvent,
    pub kind: PacketKind,
    fields: Vec<(String, String)>,
}

impl TraceLine {
    pub fn field(&self, key: &str) -> Option<&str> {
        self.fields
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    fn req(&self, key: &str) -> Result<&str, TraceError> {
        self.field(key)
            .ok_or_else(|| TraceError::new(self.lineno, format!("missing field `{key}`")))
    }

    pub fn u32_field(&self, key: &str) -> Result<u32, TraceError> {
        let raw = self.req(key)?;
        raw.parse()
            .map_err(|_| TraceError::new(self.lineno, format!("bad integer in `{key}={raw}`")))
    }

    pub fn u64_field(&self, key: &str) -> Result<u64, TraceError> {
        let raw = self.req(key)?;
        raw.parse()
            .map_err(|_| TraceError::new(self.lineno, format!("bad integer in `{key}={raw}`")))
    }

    pub fn node_field(&self, key: &str) -> Result<NodeId, TraceError> {
        Ok(NodeId(self.u32_field(key)? as u16))
    }

    pub fn time_field(&self, key: &str) -> Result<SimTime, TraceError> {
        parse_time(self.req(key)?)
            .ok_or_else(|| TraceError::new(self.lineno, format!("bad time in `{key}`")))
    }
}

fn parse_time(s: &str) -> Option<SimTime> {
    let (secs, frac) = s.split_once('.')?;
    if frac.len() != 6 {
        return None;
    }
    let secs: u64 = secs.parse().ok()?;
    let micros: u64 = frac.parse().ok()?;
    Some(SimTime(secs * 1_000_000 + micros))
}

/// Parse a whole trace. Any malformed line is a hard error carrying its
/// 1-based line number.
pub fn parse(text: &str) -> Result<Vec<TraceLine>, TraceError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.is_empty() {
            continue;
        }
        let mut cols = raw.split('\t');
        let time = cols
            .next()
            .and_then(parse_time)
            .ok_or_else(|| TraceError::new(lineno, "bad or missing time column"))?;
        let node: u16 = cols
            .next()
            .and_then(|c| c.parse().ok())
            .ok_or_else(|| TraceError::new(lineno, "bad or missing node column"))?;
        let event = cols
            .next()
            .and_then(TraceEvent::parse)
            .ok_or_else(|| TraceError::new(lineno, "bad or missing event column"))?;
        let kind = cols
            .next()
            .and_then(PacketKind::parse)
            .ok_or_else(|| TraceError::new(lineno, "bad or missing kind column"))?;
        let mut fields = Vec::new();
        for col in cols {
            let (k, v) = col
                .split_once('=')
                .ok_or_else(|| TraceError::new(lineno, format!("bad field `{col}`")))?;
            fields.push((k.to_string(), v.to_string()));
        }
        out.push(TraceLine {
            lineno,
            time,
            node: NodeId(node),
            event,
            kind,
            fields,
        });
    }
    Ok(out)
}

fn fmt_node_list(nodes: &[NodeId]) -> String {
    if nodes.is_empty() {
        return "-".to_string();
    }
    let parts: Vec<String> = nodes.iter().map(|n| n.0.to_string()).collect();
    parts.join("|")
}

fn parse_node_list(s: &str) -> Option<Vec<NodeId>> {
    if s == "-" {
        return Some(Vec::new());
    }
    s.split('|').map(|p| p.parse().ok().map(NodeId)).collect()
}

fn line_head(out: &mut String, time: SimTime, node: NodeId, event: TraceEvent, kind: PacketKind) {
    write!(out, "{time}\t{}\t{}\t{}", node.0, event.as_str(), kind.as_str()).unwrap();
}

/// A signaling transmission: broadcast when `to` is None, otherwise
/// addressed to the listed nodes (`ucast` for one, `mcast` for more).
pub fn emit_signaling(
    out: &mut String,
    time: SimTime,
    node: NodeId,
    to: Option<&[NodeId]>,
    pkt: &SignalingPacket,
) {
    let event = match to {
        None => TraceEvent::Bcast,
        Some(t) if t.len() == 1 => TraceEvent::Ucast,
        Some(_) => TraceEvent::Mcast,
    };
    line_head(out, time, node, event, pkt.kind());
    if let Some(t) = to {
        write!(out, "\tto={}", fmt_node_list(t)).unwrap();
    }
    match pkt {
        SignalingPacket::Hello(h) => {
            write!(out, "\thsn={}", h.seq).unwrap();
        }
        SignalingPacket::Rreq(r) => {
            write!(
                out,
                "\trid={}\torigin={}\toseq={}\tdest={}\tdseq={}\thops={}\thsn={}",
                r.rid, r.origin.0, r.origin_seq, r.dest.0, r.dest_seq, r.hops_to_origin, r.hsn
            )
            .unwrap();
        }
        SignalingPacket::Rrep(r) => {
            let origin = r.origin.map_or("-".to_string(), |n| n.0.to_string());
            write!(
                out,
                "\tdest={}\tdseq={}\thops={}\tldn={}\torigin={}\thsn={}",
                r.dest.0,
                r.dest_seq,
                r.hops_to_dest,
                fmt_node_list(&r.ldn),
                origin,
                r.hsn
            )
            .unwrap();
        }
        SignalingPacket::Rerr(r) => {
            let pairs: Vec<String> = r
                .unreachable
                .iter()
                .map(|(d, s)| format!("{}:{}", d.0, s))
                .collect();
            write!(out, "\tunreach={}\thsn={}", pairs.join("|"), r.hsn).unwrap();
        }
    }
    out.push('\n');
}

/// A data packet handed to the router by the source application.
pub fn emit_origin(out: &mut String, time: SimTime, pkt: &DataPacket) {
    line_head(out, time, pkt.src, TraceEvent::Origin, PacketKind::Data);
    write!(
        out,
        "\tsrc={}\tdest={}\tseq={}\tsize={}",
        pkt.src.0, pkt.dest.0, pkt.seq_no, pkt.size_bytes
    )
    .unwrap();
    out.push('\n');
}

/// A data transmission toward `to`.
pub fn emit_data_send(out: &mut String, time: SimTime, node: NodeId, to: NodeId, pkt: &DataPacket) {
    line_head(out, time, node, TraceEvent::Ucast, PacketKind::Data);
    write!(
        out,
        "\tto={}\tsrc={}\tdest={}\tseq={}\tttl={}\tcreated={}",
        to.0, pkt.src.0, pkt.dest.0, pkt.seq_no, pkt.ttl, pkt.created_at
    )
    .unwrap();
    out.push('\n');
}

/// Application-level receipt at the destination.
pub fn emit_deliver(out: &mut String, time: SimTime, node: NodeId, pkt: &DataPacket) {
    line_head(out, time, node, TraceEvent::Deliver, PacketKind::Data);
    write!(
        out,
        "\tsrc={}\tdest={}\tseq={}\tcreated={}",
        pkt.src.0, pkt.dest.0, pkt.seq_no, pkt.created_at
    )
    .unwrap();
    out.push('\n');
}

/// A data packet abandoned at `node`.
pub fn emit_drop(
    out: &mut String,
    time: SimTime,
    node: NodeId,
    pkt: &DataPacket,
    reason: DropReason,
) {
    line_head(out, time, node, TraceEvent::Drop, PacketKind::Data);
    write!(
        out,
        "\tsrc={}\tdest={}\tseq={}\treason={}\tcreated={}",
        pkt.src.0,
        pkt.dest.0,
        pkt.seq_no,
        reason.as_str(),
        pkt.created_at
    )
    .unwrap();
    out.push('\n');
}

/// Rebuilds the signaling packet a transmission line describes, so wire
/// sizes can be re-derived from the trace alone.
pub fn rebuild_signaling(line: &TraceLine) -> Result<SignalingPacket, TraceError> {
    let pkt = match line.kind {
        PacketKind::Hello => SignalingPacket::Hello(Hello {
            seq: line.u32_field("hsn")?,
        }),
        PacketKind::Rreq => SignalingPacket::Rreq(Rreq {
            rid: line.u32_field("rid")?,
            origin: line.node_field("origin")?,
            origin_seq: line.u32_field("oseq")?,
            dest: line.node_field("dest")?,
            dest_seq: line.u32_field("dseq")?,
            hops_to_origin: line.u32_field("hops")?,
            hsn: line.u32_field("hsn")?,
        }),
        PacketKind::Rrep => {
            let origin_raw = line.req("origin")?;
            let origin = if origin_raw == "-" {
                None
            } else {
                Some(NodeId(origin_raw.parse().map_err(|_| {
                    TraceError::new(line.lineno, "bad node in `origin`")
                })?))
            };
            let ldn = parse_node_list(line.req("ldn")?)
                .ok_or_else(|| TraceError::new(line.lineno, "bad node list in `ldn`"))?;
            SignalingPacket::Rrep(Rrep {
                dest: line.node_field("dest")?,
                dest_seq: line.u32_field("dseq")?,
                hops_to_dest: line.u32_field("hops")?,
                ldn,
                origin,
                hsn: line.u32_field("hsn")?,
            })
        }
        PacketKind::Rerr => {
            let mut pairs = Vec::new();
            for part in line.req("unreach")?.split('|') {
                let (d, s) = part
                    .split_once(':')
                    .ok_or_else(|| TraceError::new(line.lineno, "bad `unreach` pair"))?;
                let dest: u16 = d
                    .parse()
                    .map_err(|_| TraceError::new(line.lineno, "bad node in `unreach`"))?;
                let seq: u32 = s
                    .parse()
                    .map_err(|_| TraceError::new(line.lineno, "bad seq in `unreach`"))?;
                pairs.push((NodeId(dest), seq));
            }
            SignalingPacket::Rerr(
                Rerr::new(pairs, line.u32_field("hsn")?)
                    .map_err(|e| TraceError::new(line.lineno, e.to_string()))?,
            )
        }
        PacketKind::Data => {
            return Err(TraceError::new(line.lineno, "data line is not signaling"))
        }
    };
    Ok(pkt)
}
