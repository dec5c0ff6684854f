//! Packet formats for the routing control plane and the data plane.
//!
//! Sizes are modelled, not serialized: each control packet counts a fixed
//! 8-byte header plus 4 bytes per field (list fields count 4 bytes per
//! element, route/sequence pairs 8). Data packets count the 8-byte header
//! plus their payload. The model only feeds the byte-overhead metrics;
//! the simulator never marshals packets onto a real wire.

use std::fmt;

use crate::time::SimTime;

/// Identifies a node. Node ids are dense, starting at zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u16);

impl NodeId {
    pub fn index(self) -> usize {
        usize::from(self.0)
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

/// Fixed per-packet header cost in bytes.
pub const HEADER_BYTES: usize = 8;
/// Cost of one scalar field in bytes.
pub const FIELD_BYTES: usize = 4;

/// Periodic neighbor beacon. Carries the sender's current sequence
/// number so neighbors can install a fresh one-hop route to the sender.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hello {
    /// Sender's sequence number at emission time.
    pub seq: u32,
}

/// Route request, flooded toward the destination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rreq {
    /// Request id, unique per origin over a discovery attempt.
    pub rid: u32,
    /// Node that wants the route.
    pub origin: NodeId,
    /// Origin's sequence number at origination.
    pub origin_seq: u32,
    /// Node the route is wanted for.
    pub dest: NodeId,
    /// Last sequence number the origin knew for the destination
    /// (zero when the origin has never heard of it).
    pub dest_seq: u32,
    /// Hops travelled from the origin so far.
    pub hops_to_origin: u32,
    /// Forwarder's sequence number, piggybacked for freshness.
    pub hsn: u32,
}

/// Route reply. In the aggregation engine it is broadcast and scoped by
/// `ldn`; in the reference engine it is unicast toward `origin`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rrep {
    /// Destination the reply describes a route to.
    pub dest: NodeId,
    /// Destination sequence number vouching for freshness.
    pub dest_seq: u32,
    /// Hops from the sender of this reply to the destination.
    pub hops_to_dest: u32,
    /// Designated neighbors: the only receivers that should rebroadcast.
    /// Empty when the reply is pure confirmation for local listeners.
    pub ldn: Vec<NodeId>,
    /// Requesting origin, set only by engines that unicast replies
    /// back along a reverse path.
    pub origin: Option<NodeId>,
    /// Forwarder's sequence number, piggybacked for freshness.
    pub hsn: u32,
}

/// Route error listing destinations that became unreachable through the
/// sender, each paired with the sequence number the broken entry held.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rerr {
    pub unreachable: Vec<(NodeId, u32)>,
    /// Sender's sequence number, piggybacked for freshness.
    pub hsn: u32,
}

impl Rerr {
    /// A route error with nothing unreachable carries no information;
    /// constructing one is a bug in the caller.
    pub fn new(unreachable: Vec<(NodeId, u32)>, hsn: u32) -> Result<Self, EmptyRerr> {
        if unreachable.is_empty() {
            Err(EmptyRerr)
        } else {
            Ok(Rerr { unreachable, hsn })
        }
    }
}

/// Error returned when building a route error with an empty list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("route error must name at least one unreachable destination")]
pub struct EmptyRerr;

/// Union of control-plane packets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SignalingPacket {
    Hello(Hello),
    Rreq(Rreq),
    Rrep(Rrep),
    Rerr(Rerr),
}

impl SignalingPacket {
    pub fn kind(&self) -> PacketKind {
        match self {
            SignalingPacket::Hello(_) => PacketKind::Hello,
            SignalingPacket::Rreq(_) => PacketKind::Rreq,
            SignalingPacket::Rrep(_) => PacketKind::Rrep,
            SignalingPacket::Rerr(_) => PacketKind::Rerr,
        }
    }

    /// Modelled size on the air, in bytes.
    pub fn wire_size(&self) -> usize {
        match self {
            SignalingPacket::Hello(_) => HEADER_BYTES + FIELD_BYTES,
            SignalingPacket::Rreq(_) => HEADER_BYTES + 7 * FIELD_BYTES,
            SignalingPacket::Rrep(r) => {
                HEADER_BYTES
                    + 4 * FIELD_BYTES
                    + r.ldn.len() * FIELD_BYTES
                    + if r.origin.is_some() { FIELD_BYTES } else { 0 }
            }
            SignalingPacket::Rerr(r) => {
                HEADER_BYTES + FIELD_BYTES + r.unreachable.len() * 2 * FIELD_BYTES
            }
        }
    }

    /// The freshness sequence number piggybacked on every control packet.
    pub fn hsn(&self) -> u32 {
        match self {
            SignalingPacket::Hello(h) => h.seq,
            SignalingPacket::Rreq(r) => r.hsn,
            SignalingPacket::Rrep(r) => r.hsn,
            SignalingPacket::Rerr(r) => r.hsn,
        }
    }
}

/// Application payload carried hop by hop along installed routes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataPacket {
    pub src: NodeId,
    pub dest: NodeId,
    /// Per-source monotone packet number, for delivery accounting.
    pub seq_no: u64,
    /// Time the source application emitted the packet.
    pub created_at: SimTime,
    /// Payload size in bytes (header excluded).
    pub size_bytes: usize,
    /// Remaining hop budget; decremented per forward.
    pub ttl: u32,
}

impl DataPacket {
    pub fn wire_size(&self) -> usize {
        HEADER_BYTES + self.size_bytes
    }
}

/// Packet taxonomy used by traces and metrics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum PacketKind {
    Hello,
    Rreq,
    Rrep,
    Rerr,
    Data,
}

impl PacketKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PacketKind::Hello => "hello",
            PacketKind::Rreq => "rreq",
            PacketKind::Rrep => "rrep",
            PacketKind::Rerr => "rerr",
            PacketKind::Data => "data",
        }
    }

    pub fn parse(s: &str) -> Option<PacketKind> {
        Some(match s {
            "hello" => PacketKind::Hello,
            "rreq" => PacketKind::Rreq,
            "rrep" => PacketKind::Rrep,
            "rerr" => PacketKind::Rerr,
            "data" => PacketKind::Data,
            _ => return None,
        })
    }
}

impl fmt::Display for PacketKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hello_is_twelve_bytes() {
        let p = SignalingPacket::Hello(Hello { seq: 5 });
        assert_eq!(p.wire_size(), 12);
    }

    #[test]
    fn rreq_is_thirty_six_bytes() {
        let p = SignalingPacket::Rreq(Rreq {
            rid: 1,
            origin: NodeId(0),
            origin_seq: 1,
            dest: NodeId(9),
            dest_seq: 0,
            hops_to_origin: 0,
            hsn: 1,
        });
        assert_eq!(p.wire_size(), 36);
    }

    #[test]
    fn rrep_grows_four_bytes_per_designated_neighbor() {
        let base = Rrep {
            dest: NodeId(9),
            dest_seq: 3,
            hops_to_dest: 0,
            ldn: vec![NodeId(5)],
            origin: None,
            hsn: 3,
        };
        let one = SignalingPacket::Rrep(base.clone()).wire_size();
        let two = SignalingPacket::Rrep(Rrep {
            ldn: vec![NodeId(3), NodeId(8)],
            ..base.clone()
        })
        .wire_size();
        assert_eq!(one, 28);
        assert_eq!(two - one, 4);

        let empty = SignalingPacket::Rrep(Rrep {
            ldn: vec![],
            ..base.clone()
        })
        .wire_size();
        assert_eq!(empty, 24);

        let unicast = SignalingPacket::Rrep(Rrep {
            ldn: vec![],
            origin: Some(NodeId(0)),
            ..base
        })
        .wire_size();
        assert_eq!(unicast, 28);
    }

    #[test]
    fn rerr_rejects_empty_list_and_counts_pairs() {
        assert_eq!(Rerr::new(vec![], 1), Err(EmptyRerr));
        let one = Rerr::new(vec![(NodeId(9), 4)], 1).unwrap();
        let two = Rerr::new(vec![(NodeId(9), 4), (NodeId(7), 2)], 1).unwrap();
        assert_eq!(SignalingPacket::Rerr(one).wire_size(), 20);
        assert_eq!(SignalingPacket::Rerr(two).wire_size(), 28);
    }

    #[test]
    fn data_wire_size_is_header_plus_payload() {
        let d = DataPacket {
            src: NodeId(0),
            dest: NodeId(9),
            seq_no: 0,
            created_at: SimTime::ZERO,
            size_bytes: 512,
            ttl: 64,
        };
        assert_eq!(d.wire_size(), 520);
    }

    #[test]
    fn every_control_packet_carries_a_freshness_number() {
        let h = SignalingPacket::Hello(Hello { seq: 9 });
        assert_eq!(h.hsn(), 9);
        let e = SignalingPacket::Rerr(Rerr::new(vec![(NodeId(1), 1)], 7).unwrap());
        assert_eq!(e.hsn(), 7);
    }
}
