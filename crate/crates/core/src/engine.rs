//! Node-level interface shared by the routing engines, plus the pieces
//! of node state that are protocol-agnostic: tunable parameters, the
//! bounded send buffer, neighbor liveness tracking and pending-discovery
//! bookkeeping.

use std::collections::{BTreeMap, VecDeque};

use crate::messages::{DataPacket, NodeId, SignalingPacket};
use crate::route_state::RoutingTable;
use crate::time::SimTime;

/// Why a data packet was abandoned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum DropReason {
    /// Evicted from a full send buffer to make room for a newer packet.
    BufferFull,
    /// Sat in the send buffer longer than the configured maximum age.
    BufferExpired,
    /// No usable route at a forwarding node.
    NoRoute,
    /// Hop budget exhausted.
    TtlExpired,
    /// Route discovery used up all its retries.
    DiscoveryFailed,
}

impl DropReason {
    pub fn as_str(self) -> &'static str {
        match self {
            DropReason::BufferFull => "buffer_full",
            DropReason::BufferExpired => "buffer_expired",
            DropReason::NoRoute => "no_route",
            DropReason::TtlExpired => "ttl_expired",
            DropReason::DiscoveryFailed => "discovery_failed",
        }
    }

    pub fn from_str(s: &str) -> Option<Self> {
        Some(match s {
            "buffer_full" => DropReason::BufferFull,
            "buffer_expired" => DropReason::BufferExpired,
            "no_route" => DropReason::NoRoute,
            "ttl_expired" => DropReason::TtlExpired,
            "discovery_failed" => DropReason::DiscoveryFailed,
            _ => return None,
        })
    }
}

/// A transmission handed from an engine to the radio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Emission {
    /// Control packet to everyone in range.
    Broadcast(SignalingPacket),
    /// Control packet addressed to specific neighbors (modelled as a
    /// broadcast that only the named nodes process).
    Targeted {
        to: Vec<NodeId>,
        pkt: SignalingPacket,
    },
    /// Data packet to one next hop.
    Data { to: NodeId, pkt: DataPacket },
}

/// Everything an engine wants done as the result of one stimulus.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NodeOutput {
    pub emissions: Vec<Emission>,
    /// Data packets that reached their destination at this node.
    pub delivered: Vec<DataPacket>,
    /// Data packets abandoned at this node, with the reason.
    pub dropped: Vec<(DataPacket, DropReason)>,
}

impl NodeOutput {
    pub fn merge(&mut self, other: NodeOutput) {
        self.emissions.extend(other.emissions);
        self.delivered.extend(other.delivered);
        self.dropped.extend(other.dropped);
    }
}

/// Protocol tunables, shared by both engines so comparisons stay fair.
#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    /// Lifetime of an actively used route.
    pub route_lifetime: SimTime,
    /// Lifetime of a pending-request entry.
    pub prt_lifetime: SimTime,
    /// Beacon period; zero disables hellos (and neighbor timeouts).
    pub hello_interval: SimTime,
    /// Number of silent hello periods tolerated before a neighbor is
    /// declared gone.
    pub allowed_hello_loss: u32,
    /// Discovery retries after the first attempt.
    pub rreq_retries: u32,
    /// Deadline for one discovery attempt.
    pub rreq_timeout: SimTime,
    /// Send-buffer capacity in packets.
    pub buffer_capacity: usize,
    /// Buffered packets older than this are dropped.
    pub buffer_max_age: SimTime,
    /// Initial hop budget for data packets.
    pub data_ttl: u32,
    /// How long an invalidated entry keeps its sequence-number memory
    /// before being garbage-collected.
    pub gc_lifetime: SimTime,
    /// Conservative variant: route replies are forwarded only by
    /// designated neighbors (the multi-tuple shortcut is disabled) and a
    /// retransmitted request refreshes only the request id, not the
    /// recorded precursor.
    pub strict_mode: bool,
}

impl Default for ProtocolParams {
    fn default() -> Self {
        ProtocolParams {
            route_lifetime: SimTime::from_secs(10),
            prt_lifetime: SimTime::from_secs(6),
            hello_interval: SimTime::from_secs(1),
            allowed_hello_loss: 2,
            rreq_retries: 2,
            rreq_timeout: SimTime::from_secs(2),
            buffer_capacity: 64,
            buffer_max_age: SimTime::from_secs(30),
            data_ttl: 64,
            gc_lifetime: SimTime::from_secs(60),
            strict_mode: false,
        }
    }
}

impl ProtocolParams {
    /// Lifetime granted to a one-hop route learned from a neighbor's
    /// beacon (or piggybacked sequence number). Three beacon periods;
    /// with beacons disabled, the ordinary route lifetime.
    pub fn neighbor_hold(&self) -> SimTime {
        if self.hello_interval == SimTime::ZERO {
            self.route_lifetime
        } else {
            self.hello_interval.mul(3)
        }
    }

    /// Silence span after which a neighbor is declared unreachable.
    pub fn neighbor_timeout(&self) -> SimTime {
        self.hello_interval.mul(u64::from(self.allowed_hello_loss))
    }
}

/// Monotone per-node sequence counter. A reply from the destination
/// must outrank both the destination's current number and whatever the
/// requester last knew, strictly — consecutive requests therefore get
/// strictly increasing replies.
pub fn next_reply_seq(own_seq: &mut u32, requested: u32) -> u32 {
    *own_seq = (*own_seq).max(requested) + 1;
    *own_seq
}

/// Bounded FIFO of data packets awaiting a route, oldest first.
#[derive(Debug, Clone)]
pub struct SendBuffer {
    queue: VecDeque<(DataPacket, SimTime)>,
    capacity: usize,
}

impl SendBuffer {
    pub fn new(capacity: usize) -> Self {
        SendBuffer {
            queue: VecDeque::new(),
            capacity,
        }
    }

    /// Enqueues a packet; if the buffer is full, the oldest packet is
    /// evicted and returned so the caller can account for the drop.
    pub fn push(&mut self, pkt: DataPacket, now: SimTime) -> Option<DataPacket> {
        let evicted = if self.queue.len() == self.capacity {
            self.queue.pop_front().map(|(p, _)| p)
        } else {
            None
        };
        self.queue.push_back((pkt, now));
        evicted
    }

    /// Removes and returns packets that have waited longer than `max_age`.
    pub fn drain_expired(&mut self, now: SimTime, max_age: SimTime) -> Vec<DataPacket> {
        let mut expired = Vec::new();
        self.queue.retain(|(pkt, enqueued)| {
            if now.saturating_sub(*enqueued) > max_age {
                expired.push(pkt.clone());
                false
            } else {
                true
            }
        });
        expired
    }

    /// Removes and returns all packets headed for `dest`, in queue
    /// order, paired with their enqueue times.
    pub fn take_for(&mut self, dest: NodeId) -> Vec<(DataPacket, SimTime)> {
        let mut taken = Vec::new();
        self.queue.retain(|(pkt, enqueued)| {
            if pkt.dest == dest {
                taken.push((pkt.clone(), *enqueued));
                false
            } else {
                true
            }
        });
        taken
    }

    pub fn has_for(&self, dest: NodeId) -> bool {
        self.queue.iter().any(|(pkt, _)| pkt.dest == dest)
    }

    pub fn len(&self) -> usize {
        self.queue.len()
    }

    pub fn is_empty(&self) -> bool {
        self.queue.is_empty()
    }
}

/// Tracks when each neighbor was last heard (any packet counts).
#[derive(Debug, Clone, Default)]
pub struct NeighborTracker {
    last_heard: BTreeMap<NodeId, SimTime>,
}

impl NeighborTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn note(&mut self, neighbor: NodeId, now: SimTime) {
        let at = self.last_heard.entry(neighbor).or_insert(now);
        *at = (*at).max(now);
    }

    pub fn forget(&mut self, neighbor: NodeId) {
        self.last_heard.remove(&neighbor);
    }

    /// Removes and returns neighbors silent for longer than `timeout`
    /// (inclusive boundary: exactly `timeout` of silence is still alive).
    pub fn timed_out(&mut self, now: SimTime, timeout: SimTime) -> Vec<NodeId> {
        let gone: Vec<NodeId> = self
            .last_heard
            .iter()
            .filter(|(_, &heard)| now.saturating_sub(heard) > timeout)
            .map(|(&n, _)| n)
            .collect();
        for n in &gone {
            self.last_heard.remove(n);
        }
        gone
    }
}

/// One outstanding route discovery at its origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PendingDiscovery {
    pub rid: u32,
    pub retries_left: u32,
    pub deadline: SimTime,
}

/// The contract every routing engine implements. The simulation kernel
/// is the only caller; it feeds receptions, timer ticks and link-layer
/// feedback, and transmits whatever comes back.
pub trait RoutingEngine {
    fn id(&self) -> NodeId;

    /// A control packet from `from` arrived.
    fn on_signaling(&mut self, from: NodeId, pkt: &SignalingPacket, now: SimTime) -> NodeOutput;

    /// A data packet from neighbor `from` arrived.
    fn on_data(&mut self, from: NodeId, pkt: DataPacket, now: SimTime) -> NodeOutput;

    /// The local application wants `pkt` carried to its destination.
    fn send(&mut self, pkt: DataPacket, now: SimTime) -> NodeOutput;

    /// Periodic timer: expiries, retries, beacons, neighbor liveness.
    fn on_tick(&mut self, now: SimTime) -> NodeOutput;

    /// The link layer failed to hand `pkt` to `next_hop`.
    fn on_link_failure(&mut self, next_hop: NodeId, pkt: DataPacket, now: SimTime) -> NodeOutput;

    fn routing_table(&self) -> &RoutingTable;
}

/// Which protocol a node runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EngineKind {
    Adara,
    Aodv,
}

impl EngineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EngineKind::Adara => "adara",
            EngineKind::Aodv => "aodv",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "adara" => Some(EngineKind::Adara),
            "aodv" => Some(EngineKind::Aodv),
            _ => None,
        }
    }
}

impl std::fmt::Display for EngineKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Static dispatch over the two engines.
#[derive(Debug, Clone)]
pub enum Engine {
    Adara(crate::adara::AdaraNode),
    Aodv(crate::aodv::AodvNode),
}

impl Engine {
    pub fn new(kind: EngineKind, id: NodeId, params: ProtocolParams) -> Self {
        match kind {
            EngineKind::Adara => Engine::Adara(crate::adara::AdaraNode::new(id, params)),
            EngineKind::Aodv => Engine::Aodv(crate::aodv::AodvNode::new(id, params)),
        }
    }
}

macro_rules! dispatch {
    ($self:ident, $node:ident => $body:expr) => {
        match $self {
            Engine::Adara($node) => $body,
            Engine::Aodv($node) => $body,
        }
    };
}

impl RoutingEngine for Engine {
    fn id(&self) -> NodeId {
        dispatch!(self, n => n.id())
    }

    fn on_signaling(&mut self, from: NodeId, pkt: &SignalingPacket, now: SimTime) -> NodeOutput {
        dispatch!(self, n => n.on_signaling(from, pkt, now))
    }

    fn on_data(&mut self, from: NodeId, pkt: DataPacket, now: SimTime) -> NodeOutput {
        dispatch!(self, n => n.on_data(from, pkt, now))
    }

    fn send(&mut self, pkt: DataPacket, now: SimTime) -> NodeOutput {
        dispatch!(self, n => n.send(pkt, now))
    }

    fn on_tick(&mut self, now: SimTime) -> NodeOutput {
        dispatch!(self, n => n.on_tick(now))
    }

    fn on_link_failure(&mut self, next_hop: NodeId, pkt: DataPacket, now: SimTime) -> NodeOutput {
        dispatch!(self, n => n.on_link_failure(next_hop, pkt, now))
    }

    fn routing_table(&self) -> &RoutingTable {
        dispatch!(self, n => n.routing_table())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pkt(dest: u16, seq_no: u64) -> DataPacket {
        DataPacket {
            src: NodeId(0),
            dest: NodeId(dest),
            seq_no,
            created_at: SimTime::ZERO,
            size_bytes: 512,
            ttl: 64,
        }
    }

    #[test]
    fn buffer_evicts_oldest_at_capacity() {
        let mut buf = SendBuffer::new(64);
        let now = SimTime::ZERO;
        for i in 0..64 {
            assert!(buf.push(pkt(9, i), now).is_none());
        }
        let evicted = buf.push(pkt(9, 64), now).expect("oldest evicted");
        assert_eq!(evicted.seq_no, 0);
        assert_eq!(buf.len(), 64);
    }

    #[test]
    fn buffer_age_boundary_is_inclusive() {
        let mut buf = SendBuffer::new(8);
        let max_age = SimTime::from_secs(30);
        buf.push(pkt(9, 0), SimTime::ZERO);
        assert!(buf.drain_expired(max_age, max_age).is_empty());
        let dropped = buf.drain_expired(max_age + SimTime::from_micros(1), max_age);
        assert_eq!(dropped.len(), 1);
        assert!(buf.is_empty());
    }

    #[test]
    fn buffer_take_for_preserves_order_and_leaves_others() {
        let mut buf = SendBuffer::new(8);
        let now = SimTime::ZERO;
        buf.push(pkt(9, 0), now);
        buf.push(pkt(7, 1), now);
        buf.push(pkt(9, 2), now);
        let taken = buf.take_for(NodeId(9));
        assert_eq!(
            taken.iter().map(|(p, _)| p.seq_no).collect::<Vec<_>>(),
            vec![0, 2]
        );
        assert!(buf.has_for(NodeId(7)));
        assert!(!buf.has_for(NodeId(9)));
    }

    #[test]
    fn reply_seq_strictly_increases() {
        let mut own = 0;
        let a = next_reply_seq(&mut own, 0);
        let b = next_reply_seq(&mut own, 0);
        assert!(b > a);
        // A requester that somehow knew a higher number gets outranked.
        let c = next_reply_seq(&mut own, 10);
        assert_eq!(c, 11);
        assert_eq!(own, 11);
    }

    #[test]
    fn neighbor_timeout_boundary() {
        let mut nt = NeighborTracker::new();
        let timeout = SimTime::from_secs(2);
        nt.note(NodeId(3), SimTime::from_secs(1));
        assert!(nt.timed_out(SimTime::from_secs(3), timeout).is_empty());
        let gone = nt.timed_out(SimTime::from_secs(3) + SimTime::from_micros(1), timeout);
        assert_eq!(gone, vec![NodeId(3)]);
        // Already removed.
        assert!(nt.timed_out(SimTime::from_secs(10), timeout).is_empty());
    }

    #[test]
    fn neighbor_hold_falls_back_when_hellos_are_off() {
        let mut p = ProtocolParams::default();
        assert_eq!(p.neighbor_hold(), SimTime::from_secs(3));
        assert_eq!(p.neighbor_timeout(), SimTime::from_secs(2));
        p.hello_interval = SimTime::ZERO;
        assert_eq!(p.neighbor_hold(), p.route_lifetime);
    }
}
