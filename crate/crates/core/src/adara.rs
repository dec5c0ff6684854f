//! Aggregation-based on-demand routing engine.
//!
//! Route discovery floods a route request toward the destination, but
//! every router funnels concurrent requests for the same destination
//! through its pending request table: the first request opens the flood,
//! later ones from other origins are absorbed into the pending entry
//! instead of being re-flooded. The route reply is broadcast once and
//! scoped by a list of designated neighbors — exactly the neighbors the
//! pending entries point back at — so one reply walks back along the
//! merged request tree and serves every waiting origin.
//!
//! Every control packet carries the sender's sequence number, so any
//! overheard signaling doubles as a hello beacon; explicit hellos are
//! emitted only when the node has been silent for a full beacon period.

use std::collections::BTreeMap;

use crate::engine::{
    next_reply_seq, DropReason, Emission, NeighborTracker, NodeOutput, PendingDiscovery,
    ProtocolParams, RoutingEngine, SendBuffer,
};
use crate::messages::{DataPacket, Hello, NodeId, Rerr, Rreq, Rrep, SignalingPacket};
use crate::route_state::{BrokenRoute, PendingRequestTable, RoutingTable};
use crate::time::SimTime;

/// One router running the aggregation protocol.
#[derive(Debug, Clone)]
pub struct AdaraNode {
    id: NodeId,
    /// The node's single sequence counter: it is both the freshness
    /// number other nodes store for routes to us and the hello sequence
    /// number piggybacked on everything we transmit. Keeping them unified
    /// means a route learned from overhearing us and a route learned from
    /// our reply can never disagree about which is fresher.
    seq: u32,
    next_rid: u32,
    rt: RoutingTable,
    prt: PendingRequestTable,
    buffer: SendBuffer,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    neighbors: NeighborTracker,
    next_hello_at: SimTime,
    params: ProtocolParams,
}

impl AdaraNode {
    pub fn new(id: NodeId, params: ProtocolParams) -> Self {
        let next_hello_at = if params.hello_interval == SimTime::ZERO {
            SimTime::MAX
        } else {
            params.hello_interval
        };
        AdaraNode {
            id,
            seq: 0,
            next_rid: 1,
            rt: RoutingTable::new(id),
            prt: PendingRequestTable::new(),
            buffer: SendBuffer::new(params.buffer_capacity),
            pending: BTreeMap::new(),
            neighbors: NeighborTracker::new(),
            next_hello_at,
            params,
        }
    }

    pub fn pending_requests(&self) -> &PendingRequestTable {
        &self.prt
    }

    /// Wraps a control packet for the air and counts it as this node's
    /// beacon: any broadcast proves we are alive, so the hello timer
    /// restarts from it.
    fn broadcast(&mut self, pkt: SignalingPacket, now: SimTime) -> Emission {
        if self.params.hello_interval > SimTime::ZERO {
            self.next_hello_at = now + self.params.hello_interval;
        }
        Emission::Broadcast(pkt)
    }

    fn bump_seq(&mut self) {
        self.seq += 1;
        self.rt.set_self_seq(self.seq);
    }

    /// Starts (or retries) a discovery for `dest` with a fresh request id.
    fn originate_discovery(&mut self, dest: NodeId, retries_left: u32, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        self.bump_seq();
        let rid = self.next_rid;
        self.next_rid += 1;
        let dest_seq = self.rt.entry(dest).map_or(0, |e| e.seq);
        self.pending.insert(
            dest,
            PendingDiscovery {
                rid,
                retries_left,
                deadline: now + self.params.rreq_timeout,
            },
        );
        let rreq = Rreq {
            rid,
            origin: self.id,
            origin_seq: self.seq,
            dest,
            dest_seq,
            hops_to_origin: 0,
            hsn: self.seq,
        };
        out.emissions
            .push(self.broadcast(SignalingPacket::Rreq(rreq), now));
        out
    }

    /// If a usable route to `dest` exists, declares any outstanding
    /// discovery satisfied and sends every buffered packet for it that
    /// is still young enough.
    fn flush_buffer(&mut self, dest: NodeId, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        if dest == self.id {
            return out;
        }
        let Some(entry) = self.rt.valid_route(dest, now) else {
            return out;
        };
        let next_hop = entry.next_hop;
        self.pending.remove(&dest);
        for (pkt, enqueued) in self.buffer.take_for(dest) {
            if now.saturating_sub(enqueued) > self.params.buffer_max_age {
                out.dropped.push((pkt, DropReason::BufferExpired));
            } else {
                self.rt.refresh(dest, now, self.params.route_lifetime);
                out.emissions.push(Emission::Data { to: next_hop, pkt });
            }
        }
        out
    }

    /// Announces broken routes that somebody else depends on, and
    /// restarts discovery for destinations we still hold traffic for.
    fn report_broken(&mut self, broken: &[BrokenRoute], now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        let pairs: Vec<(NodeId, u32)> = broken
            .iter()
            .filter(|b| !b.precursors.is_empty() || self.buffer.has_for(b.dest))
            .map(|b| (b.dest, b.seq))
            .collect();
        if !pairs.is_empty() {
            let rerr = Rerr::new(pairs, self.seq).expect("non-empty by construction");
            out.emissions
                .push(self.broadcast(SignalingPacket::Rerr(rerr), now));
        }
        for b in broken {
            if self.buffer.has_for(b.dest) && !self.pending.contains_key(&b.dest) {
                out.merge(self.originate_discovery(b.dest, self.params.rreq_retries, now));
            }
        }
        out
    }

    fn handle_rreq(&mut self, from: NodeId, rreq: &Rreq, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        // A replica of our own request that looped back: nothing to learn.
        if rreq.origin == self.id {
            return out;
        }
        let outcome = self.prt.aggregate(
            rreq.dest,
            rreq.origin,
            rreq.rid,
            from,
            now,
            self.params.prt_lifetime,
            !self.params.strict_mode,
        );
        // Reverse route to the origin (taken only if at least as fresh).
        self.rt.upsert(
            rreq.origin,
            from,
            rreq.hops_to_origin + 1,
            rreq.origin_seq,
            now,
            self.params.route_lifetime,
        );
        out.merge(self.flush_buffer(rreq.origin, now));
        if !outcome.may_reply() {
            return out;
        }
        if rreq.dest == self.id {
            // We are the destination: answer with a number that outranks
            // both our past replies and whatever the requester knew.
            let dest_seq = next_reply_seq(&mut self.seq, rreq.dest_seq);
            self.rt.set_self_seq(self.seq);
            let ldn = self.reply_ldn(rreq.dest, from);
            let rrep = Rrep {
                dest: self.id,
                dest_seq,
                hops_to_dest: 0,
                ldn,
                origin: None,
                hsn: self.seq,
            };
            out.emissions
                .push(self.broadcast(SignalingPacket::Rrep(rrep), now));
            return out;
        }
        if let Some(entry) = self.rt.valid_route(rreq.dest, now) {
            if entry.seq >= rreq.dest_seq {
                // Fresh enough to answer on the destination's behalf.
                let (dest_seq, hops_to_dest) = (entry.seq, entry.hops);
                let ldn = self.reply_ldn(rreq.dest, from);
                self.rt.add_precursor(rreq.dest, from);
                let rrep = Rrep {
                    dest: rreq.dest,
                    dest_seq,
                    hops_to_dest,
                    ldn,
                    origin: None,
                    hsn: self.seq,
                };
                out.emissions
                    .push(self.broadcast(SignalingPacket::Rrep(rrep), now));
                return out;
            }
        }
        if outcome.forwards() {
            let fwd = Rreq {
                hops_to_origin: rreq.hops_to_origin + 1,
                hsn: self.seq,
                ..rreq.clone()
            };
            out.emissions
                .push(self.broadcast(SignalingPacket::Rreq(fwd), now));
        }
        out
    }

    /// Designated neighbors for a reply we originate: everyone whose
    /// pending request we have recorded — at minimum the neighbor that
    /// just asked. The entry is left in place (peeked, not consumed) so
    /// late flood replicas still count as duplicates.
    fn reply_ldn(&self, dest: NodeId, asking_neighbor: NodeId) -> Vec<NodeId> {
        let mut ldn = self.prt.peek_precursors(dest);
        if !ldn.contains(&asking_neighbor) {
            ldn.push(asking_neighbor);
        }
        ldn
    }

    fn handle_rrep(&mut self, from: NodeId, rrep: &Rrep, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        // An echo of a reply about ourselves carries nothing new.
        if rrep.dest == self.id {
            return out;
        }
        // A reply staler than what we already know is dead on arrival.
        if let Some(e) = self.rt.entry(rrep.dest) {
            if rrep.dest_seq < e.seq {
                return out;
            }
        }
        self.rt.upsert(
            rrep.dest,
            from,
            rrep.hops_to_dest + 1,
            rrep.dest_seq,
            now,
            self.params.route_lifetime,
        );
        // Forward if we were designated, or (unless running strictly)
        // if more than one origin is waiting on us — a reply that only
        // grazes us still serves them. The neighbor that sent us this
        // reply is filtered out of the onward list: addressing it back
        // would merely echo.
        let designated = rrep.ldn.contains(&self.id);
        let multi_pending =
            !self.params.strict_mode && self.prt.pending_count(rrep.dest) > 1;
        if designated || multi_pending {
            let ldn = self.prt.take_precursors(rrep.dest, Some(from));
            if !ldn.is_empty() {
                for p in &ldn {
                    self.rt.add_precursor(rrep.dest, *p);
                }
                let fwd = Rrep {
                    dest: rrep.dest,
                    dest_seq: rrep.dest_seq,
                    hops_to_dest: rrep.hops_to_dest + 1,
                    ldn,
                    origin: None,
                    hsn: self.seq,
                };
                out.emissions
                    .push(self.broadcast(SignalingPacket::Rrep(fwd), now));
            }
        }
        out.merge(self.flush_buffer(rrep.dest, now));
        out
    }

    fn handle_rerr(&mut self, from: NodeId, rerr: &Rerr, now: SimTime) -> NodeOutput {
        // Invalidate exactly the routes that ran through the announcing
        // neighbor. The advertised sequence numbers are not consulted —
        // our own bump already supersedes the stale entry.
        let mut broken = Vec::new();
        for (dest, _advertised) in &rerr.unreachable {
            let through_sender = self
                .rt
                .entry(*dest)
                .is_some_and(|e| e.valid && e.next_hop == from);
            if through_sender {
                if let Some(b) = self.rt.invalidate_route(*dest, now) {
                    broken.push(b);
                }
            }
        }
        self.report_broken(&broken, now)
    }
}

impl RoutingEngine for AdaraNode {
    fn id(&self) -> NodeId {
        self.id
    }

    fn on_signaling(&mut self, from: NodeId, pkt: &SignalingPacket, now: SimTime) -> NodeOutput {
        self.neighbors.note(from, now);
        // Every control packet carries the sender's sequence number and
        // therefore doubles as a hello: refresh the one-hop route.
        self.rt
            .process_hello(from, pkt.hsn(), now, self.params.neighbor_hold());
        let mut out = match pkt {
            SignalingPacket::Hello(_) => NodeOutput::default(),
            SignalingPacket::Rreq(r) => self.handle_rreq(from, r, now),
            SignalingPacket::Rrep(r) => self.handle_rrep(from, r, now),
            SignalingPacket::Rerr(r) => self.handle_rerr(from, r, now),
        };
        // Hearing the neighbor may have opened a one-hop route something
        // was waiting on.
        out.merge(self.flush_buffer(from, now));
        out
    }

    fn on_data(&mut self, from: NodeId, mut pkt: DataPacket, now: SimTime) -> NodeOutput {
        self.neighbors.note(from, now);
        let mut out = NodeOutput::default();
        if pkt.dest == self.id {
            out.delivered.push(pkt);
            return out;
        }
        if let Some(entry) = self.rt.valid_route(pkt.dest, now) {
            if pkt.ttl == 0 {
                out.dropped.push((pkt, DropReason::TtlExpired));
                return out;
            }
            pkt.ttl -= 1;
            let to = entry.next_hop;
            self.rt.refresh(pkt.dest, now, self.params.route_lifetime);
            out.emissions.push(Emission::Data { to, pkt });
            return out;
        }
        // Relaying with no usable route: tell the neighborhood and drop.
        let seq_memory = self.rt.entry(pkt.dest).map_or(0, |e| e.seq);
        let rerr = Rerr::new(vec![(pkt.dest, seq_memory)], self.seq).expect("one entry");
        out.emissions
            .push(self.broadcast(SignalingPacket::Rerr(rerr), now));
        out.dropped.push((pkt, DropReason::NoRoute));
        out
    }

    fn send(&mut self, pkt: DataPacket, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        if pkt.dest == self.id {
            out.delivered.push(pkt);
            return out;
        }
        if let Some(entry) = self.rt.valid_route(pkt.dest, now) {
            let to = entry.next_hop;
            self.rt.refresh(pkt.dest, now, self.params.route_lifetime);
            out.emissions.push(Emission::Data { to, pkt });
            return out;
        }
        let dest = pkt.dest;
        if let Some(evicted) = self.buffer.push(pkt, now) {
            out.dropped.push((evicted, DropReason::BufferFull));
        }
        if !self.pending.contains_key(&dest) {
            out.merge(self.originate_discovery(dest, self.params.rreq_retries, now));
        }
        out
    }

    fn on_tick(&mut self, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        // Age the tables first so nothing below acts on stale state.
        self.rt.expire(now, self.params.gc_lifetime);
        self.prt.expire(now);
        for pkt in self
            .buffer
            .drain_expired(now, self.params.buffer_max_age)
        {
            out.dropped.push((pkt, DropReason::BufferExpired));
        }
        // Neighbor liveness is only meaningful when beacons are on.
        if self.params.hello_interval > SimTime::ZERO {
            let timeout = self.params.neighbor_timeout();
            for neighbor in self.neighbors.timed_out(now, timeout) {
                let broken = self.rt.invalidate_via(neighbor, None, now);
                out.merge(self.report_broken(&broken, now));
            }
        }
        // Discovery retries and failures.
        let due: Vec<NodeId> = self
            .pending
            .iter()
            .filter(|(_, p)| now >= p.deadline)
            .map(|(d, _)| *d)
            .collect();
        for dest in due {
            let p = self.pending.remove(&dest).expect("collected above");
            if p.retries_left == 0 {
                for (pkt, _) in self.buffer.take_for(dest) {
                    out.dropped.push((pkt, DropReason::DiscoveryFailed));
                }
            } else {
                out.merge(self.originate_discovery(dest, p.retries_left - 1, now));
            }
        }
        // Hello last: anything broadcast above already proved liveness,
        // and creating the emission reset the beacon timer.
        if self.params.hello_interval > SimTime::ZERO && now >= self.next_hello_at {
            self.bump_seq();
            let hello = SignalingPacket::Hello(Hello { seq: self.seq });
            out.emissions.push(self.broadcast(hello, now));
        }
        out
    }

    fn on_link_failure(&mut self, next_hop: NodeId, pkt: DataPacket, now: SimTime) -> NodeOutput {
        self.neighbors.forget(next_hop);
        let broken = self.rt.invalidate_via(next_hop, None, now);
        let mut out = NodeOutput::default();
        let own = pkt.src == self.id;
        let dest = pkt.dest;
        if own {
            // Our own traffic goes back in the buffer pending rediscovery.
            if let Some(evicted) = self.buffer.push(pkt, now) {
                out.dropped.push((evicted, DropReason::BufferFull));
            }
        } else {
            out.dropped.push((pkt, DropReason::NoRoute));
        }
        out.merge(self.report_broken(&broken, now));
        if own && !self.pending.contains_key(&dest) {
            out.merge(self.originate_discovery(dest, self.params.rreq_retries, now));
        }
        out
    }

    fn routing_table(&self) -> &RoutingTable {
        &self.rt
    }
}
