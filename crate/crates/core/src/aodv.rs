//! Reference on-demand routing engine, for head-to-head comparison with
//! the aggregation engine.
//!
//! Classic behavior: every router remembers which (source, broadcast id)
//! floods it has seen and silently drops replicas; the first copy of a
//! request is re-flooded; the destination (or any node with a
//! fresh-enough route) answers with a unicast reply that retraces the
//! reverse route hop by hop; route errors travel only to the precursor
//! neighbors recorded while replies were forwarded. Hello beacons are
//! strictly periodic — other transmissions do not replace them.

use std::collections::BTreeMap;

use crate::engine::{
    next_reply_seq, DropReason, Emission, NeighborTracker, NodeOutput, PendingDiscovery,
    ProtocolParams, RoutingEngine, SendBuffer,
};
use crate::messages::{DataPacket, Hello, NodeId, Rerr, Rreq, Rrep, SignalingPacket};
use crate::route_state::{BrokenRoute, RoutingTable};
use crate::time::SimTime;

/// One router running the reference protocol.
#[derive(Debug, Clone)]
pub struct AodvNode {
    id: NodeId,
    /// Own destination sequence number; also carried in hellos.
    seq: u32,
    /// Broadcast-id counter for originated requests.
    next_bid: u32,
    rt: RoutingTable,
    /// Seen floods: (source, broadcast id) → record expiry.
    records: BTreeMap<(NodeId, u32), SimTime>,
    buffer: SendBuffer,
    pending: BTreeMap<NodeId, PendingDiscovery>,
    neighbors: NeighborTracker,
    next_hello_at: SimTime,
    params: ProtocolParams,
}

impl AodvNode {
    pub fn new(id: NodeId, params: ProtocolParams) -> Self {
        let next_hello_at = if params.hello_interval == SimTime::ZERO {
            SimTime::MAX
        } else {
            params.hello_interval
        };
        AodvNode {
            id,
            seq: 0,
            next_bid: 1,
            rt: RoutingTable::new(id),
            records: BTreeMap::new(),
            buffer: SendBuffer::new(params.buffer_capacity),
            pending: BTreeMap::new(),
            neighbors: NeighborTracker::new(),
            next_hello_at,
            params,
        }
    }

    fn bump_seq(&mut self) {
        self.seq += 1;
        self.rt.set_self_seq(self.seq);
    }

    fn originate_discovery(&mut self, dest: NodeId, retries_left: u32, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        self.bump_seq();
        let rid = self.next_bid;
        self.next_bid += 1;
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
            .push(Emission::Broadcast(SignalingPacket::Rreq(rreq)));
        out
    }

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

    /// Route errors go only to the neighbors that actually depended on
    /// the broken routes; with nobody to tell, nothing is sent.
    fn report_broken(&mut self, broken: &[BrokenRoute], now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        let pairs: Vec<(NodeId, u32)> = broken
            .iter()
            .filter(|b| !b.precursors.is_empty() || self.buffer.has_for(b.dest))
            .map(|b| (b.dest, b.seq))
            .collect();
        let mut to: Vec<NodeId> = broken
            .iter()
            .flat_map(|b| b.precursors.iter().copied())
            .collect();
        to.sort_unstable();
        to.dedup();
        if !pairs.is_empty() && !to.is_empty() {
            let rerr = Rerr::new(pairs, self.seq).expect("non-empty by construction");
            out.emissions.push(Emission::Targeted {
                to,
                pkt: SignalingPacket::Rerr(rerr),
            });
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
        if rreq.origin == self.id {
            return out;
        }
        // Flood suppression comes first: one record per (source, id).
        let key = (rreq.origin, rreq.rid);
        if self.records.contains_key(&key) {
            return out;
        }
        self.records
            .insert(key, now.saturating_add(self.params.prt_lifetime));
        self.rt.upsert(
            rreq.origin,
            from,
            rreq.hops_to_origin + 1,
            rreq.origin_seq,
            now,
            self.params.route_lifetime,
        );
        out.merge(self.flush_buffer(rreq.origin, now));
        if rreq.dest == self.id {
            let dest_seq = next_reply_seq(&mut self.seq, rreq.dest_seq);
            self.rt.set_self_seq(self.seq);
            let rrep = Rrep {
                dest: self.id,
                dest_seq,
                hops_to_dest: 0,
                ldn: Vec::new(),
                origin: Some(rreq.origin),
                hsn: self.seq,
            };
            out.emissions.push(Emission::Targeted {
                to: vec![from],
                pkt: SignalingPacket::Rrep(rrep),
            });
            return out;
        }
        if let Some(entry) = self.rt.valid_route(rreq.dest, now) {
            if entry.seq >= rreq.dest_seq {
                let (dest_seq, hops_to_dest) = (entry.seq, entry.hops);
                self.rt.add_precursor(rreq.dest, from);
                let rrep = Rrep {
                    dest: rreq.dest,
                    dest_seq,
                    hops_to_dest,
                    ldn: Vec::new(),
                    origin: Some(rreq.origin),
                    hsn: self.seq,
                };
                out.emissions.push(Emission::Targeted {
                    to: vec![from],
                    pkt: SignalingPacket::Rrep(rrep),
                });
                return out;
            }
        }
        let fwd = Rreq {
            hops_to_origin: rreq.hops_to_origin + 1,
            hsn: self.seq,
            ..rreq.clone()
        };
        out.emissions
            .push(Emission::Broadcast(SignalingPacket::Rreq(fwd)));
        out
    }

    fn handle_rrep(&mut self, from: NodeId, rrep: &Rrep, now: SimTime) -> NodeOutput {
        let mut out = NodeOutput::default();
        // Replies here always carry the requester; one without it has
        // nowhere to go.
        let Some(origin) = rrep.origin else {
            return out;
        };
        if rrep.dest == self.id {
            return out;
        }
        let updated = self.rt.upsert(
            rrep.dest,
            from,
            rrep.hops_to_dest + 1,
            rrep.dest_seq,
            now,
            self.params.route_lifetime,
        );
        out.merge(self.flush_buffer(rrep.dest, now));
        if origin == self.id || !updated {
            // Consumed at the requester; a copy that taught us nothing
            // new is never forwarded (only the first counts).
            return out;
        }
        let Some(reverse) = self.rt.valid_route(origin, now) else {
            // Reverse route evaporated; the requester's retry will redo
            // the discovery.
            return out;
        };
        let to = reverse.next_hop;
        // The upstream node routes through us now; remember both
        // directions for error reporting.
        self.rt.add_precursor(rrep.dest, to);
        self.rt.add_precursor(origin, from);
        self.rt.refresh(origin, now, self.params.route_lifetime);
        let fwd = Rrep {
            dest: rrep.dest,
            dest_seq: rrep.dest_seq,
            hops_to_dest: rrep.hops_to_dest + 1,
            ldn: Vec::new(),
            origin: Some(origin),
            hsn: self.seq,
        };
        out.emissions.push(Emission::Targeted {
            to: vec![to],
            pkt: SignalingPacket::Rrep(fwd),
        });
        out
    }

    fn handle_rerr(&mut self, from: NodeId, rerr: &Rerr, now: SimTime) -> NodeOutput {
        let mut broken = Vec::new();
        for (dest, advertised) in &rerr.unreachable {
            let through_sender = self
                .rt
                .entry(*dest)
                .is_some_and(|e| e.valid && e.next_hop == from);
            if through_sender {
                if let Some(b) = self.rt.invalidate_route_with_floor(*dest, *advertised, now) {
                    broken.push(b);
                }
            }
        }
        self.report_broken(&broken, now)
    }
}

impl RoutingEngine for AodvNode {
    fn id(&self) -> NodeId {
        self.id
    }

    fn on_signaling(&mut self, from: NodeId, pkt: &SignalingPacket, now: SimTime) -> NodeOutput {
        self.neighbors.note(from, now);
        let mut out = match pkt {
            SignalingPacket::Hello(h) => {
                // Only explicit beacons install one-hop routes here.
                self.rt
                    .process_hello(from, h.seq, now, self.params.neighbor_hold());
                NodeOutput::default()
            }
            SignalingPacket::Rreq(r) => self.handle_rreq(from, r, now),
            SignalingPacket::Rrep(r) => self.handle_rrep(from, r, now),
            SignalingPacket::Rerr(r) => self.handle_rerr(from, r, now),
        };
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
        // No route at a relay: tell whoever depends on us, and at least
        // the neighbor that handed us the packet.
        let seq_memory = self.rt.entry(pkt.dest).map_or(0, |e| e.seq);
        let mut to: Vec<NodeId> = self
            .rt
            .entry(pkt.dest)
            .map(|e| e.precursors.iter().copied().collect())
            .unwrap_or_default();
        if !to.contains(&from) {
            to.push(from);
        }
        to.sort_unstable();
        let rerr = Rerr::new(vec![(pkt.dest, seq_memory)], self.seq).expect("one entry");
        out.emissions.push(Emission::Targeted {
            to,
            pkt: SignalingPacket::Rerr(rerr),
        });
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
        self.rt.expire(now, self.params.gc_lifetime);
        self.records.retain(|_, expiry| now <= *expiry);
        for pkt in self
            .buffer
            .drain_expired(now, self.params.buffer_max_age)
        {
            out.dropped.push((pkt, DropReason::BufferExpired));
        }
        if self.params.hello_interval > SimTime::ZERO {
            let timeout = self.params.neighbor_timeout();
            for neighbor in self.neighbors.timed_out(now, timeout) {
                let broken = self.rt.invalidate_via(neighbor, None, now);
                out.merge(self.report_broken(&broken, now));
            }
        }
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
        // Beacons are unconditional here: they fire on their grid no
        // matter what else the node transmitted.
        if self.params.hello_interval > SimTime::ZERO && now >= self.next_hello_at {
            while now >= self.next_hello_at {
                self.next_hello_at = self.next_hello_at + self.params.hello_interval;
            }
            let hello = SignalingPacket::Hello(Hello { seq: self.seq });
            out.emissions.push(Emission::Broadcast(hello));
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

#[cfg(test)]
mod tests {
    use super::*;

    fn n(id: u16) -> NodeId {
        NodeId(id)
    }

    fn params_no_hello() -> ProtocolParams {
        ProtocolParams {
            hello_interval: SimTime::ZERO,
            ..ProtocolParams::default()
        }
    }

    fn data(src: u16, dest: u16, seq_no: u64, now: SimTime) -> DataPacket {
        DataPacket {
            src: NodeId(src),
            dest: NodeId(dest),
            seq_no,
            created_at: now,
            size_bytes: 512,
            ttl: 64,
        }
    }

    fn rreq(origin: u16, rid: u32, dest: u16, ho: u32) -> SignalingPacket {
        SignalingPacket::Rreq(Rreq {
            rid,
            origin: NodeId(origin),
            origin_seq: 1,
            dest: NodeId(dest),
            dest_seq: 0,
            hops_to_origin: ho,
            hsn: 1,
        })
    }

    #[test]
    fn first_copy_forwards_then_replicas_are_dropped() {
        let mut node = AodvNode::new(n(3), params_no_hello());
        let now = SimTime::from_millis(6);
        let out = node.on_signaling(n(0), &rreq(0, 1, 9, 0), now);
        assert!(matches!(
            &out.emissions[..],
            [Emission::Broadcast(SignalingPacket::Rreq(r))] if r.hops_to_origin == 1
        ));
        assert!(node.rt.valid_route(n(0), now).is_some(), "reverse route");
        // Same flood via another neighbor: silence, state untouched.
        let out = node.on_signaling(n(4), &rreq(0, 1, 9, 2), now);
        assert!(out.emissions.is_empty());
        assert_eq!(node.rt.valid_route(n(0), now).unwrap().next_hop, n(0));
        // A different origin's flood for the same destination is NOT
        // absorbed here: it floods too.
        let out = node.on_signaling(n(4), &rreq(2, 1, 9, 1), now);
        assert_eq!(out.emissions.len(), 1);
    }

    #[test]
    fn destination_unicasts_reply_to_the_asking_neighbor() {
        let mut node = AodvNode::new(n(9), params_no_hello());
        let now = SimTime::from_millis(8);
        let out = node.on_signaling(n(5), &rreq(0, 1, 9, 2), now);
        match &out.emissions[..] {
            [Emission::Targeted { to, pkt: SignalingPacket::Rrep(r) }] => {
                assert_eq!(to, &vec![n(5)]);
                assert_eq!(r.origin, Some(n(0)));
                assert_eq!(r.hops_to_dest, 0);
                assert!(r.dest_seq > 0);
                assert!(r.ldn.is_empty(), "no designated neighbors in this engine");
            }
            other => panic!("expected one unicast reply, got {other:?}"),
        }
    }

    #[test]
    fn fresh_route_holder_replies_instead_of_forwarding() {
        let mut node = AodvNode::new(n(3), params_no_hello());
        let now = SimTime::from_millis(6);
        // Give the node a fresh route to 9 via 5.
        node.on_signaling(
            n(5),
            &SignalingPacket::Rrep(Rrep {
                dest: n(9),
                dest_seq: 4,
                hops_to_dest: 1,
                ldn: Vec::new(),
                origin: Some(n(3)),
                hsn: 1,
            }),
            now,
        );
        let out = node.on_signaling(n(0), &rreq(0, 1, 9, 0), now);
        match &out.emissions[..] {
            [Emission::Targeted { to, pkt: SignalingPacket::Rrep(r) }] => {
                assert_eq!(to, &vec![n(0)]);
                assert_eq!((r.dest_seq, r.hops_to_dest), (4, 2));
            }
            other => panic!("expected intermediate reply, got {other:?}"),
        }
        // The asker is now a precursor of the route it will use.
        assert!(node.rt.entry(n(9)).unwrap().precursors.contains(&n(0)));
    }

    #[test]
    fn reply_retraces_reverse_route_and_records_precursors() {
        let mut node = AodvNode::new(n(5), params_no_hello());
        let now = SimTime::from_millis(7);
        // Reverse route to origin 0 via neighbor 3 (the flood passed by).
        node.on_signaling(n(3), &rreq(0, 1, 9, 1), now);
        let rrep = SignalingPacket::Rrep(Rrep {
            dest: n(9),
            dest_seq: 1,
            hops_to_dest: 0,
            ldn: Vec::new(),
            origin: Some(n(0)),
            hsn: 1,
        });
        let out = node.on_signaling(n(9), &rrep, now + SimTime::from_millis(1));
        match &out.emissions[..] {
            [Emission::Targeted { to, pkt: SignalingPacket::Rrep(r) }] => {
                assert_eq!(to, &vec![n(3)], "next hop on the reverse route");
                assert_eq!(r.hops_to_dest, 1);
                assert_eq!(r.origin, Some(n(0)));
            }
            other => panic!("expected forwarded reply, got {other:?}"),
        }
        assert!(node.rt.entry(n(9)).unwrap().precursors.contains(&n(3)));
        // An equal-seq equal-hop copy teaches nothing and is dropped.
        let dup = SignalingPacket::Rrep(Rrep {
            dest: n(9),
            dest_seq: 1,
            hops_to_dest: 0,
            ldn: Vec::new(),
            origin: Some(n(0)),
            hsn: 1,
        });
        let out = node.on_signaling(n(8), &dup, now + SimTime::from_millis(2));
        assert!(out.emissions.is_empty(), "only the first copy forwards");
    }

    #[test]
    fn requester_consumes_reply_and_flushes() {
        let mut node = AodvNode::new(n(0), params_no_hello());
        let t0 = SimTime::from_millis(5);
        node.send(data(0, 9, 0, t0), t0);
        let rrep = SignalingPacket::Rrep(Rrep {
            dest: n(9),
            dest_seq: 1,
            hops_to_dest: 2,
            ldn: Vec::new(),
            origin: Some(n(0)),
            hsn: 1,
        });
        let t1 = SimTime::from_millis(11);
        let out = node.on_signaling(n(3), &rrep, t1);
        assert!(matches!(
            &out.emissions[..],
            [Emission::Data { to, .. }] if *to == n(3)
        ));
        assert!(node.pending.is_empty());
    }

    #[test]
    fn rerr_goes_only_to_precursors() {
        let mut node = AodvNode::new(n(5), params_no_hello());
        let now = SimTime::from_millis(7);
        // Forwarded reply earlier: route to 9 via 9, precursor 3.
        node.on_signaling(n(3), &rreq(0, 1, 9, 1), now);
        node.on_signaling(
            n(9),
            &SignalingPacket::Rrep(Rrep {
                dest: n(9),
                dest_seq: 1,
                hops_to_dest: 0,
                ldn: Vec::new(),
                origin: Some(n(0)),
                hsn: 1,
            }),
            now,
        );
        // Upstream announces 9 unreachable through itself.
        let rerr = SignalingPacket::Rerr(Rerr::new(vec![(n(9), 7)], 1).unwrap());
        let out = node.on_signaling(n(9), &rerr, now + SimTime::from_millis(5));
        match &out.emissions[..] {
            [Emission::Targeted { to, pkt: SignalingPacket::Rerr(r) }] => {
                assert_eq!(to, &vec![n(3)]);
                assert_eq!(r.unreachable, vec![(n(9), 7)], "advertised floor adopted");
            }
            other => panic!("expected targeted error, got {other:?}"),
        }
        // With no matching route, an error is absorbed.
        let mut other = AodvNode::new(n(6), params_no_hello());
        let out = other.on_signaling(n(9), &rerr, now);
        assert!(out.emissions.is_empty());
    }

    #[test]
    fn hellos_are_strictly_periodic_and_unsuppressed() {
        let mut node = AodvNode::new(n(0), ProtocolParams::default());
        // A broadcast just before the beacon is due…
        node.send(data(0, 9, 0, SimTime::from_millis(900)), SimTime::from_millis(900));
        // …does not replace it.
        let out = node.on_tick(SimTime::from_secs(1));
        let hellos = out
            .emissions
            .iter()
            .filter(|e| matches!(e, Emission::Broadcast(SignalingPacket::Hello(_))))
            .count();
        assert_eq!(hellos, 1);
        let out = node.on_tick(SimTime::from_secs(2));
        assert!(out
            .emissions
            .iter()
            .any(|e| matches!(e, Emission::Broadcast(SignalingPacket::Hello(_)))));
    }

    #[test]
    fn link_failure_rediscovers_own_traffic() {
        let mut node = AodvNode::new(n(0), params_no_hello());
        let t0 = SimTime::from_secs(1);
        node.on_signaling(
            n(3),
            &SignalingPacket::Rrep(Rrep {
                dest: n(9),
                dest_seq: 1,
                hops_to_dest: 1,
                ldn: Vec::new(),
                origin: Some(n(0)),
                hsn: 1,
            }),
            t0,
        );
        let out = node.on_link_failure(n(3), data(0, 9, 0, t0), t0 + SimTime::from_millis(1));
        assert_eq!(node.buffer.len(), 1);
        assert!(out
            .emissions
            .iter()
            .any(|e| matches!(e, Emission::Broadcast(SignalingPacket::Rreq(_)))));
        // No precursors depended on the broken route, so no error went out.
        assert!(!out
            .emissions
            .iter()
            .any(|e| matches!(e, Emission::Targeted { pkt: SignalingPacket::Rerr(_), .. })));
    }

    #[test]
    fn discovery_exhaustion_drops_buffered_traffic() {
        let mut node = AodvNode::new(n(0), params_no_hello());
        let t0 = SimTime::from_secs(1);
        node.send(data(0, 9, 0, t0), t0);
        node.send(data(0, 9, 1, t0), t0);
        node.send(data(0, 9, 2, t0), t0);
        let mut t = t0;
        let mut dropped = Vec::new();
        for _ in 0..3 {
            t = t + SimTime::from_secs(2);
            dropped.extend(node.on_tick(t).dropped);
        }
        assert!(node.pending.is_empty());
        assert!(node.buffer.is_empty());
        assert_eq!(dropped.len(), 3);
        assert!(dropped
            .iter()
            .all(|(_, r)| *r == DropReason::DiscoveryFailed));
    }
}
