//! Per-node routing state: the routing table shared by both engines and
//! the pending request table used by the aggregation engine.

use std::collections::{BTreeMap, BTreeSet};

use crate::messages::NodeId;
use crate::time::SimTime;

/// One destination's entry in a routing table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RouteEntry {
    pub dest: NodeId,
    pub next_hop: NodeId,
    /// Distance to `dest` in hops (zero only for the self-route).
    pub hops: u32,
    /// Destination sequence number vouching for the entry's freshness.
    pub seq: u32,
    /// An entry can be present but invalid: it then only remembers the
    /// last known sequence number until garbage collection.
    pub valid: bool,
    /// Last instant at which the entry may be used.
    pub expires_at: SimTime,
    /// Neighbors known to route through us toward `dest`; they are the
    /// ones worth notifying when the route breaks.
    pub precursors: BTreeSet<NodeId>,
}

impl RouteEntry {
    /// Usable right now: marked valid and not expired. Expiry is
    /// inclusive — an entry is alive at exactly `expires_at` and dead
    /// one microsecond later.
    pub fn is_alive(&self, now: SimTime) -> bool {
        self.valid && now <= self.expires_at
    }
}

/// A route that was invalidated because its next hop vanished, reported
/// so the caller can assemble a route error.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BrokenRoute {
    pub dest: NodeId,
    /// Sequence number after the invalidation bump; receivers treat any
    /// stored entry at or below this as stale.
    pub seq: u32,
    pub precursors: Vec<NodeId>,
}

/// Destination-indexed routing table with freshness-gated updates.
#[derive(Debug, Clone)]
pub struct RoutingTable {
    owner: NodeId,
    entries: BTreeMap<NodeId, RouteEntry>,
}

impl RoutingTable {
    /// A fresh table holds only the trivial self-route (zero hops,
    /// never expires).
    pub fn new(owner: NodeId) -> Self {
        let mut entries = BTreeMap::new();
        entries.insert(
            owner,
            RouteEntry {
                dest: owner,
                next_hop: owner,
                hops: 0,
                seq: 0,
                valid: true,
                expires_at: SimTime::MAX,
                precursors: BTreeSet::new(),
            },
        );
        RoutingTable { owner, entries }
    }

    pub fn owner(&self) -> NodeId {
        self.owner
    }

    pub fn entry(&self, dest: NodeId) -> Option<&RouteEntry> {
        self.entries.get(&dest)
    }

    /// The entry for `dest` if it is usable at `now`.
    pub fn valid_route(&self, dest: NodeId, now: SimTime) -> Option<&RouteEntry> {
        self.entries.get(&dest).filter(|e| e.is_alive(now))
    }

    /// Offers the table a route `dest via next_hop` of length `hops`
    /// vouched for by `seq`. The offer is taken when it is strictly
    /// fresher (higher `seq`), or equally fresh but shorter, or equally
    /// fresh while the stored entry is unusable. Returns whether the
    /// table changed. Precursors survive an update; they describe who
    /// depends on us, not where the route points.
    pub fn upsert(
        &mut self,
        dest: NodeId,
        next_hop: NodeId,
        hops: u32,
        seq: u32,
        now: SimTime,
        lifetime: SimTime,
    ) -> bool {
        debug_assert_ne!(dest, self.owner, "the self-route is never replaced");
        let expires_at = now.saturating_add(lifetime);
        match self.entries.get_mut(&dest) {
            None => {
                self.entries.insert(
                    dest,
                    RouteEntry {
                        dest,
                        next_hop,
                        hops,
                        seq,
                        valid: true,
                        expires_at,
                        precursors: BTreeSet::new(),
                    },
                );
                true
            }
            Some(e) => {
                let fresher = seq > e.seq;
                let as_fresh = seq == e.seq;
                if fresher || (as_fresh && (hops < e.hops || !e.is_alive(now))) {
                    e.next_hop = next_hop;
                    e.hops = hops;
                    e.seq = seq;
                    e.valid = true;
                    e.expires_at = expires_at;
                    true
                } else {
                    false
                }
            }
        }
    }

    /// Absorbs a beacon (or piggybacked sequence number) heard directly
    /// from `sender`: a one-hop link to the sender is ground truth, so
    /// the entry is unconditionally revalidated and re-pointed at the
    /// sender — but the stored sequence number never moves backwards,
    /// which keeps freshness monotone.
    pub fn process_hello(&mut self, sender: NodeId, hsn: u32, now: SimTime, hold: SimTime) {
        if sender == self.owner {
            return;
        }
        let expires_at = now.saturating_add(hold);
        match self.entries.get_mut(&sender) {
            Some(e) => {
                e.next_hop = sender;
                e.hops = 1;
                e.seq = e.seq.max(hsn);
                e.valid = true;
                e.expires_at = e.expires_at.max(expires_at);
            }
            None => {
                self.entries.insert(
                    sender,
                    RouteEntry {
                        dest: sender,
                        next_hop: sender,
                        hops: 1,
                        seq: hsn,
                        valid: true,
                        expires_at,
                        precursors: BTreeSet::new(),
                    },
                );
            }
        }
    }

    /// Keeps the self-route's sequence number in step with the node's
    /// own counter (it never decreases).
    pub fn set_self_seq(&mut self, seq: u32) {
        if let Some(e) = self.entries.get_mut(&self.owner) {
            e.seq = e.seq.max(seq);
        }
    }

    /// Extends the lifetime of a live entry that was just used to carry
    /// traffic. Never shortens it.
    pub fn refresh(&mut self, dest: NodeId, now: SimTime, lifetime: SimTime) {
        if let Some(e) = self.entries.get_mut(&dest) {
            if e.is_alive(now) && e.expires_at != SimTime::MAX {
                e.expires_at = e.expires_at.max(now.saturating_add(lifetime));
            }
        }
    }

    /// Records that `node` routes through us to reach `dest`.
    pub fn add_precursor(&mut self, dest: NodeId, node: NodeId) {
        if let Some(e) = self.entries.get_mut(&dest) {
            e.precursors.insert(node);
        }
    }

    /// Invalidates every live route that goes through `via` (or just the
    /// one to `only`, when given). Each invalidated entry has its
    /// sequence number bumped so the loss supersedes the stale value,
    /// and is reported along with the precursors that depended on it.
    pub fn invalidate_via(
        &mut self,
        via: NodeId,
        only: Option<NodeId>,
        now: SimTime,
    ) -> Vec<BrokenRoute> {
        let mut broken = Vec::new();
        for e in self.entries.values_mut() {
            if e.dest == self.owner || e.next_hop != via || !e.valid {
                continue;
            }
            if let Some(only) = only {
                if e.dest != only {
                    continue;
                }
            }
            e.valid = false;
            e.seq += 1;
            e.expires_at = now;
            broken.push(BrokenRoute {
                dest: e.dest,
                seq: e.seq,
                precursors: e.precursors.iter().copied().collect(),
            });
            e.precursors.clear();
        }
        broken
    }

    /// Marks a single route invalid in place (used when a route error
    /// names it). Returns the broken-route report if the entry was live.
    pub fn invalidate_route(&mut self, dest: NodeId, now: SimTime) -> Option<BrokenRoute> {
        self.invalidate_route_with_floor(dest, 0, now)
    }

    /// Like [`invalidate_route`](Self::invalidate_route), but the
    /// resulting sequence number is at least `floor_seq` — used when an
    /// upstream announcement already advertised a higher number for the
    /// loss than our own bump would produce.
    pub fn invalidate_route_with_floor(
        &mut self,
        dest: NodeId,
        floor_seq: u32,
        now: SimTime,
    ) -> Option<BrokenRoute> {
        let e = self.entries.get_mut(&dest)?;
        if dest == self.owner || !e.valid {
            return None;
        }
        e.valid = false;
        e.seq = (e.seq + 1).max(floor_seq);
        e.expires_at = now;
        let report = BrokenRoute {
            dest,
            seq: e.seq,
            precursors: e.precursors.iter().copied().collect(),
        };
        e.precursors.clear();
        Some(report)
    }

    /// Ages the table: live entries past their lifetime become invalid
    /// (silently — nobody was using them), and invalid entries are
    /// dropped entirely once they have lingered `gc_after` beyond their
    /// expiry, keeping their last sequence number available meanwhile.
    pub fn expire(&mut self, now: SimTime, gc_after: SimTime) {
        for e in self.entries.values_mut() {
            if e.valid && now > e.expires_at {
                e.valid = false;
            }
        }
        self.entries
            .retain(|_, e| e.valid || now <= e.expires_at.saturating_add(gc_after));
    }

    /// All entries in destination order, for traces and assertions.
    pub fn dump(&self) -> impl Iterator<Item = &RouteEntry> {
        self.entries.values()
    }
}

/// How the pending request table classified an incoming route request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregateOutcome {
    /// First pending request for this destination; forward the flood.
    NewEntry,
    /// A different origin joined an existing pending request; the flood
    /// for this destination is already underway, so do not forward.
    Aggregated,
    /// A known origin retried with a new request id; forward it so the
    /// retry reaches the destination even if the first attempt died.
    Retransmission,
    /// Exact copy of a request already recorded; ignore it entirely.
    Duplicate,
}

impl AggregateOutcome {
    /// Whether the engine should rebroadcast the request that produced
    /// this outcome.
    pub fn forwards(self) -> bool {
        matches!(
            self,
            AggregateOutcome::NewEntry | AggregateOutcome::Retransmission
        )
    }

    /// Whether the engine may answer the request (a duplicate was
    /// answered already when its first copy arrived).
    pub fn may_reply(self) -> bool {
        !matches!(self, AggregateOutcome::Duplicate)
    }
}

/// One origin's stake in a pending request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrtTuple {
    pub origin: NodeId,
    pub rid: u32,
    /// Neighbor the request arrived from; the reply must go back
    /// through it.
    pub precursor: NodeId,
}

#[derive(Debug, Clone)]
pub struct PrtEntry {
    /// Tuples in arrival order, at most one per origin.
    pub tuples: Vec<PrtTuple>,
    pub expires_at: SimTime,
}

/// Pending request table: per destination, the set of origins whose
/// route requests this node has seen but not yet answered, each with the
/// neighbor that relayed it. It is both a flood suppressor (later
/// requests for an in-flight destination are absorbed rather than
/// forwarded) and the source of designated-neighbor lists for replies.
#[derive(Debug, Clone, Default)]
pub struct PendingRequestTable {
    entries: BTreeMap<NodeId, PrtEntry>,
}

impl PendingRequestTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Classifies a request for `dest` from `origin` (request id `rid`)
    /// relayed by `precursor`, updating the table accordingly.
    ///
    /// `retx_updates_precursor` controls whether a retransmission also
    /// re-points the origin's tuple at the new relaying neighbor (the
    /// topology may have changed since the first attempt) or only
    /// refreshes the request id.
    pub fn aggregate(
        &mut self,
        dest: NodeId,
        origin: NodeId,
        rid: u32,
        precursor: NodeId,
        now: SimTime,
        lifetime: SimTime,
        retx_updates_precursor: bool,
    ) -> AggregateOutcome {
        // An exact (origin, rid) match anywhere means this very request
        // was already recorded — a flood replica arriving by another path.
        if self
            .entries
            .values()
            .flat_map(|e| &e.tuples)
            .any(|t| t.origin == origin && t.rid == rid)
        {
            return AggregateOutcome::Duplicate;
        }
        let expires_at = now.saturating_add(lifetime);
        match self.entries.get_mut(&dest) {
            Some(entry) => {
                entry.expires_at = entry.expires_at.max(expires_at);
                if let Some(t) = entry.tuples.iter_mut().find(|t| t.origin == origin) {
                    t.rid = rid;
                    if retx_updates_precursor {
                        t.precursor = precursor;
                    }
                    AggregateOutcome::Retransmission
                } else {
                    entry.tuples.push(PrtTuple {
                        origin,
                        rid,
                        precursor,
                    });
                    AggregateOutcome::Aggregated
                }
            }
            None => {
                self.entries.insert(
                    dest,
                    PrtEntry {
                        tuples: vec![PrtTuple {
                            origin,
                            rid,
                            precursor,
                        }],
                        expires_at,
                    },
                );
                AggregateOutcome::NewEntry
            }
        }
    }

    pub fn has_pending(&self, dest: NodeId) -> bool {
        self.entries.contains_key(&dest)
    }

    /// Number of origins currently waiting on `dest`.
    pub fn pending_count(&self, dest: NodeId) -> usize {
        self.entries.get(&dest).map_or(0, |e| e.tuples.len())
    }

    /// The precursor neighbors for `dest` in arrival order, first
    /// occurrence kept, without consuming the entry. Used by a replier
    /// to address its reply while leaving the entry to absorb late
    /// flood replicas.
    pub fn peek_precursors(&self, dest: NodeId) -> Vec<NodeId> {
        self.entries
            .get(&dest)
            .map(|e| dedup_in_order(e.tuples.iter().map(|t| t.precursor)))
            .unwrap_or_default()
    }

    /// Consumes the entry for `dest` and returns its precursor
    /// neighbors in arrival order, deduplicated, skipping `exclude`
    /// (the neighbor a reply was just heard from — addressing the reply
    /// back at it would only echo).
    pub fn take_precursors(&mut self, dest: NodeId, exclude: Option<NodeId>) -> Vec<NodeId> {
        self.entries
            .remove(&dest)
            .map(|e| {
                dedup_in_order(
                    e.tuples
                        .iter()
                        .map(|t| t.precursor)
                        .filter(|p| Some(*p) != exclude),
                )
            })
            .unwrap_or_default()
    }

    /// Drops entries whose lifetime has passed.
    pub fn expire(&mut self, now: SimTime) {
        self.entries.retain(|_, e| now <= e.expires_at);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entries in destination order, for assertions.
    pub fn dump(&self) -> impl Iterator<Item = (&NodeId, &PrtEntry)> {
        self.entries.iter()
    }
}

fn dedup_in_order(items: impl Iterator<Item = NodeId>) -> Vec<NodeId> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for item in items {
        if seen.insert(item) {
            out.push(item);
        }
    }
    out
}
