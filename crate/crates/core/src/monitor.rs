//! Invariant monitors: the online routing-loop check and the offline
//! trace re-verification used by `check`.

use std::collections::BTreeMap;

use crate::messages::{NodeId, PacketKind};
use crate::route_state::RoutingTable;
use crate::time::SimTime;
use crate::trace::{self, TraceError, TraceEvent};

/// Scan the routing tables for a forwarding loop toward `dest`.
///
/// Valid, unexpired entries define a functional next-hop graph. A cycle
/// in that graph is a genuine protocol violation only when the
/// destination sequence numbers around it are all equal and no hop
/// increases the advertised distance — that is exactly the situation
/// the per-destination sequence-number ordering is supposed to make
/// impossible. Mixed-sequence cycles can appear transiently while an
/// update propagates and are not flagged.
///
/// Returns the offending cycle, if any.
pub fn find_loop(tables: &[&RoutingTable], dest: NodeId, now: SimTime) -> Option<Vec<NodeId>> {
    // next[u] = (next_hop, seq, hops) over live entries, destination excluded.
    let mut next: BTreeMap<u16, (NodeId, u32, u32)> = BTreeMap::new();
    for table in tables {
        let owner = table.owner();
        if owner == dest {
            continue;
        }
        if let Some(e) = table.entry(dest) {
            if e.valid && e.is_alive(now) {
                next.insert(owner.0, (e.next_hop, e.seq, e.hops));
            }
        }
    }
    // Three-color walk over the functional graph.
    const WHITE: u8 = 0;
    const GRAY: u8 = 1;
    const BLACK: u8 = 2;
    let mut color: BTreeMap<u16, u8> = next.keys().map(|&k| (k, WHITE)).collect();
    let starts: Vec<u16> = next.keys().copied().collect();
    for start in starts {
        if color[&start] != WHITE {
            continue;
        }
        let mut path = Vec::new();
        let mut cur = start;
        loop {
            match color.get(&cur).copied() {
                None | Some(BLACK) => break, // reached dest, a routeless node, or explored ground
                Some(GRAY) => {
                    // Found a cycle: the tail of `path` from `cur` onward.
                    let at = path.iter().position(|&p| p == cur).expect("gray is on path");
                    let cycle: Vec<u16> = path[at..].to_vec();
                    if is_ordering_violation(&cycle, &next) {
                        return Some(cycle.into_iter().map(NodeId).collect());
                    }
                    break;
                }
                Some(_) => {
                    // White: keep walking.
                    color.insert(cur, GRAY);
                    path.push(cur);
                    cur = next[&cur].0 .0;
                }
            }
        }
        for p in path {
            color.insert(p, BLACK);
        }
    }
    None
}

/// True when every node in the cycle advertises the same sequence
/// number and no step increases the hop count — the lexicographic
/// (seq, −hops) route ordering admits no such cycle.
fn is_ordering_violation(cycle: &[u16], next: &BTreeMap<u16, (NodeId, u32, u32)>) -> bool {
    let seq0 = next[&cycle[0]].1;
    if cycle.iter().any(|u| next[u].1 != seq0) {
        return false;
    }
    cycle.iter().enumerate().all(|(i, u)| {
        let v = cycle[(i + 1) % cycle.len()];
        next[&v].2 <= next[u].2
    })
}

/// Offline re-verification of a finished trace. Malformed lines are
/// hard errors; the returned list holds every invariant violation found
/// (empty means the trace is clean).
pub fn check_trace(text: &str) -> Result<Vec<String>, TraceError> {
    let lines = trace::parse(text)?;
    let mut violations = Vec::new();

    // Event times never go backwards.
    for w in lines.windows(2) {
        if w[1].time < w[0].time {
            violations.push(format!(
                "line {}: time {} precedes line {} time {}",
                w[1].lineno, w[1].time, w[0].lineno, w[0].time
            ));
        }
    }

    // Per-node sequence numbers on transmitted signaling never regress.
    let mut last_hsn: BTreeMap<u16, u32> = BTreeMap::new();
    // Each node transmits a given flood (origin, rid) at most once.
    let mut rreq_tx: BTreeMap<(u16, u16, u32), usize> = BTreeMap::new();
    for line in &lines {
        if !line.event.is_transmission() || line.kind == PacketKind::Data {
            continue;
        }
        let hsn = line.u32_field("hsn")?;
        if let Some(&prev) = last_hsn.get(&line.node.0) {
            if hsn < prev {
                violations.push(format!(
                    "line {}: node {} sequence number regressed {} -> {}",
                    line.lineno, line.node.0, prev, hsn
                ));
            }
        }
        last_hsn.insert(line.node.0, hsn);

        if line.kind == PacketKind::Rreq {
            let origin = line.node_field("origin")?;
            let rid = line.u32_field("rid")?;
            let count = rreq_tx.entry((line.node.0, origin.0, rid)).or_insert(0);
            *count += 1;
            if *count == 2 {
                violations.push(format!(
                    "line {}: node {} retransmitted request ({}, {})",
                    line.lineno, line.node.0, origin.0, rid
                ));
            }
        }
    }

    // Delivery accounting: every delivered packet was originated, is
    // delivered once, and never before it was created.
    let mut originated: BTreeMap<(u16, u16, u64), usize> = BTreeMap::new();
    for line in &lines {
        if line.event == TraceEvent::Origin {
            let key = (
                line.node_field("src")?.0,
                line.node_field("dest")?.0,
                line.u64_field("seq")?,
            );
            *originated.entry(key).or_insert(0) += 1;
        }
    }
    let mut delivered: BTreeMap<(u16, u16, u64), usize> = BTreeMap::new();
    let mut delivered_total: u64 = 0;
    for line in &lines {
        if line.event != TraceEvent::Deliver {
            continue;
        }
        let key = (
            line.node_field("src")?.0,
            line.node_field("dest")?.0,
            line.u64_field("seq")?,
        );
        let created = line.time_field("created")?;
        if created > line.time {
            violations.push(format!("line {}: negative end-to-end delay", line.lineno));
        }
        if !originated.contains_key(&key) {
            violations.push(format!(
                "line {}: delivery of packet ({}, {}, {}) that was never originated",
                line.lineno, key.0, key.1, key.2
            ));
        }
        let n = delivered.entry(key).or_insert(0);
        *n += 1;
        if *n == 2 {
            violations.push(format!(
                "line {}: packet ({}, {}, {}) delivered more than once",
                line.lineno, key.0, key.1, key.2
            ));
        }
        delivered_total += 1;
    }
    let sent_total: u64 = originated.values().map(|&c| c as u64).sum();
    if delivered_total > sent_total {
        violations.push(format!(
            "delivered {delivered_total} packets but only {sent_total} were sent"
        ));
    }

    Ok(violations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::messages::DataPacket;

    fn table_with(owner: u16, dest: u16, next: u16, hops: u32, seq: u32) -> RoutingTable {
        let mut t = RoutingTable::new(NodeId(owner));
        t.upsert(
            NodeId(dest),
            NodeId(next),
            hops,
            seq,
            SimTime::ZERO,
            SimTime::from_secs(10),
        );
        t
    }

    #[test]
    fn descending_chain_passes() {
        let a = table_with(0, 9, 1, 3, 5);
        let b = table_with(1, 9, 2, 2, 5);
        let c = table_with(2, 9, 9, 1, 5);
        let d = RoutingTable::new(NodeId(9));
        let tables = [&a, &b, &c, &d];
        assert_eq!(find_loop(&tables, NodeId(9), SimTime::from_secs(1)), None);
    }

    #[test]
    fn equal_seq_two_cycle_fails() {
        let a = table_with(0, 9, 1, 2, 5);
        let b = table_with(1, 9, 0, 2, 5);
        let tables = [&a, &b];
        let cycle = find_loop(&tables, NodeId(9), SimTime::from_secs(1)).unwrap();
        assert_eq!(cycle.len(), 2);
    }

    #[test]
    fn mixed_seq_cycle_is_tolerated_as_transient() {
        let a = table_with(0, 9, 1, 2, 6);
        let b = table_with(1, 9, 0, 2, 5);
        let tables = [&a, &b];
        assert_eq!(find_loop(&tables, NodeId(9), SimTime::from_secs(1)), None);
    }

    #[test]
    fn expired_entries_do_not_form_loops() {
        let a = table_with(0, 9, 1, 2, 5);
        let b = table_with(1, 9, 0, 2, 5);
        let tables = [&a, &b];
        // Entries live 10 s from t=0; probe long after expiry.
        assert_eq!(find_loop(&tables, NodeId(9), SimTime::from_secs(60)), None);
    }

    fn sample_packet(seq: u64) -> DataPacket {
        DataPacket {
            src: NodeId(0),
            dest: NodeId(9),
            seq_no: seq,
            created_at: SimTime::from_millis(5),
            size_bytes: 512,
            ttl: 64,
        }
    }

    #[test]
    fn clean_trace_has_no_violations() {
        let mut buf = String::new();
        let pkt = sample_packet(0);
        trace::emit_origin(&mut buf, SimTime::from_millis(5), &pkt);
        trace::emit_deliver(&mut buf, SimTime::from_millis(14), NodeId(9), &pkt);
        assert!(check_trace(&buf).unwrap().is_empty());
    }

    #[test]
    fn phantom_and_duplicate_deliveries_are_flagged() {
        let mut buf = String::new();
        let pkt = sample_packet(3);
        trace::emit_deliver(&mut buf, SimTime::from_millis(14), NodeId(9), &pkt);
        trace::emit_deliver(&mut buf, SimTime::from_millis(15), NodeId(9), &pkt);
        let v = check_trace(&buf).unwrap();
        assert!(v.iter().any(|m| m.contains("never originated")));
        assert!(v.iter().any(|m| m.contains("more than once")));
    }

    #[test]
    fn time_regression_and_hsn_regression_are_flagged() {
        let text = "1.000000\t0\tbcast\thello\thsn=5\n0.900000\t0\tbcast\thello\thsn=4\n";
        let v = check_trace(text).unwrap();
        assert!(v.iter().any(|m| m.contains("precedes")));
        assert!(v.iter().any(|m| m.contains("regressed")));
    }

    #[test]
    fn duplicate_flood_transmission_is_flagged() {
        let line = "0.005000\t3\tbcast\trreq\trid=1\torigin=0\toseq=1\tdest=9\tdseq=0\thops=1\thsn=0\n";
        let text = format!("{line}{line}");
        let v = check_trace(&text).unwrap();
        assert!(v.iter().any(|m| m.contains("retransmitted request")));
    }
}
