//! Run metrics: delivery ratio, end-to-end delay, signaling volume.
//!
//! The kernel tallies these online while it writes the trace, and
//! [`compute_metrics`] re-derives the same numbers from the trace text
//! alone. Both paths accumulate a [`Tallies`] and finalize it through
//! the same arithmetic, so agreement is exact — any divergence means
//! the trace and the run disagree about what happened.

use std::collections::BTreeMap;

use crate::messages::PacketKind;
use crate::time::SimTime;
use crate::trace::{self, TraceError, TraceEvent};

#[derive(Debug, Clone, PartialEq)]
pub struct RunMetrics {
    /// Data packets handed to routers by source applications.
    pub sent: u64,
    /// Data packets that reached their destination application.
    pub delivered: u64,
    /// delivered / sent; absent when nothing was sent.
    pub pdr: Option<f64>,
    /// Mean end-to-end delay in seconds, buffering included; absent
    /// when nothing was delivered.
    pub avg_delay_s: Option<f64>,
    pub rreq: u64,
    pub rrep: u64,
    pub rerr: u64,
    pub hello: u64,
    /// Wire bytes across all signaling transmissions.
    pub signaling_bytes: u64,
    /// Data-packet drops by reason.
    pub drops: BTreeMap<String, u64>,
}

impl RunMetrics {
    pub fn total_signaling(&self) -> u64 {
        self.rreq + self.rrep + self.rerr + self.hello
    }
}

/// Raw integer counters, finalized into [`RunMetrics`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Tallies {
    pub sent: u64,
    pub delivered: u64,
    pub delay_sum_us: u64,
    pub rreq: u64,
    pub rrep: u64,
    pub rerr: u64,
    pub hello: u64,
    pub signaling_bytes: u64,
    pub drops: BTreeMap<String, u64>,
}

impl Tallies {
    pub fn count_signaling(&mut self, kind: PacketKind, wire_bytes: usize) {
        match kind {
            PacketKind::Rreq => self.rreq += 1,
            PacketKind::Rrep => self.rrep += 1,
            PacketKind::Rerr => self.rerr += 1,
            PacketKind::Hello => self.hello += 1,
            PacketKind::Data => unreachable!("data is not signaling"),
        }
        self.signaling_bytes += wire_bytes as u64;
    }

    pub fn count_delivery(&mut self, delay: SimTime) {
        self.delivered += 1;
        self.delay_sum_us += delay.as_micros();
    }

    pub fn count_drop(&mut self, reason: &str) {
        *self.drops.entry(reason.to_string()).or_default() += 1;
    }

    pub fn finalize(self) -> RunMetrics {
        let pdr = (self.sent > 0).then(|| self.delivered as f64 / self.sent as f64);
        let avg_delay_s = (self.delivered > 0)
            .then(|| self.delay_sum_us as f64 / self.delivered as f64 / 1_000_000.0);
        RunMetrics {
            sent: self.sent,
            delivered: self.delivered,
            pdr,
            avg_delay_s,
            rreq: self.rreq,
            rrep: self.rrep,
            rerr: self.rerr,
            hello: self.hello,
            signaling_bytes: self.signaling_bytes,
            drops: self.drops,
        }
    }
}

/// Recompute all metrics from a trace. Pure function of the text;
/// malformed lines are hard errors carrying their line number.
pub fn compute_metrics(trace_text: &str) -> Result<RunMetrics, TraceError> {
    let lines = trace::parse(trace_text)?;
    let mut t = Tallies::default();
    for line in &lines {
        match line.event {
            TraceEvent::Origin => t.sent += 1,
            TraceEvent::Deliver => {
                let created = line.time_field("created")?;
                if created > line.time {
                    return Err(TraceError {
                        line: line.lineno,
                        msg: "delivery precedes creation".to_string(),
                    });
                }
                t.count_delivery(line.time - created);
            }
            TraceEvent::Drop => {
                let reason = line.field("reason").unwrap_or("unknown");
                t.count_drop(reason);
            }
            TraceEvent::Bcast | TraceEvent::Ucast | TraceEvent::Mcast => {
                if line.kind != PacketKind::Data {
                    let pkt = trace::rebuild_signaling(line)?;
                    t.count_signaling(line.kind, pkt.wire_size());
                }
            }
        }
    }
    Ok(t.finalize())
}

/// Column layout for per-run CSV rows.
pub const CSV_HEADER: &str =
    "engine,seed,node_count,v_max,pause,flows,pdr,avg_delay_s,rreq,rrep,rerr,hello,total_signaling,bytes";

/// One CSV row. Absent metrics (a run with no traffic) become empty
/// cells rather than zeros, so they cannot be mistaken for measurements.
pub fn csv_row(sc: &crate::scenario::Scenario, m: &RunMetrics) -> String {
    let pdr = m.pdr.map(|v| format!("{v:.6}")).unwrap_or_default();
    let delay = m.avg_delay_s.map(|v| format!("{v:.6}")).unwrap_or_default();
    format!(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        sc.engine,
        sc.seed,
        sc.node_count,
        sc.v_max,
        sc.pause,
        sc.flows,
        pdr,
        delay,
        m.rreq,
        m.rrep,
        m.rerr,
        m.hello,
        m.total_signaling(),
        m.signaling_bytes
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::DropReason;
    use crate::messages::{DataPacket, Hello, NodeId, Rreq, SignalingPacket};

    fn data(seq: u64, created: SimTime) -> DataPacket {
        DataPacket {
            src: NodeId(0),
            dest: NodeId(9),
            seq_no: seq,
            created_at: created,
            size_bytes: 512,
            ttl: 64,
        }
    }

    #[test]
    fn pdr_is_delivered_over_sent() {
        let mut buf = String::new();
        let t0 = SimTime::from_millis(5);
        for i in 0..5 {
            trace::emit_origin(&mut buf, t0, &data(i, t0));
        }
        for i in 0..4 {
            trace::emit_deliver(&mut buf, t0 + SimTime::from_millis(9), NodeId(9), &data(i, t0));
        }
        trace::emit_drop(
            &mut buf,
            t0 + SimTime::from_secs(2),
            NodeId(0),
            &data(4, t0),
            DropReason::DiscoveryFailed,
        );
        let m = compute_metrics(&buf).unwrap();
        assert_eq!((m.sent, m.delivered), (5, 4));
        assert_eq!(m.pdr, Some(0.8));
        assert_eq!(m.avg_delay_s, Some(0.009));
        assert_eq!(m.drops.get("discovery_failed"), Some(&1));
    }

    #[test]
    fn instant_delivery_degenerates_to_propagation_delay() {
        let mut buf = String::new();
        let t0 = SimTime::from_secs(1);
        trace::emit_origin(&mut buf, t0, &data(0, t0));
        trace::emit_deliver(&mut buf, t0 + SimTime::from_millis(1), NodeId(9), &data(0, t0));
        let m = compute_metrics(&buf).unwrap();
        assert_eq!(m.avg_delay_s, Some(0.001));
    }

    #[test]
    fn signaling_counts_and_bytes_match_the_lines() {
        let mut buf = String::new();
        let t = SimTime::from_millis(5);
        let rreq = SignalingPacket::Rreq(Rreq {
            rid: 1,
            origin: NodeId(0),
            origin_seq: 1,
            dest: NodeId(9),
            dest_seq: 0,
            hops_to_origin: 0,
            hsn: 1,
        });
        let hello = SignalingPacket::Hello(Hello { seq: 2 });
        trace::emit_signaling(&mut buf, t, NodeId(0), None, &rreq);
        trace::emit_signaling(&mut buf, t, NodeId(3), None, &rreq);
        trace::emit_signaling(&mut buf, t, NodeId(0), None, &hello);
        let m = compute_metrics(&buf).unwrap();
        assert_eq!((m.rreq, m.hello, m.rrep, m.rerr), (2, 1, 0, 0));
        assert_eq!(m.total_signaling(), 3);
        assert_eq!(
            m.signaling_bytes,
            (2 * rreq.wire_size() + hello.wire_size()) as u64
        );
    }

    #[test]
    fn empty_trace_reports_absent_ratios() {
        let m = compute_metrics("").unwrap();
        assert_eq!(m.sent, 0);
        assert_eq!(m.pdr, None);
        assert_eq!(m.avg_delay_s, None);
    }

    #[test]
    fn csv_row_leaves_absent_values_empty() {
        let mut sc = crate::scenario::Scenario::default();
        sc.flows = 0;
        let m = Tallies::default().finalize();
        let row = csv_row(&sc, &m);
        let cells: Vec<&str> = row.split(',').collect();
        assert_eq!(cells.len(), CSV_HEADER.split(',').count());
        assert_eq!(cells[6], "", "pdr cell empty");
        assert_eq!(cells[7], "", "delay cell empty");
    }

    #[test]
    fn backwards_delivery_is_a_hard_error() {
        let mut buf = String::new();
        let t0 = SimTime::from_secs(1);
        trace::emit_deliver(&mut buf, SimTime::from_millis(1), NodeId(9), &data(0, t0));
        let err = compute_metrics(&buf).unwrap_err();
        assert_eq!(err.line, 1);
    }
}
