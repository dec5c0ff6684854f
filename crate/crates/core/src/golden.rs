//! A hand-laid ten-node reference scenario with a fully known outcome.
//!
//! Three source nodes (0, 1, 2) ask for routes to the same destination
//! (node 9) within a 1.5 ms window, so their floods overlap while the
//! first answers are still in flight. The topology is static, loss-free
//! and jitter-free, which makes every transmission, reply and delivery
//! exactly predictable — the scenario doubles as an executable worked
//! example and as the anchor for the signaling-count comparisons.
//!
//! Layout (1000 m × 600 m, 250 m radio disk):
//!
//! * node 3 funnels sources 0 and 2 toward the middle,
//! * nodes 4 and 5 form a triangle with 3; node 5 alone reaches 9,
//! * node 8 connects source 1 via 5,
//! * nodes 6 and 7 are quiet leaf neighbors of the destination — floods
//!   never reach them, but replies do.

use crate::engine::{EngineKind, ProtocolParams};
use crate::messages::NodeId;
use crate::scenario::{FlowSources, Scenario};
use crate::time::SimTime;

pub const NODE_COUNT: u16 = 10;

/// Node coordinates, indexed by node id.
pub const POSITIONS: [(f64, f64); NODE_COUNT as usize] = [
    (12.0, 458.0),  // 0: source
    (750.0, 20.0),  // 1: source
    (12.0, 142.0),  // 2: source
    (200.0, 300.0), // 3: relay shared by 0 and 2
    (322.0, 510.0), // 4: relay in the 3-4-5 triangle
    (445.0, 300.0), // 5: the only relay adjacent to 9
    (890.0, 240.0), // 6: leaf neighbor of 9
    (840.0, 530.0), // 7: leaf neighbor of 9
    (530.0, 110.0), // 8: relay connecting 1
    (680.0, 360.0), // 9: destination
];

/// The radio adjacency the positions are built to produce (pairs sorted,
/// lower id first). Tests re-derive adjacency from [`POSITIONS`] and
/// must get exactly this set.
pub const EXPECTED_EDGES: [(u16, u16); 10] = [
    (0, 3),
    (1, 8),
    (2, 3),
    (3, 4),
    (3, 5),
    (4, 5),
    (5, 8),
    (5, 9),
    (6, 9),
    (7, 9),
];

/// (source, destination, start) for the three scripted flows.
pub const FLOWS: [(u16, u16, u64); 3] = [(0, 9, 5_000), (1, 9, 6_000), (2, 9, 6_500)];

/// The scripted scenario, ready to run under either engine.
pub fn scenario(engine: EngineKind) -> Scenario {
    Scenario {
        engine,
        seed: 1,
        node_count: NODE_COUNT,
        area: (1000.0, 600.0),
        v_max: 0.0,
        pause: 0.0,
        duration: 0.05,
        flows: FLOWS.len() as u32,
        flow_rate: 15.0,
        packet_bytes: 512,
        on_time: 1.0,
        off_time: 1.0,
        hotspot_prob: 1.0,
        flow_sources: FlowSources::Distinct,
        start_spread: 0.0,
        range: 250.0,
        prop_delay: 0.001,
        jitter: 0.0,
        loss_prob: 0.0,
        tick_interval: 0.1,
        monitor_interval: 0.01,
        protocol: ProtocolParams {
            // Beacons off: the scripted window is 50 ms, and the point
            // is to watch discovery alone.
            hello_interval: SimTime::ZERO,
            ..ProtocolParams::default()
        },
        positions: Some(POSITIONS.to_vec()),
        preset_flows: Some(
            FLOWS
                .iter()
                .map(|&(s, d, us)| (NodeId(s), NodeId(d), SimTime(us)))
                .collect(),
        ),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::mobility::Point;

    fn dist(a: (f64, f64), b: (f64, f64)) -> f64 {
        Point { x: a.0, y: a.1 }.dist(Point { x: b.0, y: b.1 })
    }

    #[test]
    fn positions_realize_exactly_the_expected_adjacency() {
        let mut derived = Vec::new();
        for i in 0..NODE_COUNT {
            for j in (i + 1)..NODE_COUNT {
                if dist(POSITIONS[i as usize], POSITIONS[j as usize]) < 250.0 {
                    derived.push((i, j));
                }
            }
        }
        assert_eq!(derived, EXPECTED_EDGES.to_vec());
    }

    #[test]
    fn no_link_sits_on_the_range_boundary() {
        // Keep a safety margin so float noise can never flip an edge.
        for i in 0..NODE_COUNT {
            for j in (i + 1)..NODE_COUNT {
                let d = dist(POSITIONS[i as usize], POSITIONS[j as usize]);
                assert!(
                    (d - 250.0).abs() > 1.0,
                    "pair ({i}, {j}) sits {d:.2} m apart, too close to the disk edge"
                );
            }
        }
    }

    #[test]
    fn scenario_validates_under_both_engines() {
        scenario(EngineKind::Adara).validate().unwrap();
        scenario(EngineKind::Aodv).validate().unwrap();
    }

    #[test]
    fn scripted_flows_emit_exactly_one_packet_each() {
        let sc = scenario(EngineKind::Adara);
        let end = sc.end();
        for f in sc.build_flows() {
            assert!(f.emission_time(0) < end);
            assert!(f.emission_time(1) > end, "second packet falls after the horizon");
        }
    }
}
