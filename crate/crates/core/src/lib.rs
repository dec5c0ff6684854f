//! Deterministic discrete-event simulation workbench for mobile ad hoc
//! network (MANET) routing protocols.
//!
//! The crate provides two on-demand routing engines sharing one node-level
//! interface:
//!
//! * [`adara::AdaraNode`] — an aggregation-based protocol that coalesces
//!   concurrent route requests for the same destination in a pending
//!   request table and answers them with a single broadcast route reply
//!   scoped by a list of designated neighbors.
//! * [`aodv::AodvNode`] — a classic reference protocol with per-source
//!   flood suppression and unicast route replies along reverse paths.
//!
//! Around the engines sits a discrete-event kernel ([`sim`]) with a
//! unit-disk radio, random-waypoint mobility and on/off traffic sources,
//! plus tracing ([`trace`]), metrics ([`metrics`]), invariant monitors
//! ([`monitor`]) and scenario configuration ([`scenario`]).
//!
//! Everything is deterministic: a master seed fully fixes mobility,
//! traffic, radio losses and protocol behavior, so paired protocol
//! comparisons run against byte-identical workloads.

pub mod adara;
pub mod aodv;
pub mod engine;
pub mod golden;
pub mod messages;
pub mod metrics;
pub mod monitor;
pub mod rng;
pub mod route_state;
pub mod scenario;
pub mod sim;
pub mod time;
pub mod trace;

pub use engine::{Emission, NodeOutput, ProtocolParams, RoutingEngine};
pub use messages::{DataPacket, NodeId, SignalingPacket};
pub use time::SimTime;
