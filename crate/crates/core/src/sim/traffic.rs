//! On-off constant-rate traffic sources.
//!
//! A flow alternates ON and OFF phases. During an ON phase it emits
//! packets at uniform spacing; during OFF it is silent. Emission times
//! are a closed-form function of the packet index, so the kernel
//! schedules them one at a time without per-flow state.

use crate::messages::NodeId;
use crate::time::SimTime;

#[derive(Debug, Clone)]
pub struct Flow {
    pub src: NodeId,
    pub dest: NodeId,
    pub start: SimTime,
    /// Length of one ON phase.
    pub on: SimTime,
    /// Length of one OFF phase.
    pub off: SimTime,
    /// Packets emitted per ON phase.
    pub per_on: u64,
    pub packet_bytes: usize,
}

impl Flow {
    /// When packet `idx` (0-based) leaves the application.
    pub fn emission_time(&self, idx: u64) -> SimTime {
        let cycle = idx / self.per_on;
        let within = idx % self.per_on;
        let period = self.on.as_micros() + self.off.as_micros();
        self.start + SimTime(period * cycle + within * self.on.as_micros() / self.per_on)
    }

    /// How many packets are emitted strictly before `end`.
    #[cfg(test)]
    pub fn emissions_before(&self, end: SimTime) -> u64 {
        let mut idx = 0;
        while self.emission_time(idx) < end {
            idx += 1;
        }
        idx
    }
}
