//! Measured outputs of one simulation run.

use std::collections::BTreeMap;

use crate::graph::NodeId;
use crate::quant::Precision;
use crate::sim::trace::NodeState;

/// Timing milestones of one node in one layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeRecord {
    pub layer: usize,
    pub node: NodeId,
    pub degree: u32,
    pub precision: Precision,
    pub program_cycle: u64,
    /// Cycle the node entered `Aggregating`.
    pub aggregation_start_cycle: u64,
    /// Cycle the last neighbor embedding arrived (equals
    /// `aggregation_start_cycle` for degree-0 nodes).
    pub fetch_complete_cycle: u64,
    pub done_cycle: u64,
}

impl NodeRecord {
    pub fn latency(&self) -> u64 {
        self.done_cycle - self.program_cycle
    }
}

/// Dwell-time summary for one pipeline state across all nodes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseStats {
    pub state: NodeState,
    pub nodes: u64,
    pub total_cycles: u64,
    pub min_cycles: u64,
    pub max_cycles: u64,
    /// Power-of-two dwell histogram: bucket `i` counts dwells in
    /// `[2^i, 2^(i+1))`, bucket 0 also counting zero-cycle dwells.
    pub histogram: Vec<u64>,
}

impl PhaseStats {
    pub fn new(state: NodeState) -> Self {
        PhaseStats {
            state,
            nodes: 0,
            total_cycles: 0,
            min_cycles: u64::MAX,
            max_cycles: 0,
            histogram: vec![0; 24],
        }
    }

    pub fn record(&mut self, dwell: u64) {
        self.nodes += 1;
        self.total_cycles += dwell;
        self.min_cycles = self.min_cycles.min(dwell);
        self.max_cycles = self.max_cycles.max(dwell);
        let bucket = if dwell == 0 {
            0
        } else {
            (63 - dwell.leading_zeros()) as usize
        };
        let bucket = bucket.min(self.histogram.len() - 1);
        self.histogram[bucket] += 1;
    }

    pub fn mean_cycles(&self) -> f64 {
        if self.nodes == 0 {
            0.0
        } else {
            self.total_cycles as f64 / self.nodes as f64
        }
    }
}

/// Conservation and traffic counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EventCounters {
    pub nodes_programmed: u64,
    pub slots_freed: u64,
    pub bank_conflicts: u64,
    pub mem_words_requested: u64,
    pub mem_words_delivered: u64,
    pub noc_flits_injected: u64,
    pub noc_flits_consumed: u64,
    pub partial_responses: u64,
}

/// Cycle counts, occupancy, and throughput for one run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimReport {
    pub scheduler: String,
    pub total_cycles: u64,
    pub num_nodes: usize,
    pub layers: usize,
    pub clock_mhz: f64,
    pub per_node: Vec<NodeRecord>,
    pub phase_stats: BTreeMap<NodeState, PhaseStats>,
    pub counters: EventCounters,
}

impl SimReport {
    /// Nodes retired per cycle, over all layers.
    pub fn throughput_nodes_per_cycle(&self) -> f64 {
        if self.total_cycles == 0 {
            0.0
        } else {
            (self.num_nodes * self.layers) as f64 / self.total_cycles as f64
        }
    }

    /// Wall-clock-equivalent latency at the configured clock.
    pub fn latency_ms(&self) -> f64 {
        self.total_cycles as f64 / (self.clock_mhz * 1e3)
    }

    pub fn nodes_per_ms(&self) -> f64 {
        let ms = self.latency_ms();
        if ms == 0.0 {
            0.0
        } else {
            (self.num_nodes * self.layers) as f64 / ms
        }
    }
}
