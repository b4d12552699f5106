//! Nodeslot state machine, transition trace, and the trace auditor.

use std::fmt;

use crate::error::{Error, Result};
use crate::graph::NodeId;

/// Per-node pipeline states. Transitions only ever step forward along this
/// chain; the partial-response mechanism lets feature fetching continue
/// while a node is already `Aggregating`, but never moves a node backwards.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum NodeState {
    Empty,
    Programmed,
    PrefetchAdjacency,
    PrefetchFeatures,
    Aggregating,
    AggregationBuffered,
    Transforming,
    WriteBack,
    Done,
}

impl NodeState {
    pub const CHAIN: [NodeState; 9] = [
        NodeState::Empty,
        NodeState::Programmed,
        NodeState::PrefetchAdjacency,
        NodeState::PrefetchFeatures,
        NodeState::Aggregating,
        NodeState::AggregationBuffered,
        NodeState::Transforming,
        NodeState::WriteBack,
        NodeState::Done,
    ];

    pub fn next(&self) -> Option<NodeState> {
        let idx = Self::CHAIN.iter().position(|s| s == self).unwrap();
        Self::CHAIN.get(idx + 1).copied()
    }

    pub fn name(&self) -> &'static str {
        match self {
            NodeState::Empty => "Empty",
            NodeState::Programmed => "Programmed",
            NodeState::PrefetchAdjacency => "PrefetchAdjacency",
            NodeState::PrefetchFeatures => "PrefetchFeatures",
            NodeState::Aggregating => "Aggregating",
            NodeState::AggregationBuffered => "AggregationBuffered",
            NodeState::Transforming => "Transforming",
            NodeState::WriteBack => "WriteBack",
            NodeState::Done => "Done",
        }
    }
}

impl fmt::Display for NodeState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One audited state transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Transition {
    pub cycle: u64,
    pub layer: usize,
    pub slot: usize,
    pub node: NodeId,
    pub from: NodeState,
    pub to: NodeState,
}

impl Transition {
    /// Trace line format: `cycle slot node_id from_state to_state`.
    pub fn line(&self) -> String {
        format!(
            "{} {} {} {} {}",
            self.cycle, self.slot, self.node, self.from, self.to
        )
    }
}

/// Validates a full event trace:
/// - every transition steps exactly one state forward along the chain
/// - every (layer, node) walks the complete chain exactly once
/// - a slot is never reprogrammed while occupied
/// - cycles are non-decreasing
pub fn audit_trace(
    trace: &[Transition],
    num_nodes: usize,
    layers: usize,
    num_slots: usize,
) -> Result<()> {
    let mut last_cycle = 0u64;
    let mut slot_busy = vec![false; num_slots];
    // Progress index per (layer, node): next expected `from` position.
    let mut progress = vec![0usize; num_nodes * layers];

    for t in trace {
        if t.cycle < last_cycle {
            return Err(Error::Contract(format!(
                "trace cycles regress at {}",
                t.line()
            )));
        }
        last_cycle = t.cycle;
        if t.to != t.from.next().unwrap_or(t.to) || t.from == NodeState::Done {
            return Err(Error::Contract(format!(
                "illegal transition {} -> {} at cycle {}",
                t.from, t.to, t.cycle
            )));
        }
        if t.slot >= num_slots || (t.node as usize) >= num_nodes || t.layer >= layers {
            return Err(Error::Contract(format!("trace entry out of range: {}", t.line())));
        }
        let key = t.layer * num_nodes + t.node as usize;
        let expected_from = NodeState::CHAIN[progress[key]];
        if t.from != expected_from {
            return Err(Error::Contract(format!(
                "node {} layer {} expected to leave {}, saw {}",
                t.node, t.layer, expected_from, t.from
            )));
        }
        progress[key] += 1;

        if t.from == NodeState::Empty {
            if slot_busy[t.slot] {
                return Err(Error::Contract(format!(
                    "slot {} reprogrammed while busy at cycle {}",
                    t.slot, t.cycle
                )));
            }
            slot_busy[t.slot] = true;
        }
        if t.to == NodeState::Done {
            slot_busy[t.slot] = false;
        }
    }

    for (key, &p) in progress.iter().enumerate() {
        if p != NodeState::CHAIN.len() - 1 {
            return Err(Error::Contract(format!(
                "node {} layer {} completed {}/{} transitions",
                key % num_nodes,
                key / num_nodes,
                p,
                NodeState::CHAIN.len() - 1
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_chain(node: NodeId, slot: usize, base: u64) -> Vec<Transition> {
        NodeState::CHAIN
            .windows(2)
            .enumerate()
            .map(|(i, w)| Transition {
                cycle: base + i as u64,
                layer: 0,
                slot,
                node,
                from: w[0],
                to: w[1],
            })
            .collect()
    }

    #[test]
    fn clean_trace_passes() {
        let mut trace = full_chain(0, 0, 0);
        trace.extend(full_chain(1, 1, 2));
        trace.sort_by_key(|t| t.cycle);
        assert!(audit_trace(&trace, 2, 1, 2).is_ok());
    }

    #[test]
    fn skipped_state_is_rejected() {
        let mut trace = full_chain(0, 0, 0);
        trace.remove(3);
        assert!(audit_trace(&trace, 1, 1, 1).is_err());
    }

    #[test]
    fn double_done_is_rejected() {
        let mut trace = full_chain(0, 0, 0);
        trace.extend(full_chain(0, 0, 20));
        assert!(audit_trace(&trace, 1, 1, 1).is_err());
    }

    #[test]
    fn missing_completion_is_rejected() {
        let mut trace = full_chain(0, 0, 0);
        trace.pop();
        assert!(audit_trace(&trace, 1, 1, 1).is_err());
    }

    #[test]
    fn busy_slot_reprogramming_is_rejected() {
        let mut trace: Vec<Transition> = full_chain(0, 0, 0).into_iter().take(3).collect();
        trace.push(Transition {
            cycle: 5,
            layer: 0,
            slot: 0,
            node: 1,
            from: NodeState::Empty,
            to: NodeState::Programmed,
        });
        assert!(audit_trace(&trace, 2, 1, 1).is_err());
    }

    #[test]
    fn chain_next_walks_forward_only() {
        assert_eq!(NodeState::Empty.next(), Some(NodeState::Programmed));
        assert_eq!(NodeState::WriteBack.next(), Some(NodeState::Done));
        assert_eq!(NodeState::Done.next(), None);
    }
}
