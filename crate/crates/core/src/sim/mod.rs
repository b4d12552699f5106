//! Discrete-event, cycle-approximate model of the accelerator pipeline.

pub mod config;
pub mod engine;
pub mod event;
pub mod memory;
pub mod noc;
pub mod report;
pub mod systolic;
pub mod trace;

pub use config::{SchedulerPolicy, SimConfig, SubnetConfig};
pub use engine::{
    choose_slot, host_run, run_with_policy, simulate_double_buffered, weight_prefetch_cycles,
    HostState, SimOutput,
};
pub use noc::{hop_count, route_flit, route_path, CoreAccumulator};
pub use report::{EventCounters, NodeRecord, PhaseStats, SimReport};
pub use systolic::matmul_cost;
pub use trace::{audit_trace, NodeState, Transition};
