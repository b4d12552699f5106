//! Hardware constants for the simulator.
//!
//! The cycle cost model is documented here and is deliberately simple:
//!
//! - router hop: 1 cycle per flit, XY dimension-order routing
//! - memory bank: fixed access latency, then `words_per_cycle` streaming;
//!   a bank serves one granted request at a time, round-robin over its
//!   Fetch Tag group
//! - aggregation core: consumes 1 flit per cycle
//! - systolic array: a `(1×D)·(D×F)` product costs `rows + D + F` cycles,
//!   tiled over `cols`-wide output slices
//! - host: programs at most one nodeslot per cycle
//!
//! All constants are arbitrary-but-fixed defaults and can be overridden per
//! experiment. Absolute cycle counts are therefore model outputs, not
//! hardware claims; relative comparisons between scheduling policies use the
//! same constants on both sides.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::quant::{
    nodeslot_allocation, Precision, PrecisionBudget, ResourceBudget, ResourceKind,
};

/// Scheduling policies the host loop can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchedulerPolicy {
    /// Nodes are programmed into any free slot as soon as one exists.
    EventDriven,
    /// Static batches: a batch may prefetch while the previous one computes,
    /// but aggregation waits until every node of the previous batch is done.
    DoubleBuffered { batch: usize },
}

impl SchedulerPolicy {
    pub fn name(&self) -> &'static str {
        match self {
            SchedulerPolicy::EventDriven => "event-driven",
            SchedulerPolicy::DoubleBuffered { .. } => "double-buffered",
        }
    }
}

/// Geometry of one precision's aggregation subnet: a `width × height` router
/// mesh with `cores` aggregation cores placed row-major from (0, 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SubnetConfig {
    pub width: usize,
    pub height: usize,
    pub cores: usize,
}

impl SubnetConfig {
    pub fn fitting(cores: usize) -> Self {
        let width = (cores as f64).sqrt().ceil() as usize;
        let height = cores.div_ceil(width.max(1)).max(1);
        SubnetConfig {
            width: width.max(1),
            height,
            cores,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Scoreboard rows available to the host.
    pub nodeslots: usize,
    /// Independent memory banks serving feature traffic.
    pub num_banks: usize,
    /// Fetch Tags sharing one bank; slot `s` maps to bank
    /// `(s / tags_per_bank) % num_banks`.
    pub tags_per_bank: usize,
    /// Fixed cycles before a bank starts streaming a granted request.
    pub mem_latency: u64,
    /// Streaming bandwidth of a bank once granted.
    pub mem_words_per_cycle: u64,
    /// Fixed latency of the weight channel.
    pub weight_latency: u64,
    /// Streaming bandwidth of the weight channel.
    pub weight_words_per_cycle: u64,
    /// Message Queue capacity of one Fetch Tag, in embeddings.
    pub message_queue_capacity: usize,
    /// Unblock aggregation when the Message Queue fills, before the fetch
    /// finishes. Disabling this models a design that must buffer every
    /// neighbor on-chip before aggregation can start.
    pub partial_response: bool,
    /// Feature lanes per aggregation core.
    pub core_width: usize,
    /// Aggregation subnets by precision.
    pub subnets: BTreeMap<Precision, SubnetConfig>,
    /// Systolic array geometry (one array per precision).
    pub systolic_rows: usize,
    pub systolic_cols: usize,
    /// Aggregation buffer rows; 0 means one row per nodeslot.
    pub agg_buffer_rows: usize,
    /// Clock used to convert cycles to wall-clock-equivalent latency.
    pub clock_mhz: f64,
    /// Fractional bits of the fixed-point edge coefficients used by integer
    /// aggregation cores.
    pub coeff_frac_bits: u32,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            nodeslots: 64,
            num_banks: 32,
            tags_per_bank: 2,
            mem_latency: 100,
            mem_words_per_cycle: 1,
            weight_latency: 100,
            weight_words_per_cycle: 16,
            message_queue_capacity: 16,
            partial_response: true,
            core_width: 8,
            subnets: default_subnets(),
            systolic_rows: 4,
            systolic_cols: 4,
            agg_buffer_rows: 0,
            clock_mhz: 200.0,
            coeff_frac_bits: 16,
        }
    }
}

impl SimConfig {
    pub fn bank_of_slot(&self, slot: usize) -> usize {
        (slot / self.tags_per_bank.max(1)) % self.num_banks
    }

    pub fn effective_agg_buffer_rows(&self) -> usize {
        if self.agg_buffer_rows == 0 {
            self.nodeslots
        } else {
            self.agg_buffer_rows
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodeslots == 0 {
            return Err(Error::Config("nodeslots must be >= 1".into()));
        }
        if self.num_banks == 0 || self.tags_per_bank == 0 {
            return Err(Error::Config("need at least one bank and one tag per bank".into()));
        }
        if self.mem_words_per_cycle == 0 || self.weight_words_per_cycle == 0 {
            return Err(Error::Config("memory bandwidth must be >= 1 word/cycle".into()));
        }
        if self.message_queue_capacity == 0 {
            return Err(Error::Config("message queue capacity must be >= 1".into()));
        }
        if self.core_width == 0 {
            return Err(Error::Config("core width must be >= 1".into()));
        }
        if self.systolic_rows == 0 || self.systolic_cols == 0 {
            return Err(Error::Config("systolic array dims must be >= 1".into()));
        }
        if !(self.clock_mhz > 0.0) {
            return Err(Error::Config("clock must be positive".into()));
        }
        if self.coeff_frac_bits == 0 || self.coeff_frac_bits > 31 {
            return Err(Error::Config("coeff_frac_bits must be in [1, 31]".into()));
        }
        for (p, s) in &self.subnets {
            if s.cores == 0 || s.width == 0 || s.height == 0 {
                return Err(Error::Config(format!("subnet for {p} must be non-empty")));
            }
            if s.cores > s.width * s.height {
                return Err(Error::Config(format!(
                    "subnet for {p} places {} cores on a {}x{} mesh",
                    s.cores, s.width, s.height
                )));
            }
        }
        Ok(())
    }
}

/// Synthetic per-core resource budget backing the default subnet sizes.
/// The numbers are representative of one mid-size FPGA partition; the
/// allocation rule turns them into 13 float, 32 int8, and 64 int4 cores.
pub fn default_core_budget() -> ResourceBudget {
    let mut budget = ResourceBudget::new();
    let entry = |lut: f64, ff: f64, bram: f64, dsp: f64| {
        let max: BTreeMap<ResourceKind, f64> = [
            (ResourceKind::Lut, 96_000.0),
            (ResourceKind::Ff, 192_000.0),
            (ResourceKind::Bram, 480.0),
            (ResourceKind::Dsp, 384.0),
        ]
        .into_iter()
        .collect();
        let cost: BTreeMap<ResourceKind, f64> = [
            (ResourceKind::Lut, lut),
            (ResourceKind::Ff, ff),
            (ResourceKind::Bram, bram),
            (ResourceKind::Dsp, dsp),
        ]
        .into_iter()
        .collect();
        PrecisionBudget::new(max, cost).expect("static budget is valid")
    };
    budget.insert(Precision::Float32, entry(7_400.0, 14_800.0, 37.0, 30.0));
    budget.insert(Precision::Int8, entry(2_900.0, 5_800.0, 15.0, 12.0));
    budget.insert(Precision::Int4, entry(1_450.0, 2_900.0, 7.5, 6.0));
    budget
}

fn default_subnets() -> BTreeMap<Precision, SubnetConfig> {
    let budget = default_core_budget();
    Precision::ALL
        .iter()
        .map(|&p| {
            let cores = nodeslot_allocation(&budget, p, false).expect("default budget covers p");
            (p, SubnetConfig::fitting(cores))
        })
        .collect()
}
