//! Aggregation-engine NoC: XY routing, per-precision subnets, dynamic core
//! allocation, and the per-core accumulators.
//!
//! Each precision owns an isolated mesh. Cores are placed row-major from
//! (0, 0); the aggregation managers inject at (0, 0), so a packet to core
//! `c` travels `manhattan((0,0), position(c))` hops. A packet is one head
//! flit, one body flit per payload word, and one tail flit.

use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::quant::Precision;
use crate::sim::config::SubnetConfig;

pub type Coord = (usize, usize);

/// One hop of XY dimension-order routing: move along X until the column
/// matches, then along Y. Returns `current` when already at the destination.
pub fn route_flit(current: Coord, dest: Coord) -> Coord {
    let (x, y) = current;
    let (dx, dy) = dest;
    if x < dx {
        (x + 1, y)
    } else if x > dx {
        (x - 1, y)
    } else if y < dy {
        (x, y + 1)
    } else if y > dy {
        (x, y - 1)
    } else {
        current
    }
}

/// Full XY path from `src` to `dest`, excluding `src`.
pub fn route_path(src: Coord, dest: Coord) -> Vec<Coord> {
    let mut path = Vec::new();
    let mut at = src;
    while at != dest {
        at = route_flit(at, dest);
        path.push(at);
    }
    path
}

/// Hop count of the XY route.
pub fn hop_count(src: Coord, dest: Coord) -> u64 {
    route_path(src, dest).len() as u64
}

/// Numeric accumulator held by one aggregation core while it serves a slot.
///
/// Float cores accumulate in f64. Integer cores accumulate quantized codes
/// in a widened 64-bit accumulator, either with unit coefficients (plain
/// sums and means) or with fixed-point edge coefficients (normalized sums).
#[derive(Debug, Clone, PartialEq)]
pub enum CoreAccumulator {
    Float { acc: Vec<f64> },
    Int { acc: Vec<i64>, coeff_sum_fx: i64 },
}

impl CoreAccumulator {
    pub fn float(width: usize) -> Self {
        CoreAccumulator::Float {
            acc: vec![0.0; width],
        }
    }

    pub fn int(width: usize) -> Self {
        CoreAccumulator::Int {
            acc: vec![0; width],
            coeff_sum_fx: 0,
        }
    }

    /// Accumulates one scaled float message chunk.
    pub fn step_float(&mut self, values: &[f64], coeff: f64) {
        let CoreAccumulator::Float { acc } = self else {
            panic!("float step on an integer core");
        };
        for (a, &v) in acc.iter_mut().zip(values) {
            *a += coeff * v;
        }
    }

    /// Accumulates one code chunk with a unit coefficient.
    pub fn step_int_unit(&mut self, codes: &[i32]) {
        let CoreAccumulator::Int { acc, .. } = self else {
            panic!("integer step on a float core");
        };
        for (a, &c) in acc.iter_mut().zip(codes) {
            *a += c as i64;
        }
    }

    /// Accumulates one code chunk scaled by a fixed-point coefficient.
    pub fn step_int_fixed(&mut self, codes: &[i32], coeff_fx: i64) {
        let CoreAccumulator::Int { acc, coeff_sum_fx } = self else {
            panic!("integer step on a float core");
        };
        for (a, &c) in acc.iter_mut().zip(codes) {
            *a += coeff_fx * c as i64;
        }
        *coeff_sum_fx += coeff_fx;
    }
}

#[derive(Debug)]
struct Core {
    owner: Option<usize>,
    accum: Option<CoreAccumulator>,
}

/// A request waiting for cores in a subnet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AllocRequest {
    pub slot: usize,
    pub cores_needed: usize,
}

/// One precision's isolated aggregation mesh with FIFO allocation.
#[derive(Debug)]
pub struct Subnet {
    pub precision: Precision,
    pub config: SubnetConfig,
    cores: Vec<Core>,
    free_count: usize,
    queue: VecDeque<AllocRequest>,
}

impl Subnet {
    pub fn new(precision: Precision, config: SubnetConfig) -> Self {
        Subnet {
            precision,
            config,
            cores: (0..config.cores)
                .map(|_| Core {
                    owner: None,
                    accum: None,
                })
                .collect(),
            free_count: config.cores,
            queue: VecDeque::new(),
        }
    }

    pub fn position(&self, core: usize) -> Coord {
        (core % self.config.width, core / self.config.width)
    }

    /// Cores required for a message of `feature_count` lanes given
    /// `core_width` lanes per core, clamped to the subnet size.
    pub fn cores_for(&self, feature_count: usize, core_width: usize) -> Result<usize> {
        if feature_count == 0 {
            return Err(Error::Contract(
                "PE allocation for zero features".into(),
            ));
        }
        Ok(feature_count.div_ceil(core_width).min(self.config.cores))
    }

    pub fn enqueue(&mut self, request: AllocRequest) {
        self.queue.push_back(request);
    }

    /// Grants the head of the FIFO queue if enough cores are free. Lower
    /// core indices are claimed first. Returns the granted slot and its
    /// claimed cores.
    pub fn try_allocate(&mut self) -> Option<(usize, Vec<usize>)> {
        let head = *self.queue.front()?;
        if head.cores_needed > self.free_count {
            return None;
        }
        self.queue.pop_front();
        let mut claimed = Vec::with_capacity(head.cores_needed);
        for (idx, core) in self.cores.iter_mut().enumerate() {
            if core.owner.is_none() {
                core.owner = Some(head.slot);
                claimed.push(idx);
                if claimed.len() == head.cores_needed {
                    break;
                }
            }
        }
        self.free_count -= claimed.len();
        Some((head.slot, claimed))
    }

    pub fn install_accumulator(&mut self, core: usize, slot: usize, accum: CoreAccumulator) {
        assert_eq!(self.cores[core].owner, Some(slot), "core not owned by slot");
        self.cores[core].accum = Some(accum);
    }

    pub fn accumulator_mut(&mut self, core: usize, slot: usize) -> Result<&mut CoreAccumulator> {
        let c = &mut self.cores[core];
        if c.owner != Some(slot) {
            return Err(Error::Contract(format!(
                "slot {slot} touched core {core} owned by {:?}",
                c.owner
            )));
        }
        c.accum.as_mut().ok_or_else(|| {
            Error::Contract(format!("core {core} has no accumulator installed"))
        })
    }

    /// Releases a slot's cores, returning their accumulators in claim order.
    pub fn release(&mut self, slot: usize, claimed: &[usize]) -> Vec<CoreAccumulator> {
        let mut taken = Vec::with_capacity(claimed.len());
        for &idx in claimed {
            let core = &mut self.cores[idx];
            assert_eq!(core.owner, Some(slot), "releasing a core the slot does not own");
            core.owner = None;
            taken.push(core.accum.take().expect("released core had an accumulator"));
            self.free_count += 1;
        }
        taken
    }

    pub fn free_cores(&self) -> usize {
        self.free_count
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }
}
