//! The discrete-event accelerator model.
//!
//! One `Engine` owns a single clock, a single event queue, and all unit
//! state (scoreboard, fetch tags, subnets, buffer, transformation arrays).
//! Events at equal cycles execute in scheduling order, so a run is a pure
//! function of its inputs.
//!
//! Per-node pipeline: the host programs a slot; the slot's Fetch Tag reads
//! the adjacency list, then streams neighbor embeddings into its Message
//! Queue one bank request at a time; aggregation is unblocked when the
//! queue fills (partial response) or the fetch completes; the aggregation
//! manager claims cores in its precision subnet and injects one packet per
//! core per message; the buffering manager collects core accumulators into
//! an aggregation-buffer row; the systolic array applies the model's
//! transformation; the updated row is written back and the slot is freed.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ndarray::{Array1, Array2};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{Graph, NodeId};
use crate::model::{LayerWeights, MlpLayer, ModelConfig, ModelKind};
use crate::quant::{
    calibrate, dequantize, fake_quantize_matrix, quantize, Precision, PrecisionAssignment,
    QuantParams,
};
use crate::sim::config::{SchedulerPolicy, SimConfig};
use crate::sim::event::{Event, EventQueue};
use crate::sim::memory::{MemReqKind, MemRequest, MemorySystem};
use crate::sim::noc::{hop_count, CoreAccumulator, AllocRequest, Subnet};
use crate::sim::report::{EventCounters, NodeRecord, PhaseStats, SimReport};
use crate::sim::systolic::matmul_cost;
use crate::sim::trace::{audit_trace, NodeState, Transition};

/// Lowest set bit of an `available_nodeslots` mask.
pub fn choose_slot(mask: u64) -> Result<usize> {
    if mask == 0 {
        return Err(Error::Contract("choose_slot on an all-zero mask".into()));
    }
    Ok(mask.trailing_zeros() as usize)
}

/// Host-side view of the scoreboard: the availability mask and the pending
/// node queue. Mask updates are the only host/accelerator synchronization.
#[derive(Debug, Clone)]
pub struct HostState {
    available: Vec<bool>,
}

impl HostState {
    pub fn new(nodeslots: usize) -> Self {
        HostState {
            available: vec![true; nodeslots],
        }
    }

    pub fn available(&self, slot: usize) -> bool {
        self.available[slot]
    }

    pub fn any_available(&self) -> bool {
        self.available.iter().any(|&b| b)
    }

    /// Lowest available slot, mirroring [`choose_slot`] for arbitrary widths.
    pub fn choose(&self) -> Option<usize> {
        self.available.iter().position(|&b| b)
    }

    /// Claims `slot` for programming. Programming a busy slot is a contract
    /// violation.
    pub fn program_nodeslot(&mut self, slot: usize) -> Result<()> {
        if !self.available[slot] {
            return Err(Error::Contract(format!(
                "programming busy nodeslot {slot}"
            )));
        }
        self.available[slot] = false;
        Ok(())
    }

    pub fn release(&mut self, slot: usize) {
        debug_assert!(!self.available[slot], "releasing a free slot");
        self.available[slot] = true;
    }
}

/// Weight-channel transfer cost: zero-size transfers complete immediately.
pub fn weight_prefetch_cycles(words: u64, latency: u64, words_per_cycle: u64) -> u64 {
    if words == 0 {
        0
    } else {
        latency + words.div_ceil(words_per_cycle)
    }
}

/// Everything a finished run reports: timing, functional output, and the
/// audited transition trace.
#[derive(Debug, Clone)]
pub struct SimOutput {
    pub report: SimReport,
    pub output: FeatureMatrix,
    pub trace: Vec<Transition>,
}

/// Event-driven run: Alg.-style host loop, nodes scheduled into any free
/// slot as soon as one exists.
pub fn host_run(
    g: &Graph,
    cfg: &ModelConfig,
    layers: &[LayerWeights],
    assignment: &PrecisionAssignment,
    input: &FeatureMatrix,
    sim: &SimConfig,
) -> Result<SimOutput> {
    run_with_policy(g, cfg, layers, assignment, input, sim, SchedulerPolicy::EventDriven)
}

/// Double-buffered baseline: nodes advance in fixed batches; a batch may
/// prefetch while the previous batch computes, but may not aggregate until
/// every node of the previous batch is done.
pub fn simulate_double_buffered(
    g: &Graph,
    cfg: &ModelConfig,
    layers: &[LayerWeights],
    assignment: &PrecisionAssignment,
    input: &FeatureMatrix,
    sim: &SimConfig,
    batch: usize,
) -> Result<SimOutput> {
    run_with_policy(
        g,
        cfg,
        layers,
        assignment,
        input,
        sim,
        SchedulerPolicy::DoubleBuffered { batch },
    )
}

pub fn run_with_policy(
    g: &Graph,
    cfg: &ModelConfig,
    layers: &[LayerWeights],
    assignment: &PrecisionAssignment,
    input: &FeatureMatrix,
    sim: &SimConfig,
    policy: SchedulerPolicy,
) -> Result<SimOutput> {
    let mut engine = Engine::new(g, cfg, layers, assignment, input, sim, policy)?;
    engine.run()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum MessageSource {
    SelfNode,
    /// Position within the node's stored neighbor list.
    Neighbor(usize),
}

/// One scoreboard row plus its fetch/aggregation runtime.
#[derive(Debug)]
struct SlotState {
    node: NodeId,
    precision: Precision,
    state: NodeState,
    neighbor_count: usize,
    /// Table-style simulated pointers: indices into the feature store.
    adjacency_ptr: usize,
    updated_ptr: usize,

    // Fetch Tag.
    address_queue: VecDeque<usize>,
    message_queue: VecDeque<usize>,
    issued: usize,
    fetched: usize,
    inflight_feature: bool,
    unblocked: bool,

    // Aggregation manager.
    cores: Vec<usize>,
    chunks: Vec<std::ops::Range<usize>>,
    msgs_total: usize,
    msgs_injected: usize,
    packets_outstanding: usize,
    self_pending: bool,
    agm_busy_until: u64,
    agm_scheduled: bool,

    // Transformation.
    aggregated: Option<Array1<f64>>,
    output_row: Option<Array1<f64>>,

    // Milestones.
    program_cycle: u64,
    aggregation_start_cycle: u64,
    fetch_complete_cycle: u64,
}

/// Functional context for the layer currently in flight.
struct LayerRuntime {
    weights: BTreeMap<Precision, LayerWeights>,
    qp_x: BTreeMap<Precision, QuantParams>,
    /// GraphSAGE per-precision message matrices σ(X·W3 + b).
    sage_msgs: BTreeMap<Precision, Array2<f64>>,
    qp_msg: BTreeMap<Precision, QuantParams>,
    norm: Vec<f64>,
    input: FeatureMatrix,
    output: Array2<f64>,
    msg_dim: usize,
}

struct FteState {
    busy_until: u64,
    waiters: BTreeSet<usize>,
    rr_cursor: usize,
    tick_scheduled: bool,
}

struct Engine<'a> {
    g: &'a Graph,
    layer_weights: &'a [LayerWeights],
    assignment: &'a PrecisionAssignment,
    sim: &'a SimConfig,
    policy: SchedulerPolicy,
    kind: ModelKind,
    used_precisions: Vec<Precision>,

    queue: EventQueue,
    now: u64,
    mem: MemorySystem,
    subnets: BTreeMap<Precision, Subnet>,
    slots: Vec<Option<SlotState>>,
    host: HostState,
    pending: VecDeque<NodeId>,
    host_tick_scheduled: bool,
    programmed_this_cycle: Option<u64>,

    layer_idx: usize,
    layer: LayerRuntime,
    weights_ready: bool,
    done_in_layer: usize,

    // Double-buffered batching.
    current_batch: usize,
    batch_done: Vec<usize>,
    gated_slots: Vec<usize>,

    // Aggregation buffer.
    abf_rows_free: usize,
    abf_waiters: BTreeSet<usize>,
    abf_rr_cursor: usize,
    abf_tick_scheduled: bool,

    fte: BTreeMap<Precision, FteState>,

    trace: Vec<Transition>,
    records: Vec<NodeRecord>,
    counters: EventCounters,
}

impl<'a> Engine<'a> {
    fn new(
        g: &'a Graph,
        cfg: &'a ModelConfig,
        layers: &'a [LayerWeights],
        assignment: &'a PrecisionAssignment,
        input: &'a FeatureMatrix,
        sim: &'a SimConfig,
        policy: SchedulerPolicy,
    ) -> Result<Self> {
        cfg.validate()?;
        sim.validate()?;
        if layers.is_empty() {
            return Err(Error::Config("need at least one layer".into()));
        }
        for (l, w) in layers.iter().enumerate() {
            if w.kind() != cfg.kind {
                return Err(Error::Config(format!(
                    "layer {l} weights are {} but config selects {}",
                    w.kind().name(),
                    cfg.kind.name()
                )));
            }
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(Error::Shape(
                    "layer output dim does not chain into the next layer".into(),
                ));
            }
        }
        if input.num_nodes() != g.num_nodes() || input.dim() != layers[0].input_dim() {
            return Err(Error::Shape(format!(
                "input features {}x{} do not match graph ({} nodes) and first layer (dim {})",
                input.num_nodes(),
                input.dim(),
                g.num_nodes(),
                layers[0].input_dim()
            )));
        }
        if assignment.len() != g.num_nodes() {
            return Err(Error::Shape(format!(
                "assignment covers {} nodes, graph has {}",
                assignment.len(),
                g.num_nodes()
            )));
        }
        if let SchedulerPolicy::DoubleBuffered { batch } = policy {
            if batch == 0 {
                return Err(Error::Config("batch size must be >= 1".into()));
            }
        }

        let mut used: Vec<Precision> = Vec::new();
        for &p in assignment.per_node() {
            if !used.contains(&p) {
                used.push(p);
            }
        }
        used.sort();
        for &p in &used {
            if !sim.subnets.contains_key(&p) {
                return Err(Error::Config(format!(
                    "assignment uses {p} but no subnet is configured for it"
                )));
            }
        }

        let subnets: BTreeMap<Precision, Subnet> = used
            .iter()
            .map(|&p| (p, Subnet::new(p, sim.subnets[&p])))
            .collect();
        let fte: BTreeMap<Precision, FteState> = used
            .iter()
            .map(|&p| {
                (
                    p,
                    FteState {
                        busy_until: 0,
                        waiters: BTreeSet::new(),
                        rr_cursor: 0,
                        tick_scheduled: false,
                    },
                )
            })
            .collect();

        let layer = LayerRuntime::build(g, cfg.kind, &layers[0], input.clone(), &used)?;

        let num_batches = match policy {
            SchedulerPolicy::DoubleBuffered { batch } => g.num_nodes().div_ceil(batch),
            SchedulerPolicy::EventDriven => 1,
        };

        Ok(Engine {
            g,
            layer_weights: layers,
            assignment,
            sim,
            policy,
            kind: cfg.kind,
            used_precisions: used,
            queue: EventQueue::new(),
            now: 0,
            mem: MemorySystem::new(
                sim.num_banks,
                sim.tags_per_bank,
                sim.mem_latency,
                sim.mem_words_per_cycle,
            ),
            subnets,
            slots: (0..sim.nodeslots).map(|_| None).collect(),
            host: HostState::new(sim.nodeslots),
            pending: (0..g.num_nodes() as NodeId).collect(),
            host_tick_scheduled: false,
            programmed_this_cycle: None,
            layer_idx: 0,
            layer,
            weights_ready: false,
            done_in_layer: 0,
            current_batch: 0,
            batch_done: vec![0; num_batches],
            gated_slots: Vec::new(),
            abf_rows_free: sim.effective_agg_buffer_rows(),
            abf_waiters: BTreeSet::new(),
            abf_rr_cursor: 0,
            abf_tick_scheduled: false,
            fte,
            trace: Vec::new(),
            records: Vec::new(),
            counters: EventCounters::default(),
        })
    }

    fn run(&mut self) -> Result<SimOutput> {
        self.start_layer(0);
        let expected = self.g.num_nodes() * self.layer_weights.len();

        while let Some((cycle, event)) = self.queue.pop() {
            debug_assert!(cycle >= self.now, "time went backwards");
            self.now = cycle;
            self.handle(event)?;
        }

        if self.records.len() != expected {
            let in_flight =
                self.counters.nodes_programmed as usize - self.counters.slots_freed as usize;
            let trace_dump: String = self
                .trace
                .iter()
                .map(|t| t.line() + "\n")
                .collect();
            return Err(Error::Deadlock {
                cycle: self.now,
                in_flight,
                trace_dump,
            });
        }

        audit_trace(
            &self.trace,
            self.g.num_nodes(),
            self.layer_weights.len(),
            self.sim.nodeslots,
        )?;
        debug_assert_eq!(
            self.counters.noc_flits_injected,
            self.counters.noc_flits_consumed
        );

        let mut phase_stats = BTreeMap::new();
        compute_phase_stats(&self.trace, &mut phase_stats);

        let report = SimReport {
            scheduler: self.policy.name().to_string(),
            total_cycles: self.now,
            num_nodes: self.g.num_nodes(),
            layers: self.layer_weights.len(),
            clock_mhz: self.sim.clock_mhz,
            per_node: std::mem::take(&mut self.records),
            phase_stats,
            counters: self.counters,
        };
        let output = FeatureMatrix::new(self.layer.output.clone())?;
        Ok(SimOutput {
            report,
            output,
            trace: std::mem::take(&mut self.trace),
        })
    }

    fn handle(&mut self, event: Event) -> Result<()> {
        match event {
            Event::HostTick => self.on_host_tick(),
            Event::StartPrefetch { slot } => self.on_start_prefetch(slot),
            Event::MemComplete { bank } => self.on_mem_complete(bank),
            Event::WeightsReady => {
                self.weights_ready = true;
                let precisions: Vec<Precision> = self.fte.keys().copied().collect();
                for p in precisions {
                    self.schedule_transform_tick(p, self.now);
                }
                Ok(())
            }
            Event::TryAllocate { precision } => self.on_try_allocate(precision),
            Event::AgmInject { slot } => self.on_agm_inject(slot),
            Event::PacketConsumed { slot, flits } => self.on_packet_consumed(slot, flits),
            Event::BufferGrant => self.on_buffer_grant(),
            Event::TryTransform { precision } => self.on_try_transform(precision),
            Event::TransformDone { slot } => self.on_transform_done(slot),
        }
    }

    // ------------------------------------------------------------------
    // Host loop
    // ------------------------------------------------------------------

    fn start_layer(&mut self, cycle: u64) {
        let words = self.layer_weights[self.layer_idx].num_words() as u64;
        let cost = weight_prefetch_cycles(
            words,
            self.sim.weight_latency,
            self.sim.weight_words_per_cycle,
        );
        self.weights_ready = false;
        self.queue.schedule(cycle + cost, Event::WeightsReady);
        self.schedule_host_tick(cycle);
    }

    fn schedule_host_tick(&mut self, cycle: u64) {
        if !self.host_tick_scheduled {
            self.host_tick_scheduled = true;
            self.queue.schedule(cycle, Event::HostTick);
        }
    }

    fn batch_of(&self, node: NodeId) -> usize {
        match self.policy {
            SchedulerPolicy::EventDriven => 0,
            SchedulerPolicy::DoubleBuffered { batch } => node as usize / batch,
        }
    }

    fn on_host_tick(&mut self) -> Result<()> {
        self.host_tick_scheduled = false;
        if self.programmed_this_cycle == Some(self.now) {
            // One program per cycle; try again next cycle.
            self.schedule_host_tick(self.now + 1);
            return Ok(());
        }
        let Some(&node) = self.pending.front() else {
            return Ok(());
        };
        // Prefetch for the next batch may start; anything further waits.
        if self.batch_of(node) > self.current_batch + 1 {
            return Ok(());
        }
        let Some(slot) = self.host.choose() else {
            return Ok(());
        };
        self.pending.pop_front();
        self.host.program_nodeslot(slot)?;
        self.programmed_this_cycle = Some(self.now);

        let precision = self.assignment.precision(node as usize);
        let degree = self.g.degree(node);
        self.slots[slot] = Some(SlotState {
            node,
            precision,
            state: NodeState::Empty,
            neighbor_count: degree,
            adjacency_ptr: node as usize,
            updated_ptr: node as usize,
            address_queue: VecDeque::new(),
            message_queue: VecDeque::new(),
            issued: 0,
            fetched: 0,
            inflight_feature: false,
            unblocked: false,
            cores: Vec::new(),
            chunks: Vec::new(),
            msgs_total: 0,
            msgs_injected: 0,
            packets_outstanding: 0,
            self_pending: false,
            agm_busy_until: 0,
            agm_scheduled: false,
            aggregated: None,
            output_row: None,
            program_cycle: self.now,
            aggregation_start_cycle: 0,
            fetch_complete_cycle: 0,
        });
        self.counters.nodes_programmed += 1;
        self.transition(slot, NodeState::Programmed);
        self.queue
            .schedule(self.now + 1, Event::StartPrefetch { slot });
        if !self.pending.is_empty() {
            self.schedule_host_tick(self.now + 1);
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Prefetch
    // ------------------------------------------------------------------

    fn on_start_prefetch(&mut self, slot: usize) -> Result<()> {
        self.transition(slot, NodeState::PrefetchAdjacency);
        let (node, degree) = {
            let s = self.slot(slot);
            (s.node, s.neighbor_count)
        };
        if degree == 0 {
            // No memory requests at all; the slot moves straight through.
            self.transition(slot, NodeState::PrefetchFeatures);
            let now = self.now;
            let s = self.slot_mut(slot);
            s.unblocked = true;
            s.fetch_complete_cycle = now;
            self.request_aggregation(slot, now);
            return Ok(());
        }
        let bank = self.sim.bank_of_slot(slot);
        let req = MemRequest {
            slot,
            kind: MemReqKind::Adjacency,
            words: degree as u64,
        };
        debug_assert_eq!(self.slot(slot).adjacency_ptr, node as usize);
        if let Some(done_at) = self.mem.request(bank, req, self.now) {
            self.queue.schedule(done_at, Event::MemComplete { bank });
        }
        Ok(())
    }

    fn on_mem_complete(&mut self, bank: usize) -> Result<()> {
        let (done, next) = self.mem.complete(bank, self.now);
        if let Some((_granted, done_at)) = next {
            self.queue.schedule(done_at, Event::MemComplete { bank });
        }
        match done.kind {
            MemReqKind::Adjacency => self.on_adjacency_fetched(done.slot),
            MemReqKind::Feature { neighbor_index } => {
                self.on_feature_fetched(done.slot, neighbor_index)
            }
            MemReqKind::WriteBack => self.on_writeback_done(done.slot),
        }
    }

    fn on_adjacency_fetched(&mut self, slot: usize) -> Result<()> {
        self.transition(slot, NodeState::PrefetchFeatures);
        let degree = self.slot(slot).neighbor_count;
        self.slot_mut(slot).address_queue = (0..degree).collect();
        self.try_issue_feature(slot);
        Ok(())
    }

    fn try_issue_feature(&mut self, slot: usize) {
        let capacity = if self.sim.partial_response {
            self.sim.message_queue_capacity
        } else {
            usize::MAX
        };
        let words = self.layer.input.dim() as u64;
        let (issue, index) = {
            let s = self.slot_mut(slot);
            if s.inflight_feature
                || s.address_queue.is_empty()
                || s.message_queue.len() >= capacity
            {
                (false, 0)
            } else {
                let index = s.address_queue.pop_front().unwrap();
                s.inflight_feature = true;
                s.issued += 1;
                (true, index)
            }
        };
        if !issue {
            return;
        }
        let bank = self.sim.bank_of_slot(slot);
        let req = MemRequest {
            slot,
            kind: MemReqKind::Feature {
                neighbor_index: index,
            },
            words,
        };
        if let Some(done_at) = self.mem.request(bank, req, self.now) {
            self.queue.schedule(done_at, Event::MemComplete { bank });
        }
    }

    fn on_feature_fetched(&mut self, slot: usize, neighbor_index: usize) -> Result<()> {
        let now = self.now;
        {
            let s = self.slot_mut(slot);
            s.inflight_feature = false;
            s.fetched += 1;
            s.message_queue.push_back(neighbor_index);
            if s.fetched == s.neighbor_count {
                s.fetch_complete_cycle = now;
            }
        }
        self.partial_response_check(slot);
        // The AGM may have been waiting on this embedding.
        if self.slot(slot).state == NodeState::Aggregating {
            self.kick_agm(slot);
        }
        self.try_issue_feature(slot);
        Ok(())
    }

    /// Unblocks aggregation when the Message Queue is full or the fetch has
    /// completed. An early unblock (neighbors still pending) is a partial
    /// response; the tag keeps fetching while aggregation runs.
    fn partial_response_check(&mut self, slot: usize) {
        let now = self.now;
        let (ready, early) = {
            let s = self.slot(slot);
            if s.unblocked {
                (false, false)
            } else {
                let full = self.sim.partial_response
                    && s.message_queue.len() >= self.sim.message_queue_capacity;
                let complete = s.fetched == s.neighbor_count;
                (full || complete, full && !complete)
            }
        };
        if !ready {
            return;
        }
        self.slot_mut(slot).unblocked = true;
        if early {
            self.counters.partial_responses += 1;
        }
        self.request_aggregation(slot, now);
    }

    // ------------------------------------------------------------------
    // Aggregation
    // ------------------------------------------------------------------

    fn request_aggregation(&mut self, slot: usize, cycle: u64) {
        let node = self.slot(slot).node;
        if self.batch_of(node) > self.current_batch {
            self.gated_slots.push(slot);
            return;
        }
        let precision = self.slot(slot).precision;
        let cores_needed = {
            let subnet = &self.subnets[&precision];
            subnet
                .cores_for(self.layer.msg_dim, self.sim.core_width)
                .expect("msg_dim is validated nonzero")
        };
        self.subnets
            .get_mut(&precision)
            .unwrap()
            .enqueue(AllocRequest { slot, cores_needed });
        self.queue.schedule(cycle, Event::TryAllocate { precision });
    }

    fn on_try_allocate(&mut self, precision: Precision) -> Result<()> {
        loop {
            let granted = self.subnets.get_mut(&precision).unwrap().try_allocate();
            let Some((slot, cores)) = granted else {
                return Ok(());
            };
            self.start_aggregation(slot, cores)?;
        }
    }

    fn start_aggregation(&mut self, slot: usize, cores: Vec<usize>) -> Result<()> {
        let now = self.now;
        self.transition(slot, NodeState::Aggregating);

        let msg_dim = self.layer.msg_dim;
        let seg = msg_dim.div_ceil(cores.len()).max(self.sim.core_width);
        let chunks: Vec<std::ops::Range<usize>> = cores
            .iter()
            .enumerate()
            .map(|(i, _)| {
                let lo = (i * seg).min(msg_dim);
                let hi = ((i + 1) * seg).min(msg_dim);
                lo..hi
            })
            .collect();

        let precision = self.slot(slot).precision;
        {
            let subnet = self.subnets.get_mut(&precision).unwrap();
            for (&core, chunk) in cores.iter().zip(&chunks) {
                let accum = match precision {
                    Precision::Float32 => CoreAccumulator::float(chunk.len()),
                    _ => CoreAccumulator::int(chunk.len()),
                };
                subnet.install_accumulator(core, slot, accum);
            }
        }

        let is_gcn = self.kind == ModelKind::Gcn;
        {
            let s = self.slot_mut(slot);
            s.aggregation_start_cycle = now;
            s.cores = cores;
            s.chunks = chunks;
            s.self_pending = is_gcn;
            s.msgs_total = s.neighbor_count + usize::from(is_gcn);
            s.msgs_injected = 0;
            s.packets_outstanding = 0;
            s.agm_busy_until = now;
        }

        if self.slot(slot).msgs_total == 0 {
            self.finalize_request(slot, now + 1);
        } else {
            self.kick_agm(slot);
        }
        Ok(())
    }

    fn kick_agm(&mut self, slot: usize) {
        let at = {
            let s = self.slot_mut(slot);
            if s.agm_scheduled {
                return;
            }
            s.agm_scheduled = true;
            s.agm_busy_until.max(self.now)
        };
        self.queue.schedule(at, Event::AgmInject { slot });
    }

    fn on_agm_inject(&mut self, slot: usize) -> Result<()> {
        self.slot_mut(slot).agm_scheduled = false;
        if self.slot(slot).state != NodeState::Aggregating {
            return Ok(());
        }
        if self.slot(slot).msgs_injected == self.slot(slot).msgs_total {
            return Ok(());
        }
        let source = {
            let s = self.slot_mut(slot);
            if s.self_pending {
                s.self_pending = false;
                Some(MessageSource::SelfNode)
            } else {
                s.message_queue.pop_front().map(MessageSource::Neighbor)
            }
        };
        let Some(source) = source else {
            // Waiting for the Fetch Tag; re-kicked on the next response.
            return Ok(());
        };
        self.inject_message(slot, source)?;
        // Popping the queue may have freed Message Queue space.
        if let MessageSource::Neighbor(_) = source {
            self.try_issue_feature(slot);
        }
        let (more, busy_until) = {
            let s = self.slot(slot);
            (s.msgs_injected < s.msgs_total, s.agm_busy_until)
        };
        if more {
            let s = self.slot_mut(slot);
            s.agm_scheduled = true;
            self.queue.schedule(busy_until, Event::AgmInject { slot });
        }
        Ok(())
    }

    /// Streams one message as one packet per claimed core and folds it into
    /// the core accumulators. A packet is head + body-per-word + tail.
    fn inject_message(&mut self, slot: usize, source: MessageSource) -> Result<()> {
        let precision = self.slot(slot).precision;
        let node = self.slot(slot).node;
        let (values, codes, coeff) = self.message_payload(node, source, precision)?;

        let frac = self.sim.coeff_frac_bits;
        let coeff_fx = (coeff * f64::from(1u32 << frac)).round_ties_even() as i64;

        let cores = self.slot(slot).cores.clone();
        let chunks = self.slot(slot).chunks.clone();
        let mut cursor = self.slot(slot).agm_busy_until.max(self.now);
        let subnet = self.subnets.get_mut(&precision).unwrap();
        let mut new_packets = 0usize;
        for (&core, chunk) in cores.iter().zip(&chunks) {
            if chunk.is_empty() {
                continue;
            }
            let flits = (2 + chunk.len()) as u64;
            let acc = subnet.accumulator_mut(core, slot)?;
            match (&values, &codes) {
                (Some(v), None) => acc.step_float(&v[chunk.clone()], coeff),
                (None, Some(c)) => {
                    if self.kind == ModelKind::Gcn {
                        acc.step_int_fixed(&c[chunk.clone()], coeff_fx);
                    } else {
                        acc.step_int_unit(&c[chunk.clone()]);
                    }
                }
                _ => unreachable!("message payload is either values or codes"),
            }
            let dist = hop_count((0, 0), subnet.position(core));
            let consumed_at = cursor + flits - 1 + dist;
            self.queue
                .schedule(consumed_at, Event::PacketConsumed { slot, flits });
            self.counters.noc_flits_injected += flits;
            cursor += flits;
            new_packets += 1;
        }
        let s = self.slot_mut(slot);
        s.agm_busy_until = cursor;
        s.msgs_injected += 1;
        s.packets_outstanding += new_packets;
        Ok(())
    }

    /// The numeric payload of one message in the slot's precision, plus the
    /// GCN edge coefficient (1.0 for other models).
    #[allow(clippy::type_complexity)]
    fn message_payload(
        &self,
        node: NodeId,
        source: MessageSource,
        precision: Precision,
    ) -> Result<(Option<Vec<f64>>, Option<Vec<i32>>, f64)> {
        let layer = &self.layer;
        let (src_node, coeff) = match source {
            MessageSource::SelfNode => (node, 1.0 / layer.norm[node as usize]),
            MessageSource::Neighbor(k) => {
                let (j, e) = self.g.neighbor_entry(node, k);
                let coeff = if self.kind == ModelKind::Gcn {
                    e / (layer.norm[j as usize].sqrt() * layer.norm[node as usize].sqrt())
                } else {
                    1.0
                };
                (j, coeff)
            }
        };
        let row: Vec<f64> = match self.kind {
            ModelKind::Gcn | ModelKind::Gin => {
                layer.input.row(src_node as usize).to_vec()
            }
            ModelKind::GraphSage => layer.sage_msgs[&precision]
                .row(src_node as usize)
                .to_vec(),
        };
        match precision {
            Precision::Float32 => Ok((Some(row), None, coeff)),
            _ => {
                let qp = match self.kind {
                    ModelKind::GraphSage => &layer.qp_msg[&precision],
                    _ => &layer.qp_x[&precision],
                };
                let codes = row
                    .iter()
                    .map(|&x| quantize(x, qp))
                    .collect::<Result<Vec<i32>>>()?;
                Ok((None, Some(codes), coeff))
            }
        }
    }

    fn on_packet_consumed(&mut self, slot: usize, flits: u64) -> Result<()> {
        self.counters.noc_flits_consumed += flits;
        let now = self.now;
        let done = {
            let s = self.slot_mut(slot);
            s.packets_outstanding -= 1;
            s.packets_outstanding == 0 && s.msgs_injected == s.msgs_total
        };
        if done {
            self.finalize_request(slot, now + 1);
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Buffering
    // ------------------------------------------------------------------

    fn finalize_request(&mut self, slot: usize, cycle: u64) {
        self.abf_waiters.insert(slot);
        self.schedule_buffer_tick(cycle);
    }

    fn schedule_buffer_tick(&mut self, cycle: u64) {
        if !self.abf_tick_scheduled {
            self.abf_tick_scheduled = true;
            self.queue.schedule(cycle, Event::BufferGrant);
        }
    }

    /// One aggregation-buffer write per cycle, round-robin over waiting
    /// slots. Collects the slot's core accumulators, finalizes the
    /// aggregation value, releases the cores, and queues the transform.
    fn on_buffer_grant(&mut self) -> Result<()> {
        self.abf_tick_scheduled = false;
        if self.abf_rows_free == 0 || self.abf_waiters.is_empty() {
            return Ok(());
        }
        let slot = next_round_robin(&self.abf_waiters, self.abf_rr_cursor);
        self.abf_waiters.remove(&slot);
        self.abf_rr_cursor = slot;
        self.abf_rows_free -= 1;

        let precision = self.slot(slot).precision;
        let cores = self.slot(slot).cores.clone();
        let accumulators = self
            .subnets
            .get_mut(&precision)
            .unwrap()
            .release(slot, &cores);
        let aggregated = self.finalize_aggregation(slot, accumulators)?;
        self.slot_mut(slot).aggregated = Some(aggregated);
        self.transition(slot, NodeState::AggregationBuffered);

        // Freed cores are reusable from the next cycle.
        self.queue
            .schedule(self.now + 1, Event::TryAllocate { precision });

        self.fte.get_mut(&precision).unwrap().waiters.insert(slot);
        self.schedule_transform_tick(precision, self.now + 1);

        if !self.abf_waiters.is_empty() && self.abf_rows_free > 0 {
            self.schedule_buffer_tick(self.now + 1);
        }
        Ok(())
    }

    /// Assembles core accumulator chunks into the aggregated message and
    /// applies finalization: integer dequantization, the mean division, and
    /// the GIN aggregation-residual.
    fn finalize_aggregation(
        &mut self,
        slot: usize,
        accumulators: Vec<CoreAccumulator>,
    ) -> Result<Array1<f64>> {
        let (node, precision, degree) = {
            let s = self.slot(slot);
            (s.node, s.precision, s.neighbor_count)
        };
        let layer = &self.layer;
        let msg_dim = layer.msg_dim;
        let chunks = self.slot(slot).chunks.clone();
        let mut m = Array1::<f64>::zeros(msg_dim);
        let frac_scale = f64::from(1u32 << self.sim.coeff_frac_bits);

        let qp: Option<&QuantParams> = match precision {
            Precision::Float32 => None,
            _ => Some(match self.kind {
                ModelKind::GraphSage => &layer.qp_msg[&precision],
                _ => &layer.qp_x[&precision],
            }),
        };

        for (acc, chunk) in accumulators.into_iter().zip(chunks) {
            match acc {
                CoreAccumulator::Float { acc } => {
                    for (offset, v) in acc.into_iter().enumerate() {
                        m[chunk.start + offset] = v;
                    }
                }
                CoreAccumulator::Int { acc, coeff_sum_fx } => {
                    let qp = qp.expect("integer accumulator on a float slot");
                    for (offset, raw) in acc.into_iter().enumerate() {
                        let value = match self.kind {
                            ModelKind::Gcn => {
                                (raw as f64 - qp.zero_point * coeff_sum_fx as f64) * qp.scale
                                    / frac_scale
                            }
                            ModelKind::Gin | ModelKind::GraphSage => {
                                (raw as f64 - qp.zero_point * degree as f64) * qp.scale
                            }
                        };
                        m[chunk.start + offset] = value;
                    }
                }
            }
        }

        match self.kind {
            ModelKind::Gcn => {}
            ModelKind::Gin => {
                let LayerWeights::Gin { epsilon, .. } = &layer.weights[&precision] else {
                    unreachable!("GIN run carries GIN weights");
                };
                let self_row = layer.self_row(node as usize, precision)?;
                m.scaled_add(1.0 + epsilon, &Array1::from(self_row));
            }
            ModelKind::GraphSage => {
                if degree > 0 {
                    m /= degree as f64;
                } else {
                    m.fill(0.0);
                }
            }
        }
        Ok(m)
    }

    // ------------------------------------------------------------------
    // Transformation and write-back
    // ------------------------------------------------------------------

    fn schedule_transform_tick(&mut self, precision: Precision, cycle: u64) {
        let fte = self.fte.get_mut(&precision).unwrap();
        if !fte.tick_scheduled {
            fte.tick_scheduled = true;
            self.queue.schedule(cycle, Event::TryTransform { precision });
        }
    }

    fn on_try_transform(&mut self, precision: Precision) -> Result<()> {
        self.fte.get_mut(&precision).unwrap().tick_scheduled = false;
        if !self.weights_ready {
            // Transformation blocks on the weight bank.
            return Ok(());
        }
        let now = self.now;
        let fte = &self.fte[&precision];
        if fte.waiters.is_empty() {
            return Ok(());
        }
        if fte.busy_until > now {
            let at = fte.busy_until;
            self.schedule_transform_tick(precision, at);
            return Ok(());
        }
        let slot = next_round_robin(&fte.waiters, fte.rr_cursor);
        {
            let fte = self.fte.get_mut(&precision).unwrap();
            fte.waiters.remove(&slot);
            fte.rr_cursor = slot;
        }

        self.transition(slot, NodeState::Transforming);
        // The array consumes the buffer row; the row frees for reuse.
        self.abf_rows_free += 1;
        if !self.abf_waiters.is_empty() {
            self.schedule_buffer_tick(now + 1);
        }

        let (row, cost) = self.transform(slot)?;
        self.slot_mut(slot).output_row = Some(row);
        let busy_until = now + cost.max(1);
        self.fte.get_mut(&precision).unwrap().busy_until = busy_until;
        self.queue.schedule(busy_until, Event::TransformDone { slot });
        if !self.fte[&precision].waiters.is_empty() {
            self.schedule_transform_tick(precision, busy_until);
        }
        Ok(())
    }

    /// γ(x_i, m_i) in the slot's precision, plus its systolic cycle cost.
    fn transform(&mut self, slot: usize) -> Result<(Array1<f64>, u64)> {
        let (node, precision) = {
            let s = self.slot(slot);
            (s.node, s.precision)
        };
        if !self.weights_ready {
            return Err(Error::Contract(format!(
                "slot {slot} transformed before weights were prefetched"
            )));
        }
        let m = self
            .slot_mut(slot)
            .aggregated
            .take()
            .ok_or_else(|| Error::Contract(format!("slot {slot} has no aggregation result")))?;
        let rows = self.sim.systolic_rows;
        let cols = self.sim.systolic_cols;
        let weights = &self.layer.weights[&precision];
        match weights {
            LayerWeights::Gcn { weight } => {
                let out = m.dot(weight);
                let cost = matmul_cost(rows, cols, weight.nrows(), weight.ncols());
                Ok((out, cost))
            }
            LayerWeights::Gin { mlp, .. } => {
                let mut row = m;
                let mut cost = 0;
                for layer in mlp {
                    cost += matmul_cost(rows, cols, layer.weight.nrows(), layer.weight.ncols());
                    row = layer.apply_row(&row);
                }
                Ok((row, cost))
            }
            LayerWeights::Sage { w_self, w_agg, .. } => {
                let self_row = Array1::from(self.layer.self_row(node as usize, precision)?);
                let out = self_row.dot(w_self) + m.dot(w_agg);
                let cost = matmul_cost(rows, cols, w_agg.nrows(), w_agg.ncols())
                    + matmul_cost(rows, cols, w_self.nrows(), w_self.ncols());
                Ok((out, cost))
            }
        }
    }

    fn on_transform_done(&mut self, slot: usize) -> Result<()> {
        self.transition(slot, NodeState::WriteBack);
        let (updated_ptr, row) = {
            let s = self.slot_mut(slot);
            (s.updated_ptr, s.output_row.take().expect("transform produced a row"))
        };
        self.layer.output.row_mut(updated_ptr).assign(&row);

        let bank = self.sim.bank_of_slot(slot);
        let req = MemRequest {
            slot,
            kind: MemReqKind::WriteBack,
            words: self.layer.output.ncols() as u64,
        };
        if let Some(done_at) = self.mem.request(bank, req, self.now) {
            self.queue.schedule(done_at, Event::MemComplete { bank });
        }
        Ok(())
    }

    fn on_writeback_done(&mut self, slot: usize) -> Result<()> {
        self.transition(slot, NodeState::Done);
        let now = self.now;
        let s = self.slots[slot].take().expect("writeback for an empty slot");
        self.records.push(NodeRecord {
            layer: self.layer_idx,
            node: s.node,
            degree: s.neighbor_count as u32,
            precision: s.precision,
            program_cycle: s.program_cycle,
            aggregation_start_cycle: s.aggregation_start_cycle,
            fetch_complete_cycle: s.fetch_complete_cycle,
            done_cycle: now,
        });
        self.host.release(slot);
        self.counters.slots_freed += 1;
        self.done_in_layer += 1;

        if let SchedulerPolicy::DoubleBuffered { .. } = self.policy {
            let b = self.batch_of(s.node);
            self.batch_done[b] += 1;
            self.advance_batches();
        }
        self.schedule_host_tick(now + 1);

        if self.done_in_layer == self.g.num_nodes() {
            self.finish_layer()?;
        }
        Ok(())
    }

    fn batch_len(&self, batch: usize) -> usize {
        let SchedulerPolicy::DoubleBuffered { batch: size } = self.policy else {
            return self.g.num_nodes();
        };
        let start = batch * size;
        let end = ((batch + 1) * size).min(self.g.num_nodes());
        end - start
    }

    fn advance_batches(&mut self) {
        let mut advanced = false;
        while self.current_batch < self.batch_done.len()
            && self.batch_done[self.current_batch] == self.batch_len(self.current_batch)
        {
            self.current_batch += 1;
            advanced = true;
        }
        if !advanced {
            return;
        }
        // Release aggregation requests that were waiting for their batch.
        let mut gated = std::mem::take(&mut self.gated_slots);
        gated.sort_by_key(|&slot| self.slot(slot).node);
        let now = self.now;
        for slot in gated {
            self.request_aggregation(slot, now);
        }
        self.schedule_host_tick(now + 1);
    }

    fn finish_layer(&mut self) -> Result<()> {
        if self.layer_idx + 1 == self.layer_weights.len() {
            return Ok(());
        }
        self.layer_idx += 1;
        let input = FeatureMatrix::new(self.layer.output.clone())?;
        self.layer = LayerRuntime::build(
            self.g,
            self.kind,
            &self.layer_weights[self.layer_idx],
            input,
            &self.used_precisions,
        )?;
        self.pending = (0..self.g.num_nodes() as NodeId).collect();
        self.done_in_layer = 0;
        self.current_batch = 0;
        self.batch_done.iter_mut().for_each(|b| *b = 0);
        let now = self.now;
        self.start_layer(now);
        Ok(())
    }

    // ------------------------------------------------------------------
    // Bookkeeping
    // ------------------------------------------------------------------

    fn slot(&self, slot: usize) -> &SlotState {
        self.slots[slot].as_ref().expect("slot is occupied")
    }

    fn slot_mut(&mut self, slot: usize) -> &mut SlotState {
        self.slots[slot].as_mut().expect("slot is occupied")
    }

    fn transition(&mut self, slot: usize, to: NodeState) {
        let (node, from) = {
            let s = self.slot_mut(slot);
            let from = s.state;
            s.state = to;
            (s.node, from)
        };
        debug_assert_eq!(from.next(), Some(to), "transition skipped a state");
        self.trace.push(Transition {
            cycle: self.now,
            layer: self.layer_idx,
            slot,
            node,
            from,
            to,
        });
    }
}

impl LayerRuntime {
    fn build(
        g: &Graph,
        kind: ModelKind,
        weights: &LayerWeights,
        input: FeatureMatrix,
        used: &[Precision],
    ) -> Result<Self> {
        let mut per_precision = BTreeMap::new();
        let mut qp_x = BTreeMap::new();
        let mut sage_msgs = BTreeMap::new();
        let mut qp_msg = BTreeMap::new();

        for &p in used {
            match p.bits() {
                None => {
                    per_precision.insert(p, weights.clone());
                }
                Some(bits) => {
                    per_precision.insert(p, quantized_weights(weights, bits)?);
                    qp_x.insert(p, calibrate(input.as_array().iter().copied(), bits)?);
                }
            }
        }

        if kind == ModelKind::GraphSage {
            for &p in used {
                let w = &per_precision[&p];
                let LayerWeights::Sage {
                    w_msg,
                    bias,
                    activation,
                    ..
                } = w
                else {
                    unreachable!("GraphSAGE run carries sage weights");
                };
                let x = match p.bits() {
                    None => input.as_array().clone(),
                    Some(bits) => fake_quantize_matrix(input.as_array(), bits)?.0,
                };
                let mut h = x.dot(w_msg);
                for mut row in h.rows_mut() {
                    row += bias;
                    row.mapv_inplace(|v| activation.apply(v));
                }
                if let Some(bits) = p.bits() {
                    qp_msg.insert(p, calibrate(h.iter().copied(), bits)?);
                }
                sage_msgs.insert(p, h);
            }
        }

        let norm = if kind == ModelKind::Gcn {
            crate::model::gcn_norm_factors(g)
        } else {
            Vec::new()
        };

        let msg_dim = weights.message_dim();
        let output = Array2::zeros((g.num_nodes(), weights.output_dim()));
        Ok(LayerRuntime {
            weights: per_precision,
            qp_x,
            sage_msgs,
            qp_msg,
            norm,
            input,
            output,
            msg_dim,
        })
    }

    /// The node's own embedding as seen by its precision path: raw for
    /// float slots, quantize-dequantized for integer slots.
    fn self_row(&self, node: usize, precision: Precision) -> Result<Vec<f64>> {
        let row = self.input.row(node);
        match precision {
            Precision::Float32 => Ok(row.to_vec()),
            _ => {
                let qp = &self.qp_x[&precision];
                row.iter()
                    .map(|&x| Ok(dequantize(quantize(x, qp)?, qp)))
                    .collect()
            }
        }
    }
}

/// Per-tensor fake quantization of a layer's weight matrices. Biases and
/// the GIN epsilon stay in full precision.
fn quantized_weights(weights: &LayerWeights, bits: u8) -> Result<LayerWeights> {
    Ok(match weights {
        LayerWeights::Gcn { weight } => LayerWeights::Gcn {
            weight: fake_quantize_matrix(weight, bits)?.0,
        },
        LayerWeights::Gin { mlp, epsilon } => LayerWeights::Gin {
            mlp: mlp
                .iter()
                .map(|l| {
                    Ok(MlpLayer {
                        weight: fake_quantize_matrix(&l.weight, bits)?.0,
                        bias: l.bias.clone(),
                        activation: l.activation,
                    })
                })
                .collect::<Result<Vec<_>>>()?,
            epsilon: *epsilon,
        },
        LayerWeights::Sage {
            w_self,
            w_agg,
            w_msg,
            bias,
            activation,
        } => LayerWeights::Sage {
            w_self: fake_quantize_matrix(w_self, bits)?.0,
            w_agg: fake_quantize_matrix(w_agg, bits)?.0,
            w_msg: fake_quantize_matrix(w_msg, bits)?.0,
            bias: bias.clone(),
            activation: *activation,
        },
    })
}

/// Next member of `set` strictly after `cursor`, wrapping.
fn next_round_robin(set: &BTreeSet<usize>, cursor: usize) -> usize {
    *set.range(cursor + 1..)
        .next()
        .or_else(|| set.iter().next())
        .expect("round robin over an empty set")
}

fn compute_phase_stats(trace: &[Transition], out: &mut BTreeMap<NodeState, PhaseStats>) {
    // Dwell time in a state = cycle of the transition leaving it minus the
    // cycle of the transition entering it, per (layer, node).
    let mut entered: BTreeMap<(usize, NodeId), (NodeState, u64)> = BTreeMap::new();
    for t in trace {
        let key = (t.layer, t.node);
        if let Some((state, since)) = entered.insert(key, (t.to, t.cycle)) {
            debug_assert_eq!(state, t.from);
            out.entry(state)
                .or_insert_with(|| PhaseStats::new(state))
                .record(t.cycle - since);
        }
    }
}
