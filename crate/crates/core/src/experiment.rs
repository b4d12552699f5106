//! Experiment driver: typed config files, workload construction, run and
//! sweep orchestration, and the CSV report writers.
//!
//! Config files are a flat key-value text format with `[section]` headers
//! and `#` comments. Every field has a default; unknown sections or keys
//! are rejected. The resolved config is written next to every report as
//! `config.resolved`, and re-running from that file reproduces the report
//! byte for byte.
//!
//! All randomness flows from the single `[run] seed` through labeled
//! sub-seeds (`sub_seed(seed, label)`), so workload, weights, and precision
//! assignment each draw from their own deterministic stream.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{load_edge_list, generate_power_law_graph, Graph};
use crate::model::{Activation, LayerWeights, ModelConfig, ModelKind};
use crate::quant::{
    degree_quant_assign, degree_threshold_assign, nodeslot_allocation, Precision,
    PrecisionAssignment, PrecisionBudget, ResourceBudget, ResourceKind,
};
use crate::sim::{run_with_policy, SchedulerPolicy, SimConfig, SimOutput, SubnetConfig};

/// Deterministic sub-seed: the root seed hashed with a purpose label.
pub fn sub_seed(seed: u64, label: &str) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    hasher.update(label.as_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GraphSource {
    Synthetic,
    File,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PrecisionPolicy {
    AllFloat,
    DegreeQuant,
    Threshold,
    File,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SchedulerChoice {
    EventDriven,
    DoubleBuffered,
    /// Run both policies and report one row each.
    Both,
}

impl SchedulerChoice {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "event-driven" => Ok(SchedulerChoice::EventDriven),
            "double-buffered" => Ok(SchedulerChoice::DoubleBuffered),
            "both" => Ok(SchedulerChoice::Both),
            other => Err(Error::Config(format!("unknown scheduler '{other}'"))),
        }
    }

    fn text(&self) -> &'static str {
        match self {
            SchedulerChoice::EventDriven => "event-driven",
            SchedulerChoice::DoubleBuffered => "double-buffered",
            SchedulerChoice::Both => "both",
        }
    }
}

/// Full experiment description. Field defaults are the values produced by
/// `ExperimentConfig::default()` and are documented in the README.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    // [graph]
    pub graph_source: GraphSource,
    pub graph_path: String,
    pub undirected: bool,
    pub nodes: usize,
    pub gamma: f64,
    pub max_degree: usize,

    // [model]
    pub model_kind: ModelKind,
    pub in_features: usize,
    pub hidden_features: usize,
    pub out_features: usize,
    pub layers: usize,
    pub sage_activation: Activation,

    // [precision]
    pub precision_policy: PrecisionPolicy,
    pub p_min: f64,
    pub p_max: f64,
    pub int4_max_degree: u32,
    pub float_min_degree: u32,
    pub precision_file: String,

    // [hardware]
    /// 0 means "derive from the [budget] section via the allocation rule".
    pub nodeslots: usize,
    pub num_banks: usize,
    pub tags_per_bank: usize,
    pub mem_latency: u64,
    pub mem_words_per_cycle: u64,
    pub weight_latency: u64,
    pub weight_words_per_cycle: u64,
    pub message_queue_capacity: usize,
    pub partial_response: bool,
    pub core_width: usize,
    pub float_cores: usize,
    pub int8_cores: usize,
    pub int4_cores: usize,
    pub systolic_rows: usize,
    pub systolic_cols: usize,
    pub agg_buffer_rows: usize,
    pub clock_mhz: f64,
    pub coeff_frac_bits: u32,

    // [budget] — optional Eq.-style nodeslot budget, keyed
    // `<precision>_<resource>_{max,cost}`.
    pub budget: BTreeMap<(Precision, ResourceKind), (f64, f64)>,

    // [scheduler]
    pub scheduler: SchedulerChoice,
    pub batch: usize,

    // [run]
    pub seed: u64,
    pub out_dir: String,
    pub trace: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let sim = SimConfig::default();
        ExperimentConfig {
            graph_source: GraphSource::Synthetic,
            graph_path: String::new(),
            undirected: true,
            nodes: 1000,
            gamma: 2.0,
            max_degree: 64,
            model_kind: ModelKind::Gcn,
            in_features: 16,
            hidden_features: 16,
            out_features: 16,
            layers: 1,
            sage_activation: Activation::Relu,
            precision_policy: PrecisionPolicy::AllFloat,
            p_min: 0.0,
            p_max: 0.1,
            int4_max_degree: 1,
            float_min_degree: 16,
            precision_file: String::new(),
            nodeslots: sim.nodeslots,
            num_banks: sim.num_banks,
            tags_per_bank: sim.tags_per_bank,
            mem_latency: sim.mem_latency,
            mem_words_per_cycle: sim.mem_words_per_cycle,
            weight_latency: sim.weight_latency,
            weight_words_per_cycle: sim.weight_words_per_cycle,
            message_queue_capacity: sim.message_queue_capacity,
            partial_response: sim.partial_response,
            core_width: sim.core_width,
            float_cores: sim.subnets[&Precision::Float32].cores,
            int8_cores: sim.subnets[&Precision::Int8].cores,
            int4_cores: sim.subnets[&Precision::Int4].cores,
            systolic_rows: sim.systolic_rows,
            systolic_cols: sim.systolic_cols,
            agg_buffer_rows: sim.agg_buffer_rows,
            clock_mhz: sim.clock_mhz,
            coeff_frac_bits: sim.coeff_frac_bits,
            budget: BTreeMap::new(),
            scheduler: SchedulerChoice::EventDriven,
            batch: 64,
            seed: 0,
            out_dir: "out".into(),
            trace: false,
        }
    }
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse::<T>()
        .map_err(|_| Error::Config(format!("bad value '{value}' for key '{key}'")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Config(format!("bad boolean '{value}' for key '{key}'"))),
    }
}

impl ExperimentConfig {
    /// Applies one `section.key = value` assignment. Sweep grids reuse this,
    /// so unknown keys are rejected in both places.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "graph.source" => {
                self.graph_source = match value {
                    "synthetic" => GraphSource::Synthetic,
                    "file" => GraphSource::File,
                    _ => return Err(Error::Config(format!("unknown graph source '{value}'"))),
                }
            }
            "graph.path" => self.graph_path = value.to_string(),
            "graph.undirected" => self.undirected = parse_bool(key, value)?,
            "graph.nodes" => self.nodes = parse_as(key, value)?,
            "graph.gamma" => self.gamma = parse_as(key, value)?,
            "graph.max_degree" => self.max_degree = parse_as(key, value)?,

            "model.kind" => self.model_kind = ModelKind::parse(value)?,
            "model.in_features" => self.in_features = parse_as(key, value)?,
            "model.hidden_features" => self.hidden_features = parse_as(key, value)?,
            "model.out_features" => self.out_features = parse_as(key, value)?,
            "model.layers" => self.layers = parse_as(key, value)?,
            "model.sage_activation" => self.sage_activation = Activation::parse(value)?,

            "precision.policy" => {
                self.precision_policy = match value {
                    "all-float" => PrecisionPolicy::AllFloat,
                    "degree-quant" => PrecisionPolicy::DegreeQuant,
                    "threshold" => PrecisionPolicy::Threshold,
                    "file" => PrecisionPolicy::File,
                    _ => {
                        return Err(Error::Config(format!(
                            "unknown precision policy '{value}'"
                        )))
                    }
                }
            }
            "precision.p_min" => self.p_min = parse_as(key, value)?,
            "precision.p_max" => self.p_max = parse_as(key, value)?,
            "precision.int4_max_degree" => self.int4_max_degree = parse_as(key, value)?,
            "precision.float_min_degree" => self.float_min_degree = parse_as(key, value)?,
            "precision.file" => self.precision_file = value.to_string(),

            "hardware.nodeslots" => {
                self.nodeslots = if value == "auto" { 0 } else { parse_as(key, value)? }
            }
            "hardware.num_banks" => self.num_banks = parse_as(key, value)?,
            "hardware.tags_per_bank" => self.tags_per_bank = parse_as(key, value)?,
            "hardware.mem_latency" => self.mem_latency = parse_as(key, value)?,
            "hardware.mem_words_per_cycle" => self.mem_words_per_cycle = parse_as(key, value)?,
            "hardware.weight_latency" => self.weight_latency = parse_as(key, value)?,
            "hardware.weight_words_per_cycle" => {
                self.weight_words_per_cycle = parse_as(key, value)?
            }
            "hardware.message_queue_capacity" => {
                self.message_queue_capacity = parse_as(key, value)?
            }
            "hardware.partial_response" => self.partial_response = parse_bool(key, value)?,
            "hardware.core_width" => self.core_width = parse_as(key, value)?,
            "hardware.float_cores" => self.float_cores = parse_as(key, value)?,
            "hardware.int8_cores" => self.int8_cores = parse_as(key, value)?,
            "hardware.int4_cores" => self.int4_cores = parse_as(key, value)?,
            "hardware.systolic_rows" => self.systolic_rows = parse_as(key, value)?,
            "hardware.systolic_cols" => self.systolic_cols = parse_as(key, value)?,
            "hardware.agg_buffer_rows" => self.agg_buffer_rows = parse_as(key, value)?,
            "hardware.clock_mhz" => self.clock_mhz = parse_as(key, value)?,
            "hardware.coeff_frac_bits" => self.coeff_frac_bits = parse_as(key, value)?,

            "scheduler.policy" => self.scheduler = SchedulerChoice::parse(value)?,
            "scheduler.batch" => self.batch = parse_as(key, value)?,

            "run.seed" => self.seed = parse_as(key, value)?,
            "run.out_dir" => self.out_dir = value.to_string(),
            "run.trace" => self.trace = parse_bool(key, value)?,

            _ if key.starts_with("budget.") => {
                let rest = &key["budget.".len()..];
                let parts: Vec<&str> = rest.split('_').collect();
                if parts.len() != 3 {
                    return Err(Error::Config(format!(
                        "budget key '{key}' must look like budget.<precision>_<resource>_<max|cost>"
                    )));
                }
                let precision = Precision::parse(parts[0])?;
                let resource = ResourceKind::parse(parts[1])?;
                let slot = self.budget.entry((precision, resource)).or_insert((0.0, 0.0));
                match parts[2] {
                    "max" => slot.0 = parse_as(key, value)?,
                    "cost" => slot.1 = parse_as(key, value)?,
                    _ => {
                        return Err(Error::Config(format!(
                            "budget key '{key}' must end in _max or _cost"
                        )))
                    }
                }
            }
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    pub fn parse_str(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut section = String::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = name.trim().to_string();
                match section.as_str() {
                    "graph" | "model" | "precision" | "hardware" | "budget" | "scheduler"
                    | "run" => {}
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown section '[{other}]'",
                            idx + 1
                        )))
                    }
                }
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!(
                    "line {}: expected 'key = value', got '{line}'",
                    idx + 1
                )));
            };
            if section.is_empty() {
                return Err(Error::Config(format!(
                    "line {}: key before any [section]",
                    idx + 1
                )));
            }
            cfg.set(&format!("{section}.{}", key.trim()), value)?;
        }
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let display = path.as_ref().display().to_string();
        let text = fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&display, e))?;
        Self::parse_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{display}: {msg}")),
            other => other,
        })
    }

    /// Canonical text form; `parse_str(to_text(c)) == c`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[graph]");
        let _ = writeln!(
            s,
            "source = {}",
            match self.graph_source {
                GraphSource::Synthetic => "synthetic",
                GraphSource::File => "file",
            }
        );
        let _ = writeln!(s, "path = {}", self.graph_path);
        let _ = writeln!(s, "undirected = {}", self.undirected);
        let _ = writeln!(s, "nodes = {}", self.nodes);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "max_degree = {}", self.max_degree);
        let _ = writeln!(s, "\n[model]");
        let _ = writeln!(s, "kind = {}", self.model_kind.name());
        let _ = writeln!(s, "in_features = {}", self.in_features);
        let _ = writeln!(s, "hidden_features = {}", self.hidden_features);
        let _ = writeln!(s, "out_features = {}", self.out_features);
        let _ = writeln!(s, "layers = {}", self.layers);
        let _ = writeln!(
            s,
            "sage_activation = {}",
            match self.sage_activation {
                Activation::Relu => "relu",
                Activation::Identity => "identity",
            }
        );
        let _ = writeln!(s, "\n[precision]");
        let _ = writeln!(
            s,
            "policy = {}",
            match self.precision_policy {
                PrecisionPolicy::AllFloat => "all-float",
                PrecisionPolicy::DegreeQuant => "degree-quant",
                PrecisionPolicy::Threshold => "threshold",
                PrecisionPolicy::File => "file",
            }
        );
        let _ = writeln!(s, "p_min = {}", self.p_min);
        let _ = writeln!(s, "p_max = {}", self.p_max);
        let _ = writeln!(s, "int4_max_degree = {}", self.int4_max_degree);
        let _ = writeln!(s, "float_min_degree = {}", self.float_min_degree);
        let _ = writeln!(s, "file = {}", self.precision_file);
        let _ = writeln!(s, "\n[hardware]");
        if self.nodeslots == 0 {
            let _ = writeln!(s, "nodeslots = auto");
        } else {
            let _ = writeln!(s, "nodeslots = {}", self.nodeslots);
        }
        let _ = writeln!(s, "num_banks = {}", self.num_banks);
        let _ = writeln!(s, "tags_per_bank = {}", self.tags_per_bank);
        let _ = writeln!(s, "mem_latency = {}", self.mem_latency);
        let _ = writeln!(s, "mem_words_per_cycle = {}", self.mem_words_per_cycle);
        let _ = writeln!(s, "weight_latency = {}", self.weight_latency);
        let _ = writeln!(s, "weight_words_per_cycle = {}", self.weight_words_per_cycle);
        let _ = writeln!(s, "message_queue_capacity = {}", self.message_queue_capacity);
        let _ = writeln!(s, "partial_response = {}", self.partial_response);
        let _ = writeln!(s, "core_width = {}", self.core_width);
        let _ = writeln!(s, "float_cores = {}", self.float_cores);
        let _ = writeln!(s, "int8_cores = {}", self.int8_cores);
        let _ = writeln!(s, "int4_cores = {}", self.int4_cores);
        let _ = writeln!(s, "systolic_rows = {}", self.systolic_rows);
        let _ = writeln!(s, "systolic_cols = {}", self.systolic_cols);
        let _ = writeln!(s, "agg_buffer_rows = {}", self.agg_buffer_rows);
        let _ = writeln!(s, "clock_mhz = {}", self.clock_mhz);
        let _ = writeln!(s, "coeff_frac_bits = {}", self.coeff_frac_bits);
        if !self.budget.is_empty() {
            let _ = writeln!(s, "\n[budget]");
            for (&(p, r), &(max, cost)) in &self.budget {
                let _ = writeln!(s, "{}_{}_max = {}", p.name(), r.name(), max);
                let _ = writeln!(s, "{}_{}_cost = {}", p.name(), r.name(), cost);
            }
        }
        let _ = writeln!(s, "\n[scheduler]");
        let _ = writeln!(s, "policy = {}", self.scheduler.text());
        let _ = writeln!(s, "batch = {}", self.batch);
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "out_dir = {}", self.out_dir);
        let _ = writeln!(s, "trace = {}", self.trace);
        s
    }

    /// Resolves the [budget] section into a `ResourceBudget`.
    fn resource_budget(&self) -> Result<ResourceBudget> {
        let mut grouped: BTreeMap<Precision, (BTreeMap<ResourceKind, f64>, BTreeMap<ResourceKind, f64>)> =
            BTreeMap::new();
        for (&(p, r), &(max, cost)) in &self.budget {
            let entry = grouped.entry(p).or_default();
            entry.0.insert(r, max);
            entry.1.insert(r, cost);
        }
        let mut budget = ResourceBudget::new();
        for (p, (max, cost)) in grouped {
            budget.insert(p, PrecisionBudget::new(max, cost)?);
        }
        Ok(budget)
    }

    /// Slot count: explicit, or the summed allocation-rule counts over the
    /// budgeted precisions when `nodeslots = auto`.
    pub fn resolved_nodeslots(&self) -> Result<usize> {
        if self.nodeslots > 0 {
            return Ok(self.nodeslots);
        }
        if self.budget.is_empty() {
            return Err(Error::Config(
                "nodeslots = auto requires a [budget] section".into(),
            ));
        }
        let budget = self.resource_budget()?;
        let mut total = 0;
        for p in budget.precisions().collect::<Vec<_>>() {
            total += nodeslot_allocation(&budget, p, false)?;
        }
        if total == 0 {
            return Err(Error::Config("budget allocates zero nodeslots".into()));
        }
        Ok(total)
    }

    pub fn sim_config(&self) -> Result<SimConfig> {
        let subnets: BTreeMap<Precision, SubnetConfig> = [
            (Precision::Float32, self.float_cores),
            (Precision::Int8, self.int8_cores),
            (Precision::Int4, self.int4_cores),
        ]
        .into_iter()
        .filter(|&(_, cores)| cores > 0)
        .map(|(p, cores)| (p, SubnetConfig::fitting(cores)))
        .collect();
        let cfg = SimConfig {
            nodeslots: self.resolved_nodeslots()?,
            num_banks: self.num_banks,
            tags_per_bank: self.tags_per_bank,
            mem_latency: self.mem_latency,
            mem_words_per_cycle: self.mem_words_per_cycle,
            weight_latency: self.weight_latency,
            weight_words_per_cycle: self.weight_words_per_cycle,
            message_queue_capacity: self.message_queue_capacity,
            partial_response: self.partial_response,
            core_width: self.core_width,
            subnets,
            systolic_rows: self.systolic_rows,
            systolic_cols: self.systolic_cols,
            agg_buffer_rows: self.agg_buffer_rows,
            clock_mhz: self.clock_mhz,
            coeff_frac_bits: self.coeff_frac_bits,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn build_graph(&self) -> Result<Graph> {
        match self.graph_source {
            GraphSource::Synthetic => generate_power_law_graph(
                self.nodes,
                self.gamma,
                self.max_degree,
                sub_seed(self.seed, "graph"),
            ),
            GraphSource::File => {
                if self.graph_path.is_empty() {
                    return Err(Error::Config("graph.path is required for file source".into()));
                }
                load_edge_list(&self.graph_path, self.nodes, self.undirected)
            }
        }
    }

    pub fn build_assignment(&self, g: &Graph) -> Result<PrecisionAssignment> {
        match self.precision_policy {
            PrecisionPolicy::AllFloat => Ok(PrecisionAssignment::all_float32(g.num_nodes())),
            PrecisionPolicy::DegreeQuant => {
                degree_quant_assign(g, self.p_min, self.p_max, sub_seed(self.seed, "assign"))
            }
            PrecisionPolicy::Threshold => {
                degree_threshold_assign(g, self.int4_max_degree, self.float_min_degree)
            }
            PrecisionPolicy::File => {
                if self.precision_file.is_empty() {
                    return Err(Error::Config(
                        "precision.file is required for the file policy".into(),
                    ));
                }
                PrecisionAssignment::load_text(&self.precision_file, g.num_nodes())
            }
        }
    }

    /// Layer stack `in -> hidden -> ... -> hidden -> out`, each layer with
    /// its own weight sub-seed.
    pub fn build_layers(&self) -> Result<Vec<LayerWeights>> {
        if self.layers == 0 {
            return Err(Error::Config("model.layers must be >= 1".into()));
        }
        let mut dims = Vec::with_capacity(self.layers + 1);
        dims.push(self.in_features);
        for _ in 1..self.layers {
            dims.push(self.hidden_features);
        }
        dims.push(self.out_features);
        let kind = self.model_kind;
        Ok((0..self.layers)
            .map(|l| {
                let mut w = LayerWeights::random(
                    kind,
                    dims[l],
                    self.hidden_features,
                    dims[l + 1],
                    sub_seed(self.seed, &format!("weights-{l}")),
                );
                if let LayerWeights::Sage { activation, .. } = &mut w {
                    *activation = self.sage_activation;
                }
                Ok(w)
            })
            .collect::<Result<Vec<_>>>()?)
    }

    pub fn build_features(&self, g: &Graph) -> FeatureMatrix {
        FeatureMatrix::random(g.num_nodes(), self.in_features, sub_seed(self.seed, "features"))
    }
}

/// One summary.csv row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub total_cycles: u64,
    pub latency_ms_at_clock: f64,
    pub nodes_per_ms: f64,
    pub scheduler: String,
    pub seed: u64,
    pub output_hash: String,
}

pub const SUMMARY_HEADER: &str =
    "total_cycles,latency_ms_at_clock,nodes_per_ms,scheduler,seed,output_hash";
pub const PER_NODE_HEADER: &str = "node_id,degree,precision,program_cycle,done_cycle";

impl RunSummary {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.6},{:.3},{},{},{}",
            self.total_cycles,
            self.latency_ms_at_clock,
            self.nodes_per_ms,
            self.scheduler,
            self.seed,
            self.output_hash
        )
    }
}

/// Outputs of `run`: one or two policy runs over the same workload.
#[derive(Debug)]
pub struct RunArtifacts {
    pub summaries: Vec<RunSummary>,
    pub outputs: Vec<SimOutput>,
}

fn policies_of(cfg: &ExperimentConfig) -> Vec<SchedulerPolicy> {
    match cfg.scheduler {
        SchedulerChoice::EventDriven => vec![SchedulerPolicy::EventDriven],
        SchedulerChoice::DoubleBuffered => {
            vec![SchedulerPolicy::DoubleBuffered { batch: cfg.batch }]
        }
        SchedulerChoice::Both => vec![
            SchedulerPolicy::EventDriven,
            SchedulerPolicy::DoubleBuffered { batch: cfg.batch },
        ],
    }
}

/// Builds the workload and runs the configured scheduler(s).
pub fn execute(cfg: &ExperimentConfig) -> Result<RunArtifacts> {
    let g = cfg.build_graph()?;
    let x = cfg.build_features(&g);
    let layers = cfg.build_layers()?;
    let assignment = cfg.build_assignment(&g)?;
    let model = ModelConfig::preset(cfg.model_kind);
    let sim = cfg.sim_config()?;

    let mut summaries = Vec::new();
    let mut outputs = Vec::new();
    for policy in policies_of(cfg) {
        let out = run_with_policy(&g, &model, &layers, &assignment, &x, &sim, policy)?;
        summaries.push(RunSummary {
            total_cycles: out.report.total_cycles,
            latency_ms_at_clock: out.report.latency_ms(),
            nodes_per_ms: out.report.nodes_per_ms(),
            scheduler: out.report.scheduler.clone(),
            seed: cfg.seed,
            output_hash: out.output.content_hash(),
        });
        outputs.push(out);
    }
    Ok(RunArtifacts { summaries, outputs })
}

/// Runs and writes `summary.csv`, `per_node.csv`, `config.resolved`, and
/// (when tracing) `trace.txt` under `out_dir`.
pub fn run_to_dir(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunArtifacts> {
    let artifacts = execute(cfg)?;
    write_dir(cfg, &artifacts, out_dir)?;
    Ok(artifacts)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path.display().to_string(), e))
}

pub fn write_dir(cfg: &ExperimentConfig, artifacts: &RunArtifacts, out_dir: &Path) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir.display().to_string(), e))?;

    let mut summary = String::from(SUMMARY_HEADER);
    summary.push('\n');
    for s in &artifacts.summaries {
        summary.push_str(&s.csv_row());
        summary.push('\n');
    }
    write_file(&out_dir.join("summary.csv"), &summary)?;

    // Per-node rows for the first (primary) policy run.
    if let Some(out) = artifacts.outputs.first() {
        let mut per_node = String::from(PER_NODE_HEADER);
        per_node.push('\n');
        for r in &out.report.per_node {
            let _ = writeln!(
                per_node,
                "{},{},{},{},{}",
                r.node, r.degree, r.precision, r.program_cycle, r.done_cycle
            );
        }
        write_file(&out_dir.join("per_node.csv"), &per_node)?;
    }

    write_file(&out_dir.join("config.resolved"), &cfg.to_text())?;

    if cfg.trace {
        let mut text = String::new();
        for out in &artifacts.outputs {
            for t in &out.trace {
                text.push_str(&t.line());
                text.push('\n');
            }
        }
        write_file(&out_dir.join("trace.txt"), &text)?;
    }
    Ok(())
}

/// One sweep axis: a config key and its values.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SweepAxis {
    pub key: String,
    pub values: Vec<String>,
}

impl SweepAxis {
    /// Parses `section.key=v1,v2,v3`.
    pub fn parse(spec: &str) -> Result<Self> {
        let Some((key, values)) = spec.split_once('=') else {
            return Err(Error::Config(format!(
                "grid spec '{spec}' must look like section.key=v1,v2"
            )));
        };
        let values: Vec<String> = values.split(',').map(|v| v.trim().to_string()).collect();
        if values.is_empty() || values.iter().any(String::is_empty) {
            return Err(Error::Config(format!("grid spec '{spec}' has empty values")));
        }
        Ok(SweepAxis {
            key: key.trim().to_string(),
            values,
        })
    }
}

/// Cartesian sweep over the axes. Grid points run concurrently, each owning
/// its simulator instance; rows keep deterministic grid order. Returns the
/// sweep.csv text.
pub fn sweep(cfg: &ExperimentConfig, axes: &[SweepAxis]) -> Result<String> {
    // Validate keys and values up front against a scratch config.
    for axis in axes {
        let mut probe = cfg.clone();
        for v in &axis.values {
            probe.set(&axis.key, v)?;
        }
    }

    let mut points: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for axis in axes {
        let mut next = Vec::with_capacity(points.len() * axis.values.len());
        for point in &points {
            for v in &axis.values {
                let mut p = point.clone();
                p.push((axis.key.clone(), v.clone()));
                next.push(p);
            }
        }
        points = next;
    }

    let results: Vec<Result<Vec<RunSummary>>> = points
        .par_iter()
        .map(|assignments| {
            let mut point_cfg = cfg.clone();
            for (k, v) in assignments {
                point_cfg.set(k, v)?;
            }
            Ok(execute(&point_cfg)?.summaries)
        })
        .collect();

    let mut csv = String::new();
    for axis in axes {
        csv.push_str(&axis.key);
        csv.push(',');
    }
    csv.push_str(SUMMARY_HEADER);
    csv.push('\n');
    for (point, result) in points.iter().zip(results) {
        let summaries = result?;
        for s in summaries {
            for (_, v) in point {
                csv.push_str(v);
                csv.push(',');
            }
            csv.push_str(&s.csv_row());
            csv.push('\n');
        }
    }
    Ok(csv)
}

/// Dataset statistics line for the `stats` verb.
pub fn stats_text(cfg: &ExperimentConfig) -> Result<String> {
    let g = cfg.build_graph()?;
    let stats = g.degree_stats();
    Ok(format!(
        "nodes = {}\nedges = {}\nmean_degree = {:.3}\nmin_degree = {}\nmax_degree = {}\nfeature_dim = {}\n",
        g.num_nodes(),
        g.num_edges(),
        stats.mean,
        stats.min,
        stats.max,
        cfg.in_features
    ))
}

pub fn out_dir_path(cfg: &ExperimentConfig, override_dir: Option<&str>) -> PathBuf {
    PathBuf::from(override_dir.unwrap_or(&cfg.out_dir))
}
