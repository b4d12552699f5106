//! Cycle-approximate simulator of an event-driven, mixed-precision GNN
//! inference accelerator, paired with an exact functional reference.
//!
//! The crate has three layers:
//!
//! - workload: [`graph`] stores sparse graphs and generates synthetic
//!   power-law workloads; [`features`] holds dense node embeddings.
//! - arithmetic: [`model`] implements the GCN / GIN / GraphSAGE update laws
//!   in full precision; [`quant`] implements scalar quantization, per-node
//!   precision assignment, and the nodeslot resource-allocation rule.
//! - timing: [`sim`] runs the discrete-event accelerator model (scoreboard,
//!   prefetcher, NoC aggregation engine, systolic transformation engine) and
//!   an equivalent double-buffered baseline; [`experiment`] drives runs from
//!   config files.

pub mod error;
pub mod experiment;
pub mod features;
pub mod graph;
pub mod model;
pub mod quant;
pub mod sim;

pub use error::{Error, Result};
pub use features::FeatureMatrix;
pub use graph::{build_csr, generate_power_law_graph, load_edge_list, DegreeStats, Graph, NodeId};
pub use model::{
    gcn_layer, gcn_norm_factors, gin_layer, message_passing_layer, sage_layer, Activation,
    Aggregation, LayerWeights, MlpLayer, ModelConfig, ModelKind, Placement,
};
pub use quant::{
    calibrate, degree_quant_assign, degree_threshold_assign, dequantize, dequantize_tensor,
    nodeslot_allocation, protection_probabilities, quantize, quantize_tensor, Precision,
    PrecisionAssignment, PrecisionBudget, QuantParams, ResourceBudget, ResourceKind,
};
