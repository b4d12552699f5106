//! Floating-point reference implementations of the three GNN layer types.
//!
//! These are the simulator's numerical ground truth. Aggregation walks each
//! node's neighbor list in ascending-ID order with a single accumulator per
//! feature, so outputs are bit-reproducible for a canonical graph. The GCN
//! self term is merged into that order at the node's own ID; the GIN residual
//! seeds the accumulator before the neighbor sweep.

use ndarray::{Array1, Array2};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::{Graph, NodeId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Gcn,
    Gin,
    GraphSage,
}

impl ModelKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "gin" => Ok(ModelKind::Gin),
            "sage" | "graphsage" => Ok(ModelKind::GraphSage),
            other => Err(Error::Config(format!("unknown model kind '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Gcn => "gcn",
            ModelKind::Gin => "gin",
            ModelKind::GraphSage => "graphsage",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Aggregation {
    Sum,
    Mean,
}

/// Where a residual or normalization term applies in the update law.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Placement {
    None,
    Aggregation,
    Transformation,
}

/// Per-model feature matrix: aggregation function, residual placement,
/// normalization placement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModelConfig {
    pub kind: ModelKind,
    pub aggregation: Aggregation,
    pub residual: Placement,
    pub normalization: Placement,
}

impl ModelConfig {
    pub fn preset(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gcn => ModelConfig {
                kind,
                aggregation: Aggregation::Sum,
                residual: Placement::None,
                normalization: Placement::Aggregation,
            },
            ModelKind::Gin => ModelConfig {
                kind,
                aggregation: Aggregation::Sum,
                residual: Placement::Aggregation,
                normalization: Placement::None,
            },
            ModelKind::GraphSage => ModelConfig {
                kind,
                aggregation: Aggregation::Mean,
                residual: Placement::Transformation,
                normalization: Placement::Transformation,
            },
        }
    }

    /// The three preset kinds bind their fields exactly; anything else is
    /// rejected.
    pub fn validate(&self) -> Result<()> {
        if *self != ModelConfig::preset(self.kind) {
            return Err(Error::Config(format!(
                "model config does not match the {} preset",
                self.kind.name()
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub fn apply(&self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(0.0),
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "identity" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            other => Err(Error::Config(format!("unknown activation '{other}'"))),
        }
    }
}

/// One fully-connected stage of the GIN MLP. Weight is `in × out`; rows are
/// feature vectors, applied as `x · W + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub activation: Activation,
}

impl MlpLayer {
    pub fn new(weight: Array2<f64>, bias: Array1<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weight.ncols() {
            return Err(Error::Shape(format!(
                "mlp bias length {} != output dim {}",
                bias.len(),
                weight.ncols()
            )));
        }
        Ok(MlpLayer {
            weight,
            bias,
            activation,
        })
    }

    pub fn apply_row(&self, x: &Array1<f64>) -> Array1<f64> {
        let mut y = x.dot(&self.weight) + &self.bias;
        y.mapv_inplace(|v| self.activation.apply(v));
        y
    }
}

/// Named dense parameters for one layer of one model.
///
/// All weight matrices are stored `in_dim × out_dim` and applied to feature
/// rows as `x · W`.
#[derive(Debug, Clone, PartialEq)]
pub enum LayerWeights {
    Gcn {
        weight: Array2<f64>,
    },
    Gin {
        mlp: Vec<MlpLayer>,
        epsilon: f64,
    },
    Sage {
        /// W1, the self (residual) projection.
        w_self: Array2<f64>,
        /// W2, applied to the aggregated mean message.
        w_agg: Array2<f64>,
        /// W3, the per-neighbor message projection.
        w_msg: Array2<f64>,
        bias: Array1<f64>,
        activation: Activation,
    },
}

impl LayerWeights {
    pub fn gcn(weight: Array2<f64>) -> Self {
        LayerWeights::Gcn { weight }
    }

    pub fn gin(mlp: Vec<MlpLayer>, epsilon: f64) -> Result<Self> {
        if mlp.is_empty() {
            return Err(Error::Shape("GIN MLP needs at least one layer".into()));
        }
        if epsilon < 0.0 {
            return Err(Error::Shape(format!("epsilon must be >= 0, got {epsilon}")));
        }
        for pair in mlp.windows(2) {
            if pair[0].weight.ncols() != pair[1].weight.nrows() {
                return Err(Error::Shape("GIN MLP layer dims do not chain".into()));
            }
        }
        Ok(LayerWeights::Gin { mlp, epsilon })
    }

    pub fn sage(
        w_self: Array2<f64>,
        w_agg: Array2<f64>,
        w_msg: Array2<f64>,
        bias: Array1<f64>,
        activation: Activation,
    ) -> Result<Self> {
        if w_msg.ncols() != bias.len() {
            return Err(Error::Shape(format!(
                "bias length {} != message dim {}",
                bias.len(),
                w_msg.ncols()
            )));
        }
        if w_agg.nrows() != w_msg.ncols() {
            return Err(Error::Shape(format!(
                "W2 input dim {} != message dim {}",
                w_agg.nrows(),
                w_msg.ncols()
            )));
        }
        if w_self.ncols() != w_agg.ncols() {
            return Err(Error::Shape(format!(
                "W1 output dim {} != W2 output dim {}",
                w_self.ncols(),
                w_agg.ncols()
            )));
        }
        if w_self.nrows() != w_msg.nrows() {
            return Err(Error::Shape(format!(
                "W1 input dim {} != W3 input dim {}",
                w_self.nrows(),
                w_msg.nrows()
            )));
        }
        Ok(LayerWeights::Sage {
            w_self,
            w_agg,
            w_msg,
            bias,
            activation,
        })
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            LayerWeights::Gcn { .. } => ModelKind::Gcn,
            LayerWeights::Gin { .. } => ModelKind::Gin,
            LayerWeights::Sage { .. } => ModelKind::GraphSage,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            LayerWeights::Gcn { weight } => weight.nrows(),
            LayerWeights::Gin { mlp, .. } => mlp[0].weight.nrows(),
            LayerWeights::Sage { w_self, .. } => w_self.nrows(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            LayerWeights::Gcn { weight } => weight.ncols(),
            LayerWeights::Gin { mlp, .. } => mlp.last().unwrap().weight.ncols(),
            LayerWeights::Sage { w_agg, .. } => w_agg.ncols(),
        }
    }

    /// Width of the vector each aggregation produces: the raw feature dim for
    /// GCN/GIN, the projected message dim for GraphSAGE.
    pub fn message_dim(&self) -> usize {
        match self {
            LayerWeights::Gcn { weight } => weight.nrows(),
            LayerWeights::Gin { mlp, .. } => mlp[0].weight.nrows(),
            LayerWeights::Sage { w_msg, .. } => w_msg.ncols(),
        }
    }

    /// Total parameter word count; the weight prefetch cost model uses this.
    pub fn num_words(&self) -> usize {
        match self {
            LayerWeights::Gcn { weight } => weight.len(),
            LayerWeights::Gin { mlp, .. } => {
                mlp.iter().map(|l| l.weight.len() + l.bias.len()).sum()
            }
            LayerWeights::Sage {
                w_self,
                w_agg,
                w_msg,
                bias,
                ..
            } => w_self.len() + w_agg.len() + w_msg.len() + bias.len(),
        }
    }

    /// Randomly initialized weights with entries in `[-0.5, 0.5)`. GIN gets a
    /// two-stage ReLU MLP through `hidden`; GraphSAGE projects messages
    /// through `hidden` with ReLU.
    pub fn random(kind: ModelKind, d_in: usize, hidden: usize, d_out: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let dist = Uniform::new(-0.5, 0.5);
        let mut mat = |r: usize, c: usize| {
            Array2::from_shape_simple_fn((r, c), || dist.sample(&mut rng))
        };
        match kind {
            ModelKind::Gcn => LayerWeights::gcn(mat(d_in, d_out)),
            ModelKind::Gin => {
                let w1 = mat(d_in, hidden);
                let w2 = mat(hidden, d_out);
                LayerWeights::gin(
                    vec![
                        MlpLayer::new(w1, Array1::zeros(hidden), Activation::Relu).unwrap(),
                        MlpLayer::new(w2, Array1::zeros(d_out), Activation::Identity).unwrap(),
                    ],
                    0.1,
                )
                .unwrap()
            }
            ModelKind::GraphSage => {
                let w_self = mat(d_in, d_out);
                let w_msg = mat(d_in, hidden);
                let w_agg = mat(hidden, d_out);
                LayerWeights::sage(w_self, w_agg, w_msg, Array1::zeros(hidden), Activation::Relu)
                    .unwrap()
            }
        }
    }

    fn check_input(&self, x: &FeatureMatrix, g: &Graph) -> Result<()> {
        if x.num_nodes() != g.num_nodes() {
            return Err(Error::Shape(format!(
                "feature rows {} != graph nodes {}",
                x.num_nodes(),
                g.num_nodes()
            )));
        }
        if x.dim() != self.input_dim() {
            return Err(Error::Shape(format!(
                "feature dim {} != weight input dim {}",
                x.dim(),
                self.input_dim()
            )));
        }
        Ok(())
    }
}

/// GCN normalization factors `d̂_i = 1 + Σ_{j∈N(i)} e_{j,i}`.
pub fn gcn_norm_factors(g: &Graph) -> Vec<f64> {
    (0..g.num_nodes())
        .map(|v| 1.0 + g.neighbors(v as NodeId).map(|(_, w)| w).sum::<f64>())
        .collect()
}

/// Single GCN layer: `x'_i = W Σ_{j∈N_i∪{i}} e_{j,i}/√(d̂_j d̂_i) · x_j`,
/// with the implicit self edge weighted 1.
pub fn gcn_layer(g: &Graph, x: &FeatureMatrix, w: &LayerWeights) -> Result<FeatureMatrix> {
    let LayerWeights::Gcn { weight } = w else {
        return Err(Error::Shape("gcn_layer needs GCN weights".into()));
    };
    w.check_input(x, g)?;
    let norm = gcn_norm_factors(g);
    let dim = x.dim();

    let mut agg = ndarray::Array2::<f64>::zeros((g.num_nodes(), dim));
    for i in 0..g.num_nodes() {
        let mut acc = Array1::<f64>::zeros(dim);
        let inv_sqrt_di = 1.0 / norm[i].sqrt();
        let mut self_done = false;
        let add_self = |acc: &mut Array1<f64>| {
            let coeff = inv_sqrt_di * inv_sqrt_di;
            acc.scaled_add(coeff, &x.row(i));
        };
        for (j, e) in g.neighbors(i as NodeId) {
            if !self_done && (j as usize) >= i {
                add_self(&mut acc);
                self_done = true;
            }
            let coeff = e / (norm[j as usize].sqrt()) * inv_sqrt_di;
            acc.scaled_add(coeff, &x.row(j as usize));
        }
        if !self_done {
            add_self(&mut acc);
        }
        agg.row_mut(i).assign(&acc);
    }
    FeatureMatrix::new(agg.dot(weight))
}

/// Single GIN layer: `x'_i = MLP((1 + ε)·x_i + Σ_{j∈N(i)} x_j)`. Edge weights
/// are ignored; GIN aggregates raw embeddings.
pub fn gin_layer(g: &Graph, x: &FeatureMatrix, w: &LayerWeights) -> Result<FeatureMatrix> {
    let LayerWeights::Gin { mlp, epsilon } = w else {
        return Err(Error::Shape("gin_layer needs GIN weights".into()));
    };
    w.check_input(x, g)?;
    let dim = x.dim();

    let mut out = FeatureMatrix::zeros(g.num_nodes(), w.output_dim());
    for i in 0..g.num_nodes() {
        let mut acc: Array1<f64> = x.row(i).to_owned() * (1.0 + epsilon);
        for (j, _) in g.neighbors(i as NodeId) {
            acc.scaled_add(1.0, &x.row(j as usize));
        }
        debug_assert_eq!(acc.len(), dim);
        let mut row = acc;
        for layer in mlp {
            row = layer.apply_row(&row);
        }
        out.row_mut(i).assign(&row);
    }
    Ok(out)
}

/// Single GraphSAGE layer: `x'_i = W1 x_i + W2 · mean_{j∈N(i)} σ(W3 x_j + b)`.
/// The mean over an empty neighborhood is the zero vector.
pub fn sage_layer(g: &Graph, x: &FeatureMatrix, w: &LayerWeights) -> Result<FeatureMatrix> {
    let LayerWeights::Sage {
        w_self,
        w_agg,
        w_msg,
        bias,
        activation,
    } = w
    else {
        return Err(Error::Shape("sage_layer needs GraphSAGE weights".into()));
    };
    w.check_input(x, g)?;

    // Projected messages for every node: h_j = σ(x_j · W3 + b).
    let mut messages = x.as_array().dot(w_msg);
    for mut row in messages.rows_mut() {
        row += bias;
        row.mapv_inplace(|v| activation.apply(v));
    }

    let msg_dim = w_msg.ncols();
    let mut mean = ndarray::Array2::<f64>::zeros((g.num_nodes(), msg_dim));
    for i in 0..g.num_nodes() {
        let deg = g.degree(i as NodeId);
        if deg == 0 {
            continue;
        }
        let mut acc = Array1::<f64>::zeros(msg_dim);
        for (j, _) in g.neighbors(i as NodeId) {
            acc.scaled_add(1.0, &messages.row(j as usize));
        }
        acc /= deg as f64;
        mean.row_mut(i).assign(&acc);
    }

    let out = x.as_array().dot(w_self) + mean.dot(w_agg);
    FeatureMatrix::new(out)
}

/// Generic message-passing dispatch: applies the layer matching `cfg.kind`.
/// The config must bind the Table-style preset for that kind.
pub fn message_passing_layer(
    g: &Graph,
    x: &FeatureMatrix,
    cfg: &ModelConfig,
    w: &LayerWeights,
) -> Result<FeatureMatrix> {
    cfg.validate()?;
    if w.kind() != cfg.kind {
        return Err(Error::Shape(format!(
            "weights are for {} but config selects {}",
            w.kind().name(),
            cfg.kind.name()
        )));
    }
    match cfg.kind {
        ModelKind::Gcn => gcn_layer(g, x, w),
        ModelKind::Gin => gin_layer(g, x, w),
        ModelKind::GraphSage => sage_layer(g, x, w),
    }
}

/// Identity-weight helpers for tests and smoke runs.
pub fn identity_gcn(dim: usize) -> LayerWeights {
    LayerWeights::gcn(Array2::eye(dim))
}

pub fn identity_gin(dim: usize, epsilon: f64) -> LayerWeights {
    LayerWeights::gin(
        vec![MlpLayer::new(Array2::eye(dim), Array1::zeros(dim), Activation::Identity).unwrap()],
        epsilon,
    )
    .unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_csr;
    use approx::assert_relative_eq;

    fn undirected_pair() -> Graph {
        build_csr(&[(0, 1, 1.0), (1, 0, 1.0)], 2, false).unwrap()
    }

    #[test]
    fn norm_factor_isolated_node_is_one() {
        let g = build_csr(&[], 1, true).unwrap();
        assert_eq!(gcn_norm_factors(&g), vec![1.0]);
    }

    #[test]
    fn norm_factor_three_unit_neighbors_is_four() {
        let g = build_csr(&[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)], 4, true).unwrap();
        assert_eq!(gcn_norm_factors(&g)[0], 4.0);
    }

    #[test]
    fn norm_factor_weighted_neighbors() {
        let g = build_csr(&[(0, 1, 0.5), (0, 2, 0.25)], 3, true).unwrap();
        assert_eq!(gcn_norm_factors(&g)[0], 1.75);
    }

    #[test]
    fn gcn_two_node_unit_edge_identity_weight() {
        let g = undirected_pair();
        let x = FeatureMatrix::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        let out = gcn_layer(&g, &x, &identity_gcn(1)).unwrap();
        assert_relative_eq!(out.row(0)[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(out.row(1)[0], 1.0, max_relative = 1e-12);
    }

    #[test]
    fn gcn_isolated_node_keeps_feature() {
        let g = build_csr(&[], 1, true).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![3.5, -2.0]]).unwrap();
        let out = gcn_layer(&g, &x, &identity_gcn(2)).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![3.5, -2.0]);
    }

    #[test]
    fn gin_equal_neighbor_doubles_feature() {
        let g = undirected_pair();
        let x = FeatureMatrix::from_rows(&[vec![2.0], vec![2.0]]).unwrap();
        let out = gin_layer(&g, &x, &identity_gin(1, 0.0)).unwrap();
        assert_eq!(out.row(0)[0], 4.0);
        assert_eq!(out.row(1)[0], 4.0);
    }

    #[test]
    fn gin_isolated_node_scales_by_one_plus_epsilon() {
        let g = build_csr(&[], 1, true).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![2.0]]).unwrap();
        let out = gin_layer(&g, &x, &identity_gin(1, 0.1)).unwrap();
        assert_relative_eq!(out.row(0)[0], 2.2, max_relative = 1e-12);
    }

    #[test]
    fn sage_isolated_node_is_self_projection_only() {
        let g = build_csr(&[], 1, true).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let w = LayerWeights::sage(
            Array2::eye(2) * 3.0,
            Array2::eye(2),
            Array2::eye(2),
            Array1::zeros(2),
            Activation::Identity,
        )
        .unwrap();
        let out = sage_layer(&g, &x, &w).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![3.0, 6.0]);
    }

    #[test]
    fn sage_single_neighbor_passthrough() {
        let g = build_csr(&[(0, 1, 1.0)], 2, true).unwrap();
        let x = FeatureMatrix::from_rows(&[vec![9.0, 9.0], vec![1.0, 2.0]]).unwrap();
        let w = LayerWeights::sage(
            Array2::zeros((2, 2)),
            Array2::eye(2),
            Array2::eye(2),
            Array1::zeros(2),
            Activation::Identity,
        )
        .unwrap();
        let out = sage_layer(&g, &x, &w).unwrap();
        assert_eq!(out.row(0).to_vec(), vec![1.0, 2.0]);
    }

    #[test]
    fn dispatch_matches_specialized_ops() {
        let g = build_csr(&[(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0), (2, 1, 1.0)], 3, false).unwrap();
        let x = FeatureMatrix::random(3, 4, 11);
        for kind in [ModelKind::Gcn, ModelKind::Gin, ModelKind::GraphSage] {
            let w = LayerWeights::random(kind, 4, 5, 3, 21);
            let cfg = ModelConfig::preset(kind);
            let via_dispatch = message_passing_layer(&g, &x, &cfg, &w).unwrap();
            let direct = match kind {
                ModelKind::Gcn => gcn_layer(&g, &x, &w).unwrap(),
                ModelKind::Gin => gin_layer(&g, &x, &w).unwrap(),
                ModelKind::GraphSage => sage_layer(&g, &x, &w).unwrap(),
            };
            assert_eq!(via_dispatch, direct, "{:?} dispatch mismatch", kind);
        }
    }

    #[test]
    fn dispatch_rejects_mismatched_config() {
        let g = undirected_pair();
        let x = FeatureMatrix::zeros(2, 1);
        let w = identity_gcn(1);
        let mut cfg = ModelConfig::preset(ModelKind::Gcn);
        cfg.aggregation = Aggregation::Mean;
        assert!(message_passing_layer(&g, &x, &cfg, &w).is_err());
        let cfg_gin = ModelConfig::preset(ModelKind::Gin);
        assert!(message_passing_layer(&g, &x, &cfg_gin, &w).is_err());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let g = undirected_pair();
        let x = FeatureMatrix::zeros(2, 3);
        assert!(gcn_layer(&g, &x, &identity_gcn(2)).is_err());
    }
}
