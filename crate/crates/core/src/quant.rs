//! Quantization arithmetic, node-granularity precision assignment, and the
//! nodeslot resource-allocation rule.
//!
//! Scalar quantization follows `x_q = min(q_max, max(q_min, round(x/s + z)))`
//! with round-half-to-even, and dequantization `x̂ = (x_q - z)·s`. Precision
//! assignment protects nodes stochastically with a probability interpolated
//! linearly between `p_min` and `p_max` over the node degree range.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::graph::Graph;

/// Smallest calibration scale; keeps all-zero tensors quantizable.
pub const MIN_SCALE: f64 = 1e-12;

/// Numeric formats a node can run in. Each maps to one arithmetic path in
/// the simulator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Precision {
    Float32,
    Int8,
    Int4,
}

impl Precision {
    pub fn name(&self) -> &'static str {
        match self {
            Precision::Float32 => "float32",
            Precision::Int8 => "int8",
            Precision::Int4 => "int4",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "float32" | "float" => Ok(Precision::Float32),
            "int8" => Ok(Precision::Int8),
            "int4" => Ok(Precision::Int4),
            other => Err(Error::Quant(format!("unknown precision '{other}'"))),
        }
    }

    /// Integer bit width, if this is a fixed-point format.
    pub fn bits(&self) -> Option<u8> {
        match self {
            Precision::Float32 => None,
            Precision::Int8 => Some(8),
            Precision::Int4 => Some(4),
        }
    }

    pub const ALL: [Precision; 3] = [Precision::Float32, Precision::Int8, Precision::Int4];
}

impl fmt::Display for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// The `(s, z, q_min, q_max)` tuple of the quantization law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantParams {
    pub scale: f64,
    pub zero_point: f64,
    pub q_min: i32,
    pub q_max: i32,
    pub bits: u8,
}

impl QuantParams {
    pub fn new(scale: f64, zero_point: f64, bits: u8) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::Quant(format!("scale must be positive, got {scale}")));
        }
        if !zero_point.is_finite() {
            return Err(Error::Quant("zero point must be finite".into()));
        }
        if bits < 2 || bits > 31 {
            return Err(Error::Quant(format!("unsupported bit width {bits}")));
        }
        let q_min = -(1i32 << (bits - 1));
        let q_max = (1i32 << (bits - 1)) - 1;
        if zero_point < q_min as f64 || zero_point > q_max as f64 {
            return Err(Error::Quant(format!(
                "zero point {zero_point} outside representable range [{q_min}, {q_max}]"
            )));
        }
        Ok(QuantParams {
            scale,
            zero_point,
            q_min,
            q_max,
            bits,
        })
    }

    pub fn symmetric(scale: f64, bits: u8) -> Result<Self> {
        QuantParams::new(scale, 0.0, bits)
    }

    /// Smallest and largest reals that survive an exact round trip.
    pub fn representable_range(&self) -> (f64, f64) {
        (
            self.scale * (self.q_min as f64 - self.zero_point),
            self.scale * (self.q_max as f64 - self.zero_point),
        )
    }
}

/// `x_q = min(q_max, max(q_min, round(x/s + z)))`, round-half-to-even.
pub fn quantize(x: f64, qp: &QuantParams) -> Result<i32> {
    if !x.is_finite() {
        return Err(Error::Quant(format!("cannot quantize non-finite value {x}")));
    }
    if !(qp.scale > 0.0) {
        return Err(Error::Quant("scale must be positive".into()));
    }
    let raw = (x / qp.scale + qp.zero_point).round_ties_even();
    let clamped = raw.max(qp.q_min as f64).min(qp.q_max as f64);
    Ok(clamped as i32)
}

/// `x̂ = (x_q - z)·s`.
pub fn dequantize(code: i32, qp: &QuantParams) -> f64 {
    (code as f64 - qp.zero_point) * qp.scale
}

/// Symmetric per-tensor calibration: `s = max|x| / q_max`, `z = 0`, floored
/// at [`MIN_SCALE`] so an all-zero tensor still gets valid params.
pub fn calibrate(values: impl IntoIterator<Item = f64>, bits: u8) -> Result<QuantParams> {
    let mut max_abs: f64 = 0.0;
    let mut count = 0usize;
    for x in values {
        if !x.is_finite() {
            return Err(Error::Quant("cannot calibrate over non-finite values".into()));
        }
        max_abs = max_abs.max(x.abs());
        count += 1;
    }
    if count == 0 {
        return Err(Error::Quant("cannot calibrate an empty tensor".into()));
    }
    let q_max = ((1i32 << (bits - 1)) - 1) as f64;
    let scale = (max_abs / q_max).max(MIN_SCALE);
    QuantParams::symmetric(scale, bits)
}

/// Element-wise [`quantize`] over a dense matrix.
pub fn quantize_tensor(m: &FeatureMatrix, qp: &QuantParams) -> Result<Array2<i32>> {
    let src = m.as_array();
    let mut out = Array2::<i32>::zeros(src.dim());
    for (dst, &x) in out.iter_mut().zip(src.iter()) {
        *dst = quantize(x, qp)?;
    }
    Ok(out)
}

/// Element-wise [`dequantize`] over a code matrix.
pub fn dequantize_tensor(codes: &Array2<i32>, qp: &QuantParams) -> FeatureMatrix {
    FeatureMatrix::new(codes.mapv(|c| dequantize(c, qp))).expect("dequantized values are finite")
}

/// Quantize-then-dequantize a raw matrix with per-tensor symmetric params;
/// returns the degraded matrix and the params used. This is how the
/// simulator materializes the precision loss of fixed-point operands while
/// keeping arithmetic in f64.
pub fn fake_quantize_matrix(m: &Array2<f64>, bits: u8) -> Result<(Array2<f64>, QuantParams)> {
    let qp = calibrate(m.iter().copied(), bits)?;
    let mut out = m.clone();
    for x in out.iter_mut() {
        *x = dequantize(quantize(*x, &qp)?, &qp);
    }
    Ok((out, qp))
}

/// Per-node precision map plus the protected-node summary.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionAssignment {
    per_node: Vec<Precision>,
}

impl PrecisionAssignment {
    pub fn new(per_node: Vec<Precision>) -> Self {
        PrecisionAssignment { per_node }
    }

    pub fn all_float32(num_nodes: usize) -> Self {
        PrecisionAssignment {
            per_node: vec![Precision::Float32; num_nodes],
        }
    }

    pub fn uniform(num_nodes: usize, precision: Precision) -> Self {
        PrecisionAssignment {
            per_node: vec![precision; num_nodes],
        }
    }

    pub fn len(&self) -> usize {
        self.per_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.per_node.is_empty()
    }

    pub fn precision(&self, node: usize) -> Precision {
        self.per_node[node]
    }

    pub fn per_node(&self) -> &[Precision] {
        &self.per_node
    }

    /// Fraction of nodes protected in Float32.
    pub fn protected_ratio(&self) -> f64 {
        if self.per_node.is_empty() {
            return 0.0;
        }
        let protected = self
            .per_node
            .iter()
            .filter(|&&p| p == Precision::Float32)
            .count();
        protected as f64 / self.per_node.len() as f64
    }

    pub fn count(&self, precision: Precision) -> usize {
        self.per_node.iter().filter(|&&p| p == precision).count()
    }

    /// Text form: one `node_id precision` pair per line.
    pub fn save_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::new();
        for (id, p) in self.per_node.iter().enumerate() {
            out.push_str(&format!("{id} {p}\n"));
        }
        fs::write(path.as_ref(), out)
            .map_err(|e| Error::io(path.as_ref().display().to_string(), e))
    }

    pub fn load_text(path: impl AsRef<Path>, num_nodes: usize) -> Result<Self> {
        let display = path.as_ref().display().to_string();
        let text =
            fs::read_to_string(path.as_ref()).map_err(|e| Error::io(&display, e))?;
        let mut per_node = vec![None; num_nodes];
        for (idx, line) in text.lines().enumerate() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let (Some(id), Some(prec)) = (fields.next(), fields.next()) else {
                return Err(Error::Quant(format!(
                    "{display}:{}: expected 'node_id precision'",
                    idx + 1
                )));
            };
            let id: usize = id.parse().map_err(|_| {
                Error::Quant(format!("{display}:{}: bad node id '{id}'", idx + 1))
            })?;
            if id >= num_nodes {
                return Err(Error::Quant(format!(
                    "{display}:{}: node id {id} >= num_nodes {num_nodes}",
                    idx + 1
                )));
            }
            per_node[id] = Some(Precision::parse(prec)?);
        }
        let per_node: Vec<Precision> = per_node
            .into_iter()
            .enumerate()
            .map(|(id, p)| {
                p.ok_or_else(|| Error::Quant(format!("{display}: node {id} has no precision")))
            })
            .collect::<Result<_>>()?;
        Ok(PrecisionAssignment { per_node })
    }
}

/// Per-node protection probabilities: linear interpolation between `p_min`
/// and `p_max` over `[deg_min, deg_max]`. A degree-uniform graph degenerates
/// to `p_min` everywhere.
pub fn protection_probabilities(g: &Graph, p_min: f64, p_max: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&p_min) || !(0.0..=1.0).contains(&p_max) || p_min > p_max {
        return Err(Error::Quant(format!(
            "invalid probability range [{p_min}, {p_max}]"
        )));
    }
    let stats = g.degree_stats();
    let (deg_min, deg_max) = (stats.min as f64, stats.max as f64);
    let probs = stats
        .degrees
        .iter()
        .map(|&d| {
            if deg_max == deg_min {
                p_min
            } else {
                p_min + (d as f64 - deg_min) * (p_max - p_min) / (deg_max - deg_min)
            }
        })
        .collect();
    Ok(probs)
}

/// Stochastic degree-interpolated protection: node `i` is assigned Float32
/// with probability `p_i` (see [`protection_probabilities`]), Int8 otherwise.
/// Deterministic for a given seed.
pub fn degree_quant_assign(
    g: &Graph,
    p_min: f64,
    p_max: f64,
    seed: u64,
) -> Result<PrecisionAssignment> {
    let probs = protection_probabilities(g, p_min, p_max)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let per_node = probs
        .iter()
        .map(|&p| {
            if rng.gen::<f64>() < p {
                Precision::Float32
            } else {
                Precision::Int8
            }
        })
        .collect();
    Ok(PrecisionAssignment::new(per_node))
}

/// Deterministic three-tier mode: degree ≤ `int4_max_degree` runs Int4,
/// degree ≥ `float_min_degree` runs Float32, everything between runs Int8.
pub fn degree_threshold_assign(
    g: &Graph,
    int4_max_degree: u32,
    float_min_degree: u32,
) -> Result<PrecisionAssignment> {
    if int4_max_degree >= float_min_degree {
        return Err(Error::Quant(format!(
            "int4 threshold {int4_max_degree} must be below float threshold {float_min_degree}"
        )));
    }
    let per_node = g
        .degree_stats()
        .degrees
        .iter()
        .map(|&d| {
            if d <= int4_max_degree {
                Precision::Int4
            } else if d >= float_min_degree {
                Precision::Float32
            } else {
                Precision::Int8
            }
        })
        .collect();
    Ok(PrecisionAssignment::new(per_node))
}

/// FPGA resource classes the allocation rule ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ResourceKind {
    Lut,
    Ff,
    Bram,
    Dsp,
}

impl ResourceKind {
    pub const ALL: [ResourceKind; 4] = [
        ResourceKind::Lut,
        ResourceKind::Ff,
        ResourceKind::Bram,
        ResourceKind::Dsp,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ResourceKind::Lut => "lut",
            ResourceKind::Ff => "ff",
            ResourceKind::Bram => "bram",
            ResourceKind::Dsp => "dsp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "lut" => Ok(ResourceKind::Lut),
            "ff" => Ok(ResourceKind::Ff),
            "bram" => Ok(ResourceKind::Bram),
            "dsp" => Ok(ResourceKind::Dsp),
            other => Err(Error::Config(format!("unknown resource kind '{other}'"))),
        }
    }
}

/// Budget `R^max_r` and per-nodeslot cost `C_r` for one precision.
///
/// A zero cost marks the resource as unconstrained for this precision and
/// excludes it from the allocation ratio.
#[derive(Debug, Clone, PartialEq)]
pub struct PrecisionBudget {
    pub max: BTreeMap<ResourceKind, f64>,
    pub cost: BTreeMap<ResourceKind, f64>,
}

impl PrecisionBudget {
    pub fn new(max: BTreeMap<ResourceKind, f64>, cost: BTreeMap<ResourceKind, f64>) -> Result<Self> {
        if max.is_empty() {
            return Err(Error::Config("budget needs at least one resource".into()));
        }
        if max.keys().ne(cost.keys()) {
            return Err(Error::Config(
                "budget and cost must cover the same resources".into(),
            ));
        }
        for (&r, &v) in &max {
            if !(v > 0.0) {
                return Err(Error::Config(format!(
                    "budget for {} must be positive, got {v}",
                    r.name()
                )));
            }
        }
        let mut any_constrained = false;
        for (&r, &v) in &cost {
            if v < 0.0 {
                return Err(Error::Config(format!(
                    "cost for {} must be non-negative, got {v}",
                    r.name()
                )));
            }
            if v > 0.0 {
                any_constrained = true;
            }
        }
        if !any_constrained {
            return Err(Error::Config("at least one resource must have a cost".into()));
        }
        Ok(PrecisionBudget { max, cost })
    }

    fn min_ratio(&self) -> f64 {
        self.cost
            .iter()
            .filter(|&(_, &c)| c > 0.0)
            .map(|(r, &c)| self.max[r] / c)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Per-precision resource table backing the nodeslot allocation rule.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResourceBudget {
    per_precision: BTreeMap<Precision, PrecisionBudget>,
}

impl ResourceBudget {
    pub fn new() -> Self {
        ResourceBudget::default()
    }

    pub fn insert(&mut self, precision: Precision, budget: PrecisionBudget) {
        self.per_precision.insert(precision, budget);
    }

    pub fn get(&self, precision: Precision) -> Option<&PrecisionBudget> {
        self.per_precision.get(&precision)
    }

    pub fn precisions(&self) -> impl Iterator<Item = Precision> + '_ {
        self.per_precision.keys().copied()
    }
}

/// Nodeslot count for precision `p`: `N_p = ⌈min_r R^max_r / C_r⌉`.
///
/// Rounding up can overshoot the physical budget by at most one slot's cost;
/// `strict_feasible` switches to rounding down instead.
pub fn nodeslot_allocation(
    budget: &ResourceBudget,
    precision: Precision,
    strict_feasible: bool,
) -> Result<usize> {
    let pb = budget.get(precision).ok_or_else(|| {
        Error::Config(format!("no budget entry for precision {precision}"))
    })?;
    let m = pb.min_ratio();
    let n = if strict_feasible { m.floor() } else { m.ceil() };
    Ok(n as usize)
}
