//! Shared test oracles, independent of the library's implementation path.
//!
//! The dense formulations here use hand-written loops (no ndarray matmul),
//! so they cross-check the sparse implementations through a different route.

use gnnsim::{Activation, FeatureMatrix, Graph, LayerWeights, NodeId};
use ndarray::Array2;

/// Hand-rolled dense matrix product.
pub fn matmul(a: &Array2<f64>, b: &Array2<f64>) -> Array2<f64> {
    assert_eq!(a.ncols(), b.nrows());
    let mut out = Array2::zeros((a.nrows(), b.ncols()));
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            let aik = a[(i, k)];
            for j in 0..b.ncols() {
                out[(i, j)] += aik * b[(k, j)];
            }
        }
    }
    out
}

/// Dense weighted adjacency: `A[i][j] = Σ e_{j,i}` over i's stored entries.
pub fn dense_adjacency(g: &Graph, weighted: bool) -> Array2<f64> {
    let n = g.num_nodes();
    let mut a = Array2::zeros((n, n));
    for i in 0..n {
        for (j, w) in g.neighbors(i as NodeId) {
            a[(i, j as usize)] += if weighted { w } else { 1.0 };
        }
    }
    a
}

/// Dense GCN oracle: `D̂^(-1/2) (A + I) D̂^(-1/2) X W`.
pub fn dense_gcn(g: &Graph, x: &FeatureMatrix, w: &LayerWeights) -> Array2<f64> {
    let LayerWeights::Gcn { weight } = w else {
        panic!("dense_gcn needs GCN weights");
    };
    let n = g.num_nodes();
    let mut a_hat = dense_adjacency(g, true);
    for i in 0..n {
        a_hat[(i, i)] += 1.0;
    }
    let d_hat: Vec<f64> = (0..n)
        .map(|i| 1.0 + g.neighbors(i as NodeId).map(|(_, w)| w).sum::<f64>())
        .collect();
    for i in 0..n {
        for j in 0..n {
            a_hat[(i, j)] /= (d_hat[i] * d_hat[j]).sqrt();
        }
    }
    matmul(&matmul(&a_hat, x.as_array()), weight)
}

/// Dense GIN oracle: `(A + (1+ε)I) X` pushed through the MLP row-wise.
pub fn dense_gin(g: &Graph, x: &FeatureMatrix, w: &LayerWeights) -> Array2<f64> {
    let LayerWeights::Gin { mlp, epsilon } = w else {
        panic!("dense_gin needs GIN weights");
    };
    let n = g.num_nodes();
    let mut a = dense_adjacency(g, false);
    for i in 0..n {
        a[(i, i)] += 1.0 + epsilon;
    }
    let mut h = matmul(&a, x.as_array());
    for layer in mlp {
        h = matmul(&h, &layer.weight);
        for (mut row, b) in h.rows_mut().into_iter().zip(std::iter::repeat(&layer.bias)) {
            row += b;
            row.mapv_inplace(|v| layer.activation.apply(v));
        }
    }
    h
}

/// Dense GraphSAGE oracle: `X W1 + M σ(X W3 + b) W2` with the row-mean
/// matrix `M` (zero rows for isolated nodes).
pub fn dense_sage(g: &Graph, x: &FeatureMatrix, w: &LayerWeights) -> Array2<f64> {
    let LayerWeights::Sage {
        w_self,
        w_agg,
        w_msg,
        bias,
        activation,
    } = w
    else {
        panic!("dense_sage needs GraphSAGE weights");
    };
    let n = g.num_nodes();
    let mut h = matmul(x.as_array(), w_msg);
    for mut row in h.rows_mut() {
        row += bias;
        row.mapv_inplace(|v| activation.apply(v));
    }
    let mut mean_matrix = Array2::zeros((n, n));
    for i in 0..n {
        let deg = g.degree(i as NodeId);
        if deg == 0 {
            continue;
        }
        for (j, _) in g.neighbors(i as NodeId) {
            mean_matrix[(i, j as usize)] += 1.0 / deg as f64;
        }
    }
    let mean = matmul(&mean_matrix, &h);
    matmul(x.as_array(), w_self) + matmul(&mean, w_agg)
}

pub fn max_rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    assert_eq!(a.dim(), b.dim());
    a.iter()
        .zip(b.iter())
        .map(|(&x, &y)| (x - y).abs() / 1.0_f64.max(x.abs()).max(y.abs()))
        .fold(0.0, f64::max)
}

/// Identity activation GraphSAGE weights for small fixtures.
pub fn sage_identity(dim: usize) -> LayerWeights {
    LayerWeights::sage(
        Array2::eye(dim),
        Array2::eye(dim),
        Array2::eye(dim),
        ndarray::Array1::zeros(dim),
        Activation::Identity,
    )
    .unwrap()
}
