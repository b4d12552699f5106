//! Systolic-array timing model for the transformation engine.
//!
//! A `(1×D)·(D×F)` vector-matrix product streams the operand diagonally:
//! the pipeline fills for `rows` cycles, then drains one result per cycle.
//! Output slices wider than the array tile over `cols` columns, each tile
//! paying its own fill.

/// Cycle cost of one `(1×d)·(d×f)` product on a `rows × cols` array.
pub fn matmul_cost(rows: usize, cols: usize, d: usize, f: usize) -> u64 {
    if d == 0 || f == 0 {
        return 0;
    }
    let mut cost = 0u64;
    let mut remaining = f;
    while remaining > 0 {
        let tile = remaining.min(cols);
        cost += (rows + d + tile) as u64;
        remaining -= tile;
    }
    cost
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_product_is_fill_plus_dims() {
        // D=4, F=4 on a 4x4 array: fill + 4 + 4.
        assert_eq!(matmul_cost(4, 4, 4, 4), 4 + 4 + 4);
    }

    #[test]
    fn wide_outputs_tile_over_columns() {
        // F=10 on 4 columns: tiles of 4, 4, 2.
        assert_eq!(
            matmul_cost(4, 4, 8, 10),
            (4 + 8 + 4) + (4 + 8 + 4) + (4 + 8 + 2)
        );
    }

    #[test]
    fn degenerate_dims_cost_nothing() {
        assert_eq!(matmul_cost(4, 4, 0, 4), 0);
        assert_eq!(matmul_cost(4, 4, 4, 0), 0);
    }
}
