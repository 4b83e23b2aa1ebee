//! Small dense linear-algebra helpers shared by the solver layers.

use nalgebra::{DMatrix, DVector};

/// Greedy rank-revealing row selection.
///
/// Walks the rows in order and keeps a row only if its component orthogonal
/// to the span of the rows kept so far exceeds `rel_tol` times its own norm.
/// Returns the indices of the kept rows, in their original order.
pub fn independent_rows(rows: &DMatrix<f64>, rel_tol: f64) -> Vec<usize> {
    let ncols = rows.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for i in 0..rows.nrows() {
        let row: DVector<f64> = rows.row(i).transpose();
        let norm = row.norm();
        if norm == 0.0 || !norm.is_finite() {
            continue;
        }
        let mut v = row;
        // two passes of modified Gram-Schmidt
        for _ in 0..2 {
            for q in &basis {
                let proj = q.dot(&v);
                v.axpy(-proj, q, 1.0);
            }
        }
        let rest = v.norm();
        if rest > rel_tol * norm && ncols > basis.len() {
            basis.push(v / rest);
            kept.push(i);
        }
    }
    kept
}

/// Stacks row blocks that share a column count.
pub fn vstack(blocks: &[&DMatrix<f64>], ncols: usize) -> DMatrix<f64> {
    let nrows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = DMatrix::zeros(nrows, ncols);
    let mut r = 0;
    for b in blocks {
        out.view_mut((r, 0), (b.nrows(), ncols)).copy_from(*b);
        r += b.nrows();
    }
    out
}

/// Concatenates vectors end to end.
pub fn vconcat(parts: &[&DVector<f64>]) -> DVector<f64> {
    let len: usize = parts.iter().map(|p| p.len()).sum();
    let mut out = DVector::zeros(len);
    let mut r = 0;
    for p in parts {
        out.rows_mut(r, p.len()).copy_from(*p);
        r += p.len();
    }
    out
}

/// Largest absolute entry, 0 for empty input.
pub fn inf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, x| m.max(x.abs()))
}
