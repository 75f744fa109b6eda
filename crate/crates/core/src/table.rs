//! Shared CSV cell formatting. Floats are written with 17 significant digits
//! so that files round-trip and compare byte-for-byte.

use crate::operator::CMatrix;

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Column names `{prefix}re_i_j, {prefix}im_i_j` in row-major order.
pub fn matrix_header(prefix: &str, n: usize) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(format!("{prefix}re_{i}_{j}"));
            out.push(format!("{prefix}im_{i}_{j}"));
        }
    }
    out
}

pub fn matrix_cells(m: &CMatrix) -> Vec<String> {
    let mut out = Vec::with_capacity(2 * m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            out.push(float(m[(i, j)].re));
            out.push(float(m[(i, j)].im));
        }
    }
    out
}
