//! Small dense linear-algebra helpers shared by the automaton and basis code.

use nalgebra::{DMatrix, DVector};

/// Default relative tolerance for numerical rank decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

/// Singular values of `m`, largest first.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    // nalgebra handles tall matrices more cheaply than wide ones.
    let tall = if m.nrows() < m.ncols() { m.transpose() } else { m.clone() };
    let mut sv: Vec<f64> = tall.svd(false, false).singular_values.iter().copied().collect();
    sv.sort_by(|a, b| b.total_cmp(a));
    sv
}

/// Number of singular values above `rel_tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, rel_tol: f64) -> usize {
    let sv = singular_values(m);
    match sv.first() {
        None => 0,
        Some(&max) if max <= 0.0 => 0,
        Some(&max) => sv.iter().filter(|&&s| s > rel_tol * max).count(),
    }
}

/// Ratio of smallest to largest singular value (0 for singular input).
pub fn inverse_condition(m: &DMatrix<f64>) -> f64 {
    let sv = singular_values(m);
    match (sv.first(), sv.last()) {
        (Some(&max), Some(&min)) if max > 0.0 => min / max,
        _ => 0.0,
    }
}

/// Determinant in sign / log-magnitude form, computed from a pivoted LU
/// factorization so that products of many small pivots do not underflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogDet {
    pub sign: f64,
    pub ln_abs: f64,
}

impl LogDet {
    pub fn of(m: &DMatrix<f64>) -> Self {
        assert!(m.is_square(), "determinant of a non-square matrix");
        if m.nrows() == 0 {
            return LogDet { sign: 1.0, ln_abs: 0.0 };
        }
        let lu = m.clone().lu();
        let u = lu.u();
        let mut sign = if lu.p().determinant::<f64>() < 0.0 { -1.0 } else { 1.0 };
        let mut ln_abs = 0.0;
        for i in 0..u.nrows() {
            let d = u[(i, i)];
            if d == 0.0 {
                return LogDet { sign: 0.0, ln_abs: f64::NEG_INFINITY };
            }
            if d < 0.0 {
                sign = -sign;
            }
            ln_abs += d.abs().ln();
        }
        LogDet { sign, ln_abs }
    }

    pub fn abs(&self) -> f64 {
        self.ln_abs.exp()
    }

    pub fn value(&self) -> f64 {
        self.sign * self.abs()
    }
}

/// Infinity norm of a vector.
pub fn max_abs(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}
