//! Ruiz equilibration of the constraint matrices.
//!
//! Rows belonging to one second-order cone share a single scale factor so the scaled slack
//! stays in the same cone.

use crate::cones::{Cone, ConeSet};
use crate::sparse::{norm_inf, CsrMatrix};

const MIN_SCALE: f64 = 1e-4;
const MAX_SCALE: f64 = 1e4;

#[derive(Debug, Clone)]
pub(crate) struct Equilibration {
    /// Column scaling `D`: `x = D x_scaled`.
    pub col: Vec<f64>,
    /// Row scaling of the equality block.
    pub eq_row: Vec<f64>,
    /// Row scaling of the conic block (orthant rows followed by cone rows).
    pub cone_row: Vec<f64>,
    /// Cost scaling: `c_scaled = cost * D c`.
    pub cost: f64,
}

fn inv_sqrt(norm: f64) -> f64 {
    if norm > 0.0 {
        (1.0 / norm.sqrt()).clamp(MIN_SCALE, MAX_SCALE)
    } else {
        1.0
    }
}

pub(crate) fn ruiz(
    a: &mut CsrMatrix,
    g: &mut CsrMatrix,
    cones: &ConeSet,
    iterations: usize,
) -> Equilibration {
    let n = a.ncols();
    let mut col = vec![1.0; n];
    let mut eq_row = vec![1.0; a.nrows()];
    let mut cone_row = vec![1.0; g.nrows()];
    for _ in 0..iterations {
        let mut col_norm = vec![0.0; n];
        a.fold_col_norms(&mut col_norm);
        g.fold_col_norms(&mut col_norm);
        let dcol: Vec<f64> = col_norm.into_iter().map(inv_sqrt).collect();

        let deq: Vec<f64> = a.row_norms().into_iter().map(inv_sqrt).collect();
        let mut gnorm = g.row_norms();
        for cone in &cones.cones {
            if let Cone::Soc { .. } = cone {
                let r = cone.range();
                let m = norm_inf(&gnorm[r.clone()]);
                gnorm[r].fill(m);
            }
        }
        let dcone: Vec<f64> = gnorm.into_iter().map(inv_sqrt).collect();

        a.scale(&deq, &dcol);
        g.scale(&dcone, &dcol);
        col.iter_mut().zip(&dcol).for_each(|(c, d)| *c *= d);
        eq_row.iter_mut().zip(&deq).for_each(|(c, d)| *c *= d);
        cone_row.iter_mut().zip(&dcone).for_each(|(c, d)| *c *= d);
    }
    Equilibration {
        col,
        eq_row,
        cone_row,
        cost: 1.0,
    }
}

impl Equilibration {
    /// Scales `c` in place and fixes the cost factor so that `||c_scaled||_inf = 1`.
    pub fn scale_cost(&mut self, c: &mut [f64]) {
        c.iter_mut().zip(&self.col).for_each(|(ci, d)| *ci *= d);
        let norm = norm_inf(c);
        self.cost = if norm > 0.0 {
            (1.0 / norm).clamp(1e-8, 1e8)
        } else {
            1.0
        };
        c.iter_mut().for_each(|ci| *ci *= self.cost);
    }
}
