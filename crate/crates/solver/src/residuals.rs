use serde::{Deserialize, Serialize};

use crate::program::ConicProgram;
use crate::sparse::{dot, norm_inf};

/// Dual variables of a [`ConicProgram`].
///
/// Cone duals are expressed in the standard coordinates `(u + w, u - w, 2 z)` of each
/// rotated cone, i.e. they lie in the cone `t >= ||v||`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Duals {
    pub eq: Vec<f64>,
    pub ineq: Vec<f64>,
    pub cone: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Residuals {
    pub primal: f64,
    pub dual: f64,
    pub gap: f64,
}

/// Absolute optimality residuals of a candidate primal/dual pair.
///
/// * primal: `max(||Ax - b||_inf, ||max(0, Gx - h)||_inf, cone violations)`
/// * dual: `max(||c + A^T y + G^T z - M^T zeta||_inf, ||min(0, z)||_inf, dual cone violations)`
/// * gap: `|c^T x + b^T y + h^T z|`, the difference between primal and dual objectives.
pub fn residuals(program: &ConicProgram, x: &[f64], duals: &Duals) -> Residuals {
    let ax = program.eq_matrix.mul_vec(x);
    let eq_res = ax
        .iter()
        .zip(&program.eq_rhs)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let gx = program.ineq_matrix.mul_vec(x);
    let ineq_res = gx
        .iter()
        .zip(&program.ineq_rhs)
        .fold(0.0_f64, |m, (g, h)| m.max(g - h));
    let cone_res = program
        .cones
        .iter()
        .fold(0.0_f64, |m, c| m.max(c.violation(x)));
    let primal = eq_res.max(ineq_res).max(cone_res).max(0.0);

    let mut stationarity = program.objective.clone();
    if !duals.eq.is_empty() {
        program.eq_matrix.tmul_add(1.0, &duals.eq, &mut stationarity);
    }
    if !duals.ineq.is_empty() {
        program.ineq_matrix.tmul_add(1.0, &duals.ineq, &mut stationarity);
    }
    let mut dual_cone_res = 0.0_f64;
    for (cone, zeta) in program.cones.iter().zip(&duals.cone) {
        for (row, &zk) in cone.standard_rows().iter().zip(zeta) {
            for &(j, v) in row {
                stationarity[j] -= v * zk;
            }
        }
        if let Some((t, rest)) = zeta.split_first() {
            dual_cone_res = dual_cone_res.max(dot(rest, rest).sqrt() - t);
        }
    }
    let neg_ineq = duals.ineq.iter().fold(0.0_f64, |m, z| m.max(-z));
    let dual = norm_inf(&stationarity).max(neg_ineq).max(dual_cone_res);

    let mut gap = dot(&program.objective, x);
    if !duals.eq.is_empty() {
        gap += dot(&program.eq_rhs, &duals.eq);
    }
    if !duals.ineq.is_empty() {
        gap += dot(&program.ineq_rhs, &duals.ineq);
    }
    Residuals {
        primal,
        dual,
        gap: gap.abs(),
    }
}
