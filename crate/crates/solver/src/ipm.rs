//! Primal-dual interior-point method on the homogeneous self-dual embedding.
//!
//! The program is brought into the standard form
//!
//! ```text
//! min c^T x   s.t.   A x = b,   G x + s = h,   s in K
//! ```
//!
//! where `K` is a nonnegative orthant (the user's inequality rows) times one second-order
//! cone `(u + w, u - w, 2 z)` per rotated cone block. Each iteration takes a Mehrotra
//! predictor-corrector step with Nesterov-Todd scaling; the two KKT solves per iteration
//! share one sparse LDL^T factorization.

use serde::{Deserialize, Serialize};

use crate::cones::{ConeSet, Scaling};
use crate::equilibrate::{ruiz, Equilibration};
use crate::error::SolverError;
use crate::ldl::{sym_mul, LdlFactor, Regularization};
use crate::program::ConicProgram;
use crate::residuals::{Duals, Residuals};
use crate::sparse::{dot, norm_inf, CsrMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Relative primal and dual feasibility tolerance.
    pub eps_feasibility: f64,
    /// Absolute complementarity gap tolerance.
    pub eps_gap_abs: f64,
    /// Relative complementarity gap tolerance.
    pub eps_gap_rel: f64,
    /// Tolerance on normalized infeasibility certificates.
    pub eps_infeasibility: f64,
    /// Fraction-to-boundary parameter.
    pub step_fraction: f64,
    pub equilibration_iterations: usize,
    pub static_regularization: f64,
    pub refinement_steps: usize,
    /// Multiplier on the feasibility and gap tolerances accepted when numerical trouble
    /// stops the iteration early.
    pub reduced_accuracy_factor: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            eps_feasibility: 1e-9,
            eps_gap_abs: 1e-10,
            eps_gap_rel: 1e-10,
            eps_infeasibility: 1e-8,
            step_fraction: 0.99,
            equilibration_iterations: 15,
            static_regularization: 1e-9,
            refinement_steps: 4,
            reduced_accuracy_factor: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    /// Numerical trouble stopped the iteration; the best iterate met the tolerances scaled by
    /// `reduced_accuracy_factor`.
    AlmostOptimal,
    PrimalInfeasible,
    DualInfeasible,
    IterationLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverResult {
    pub status: SolveStatus,
    /// Primal solution; for `DualInfeasible` an unboundedness ray.
    pub x: Vec<f64>,
    /// Dual solution; for `PrimalInfeasible` a Farkas certificate.
    pub duals: Duals,
    pub iterations: usize,
    /// Normalized residuals of the equilibrated program at termination. `Optimal` implies each
    /// is below its configured tolerance.
    pub residuals: Residuals,
    pub objective: f64,
}

/// Equilibrated standard-form data.
struct StandardForm {
    n: usize,
    p: usize,
    m: usize,
    a: CsrMatrix,
    g: CsrMatrix,
    c: Vec<f64>,
    b: Vec<f64>,
    h: Vec<f64>,
    cones: ConeSet,
    scale: Equilibration,
    m_lin: usize,
    cone_dims: Vec<usize>,
}

impl StandardForm {
    fn new(program: &ConicProgram, settings: &SolverSettings) -> Self {
        let n = program.num_vars();
        let m_lin = program.ineq_matrix.nrows();
        let mut cone_rows = Vec::new();
        let mut cone_dims = Vec::new();
        for cone in &program.cones {
            cone_dims.push(cone.standard_dim());
            for row in cone.standard_rows() {
                cone_rows.push(row.into_iter().map(|(j, v)| (j, -v)).collect());
            }
        }
        let mut g = program
            .ineq_matrix
            .vstack(&CsrMatrix::from_rows(n, &cone_rows));
        let mut a = program.eq_matrix.clone();
        let cones = ConeSet::new(m_lin, &cone_dims);
        let mut scale = ruiz(&mut a, &mut g, &cones, settings.equilibration_iterations);
        let mut c = program.objective.clone();
        scale.scale_cost(&mut c);
        let b = program
            .eq_rhs
            .iter()
            .zip(&scale.eq_row)
            .map(|(v, e)| v * e)
            .collect();
        let mut h: Vec<f64> = program.ineq_rhs.clone();
        h.resize(g.nrows(), 0.0);
        h.iter_mut().zip(&scale.cone_row).for_each(|(v, e)| *v *= e);
        Self {
            n,
            p: a.nrows(),
            m: g.nrows(),
            a,
            g,
            c,
            b,
            h,
            cones,
            scale,
            m_lin,
            cone_dims,
        }
    }

    fn unscale_x(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(&self.scale.col).map(|(v, d)| v * d).collect()
    }

    fn unscale_duals(&self, y: &[f64], z: &[f64]) -> Duals {
        let eq = y
            .iter()
            .zip(&self.scale.eq_row)
            .map(|(v, e)| v * e / self.scale.cost)
            .collect();
        let zf: Vec<f64> = z
            .iter()
            .zip(&self.scale.cone_row)
            .map(|(v, e)| v * e / self.scale.cost)
            .collect();
        let ineq = zf[..self.m_lin].to_vec();
        let mut cone = Vec::with_capacity(self.cone_dims.len());
        let mut start = self.m_lin;
        for &d in &self.cone_dims {
            cone.push(zf[start..start + d].to_vec());
            start += d;
        }
        Duals { eq, ineq, cone }
    }
}

/// KKT matrix `[0 A^T G^T; A 0 0; G 0 -W^2]` stored as a lower triangle with fixed structure.
struct Kkt {
    dim: usize,
    entries: Vec<(usize, usize)>,
    values: Vec<f64>,
    /// Slot ranges of each cone's `-W^2` block, in cone order.
    w_slots: Vec<std::ops::Range<usize>>,
    factor: LdlFactor,
    reg: Regularization,
    refinement_steps: usize,
}

impl Kkt {
    fn new(sf: &StandardForm, settings: &SolverSettings) -> Self {
        let (n, p) = (sf.n, sf.p);
        let dim = n + sf.p + sf.m;
        let mut entries = Vec::new();
        let mut values = Vec::new();
        for j in 0..n {
            entries.push((j, j));
            values.push(0.0);
        }
        for i in 0..p {
            for (j, v) in sf.a.row(i) {
                entries.push((n + i, j));
                values.push(v);
            }
            entries.push((n + i, n + i));
            values.push(0.0);
        }
        for i in 0..sf.m {
            for (j, v) in sf.g.row(i) {
                entries.push((n + p + i, j));
                values.push(v);
            }
        }
        let mut w_slots = Vec::new();
        let identity = identity_scaling(&sf.cones);
        for (cone, sc) in sf.cones.cones.iter().zip(&identity) {
            let start = n + p + cone.range().start;
            let first = entries.len();
            for (i, j, v) in sf.cones.w_squared_block(sc) {
                entries.push((start + i, start + j));
                values.push(-v);
            }
            w_slots.push(first..entries.len());
        }
        let signs: Vec<f64> = (0..dim).map(|k| if k < n { 1.0 } else { -1.0 }).collect();
        let factor = LdlFactor::new(dim, &entries, &signs);
        let delta = settings.static_regularization;
        Self {
            dim,
            entries,
            values,
            w_slots,
            factor,
            reg: Regularization {
                static_delta: delta,
                dynamic_eps: 1e-13,
                dynamic_delta: delta.max(1e-7),
            },
            refinement_steps: settings.refinement_steps,
        }
    }

    fn update_and_factor(&mut self, cones: &ConeSet, scaling: &[Scaling]) -> bool {
        for (slots, sc) in self.w_slots.iter().zip(scaling) {
            for (slot, (_, _, v)) in slots.clone().zip(cones.w_squared_block(sc)) {
                self.values[slot] = -v;
            }
        }
        self.factor.factor(&self.values, self.reg).is_some()
    }

    /// Solves `K u = rhs` with iterative refinement against the unregularized matrix.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let mut u = rhs.to_vec();
        self.factor.solve(&mut u);
        let scale = 1.0 + norm_inf(rhs);
        for _ in 0..self.refinement_steps {
            let ku = sym_mul(self.dim, &self.entries, &self.values, &u);
            let mut r: Vec<f64> = rhs.iter().zip(&ku).map(|(a, b)| a - b).collect();
            if norm_inf(&r) <= 1e-14 * scale {
                break;
            }
            self.factor.solve(&mut r);
            u.iter_mut().zip(&r).for_each(|(a, b)| *a += b);
        }
        u
    }
}

fn identity_scaling(cones: &ConeSet) -> Vec<Scaling> {
    cones
        .cones
        .iter()
        .map(|c| {
            let dim = c.range().len();
            match c {
                crate::cones::Cone::NonNeg { .. } => Scaling::NonNeg { w: vec![1.0; dim] },
                crate::cones::Cone::Soc { .. } => {
                    let mut wbar = vec![0.0; dim];
                    wbar[0] = 1.0;
                    Scaling::Soc { eta: 1.0, wbar }
                }
            }
        })
        .collect()
}

struct Iterate {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Direction {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    s: Vec<f64>,
    tau: f64,
    kappa: f64,
}

fn split3(u: &[f64], n: usize, p: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    (u[..n].to_vec(), u[n..n + p].to_vec(), u[n + p..].to_vec())
}

fn concat3(a: &[f64], b: &[f64], c: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(a.len() + b.len() + c.len());
    out.extend_from_slice(a);
    out.extend_from_slice(b);
    out.extend_from_slice(c);
    out
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

/// Solves a [`ConicProgram`].
pub fn solve(program: &ConicProgram, settings: &SolverSettings) -> Result<SolverResult, SolverError> {
    program.validate()?;
    let sf = StandardForm::new(program, settings);
    let (n, p, m) = (sf.n, sf.p, sf.m);
    let cones = &sf.cones;
    let degree = cones.degree() as f64;
    let mut kkt = Kkt::new(&sf, settings);

    let numerical = |iteration: usize, reason: &str| SolverError::Numerical {
        iteration,
        reason: reason.to_string(),
    };

    // Starting point.
    if !kkt.update_and_factor(cones, &identity_scaling(cones)) {
        return Err(numerical(0, "factorization of the initial KKT system failed"));
    }
    let u = kkt.solve(&concat3(&vec![0.0; n], &sf.b, &sf.h));
    let (x0, _, zt) = split3(&u, n, p);
    let mut s0: Vec<f64> = zt.iter().map(|v| -v).collect();
    cones.shift_into_interior(&mut s0);
    let neg_c: Vec<f64> = sf.c.iter().map(|v| -v).collect();
    let u = kkt.solve(&concat3(&neg_c, &vec![0.0; p], &vec![0.0; m]));
    let (_, y0, mut z0) = split3(&u, n, p);
    cones.shift_into_interior(&mut z0);
    let mut it = Iterate {
        x: x0,
        y: y0,
        z: z0,
        s: s0,
        tau: 1.0,
        kappa: 1.0,
    };

    let b_norm = norm_inf(&sf.b).max(norm_inf(&sf.h));
    let c_norm = norm_inf(&sf.c);
    let e = cones.identity();

    let mut iteration = 0;
    let mut best: Option<(f64, SolverResult)> = None;
    loop {
        // Residuals of the embedding.
        let mut rx = sf.c.iter().map(|v| v * it.tau).collect::<Vec<_>>();
        sf.a.tmul_add(1.0, &it.y, &mut rx);
        sf.g.tmul_add(1.0, &it.z, &mut rx);
        let ax = sf.a.mul_vec(&it.x);
        let ry: Vec<f64> = ax.iter().zip(&sf.b).map(|(a, b)| a - b * it.tau).collect();
        let gx = sf.g.mul_vec(&it.x);
        let rz: Vec<f64> = (0..m).map(|i| gx[i] + it.s[i] - sf.h[i] * it.tau).collect();
        let cx = dot(&sf.c, &it.x);
        let by_hz = dot(&sf.b, &it.y) + dot(&sf.h, &it.z);
        let rtau = it.kappa + cx + by_hz;

        let pres = norm_inf(&ry).max(norm_inf(&rz)) / it.tau / (1.0 + b_norm);
        let dres = norm_inf(&rx) / it.tau / (1.0 + c_norm);
        let gap = dot(&it.s, &it.z) / (it.tau * it.tau);
        let pobj = cx / it.tau;
        let dobj = -by_hz / it.tau;
        let rel_gap = gap / pobj.abs().min(dobj.abs()).max(1e-300);
        let residuals = Residuals {
            primal: pres,
            dual: dres,
            gap: gap.min(rel_gap),
        };
        if !(pres.is_finite() && dres.is_finite() && gap.is_finite()) {
            return fallback(best, numerical(iteration, "non-finite residuals"));
        }

        let converged = |f: f64| {
            pres < f * settings.eps_feasibility
                && dres < f * settings.eps_feasibility
                && (gap < f * settings.eps_gap_abs || rel_gap < f * settings.eps_gap_rel)
        };
        let current = |status: SolveStatus| {
            let x: Vec<f64> = it.x.iter().map(|v| v / it.tau).collect();
            let y: Vec<f64> = it.y.iter().map(|v| v / it.tau).collect();
            let z: Vec<f64> = it.z.iter().map(|v| v / it.tau).collect();
            let x = sf.unscale_x(&x);
            let objective = program.objective_value(&x);
            SolverResult {
                status,
                duals: sf.unscale_duals(&y, &z),
                x,
                iterations: iteration,
                residuals,
                objective,
            }
        };
        if converged(1.0) {
            return Ok(current(SolveStatus::Optimal));
        }
        if converged(settings.reduced_accuracy_factor) {
            let score = (pres / settings.eps_feasibility)
                .max(dres / settings.eps_feasibility)
                .max((gap / settings.eps_gap_abs).min(rel_gap / settings.eps_gap_rel));
            if best.as_ref().is_none_or(|(b, _)| score < *b) {
                best = Some((score, current(SolveStatus::AlmostOptimal)));
            }
        }

        if it.tau < it.kappa {
            if by_hz < 0.0 {
                let mut aty = vec![0.0; n];
                sf.a.tmul_add(1.0, &it.y, &mut aty);
                sf.g.tmul_add(1.0, &it.z, &mut aty);
                if norm_inf(&aty) / -by_hz < settings.eps_infeasibility {
                    let scale = -by_hz;
                    let y: Vec<f64> = it.y.iter().map(|v| v / scale).collect();
                    let z: Vec<f64> = it.z.iter().map(|v| v / scale).collect();
                    return Ok(SolverResult {
                        status: SolveStatus::PrimalInfeasible,
                        x: vec![f64::NAN; n],
                        duals: sf.unscale_duals(&y, &z),
                        iterations: iteration,
                        residuals,
                        objective: f64::INFINITY,
                    });
                }
            }
            if cx < 0.0 {
                let gxs: Vec<f64> = gx.iter().zip(&it.s).map(|(g, s)| g + s).collect();
                let r = norm_inf(&ax).max(norm_inf(&gxs)) / -cx;
                if r < settings.eps_infeasibility {
                    let x: Vec<f64> = it.x.iter().map(|v| v / -cx).collect();
                    return Ok(SolverResult {
                        status: SolveStatus::DualInfeasible,
                        x: sf.unscale_x(&x),
                        duals: Duals::default(),
                        iterations: iteration,
                        residuals,
                        objective: f64::NEG_INFINITY,
                    });
                }
            }
        }

        if iteration >= settings.max_iterations {
            return Ok(current(SolveStatus::IterationLimit));
        }
        iteration += 1;

        let Some(scaling) = cones.scaling(&it.s, &it.z) else {
            return fallback(best, numerical(iteration, "iterate left the cone interior"));
        };
        let lambda = cones.apply_w(&scaling, &it.z, false);
        if !kkt.update_and_factor(cones, &scaling) {
            return fallback(best, numerical(iteration, "KKT factorization produced non-finite pivots"));
        }

        let u1 = kkt.solve(&concat3(&neg_c, &sf.b, &sf.h));
        let (x1, y1, z1) = split3(&u1, n, p);
        let denom = dot(&sf.c, &x1) + dot(&sf.b, &y1) + dot(&sf.h, &z1) - it.kappa / it.tau;

        let direction = |eta: f64, ds_target: &[f64], dkappa_target: f64| -> Direction {
            let ws = cones.apply_w(&scaling, &cones.divide(&lambda, ds_target), false);
            let rhs_x: Vec<f64> = rx.iter().map(|v| -eta * v).collect();
            let rhs_y: Vec<f64> = ry.iter().map(|v| -eta * v).collect();
            let rhs_z: Vec<f64> = rz.iter().zip(&ws).map(|(v, w)| -eta * v - w).collect();
            let u2 = kkt.solve(&concat3(&rhs_x, &rhs_y, &rhs_z));
            let (mut dx, mut dy, mut dz) = split3(&u2, n, p);
            let num = -eta * rtau - dkappa_target / it.tau
                - (dot(&sf.c, &dx) + dot(&sf.b, &dy) + dot(&sf.h, &dz));
            let dtau = num / denom;
            axpy(dtau, &x1, &mut dx);
            axpy(dtau, &y1, &mut dy);
            axpy(dtau, &z1, &mut dz);
            let wdz = cones.apply_w(&scaling, &dz, false);
            let w2dz = cones.apply_w(&scaling, &wdz, false);
            let ds: Vec<f64> = ws.iter().zip(&w2dz).map(|(a, b)| a - b).collect();
            let dkappa = (dkappa_target - it.kappa * dtau) / it.tau;
            Direction {
                x: dx,
                y: dy,
                z: dz,
                s: ds,
                tau: dtau,
                kappa: dkappa,
            }
        };

        let max_step = |d: &Direction| -> f64 {
            let mut alpha = cones.max_step(&it.s, &d.s, 1.0);
            alpha = alpha.min(cones.max_step(&it.z, &d.z, 1.0));
            if d.tau < 0.0 {
                alpha = alpha.min(-it.tau / d.tau);
            }
            if d.kappa < 0.0 {
                alpha = alpha.min(-it.kappa / d.kappa);
            }
            alpha
        };

        // Predictor.
        let lambda_sq = cones.product(&lambda, &lambda);
        let ds_aff: Vec<f64> = lambda_sq.iter().map(|v| -v).collect();
        let aff = direction(1.0, &ds_aff, -it.tau * it.kappa);
        let alpha_aff = max_step(&aff);
        let mu = (dot(&it.s, &it.z) + it.tau * it.kappa) / (degree + 1.0);
        let sigma = (1.0 - alpha_aff).powi(3);

        // Corrector.
        let winv_ds = cones.apply_w(&scaling, &aff.s, true);
        let w_dz = cones.apply_w(&scaling, &aff.z, false);
        let second = cones.product(&winv_ds, &w_dz);
        let ds_comb: Vec<f64> = (0..m)
            .map(|i| -lambda_sq[i] - second[i] + sigma * mu * e[i])
            .collect();
        let dk_comb = -it.tau * it.kappa - aff.tau * aff.kappa + sigma * mu;
        let dir = direction(1.0 - sigma, &ds_comb, dk_comb);
        let alpha = (settings.step_fraction * max_step(&dir)).min(1.0);
        if !(alpha.is_finite()) || alpha <= 1e-14 {
            return fallback(best, numerical(iteration, "step length collapsed"));
        }

        axpy(alpha, &dir.x, &mut it.x);
        axpy(alpha, &dir.y, &mut it.y);
        axpy(alpha, &dir.z, &mut it.z);
        axpy(alpha, &dir.s, &mut it.s);
        it.tau += alpha * dir.tau;
        it.kappa += alpha * dir.kappa;
    }
}

/// Returns the best reduced-accuracy iterate seen so far in place of a numerical failure.
fn fallback(best: Option<(f64, SolverResult)>, err: SolverError) -> Result<SolverResult, SolverError> {
    best.map(|(_, r)| r).ok_or(err)
}
