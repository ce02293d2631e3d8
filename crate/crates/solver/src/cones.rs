//! Symmetric cone algebra for the internal standard form: a nonnegative orthant block
//! followed by second-order cones `t >= ||x||`.
//!
//! Scaling uses the Nesterov-Todd point, so that `W z = W^{-1} s = lambda`.

use crate::sparse::dot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Cone {
    NonNeg { start: usize, dim: usize },
    Soc { start: usize, dim: usize },
}

impl Cone {
    pub fn range(&self) -> std::ops::Range<usize> {
        match *self {
            Cone::NonNeg { start, dim } | Cone::Soc { start, dim } => start..start + dim,
        }
    }

    /// Barrier degree contribution.
    pub fn degree(&self) -> usize {
        match *self {
            Cone::NonNeg { dim, .. } => dim,
            Cone::Soc { .. } => 1,
        }
    }
}

/// Per-cone Nesterov-Todd scaling data.
#[derive(Debug, Clone)]
pub(crate) enum Scaling {
    NonNeg { w: Vec<f64> },
    Soc { eta: f64, wbar: Vec<f64> },
}

#[derive(Debug, Clone)]
pub(crate) struct ConeSet {
    pub cones: Vec<Cone>,
    pub dim: usize,
}

fn soc_det(v: &[f64]) -> f64 {
    v[0] * v[0] - dot(&v[1..], &v[1..])
}

impl ConeSet {
    pub fn new(nonneg: usize, soc_dims: &[usize]) -> Self {
        let mut cones = Vec::new();
        if nonneg > 0 {
            cones.push(Cone::NonNeg { start: 0, dim: nonneg });
        }
        let mut start = nonneg;
        for &dim in soc_dims {
            cones.push(Cone::Soc { start, dim });
            start += dim;
        }
        Self { cones, dim: start }
    }

    pub fn degree(&self) -> usize {
        self.cones.iter().map(Cone::degree).sum()
    }

    pub fn identity(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.dim];
        for cone in &self.cones {
            match *cone {
                Cone::NonNeg { start, dim } => e[start..start + dim].fill(1.0),
                Cone::Soc { start, .. } => e[start] = 1.0,
            }
        }
        e
    }

    /// Smallest eigenvalue of `v` with respect to the cone's Jordan algebra.
    pub fn min_eigenvalue(&self, v: &[f64]) -> f64 {
        let mut m = f64::INFINITY;
        for cone in &self.cones {
            let r = cone.range();
            match cone {
                Cone::NonNeg { .. } => {
                    for &x in &v[r] {
                        m = m.min(x);
                    }
                }
                Cone::Soc { .. } => {
                    let b = &v[r];
                    m = m.min(b[0] - dot(&b[1..], &b[1..]).sqrt());
                }
            }
        }
        m
    }

    /// Moves `v` into the interior along the identity direction if needed.
    pub fn shift_into_interior(&self, v: &mut [f64]) {
        let alpha = -self.min_eigenvalue(v);
        if alpha >= 0.0 {
            let e = self.identity();
            for (x, ei) in v.iter_mut().zip(e) {
                *x += (1.0 + alpha) * ei;
            }
        }
    }

    pub fn scaling(&self, s: &[f64], z: &[f64]) -> Option<Vec<Scaling>> {
        let mut out = Vec::with_capacity(self.cones.len());
        for cone in &self.cones {
            let r = cone.range();
            match cone {
                Cone::NonNeg { .. } => {
                    let w = s[r.clone()]
                        .iter()
                        .zip(&z[r])
                        .map(|(si, zi)| (si / zi).sqrt())
                        .collect();
                    out.push(Scaling::NonNeg { w });
                }
                Cone::Soc { .. } => {
                    let (sb, zb) = (&s[r.clone()], &z[r]);
                    let (sdet, zdet) = (soc_det(sb), soc_det(zb));
                    if !(sdet > 0.0 && zdet > 0.0) {
                        return None;
                    }
                    let (sn, zn) = (sdet.sqrt(), zdet.sqrt());
                    let sbar: Vec<f64> = sb.iter().map(|x| x / sn).collect();
                    let zbar: Vec<f64> = zb.iter().map(|x| x / zn).collect();
                    let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
                    let mut wbar: Vec<f64> = sbar
                        .iter()
                        .zip(&zbar)
                        .enumerate()
                        .map(|(k, (a, b))| if k == 0 { a + b } else { a - b })
                        .collect();
                    for w in &mut wbar {
                        *w /= 2.0 * gamma;
                    }
                    let eta = (sdet / zdet).powf(0.25);
                    out.push(Scaling::Soc { eta, wbar });
                }
            }
        }
        Some(out)
    }

    /// `out = W v` (or `W^{-1} v` when `inverse`).
    pub fn apply_w(&self, scaling: &[Scaling], v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (cone, sc) in self.cones.iter().zip(scaling) {
            let r = cone.range();
            match sc {
                Scaling::NonNeg { w } => {
                    for ((o, x), wi) in out[r.clone()].iter_mut().zip(&v[r]).zip(w) {
                        *o = if inverse { x / wi } else { x * wi };
                    }
                }
                Scaling::Soc { eta, wbar } => {
                    let vb = &v[r.clone()];
                    let ob = &mut out[r];
                    let sign = if inverse { -1.0 } else { 1.0 };
                    let w1v1 = dot(&wbar[1..], &vb[1..]);
                    let factor = if inverse { 1.0 / eta } else { *eta };
                    ob[0] = factor * (wbar[0] * vb[0] + sign * w1v1);
                    let coef = sign * vb[0] + w1v1 / (1.0 + wbar[0]);
                    for k in 1..vb.len() {
                        ob[k] = factor * (vb[k] + coef * wbar[k]);
                    }
                }
            }
        }
        out
    }

    /// Lower triangle of the `W^2` block for cone `idx`, as `(row, col, value)` offsets
    /// relative to the cone start.
    pub fn w_squared_block(&self, scaling: &Scaling) -> Vec<(usize, usize, f64)> {
        match scaling {
            Scaling::NonNeg { w } => w.iter().enumerate().map(|(i, wi)| (i, i, wi * wi)).collect(),
            Scaling::Soc { eta, wbar } => {
                let e2 = eta * eta;
                let dim = wbar.len();
                let mut out = Vec::with_capacity(dim * (dim + 1) / 2);
                for i in 0..dim {
                    for j in 0..=i {
                        let mut v = 2.0 * wbar[i] * wbar[j];
                        if i == j {
                            v += if i == 0 { -1.0 } else { 1.0 };
                        }
                        out.push((i, j, e2 * v));
                    }
                }
                out
            }
        }
    }

    /// Jordan product `u o v`.
    pub fn product(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for cone in &self.cones {
            let r = cone.range();
            match cone {
                Cone::NonNeg { .. } => {
                    for i in r {
                        out[i] = u[i] * v[i];
                    }
                }
                Cone::Soc { .. } => {
                    let (ub, vb) = (&u[r.clone()], &v[r.clone()]);
                    let ob = &mut out[r];
                    ob[0] = dot(ub, vb);
                    for k in 1..ub.len() {
                        ob[k] = ub[0] * vb[k] + vb[0] * ub[k];
                    }
                }
            }
        }
        out
    }

    /// Solves `lambda o x = d` for `x`.
    pub fn divide(&self, lambda: &[f64], d: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for cone in &self.cones {
            let r = cone.range();
            match cone {
                Cone::NonNeg { .. } => {
                    for i in r {
                        out[i] = d[i] / lambda[i];
                    }
                }
                Cone::Soc { .. } => {
                    let (lb, db) = (&lambda[r.clone()], &d[r.clone()]);
                    let ob = &mut out[r];
                    let rho = soc_det(lb);
                    let x0 = (lb[0] * db[0] - dot(&lb[1..], &db[1..])) / rho;
                    ob[0] = x0;
                    for k in 1..lb.len() {
                        ob[k] = (db[k] - x0 * lb[k]) / lb[0];
                    }
                }
            }
        }
        out
    }

    /// Largest `alpha` (capped at `cap`) keeping `u + alpha d` in the cone, for `u` interior.
    pub fn max_step(&self, u: &[f64], d: &[f64], cap: f64) -> f64 {
        let mut alpha = cap;
        for cone in &self.cones {
            let r = cone.range();
            match cone {
                Cone::NonNeg { .. } => {
                    for i in r {
                        if d[i] < 0.0 {
                            alpha = alpha.min(-u[i] / d[i]);
                        }
                    }
                }
                Cone::Soc { .. } => {
                    alpha = alpha.min(soc_max_step(&u[r.clone()], &d[r]));
                }
            }
        }
        alpha.max(0.0)
    }
}

fn soc_max_step(u: &[f64], d: &[f64]) -> f64 {
    let a = soc_det(d);
    let b = u[0] * d[0] - dot(&u[1..], &d[1..]);
    let c = soc_det(u).max(0.0);
    let disc = b * b - a * c;
    let tiny = 1e-300;
    if a.abs() <= tiny * (1.0 + b.abs()) {
        // Linear: c + 2 b alpha >= 0; also the leading component must stay nonnegative.
        let mut alpha = if b < 0.0 { c / (-2.0 * b) } else { f64::INFINITY };
        if d[0] < 0.0 {
            alpha = alpha.min(-u[0] / d[0]);
        }
        return alpha;
    }
    if a < 0.0 {
        // Concave quadratic: exactly one positive root.
        let sq = disc.max(0.0).sqrt();
        // Root (-b - sq)/a, written to avoid cancellation when b < 0.
        if b > 0.0 {
            (-b - sq) / a
        } else {
            c / (-b + sq)
        }
    } else if disc < 0.0 || b >= 0.0 {
        f64::INFINITY
    } else {
        // Both roots positive; take the smaller one, c / (-b + sqrt(disc)).
        c / (-b + disc.sqrt())
    }
}
