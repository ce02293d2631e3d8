//! Brute-force reference for small inequality-form LPs: `min c.x  s.t.  G x <= h`.
#![allow(dead_code)]

use rand::Rng;

pub struct DenseLp {
    pub c: Vec<f64>,
    pub g: Vec<Vec<f64>>,
    pub h: Vec<f64>,
}

/// Solves `m x = r` by Gaussian elimination with partial pivoting; `None` if singular.
fn solve_dense(mut m: Vec<Vec<f64>>, mut r: Vec<f64>) -> Option<Vec<f64>> {
    let n = r.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&a, &b| m[a][col].abs().total_cmp(&m[b][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..n {
            let f = m[row][col] / m[col][col];
            for k in col..n {
                m[row][k] -= f * m[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| m[i][k] * x[k]).sum();
        x[i] = (r[i] - s) / m[i][i];
    }
    Some(x)
}

fn subsets(m: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, m: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..m {
            cur.push(i);
            rec(i + 1, m, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, m, k, &mut Vec::new(), &mut out);
    out
}

/// Best objective over all basic feasible points, or `None` if there is no vertex.
pub fn vertex_enumeration(lp: &DenseLp) -> Option<(f64, Vec<f64>)> {
    let n = lp.c.len();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for rows in subsets(lp.g.len(), n) {
        let m = rows.iter().map(|&i| lp.g[i].clone()).collect();
        let r = rows.iter().map(|&i| lp.h[i]).collect();
        let Some(x) = solve_dense(m, r) else { continue };
        let feasible = lp.g.iter().zip(&lp.h).all(|(gi, hi)| {
            let lhs: f64 = gi.iter().zip(&x).map(|(a, b)| a * b).sum();
            lhs <= hi + 1e-9 * (1.0 + hi.abs())
        });
        if !feasible {
            continue;
        }
        let obj: f64 = lp.c.iter().zip(&x).map(|(a, b)| a * b).sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, x));
        }
    }
    best
}

/// Random LP with at most 6 variables and 10 rows whose feasible region is a nonempty
/// bounded polytope: a simplex `x_i >= -lo_i`, `sum x <= hi` cut by random rows that keep the
/// origin feasible.
pub fn random_bounded_lp<R: Rng>(rng: &mut R) -> DenseLp {
    let n = rng.gen_range(1..=6);
    let extra = rng.gen_range(0..=(10 - (n + 1)).min(4));
    let mut g = Vec::new();
    let mut h = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; n];
        row[i] = -1.0;
        g.push(row);
        h.push(rng.gen_range(0.5..3.0));
    }
    g.push(vec![1.0; n]);
    h.push(rng.gen_range(1.0..5.0));
    for _ in 0..extra {
        g.push((0..n).map(|_| rng.gen_range(-2.0..2.0)).collect());
        h.push(rng.gen_range(0.1..3.0));
    }
    let c = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
    DenseLp { c, g, h }
}

pub fn to_program(lp: &DenseLp) -> gridflex_solver::ConicProgram {
    let mut b = gridflex_solver::ProgramBuilder::new(lp.c.len());
    for (j, &cj) in lp.c.iter().enumerate() {
        b.set_cost(j, cj);
    }
    for (row, &hi) in lp.g.iter().zip(&lp.h) {
        b.add_le(row.iter().copied().enumerate().collect(), hi);
    }
    b.build()
}
