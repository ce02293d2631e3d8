//! Sparse LDL^T factorization for quasi-definite KKT systems.
//!
//! The symbolic phase orders the matrix with a greedy minimum-degree rule on the explicit
//! elimination graph and records the exact fill pattern. The numeric phase is a left-looking
//! column factorization over that pattern. Pivots are regularized towards their expected sign,
//! which is always possible for quasi-definite matrices regardless of the ordering.

use std::collections::BTreeSet;

#[derive(Debug, Clone)]
pub(crate) struct LdlFactor {
    n: usize,
    perm: Vec<usize>,
    iperm: Vec<usize>,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    lvals: Vec<f64>,
    /// For permuted row `j`: the columns `k < j` with a structural `L[j, k]`, and its slot.
    row_lists: Vec<Vec<(usize, usize)>>,
    /// For permuted column `j`: `(permuted row >= j, input entry index)`.
    a_cols: Vec<Vec<(usize, usize)>>,
    d: Vec<f64>,
    /// Expected pivot sign, in permuted order.
    signs: Vec<f64>,
    work: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Regularization {
    pub static_delta: f64,
    pub dynamic_eps: f64,
    pub dynamic_delta: f64,
}

impl LdlFactor {
    /// `entries` lists the structural nonzeros of the lower triangle (`row >= col`) in original
    /// indexing; every diagonal must be present. `signs[i]` is `+1` or `-1`.
    pub fn new(n: usize, entries: &[(usize, usize)], signs: &[f64]) -> Self {
        let mut adj: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); n];
        for &(i, j) in entries {
            debug_assert!(i >= j && i < n);
            if i != j {
                adj[i].insert(j);
                adj[j].insert(i);
            }
        }

        let mut eliminated = vec![false; n];
        let mut perm = Vec::with_capacity(n);
        let mut patterns: Vec<Vec<usize>> = Vec::with_capacity(n);
        for _ in 0..n {
            let v = (0..n)
                .filter(|&v| !eliminated[v])
                .min_by_key(|&v| (adj[v].len(), v))
                .unwrap();
            let neighbors: Vec<usize> = adj[v].iter().copied().collect();
            for &a in &neighbors {
                adj[a].remove(&v);
                for &b in &neighbors {
                    if a != b {
                        adj[a].insert(b);
                    }
                }
            }
            adj[v].clear();
            eliminated[v] = true;
            perm.push(v);
            patterns.push(neighbors);
        }

        let mut iperm = vec![0; n];
        for (k, &v) in perm.iter().enumerate() {
            iperm[v] = k;
        }

        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut row_lists = vec![Vec::new(); n];
        col_ptr.push(0);
        for (k, pattern) in patterns.into_iter().enumerate() {
            let mut rows: Vec<usize> = pattern.into_iter().map(|a| iperm[a]).collect();
            rows.sort_unstable();
            for i in rows {
                debug_assert!(i > k);
                row_lists[i].push((k, row_idx.len()));
                row_idx.push(i);
            }
            col_ptr.push(row_idx.len());
        }

        let mut a_cols = vec![Vec::new(); n];
        for (e, &(i, j)) in entries.iter().enumerate() {
            let (pi, pj) = (iperm[i], iperm[j]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            a_cols[c].push((r, e));
        }

        let signs = perm.iter().map(|&v| signs[v]).collect();
        let nnz = row_idx.len();
        Self {
            n,
            perm,
            iperm,
            col_ptr,
            row_idx,
            lvals: vec![0.0; nnz],
            row_lists,
            a_cols,
            d: vec![0.0; n],
            signs,
            work: vec![0.0; n],
        }
    }

    /// Numeric factorization of the matrix whose lower-triangle values are `values`
    /// (aligned with the `entries` given to [`LdlFactor::new`]). Returns the number of
    /// dynamically regularized pivots, or `None` if a non-finite value was produced.
    pub fn factor(&mut self, values: &[f64], reg: Regularization) -> Option<usize> {
        let mut bumped = 0;
        for j in 0..self.n {
            for &(i, e) in &self.a_cols[j] {
                self.work[i] += values[e];
            }
            self.work[j] += self.signs[j] * reg.static_delta;

            for &(k, pos) in &self.row_lists[j] {
                let ljk = self.lvals[pos];
                let t = ljk * self.d[k];
                for p in pos..self.col_ptr[k + 1] {
                    self.work[self.row_idx[p]] -= self.lvals[p] * t;
                }
            }

            let mut djj = self.work[j];
            self.work[j] = 0.0;
            if !djj.is_finite() {
                return None;
            }
            if self.signs[j] * djj <= reg.dynamic_eps {
                djj = self.signs[j] * reg.dynamic_delta;
                bumped += 1;
            }
            self.d[j] = djj;
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                let i = self.row_idx[p];
                self.lvals[p] = self.work[i] / djj;
                self.work[i] = 0.0;
            }
        }
        Some(bumped)
    }

    /// Solves `L D L^T x = rhs` in place.
    pub fn solve(&self, rhs: &mut [f64]) {
        let mut y: Vec<f64> = self.perm.iter().map(|&v| rhs[v]).collect();
        for j in 0..self.n {
            let yj = y[j];
            if yj != 0.0 {
                for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                    y[self.row_idx[p]] -= self.lvals[p] * yj;
                }
            }
        }
        for (yj, dj) in y.iter_mut().zip(&self.d) {
            *yj /= dj;
        }
        for j in (0..self.n).rev() {
            let mut acc = y[j];
            for p in self.col_ptr[j]..self.col_ptr[j + 1] {
                acc -= self.lvals[p] * y[self.row_idx[p]];
            }
            y[j] = acc;
        }
        for (v, &k) in self.iperm.iter().enumerate() {
            rhs[v] = y[k];
        }
    }

    #[cfg(test)]
    pub fn fill(&self) -> usize {
        self.row_idx.len()
    }
}

/// `y = K x` for a symmetric matrix stored as its lower triangle.
pub(crate) fn sym_mul(n: usize, entries: &[(usize, usize)], values: &[f64], x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for (&(i, j), &v) in entries.iter().zip(values) {
        y[i] += v * x[j];
        if i != j {
            y[j] += v * x[i];
        }
    }
    y
}
