use serde::{Deserialize, Serialize};

use crate::error::SolverError;
use crate::sparse::CsrMatrix;

/// Rotated second-order cone on program variables: `x[u] * x[w] >= sum_k x[z_k]^2`,
/// with `x[u], x[w] >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatedCone {
    pub u: usize,
    pub w: usize,
    pub z: Vec<usize>,
}

impl RotatedCone {
    pub fn new(u: usize, w: usize, z: Vec<usize>) -> Self {
        Self { u, w, z }
    }

    /// `max(0, sum z^2 - u w, -u, -w)` at `x`.
    pub fn violation(&self, x: &[f64]) -> f64 {
        let (u, w) = (x[self.u], x[self.w]);
        let zz: f64 = self.z.iter().map(|&k| x[k] * x[k]).sum();
        (zz - u * w).max(-u).max(-w).max(0.0)
    }

    /// Slack of the relation, `u w - sum z^2`.
    pub fn gap(&self, x: &[f64]) -> f64 {
        let zz: f64 = self.z.iter().map(|&k| x[k] * x[k]).sum();
        x[self.u] * x[self.w] - zz
    }

    /// Dimension of the equivalent standard cone `(u + w, u - w, 2 z)`.
    pub(crate) fn standard_dim(&self) -> usize {
        self.z.len() + 2
    }

    /// Rows of the linear map `x -> (u + w, u - w, 2 z)`.
    pub(crate) fn standard_rows(&self) -> Vec<Vec<(usize, f64)>> {
        let mut rows = vec![
            vec![(self.u, 1.0), (self.w, 1.0)],
            vec![(self.u, 1.0), (self.w, -1.0)],
        ];
        rows.extend(self.z.iter().map(|&k| vec![(k, 2.0)]));
        rows
    }
}

/// `min c^T x  s.t.  A x = b,  G x <= h,  x restricted to the rotated cones.`
///
/// LPs are programs without cone blocks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub objective: Vec<f64>,
    pub eq_matrix: CsrMatrix,
    pub eq_rhs: Vec<f64>,
    pub ineq_matrix: CsrMatrix,
    pub ineq_rhs: Vec<f64>,
    pub cones: Vec<RotatedCone>,
}

impl ConicProgram {
    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let n = self.num_vars();
        let bad = |msg: String| Err(SolverError::Malformed(msg));
        if self.eq_matrix.ncols() != n || self.ineq_matrix.ncols() != n {
            return bad(format!(
                "matrix widths {}/{} do not match {} variables",
                self.eq_matrix.ncols(),
                self.ineq_matrix.ncols(),
                n
            ));
        }
        if self.eq_matrix.nrows() != self.eq_rhs.len() {
            return bad("equality rows and rhs length differ".into());
        }
        if self.ineq_matrix.nrows() != self.ineq_rhs.len() {
            return bad("inequality rows and rhs length differ".into());
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        if !finite(&self.objective) || !finite(&self.eq_rhs) || !finite(&self.ineq_rhs) {
            return bad("non-finite data".into());
        }
        for (ci, cone) in self.cones.iter().enumerate() {
            let mut members: Vec<usize> = [cone.u, cone.w].into_iter().chain(cone.z.iter().copied()).collect();
            if let Some(&v) = members.iter().find(|&&v| v >= n) {
                return bad(format!("cone {ci} references variable {v} out of range"));
            }
            members.sort_unstable();
            if let Some(pair) = members.windows(2).find(|p| p[0] == p[1]) {
                return bad(format!("variable {} appears twice in cone {ci}", pair[0]));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        crate::sparse::dot(&self.objective, x)
    }

    /// Deterministic JSON dump, loadable with [`ConicProgram::from_json`].
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("program serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SolverError> {
        let program: Self =
            serde_json::from_str(text).map_err(|e| SolverError::Malformed(e.to_string()))?;
        program.validate()?;
        Ok(program)
    }
}

/// Incremental construction of a [`ConicProgram`] from sparse rows.
#[derive(Debug, Clone, Default)]
pub struct ProgramBuilder {
    objective: Vec<f64>,
    eq_rows: Vec<Vec<(usize, f64)>>,
    eq_rhs: Vec<f64>,
    ineq_rows: Vec<Vec<(usize, f64)>>,
    ineq_rhs: Vec<f64>,
    cones: Vec<RotatedCone>,
}

impl ProgramBuilder {
    pub fn new(num_vars: usize) -> Self {
        Self {
            objective: vec![0.0; num_vars],
            ..Default::default()
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn add_var(&mut self, cost: f64) -> usize {
        self.objective.push(cost);
        self.objective.len() - 1
    }

    pub fn set_cost(&mut self, var: usize, cost: f64) {
        self.objective[var] = cost;
    }

    /// `row . x = rhs`; returns the row index.
    pub fn add_eq(&mut self, row: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.eq_rows.push(row);
        self.eq_rhs.push(rhs);
        self.eq_rows.len() - 1
    }

    /// `row . x <= rhs`; returns the row index.
    pub fn add_le(&mut self, row: Vec<(usize, f64)>, rhs: f64) -> usize {
        self.ineq_rows.push(row);
        self.ineq_rhs.push(rhs);
        self.ineq_rows.len() - 1
    }

    pub fn add_cone(&mut self, cone: RotatedCone) -> usize {
        self.cones.push(cone);
        self.cones.len() - 1
    }

    pub fn build(self) -> ConicProgram {
        let n = self.objective.len();
        ConicProgram {
            eq_matrix: CsrMatrix::from_rows(n, &self.eq_rows),
            ineq_matrix: CsrMatrix::from_rows(n, &self.ineq_rows),
            objective: self.objective,
            eq_rhs: self.eq_rhs,
            ineq_rhs: self.ineq_rhs,
            cones: self.cones,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cone_members_must_be_distinct() {
        let mut b = ProgramBuilder::new(4);
        b.add_cone(RotatedCone::new(0, 1, vec![2]));
        b.add_cone(RotatedCone::new(3, 1, vec![]));
        assert!(b.build().validate().is_ok());
        let mut b = ProgramBuilder::new(4);
        b.add_cone(RotatedCone::new(0, 1, vec![0]));
        assert!(matches!(b.build().validate(), Err(SolverError::Malformed(_))));
    }

    #[test]
    fn rejects_out_of_range_cone() {
        let mut b = ProgramBuilder::new(2);
        b.add_cone(RotatedCone::new(0, 1, vec![5]));
        assert!(b.build().validate().is_err());
    }

    #[test]
    fn json_dump_round_trips() {
        let mut b = ProgramBuilder::new(3);
        b.set_cost(2, 1.0);
        b.add_eq(vec![(0, 1.0)], 1.0);
        b.add_le(vec![(1, -1.0)], -2.0);
        b.add_cone(RotatedCone::new(0, 2, vec![1]));
        let p = b.build();
        let text = p.to_json();
        assert_eq!(ConicProgram::from_json(&text).unwrap(), p);
        assert_eq!(text, ConicProgram::from_json(&text).unwrap().to_json());
    }
}
