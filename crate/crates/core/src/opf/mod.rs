//! Convex branch-flow OPF with piecewise-linear penalties and a second-order cone relaxation of
//! the current relation.
//!
//! Variables, per node `i` and line `k = (i, j)`:
//! `v_i`, `l_k`, `P_k`, `Q_k`, `Ldev_k`, and for non-slack nodes `p_i`, `q_i`, `Vdev_i` plus
//! scheduling epigraph variables. Dispatch `p_i` uses the load sign: the node draws
//! `load_i + p_i`, so a negative set-point supplies flexibility.

mod dump;
mod scheduling;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use gridflex_solver::{
    residuals, solve, ConicProgram, Duals, ProgramBuilder, Residuals, RotatedCone, SolveStatus, SolverError,
    SolverSettings,
};

use crate::network::RadialNetwork;
use crate::powerflow::{flow_deviation, voltage_deviation, NodePower};

pub use dump::replay_dump;
pub use scheduling::{scheduling_cost, SchedulingCost};

/// Distance below which an extracted set-point is snapped onto its bound.
pub const SETPOINT_SNAP: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpfError {
    #[error("expected {expected} nodal loads, got {found}")]
    InjectionCount { expected: usize, found: usize },
    #[error("node {0}: load is not finite")]
    NonFinite(String),
    #[error("weight {0} must be nonnegative")]
    NegativeWeight(&'static str),
    #[error("expected flexibility bounds for {expected} nodes, got {found}")]
    FlexCount { expected: usize, found: usize },
    #[error("node {node}: flexibility bounds must satisfy min <= 0 <= max ({reason})")]
    InvalidFlex { node: String, reason: String },
    #[error("malformed problem: {0}")]
    Malformed(String),
    #[error("solver failed: {0}")]
    Numerical(String),
    #[error("operation needs an optimal solution, status is {0:?}")]
    NotOptimal(OpfStatus),
    #[error("cannot parse problem dump: {0}")]
    Dump(String),
}

impl From<SolverError> for OpfError {
    fn from(e: SolverError) -> Self {
        match e {
            SolverError::Malformed(m) => OpfError::Malformed(m),
            e @ SolverError::Numerical { .. } => OpfError::Numerical(e.to_string()),
        }
    }
}

/// Objective weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostWeights {
    pub w_l: f64,
    pub w_v: f64,
    pub w_lim: f64,
    pub w_p: f64,
    pub w_q: f64,
}

impl CostWeights {
    pub fn validate(&self) -> Result<(), OpfError> {
        for (name, w) in [
            ("w_l", self.w_l),
            ("w_v", self.w_v),
            ("w_lim", self.w_lim),
            ("w_p", self.w_p),
            ("w_q", self.w_q),
        ] {
            if !(w >= 0.0 && w.is_finite()) {
                return Err(OpfError::NegativeWeight(name));
            }
        }
        Ok(())
    }
}

/// Dispatch range of one node, per-unit.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct FlexRange {
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
}

impl FlexRange {
    pub const ZERO: FlexRange = FlexRange {
        p_min: 0.0,
        p_max: 0.0,
        q_min: 0.0,
        q_max: 0.0,
    };

    fn check(&self) -> Result<(), String> {
        let ok = |lo: f64, hi: f64| lo <= 0.0 && 0.0 <= hi && lo.is_finite() && hi.is_finite();
        if !ok(self.p_min, self.p_max) {
            return Err(format!("p in [{}, {}]", self.p_min, self.p_max));
        }
        if !ok(self.q_min, self.q_max) {
            return Err(format!("q in [{}, {}]", self.q_min, self.q_max));
        }
        Ok(())
    }
}

/// Per-node dispatch ranges, indexed like the network's nodes. The slack entry is ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlexBounds(pub Vec<FlexRange>);

impl FlexBounds {
    pub fn zero(nodes: usize) -> Self {
        Self(vec![FlexRange::ZERO; nodes])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpfTolerances {
    /// Bound on equality and inequality residuals of an accepted optimum.
    pub equality: f64,
    /// Bound on the cone violation of an accepted optimum.
    pub cone: f64,
    /// A line is loose when `l v - P^2 - Q^2` exceeds this.
    pub tightness: f64,
}

impl Default for OpfTolerances {
    fn default() -> Self {
        Self {
            equality: 1e-6,
            cone: 1e-6,
            tightness: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpfSettings {
    pub solver: SolverSettings,
    pub tolerances: OpfTolerances,
}

/// Column of each modeling variable in the conic program.
#[derive(Debug, Clone, PartialEq)]
pub struct VariableIndex {
    pub v: Vec<usize>,
    pub l: Vec<usize>,
    pub p_flow: Vec<usize>,
    pub q_flow: Vec<usize>,
    /// `None` when `w_lim = 0`.
    pub ldev: Vec<Option<usize>>,
    /// Per node; `None` at the slack.
    pub p: Vec<Option<usize>>,
    pub q: Vec<Option<usize>>,
    /// `None` at the slack and when `w_v = 0`.
    pub vdev: Vec<Option<usize>>,
    pub tp: Vec<Option<usize>>,
    pub tq: Vec<Option<usize>>,
}

/// Constraint rows by kind.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct RowCounts {
    pub slack: usize,
    pub balance: usize,
    pub voltage_drop: usize,
    pub cones: usize,
    pub voltage_epigraph: usize,
    pub flow_epigraph: usize,
    pub flex_bounds: usize,
    pub scheduling_epigraph: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpfProblem {
    pub program: ConicProgram,
    pub index: VariableIndex,
    pub counts: RowCounts,
    pub weights: CostWeights,
    pub scheduling: SchedulingCost,
    flex: Vec<FlexRange>,
    line_r: Vec<f64>,
    v_limits: (f64, f64),
    l_limits: Vec<f64>,
    names: dump::Names,
}

struct Builder {
    b: ProgramBuilder,
    names: dump::Names,
}

impl Builder {
    fn var(&mut self, name: String, cost: f64) -> usize {
        self.names.variables.push(name);
        self.b.add_var(cost)
    }

    fn eq(&mut self, name: String, row: Vec<(usize, f64)>, rhs: f64) {
        self.names.equalities.push(name);
        self.b.add_eq(row, rhs);
    }

    fn le(&mut self, name: String, row: Vec<(usize, f64)>, rhs: f64) {
        self.names.inequalities.push(name);
        self.b.add_le(row, rhs);
    }

    /// `lo <= x <= hi`, collapsed to one equality for a degenerate range.
    fn bounds(&mut self, name: &str, x: usize, lo: f64, hi: f64) -> usize {
        if lo == hi {
            self.eq(format!("fix_{name}"), vec![(x, 1.0)], lo);
            0
        } else {
            self.le(format!("max_{name}"), vec![(x, 1.0)], hi);
            self.le(format!("min_{name}"), vec![(x, -1.0)], -lo);
            2
        }
    }
}

/// Assembles the OPF for one time step. `loads` are per-unit consumption per node.
pub fn build_problem(
    network: &RadialNetwork,
    loads: &[NodePower],
    weights: &CostWeights,
    flex: &FlexBounds,
    scheduling: SchedulingCost,
) -> Result<OpfProblem, OpfError> {
    let nodes = network.nodes();
    let lines = network.lines();
    let topo = network.topology();
    let limits = *network.limits();
    let n = nodes.len();
    if loads.len() != n {
        return Err(OpfError::InjectionCount {
            expected: n,
            found: loads.len(),
        });
    }
    if flex.0.len() != n {
        return Err(OpfError::FlexCount {
            expected: n,
            found: flex.0.len(),
        });
    }
    weights.validate()?;
    for i in network.transformer_nodes() {
        if !(loads[i].p.is_finite() && loads[i].q.is_finite()) {
            return Err(OpfError::NonFinite(nodes[i].id.clone()));
        }
        flex.0[i].check().map_err(|reason| OpfError::InvalidFlex {
            node: nodes[i].id.clone(),
            reason,
        })?;
    }

    let mut bld = Builder {
        b: ProgramBuilder::new(0),
        names: dump::Names::default(),
    };
    let mut counts = RowCounts::default();
    let line_label: Vec<String> = lines.iter().map(|l| l.label()).collect();

    let v: Vec<usize> = nodes.iter().map(|nd| bld.var(format!("v[{}]", nd.id), 0.0)).collect();
    let mut index = VariableIndex {
        v,
        l: Vec::new(),
        p_flow: Vec::new(),
        q_flow: Vec::new(),
        ldev: Vec::new(),
        p: vec![None; n],
        q: vec![None; n],
        vdev: vec![None; n],
        tp: vec![None; n],
        tq: vec![None; n],
    };
    for (k, line) in lines.iter().enumerate() {
        let lbl = &line_label[k];
        index.l.push(bld.var(format!("l[{lbl}]"), weights.w_l * line.r_pu));
        index.p_flow.push(bld.var(format!("P[{lbl}]"), 0.0));
        index.q_flow.push(bld.var(format!("Q[{lbl}]"), 0.0));
        let ldev = (weights.w_lim > 0.0).then(|| bld.var(format!("Ldev[{lbl}]"), weights.w_lim));
        index.ldev.push(ldev);
    }
    for i in network.transformer_nodes() {
        let id = &nodes[i].id;
        index.p[i] = Some(bld.var(format!("p[{id}]"), 0.0));
        index.q[i] = Some(bld.var(format!("q[{id}]"), 0.0));
        index.vdev[i] = (weights.w_v > 0.0).then(|| bld.var(format!("Vdev[{id}]"), weights.w_v));
        index.tp[i] = (weights.w_p > 0.0).then(|| bld.var(format!("tp[{id}]"), weights.w_p));
        index.tq[i] = (weights.w_q > 0.0).then(|| bld.var(format!("tq[{id}]"), weights.w_q));
    }

    let slack = topo.slack;
    bld.eq(format!("slack[{}]", nodes[slack].id), vec![(index.v[slack], 1.0)], limits.v_slack_pu2);
    counts.slack = 1;

    // Nodal balances: inflow net of series losses feeds children plus the net demand.
    for i in network.transformer_nodes() {
        let id = &nodes[i].id;
        let k = topo.parent_line[i].unwrap();
        let line = &lines[k];
        for (flow, loss, dispatch, load, name) in [
            (&index.p_flow, line.r_pu, index.p[i], loads[i].p, "balance_p"),
            (&index.q_flow, line.x_pu, index.q[i], loads[i].q, "balance_q"),
        ] {
            let mut row = vec![(flow[k], 1.0), (index.l[k], -loss), (dispatch.unwrap(), -1.0)];
            for &c in &topo.children[i] {
                row.push((flow[topo.parent_line[c].unwrap()], -1.0));
            }
            bld.eq(format!("{name}[{id}]"), row, load);
            counts.balance += 1;
        }
    }

    for (k, line) in lines.iter().enumerate() {
        let (i, j) = (topo.line_parent[k], topo.line_child[k]);
        let z2 = line.r_pu * line.r_pu + line.x_pu * line.x_pu;
        bld.eq(
            format!("drop[{}]", line_label[k]),
            vec![
                (index.v[j], 1.0),
                (index.v[i], -1.0),
                (index.p_flow[k], 2.0 * line.r_pu),
                (index.q_flow[k], 2.0 * line.x_pu),
                (index.l[k], -z2),
            ],
            0.0,
        );
        counts.voltage_drop += 1;
        bld.names.cones.push(format!("current[{}]", line_label[k]));
        bld.b
            .add_cone(RotatedCone::new(index.l[k], index.v[i], vec![index.p_flow[k], index.q_flow[k]]));
        counts.cones += 1;
        if let Some(d) = index.ldev[k] {
            let lbl = &line_label[k];
            bld.le(format!("ldev_pos[{lbl}]"), vec![(d, -1.0)], 0.0);
            bld.le(format!("ldev_hi[{lbl}]"), vec![(index.l[k], 1.0), (d, -1.0)], line.i_max_pu);
            counts.flow_epigraph += 2;
        }
    }

    let shape = scheduling.epigraph();
    for i in network.transformer_nodes() {
        let id = &nodes[i].id;
        if let Some(d) = index.vdev[i] {
            let v = index.v[i];
            bld.le(format!("vdev_pos[{id}]"), vec![(d, -1.0)], 0.0);
            bld.le(format!("vdev_hi[{id}]"), vec![(v, 1.0), (d, -1.0)], limits.v_max_pu2);
            bld.le(format!("vdev_lo[{id}]"), vec![(v, -1.0), (d, -1.0)], -limits.v_min_pu2);
            counts.voltage_epigraph += 3;
        }
        let range = flex.0[i];
        let (p, q) = (index.p[i].unwrap(), index.q[i].unwrap());
        counts.flex_bounds += bld.bounds(&format!("p[{id}]"), p, range.p_min, range.p_max);
        counts.flex_bounds += bld.bounds(&format!("q[{id}]"), q, range.q_min, range.q_max);
        for (x, t, name) in [(p, index.tp[i], "tp"), (q, index.tq[i], "tq")] {
            let Some(t) = t else { continue };
            for (r, &(ax, at)) in shape.iter().enumerate() {
                let mut row = vec![(t, at)];
                if ax != 0.0 {
                    row.push((x, ax));
                }
                bld.le(format!("{name}_{r}[{id}]"), row, 0.0);
                counts.scheduling_epigraph += 1;
            }
        }
    }

    let program = bld.b.build();
    program.validate()?;
    Ok(OpfProblem {
        program,
        index,
        counts,
        weights: *weights,
        scheduling,
        flex: flex.0.clone(),
        line_r: lines.iter().map(|l| l.r_pu).collect(),
        v_limits: (limits.v_min_pu2, limits.v_max_pu2),
        l_limits: lines.iter().map(|l| l.i_max_pu).collect(),
        names: bld.names,
    })
}

impl OpfProblem {
    /// Deterministic JSON rendering of the variable index, rows and objective. The embedded
    /// program can be solved again with [`replay_dump`].
    pub fn dump(&self) -> String {
        dump::render(self)
    }

    pub fn variable_names(&self) -> &[String] {
        &self.names.variables
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OpfStatus {
    Optimal,
    Infeasible,
    MaxIterations,
}

/// Weighted objective terms.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ObjectiveBreakdown {
    pub losses: f64,
    pub voltage: f64,
    pub flow: f64,
    pub active_scheduling: f64,
    pub reactive_scheduling: f64,
}

impl ObjectiveBreakdown {
    pub fn total(&self) -> f64 {
        self.losses + self.voltage + self.flow + self.active_scheduling + self.reactive_scheduling
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfSolution {
    pub status: OpfStatus,
    pub iterations: usize,
    pub objective: f64,
    pub breakdown: ObjectiveBreakdown,
    pub v: Vec<f64>,
    pub l: Vec<f64>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    /// Per node dispatch; zero at the slack.
    pub p: Vec<f64>,
    pub q: Vec<f64>,
    /// Penalty variables, absent when the corresponding weight is zero.
    pub vdev: Option<Vec<f64>>,
    pub ldev: Option<Vec<f64>>,
    /// `l v_from - P^2 - Q^2` per line.
    pub relaxation_gaps: Vec<f64>,
    /// Absolute residuals of the returned point on the unscaled program.
    pub residuals: Residuals,
    /// Farkas certificate when infeasible.
    pub certificate: Option<Duals>,
    pub flex: Vec<FlexRange>,
    pub x: Vec<f64>,
}

pub fn solve_opf(problem: &OpfProblem, settings: &OpfSettings) -> Result<OpfSolution, OpfError> {
    let result = solve(&problem.program, &settings.solver)?;
    let status = match result.status {
        SolveStatus::Optimal | SolveStatus::AlmostOptimal => OpfStatus::Optimal,
        SolveStatus::PrimalInfeasible => OpfStatus::Infeasible,
        SolveStatus::IterationLimit => OpfStatus::MaxIterations,
        SolveStatus::DualInfeasible => {
            return Err(OpfError::Numerical(
                "solver reported an unbounded objective, impossible for nonnegative weights".into(),
            ))
        }
    };
    let x = result.x;
    let idx = &problem.index;
    let pick = |cols: &[usize]| cols.iter().map(|&c| x[c]).collect::<Vec<f64>>();
    let pick_opt = |cols: &[Option<usize>]| cols.iter().map(|c| c.map_or(0.0, |c| x[c])).collect::<Vec<f64>>();
    let nonempty = |cols: &[Option<usize>]| cols.iter().any(Option::is_some);

    let v = pick(&idx.v);
    let l = pick(&idx.l);
    let p_flow = pick(&idx.p_flow);
    let q_flow = pick(&idx.q_flow);
    let p = pick_opt(&idx.p);
    let q = pick_opt(&idx.q);
    let vdev = nonempty(&idx.vdev).then(|| pick_opt(&idx.vdev));
    let ldev = nonempty(&idx.ldev).then(|| pick_opt(&idx.ldev));
    let relaxation_gaps = problem.program.cones.iter().map(|c| c.gap(&x)).collect();

    let w = &problem.weights;
    let sum = |xs: &Option<Vec<f64>>| xs.as_ref().map_or(0.0, |xs| xs.iter().sum::<f64>());
    let breakdown = ObjectiveBreakdown {
        losses: w.w_l * problem.line_r.iter().zip(&l).map(|(r, l)| r * l).sum::<f64>(),
        voltage: w.w_v * sum(&vdev),
        flow: w.w_lim * sum(&ldev),
        active_scheduling: w.w_p * pick_opt(&idx.tp).iter().sum::<f64>(),
        reactive_scheduling: w.w_q * pick_opt(&idx.tq).iter().sum::<f64>(),
    };
    let abs = residuals(&problem.program, &x, &result.duals);
    let solution = OpfSolution {
        status,
        iterations: result.iterations,
        objective: problem.program.objective_value(&x),
        breakdown,
        v,
        l,
        p_flow,
        q_flow,
        p,
        q,
        vdev,
        ldev,
        relaxation_gaps,
        residuals: abs,
        certificate: (status == OpfStatus::Infeasible).then_some(result.duals),
        flex: problem.flex.clone(),
        x,
    };
    if status == OpfStatus::Optimal {
        check_feasibility(problem, &solution, &settings.tolerances)?;
    }
    Ok(solution)
}

fn check_feasibility(problem: &OpfProblem, s: &OpfSolution, tol: &OpfTolerances) -> Result<(), OpfError> {
    let prog = &problem.program;
    let eq = prog
        .eq_matrix
        .mul_vec(&s.x)
        .iter()
        .zip(&prog.eq_rhs)
        .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
    let ineq = prog
        .ineq_matrix
        .mul_vec(&s.x)
        .iter()
        .zip(&prog.ineq_rhs)
        .fold(0.0_f64, |m, (g, h)| m.max(g - h));
    let cone = prog.cones.iter().fold(0.0_f64, |m, c| m.max(c.violation(&s.x)));
    if eq > tol.equality || ineq > tol.equality || cone > tol.cone {
        return Err(OpfError::Numerical(format!(
            "optimum violates tolerances: equality {eq:.3e}, inequality {ineq:.3e}, cone {cone:.3e}"
        )));
    }
    Ok(())
}

/// Per-line verdict of the cone relaxation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tightness {
    pub loose_lines: Vec<usize>,
    pub max_gap: f64,
    pub tight: bool,
}

pub fn check_relaxation_tightness(solution: &OpfSolution, tol: f64) -> Result<Tightness, OpfError> {
    if solution.status != OpfStatus::Optimal {
        return Err(OpfError::NotOptimal(solution.status));
    }
    let loose_lines: Vec<usize> = (0..solution.relaxation_gaps.len())
        .filter(|&k| solution.relaxation_gaps[k] > tol)
        .collect();
    Ok(Tightness {
        max_gap: solution.relaxation_gaps.iter().copied().fold(0.0, f64::max),
        tight: loose_lines.is_empty(),
        loose_lines,
    })
}

/// Dispatch per node in the load sign convention. Values within [`SETPOINT_SNAP`] of a bound or
/// of zero, the kink of the scheduling cost, are snapped onto it.
pub fn extract_setpoints(solution: &OpfSolution) -> Result<Vec<NodePower>, OpfError> {
    if solution.status != OpfStatus::Optimal {
        return Err(OpfError::NotOptimal(solution.status));
    }
    let snap = |x: f64, lo: f64, hi: f64| {
        [lo, 0.0, hi]
            .into_iter()
            .find(|target| (x - target).abs() <= SETPOINT_SNAP)
            .unwrap_or(x)
    };
    Ok(solution
        .flex
        .iter()
        .enumerate()
        .map(|(i, r)| NodePower::new(snap(solution.p[i], r.p_min, r.p_max), snap(solution.q[i], r.q_min, r.q_max)))
        .collect())
}

/// Largest gap between each penalty variable and its piecewise definition at the solution's
/// own `v` and `l`. `None` when no penalty variables are present.
pub fn epigraph_error(problem: &OpfProblem, solution: &OpfSolution) -> Option<f64> {
    let (v_min, v_max) = problem.v_limits;
    let mut worst: Option<f64> = None;
    let mut track = |e: f64| worst = Some(worst.map_or(e, |w: f64| w.max(e)));
    if let Some(vdev) = &solution.vdev {
        for (i, col) in problem.index.vdev.iter().enumerate() {
            if col.is_some() {
                track((vdev[i] - voltage_deviation(solution.v[i], v_min, v_max)).abs());
            }
        }
    }
    if let Some(ldev) = &solution.ldev {
        for (k, &l_max) in problem.l_limits.iter().enumerate() {
            track((ldev[k] - flow_deviation(solution.l[k], l_max)).abs());
        }
    }
    worst
}
