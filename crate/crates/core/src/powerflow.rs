//! Backward/forward sweep on the branch-flow equations of a radial network.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{NetworkModel, RadialNetwork};

pub const SWEEP_TOLERANCE: f64 = 1e-8;
pub const SWEEP_MAX_ITERATIONS: usize = 100;

/// Net complex power drawn at a node, per-unit. Consumption is positive, so an injection
/// (generation, curtailment, discharge) is negative.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct NodePower {
    pub p: f64,
    pub q: f64,
}

impl NodePower {
    pub const ZERO: NodePower = NodePower { p: 0.0, q: 0.0 };

    pub fn new(p: f64, q: f64) -> Self {
        Self { p, q }
    }
}

impl std::ops::Add for NodePower {
    type Output = NodePower;

    fn add(self, o: NodePower) -> NodePower {
        NodePower::new(self.p + o.p, self.q + o.q)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PowerFlowError {
    #[error("expected {expected} nodal injections, got {found}")]
    InjectionCount { expected: usize, found: usize },
    #[error("node {0}: injection is not finite")]
    NonFinite(String),
    #[error("sweep did not converge in {iterations} iterations (last voltage change {residual:.3e} pu^2)")]
    NonConvergence { iterations: usize, residual: f64 },
    #[error("voltage collapse at node {node} in iteration {iteration}")]
    VoltageCollapse { node: String, iteration: usize },
    #[error("power flow result is not converged")]
    Unconverged,
}

/// Realized operating point. Vectors are indexed like [`NetworkModel::nodes`] and
/// [`NetworkModel::lines`]; flows are measured at the sending (parent) end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowResult {
    pub v_pu2: Vec<f64>,
    pub flows: Vec<(f64, f64)>,
    pub l_pu2: Vec<f64>,
    pub losses_pu: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Power delivered by the slack, per-unit.
    pub slack_injection: (f64, f64),
}

pub fn total_losses(network: &NetworkModel, l_pu2: &[f64]) -> f64 {
    network.lines().iter().zip(l_pu2).map(|(line, l)| line.r_pu * l).sum()
}

/// Solves the radial power flow for the given nodal loads plus optional flexibility
/// set-points (same sign convention, added to the loads). Slack entries are ignored.
pub fn solve_sweep(
    network: &RadialNetwork,
    loads: &[NodePower],
    setpoints: Option<&[NodePower]>,
) -> Result<PowerFlowResult, PowerFlowError> {
    let n = network.nodes().len();
    for given in std::iter::once(loads.len()).chain(setpoints.map(<[_]>::len)) {
        if given != n {
            return Err(PowerFlowError::InjectionCount {
                expected: n,
                found: given,
            });
        }
    }
    let demand: Vec<NodePower> = (0..n)
        .map(|i| match setpoints {
            Some(s) => loads[i] + s[i],
            None => loads[i],
        })
        .collect();
    for (i, d) in demand.iter().enumerate() {
        if !(d.p.is_finite() && d.q.is_finite()) {
            return Err(PowerFlowError::NonFinite(network.nodes()[i].id.clone()));
        }
    }

    let topo = network.topology();
    let lines = network.lines();
    let v_slack = network.limits().v_slack_pu2;
    let mut v = vec![v_slack; n];
    let mut l = vec![0.0; lines.len()];
    let mut flows = vec![(0.0, 0.0); lines.len()];
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < SWEEP_MAX_ITERATIONS {
        iterations += 1;
        // Backward: receiving-end balance plus the series losses of the line itself.
        for &j in topo.order.iter().rev() {
            let Some(k) = topo.parent_line[j] else { continue };
            let (mut p, mut q) = (demand[j].p, demand[j].q);
            for &c in &topo.children[j] {
                let (pc, qc) = flows[topo.parent_line[c].unwrap()];
                p += pc;
                q += qc;
            }
            p += lines[k].r_pu * l[k];
            q += lines[k].x_pu * l[k];
            flows[k] = (p, q);
            l[k] = (p * p + q * q) / v[topo.line_parent[k]];
        }
        // Forward: voltage drop along every line.
        residual = 0.0;
        for &j in &topo.order {
            let Some(k) = topo.parent_line[j] else { continue };
            let line = &lines[k];
            let (p, q) = flows[k];
            let vj = v[topo.line_parent[k]] - 2.0 * (line.r_pu * p + line.x_pu * q)
                + (line.r_pu * line.r_pu + line.x_pu * line.x_pu) * l[k];
            if !(vj > 0.0) {
                return Err(PowerFlowError::VoltageCollapse {
                    node: network.nodes()[j].id.clone(),
                    iteration: iterations,
                });
            }
            residual = f64::max(residual, (vj - v[j]).abs());
            v[j] = vj;
        }
        if residual < SWEEP_TOLERANCE {
            break;
        }
    }
    if !(residual < SWEEP_TOLERANCE) {
        return Err(PowerFlowError::NonConvergence { iterations, residual });
    }
    // Close the current relation on the final voltages.
    for (k, (p, q)) in flows.iter().enumerate() {
        l[k] = (p * p + q * q) / v[topo.line_parent[k]];
    }
    let slack_injection = topo.children[topo.slack].iter().fold((0.0, 0.0), |acc, &c| {
        let (p, q) = flows[topo.parent_line[c].unwrap()];
        (acc.0 + p, acc.1 + q)
    });
    Ok(PowerFlowResult {
        v_pu2: v,
        losses_pu: total_losses(network, &l),
        flows,
        l_pu2: l,
        converged: true,
        iterations,
        slack_injection,
    })
}

/// Currency conversion of the realized operating point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriceSet {
    /// Currency per kWh of losses.
    pub loss_price: f64,
    /// Currency per pu^2 * h of voltage deviation.
    pub v_violation_price: f64,
    /// Currency per pu^2 * h of squared-current deviation.
    pub flow_violation_price: f64,
}

impl PriceSet {
    pub fn is_valid(&self) -> bool {
        [self.loss_price, self.v_violation_price, self.flow_violation_price]
            .iter()
            .all(|p| *p >= 0.0 && p.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RealizedCosts {
    pub losses_kwh: f64,
    pub loss_cost: f64,
    pub violation_cost: f64,
    /// Sum of voltage deviations over nodes, pu^2.
    pub voltage_deviation_pu2: f64,
    /// Sum of squared-current deviations over lines, pu^2.
    pub flow_deviation_pu2: f64,
}

/// `max(0, v - v_max, v_min - v)`.
pub fn voltage_deviation(v: f64, v_min: f64, v_max: f64) -> f64 {
    0.0_f64.max(v - v_max).max(v_min - v)
}

/// `max(0, l - l_max)`.
pub fn flow_deviation(l: f64, l_max: f64) -> f64 {
    0.0_f64.max(l - l_max)
}

pub fn realized_costs(
    result: &PowerFlowResult,
    network: &NetworkModel,
    prices: &PriceSet,
    dt_hours: f64,
) -> Result<RealizedCosts, PowerFlowError> {
    if !result.converged {
        return Err(PowerFlowError::Unconverged);
    }
    let limits = network.limits();
    let voltage_deviation_pu2: f64 = result
        .v_pu2
        .iter()
        .map(|&v| voltage_deviation(v, limits.v_min_pu2, limits.v_max_pu2))
        .sum();
    let flow_deviation_pu2: f64 = result
        .l_pu2
        .iter()
        .zip(network.lines())
        .map(|(&l, line)| flow_deviation(l, line.i_max_pu))
        .sum();
    let losses_kwh = network.pu_to_kw(result.losses_pu) * dt_hours;
    Ok(RealizedCosts {
        losses_kwh,
        loss_cost: prices.loss_price * losses_kwh,
        violation_cost: (prices.v_violation_price * voltage_deviation_pu2
            + prices.flow_violation_price * flow_deviation_pu2)
            * dt_hours,
        voltage_deviation_pu2,
        flow_deviation_pu2,
    })
}
