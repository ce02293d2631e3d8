use rayon::prelude::*;

use crate::network::RadialNetwork;
use crate::opf::{
    build_problem, check_relaxation_tightness, epigraph_error, extract_setpoints, solve_opf, OpfError, OpfStatus,
    SchedulingCost,
};
use crate::powerflow::{realized_costs, solve_sweep, NodePower, PowerFlowResult};
use crate::timeseries::{
    allocate_by_rating, apply_scenario_load, check_alignment, format_timestamp, FeederHeadSeries, MeasurementSeries,
    PowerSeries,
};

use super::report::{CaseReport, DispatchSummary, OpfStepStats, ReportHeader, StepRecord};
use super::{CaseConfig, CaseId, HarnessError, StepFailure, STEP_HOURS};

/// Data a case runs on. Series are in kW/kvar, consumption positive.
#[derive(Debug, Clone, Copy)]
pub struct CaseInputs<'a> {
    pub network: &'a RadialNetwork,
    /// One series per transformer node.
    pub true_series: &'a [MeasurementSeries],
    /// One series per feeder, labeled like [`RadialNetwork::feeder_partition`].
    pub head_series: &'a [FeederHeadSeries],
    /// Extra entries for the report's choice log.
    pub choices: &'a [String],
}

/// Per-unit loads per node index for every step.
fn node_loads(network: &RadialNetwork, series: &[PowerSeries]) -> Result<Vec<Vec<NodePower>>, HarnessError> {
    let n = network.nodes().len();
    let mut by_node: Vec<Option<&PowerSeries>> = vec![None; n];
    for s in series {
        match network.node_index(&s.id) {
            Some(i) if i != network.slack() => by_node[i] = Some(s),
            _ => return Err(HarnessError::UnknownSeries(s.id.clone())),
        }
    }
    for i in network.transformer_nodes() {
        if by_node[i].is_none() {
            return Err(HarnessError::MissingSeries(network.nodes()[i].id.clone()));
        }
    }
    let steps = series.first().map_or(0, PowerSeries::len);
    Ok((0..steps)
        .map(|t| {
            by_node
                .iter()
                .map(|s| match s {
                    Some(s) => NodePower::new(network.kw_to_pu(s.p_kw[t]), network.kw_to_pu(s.q_kvar[t])),
                    None => NodePower::ZERO,
                })
                .collect()
        })
        .collect())
}

/// Feeder-head measurements synthesized from a power flow on the given loads: the sending-end
/// flow of each slack-to-feeder line, losses included.
pub fn derive_feeder_heads(
    network: &RadialNetwork,
    true_series: &[MeasurementSeries],
) -> Result<Vec<FeederHeadSeries>, HarnessError> {
    check_alignment(true_series)?;
    let loads = node_loads(network, true_series)?;
    let heads = network.feeder_head_lines();
    let mut out: Vec<FeederHeadSeries> = heads
        .keys()
        .map(|label| PowerSeries {
            id: label.clone(),
            timestamps: true_series[0].timestamps.clone(),
            p_kw: Vec::new(),
            q_kvar: Vec::new(),
        })
        .collect();
    for (t, step) in loads.iter().enumerate() {
        let pf = solve_sweep(network, step, None).map_err(|e| HarnessError::Step {
            case: CaseId::NoMarket,
            step: t,
            timestamp: format_timestamp(&true_series[0].timestamps[t]),
            failure: StepFailure::PowerFlow,
            reason: e.to_string(),
        })?;
        for (series, &k) in out.iter_mut().zip(heads.values()) {
            series.p_kw.push(network.pu_to_kw(pf.flows[k].0));
            series.q_kvar.push(network.pu_to_kw(pf.flows[k].1));
        }
    }
    Ok(out)
}

/// Adds the per-node scenario load to feeder heads: each head receives `add_kw` times the
/// number of transformers on its feeder.
pub fn apply_scenario_to_heads(
    network: &RadialNetwork,
    heads: &[FeederHeadSeries],
    add_kw: f64,
    power_factor: f64,
) -> Result<Vec<FeederHeadSeries>, HarnessError> {
    let feeders = network.feeder_partition();
    heads
        .iter()
        .map(|h| {
            let members = feeders
                .members(&h.id)
                .ok_or_else(|| HarnessError::UnknownHead(h.id.clone()))?;
            let mut out = apply_scenario_load(std::slice::from_ref(h), add_kw * members.len() as f64, power_factor)?;
            Ok(out.remove(0))
        })
        .collect()
}

fn allocate(network: &RadialNetwork, heads: &[FeederHeadSeries]) -> Result<Vec<MeasurementSeries>, HarnessError> {
    let feeders = network.feeder_partition();
    for h in heads {
        if feeders.members(&h.id).is_none() {
            return Err(HarnessError::UnknownHead(h.id.clone()));
        }
    }
    let mut out = Vec::new();
    for (label, members) in feeders.feeders() {
        let head = heads
            .iter()
            .find(|h| &h.id == label)
            .ok_or_else(|| HarnessError::MissingHead(label.clone()))?;
        let rated: Vec<(String, f64)> = members
            .iter()
            .map(|&i| {
                let node = &network.nodes()[i];
                (node.id.clone(), node.rating_kva.unwrap())
            })
            .collect();
        out.extend(allocate_by_rating(head, &rated)?);
    }
    Ok(out)
}

fn choice_log(config: &CaseConfig) -> Vec<String> {
    let mut log = vec![
        "set-point sign: positive adds consumption, negative supplies flexibility".to_string(),
        match config.scheduling_cost {
            SchedulingCost::Absolute => "scheduling cost: |p| and |q| per node via linear epigraphs".to_string(),
            SchedulingCost::PositivePart => {
                "scheduling cost: max(0, -p) and max(0, -q) per node via linear epigraphs".to_string()
            }
        },
        "flexibility bounds: fractions of transformer kVA rating from config.flex".to_string(),
        "realization: backward/forward sweep on true loads plus set-points, tolerance 1e-8 pu^2".to_string(),
        "violation pricing: voltage and squared-current deviations priced per pu^2 h".to_string(),
    ];
    if config.case_id == CaseId::MarketAllocated {
        log.push("OPF loads: feeder-head series allocated by transformer kVA rating".to_string());
    }
    if config.scenario_add_kw > 0.0 {
        log.push(format!(
            "scenario load: {} kW per node at power factor {}, feeder heads receive the sum over members",
            config.scenario_add_kw, config.scenario_power_factor
        ));
    }
    log
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| f64::max(m, (x - y).abs()))
}

fn dispatch_summary(network: &RadialNetwork, setpoints: &[NodePower]) -> DispatchSummary {
    let mut d = DispatchSummary::default();
    for s in setpoints {
        d.supplied_kw += network.pu_to_kw((-s.p).max(0.0));
        d.absorbed_kw += network.pu_to_kw(s.p.max(0.0));
        d.reactive_kvar += network.pu_to_kw(s.q.abs());
        if s.p.abs() > 1e-9 || s.q.abs() > 1e-9 {
            d.active_nodes += 1;
        }
    }
    d
}

struct StepContext<'a> {
    config: &'a CaseConfig,
    network: &'a RadialNetwork,
    flex: crate::opf::FlexBounds,
}

type StepOutcome = Result<(PowerFlowResult, Vec<NodePower>, Option<OpfStepStats>), (StepFailure, String)>;

impl StepContext<'_> {
    fn run(&self, truth: &[NodePower], believed: Option<&[NodePower]>) -> StepOutcome {
        let network = self.network;
        let pf_err = |e: crate::powerflow::PowerFlowError| (StepFailure::PowerFlow, e.to_string());
        let Some(believed) = believed else {
            let pf = solve_sweep(network, truth, None).map_err(pf_err)?;
            return Ok((pf, vec![NodePower::ZERO; truth.len()], None));
        };
        let opf_err = |e: OpfError| (StepFailure::Numerical, e.to_string());
        let cfg = self.config;
        let problem = build_problem(network, believed, &cfg.weights, &self.flex, cfg.scheduling_cost).map_err(opf_err)?;
        let solution = solve_opf(&problem, &cfg.opf).map_err(opf_err)?;
        match solution.status {
            OpfStatus::Optimal => {}
            OpfStatus::Infeasible => {
                return Err((StepFailure::Infeasible, "OPF is infeasible".into()));
            }
            OpfStatus::MaxIterations => {
                return Err((
                    StepFailure::MaxIterations,
                    format!("OPF stopped after {} iterations", solution.iterations),
                ));
            }
        }
        let setpoints = extract_setpoints(&solution).map_err(opf_err)?;
        let tightness = check_relaxation_tightness(&solution, cfg.opf.tolerances.tightness).map_err(opf_err)?;
        let realized = solve_sweep(network, truth, Some(&setpoints)).map_err(pf_err)?;
        // Power flow on exactly the injections the OPF planned with.
        let own = if std::ptr::eq(believed, truth) {
            Some(realized.clone())
        } else {
            solve_sweep(network, believed, Some(&setpoints)).ok()
        };
        let sweep_consistency = own.map(|own| max_abs_diff(&own.v_pu2, &solution.v).max(max_abs_diff(&own.l_pu2, &solution.l)));
        let stats = OpfStepStats {
            iterations: solution.iterations,
            objective: solution.objective,
            breakdown: solution.breakdown,
            tight: tightness.tight,
            max_relaxation_gap: tightness.max_gap,
            loose_lines: tightness
                .loose_lines
                .iter()
                .map(|&k| network.lines()[k].label())
                .collect(),
            epigraph_error: epigraph_error(&problem, &solution),
            sweep_consistency,
        };
        Ok((realized, setpoints, Some(stats)))
    }
}

/// Runs one case over every step of the series. Steps execute on `jobs` worker threads; the
/// report is identical for any `jobs`.
pub fn run_case(config: &CaseConfig, inputs: &CaseInputs<'_>, jobs: usize) -> Result<CaseReport, HarnessError> {
    config.validate()?;
    let network = inputs.network;
    let mut all: Vec<PowerSeries> = inputs.true_series.to_vec();
    all.extend_from_slice(inputs.head_series);
    check_alignment(&all)?;

    let (truth, heads) = if config.scenario_add_kw > 0.0 {
        (
            apply_scenario_load(inputs.true_series, config.scenario_add_kw, config.scenario_power_factor)?,
            apply_scenario_to_heads(network, inputs.head_series, config.scenario_add_kw, config.scenario_power_factor)?,
        )
    } else {
        (inputs.true_series.to_vec(), inputs.head_series.to_vec())
    };
    let true_loads = node_loads(network, &truth)?;
    let allocated_loads = match config.case_id {
        CaseId::MarketAllocated => Some(node_loads(network, &allocate(network, &heads)?)?),
        _ => None,
    };
    let timestamps = &inputs.true_series[0].timestamps;

    let ctx = StepContext {
        config,
        network,
        flex: config.flex.bounds(network),
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| HarnessError::Config(format!("cannot start worker threads: {e}")))?;
    let outcomes: Vec<_> = pool.install(|| {
        (0..true_loads.len())
            .into_par_iter()
            .map(|t| {
                let truth = true_loads[t].as_slice();
                let believed = match config.case_id {
                    CaseId::NoMarket => None,
                    CaseId::MarketAllocated => Some(allocated_loads.as_ref().unwrap()[t].as_slice()),
                    CaseId::MarketMonitored => Some(truth),
                };
                ctx.run(truth, believed)
            })
            .collect()
    });

    let mut steps = Vec::with_capacity(outcomes.len());
    for (t, outcome) in outcomes.into_iter().enumerate() {
        let (pf, setpoints, opf) = outcome.map_err(|(failure, reason)| HarnessError::Step {
            case: config.case_id,
            step: t,
            timestamp: format_timestamp(&timestamps[t]),
            failure,
            reason,
        })?;
        let costs = realized_costs(&pf, network, &config.prices, STEP_HOURS).map_err(|e| HarnessError::Step {
            case: config.case_id,
            step: t,
            timestamp: format_timestamp(&timestamps[t]),
            failure: StepFailure::PowerFlow,
            reason: e.to_string(),
        })?;
        steps.push(StepRecord {
            step: t,
            timestamp: format_timestamp(&timestamps[t]),
            losses_kwh: costs.losses_kwh,
            loss_cost: costs.loss_cost,
            violation_cost: costs.violation_cost,
            total_cost: costs.loss_cost + costs.violation_cost,
            voltage_deviation_pu2: costs.voltage_deviation_pu2,
            flow_deviation_pu2: costs.flow_deviation_pu2,
            dispatch: dispatch_summary(network, &setpoints),
            opf,
            power_flow: pf,
        });
    }

    let mut choices = choice_log(config);
    choices.extend(inputs.choices.iter().cloned());
    let header = ReportHeader {
        case_id: config.case_id,
        scenario_id: config.scenario_id,
        config: config.clone(),
        network_fingerprint: network.fingerprint(),
        node_ids: network.nodes().iter().map(|n| n.id.clone()).collect(),
        line_ids: network.lines().iter().map(|l| l.label()).collect(),
        step_hours: STEP_HOURS,
        choices,
    };
    Ok(CaseReport::new(header, steps))
}
