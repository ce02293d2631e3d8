use serde::{Deserialize, Serialize};

use crate::opf::ObjectiveBreakdown;
use crate::powerflow::PowerFlowResult;

use super::{CaseConfig, CaseId, HarnessError, ScenarioId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub case_id: CaseId,
    pub scenario_id: ScenarioId,
    pub config: CaseConfig,
    pub network_fingerprint: String,
    pub node_ids: Vec<String>,
    pub line_ids: Vec<String>,
    pub step_hours: f64,
    pub choices: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DispatchSummary {
    pub supplied_kw: f64,
    pub absorbed_kw: f64,
    pub reactive_kvar: f64,
    pub active_nodes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpfStepStats {
    pub iterations: usize,
    pub objective: f64,
    pub breakdown: ObjectiveBreakdown,
    pub tight: bool,
    pub max_relaxation_gap: f64,
    pub loose_lines: Vec<String>,
    /// Largest distance of a penalty variable from its piecewise definition.
    pub epigraph_error: Option<f64>,
    /// Largest `v`/`l` difference between the OPF and a power flow on the OPF's own
    /// injections; `None` if that power flow failed.
    pub sweep_consistency: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    pub timestamp: String,
    pub losses_kwh: f64,
    pub loss_cost: f64,
    pub violation_cost: f64,
    pub total_cost: f64,
    pub voltage_deviation_pu2: f64,
    pub flow_deviation_pu2: f64,
    pub dispatch: DispatchSummary,
    pub opf: Option<OpfStepStats>,
    pub power_flow: PowerFlowResult,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Totals {
    pub losses_kwh: f64,
    pub loss_cost: f64,
    pub violation_cost: f64,
    pub total_cost: f64,
    pub supplied_kwh: f64,
    pub absorbed_kwh: f64,
    pub loose_steps: usize,
}

/// Percentage decreases relative to a reference, `100 (ref - this) / ref`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Deltas {
    pub losses_pct: Option<f64>,
    pub violation_cost_pct: Option<f64>,
    pub total_cost_pct: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub header: ReportHeader,
    pub totals: Totals,
    /// Relative to Case 0 of the same scenario, when known.
    pub deltas: Option<Deltas>,
    pub steps: Vec<StepRecord>,
}

/// `100 (reference - value) / reference`; zero when both are zero, `None` when only the
/// reference is.
pub fn percent_decrease(reference: f64, value: f64) -> Option<f64> {
    if reference != 0.0 {
        Some(100.0 * (reference - value) / reference)
    } else if value == 0.0 {
        Some(0.0)
    } else {
        None
    }
}

impl Totals {
    fn deltas_from(&self, reference: &Totals) -> Deltas {
        Deltas {
            losses_pct: percent_decrease(reference.losses_kwh, self.losses_kwh),
            violation_cost_pct: percent_decrease(reference.violation_cost, self.violation_cost),
            total_cost_pct: percent_decrease(reference.total_cost, self.total_cost),
        }
    }
}

impl CaseReport {
    pub fn new(header: ReportHeader, steps: Vec<StepRecord>) -> Self {
        let mut totals = Totals::default();
        for s in &steps {
            totals.losses_kwh += s.losses_kwh;
            totals.loss_cost += s.loss_cost;
            totals.violation_cost += s.violation_cost;
            totals.total_cost += s.total_cost;
            totals.supplied_kwh += s.dispatch.supplied_kw * header.step_hours;
            totals.absorbed_kwh += s.dispatch.absorbed_kw * header.step_hours;
            totals.loose_steps += usize::from(s.opf.as_ref().is_some_and(|o| !o.tight));
        }
        Self {
            header,
            totals,
            deltas: None,
            steps,
        }
    }

    /// Fills [`CaseReport::deltas`] against a reference report of the same scenario.
    pub fn set_reference(&mut self, reference: &CaseReport) -> Result<(), HarnessError> {
        check_compatible(reference, self)?;
        self.deltas = Some(self.totals.deltas_from(&reference.totals));
        Ok(())
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("report serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Mismatch(format!("unreadable report: {e}")))
    }

    /// Plot-ready per-step table.
    pub fn time_series_csv(&self) -> String {
        let mut out = String::from(
            "timestamp,case,scenario,losses_kwh,violation_cost,voltage_deviation_pu2,flow_deviation_pu2,supplied_kw,absorbed_kw\n",
        );
        let (c, s) = (self.header.case_id as u8, self.header.scenario_id as u8);
        for r in &self.steps {
            out.push_str(&format!(
                "{},{c},{s},{},{},{},{},{},{}\n",
                r.timestamp,
                r.losses_kwh,
                r.violation_cost,
                r.voltage_deviation_pu2,
                r.flow_deviation_pu2,
                r.dispatch.supplied_kw,
                r.dispatch.absorbed_kw
            ));
        }
        out
    }
}

fn check_compatible(a: &CaseReport, b: &CaseReport) -> Result<(), HarnessError> {
    if a.header.scenario_id != b.header.scenario_id {
        return Err(HarnessError::Mismatch(format!(
            "{} report mixed with {} report",
            a.header.scenario_id, b.header.scenario_id
        )));
    }
    if a.header.network_fingerprint != b.header.network_fingerprint {
        return Err(HarnessError::Mismatch("reports were produced on different networks".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub case_id: CaseId,
    pub losses_kwh: f64,
    pub violation_cost: f64,
    pub total_cost: f64,
    pub deltas: Deltas,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub scenario_id: ScenarioId,
    pub rows: Vec<ComparisonRow>,
    /// Orderings that do not hold, e.g. a market case costing more than no market.
    pub flags: Vec<String>,
}

/// `a <= b` up to a relative tolerance of 1e-9.
fn not_above(a: f64, b: f64) -> bool {
    a <= b + 1e-9 * b.abs().max(1.0)
}

/// Tabulates 24 h totals and decreases relative to Case 0 of the same scenario.
pub fn compare_cases(reports: &[CaseReport]) -> Result<Comparison, HarnessError> {
    let mut sorted: Vec<&CaseReport> = reports.iter().collect();
    sorted.sort_by_key(|r| r.header.case_id);
    let Some(first) = sorted.first() else {
        return Err(HarnessError::Mismatch("no reports given".into()));
    };
    for pair in sorted.windows(2) {
        check_compatible(pair[0], pair[1])?;
        if pair[0].header.case_id == pair[1].header.case_id {
            return Err(HarnessError::Mismatch(format!("{} appears twice", pair[0].header.case_id)));
        }
    }
    if first.header.case_id != CaseId::NoMarket {
        return Err(HarnessError::Mismatch("case 0 report is required as the reference".into()));
    }
    let reference = first.totals;
    let rows: Vec<ComparisonRow> = sorted
        .iter()
        .map(|r| ComparisonRow {
            case_id: r.header.case_id,
            losses_kwh: r.totals.losses_kwh,
            violation_cost: r.totals.violation_cost,
            total_cost: r.totals.total_cost,
            deltas: r.totals.deltas_from(&reference),
        })
        .collect();

    let mut flags = Vec::new();
    for pair in rows.windows(2) {
        let (lo, hi) = (&pair[1], &pair[0]);
        for (what, a, b) in [
            ("losses", lo.losses_kwh, hi.losses_kwh),
            ("violation cost", lo.violation_cost, hi.violation_cost),
            ("total cost", lo.total_cost, hi.total_cost),
        ] {
            if !not_above(a, b) {
                flags.push(format!("{} {what} {a} exceeds {} {what} {b}", lo.case_id, hi.case_id));
            }
        }
    }
    Ok(Comparison {
        scenario_id: first.header.scenario_id,
        rows,
        flags,
    })
}

fn pct(x: Option<f64>) -> String {
    x.map_or_else(|| "n/a".to_string(), |v| format!("{v:.1}%"))
}

impl Comparison {
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}\n{:<8} {:>14} {:>10} {:>16} {:>10} {:>14} {:>10}\n",
            self.scenario_id, "case", "losses_kwh", "decrease", "violation_cost", "decrease", "total_cost", "decrease"
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{:<8} {:>14.3} {:>10} {:>16.3} {:>10} {:>14.3} {:>10}\n",
                r.case_id as u8,
                r.losses_kwh,
                pct(r.deltas.losses_pct),
                r.violation_cost,
                pct(r.deltas.violation_cost_pct),
                r.total_cost,
                pct(r.deltas.total_cost_pct)
            ));
        }
        for f in &self.flags {
            out.push_str(&format!("flag: {f}\n"));
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "scenario,case,losses_kwh,losses_decrease_pct,violation_cost,violation_decrease_pct,total_cost,total_decrease_pct\n",
        );
        let opt = |x: Option<f64>| x.map_or_else(String::new, |v| v.to_string());
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{}\n",
                self.scenario_id as u8,
                r.case_id as u8,
                r.losses_kwh,
                opt(r.deltas.losses_pct),
                r.violation_cost,
                opt(r.deltas.violation_cost_pct),
                r.total_cost,
                opt(r.deltas.total_cost_pct)
            ));
        }
        out
    }
}
