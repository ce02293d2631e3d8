//! Cost of dispatching flexibility.

use serde::{Deserialize, Serialize};

/// Shape of the per-node scheduling cost `c(p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchedulingCost {
    /// `|p|`: any deviation from the baseline is paid.
    #[default]
    Absolute,
    /// `max(0, -p)`: only supplied flexibility (reduced consumption or injection) is paid.
    PositivePart,
}

impl SchedulingCost {
    pub fn eval(self, p: f64) -> f64 {
        match self {
            SchedulingCost::Absolute => p.abs(),
            SchedulingCost::PositivePart => (-p).max(0.0),
        }
    }

    /// Two rows `a_p p + a_t t <= 0` whose intersection is `t >= c(p)`. The second row of
    /// the positive-part shape does not involve `p`.
    pub(crate) fn epigraph(self) -> [(f64, f64); 2] {
        match self {
            SchedulingCost::Absolute => [(1.0, -1.0), (-1.0, -1.0)],
            SchedulingCost::PositivePart => [(-1.0, -1.0), (0.0, -1.0)],
        }
    }
}

/// Total active and reactive scheduling cost `(sum c(p_i), sum c(q_i))`.
pub fn scheduling_cost(p: &[f64], q: &[f64], shape: SchedulingCost) -> (f64, f64) {
    let total = |xs: &[f64]| xs.iter().map(|&x| shape.eval(x)).sum();
    (total(p), total(q))
}
