//! Seeded stand-in for a proprietary MV network: a 20 kV radial grid with daily transformer
//! load profiles.

use chrono::{Duration, NaiveDate, NaiveDateTime};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::network::{LineSegment, NetworkModel, Node, OperatingLimits};
use crate::timeseries::{MeasurementSeries, PowerSeries, STEP_MINUTES};

use super::HarnessError;

pub const S_BASE_MVA: f64 = 10.0;
pub const V_BASE_KV: f64 = 20.0;
pub const STEPS_PER_DAY: usize = 144;

/// Transformer nameplate ratings drawn for each node, kVA.
pub const RATINGS_KVA: [f64; 4] = [250.0, 400.0, 630.0, 1000.0];

/// Cable type: resistance and reactance in ohm/km, rated current in A.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cable {
    pub name: &'static str,
    pub r_ohm_km: f64,
    pub x_ohm_km: f64,
    pub ampacity_a: f64,
}

/// Catalogue from heaviest to lightest. Rated currents include burial derating.
pub const CABLES: [Cable; 3] = [
    Cable {
        name: "Al 240 mm2",
        r_ohm_km: 0.125,
        x_ohm_km: 0.105,
        ampacity_a: 240.0,
    },
    Cable {
        name: "Al 150 mm2",
        r_ohm_km: 0.206,
        x_ohm_km: 0.112,
        ampacity_a: 180.0,
    },
    Cable {
        name: "Al 95 mm2",
        r_ohm_km: 0.320,
        x_ohm_km: 0.119,
        ampacity_a: 140.0,
    },
];

/// Line lengths, km.
const LENGTH_KM: (f64, f64) = (0.4, 1.6);
/// Peak apparent load as a fraction of transformer rating.
const UTILIZATION: (f64, f64) = (0.25, 0.85);
const POWER_FACTOR: (f64, f64) = (0.92, 0.98);
/// Probability that a new node extends the previous one instead of branching.
const CHAIN_PROBABILITY: f64 = 0.65;
const RESIDENTIAL_SHARE: f64 = 0.6;

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCase {
    pub network: NetworkModel,
    /// One series per transformer node, sorted by node id.
    pub measurements: Vec<MeasurementSeries>,
}

fn gauss(h: f64, center: f64, width: f64) -> f64 {
    // Wrap around midnight.
    let d = (h - center + 12.0).rem_euclid(24.0) - 12.0;
    (-0.5 * (d / width).powi(2)).exp()
}

/// Normalized daily shapes with maximum near 1.
fn residential(h: f64) -> f64 {
    0.35 + 0.35 * gauss(h, 7.5, 1.2) + 0.65 * gauss(h, 19.0, 2.0)
}

fn commercial(h: f64) -> f64 {
    let day = 1.0 / (1.0 + (-(h - 7.5) * 2.0).exp()) - 1.0 / (1.0 + (-(h - 18.0) * 2.0).exp());
    0.3 + 0.6 * day + 0.15 * gauss(h, 12.5, 1.0)
}

pub fn start_of_day() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2021, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
}

/// Builds a radial network of `node_count` nodes (slack included) split into `feeder_count`
/// feeders, plus one day of 10-minute measurements per transformer.
pub fn generate_synthetic_network(
    node_count: usize,
    feeder_count: usize,
    seed: u64,
) -> Result<SyntheticCase, HarnessError> {
    if node_count < 3 {
        return Err(HarnessError::InvalidSize(format!("need at least 3 nodes, got {node_count}")));
    }
    if feeder_count < 1 {
        return Err(HarnessError::InvalidSize("need at least one feeder".into()));
    }
    if feeder_count > node_count - 1 {
        return Err(HarnessError::InvalidSize(format!(
            "{feeder_count} feeders need at least {} nodes, got {node_count}",
            feeder_count + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let width = (node_count - 1).to_string().len().max(2);
    let id = |k: usize| format!("N{k:0width$}");

    // Parents: feeders take contiguous id ranges, the first node of each hangs off the slack.
    let per_feeder = (node_count - 1) / feeder_count;
    let extra = (node_count - 1) % feeder_count;
    let mut parent = vec![0usize; node_count];
    let mut next = 1;
    for f in 0..feeder_count {
        let size = per_feeder + usize::from(f < extra);
        let first = next;
        parent[first] = 0;
        for k in first + 1..first + size {
            parent[k] = if rng.gen_bool(CHAIN_PROBABILITY) {
                k - 1
            } else {
                rng.gen_range(first..k)
            };
        }
        next += size;
    }
    let mut downstream = vec![0usize; node_count];
    for k in (1..node_count).rev() {
        downstream[parent[k]] += downstream[k] + 1;
    }

    let z_base = V_BASE_KV * V_BASE_KV / S_BASE_MVA;
    let i_base = S_BASE_MVA * 1e6 / (3f64.sqrt() * V_BASE_KV * 1e3);
    let mut nodes = vec![Node::slack(id(0))];
    let mut lines = Vec::with_capacity(node_count - 1);
    for k in 1..node_count {
        let rating = *RATINGS_KVA.choose(&mut rng).unwrap();
        nodes.push(Node::transformer(id(k), rating));
        let cable = match downstream[k] {
            d if d >= 5 => CABLES[0],
            d if d >= 2 => CABLES[1],
            _ => CABLES[2],
        };
        let km = rng.gen_range(LENGTH_KM.0..LENGTH_KM.1);
        lines.push(LineSegment::new(
            id(parent[k]),
            id(k),
            cable.r_ohm_km * km / z_base,
            cable.x_ohm_km * km / z_base,
            (cable.ampacity_a / i_base).powi(2),
        ));
    }
    let limits = OperatingLimits {
        v_min_pu2: 0.95 * 0.95,
        v_max_pu2: 1.05 * 1.05,
        v_slack_pu2: 1.02 * 1.02,
    };
    let network = NetworkModel::new(nodes, lines, limits, S_BASE_MVA, V_BASE_KV)?;

    let t0 = start_of_day();
    let timestamps: Vec<NaiveDateTime> = (0..STEPS_PER_DAY as i64)
        .map(|k| t0 + Duration::minutes(STEP_MINUTES * k))
        .collect();
    let mut measurements = Vec::with_capacity(node_count - 1);
    for node in network.nodes().iter().filter(|n| n.rating_kva.is_some()) {
        let rating = node.rating_kva.unwrap();
        let shape: fn(f64) -> f64 = if rng.gen_bool(RESIDENTIAL_SHARE) {
            residential
        } else {
            commercial
        };
        let peak_kva = rating * rng.gen_range(UTILIZATION.0..UTILIZATION.1);
        let pf = rng.gen_range(POWER_FACTOR.0..POWER_FACTOR.1);
        let shift = rng.gen_range(-0.75..0.75);
        let tan_phi = (1.0 - pf * pf).sqrt() / pf;
        let mut noise = 0.0;
        let (mut p_kw, mut q_kvar) = (Vec::new(), Vec::new());
        for k in 0..STEPS_PER_DAY {
            let h = k as f64 * STEP_MINUTES as f64 / 60.0;
            noise = 0.8 * noise + rng.gen_range(-0.03..0.03);
            let p = peak_kva * pf * shape(h - shift) * (1.0 + noise);
            p_kw.push(p);
            q_kvar.push(p * tan_phi);
        }
        measurements.push(PowerSeries {
            id: node.id.clone(),
            timestamps: timestamps.clone(),
            p_kw,
            q_kvar,
        });
    }
    Ok(SyntheticCase { network, measurements })
}
