#![allow(dead_code)]

use gridflex_core::{LineSegment, NetworkModel, Node, NodePower, OperatingLimits, RadialNetwork};
use rand::Rng;

pub const LIMITS: OperatingLimits = OperatingLimits {
    v_min_pu2: 0.95 * 0.95,
    v_max_pu2: 1.05 * 1.05,
    v_slack_pu2: 1.0,
};

pub fn id(k: usize) -> String {
    format!("B{k:02}")
}

pub fn network(nodes: Vec<Node>, lines: Vec<LineSegment>, limits: OperatingLimits) -> RadialNetwork {
    NetworkModel::new(nodes, lines, limits, 10.0, 20.0)
        .unwrap()
        .validate_radial()
        .unwrap()
}

pub fn two_bus(r: f64, x: f64) -> RadialNetwork {
    network(
        vec![Node::slack(id(0)), Node::transformer(id(1), 400.0)],
        vec![LineSegment::new(id(0), id(1), r, x, 1.0)],
        OperatingLimits {
            v_min_pu2: 0.81,
            v_max_pu2: 1.21,
            v_slack_pu2: 1.0,
        },
    )
}

/// Random tree with MV-like per-unit impedances; node 0 is the slack.
pub fn random_tree<R: Rng>(rng: &mut R, n: usize, rating_kva: Option<f64>) -> RadialNetwork {
    let mut nodes = vec![Node::slack(id(0))];
    let mut lines = Vec::new();
    for k in 1..n {
        let rating = rating_kva.unwrap_or_else(|| [250.0, 400.0, 630.0][rng.gen_range(0..3)]);
        nodes.push(Node::transformer(id(k), rating));
        let parent = rng.gen_range(0..k);
        lines.push(LineSegment::new(
            id(parent),
            id(k),
            rng.gen_range(0.001..0.01),
            rng.gen_range(0.001..0.006),
            rng.gen_range(0.05..0.5),
        ));
    }
    network(nodes, lines, LIMITS)
}

/// Consumption at every transformer node.
pub fn random_loads<R: Rng>(rng: &mut R, net: &RadialNetwork, p_max: f64) -> Vec<NodePower> {
    (0..net.nodes().len())
        .map(|i| {
            if i == net.slack() {
                NodePower::ZERO
            } else {
                let p = rng.gen_range(0.0..p_max);
                NodePower::new(p, p * rng.gen_range(0.0..0.4))
            }
        })
        .collect()
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
