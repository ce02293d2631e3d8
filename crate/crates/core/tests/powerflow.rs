mod common;

use gridflex_core::{solve_sweep, NodePower};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{random_loads, random_tree, two_bus};

/// Squared current of a single line fed at `v0 = 1` and drawing `p + jq` at the far end:
/// the smaller root of `(r^2 + x^2) l^2 + (2pr + 2qx - 1) l + p^2 + q^2 = 0`.
fn two_bus_current(r: f64, x: f64, p: f64, q: f64) -> f64 {
    let a = r * r + x * x;
    let b = 2.0 * p * r + 2.0 * q * x - 1.0;
    let c = p * p + q * q;
    // Stable form of (-b - sqrt(b^2 - 4ac)) / 2a.
    2.0 * c / (-b + (b * b - 4.0 * a * c).sqrt())
}

fn check_two_bus(load: NodePower, setpoint: Option<NodePower>) -> (f64, f64) {
    let (r, x) = (0.1, 0.1);
    let net = two_bus(r, x);
    let loads = [NodePower::ZERO, load];
    let set = setpoint.map(|s| [NodePower::ZERO, s]);
    let res = solve_sweep(&net, &loads, set.as_ref().map(|s| &s[..])).unwrap();
    let total = load + setpoint.unwrap_or(NodePower::ZERO);
    let l = two_bus_current(r, x, total.p, total.q);
    let p_send = total.p + r * l;
    let q_send = total.q + x * l;
    let v2 = 1.0 - 2.0 * (r * p_send + x * q_send) + (r * r + x * x) * l;
    assert!(res.converged);
    assert!((res.l_pu2[0] - l).abs() < 1e-8, "l {} vs {l}", res.l_pu2[0]);
    assert!((res.v_pu2[1] - v2).abs() < 1e-8, "v {} vs {v2}", res.v_pu2[1]);
    assert!((res.flows[0].0 - p_send).abs() < 1e-8);
    assert!((res.flows[0].1 - q_send).abs() < 1e-8);
    assert!((res.losses_pu - r * l).abs() < 1e-8);
    (res.flows[0].0, res.v_pu2[1])
}

#[test]
fn two_bus_matches_closed_form() {
    let (p, v2) = check_two_bus(NodePower::new(0.1, 0.0), None);
    assert!(p > 0.1 && v2 < 1.0);
}

#[test]
fn two_bus_injection_reverses_flow() {
    let (p, v2) = check_two_bus(NodePower::ZERO, Some(NodePower::new(-0.1, 0.0)));
    assert!(p < 0.0, "flow {p} should point towards the slack");
    assert!(v2 > 1.0, "voltage {v2} should rise above the slack");
}

#[test]
fn two_bus_with_reactive_load() {
    check_two_bus(NodePower::new(0.2, 0.05), Some(NodePower::new(-0.05, 0.02)));
}

#[test]
fn consumption_only_lowers_voltages() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..20 {
        let n = rng.gen_range(3..=35);
        let net = random_tree(&mut rng, n, None);
        let loads = random_loads(&mut rng, &net, 0.05);
        let res = solve_sweep(&net, &loads, None).unwrap();
        let v_slack = net.limits().v_slack_pu2;
        for i in net.transformer_nodes() {
            assert!(res.v_pu2[i] < v_slack, "node {i}: {} >= {v_slack}", res.v_pu2[i]);
        }
    }
}

#[test]
fn losses_scale_quadratically_at_low_loading() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let n = rng.gen_range(3..=35);
        let net = random_tree(&mut rng, n, None);
        let loads = random_loads(&mut rng, &net, 0.005);
        let doubled: Vec<NodePower> = loads.iter().map(|l| NodePower::new(2.0 * l.p, 2.0 * l.q)).collect();
        let base = solve_sweep(&net, &loads, None).unwrap().losses_pu;
        let twice = solve_sweep(&net, &doubled, None).unwrap().losses_pu;
        assert!(base > 0.0);
        let ratio = twice / base;
        assert!(ratio > 3.9 && ratio < 4.3, "ratio {ratio}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn current_matches_flow_and_voltage(seed in any::<u64>(), n in 2usize..=35, scale in 0.001f64..0.08) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_tree(&mut rng, n, None);
        let loads = random_loads(&mut rng, &net, scale);
        let res = solve_sweep(&net, &loads, None).unwrap();
        prop_assert!(res.converged);
        prop_assert!(res.losses_pu >= 0.0);
        let topo = net.topology();
        for k in 0..net.lines().len() {
            let from = topo.line_parent[k];
            let (p, q) = res.flows[k];
            prop_assert!((res.l_pu2[k] * res.v_pu2[from] - p * p - q * q).abs() < 1e-8);
        }
    }
}
