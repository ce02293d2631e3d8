mod common;

use std::path::PathBuf;

use gridflex_core::opf::{
    build_problem, check_relaxation_tightness, epigraph_error, extract_setpoints, replay_dump, solve_opf, CostWeights,
    FlexBounds, FlexRange, OpfSettings, OpfStatus, SchedulingCost,
};
use gridflex_core::{solve_sweep, LineSegment, NetworkModel, Node, NodePower, RadialNetwork};
use gridflex_solver::solve;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use common::{id, max_abs_diff, network, random_loads, random_tree, two_bus, LIMITS};

const WEIGHTS: CostWeights = CostWeights {
    w_l: 1.0,
    w_v: 10.0,
    w_lim: 10.0,
    w_p: 0.01,
    w_q: 0.01,
};

/// Instance kept for regression when the relaxation comes out loose.
#[derive(Serialize, Deserialize)]
struct LooseFixture {
    network_toml: String,
    loads: Vec<NodePower>,
    flex: FlexBounds,
    weights: CostWeights,
}

fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/loose")
}

fn random_flex<R: Rng>(rng: &mut R, net: &RadialNetwork, loads: &[NodePower]) -> FlexBounds {
    FlexBounds(
        (0..net.nodes().len())
            .map(|i| {
                if i == net.slack() {
                    return FlexRange::ZERO;
                }
                let base = loads[i].p.max(1e-3);
                FlexRange {
                    p_min: -base * rng.gen_range(0.0..1.5),
                    p_max: base * rng.gen_range(0.0..0.5),
                    q_min: -base * rng.gen_range(0.0..0.5),
                    q_max: base * rng.gen_range(0.0..0.5),
                }
            })
            .collect(),
    )
}

/// Largest relaxation gap, archiving the instance when it exceeds the tolerance.
fn tightness_gap(net: &RadialNetwork, loads: &[NodePower], flex: &FlexBounds, weights: &CostWeights, tag: &str) -> f64 {
    let problem = build_problem(net, loads, weights, flex, SchedulingCost::Absolute).unwrap();
    let solution = solve_opf(&problem, &OpfSettings::default()).unwrap();
    let verdict = check_relaxation_tightness(&solution, 1e-6).unwrap();
    if !verdict.tight {
        let fixture = LooseFixture {
            network_toml: net.to_toml(),
            loads: loads.to_vec(),
            flex: flex.clone(),
            weights: *weights,
        };
        std::fs::create_dir_all(fixture_dir()).unwrap();
        std::fs::write(
            fixture_dir().join(format!("{tag}.json")),
            serde_json::to_string_pretty(&fixture).unwrap(),
        )
        .unwrap();
    }
    verdict.max_gap
}

#[test]
fn zero_flex_reproduces_power_flow() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..20 {
        let n = rng.gen_range(3..=35);
        let net = random_tree(&mut rng, n, None);
        let loads = random_loads(&mut rng, &net, 0.05);
        let problem = build_problem(&net, &loads, &WEIGHTS, &FlexBounds::zero(n), SchedulingCost::Absolute).unwrap();
        let sol = solve_opf(&problem, &OpfSettings::default()).unwrap();
        assert_eq!(sol.status, OpfStatus::Optimal);
        let pf = solve_sweep(&net, &loads, None).unwrap();
        assert!(max_abs_diff(&sol.v, &pf.v_pu2) < 1e-5);
        assert!(max_abs_diff(&sol.l, &pf.l_pu2) < 1e-5);
        let p: Vec<f64> = pf.flows.iter().map(|f| f.0).collect();
        let q: Vec<f64> = pf.flows.iter().map(|f| f.1).collect();
        assert!(max_abs_diff(&sol.p_flow, &p) < 1e-5);
        assert!(max_abs_diff(&sol.q_flow, &q) < 1e-5);
        assert!(extract_setpoints(&sol).unwrap().iter().all(|s| *s == NodePower::ZERO));
    }
}

#[test]
fn relaxation_is_tight_on_random_trees() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    for k in 0..20 {
        let n = rng.gen_range(3..=35);
        let net = random_tree(&mut rng, n, None);
        let loads = random_loads(&mut rng, &net, 0.08);
        let flex = random_flex(&mut rng, &net, &loads);
        let gap = tightness_gap(&net, &loads, &flex, &WEIGHTS, &format!("seed23_{k}"));
        assert!(gap < 1e-6, "instance {k}: gap {gap}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn relaxation_is_tight_under_positive_loss_weight(
        seed in any::<u64>(),
        n in 2usize..=30,
        w_l in 0.1f64..10.0,
        w_p in 0.0f64..1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = random_tree(&mut rng, n, None);
        let loads = random_loads(&mut rng, &net, 0.08);
        let flex = random_flex(&mut rng, &net, &loads);
        let weights = CostWeights { w_l, w_p, w_q: w_p, ..WEIGHTS };
        let gap = tightness_gap(&net, &loads, &flex, &weights, &format!("prop_{seed}"));
        prop_assert!(gap < 1e-6, "gap {}", gap);
    }
}

#[test]
fn archived_loose_instances_stay_tight() {
    let Ok(entries) = std::fs::read_dir(fixture_dir()) else {
        return;
    };
    for entry in entries {
        let path = entry.unwrap().path();
        let fixture: LooseFixture = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        let net = NetworkModel::from_toml(&fixture.network_toml)
            .unwrap()
            .validate_radial()
            .unwrap();
        let problem =
            build_problem(&net, &fixture.loads, &fixture.weights, &fixture.flex, SchedulingCost::Absolute).unwrap();
        let sol = solve_opf(&problem, &OpfSettings::default()).unwrap();
        let verdict = check_relaxation_tightness(&sol, 1e-6).unwrap();
        assert!(verdict.tight, "{}: gap {}", path.display(), verdict.max_gap);
    }
}

#[test]
fn penalty_variables_match_their_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let mut seen_violation = false;
    for _ in 0..20 {
        let n = rng.gen_range(3..=35);
        let net = random_tree(&mut rng, n, None);
        // Heavy loading so that limits bind on some instances.
        let loads = random_loads(&mut rng, &net, 0.3);
        let flex = random_flex(&mut rng, &net, &loads);
        let problem = build_problem(&net, &loads, &WEIGHTS, &flex, SchedulingCost::Absolute).unwrap();
        let sol = solve_opf(&problem, &OpfSettings::default()).unwrap();
        let err = epigraph_error(&problem, &sol).unwrap();
        assert!(err < 1e-6, "epigraph error {err}");
        let penalties = sol.vdev.iter().chain(sol.ldev.iter()).flatten();
        seen_violation |= penalties.into_iter().any(|d| *d > 1e-4);
    }
    assert!(seen_violation, "no instance exercised a penalty branch");
}

#[test]
fn dump_replays_to_the_same_program() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let net = random_tree(&mut rng, 12, None);
    let loads = random_loads(&mut rng, &net, 0.05);
    let flex = random_flex(&mut rng, &net, &loads);
    for shape in [SchedulingCost::Absolute, SchedulingCost::PositivePart] {
        let problem = build_problem(&net, &loads, &WEIGHTS, &flex, shape).unwrap();
        let replayed = replay_dump(&problem.dump()).unwrap();
        assert_eq!(replayed, problem.program);
        let settings = OpfSettings::default().solver;
        let a = solve(&problem.program, &settings).unwrap();
        let b = solve(&replayed, &settings).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.objective, b.objective);
    }
}

/// Three-node chain whose far end sags below the band without flexibility.
fn sagging_chain() -> (RadialNetwork, Vec<NodePower>) {
    let net = network(
        vec![
            Node::slack(id(0)),
            Node::transformer(id(1), 1000.0),
            Node::transformer(id(2), 1000.0),
        ],
        vec![
            LineSegment::new(id(0), id(1), 0.05, 0.03, 10.0),
            LineSegment::new(id(1), id(2), 0.05, 0.03, 10.0),
        ],
        LIMITS,
    );
    let loads = vec![NodePower::ZERO, NodePower::new(0.2, 0.05), NodePower::new(0.4, 0.1)];
    (net, loads)
}

#[test]
fn dominant_voltage_weight_removes_deviation() {
    let (net, loads) = sagging_chain();
    let pf = solve_sweep(&net, &loads, None).unwrap();
    assert!(pf.v_pu2[2] < LIMITS.v_min_pu2, "instance must violate without flexibility");
    let flex = FlexBounds(vec![
        FlexRange::ZERO,
        FlexRange::ZERO,
        FlexRange {
            p_min: -0.4,
            p_max: 0.0,
            q_min: -0.1,
            q_max: 0.0,
        },
    ]);
    let weights = CostWeights {
        w_l: 1.0,
        w_v: 1e4,
        w_lim: 1.0,
        w_p: 1.0,
        w_q: 1.0,
    };
    let problem = build_problem(&net, &loads, &weights, &flex, SchedulingCost::Absolute).unwrap();
    let sol = solve_opf(&problem, &OpfSettings::default()).unwrap();
    let vdev = sol.vdev.as_ref().unwrap();
    assert!(vdev.iter().all(|d| *d < 1e-6), "{vdev:?}");
    assert!(sol.p[2] < 0.0);

    // With a cheap voltage penalty the dispatch is no longer worth its price.
    let cheap = CostWeights { w_v: 1e-3, ..weights };
    let problem = build_problem(&net, &loads, &cheap, &flex, SchedulingCost::Absolute).unwrap();
    let sol = solve_opf(&problem, &OpfSettings::default()).unwrap();
    assert!(sol.vdev.unwrap()[2] > 1e-3);
}

#[test]
fn saturated_dispatch_lands_on_the_bound() {
    let net = two_bus(0.1, 0.1);
    let loads = [NodePower::ZERO, NodePower::new(0.1, 0.0)];
    let flex = FlexBounds(vec![
        FlexRange::ZERO,
        FlexRange {
            p_min: -0.05,
            p_max: 0.0,
            q_min: 0.0,
            q_max: 0.0,
        },
    ]);
    let weights = CostWeights {
        w_p: 0.0,
        w_q: 0.0,
        ..WEIGHTS
    };
    let problem = build_problem(&net, &loads, &weights, &flex, SchedulingCost::Absolute).unwrap();
    let sol = solve_opf(&problem, &OpfSettings::default()).unwrap();
    let set = extract_setpoints(&sol).unwrap();
    assert_eq!(set[1].p, -0.05);
    assert_eq!(set[1].q, 0.0);
}
