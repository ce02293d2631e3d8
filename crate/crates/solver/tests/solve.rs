mod support;

use gridflex_solver::{
    residuals, solve, ConicProgram, ProgramBuilder, RotatedCone, SolveStatus, SolverError,
    SolverSettings,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::{random_bounded_lp, to_program, vertex_enumeration, DenseLp};

fn settings() -> SolverSettings {
    SolverSettings::default()
}

#[test]
fn one_variable_lp() {
    let mut b = ProgramBuilder::new(1);
    b.set_cost(0, 1.0);
    b.add_le(vec![(0, -1.0)], -1.0);
    let r = solve(&b.build(), &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.x[0] - 1.0).abs() < 1e-8, "{}", r.x[0]);
}

#[test]
fn three_variable_lp_matches_vertex_enumeration() {
    // Tetrahedron x, y, z >= 0, x + 2y + 3z <= 6 with objective pushing into a corner.
    let lp = DenseLp {
        c: vec![-1.0, -1.0, -2.0],
        g: vec![
            vec![-1.0, 0.0, 0.0],
            vec![0.0, -1.0, 0.0],
            vec![0.0, 0.0, -1.0],
            vec![1.0, 2.0, 3.0],
        ],
        h: vec![0.0, 0.0, 0.0, 6.0],
    };
    let (best, vertex) = vertex_enumeration(&lp).unwrap();
    assert_eq!(best, -6.0);
    assert_eq!(vertex, vec![6.0, 0.0, 0.0]);
    let r = solve(&to_program(&lp), &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - best).abs() < 1e-7);
    for (a, b) in r.x.iter().zip(&vertex) {
        assert!((a - b).abs() < 1e-6);
    }
}

#[test]
fn rotated_cone_boundary() {
    // min w  s.t.  u w >= z^2, u = 1, z = 2  ->  w = 4
    let mut b = ProgramBuilder::new(3);
    b.set_cost(1, 1.0);
    b.add_eq(vec![(0, 1.0)], 1.0);
    b.add_eq(vec![(2, 1.0)], 2.0);
    b.add_cone(RotatedCone::new(0, 1, vec![2]));
    let p = b.build();
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.x[1] - 4.0).abs() < 1e-7, "{:?}", r.x);
    assert!(p.cones[0].violation(&r.x) < 1e-8);
}

#[test]
fn hyperbolic_constraint() {
    // min u + w  s.t.  u w >= 1 + 0  ->  u = w = 1
    let mut b = ProgramBuilder::new(3);
    b.set_cost(0, 1.0);
    b.set_cost(1, 1.0);
    b.add_eq(vec![(2, 1.0)], 1.0);
    b.add_cone(RotatedCone::new(0, 1, vec![2]));
    let r = solve(&b.build(), &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 2.0).abs() < 1e-7);
    assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5);
}

#[test]
fn equality_constrained_lp() {
    // min x1 + 2 x2  s.t.  x1 + x2 = 1, x >= 0
    let mut b = ProgramBuilder::new(2);
    b.set_cost(0, 1.0);
    b.set_cost(1, 2.0);
    b.add_eq(vec![(0, 1.0), (1, 1.0)], 1.0);
    b.add_le(vec![(0, -1.0)], 0.0);
    b.add_le(vec![(1, -1.0)], 0.0);
    let p = b.build();
    let r = solve(&p, &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::Optimal);
    assert!((r.objective - 1.0).abs() < 1e-8);
    let res = residuals(&p, &r.x, &r.duals);
    assert!(res.primal < 1e-8 && res.dual < 1e-8 && res.gap < 1e-8, "{res:?}");
}

#[test]
fn detects_primal_infeasibility() {
    // x <= -1 and x >= 1
    let mut b = ProgramBuilder::new(1);
    b.set_cost(0, 1.0);
    b.add_le(vec![(0, 1.0)], -1.0);
    b.add_le(vec![(0, -1.0)], -1.0);
    let r = solve(&b.build(), &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::PrimalInfeasible);
    // Farkas certificate: z >= 0, G^T z = 0, h^T z < 0.
    let z = &r.duals.ineq;
    assert!(z.iter().all(|&v| v >= -1e-9));
    assert!((z[0] - z[1]).abs() < 1e-6);
    assert!(-z[0] - z[1] < 0.0);
}

#[test]
fn detects_unboundedness() {
    // min -x  s.t.  x >= 0
    let mut b = ProgramBuilder::new(1);
    b.set_cost(0, -1.0);
    b.add_le(vec![(0, -1.0)], 0.0);
    let r = solve(&b.build(), &settings()).unwrap();
    assert_eq!(r.status, SolveStatus::DualInfeasible);
    assert!(r.x[0] > 0.0);
}

#[test]
fn iteration_cap_is_reported() {
    let lp = DenseLp {
        c: vec![1.0, 1.0],
        g: vec![vec![-1.0, 0.0], vec![0.0, -1.0], vec![1.0, 1.0]],
        h: vec![0.0, 0.0, 1.0],
    };
    let mut s = settings();
    s.max_iterations = 1;
    let r = solve(&to_program(&lp), &s).unwrap();
    assert_eq!(r.status, SolveStatus::IterationLimit);
    assert_eq!(r.iterations, 1);
}

#[test]
fn malformed_program_is_rejected() {
    let mut b = ProgramBuilder::new(2);
    b.add_cone(RotatedCone::new(0, 0, vec![1]));
    assert!(matches!(
        solve(&b.build(), &settings()),
        Err(SolverError::Malformed(_))
    ));
}

#[test]
fn deterministic_bitwise() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let p = to_program(&random_bounded_lp(&mut rng));
        let a = solve(&p, &settings()).unwrap();
        let b = solve(&p, &settings()).unwrap();
        assert_eq!(a.iterations, b.iterations);
        assert_eq!(
            a.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            b.x.iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
    }
}

#[test]
fn dump_replay_gives_identical_result() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = to_program(&random_bounded_lp(&mut rng));
    let replay = ConicProgram::from_json(&p.to_json()).unwrap();
    assert_eq!(solve(&p, &settings()).unwrap(), solve(&replay, &settings()).unwrap());
}

fn scaled(p: &ConicProgram, k: f64) -> ConicProgram {
    let mut q = p.clone();
    q.objective.iter_mut().for_each(|c| *c *= k);
    q
}

#[test]
fn objective_scaling_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for _ in 0..50 {
        let p = to_program(&random_bounded_lp(&mut rng));
        let a = solve(&p, &settings()).unwrap();
        let b = solve(&scaled(&p, 1000.0), &settings()).unwrap();
        assert_eq!(a.status, SolveStatus::Optimal);
        assert_eq!(b.status, SolveStatus::Optimal);
        let rel = (b.objective - 1000.0 * a.objective).abs() / (1000.0 * a.objective.abs()).max(1e-300);
        assert!(rel < 1e-9 || (b.objective - 1000.0 * a.objective).abs() < 1e-9, "rel {rel}");
        for (x, y) in a.x.iter().zip(&b.x) {
            assert!((x - y).abs() < 1e-6);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_lps_match_vertex_enumeration(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let lp = random_bounded_lp(&mut rng);
        let (best, _) = vertex_enumeration(&lp).expect("bounded nonempty polytope has a vertex");
        let r = solve(&to_program(&lp), &settings()).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        prop_assert!((r.objective - best).abs() <= 1e-6 * best.abs().max(1.0),
            "ipm {} vs oracle {}", r.objective, best);
        prop_assert!(r.residuals.primal < 1e-9 && r.residuals.dual < 1e-9);
    }

    #[test]
    fn cone_blocks_hold_at_optimum(a in 0.1f64..5.0, z1 in -3.0f64..3.0, z2 in -3.0f64..3.0) {
        // min u + a w  s.t.  u w >= z1^2 + z2^2 with z fixed: optimum u = sqrt(a) |z|, w = |z| / sqrt(a)
        let mut b = ProgramBuilder::new(4);
        b.set_cost(0, 1.0);
        b.set_cost(1, a);
        b.add_eq(vec![(2, 1.0)], z1);
        b.add_eq(vec![(3, 1.0)], z2);
        b.add_cone(RotatedCone::new(0, 1, vec![2, 3]));
        let p = b.build();
        let r = solve(&p, &settings()).unwrap();
        prop_assert_eq!(r.status, SolveStatus::Optimal);
        let norm = (z1 * z1 + z2 * z2).sqrt();
        prop_assert!((r.objective - 2.0 * a.sqrt() * norm).abs() < 1e-6 * (1.0 + norm));
        prop_assert!(p.cones[0].violation(&r.x) < 1e-8);
    }
}

/// Degenerate OPF on which the search direction loses accuracy a few iterations after the
/// iterate is already good enough.
fn stalling_program() -> ConicProgram {
    let text = include_str!("fixtures/stalling_opf.json");
    serde_json::from_str(text).unwrap()
}

#[test]
fn numerical_trouble_falls_back_to_best_iterate() {
    let p = stalling_program();
    let r = solve(&p, &settings()).unwrap();
    assert!(matches!(r.status, SolveStatus::Optimal | SolveStatus::AlmostOptimal));
    let f = settings().reduced_accuracy_factor;
    assert!(r.residuals.primal < f * settings().eps_feasibility);
    assert!(r.residuals.dual < f * settings().eps_feasibility);
    let res = residuals(&p, &r.x, &r.duals);
    assert!(res.primal < 1e-6, "{res:?}");
}

#[test]
fn strict_settings_report_the_trouble() {
    let strict = SolverSettings {
        reduced_accuracy_factor: 1.0,
        ..settings()
    };
    match solve(&stalling_program(), &strict) {
        Err(SolverError::Numerical { .. }) => {}
        Ok(r) => assert_eq!(r.status, SolveStatus::Optimal),
        Err(e) => panic!("unexpected error {e}"),
    }
}
