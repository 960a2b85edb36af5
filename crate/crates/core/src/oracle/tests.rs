use super::*;
use crate::formulation::build_ind;
use crate::instance::tests::two_by_two;
use crate::instance::{generate_synthetic, DemandPair, SizeClass};

fn reachable(u: f64) -> TransitInstance {
    let mut inst = two_by_two();
    inst.centroids[1].position = [1000.0, 350.0];
    let links = crate::instance::derive_walk_links(&inst);
    let inst = TransitInstance::from_parts(
        "reach".into(),
        inst.params.clone(),
        inst.nodes.clone(),
        inst.edges.clone(),
        inst.centroids.clone(),
        inst.demands.clone(),
        Some(links),
    )
    .unwrap();
    inst.with_demands(vec![DemandPair {
        id: 0,
        origin: 0,
        dest: 1,
        demand: 10.0,
        private_utility: Some(u),
    }])
}

#[test]
fn two_by_two_has_one_design() {
    let space = enumerate_designs(&two_by_two()).unwrap();
    assert_eq!(space.len(), 1);
    let d = space.iter().next().unwrap();
    assert_eq!(d.rapid_edges, vec![0]);
    assert_eq!(d.rapid_stops, vec![0, 1]);
    assert!(d.rapid_nonstops.is_empty());
    assert_eq!(d.slow_stops, vec![2, 3]);
}

#[test]
fn slow_route_wins_on_short_trip() {
    let inst = reachable(20.0);
    let d = enumerate_designs(&inst).unwrap().iter().next().unwrap();
    // 1.8 + 1.8 walking, 2.4 riding, 1.0 dwell, 2 - 0.25 boarding.
    let r = best_routing(&inst, &d, 0).unwrap();
    assert_eq!(r.single_mode(), Some(Mode::Slow));
    assert!((r.time - 8.75).abs() < 1e-9, "{}", r.time);
    // 4.2 + 4.2 walking, 6/7 riding, 0.5 dwell, 1.75 boarding.
    let rapid = best_routing_scoped(&inst, &d, 0, false).unwrap();
    assert!((rapid.time - (8.4 + 6.0 / 7.0 + 0.5 + 1.75)).abs() < 1e-9);
}

#[test]
fn utility_bound_is_inclusive() {
    assert!(best_routing(&reachable(8.75), &enumerate_designs(&reachable(8.75)).unwrap().iter().next().unwrap(), 0).is_some());
    let inst = reachable(8.7);
    let d = enumerate_designs(&inst).unwrap().iter().next().unwrap();
    assert!(best_routing(&inst, &d, 0).is_none());
}

#[test]
fn cap_is_enforced() {
    let inst = generate_synthetic(3, SizeClass::Tiny).unwrap();
    let space = enumerate_designs(&inst).unwrap();
    assert!(space.len() > 1);
    let err = enumerate_designs_capped(&inst, space.len() - 1).unwrap_err();
    assert!(matches!(err, OracleError::CapExceeded { .. }));
}

#[test]
fn oracle_routes_satisfy_the_model() {
    for seed in 1..=6 {
        let inst = generate_synthetic(seed, SizeClass::Tiny).unwrap();
        let m = build_ind(&inst).unwrap();
        let space = enumerate_designs(&inst).unwrap();
        for design in space.iter().step_by(7) {
            let sol = evaluate_design(&inst, &design);
            let x = sol.point(&inst, &m);
            let viol = m.model.max_violation(&x);
            assert!(viol <= 1e-6, "seed {seed}: violation {viol}");
            assert!((m.model.objective_value(&x) - sol.objective).abs() < 1e-6);
        }
    }
}

#[test]
fn sequential_never_beats_joint() {
    for seed in 1..=5 {
        let inst = generate_synthetic(seed, SizeClass::Tiny).unwrap();
        let (best, _) = solve_exact(&inst).unwrap();
        let seq = solve_sequential_exact(&inst).unwrap();
        for v in &seq.stage2_values {
            assert!(*v <= best + 1e-9);
        }
        assert!((seq.solution.objective - seq.stage2_values[0]).abs() < 1e-9);
    }
}
