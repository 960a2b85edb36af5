use super::*;
use crate::instance::tests::two_by_two;
use crate::instance::{generate_synthetic, SizeClass};

#[test]
fn column_count_matches_closed_form() {
    for seed in [1, 2, 7] {
        let inst = generate_synthetic(seed, SizeClass::Tiny).unwrap();
        let m = build_ind(&inst).unwrap();
        assert_eq!(m.model.num_cols(), expected_column_count(&inst));
        assert_eq!(m.dir.len(), m.model.num_cols());
    }
}

#[test]
fn one_label_row_per_rapid_node() {
    let inst = generate_synthetic(4, SizeClass::Tiny).unwrap();
    let m = build_ind(&inst).unwrap();
    assert_eq!(m.model.count_family("design_6"), inst.topo.rapid_nodes.len());
}

#[test]
fn smallest_instance_counts() {
    let inst = two_by_two();
    let m = build_ind(&inst).unwrap();
    // Design: 2 edges, y and z on 2 rapid nodes, z on 2 slow nodes.
    // Pair: f, 4 arcs, no transfers, 8 walk columns, 4 dwell.
    assert_eq!(m.model.num_cols(), 8 + 1 + 4 + 8 + 4);
    assert_eq!(m.model.count_family("budget"), 2);
    assert_eq!(m.model.count_family("utility"), 1);
    assert_eq!(m.model.count_family("transfer_1"), 0);
}

#[test]
fn keys_round_trip_through_directory() {
    let inst = generate_synthetic(2, SizeClass::Tiny).unwrap();
    let m = build_ind(&inst).unwrap();
    for (j, &k) in m.dir.keys().iter().enumerate() {
        assert_eq!(m.col(k), Some(j));
        assert_eq!(m.model.columns[j].name, k.to_string());
    }
}

#[test]
fn walk_without_link_is_fixed_to_zero() {
    let inst = two_by_two();
    let m = build_ind(&inst).unwrap();
    // Centroid 1 is 2 km from every station.
    let j = m.col(VarKey::VDR(0, 1)).unwrap();
    assert_eq!(m.model.columns[j].upper, 0.0);
    let j = m.col(VarKey::VOR(0, 0)).unwrap();
    assert_eq!(m.model.columns[j].upper, 1.0);
}

#[test]
fn acute_turns() {
    let k = [0.0, 0.0];
    assert!(turn_is_acute(k, [-1.0, 0.0], [-1.0, 1.0]));
    assert!(!turn_is_acute(k, [-1.0, 0.0], [1.0, 0.0]));
    assert!(turn_is_acute(k, [-1.0, 0.0], [0.0, 1.0]));
}

#[test]
fn oracle_optimum_checks_clean() {
    let inst = generate_synthetic(5, SizeClass::Tiny).unwrap();
    let (v, sol) = crate::oracle::solve_exact(&inst).unwrap();
    let report = check_feasibility(&inst, &sol);
    assert!(report.all_passed(), "{:?}", report.failed());
    assert!((sol.objective - v).abs() < 1e-9);
}

#[test]
fn broken_solutions_are_flagged() {
    let inst = generate_synthetic(5, SizeClass::Tiny).unwrap();
    let (_, sol) = crate::oracle::solve_exact(&inst).unwrap();

    let mut over = sol.clone();
    over.design.rapid_edges.extend(inst.topo.rapid_edges.iter().copied());
    over.design.normalize();
    let r = check_feasibility(&inst, &over);
    assert!(!r.all_passed());

    let mut wrong_obj = sol.clone();
    wrong_obj.objective += 1.0;
    let r = check_feasibility(&inst, &wrong_obj);
    assert!(!r.family("objective").unwrap().passed);

    if let Some(i) = sol.routes.iter().position(|r| r.covered) {
        let mut slow = sol.clone();
        slow.routes[i].time += 1e3;
        let r = check_feasibility(&inst, &slow);
        assert!(!r.all_passed());
    }
}

#[test]
fn stage2_rejects_invalid_rapid_design() {
    let inst = generate_synthetic(1, SizeClass::Tiny).unwrap();
    let seq = build_sequential(&inst).unwrap();
    let bad = RapidDesign {
        edges: vec![],
        stops: vec![],
        nonstops: vec![],
    };
    assert!(matches!(seq.stage2(&bad), Err(FormulationError::BadRapidDesign(_))));
}

#[test]
fn rapid_only_scope_has_no_slow_columns() {
    let inst = generate_synthetic(1, SizeClass::Tiny).unwrap();
    let seq = build_sequential(&inst).unwrap();
    assert!(seq
        .stage1
        .dir
        .keys()
        .iter()
        .all(|k| !matches!(k, VarKey::XS(_) | VarKey::ZS(_) | VarKey::FS(..) | VarKey::FSR(..) | VarKey::FRS(..))));
}
