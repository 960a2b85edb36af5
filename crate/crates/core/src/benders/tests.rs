use super::*;
use crate::formulation::{build_ind, expected_column_count};
use crate::instance::{generate_synthetic, SizeClass};
use crate::lp::solve_lp;
use crate::oracle::solve_exact;

fn tiny(seed: u64) -> TransitInstance {
    generate_synthetic(seed, SizeClass::Tiny).unwrap()
}

fn cfg(percentage: f64, code: u8) -> PartialConfig {
    PartialConfig {
        percentage,
        selection: Selection::from_code(code).unwrap(),
        seed: 7,
    }
}

#[test]
fn retained_counts_round() {
    let inst = tiny(3);
    let n = inst.num_pairs();
    assert_eq!(retained_pairs(&inst, &cfg(0.0, 1)).len(), 0);
    assert_eq!(retained_pairs(&inst, &cfg(100.0, 2)).len(), n);
    assert_eq!(retained_pairs(&inst, &cfg(50.0, 3)).len(), (n as f64 / 2.0).round() as usize);
}

#[test]
fn demand_selection_orders() {
    let inst = tiny(3);
    let hi = retained_pairs(&inst, &cfg(30.0, 2));
    let lo = retained_pairs(&inst, &cfg(30.0, 3));
    let min_hi = hi.iter().map(|&w| inst.demands[w].demand).fold(f64::INFINITY, f64::min);
    let max_lo = lo.iter().map(|&w| inst.demands[w].demand).fold(0.0, f64::max);
    for w in 0..inst.num_pairs() {
        if !hi.contains(&w) {
            assert!(inst.demands[w].demand <= min_hi);
        }
        if !lo.contains(&w) {
            assert!(inst.demands[w].demand >= max_lo);
        }
    }
    assert_eq!(retained_pairs(&inst, &cfg(30.0, 1)), retained_pairs(&inst, &cfg(30.0, 1)));
}

#[test]
fn projected_master_drops_flow_columns() {
    let inst = tiny(2);
    let t = &inst.topo;
    let flows = t.rapid_arcs.len() + t.slow_arcs.len() + 2 * t.trans_nodes.len();
    let pm = build_partial_master(&inst, &cfg(0.0, 1)).unwrap();
    assert_eq!(pm.model.dir.len(), expected_column_count(&inst) - inst.num_pairs() * flows);
    let full = build_partial_master(&inst, &cfg(100.0, 1)).unwrap();
    assert_eq!(full.model.dir.keys(), build_ind(&inst).unwrap().dir.keys());
}

#[test]
fn zero_coverage_point_is_subproblem_feasible() {
    let inst = tiny(2);
    let pm = build_partial_master(&inst, &cfg(0.0, 1)).unwrap();
    let zero = vec![0.0; pm.model.dir.len()];
    for w in 0..inst.num_pairs() {
        let lp = build_subproblem(&inst, &pm.model, w, &zero);
        assert!(solve_lp(&lp, None).is_optimal());
        let sub = Subproblem::new(&inst, &pm.model, w);
        assert!(separate(&sub, &zero, &zero, 0.0).is_none());
    }
}

#[test]
fn coverage_without_lines_is_cut() {
    let inst = tiny(2);
    let pm = build_partial_master(&inst, &cfg(0.0, 1)).unwrap();
    let zero = vec![0.0; pm.model.dir.len()];
    let (_, sol) = solve_exact(&inst).unwrap();
    let w = sol.covered_pairs()[0];
    // Walk links as in the optimal route, but no line built.
    let mut out = zero.clone();
    for (k, v) in sol.routes[w].key_values(&inst, &sol.design) {
        if let Some(j) = pm.model.col(k) {
            out[j] = v;
        }
    }
    let sub = Subproblem::new(&inst, &pm.model, w);
    let cut = separate(&sub, &out, &zero, 0.0).expect("infeasible point must be cut");
    assert!(cut.row().violation(&out) > 1e-6);
    // The cut keeps the oracle optimum.
    let x = sol.point(&inst, &pm.model);
    assert!(cut.row().violation(&x) <= 1e-6);
}

#[test]
fn feasible_solution_yields_no_cut() {
    let inst = tiny(5);
    let pm = build_partial_master(&inst, &cfg(0.0, 1)).unwrap();
    let (_, sol) = solve_exact(&inst).unwrap();
    let x = sol.point(&inst, &pm.model);
    let zero = vec![0.0; x.len()];
    for w in 0..inst.num_pairs() {
        let sub = Subproblem::new(&inst, &pm.model, w);
        assert!(separate(&sub, &x, &zero, 0.5).is_none(), "pair {w}");
        assert!(separate(&sub, &x, &zero, 0.0).is_none(), "pair {w}");
    }
}

#[test]
fn full_retention_needs_no_cuts() {
    let inst = tiny(6);
    let out = solve_benders(&inst, &cfg(100.0, 1), &Stabilization::default(), &MipLimits::default()).unwrap();
    assert!(out.cuts.is_empty());
    assert_eq!(out.outcome.objective(), Some(solve_exact(&inst).unwrap().0));
}
