#![allow(clippy::needless_range_loop)]

use indnet::lp::{
    dual_objective, solve_lp, verify_farkas, LinearRow, LpProblem, LpSolver, LpStatus, Sense,
};
use proptest::prelude::*;

fn gauss(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for c in 0..n {
        let p = (c..n).max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())?;
        if a[p][c].abs() < 1e-9 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..n {
                    a[r][k] -= f * a[c][k];
                }
                b[r] -= f * b[c];
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Best objective over all basic feasible points of a bounded LP, or None
/// when no vertex is feasible.
fn vertex_oracle(p: &LpProblem) -> Option<f64> {
    let n = p.num_cols();
    let mut hyper: Vec<(Vec<f64>, f64)> = Vec::new();
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        hyper.push((e.clone(), p.col_lower[j]));
        hyper.push((e, p.col_upper[j]));
    }
    for r in &p.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &r.coeffs {
            a[j] += v;
        }
        hyper.push((a, r.rhs));
    }
    let h = hyper.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..n).collect();
    loop {
        let a = idx.iter().map(|&i| hyper[i].0.clone()).collect();
        let b = idx.iter().map(|&i| hyper[i].1).collect();
        if let Some(x) = gauss(a, b) {
            if p.max_violation(&x) <= 1e-7 {
                let v = p.objective_value(&x);
                best = Some(match best {
                    None => v,
                    Some(bv) if p.maximize => bv.max(v),
                    Some(bv) => bv.min(v),
                });
            }
        }
        // next combination
        let mut k = n;
        loop {
            if k == 0 {
                return best;
            }
            k -= 1;
            if idx[k] < h - n + k {
                idx[k] += 1;
                for t in k + 1..n {
                    idx[t] = idx[t - 1] + 1;
                }
                break;
            }
        }
    }
}

#[test]
fn single_bound_row() {
    let mut p = LpProblem { maximize: true, ..Default::default() };
    p.add_col(1.0, 0.0, 2.0);
    p.add_row(LinearRow::new(vec![(0, 1.0)], Sense::Le, 1.0));
    let out = solve_lp(&p, None);
    assert_eq!(out.status, LpStatus::Optimal);
    assert!((out.objective - 1.0).abs() < 1e-9);
    assert!((out.duals[0] - 1.0).abs() < 1e-9);
}

#[test]
fn two_columns_shared_row() {
    let mut p = LpProblem { maximize: true, ..Default::default() };
    p.add_col(1.0, 0.0, f64::INFINITY);
    p.add_col(1.0, 0.0, f64::INFINITY);
    p.add_row(LinearRow::new(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0));
    p.add_row(LinearRow::new(vec![(0, 1.0)], Sense::Le, 0.4));
    let out = solve_lp(&p, None);
    assert_eq!(out.status, LpStatus::Optimal);
    assert!((out.objective - 1.0).abs() < 1e-9);
}

#[test]
fn contradictory_rows_give_verified_ray() {
    let mut p = LpProblem::default();
    p.add_col(0.0, f64::NEG_INFINITY, f64::INFINITY);
    p.add_row(LinearRow::new(vec![(0, 1.0)], Sense::Ge, 1.0));
    p.add_row(LinearRow::new(vec![(0, 1.0)], Sense::Le, 0.0));
    let out = solve_lp(&p, None);
    assert_eq!(out.status, LpStatus::Infeasible);
    assert!(verify_farkas(&p, out.farkas.as_ref().unwrap()));
}

#[test]
fn unbounded_detected() {
    let mut p = LpProblem { maximize: true, ..Default::default() };
    p.add_col(1.0, 0.0, f64::INFINITY);
    p.add_col(0.0, 0.0, f64::INFINITY);
    p.add_row(LinearRow::new(vec![(0, 1.0), (1, -1.0)], Sense::Le, 1.0));
    assert_eq!(solve_lp(&p, None).status, LpStatus::Unbounded);
}

#[test]
fn warm_start_after_bound_change_and_new_row() {
    let mut p = LpProblem { maximize: true, ..Default::default() };
    for c in [3.0, 2.0, 4.0] {
        p.add_col(c, 0.0, 1.0);
    }
    p.add_row(LinearRow::new(vec![(0, 1.0), (1, 1.0), (2, 1.0)], Sense::Le, 2.0));
    let mut s = LpSolver::new(&p);
    let out = s.solve();
    assert!((out.objective - 7.0).abs() < 1e-9);
    s.set_col_bounds(2, 0.0, 0.0);
    let out = s.solve();
    assert!((out.objective - 5.0).abs() < 1e-9);
    s.add_row(&LinearRow::new(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.5));
    let out = s.solve();
    assert!((out.objective - 4.0).abs() < 1e-9);
}

fn arb_lp() -> impl Strategy<Value = LpProblem> {
    (1usize..=3, 1usize..=5, any::<bool>()).prop_flat_map(|(n, m, maximize)| {
        let coef = -4i32..=4;
        (
            proptest::collection::vec(coef.clone(), n),
            proptest::collection::vec((-3i32..=0, 0i32..=3), n),
            proptest::collection::vec(
                (proptest::collection::vec(coef.clone(), n), 0u8..3, -6i32..=6),
                m,
            ),
        )
            .prop_map(move |(obj, bounds, rows)| {
                let mut p = LpProblem { maximize, ..Default::default() };
                for j in 0..n {
                    p.add_col(obj[j] as f64, bounds[j].0 as f64, bounds[j].1 as f64);
                }
                for (c, s, rhs) in rows {
                    let sense = [Sense::Le, Sense::Ge, Sense::Eq][s as usize];
                    let coeffs = c.iter().enumerate().map(|(j, &v)| (j, v as f64)).collect();
                    p.add_row(LinearRow::new(coeffs, sense, rhs as f64));
                }
                p
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]
    #[test]
    fn matches_vertex_enumeration(p in arb_lp()) {
        let out = solve_lp(&p, None);
        match vertex_oracle(&p) {
            Some(best) => {
                prop_assert_eq!(out.status, LpStatus::Optimal);
                prop_assert!((out.objective - best).abs() < 1e-6, "{} vs {}", out.objective, best);
                prop_assert!(p.max_violation(&out.primal) < 1e-6);
                let dual = dual_objective(&p, &out.duals, &out.reduced_costs);
                prop_assert!((dual - best).abs() < 1e-6, "dual {} vs {}", dual, best);
            }
            None => {
                prop_assert_eq!(out.status, LpStatus::Infeasible);
                prop_assert!(verify_farkas(&p, out.farkas.as_ref().unwrap()));
            }
        }
    }
}
