use super::*;
use crate::benders::Selection;
use crate::formulation::{Design, DesignSolution};
use crate::instance::{generate_synthetic, SizeClass};
use crate::mip::Termination;

fn stats(obj: Option<f64>) -> SolveStats {
    SolveStats {
        t: 1.234,
        nodes: 10,
        n_cuts: 3,
        lazy_cuts: 3,
        user_cuts: 0,
        obj_v: obj,
        bound: if obj.is_some() { 120.0 } else { f64::INFINITY },
        gap: obj.map(|o| SolveStats::gap_percent(120.0, o)),
        lp_iterations: 99,
        termination: Termination::TimeLimit,
    }
}

fn record(obj: Option<f64>) -> RunRecord {
    RunRecord {
        schema_version: RUN_RECORD_VERSION,
        instance: "toy".into(),
        method: Method::Benders,
        partial: Some(PartialConfig {
            percentage: 2.0,
            selection: Selection::HighestDemand,
            seed: 0,
        }),
        lambda: Some(0.5),
        limits: MipLimits::default(),
        stats: stats(obj),
        benders_cuts: Some(CutCounts { lazy: 3, user: 0 }),
        coverage: obj.map(|_| CoverageStats {
            demand_r: 60.0,
            demand_s: 30.5,
            demand_rs: 9.5,
            pairs_r: 2,
            pairs_s: 1,
            pairs_rs: 1,
        }),
    }
}

#[test]
fn csv_header_is_exact() {
    let csv = to_csv(&[]);
    assert_eq!(
        csv,
        "instance,method,percentage,type,t,gap,n_cuts,obj_v,demand_R,demand_S,demand_RS,pairs_R,pairs_S,pairs_RS\n"
    );
}

#[test]
fn csv_row_values() {
    let csv = to_csv(&[record(Some(100.0)), record(None)]);
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[1], "toy,benders,2,2,1.23,20.00,3,100,60,30.50,9.50,2,1,1");
    assert_eq!(lines[2], "toy,benders,2,2,1.23,-,3,-,-,-,-,-,-,-");
}

#[test]
fn table_and_csv_agree() {
    let recs = [record(Some(100.0)), record(None)];
    let csv = to_csv(&recs);
    let table = to_table(&recs);
    let t_rows: Vec<Vec<&str>> = table
        .lines()
        .enumerate()
        .filter(|&(i, _)| i != 1)
        .map(|(_, l)| l.split_whitespace().collect())
        .collect();
    let c_rows: Vec<Vec<&str>> = csv.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(t_rows, c_rows);
}

#[test]
fn record_round_trip_with_infinite_bound() {
    let r = record(None);
    let back = RunRecord::from_json(&r.to_json()).unwrap();
    assert_eq!(back.stats.bound, f64::INFINITY);
    assert_eq!(back.instance, r.instance);
    let mut bad: serde_json::Value = serde_json::from_str(&r.to_json()).unwrap();
    bad["schema_version"] = 99.into();
    assert!(RunRecord::from_json(&bad.to_string()).is_err());
}

#[test]
fn svg_structure_and_determinism() {
    let inst = generate_synthetic(5, SizeClass::Tiny).unwrap();
    let (_, sol) = crate::oracle::solve_exact(&inst).unwrap();
    let a = render_design(&inst, &sol);
    assert_eq!(a, render_design(&inst, &sol));
    assert_eq!(a.matches("<g id=\"rapid-line\"").count(), 1);
    assert_eq!(a.matches("<g id=\"slow-line\"").count(), 1);
    assert_eq!(a.matches("<polyline").count(), 2);
    assert!(a.contains("stroke-dasharray"));

    let empty = DesignSolution::new(&inst, Design::default(), Vec::new());
    let b = render_design(&inst, &empty);
    assert_eq!(b.matches("<polyline").count(), 0);
    assert_eq!(b.matches("<line ").count(), inst.edges.len());
}
