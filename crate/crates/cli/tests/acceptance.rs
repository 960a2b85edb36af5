//! Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any fails.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use indnet::benders::{build_partial_master, solve_benders, PartialConfig, Selection, Stabilization, Subproblem};
use indnet::formulation::{check_feasibility, DesignSolution};
use indnet::instance::{generate_synthetic, load_instance, SizeClass, TransitInstance};
use indnet::lp::{dual_objective, solve_lp, verify_farkas, LinearRow, LpProblem, LpStatus, Sense};
use indnet::mip::MipLimits;
use indnet::oracle::{enumerate_designs, evaluate_design, solve_exact, solve_sequential_exact};
use indnet::report::CSV_COLUMNS;
use indnet::solve::{solve_direct, solve_sequential};

const SEEDS: std::ops::RangeInclusive<u64> = 1..=25;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn tiny(seed: u64) -> TransitInstance {
    generate_synthetic(seed, SizeClass::Tiny).expect("tiny instances generate")
}

/// Outcome of one criterion: pass flag and a short detail line.
type Verdict = (bool, String);

/// Solutions collected along the way for the feasibility criterion.
#[derive(Default)]
struct Returned(Vec<(String, DesignSolution)>);

impl Returned {
    fn push(&mut self, tag: String, sol: Option<&DesignSolution>) {
        if let Some(s) = sol {
            self.0.push((tag, s.clone()));
        }
    }
}

fn oracle_values() -> Vec<f64> {
    SEEDS.map(|s| solve_exact(&tiny(s)).expect("oracle").0).collect()
}

fn c1_direct(oracle: &[f64], got: &mut Returned) -> Verdict {
    let start = Instant::now();
    let mut bad = Vec::new();
    for (i, seed) in SEEDS.enumerate() {
        let inst = tiny(seed);
        match solve_direct(&inst, &MipLimits::default()) {
            Ok(o) => {
                if o.objective() != Some(oracle[i]) {
                    bad.push(format!("seed {seed}: {:?} vs {}", o.objective(), oracle[i]));
                }
                got.push(format!("direct/{seed}"), o.solution.as_ref());
            }
            Err(e) => bad.push(format!("seed {seed}: {e}")),
        }
    }
    let t = start.elapsed().as_secs_f64();
    let ok = bad.is_empty() && t < 120.0;
    (ok, format!("25 seeds in {t:.1}s{}", mismatch(&bad)))
}

fn mismatch(bad: &[String]) -> String {
    if bad.is_empty() {
        String::new()
    } else {
        format!("; {}", bad.join("; "))
    }
}

/// Criteria 2 and 3 share the Benders runs.
fn c2_c3_benders(oracle: &[f64], got: &mut Returned) -> (Verdict, Verdict) {
    let mut bad = Vec::new();
    let mut with_cuts = 0;
    let mut n_cuts = 0usize;
    let mut worst = f64::INFINITY;
    for (i, seed) in SEEDS.enumerate() {
        let inst = tiny(seed);
        let sols: Vec<DesignSolution> = enumerate_designs(&inst)
            .expect("tiny design space")
            .iter()
            .map(|d| evaluate_design(&inst, &d))
            .collect();
        let points: Vec<HashMap<_, f64>> = sols
            .iter()
            .map(|s| s.routes.iter().flat_map(|r| r.key_values(&inst, &s.design)).collect())
            .collect();
        for pct in [0.0, 10.0, 50.0] {
            for code in 1..=3 {
                let cfg = PartialConfig {
                    percentage: pct,
                    selection: Selection::from_code(code).unwrap(),
                    seed,
                };
                let out = match solve_benders(&inst, &cfg, &Stabilization::default(), &MipLimits::default()) {
                    Ok(o) => o,
                    Err(e) => {
                        bad.push(format!("seed {seed} {pct}/{code}: {e}"));
                        continue;
                    }
                };
                if out.outcome.objective() != Some(oracle[i]) {
                    bad.push(format!("seed {seed} {pct}/{code}: {:?} vs {}", out.outcome.objective(), oracle[i]));
                }
                if pct == 0.0 && code == 1 && !out.cuts.is_empty() {
                    with_cuts += 1;
                }
                got.push(format!("benders/{seed}/{pct}/{code}"), out.outcome.solution.as_ref());
                n_cuts += out.cuts.len();
                for cut in &out.cuts {
                    for (s, vals) in sols.iter().zip(&points) {
                        let slack = cut.slack(|k| {
                            if k.is_design() {
                                s.design.key_value(k)
                            } else {
                                vals.get(&k).copied().unwrap_or(0.0)
                            }
                        });
                        worst = worst.min(slack);
                    }
                }
            }
        }
    }
    let c2 = (
        bad.is_empty() && with_cuts >= 20,
        format!("225 runs match the oracle; {with_cuts}/25 instances cut at 0%{}", mismatch(&bad)),
    );
    let worst = if worst.is_finite() { worst } else { 0.0 };
    let c3 = (
        worst >= -1e-6,
        format!("{n_cuts} cuts, least slack over enumerated designs {worst:.3e}"),
    );
    (c2, c3)
}

fn c4_integrality() -> Verdict {
    let mut checked = 0;
    let mut bad = Vec::new();
    for seed in SEEDS {
        let inst = tiny(seed);
        let (_, sol) = solve_exact(&inst).expect("oracle");
        let pm = build_partial_master(&inst, &PartialConfig::default()).expect("master");
        let m = sol.point(&inst, &pm.model);
        for &w in &pm.projected {
            let lp = Subproblem::new(&inst, &pm.model, w).lp_at(&m);
            let out = solve_lp(&lp, None);
            checked += 1;
            if out.status != LpStatus::Optimal {
                bad.push(format!("seed {seed} pair {w}: {:?}", out.status));
                continue;
            }
            let frac = out.primal.iter().map(|v| (v - v.round()).abs()).fold(0.0, f64::max);
            if frac > 1e-6 {
                bad.push(format!("seed {seed} pair {w}: fractional by {frac:.2e}"));
            }
        }
    }
    (bad.is_empty(), format!("{checked} pair LPs{}", mismatch(&bad)))
}

fn c5_sequential(oracle: &[f64], got: &mut Returned) -> Verdict {
    let mut bad = Vec::new();
    for (i, seed) in SEEDS.enumerate() {
        let inst = tiny(seed);
        match solve_sequential(&inst, &MipLimits::default()) {
            Ok(o) => {
                match o.objective() {
                    Some(v) if v <= oracle[i] + 1e-6 => {}
                    v => bad.push(format!("seed {seed}: sequential {v:?} vs integrated {}", oracle[i])),
                }
                got.push(format!("sequential/{seed}"), o.stage2.as_ref().and_then(|s| s.solution.as_ref()));
            }
            Err(e) => bad.push(format!("seed {seed}: {e}")),
        }
    }
    let demo = load_instance(data("seq_gap_demo.json")).expect("seq_gap_demo loads");
    let joint = solve_direct(&demo, &MipLimits::default()).expect("direct");
    let seq = solve_sequential(&demo, &MipLimits::default()).expect("sequential");
    let exact = solve_exact(&demo).expect("oracle").0;
    let seq_exact = solve_sequential_exact(&demo).expect("oracle");
    let seq_best = seq_exact.stage2_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    got.push("direct/seq_gap_demo".into(), joint.solution.as_ref());
    got.push("sequential/seq_gap_demo".into(), seq.stage2.as_ref().and_then(|s| s.solution.as_ref()));
    let (j, s) = (joint.objective(), seq.objective());
    let strict = matches!((j, s), (Some(j), Some(s)) if s < j - 1e-6) && j == Some(exact) && seq_best < exact - 1e-6;
    if !strict {
        bad.push(format!("seq_gap_demo: sequential {s:?} vs integrated {j:?} (oracle {seq_best} vs {exact})"));
    }
    (
        bad.is_empty(),
        format!(
            "25 seeds sequential <= integrated; seq_gap_demo {} < {}{}",
            s.map_or("-".into(), |v| v.to_string()),
            j.map_or("-".into(), |v| v.to_string()),
            mismatch(&bad)
        ),
    )
}

fn c6_feasibility(got: &Returned) -> Verdict {
    let failed: Vec<String> = got
        .0
        .iter()
        .filter_map(|(tag, sol)| {
            let inst = match tag.split('/').nth(1) {
                Some("seq_gap_demo") => load_instance(data("seq_gap_demo.json")).unwrap(),
                Some(s) => tiny(s.parse().unwrap()),
                None => return Some(format!("{tag}: untagged")),
            };
            let r = check_feasibility(&inst, sol);
            (!r.all_passed()).then(|| format!("{tag}: {:?}", r.failed()))
        })
        .collect();
    (failed.is_empty(), format!("{} solutions checked{}", got.0.len(), mismatch(&failed)))
}

fn random_lp(rng: &mut ChaCha8Rng) -> LpProblem {
    let n = rng.gen_range(2..=8);
    let m = rng.gen_range(1..=10);
    let mut p = LpProblem {
        maximize: rng.gen_bool(0.5),
        ..Default::default()
    };
    // Most rows hold at an integer anchor inside the box, so both outcomes are common.
    let mut anchor = Vec::with_capacity(n);
    for _ in 0..n {
        let lo = rng.gen_range(-5..=0);
        let hi = lo + rng.gen_range(0..=8);
        p.add_col(rng.gen_range(-6..=6) as f64, lo as f64, hi as f64);
        anchor.push(rng.gen_range(lo..=hi) as f64);
    }
    for _ in 0..m {
        let mut coeffs = Vec::new();
        for j in 0..n {
            if rng.gen_bool(0.7) {
                coeffs.push((j, rng.gen_range(-5..=5) as f64));
            }
        }
        let sense = [Sense::Le, Sense::Ge, Sense::Eq][rng.gen_range(0..3)];
        let rhs = if rng.gen_bool(0.85) {
            let at: f64 = coeffs.iter().map(|&(j, a)| a * anchor[j]).sum();
            let room = rng.gen_range(0..=4) as f64;
            match sense {
                Sense::Le => at + room,
                Sense::Ge => at - room,
                Sense::Eq => at,
            }
        } else {
            rng.gen_range(-10..=10) as f64
        };
        p.add_row(LinearRow::new(coeffs, sense, rhs));
    }
    p
}

fn c7_lp() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(500);
    let (mut optimal, mut infeasible) = (0, 0);
    let mut bad = Vec::new();
    for k in 0..500 {
        let p = random_lp(&mut rng);
        let out = solve_lp(&p, None);
        match out.status {
            LpStatus::Optimal => {
                optimal += 1;
                let dual = dual_objective(&p, &out.duals, &out.reduced_costs);
                let viol = p.max_violation(&out.primal);
                let primal = p.objective_value(&out.primal);
                if (dual - out.objective).abs() > 1e-6 || (primal - out.objective).abs() > 1e-6 || viol > 1e-6 {
                    bad.push(format!("lp {k}: primal {primal} dual {dual} violation {viol:.1e}"));
                }
            }
            LpStatus::Infeasible => {
                infeasible += 1;
                if !out.farkas.as_ref().is_some_and(|r| verify_farkas(&p, r)) {
                    bad.push(format!("lp {k}: unverified ray"));
                }
            }
            s => bad.push(format!("lp {k}: {s:?}")),
        }
    }
    (
        bad.is_empty(),
        format!("{optimal} optimal, {infeasible} infeasible{}", mismatch(&bad)),
    )
}

fn c8_reporting() -> Verdict {
    let bin = env!("CARGO_BIN_EXE_indnet");
    let mut bad = Vec::new();
    let truth: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(data("demand_ladder.truth.json")).unwrap()).unwrap();
    let out = Command::new(bin)
        .arg("filter")
        .arg(data("demand_ladder.json"))
        .args(["--min-demand", "150,130,100,80,60,40"])
        .output()
        .expect("runs indnet");
    let text = String::from_utf8_lossy(&out.stdout);
    let mut counts = Vec::new();
    for line in text.lines().skip(1) {
        let (g, n) = line.split_once(',').unwrap_or(("?", "?"));
        let want = truth["counts"][g].as_u64();
        counts.push(n.to_string());
        if want.map(|w| w.to_string()) != Some(n.to_string()) {
            bad.push(format!("G={g}: {n} vs {want:?}"));
        }
    }
    if counts.len() != 6 {
        bad.push(format!("expected 6 thresholds, got {}", counts.len()));
    }

    let dir = tempfile::tempdir().unwrap();
    let inst = dir.path().join("t.json");
    let rec = dir.path().join("r.json");
    let st = Command::new(bin)
        .args(["gen", "--seed", "3", "--size", "tiny", "-o"])
        .arg(&inst)
        .output()
        .unwrap()
        .status;
    let st2 = Command::new(bin)
        .args(["solve", "--method", "benders", "--percentage", "10", "--type", "2"])
        .arg(&inst)
        .arg("--record")
        .arg(&rec)
        .output()
        .unwrap();
    let csv = Command::new(bin).arg("report").arg(&rec).args(["--format", "csv"]).output().unwrap();
    let csv = String::from_utf8_lossy(&csv.stdout).to_string();
    let header = csv.lines().next().unwrap_or("");
    if !st.success() || !st2.status.success() {
        bad.push("gen/solve failed".into());
    }
    if header != CSV_COLUMNS.join(",")
        || header != "instance,method,percentage,type,t,gap,n_cuts,obj_v,demand_R,demand_S,demand_RS,pairs_R,pairs_S,pairs_RS"
    {
        bad.push(format!("header {header:?}"));
    }
    let row: Vec<&str> = csv.lines().nth(1).unwrap_or("").split(',').collect();
    if row.len() != 14 || row[1] != "benders" || row[2] != "10" || row[3] != "2" {
        bad.push(format!("row {row:?}"));
    }
    (
        bad.is_empty(),
        format!("ladder {}; csv header exact{}", counts.join("/"), mismatch(&bad)),
    )
}

fn main() {
    let start = Instant::now();
    let oracle = oracle_values();
    let mut got = Returned::default();
    let c1 = c1_direct(&oracle, &mut got);
    let (c2, c3) = c2_c3_benders(&oracle, &mut got);
    let c4 = c4_integrality();
    let c5 = c5_sequential(&oracle, &mut got);
    let c6 = c6_feasibility(&got);
    let c7 = c7_lp();
    let c8 = c8_reporting();
    let results = [
        ("1 direct matches oracle", c1),
        ("2 benders matches oracle", c2),
        ("3 benders cut validity", c3),
        ("4 subproblem integrality", c4),
        ("5 sequential suboptimality", c5),
        ("6 solution feasibility", c6),
        ("7 lp primal/dual/farkas", c7),
        ("8 reporting fidelity", c8),
    ];
    let mut all = true;
    for (name, (ok, detail)) in &results {
        println!("criterion {name}: {} ({detail})", if *ok { "PASS" } else { "FAIL" });
        all &= *ok;
    }
    println!("acceptance: {:.1}s", start.elapsed().as_secs_f64());
    if !all {
        std::process::exit(1);
    }
}
