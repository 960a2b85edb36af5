use std::time::Instant;

use indnet::benders::{solve_benders, PartialConfig, Selection, Stabilization};
use indnet::instance::{generate_synthetic, SizeClass};
use indnet::mip::MipLimits;
use indnet::oracle::{enumerate_designs, evaluate_design, solve_exact};

#[test]
fn benders_grid_matches_oracle() {
    let start = Instant::now();
    let mut with_cuts = 0;
    for seed in 1..=25 {
        let inst = generate_synthetic(seed, SizeClass::Tiny).unwrap();
        let (best, _) = solve_exact(&inst).unwrap();
        let space = enumerate_designs(&inst).unwrap();
        let sols: Vec<_> = space.iter().map(|d| evaluate_design(&inst, &d)).collect();
        for pct in [0.0, 10.0, 50.0] {
            for code in 1..=3 {
                let cfg = PartialConfig {
                    percentage: pct,
                    selection: Selection::from_code(code).unwrap(),
                    seed,
                };
                let t = Instant::now();
                let out = solve_benders(&inst, &cfg, &Stabilization::default(), &MipLimits::default()).unwrap();
                assert_eq!(out.outcome.objective(), Some(best), "seed {seed} pct {pct} type {code}");
                if pct == 0.0 && code == 1 {
                    eprintln!("seed {seed}: cuts {} nodes {} t {:.2}", out.cuts.len(), out.outcome.stats.nodes, t.elapsed().as_secs_f64());
                    if !out.cuts.is_empty() {
                        with_cuts += 1;
                    }
                }
                let mut worst: f64 = 0.0;
                for cut in &out.cuts {
                    for sol in &sols {
                        let vals: std::collections::HashMap<_, _> = sol.routes.iter().flat_map(|r| r.key_values(&inst, &sol.design)).collect();
                        let s = cut.slack(|k| if k.is_design() { sol.design.key_value(k) } else { vals.get(&k).copied().unwrap_or(0.0) });
                        worst = worst.min(s);
                    }
                }
                assert!(worst >= -1e-6, "seed {seed}: cut slack {worst}");
            }
        }
    }
    eprintln!("instances with cuts at 0%: {with_cuts}; total {:.1}s", start.elapsed().as_secs_f64());
}
