use std::time::Instant;

use indnet::instance::{generate_synthetic, SizeClass};
use indnet::mip::MipLimits;
use indnet::oracle::solve_exact;
use indnet::solve::solve_direct;

/// Oracle optima frozen in the repository data.
fn golden() -> std::collections::BTreeMap<String, f64> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../data/tiny_oracle_values.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn direct_matches_oracle_on_tiny_seeds() {
    let frozen = golden();
    let start = Instant::now();
    for seed in 1..=25 {
        let inst = generate_synthetic(seed, SizeClass::Tiny).unwrap();
        let (best, _) = solve_exact(&inst).unwrap();
        assert_eq!(frozen[&seed.to_string()], best, "seed {seed} drifted from the frozen value");
        let t = Instant::now();
        let out = solve_direct(&inst, &MipLimits::default()).unwrap();
        eprintln!(
            "seed {seed}: oracle {best} milp {:?} nodes {} cuts {} t {:.2}s pairs {}",
            out.objective(),
            out.stats.nodes,
            out.stats.n_cuts,
            t.elapsed().as_secs_f64(),
            inst.num_pairs()
        );
        assert_eq!(out.objective(), Some(best), "seed {seed}");
    }
    eprintln!("total {:.1}s", start.elapsed().as_secs_f64());
}
