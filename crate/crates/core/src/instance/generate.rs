use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{distance, Centroid, DemandPair, Edge, InstanceError, InstanceParams, Node, TransitInstance};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SizeClass {
    Tiny,
    Small,
    SevilleLike,
}

impl std::str::FromStr for SizeClass {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "tiny" => Ok(SizeClass::Tiny),
            "small" => Ok(SizeClass::Small),
            "seville-like" | "seville" => Ok(SizeClass::SevilleLike),
            _ => Err(format!("unknown size class `{s}` (tiny, small, seville-like)")),
        }
    }
}

impl SizeClass {
    pub fn label(self) -> &'static str {
        match self {
            SizeClass::Tiny => "tiny",
            SizeClass::Small => "small",
            SizeClass::SevilleLike => "seville-like",
        }
    }
}

/// Deterministic corridor-shaped instance for `seed`.
pub fn generate_synthetic(seed: u64, size: SizeClass) -> Result<TransitInstance, InstanceError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match size {
        SizeClass::Tiny => corridor(&mut rng, seed, size, CorridorShape::TINY),
        SizeClass::Small => corridor(&mut rng, seed, size, CorridorShape::SMALL),
        SizeClass::SevilleLike => seville_like(&mut rng, seed),
    }
}

struct CorridorShape {
    rapid_nodes: (usize, usize),
    slow_only_nodes: (usize, usize),
    shared: (usize, usize),
    centroids: (usize, usize),
    pairs: (usize, usize),
    length: f64,
    utility_factor: f64,
}

impl CorridorShape {
    const TINY: CorridorShape = CorridorShape {
        rapid_nodes: (5, 6),
        slow_only_nodes: (2, 3),
        shared: (2, 3),
        centroids: (4, 6),
        pairs: (5, 10),
        length: 4000.0,
        utility_factor: 3.0,
    };
    const SMALL: CorridorShape = CorridorShape {
        rapid_nodes: (9, 11),
        slow_only_nodes: (7, 9),
        shared: (4, 5),
        centroids: (8, 10),
        pairs: (20, 30),
        length: 8000.0,
        utility_factor: 3.0,
    };
}

struct Builder {
    nodes: Vec<Node>,
    edges: Vec<Edge>,
    index: HashMap<(usize, usize), usize>,
}

impl Builder {
    fn node(&mut self, x: f64, y: f64) -> usize {
        let id = self.nodes.len();
        self.nodes.push(Node {
            id,
            position: [x, y],
            in_rapid: false,
            in_slow: false,
            rapid_origin: false,
            rapid_dest: false,
            slow_origin: false,
            slow_dest: false,
        });
        id
    }

    /// Adds (or extends) the edge between `a` and `b` in the given mode.
    fn edge(&mut self, a: usize, b: usize, rapid: bool) -> usize {
        let key = (a.min(b), a.max(b));
        let id = match self.index.get(&key) {
            Some(&id) => id,
            None => {
                let id = self.edges.len();
                let len = distance(self.nodes[a].position, self.nodes[b].position);
                self.edges.push(Edge {
                    id,
                    endpoints: [key.0, key.1],
                    in_rapid: false,
                    in_slow: false,
                    length: (len * 10.0).round() / 10.0,
                    on_old_slow_line: false,
                });
                self.index.insert(key, id);
                id
            }
        };
        if rapid {
            self.edges[id].in_rapid = true;
        } else {
            self.edges[id].in_slow = true;
        }
        id
    }

    fn has_edge(&self, a: usize, b: usize, rapid: bool) -> bool {
        self.index
            .get(&(a.min(b), a.max(b)))
            .is_some_and(|&e| if rapid { self.edges[e].in_rapid } else { self.edges[e].in_slow })
    }

    /// Edge path (BFS, fewest edges) from any of `from` to any of `to` in a mode.
    fn shortest_path(&self, from: &[usize], to: &[usize], rapid: bool) -> Option<Vec<usize>> {
        let mut prev: HashMap<usize, (usize, usize)> = HashMap::new();
        let mut queue: VecDeque<usize> = from.iter().copied().collect();
        let mut seen: Vec<bool> = vec![false; self.nodes.len()];
        for &s in from {
            seen[s] = true;
        }
        while let Some(v) = queue.pop_front() {
            if to.contains(&v) {
                let mut path = Vec::new();
                let mut cur = v;
                while let Some(&(p, e)) = prev.get(&cur) {
                    path.push(e);
                    cur = p;
                }
                path.reverse();
                return Some(path);
            }
            for e in &self.edges {
                let member = if rapid { e.in_rapid } else { e.in_slow };
                if !member || !e.endpoints.contains(&v) {
                    continue;
                }
                let w = if e.endpoints[0] == v { e.endpoints[1] } else { e.endpoints[0] };
                if !seen[w] {
                    seen[w] = true;
                    prev.insert(w, (v, e.id));
                    queue.push_back(w);
                }
            }
        }
        None
    }
}

fn round1(v: f64) -> f64 {
    (v * 10.0).round() / 10.0
}

fn corridor(rng: &mut ChaCha8Rng, seed: u64, size: SizeClass, shape: CorridorShape) -> Result<TransitInstance, InstanceError> {
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        index: HashMap::new(),
    };
    let len = shape.length;
    let n_r = rng.gen_range(shape.rapid_nodes.0..=shape.rapid_nodes.1);
    let step = len / (n_r - 1) as f64;

    // Rapid nodes along the corridor axis; the first is the only rapid origin
    // and the last the only rapid destination.
    let mut rapid = Vec::new();
    for i in 0..n_r {
        let x = round1(i as f64 * step + rng.gen_range(-0.12..0.12) * step);
        let y = round1(rng.gen_range(-250.0..250.0));
        let id = b.node(x, y);
        b.nodes[id].in_rapid = true;
        rapid.push(id);
    }
    b.nodes[rapid[0]].rapid_origin = true;
    b.nodes[rapid[n_r - 1]].rapid_dest = true;
    let mid: Vec<usize> = rapid[1..n_r - 1].to_vec();

    // Non-terminal rapid subgraph: a tree hanging on the previous one or two nodes.
    for i in 1..mid.len() {
        let back = if i >= 2 && rng.gen_bool(0.3) { 2 } else { 1 };
        b.edge(mid[i - back], mid[i], true);
    }
    b.edge(rapid[0], mid[0], true);
    if mid.len() > 1 && rng.gen_bool(0.5) {
        b.edge(rapid[0], mid[1], true);
    }
    b.edge(*mid.last().unwrap(), rapid[n_r - 1], true);
    if mid.len() > 1 && rng.gen_bool(0.5) {
        b.edge(mid[mid.len() - 2], rapid[n_r - 1], true);
    }

    // Shared (transfer) nodes: a few interior rapid nodes.
    let n_shared = rng.gen_range(shape.shared.0..=shape.shared.1).min(mid.len());
    let mut shared: Vec<usize> = mid.choose_multiple(rng, n_shared).copied().collect();
    shared.sort_unstable();
    for &s in &shared {
        b.nodes[s].in_slow = true;
    }

    // Slow-only nodes off the axis, plus two slow terminals at the ends.
    let n_so = rng.gen_range(shape.slow_only_nodes.0..=shape.slow_only_nodes.1);
    let mut slow_mid: Vec<usize> = shared.clone();
    for _ in 0..n_so {
        let x = round1(rng.gen_range(0.1..0.9) * len);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let y = round1(side * rng.gen_range(350.0..750.0));
        let id = b.node(x, y);
        b.nodes[id].in_slow = true;
        slow_mid.push(id);
    }
    slow_mid.sort_by(|&p, &q| b.nodes[p].position[0].total_cmp(&b.nodes[q].position[0]).then(p.cmp(&q)));
    let so = b.node(round1(rng.gen_range(-300.0..0.0)), round1(rng.gen_range(400.0..700.0)));
    let sd = b.node(round1(len + rng.gen_range(0.0..300.0)), round1(-rng.gen_range(400.0..700.0)));
    for t in [so, sd] {
        b.nodes[t].in_slow = true;
    }
    b.nodes[so].slow_origin = true;
    b.nodes[sd].slow_dest = true;

    // Non-terminal slow subgraph: again a tree (reusing rapid edges between
    // shared nodes when both modes would connect them).
    for i in 1..slow_mid.len() {
        let back = if i >= 2 && rng.gen_bool(0.35) { 2 } else { 1 };
        let (p, q) = (slow_mid[i - back], slow_mid[i]);
        b.edge(p, q, false);
    }
    b.edge(so, slow_mid[0], false);
    if slow_mid.len() > 1 && rng.gen_bool(0.5) {
        b.edge(so, slow_mid[1], false);
    }
    let last = slow_mid.len() - 1;
    b.edge(slow_mid[last], sd, false);
    if last >= 1 && rng.gen_bool(0.5) {
        b.edge(slow_mid[last - 1], sd, false);
    }
    let old = b
        .shortest_path(&[so], &[sd], false)
        .expect("slow terminals are connected");
    for &e in &old {
        b.edges[e].on_old_slow_line = true;
    }
    let rapid_path = b
        .shortest_path(&[rapid[0]], &[rapid[n_r - 1]], true)
        .expect("rapid terminals are connected");

    // Centroids scattered around stations; pairs between distant centroids.
    let n_c = rng.gen_range(shape.centroids.0..=shape.centroids.1);
    let mut centroids = Vec::new();
    let all_nodes: Vec<usize> = (0..b.nodes.len()).collect();
    while centroids.len() < n_c {
        let &anchor = all_nodes.choose(rng).unwrap();
        let r = rng.gen_range(80.0..330.0);
        let phi = rng.gen_range(0.0..std::f64::consts::TAU);
        let p = [
            round1(b.nodes[anchor].position[0] + r * phi.cos()),
            round1(b.nodes[anchor].position[1] + r * phi.sin()),
        ];
        if b.nodes.iter().any(|n| distance(n.position, p) < 1.0) {
            continue;
        }
        centroids.push(Centroid { id: centroids.len(), position: p });
    }
    let mut candidates: Vec<(usize, usize)> = Vec::new();
    for o in 0..n_c {
        for d in 0..n_c {
            if o != d && distance(centroids[o].position, centroids[d].position) >= 0.25 * len {
                candidates.push((o, d));
            }
        }
    }
    candidates.shuffle(rng);
    let n_pairs = rng.gen_range(shape.pairs.0..=shape.pairs.1).min(candidates.len());
    let mut chosen = candidates[..n_pairs].to_vec();
    chosen.sort_unstable();
    let demands: Vec<DemandPair> = chosen
        .iter()
        .enumerate()
        .map(|(i, &(o, d))| DemandPair {
            id: i,
            origin: o,
            dest: d,
            demand: rng.gen_range(1..=100) as f64,
            private_utility: None,
        })
        .collect();

    let max_rapid = (rapid_path.len() + rng.gen_range(0..=2)).min(n_r - 1);
    let slow_nodes = b.nodes.iter().filter(|n| n.in_slow).count();
    let max_slow = (old.len() + rng.gen_range(0..=3)).min(slow_nodes - 1);
    let params = InstanceParams {
        max_rapid_edges: max_rapid,
        max_slow_edges: max_slow,
        min_unchanged_slow_edges: rng.gen_range(1..=2).min(old.len()),
        private_utility_factor: shape.utility_factor,
        ..Default::default()
    };
    TransitInstance::from_parts(
        format!("{}-{seed}", size.label()),
        params,
        b.nodes,
        b.edges,
        centroids,
        demands,
        None,
    )
}

/// Roughly 97 nodes (36 rapid, 87 slow, 26 shared), 247 edges and 73
/// centroids with all 73·72 ordered pairs.
fn seville_like(rng: &mut ChaCha8Rng, seed: u64) -> Result<TransitInstance, InstanceError> {
    const SHARED: usize = 26;
    const RAPID_ONLY: usize = 10;
    const SLOW_ONLY: usize = 61;
    const CENTROIDS: usize = 73;
    let (w, h) = (12000.0, 5000.0);
    let mut b = Builder {
        nodes: Vec::new(),
        edges: Vec::new(),
        index: HashMap::new(),
    };
    let spaced = |rng: &mut ChaCha8Rng, b: &Builder, min_gap: f64| -> [f64; 2] {
        loop {
            let p = [round1(rng.gen_range(0.0..w)), round1(rng.gen_range(-h / 2.0..h / 2.0))];
            if b.nodes.iter().all(|n| distance(n.position, p) >= min_gap) {
                return p;
            }
        }
    };
    for i in 0..SHARED + RAPID_ONLY + SLOW_ONLY {
        let p = if i < SHARED + RAPID_ONLY {
            // Rapid candidates stay near the corridor axis.
            loop {
                let p = spaced(rng, &b, 300.0);
                if p[1].abs() < h / 3.0 {
                    break p;
                }
            }
        } else {
            spaced(rng, &b, 250.0)
        };
        let id = b.node(p[0], p[1]);
        b.nodes[id].in_rapid = i < SHARED + RAPID_ONLY;
        b.nodes[id].in_slow = !(SHARED..SHARED + RAPID_ONLY).contains(&i);
    }
    let rapid: Vec<usize> = (0..b.nodes.len()).filter(|&i| b.nodes[i].in_rapid).collect();
    let slow: Vec<usize> = (0..b.nodes.len()).filter(|&i| b.nodes[i].in_slow).collect();

    let knn = |b: &Builder, set: &[usize], v: usize, k: usize| -> Vec<usize> {
        let mut others: Vec<usize> = set.iter().copied().filter(|&u| u != v).collect();
        others.sort_by(|&p, &q| {
            distance(b.nodes[v].position, b.nodes[p].position)
                .total_cmp(&distance(b.nodes[v].position, b.nodes[q].position))
                .then(p.cmp(&q))
        });
        others.truncate(k);
        others
    };
    // Shared edges first: nearest shared neighbours.
    let shared_nodes: Vec<usize> = (0..SHARED).collect();
    let mut n_shared_edges = 0;
    'outer: for &v in &shared_nodes {
        for u in knn(&b, &shared_nodes, v, 1) {
            if n_shared_edges >= 17 {
                break 'outer;
            }
            if !b.has_edge(v, u, true) {
                b.edge(v, u, true);
                b.edge(v, u, false);
                n_shared_edges += 1;
            }
        }
    }
    for &v in &rapid {
        for u in knn(&b, &rapid, v, 3) {
            if b.edges.iter().filter(|e| e.in_rapid).count() < 75 && !b.has_edge(v, u, true) {
                b.edge(v, u, true);
            }
        }
    }
    for k in [2usize, 3, 4, 5] {
        for &v in &slow {
            for u in knn(&b, &slow, v, k) {
                if b.edges.iter().filter(|e| e.in_slow).count() < 189 && !b.has_edge(v, u, false) {
                    b.edge(v, u, false);
                }
            }
        }
    }

    // Terminals: westmost / eastmost candidates of each mode.
    let by_x = |set: &[usize], b: &Builder| -> Vec<usize> {
        let mut s = set.to_vec();
        s.sort_by(|&p, &q| b.nodes[p].position[0].total_cmp(&b.nodes[q].position[0]).then(p.cmp(&q)));
        s
    };
    let rx = by_x(&rapid, &b);
    let sx = by_x(&slow, &b);
    for &v in &rx[..2] {
        b.nodes[v].rapid_origin = true;
    }
    for &v in &rx[rx.len() - 2..] {
        b.nodes[v].rapid_dest = true;
    }
    b.nodes[sx[0]].slow_origin = true;
    b.nodes[sx[sx.len() - 1]].slow_dest = true;
    let old = b
        .shortest_path(&[sx[0]], &[sx[sx.len() - 1]], false)
        .expect("slow network connected");
    for &e in &old {
        b.edges[e].on_old_slow_line = true;
    }

    let mut centroids = Vec::new();
    while centroids.len() < CENTROIDS {
        let p = [round1(rng.gen_range(0.0..w)), round1(rng.gen_range(-h / 2.0..h / 2.0))];
        if b.nodes.iter().all(|n| distance(n.position, p) >= 1.0) {
            centroids.push(Centroid { id: centroids.len(), position: p });
        }
    }
    let mut demands = Vec::new();
    for o in 0..CENTROIDS {
        for d in 0..CENTROIDS {
            if o == d {
                continue;
            }
            // Heavy-tailed counts in [0, 465] with a few zeros.
            let u: f64 = rng.gen();
            let g = if rng.gen_bool(0.05) { 0.0 } else { (465.0 * u.powi(6)).round() };
            demands.push(DemandPair {
                id: demands.len(),
                origin: o,
                dest: d,
                demand: g,
                private_utility: None,
            });
        }
    }
    let params = InstanceParams {
        min_unchanged_slow_edges: 2.min(old.len()),
        ..Default::default()
    };
    let mut inst = TransitInstance::from_parts(
        format!("seville-like-{seed}"),
        params,
        b.nodes,
        b.edges,
        centroids,
        Vec::new(),
        None,
    )?;
    // Keep the full 73·72 matrix (zeros included) so the sub-instance
    // filter sees the same pair universe as a survey matrix would.
    inst.demands = demands;
    super::compute_private_utilities(&mut inst, true)?;
    Ok(inst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::Mode;

    #[test]
    fn deterministic() {
        let a = generate_synthetic(1, SizeClass::Tiny).unwrap();
        let b = generate_synthetic(1, SizeClass::Tiny).unwrap();
        assert_eq!(crate::instance::to_json(&a), crate::instance::to_json(&b));
    }

    #[test]
    fn tiny_limits() {
        for seed in 1..=25 {
            let inst = generate_synthetic(seed, SizeClass::Tiny).unwrap();
            assert!(inst.topo.rapid_nodes.len() <= 6);
            assert!(inst.topo.slow_nodes.len() <= 8, "seed {seed}: {}", inst.topo.slow_nodes.len());
            assert!(inst.num_pairs() <= 12);
            assert_eq!(inst.arcs.len(), 2 * inst.topo.rapid_edges.len() + 2 * inst.topo.slow_edges.len());
            for mode in [Mode::Rapid, Mode::Slow] {
                assert!(!inst.origins(mode).is_empty() && !inst.dests(mode).is_empty());
            }
        }
    }

    #[test]
    fn seville_like_counts() {
        let inst = generate_synthetic(2, SizeClass::SevilleLike).unwrap();
        let within = |v: usize, target: f64| (v as f64 - target).abs() <= 0.1 * target;
        assert!(within(inst.nodes.len(), 97.0));
        assert!(within(inst.edges.len(), 247.0), "{}", inst.edges.len());
        assert!(within(inst.centroids.len(), 73.0));
        assert_eq!(inst.demands.len(), 73 * 72);
    }
}
