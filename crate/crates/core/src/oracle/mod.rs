//! Exhaustive ground truth for tiny instances.
//!
//! Candidate lines are simple paths between the terminal sets; every
//! candidate is then filtered by the model's own design rows, so the oracle
//! and the MILP agree on what a feasible line is. Pairs are routed by an
//! exact search over trails in the layered (node, mode) graph.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::formulation::{design_rows, route_time, Design, DesignSolution, Leg, PairRoute, Scope, VarKey};
use crate::instance::{ArcId, EdgeId, Mode, NodeId, PairId, TransitInstance};
use crate::lp::Sense;

pub const DEFAULT_CAP: usize = 1_000_000;
const TOL: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("design space has {count} (rapid, slow) pairs, above the cap of {cap}")]
    CapExceeded { count: usize, cap: usize },
    #[error("no feasible design")]
    NoDesign,
}

/// One mode's line: edges plus stop/non-stop labels.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LineDesign {
    pub edges: Vec<EdgeId>,
    pub stops: Vec<NodeId>,
    pub nonstops: Vec<NodeId>,
}

/// Feasible rapid and slow lines; the design space is their product.
#[derive(Debug, Clone)]
pub struct DesignSpace {
    pub rapid: Vec<LineDesign>,
    pub slow: Vec<LineDesign>,
}

impl DesignSpace {
    pub fn len(&self) -> usize {
        self.rapid.len() * self.slow.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Designs in canonical order (rapid-major).
    pub fn iter(&self) -> impl Iterator<Item = Design> + '_ {
        self.rapid
            .iter()
            .flat_map(move |r| self.slow.iter().map(move |s| combine(r, Some(s))))
    }
}

pub fn combine(rapid: &LineDesign, slow: Option<&LineDesign>) -> Design {
    let mut d = Design {
        rapid_edges: rapid.edges.clone(),
        rapid_stops: rapid.stops.clone(),
        rapid_nonstops: rapid.nonstops.clone(),
        slow_edges: slow.map(|s| s.edges.clone()).unwrap_or_default(),
        slow_stops: slow.map(|s| s.stops.clone()).unwrap_or_default(),
    };
    d.normalize();
    d
}

/// Simple paths from `origins` to `dests` with terminal-free interiors and at
/// most `max_edges` edges, in deterministic order.
fn simple_paths(inst: &TransitInstance, mode: Mode, max_edges: usize) -> Vec<(Vec<NodeId>, Vec<EdgeId>)> {
    let dests = inst.dests(mode);
    let mut out = Vec::new();
    for o in inst.origins(mode) {
        let mut nodes = vec![o];
        let mut edges = Vec::new();
        extend_paths(inst, mode, max_edges, &dests, &mut nodes, &mut edges, &mut out);
    }
    out
}

fn extend_paths(
    inst: &TransitInstance,
    mode: Mode,
    max_edges: usize,
    dests: &[NodeId],
    nodes: &mut Vec<NodeId>,
    edges: &mut Vec<EdgeId>,
    out: &mut Vec<(Vec<NodeId>, Vec<EdgeId>)>,
) {
    if edges.len() >= max_edges {
        return;
    }
    let cur = *nodes.last().unwrap();
    for &e in inst.incident(cur, mode) {
        let next = inst.other_end(e, cur);
        if nodes.contains(&next) {
            continue;
        }
        nodes.push(next);
        edges.push(e);
        if dests.contains(&next) {
            out.push((nodes.clone(), edges.clone()));
        } else if !inst.is_terminal(next, mode) {
            extend_paths(inst, mode, max_edges, dests, nodes, edges, out);
        }
        nodes.pop();
        edges.pop();
    }
}

fn rows_hold(rows: &[crate::formulation::KeyedRow], value: impl Fn(VarKey) -> f64) -> bool {
    rows.iter().all(|r| {
        let act = r.activity(&value);
        match r.sense {
            Sense::Le => act <= r.rhs + 1e-9,
            Sense::Ge => act >= r.rhs - 1e-9,
            Sense::Eq => (act - r.rhs).abs() <= 1e-9,
        }
    })
}

fn line_value(line: &LineDesign, mode: Mode, key: VarKey) -> f64 {
    let hit = match (mode, key) {
        (Mode::Rapid, VarKey::XR(e)) | (Mode::Slow, VarKey::XS(e)) => line.edges.contains(&e),
        (Mode::Rapid, VarKey::ZR(i)) | (Mode::Slow, VarKey::ZS(i)) => line.stops.contains(&i),
        (Mode::Rapid, VarKey::YR(i)) => line.nonstops.contains(&i),
        _ => false,
    };
    if hit {
        1.0
    } else {
        0.0
    }
}

fn mode_rows(inst: &TransitInstance, mode: Mode) -> Vec<crate::formulation::KeyedRow> {
    design_rows(inst, Scope::FULL)
        .into_iter()
        .filter(|r| {
            r.coeffs.iter().all(|(k, _)| match mode {
                Mode::Rapid => matches!(k, VarKey::XR(_) | VarKey::ZR(_) | VarKey::YR(_)),
                Mode::Slow => matches!(k, VarKey::XS(_) | VarKey::ZS(_)),
            })
        })
        .collect()
}

/// Every feasible line of one mode.
pub fn enumerate_lines(inst: &TransitInstance, mode: Mode) -> Vec<LineDesign> {
    let rows = mode_rows(inst, mode);
    let budget = match mode {
        Mode::Rapid => inst.params.max_rapid_edges,
        Mode::Slow => inst.params.max_slow_edges,
    };
    let mut lines = Vec::new();
    for (nodes, edges) in simple_paths(inst, mode, budget) {
        let interior = &nodes[1..nodes.len() - 1];
        let labelings = if mode == Mode::Rapid { 1usize << interior.len() } else { 1 };
        for mask in 0..labelings {
            // Bit set = non-stop.
            let mut stops = vec![nodes[0], *nodes.last().unwrap()];
            let mut nonstops = Vec::new();
            for (b, &k) in interior.iter().enumerate() {
                if mask >> b & 1 == 1 {
                    nonstops.push(k);
                } else {
                    stops.push(k);
                }
            }
            let mut line = LineDesign {
                edges: edges.clone(),
                stops,
                nonstops,
            };
            line.edges.sort_unstable();
            line.stops.sort_unstable();
            line.nonstops.sort_unstable();
            if rows_hold(&rows, |k| line_value(&line, mode, k)) {
                lines.push(line);
            }
        }
    }
    lines
}

pub fn enumerate_designs(inst: &TransitInstance) -> Result<DesignSpace, OracleError> {
    enumerate_designs_capped(inst, DEFAULT_CAP)
}

pub fn enumerate_designs_capped(inst: &TransitInstance, cap: usize) -> Result<DesignSpace, OracleError> {
    let rapid = enumerate_lines(inst, Mode::Rapid);
    let slow = enumerate_lines(inst, Mode::Slow);
    let count = rapid.len().saturating_mul(slow.len());
    if count > cap {
        return Err(OracleError::CapExceeded { count, cap });
    }
    Ok(DesignSpace { rapid, slow })
}

/// Built arcs and transfer stations of a design, indexed for the search.
struct Network<'a> {
    inst: &'a TransitInstance,
    design: &'a Design,
    out: HashMap<(NodeId, Mode), Vec<ArcId>>,
    slow: bool,
}

impl<'a> Network<'a> {
    fn new(inst: &'a TransitInstance, design: &'a Design, slow: bool) -> Self {
        let mut out: HashMap<(NodeId, Mode), Vec<ArcId>> = HashMap::new();
        let modes: &[Mode] = if slow { &[Mode::Rapid, Mode::Slow] } else { &[Mode::Rapid] };
        for &mode in modes {
            for &e in design.edges(mode) {
                for &a in &inst.topo.edge_arcs[&(e, mode)] {
                    out.entry((inst.arcs[a].tail, mode)).or_default().push(a);
                }
            }
        }
        Network { inst, design, out, slow }
    }

    fn can_transfer(&self, k: NodeId) -> bool {
        self.slow && self.design.is_stop(k, Mode::Rapid) && self.design.is_stop(k, Mode::Slow)
    }
}

struct Dfs<'a, 'b> {
    net: &'b Network<'a>,
    w: PairId,
    used: Vec<bool>,
    legs: Vec<Leg>,
    best: Option<(f64, Vec<Leg>)>,
    limit: f64,
}

impl Dfs<'_, '_> {
    fn ride_time(&self, a: ArcId, mode: Mode) -> f64 {
        let inst = self.net.inst;
        let p = &inst.params;
        let arc = &inst.arcs[a];
        let dwell = if self.net.design.is_stop(arc.tail, mode) {
            match mode {
                Mode::Rapid => p.stop_time_rapid,
                Mode::Slow => p.stop_time_slow,
            }
        } else {
            0.0
        };
        arc.traverse_time + dwell
    }

    fn bound(&self) -> f64 {
        self.best.as_ref().map_or(self.limit, |b| b.0.min(self.limit))
    }

    fn visit(&mut self, state: (NodeId, Mode), time: f64, sr: bool, rs: bool) {
        let inst = self.net.inst;
        let d = &inst.demands[self.w];
        // Alight here?
        if self.net.design.is_stop(state.0, state.1) {
            if let Some(walk) = inst.walk_time(d.dest, state.0, state.1) {
                let total = time + walk;
                let better = match &self.best {
                    None => total <= self.limit,
                    Some((b, _)) => total < *b - 1e-12,
                };
                if better {
                    self.legs.push(Leg::WalkOut {
                        station: state.0,
                        mode: state.1,
                        time: walk,
                    });
                    if arc_set_ok(inst, &self.legs) {
                        self.best = Some((total, self.legs.clone()));
                    }
                    self.legs.pop();
                }
            }
        }
        let arcs = self.net.out.get(&state).cloned().unwrap_or_default();
        for a in arcs {
            let e = inst.arcs[a].edge;
            if self.used[e] {
                continue;
            }
            let t = time + self.ride_time(a, state.1);
            if t > self.bound() + TOL {
                continue;
            }
            self.used[e] = true;
            self.legs.push(Leg::Ride { arc: a, mode: state.1 });
            self.visit((inst.arcs[a].head, state.1), t, sr, rs);
            self.legs.pop();
            self.used[e] = false;
        }
        if self.net.can_transfer(state.0) {
            let here = self
                .legs
                .iter()
                .any(|l| matches!(l, Leg::Transfer { node, .. } if *node == state.0));
            if !here {
                let p = &inst.params;
                let (to, dt, allowed) = match state.1 {
                    Mode::Rapid => (Mode::Slow, p.transfer_time_rs, !rs),
                    Mode::Slow => (Mode::Rapid, p.transfer_time_sr, !sr),
                };
                if allowed && time + dt <= self.bound() + TOL {
                    self.legs.push(Leg::Transfer {
                        node: state.0,
                        from: state.1,
                        to,
                    });
                    let (sr2, rs2) = if to == Mode::Rapid { (true, rs) } else { (sr, true) };
                    self.visit((state.0, to), time + dt, sr2, rs2);
                    self.legs.pop();
                }
            }
        }
    }
}

/// Node-level conditions of the flow and transfer rows on a complete leg list
/// (boarding needs a departing ride, alighting an arriving ride, a transfer a
/// ride on each side, and the optional shape rule).
fn arc_set_ok(inst: &TransitInstance, legs: &[Leg]) -> bool {
    let rides: Vec<(ArcId, Mode)> = legs
        .iter()
        .filter_map(|l| match *l {
            Leg::Ride { arc, mode } => Some((arc, mode)),
            _ => None,
        })
        .collect();
    let leaves = |k: NodeId, mode: Mode| rides.iter().any(|&(a, m)| m == mode && inst.arcs[a].tail == k);
    let enters = |k: NodeId, mode: Mode| rides.iter().any(|&(a, m)| m == mode && inst.arcs[a].head == k);
    for leg in legs {
        let ok = match *leg {
            Leg::WalkIn { station, mode, .. } => leaves(station, mode),
            Leg::WalkOut { station, mode, .. } => enters(station, mode),
            Leg::Transfer { node, to: Mode::Slow, .. } => leaves(node, Mode::Slow) && enters(node, Mode::Rapid),
            Leg::Transfer { node, to: Mode::Rapid, .. } => enters(node, Mode::Slow) && leaves(node, Mode::Rapid),
            Leg::Ride { .. } => true,
        };
        if !ok {
            return false;
        }
    }
    if inst.params.enable_shape_constraints {
        for &(a, ma) in &rides {
            if ma != Mode::Rapid {
                continue;
            }
            let k = inst.arcs[a].head;
            for &(b, mb) in &rides {
                if mb == Mode::Rapid
                    && inst.arcs[b].tail == k
                    && crate::formulation::turn_is_acute(
                        inst.nodes[k].position,
                        inst.nodes[inst.arcs[a].tail].position,
                        inst.nodes[inst.arcs[b].head].position,
                    )
                {
                    return false;
                }
            }
        }
    }
    true
}

/// Fastest admissible route of pair `w` on `design`, if its time is within
/// the pair's private utility.
pub fn best_routing(inst: &TransitInstance, design: &Design, w: PairId) -> Option<PairRoute> {
    best_routing_scoped(inst, design, w, true)
}

/// As [`best_routing`]; with `slow = false` only the rapid line is usable.
pub fn best_routing_scoped(inst: &TransitInstance, design: &Design, w: PairId, slow: bool) -> Option<PairRoute> {
    let net = Network::new(inst, design, slow);
    let d = &inst.demands[w];
    let p = &inst.params;
    let mut dfs = Dfs {
        net: &net,
        w,
        used: vec![false; inst.edges.len()],
        legs: Vec::new(),
        best: None,
        limit: d.utility() + TOL,
    };
    let modes: &[Mode] = if slow { &[Mode::Rapid, Mode::Slow] } else { &[Mode::Rapid] };
    for &mode in modes {
        for &k in design.stops(mode) {
            let Some(walk) = inst.walk_time(d.origin, k, mode) else { continue };
            let t0 = walk + p.wait_time - 0.5 * p.stop_time_rapid;
            dfs.legs.push(Leg::WalkIn {
                station: k,
                mode,
                time: walk,
            });
            dfs.visit((k, mode), t0, false, false);
            dfs.legs.pop();
        }
    }
    dfs.best.map(|(_, legs)| {
        let time = route_time(inst, design, &legs);
        PairRoute {
            pair: w,
            covered: true,
            legs,
            time,
        }
    })
}

/// Routes every pair on a fixed design.
pub fn evaluate_design(inst: &TransitInstance, design: &Design) -> DesignSolution {
    evaluate_scoped(inst, design, true)
}

fn evaluate_scoped(inst: &TransitInstance, design: &Design, slow: bool) -> DesignSolution {
    let routes = (0..inst.num_pairs())
        .map(|w| best_routing_scoped(inst, design, w, slow).unwrap_or_else(|| PairRoute::uncovered(w)))
        .collect();
    DesignSolution::new(inst, design.clone(), routes)
}

/// Coverage of a design without building routes.
fn coverage(inst: &TransitInstance, design: &Design, slow: bool) -> f64 {
    (0..inst.num_pairs())
        .filter(|&w| best_routing_scoped(inst, design, w, slow).is_some())
        .map(|w| inst.demands[w].demand)
        .sum::<f64>()
        + 0.0
}

/// Maximum coverage over all designs; ties go to the first design in
/// enumeration order.
pub fn solve_exact(inst: &TransitInstance) -> Result<(f64, DesignSolution), OracleError> {
    let space = enumerate_designs(inst)?;
    let mut best: Option<(f64, Design)> = None;
    for design in space.iter() {
        let v = coverage(inst, &design, true);
        if best.as_ref().is_none_or(|b| v > b.0 + 1e-9) {
            best = Some((v, design));
        }
    }
    let (v, design) = best.ok_or(OracleError::NoDesign)?;
    Ok((v, evaluate_design(inst, &design)))
}

#[derive(Debug, Clone)]
pub struct SequentialOutcome {
    /// Best rapid-only coverage.
    pub stage1_value: f64,
    /// Every rapid line attaining it, in enumeration order.
    pub stage1_optima: Vec<LineDesign>,
    /// Joint coverage after refitting the slow line for each stage-1 optimum.
    pub stage2_values: Vec<f64>,
    /// Solution for the first stage-1 optimum.
    pub solution: DesignSolution,
}

/// Sequential baseline by enumeration: rapid line alone first, then the best
/// slow line given it.
pub fn solve_sequential_exact(inst: &TransitInstance) -> Result<SequentialOutcome, OracleError> {
    let space = enumerate_designs(inst)?;
    let mut stage1_value = f64::NEG_INFINITY;
    let mut optima: Vec<LineDesign> = Vec::new();
    for r in &space.rapid {
        let v = coverage(inst, &combine(r, None), false);
        if v > stage1_value + 1e-9 {
            stage1_value = v;
            optima = vec![r.clone()];
        } else if (v - stage1_value).abs() <= 1e-9 {
            optima.push(r.clone());
        }
    }
    if optima.is_empty() || space.slow.is_empty() {
        return Err(OracleError::NoDesign);
    }
    let mut stage2_values = Vec::new();
    let mut first: Option<Design> = None;
    for r in &optima {
        let mut best: Option<(f64, Design)> = None;
        for s in &space.slow {
            let design = combine(r, Some(s));
            let v = coverage(inst, &design, true);
            if best.as_ref().is_none_or(|b| v > b.0 + 1e-9) {
                best = Some((v, design));
            }
        }
        let (v, design) = best.unwrap();
        stage2_values.push(v);
        if first.is_none() {
            first = Some(design);
        }
    }
    let solution = evaluate_design(inst, &first.unwrap());
    Ok(SequentialOutcome {
        stage1_value,
        stage1_optima: optima,
        stage2_values,
        solution,
    })
}

#[cfg(test)]
mod tests;
