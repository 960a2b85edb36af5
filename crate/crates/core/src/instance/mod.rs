//! Problem instances: networks, centroids, demand and parameters.

mod generate;
mod io;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use generate::{generate_synthetic, SizeClass};
pub use io::{load_instance, parse_instance, save_instance, to_json, InstanceError};

pub type NodeId = usize;
pub type EdgeId = usize;
pub type ArcId = usize;
pub type CentroidId = usize;
pub type PairId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Rapid,
    Slow,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Rapid => "R",
            Mode::Slow => "S",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub id: NodeId,
    pub position: [f64; 2],
    #[serde(default)]
    pub in_rapid: bool,
    #[serde(default)]
    pub in_slow: bool,
    #[serde(default)]
    pub rapid_origin: bool,
    #[serde(default)]
    pub rapid_dest: bool,
    #[serde(default)]
    pub slow_origin: bool,
    #[serde(default)]
    pub slow_dest: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub id: EdgeId,
    pub endpoints: [NodeId; 2],
    #[serde(default)]
    pub in_rapid: bool,
    #[serde(default)]
    pub in_slow: bool,
    pub length: f64,
    #[serde(default)]
    pub on_old_slow_line: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Arc {
    pub id: ArcId,
    pub edge: EdgeId,
    pub tail: NodeId,
    pub head: NodeId,
    pub mode: Mode,
    /// Minutes.
    pub traverse_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub id: CentroidId,
    pub position: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandPair {
    pub id: PairId,
    pub origin: CentroidId,
    pub dest: CentroidId,
    pub demand: f64,
    /// Minutes. Computed from the private speed when absent in the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub private_utility: Option<f64>,
}

impl DemandPair {
    pub fn utility(&self) -> f64 {
        self.private_utility.expect("private utility computed at load time")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkLink {
    pub centroid: CentroidId,
    pub station: NodeId,
    pub mode: Mode,
    /// Minutes.
    pub walk_time: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InstanceParams {
    pub max_rapid_edges: usize,
    pub max_slow_edges: usize,
    pub min_unchanged_slow_edges: usize,
    /// Meters.
    pub min_station_spacing: f64,
    pub max_walk_rapid: f64,
    pub max_walk_slow: f64,
    /// km/h.
    pub walk_speed: f64,
    pub rapid_speed: f64,
    pub slow_speed: f64,
    pub private_speed: f64,
    /// Minutes.
    pub transfer_time_rs: f64,
    pub transfer_time_sr: f64,
    pub stop_time_rapid: f64,
    pub stop_time_slow: f64,
    pub wait_time: f64,
    pub private_utility_factor: f64,
    pub enable_shape_constraints: bool,
}

impl Default for InstanceParams {
    fn default() -> Self {
        InstanceParams {
            max_rapid_edges: 11,
            max_slow_edges: 16,
            min_unchanged_slow_edges: 2,
            min_station_spacing: 500.0,
            max_walk_rapid: 400.0,
            max_walk_slow: 300.0,
            walk_speed: 5.0,
            rapid_speed: 70.0,
            slow_speed: 25.0,
            private_speed: 30.0,
            transfer_time_rs: 9.5,
            transfer_time_sr: 5.5,
            stop_time_rapid: 0.5,
            stop_time_slow: 1.0,
            wait_time: 2.0,
            private_utility_factor: 2.0,
            enable_shape_constraints: false,
        }
    }
}

/// Minutes needed to cover `meters` at `kmh`.
pub fn travel_minutes(meters: f64, kmh: f64) -> f64 {
    meters / (kmh * 1000.0 / 60.0)
}

pub fn distance(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// A validated instance with derived arcs, walk links and lookup tables.
/// Immutable after construction.
#[derive(Debug, Clone)]
pub struct TransitInstance {
    pub name: String,
    pub params: InstanceParams,
    pub nodes: Vec<Node>,
    pub edges: Vec<Edge>,
    pub arcs: Vec<Arc>,
    pub centroids: Vec<Centroid>,
    pub demands: Vec<DemandPair>,
    pub walk_links: Vec<WalkLink>,
    /// Whether the walk links were given explicitly (kept on save).
    pub explicit_walk_links: bool,
    pub topo: Topology,
}

/// Index sets used by the formulation, the oracle and the checker.
#[derive(Debug, Clone, Default)]
pub struct Topology {
    pub rapid_nodes: Vec<NodeId>,
    pub slow_nodes: Vec<NodeId>,
    pub trans_nodes: Vec<NodeId>,
    pub rapid_edges: Vec<EdgeId>,
    pub slow_edges: Vec<EdgeId>,
    pub rapid_arcs: Vec<ArcId>,
    pub slow_arcs: Vec<ArcId>,
    /// Arc ids of the two directions of each edge in a mode, keyed by (edge, mode).
    pub edge_arcs: HashMap<(EdgeId, Mode), [ArcId; 2]>,
    /// Outgoing / incoming arcs per (node, mode).
    pub out_arcs: HashMap<(NodeId, Mode), Vec<ArcId>>,
    pub in_arcs: HashMap<(NodeId, Mode), Vec<ArcId>>,
    /// Incident edges per (node, mode).
    pub incident: HashMap<(NodeId, Mode), Vec<EdgeId>>,
    /// Walk time keyed by (centroid, station, mode).
    pub walk: HashMap<(CentroidId, NodeId, Mode), f64>,
}

impl Topology {
    fn build(nodes: &[Node], edges: &[Edge], arcs: &[Arc], links: &[WalkLink]) -> Self {
        let mut t = Topology {
            rapid_nodes: nodes.iter().filter(|n| n.in_rapid).map(|n| n.id).collect(),
            slow_nodes: nodes.iter().filter(|n| n.in_slow).map(|n| n.id).collect(),
            trans_nodes: nodes.iter().filter(|n| n.in_rapid && n.in_slow).map(|n| n.id).collect(),
            rapid_edges: edges.iter().filter(|e| e.in_rapid).map(|e| e.id).collect(),
            slow_edges: edges.iter().filter(|e| e.in_slow).map(|e| e.id).collect(),
            ..Default::default()
        };
        for a in arcs {
            match a.mode {
                Mode::Rapid => t.rapid_arcs.push(a.id),
                Mode::Slow => t.slow_arcs.push(a.id),
            }
            let entry = t.edge_arcs.entry((a.edge, a.mode)).or_insert([usize::MAX; 2]);
            if entry[0] == usize::MAX {
                entry[0] = a.id;
            } else {
                entry[1] = a.id;
            }
            t.out_arcs.entry((a.tail, a.mode)).or_default().push(a.id);
            t.in_arcs.entry((a.head, a.mode)).or_default().push(a.id);
        }
        for e in edges {
            for (flag, mode) in [(e.in_rapid, Mode::Rapid), (e.in_slow, Mode::Slow)] {
                if flag {
                    for &v in &e.endpoints {
                        t.incident.entry((v, mode)).or_default().push(e.id);
                    }
                }
            }
        }
        for l in links {
            t.walk.insert((l.centroid, l.station, l.mode), l.walk_time);
        }
        t
    }
}

impl TransitInstance {
    /// Assembles an instance from raw parts: derives arcs, walk links (when
    /// `walk_links` is `None`) and missing private utilities, drops
    /// zero-demand pairs, then validates.
    pub fn from_parts(
        name: String,
        params: InstanceParams,
        nodes: Vec<Node>,
        edges: Vec<Edge>,
        centroids: Vec<Centroid>,
        demands: Vec<DemandPair>,
        walk_links: Option<Vec<WalkLink>>,
    ) -> Result<Self, InstanceError> {
        check_dense("nodes", nodes.iter().map(|n| n.id))?;
        check_dense("edges", edges.iter().map(|e| e.id))?;
        check_dense("centroids", centroids.iter().map(|c| c.id))?;
        check_dense("demands", demands.iter().map(|d| d.id))?;
        for e in &edges {
            for &v in &e.endpoints {
                if v >= nodes.len() {
                    return Err(InstanceError::DanglingId {
                        what: format!("edge {}", e.id),
                        id: v,
                    });
                }
            }
        }
        for d in &demands {
            for c in [d.origin, d.dest] {
                if c >= centroids.len() {
                    return Err(InstanceError::DanglingId {
                        what: format!("demand pair {}", d.id),
                        id: c,
                    });
                }
            }
        }
        let explicit = walk_links.is_some();
        if let Some(links) = &walk_links {
            for l in links {
                if l.centroid >= centroids.len() {
                    return Err(InstanceError::DanglingId {
                        what: "walk link".into(),
                        id: l.centroid,
                    });
                }
                if l.station >= nodes.len() {
                    return Err(InstanceError::DanglingId {
                        what: "walk link".into(),
                        id: l.station,
                    });
                }
            }
        }
        let arcs = build_arcs(&params, &edges);
        let mut inst = TransitInstance {
            name,
            params,
            nodes,
            edges,
            arcs,
            centroids,
            demands,
            walk_links: Vec::new(),
            explicit_walk_links: explicit,
            topo: Topology::default(),
        };
        inst.walk_links = match walk_links {
            Some(l) => l,
            None => derive_walk_links(&inst),
        };
        inst.demands.retain(|d| d.demand > 0.0);
        for (i, d) in inst.demands.iter_mut().enumerate() {
            d.id = i;
        }
        compute_private_utilities(&mut inst, false)?;
        inst.topo = Topology::build(&inst.nodes, &inst.edges, &inst.arcs, &inst.walk_links);
        inst.validate()?;
        Ok(inst)
    }

    fn validate(&self) -> Result<(), InstanceError> {
        let inv = |name: &'static str, msg: String| Err(InstanceError::Invariant { invariant: name, message: msg });
        let p = &self.params;
        for (name, v) in [
            ("min_station_spacing", p.min_station_spacing),
            ("max_walk_rapid", p.max_walk_rapid),
            ("max_walk_slow", p.max_walk_slow),
            ("walk_speed", p.walk_speed),
            ("rapid_speed", p.rapid_speed),
            ("slow_speed", p.slow_speed),
            ("private_speed", p.private_speed),
            ("transfer_time_rs", p.transfer_time_rs),
            ("transfer_time_sr", p.transfer_time_sr),
            ("stop_time_rapid", p.stop_time_rapid),
            ("stop_time_slow", p.stop_time_slow),
            ("wait_time", p.wait_time),
            ("private_utility_factor", p.private_utility_factor),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return inv("params_positive", format!("parameter {name} must be positive, got {v}"));
            }
        }
        if p.max_rapid_edges == 0 || p.max_slow_edges == 0 {
            return inv("params_positive", "edge budgets must be positive".into());
        }
        for n in &self.nodes {
            if !n.in_rapid && !n.in_slow {
                return inv("node_mode", format!("node {} belongs to neither network", n.id));
            }
            if (n.rapid_origin || n.rapid_dest) && !n.in_rapid {
                return inv("terminal_mode", format!("node {} is a rapid terminal but not a rapid node", n.id));
            }
            if (n.slow_origin || n.slow_dest) && !n.in_slow {
                return inv("terminal_mode", format!("node {} is a slow terminal but not a slow node", n.id));
            }
        }
        for e in &self.edges {
            let [a, b] = e.endpoints;
            if a == b {
                return inv("edge_loop", format!("edge {} is a loop", e.id));
            }
            if !e.in_rapid && !e.in_slow {
                return inv("edge_mode", format!("edge {} belongs to neither network", e.id));
            }
            if e.in_rapid && !(self.nodes[a].in_rapid && self.nodes[b].in_rapid) {
                return inv("edge_mode", format!("edge {} is rapid but an endpoint is not a rapid node", e.id));
            }
            if e.in_slow && !(self.nodes[a].in_slow && self.nodes[b].in_slow) {
                return inv("edge_mode", format!("edge {} is slow but an endpoint is not a slow node", e.id));
            }
            if !(e.length > 0.0) {
                return inv("edge_length", format!("edge {} has non-positive length", e.id));
            }
            if e.on_old_slow_line && !e.in_slow {
                return inv("old_line_mode", format!("edge {} is on the old slow line but not a slow edge", e.id));
            }
        }
        for (flag, label) in [
            (self.nodes.iter().any(|n| n.rapid_origin), "rapid origin"),
            (self.nodes.iter().any(|n| n.rapid_dest), "rapid destination"),
            (self.nodes.iter().any(|n| n.slow_origin), "slow origin"),
            (self.nodes.iter().any(|n| n.slow_dest), "slow destination"),
        ] {
            if !flag {
                return inv("terminal_sets", format!("the {label} set is empty"));
            }
        }
        let old = self.edges.iter().filter(|e| e.on_old_slow_line).count();
        if p.min_unchanged_slow_edges > old {
            return inv(
                "old_line_overlap",
                format!("min_unchanged_slow_edges {} exceeds the {old} old-line edges", p.min_unchanged_slow_edges),
            );
        }
        if p.min_unchanged_slow_edges > p.max_slow_edges {
            return inv("old_line_overlap", "min_unchanged_slow_edges exceeds max_slow_edges".into());
        }
        for c in &self.centroids {
            if self.nodes.iter().any(|n| n.position == c.position) {
                return inv("centroid_position", format!("centroid {} coincides with a node", c.id));
            }
        }
        for d in &self.demands {
            if d.origin == d.dest {
                return inv("pair_distinct", format!("demand pair {} has origin = destination", d.id));
            }
            if !(d.demand >= 0.0) {
                return inv("demand_nonnegative", format!("demand pair {} has negative demand", d.id));
            }
            if !(d.utility() > 0.0) {
                return inv("utility_positive", format!("demand pair {} has non-positive private utility", d.id));
            }
        }
        for l in &self.walk_links {
            let n = &self.nodes[l.station];
            let ok = match l.mode {
                Mode::Rapid => n.in_rapid,
                Mode::Slow => n.in_slow,
            };
            if !ok {
                return inv("walk_link_mode", format!("walk link to node {} has the wrong mode", l.station));
            }
            if !(l.walk_time >= 0.0) {
                return inv("walk_link_time", "walk time must be non-negative".into());
            }
        }
        Ok(())
    }

    pub fn num_pairs(&self) -> usize {
        self.demands.len()
    }

    pub fn arc(&self, a: ArcId) -> &Arc {
        &self.arcs[a]
    }

    pub fn out_arcs(&self, k: NodeId, mode: Mode) -> &[ArcId] {
        self.topo.out_arcs.get(&(k, mode)).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn in_arcs(&self, k: NodeId, mode: Mode) -> &[ArcId] {
        self.topo.in_arcs.get(&(k, mode)).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn incident(&self, k: NodeId, mode: Mode) -> &[EdgeId] {
        self.topo.incident.get(&(k, mode)).map(|v| v.as_slice()).unwrap_or(&[])
    }

    pub fn walk_time(&self, centroid: CentroidId, station: NodeId, mode: Mode) -> Option<f64> {
        self.topo.walk.get(&(centroid, station, mode)).copied()
    }

    pub fn is_trans(&self, k: NodeId) -> bool {
        self.nodes[k].in_rapid && self.nodes[k].in_slow
    }

    pub fn node_distance(&self, a: NodeId, b: NodeId) -> f64 {
        distance(self.nodes[a].position, self.nodes[b].position)
    }

    pub fn origins(&self, mode: Mode) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| match mode {
                Mode::Rapid => n.rapid_origin,
                Mode::Slow => n.slow_origin,
            })
            .map(|n| n.id)
            .collect()
    }

    pub fn dests(&self, mode: Mode) -> Vec<NodeId> {
        self.nodes
            .iter()
            .filter(|n| match mode {
                Mode::Rapid => n.rapid_dest,
                Mode::Slow => n.slow_dest,
            })
            .map(|n| n.id)
            .collect()
    }

    pub fn is_terminal(&self, k: NodeId, mode: Mode) -> bool {
        let n = &self.nodes[k];
        match mode {
            Mode::Rapid => n.rapid_origin || n.rapid_dest,
            Mode::Slow => n.slow_origin || n.slow_dest,
        }
    }

    pub fn edges_of(&self, mode: Mode) -> &[EdgeId] {
        match mode {
            Mode::Rapid => &self.topo.rapid_edges,
            Mode::Slow => &self.topo.slow_edges,
        }
    }

    pub fn nodes_of(&self, mode: Mode) -> &[NodeId] {
        match mode {
            Mode::Rapid => &self.topo.rapid_nodes,
            Mode::Slow => &self.topo.slow_nodes,
        }
    }

    pub fn arcs_of(&self, mode: Mode) -> &[ArcId] {
        match mode {
            Mode::Rapid => &self.topo.rapid_arcs,
            Mode::Slow => &self.topo.slow_arcs,
        }
    }

    pub fn other_end(&self, e: EdgeId, v: NodeId) -> NodeId {
        let [a, b] = self.edges[e].endpoints;
        if a == v {
            b
        } else {
            a
        }
    }

    /// Pairs restricted to `demand ≥ threshold` (zero-demand pairs always
    /// dropped), re-indexed densely in their original order.
    pub fn filter_by_demand(&self, threshold: f64) -> TransitInstance {
        let mut out = self.clone();
        out.demands = self
            .demands
            .iter()
            .filter(|d| d.demand > 0.0 && d.demand >= threshold)
            .cloned()
            .collect();
        for (i, d) in out.demands.iter_mut().enumerate() {
            d.id = i;
        }
        out
    }

    /// Replaces the pair list (ids are re-assigned densely).
    pub fn with_demands(&self, demands: Vec<DemandPair>) -> TransitInstance {
        let mut out = self.clone();
        out.demands = demands;
        for (i, d) in out.demands.iter_mut().enumerate() {
            d.id = i;
        }
        out
    }
}

fn check_dense(what: &'static str, ids: impl Iterator<Item = usize>) -> Result<(), InstanceError> {
    for (i, id) in ids.enumerate() {
        if id != i {
            return Err(InstanceError::Invariant {
                invariant: "dense_ids",
                message: format!("{what}[{i}] has id {id}; ids must equal their position"),
            });
        }
    }
    Ok(())
}

/// Two opposite arcs per mode-edge: all rapid arcs first (in edge order),
/// then all slow arcs.
fn build_arcs(params: &InstanceParams, edges: &[Edge]) -> Vec<Arc> {
    let mut arcs = Vec::new();
    for (mode, speed) in [(Mode::Rapid, params.rapid_speed), (Mode::Slow, params.slow_speed)] {
        for e in edges {
            let member = match mode {
                Mode::Rapid => e.in_rapid,
                Mode::Slow => e.in_slow,
            };
            if !member {
                continue;
            }
            let t = travel_minutes(e.length, speed);
            let [a, b] = e.endpoints;
            for (tail, head) in [(a, b), (b, a)] {
                arcs.push(Arc {
                    id: arcs.len(),
                    edge: e.id,
                    tail,
                    head,
                    mode,
                    traverse_time: t,
                });
            }
        }
    }
    arcs
}

/// Walk links for every (centroid, station, mode) within the mode's walking
/// threshold, with walk time at the walking speed.
pub fn derive_walk_links(inst: &TransitInstance) -> Vec<WalkLink> {
    let p = &inst.params;
    let mut links = Vec::new();
    for c in &inst.centroids {
        for n in &inst.nodes {
            let d = distance(c.position, n.position);
            for (member, mode, limit) in [
                (n.in_rapid, Mode::Rapid, p.max_walk_rapid),
                (n.in_slow, Mode::Slow, p.max_walk_slow),
            ] {
                if member && d <= limit {
                    links.push(WalkLink {
                        centroid: c.id,
                        station: n.id,
                        mode,
                        walk_time: travel_minutes(d, p.walk_speed),
                    });
                }
            }
        }
    }
    links
}

/// Fills `private_utility` with factor × straight-line drive time. With
/// `overwrite` false, utilities already present are kept.
pub fn compute_private_utilities(inst: &mut TransitInstance, overwrite: bool) -> Result<(), InstanceError> {
    let p = inst.params.clone();
    for d in inst.demands.iter_mut() {
        if d.private_utility.is_some() && !overwrite {
            continue;
        }
        let a = inst.centroids[d.origin].position;
        let b = inst.centroids[d.dest].position;
        let dist = distance(a, b);
        if dist == 0.0 {
            return Err(InstanceError::Invariant {
                invariant: "pair_distinct",
                message: format!("demand pair {} joins centroids at the same position", d.id),
            });
        }
        d.private_utility = Some(p.private_utility_factor * travel_minutes(dist, p.private_speed));
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn two_by_two() -> TransitInstance {
        let nodes = vec![
            Node { id: 0, position: [0.0, 0.0], in_rapid: true, in_slow: false, rapid_origin: true, rapid_dest: false, slow_origin: false, slow_dest: false },
            Node { id: 1, position: [1000.0, 0.0], in_rapid: true, in_slow: false, rapid_origin: false, rapid_dest: true, slow_origin: false, slow_dest: false },
            Node { id: 2, position: [0.0, 500.0], in_rapid: false, in_slow: true, rapid_origin: false, rapid_dest: false, slow_origin: true, slow_dest: false },
            Node { id: 3, position: [1000.0, 500.0], in_rapid: false, in_slow: true, rapid_origin: false, rapid_dest: false, slow_origin: false, slow_dest: true },
        ];
        let edges = vec![
            Edge { id: 0, endpoints: [0, 1], in_rapid: true, in_slow: false, length: 1000.0, on_old_slow_line: false },
            Edge { id: 1, endpoints: [2, 3], in_rapid: false, in_slow: true, length: 1000.0, on_old_slow_line: true },
        ];
        let centroids = vec![
            Centroid { id: 0, position: [0.0, 350.0] },
            Centroid { id: 1, position: [3000.0, 350.0] },
        ];
        let demands = vec![DemandPair { id: 0, origin: 0, dest: 1, demand: 10.0, private_utility: None }];
        let params = InstanceParams { min_unchanged_slow_edges: 1, ..Default::default() };
        TransitInstance::from_parts("mini".into(), params, nodes, edges, centroids, demands, None).unwrap()
    }

    #[test]
    fn smallest_instance_has_four_arcs() {
        let inst = two_by_two();
        assert_eq!(inst.arcs.len(), 4);
        assert_eq!(inst.topo.rapid_arcs.len(), 2);
        assert_eq!(inst.topo.slow_arcs.len(), 2);
    }

    #[test]
    fn walk_link_thresholds() {
        let inst = two_by_two();
        // Centroid 0 is 350 m from rapid node 0 (C2 = 400) and 150 m from slow node 2.
        let t = inst.walk_time(0, 0, Mode::Rapid).unwrap();
        assert!((t - 4.2).abs() < 1e-12);
        assert!(inst.walk_time(0, 2, Mode::Slow).is_some());
        // 350 m > C3 = 300 from a slow node: no link.
        let mut far = inst.clone();
        far.centroids[0].position = [0.0, 850.0];
        assert!(derive_walk_links(&far)
            .iter()
            .all(|l| !(l.centroid == 0 && l.mode == Mode::Slow)));
    }

    #[test]
    fn equidistant_stations_both_linked() {
        let mut inst = two_by_two();
        inst.centroids[0].position = [500.0, 300.0];
        let links: Vec<_> = derive_walk_links(&inst)
            .into_iter()
            .filter(|l| l.centroid == 0 && l.mode == Mode::Rapid)
            .collect();
        assert!(links.is_empty());
        inst.params.max_walk_rapid = 600.0;
        let links: Vec<_> = derive_walk_links(&inst)
            .into_iter()
            .filter(|l| l.centroid == 0 && l.mode == Mode::Rapid)
            .collect();
        assert_eq!(links.len(), 2);
    }

    #[test]
    fn private_utility_examples() {
        let mut inst = two_by_two();
        // 3 km apart, factor 2, 30 km/h.
        assert!((inst.demands[0].utility() - 12.0).abs() < 1e-12);
        inst.params.private_utility_factor = 1.0;
        compute_private_utilities(&mut inst, true).unwrap();
        assert!((inst.demands[0].utility() - 6.0).abs() < 1e-12);
        inst.params.private_utility_factor = 2.0;
        inst.centroids[1].position = [500.0, 350.0];
        compute_private_utilities(&mut inst, true).unwrap();
        assert!((inst.demands[0].utility() - 2.0).abs() < 1e-12);
        inst.centroids[1].position = [0.0, 350.0];
        assert!(compute_private_utilities(&mut inst, true).is_err());
    }

    #[test]
    fn filter_examples() {
        let inst = two_by_two();
        let mut demands = Vec::new();
        for i in 0..10 {
            demands.push(DemandPair {
                id: i,
                origin: 0,
                dest: 1,
                demand: if i < 3 { 0.0 } else { i as f64 },
                private_utility: Some(5.0),
            });
        }
        let toy = inst.with_demands(demands);
        assert_eq!(toy.filter_by_demand(0.0).num_pairs(), 7);
        assert_eq!(toy.filter_by_demand(100.0).num_pairs(), 0);
        let f = toy.filter_by_demand(5.0);
        assert_eq!(f.num_pairs(), 5);
        assert!(f.demands.iter().enumerate().all(|(i, d)| d.id == i));
    }

    #[test]
    fn edge_mode_violation_names_edge() {
        let inst = two_by_two();
        let mut edges = inst.edges.clone();
        edges[1].in_rapid = true;
        let err = TransitInstance::from_parts(
            "bad".into(),
            inst.params.clone(),
            inst.nodes.clone(),
            edges,
            inst.centroids.clone(),
            inst.demands.clone(),
            None,
        )
        .unwrap_err();
        assert!(err.to_string().contains("edge 1"), "{err}");
    }
}
