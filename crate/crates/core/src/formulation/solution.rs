use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use super::{IndModel, VarKey};
use crate::instance::{ArcId, EdgeId, Mode, NodeId, PairId, TransitInstance};

/// Built edges and station labels of both lines (all lists sorted).
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Design {
    pub rapid_edges: Vec<EdgeId>,
    pub rapid_stops: Vec<NodeId>,
    pub rapid_nonstops: Vec<NodeId>,
    pub slow_edges: Vec<EdgeId>,
    pub slow_stops: Vec<NodeId>,
}

impl Design {
    pub fn from_values(m: &IndModel, inst: &TransitInstance, x: &[f64]) -> Design {
        let on = |k: VarKey| m.dir.value(x, k) > 0.5;
        Design {
            rapid_edges: inst.topo.rapid_edges.iter().copied().filter(|&e| on(VarKey::XR(e))).collect(),
            rapid_stops: inst.topo.rapid_nodes.iter().copied().filter(|&i| on(VarKey::ZR(i))).collect(),
            rapid_nonstops: inst.topo.rapid_nodes.iter().copied().filter(|&i| on(VarKey::YR(i))).collect(),
            slow_edges: inst.topo.slow_edges.iter().copied().filter(|&e| on(VarKey::XS(e))).collect(),
            slow_stops: inst.topo.slow_nodes.iter().copied().filter(|&k| on(VarKey::ZS(k))).collect(),
        }
    }

    pub fn edges(&self, mode: Mode) -> &[EdgeId] {
        match mode {
            Mode::Rapid => &self.rapid_edges,
            Mode::Slow => &self.slow_edges,
        }
    }

    pub fn stops(&self, mode: Mode) -> &[NodeId] {
        match mode {
            Mode::Rapid => &self.rapid_stops,
            Mode::Slow => &self.slow_stops,
        }
    }

    pub fn is_stop(&self, k: NodeId, mode: Mode) -> bool {
        self.stops(mode).binary_search(&k).is_ok()
    }

    pub fn has_edge(&self, e: EdgeId, mode: Mode) -> bool {
        self.edges(mode).binary_search(&e).is_ok()
    }

    /// 0/1 value of a design key (pair keys give 0).
    pub fn key_value(&self, key: VarKey) -> f64 {
        let on = match key {
            VarKey::XR(e) => self.has_edge(e, Mode::Rapid),
            VarKey::XS(e) => self.has_edge(e, Mode::Slow),
            VarKey::ZR(i) => self.is_stop(i, Mode::Rapid),
            VarKey::ZS(k) => self.is_stop(k, Mode::Slow),
            VarKey::YR(i) => self.rapid_nonstops.binary_search(&i).is_ok(),
            _ => false,
        };
        if on {
            1.0
        } else {
            0.0
        }
    }

    pub fn normalize(&mut self) {
        for v in [
            &mut self.rapid_edges,
            &mut self.rapid_stops,
            &mut self.rapid_nonstops,
            &mut self.slow_edges,
            &mut self.slow_stops,
        ] {
            v.sort_unstable();
            v.dedup();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "leg", rename_all = "snake_case")]
pub enum Leg {
    WalkIn { station: NodeId, mode: Mode, time: f64 },
    Ride { arc: ArcId, mode: Mode },
    Transfer { node: NodeId, from: Mode, to: Mode },
    WalkOut { station: NodeId, mode: Mode, time: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRoute {
    pub pair: PairId,
    pub covered: bool,
    pub legs: Vec<Leg>,
    /// Public trip time in minutes (0 when not covered).
    pub time: f64,
}

impl PairRoute {
    pub fn uncovered(pair: PairId) -> PairRoute {
        PairRoute {
            pair,
            covered: false,
            legs: Vec::new(),
            time: 0.0,
        }
    }

    pub fn has_transfer(&self) -> bool {
        self.legs.iter().any(|l| matches!(l, Leg::Transfer { .. }))
    }

    /// Nonzero pair-variable values realising this route on `design`.
    pub fn key_values(&self, inst: &TransitInstance, design: &Design) -> Vec<(VarKey, f64)> {
        if !self.covered {
            return Vec::new();
        }
        let w = self.pair;
        let mut out = vec![(VarKey::F(w), 1.0)];
        for leg in &self.legs {
            match *leg {
                Leg::WalkIn { station, mode, .. } => out.push((super::v_orig(mode, w, station), 1.0)),
                Leg::WalkOut { station, mode, .. } => out.push((super::v_dest(mode, w, station), 1.0)),
                Leg::Ride { arc, mode } => {
                    out.push((super::fa(mode, w, arc), 1.0));
                    if design.is_stop(inst.arcs[arc].tail, mode) {
                        out.push((super::h(mode, w, arc), 1.0));
                    }
                }
                Leg::Transfer { node, to, .. } => out.push((
                    match to {
                        Mode::Rapid => VarKey::FSR(w, node),
                        Mode::Slow => VarKey::FRS(w, node),
                    },
                    1.0,
                )),
            }
        }
        out
    }

    /// The mode when the route rides a single mode without transferring.
    pub fn single_mode(&self) -> Option<Mode> {
        if self.has_transfer() {
            return None;
        }
        self.legs.iter().find_map(|l| match l {
            Leg::Ride { mode, .. } => Some(*mode),
            _ => None,
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageStats {
    #[serde(rename = "demand_R")]
    pub demand_r: f64,
    #[serde(rename = "demand_S")]
    pub demand_s: f64,
    #[serde(rename = "demand_RS")]
    pub demand_rs: f64,
    #[serde(rename = "pairs_R")]
    pub pairs_r: usize,
    #[serde(rename = "pairs_S")]
    pub pairs_s: usize,
    #[serde(rename = "pairs_RS")]
    pub pairs_rs: usize,
}

impl CoverageStats {
    pub fn from_routes(inst: &TransitInstance, routes: &[PairRoute]) -> CoverageStats {
        let mut s = CoverageStats::default();
        for r in routes.iter().filter(|r| r.covered) {
            let g = inst.demands[r.pair].demand;
            match r.single_mode() {
                Some(Mode::Rapid) => {
                    s.demand_r += g;
                    s.pairs_r += 1;
                }
                Some(Mode::Slow) => {
                    s.demand_s += g;
                    s.pairs_s += 1;
                }
                None => {
                    s.demand_rs += g;
                    s.pairs_rs += 1;
                }
            }
        }
        s
    }

    pub fn total_demand(&self) -> f64 {
        self.demand_r + self.demand_s + self.demand_rs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignSolution {
    pub design: Design,
    pub routes: Vec<PairRoute>,
    pub objective: f64,
    pub stats: CoverageStats,
}

impl DesignSolution {
    pub fn new(inst: &TransitInstance, mut design: Design, routes: Vec<PairRoute>) -> DesignSolution {
        design.normalize();
        let objective = routes
            .iter()
            .filter(|r| r.covered)
            .map(|r| inst.demands[r.pair].demand)
            .sum::<f64>()
            + 0.0;
        let stats = CoverageStats::from_routes(inst, &routes);
        DesignSolution {
            design,
            routes,
            objective,
            stats,
        }
    }

    /// Column values of this solution in `m` (design plus every route).
    pub fn point(&self, inst: &TransitInstance, m: &IndModel) -> Vec<f64> {
        let mut vals: HashMap<VarKey, f64> = HashMap::new();
        for r in &self.routes {
            vals.extend(r.key_values(inst, &self.design));
        }
        m.point(|k| if k.is_design() { self.design.key_value(k) } else { vals.get(&k).copied().unwrap_or(0.0) })
    }

    pub fn covered_pairs(&self) -> Vec<PairId> {
        self.routes.iter().filter(|r| r.covered).map(|r| r.pair).collect()
    }
}

/// Public trip time of a leg sequence on `design`: walking, riding, dwell at
/// stop-labelled tails, transfers and the boarding constant.
pub fn route_time(inst: &TransitInstance, design: &Design, legs: &[Leg]) -> f64 {
    let p = &inst.params;
    let mut t = p.wait_time - 0.5 * p.stop_time_rapid;
    for leg in legs {
        t += match *leg {
            Leg::WalkIn { time, .. } | Leg::WalkOut { time, .. } => time,
            Leg::Ride { arc, mode } => {
                let a = &inst.arcs[arc];
                let dwell = match mode {
                    Mode::Rapid => p.stop_time_rapid,
                    Mode::Slow => p.stop_time_slow,
                };
                a.traverse_time + if design.is_stop(a.tail, mode) { dwell } else { 0.0 }
            }
            Leg::Transfer { to, .. } => match to {
                Mode::Rapid => p.transfer_time_sr,
                Mode::Slow => p.transfer_time_rs,
            },
        };
    }
    t
}

#[derive(Debug, thiserror::Error)]
pub enum ExtractError {
    #[error("column {col} ({key}) has non-integral value {value}")]
    NonIntegral { col: usize, key: String, value: f64 },
    #[error("values violate the model by {0:.3e}")]
    Infeasible(f64),
    #[error("pair {pair}: {msg}")]
    BadFlow { pair: PairId, msg: String },
}

const TOL: f64 = 1e-6;

type State = (NodeId, Mode);

/// Reconstructs designs and per-pair legs from integral MILP values. Pairs
/// whose flows are not columns of the model (Benders projection) are routed
/// on the extracted design by the exact router.
pub fn extract_solution(inst: &TransitInstance, m: &IndModel, x: &[f64]) -> Result<DesignSolution, ExtractError> {
    for (j, &v) in x.iter().enumerate() {
        if (v - v.round()).abs() > TOL {
            return Err(ExtractError::NonIntegral {
                col: j,
                key: m.dir.key(j).to_string(),
                value: v,
            });
        }
    }
    let viol = m.model.max_violation(x);
    if viol > TOL {
        return Err(ExtractError::Infeasible(viol));
    }
    let design = Design::from_values(m, inst, x);
    let mut routes = Vec::with_capacity(inst.num_pairs());
    for w in 0..inst.num_pairs() {
        if m.dir.value(x, VarKey::F(w)) < 0.5 {
            routes.push(PairRoute::uncovered(w));
            continue;
        }
        let projected = m.dir.col(VarKey::FR(w, inst.topo.rapid_arcs.first().copied().unwrap_or(0))).is_none()
            && !inst.topo.rapid_arcs.is_empty();
        if projected {
            match crate::oracle::best_routing(inst, &design, w) {
                Some(r) => routes.push(r),
                None => {
                    return Err(ExtractError::BadFlow {
                        pair: w,
                        msg: "covered in the master but no admissible route exists on the design".into(),
                    })
                }
            }
            continue;
        }
        routes.push(trail_from_flows(inst, m, x, &design, w)?);
    }
    Ok(DesignSolution::new(inst, design, routes))
}

fn trail_from_flows(
    inst: &TransitInstance,
    m: &IndModel,
    x: &[f64],
    design: &Design,
    w: PairId,
) -> Result<PairRoute, ExtractError> {
    let on = |k: VarKey| m.dir.value(x, k) > 0.5;
    let d = &inst.demands[w];
    let bad = |msg: &str| ExtractError::BadFlow {
        pair: w,
        msg: msg.to_string(),
    };
    let modes: &[Mode] = if m.scope.slow { &[Mode::Rapid, Mode::Slow] } else { &[Mode::Rapid] };
    let mut start = None;
    let mut end = None;
    for &mode in modes {
        for &k in inst.nodes_of(mode) {
            if on(super::v_orig(mode, w, k)) {
                start = Some((k, mode));
            }
            if on(super::v_dest(mode, w, k)) {
                end = Some((k, mode));
            }
        }
    }
    let (start, end) = match (start, end) {
        (Some(s), Some(e)) => (s, e),
        _ => return Err(bad("covered pair without walk links")),
    };

    // Layered multigraph of used arcs and transfers.
    let mut out: BTreeMap<State, Vec<(State, Leg)>> = BTreeMap::new();
    for &mode in modes {
        for &a in inst.arcs_of(mode) {
            if on(super::fa(mode, w, a)) {
                let arc = &inst.arcs[a];
                out.entry((arc.tail, mode))
                    .or_default()
                    .push(((arc.head, mode), Leg::Ride { arc: a, mode }));
            }
        }
    }
    if m.scope.slow {
        for &k in &inst.topo.trans_nodes {
            if on(VarKey::FSR(w, k)) {
                out.entry((k, Mode::Slow)).or_default().push((
                    (k, Mode::Rapid),
                    Leg::Transfer {
                        node: k,
                        from: Mode::Slow,
                        to: Mode::Rapid,
                    },
                ));
            }
            if on(VarKey::FRS(w, k)) {
                out.entry((k, Mode::Rapid)).or_default().push((
                    (k, Mode::Slow),
                    Leg::Transfer {
                        node: k,
                        from: Mode::Rapid,
                        to: Mode::Slow,
                    },
                ));
            }
        }
    }
    for v in out.values_mut() {
        v.reverse();
    }

    // Hierholzer from the boarding state; edges unreachable from it form
    // detached circulations and are dropped.
    let mut stack: Vec<(State, Option<Leg>)> = vec![(start, None)];
    let mut trail: Vec<(State, Option<Leg>)> = Vec::new();
    while let Some((s, _)) = stack.last().cloned() {
        match out.get_mut(&s).and_then(|v| v.pop()) {
            Some((next, leg)) => stack.push((next, Some(leg))),
            None => trail.push(stack.pop().unwrap()),
        }
    }
    trail.reverse();
    let last = trail.last().map(|t| t.0).unwrap_or(start);
    if last != end {
        return Err(bad("flow does not form a single origin-destination trail"));
    }
    let mut legs = vec![Leg::WalkIn {
        station: start.0,
        mode: start.1,
        time: inst.walk_time(d.origin, start.0, start.1).ok_or_else(|| bad("no origin walk link"))?,
    }];
    legs.extend(trail.into_iter().filter_map(|t| t.1));
    legs.push(Leg::WalkOut {
        station: end.0,
        mode: end.1,
        time: inst.walk_time(d.dest, end.0, end.1).ok_or_else(|| bad("no destination walk link"))?,
    });
    let time = route_time(inst, design, &legs);
    Ok(PairRoute {
        pair: w,
        covered: true,
        legs,
        time,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyCheck {
    pub family: String,
    pub passed: bool,
    pub first_violation: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub checks: Vec<FamilyCheck>,
}

impl FeasibilityReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed(&self) -> Vec<&FamilyCheck> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn family(&self, name: &str) -> Option<&FamilyCheck> {
        self.checks.iter().find(|c| c.family == name)
    }

    fn record(&mut self, family: &str, result: Result<(), String>) {
        self.checks.push(FamilyCheck {
            family: family.to_string(),
            passed: result.is_ok(),
            first_violation: result.err(),
        });
    }
}

/// Checks that `edges` form one simple path (no cycle, connected, max degree 2).
pub(crate) fn rapid_path_check(inst: &TransitInstance, edges: &[EdgeId]) -> Result<(), String> {
    path_check(inst, edges).map(|_| ())
}

/// Endpoints of the simple path formed by `edges`, or why it is not one.
fn path_check(inst: &TransitInstance, edges: &[EdgeId]) -> Result<Option<(NodeId, NodeId)>, String> {
    if edges.is_empty() {
        return Ok(None);
    }
    let mut adj: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
    for &e in edges {
        let [a, b] = inst.edges[e].endpoints;
        adj.entry(a).or_default().push(b);
        adj.entry(b).or_default().push(a);
    }
    if let Some((k, n)) = adj.iter().find(|(_, n)| n.len() > 2) {
        return Err(format!("node {k} has degree {}", n.len()));
    }
    let ends: Vec<NodeId> = adj.iter().filter(|(_, n)| n.len() == 1).map(|(&k, _)| k).collect();
    if ends.len() != 2 {
        return Err(format!("edge set has {} path ends (a cycle is present)", ends.len()));
    }
    // Walk from one end; a simple path visits every node.
    let mut seen = BTreeSet::from([ends[0]]);
    let (mut prev, mut cur) = (usize::MAX, ends[0]);
    loop {
        let next = adj[&cur].iter().copied().find(|&n| n != prev && !seen.contains(&n));
        match next {
            Some(n) => {
                seen.insert(n);
                prev = cur;
                cur = n;
            }
            None => break,
        }
    }
    if seen.len() != adj.len() {
        return Err(format!(
            "edges are not a single path: {} of {} nodes reachable from node {}",
            seen.len(),
            adj.len(),
            ends[0]
        ));
    }
    Ok(Some((ends[0], ends[1])))
}

fn check_line(inst: &TransitInstance, design: &Design, mode: Mode, report: &mut FeasibilityReport) {
    let p = &inst.params;
    let tag = mode.label();
    let edges = design.edges(mode);
    let stops = design.stops(mode);
    let nonstops: &[NodeId] = if mode == Mode::Rapid { &design.rapid_nonstops } else { &[] };
    let labelled: BTreeSet<NodeId> = stops.iter().chain(nonstops).copied().collect();
    let lower = tag.to_lowercase();
    let line = if mode == Mode::Rapid { "rapid" } else { "slow" };

    let budget = if mode == Mode::Rapid { p.max_rapid_edges } else { p.max_slow_edges };
    report.record(
        &format!("{line}_budget"),
        if edges.len() <= budget {
            Ok(())
        } else {
            Err(format!("{} {lower} edges exceed the budget {budget}", edges.len()))
        },
    );

    let labels = (|| {
        for &e in edges {
            let edge = &inst.edges[e];
            let member = if mode == Mode::Rapid { edge.in_rapid } else { edge.in_slow };
            if !member {
                return Err(format!("edge {e} is not a {line} edge"));
            }
            for &i in &edge.endpoints {
                let ok = if mode == Mode::Rapid { labelled.contains(&i) } else { design.is_stop(i, mode) };
                if !ok {
                    return Err(format!("edge {e} endpoint {i} is not a {line} station"));
                }
            }
        }
        for &i in stops.iter().chain(nonstops) {
            if !inst.nodes_of(mode).contains(&i) {
                return Err(format!("node {i} is not a {line} candidate"));
            }
        }
        if let Some(i) = stops.iter().find(|i| nonstops.contains(i)) {
            return Err(format!("node {i} is both stop and non-stop"));
        }
        Ok(())
    })();
    report.record(&format!("{line}_labels"), labels);

    let incident = |set: &[NodeId]| -> usize {
        set.iter()
            .map(|&o| edges.iter().filter(|&&e| inst.edges[e].endpoints.contains(&o)).count())
            .sum()
    };
    let origins = inst.origins(mode);
    let dests = inst.dests(mode);
    let endpoints = (|| {
        let so = origins.iter().filter(|&&o| design.is_stop(o, mode)).count();
        let sd = dests.iter().filter(|&&d| design.is_stop(d, mode)).count();
        if so != 1 {
            return Err(format!("{so} stops among O_{tag}"));
        }
        if sd != 1 {
            return Err(format!("{sd} stops among D_{tag}"));
        }
        let io = incident(&origins);
        let id = incident(&dests);
        if io != 1 {
            return Err(format!("{io} chosen edges incident to O_{tag}"));
        }
        if id != 1 {
            return Err(format!("{id} chosen edges incident to D_{tag}"));
        }
        Ok(())
    })();
    report.record(&format!("{line}_endpoints"), endpoints);

    let forest = (|| {
        if edges.len() + 1 != labelled.len() {
            return Err(format!(
                "{} edges + 1 != {} labelled nodes",
                edges.len(),
                labelled.len()
            ));
        }
        match path_check(inst, edges)? {
            None => Err("no edges chosen".to_string()),
            Some((a, b)) => {
                let o = origins.contains(&a) && dests.contains(&b) || origins.contains(&b) && dests.contains(&a);
                if o {
                    Ok(())
                } else {
                    Err(format!("path ends {a}, {b} are not an O_{tag}/D_{tag} pair"))
                }
            }
        }
    })();
    report.record(&format!("{line}_forest"), forest);

    let degree = (|| {
        for &k in inst.nodes_of(mode) {
            if inst.is_terminal(k, mode) {
                continue;
            }
            let deg = edges.iter().filter(|&&e| inst.edges[e].endpoints.contains(&k)).count();
            let want = if labelled.contains(&k) { 2 } else { 0 };
            if deg != want {
                return Err(format!("node {k} has degree {deg}, expected {want}"));
            }
        }
        Ok(())
    })();
    report.record(&format!("{line}_degree"), degree);
}

/// Verifies a solution family by family, directly from the instance data.
pub fn check_feasibility(inst: &TransitInstance, sol: &DesignSolution) -> FeasibilityReport {
    let p = &inst.params;
    let design = &sol.design;
    let mut report = FeasibilityReport::default();
    check_line(inst, design, Mode::Rapid, &mut report);
    check_line(inst, design, Mode::Slow, &mut report);

    let old = design.slow_edges.iter().filter(|&&e| inst.edges[e].on_old_slow_line).count();
    report.record(
        "slow_overlap",
        if old >= p.min_unchanged_slow_edges {
            Ok(())
        } else {
            Err(format!("{old} old-line edges kept, need {}", p.min_unchanged_slow_edges))
        },
    );

    let spacing = (|| {
        for (ai, &i) in design.rapid_stops.iter().enumerate() {
            for &j in &design.rapid_stops[ai + 1..] {
                let d = inst.node_distance(i, j);
                if d <= p.min_station_spacing {
                    return Err(format!("stops {i} and {j} are {d:.1} m apart"));
                }
            }
        }
        Ok(())
    })();
    report.record("spacing", spacing);

    let mut fams: Vec<(&str, Result<(), String>)> = vec![
        ("walk", Ok(())),
        ("flow", Ok(())),
        ("loc_allo", Ok(())),
        ("transfer", Ok(())),
        ("alignment", Ok(())),
        ("utility", Ok(())),
    ];
    if p.enable_shape_constraints {
        fams.push(("shape", Ok(())));
    }
    for r in sol.routes.iter().filter(|r| r.covered) {
        for (fam, res) in fams.iter_mut() {
            if res.is_ok() {
                if let Err(msg) = check_route(inst, design, r, fam) {
                    *res = Err(format!("pair {}: {msg}", r.pair));
                }
            }
        }
    }
    for (fam, res) in fams {
        report.record(fam, res);
    }

    let objective = (|| {
        let covered: f64 = sol
            .routes
            .iter()
            .filter(|r| r.covered)
            .map(|r| inst.demands[r.pair].demand)
            .sum();
        if (covered - sol.objective).abs() > TOL {
            return Err(format!("objective {} but covered demand {covered}", sol.objective));
        }
        let s = CoverageStats::from_routes(inst, &sol.routes);
        if (s.total_demand() - sol.objective).abs() > TOL || s != sol.stats {
            return Err("coverage statistics do not add up".into());
        }
        let mut seen = BTreeSet::new();
        for r in &sol.routes {
            if r.pair >= inst.num_pairs() || !seen.insert(r.pair) {
                return Err(format!("route list has a bad or repeated pair {}", r.pair));
            }
        }
        Ok(())
    })();
    report.record("objective", objective);
    report
}

fn check_route(inst: &TransitInstance, design: &Design, r: &PairRoute, family: &str) -> Result<(), String> {
    let d = &inst.demands[r.pair];
    let legs = &r.legs;
    let (start, end) = match (legs.first(), legs.last()) {
        (Some(Leg::WalkIn { station: s, mode: ms, .. }), Some(Leg::WalkOut { station: t, mode: mt, .. }))
            if legs.len() >= 3 =>
        {
            ((*s, *ms), (*t, *mt))
        }
        _ => return Err("route must start with a walk in, end with a walk out and ride in between".into()),
    };
    match family {
        "walk" => {
            for (c, (k, mode), what) in [(d.origin, start, "origin"), (d.dest, end, "destination")] {
                if inst.walk_time(c, k, mode).is_none() {
                    return Err(format!("{what} station {k} is beyond walking distance"));
                }
                if !design.is_stop(k, mode) {
                    return Err(format!("{what} station {k} is not a {} stop", mode.label()));
                }
            }
            for leg in &legs[1..legs.len() - 1] {
                if matches!(leg, Leg::WalkIn { .. } | Leg::WalkOut { .. }) {
                    return Err("walk leg in the middle of a route".into());
                }
            }
            Ok(())
        }
        "flow" => {
            let mut state = start;
            let mut out_count: HashMap<State, usize> = HashMap::new();
            let mut in_count: HashMap<State, usize> = HashMap::new();
            for leg in &legs[1..legs.len() - 1] {
                match *leg {
                    Leg::Ride { arc, mode } => {
                        let a = &inst.arcs[arc];
                        if a.mode != mode || a.tail != state.0 || mode != state.1 {
                            return Err(format!("ride on arc {arc} does not continue from node {}", state.0));
                        }
                        *out_count.entry((a.tail, mode)).or_default() += 1;
                        *in_count.entry((a.head, mode)).or_default() += 1;
                        state = (a.head, mode);
                    }
                    Leg::Transfer { node, from, to } => {
                        if node != state.0 || from != state.1 || from == to {
                            return Err(format!("transfer at {node} does not continue the route"));
                        }
                        state = (node, to);
                    }
                    _ => {}
                }
            }
            if state != end {
                return Err(format!("route ends at node {} instead of station {}", state.0, end.0));
            }
            if out_count.get(&start).copied().unwrap_or(0) == 0 {
                return Err(format!("no {} arc leaves the boarding station {}", start.1.label(), start.0));
            }
            if in_count.get(&end).copied().unwrap_or(0) == 0 {
                return Err(format!("no {} arc enters the alighting station {}", end.1.label(), end.0));
            }
            Ok(())
        }
        "loc_allo" => {
            let mut used = BTreeSet::new();
            for leg in legs {
                if let Leg::Ride { arc, mode } = *leg {
                    let e = inst.arcs[arc].edge;
                    if !design.has_edge(e, mode) {
                        return Err(format!("arc {arc} rides unbuilt {} edge {e}", mode.label()));
                    }
                    if !used.insert(e) {
                        return Err(format!("edge {e} traversed twice"));
                    }
                }
            }
            Ok(())
        }
        "transfer" | "alignment" => {
            let transfers: Vec<(NodeId, Mode)> = legs
                .iter()
                .filter_map(|l| match *l {
                    Leg::Transfer { node, to, .. } => Some((node, to)),
                    _ => None,
                })
                .collect();
            if family == "alignment" {
                for &(k, _) in &transfers {
                    if !design.is_stop(k, Mode::Rapid) || !design.is_stop(k, Mode::Slow) {
                        return Err(format!("transfer at {k}, which is not a stop of both lines"));
                    }
                }
                for (i, &(k, _)) in transfers.iter().enumerate() {
                    if transfers[i + 1..].iter().any(|&(k2, _)| k2 == k) {
                        return Err(format!("two transfers at node {k}"));
                    }
                }
                return Ok(());
            }
            let sr = transfers.iter().filter(|t| t.1 == Mode::Rapid).count();
            let rs = transfers.len() - sr;
            if sr > 1 || rs > 1 {
                return Err(format!("{sr} slow-to-rapid and {rs} rapid-to-slow transfers"));
            }
            let count = |k: NodeId, mode: Mode, outgoing: bool| {
                legs.iter()
                    .filter(|l| match **l {
                        Leg::Ride { arc, mode: m } => {
                            let a = &inst.arcs[arc];
                            m == mode && if outgoing { a.tail == k } else { a.head == k }
                        }
                        _ => false,
                    })
                    .count()
            };
            for &(k, to) in &transfers {
                let ok = match to {
                    Mode::Slow => count(k, Mode::Slow, true) > 0 && count(k, Mode::Rapid, false) > 0,
                    Mode::Rapid => count(k, Mode::Slow, false) > 0 && count(k, Mode::Rapid, true) > 0,
                };
                if !ok {
                    return Err(format!("transfer at {k} lacks an arriving or departing ride"));
                }
            }
            Ok(())
        }
        "utility" => {
            let t = route_time(inst, design, legs);
            if (t - r.time).abs() > TOL {
                return Err(format!("stored time {:.6} differs from recomputed {t:.6}", r.time));
            }
            let u = d.utility();
            if t > u + TOL {
                return Err(format!("public time {t:.4} exceeds private utility {u:.4}"));
            }
            Ok(())
        }
        "shape" => {
            let rides: Vec<ArcId> = legs
                .iter()
                .filter_map(|l| match *l {
                    Leg::Ride { arc, mode: Mode::Rapid } => Some(arc),
                    _ => None,
                })
                .collect();
            for &a in &rides {
                let k = inst.arcs[a].head;
                for &b in &rides {
                    if inst.arcs[b].tail == k
                        && super::turn_is_acute(
                            inst.nodes[k].position,
                            inst.nodes[inst.arcs[a].tail].position,
                            inst.nodes[inst.arcs[b].head].position,
                        )
                    {
                        return Err(format!("acute turn at node {k} between arcs {a} and {b}"));
                    }
                }
            }
            Ok(())
        }
        _ => Ok(()),
    }
}
