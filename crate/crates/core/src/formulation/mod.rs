//! The IND MILP: variable directory, keyed row emitters and model builders.
//!
//! Rows are emitted over [`VarKey`]s first and mapped to columns afterwards,
//! so the same emitters serve the full model, the Benders master and the
//! per-pair subproblems.

mod solution;
mod subtour;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::instance::{ArcId, EdgeId, Mode, NodeId, PairId, TransitInstance};
use crate::lp::Sense;
use crate::model::{Column, MilpModel, VarClass};

pub use solution::{
    check_feasibility, extract_solution, CoverageStats, Design, DesignSolution, ExtractError, FamilyCheck,
    FeasibilityReport, Leg, PairRoute, route_time,
};
pub use subtour::{subtour_cuts, SubtourCuts};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum VarKey {
    XR(EdgeId),
    XS(EdgeId),
    YR(NodeId),
    ZR(NodeId),
    ZS(NodeId),
    F(PairId),
    FR(PairId, ArcId),
    FS(PairId, ArcId),
    FSR(PairId, NodeId),
    FRS(PairId, NodeId),
    VOR(PairId, NodeId),
    VOS(PairId, NodeId),
    VDR(PairId, NodeId),
    VDS(PairId, NodeId),
    HR(PairId, ArcId),
    HS(PairId, ArcId),
}

impl VarKey {
    pub fn class(self) -> VarClass {
        use VarKey::*;
        match self {
            XR(_) => VarClass::RapidEdge,
            XS(_) => VarClass::SlowEdge,
            ZR(_) => VarClass::RapidStop,
            ZS(_) => VarClass::SlowStop,
            YR(_) => VarClass::RapidNonStop,
            F(_) => VarClass::Coverage,
            VOR(..) | VOS(..) | VDR(..) | VDS(..) => VarClass::Walk,
            HR(..) | HS(..) => VarClass::Dwell,
            FR(..) | FS(..) | FSR(..) | FRS(..) => VarClass::Flow,
        }
    }

    pub fn pair(self) -> Option<PairId> {
        use VarKey::*;
        match self {
            XR(_) | XS(_) | YR(_) | ZR(_) | ZS(_) => None,
            F(w) | FR(w, _) | FS(w, _) | FSR(w, _) | FRS(w, _) | VOR(w, _) | VOS(w, _) | VDR(w, _) | VDS(w, _)
            | HR(w, _) | HS(w, _) => Some(w),
        }
    }

    /// Arc and transfer flows: the variables a Benders subproblem owns.
    pub fn is_flow(self) -> bool {
        matches!(self, VarKey::FR(..) | VarKey::FS(..) | VarKey::FSR(..) | VarKey::FRS(..))
    }

    pub fn is_design(self) -> bool {
        self.pair().is_none()
    }
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        use VarKey::*;
        match *self {
            XR(e) => write!(f, "xR_{e}"),
            XS(e) => write!(f, "xS_{e}"),
            YR(i) => write!(f, "yR_{i}"),
            ZR(i) => write!(f, "zR_{i}"),
            ZS(i) => write!(f, "zS_{i}"),
            F(w) => write!(f, "f_{w}"),
            FR(w, a) => write!(f, "fR_{w}_{a}"),
            FS(w, a) => write!(f, "fS_{w}_{a}"),
            FSR(w, k) => write!(f, "fSR_{w}_{k}"),
            FRS(w, k) => write!(f, "fRS_{w}_{k}"),
            VOR(w, k) => write!(f, "vOR_{w}_{k}"),
            VOS(w, k) => write!(f, "vOS_{w}_{k}"),
            VDR(w, k) => write!(f, "vDR_{w}_{k}"),
            VDS(w, k) => write!(f, "vDS_{w}_{k}"),
            HR(w, a) => write!(f, "hR_{w}_{a}"),
            HS(w, a) => write!(f, "hS_{w}_{a}"),
        }
    }
}

/// Bijection between keys and column indices.
#[derive(Debug, Clone, Default)]
pub struct VarDirectory {
    keys: Vec<VarKey>,
    index: HashMap<VarKey, usize>,
}

impl VarDirectory {
    pub fn push(&mut self, key: VarKey) -> usize {
        let j = self.keys.len();
        let prev = self.index.insert(key, j);
        assert!(prev.is_none(), "duplicate key {key}");
        self.keys.push(key);
        j
    }

    pub fn col(&self, key: VarKey) -> Option<usize> {
        self.index.get(&key).copied()
    }

    pub fn key(&self, col: usize) -> VarKey {
        self.keys[col]
    }

    pub fn keys(&self) -> &[VarKey] {
        &self.keys
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Value of `key` in a column vector (0 when the key has no column).
    pub fn value(&self, x: &[f64], key: VarKey) -> f64 {
        self.col(key).map_or(0.0, |j| x[j])
    }
}

/// Which parts of the network a model covers. The sequential baseline's
/// first stage drops the slow line entirely.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Scope {
    pub slow: bool,
}

impl Scope {
    pub const FULL: Scope = Scope { slow: true };
    pub const RAPID_ONLY: Scope = Scope { slow: false };

    fn modes(self) -> &'static [Mode] {
        if self.slow {
            &[Mode::Rapid, Mode::Slow]
        } else {
            &[Mode::Rapid]
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KeyedRow {
    pub coeffs: Vec<(VarKey, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

impl KeyedRow {
    fn new(coeffs: Vec<(VarKey, f64)>, sense: Sense, rhs: f64, tag: String) -> Self {
        KeyedRow { coeffs, sense, rhs, tag }
    }

    pub fn family(&self) -> &str {
        self.tag.split('[').next().unwrap_or(&self.tag)
    }

    /// Row activity with values looked up by key.
    pub fn activity(&self, value: impl Fn(VarKey) -> f64) -> f64 {
        self.coeffs.iter().map(|&(k, a)| a * value(k)).sum()
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FormulationError {
    #[error("instance has an empty {0} set")]
    EmptyTerminals(&'static str),
    #[error("E_S^id = {need} exceeds the {have} old-line edges")]
    OldLineTooShort { need: usize, have: usize },
    #[error("fixed rapid design is infeasible: {0}")]
    BadRapidDesign(String),
}

/// A built model together with its column directory.
#[derive(Debug, Clone)]
pub struct IndModel {
    pub model: MilpModel,
    pub dir: VarDirectory,
    pub scope: Scope,
}

impl IndModel {
    pub fn col(&self, key: VarKey) -> Option<usize> {
        self.dir.col(key)
    }

    /// Values keyed by column for a map of key values (absent keys are 0).
    pub fn point(&self, value: impl Fn(VarKey) -> f64) -> Vec<f64> {
        self.dir.keys().iter().map(|&k| value(k)).collect()
    }
}

pub(crate) fn x(mode: Mode, e: EdgeId) -> VarKey {
    match mode {
        Mode::Rapid => VarKey::XR(e),
        Mode::Slow => VarKey::XS(e),
    }
}

pub(crate) fn z(mode: Mode, k: NodeId) -> VarKey {
    match mode {
        Mode::Rapid => VarKey::ZR(k),
        Mode::Slow => VarKey::ZS(k),
    }
}

pub(crate) fn fa(mode: Mode, w: PairId, a: ArcId) -> VarKey {
    match mode {
        Mode::Rapid => VarKey::FR(w, a),
        Mode::Slow => VarKey::FS(w, a),
    }
}

pub(crate) fn h(mode: Mode, w: PairId, a: ArcId) -> VarKey {
    match mode {
        Mode::Rapid => VarKey::HR(w, a),
        Mode::Slow => VarKey::HS(w, a),
    }
}

pub(crate) fn v_orig(mode: Mode, w: PairId, k: NodeId) -> VarKey {
    match mode {
        Mode::Rapid => VarKey::VOR(w, k),
        Mode::Slow => VarKey::VOS(w, k),
    }
}

pub(crate) fn v_dest(mode: Mode, w: PairId, k: NodeId) -> VarKey {
    match mode {
        Mode::Rapid => VarKey::VDR(w, k),
        Mode::Slow => VarKey::VDS(w, k),
    }
}

pub(crate) fn check_instance(inst: &TransitInstance, scope: Scope) -> Result<(), FormulationError> {
    for mode in scope.modes() {
        if inst.origins(*mode).is_empty() {
            return Err(FormulationError::EmptyTerminals(if *mode == Mode::Rapid { "O_R" } else { "O_S" }));
        }
        if inst.dests(*mode).is_empty() {
            return Err(FormulationError::EmptyTerminals(if *mode == Mode::Rapid { "D_R" } else { "D_S" }));
        }
    }
    if scope.slow {
        let have = inst.edges.iter().filter(|e| e.on_old_slow_line).count();
        if inst.params.min_unchanged_slow_edges > have {
            return Err(FormulationError::OldLineTooShort {
                need: inst.params.min_unchanged_slow_edges,
                have,
            });
        }
    }
    Ok(())
}

/// Design keys in column order.
pub fn design_keys(inst: &TransitInstance, scope: Scope) -> Vec<VarKey> {
    let mut keys: Vec<VarKey> = inst.topo.rapid_edges.iter().map(|&e| VarKey::XR(e)).collect();
    if scope.slow {
        keys.extend(inst.topo.slow_edges.iter().map(|&e| VarKey::XS(e)));
    }
    keys.extend(inst.topo.rapid_nodes.iter().map(|&i| VarKey::YR(i)));
    keys.extend(inst.topo.rapid_nodes.iter().map(|&i| VarKey::ZR(i)));
    if scope.slow {
        keys.extend(inst.topo.slow_nodes.iter().map(|&k| VarKey::ZS(k)));
    }
    keys
}

/// Keys of one pair's block in column order; `with_flows = false` leaves out
/// the arc and transfer flows (the Benders projection).
pub fn pair_keys(inst: &TransitInstance, w: PairId, scope: Scope, with_flows: bool) -> Vec<VarKey> {
    let mut keys = vec![VarKey::F(w)];
    if with_flows {
        for &mode in scope.modes() {
            keys.extend(inst.arcs_of(mode).iter().map(|&a| fa(mode, w, a)));
        }
        if scope.slow {
            keys.extend(inst.topo.trans_nodes.iter().map(|&k| VarKey::FSR(w, k)));
            keys.extend(inst.topo.trans_nodes.iter().map(|&k| VarKey::FRS(w, k)));
        }
    }
    for &mode in scope.modes() {
        keys.extend(inst.nodes_of(mode).iter().map(|&k| v_orig(mode, w, k)));
        keys.extend(inst.nodes_of(mode).iter().map(|&k| v_dest(mode, w, k)));
    }
    for &mode in scope.modes() {
        keys.extend(inst.arcs_of(mode).iter().map(|&a| h(mode, w, a)));
    }
    keys
}

/// Objective coefficient and upper bound of a key.
pub fn key_obj_upper(inst: &TransitInstance, key: VarKey) -> (f64, f64) {
    match key {
        VarKey::F(w) => (inst.demands[w].demand, 1.0),
        _ => (0.0, if walk_fixed_zero(inst, key) { 0.0 } else { 1.0 }),
    }
}

/// Walk variables without a walk link are fixed at zero (the walk-bound rows).
pub fn walk_fixed_zero(inst: &TransitInstance, key: VarKey) -> bool {
    let (w, k, mode, origin) = match key {
        VarKey::VOR(w, k) => (w, k, Mode::Rapid, true),
        VarKey::VOS(w, k) => (w, k, Mode::Slow, true),
        VarKey::VDR(w, k) => (w, k, Mode::Rapid, false),
        VarKey::VDS(w, k) => (w, k, Mode::Slow, false),
        _ => return false,
    };
    let d = &inst.demands[w];
    let c = if origin { d.origin } else { d.dest };
    inst.walk_time(c, k, mode).is_none()
}

/// Budget, design, spacing rows.
pub fn design_rows(inst: &TransitInstance, scope: Scope) -> Vec<KeyedRow> {
    let p = &inst.params;
    let mut rows = Vec::new();
    let le = Sense::Le;
    let eq = Sense::Eq;

    let rapid_edges = &inst.topo.rapid_edges;
    rows.push(KeyedRow::new(
        rapid_edges.iter().map(|&e| (VarKey::XR(e), 1.0)).collect(),
        le,
        p.max_rapid_edges as f64,
        "budget[R]".into(),
    ));
    for &e in rapid_edges {
        for &i in &inst.edges[e].endpoints {
            rows.push(KeyedRow::new(
                vec![(VarKey::XR(e), 1.0), (VarKey::ZR(i), -1.0), (VarKey::YR(i), -1.0)],
                le,
                0.0,
                format!("design_1[e={e},i={i}]"),
            ));
        }
    }
    let o_r = inst.origins(Mode::Rapid);
    let d_r = inst.dests(Mode::Rapid);
    rows.push(KeyedRow::new(o_r.iter().map(|&o| (VarKey::ZR(o), 1.0)).collect(), eq, 1.0, "design_2".into()));
    rows.push(KeyedRow::new(d_r.iter().map(|&d| (VarKey::ZR(d), 1.0)).collect(), eq, 1.0, "design_3".into()));
    for (set, fam) in [(&o_r, "design_4"), (&d_r, "design_5")] {
        let coeffs = set
            .iter()
            .flat_map(|&o| inst.incident(o, Mode::Rapid).iter().map(|&e| (VarKey::XR(e), 1.0)))
            .collect();
        rows.push(KeyedRow::new(coeffs, eq, 1.0, fam.into()));
    }
    for &i in &inst.topo.rapid_nodes {
        rows.push(KeyedRow::new(
            vec![(VarKey::ZR(i), 1.0), (VarKey::YR(i), 1.0)],
            le,
            1.0,
            format!("design_6[i={i}]"),
        ));
    }
    let mut d7: Vec<(VarKey, f64)> = rapid_edges.iter().map(|&e| (VarKey::XR(e), 1.0)).collect();
    for &i in &inst.topo.rapid_nodes {
        d7.push((VarKey::YR(i), -1.0));
        d7.push((VarKey::ZR(i), -1.0));
    }
    rows.push(KeyedRow::new(d7, eq, -1.0, "design_7".into()));
    for &k in &inst.topo.rapid_nodes {
        if inst.is_terminal(k, Mode::Rapid) {
            continue;
        }
        let mut c: Vec<(VarKey, f64)> = inst.incident(k, Mode::Rapid).iter().map(|&e| (VarKey::XR(e), 1.0)).collect();
        c.push((VarKey::ZR(k), -2.0));
        c.push((VarKey::YR(k), -2.0));
        rows.push(KeyedRow::new(c, eq, 0.0, format!("design_8[k={k}]")));
    }

    if scope.slow {
        let slow_edges = &inst.topo.slow_edges;
        rows.push(KeyedRow::new(
            slow_edges.iter().map(|&e| (VarKey::XS(e), 1.0)).collect(),
            le,
            p.max_slow_edges as f64,
            "budget[S]".into(),
        ));
        for &e in slow_edges {
            for &i in &inst.edges[e].endpoints {
                rows.push(KeyedRow::new(
                    vec![(VarKey::XS(e), 1.0), (VarKey::ZS(i), -1.0)],
                    le,
                    0.0,
                    format!("design_9[e={e},i={i}]"),
                ));
            }
        }
        let o_s = inst.origins(Mode::Slow);
        let d_s = inst.dests(Mode::Slow);
        rows.push(KeyedRow::new(o_s.iter().map(|&o| (VarKey::ZS(o), 1.0)).collect(), eq, 1.0, "design_10".into()));
        rows.push(KeyedRow::new(d_s.iter().map(|&d| (VarKey::ZS(d), 1.0)).collect(), eq, 1.0, "design_11".into()));
        for (set, fam) in [(&o_s, "design_12"), (&d_s, "design_13")] {
            let coeffs = set
                .iter()
                .flat_map(|&o| inst.incident(o, Mode::Slow).iter().map(|&e| (VarKey::XS(e), 1.0)))
                .collect();
            rows.push(KeyedRow::new(coeffs, eq, 1.0, fam.into()));
        }
        let mut d14: Vec<(VarKey, f64)> = slow_edges.iter().map(|&e| (VarKey::XS(e), 1.0)).collect();
        d14.extend(inst.topo.slow_nodes.iter().map(|&k| (VarKey::ZS(k), -1.0)));
        rows.push(KeyedRow::new(d14, eq, -1.0, "design_14".into()));
        for &k in &inst.topo.slow_nodes {
            if inst.is_terminal(k, Mode::Slow) {
                continue;
            }
            let mut c: Vec<(VarKey, f64)> = inst.incident(k, Mode::Slow).iter().map(|&e| (VarKey::XS(e), 1.0)).collect();
            c.push((VarKey::ZS(k), -2.0));
            rows.push(KeyedRow::new(c, eq, 0.0, format!("design_15[k={k}]")));
        }
        rows.push(KeyedRow::new(
            slow_edges
                .iter()
                .filter(|&&e| inst.edges[e].on_old_slow_line)
                .map(|&e| (VarKey::XS(e), 1.0))
                .collect(),
            Sense::Ge,
            p.min_unchanged_slow_edges as f64,
            "design_16".into(),
        ));
    }

    // Minimum stop spacing; j = i is excluded from the neighbour sum.
    for &i in &inst.topo.rapid_nodes {
        let near: Vec<NodeId> = inst
            .topo
            .rapid_nodes
            .iter()
            .copied()
            .filter(|&j| j != i && inst.node_distance(i, j) <= p.min_station_spacing)
            .collect();
        if near.is_empty() {
            continue;
        }
        let mut c = vec![(VarKey::ZR(i), 1.0)];
        c.extend(near.iter().map(|&j| (VarKey::ZR(j), 1.0)));
        rows.push(KeyedRow::new(c, le, 1.0, format!("spacing[i={i}]")));
    }
    rows
}

/// Per-pair rows kept in the Benders master: walk/coverage relations and the
/// h ≤ z half of the linearization.
pub fn pair_master_rows(inst: &TransitInstance, w: PairId, scope: Scope) -> Vec<KeyedRow> {
    let mut rows = Vec::new();
    for (fam, orig) in [("relation_3", true), ("relation_4", false)] {
        let mut c = vec![(VarKey::F(w), -1.0)];
        for &mode in scope.modes() {
            for &k in inst.nodes_of(mode) {
                let key = if orig { v_orig(mode, w, k) } else { v_dest(mode, w, k) };
                if !walk_fixed_zero(inst, key) {
                    c.push((key, 1.0));
                }
            }
        }
        rows.push(KeyedRow::new(c, Sense::Eq, 0.0, format!("{fam}[w={w}]")));
    }
    for &mode in scope.modes() {
        let (fo, fd) = match mode {
            Mode::Rapid => ("relation_5", "relation_7"),
            Mode::Slow => ("relation_6", "relation_8"),
        };
        for &k in inst.nodes_of(mode) {
            for (fam, key) in [(fo, v_orig(mode, w, k)), (fd, v_dest(mode, w, k))] {
                if walk_fixed_zero(inst, key) {
                    continue;
                }
                rows.push(KeyedRow::new(
                    vec![(key, 1.0), (z(mode, k), -1.0)],
                    Sense::Le,
                    0.0,
                    format!("{fam}[w={w},k={k}]"),
                ));
            }
        }
    }
    for &mode in scope.modes() {
        let fam = if mode == Mode::Rapid { "lin_R2" } else { "lin_S2" };
        for &a in inst.arcs_of(mode) {
            let tail = inst.arcs[a].tail;
            rows.push(KeyedRow::new(
                vec![(h(mode, w, a), 1.0), (z(mode, tail), -1.0)],
                Sense::Le,
                0.0,
                format!("{fam}[w={w},a={a}]"),
            ));
        }
    }
    rows
}

/// Per-pair rows that involve arc or transfer flows (the Benders subproblem).
pub fn pair_flow_rows(inst: &TransitInstance, w: PairId, scope: Scope) -> Vec<KeyedRow> {
    let p = &inst.params;
    let mut rows = Vec::new();
    let trans = scope.slow;
    let out_sum = |mode: Mode, k: NodeId, sign: f64| -> Vec<(VarKey, f64)> {
        inst.out_arcs(k, mode).iter().map(|&a| (fa(mode, w, a), sign)).collect()
    };
    let in_sum = |mode: Mode, k: NodeId, sign: f64| -> Vec<(VarKey, f64)> {
        inst.in_arcs(k, mode).iter().map(|&a| (fa(mode, w, a), sign)).collect()
    };
    let live = |key: VarKey| !walk_fixed_zero(inst, key);

    // Conservation at nodes without transfers.
    for &mode in scope.modes() {
        let fam = if mode == Mode::Rapid { "flow_1" } else { "flow_11" };
        for &k in inst.nodes_of(mode) {
            if trans && inst.is_trans(k) {
                continue;
            }
            let mut c = out_sum(mode, k, 1.0);
            c.extend(in_sum(mode, k, -1.0));
            for (key, s) in [(v_orig(mode, w, k), -1.0), (v_dest(mode, w, k), 1.0)] {
                if live(key) {
                    c.push((key, s));
                }
            }
            rows.push(KeyedRow::new(c, Sense::Eq, 0.0, format!("{fam}[w={w},k={k}]")));
        }
    }
    // Boarding needs a departing arc, alighting an arriving one.
    for &mode in scope.modes() {
        let (fo, fd) = match mode {
            Mode::Rapid => ("flow_2", "flow_4"),
            Mode::Slow => ("flow_3", "flow_5"),
        };
        for &k in inst.nodes_of(mode) {
            let vo = v_orig(mode, w, k);
            if live(vo) {
                let mut c = vec![(vo, 1.0)];
                c.extend(out_sum(mode, k, -1.0));
                rows.push(KeyedRow::new(c, Sense::Le, 0.0, format!("{fo}[w={w},k={k}]")));
            }
            let vd = v_dest(mode, w, k);
            if live(vd) {
                let mut c = vec![(vd, 1.0)];
                c.extend(in_sum(mode, k, -1.0));
                rows.push(KeyedRow::new(c, Sense::Le, 0.0, format!("{fd}[w={w},k={k}]")));
            }
        }
    }
    for &mode in scope.modes() {
        let fam = if mode == Mode::Rapid { "flow_6" } else { "flow_7" };
        for &a in inst.arcs_of(mode) {
            rows.push(KeyedRow::new(
                vec![(fa(mode, w, a), 1.0), (VarKey::F(w), -1.0)],
                Sense::Le,
                0.0,
                format!("{fam}[w={w},a={a}]"),
            ));
        }
    }

    if trans {
        let tn = &inst.topo.trans_nodes;
        rows.push(KeyedRow::new(
            tn.iter().map(|&k| (VarKey::FSR(w, k), 1.0)).collect(),
            Sense::Le,
            1.0,
            format!("transfer_1[w={w}]"),
        ));
        rows.push(KeyedRow::new(
            tn.iter().map(|&k| (VarKey::FRS(w, k), 1.0)).collect(),
            Sense::Le,
            1.0,
            format!("transfer_2[w={w}]"),
        ));
        for &k in tn {
            // in_R + SR − out_R − RS = −vO_R + vD_R
            let mut c = in_sum(Mode::Rapid, k, 1.0);
            c.extend(out_sum(Mode::Rapid, k, -1.0));
            c.push((VarKey::FSR(w, k), 1.0));
            c.push((VarKey::FRS(w, k), -1.0));
            for (key, s) in [(VarKey::VOR(w, k), 1.0), (VarKey::VDR(w, k), -1.0)] {
                if live(key) {
                    c.push((key, s));
                }
            }
            rows.push(KeyedRow::new(c, Sense::Eq, 0.0, format!("transfer_3[w={w},k={k}]")));
            // in_S + RS − out_S − SR = −vO_S + vD_S
            let mut c = in_sum(Mode::Slow, k, 1.0);
            c.extend(out_sum(Mode::Slow, k, -1.0));
            c.push((VarKey::FRS(w, k), 1.0));
            c.push((VarKey::FSR(w, k), -1.0));
            for (key, s) in [(VarKey::VOS(w, k), 1.0), (VarKey::VDS(w, k), -1.0)] {
                if live(key) {
                    c.push((key, s));
                }
            }
            rows.push(KeyedRow::new(c, Sense::Eq, 0.0, format!("transfer_4[w={w},k={k}]")));
        }
        for &k in tn {
            let mut c = vec![(VarKey::FRS(w, k), 1.0)];
            c.extend(out_sum(Mode::Slow, k, -1.0));
            rows.push(KeyedRow::new(c, Sense::Le, 0.0, format!("transfer_5[w={w},k={k},out=S]")));
            let mut c = vec![(VarKey::FRS(w, k), 1.0)];
            c.extend(in_sum(Mode::Rapid, k, -1.0));
            rows.push(KeyedRow::new(c, Sense::Le, 0.0, format!("transfer_5[w={w},k={k},in=R]")));
            let mut c = vec![(VarKey::FSR(w, k), 1.0)];
            c.extend(in_sum(Mode::Slow, k, -1.0));
            rows.push(KeyedRow::new(c, Sense::Le, 0.0, format!("transfer_6[w={w},k={k},in=S]")));
            let mut c = vec![(VarKey::FSR(w, k), 1.0)];
            c.extend(out_sum(Mode::Rapid, k, -1.0));
            rows.push(KeyedRow::new(c, Sense::Le, 0.0, format!("transfer_6[w={w},k={k},out=R]")));
        }
    }

    for &mode in scope.modes() {
        let fam = if mode == Mode::Rapid { "loc_allo_1" } else { "loc_allo_2" };
        for &e in inst.edges_of(mode) {
            let [a, b] = inst.topo.edge_arcs[&(e, mode)];
            rows.push(KeyedRow::new(
                vec![(fa(mode, w, a), 1.0), (fa(mode, w, b), 1.0), (x(mode, e), -1.0)],
                Sense::Le,
                0.0,
                format!("{fam}[w={w},e={e}]"),
            ));
        }
    }
    if trans {
        for &e in &inst.topo.rapid_edges {
            if !inst.edges[e].in_slow {
                continue;
            }
            let [ra, rb] = inst.topo.edge_arcs[&(e, Mode::Rapid)];
            let [sa, sb] = inst.topo.edge_arcs[&(e, Mode::Slow)];
            rows.push(KeyedRow::new(
                vec![
                    (VarKey::FR(w, ra), 1.0),
                    (VarKey::FR(w, rb), 1.0),
                    (VarKey::FS(w, sa), 1.0),
                    (VarKey::FS(w, sb), 1.0),
                ],
                Sense::Le,
                1.0,
                format!("loc_allo_3[w={w},e={e}]"),
            ));
        }
        for &k in &inst.topo.trans_nodes {
            for (fam, zk) in [("alignment_1", VarKey::ZR(k)), ("alignment_2", VarKey::ZS(k))] {
                rows.push(KeyedRow::new(
                    vec![(VarKey::FSR(w, k), 1.0), (VarKey::FRS(w, k), 1.0), (zk, -1.0)],
                    Sense::Le,
                    0.0,
                    format!("{fam}[w={w},k={k}]"),
                ));
            }
        }
    }

    rows.push(utility_row(inst, w, scope));

    for &mode in scope.modes() {
        let (f1, f3) = if mode == Mode::Rapid { ("lin_R1", "lin_R3") } else { ("lin_S1", "lin_S3") };
        for &a in inst.arcs_of(mode) {
            let tail = inst.arcs[a].tail;
            rows.push(KeyedRow::new(
                vec![(h(mode, w, a), 1.0), (fa(mode, w, a), -1.0)],
                Sense::Le,
                0.0,
                format!("{f1}[w={w},a={a}]"),
            ));
            rows.push(KeyedRow::new(
                vec![(fa(mode, w, a), 1.0), (z(mode, tail), 1.0), (h(mode, w, a), -1.0)],
                Sense::Le,
                1.0,
                format!("{f3}[w={w},a={a}]"),
            ));
        }
    }

    if p.enable_shape_constraints {
        for &k in &inst.topo.rapid_nodes {
            let pk = inst.nodes[k].position;
            for &a in inst.in_arcs(k, Mode::Rapid) {
                let pi = inst.nodes[inst.arcs[a].tail].position;
                let acute: Vec<ArcId> = inst
                    .out_arcs(k, Mode::Rapid)
                    .iter()
                    .copied()
                    .filter(|&b| {
                        let pj = inst.nodes[inst.arcs[b].head].position;
                        turn_is_acute(pk, pi, pj)
                    })
                    .collect();
                if acute.is_empty() {
                    continue;
                }
                let mut c = vec![(VarKey::FR(w, a), 1.0)];
                c.extend(acute.iter().map(|&b| (VarKey::FR(w, b), 1.0)));
                rows.push(KeyedRow::new(c, Sense::Le, 1.0, format!("shape[w={w},k={k},a={a}]")));
            }
        }
    }
    rows
}

/// The angle at `k` between the incoming segment (back towards `i`) and the
/// outgoing one (towards `j`) is at most 90 degrees.
pub fn turn_is_acute(k: [f64; 2], i: [f64; 2], j: [f64; 2]) -> bool {
    let u = [i[0] - k[0], i[1] - k[1]];
    let v = [j[0] - k[0], j[1] - k[1]];
    u[0] * v[0] + u[1] * v[1] >= 0.0
}

/// Public trip time ≤ private utility, with dwell linearized through h.
pub fn utility_row(inst: &TransitInstance, w: PairId, scope: Scope) -> KeyedRow {
    let p = &inst.params;
    let d = &inst.demands[w];
    let mut c = Vec::new();
    for &mode in scope.modes() {
        for &k in inst.nodes_of(mode) {
            if let Some(t) = inst.walk_time(d.origin, k, mode) {
                c.push((v_orig(mode, w, k), t));
            }
            if let Some(t) = inst.walk_time(d.dest, k, mode) {
                c.push((v_dest(mode, w, k), t));
            }
        }
        for &a in inst.arcs_of(mode) {
            c.push((fa(mode, w, a), inst.arcs[a].traverse_time));
        }
        let stop = if mode == Mode::Rapid { p.stop_time_rapid } else { p.stop_time_slow };
        for &a in inst.arcs_of(mode) {
            c.push((h(mode, w, a), stop));
        }
    }
    if scope.slow {
        for &k in &inst.topo.trans_nodes {
            c.push((VarKey::FRS(w, k), p.transfer_time_rs));
            c.push((VarKey::FSR(w, k), p.transfer_time_sr));
        }
    }
    c.push((VarKey::F(w), p.wait_time - 0.5 * p.stop_time_rapid - d.utility()));
    KeyedRow::new(c, Sense::Le, 0.0, format!("utility[w={w}]"))
}

/// Builds a model over `keys` (column order) and keyed `rows`.
pub fn assemble(inst: &TransitInstance, name: &str, scope: Scope, keys: Vec<VarKey>, rows: Vec<KeyedRow>) -> IndModel {
    let mut model = MilpModel::new(name, true);
    let mut dir = VarDirectory::default();
    for key in keys {
        let (obj, upper) = key_obj_upper(inst, key);
        dir.push(key);
        model.add_column(Column {
            name: key.to_string(),
            lower: 0.0,
            upper,
            integer: true,
            obj,
            class: key.class(),
        });
    }
    for r in rows {
        let coeffs = r
            .coeffs
            .iter()
            .map(|&(k, a)| (dir.col(k).unwrap_or_else(|| panic!("row {} uses unknown key {k}", r.tag)), a))
            .collect();
        model.add_row(coeffs, r.sense, r.rhs, r.tag);
    }
    IndModel { model, dir, scope }
}

fn build_scoped(inst: &TransitInstance, scope: Scope, name: &str) -> Result<IndModel, FormulationError> {
    check_instance(inst, scope)?;
    let mut keys = design_keys(inst, scope);
    let mut rows = design_rows(inst, scope);
    for w in 0..inst.num_pairs() {
        keys.extend(pair_keys(inst, w, scope, true));
        rows.extend(pair_master_rows(inst, w, scope));
        rows.extend(pair_flow_rows(inst, w, scope));
    }
    Ok(assemble(inst, name, scope, keys, rows))
}

/// The full integrated model.
pub fn build_ind(inst: &TransitInstance) -> Result<IndModel, FormulationError> {
    build_scoped(inst, Scope::FULL, &format!("ind-{}", inst.name))
}

/// Closed-form column count of [`build_ind`].
pub fn expected_column_count(inst: &TransitInstance) -> usize {
    let t = &inst.topo;
    let (er, es, nr, ns, ar, asl, nt) = (
        t.rapid_edges.len(),
        t.slow_edges.len(),
        t.rapid_nodes.len(),
        t.slow_nodes.len(),
        t.rapid_arcs.len(),
        t.slow_arcs.len(),
        t.trans_nodes.len(),
    );
    er + es + 2 * nr + ns + inst.num_pairs() * (1 + ar + asl + 2 * nt + 2 * nr + 2 * ns + ar + asl)
}

/// Fixed rapid line handed from stage 1 to stage 2 of the sequential baseline.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RapidDesign {
    pub edges: Vec<EdgeId>,
    pub stops: Vec<NodeId>,
    pub nonstops: Vec<NodeId>,
}

/// Sequential baseline: the rapid-only stage-1 model plus a factory that
/// builds stage 2 with the rapid line fixed.
pub struct Sequential<'a> {
    pub stage1: IndModel,
    inst: &'a TransitInstance,
}

impl<'a> Sequential<'a> {
    /// Full IND with x_R, y_R, z_R fixed to `design`.
    pub fn stage2(&self, design: &RapidDesign) -> Result<IndModel, FormulationError> {
        let inst = self.inst;
        let rows = design_rows(inst, Scope::RAPID_ONLY);
        let value = |k: VarKey| -> f64 {
            let hit = match k {
                VarKey::XR(e) => design.edges.contains(&e),
                VarKey::ZR(i) => design.stops.contains(&i),
                VarKey::YR(i) => design.nonstops.contains(&i),
                _ => false,
            };
            if hit {
                1.0
            } else {
                0.0
            }
        };
        for r in &rows {
            let act = r.activity(value);
            let bad = match r.sense {
                Sense::Le => act > r.rhs + 1e-9,
                Sense::Ge => act < r.rhs - 1e-9,
                Sense::Eq => (act - r.rhs).abs() > 1e-9,
            };
            if bad {
                return Err(FormulationError::BadRapidDesign(format!("row {} violated", r.tag)));
            }
        }
        if let Err(msg) = solution::rapid_path_check(inst, &design.edges) {
            return Err(FormulationError::BadRapidDesign(msg));
        }
        let mut m = build_scoped(inst, Scope::FULL, &format!("seq2-{}", inst.name))?;
        for (j, &k) in m.dir.keys().iter().enumerate() {
            if matches!(k, VarKey::XR(_) | VarKey::ZR(_) | VarKey::YR(_)) {
                let v = value(k);
                m.model.columns[j].lower = v;
                m.model.columns[j].upper = v;
            }
        }
        Ok(m)
    }
}

pub fn build_sequential(inst: &TransitInstance) -> Result<Sequential<'_>, FormulationError> {
    let stage1 = build_scoped(inst, Scope::RAPID_ONLY, &format!("seq1-{}", inst.name))?;
    Ok(Sequential { stage1, inst })
}

/// Reads a rapid design from stage-1 (or any) column values.
pub fn rapid_design_from(m: &IndModel, inst: &TransitInstance, x: &[f64]) -> RapidDesign {
    let on = |k: VarKey| m.dir.value(x, k) > 0.5;
    RapidDesign {
        edges: inst.topo.rapid_edges.iter().copied().filter(|&e| on(VarKey::XR(e))).collect(),
        stops: inst.topo.rapid_nodes.iter().copied().filter(|&i| on(VarKey::ZR(i))).collect(),
        nonstops: inst.topo.rapid_nodes.iter().copied().filter(|&i| on(VarKey::YR(i))).collect(),
    }
}

#[cfg(test)]
mod tests;
