//! Branch and bound over the simplex kernel, with lazy and user cut hooks.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::lp::{Basis, LinearRow, LpSolver, LpStatus};
use crate::model::{MilpModel, VarClass};

pub const INT_TOL: f64 = 1e-6;
const CUT_TOL: f64 = 1e-6;
const PLUNGE_DEPTH: usize = 10;
const USER_ROUNDS: usize = 3;

/// Hooks called by the search. Returned rows are appended globally.
pub trait CutCallback {
    /// Integral candidate: rows it violates reject it.
    fn lazy(&mut self, _x: &[f64]) -> Vec<LinearRow> {
        Vec::new()
    }

    /// Fractional node LP solution.
    fn user(&mut self, _x: &[f64], _node: usize, _depth: usize) -> Vec<LinearRow> {
        Vec::new()
    }

    /// A candidate passed every lazy check and became the incumbent.
    fn on_incumbent(&mut self, _x: &[f64]) {}
}

/// Runs several callbacks in order; the first that cuts wins.
pub struct Chain<'a>(pub Vec<&'a mut dyn CutCallback>);

impl CutCallback for Chain<'_> {
    fn lazy(&mut self, x: &[f64]) -> Vec<LinearRow> {
        for cb in self.0.iter_mut() {
            let cuts = cb.lazy(x);
            if !cuts.is_empty() {
                return cuts;
            }
        }
        Vec::new()
    }

    fn user(&mut self, x: &[f64], node: usize, depth: usize) -> Vec<LinearRow> {
        let mut all = Vec::new();
        for cb in self.0.iter_mut() {
            all.extend(cb.user(x, node, depth));
        }
        all
    }

    fn on_incumbent(&mut self, x: &[f64]) {
        for cb in self.0.iter_mut() {
            cb.on_incumbent(x);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MipLimits {
    /// Seconds.
    pub time: Option<f64>,
    pub nodes: Option<usize>,
    /// Relative gap (fraction) at which the search stops.
    pub gap: f64,
}

impl Default for MipLimits {
    fn default() -> Self {
        MipLimits {
            time: None,
            nodes: None,
            gap: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    Optimal,
    Infeasible,
    Unbounded,
    TimeLimit,
    NodeLimit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Wall time in seconds.
    pub t: f64,
    pub nodes: usize,
    pub n_cuts: usize,
    pub lazy_cuts: usize,
    pub user_cuts: usize,
    /// Incumbent objective, absent when no solution was found.
    pub obj_v: Option<f64>,
    #[serde(with = "float_or_text")]
    pub bound: f64,
    /// Relative gap in percent, absent without an incumbent.
    #[serde(with = "opt_float_or_text")]
    pub gap: Option<f64>,
    pub lp_iterations: usize,
    pub termination: Termination,
}

/// JSON has no infinities; they are written as the strings "inf" / "-inf".
mod float_or_text {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    pub(super) enum Repr {
        Num(f64),
        Text(String),
    }

    pub(super) fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else if v < 0.0 {
            Repr::Text("-inf".into())
        } else {
            Repr::Text("nan".into())
        }
    }

    pub(super) fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                _ => Err(E::custom(format!("expected a number, got {t:?}"))),
            },
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }
}

mod opt_float_or_text {
    use super::float_or_text::{from_repr, to_repr, Repr};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.map(to_repr).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<Repr>::deserialize(d)?.map(from_repr).transpose()
    }
}

impl SolveStats {
    pub fn gap_percent(bound: f64, inc: f64) -> f64 {
        if inc.abs() < 1e-9 {
            if (bound - inc).abs() < 1e-9 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            (bound - inc).abs() / inc.abs() * 100.0
        }
    }
}

#[derive(Debug, Clone)]
pub struct MipResult {
    pub x: Option<Vec<f64>>,
    pub stats: SolveStats,
}

/// Most fractional integer column; ties by class priority, then index.
pub fn branching_choice(values: &[f64], classes: &[VarClass], integer: &[bool]) -> Option<usize> {
    let mut best: Option<(f64, VarClass, usize)> = None;
    for (j, &v) in values.iter().enumerate() {
        if !integer[j] {
            continue;
        }
        let frac = v - v.floor();
        if frac <= INT_TOL || frac >= 1.0 - INT_TOL {
            continue;
        }
        let score = (frac - 0.5).abs();
        let cand = (score, classes[j], j);
        let better = match best {
            None => true,
            Some((s, c, i)) => {
                if (score - s).abs() > 1e-12 {
                    score < s
                } else {
                    (classes[j], j) < (c, i)
                }
            }
        };
        if better {
            best = Some(cand);
        }
    }
    best.map(|b| b.2)
}

struct Node {
    id: usize,
    depth: usize,
    /// Parent LP value (an upper bound for this subtree, maximization form).
    bound: f64,
    fixes: Vec<(usize, f64, f64)>,
    hint: Option<Basis>,
}

struct Open(Node);

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Open {}
impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0
            .bound
            .total_cmp(&other.0.bound)
            .then_with(|| other.0.id.cmp(&self.0.id))
    }
}

struct Search<'a> {
    model: &'a MilpModel,
    solver: LpSolver,
    root_lower: Vec<f64>,
    root_upper: Vec<f64>,
    dirty: Vec<usize>,
    integer: Vec<bool>,
    classes: Vec<VarClass>,
    /// +1 for maximization, −1 for minimization; internal values are maximized.
    sign: f64,
    integral_obj: bool,
    gap: f64,
    incumbent: Option<(f64, Vec<f64>)>,
    stats: SolveStats,
    start: Instant,
    last_log: f64,
}

impl Search<'_> {
    fn apply(&mut self, fixes: &[(usize, f64, f64)]) {
        for &j in &self.dirty {
            self.solver.set_col_bounds(j, self.root_lower[j], self.root_upper[j]);
        }
        self.dirty.clear();
        for &(j, lo, hi) in fixes {
            self.solver.set_col_bounds(j, lo, hi);
            self.dirty.push(j);
        }
    }

    /// Whether a subtree with LP value `bound` can still improve.
    fn promising(&self, bound: f64) -> bool {
        match &self.incumbent {
            None => true,
            Some((inc, _)) => {
                if self.integral_obj {
                    bound >= inc + 1.0 - 1e-6
                } else {
                    bound - inc > (self.gap * inc.abs()).max(1e-9)
                }
            }
        }
    }

    fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }

    fn log(&mut self, open_bound: f64, force: bool) {
        let t = self.elapsed();
        if !force && t - self.last_log < 1.0 {
            return;
        }
        self.last_log = t;
        let inc = self.incumbent.as_ref().map(|i| i.0 * self.sign);
        let bound = open_bound * self.sign;
        let gap = inc.map(|i| SolveStats::gap_percent(bound, i));
        log::info!(
            "node={} bound={:.4} inc={} gap={} cuts={} t={:.2}",
            self.stats.nodes,
            bound,
            inc.map_or("-".to_string(), |v| format!("{v:.4}")),
            gap.map_or("-".to_string(), |g| format!("{g:.2}%")),
            self.stats.n_cuts,
            t
        );
    }

    fn violated(&self, rows: Vec<LinearRow>, x: &[f64]) -> Vec<LinearRow> {
        rows.into_iter().filter(|r| r.violation(x) > CUT_TOL).collect()
    }

    fn add_cuts(&mut self, rows: &[LinearRow]) {
        for r in rows {
            self.solver.add_row(r);
        }
        self.stats.n_cuts += rows.len();
    }
}

struct NoCallbacks;
impl CutCallback for NoCallbacks {}

/// Branch and bound with best-bound search and depth-first plunges.
pub fn solve_milp(model: &MilpModel, callbacks: Option<&mut dyn CutCallback>, limits: &MipLimits) -> MipResult {
    let mut none = NoCallbacks;
    let cb: &mut dyn CutCallback = match callbacks {
        Some(c) => c,
        None => &mut none,
    };
    let lp = model.to_lp();
    let sign = if model.maximize { 1.0 } else { -1.0 };
    let mut s = Search {
        model,
        solver: LpSolver::new(&lp),
        root_lower: lp.col_lower.clone(),
        root_upper: lp.col_upper.clone(),
        dirty: Vec::new(),
        integer: model.columns.iter().map(|c| c.integer).collect(),
        classes: model.columns.iter().map(|c| c.class).collect(),
        sign,
        integral_obj: model.objective_integral(),
        gap: limits.gap,
        incumbent: None,
        stats: SolveStats {
            t: 0.0,
            nodes: 0,
            n_cuts: 0,
            lazy_cuts: 0,
            user_cuts: 0,
            obj_v: None,
            bound: f64::INFINITY,
            gap: None,
            lp_iterations: 0,
            termination: Termination::Optimal,
        },
        start: Instant::now(),
        last_log: 0.0,
    };
    let mut heap: BinaryHeap<Open> = BinaryHeap::new();
    heap.push(Open(Node {
        id: 0,
        depth: 0,
        bound: f64::INFINITY,
        fixes: Vec::new(),
        hint: None,
    }));
    let mut next_id = 1;
    let mut plunge: Option<Node> = None;
    let mut plunge_len = 0;
    let mut termination = Termination::Optimal;
    let mut unbounded = false;
    let mut reported_bound = f64::INFINITY;

    loop {
        let node = match plunge.take() {
            Some(n) => n,
            None => match heap.pop() {
                Some(Open(n)) => {
                    plunge_len = 0;
                    n
                }
                None => break,
            },
        };
        if !s.promising(node.bound) {
            continue;
        }
        if limits.time.is_some_and(|t| s.elapsed() >= t) {
            heap.push(Open(node));
            termination = Termination::TimeLimit;
            break;
        }
        if limits.nodes.is_some_and(|n| s.stats.nodes >= n) {
            heap.push(Open(node));
            termination = Termination::NodeLimit;
            break;
        }
        s.stats.nodes += 1;
        let from_heap = plunge_len == 0;
        s.apply(&node.fixes);
        if from_heap {
            if let Some(h) = &node.hint {
                s.solver.set_basis(h);
            }
        }

        let mut user_rounds = 0;
        let branch = loop {
            let out = s.solver.solve();
            s.stats.lp_iterations += out.iterations;
            match out.status {
                LpStatus::Optimal => {}
                LpStatus::Unbounded => {
                    if node.id == 0 {
                        unbounded = true;
                    }
                    break None;
                }
                LpStatus::Infeasible => break None,
                LpStatus::IterationLimit => {
                    log::warn!("node {}: LP iteration limit, node dropped", node.id);
                    break None;
                }
            }
            let val = out.objective * sign;
            if node.id == 0 {
                reported_bound = reported_bound.min(val);
            }
            if !s.promising(val) {
                break None;
            }
            let x = out.primal;
            match branching_choice(&x, &s.classes, &s.integer) {
                None => {
                    let xr: Vec<f64> = x
                        .iter()
                        .zip(&s.integer)
                        .map(|(&v, &int)| if int { v.round() } else { v })
                        .collect();
                    let cuts = cb.lazy(&xr);
                    let cuts = s.violated(cuts, &xr);
                    if !cuts.is_empty() {
                        s.stats.lazy_cuts += cuts.len();
                        s.add_cuts(&cuts);
                        continue;
                    }
                    let v = s.model.objective_value(&xr) * sign;
                    if s.incumbent.as_ref().is_none_or(|(inc, _)| v > *inc + 1e-9) {
                        cb.on_incumbent(&xr);
                        s.incumbent = Some((v, xr));
                        s.log(reported_bound, true);
                    }
                    break None;
                }
                Some(j) => {
                    if user_rounds < USER_ROUNDS {
                        let cuts = cb.user(&x, s.stats.nodes, node.depth);
                        let cuts = s.violated(cuts, &x);
                        if !cuts.is_empty() {
                            s.stats.user_cuts += cuts.len();
                            s.add_cuts(&cuts);
                            user_rounds += 1;
                            continue;
                        }
                    }
                    break Some((val, x[j], j, out.basis));
                }
            }
        };

        if let Some((val, xj, j, basis)) = branch {
            let (lo, hi) = (s.root_lower[j], s.root_upper[j]);
            let (lo, hi) = node
                .fixes
                .iter()
                .filter(|f| f.0 == j)
                .fold((lo, hi), |_, f| (f.1, f.2));
            let down = (j, lo, xj.floor());
            let up = (j, xj.ceil(), hi);
            let child = |fix: (usize, f64, f64), id: usize| {
                let mut fixes = node.fixes.clone();
                fixes.push(fix);
                Node {
                    id,
                    depth: node.depth + 1,
                    bound: val,
                    fixes,
                    hint: Some(basis.clone()),
                }
            };
            let (first, second) = if xj - xj.floor() >= 0.5 { (up, down) } else { (down, up) };
            let a = child(first, next_id);
            let b = child(second, next_id + 1);
            next_id += 2;
            heap.push(Open(b));
            if plunge_len < PLUNGE_DEPTH {
                plunge = Some(a);
                plunge_len += 1;
            } else {
                heap.push(Open(a));
                plunge_len = 0;
            }
        } else {
            plunge_len = 0;
        }
        let open = heap
            .peek()
            .map(|o| o.0.bound)
            .into_iter()
            .chain(plunge.as_ref().map(|n| n.bound))
            .fold(f64::NEG_INFINITY, f64::max);
        let inc = s.incumbent.as_ref().map_or(f64::NEG_INFINITY, |i| i.0);
        reported_bound = reported_bound.min(open.max(inc));
        s.log(reported_bound, false);
    }

    let inc = s.incumbent.as_ref().map(|i| i.0);
    let open = heap.iter().map(|o| o.0.bound).fold(f64::NEG_INFINITY, f64::max);
    if termination == Termination::Optimal {
        if unbounded {
            termination = Termination::Unbounded;
        } else if inc.is_none() {
            termination = Termination::Infeasible;
        }
        reported_bound = inc.unwrap_or(f64::NEG_INFINITY).min(reported_bound);
    } else {
        reported_bound = reported_bound.min(open.max(inc.unwrap_or(f64::NEG_INFINITY)));
    }
    s.log(reported_bound, true);
    let mut stats = s.stats.clone();
    stats.t = s.elapsed();
    stats.termination = termination;
    stats.bound = reported_bound * sign;
    stats.obj_v = inc.map(|v| v * sign);
    stats.gap = stats.obj_v.map(|v| SolveStats::gap_percent(stats.bound, v));
    MipResult {
        x: s.incumbent.map(|i| i.1),
        stats,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::Sense;
    use crate::model::{Column, MilpModel};

    #[test]
    fn knapsack_two_items() {
        let mut m = MilpModel::new("k", true);
        let a = m.add_binary("a".into(), 3.0, VarClass::Other);
        let b = m.add_binary("b".into(), 2.0, VarClass::Other);
        m.add_row(vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0, "cap".into());
        let r = solve_milp(&m, None, &MipLimits::default());
        assert_eq!(r.stats.obj_v, Some(3.0));
        assert_eq!(r.stats.termination, Termination::Optimal);
        assert_eq!(r.stats.nodes, 1);
    }

    #[test]
    fn branching_priorities() {
        use VarClass::*;
        assert_eq!(branching_choice(&[0.5, 0.5], &[RapidEdge, Coverage], &[true, true]), Some(0));
        assert_eq!(branching_choice(&[0.5, 0.5], &[Coverage, RapidEdge], &[true, true]), Some(1));
        assert_eq!(branching_choice(&[0.0, 0.9], &[Other, Other], &[true, true]), Some(1));
        assert_eq!(branching_choice(&[0.4, 0.6], &[RapidStop, RapidStop], &[true, true]), Some(0));
        assert_eq!(branching_choice(&[1.0, 0.0], &[Other, Other], &[true, true]), None);
    }

    #[test]
    fn needs_branching() {
        // max 5a + 4b + 3c, 2a + 3b + c <= 5, 4a + b + 2c <= 11, 3a + 4b + 2c <= 8
        let mut m = MilpModel::new("b", true);
        let v: Vec<usize> = [5.0, 4.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &c)| {
                m.add_column(Column {
                    name: format!("x{i}"),
                    lower: 0.0,
                    upper: 3.0,
                    integer: true,
                    obj: c,
                    class: VarClass::Other,
                })
            })
            .collect();
        for (coef, rhs) in [([2.0, 3.0, 1.0], 5.0), ([4.0, 1.0, 2.0], 11.0), ([3.0, 4.0, 2.0], 8.0)] {
            m.add_row(v.iter().zip(coef).map(|(&j, a)| (j, a)).collect(), Sense::Le, rhs, "r".into());
        }
        let r = solve_milp(&m, None, &MipLimits::default());
        // Enumerate the integer box.
        let mut best = f64::MIN;
        for a in 0..=3 {
            for b in 0..=3 {
                for c in 0..=3 {
                    let (a, b, c) = (a as f64, b as f64, c as f64);
                    if 2.0 * a + 3.0 * b + c <= 5.0 && 4.0 * a + b + 2.0 * c <= 11.0 && 3.0 * a + 4.0 * b + 2.0 * c <= 8.0 {
                        best = best.max(5.0 * a + 4.0 * b + 3.0 * c);
                    }
                }
            }
        }
        assert_eq!(r.stats.obj_v, Some(best));
    }

    #[test]
    fn infeasible_model() {
        let mut m = MilpModel::new("i", true);
        let a = m.add_binary("a".into(), 1.0, VarClass::Other);
        let b = m.add_binary("b".into(), 1.0, VarClass::Other);
        m.add_row(vec![(a, 2.0), (b, 2.0)], Sense::Eq, 1.0, "odd".into());
        let r = solve_milp(&m, None, &MipLimits::default());
        assert_eq!(r.stats.termination, Termination::Infeasible);
        assert!(r.x.is_none());
    }

    struct ForbidBoth {
        calls: usize,
    }
    impl CutCallback for ForbidBoth {
        fn lazy(&mut self, x: &[f64]) -> Vec<LinearRow> {
            self.calls += 1;
            if x[0] + x[1] > 1.5 {
                vec![LinearRow::new(vec![(0, 1.0), (1, 1.0)], Sense::Le, 1.0)]
            } else {
                Vec::new()
            }
        }
    }

    #[test]
    fn lazy_cut_rejects_candidate() {
        let mut m = MilpModel::new("l", true);
        m.add_binary("a".into(), 3.0, VarClass::Other);
        m.add_binary("b".into(), 2.0, VarClass::Other);
        let mut cb = ForbidBoth { calls: 0 };
        let r = solve_milp(&m, Some(&mut cb), &MipLimits::default());
        assert_eq!(r.stats.obj_v, Some(3.0));
        assert_eq!(r.stats.lazy_cuts, 1);
        assert!(cb.calls >= 2);
    }
}
