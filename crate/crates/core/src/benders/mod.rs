//! Partial branch-and-Benders-cut.
//!
//! A chosen share of pairs keeps its flow columns in the master; for the
//! rest, arc and transfer flows are projected out and enforced through
//! feasibility cuts separated from per-pair LPs. Separation is stabilized
//! with an in-out point.

mod separate;

use std::collections::HashSet;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formulation::{
    assemble, design_keys, design_rows, extract_solution, pair_flow_rows, pair_keys, pair_master_rows, IndModel,
    Scope, SubtourCuts, VarKey,
};
use crate::instance::{PairId, TransitInstance};
use crate::lp::{solve_lp_relaxation, LinearRow, LpStatus};
use crate::mip::{solve_milp, Chain, CutCallback, MipLimits};
use crate::solve::{Outcome, SolveError};

pub use separate::{build_subproblem, separate, BendersCut, Subproblem};

/// How pairs are picked to stay in the master.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Selection {
    Random = 1,
    HighestDemand = 2,
    LowestDemand = 3,
}

impl Selection {
    pub fn from_code(code: u8) -> Option<Selection> {
        match code {
            1 => Some(Selection::Random),
            2 => Some(Selection::HighestDemand),
            3 => Some(Selection::LowestDemand),
            _ => None,
        }
    }

    pub fn code(self) -> u8 {
        self as u8
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartialConfig {
    /// Share of pairs (0 to 100) whose flows stay in the master.
    pub percentage: f64,
    pub selection: Selection,
    pub seed: u64,
}

impl Default for PartialConfig {
    fn default() -> Self {
        PartialConfig {
            percentage: 0.0,
            selection: Selection::Random,
            seed: 0,
        }
    }
}

impl PartialConfig {
    pub fn retained_count(&self, n_pairs: usize) -> usize {
        ((self.percentage / 100.0 * n_pairs as f64).round() as usize).min(n_pairs)
    }
}

/// Pairs kept in the master, sorted by id.
pub fn retained_pairs(inst: &TransitInstance, cfg: &PartialConfig) -> Vec<PairId> {
    let n = inst.num_pairs();
    let k = cfg.retained_count(n);
    let mut ids: Vec<PairId> = (0..n).collect();
    match cfg.selection {
        Selection::Random => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            ids.shuffle(&mut rng);
        }
        Selection::HighestDemand => {
            ids.sort_by(|&a, &b| inst.demands[b].demand.total_cmp(&inst.demands[a].demand).then(a.cmp(&b)))
        }
        Selection::LowestDemand => {
            ids.sort_by(|&a, &b| inst.demands[a].demand.total_cmp(&inst.demands[b].demand).then(a.cmp(&b)))
        }
    }
    ids.truncate(k);
    ids.sort_unstable();
    ids
}

#[derive(Debug, Clone)]
pub struct PartialMaster {
    pub model: IndModel,
    pub retained: Vec<PairId>,
    pub projected: Vec<PairId>,
}

/// Design rows and every pair's master rows; flow columns and rows only for
/// the retained pairs.
pub fn build_partial_master(inst: &TransitInstance, cfg: &PartialConfig) -> Result<PartialMaster, SolveError> {
    crate::formulation::check_instance(inst, Scope::FULL)?;
    let retained = retained_pairs(inst, cfg);
    let scope = Scope::FULL;
    let mut keys = design_keys(inst, scope);
    let mut rows = design_rows(inst, scope);
    let mut projected = Vec::new();
    for w in 0..inst.num_pairs() {
        let keep = retained.binary_search(&w).is_ok();
        keys.extend(pair_keys(inst, w, scope, keep));
        rows.extend(pair_master_rows(inst, w, scope));
        if keep {
            rows.extend(pair_flow_rows(inst, w, scope));
        } else {
            projected.push(w);
        }
    }
    let model = assemble(inst, &format!("master-{}", inst.name), scope, keys, rows);
    Ok(PartialMaster {
        model,
        retained,
        projected,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stabilization {
    /// Weight of the in point in the separation point.
    pub lambda: f64,
    /// Fractional separation runs at nodes whose count is a multiple of this.
    pub user_every: usize,
    /// ... and whose depth is at most this.
    pub user_max_depth: usize,
}

impl Default for Stabilization {
    fn default() -> Self {
        Stabilization {
            lambda: 0.5,
            user_every: 10,
            user_max_depth: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutSource {
    Lazy,
    User,
}

/// One emitted cut, with coefficients over master keys.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CutRecord {
    pub pair: PairId,
    pub source: CutSource,
    pub lambda: f64,
    pub dual_objective: f64,
    pub violation: f64,
    pub coeffs: Vec<(VarKey, f64)>,
    pub rhs: f64,
}

impl CutRecord {
    /// rhs − lhs at a point given by key values.
    pub fn slack(&self, value: impl Fn(VarKey) -> f64) -> f64 {
        self.rhs - self.coeffs.iter().map(|&(k, a)| a * value(k)).sum::<f64>()
    }
}

/// Cut callback separating the projected pairs.
pub struct BendersCallback<'a> {
    master: &'a IndModel,
    subs: Vec<Subproblem>,
    in_point: Vec<f64>,
    stab: Stabilization,
    pub log: Vec<CutRecord>,
    seen: HashSet<Vec<(usize, i64)>>,
}

impl<'a> BendersCallback<'a> {
    pub fn new(inst: &TransitInstance, pm: &'a PartialMaster, in_point: Vec<f64>, stab: Stabilization) -> Self {
        let subs = pm.projected.iter().map(|&w| Subproblem::new(inst, &pm.model, w)).collect();
        BendersCallback {
            master: &pm.model,
            subs,
            in_point,
            stab,
            log: Vec::new(),
            seen: HashSet::new(),
        }
    }

    pub fn in_point(&self) -> &[f64] {
        &self.in_point
    }

    fn run(&mut self, x: &[f64], source: CutSource) -> Vec<LinearRow> {
        let mut rows = Vec::new();
        for sub in &self.subs {
            let cut = separate(sub, x, &self.in_point, self.stab.lambda)
                .or_else(|| (self.stab.lambda > 0.0).then(|| separate(sub, x, &self.in_point, 0.0)).flatten());
            let Some(cut) = cut else { continue };
            let row = cut.row();
            if row.violation(x) <= 1e-6 {
                continue;
            }
            let sig: Vec<(usize, i64)> = row
                .coeffs
                .iter()
                .map(|&(j, a)| (j, (a * 1e9).round() as i64))
                .chain(std::iter::once((usize::MAX, (row.rhs * 1e9).round() as i64)))
                .collect();
            if !self.seen.insert(sig) {
                continue;
            }
            self.log.push(CutRecord {
                pair: sub.pair,
                source,
                lambda: cut.lambda,
                dual_objective: cut.dual_objective,
                violation: row.violation(x),
                coeffs: cut.coeffs.iter().map(|&(j, a)| (self.master.dir.key(j), a)).collect(),
                rhs: cut.rhs,
            });
            rows.push(row);
        }
        rows
    }
}

impl CutCallback for BendersCallback<'_> {
    fn lazy(&mut self, x: &[f64]) -> Vec<LinearRow> {
        self.run(x, CutSource::Lazy)
    }

    fn user(&mut self, x: &[f64], node: usize, depth: usize) -> Vec<LinearRow> {
        if self.stab.user_every == 0 || !node.is_multiple_of(self.stab.user_every) || depth > self.stab.user_max_depth {
            return Vec::new();
        }
        self.run(x, CutSource::User)
    }

    fn on_incumbent(&mut self, x: &[f64]) {
        for (a, &b) in self.in_point.iter_mut().zip(x) {
            *a = 0.5 * *a + 0.5 * b;
        }
    }
}

/// Initial in point: the master LP optimum on design columns, zero on the
/// pair columns of projected pairs (always subproblem feasible).
pub fn initial_in_point(pm: &PartialMaster) -> Vec<f64> {
    let out = solve_lp_relaxation(&pm.model.model);
    let mut x = if out.status == LpStatus::Optimal {
        out.primal
    } else {
        vec![0.0; pm.model.dir.len()]
    };
    for (j, k) in pm.model.dir.keys().iter().enumerate() {
        if let Some(w) = k.pair() {
            if pm.projected.binary_search(&w).is_ok() {
                x[j] = 0.0;
            }
        }
    }
    x
}

#[derive(Debug, Clone)]
pub struct BendersOutcome {
    pub outcome: Outcome,
    pub cuts: Vec<CutRecord>,
    pub retained: Vec<PairId>,
}

/// Branch-and-Benders-cut on the partial master.
pub fn solve_benders(
    inst: &TransitInstance,
    cfg: &PartialConfig,
    stab: &Stabilization,
    limits: &MipLimits,
) -> Result<BendersOutcome, SolveError> {
    let start = Instant::now();
    let pm = build_partial_master(inst, cfg)?;
    let in_point = initial_in_point(&pm);
    let mut benders = BendersCallback::new(inst, &pm, in_point, *stab);
    let mut subtour = SubtourCuts::new(inst, &pm.model);
    let res = {
        let mut chain = Chain(vec![&mut subtour, &mut benders]);
        solve_milp(&pm.model.model, Some(&mut chain), limits)
    };
    let solution = match &res.x {
        Some(x) => Some(extract_solution(inst, &pm.model, x)?),
        None => None,
    };
    let mut stats = res.stats;
    stats.n_cuts = benders.log.len();
    stats.t = start.elapsed().as_secs_f64();
    Ok(BendersOutcome {
        outcome: Outcome { solution, stats },
        cuts: benders.log,
        retained: pm.retained,
    })
}

#[cfg(test)]
mod tests;
