use super::lu::{factorize, LuFactors};
use super::{verify_farkas, Basis, LinearRow, LpOptions, LpOutcome, LpProblem, LpStatus, VarStatus};

/// Product-form update: the basis column at `pos` was replaced by a column
/// whose representation in the previous basis is `entries` (with `pivot` at
/// `pos`).
#[derive(Debug, Clone)]
struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

enum PhaseResult {
    Optimal,
    Infeasible(Vec<f64>),
    Unbounded,
    IterationLimit,
    /// Numerical trouble; the caller refactorizes and restarts.
    Retry,
}

enum PrimalStep {
    Flip,
    Pivot { pos: usize, to_upper: bool, theta: f64 },
    Unbounded,
}

/// Bounded-variable revised simplex over `A x − r = 0`, where `r` are row
/// logicals whose bounds encode the row senses. Internally minimizes.
///
/// A solver keeps its basis between calls to [`LpSolver::solve`], so bound
/// changes and appended rows are re-optimized from the previous basis.
#[derive(Debug, Clone)]
pub struct LpSolver {
    n: usize,
    m: usize,
    cols: Vec<Vec<(usize, f64)>>,
    row_coeffs: Vec<Vec<(usize, f64)>>,
    logical: Vec<[(usize, f64); 1]>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    maximize: bool,
    status: Vec<VarStatus>,
    basis: Vec<usize>,
    x: Vec<f64>,
    lu: Option<LuFactors>,
    etas: Vec<Eta>,
    devex: Vec<f64>,
    dse: Vec<f64>,
    opts: LpOptions,
    iterations: usize,
}

impl LpSolver {
    pub fn new(problem: &LpProblem) -> Self {
        Self::with_options(problem, LpOptions::default())
    }

    pub fn with_options(problem: &LpProblem, opts: LpOptions) -> Self {
        let n = problem.num_cols();
        let sign = if problem.maximize { -1.0 } else { 1.0 };
        let mut s = LpSolver {
            n,
            m: 0,
            cols: vec![Vec::new(); n],
            row_coeffs: Vec::new(),
            logical: Vec::new(),
            cost: problem.obj.iter().map(|c| sign * c).collect(),
            lower: problem.col_lower.clone(),
            upper: problem.col_upper.clone(),
            maximize: problem.maximize,
            status: Vec::with_capacity(n),
            basis: Vec::new(),
            x: vec![0.0; n],
            lu: None,
            etas: Vec::new(),
            devex: vec![1.0; n],
            dse: Vec::new(),
            opts,
            iterations: 0,
        };
        for j in 0..n {
            let st = s.default_nonbasic(j);
            s.status.push(st);
        }
        for row in &problem.rows {
            s.push_row(row);
        }
        s
    }

    pub fn num_cols(&self) -> usize {
        self.n
    }

    pub fn num_rows(&self) -> usize {
        self.m
    }

    fn default_nonbasic(&self, j: usize) -> VarStatus {
        let (l, u) = (self.lower[j], self.upper[j]);
        if l.is_finite() {
            if u.is_finite() && self.cost[j] < 0.0 {
                VarStatus::AtUpper
            } else {
                VarStatus::AtLower
            }
        } else if u.is_finite() {
            VarStatus::AtUpper
        } else {
            VarStatus::Free
        }
    }

    fn push_row(&mut self, row: &LinearRow) {
        let i = self.m;
        self.m += 1;
        let mut coeffs: Vec<(usize, f64)> = Vec::with_capacity(row.coeffs.len());
        for &(j, a) in &row.coeffs {
            if a == 0.0 {
                continue;
            }
            if let Some(e) = coeffs.iter_mut().find(|e| e.0 == j) {
                e.1 += a;
            } else {
                coeffs.push((j, a));
            }
        }
        for &(j, a) in &coeffs {
            self.cols[j].push((i, a));
        }
        self.row_coeffs.push(coeffs);
        self.logical.push([(i, -1.0)]);
        let (lo, hi) = row.sense.range(row.rhs);
        self.cost.push(0.0);
        self.lower.push(lo);
        self.upper.push(hi);
        self.status.push(VarStatus::Basic);
        self.basis.push(self.n + i);
        self.x.push(0.0);
        self.devex.push(1.0);
        self.dse.push(1.0);
        self.lu = None;
    }

    /// Appends a row; its logical enters the basis.
    pub fn add_row(&mut self, row: &LinearRow) {
        self.push_row(row);
    }

    pub fn set_col_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        self.lower[j] = lower;
        self.upper[j] = upper;
    }

    pub fn col_bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    pub fn basis(&self) -> Basis {
        Basis {
            cols: self.status[..self.n].to_vec(),
            rows: self.status[self.n..].to_vec(),
        }
    }

    /// Installs `hint` if it is dimensionally valid. A hint with fewer rows
    /// than the solver (rows appended since it was taken) is extended with
    /// basic logicals. Returns whether the hint was used.
    pub fn set_basis(&mut self, hint: &Basis) -> bool {
        if hint.cols.len() != self.n || hint.rows.len() > self.m {
            return false;
        }
        let mut status: Vec<VarStatus> = hint.cols.iter().chain(hint.rows.iter()).copied().collect();
        status.extend(std::iter::repeat_n(VarStatus::Basic, self.m - hint.rows.len()));
        let basic: Vec<usize> = (0..self.n + self.m)
            .filter(|&j| status[j] == VarStatus::Basic)
            .collect();
        if basic.len() != self.m {
            return false;
        }
        self.status = status;
        self.basis = basic;
        self.lu = None;
        self.etas.clear();
        for w in self.dse.iter_mut() {
            *w = 1.0;
        }
        true
    }

    fn column(&self, j: usize) -> &[(usize, f64)] {
        if j < self.n {
            &self.cols[j]
        } else {
            &self.logical[j - self.n]
        }
    }

    fn dot_col(&self, pi: &[f64], j: usize) -> f64 {
        self.column(j).iter().map(|&(i, a)| pi[i] * a).sum()
    }

    fn is_fixed(&self, j: usize) -> bool {
        self.lower[j] == self.upper[j]
    }

    fn can_increase(&self, j: usize) -> bool {
        match self.status[j] {
            VarStatus::AtLower => self.lower[j] < self.upper[j],
            VarStatus::Free => true,
            _ => false,
        }
    }

    fn can_decrease(&self, j: usize) -> bool {
        match self.status[j] {
            VarStatus::AtUpper => self.lower[j] < self.upper[j],
            VarStatus::Free => true,
            _ => false,
        }
    }

    /// Makes nonbasic statuses consistent with the current bounds and places
    /// nonbasic values on them.
    fn normalize_nonbasic(&mut self) {
        for j in 0..self.n + self.m {
            let (l, u) = (self.lower[j], self.upper[j]);
            let st = match self.status[j] {
                VarStatus::Basic => continue,
                VarStatus::AtLower if l.is_finite() => VarStatus::AtLower,
                VarStatus::AtUpper if u.is_finite() => VarStatus::AtUpper,
                VarStatus::Free if !l.is_finite() && !u.is_finite() => VarStatus::Free,
                _ => {
                    if l.is_finite() {
                        VarStatus::AtLower
                    } else if u.is_finite() {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::Free
                    }
                }
            };
            self.status[j] = st;
            self.x[j] = match st {
                VarStatus::AtLower => l,
                VarStatus::AtUpper => u,
                _ => 0.0,
            };
        }
    }

    fn refactor(&mut self) {
        loop {
            let cols: Vec<&[(usize, f64)]> = self.basis.iter().map(|&j| self.column(j)).collect();
            let (lu, def) = factorize(self.m, &cols);
            if def.positions.is_empty() {
                self.lu = Some(lu);
                self.etas.clear();
                return;
            }
            // Replace unpivotable columns by logicals of the uncovered rows.
            for (&p, &r) in def.positions.iter().zip(def.rows.iter()) {
                let old = self.basis[p];
                let logical = self.n + r;
                if self.status[logical] == VarStatus::Basic {
                    continue;
                }
                let (l, u) = (self.lower[old], self.upper[old]);
                let v = self.x[old];
                self.status[old] = if l.is_finite() && (!u.is_finite() || (v - l).abs() <= (u - v).abs()) {
                    VarStatus::AtLower
                } else if u.is_finite() {
                    VarStatus::AtUpper
                } else {
                    VarStatus::Free
                };
                self.x[old] = match self.status[old] {
                    VarStatus::AtLower => l,
                    VarStatus::AtUpper => u,
                    _ => 0.0,
                };
                self.basis[p] = logical;
                self.status[logical] = VarStatus::Basic;
                self.dse[p] = 1.0;
            }
            log::debug!("basis repaired: {} columns replaced", def.positions.len());
        }
    }

    fn ensure_factor(&mut self) {
        if self.lu.is_none() || self.etas.len() >= self.opts.refactor_every {
            self.refactor();
            self.compute_basic_values();
        }
    }

    /// `B⁻¹ a` for a sparse column `a`; result indexed by basis position.
    fn ftran_sparse(&self, col: &[(usize, f64)]) -> Vec<f64> {
        let mut rhs = vec![0.0; self.m];
        for &(i, a) in col {
            rhs[i] += a;
        }
        self.ftran_dense(rhs)
    }

    fn ftran_dense(&self, mut rhs: Vec<f64>) -> Vec<f64> {
        let mut out = vec![0.0; self.m];
        self.lu.as_ref().expect("factorized").solve(&mut rhs, &mut out);
        for eta in &self.etas {
            let xp = out[eta.pos] / eta.pivot;
            out[eta.pos] = xp;
            if xp != 0.0 {
                for &(i, a) in &eta.entries {
                    out[i] -= a * xp;
                }
            }
        }
        out
    }

    /// Solves `πᵀ B = cᵀ` for `c` indexed by basis position; `π` indexed by row.
    fn btran(&self, mut c: Vec<f64>) -> Vec<f64> {
        for eta in self.etas.iter().rev() {
            let mut s = c[eta.pos];
            for &(i, a) in &eta.entries {
                s -= a * c[i];
            }
            c[eta.pos] = s / eta.pivot;
        }
        let mut out = vec![0.0; self.m];
        self.lu.as_ref().expect("factorized").solve_transposed(&mut c, &mut out);
        out
    }

    fn compute_basic_values(&mut self) {
        let mut rhs = vec![0.0; self.m];
        for j in 0..self.n + self.m {
            if self.status[j] == VarStatus::Basic {
                continue;
            }
            let v = self.x[j];
            if v != 0.0 {
                for &(i, a) in self.column(j) {
                    rhs[i] -= a * v;
                }
            }
        }
        let xb = self.ftran_dense(rhs);
        for (p, &j) in self.basis.iter().enumerate() {
            self.x[j] = xb[p];
        }
    }

    fn push_eta(&mut self, pos: usize, alpha: &[f64]) {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a.abs() > 1e-14)
            .map(|(i, &a)| (i, a))
            .collect();
        self.etas.push(Eta {
            pos,
            pivot: alpha[pos],
            entries,
        });
    }

    fn duals_for(&self, cost_of: impl Fn(usize) -> f64) -> Vec<f64> {
        let cb: Vec<f64> = self.basis.iter().map(|&j| cost_of(j)).collect();
        self.btran(cb)
    }

    fn primal_infeasibility(&self, j: usize) -> f64 {
        let v = self.x[j];
        if v < self.lower[j] {
            self.lower[j] - v
        } else if v > self.upper[j] {
            v - self.upper[j]
        } else {
            0.0
        }
    }

    fn max_primal_infeasibility(&self) -> f64 {
        self.basis
            .iter()
            .map(|&j| self.primal_infeasibility(j))
            .fold(0.0, f64::max)
    }

    fn reduced_costs(&self) -> Vec<f64> {
        let pi = self.duals_for(|j| self.cost[j]);
        let mut d = vec![0.0; self.n + self.m];
        for j in 0..self.n + self.m {
            if self.status[j] != VarStatus::Basic {
                d[j] = self.cost[j] - self.dot_col(&pi, j);
            }
        }
        d
    }

    fn dual_infeasibility(&self, j: usize, d: f64) -> f64 {
        if self.is_fixed(j) {
            return 0.0;
        }
        match self.status[j] {
            VarStatus::Basic => 0.0,
            VarStatus::AtLower => (-d).max(0.0),
            VarStatus::AtUpper => d.max(0.0),
            VarStatus::Free => d.abs(),
        }
    }

    /// Moves boxed nonbasic columns to the bound that makes them dual
    /// feasible. Returns whether every nonbasic column is then dual feasible.
    fn flip_to_dual_feasible(&mut self, d: &[f64]) -> bool {
        let tol = self.opts.optimality_tol;
        let mut all_ok = true;
        let mut flipped = false;
        for j in 0..self.n + self.m {
            if self.dual_infeasibility(j, d[j]) <= tol {
                continue;
            }
            let boxed = self.lower[j].is_finite() && self.upper[j].is_finite();
            match self.status[j] {
                VarStatus::AtLower if boxed => {
                    self.status[j] = VarStatus::AtUpper;
                    self.x[j] = self.upper[j];
                    flipped = true;
                }
                VarStatus::AtUpper if boxed => {
                    self.status[j] = VarStatus::AtLower;
                    self.x[j] = self.lower[j];
                    flipped = true;
                }
                _ => all_ok = false,
            }
        }
        if flipped {
            self.compute_basic_values();
        }
        all_ok
    }

    /// Pushes nonbasic costs slightly further into dual feasibility to break
    /// dual degeneracy. Returns the unperturbed costs.
    fn perturb_costs(&mut self) -> Vec<f64> {
        let saved = self.cost.clone();
        for j in 0..self.n {
            if self.is_fixed(j) {
                continue;
            }
            // Deterministic spread in [0.5, 1).
            let h = (j as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) >> 11;
            let r = 0.5 + 0.5 * (h as f64 / (1u64 << 53) as f64);
            let delta = 1e-7 * (1.0 + saved[j].abs()) * r * 10.0;
            match self.status[j] {
                VarStatus::AtLower => self.cost[j] += delta,
                VarStatus::AtUpper => self.cost[j] -= delta,
                _ => {}
            }
        }
        saved
    }

    pub fn solve(&mut self) -> LpOutcome {
        self.iterations = 0;
        self.normalize_nonbasic();
        self.refactor();
        self.compute_basic_values();
        let mut retries = 0;
        let mut rounds = 0;
        let mut force_primal = false;
        let (status, ray) = loop {
            rounds += 1;
            let d = self.reduced_costs();
            let dual_ok = self.flip_to_dual_feasible(&d);
            let res = if dual_ok && !force_primal {
                let saved = self.perturb_costs();
                let res = self.dual_simplex();
                self.cost = saved;
                res
            } else {
                self.primal_simplex()
            };
            match res {
                PhaseResult::Optimal => {
                    self.refactor();
                    self.compute_basic_values();
                    let pinf = self.max_primal_infeasibility();
                    let d = self.reduced_costs();
                    let dinf = (0..self.n + self.m)
                        .map(|j| self.dual_infeasibility(j, d[j]))
                        .fold(0.0, f64::max);
                    if (pinf <= self.opts.feasibility_tol && dinf <= self.opts.optimality_tol)
                        || rounds >= 6
                    {
                        break (LpStatus::Optimal, None);
                    }
                }
                PhaseResult::Infeasible(ray) => {
                    if verify_farkas(&self.as_problem(), &ray) {
                        break (LpStatus::Infeasible, Some(ray));
                    }
                    // A ray that does not certify anything came from drift:
                    // rebuild and let the primal method decide.
                    retries += 1;
                    if retries > 5 {
                        break (LpStatus::IterationLimit, None);
                    }
                    force_primal = true;
                    self.refactor();
                    self.compute_basic_values();
                }
                PhaseResult::Unbounded => break (LpStatus::Unbounded, None),
                PhaseResult::IterationLimit => break (LpStatus::IterationLimit, None),
                PhaseResult::Retry => {
                    retries += 1;
                    if retries > 5 {
                        break (LpStatus::IterationLimit, None);
                    }
                    self.refactor();
                    self.compute_basic_values();
                }
            }
        };
        self.outcome(status, ray)
    }

    // ---------------------------------------------------------------- primal

    fn primal_simplex(&mut self) -> PhaseResult {
        let tol = self.opts.feasibility_tol;
        let mut bland = false;
        let mut best_obj = f64::INFINITY;
        let mut stall = 0usize;
        let mut was_phase1 = None;
        let mut trouble = 0;
        for w in self.devex.iter_mut() {
            *w = 1.0;
        }
        loop {
            if self.iterations >= self.opts.max_iterations {
                return PhaseResult::IterationLimit;
            }
            self.ensure_factor();

            let phase1 = self.basis.iter().any(|&j| self.primal_infeasibility(j) > tol);
            if was_phase1 != Some(phase1) {
                was_phase1 = Some(phase1);
                best_obj = f64::INFINITY;
                stall = 0;
                bland = false;
            }
            let cost_of = |s: &Self, j: usize| -> f64 {
                if phase1 {
                    if s.status[j] != VarStatus::Basic {
                        0.0
                    } else if s.x[j] < s.lower[j] - tol {
                        -1.0
                    } else if s.x[j] > s.upper[j] + tol {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    s.cost[j]
                }
            };
            let pi = self.duals_for(|j| cost_of(self, j));
            let obj: f64 = if phase1 {
                self.basis.iter().map(|&j| self.primal_infeasibility(j)).sum()
            } else {
                (0..self.n + self.m).map(|j| self.cost[j] * self.x[j]).sum()
            };
            if obj < best_obj - 1e-9 * (1.0 + obj.abs()) {
                best_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > self.opts.stall_threshold {
                    bland = true;
                }
            }

            // Pricing.
            let otol = self.opts.optimality_tol;
            let mut entering: Option<(usize, f64, f64)> = None;
            for j in 0..self.n + self.m {
                if self.status[j] == VarStatus::Basic || self.is_fixed(j) {
                    continue;
                }
                let d = cost_of(self, j) - self.dot_col(&pi, j);
                let dir = if d < -otol && self.can_increase(j) {
                    1.0
                } else if d > otol && self.can_decrease(j) {
                    -1.0
                } else {
                    continue;
                };
                if bland {
                    entering = Some((j, dir, d));
                    break;
                }
                let score = d * d / self.devex[j];
                if entering.is_none_or(|(_, _, s)| score > s) {
                    entering = Some((j, dir, score));
                }
            }
            let Some((q, dir, _)) = entering else {
                if phase1 {
                    let ray: Vec<f64> = pi.iter().map(|v| -v).collect();
                    return PhaseResult::Infeasible(ray);
                }
                return PhaseResult::Optimal;
            };

            let alpha = self.ftran_sparse(self.column(q));
            match self.primal_ratio_test(q, dir, &alpha, phase1, bland) {
                PrimalStep::Unbounded => {
                    if phase1 {
                        trouble += 1;
                        if trouble > 3 {
                            return PhaseResult::Retry;
                        }
                        self.lu = None;
                        continue;
                    }
                    return PhaseResult::Unbounded;
                }
                PrimalStep::Flip => {
                    let delta = dir * (self.upper[q] - self.lower[q]);
                    self.x[q] += delta;
                    self.status[q] = if dir > 0.0 {
                        VarStatus::AtUpper
                    } else {
                        VarStatus::AtLower
                    };
                    for (p, &j) in self.basis.iter().enumerate() {
                        self.x[j] -= alpha[p] * delta;
                    }
                    self.iterations += 1;
                }
                PrimalStep::Pivot { pos, to_upper, theta } => {
                    if alpha[pos].abs() < self.opts.pivot_tol {
                        self.lu = None;
                        trouble += 1;
                        if trouble > 3 {
                            return PhaseResult::Retry;
                        }
                        continue;
                    }
                    // Devex reference weights from the pivot row.
                    if !bland {
                        let mut e = vec![0.0; self.m];
                        e[pos] = 1.0;
                        let rho = self.btran(e);
                        let row = self.pivot_row(&rho);
                        let arq = alpha[pos];
                        let wq = self.devex[q];
                        for (j, a) in row {
                            if j != q {
                                let r = a / arq;
                                let cand = r * r * wq;
                                if cand > self.devex[j] {
                                    self.devex[j] = cand;
                                }
                            }
                        }
                        let leaving = self.basis[pos];
                        self.devex[leaving] = (wq / (arq * arq)).max(1.0);
                    }
                    let delta = dir * theta;
                    self.x[q] += delta;
                    for (p, &j) in self.basis.iter().enumerate() {
                        self.x[j] -= alpha[p] * delta;
                    }
                    let leaving = self.basis[pos];
                    if to_upper {
                        self.x[leaving] = self.upper[leaving];
                        self.status[leaving] = VarStatus::AtUpper;
                    } else {
                        self.x[leaving] = self.lower[leaving];
                        self.status[leaving] = VarStatus::AtLower;
                    }
                    self.status[q] = VarStatus::Basic;
                    self.basis[pos] = q;
                    self.push_eta(pos, &alpha);
                    self.iterations += 1;
                }
            }
        }
    }

    /// Entries of the pivot row `ρᵀ [A −I]` over nonbasic, non-fixed columns.
    fn pivot_row(&self, rho: &[f64]) -> Vec<(usize, f64)> {
        let mut acc = vec![0.0; self.n];
        let mut touched = Vec::new();
        for (i, &r) in rho.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            for &(j, a) in &self.row_coeffs[i] {
                if acc[j] == 0.0 {
                    touched.push(j);
                }
                acc[j] += r * a;
            }
        }
        let mut out = Vec::with_capacity(touched.len());
        touched.sort_unstable();
        touched.dedup();
        for j in touched {
            if self.status[j] != VarStatus::Basic && !self.is_fixed(j) && acc[j] != 0.0 {
                out.push((j, acc[j]));
            }
        }
        for (i, &r) in rho.iter().enumerate() {
            let j = self.n + i;
            if r != 0.0 && self.status[j] != VarStatus::Basic && !self.is_fixed(j) {
                out.push((j, -r));
            }
        }
        out
    }

    fn primal_ratio_test(
        &self,
        q: usize,
        dir: f64,
        alpha: &[f64],
        phase1: bool,
        bland: bool,
    ) -> PrimalStep {
        let ftol = self.opts.feasibility_tol;
        let ptol = self.opts.pivot_tol;
        let flip_range = self.upper[q] - self.lower[q];
        // (position, exact distance, |g|, target is upper)
        let mut cands: Vec<(usize, f64, f64, bool)> = Vec::new();
        for (p, &j) in self.basis.iter().enumerate() {
            let g = -dir * alpha[p];
            if g.abs() <= ptol {
                continue;
            }
            let (v, l, u) = (self.x[j], self.lower[j], self.upper[j]);
            let entry = if phase1 && v < l - ftol {
                if g > 0.0 {
                    Some((l - v, false))
                } else {
                    None
                }
            } else if phase1 && v > u + ftol {
                if g < 0.0 {
                    Some((v - u, true))
                } else {
                    None
                }
            } else if g < 0.0 {
                l.is_finite().then(|| ((v - l).max(0.0), false))
            } else {
                u.is_finite().then(|| ((u - v).max(0.0), true))
            };
            if let Some((dist, to_upper)) = entry {
                cands.push((p, dist, g.abs(), to_upper));
            }
        }
        if bland {
            let mut best: Option<(usize, f64, bool)> = None;
            for &(p, dist, g, to_upper) in &cands {
                let ratio = dist / g;
                let better = match best {
                    None => true,
                    Some((bp, br, _)) => {
                        ratio < br - 1e-12 || (ratio <= br + 1e-12 && self.basis[p] < self.basis[bp])
                    }
                };
                if better {
                    best = Some((p, ratio, to_upper));
                }
            }
            return match best {
                Some((_, r, _)) if flip_range.is_finite() && flip_range <= r => PrimalStep::Flip,
                Some((pos, theta, to_upper)) => PrimalStep::Pivot { pos, to_upper, theta },
                None if flip_range.is_finite() => PrimalStep::Flip,
                None => PrimalStep::Unbounded,
            };
        }
        // Harris two-pass ratio test.
        let mut theta_max = f64::INFINITY;
        for &(_, dist, g, _) in &cands {
            theta_max = theta_max.min((dist + ftol) / g);
        }
        if flip_range.is_finite() && flip_range <= theta_max {
            return PrimalStep::Flip;
        }
        if cands.is_empty() {
            return PrimalStep::Unbounded;
        }
        let mut best: Option<(usize, f64, f64, bool)> = None;
        for &(p, dist, g, to_upper) in &cands {
            let ratio = dist / g;
            if ratio <= theta_max {
                let better = match best {
                    None => true,
                    Some((bp, _, bg, _)) => {
                        g > bg * (1.0 + 1e-9) || (g >= bg * (1.0 - 1e-9) && self.basis[p] < self.basis[bp])
                    }
                };
                if better {
                    best = Some((p, ratio, g, to_upper));
                }
            }
        }
        let (pos, theta, _, to_upper) = best.expect("nonempty candidate set");
        PrimalStep::Pivot {
            pos,
            to_upper,
            theta: theta.max(0.0),
        }
    }

    // ------------------------------------------------------------------ dual

    fn dual_simplex(&mut self) -> PhaseResult {
        let ftol = self.opts.feasibility_tol;
        let otol = self.opts.optimality_tol;
        let ptol = self.opts.pivot_tol;
        self.ensure_factor();
        let mut d = self.reduced_costs();
        let mut best_obj = f64::NEG_INFINITY;
        let mut stall = 0usize;
        let mut bland = false;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return PhaseResult::IterationLimit;
            }
            if self.lu.is_none() || self.etas.len() >= self.opts.refactor_every {
                self.refactor();
                self.compute_basic_values();
                d = self.reduced_costs();
            }
            // Leaving row.
            let mut leave: Option<(usize, f64)> = None;
            for (p, &j) in self.basis.iter().enumerate() {
                let inf = self.primal_infeasibility(j);
                if inf <= ftol {
                    continue;
                }
                if bland {
                    if leave.is_none_or(|(bp, _)| j < self.basis[bp]) {
                        leave = Some((p, inf));
                    }
                    continue;
                }
                let score = inf * inf / self.dse[p];
                if leave.is_none_or(|(_, s)| score > s) {
                    leave = Some((p, score));
                }
            }
            let Some((r, _)) = leave else {
                return PhaseResult::Optimal;
            };
            let jr = self.basis[r];
            let below = self.x[jr] < self.lower[jr];

            let obj: f64 = (0..self.n + self.m).map(|j| self.cost[j] * self.x[j]).sum();
            if obj > best_obj + 1e-9 * (1.0 + obj.abs()) {
                best_obj = obj;
                stall = 0;
            } else {
                stall += 1;
                if stall > self.opts.stall_threshold {
                    bland = true;
                }
            }

            let mut e = vec![0.0; self.m];
            e[r] = 1.0;
            let rho = self.btran(e);
            let row = self.pivot_row(&rho);

            // Candidates: (column, dual slack, |alpha|, alpha)
            let mut cands: Vec<(usize, f64, f64, f64)> = Vec::new();
            for &(j, a) in &row {
                if a.abs() <= ptol {
                    continue;
                }
                // Moving x_j up changes x_r by −a.
                let up = if below { a < 0.0 } else { a > 0.0 };
                let ok = if up { self.can_increase(j) } else { self.can_decrease(j) };
                if !ok {
                    continue;
                }
                let slack = if up { d[j] } else { -d[j] };
                cands.push((j, slack.max(0.0), a.abs(), a));
            }
            if cands.is_empty() {
                let ray: Vec<f64> = if below {
                    rho.clone()
                } else {
                    rho.iter().map(|v| -v).collect()
                };
                return PhaseResult::Infeasible(ray);
            }
            let q = if bland {
                let mut best: Option<(usize, f64)> = None;
                for &(j, s, g, _) in &cands {
                    let ratio = s / g;
                    let better = match best {
                        None => true,
                        Some((bj, br)) => ratio < br - 1e-12 || (ratio <= br + 1e-12 && j < bj),
                    };
                    if better {
                        best = Some((j, ratio));
                    }
                }
                best.unwrap().0
            } else {
                let mut tmax = f64::INFINITY;
                for &(_, s, g, _) in &cands {
                    tmax = tmax.min((s + otol) / g);
                }
                let mut best: Option<(usize, f64)> = None;
                for &(j, s, g, _) in &cands {
                    if s / g <= tmax {
                        let better = match best {
                            None => true,
                            Some((bj, bg)) => g > bg * (1.0 + 1e-9) || (g >= bg * (1.0 - 1e-9) && j < bj),
                        };
                        if better {
                            best = Some((j, g));
                        }
                    }
                }
                best.unwrap().0
            };
            let arq = row.iter().find(|e| e.0 == q).unwrap().1;
            // Harris may pick a slightly dual infeasible column; shift its
            // cost so the step keeps dual feasibility.
            let up = if below { arq < 0.0 } else { arq > 0.0 };
            if (up && d[q] < 0.0) || (!up && d[q] > 0.0) {
                self.cost[q] -= d[q];
                d[q] = 0.0;
            }

            let alpha = self.ftran_sparse(self.column(q));
            let apq = alpha[r];
            if apq.abs() < ptol || (apq - arq).abs() > 1e-6 * (1.0 + arq.abs()) {
                // Row and column disagree: refactor and try again.
                self.lu = None;
                self.refactor();
                self.compute_basic_values();
                d = self.reduced_costs();
                self.iterations += 1;
                continue;
            }

            // Dual update.
            let theta_d = d[q] / apq;
            for &(j, a) in &row {
                d[j] -= theta_d * a;
            }
            d[q] = 0.0;
            d[jr] = -theta_d;

            // Dual steepest-edge weights.
            let tau = self.ftran_dense(rho.clone());
            let wr = self.dse[r];
            for p in 0..self.m {
                if p == r {
                    continue;
                }
                let ratio = alpha[p] / apq;
                if ratio != 0.0 {
                    let w = self.dse[p] - 2.0 * ratio * tau[p] + ratio * ratio * wr;
                    self.dse[p] = w.max(1e-6);
                }
            }
            self.dse[r] = (wr / (apq * apq)).max(1e-6);

            // Primal update.
            let target = if below { self.lower[jr] } else { self.upper[jr] };
            let delta = (self.x[jr] - target) / apq;
            self.x[q] += delta;
            for (p, &j) in self.basis.iter().enumerate() {
                self.x[j] -= alpha[p] * delta;
            }
            self.x[jr] = target;
            self.status[jr] = if below {
                VarStatus::AtLower
            } else {
                VarStatus::AtUpper
            };
            if self.is_fixed(jr) {
                self.status[jr] = VarStatus::AtLower;
            }
            self.status[q] = VarStatus::Basic;
            self.basis[r] = q;
            self.push_eta(r, &alpha);
            self.iterations += 1;
        }
    }

    // --------------------------------------------------------------- results

    fn outcome(&mut self, status: LpStatus, ray: Option<Vec<f64>>) -> LpOutcome {
        let n = self.n;
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let primal: Vec<f64> = self.x[..n].to_vec();
        let row_activity: Vec<f64> = self
            .row_coeffs
            .iter()
            .map(|r| r.iter().map(|&(j, a)| a * primal[j]).sum())
            .collect();
        let (duals, reduced_costs) = if self.lu.is_some() {
            let pi = self.duals_for(|j| self.cost[j]);
            let mut d = vec![0.0; n];
            for j in 0..n {
                d[j] = sign * (self.cost[j] - self.dot_col(&pi, j));
            }
            (pi.iter().map(|v| sign * v).collect(), d)
        } else {
            (vec![0.0; self.m], vec![0.0; n])
        };
        let objective: f64 = (0..n).map(|j| sign * self.cost[j] * primal[j]).sum();
        let farkas = match (status, ray) {
            (LpStatus::Infeasible, Some(ray)) => {
                let problem = self.as_problem();
                if !verify_farkas(&problem, &ray) {
                    log::warn!("Farkas ray failed verification");
                }
                Some(ray)
            }
            _ => None,
        };
        LpOutcome {
            status,
            objective,
            primal,
            row_activity,
            duals,
            reduced_costs,
            farkas,
            basis: self.basis(),
            iterations: self.iterations,
        }
    }

    /// Reconstructs the user-level problem (current bounds and rows).
    pub fn as_problem(&self) -> LpProblem {
        let sign = if self.maximize { -1.0 } else { 1.0 };
        let rows = (0..self.m)
            .map(|i| {
                let (lo, hi) = (self.lower[self.n + i], self.upper[self.n + i]);
                let (sense, rhs) = if lo == hi {
                    (super::Sense::Eq, lo)
                } else if lo.is_finite() {
                    (super::Sense::Ge, lo)
                } else {
                    (super::Sense::Le, hi)
                };
                LinearRow::new(self.row_coeffs[i].clone(), sense, rhs)
            })
            .collect();
        LpProblem {
            obj: self.cost[..self.n].iter().map(|c| sign * c).collect(),
            col_lower: self.lower[..self.n].to_vec(),
            col_upper: self.upper[..self.n].to_vec(),
            rows,
            maximize: self.maximize,
        }
    }
}
