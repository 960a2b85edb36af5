use crate::formulation::{pair_flow_rows, pair_keys, IndModel, VarKey};
use crate::instance::{PairId, TransitInstance};
use crate::lp::{solve_lp, LinearRow, LpProblem, LpStatus, Sense};

/// One subproblem row: `a·y + b·m (sense) rhs` with `y` the pair's flows
/// and `m` master columns.
#[derive(Debug, Clone)]
struct SubRow {
    a: Vec<(usize, f64)>,
    b: Vec<(usize, f64)>,
    sense: Sense,
    rhs: f64,
}

impl SubRow {
    /// Right-hand side seen by the flows at master point `m`.
    fn rhs_at(&self, m: &[f64]) -> f64 {
        self.rhs - self.b.iter().map(|&(j, c)| c * m[j]).sum::<f64>()
    }
}

/// Flow feasibility system of one projected pair.
#[derive(Debug, Clone)]
pub struct Subproblem {
    pub pair: PairId,
    pub flow_keys: Vec<VarKey>,
    rows: Vec<SubRow>,
    /// Flow coefficients of the utility row.
    utility: Vec<f64>,
}

impl Subproblem {
    pub fn new(inst: &TransitInstance, master: &IndModel, w: PairId) -> Subproblem {
        let flow_keys: Vec<VarKey> = pair_keys(inst, w, master.scope, true)
            .into_iter()
            .filter(|k| k.is_flow())
            .collect();
        let local: std::collections::HashMap<VarKey, usize> =
            flow_keys.iter().enumerate().map(|(i, &k)| (k, i)).collect();
        let mut utility = vec![0.0; flow_keys.len()];
        let mut rows = Vec::new();
        for r in pair_flow_rows(inst, w, master.scope) {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for &(k, c) in &r.coeffs {
                match local.get(&k) {
                    Some(&i) => a.push((i, c)),
                    None => b.push((master.col(k).unwrap_or_else(|| panic!("{k} missing from the master")), c)),
                }
            }
            if r.family() == "utility" {
                for &(i, c) in &a {
                    utility[i] += c;
                }
            }
            rows.push(SubRow {
                a,
                b,
                sense: r.sense,
                rhs: r.rhs,
            });
        }
        Subproblem {
            pair: w,
            flow_keys,
            rows,
            utility,
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// The flow LP at master point `m`, flows in [0, 1], minimizing the
    /// flow part of the utility row.
    pub fn lp_at(&self, m: &[f64]) -> LpProblem {
        let n = self.flow_keys.len();
        let mut lp = LpProblem {
            obj: self.utility.clone(),
            col_lower: vec![0.0; n],
            col_upper: vec![1.0; n],
            rows: Vec::new(),
            maximize: false,
        };
        for r in &self.rows {
            lp.add_row(LinearRow::new(r.a.clone(), r.sense, r.rhs_at(m)));
        }
        lp
    }
}

/// Flow LP of pair `w` at master point `m` (columns of `master`).
pub fn build_subproblem(inst: &TransitInstance, master: &IndModel, w: PairId, m: &[f64]) -> LpProblem {
    Subproblem::new(inst, master, w).lp_at(m)
}

/// A feasibility cut `coeffs·m ≤ rhs` over master columns.
#[derive(Debug, Clone)]
pub struct BendersCut {
    pub pair: PairId,
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
    pub lambda: f64,
    pub dual_objective: f64,
    /// Row multipliers of the subproblem (the certificate).
    pub duals: Vec<f64>,
}

impl BendersCut {
    pub fn row(&self) -> LinearRow {
        LinearRow::new(self.coeffs.clone(), Sense::Le, self.rhs)
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Norm {
    /// Σ c_i π_i ≤ 1 with c = B(out − in).
    Direction,
    /// Σ |π_i| ≤ 1.
    L1,
}

/// Cut-generating LP at `p = out − λ(out − in)`:
/// max −Σ π_i r_i(p) s.t. Aᵀπ ≥ 0, normalization, π ≥ 0 on ≤ rows,
/// π ≤ 0 on ≥ rows. Dual variables are split into nonnegative parts.
fn cut_lp(sub: &Subproblem, p: &[f64], dir: &[f64], norm: Norm) -> (LpProblem, Vec<(usize, f64)>) {
    // parts[k] = (row, sign): π_row += sign · u_k
    let mut parts: Vec<(usize, f64)> = Vec::new();
    for (i, r) in sub.rows.iter().enumerate() {
        match r.sense {
            Sense::Le => parts.push((i, 1.0)),
            Sense::Ge => parts.push((i, -1.0)),
            Sense::Eq => {
                parts.push((i, 1.0));
                parts.push((i, -1.0));
            }
        }
    }
    let rp: Vec<f64> = sub.rows.iter().map(|r| r.rhs_at(p)).collect();
    let mut lp = LpProblem {
        obj: parts.iter().map(|&(i, s)| -s * rp[i]).collect(),
        col_lower: vec![0.0; parts.len()],
        col_upper: vec![f64::INFINITY; parts.len()],
        rows: Vec::new(),
        maximize: true,
    };
    let n = sub.flow_keys.len();
    let mut cols_of: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    for (k, &(i, s)) in parts.iter().enumerate() {
        for &(j, a) in &sub.rows[i].a {
            cols_of[j].push((k, s * a));
        }
    }
    for c in cols_of {
        if !c.is_empty() {
            lp.add_row(LinearRow::new(c, Sense::Ge, 0.0));
        }
    }
    let norm_row: Vec<(usize, f64)> = match norm {
        Norm::Direction => parts
            .iter()
            .enumerate()
            .filter_map(|(k, &(i, s))| {
                let c: f64 = sub.rows[i].b.iter().map(|&(j, b)| b * dir[j]).sum();
                (c != 0.0).then_some((k, s * c))
            })
            .collect(),
        Norm::L1 => (0..parts.len()).map(|k| (k, 1.0)).collect(),
    };
    lp.add_row(LinearRow::new(norm_row, Sense::Le, 1.0));
    (lp, parts)
}

/// Separates pair `sub.pair` at `out`, stabilized toward `in_point` by
/// `lambda`. Returns a cut violated at the separation point, if any.
pub fn separate(sub: &Subproblem, out: &[f64], in_point: &[f64], lambda: f64) -> Option<BendersCut> {
    let p: Vec<f64> = out
        .iter()
        .zip(in_point)
        .map(|(&o, &i)| o - lambda * (o - i))
        .collect();
    let dir: Vec<f64> = out.iter().zip(in_point).map(|(&o, &i)| o - i).collect();
    let attempt = |norm: Norm| -> Option<Option<BendersCut>> {
        let (lp, parts) = cut_lp(sub, &p, &dir, norm);
        let res = solve_lp(&lp, None);
        match res.status {
            LpStatus::Optimal => {}
            LpStatus::Unbounded => return None,
            _ => {
                log::warn!("pair {}: cut LP ended with {:?}", sub.pair, res.status);
                return Some(None);
            }
        }
        if res.objective <= 1e-6 {
            return Some(None);
        }
        let mut pi = vec![0.0; sub.rows.len()];
        for (k, &(i, s)) in parts.iter().enumerate() {
            pi[i] += s * res.primal[k];
        }
        Some(assemble_cut(sub, &pi, &p, lambda, res.objective))
    };
    match attempt(Norm::Direction) {
        Some(c) => c,
        None => attempt(Norm::L1).flatten(),
    }
}

/// From πᵀ(rhs − B m) ≥ πᵀA y ≥ κ for every feasible flow y in [0, 1]:
/// (πᵀB) m ≤ πᵀrhs − κ.
fn assemble_cut(sub: &Subproblem, pi: &[f64], p: &[f64], lambda: f64, dual_objective: f64) -> Option<BendersCut> {
    let n = sub.flow_keys.len();
    let mut at_pi = vec![0.0; n];
    let mut coeffs: std::collections::BTreeMap<usize, f64> = std::collections::BTreeMap::new();
    let mut rhs = 0.0;
    for (r, &y) in sub.rows.iter().zip(pi) {
        if y == 0.0 {
            continue;
        }
        for &(j, a) in &r.a {
            at_pi[j] += y * a;
        }
        for &(j, b) in &r.b {
            *coeffs.entry(j).or_insert(0.0) += y * b;
        }
        rhs += y * r.rhs;
    }
    let kappa: f64 = at_pi.iter().map(|&v| v.min(0.0)).sum();
    rhs -= kappa;
    let coeffs: Vec<(usize, f64)> = coeffs.into_iter().filter(|&(_, a)| a.abs() > 1e-12).collect();
    let lhs: f64 = coeffs.iter().map(|&(j, a)| a * p[j]).sum();
    if lhs - rhs <= 1e-6 {
        return None;
    }
    Some(BendersCut {
        pair: sub.pair,
        coeffs,
        rhs,
        lambda,
        dual_objective,
        duals: pi.to_vec(),
    })
}
