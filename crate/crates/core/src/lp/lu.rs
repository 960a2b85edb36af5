//! Sparse LU factorization of simplex basis matrices.
//!
//! Bases arising from network-flow style models are nearly triangular, so the
//! factorization first peels off column and row singletons (no fill-in) and
//! only the remaining nucleus is eliminated densely with partial pivoting.
//! The result is stored as an ordered pivot sequence: pivot `k` eliminates
//! basis position `piv_pos[k]` using row `piv_row[k]`.

const SINGLETON_TOL: f64 = 1e-9;
const DENSE_TOL: f64 = 1e-11;
const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone)]
pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_pos: Vec<usize>,
    piv_val: Vec<f64>,
    l_start: Vec<usize>,
    l_row: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_pos: Vec<usize>,
    u_val: Vec<f64>,
}

/// Positions that could not be pivoted together with the rows left without a
/// pivot. Both lists have the same length.
#[derive(Debug, Clone, Default)]
pub(crate) struct Deficiency {
    pub positions: Vec<usize>,
    pub rows: Vec<usize>,
}

impl LuFactors {
    fn with_capacity(m: usize) -> Self {
        LuFactors {
            m,
            piv_row: Vec::with_capacity(m),
            piv_pos: Vec::with_capacity(m),
            piv_val: Vec::with_capacity(m),
            l_start: vec![0],
            l_row: Vec::new(),
            l_val: Vec::new(),
            u_start: vec![0],
            u_pos: Vec::new(),
            u_val: Vec::new(),
        }
    }

    fn push_pivot(&mut self, row: usize, pos: usize, val: f64) {
        self.piv_row.push(row);
        self.piv_pos.push(pos);
        self.piv_val.push(val);
        self.l_start.push(self.l_row.len());
        self.u_start.push(self.u_pos.len());
    }

    // L and U entries are appended to the pivot most recently pushed.
    fn push_l(&mut self, row: usize, val: f64) {
        self.l_row.push(row);
        self.l_val.push(val);
        *self.l_start.last_mut().unwrap() = self.l_row.len();
    }

    fn push_u(&mut self, pos: usize, val: f64) {
        self.u_pos.push(pos);
        self.u_val.push(val);
        *self.u_start.last_mut().unwrap() = self.u_pos.len();
    }

    /// Solves `B x = b`. `rhs` is indexed by row and is destroyed; the result
    /// is indexed by basis position.
    pub(crate) fn solve(&self, rhs: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(rhs.len(), self.m);
        for k in 0..self.piv_row.len() {
            let b = rhs[self.piv_row[k]];
            if b != 0.0 {
                for t in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_row[t]] -= self.l_val[t] * b;
                }
            }
        }
        for k in (0..self.piv_row.len()).rev() {
            let mut s = rhs[self.piv_row[k]];
            for t in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[t] * out[self.u_pos[t]];
            }
            out[self.piv_pos[k]] = s / self.piv_val[k];
        }
    }

    /// Solves `yᵀ B = cᵀ`. `c` is indexed by basis position and is destroyed;
    /// the result is indexed by row.
    pub(crate) fn solve_transposed(&self, c: &mut [f64], out: &mut [f64]) {
        debug_assert_eq!(c.len(), self.m);
        for k in 0..self.piv_row.len() {
            let t = c[self.piv_pos[k]] / self.piv_val[k];
            out[self.piv_row[k]] = t;
            if t != 0.0 {
                for s in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_pos[s]] -= self.u_val[s] * t;
                }
            }
        }
        for k in (0..self.piv_row.len()).rev() {
            let r = self.piv_row[k];
            let mut s = out[r];
            for t in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[t] * out[self.l_row[t]];
            }
            out[r] = s;
        }
    }
}

/// Factorizes the square matrix whose column at basis position `p` is
/// `cols[p]` (sparse `(row, value)` entries). On structural or numerical
/// singularity the returned deficiency lists the unpivoted positions and rows;
/// the factors are then only partial and must not be used for solves.
pub(crate) fn factorize(m: usize, cols: &[&[(usize, f64)]]) -> (LuFactors, Deficiency) {
    debug_assert_eq!(cols.len(), m);
    let mut lu = LuFactors::with_capacity(m);

    // Row-wise copy of the matrix.
    let mut row_entries: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
    for (p, col) in cols.iter().enumerate() {
        for &(i, v) in col.iter() {
            if v.abs() > DROP_TOL {
                row_entries[i].push((p, v));
            }
        }
    }
    let mut col_count: Vec<usize> = cols
        .iter()
        .map(|c| c.iter().filter(|(_, v)| v.abs() > DROP_TOL).count())
        .collect();
    let mut row_count: Vec<usize> = row_entries.iter().map(|r| r.len()).collect();
    let mut row_active = vec![true; m];
    let mut col_active = vec![true; m];

    let mut col_stack: Vec<usize> = (0..m).rev().filter(|&p| col_count[p] == 1).collect();
    let mut row_stack: Vec<usize> = (0..m).rev().filter(|&i| row_count[i] == 1).collect();

    loop {
        if let Some(p) = col_stack.pop() {
            if !col_active[p] || col_count[p] != 1 {
                continue;
            }
            let Some(&(i, v)) = cols[p]
                .iter()
                .find(|&&(i, v)| row_active[i] && v.abs() > DROP_TOL)
            else {
                continue;
            };
            if v.abs() < SINGLETON_TOL {
                continue;
            }
            lu.push_pivot(i, p, v);
            for &(q, w) in &row_entries[i] {
                if q != p && col_active[q] {
                    lu.push_u(q, w);
                    col_count[q] -= 1;
                    if col_count[q] == 1 {
                        col_stack.push(q);
                    }
                }
            }
            row_active[i] = false;
            col_active[p] = false;
            continue;
        }
        if let Some(i) = row_stack.pop() {
            if !row_active[i] || row_count[i] != 1 {
                continue;
            }
            let Some(&(p, v)) = row_entries[i].iter().find(|&&(p, _)| col_active[p]) else {
                continue;
            };
            if v.abs() < SINGLETON_TOL {
                continue;
            }
            lu.push_pivot(i, p, v);
            for &(k, w) in cols[p].iter() {
                if k != i && row_active[k] && w.abs() > DROP_TOL {
                    lu.push_l(k, w / v);
                    row_count[k] -= 1;
                    if row_count[k] == 1 {
                        row_stack.push(k);
                    }
                }
            }
            row_active[i] = false;
            col_active[p] = false;
            continue;
        }
        break;
    }

    // Dense elimination of the nucleus.
    let nrows: Vec<usize> = (0..m).filter(|&i| row_active[i]).collect();
    let ncols: Vec<usize> = (0..m).filter(|&p| col_active[p]).collect();
    let mut deficiency = Deficiency::default();
    if !ncols.is_empty() || !nrows.is_empty() {
        let k = nrows.len();
        let kc = ncols.len();
        let mut local_row = vec![usize::MAX; m];
        for (a, &i) in nrows.iter().enumerate() {
            local_row[i] = a;
        }
        let mut dense = vec![0.0; k * kc];
        for (b, &p) in ncols.iter().enumerate() {
            for &(i, v) in cols[p].iter() {
                let a = local_row[i];
                if a != usize::MAX {
                    dense[a * kc + b] += v;
                }
            }
        }
        let mut row_done = vec![false; k];
        for b in 0..kc {
            let mut best = usize::MAX;
            let mut best_abs = DENSE_TOL;
            for a in 0..k {
                if !row_done[a] {
                    let v = dense[a * kc + b].abs();
                    if v > best_abs {
                        best_abs = v;
                        best = a;
                    }
                }
            }
            if best == usize::MAX {
                deficiency.positions.push(ncols[b]);
                continue;
            }
            let piv = dense[best * kc + b];
            lu.push_pivot(nrows[best], ncols[b], piv);
            for a in 0..k {
                if row_done[a] || a == best {
                    continue;
                }
                let v = dense[a * kc + b];
                if v.abs() <= DROP_TOL {
                    continue;
                }
                let mult = v / piv;
                lu.push_l(nrows[a], mult);
                for c in (b + 1)..kc {
                    let u = dense[best * kc + c];
                    if u != 0.0 {
                        dense[a * kc + c] -= mult * u;
                    }
                }
                dense[a * kc + b] = 0.0;
            }
            for c in (b + 1)..kc {
                let u = dense[best * kc + c];
                if u.abs() > DROP_TOL {
                    lu.push_u(ncols[c], u);
                }
            }
            row_done[best] = true;
        }
        for a in 0..k {
            if !row_done[a] {
                deficiency.rows.push(nrows[a]);
            }
        }
    }
    (lu, deficiency)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_to_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|p| {
                (0..m)
                    .filter(|&i| a[i][p] != 0.0)
                    .map(|i| (i, a[i][p]))
                    .collect()
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum())
            .collect()
    }

    fn check(a: Vec<Vec<f64>>) {
        let m = a.len();
        let cols = dense_to_cols(&a);
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let (lu, def) = factorize(m, &refs);
        assert!(def.positions.is_empty(), "unexpected deficiency");
        let x_true: Vec<f64> = (0..m).map(|i| 1.0 + i as f64 * 0.5).collect();
        let mut b = matvec(&a, &x_true);
        let mut x = vec![0.0; m];
        lu.solve(&mut b, &mut x);
        for i in 0..m {
            assert!((x[i] - x_true[i]).abs() < 1e-9, "solve mismatch at {i}");
        }
        // yᵀA = cᵀ
        let y_true: Vec<f64> = (0..m).map(|i| 2.0 - i as f64 * 0.25).collect();
        let mut c: Vec<f64> = (0..m)
            .map(|p| (0..m).map(|i| y_true[i] * a[i][p]).sum())
            .collect();
        let mut y = vec![0.0; m];
        lu.solve_transposed(&mut c, &mut y);
        for i in 0..m {
            assert!((y[i] - y_true[i]).abs() < 1e-9, "transposed mismatch at {i}");
        }
    }

    #[test]
    fn triangular_and_permuted() {
        check(vec![
            vec![0.0, 2.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![3.0, 1.0, -1.0],
        ]);
    }

    #[test]
    fn dense_nucleus() {
        check(vec![
            vec![4.0, 1.0, 2.0, 0.0],
            vec![1.0, 3.0, 0.0, 1.0],
            vec![2.0, 0.0, 5.0, 1.0],
            vec![0.0, 1.0, 1.0, 6.0],
        ]);
    }

    #[test]
    fn mixed_singletons_and_nucleus() {
        check(vec![
            vec![-1.0, 0.0, 0.0, 1.0, 0.0],
            vec![0.0, 1.0, 1.0, 0.0, 0.0],
            vec![0.0, 1.0, -1.0, 0.0, 2.0],
            vec![0.0, 0.0, 1.0, 1.0, 0.0],
            vec![0.0, 0.0, 0.0, 1.0, 3.0],
        ]);
    }

    #[test]
    fn singular_reports_deficiency() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let cols = dense_to_cols(&a);
        let refs: Vec<&[(usize, f64)]> = cols.iter().map(|c| c.as_slice()).collect();
        let (_, def) = factorize(3, &refs);
        assert_eq!(def.positions.len(), 1);
        assert_eq!(def.rows.len(), 1);
    }
}
