//! Sparse LU factorization of a simplex basis.
//!
//! Column and row singletons are peeled off first; they pivot without fill
//! and cover almost all of a typical basis (logical columns, epigraph
//! chains). Whatever remains (the "bump") is factorized densely with partial
//! pivoting. Updates between refactorizations are kept as product-form etas
//! by the caller.

/// Pivot sequence `k = 0..m`, each with its row, basis position, pivot value,
/// the L multipliers it generates and the U entries of its row.
#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    piv_val: Vec<f64>,
    l: Vec<Vec<(usize, f64)>>,
    u: Vec<Vec<(usize, f64)>>,
    bump: usize,
}

/// Rank deficiency found during factorization: rows left without a pivot and
/// basis positions whose columns turned out dependent.
#[derive(Debug, Clone)]
pub(crate) struct Singular {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

const PIVOT_ABS_TOL: f64 = 1e-11;
const SINGLETON_REL_TOL: f64 = 0.01;
const BUMP_REL_TOL: f64 = 1e-10;

impl LuFactors {
    pub(crate) fn bump_size(&self) -> usize {
        self.bump
    }

    /// Factorizes the `m x m` matrix given by its columns (row, value).
    pub(crate) fn factorize(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<LuFactors, Singular> {
        assert_eq!(cols.len(), m);
        let mut rows_of: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        for (c, col) in cols.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows_of[r].push((c, v));
                }
            }
        }
        let mut row_active = vec![true; m];
        let mut col_active = vec![true; m];
        let mut row_cnt: Vec<usize> = rows_of.iter().map(Vec::len).collect();
        let mut col_cnt: Vec<usize> = cols
            .iter()
            .map(|c| c.iter().filter(|e| e.1 != 0.0).count())
            .collect();

        let mut f = LuFactors {
            m,
            ..Default::default()
        };

        let mut col_stack: Vec<usize> = (0..m).rev().filter(|&c| col_cnt[c] == 1).collect();
        let mut row_stack: Vec<usize> = (0..m).rev().filter(|&r| row_cnt[r] == 1).collect();

        loop {
            let mut progress = false;
            while let Some(c) = col_stack.pop() {
                if !col_active[c] || col_cnt[c] != 1 {
                    continue;
                }
                let Some(&(r, v)) = cols[c].iter().find(|e| e.1 != 0.0 && row_active[e.0]) else {
                    continue;
                };
                if v.abs() < PIVOT_ABS_TOL {
                    continue;
                }
                let urow: Vec<(usize, f64)> = rows_of[r]
                    .iter()
                    .copied()
                    .filter(|&(cc, _)| cc != c && col_active[cc])
                    .collect();
                row_active[r] = false;
                col_active[c] = false;
                for &(cc, _) in &urow {
                    col_cnt[cc] -= 1;
                    if col_cnt[cc] == 1 {
                        col_stack.push(cc);
                    }
                }
                f.push(r, c, v, Vec::new(), urow);
                progress = true;
            }
            while let Some(r) = row_stack.pop() {
                if !row_active[r] || row_cnt[r] != 1 {
                    continue;
                }
                let Some(&(c, v)) = rows_of[r].iter().find(|e| col_active[e.0]) else {
                    continue;
                };
                let col_max = cols[c]
                    .iter()
                    .filter(|e| row_active[e.0])
                    .fold(0.0f64, |acc, e| acc.max(e.1.abs()));
                if v.abs() < PIVOT_ABS_TOL || v.abs() < SINGLETON_REL_TOL * col_max {
                    continue;
                }
                let mut lcol = Vec::new();
                for &(rr, vv) in &cols[c] {
                    if rr != r && vv != 0.0 && row_active[rr] {
                        lcol.push((rr, vv / v));
                        row_cnt[rr] -= 1;
                        if row_cnt[rr] == 1 {
                            row_stack.push(rr);
                        }
                    }
                }
                row_active[r] = false;
                col_active[c] = false;
                f.push(r, c, v, lcol, Vec::new());
                progress = true;
                // removing column c may have created column singletons only
                // through rows, which are untouched here
            }
            if !progress {
                break;
            }
            // a column count can reach 1 only via column-singleton pivots, so
            // both stacks are already up to date; loop until quiescent
            if col_stack.is_empty() && row_stack.is_empty() {
                break;
            }
        }

        let bump_rows: Vec<usize> = (0..m).filter(|&r| row_active[r]).collect();
        let bump_cols: Vec<usize> = (0..m).filter(|&c| col_active[c]).collect();
        debug_assert_eq!(bump_rows.len(), bump_cols.len());
        f.bump = bump_rows.len();
        if !bump_rows.is_empty() {
            f.factor_bump(cols, &bump_rows, &bump_cols)?;
        }
        Ok(f)
    }

    fn push(&mut self, r: usize, c: usize, v: f64, l: Vec<(usize, f64)>, u: Vec<(usize, f64)>) {
        self.piv_row.push(r);
        self.piv_col.push(c);
        self.piv_val.push(v);
        self.l.push(l);
        self.u.push(u);
    }

    fn factor_bump(
        &mut self,
        cols: &[Vec<(usize, f64)>],
        rows: &[usize],
        bcols: &[usize],
    ) -> Result<(), Singular> {
        let k = rows.len();
        let mut local_row = vec![usize::MAX; self.m];
        for (i, &r) in rows.iter().enumerate() {
            local_row[r] = i;
        }
        // sparsest columns first keeps fill down
        let mut order: Vec<usize> = (0..k).collect();
        let counts: Vec<usize> = bcols
            .iter()
            .map(|&c| {
                cols[c]
                    .iter()
                    .filter(|e| local_row[e.0] != usize::MAX)
                    .count()
            })
            .collect();
        order.sort_by_key(|&j| (counts[j], j));

        let mut dense = vec![0.0; k * k];
        let mut col_norm = vec![0.0f64; k];
        for (jj, &j) in order.iter().enumerate() {
            for &(r, v) in &cols[bcols[j]] {
                let i = local_row[r];
                if i != usize::MAX {
                    dense[i * k + jj] = v;
                    col_norm[jj] = col_norm[jj].max(v.abs());
                }
            }
        }
        let mut row_done = vec![false; k];
        let mut dependent = Vec::new();
        for jj in 0..k {
            let mut best = usize::MAX;
            let mut best_abs = 0.0;
            for i in 0..k {
                if !row_done[i] {
                    let a = dense[i * k + jj].abs();
                    if a > best_abs {
                        best_abs = a;
                        best = i;
                    }
                }
            }
            if best == usize::MAX
                || best_abs <= PIVOT_ABS_TOL
                || best_abs <= BUMP_REL_TOL * col_norm[jj]
            {
                dependent.push(bcols[order[jj]]);
                continue;
            }
            row_done[best] = true;
            let piv = dense[best * k + jj];
            let mut lcol = Vec::new();
            for i in 0..k {
                if row_done[i] {
                    continue;
                }
                let v = dense[i * k + jj];
                if v == 0.0 {
                    continue;
                }
                let mult = v / piv;
                lcol.push((rows[i], mult));
                dense[i * k + jj] = 0.0;
                for t in jj + 1..k {
                    let p = dense[best * k + t];
                    if p != 0.0 {
                        dense[i * k + t] -= mult * p;
                    }
                }
            }
            let urow: Vec<(usize, f64)> = (jj + 1..k)
                .filter(|&t| dense[best * k + t] != 0.0)
                .map(|t| (bcols[order[t]], dense[best * k + t]))
                .collect();
            self.push(rows[best], bcols[order[jj]], piv, lcol, urow);
        }
        if !dependent.is_empty() {
            let rows_left = (0..k).filter(|&i| !row_done[i]).map(|i| rows[i]).collect();
            return Err(Singular {
                rows: rows_left,
                cols: dependent,
            });
        }
        Ok(())
    }

    /// Solves `B x = b` in place: `b` is indexed by row on entry and by
    /// basis position on exit.
    pub(crate) fn ftran(&self, b: &mut [f64], scratch: &mut Vec<f64>) {
        for k in 0..self.m {
            let br = b[self.piv_row[k]];
            if br != 0.0 {
                for &(r, l) in &self.l[k] {
                    b[r] -= l * br;
                }
            }
        }
        scratch.clear();
        scratch.resize(self.m, 0.0);
        for k in (0..self.m).rev() {
            let mut v = b[self.piv_row[k]];
            for &(c, u) in &self.u[k] {
                v -= u * scratch[c];
            }
            scratch[self.piv_col[k]] = v / self.piv_val[k];
        }
        b.copy_from_slice(scratch);
    }

    /// Solves `B^T y = c` in place: `c` is indexed by basis position on entry
    /// and by row on exit.
    pub(crate) fn btran(&self, c: &mut [f64], scratch: &mut Vec<f64>) {
        scratch.clear();
        scratch.resize(self.m, 0.0);
        for k in 0..self.m {
            let v = c[self.piv_col[k]] / self.piv_val[k];
            scratch[self.piv_row[k]] = v;
            if v != 0.0 {
                for &(cc, u) in &self.u[k] {
                    c[cc] -= u * v;
                }
            }
        }
        for k in (0..self.m).rev() {
            let r = self.piv_row[k];
            let mut acc = scratch[r];
            for &(rr, l) in &self.l[k] {
                acc -= l * scratch[rr];
            }
            scratch[r] = acc;
        }
        c.copy_from_slice(scratch);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|c| {
                (0..m)
                    .filter(|&r| a[r][c] != 0.0)
                    .map(|r| (r, a[r][c]))
                    .collect()
            })
            .collect()
    }

    fn matvec(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter()
            .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
            .collect()
    }

    fn check(a: Vec<Vec<f64>>) {
        let m = a.len();
        let lu = LuFactors::factorize(m, &dense_cols(&a)).expect("nonsingular");
        let x: Vec<f64> = (0..m)
            .map(|i| 1.0 + i as f64 * 0.5 - (i % 3) as f64)
            .collect();
        let mut b = matvec(&a, &x);
        let mut s = Vec::new();
        lu.ftran(&mut b, &mut s);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-9, "ftran {b:?} vs {x:?}");
        }
        // transpose check: y^T A = c^T
        let at: Vec<Vec<f64>> = (0..m).map(|c| (0..m).map(|r| a[r][c]).collect()).collect();
        let mut c = matvec(&at, &x);
        lu.btran(&mut c, &mut s);
        for (u, v) in c.iter().zip(&x) {
            assert!((u - v).abs() < 1e-9, "btran {c:?} vs {x:?}");
        }
    }

    #[test]
    fn triangular_and_bump_mixtures() {
        check(vec![vec![-1.0, 0.0], vec![0.0, -1.0]]);
        check(vec![
            vec![2.0, 1.0, 0.0],
            vec![0.0, 3.0, 1.0],
            vec![0.0, 0.0, 4.0],
        ]);
        check(vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![7.0, 8.0, 10.0],
        ]);
        check(vec![
            vec![0.0, 1.0, 0.0, 2.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![3.0, 1.0, 1.0, 0.0],
            vec![0.0, 1e-4, 0.0, 5.0],
        ]);
        check(vec![
            vec![1e-3, 1.0, 1.0],
            vec![1.0, 1.0, 0.0],
            vec![0.0, 1.0, 2.0],
        ]);
    }

    #[test]
    fn reports_dependent_columns() {
        let a = vec![
            vec![1.0, 2.0, 0.0],
            vec![2.0, 4.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let err = LuFactors::factorize(3, &dense_cols(&a)).unwrap_err();
        assert_eq!(err.rows.len(), 1);
        assert_eq!(err.cols.len(), 1);
    }
}
