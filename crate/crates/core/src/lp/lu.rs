//! Sparse LU factorisation of a simplex basis with product-form updates.
//!
//! The factor is built by right-looking Gaussian elimination with Markowitz
//! pivot selection and threshold partial pivoting. Basis changes are kept as
//! a file of eta columns on top of the factor until the next rebuild.
//!
//! Row indices refer to constraint rows, column indices to basis positions.

/// A pivot must be at least this fraction of the largest entry in its column.
const THRESHOLD: f64 = 0.1;
/// Columns and rows examined per Markowitz search.
const SEARCH: usize = 4;
/// Pivots below this magnitude mark the basis as singular.
const SINGULAR_TOL: f64 = 1e-11;

#[derive(Debug)]
pub(super) struct Singular;

struct Eta {
    r: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

pub(super) struct Factor {
    m: usize,
    piv_row: Vec<usize>,
    piv_col: Vec<usize>,
    diag: Vec<f64>,
    l_start: Vec<usize>,
    l: Vec<(usize, f64)>,
    u_start: Vec<usize>,
    u: Vec<(usize, f64)>,
    etas: Vec<Eta>,
}

fn lookup(row: &[(usize, f64)], j: usize) -> Option<f64> {
    row.iter().find(|e| e.0 == j).map(|e| e.1)
}

impl Factor {
    /// Factorises the m×m matrix whose column c holds the (row, value)
    /// entries `cols[c]`.
    pub(super) fn new(m: usize, cols: &[Vec<(usize, f64)>]) -> Result<Self, Singular> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut col_rows: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in cols.iter().enumerate() {
            for &(i, v) in col {
                if v != 0.0 {
                    rows[i].push((c, v));
                    col_rows[c].push(i);
                }
            }
        }
        let mut col_count: Vec<usize> = col_rows.iter().map(Vec::len).collect();
        let mut row_done = vec![false; m];
        let mut col_done = vec![false; m];
        let mut pos = vec![usize::MAX; m];

        let mut f = Factor {
            m,
            piv_row: Vec::with_capacity(m),
            piv_col: Vec::with_capacity(m),
            diag: Vec::with_capacity(m),
            l_start: vec![0],
            l: Vec::new(),
            u_start: vec![0],
            u: Vec::new(),
            etas: Vec::new(),
        };

        for _ in 0..m {
            let (p, q, apq) = Self::choose(&rows, &col_rows, &col_count, &row_done, &col_done)?;

            for &(j, _) in &rows[p] {
                col_count[j] -= 1;
            }
            let pivot_row = std::mem::take(&mut rows[p]);
            row_done[p] = true;
            col_done[q] = true;

            let active = std::mem::take(&mut col_rows[q]);
            for &i in &active {
                if row_done[i] {
                    continue;
                }
                let row = &mut rows[i];
                let k = row.iter().position(|e| e.0 == q).expect("column pattern lists row");
                let l = row.swap_remove(k).1 / apq;
                f.l.push((i, l));
                for (t, e) in row.iter().enumerate() {
                    pos[e.0] = t;
                }
                for &(j, v) in &pivot_row {
                    if j == q {
                        continue;
                    }
                    if pos[j] != usize::MAX {
                        row[pos[j]].1 -= l * v;
                    } else {
                        pos[j] = row.len();
                        row.push((j, -l * v));
                        col_rows[j].push(i);
                        col_count[j] += 1;
                    }
                }
                for e in row.iter() {
                    pos[e.0] = usize::MAX;
                }
            }
            f.l_start.push(f.l.len());
            f.u.extend(pivot_row.into_iter().filter(|e| e.0 != q));
            f.u_start.push(f.u.len());
            f.piv_row.push(p);
            f.piv_col.push(q);
            f.diag.push(apq);
        }
        Ok(f)
    }

    /// Markowitz search over the sparsest few columns and rows.
    fn choose(
        rows: &[Vec<(usize, f64)>],
        col_rows: &[Vec<usize>],
        col_count: &[usize],
        row_done: &[bool],
        col_done: &[bool],
    ) -> Result<(usize, usize, f64), Singular> {
        let m = rows.len();
        let col_max = |j: usize| {
            col_rows[j]
                .iter()
                .filter(|&&i| !row_done[i])
                .filter_map(|&i| lookup(&rows[i], j))
                .fold(0.0_f64, |a, v| a.max(v.abs()))
        };
        let cmin = (0..m).filter(|&j| !col_done[j]).map(|j| col_count[j]).min().ok_or(Singular)?;
        let rmin = (0..m).filter(|&i| !row_done[i]).map(|i| rows[i].len()).min().ok_or(Singular)?;
        if cmin == 0 || rmin == 0 {
            return Err(Singular);
        }

        // (cost, −|a|, row, col, a)
        let mut best: Option<(usize, f64, usize, usize, f64)> = None;
        let mut consider = |cost: usize, i: usize, j: usize, a: f64| {
            let key = (cost, -a.abs(), i, j, a);
            let better = match &best {
                None => true,
                Some(b) => (key.0, key.1, key.2, key.3) < (b.0, b.1, b.2, b.3),
            };
            if better {
                best = Some(key);
            }
        };
        for j in (0..m).filter(|&j| !col_done[j] && col_count[j] == cmin).take(SEARCH) {
            let cap = col_max(j);
            for &i in col_rows[j].iter().filter(|&&i| !row_done[i]) {
                if let Some(a) = lookup(&rows[i], j) {
                    if a.abs() >= THRESHOLD * cap && a.abs() > SINGULAR_TOL {
                        consider((rows[i].len() - 1) * (cmin - 1), i, j, a);
                    }
                }
            }
        }
        for i in (0..m).filter(|&i| !row_done[i] && rows[i].len() == rmin).take(SEARCH) {
            for &(j, a) in &rows[i] {
                if a.abs() > SINGULAR_TOL && a.abs() >= THRESHOLD * col_max(j) {
                    consider((rmin - 1) * (col_count[j] - 1), i, j, a);
                }
            }
        }
        if let Some((_, _, i, j, a)) = best {
            return Ok((i, j, a));
        }
        // Nothing passes the threshold in the sparse candidates: fall back to
        // the largest remaining entry.
        let mut big: Option<(f64, usize, usize, f64)> = None;
        for i in (0..m).filter(|&i| !row_done[i]) {
            for &(j, a) in &rows[i] {
                if big.is_none_or(|b| a.abs() > b.0) {
                    big = Some((a.abs(), i, j, a));
                }
            }
        }
        match big {
            Some((mag, i, j, a)) if mag > SINGULAR_TOL => Ok((i, j, a)),
            _ => Err(Singular),
        }
    }

    pub(super) fn updates(&self) -> usize {
        self.etas.len()
    }

    /// Solves B x = a; `a` is indexed by row, the result by basis position.
    pub(super) fn ftran(&self, mut w: Vec<f64>) -> Vec<f64> {
        let m = self.m;
        for k in 0..m {
            let wp = w[self.piv_row[k]];
            if wp != 0.0 {
                for &(i, l) in &self.l[self.l_start[k]..self.l_start[k + 1]] {
                    w[i] -= l * wp;
                }
            }
        }
        let mut x = vec![0.0; m];
        for k in (0..m).rev() {
            let mut s = w[self.piv_row[k]];
            for &(j, u) in &self.u[self.u_start[k]..self.u_start[k + 1]] {
                s -= u * x[j];
            }
            x[self.piv_col[k]] = s / self.diag[k];
        }
        for eta in &self.etas {
            let xr = x[eta.r];
            if xr != 0.0 {
                let t = xr / eta.pivot;
                for &(i, a) in &eta.entries {
                    x[i] -= a * t;
                }
                x[eta.r] = t;
            }
        }
        x
    }

    /// Solves yᵀ B = cᵀ; `c` is indexed by basis position, the result by row.
    pub(super) fn btran(&self, mut c: Vec<f64>) -> Vec<f64> {
        let m = self.m;
        for eta in self.etas.iter().rev() {
            let s: f64 = eta.entries.iter().map(|&(i, a)| c[i] * a).sum();
            c[eta.r] = (c[eta.r] - s) / eta.pivot;
        }
        let mut y = vec![0.0; m];
        for k in 0..m {
            let z = c[self.piv_col[k]] / self.diag[k];
            y[self.piv_row[k]] = z;
            if z != 0.0 {
                for &(j, u) in &self.u[self.u_start[k]..self.u_start[k + 1]] {
                    c[j] -= z * u;
                }
            }
        }
        for k in (0..m).rev() {
            let s: f64 = self.l[self.l_start[k]..self.l_start[k + 1]].iter().map(|&(i, l)| y[i] * l).sum();
            y[self.piv_row[k]] -= s;
        }
        y
    }

    /// Records the replacement of basis position r by a column whose
    /// transformed form (B⁻¹ a) is `alpha`.
    pub(super) fn update(&mut self, r: usize, alpha: &[f64]) {
        let entries = alpha.iter().enumerate().filter(|&(i, a)| i != r && *a != 0.0).map(|(i, a)| (i, *a)).collect();
        self.etas.push(Eta { r, pivot: alpha[r], entries });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_cols(a: &[Vec<f64>]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m).map(|c| (0..m).filter(|&i| a[i][c] != 0.0).map(|i| (i, a[i][c])).collect()).collect()
    }

    fn mul(a: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(u, v)| u * v).sum()).collect()
    }

    #[test]
    fn solves_and_updates() {
        let mut a = vec![
            vec![2.0, 0.0, 1.0, 0.0],
            vec![1.0, 3.0, 0.0, 0.0],
            vec![0.0, 1.0, 4.0, 1.0],
            vec![0.0, 0.0, 1.0, 5.0],
        ];
        let mut f = Factor::new(4, &dense_cols(&a)).unwrap();
        let rhs = vec![1.0, -2.0, 0.5, 3.0];
        let x = f.ftran(rhs.clone());
        for (u, v) in mul(&a, &x).iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-12);
        }
        let c = vec![1.0, 0.0, -1.0, 2.0];
        let y = f.btran(c.clone());
        for col in 0..4 {
            let s: f64 = (0..4).map(|i| y[i] * a[i][col]).sum();
            assert!((s - c[col]).abs() < 1e-12);
        }

        // Replace column 1 and check both solves against the new matrix.
        let new_col = vec![0.0, 1.0, 1.0, -1.0];
        let alpha = f.ftran(new_col.clone());
        f.update(1, &alpha);
        for (i, v) in new_col.iter().enumerate() {
            a[i][1] = *v;
        }
        let x = f.ftran(rhs.clone());
        for (u, v) in mul(&a, &x).iter().zip(&rhs) {
            assert!((u - v).abs() < 1e-12);
        }
        let y = f.btran(c.clone());
        for col in 0..4 {
            let s: f64 = (0..4).map(|i| y[i] * a[i][col]).sum();
            assert!((s - c[col]).abs() < 1e-12);
        }
        assert_eq!(f.updates(), 1);
    }

    #[test]
    fn detects_singular() {
        let a = vec![vec![1.0, 2.0], vec![2.0, 4.0]];
        assert!(Factor::new(2, &dense_cols(&a)).is_err());
    }
}
