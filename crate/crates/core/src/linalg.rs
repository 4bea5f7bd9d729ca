//! Sparse symmetric storage and a profile (skyline) Cholesky factorisation.
//!
//! Grid stiffness matrices in row-major node order have a narrow envelope
//! (about one grid row), except for the periodic wrap rows of a torus, whose
//! envelope reaches back to the first grid row. Profile storage absorbs both
//! without a fill-reducing ordering.

/// Symmetric matrix in compressed-row form (both triangles stored).
#[derive(Clone, Debug, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Builds from per-row `(col, value)` lists; duplicate columns are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < n);
                if last == Some(c) {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                    last = Some(c);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.row(i).find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).map(|(c, v)| v * x[c]).sum();
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.apply(x, &mut y);
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n)
            .map(|i| x[i] * self.row(i).map(|(c, v)| v * y[c]).sum::<f64>())
            .sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }
}

/// Lower-triangular Cholesky factor in profile storage.
#[derive(Clone, Debug)]
pub struct SkylineCholesky {
    first: Vec<usize>,
    start: Vec<usize>,
    data: Vec<f64>,
}

/// Factorisation hit a non-positive pivot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NotPositiveDefinite {
    pub row: usize,
    pub pivot: f64,
}

impl SkylineCholesky {
    /// Factors `A + shift * diag(d)`. A pivot below `rel_pivot_tol` times the
    /// original diagonal entry counts as a failure.
    pub fn factor(
        a: &SparseSym,
        shift: Option<(f64, &[f64])>,
        rel_pivot_tol: f64,
    ) -> Result<Self, NotPositiveDefinite> {
        let n = a.dim();
        let first: Vec<usize> = (0..n)
            .map(|i| a.row(i).map(|(c, _)| c).filter(|&c| c <= i).min().unwrap_or(i))
            .collect();
        let mut start = Vec::with_capacity(n + 1);
        start.push(0);
        for i in 0..n {
            start.push(start[i] + (i - first[i] + 1));
        }
        let mut data = vec![0.0; start[n]];
        for i in 0..n {
            for (c, v) in a.row(i).filter(|&(c, _)| c <= i) {
                data[start[i] + c - first[i]] += v;
            }
            if let Some((s, d)) = shift {
                data[start[i + 1] - 1] += s * d[i];
            }
        }

        for i in 0..n {
            let fi = first[i];
            let row_i = start[i];
            let diag_orig = data[start[i + 1] - 1];
            for j in fi..i {
                let fj = first[j];
                let k0 = fi.max(fj);
                let row_j = start[j];
                let mut s = data[row_i + j - fi];
                let li = &data[row_i + k0 - fi..row_i + j - fi];
                let lj = &data[row_j + k0 - fj..row_j + j - fj];
                s -= li.iter().zip(lj).map(|(a, b)| a * b).sum::<f64>();
                let ljj = data[start[j + 1] - 1];
                data[row_i + j - fi] = s / ljj;
            }
            let off = &data[row_i..start[i + 1] - 1];
            let d = diag_orig - off.iter().map(|v| v * v).sum::<f64>();
            if !(d > rel_pivot_tol * diag_orig.abs()) {
                return Err(NotPositiveDefinite { row: i, pivot: d });
            }
            data[start[i + 1] - 1] = d.sqrt();
        }
        Ok(Self { first, start, data })
    }

    pub fn dim(&self) -> usize {
        self.first.len()
    }

    /// Solves `L L^T x = b` in place.
    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.dim();
        for i in 0..n {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            let s: f64 = row[..i - fi].iter().zip(&x[fi..i]).map(|(l, v)| l * v).sum();
            x[i] = (x[i] - s) / row[i - fi];
        }
        for i in (0..n).rev() {
            let fi = self.first[i];
            let row = &self.data[self.start[i]..self.start[i + 1]];
            x[i] /= row[i - fi];
            let xi = x[i];
            for (xk, l) in x[fi..i].iter_mut().zip(&row[..i - fi]) {
                *xk -= l * xi;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_laplacian(n: usize, periodic: bool) -> SparseSym {
        let rows = (0..n)
            .map(|i| {
                let mut r = vec![(i, 2.0)];
                if i > 0 {
                    r.push((i - 1, -1.0));
                } else if periodic {
                    r.push((n - 1, -1.0));
                }
                if i + 1 < n {
                    r.push((i + 1, -1.0));
                } else if periodic {
                    r.push((0, -1.0));
                }
                r
            })
            .collect();
        SparseSym::from_rows(rows)
    }

    #[test]
    fn solves_dirichlet_path() {
        let a = path_laplacian(50, false);
        let chol = SkylineCholesky::factor(&a, None, 1e-12).unwrap();
        let x_true: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut b = a.mul(&x_true);
        chol.solve_in_place(&mut b);
        for (a, b) in b.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn periodic_path_is_singular_until_shifted() {
        let a = path_laplacian(40, true);
        assert!(SkylineCholesky::factor(&a, None, 1e-10).is_err());
        let d = vec![1.0; 40];
        let chol = SkylineCholesky::factor(&a, Some((0.5, &d)), 1e-10).unwrap();
        let x_true: Vec<f64> = (0..40).map(|i| 1.0 + (i as f64).cos()).collect();
        let mut b = a.mul(&x_true);
        for (bi, xi) in b.iter_mut().zip(&x_true) {
            *bi += 0.5 * xi;
        }
        chol.solve_in_place(&mut b);
        for (a, b) in b.iter().zip(&x_true) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn duplicate_entries_are_summed() {
        let a = SparseSym::from_rows(vec![vec![(0, 1.0), (0, 2.0), (1, -1.0)], vec![(0, -1.0), (1, 3.0)]]);
        assert_eq!(a.get(0, 0), 3.0);
        assert_eq!(a.asymmetry(), 0.0);
        assert_eq!(a.bilinear(&[1.0, 1.0], &[1.0, 0.0]), 2.0);
    }
}
