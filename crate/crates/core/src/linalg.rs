//! Compressed sparse row storage and Jacobi-preconditioned Krylov solvers.

use std::io::Write;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from `(row, col, value)` entries; duplicates are summed
    /// in input order.
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut counts = vec![0usize; n_rows + 1];
        for &(r, c, _) in triplets {
            if r >= n_rows || c >= n_cols {
                return Err(Error::IndexOutOfRange {
                    row: r,
                    col: c,
                    n_rows,
                    n_cols,
                });
            }
            counts[r + 1] += 1;
        }
        for i in 0..n_rows {
            counts[i + 1] += counts[i];
        }
        let mut next = counts.clone();
        let mut bucket = vec![(0usize, 0.0f64); triplets.len()];
        for &(r, c, v) in triplets {
            bucket[next[r]] = (c, v);
            next[r] += 1;
        }

        let mut row_ptr = Vec::with_capacity(n_rows + 1);
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values = Vec::with_capacity(triplets.len());
        row_ptr.push(0);
        for r in 0..n_rows {
            let row = &mut bucket[counts[r]..counts[r + 1]];
            row.sort_by_key(|&(c, _)| c);
            for &(c, v) in row.iter() {
                if col_idx.len() > row_ptr[r] && *col_idx.last().unwrap() == c {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(c);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Ok(CsrMatrix {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        CsrMatrix {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::identity(diag.len());
        m.values.copy_from_slice(diag);
        m
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_idx(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterates over `(col, value)` of row `r`.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let range = self.row_ptr[r]..self.row_ptr[r + 1];
        match self.col_idx[range.clone()].binary_search(&c) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n_rows.min(self.n_cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    /// Row sums, i.e. `A·1`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.row(r).map(|(_, v)| v).sum()).collect()
    }

    pub fn spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_cols {
            return Err(Error::DimensionMismatch {
                expected: self.n_cols,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_rows];
        self.spmv_into(x, &mut y);
        Ok(y)
    }

    /// `y = A x` without dimension checks.
    pub fn spmv_into(&self, x: &[f64], y: &mut [f64]) {
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yr = acc;
        }
    }

    pub fn transpose_spmv(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.n_rows {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows,
                found: x.len(),
            });
        }
        let mut y = vec![0.0; self.n_cols];
        for (r, &xr) in x.iter().enumerate() {
            for (c, v) in self.row(r) {
                y[c] += v * xr;
            }
        }
        Ok(y)
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        (0..self.n_rows)
            .map(|r| x[r] * self.row(r).map(|(c, v)| v * y[c]).sum::<f64>())
            .sum()
    }

    /// Largest entrywise asymmetry `max |A_ij − A_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.n_cols]; self.n_rows];
        for (r, row) in d.iter_mut().enumerate() {
            for (c, v) in self.row(r) {
                row[c] = v;
            }
        }
        d
    }

    /// MatrixMarket coordinate dump (1-based indices).
    pub fn write_matrix_market<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(out, "{} {} {}", self.n_rows, self.n_cols, self.nnz())?;
        for r in 0..self.n_rows {
            for (c, v) in self.row(r) {
                writeln!(out, "{} {} {:.17e}", r + 1, c + 1, v)?;
            }
        }
        Ok(())
    }
}

/// A square linear map that can be applied to vectors.
pub trait LinearOperator {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);
    /// Diagonal used by the Jacobi preconditioner.
    fn diagonal(&self) -> Vec<f64>;
}

impl LinearOperator for CsrMatrix {
    fn dim(&self) -> usize {
        self.n_rows
    }
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_into(x, y)
    }
    fn diagonal(&self) -> Vec<f64> {
        CsrMatrix::diagonal(self)
    }
}

/// 2×2 block operator `[[c11 A11, c12 A12], [c21 A21, c22 A22]]` applied
/// matrix-free from its N×N blocks.
#[derive(Clone, Copy, Debug)]
pub struct BlockSystem<'a> {
    pub blocks: [[(f64, &'a CsrMatrix); 2]; 2],
}

impl<'a> BlockSystem<'a> {
    /// The semi-implicit Cahn–Hilliard operator `[[M, τS], [εS, −M₂₂]]`.
    pub fn cahn_hilliard(
        mass: &'a CsrMatrix,
        stiffness: &'a CsrMatrix,
        mass22: &'a CsrMatrix,
        tau: f64,
        epsilon: f64,
    ) -> Self {
        BlockSystem {
            blocks: [
                [(1.0, mass), (tau, stiffness)],
                [(epsilon, stiffness), (-1.0, mass22)],
            ],
        }
    }

    pub fn n(&self) -> usize {
        self.blocks[0][0].1.n_rows()
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.n();
        let mut d = vec![vec![0.0; 2 * n]; 2 * n];
        for bi in 0..2 {
            for bj in 0..2 {
                let (c, a) = self.blocks[bi][bj];
                for r in 0..n {
                    for (col, v) in a.row(r) {
                        d[bi * n + r][bj * n + col] = c * v;
                    }
                }
            }
        }
        d
    }
}

impl LinearOperator for BlockSystem<'_> {
    fn dim(&self) -> usize {
        2 * self.n()
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        let n = self.n();
        let mut tmp = vec![0.0; n];
        for bi in 0..2 {
            let out = &mut y[bi * n..(bi + 1) * n];
            out.iter_mut().for_each(|v| *v = 0.0);
            for bj in 0..2 {
                let (c, a) = self.blocks[bi][bj];
                a.spmv_into(&x[bj * n..(bj + 1) * n], &mut tmp);
                for (o, t) in out.iter_mut().zip(&tmp) {
                    *o += c * t;
                }
            }
        }
    }

    fn diagonal(&self) -> Vec<f64> {
        let (c11, a11) = self.blocks[0][0];
        let (c22, a22) = self.blocks[1][1];
        a11.diagonal()
            .into_iter()
            .map(|v| c11 * v)
            .chain(a22.diagonal().into_iter().map(|v| c22 * v))
            .collect()
    }
}

#[derive(Clone, Copy, Debug)]
pub struct SolverOptions {
    pub tol_rel: f64,
    pub restart: usize,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol_rel: 1e-10,
            restart: 50,
            max_iter: 10_000,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final `‖Ax − b‖ / ‖b‖`, recomputed from scratch.
    pub relative_residual: f64,
}

pub fn norm(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

fn residual<A: LinearOperator + ?Sized>(a: &A, x: &[f64], b: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; b.len()];
    a.apply(x, &mut r);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    r
}

fn jacobi(a: &impl LinearOperator) -> Vec<f64> {
    a.diagonal()
        .into_iter()
        .map(|d| if d != 0.0 { 1.0 / d } else { 1.0 })
        .collect()
}

fn check_dims<A: LinearOperator>(a: &A, b: &[f64], x0: Option<&[f64]>) -> Result<()> {
    if b.len() != a.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            found: b.len(),
        });
    }
    if let Some(x0) = x0 {
        if x0.len() != a.dim() {
            return Err(Error::DimensionMismatch {
                expected: a.dim(),
                found: x0.len(),
            });
        }
    }
    Ok(())
}

/// Restarted GMRES, right-preconditioned with Jacobi, so the Arnoldi residual
/// estimate tracks the true residual.
pub fn gmres_solve<A: LinearOperator>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<Solution> {
    check_dims(a, b, x0)?;
    let n = a.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = opts.tol_rel * bnorm;
    let pinv = jacobi(a);
    let m = opts.restart.max(1);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut r = residual(a, &x, b);
    let mut beta = norm(&r);
    let mut iterations = 0;

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = vec![vec![0.0; m]; m + 1];
    let mut cs = vec![0.0; m];
    let mut sn = vec![0.0; m];
    let mut g = vec![0.0; m + 1];
    let mut z = vec![0.0; n];

    while beta > target {
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                context: format!("GMRES after {iterations} iterations"),
                residual: beta / bnorm,
            });
        }
        basis.clear();
        basis.push(r.iter().map(|v| v / beta).collect());
        g.iter_mut().for_each(|v| *v = 0.0);
        g[0] = beta;
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            for (zi, (vi, pi)) in z.iter_mut().zip(basis[k].iter().zip(&pinv)) {
                *zi = vi * pi;
            }
            let mut w = vec![0.0; n];
            a.apply(&z, &mut w);
            iterations += 1;
            for i in 0..=k {
                let h = dot(&w, &basis[i]);
                hess[i][k] = h;
                w.iter_mut().zip(&basis[i]).for_each(|(wj, vj)| *wj -= h * vj);
            }
            let wn = norm(&w);
            hess[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * hess[i][k] + sn[i] * hess[i + 1][k];
                hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
                hess[i][k] = t;
            }
            let denom = hess[k][k].hypot(hess[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = hess[k][k] / denom;
                sn[k] = hess[k + 1][k] / denom;
            }
            hess[k][k] = denom;
            hess[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k += 1;
            if g[k].abs() <= target || wn == 0.0 {
                break;
            }
            basis.push(w.iter().map(|v| v / wn).collect());
        }
        // back substitution for the least-squares coefficients
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in i + 1..k {
                s -= hess[i][j] * y[j];
            }
            y[i] = s / hess[i][i];
        }
        let mut update = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            update.iter_mut().zip(&basis[j]).for_each(|(u, v)| *u += yj * v);
        }
        x.iter_mut()
            .zip(update.iter().zip(&pinv))
            .for_each(|(xi, (u, p))| *xi += u * p);
        r = residual(a, &x, b);
        beta = norm(&r);
    }
    Ok(Solution {
        x,
        iterations,
        relative_residual: beta / bnorm,
    })
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite
/// operators.
pub fn cg_solve<A: LinearOperator>(
    a: &A,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<Solution> {
    check_dims(a, b, x0)?;
    let n = a.dim();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(Solution {
            x: vec![0.0; n],
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let target = opts.tol_rel * bnorm;
    let pinv = jacobi(a);
    let mut x = x0.map_or_else(|| vec![0.0; n], <[f64]>::to_vec);
    let mut iterations = 0;
    // outer loop re-seeds from the true residual if recurrences drift
    loop {
        let mut r = residual(a, &x, b);
        let rn = norm(&r);
        if rn <= target {
            return Ok(Solution {
                x,
                iterations,
                relative_residual: rn / bnorm,
            });
        }
        if iterations >= opts.max_iter {
            return Err(Error::NoConvergence {
                context: format!("CG after {iterations} iterations"),
                residual: rn / bnorm,
            });
        }
        let mut z: Vec<f64> = r.iter().zip(&pinv).map(|(ri, p)| ri * p).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        let mut ap = vec![0.0; n];
        while iterations < opts.max_iter {
            a.apply(&p, &mut ap);
            iterations += 1;
            let pap = dot(&p, &ap);
            if !(pap > 0.0) {
                return Err(Error::IndefiniteDetected(pap));
            }
            let alpha = rz / pap;
            x.iter_mut().zip(&p).for_each(|(xi, pi)| *xi += alpha * pi);
            r.iter_mut().zip(&ap).for_each(|(ri, api)| *ri -= alpha * api);
            if norm(&r) <= 0.5 * target {
                break;
            }
            z.iter_mut()
                .zip(r.iter().zip(&pinv))
                .for_each(|(zi, (ri, pi))| *zi = ri * pi);
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
        }
    }
}
