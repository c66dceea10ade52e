use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::SparseMatrix;
use crate::linalg::{axpy, dot, gemm_nn, gemm_nt, gemm_tn, norm2, symmetric_eigen, Matrix};
use crate::scalar::Real;

/// Largest `n_rows * n_cols` that [`densify`] accepts by default.
pub const DEFAULT_DENSIFY_CAP: usize = 20_000 * 20_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel<T> {
    pub mean: Vec<T>,
    /// `k × d`, orthonormal rows.
    pub components: Matrix<T>,
    /// Per-component sample variance (denominator `n - 1`), descending.
    pub explained_variance: Vec<T>,
}

/// Dense copy of a sparse matrix, refusing inputs above `cap` entries.
pub fn densify<T: Real>(x: &SparseMatrix, cap: usize) -> Result<Matrix<T>> {
    let size = x.n_rows.saturating_mul(x.n_cols);
    if size > cap {
        return Err(Error::invalid(format!(
            "densifying a {}x{} matrix exceeds the cap of {cap} entries",
            x.n_rows, x.n_cols
        )));
    }
    let mut m = Matrix::zeros(x.n_rows, x.n_cols);
    for i in 0..x.n_rows {
        let (idx, val) = x.row(i);
        for (&c, &v) in idx.iter().zip(val) {
            m[(i, c)] = T::lit(v);
        }
    }
    Ok(m)
}

/// Fits the top-`k` principal axes of `x`.
///
/// The eigendecomposition runs on whichever of `XᵀX` (d×d) or `XXᵀ` (n×n) is
/// smaller; both give the right singular vectors of the centered data.
pub fn fit_pca<T: Real>(x: &Matrix<T>, k: usize) -> Result<PcaModel<T>> {
    let (n, d) = (x.rows, x.cols);
    if n == 0 || d == 0 {
        return Err(Error::invalid("PCA needs a non-empty matrix"));
    }
    if k == 0 || k > n.min(d) {
        return Err(Error::invalid(format!("PCA with k={k} needs 1 <= k <= min({n}, {d})")));
    }
    if !x.is_finite() {
        return Err(Error::invalid("PCA input contains non-finite values"));
    }
    let mut mean = vec![T::zero(); d];
    for i in 0..n {
        axpy(T::one(), x.row(i), &mut mean);
    }
    let inv_n = T::one() / T::lit(n as f64);
    mean.iter_mut().for_each(|m| *m *= inv_n);
    let mut xc = x.clone();
    for i in 0..n {
        axpy(-T::one(), &mean, xc.row_mut(i));
    }
    let denom = T::lit((n.max(2) - 1) as f64);

    let (eigvals, mut comps) = if d <= n {
        let mut cov = vec![T::zero(); d * d];
        gemm_tn(d, n, d, &xc.data, &xc.data, &mut cov);
        let (vals, vecs) = symmetric_eigen(&Matrix::from_vec(d, d, cov)?)?;
        let rows: Vec<Vec<T>> = (0..k).map(|i| vecs.row(i).to_vec()).collect();
        (vals[..k].to_vec(), rows)
    } else {
        let mut gram = vec![T::zero(); n * n];
        gemm_nt(n, d, n, &xc.data, &xc.data, &mut gram);
        let (vals, vecs) = symmetric_eigen(&Matrix::from_vec(n, n, gram)?)?;
        let mut rows = Vec::with_capacity(k);
        for i in 0..k {
            let mut v = vec![T::zero(); d];
            gemm_nn(1, n, d, vecs.row(i), &xc.data, &mut v);
            rows.push(v);
        }
        (vals[..k].to_vec(), rows)
    };

    let top = eigvals.first().copied().unwrap_or_else(T::zero).max(T::zero());
    let tol = top * T::epsilon() * T::lit((n.max(d) * 8) as f64);
    let mut explained = Vec::with_capacity(k);
    for (i, &lam) in eigvals.iter().enumerate() {
        if lam <= tol {
            // no variance along this axis: any unit vector orthogonal to the
            // earlier ones serves, chosen by `orthonormalize`
            comps[i].iter_mut().for_each(|v| *v = T::zero());
            explained.push(T::zero());
        } else {
            explained.push(lam / denom);
        }
    }
    orthonormalize(&mut comps);
    for c in comps.iter_mut() {
        let mut best = 0;
        for (j, v) in c.iter().enumerate() {
            if v.abs() > c[best].abs() {
                best = j;
            }
        }
        if c[best] < T::zero() {
            c.iter_mut().for_each(|v| *v = -*v);
        }
    }
    Ok(PcaModel {
        mean,
        components: Matrix::from_rows(&comps)?,
        explained_variance: explained,
    })
}

/// Modified Gram-Schmidt, twice for stability. Rows that vanish are replaced
/// by the standard basis vector with the largest residual against the
/// preceding rows (the first such on ties).
fn orthonormalize<T: Real>(rows: &mut [Vec<T>]) {
    let d = rows.first().map_or(0, Vec::len);
    let project_out = |done: &[Vec<T>], v: &mut Vec<T>| {
        for _ in 0..2 {
            for u in done {
                let p = dot(u, v);
                axpy(-p, u, v);
            }
        }
    };
    for i in 0..rows.len() {
        let (done, rest) = rows.split_at_mut(i);
        let v = &mut rest[0];
        let original = norm2(v);
        project_out(done, v);
        let mut nv = norm2(v);
        if nv <= original * T::lit(1e-6) || nv == T::zero() {
            // some residual has squared norm >= (d - i) / d > 0
            for j in 0..d {
                let mut e = vec![T::zero(); d];
                e[j] = T::one();
                project_out(done, &mut e);
                let ne = norm2(&e);
                if ne > nv {
                    *v = e;
                    nv = ne;
                }
            }
        }
        let inv = T::one() / nv;
        v.iter_mut().for_each(|x| *x *= inv);
    }
}

impl<T: Real> PcaModel<T> {
    pub fn n_components(&self) -> usize {
        self.components.rows
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(X - mean) · Cᵀ`
    pub fn transform(&self, x: &Matrix<T>) -> Result<Matrix<T>> {
        if x.cols != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.cols });
        }
        let k = self.n_components();
        let mut xc = x.clone();
        for i in 0..x.rows {
            axpy(-T::one(), &self.mean, xc.row_mut(i));
        }
        let mut out = vec![T::zero(); x.rows * k];
        gemm_nt(x.rows, self.dim(), k, &xc.data, &self.components.data, &mut out);
        Matrix::from_vec(x.rows, k, out)
    }

    /// Projects sparse rows without densifying the input.
    pub fn transform_sparse(&self, x: &SparseMatrix) -> Result<Matrix<T>> {
        if x.n_cols != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.n_cols });
        }
        let k = self.n_components();
        let shift: Vec<T> = (0..k).map(|j| dot(&self.mean, self.components.row(j))).collect();
        let mut out = Matrix::zeros(x.n_rows, k);
        for i in 0..x.n_rows {
            let (idx, val) = x.row(i);
            let row = out.row_mut(i);
            for j in 0..k {
                let c = self.components.row(j);
                let s: T = idx.iter().zip(val).map(|(&col, &v)| T::lit(v) * c[col]).sum();
                row[j] = s - shift[j];
            }
        }
        Ok(out)
    }

    /// `mean + T · C`
    pub fn inverse_transform(&self, t: &Matrix<T>) -> Result<Matrix<T>> {
        let k = self.n_components();
        if t.cols != k {
            return Err(Error::DimensionMismatch { expected: k, got: t.cols });
        }
        let d = self.dim();
        let mut out = vec![T::zero(); t.rows * d];
        for i in 0..t.rows {
            out[i * d..(i + 1) * d].copy_from_slice(&self.mean);
        }
        gemm_nn(t.rows, k, d, &t.data, &self.components.data, &mut out);
        Matrix::from_vec(t.rows, d, out)
    }
}
