//! Thin-SVD factorisation of the instrument matrix.
//!
//! With `Z = U diag(d) Q'`, the ridge projection
//! `P(gamma) = Z (Z'Z + gamma I)^-1 Z'` equals `U diag(w) U'` where
//! `w_l = d_l^2 / (d_l^2 + gamma)`. Every quantity below is a
//! reweighting of the same factors, so `Z` is factored once and any number
//! of penalties can be queried in `O(n r)` (or `O(n^2 r)` for the
//! squared-entry quadratic form).
//!
//! When `r == n`, `U` is orthogonal and `P = U diag(w - t) U' + t I` for any
//! shift `t`. Off-diagonal sums then use weights centred on their midrange,
//! which avoids cancelling two nearly equal totals when `P` is close to a
//! multiple of the identity.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Default row count above which `P` is never materialised implicitly.
pub const DEFAULT_MATERIALIZE_THRESHOLD: usize = 4096;

#[derive(Debug, Clone)]
pub struct RidgeKernel {
    u: DMatrix<f64>,
    u_sq: DMatrix<f64>,
    d: Vec<f64>,
    k: usize,
    rank_tol: f64,
    materialize_threshold: usize,
}

/// Factor `z`. Numerical rank uses the cutoff `eps * max(n, k) * d_max`.
pub fn build_kernel(z: &DMatrix<f64>) -> Result<RidgeKernel> {
    RidgeKernel::new(z)
}

impl RidgeKernel {
    pub fn new(z: &DMatrix<f64>) -> Result<Self> {
        let (n, k) = z.shape();
        if n < 2 || k == 0 {
            return Err(Error::Dimension(format!("instrument matrix is {n}x{k}")));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Z"));
        }
        let svd = z.clone().svd(true, false);
        let u_full = svd.u.expect("left singular vectors requested");
        let s = svd.singular_values;
        let mut order: Vec<usize> = (0..s.len()).collect();
        order.sort_by(|&a, &b| s[b].total_cmp(&s[a]));
        let d_max = order.first().map_or(0.0, |&l| s[l]);
        let rank_tol = f64::EPSILON * (n.max(k) as f64) * d_max;
        let keep: Vec<usize> = order.into_iter().filter(|&l| s[l] > rank_tol).collect();
        if keep.is_empty() {
            return Err(Error::ZeroRank);
        }
        let d: Vec<f64> = keep.iter().map(|&l| s[l]).collect();
        let u = u_full.select_columns(keep.iter());
        let u_sq = u.map(|v| v * v);
        Ok(RidgeKernel {
            u,
            u_sq,
            d,
            k,
            rank_tol,
            materialize_threshold: DEFAULT_MATERIALIZE_THRESHOLD,
        })
    }

    pub fn with_materialize_threshold(mut self, rows: usize) -> Self {
        self.materialize_threshold = rows;
        self
    }

    pub fn materialize_threshold(&self) -> usize {
        self.materialize_threshold
    }

    pub fn n(&self) -> usize {
        self.u.nrows()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Numerical rank `r`.
    pub fn rank(&self) -> usize {
        self.d.len()
    }

    /// True when `r == k`, i.e. `Z'Z` is invertible and `gamma = 0` is admissible.
    pub fn full_column_rank(&self) -> bool {
        self.rank() == self.k
    }

    /// Retained singular values, descending.
    pub fn singular_values(&self) -> &[f64] {
        &self.d
    }

    /// Left singular vectors, `n x r`.
    pub fn left_vectors(&self) -> &DMatrix<f64> {
        &self.u
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn shrinkage_weights(&self, gamma: f64) -> Result<Vec<f64>> {
        check_gamma(gamma)?;
        Ok(self.d.iter().map(|&d| weight(d, gamma)).collect())
    }

    /// Diagonal of `P(gamma)`.
    pub fn ridge_diag(&self, gamma: f64) -> Result<Vec<f64>> {
        let w = DVector::from_vec(self.shrinkage_weights(gamma)?);
        Ok((&self.u_sq * w).data.into())
    }

    /// Weights `v` and shift `t` with `P = U diag(v) U' + t I`.
    fn offdiag_weights(&self, gamma: f64) -> Result<(Vec<f64>, f64)> {
        let w = self.shrinkage_weights(gamma)?;
        if self.rank() < self.n() {
            return Ok((w, 0.0));
        }
        // w is descending, so the midrange is the mean of the ends
        let t = 0.5 * (w[0] + w[w.len() - 1]);
        // w_l - w_m = gamma (d_l^2 - d_m^2) / ((d_l^2 + gamma)(d_m^2 + gamma)), free of cancellation
        let diff = |a: f64, b: f64| {
            let (a2, b2) = (a * a, b * b);
            gamma * (a2 - b2) / ((a2 + gamma) * (b2 + gamma))
        };
        let (hi, lo) = (self.d[0], self.d[self.d.len() - 1]);
        let v = self.d.iter().map(|&dl| 0.5 * (diff(dl, hi) + diff(dl, lo))).collect();
        Ok((v, t))
    }

    /// `S(gamma) = sum_{i != j} P_ij^2`, via `sum_l w_l^2 - sum_i P_ii^2`.
    pub fn offdiag_sq_sum(&self, gamma: f64) -> Result<f64> {
        let (w, _) = self.offdiag_weights(gamma)?;
        let total: f64 = w.iter().map(|v| v * v).sum();
        let diag = &self.u_sq * DVector::from_vec(w);
        Ok((total - diag.norm_squared()).max(0.0))
    }

    /// `sum_{i != j} P_ij e_i e_j`.
    pub fn quad_form_offdiag(&self, gamma: f64, e: &DVector<f64>) -> Result<f64> {
        self.check_len(e)?;
        let (w, _) = self.offdiag_weights(gamma)?;
        let proj = self.u.tr_mul(e);
        let full: f64 = w.iter().zip(proj.iter()).map(|(w, p)| w * p * p).sum();
        let diag = &self.u_sq * DVector::from_vec(w);
        let own: f64 = diag.iter().zip(e.iter()).map(|(p, e)| p * e * e).sum();
        Ok(full - own)
    }

    /// `sum_{i != j} P_ij^2 e_i^2 e_j^2`.
    ///
    /// Materialises `P` when `n` is within the threshold, otherwise streams
    /// one row of `P` at a time.
    pub fn hadamard_sq_quad(&self, gamma: f64, e: &DVector<f64>) -> Result<f64> {
        self.check_len(e)?;
        if self.n() <= self.materialize_threshold {
            let p = self.materialize(gamma, false)?;
            return Ok(hadamard_sq_dense(&p, e));
        }
        let (w, _) = self.offdiag_weights(gamma)?;
        let uw = self.scaled_u(&w);
        let a: Vec<f64> = e.iter().map(|v| v * v).collect();
        let mut total = 0.0;
        for i in 0..self.n() {
            if a[i] == 0.0 {
                continue;
            }
            let row = &self.u * uw.row(i).transpose();
            let mut acc = 0.0;
            for (j, (&p, &aj)) in row.iter().zip(&a).enumerate() {
                if j != i {
                    acc += p * p * aj;
                }
            }
            total += a[i] * acc;
        }
        Ok(total)
    }

    /// Dense `P(gamma) = U diag(w) U'`. Errors above the row threshold unless forced.
    pub fn materialize(&self, gamma: f64, force: bool) -> Result<DMatrix<f64>> {
        if !force && self.n() > self.materialize_threshold {
            return Err(Error::Resource {
                n: self.n(),
                threshold: self.materialize_threshold,
            });
        }
        let (w, shift) = self.offdiag_weights(gamma)?;
        let uw = self.scaled_u(&w);
        let mut p = uw * self.u.transpose();
        let n = p.nrows();
        for i in 0..n {
            p[(i, i)] += shift;
        }
        // enforce exact symmetry
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (p[(i, j)] + p[(j, i)]);
                p[(i, j)] = v;
                p[(j, i)] = v;
            }
        }
        Ok(p)
    }

    /// Dense projection at a fixed penalty, for repeated evaluation.
    pub fn projection(&self, gamma: f64) -> Result<RidgeProjection> {
        Ok(RidgeProjection {
            p: self.materialize(gamma, false)?,
            gamma,
            rank: self.rank(),
        })
    }

    fn scaled_u(&self, w: &[f64]) -> DMatrix<f64> {
        let mut uw = self.u.clone();
        for (mut c, &wl) in uw.column_iter_mut().zip(w) {
            c *= wl;
        }
        uw
    }

    fn check_len(&self, e: &DVector<f64>) -> Result<()> {
        if e.len() != self.n() {
            return Err(Error::Dimension(format!(
                "residual vector has length {} but n = {}",
                e.len(),
                self.n()
            )));
        }
        Ok(())
    }
}

/// A materialised `P(gamma)`; the two jackknife sums cost `O(n^2)` each.
#[derive(Debug, Clone)]
pub struct RidgeProjection {
    p: DMatrix<f64>,
    gamma: f64,
    rank: usize,
}

impl RidgeProjection {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn quad_form_offdiag(&self, e: &DVector<f64>) -> f64 {
        offdiag_quad_dense(&self.p, e)
    }

    pub fn hadamard_sq_quad(&self, e: &DVector<f64>) -> f64 {
        hadamard_sq_dense(&self.p, e)
    }
}

#[inline]
fn weight(d: f64, gamma: f64) -> f64 {
    let d2 = d * d;
    d2 / (d2 + gamma)
}

pub(crate) fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_nan() || gamma < 0.0 {
        return Err(Error::Domain(format!("penalty must be >= 0, got {gamma}")));
    }
    Ok(())
}

/// `sum_{i != j} A_ij e_i e_j` for a dense symmetric `A`.
pub(crate) fn offdiag_quad_dense(a: &DMatrix<f64>, e: &DVector<f64>) -> f64 {
    let n = a.nrows();
    let mut total = 0.0;
    for j in 0..n {
        let col = a.column(j);
        let mut acc = 0.0;
        for i in 0..n {
            if i != j {
                acc += col[i] * e[i];
            }
        }
        total += acc * e[j];
    }
    total
}

/// `sum_{i != j} A_ij^2 e_i^2 e_j^2` for a dense symmetric `A`.
pub(crate) fn hadamard_sq_dense(a: &DMatrix<f64>, e: &DVector<f64>) -> f64 {
    let n = a.nrows();
    let sq: Vec<f64> = e.iter().map(|v| v * v).collect();
    let mut total = 0.0;
    for j in 0..n {
        if sq[j] == 0.0 {
            continue;
        }
        let col = a.column(j);
        let mut acc = 0.0;
        for i in 0..n {
            if i != j {
                acc += col[i] * col[i] * sq[i];
            }
        }
        total += acc * sq[j];
    }
    total
}
