#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, n: usize, k: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, k, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// `Z (Z'Z + gamma I)^-1 Z'` without any SVD: with `[Z; sqrt(gamma) I] = Q R`,
/// the projection is `Q1 Q1'` where `Q1` holds the first `n` rows of `Q`.
/// For `gamma = 0`, `Z` must have full column rank.
pub fn oracle_projection(z: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    let (n, k) = z.shape();
    let stacked = if gamma > 0.0 {
        let mut m = DMatrix::zeros(n + k, k);
        m.rows_mut(0, n).copy_from(z);
        m.rows_mut(n, k).fill_diagonal(gamma.sqrt());
        m
    } else {
        assert!(k <= n, "unpenalised oracle needs k <= n");
        z.clone()
    };
    let q = stacked.qr().q();
    let q1 = q.rows(0, n);
    let p = q1 * q1.transpose();
    (&p + p.transpose()) * 0.5
}

pub fn offdiag_sq(p: &DMatrix<f64>) -> f64 {
    let n = p.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += p[(i, j)] * p[(i, j)];
            }
        }
    }
    s
}

/// Returns the sum and the sum of absolute terms (for relative comparisons).
pub fn offdiag_quad(p: &DMatrix<f64>, e: &DVector<f64>) -> (f64, f64) {
    let n = p.nrows();
    let (mut s, mut a) = (0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let t = p[(i, j)] * e[i] * e[j];
                s += t;
                a += t.abs();
            }
        }
    }
    (s, a)
}

pub fn hadamard_quad(p: &DMatrix<f64>, e: &DVector<f64>) -> f64 {
    let n = p.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += p[(i, j)] * p[(i, j)] * e[i] * e[i] * e[j] * e[j];
            }
        }
    }
    s
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Column-standardise so every column has mean square one.
pub fn standardise(z: &DMatrix<f64>) -> DMatrix<f64> {
    let n = z.nrows() as f64;
    let mut out = z.clone();
    for mut c in out.column_iter_mut() {
        let s = (c.norm_squared() / n).sqrt();
        c /= s;
    }
    out
}

/// Admissible test penalties: the lower endpoint and powers of ten.
pub fn checked_penalties(full_column_rank: bool) -> Vec<f64> {
    let mut g: Vec<f64> = (-2..=4).map(|m| 10f64.powi(m)).collect();
    g.insert(0, if full_column_rank { 0.0 } else { 1.0 });
    g
}

/// Checks the projection-matrix inequalities at one penalty; returns the
/// first violated item.
pub fn check_projection_properties(kern: &rjar_core::RidgeKernel, gamma: f64, tol: f64) -> Result<(), String> {
    let p = kern.materialize(gamma, true).map_err(|e| e.to_string())?;
    let n = p.nrows();
    let rank = kern.rank() as f64;
    let p2 = &p * &p;
    let p3 = &p2 * &p;
    for h in 0..n {
        let (d1, d2, d3) = (p[(h, h)], p2[(h, h)], p3[(h, h)]);
        if !(d2 >= -tol && d3 >= -tol && d2 <= d1 + tol && d3 <= d1 + tol && d1 <= 1.0 + tol) {
            return Err(format!("(i) row {h}: P={d1} P2={d2} P3={d3}"));
        }
        let row_sq: f64 = p.row(h).iter().map(|v| v * v).sum();
        if (row_sq - d2).abs() > tol || row_sq > d1 + tol {
            return Err(format!("(ii) row {h}: {row_sq} vs {d2} vs {d1}"));
        }
    }
    let w = kern.shrinkage_weights(gamma).map_err(|e| e.to_string())?;
    let sum_w: f64 = w.iter().sum();
    let sum_w2: f64 = w.iter().map(|v| v * v).sum();
    let rtol = tol * rank.max(1.0);
    if (p.trace() - sum_w).abs() > rtol || sum_w > rank + rtol {
        return Err(format!("(iii) {} vs {sum_w}", p.trace()));
    }
    if (p2.trace() - sum_w2).abs() > rtol || sum_w2 > rank + rtol {
        return Err(format!("(iv) {} vs {sum_w2}", p2.trace()));
    }
    if p.amax() > 1.0 + tol {
        return Err(format!("(v) max |P| = {}", p.amax()));
    }
    let mut fourth = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                fourth += p[(i, j)].powi(4);
            }
        }
    }
    // All index triples: sum_{i,j,l} P_ij^2 P_jl^2 = sum_j ((P^2)_jj)^2.
    let triple: f64 = (0..n).map(|j| p2[(j, j)] * p2[(j, j)]).sum();
    if fourth > rank + rtol || triple > rank + rtol {
        return Err(format!("(vi) {fourth}, {triple} vs r = {rank}"));
    }
    Ok(())
}

/// Worst relative disagreement between the SVD routes and double loops over
/// the direct projection. The cross-term sum is compared relative to the sum
/// of its absolute terms, since it can cancel to zero. Quantities that are
/// negligible against their natural magnitude (`r`, `|e|^2`, `|e|^4`), which
/// happens when they vanish exactly, are compared on that magnitude instead.
pub fn oracle_disagreement(z: &DMatrix<f64>, e: &DVector<f64>, gamma: f64) -> f64 {
    let kern = rjar_core::RidgeKernel::new(z).unwrap();
    let p = oracle_projection(z, gamma);
    let e2 = e.norm_squared();
    let rel = |a: f64, b: f64, scale: f64, natural: f64| {
        let diff = (a - b).abs();
        if scale <= 1e-10 * natural {
            diff / natural
        } else {
            diff / scale
        }
    };
    let s = offdiag_sq(&p);
    let (q, qscale) = offdiag_quad(&p, e);
    let h = hadamard_quad(&p, e);
    [
        rel(kern.offdiag_sq_sum(gamma).unwrap(), s, s, kern.rank() as f64),
        rel(kern.quad_form_offdiag(gamma, e).unwrap(), q, qscale, e2),
        rel(kern.hadamard_sq_quad(gamma, e).unwrap(), h, h, e2 * e2),
    ]
    .into_iter()
    .fold(0.0, f64::max)
}
