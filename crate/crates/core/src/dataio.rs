//! Data preparation: covariate partialling, instrument standardisation,
//! interaction expansion and structural residuals under the null.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Raw model inputs. `w` holds exogenous covariates (possibly an intercept).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub w: Option<DMatrix<f64>>,
}

impl Dataset {
    pub fn new(
        y: DVector<f64>,
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        w: Option<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = y.len();
        if n < 2 {
            return Err(Error::Dimension(format!("need at least 2 observations, got {n}")));
        }
        if x.ncols() == 0 || z.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "need g >= 1 and k >= 1, got g={} k={}",
                x.ncols(),
                z.ncols()
            )));
        }
        let rows_ok = x.nrows() == n && z.nrows() == n && w.as_ref().is_none_or(|w| w.nrows() == n);
        if !rows_ok {
            return Err(Error::Dimension(format!(
                "row counts differ: y={n} X={} Z={} W={}",
                x.nrows(),
                z.nrows(),
                w.as_ref().map_or(0, |w| w.nrows())
            )));
        }
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("y"));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("X"));
        }
        if !z.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("Z"));
        }
        if let Some(w) = &w {
            if !w.iter().all(|v| v.is_finite()) {
                return Err(Error::NonFinite("W"));
            }
        }
        // An empty covariate block is the same as none.
        let w = w.filter(|w| w.ncols() > 0);
        Ok(Dataset { y, x, z, w })
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn g(&self) -> usize {
        self.x.ncols()
    }

    pub fn k(&self) -> usize {
        self.z.ncols()
    }

    pub fn q(&self) -> usize {
        self.w.as_ref().map_or(0, |w| w.ncols())
    }
}

/// Covariate-residualised data with RMS-standardised instruments.
#[derive(Debug, Clone)]
pub struct PartialledData {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    /// Retained instruments; every column has mean square one.
    pub z: DMatrix<f64>,
    /// Divisor applied to each retained column.
    pub scales: Vec<f64>,
    /// Indices (into the original Z) of columns dropped as degenerate.
    pub dropped_cols: Vec<usize>,
    pub q: usize,
}

impl PartialledData {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn g(&self) -> usize {
        self.x.ncols()
    }

    pub fn k_eff(&self) -> usize {
        self.z.ncols()
    }
}

/// Relative RMS below which a residualised instrument counts as zero.
pub const DEGENERATE_COLUMN_TOL: f64 = 1e-12;

/// Saturation-style expansion: output column `j * q + m` is `Z[:, j] .* W[:, m]`.
pub fn interact_instruments(z: &DMatrix<f64>, w: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if z.nrows() != w.nrows() {
        return Err(Error::Dimension(format!(
            "Z has {} rows but W has {}",
            z.nrows(),
            w.nrows()
        )));
    }
    let (k, q) = (z.ncols(), w.ncols());
    let mut out = DMatrix::zeros(z.nrows(), k * q);
    for j in 0..k {
        for m in 0..q {
            out.column_mut(j * q + m)
                .copy_from(&z.column(j).component_mul(&w.column(m)));
        }
    }
    Ok(out)
}

/// Orthonormal basis of the column space of `w`, via a rank-revealing SVD.
fn column_basis(w: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let svd = w.clone().svd(true, false);
    let u = svd.u?;
    let s = &svd.singular_values;
    let smax = s.iter().cloned().fold(0.0, f64::max);
    let tol = f64::EPSILON * (w.nrows().max(w.ncols()) as f64) * smax;
    let keep: Vec<usize> = (0..s.len()).filter(|&l| s[l] > tol).collect();
    if keep.is_empty() {
        return None;
    }
    Some(u.select_columns(keep.iter()))
}

fn residualise(basis: &DMatrix<f64>, m: &DMatrix<f64>) -> DMatrix<f64> {
    m - basis * (basis.transpose() * m)
}

/// Partial out covariates, then scale every instrument to unit mean square.
///
/// Columns whose post-partialling RMS falls below
/// [`DEGENERATE_COLUMN_TOL`] times the largest raw column RMS are dropped.
pub fn partial_and_standardise(d: &Dataset) -> Result<PartialledData> {
    let n = d.n();
    let basis = d.w.as_ref().and_then(column_basis);
    let (y, x, z) = match &basis {
        Some(b) => {
            let y = residualise(b, &DMatrix::from_column_slice(n, 1, d.y.as_slice()));
            (DVector::from_column_slice(y.as_slice()), residualise(b, &d.x), residualise(b, &d.z))
        }
        None => (d.y.clone(), d.x.clone(), d.z.clone()),
    };

    let rms: Vec<f64> = z
        .column_iter()
        .map(|c| libm::sqrt(c.norm_squared() / n as f64))
        .collect();
    let max_rms = d
        .z
        .column_iter()
        .map(|c| libm::sqrt(c.norm_squared() / n as f64))
        .fold(0.0, f64::max);
    let mut keep = Vec::new();
    let mut dropped_cols = Vec::new();
    for (j, &s) in rms.iter().enumerate() {
        if max_rms > 0.0 && s >= DEGENERATE_COLUMN_TOL * max_rms {
            keep.push(j);
        } else {
            dropped_cols.push(j);
        }
    }
    if keep.is_empty() {
        return Err(Error::DegenerateInstruments);
    }
    let mut z = z.select_columns(keep.iter());
    let scales: Vec<f64> = keep.iter().map(|&j| rms[j]).collect();
    for (mut col, &s) in z.column_iter_mut().zip(&scales) {
        col /= s;
    }
    Ok(PartialledData { y, x, z, scales, dropped_cols, q: d.q() })
}

/// `e(beta0) = y - X beta0` on the partialled data.
pub fn structural_residuals(pd: &PartialledData, beta0: &[f64]) -> Result<DVector<f64>> {
    if beta0.len() != pd.g() {
        return Err(Error::Dimension(format!(
            "beta0 has length {} but there are {} endogenous regressors",
            beta0.len(),
            pd.g()
        )));
    }
    if !beta0.iter().all(|b| b.is_finite()) {
        return Err(Error::NonFinite("beta0"));
    }
    Ok(&pd.y - &pd.x * DVector::from_column_slice(beta0))
}
