//! The ridge-regularised jackknifed AR test and its three rivals: the
//! jackknifed AR tests with the CMS-style `C` matrix and with the MS-style
//! variance estimator, and the sup-score test.
//!
//! Every test exposes `statistic(e)` (independent of the level) and
//! `critical_value(alpha)`, so one residual vector can be judged at many
//! levels without recomputing the quadratic forms.

use alloc::format;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kernel::{hadamard_sq_dense, offdiag_quad_dense, RidgeKernel, RidgeProjection};
use crate::normal;
use crate::penalty::PenaltySelection;

/// Default sup-score constant.
pub const DEFAULT_C_BCCH: f64 = 1.1;

/// Leverage above which `(I - D)^-1` is treated as singular.
pub const MAX_LEVERAGE: f64 = 1.0 - 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TestKind {
    Rjar,
    Cms,
    Ms,
    SupScore,
}

impl TestKind {
    pub const ALL: [TestKind; 4] = [TestKind::Rjar, TestKind::Cms, TestKind::Ms, TestKind::SupScore];

    pub fn name(self) -> &'static str {
        match self {
            TestKind::Rjar => "RJAR",
            TestKind::Cms => "CMS",
            TestKind::Ms => "MS",
            TestKind::SupScore => "SUPSCORE",
        }
    }
}

impl fmt::Display for TestKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for TestKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rjar" => Ok(TestKind::Rjar),
            "cms" => Ok(TestKind::Cms),
            "ms" => Ok(TestKind::Ms),
            "supscore" | "sup_score" | "sup-score" | "bcch" => Ok(TestKind::SupScore),
            other => Err(Error::Domain(format!("unknown test '{other}'"))),
        }
    }
}

/// Convention for the sup-score critical value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SupScoreScaling {
    /// `c * sqrt(n) * Q(1 - alpha / 2k)`, literally as usually printed.
    AsWritten,
    /// `c * Q(1 - alpha / 2k)`, on the same scale as the statistic.
    #[default]
    ScaleConsistent,
}

impl FromStr for SupScoreScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "as_written" => Ok(SupScoreScaling::AsWritten),
            "scale_consistent" => Ok(SupScoreScaling::ScaleConsistent),
            other => Err(Error::Domain(format!("unknown sup-score scaling '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TestFlags {
    /// The variance estimate was not positive; the decision is forced to
    /// non-rejection.
    pub negative_variance_no_reject: bool,
    /// Off-diagonal mass per unit of rank fell below 0.01 at the chosen
    /// penalty. Informational only.
    pub mass_questionable: bool,
}

/// A statistic before it is compared to a critical value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Statistic {
    pub test: TestKind,
    /// `NaN` when the variance estimate was not positive.
    pub value: f64,
    pub variance_estimate: Option<f64>,
    pub gamma_used: Option<f64>,
    pub flags: TestFlags,
}

impl Statistic {
    pub fn rejects(&self, critical_value: f64) -> bool {
        !self.flags.negative_variance_no_reject && self.value > critical_value
    }

    pub fn decide(&self, alpha: f64, critical_value: f64) -> TestResult {
        TestResult {
            test: self.test,
            statistic: self.value,
            critical_value,
            alpha,
            reject: self.rejects(critical_value),
            variance_estimate: self.variance_estimate,
            gamma_used: self.gamma_used,
            flags: self.flags,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestResult {
    pub test: TestKind,
    pub statistic: f64,
    pub critical_value: f64,
    pub alpha: f64,
    pub reject: bool,
    pub variance_estimate: Option<f64>,
    pub gamma_used: Option<f64>,
    pub flags: TestFlags,
}

pub(crate) fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

fn check_len(n: usize, e: &DVector<f64>) -> Result<()> {
    if e.len() != n {
        return Err(Error::Dimension(format!("residual vector has length {} but n = {n}", e.len())));
    }
    Ok(())
}

/// One-sided normal critical value shared by the three quadratic-form tests.
pub fn normal_critical_value(alpha: f64) -> Result<f64> {
    check_alpha(alpha)?;
    Ok(normal::upper_critical(alpha))
}

/// Jackknifed quadratic form over the ridge projection at `gamma*`.
///
/// Uses the materialised projection when the kernel allows it, otherwise the
/// kernel's streaming routes.
#[derive(Debug, Clone)]
pub struct RjarTest<'k> {
    kern: &'k RidgeKernel,
    proj: Option<RidgeProjection>,
    gamma: f64,
    questionable: bool,
}

impl<'k> RjarTest<'k> {
    pub fn new(kern: &'k RidgeKernel, sel: &PenaltySelection) -> Result<Self> {
        if !(sel.s_at_star > 0.0) {
            return Err(Error::DiagonalProjection);
        }
        let proj = if kern.n() <= kern.materialize_threshold() {
            Some(kern.projection(sel.gamma_star)?)
        } else {
            None
        };
        Ok(RjarTest { kern, proj, gamma: sel.gamma_star, questionable: sel.questionable() })
    }

    pub fn statistic(&self, e: &DVector<f64>) -> Result<Statistic> {
        check_len(self.kern.n(), e)?;
        let (num, had) = match &self.proj {
            Some(p) => (p.quad_form_offdiag(e), p.hadamard_sq_quad(e)),
            None => (
                self.kern.quad_form_offdiag(self.gamma, e)?,
                self.kern.hadamard_sq_quad(self.gamma, e)?,
            ),
        };
        rjar_statistic(num, had, self.kern.rank(), self.gamma, self.questionable)
    }

    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        normal_critical_value(alpha)
    }

    pub fn test(&self, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
        let cv = self.critical_value(alpha)?;
        Ok(self.statistic(e)?.decide(alpha, cv))
    }
}

fn rjar_statistic(num: f64, had: f64, rank: usize, gamma: f64, questionable: bool) -> Result<Statistic> {
    let r = rank as f64;
    let variance = 2.0 / r * had;
    if !(variance > 0.0) {
        return Err(Error::DegenerateVariance(variance));
    }
    Ok(Statistic {
        test: TestKind::Rjar,
        value: num / (libm::sqrt(r) * libm::sqrt(variance)),
        variance_estimate: Some(variance),
        gamma_used: Some(gamma),
        flags: TestFlags { negative_variance_no_reject: false, mass_questionable: questionable },
    })
}

/// RJAR test at the selected penalty, through the SVD routes only.
pub fn rjar(kern: &RidgeKernel, sel: &PenaltySelection, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
    check_alpha(alpha)?;
    if !(sel.s_at_star > 0.0) {
        return Err(Error::DiagonalProjection);
    }
    let num = kern.quad_form_offdiag(sel.gamma_star, e)?;
    let had = kern.hadamard_sq_quad(sel.gamma_star, e)?;
    let stat = rjar_statistic(num, had, kern.rank(), sel.gamma_star, sel.questionable())?;
    Ok(stat.decide(alpha, normal::upper_critical(alpha)))
}

/// The unregularised projection `Z (Z'Z)^-1 Z'`, available only when
/// `rank(Z) = k < n`.
#[derive(Debug, Clone)]
pub struct UnregularisedProjection {
    p: DMatrix<f64>,
    k: usize,
}

impl UnregularisedProjection {
    pub fn from_kernel(kern: &RidgeKernel, test: TestKind) -> Result<Self> {
        if !kern.full_column_rank() || kern.k() >= kern.n() {
            return Err(not_applicable(test, kern.rank(), kern.k(), kern.n()));
        }
        Ok(UnregularisedProjection { p: kern.materialize(0.0, false)?, k: kern.k() })
    }

    /// Wrap a dense projection of `k` instruments. The rank is read off the trace.
    pub fn from_matrix(p: DMatrix<f64>, k: usize, test: TestKind) -> Result<Self> {
        let n = p.nrows();
        if p.ncols() != n {
            return Err(Error::Dimension(format!("projection is {}x{}", n, p.ncols())));
        }
        let rank = libm::round(p.trace()) as usize;
        if rank != k || k >= n {
            return Err(not_applicable(test, rank, k, n));
        }
        Ok(UnregularisedProjection { p, k })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn k(&self) -> usize {
        self.k
    }
}

fn not_applicable(test: TestKind, r: usize, k: usize, n: usize) -> Error {
    Error::NotApplicable {
        test: test.name(),
        reason: format!("requires rank(Z) = k < n, got r={r} k={k} n={n}"),
    }
}

/// Jackknifed AR with the bias-corrected weight matrix `C = A - B`.
#[derive(Debug, Clone)]
pub struct CmsTest {
    c: DMatrix<f64>,
    k: usize,
}

impl CmsTest {
    pub fn new(proj: &UnregularisedProjection) -> Result<Self> {
        let p = &proj.p;
        let n = p.nrows();
        let max_leverage = p.diagonal().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max_leverage >= MAX_LEVERAGE {
            return Err(Error::BalancedDesign(format!("max_i P_ii = {max_leverage}")));
        }
        let h: DVector<f64> = p.diagonal().map(|d| d / (1.0 - d));
        let mut ph = p.clone();
        for (mut c, &hj) in ph.column_iter_mut().zip(h.iter()) {
            c *= hj;
        }
        // Delta = P H P - (P H + H P) / 2
        let mut c = &ph * p;
        c -= (&ph + ph.transpose()) * 0.5;
        c += p;
        let m = DMatrix::<f64>::identity(n, n) - p;
        let mut mh = m.clone();
        for (mut col, &hj) in mh.column_iter_mut().zip(h.iter()) {
            col *= hj;
        }
        c -= &mh * &m;
        for i in 0..n {
            for j in 0..i {
                let v = 0.5 * (c[(i, j)] + c[(j, i)]);
                c[(i, j)] = v;
                c[(j, i)] = v;
            }
        }
        Ok(CmsTest { c, k: proj.k })
    }

    pub fn from_kernel(kern: &RidgeKernel) -> Result<Self> {
        Self::new(&UnregularisedProjection::from_kernel(kern, TestKind::Cms)?)
    }

    pub fn weight_matrix(&self) -> &DMatrix<f64> {
        &self.c
    }

    pub fn statistic(&self, e: &DVector<f64>) -> Result<Statistic> {
        check_len(self.c.nrows(), e)?;
        let k = self.k as f64;
        let num = offdiag_quad_dense(&self.c, e);
        let variance = 2.0 / k * hadamard_sq_dense(&self.c, e);
        if !(variance > 0.0) {
            return Err(Error::DegenerateVariance(variance));
        }
        Ok(Statistic {
            test: TestKind::Cms,
            value: num / (libm::sqrt(k) * libm::sqrt(variance)),
            variance_estimate: Some(variance),
            gamma_used: Some(0.0),
            flags: TestFlags::default(),
        })
    }

    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        normal_critical_value(alpha)
    }

    pub fn test(&self, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
        let cv = self.critical_value(alpha)?;
        Ok(self.statistic(e)?.decide(alpha, cv))
    }
}

pub fn cms_ar(proj: &UnregularisedProjection, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
    CmsTest::new(proj)?.test(e, alpha)
}

/// Jackknifed AR over the unregularised projection with the
/// residual-maker-based variance estimator.
#[derive(Debug, Clone)]
pub struct MsTest {
    p: DMatrix<f64>,
    m: DMatrix<f64>,
    /// `P_ij^2 / (M_ii M_jj + M_ij^2)` off the diagonal, zero on it.
    w: DMatrix<f64>,
    k: usize,
}

impl MsTest {
    pub fn new(proj: &UnregularisedProjection) -> Result<Self> {
        let p = proj.p.clone();
        let n = p.nrows();
        let m = DMatrix::<f64>::identity(n, n) - &p;
        let mut w = DMatrix::zeros(n, n);
        for j in 0..n {
            for i in 0..n {
                if i == j {
                    continue;
                }
                let num = p[(i, j)] * p[(i, j)];
                if num == 0.0 {
                    continue;
                }
                let den = m[(i, i)] * m[(j, j)] + m[(i, j)] * m[(i, j)];
                if !(den > 0.0) {
                    return Err(Error::BalancedDesign(format!(
                        "M_ii M_jj + M_ij^2 = {den} at ({i}, {j})"
                    )));
                }
                w[(i, j)] = num / den;
            }
        }
        Ok(MsTest { p, m, w, k: proj.k })
    }

    pub fn from_kernel(kern: &RidgeKernel) -> Result<Self> {
        Self::new(&UnregularisedProjection::from_kernel(kern, TestKind::Ms)?)
    }

    /// Variance estimate; may be negative.
    pub fn variance(&self, e: &DVector<f64>) -> f64 {
        let me = &self.m * e;
        let f = e.component_mul(&me);
        2.0 / self.k as f64 * (f.transpose() * &self.w * &f)[(0, 0)]
    }

    pub fn statistic(&self, e: &DVector<f64>) -> Result<Statistic> {
        check_len(self.p.nrows(), e)?;
        let k = self.k as f64;
        let num = offdiag_quad_dense(&self.p, e);
        let variance = self.variance(e);
        let negative = !(variance > 0.0);
        let value = if negative { f64::NAN } else { num / (libm::sqrt(k) * libm::sqrt(variance)) };
        Ok(Statistic {
            test: TestKind::Ms,
            value,
            variance_estimate: Some(variance),
            gamma_used: Some(0.0),
            flags: TestFlags { negative_variance_no_reject: negative, mass_questionable: false },
        })
    }

    /// Numerator `sum_{i != j} P_ij e_i e_j`.
    pub fn numerator(&self, e: &DVector<f64>) -> f64 {
        offdiag_quad_dense(&self.p, e)
    }

    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        normal_critical_value(alpha)
    }

    pub fn test(&self, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
        let cv = self.critical_value(alpha)?;
        Ok(self.statistic(e)?.decide(alpha, cv))
    }
}

pub fn ms_ar(proj: &UnregularisedProjection, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
    MsTest::new(proj)?.test(e, alpha)
}

/// Self-normalised maximum score over standardised instruments.
#[derive(Debug, Clone)]
pub struct SupScoreTest<'z> {
    z: &'z DMatrix<f64>,
    c_bcch: f64,
    scaling: SupScoreScaling,
}

impl<'z> SupScoreTest<'z> {
    pub fn new(z_std: &'z DMatrix<f64>, c_bcch: f64, scaling: SupScoreScaling) -> Result<Self> {
        if !(c_bcch > 1.0 && c_bcch.is_finite()) {
            return Err(Error::Domain(format!("sup-score constant must exceed 1, got {c_bcch}")));
        }
        let n = z_std.nrows() as f64;
        for (j, c) in z_std.column_iter().enumerate() {
            let ms = c.norm_squared() / n;
            if (ms - 1.0).abs() > 1e-8 {
                return Err(Error::Domain(format!(
                    "instrument column {j} is not standardised (mean square {ms})"
                )));
            }
        }
        Ok(SupScoreTest { z: z_std, c_bcch, scaling })
    }

    pub fn statistic(&self, e: &DVector<f64>) -> Result<Statistic> {
        check_len(self.z.nrows(), e)?;
        let n = self.z.nrows() as f64;
        let mut best = 0.0f64;
        for (j, c) in self.z.column_iter().enumerate() {
            let (mut score, mut energy) = (0.0, 0.0);
            for (zi, ei) in c.iter().zip(e.iter()) {
                score += ei * zi;
                energy += ei * ei * zi * zi;
            }
            if !(energy > 0.0) {
                return Err(Error::DegenerateColumn(j));
            }
            let t = (score / libm::sqrt(n)).abs() / libm::sqrt(energy / n);
            best = best.max(t);
        }
        Ok(Statistic {
            test: TestKind::SupScore,
            value: best,
            variance_estimate: None,
            gamma_used: None,
            flags: TestFlags::default(),
        })
    }

    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        check_alpha(alpha)?;
        let k = self.z.ncols() as f64;
        let base = self.c_bcch * normal::quantile(1.0 - alpha / (2.0 * k));
        Ok(match self.scaling {
            SupScoreScaling::AsWritten => base * libm::sqrt(self.z.nrows() as f64),
            SupScoreScaling::ScaleConsistent => base,
        })
    }

    pub fn test(&self, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
        let cv = self.critical_value(alpha)?;
        Ok(self.statistic(e)?.decide(alpha, cv))
    }
}

pub fn sup_score(
    z_std: &DMatrix<f64>,
    e: &DVector<f64>,
    alpha: f64,
    c_bcch: f64,
    scaling: SupScoreScaling,
) -> Result<TestResult> {
    SupScoreTest::new(z_std, c_bcch, scaling)?.test(e, alpha)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TestOptions {
    pub c_bcch: f64,
    pub scaling: SupScoreScaling,
}

impl Default for TestOptions {
    fn default() -> Self {
        TestOptions { c_bcch: DEFAULT_C_BCCH, scaling: SupScoreScaling::default() }
    }
}

/// Any of the four tests with its `beta0`-independent state precomputed.
#[derive(Debug, Clone)]
pub enum PreparedTest<'a> {
    Rjar(RjarTest<'a>),
    Cms(CmsTest),
    Ms(MsTest),
    SupScore(SupScoreTest<'a>),
}

impl<'a> PreparedTest<'a> {
    pub fn new(
        kind: TestKind,
        z_std: &'a DMatrix<f64>,
        kern: &'a RidgeKernel,
        sel: &PenaltySelection,
        opts: TestOptions,
    ) -> Result<Self> {
        Ok(match kind {
            TestKind::Rjar => PreparedTest::Rjar(RjarTest::new(kern, sel)?),
            TestKind::Cms => PreparedTest::Cms(CmsTest::from_kernel(kern)?),
            TestKind::Ms => PreparedTest::Ms(MsTest::from_kernel(kern)?),
            TestKind::SupScore => PreparedTest::SupScore(SupScoreTest::new(z_std, opts.c_bcch, opts.scaling)?),
        })
    }

    pub fn kind(&self) -> TestKind {
        match self {
            PreparedTest::Rjar(_) => TestKind::Rjar,
            PreparedTest::Cms(_) => TestKind::Cms,
            PreparedTest::Ms(_) => TestKind::Ms,
            PreparedTest::SupScore(_) => TestKind::SupScore,
        }
    }

    pub fn statistic(&self, e: &DVector<f64>) -> Result<Statistic> {
        match self {
            PreparedTest::Rjar(t) => t.statistic(e),
            PreparedTest::Cms(t) => t.statistic(e),
            PreparedTest::Ms(t) => t.statistic(e),
            PreparedTest::SupScore(t) => t.statistic(e),
        }
    }

    pub fn critical_value(&self, alpha: f64) -> Result<f64> {
        match self {
            PreparedTest::SupScore(t) => t.critical_value(alpha),
            _ => normal_critical_value(alpha),
        }
    }

    pub fn test(&self, e: &DVector<f64>, alpha: f64) -> Result<TestResult> {
        let cv = self.critical_value(alpha)?;
        Ok(self.statistic(e)?.decide(alpha, cv))
    }
}
