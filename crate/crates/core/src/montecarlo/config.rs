use alloc::format;
use alloc::vec::Vec;

use crate::artests::{SupScoreScaling, TestKind, TestOptions, DEFAULT_C_BCCH};
use crate::error::{Error, Result};
use crate::penalty::DEFAULT_GAMMA_FLOOR;

/// First-stage signal pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Design {
    /// Five leading instruments carry the signal.
    Sparse,
    /// The leading `floor(0.4 k)` instruments carry the signal.
    Dense,
}

impl Design {
    pub fn name(self) -> &'static str {
        match self {
            Design::Sparse => "sparse",
            Design::Dense => "dense",
        }
    }
}

impl core::str::FromStr for Design {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sparse" => Ok(Design::Sparse),
            "dense" => Ok(Design::Dense),
            other => Err(Error::Domain(format!("unknown design '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub n: usize,
    pub k: usize,
    pub design: Design,
    /// Concentration parameter.
    pub mu2: f64,
    pub sigma_eps2: f64,
    pub sigma_v2: f64,
    /// Correlation between structural and first-stage errors.
    pub corr_ev: f64,
    pub z_var: f64,
    /// Toeplitz decay of instrument correlations.
    pub z_rho: f64,
    pub beta_true: f64,
    pub reps: usize,
    pub seed: u64,
    pub alpha_grid: Vec<f64>,
    pub tests: Vec<TestKind>,
    pub redraw_instruments: bool,
    pub gamma_floor: f64,
    pub c_bcch: f64,
    pub scaling: SupScoreScaling,
    /// Keep every per-replication statistic in the result.
    pub keep_traces: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 100,
            k: 30,
            design: Design::Sparse,
            mu2: 0.0,
            sigma_eps2: 2.0,
            sigma_v2: 1.0,
            corr_ev: 0.6,
            z_var: 0.3,
            z_rho: 0.5,
            beta_true: 1.0,
            reps: 10_000,
            seed: 0,
            alpha_grid: (1..=99).map(|i| i as f64 / 100.0).collect(),
            tests: TestKind::ALL.to_vec(),
            redraw_instruments: true,
            gamma_floor: DEFAULT_GAMMA_FLOOR,
            c_bcch: DEFAULT_C_BCCH,
            scaling: SupScoreScaling::ScaleConsistent,
            keep_traces: false,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: alloc::string::String| Err(Error::Config(msg));
        if self.n < 3 {
            return bad(format!("n must be >= 3, got {}", self.n));
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.design == Design::Sparse && self.k < 5 {
            return bad(format!("sparse design needs k >= 5, got {}", self.k));
        }
        if !(self.corr_ev.abs() < 1.0) {
            return bad(format!("|corr_ev| must be < 1, got {}", self.corr_ev));
        }
        if !(self.z_var > 0.0) || !(self.z_rho.abs() < 1.0) {
            return bad(format!("need z_var > 0 and |z_rho| < 1, got {} and {}", self.z_var, self.z_rho));
        }
        if !(self.sigma_eps2 > 0.0) || !(self.sigma_v2 > 0.0) {
            return bad("error variances must be positive".into());
        }
        if !(self.mu2 >= 0.0) || !self.mu2.is_finite() {
            return bad(format!("mu2 must be finite and >= 0, got {}", self.mu2));
        }
        if !self.beta_true.is_finite() {
            return bad("beta_true must be finite".into());
        }
        if self.reps == 0 {
            return bad("reps must be >= 1".into());
        }
        if self.alpha_grid.is_empty() || !self.alpha_grid.iter().all(|&a| a > 0.0 && a < 1.0) {
            return bad("alpha grid must be non-empty with entries in (0, 1)".into());
        }
        if self.tests.is_empty() {
            return bad("no tests requested".into());
        }
        if !(self.gamma_floor > 0.0) {
            return bad(format!("gamma_floor must be > 0, got {}", self.gamma_floor));
        }
        if !(self.c_bcch > 1.0) {
            return bad(format!("c_bcch must exceed 1, got {}", self.c_bcch));
        }
        Ok(())
    }

    /// Number of instruments carrying first-stage signal.
    pub fn signal_count(&self) -> usize {
        match self.design {
            Design::Sparse => 5.min(self.k),
            Design::Dense => (2 * self.k) / 5,
        }
    }

    /// True when `0.4 k` is not an integer and was rounded down.
    pub fn dense_count_rounded(&self) -> bool {
        self.design == Design::Dense && !(2 * self.k).is_multiple_of(5)
    }

    pub fn test_options(&self) -> TestOptions {
        TestOptions { c_bcch: self.c_bcch, scaling: self.scaling }
    }
}
