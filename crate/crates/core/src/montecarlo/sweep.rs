use alloc::format;
use alloc::vec::Vec;

use super::config::SimConfig;
use super::dgp::SimDesign;
use crate::dataio::{partial_and_standardise, Dataset};
use crate::error::{Error, Result};
use crate::kernel::RidgeKernel;
use crate::penalty::{select_gamma, DEFAULT_GAMMA_FLOOR};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepParams {
    pub z_var: f64,
    pub z_rho: f64,
    pub gamma_floor: f64,
    pub seed: u64,
}

impl Default for SweepParams {
    fn default() -> Self {
        SweepParams { z_var: 0.3, z_rho: 0.5, gamma_floor: DEFAULT_GAMMA_FLOOR, seed: 0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub k: usize,
    pub rank: usize,
    pub gamma_star: f64,
    /// `S(gamma*) / r`.
    pub ratio: f64,
}

/// For each `n`, draw one standardised Gaussian instrument matrix with
/// `k = ceil(ratio * n)` columns and report the selected penalty and the
/// implied off-diagonal mass per unit of rank.
pub fn assumption_sweep(n_grid: &[usize], ratio: f64, params: SweepParams) -> Result<Vec<SweepRow>> {
    if !(ratio > 0.0 && ratio.is_finite()) {
        return Err(Error::Domain(format!("ratio must be > 0, got {ratio}")));
    }
    n_grid
        .iter()
        .map(|&n| {
            let k = (libm::ceil(ratio * n as f64) as usize).max(1);
            let cfg = SimConfig {
                n,
                k,
                design: super::Design::Dense,
                z_var: params.z_var,
                z_rho: params.z_rho,
                seed: params.seed,
                gamma_floor: params.gamma_floor,
                ..SimConfig::default()
            };
            let design = SimDesign::new(&cfg)?;
            // Each n uses its own stream so adding grid points leaves others unchanged.
            let mut rng = super::replication_rng(params.seed, n);
            let z = design.draw_instruments(&mut rng);
            let d = Dataset::new(nalgebra::DVector::zeros(n), nalgebra::DMatrix::zeros(n, 1), z, None)?;
            let pd = partial_and_standardise(&d)?;
            let kern = RidgeKernel::new(&pd.z)?;
            let sel = select_gamma(&kern, params.gamma_floor)?;
            Ok(SweepRow { n, k, rank: kern.rank(), gamma_star: sel.gamma_star, ratio: sel.implied_c })
        })
        .collect()
}
