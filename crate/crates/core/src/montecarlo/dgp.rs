use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::SimConfig;
use crate::error::{Error, Result};

/// Stream reserved for instruments shared across replications.
const FIXED_INSTRUMENT_STREAM: u64 = 0;

/// Counter-based generator for replication `rep`: stream `rep + 1` of the
/// ChaCha8 key derived from `seed`.
pub fn replication_rng(seed: u64, rep: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64 + 1);
    rng
}

/// `Sigma[l, m] = z_var * z_rho^|l - m|`.
pub fn toeplitz_cov(k: usize, z_var: f64, z_rho: f64) -> DMatrix<f64> {
    DMatrix::from_fn(k, k, |l, m| z_var * libm::pow(z_rho, l.abs_diff(m) as f64))
}

/// 0/1 signal pattern with `ones` leading ones.
pub fn kappa(k: usize, ones: usize) -> Vec<f64> {
    (0..k).map(|l| if l < ones { 1.0 } else { 0.0 }).collect()
}

/// Scale `rho` such that `pi = rho * kappa` has concentration `mu2`:
/// `mu2 = n pi' Sigma pi / sigma_v2`.
pub fn rho_from_mu2(mu2: f64, kappa: &[f64], sigma: &DMatrix<f64>, n: usize, sigma_v2: f64) -> Result<f64> {
    if kappa.len() != sigma.nrows() || sigma.nrows() != sigma.ncols() {
        return Err(Error::Dimension(format!(
            "kappa has length {} but Sigma is {}x{}",
            kappa.len(),
            sigma.nrows(),
            sigma.ncols()
        )));
    }
    if !(mu2 >= 0.0) {
        return Err(Error::Domain(format!("mu2 must be >= 0, got {mu2}")));
    }
    if mu2 == 0.0 {
        return Ok(0.0);
    }
    let kv = DVector::from_column_slice(kappa);
    let quad = (kv.transpose() * sigma * &kv)[(0, 0)];
    if !(quad > 0.0) {
        return Err(Error::DegenerateSignal);
    }
    Ok(libm::sqrt(sigma_v2 * mu2 / (n as f64 * quad)))
}

/// One simulated sample.
#[derive(Debug, Clone)]
pub struct Replication {
    pub y: DVector<f64>,
    pub x: DMatrix<f64>,
    pub z: DMatrix<f64>,
}

/// Everything about the DGP that does not change between replications.
#[derive(Debug, Clone)]
pub struct SimDesign {
    n: usize,
    k: usize,
    z_sd: f64,
    z_rho: f64,
    innov_sd: f64,
    sigma_eps: f64,
    sigma_v: f64,
    corr_ev: f64,
    beta: f64,
    seed: u64,
    pi: DVector<f64>,
    rho: f64,
    fixed_z: Option<DMatrix<f64>>,
}

impl SimDesign {
    pub fn new(cfg: &SimConfig) -> Result<Self> {
        cfg.validate()?;
        let sigma = toeplitz_cov(cfg.k, cfg.z_var, cfg.z_rho);
        let kap = kappa(cfg.k, cfg.signal_count());
        let rho = rho_from_mu2(cfg.mu2, &kap, &sigma, cfg.n, cfg.sigma_v2)?;
        let mut design = SimDesign {
            n: cfg.n,
            k: cfg.k,
            z_sd: libm::sqrt(cfg.z_var),
            z_rho: cfg.z_rho,
            innov_sd: libm::sqrt(cfg.z_var * (1.0 - cfg.z_rho * cfg.z_rho)),
            sigma_eps: libm::sqrt(cfg.sigma_eps2),
            sigma_v: libm::sqrt(cfg.sigma_v2),
            corr_ev: cfg.corr_ev,
            beta: cfg.beta_true,
            seed: cfg.seed,
            pi: DVector::from_vec(kap) * rho,
            rho,
            fixed_z: None,
        };
        if !cfg.redraw_instruments {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(FIXED_INSTRUMENT_STREAM);
            design.fixed_z = Some(design.draw_instruments(&mut rng));
        }
        Ok(design)
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn pi(&self) -> &DVector<f64> {
        &self.pi
    }

    /// Rows are i.i.d. `N(0, Sigma)` with Toeplitz `Sigma`, generated by the
    /// stationary AR(1) recursion across columns (its exact Cholesky factor).
    pub fn draw_instruments<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> DMatrix<f64> {
        let mut z = DMatrix::zeros(self.n, self.k);
        for i in 0..self.n {
            let g: f64 = StandardNormal.sample(rng);
            let mut prev = self.z_sd * g;
            z[(i, 0)] = prev;
            for l in 1..self.k {
                let g: f64 = StandardNormal.sample(rng);
                prev = self.z_rho * prev + self.innov_sd * g;
                z[(i, l)] = prev;
            }
        }
        z
    }

    pub fn draw(&self, rep: usize) -> Replication {
        let mut rng = replication_rng(self.seed, rep);
        let z = match &self.fixed_z {
            Some(z) => z.clone(),
            None => self.draw_instruments(&mut rng),
        };
        let tail = libm::sqrt(1.0 - self.corr_ev * self.corr_ev);
        let signal = &z * &self.pi;
        let mut x = DMatrix::zeros(self.n, 1);
        let mut y = DVector::zeros(self.n);
        for i in 0..self.n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            let v = self.sigma_v * a;
            let eps = self.sigma_eps * (self.corr_ev * a + tail * b);
            x[(i, 0)] = signal[i] + v;
            y[i] = x[(i, 0)] * self.beta + eps;
        }
        Replication { y, x, z }
    }
}

/// Draw replication `rep` of the experiment described by `cfg`.
pub fn draw_replication(cfg: &SimConfig, rep: usize) -> Result<Replication> {
    Ok(SimDesign::new(cfg)?.draw(rep))
}
