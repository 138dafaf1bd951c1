//! Penalty choice: the largest maximiser of the off-diagonal mass
//! `S(gamma) = sum_{i != j} P_ij(gamma)^2` over the admissible penalties.
//!
//! `S` need not be unimodal, so a log-spaced global grid pass precedes a
//! golden-section refinement around the best grid point. Near-ties (within a
//! relative plateau tolerance) resolve to the largest penalty.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kernel::RidgeKernel;

/// Default admissible floor on the penalty when `rank(Z) < k`.
pub const DEFAULT_GAMMA_FLOOR: f64 = 1.0;
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Relative tolerance defining the set of (near-)maximisers.
pub const PLATEAU_TOL: f64 = 1e-10;
/// Relative bracket width at which golden-section refinement stops.
pub const REFINE_TOL: f64 = 1e-8;
/// `implied_c` below this flags the selection as questionable.
pub const QUESTIONABLE_C: f64 = 0.01;

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    pub grid_points: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { grid_points: DEFAULT_GRID_POINTS }
    }
}

#[derive(Debug, Clone)]
pub struct PenaltySelection {
    pub gamma_star: f64,
    pub s_at_star: f64,
    /// Lower end of the admissible set: 0 at full column rank, else the floor.
    pub lower_endpoint: f64,
    pub s_at_lower_endpoint: f64,
    /// `S(gamma*) / r`.
    pub implied_c: f64,
    pub rank: usize,
    /// `(gamma, S(gamma))` for the lower endpoint and every grid point.
    pub search_trace: Vec<(f64, f64)>,
    /// Spread of the penalties whose `S` is within the plateau tolerance.
    pub tie_set_width: f64,
}

impl PenaltySelection {
    pub fn questionable(&self) -> bool {
        self.implied_c < QUESTIONABLE_C
    }
}

pub fn select_gamma(kern: &RidgeKernel, gamma_floor: f64) -> Result<PenaltySelection> {
    select_gamma_with(kern, gamma_floor, SearchOptions::default())
}

pub fn select_gamma_with(
    kern: &RidgeKernel,
    gamma_floor: f64,
    opts: SearchOptions,
) -> Result<PenaltySelection> {
    if !(gamma_floor > 0.0 && gamma_floor.is_finite()) {
        return Err(Error::Domain(format!("penalty floor must be > 0, got {gamma_floor}")));
    }
    if opts.grid_points < 2 {
        return Err(Error::Domain(format!("need at least 2 grid points, got {}", opts.grid_points)));
    }
    let s = |g: f64| kern.offdiag_sq_sum(g);
    let d = kern.singular_values();
    let (d_max, d_min) = (d[0], d[d.len() - 1]);
    let lower = if kern.full_column_rank() { 0.0 } else { gamma_floor };

    let mut start = (gamma_floor * 1e-3).max(1e-6 * d_min * d_min);
    if !kern.full_column_rank() {
        start = start.max(gamma_floor);
    }
    let end = (1e6 * d_max * d_max).max(start * 1e3);
    let (ls, le) = (libm::log(start), libm::log(end));
    let steps = (opts.grid_points - 1) as f64;

    let mut trace = Vec::with_capacity(opts.grid_points + 1);
    trace.push((lower, s(lower)?));
    for i in 0..opts.grid_points {
        let g = libm::exp(ls + (le - ls) * i as f64 / steps);
        trace.push((g, s(g)?));
    }

    let r = kern.rank() as f64;
    if trace.iter().all(|&(_, v)| v < 1e-14 * r) {
        return Err(Error::DiagonalProjection);
    }

    // Last index attaining the grid maximum.
    let best = trace
        .iter()
        .enumerate()
        .fold(0, |b, (i, &(_, v))| if v >= trace[b].1 { i } else { b });
    let lo = trace[best.saturating_sub(1)].0;
    let hi = trace[(best + 1).min(trace.len() - 1)].0;

    let mut candidates: Vec<(f64, f64)> = trace.clone();
    if let Some(refined) = golden_max(&s, lo, hi, start)? {
        // A bracket that never left the lower endpoint is a boundary maximum.
        let collapsed = best == 0 && refined.2 == lower;
        if !collapsed {
            candidates.push((refined.0, refined.1));
        }
    }

    let s_max = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    let cut = s_max - PLATEAU_TOL * s_max.abs();
    let ties: Vec<(f64, f64)> = candidates.into_iter().filter(|c| c.1 >= cut).collect();
    let star = ties.iter().copied().fold(ties[0], |a, c| if c.0 > a.0 { c } else { a });
    let g_lo = ties.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);

    Ok(PenaltySelection {
        gamma_star: star.0,
        s_at_star: star.1,
        lower_endpoint: lower,
        s_at_lower_endpoint: trace[0].1,
        implied_c: star.1 / r,
        rank: kern.rank(),
        search_trace: trace,
        tie_set_width: star.0 - g_lo,
    })
}

/// Golden-section maximisation of `f` on `[a, b]`. Returns the best point,
/// its value, and the final left end of the bracket.
fn golden_max<F>(f: &F, mut a: f64, mut b: f64, scale: f64) -> Result<Option<(f64, f64, f64)>>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(b > a) {
        return Ok(None);
    }
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    let mut iters = 0;
    while b - a > REFINE_TOL * b.max(scale) && iters < 500 {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
        iters += 1;
    }
    let mid = 0.5 * (a + b);
    Ok(Some((mid, f(mid)?, a)))
}

/// Assumption checks reported alongside a penalty choice.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    pub n: usize,
    pub k: usize,
    pub rank: usize,
    pub rank_tol: f64,
    pub gamma_star: f64,
    pub s_at_star: f64,
    pub implied_c: f64,
    /// Largest leverage `max_i P_ii(gamma*)`.
    pub max_diag: f64,
    /// `(gamma, S(gamma) / r)` along the grid pass.
    pub ratio_trace: Vec<(f64, f64)>,
    pub questionable: bool,
}

pub fn assumption_diagnostics(kern: &RidgeKernel, sel: &PenaltySelection) -> Result<Diagnostics> {
    let r = kern.rank() as f64;
    let max_diag = kern
        .ridge_diag(sel.gamma_star)?
        .into_iter()
        .fold(0.0, f64::max);
    Ok(Diagnostics {
        n: kern.n(),
        k: kern.k(),
        rank: kern.rank(),
        rank_tol: kern.rank_tol(),
        gamma_star: sel.gamma_star,
        s_at_star: sel.s_at_star,
        implied_c: sel.implied_c,
        max_diag,
        ratio_trace: sel.search_trace.iter().map(|&(g, s)| (g, s / r)).collect(),
        questionable: sel.questionable(),
    })
}
