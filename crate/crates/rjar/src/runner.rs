//! Parallel drivers. Work items are independent and reductions are exact
//! integer sums (or sorted afterwards), so results do not depend on the
//! thread count or on scheduling.

use rayon::prelude::*;
use rjar_core::montecarlo::{assumption_sweep, Experiment, SimConfig, SimResult, SweepParams, SweepRow};
use rjar_core::{ConfidenceSet, Inverter, TestResult};

use crate::AppError;

/// A pool with `threads` workers; `None` uses every available core.
pub fn pool(threads: Option<usize>) -> Result<rayon::ThreadPool, AppError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(t) = threads {
        if t == 0 {
            return Err(AppError::Usage("--threads must be at least 1".into()));
        }
        b = b.num_threads(t);
    }
    Ok(b.build()?)
}

pub fn run_experiment(
    cfg: &SimConfig,
    beta0_grid: &[f64],
    pool: &rayon::ThreadPool,
) -> Result<SimResult, AppError> {
    let exp = Experiment::new(cfg, beta0_grid)?;
    let tally = pool.install(|| {
        (0..cfg.reps)
            .into_par_iter()
            .fold(
                || exp.tally(),
                |mut t, rep| {
                    t.absorb(&exp.replicate(rep));
                    t
                },
            )
            .reduce(
                || exp.tally(),
                |mut a, b| {
                    a.merge(b);
                    a
                },
            )
    });
    Ok(tally.finish(&exp))
}

/// Evaluate a prepared inverter over every grid point.
pub fn invert(inv: &Inverter<'_>, grid: &[Vec<f64>], pool: &rayon::ThreadPool) -> Result<ConfidenceSet, AppError> {
    let results: Vec<TestResult> =
        pool.install(|| grid.par_iter().map(|b| inv.evaluate(b)).collect::<Result<_, _>>())?;
    Ok(ConfidenceSet::from_results(inv.test(), inv.alpha(), grid.to_vec(), results))
}

/// Sweep rows in the order of `n_grid`; each `n` has its own random stream.
pub fn sweep(
    n_grid: &[usize],
    ratio: f64,
    params: SweepParams,
    pool: &rayon::ThreadPool,
) -> Result<Vec<SweepRow>, AppError> {
    let rows: Vec<Vec<SweepRow>> = pool.install(|| {
        n_grid.par_iter().map(|&n| assumption_sweep(&[n], ratio, params)).collect::<Result<_, _>>()
    })?;
    Ok(rows.into_iter().flatten().collect())
}
