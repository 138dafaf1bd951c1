//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits non-zero if any failed.

mod common;

use std::panic::{self, AssertUnwindSafe};
use std::thread;
use std::time::Instant;

use common::*;
use rand::Rng;
use rjar_core::montecarlo::{
    assumption_sweep, replication_rng, Design, Experiment, SimConfig, SimDesign, SimResult, SweepParams,
};
use rjar_core::{partial_and_standardise, select_gamma, Dataset, PreparedTest, RidgeKernel, TestKind, TestOptions};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn main() {
    let criteria: [Criterion; 10] = [
        ("oracle equivalence", oracle_equivalence),
        ("projection-matrix properties", projection_properties),
        ("balanced-design mass bound", balanced_mass_bound),
        ("penalty reproduction", penalty_reproduction),
        ("mass ratio along n", mass_ratio_sweep),
        ("RJAR size", rjar_size),
        ("MS oversize", ms_oversize),
        ("sup-score undersize", sup_score_undersize),
        ("power ordering", power_ordering),
        ("scale and sign invariance", invariance),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS [{:>2}] {name}: {detail} ({secs:.1}s)", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL [{:>2}] {name}: {detail} ({secs:.1}s)", i + 1);
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn oracle_equivalence() -> Outcome {
    let mut r = rng(101);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let n = r.random_range(3..=64);
        let k = r.random_range(1..=128);
        let z = gaussian_matrix(&mut r, n, k);
        let e = gaussian_vector(&mut r, n);
        let full = RidgeKernel::new(&z).unwrap().full_column_rank() && k <= n;
        let mut gammas = checked_penalties(full);
        gammas.push(r.random_range(-3.0f64..5.0).exp());
        for g in gammas {
            worst = worst.max(oracle_disagreement(&z, &e, g));
        }
    }
    check(worst < 1e-8, format!("200 instances, worst relative error {worst:.2e} (limit 1e-8)"))
}

fn projection_properties() -> Outcome {
    let mut r = rng(102);
    let mut wide = 0;
    for _ in 0..100 {
        let n = r.random_range(2..=80);
        let k = if r.random_bool(0.5) { r.random_range(1..=n) } else { r.random_range(n + 1..=2 * n + 40) };
        wide += (k > n) as usize;
        let kern = RidgeKernel::new(&gaussian_matrix(&mut r, n, k)).unwrap();
        let mut gammas = checked_penalties(kern.full_column_rank());
        gammas.push(if kern.full_column_rank() { 0.0 } else { 1.0 } + r.random_range(0.0..50.0));
        for g in gammas {
            check_projection_properties(&kern, g, 1e-9).map_err(|m| format!("n={n} k={k} gamma={g}: {m}"))?;
        }
    }
    Ok(format!("items (i)-(vi) hold on 100 instances ({wide} with k > n), tol 1e-9"))
}

fn balanced_mass_bound() -> Outcome {
    let mut r = rng(103);
    let mut min_slack = f64::INFINITY;
    for _ in 0..50 {
        let n = r.random_range(20..=120);
        let k = r.random_range(2..n);
        let kern = RidgeKernel::new(&gaussian_matrix(&mut r, n, k)).unwrap();
        let p0 = kern.materialize(0.0, false).unwrap();
        let delta = 1.0 - (0..n).map(|i| p0[(i, i)]).fold(0.0, f64::max);
        let lhs = offdiag_sq(&p0) / k as f64;
        min_slack = min_slack.min(lhs - delta);
        let sel = select_gamma(&kern, 1.0).unwrap();
        if lhs < delta - 1e-9 {
            return Err(format!("n={n} k={k}: S(0)/k = {lhs} < 1 - max P_ii = {delta}"));
        }
        if sel.s_at_star < kern.offdiag_sq_sum(0.0).unwrap() {
            return Err(format!("n={n} k={k}: S(gamma*) < S(0)"));
        }
    }
    Ok(format!("50 designs with r = k < n, smallest slack {min_slack:.3e}, S(gamma*) >= S(0) throughout"))
}

fn standardised_draw(design: &SimDesign, seed: u64, i: usize) -> RidgeKernel {
    let z = design.draw_instruments(&mut replication_rng(seed, i));
    let rows = z.nrows();
    let d = Dataset::new(nalgebra::DVector::zeros(rows), nalgebra::DMatrix::zeros(rows, 1), z, None).unwrap();
    RidgeKernel::new(&partial_and_standardise(&d).unwrap().z).unwrap()
}

fn penalty_reproduction() -> Outcome {
    let mut parts = Vec::new();
    let mut ok = true;
    for (k, target) in [(90usize, 12.048), (190, 109.187)] {
        let design = SimDesign::new(&SimConfig { k, ..SimConfig::default() }).unwrap();
        let mut gammas = Vec::new();
        let mut above = 0;
        for i in 0..200 {
            let kern = standardised_draw(&design, 404, i);
            let sel = select_gamma(&kern, 1.0).unwrap();
            gammas.push(sel.gamma_star);
            above += (sel.s_at_star > kern.offdiag_sq_sum(0.0).unwrap_or(f64::INFINITY)) as usize;
        }
        gammas.sort_by(f64::total_cmp);
        let median = 0.5 * (gammas[99] + gammas[100]);
        let within = (median / target - 1.0).abs() <= 0.25;
        ok &= within;
        let mut part = format!("k={k}: median gamma* {median:.3} vs {target} ({:+.1}%)", 100.0 * (median / target - 1.0));
        if k == 90 {
            ok &= above >= 190;
            part.push_str(&format!(", S(gamma*) > S(0) in {above}/200"));
        }
        parts.push(part);
    }
    check(ok, parts.join("; "))
}

fn mass_ratio_sweep() -> Outcome {
    let rows = assumption_sweep(&[250, 500, 1000, 2000], 1.9, SweepParams::default()).map_err(|e| e.to_string())?;
    let mut ratios: Vec<f64> = rows.iter().map(|r| r.ratio).collect();
    let increasing = rows.windows(2).all(|w| w[1].gamma_star > w[0].gamma_star);
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[1] + ratios[2]);
    let spread = (ratios[3] - ratios[0]) / median;
    let table: Vec<String> =
        rows.iter().map(|r| format!("n={} gamma*={:.1} ratio={:.4}", r.n, r.gamma_star, r.ratio)).collect();
    check(
        spread < 0.15 && increasing,
        format!("{}; spread {:.1}% (limit 15%), gamma* increasing: {increasing}", table.join(", "), 100.0 * spread),
    )
}

/// Runs replications on every available core; the merged tally is
/// independent of how they were split.
fn run_parallel(cfg: &SimConfig, grid: &[f64]) -> SimResult {
    let exp = Experiment::new(cfg, grid).unwrap();
    let threads = thread::available_parallelism().map_or(1, |t| t.get());
    let exp_ref = &exp;
    let tallies: Vec<_> = thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|t| {
                s.spawn(move || {
                    let mut tally = exp_ref.tally();
                    for rep in (t..cfg.reps).step_by(threads) {
                        tally.absorb(&exp_ref.replicate(rep));
                    }
                    tally
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut total = exp.tally();
    for t in tallies {
        total.merge(t);
    }
    total.finish(&exp)
}

/// The size experiments share one set of runs across criteria 6 to 8.
fn size_runs() -> &'static Vec<(usize, f64, SimResult)> {
    static RUNS: std::sync::OnceLock<Vec<(usize, f64, SimResult)>> = std::sync::OnceLock::new();
    RUNS.get_or_init(|| {
        let mut out = Vec::new();
        for k in [30, 90, 190] {
            for mu2 in [0.0, 180.0] {
                let cfg = SimConfig { k, mu2, reps: 10_000, seed: 2024, ..SimConfig::default() };
                out.push((k, mu2, run_parallel(&cfg, &[cfg.beta_true])));
            }
        }
        out
    })
}

fn alpha_index(res: &SimResult, alpha: f64) -> usize {
    res.config.alpha_grid.iter().position(|&a| (a - alpha).abs() < 1e-12).unwrap()
}

fn rjar_size() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, mu2, res) in size_runs() {
        let at05 = res.frequency(TestKind::Rjar, 0, alpha_index(res, 0.05)).unwrap();
        let pp = res
            .config
            .alpha_grid
            .iter()
            .enumerate()
            .filter(|(_, &a)| a <= 0.2 + 1e-12)
            .map(|(i, &a)| (res.frequency(TestKind::Rjar, 0, i).unwrap() - a).abs())
            .fold(0.0, f64::max);
        ok &= (0.035..=0.065).contains(&at05) && pp < 0.03;
        parts.push(format!("k={k} mu2={mu2}: {at05:.4} (pp dev {pp:.4})"));
    }
    check(ok, format!("{} [band 0.035-0.065, pp < 0.03]", parts.join("; ")))
}

fn ms_oversize() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, mu2, res) in size_runs().iter().filter(|r| r.0 == 90) {
        let f = res.frequency(TestKind::Ms, 0, alpha_index(res, 0.05)).unwrap();
        let neg = res.ms_negative_variance().map_or(0, |v| v[0]);
        ok &= (0.16..=0.22).contains(&f);
        parts.push(format!("k={k} mu2={mu2}: {f:.4} ({neg} negative-variance draws)"));
    }
    check(ok, format!("{} [band 0.16-0.22]", parts.join("; ")))
}

fn sup_score_undersize() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, mu2, res) in size_runs() {
        let f = res.frequency(TestKind::SupScore, 0, alpha_index(res, 0.05)).unwrap();
        ok &= f < 0.05;
        parts.push(format!("k={k} mu2={mu2}: {f:.4}"));
    }
    check(ok, format!("{} [must be < 0.05]", parts.join("; ")))
}

fn power_ordering() -> Outcome {
    let grid: Vec<f64> = (0..=20).filter(|&i| i != 10).map(|i| i as f64 / 10.0).collect();
    let cfg = SimConfig {
        k: 190,
        mu2: 180.0,
        design: Design::Dense,
        reps: 2000,
        seed: 77,
        alpha_grid: vec![0.05],
        tests: vec![TestKind::Rjar, TestKind::SupScore],
        ..SimConfig::default()
    };
    let res = run_parallel(&cfg, &grid);
    let mut compared = 0;
    let mut violations = Vec::new();
    let mut cells = Vec::new();
    for (b, &beta0) in grid.iter().enumerate() {
        let rj = res.frequency(TestKind::Rjar, b, 0).unwrap();
        let sup = res.frequency(TestKind::SupScore, b, 0).unwrap();
        cells.push(format!("{beta0}:{rj:.3}/{sup:.3}"));
        if rj > 0.2 || sup > 0.2 {
            compared += 1;
            if rj <= sup {
                violations.push(beta0);
            }
        }
    }
    check(
        violations.is_empty() && compared > 0,
        format!(
            "{compared} grid points compared, violations at {violations:?}; beta0:RJAR/SUP {}",
            cells.join(" ")
        ),
    )
}

fn invariance() -> Outcome {
    let mut r = rng(110);
    let mut worst: f64 = 0.0;
    let mut evaluated = 0;
    for i in 0..100 {
        let n = r.random_range(15..=60);
        let k = if i % 2 == 0 { r.random_range(2..n / 2) } else { r.random_range(n + 1..2 * n) };
        let z = standardise(&gaussian_matrix(&mut r, n, k));
        let kern = RidgeKernel::new(&z).unwrap();
        let sel = select_gamma(&kern, 1.0).unwrap();
        let g = gaussian_vector(&mut r, n);
        let e = nalgebra::DVector::from_fn(n, |j, _| g[j] * (0.5 + z[(j, 0)].abs()));
        let c = r.random_range(1e-3..1e3) * if r.random_bool(0.5) { -1.0 } else { 1.0 };
        for kind in TestKind::ALL {
            let Ok(test) = PreparedTest::new(kind, &z, &kern, &sel, TestOptions::default()) else { continue };
            let base = test.statistic(&e).unwrap().value;
            for other in [&e * c, -&e] {
                let v = test.statistic(&other).unwrap().value;
                if base.is_nan() && v.is_nan() {
                    continue;
                }
                worst = worst.max((v - base).abs() / base.abs().max(1e-300));
            }
            evaluated += 1;
        }
    }
    check(worst <= 1e-10, format!("{evaluated} statistics, worst relative change {worst:.2e} (limit 1e-10)"))
}
