use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DVector;

use super::config::SimConfig;
use super::dgp::SimDesign;
use crate::artests::{CmsTest, MsTest, PreparedTest, RjarTest, SupScoreTest, TestKind};
use crate::dataio::{partial_and_standardise, Dataset};
use crate::error::{Error, Result};
use crate::kernel::RidgeKernel;
use crate::penalty::{select_gamma, PenaltySelection};

/// Outcome of one test at one null value in one replication.
#[derive(Debug, Clone, PartialEq)]
pub enum CellOutcome {
    /// The test cannot be computed for this `(n, k)`.
    Absent,
    Failed(&'static str),
    Evaluated {
        statistic: f64,
        negative_variance: bool,
        /// Decision at each level of the alpha grid.
        rejects: Vec<bool>,
    },
}

#[derive(Debug, Clone)]
pub struct RepOutcome {
    pub rep: usize,
    pub gamma_star: Option<f64>,
    /// Indexed `[test][beta0]`, tests in config order.
    pub cells: Vec<Vec<CellOutcome>>,
}

/// A prepared experiment. `replicate` is pure in `rep`, so replications can
/// be evaluated in any order or in parallel.
#[derive(Debug, Clone)]
pub struct Experiment {
    cfg: SimConfig,
    beta0_grid: Vec<f64>,
    design: SimDesign,
}

impl Experiment {
    pub fn new(cfg: &SimConfig, beta0_grid: &[f64]) -> Result<Self> {
        cfg.validate()?;
        if beta0_grid.is_empty() || !beta0_grid.iter().all(|b| b.is_finite()) {
            return Err(Error::Config(String::from("beta0 grid must be non-empty and finite")));
        }
        Ok(Experiment { cfg: cfg.clone(), beta0_grid: beta0_grid.to_vec(), design: SimDesign::new(cfg)? })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn beta0_grid(&self) -> &[f64] {
        &self.beta0_grid
    }

    pub fn design(&self) -> &SimDesign {
        &self.design
    }

    /// Whether `test` can ever be computed at this `(n, k)`.
    pub fn applicable(&self, test: TestKind) -> bool {
        match test {
            TestKind::Cms | TestKind::Ms => self.cfg.k < self.cfg.n,
            _ => true,
        }
    }

    pub fn replicate(&self, rep: usize) -> RepOutcome {
        let tests = &self.cfg.tests;
        let nb = self.beta0_grid.len();
        let failed_all = |code: &'static str| -> Vec<Vec<CellOutcome>> {
            tests
                .iter()
                .map(|&t| {
                    let cell = if self.applicable(t) { CellOutcome::Failed(code) } else { CellOutcome::Absent };
                    vec![cell; nb]
                })
                .collect()
        };

        let draw = self.design.draw(rep);
        let prepared = Dataset::new(draw.y, draw.x, draw.z, None)
            .and_then(|d| partial_and_standardise(&d))
            .and_then(|pd| RidgeKernel::new(&pd.z).map(|kern| (pd, kern)));
        let (pd, kern) = match prepared {
            Ok(v) => v,
            Err(e) => return RepOutcome { rep, gamma_star: None, cells: failed_all(e.code()) },
        };
        let sel = select_gamma(&kern, self.cfg.gamma_floor);
        let opts = self.cfg.test_options();

        let mut cells = Vec::with_capacity(tests.len());
        for &t in tests {
            if !self.applicable(t) {
                cells.push(vec![CellOutcome::Absent; nb]);
                continue;
            }
            let prepared = prepare(t, &pd.z, &kern, &sel, opts);
            let crit = prepared.as_ref().ok().map(|p| {
                self.cfg.alpha_grid.iter().map(|&a| p.critical_value(a)).collect::<Result<Vec<f64>>>()
            });
            let row = match (prepared, crit) {
                (Ok(p), Some(Ok(crit))) => self
                    .beta0_grid
                    .iter()
                    .map(|&b| {
                        let e: DVector<f64> = &pd.y - pd.x.column(0) * b;
                        match p.statistic(&e) {
                            Ok(s) => CellOutcome::Evaluated {
                                statistic: s.value,
                                negative_variance: s.flags.negative_variance_no_reject,
                                rejects: crit.iter().map(|&c| s.rejects(c)).collect(),
                            },
                            Err(err) => CellOutcome::Failed(err.code()),
                        }
                    })
                    .collect(),
                (Err(err), _) | (_, Some(Err(err))) => vec![CellOutcome::Failed(err.code()); nb],
                (Ok(_), None) => unreachable!(),
            };
            cells.push(row);
        }
        RepOutcome { rep, gamma_star: sel.ok().map(|s| s.gamma_star), cells }
    }

    pub fn tally(&self) -> SimTally {
        SimTally::new(&self.cfg, self.beta0_grid.len())
    }
}

fn prepare<'a>(
    t: TestKind,
    z: &'a nalgebra::DMatrix<f64>,
    kern: &'a RidgeKernel,
    sel: &Result<PenaltySelection>,
    opts: crate::artests::TestOptions,
) -> Result<PreparedTest<'a>> {
    Ok(match t {
        TestKind::Rjar => PreparedTest::Rjar(RjarTest::new(kern, sel.as_ref().map_err(Clone::clone)?)?),
        TestKind::Cms => PreparedTest::Cms(CmsTest::from_kernel(kern)?),
        TestKind::Ms => PreparedTest::Ms(MsTest::from_kernel(kern)?),
        TestKind::SupScore => PreparedTest::SupScore(SupScoreTest::new(z, opts.c_bcch, opts.scaling)?),
    })
}

/// Order-independent accumulator of replication outcomes.
#[derive(Debug, Clone)]
pub struct SimTally {
    tests: Vec<TestKind>,
    n_alpha: usize,
    /// `[test][beta0][alpha]`
    rejections: Vec<Vec<Vec<u64>>>,
    evaluated: Vec<Vec<u64>>,
    failed: Vec<Vec<u64>>,
    absent: Vec<bool>,
    negative_variance: Vec<Vec<u64>>,
    gamma_stars: Vec<(usize, f64)>,
    traces: Option<Vec<(usize, Vec<Vec<f64>>)>>,
    reps: u64,
}

impl SimTally {
    fn new(cfg: &SimConfig, nb: usize) -> Self {
        let nt = cfg.tests.len();
        let na = cfg.alpha_grid.len();
        SimTally {
            tests: cfg.tests.clone(),
            n_alpha: na,
            rejections: vec![vec![vec![0; na]; nb]; nt],
            evaluated: vec![vec![0; nb]; nt],
            failed: vec![vec![0; nb]; nt],
            absent: vec![false; nt],
            negative_variance: vec![vec![0; nb]; nt],
            gamma_stars: Vec::new(),
            traces: cfg.keep_traces.then(Vec::new),
            reps: 0,
        }
    }

    pub fn absorb(&mut self, out: &RepOutcome) {
        self.reps += 1;
        if let Some(g) = out.gamma_star {
            self.gamma_stars.push((out.rep, g));
        }
        for (t, row) in out.cells.iter().enumerate() {
            for (b, cell) in row.iter().enumerate() {
                match cell {
                    CellOutcome::Absent => self.absent[t] = true,
                    CellOutcome::Failed(_) => self.failed[t][b] += 1,
                    CellOutcome::Evaluated { negative_variance, rejects, .. } => {
                        self.evaluated[t][b] += 1;
                        if *negative_variance {
                            self.negative_variance[t][b] += 1;
                        }
                        for (a, &r) in rejects.iter().enumerate() {
                            if r {
                                self.rejections[t][b][a] += 1;
                            }
                        }
                    }
                }
            }
        }
        if let Some(traces) = &mut self.traces {
            let stats = out
                .cells
                .iter()
                .map(|row| {
                    row.iter()
                        .map(|c| match c {
                            CellOutcome::Evaluated { statistic, .. } => *statistic,
                            _ => f64::NAN,
                        })
                        .collect()
                })
                .collect();
            traces.push((out.rep, stats));
        }
    }

    pub fn merge(&mut self, other: SimTally) {
        self.reps += other.reps;
        for t in 0..self.tests.len() {
            self.absent[t] |= other.absent[t];
            for b in 0..self.evaluated[t].len() {
                self.evaluated[t][b] += other.evaluated[t][b];
                self.failed[t][b] += other.failed[t][b];
                self.negative_variance[t][b] += other.negative_variance[t][b];
                for a in 0..self.n_alpha {
                    self.rejections[t][b][a] += other.rejections[t][b][a];
                }
            }
        }
        self.gamma_stars.extend(other.gamma_stars);
        if let (Some(mine), Some(theirs)) = (&mut self.traces, other.traces) {
            mine.extend(theirs);
        }
    }

    pub fn finish(mut self, exp: &Experiment) -> SimResult {
        self.gamma_stars.sort_by_key(|a| a.0);
        let mut gammas: Vec<f64> = self.gamma_stars.iter().map(|g| g.1).collect();
        gammas.sort_by(f64::total_cmp);
        let gamma_summary = GammaSummary::from_sorted(&gammas);
        let traces = self.traces.map(|mut t| {
            t.sort_by_key(|a| a.0);
            t.into_iter().map(|(_, s)| s).collect()
        });
        let cells = self
            .tests
            .iter()
            .enumerate()
            .map(|(t, &test)| {
                let applicable = !self.absent[t] && exp.applicable(test);
                let frequencies = self.rejections[t]
                    .iter()
                    .zip(&self.evaluated[t])
                    .map(|(row, &ev)| {
                        row.iter()
                            .map(|&c| (applicable && ev > 0).then(|| c as f64 / ev as f64))
                            .collect()
                    })
                    .collect();
                TestCells {
                    test,
                    applicable,
                    frequencies,
                    evaluated: self.evaluated[t].clone(),
                    failed: self.failed[t].clone(),
                    negative_variance: self.negative_variance[t].clone(),
                }
            })
            .collect();
        SimResult {
            config: exp.cfg.clone(),
            beta0_grid: exp.beta0_grid.clone(),
            reps: self.reps,
            cells,
            gamma_summary,
            gamma_stars: gammas,
            traces,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaSummary {
    pub median: f64,
    pub q1: f64,
    pub q3: f64,
    pub min: f64,
    pub max: f64,
}

impl GammaSummary {
    pub fn from_sorted(v: &[f64]) -> Option<Self> {
        if v.is_empty() {
            return None;
        }
        let q = |p: f64| {
            let h = (v.len() - 1) as f64 * p;
            let lo = libm::floor(h) as usize;
            let hi = (lo + 1).min(v.len() - 1);
            v[lo] + (h - lo as f64) * (v[hi] - v[lo])
        };
        Some(GammaSummary { median: q(0.5), q1: q(0.25), q3: q(0.75), min: v[0], max: v[v.len() - 1] })
    }

    pub fn iqr(&self) -> f64 {
        self.q3 - self.q1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestCells {
    pub test: TestKind,
    pub applicable: bool,
    /// `[beta0][alpha]` rejection frequency over successfully evaluated
    /// replications; `None` when absent.
    pub frequencies: Vec<Vec<Option<f64>>>,
    pub evaluated: Vec<u64>,
    pub failed: Vec<u64>,
    pub negative_variance: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub config: SimConfig,
    pub beta0_grid: Vec<f64>,
    pub reps: u64,
    pub cells: Vec<TestCells>,
    pub gamma_summary: Option<GammaSummary>,
    /// Every selected penalty, sorted ascending.
    pub gamma_stars: Vec<f64>,
    /// `[rep][test][beta0]` statistics when traces were requested.
    pub traces: Option<Vec<Vec<Vec<f64>>>>,
}

impl SimResult {
    pub fn cells_for(&self, test: TestKind) -> Option<&TestCells> {
        self.cells.iter().find(|c| c.test == test)
    }

    pub fn frequency(&self, test: TestKind, beta0_idx: usize, alpha_idx: usize) -> Option<f64> {
        self.cells_for(test)?.frequencies.get(beta0_idx)?.get(alpha_idx).copied().flatten()
    }

    /// Negative-variance count for the MS test, per null value.
    pub fn ms_negative_variance(&self) -> Option<&[u64]> {
        self.cells_for(TestKind::Ms).map(|c| c.negative_variance.as_slice())
    }
}

/// Run every replication sequentially.
pub fn run_experiment(cfg: &SimConfig, beta0_grid: &[f64]) -> Result<SimResult> {
    let exp = Experiment::new(cfg, beta0_grid)?;
    let mut tally = exp.tally();
    for rep in 0..cfg.reps {
        tally.absorb(&exp.replicate(rep));
    }
    Ok(tally.finish(&exp))
}
