//! Confidence sets by test inversion over a grid of null values.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::artests::{check_alpha, PreparedTest, TestKind, TestOptions, TestResult};
use crate::dataio::{structural_residuals, PartialledData};
use crate::error::{Error, Result};
use crate::kernel::RidgeKernel;
use crate::penalty::PenaltySelection;

/// Grid size used when the caller gives only bounds.
pub const DEFAULT_GRID_POINTS: usize = 100;

#[derive(Debug, Clone)]
pub struct ConfidenceSet {
    pub test: TestKind,
    /// Coverage level `1 - alpha`.
    pub level: f64,
    pub grid: Vec<Vec<f64>>,
    pub accepted: Vec<bool>,
    /// Per-point test outcome, aligned with `grid`.
    pub results: Vec<TestResult>,
    /// Maximal runs of consecutive accepted grid indices.
    pub components: Vec<Range<usize>>,
}

impl ConfidenceSet {
    pub fn from_results(test: TestKind, alpha: f64, grid: Vec<Vec<f64>>, results: Vec<TestResult>) -> Self {
        let accepted: Vec<bool> = results.iter().map(|r| !r.reject).collect();
        let components = accepted_runs(&accepted);
        ConfidenceSet { test, level: 1.0 - alpha, grid, accepted, results, components }
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }
}

fn accepted_runs(mask: &[bool]) -> Vec<Range<usize>> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &a) in mask.iter().enumerate() {
        match (a, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push(s..i);
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push(s..mask.len());
    }
    runs
}

/// Evaluates one test at arbitrary null values. The kernel and penalty do not
/// depend on `beta0`, so they are shared across the whole grid.
#[derive(Debug, Clone)]
pub struct Inverter<'a> {
    pd: &'a PartialledData,
    test: PreparedTest<'a>,
    alpha: f64,
    critical_value: f64,
}

impl<'a> Inverter<'a> {
    pub fn new(
        pd: &'a PartialledData,
        kern: &'a RidgeKernel,
        sel: &PenaltySelection,
        test: TestKind,
        alpha: f64,
        opts: TestOptions,
    ) -> Result<Self> {
        check_alpha(alpha)?;
        let test = PreparedTest::new(test, &pd.z, kern, sel, opts)?;
        let critical_value = test.critical_value(alpha)?;
        Ok(Inverter { pd, test, alpha, critical_value })
    }

    pub fn test(&self) -> TestKind {
        self.test.kind()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn evaluate(&self, beta0: &[f64]) -> Result<TestResult> {
        let e = structural_residuals(self.pd, beta0)?;
        Ok(self.test.statistic(&e)?.decide(self.alpha, self.critical_value))
    }
}

pub fn invert(
    pd: &PartialledData,
    kern: &RidgeKernel,
    sel: &PenaltySelection,
    test: TestKind,
    grid: &[Vec<f64>],
    alpha: f64,
    opts: TestOptions,
) -> Result<ConfidenceSet> {
    if grid.is_empty() {
        return Err(Error::Domain(format!("empty grid for {test}")));
    }
    let inv = Inverter::new(pd, kern, sel, test, alpha, opts)?;
    let results = grid.iter().map(|b| inv.evaluate(b)).collect::<Result<Vec<_>>>()?;
    Ok(ConfidenceSet::from_results(test, alpha, grid.to_vec(), results))
}

/// `points` equally spaced values from `min` to `max` inclusive.
pub fn linear_grid(min: f64, max: f64, points: usize) -> Result<Vec<f64>> {
    if points == 0 || !min.is_finite() || !max.is_finite() || max < min {
        return Err(Error::Domain(format!("bad grid [{min}, {max}] with {points} points")));
    }
    if points == 1 {
        return Ok(alloc::vec![min]);
    }
    let step = (max - min) / (points - 1) as f64;
    Ok((0..points)
        .map(|i| if i + 1 == points { max } else { min + step * i as f64 })
        .collect())
}

/// Cartesian product of per-coordinate axes; the last axis varies fastest.
pub fn cartesian_grid(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    axes.iter().fold(alloc::vec![Vec::new()], |acc, axis| {
        acc.iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect()
    })
}
