//! CSV ingestion with role-based column selection.

use std::fs::File;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rjar_core::{interact_instruments, Dataset};

use crate::AppError;

/// Which columns play which role. Entries ending in `*` are prefix globs
/// and expand to every matching header, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Schema {
    pub outcome: String,
    pub endogenous: Vec<String>,
    pub instruments: Vec<String>,
    pub covariates: Vec<String>,
    /// Append a column of ones to the covariates.
    pub intercept: bool,
    /// Replace the instruments by their products with every covariate.
    pub interact: bool,
}

/// A loaded dataset together with the resolved column names.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub dataset: Dataset,
    pub outcome: String,
    pub endogenous: Vec<String>,
    pub instruments: Vec<String>,
    pub covariates: Vec<String>,
}

pub fn load_dataset(path: &Path, schema: &Schema) -> Result<Loaded, AppError> {
    let file = File::open(path).map_err(|source| AppError::Io { path: path.display().to_string(), source })?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: std::io::Read>(reader: R, schema: &Schema) -> Result<Loaded, AppError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();

    let outcome = resolve(&headers, std::slice::from_ref(&schema.outcome), "outcome")?;
    let endogenous = resolve(&headers, &schema.endogenous, "endogenous")?;
    let instruments = resolve(&headers, &schema.instruments, "instruments")?;
    let covariates = if schema.covariates.is_empty() {
        Vec::new()
    } else {
        resolve(&headers, &schema.covariates, "covariates")?
    };
    if outcome.len() != 1 {
        return Err(AppError::Schema(format!("outcome must name exactly one column, got {}", outcome.len())));
    }

    let wanted: Vec<usize> =
        outcome.iter().chain(&endogenous).chain(&instruments).chain(&covariates).copied().collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        for (slot, &c) in wanted.iter().enumerate() {
            let cell = record.get(c).unwrap_or("");
            let value = cell.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| AppError::Parse {
                row: row + 1,
                column: headers[c].clone(),
                cell: cell.to_owned(),
            })?;
            columns[slot].push(value);
        }
    }

    let n = columns[0].len();
    let block = |range: std::ops::Range<usize>| {
        let mut m = DMatrix::zeros(n, range.len());
        for (j, slot) in range.enumerate() {
            m.set_column(j, &DVector::from_column_slice(&columns[slot]));
        }
        m
    };
    let (g, k, q) = (endogenous.len(), instruments.len(), covariates.len());
    let y = DVector::from_column_slice(&columns[0]);
    let x = block(1..1 + g);
    let mut z = block(1 + g..1 + g + k);
    let mut w = block(1 + g + k..1 + g + k + q);
    let mut names: Vec<String> = covariates.iter().map(|&c| headers[c].clone()).collect();
    if schema.intercept {
        w = w.insert_column(q, 1.0);
        names.push("(intercept)".to_owned());
    }
    let mut instrument_names: Vec<String> = instruments.iter().map(|&c| headers[c].clone()).collect();
    if schema.interact {
        if w.ncols() == 0 {
            return Err(AppError::Schema("instrument interaction needs at least one covariate".into()));
        }
        z = interact_instruments(&z, &w)?;
        instrument_names = instrument_names
            .iter()
            .flat_map(|zn| names.iter().map(move |wn| format!("{zn}:{wn}")))
            .collect();
    }
    let w = (w.ncols() > 0).then_some(w);
    Ok(Loaded {
        dataset: Dataset::new(y, x, z, w)?,
        outcome: headers[outcome[0]].clone(),
        endogenous: endogenous.iter().map(|&c| headers[c].clone()).collect(),
        instruments: instrument_names,
        covariates: names,
    })
}

/// Header indices for a role, expanding prefix globs. Every pattern must
/// match at least one header.
fn resolve(headers: &[String], patterns: &[String], role: &str) -> Result<Vec<usize>, AppError> {
    if patterns.is_empty() {
        return Err(AppError::Schema(format!("no {role} columns given")));
    }
    let mut out = Vec::new();
    for pat in patterns {
        let hits: Vec<usize> = match pat.strip_suffix('*') {
            Some(prefix) => (0..headers.len()).filter(|&i| headers[i].starts_with(prefix)).collect(),
            None => headers.iter().position(|h| h == pat).into_iter().collect(),
        };
        if hits.is_empty() {
            return Err(AppError::Schema(format!("{role} column '{pat}' not found")));
        }
        for h in hits {
            if !out.contains(&h) {
                out.push(h);
            }
        }
    }
    Ok(out)
}
