//! The `rjar` command line.
//!
//! Exit status is 0 on success, 1 on a usage error and 2 when the library
//! rejects the data or model; failures print one `CODE: message` line on
//! standard error.

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Value};

use rjar_core::confset::{cartesian_grid, linear_grid};
use rjar_core::montecarlo::{Design, SimConfig, SimResult, SweepParams};
use rjar_core::{
    assumption_diagnostics, partial_and_standardise, select_gamma, structural_residuals, ConfidenceSet, Inverter,
    PreparedTest, RidgeKernel, SupScoreScaling, TestKind, TestOptions, TestResult,
};

use crate::io::{load_dataset, Loaded, Schema};
use crate::output::{self, finite};
use crate::{runner, AppError};

#[derive(Debug, Parser)]
#[command(name = "rjar", version, about = "Weak-identification-robust AR tests with many instruments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads (defaults to all available cores). Results do not depend on it.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run tests of H0: beta = beta0 on a dataset.
    Test(TestCmd),
    /// Invert tests over a grid of null values.
    Confset(ConfsetCmd),
    /// Monte-Carlo size and power experiment.
    Simulate(SimulateCmd),
    /// Report the selected penalty and the off-diagonal mass diagnostics.
    Diagnose(DiagnoseCmd),
    /// Selected penalty and mass ratio along a grid of sample sizes.
    Sweep(SweepCmd),
}

#[derive(Debug, Args)]
pub struct DataArgs {
    /// CSV file with a header row.
    #[arg(long)]
    pub input: PathBuf,
    /// Outcome column.
    #[arg(long)]
    pub outcome: String,
    /// Comma-separated endogenous regressors.
    #[arg(long, value_delimiter = ',', required = true)]
    pub endogenous: Vec<String>,
    /// Comma-separated instruments; a trailing `*` matches by prefix.
    #[arg(long, value_delimiter = ',', required = true)]
    pub instruments: Vec<String>,
    /// Comma-separated exogenous covariates to partial out.
    #[arg(long, value_delimiter = ',')]
    pub covariates: Vec<String>,
    /// Add a constant to the covariates.
    #[arg(long)]
    pub intercept: bool,
    /// Use every instrument-by-covariate product as the instrument set.
    #[arg(long)]
    pub interact: bool,
}

impl DataArgs {
    fn schema(&self) -> Schema {
        Schema {
            outcome: self.outcome.clone(),
            endogenous: self.endogenous.clone(),
            instruments: self.instruments.clone(),
            covariates: self.covariates.clone(),
            intercept: self.intercept,
            interact: self.interact,
        }
    }

    fn echo(&self, loaded: &Loaded) -> Value {
        json!({
            "input": self.input.display().to_string(),
            "outcome": loaded.outcome,
            "endogenous": loaded.endogenous,
            "instruments": loaded.instruments,
            "covariates": loaded.covariates,
            "intercept": self.intercept,
            "interact": self.interact,
        })
    }
}

#[derive(Debug, Args)]
pub struct TestOpts {
    #[arg(long, default_value_t = 0.05, value_parser = probability)]
    pub alpha: f64,
    /// Comma-separated subset of rjar, cms, ms, supscore.
    #[arg(long, value_delimiter = ',', default_value = "rjar")]
    pub tests: Vec<TestKind>,
    /// Smallest admissible penalty when Z'Z is singular.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub gamma_floor: f64,
    /// Sup-score critical value multiplier, must exceed 1.
    #[arg(long, default_value_t = 1.1)]
    pub c_bcch: f64,
    /// Sup-score critical value convention: scale-consistent or as-written.
    #[arg(long, default_value = "scale-consistent")]
    pub supscore_scaling: SupScoreScaling,
}

impl TestOpts {
    fn options(&self) -> TestOptions {
        TestOptions { c_bcch: self.c_bcch, scaling: self.supscore_scaling }
    }

    fn kinds(&self) -> Vec<TestKind> {
        dedup(&self.tests)
    }

    fn echo(&self) -> Value {
        json!({
            "alpha": self.alpha,
            "tests": names(&self.kinds()),
            "gamma_floor": self.gamma_floor,
            "c_bcch": self.c_bcch,
            "supscore_scaling": scaling_name(self.supscore_scaling),
        })
    }
}

#[derive(Debug, Args)]
pub struct TestCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub opts: TestOpts,
    /// Hypothesised coefficients, one per endogenous regressor.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub beta0: Vec<f64>,
    /// Write JSON lines here (plus a sidecar) instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ConfsetCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub opts: TestOpts,
    /// Lower grid bound per endogenous regressor.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub grid_min: Vec<f64>,
    /// Upper grid bound per endogenous regressor.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    pub grid_max: Vec<f64>,
    /// Points per axis (one value applies to every axis).
    #[arg(long, value_delimiter = ',', default_value = "100", value_parser = clap::value_parser!(u64).range(1..))]
    pub grid_points: Vec<u64>,
    /// CSV path; defaults to `confset.csv` in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory for output files; falls back to $RJAR_OUTPUT_DIR, then the working directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimulateCmd {
    /// Sample size.
    #[arg(long, default_value_t = 100)]
    pub n: usize,
    /// Number of instruments.
    #[arg(long, default_value_t = 30)]
    pub k: usize,
    /// sparse or dense first stage.
    #[arg(long, default_value = "sparse")]
    pub design: Design,
    /// Concentration parameter of the first stage.
    #[arg(long, default_value_t = 0.0)]
    pub mu2: f64,
    #[arg(long, default_value_t = 10_000)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    pub beta_true: f64,
    /// Nominal levels for the size table; defaults to 0.01, 0.02, ..., 0.99.
    #[arg(long, value_delimiter = ',', value_parser = probability)]
    pub alpha_grid: Vec<f64>,
    #[arg(long, value_delimiter = ',', default_value = "rjar,cms,ms,supscore")]
    pub tests: Vec<TestKind>,
    /// Draw the instruments once and keep them fixed across replications.
    #[arg(long)]
    pub fixed_instruments: bool,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub gamma_floor: f64,
    /// Sup-score critical value multiplier, must exceed 1.
    #[arg(long, default_value_t = 1.1)]
    pub c_bcch: f64,
    #[arg(long, default_value = "scale-consistent")]
    pub supscore_scaling: SupScoreScaling,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    pub power_min: f64,
    #[arg(long, default_value_t = 2.0, allow_hyphen_values = true)]
    pub power_max: f64,
    #[arg(long, default_value_t = 21, value_parser = clap::value_parser!(u64).range(1..))]
    pub power_points: u64,
    /// Level at which the power table is reported.
    #[arg(long, default_value_t = 0.05, value_parser = probability)]
    pub power_alpha: f64,
    /// Output file prefix inside the output directory.
    #[arg(long, default_value = "simulate")]
    pub prefix: String,
    /// Directory for output files; falls back to $RJAR_OUTPUT_DIR, then the working directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DiagnoseCmd {
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub gamma_floor: f64,
    /// Include the grid trace of S(gamma)/r.
    #[arg(long)]
    pub trace: bool,
    /// Write JSON here (plus a sidecar) instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepCmd {
    /// Instruments per observation, k = ceil(ratio * n).
    #[arg(long, default_value_t = 1.9, value_parser = positive)]
    pub ratio: f64,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_value = "250,500,1000,2000")]
    pub n_grid: Vec<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub gamma_floor: f64,
    #[arg(long, default_value_t = 0.3, value_parser = positive)]
    pub z_var: f64,
    #[arg(long, default_value_t = 0.5, allow_hyphen_values = true)]
    pub z_rho: f64,
    /// CSV path; defaults to `sweep.csv` in the output directory.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Directory for output files; falls back to $RJAR_OUTPUT_DIR, then the working directory.
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

fn probability(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(format!("{v} is not in (0, 1)"))
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(format!("{v} is not a positive number"))
    }
}

fn dedup(tests: &[TestKind]) -> Vec<TestKind> {
    let mut out = Vec::new();
    for &t in tests {
        if !out.contains(&t) {
            out.push(t);
        }
    }
    out
}

fn names(tests: &[TestKind]) -> Vec<&'static str> {
    tests.iter().map(|t| t.name()).collect()
}

fn scaling_name(s: SupScoreScaling) -> &'static str {
    match s {
        SupScoreScaling::AsWritten => "AS_WRITTEN",
        SupScoreScaling::ScaleConsistent => "SCALE_CONSISTENT",
    }
}

/// Parse `args` and run. Returns the process exit status.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    match execute(&cli, &mut stdout.lock()) {
        Ok(()) => 0,
        Err(e) => {
            let msg = e.to_string().replace('\n', " ");
            eprintln!("{}: {msg}", e.code());
            e.exit_code()
        }
    }
}

/// Run a parsed command; anything destined for standard output goes to `out`.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> Result<(), AppError> {
    let pool = runner::pool(cli.threads)?;
    match &cli.command {
        Command::Test(c) => cmd_test(c, out),
        Command::Confset(c) => cmd_confset(c, &pool, out),
        Command::Simulate(c) => cmd_simulate(c, &pool, out),
        Command::Diagnose(c) => cmd_diagnose(c, out),
        Command::Sweep(c) => cmd_sweep(c, &pool, out),
    }
}

fn stdout_err(source: std::io::Error) -> AppError {
    AppError::Io { path: "<stdout>".into(), source }
}

fn meta(command: &str, config: Value, extra: Value) -> Value {
    json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "config": config,
        "summary": extra,
    })
}

#[derive(Debug, Serialize)]
struct FlagsRecord {
    negative_variance_no_reject: bool,
    mass_questionable: bool,
}

/// One line of `rjar test` output.
#[derive(Debug, Serialize)]
pub struct TestRecord {
    name: &'static str,
    statistic: Option<f64>,
    critical_value: f64,
    alpha: f64,
    reject: bool,
    flags: FlagsRecord,
    /// Penalty the statistic was computed at; absent for the sup-score test.
    gamma_star: Option<f64>,
    variance: Option<f64>,
}

impl From<&TestResult> for TestRecord {
    fn from(r: &TestResult) -> Self {
        TestRecord {
            name: r.test.name(),
            statistic: finite(r.statistic),
            critical_value: r.critical_value,
            alpha: r.alpha,
            reject: r.reject,
            flags: FlagsRecord {
                negative_variance_no_reject: r.flags.negative_variance_no_reject,
                mass_questionable: r.flags.mass_questionable,
            },
            gamma_star: r.gamma_used,
            variance: r.variance_estimate,
        }
    }
}

fn check_beta_len(beta0: &[f64], g: usize, flag: &str) -> Result<(), AppError> {
    if beta0.len() != g {
        return Err(AppError::Usage(format!(
            "{flag} has {} value(s) but there are {g} endogenous regressor(s)",
            beta0.len()
        )));
    }
    Ok(())
}

fn cmd_test(c: &TestCmd, out: &mut dyn Write) -> Result<(), AppError> {
    let loaded = load_dataset(&c.data.input, &c.data.schema())?;
    check_beta_len(&c.beta0, loaded.dataset.g(), "--beta0")?;
    let pd = partial_and_standardise(&loaded.dataset)?;
    let kern = RidgeKernel::new(&pd.z)?;
    let sel = select_gamma(&kern, c.opts.gamma_floor)?;
    // Prepare every test first so an inapplicable one fails before any output.
    let prepared = c
        .opts
        .kinds()
        .into_iter()
        .map(|t| PreparedTest::new(t, &pd.z, &kern, &sel, c.opts.options()))
        .collect::<Result<Vec<_>, _>>()?;
    let e = structural_residuals(&pd, &c.beta0)?;
    let records = prepared
        .iter()
        .map(|t| t.test(&e, c.opts.alpha).map(|r| TestRecord::from(&r)))
        .collect::<Result<Vec<_>, _>>()?;
    match &c.output {
        Some(path) => {
            output::write_json_lines(path, &records)?;
            let config = json!({ "data": c.data.echo(&loaded), "tests": c.opts.echo(), "beta0": c.beta0 });
            let summary = json!({
                "n": pd.n(), "k_eff": pd.k_eff(), "dropped_cols": pd.dropped_cols,
                "rank": kern.rank(), "gamma_star": sel.gamma_star,
            });
            output::write_sidecar(path, &meta("test", config, summary))?;
        }
        None => out.write_all(output::json_lines(&records)?.as_bytes()).map_err(stdout_err)?,
    }
    Ok(())
}

fn confset_grid(c: &ConfsetCmd, g: usize) -> Result<Vec<Vec<f64>>, AppError> {
    check_beta_len(&c.grid_min, g, "--grid-min")?;
    check_beta_len(&c.grid_max, g, "--grid-max")?;
    let points: Vec<usize> = match c.grid_points.len() {
        1 => vec![c.grid_points[0] as usize; g],
        len if len == g => c.grid_points.iter().map(|&p| p as usize).collect(),
        len => return Err(AppError::Usage(format!("--grid-points has {len} values for {g} axes"))),
    };
    let axes = (0..g)
        .map(|j| linear_grid(c.grid_min[j], c.grid_max[j], points[j]))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(cartesian_grid(&axes))
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

fn cmd_confset(c: &ConfsetCmd, pool: &rayon::ThreadPool, out: &mut dyn Write) -> Result<(), AppError> {
    let loaded = load_dataset(&c.data.input, &c.data.schema())?;
    let g = loaded.dataset.g();
    let grid = confset_grid(c, g)?;
    let pd = partial_and_standardise(&loaded.dataset)?;
    let kern = RidgeKernel::new(&pd.z)?;
    let sel = select_gamma(&kern, c.opts.gamma_floor)?;
    let inverters = c
        .opts
        .kinds()
        .into_iter()
        .map(|t| Inverter::new(&pd, &kern, &sel, t, c.opts.alpha, c.opts.options()))
        .collect::<Result<Vec<_>, _>>()?;
    let sets = inverters.iter().map(|inv| runner::invert(inv, &grid, pool)).collect::<Result<Vec<_>, _>>()?;

    let mut header = vec!["test".to_owned()];
    if g == 1 {
        header.push("beta0".into());
    } else {
        header.extend((1..=g).map(|j| format!("beta0_{j}")));
    }
    header.extend(["statistic", "critical_value", "accepted"].map(String::from));
    let mut rows = Vec::new();
    for set in &sets {
        for (b, r) in set.grid.iter().zip(&set.results) {
            let mut row = vec![set.test.name().to_owned()];
            row.extend(b.iter().map(|&v| fmt_f64(v)));
            row.extend([fmt_f64(r.statistic), fmt_f64(r.critical_value), (!r.reject).to_string()]);
            rows.push(row);
        }
    }
    let path = c.output.clone().unwrap_or_else(|| output::output_dir(c.output_dir.as_deref()).join("confset.csv"));
    output::write_csv_records(&path, &header, &rows)?;

    let summary: Vec<Value> = sets.iter().map(|s| set_summary(s, g)).collect();
    let config = json!({
        "data": c.data.echo(&loaded),
        "tests": c.opts.echo(),
        "grid_min": c.grid_min, "grid_max": c.grid_max, "grid_points": c.grid_points,
    });
    let extra = json!({ "gamma_star": sel.gamma_star, "rank": kern.rank(), "sets": summary });
    output::write_sidecar(&path, &meta("confset", config, extra))?;
    writeln!(out, "{}", path.display()).map_err(stdout_err)
}

fn set_summary(s: &ConfidenceSet, g: usize) -> Value {
    let accepted = s.accepted.iter().filter(|&&a| a).count();
    let mut v = json!({
        "test": s.test.name(),
        "level": s.level,
        "accepted_points": accepted,
        "empty": s.is_empty(),
    });
    if g == 1 {
        let intervals: Vec<[f64; 2]> =
            s.components.iter().map(|r| [s.grid[r.start][0], s.grid[r.end - 1][0]]).collect();
        let unbounded_below = s.accepted.first() == Some(&true);
        let unbounded_above = s.accepted.last() == Some(&true);
        v["intervals"] = json!(intervals);
        v["touches_lower_bound"] = json!(unbounded_below);
        v["touches_upper_bound"] = json!(unbounded_above);
    }
    v
}

/// Row of the size table.
#[derive(Debug, Serialize)]
struct SizeRow {
    alpha: f64,
    test: &'static str,
    frequency: Option<f64>,
}

/// Row of the power table.
#[derive(Debug, Serialize)]
struct PowerRow {
    beta0: f64,
    mu2: f64,
    test: &'static str,
    frequency: Option<f64>,
}

impl SimulateCmd {
    fn config(&self) -> Result<SimConfig, AppError> {
        let defaults = SimConfig::default();
        let mut alpha_grid = if self.alpha_grid.is_empty() { defaults.alpha_grid } else { self.alpha_grid.clone() };
        if !alpha_grid.contains(&self.power_alpha) {
            alpha_grid.push(self.power_alpha);
        }
        let cfg = SimConfig {
            n: self.n,
            k: self.k,
            design: self.design,
            mu2: self.mu2,
            beta_true: self.beta_true,
            reps: self.reps,
            seed: self.seed,
            alpha_grid,
            tests: dedup(&self.tests),
            redraw_instruments: !self.fixed_instruments,
            gamma_floor: self.gamma_floor,
            c_bcch: self.c_bcch,
            scaling: self.supscore_scaling,
            ..defaults
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

fn config_echo(cfg: &SimConfig) -> Value {
    json!({
        "n": cfg.n, "k": cfg.k, "design": cfg.design.name(), "mu2": cfg.mu2,
        "sigma_eps2": cfg.sigma_eps2, "sigma_v2": cfg.sigma_v2, "corr_ev": cfg.corr_ev,
        "z_var": cfg.z_var, "z_rho": cfg.z_rho, "beta_true": cfg.beta_true,
        "reps": cfg.reps, "seed": cfg.seed, "alpha_grid": cfg.alpha_grid, "tests": names(&cfg.tests),
        "redraw_instruments": cfg.redraw_instruments, "gamma_floor": cfg.gamma_floor,
        "c_bcch": cfg.c_bcch, "supscore_scaling": scaling_name(cfg.scaling),
        "signal_count": cfg.signal_count(), "dense_count_rounded": cfg.dense_count_rounded(),
    })
}

fn sim_summary(res: &SimResult) -> Value {
    let tests: Vec<Value> = res
        .cells
        .iter()
        .map(|c| {
            json!({
                "test": c.test.name(),
                "applicable": c.applicable,
                "evaluated": c.evaluated,
                "failed": c.failed,
                "negative_variance": c.negative_variance,
            })
        })
        .collect();
    let gamma = res.gamma_summary.map(|g| {
        json!({ "median": g.median, "q1": g.q1, "q3": g.q3, "iqr": g.iqr(), "min": g.min, "max": g.max })
    });
    json!({
        "reps": res.reps,
        "beta0_grid": res.beta0_grid,
        "gamma_star": gamma,
        "ms_negative_variance": res.ms_negative_variance(),
        "tests": tests,
    })
}

fn cmd_simulate(c: &SimulateCmd, pool: &rayon::ThreadPool, out: &mut dyn Write) -> Result<(), AppError> {
    let cfg = c.config()?;
    let power_grid = linear_grid(c.power_min, c.power_max, c.power_points as usize)?;
    // Index 0 is the true value (size); the rest is the power grid.
    let mut grid = vec![cfg.beta_true];
    grid.extend(&power_grid);
    let res = runner::run_experiment(&cfg, &grid, pool)?;

    let power_idx = cfg.alpha_grid.iter().position(|&a| a == c.power_alpha).expect("power level is in the grid");
    let mut size = Vec::new();
    for cells in &res.cells {
        for (a, &alpha) in cfg.alpha_grid.iter().enumerate() {
            size.push(SizeRow { alpha, test: cells.test.name(), frequency: cells.frequencies[0][a] });
        }
    }
    let mut power = Vec::new();
    for cells in &res.cells {
        for (b, &beta0) in power_grid.iter().enumerate() {
            power.push(PowerRow {
                beta0,
                mu2: cfg.mu2,
                test: cells.test.name(),
                frequency: cells.frequencies[b + 1][power_idx],
            });
        }
    }

    let dir = output::output_dir(c.output_dir.as_deref());
    let size_path = dir.join(format!("{}_size.csv", c.prefix));
    let power_path = dir.join(format!("{}_power.csv", c.prefix));
    output::write_csv(&size_path, &size)?;
    output::write_csv(&power_path, &power)?;
    let config = json!({
        "simulation": config_echo(&cfg),
        "power_grid": power_grid,
        "power_alpha": c.power_alpha,
        "threads": pool.current_num_threads(),
    });
    let m = meta("simulate", config, sim_summary(&res));
    for p in [&size_path, &power_path] {
        output::write_sidecar(p, &m)?;
        writeln!(out, "{}", p.display()).map_err(stdout_err)?;
    }
    Ok(())
}

fn cmd_diagnose(c: &DiagnoseCmd, out: &mut dyn Write) -> Result<(), AppError> {
    let loaded = load_dataset(&c.data.input, &c.data.schema())?;
    let pd = partial_and_standardise(&loaded.dataset)?;
    let kern = RidgeKernel::new(&pd.z)?;
    let sel = select_gamma(&kern, c.gamma_floor)?;
    let d = assumption_diagnostics(&kern, &sel)?;
    let mut v = json!({
        "n": d.n,
        "k": loaded.dataset.k(),
        "k_eff": d.k,
        "q": loaded.dataset.q(),
        "dropped_cols": pd.dropped_cols,
        "rank": d.rank,
        "rank_tol": d.rank_tol,
        "full_column_rank": kern.full_column_rank(),
        "gamma_star": d.gamma_star,
        "lower_endpoint": sel.lower_endpoint,
        "s_at_star": d.s_at_star,
        "s_at_lower_endpoint": sel.s_at_lower_endpoint,
        "implied_c": d.implied_c,
        "max_diag": d.max_diag,
        "questionable": d.questionable,
        "tie_set_width": sel.tie_set_width,
    });
    if c.trace {
        v["ratio_trace"] = json!(d.ratio_trace);
    }
    match &c.output {
        Some(path) => {
            output::write_json(path, &v)?;
            let config = json!({ "data": c.data.echo(&loaded), "gamma_floor": c.gamma_floor, "trace": c.trace });
            output::write_sidecar(path, &meta("diagnose", config, Value::Null))?;
            Ok(())
        }
        None => {
            let text = serde_json::to_string_pretty(&v)?;
            writeln!(out, "{text}").map_err(stdout_err)
        }
    }
}

#[derive(Debug, Serialize)]
struct SweepRecord {
    n: usize,
    k: usize,
    rank: usize,
    gamma_star: f64,
    ratio: f64,
}

fn cmd_sweep(c: &SweepCmd, pool: &rayon::ThreadPool, out: &mut dyn Write) -> Result<(), AppError> {
    if c.n_grid.is_empty() {
        return Err(AppError::Usage("--n-grid is empty".into()));
    }
    let params = SweepParams { z_var: c.z_var, z_rho: c.z_rho, gamma_floor: c.gamma_floor, seed: c.seed };
    let rows = runner::sweep(&c.n_grid, c.ratio, params, pool)?;
    let records: Vec<SweepRecord> = rows
        .iter()
        .map(|r| SweepRecord { n: r.n, k: r.k, rank: r.rank, gamma_star: r.gamma_star, ratio: r.ratio })
        .collect();
    let path = c.output.clone().unwrap_or_else(|| output::output_dir(c.output_dir.as_deref()).join("sweep.csv"));
    output::write_csv(&path, &records)?;
    let config = json!({
        "ratio": c.ratio, "n_grid": c.n_grid, "seed": c.seed,
        "gamma_floor": c.gamma_floor, "z_var": c.z_var, "z_rho": c.z_rho,
    });
    output::write_sidecar(&path, &meta("sweep", config, Value::Null))?;
    writeln!(out, "{}", path.display()).map_err(stdout_err)
}
