//! Command-line driver: CSV ingestion, the `estimate`, `test` and `simulate`
//! subcommands, and versioned JSON or CSV reports.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::coarsened::{
    accuracy_missing_vim, rule_value_vim, CoarsenedConfig, MissingnessDataset, TreatmentDataset,
};
use crate::data::{Dataset, FeatureSet, OutcomeKind};
use crate::error::{Result, VimError};
use crate::estimators::{
    crossfit_vim, plugin_vim, split_test_vim, threads_from_env, with_threads, EstimationConfig,
};
use crate::folds::{FoldMode, FoldOptions};
use crate::learners::LearnerSpec;
use crate::measures::{Measure, MeasureKind};
use crate::result::VimResult;
use crate::simulation::{Experiment, OperatingCharacteristics, SimScenario};

pub const SCHEMA: &str = "vim-report/1";

#[derive(Debug, Parser)]
#[command(name = "vimkit", version, about = "Variable importance estimation and testing")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate the importance of each feature group with confidence intervals.
    Estimate(DataArgs),
    /// Estimate and test `psi <= beta` with the sample-split procedure.
    Test(DataArgs),
    /// Monte Carlo study on the built-in Gaussian mixture scenarios.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FoldModeArg {
    Balanced,
    WithReplacement,
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Predictiveness measure: r_squared, deviance, accuracy, auc or rule_value.
    #[arg(long, default_value = "auc")]
    pub measure: String,
    #[arg(long, default_value_t = 5)]
    pub folds: usize,
    #[arg(long, default_value_t = 0.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// mean, logistic, linear, boosted, stack, or stack:a,b,...
    #[arg(long, default_value = "stack")]
    pub learner: String,
    /// Write the report here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Fit and evaluate on the same observations instead of cross-fitting.
    #[arg(long)]
    pub no_cross_fit: bool,
    /// Keep outcome proportions equal across folds.
    #[arg(long)]
    pub stratify: bool,
    #[arg(long, value_enum, default_value_t = FoldModeArg::Balanced)]
    pub fold_mode: FoldModeArg,
    /// Share of observations in the half used for the full model.
    #[arg(long, default_value_t = 0.5)]
    pub split_fraction: f64,
}

#[derive(Debug, Clone, Args)]
pub struct DataArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub outcome: String,
    /// JSON object mapping group names to lists of column names.
    /// Defaults to one group per feature column.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// Binary treatment column; enables the rule_value measure.
    #[arg(long)]
    pub treatment: Option<String>,
    /// Binary outcome-observed column; outcome cells may be empty where it is 0.
    #[arg(long)]
    pub observed: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 1)]
    pub scenario: u32,
    /// Feature whose importance is estimated: x1 or x2.
    #[arg(long, default_value = "x1")]
    pub feature: String,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',', default_values_t = vec![500, 1000, 2000, 4000])]
    pub n: Vec<usize>,
    #[arg(long, default_value_t = 300)]
    pub reps: usize,
    #[command(flatten)]
    pub common: CommonArgs,
}

/// A parsed CSV file, typed by its declared role columns.
#[derive(Debug, Clone)]
pub enum Ingested {
    Plain(Dataset),
    Treatment(TreatmentDataset),
    Missingness(MissingnessDataset),
}

impl Ingested {
    pub fn names(&self) -> &[String] {
        match self {
            Ingested::Plain(d) => d.names(),
            Ingested::Treatment(d) => d.base().names(),
            Ingested::Missingness(d) => d.base().names(),
        }
    }
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.trim().parse::<f64>().map_err(|_| {
        VimError::Data(format!("row {row}, column '{column}': cannot parse '{raw}' as a number"))
    })
}

/// Reads a headed CSV file. Row numbers in errors count data rows from 1.
pub fn ingest_csv(
    path: &Path,
    outcome: &str,
    treatment: Option<&str>,
    observed: Option<&str>,
) -> Result<Ingested> {
    if treatment.is_some() && observed.is_some() {
        return Err(VimError::Config(
            "--treatment and --observed cannot be combined".into(),
        ));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| VimError::Data(format!("cannot read {}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| VimError::Data(format!("bad header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| VimError::Config(format!("column '{name}' not found in {}", path.display())))
    };
    let y_col = find(outcome)?;
    let a_col = treatment.map(find).transpose()?;
    let d_col = observed.map(find).transpose()?;
    let role: Vec<usize> = [Some(y_col), a_col, d_col].into_iter().flatten().collect();
    let feature_cols: Vec<usize> = (0..headers.len()).filter(|j| !role.contains(j)).collect();
    if feature_cols.is_empty() {
        return Err(VimError::Data("no feature columns".into()));
    }

    let mut x: Vec<f64> = Vec::new();
    let mut y = Vec::new();
    let mut a = Vec::new();
    let mut delta = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.map_err(|e| VimError::Data(format!("row {row}: {e}")))?;
        if record.len() != headers.len() {
            return Err(VimError::Data(format!(
                "row {row}: expected {} fields, found {}",
                headers.len(),
                record.len()
            )));
        }
        for &j in &feature_cols {
            x.push(parse_cell(&record[j], row, &headers[j])?);
        }
        if let Some(j) = d_col {
            let obs = parse_cell(&record[j], row, &headers[j])?;
            delta.push(obs);
            let cell = record[y_col].trim();
            if cell.is_empty() {
                if obs != 0.0 {
                    return Err(VimError::Data(format!(
                        "row {row}, column '{outcome}': empty outcome where '{}' is {obs}",
                        headers[j]
                    )));
                }
                y.push(0.0);
            } else {
                let v = parse_cell(cell, row, outcome)?;
                y.push(if obs == 0.0 { 0.0 } else { v });
            }
        } else {
            y.push(parse_cell(&record[y_col], row, outcome)?);
        }
        if let Some(j) = a_col {
            a.push(parse_cell(&record[j], row, &headers[j])?);
        }
    }
    let n = y.len();
    if n == 0 {
        return Err(VimError::Data("no data rows".into()));
    }
    let p = feature_cols.len();
    let features = DMatrix::from_row_slice(n, p, &x);
    let names: Vec<String> = feature_cols.iter().map(|&j| headers[j].clone()).collect();
    if a_col.is_some() {
        return Ok(Ingested::Treatment(TreatmentDataset::with_names(features, a, y, names)?));
    }
    if d_col.is_some() {
        return Ok(Ingested::Missingness(MissingnessDataset::with_names(
            features, delta, y, names,
        )?));
    }
    let kind = OutcomeKind::detect(&y);
    Ok(Ingested::Plain(Dataset::with_names(features, y, kind, names)?))
}

/// Named feature groups resolved to column indices, in file order.
pub fn resolve_groups(path: Option<&Path>, names: &[String]) -> Result<Vec<(String, FeatureSet)>> {
    let Some(path) = path else {
        return Ok(names
            .iter()
            .enumerate()
            .map(|(j, n)| (n.clone(), FeatureSet::single(j)))
            .collect());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| VimError::Config(format!("cannot read {}: {e}", path.display())))?;
    let map: serde_json::Map<String, serde_json::Value> = serde_json::from_str(&text)
        .map_err(|e| VimError::Config(format!("groups file must be a JSON object: {e}")))?;
    if map.is_empty() {
        return Err(VimError::Config("groups file defines no groups".into()));
    }
    map.into_iter()
        .map(|(group, cols)| {
            let cols: Vec<String> = serde_json::from_value(cols).map_err(|_| {
                VimError::Config(format!("group '{group}' must be a list of column names"))
            })?;
            let idx = cols
                .iter()
                .map(|c| {
                    names.iter().position(|n| n == c).ok_or_else(|| {
                        VimError::Config(format!(
                            "group '{group}' references unknown feature column '{c}'"
                        ))
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let set = FeatureSet::new(idx)
                .map_err(|e| VimError::Config(format!("group '{group}': {e}")))?;
            Ok((group, set))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub measure: String,
    pub folds: usize,
    pub beta: f64,
    pub alpha: f64,
    pub seed: u64,
    pub learner: LearnerSpec,
    pub cross_fit: bool,
    pub sample_split: bool,
    pub split_fraction: f64,
    pub stratify: bool,
    pub fold_mode: FoldMode,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub group: String,
    pub columns: Vec<String>,
    pub psi: f64,
    pub se: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub v_full: f64,
    pub v_reduced: f64,
    pub n_full: usize,
    pub n_reduced: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ci_one_sided_lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_stat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reject: Option<bool>,
}

impl GroupRow {
    fn new(group: String, columns: Vec<String>, r: &VimResult, with_test: bool) -> Self {
        GroupRow {
            group,
            columns,
            psi: r.psi,
            se: r.std_error,
            ci_lo: r.ci_two_sided.0,
            ci_hi: r.ci_two_sided.1,
            v_full: r.v_full,
            v_reduced: r.v_reduced,
            n_full: r.n_full,
            n_reduced: r.n_reduced,
            ci_one_sided_lo: with_test.then_some(r.ci_one_sided_lower),
            t_stat: with_test.then_some(r.test_stat),
            p_value: with_test.then_some(r.p_value),
            reject: with_test.then_some(r.reject),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub schema: String,
    pub command: String,
    pub n: usize,
    pub config: ReportConfig,
    pub groups: Vec<GroupRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulateReport {
    pub schema: String,
    pub command: String,
    pub scenario: u32,
    pub feature: String,
    pub truth: f64,
    pub n_reps: usize,
    pub config: ReportConfig,
    pub rows: Vec<OperatingCharacteristics>,
}

fn fold_options(c: &CommonArgs) -> FoldOptions {
    FoldOptions {
        mode: match c.fold_mode {
            FoldModeArg::Balanced => FoldMode::Balanced,
            FoldModeArg::WithReplacement => FoldMode::WithReplacement,
        },
        split_fraction: c.split_fraction,
    }
}

fn report_config(c: &CommonArgs, learner: LearnerSpec, sample_split: bool) -> ReportConfig {
    ReportConfig {
        measure: c.measure.clone(),
        folds: c.folds,
        beta: c.beta,
        alpha: c.alpha,
        seed: c.seed,
        learner,
        cross_fit: !c.no_cross_fit,
        sample_split,
        split_fraction: c.split_fraction,
        stratify: c.stratify,
        fold_mode: fold_options(c).mode,
    }
}

fn parse_measure(name: &str) -> Result<MeasureKind> {
    MeasureKind::parse(name).ok_or_else(|| {
        VimError::Config(format!(
            "unknown measure '{name}', expected r_squared, deviance, accuracy, auc or rule_value"
        ))
    })
}

fn estimation_config(
    c: &CommonArgs,
    kind: MeasureKind,
    learner: &LearnerSpec,
    sample_split: bool,
) -> EstimationConfig {
    let mut cfg = EstimationConfig::new(Measure::new(kind), learner.build());
    cfg.folds = c.folds;
    cfg.cross_fit = !c.no_cross_fit;
    cfg.sample_split = sample_split;
    cfg.beta = c.beta;
    cfg.alpha = c.alpha;
    cfg.seed = c.seed;
    cfg.fold_options = fold_options(c);
    cfg.stratify = c.stratify;
    cfg
}

fn coarsened_config(c: &CommonArgs, learner: &LearnerSpec) -> CoarsenedConfig {
    let mut cfg = CoarsenedConfig::new(learner.build());
    cfg.folds = c.folds;
    cfg.seed = c.seed;
    cfg.beta = c.beta;
    cfg.alpha = c.alpha;
    cfg.fold_options = fold_options(c);
    cfg
}

/// Runs `estimate` (`with_test = false`) or `test` and returns the report.
pub fn run_data(args: &DataArgs, with_test: bool) -> Result<EstimateReport> {
    let c = &args.common;
    let data = ingest_csv(
        &args.input,
        &args.outcome,
        args.treatment.as_deref(),
        args.observed.as_deref(),
    )?;
    let names = data.names().to_vec();
    let groups = resolve_groups(args.groups.as_deref(), &names)?;
    let columns_of = |s: &FeatureSet| s.indices().iter().map(|&j| names[j].clone()).collect();
    let command = if with_test { "test" } else { "estimate" };
    let mut rows = Vec::with_capacity(groups.len());
    match &data {
        Ingested::Plain(d) => {
            if c.measure == "rule_value" {
                return Err(VimError::Config("rule_value requires --treatment".into()));
            }
            let kind = parse_measure(&c.measure)?;
            let learner = LearnerSpec::parse(&c.learner, d.kind())?;
            let cfg = estimation_config(c, kind, &learner, with_test);
            for (name, s) in &groups {
                let r = match (cfg.cross_fit, with_test) {
                    (true, true) => split_test_vim(d, s, &cfg)?,
                    (true, false) => crossfit_vim(d, s, &cfg)?,
                    (false, _) => plugin_vim(d, s, &cfg)?,
                };
                rows.push(GroupRow::new(name.clone(), columns_of(s), &r, with_test));
            }
            Ok(EstimateReport {
                schema: SCHEMA.into(),
                command: command.into(),
                n: d.n(),
                config: report_config(c, learner, with_test),
                groups: rows,
            })
        }
        Ingested::Treatment(d) => {
            if c.measure != "rule_value" {
                return Err(VimError::Config(
                    "a treatment column requires --measure rule_value".into(),
                ));
            }
            let learner = LearnerSpec::parse(&c.learner, d.base().kind())?;
            let cfg = coarsened_config(c, &learner);
            for (name, s) in &groups {
                let r = rule_value_vim(d, s, &cfg)?;
                rows.push(GroupRow::new(name.clone(), columns_of(s), &r, with_test));
            }
            Ok(EstimateReport {
                schema: SCHEMA.into(),
                command: command.into(),
                n: d.n(),
                config: report_config(c, learner, true),
                groups: rows,
            })
        }
        Ingested::Missingness(d) => {
            if parse_measure(&c.measure)? != MeasureKind::Accuracy {
                return Err(VimError::Config(
                    "an observed-indicator column requires --measure accuracy".into(),
                ));
            }
            let learner = LearnerSpec::parse(&c.learner, OutcomeKind::Binary)?;
            let cfg = coarsened_config(c, &learner);
            for (name, s) in &groups {
                let r = accuracy_missing_vim(d, s, &cfg)?;
                rows.push(GroupRow::new(name.clone(), columns_of(s), &r, with_test));
            }
            Ok(EstimateReport {
                schema: SCHEMA.into(),
                command: command.into(),
                n: d.n(),
                config: report_config(c, learner, true),
                groups: rows,
            })
        }
    }
}

fn parse_feature(s: &str) -> Result<FeatureSet> {
    match s.trim().trim_start_matches(['x', 'X']) {
        "1" => Ok(FeatureSet::single(0)),
        "2" => Ok(FeatureSet::single(1)),
        _ => Err(VimError::Config(format!("feature must be x1 or x2, got '{s}'"))),
    }
}

pub fn run_simulate(args: &SimulateArgs) -> Result<SimulateReport> {
    let c = &args.common;
    let kind = parse_measure(&c.measure)?;
    let scenario = SimScenario::by_id(args.scenario)?;
    let s = parse_feature(&args.feature)?;
    if args.n.is_empty() {
        return Err(VimError::Config("--n needs at least one sample size".into()));
    }
    let learner = LearnerSpec::parse(&c.learner, OutcomeKind::Binary)?;
    let experiment = Experiment {
        scenario,
        s: s.clone(),
        n_grid: args.n.clone(),
        n_reps: args.reps,
        config: estimation_config(c, kind, &learner, true),
        seed: c.seed,
    };
    let rows = experiment.run()?;
    Ok(SimulateReport {
        schema: SCHEMA.into(),
        command: "simulate".into(),
        scenario: args.scenario,
        feature: format!("x{}", s.indices()[0] + 1),
        truth: scenario.oracle_truth(kind, &s)?,
        n_reps: args.reps,
        config: report_config(c, learner, true),
        rows,
    })
}

fn render_json<T: Serialize>(report: &T) -> Result<Vec<u8>> {
    let mut out = serde_json::to_vec_pretty(report)
        .map_err(|e| VimError::Data(format!("cannot serialize report: {e}")))?;
    out.push(b'\n');
    Ok(out)
}

fn render_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| VimError::Data(format!("cannot write CSV: {e}")))?;
    }
    w.into_inner()
        .map_err(|e| VimError::Data(format!("cannot write CSV: {e}")))
}

#[derive(Serialize)]
struct FlatGroupRow<'a> {
    group: &'a str,
    columns: String,
    psi: f64,
    se: f64,
    ci_lo: f64,
    ci_hi: f64,
    v_full: f64,
    v_reduced: f64,
    n_full: usize,
    n_reduced: usize,
    ci_one_sided_lo: Option<f64>,
    t_stat: Option<f64>,
    p_value: Option<f64>,
    reject: Option<bool>,
}

/// Renders the report bytes for `format`.
pub fn render_estimate(report: &EstimateReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => render_json(report),
        Format::Csv => {
            let flat: Vec<FlatGroupRow> = report
                .groups
                .iter()
                .map(|g| FlatGroupRow {
                    group: &g.group,
                    columns: g.columns.join(";"),
                    psi: g.psi,
                    se: g.se,
                    ci_lo: g.ci_lo,
                    ci_hi: g.ci_hi,
                    v_full: g.v_full,
                    v_reduced: g.v_reduced,
                    n_full: g.n_full,
                    n_reduced: g.n_reduced,
                    ci_one_sided_lo: g.ci_one_sided_lo,
                    t_stat: g.t_stat,
                    p_value: g.p_value,
                    reject: g.reject,
                })
                .collect();
            render_csv(&flat)
        }
    }
}

pub fn render_simulate(report: &SimulateReport, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Json => render_json(report),
        Format::Csv => render_csv(&report.rows),
    }
}

fn emit(bytes: &[u8], output: Option<&Path>) -> Result<()> {
    match output {
        Some(p) => std::fs::write(p, bytes)?,
        None => std::io::stdout().write_all(bytes)?,
    }
    Ok(())
}

/// Runs a parsed command on a pool sized by `VIMKIT_THREADS`.
pub fn run(cli: &Cli) -> Result<()> {
    let threads = threads_from_env()?;
    with_threads(threads, || match &cli.command {
        Command::Estimate(a) | Command::Test(a) => {
            let with_test = matches!(cli.command, Command::Test(_));
            let report = run_data(a, with_test)?;
            emit(
                &render_estimate(&report, a.common.format)?,
                a.common.output.as_deref(),
            )
        }
        Command::Simulate(a) => {
            let report = run_simulate(a)?;
            emit(
                &render_simulate(&report, a.common.format)?,
                a.common.output.as_deref(),
            )
        }
    })?
}

/// Parses `args`, runs, and returns the process exit code. Errors go to
/// standard error prefixed with `E_CONFIG`, `E_DATA` or `E_DEGENERATE`.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                eprintln!("E_CONFIG: {}", e.to_string().trim_end());
                return 2;
            }
            print!("{e}");
            return 0;
        }
    };
    match run(&cli) {
        Ok(()) => 0,
        Err(e) => {
            let class = e.class();
            eprintln!("{}: {e}", class.prefix());
            class.exit_code()
        }
    }
}
