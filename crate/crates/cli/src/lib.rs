//! Command-line front end for the `rcassoc` library.
//!
//! Reports go to standard output (or files under `--out`); failures are
//! written to standard error as a JSON object. Exit status is 0 on
//! success, 1 for domain errors and 2 for usage errors.

pub mod input;
pub mod report;
pub mod svg;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use rcassoc::interactions::{altham_distance, interaction_matrix};
use rcassoc::rc_model::{fit, InversionOptions};
use rcassoc::scenario::{scale_association, MarginPolicy, ScenarioSpec};
use rcassoc::selection::{select_best, sweep, SelectionPolicy, SweepGrid, SweepOptions};
use rcassoc::table::{ipf_adjust, to_probability, IPF_MAX_ITER, IPF_TOL};
use rcassoc::{fixtures, ContingencyTable, FitOptions, InteractionSpec, LogitType, Margins, ModelSpec};

use input::{resolve_table, table_to_csv, InputError};
use report::*;

/// Environment variable capping sweep worker threads.
pub const THREADS_ENV: &str = "RC_ASSOC_THREADS";

#[derive(Debug, Parser)]
#[command(name = "rcassoc", version, about = "Extended RC(K) association models for two-way tables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit one model and report scores, coefficients and deviance.
    Fit(FitArgs),
    /// Fit a grid of models and select the smallest adequate rank.
    Sweep(SweepArgs),
    /// Rescale the association of a fitted model under fixed margins.
    Scenario(ScenarioArgs),
    /// Generalised interaction matrix of a table.
    Interactions(InteractionArgs),
    /// Altham distance between two tables of the same shape.
    Altham(AlthamArgs),
    /// Adjust a table to new margins, keeping its odds ratios.
    Ipf(IpfArgs),
    /// List the bundled tables, or print one as CSV.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// CSV file or bundled table name (table5, table6, table7).
    #[arg(long)]
    pub table: String,
    /// Constant added to every cell before fitting.
    #[arg(long, default_value_t = 0.0)]
    pub smoothing: f64,
    /// Require integer counts.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long, default_value = "L")]
    pub row_logit: LogitType,
    #[arg(long, default_value = "L")]
    pub col_logit: LogitType,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    /// Hold the margins at their observed values while fitting.
    #[arg(long)]
    pub fix_margins: bool,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Directory for fit.json, scores.svg and interactions.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, value_delimiter = ',', default_value = "1,2")]
    pub k: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_value = "L,G,C")]
    pub row_logits: Vec<LogitType>,
    #[arg(long, value_delimiter = ',', default_value = "L,G,C")]
    pub col_logits: Vec<LogitType>,
    /// Lambda grid as min:max:step.
    #[arg(long, default_value = "-2:2:0.01", allow_hyphen_values = true, value_parser = parse_range)]
    pub lambda_range: LambdaRange,
    /// Level of the chi-square adequacy test.
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Directory for sweep.json, sweep.csv, fit.json and scores.svg.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

fn parse_range(s: &str) -> Result<LambdaRange, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [min, max, step] = parts.as_slice() else {
        return Err(format!("expected min:max:step, got {s:?}"));
    };
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("not a number: {v:?}"));
    let r = LambdaRange { min: num(min)?, max: num(max)?, step: num(step)? };
    if r.step.is_nan() || r.step <= 0.0 || r.min > r.max {
        return Err(format!("need min <= max and step > 0, got {s:?}"));
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MarginChoice {
    Observed,
    Fitted,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[command(flatten)]
    pub model: ModelArgs,
    /// Multipliers applied to every association coefficient.
    #[arg(long, value_delimiter = ',', default_value = "1,0.5,2.5")]
    pub scale: Vec<f64>,
    #[arg(long, value_enum, default_value_t = MarginChoice::Observed)]
    pub margins: MarginChoice,
    /// Sample size of the synthesised tables (default: observed total).
    #[arg(long)]
    pub total: Option<f64>,
    /// Directory for scenario.json and one CSV table per factor.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Args)]
pub struct InteractionArgs {
    #[command(flatten)]
    pub table: TableArgs,
    #[arg(long, default_value = "L")]
    pub row_logit: LogitType,
    #[arg(long, default_value = "L")]
    pub col_logit: LogitType,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct AlthamArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Second table.
    #[arg(long)]
    pub other: String,
}

#[derive(Debug, Args)]
pub struct IpfArgs {
    #[command(flatten)]
    pub table: TableArgs,
    /// Take the target margins from this table.
    #[arg(long, conflicts_with_all = ["row_margins", "col_margins"])]
    pub target: Option<String>,
    #[arg(long, value_delimiter = ',', requires = "col_margins")]
    pub row_margins: Vec<f64>,
    #[arg(long, value_delimiter = ',', requires = "row_margins")]
    pub col_margins: Vec<f64>,
    /// Total of the output table (default: total of the target margins,
    /// or of the input table when margins are given as proportions).
    #[arg(long)]
    pub total: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    pub name: Option<String>,
}

/// Failure of a command, classified by exit status.
#[derive(Debug)]
pub enum CliError {
    Usage { kind: String, message: String },
    Input(InputError),
    Domain(rcassoc::Error),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage { .. } => 2,
            _ => 1,
        }
    }

    fn body(&self) -> ErrorBody {
        let plain = |kind: &str, message: String| ErrorBody { kind: kind.into(), message, line: None, column: None };
        match self {
            CliError::Usage { kind, message } => plain(kind, message.clone()),
            CliError::Input(InputError::Parse(e)) => ErrorBody {
                kind: "ParseError".into(),
                message: e.message.clone(),
                line: Some(e.line),
                column: Some(e.column),
            },
            CliError::Input(InputError::Io(m)) | CliError::Io(m) => plain("IOError", m.clone()),
            CliError::Input(InputError::Table(e)) | CliError::Domain(e) => plain(e.kind(), e.to_string()),
        }
    }
}

impl From<rcassoc::Error> for CliError {
    fn from(e: rcassoc::Error) -> Self {
        use rcassoc::Error::*;
        // Problems with the requested model rather than the data.
        match e {
            RankOutOfRange { .. } | LambdaOutOfRange(_) | InvalidGrid(_) | EmptyGrid => {
                CliError::Usage { kind: e.kind().into(), message: e.to_string() }
            }
            e => CliError::Domain(e),
        }
    }
}

impl From<InputError> for CliError {
    fn from(e: InputError) -> Self {
        CliError::Input(e)
    }
}

type CliResult<T> = Result<T, CliError>;

fn load(args: &TableArgs) -> CliResult<ContingencyTable> {
    if !(args.smoothing >= 0.0 && args.smoothing.is_finite()) {
        return Err(CliError::Usage {
            kind: "Usage".into(),
            message: format!("smoothing must be nonnegative, got {}", args.smoothing),
        });
    }
    Ok(resolve_table(&args.table, args.strict)?)
}

fn model_spec(m: &ModelArgs) -> CliResult<ModelSpec> {
    Ok(ModelSpec::new(m.k, InteractionSpec::new(m.row_logit, m.col_logit, m.lambda)?))
}

fn fit_options(t: &TableArgs, m: &ModelArgs) -> FitOptions {
    FitOptions { smoothing: t.smoothing, fix_margins: m.fix_margins, ..FitOptions::default() }
}

fn write_file(dir: &Path, name: &str, contents: &str) -> CliResult<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

fn emit(out: &mut dyn Write, text: &str) -> CliResult<()> {
    out.write_all(text.as_bytes()).map_err(|e| CliError::Io(format!("cannot write output: {e}")))
}

fn threads_from_env() -> CliResult<Option<usize>> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(CliError::Usage {
                kind: "Usage".into(),
                message: format!("{THREADS_ENV} must be a positive integer, got {v:?}"),
            }),
        },
    }
}

fn cmd_fit(a: &FitArgs, out: &mut dyn Write) -> CliResult<()> {
    let t = load(&a.table)?;
    let spec = model_spec(&a.model)?;
    spec.check(t.rows(), t.cols())?;
    let res = fit(&t, &spec, &fit_options(&a.table, &a.model))?;
    let json = to_json(&document("fit", FitReport::new(&a.table.table, &t, &res)));
    if let Some(dir) = &a.out {
        write_file(dir, "fit.json", &json)?;
        write_file(dir, "scores.svg", &svg::scores_svg(&res, t.row_labels(), t.col_labels()))?;
        let h = interaction_matrix(&res.fitted, &spec.interaction)?;
        write_file(dir, "interactions.csv", &h.to_csv(t.row_labels(), t.col_labels()))?;
    }
    emit(out, &json)
}

fn cmd_sweep(a: &SweepArgs, out: &mut dyn Write) -> CliResult<()> {
    let t = load(&a.table)?;
    let r = a.lambda_range;
    let grid =
        SweepGrid::new(a.row_logits.clone(), a.col_logits.clone(), a.k.clone()).with_lambda(r.min, r.max, r.step);
    grid.specs(t.rows(), t.cols())?;
    let opts = SweepOptions {
        fit: FitOptions { smoothing: a.table.smoothing, ..FitOptions::default() },
        threads: threads_from_env()?,
    };
    let res = sweep(&t, &grid, &opts)?;
    let sel = select_best(&res, &SelectionPolicy { alpha: a.alpha })?;
    let chosen = fit(&t, &sel.record.spec, &opts.fit)?;
    let grid_report = GridReport {
        k_values: a.k.clone(),
        row_logits: a.row_logits.iter().map(ToString::to_string).collect(),
        col_logits: a.col_logits.iter().map(ToString::to_string).collect(),
        lambda_min: r.min,
        lambda_max: r.max,
        lambda_step: r.step,
    };
    let fit_report = FitReport::new(&a.table.table, &t, &chosen);
    let report = SweepReport::new(TableReport::new(&a.table.table, &t), grid_report, a.alpha, &res, &sel, fit_report);
    let json = to_json(&document("sweep", report));
    if let Some(dir) = &a.out {
        write_file(dir, "sweep.json", &json)?;
        write_file(dir, "sweep.csv", &res.to_csv())?;
        write_file(dir, "fit.json", &to_json(&document("fit", FitReport::new(&a.table.table, &t, &chosen))))?;
        write_file(dir, "scores.svg", &svg::scores_svg(&chosen, t.row_labels(), t.col_labels()))?;
    }
    emit(out, &json)
}

fn cmd_scenario(a: &ScenarioArgs, out: &mut dyn Write) -> CliResult<()> {
    let t = load(&a.table)?;
    let spec = model_spec(&a.model)?;
    spec.check(t.rows(), t.cols())?;
    let base = fit(&t, &spec, &fit_options(&a.table, &a.model))?;
    let policy = match a.margins {
        MarginChoice::Observed => MarginPolicy::Observed,
        MarginChoice::Fitted => MarginPolicy::Fitted,
    };
    let scen = ScenarioSpec { scale_factors: a.scale.clone(), margin_policy: policy, total: a.total };
    let tables = scale_association(&t, &base, &scen, &InversionOptions::default())?;
    let entries = tables.iter().map(|s| (s.factor.to_string(), ScenarioEntry::from(s))).collect();
    let report = ScenarioReport {
        margin_policy: format!("{:?}", a.margins).to_lowercase(),
        total: tables.first().map_or(t.total(), |s| s.counts.total()),
        base: FitReport::new(&a.table.table, &t, &base),
        scenarios: Keyed(entries),
    };
    let json = to_json(&document("scenario", report));
    if let Some(dir) = &a.out {
        write_file(dir, "scenario.json", &json)?;
        for s in &tables {
            write_file(dir, &format!("scenario_{}.csv", s.factor), &table_to_csv(&s.counts))?;
        }
    }
    emit(out, &json)
}

fn cmd_interactions(a: &InteractionArgs, out: &mut dyn Write) -> CliResult<()> {
    let t = load(&a.table)?;
    let spec = InteractionSpec::new(a.row_logit, a.col_logit, a.lambda)?;
    let p = to_probability(&t, a.table.smoothing)?;
    let h = interaction_matrix(&p, &spec)?;
    let text = match a.format {
        Format::Csv => h.to_csv(t.row_labels(), t.col_labels()),
        Format::Json => {
            to_json(&document("interactions", InteractionReport::new(&h, &spec, t.row_labels(), t.col_labels())))
        }
    };
    emit(out, &text)
}

fn cmd_altham(a: &AlthamArgs, out: &mut dyn Write) -> CliResult<()> {
    let first = load(&a.table)?;
    let second = resolve_table(&a.other, a.table.strict)?;
    let d = altham_distance(&to_probability(&first, a.table.smoothing)?, &to_probability(&second, a.table.smoothing)?)?;
    let report = AlthamReport {
        first: TableReport::new(&a.table.table, &first),
        second: TableReport::new(&a.other, &second),
        distance: d,
    };
    emit(out, &to_json(&document("altham", report)))
}

fn cmd_ipf(a: &IpfArgs, out: &mut dyn Write) -> CliResult<()> {
    let t = load(&a.table)?;
    let (target, default_total) = match &a.target {
        Some(src) => {
            let other = resolve_table(src, a.table.strict)?;
            (Margins::of_table(&other), other.total())
        }
        None if !a.row_margins.is_empty() => {
            let sum: f64 = a.row_margins.iter().sum();
            let total = if (sum - 1.0).abs() < 1e-9 { t.total() } else { sum };
            (Margins::new(a.row_margins.clone(), a.col_margins.clone())?, total)
        }
        None => {
            return Err(CliError::Usage {
                kind: "Usage".into(),
                message: "give --target or both --row-margins and --col-margins".into(),
            })
        }
    };
    if target.row.len() != t.rows() || target.col.len() != t.cols() {
        return Err(rcassoc::Error::DimensionMismatch {
            expected: (t.rows(), t.cols()),
            found: (target.row.len(), target.col.len()),
        }
        .into());
    }
    let p = ipf_adjust(&to_probability(&t, a.table.smoothing)?, &target, IPF_TOL, IPF_MAX_ITER)?;
    let adjusted = t.with_counts(p.scaled(a.total.unwrap_or(default_total)))?;
    let text = match a.format {
        Format::Csv => table_to_csv(&adjusted),
        Format::Json => to_json(&document("ipf", TableReport::new(&a.table.table, &adjusted))),
    };
    emit(out, &text)
}

fn cmd_fixtures(a: &FixturesArgs, out: &mut dyn Write) -> CliResult<()> {
    match &a.name {
        None => emit(out, &(fixtures::NAMES.join("\n") + "\n")),
        Some(name) => match fixtures::by_name(name) {
            Some(t) => emit(out, &table_to_csv(&t)),
            None => Err(CliError::Usage {
                kind: "Usage".into(),
                message: format!("unknown fixture {name:?}; expected one of {}", fixtures::NAMES.join(", ")),
            }),
        },
    }
}

/// Executes a parsed command.
pub fn execute(cli: &Cli, out: &mut dyn Write) -> CliResult<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a, out),
        Command::Sweep(a) => cmd_sweep(a, out),
        Command::Scenario(a) => cmd_scenario(a, out),
        Command::Interactions(a) => cmd_interactions(a, out),
        Command::Altham(a) => cmd_altham(a, out),
        Command::Ipf(a) => cmd_ipf(a, out),
        Command::Fixtures(a) => cmd_fixtures(a, out),
    }
}

fn report_error(err: &mut dyn Write, e: &CliError) {
    let json = serde_json::to_string(&document("error", ErrorReport { error: e.body() })).expect("serialise");
    let _ = writeln!(err, "{json}");
}

/// Parses arguments, runs the command and returns the exit status.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                let _ = write!(out, "{e}");
                return 0;
            }
            let message = e.render().to_string();
            let _ = write!(err, "{message}");
            report_error(err, &CliError::Usage { kind: "Usage".into(), message: message.trim().to_string() });
            return 2;
        }
    };
    match execute(&cli, out) {
        Ok(()) => 0,
        Err(e) => {
            report_error(err, &e);
            e.exit_code()
        }
    }
}
