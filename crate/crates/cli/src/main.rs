//! `bifurc`: integer mean-variance allocation and Ising ground states by
//! simulated bifurcation.
//!
//! Exit codes: 0 on success, 1 on input or configuration errors, 2 when the
//! solver hit `max_steps` before its stop window settled (the partial result
//! is still written).

mod manifest;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::Value;

use bifurc_core::bench::{self, StudySpec};
use bifurc_core::encoding::{alpha_from_capital, exhaustive_weight_search, ising_to_markowitz};
use bifurc_core::ising::{brute_force_ground_state_with_ceiling, DEFAULT_ORACLE_CEILING};
use bifurc_core::markets::{self, MuMode, Window};
use bifurc_core::sb::{self, auto_xi0, Xi0};
use bifurc_core::{
    decode_spins, encode_weights, energy, markowitz_to_ising, utility, Ising64, Markowitz64,
    SolverConfig,
};

use manifest::RunManifest;
use output::{parse_structured, write_payload, Format, Table};

const CEILING_VAR: &str = "BIFURC_ORACLE_CEILING";

#[derive(Parser, Debug)]
#[command(name = "bifurc", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
#[allow(clippy::large_enum_variant)]
enum Command {
    /// Solve a mean-variance problem or an Ising instance.
    Solve(SolveArgs),
    /// Exact optimum by exhaustive enumeration.
    Oracle(OracleArgs),
    /// Estimate a mean-variance problem from a closing-price CSV.
    Ingest(IngestArgs),
    /// Randomized accuracy study against the exact oracle.
    Study(StudyArgs),
    /// Convert between problem and Ising JSON.
    Convert(ConvertArgs),
}

/// Solver settings. Unset flags fall back to `--config`, then to the
/// built-in defaults.
#[derive(Args, Debug, Default, Clone)]
struct SolverArgs {
    /// Solver settings file (TOML or JSON)
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seed for the initial oscillator positions [default: 0]
    #[arg(long)]
    seed: Option<u64>,
    /// Macro-step length [default: 0.01]
    #[arg(long)]
    dt: Option<f64>,
    /// Symplectic sub-steps per macro-step [default: 2]
    #[arg(long)]
    msym: Option<u32>,
    /// Macro-steps between stop-window samples [default: 60]
    #[arg(long)]
    sample_period: Option<u64>,
    /// Stop-window length in samples [default: 35]
    #[arg(long)]
    window: Option<usize>,
    /// Step cap [default: 100000]
    #[arg(long)]
    max_steps: Option<u64>,
    /// Coupling scale, `auto` or a positive number [default: auto]
    #[arg(long)]
    xi0: Option<Xi0>,
    /// Pump slope [default: 0.01]
    #[arg(long)]
    pump_slope: Option<f64>,
    /// Kerr coefficient [default: 1]
    #[arg(long)]
    kerr: Option<f64>,
    /// Detuning [default: 1]
    #[arg(long)]
    detuning: Option<f64>,
}

impl SolverArgs {
    fn apply(&self, mut c: SolverConfig) -> SolverConfig {
        let SolverArgs {
            config: _,
            seed,
            dt,
            msym,
            sample_period,
            window,
            max_steps,
            xi0,
            pump_slope,
            kerr,
            detuning,
        } = self.clone();
        c.seed = seed.unwrap_or(c.seed);
        c.dt = dt.unwrap_or(c.dt);
        c.substeps = msym.unwrap_or(c.substeps);
        c.sample_period = sample_period.unwrap_or(c.sample_period);
        c.window_size = window.unwrap_or(c.window_size);
        c.max_steps = max_steps.unwrap_or(c.max_steps);
        c.xi0 = xi0.unwrap_or(c.xi0);
        c.pump_slope = pump_slope.unwrap_or(c.pump_slope);
        c.kerr = kerr.unwrap_or(c.kerr);
        c.detuning = detuning.unwrap_or(c.detuning);
        c
    }

    fn resolve(&self, manifest: &mut RunManifest) -> Result<SolverConfig> {
        let base = match &self.config {
            Some(path) => {
                let bytes = manifest.read_input(path)?;
                parse_structured(path, &bytes)?
            }
            None => SolverConfig::default(),
        };
        let config = self.apply(base);
        config.validate()?;
        manifest.seed = config.seed;
        Ok(config)
    }
}

#[derive(Args, Debug, Default, Clone)]
struct ProblemArgs {
    /// Risk aversion; overrides the problem file [default for price input: 1]
    #[arg(long)]
    gamma: Option<f64>,
    /// Bits per asset weight; overrides the problem file [default for price input: 1]
    #[arg(long, conflicts_with = "capital")]
    alpha: Option<u32>,
    /// Capital budget; sets alpha = floor(log2(capital / assets)) + 1
    #[arg(long)]
    capital: Option<f64>,
}

impl ProblemArgs {
    fn alpha_for(&self, assets: usize) -> Result<Option<u32>> {
        Ok(match (self.alpha, self.capital) {
            (Some(a), _) => Some(a),
            (None, Some(c)) => Some(alpha_from_capital(c, assets)?),
            (None, None) => None,
        })
    }

    fn apply(&self, mut p: Markowitz64) -> Result<Markowitz64> {
        if let Some(g) = self.gamma {
            p = p.with_gamma(g)?;
        }
        if let Some(a) = self.alpha_for(p.assets())? {
            p = p.with_alpha(a)?;
        }
        Ok(p)
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, Default)]
enum MuModeArg {
    #[default]
    Mean,
    LastDay,
}

impl From<MuModeArg> for MuMode {
    fn from(m: MuModeArg) -> Self {
        match m {
            MuModeArg::Mean => MuMode::Mean,
            MuModeArg::LastDay => MuMode::LastDay,
        }
    }
}

#[derive(Args, Debug, Default, Clone)]
struct WindowArgs {
    /// First date of the estimation window (YYYY-MM-DD)
    #[arg(long)]
    start: Option<NaiveDate>,
    /// Last date of the estimation window (YYYY-MM-DD)
    #[arg(long)]
    end: Option<NaiveDate>,
    /// Keep only the trailing N dates
    #[arg(long)]
    last: Option<usize>,
    /// How daily returns collapse into expected returns
    #[arg(long, value_enum, default_value_t)]
    mu_mode: MuModeArg,
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Problem or Ising JSON file
    #[arg(required_unless_present = "prices", conflicts_with = "prices")]
    input: Option<PathBuf>,
    /// Closing-price CSV to estimate the problem from
    #[arg(long)]
    prices: Option<PathBuf>,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    window: WindowArgs,
    #[command(flatten)]
    solver: SolverArgs,
    /// Write the sampled trajectory (step, t, spin_*, energy) as CSV
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Report destination; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
    /// Also write the (ticker, weight) CSV here
    #[arg(long)]
    weights: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Problem or Ising JSON file
    input: PathBuf,
    #[command(flatten)]
    problem: ProblemArgs,
    #[arg(short, long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t)]
    format: Format,
}

#[derive(Args, Debug)]
struct IngestArgs {
    /// Closing-price CSV: `date,TICKER1,TICKER2,...`
    prices: PathBuf,
    #[command(flatten)]
    problem: ProblemArgs,
    #[command(flatten)]
    window: WindowArgs,
    /// Problem JSON destination; stdout when omitted
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct StudyArgs {
    /// Study spec (TOML or JSON)
    #[arg(required_unless_present = "preset", conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in study: accuracy-grid, gap-grid, onebit-curve or desk
    #[arg(long)]
    preset: Option<String>,
    /// Override the number of trials per cell
    #[arg(long)]
    trials: Option<usize>,
    /// Override the study seed
    #[arg(long)]
    seed: Option<u64>,
    /// Keep wall-clock timings in the outputs (makes them run-dependent)
    #[arg(long)]
    timings: bool,
    /// Directory for the report files
    #[arg(short, long)]
    out_dir: PathBuf,
}

#[derive(Args, Debug)]
struct ConvertArgs {
    /// Problem JSON (converted to Ising) or Ising JSON (converted back)
    input: PathBuf,
    /// Risk aversion used for an Ising input; overrides the problem file otherwise
    #[arg(long)]
    gamma: Option<f64>,
    /// Bits per weight used for an Ising input; overrides the problem file otherwise
    #[arg(long)]
    alpha: Option<u32>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

enum Status {
    Done,
    NotConverged { steps: u64 },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let status = match cli.command {
        Command::Solve(a) => cmd_solve(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Ingest(a) => cmd_ingest(a),
        Command::Study(a) => cmd_study(a),
        Command::Convert(a) => cmd_convert(a),
    };
    match status {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged { steps }) => {
            eprintln!("warning: solver did not converge within {steps} steps");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn oracle_ceiling() -> Result<usize> {
    match std::env::var(CEILING_VAR) {
        Ok(v) => v
            .trim()
            .parse()
            .with_context(|| format!("{CEILING_VAR} must be a non-negative integer, got `{v}`")),
        Err(std::env::VarError::NotPresent) => Ok(DEFAULT_ORACLE_CEILING),
        Err(e) => Err(e).context(CEILING_VAR),
    }
}

enum Input {
    Problem {
        problem: Markowitz64,
        tickers: Vec<String>,
        /// Where the problem came from, for the manifest.
        source: Value,
    },
    Ising {
        model: Ising64,
        doc: Value,
    },
}

fn default_tickers(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("asset_{i}")).collect()
}

fn load_json_input(path: &Path, manifest: &mut RunManifest) -> Result<Input> {
    let bytes = manifest.read_input(path)?;
    let doc: Value =
        serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
    if doc.get("J").is_some() {
        let model = serde_json::from_value(doc.clone())
            .with_context(|| format!("reading Ising instance from {}", path.display()))?;
        return Ok(Input::Ising { model, doc });
    }
    let problem: Markowitz64 = serde_json::from_value(doc.clone())
        .with_context(|| format!("reading problem from {}", path.display()))?;
    let tickers = match doc.get("tickers") {
        Some(t) => serde_json::from_value::<Vec<String>>(t.clone()).context("tickers")?,
        None => default_tickers(problem.assets()),
    };
    if tickers.len() != problem.assets() {
        bail!(
            "{} tickers for {} assets in {}",
            tickers.len(),
            problem.assets(),
            path.display()
        );
    }
    Ok(Input::Problem {
        problem,
        tickers,
        source: serde_json::json!({ "kind": "problem" }),
    })
}

#[derive(Serialize)]
struct IngestInfo {
    kind: &'static str,
    window: Window,
    mu_mode: MuMode,
    dates_used: usize,
    dropped_rows: usize,
    first_date: Option<NaiveDate>,
    last_date: Option<NaiveDate>,
}

fn problem_from_prices(
    path: &Path,
    problem_args: &ProblemArgs,
    window_args: &WindowArgs,
    manifest: &mut RunManifest,
) -> Result<(Markowitz64, Vec<String>, IngestInfo)> {
    let bytes = manifest.read_input(path)?;
    let series = markets::ingest_prices::<f64, _>(bytes.as_slice())
        .with_context(|| format!("ingesting {}", path.display()))?;
    let window = Window {
        start: window_args.start,
        end: window_args.end,
        last: window_args.last,
    };
    let series = series.windowed(&window);
    let mu_mode = MuMode::from(window_args.mu_mode);
    let returns = markets::daily_returns(&series)?;
    let moments = markets::estimate_moments(&returns, mu_mode)?;
    let alpha = problem_args.alpha_for(series.tickers.len())?.unwrap_or(1);
    let gamma = problem_args.gamma.unwrap_or(1.0);
    let problem = markets::assemble_problem(moments.mu, moments.sigma, gamma, alpha)?;
    let info = IngestInfo {
        kind: "prices",
        window,
        mu_mode,
        dates_used: series.dates.len(),
        dropped_rows: series.dropped_rows,
        first_date: series.dates.first().copied(),
        last_date: series.dates.last().copied(),
    };
    Ok((problem, series.tickers, info))
}

fn selected(tickers: &[String], weights: &[u64], alpha: u32) -> Option<Vec<String>> {
    (alpha == 1).then(|| {
        tickers
            .iter()
            .zip(weights)
            .filter(|(_, &w)| w > 0)
            .map(|(t, _)| t.clone())
            .collect()
    })
}

#[derive(Serialize)]
struct AllocationReport {
    tickers: Vec<String>,
    weights: Vec<u64>,
    utility: f64,
    ising_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    selected: Option<Vec<String>>,
    manifest: RunManifest,
}

impl AllocationReport {
    fn table(&self) -> Table {
        Table {
            header: vec!["ticker".into(), "weight".into()],
            rows: self
                .tickers
                .iter()
                .zip(&self.weights)
                .map(|(t, w)| vec![t.clone(), w.to_string()])
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct SpinReport {
    spins: Vec<i8>,
    ising_energy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    converged: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    steps: Option<u64>,
    manifest: RunManifest,
}

impl SpinReport {
    fn table(&self) -> Table {
        Table {
            header: vec!["index".into(), "spin".into()],
            rows: self
                .spins
                .iter()
                .enumerate()
                .map(|(i, s)| vec![i.to_string(), s.to_string()])
                .collect(),
        }
    }
}

#[derive(Serialize)]
struct SolveConfigRecord<'a> {
    source: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<u32>,
    solver: &'a SolverConfig,
    /// Numeric coupling scale actually used.
    xi0_resolved: f64,
}

fn write_trace(path: &Path, model: &Ising64, result: &bifurc_core::SolverResult64) -> Result<()> {
    let mut header = vec!["step".to_string(), "t".to_string()];
    header.extend((0..model.n()).map(|i| format!("spin_{i}")));
    header.push("energy".into());
    let rows = result
        .trace
        .iter()
        .flatten()
        .map(|s| {
            let mut row = vec![s.step.to_string(), s.t.to_string()];
            row.extend(s.signs.iter().map(|v| v.to_string()));
            row.push(s.energy.to_string());
            row
        })
        .collect();
    Table { header, rows }.write_file(path)
}

fn cmd_solve(args: SolveArgs) -> Result<Status> {
    let mut manifest = RunManifest::start("solve", 0);
    let input = match (&args.input, &args.prices) {
        (Some(path), _) => match load_json_input(path, &mut manifest)? {
            Input::Problem {
                problem,
                tickers,
                source,
            } => Input::Problem {
                problem: args.problem.apply(problem)?,
                tickers,
                source,
            },
            ising => ising,
        },
        (None, Some(prices)) => {
            let (problem, tickers, info) =
                problem_from_prices(prices, &args.problem, &args.window, &mut manifest)?;
            Input::Problem {
                problem,
                tickers,
                source: serde_json::to_value(info)?,
            }
        }
        (None, None) => bail!("need a problem file or --prices"),
    };

    let mut config = args.solver.resolve(&mut manifest)?;
    config.trace = args.trace.is_some();

    let model = match &input {
        Input::Problem { problem, .. } => markowitz_to_ising(problem)?.model,
        Input::Ising { model, .. } => model.clone(),
    };
    let xi0_resolved = match config.xi0 {
        Xi0::Fixed(v) => v,
        Xi0::Auto => auto_xi0(&model, config.detuning),
    };
    let (source, gamma, alpha) = match &input {
        Input::Problem {
            problem, source, ..
        } => (source.clone(), Some(problem.gamma()), Some(problem.alpha())),
        Input::Ising { .. } => (serde_json::json!({ "kind": "ising" }), None, None),
    };
    manifest.set_config(SolveConfigRecord {
        source,
        gamma,
        alpha,
        solver: &config,
        xi0_resolved,
    })?;

    let result = sb::solve(&model, &config)?;
    let status = if result.converged {
        Status::Done
    } else {
        Status::NotConverged {
            steps: result.steps_run,
        }
    };

    if let Some(path) = &args.trace {
        write_trace(path, &model, &result)?;
        manifest.output(path);
    }

    match input {
        Input::Problem {
            problem, tickers, ..
        } => {
            let weights = decode_spins(&result.spins, problem.assets(), problem.alpha())?;
            let value = utility(&problem, &weights)?;
            if let Some(path) = &args.weights {
                manifest.output(path);
            }
            let report = AllocationReport {
                selected: selected(&tickers, &weights.0, problem.alpha()),
                tickers,
                weights: weights.0,
                utility: value,
                ising_energy: result.energy,
                converged: Some(result.converged),
                steps: Some(result.steps_run),
                manifest: manifest.finish(),
            };
            if let Some(path) = &args.weights {
                report.table().write_file(path)?;
            }
            write_payload(
                &report,
                &report.manifest,
                || report.table(),
                args.format,
                args.output.as_deref(),
            )?;
        }
        Input::Ising { .. } => {
            if args.weights.is_some() {
                bail!("--weights needs a mean-variance problem input");
            }
            let report = SpinReport {
                spins: result.spins.as_slice().to_vec(),
                ising_energy: result.energy,
                converged: Some(result.converged),
                steps: Some(result.steps_run),
                manifest: manifest.finish(),
            };
            write_payload(
                &report,
                &report.manifest,
                || report.table(),
                args.format,
                args.output.as_deref(),
            )?;
        }
    }
    Ok(status)
}

fn cmd_oracle(args: OracleArgs) -> Result<Status> {
    let mut manifest = RunManifest::start("oracle", 0);
    let ceiling = oracle_ceiling()?;
    let input = load_json_input(&args.input, &mut manifest)?;
    let too_large = || {
        format!("exhaustive search is capped at {ceiling} spins; set {CEILING_VAR} to change it")
    };
    match input {
        Input::Problem {
            problem, tickers, ..
        } => {
            let problem = args.problem.apply(problem)?;
            manifest.set_config(serde_json::json!({
                "gamma": problem.gamma(),
                "alpha": problem.alpha(),
                "oracle_ceiling": ceiling,
            }))?;
            let best = exhaustive_weight_search(&problem, ceiling).with_context(too_large)?;
            let reduction = markowitz_to_ising(&problem)?;
            let spins = encode_weights(&best.weights, problem.alpha())?;
            let report = AllocationReport {
                selected: selected(&tickers, &best.weights.0, problem.alpha()),
                tickers,
                weights: best.weights.0,
                utility: best.utility,
                ising_energy: energy(&reduction.model, &spins)?,
                converged: None,
                steps: None,
                manifest: manifest.finish(),
            };
            write_payload(
                &report,
                &report.manifest,
                || report.table(),
                args.format,
                args.output.as_deref(),
            )?;
        }
        Input::Ising { model, .. } => {
            manifest.set_config(serde_json::json!({ "oracle_ceiling": ceiling }))?;
            let ground =
                brute_force_ground_state_with_ceiling(&model, ceiling).with_context(too_large)?;
            let report = SpinReport {
                spins: ground.spins.as_slice().to_vec(),
                ising_energy: ground.energy,
                converged: None,
                steps: None,
                manifest: manifest.finish(),
            };
            write_payload(
                &report,
                &report.manifest,
                || report.table(),
                args.format,
                args.output.as_deref(),
            )?;
        }
    }
    Ok(Status::Done)
}

fn cmd_ingest(args: IngestArgs) -> Result<Status> {
    let mut manifest = RunManifest::start("ingest", 0);
    let (problem, tickers, info) =
        problem_from_prices(&args.prices, &args.problem, &args.window, &mut manifest)?;
    manifest.set_config(serde_json::json!({
        "gamma": problem.gamma(),
        "alpha": problem.alpha(),
        "capital": args.problem.capital,
        "ingest": info,
    }))?;
    let mut doc = serde_json::to_value(&problem)?;
    doc["tickers"] = serde_json::to_value(&tickers)?;
    if let Some(path) = &args.output {
        manifest.output(path);
    }
    doc["manifest"] = serde_json::to_value(manifest.finish())?;
    output::write_json(&doc, args.output.as_deref())?;
    Ok(Status::Done)
}

fn load_study_spec(args: &StudyArgs, manifest: &mut RunManifest) -> Result<StudySpec> {
    let mut spec = match (&args.spec, &args.preset) {
        (Some(path), _) => {
            let bytes = manifest.read_input(path)?;
            parse_structured(path, &bytes)?
        }
        (None, Some(name)) => StudySpec::preset(name).with_context(|| {
            format!(
                "unknown preset `{name}`; expected one of {}",
                StudySpec::PRESETS.join(", ")
            )
        })?,
        (None, None) => bail!("need a study spec file or --preset"),
    };
    if let Some(t) = args.trials {
        spec.trials = t;
    }
    if let Some(s) = args.seed {
        spec.seed = s;
    }
    if std::env::var_os(CEILING_VAR).is_some() {
        spec.oracle_ceiling = oracle_ceiling()?;
    }
    spec.validate()?;
    Ok(spec)
}

#[derive(Serialize)]
struct StudyDocument<'a> {
    #[serde(flatten)]
    report: &'a bench::StudyReport,
    manifest: RunManifest,
}

fn cmd_study(args: StudyArgs) -> Result<Status> {
    let mut manifest = RunManifest::start("study", 0);
    let spec = load_study_spec(&args, &mut manifest)?;
    manifest.seed = spec.seed;
    manifest.set_config(serde_json::json!({
        "preset": args.preset,
        "timings": args.timings,
        "study": spec,
    }))?;

    let report = bench::run_study::<f64>(&spec)?;
    let report = if args.timings {
        report
    } else {
        report.without_timings()
    };

    let dir = &args.out_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    type WriteCsv = fn(&bench::StudyReport, &mut Vec<u8>) -> bifurc_core::Result<()>;
    let csv_outputs: [(&str, WriteCsv); 6] = [
        ("summary.csv", |r, w| bench::write_summary_csv(r, w)),
        ("trials.csv", |r, w| bench::write_trials_csv(r, w)),
        ("table_exact_match.csv", |r, w| {
            bench::write_table_csv(r, bench::TableMetric::ExactMatchPct, w)
        }),
        ("table_gap_ising.csv", |r, w| {
            bench::write_table_csv(r, bench::TableMetric::IsingGapE4, w)
        }),
        ("table_gap_utility.csv", |r, w| {
            bench::write_table_csv(r, bench::TableMetric::UtilityGapE4, w)
        }),
        ("accuracy_curve.csv", |r, w| {
            bench::write_accuracy_curve_csv(r, w)
        }),
    ];
    for (name, write) in csv_outputs {
        let path = dir.join(name);
        let mut buf = Vec::new();
        write(&report, &mut buf)?;
        std::fs::write(&path, buf).with_context(|| format!("writing {}", path.display()))?;
        manifest.output(&path);
    }
    let report_path = dir.join("report.json");
    manifest.output(&report_path);
    let doc = StudyDocument {
        report: &report,
        manifest: manifest.finish(),
    };
    output::write_json(&doc, Some(&report_path))?;

    for c in &report.cells {
        eprintln!(
            "N={:<3} alpha={} exact={:>6.2}% gap_ising={:.3e} hamming={:.4}",
            c.assets, c.alpha, c.exact_match_pct, c.mean_rel_gap_ising, c.mean_hamming_accuracy
        );
    }
    Ok(Status::Done)
}

fn cmd_convert(args: ConvertArgs) -> Result<Status> {
    let mut manifest = RunManifest::start("convert", 0);
    let input = load_json_input(&args.input, &mut manifest)?;
    let doc = match input {
        Input::Problem {
            problem, tickers, ..
        } => {
            let overrides = ProblemArgs {
                gamma: args.gamma,
                alpha: args.alpha,
                capital: None,
            };
            let problem = overrides.apply(problem)?;
            let reduction = markowitz_to_ising(&problem)?;
            manifest.set_config(serde_json::json!({
                "direction": "problem-to-ising",
                "gamma": problem.gamma(),
                "alpha": problem.alpha(),
            }))?;
            let mut doc = serde_json::to_value(&reduction.model)?;
            doc["offset"] = reduction.offset.into();
            doc["gamma"] = problem.gamma().into();
            doc["alpha"] = problem.alpha().into();
            doc["tickers"] = serde_json::to_value(tickers)?;
            doc
        }
        Input::Ising { model, doc } => {
            let gamma = match args.gamma {
                Some(g) => g,
                None => doc
                    .get("gamma")
                    .and_then(Value::as_f64)
                    .context("Ising input has no `gamma`; pass --gamma")?,
            };
            let alpha = match args.alpha {
                Some(a) => a,
                None => doc
                    .get("alpha")
                    .and_then(Value::as_u64)
                    .context("Ising input has no `alpha`; pass --alpha")?
                    .try_into()
                    .context("alpha out of range")?,
            };
            let problem = ising_to_markowitz(&model, gamma, alpha)?;
            manifest.set_config(serde_json::json!({
                "direction": "ising-to-problem",
                "gamma": gamma,
                "alpha": alpha,
            }))?;
            let mut out = serde_json::to_value(&problem)?;
            if let Some(t) = doc.get("tickers") {
                out["tickers"] = t.clone();
            }
            out
        }
    };
    let mut doc = doc;
    if let Some(path) = &args.output {
        manifest.output(path);
    }
    doc["manifest"] = serde_json::to_value(manifest.finish())?;
    output::write_json(&doc, args.output.as_deref())?;
    Ok(Status::Done)
}
