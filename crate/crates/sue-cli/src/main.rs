//! `sue` — count-data models with a single unusual event.
//!
//! Subcommands: `fit`, `scan`, `pmf`, `simulate`, `compare`, `surface`.
//! Exit codes: 0 success, 1 input error, 2 numeric failure / non-convergence.

use std::fmt::Write as _;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sue_core::optimize::{fit, scan_best, scan_gamma, OptimizerSettings, StartStrategy};
use sue_core::regression::{CountDataset, Family};
use sue_core::simulate::{merge_histograms, simulate_paths, EmpiricalPmf};
use sue_core::sue::{sue_pmf_table, vm_surface, PmfForm, SueParams};

use sue_cli::data;
use sue_cli::report::{fmt_machine, FitReport};

#[derive(Parser)]
#[command(name = "sue", version, about = "Count-data regression with a single unusual event")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit one model to a dataset and print a report.
    Fit(FitArgs),
    /// Fit the SUE model across a range of γ values.
    Scan(ScanArgs),
    /// Tabulate the SUE pmf as CSV.
    Pmf(PmfArgs),
    /// Monte Carlo simulation of the SUE counting process.
    Simulate(SimulateArgs),
    /// Fit several models and emit plotting data (frequencies, moments).
    Compare(CompareArgs),
    /// Variance-mean-ratio surface over a (λ, α) grid.
    Surface(SurfaceArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Bundled dataset name (fertility, takeover_bids) or a CSV file path.
    #[arg(long)]
    data: String,
    /// Response column (required for non-bundled files).
    #[arg(long)]
    response: Option<String>,
    /// Comma-separated covariate columns (defaults to the bundled schema, or
    /// every non-response column for external files).
    #[arg(long, value_delimiter = ',')]
    covariates: Option<Vec<String>>,
    /// Observation window t.
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

impl DataArgs {
    fn load(&self) -> Result<CountDataset> {
        data::load_dataset(
            &self.data,
            self.response.as_deref(),
            self.covariates.as_deref(),
            self.t,
        )
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Poisson,
    Gamma,
    Sue,
}

#[derive(Clone, Copy, ValueEnum)]
enum StartArg {
    Poisson,
    Zero,
}

impl From<StartArg> for StartStrategy {
    fn from(s: StartArg) -> Self {
        match s {
            StartArg::Poisson => StartStrategy::PoissonWarmStart,
            StartArg::Zero => StartStrategy::Zeros,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Table,
    Csv,
}

#[derive(Args)]
struct OptArgs {
    /// Optimizer start point.
    #[arg(long, value_enum, default_value = "poisson")]
    start: StartArg,
    #[arg(long, default_value_t = 500)]
    max_iters: usize,
    /// Gradient max-norm convergence tolerance.
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
}

impl OptArgs {
    fn settings(&self) -> OptimizerSettings {
        OptimizerSettings {
            max_iters: self.max_iters,
            grad_tol: self.tol,
            ..OptimizerSettings::default()
        }
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, value_enum)]
    model: ModelArg,
    /// Unusual-event index γ (SUE model only).
    #[arg(long, default_value_t = 1)]
    gamma: u64,
    #[command(flatten)]
    opt: OptArgs,
    /// Largest count in the frequency tables (default: max observed count).
    #[arg(long)]
    nmax: Option<u64>,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct ScanArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 1)]
    gamma_min: u64,
    #[arg(long, default_value_t = 6)]
    gamma_max: u64,
    #[command(flatten)]
    opt: OptArgs,
    #[arg(long, value_enum, default_value = "json")]
    format: FormatArg,
}

#[derive(Args)]
struct PmfArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: u64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long)]
    nmax: u64,
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    lambda: f64,
    #[arg(long)]
    alpha: f64,
    #[arg(long)]
    gamma: u64,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 100_000)]
    paths: u64,
    #[arg(long, default_value_t = 0x5eed)]
    seed: u64,
    /// Per-path count cap (guards runaway parameters).
    #[arg(long, default_value_t = 10_000)]
    nmax: u64,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Comma-separated model list: poisson, gamma, sueN (e.g. sue3).
    #[arg(long, value_delimiter = ',')]
    models: Vec<String>,
    #[command(flatten)]
    opt: OptArgs,
    /// Directory for frequencies.csv and moments.csv.
    #[arg(long, default_value = ".")]
    out_dir: String,
    /// Largest count in the frequency table (default: max observed count).
    #[arg(long)]
    nmax: Option<u64>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long)]
    gamma: u64,
    #[arg(long, default_value_t = 0.1)]
    lambda_min: f64,
    #[arg(long, default_value_t = 5.0)]
    lambda_max: f64,
    #[arg(long, default_value_t = 50)]
    lambda_steps: usize,
    #[arg(long, default_value_t = 0.05)]
    alpha_min: f64,
    #[arg(long, default_value_t = 3.0)]
    alpha_max: f64,
    #[arg(long, default_value_t = 60)]
    alpha_steps: usize,
    #[arg(long, default_value_t = 1.0)]
    t: f64,
}

/// Failure category, mapped to the exit-code contract.
enum CliError {
    /// Bad input: flags, files, schema, data values → exit 1.
    Input(anyhow::Error),
    /// Numeric failure or non-convergence → exit 2.
    Numeric(anyhow::Error),
}

fn input_err(e: anyhow::Error) -> CliError {
    CliError::Input(e)
}

fn numeric_err(e: impl std::fmt::Display) -> CliError {
    CliError::Numeric(anyhow!("{e}"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            // clap handles --help/--version as "errors"; keep their exit 0.
            if e.use_stderr() {
                eprint!("{e}");
                return ExitCode::from(1);
            }
            print!("{e}");
            return ExitCode::SUCCESS;
        }
    };
    let result = match cli.command {
        Command::Fit(args) => cmd_fit(&args),
        Command::Scan(args) => cmd_scan(&args),
        Command::Pmf(args) => cmd_pmf(&args),
        Command::Simulate(args) => cmd_simulate(&args),
        Command::Compare(args) => cmd_compare(&args),
        Command::Surface(args) => cmd_surface(&args),
    };
    match result {
        Ok(code) => code,
        Err(CliError::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(CliError::Numeric(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn parse_model(model: ModelArg, gamma: u64) -> Result<Family> {
    Ok(match model {
        ModelArg::Poisson => Family::Poisson,
        ModelArg::Gamma => Family::GammaCount,
        ModelArg::Sue => {
            if gamma < 1 {
                bail!("--gamma must be at least 1");
            }
            Family::Sue { gamma_event: gamma }
        }
    })
}

fn cmd_fit(args: &FitArgs) -> Result<ExitCode, CliError> {
    let dataset = args.data.load().map_err(input_err)?;
    let family = parse_model(args.model, args.gamma).map_err(input_err)?;
    let start = Instant::now();
    let result = fit(&dataset, &family, &args.opt.settings(), args.opt.start.into())
        .map_err(classify_fit_error)?;
    let elapsed = start.elapsed().as_secs_f64();
    let n_max = args.nmax.unwrap_or_else(|| dataset.max_count());
    let report = FitReport::build(&dataset, &result, n_max, elapsed).map_err(numeric_err)?;
    match args.format {
        FormatArg::Json => println!("{}", report.to_json()),
        FormatArg::Table => print!("{}", report.to_table()),
        FormatArg::Csv => print!("{}", report.to_csv()),
    }
    if report.converged {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("warning: optimizer did not converge (gradient max-norm {:.3e})", report.grad_norm);
        Ok(ExitCode::from(2))
    }
}

/// Rank deficiency is a data problem; everything else numeric.
fn classify_fit_error(e: sue_core::NumericError) -> CliError {
    match &e {
        sue_core::NumericError::RankDeficient { .. } | sue_core::NumericError::Domain(_) => {
            CliError::Input(anyhow!("{e}"))
        }
        _ => CliError::Numeric(anyhow!("{e}")),
    }
}

#[derive(Serialize)]
struct ScanReportRow {
    gamma: u64,
    log_likelihood: Option<f64>,
    aic: Option<f64>,
    converged: Option<bool>,
    error: Option<String>,
    best: bool,
}

fn cmd_scan(args: &ScanArgs) -> Result<ExitCode, CliError> {
    if args.gamma_min < 1 || args.gamma_max < args.gamma_min {
        return Err(input_err(anyhow!(
            "invalid γ range {}..{}",
            args.gamma_min,
            args.gamma_max
        )));
    }
    let dataset = args.data.load().map_err(input_err)?;
    let rows = scan_gamma(
        &dataset,
        args.gamma_min..=args.gamma_max,
        &args.opt.settings(),
        args.opt.start.into(),
    );
    let best = scan_best(&rows);
    let report: Vec<ScanReportRow> = rows
        .iter()
        .map(|r| match &r.result {
            Ok(f) => ScanReportRow {
                gamma: r.gamma_event,
                log_likelihood: Some(f.log_likelihood),
                aic: Some(f.aic),
                converged: Some(f.converged),
                error: None,
                best: Some(r.gamma_event) == best,
            },
            Err(e) => ScanReportRow {
                gamma: r.gamma_event,
                log_likelihood: None,
                aic: None,
                converged: None,
                error: Some(e.to_string()),
                best: false,
            },
        })
        .collect();
    match args.format {
        FormatArg::Json => {
            let doc = serde_json::json!({ "schema": 1, "rows": report, "best_gamma": best });
            println!("{}", serde_json::to_string_pretty(&doc).unwrap());
        }
        FormatArg::Table => {
            println!("{:>5} {:>14} {:>14} {:>10} {:>5}", "gamma", "loglik", "AIC", "converged", "best");
            for r in &report {
                match (&r.log_likelihood, &r.error) {
                    (Some(ll), _) => println!(
                        "{:>5} {:>14.4} {:>14.4} {:>10} {:>5}",
                        r.gamma,
                        ll,
                        r.aic.unwrap(),
                        r.converged.unwrap(),
                        if r.best { "*" } else { "" }
                    ),
                    (None, Some(e)) => println!("{:>5} failed: {e}", r.gamma),
                    _ => unreachable!(),
                }
            }
        }
        FormatArg::Csv => {
            println!("gamma,log_likelihood,aic,converged,best,error");
            for r in &report {
                println!(
                    "{},{},{},{},{},{}",
                    r.gamma,
                    r.log_likelihood.map(fmt_machine).unwrap_or_default(),
                    r.aic.map(fmt_machine).unwrap_or_default(),
                    r.converged.map(|b| b.to_string()).unwrap_or_default(),
                    r.best,
                    r.error.clone().unwrap_or_default()
                );
            }
        }
    }
    if best.is_none() {
        return Err(CliError::Numeric(anyhow!("every γ in the scan failed")));
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_pmf(args: &PmfArgs) -> Result<ExitCode, CliError> {
    let params = SueParams::new(args.lambda, args.alpha, args.gamma, args.t)
        .map_err(|e| input_err(anyhow!("{e}")))?;
    let table = sue_pmf_table(&params, args.nmax).map_err(numeric_err)?;
    println!("n,probability,form_used,terms_used");
    for (n, entry) in table.entries.iter().enumerate() {
        let form = match entry.form {
            PmfForm::Direct => "direct",
            PmfForm::Series => "series",
        };
        println!("{n},{},{form},{}", fmt_machine(entry.prob), entry.terms);
    }
    println!("# tail_mass={}", fmt_machine(table.tail_mass));
    Ok(ExitCode::SUCCESS)
}

/// Worker count from SUE_NUM_THREADS (0 or unset = auto).
fn num_threads() -> usize {
    let auto = || std::thread::available_parallelism().map_or(1, |n| n.get());
    match std::env::var("SUE_NUM_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) | Err(_) => auto(),
            Ok(n) => n,
        },
        Err(_) => auto(),
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<ExitCode, CliError> {
    let params = SueParams::new(args.lambda, args.alpha, args.gamma, args.t)
        .map_err(|e| input_err(anyhow!("{e}")))?;
    if args.paths == 0 {
        return Err(input_err(anyhow!("--paths must be positive")));
    }
    let workers = num_threads().min(args.paths as usize).max(1) as u64;
    let chunk = args.paths.div_ceil(workers);
    let hist = std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for w in 0..workers {
            let lo = w * chunk;
            let hi = ((w + 1) * chunk).min(args.paths);
            if lo >= hi {
                break;
            }
            let params = &params;
            handles.push(
                scope.spawn(move || simulate_paths(params, args.seed, lo, hi, args.nmax)),
            );
        }
        let mut acc: Vec<u64> = Vec::new();
        for h in handles {
            let part = h.join().expect("simulation worker panicked")?;
            merge_histograms(&mut acc, &part);
        }
        Ok::<_, sue_core::NumericError>(acc)
    })
    .map_err(numeric_err)?;
    let emp = EmpiricalPmf::from_histogram(hist, args.paths);
    println!("n,count,relative_frequency");
    for (n, &c) in emp.histogram.iter().enumerate() {
        println!("{n},{c},{}", fmt_machine(c as f64 / args.paths as f64));
    }
    println!("# paths={} seed={}", args.paths, args.seed);
    println!("# mean={} se={}", fmt_machine(emp.mean), fmt_machine(emp.mean_se));
    println!("# variance={} se={}", fmt_machine(emp.variance), fmt_machine(emp.variance_se));
    Ok(ExitCode::SUCCESS)
}

fn parse_model_token(token: &str) -> Result<Family> {
    match token {
        "poisson" => Ok(Family::Poisson),
        "gamma" => Ok(Family::GammaCount),
        t if t.starts_with("sue") => {
            let g: u64 = t[3..]
                .parse()
                .map_err(|_| anyhow!("model '{t}': expected sueN with N ≥ 1 (e.g. sue3)"))?;
            if g < 1 {
                bail!("model '{t}': γ must be at least 1");
            }
            Ok(Family::Sue { gamma_event: g })
        }
        other => bail!("unknown model '{other}' (expected poisson, gamma, or sueN)"),
    }
}

fn cmd_compare(args: &CompareArgs) -> Result<ExitCode, CliError> {
    if args.models.is_empty() {
        return Err(input_err(anyhow!("--models must list at least one model")));
    }
    let families: Vec<(String, Family)> = args
        .models
        .iter()
        .map(|m| parse_model_token(m).map(|f| (m.clone(), f)))
        .collect::<Result<_>>()
        .map_err(input_err)?;
    let dataset = args.data.load().map_err(input_err)?;
    let n_max = args.nmax.unwrap_or_else(|| dataset.max_count());
    let settings = args.opt.settings();

    let mut freq_cols: Vec<(String, Vec<f64>)> = Vec::new();
    let mut moment_rows: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    let mut summary = Vec::new();
    for (name, family) in &families {
        match fit(&dataset, family, &settings, args.opt.start.into()) {
            Ok(result) => {
                let report = FitReport::build(&dataset, &result, n_max, 0.0).map_err(numeric_err)?;
                freq_cols.push((name.clone(), report.predicted_frequencies.clone()));
                moment_rows.push((
                    name.clone(),
                    report.per_observation.iter().map(|m| (m.mean, m.variance)).collect(),
                ));
                summary.push(serde_json::json!({
                    "model": name,
                    "log_likelihood": result.log_likelihood,
                    "aic": result.aic,
                    "converged": result.converged,
                }));
            }
            Err(e) => {
                summary.push(serde_json::json!({ "model": name, "error": e.to_string() }));
            }
        }
    }
    if freq_cols.is_empty() {
        return Err(CliError::Numeric(anyhow!("every requested model failed to fit")));
    }

    let observed = sue_core::regression::observed_frequencies(&dataset, n_max);
    let mut freq_csv = String::from("n,observed");
    for (name, _) in &freq_cols {
        let _ = write!(freq_csv, ",{name}");
    }
    freq_csv.push('\n');
    for n in 0..=n_max as usize {
        let _ = write!(freq_csv, "{n},{}", fmt_machine(observed[n]));
        for (_, col) in &freq_cols {
            let _ = write!(freq_csv, ",{}", fmt_machine(col[n]));
        }
        freq_csv.push('\n');
    }

    let mut moments_csv = String::from("model,observation,mean,variance\n");
    for (name, rows) in &moment_rows {
        for (j, (mean, var)) in rows.iter().enumerate() {
            let _ = writeln!(moments_csv, "{name},{j},{},{}", fmt_machine(*mean), fmt_machine(*var));
        }
    }

    std::fs::create_dir_all(&args.out_dir)
        .with_context(|| format!("creating output directory '{}'", args.out_dir))
        .map_err(input_err)?;
    let freq_path = format!("{}/frequencies.csv", args.out_dir);
    let moments_path = format!("{}/moments.csv", args.out_dir);
    std::fs::write(&freq_path, freq_csv)
        .with_context(|| format!("writing {freq_path}"))
        .map_err(input_err)?;
    std::fs::write(&moments_path, moments_csv)
        .with_context(|| format!("writing {moments_path}"))
        .map_err(input_err)?;

    let doc = serde_json::json!({
        "schema": 1,
        "models": summary,
        "files": { "frequencies": freq_path, "moments": moments_path },
    });
    println!("{}", serde_json::to_string_pretty(&doc).unwrap());
    Ok(ExitCode::SUCCESS)
}

fn cmd_surface(args: &SurfaceArgs) -> Result<ExitCode, CliError> {
    if args.lambda_steps < 2 || args.alpha_steps < 2 {
        return Err(input_err(anyhow!("grid needs at least 2 steps per axis")));
    }
    let grid = |lo: f64, hi: f64, steps: usize| -> Vec<f64> {
        (0..steps)
            .map(|i| lo + (hi - lo) * i as f64 / (steps - 1) as f64)
            .collect()
    };
    let lambdas = grid(args.lambda_min, args.lambda_max, args.lambda_steps);
    let alphas = grid(args.alpha_min, args.alpha_max, args.alpha_steps);
    let cells = vm_surface(args.gamma, &lambdas, &alphas, args.t);
    println!("lambda,alpha,vm_ratio,error");
    for cell in &cells {
        match &cell.result {
            Ok(r) => println!("{},{},{},", cell.lambda, cell.alpha, fmt_machine(*r)),
            Err(e) => println!("{},{},,{e}", cell.lambda, cell.alpha),
        }
    }
    Ok(ExitCode::SUCCESS)
}
