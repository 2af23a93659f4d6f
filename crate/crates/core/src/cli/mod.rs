//! Command-line front end: `solve`, `sweep`, `convergence`, `verify`, `plot`
//! and `defaults`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::dinkelbach::SolveResult;
use crate::harness::{
    compare_with_oracle, convergence_trace, oracle_suite_point, solve_scheme, sweep, Scheme,
    ORACLE_REL_TOL,
};
use crate::sysmodel::{generate_channel, watt_to_dbm};
use config::{ConfigError, RunConfig};
use output::{Metric, OutputError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INTERNAL: i32 = 3;

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "SWIPT_EE_THREADS";

#[derive(Debug, Parser)]
#[command(name = "swipt-ee", version, about = "Energy-efficient OFDM power allocation with power splitting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Overrides `seed` from the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when omitted (overrides `output_csv`).
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Proposed,
    Baseline,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one channel realisation and print the result as JSON.
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "proposed")]
        scheme: SchemeArg,
    },
    /// Monte-Carlo sweep over `p_max_dbm_grid` x `inr_db_list`, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Metric drawn into `output_svg`.
        #[arg(long, value_enum, default_value = "ee")]
        svg_metric: Metric,
    },
    /// Trial-averaged energy efficiency per outer iteration, as CSV.
    Convergence {
        #[command(flatten)]
        common: Common,
    },
    /// Compare the solver against an exhaustive grid on small instances.
    Verify {
        #[command(flatten)]
        common: Common,
    },
    /// Draw a sweep CSV as an SVG line chart.
    Plot {
        #[arg(long, short)]
        input: PathBuf,
        #[arg(long, short)]
        output: PathBuf,
        #[arg(long, value_enum, default_value = "ee")]
        metric: Metric,
    },
    /// Print the default configuration.
    Defaults,
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Output(#[from] OutputError),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => EXIT_CONFIG,
            CliError::Output(OutputError::Csv { .. }) => EXIT_CONFIG,
            CliError::Output(_) | CliError::Internal(_) => EXIT_INTERNAL,
        }
    }
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if let Err(e) = init_threads() {
        eprintln!("error: {e}");
        return e.code();
    }
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Some(v) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .to_str()
        .and_then(|s| s.trim().parse().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer")))?;
    // A pool may already exist when `run` is called twice in one process.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

fn load(common: &Common) -> Result<RunConfig, CliError> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.output {
        cfg.output_csv = Some(out.clone());
    }
    Ok(cfg)
}

fn emit(text: &str, path: Option<&PathBuf>) -> Result<(), CliError> {
    match path {
        Some(p) => output::write_file(p, text)?,
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .and_then(|_| out.flush())
                .map_err(|e| CliError::Internal(format!("stdout: {e}")))?;
        }
    }
    Ok(())
}

fn dispatch(cmd: Command) -> Result<i32, CliError> {
    match cmd {
        Command::Solve { common, scheme } => solve(&common, scheme),
        Command::Sweep { common, svg_metric } => {
            let cfg = load(&common)?;
            let rows = sweep(&cfg.sweep_config());
            emit(&output::csv_string(&rows)?, cfg.output_csv.as_ref())?;
            if let Some(svg) = &cfg.output_svg {
                output::emit_svg(&rows, svg_metric, svg)?;
            }
            Ok(EXIT_OK)
        }
        Command::Convergence { common } => {
            let cfg = load(&common)?;
            let params = cfg.system_params();
            let opts = cfg.outer_options();
            let mut csv = String::from("inr_db,p_max_dbm,iteration,avg_ee_bit_per_joule\n");
            for &inr in &cfg.convergence_inr_db {
                for &p in &cfg.convergence_p_max_dbm {
                    let trace = convergence_trace(&params, inr, p, cfg.convergence_trials, cfg.seed, &opts);
                    for (k, v) in trace.iter().enumerate() {
                        let _ = writeln!(
                            csv,
                            "{},{},{},{}",
                            output::fmt_g9(inr),
                            output::fmt_g9(p),
                            k + 1,
                            output::fmt_g9(*v)
                        );
                    }
                }
            }
            emit(&csv, cfg.output_csv.as_ref())?;
            Ok(EXIT_OK)
        }
        Command::Verify { common } => verify(&common),
        Command::Plot { input, output: out, metric } => {
            let text = std::fs::read_to_string(&input).map_err(|source| OutputError::Io {
                path: input.clone(),
                source,
            })?;
            let rows = output::parse_csv(&text)?;
            output::emit_svg(&rows, metric, &out)?;
            Ok(EXIT_OK)
        }
        Command::Defaults => {
            emit(&(RunConfig::default().to_json() + "\n"), None)?;
            Ok(EXIT_OK)
        }
    }
}

#[derive(Serialize)]
struct SolveOutput<'a> {
    scheme: Scheme,
    seed: u64,
    energy_efficiency_bit_per_joule: f64,
    harvested_dbm: Option<f64>,
    result: &'a SolveResult,
}

fn solve(common: &Common, scheme: SchemeArg) -> Result<i32, CliError> {
    let cfg = load(common)?;
    let params = cfg.system_params();
    let ch = generate_channel(&params, cfg.seed);
    let scheme = match scheme {
        SchemeArg::Proposed => Scheme::Proposed,
        SchemeArg::Baseline => Scheme::Baseline,
    };
    let result = solve_scheme(scheme, &ch, &params, &cfg.outer_options());
    let out = SolveOutput {
        scheme,
        seed: cfg.seed,
        energy_efficiency_bit_per_joule: result.q_star,
        harvested_dbm: watt_to_dbm(result.harvested_w).ok(),
        result: &result,
    };
    let json = serde_json::to_string_pretty(&out).map_err(|e| CliError::Internal(e.to_string()))?;
    emit(&(json + "\n"), cfg.output_csv.as_ref())?;
    Ok(if result.feasible { EXIT_OK } else { EXIT_INFEASIBLE })
}

fn verify(common: &Common) -> Result<i32, CliError> {
    let cfg = load(common)?;
    let params = cfg.system_params();
    let opts = cfg.outer_options();
    let mut text = String::from("n,p_max_dbm,inr_db,seed,solver_ee,oracle_ee,rel_gap,allowance,passed\n");
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for k in 0..cfg.verify_instances {
        let (n, p, inr) = oracle_suite_point(k);
        let steps = if n <= 2 {
            cfg.verify_grid_steps_2
        } else {
            cfg.verify_grid_steps_4
        };
        let seed = cfg.seed.wrapping_add(k as u64);
        let c = compare_with_oracle(&params, n, p, inr, seed, steps, cfg.verify_rho_grid_m, &opts);
        worst = worst.max(c.rel_gap - c.allowance);
        if !c.passed {
            failures += 1;
        }
        let _ = writeln!(
            text,
            "{n},{},{},{seed},{},{},{},{},{}",
            output::fmt_g9(p),
            output::fmt_g9(inr),
            output::fmt_g9(c.solver_ee),
            output::fmt_g9(c.oracle_ee),
            output::fmt_g9(c.rel_gap),
            output::fmt_g9(c.allowance),
            c.passed
        );
    }
    emit(&text, cfg.output_csv.as_ref())?;
    eprintln!(
        "max relative oracle gap beyond grid allowance: {} (limit {}), {failures} of {} instances failed",
        output::fmt_g9(worst.max(0.0)),
        output::fmt_g9(ORACLE_REL_TOL),
        cfg.verify_instances
    );
    Ok(if failures == 0 { EXIT_OK } else { EXIT_INTERNAL })
}
