//! Command-line front end. [`run`] parses arguments, executes one command and
//! returns the process exit status:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success (warnings do not change this) |
//! | 1 | usage error |
//! | 2 | validation failure or malformed input file |
//! | 3 | estimation degeneracy |
//! | 4 | I/O error |

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};

use crate::bootstrap::{bootstrap_corrected, BootstrapOptions, DEFAULT_LEVEL, DEFAULT_RESAMPLES};
use crate::datagen::{generate_trial, validate_dataset, StreamSeed, TrialDataset};
use crate::error::Error;
use crate::estimators::{compute_arm_moments, estimate_corrected, estimate_sigma12, EstimateSet, Mode};
use crate::mc_harness::{
    format_summaries_csv, format_summaries_markdown, run_table, ReferenceTable, RunOptions, REFERENCE_REPLICATES,
};
use crate::model::{parse_scenarios, strata_effects, ScenarioParams, StrataTable};

pub const DEFAULT_SEED: u64 = 20_140_424;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_DEGENERATE: i32 = 3;
pub const EXIT_IO: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "rescue", version, about = "Biological-effect estimation for trials with a deterministic rescue rule")]
pub struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Monte Carlo replicates per scenario.
    #[arg(long, global = true)]
    pub replicates: Option<usize>,
    /// Worker threads (results do not depend on this).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Md)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Md,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TableArg {
    Table2,
    Table3,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    PlugIn,
    Oracle,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::PlugIn => Mode::PlugIn,
            ModeArg::Oracle => Mode::Oracle,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Re-run one of the reference simulation tables.
    Reproduce {
        #[arg(value_enum)]
        table: TableArg,
        /// Subjects per arm (default 50).
        #[arg(long)]
        arm_size: Option<usize>,
    },
    /// Monte Carlo study of the scenarios in a key-value scenario file.
    Simulate {
        scenario: PathBuf,
        #[arg(long, value_enum, default_value_t = ModeArg::PlugIn)]
        mode: ModeArg,
        /// Write one simulated dataset (stream 0 of the seed) instead of
        /// running the study. The file must hold a single scenario.
        #[arg(long)]
        emit_dataset: bool,
    },
    /// ITT, conditional and corrected estimates on a dataset file.
    Estimate {
        /// Dataset CSV with columns id,z,y1,r,y2.
        data: PathBuf,
        /// Rescue threshold c.
        #[arg(short = 'c', long = "threshold", allow_negative_numbers = true)]
        c: f64,
        /// Use the true parameters from this scenario file for the correction.
        #[arg(long)]
        oracle: Option<PathBuf>,
        /// Also bootstrap the corrected estimate with this many resamples.
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Coverage of the bootstrap percentile interval.
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
    },
    /// Bootstrap standard error of the corrected estimate.
    Bootstrap {
        /// Dataset CSV with columns id,z,y1,r,y2.
        data: PathBuf,
        /// Rescue threshold c.
        #[arg(short = 'c', long = "threshold", allow_negative_numbers = true)]
        c: f64,
        #[arg(long, default_value_t = DEFAULT_RESAMPLES)]
        resamples: usize,
        /// Coverage of the percentile interval.
        #[arg(long, default_value_t = DEFAULT_LEVEL)]
        level: f64,
    },
    /// Effects from a principal-stratum table file.
    Strata { file: PathBuf },
    /// Check a dataset file against the rescue rule.
    Validate {
        data: PathBuf,
        /// Rescue threshold c.
        #[arg(short = 'c', long = "threshold", allow_negative_numbers = true)]
        c: f64,
    },
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn new(code: i32, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }

    fn io(path: &Path, e: std::io::Error) -> Self {
        Failure::new(EXIT_IO, format!("{}: {e}", path.display()))
    }

    fn from_error(e: Error) -> Self {
        let code = if e.is_degeneracy() {
            EXIT_DEGENERATE
        } else {
            match e {
                Error::Parse { .. } | Error::InvalidScenario(_) => EXIT_VALIDATION,
                _ => EXIT_USAGE,
            }
        };
        Failure::new(code, e.to_string())
    }
}

type CmdResult = std::result::Result<String, Failure>;

/// Parses `args` (including the program name) and runs the command. The
/// command's output goes to `--out` or `stdout`; diagnostics go to `stderr`.
pub fn run<I, A>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(stderr, "{e}");
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = execute(&cli, stderr).and_then(|text| emit(&cli, &text, stdout));
    match result {
        Ok(()) => EXIT_OK,
        Err(f) => {
            let _ = writeln!(stderr, "error: {}", f.message);
            f.code
        }
    }
}

fn emit(cli: &Cli, text: &str, stdout: &mut dyn Write) -> std::result::Result<(), Failure> {
    match &cli.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::io(path, e)),
        None => stdout.write_all(text.as_bytes()).map_err(|e| Failure::new(EXIT_IO, e.to_string())),
    }
}

fn read(path: &Path) -> std::result::Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::io(path, e))
}

fn read_dataset(path: &Path, c: f64) -> std::result::Result<TrialDataset<f64>, Failure> {
    let text = read(path)?;
    TrialDataset::read_csv(text.as_bytes(), c)
        .map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn read_scenarios(path: &Path) -> std::result::Result<Vec<ScenarioParams<f64>>, Failure> {
    let text = read(path)?;
    parse_scenarios(&text).map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))
}

fn validated_dataset(path: &Path, c: f64) -> std::result::Result<TrialDataset<f64>, Failure> {
    let data = read_dataset(path, c)?;
    let report = validate_dataset(&data);
    if report.is_valid() {
        Ok(data)
    } else {
        let mut msg = format!("{} failed validation with {} violation(s):", path.display(), report.violations.len());
        for v in &report.violations {
            let _ = write!(msg, "\n  {v}");
        }
        Err(Failure::new(EXIT_VALIDATION, msg))
    }
}

fn execute(cli: &Cli, stderr: &mut dyn Write) -> CmdResult {
    let _ = writeln!(stderr, "seed: {}", cli.seed);
    match &cli.command {
        Command::Reproduce { table, arm_size } => cmd_reproduce(cli, *table, *arm_size, stderr),
        Command::Simulate { scenario, mode, emit_dataset } => {
            cmd_simulate(cli, scenario, (*mode).into(), *emit_dataset, stderr)
        }
        Command::Estimate { data, c, oracle, bootstrap, level } => {
            cmd_estimate(cli, data, *c, oracle.as_deref(), *bootstrap, *level, stderr)
        }
        Command::Bootstrap { data, c, resamples, level } => cmd_bootstrap(cli, data, *c, *resamples, *level),
        Command::Strata { file } => cmd_strata(cli, file),
        Command::Validate { data, c } => cmd_validate(data, *c),
    }
}

fn run_grid(
    cli: &Cli,
    grid: &[ScenarioParams<f64>],
    mode: Mode,
    replicates: usize,
    stderr: &mut dyn Write,
) -> CmdResult {
    let opts = RunOptions { replicates, seed: cli.seed, mode, threads: cli.threads };
    let results = run_table(grid, &opts).map_err(Failure::from_error)?;
    let mut summaries = Vec::with_capacity(results.len());
    for (i, r) in results.into_iter().enumerate() {
        let s = r.map_err(|e| Failure::from_error(e).with_context(&format!("scenario {}", i + 1)))?;
        if s.failures > 0 {
            let _ =
                writeln!(stderr, "warning: scenario {}: {} of {} replicates failed", i + 1, s.failures, s.replicates);
        }
        summaries.push(s);
    }
    Ok(match cli.format {
        Format::Csv => format_summaries_csv(&summaries),
        Format::Md => format_summaries_markdown(&summaries),
    })
}

impl Failure {
    fn with_context(mut self, ctx: &str) -> Self {
        self.message = format!("{ctx}: {}", self.message);
        self
    }
}

fn cmd_reproduce(cli: &Cli, table: TableArg, arm_size: Option<usize>, stderr: &mut dyn Write) -> CmdResult {
    let table = match table {
        TableArg::Table2 => ReferenceTable::Table2,
        TableArg::Table3 => ReferenceTable::Table3,
    };
    let replicates = cli.replicates.unwrap_or(REFERENCE_REPLICATES);
    if replicates != REFERENCE_REPLICATES {
        let _ = writeln!(
            stderr,
            "warning: reference tolerances assume {REFERENCE_REPLICATES} replicates, running {replicates}"
        );
    }
    let mut grid = table.grid::<f64>();
    if let Some(n) = arm_size {
        grid = grid.into_iter().map(|p| p.with_arm_sizes(n, n)).collect();
    }
    run_grid(cli, &grid, table.mode(), replicates, stderr)
}

fn cmd_simulate(cli: &Cli, path: &Path, mode: Mode, emit_dataset: bool, stderr: &mut dyn Write) -> CmdResult {
    let grid = read_scenarios(path)?;
    if emit_dataset {
        if grid.len() != 1 {
            return Err(Failure::new(EXIT_USAGE, "--emit-dataset needs a file with exactly one scenario"));
        }
        let data = generate_trial(&grid[0], StreamSeed::new(cli.seed, 0)).map_err(Failure::from_error)?;
        let mut buf = Vec::new();
        data.write_csv(&mut buf).map_err(|e| Failure::new(EXIT_IO, e.to_string()))?;
        return Ok(String::from_utf8(buf).expect("ascii csv"));
    }
    let replicates = cli.replicates.unwrap_or(REFERENCE_REPLICATES);
    run_grid(cli, &grid, mode, replicates, stderr)
}

fn estimate_report(
    cli: &Cli,
    data: &TrialDataset<f64>,
    c: f64,
    est: &EstimateSet<f64>,
    boot: Option<&crate::Bootstrap>,
) -> CmdResult {
    let moments = compute_arm_moments(data, c).ok();
    if cli.format == Format::Csv {
        let mut out = String::from(EstimateSet::<f64>::CSV_HEADER);
        if boot.is_some() {
            out.push_str(",boot_se,boot_lo,boot_hi,boot_level,boot_resamples,boot_failures");
        }
        out.push('\n');
        out.push_str(&est.csv_row());
        if let Some(b) = boot {
            let _ =
                write!(out, ",{},{},{},{},{},{}", b.se, b.interval.0, b.interval.1, b.level, b.resamples, b.failures);
        }
        out.push('\n');
        return Ok(out);
    }

    let mut out = String::new();
    let _ = writeln!(out, "Estimates ({} correction)", est.mode);
    let _ = writeln!(out, "  ITT          {:>10.4}", est.itt);
    let _ = writeln!(out, "  Conditional  {:>10.4}", est.conditional);
    let _ = writeln!(out, "  Corrected    {:>10.4}", est.corrected);
    if let Some(b) = boot {
        let _ = writeln!(
            out,
            "  Bootstrap SE {:>10.4}  {:.0}% interval [{:.4}, {:.4}]  ({} resamples, {} failed)",
            b.se,
            b.level * 100.0,
            b.interval.0,
            b.interval.1,
            b.resamples,
            b.failures
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "| arm |   n | rescued | rescue rate | mu1_hat | sd1_hat | eta_hat | lambda_hat | sigma12_hat | var factor | mu2_hat(z,0) |"
    );
    let _ = writeln!(
        out,
        "|----:|----:|--------:|------------:|--------:|--------:|--------:|-----------:|------------:|-----------:|-------------:|"
    );
    if let Some(moments) = moments {
        for m in &moments {
            let s12 = estimate_sigma12(m).map(|v| format!("{v:.4}")).unwrap_or_else(|_| "n/a".into());
            let _ = writeln!(
                out,
                "| {:>3} | {:>3} | {:>7} | {:>11.4} | {:>7.4} | {:>7.4} | {:>7.4} | {:>10.4} | {:>11} | {:>10.4} | {:>12.4} |",
                m.arm,
                m.n,
                m.n - m.n_norescue,
                m.rescue_rate(),
                m.mean_y1,
                m.sd_y1,
                m.eta_hat,
                m.lambda_hat,
                s12,
                m.variance_factor(),
                est.mu2_hat[m.arm.index()]
            );
        }
    }
    for w in &est.warnings {
        let _ = writeln!(out, "warning: {w}");
    }
    Ok(out)
}

fn cmd_estimate(
    cli: &Cli,
    path: &Path,
    c: f64,
    oracle: Option<&Path>,
    bootstrap: Option<usize>,
    level: f64,
    stderr: &mut dyn Write,
) -> CmdResult {
    let data = validated_dataset(path, c)?;
    let oracle_params = match oracle {
        Some(p) => {
            let grid = read_scenarios(p)?;
            if grid.len() != 1 {
                return Err(Failure::new(EXIT_USAGE, "--oracle needs a file with exactly one scenario"));
            }
            Some(grid[0])
        }
        None => None,
    };
    let mode = if oracle_params.is_some() { Mode::Oracle } else { Mode::PlugIn };
    let est = estimate_corrected(&data, c, mode, oracle_params.as_ref()).map_err(Failure::from_error)?;
    for w in &est.warnings {
        let _ = writeln!(stderr, "warning: {w}");
    }
    let boot = match bootstrap {
        Some(resamples) => {
            let opts = BootstrapOptions { resamples, seed: cli.seed, level, threads: cli.threads };
            Some(bootstrap_corrected(&data, c, &opts).map_err(Failure::from_error)?)
        }
        None => None,
    };
    estimate_report(cli, &data, c, &est, boot.as_ref())
}

fn cmd_bootstrap(cli: &Cli, path: &Path, c: f64, resamples: usize, level: f64) -> CmdResult {
    let data = validated_dataset(path, c)?;
    let opts = BootstrapOptions { resamples, seed: cli.seed, level, threads: cli.threads };
    let b = bootstrap_corrected(&data, c, &opts).map_err(Failure::from_error)?;
    Ok(match cli.format {
        Format::Csv => format!("{}\n{}\n", crate::Bootstrap::CSV_HEADER, b.csv_row()),
        Format::Md => format!(
            "Corrected estimate {:.4}\nBootstrap SE       {:.4}\n{:.0}% percentile interval [{:.4}, {:.4}]\nResamples {} ({} failed)\n",
            b.point_estimate,
            b.se,
            b.level * 100.0,
            b.interval.0,
            b.interval.1,
            b.resamples,
            b.failures
        ),
    })
}

fn cmd_strata(cli: &Cli, path: &Path) -> CmdResult {
    let text = read(path)?;
    let table = StrataTable::<f64>::from_csv(text.as_bytes())
        .map_err(|e| Failure::new(EXIT_VALIDATION, format!("{}: {e}", path.display())))?;
    let effects = strata_effects(&table);
    let s00 = effects.stratum00.map(|v| v.to_string());
    let mut out = String::new();
    match cli.format {
        Format::Csv => {
            out.push_str("stratum,proportion,effect\n");
            for (row, (s, e)) in table.rows().iter().zip(&effects.per_stratum) {
                let _ = writeln!(out, "{s},{},{e}", row.proportion);
            }
            let _ = writeln!(out, "itt,,{}", effects.itt);
            let _ = writeln!(out, "00_effect,,{}", s00.unwrap_or_default());
        }
        Format::Md => {
            out.push_str("| stratum | proportion | effect |\n|--------:|-----------:|-------:|\n");
            for (row, (s, e)) in table.rows().iter().zip(&effects.per_stratum) {
                let _ = writeln!(out, "| {s:>7} | {:>10} | {e:>6} |", row.proportion);
            }
            let _ = writeln!(out, "\nITT effect:        {:.4}", effects.itt);
            match effects.stratum00 {
                Some(v) => {
                    let _ = writeln!(out, "Stratum 00 effect: {v:.4}");
                }
                None => out.push_str("Stratum 00 effect: absent\n"),
            }
        }
    }
    Ok(out)
}

fn cmd_validate(path: &Path, c: f64) -> CmdResult {
    let data = validated_dataset(path, c)?;
    Ok(format!(
        "{}: {} subjects ({} control, {} treatment), no violations\n",
        path.display(),
        data.records.len(),
        data.arm_size(crate::Arm::Control),
        data.arm_size(crate::Arm::Treatment)
    ))
}
