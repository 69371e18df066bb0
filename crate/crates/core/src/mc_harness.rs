//! Replicated simulation over scenario grids.
//!
//! Replicates are split into fixed chunks of [`CHUNK`] replicates. Chunks run
//! in parallel, each folding its estimates into [`RunningStats`], and the
//! chunk accumulators are merged in chunk order. The partition and the merge
//! order do not depend on the thread count, so summaries are bit-identical
//! for any number of threads.

use std::fmt::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::datagen::{generate_trial, StreamSeed};
use crate::error::{Error, Result};
use crate::estimators::{estimate_corrected, EstimateSet, Mode};
use crate::model::ScenarioParams;
use crate::num::Real;
use crate::stats::RunningStats;

/// Replicates per accumulation chunk.
pub const CHUNK: usize = 128;

/// Replicate count of the reference simulation tables.
pub const REFERENCE_REPLICATES: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub replicates: usize,
    pub seed: u64,
    pub mode: Mode,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn new(replicates: usize, seed: u64, mode: Mode) -> Self {
        RunOptions { replicates, seed, mode, threads: None }
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = Some(threads);
        self
    }
}

/// Monte Carlo mean and SD of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorStats<T> {
    pub count: usize,
    pub mean: T,
    /// `None` with fewer than two successful replicates.
    pub sd: Option<T>,
}

impl<T: Real> EstimatorStats<T> {
    fn from_running(s: &RunningStats<T>) -> Option<Self> {
        Some(EstimatorStats { count: s.count(), mean: s.mean()?, sd: s.sd() })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct McSummary<T> {
    pub scenario: ScenarioParams<T>,
    pub replicates: usize,
    pub mode: Mode,
    pub itt: Option<EstimatorStats<T>>,
    pub conditional: Option<EstimatorStats<T>>,
    pub corrected: Option<EstimatorStats<T>>,
    /// Plug-in `sigma12(z, 0)` estimates per arm; `None` in oracle mode.
    pub sigma12: [Option<EstimatorStats<T>>; 2],
    /// Replicates whose estimation failed; excluded from every aggregate.
    pub failures: usize,
    /// Replicates with a low non-rescued fraction in some arm.
    pub warned: usize,
}

#[derive(Debug, Clone, Copy)]
struct Accumulator<T> {
    itt: RunningStats<T>,
    conditional: RunningStats<T>,
    corrected: RunningStats<T>,
    sigma12: [RunningStats<T>; 2],
    failures: usize,
    warned: usize,
}

impl<T: Real> Accumulator<T> {
    fn new() -> Self {
        Accumulator {
            itt: RunningStats::new(),
            conditional: RunningStats::new(),
            corrected: RunningStats::new(),
            sigma12: [RunningStats::new(); 2],
            failures: 0,
            warned: 0,
        }
    }

    fn push(&mut self, est: Result<EstimateSet<T>>) {
        match est {
            Ok(e) => {
                self.itt.push(e.itt);
                self.conditional.push(e.conditional);
                self.corrected.push(e.corrected);
                if let Some(s) = e.sigma12_hat {
                    self.sigma12[0].push(s[0]);
                    self.sigma12[1].push(s[1]);
                }
                if !e.warnings.is_empty() {
                    self.warned += 1;
                }
            }
            Err(_) => self.failures += 1,
        }
    }

    fn merge(&mut self, other: &Self) {
        self.itt.merge(&other.itt);
        self.conditional.merge(&other.conditional);
        self.corrected.merge(&other.corrected);
        self.sigma12[0].merge(&other.sigma12[0]);
        self.sigma12[1].merge(&other.sigma12[1]);
        self.failures += other.failures;
        self.warned += other.warned;
    }
}

/// Estimates on replicate `k` of a scenario: the dataset comes from stream `k`
/// of `seed`.
pub fn run_replicate<T: Real>(params: &ScenarioParams<T>, seed: u64, k: u64, mode: Mode) -> Result<EstimateSet<T>>
where
    StandardNormal: Distribution<T>,
{
    let data = generate_trial(params, StreamSeed::new(seed, k))?;
    estimate_corrected(&data, params.c, mode, Some(params))
}

pub(crate) fn with_threads<R: Send>(threads: Option<usize>, f: impl FnOnce() -> R + Send) -> R {
    match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

fn run_chunks<T: Real>(params: &ScenarioParams<T>, opts: &RunOptions) -> Accumulator<T>
where
    StandardNormal: Distribution<T>,
{
    let chunks = opts.replicates.div_ceil(CHUNK);
    let parts: Vec<Accumulator<T>> = (0..chunks)
        .into_par_iter()
        .map(|ci| {
            let mut acc = Accumulator::new();
            let end = ((ci + 1) * CHUNK).min(opts.replicates);
            for k in ci * CHUNK..end {
                acc.push(run_replicate(params, opts.seed, k as u64, opts.mode));
            }
            acc
        })
        .collect();
    parts.iter().fold(Accumulator::new(), |mut total, p| {
        total.merge(p);
        total
    })
}

fn summarize<T: Real>(params: &ScenarioParams<T>, opts: &RunOptions, acc: &Accumulator<T>) -> McSummary<T> {
    McSummary {
        scenario: *params,
        replicates: opts.replicates,
        mode: opts.mode,
        itt: EstimatorStats::from_running(&acc.itt),
        conditional: EstimatorStats::from_running(&acc.conditional),
        corrected: EstimatorStats::from_running(&acc.corrected),
        sigma12: [EstimatorStats::from_running(&acc.sigma12[0]), EstimatorStats::from_running(&acc.sigma12[1])],
        failures: acc.failures,
        warned: acc.warned,
    }
}

/// Runs `opts.replicates` simulated trials of one scenario and aggregates the
/// estimators. Per-replicate failures are counted, not propagated.
pub fn run_scenario<T: Real>(params: &ScenarioParams<T>, opts: &RunOptions) -> Result<McSummary<T>>
where
    StandardNormal: Distribution<T>,
{
    if opts.replicates == 0 {
        return Err(Error::Domain("at least one replicate required".into()));
    }
    params.validate()?;
    let acc = with_threads(opts.threads, || run_chunks(params, opts));
    Ok(summarize(params, opts, &acc))
}

/// Runs every scenario of a grid with the same options. Invalid scenarios
/// yield an error entry without stopping the rest of the grid.
pub fn run_table<T: Real>(grid: &[ScenarioParams<T>], opts: &RunOptions) -> Result<Vec<Result<McSummary<T>>>>
where
    StandardNormal: Distribution<T>,
{
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    Ok(with_threads(opts.threads, || {
        grid.iter()
            .map(|p| {
                p.validate()?;
                let acc = run_chunks(p, &RunOptions { threads: None, ..*opts });
                Ok(summarize(p, opts, &acc))
            })
            .collect()
    }))
}

/// The two reference simulation tables. Both use the same 11-scenario grid;
/// the first applies the oracle correction, the second the plug-in one.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceTable {
    Table2,
    Table3,
}

impl ReferenceTable {
    pub fn mode(self) -> Mode {
        match self {
            ReferenceTable::Table2 => Mode::Oracle,
            ReferenceTable::Table3 => Mode::PlugIn,
        }
    }

    pub fn grid<T: Real>(self) -> Vec<ScenarioParams<T>> {
        reference_grid()
    }
}

/// Mean structures `(alpha1, beta1, alpha2, beta2, gamma, delta)` of the
/// reference grid.
pub const REFERENCE_MEANS: [[f64; 6]; 11] = [
    [1.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 0.0],
    [0.0, 0.0, 0.0, 0.0, 0.0, 1.0],
    [0.0, 0.0, 0.0, 0.0, 1.0, 1.0],
    [0.0, 1.0, 0.0, 1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0, 1.0, 1.0, 0.0],
    [0.0, 1.0, 0.0, 1.0, 1.0, 1.0],
    [0.0, 0.0, 0.0, 1.0, 1.0, 1.0],
];

/// The 11 reference scenarios with n = 50 per arm, unit SDs, covariance 0.6
/// and threshold -0.5.
pub fn reference_grid<T: Real>() -> Vec<ScenarioParams<T>> {
    REFERENCE_MEANS
        .iter()
        .map(|m| {
            ScenarioParams::reference(
                T::lit(m[0]),
                T::lit(m[1]),
                T::lit(m[2]),
                T::lit(m[3]),
                T::lit(m[4]),
                T::lit(m[5]),
            )
        })
        .collect()
}

fn mean_sd_cell<T: Real>(s: &Option<EstimatorStats<T>>) -> String {
    match s {
        Some(EstimatorStats { mean, sd: Some(sd), .. }) => format!("{mean:.3} ({sd:.3})"),
        Some(EstimatorStats { mean, sd: None, .. }) => format!("{mean:.3} (n/a)"),
        None => "n/a".to_string(),
    }
}

fn opt_csv<T: Real>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub const SUMMARY_CSV_HEADER: &str = "alpha1,beta1,alpha2,beta2,gamma,delta,c,n0,n1,mode,replicates,failures,\
itt_mean,itt_sd,conditional_mean,conditional_sd,corrected_mean,corrected_sd,\
sigma12_z0_mean,sigma12_z0_sd,sigma12_z1_mean,sigma12_z1_sd";

/// Summaries as CSV with [`SUMMARY_CSV_HEADER`]; absent values are empty.
pub fn format_summaries_csv<T: Real>(summaries: &[McSummary<T>]) -> String {
    let mut out = String::from(SUMMARY_CSV_HEADER);
    out.push('\n');
    for s in summaries {
        let p = &s.scenario;
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            p.alpha1, p.beta1, p.alpha2, p.beta2, p.gamma, p.delta, p.c, p.n0, p.n1, s.mode, s.replicates, s.failures
        );
        for e in [&s.itt, &s.conditional, &s.corrected, &s.sigma12[0], &s.sigma12[1]] {
            let _ = write!(out, ",{},{}", opt_csv(e.map(|e| e.mean)), opt_csv(e.and_then(|e| e.sd)));
        }
        out.push('\n');
    }
    out
}

/// Aligned Markdown table: scenario parameters followed by `mean (sd)` cells.
pub fn format_summaries_markdown<T: Real>(summaries: &[McSummary<T>]) -> String {
    let plug_in = summaries.iter().any(|s| s.mode == Mode::PlugIn);
    let mut header: Vec<String> =
        ["alpha1", "beta1", "alpha2", "beta2", "gamma", "delta", "ITT", "Conditional", "Corrected"]
            .iter()
            .map(|s| s.to_string())
            .collect();
    if plug_in {
        header.push("sigma12(0)".into());
        header.push("sigma12(1)".into());
    }
    header.push("failures".into());

    let rows: Vec<Vec<String>> = summaries
        .iter()
        .map(|s| {
            let p = &s.scenario;
            let mut row: Vec<String> =
                [p.alpha1, p.beta1, p.alpha2, p.beta2, p.gamma, p.delta].iter().map(|v| format!("{v}")).collect();
            row.push(mean_sd_cell(&s.itt));
            row.push(mean_sd_cell(&s.conditional));
            row.push(mean_sd_cell(&s.corrected));
            if plug_in {
                row.push(mean_sd_cell(&s.sigma12[0]));
                row.push(mean_sd_cell(&s.sigma12[1]));
            }
            row.push(s.failures.to_string());
            row
        })
        .collect();

    let widths: Vec<usize> = (0..header.len())
        .map(|i| rows.iter().map(|r| r[i].len()).chain([header[i].len()]).max().unwrap_or(0))
        .collect();
    let line = |cells: &[String]| -> String {
        let padded: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        format!("| {} |\n", padded.join(" | "))
    };
    let mut out = line(&header);
    let rule: Vec<String> = widths.iter().map(|w| format!("{}:", "-".repeat(w.saturating_sub(1)))).collect();
    out.push_str(&format!("|-{}-|\n", rule.join("-|-")));
    for r in &rows {
        out.push_str(&line(r));
    }
    out
}
