//! Stratified nonparametric bootstrap for the plug-in corrected estimator.
//!
//! Subjects are resampled with replacement within their arm, keeping both
//! visits together, so every resample has the original arm sizes. Resample
//! `b` draws from stream `b` of the seed.

use rand::Rng;
use rayon::prelude::*;

use crate::datagen::{StreamSeed, TrialDataset};
use crate::error::{Error, Result};
use crate::estimators::{estimate_corrected, Mode};
use crate::mc_harness::with_threads;
use crate::model::Arm;
use crate::num::Real;
use crate::stats::RunningStats;

pub const DEFAULT_RESAMPLES: usize = 2000;
pub const DEFAULT_LEVEL: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapOptions {
    pub resamples: usize,
    pub seed: u64,
    /// Coverage of the percentile interval, in `(0, 1)`.
    pub level: f64,
    pub threads: Option<usize>,
}

impl BootstrapOptions {
    pub fn new(resamples: usize, seed: u64) -> Self {
        BootstrapOptions { resamples, seed, level: DEFAULT_LEVEL, threads: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootstrapResult<T> {
    pub point_estimate: T,
    /// SD of the successful resample estimates.
    pub se: T,
    pub resamples: usize,
    pub level: f64,
    pub interval: (T, T),
    pub failures: usize,
}

impl<T: Real> BootstrapResult<T> {
    pub const CSV_HEADER: &'static str = "point_estimate,se,resamples,level,lo,hi,failures";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.point_estimate, self.se, self.resamples, self.level, self.interval.0, self.interval.1, self.failures
        )
    }
}

/// One stratified resample of `data`.
pub(crate) fn resample<T: Real, R: Rng>(data: &TrialDataset<T>, rng: &mut R) -> TrialDataset<T> {
    let mut records = Vec::with_capacity(data.records.len());
    for z in Arm::BOTH {
        let arm: Vec<_> = data.arm(z).collect();
        for _ in 0..arm.len() {
            records.push(*arm[rng.random_range(0..arm.len())]);
        }
    }
    TrialDataset { records, c: data.c }
}

/// Linear-interpolation quantile of sorted values (R type 7).
fn quantile<T: Real>(sorted: &[T], p: f64) -> T {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let w = T::lit(h - lo as f64);
    sorted[lo] + (sorted[hi] - sorted[lo]) * w
}

/// Bootstrap standard error and percentile interval of the plug-in
/// corrected estimate.
///
/// Fails if the estimate cannot be computed on `data`, or if more than half
/// of the resamples are degenerate.
pub fn bootstrap_corrected<T: Real>(
    data: &TrialDataset<T>,
    c: T,
    opts: &BootstrapOptions,
) -> Result<BootstrapResult<T>> {
    if opts.resamples < 2 {
        return Err(Error::Domain(format!("at least 2 resamples required, got {}", opts.resamples)));
    }
    if !(opts.level > 0.0 && opts.level < 1.0) {
        return Err(Error::Domain(format!("interval level must lie in (0, 1), got {}", opts.level)));
    }
    let point = estimate_corrected(data, c, Mode::PlugIn, None)?.corrected;

    let estimates: Vec<Option<T>> = with_threads(opts.threads, || {
        (0..opts.resamples)
            .into_par_iter()
            .map(|b| {
                let mut rng = StreamSeed::new(opts.seed, b as u64).rng();
                let rs = resample(data, &mut rng);
                estimate_corrected(&rs, c, Mode::PlugIn, None).ok().map(|e| e.corrected)
            })
            .collect()
    });

    let mut ok: Vec<T> = estimates.into_iter().flatten().collect();
    let failures = opts.resamples - ok.len();
    if 2 * failures > opts.resamples || ok.len() < 2 {
        return Err(Error::Unreliable { failures, resamples: opts.resamples });
    }
    let stats: RunningStats<T> = ok.iter().copied().collect();
    ok.sort_by(|a, b| a.partial_cmp(b).expect("finite estimates"));
    let tail = (1.0 - opts.level) / 2.0;
    Ok(BootstrapResult {
        point_estimate: point,
        se: stats.sd().expect("at least two estimates"),
        resamples: opts.resamples,
        level: opts.level,
        interval: (quantile(&ok, tail), quantile(&ok, 1.0 - tail)),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::{generate_trial, SubjectRecord};
    use crate::model::ScenarioParams;

    fn data() -> TrialDataset<f64> {
        generate_trial(&ScenarioParams::reference(0.0, 0.0, 0.0, 1.0, 0.0, 0.0), StreamSeed::new(21, 0)).unwrap()
    }

    #[test]
    fn resamples_keep_arm_sizes() {
        let p = ScenarioParams::<f64>::reference(0.0, 0.0, 0.0, 1.0, 0.0, 0.0).with_arm_sizes(37, 52);
        let d = generate_trial(&p, StreamSeed::new(1, 0)).unwrap();
        let mut rng = StreamSeed::new(2, 0).rng();
        for _ in 0..20 {
            let rs = resample(&d, &mut rng);
            assert_eq!(rs.arm_size(Arm::Control), 37);
            assert_eq!(rs.arm_size(Arm::Treatment), 52);
            assert!(rs.records.iter().all(|s| d.records.contains(s)));
        }
    }

    #[test]
    fn deterministic_across_threads() {
        let d = data();
        let opts = BootstrapOptions::new(300, 5);
        let a = bootstrap_corrected(&d, d.c, &opts).unwrap();
        let b = bootstrap_corrected(&d, d.c, &opts).unwrap();
        let one = bootstrap_corrected(&d, d.c, &BootstrapOptions { threads: Some(1), ..opts }).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, one);
        assert!(a.se > 0.0 && a.interval.0 <= a.interval.1);
        assert!(a.interval.0 <= a.point_estimate && a.point_estimate <= a.interval.1);
    }

    #[test]
    fn constant_outcomes_give_zero_se() {
        let c = -1000.0;
        let records = (0..40)
            .map(|i| SubjectRecord {
                id: i + 1,
                z: if i < 20 { Arm::Control } else { Arm::Treatment },
                y1: (i % 7) as f64 * 0.3,
                r: false,
                y2: 2.5,
            })
            .collect();
        let d = TrialDataset { records, c };
        let res = bootstrap_corrected(&d, c, &BootstrapOptions::new(200, 1)).unwrap();
        assert_eq!(res.se, 0.0);
        assert_eq!(res.point_estimate, 0.0);
        assert_eq!(res.failures, 0);
    }

    #[test]
    fn argument_checks() {
        let d = data();
        assert!(bootstrap_corrected(&d, d.c, &BootstrapOptions::new(1, 1)).is_err());
        let bad_level = BootstrapOptions { level: 1.0, ..BootstrapOptions::new(10, 1) };
        assert!(bootstrap_corrected(&d, d.c, &bad_level).is_err());
    }

    #[test]
    fn unreliable_when_most_resamples_degenerate() {
        // arm 0 keeps two non-rescued subjects (P(fewer than 2 drawn) ~ 0.41);
        // arm 1 has a single distinct y1 (P(zero spread) ~ 0.36)
        let c = 0.0;
        let mut records: Vec<SubjectRecord<f64>> = (0..30)
            .map(|i| {
                let y1 = if i < 2 { 1.0 + i as f64 } else { -1.0 - i as f64 * 0.01 };
                SubjectRecord { id: i + 1, z: Arm::Control, y1, r: y1 <= c, y2: i as f64 * 0.1 }
            })
            .collect();
        records.extend((0..30).map(|i| SubjectRecord {
            id: 100 + i,
            z: Arm::Treatment,
            y1: if i == 0 { 2.0 } else { 1.0 },
            r: false,
            y2: i as f64 * 0.05,
        }));
        let d = TrialDataset { records, c };
        assert!(estimate_corrected(&d, c, Mode::PlugIn, None).is_ok());
        match bootstrap_corrected(&d, c, &BootstrapOptions::new(400, 3)) {
            Err(Error::Unreliable { failures, resamples }) => assert!(2 * failures > resamples),
            other => panic!("expected unreliable, got {other:?}"),
        }
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 5.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.125), 1.5);
    }
}
