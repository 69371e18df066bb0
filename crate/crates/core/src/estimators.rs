//! Estimators of the visit-2 treatment effect: ITT, the naive contrast among
//! non-rescued subjects, and the selection-corrected biological effect.
//!
//! Among non-rescued subjects of arm `z` the visit-2 mean is inflated by
//! `gamma12(z,0) sigma11(z) lambda(eta(z))`, where `gamma12 = sigma12 / sigma11^2`
//! and `lambda` is the normal hazard. The corrected estimator subtracts that
//! term per arm. In plug-in mode every quantity in it is estimated; the
//! covariance `sigma12(z,0)` comes from the truncated product moment:
//!
//! ```text
//! sigma12(z,0) = (E[Y1 Y2 | z, R=0] - E[Y2 | z, R=0] (mu1 + sigma11 lambda)) / (1 + lambda (eta - lambda))
//! ```

use std::fmt;

use crate::datagen::TrialDataset;
use crate::error::{Error, Result};
use crate::model::{Arm, ScenarioParams};
use crate::normal;
use crate::num::Real;

/// Smallest admissible truncated-variance factor `1 + lambda (eta - lambda)`.
pub const MIN_VARIANCE_FACTOR: f64 = 1e-8;

/// Non-rescued fraction below which an arm is flagged as unstable.
pub const LOW_NON_RESCUE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// Correction term built from estimates only.
    PlugIn,
    /// Correction term built from the generating scenario's true parameters.
    Oracle,
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Mode::PlugIn => "plug-in",
            Mode::Oracle => "oracle",
        })
    }
}

/// Sample moments of one arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArmMoments<T> {
    pub arm: Arm,
    pub n: usize,
    /// Mean of `y1` over all subjects.
    pub mean_y1: T,
    /// SD of `y1` over all subjects, `n - 1` denominator.
    pub sd_y1: T,
    pub eta_hat: T,
    pub lambda_hat: T,
    pub n_norescue: usize,
    pub mean_y2_norescue: T,
    pub mean_y1y2_norescue: T,
}

impl<T: Real> ArmMoments<T> {
    /// Estimated `1 + lambda (eta - lambda)`.
    pub fn variance_factor(&self) -> T {
        normal::variance_factor_unchecked(self.eta_hat)
    }

    pub fn rescue_rate(&self) -> T {
        T::one() - T::count(self.n_norescue) / T::count(self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Warning {
    LowNonRescueFraction { arm: Arm, fraction: f64 },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::LowNonRescueFraction { arm, fraction } => write!(
                f,
                "only {:.1}% of arm {arm} was not rescued; corrected estimate may be unstable",
                fraction * 100.0
            ),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimateSet<T> {
    pub itt: T,
    pub conditional: T,
    pub corrected: T,
    /// Estimated `sigma12(z, 0)`; only produced in plug-in mode.
    pub sigma12_hat: Option<[T; 2]>,
    /// Corrected `mu2(z, 0)` per arm.
    pub mu2_hat: [T; 2],
    pub mode: Mode,
    pub warnings: Vec<Warning>,
}

impl<T: Real> EstimateSet<T> {
    pub const CSV_HEADER: &'static str =
        "mode,itt,conditional,corrected,sigma12_hat_z0,sigma12_hat_z1,mu2_hat_z0,mu2_hat_z1";

    /// One flat CSV row matching [`Self::CSV_HEADER`]; absent values are empty.
    pub fn csv_row(&self) -> String {
        let (s0, s1) = match self.sigma12_hat {
            Some([a, b]) => (a.to_string(), b.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{},{}",
            self.mode, self.itt, self.conditional, self.corrected, s0, s1, self.mu2_hat[0], self.mu2_hat[1]
        )
    }
}

fn arm_mean<'a, T: Real>(values: impl Iterator<Item = T> + 'a) -> Option<T> {
    let (n, sum) = values.fold((0usize, T::zero()), |(n, s), v| (n + 1, s + v));
    (n > 0).then(|| sum / T::count(n))
}

/// `mean(y2 | z=1) - mean(y2 | z=0)` over all subjects.
pub fn estimate_itt<T: Real>(data: &TrialDataset<T>) -> Result<T> {
    let m = |z| arm_mean(data.arm(z).map(|s| s.y2)).ok_or(Error::EmptyArm(z));
    Ok(m(Arm::Treatment)? - m(Arm::Control)?)
}

fn norescue_mean_y2<T: Real>(data: &TrialDataset<T>, z: Arm) -> Result<T> {
    if data.arm(z).next().is_none() {
        return Err(Error::EmptyArm(z));
    }
    arm_mean(data.arm(z).filter(|s| !s.r).map(|s| s.y2)).ok_or(Error::NoNonRescued(z))
}

/// `mean(y2 | z=1, r=0) - mean(y2 | z=0, r=0)`.
pub fn estimate_conditional<T: Real>(data: &TrialDataset<T>) -> Result<T> {
    Ok(norescue_mean_y2(data, Arm::Treatment)? - norescue_mean_y2(data, Arm::Control)?)
}

fn arm_moments<T: Real>(data: &TrialDataset<T>, c: T, z: Arm) -> Result<ArmMoments<T>> {
    let (mut n, mut sum_y1) = (0usize, T::zero());
    let (mut k, mut sum_y2, mut sum_y1y2) = (0usize, T::zero(), T::zero());
    for s in data.arm(z) {
        n += 1;
        sum_y1 = sum_y1 + s.y1;
        if !s.r {
            k += 1;
            sum_y2 = sum_y2 + s.y2;
            sum_y1y2 = sum_y1y2 + s.y1 * s.y2;
        }
    }
    match n {
        0 => return Err(Error::EmptyArm(z)),
        1 => return Err(Error::UndersizedArm { arm: z, needed: 2, found: n }),
        _ => {}
    }
    match k {
        0 => return Err(Error::NoNonRescued(z)),
        1 => return Err(Error::UndersizedCell { arm: z, needed: 2, found: k }),
        _ => {}
    }
    let mean_y1 = sum_y1 / T::count(n);
    let ss = data.arm(z).fold(T::zero(), |acc, s| {
        let d = s.y1 - mean_y1;
        acc + d * d
    });
    let sd_y1 = (ss / T::count(n - 1)).sqrt();
    if sd_y1.is_nan() || sd_y1 <= T::zero() {
        return Err(Error::ZeroSpread(z));
    }
    let eta_hat = (c - mean_y1) / sd_y1;
    let lambda_hat = normal::hazard(eta_hat)?;
    Ok(ArmMoments {
        arm: z,
        n,
        mean_y1,
        sd_y1,
        eta_hat,
        lambda_hat,
        n_norescue: k,
        mean_y2_norescue: sum_y2 / T::count(k),
        mean_y1y2_norescue: sum_y1y2 / T::count(k),
    })
}

/// Sample moments of both arms, indexed by `Arm::index`.
///
/// Visit-1 quantities use every subject of the arm; visit-2 and product
/// moments use only non-rescued subjects.
pub fn compute_arm_moments<T: Real>(data: &TrialDataset<T>, c: T) -> Result<[ArmMoments<T>; 2]> {
    Ok([arm_moments(data, c, Arm::Control)?, arm_moments(data, c, Arm::Treatment)?])
}

/// Plug-in estimate of `sigma12(z, 0)` from one arm's moments.
pub fn estimate_sigma12<T: Real>(m: &ArmMoments<T>) -> Result<T> {
    let factor = m.variance_factor();
    if factor.is_nan() || factor <= T::lit(MIN_VARIANCE_FACTOR) {
        return Err(Error::DegenerateTruncation { arm: m.arm, factor: factor.to_f64().unwrap_or(f64::NAN) });
    }
    let truncated_mean = m.mean_y1 + m.sd_y1 * m.lambda_hat;
    Ok((m.mean_y1y2_norescue - m.mean_y2_norescue * truncated_mean) / factor)
}

fn low_fraction_warnings<T: Real>(data: &TrialDataset<T>) -> Vec<Warning> {
    Arm::BOTH
        .into_iter()
        .filter_map(|z| {
            let n = data.arm_size(z);
            let k = data.arm(z).filter(|s| !s.r).count();
            let fraction = if n == 0 { 0.0 } else { k as f64 / n as f64 };
            (fraction < LOW_NON_RESCUE_FRACTION).then_some(Warning::LowNonRescueFraction { arm: z, fraction })
        })
        .collect()
}

/// ITT, conditional and corrected estimates on one dataset.
///
/// In [`Mode::Oracle`] the correction uses `oracle`'s true `sigma11`,
/// `sigma12(z,0)` and `eta(z)`; in [`Mode::PlugIn`] it uses
/// [`compute_arm_moments`] and [`estimate_sigma12`].
pub fn estimate_corrected<T: Real>(
    data: &TrialDataset<T>,
    c: T,
    mode: Mode,
    oracle: Option<&ScenarioParams<T>>,
) -> Result<EstimateSet<T>> {
    let itt = estimate_itt(data)?;
    let conditional = estimate_conditional(data)?;
    let (mu2_hat, sigma12_hat) = match mode {
        Mode::Oracle => {
            let p = oracle.ok_or(Error::MissingOracle)?;
            let mut mu2 = [T::zero(); 2];
            for z in Arm::BOTH {
                let shift = p.slope(z, false) * p.sigma11(z) * normal::hazard(p.eta(z))?;
                mu2[z.index()] = norescue_mean_y2(data, z)? - shift;
            }
            (mu2, None)
        }
        Mode::PlugIn => {
            let moments = compute_arm_moments(data, c)?;
            let mut mu2 = [T::zero(); 2];
            let mut s12 = [T::zero(); 2];
            for m in &moments {
                let i = m.arm.index();
                s12[i] = estimate_sigma12(m)?;
                // gamma12 sigma11 lambda with gamma12 = sigma12 / sigma11^2
                mu2[i] = m.mean_y2_norescue - s12[i] / m.sd_y1 * m.lambda_hat;
            }
            (mu2, Some(s12))
        }
    };
    let corrected = mu2_hat[1] - mu2_hat[0];
    Ok(EstimateSet { itt, conditional, corrected, sigma12_hat, mu2_hat, mode, warnings: low_fraction_warnings(data) })
}
