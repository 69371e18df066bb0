//! The generative model of a two-visit trial with a deterministic rescue rule.
//!
//! Visit-1 outcome `Y1(z) ~ N(mu1(z), sigma11(z)^2)`. A subject is rescued iff
//! `Y1 <= c`. The visit-2 outcome in cell `(z, r)` is bivariate normal with
//! `Y1(z)`, with mean `mu2(z, r)`, SD `sigma22(z, r)` and covariance
//! `sigma12(z, r)`.

mod config;
mod strata;

use std::fmt;

pub use config::{format_scenarios, parse_scenarios};
pub use strata::{strata_effects, StrataEffects, StrataRow, StrataTable, Stratum};

use crate::error::{Error, Result};
use crate::normal;
use crate::num::Real;

/// Randomized treatment assignment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Arm {
    Control,
    Treatment,
}

impl Arm {
    pub const BOTH: [Arm; 2] = [Arm::Control, Arm::Treatment];

    pub fn index(self) -> usize {
        match self {
            Arm::Control => 0,
            Arm::Treatment => 1,
        }
    }

    pub fn from_index(z: u8) -> Option<Arm> {
        match z {
            0 => Some(Arm::Control),
            1 => Some(Arm::Treatment),
            _ => None,
        }
    }

    pub fn other(self) -> Arm {
        match self {
            Arm::Control => Arm::Treatment,
            Arm::Treatment => Arm::Control,
        }
    }
}

impl fmt::Display for Arm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Arm::Control => "0",
            Arm::Treatment => "1",
        })
    }
}

/// Full parameterisation of one simulation scenario.
///
/// Per-cell arrays are indexed `[z]` or `[z][r]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScenarioParams<T> {
    pub alpha1: T,
    pub beta1: T,
    pub alpha2: T,
    pub beta2: T,
    pub gamma: T,
    pub delta: T,
    /// SD of `Y1(z)`.
    pub sigma11: [T; 2],
    /// SD of `Y2(z, r)`.
    pub sigma22: [[T; 2]; 2],
    /// Covariance of `(Y1(z), Y2(z, r))`.
    pub sigma12: [[T; 2]; 2],
    /// Rescue threshold: rescued iff `y1 <= c`.
    pub c: T,
    pub n0: usize,
    pub n1: usize,
}

impl<T: Real> ScenarioParams<T> {
    /// Scenario with the given mean structure and the fixed design used in
    /// the reference simulation grid: 50 subjects per arm, unit SDs,
    /// covariance 0.6 in every cell and threshold -0.5.
    pub fn reference(alpha1: T, beta1: T, alpha2: T, beta2: T, gamma: T, delta: T) -> Self {
        let one = T::one();
        let cov = T::lit(0.6);
        ScenarioParams {
            alpha1,
            beta1,
            alpha2,
            beta2,
            gamma,
            delta,
            sigma11: [one; 2],
            sigma22: [[one; 2]; 2],
            sigma12: [[cov; 2]; 2],
            c: T::lit(-0.5),
            n0: 50,
            n1: 50,
        }
    }

    pub fn with_arm_sizes(mut self, n0: usize, n1: usize) -> Self {
        self.n0 = n0;
        self.n1 = n1;
        self
    }

    pub fn arm_size(&self, z: Arm) -> usize {
        match z {
            Arm::Control => self.n0,
            Arm::Treatment => self.n1,
        }
    }

    /// Checks finiteness, positive definiteness of every cell and arm sizes.
    pub fn validate(&self) -> Result<()> {
        let scalars = [
            ("alpha1", self.alpha1),
            ("beta1", self.beta1),
            ("alpha2", self.alpha2),
            ("beta2", self.beta2),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("c", self.c),
        ];
        for (name, v) in scalars {
            if !v.is_finite() {
                return Err(Error::InvalidScenario(format!("{name} is not finite")));
            }
        }
        for z in Arm::BOTH {
            for r in [false, true] {
                normal::conditional_slope_and_residual(self.sigma11[z.index()], self.sigma12(z, r), self.sigma22(z, r))
                    .map_err(|e| Error::InvalidScenario(format!("cell z={z} r={}: {e}", u8::from(r))))?;
            }
        }
        if self.n0 < 2 || self.n1 < 2 {
            return Err(Error::InvalidScenario(format!(
                "arm sizes must be at least 2, got n0={} n1={}",
                self.n0, self.n1
            )));
        }
        Ok(())
    }

    /// `mu1(z) = alpha1 + beta1 z`.
    pub fn mu1(&self, z: Arm) -> T {
        self.alpha1 + self.beta1 * T::count(z.index())
    }

    /// `mu2(z, r) = alpha2 + beta2 z + gamma r + delta z r`.
    pub fn mu2(&self, z: Arm, r: bool) -> T {
        let zf = T::count(z.index());
        let rf = if r { T::one() } else { T::zero() };
        self.alpha2 + self.beta2 * zf + self.gamma * rf + self.delta * zf * rf
    }

    pub fn sigma11(&self, z: Arm) -> T {
        self.sigma11[z.index()]
    }

    pub fn sigma22(&self, z: Arm, r: bool) -> T {
        self.sigma22[z.index()][usize::from(r)]
    }

    pub fn sigma12(&self, z: Arm, r: bool) -> T {
        self.sigma12[z.index()][usize::from(r)]
    }

    /// Standardised threshold `eta(z) = (c - mu1(z)) / sigma11(z)`.
    pub fn eta(&self, z: Arm) -> T {
        (self.c - self.mu1(z)) / self.sigma11(z)
    }

    /// Probability of rescue in arm `z`, `Phi(eta(z))`.
    pub fn rescue_probability(&self, z: Arm) -> T {
        normal::cdf(self.eta(z))
    }

    /// Regression slope `sigma12(z, r) / sigma11(z)^2` of `Y2(z, r)` on `Y1(z)`.
    pub fn slope(&self, z: Arm, r: bool) -> T {
        let s = self.sigma11(z);
        self.sigma12(z, r) / (s * s)
    }

    /// The biological effect `mu2(1,0) - mu2(0,0) = beta2`.
    pub fn true_biological_effect(&self) -> T {
        self.beta2
    }

    /// `E[Y2 | Z = z]` when `Y2` is drawn from its conditional law given the
    /// realised `Y1` and the rescue it triggers.
    pub fn arm_mean_y2(&self, z: Arm) -> T {
        let eta = self.eta(z);
        let p_rescue = normal::cdf(eta);
        let mixture = p_rescue * self.mu2(z, true) + (T::one() - p_rescue) * self.mu2(z, false);
        // E[(Y1 - mu1) 1{Y1 > c}] = sigma11 phi(eta) and the rescued part is its negative.
        let selection = self.sigma11(z) * normal::pdf(eta) * (self.slope(z, false) - self.slope(z, true));
        mixture + selection
    }

    /// Expected ITT contrast `E[Y2 | Z=1] - E[Y2 | Z=0]`.
    pub fn true_itt_effect(&self) -> T {
        self.arm_mean_y2(Arm::Treatment) - self.arm_mean_y2(Arm::Control)
    }

    /// `E[Y2 | Z = z, R = r]` under the model.
    pub fn cell_mean_y2(&self, z: Arm, r: bool) -> T {
        let eta = self.eta(z);
        let shift = self.slope(z, r) * self.sigma11(z);
        if r {
            // E[Y1 - mu1 | Y1 <= c] = -sigma11 phi(eta) / Phi(eta)
            self.mu2(z, true) - shift * normal::pdf(eta) / normal::cdf(eta)
        } else {
            self.mu2(z, false) + shift * normal::hazard_unchecked(eta)
        }
    }
}
