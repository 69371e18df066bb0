//! Synthetic trial datasets, dataset validation and the `id,z,y1,r,y2`
//! delimited format.
//!
//! Randomness is addressed by a [`StreamSeed`]: a master seed plus a stream
//! index (the replicate number in a simulation study). Each stream is an
//! independent ChaCha8 keystream, so a dataset depends only on
//! `(params, master, stream)` and never on scheduling. Within a stream the
//! subjects are drawn in id order: arm 0 first, then arm 1.

use std::collections::HashSet;
use std::fmt;
use std::io::{Read, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::model::{Arm, ScenarioParams};
use crate::normal;
use crate::num::Real;

/// Address of an independent random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamSeed {
    pub master: u64,
    pub stream: u64,
}

impl StreamSeed {
    pub fn new(master: u64, stream: u64) -> Self {
        StreamSeed { master, stream }
    }

    pub fn rng(self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SubjectRecord<T> {
    pub id: u64,
    pub z: Arm,
    pub y1: T,
    /// Rescue indicator.
    pub r: bool,
    pub y2: T,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialDataset<T> {
    pub records: Vec<SubjectRecord<T>>,
    /// Rescue threshold in force when the data were collected.
    pub c: T,
}

impl<T: Real> TrialDataset<T> {
    pub fn arm(&self, z: Arm) -> impl Iterator<Item = &SubjectRecord<T>> + '_ {
        self.records.iter().filter(move |s| s.z == z)
    }

    pub fn arm_size(&self, z: Arm) -> usize {
        self.arm(z).count()
    }

    /// Reads the `id,z,y1,r,y2` format. Values are taken as written; use
    /// [`validate_dataset`] to check them against the rescue rule.
    pub fn read_csv<R: Read>(reader: R, c: T) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        if header.iter().ne(["id", "z", "y1", "r", "y2"]) {
            return Err(Error::Parse { line: 1, message: "expected header `id,z,y1,r,y2`".into() });
        }
        let mut records = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let err = |field: &str, e: &dyn fmt::Display| Error::Parse { line, message: format!("{field}: {e}") };
            let flag = |field: &str, v: &str| -> Result<u8> {
                match v {
                    "0" => Ok(0),
                    "1" => Ok(1),
                    other => Err(err(field, &format!("expected 0 or 1, got `{other}`"))),
                }
            };
            let real = |field: &str, v: &str| -> Result<T> { v.parse::<f64>().map(T::lit).map_err(|e| err(field, &e)) };
            records.push(SubjectRecord {
                id: rec[0].parse().map_err(|e| err("id", &e))?,
                z: Arm::from_index(flag("z", &rec[1])?).expect("flag is 0 or 1"),
                y1: real("y1", &rec[2])?,
                r: flag("r", &rec[3])? == 1,
                y2: real("y2", &rec[4])?,
            });
        }
        Ok(TrialDataset { records, c })
    }

    /// Writes the `id,z,y1,r,y2` format using the shortest representation
    /// that parses back to the same value.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "id,z,y1,r,y2")?;
        for s in &self.records {
            writeln!(out, "{},{},{},{},{}", s.id, s.z, s.y1, u8::from(s.r), s.y2)?;
        }
        Ok(())
    }
}

/// Per-cell draw parameters `(slope, residual sd)` indexed `[z][r]`.
fn cell_laws<T: Real>(params: &ScenarioParams<T>) -> Result<[[(T, T); 2]; 2]> {
    let mut laws = [[(T::zero(), T::zero()); 2]; 2];
    for z in Arm::BOTH {
        for r in [false, true] {
            laws[z.index()][usize::from(r)] =
                normal::conditional_slope_and_residual(params.sigma11(z), params.sigma12(z, r), params.sigma22(z, r))?;
        }
    }
    Ok(laws)
}

/// Simulates one trial.
///
/// `Y1 ~ N(mu1(z), sigma11(z)^2)`, `R = [Y1 <= c]`, and `Y2` is drawn from its
/// conditional law given the realised `Y1` in cell `(z, R)`.
pub fn generate_trial<T: Real>(params: &ScenarioParams<T>, seed: StreamSeed) -> Result<TrialDataset<T>>
where
    StandardNormal: Distribution<T>,
{
    params.validate()?;
    let laws = cell_laws(params)?;
    let mut rng = seed.rng();
    let mut records = Vec::with_capacity(params.n0 + params.n1);
    let mut id = 0u64;
    for z in Arm::BOTH {
        let mu1 = params.mu1(z);
        let sd1 = params.sigma11(z);
        for _ in 0..params.arm_size(z) {
            id += 1;
            let e1: T = StandardNormal.sample(&mut rng);
            let e2: T = StandardNormal.sample(&mut rng);
            let y1 = mu1 + sd1 * e1;
            let r = y1 <= params.c;
            let (slope, resid) = laws[z.index()][usize::from(r)];
            let y2 = params.mu2(z, r) + slope * (y1 - mu1) + resid * e2;
            records.push(SubjectRecord { id, z, y1, r, y2 });
        }
    }
    Ok(TrialDataset { records, c: params.c })
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// `r` disagrees with `y1 <= c`.
    RescueRule {
        id: u64,
        y1: f64,
        r: bool,
    },
    DuplicateId(u64),
    EmptyArm(Arm),
    NonFinite {
        id: u64,
        field: &'static str,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::RescueRule { id, y1, r } => write!(
                f,
                "subject {id}: r={} but y1={y1} is {} the threshold",
                u8::from(*r),
                if *r { "above" } else { "at or below" }
            ),
            Violation::DuplicateId(id) => write!(f, "duplicate subject id {id}"),
            Violation::EmptyArm(z) => write!(f, "arm {z} has no subjects"),
            Violation::NonFinite { id, field } => write!(f, "subject {id}: {field} is not finite"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks the rescue rule, id uniqueness, arm occupancy and finiteness.
pub fn validate_dataset<T: Real>(data: &TrialDataset<T>) -> ValidationReport {
    let mut violations = Vec::new();
    let mut seen = HashSet::with_capacity(data.records.len());
    for s in &data.records {
        if !seen.insert(s.id) {
            violations.push(Violation::DuplicateId(s.id));
        }
        let y1_ok = s.y1.is_finite();
        if !y1_ok {
            violations.push(Violation::NonFinite { id: s.id, field: "y1" });
        }
        if !s.y2.is_finite() {
            violations.push(Violation::NonFinite { id: s.id, field: "y2" });
        }
        if y1_ok && s.r != (s.y1 <= data.c) {
            violations.push(Violation::RescueRule { id: s.id, y1: s.y1.to_f64().unwrap_or(f64::NAN), r: s.r });
        }
    }
    for z in Arm::BOTH {
        if data.arm(z).next().is_none() {
            violations.push(Violation::EmptyArm(z));
        }
    }
    ValidationReport { violations }
}
