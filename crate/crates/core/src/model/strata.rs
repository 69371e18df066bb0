//! Discrete principal-stratum tables.
//!
//! A stratum is the pair of potential rescue indicators `(R(0), R(1))`.
//! Proportions and per-stratum means are supplied by the user; they are not
//! identified from trial data.

use std::fmt;
use std::io::Read;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::num::Real;

const PROPORTION_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stratum {
    /// Never rescued.
    S00,
    /// Rescued only under treatment.
    S01,
    /// Rescued only under control.
    S10,
    /// Always rescued.
    S11,
}

impl Stratum {
    pub fn rescue_under(self) -> (bool, bool) {
        match self {
            Stratum::S00 => (false, false),
            Stratum::S01 => (false, true),
            Stratum::S10 => (true, false),
            Stratum::S11 => (true, true),
        }
    }
}

impl fmt::Display for Stratum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stratum::S00 => "00",
            Stratum::S01 => "01",
            Stratum::S10 => "10",
            Stratum::S11 => "11",
        };
        f.pad(s)
    }
}

impl FromStr for Stratum {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "00" => Ok(Stratum::S00),
            "01" => Ok(Stratum::S01),
            "10" => Ok(Stratum::S10),
            "11" => Ok(Stratum::S11),
            other => Err(Error::Domain(format!("unknown stratum label `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrataRow<T> {
    pub stratum: Stratum,
    pub proportion: T,
    /// `E[Y2(0, R(0))]` within the stratum.
    pub mean_control: T,
    /// `E[Y2(1, R(1))]` within the stratum.
    pub mean_treatment: T,
}

/// Validated stratum table: labels unique, proportions in `[0, 1]` summing to one.
#[derive(Debug, Clone, PartialEq)]
pub struct StrataTable<T> {
    rows: Vec<StrataRow<T>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StrataEffects<T> {
    pub per_stratum: Vec<(Stratum, T)>,
    pub itt: T,
    /// `None` when the table has no `00` row.
    pub stratum00: Option<T>,
}

impl<T: Real> StrataTable<T> {
    pub fn new(rows: Vec<StrataRow<T>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Domain("stratum table has no rows".into()));
        }
        for (i, row) in rows.iter().enumerate() {
            if rows[..i].iter().any(|r| r.stratum == row.stratum) {
                return Err(Error::Domain(format!("stratum {} listed twice", row.stratum)));
            }
            if !(row.proportion >= T::zero() && row.proportion <= T::one()) {
                return Err(Error::Domain(format!(
                    "stratum {} proportion {} outside [0, 1]",
                    row.stratum, row.proportion
                )));
            }
            if !row.mean_control.is_finite() || !row.mean_treatment.is_finite() {
                return Err(Error::Domain(format!("stratum {} has a non-finite mean", row.stratum)));
            }
        }
        let total = rows.iter().fold(T::zero(), |acc, r| acc + r.proportion);
        if (total - T::one()).abs() > T::lit(PROPORTION_TOLERANCE) {
            return Err(Error::Domain(format!("stratum proportions sum to {total}, not 1")));
        }
        Ok(StrataTable { rows })
    }

    pub fn rows(&self) -> &[StrataRow<T>] {
        &self.rows
    }

    /// Reads `stratum,proportion,mean_control,mean_treatment` CSV.
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers().map_err(|e| Error::Parse { line: 1, message: e.to_string() })?.clone();
        let expected = ["stratum", "proportion", "mean_control", "mean_treatment"];
        if headers.iter().ne(expected) {
            return Err(Error::Parse { line: 1, message: format!("expected header `{}`", expected.join(",")) });
        }
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| Error::Parse { line, message: e.to_string() })?;
            let num = |k: usize| -> Result<T> {
                rec[k]
                    .parse::<f64>()
                    .map(T::lit)
                    .map_err(|e| Error::Parse { line, message: format!("{}: {e}", expected[k]) })
            };
            rows.push(StrataRow {
                stratum: rec[0].parse().map_err(|e: Error| Error::Parse { line, message: e.to_string() })?,
                proportion: num(1)?,
                mean_control: num(2)?,
                mean_treatment: num(3)?,
            });
        }
        StrataTable::new(rows)
    }
}

/// Per-stratum contrasts, their proportion-weighted ITT and the `00` effect.
pub fn strata_effects<T: Real>(table: &StrataTable<T>) -> StrataEffects<T> {
    let per_stratum: Vec<(Stratum, T)> =
        table.rows.iter().map(|r| (r.stratum, r.mean_treatment - r.mean_control)).collect();
    let itt = table.rows.iter().zip(&per_stratum).fold(T::zero(), |acc, (r, (_, e))| acc + r.proportion * *e);
    let stratum00 = per_stratum.iter().find(|(s, _)| *s == Stratum::S00).map(|(_, e)| *e);
    StrataEffects { per_stratum, itt, stratum00 }
}
