//! Flat `key = value` scenario files.
//!
//! One scenario per record; records are separated by blank lines and `#`
//! starts a comment. Every key must appear exactly once per record:
//!
//! ```text
//! alpha1 = 0
//! beta1 = 1
//! alpha2 = 0
//! beta2 = 1
//! gamma = 0
//! delta = 0
//! sigma11_z0 = 1
//! sigma11_z1 = 1
//! sigma22_z0r0 = 1
//! ...
//! sigma12_z1r1 = 0.6
//! c = -0.5
//! n0 = 50
//! n1 = 50
//! ```

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::model::ScenarioParams;
use crate::num::Real;

const CELLS: [&str; 4] = ["z0r0", "z0r1", "z1r0", "z1r1"];

fn keys() -> Vec<String> {
    let mut keys: Vec<String> =
        ["alpha1", "beta1", "alpha2", "beta2", "gamma", "delta"].iter().map(|s| s.to_string()).collect();
    keys.extend(["sigma11_z0".to_string(), "sigma11_z1".to_string()]);
    keys.extend(CELLS.iter().map(|c| format!("sigma22_{c}")));
    keys.extend(CELLS.iter().map(|c| format!("sigma12_{c}")));
    keys.extend(["c", "n0", "n1"].iter().map(|s| s.to_string()));
    keys
}

/// Parses every record in `text`. Each scenario is validated.
pub fn parse_scenarios<T: Real>(text: &str) -> Result<Vec<ScenarioParams<T>>> {
    let names = keys();
    let mut out = Vec::new();
    let mut record: Vec<Option<(usize, String)>> = vec![None; names.len()];
    let mut record_start = 0;
    let mut in_record = false;

    let mut finish = |record: &mut Vec<Option<(usize, String)>>, start: usize| -> Result<()> {
        let p = build(&names, record, start)?;
        p.validate().map_err(|e| Error::Parse { line: start, message: e.to_string() })?;
        out.push(p);
        record.iter_mut().for_each(|v| *v = None);
        Ok(())
    };

    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            if in_record && raw.trim().is_empty() {
                finish(&mut record, record_start)?;
                in_record = false;
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("expected `key = value`, got `{line}`") })?;
        let key = key.trim();
        let idx = names
            .iter()
            .position(|n| n == key)
            .ok_or_else(|| Error::Parse { line: line_no, message: format!("unknown key `{key}`") })?;
        if !in_record {
            in_record = true;
            record_start = line_no;
        }
        if record[idx].is_some() {
            return Err(Error::Parse { line: line_no, message: format!("duplicate key `{key}`") });
        }
        record[idx] = Some((line_no, value.trim().to_string()));
    }
    if in_record {
        finish(&mut record, record_start)?;
    }
    if out.is_empty() {
        return Err(Error::Parse { line: 0, message: "no scenario records".into() });
    }
    Ok(out)
}

fn build<T: Real>(names: &[String], record: &[Option<(usize, String)>], start: usize) -> Result<ScenarioParams<T>> {
    let get = |k: usize| -> Result<&(usize, String)> {
        record[k]
            .as_ref()
            .ok_or_else(|| Error::Parse { line: start, message: format!("record missing key `{}`", names[k]) })
    };
    let real = |k: usize| -> Result<T> {
        let (line, v) = get(k)?;
        v.parse::<f64>().map(T::lit).map_err(|e| Error::Parse { line: *line, message: format!("{}: {e}", names[k]) })
    };
    let int = |k: usize| -> Result<usize> {
        let (line, v) = get(k)?;
        v.parse::<usize>().map_err(|e| Error::Parse { line: *line, message: format!("{}: {e}", names[k]) })
    };
    Ok(ScenarioParams {
        alpha1: real(0)?,
        beta1: real(1)?,
        alpha2: real(2)?,
        beta2: real(3)?,
        gamma: real(4)?,
        delta: real(5)?,
        sigma11: [real(6)?, real(7)?],
        sigma22: [[real(8)?, real(9)?], [real(10)?, real(11)?]],
        sigma12: [[real(12)?, real(13)?], [real(14)?, real(15)?]],
        c: real(16)?,
        n0: int(17)?,
        n1: int(18)?,
    })
}

/// Writes scenarios in the format read by [`parse_scenarios`].
pub fn format_scenarios<T: Real>(scenarios: &[ScenarioParams<T>]) -> String {
    let mut s = String::new();
    for (i, p) in scenarios.iter().enumerate() {
        if i > 0 {
            s.push('\n');
        }
        let values: Vec<String> = [p.alpha1, p.beta1, p.alpha2, p.beta2, p.gamma, p.delta]
            .into_iter()
            .chain(p.sigma11)
            .chain(p.sigma22.into_iter().flatten())
            .chain(p.sigma12.into_iter().flatten())
            .chain([p.c])
            .map(|v| v.to_string())
            .chain([p.n0.to_string(), p.n1.to_string()])
            .collect();
        for (k, v) in keys().iter().zip(values) {
            let _ = writeln!(s, "{k} = {v}");
        }
    }
    s
}
