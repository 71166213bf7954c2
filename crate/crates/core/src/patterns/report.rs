//! Pattern report CSV: one row per pattern in the union support, then a
//! trailing `# tv_distance=<value>` comment row.
//!
//! ```text
//! depth,pattern_digest_hex,train_mass,test_mass
//! 2,0f3a...,0.125,0
//! # tv_distance=0.4375
//! ```

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use super::histogram::{tv_distance, PatternHistogram};
use super::refine::PatternId;
use crate::error::{Error, Result};

pub const REPORT_HEADER: &str = "depth,pattern_digest_hex,train_mass,test_mass";

#[derive(Clone, Debug, PartialEq)]
pub struct PatternReportRow {
    pub id: PatternId,
    pub train_mass: f64,
    pub test_mass: f64,
}

/// Writes the report and returns the TV distance it ends with.
pub fn write_pattern_report<W: Write>(
    out: &mut W,
    train: &PatternHistogram,
    test: &PatternHistogram,
) -> Result<f64> {
    let tv = tv_distance(train, test)?;
    let io = |e| Error::io("<pattern report>", e);
    writeln!(out, "{REPORT_HEADER}").map_err(io)?;
    let support: BTreeSet<PatternId> = train.support().chain(test.support()).copied().collect();
    for id in support {
        writeln!(
            out,
            "{},{},{},{}",
            id.depth(),
            id.hex(),
            train.mass(&id),
            test.mass(&id)
        )
        .map_err(io)?;
    }
    writeln!(out, "# tv_distance={tv}").map_err(io)?;
    Ok(tv)
}

/// Parses a report back into rows and the trailing TV value.
pub fn read_pattern_report<R: BufRead>(input: R) -> Result<(Vec<PatternReportRow>, f64)> {
    let bad = |line: &str| Error::InvalidArgument(format!("malformed pattern report line `{line}`"));
    let mut rows = Vec::new();
    let mut tv = None;
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| Error::io("<pattern report>", e))?;
        if i == 0 {
            if line != REPORT_HEADER {
                return Err(bad(&line));
            }
            continue;
        }
        if let Some(v) = line.strip_prefix("# tv_distance=") {
            tv = Some(v.parse::<f64>().map_err(|_| bad(&line))?);
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(bad(&line));
        }
        let depth: usize = fields[0].parse().map_err(|_| bad(&line))?;
        let digest = u128::from_str_radix(fields[1], 16).map_err(|_| bad(&line))?;
        rows.push(PatternReportRow {
            id: PatternId::from_parts(depth, digest),
            train_mass: fields[2].parse().map_err(|_| bad(&line))?,
            test_mass: fields[3].parse().map_err(|_| bad(&line))?,
        });
    }
    let tv = tv.ok_or_else(|| bad("<missing tv_distance row>"))?;
    Ok((rows, tv))
}
