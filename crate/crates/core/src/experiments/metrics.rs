//! Metrics and few-shot manifest CSV files.
//!
//! ```text
//! experiment,seed,split,epoch,loss,accuracy,wall_ms
//! fig4a,0,train,1,1357671.1,,
//! fig4a,0,test:n=150,28,286322.4,,
//! ```
//!
//! `experiment` and `split` may carry `key=value` parameters after a colon,
//! separated by `;`.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "experiment,seed,split,epoch,loss,accuracy,wall_ms";
pub const MANIFEST_HEADER: &str = "dataset,seed,k,indices";

#[derive(Clone, Debug, PartialEq)]
pub struct MetricsRecord {
    pub experiment: String,
    pub seed: u64,
    pub split: String,
    pub epoch: usize,
    pub loss: f64,
    pub accuracy: Option<f64>,
    pub wall_ms: Option<u64>,
}

impl MetricsRecord {
    pub fn new(experiment: &str, seed: u64, split: &str, epoch: usize, loss: f64) -> Self {
        Self {
            experiment: experiment.to_string(),
            seed,
            split: split.to_string(),
            epoch,
            loss,
            accuracy: None,
            wall_ms: None,
        }
    }

    /// Parameters from both the experiment and split tags.
    pub fn params(&self) -> BTreeMap<String, String> {
        let mut out = tag_params(&self.experiment);
        out.extend(tag_params(&self.split));
        out
    }

    /// Split name without parameters.
    pub fn split_kind(&self) -> &str {
        self.split.split(':').next().unwrap_or("")
    }
}

/// `name:a=1;b=2` → `{a: 1, b: 2}`.
pub fn tag_params(tag: &str) -> BTreeMap<String, String> {
    tag.split_once(':')
        .map(|(_, rest)| {
            rest.split(';')
                .filter_map(|kv| kv.split_once('='))
                .map(|(k, v)| (k.to_string(), v.to_string()))
                .collect()
        })
        .unwrap_or_default()
}

fn check_field(s: &str) -> Result<()> {
    if s.contains([',', '\n', '"']) {
        return Err(Error::InvalidArgument(format!("metrics field `{s}` contains a separator")));
    }
    Ok(())
}

pub fn write_metrics<W: Write>(out: &mut W, records: &[MetricsRecord]) -> Result<()> {
    let io = |e| Error::io("<metrics>", e);
    writeln!(out, "{METRICS_HEADER}").map_err(io)?;
    for r in records {
        check_field(&r.experiment)?;
        check_field(&r.split)?;
        if !r.loss.is_finite() || r.accuracy.is_some_and(|a| !a.is_finite()) {
            return Err(Error::NonFinite("metrics record"));
        }
        let acc = r.accuracy.map(|a| a.to_string()).unwrap_or_default();
        let wall = r.wall_ms.map(|w| w.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.experiment, r.seed, r.split, r.epoch, r.loss, acc, wall
        )
        .map_err(io)?;
    }
    Ok(())
}

pub fn read_metrics<R: BufRead>(input: R) -> Result<Vec<MetricsRecord>> {
    let mut lines = input.lines();
    let header = lines
        .next()
        .transpose()
        .map_err(|e| Error::io("<metrics>", e))?
        .unwrap_or_default();
    let columns: Vec<&str> = header.split(',').collect();
    let col = |name: &str| {
        columns
            .iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::InvalidArgument(format!("metrics file lacks column `{name}`")))
    };
    let idx = [
        col("experiment")?,
        col("seed")?,
        col("split")?,
        col("epoch")?,
        col("loss")?,
    ];
    let acc_col = columns.iter().position(|c| *c == "accuracy");
    let wall_col = columns.iter().position(|c| *c == "wall_ms");
    let mut out = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| Error::io("<metrics>", e))?;
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::InvalidArgument(format!("malformed metrics line {}: `{line}`", i + 2));
        if f.len() != columns.len() {
            return Err(bad());
        }
        let opt = |c: Option<usize>| c.map(|c| f[c]).filter(|s| !s.is_empty());
        out.push(MetricsRecord {
            experiment: f[idx[0]].to_string(),
            seed: f[idx[1]].parse().map_err(|_| bad())?,
            split: f[idx[2]].to_string(),
            epoch: f[idx[3]].parse().map_err(|_| bad())?,
            loss: f[idx[4]].parse().map_err(|_| bad())?,
            accuracy: opt(acc_col).map(str::parse).transpose().map_err(|_| bad())?,
            wall_ms: opt(wall_col).map(str::parse).transpose().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Few-shot examples picked for one run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ManifestRow {
    pub dataset: String,
    pub seed: u64,
    pub k: usize,
    pub indices: Vec<usize>,
}

/// Indices are `;`-separated inside the last column.
pub fn write_manifest<W: Write>(out: &mut W, rows: &[ManifestRow]) -> Result<()> {
    let io = |e| Error::io("<manifest>", e);
    writeln!(out, "{MANIFEST_HEADER}").map_err(io)?;
    for r in rows {
        check_field(&r.dataset)?;
        let idx: Vec<String> = r.indices.iter().map(usize::to_string).collect();
        writeln!(out, "{},{},{},{}", r.dataset, r.seed, r.k, idx.join(";")).map_err(io)?;
    }
    Ok(())
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut a = MetricsRecord::new("fig4c:x=60", 3, "test:n=150", 12, 0.25);
        a.accuracy = Some(0.5);
        let b = MetricsRecord::new("fig4a", 0, "train", 1, 1e6);
        let mut buf = Vec::new();
        write_metrics(&mut buf, &[a.clone(), b.clone()]).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with(METRICS_HEADER));
        assert_eq!(read_metrics(&buf[..]).unwrap(), vec![a.clone(), b]);
        let p = a.params();
        assert_eq!(p["x"], "60");
        assert_eq!(p["n"], "150");
        assert_eq!(a.split_kind(), "test");
    }

    #[test]
    fn rejects_bad_input() {
        let r = MetricsRecord::new("a,b", 0, "train", 1, 1.0);
        assert!(write_metrics(&mut Vec::new(), &[r]).is_err());
        let r = MetricsRecord::new("a", 0, "train", 1, f64::NAN);
        assert!(write_metrics(&mut Vec::new(), &[r]).is_err());
        assert!(read_metrics("experiment,seed,split\n".as_bytes()).is_err());
    }

    #[test]
    fn manifest_format() {
        let mut buf = Vec::new();
        let row = ManifestRow {
            dataset: "synthetic".into(),
            seed: 1,
            k: 3,
            indices: vec![4, 9, 11],
        };
        write_manifest(&mut buf, &[row]).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "dataset,seed,k,indices\nsynthetic,1,3,4;9;11\n");
    }

    #[test]
    fn mean_and_std() {
        assert_eq!(mean_std(&[1.0, 3.0]), (2.0, 1.0));
        assert_eq!(mean_std(&[5.0]).1, 0.0);
    }
}
