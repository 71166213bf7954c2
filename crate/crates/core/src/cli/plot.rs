use std::collections::BTreeMap;
use std::io::Write;

use crate::error::{Error, Result};
use crate::experiments::{mean_std, MetricsRecord};

pub const PLOT_HEADER: &str = "series,x,mean,std,count";

/// `(plot id, x parameter, log10 of the value)`.
pub const PLOT_IDS: [(&str, &str, bool); 9] = [
    ("fig4a", "n", true),
    ("fig4b", "n", true),
    ("fig4c", "train", true),
    ("fig4d", "p", true),
    ("fig7", "n", true),
    ("table2", "ratio", false),
    ("table3", "p", false),
    ("table4", "n", false),
    ("fig5", "k", false),
];

#[derive(Clone, Debug, PartialEq)]
pub struct PlotRow {
    pub series: String,
    pub x: f64,
    pub mean: f64,
    pub std: f64,
    pub count: usize,
}

/// Numeric x value; a `lo-hi` range maps to `hi`.
fn parse_x(raw: &str) -> Option<f64> {
    let last = raw.rsplit('-').next().unwrap_or(raw);
    raw.parse().ok().or_else(|| last.parse().ok())
}

/// Aggregates final test records over seeds. Classification records use
/// accuracy, everything else loss.
pub fn plot_rows(records: &[MetricsRecord], plot_id: &str) -> Result<Vec<PlotRow>> {
    let &(_, key, log) = PLOT_IDS
        .iter()
        .find(|(id, _, _)| *id == plot_id)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown plot id `{plot_id}`")))?;
    let recipe = match plot_id {
        "fig5" => None,
        other => Some(other),
    };
    let mut groups: BTreeMap<(String, u64), Vec<f64>> = BTreeMap::new();
    let mut xs: BTreeMap<(String, u64), f64> = BTreeMap::new();
    for r in records {
        if r.split_kind() != "test" {
            continue;
        }
        let name = r.experiment.split(':').next().unwrap_or("");
        if recipe.is_some_and(|want| want != name) {
            continue;
        }
        let params = r.params();
        let Some(x) = params.get(key).and_then(|v| parse_x(v)) else {
            continue;
        };
        let series: Vec<String> = params
            .iter()
            .filter(|(k, _)| k.as_str() != key)
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        let series = format!("{name}[{}]", series.join(";"));
        let value = r.accuracy.unwrap_or(r.loss);
        let value = if log { value.log10() } else { value };
        let id = (series, x.to_bits());
        groups.entry(id.clone()).or_default().push(value);
        xs.insert(id, x);
    }
    if groups.is_empty() {
        return Err(Error::InvalidArgument(format!(
            "no test records with parameter `{key}` for plot `{plot_id}`"
        )));
    }
    let mut rows: Vec<PlotRow> = groups
        .into_iter()
        .map(|(id, values)| {
            let (mean, std) = mean_std(&values);
            PlotRow {
                x: xs[&id],
                series: id.0,
                mean,
                std,
                count: values.len(),
            }
        })
        .collect();
    rows.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
    Ok(rows)
}

pub fn export_plotdata<W: Write>(records: &[MetricsRecord], plot_id: &str, out: &mut W) -> Result<()> {
    let rows = plot_rows(records, plot_id)?;
    let io = |e| Error::io("<plot data>", e);
    writeln!(out, "{PLOT_HEADER}").map_err(io)?;
    for r in rows {
        writeln!(out, "{},{},{},{},{}", r.series, r.x, r.mean, r.std, r.count).map_err(io)?;
    }
    Ok(())
}
