//! Command implementations behind the `patternlab` binary.

mod plot;
mod verify;


use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

pub use crate::experiments::config::{parse_config, ExperimentConfig, ParsedConfig, Provenance};
pub use plot::{export_plotdata, plot_rows, PlotRow, PLOT_HEADER, PLOT_IDS};
pub use verify::{print_checks, run_verify, VerifyCheck};

use crate::error::{Error, Result};
use crate::experiments::{load_tudataset, run_recipe, size_split, write_manifest, write_metrics, DATA_DIR_ENV};
use crate::patterns::{pattern_histogram, write_pattern_report};
use crate::rng::RngStream;

pub const RESOLVED_CONFIG: &str = "resolved_config.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const MANIFEST_FILE: &str = "fewshot_manifest.csv";

/// Process exit status for an error: 2 for usage and validation problems,
/// 1 for everything else.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Config { .. } | Error::UnknownRecipe(_) => 2,
        _ => 1,
    }
}

/// Writes through a temporary sibling so readers never see half a file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub seed_offset: Option<u64>,
}

/// Resolves a config file plus command-line overrides.
pub fn resolve_run_config(config_text: &str, opts: &RunOptions) -> Result<ExperimentConfig> {
    let mut cfg = parse_config(config_text)?.config;
    if let Some(off) = opts.seed_offset {
        cfg.seed_offset = off;
    }
    if let Some(out) = &opts.out {
        cfg.out = Some(out.to_string_lossy().into_owned());
    }
    if cfg.out.is_none() {
        return Err(Error::config("out", "no output directory given (use --out or the `out` key)"));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn prepare_out_dir(dir: &Path) -> Result<()> {
    if dir.exists() && !dir.is_dir() {
        return Err(Error::config("out", format!("{} is not a directory", dir.display())));
    }
    fs::create_dir_all(dir).map_err(|e| Error::config("out", format!("cannot create {}: {e}", dir.display())))?;
    let probe = dir.join(".patternlab-write-probe");
    fs::write(&probe, b"").map_err(|e| Error::config("out", format!("{} is not writable: {e}", dir.display())))?;
    let _ = fs::remove_file(&probe);
    Ok(())
}

/// `run`: snapshot the resolved config, run the recipe, write metrics (and a
/// few-shot manifest when there is one). Returns the output directory.
pub fn cmd_run(config_path: &Path, opts: &RunOptions) -> Result<PathBuf> {
    let text = fs::read_to_string(config_path).map_err(|e| Error::io(config_path, e))?;
    let cfg = resolve_run_config(&text, opts)?;
    let out = PathBuf::from(cfg.out.as_deref().expect("resolved"));
    prepare_out_dir(&out)?;
    write_atomic(&out.join(RESOLVED_CONFIG), cfg.to_json().as_bytes())?;
    let result = match opts.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| run_recipe(&cfg)),
        None => run_recipe(&cfg),
    }?;
    let mut buf = Vec::new();
    write_metrics(&mut buf, &result.records)?;
    write_atomic(&out.join(METRICS_FILE), &buf)?;
    if !result.manifest.is_empty() {
        let mut buf = Vec::new();
        write_manifest(&mut buf, &result.manifest)?;
        write_atomic(&out.join(MANIFEST_FILE), &buf)?;
    }
    Ok(out)
}

/// Dataset directory: explicit, else `$PATTERNLAB_DATA_DIR/<name>`, else
/// `$PATTERNLAB_DATA_DIR`.
pub fn resolve_dataset_dir(dir: Option<&Path>, name: &str) -> Result<PathBuf> {
    if let Some(d) = dir {
        return Ok(d.to_path_buf());
    }
    let root = std::env::var(DATA_DIR_ENV)
        .map(PathBuf::from)
        .map_err(|_| Error::config("dataset-dir", format!("not given and {DATA_DIR_ENV} unset")))?;
    Ok(if root.join(name).is_dir() { root.join(name) } else { root })
}

/// `pattern-report`: depth-`d` histograms of the smallest-50% pool and the
/// largest-10% split. Writes the report CSV to `out` and returns the TV
/// distance.
pub fn cmd_pattern_report<W: Write>(dir: &Path, name: &str, d: usize, out: &mut W) -> Result<f64> {
    let data = load_tudataset(dir, name)?;
    // Validation membership is irrelevant here; only the pool matters.
    let split = size_split(&data.sizes(), &mut RngStream::new(0, 0))?;
    let small: Vec<_> = split.small().into_iter().map(|i| data.graphs[i].clone()).collect();
    let large: Vec<_> = split.test.iter().map(|&i| data.graphs[i].clone()).collect();
    let h_small = pattern_histogram(&small, d)?;
    let h_large = pattern_histogram(&large, d)?;
    write_pattern_report(out, &h_small, &h_large)
}

/// `export-plotdata`: tidy `(series, x, mean, std, count)` rows.
pub fn cmd_export_plotdata<W: Write>(metrics: &Path, plot_id: &str, out: &mut W) -> Result<()> {
    let file = fs::File::open(metrics).map_err(|e| Error::io(metrics, e))?;
    let records = crate::experiments::read_metrics(std::io::BufReader::new(file))?;
    export_plotdata(&records, plot_id, out)
}
