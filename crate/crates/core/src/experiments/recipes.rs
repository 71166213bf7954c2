//! Experiment recipes: data generation, training and evaluation per seed.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, Mutex, OnceLock};
use std::time::Instant;

use rayon::prelude::*;
use sha2::{Digest, Sha256};

use super::config::{ExperimentConfig, Generator};
use super::dataset::{load_tudataset, Dataset};
use super::metrics::{ManifestRow, MetricsRecord};
use super::split::size_split;
use super::ssl::{add_ssl_head, ssl_labels, train_ssl, SplitData, SslMode, SslProtocol, SslStandardizer};
use super::tasks::{label, Task, TaskKind};
use crate::error::{Error, Result};
use crate::gnn::{evaluate_head, sample_teacher, GnnArch, GnnModel, GnnObjective, GraphSample, Readout, MAIN_HEAD};
use crate::graph::{gen_er, gen_geometric, gen_pa, Graph};
use crate::neural::{
    train_loop, AdamConfig, AdamState, EpochRecord, Target, TrainConfig, TrainOutcome, ValidationMetric,
};
use crate::rng::RngStream;

/// Environment variable naming the dataset root when `data_dir` is unset.
pub const DATA_DIR_ENV: &str = "PATTERNLAB_DATA_DIR";

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecipeOutput {
    pub records: Vec<MetricsRecord>,
    pub manifest: Vec<ManifestRow>,
}

/// A stream keyed by a label, so the same data is drawn whichever recipe
/// asks for it.
pub fn labelled_stream(seed: u64, label: &str) -> RngStream {
    let digest = Sha256::digest(label.as_bytes());
    let mut id = [0u8; 8];
    id.copy_from_slice(&digest[..8]);
    RngStream::new(seed, u64::from_le_bytes(id))
}

/// Runs every seed of `cfg.recipe` (seeds in parallel) and concatenates the
/// records in seed order.
pub fn run_recipe(cfg: &ExperimentConfig) -> Result<RecipeOutput> {
    cfg.validate()?;
    let dataset = if cfg.recipe == "dataset_ssl" {
        Some(load_configured_dataset(cfg)?)
    } else {
        None
    };
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| cfg.seed_offset + i).collect();
    let parts: Vec<Result<RecipeOutput>> = seeds
        .par_iter()
        .map(|&seed| match cfg.recipe.as_str() {
            "ssl_synthetic" => run_ssl_synthetic(cfg, seed),
            "dataset_ssl" => run_dataset_ssl(cfg, dataset.as_ref().expect("loaded above"), seed),
            _ => run_size_generalization(cfg, seed),
        })
        .collect();
    let mut out = RecipeOutput::default();
    for p in parts {
        let p = p?;
        out.records.extend(p.records);
        out.manifest.extend(p.manifest);
    }
    Ok(out)
}

/// Merges JSON overrides into the recipe defaults and runs it.
pub fn run_recipe_with(recipe: &str, overrides: &serde_json::Value) -> Result<RecipeOutput> {
    let mut map = match overrides {
        serde_json::Value::Object(m) => m.clone(),
        serde_json::Value::Null => serde_json::Map::new(),
        _ => return Err(Error::config("<root>", "overrides must be a JSON object")),
    };
    map.insert("recipe".into(), recipe.into());
    let cfg = super::config::parse_config(&serde_json::Value::Object(map).to_string())?.config;
    run_recipe(&cfg)
}

fn load_configured_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    let name = cfg
        .dataset
        .as_deref()
        .ok_or_else(|| Error::config("dataset", "required by dataset_ssl"))?;
    let root = cfg
        .data_dir
        .clone()
        .or_else(|| std::env::var(DATA_DIR_ENV).ok())
        .ok_or_else(|| Error::Dataset(format!("no data_dir configured and {DATA_DIR_ENV} unset")))?;
    let root = PathBuf::from(root);
    let dir = if root.join(name).is_dir() { root.join(name) } else { root };
    load_tudataset(&dir, name)
}

fn generate(cfg: &ExperimentConfig, n: usize, param: f64, rng: &mut RngStream) -> Result<Graph> {
    match cfg.generator {
        Generator::Er => gen_er(n, param, rng),
        Generator::Pa => gen_pa(n, cfg.m, rng),
        Generator::Geometric => gen_geometric(n, param, rng),
    }
}

fn train_param(cfg: &ExperimentConfig) -> f64 {
    match cfg.generator {
        Generator::Er => cfg.p,
        Generator::Pa => 0.0,
        Generator::Geometric => cfg.rho,
    }
}

fn sample_graphs(
    cfg: &ExperimentConfig,
    count: usize,
    [lo, hi]: [usize; 2],
    param: f64,
    rng: &mut RngStream,
) -> Result<Vec<Arc<Graph>>> {
    (0..count)
        .map(|_| {
            let n = rng.range_inclusive(lo, hi);
            generate(cfg, n, param, rng).map(Arc::new)
        })
        .collect()
}

/// One test distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct TestSpec {
    /// Split tag, e.g. `test:n=150;p=0.3`.
    pub tag: String,
    pub n: usize,
    pub param: f64,
}

pub fn test_specs(cfg: &ExperimentConfig, [lo, hi]: [usize; 2]) -> Vec<TestSpec> {
    let mut out = Vec::new();
    match cfg.generator {
        Generator::Er => {
            for &n in &cfg.test_n {
                if cfg.scale_p {
                    let p = (cfg.p * (lo + hi) as f64 / 2.0 / n as f64).min(1.0);
                    out.push(TestSpec {
                        tag: format!("test:n={n};p={p}"),
                        n,
                        param: p,
                    });
                } else {
                    for &p in &cfg.test_p {
                        out.push(TestSpec {
                            tag: format!("test:n={n};p={p}"),
                            n,
                            param: p,
                        });
                    }
                }
            }
        }
        Generator::Pa => {
            for &n in &cfg.test_n {
                out.push(TestSpec {
                    tag: format!("test:n={n};m={}", cfg.m),
                    n,
                    param: 0.0,
                });
            }
        }
        Generator::Geometric => {
            for &ratio in &cfg.rho_ratios {
                for &n in &cfg.test_n {
                    let rho = cfg.rho / ratio;
                    out.push(TestSpec {
                        tag: format!("test:n={n};ratio={ratio};rho={rho}"),
                        n,
                        param: rho,
                    });
                }
            }
        }
    }
    out
}

fn test_graphs(cfg: &ExperimentConfig, spec: &TestSpec, seed: u64) -> Result<Vec<Arc<Graph>>> {
    let mut rng = labelled_stream(seed, &format!("graphs:{:?};{}", cfg.generator, spec.tag));
    sample_graphs(cfg, cfg.num_test, [spec.n, spec.n], spec.param, &mut rng)
}

fn student_arch(cfg: &ExperimentConfig, input_dim: usize, depth: usize, readout: Readout, out: usize) -> GnnArch {
    GnnArch {
        input_dim,
        widths: vec![cfg.student_width; depth],
        activation: cfg.activation,
        readout,
        head_hidden: vec![cfg.student_width],
        output_dim: out,
    }
}

/// The task with, for teacher-student kinds, its seeded teacher.
pub fn make_task(cfg: &ExperimentConfig, kind: TaskKind, depth: usize, seed: u64) -> Result<Task> {
    if !kind.needs_teacher() {
        return Task::new(kind);
    }
    let arch = GnnArch {
        input_dim: 1,
        widths: vec![cfg.teacher_width; depth],
        activation: cfg.activation,
        readout: kind.readout(),
        head_hidden: vec![cfg.teacher_width],
        output_dim: 1,
    };
    let teacher_seed = labelled_stream(seed, &format!("teacher:{kind};depth={depth}")).next_f64().to_bits();
    Task::with_teacher(kind, Arc::new(sample_teacher(&arch, teacher_seed)?))
}

fn labelled(task: &Task, graphs: &[Arc<Graph>]) -> Result<Vec<GraphSample>> {
    graphs
        .par_iter()
        .map(|g| Ok(GraphSample::new(g.clone(), label(task, g)?)))
        .collect()
}

fn train_config(cfg: &ExperimentConfig, kind: TaskKind, rng: RngStream) -> TrainConfig {
    let mut t = TrainConfig::new(cfg.max_epochs, cfg.batch_size, cfg.patience, kind.loss(), rng);
    if kind == TaskKind::DatasetClassification {
        t.metric = ValidationMetric::Accuracy;
    }
    t
}

fn adam_config(cfg: &ExperimentConfig) -> AdamConfig {
    AdamConfig::with_lr(cfg.lr, cfg.weight_decay)
}

/// A finished vanilla run.
#[derive(Debug)]
pub struct TrainedRun {
    pub task: Task,
    pub outcome: TrainOutcome<GnnModel>,
    pub wall_ms: u64,
}

type RunCache = Mutex<HashMap<String, Arc<TrainedRun>>>;

fn run_cache() -> &'static RunCache {
    static CACHE: OnceLock<RunCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Empties the process-wide cache of trained runs.
pub fn clear_run_cache() {
    run_cache().lock().expect("cache lock").clear();
}

fn run_key(cfg: &ExperimentConfig, kind: TaskKind, depth: usize, range: [usize; 2], seed: u64) -> String {
    format!(
        "{kind}|{depth}|{range:?}|{seed}|{:?}|{}|{}|{:?}|{}|{}|{}|{}|{}|{}|{}|{}|{}|{}",
        cfg.generator,
        cfg.teacher_width,
        cfg.student_width,
        cfg.activation,
        cfg.lr,
        cfg.weight_decay,
        cfg.batch_size,
        cfg.max_epochs,
        cfg.patience,
        cfg.num_train,
        cfg.num_val,
        cfg.p,
        cfg.m,
        cfg.rho
    )
}

fn source_label(kind: TaskKind, depth: usize, [lo, hi]: [usize; 2]) -> String {
    format!("{kind};depth={depth};train={lo}-{hi}")
}

fn source_data(
    cfg: &ExperimentConfig,
    task: &Task,
    depth: usize,
    range: [usize; 2],
    seed: u64,
) -> Result<(Vec<GraphSample>, Vec<GraphSample>)> {
    let base = source_label(task.kind(), depth, range);
    let param = train_param(cfg);
    let train = sample_graphs(cfg, cfg.num_train, range, param, &mut labelled_stream(seed, &format!("train:{base}")))?;
    let val = sample_graphs(cfg, cfg.num_val, range, param, &mut labelled_stream(seed, &format!("val:{base}")))?;
    Ok((labelled(task, &train)?, labelled(task, &val)?))
}

/// Trains (or fetches from the process cache) a vanilla student.
pub fn train_vanilla(
    cfg: &ExperimentConfig,
    kind: TaskKind,
    depth: usize,
    range: [usize; 2],
    seed: u64,
) -> Result<Arc<TrainedRun>> {
    let key = run_key(cfg, kind, depth, range, seed);
    if let Some(hit) = run_cache().lock().expect("cache lock").get(&key) {
        return Ok(hit.clone());
    }
    let start = Instant::now();
    let task = make_task(cfg, kind, depth, seed)?;
    let (train, val) = source_data(cfg, &task, depth, range, seed)?;
    let base = source_label(kind, depth, range);
    let arch = student_arch(cfg, 1, depth, kind.readout(), 1);
    let student = GnnModel::init(&arch, &mut labelled_stream(seed, &format!("student:{base}")))?;
    let mut tc = train_config(cfg, kind, labelled_stream(seed, &format!("shuffle:{base}")));
    let mut adam = AdamState::new(adam_config(cfg), &student);
    let outcome = train_loop(&GnnObjective::new(MAIN_HEAD), student, &train, &val, &mut tc, &mut adam)?;
    let run = Arc::new(TrainedRun {
        task,
        outcome,
        wall_ms: start.elapsed().as_millis() as u64,
    });
    run_cache().lock().expect("cache lock").insert(key, run.clone());
    Ok(run)
}

fn history_records(experiment: &str, seed: u64, prefix: &str, history: &[EpochRecord]) -> Vec<MetricsRecord> {
    let mut out = Vec::with_capacity(2 * history.len());
    for h in history {
        out.push(MetricsRecord::new(experiment, seed, &format!("{prefix}train"), h.epoch, h.train_loss));
        let mut v = MetricsRecord::new(experiment, seed, &format!("{prefix}val"), h.epoch, h.val_loss);
        v.accuracy = h.val_accuracy;
        out.push(v);
    }
    out
}

fn mean_abs_label(data: &[GraphSample]) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for s in data {
        if let Target::Values(m) = &s.target {
            sum += m.data().iter().map(|v| v.abs()).sum::<f64>();
            count += m.data().len();
        }
    }
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

fn stamp(records: &mut [MetricsRecord], cfg: &ExperimentConfig, wall_ms: u64) {
    if cfg.record_wall_time {
        for r in records {
            r.wall_ms = Some(wall_ms);
        }
    }
}

fn run_size_generalization(cfg: &ExperimentConfig, seed: u64) -> Result<RecipeOutput> {
    let mut records = Vec::new();
    for &kind in &cfg.tasks {
        for &depth in &cfg.depths {
            for range in cfg.ranges() {
                let run = train_vanilla(cfg, kind, depth, range, seed)?;
                let experiment = format!("{}:task={kind};depth={depth};train={}-{}", cfg.recipe, range[0], range[1]);
                let mut rows = history_records(&experiment, seed, "", &run.outcome.history);
                stamp(&mut rows, cfg, run.wall_ms);
                records.extend(rows);
                let model = &run.outcome.model;
                for spec in test_specs(cfg, range) {
                    let start = Instant::now();
                    let data = labelled(&run.task, &test_graphs(cfg, &spec, seed)?)?;
                    let eval = evaluate_head(model, MAIN_HEAD, &data, kind.loss())?;
                    let mut rows = vec![MetricsRecord::new(&experiment, seed, &spec.tag, run.outcome.best_epoch, eval.loss)];
                    rows[0].accuracy = eval.accuracy;
                    if cfg.recipe == "table3" {
                        let scale = mean_abs_label(&data);
                        let rel = if scale > 0.0 { eval.loss / scale } else { eval.loss };
                        let tag = spec.tag.replacen("test:", "test_rel:", 1);
                        rows.push(MetricsRecord::new(&experiment, seed, &tag, run.outcome.best_epoch, rel));
                    }
                    stamp(&mut rows, cfg, start.elapsed().as_millis() as u64);
                    records.extend(rows);
                }
            }
        }
    }
    Ok(RecipeOutput {
        records,
        manifest: Vec::new(),
    })
}

fn pick_fewshot(seed: u64, label: &str, pool: usize, k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pool).collect();
    labelled_stream(seed, label).shuffle(&mut idx);
    let mut chosen = idx[..k.min(pool)].to_vec();
    chosen.sort_unstable();
    chosen
}

/// One SSL comparison: trains every (mode, k) cell on shared data and
/// emits records and manifest rows.
struct SslCell<'a> {
    cfg: &'a ExperimentConfig,
    seed: u64,
    experiment_base: String,
    manifest_name: String,
    input_dim: usize,
    depth: usize,
    kind: TaskKind,
    output_dim: usize,
    main: SplitData,
    ssl: SplitData,
    ssl_dim: usize,
    /// `(tag, data)`; few-shot examples come from the first entry.
    targets: Vec<(String, Vec<GraphSample>)>,
}

impl SslCell<'_> {
    fn run(&self, out: &mut RecipeOutput) -> Result<()> {
        let cfg = self.cfg;
        for &mode in &cfg.ssl_modes {
            for &k in &cfg.fewshot {
                let start = Instant::now();
                let label = format!("{};mode={};k={k}", self.experiment_base, mode.name());
                let mut model = GnnModel::init(
                    &student_arch(cfg, self.input_dim, self.depth, self.kind.readout(), self.output_dim),
                    &mut labelled_stream(self.seed, &format!("student:{}", self.experiment_base)),
                )?;
                if mode != SslMode::None {
                    add_ssl_head(
                        &mut model,
                        self.ssl_dim,
                        &mut labelled_stream(self.seed, &format!("ssl-head:{}", self.experiment_base)),
                    )?;
                }
                let (first_tag, first) = &self.targets[0];
                let chosen = if k > 0 {
                    pick_fewshot(self.seed, &format!("fewshot:{};k={k}", self.experiment_base), first.len(), k)
                } else {
                    Vec::new()
                };
                let fewshot: Vec<GraphSample> = chosen.iter().map(|&i| first[i].clone()).collect();
                let protocol = SslProtocol {
                    mode,
                    alpha: cfg.alpha,
                    fewshot_weight: None,
                    depth: cfg.ssl_depth,
                    standardize: cfg.standardize,
                    pretrain_epochs: cfg.pretrain_epochs,
                };
                let tc = train_config(cfg, self.kind, labelled_stream(self.seed, &format!("shuffle:{label}")));
                let result = train_ssl(model, &protocol, &self.main, Some(&self.ssl), &fewshot, &tc, adam_config(cfg))?;
                let experiment = format!("{}:{label}", cfg.recipe);
                let mut rows = Vec::new();
                for (phase, o) in &result.phases {
                    let prefix = if *phase == "pretrain" { "ssl_" } else { "" };
                    rows.extend(history_records(&experiment, self.seed, prefix, &o.history));
                }
                let best_epoch = result.main().best_epoch;
                for (i, (tag, data)) in self.targets.iter().enumerate() {
                    let kept: Vec<GraphSample> = if i == 0 {
                        data.iter()
                            .enumerate()
                            .filter(|(j, _)| chosen.binary_search(j).is_err())
                            .map(|(_, s)| s.clone())
                            .collect()
                    } else {
                        data.clone()
                    };
                    let eval = evaluate_head(&result.model, MAIN_HEAD, &kept, self.kind.loss())?;
                    let mut r = MetricsRecord::new(&experiment, self.seed, tag, best_epoch, eval.loss);
                    r.accuracy = eval.accuracy;
                    rows.push(r);
                }
                stamp(&mut rows, cfg, start.elapsed().as_millis() as u64);
                out.records.extend(rows);
                if k > 0 {
                    out.manifest.push(ManifestRow {
                        dataset: format!("{}:{first_tag}", self.manifest_name),
                        seed: self.seed,
                        k,
                        indices: chosen,
                    });
                }
            }
        }
        Ok(())
    }
}

fn with_ssl_labels(graphs: &[Arc<Graph>], st: &SslStandardizer) -> Result<Vec<GraphSample>> {
    graphs
        .par_iter()
        .map(|g| Ok(GraphSample::new(g.clone(), ssl_labels(g, st)?)))
        .collect()
}

fn graphs_of(data: &[GraphSample]) -> Vec<Arc<Graph>> {
    data.iter().map(|s| s.graph.clone()).collect()
}

fn run_ssl_synthetic(cfg: &ExperimentConfig, seed: u64) -> Result<RecipeOutput> {
    let mut out = RecipeOutput::default();
    let range = cfg.n_train;
    for &kind in &cfg.tasks {
        for &depth in &cfg.depths {
            let task = make_task(cfg, kind, depth, seed)?;
            let (train, val) = source_data(cfg, &task, depth, range, seed)?;
            let mut targets = Vec::new();
            for spec in test_specs(cfg, range) {
                let data = labelled(&task, &test_graphs(cfg, &spec, seed)?)?;
                targets.push((spec.tag, data));
            }
            let mut ssl_graphs = graphs_of(&train);
            for (_, data) in &targets {
                ssl_graphs.extend(graphs_of(data));
            }
            let st = SslStandardizer::fit(ssl_graphs.iter().map(|g| g.as_ref()), cfg.ssl_depth, cfg.standardize)?;
            let ssl = SplitData {
                train: with_ssl_labels(&ssl_graphs, &st)?,
                val: with_ssl_labels(&graphs_of(&val), &st)?,
            };
            let base = source_label(kind, depth, range);
            SslCell {
                cfg,
                seed,
                manifest_name: format!("synthetic:task={kind}"),
                experiment_base: base.replacen(&format!("{kind}"), &format!("task={kind}"), 1),
                input_dim: 1,
                depth,
                kind,
                output_dim: 1,
                main: SplitData { train, val },
                ssl,
                ssl_dim: st.output_dim(),
                targets,
            }
            .run(&mut out)?;
        }
    }
    Ok(out)
}

fn run_dataset_ssl(cfg: &ExperimentConfig, dataset: &Dataset, seed: u64) -> Result<RecipeOutput> {
    let mut out = RecipeOutput::default();
    let split = size_split(&dataset.sizes(), &mut labelled_stream(seed, &format!("split:{}", dataset.name)))?;
    let (classes, num_labels) = dataset.class_labels();
    let graphs: Vec<Arc<Graph>> = dataset.graphs.iter().cloned().map(Arc::new).collect();
    let sample = |i: &usize| GraphSample::new(graphs[*i].clone(), Target::Classes(vec![classes[*i]]));
    let main = SplitData {
        train: split.train.iter().map(sample).collect(),
        val: split.val.iter().map(sample).collect(),
    };
    let test: Vec<GraphSample> = split.test.iter().map(sample).collect();
    let ssl_graphs: Vec<Arc<Graph>> = split.train.iter().chain(&split.test).map(|&i| graphs[i].clone()).collect();
    let st = SslStandardizer::fit(ssl_graphs.iter().map(|g| g.as_ref()), cfg.ssl_depth, cfg.standardize)?;
    let ssl = SplitData {
        train: with_ssl_labels(&ssl_graphs, &st)?,
        val: with_ssl_labels(&graphs_of(&main.val), &st)?,
    };
    let kind = TaskKind::DatasetClassification;
    for &depth in &cfg.depths {
        SslCell {
            cfg,
            seed,
            experiment_base: format!("dataset={};depth={depth}", dataset.name),
            manifest_name: dataset.name.clone(),
            input_dim: dataset.num_classes,
            depth,
            kind,
            output_dim: num_labels.max(2),
            main: main.clone(),
            ssl: ssl.clone(),
            ssl_dim: st.output_dim(),
            targets: vec![("test".to_string(), test.clone())],
        }
        .run(&mut out)?;
    }
    Ok(out)
}
