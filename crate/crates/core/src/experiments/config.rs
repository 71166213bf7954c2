//! Flat JSON experiment configuration.
//!
//! Every key is optional except `recipe`. Missing keys take the recipe's
//! default if it has one, otherwise the global default, and the source of
//! each value is recorded.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use super::ssl::SslMode;
use super::tasks::{TaskKind, MAX_CLIQUE_NODES};
use crate::error::{Error, Result};
use crate::neural::Activation;

pub const RECIPES: [&str; 10] = [
    "fig4a",
    "fig4b",
    "fig4c",
    "fig4d",
    "table2",
    "table3",
    "table4",
    "fig7",
    "ssl_synthetic",
    "dataset_ssl",
];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    Er,
    Pa,
    Geometric,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub recipe: String,
    pub seeds: usize,
    pub seed_offset: u64,
    pub tasks: Vec<TaskKind>,
    pub generator: Generator,
    /// One training run per depth.
    pub depths: Vec<usize>,
    pub teacher_width: usize,
    pub student_width: usize,
    pub activation: Activation,
    pub lr: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub num_train: usize,
    pub num_val: usize,
    pub num_test: usize,
    /// Inclusive node-count range of training graphs.
    pub n_train: [usize; 2],
    /// Extra training ranges; when non-empty they replace `n_train`.
    pub train_ranges: Vec<[usize; 2]>,
    /// Edge probability of training graphs.
    pub p: f64,
    /// Preferential attachment edges per new node.
    pub m: usize,
    /// Geometric connection radius of training graphs.
    pub rho: f64,
    /// Test radius is `rho / ratio`.
    pub rho_ratios: Vec<f64>,
    pub test_n: Vec<usize>,
    pub test_p: Vec<f64>,
    /// Scale the test `p` so that `n·p` matches the training mean.
    pub scale_p: bool,
    pub ssl_modes: Vec<SslMode>,
    pub alpha: f64,
    pub ssl_depth: usize,
    pub standardize: bool,
    pub pretrain_epochs: Option<usize>,
    /// Few-shot counts; 0 means none.
    pub fewshot: Vec<usize>,
    pub dataset: Option<String>,
    pub data_dir: Option<String>,
    pub record_wall_time: bool,
    pub out: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    User,
    Recipe,
    Global,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedConfig {
    pub config: ExperimentConfig,
    pub provenance: BTreeMap<String, Provenance>,
}

fn global_defaults() -> Map<String, Value> {
    let v = json!({
        "seeds": 10,
        "seed_offset": 0,
        "tasks": ["teacher_student_graph"],
        "generator": "er",
        "depths": [3],
        "teacher_width": 32,
        "student_width": 64,
        "activation": "relu",
        "lr": 1e-3,
        "weight_decay": 0.1,
        "batch_size": 32,
        "max_epochs": 2000,
        "patience": 50,
        "num_train": 200,
        "num_val": 50,
        "num_test": 50,
        "n_train": [40, 50],
        "train_ranges": [],
        "p": 0.3,
        "m": 4,
        "rho": 0.3,
        "rho_ratios": [1.0],
        "test_n": [100],
        "test_p": [0.3],
        "scale_p": false,
        "ssl_modes": ["none"],
        "alpha": 0.5,
        "ssl_depth": 3,
        "standardize": true,
        "pretrain_epochs": null,
        "fewshot": [0],
        "dataset": null,
        "data_dir": null,
        "record_wall_time": false,
        "out": null
    });
    match v {
        Value::Object(m) => m,
        _ => unreachable!(),
    }
}

fn steps(lo: usize, hi: usize, step: usize) -> Vec<usize> {
    (lo..=hi).step_by(step).collect()
}

fn recipe_defaults(recipe: &str) -> Option<Map<String, Value>> {
    let four_tasks = json!(["teacher_student_graph", "edge_count", "teacher_student_node", "node_degree"]);
    let v = match recipe {
        "fig4a" => json!({ "test_n": steps(50, 150, 10) }),
        "fig4b" => json!({ "test_n": steps(50, 150, 10), "scale_p": true }),
        "fig4c" => json!({
            "train_ranges": steps(50, 150, 20).into_iter().map(|x| [40, x]).collect::<Vec<_>>(),
            "test_n": [150],
        }),
        "fig4d" => json!({
            "test_p": (1..=10).map(|i| i as f64 * 0.05).map(|p| (p * 100.0).round() / 100.0).collect::<Vec<_>>(),
        }),
        "table2" => json!({
            "tasks": ["max_clique"],
            "generator": "geometric",
            "depths": [1, 2, 3],
            "n_train": [25, 30],
            "test_n": [55],
            "rho_ratios": [1.0, std::f64::consts::SQRT_2],
        }),
        "table3" => json!({ "tasks": four_tasks, "test_p": [0.15, 0.3] }),
        "table4" => json!({ "train_ranges": [[90, 100], [140, 150], [190, 200]], "test_n": [50, 75] }),
        "fig7" => json!({
            "tasks": ["edge_count"],
            "generator": "pa",
            "depths": [1, 2, 3],
            "n_train": [10, 50],
            "test_n": steps(50, 500, 50),
        }),
        "ssl_synthetic" => json!({
            "tasks": four_tasks,
            "ssl_modes": ["none", "pretrain"],
            "fewshot": [0, 1, 5, 10],
        }),
        "dataset_ssl" => json!({
            "tasks": ["dataset_classification"],
            "ssl_modes": ["none", "pretrain", "multitask"],
        }),
        _ => return None,
    };
    match v {
        Value::Object(m) => Some(m),
        _ => unreachable!(),
    }
}

/// Parses and validates a flat JSON config.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| Error::config("<root>", format!("not valid JSON: {e}")))?;
    let user = match value {
        Value::Object(m) => m,
        _ => return Err(Error::config("<root>", "expected a JSON object")),
    };
    let recipe = match user.get("recipe") {
        Some(Value::String(s)) => s.clone(),
        Some(_) => return Err(Error::config("recipe", "expected a string")),
        None => return Err(Error::config("recipe", "missing")),
    };
    let recipe_map = recipe_defaults(&recipe).ok_or_else(|| Error::UnknownRecipe(recipe.clone()))?;
    let global = global_defaults();
    for key in user.keys() {
        if key != "recipe" && !global.contains_key(key) {
            return Err(Error::config(key.as_str(), "unknown field"));
        }
    }
    let mut merged = Map::new();
    let mut provenance = BTreeMap::new();
    merged.insert("recipe".into(), Value::String(recipe));
    provenance.insert("recipe".to_string(), Provenance::User);
    for (key, default) in global {
        let (v, p) = if let Some(v) = user.get(&key) {
            (v.clone(), Provenance::User)
        } else if let Some(v) = recipe_map.get(&key) {
            (v.clone(), Provenance::Recipe)
        } else {
            (default, Provenance::Global)
        };
        merged.insert(key.clone(), v);
        provenance.insert(key, p);
    }
    let config: ExperimentConfig = serde_path_to_error::deserialize(Value::Object(merged)).map_err(|e| {
        let path = e.path().to_string();
        Error::config(path, e.into_inner().to_string())
    })?;
    config.validate()?;
    Ok(ParsedConfig { config, provenance })
}

impl ExperimentConfig {
    /// Defaults of `recipe` with no user overrides.
    pub fn for_recipe(recipe: &str) -> Result<Self> {
        Ok(parse_config(&json!({ "recipe": recipe }).to_string())?.config)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Training ranges actually used.
    pub fn ranges(&self) -> Vec<[usize; 2]> {
        if self.train_ranges.is_empty() {
            vec![self.n_train]
        } else {
            self.train_ranges.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, msg: &str| Err(Error::config(field, msg));
        if !RECIPES.contains(&self.recipe.as_str()) {
            return Err(Error::UnknownRecipe(self.recipe.clone()));
        }
        for (field, v) in [
            ("seeds", self.seeds),
            ("teacher_width", self.teacher_width),
            ("student_width", self.student_width),
            ("batch_size", self.batch_size),
            ("patience", self.patience),
            ("num_train", self.num_train),
            ("num_test", self.num_test),
            ("ssl_depth", self.ssl_depth),
        ] {
            if v == 0 {
                return bad(field, "must be at least 1");
            }
        }
        if self.tasks.is_empty() {
            return bad("tasks", "must not be empty");
        }
        if self.depths.is_empty() || self.depths.contains(&0) {
            return bad("depths", "must be a non-empty list of positive depths");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("lr", "must be positive");
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("weight_decay", "must be non-negative");
        }
        if !(0.0..=1.0).contains(&self.p) {
            return bad("p", "must lie in [0, 1]");
        }
        if self.test_p.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("test_p", "every value must lie in [0, 1]");
        }
        if self.test_n.is_empty() || self.test_n.contains(&0) {
            return bad("test_n", "must be a non-empty list of positive sizes");
        }
        if !(self.rho > 0.0 && self.rho.is_finite()) {
            return bad("rho", "must be positive");
        }
        if self.rho_ratios.is_empty() || self.rho_ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return bad("rho_ratios", "must be a non-empty list of positive ratios");
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad("alpha", "must lie in [0, 1]");
        }
        if self.m == 0 {
            return bad("m", "must be at least 1");
        }
        for (field, ranges) in [("n_train", vec![self.n_train]), ("train_ranges", self.train_ranges.clone())] {
            for [lo, hi] in ranges {
                if lo == 0 || lo > hi {
                    return bad(field, "ranges must satisfy 1 <= lo <= hi");
                }
                if self.generator == Generator::Pa && lo <= self.m {
                    return bad(field, "preferential attachment needs more than m nodes");
                }
            }
        }
        if self.generator == Generator::Pa && self.test_n.iter().any(|&n| n <= self.m) {
            return bad("test_n", "preferential attachment needs more than m nodes");
        }
        if self.ssl_modes.is_empty() {
            return bad("ssl_modes", "must not be empty");
        }
        if self.fewshot.is_empty() || self.fewshot.iter().any(|&k| k >= self.num_test) {
            return bad("fewshot", "counts must be below num_test");
        }
        let dataset_recipe = self.recipe == "dataset_ssl";
        for t in &self.tasks {
            if (*t == TaskKind::DatasetClassification) != dataset_recipe {
                return bad("tasks", &format!("task {t} does not fit recipe {}", self.recipe));
            }
        }
        if dataset_recipe && self.dataset.is_none() {
            return bad("dataset", "required by dataset_ssl");
        }
        if self.tasks.contains(&TaskKind::MaxClique) {
            let largest = self.ranges().iter().map(|r| r[1]).chain(self.test_n.iter().copied()).max();
            if largest.is_some_and(|n| n > MAX_CLIQUE_NODES) {
                return bad("test_n", "max_clique graphs are limited to 60 nodes");
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_fig4a() {
        let parsed = parse_config(r#"{"recipe":"fig4a"}"#).unwrap();
        let c = &parsed.config;
        assert_eq!(c.n_train, [40, 50]);
        assert_eq!(c.p, 0.3);
        assert_eq!(c.depths, vec![3]);
        assert_eq!(c.test_n.first(), Some(&50));
        assert_eq!(c.test_n.last(), Some(&150));
        assert_eq!(parsed.provenance["test_n"], Provenance::Recipe);
        assert_eq!(parsed.provenance["p"], Provenance::Global);
        assert_eq!(parsed.provenance["recipe"], Provenance::User);
    }

    #[test]
    fn errors_name_the_field() {
        let field = |text: &str| match parse_config(text) {
            Err(Error::Config { field, .. }) => field,
            other => panic!("unexpected {other:?}"),
        };
        assert_eq!(field(r#"{"recipe":"fig4a","p":1.5}"#), "p");
        assert_eq!(field(r#"{"recipe":"fig4a","pp":1}"#), "pp");
        assert_eq!(field(r#"{"recipe":"fig4a","seeds":"ten"}"#), "seeds");
        assert_eq!(field(r#"{"recipe":"fig4a","tasks":["nope"]}"#), "tasks[0]");
        assert_eq!(field(r#"{"recipe":"table2","test_n":[100]}"#), "test_n");
        assert!(matches!(parse_config(r#"{"recipe":"fig9"}"#), Err(Error::UnknownRecipe(_))));
        assert!(parse_config(r#"{"recipe":"dataset_ssl"}"#).is_err());
    }

    #[test]
    fn every_recipe_has_valid_defaults() {
        for r in RECIPES {
            if r == "dataset_ssl" {
                continue;
            }
            ExperimentConfig::for_recipe(r).unwrap();
        }
        let c = parse_config(r#"{"recipe":"dataset_ssl","dataset":"NCI1"}"#).unwrap().config;
        assert_eq!(c.tasks, vec![TaskKind::DatasetClassification]);
    }

    #[test]
    fn round_trip() {
        let c = parse_config(r#"{"recipe":"fig4d","seeds":2,"lr":0.01}"#).unwrap().config;
        let again = parse_config(&c.to_json()).unwrap();
        assert_eq!(again.config, c);
        assert!(again.provenance.values().all(|p| *p == Provenance::User));
    }
}
