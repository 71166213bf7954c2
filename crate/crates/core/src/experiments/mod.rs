//! Tasks, size splits, dataset ingestion, self-supervised protocols and
//! the experiment recipes built on them.

pub mod config;
pub mod dataset;
pub mod metrics;
pub mod recipes;
pub mod split;
pub mod ssl;
pub mod tasks;

pub use config::{parse_config, ExperimentConfig, Generator, ParsedConfig, Provenance, RECIPES};
pub use dataset::{load_tudataset, Dataset};
pub use metrics::{
    mean_std, read_metrics, tag_params, write_manifest, write_metrics, ManifestRow, MetricsRecord, MANIFEST_HEADER,
    METRICS_HEADER,
};
pub use recipes::{
    clear_run_cache, labelled_stream, make_task, run_recipe, run_recipe_with, test_specs, train_vanilla,
    RecipeOutput, TestSpec, TrainedRun, DATA_DIR_ENV,
};
pub use split::{size_split, SizeSplit};
pub use ssl::{
    add_ssl_head, mixed_loss_and_grad, raw_ssl_labels, ssl_labels, train_ssl, train_weighted, LossWeights,
    SplitData, SslMode, SslOutcome, SslProtocol, SslStandardizer, WeightedSource, SSL_HEAD,
};
pub use tasks::{label, max_clique, Task, TaskKind, MAX_CLIQUE_NODES};
