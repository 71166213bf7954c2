//! Pattern-tree self-supervision: descriptor targets and the pretraining,
//! multitask and few-shot training protocols.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{evaluate_head, GnnModel, GnnObjective, GraphSample, Readout, MAIN_HEAD};
use crate::graph::Graph;
use crate::neural::{
    train_loop, AdamConfig, AdamState, EpochRecord, LossKind, Matrix, Parameters, Target, TrainConfig,
    TrainOutcome, ValidationMetric,
};
use crate::patterns::pattern_tree_descriptors;
use crate::rng::RngStream;

pub const SSL_HEAD: &str = "ssl";

/// Unstandardised targets: one row per node, `(d+1)·num_classes` columns.
pub fn raw_ssl_labels(g: &Graph, d: usize) -> Result<Matrix> {
    if d == 0 {
        return Err(Error::InvalidArgument("ssl depth must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = pattern_tree_descriptors(g, d).iter().map(|t| t.flatten()).collect();
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, (d + 1) * g.num_classes()));
    }
    Matrix::from_rows(&rows)
}

/// Per-coordinate affine map fitted on training nodes. Coordinates with zero
/// spread are dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct SslStandardizer {
    depth: usize,
    width: usize,
    keep: Vec<usize>,
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl SslStandardizer {
    /// With `standardize == false` the map is the identity on every column.
    pub fn fit<'a>(graphs: impl IntoIterator<Item = &'a Graph>, d: usize, standardize: bool) -> Result<Self> {
        let mut width = None;
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for g in graphs {
            let raw = raw_ssl_labels(g, d)?;
            let w = *width.get_or_insert(raw.cols());
            if w != raw.cols() {
                return Err(Error::DimensionMismatch {
                    expected: w,
                    actual: raw.cols(),
                    context: "ssl descriptor width",
                });
            }
            if sum.is_empty() {
                sum = vec![0.0; w];
                sq = vec![0.0; w];
            }
            for i in 0..raw.rows() {
                for (j, &x) in raw.row(i).iter().enumerate() {
                    sum[j] += x;
                    sq[j] += x * x;
                }
            }
            count += raw.rows();
        }
        let width = width.ok_or(Error::EmptyInput("ssl graphs"))?;
        if !standardize {
            return Ok(Self {
                depth: d,
                width,
                keep: (0..width).collect(),
                mean: vec![0.0; width],
                std: vec![1.0; width],
            });
        }
        if count == 0 {
            return Err(Error::EmptyInput("ssl nodes"));
        }
        let n = count as f64;
        let mut keep = Vec::new();
        let mut mean = Vec::new();
        let mut std = Vec::new();
        for j in 0..width {
            let m = sum[j] / n;
            let var = (sq[j] / n - m * m).max(0.0);
            let s = var.sqrt();
            if s > 1e-9 * m.abs().max(1.0) {
                keep.push(j);
                mean.push(m);
                std.push(s);
            }
        }
        Ok(Self {
            depth: d,
            width,
            keep,
            mean,
            std,
        })
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    /// Width of the standardised targets.
    pub fn output_dim(&self) -> usize {
        self.keep.len()
    }

    pub fn kept_columns(&self) -> &[usize] {
        &self.keep
    }

    pub fn apply(&self, raw: &Matrix) -> Result<Matrix> {
        if raw.cols() != self.width {
            return Err(Error::DimensionMismatch {
                expected: self.width,
                actual: raw.cols(),
                context: "ssl descriptor width",
            });
        }
        let mut out = Matrix::zeros(raw.rows(), self.keep.len());
        for i in 0..raw.rows() {
            let row = raw.row(i);
            for (k, &j) in self.keep.iter().enumerate() {
                out[(i, k)] = (row[j] - self.mean[k]) / self.std[k];
            }
        }
        Ok(out)
    }

    /// Inverse of [`apply`](Self::apply) on the kept columns; dropped
    /// columns are NaN.
    pub fn invert(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols() != self.keep.len() {
            return Err(Error::DimensionMismatch {
                expected: self.keep.len(),
                actual: z.cols(),
                context: "standardised ssl width",
            });
        }
        let mut out = Matrix::from_vec(z.rows(), self.width, vec![f64::NAN; z.rows() * self.width])?;
        for i in 0..z.rows() {
            for (k, &j) in self.keep.iter().enumerate() {
                out[(i, j)] = z[(i, k)] * self.std[k] + self.mean[k];
            }
        }
        Ok(out)
    }
}

/// Standardised pattern-tree targets for every node of `g`.
pub fn ssl_labels(g: &Graph, standardizer: &SslStandardizer) -> Result<Target> {
    Ok(Target::Values(standardizer.apply(&raw_ssl_labels(g, standardizer.depth)?)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SslMode {
    Pretrain,
    Multitask,
    None,
}

impl SslMode {
    pub fn name(self) -> &'static str {
        match self {
            SslMode::Pretrain => "pretrain",
            SslMode::Multitask => "multitask",
            SslMode::None => "none",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [SslMode::Pretrain, SslMode::Multitask, SslMode::None]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub ssl: f64,
    pub main: f64,
    pub fewshot: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SslProtocol {
    pub mode: SslMode,
    /// SSL weight in multitask mode.
    pub alpha: f64,
    /// Few-shot weight; `None` uses 1/3 in multitask mode and 1/2 otherwise.
    pub fewshot_weight: Option<f64>,
    pub depth: usize,
    pub standardize: bool,
    /// Epoch budget of the pretraining phase; `None` reuses the main budget.
    pub pretrain_epochs: Option<usize>,
}

impl SslProtocol {
    pub fn new(mode: SslMode, depth: usize) -> Self {
        Self {
            mode,
            alpha: 0.5,
            fewshot_weight: None,
            depth,
            standardize: true,
            pretrain_epochs: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidArgument(format!("alpha {} outside [0, 1]", self.alpha)));
        }
        if let Some(b) = self.fewshot_weight {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::InvalidArgument(format!("few-shot weight {b} outside [0, 1]")));
            }
        }
        if self.mode != SslMode::None && self.depth == 0 {
            return Err(Error::InvalidArgument("ssl depth must be at least 1".into()));
        }
        Ok(())
    }

    /// Weights of the supervised phase: the joint objective for multitask,
    /// phase two for pretraining, the only phase for `none`.
    pub fn weights(&self, with_fewshot: bool) -> LossWeights {
        let beta = if with_fewshot {
            self.fewshot_weight.unwrap_or(match self.mode {
                SslMode::Multitask => 1.0 / 3.0,
                _ => 0.5,
            })
        } else {
            0.0
        };
        match self.mode {
            SslMode::Multitask => LossWeights {
                ssl: self.alpha * (1.0 - beta),
                main: (1.0 - self.alpha) * (1.0 - beta),
                fewshot: beta,
            },
            _ => LossWeights {
                ssl: 0.0,
                main: 1.0 - beta,
                fewshot: beta,
            },
        }
    }
}

/// Adds (or replaces) the node-level SSL head: one hidden layer of the trunk
/// width, linear output.
pub fn add_ssl_head(model: &mut GnnModel, output_dim: usize, rng: &mut RngStream) -> Result<()> {
    let width = model.suffix().output_dim();
    let act = model
        .layers()
        .last()
        .map_or(crate::neural::Activation::Relu, |l| l.activation);
    model.add_head(SSL_HEAD, Readout::None, &[width], output_dim, act, rng)
}

/// One term of a weighted objective.
#[derive(Clone, Copy, Debug)]
pub struct WeightedSource<'a> {
    pub head: &'a str,
    pub data: &'a [GraphSample],
    pub loss: LossKind,
    pub weight: f64,
}

/// `Σ wᵢ·ℓᵢ` over one batch per source, with its gradient.
pub fn mixed_loss_and_grad(
    model: &GnnModel,
    parts: &[(&str, &[&GraphSample], LossKind, f64)],
) -> Result<(f64, GnnModel)> {
    let mut total = 0.0;
    let mut grads = model.zeros_like();
    for &(head, batch, loss, w) in parts {
        if w == 0.0 || batch.is_empty() {
            continue;
        }
        let (v, g) = GnnObjective::new(head).weighted_loss_and_grad(model, batch, loss, w)?;
        total += v;
        grads.add_scaled(&g, 1.0);
    }
    Ok((total, grads))
}

/// Cycles through a dataset in reshuffled passes.
struct Cursor {
    order: Vec<usize>,
    pos: usize,
    rng: RngStream,
}

impl Cursor {
    fn new(len: usize, rng: RngStream) -> Self {
        let mut c = Self {
            order: (0..len).collect(),
            pos: len,
            rng,
        };
        c.refill();
        c
    }

    fn refill(&mut self) {
        self.rng.shuffle(&mut self.order);
        self.pos = 0;
    }

    fn take(&mut self, k: usize) -> Vec<usize> {
        let k = k.min(self.order.len());
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos == self.order.len() {
                self.refill();
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Minibatch ADAM over a weighted sum of sources. The first source defines
/// an epoch; every step also draws one batch from each other source.
/// Early stopping watches `val_head` on `val`.
#[allow(clippy::too_many_arguments)]
pub fn train_weighted(
    model: GnnModel,
    sources: &[WeightedSource<'_>],
    val_head: &str,
    val: &[GraphSample],
    mask: Option<Vec<bool>>,
    cfg: &mut TrainConfig,
    adam: &mut AdamState,
) -> Result<TrainOutcome<GnnModel>> {
    cfg.validate()?;
    let driver = sources.first().ok_or(Error::EmptyInput("training sources"))?;
    if driver.data.is_empty() {
        return Err(Error::EmptyInput("train data"));
    }
    let val = if val.is_empty() { driver.data } else { val };
    let mut cursors: Vec<Cursor> = sources
        .iter()
        .enumerate()
        .map(|(i, s)| Cursor::new(s.data.len(), cfg.rng.fork(i as u64 + 1)))
        .collect();

    let score = |e: &crate::neural::Evaluation| -> Result<f64> {
        match cfg.metric {
            ValidationMetric::Loss => Ok(e.loss),
            ValidationMetric::Accuracy => e
                .accuracy
                .map(|a| -a)
                .ok_or_else(|| Error::InvalidArgument("validation head reports no accuracy".into())),
        }
    };
    let initial = evaluate_head(&model, val_head, val, cfg.loss)?;
    let mut best_score = score(&initial)?;
    let mut best = model.clone();
    let mut best_epoch = 0;
    let mut best_val_loss = initial.loss;

    let mut model = model;
    let mut history = Vec::new();
    let mut since_best = 0;
    let steps = driver.data.len().div_ceil(cfg.batch_size);
    for epoch in 1..=cfg.max_epochs {
        let mut total = 0.0;
        for _ in 0..steps {
            let picks: Vec<Vec<&GraphSample>> = sources
                .iter()
                .zip(cursors.iter_mut())
                .map(|(s, c)| c.take(cfg.batch_size).into_iter().map(|i| &s.data[i]).collect())
                .collect();
            let parts: Vec<(&str, &[&GraphSample], LossKind, f64)> = sources
                .iter()
                .zip(&picks)
                .map(|(s, b)| (s.head, b.as_slice(), s.loss, s.weight))
                .collect();
            let (loss, grads) = mixed_loss_and_grad(&model, &parts)?;
            total += loss;
            adam.step(&mut model, &grads, mask.as_deref())?;
        }
        let eval = evaluate_head(&model, val_head, val, cfg.loss)?;
        history.push(EpochRecord {
            epoch,
            train_loss: total / steps as f64,
            val_loss: eval.loss,
            val_accuracy: eval.accuracy,
        });
        let s = score(&eval)?;
        if s < best_score {
            best_score = s;
            best = model.clone();
            best_epoch = epoch;
            best_val_loss = eval.loss;
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                break;
            }
        }
    }
    Ok(TrainOutcome {
        model: best,
        history,
        best_epoch,
        best_val_loss,
    })
}

/// Labelled examples with a validation slice.
#[derive(Clone, Debug, Default)]
pub struct SplitData {
    pub train: Vec<GraphSample>,
    pub val: Vec<GraphSample>,
}

#[derive(Clone, Debug)]
pub struct SslOutcome {
    pub model: GnnModel,
    /// `(phase, history)`; phases are `pretrain` and `main`.
    pub phases: Vec<(&'static str, TrainOutcome<GnnModel>)>,
}

impl SslOutcome {
    /// Outcome of the supervised phase.
    pub fn main(&self) -> &TrainOutcome<GnnModel> {
        &self.phases.last().expect("at least one phase").1
    }
}

/// Runs `protocol`. `model` needs a `main` head and, unless the mode is
/// `none`, an `ssl` head (see [`add_ssl_head`]). `ssl` holds source and
/// target graphs labelled with [`ssl_labels`].
pub fn train_ssl(
    model: GnnModel,
    protocol: &SslProtocol,
    main: &SplitData,
    ssl: Option<&SplitData>,
    fewshot: &[GraphSample],
    cfg: &TrainConfig,
    adam: AdamConfig,
) -> Result<SslOutcome> {
    protocol.validate()?;
    model.head(MAIN_HEAD)?;
    let ssl = match (protocol.mode, ssl) {
        (SslMode::None, _) => None,
        (_, Some(s)) if !s.train.is_empty() => {
            model.head(SSL_HEAD)?;
            Some(s)
        }
        _ => return Err(Error::InvalidArgument("ssl data required for this protocol".into())),
    };
    let w = protocol.weights(!fewshot.is_empty());
    let mut phases = Vec::new();
    let mut model = model;

    if protocol.mode == SslMode::Pretrain {
        let ssl = ssl.expect("checked above");
        let mut phase_cfg = cfg.clone();
        phase_cfg.rng = cfg.rng.fork(1);
        phase_cfg.loss = LossKind::Mse;
        phase_cfg.metric = ValidationMetric::Loss;
        if let Some(e) = protocol.pretrain_epochs {
            phase_cfg.max_epochs = e;
        }
        let objective = GnnObjective {
            head: SSL_HEAD.to_string(),
            mask: Some(model.trainable_mask(true, &[SSL_HEAD])),
        };
        let mut state = AdamState::new(adam, &model);
        let out = train_loop(&objective, model, &ssl.train, &ssl.val, &mut phase_cfg, &mut state)?;
        model = out.model.clone();
        phases.push(("pretrain", out));
    }

    let mut phase_cfg = cfg.clone();
    phase_cfg.rng = cfg.rng.fork(2);
    let mut state = AdamState::new(adam, &model);
    let trunk = protocol.mode != SslMode::Pretrain;
    let out = if protocol.mode == SslMode::None && fewshot.is_empty() {
        train_loop(&GnnObjective::new(MAIN_HEAD), model, &main.train, &main.val, &mut phase_cfg, &mut state)?
    } else {
        let mut sources = vec![WeightedSource {
            head: MAIN_HEAD,
            data: &main.train,
            loss: cfg.loss,
            weight: w.main,
        }];
        if let Some(s) = ssl.filter(|_| protocol.mode == SslMode::Multitask) {
            sources.push(WeightedSource {
                head: SSL_HEAD,
                data: &s.train,
                loss: LossKind::Mse,
                weight: w.ssl,
            });
        }
        if !fewshot.is_empty() {
            sources.push(WeightedSource {
                head: MAIN_HEAD,
                data: fewshot,
                loss: cfg.loss,
                weight: w.fewshot,
            });
        }
        let mut heads = Vec::new();
        for s in &sources {
            if s.weight > 0.0 && !heads.contains(&s.head) {
                heads.push(s.head);
            }
        }
        let mask = model.trainable_mask(trunk, &heads);
        train_weighted(model, &sources, MAIN_HEAD, &main.val, Some(mask), &mut phase_cfg, &mut state)?
    };
    let model = out.model.clone();
    phases.push(("main", out));
    Ok(SslOutcome { model, phases })
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::gnn::GnnArch;
    use crate::graph::gen_er;

    fn graphs(seed: u64, count: usize) -> Vec<Graph> {
        let mut rng = RngStream::new(seed, 0);
        (0..count)
            .map(|_| {
                let n = rng.range_inclusive(6, 10);
                gen_er(n, 0.4, &mut rng).unwrap()
            })
            .collect()
    }

    fn edge_samples(gs: &[Graph]) -> Vec<GraphSample> {
        gs.iter()
            .map(|g| GraphSample::new(Arc::new(g.clone()), Target::values(&[g.num_edges() as f64])))
            .collect()
    }

    fn ssl_samples(gs: &[Graph], st: &SslStandardizer) -> Vec<GraphSample> {
        gs.iter()
            .map(|g| GraphSample::new(Arc::new(g.clone()), ssl_labels(g, st).unwrap()))
            .collect()
    }

    fn setup() -> (GnnModel, SplitData, SplitData) {
        let gs = graphs(1, 16);
        let st = SslStandardizer::fit(&gs, 2, true).unwrap();
        let mut model = GnnModel::init(&GnnArch::standard(1, 2, 6, Readout::Sum), &mut RngStream::new(1, 1)).unwrap();
        add_ssl_head(&mut model, st.output_dim(), &mut RngStream::new(1, 2)).unwrap();
        let main = SplitData {
            train: edge_samples(&gs[..10]),
            val: edge_samples(&gs[10..12]),
        };
        let ssl = SplitData {
            train: ssl_samples(&gs[..14], &st),
            val: ssl_samples(&gs[14..], &st),
        };
        (model, main, ssl)
    }

    #[test]
    fn isolated_node_descriptor() {
        let g = Graph::empty(1);
        let raw = raw_ssl_labels(&g, 3).unwrap();
        assert_eq!(raw.row(0), &[1.0, 0.0, 0.0, 0.0]);
        assert!(raw_ssl_labels(&g, 0).is_err());
    }

    #[test]
    fn standardisation_round_trip_and_train_only_statistics() {
        let train = graphs(2, 8);
        let st = SslStandardizer::fit(&train, 3, true).unwrap();
        // Layer 0 of a one-class graph is constant and gets dropped.
        assert!(!st.kept_columns().contains(&0));
        let g = &train[0];
        let raw = raw_ssl_labels(g, 3).unwrap();
        let back = st.invert(&st.apply(&raw).unwrap()).unwrap();
        for i in 0..raw.rows() {
            for &j in st.kept_columns() {
                assert!((back[(i, j)] - raw[(i, j)]).abs() < 1e-9 * raw[(i, j)].abs().max(1.0));
            }
        }
        // Fitting again on the same train graphs, whatever else exists,
        // maps train values identically.
        let again = SslStandardizer::fit(&train, 3, true).unwrap();
        assert_eq!(again.apply(&raw).unwrap(), st.apply(&raw).unwrap());
        let off = SslStandardizer::fit(&train, 3, false).unwrap();
        assert_eq!(off.apply(&raw).unwrap(), raw);
    }

    #[test]
    fn protocol_weights() {
        let mut p = SslProtocol::new(SslMode::Multitask, 2);
        assert_eq!(p.weights(false), LossWeights { ssl: 0.5, main: 0.5, fewshot: 0.0 });
        let w = p.weights(true);
        for x in [w.ssl, w.main, w.fewshot] {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        p.mode = SslMode::Pretrain;
        assert_eq!(p.weights(true), LossWeights { ssl: 0.0, main: 0.5, fewshot: 0.5 });
        assert_eq!(p.weights(false), LossWeights { ssl: 0.0, main: 1.0, fewshot: 0.0 });
        p.alpha = 1.5;
        assert!(p.validate().is_err());
    }

    #[test]
    fn mixed_loss_is_the_weighted_sum() {
        let (model, main, ssl) = setup();
        let a: Vec<&GraphSample> = main.train.iter().take(4).collect();
        let b: Vec<&GraphSample> = ssl.train.iter().take(4).collect();
        let (total, _) =
            mixed_loss_and_grad(&model, &[(MAIN_HEAD, &a, LossKind::Mse, 0.3), (SSL_HEAD, &b, LossKind::Mse, 0.7)])
                .unwrap();
        let la = GnnObjective::new(MAIN_HEAD).weighted_loss_and_grad(&model, &a, LossKind::Mse, 1.0).unwrap().0;
        let lb = GnnObjective::new(SSL_HEAD).weighted_loss_and_grad(&model, &b, LossKind::Mse, 1.0).unwrap().0;
        assert!((total - (0.3 * la + 0.7 * lb)).abs() <= 1e-12 * total.abs().max(1.0));
    }

    #[test]
    fn none_protocol_equals_train_loop() {
        let (model, main, _) = setup();
        let cfg = TrainConfig::new(5, 4, 5, LossKind::Mse, RngStream::new(9, 9));
        let adam = AdamConfig::with_lr(1e-2, 0.1);
        let out = train_ssl(model.clone(), &SslProtocol::new(SslMode::None, 2), &main, None, &[], &cfg, adam).unwrap();
        let mut direct_cfg = cfg.clone();
        direct_cfg.rng = cfg.rng.fork(2);
        let mut state = AdamState::new(adam, &model);
        let direct =
            train_loop(&GnnObjective::new(MAIN_HEAD), model, &main.train, &main.val, &mut direct_cfg, &mut state).unwrap();
        assert_eq!(out.model, direct.model);
    }

    #[test]
    fn pretrain_freezes_trunk_in_phase_two() {
        let (model, main, ssl) = setup();
        let mut protocol = SslProtocol::new(SslMode::Pretrain, 2);
        protocol.pretrain_epochs = Some(3);
        let adam = AdamConfig::with_lr(1e-2, 0.1);
        let mut cfg = TrainConfig::new(0, 4, 5, LossKind::Mse, RngStream::new(3, 3));
        let out = train_ssl(model.clone(), &protocol, &main, Some(&ssl), &[], &cfg, adam).unwrap();
        let pre = &out.phases[0].1.model;
        assert_ne!(pre.trunk_flat(), model.trunk_flat());
        assert_eq!(out.model.trunk_flat(), pre.trunk_flat());
        // The main head is untouched by pretraining.
        assert_eq!(pre.head(MAIN_HEAD).unwrap(), model.head(MAIN_HEAD).unwrap());

        cfg.max_epochs = 4;
        let fs = main.val.clone();
        let out = train_ssl(model, &protocol, &main, Some(&ssl), &fs, &cfg, adam).unwrap();
        let pre = &out.phases[0].1.model;
        assert_eq!(out.model.trunk_flat(), pre.trunk_flat());
    }

    #[test]
    fn multitask_alpha_one_isolates_main_head() {
        let (model, main, ssl) = setup();
        let mut protocol = SslProtocol::new(SslMode::Multitask, 2);
        protocol.alpha = 1.0;
        let cfg = TrainConfig::new(3, 4, 5, LossKind::Mse, RngStream::new(4, 4));
        let out = train_ssl(model.clone(), &protocol, &main, Some(&ssl), &[], &cfg, AdamConfig::with_lr(1e-2, 0.1))
            .unwrap();
        assert_eq!(out.main().history.len(), 3);
        assert_eq!(out.model.head(MAIN_HEAD).unwrap(), model.head(MAIN_HEAD).unwrap());
        assert!(train_ssl(model, &protocol, &main, None, &[], &cfg, AdamConfig::default()).is_err());
    }
}
