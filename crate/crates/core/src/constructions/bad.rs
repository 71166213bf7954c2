//! Models that fit one distribution perfectly and fail on another.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::gnn::{GnnModel, Head, MessageLayer, Readout, MAIN_HEAD};
use crate::graph::Graph;
use crate::neural::{Activation, DenseLayer, DenseParams, Matrix};
use crate::patterns::{refine_patterns, PatternId, PatternTable};

use super::memorizer::{build_pattern_memorizer, build_pattern_model, PatternMemorizer, PatternTargetSpec};

/// Where one sub-network's values live inside the combined ReLU network:
/// true values are `decode · stored[offset..offset + width]`, and stored
/// values are never negative so `relu` passes them through unchanged.
#[derive(Clone, Debug)]
struct Part {
    offset: usize,
    decode: Matrix,
}

impl Part {
    fn width(&self) -> usize {
        self.decode.cols()
    }
}

/// One sub-network's contribution to a combined layer.
enum Step<'a> {
    /// Affine map on true values followed by `activation`.
    Affine {
        w: &'a Matrix,
        /// Neighbour weights for message layers.
        w_nb: Option<&'a Matrix>,
        bias: &'a [f64],
        activation: Activation,
    },
    Pass,
}

struct Rows {
    self_w: Vec<Vec<f64>>,
    nb_w: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Emits rows for one part over `in_width` stored inputs and the part's new
/// decode. Identity layers are split into `relu(z)` and `relu(−z)`.
fn emit(part: &Part, step: &Step<'_>, in_width: usize, rows: &mut Rows) -> Result<Matrix> {
    let place = |v: Vec<f64>| {
        let mut full = vec![0.0; in_width];
        full[part.offset..part.offset + v.len()].copy_from_slice(&v);
        full
    };
    match step {
        Step::Pass => {
            for j in 0..part.width() {
                let mut e = vec![0.0; part.width()];
                e[j] = 1.0;
                rows.self_w.push(place(e));
                rows.nb_w.push(vec![0.0; in_width]);
                rows.bias.push(0.0);
            }
            Ok(part.decode.clone())
        }
        Step::Affine {
            w,
            w_nb,
            bias,
            activation,
        } => {
            let signs: &[f64] = match activation {
                Activation::Relu => &[1.0],
                Activation::Identity => &[1.0, -1.0],
                Activation::Tanh => return Err(Error::UnsupportedActivation("tanh")),
                Activation::Sigmoid => return Err(Error::UnsupportedActivation("sigmoid")),
            };
            let self_pulled = w.matmul(&part.decode);
            let nb_pulled = w_nb.map(|m| m.matmul(&part.decode));
            let out = w.rows();
            for &s in signs {
                for r in 0..out {
                    rows.self_w.push(place(self_pulled.row(r).iter().map(|v| s * v).collect()));
                    rows.nb_w.push(match &nb_pulled {
                        Some(m) => place(m.row(r).iter().map(|v| s * v).collect()),
                        None => vec![0.0; in_width],
                    });
                    rows.bias.push(s * bias[r]);
                }
            }
            let mut decode = Matrix::zeros(out, out * signs.len());
            for (k, &s) in signs.iter().enumerate() {
                for r in 0..out {
                    decode[(r, k * out + r)] = s;
                }
            }
            Ok(decode)
        }
    }
}

/// Applies one step per part; returns the combined rows and the new parts.
fn combine(parts: &[Part], steps: &[Step<'_>], in_width: usize) -> Result<(Rows, Vec<Part>)> {
    let mut rows = Rows {
        self_w: Vec::new(),
        nb_w: Vec::new(),
        bias: Vec::new(),
    };
    let mut next = Vec::with_capacity(parts.len());
    for (part, step) in parts.iter().zip(steps) {
        let offset = rows.bias.len();
        let decode = emit(part, step, in_width, &mut rows)?;
        next.push(Part { offset, decode });
    }
    Ok((rows, next))
}

fn matrix(rows: &[Vec<f64>], cols: usize) -> Result<Matrix> {
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols));
    }
    Matrix::from_rows(rows)
}

fn message_step(layers: &[MessageLayer], t: usize) -> Step<'_> {
    match layers.get(t) {
        Some(l) => Step::Affine {
            w: &l.w2,
            w_nb: Some(&l.w1),
            bias: &l.bias,
            activation: l.activation,
        },
        None => Step::Pass,
    }
}

fn dense_step(p: &DenseParams, t: usize) -> Step<'_> {
    match p.layers().get(t) {
        Some(l) => Step::Affine {
            w: &l.weight,
            w_nb: None,
            bias: &l.bias,
            activation: l.activation,
        },
        None => Step::Pass,
    }
}

/// Runs `correct` and a node-level `flag` model side by side and outputs
/// `correct + penalty · Σ_v flag(v)`.
fn compose_with_flag(correct: &GnnModel, head: &Head, flag: &GnnModel, penalty: f64) -> Result<GnnModel> {
    let input = correct.input_dim();
    let shared = Part {
        offset: 0,
        decode: Matrix::identity(input),
    };
    let mut parts = vec![shared.clone(), shared];
    let mut width = input;

    let depth = correct.layers().len().max(flag.layers().len());
    let mut layers = Vec::with_capacity(depth);
    for t in 0..depth {
        let steps = [message_step(correct.layers(), t), message_step(flag.layers(), t)];
        let (rows, next) = combine(&parts, &steps, width)?;
        layers.push(MessageLayer::new(
            matrix(&rows.nb_w, width)?,
            matrix(&rows.self_w, width)?,
            rows.bias.clone(),
            Activation::Relu,
        )?);
        width = rows.bias.len();
        parts = next;
    }

    let mut suffix_layers = Vec::new();
    let suffix_depth = correct.suffix().layers().len().max(flag.suffix().layers().len());
    for t in 0..suffix_depth {
        let steps = [dense_step(correct.suffix(), t), dense_step(flag.suffix(), t)];
        let (rows, next) = combine(&parts, &steps, width)?;
        suffix_layers.push(DenseLayer::new(matrix(&rows.self_w, width)?, rows.bias.clone(), Activation::Relu)?);
        width = rows.bias.len();
        parts = next;
    }
    let suffix_in = layers.last().map_or(input, MessageLayer::output_dim);
    let suffix = DenseParams::new(suffix_in, suffix_layers)?;

    // Sum readout keeps stored values non-negative and decodes linearly.
    let mut head_layers = Vec::new();
    for t in 0..head.mlp.layers().len() {
        let steps = [dense_step(&head.mlp, t), Step::Pass];
        let (rows, next) = combine(&parts, &steps, width)?;
        head_layers.push(DenseLayer::new(matrix(&rows.self_w, width)?, rows.bias.clone(), Activation::Relu)?);
        width = rows.bias.len();
        parts = next;
    }
    let (a, f) = (&parts[0], &parts[1]);
    let out_dim = a.decode.rows();
    let mut last = Matrix::zeros(out_dim, width);
    for r in 0..out_dim {
        for j in 0..a.width() {
            last[(r, a.offset + j)] = a.decode[(r, j)];
        }
        for j in 0..f.width() {
            last[(r, f.offset + j)] = penalty * f.decode[(0, j)];
        }
    }
    head_layers.push(DenseLayer::new(last, vec![0.0; out_dim], Activation::Identity)?);
    let mlp = DenseParams::new(suffix.output_dim(), head_layers)?;

    let mut heads = BTreeMap::new();
    heads.insert(
        MAIN_HEAD.to_string(),
        Head {
            readout: Readout::Sum,
            mlp,
        },
    );
    GnnModel::new(input, layers, suffix, heads)
}

/// Graph-level model equal to `correct` on graphs whose depth-`depth`
/// patterns all lie in `train_patterns`, and off by at least `penalty` on
/// any graph with a node outside it.
///
/// `catalog` must hold the expansions of every pattern the model will see
/// (train and test); the flag channel memorises 0 on `train_patterns` and 1
/// on the rest of the catalog's depth-`depth` patterns. `penalty` defaults to
/// `4 · y_max`. Message and suffix layers must use ReLU or identity.
pub fn build_bad_graph_gnn(
    correct: &GnnModel,
    head: &str,
    train_patterns: &BTreeSet<PatternId>,
    catalog: &PatternTable,
    depth: usize,
    y_max: f64,
    penalty: Option<f64>,
) -> Result<GnnModel> {
    let penalty = penalty.unwrap_or(4.0 * y_max);
    if !(penalty > 0.0) || !penalty.is_finite() {
        return Err(Error::InvalidArgument(format!("penalty must be positive, got {penalty}")));
    }
    let h = correct.head(head)?;
    if h.readout != Readout::Sum {
        return Err(Error::InvalidArgument("bad graph model needs a sum-readout head".into()));
    }
    let universe = catalog.ids_at_depth(depth);
    let num_classes = (0..correct.input_dim())
        .filter(|c| catalog.contains(&PatternId::for_feature(*c)))
        .max()
        .map_or(1, |c| c + 1);
    let targets: BTreeMap<PatternId, f64> = universe
        .iter()
        .map(|id| (*id, if train_patterns.contains(id) { 0.0 } else { 1.0 }))
        .collect();
    let spec = PatternTargetSpec {
        depth,
        targets,
        max_degree: usize::MAX,
        num_classes,
    };
    let flag = build_pattern_model(&spec, catalog, correct.input_dim())?;
    compose_with_flag(correct, h, &flag, penalty)
}

/// Node-level classifier that is right off `bad` and wrong on `bad`:
/// `truth` holds integer labels in `0..num_labels`, patterns in `bad` get
/// `(y + 1) mod num_labels`.
pub fn build_bad_node_gnn(
    truth: &PatternTargetSpec,
    num_labels: usize,
    bad: &BTreeSet<PatternId>,
    catalog: &PatternTable,
) -> Result<PatternMemorizer> {
    if num_labels < 2 {
        return Err(Error::InvalidArgument("need at least two labels".into()));
    }
    let mut spec = truth.clone();
    for id in bad {
        let y = spec
            .targets
            .get_mut(id)
            .ok_or_else(|| Error::UnseenPattern(id.to_string()))?;
        let label = label_of(*y, num_labels)?;
        *y = ((label + 1) % num_labels) as f64;
    }
    for y in truth.targets.values() {
        label_of(*y, num_labels)?;
    }
    build_pattern_memorizer(spec, catalog)
}

fn label_of(y: f64, num_labels: usize) -> Result<usize> {
    if y.fract() != 0.0 || y < 0.0 || y >= num_labels as f64 {
        return Err(Error::InvalidArgument(format!("target {y} is not a label below {num_labels}")));
    }
    Ok(y as usize)
}

/// Fraction of nodes whose rounded output differs from the true label of
/// their pattern, computed as one exact division.
pub fn node_zero_one_loss(model: &PatternMemorizer, graphs: &[Graph], truth: &BTreeMap<PatternId, f64>) -> Result<f64> {
    let mut wrong = 0u64;
    let mut total = 0u64;
    for g in graphs {
        let out = model.predict(g)?;
        let (r, _) = refine_patterns(g, model.spec().depth);
        for (v, id) in r.deepest().iter().enumerate() {
            let y = truth.get(id).ok_or_else(|| Error::UnseenPattern(id.to_string()))?;
            if out[v].round() != *y {
                wrong += 1;
            }
            total += 1;
        }
    }
    if total == 0 {
        return Err(Error::EmptyInput("graphs"));
    }
    Ok(wrong as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::edge_count_gnn;
    use crate::graph::gen_er;
    use crate::patterns::{pattern_histogram, refine_patterns_into, worst_case_set};
    use crate::rng::RngStream;

    fn catalog_of(graphs: &[Graph], d: usize, table: &mut PatternTable) -> BTreeSet<PatternId> {
        graphs
            .iter()
            .flat_map(|g| refine_patterns_into(g, d, table).deepest().to_vec())
            .collect()
    }

    #[test]
    fn edge_count_dichotomy() {
        let mut rng = RngStream::new(60, 0);
        let small: Vec<Graph> = (0..6).map(|_| gen_er(8, 0.3, &mut rng).unwrap()).collect();
        let large: Vec<Graph> = (0..3).map(|_| gen_er(24, 0.3, &mut rng).unwrap()).collect();
        let mut table = PatternTable::new();
        let train = catalog_of(&small, 1, &mut table);
        let test = catalog_of(&large, 1, &mut table);
        let correct = edge_count_gnn(1);
        let y_max = 8.0 * 7.0 / 2.0;
        let bad = build_bad_graph_gnn(&correct, MAIN_HEAD, &train, &table, 1, y_max, None).unwrap();
        for g in &small {
            let y = bad.forward(g, MAIN_HEAD).unwrap()[(0, 0)];
            assert!((y - g.num_edges() as f64).abs() < 1e-6);
        }
        for g in &large {
            let unseen = refine_patterns(g, 1).0.deepest().iter().any(|id| !train.contains(id));
            assert!(unseen && !test.is_subset(&train));
            let y = bad.forward(g, MAIN_HEAD).unwrap()[(0, 0)];
            assert!((y - g.num_edges() as f64).abs() >= 4.0 * y_max - 1e-6);
        }
        // Everything seen: the flag never fires.
        let all: BTreeSet<PatternId> = train.union(&test).copied().collect();
        let same = build_bad_graph_gnn(&correct, MAIN_HEAD, &all, &table, 1, y_max, None).unwrap();
        for g in small.iter().chain(&large) {
            let y = same.forward(g, MAIN_HEAD).unwrap()[(0, 0)];
            assert!((y - g.num_edges() as f64).abs() < 1e-6);
        }
        // Nothing seen: every graph is penalised.
        let none = build_bad_graph_gnn(&correct, MAIN_HEAD, &BTreeSet::new(), &table, 1, y_max, Some(1.0)).unwrap();
        let y = none.forward(&small[0], MAIN_HEAD).unwrap()[(0, 0)];
        assert!((y - small[0].num_edges() as f64).abs() >= 1.0 - 1e-9);
        assert!(build_bad_graph_gnn(&correct, MAIN_HEAD, &train, &table, 1, y_max, Some(0.0)).is_err());
    }

    #[test]
    fn relu_trunk_is_preserved() {
        use crate::gnn::{GnnArch, GnnModel};
        let mut rng = RngStream::new(61, 0);
        let correct = GnnModel::init(&GnnArch::standard(1, 3, 6, Readout::Sum), &mut rng).unwrap();
        let graphs: Vec<Graph> = (0..4).map(|_| gen_er(9, 0.35, &mut rng).unwrap()).collect();
        let mut table = PatternTable::new();
        let seen = catalog_of(&graphs, 2, &mut table);
        let bad = build_bad_graph_gnn(&correct, MAIN_HEAD, &seen, &table, 2, 1.0, None).unwrap();
        for g in &graphs {
            let a = correct.forward(g, MAIN_HEAD).unwrap()[(0, 0)];
            let b = bad.forward(g, MAIN_HEAD).unwrap()[(0, 0)];
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn bad_node_losses_match_masses() {
        let mut rng = RngStream::new(62, 0);
        let train: Vec<Graph> = (0..5).map(|_| gen_er(10, 0.3, &mut rng).unwrap()).collect();
        let test: Vec<Graph> = (0..3).map(|_| gen_er(20, 0.3, &mut rng).unwrap()).collect();
        let mut table = PatternTable::new();
        let mut ids = catalog_of(&train, 1, &mut table);
        ids.extend(catalog_of(&test, 1, &mut table));
        let truth: BTreeMap<PatternId, f64> = ids.iter().map(|id| (*id, 0.0)).collect();
        let spec = PatternTargetSpec {
            depth: 1,
            targets: truth.clone(),
            max_degree: 64,
            num_classes: 1,
        };
        let h_train = pattern_histogram(&train, 1).unwrap();
        let h_test = pattern_histogram(&test, 1).unwrap();
        let w = worst_case_set(&h_train, &h_test, 0.2).unwrap();
        let model = build_bad_node_gnn(&spec, 2, &w.patterns, &table).unwrap();
        assert_eq!(node_zero_one_loss(&model, &train, &truth).unwrap(), h_train.mass_of(w.patterns.iter()));
        assert_eq!(node_zero_one_loss(&model, &test, &truth).unwrap(), h_test.mass_of(w.patterns.iter()));
        assert!(node_zero_one_loss(&model, &train, &truth).unwrap() < 0.2);

        let none = build_bad_node_gnn(&spec, 2, &BTreeSet::new(), &table).unwrap();
        assert_eq!(node_zero_one_loss(&none, &test, &truth).unwrap(), 0.0);
        let all = build_bad_node_gnn(&spec, 2, &ids, &table).unwrap();
        assert_eq!(node_zero_one_loss(&all, &train, &truth).unwrap(), 1.0);
    }
}
