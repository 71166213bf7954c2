//! A GNN that outputs a prescribed value for every known d-pattern.
//!
//! Layer `t` holds three ReLU units per known t-pattern `p`:
//! `relu(z − z_p + δ)` for `δ ∈ {+1, 0, −1}`, where `z` is an integer linear
//! code of (own (t−1)-pattern, neighbour (t−1)-pattern counts) that is
//! injective over the known patterns. On integers `r₊ − 2r₀ + r₋` is exactly
//! the indicator `z == z_p`, so the next layer reads a one-hot pattern vector
//! through a fixed linear map. A two-layer node-wise suffix turns the final
//! one-hot into `y_p`.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gnn::{GnnModel, Head, MessageLayer, Readout, MAIN_HEAD};
use crate::graph::Graph;
use crate::neural::{Activation, DenseLayer, DenseParams, Matrix};
use crate::patterns::{refine_patterns, Expansion, PatternId, PatternTable};
use crate::rng::RngStream;

/// Codes stay far below 2^53 so every pre-activation is an exact integer.
const MAX_CODE: f64 = (1u64 << 50) as f64;

#[derive(Clone, Debug, PartialEq)]
pub struct PatternTargetSpec {
    pub depth: usize,
    pub targets: BTreeMap<PatternId, f64>,
    /// Largest degree of any graph the model will see.
    pub max_degree: usize,
    pub num_classes: usize,
}

impl PatternTargetSpec {
    /// Hex SHA-256 over depth, bounds and the sorted target map.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.depth as u64).to_le_bytes());
        h.update((self.max_degree as u64).to_le_bytes());
        h.update((self.num_classes as u64).to_le_bytes());
        for (id, y) in &self.targets {
            h.update(id.digest().to_le_bytes());
            h.update(y.to_bits().to_le_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum UnseenPolicy {
    /// Refuse graphs with a pattern outside the target map.
    #[default]
    Error,
    /// Evaluate anyway (the output on such nodes is arbitrary).
    Allow,
}

#[derive(Clone, Debug)]
pub struct PatternMemorizer {
    model: GnnModel,
    spec: PatternTargetSpec,
    pub policy: UnseenPolicy,
}

impl PatternMemorizer {
    pub fn model(&self) -> &GnnModel {
        &self.model
    }

    pub fn into_model(self) -> GnnModel {
        self.model
    }

    pub fn spec(&self) -> &PatternTargetSpec {
        &self.spec
    }

    /// Degree bound and pattern coverage.
    pub fn check(&self, g: &Graph) -> Result<()> {
        if g.max_degree() > self.spec.max_degree {
            return Err(Error::DegreeBound {
                actual: g.max_degree(),
                bound: self.spec.max_degree,
            });
        }
        if g.num_classes() > self.spec.num_classes {
            return Err(Error::InvalidArgument(format!(
                "graph has {} feature classes, model was built for {}",
                g.num_classes(),
                self.spec.num_classes
            )));
        }
        let (refinement, _) = refine_patterns(g, self.spec.depth);
        if let Some(id) = refinement
            .deepest()
            .iter()
            .find(|id| !self.spec.targets.contains_key(id))
        {
            return Err(Error::UnseenPattern(id.to_string()));
        }
        Ok(())
    }

    /// Per-node outputs.
    pub fn predict(&self, g: &Graph) -> Result<Vec<f64>> {
        if self.policy == UnseenPolicy::Error {
            self.check(g)?;
        }
        Ok(self.model.forward(g, MAIN_HEAD)?.into_data())
    }

    pub fn provenance(&self) -> Vec<String> {
        vec![
            format!(
                "construction: pattern memorizer, depth {}, {} patterns, {} message layers + {} suffix layers",
                self.spec.depth,
                self.spec.targets.len(),
                self.model.layers().len(),
                self.model.suffix().layers().len()
            ),
            format!("target digest: {}", self.spec.digest()),
        ]
    }
}

/// Per-level pattern order and the map from stored activations to a one-hot
/// over that order.
struct Level {
    ids: Vec<PatternId>,
    decode: Matrix,
}

/// `(own pattern index, neighbour counts)` of a refined pattern.
type Key = (usize, Vec<u64>);

fn key_of(table: &PatternTable, id: &PatternId, prev: &HashMap<PatternId, usize>) -> Result<Key> {
    match table.get(id) {
        Some(Expansion::Refined { parent, neighbors }) => {
            let own = *prev
                .get(parent)
                .ok_or_else(|| Error::UnseenPattern(parent.to_string()))?;
            let mut counts = vec![0u64; prev.len()];
            for (child, mult) in neighbors.entries() {
                let k = *prev
                    .get(child)
                    .ok_or_else(|| Error::UnseenPattern(child.to_string()))?;
                counts[k] = *mult as u64;
            }
            Ok((own, counts))
        }
        _ => Err(Error::UnseenPattern(id.to_string())),
    }
}

fn code(own_w: &[i64], nb_w: &[i64], key: &Key) -> i128 {
    i128::from(own_w[key.0])
        + key
            .1
            .iter()
            .zip(nb_w)
            .map(|(&c, &w)| i128::from(c) * i128::from(w))
            .sum::<i128>()
}

/// Random small integer weights until the code separates every key.
fn search_code(keys: &[Key], width: usize, level: usize) -> Result<(Vec<i64>, Vec<i64>, Vec<i64>)> {
    let k = keys.len() as u64;
    let mut range = 4 * k * k + 4;
    let mut rng = RngStream::new(0xc0de, level as u64);
    for attempt in 0..200 {
        if attempt > 0 && attempt % 10 == 0 {
            range = range.saturating_mul(4);
        }
        let mut draw = || (0..width).map(|_| rng.below(range as usize) as i64).collect::<Vec<_>>();
        let own_w = draw();
        let nb_w = draw();
        let codes: Vec<i128> = keys.iter().map(|key| code(&own_w, &nb_w, key)).collect();
        let distinct: HashSet<i128> = codes.iter().copied().collect();
        if distinct.len() == codes.len() && codes.iter().all(|c| (c.unsigned_abs() as f64) < MAX_CODE) {
            let codes = codes.into_iter().map(|c| c as i64).collect();
            return Ok((own_w, nb_w, codes));
        }
    }
    Err(Error::InvalidArgument(format!(
        "no injective pattern code found at depth {level}"
    )))
}

/// Triangular-bump decoder: one-hot row `k` = `r₊ − 2 r₀ + r₋` of pattern `k`.
fn bump_decode(count: usize) -> Matrix {
    let mut m = Matrix::zeros(count, 3 * count);
    for k in 0..count {
        m[(k, 3 * k)] = 1.0;
        m[(k, 3 * k + 1)] = -2.0;
        m[(k, 3 * k + 2)] = 1.0;
    }
    m
}

/// Row vector `w · decode` (true one-hot weights pulled back to stored units).
fn pull_back(weights: &[i64], decode: &Matrix) -> Vec<f64> {
    let w: Vec<f64> = weights.iter().map(|&x| x as f64).collect();
    Matrix::row_vector(&w).matmul(decode).into_data()
}

/// Builds the raw model on `input_dim`-wide one-hot features.
pub fn build_pattern_model(spec: &PatternTargetSpec, catalog: &PatternTable, input_dim: usize) -> Result<GnnModel> {
    if spec.targets.is_empty() {
        return Err(Error::EmptyInput("pattern targets"));
    }
    if input_dim < spec.num_classes {
        return Err(Error::InvalidArgument(format!(
            "input width {input_dim} below class count {}",
            spec.num_classes
        )));
    }
    for (id, y) in &spec.targets {
        if id.depth() != spec.depth {
            return Err(Error::DepthMismatch(id.depth(), spec.depth));
        }
        if !y.is_finite() {
            return Err(Error::NonFinite("pattern target"));
        }
        if !catalog.contains(id) {
            return Err(Error::UnseenPattern(id.to_string()));
        }
    }
    let roots: Vec<PatternId> = spec.targets.keys().copied().collect();
    let closure: BTreeSet<PatternId> = catalog.closure(&roots).into_iter().collect();

    let ids0: Vec<PatternId> = closure.iter().filter(|id| id.depth() == 0).copied().collect();
    let mut decode0 = Matrix::zeros(ids0.len(), input_dim);
    for (k, id) in ids0.iter().enumerate() {
        match catalog.get(id) {
            Some(Expansion::Feature(c)) if *c < spec.num_classes => decode0[(k, *c)] = 1.0,
            _ => return Err(Error::UnseenPattern(id.to_string())),
        }
    }
    let mut level = Level {
        ids: ids0,
        decode: decode0,
    };
    let mut layers = Vec::with_capacity(spec.depth);
    for t in 1..=spec.depth {
        let prev: HashMap<PatternId, usize> = level.ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        let ids: Vec<PatternId> = closure.iter().filter(|id| id.depth() == t).copied().collect();
        let keys = ids
            .iter()
            .map(|id| key_of(catalog, id, &prev))
            .collect::<Result<Vec<_>>>()?;
        let (own_w, nb_w, codes) = search_code(&keys, level.ids.len(), t)?;
        let self_row = pull_back(&own_w, &level.decode);
        let nb_row = pull_back(&nb_w, &level.decode);
        let units = 3 * ids.len();
        let in_dim = level.decode.cols();
        let mut w1 = Matrix::zeros(units, in_dim);
        let mut w2 = Matrix::zeros(units, in_dim);
        let mut bias = vec![0.0; units];
        for (k, &z) in codes.iter().enumerate() {
            for (j, delta) in [1.0, 0.0, -1.0].into_iter().enumerate() {
                let u = 3 * k + j;
                w1.row_mut(u).copy_from_slice(&nb_row);
                w2.row_mut(u).copy_from_slice(&self_row);
                bias[u] = delta - z as f64;
            }
        }
        layers.push(MessageLayer::new(w1, w2, bias, Activation::Relu)?);
        level = Level {
            decode: bump_decode(ids.len()),
            ids,
        };
    }

    let onehot = DenseLayer::new(level.decode.clone(), vec![0.0; level.ids.len()], Activation::Relu)?;
    let ys: Vec<f64> = level
        .ids
        .iter()
        .map(|id| spec.targets.get(id).copied().unwrap_or(0.0))
        .collect();
    let readout = DenseLayer::new(Matrix::from_vec(1, ys.len(), ys)?, vec![0.0], Activation::Identity)?;
    let suffix = DenseParams::new(level.decode.cols(), vec![onehot, readout])?;
    let mut heads = BTreeMap::new();
    heads.insert(
        MAIN_HEAD.to_string(),
        Head {
            readout: Readout::None,
            mlp: DenseParams::identity(1),
        },
    );
    GnnModel::new(input_dim, layers, suffix, heads)
}

/// `catalog` must contain the expansion of every target pattern (for example
/// the table filled while refining the graphs the targets came from).
pub fn build_pattern_memorizer(spec: PatternTargetSpec, catalog: &PatternTable) -> Result<PatternMemorizer> {
    let model = build_pattern_model(&spec, catalog, spec.num_classes.max(1))?;
    Ok(PatternMemorizer {
        model,
        spec,
        policy: UnseenPolicy::Error,
    })
}
