//! Self-checks of the hand-built constructions and core invariants.

use std::collections::BTreeMap;
use std::io::Write;

use crate::constructions::{
    build_integer_memorizer, build_pattern_memorizer, extrapolate, gd_projection_check, min_norm_solution,
    EdgeCountParams, LinearEdgeCountProblem, Norm, PatternTargetSpec,
};
use crate::error::{Error, Result};
use crate::gnn::{gnn_gradients, GnnArch, GnnModel, Readout, MAIN_HEAD};
use crate::graph::{gen_er, Graph};
use crate::neural::{finite_diff_grad, Activation, LossKind, Parameters, Target};
use crate::patterns::{refine_patterns, refine_patterns_into, PatternId, PatternTable};
use crate::rng::RngStream;

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyCheck {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl VerifyCheck {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self { name, passed, detail }
    }
}

fn integer_memorizer(rng: &mut RngStream) -> Result<VerifyCheck> {
    let ys: Vec<f64> = (0..20).map(|_| rng.uniform(-5.0, 5.0)).collect();
    let mem = build_integer_memorizer(&ys)?;
    let fit = (1..=ys.len()).map(|n| (mem.eval(n as f64) - ys[n - 1]).abs()).fold(0.0, f64::max);
    let beyond = (21..=40).map(|n| (mem.eval(n as f64) - extrapolate(&ys, n)).abs()).fold(0.0, f64::max);
    let rel = beyond / ys.iter().fold(1.0, |m: f64, y| m.max(y.abs()));
    Ok(VerifyCheck::new(
        "integer_memorizer",
        fit < 1e-6 && rel < 1e-6,
        format!("max fit error {fit:.2e}, extrapolation error {beyond:.2e}"),
    ))
}

fn pattern_memorizer(rng: &mut RngStream) -> Result<VerifyCheck> {
    let graphs: Vec<Graph> = (0..4).map(|_| gen_er(15, 0.3, rng)).collect::<Result<_>>()?;
    let mut table = PatternTable::new();
    let mut targets: BTreeMap<PatternId, f64> = BTreeMap::new();
    for g in &graphs {
        for id in refine_patterns_into(g, 2, &mut table).deepest() {
            targets.entry(*id).or_insert_with(|| rng.uniform(-3.0, 3.0));
        }
    }
    let spec = PatternTargetSpec {
        depth: 2,
        targets: targets.clone(),
        max_degree: graphs.iter().map(Graph::max_degree).max().unwrap_or(0),
        num_classes: 1,
    };
    let mem = build_pattern_memorizer(spec, &table)?;
    let mut worst = 0.0f64;
    for g in &graphs {
        let out = mem.predict(g)?;
        let (r, _) = refine_patterns(g, 2);
        for (v, id) in r.deepest().iter().enumerate() {
            worst = worst.max((out[v] - targets[id]).abs());
        }
    }
    Ok(VerifyCheck::new(
        "pattern_memorizer",
        worst < 1e-6,
        format!("{} patterns, max error {worst:.2e}", targets.len()),
    ))
}

fn min_norm() -> Result<VerifyCheck> {
    let mut ok = true;
    for (n, m) in [(10, 6), (10, 4), (30, 20), (7, 2)] {
        let p = min_norm_solution(n, m, Norm::L1)?;
        ok &= p.is_generalizing(1e-12) == (2 * m > n);
    }
    let problem = LinearEdgeCountProblem::new(vec![(10, 15), (10, 30)])?;
    let gd = gd_projection_check(&problem, EdgeCountParams::new(0.3, 0.1, -0.2), 1e-4, 20_000)?;
    ok &= gd.distance < 1e-3;
    Ok(VerifyCheck::new(
        "edge_count",
        ok,
        format!("gradient descent lands {:.2e} from the projection", gd.distance),
    ))
}

fn gradients(rng: &mut RngStream) -> Result<VerifyCheck> {
    let g = gen_er(9, 0.4, rng)?;
    let model = GnnModel::init(&GnnArch::standard(1, 3, 4, Readout::Sum), rng)?;
    let target = Target::values(&[0.5]);
    let (_, grads) = gnn_gradients(&model, &g, MAIN_HEAD, LossKind::Mse, &target)?;
    let fd = finite_diff_grad(
        |m: &GnnModel| {
            m.forward(&g, MAIN_HEAD)
                .and_then(|out| LossKind::Mse.value(&out, &target))
                .unwrap_or(f64::NAN)
        },
        &model,
        1e-6,
    );
    let worst = grads
        .flat()
        .iter()
        .zip(fd.flat())
        .map(|(a, b)| (a - b).abs() / a.abs().max(b.abs()).max(1e-3))
        .fold(0.0, f64::max);
    Ok(VerifyCheck::new(
        "finite_differences",
        worst < 1e-5,
        format!("{} parameters, max relative error {worst:.2e}", model.num_params()),
    ))
}

/// Nodes that share a d-pattern get identical outputs from a random d-layer
/// model, under any node relabelling.
fn pattern_invariance(rng: &mut RngStream) -> Result<VerifyCheck> {
    let d = 3;
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let g = gen_er(20, 0.2, rng)?;
        let mut perm: Vec<usize> = (0..g.num_nodes()).collect();
        rng.shuffle(&mut perm);
        let h = g.permuted(&perm)?;
        let mut model = GnnModel::init(&GnnArch::standard(1, d, 8, Readout::Sum), rng)?;
        model.add_head("node", Readout::None, &[8], 1, Activation::Relu, rng)?;
        let (r, _) = refine_patterns(&g, d);
        let (rh, _) = refine_patterns(&h, d);
        let out = model.forward(&g, "node")?;
        let out_h = model.forward(&h, "node")?;
        let mut by_pattern: BTreeMap<PatternId, f64> = BTreeMap::new();
        for (v, id) in r.deepest().iter().enumerate() {
            let y = out[(v, 0)];
            let first = *by_pattern.entry(*id).or_insert(y);
            worst = worst.max((first - y).abs());
        }
        for (v, id) in rh.deepest().iter().enumerate() {
            let first = by_pattern.get(id).ok_or(Error::UnseenPattern(id.hex()))?;
            worst = worst.max((first - out_h[(v, 0)]).abs());
        }
    }
    Ok(VerifyCheck::new(
        "pattern_invariance",
        worst < 1e-9,
        format!("max output spread within a pattern {worst:.2e}"),
    ))
}

/// Runs every check with a fixed seed.
pub fn run_verify(seed: u64) -> Result<Vec<VerifyCheck>> {
    let rng = RngStream::new(seed, 0);
    Ok(vec![
        integer_memorizer(&mut rng.fork(1))?,
        pattern_memorizer(&mut rng.fork(2))?,
        min_norm()?,
        gradients(&mut rng.fork(3))?,
        pattern_invariance(&mut rng.fork(4))?,
    ])
}

pub fn print_checks<W: Write>(checks: &[VerifyCheck], out: &mut W) -> Result<bool> {
    let io = |e| Error::io("<stdout>", e);
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{status} {}: {}", c.name, c.detail).map_err(io)?;
    }
    Ok(checks.iter().all(|c| c.passed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_checks_pass() {
        let checks = run_verify(0).unwrap();
        let mut buf = Vec::new();
        assert!(print_checks(&checks, &mut buf).unwrap(), "{}", String::from_utf8_lossy(&buf));
    }
}
