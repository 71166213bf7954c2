//! GNN checkpoints extend the dense format:
//!
//! ```text
//! model gnn
//! gnn <input_dim> <message_layers> <heads>
//! message <out> <in> <activation>
//! w1 ...
//! w2 ...
//! b ...
//! dense suffix ...
//! head <name> <readout>
//! dense <name> ...
//! end
//! ```

use std::collections::BTreeMap;

use super::model::{GnnModel, Head, MessageLayer, Readout};
use crate::error::{Error, Result};
use crate::neural::checkpoint::{malformed, parse, parse_activation, CheckpointReader, CheckpointWriter};
use crate::neural::Matrix;

pub fn gnn_to_text(model: &GnnModel, provenance: &[String]) -> String {
    let mut w = CheckpointWriter::new("gnn", provenance);
    w.line(format_args!(
        "gnn {} {} {}",
        model.input_dim(),
        model.layers().len(),
        model.heads().len()
    ));
    for l in model.layers() {
        w.line(format_args!(
            "message {} {} {}",
            l.output_dim(),
            l.input_dim(),
            l.activation.name()
        ));
        w.floats("w1", l.w1.data());
        w.floats("w2", l.w2.data());
        w.floats("b", &l.bias);
    }
    w.dense("suffix", model.suffix());
    for (name, h) in model.heads() {
        w.line(format_args!("head {name} {}", h.readout.name()));
        w.dense(name, &h.mlp);
    }
    w.finish()
}

/// Returns the model and its provenance lines.
pub fn gnn_from_text(text: &str) -> Result<(GnnModel, Vec<String>)> {
    let mut r = CheckpointReader::new(text)?;
    if r.model_kind != "gnn" {
        return Err(Error::Checkpoint(format!("expected gnn model, found `{}`", r.model_kind)));
    }
    let (i, tokens) = r.next_tokens()?;
    let (input, n_layers, n_heads) = match tokens.as_slice() {
        ["gnn", a, b, c] => (parse(i, a)?, parse(i, b)?, parse(i, c)?),
        _ => return Err(malformed(i, "expected `gnn <in> <layers> <heads>`")),
    };
    let mut layers = Vec::with_capacity(n_layers);
    for _ in 0..n_layers {
        let (i, tokens) = r.next_tokens()?;
        let (out, inp, act) = match tokens.as_slice() {
            ["message", o, n, a] => (parse(i, o)?, parse(i, n)?, parse_activation(i, a)?),
            _ => return Err(malformed(i, "expected `message <out> <in> <activation>`")),
        };
        let w1 = Matrix::from_vec(out, inp, r.floats("w1", out * inp)?)?;
        let w2 = Matrix::from_vec(out, inp, r.floats("w2", out * inp)?)?;
        let b = r.floats("b", out)?;
        layers.push(MessageLayer::new(w1, w2, b, act)?);
    }
    let suffix = r.dense("suffix")?;
    let mut heads = BTreeMap::new();
    for _ in 0..n_heads {
        let (i, tokens) = r.next_tokens()?;
        let (name, readout) = match tokens.as_slice() {
            ["head", name, ro] => (
                name.to_string(),
                Readout::parse(ro).ok_or_else(|| malformed(i, format!("unknown readout `{ro}`")))?,
            ),
            _ => return Err(malformed(i, "expected `head <name> <readout>`")),
        };
        let mlp = r.dense(&name)?;
        heads.insert(name, Head { readout, mlp });
    }
    let provenance = r.provenance.clone();
    r.end()?;
    Ok((GnnModel::new(input, layers, suffix, heads)?, provenance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::GnnArch;
    use crate::neural::checkpoint::checkpoint_digest;
    use crate::neural::Activation;
    use crate::rng::RngStream;

    #[test]
    fn round_trip_with_two_heads() {
        let mut rng = RngStream::new(6, 0);
        let mut m = GnnModel::init(&GnnArch::standard(2, 2, 5, Readout::Sum), &mut rng).unwrap();
        m.add_head("ssl", Readout::None, &[4], 3, Activation::Relu, &mut rng).unwrap();
        let text = gnn_to_text(&m, &["teacher seed 6".into()]);
        let (back, prov) = gnn_from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(prov, vec!["teacher seed 6".to_string()]);
        assert_eq!(checkpoint_digest(&gnn_to_text(&back, &prov)), checkpoint_digest(&text));
        assert!(gnn_from_text(&text.replace("model gnn", "model dense")).is_err());
    }
}
