//! Text checkpoint format.
//!
//! ```text
//! PATTERNLAB-CHECKPOINT 1
//! # provenance: free text (zero or more lines)
//! model dense
//! dense main 3 2
//! layer 4 3 relu
//! w <out*in floats, row-major>
//! b <out floats>
//! layer 1 4 identity
//! w ...
//! b ...
//! end
//! ```
//!
//! Floats are written in shortest round-trip exponent form, so a save/load
//! cycle is bit-exact. GNN checkpoints add `message` and `head` sections (see
//! `gnn::checkpoint`).

use std::fmt::Write as _;
use std::path::Path;

use sha2::{Digest, Sha256};

use super::dense::{Activation, DenseLayer, DenseParams};
use super::matrix::Matrix;
use crate::error::{Error, Result};

pub const CHECKPOINT_MAGIC: &str = "PATTERNLAB-CHECKPOINT";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Default)]
pub struct CheckpointWriter {
    text: String,
}

impl CheckpointWriter {
    pub fn new(model_kind: &str, provenance: &[String]) -> Self {
        let mut w = Self::default();
        w.line(format_args!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}"));
        for p in provenance {
            for l in p.lines() {
                w.line(format_args!("# provenance: {l}"));
            }
        }
        w.line(format_args!("model {model_kind}"));
        w
    }

    pub fn line(&mut self, args: std::fmt::Arguments<'_>) {
        self.text.write_fmt(args).expect("writing to a String");
        self.text.push('\n');
    }

    pub fn floats(&mut self, tag: &str, values: &[f64]) {
        self.text.push_str(tag);
        for v in values {
            write!(self.text, " {v:e}").expect("writing to a String");
        }
        self.text.push('\n');
    }

    pub fn dense(&mut self, name: &str, params: &DenseParams) {
        self.line(format_args!("dense {name} {} {}", params.input_dim(), params.layers().len()));
        for l in params.layers() {
            self.line(format_args!(
                "layer {} {} {}",
                l.output_dim(),
                l.input_dim(),
                l.activation.name()
            ));
            self.floats("w", l.weight.data());
            self.floats("b", &l.bias);
        }
    }

    pub fn finish(mut self) -> String {
        self.line(format_args!("end"));
        self.text
    }
}

pub struct CheckpointReader<'a> {
    lines: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    pub model_kind: String,
    pub provenance: Vec<String>,
}

pub(crate) fn malformed(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Checkpoint(format!("line {}: {msg}", line + 1))
}

impl<'a> CheckpointReader<'a> {
    pub fn new(text: &'a str) -> Result<Self> {
        let mut lines = text.lines().enumerate().peekable();
        let (_, first) = lines.next().ok_or_else(|| Error::Checkpoint("empty checkpoint".into()))?;
        let mut head = first.split_whitespace();
        if head.next() != Some(CHECKPOINT_MAGIC) {
            return Err(Error::Checkpoint("missing magic header".into()));
        }
        match head.next().and_then(|v| v.parse::<u32>().ok()) {
            Some(CHECKPOINT_VERSION) => {}
            other => return Err(Error::Checkpoint(format!("unsupported version {other:?}"))),
        }
        let mut provenance = Vec::new();
        while let Some((_, l)) = lines.peek() {
            match l.strip_prefix("# provenance: ") {
                Some(p) => {
                    provenance.push(p.to_string());
                    lines.next();
                }
                None => break,
            }
        }
        let mut reader = Self {
            lines,
            model_kind: String::new(),
            provenance,
        };
        let (i, tokens) = reader.next_tokens()?;
        match tokens.as_slice() {
            ["model", kind] => reader.model_kind = kind.to_string(),
            _ => return Err(malformed(i, "expected `model <kind>`")),
        }
        Ok(reader)
    }

    /// Next line split into tokens, with its index.
    pub fn next_tokens(&mut self) -> Result<(usize, Vec<&'a str>)> {
        let (i, l) = self
            .lines
            .next()
            .ok_or_else(|| Error::Checkpoint("unexpected end of checkpoint".into()))?;
        Ok((i, l.split_whitespace().collect()))
    }

    pub fn peek_tag(&mut self) -> Option<&'a str> {
        self.lines.peek().and_then(|(_, l)| l.split_whitespace().next())
    }

    pub fn floats(&mut self, tag: &str, expected: usize) -> Result<Vec<f64>> {
        let (i, tokens) = self.next_tokens()?;
        if tokens.first() != Some(&tag) {
            return Err(malformed(i, format!("expected `{tag}`")));
        }
        let values = tokens[1..]
            .iter()
            .map(|t| t.parse::<f64>().map_err(|_| malformed(i, format!("bad number `{t}`"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != expected {
            return Err(malformed(i, format!("expected {expected} values, found {}", values.len())));
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(malformed(i, "non-finite value"));
        }
        Ok(values)
    }

    pub fn dense(&mut self, name: &str) -> Result<DenseParams> {
        let (i, tokens) = self.next_tokens()?;
        let (input, count) = match tokens.as_slice() {
            ["dense", n, input, count] if *n == name => (parse(i, input)?, parse(i, count)?),
            _ => return Err(malformed(i, format!("expected `dense {name} <in> <layers>`"))),
        };
        let mut layers = Vec::with_capacity(count);
        for _ in 0..count {
            let (i, tokens) = self.next_tokens()?;
            let (out, inp, act) = match tokens.as_slice() {
                ["layer", out, inp, act] => (parse(i, out)?, parse(i, inp)?, parse_activation(i, act)?),
                _ => return Err(malformed(i, "expected `layer <out> <in> <activation>`")),
            };
            let w = self.floats("w", out * inp)?;
            let b = self.floats("b", out)?;
            layers.push(DenseLayer::new(Matrix::from_vec(out, inp, w)?, b, act)?);
        }
        DenseParams::new(input, layers)
    }

    pub fn end(mut self) -> Result<()> {
        let (i, tokens) = self.next_tokens()?;
        if tokens.as_slice() != ["end"] {
            return Err(malformed(i, "expected `end`"));
        }
        Ok(())
    }
}

pub(crate) fn parse(line: usize, token: &str) -> Result<usize> {
    token
        .parse()
        .map_err(|_| malformed(line, format!("bad integer `{token}`")))
}

pub(crate) fn parse_activation(line: usize, token: &str) -> Result<Activation> {
    Activation::parse(token).ok_or_else(|| malformed(line, format!("unknown activation `{token}`")))
}

pub fn dense_to_text(params: &DenseParams, provenance: &[String]) -> String {
    let mut w = CheckpointWriter::new("dense", provenance);
    w.dense("main", params);
    w.finish()
}

pub fn dense_from_text(text: &str) -> Result<DenseParams> {
    let mut r = CheckpointReader::new(text)?;
    if r.model_kind != "dense" {
        return Err(Error::Checkpoint(format!("expected dense model, found `{}`", r.model_kind)));
    }
    let p = r.dense("main")?;
    r.end()?;
    Ok(p)
}

/// Hex SHA-256 of a checkpoint text.
pub fn checkpoint_digest(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::RngStream;

    #[test]
    fn dense_round_trip_is_exact() {
        let p = DenseParams::init(
            &[3, 5, 2],
            &[Activation::Sigmoid, Activation::Identity],
            &mut RngStream::new(4, 2),
        )
        .unwrap();
        let text = dense_to_text(&p, &["unit test".into()]);
        assert!(text.starts_with("PATTERNLAB-CHECKPOINT 1\n# provenance: unit test\n"));
        assert_eq!(dense_from_text(&text).unwrap(), p);
        assert_eq!(checkpoint_digest(&text).len(), 64);
    }

    #[test]
    fn corrupt_inputs_rejected() {
        assert!(dense_from_text("").is_err());
        assert!(dense_from_text("NOPE 1\nmodel dense\n").is_err());
        assert!(dense_from_text("PATTERNLAB-CHECKPOINT 9\nmodel dense\n").is_err());
        let p = DenseParams::init(&[1, 1], &[Activation::Relu], &mut RngStream::new(0, 0)).unwrap();
        let text = dense_to_text(&p, &[]).replace("relu", "gelu");
        assert!(dense_from_text(&text).is_err());
        let truncated: String = dense_to_text(&p, &[]).lines().take(4).collect::<Vec<_>>().join("\n");
        assert!(dense_from_text(&truncated).is_err());
    }
}
