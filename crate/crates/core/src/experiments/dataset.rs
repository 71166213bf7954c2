//! TUDataset directory reader.
//!
//! ```text
//! {name}_A.txt                "u, v" per line, 1-indexed, both directions
//! {name}_graph_indicator.txt  graph id (1-indexed) per node line
//! {name}_graph_labels.txt     integer label per graph
//! {name}_node_labels.txt      optional integer label per node
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::Graph;

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub graphs: Vec<Graph>,
    /// Raw graph labels in file order.
    pub labels: Vec<i64>,
    /// Number of node feature classes shared by all graphs.
    pub num_classes: usize,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.graphs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.graphs.is_empty()
    }

    pub fn sizes(&self) -> Vec<usize> {
        self.graphs.iter().map(Graph::num_nodes).collect()
    }

    /// Graph labels mapped to `0..k` by ascending raw value.
    pub fn class_labels(&self) -> (Vec<usize>, usize) {
        let index: BTreeMap<i64, usize> = self
            .labels
            .iter()
            .copied()
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .enumerate()
            .map(|(i, v)| (v, i))
            .collect();
        (self.labels.iter().map(|v| index[v]).collect(), index.len())
    }
}

fn read_lines(path: &Path) -> Result<Vec<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

fn parse_int<T: std::str::FromStr>(s: &str, file: &str, line: usize) -> Result<T> {
    s.trim()
        .parse()
        .map_err(|_| Error::Dataset(format!("{file}:{}: cannot parse `{s}`", line + 1)))
}

/// Loads `{dir}/{name}_*.txt`. Directed duplicate edges are merged and
/// self-loops dropped. Node labels become feature classes by ascending
/// raw value; without a node-label file every node is class 0.
pub fn load_tudataset(dir: &Path, name: &str) -> Result<Dataset> {
    let file = |suffix: &str| dir.join(format!("{name}_{suffix}.txt"));
    let indicator_name = format!("{name}_graph_indicator.txt");
    let indicator: Vec<usize> = read_lines(&file("graph_indicator"))?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_int(l, &indicator_name, i))
        .collect::<Result<_>>()?;
    let labels_name = format!("{name}_graph_labels.txt");
    let labels: Vec<i64> = read_lines(&file("graph_labels"))?
        .iter()
        .enumerate()
        .map(|(i, l)| parse_int(l, &labels_name, i))
        .collect::<Result<_>>()?;
    let edges_name = format!("{name}_A.txt");
    let edge_lines = read_lines(&file("A"))?;
    let node_label_path = file("node_labels");
    let node_labels: Option<Vec<i64>> = if node_label_path.exists() {
        let n = format!("{name}_node_labels.txt");
        Some(
            read_lines(&node_label_path)?
                .iter()
                .enumerate()
                .map(|(i, l)| parse_int(l, &n, i))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };

    // Graph ids must be 1..=G, non-decreasing, each used at least once.
    let num_graphs = labels.len();
    let mut first = vec![usize::MAX; num_graphs];
    let mut count = vec![0usize; num_graphs];
    let mut prev = 0;
    for (node, &gid) in indicator.iter().enumerate() {
        if gid == 0 || gid > num_graphs || gid < prev {
            return Err(Error::Dataset(format!(
                "{indicator_name}:{}: graph id {gid} is not contiguous",
                node + 1
            )));
        }
        if first[gid - 1] == usize::MAX {
            first[gid - 1] = node;
        }
        count[gid - 1] += 1;
        prev = gid;
    }
    if let Some(missing) = count.iter().position(|&c| c == 0) {
        return Err(Error::Dataset(format!("graph id {} has no nodes", missing + 1)));
    }

    let features: Vec<usize>;
    let num_classes;
    match &node_labels {
        Some(raw) => {
            if raw.len() != indicator.len() {
                return Err(Error::Dataset(format!(
                    "{} node labels for {} nodes",
                    raw.len(),
                    indicator.len()
                )));
            }
            let index: BTreeMap<i64, usize> = raw
                .iter()
                .copied()
                .collect::<std::collections::BTreeSet<_>>()
                .into_iter()
                .enumerate()
                .map(|(i, v)| (v, i))
                .collect();
            features = raw.iter().map(|v| index[v]).collect();
            num_classes = index.len().max(1);
        }
        None => {
            features = vec![0; indicator.len()];
            num_classes = 1;
        }
    }

    let mut edges: Vec<Vec<(usize, usize)>> = vec![Vec::new(); num_graphs];
    for (i, line) in edge_lines.iter().enumerate() {
        let (a, b) = line
            .split_once(',')
            .ok_or_else(|| Error::Dataset(format!("{edges_name}:{}: expected `u, v`", i + 1)))?;
        let u: usize = parse_int(a, &edges_name, i)?;
        let v: usize = parse_int(b, &edges_name, i)?;
        for x in [u, v] {
            if x == 0 || x > indicator.len() {
                return Err(Error::Dataset(format!(
                    "{edges_name}:{}: dangling node index {x}",
                    i + 1
                )));
            }
        }
        let (gu, gv) = (indicator[u - 1], indicator[v - 1]);
        if gu != gv {
            return Err(Error::Dataset(format!(
                "{edges_name}:{}: edge joins graphs {gu} and {gv}",
                i + 1
            )));
        }
        if u != v {
            let base = first[gu - 1];
            edges[gu - 1].push((u - 1 - base, v - 1 - base));
        }
    }

    let graphs = (0..num_graphs)
        .map(|k| {
            let base = first[k];
            Graph::new(count[k], &edges[k], features[base..base + count[k]].to_vec(), num_classes)
        })
        .collect::<Result<_>>()?;
    Ok(Dataset {
        name: name.to_string(),
        graphs,
        labels,
        num_classes,
    })
}
