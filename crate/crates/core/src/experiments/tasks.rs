//! Labelling tasks and the exact clique oracle.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{GnnModel, Readout, MAIN_HEAD};
use crate::graph::Graph;
use crate::neural::{LossKind, Matrix, Target};

/// Largest graph the clique solver accepts (one `u64` word per row).
pub const MAX_CLIQUE_NODES: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskKind {
    EdgeCount,
    NodeDegree,
    TeacherStudentGraph,
    TeacherStudentNode,
    MaxClique,
    DatasetClassification,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::EdgeCount,
        TaskKind::NodeDegree,
        TaskKind::TeacherStudentGraph,
        TaskKind::TeacherStudentNode,
        TaskKind::MaxClique,
        TaskKind::DatasetClassification,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::EdgeCount => "edge_count",
            TaskKind::NodeDegree => "node_degree",
            TaskKind::TeacherStudentGraph => "teacher_student_graph",
            TaskKind::TeacherStudentNode => "teacher_student_node",
            TaskKind::MaxClique => "max_clique",
            TaskKind::DatasetClassification => "dataset_classification",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }

    pub fn needs_teacher(self) -> bool {
        matches!(self, TaskKind::TeacherStudentGraph | TaskKind::TeacherStudentNode)
    }

    /// Readout a student for this task uses.
    pub fn readout(self) -> Readout {
        match self {
            TaskKind::NodeDegree | TaskKind::TeacherStudentNode => Readout::None,
            _ => Readout::Sum,
        }
    }

    pub fn loss(self) -> LossKind {
        match self {
            TaskKind::DatasetClassification => LossKind::CrossEntropy,
            _ => LossKind::Mse,
        }
    }
}

impl fmt::Display for TaskKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
pub struct Task {
    kind: TaskKind,
    teacher: Option<Arc<GnnModel>>,
    loss: LossKind,
}

impl Task {
    /// A task without a teacher.
    pub fn new(kind: TaskKind) -> Result<Self> {
        if kind.needs_teacher() {
            return Err(Error::InvalidArgument(format!("task {kind} needs a teacher")));
        }
        Ok(Self {
            kind,
            teacher: None,
            loss: kind.loss(),
        })
    }

    /// A teacher-student task. The teacher's `main` head must match the
    /// task's readout.
    pub fn with_teacher(kind: TaskKind, teacher: Arc<GnnModel>) -> Result<Self> {
        if !kind.needs_teacher() {
            return Err(Error::InvalidArgument(format!("task {kind} takes no teacher")));
        }
        let readout = teacher.head(MAIN_HEAD)?.readout;
        if readout != kind.readout() {
            return Err(Error::InvalidArgument(format!(
                "teacher readout {} does not fit task {kind}",
                readout.name()
            )));
        }
        Ok(Self {
            kind,
            teacher: Some(teacher),
            loss: kind.loss(),
        })
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn teacher(&self) -> Option<&Arc<GnnModel>> {
        self.teacher.as_ref()
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }
}

/// Label of `g` under `task`: one row for graph-level tasks, one row per
/// node for node-level tasks.
pub fn label(task: &Task, g: &Graph) -> Result<Target> {
    match task.kind {
        TaskKind::EdgeCount => Ok(Target::values(&[g.num_edges() as f64])),
        TaskKind::NodeDegree => {
            let d: Vec<f64> = g.degrees().into_iter().map(|x| x as f64).collect();
            Ok(Target::Values(Matrix::from_vec(d.len(), 1, d)?))
        }
        TaskKind::TeacherStudentGraph | TaskKind::TeacherStudentNode => {
            let teacher = task
                .teacher
                .as_ref()
                .ok_or_else(|| Error::InvalidArgument("teacher missing".into()))?;
            Ok(Target::Values(teacher.forward(g, MAIN_HEAD)?))
        }
        TaskKind::MaxClique => Ok(Target::values(&[max_clique(g)? as f64])),
        TaskKind::DatasetClassification => Err(Error::InvalidArgument(
            "dataset labels come from the dataset, not the graph".into(),
        )),
    }
}

/// Exact clique number by branch and bound with greedy-colouring bounds.
/// Vertices are first put in degeneracy order.
pub fn max_clique(g: &Graph) -> Result<usize> {
    let n = g.num_nodes();
    if n > MAX_CLIQUE_NODES {
        return Err(Error::CliqueGuard(n));
    }
    if n == 0 {
        return Ok(0);
    }
    let order = degeneracy_order(g);
    let mut pos = vec![0; n];
    for (i, &v) in order.iter().enumerate() {
        pos[v] = i;
    }
    // Relabel so bit i is the i-th vertex in degeneracy order.
    let adj: Vec<u64> = order
        .iter()
        .map(|&v| g.neighbors(v).iter().fold(0u64, |m, &u| m | 1 << pos[u]))
        .collect();
    let all = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut best = 1;
    expand(&adj, 0, all, &mut best);
    Ok(best)
}

fn degeneracy_order(g: &Graph) -> Vec<usize> {
    let n = g.num_nodes();
    let mut deg = g.degrees();
    let mut removed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let v = (0..n)
            .filter(|&v| !removed[v])
            .min_by_key(|&v| (deg[v], v))
            .expect("a vertex remains");
        removed[v] = true;
        order.push(v);
        for &u in g.neighbors(v) {
            if !removed[u] {
                deg[u] -= 1;
            }
        }
    }
    // Highest-core vertices first.
    order.reverse();
    order
}

fn expand(adj: &[u64], size: usize, mut candidates: u64, best: &mut usize) {
    let (verts, colours) = colour_bound(adj, candidates);
    for i in (0..verts.len()).rev() {
        if size + colours[i] <= *best {
            return;
        }
        let v = verts[i];
        let next = candidates & adj[v];
        if next == 0 {
            *best = (*best).max(size + 1);
        } else {
            expand(adj, size + 1, next, best);
        }
        candidates &= !(1 << v);
    }
}

/// Greedy sequential colouring of `set`; vertices come out sorted by
/// colour, each paired with its colour number (1-based).
fn colour_bound(adj: &[u64], set: u64) -> (Vec<usize>, Vec<usize>) {
    let mut verts = Vec::with_capacity(set.count_ones() as usize);
    let mut colours = Vec::with_capacity(verts.capacity());
    let mut uncoloured = set;
    let mut colour = 0;
    while uncoloured != 0 {
        colour += 1;
        let mut avail = uncoloured;
        while avail != 0 {
            let v = avail.trailing_zeros() as usize;
            avail &= !(1 << v);
            avail &= !adj[v];
            uncoloured &= !(1 << v);
            verts.push(v);
            colours.push(colour);
        }
    }
    (verts, colours)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gnn::{sample_teacher, GnnArch};
    use crate::graph::gen_er;
    use crate::rng::RngStream;

    fn brute_force_clique(g: &Graph) -> usize {
        let n = g.num_nodes();
        let mut best = 0;
        for mask in 0u32..(1 << n) {
            let nodes: Vec<usize> = (0..n).filter(|&v| mask >> v & 1 == 1).collect();
            let clique = nodes
                .iter()
                .enumerate()
                .all(|(i, &u)| nodes[i + 1..].iter().all(|&v| g.has_edge(u, v)));
            if clique {
                best = best.max(nodes.len());
            }
        }
        best
    }

    #[test]
    fn complete_graph_labels() {
        let k4 = Graph::complete(4);
        assert_eq!(label(&Task::new(TaskKind::EdgeCount).unwrap(), &k4).unwrap(), Target::values(&[6.0]));
        assert_eq!(label(&Task::new(TaskKind::MaxClique).unwrap(), &k4).unwrap(), Target::values(&[4.0]));
        let deg = label(&Task::new(TaskKind::NodeDegree).unwrap(), &k4).unwrap();
        assert_eq!(deg, Target::Values(Matrix::from_vec(4, 1, vec![3.0; 4]).unwrap()));
    }

    #[test]
    fn small_clique_cases() {
        let bipartite = Graph::uniform(6, &[(0, 3), (0, 4), (1, 4), (1, 5), (2, 3), (2, 5)]).unwrap();
        assert_eq!(max_clique(&bipartite).unwrap(), 2);
        let mut edges = Graph::complete(5).edges();
        edges.push((4, 5));
        assert_eq!(max_clique(&Graph::uniform(6, &edges).unwrap()).unwrap(), 5);
        assert_eq!(max_clique(&Graph::empty(3)).unwrap(), 1);
        assert_eq!(max_clique(&Graph::empty(0)).unwrap(), 0);
    }

    #[test]
    fn clique_matches_brute_force() {
        let mut rng = RngStream::new(11, 0);
        for _ in 0..50 {
            let g = gen_er(15, 0.5, &mut rng).unwrap();
            assert_eq!(max_clique(&g).unwrap(), brute_force_clique(&g));
        }
    }

    #[test]
    fn clique_guard() {
        assert!(matches!(max_clique(&Graph::empty(61)), Err(Error::CliqueGuard(61))));
        assert_eq!(max_clique(&Graph::complete(60)).unwrap(), 60);
    }

    #[test]
    fn teacher_labels_are_forward_outputs() {
        let teacher = Arc::new(sample_teacher(&GnnArch::standard(1, 2, 8, Readout::Sum), 3).unwrap());
        let task = Task::with_teacher(TaskKind::TeacherStudentGraph, teacher.clone()).unwrap();
        let g = gen_er(12, 0.3, &mut RngStream::new(4, 0)).unwrap();
        assert_eq!(label(&task, &g).unwrap(), Target::Values(teacher.forward(&g, MAIN_HEAD).unwrap()));
        assert!(Task::with_teacher(TaskKind::TeacherStudentNode, teacher).is_err());
        assert!(Task::new(TaskKind::TeacherStudentGraph).is_err());
    }
}
