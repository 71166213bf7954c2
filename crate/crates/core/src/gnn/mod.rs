//! First-order message-passing GNN with sum readout and named heads.

pub mod checkpoint;
pub mod model;
pub mod objective;

pub use checkpoint::{gnn_from_text, gnn_to_text};
pub use model::{
    gnn_forward, gnn_gradients, gnn_layer_forward, init_features, sample_teacher, GnnArch, GnnModel, GnnTrace,
    Head, MessageLayer, NodeStates, Readout, MAIN_HEAD,
};
pub use objective::{evaluate_head, GnnObjective, GraphSample};
