//! Empirical derivation of drop lists and clustering of encoded graphs.

mod ablation;
mod cluster;

pub use ablation::{
    ablate_node_types, ablate_statement_types, ablation_csv, derive_drop_list, parse_ablation_csv,
    reference_node_ablation, reference_statement_ablation, AblationResult, AblationSpec, RANDOM_TARGET,
};
pub use cluster::{
    cluster_csv, cluster_graphs, elbow, feature_dimension, graph_features, ClusterModel, DEFAULT_K, FEATURE_RECIPE,
    MAX_ITERATIONS,
};
