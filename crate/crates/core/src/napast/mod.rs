//! Name-augmented pruned ASTs: the model input encoding.

mod config;
mod encode;
mod prune;

pub use config::{
    NamePrune, Phase1Rule, PruneConfig, DEFAULT_NODE_CAP, DEFAULT_PHASE2_DROP, DEFAULT_PHASE3_PRUNE, STAGES,
};
pub use encode::{
    active_features, encode_class, encode_features, feature_dim, NapAst, NodeLabel, NAPAST_FORMAT_VERSION,
};
pub use prune::{
    augment_names, phase1_prune, phase2_prune, phase3_prune, prune_pipeline, remove_subtrees, retain, unguarded_statements,
};
