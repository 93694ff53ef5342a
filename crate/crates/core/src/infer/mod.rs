//! Project-level prediction: conjoined scoring, thresholding and the
//! consistency rules.

mod index;
mod predict;

pub use index::{symbol_name, LinkKind, ProjectIndex, SiteInfo, SymbolLink, UnitInfo};
pub use predict::{
    apply_threshold, conjoined_predict, join_graphs, postprocess, predict_project, train_clustered, ConjoinConfig, ModelBundle, Prediction,
    PredictionSet, Provenance, DEFAULT_PAIR_CAP, DEFAULT_THRESHOLD, MAX_SWEEPS,
};
