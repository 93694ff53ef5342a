//! Java sources to typed graphs with harvested qualifier labels.

mod alias;
mod erase;
mod graph;
mod java;
mod kind;
mod scan;

pub use alias::{AliasTable, Imports, DEFAULT_ALIASES};
pub use erase::erase_annotations;
pub use graph::{Edge, EdgeKind, Label, Modifiers, RawGraph, RawNode, SourceAnchor, TreeView};
pub use java::{
    is_primitive, parse_tree, parse_unit, CallFact, DeclSite, Expr, FieldFact, ImportDecl, MethodFact,
    ParamFact, ParsedUnit, Receiver, SiteKind, TypeFacts, JAVA_LEVEL,
};
pub use kind::NodeKind;
pub use scan::{
    java_files, scan_corpus, scan_corpus_graphs, scan_file, scan_source, scan_sources, sha256_hex, ClassEntry, CorpusManifest,
    ExcludedEntry, ExclusionReason, ScannedFile, SizeBounds, MANIFEST_FORMAT_VERSION,
};
pub(crate) use scan::rel_string;

use crate::error::Result;

/// Parses one compilation unit into its graph.
pub fn parse_class(source: &str, alias: &AliasTable) -> Result<RawGraph> {
    Ok(parse_unit("", source, alias)?.graph)
}
