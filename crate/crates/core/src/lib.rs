//! Graph-based inference of pluggable type qualifiers for Java.

pub mod error;
pub mod eval;
pub mod infer;
pub mod ingest;
pub mod jsonl;
pub mod learn;
pub mod napast;
pub mod rewrite;
pub mod tune;

pub use error::{Error, Result};
pub use ingest::{
    erase_annotations, parse_class, scan_corpus, AliasTable, CorpusManifest, EdgeKind, Label, NodeKind,
    RawGraph, RawNode, SourceAnchor,
};
