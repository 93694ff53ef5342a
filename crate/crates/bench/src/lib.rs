//! Shared fixtures for the benchmarks.

use qualinfer::eval::{generate_corpus, GeneratedCorpus, GeneratorSpec};
use qualinfer::ingest::{parse_class, AliasTable, RawGraph};
use qualinfer::napast::{encode_class, NapAst, PruneConfig};

pub fn corpus(classes: usize) -> GeneratedCorpus {
    generate_corpus(&GeneratorSpec::new(classes, 17)).expect("generator spec is valid")
}

pub fn raw_graphs(corpus: &GeneratedCorpus) -> Vec<RawGraph> {
    let alias = AliasTable::default();
    corpus
        .sources
        .values()
        .map(|s| parse_class(s, &alias).expect("generated source parses"))
        .collect()
}

pub fn encoded(raw: &[RawGraph]) -> Vec<NapAst> {
    let prune = PruneConfig::default();
    raw.iter()
        .filter(|g| g.nodes.iter().any(|n| n.is_labeled()))
        .map(|g| encode_class(g, &prune).expect("generated class encodes"))
        .collect()
}
