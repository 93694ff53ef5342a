use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::PruneConfig;
use super::prune::prune_pipeline;
use crate::error::{Error, Result};
use crate::ingest::{EdgeKind, Label, Modifiers, NodeKind, RawGraph, RawNode, SourceAnchor};

pub const NAPAST_FORMAT_VERSION: u32 = 1;

/// Width of a node feature row: kind one-hot, modifier bits, name-layer bit.
pub fn feature_dim() -> usize {
    NodeKind::count() + Modifiers::COUNT + 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NodeLabel {
    Nullable,
    NotNullable,
    Unlabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NapAst {
    pub format_version: u32,
    pub class_id: String,
    pub nodes: Vec<RawNode>,
    pub feature_dim: usize,
    /// One packed bitstring per node (hex, least significant bit first).
    pub features: Vec<String>,
    pub edge_sets: BTreeMap<EdgeKind, Vec<(u32, u32)>>,
    pub label_vector: Vec<NodeLabel>,
    pub anchor_index: BTreeMap<u32, SourceAnchor>,
    pub prune_digest: String,
}

/// Indices of the set feature bits of one node.
pub fn active_features(node: &RawNode) -> Vec<usize> {
    let k = NodeKind::count();
    let mut out = vec![node.kind.index()];
    out.extend(node.modifiers.bits().map(|b| k + b));
    if node.kind == NodeKind::NameNode {
        out.push(k + Modifiers::COUNT);
    }
    out
}

fn pack(bits: &[usize], dim: usize) -> String {
    let mut bytes = vec![0u8; dim.div_ceil(8)];
    for &b in bits {
        bytes[b / 8] |= 1 << (b % 8);
    }
    hex::encode(bytes)
}

fn unpack(hex_row: &str, dim: usize) -> Result<Vec<usize>> {
    let bytes = hex::decode(hex_row).map_err(|e| Error::Config(format!("bad feature row: {e}")))?;
    if bytes.len() != dim.div_ceil(8) {
        return Err(Error::FeatureDimMismatch {
            checkpoint: bytes.len() * 8,
            encoder: dim,
        });
    }
    Ok((0..dim).filter(|&b| bytes[b / 8] & (1 << (b % 8)) != 0).collect())
}

/// Encodes a fully pruned and augmented graph.
pub fn encode_features(g: &RawGraph, cap: usize, prune_digest: &str) -> Result<NapAst> {
    if g.len() > cap {
        return Err(Error::CapExceeded { nodes: g.len(), cap });
    }
    let dim = feature_dim();
    let features = g.nodes.iter().map(|n| pack(&active_features(n), dim)).collect();
    let mut edge_sets: BTreeMap<EdgeKind, Vec<(u32, u32)>> =
        EdgeKind::ALL.iter().map(|k| (*k, Vec::new())).collect();
    for e in &g.edges {
        edge_sets.get_mut(&e.2).expect("all kinds present").push((e.0, e.1));
    }
    for v in edge_sets.values_mut() {
        v.sort_unstable();
    }
    let label_vector = g
        .nodes
        .iter()
        .map(|n| match n.label {
            Some(Label::Nullable) => NodeLabel::Nullable,
            Some(Label::NotNullable) => NodeLabel::NotNullable,
            None => NodeLabel::Unlabeled,
        })
        .collect();
    let anchor_index = g
        .nodes
        .iter()
        .filter(|n| n.is_labeled())
        .filter_map(|n| n.anchor.clone().map(|a| (n.id, a)))
        .collect();
    Ok(NapAst {
        format_version: NAPAST_FORMAT_VERSION,
        class_id: g.class_id.clone(),
        nodes: g.nodes.clone(),
        feature_dim: dim,
        features,
        edge_sets,
        label_vector,
        anchor_index,
        prune_digest: prune_digest.to_string(),
    })
}

/// Runs the whole fixed pipeline on one ingested graph.
pub fn encode_class(raw: &RawGraph, cfg: &PruneConfig) -> Result<NapAst> {
    cfg.validate()?;
    let pruned = prune_pipeline(raw, cfg);
    encode_features(&pruned, cfg.node_cap, &cfg.digest())
}

impl NapAst {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Decoded active feature indices per node.
    pub fn feature_rows(&self) -> Result<Vec<Vec<usize>>> {
        self.features.iter().map(|r| unpack(r, self.feature_dim)).collect()
    }

    pub fn edges(&self, kind: EdgeKind) -> &[(u32, u32)] {
        self.edge_sets.get(&kind).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn labeled_nodes(&self) -> impl Iterator<Item = (usize, NodeLabel)> + '_ {
        self.label_vector
            .iter()
            .enumerate()
            .filter(|(_, l)| **l != NodeLabel::Unlabeled)
            .map(|(i, l)| (i, *l))
    }

    pub fn nullable_count(&self) -> usize {
        self.label_vector.iter().filter(|l| **l == NodeLabel::Nullable).count()
    }

    /// The graph view, e.g. for joining classes at prediction time.
    pub fn to_raw(&self) -> RawGraph {
        let pc: Vec<(u32, u32)> = self.edges(EdgeKind::ParentChild).to_vec();
        let nl: Vec<(u32, u32)> = self.edges(EdgeKind::NameUse).to_vec();
        RawGraph::assemble(self.class_id.clone(), self.nodes.clone(), &pc, &nl)
    }

    /// Rough cross-check of the stored structures.
    pub fn validate(&self) -> Result<()> {
        let err = |m: String| Err(Error::Config(format!("{}: {m}", self.class_id)));
        if self.features.len() != self.nodes.len() || self.label_vector.len() != self.nodes.len() {
            return err("per-node arrays disagree in length".into());
        }
        if self.feature_dim != feature_dim() {
            return Err(Error::FeatureDimMismatch {
                checkpoint: self.feature_dim,
                encoder: feature_dim(),
            });
        }
        if let Err(m) = self.to_raw().validate() {
            return err(m);
        }
        Ok(())
    }
}
