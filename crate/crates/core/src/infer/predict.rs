use std::collections::{BTreeMap, BTreeSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::index::ProjectIndex;
use crate::error::{Error, Result};
use crate::ingest::{EdgeKind, NodeKind, SourceAnchor};
use crate::learn::ModelCheckpoint;
use crate::napast::{NapAst, PruneConfig};
use crate::tune::ClusterModel;

pub const DEFAULT_THRESHOLD: f64 = 0.9;
pub const DEFAULT_PAIR_CAP: usize = 500;
pub const MAX_SWEEPS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Class pair of the joined graph; `None` for the class scored alone.
    pub pair: Option<(String, String)>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_id: String,
    pub anchor: SourceAnchor,
    pub probability: f64,
    pub decided: bool,
    pub provenance: Vec<Provenance>,
    pub post_rules_applied: Vec<String>,
}

impl Prediction {
    fn removed(&self) -> bool {
        self.post_rules_applied.iter().any(|t| t == "R3" || t == "R4")
    }

    fn tag(&mut self, t: &str) {
        if !self.post_rules_applied.iter().any(|x| x == t) {
            self.post_rules_applied.push(t.to_string());
            self.post_rules_applied.sort();
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionSet {
    pub threshold: f64,
    pub entries: BTreeMap<String, Prediction>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl PredictionSet {
    pub fn new(threshold: f64, entries: BTreeMap<String, Prediction>) -> Self {
        PredictionSet {
            threshold,
            entries,
            provenance: None,
        }
    }

    pub fn decided(&self) -> BTreeSet<String> {
        self.entries
            .iter()
            .filter(|(_, e)| e.decided)
            .map(|(s, _)| s.clone())
            .collect()
    }

    pub fn is_decided(&self, sig: &str) -> bool {
        self.entries.get(sig).is_some_and(|e| e.decided)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("prediction set serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("prediction set", e))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("signature,probability,decided,rules\n");
        for (sig, e) in &self.entries {
            out.push_str(&format!(
                "\"{}\",{:.6},{},{}\n",
                sig.replace('"', "\"\""),
                e.probability,
                e.decided,
                e.post_rules_applied.join(";")
            ));
        }
        out
    }
}

/// Trained models plus optional routing by cluster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelBundle {
    pub checkpoints: Vec<ModelCheckpoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clusters: Option<ClusterModel>,
}

impl ModelBundle {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bundle serializes")
    }

    /// Reads either a bundle or a bare checkpoint.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::json("model", e))?;
        if value.get("checkpoints").is_some() {
            let b: ModelBundle = serde_json::from_value(value).map_err(|e| Error::json("model bundle", e))?;
            for c in &b.checkpoints {
                ModelCheckpoint::from_json(&serde_json::to_string(c).expect("checkpoint serializes"))?;
            }
            Ok(b)
        } else {
            Ok(ModelBundle::single(ModelCheckpoint::from_json(text)?))
        }
    }

    pub fn single(ckpt: ModelCheckpoint) -> Self {
        ModelBundle {
            checkpoints: vec![ckpt],
            clusters: None,
        }
    }

    /// Index of the checkpoint responsible for a graph.
    pub fn route(&self, g: &NapAst) -> Result<usize> {
        let idx = match &self.clusters {
            Some(c) => {
                let k = c.assign(g);
                self.checkpoints
                    .iter()
                    .position(|m| m.cluster_id == Some(k))
                    .ok_or(Error::MissingModel(k))?
            }
            None if self.checkpoints.is_empty() => return Err(Error::MissingModel(0)),
            None => 0,
        };
        self.checkpoints[idx].check_compatible(g)?;
        Ok(idx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConjoinConfig {
    pub pair_cap: usize,
}

impl Default for ConjoinConfig {
    fn default() -> Self {
        ConjoinConfig {
            pair_cap: DEFAULT_PAIR_CAP,
        }
    }
}

/// Unites two graphs and links the name nodes of shared symbols across them.
pub fn join_graphs(a: &NapAst, b: &NapAst, shared: &BTreeSet<String>) -> NapAst {
    let off = a.len() as u32;
    let mut nodes = a.nodes.clone();
    nodes.extend(b.nodes.iter().map(|n| {
        let mut n = n.clone();
        n.id += off;
        n
    }));
    let mut edge_sets = a.edge_sets.clone();
    for (k, es) in &b.edge_sets {
        edge_sets
            .entry(*k)
            .or_default()
            .extend(es.iter().map(|(s, d)| (s + off, d + off)));
    }
    let name_node = |g: &NapAst, s: &str| {
        g.nodes
            .iter()
            .find(|n| n.kind == NodeKind::NameNode && n.name.as_deref() == Some(s))
            .map(|n| n.id)
    };
    let uses = |g: &NapAst, id: u32| -> Vec<u32> {
        g.edges(EdgeKind::NameUse).iter().filter(|(s, _)| *s == id).map(|(_, d)| *d).collect()
    };
    let mut extra = Vec::new();
    for s in shared {
        if let (Some(na), Some(nb)) = (name_node(a, s), name_node(b, s)) {
            for u in uses(b, nb) {
                extra.push((na, u + off));
            }
            for u in uses(a, na) {
                extra.push((nb + off, u));
            }
        }
    }
    for (n, u) in extra {
        edge_sets.entry(EdgeKind::NameUse).or_default().push((n, u));
        edge_sets.entry(EdgeKind::UseName).or_default().push((u, n));
    }
    for v in edge_sets.values_mut() {
        v.sort_unstable();
        v.dedup();
    }
    let mut features = a.features.clone();
    features.extend(b.features.iter().cloned());
    let mut label_vector = a.label_vector.clone();
    label_vector.extend(b.label_vector.iter().copied());
    let mut anchor_index = a.anchor_index.clone();
    anchor_index.extend(b.anchor_index.iter().map(|(k, v)| (k + off, v.clone())));
    NapAst {
        format_version: a.format_version,
        class_id: format!("{}+{}", a.class_id, b.class_id),
        nodes,
        feature_dim: a.feature_dim,
        features,
        edge_sets,
        label_vector,
        anchor_index,
        prune_digest: a.prune_digest.clone(),
    }
}

/// Per-element probabilities of one graph: (signature, node, probability).
fn element_scores(g: &NapAst, probs: &[f64], range: std::ops::Range<usize>) -> Vec<(String, f64)> {
    g.anchor_index
        .iter()
        .filter(|(id, _)| range.contains(&(**id as usize)))
        .map(|(id, a)| (a.decl_signature.clone(), probs[*id as usize]))
        .collect()
}

/// Scores every class alone and every symbol-sharing class pair jointly, then
/// averages each element's pair scores (solo score when it is in no pair).
pub fn conjoined_predict(
    project: &[NapAst],
    index: &ProjectIndex,
    models: &ModelBundle,
    cfg: &ConjoinConfig,
) -> Result<PredictionSet> {
    let routes: Vec<usize> = project.iter().map(|g| models.route(g)).collect::<Result<_>>()?;
    let by_class: BTreeMap<&str, usize> = project.iter().enumerate().map(|(i, g)| (g.class_id.as_str(), i)).collect();

    let solo: Vec<Vec<(String, f64)>> = project
        .par_iter()
        .zip(&routes)
        .map(|(g, &r)| {
            let probs = models.checkpoints[r].predict(&[g])?.remove(0);
            Ok(element_scores(g, &probs, 0..g.len()))
        })
        .collect::<Result<_>>()?;

    let mut pairs: Vec<((usize, usize), BTreeSet<String>)> = index
        .shared_symbols()
        .into_iter()
        .filter_map(|((a, b), s)| Some(((*by_class.get(a.as_str())?, *by_class.get(b.as_str())?), s)))
        .collect();
    pairs.sort_by(|x, y| {
        y.1.len()
            .cmp(&x.1.len())
            .then_with(|| project[x.0 .0].class_id.cmp(&project[y.0 .0].class_id))
            .then_with(|| project[x.0 .1].class_id.cmp(&project[y.0 .1].class_id))
    });
    pairs.truncate(cfg.pair_cap);

    let pair_scores: Vec<Option<(String, String, Vec<(String, f64)>)>> = pairs
        .par_iter()
        .map(|&((a, b), ref shared)| {
            let (ga, gb) = (&project[a], &project[b]);
            let joined = join_graphs(ga, gb, shared);
            let mut scores = Vec::new();
            for (side, range) in [(a, 0..ga.len()), (b, ga.len()..joined.len())] {
                let model = &models.checkpoints[routes[side]];
                match model.predict(&[&joined]) {
                    Ok(mut p) => scores.extend(element_scores(&joined, &p.remove(0), range)),
                    Err(Error::CapExceeded { nodes, cap }) => {
                        log::info!("pair {} / {} skipped: {nodes} nodes exceed cap {cap}", ga.class_id, gb.class_id);
                        return Ok(None);
                    }
                    Err(e) => return Err(e),
                }
            }
            Ok(Some((ga.class_id.clone(), gb.class_id.clone(), scores)))
        })
        .collect::<Result<_>>()?;

    let mut entries: BTreeMap<String, Prediction> = BTreeMap::new();
    for (g, scores) in project.iter().zip(&solo) {
        for (sig, p) in scores {
            let anchor = g
                .anchor_index
                .values()
                .find(|a| &a.decl_signature == sig)
                .cloned()
                .expect("scored elements are anchored");
            entries.insert(
                sig.clone(),
                Prediction {
                    class_id: g.class_id.clone(),
                    anchor,
                    probability: *p,
                    decided: false,
                    provenance: vec![Provenance {
                        pair: None,
                        probability: *p,
                    }],
                    post_rules_applied: Vec::new(),
                },
            );
        }
    }
    for (a, b, scores) in pair_scores.into_iter().flatten() {
        for (sig, p) in scores {
            if let Some(e) = entries.get_mut(&sig) {
                e.provenance.push(Provenance {
                    pair: Some((a.clone(), b.clone())),
                    probability: p,
                });
            }
        }
    }
    for e in entries.values_mut() {
        let paired: Vec<f64> = e.provenance.iter().filter(|p| p.pair.is_some()).map(|p| p.probability).collect();
        if !paired.is_empty() {
            e.probability = paired.iter().sum::<f64>() / paired.len() as f64;
        }
    }
    Ok(PredictionSet::new(DEFAULT_THRESHOLD, entries))
}

/// Decides every element whose probability reaches `tau` (inclusive).
pub fn apply_threshold(mut p: PredictionSet, tau: f64) -> PredictionSet {
    p.threshold = tau;
    for e in p.entries.values_mut() {
        e.decided = e.probability >= tau;
        e.post_rules_applied.clear();
    }
    p
}

/// Applies the consistency rules until nothing changes.
///
/// R1 field-return and R2 argument-parameter add decisions; R3 illegal
/// position and R4 inheritance remove them. A removed element is never
/// re-added.
pub fn postprocess(mut p: PredictionSet, index: &ProjectIndex) -> Result<PredictionSet> {
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        let mut add = |p: &mut PredictionSet, sig: &str, tag: &str| {
            if let Some(e) = p.entries.get_mut(sig) {
                if !e.decided && !e.removed() {
                    e.decided = true;
                    e.tag(tag);
                    changed = true;
                }
            }
        };
        for t in index.types() {
            for m in &t.methods {
                if m.return_eligible {
                    for (expr, _) in &m.returns {
                        if let Some(f) = index.field_read(&t.fqn, m, expr) {
                            if p.is_decided(&f) {
                                add(&mut p, &m.signature, "R1");
                            }
                        }
                    }
                }
                for call in &m.calls {
                    let Some(target) = index.call_target(&t.fqn, m, call) else { continue };
                    for (arg, param) in call.args.iter().zip(&target.params) {
                        if let Some(f) = index.field_read(&t.fqn, m, arg) {
                            if p.is_decided(&f) {
                                add(&mut p, &param.signature, "R2");
                            }
                        }
                    }
                }
            }
        }
        let mut remove = |p: &mut PredictionSet, sig: &str, tag: &str| {
            if let Some(e) = p.entries.get_mut(sig) {
                if e.decided {
                    e.decided = false;
                    e.tag(tag);
                    changed = true;
                }
            }
        };
        let illegal: Vec<String> = p
            .entries
            .iter()
            .filter(|(s, e)| e.decided && index.site(s).is_some_and(|si| !si.site.annotation_legal()))
            .map(|(s, _)| s.clone())
            .collect();
        for s in illegal {
            remove(&mut p, &s, "R3");
        }
        for t in index.types() {
            for m in &t.methods {
                for sm in index.overridden(&t.fqn, m) {
                    if p.is_decided(&sm.signature) && !p.is_decided(&m.signature) {
                        remove(&mut p, &sm.signature, "R4");
                    }
                    for (sp, mp) in sm.params.iter().zip(&m.params) {
                        if p.is_decided(&sp.signature) && !p.is_decided(&mp.signature) {
                            remove(&mut p, &sp.signature, "R4");
                        }
                    }
                }
            }
        }
        if !changed {
            return Ok(p);
        }
    }
    Err(Error::NonTermination(MAX_SWEEPS))
}

/// Encodes, scores, thresholds and post-processes one project.
pub fn predict_project(
    index: &ProjectIndex,
    prune: &PruneConfig,
    models: &ModelBundle,
    tau: f64,
    cfg: &ConjoinConfig,
) -> Result<PredictionSet> {
    let graphs = index.encode(prune)?;
    let p = conjoined_predict(&graphs, index, models, cfg)?;
    postprocess(apply_threshold(p, tau), index)
}

/// Trains one checkpoint per cluster. A cluster whose labeled nodes cannot
/// be split is served by a model trained on the whole corpus.
pub fn train_clustered(
    corpus: &[NapAst],
    clusters: &ClusterModel,
    spec: &crate::learn::SplitSpec,
    cfg: &crate::learn::ModelConfig,
    node_cap: usize,
) -> Result<(ModelBundle, Vec<crate::learn::TrainReport>)> {
    let mut checkpoints = Vec::new();
    let mut reports = Vec::new();
    let mut fallback: Option<(ModelCheckpoint, crate::learn::TrainReport)> = None;
    for k in 0..clusters.k {
        let members: Vec<NapAst> = corpus.iter().filter(|g| clusters.assign(g) == k).cloned().collect();
        let trained = if members.is_empty() {
            Err(Error::EmptySplit("train"))
        } else {
            crate::learn::train(&members, spec, cfg, node_cap)
        };
        let (mut ckpt, report) = match trained {
            Ok(t) => t,
            Err(Error::EmptySplit(which)) => {
                log::warn!("cluster {k}: empty {which} split, using the whole-corpus model");
                if fallback.is_none() {
                    fallback = Some(crate::learn::train(corpus, spec, cfg, node_cap)?);
                }
                fallback.clone().expect("just trained")
            }
            Err(e) => return Err(e),
        };
        ckpt.cluster_id = Some(k);
        checkpoints.push(ckpt);
        reports.push(report);
    }
    Ok((
        ModelBundle {
            checkpoints,
            clusters: Some(clusters.clone()),
        },
        reports,
    ))
}
