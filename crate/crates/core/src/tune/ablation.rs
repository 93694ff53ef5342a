use std::collections::{BTreeMap, BTreeSet};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{NodeKind, RawGraph};
use crate::learn::{train, GcnConfig, ModelConfig, SplitSpec};
use crate::napast::{
    augment_names, encode_features, phase1_prune, phase3_prune, remove_subtrees, retain, unguarded_statements,
    NapAst, PruneConfig,
};

pub const RANDOM_TARGET: &str = "<random>";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationResult {
    pub target: String,
    pub f1_scores: Vec<f64>,
    pub mean_f1: f64,
}

impl AblationResult {
    pub fn new(target: impl Into<String>, f1_scores: Vec<f64>) -> Self {
        let mean_f1 = if f1_scores.is_empty() {
            0.0
        } else {
            f1_scores.iter().sum::<f64>() / f1_scores.len() as f64
        };
        AblationResult {
            target: target.into(),
            f1_scores,
            mean_f1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationSpec {
    pub reps: usize,
    pub split: SplitSpec,
    pub model: GcnConfig,
    pub seed: u64,
}

impl Default for AblationSpec {
    fn default() -> Self {
        AblationSpec {
            reps: 50,
            split: SplitSpec::default(),
            model: GcnConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Mode {
    NodeTypes,
    Statements,
}

#[derive(Debug, Clone)]
enum Target {
    Kind(NodeKind),
    Random,
}

impl Target {
    fn name(&self) -> String {
        match self {
            Target::Kind(k) => k.to_string(),
            Target::Random => RANDOM_TARGET.to_string(),
        }
    }
}

/// Retrains the preliminary GCN with each kind dropped, plus a random-drop
/// baseline; results sorted by descending mean F1.
pub fn ablate_node_types(
    corpus: &[RawGraph],
    base: &PruneConfig,
    kinds: &[NodeKind],
    spec: &AblationSpec,
) -> Result<Vec<AblationResult>> {
    ablate(corpus, base, kinds, spec, Mode::NodeTypes)
}

/// As [`ablate_node_types`], but each kind's guard-free statement subtrees
/// are pruned together with their name neighbors.
pub fn ablate_statement_types(
    corpus: &[RawGraph],
    base: &PruneConfig,
    stmt_kinds: &[NodeKind],
    spec: &AblationSpec,
) -> Result<Vec<AblationResult>> {
    if let Some(k) = stmt_kinds.iter().find(|k| !k.is_statement()) {
        return Err(Error::Config(format!("{k} is not a statement kind")));
    }
    ablate(corpus, base, stmt_kinds, spec, Mode::Statements)
}

fn ablate(
    corpus: &[RawGraph],
    base: &PruneConfig,
    kinds: &[NodeKind],
    spec: &AblationSpec,
    mode: Mode,
) -> Result<Vec<AblationResult>> {
    if spec.reps == 0 {
        return Err(Error::Config("ablation needs at least one repetition".into()));
    }
    base.validate()?;
    let phase1: Vec<RawGraph> = corpus.iter().map(|g| phase1_prune(g, base)).collect();
    let mut targets: Vec<Target> = kinds.iter().copied().collect::<BTreeSet<_>>().into_iter().map(Target::Kind).collect();
    targets.push(Target::Random);

    let jobs: Vec<(usize, usize)> = (0..targets.len()).flat_map(|t| (0..spec.reps).map(move |r| (t, r))).collect();
    let scores: Vec<Result<f64>> = jobs
        .par_iter()
        .map(|&(t, rep)| {
            let graphs = ablated_corpus(&phase1, base, kinds, &targets[t], mode, spec.seed, rep)?;
            let mut model = spec.model.clone();
            model.seed = model.seed.wrapping_add(rep as u64);
            let split = SplitSpec {
                seed: spec.split.seed.wrapping_add(rep as u64),
                ..spec.split
            };
            let (_, report) = train(&graphs, &split, &ModelConfig::Gcn(model), base.node_cap)?;
            Ok(report.test_f1)
        })
        .collect();
    let mut per_target: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (&(t, _), s) in jobs.iter().zip(scores) {
        per_target.entry(t).or_default().push(s?);
    }
    let mut results: Vec<AblationResult> = per_target
        .into_iter()
        .map(|(t, f1)| AblationResult::new(targets[t].name(), f1))
        .collect();
    sort_results(&mut results);
    Ok(results)
}

pub(crate) fn sort_results(results: &mut [AblationResult]) {
    results.sort_by(|a, b| b.mean_f1.total_cmp(&a.mean_f1).then_with(|| a.target.cmp(&b.target)));
}

fn ablated_corpus(
    phase1: &[RawGraph],
    base: &PruneConfig,
    kinds: &[NodeKind],
    target: &Target,
    mode: Mode,
    seed: u64,
    rep: usize,
) -> Result<Vec<NapAst>> {
    let digest = format!("{}:{}", base.digest(), target.name());
    // graph stage at which the ablation acts, before and after
    let staged: Vec<RawGraph> = phase1
        .iter()
        .map(|p1| match mode {
            Mode::NodeTypes => p1.clone(),
            Mode::Statements => augment_names(&drop_kinds(p1, &base.phase2_drop_kinds, None)),
        })
        .collect();
    let ablated: Vec<RawGraph> = match target {
        Target::Kind(k) => staged
            .iter()
            .zip(phase1)
            .map(|(g, p1)| match mode {
                Mode::NodeTypes => drop_kinds(g, &base.phase2_drop_kinds, Some(*k)),
                Mode::Statements => {
                    let roots = unguarded_statements(g, p1, base.guard_kind);
                    let mut mask = vec![false; g.len()];
                    for r in roots {
                        if g.nodes[r as usize].kind == *k {
                            mask[r as usize] = true;
                        }
                    }
                    remove_subtrees(g, &mask, base.name_prune)
                }
            })
            .collect(),
        Target::Random => random_drop(&staged, phase1, base, kinds, mode, seed, rep),
    };
    ablated
        .iter()
        .zip(phase1)
        .map(|(g, p1)| {
            let g = match mode {
                Mode::NodeTypes => phase3_prune(&augment_names(g), p1, base),
                Mode::Statements => phase3_prune(g, p1, base),
            };
            encode_features(&g, base.node_cap, &digest)
        })
        .collect()
}

fn drop_kinds(g: &RawGraph, drop: &BTreeSet<NodeKind>, extra: Option<NodeKind>) -> RawGraph {
    let keep: Vec<bool> = g
        .nodes
        .iter()
        .map(|n| n.is_labeled() || !(drop.contains(&n.kind) || Some(n.kind) == extra))
        .collect();
    retain(g, &keep)
}

/// Drops as many nodes (or statement subtrees) as an average ablated kind
/// accounts for, chosen uniformly over the corpus.
fn random_drop(
    staged: &[RawGraph],
    phase1: &[RawGraph],
    base: &PruneConfig,
    kinds: &[NodeKind],
    mode: Mode,
    seed: u64,
    rep: usize,
) -> Vec<RawGraph> {
    let kind_set: BTreeSet<NodeKind> = kinds.iter().copied().collect();
    let mut candidates: Vec<(usize, u32)> = Vec::new();
    let mut kind_total = 0usize;
    for (gi, (g, p1)) in staged.iter().zip(phase1).enumerate() {
        match mode {
            Mode::NodeTypes => {
                for n in &g.nodes {
                    if kind_set.contains(&n.kind) {
                        kind_total += 1;
                    }
                    if !n.is_labeled() && n.id != 0 && n.kind != NodeKind::NameNode {
                        candidates.push((gi, n.id));
                    }
                }
            }
            Mode::Statements => {
                for id in unguarded_statements(g, p1, base.guard_kind) {
                    if kind_set.contains(&g.nodes[id as usize].kind) {
                        kind_total += 1;
                    }
                    candidates.push((gi, id));
                }
            }
        }
    }
    let count = if kind_set.is_empty() {
        0
    } else {
        ((kind_total as f64 / kind_set.len() as f64).round() as usize).min(candidates.len())
    };
    let mut rng = ChaCha8Rng::seed_from_u64(crate::learn::stable_hash(&[
        &seed.to_le_bytes(),
        &(rep as u64).to_le_bytes(),
        b"random-drop",
    ]));
    let mut marks: Vec<Vec<bool>> = staged.iter().map(|g| vec![false; g.len()]).collect();
    for i in sample(&mut rng, candidates.len(), count) {
        let (gi, id) = candidates[i];
        marks[gi][id as usize] = true;
    }
    staged
        .iter()
        .zip(marks)
        .map(|(g, m)| match mode {
            Mode::NodeTypes => {
                let keep: Vec<bool> = g
                    .nodes
                    .iter()
                    .map(|n| n.is_labeled() || !(m[n.id as usize] || base.phase2_drop_kinds.contains(&n.kind)))
                    .collect();
                retain(g, &keep)
            }
            Mode::Statements => remove_subtrees(g, &m, base.name_prune),
        })
        .collect()
}

/// Kinds that hurt the model less than the random baseline when dropped.
pub fn derive_drop_list(results: &[AblationResult]) -> Result<BTreeSet<NodeKind>> {
    let baseline = results
        .iter()
        .find(|r| r.target == RANDOM_TARGET)
        .ok_or(Error::MissingBaseline)?
        .mean_f1;
    let mut out = BTreeSet::new();
    for r in results.iter().filter(|r| r.target != RANDOM_TARGET) {
        let kind: NodeKind = r.target.parse().map_err(Error::Config)?;
        if r.mean_f1 > baseline && !kind.may_carry_label() {
            out.insert(kind);
        }
    }
    Ok(out)
}

pub fn ablation_csv(results: &[AblationResult]) -> String {
    let mut out = String::from("target,mean_f1\n");
    for r in results {
        out.push_str(&format!("{},{}\n", r.target, r.mean_f1));
    }
    out
}

pub fn parse_ablation_csv(text: &str) -> Result<Vec<AblationResult>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let (target, f1) = line
            .split_once(',')
            .ok_or_else(|| Error::Config(format!("line {}: expected target,mean_f1", i + 1)))?;
        let f1: f64 = f1
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        out.push(AblationResult::new(target.trim(), vec![f1]));
    }
    Ok(out)
}

/// Published node-type ablation means, as (kind, mean F1) rows.
pub fn reference_node_ablation() -> Vec<AblationResult> {
    parse_ablation_csv(include_str!("../../data/node_ablation.csv")).expect("bundled data parses")
}

/// Published statement-type ablation means.
pub fn reference_statement_ablation() -> Vec<AblationResult> {
    parse_ablation_csv(include_str!("../../data/statement_ablation.csv")).expect("bundled data parses")
}
