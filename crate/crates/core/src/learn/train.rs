use std::collections::BTreeMap;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::checkpoint::ModelCheckpoint;
use super::model::{Batch, ModelConfig};
use super::params::{Adam, ParamSet};
use super::tape::Tape;
use crate::error::{Error, Result};
use crate::napast::{NapAst, NodeLabel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSpec {
    pub train: f64,
    pub validation: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: 0.6,
            validation: 0.2,
            seed: 0,
        }
    }
}

/// (graph index, node index) of a labeled node.
pub type NodeRef = (usize, usize);

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<NodeRef>,
    pub validation: Vec<NodeRef>,
    pub test: Vec<NodeRef>,
}

pub(crate) fn stable_hash(parts: &[&[u8]]) -> u64 {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p);
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("8 bytes"))
}

fn node_key(g: &NapAst, i: usize) -> String {
    g.anchor_index
        .get(&(i as u32))
        .map(|a| a.decl_signature.clone())
        .unwrap_or_else(|| format!("#{i}"))
}

/// Splits nullable nodes 60/20/20 by a seeded per-node hash, then pairs each
/// training and validation positive with a not-nullable node of its class.
pub fn split_nodes(corpus: &[NapAst], spec: &SplitSpec) -> Result<Split> {
    let seed = spec.seed.to_le_bytes();
    let mut positives: Vec<(u64, NodeRef)> = Vec::new();
    for (gi, g) in corpus.iter().enumerate() {
        for (ni, l) in g.labeled_nodes() {
            if l == NodeLabel::Nullable {
                let key = stable_hash(&[&seed, g.class_id.as_bytes(), node_key(g, ni).as_bytes()]);
                positives.push((key, (gi, ni)));
            }
        }
    }
    positives.sort();
    let n = positives.len();
    let n_train = (spec.train * n as f64).round() as usize;
    let n_val = ((spec.validation * n as f64).round() as usize).min(n - n_train.min(n));
    let n_train = n_train.min(n);

    let mut negatives: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (gi, g) in corpus.iter().enumerate() {
        let mut neg: Vec<usize> = g
            .labeled_nodes()
            .filter(|(_, l)| *l == NodeLabel::NotNullable)
            .map(|(i, _)| i)
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(stable_hash(&[&seed, g.class_id.as_bytes()]));
        neg.shuffle(&mut rng);
        negatives.insert(gi, neg);
    }

    let mut split = Split::default();
    let take_pair = |set: &mut Vec<NodeRef>, r: NodeRef, negatives: &mut BTreeMap<usize, Vec<usize>>| {
        set.push(r);
        if let Some(neg) = negatives.get_mut(&r.0).and_then(|v| v.pop()) {
            set.push((r.0, neg));
        }
    };
    for (k, (_, r)) in positives.iter().enumerate() {
        if k < n_train {
            take_pair(&mut split.train, *r, &mut negatives);
        } else if k < n_train + n_val {
            take_pair(&mut split.validation, *r, &mut negatives);
        } else {
            split.test.push(*r);
        }
    }
    for (gi, rest) in negatives {
        split.test.extend(rest.into_iter().map(|ni| (gi, ni)));
    }
    for set in [&mut split.train, &mut split.validation, &mut split.test] {
        set.sort_unstable();
    }
    if split.train.is_empty() {
        return Err(Error::EmptySplit("train"));
    }
    if split.validation.is_empty() {
        return Err(Error::EmptySplit("validation"));
    }
    if split.test.is_empty() {
        return Err(Error::EmptySplit("test"));
    }
    Ok(split)
}

/// Greedy packing of consecutive items into groups of at most `cap` nodes.
pub fn pack(sizes: impl Iterator<Item = usize>, cap: usize) -> Vec<Vec<usize>> {
    let mut out: Vec<Vec<usize>> = Vec::new();
    let mut used = 0;
    for (i, s) in sizes.enumerate() {
        if out.is_empty() || used + s > cap {
            out.push(Vec::new());
            used = 0;
        }
        out.last_mut().expect("pushed").push(i);
        used += s;
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub pass: usize,
    pub batch: usize,
    pub epoch: usize,
    pub loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    /// Validation F1 after each pass.
    pub validation_f1: Vec<f64>,
    pub best_pass: usize,
    pub best_validation_f1: f64,
    pub test_f1: f64,
    pub split_sizes: [usize; 3],
    /// Class ids packed into each training batch.
    pub batches: Vec<Vec<String>>,
    pub wall_clock_secs: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub tn: usize,
}

impl Confusion {
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

pub(crate) fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

struct Prepared {
    batch: Batch,
    /// (row in batch, class index)
    targets: Vec<(usize, usize)>,
}

fn class_index(l: NodeLabel) -> usize {
    match l {
        NodeLabel::Nullable => 1,
        _ => 0,
    }
}

fn prepare(corpus: &[NapAst], nodes: &[NodeRef], cfg: &ModelConfig, cap: usize) -> Result<(Vec<Prepared>, Vec<Vec<String>>)> {
    let mut by_graph: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for &(g, n) in nodes {
        by_graph.entry(g).or_default().push(n);
    }
    let graphs: Vec<usize> = by_graph.keys().copied().collect();
    let mut out = Vec::new();
    let mut names = Vec::new();
    let d = crate::napast::feature_dim();
    for group in pack(graphs.iter().map(|&g| corpus[g].len()), cap) {
        let members: Vec<&NapAst> = group.iter().map(|&k| &corpus[graphs[k]]).collect();
        let batch = Batch::new(&members, cfg.kind(), d)?;
        let mut targets = Vec::new();
        for (j, &k) in group.iter().enumerate() {
            let gi = graphs[k];
            for &ni in &by_graph[&gi] {
                targets.push((batch.offsets[j] + ni, class_index(corpus[gi].label_vector[ni])));
            }
        }
        names.push(members.iter().map(|g| g.class_id.clone()).collect());
        out.push(Prepared { batch, targets });
    }
    Ok((out, names))
}

fn evaluate(cfg: &ModelConfig, params: &ParamSet, prepared: &[Prepared]) -> Result<Confusion> {
    let mut c = Confusion::default();
    for p in prepared {
        let logp = cfg.infer(params, &p.batch)?;
        for &(row, class) in &p.targets {
            let predicted = logp.get(row, 1).exp() >= 0.5;
            match (predicted, class == 1) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                (false, false) => c.tn += 1,
            }
        }
    }
    Ok(c)
}

/// One optimization step on a prepared batch; returns the loss.
fn step(
    cfg: &ModelConfig,
    params: &mut ParamSet,
    adam: &mut Adam,
    p: &Prepared,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let mut tape = Tape::new();
    let vars = params
        .values
        .iter()
        .map(|v| tape.leaf(v.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = cfg.forward(&mut tape, &vars, &p.batch, Some(rng))?;
    let loss = tape.nll(out, p.targets.clone())?;
    let loss_value = tape.value(loss).data[0];
    let mut grads = tape.backward(loss)?;
    let pg: Vec<_> = vars
        .iter()
        .zip(&params.values)
        .map(|(v, m)| grads[v.0].take().unwrap_or_else(|| super::tensor::Matrix::zeros(m.rows, m.cols)))
        .collect();
    adam.update(params, &pg)?;
    Ok(loss_value)
}

/// Trains one model; the returned checkpoint holds the parameters with the
/// best validation F1.
pub fn train(
    corpus: &[NapAst],
    spec: &SplitSpec,
    cfg: &ModelConfig,
    node_cap: usize,
) -> Result<(ModelCheckpoint, TrainReport)> {
    let start = Instant::now();
    cfg.validate()?;
    let first = corpus.first().ok_or(Error::EmptySplit("train"))?;
    for g in corpus {
        if g.len() > node_cap {
            return Err(Error::CapExceeded {
                nodes: g.len(),
                cap: node_cap,
            });
        }
        if g.prune_digest != first.prune_digest {
            return Err(Error::PruneDigestMismatch {
                checkpoint: first.prune_digest.clone(),
                graph: g.prune_digest.clone(),
            });
        }
    }
    let split = split_nodes(corpus, spec)?;
    let (train_batches, batch_names) = prepare(corpus, &split.train, cfg, node_cap)?;
    let (val_batches, _) = prepare(corpus, &split.validation, cfg, node_cap)?;
    let (test_batches, _) = prepare(corpus, &split.test, cfg, node_cap)?;

    let d = crate::napast::feature_dim();
    let mut params = cfg.init_params(d);
    let mut adam = Adam::new(&params, cfg.learning_rate(), cfg.weight_decay());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed() ^ 0x5eed_d20f);
    let mut epochs = Vec::new();
    let mut validation_f1 = Vec::new();
    let mut best: Option<(f64, usize, ParamSet)> = None;
    for pass in 0..cfg.passes() {
        for (b, prepared) in train_batches.iter().enumerate() {
            for epoch in 0..cfg.epochs_per_batch() {
                let loss = step(cfg, &mut params, &mut adam, prepared, &mut rng)?;
                epochs.push(EpochRecord { pass, batch: b, epoch, loss });
            }
        }
        let f1 = evaluate(cfg, &params, &val_batches)?.f1();
        log::debug!("pass {pass}: validation F1 {f1:.4}");
        validation_f1.push(f1);
        if best.as_ref().map_or(true, |(b, _, _)| f1 > *b) {
            best = Some((f1, pass, params.clone()));
        }
    }
    let (best_f1, best_pass, best_params) = best.expect("at least one pass");
    let test_f1 = evaluate(cfg, &best_params, &test_batches)?.f1();
    let ckpt = ModelCheckpoint::new(cfg.clone(), &best_params, d, &first.prune_digest, node_cap);
    let report = TrainReport {
        epochs,
        validation_f1,
        best_pass,
        best_validation_f1: best_f1,
        test_f1,
        split_sizes: [split.train.len(), split.validation.len(), split.test.len()],
        batches: batch_names,
        wall_clock_secs: start.elapsed().as_secs_f64(),
    };
    Ok((ckpt, report))
}
