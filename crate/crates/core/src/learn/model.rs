use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::params::ParamSet;
use super::tape::{softmax, Tape, Var};
use super::tensor::{Csr, Matrix, SparseOp};
use crate::error::{Error, Result};
use crate::ingest::EdgeKind;
use crate::napast::NapAst;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "GCN")]
    Gcn,
    #[serde(rename = "FastGTN")]
    FastGtn,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Gcn => "GCN",
            ModelKind::FastGtn => "FastGTN",
        })
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(ModelKind::Gcn),
            "fastgtn" | "gtn" => Ok(ModelKind::FastGtn),
            other => Err(format!("unknown model kind '{other}'")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GcnConfig {
    pub layers: usize,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs_per_batch: usize,
    pub passes: usize,
    pub seed: u64,
}

impl Default for GcnConfig {
    fn default() -> Self {
        GcnConfig {
            layers: 2,
            hidden_dim: 64,
            dropout_rate: 0.5,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs_per_batch: 10,
            passes: 20,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ChannelAgg {
    #[default]
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GtnConfig {
    pub gt_layers: usize,
    pub fastgtn_layers: usize,
    pub channels: usize,
    pub channel_agg: ChannelAgg,
    pub hidden_dim: usize,
    pub dropout_rate: f64,
    pub epochs_per_batch: usize,
    pub passes: usize,
    pub learning_rate: f64,
    pub weight_decay: f64,
    /// Carried for provenance; the forward pass has no non-local branch.
    pub non_local_weight: f64,
    pub k_hop: usize,
    pub non_local: bool,
    pub seed: u64,
}

impl Default for GtnConfig {
    fn default() -> Self {
        GtnConfig {
            gt_layers: 5,
            fastgtn_layers: 2,
            channels: 2,
            channel_agg: ChannelAgg::Mean,
            hidden_dim: 64,
            dropout_rate: 0.0,
            epochs_per_batch: 10,
            passes: 20,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            non_local_weight: -2.0,
            k_hop: 9,
            non_local: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelConfig {
    Gcn(GcnConfig),
    FastGtn(GtnConfig),
}

/// Edge kinds offered to each GT layer, after the identity.
pub const GTN_EDGE_KINDS: [EdgeKind; 4] = EdgeKind::ALL;

impl ModelConfig {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::Gcn => ModelConfig::Gcn(GcnConfig::default()),
            ModelKind::FastGtn => ModelConfig::FastGtn(GtnConfig::default()),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::Gcn(_) => ModelKind::Gcn,
            ModelConfig::FastGtn(_) => ModelKind::FastGtn,
        }
    }

    pub fn seed(&self) -> u64 {
        match self {
            ModelConfig::Gcn(c) => c.seed,
            ModelConfig::FastGtn(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ModelConfig::Gcn(c) => c.seed = seed,
            ModelConfig::FastGtn(c) => c.seed = seed,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        match self {
            ModelConfig::Gcn(c) => c.learning_rate,
            ModelConfig::FastGtn(c) => c.learning_rate,
        }
    }

    pub fn weight_decay(&self) -> f64 {
        match self {
            ModelConfig::Gcn(c) => c.weight_decay,
            ModelConfig::FastGtn(c) => c.weight_decay,
        }
    }

    pub fn epochs_per_batch(&self) -> usize {
        match self {
            ModelConfig::Gcn(c) => c.epochs_per_batch,
            ModelConfig::FastGtn(c) => c.epochs_per_batch,
        }
    }

    pub fn passes(&self) -> usize {
        match self {
            ModelConfig::Gcn(c) => c.passes,
            ModelConfig::FastGtn(c) => c.passes,
        }
    }

    pub fn dropout_rate(&self) -> f64 {
        match self {
            ModelConfig::Gcn(c) => c.dropout_rate,
            ModelConfig::FastGtn(c) => c.dropout_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let (lr, drop, epochs, passes, hidden) = match self {
            ModelConfig::Gcn(c) => {
                if c.layers != 2 {
                    return bad("the GCN has exactly two layers");
                }
                (c.learning_rate, c.dropout_rate, c.epochs_per_batch, c.passes, c.hidden_dim)
            }
            ModelConfig::FastGtn(c) => {
                if c.gt_layers == 0 || c.fastgtn_layers == 0 || c.channels == 0 {
                    return bad("gt_layers, fastgtn_layers and channels must be positive");
                }
                if c.non_local {
                    return bad("non-local operations are not implemented");
                }
                (c.learning_rate, c.dropout_rate, c.epochs_per_batch, c.passes, c.hidden_dim)
            }
        };
        if !(lr > 0.0) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&drop) {
            return bad("dropout_rate must lie in [0,1)");
        }
        if epochs == 0 || passes == 0 || hidden == 0 {
            return bad("epochs_per_batch, passes and hidden_dim must be positive");
        }
        Ok(())
    }

    pub fn init_params(&self, d: usize) -> ParamSet {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed());
        let mut p = ParamSet::new();
        match self {
            ModelConfig::Gcn(c) => {
                p.glorot("w1", d, c.hidden_dim, &mut rng);
                p.push("b1", Matrix::zeros(1, c.hidden_dim));
                p.glorot("w2", c.hidden_dim, 2, &mut rng);
                p.push("b2", Matrix::zeros(1, 2));
            }
            ModelConfig::FastGtn(c) => {
                let t = GTN_EDGE_KINDS.len() + 1;
                for l in 0..c.fastgtn_layers {
                    let input = if l == 0 { d } else { c.hidden_dim };
                    p.glorot(&format!("layer{l}.w"), input, c.hidden_dim, &mut rng);
                    p.push(format!("layer{l}.b"), Matrix::zeros(1, c.hidden_dim));
                    for ch in 0..c.channels {
                        for k in 0..c.gt_layers {
                            p.uniform(&format!("layer{l}.gt{ch}.{k}"), 1, t, 0.1, &mut rng);
                        }
                    }
                }
                p.glorot("head.w", c.hidden_dim, c.hidden_dim, &mut rng);
                p.push("head.b", Matrix::zeros(1, c.hidden_dim));
                p.glorot("out.w", c.hidden_dim, 2, &mut rng);
                p.push("out.b", Matrix::zeros(1, 2));
            }
        }
        p
    }

    /// Records the forward pass; returns per-node log-probabilities
    /// (column 0 = not nullable, column 1 = nullable). Dropout is active only
    /// when `rng` is given.
    pub fn forward(
        &self,
        tape: &mut Tape,
        params: &[Var],
        batch: &Batch,
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<Var> {
        match self {
            ModelConfig::Gcn(c) => {
                let adj = batch.gcn_adj.clone().ok_or_else(|| Error::ShapeMismatch {
                    op: "gcn_forward",
                    detail: "batch has no GCN adjacency".into(),
                })?;
                let xw = tape.spmm(batch.x.clone(), params[0])?;
                let h = tape.spmm(adj.clone(), xw)?;
                let h = tape.add_row(h, params[1])?;
                let mut h = tape.relu(h)?;
                if let Some(r) = rng.as_deref_mut() {
                    h = dropout(tape, h, c.dropout_rate, r)?;
                }
                let hw = tape.matmul(h, params[2])?;
                let o = tape.spmm(adj, hw)?;
                let o = tape.add_row(o, params[3])?;
                tape.log_softmax_rows(o)
            }
            ModelConfig::FastGtn(c) => {
                let adjs = batch.gtn_adjs.clone().ok_or_else(|| Error::ShapeMismatch {
                    op: "fastgtn_forward",
                    detail: "batch has no GTN adjacencies".into(),
                })?;
                let per_layer = 2 + c.channels * c.gt_layers;
                let mut h: Option<Var> = None;
                for l in 0..c.fastgtn_layers {
                    let base = l * per_layer;
                    let p = match h {
                        None => tape.spmm(batch.x.clone(), params[base])?,
                        Some(h) => tape.matmul(h, params[base])?,
                    };
                    let p = tape.add_row(p, params[base + 1])?;
                    let mut outs = Vec::with_capacity(c.channels);
                    for ch in 0..c.channels {
                        let mut z = p;
                        for k in 0..c.gt_layers {
                            let s = tape.softmax_row(params[base + 2 + ch * c.gt_layers + k])?;
                            z = tape.mix(adjs.clone(), s, z)?;
                        }
                        outs.push(z);
                    }
                    let agg = tape.mean(outs)?;
                    h = Some(tape.relu(agg)?);
                }
                let head = c.fastgtn_layers * per_layer;
                let mut h = h.expect("at least one layer");
                if let Some(r) = rng.as_deref_mut() {
                    h = dropout(tape, h, c.dropout_rate, r)?;
                }
                let z = tape.matmul(h, params[head])?;
                let z = tape.add_row(z, params[head + 1])?;
                let z = tape.relu(z)?;
                let z = tape.matmul(z, params[head + 2])?;
                let z = tape.add_row(z, params[head + 3])?;
                tape.log_softmax_rows(z)
            }
        }
    }

    /// Inference-mode log-probabilities.
    pub fn infer(&self, params: &ParamSet, batch: &Batch) -> Result<Matrix> {
        let mut tape = Tape::new();
        let vars = params
            .values
            .iter()
            .map(|v| tape.leaf(v.clone()))
            .collect::<Result<Vec<_>>>()?;
        let out = self.forward(&mut tape, &vars, batch, None)?;
        Ok(tape.value(out).clone())
    }
}

fn dropout(tape: &mut Tape, h: Var, rate: f64, rng: &mut ChaCha8Rng) -> Result<Var> {
    if rate == 0.0 {
        return Ok(h);
    }
    let (r, c) = tape.value(h).shape();
    let keep = 1.0 / (1.0 - rate);
    let data = (0..r * c).map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep }).collect();
    tape.mul_const(h, Matrix { rows: r, cols: c, data })
}

/// Several graphs stacked block-diagonally into one model input.
#[derive(Debug, Clone)]
pub struct Batch {
    pub n: usize,
    /// First row of each graph.
    pub offsets: Vec<usize>,
    pub x: Arc<SparseOp>,
    pub gcn_adj: Option<Arc<SparseOp>>,
    pub gtn_adjs: Option<Arc<Vec<SparseOp>>>,
}

impl Batch {
    pub fn new(graphs: &[&NapAst], kind: ModelKind, feature_dim: usize) -> Result<Batch> {
        let mut offsets = Vec::with_capacity(graphs.len());
        let mut n = 0;
        let mut xt = Vec::new();
        let mut edges: Vec<Vec<(usize, usize, f64)>> = vec![Vec::new(); EdgeKind::ALL.len()];
        for g in graphs {
            if g.feature_dim != feature_dim {
                return Err(Error::FeatureDimMismatch {
                    checkpoint: feature_dim,
                    encoder: g.feature_dim,
                });
            }
            offsets.push(n);
            for (i, row) in g.feature_rows()?.into_iter().enumerate() {
                xt.extend(row.into_iter().map(|c| (n + i, c, 1.0)));
            }
            for (k, kind) in EdgeKind::ALL.iter().enumerate() {
                edges[k].extend(g.edges(*kind).iter().map(|&(s, d)| (n + s as usize, n + d as usize, 1.0)));
            }
            n += g.len();
        }
        let x = Arc::new(SparseOp::new(Csr::from_triplets(n, feature_dim, xt)?));
        let mut batch = Batch {
            n,
            offsets,
            x,
            gcn_adj: None,
            gtn_adjs: None,
        };
        match kind {
            ModelKind::Gcn => {
                let mut tree = edges[EdgeKind::ParentChild as usize].clone();
                tree.extend(edges[EdgeKind::ChildParent as usize].iter().copied());
                let a = Csr::from_triplets(n, n, tree)?;
                let a = Csr {
                    values: vec![1.0; a.nnz()],
                    ..a
                };
                batch.gcn_adj = Some(Arc::new(SparseOp::new(a.sym_normalized_with_self_loops())));
            }
            ModelKind::FastGtn => {
                let mut adjs = vec![SparseOp::new(Csr::identity(n))];
                for e in edges {
                    adjs.push(SparseOp::new(Csr::from_triplets(n, n, e)?.row_normalized()));
                }
                batch.gtn_adjs = Some(Arc::new(adjs));
            }
        }
        Ok(batch)
    }

    pub fn from_parts(
        x: Csr,
        gcn_adj: Option<Csr>,
        gtn_adjs: Option<Vec<Csr>>,
    ) -> Batch {
        Batch {
            n: x.rows,
            offsets: vec![0],
            x: Arc::new(SparseOp::new(x)),
            gcn_adj: gcn_adj.map(|a| Arc::new(SparseOp::new(a))),
            gtn_adjs: gtn_adjs.map(|v| Arc::new(v.into_iter().map(SparseOp::new).collect())),
        }
    }
}

/// One GT layer: per channel, the softmax-weighted sum of candidate
/// adjacencies.
pub fn gt_layer(adjs: &[Matrix], weights: &[Matrix]) -> Result<Vec<Matrix>> {
    let n = adjs.first().map(|a| a.rows).unwrap_or(0);
    if let Some(a) = adjs.iter().find(|a| a.shape() != (n, n)) {
        return Err(Error::ShapeMismatch {
            op: "gt_layer",
            detail: format!("adjacency {:?} vs {n}x{n}", a.shape()),
        });
    }
    weights
        .iter()
        .map(|w| {
            if w.data.len() != adjs.len() {
                return Err(Error::ShapeMismatch {
                    op: "gt_layer",
                    detail: format!("{} weights for {} adjacencies", w.data.len(), adjs.len()),
                });
            }
            let s = softmax(&w.data);
            let mut out = Matrix::zeros(n, n);
            for (t, a) in adjs.iter().enumerate() {
                out.axpy(s.data[t], a)?;
            }
            Ok(out)
        })
        .collect()
}

/// Reference GTN forward that materializes every meta-path adjacency
/// product. Equal to the implicit FastGTN computation.
pub fn explicit_gtn_forward(cfg: &GtnConfig, params: &ParamSet, batch: &Batch) -> Result<Matrix> {
    let adjs = batch.gtn_adjs.as_ref().ok_or_else(|| Error::ShapeMismatch {
        op: "explicit_gtn",
        detail: "batch has no GTN adjacencies".into(),
    })?;
    let dense: Vec<Matrix> = adjs.iter().map(|a| a.fwd.to_dense()).collect();
    let p = |name: String| {
        params.get(&name).cloned().ok_or_else(|| Error::Config(format!("missing parameter {name}")))
    };
    let x = batch.x.fwd.to_dense();
    let mut h = x;
    for l in 0..cfg.fastgtn_layers {
        let w = p(format!("layer{l}.w"))?;
        let b = p(format!("layer{l}.b"))?;
        let mut proj = h.matmul(&w)?;
        add_row_inplace(&mut proj, &b);
        let mut acc = Matrix::zeros(proj.rows, proj.cols);
        for ch in 0..cfg.channels {
            let mut meta = Matrix::identity(batch.n);
            for k in 0..cfg.gt_layers {
                let a = gt_layer(&dense, &[p(format!("layer{l}.gt{ch}.{k}"))?])?.remove(0);
                meta = a.matmul(&meta)?;
            }
            acc.add_assign(&meta.matmul(&proj)?)?;
        }
        let mean = acc.scale(1.0 / cfg.channels as f64);
        h = Matrix {
            data: mean.data.iter().map(|v| v.max(0.0)).collect(),
            ..mean
        };
    }
    let mut z = h.matmul(&p("head.w".into())?)?;
    add_row_inplace(&mut z, &p("head.b".into())?);
    let z = Matrix {
        data: z.data.iter().map(|v| v.max(0.0)).collect(),
        ..z
    };
    let mut z = z.matmul(&p("out.w".into())?)?;
    add_row_inplace(&mut z, &p("out.b".into())?);
    for r in 0..z.rows {
        let row = z.row_mut(r);
        let m = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        for v in row.iter_mut() {
            *v -= lse;
        }
    }
    Ok(z)
}

fn add_row_inplace(m: &mut Matrix, b: &Matrix) {
    for r in 0..m.rows {
        for (o, v) in m.row_mut(r).iter_mut().zip(&b.data) {
            *o += v;
        }
    }
}
