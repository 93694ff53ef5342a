#![allow(dead_code)]

use qualinfer::ingest::{Label, Modifiers, NodeKind, RawGraph, RawNode};
use qualinfer::learn::{Batch, Csr, Matrix};
use qualinfer::napast::{encode_features, NapAst};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    let data = (0..rows * cols).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Matrix::from_vec(rows, cols, data).unwrap()
}

pub fn random_sparse(rng: &mut ChaCha8Rng, rows: usize, cols: usize, density: f64) -> Csr {
    let mut t = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if rng.gen_bool(density) {
                t.push((r, c, rng.gen_range(-1.0..1.0)));
            }
        }
    }
    Csr::from_triplets(rows, cols, t).unwrap()
}

/// Random tree over `n` nodes as a parent list (node 0 is the root).
pub fn random_tree(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize)> {
    (1..n).map(|i| (rng.gen_range(0..i), i)).collect()
}

/// Random binary feature matrix with at least one bit per row.
pub fn random_features(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Csr {
    let mut t = Vec::new();
    for r in 0..n {
        t.push((r, rng.gen_range(0..d), 1.0));
        for c in 0..d {
            if rng.gen_bool(0.2) {
                t.push((r, c, 1.0));
            }
        }
    }
    let m = Csr::from_triplets(n, d, t).unwrap();
    Csr {
        values: vec![1.0; m.nnz()],
        ..m
    }
}

/// Identity plus `t - 1` random row-normalized adjacencies.
pub fn random_gtn_batch(rng: &mut ChaCha8Rng, n: usize, d: usize, t: usize) -> Batch {
    let mut adjs = vec![Csr::identity(n)];
    for _ in 1..t {
        let mut e = Vec::new();
        for r in 0..n {
            for c in 0..n {
                if rng.gen_bool(0.3) {
                    e.push((r, c, 1.0));
                }
            }
        }
        adjs.push(Csr::from_triplets(n, n, e).unwrap().row_normalized());
    }
    Batch::from_parts(random_features(rng, n, d), None, Some(adjs))
}

pub fn gcn_batch_from_edges(n: usize, x: Csr, edges: &[(usize, usize)]) -> Batch {
    let mut t = Vec::new();
    for &(a, b) in edges {
        t.push((a, b, 1.0));
        t.push((b, a, 1.0));
    }
    let a = Csr::from_triplets(n, n, t).unwrap();
    Batch::from_parts(x, Some(a.sym_normalized_with_self_loops()), None)
}

/// A class whose labeled field declarators carry the `volatile` bit exactly
/// when they are nullable.
pub fn separable_class(id: &str, nullable: usize, plain: usize) -> NapAst {
    let mut nodes = vec![
        RawNode::new(0, NodeKind::CompilationUnit),
        RawNode::new(1, NodeKind::ClassOrInterfaceDecl),
    ];
    let mut parent = vec![None, Some(0)];
    for k in 0..nullable + plain {
        let fid = nodes.len() as u32;
        nodes.push(RawNode::new(fid, NodeKind::FieldDeclaration));
        parent.push(Some(1));
        let mut v = RawNode::new(fid + 1, NodeKind::VariableDeclarator);
        v.name = Some(format!("f{k}"));
        v.decl_type = Some("Object".into());
        if k < nullable {
            v.modifiers = Modifiers::empty().with("volatile");
            v.label = Some(Label::Nullable);
        } else {
            v.label = Some(Label::NotNullable);
        }
        nodes.push(v);
        parent.push(Some(fid as usize));
    }
    let keep = vec![true; nodes.len()];
    let parent: Vec<Option<u32>> = parent.into_iter().map(|p| p.map(|p| p as u32)).collect();
    let g = RawGraph::rebuild(id, &nodes, &keep, &parent, &[]);
    encode_features(&g, 8000, "fixture").unwrap()
}

/// FastGTN parameters for `t` candidate adjacencies, in forward order.
pub fn gtn_params(
    cfg: &qualinfer::learn::GtnConfig,
    d: usize,
    t: usize,
    rng: &mut ChaCha8Rng,
) -> qualinfer::learn::ParamSet {
    let mut p = qualinfer::learn::ParamSet::new();
    let h = cfg.hidden_dim;
    for l in 0..cfg.fastgtn_layers {
        let input = if l == 0 { d } else { h };
        p.push(format!("layer{l}.w"), random_matrix(rng, input, h));
        p.push(format!("layer{l}.b"), random_matrix(rng, 1, h));
        for ch in 0..cfg.channels {
            for k in 0..cfg.gt_layers {
                p.push(format!("layer{l}.gt{ch}.{k}"), random_matrix(rng, 1, t).scale(2.0));
            }
        }
    }
    p.push("head.w", random_matrix(rng, h, h));
    p.push("head.b", random_matrix(rng, 1, h));
    p.push("out.w", random_matrix(rng, h, 2));
    p.push("out.b", random_matrix(rng, 1, 2));
    p
}

pub fn gcn_params(d: usize, h: usize, rng: &mut ChaCha8Rng) -> qualinfer::learn::ParamSet {
    let mut p = qualinfer::learn::ParamSet::new();
    p.push("w1", random_matrix(rng, d, h));
    p.push("b1", random_matrix(rng, 1, h));
    p.push("w2", random_matrix(rng, h, 2));
    p.push("b2", random_matrix(rng, 1, 2));
    p
}
