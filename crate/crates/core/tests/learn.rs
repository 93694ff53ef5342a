mod support;

use std::sync::Arc;

use qualinfer::learn::*;
use qualinfer::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

const RTOL: f64 = 1e-4;
const ATOL: f64 = 1e-6;
const STEP: f64 = 1e-6;

fn assert_grad<F>(inputs: &[Matrix], f: F)
where
    F: Fn(&mut Tape, &[Var]) -> qualinfer::Result<Var>,
{
    let r = check_gradients(inputs, f, STEP, RTOL, ATOL).unwrap();
    assert!(r.passed(), "{r:?}");
}

fn probe(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    random_matrix(rng, rows, cols)
}

#[test]
fn op_gradients_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let (n, k, m) = (rng.gen_range(1..5), rng.gen_range(1..5), rng.gen_range(1..5));
        let a = random_matrix(&mut rng, n, k);
        let b = random_matrix(&mut rng, k, m);
        let c = probe(&mut rng, n, m);
        let cc = c.clone();
        assert_grad(&[a.clone(), b], move |t, v| {
            let y = t.matmul(v[0], v[1])?;
            t.weighted_sum(y, cc.clone())
        });

        let s = Arc::new(SparseOp::new(random_sparse(&mut rng, m, n, 0.5)));
        let cc = probe(&mut rng, m, k);
        assert_grad(&[a.clone()], move |t, v| {
            let y = t.spmm(s.clone(), v[0])?;
            t.weighted_sum(y, cc.clone())
        });

        let adjs: Arc<Vec<SparseOp>> =
            Arc::new((0..3).map(|_| SparseOp::new(random_sparse(&mut rng, n, n, 0.5))).collect());
        let w = random_matrix(&mut rng, 1, 3);
        let cc = probe(&mut rng, n, k);
        assert_grad(&[w, a.clone()], move |t, v| {
            let y = t.mix(adjs.clone(), v[0], v[1])?;
            t.weighted_sum(y, cc.clone())
        });

        let bias = random_matrix(&mut rng, 1, k);
        let other = random_matrix(&mut rng, n, k);
        let cc = probe(&mut rng, n, k);
        assert_grad(&[a.clone(), bias, other], move |t, v| {
            let y = t.add_row(v[0], v[1])?;
            let y = t.add(y, v[2])?;
            let y = t.scale(y, 1.7)?;
            let y = t.relu(y)?;
            t.weighted_sum(y, cc.clone())
        });

        let mask = probe(&mut rng, n, k);
        let cc = probe(&mut rng, n, k);
        assert_grad(&[a.clone()], move |t, v| {
            let y = t.mul_const(v[0], mask.clone())?;
            let z = t.log_softmax_rows(y)?;
            t.weighted_sum(z, cc.clone())
        });

        let row = random_matrix(&mut rng, 1, m);
        let cc = probe(&mut rng, 1, m);
        assert_grad(&[row], move |t, v| {
            let y = t.softmax_row(v[0])?;
            t.weighted_sum(y, cc.clone())
        });

        let targets: Vec<(usize, usize)> = (0..n).map(|r| (r, rng.gen_range(0..k))).collect();
        let other = random_matrix(&mut rng, n, k);
        assert_grad(&[a.clone(), other], move |t, v| {
            let m = t.mean(vec![v[0], v[1]])?;
            let z = t.log_softmax_rows(m)?;
            t.nll(z, targets.clone())
        });
    }
}

#[test]
fn full_gcn_gradients_on_four_nodes() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let d = 5;
    let batch = gcn_batch_from_edges(4, random_features(&mut rng, 4, d), &[(0, 1), (1, 2), (1, 3)]);
    let cfg = ModelConfig::Gcn(GcnConfig {
        hidden_dim: 3,
        ..GcnConfig::default()
    });
    let p = gcn_params(d, 3, &mut rng);
    assert_grad(&p.values, |t, v| {
        let out = cfg.forward(t, v, &batch, None)?;
        t.nll(out, vec![(0, 1), (2, 0), (3, 1)])
    });
}

#[test]
fn full_fastgtn_gradients() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let d = 4;
    let batch = random_gtn_batch(&mut rng, 5, d, 3);
    let gc = GtnConfig {
        gt_layers: 2,
        fastgtn_layers: 2,
        channels: 2,
        hidden_dim: 3,
        ..GtnConfig::default()
    };
    let p = gtn_params(&gc, d, 3, &mut rng);
    let cfg = ModelConfig::FastGtn(gc);
    assert_grad(&p.values, |t, v| {
        let out = cfg.forward(t, v, &batch, None)?;
        t.nll(out, vec![(0, 1), (1, 0), (4, 1)])
    });
}

fn dense_relu(m: &Matrix) -> Matrix {
    Matrix::from_vec(m.rows, m.cols, m.data.iter().map(|v| v.max(0.0)).collect()).unwrap()
}

fn dense_log_softmax(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows {
        let lse = m.row(r).iter().map(|v| v.exp()).sum::<f64>().ln();
        for v in out.row_mut(r) {
            *v -= lse;
        }
    }
    out
}

fn dense_plus_row(m: &Matrix, b: &Matrix) -> Matrix {
    let mut out = m.clone();
    for r in 0..m.rows {
        for (o, bv) in out.row_mut(r).iter_mut().zip(&b.data) {
            *o += bv;
        }
    }
    out
}

#[test]
fn gcn_path_graph_matches_dense_oracle() {
    let s6 = 1.0 / 6f64.sqrt();
    let a_hat = Matrix::from_rows(&[vec![0.5, s6, 0.0], vec![s6, 1.0 / 3.0, s6], vec![0.0, s6, 0.5]]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let d = 4;
    let x = random_features(&mut rng, 3, d);
    let batch = gcn_batch_from_edges(3, x.clone(), &[(0, 1), (1, 2)]);
    assert!(batch.gcn_adj.as_ref().unwrap().fwd.to_dense().max_abs_diff(&a_hat) < 1e-15);
    let p = gcn_params(d, 3, &mut rng);
    let cfg = ModelConfig::Gcn(GcnConfig {
        hidden_dim: 3,
        ..GcnConfig::default()
    });
    let got = cfg.infer(&p, &batch).unwrap();
    let xd = x.to_dense();
    let h = dense_relu(&dense_plus_row(&a_hat.matmul(&xd.matmul(&p.values[0]).unwrap()).unwrap(), &p.values[1]));
    let o = dense_plus_row(&a_hat.matmul(&h.matmul(&p.values[2]).unwrap()).unwrap(), &p.values[3]);
    let want = dense_log_softmax(&o);
    assert!(got.max_abs_diff(&want) < 1e-12, "{}", got.max_abs_diff(&want));
}

#[test]
fn gcn_single_node_by_hand() {
    let x = Csr::from_triplets(1, 2, vec![(0, 0, 1.0), (0, 1, 1.0)]).unwrap();
    let batch = gcn_batch_from_edges(1, x, &[]);
    let mut p = ParamSet::new();
    p.push("w1", Matrix::from_rows(&[vec![1.0, -2.0], vec![0.5, 1.0]]).unwrap());
    p.push("b1", Matrix::zeros(1, 2));
    p.push("w2", Matrix::identity(2));
    p.push("b2", Matrix::zeros(1, 2));
    let cfg = ModelConfig::Gcn(GcnConfig {
        hidden_dim: 2,
        ..GcnConfig::default()
    });
    let got = cfg.infer(&p, &batch).unwrap();
    // x W1 = (1.5, -1), relu -> (1.5, 0)
    let lse = (1.5f64.exp() + 1.0).ln();
    assert!((got.get(0, 0) - (1.5 - lse)).abs() < 1e-12);
    assert!((got.get(0, 1) - (0.0 - lse)).abs() < 1e-12);
}

fn permute_csr(m: &Csr, perm: &[usize], rows: bool, cols: bool) -> Csr {
    let mut t = Vec::new();
    for r in 0..m.rows {
        for (c, v) in m.row_entries(r) {
            let r2 = if rows { perm[r] } else { r };
            let c2 = if cols { perm[c] } else { c };
            t.push((r2, c2, v));
        }
    }
    Csr::from_triplets(m.rows, m.cols, t).unwrap()
}

#[test]
fn models_are_permutation_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, d) = (6, 4);
    let perm: Vec<usize> = vec![3, 0, 5, 1, 4, 2];
    let x = random_features(&mut rng, n, d);
    let tree = random_tree(&mut rng, n);
    let b1 = gcn_batch_from_edges(n, x.clone(), &tree);
    let ptree: Vec<_> = tree.iter().map(|&(a, b)| (perm[a], perm[b])).collect();
    let b2 = gcn_batch_from_edges(n, permute_csr(&x, &perm, true, false), &ptree);
    let cfg = ModelConfig::Gcn(GcnConfig {
        hidden_dim: 3,
        ..GcnConfig::default()
    });
    let p = gcn_params(d, 3, &mut rng);
    let o1 = cfg.infer(&p, &b1).unwrap();
    let o2 = cfg.infer(&p, &b2).unwrap();
    for i in 0..n {
        for c in 0..2 {
            assert!((o1.get(i, c) - o2.get(perm[i], c)).abs() < 1e-12);
        }
    }

    let g1 = random_gtn_batch(&mut rng, n, d, 3);
    let adjs = g1.gtn_adjs.as_ref().unwrap();
    let g2 = Batch::from_parts(
        permute_csr(&g1.x.fwd, &perm, true, false),
        None,
        Some(adjs.iter().map(|a| permute_csr(&a.fwd, &perm, true, true)).collect()),
    );
    let gc = GtnConfig {
        gt_layers: 2,
        hidden_dim: 3,
        ..GtnConfig::default()
    };
    let p = gtn_params(&gc, d, 3, &mut rng);
    let cfg = ModelConfig::FastGtn(gc);
    let o1 = cfg.infer(&p, &g1).unwrap();
    let o2 = cfg.infer(&p, &g2).unwrap();
    for i in 0..n {
        for c in 0..2 {
            assert!((o1.get(i, c) - o2.get(perm[i], c)).abs() < 1e-12);
        }
    }
}

#[test]
fn gt_layer_examples() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let a1 = random_matrix(&mut rng, 3, 3);
    let a2 = random_matrix(&mut rng, 3, 3);
    let a3 = random_matrix(&mut rng, 3, 3);
    let one = gt_layer(&[a1.clone()], &[Matrix::from_vec(1, 1, vec![4.2]).unwrap()]).unwrap();
    assert!(one[0].max_abs_diff(&a1) < 1e-15);
    let half = gt_layer(&[a1.clone(), a2.clone()], &[Matrix::zeros(1, 2)]).unwrap();
    assert!(half[0].max_abs_diff(&a1.scale(0.5).add(&a2.scale(0.5)).unwrap()) < 1e-15);
    let sat = gt_layer(
        &[a1.clone(), a2, a3],
        &[Matrix::from_vec(1, 3, vec![10.0, 0.0, 0.0]).unwrap()],
    )
    .unwrap();
    assert!(sat[0].max_abs_diff(&a1) < 1e-4);
    let bad = gt_layer(&[a1, Matrix::zeros(2, 2)], &[Matrix::zeros(1, 2)]);
    assert!(matches!(bad, Err(Error::ShapeMismatch { .. })));
}

#[test]
fn fastgtn_equals_explicit_gtn() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..25 {
        let n = rng.gen_range(1..=20);
        let t = rng.gen_range(1..=3);
        let d = rng.gen_range(1..=5);
        let gc = GtnConfig {
            gt_layers: rng.gen_range(1..=3),
            fastgtn_layers: rng.gen_range(1..=3),
            channels: rng.gen_range(1..=2),
            hidden_dim: 3,
            ..GtnConfig::default()
        };
        let batch = random_gtn_batch(&mut rng, n, d, t);
        let p = gtn_params(&gc, d, t, &mut rng);
        let explicit = explicit_gtn_forward(&gc, &p, &batch).unwrap();
        let implicit = ModelConfig::FastGtn(gc).infer(&p, &batch).unwrap();
        assert!(implicit.max_abs_diff(&explicit) < 1e-9);
    }
}

#[test]
fn fastgtn_single_step_degenerates_to_one_propagation() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let (n, d) = (5, 3);
    let a = random_sparse(&mut rng, n, n, 0.5);
    let x = random_features(&mut rng, n, d);
    let batch = Batch::from_parts(x.clone(), None, Some(vec![a.clone()]));
    let gc = GtnConfig {
        gt_layers: 1,
        fastgtn_layers: 1,
        channels: 1,
        hidden_dim: 2,
        ..GtnConfig::default()
    };
    let p = gtn_params(&gc, d, 1, &mut rng);
    let got = ModelConfig::FastGtn(gc).infer(&p, &batch).unwrap();
    let g = |k: &str| p.get(k).unwrap();
    let h = dense_relu(&a.to_dense().matmul(&dense_plus_row(&x.to_dense().matmul(g("layer0.w")).unwrap(), g("layer0.b"))).unwrap());
    let z = dense_relu(&dense_plus_row(&h.matmul(g("head.w")).unwrap(), g("head.b")));
    let want = dense_log_softmax(&dense_plus_row(&z.matmul(g("out.w")).unwrap(), g("out.b")));
    assert!(got.max_abs_diff(&want) < 1e-12);
}

#[test]
fn identical_channels_equal_one_channel() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let batch = random_gtn_batch(&mut rng, 6, 3, 3);
    let one = GtnConfig {
        gt_layers: 2,
        fastgtn_layers: 2,
        channels: 1,
        hidden_dim: 3,
        ..GtnConfig::default()
    };
    let p1 = gtn_params(&one, 3, 3, &mut rng);
    let two = GtnConfig { channels: 2, ..one.clone() };
    let mut p2 = ParamSet::new();
    for l in 0..2 {
        for name in [format!("layer{l}.w"), format!("layer{l}.b")] {
            p2.push(name.clone(), p1.get(&name).unwrap().clone());
        }
        for _ch in 0..2 {
            for k in 0..2 {
                let name = format!("layer{l}.gt0.{k}");
                p2.push(name.clone(), p1.get(&name).unwrap().clone());
            }
        }
    }
    for name in ["head.w", "head.b", "out.w", "out.b"] {
        p2.push(name, p1.get(name).unwrap().clone());
    }
    let o1 = ModelConfig::FastGtn(one).infer(&p1, &batch).unwrap();
    let o2 = ModelConfig::FastGtn(two).infer(&p2, &batch).unwrap();
    assert!(o1.max_abs_diff(&o2) < 1e-12);
}

#[test]
fn output_rows_are_log_probabilities() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let batch = random_gtn_batch(&mut rng, 7, 4, 3);
    let gc = GtnConfig {
        gt_layers: 2,
        hidden_dim: 4,
        ..GtnConfig::default()
    };
    let p = gtn_params(&gc, 4, 3, &mut rng);
    let out = ModelConfig::FastGtn(gc).infer(&p, &batch).unwrap();
    for r in 0..out.rows {
        let lse = out.row(r).iter().map(|v| v.exp()).sum::<f64>().ln();
        assert!(lse.abs() < 1e-9);
    }
}

#[test]
fn adam_step_matches_hand_recursion() {
    // f(θ) = θ², θ = 2 -> g = 4, starting from m = 0.1, v = 0.2 at step 3.
    let mut p = ParamSet::new();
    p.push("theta", Matrix::from_vec(1, 1, vec![2.0]).unwrap());
    let mut adam = Adam::new(&p, 0.01, 0.001);
    adam.set_moments(
        vec![Matrix::from_vec(1, 1, vec![0.1]).unwrap()],
        vec![Matrix::from_vec(1, 1, vec![0.2]).unwrap()],
        3,
    );
    adam.update(&mut p, &[Matrix::from_vec(1, 1, vec![4.0]).unwrap()]).unwrap();
    let m = 0.9 * 0.1 + 0.1 * 4.0;
    let v = 0.999 * 0.2 + 0.001 * 16.0;
    let mh = m / (1.0 - 0.9f64.powi(4));
    let vh = v / (1.0 - 0.999f64.powi(4));
    let want = 2.0 - 0.01 * (mh / (vh.sqrt() + 1e-8) + 0.001 * 2.0);
    assert!((p.values[0].data[0] - want).abs() < 1e-15);
    let (ms, vs) = adam.moments();
    assert!((ms[0].data[0] - m).abs() < 1e-15 && (vs[0].data[0] - v).abs() < 1e-15);
}

#[test]
fn adam_zero_gradient_only_decays() {
    let mut p = ParamSet::new();
    p.push("w", Matrix::from_vec(1, 2, vec![3.0, -1.0]).unwrap());
    let mut adam = Adam::new(&p, 0.1, 0.01);
    adam.update(&mut p, &[Matrix::zeros(1, 2)]).unwrap();
    assert_eq!(p.values[0].data, vec![3.0 - 0.1 * 0.01 * 3.0, -1.0 + 0.1 * 0.01 * 1.0]);
}

#[test]
fn adam_rejects_nonfinite_gradients() {
    let mut p = ParamSet::new();
    p.push("w", Matrix::zeros(1, 1));
    let mut adam = Adam::new(&p, 0.1, 0.0);
    let nan = Matrix {
        rows: 1,
        cols: 1,
        data: vec![f64::NAN],
    };
    let err = adam.update(&mut p, &[nan]);
    assert!(matches!(err, Err(Error::NonFiniteGradient { ref param }) if param == "w"));
}

#[test]
fn nonfinite_values_name_the_op() {
    let mut t = Tape::new();
    let a = t.leaf(Matrix::from_vec(1, 1, vec![1e300]).unwrap()).unwrap();
    let err = t.scale(a, 1e300).unwrap_err();
    assert!(matches!(err, Error::NonFiniteValue { op: "scale" }));
}

#[test]
fn ten_nullable_nodes_split_six_two_two() {
    let corpus = vec![separable_class("p.A", 10, 10)];
    let s = split_nodes(&corpus, &SplitSpec::default()).unwrap();
    let nullable = |set: &[NodeRef]| {
        set.iter()
            .filter(|&&(g, n)| corpus[g].label_vector[n] == qualinfer::napast::NodeLabel::Nullable)
            .count()
    };
    assert_eq!((nullable(&s.train), nullable(&s.validation), nullable(&s.test)), (6, 2, 2));
    assert_eq!((s.train.len(), s.validation.len(), s.test.len()), (12, 4, 4));
}

#[test]
fn empty_split_is_reported() {
    let corpus = vec![separable_class("p.A", 1, 3)];
    assert!(matches!(split_nodes(&corpus, &SplitSpec::default()), Err(Error::EmptySplit(_))));
}

fn small_gcn(seed: u64) -> ModelConfig {
    ModelConfig::Gcn(GcnConfig {
        hidden_dim: 16,
        epochs_per_batch: 10,
        passes: 5,
        seed,
        ..GcnConfig::default()
    })
}

#[test]
fn separable_fixture_is_learned() {
    let corpus: Vec<_> = (0..6).map(|i| separable_class(&format!("p.C{i}"), 4, 6)).collect();
    let (_, report) = train(&corpus, &SplitSpec::default(), &small_gcn(1), 8000).unwrap();
    assert!(report.best_validation_f1 >= 0.99, "{report:?}");
    assert!(report.test_f1 >= 0.99, "{report:?}");
    assert_eq!(report.epochs.len(), 50);
}

#[test]
fn training_is_deterministic_and_checkpoints_round_trip() {
    let corpus: Vec<_> = (0..4).map(|i| separable_class(&format!("p.C{i}"), 3, 5)).collect();
    let (a, _) = train(&corpus, &SplitSpec::default(), &small_gcn(2), 8000).unwrap();
    let (b, _) = train(&corpus, &SplitSpec::default(), &small_gcn(2), 8000).unwrap();
    assert_eq!(a.to_json(), b.to_json());
    let back = ModelCheckpoint::from_json(&a.to_json()).unwrap();
    assert_eq!(back, a);
    let refs: Vec<_> = corpus.iter().collect();
    assert_eq!(back.predict(&refs).unwrap(), a.predict(&refs).unwrap());
}

#[test]
fn checkpoint_rejects_incompatible_graphs() {
    let corpus: Vec<_> = (0..4).map(|i| separable_class(&format!("p.C{i}"), 3, 5)).collect();
    let (ckpt, _) = train(&corpus, &SplitSpec::default(), &small_gcn(3), 8000).unwrap();
    let mut other = corpus[0].clone();
    other.prune_digest = "deadbeef".into();
    assert!(matches!(ckpt.predict(&[&other]), Err(Error::PruneDigestMismatch { .. })));
    let mut wide = corpus[0].clone();
    wide.feature_dim += 1;
    assert!(matches!(ckpt.predict(&[&wide]), Err(Error::FeatureDimMismatch { .. })));
}

#[test]
fn loss_decreases_on_a_fixed_batch_at_small_lr() {
    let corpus: Vec<_> = (0..4).map(|i| separable_class(&format!("p.C{i}"), 3, 5)).collect();
    let cfg = ModelConfig::Gcn(GcnConfig {
        hidden_dim: 8,
        dropout_rate: 0.0,
        learning_rate: 1e-3,
        weight_decay: 0.0,
        epochs_per_batch: 30,
        passes: 1,
        ..GcnConfig::default()
    });
    let (_, report) = train(&corpus, &SplitSpec::default(), &cfg, 8000).unwrap();
    for w in report.epochs.windows(2) {
        assert!(w[1].loss <= w[0].loss + 1e-12, "{:?}", report.epochs);
    }
}

#[test]
fn cap_is_enforced_in_training() {
    let corpus = vec![separable_class("p.A", 10, 10)];
    let err = train(&corpus, &SplitSpec::default(), &small_gcn(0), 5).unwrap_err();
    assert!(matches!(err, Error::CapExceeded { .. }));
}
