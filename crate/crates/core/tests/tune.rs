mod support;

use std::collections::BTreeSet;

use proptest::prelude::*;
use qualinfer::ingest::{parse_class, AliasTable, NodeKind, RawGraph};
use qualinfer::learn::{split_nodes, GcnConfig, SplitSpec};
use qualinfer::napast::*;
use qualinfer::tune::*;
use qualinfer::Error;
use support::separable_class;

#[test]
fn reference_node_ablation_yields_default_drop_list() {
    let results = reference_node_ablation();
    assert_eq!(results.len(), 44);
    let above: Vec<_> = results
        .iter()
        .filter(|r| r.target != RANDOM_TARGET && r.mean_f1 > 0.8561)
        .collect();
    assert_eq!(above.len(), 27);
    let drop = derive_drop_list(&results).unwrap();
    let want: BTreeSet<NodeKind> = DEFAULT_PHASE2_DROP.iter().copied().collect();
    assert_eq!(drop, want);
    assert!(!drop.contains(&NodeKind::VariableDeclarator));
    assert!(drop.contains(&NodeKind::ArrayType) && !drop.contains(&NodeKind::ArrayCreationExpr));
}

#[test]
fn reference_statement_ablation_yields_default_prune_list() {
    let drop = derive_drop_list(&reference_statement_ablation()).unwrap();
    let want: BTreeSet<NodeKind> = DEFAULT_PHASE3_PRUNE.iter().copied().collect();
    assert_eq!(drop, want);
    assert!(!drop.contains(&NodeKind::ExpressionStmt));
}

#[test]
fn drop_list_boundaries() {
    let r = |t: &str, f: f64| AblationResult::new(t, vec![f]);
    assert!(derive_drop_list(&[r("<random>", 0.9), r("IfStmt", 0.5), r("ForStmt", 0.8)]).unwrap().is_empty());
    assert!(derive_drop_list(&[r("<random>", 0.8), r("IfStmt", 0.8)]).unwrap().is_empty());
    assert!(matches!(derive_drop_list(&[r("IfStmt", 0.8)]), Err(Error::MissingBaseline)));
    assert_eq!(
        derive_drop_list(&[r("<random>", 0.8), r("IfStmt", 0.81)]).unwrap(),
        BTreeSet::from([NodeKind::IfStmt])
    );
}

#[test]
fn ablation_mean_is_arithmetic() {
    let r = AblationResult::new("IfStmt", vec![0.5, 0.7, 0.9]);
    assert!((r.mean_f1 - 0.7).abs() < 1e-15);
}

#[test]
fn csv_round_trip() {
    let rs = reference_statement_ablation();
    let back = parse_ablation_csv(&ablation_csv(&rs)).unwrap();
    assert_eq!(back, rs);
}

proptest! {
    #[test]
    fn drop_list_ignores_input_order(seed in any::<u64>(), scores in prop::collection::vec(0.0f64..1.0, 44)) {
        let mut results: Vec<AblationResult> = reference_node_ablation()
            .into_iter()
            .zip(scores)
            .map(|(r, s)| AblationResult::new(r.target, vec![s]))
            .collect();
        let a = derive_drop_list(&results).unwrap();
        let n = results.len();
        for i in 0..n {
            let j = (seed.wrapping_mul(i as u64 + 1) % n as u64) as usize;
            results.swap(i, j);
        }
        prop_assert_eq!(a, derive_drop_list(&results).unwrap());
    }
}

/// Nullable fields are exactly the ones initialized to null.
fn null_dependent_corpus() -> Vec<RawGraph> {
    (0..6)
        .map(|c| {
            let mut src = format!("package p;\nimport javax.annotation.Nullable;\nclass C{c} {{\n");
            for i in 0..5 {
                src.push_str(&format!("  @Nullable Object n{i} = null;\n  Object k{i};\n"));
            }
            src.push_str("}\n");
            parse_class(&src, &AliasTable::default()).unwrap()
        })
        .collect()
}

fn quick_spec() -> AblationSpec {
    AblationSpec {
        reps: 2,
        split: SplitSpec::default(),
        model: GcnConfig {
            hidden_dim: 16,
            epochs_per_batch: 10,
            passes: 5,
            ..GcnConfig::default()
        },
        seed: 0,
    }
}

fn phase1_only() -> PruneConfig {
    PruneConfig {
        phase1_rules: PruneConfig::default().phase1_rules,
        ..PruneConfig::identity()
    }
}

#[test]
fn dropping_the_deciding_kind_collapses_f1() {
    let corpus = null_dependent_corpus();
    let spec = quick_spec();
    let results =
        ablate_node_types(&corpus, &phase1_only(), &[NodeKind::NullLiteralExpr, NodeKind::MemberValuePair], &spec)
            .unwrap();
    let f = |t: &str| results.iter().find(|r| r.target == t).unwrap().mean_f1;
    let absent = f("MemberValuePair");
    let null = f("NullLiteralExpr");
    assert!(absent >= 0.99, "{results:?}");
    assert!(null <= absent * 0.7, "{results:?}");
    assert!(results.windows(2).all(|w| w[0].mean_f1 >= w[1].mean_f1));
    for r in &results {
        assert_eq!(r.f1_scores.len(), 2);
        assert!(r.f1_scores.iter().all(|f| (0.0..=1.0).contains(f)));
    }
}

#[test]
fn absent_kind_matches_the_undropped_baseline() {
    let corpus = null_dependent_corpus();
    let spec = quick_spec();
    // an absent kind makes the random baseline drop nothing as well
    let results = ablate_node_types(&corpus, &phase1_only(), &[NodeKind::MemberValuePair], &spec).unwrap();
    assert_eq!(results.len(), 2);
    assert_eq!(results[0].f1_scores, results[1].f1_scores);
    let stmt = ablate_statement_types(&corpus, &phase1_only(), &[NodeKind::SynchronizedStmt], &spec).unwrap();
    assert_eq!(stmt[0].f1_scores, stmt[1].f1_scores);
    assert_eq!(stmt[0].f1_scores, results[0].f1_scores);
}

#[test]
fn ablation_is_deterministic() {
    let corpus = null_dependent_corpus();
    let spec = quick_spec();
    let kinds = [NodeKind::NullLiteralExpr, NodeKind::ClassOrInterfaceType];
    let a = ablate_node_types(&corpus, &phase1_only(), &kinds, &spec).unwrap();
    let b = ablate_node_types(&corpus, &phase1_only(), &kinds, &spec).unwrap();
    assert_eq!(a, b);
}

#[test]
fn statement_ablation_rejects_expressions() {
    let err = ablate_statement_types(&null_dependent_corpus(), &phase1_only(), &[NodeKind::NameExpr], &quick_spec());
    assert!(matches!(err, Err(Error::Config(_))));
}

#[test]
fn ablation_splits_are_held_out() {
    let corpus: Vec<_> = (0..4).map(|i| separable_class(&format!("p.C{i}"), 5, 5)).collect();
    for seed in 0..10 {
        let s = split_nodes(&corpus, &SplitSpec { seed, ..SplitSpec::default() }).unwrap();
        let train: BTreeSet<_> = s.train.iter().collect();
        let val: BTreeSet<_> = s.validation.iter().collect();
        let test: BTreeSet<_> = s.test.iter().collect();
        assert!(train.is_disjoint(&val) && train.is_disjoint(&test) && val.is_disjoint(&test));
    }
}

fn blobs() -> Vec<NapAst> {
    let mut out = Vec::new();
    for i in 0..6 {
        out.push(separable_class(&format!("p.Small{i}"), 1, 1 + i % 2));
        out.push(separable_class(&format!("p.Large{i}"), 15, 15 + i % 2));
    }
    out
}

#[test]
fn blob_populations_form_two_clusters() {
    let corpus = blobs();
    let m = cluster_graphs(&corpus, &[1, 2, 3], 4).unwrap();
    assert_eq!(m.k, 2);
    let small = m.assignments["p.Small0"];
    for (id, a) in &m.assignments {
        assert_eq!(*a == small, id.starts_with("p.Small"), "{id}");
    }
    assert!(m.inertia_curve.windows(2).all(|w| w[1].1 <= w[0].1 + 1e-12));
    assert_eq!(m.assign(&corpus[0]), small);
    let back = ClusterModel::from_json(&m.to_json()).unwrap();
    assert_eq!(back, m);
    assert_eq!(cluster_graphs(&corpus, &[1, 2, 3], 4).unwrap(), m);
}

#[test]
fn single_k_puts_everything_together() {
    let m = cluster_graphs(&blobs(), &[1], 0).unwrap();
    assert_eq!(m.k, 1);
    assert!(m.assignments.values().all(|a| *a == 0));
}

#[test]
fn flat_curve_falls_back_to_five() {
    assert_eq!(elbow(&[(4, 1.0), (5, 1.0), (6, 1.0)]), None);
    assert_eq!(elbow(&[(1, 10.0), (2, 2.0), (3, 1.5)]), Some(1));
}

#[test]
fn identical_graphs_are_degenerate() {
    let corpus: Vec<_> = (0..4).map(|i| separable_class(&format!("p.C{i}"), 2, 2)).collect();
    assert!(matches!(cluster_graphs(&corpus, &[1, 2], 0), Err(Error::DegenerateFeatures)));
    assert!(matches!(cluster_graphs(&corpus[..1], &[1, 2], 0), Err(Error::Config(_))));
}
