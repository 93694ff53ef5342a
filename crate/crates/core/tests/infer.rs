use std::collections::BTreeSet;

use proptest::prelude::*;
use qualinfer::infer::*;
use qualinfer::ingest::AliasTable;
use qualinfer::learn::{GcnConfig, ModelCheckpoint, ModelConfig};
use qualinfer::napast::{feature_dim, NapAst, PruneConfig};
use qualinfer::Error;

fn project(files: &[(&str, &str)]) -> (ProjectIndex, Vec<NapAst>) {
    let sources: Vec<(String, String)> = files.iter().map(|(p, s)| (p.to_string(), s.to_string())).collect();
    let index = ProjectIndex::build(&sources, &AliasTable::default());
    let naps = index.encode(&PruneConfig::default()).unwrap();
    (index, naps)
}

fn model(seed: u64) -> ModelBundle {
    let cfg = ModelConfig::Gcn(GcnConfig {
        hidden_dim: 8,
        seed,
        ..GcnConfig::default()
    });
    let params = cfg.init_params(feature_dim());
    let prune = PruneConfig::default();
    ModelBundle::single(ModelCheckpoint::new(cfg, &params, feature_dim(), &prune.digest(), prune.node_cap))
}

const A: &str = "package p;\npublic class A {\n  public Object f;\n  Object g;\n  Object getF() { return f; }\n}\n";
const B: &str = "package p;\npublic class B {\n  Object use(A a) { if (a.f == null) return null; return a.f; }\n}\n";
const C: &str = "package p;\npublic class C {\n  Object take(A a) { return a.f; }\n}\n";
const LONE: &str = "package q;\npublic class Lone {\n  Object x;\n}\n";

#[test]
fn single_class_uses_solo_scores() {
    let (index, naps) = project(&[("p/A.java", A)]);
    let m = model(1);
    let p = conjoined_predict(&naps, &index, &m, &ConjoinConfig::default()).unwrap();
    let solo = m.checkpoints[0].predict(&[&naps[0]]).unwrap().remove(0);
    assert_eq!(p.entries.len(), 3);
    for (id, a) in &naps[0].anchor_index {
        let e = &p.entries[&a.decl_signature];
        assert_eq!(e.provenance.len(), 1);
        assert_eq!(e.probability, solo[*id as usize]);
    }
}

#[test]
fn unrelated_classes_are_not_paired() {
    let (index, naps) = project(&[("p/A.java", A), ("q/Lone.java", LONE)]);
    assert!(index.shared_symbols().is_empty());
    let p = conjoined_predict(&naps, &index, &model(2), &ConjoinConfig::default()).unwrap();
    assert!(p.entries.values().all(|e| e.provenance.len() == 1 && e.probability == e.provenance[0].probability));
}

#[test]
fn field_use_links_resolve_across_classes() {
    let (index, _) = project(&[("p/A.java", A), ("p/B.java", B)]);
    let link = index
        .links()
        .iter()
        .find(|l| l.kind == LinkKind::FieldUse)
        .unwrap();
    assert_eq!(link.producer, "p.A#f");
    assert_eq!(link.consumer_class, "p.B");
    assert_eq!(link.consumer, "p.B#use(A)");
    let shared = index.shared_symbols();
    assert_eq!(shared[&("p.A".to_string(), "p.B".to_string())], BTreeSet::from(["f".to_string()]));
}

#[test]
fn pair_scores_are_averaged() {
    let (index, naps) = project(&[("p/A.java", A), ("p/B.java", B), ("p/C.java", C)]);
    let m = model(3);
    let p = conjoined_predict(&naps, &index, &m, &ConjoinConfig::default()).unwrap();
    let e = &p.entries["p.A#f"];
    assert_eq!(e.provenance.len(), 3);
    // independent recomputation of both joined graphs
    let shared = BTreeSet::from(["f".to_string()]);
    let mut raw = Vec::new();
    for other in [&naps[1], &naps[2]] {
        let j = join_graphs(&naps[0], other, &shared);
        let probs = m.checkpoints[0].predict(&[&j]).unwrap().remove(0);
        let (id, _) = j.anchor_index.iter().find(|(_, a)| a.decl_signature == "p.A#f").unwrap();
        raw.push(probs[*id as usize]);
    }
    assert!((e.probability - (raw[0] + raw[1]) / 2.0).abs() < 1e-15);
    // an element of A that appears in the pairs too
    assert_eq!(p.entries["p.A#g"].provenance.len(), 3);

    let mut shuffled = naps.clone();
    shuffled.reverse();
    let q = conjoined_predict(&shuffled, &index, &m, &ConjoinConfig::default()).unwrap();
    assert_eq!(p, q);
}

#[test]
fn joined_graph_links_name_layers() {
    let plain = "package p;\npublic class A {\n  public Object f;\n}\n";
    let (_, naps) = project(&[("p/A.java", plain), ("p/B.java", B)]);
    let shared = BTreeSet::from(["f".to_string()]);
    let j = join_graphs(&naps[0], &naps[1], &shared);
    j.validate().unwrap();
    assert_eq!(j.len(), naps[0].len() + naps[1].len());
    let cross = j
        .edges(qualinfer::ingest::EdgeKind::NameUse)
        .iter()
        .filter(|(s, d)| ((*s as usize) < naps[0].len()) != ((*d as usize) < naps[0].len()))
        .count();
    assert!(cross > 0);
}

#[test]
fn mean_of_point_eight_and_one_is_point_nine() {
    let (index, naps) = project(&[("p/A.java", A)]);
    let mut p = conjoined_predict(&naps, &index, &model(4), &ConjoinConfig::default()).unwrap();
    let e = p.entries.get_mut("p.A#f").unwrap();
    e.provenance = vec![
        Provenance { pair: Some(("p.A".into(), "p.B".into())), probability: 0.8 },
        Provenance { pair: Some(("p.A".into(), "p.C".into())), probability: 1.0 },
    ];
    let mean: f64 = e.provenance.iter().map(|x| x.probability).sum::<f64>() / 2.0;
    assert!((mean - 0.9).abs() < 1e-15);
}

fn set_with(probs: &[(&str, f64)]) -> PredictionSet {
    let (index, naps) = project(&[("p/A.java", A)]);
    let mut p = conjoined_predict(&naps, &index, &model(5), &ConjoinConfig::default()).unwrap();
    for (s, v) in probs {
        p.entries.get_mut(*s).unwrap().probability = *v;
    }
    p
}

#[test]
fn threshold_is_inclusive() {
    let p = set_with(&[("p.A#f", 0.9), ("p.A#g", 0.89), ("p.A#getF()", 0.1)]);
    let t = apply_threshold(p.clone(), 0.9);
    assert!(t.is_decided("p.A#f") && !t.is_decided("p.A#g"));
    assert_eq!(apply_threshold(t.clone(), 0.9), t);
    assert_eq!(apply_threshold(p, 0.0).decided().len(), 3);
}

proptest! {
    #[test]
    fn threshold_is_monotone(a in 0.0f64..1.0, b in 0.0f64..1.0, f in 0.0f64..1.0, g in 0.0f64..1.0) {
        let p = set_with(&[("p.A#f", f), ("p.A#g", g)]);
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let high = apply_threshold(p.clone(), hi).decided();
        let low = apply_threshold(p, lo).decided();
        prop_assert!(high.is_subset(&low));
    }
}

fn decide(index: &ProjectIndex, naps: &[NapAst], sigs: &[&str]) -> PredictionSet {
    let p = conjoined_predict(naps, index, &model(6), &ConjoinConfig::default()).unwrap();
    let mut p = apply_threshold(p, 2.0);
    for s in sigs {
        p.entries.get_mut(*s).unwrap_or_else(|| panic!("{s}")).decided = true;
    }
    p
}

const RULES: &str = r#"package p;
import java.util.List;
public class R {
  Object f;
  Object g;
  Object getF() { return f; }
  Object getG() { return this.g; }
  void sink(Object o) {}
  void sink2(Object o) {}
  void pass() { sink(this.f); sink2(getF()); }
  void lambdas(List<Object> xs) { xs.forEach(x -> sink(x)); xs.forEach((Object y) -> sink(y)); }
}
"#;

#[test]
fn r1_and_r2_add_decisions() {
    let (index, naps) = project(&[("p/R.java", RULES)]);
    let p = postprocess(decide(&index, &naps, &["p.R#f"]), &index).unwrap();
    assert!(p.is_decided("p.R#getF()"));
    assert_eq!(p.entries["p.R#getF()"].post_rules_applied, vec!["R1"]);
    assert!(p.is_decided("p.R#sink(Object)[0]"));
    assert_eq!(p.entries["p.R#sink(Object)[0]"].post_rules_applied, vec!["R2"]);
    // a getter result passed along does not trigger R2
    assert!(!p.is_decided("p.R#sink2(Object)[0]"));
    assert!(!p.is_decided("p.R#getG()"));
}

#[test]
fn r3_removes_untyped_lambda_parameters() {
    let (index, naps) = project(&[("p/R.java", RULES)]);
    let untyped = "p.R#lambdas(List)$lambda0[0]";
    let typed = "p.R#lambdas(List)$lambda1[0]";
    let p = postprocess(decide(&index, &naps, &[untyped, typed]), &index).unwrap();
    assert!(!p.is_decided(untyped));
    assert_eq!(p.entries[untyped].post_rules_applied, vec!["R3"]);
    assert!(p.is_decided(typed));
}

const SUPER: &str = "package p;\npublic class Base {\n  Object get() { return null; }\n  void put(Object o) {}\n}\n";
const SUB: &str = "package p;\npublic class Sub extends Base {\n  Object get() { return new Object(); }\n  void put(Object o) {}\n}\n";

#[test]
fn r4_removes_unmatched_supertype_decisions() {
    let (index, naps) = project(&[("p/Base.java", SUPER), ("p/Sub.java", SUB)]);
    assert!(index.links().iter().any(|l| l.kind == LinkKind::Override && l.producer == "p.Base#get()"));
    let p = postprocess(decide(&index, &naps, &["p.Base#get()", "p.Base#put(Object)[0]", "p.Sub#put(Object)[0]"]), &index).unwrap();
    assert!(!p.is_decided("p.Base#get()"));
    assert_eq!(p.entries["p.Base#get()"].post_rules_applied, vec!["R4"]);
    assert!(p.is_decided("p.Base#put(Object)[0]"));
}

#[test]
fn empty_set_is_a_fixpoint() {
    let (index, _) = project(&[("p/R.java", RULES)]);
    let empty = PredictionSet::new(0.9, Default::default());
    assert_eq!(postprocess(empty.clone(), &index).unwrap(), empty);
}

#[test]
fn prediction_set_serializes_sorted() {
    let (index, naps) = project(&[("p/R.java", RULES)]);
    let p = postprocess(decide(&index, &naps, &["p.R#f"]), &index).unwrap();
    assert_eq!(PredictionSet::from_json(&p.to_json()).unwrap(), p);
    let csv = p.to_csv();
    let sigs: Vec<&str> = csv.lines().skip(1).map(|l| l.split("\",").next().unwrap()).collect();
    let mut sorted = sigs.clone();
    sorted.sort();
    assert_eq!(sigs, sorted);
    assert!(csv.contains("\"p.R#getF()\","));
}

#[test]
fn missing_cluster_model_is_reported() {
    let (index, naps) = project(&[("p/A.java", A), ("q/Lone.java", LONE)]);
    let mut m = model(7);
    m.clusters = Some(qualinfer::tune::cluster_graphs(&naps, &[1], 0).unwrap());
    let err = conjoined_predict(&naps, &index, &m, &ConjoinConfig::default()).unwrap_err();
    assert!(matches!(err, Error::MissingModel(0)));
    m.checkpoints[0].cluster_id = Some(0);
    assert!(conjoined_predict(&naps, &index, &m, &ConjoinConfig::default()).is_ok());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]
    #[test]
    fn postprocess_is_idempotent_and_monotone(mask in prop::collection::vec(any::<bool>(), 32)) {
        let (index, naps) = project(&[("p/R.java", RULES), ("p/Base.java", SUPER), ("p/Sub.java", SUB)]);
        let mut p = decide(&index, &naps, &[]);
        for (e, m) in p.entries.values_mut().zip(mask.iter().cycle()) {
            e.decided = *m;
        }
        let before = p.decided();
        let once = postprocess(p, &index).unwrap();
        let twice = postprocess(once.clone(), &index).unwrap();
        prop_assert_eq!(&once, &twice);
        for (s, e) in &once.entries {
            let was = before.contains(s);
            if e.post_rules_applied.iter().any(|t| t == "R1" || t == "R2") {
                prop_assert!(!was);
            }
            if !e.post_rules_applied.iter().any(|t| t == "R3" || t == "R4") && was {
                prop_assert!(e.decided);
            }
        }
    }
}

