use std::collections::{BTreeMap, BTreeSet};

use qualinfer::infer::{Prediction, PredictionSet};
use qualinfer::ingest::{erase_annotations, parse_unit, AliasTable};
use qualinfer::rewrite::*;
use qualinfer::Error;

const SRC: &str = "package p;\n\nimport java.util.List;\n\npublic class A {\n  String f;\n  int n;\n  List<String> xs;\n  String get(String k, int i) { return f; }\n}\n";

fn sources(files: &[(&str, &str)]) -> Sources {
    files.iter().map(|(p, s)| (p.to_string(), s.to_string())).collect()
}

/// Marks the named signatures of every file as decided.
fn decide(src: &Sources, sigs: &[&str]) -> PredictionSet {
    let alias = AliasTable::default();
    let mut entries = BTreeMap::new();
    for (path, text) in src {
        let unit = parse_unit(path, text, &alias).unwrap();
        for site in &unit.sites {
            let decided = sigs.contains(&site.signature.as_str());
            entries.insert(
                site.signature.clone(),
                Prediction {
                    class_id: unit.types[0].fqn.clone(),
                    anchor: qualinfer::ingest::SourceAnchor {
                        file_path: path.clone(),
                        byte_span: (site.decl_span.0 as u32, site.decl_span.1 as u32),
                        decl_signature: site.signature.clone(),
                    },
                    probability: if decided { 0.95 } else { 0.1 },
                    decided,
                    provenance: Vec::new(),
                    post_rules_applied: Vec::new(),
                },
            );
        }
    }
    PredictionSet::new(0.9, entries)
}

fn labels(src: &Sources) -> BTreeSet<String> {
    let alias = AliasTable::default();
    src.iter()
        .flat_map(|(p, t)| parse_unit(p, t, &alias).unwrap().sites)
        .filter(|s| s.labeled)
        .map(|s| s.signature)
        .collect()
}

#[test]
fn decided_field_gets_annotation_and_import() {
    let src = sources(&[("p/A.java", SRC)]);
    let plan = plan_edits(&decide(&src, &["p.A#f"]), &src, &AliasTable::default(), &RewriteConfig::default()).unwrap();
    let out = apply_edits(&plan, &src).unwrap();
    let text = &out["p/A.java"];
    assert!(text.contains("import java.util.List;\nimport javax.annotation.Nullable;\n"));
    assert!(text.contains("  @Nullable String f;"));
    assert_eq!(labels(&out), BTreeSet::from(["p.A#f".to_string()]));
}

#[test]
fn two_members_share_one_import() {
    let src = sources(&[("p/A.java", SRC)]);
    let plan = plan_edits(
        &decide(&src, &["p.A#f", "p.A#get(String,int)[0]"]),
        &src,
        &AliasTable::default(),
        &RewriteConfig::default(),
    )
    .unwrap();
    let out = apply_edits(&plan, &src).unwrap();
    assert_eq!(out["p/A.java"].matches("import javax.annotation.Nullable;").count(), 1);
    assert_eq!(labels(&out).len(), 2);
    let edits = &plan.files["p/A.java"];
    assert!(edits.insertions.windows(2).all(|w| w[0].offset >= w[1].offset));
}

#[test]
fn empty_prediction_set_gives_empty_plan() {
    let src = sources(&[("p/A.java", SRC)]);
    let plan = plan_edits(&decide(&src, &[]), &src, &AliasTable::default(), &RewriteConfig::default()).unwrap();
    assert!(plan.is_empty());
    assert_eq!(apply_edits(&plan, &src).unwrap(), src);
}

#[test]
fn apply_then_erase_matches_erased_original() {
    let annotated = "package p;\n\nimport javax.annotation.Nullable;\n\nclass B {\n  @Nullable Object o;\n  Object m(@Nullable Object a) { return a; }\n}\n";
    let alias = AliasTable::default();
    let erased = erase_annotations(annotated, &alias).unwrap();
    let src = sources(&[("p/B.java", &erased)]);
    let truth: Vec<String> = labels(&sources(&[("p/B.java", annotated)])).into_iter().collect();
    let truth: Vec<&str> = truth.iter().map(String::as_str).collect();
    let plan = plan_edits(&decide(&src, &truth), &src, &alias, &RewriteConfig::default()).unwrap();
    let out = apply_edits(&plan, &src).unwrap();
    assert_eq!(labels(&out), truth.iter().map(|s| s.to_string()).collect());
    assert_eq!(erase_annotations(&out["p/B.java"], &alias).unwrap(), erased);
}

#[test]
fn file_without_imports_or_package() {
    let src = sources(&[("A.java", "class A {\n  Object f;\n}\n")]);
    let plan = plan_edits(&decide(&src, &["A#f"]), &src, &AliasTable::default(), &RewriteConfig::default()).unwrap();
    let out = apply_edits(&plan, &src).unwrap();
    assert_eq!(out["A.java"], "import javax.annotation.Nullable;\nclass A {\n  @Nullable Object f;\n}\n");
}

#[test]
fn existing_import_and_name_clash() {
    let with_import = "package p;\nimport javax.annotation.*;\nclass A { Object f; }\n";
    let src = sources(&[("p/A.java", with_import)]);
    let plan = plan_edits(&decide(&src, &["p.A#f"]), &src, &AliasTable::default(), &RewriteConfig::default()).unwrap();
    assert_eq!(plan.files["p/A.java"].insertions.len(), 1);

    let clash = "package p;\nimport other.Nullable;\nclass A { Object f; }\n";
    let src = sources(&[("p/A.java", clash)]);
    let plan = plan_edits(&decide(&src, &["p.A#f"]), &src, &AliasTable::default(), &RewriteConfig::default()).unwrap();
    let out = apply_edits(&plan, &src).unwrap();
    assert!(out["p/A.java"].contains("@javax.annotation.Nullable Object f;"));
}

#[test]
fn second_apply_fails_hash_check() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("p")).unwrap();
    std::fs::write(dir.path().join("p/A.java"), SRC).unwrap();
    let src = read_sources(dir.path()).unwrap();
    let plan = plan_edits(&decide(&src, &["p.A#f"]), &src, &AliasTable::default(), &RewriteConfig::default()).unwrap();
    apply_edits_in_dir(&plan, dir.path()).unwrap();
    let once = std::fs::read_to_string(dir.path().join("p/A.java")).unwrap();
    assert!(matches!(apply_edits_in_dir(&plan, dir.path()), Err(Error::HashMismatch(_))));
    assert_eq!(std::fs::read_to_string(dir.path().join("p/A.java")).unwrap(), once);
}

#[test]
fn stale_and_illegal_anchors() {
    let src = sources(&[("p/A.java", SRC)]);
    let mut p = decide(&src, &["p.A#f"]);
    p.entries.get_mut("p.A#f").unwrap().anchor.byte_span.0 += 1;
    assert!(matches!(
        plan_edits(&p, &src, &AliasTable::default(), &RewriteConfig::default()),
        Err(Error::StaleAnchor(_))
    ));

    let multi = sources(&[("p/M.java", "package p;\nclass M { Object a, b; }\n")]);
    let p = decide(&multi, &["p.M#a"]);
    assert!(matches!(
        plan_edits(&p, &multi, &AliasTable::default(), &RewriteConfig::default()),
        Err(Error::IllegalPosition(_))
    ));
    let p = decide(&multi, &["p.M#a", "p.M#b"]);
    let out = apply_edits(&plan_edits(&p, &multi, &AliasTable::default(), &RewriteConfig::default()).unwrap(), &multi).unwrap();
    assert!(out["p/M.java"].contains("@Nullable Object a, b;"));

    let lambda = sources(&[(
        "p/L.java",
        "package p;\nimport java.util.function.Function;\nclass L { Function<Object, Object> m() { return x -> x; } }\n",
    )]);
    let sig = parse_unit("p/L.java", &lambda["p/L.java"], &AliasTable::default())
        .unwrap()
        .sites
        .into_iter()
        .find(|s| s.in_lambda)
        .unwrap()
        .signature;
    let p = decide(&lambda, &[&sig]);
    assert!(matches!(
        plan_edits(&p, &lambda, &AliasTable::default(), &RewriteConfig::default()),
        Err(Error::IllegalPosition(_))
    ));
}

#[test]
fn plan_json_and_dry_run() {
    let src = sources(&[("p/A.java", SRC)]);
    let plan = plan_edits(&decide(&src, &["p.A#xs"]), &src, &AliasTable::default(), &RewriteConfig::default()).unwrap();
    assert_eq!(EditPlan::from_json(&plan.to_json()).unwrap(), plan);
    let diff = dry_run_diff(&plan, &src).unwrap();
    assert!(diff.contains("+  @Nullable List<String> xs;"));
    assert!(diff.contains("-  List<String> xs;"));
}
