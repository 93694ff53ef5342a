use std::collections::BTreeMap;

use qualinfer::eval::*;
use qualinfer::infer::{predict_project, ConjoinConfig, ModelBundle, Prediction, PredictionSet, ProjectIndex};
use qualinfer::ingest::{parse_unit, AliasTable, SourceAnchor};
use qualinfer::learn::{train, GcnConfig, ModelConfig, SplitSpec};
use qualinfer::napast::PruneConfig;
use qualinfer::rewrite::erase_sources;
use qualinfer::Error;

fn decided(sigs: &[&str]) -> PredictionSet {
    let entries = sigs
        .iter()
        .map(|s| {
            (
                s.to_string(),
                Prediction {
                    class_id: "p.A".into(),
                    anchor: SourceAnchor {
                        file_path: "p/A.java".into(),
                        byte_span: (0, 1),
                        decl_signature: s.to_string(),
                    },
                    probability: 1.0,
                    decided: true,
                    provenance: Vec::new(),
                    post_rules_applied: Vec::new(),
                },
            )
        })
        .collect();
    PredictionSet::new(0.9, entries)
}

fn strings(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

#[test]
fn scoring_by_definition() {
    let r = score_predictions("x", &decided(&["p.A#a", "p.A#b"]), &strings(&["p.A#a", "p.A#b"])).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (1.0, 1.0, 1.0));
    let r = score_predictions("x", &decided(&["p.A#a", "p.A#b"]), &strings(&["p.A#b", "p.A#c"])).unwrap();
    assert_eq!((r.tp, r.fp, r.fn_), (1, 1, 1));
    assert_eq!((r.precision, r.recall, r.f1), (0.5, 0.5, 0.5));
    let r = score_predictions("x", &decided(&[]), &[]).unwrap();
    assert_eq!((r.precision, r.recall, r.f1), (0.0, 0.0, 0.0));
    assert!(matches!(
        score_predictions("x", &decided(&["p.A#a"]), &strings(&["A.a"])),
        Err(Error::SignatureMismatch(_))
    ));
    assert!(score_predictions("x", &decided(&["p.A#m(List,int)[1]", "p.A#m()$lambda0[0]"]), &[]).is_ok());
}

#[test]
fn totals_are_micro_averaged_and_order_free() {
    let a = ProjectReport::from_counts("a", 9, 1, 0).with_warnings(100, 40);
    let b = ProjectReport::from_counts("b", 1, 9, 10).with_warnings(0, 0);
    let r = EvalReport::new(vec![a.clone(), b.clone()]);
    assert_eq!((r.total.tp, r.total.fp, r.total.fn_), (10, 10, 10));
    assert_eq!(r.total.precision, 0.5);
    assert_eq!(r.total.reduction_pct, Some(60.0));
    assert_eq!(r.projects[1].reduction_pct, None);
    assert_eq!(EvalReport::new(vec![b, a]).to_json(), r.to_json());
    assert_eq!(EvalReport::from_json(&r.to_json()).unwrap(), r);
    let csv = r.to_csv();
    assert!(csv.contains("\nb,1,9,10,.1,.09,.1,0,0,-\n"), "{csv}");
    assert!(csv.ends_with("total,10,10,10,.5,.5,.5,100,40,60%\n"), "{csv}");
}

#[test]
fn short_ratios_match_table_style() {
    assert_eq!(short_ratio(0.6), ".6");
    assert_eq!(short_ratio(0.89), ".89");
    assert_eq!(short_ratio(1.0), "1");
    assert_eq!(short_ratio(0.0), "0");
    assert_eq!(reduction_pct(100, 40), Some(60.0));
    assert_eq!(reduction_pct(0, 5), None);
}

fn command(cmd: &str, pattern: &str) -> Checker {
    Checker::Command(CheckerConfig {
        checker_cmd: cmd.into(),
        warning_pattern: pattern.into(),
        timeout_seconds: 10,
    })
}

#[test]
fn external_checker_commands() {
    let dir = tempfile::tempdir().unwrap();
    let alias = AliasTable::default();
    let canned = command("printf 'W: one\\nnote\\nW: two\\nW: three\\n'", "^W:");
    assert_eq!(count_warnings(dir.path(), &canned, &alias).unwrap(), 3);
    assert_eq!(count_warnings(dir.path(), &command("true", "^W:"), &alias).unwrap(), 0);
    let echo_dir = command("test -d {project_dir} && echo 'W: found'", "^W:");
    assert_eq!(count_warnings(dir.path(), &echo_dir, &alias).unwrap(), 1);
    assert!(matches!(
        count_warnings(dir.path(), &command("exit 3", "^W:"), &alias),
        Err(Error::CheckerFailed(_))
    ));
    assert!(matches!(
        count_warnings(dir.path(), &command("no-such-checker-binary", "^W:"), &alias),
        Err(Error::MissingChecker(_))
    ));
    assert!(matches!(
        count_warnings(dir.path(), &command("", "^W:"), &alias),
        Err(Error::MissingChecker(_))
    ));
    let slow = Checker::Command(CheckerConfig {
        checker_cmd: "sleep 5".into(),
        warning_pattern: "x".into(),
        timeout_seconds: 0,
    });
    assert!(matches!(count_warnings(dir.path(), &slow, &alias), Err(Error::CheckerFailed(_))));
}

#[test]
fn stub_checker_rules() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("p")).unwrap();
    let src = "package p;\nimport javax.annotation.Nullable;\nclass A {\n  String a = null;\n  @Nullable String b = null;\n  String c;\n  String m(@Nullable String x, String y) {\n    c = null;\n    x.trim();\n    return null;\n  }\n  void n(@Nullable String z) {\n    if (z != null) { z.trim(); }\n    m(null, null);\n  }\n}\n";
    std::fs::write(dir.path().join("p/A.java"), src).unwrap();
    let w = stub_warnings(dir.path(), &AliasTable::default()).unwrap();
    let lines: Vec<&str> = w.iter().map(|l| l.split(": warning").next().unwrap()).collect();
    assert_eq!(lines, ["p/A.java:10", "p/A.java:14", "p/A.java:4", "p/A.java:8", "p/A.java:9"], "{w:#?}");
    assert!(w.iter().any(|l| l.contains("dereferenced expression x")));
    assert!(w.iter().any(|l| l.contains("non-null parameter y")));
    assert_eq!(count_warnings(dir.path(), &Checker::Stub, &AliasTable::default()).unwrap(), 5);
}

#[test]
fn generator_single_pattern_truth() {
    let g = generate_corpus(&GeneratorSpec::only(Pattern::FieldNull, 40, 3)).unwrap();
    let alias = AliasTable::default();
    for c in &g.classes {
        assert_eq!(c.pattern, Pattern::FieldNull);
        let unit = parse_unit(&c.file_path, &g.sources[&c.file_path], &alias).unwrap();
        let mut fields: Vec<String> = unit.types[0]
            .fields
            .iter()
            .filter(|f| c.nullable.contains(&f.signature))
            .map(|f| f.signature.clone())
            .collect();
        fields.sort();
        assert!(!c.nullable.is_empty());
        assert_eq!(fields, c.nullable);
    }
}

#[test]
fn generator_is_deterministic_and_agrees_with_ingest() {
    let spec = GeneratorSpec::new(120, 9);
    let a = generate_corpus(&spec).unwrap();
    let b = generate_corpus(&spec).unwrap();
    assert_eq!(a.sources, b.sources);
    assert_eq!(a.manifest.to_json(), b.manifest.to_json());
    assert!(a.manifest.excluded.iter().all(|e| e.class_id.is_some()), "every file parses");
    let scanned: BTreeMap<&str, &Vec<String>> =
        a.manifest.classes.iter().map(|c| (c.class_id.as_str(), &c.nullable)).collect();
    for c in &a.classes {
        let found = scanned.get(c.class_id.as_str()).map_or(&[][..], |v| v.as_slice());
        assert_eq!(found, c.nullable.as_slice(), "{}", c.class_id);
    }
    assert_eq!(a.manifest.truth(), a.truth());
    assert_ne!(generate_corpus(&GeneratorSpec::new(120, 10)).unwrap().sources, a.sources);
}

#[test]
fn generator_mix_tracks_weights() {
    let spec = GeneratorSpec::new(1000, 4);
    let g = generate_corpus(&spec).unwrap();
    let freq = pattern_frequencies(&g.classes);
    let total: f64 = spec.weights.values().sum();
    for (p, w) in &spec.weights {
        assert!((freq.get(p).copied().unwrap_or(0.0) - w / total).abs() <= 0.02, "{p:?}");
    }
}

#[test]
fn generator_spec_validation() {
    let mut spec = GeneratorSpec::new(10, 1);
    spec.weights.insert(Pattern::Plain, -1.0);
    assert!(spec.validate().is_err());
    let spec = GeneratorSpec {
        weights: [(Pattern::Plain, 0.0)].into(),
        ..GeneratorSpec::new(10, 1)
    };
    assert!(spec.validate().is_err());
    let spec = GeneratorSpec::new(10, 1);
    assert_eq!(GeneratorSpec::from_json(&spec.to_json()).unwrap(), spec);
}

#[test]
fn fraction_samples_are_nested() {
    let g = generate_corpus(&GeneratorSpec::new(60, 5)).unwrap();
    let sources: Vec<(String, String)> = g.sources.into_iter().collect();
    let corpus = ProjectIndex::build(&sources, &AliasTable::default()).encode(&PruneConfig::default()).unwrap();
    let small = sample_fraction(&corpus, 0.2, 1);
    let large = sample_fraction(&corpus, 0.5, 1);
    assert_eq!(small.len(), (0.2 * corpus.len() as f64).round() as usize);
    assert!(small.iter().all(|i| large.contains(i)));
    assert_eq!(sample_fraction(&corpus, 1.0, 1).len(), corpus.len());
}

#[test]
fn full_fraction_equals_plain_run() {
    let alias = AliasTable::default();
    let prune = PruneConfig::default();
    let g = generate_corpus(&GeneratorSpec::new(60, 6)).unwrap();
    let sources: Vec<(String, String)> = g.sources.into_iter().collect();
    let corpus = ProjectIndex::build(&sources, &alias).encode(&prune).unwrap();
    let held = generate_corpus(&GeneratorSpec {
        package_prefix: "held".into(),
        ..GeneratorSpec::new(20, 7)
    })
    .unwrap();
    let erased = erase_sources(&held.sources, &alias);
    let index = ProjectIndex::build(&erased.clone().into_iter().collect::<Vec<_>>(), &alias);
    let truth = held.truth();
    let model = ModelConfig::Gcn(GcnConfig {
        hidden_dim: 8,
        passes: 2,
        epochs_per_batch: 3,
        seed: 2,
        ..GcnConfig::default()
    });
    let split = SplitSpec { seed: 3, ..SplitSpec::default() };
    let setup = StudySetup {
        corpus: &corpus,
        model: model.clone(),
        split: split.clone(),
        prune: prune.clone(),
        tau: 0.9,
        conjoin: ConjoinConfig::default(),
        eval_index: &index,
        eval_truth: &truth,
        eval_sources: Some(&erased),
        checker: Some(Checker::Stub),
        alias: alias.clone(),
        seed: 4,
    };
    assert!(matches!(data_fraction_study(&setup, &[0.0]), Err(Error::Config(_))));
    let rows = data_fraction_study(&setup, &[1.0]).unwrap();
    let (ckpt, _) = train(&corpus, &split, &model, prune.node_cap).unwrap();
    let p = predict_project(&index, &prune, &ModelBundle::single(ckpt), 0.9, &ConjoinConfig::default()).unwrap();
    let plain = score_predictions("study", &p, &truth).unwrap();
    assert_eq!(rows[0].f1, plain.f1);
    assert_eq!(rows[0].classes, corpus.len());
    assert_eq!(rows[0].warnings, Some(warnings_after(&erased, &p, &Checker::Stub, &alias).unwrap()));
    assert!(study_csv(&rows).starts_with("fraction,classes,precision,recall,f1,warnings\n1,"));
}
