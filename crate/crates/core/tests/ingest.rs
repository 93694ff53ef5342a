use qualinfer::ingest::*;

fn alias() -> AliasTable {
    AliasTable::default()
}

#[test]
fn minimal_unit() {
    let g = parse_class("class A {}", &alias()).unwrap();
    assert_eq!(g.nodes[0].kind, NodeKind::CompilationUnit);
    assert_eq!(g.nodes.iter().filter(|n| n.kind == NodeKind::ClassOrInterfaceDecl).count(), 1);
    assert_eq!(g.label_count, 0);
    assert_eq!(g.edge_count(EdgeKind::ParentChild), g.edge_count(EdgeKind::ChildParent));
    g.validate().unwrap();
}

#[test]
fn qualifier_becomes_label_and_disappears() {
    let src = "import javax.annotation.Nullable;\nclass A { @Nullable String f; String g; }";
    let g = parse_class(src, &alias()).unwrap();
    g.validate().unwrap();
    assert_eq!(g.label_count, 1);
    let labeled: Vec<_> = g.nodes.iter().filter(|n| n.label == Some(Label::Nullable)).collect();
    assert_eq!(labeled.len(), 1);
    assert_eq!(labeled[0].kind, NodeKind::VariableDeclarator);
    assert_eq!(labeled[0].name.as_deref(), Some("f"));
    assert_eq!(labeled[0].anchor.as_ref().unwrap().decl_signature, "A#f");
    assert!(g.nodes.iter().all(|n| !n.kind.is_annotation()));
    let other = g.nodes.iter().find(|n| n.name.as_deref() == Some("g")).unwrap();
    assert_eq!(other.label, Some(Label::NotNullable));
}

#[test]
fn unmatched_simple_name_is_not_a_qualifier() {
    let src = "import com.example.Nullable;\nclass A { @Nullable String f; }";
    let g = parse_class(src, &alias()).unwrap();
    assert_eq!(g.label_count, 0);
    assert!(g.nodes.iter().any(|n| n.kind == NodeKind::MarkerAnnotationExpr));
}

#[test]
fn modifiers_are_feature_metadata() {
    let g = parse_class("class A { public static int f; }", &alias()).unwrap();
    let field = g.nodes.iter().find(|n| n.kind == NodeKind::FieldDeclaration).unwrap();
    assert_eq!(field.modifiers.names(), vec!["public", "static"]);
    assert!(g.nodes.iter().all(|n| n.kind != NodeKind::Modifier));
    let decl = g.nodes.iter().find(|n| n.kind == NodeKind::VariableDeclarator).unwrap();
    assert_eq!(decl.label, None, "primitive fields are not label sites");
}

#[test]
fn signatures_cover_all_sites() {
    let src = r#"
package p.q;
import javax.annotation.Nullable;
import java.util.List;
class A {
    class Inner { @Nullable Object x; }
    @Nullable String get(List<String> xs, int n, String... rest) { return null; }
    A(@Nullable String s) {}
    void run() {
        Runnable r = () -> {};
        java.util.function.Function<String, String> f = s -> s;
        java.util.function.BiFunction<String, String, String> g = (String a, String b) -> a;
        try { } catch (RuntimeException e) { }
    }
}
"#;
    let unit = parse_unit("p/q/A.java", src, &alias()).unwrap();
    unit.graph.validate().unwrap();
    let sigs: Vec<(String, bool)> = unit
        .graph
        .nodes
        .iter()
        .filter_map(|n| n.label.map(|l| (n.anchor.clone().unwrap().decl_signature, l == Label::Nullable)))
        .collect();
    let expect = [
        ("p.q.A.Inner#x", true),
        ("p.q.A#get(List,int,String[])", true),
        ("p.q.A#get(List,int,String[])[0]", false),
        ("p.q.A#get(List,int,String[])[2]", false),
        ("p.q.A#<init>(String)[0]", true),
        ("p.q.A#run()$lambda1[0]", false),
        ("p.q.A#run()$lambda2[0]", false),
        ("p.q.A#run()$lambda2[1]", false),
    ];
    for (sig, nullable) in expect {
        assert!(
            sigs.contains(&(sig.to_string(), nullable)),
            "missing {sig} in {sigs:?}"
        );
    }
    assert_eq!(sigs.len(), expect.len(), "{sigs:?}");
    assert_eq!(unit.graph.label_count, 3);
    let untyped = unit.sites.iter().find(|s| s.signature == "p.q.A#run()$lambda1[0]").unwrap();
    assert!(!untyped.annotation_legal());
}

#[test]
fn syntax_error_reports_position() {
    match parse_class("class A { void m( }", &alias()) {
        Err(qualinfer::Error::Parse { line, .. }) => assert_eq!(line, 1),
        other => panic!("expected parse error, got {other:?}"),
    }
}

#[test]
fn erase_then_parse_matches_stripped_labels() {
    let src = "package p;\nimport javax.annotation.Nullable;\nclass A {\n  @Nullable String f;\n  @Nullable String m(@Nullable Object o) { return null; }\n}\n";
    let erased = erase_annotations(src, &alias()).unwrap();
    assert!(!erased.contains("Nullable"));
    let before = parse_class(src, &alias()).unwrap();
    let after = parse_class(&erased, &alias()).unwrap();
    assert_eq!(after.label_count, 0);
    assert_eq!(before.nodes.len(), after.nodes.len());
    for (a, b) in before.nodes.iter().zip(&after.nodes) {
        assert_eq!(a.kind, b.kind);
        assert_eq!(a.name, b.name);
        assert_eq!(a.label.map(|_| ()), b.label.map(|_| ()));
        assert_eq!(
            a.anchor.as_ref().map(|x| &x.decl_signature),
            b.anchor.as_ref().map(|x| &x.decl_signature)
        );
    }
    assert_eq!(before.edges, after.edges);
}

#[test]
fn scan_sorts_classes_into_included_and_excluded() {
    let dir = tempfile::tempdir().unwrap();
    let w = |name: &str, text: &str| std::fs::write(dir.path().join(name), text).unwrap();
    w(
        "A.java",
        "import javax.annotation.Nullable;\nclass A { @Nullable String f; void m() { f = null; } }",
    );
    w("B.java", "import javax.annotation.Nullable;\nclass B { String f; void m() { f = \"\"; } }");
    w("C.java", "class C { void m( }");
    let m = scan_corpus(dir.path(), &alias(), SizeBounds { min_nodes: 1, max_nodes: 1000 }).unwrap();
    assert_eq!(m.classes.len(), 1);
    assert_eq!(m.classes[0].nullable, vec!["A#f".to_string()]);
    let reasons: Vec<_> = m.excluded.iter().map(|e| e.reason).collect();
    assert_eq!(reasons, vec![ExclusionReason::NoLabels, ExclusionReason::ParseError]);

    let tight = scan_corpus(dir.path(), &alias(), SizeBounds { min_nodes: 1, max_nodes: 5 }).unwrap();
    assert!(tight.classes.is_empty());
    assert_eq!(tight.excluded[0].reason, ExclusionReason::TooLarge);
}
