//! Java front end: tree-sitter concrete syntax tree to typed graph.
//!
//! One walk over the syntax tree produces the [`RawGraph`], the list of
//! label-eligible declaration sites (used by the rewriter), every qualifier
//! annotation span (used by erasure) and per-type declaration facts (used to
//! build the project symbol index).

use std::cell::RefCell;

use tree_sitter::{Node, Parser, Tree};

use super::alias::{AliasTable, Imports};
use super::graph::{Label, Modifiers, RawGraph, RawNode, SourceAnchor};
use super::NodeKind;
use crate::error::{Error, Result};

/// Language level the front end is pinned to. Constructs introduced after
/// this level are mapped to [`NodeKind::Other`] with a warning.
pub const JAVA_LEVEL: u32 = 11;

const PRIMITIVES: &[&str] = &[
    "boolean", "byte", "short", "int", "long", "char", "float", "double",
];

pub fn is_primitive(ty: &str) -> bool {
    PRIMITIVES.contains(&ty)
}

thread_local! {
    static PARSER: RefCell<Option<Parser>> = const { RefCell::new(None) };
}

/// Parses Java source into a tree-sitter tree, reusing a per-thread parser.
pub fn parse_tree(text: &str) -> Result<Tree> {
    PARSER.with(|cell| {
        let mut slot = cell.borrow_mut();
        if slot.is_none() {
            let mut parser = Parser::new();
            parser
                .set_language(&tree_sitter_java::LANGUAGE.into())
                .map_err(|e| Error::Config(format!("java grammar: {e}")))?;
            *slot = Some(parser);
        }
        let parser = slot.as_mut().expect("initialized above");
        let tree = parser.parse(text, None).ok_or_else(|| Error::Parse {
            line: 1,
            column: 1,
            message: "parser produced no tree".into(),
        })?;
        if tree.root_node().has_error() {
            let bad = first_error(tree.root_node()).unwrap_or(tree.root_node());
            let pos = bad.start_position();
            let message = if bad.is_missing() {
                format!("missing {}", bad.kind())
            } else {
                "unexpected syntax".to_string()
            };
            return Err(Error::Parse {
                line: pos.row + 1,
                column: pos.column + 1,
                message,
            });
        }
        Ok(tree)
    })
}

fn first_error(node: Node<'_>) -> Option<Node<'_>> {
    if node.is_error() || node.is_missing() {
        return Some(node);
    }
    let mut cur = node.walk();
    for child in node.children(&mut cur) {
        if child.has_error() {
            if let Some(found) = first_error(child) {
                return Some(found);
            }
        }
    }
    None
}

/// Which kind of declaration a label-eligible site is.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
pub enum SiteKind {
    Field,
    Return,
    Parameter,
}

/// A declaration that can carry a qualifier annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DeclSite {
    pub signature: String,
    pub kind: SiteKind,
    pub decl_span: (usize, usize),
    /// Span of the written type; `None` for untyped lambda parameters, where
    /// no annotation can be written.
    pub type_span: Option<(usize, usize)>,
    pub in_lambda: bool,
    pub labeled: bool,
}

impl DeclSite {
    pub fn annotation_legal(&self) -> bool {
        self.type_span.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImportDecl {
    pub span: (usize, usize),
    pub path: String,
    pub is_static: bool,
    pub on_demand: bool,
}

/// Simplified view of an expression, enough for the consistency rules.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Expr {
    Null,
    Name(String),
    ThisField(String),
    /// `recv.member` where `recv` is a simple name.
    Qualified(String, String),
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Receiver {
    Implicit,
    This,
    Super,
    Name(String),
    Other,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CallFact {
    pub receiver: Receiver,
    pub name: String,
    pub args: Vec<Expr>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamFact {
    pub name: String,
    pub ty: Option<String>,
    pub signature: String,
    pub eligible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct MethodFact {
    pub name: String,
    pub signature: String,
    pub is_ctor: bool,
    pub return_type: Option<String>,
    pub return_eligible: bool,
    pub is_static: bool,
    pub has_body: bool,
    pub line: usize,
    pub params: Vec<ParamFact>,
    pub locals: Vec<(String, String)>,
    pub returns: Vec<(Expr, usize)>,
    pub calls: Vec<CallFact>,
    pub field_refs: Vec<(Receiver, String, usize)>,
    pub assigns: Vec<(Expr, Expr, usize)>,
    pub null_checks: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldFact {
    pub name: String,
    pub ty: String,
    pub signature: String,
    pub eligible: bool,
    pub is_static: bool,
    pub init: Option<Expr>,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypeFacts {
    pub fqn: String,
    pub name: String,
    pub is_interface: bool,
    pub supertypes: Vec<String>,
    pub fields: Vec<FieldFact>,
    pub methods: Vec<MethodFact>,
    /// (signature, typed) for every lambda parameter declared in the type.
    pub lambda_params: Vec<(String, bool)>,
}

/// Everything extracted from one compilation unit.
#[derive(Debug, Clone)]
pub struct ParsedUnit {
    pub graph: RawGraph,
    pub package: Option<String>,
    pub package_span: Option<(usize, usize)>,
    pub imports: Imports,
    pub import_decls: Vec<ImportDecl>,
    pub qualifier_spans: Vec<(usize, usize)>,
    pub sites: Vec<DeclSite>,
    pub types: Vec<TypeFacts>,
    pub warnings: Vec<String>,
}

/// Parses one compilation unit.
pub fn parse_unit(path: &str, text: &str, alias: &AliasTable) -> Result<ParsedUnit> {
    let tree = parse_tree(text)?;
    let root = tree.root_node();
    let mut b = Builder::new(path, text, alias);
    b.collect_header(root)?;
    let cu = b.add(NodeKind::CompilationUnit, None, root);
    b.visit_children(root, cu, &[]);
    b.finish()
}

struct MemberCtx {
    signature: String,
    lambdas: u32,
}

struct Builder<'a> {
    src: &'a str,
    path: &'a str,
    alias: &'a AliasTable,
    package: Option<String>,
    package_span: Option<(usize, usize)>,
    imports: Imports,
    import_decls: Vec<ImportDecl>,
    nodes: Vec<RawNode>,
    parent_child: Vec<(u32, u32)>,
    qualifier_spans: Vec<(usize, usize)>,
    sites: Vec<DeclSite>,
    done_types: Vec<TypeFacts>,
    type_stack: Vec<TypeFacts>,
    method_stack: Vec<MethodFact>,
    members: Vec<MemberCtx>,
    anon_count: u32,
    top_level: Vec<(String, bool)>,
    warnings: Vec<String>,
}

fn named_children<'t>(n: Node<'t>) -> Vec<(Option<&'static str>, Node<'t>)> {
    let mut cur = n.walk();
    let mut out = Vec::new();
    if cur.goto_first_child() {
        loop {
            let node = cur.node();
            if node.is_named() {
                out.push((cur.field_name(), node));
            }
            if !cur.goto_next_sibling() {
                break;
            }
        }
    }
    out
}

fn fields<'t>(n: Node<'t>, field: &str) -> Vec<Node<'t>> {
    named_children(n)
        .into_iter()
        .filter(|(f, _)| *f == Some(field))
        .map(|(_, c)| c)
        .collect()
}

fn span(n: Node<'_>) -> (usize, usize) {
    (n.start_byte(), n.end_byte())
}

fn is_statement_context(kind: &str) -> bool {
    matches!(
        kind,
        "block" | "constructor_body" | "switch_block_statement_group" | "switch_rule" | "program"
    )
}

impl<'a> Builder<'a> {
    fn new(path: &'a str, src: &'a str, alias: &'a AliasTable) -> Self {
        Builder {
            src,
            path,
            alias,
            package: None,
            package_span: None,
            imports: Imports::default(),
            import_decls: Vec::new(),
            nodes: Vec::new(),
            parent_child: Vec::new(),
            qualifier_spans: Vec::new(),
            sites: Vec::new(),
            done_types: Vec::new(),
            type_stack: Vec::new(),
            method_stack: Vec::new(),
            members: Vec::new(),
            anon_count: 0,
            top_level: Vec::new(),
            warnings: Vec::new(),
        }
    }

    fn text(&self, n: Node<'_>) -> &'a str {
        &self.src[n.byte_range()]
    }

    fn warn(&mut self, n: Node<'_>, what: &str) {
        let msg = format!(
            "{}:{}: {what} is newer than Java {JAVA_LEVEL}; encoded as Other",
            self.path,
            n.start_position().row + 1
        );
        log::warn!("{msg}");
        self.warnings.push(msg);
    }

    fn collect_header(&mut self, root: Node<'_>) -> Result<()> {
        for (_, child) in named_children(root) {
            match child.kind() {
                "package_declaration" => {
                    let name = named_children(child)
                        .into_iter()
                        .map(|(_, c)| c)
                        .find(|c| matches!(c.kind(), "scoped_identifier" | "identifier"))
                        .map(|c| self.text(c).split_whitespace().collect::<String>());
                    self.package = name;
                    self.package_span = Some(span(child));
                }
                "import_declaration" => {
                    let text = self.text(child);
                    let is_static = text.trim_start_matches("import").trim_start().starts_with("static");
                    let on_demand = named_children(child).iter().any(|(_, c)| c.kind() == "asterisk");
                    let path = named_children(child)
                        .into_iter()
                        .map(|(_, c)| c)
                        .find(|c| matches!(c.kind(), "scoped_identifier" | "identifier"))
                        .map(|c| self.text(c).split_whitespace().collect::<String>())
                        .unwrap_or_default();
                    if !is_static {
                        if on_demand {
                            self.imports.on_demand.push(path.clone());
                        } else {
                            self.imports.single.push(path.clone());
                        }
                    }
                    self.import_decls.push(ImportDecl {
                        span: span(child),
                        path,
                        is_static,
                        on_demand,
                    });
                }
                "module_declaration" => {
                    return Err(Error::UnsupportedConstruct(format!(
                        "{}: module declarations are not classes",
                        self.path
                    )))
                }
                "class_declaration" | "interface_declaration" | "enum_declaration"
                | "annotation_type_declaration" | "record_declaration" => {
                    let name = child
                        .child_by_field_name("name")
                        .map(|n| self.text(n).to_string())
                        .unwrap_or_default();
                    let public = self.modifier_node(child).is_some_and(|m| {
                        named_children(m).is_empty() && self.text(m).contains("public")
                            || self.text(m).split_whitespace().any(|w| w == "public")
                    });
                    self.top_level.push((name, public));
                }
                _ => {}
            }
        }
        if self.top_level.is_empty() {
            return Err(Error::UnsupportedConstruct(format!(
                "{}: no type declaration in compilation unit",
                self.path
            )));
        }
        Ok(())
    }

    fn qualify(&self, simple: &str) -> String {
        match &self.package {
            Some(p) if !p.is_empty() => format!("{p}.{simple}"),
            _ => simple.to_string(),
        }
    }

    fn current_type(&self) -> String {
        self.type_stack
            .last()
            .map(|t| t.fqn.clone())
            .unwrap_or_else(|| self.qualify("<unit>"))
    }

    fn add(&mut self, kind: NodeKind, parent: Option<u32>, _n: Node<'_>) -> u32 {
        let id = self.nodes.len() as u32;
        self.nodes.push(RawNode::new(id, kind));
        if let Some(p) = parent {
            self.parent_child.push((p, id));
        }
        id
    }

    fn add_named(&mut self, kind: NodeKind, parent: u32, n: Node<'_>, name: &str) -> u32 {
        let id = self.add(kind, Some(parent), n);
        self.nodes[id as usize].name = Some(name.to_string());
        id
    }

    fn modifier_node<'t>(&self, decl: Node<'t>) -> Option<Node<'t>> {
        named_children(decl)
            .into_iter()
            .map(|(_, c)| c)
            .find(|c| c.kind() == "modifiers")
    }

    /// Modifier keywords plus the annotation nodes found among them.
    fn modifiers<'t>(&self, decl: Node<'t>) -> (Modifiers, Vec<Node<'t>>) {
        let mut mods = Modifiers::empty();
        let mut anns = Vec::new();
        if let Some(m) = self.modifier_node(decl) {
            let mut cur = m.walk();
            for child in m.children(&mut cur) {
                if matches!(child.kind(), "marker_annotation" | "annotation") {
                    anns.push(child);
                } else if let Some(bit) = Modifiers::from_keyword(self.text(child)) {
                    mods.insert_bit(bit);
                }
            }
        }
        (mods, anns)
    }

    fn is_qualifier(&self, ann: Node<'_>) -> bool {
        ann.child_by_field_name("name")
            .map(|n| {
                let name: String = self.text(n).split_whitespace().collect();
                self.alias.matches(&name, &self.imports)
            })
            .unwrap_or(false)
    }

    /// Visits annotations; returns whether any was a nullness qualifier.
    fn visit_annotations(&mut self, anns: &[Node<'_>], parent: u32) -> bool {
        let mut qualified = false;
        for ann in anns {
            if self.is_qualifier(*ann) {
                self.qualifier_spans.push(span(*ann));
                qualified = true;
            } else {
                self.visit_annotation(*ann, parent);
            }
        }
        qualified
    }

    fn visit_annotation(&mut self, ann: Node<'_>, parent: u32) {
        if self.is_qualifier(ann) {
            self.qualifier_spans.push(span(ann));
            return;
        }
        let kind = if ann.kind() == "marker_annotation" {
            NodeKind::MarkerAnnotationExpr
        } else {
            let args = ann.child_by_field_name("arguments");
            match args.map(named_children) {
                Some(items) if items.len() == 1 && items[0].1.kind() != "element_value_pair" => {
                    NodeKind::SingleMemAnnoExpr
                }
                _ => NodeKind::NormalAnnotationExpr,
            }
        };
        let id = self.add(kind, Some(parent), ann);
        if let Some(args) = ann.child_by_field_name("arguments") {
            self.visit_children(args, id, &[]);
        }
    }

    /// Erased spelling of a type: generics dropped, qualification dropped,
    /// array dimensions kept.
    fn erased(&self, ty: Node<'_>) -> String {
        match ty.kind() {
            "scoped_type_identifier" => named_children(ty)
                .last()
                .map(|(_, c)| self.erased(*c))
                .unwrap_or_default(),
            "generic_type" => named_children(ty)
                .first()
                .map(|(_, c)| self.erased(*c))
                .unwrap_or_default(),
            "array_type" => {
                let elem = ty
                    .child_by_field_name("element")
                    .map(|e| self.erased(e))
                    .unwrap_or_default();
                let dims = ty
                    .child_by_field_name("dimensions")
                    .map(|d| self.text(d).matches('[').count())
                    .unwrap_or(1);
                format!("{elem}{}", "[]".repeat(dims))
            }
            "annotated_type" => named_children(ty)
                .last()
                .map(|(_, c)| self.erased(*c))
                .unwrap_or_default(),
            _ => self.text(ty).split_whitespace().collect(),
        }
    }

    /// Qualifier annotations written inside an `annotated_type`.
    fn type_qualified(&mut self, ty: Node<'_>) -> bool {
        if ty.kind() != "annotated_type" {
            return false;
        }
        let mut found = false;
        for (_, c) in named_children(ty) {
            if matches!(c.kind(), "marker_annotation" | "annotation") && self.is_qualifier(c) {
                found = true;
            }
        }
        found
    }

    fn visit_type(&mut self, ty: Node<'_>, parent: u32, local: bool) {
        match ty.kind() {
            "integral_type" | "floating_point_type" | "boolean_type" => {
                self.add(NodeKind::PrimitiveType, Some(parent), ty);
            }
            "void_type" => {
                self.add(NodeKind::VoidType, Some(parent), ty);
            }
            "type_identifier" => {
                let kind = if local && self.text(ty) == "var" {
                    NodeKind::VarType
                } else {
                    NodeKind::ClassOrInterfaceType
                };
                self.add(kind, Some(parent), ty);
            }
            "scoped_type_identifier" => {
                self.add(NodeKind::ClassOrInterfaceType, Some(parent), ty);
            }
            "generic_type" => {
                let id = self.add(NodeKind::ClassOrInterfaceType, Some(parent), ty);
                for (_, c) in named_children(ty) {
                    if c.kind() == "type_arguments" {
                        for (_, arg) in named_children(c) {
                            self.visit_type(arg, id, false);
                        }
                    }
                }
            }
            "array_type" => {
                let id = self.add(NodeKind::ArrayType, Some(parent), ty);
                if let Some(e) = ty.child_by_field_name("element") {
                    self.visit_type(e, id, false);
                }
            }
            "wildcard" => {
                let id = self.add(NodeKind::WildcardType, Some(parent), ty);
                for (_, c) in named_children(ty) {
                    if c.kind() != "marker_annotation" && c.kind() != "annotation" {
                        self.visit_type(c, id, false);
                    } else {
                        self.visit_annotation(c, id);
                    }
                }
            }
            "annotated_type" => {
                for (_, c) in named_children(ty) {
                    if matches!(c.kind(), "marker_annotation" | "annotation") {
                        self.visit_annotation(c, parent);
                    } else {
                        self.visit_type(c, parent, local);
                    }
                }
            }
            "type_list" => {
                for (_, c) in named_children(ty) {
                    self.visit_type(c, parent, false);
                }
            }
            "line_comment" | "block_comment" => self.visit(ty, parent),
            _ => {
                self.add(NodeKind::ClassOrInterfaceType, Some(parent), ty);
            }
        }
    }

    fn visit_children(&mut self, n: Node<'_>, parent: u32, skip: &[&str]) {
        for (field, child) in named_children(n) {
            if field.is_some_and(|f| skip.contains(&f)) {
                continue;
            }
            self.visit(child, parent);
        }
    }

    /// Visits the contents of a parenthesized condition without an
    /// `EnclosedExpr` node for the parentheses themselves.
    fn visit_condition(&mut self, n: Node<'_>, parent: u32) {
        if n.kind() == "parenthesized_expression" {
            self.visit_children(n, parent, &[]);
        } else {
            self.visit(n, parent);
        }
    }

    fn visit(&mut self, n: Node<'_>, parent: u32) {
        use NodeKind as K;
        let kind = n.kind();
        match kind {
            "package_declaration" => {
                self.add(K::PackageDeclaration, Some(parent), n);
            }
            "import_declaration" => {
                // qualifier imports are part of the erased annotation
                let qualifier = self
                    .import_decls
                    .iter()
                    .any(|d| d.span == span(n) && !d.is_static && !d.on_demand && self.alias.contains_fqn(&d.path));
                if !qualifier {
                    self.add(K::ImportDeclaration, Some(parent), n);
                }
            }
            "class_declaration" | "interface_declaration" | "enum_declaration"
            | "annotation_type_declaration" | "record_declaration" => {
                let in_block = n.parent().is_some_and(|p| {
                    matches!(p.kind(), "block" | "constructor_body" | "switch_block_statement_group")
                });
                let owner = if in_block {
                    self.add(K::LocalClassDeclStmt, Some(parent), n)
                } else {
                    parent
                };
                self.visit_type_decl(n, owner);
            }
            "field_declaration" | "constant_declaration" => self.visit_field(n, parent),
            "method_declaration" => self.visit_method(n, parent, false),
            "constructor_declaration" | "compact_constructor_declaration" => {
                if kind == "compact_constructor_declaration" {
                    self.warn(n, "compact constructor");
                }
                self.visit_method(n, parent, true)
            }
            "static_initializer" => {
                let id = self.add(K::InitializerDeclaration, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "enum_constant" => {
                let name = n
                    .child_by_field_name("name")
                    .map(|c| self.text(c).to_string())
                    .unwrap_or_default();
                let id = self.add_named(K::EnumConstantDeclaration, parent, n, &name);
                self.visit_children(n, id, &["name"]);
            }
            "class_body" | "interface_body" | "enum_body" | "enum_body_declarations"
            | "annotation_type_body" | "argument_list" | "type_arguments" | "resource_specification"
            | "finally_clause" | "switch_block" | "switch_label" | "annotation_argument_list"
            | "superclass" | "super_interfaces" | "extends_interfaces" | "throws" | "type_list"
            | "catch_type" | "permits" => self.visit_children(n, parent, &[]),
            "modifiers" => {}
            "marker_annotation" | "annotation" => self.visit_annotation(n, parent),
            "element_value_pair" => {
                let id = self.add(K::MemberValuePair, Some(parent), n);
                self.visit_children(n, id, &["key"]);
            }
            "element_value_array_initializer" | "array_initializer" => {
                let id = self.add(K::ArrayInitializerExpr, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "block" | "constructor_body" => {
                let id = self.add(K::BlockStmt, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "local_variable_declaration" => {
                let wrap = n.parent().is_some_and(|p| is_statement_context(p.kind()));
                self.visit_local(n, parent, wrap);
            }
            "expression_statement" => {
                let id = self.add(K::ExpressionStmt, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "if_statement" | "while_statement" | "do_statement" => {
                let k = match kind {
                    "if_statement" => K::IfStmt,
                    "while_statement" => K::WhileStmt,
                    _ => K::DoStmt,
                };
                let id = self.add(k, Some(parent), n);
                for (field, c) in named_children(n) {
                    if field == Some("condition") {
                        self.visit_condition(c, id);
                    } else {
                        self.visit(c, id);
                    }
                }
            }
            "synchronized_statement" => {
                let id = self.add(K::SynchronizedStmt, Some(parent), n);
                for (_, c) in named_children(n) {
                    self.visit_condition(c, id);
                }
            }
            "for_statement" => {
                let id = self.add(K::ForStmt, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "enhanced_for_statement" => {
                let id = self.add(K::ForEachStmt, Some(parent), n);
                let (mods, anns) = self.modifiers(n);
                let var = self.add(K::VariableDeclarationExpr, Some(id), n);
                self.nodes[var as usize].modifiers = mods;
                self.visit_annotations(&anns, var);
                if let Some(ty) = n.child_by_field_name("type") {
                    self.visit_type(ty, var, true);
                }
                if let Some(name) = n.child_by_field_name("name") {
                    let nm = self.text(name).to_string();
                    let decl = self.add_named(K::VariableDeclarator, var, name, &nm);
                    let ty = n.child_by_field_name("type").map(|t| self.erased(t));
                    self.nodes[decl as usize].decl_type = ty.clone();
                    if let (Some(m), Some(t)) = (self.method_stack.last_mut(), ty) {
                        m.locals.push((nm, t));
                    }
                }
                for (field, c) in named_children(n) {
                    if matches!(field, Some("value") | Some("body")) {
                        self.visit(c, id);
                    }
                }
            }
            "try_statement" | "try_with_resources_statement" => {
                let id = self.add(K::TryStmt, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "resource" => {
                if let Some(ty) = n.child_by_field_name("type") {
                    let var = self.add(K::VariableDeclarationExpr, Some(parent), n);
                    self.visit_type(ty, var, true);
                    let nm = n
                        .child_by_field_name("name")
                        .map(|c| self.text(c).to_string())
                        .unwrap_or_default();
                    let decl = self.add_named(K::VariableDeclarator, var, n, &nm);
                    self.nodes[decl as usize].decl_type = Some(self.erased(ty));
                    if let Some(v) = n.child_by_field_name("value") {
                        self.visit(v, decl);
                    }
                } else {
                    self.visit_children(n, parent, &[]);
                }
            }
            "catch_clause" => {
                let id = self.add(K::CatchClause, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "catch_formal_parameter" => {
                let (mods, anns) = self.modifiers(n);
                let nm = n
                    .child_by_field_name("name")
                    .map(|c| self.text(c).to_string())
                    .unwrap_or_default();
                let id = self.add_named(K::Parameter, parent, n, &nm);
                self.nodes[id as usize].modifiers = mods;
                self.visit_annotations(&anns, id);
                for (field, c) in named_children(n) {
                    if c.kind() == "catch_type" {
                        for (_, t) in named_children(c) {
                            self.visit_type(t, id, false);
                        }
                    } else if field != Some("name") && c.kind() != "modifiers" {
                        self.visit(c, id);
                    }
                }
            }
            "return_statement" => {
                let id = self.add(K::ReturnStmt, Some(parent), n);
                if let Some((_, e)) = named_children(n).into_iter().find(|(_, c)| !is_comment(*c)) {
                    let expr = self.expr_of(e);
                    let line = n.start_position().row + 1;
                    if let Some(m) = self.method_stack.last_mut() {
                        m.returns.push((expr, line));
                    }
                }
                self.visit_children(n, id, &[]);
            }
            "throw_statement" => {
                let id = self.add(K::ThrowStmt, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "break_statement" | "continue_statement" => {
                let k = if kind == "break_statement" { K::BreakStmt } else { K::ContinueStmt };
                let id = self.add(k, Some(parent), n);
                for (_, c) in named_children(n) {
                    if is_comment(c) {
                        self.visit(c, id);
                    }
                }
            }
            "assert_statement" => {
                let id = self.add(K::AssertStmt, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "labeled_statement" => {
                let id = self.add(K::LabeledStmt, Some(parent), n);
                for (i, (_, c)) in named_children(n).into_iter().enumerate() {
                    if i == 0 && c.kind() == "identifier" {
                        continue;
                    }
                    self.visit(c, id);
                }
            }
            "switch_expression" => {
                let statement = n.parent().is_some_and(|p| is_statement_context(p.kind()));
                let k = if statement {
                    K::SwitchStmt
                } else {
                    self.warn(n, "switch expression");
                    K::Other
                };
                let id = self.add(k, Some(parent), n);
                for (field, c) in named_children(n) {
                    if field == Some("condition") {
                        self.visit_condition(c, id);
                    } else {
                        self.visit(c, id);
                    }
                }
            }
            "switch_block_statement_group" => {
                let id = self.add(K::SwitchEntry, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "switch_rule" => {
                self.warn(n, "arrow switch rule");
                let id = self.add(K::Other, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "yield_statement" | "text_block" | "record_pattern" | "guard" => {
                self.warn(n, kind);
                let id = self.add(K::Other, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "explicit_constructor_invocation" => {
                let id = self.add(K::ExplCtorInvocStmt, Some(parent), n);
                self.visit_children(n, id, &["constructor"]);
            }
            "assignment_expression" => {
                let id = self.add(K::AssignExpr, Some(parent), n);
                let line = n.start_position().row + 1;
                let left = n.child_by_field_name("left").map(|l| self.expr_of(l));
                let right = n.child_by_field_name("right").map(|r| self.expr_of(r));
                if let (Some(m), Some(l), Some(r)) = (self.method_stack.last_mut(), left, right) {
                    m.assigns.push((l, r, line));
                }
                self.visit_children(n, id, &[]);
            }
            "binary_expression" => {
                let id = self.add(K::BinaryExpr, Some(parent), n);
                let op = n.child_by_field_name("operator").map(|o| self.text(o));
                if matches!(op, Some("==") | Some("!=")) {
                    let l = n.child_by_field_name("left").map(|x| self.expr_of(x));
                    let r = n.child_by_field_name("right").map(|x| self.expr_of(x));
                    let checked = match (l, r) {
                        (Some(Expr::Null), Some(other)) | (Some(other), Some(Expr::Null)) => {
                            match other {
                                Expr::Name(s) | Expr::ThisField(s) => Some(s),
                                _ => None,
                            }
                        }
                        _ => None,
                    };
                    if let (Some(m), Some(c)) = (self.method_stack.last_mut(), checked) {
                        m.null_checks.push(c);
                    }
                }
                self.visit_children(n, id, &[]);
            }
            "unary_expression" | "update_expression" => {
                let id = self.add(K::UnaryExpr, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "ternary_expression" => {
                let id = self.add(K::ConditionalExpr, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "instanceof_expression" => {
                let id = self.add(K::InstanceOfExpr, Some(parent), n);
                if n.child_by_field_name("name").is_some() || n.child_by_field_name("pattern").is_some() {
                    self.warn(n, "instanceof pattern");
                }
                for (field, c) in named_children(n) {
                    match field {
                        Some("right") => self.visit_type(c, id, false),
                        Some("name") | Some("pattern") => {}
                        _ => self.visit(c, id),
                    }
                }
            }
            "cast_expression" => {
                let id = self.add(K::CastExpr, Some(parent), n);
                let types = fields(n, "type");
                if types.len() > 1 {
                    let inter = self.add(K::IntersectionType, Some(id), n);
                    for t in types {
                        self.visit_type(t, inter, false);
                    }
                } else if let Some(t) = types.first() {
                    self.visit_type(*t, id, false);
                }
                if let Some(v) = n.child_by_field_name("value") {
                    self.visit(v, id);
                }
            }
            "parenthesized_expression" => {
                let id = self.add(K::EnclosedExpr, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "method_invocation" => {
                let name = n
                    .child_by_field_name("name")
                    .map(|c| self.text(c).to_string())
                    .unwrap_or_default();
                let id = self.add_named(K::MethodCallExpr, parent, n, &name);
                let receiver = match n.child_by_field_name("object") {
                    None => Receiver::Implicit,
                    Some(o) => self.receiver_of(o),
                };
                let args: Vec<Expr> = n
                    .child_by_field_name("arguments")
                    .map(|a| {
                        named_children(a)
                            .into_iter()
                            .filter(|(_, c)| !is_comment(*c))
                            .map(|(_, c)| self.expr_of(c))
                            .collect()
                    })
                    .unwrap_or_default();
                let line = n.start_position().row + 1;
                if let Some(m) = self.method_stack.last_mut() {
                    m.calls.push(CallFact {
                        receiver,
                        name,
                        args,
                        line,
                    });
                }
                self.visit_children(n, id, &["name"]);
            }
            "field_access" => {
                let name = n
                    .child_by_field_name("field")
                    .map(|c| self.text(c).to_string())
                    .unwrap_or_default();
                let id = self.add_named(K::FieldAccessExpr, parent, n, &name);
                if let Some(o) = n.child_by_field_name("object") {
                    let recv = self.receiver_of(o);
                    let line = n.start_position().row + 1;
                    if let Some(m) = self.method_stack.last_mut() {
                        m.field_refs.push((recv, name, line));
                    }
                }
                self.visit_children(n, id, &["field"]);
            }
            "method_reference" => {
                let items: Vec<Node<'_>> = named_children(n).into_iter().map(|(_, c)| c).collect();
                let name = if items.len() >= 2 && items[items.len() - 1].kind() == "identifier" {
                    Some(self.text(items[items.len() - 1]).to_string())
                } else {
                    None
                };
                let id = self.add(K::MethodReferenceExpr, Some(parent), n);
                self.nodes[id as usize].name = name.clone();
                if let Some(q) = items.first() {
                    let is_type = matches!(
                        q.kind(),
                        "type_identifier" | "scoped_type_identifier" | "generic_type" | "array_type"
                            | "integral_type" | "floating_point_type" | "boolean_type"
                    ) || (q.kind() == "identifier"
                        && self.text(*q).starts_with(|c: char| c.is_ascii_uppercase()));
                    if is_type {
                        let t = self.add(K::TypeExpr, Some(id), *q);
                        if q.kind() == "identifier" {
                            self.add(K::ClassOrInterfaceType, Some(t), *q);
                        } else {
                            self.visit_type(*q, t, false);
                        }
                    } else {
                        self.visit(*q, id);
                    }
                }
            }
            "object_creation_expression" => {
                let id = self.add(K::ObjectCreationExpr, Some(parent), n);
                for (field, c) in named_children(n) {
                    match (field, c.kind()) {
                        (Some("type"), _) => self.visit_type(c, id, false),
                        (_, "class_body") => self.visit_anonymous(c, id),
                        _ => self.visit(c, id),
                    }
                }
            }
            "array_creation_expression" => {
                let id = self.add(K::ArrayCreationExpr, Some(parent), n);
                for (field, c) in named_children(n) {
                    match (field, c.kind()) {
                        (Some("type"), _) => self.visit_type(c, id, false),
                        (_, "dimensions_expr") => {
                            let lvl = self.add(K::ArrayCreationLevel, Some(id), c);
                            self.visit_children(c, lvl, &[]);
                        }
                        (_, "dimensions") => {
                            for _ in 0..self.text(c).matches('[').count() {
                                self.add(K::ArrayCreationLevel, Some(id), c);
                            }
                        }
                        _ => self.visit(c, id),
                    }
                }
            }
            "array_access" => {
                let id = self.add(K::ArrayAccessExpr, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
            "lambda_expression" => self.visit_lambda(n, parent),
            "class_literal" => {
                let id = self.add(K::ClassExpr, Some(parent), n);
                for (_, c) in named_children(n) {
                    self.visit_type(c, id, false);
                }
            }
            "identifier" => {
                let name = self.text(n).to_string();
                self.add_named(K::NameExpr, parent, n, &name);
            }
            "scoped_identifier" => {
                let name = n
                    .child_by_field_name("name")
                    .map(|c| self.text(c).to_string())
                    .unwrap_or_default();
                self.add_named(K::NameExpr, parent, n, &name);
            }
            "this" => {
                self.add(K::ThisExpr, Some(parent), n);
            }
            "super" => {
                self.add(K::SuperExpr, Some(parent), n);
            }
            "null_literal" => {
                self.add(K::NullLiteralExpr, Some(parent), n);
            }
            "decimal_integer_literal" | "hex_integer_literal" | "octal_integer_literal"
            | "binary_integer_literal" => {
                let k = if self.text(n).ends_with(['l', 'L']) {
                    K::LongLiteralExpr
                } else {
                    K::IntegerLiteralExpr
                };
                self.add(k, Some(parent), n);
            }
            "decimal_floating_point_literal" | "hex_floating_point_literal" => {
                self.add(K::DoubleLiteralExpr, Some(parent), n);
            }
            "character_literal" => {
                self.add(K::CharLiteralExpr, Some(parent), n);
            }
            "string_literal" => {
                if self.text(n).starts_with("\"\"\"") {
                    self.warn(n, "text block");
                    self.add(K::Other, Some(parent), n);
                } else {
                    self.add(K::StringLiteralExpr, Some(parent), n);
                }
            }
            "true" | "false" => {
                self.add(K::BooleanLiteralExpr, Some(parent), n);
            }
            "line_comment" => {
                self.add(K::LineComment, Some(parent), n);
            }
            "block_comment" => {
                let k = if self.text(n).starts_with("/**") {
                    K::JavadocComment
                } else {
                    K::BlockComment
                };
                self.add(k, Some(parent), n);
            }
            "type_parameters" => {
                for (_, c) in named_children(n) {
                    if c.kind() == "type_parameter" {
                        let id = self.add(K::TypeParameter, Some(parent), c);
                        for (_, b) in named_children(c) {
                            if b.kind() == "type_bound" {
                                for (_, t) in named_children(b) {
                                    self.visit_type(t, id, false);
                                }
                            } else if matches!(b.kind(), "marker_annotation" | "annotation") {
                                self.visit_annotation(b, id);
                            }
                        }
                    } else {
                        self.visit(c, parent);
                    }
                }
            }
            "integral_type" | "floating_point_type" | "boolean_type" | "void_type"
            | "type_identifier" | "scoped_type_identifier" | "generic_type" | "array_type"
            | "wildcard" | "annotated_type" => self.visit_type(n, parent, false),
            "dimensions" | "asterisk" | "receiver_parameter" => {}
            _ if !n.is_named() => {}
            _ => {
                log::debug!("unmapped syntax kind '{kind}' encoded as Other");
                let id = self.add(K::Other, Some(parent), n);
                self.visit_children(n, id, &[]);
            }
        }
    }

    fn receiver_of(&self, o: Node<'_>) -> Receiver {
        match o.kind() {
            "this" => Receiver::This,
            "super" => Receiver::Super,
            "identifier" => Receiver::Name(self.text(o).to_string()),
            "parenthesized_expression" => named_children(o)
                .first()
                .map(|(_, c)| self.receiver_of(*c))
                .unwrap_or(Receiver::Other),
            _ => Receiver::Other,
        }
    }

    fn expr_of(&self, e: Node<'_>) -> Expr {
        match e.kind() {
            "null_literal" => Expr::Null,
            "identifier" => Expr::Name(self.text(e).to_string()),
            "field_access" => {
                let field = e
                    .child_by_field_name("field")
                    .map(|c| self.text(c).to_string())
                    .unwrap_or_default();
                match e.child_by_field_name("object").map(|o| (o.kind(), o)) {
                    Some(("this", _)) => Expr::ThisField(field),
                    Some(("identifier", o)) => Expr::Qualified(self.text(o).to_string(), field),
                    _ => Expr::Other,
                }
            }
            "parenthesized_expression" => named_children(e)
                .first()
                .map(|(_, c)| self.expr_of(*c))
                .unwrap_or(Expr::Other),
            _ => Expr::Other,
        }
    }

    fn push_type(&mut self, fqn: String, name: String, is_interface: bool, supertypes: Vec<String>) {
        self.type_stack.push(TypeFacts {
            fqn,
            name,
            is_interface,
            supertypes,
            ..Default::default()
        });
    }

    fn pop_type(&mut self) {
        if let Some(t) = self.type_stack.pop() {
            self.done_types.push(t);
        }
    }

    fn visit_type_decl(&mut self, n: Node<'_>, parent: u32) {
        use NodeKind as K;
        let kind = match n.kind() {
            "class_declaration" | "interface_declaration" => K::ClassOrInterfaceDecl,
            "enum_declaration" => K::EnumDeclaration,
            "annotation_type_declaration" => K::AnnotationDeclaration,
            _ => {
                self.warn(n, "record declaration");
                K::Other
            }
        };
        let name = n
            .child_by_field_name("name")
            .map(|c| self.text(c).to_string())
            .unwrap_or_default();
        let fqn = match self.type_stack.last() {
            Some(outer) => format!("{}.{name}", outer.fqn),
            None => self.qualify(&name),
        };
        let (mods, anns) = self.modifiers(n);
        let id = self.add(kind, Some(parent), n);
        self.nodes[id as usize].modifiers = mods;
        self.nodes[id as usize].anchor = Some(SourceAnchor {
            file_path: self.path.to_string(),
            byte_span: (n.start_byte() as u32, n.end_byte() as u32),
            decl_signature: fqn.clone(),
        });
        self.visit_annotations(&anns, id);

        let mut supertypes = Vec::new();
        for (field, c) in named_children(n) {
            let types: Vec<Node<'_>> = match (field, c.kind()) {
                (Some("superclass"), _) | (_, "superclass") => named_children(c).into_iter().map(|x| x.1).collect(),
                (Some("interfaces"), _) | (_, "super_interfaces") | (_, "extends_interfaces") => {
                    named_children(c)
                        .into_iter()
                        .flat_map(|(_, x)| {
                            if x.kind() == "type_list" {
                                named_children(x).into_iter().map(|y| y.1).collect()
                            } else {
                                vec![x]
                            }
                        })
                        .collect()
                }
                _ => Vec::new(),
            };
            supertypes.extend(types.into_iter().filter(|t| !is_comment(*t)).map(|t| self.erased(t)));
        }
        self.push_type(fqn, name, n.kind() == "interface_declaration", supertypes);
        self.members.push(MemberCtx {
            signature: self.current_type(),
            lambdas: 0,
        });
        for (field, c) in named_children(n) {
            match (field, c.kind()) {
                (Some("name"), _) | (_, "modifiers") => {}
                (_, "superclass") | (_, "super_interfaces") | (_, "extends_interfaces") => {
                    for (_, t) in named_children(c) {
                        self.visit_type(t, id, false);
                    }
                }
                _ => self.visit(c, id),
            }
        }
        self.members.pop();
        self.pop_type();
    }

    fn visit_anonymous(&mut self, body: Node<'_>, parent: u32) {
        let outer = self.current_type();
        let fqn = format!("{outer}$anon{}", self.anon_count);
        self.anon_count += 1;
        let name = fqn.rsplit('.').next().unwrap_or_default().to_string();
        self.push_type(fqn, name, false, Vec::new());
        self.visit_children(body, parent, &[]);
        self.pop_type();
    }

    fn visit_field(&mut self, n: Node<'_>, parent: u32) {
        use NodeKind as K;
        let (mods, anns) = self.modifiers(n);
        let id = self.add(K::FieldDeclaration, Some(parent), n);
        self.nodes[id as usize].modifiers = mods;
        let mut qualified = self.visit_annotations(&anns, id);
        let ty = n.child_by_field_name("type");
        if let Some(t) = ty {
            qualified |= self.type_qualified(t);
        }
        let erased = ty.map(|t| self.erased(t)).unwrap_or_default();
        let eligible = !is_primitive(&erased);
        let owner = self.current_type();
        if let Some(t) = ty {
            self.visit_type(t, id, false);
        }
        for (field, c) in named_children(n) {
            match field {
                Some("declarator") => {
                    let name = c
                        .child_by_field_name("name")
                        .map(|x| self.text(x).to_string())
                        .unwrap_or_default();
                    let signature = format!("{owner}#{name}");
                    let decl = self.add_named(K::VariableDeclarator, id, c, &name);
                    let node = &mut self.nodes[decl as usize];
                    node.label = label_for(eligible, qualified);
                    node.decl_type = Some(erased.clone());
                    node.anchor = Some(SourceAnchor {
                        file_path: self.path.to_string(),
                        byte_span: (n.start_byte() as u32, n.end_byte() as u32),
                        decl_signature: signature.clone(),
                    });
                    if eligible {
                        self.sites.push(DeclSite {
                            signature: signature.clone(),
                            kind: SiteKind::Field,
                            decl_span: span(n),
                            type_span: ty.map(span),
                            in_lambda: false,
                            labeled: qualified,
                        });
                    }
                    let value = c.child_by_field_name("value");
                    let init = value.map(|v| self.expr_of(v));
                    if let Some(t) = self.type_stack.last_mut() {
                        t.fields.push(FieldFact {
                            name,
                            ty: erased.clone(),
                            signature: signature.clone(),
                            eligible,
                            is_static: mods.contains("static"),
                            init,
                            line: c.start_position().row + 1,
                        });
                    }
                    self.members.push(MemberCtx {
                        signature,
                        lambdas: 0,
                    });
                    self.visit_children(c, decl, &["name", "dimensions"]);
                    self.members.pop();
                }
                Some("type") => {}
                _ if c.kind() == "modifiers" => {}
                _ => self.visit(c, id),
            }
        }
    }

    fn param_type<'t>(&self, p: Node<'t>) -> Option<Node<'t>> {
        match p.kind() {
            "formal_parameter" => p.child_by_field_name("type"),
            "spread_parameter" => named_children(p)
                .into_iter()
                .map(|(_, c)| c)
                .find(|c| !matches!(c.kind(), "modifiers" | "variable_declarator" | "marker_annotation" | "annotation")),
            _ => None,
        }
    }

    fn param_erased(&self, p: Node<'_>) -> String {
        let base = self.param_type(p).map(|t| self.erased(t)).unwrap_or_default();
        if p.kind() == "spread_parameter" {
            format!("{base}[]")
        } else {
            base
        }
    }

    fn param_name(&self, p: Node<'_>) -> String {
        match p.kind() {
            "spread_parameter" => named_children(p)
                .into_iter()
                .find(|(_, c)| c.kind() == "variable_declarator")
                .and_then(|(_, d)| d.child_by_field_name("name"))
                .map(|x| self.text(x).to_string())
                .unwrap_or_default(),
            _ => p
                .child_by_field_name("name")
                .map(|x| self.text(x).to_string())
                .unwrap_or_default(),
        }
    }

    fn visit_method(&mut self, n: Node<'_>, parent: u32, ctor: bool) {
        use NodeKind as K;
        let (mods, anns) = self.modifiers(n);
        let owner = self.current_type();
        let name = n
            .child_by_field_name("name")
            .map(|c| self.text(c).to_string())
            .unwrap_or_default();
        let params: Vec<Node<'_>> = n
            .child_by_field_name("parameters")
            .map(|ps| {
                named_children(ps)
                    .into_iter()
                    .map(|(_, c)| c)
                    .filter(|c| matches!(c.kind(), "formal_parameter" | "spread_parameter"))
                    .collect()
            })
            .unwrap_or_default();
        let param_types: Vec<String> = params.iter().map(|p| self.param_erased(*p)).collect();
        let member = if ctor { "<init>".to_string() } else { name.clone() };
        let signature = format!("{owner}#{member}({})", param_types.join(","));
        let ty = if ctor { None } else { n.child_by_field_name("type") };
        let ret = ty.map(|t| self.erased(t));
        let eligible = ret.as_deref().is_some_and(|r| r != "void" && !is_primitive(r));

        let kind = if ctor { K::ConstructorDeclaration } else { K::MethodDeclaration };
        let id = self.add(kind, Some(parent), n);
        let mut qualified = self.visit_annotations(&anns, id);
        if let Some(t) = ty {
            qualified |= self.type_qualified(t);
        }
        {
            let node = &mut self.nodes[id as usize];
            node.modifiers = mods;
            if !ctor {
                node.name = Some(name.clone());
                node.decl_type = ret.clone();
            }
            node.anchor = Some(SourceAnchor {
                file_path: self.path.to_string(),
                byte_span: (n.start_byte() as u32, n.end_byte() as u32),
                decl_signature: signature.clone(),
            });
        }
        if !ctor {
            self.nodes[id as usize].label = label_for(eligible, qualified);
            if eligible {
                self.sites.push(DeclSite {
                    signature: signature.clone(),
                    kind: SiteKind::Return,
                    decl_span: span(n),
                    type_span: ty.map(span),
                    in_lambda: false,
                    labeled: qualified,
                });
            }
        }

        let body = n.child_by_field_name("body");
        self.method_stack.push(MethodFact {
            name: member,
            signature: signature.clone(),
            is_ctor: ctor,
            return_type: ret,
            return_eligible: eligible,
            is_static: mods.contains("static"),
            has_body: body.is_some(),
            line: n.start_position().row + 1,
            ..Default::default()
        });
        self.members.push(MemberCtx {
            signature: signature.clone(),
            lambdas: 0,
        });

        for (field, c) in named_children(n) {
            match (field, c.kind()) {
                (Some("name"), _) | (_, "modifiers") => {}
                (Some("type"), _) => self.visit_type(c, id, false),
                (Some("parameters"), _) => {
                    let mut ordinal = 0;
                    for (_, p) in named_children(c) {
                        if matches!(p.kind(), "formal_parameter" | "spread_parameter") {
                            self.visit_param(p, id, &signature, ordinal, false);
                            ordinal += 1;
                        } else {
                            self.visit(p, id);
                        }
                    }
                }
                (_, "throws") => {
                    for (_, t) in named_children(c) {
                        self.visit_type(t, id, false);
                    }
                }
                (_, "dimensions") => {}
                _ => self.visit(c, id),
            }
        }
        self.members.pop();
        let fact = self.method_stack.pop().expect("pushed above");
        if let Some(t) = self.type_stack.last_mut() {
            t.methods.push(fact);
        }
    }

    fn visit_param(&mut self, p: Node<'_>, parent: u32, member: &str, ordinal: usize, in_lambda: bool) {
        let (mods, anns) = self.modifiers(p);
        let name = self.param_name(p);
        let ty = self.param_type(p);
        let erased = self.param_erased(p);
        let eligible = !is_primitive(&erased);
        let signature = format!("{member}[{ordinal}]");
        let id = self.add_named(NodeKind::Parameter, parent, p, &name);
        let mut qualified = self.visit_annotations(&anns, id);
        if let Some(t) = ty {
            qualified |= self.type_qualified(t);
        }
        {
            let node = &mut self.nodes[id as usize];
            node.modifiers = mods;
            node.decl_type = Some(erased.clone());
            node.label = label_for(eligible, qualified);
            node.anchor = Some(SourceAnchor {
                file_path: self.path.to_string(),
                byte_span: (p.start_byte() as u32, p.end_byte() as u32),
                decl_signature: signature.clone(),
            });
        }
        if eligible {
            self.sites.push(DeclSite {
                signature: signature.clone(),
                kind: SiteKind::Parameter,
                decl_span: span(p),
                type_span: ty.map(span),
                in_lambda,
                labeled: qualified,
            });
        }
        let fact = ParamFact {
            name,
            ty: Some(erased),
            signature: signature.clone(),
            eligible,
        };
        if in_lambda {
            if let Some(t) = self.type_stack.last_mut() {
                t.lambda_params.push((signature, true));
            }
        } else if let Some(m) = self.method_stack.last_mut() {
            m.params.push(fact);
        }
        if let Some(t) = ty {
            self.visit_type(t, id, false);
        }
    }

    fn visit_lambda(&mut self, n: Node<'_>, parent: u32) {
        let id = self.add(NodeKind::LambdaExpr, Some(parent), n);
        let prefix = match self.members.last_mut() {
            Some(m) => {
                let s = format!("{}$lambda{}", m.signature, m.lambdas);
                m.lambdas += 1;
                s
            }
            None => format!("{}$lambda", self.current_type()),
        };
        if let Some(params) = n.child_by_field_name("parameters") {
            let untyped: Vec<Node<'_>> = match params.kind() {
                "identifier" => vec![params],
                "inferred_parameters" => named_children(params)
                    .into_iter()
                    .map(|(_, c)| c)
                    .filter(|c| c.kind() == "identifier")
                    .collect(),
                _ => Vec::new(),
            };
            if params.kind() == "formal_parameters" {
                let mut ordinal = 0;
                for (_, p) in named_children(params) {
                    if matches!(p.kind(), "formal_parameter" | "spread_parameter") {
                        self.visit_param(p, id, &prefix, ordinal, true);
                        ordinal += 1;
                    }
                }
            }
            for (ordinal, p) in untyped.into_iter().enumerate() {
                let name = self.text(p).to_string();
                let signature = format!("{prefix}[{ordinal}]");
                let pid = self.add_named(NodeKind::Parameter, id, p, &name);
                let node = &mut self.nodes[pid as usize];
                node.label = Some(Label::NotNullable);
                node.anchor = Some(SourceAnchor {
                    file_path: self.path.to_string(),
                    byte_span: (p.start_byte() as u32, p.end_byte() as u32),
                    decl_signature: signature.clone(),
                });
                self.sites.push(DeclSite {
                    signature: signature.clone(),
                    kind: SiteKind::Parameter,
                    decl_span: span(p),
                    type_span: None,
                    in_lambda: true,
                    labeled: false,
                });
                if let Some(t) = self.type_stack.last_mut() {
                    t.lambda_params.push((signature, false));
                }
            }
        }
        if let Some(body) = n.child_by_field_name("body") {
            self.visit(body, id);
        }
    }

    fn visit_local(&mut self, n: Node<'_>, parent: u32, wrap: bool) {
        use NodeKind as K;
        let owner = if wrap {
            self.add(K::ExpressionStmt, Some(parent), n)
        } else {
            parent
        };
        let (mods, anns) = self.modifiers(n);
        let id = self.add(K::VariableDeclarationExpr, Some(owner), n);
        self.nodes[id as usize].modifiers = mods;
        self.visit_annotations(&anns, id);
        let ty = n.child_by_field_name("type");
        let erased = ty.map(|t| self.erased(t)).unwrap_or_default();
        if let Some(t) = ty {
            if t.kind() == "annotated_type" {
                for (_, c) in named_children(t) {
                    if matches!(c.kind(), "marker_annotation" | "annotation") && self.is_qualifier(c) {
                        self.qualifier_spans.push(span(c));
                    }
                }
            }
            self.visit_type(t, id, true);
        }
        for (field, c) in named_children(n) {
            match field {
                Some("declarator") => {
                    let name = c
                        .child_by_field_name("name")
                        .map(|x| self.text(x).to_string())
                        .unwrap_or_default();
                    let decl = self.add_named(K::VariableDeclarator, id, c, &name);
                    self.nodes[decl as usize].decl_type = Some(erased.clone());
                    if let Some(m) = self.method_stack.last_mut() {
                        m.locals.push((name, erased.clone()));
                    }
                    self.visit_children(c, decl, &["name", "dimensions"]);
                }
                Some("type") => {}
                _ if c.kind() == "modifiers" => {}
                _ => self.visit(c, id),
            }
        }
    }

    fn finish(mut self) -> Result<ParsedUnit> {
        // qualifier spans found inside annotated types of declarations are
        // recorded by the generic annotation visitor; collect any remaining
        // ones nested in type arguments.
        self.qualifier_spans.sort_unstable();
        self.qualifier_spans.dedup();
        let class_name = self
            .top_level
            .iter()
            .find(|(_, public)| *public)
            .or_else(|| self.top_level.first())
            .map(|(n, _)| n.clone())
            .unwrap_or_default();
        let class_id = self.qualify(&class_name);
        let mut pc = self.parent_child;
        pc.sort_unstable();
        let graph = RawGraph::assemble(class_id, self.nodes, &pc, &[]);
        self.done_types.sort_by(|a, b| a.fqn.cmp(&b.fqn));
        Ok(ParsedUnit {
            graph,
            package: self.package,
            package_span: self.package_span,
            imports: self.imports,
            import_decls: self.import_decls,
            qualifier_spans: self.qualifier_spans,
            sites: self.sites,
            types: self.done_types,
            warnings: self.warnings,
        })
    }
}

fn label_for(eligible: bool, qualified: bool) -> Option<Label> {
    match (eligible, qualified) {
        (false, _) => None,
        (true, true) => Some(Label::Nullable),
        (true, false) => Some(Label::NotNullable),
    }
}

fn is_comment(n: Node<'_>) -> bool {
    matches!(n.kind(), "line_comment" | "block_comment")
}
