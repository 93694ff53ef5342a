use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::napast::{encode_class, NapAst, PruneConfig};
use crate::ingest::{
    java_files, parse_unit, AliasTable, RawGraph, DeclSite, Expr, FieldFact, Imports, MethodFact, Receiver, SourceAnchor,
    TypeFacts,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum LinkKind {
    FieldUse,
    MethodCall,
    Override,
    ArgumentOf,
}

/// A resolved reference from one declaration to another.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SymbolLink {
    pub producer: String,
    pub consumer_class: String,
    /// Signature of the consuming member (method, or parameter for
    /// `ArgumentOf`, or overriding method for `Override`).
    pub consumer: String,
    pub kind: LinkKind,
}

#[derive(Debug, Clone)]
pub struct UnitInfo {
    pub file_path: String,
    pub class_id: String,
    pub package: Option<String>,
    pub imports: Imports,
    pub types: Vec<String>,
    pub graph: RawGraph,
}

#[derive(Debug, Clone)]
pub struct SiteInfo {
    pub class_id: String,
    pub file_path: String,
    pub site: DeclSite,
}

impl SiteInfo {
    pub fn anchor(&self) -> SourceAnchor {
        SourceAnchor {
            file_path: self.file_path.clone(),
            byte_span: (self.site.decl_span.0 as u32, self.site.decl_span.1 as u32),
            decl_signature: self.site.signature.clone(),
        }
    }
}

/// Declarations and cross-references of every parsed unit in a project.
#[derive(Debug, Clone, Default)]
pub struct ProjectIndex {
    pub units: Vec<UnitInfo>,
    types: BTreeMap<String, (usize, TypeFacts)>,
    sites: BTreeMap<String, SiteInfo>,
    links: Vec<SymbolLink>,
    pub skipped: Vec<(String, String)>,
}

fn base_type(ty: &str) -> &str {
    let t = ty.split('<').next().unwrap_or(ty);
    let t = t.trim_end_matches("[]").trim_end_matches("...");
    t.rsplit('.').next().unwrap_or(t)
}

impl ProjectIndex {
    /// Indexes `(relative path, source)` pairs. Files that fail to parse are
    /// recorded in `skipped`.
    pub fn build(sources: &[(String, String)], alias: &AliasTable) -> ProjectIndex {
        let mut idx = ProjectIndex::default();
        for (path, text) in sources {
            let unit = match parse_unit(path, text, alias) {
                Ok(u) => u,
                Err(e) => {
                    log::warn!("{path}: skipped: {e}");
                    idx.skipped.push((path.clone(), e.to_string()));
                    continue;
                }
            };
            let u = idx.units.len();
            let class_id = unit.graph.class_id.clone();
            for site in unit.sites {
                idx.sites.insert(
                    site.signature.clone(),
                    SiteInfo {
                        class_id: class_id.clone(),
                        file_path: path.clone(),
                        site,
                    },
                );
            }
            let names = unit.types.iter().map(|t| t.fqn.clone()).collect();
            for t in unit.types {
                idx.types.insert(t.fqn.clone(), (u, t));
            }
            idx.units.push(UnitInfo {
                file_path: path.clone(),
                class_id,
                package: unit.package,
                imports: unit.imports,
                types: names,
                graph: unit.graph,
            });
        }
        idx.links = idx.compute_links();
        idx
    }

    pub fn from_dir(root: &Path, alias: &AliasTable) -> Result<ProjectIndex> {
        let mut sources = Vec::new();
        for rel in java_files(root)? {
            let path = root.join(&rel);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            sources.push((crate::ingest::rel_string(&rel), text));
        }
        Ok(Self::build(&sources, alias))
    }

    /// Encodes every unit that has eligible declarations; units over the
    /// node cap are skipped with a log line.
    pub fn encode(&self, prune: &PruneConfig) -> Result<Vec<NapAst>> {
        let mut out = Vec::new();
        for u in &self.units {
            if !u.graph.nodes.iter().any(|n| n.is_labeled()) {
                continue;
            }
            match encode_class(&u.graph, prune) {
                Ok(n) => out.push(n),
                Err(Error::CapExceeded { nodes, cap }) => {
                    log::warn!("{}: {nodes} nodes exceed cap {cap}, not predicted", u.file_path)
                }
                Err(e) => return Err(e),
            }
        }
        Ok(out)
    }

    pub fn links(&self) -> &[SymbolLink] {
        &self.links
    }

    pub fn site(&self, signature: &str) -> Option<&SiteInfo> {
        self.sites.get(signature)
    }

    pub fn sites(&self) -> impl Iterator<Item = &SiteInfo> {
        self.sites.values()
    }

    pub fn type_facts(&self, fqn: &str) -> Option<&TypeFacts> {
        self.types.get(fqn).map(|(_, t)| t)
    }

    pub fn types(&self) -> impl Iterator<Item = &TypeFacts> {
        self.types.values().map(|(_, t)| t)
    }

    pub fn class_of_type(&self, fqn: &str) -> Option<&str> {
        self.types.get(fqn).map(|(u, _)| self.units[*u].class_id.as_str())
    }

    /// Fully-qualified name a written type refers to from inside `from`.
    pub fn resolve_type(&self, from: &str, written: &str) -> Option<String> {
        let simple = base_type(written);
        if self.types.contains_key(written) {
            return Some(written.to_string());
        }
        let (u, _) = self.types.get(from)?;
        let unit = &self.units[*u];
        // nested types of the enclosing chain
        let mut scope = Some(from.to_string());
        while let Some(s) = scope {
            let cand = format!("{s}.{simple}");
            if self.types.contains_key(&cand) {
                return Some(cand);
            }
            if self.types.get(&s).is_some_and(|(_, t)| t.name == simple) {
                return Some(s);
            }
            scope = s.rsplit_once('.').map(|(a, _)| a.to_string()).filter(|a| self.types.contains_key(a));
        }
        if let Some(fq) = unit.imports.resolve(simple) {
            if self.types.contains_key(fq) {
                return Some(fq.to_string());
            }
        }
        let same_pkg = match &unit.package {
            Some(p) => format!("{p}.{simple}"),
            None => simple.to_string(),
        };
        if self.types.contains_key(&same_pkg) {
            return Some(same_pkg);
        }
        for p in &unit.imports.on_demand {
            let cand = format!("{p}.{simple}");
            if self.types.contains_key(&cand) {
                return Some(cand);
            }
        }
        let matches: Vec<&String> = self
            .types
            .iter()
            .filter(|(_, (_, t))| t.name == simple)
            .map(|(k, _)| k)
            .collect();
        (matches.len() == 1).then(|| matches[0].clone())
    }

    /// The type and its resolvable supertypes, nearest first, without repeats.
    pub fn ancestry(&self, fqn: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut seen = BTreeSet::new();
        let mut queue = vec![fqn.to_string()];
        while let Some(t) = queue.first().cloned() {
            queue.remove(0);
            if !seen.insert(t.clone()) {
                continue;
            }
            if let Some(facts) = self.type_facts(&t) {
                for s in &facts.supertypes {
                    if let Some(r) = self.resolve_type(&t, s) {
                        queue.push(r);
                    }
                }
                out.push(t);
            }
        }
        out
    }

    pub fn field(&self, fqn: &str, name: &str) -> Option<&FieldFact> {
        for t in self.ancestry(fqn) {
            let found = self.types.get(&t).and_then(|(_, facts)| facts.fields.iter().find(|f| f.name == name));
            if found.is_some() {
                return found;
            }
        }
        None
    }

    pub fn method(&self, fqn: &str, name: &str, arity: usize) -> Option<&MethodFact> {
        for t in self.ancestry(fqn) {
            let facts = self.type_facts(&t)?;
            if let Some(m) = facts
                .methods
                .iter()
                .find(|m| !m.is_ctor && m.name == name && m.params.len() == arity)
            {
                return Some(m);
            }
        }
        None
    }

    fn var_type(&self, owner: &str, method: &MethodFact, name: &str) -> Option<String> {
        if let Some(p) = method.params.iter().find(|p| p.name == name) {
            return p.ty.clone();
        }
        if let Some((_, t)) = method.locals.iter().find(|(n, _)| n == name) {
            return Some(t.clone());
        }
        self.field(owner, name).map(|f| f.ty.clone())
    }

    fn shadowed(method: &MethodFact, name: &str) -> bool {
        method.params.iter().any(|p| p.name == name) || method.locals.iter().any(|(n, _)| n == name)
    }

    fn receiver_type(&self, owner: &str, method: &MethodFact, r: &Receiver) -> Option<String> {
        match r {
            Receiver::Implicit | Receiver::This => Some(owner.to_string()),
            Receiver::Super => {
                let facts = self.type_facts(owner)?;
                facts.supertypes.iter().find_map(|s| self.resolve_type(owner, s))
            }
            Receiver::Name(n) => match self.var_type(owner, method, n) {
                Some(t) => self.resolve_type(owner, &t),
                None => self.resolve_type(owner, n),
            },
            Receiver::Other => None,
        }
    }

    /// Field signature an expression reads, if it is a plain field read.
    pub fn field_read(&self, owner: &str, method: &MethodFact, e: &Expr) -> Option<String> {
        match e {
            Expr::Name(n) if !Self::shadowed(method, n) => self.field(owner, n).map(|f| f.signature.clone()),
            Expr::ThisField(n) => self.field(owner, n).map(|f| f.signature.clone()),
            Expr::Qualified(r, m) => {
                let t = self.receiver_type(owner, method, &Receiver::Name(r.clone()))?;
                self.field(&t, m).map(|f| f.signature.clone())
            }
            _ => None,
        }
    }

    /// Method a call resolves to.
    pub fn call_target(&self, owner: &str, method: &MethodFact, call: &crate::ingest::CallFact) -> Option<&MethodFact> {
        let t = self.receiver_type(owner, method, &call.receiver)?;
        self.method(&t, &call.name, call.args.len())
    }

    /// Supertype methods that `m` (declared in `owner`) overrides.
    pub fn overridden(&self, owner: &str, m: &MethodFact) -> Vec<&MethodFact> {
        if m.is_ctor || m.is_static {
            return Vec::new();
        }
        let types: Vec<String> = m.params.iter().map(|p| p.ty.clone().unwrap_or_default()).collect();
        let mut out = Vec::new();
        for t in self.ancestry(owner).into_iter().skip(1) {
            if let Some(facts) = self.type_facts(&t) {
                for sm in &facts.methods {
                    let st: Vec<String> = sm.params.iter().map(|p| p.ty.clone().unwrap_or_default()).collect();
                    if !sm.is_ctor && !sm.is_static && sm.name == m.name && st == types {
                        out.push(sm);
                    }
                }
            }
        }
        out
    }

    fn compute_links(&self) -> Vec<SymbolLink> {
        let mut links = BTreeSet::new();
        for (fqn, (u, facts)) in &self.types {
            let class = &self.units[*u].class_id;
            for m in &facts.methods {
                let mut push = |producer: String, consumer: String, kind| {
                    links.insert(SymbolLink {
                        producer,
                        consumer_class: class.clone(),
                        consumer,
                        kind,
                    });
                };
                for (r, name, _) in &m.field_refs {
                    if let Some(t) = self.receiver_type(fqn, m, r) {
                        if let Some(f) = self.field(&t, name) {
                            push(f.signature.clone(), m.signature.clone(), LinkKind::FieldUse);
                        }
                    }
                }
                for call in &m.calls {
                    if let Some(target) = self.call_target(fqn, m, call) {
                        push(target.signature.clone(), m.signature.clone(), LinkKind::MethodCall);
                        for (arg, p) in call.args.iter().zip(&target.params) {
                            if let Some(f) = self.field_read(fqn, m, arg) {
                                push(f, p.signature.clone(), LinkKind::ArgumentOf);
                            }
                        }
                    }
                }
                for sm in self.overridden(fqn, m) {
                    push(sm.signature.clone(), m.signature.clone(), LinkKind::Override);
                }
            }
        }
        links.into_iter().collect()
    }

    /// Class that declares a signature (its unit's class id).
    pub fn class_of_signature(&self, sig: &str) -> Option<&str> {
        if let Some(s) = self.sites.get(sig) {
            return Some(&s.class_id);
        }
        let owner = sig.split('#').next()?;
        self.class_of_type(owner)
    }

    /// Unordered class pairs with the names they share, keyed by (a, b), a < b.
    pub fn shared_symbols(&self) -> BTreeMap<(String, String), BTreeSet<String>> {
        let mut out: BTreeMap<(String, String), BTreeSet<String>> = BTreeMap::new();
        for l in &self.links {
            let Some(prod_class) = self.class_of_signature(&l.producer) else { continue };
            if prod_class == l.consumer_class {
                continue;
            }
            let key = if prod_class < l.consumer_class.as_str() {
                (prod_class.to_string(), l.consumer_class.clone())
            } else {
                (l.consumer_class.clone(), prod_class.to_string())
            };
            out.entry(key).or_default().insert(symbol_name(&l.producer).to_string());
        }
        out
    }
}

/// Simple identifier of a declaration signature.
pub fn symbol_name(sig: &str) -> &str {
    let member = sig.rsplit_once('#').map_or(sig, |(_, m)| m);
    let member = member.split(['(', '[', '$']).next().unwrap_or(member);
    member
}
