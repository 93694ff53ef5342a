use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::NodeKind;

/// Java modifier keywords, kept as bits on the node they modify.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, PartialOrd, Ord)]
pub struct Modifiers(u16);

impl Modifiers {
    pub const NAMES: [&'static str; 12] = [
        "public",
        "private",
        "protected",
        "static",
        "final",
        "abstract",
        "synchronized",
        "transient",
        "volatile",
        "native",
        "default",
        "strictfp",
    ];

    pub const COUNT: usize = Self::NAMES.len();

    pub fn empty() -> Self {
        Modifiers(0)
    }

    pub fn from_keyword(word: &str) -> Option<usize> {
        Self::NAMES.iter().position(|n| *n == word)
    }

    pub fn with(mut self, word: &str) -> Self {
        if let Some(bit) = Self::from_keyword(word) {
            self.0 |= 1 << bit;
        }
        self
    }

    pub fn insert_bit(&mut self, bit: usize) {
        self.0 |= 1 << bit;
    }

    pub fn contains(&self, word: &str) -> bool {
        Self::from_keyword(word).is_some_and(|bit| self.0 & (1 << bit) != 0)
    }

    pub fn is_empty(&self) -> bool {
        self.0 == 0
    }

    /// Indices of the set bits, ascending.
    pub fn bits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..Self::COUNT).filter(move |b| self.0 & (1 << b) != 0)
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.bits().map(|b| Self::NAMES[b]).collect()
    }
}

impl Serialize for Modifiers {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.names().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Modifiers {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let words = Vec::<String>::deserialize(d)?;
        let mut m = Modifiers::empty();
        for w in words {
            let bit = Modifiers::from_keyword(&w)
                .ok_or_else(|| serde::de::Error::custom(format!("unknown modifier '{w}'")))?;
            m.insert_bit(bit);
        }
        Ok(m)
    }
}

/// Ground-truth qualifier on a label-eligible declaration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    Nullable,
    NotNullable,
}

/// Where a declaration lives in its source file.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SourceAnchor {
    pub file_path: String,
    /// Half-open byte range of the declaration.
    pub byte_span: (u32, u32),
    pub decl_signature: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawNode {
    pub id: u32,
    pub kind: NodeKind,
    #[serde(default)]
    pub modifiers: Modifiers,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<SourceAnchor>,
    /// `Some` exactly on label-eligible declarations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    /// Erased declared type of a field, parameter or method return.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub decl_type: Option<String>,
    /// Id assigned at ingestion; survives re-numbering by the pruning phases.
    /// Absent on synthesized name nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub origin: Option<u32>,
}

impl RawNode {
    pub fn new(id: u32, kind: NodeKind) -> Self {
        RawNode {
            id,
            kind,
            modifiers: Modifiers::empty(),
            name: None,
            anchor: None,
            label: None,
            decl_type: None,
            origin: Some(id),
        }
    }

    pub fn is_labeled(&self) -> bool {
        self.label.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EdgeKind {
    ParentChild,
    ChildParent,
    NameUse,
    UseName,
}

impl EdgeKind {
    pub const ALL: [EdgeKind; 4] = [
        EdgeKind::ParentChild,
        EdgeKind::ChildParent,
        EdgeKind::NameUse,
        EdgeKind::UseName,
    ];

    pub fn reverse(self) -> EdgeKind {
        match self {
            EdgeKind::ParentChild => EdgeKind::ChildParent,
            EdgeKind::ChildParent => EdgeKind::ParentChild,
            EdgeKind::NameUse => EdgeKind::UseName,
            EdgeKind::UseName => EdgeKind::NameUse,
        }
    }

    pub fn is_name_edge(self) -> bool {
        matches!(self, EdgeKind::NameUse | EdgeKind::UseName)
    }
}

impl fmt::Display for EdgeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge(pub u32, pub u32, pub EdgeKind);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawGraph {
    pub class_id: String,
    pub nodes: Vec<RawNode>,
    pub edges: Vec<Edge>,
    pub label_count: usize,
}

/// Adjacency view of a graph used by the transformation passes.
#[derive(Debug, Clone)]
pub struct TreeView {
    pub parent: Vec<Option<u32>>,
    pub children: Vec<Vec<u32>>,
    /// (name node, use node) pairs.
    pub name_links: Vec<(u32, u32)>,
}

impl TreeView {
    /// `root` itself plus every node below it.
    pub fn subtree(&self, root: u32) -> Vec<u32> {
        let mut out = Vec::new();
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            out.push(n);
            stack.extend(self.children[n as usize].iter().rev().copied());
        }
        out
    }
}

impl RawGraph {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edge_count(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.2 == kind).count()
    }

    pub fn view(&self) -> TreeView {
        let n = self.nodes.len();
        let mut parent = vec![None; n];
        let mut children = vec![Vec::new(); n];
        let mut name_links = Vec::new();
        for &Edge(s, d, k) in &self.edges {
            match k {
                EdgeKind::ParentChild => {
                    parent[d as usize] = Some(s);
                    children[s as usize].push(d);
                }
                EdgeKind::NameUse => name_links.push((s, d)),
                _ => {}
            }
        }
        for c in &mut children {
            c.sort_unstable();
        }
        TreeView {
            parent,
            children,
            name_links,
        }
    }

    /// Rebuilds a graph from a subset of `nodes` (indexed by current id).
    ///
    /// `parent` gives each kept node's parent in current ids (which must itself
    /// be kept); `name_links` pairs whose endpoints are both kept survive. Ids
    /// are re-densified in the original order and edges are emitted in a
    /// canonical order so equal graphs serialize to equal bytes.
    pub fn rebuild(
        class_id: &str,
        nodes: &[RawNode],
        keep: &[bool],
        parent: &[Option<u32>],
        name_links: &[(u32, u32)],
    ) -> RawGraph {
        let mut remap = vec![u32::MAX; nodes.len()];
        let mut out_nodes = Vec::with_capacity(nodes.len());
        for (i, node) in nodes.iter().enumerate() {
            if keep[i] {
                remap[i] = out_nodes.len() as u32;
                let mut n = node.clone();
                n.id = remap[i];
                out_nodes.push(n);
            }
        }
        let mut pc = Vec::new();
        for (i, p) in parent.iter().enumerate() {
            if !keep[i] {
                continue;
            }
            if let Some(p) = p {
                debug_assert!(keep[*p as usize], "parent of kept node must be kept");
                pc.push((remap[*p as usize], remap[i]));
            }
        }
        let mut nl: Vec<(u32, u32)> = name_links
            .iter()
            .filter(|(a, b)| keep[*a as usize] && keep[*b as usize])
            .map(|(a, b)| (remap[*a as usize], remap[*b as usize]))
            .collect();
        pc.sort_unstable();
        nl.sort_unstable();
        nl.dedup();
        RawGraph::assemble(class_id.to_string(), out_nodes, &pc, &nl)
    }

    pub(crate) fn assemble(
        class_id: String,
        nodes: Vec<RawNode>,
        parent_child: &[(u32, u32)],
        name_links: &[(u32, u32)],
    ) -> RawGraph {
        let mut edges = Vec::with_capacity(2 * (parent_child.len() + name_links.len()));
        edges.extend(parent_child.iter().map(|&(p, c)| Edge(p, c, EdgeKind::ParentChild)));
        let mut rev: Vec<_> = parent_child.iter().map(|&(p, c)| (c, p)).collect();
        rev.sort_unstable();
        edges.extend(rev.into_iter().map(|(c, p)| Edge(c, p, EdgeKind::ChildParent)));
        edges.extend(name_links.iter().map(|&(n, u)| Edge(n, u, EdgeKind::NameUse)));
        let mut rev: Vec<_> = name_links.iter().map(|&(n, u)| (u, n)).collect();
        rev.sort_unstable();
        edges.extend(rev.into_iter().map(|(u, n)| Edge(u, n, EdgeKind::UseName)));
        let label_count = nodes
            .iter()
            .filter(|n| n.label == Some(super::Label::Nullable))
            .count();
        RawGraph {
            class_id,
            nodes,
            edges,
            label_count,
        }
    }

    /// Checks the structural invariants every graph in the pipeline must keep.
    pub fn validate(&self) -> Result<(), String> {
        let n = self.nodes.len() as u32;
        for (i, node) in self.nodes.iter().enumerate() {
            if node.id != i as u32 {
                return Err(format!("node at position {i} has id {}", node.id));
            }
        }
        let mut by_kind: [BTreeSet<(u32, u32)>; 4] = Default::default();
        for &Edge(s, d, k) in &self.edges {
            if s >= n || d >= n {
                return Err(format!("edge ({s},{d},{k}) has an invalid endpoint"));
            }
            if !by_kind[k as usize].insert((s, d)) {
                return Err(format!("duplicate edge ({s},{d},{k})"));
            }
            if k.is_name_edge() {
                let (name, user) = if k == EdgeKind::NameUse { (s, d) } else { (d, s) };
                if self.nodes[name as usize].kind != NodeKind::NameNode {
                    return Err(format!("name edge ({s},{d},{k}) does not start at a name node"));
                }
                if self.nodes[user as usize].kind == NodeKind::NameNode {
                    return Err(format!("name edge ({s},{d},{k}) links two name nodes"));
                }
            } else if self.nodes[s as usize].kind == NodeKind::NameNode
                || self.nodes[d as usize].kind == NodeKind::NameNode
            {
                return Err(format!("tree edge ({s},{d},{k}) touches a name node"));
            }
        }
        for k in [EdgeKind::ParentChild, EdgeKind::NameUse] {
            let fwd = &by_kind[k as usize];
            let back = &by_kind[k.reverse() as usize];
            if fwd.len() != back.len() || fwd.iter().any(|(a, b)| !back.contains(&(*b, *a))) {
                return Err(format!("{k} edges are not exactly reversed"));
            }
        }
        // forest: at most one parent, no cycles
        let mut parent = vec![None; n as usize];
        for &(p, c) in &by_kind[EdgeKind::ParentChild as usize] {
            if parent[c as usize].replace(p).is_some() {
                return Err(format!("node {c} has two parents"));
            }
        }
        for start in 0..n as usize {
            let mut cur = parent[start];
            let mut steps = 0;
            while let Some(p) = cur {
                steps += 1;
                if steps > n {
                    return Err(format!("cycle through node {start}"));
                }
                cur = parent[p as usize];
            }
        }
        let labels = self
            .nodes
            .iter()
            .filter(|x| x.label == Some(super::Label::Nullable))
            .count();
        if labels != self.label_count {
            return Err(format!("label_count {} but {labels} labeled nodes", self.label_count));
        }
        Ok(())
    }
}
