use std::collections::{BTreeMap, HashMap};

use super::config::{NamePrune, Phase1Rule, PruneConfig};
use crate::ingest::{is_primitive, NodeKind, RawGraph, RawNode};

/// Keeps the nodes flagged in `keep`, attaching each kept node to its
/// nearest kept ancestor. Name links survive when both ends are kept.
pub fn retain(g: &RawGraph, keep: &[bool]) -> RawGraph {
    let view = g.view();
    let mut parent = vec![None; g.len()];
    for i in 0..g.len() {
        if !keep[i] {
            continue;
        }
        let mut cur = view.parent[i];
        while let Some(p) = cur {
            if keep[p as usize] {
                break;
            }
            cur = view.parent[p as usize];
        }
        parent[i] = cur;
    }
    RawGraph::rebuild(&g.class_id, &g.nodes, keep, &parent, &view.name_links)
}

fn matches_phase1(node: &RawNode, rules: &std::collections::BTreeSet<Phase1Rule>) -> bool {
    use NodeKind as K;
    let prim_type = matches!(node.kind, K::PrimitiveType | K::VoidType);
    let prim_decl = matches!(node.kind, K::VariableDeclarator | K::Parameter)
        && node.label.is_none()
        && node.decl_type.as_deref().is_some_and(is_primitive);
    (rules.contains(&Phase1Rule::PrimitiveTypes) && prim_type)
        || (rules.contains(&Phase1Rule::PrimitiveDeclarations) && prim_decl)
}

/// Removes nodes that provably cannot hold the qualifier.
pub fn phase1_prune(g: &RawGraph, cfg: &PruneConfig) -> RawGraph {
    if cfg.phase1_rules.is_empty() {
        return g.clone();
    }
    let keep: Vec<bool> = g.nodes.iter().map(|n| !matches_phase1(n, &cfg.phase1_rules)).collect();
    retain(g, &keep)
}

/// Drops every node of a configured kind, reconnecting its children upward.
/// Labeled nodes are never dropped.
pub fn phase2_prune(g: &RawGraph, cfg: &PruneConfig) -> RawGraph {
    let keep: Vec<bool> = g
        .nodes
        .iter()
        .map(|n| n.is_labeled() || !cfg.phase2_drop_kinds.contains(&n.kind))
        .collect();
    retain(g, &keep)
}

/// Adds one name node per distinct identifier, linked to every node that
/// bears the identifier.
pub fn augment_names(g: &RawGraph) -> RawGraph {
    let view = g.view();
    let mut existing: BTreeMap<String, u32> = BTreeMap::new();
    for n in &g.nodes {
        if n.kind == NodeKind::NameNode {
            if let Some(name) = &n.name {
                existing.insert(name.clone(), n.id);
            }
        }
    }
    let mut uses: BTreeMap<&str, Vec<u32>> = BTreeMap::new();
    for n in &g.nodes {
        if n.kind != NodeKind::NameNode {
            if let Some(name) = &n.name {
                uses.entry(name.as_str()).or_default().push(n.id);
            }
        }
    }
    if uses.is_empty() {
        return g.clone();
    }
    let mut nodes = g.nodes.clone();
    let mut links = view.name_links.clone();
    for (name, users) in uses {
        let id = match existing.get(name) {
            Some(id) => *id,
            None => {
                let id = nodes.len() as u32;
                let mut node = RawNode::new(id, NodeKind::NameNode);
                node.name = Some(name.to_string());
                node.origin = None;
                nodes.push(node);
                id
            }
        };
        links.extend(users.into_iter().map(|u| (id, u)));
    }
    let keep = vec![true; nodes.len()];
    let mut parent = view.parent.clone();
    parent.resize(nodes.len(), None);
    RawGraph::rebuild(&g.class_id, &nodes, &keep, &parent, &links)
}

/// For every original-graph node, whether its subtree contains `guard`.
fn guarded_origins(original: &RawGraph, guard: NodeKind) -> HashMap<u32, bool> {
    let view = original.view();
    let mut has = vec![false; original.len()];
    // children always have larger ids than parents in ingested graphs, but
    // do not rely on it: process in reverse topological order
    let mut order = Vec::with_capacity(original.len());
    let roots: Vec<u32> = (0..original.len() as u32)
        .filter(|&i| view.parent[i as usize].is_none())
        .collect();
    for r in roots {
        order.extend(view.subtree(r));
    }
    for &i in order.iter().rev() {
        let mut h = original.nodes[i as usize].kind == guard;
        for &c in &view.children[i as usize] {
            h |= has[c as usize];
        }
        has[i as usize] = h;
    }
    original
        .nodes
        .iter()
        .filter_map(|n| n.origin.map(|o| (o, has[n.id as usize])))
        .collect()
}

/// Prunes guard-free statement subtrees together with the name nodes that
/// hang off them. `original` is the graph before phase 2.
pub fn phase3_prune(g: &RawGraph, original: &RawGraph, cfg: &PruneConfig) -> RawGraph {
    if cfg.phase3_prune_stmt_kinds.is_empty() {
        return g.clone();
    }
    let guarded = guarded_origins(original, cfg.guard_kind);
    let roots: Vec<bool> = g
        .nodes
        .iter()
        .map(|n| {
            cfg.phase3_prune_stmt_kinds.contains(&n.kind)
                && !n.origin.and_then(|o| guarded.get(&o).copied()).unwrap_or(true)
        })
        .collect();
    remove_subtrees(g, &roots, cfg.name_prune)
}

/// Statement nodes of `g` eligible for subtree pruning: no guard node below
/// them in `original`.
pub fn unguarded_statements(g: &RawGraph, original: &RawGraph, guard: NodeKind) -> Vec<u32> {
    let guarded = guarded_origins(original, guard);
    g.nodes
        .iter()
        .filter(|n| n.kind.is_statement() && !n.origin.and_then(|o| guarded.get(&o).copied()).unwrap_or(true))
        .map(|n| n.id)
        .collect()
}

/// Removes the subtrees rooted at `roots` (sparing labeled nodes and their
/// ancestors) and the name nodes attached to removed uses.
pub fn remove_subtrees(g: &RawGraph, roots: &[bool], name_prune: NamePrune) -> RawGraph {
    let view = g.view();
    let mut protected = vec![false; g.len()];
    for n in &g.nodes {
        if n.is_labeled() {
            let mut cur = Some(n.id);
            while let Some(c) = cur {
                if protected[c as usize] {
                    break;
                }
                protected[c as usize] = true;
                cur = view.parent[c as usize];
            }
        }
    }

    let mut removed = vec![false; g.len()];
    for n in &g.nodes {
        if !roots[n.id as usize] {
            continue;
        }
        for m in view.subtree(n.id) {
            if !protected[m as usize] {
                removed[m as usize] = true;
            }
        }
    }

    let mut uses_total: HashMap<u32, usize> = HashMap::new();
    let mut uses_removed: HashMap<u32, usize> = HashMap::new();
    for &(name, user) in &view.name_links {
        *uses_total.entry(name).or_default() += 1;
        if removed[user as usize] {
            *uses_removed.entry(name).or_default() += 1;
        }
    }
    for (name, total) in uses_total {
        let gone = uses_removed.get(&name).copied().unwrap_or(0);
        let drop = match name_prune {
            NamePrune::Adjacent => gone > 0,
            NamePrune::Orphaned => gone == total,
        };
        if drop {
            removed[name as usize] = true;
        }
    }
    let keep: Vec<bool> = removed.iter().map(|r| !r).collect();
    retain(g, &keep)
}

/// All graph stages before feature encoding, in their fixed order.
pub fn prune_pipeline(raw: &RawGraph, cfg: &PruneConfig) -> RawGraph {
    let p1 = phase1_prune(raw, cfg);
    let p2 = phase2_prune(&p1, cfg);
    let aug = augment_names(&p2);
    phase3_prune(&aug, &p1, cfg)
}
