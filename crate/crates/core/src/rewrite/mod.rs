//! Writes decided predictions back into Java sources as annotations.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::infer::PredictionSet;
use crate::ingest::{erase_annotations, java_files, parse_unit, sha256_hex, AliasTable, ParsedUnit};

/// Project sources keyed by path relative to the project root.
pub type Sources = BTreeMap<String, String>;

pub const DEFAULT_ANNOTATION: &str = "javax.annotation.Nullable";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnnotationPosition {
    /// Directly before the declared type.
    #[default]
    TypeUse,
    /// Before the whole declaration, modifiers included.
    Declaration,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RewriteConfig {
    pub annotation: String,
    pub position: AnnotationPosition,
}

impl Default for RewriteConfig {
    fn default() -> Self {
        RewriteConfig {
            annotation: DEFAULT_ANNOTATION.to_string(),
            position: AnnotationPosition::TypeUse,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Insertion {
    pub offset: usize,
    pub text: String,
    /// Declarations this insertion annotates; empty for imports.
    pub signatures: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEdits {
    pub sha256: String,
    /// Sorted by descending offset.
    pub insertions: Vec<Insertion>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditPlan {
    pub annotation: String,
    pub files: BTreeMap<String, FileEdits>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl EditPlan {
    pub fn is_empty(&self) -> bool {
        self.files.is_empty()
    }

    pub fn insertion_count(&self) -> usize {
        self.files.values().map(|f| f.insertions.len()).sum()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plan serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::json("edit plan", e))
    }
}

fn simple_name(fqn: &str) -> &str {
    fqn.rsplit('.').next().unwrap_or(fqn)
}

/// Text to write for the annotation, and whether an import is needed.
fn annotation_spelling(unit: &ParsedUnit, fqn: &str) -> (String, bool) {
    let simple = simple_name(fqn);
    let package = fqn.rsplit_once('.').map(|(p, _)| p).unwrap_or("");
    if unit.imports.single.iter().any(|i| i == fqn)
        || unit.imports.on_demand.iter().any(|p| p == package)
        || unit.package.as_deref().unwrap_or("") == package
    {
        return (format!("@{simple} "), false);
    }
    let clash = unit.imports.single.iter().any(|i| simple_name(i) == simple)
        || unit.types.iter().any(|t| t.name == simple);
    if clash {
        (format!("@{fqn} "), false)
    } else {
        (format!("@{simple} "), true)
    }
}

fn import_insertion(unit: &ParsedUnit, fqn: &str) -> Insertion {
    let line = format!("import {fqn};");
    let (offset, text) = if let Some(last) = unit.import_decls.iter().map(|d| d.span.1).max() {
        (last, format!("\n{line}"))
    } else if let Some((_, end)) = unit.package_span {
        (end, format!("\n{line}"))
    } else {
        (0, format!("{line}\n"))
    };
    Insertion {
        offset,
        text,
        signatures: Vec::new(),
    }
}

/// One annotation per decided signature, at its annotation position, plus
/// at most one import per file.
pub fn plan_edits(p: &PredictionSet, sources: &Sources, alias: &AliasTable, cfg: &RewriteConfig) -> Result<EditPlan> {
    let mut by_file: BTreeMap<&str, Vec<(&str, (u32, u32))>> = BTreeMap::new();
    for (sig, e) in p.entries.iter().filter(|(_, e)| e.decided) {
        by_file
            .entry(e.anchor.file_path.as_str())
            .or_default()
            .push((sig.as_str(), e.anchor.byte_span));
    }
    let mut plan = EditPlan {
        annotation: cfg.annotation.clone(),
        files: BTreeMap::new(),
        provenance: None,
    };
    for (file, decided) in by_file {
        let text = sources
            .get(file)
            .ok_or_else(|| Error::StaleAnchor(format!("{file}: file not found")))?;
        let unit = parse_unit(file, text, alias)?;
        let sites: BTreeMap<&str, _> = unit.sites.iter().map(|s| (s.signature.as_str(), s)).collect();
        let decided_set: BTreeSet<&str> = decided.iter().map(|(s, _)| *s).collect();
        let (spelling, needs_import) = annotation_spelling(&unit, &cfg.annotation);
        let mut at: BTreeMap<usize, Vec<String>> = BTreeMap::new();
        for (sig, span) in &decided {
            let site = sites
                .get(sig)
                .ok_or_else(|| Error::StaleAnchor(format!("{file}: {sig} not declared")))?;
            if (site.decl_span.0 as u32, site.decl_span.1 as u32) != *span {
                return Err(Error::StaleAnchor(format!("{file}: {sig} moved")));
            }
            if site.labeled {
                continue;
            }
            let Some(type_span) = site.type_span else {
                return Err(Error::IllegalPosition(format!("{sig}: no written type to annotate")));
            };
            let offset = match cfg.position {
                AnnotationPosition::TypeUse => type_span.0,
                AnnotationPosition::Declaration => site.decl_span.0,
            };
            // declarators sharing one written type are annotated together
            let sharing: Vec<&str> = unit
                .sites
                .iter()
                .filter(|s| s.type_span == Some(type_span) && s.kind == site.kind)
                .map(|s| s.signature.as_str())
                .collect();
            if let Some(other) = sharing.iter().find(|s| !decided_set.contains(**s)) {
                return Err(Error::IllegalPosition(format!("{sig}: type shared with undecided {other}")));
            }
            if offset == 0 {
                return Err(Error::IllegalPosition(format!("{sig}: offset 0")));
            }
            at.entry(offset).or_default().push(sig.to_string());
        }
        if at.is_empty() {
            continue;
        }
        let mut insertions: Vec<Insertion> = at
            .into_iter()
            .map(|(offset, mut signatures)| {
                signatures.sort();
                Insertion {
                    offset,
                    text: spelling.clone(),
                    signatures,
                }
            })
            .collect();
        if needs_import {
            insertions.push(import_insertion(&unit, &cfg.annotation));
        }
        insertions.sort_by(|a, b| b.offset.cmp(&a.offset).then_with(|| a.signatures.cmp(&b.signatures)));
        plan.files.insert(
            file.to_string(),
            FileEdits {
                sha256: sha256_hex(text.as_bytes()),
                insertions,
            },
        );
    }
    Ok(plan)
}

fn apply_file(path: &str, text: &str, edits: &FileEdits) -> Result<String> {
    if sha256_hex(text.as_bytes()) != edits.sha256 {
        return Err(Error::HashMismatch(path.to_string()));
    }
    let mut out = text.to_string();
    for ins in &edits.insertions {
        if ins.offset > out.len() || !out.is_char_boundary(ins.offset) {
            return Err(Error::StaleAnchor(format!("{path}: offset {} out of range", ins.offset)));
        }
        out.insert_str(ins.offset, &ins.text);
    }
    crate::ingest::parse_tree(&out)?;
    Ok(out)
}

/// Applies a plan to in-memory sources; every file is checked before any is
/// changed.
pub fn apply_edits(plan: &EditPlan, sources: &Sources) -> Result<Sources> {
    let mut edited = BTreeMap::new();
    for (path, edits) in &plan.files {
        let text = sources
            .get(path)
            .ok_or_else(|| Error::StaleAnchor(format!("{path}: file not found")))?;
        edited.insert(path.clone(), apply_file(path, text, edits)?);
    }
    let mut out = sources.clone();
    out.extend(edited);
    Ok(out)
}

/// Applies a plan under `root`, replacing each file atomically.
pub fn apply_edits_in_dir(plan: &EditPlan, root: &Path) -> Result<Vec<String>> {
    let mut staged = Vec::new();
    for (path, edits) in &plan.files {
        let full = root.join(path);
        let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
        staged.push((full, apply_file(path, &text, edits)?));
    }
    let mut written = Vec::new();
    for (full, text) in staged {
        write_atomic(&full, &text)?;
        written.push(full.display().to_string());
    }
    Ok(written)
}

pub fn write_atomic(path: &Path, text: &str) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let werr = |e: std::io::Error| Error::Write {
        path: path.to_path_buf(),
        source: e,
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(werr)?;
    tmp.write_all(text.as_bytes()).map_err(werr)?;
    tmp.persist(path).map_err(|e| werr(e.error))?;
    Ok(())
}

/// Unified diffs of what `plan` would change.
pub fn dry_run_diff(plan: &EditPlan, sources: &Sources) -> Result<String> {
    let edited = apply_edits(plan, sources)?;
    Ok(sources_diff(sources, &edited))
}

/// Unified diffs between two versions of a source tree, for files in both.
pub fn sources_diff(before: &Sources, after: &Sources) -> String {
    let mut out = String::new();
    for (path, old) in before {
        let Some(new) = after.get(path).filter(|n| *n != old) else { continue };
        let diff = similar::TextDiff::from_lines(old, new);
        out.push_str(
            &diff
                .unified_diff()
                .context_radius(2)
                .header(&format!("a/{path}"), &format!("b/{path}"))
                .to_string(),
        );
    }
    out
}

pub fn read_sources(root: &Path) -> Result<Sources> {
    let mut out = BTreeMap::new();
    for rel in java_files(root)? {
        let full = root.join(&rel);
        let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
        out.insert(crate::ingest::rel_string(&rel), text);
    }
    Ok(out)
}

/// Erases every qualifier in a project; files that do not parse are kept
/// as they are.
pub fn erase_sources(sources: &Sources, alias: &AliasTable) -> Sources {
    sources
        .iter()
        .map(|(p, t)| {
            let erased = erase_annotations(t, alias).unwrap_or_else(|e| {
                log::warn!("{p}: left unchanged: {e}");
                t.clone()
            });
            (p.clone(), erased)
        })
        .collect()
}

pub fn write_sources(root: &Path, sources: &Sources) -> Result<()> {
    for (rel, text) in sources {
        let full = root.join(rel);
        if let Some(dir) = full.parent() {
            std::fs::create_dir_all(dir).map_err(|e| Error::Write {
                path: dir.to_path_buf(),
                source: e,
            })?;
        }
        write_atomic(&full, text)?;
    }
    Ok(())
}
