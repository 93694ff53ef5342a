use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::alias::AliasTable;
use super::graph::{Label, RawGraph};
use super::java::parse_unit;
use crate::error::{Error, Result};

pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeBounds {
    pub min_nodes: usize,
    pub max_nodes: usize,
}

impl Default for SizeBounds {
    fn default() -> Self {
        SizeBounds {
            min_nodes: 8,
            max_nodes: 40_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExclusionReason {
    NoLabels,
    TooSmall,
    TooLarge,
    ParseError,
    UnsupportedConstruct,
    IoError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassEntry {
    pub class_id: String,
    pub file_path: String,
    pub file_len: usize,
    pub sha256: String,
    pub node_count: usize,
    pub label_count: usize,
    /// Signatures of the declarations carrying a qualifier.
    pub nullable: Vec<String>,
    /// Signatures of every label-eligible declaration.
    pub eligible: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExcludedEntry {
    pub file_path: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class_id: Option<String>,
    pub reason: ExclusionReason,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub format_version: u32,
    pub root: String,
    pub size_bounds: SizeBounds,
    pub classes: Vec<ClassEntry>,
    pub excluded: Vec<ExcludedEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

impl CorpusManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        let m: CorpusManifest = serde_json::from_str(text).map_err(|e| Error::json("manifest", e))?;
        if m.format_version != MANIFEST_FORMAT_VERSION {
            return Err(Error::FormatVersion {
                found: m.format_version,
                expected: MANIFEST_FORMAT_VERSION,
            });
        }
        Ok(m)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    /// All ground-truth nullable signatures, sorted.
    pub fn truth(&self) -> Vec<String> {
        let mut out: Vec<String> = self.classes.iter().flat_map(|c| c.nullable.iter().cloned()).collect();
        out.sort();
        out.dedup();
        out
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Lists `.java` files below `root`, sorted, as paths relative to `root`.
pub fn java_files(root: &Path) -> Result<Vec<PathBuf>> {
    if !root.is_dir() {
        return Err(Error::io(
            root,
            std::io::Error::new(std::io::ErrorKind::NotFound, "not a readable directory"),
        ));
    }
    let mut out = Vec::new();
    for entry in walkdir::WalkDir::new(root).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(root).to_path_buf();
            Error::io(path, e.into())
        })?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|x| x == "java") {
            out.push(entry.path().strip_prefix(root).unwrap_or(entry.path()).to_path_buf());
        }
    }
    out.sort();
    Ok(out)
}

pub(crate) fn rel_string(p: &Path) -> String {
    p.components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Per-file outcome of a scan, before inclusion rules are applied.
pub enum ScannedFile {
    Parsed { entry: ClassEntry, graph: RawGraph },
    Failed(ExcludedEntry),
}

pub fn scan_file(root: &Path, rel: &Path, alias: &AliasTable) -> ScannedFile {
    let file_path = rel_string(rel);
    match std::fs::read_to_string(root.join(rel)) {
        Ok(text) => scan_source(&file_path, &text, alias),
        Err(e) => ScannedFile::Failed(ExcludedEntry {
            file_path,
            class_id: None,
            reason: ExclusionReason::IoError,
            detail: e.to_string(),
        }),
    }
}

/// Scans one file given its text.
pub fn scan_source(file_path: &str, text: &str, alias: &AliasTable) -> ScannedFile {
    match parse_unit(file_path, text, alias) {
        Ok(unit) => {
            let mut nullable = Vec::new();
            let mut eligible = Vec::new();
            for node in &unit.graph.nodes {
                if let (Some(label), Some(anchor)) = (node.label, &node.anchor) {
                    eligible.push(anchor.decl_signature.clone());
                    if label == Label::Nullable {
                        nullable.push(anchor.decl_signature.clone());
                    }
                }
            }
            nullable.sort();
            eligible.sort();
            ScannedFile::Parsed {
                entry: ClassEntry {
                    class_id: unit.graph.class_id.clone(),
                    file_path: file_path.to_string(),
                    file_len: text.len(),
                    sha256: sha256_hex(text.as_bytes()),
                    node_count: unit.graph.len(),
                    label_count: unit.graph.label_count,
                    nullable,
                    eligible,
                },
                graph: unit.graph,
            }
        }
        Err(e) => {
            let reason = match e {
                Error::UnsupportedConstruct(_) => ExclusionReason::UnsupportedConstruct,
                _ => ExclusionReason::ParseError,
            };
            ScannedFile::Failed(ExcludedEntry {
                file_path: file_path.to_string(),
                class_id: None,
                reason,
                detail: e.to_string(),
            })
        }
    }
}

/// Scans a source tree and sorts classes into included and excluded.
pub fn scan_corpus(root: &Path, alias: &AliasTable, bounds: SizeBounds) -> Result<CorpusManifest> {
    Ok(scan_corpus_graphs(root, alias, bounds)?.0)
}

/// Like [`scan_corpus`], also returning the graphs of included classes.
pub fn scan_corpus_graphs(
    root: &Path,
    alias: &AliasTable,
    bounds: SizeBounds,
) -> Result<(CorpusManifest, Vec<RawGraph>)> {
    let files = java_files(root)?;
    let scanned: Vec<ScannedFile> = files.par_iter().map(|rel| scan_file(root, rel, alias)).collect();
    Ok(classify(&root.display().to_string(), scanned, bounds))
}

/// Scans in-memory sources keyed by relative path.
pub fn scan_sources<'a>(
    root_label: &str,
    sources: impl IntoIterator<Item = (&'a String, &'a String)>,
    alias: &AliasTable,
    bounds: SizeBounds,
) -> (CorpusManifest, Vec<RawGraph>) {
    let sources: Vec<_> = sources.into_iter().collect();
    let scanned: Vec<ScannedFile> = sources.par_iter().map(|(p, t)| scan_source(p, t, alias)).collect();
    classify(root_label, scanned, bounds)
}

fn classify(root: &str, scanned: Vec<ScannedFile>, bounds: SizeBounds) -> (CorpusManifest, Vec<RawGraph>) {
    let mut classes = Vec::new();
    let mut graphs = Vec::new();
    let mut excluded = Vec::new();
    for s in scanned {
        match s {
            ScannedFile::Failed(x) => excluded.push(x),
            ScannedFile::Parsed { entry, graph } => {
                let reason = if entry.label_count == 0 {
                    Some(ExclusionReason::NoLabels)
                } else if entry.node_count < bounds.min_nodes {
                    Some(ExclusionReason::TooSmall)
                } else if entry.node_count > bounds.max_nodes {
                    Some(ExclusionReason::TooLarge)
                } else {
                    None
                };
                match reason {
                    Some(reason) => excluded.push(ExcludedEntry {
                        detail: format!("{} nodes, {} labels", entry.node_count, entry.label_count),
                        file_path: entry.file_path,
                        class_id: Some(entry.class_id),
                        reason,
                    }),
                    None => {
                        classes.push(entry);
                        graphs.push(graph);
                    }
                }
            }
        }
    }
    let manifest = CorpusManifest {
        format_version: MANIFEST_FORMAT_VERSION,
        root: root.to_string(),
        size_bounds: bounds,
        classes,
        excluded,
        provenance: None,
    };
    (manifest, graphs)
}
