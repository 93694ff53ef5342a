use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::NodeKind;

/// Proof-based removals applied before any learned pruning.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Phase1Rule {
    /// Primitive and `void` type nodes.
    PrimitiveTypes,
    /// Unlabeled variable declarators and parameters of primitive type.
    PrimitiveDeclarations,
}

/// Which name nodes go along with a pruned statement subtree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NamePrune {
    /// Every name node linked to a removed node.
    #[default]
    Adjacent,
    /// Only name nodes all of whose uses were removed.
    Orphaned,
}

pub const STAGES: [&str; 5] = ["phase1", "phase2", "augment_names", "phase3", "encode"];

/// Node kinds whose removal hurt the preliminary model less than removing
/// random nodes, minus the label-bearing `VariableDeclarator`.
pub const DEFAULT_PHASE2_DROP: &[NodeKind] = &[
    NodeKind::InstanceOfExpr,
    NodeKind::ArrayInitializerExpr,
    NodeKind::TypeExpr,
    NodeKind::MethodCallExpr,
    NodeKind::ForStmt,
    NodeKind::UnaryExpr,
    NodeKind::VarType,
    NodeKind::NullLiteralExpr,
    NodeKind::NormalAnnotationExpr,
    NodeKind::IfStmt,
    NodeKind::LambdaExpr,
    NodeKind::ArrayCreationLevel,
    NodeKind::EnclosedExpr,
    NodeKind::BinaryExpr,
    NodeKind::ImportDeclaration,
    NodeKind::ExplCtorInvocStmt,
    NodeKind::ReturnStmt,
    NodeKind::TryStmt,
    NodeKind::ForEachStmt,
    NodeKind::IntegerLiteralExpr,
    NodeKind::WildcardType,
    NodeKind::ConstructorDeclaration,
    NodeKind::LineComment,
    NodeKind::ConditionalExpr,
    NodeKind::ObjectCreationExpr,
    NodeKind::ArrayType,
];

pub const DEFAULT_PHASE3_PRUNE: &[NodeKind] = &[
    NodeKind::ForStmt,
    NodeKind::BlockStmt,
    NodeKind::LocalClassDeclStmt,
    NodeKind::SynchronizedStmt,
    NodeKind::ForEachStmt,
    NodeKind::CatchClause,
    NodeKind::WhileStmt,
    NodeKind::LabeledStmt,
    NodeKind::AssertStmt,
    NodeKind::ThrowStmt,
];

pub const DEFAULT_NODE_CAP: usize = 8000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    pub phase1_rules: BTreeSet<Phase1Rule>,
    pub phase2_drop_kinds: BTreeSet<NodeKind>,
    pub phase3_prune_stmt_kinds: BTreeSet<NodeKind>,
    pub guard_kind: NodeKind,
    #[serde(default)]
    pub name_prune: NamePrune,
    #[serde(default = "default_cap")]
    pub node_cap: usize,
    #[serde(default = "default_stages")]
    pub stages: Vec<String>,
}

fn default_cap() -> usize {
    DEFAULT_NODE_CAP
}

fn default_stages() -> Vec<String> {
    STAGES.iter().map(|s| s.to_string()).collect()
}

impl Default for PruneConfig {
    fn default() -> Self {
        PruneConfig {
            phase1_rules: [Phase1Rule::PrimitiveTypes, Phase1Rule::PrimitiveDeclarations].into(),
            phase2_drop_kinds: DEFAULT_PHASE2_DROP.iter().copied().collect(),
            phase3_prune_stmt_kinds: DEFAULT_PHASE3_PRUNE.iter().copied().collect(),
            guard_kind: NodeKind::NullLiteralExpr,
            name_prune: NamePrune::Adjacent,
            node_cap: DEFAULT_NODE_CAP,
            stages: default_stages(),
        }
    }
}

impl PruneConfig {
    /// A configuration that changes nothing.
    pub fn identity() -> Self {
        PruneConfig {
            phase1_rules: BTreeSet::new(),
            phase2_drop_kinds: BTreeSet::new(),
            phase3_prune_stmt_kinds: BTreeSet::new(),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(k) = self.phase2_drop_kinds.iter().find(|k| k.may_carry_label()) {
            return Err(Error::Config(format!("phase 2 may not drop label-bearing kind {k}")));
        }
        if self.phase2_drop_kinds.contains(&NodeKind::NameNode) || self.phase2_drop_kinds.contains(&NodeKind::CompilationUnit) {
            return Err(Error::Config("phase 2 may not drop NameNode or CompilationUnit".into()));
        }
        if let Some(k) = self.phase3_prune_stmt_kinds.iter().find(|k| !k.is_statement()) {
            return Err(Error::Config(format!("{k} is not a statement kind")));
        }
        if self.stages != default_stages() {
            return Err(Error::Config(format!(
                "stage order must be {}, got {}",
                STAGES.join(" -> "),
                self.stages.join(" -> ")
            )));
        }
        if self.node_cap == 0 {
            return Err(Error::Config("node_cap must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: PruneConfig = serde_json::from_str(text).map_err(|e| Error::json("prune config", e))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Short content hash identifying the encoding this config produces.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        hex::encode(&Sha256::digest(canonical.as_bytes())[..8])
    }
}
