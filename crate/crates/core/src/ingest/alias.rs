use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Fully-qualified annotation names that all mean "may be null".
///
/// Reconstructed from the common nullness-annotation families (JSR-305,
/// Android, Checker Framework, JetBrains, JSpecify, Eclipse, Spring, ...).
pub const DEFAULT_ALIASES: &[&str] = &[
    "android.annotation.Nullable",
    "android.support.annotation.Nullable",
    "androidx.annotation.Nullable",
    "androidx.annotation.RecentlyNullable",
    "com.android.annotations.Nullable",
    "com.google.api.server.spi.config.Nullable",
    "com.mongodb.lang.Nullable",
    "com.sun.istack.internal.Nullable",
    "edu.umd.cs.findbugs.annotations.CheckForNull",
    "edu.umd.cs.findbugs.annotations.Nullable",
    "edu.umd.cs.findbugs.annotations.PossiblyNull",
    "io.micrometer.core.lang.Nullable",
    "io.micronaut.core.annotation.Nullable",
    "io.reactivex.annotations.Nullable",
    "io.reactivex.rxjava3.annotations.Nullable",
    "jakarta.annotation.Nullable",
    "javax.annotation.CheckForNull",
    "javax.annotation.Nullable",
    "libcore.util.Nullable",
    "org.apache.avro.reflect.Nullable",
    "org.checkerframework.checker.nullness.compatqual.NullableDecl",
    "org.checkerframework.checker.nullness.compatqual.NullableType",
    "org.checkerframework.checker.nullness.qual.Nullable",
    "org.codehaus.commons.nullanalysis.Nullable",
    "org.eclipse.jdt.annotation.Nullable",
    "org.eclipse.jgit.annotations.Nullable",
    "org.jetbrains.annotations.Nullable",
    "org.jspecify.annotations.Nullable",
    "org.jspecify.nullness.Nullable",
    "org.netbeans.api.annotations.common.CheckForNull",
    "org.netbeans.api.annotations.common.NullAllowed",
    "org.springframework.lang.Nullable",
    "reactor.util.annotation.Nullable",
];

/// Imports visible in a compilation unit.
#[derive(Debug, Clone, Default)]
pub struct Imports {
    /// Single-type imports, fully qualified.
    pub single: Vec<String>,
    /// Packages imported on demand (`import a.b.*;`), without the `.*`.
    pub on_demand: Vec<String>,
}

impl Imports {
    /// The fully-qualified name a simple type name refers to, if imported.
    pub fn resolve(&self, simple: &str) -> Option<&str> {
        self.single
            .iter()
            .find(|fq| fq.rsplit('.').next() == Some(simple))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AliasTable {
    entries: BTreeSet<String>,
}

impl Default for AliasTable {
    fn default() -> Self {
        AliasTable {
            entries: DEFAULT_ALIASES.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl AliasTable {
    pub fn new<I, S>(entries: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: BTreeSet<String> = entries.into_iter().map(Into::into).collect();
        if entries.is_empty() {
            return Err(Error::Config("alias table must not be empty".into()));
        }
        Ok(AliasTable { entries })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let list: Vec<String> =
            serde_json::from_str(text).map_err(|e| Error::json("alias table", e))?;
        Self::new(list)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn entries(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(String::as_str)
    }

    pub fn contains_fqn(&self, fqn: &str) -> bool {
        self.entries.contains(fqn)
    }

    /// Whether an annotation written as `name` (simple or qualified) refers to
    /// a nullness qualifier under the given imports.
    pub fn matches(&self, name: &str, imports: &Imports) -> bool {
        if name.contains('.') {
            return self.contains_fqn(name);
        }
        if let Some(fq) = imports.resolve(name) {
            return self.contains_fqn(fq);
        }
        imports
            .on_demand
            .iter()
            .any(|pkg| self.contains_fqn(&format!("{pkg}.{name}")))
    }
}
