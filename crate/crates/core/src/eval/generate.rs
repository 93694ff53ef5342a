//! Synthetic Java projects with known nullness ground truth.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{scan_sources, AliasTable, CorpusManifest, SizeBounds};
use crate::rewrite::Sources;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Pattern {
    /// A field that is assigned or compared against `null`.
    FieldNull,
    /// A parameter checked against `null` before use.
    CheckedParam,
    /// A nullable field exposed through a nullable getter.
    NullableGetter,
    /// Members that are never null.
    Plain,
    /// A nullable method overridden in a subclass.
    Inheritance,
}

impl Pattern {
    pub const ALL: [Pattern; 5] = [
        Pattern::FieldNull,
        Pattern::CheckedParam,
        Pattern::NullableGetter,
        Pattern::Plain,
        Pattern::Inheritance,
    ];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub classes: usize,
    /// Inclusive range of pattern instances per class.
    pub members: (usize, usize),
    pub weights: BTreeMap<Pattern, f64>,
    /// Number of packages the classes are spread over.
    #[serde(default = "default_packages")]
    pub packages: usize,
    /// Prefix of every generated package name.
    #[serde(default = "default_prefix")]
    pub package_prefix: String,
    pub seed: u64,
}

fn default_packages() -> usize {
    8
}

fn default_prefix() -> String {
    "gen".to_string()
}

impl GeneratorSpec {
    pub fn new(classes: usize, seed: u64) -> Self {
        GeneratorSpec {
            classes,
            members: (1, 3),
            weights: [
                (Pattern::FieldNull, 0.2),
                (Pattern::CheckedParam, 0.2),
                (Pattern::NullableGetter, 0.2),
                (Pattern::Plain, 0.25),
                (Pattern::Inheritance, 0.15),
            ]
            .into(),
            packages: default_packages(),
            package_prefix: default_prefix(),
            seed,
        }
    }

    pub fn only(pattern: Pattern, classes: usize, seed: u64) -> Self {
        GeneratorSpec {
            weights: [(pattern, 1.0)].into(),
            ..Self::new(classes, seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weights.values().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config("pattern weights must be finite and non-negative".into()));
        }
        if self.weights.values().sum::<f64>() <= 0.0 {
            return Err(Error::Config("pattern weights must not all be zero".into()));
        }
        if self.members.0 == 0 || self.members.0 > self.members.1 {
            return Err(Error::Config(format!("bad member range {:?}", self.members)));
        }
        if self.packages == 0 {
            return Err(Error::Config("packages must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GeneratorSpec = serde_json::from_str(text).map_err(|e| Error::json("generator spec", e))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedClass {
    pub class_id: String,
    pub file_path: String,
    pub pattern: Pattern,
    /// Nullable signatures as written by the generator.
    pub nullable: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct GeneratedCorpus {
    pub sources: Sources,
    pub classes: Vec<GeneratedClass>,
    pub manifest: CorpusManifest,
}

impl GeneratedCorpus {
    pub fn truth(&self) -> Vec<String> {
        let mut out: Vec<String> = self.classes.iter().flat_map(|c| c.nullable.iter().cloned()).collect();
        out.sort();
        out
    }

    pub fn write_to(&self, root: &std::path::Path) -> Result<()> {
        crate::rewrite::write_sources(root, &self.sources)
    }
}

/// Exact pattern counts by largest remainder, so proportions track the
/// weights as closely as the class count allows.
fn quotas(spec: &GeneratorSpec) -> Vec<Pattern> {
    let total: f64 = spec.weights.values().sum();
    let mut counts: Vec<(Pattern, usize, f64)> = spec
        .weights
        .iter()
        .map(|(p, w)| {
            let exact = w / total * spec.classes as f64;
            (*p, exact.floor() as usize, exact - exact.floor())
        })
        .collect();
    let assigned: usize = counts.iter().map(|c| c.1).sum();
    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| counts[b].2.total_cmp(&counts[a].2).then(a.cmp(&b)));
    for &i in order.iter().take(spec.classes - assigned) {
        counts[i].1 += 1;
    }
    counts.into_iter().flat_map(|(p, n, _)| std::iter::repeat(p).take(n)).collect()
}

const NOUNS: &[&str] = &[
    "label", "owner", "cache", "token", "parent", "title", "handler", "buffer", "target", "session", "prefix",
    "suffix", "comment", "region", "vendor", "detail", "source", "filter", "format", "lookup", "marker", "origin",
    "period", "record", "result", "schema", "status", "policy", "anchor", "header", "locale", "memo", "mirror",
    "note", "path", "query", "reason", "scope", "theme", "value",
];

const CLASS_WORDS: &[&str] = &[
    "Order", "Account", "Report", "Widget", "Invoice", "Ledger", "Profile", "Channel", "Catalog", "Shipment",
    "Ticket", "Module", "Session", "Entry", "Request",
];

const CLASS_ROLES: &[&str] = &["Service", "Store", "Model", "Builder", "Handler", "Registry", "View", "Record"];

const TYPES: &[(&str, &str)] = &[
    ("String", "String"),
    ("Object", "Object"),
    ("Integer", "Integer"),
    ("List<String>", "List"),
    ("Map<String, Integer>", "Map"),
    ("StringBuilder", "StringBuilder"),
];

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

struct ClassWriter<'a> {
    fqn: String,
    rng: &'a mut ChaCha8Rng,
    used: Vec<String>,
    body: Vec<String>,
    nullable: Vec<String>,
}

impl ClassWriter<'_> {
    fn fresh(&mut self) -> String {
        let free: Vec<&&str> = NOUNS.iter().filter(|n| !self.used.iter().any(|u| u == **n)).collect();
        let name = match free.choose(self.rng) {
            Some(n) => n.to_string(),
            None => format!("{}{}", NOUNS[self.rng.gen_range(0..NOUNS.len())], self.used.len()),
        };
        self.used.push(name.clone());
        name
    }

    fn ty(&mut self) -> (&'static str, &'static str) {
        TYPES[self.rng.gen_range(0..TYPES.len())]
    }

    fn line(&mut self, text: String) {
        self.body.push(text);
    }

    fn truth(&mut self, member: &str) {
        self.nullable.push(format!("{}#{member}", self.fqn));
    }

    fn field_null(&mut self) {
        let f = self.fresh();
        let cf = capitalize(&f);
        let (t, _) = self.ty();
        self.truth(&f);
        match self.rng.gen_range(0..3) {
            0 => {
                self.line(format!("  private @Nullable {t} {f};"));
                self.line(format!("  public void reset{cf}() {{ {f} = null; }}"));
                self.line(format!("  public boolean has{cf}() {{ return {f} != null; }}"));
            }
            1 => {
                self.line(format!("  protected @Nullable {t} {f} = null;"));
                self.line(format!("  void release{cf}() {{\n    synchronized (this) {{\n      {f} = null;\n    }}\n  }}"));
            }
            _ => {
                self.line(format!("  private @Nullable {t} {f};"));
                self.line(format!(
                    "  public String show{cf}() {{\n    if ({f} == null) {{\n      return \"-\";\n    }}\n    return {f}.toString();\n  }}"
                ));
            }
        }
    }

    fn checked_param(&mut self) {
        let p = self.fresh();
        let m = self.fresh();
        let (t, te) = self.ty();
        match self.rng.gen_range(0..4) {
            0 => {
                let fb = self.fresh();
                self.truth(&format!("describe{}({te},String)[0]", capitalize(&m)));
                self.line(format!(
                    "  public String describe{}(@Nullable {t} {p}, String {fb}) {{\n    if ({p} == null) {{\n      return {fb};\n    }}\n    return {p}.toString();\n  }}",
                    capitalize(&m)
                ));
            }
            1 => {
                self.truth(&format!("log{}({te})[0]", capitalize(&m)));
                self.line(format!(
                    "  public void log{}(@Nullable {t} {p}) {{\n    if ({p} != null) {{\n      System.out.println({p});\n    }}\n  }}",
                    capitalize(&m)
                ));
            }
            2 => {
                self.truth(&format!("count{}(List)[0]", capitalize(&m)));
                self.line(format!(
                    "  public int count{}(@Nullable List<String> {p}) {{\n    return {p} == null ? 0 : {p}.size();\n  }}",
                    capitalize(&m)
                ));
            }
            _ => {
                self.truth(&format!("accept{}({te})[0]", capitalize(&m)));
                self.line(format!(
                    "  public boolean accept{}(@Nullable {t} {p}) {{\n    return {p} != null && {p}.hashCode() > 0;\n  }}",
                    capitalize(&m)
                ));
            }
        }
    }

    fn nullable_getter(&mut self) {
        let f = self.fresh();
        let cf = capitalize(&f);
        let (t, _) = self.ty();
        self.truth(&f);
        self.line(format!("  private @Nullable {t} {f};"));
        match self.rng.gen_range(0..3) {
            0 => {
                self.truth(&format!("get{cf}()"));
                self.line(format!("  public @Nullable {t} get{cf}() {{\n    return {f};\n  }}"));
                self.line(format!("  public void clear{cf}() {{ {f} = null; }}"));
            }
            1 => {
                self.truth(&format!("peek{cf}()"));
                self.line(format!(
                    "  public @Nullable {t} peek{cf}() {{\n    if ({f} == null) {{\n      return null;\n    }}\n    return {f};\n  }}"
                ));
            }
            _ => {
                self.truth(&format!("current{cf}()"));
                self.line(format!(
                    "  public @Nullable {t} current{cf}() {{\n    try {{\n      return {f};\n    }} finally {{\n      {f} = null;\n    }}\n  }}"
                ));
            }
        }
    }

    fn plain(&mut self) {
        let f = self.fresh();
        let cf = capitalize(&f);
        let (t, _) = self.ty();
        match self.rng.gen_range(0..4) {
            0 => {
                self.line(format!("  private {t} {f};"));
                self.line(format!("  public {t} get{cf}() {{\n    return {f};\n  }}"));
                self.line(format!("  public void set{cf}({t} {f}) {{\n    this.{f} = {f};\n  }}"));
            }
            1 => {
                let v = self.fresh();
                self.line(format!(
                    "  public String format{cf}({t} {v}) {{\n    return String.valueOf({v});\n  }}"
                ));
            }
            2 => {
                self.line(format!("  private final List<String> {f} = new ArrayList<>();"));
                self.line(format!("  public List<String> list{cf}() {{\n    return {f};\n  }}"));
            }
            _ => {
                let v = self.fresh();
                self.line(format!("  private final StringBuilder {f} = new StringBuilder();"));
                self.line(format!(
                    "  public StringBuilder append{cf}(String {v}) {{\n    for (int i = 0; i < 2; i++) {{\n      {f}.append({v});\n    }}\n    return {f};\n  }}"
                ));
            }
        }
    }

    /// The base half of an inheritance pair; returns the noun naming it.
    fn inheritance_base(&mut self) -> String {
        let f = self.fresh();
        let cf = capitalize(&f);
        self.line(format!("  protected Object {f} = new Object();"));
        self.line(format!("  public Object get{cf}() {{\n    return {f};\n  }}"));
        self.truth(&format!("resolve{cf}()"));
        self.line(format!(
            "  public @Nullable Object resolve{cf}() {{\n    if ({f} instanceof String) {{\n      return null;\n    }}\n    return {f};\n  }}"
        ));
        f
    }

    fn inheritance_override(&mut self, noun: &str) {
        self.used.push(noun.to_string());
        let method = format!("resolve{}", capitalize(noun));
        self.truth(&format!("{method}()"));
        self.line(format!("  @Override\n  public @Nullable Object {method}() {{\n    return null;\n  }}"));
    }
}

/// Generates a project from `spec`; the ground truth of every class is the
/// set of signatures written with the qualifier.
pub fn generate_corpus(spec: &GeneratorSpec) -> Result<GeneratedCorpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut patterns = quotas(spec);
    patterns.shuffle(&mut rng);

    let mut sources = Sources::new();
    let mut classes = Vec::new();
    // most recent inheritance base per package: (class name, noun)
    let mut bases: BTreeMap<usize, (String, String)> = BTreeMap::new();
    for (i, &pattern) in patterns.iter().enumerate() {
        let pkg_no = rng.gen_range(0..spec.packages);
        let package = format!("{}.p{pkg_no}", spec.package_prefix);
        let name = format!(
            "{}{}{i}",
            CLASS_WORDS[rng.gen_range(0..CLASS_WORDS.len())],
            CLASS_ROLES[rng.gen_range(0..CLASS_ROLES.len())]
        );
        let fqn = format!("{package}.{name}");
        let instances = rng.gen_range(spec.members.0..=spec.members.1);
        let mut w = ClassWriter {
            fqn: fqn.clone(),
            rng: &mut rng,
            used: Vec::new(),
            body: Vec::new(),
            nullable: Vec::new(),
        };
        let mut extends = None;
        match pattern {
            Pattern::Inheritance => {
                if let Some((base, noun)) = bases.get(&pkg_no).cloned() {
                    w.inheritance_override(&noun);
                    extends = Some(base);
                }
                let m = w.inheritance_base();
                for _ in 1..instances {
                    w.plain();
                }
                bases.insert(pkg_no, (name.clone(), m));
            }
            _ => {
                for _ in 0..instances {
                    match pattern {
                        Pattern::FieldNull => w.field_null(),
                        Pattern::CheckedParam => w.checked_param(),
                        Pattern::NullableGetter => w.nullable_getter(),
                        _ => w.plain(),
                    }
                }
                if pattern != Pattern::Plain {
                    w.plain();
                }
            }
        }
        let mut nullable = std::mem::take(&mut w.nullable);
        nullable.sort();
        let body = w.body.join("\n\n");
        let header = match &extends {
            Some(base) => format!("public class {name} extends {base}"),
            None => format!("public class {name}"),
        };
        let text = format!(
            "package {package};\n\nimport java.util.ArrayList;\nimport java.util.List;\nimport java.util.Map;\nimport javax.annotation.Nullable;\n\n{header} {{\n\n{body}\n}}\n"
        );
        let file_path = format!("{}/{name}.java", package.replace('.', "/"));
        sources.insert(file_path.clone(), text);
        classes.push(GeneratedClass {
            class_id: fqn,
            file_path,
            pattern,
            nullable,
        });
    }
    classes.sort_by(|a, b| a.class_id.cmp(&b.class_id));
    let (manifest, _) = scan_sources(
        &format!("generated:{}", spec.seed),
        &sources,
        &AliasTable::default(),
        SizeBounds::default(),
    );
    Ok(GeneratedCorpus {
        sources,
        classes,
        manifest,
    })
}

/// Relative frequency of each pattern among the generated classes.
pub fn pattern_frequencies(classes: &[GeneratedClass]) -> BTreeMap<Pattern, f64> {
    let mut out: BTreeMap<Pattern, f64> = BTreeMap::new();
    for c in classes {
        *out.entry(c.pattern).or_default() += 1.0;
    }
    for v in out.values_mut() {
        *v /= classes.len().max(1) as f64;
    }
    out
}
