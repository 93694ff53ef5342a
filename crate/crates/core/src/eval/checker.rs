use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;
use std::path::Path;
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{java_files, parse_unit, AliasTable, Expr, Receiver};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckerConfig {
    /// Shell command; `{project_dir}` is replaced by the quoted project path.
    pub checker_cmd: String,
    pub warning_pattern: String,
    #[serde(default = "default_timeout")]
    pub timeout_seconds: u64,
}

fn default_timeout() -> u64 {
    600
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Checker {
    /// The built-in approximation of a nullness checker.
    Stub,
    Command(CheckerConfig),
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

/// Number of warnings the checker reports for the project.
pub fn count_warnings(project_dir: &Path, checker: &Checker, alias: &AliasTable) -> Result<usize> {
    match checker {
        Checker::Stub => Ok(stub_warnings(project_dir, alias)?.len()),
        Checker::Command(cfg) => run_command(project_dir, cfg),
    }
}

fn run_command(project_dir: &Path, cfg: &CheckerConfig) -> Result<usize> {
    if cfg.checker_cmd.trim().is_empty() {
        return Err(Error::MissingChecker("empty checker command".into()));
    }
    let pattern = Regex::new(&cfg.warning_pattern)
        .map_err(|e| Error::Config(format!("bad warning pattern: {e}")))?;
    let cmd = cfg
        .checker_cmd
        .replace("{project_dir}", &shell_quote(&project_dir.display().to_string()));
    let mut child = Command::new("sh")
        .arg("-c")
        .arg(&cmd)
        .stdin(Stdio::null())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| Error::MissingChecker(format!("{cmd}: {e}")))?;
    let mut readers = Vec::new();
    for mut stream in [
        child.stdout.take().map(|s| Box::new(s) as Box<dyn Read + Send>),
        child.stderr.take().map(|s| Box::new(s) as Box<dyn Read + Send>),
    ]
    .into_iter()
    .flatten()
    {
        readers.push(std::thread::spawn(move || {
            let mut buf = String::new();
            let _ = stream.read_to_string(&mut buf);
            buf
        }));
    }
    let deadline = Instant::now() + Duration::from_secs(cfg.timeout_seconds);
    let status = loop {
        if let Some(status) = child.try_wait().map_err(|e| Error::CheckerFailed(e.to_string()))? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            return Err(Error::CheckerFailed(format!("timed out after {}s", cfg.timeout_seconds)));
        }
        std::thread::sleep(Duration::from_millis(20));
    };
    let output: String = readers.into_iter().map(|h| h.join().unwrap_or_default()).collect();
    let count = output.lines().filter(|l| pattern.is_match(l)).count();
    match status.code() {
        Some(127) => Err(Error::MissingChecker(cmd)),
        Some(0) => Ok(count),
        _ if count > 0 => Ok(count),
        code => Err(Error::CheckerFailed(format!("exit status {code:?} with no warnings"))),
    }
}

/// Warnings of a simple flow-insensitive nullness check: `null` flowing
/// into unannotated fields, returns and parameters, and dereferences of
/// annotated names that are never compared with `null`.
pub fn stub_warnings(project_dir: &Path, alias: &AliasTable) -> Result<Vec<String>> {
    let mut out = Vec::new();
    for rel in java_files(project_dir)? {
        let full = project_dir.join(&rel);
        let text = std::fs::read_to_string(&full).map_err(|e| Error::io(&full, e))?;
        let path = crate::ingest::rel_string(&rel);
        let Ok(unit) = parse_unit(&path, &text, alias) else { continue };
        let nullable: BTreeSet<&str> = unit
            .sites
            .iter()
            .filter(|s| s.labeled)
            .map(|s| s.signature.as_str())
            .collect();
        let mut warn = |line: usize, msg: String| out.push(format!("{path}:{line}: warning: [stub] {msg}"));
        for t in &unit.types {
            let fields: BTreeMap<&str, _> = t.fields.iter().map(|f| (f.name.as_str(), f)).collect();
            for f in &t.fields {
                if f.eligible && f.init == Some(Expr::Null) && !nullable.contains(f.signature.as_str()) {
                    warn(f.line, format!("assigning null to non-null field {}", f.name));
                }
            }
            for m in &t.methods {
                let shadowed = |n: &str| m.params.iter().any(|p| p.name == n) || m.locals.iter().any(|(l, _)| l == n);
                let field_of = |e: &Expr| match e {
                    Expr::ThisField(n) => fields.get(n.as_str()),
                    Expr::Name(n) if !shadowed(n) => fields.get(n.as_str()),
                    _ => None,
                };
                if m.return_eligible && !nullable.contains(m.signature.as_str()) {
                    for (e, line) in &m.returns {
                        if *e == Expr::Null {
                            warn(*line, format!("returning null from non-null method {}", m.name));
                        }
                    }
                }
                for (lhs, rhs, line) in &m.assigns {
                    if *rhs != Expr::Null {
                        continue;
                    }
                    if let Some(f) = field_of(lhs) {
                        if f.eligible && !nullable.contains(f.signature.as_str()) {
                            warn(*line, format!("assigning null to non-null field {}", f.name));
                        }
                    }
                }
                for call in &m.calls {
                    if let Receiver::Name(x) = &call.receiver {
                        if m.null_checks.iter().any(|c| c == x) {
                            continue;
                        }
                        let param_nullable = m
                            .params
                            .iter()
                            .any(|p| &p.name == x && nullable.contains(p.signature.as_str()));
                        let field_nullable = !shadowed(x)
                            && fields.get(x.as_str()).is_some_and(|f| nullable.contains(f.signature.as_str()));
                        if param_nullable || field_nullable {
                            warn(call.line, format!("dereferenced expression {x} is nullable"));
                        }
                    }
                    if matches!(call.receiver, Receiver::Implicit | Receiver::This) {
                        let targets = t.methods.iter().filter(|c| c.name == call.name && c.params.len() == call.args.len());
                        for target in targets {
                            for (arg, p) in call.args.iter().zip(&target.params) {
                                if *arg == Expr::Null && p.eligible && !nullable.contains(p.signature.as_str()) {
                                    warn(call.line, format!("passing null to non-null parameter {}", p.name));
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    out.sort();
    Ok(out)
}
