use regex::Regex;

use super::alias::AliasTable;
use super::java::{parse_unit, ParsedUnit};
use crate::error::Result;

/// Removes every qualifier annotation, plus qualifier imports whose simple
/// name no longer appears outside the import list.
pub fn erase_annotations(source: &str, alias: &AliasTable) -> Result<String> {
    let unit = parse_unit("", source, alias)?;
    Ok(erase_parsed(source, &unit, alias))
}

fn erase_parsed(source: &str, unit: &ParsedUnit, alias: &AliasTable) -> String {
    let bytes = source.as_bytes();
    let mut cuts: Vec<(usize, usize)> = Vec::new();
    for &(start, end) in &unit.qualifier_spans {
        let mut stop = end;
        while stop < bytes.len() && bytes[stop].is_ascii_whitespace() {
            stop += 1;
        }
        cuts.push((start, stop));
    }
    if cuts.is_empty() {
        return source.to_string();
    }

    let body = strip_ranges(source, &cuts);
    let body_unit_imports: Vec<(usize, usize)> = unit.import_decls.iter().map(|d| d.span).collect();
    let mut body_only = String::with_capacity(source.len());
    {
        // the body is the erased text with import declarations blanked
        let shifted = shift_spans(&cuts, &body_unit_imports);
        let mut last = 0;
        for (s, e) in shifted {
            body_only.push_str(&body[last..s]);
            last = e;
        }
        body_only.push_str(&body[last..]);
    }
    for decl in &unit.import_decls {
        if decl.is_static || decl.on_demand || !alias.contains_fqn(&decl.path) {
            continue;
        }
        let simple = decl.path.rsplit('.').next().unwrap_or_default();
        let word = Regex::new(&format!(r"\b{}\b", regex::escape(simple))).expect("escaped pattern");
        if word.is_match(&body_only) {
            continue;
        }
        let (start, end) = decl.span;
        if start > 0 && bytes[start - 1] == b'\n' {
            cuts.push((start - 1, end));
        } else if end < bytes.len() && bytes[end] == b'\n' {
            cuts.push((start, end + 1));
        } else {
            cuts.push((start, end));
        }
    }
    strip_ranges(source, &cuts)
}

fn merged(ranges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut sorted = ranges.to_vec();
    sorted.sort_unstable();
    let mut out: Vec<(usize, usize)> = Vec::new();
    for (s, e) in sorted {
        match out.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => out.push((s, e)),
        }
    }
    out
}

fn strip_ranges(source: &str, ranges: &[(usize, usize)]) -> String {
    let mut out = String::with_capacity(source.len());
    let mut last = 0;
    for (s, e) in merged(ranges) {
        out.push_str(&source[last..s]);
        last = e;
    }
    out.push_str(&source[last..]);
    out
}

/// Maps spans of the original text onto the text with `cuts` removed.
fn shift_spans(cuts: &[(usize, usize)], spans: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let cuts = merged(cuts);
    let map = |pos: usize| -> usize {
        let mut removed = 0;
        for &(s, e) in &cuts {
            if e <= pos {
                removed += e - s;
            } else if s < pos {
                removed += pos - s;
            }
        }
        pos - removed
    };
    let mut out: Vec<(usize, usize)> = spans.iter().map(|&(s, e)| (map(s), map(e))).collect();
    out.sort_unstable();
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_qualifiers_is_identity() {
        let src = "package p;\nimport java.util.List;\nclass A { List<String> xs; }\n";
        assert_eq!(erase_annotations(src, &AliasTable::default()).unwrap(), src);
    }

    #[test]
    fn removes_annotation_and_unused_import() {
        let src = "package p;\n\nimport java.util.List;\nimport javax.annotation.Nullable;\n\nclass A {\n  @Nullable String f;\n  List<String> g;\n}\n";
        let out = erase_annotations(src, &AliasTable::default()).unwrap();
        assert_eq!(
            out,
            "package p;\n\nimport java.util.List;\n\nclass A {\n  String f;\n  List<String> g;\n}\n"
        );
        assert_eq!(erase_annotations(&out, &AliasTable::default()).unwrap(), out);
    }

    #[test]
    fn qualified_use_leaves_imports() {
        let src = "import java.util.Map;\nclass A { @org.jetbrains.annotations.Nullable Map m; }\n";
        let out = erase_annotations(src, &AliasTable::default()).unwrap();
        assert_eq!(out, "import java.util.Map;\nclass A { Map m; }\n");
    }

    #[test]
    fn import_kept_while_name_still_used() {
        let src = "import javax.annotation.Nullable;\nclass A {\n  @Nullable String f;\n  // Nullable stays mentioned\n}\n";
        let out = erase_annotations(src, &AliasTable::default()).unwrap();
        assert!(out.starts_with("import javax.annotation.Nullable;"));
        assert!(out.contains("  String f;"));
    }
}
