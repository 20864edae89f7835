use std::fmt::Write as _;

use super::header::HEADER_KEYWORD;
use super::lexer::quote;
use super::value::{Entry, FoamDictionary, FoamValue};

const KEYWORD_WIDTH: usize = 16;
const INDENT: &str = "    ";
const INLINE_LIMIT: usize = 72;
const SEPARATOR: &str =
    "// * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * * //";

/// Canonical text form. Re-parsing the output yields an equal tree.
pub fn serialize_dictionary(dict: &FoamDictionary) -> String {
    let mut out = String::new();
    let entries = dict.entries();
    let mut rest = entries;
    if let Some(first @ Entry::Keyed { keyword, .. }) = entries.first() {
        if keyword == HEADER_KEYWORD {
            write_entry(&mut out, first, 0);
            out.push_str(SEPARATOR);
            out.push_str("\n\n");
            rest = &entries[1..];
        }
    }
    for (i, e) in rest.iter().enumerate() {
        write_entry(&mut out, e, 0);
        let block = matches!(e, Entry::Keyed { value: FoamValue::Dict(_), .. } | Entry::Anonymous(_));
        if block && i + 1 < rest.len() {
            out.push('\n');
        }
    }
    out
}

fn pad(depth: usize) -> String {
    INDENT.repeat(depth)
}

fn write_entry(out: &mut String, entry: &Entry, depth: usize) {
    let ind = pad(depth);
    match entry {
        Entry::Keyed { keyword, value: FoamValue::Dict(d) } => {
            let _ = writeln!(out, "{ind}{keyword}");
            write_block(out, d, depth);
        }
        Entry::Keyed { keyword, value } => {
            let text = value_text(value, depth);
            if text.is_empty() {
                let _ = writeln!(out, "{ind}{keyword};");
            } else if keyword.len() >= KEYWORD_WIDTH {
                let _ = writeln!(out, "{ind}{keyword} {text};");
            } else {
                let _ = writeln!(out, "{ind}{keyword:<KEYWORD_WIDTH$}{text};");
            }
        }
        Entry::Directive { directive, args } => {
            if directive.starts_with('$') {
                let _ = writeln!(out, "{ind}{directive};");
            } else if args.is_empty() {
                let _ = writeln!(out, "{ind}{directive}");
            } else {
                let _ = writeln!(out, "{ind}{directive} {args}");
            }
        }
        Entry::Anonymous(value) => {
            let _ = writeln!(out, "{ind}{}", value_text(value, depth));
        }
    }
}

fn write_block(out: &mut String, d: &FoamDictionary, depth: usize) {
    let ind = pad(depth);
    let _ = writeln!(out, "{ind}{{");
    for e in d.entries() {
        write_entry(out, e, depth + 1);
    }
    let _ = writeln!(out, "{ind}}}");
}

fn needs_multiline(items: &[FoamValue]) -> bool {
    items
        .iter()
        .any(|v| matches!(v, FoamValue::Dict(_) | FoamValue::NamedDict(..)))
}

/// Text of a value positioned after a keyword at `depth`.
fn value_text(value: &FoamValue, depth: usize) -> String {
    match value {
        FoamValue::Word(w) => w.clone(),
        FoamValue::Str(s) => quote(s),
        FoamValue::Number(n) => n.as_str().to_string(),
        FoamValue::Dimensions(d) => d.to_string(),
        FoamValue::Uniform(v) => format!("uniform {}", value_text(v, depth)),
        FoamValue::Nonuniform(n) => match &n.kind {
            Some(kind) => format!("nonuniform {kind} {} {}", n.count, n.raw),
            None => format!("nonuniform {} {}", n.count, n.raw),
        },
        FoamValue::Verbatim(v) => format!("#{{{v}#}}"),
        FoamValue::Seq(items) => items
            .iter()
            .map(|v| value_text(v, depth))
            .collect::<Vec<_>>()
            .join(" "),
        FoamValue::List(items) => list_text(items, depth),
        FoamValue::Dict(d) => {
            let mut s = String::from("\n");
            write_block(&mut s, d, depth);
            s.trim_end().to_string()
        }
        FoamValue::NamedDict(name, d) => {
            let mut s = format!("{name}\n");
            write_block(&mut s, d, depth);
            s.trim_end().to_string()
        }
    }
}

fn list_text(items: &[FoamValue], depth: usize) -> String {
    if items.is_empty() {
        return "()".into();
    }
    if !needs_multiline(items) {
        let inline = format!(
            "({})",
            items.iter().map(|v| value_text(v, depth)).collect::<Vec<_>>().join(" ")
        );
        if inline.len() <= INLINE_LIMIT && !inline.contains('\n') {
            return inline;
        }
    }
    let inner = pad(depth + 1);
    let mut s = String::from("\n");
    let _ = writeln!(s, "{}(", pad(depth));
    for v in items {
        match v {
            FoamValue::NamedDict(name, d) => {
                let _ = writeln!(s, "{inner}{name}");
                write_block(&mut s, d, depth + 1);
            }
            FoamValue::Dict(d) => write_block(&mut s, d, depth + 1),
            other => {
                let _ = writeln!(s, "{inner}{}", value_text(other, depth + 1));
            }
        }
    }
    let _ = write!(s, "{})", pad(depth));
    s
}
