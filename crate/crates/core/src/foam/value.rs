use serde::{Deserialize, Serialize};

use super::dimensions::DimensionVector;

/// A numeric token. The source spelling is kept for output; equality is by
/// numeric value so `1e-5` and `1e-05` compare equal.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Number(String);

impl Number {
    pub fn new(text: impl Into<String>) -> Self {
        Number(text.into())
    }

    pub fn from_f64(v: f64) -> Self {
        Number(format_scalar(v))
    }

    pub fn from_i64(v: i64) -> Self {
        Number(v.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn value(&self) -> f64 {
        self.0.parse().unwrap_or(f64::NAN)
    }
}

impl PartialEq for Number {
    fn eq(&self, other: &Self) -> bool {
        self.0 == other.0 || self.value() == other.value()
    }
}

/// Shortest text that parses back to `v` with at most 12 significant digits.
pub fn format_scalar(v: f64) -> String {
    if v == v.trunc() && v.abs() < 1e15 {
        return format!("{}", v as i64);
    }
    let sci = format!("{:.11e}", v);
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let mantissa = mantissa.trim_end_matches('0').trim_end_matches('.');
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..=5).contains(&exp) {
        return format!("{mantissa}e{exp}");
    }
    let (sign, body) = match mantissa.strip_prefix('-') {
        Some(rest) => ("-", rest),
        None => ("", mantissa),
    };
    let digits: String = body.chars().filter(|c| *c != '.').collect();
    let point = 1 + exp;
    if point <= 0 {
        format!("{sign}0.{}{digits}", "0".repeat((-point) as usize))
    } else if point as usize >= digits.len() {
        format!("{sign}{digits}{}", "0".repeat(point as usize - digits.len()))
    } else {
        let (int, frac) = digits.split_at(point as usize);
        format!("{sign}{int}.{frac}")
    }
}

/// `nonuniform List<T> N (...)`; kept as an opaque normalized token span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NonuniformField {
    pub kind: Option<String>,
    pub count: usize,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoamValue {
    Word(String),
    Str(String),
    Number(Number),
    Dimensions(DimensionVector),
    Uniform(Box<FoamValue>),
    Nonuniform(NonuniformField),
    List(Vec<FoamValue>),
    Dict(FoamDictionary),
    /// `name { ... }` appearing as a list element (blockMesh/polyMesh boundaries).
    NamedDict(String, FoamDictionary),
    Verbatim(String),
    /// Several space-separated values forming one entry, e.g. `nu [..] 1e-05`.
    Seq(Vec<FoamValue>),
}

impl FoamValue {
    pub fn word(w: impl Into<String>) -> Self {
        FoamValue::Word(w.into())
    }

    pub fn number(v: f64) -> Self {
        FoamValue::Number(Number::from_f64(v))
    }

    pub fn as_word(&self) -> Option<&str> {
        match self {
            FoamValue::Word(w) => Some(w),
            FoamValue::Str(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            FoamValue::Number(n) => Some(n.value()),
            _ => None,
        }
    }

    pub fn as_dict(&self) -> Option<&FoamDictionary> {
        match self {
            FoamValue::Dict(d) => Some(d),
            _ => None,
        }
    }

    pub fn as_dict_mut(&mut self) -> Option<&mut FoamDictionary> {
        match self {
            FoamValue::Dict(d) => Some(d),
            _ => None,
        }
    }

    /// Values of a multi-token entry; a single value is a one-element slice.
    pub fn items(&self) -> &[FoamValue] {
        match self {
            FoamValue::Seq(v) => v,
            other => std::slice::from_ref(other),
        }
    }

    /// Interprets `[name] [dims] value` as a dimensioned scalar.
    pub fn as_dimensioned(&self) -> Option<Dimensioned<'_>> {
        let items = self.items();
        let (name, rest) = match items.first() {
            Some(FoamValue::Word(w)) => (Some(w.as_str()), &items[1..]),
            _ => (None, items),
        };
        match rest {
            [FoamValue::Dimensions(d), value] => Some(Dimensioned {
                name,
                dimensions: *d,
                value,
            }),
            _ => None,
        }
    }

    /// Number of nonuniform entries in this value or anything nested in it.
    pub fn max_nonuniform_len(&self) -> usize {
        match self {
            FoamValue::Nonuniform(n) => n.count,
            FoamValue::Uniform(v) => v.max_nonuniform_len(),
            FoamValue::List(v) | FoamValue::Seq(v) => {
                v.iter().map(FoamValue::max_nonuniform_len).max().unwrap_or(0)
            }
            FoamValue::Dict(d) | FoamValue::NamedDict(_, d) => d.max_nonuniform_len(),
            _ => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dimensioned<'a> {
    pub name: Option<&'a str>,
    pub dimensions: DimensionVector,
    pub value: &'a FoamValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Entry {
    Keyed { keyword: String, value: FoamValue },
    /// `#include`, `#includeEtc`, `$macro;` and other directives, kept verbatim.
    Directive { directive: String, args: String },
    /// Top-level content without a keyword, e.g. the patch list of polyMesh/boundary.
    Anonymous(FoamValue),
}

/// An ordered OpenFOAM dictionary. Keywords are unique per level.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FoamDictionary {
    entries: Vec<Entry>,
}

impl FoamDictionary {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entries(&self) -> &[Entry] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn keyed(&self) -> impl Iterator<Item = (&str, &FoamValue)> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Keyed { keyword, value } => Some((keyword.as_str(), value)),
            _ => None,
        })
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.keyed().map(|(k, _)| k)
    }

    pub fn directives(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().filter_map(|e| match e {
            Entry::Directive { directive, args } => Some((directive.as_str(), args.as_str())),
            _ => None,
        })
    }

    pub fn anonymous(&self) -> Option<&FoamValue> {
        self.entries.iter().find_map(|e| match e {
            Entry::Anonymous(v) => Some(v),
            _ => None,
        })
    }

    pub fn get(&self, keyword: &str) -> Option<&FoamValue> {
        self.keyed().find(|(k, _)| *k == keyword).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, keyword: &str) -> Option<&mut FoamValue> {
        self.entries.iter_mut().find_map(|e| match e {
            Entry::Keyed { keyword: k, value } if k == keyword => Some(value),
            _ => None,
        })
    }

    pub fn get_dict(&self, keyword: &str) -> Option<&FoamDictionary> {
        self.get(keyword).and_then(FoamValue::as_dict)
    }

    pub fn get_dict_mut(&mut self, keyword: &str) -> Option<&mut FoamDictionary> {
        self.get_mut(keyword).and_then(FoamValue::as_dict_mut)
    }

    pub fn get_word(&self, keyword: &str) -> Option<&str> {
        self.get(keyword).and_then(FoamValue::as_word)
    }

    pub fn get_f64(&self, keyword: &str) -> Option<f64> {
        self.get(keyword).and_then(FoamValue::as_f64)
    }

    pub fn contains_key(&self, keyword: &str) -> bool {
        self.get(keyword).is_some()
    }

    /// Inserts or replaces in place; new keys go to the end.
    pub fn set(&mut self, keyword: impl Into<String>, value: FoamValue) {
        let keyword = keyword.into();
        if let Some(slot) = self.get_mut(&keyword) {
            *slot = value;
        } else {
            self.entries.push(Entry::Keyed { keyword, value });
        }
    }

    pub fn insert_front(&mut self, keyword: impl Into<String>, value: FoamValue) {
        let keyword = keyword.into();
        self.remove(&keyword);
        self.entries.insert(0, Entry::Keyed { keyword, value });
    }

    pub fn remove(&mut self, keyword: &str) -> Option<FoamValue> {
        let idx = self.entries.iter().position(
            |e| matches!(e, Entry::Keyed { keyword: k, .. } if k == keyword),
        )?;
        match self.entries.remove(idx) {
            Entry::Keyed { value, .. } => Some(value),
            _ => unreachable!(),
        }
    }

    pub fn push_directive(&mut self, directive: impl Into<String>, args: impl Into<String>) {
        self.entries.push(Entry::Directive {
            directive: directive.into(),
            args: args.into(),
        });
    }

    pub fn push_anonymous(&mut self, value: FoamValue) {
        self.entries.push(Entry::Anonymous(value));
    }

    pub fn max_nonuniform_len(&self) -> usize {
        self.entries
            .iter()
            .map(|e| match e {
                Entry::Keyed { value, .. } | Entry::Anonymous(value) => value.max_nonuniform_len(),
                Entry::Directive { .. } => 0,
            })
            .max()
            .unwrap_or(0)
    }

    /// Walks `a/b/c` through nested dictionaries.
    pub fn lookup_path(&self, path: &str) -> Option<&FoamValue> {
        let mut parts = path.split('/');
        let mut value = self.get(parts.next()?)?;
        for p in parts {
            value = value.as_dict()?.get(p)?;
        }
        Some(value)
    }
}

impl FromIterator<(String, FoamValue)> for FoamDictionary {
    fn from_iter<I: IntoIterator<Item = (String, FoamValue)>>(iter: I) -> Self {
        let mut d = FoamDictionary::new();
        for (k, v) in iter {
            d.set(k, v);
        }
        d
    }
}
