//! Universal element type for game boundaries and strategy sets.
//!
//! Composition, tensoring, and conditioning build product and function-space
//! sets out of base sets, so elements must close under pairing and finite
//! tables. Iterated-game utilities additionally need numeric vectors. One
//! recursive value type covers all of it, with a canonical text form used as
//! JSON object keys.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An element of a game boundary, strategy set, or utility space.
#[derive(Debug, Clone)]
pub enum Value<T: Scalar> {
    /// The canonical element of the one-point set, written `()`.
    Unit,
    /// A symbolic label.
    Sym(String),
    /// An element of a product set, written `a,b` (nested pairs in parens).
    Pair(Box<Value<T>>, Box<Value<T>>),
    /// A finite function as a sorted association list, written `{k:v,...}`.
    Table(Vec<(Value<T>, Value<T>)>),
    /// A numeric vector, written `[1,2.5]`.
    Num(Vec<T>),
}

impl<T: Scalar> Value<T> {
    pub fn sym(label: impl Into<String>) -> Self {
        Value::Sym(label.into())
    }

    pub fn pair(left: Value<T>, right: Value<T>) -> Self {
        Value::Pair(Box::new(left), Box::new(right))
    }

    /// Builds a table value; entries are sorted by key and must be distinct.
    pub fn table(entries: impl IntoIterator<Item = (Value<T>, Value<T>)>) -> Result<Self> {
        let mut entries: Vec<_> = entries.into_iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        for window in entries.windows(2) {
            if window[0].0 == window[1].0 {
                return Err(Error::DuplicateLabel {
                    label: window[0].0.to_string(),
                });
            }
        }
        Ok(Value::Table(entries))
    }

    pub fn num(components: impl IntoIterator<Item = T>) -> Self {
        Value::Num(components.into_iter().collect())
    }

    pub fn scalar(v: T) -> Self {
        Value::Num(vec![v])
    }

    pub fn as_pair(&self) -> Option<(&Value<T>, &Value<T>)> {
        match self {
            Value::Pair(a, b) => Some((a, b)),
            _ => None,
        }
    }

    /// First and second projections; panics on non-pairs, which only occur
    /// when a continuation is evaluated against the wrong boundary.
    pub fn expect_pair(&self) -> (&Value<T>, &Value<T>) {
        self.as_pair()
            .unwrap_or_else(|| panic!("expected a pair value, found `{self}`"))
    }

    pub fn as_num(&self) -> Option<&[T]> {
        match self {
            Value::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_table(&self) -> Option<&[(Value<T>, Value<T>)]> {
        match self {
            Value::Table(entries) => Some(entries),
            _ => None,
        }
    }

    /// Looks up `key` in a table value.
    pub fn table_get(&self, key: &Value<T>) -> Option<&Value<T>> {
        self.as_table().and_then(|entries| {
            entries
                .binary_search_by(|probe| probe.0.cmp(key))
                .ok()
                .map(|i| &entries[i].1)
        })
    }

    fn rank(&self) -> u8 {
        match self {
            Value::Unit => 0,
            Value::Sym(_) => 1,
            Value::Pair(..) => 2,
            Value::Table(_) => 3,
            Value::Num(_) => 4,
        }
    }

    /// Parses the canonical text form produced by `Display`.
    ///
    /// Grammar: `()` is unit, `[..]` a numeric vector, `{k:v,..}` a table,
    /// a top-level comma builds left-associated pairs, parentheses group,
    /// and anything else is a symbolic label.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        if text.is_empty() {
            return Err(Error::Parse {
                message: "empty value".into(),
            });
        }
        let parts = split_top_level(text, ',')?;
        if parts.len() > 1 {
            let mut values = parts.iter().map(|p| Self::parse_atom(p));
            let mut acc = values.next().unwrap()?;
            for v in values {
                acc = Value::pair(acc, v?);
            }
            return Ok(acc);
        }
        Self::parse_atom(text)
    }

    fn parse_atom(text: &str) -> Result<Self> {
        let text = text.trim();
        if text == "()" {
            return Ok(Value::Unit);
        }
        if let Some(inner) = text.strip_prefix('(').and_then(|t| t.strip_suffix(')')) {
            return Self::parse(inner);
        }
        if let Some(inner) = text.strip_prefix('[').and_then(|t| t.strip_suffix(']')) {
            let mut components = Vec::new();
            if !inner.trim().is_empty() {
                for piece in inner.split(',') {
                    let parsed: f64 = piece.trim().parse().map_err(|_| Error::Parse {
                        message: format!("invalid number `{piece}`"),
                    })?;
                    components.push(T::from_f64_lossy(parsed));
                }
            }
            return Ok(Value::Num(components));
        }
        if let Some(inner) = text.strip_prefix('{').and_then(|t| t.strip_suffix('}')) {
            let mut entries = Vec::new();
            if !inner.trim().is_empty() {
                for piece in split_top_level(inner, ',')? {
                    let kv = split_top_level(&piece, ':')?;
                    if kv.len() != 2 {
                        return Err(Error::Parse {
                            message: format!("table entry `{piece}` is not `key:value`"),
                        });
                    }
                    entries.push((Self::parse(&kv[0])?, Self::parse(&kv[1])?));
                }
            }
            return Value::table(entries);
        }
        if text.chars().any(|c| "(){}[],:".contains(c) || c.is_whitespace()) {
            return Err(Error::Parse {
                message: format!("label `{text}` contains reserved characters"),
            });
        }
        Ok(Value::Sym(text.to_string()))
    }
}

/// Splits on `sep` at nesting depth zero with respect to `()[]{}`.
fn split_top_level(text: &str, sep: char) -> Result<Vec<String>> {
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut current = String::new();
    for c in text.chars() {
        match c {
            '(' | '[' | '{' => depth += 1,
            ')' | ']' | '}' => depth -= 1,
            _ => {}
        }
        if depth < 0 {
            return Err(Error::Parse {
                message: format!("unbalanced brackets in `{text}`"),
            });
        }
        if c == sep && depth == 0 {
            parts.push(std::mem::take(&mut current));
        } else {
            current.push(c);
        }
    }
    if depth != 0 {
        return Err(Error::Parse {
            message: format!("unbalanced brackets in `{text}`"),
        });
    }
    parts.push(current);
    Ok(parts)
}

impl<T: Scalar> PartialEq for Value<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T: Scalar> Eq for Value<T> {}

impl<T: Scalar> Ord for Value<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Value::Unit, Value::Unit) => Ordering::Equal,
            (Value::Sym(a), Value::Sym(b)) => a.cmp(b),
            (Value::Pair(a1, b1), Value::Pair(a2, b2)) => {
                a1.cmp(a2).then_with(|| b1.cmp(b2))
            }
            (Value::Table(a), Value::Table(b)) => {
                for ((ka, va), (kb, vb)) in a.iter().zip(b.iter()) {
                    let ord = ka.cmp(kb).then_with(|| va.cmp(vb));
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                a.len().cmp(&b.len())
            }
            (Value::Num(a), Value::Num(b)) => {
                for (x, y) in a.iter().zip(b.iter()) {
                    let ord = x.total_order(y);
                    if ord != Ordering::Equal {
                        return ord;
                    }
                }
                a.len().cmp(&b.len())
            }
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl<T: Scalar> PartialOrd for Value<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T: Scalar> fmt::Display for Value<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Unit => write!(f, "()"),
            Value::Sym(s) => write!(f, "{s}"),
            Value::Pair(a, b) => {
                // The left component of a pair is parenthesized when it is
                // itself a pair so that `(a,b),c` parses back unambiguously.
                match a.as_ref() {
                    Value::Pair(..) => write!(f, "({a}),{b}"),
                    _ => write!(f, "{a},{b}"),
                }
            }
            Value::Table(entries) => {
                write!(f, "{{")?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    match (k, v) {
                        (Value::Pair(..), Value::Pair(..)) => write!(f, "({k}):({v})")?,
                        (Value::Pair(..), _) => write!(f, "({k}):{v}")?,
                        (_, Value::Pair(..)) => write!(f, "{k}:({v})")?,
                        _ => write!(f, "{k}:{v}")?,
                    }
                }
                write!(f, "}}")
            }
            Value::Num(v) => {
                write!(f, "[")?;
                for (i, x) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{x}")?;
                }
                write!(f, "]")
            }
        }
    }
}
