//! Finite sets with a fixed enumeration order, and boundary carriers.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::value::Value;

/// A finite set of distinct values with a fixed order.
///
/// The order is fixed at construction and drives every enumeration in the
/// engine (strategy sets, continuation spaces, witness reporting), which is
/// what makes results deterministic.
#[derive(Debug, Clone)]
pub struct FinSet<T: Scalar> {
    elements: Vec<Value<T>>,
    index: BTreeMap<Value<T>, usize>,
}

impl<T: Scalar> FinSet<T> {
    pub fn new(elements: impl IntoIterator<Item = Value<T>>) -> Result<Self> {
        let elements: Vec<_> = elements.into_iter().collect();
        let mut index = BTreeMap::new();
        for (i, e) in elements.iter().enumerate() {
            if index.insert(e.clone(), i).is_some() {
                return Err(Error::DuplicateLabel {
                    label: e.to_string(),
                });
            }
        }
        Ok(FinSet { elements, index })
    }

    /// Convenience constructor from symbolic labels.
    pub fn from_labels<S: AsRef<str>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        Self::new(
            labels
                .into_iter()
                .map(|l| Value::sym(l.as_ref().to_string())),
        )
    }

    /// The canonical one-element set `{()}`.
    pub fn unit() -> Self {
        Self::new([Value::Unit]).expect("unit set is duplicate-free")
    }

    pub fn empty() -> Self {
        FinSet {
            elements: Vec::new(),
            index: BTreeMap::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Value<T>> + Clone {
        self.elements.iter()
    }

    pub fn contains(&self, value: &Value<T>) -> bool {
        self.index.contains_key(value)
    }

    pub fn position(&self, value: &Value<T>) -> Option<usize> {
        self.index.get(value).copied()
    }

    pub fn get(&self, i: usize) -> Option<&Value<T>> {
        self.elements.get(i)
    }

    pub fn first(&self) -> Option<&Value<T>> {
        self.elements.first()
    }

    /// Cartesian product in row-major order: the left factor varies slowest.
    pub fn product(&self, other: &FinSet<T>) -> FinSet<T> {
        let mut elements = Vec::with_capacity(self.len() * other.len());
        for a in self.iter() {
            for b in other.iter() {
                elements.push(Value::pair(a.clone(), b.clone()));
            }
        }
        Self::new(elements).expect("product of duplicate-free sets is duplicate-free")
    }

    /// All total functions `domain -> codomain` as table values.
    ///
    /// Enumeration is mixed-radix with the first domain element as the most
    /// significant digit and digits running in codomain order. Guarded:
    /// errors out when `|codomain|^|domain|` exceeds `guard`.
    pub fn tables(domain: &FinSet<T>, codomain: &FinSet<T>, guard: usize) -> Result<Vec<Value<T>>> {
        let size = (codomain.len() as u128)
            .checked_pow(domain.len() as u32)
            .unwrap_or(u128::MAX);
        if size > guard as u128 {
            return Err(Error::EnumerationTooLarge { size, guard });
        }
        if domain.is_empty() {
            return Ok(vec![Value::table([]).unwrap()]);
        }
        if codomain.is_empty() {
            return Ok(Vec::new());
        }
        let total = size as usize;
        let mut out = Vec::with_capacity(total);
        let base = codomain.len();
        for mut idx in 0..total {
            let mut digits = vec![0usize; domain.len()];
            for slot in (0..domain.len()).rev() {
                digits[slot] = idx % base;
                idx /= base;
            }
            let entries = domain
                .iter()
                .zip(digits.iter())
                .map(|(a, &d)| (a.clone(), codomain.get(d).unwrap().clone()));
            out.push(Value::table(entries).expect("domain elements are distinct"));
        }
        Ok(out)
    }
}

impl<T: Scalar> PartialEq for FinSet<T> {
    fn eq(&self, other: &Self) -> bool {
        self.elements == other.elements
    }
}

impl<T: Scalar> Eq for FinSet<T> {}

impl<T: Scalar> fmt::Display for FinSet<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (i, e) in self.elements.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{e}")?;
        }
        write!(f, "}}")
    }
}

/// The carrier of a boundary component.
///
/// State and move sets are always finite; utility and coutility carriers may
/// instead be a numeric vector space (iterated games evaluate real-valued
/// utilities), or a product mixing the two.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Carrier<T: Scalar> {
    Finite(FinSet<T>),
    Numeric { dim: usize },
    Product(Box<Carrier<T>>, Box<Carrier<T>>),
}

impl<T: Scalar> Carrier<T> {
    pub fn finite(set: FinSet<T>) -> Self {
        Carrier::Finite(set)
    }

    pub fn numeric(dim: usize) -> Self {
        Carrier::Numeric { dim }
    }

    pub fn unit() -> Self {
        Carrier::Finite(FinSet::unit())
    }

    pub fn contains(&self, value: &Value<T>) -> bool {
        match self {
            Carrier::Finite(set) => set.contains(value),
            Carrier::Numeric { dim } => value.as_num().map_or(false, |v| v.len() == *dim),
            Carrier::Product(a, b) => value
                .as_pair()
                .map_or(false, |(l, r)| a.contains(l) && b.contains(r)),
        }
    }

    /// Product carrier; stays materialized while both sides are finite.
    pub fn product(a: &Carrier<T>, b: &Carrier<T>) -> Carrier<T> {
        match (a, b) {
            (Carrier::Finite(x), Carrier::Finite(y)) => Carrier::Finite(x.product(y)),
            _ => Carrier::Product(Box::new(a.clone()), Box::new(b.clone())),
        }
    }

    pub fn as_finite(&self) -> Option<&FinSet<T>> {
        match self {
            Carrier::Finite(set) => Some(set),
            _ => None,
        }
    }
}

impl<T: Scalar> fmt::Display for Carrier<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Carrier::Finite(set) => write!(f, "{set}"),
            Carrier::Numeric { dim } => write!(f, "R^{dim}"),
            Carrier::Product(a, b) => write!(f, "{a} x {b}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_labels_rejected() {
        let err = FinSet::<f64>::from_labels(["a", "b", "a"]).unwrap_err();
        assert_eq!(err.kind(), "duplicate_label");
    }

    #[test]
    fn product_is_row_major() {
        let a = FinSet::<f64>::from_labels(["x", "y"]).unwrap();
        let b = FinSet::<f64>::from_labels(["0", "1"]).unwrap();
        let p = a.product(&b);
        let order: Vec<String> = p.iter().map(|v| v.to_string()).collect();
        assert_eq!(order, ["x,0", "x,1", "y,0", "y,1"]);
    }

    #[test]
    fn tables_enumerate_most_significant_first() {
        let dom = FinSet::<f64>::from_labels(["a", "b"]).unwrap();
        let cod = FinSet::<f64>::from_labels(["0", "1"]).unwrap();
        let tables = FinSet::tables(&dom, &cod, 1000).unwrap();
        let order: Vec<String> = tables.iter().map(|v| v.to_string()).collect();
        assert_eq!(
            order,
            ["{a:0,b:0}", "{a:0,b:1}", "{a:1,b:0}", "{a:1,b:1}"]
        );
    }

    #[test]
    fn tables_guard_trips() {
        let dom = FinSet::<f64>::from_labels(["a", "b", "c"]).unwrap();
        let cod = FinSet::<f64>::from_labels(["0", "1", "2", "3"]).unwrap();
        let err = FinSet::tables(&dom, &cod, 10).unwrap_err();
        assert_eq!(err.kind(), "enumeration_too_large");
    }

    #[test]
    fn numeric_carrier_membership() {
        let c = Carrier::<f64>::numeric(2);
        assert!(c.contains(&Value::num([1.0, 2.0])));
        assert!(!c.contains(&Value::num([1.0])));
        assert!(!c.contains(&Value::sym("r")));
    }
}
