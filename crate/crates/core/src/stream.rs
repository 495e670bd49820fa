//! Finite prefixes of move streams.

use std::fmt;

use crate::scalar::Scalar;
use crate::value::Value;

/// A finite approximation of an infinite move stream.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct StreamPrefix<T: Scalar> {
    moves: Vec<Value<T>>,
}

impl<T: Scalar> StreamPrefix<T> {
    pub fn new(moves: Vec<Value<T>>) -> Self {
        StreamPrefix { moves }
    }

    pub fn empty() -> Self {
        StreamPrefix { moves: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Value<T>> {
        self.moves.iter()
    }

    pub fn as_slice(&self) -> &[Value<T>] {
        &self.moves
    }

    pub fn head(&self) -> Option<&Value<T>> {
        self.moves.first()
    }

    /// Everything after the head.
    pub fn tail(&self) -> StreamPrefix<T> {
        StreamPrefix {
            moves: self.moves.iter().skip(1).cloned().collect(),
        }
    }

    /// Prepends a move.
    pub fn cons(mut self, y: Value<T>) -> StreamPrefix<T> {
        self.moves.insert(0, y);
        self
    }

    pub fn push(&mut self, y: Value<T>) {
        self.moves.push(y);
    }
}

impl<T: Scalar> FromIterator<Value<T>> for StreamPrefix<T> {
    fn from_iter<I: IntoIterator<Item = Value<T>>>(iter: I) -> Self {
        StreamPrefix {
            moves: iter.into_iter().collect(),
        }
    }
}

impl<T: Scalar> fmt::Display for StreamPrefix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, m) in self.moves.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{m}")?;
        }
        write!(f, "]")
    }
}
