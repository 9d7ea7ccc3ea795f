//! Items query language.
//!
//! Queries such as `price >= 100 and "red" in colors and not discontinued`
//! are parsed, checked against a catalog schema, and evaluated column by
//! column over a compressed catalog into a bitset of candidate items.

mod ast;
mod bitset;
mod catalog;
mod filter;
mod lexer;
mod parser;
mod typed;

use std::fmt;

use thiserror::Error;

use crate::codec::FormatError;

pub use self::ast::{Attr, CmpOp, Expr, ListOperand, Literal, Operand};
pub use self::bitset::Bitset;
pub use self::catalog::{
    load_catalog, AttrType, CatalogSchema, CompressedCatalog, ItemRecord, LoadStats, Value,
};
pub use self::filter::{filter, filter_naive, CandidateSet};
pub use self::parser::parse;
pub use self::typed::{compile, typecheck, TypedQuery};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SyntaxError {
    pub offset: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl fmt::Display for SyntaxError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "syntax error at offset {}: expected ", self.offset)?;
        match self.expected.as_slice() {
            [one] => write!(f, "{one}")?,
            many => write!(f, "one of {}", many.join(", "))?,
        }
        write!(f, ", found {}", self.found)
    }
}

impl std::error::Error for SyntaxError {}

#[derive(Debug, Error)]
pub enum IqlError {
    #[error(transparent)]
    Syntax(#[from] SyntaxError),
    #[error("empty query")]
    EmptyQuery,
    #[error("unknown attribute `{name}` at offset {offset}")]
    UnknownAttribute { name: String, offset: usize },
    #[error("type error in `{node}`: {message}")]
    Type { node: String, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("duplicate item id {0:?}")]
    DuplicateId(String),
    #[error("duplicate item id {id:?} on line {line}")]
    DuplicateIdAt { id: String, line: usize },
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}
