use std::io::{Read, Write};

use super::ast::CmpOp;
use super::bitset::Bitset;
use super::catalog::{Column, CompressedCatalog, Dictionary, ItemRecord, Value};
use super::typed::{Arg, Pred, TypedExpr, TypedQuery};
use super::IqlError;
use crate::codec::*;

const MAGIC: &[u8; 4] = b"FRC1";

/// Item positions that passed a filter, with a cached population count.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateSet {
    bits: Bitset,
    count: usize,
}

impl CandidateSet {
    pub fn from_bitset(bits: Bitset) -> Self {
        let count = bits.count_ones();
        Self { bits, count }
    }

    pub fn all(len: usize) -> Self {
        Self::from_bitset(Bitset::ones(len))
    }

    pub fn none(len: usize) -> Self {
        Self::from_bitset(Bitset::new(len))
    }

    pub fn from_ids(len: usize, ids: impl IntoIterator<Item = usize>) -> Self {
        let mut bits = Bitset::new(len);
        ids.into_iter().for_each(|i| bits.set(i, true));
        Self::from_bitset(bits)
    }

    /// Size of the universe (the catalog length).
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, id: usize) -> bool {
        self.bits.get(id)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.iter_ones()
    }

    pub fn bits(&self) -> &Bitset {
        &self.bits
    }

    /// `FRC1`, `u64` length in bits, then the raw words.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_magic(&mut w, MAGIC)?;
        write_u64(&mut w, self.len() as u64)?;
        self.bits.write_words(&mut w)?;
        w.flush()
    }

    pub fn read<R: Read>(mut r: R) -> FormatResult<Self> {
        read_magic(&mut r, MAGIC)?;
        let len = read_len(&mut r, "candidate bit")?;
        Ok(Self::from_bitset(Bitset::read_words(&mut r, len)?))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write(&mut out).expect("writing to a Vec cannot fail");
        out
    }
}

fn check_schema(catalog: &CompressedCatalog, query: &TypedQuery) -> Result<(), IqlError> {
    if catalog.schema() != query.schema() {
        return Err(IqlError::Schema(
            "query was checked against a different schema".into(),
        ));
    }
    Ok(())
}

/// Columnar evaluation: each leaf predicate becomes a bitset built from one
/// or two columns; `and`/`or`/`not` combine whole bitsets. Any comparison
/// touching a null is false, and `not` is applied after that.
pub fn filter(catalog: &CompressedCatalog, query: &TypedQuery) -> Result<CandidateSet, IqlError> {
    check_schema(catalog, query)?;
    Ok(CandidateSet::from_bitset(eval(catalog, &query.expr)))
}

fn eval(cat: &CompressedCatalog, e: &TypedExpr) -> Bitset {
    match e {
        TypedExpr::And(a, b) => {
            let mut x = eval(cat, a);
            if x.count_ones() > 0 {
                x.and_with(&eval(cat, b));
            }
            x
        }
        TypedExpr::Or(a, b) => {
            let mut x = eval(cat, a);
            x.or_with(&eval(cat, b));
            x
        }
        TypedExpr::Not(a) => {
            let mut x = eval(cat, a);
            x.negate();
            x
        }
        TypedExpr::Leaf(p) => leaf(cat, p),
    }
}

fn numeric(cat: &CompressedCatalog, c: usize) -> (&Bitset, &[f64]) {
    match &cat.columns[c] {
        Column::Numeric { valid, values } => (valid, values),
        _ => unreachable!("typechecked numeric column"),
    }
}

fn string(cat: &CompressedCatalog, c: usize) -> (&Bitset, &Dictionary, &[u32]) {
    match &cat.columns[c] {
        Column::String { valid, dict, codes } => (valid, dict, codes),
        _ => unreachable!("typechecked string column"),
    }
}

fn boolean(cat: &CompressedCatalog, c: usize) -> (&Bitset, &Bitset) {
    match &cat.columns[c] {
        Column::Boolean { valid, values } => (valid, values),
        _ => unreachable!("typechecked boolean column"),
    }
}

fn list(cat: &CompressedCatalog, c: usize) -> (&Bitset, &Dictionary, &[u64], &[u32]) {
    match &cat.columns[c] {
        Column::StringList {
            valid,
            dict,
            offsets,
            codes,
        } => (valid, dict, offsets, codes),
        _ => unreachable!("typechecked string_list column"),
    }
}

fn masked(mut bits: Bitset, valid: &Bitset) -> Bitset {
    bits.and_with(valid);
    bits
}

macro_rules! cmp_bits {
    ($n:expr, $op:expr, |$i:ident| $a:expr, $b:expr) => {
        match $op {
            CmpOp::Eq => Bitset::from_fn($n, |$i| $a == $b),
            CmpOp::Ne => Bitset::from_fn($n, |$i| $a != $b),
            CmpOp::Lt => Bitset::from_fn($n, |$i| $a < $b),
            CmpOp::Le => Bitset::from_fn($n, |$i| $a <= $b),
            CmpOp::Gt => Bitset::from_fn($n, |$i| $a > $b),
            CmpOp::Ge => Bitset::from_fn($n, |$i| $a >= $b),
        }
    };
}

/// Per-dictionary-entry truth table applied through the code array.
fn by_code(valid: &Bitset, codes: &[u32], table: &[bool]) -> Bitset {
    masked(
        Bitset::from_fn(codes.len(), |i| table[codes[i] as usize]),
        valid,
    )
}

fn leaf(cat: &CompressedCatalog, p: &Pred) -> Bitset {
    let n = cat.len();
    match p {
        Pred::Num {
            lhs,
            op,
            rhs: Arg::Lit(v),
        } => {
            let (valid, a) = numeric(cat, *lhs);
            let v = *v;
            masked(cmp_bits!(n, *op, |i| a[i], v), valid)
        }
        Pred::Num {
            lhs,
            op,
            rhs: Arg::Col(r),
        } => {
            let ((va, a), (vb, b)) = (numeric(cat, *lhs), numeric(cat, *r));
            masked(masked(cmp_bits!(n, *op, |i| a[i], b[i]), va), vb)
        }
        Pred::Str {
            lhs,
            op,
            rhs: Arg::Lit(s),
        } => {
            let (valid, dict, codes) = string(cat, *lhs);
            let table: Vec<bool> = dict
                .entries
                .iter()
                .map(|e| op.apply(e.as_str(), s.as_str()))
                .collect();
            by_code(valid, codes, &table)
        }
        Pred::Str {
            lhs,
            op,
            rhs: Arg::Col(r),
        } => {
            let ((va, da, ca), (vb, db, cb)) = (string(cat, *lhs), string(cat, *r));
            let bits = Bitset::from_fn(n, |i| {
                op.apply(
                    da.entries[ca[i] as usize].as_str(),
                    db.entries[cb[i] as usize].as_str(),
                )
            });
            masked(masked(bits, va), vb)
        }
        Pred::Bool {
            lhs,
            op,
            rhs: Arg::Lit(b),
        } => {
            let (valid, values) = boolean(cat, *lhs);
            let mut bits = values.clone();
            if (*op == CmpOp::Eq) != *b {
                bits.negate();
            }
            masked(bits, valid)
        }
        Pred::Bool {
            lhs,
            op,
            rhs: Arg::Col(r),
        } => {
            let ((va, a), (vb, b)) = (boolean(cat, *lhs), boolean(cat, *r));
            let bits = Bitset::from_fn(n, |i| op.apply(&a.get(i), &b.get(i)));
            masked(masked(bits, va), vb)
        }
        Pred::BoolAttr(c) => {
            let (valid, values) = boolean(cat, *c);
            masked(values.clone(), valid)
        }
        Pred::InNums { col, values } => {
            let (valid, a) = numeric(cat, *col);
            masked(Bitset::from_fn(n, |i| values.contains(&a[i])), valid)
        }
        Pred::InStrs { col, values } => {
            let (valid, dict, codes) = string(cat, *col);
            let table: Vec<bool> = dict.entries.iter().map(|e| values.contains(e)).collect();
            by_code(valid, codes, &table)
        }
        Pred::InBools { col, values } => {
            let (valid, a) = boolean(cat, *col);
            let (t, f) = (values.contains(&true), values.contains(&false));
            masked(Bitset::from_fn(n, |i| if a.get(i) { t } else { f }), valid)
        }
        Pred::Substr {
            hay: Arg::Col(h),
            needle: Arg::Lit(s),
        } => {
            let (valid, dict, codes) = string(cat, *h);
            let table: Vec<bool> = dict
                .entries
                .iter()
                .map(|e| e.contains(s.as_str()))
                .collect();
            by_code(valid, codes, &table)
        }
        Pred::Substr {
            hay: Arg::Lit(s),
            needle: Arg::Col(c),
        } => {
            let (valid, dict, codes) = string(cat, *c);
            let table: Vec<bool> = dict
                .entries
                .iter()
                .map(|e| s.contains(e.as_str()))
                .collect();
            by_code(valid, codes, &table)
        }
        Pred::Substr {
            hay: Arg::Col(h),
            needle: Arg::Col(c),
        } => {
            let ((va, da, ca), (vb, db, cb)) = (string(cat, *h), string(cat, *c));
            let bits = Bitset::from_fn(n, |i| {
                da.entries[ca[i] as usize].contains(db.entries[cb[i] as usize].as_str())
            });
            masked(masked(bits, va), vb)
        }
        Pred::Substr {
            hay: Arg::Lit(_),
            needle: Arg::Lit(_),
        } => unreachable!("parser requires an attribute"),
        Pred::ListHas {
            list: l,
            needle: Arg::Lit(s),
        } => {
            let (valid, dict, offsets, codes) = list(cat, *l);
            match dict.code(s) {
                None => Bitset::new(n),
                Some(c) => masked(
                    Bitset::from_fn(n, |i| {
                        codes[offsets[i] as usize..offsets[i + 1] as usize].contains(&c)
                    }),
                    valid,
                ),
            }
        }
        Pred::ListHas {
            list: l,
            needle: Arg::Col(s),
        } => {
            let (va, dict, offsets, codes) = list(cat, *l);
            let (vb, sd, sc) = string(cat, *s);
            let bits = Bitset::from_fn(n, |i| {
                let needle = sd.entries[sc[i] as usize].as_str();
                codes[offsets[i] as usize..offsets[i + 1] as usize]
                    .iter()
                    .any(|&c| dict.entries[c as usize] == needle)
            });
            masked(masked(bits, va), vb)
        }
    }
}

/// Row-at-a-time interpretation over decoded records; the reference the
/// columnar path is tested against.
pub fn filter_naive(rows: &[ItemRecord], query: &TypedQuery) -> CandidateSet {
    CandidateSet::from_bitset(Bitset::from_fn(rows.len(), |i| {
        eval_row(&rows[i], &query.expr)
    }))
}

fn eval_row(row: &ItemRecord, e: &TypedExpr) -> bool {
    match e {
        TypedExpr::And(a, b) => eval_row(row, a) && eval_row(row, b),
        TypedExpr::Or(a, b) => eval_row(row, a) || eval_row(row, b),
        TypedExpr::Not(a) => !eval_row(row, a),
        TypedExpr::Leaf(p) => leaf_row(row, p).unwrap_or(false),
    }
}

fn lit_or_col<'a, T>(row: &'a ItemRecord, a: &'a Arg<T>) -> Option<Result<&'a T, &'a Value>> {
    match a {
        Arg::Lit(v) => Some(Ok(v)),
        Arg::Col(c) => row.values[*c].as_ref().map(Err),
    }
}

fn num(row: &ItemRecord, a: &Arg<f64>) -> Option<f64> {
    match lit_or_col(row, a)? {
        Ok(v) => Some(*v),
        Err(Value::Number(v)) => Some(*v),
        Err(_) => None,
    }
}

fn text<'a>(row: &'a ItemRecord, a: &'a Arg<String>) -> Option<&'a str> {
    match lit_or_col(row, a)? {
        Ok(s) => Some(s),
        Err(Value::Str(s)) => Some(s),
        Err(_) => None,
    }
}

fn flag(row: &ItemRecord, a: &Arg<bool>) -> Option<bool> {
    match lit_or_col(row, a)? {
        Ok(b) => Some(*b),
        Err(Value::Bool(b)) => Some(*b),
        Err(_) => None,
    }
}

/// `None` means a null was involved.
fn leaf_row(row: &ItemRecord, p: &Pred) -> Option<bool> {
    Some(match p {
        Pred::Num { lhs, op, rhs } => op.apply(&num(row, &Arg::Col(*lhs))?, &num(row, rhs)?),
        Pred::Str { lhs, op, rhs } => {
            let l = Arg::Col(*lhs);
            op.apply(text(row, &l)?, text(row, rhs)?)
        }
        Pred::Bool { lhs, op, rhs } => op.apply(&flag(row, &Arg::Col(*lhs))?, &flag(row, rhs)?),
        Pred::BoolAttr(c) => flag(row, &Arg::Col(*c))?,
        Pred::InNums { col, values } => values.contains(&num(row, &Arg::Col(*col))?),
        Pred::InStrs { col, values } => {
            let l = Arg::Col(*col);
            let s = text(row, &l)?;
            values.iter().any(|v| v == s)
        }
        Pred::InBools { col, values } => values.contains(&flag(row, &Arg::Col(*col))?),
        Pred::Substr { hay, needle } => text(row, hay)?.contains(text(row, needle)?),
        Pred::ListHas { list, needle } => {
            let Some(Value::List(items)) = &row.values[*list] else {
                return None;
            };
            let n = text(row, needle)?;
            items.iter().any(|s| s == n)
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::iql::{compile, load_catalog, CatalogSchema};

    fn catalog() -> CompressedCatalog {
        let schema = CatalogSchema::from_json(
            r#"{"price":"numeric","brand":"string","tags":"string_list","new":"boolean","alt":"string"}"#,
        )
        .unwrap();
        let rows = r#"{"id":"0","price":5,"brand":"acme","tags":["red","blue"],"new":true,"alt":"acme"}
{"id":"1","price":10,"brand":"zenith","tags":[],"new":false,"alt":"zen"}
{"id":"2","price":20,"tags":["blue"],"alt":"x"}
"#;
        load_catalog(rows.as_bytes(), &schema).unwrap().0
    }

    fn run(q: &str) -> Vec<usize> {
        let c = catalog();
        let tq = compile(q, c.schema()).unwrap();
        let fast = filter(&c, &tq).unwrap();
        assert_eq!(fast, filter_naive(&c.decode(), &tq), "{q}");
        fast.iter().collect()
    }

    #[test]
    fn spec_cases() {
        assert_eq!(run("price > 7"), [1, 2]);
        assert_eq!(run("price > 7 or price <= 7"), [0, 1, 2]);
        assert_eq!(run("brand == \"acme\""), [0]);
    }

    #[test]
    fn nulls_are_false_before_negation() {
        assert_eq!(run("brand != \"acme\""), [1]);
        assert_eq!(run("not brand == \"acme\""), [1, 2]);
        assert_eq!(run("new"), [0]);
        assert_eq!(run("not new"), [1, 2]);
        assert_eq!(run("new == false"), [1]);
    }

    #[test]
    fn operators() {
        assert_eq!(run("\"blue\" in tags"), [0, 2]);
        assert_eq!(run("tags contains \"red\""), [0]);
        assert_eq!(run("tags contains \"gray\""), Vec::<usize>::new());
        assert_eq!(run("brand contains \"en\""), [1]);
        assert_eq!(run("brand contains alt"), [0, 1]);
        assert_eq!(run("\"acme corp\" contains brand"), [0]);
        assert_eq!(run("brand == alt"), [0]);
        assert_eq!(run("price in [10, 20, 30]"), [1, 2]);
        assert_eq!(run("brand in [\"zenith\", \"q\"]"), [1]);
        assert_eq!(run("new in [false]"), [1]);
        assert_eq!(run("price in []"), Vec::<usize>::new());
        assert_eq!(run("8 > price"), [0]);
        assert_eq!(run("price < price"), Vec::<usize>::new());
        assert_eq!(run("alt in tags"), Vec::<usize>::new());
        assert_eq!(run("new == new"), [0, 1]);
    }

    #[test]
    fn empty_catalog() {
        let schema = CatalogSchema::from_json(r#"{"price":"numeric"}"#).unwrap();
        let c = CompressedCatalog::empty(schema);
        let q = compile("price > 1", c.schema()).unwrap();
        assert!(filter(&c, &q).unwrap().is_empty());
        assert!(filter_naive(&[], &q).is_empty());
    }

    #[test]
    fn schema_must_match() {
        let other = CatalogSchema::from_json(r#"{"price":"numeric"}"#).unwrap();
        let q = compile("price > 1", &other).unwrap();
        assert!(filter(&catalog(), &q).is_err());
    }

    #[test]
    fn candidate_set_round_trip() {
        let s = CandidateSet::from_ids(130, [0, 64, 129]);
        assert_eq!(s.count(), 3);
        let bytes = s.to_bytes();
        assert_eq!(&bytes[..4], b"FRC1");
        assert_eq!(bytes.len(), 4 + 8 + 3 * 8);
        assert_eq!(CandidateSet::read(bytes.as_slice()).unwrap(), s);
    }
}
