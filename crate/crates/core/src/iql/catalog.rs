//! Columnar item catalog.
//!
//! Binary form (`FRI1`): `u64 n_items`, `u32 n_attrs`, then per attribute
//! `{str name, u8 type}`, the ids as strings, then one column per attribute:
//!
//! ```text
//! numeric      validity words, n f64
//! string       validity words, u64 dict_len, dict strings, n u32 codes
//! string_list  validity words, u64 dict_len, dict strings, n+1 u64 offsets, u64 m, m u32 codes
//! boolean      validity words, value words
//! ```

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde_json::{Map, Value as Json};

use super::bitset::Bitset;
use super::IqlError;
use crate::codec::*;

const MAGIC: &[u8; 4] = b"FRI1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum AttrType {
    Numeric,
    String,
    StringList,
    Boolean,
}

impl AttrType {
    fn tag(self) -> u8 {
        match self {
            AttrType::Numeric => 0,
            AttrType::String => 1,
            AttrType::StringList => 2,
            AttrType::Boolean => 3,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        Some(match tag {
            0 => AttrType::Numeric,
            1 => AttrType::String,
            2 => AttrType::StringList,
            3 => AttrType::Boolean,
            _ => return None,
        })
    }
}

impl fmt::Display for AttrType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AttrType::Numeric => "numeric",
            AttrType::String => "string",
            AttrType::StringList => "string_list",
            AttrType::Boolean => "boolean",
        })
    }
}

impl FromStr for AttrType {
    type Err = IqlError;

    fn from_str(s: &str) -> Result<Self, IqlError> {
        Ok(match s {
            "numeric" => AttrType::Numeric,
            "string" => AttrType::String,
            "string_list" => AttrType::StringList,
            "boolean" => AttrType::Boolean,
            other => {
                return Err(IqlError::Schema(format!(
                    "unknown attribute type {other:?}"
                )))
            }
        })
    }
}

/// Attribute name to type, in name order. `id` is reserved for the item id.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CatalogSchema {
    attrs: Vec<(String, AttrType)>,
}

impl CatalogSchema {
    pub fn new(attrs: impl IntoIterator<Item = (String, AttrType)>) -> Result<Self, IqlError> {
        let mut map = BTreeMap::new();
        for (name, ty) in attrs {
            if name.is_empty() || name == "id" {
                return Err(IqlError::Schema(format!("invalid attribute name {name:?}")));
            }
            if map.insert(name.clone(), ty).is_some() {
                return Err(IqlError::Schema(format!("duplicate attribute {name:?}")));
            }
        }
        Ok(Self {
            attrs: map.into_iter().collect(),
        })
    }

    /// Reads a JSON object such as `{"price": "numeric", "tags": "string_list"}`.
    pub fn from_json(text: &str) -> Result<Self, IqlError> {
        let obj: Map<String, Json> = serde_json::from_str(text)?;
        let attrs = obj
            .into_iter()
            .map(|(k, v)| match v.as_str() {
                Some(t) => Ok((k, t.parse()?)),
                None => Err(IqlError::Schema(format!("type of {k:?} must be a string"))),
            })
            .collect::<Result<Vec<_>, IqlError>>()?;
        Self::new(attrs)
    }

    pub fn to_json(&self) -> String {
        let obj: Map<String, Json> = self
            .attrs
            .iter()
            .map(|(k, t)| (k.clone(), Json::from(t.to_string())))
            .collect();
        Json::Object(obj).to_string()
    }

    pub fn attrs(&self) -> &[(String, AttrType)] {
        &self.attrs
    }

    pub fn len(&self) -> usize {
        self.attrs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.attrs.is_empty()
    }

    /// Column index and type of an attribute.
    pub fn lookup(&self, name: &str) -> Option<(usize, AttrType)> {
        self.attrs
            .binary_search_by(|(n, _)| n.as_str().cmp(name))
            .ok()
            .map(|i| (i, self.attrs[i].1))
    }
}

/// One decoded attribute value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Number(f64),
    Str(String),
    List(Vec<String>),
    Bool(bool),
}

impl Value {
    fn to_json(&self) -> Json {
        match self {
            Value::Number(v) => Json::from(*v),
            Value::Str(s) => Json::from(s.as_str()),
            Value::List(l) => Json::from(l.clone()),
            Value::Bool(b) => Json::from(*b),
        }
    }

    fn from_json(v: &Json, ty: AttrType) -> Option<Option<Value>> {
        if v.is_null() {
            return Some(None);
        }
        let value = match ty {
            AttrType::Numeric => Value::Number(v.as_f64().filter(|x| x.is_finite())?),
            AttrType::String => Value::Str(v.as_str()?.to_string()),
            AttrType::Boolean => Value::Bool(v.as_bool()?),
            AttrType::StringList => Value::List(
                v.as_array()?
                    .iter()
                    .map(|e| e.as_str().map(str::to_string))
                    .collect::<Option<_>>()?,
            ),
        };
        Some(Some(value))
    }
}

/// A decoded row: id plus one optional value per schema attribute.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemRecord {
    pub id: String,
    pub values: Vec<Option<Value>>,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Dictionary {
    pub(crate) entries: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl Dictionary {
    fn new() -> Self {
        Self {
            entries: Vec::new(),
            lookup: HashMap::new(),
        }
    }

    fn intern(&mut self, s: &str) -> u32 {
        if let Some(&c) = self.lookup.get(s) {
            return c;
        }
        let c = self.entries.len() as u32;
        self.entries.push(s.to_string());
        self.lookup.insert(s.to_string(), c);
        c
    }

    pub(crate) fn code(&self, s: &str) -> Option<u32> {
        self.lookup.get(s).copied()
    }

    fn from_entries(entries: Vec<String>) -> Result<Self, FormatError> {
        let lookup: HashMap<String, u32> = entries
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        if lookup.len() != entries.len() {
            return Err(FormatError::Corrupt("duplicate dictionary entry".into()));
        }
        Ok(Self { entries, lookup })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Column {
    Numeric {
        valid: Bitset,
        values: Vec<f64>,
    },
    String {
        valid: Bitset,
        dict: Dictionary,
        codes: Vec<u32>,
    },
    StringList {
        valid: Bitset,
        dict: Dictionary,
        offsets: Vec<u64>,
        codes: Vec<u32>,
    },
    Boolean {
        valid: Bitset,
        values: Bitset,
    },
}

impl Column {
    fn empty(ty: AttrType) -> Self {
        let valid = Bitset::new(0);
        match ty {
            AttrType::Numeric => Column::Numeric {
                valid,
                values: Vec::new(),
            },
            AttrType::String => Column::String {
                valid,
                dict: Dictionary::new(),
                codes: Vec::new(),
            },
            AttrType::StringList => Column::StringList {
                valid,
                dict: Dictionary::new(),
                offsets: vec![0],
                codes: Vec::new(),
            },
            AttrType::Boolean => Column::Boolean {
                valid,
                values: Bitset::new(0),
            },
        }
    }

    pub(crate) fn valid(&self) -> &Bitset {
        match self {
            Column::Numeric { valid, .. }
            | Column::String { valid, .. }
            | Column::StringList { valid, .. }
            | Column::Boolean { valid, .. } => valid,
        }
    }

    fn push(&mut self, v: Option<&Value>) {
        match (self, v) {
            (Column::Numeric { valid, values }, v) => {
                let x = match v {
                    Some(Value::Number(x)) => Some(*x),
                    _ => None,
                };
                valid.push(x.is_some());
                values.push(x.unwrap_or(0.0));
            }
            (Column::String { valid, dict, codes }, v) => {
                let code = match v {
                    Some(Value::Str(s)) => Some(dict.intern(s)),
                    _ => None,
                };
                valid.push(code.is_some());
                codes.push(code.unwrap_or(0));
            }
            (
                Column::StringList {
                    valid,
                    dict,
                    offsets,
                    codes,
                },
                v,
            ) => {
                let list = match v {
                    Some(Value::List(l)) => Some(l),
                    _ => None,
                };
                valid.push(list.is_some());
                for s in list.into_iter().flatten() {
                    codes.push(dict.intern(s));
                }
                offsets.push(codes.len() as u64);
            }
            (Column::Boolean { valid, values }, v) => {
                let b = match v {
                    Some(Value::Bool(b)) => Some(*b),
                    _ => None,
                };
                valid.push(b.is_some());
                values.push(b.unwrap_or(false));
            }
        }
    }

    pub(crate) fn value(&self, row: usize) -> Option<Value> {
        if !self.valid().get(row) {
            return None;
        }
        Some(match self {
            Column::Numeric { values, .. } => Value::Number(values[row]),
            Column::String { dict, codes, .. } => {
                Value::Str(dict.entries[codes[row] as usize].clone())
            }
            Column::StringList {
                dict,
                offsets,
                codes,
                ..
            } => Value::List(
                codes[offsets[row] as usize..offsets[row + 1] as usize]
                    .iter()
                    .map(|&c| dict.entries[c as usize].clone())
                    .collect(),
            ),
            Column::Boolean { values, .. } => Value::Bool(values.get(row)),
        })
    }
}

/// Immutable columnar catalog. Item ids are positions in load order.
#[derive(Debug, Clone, PartialEq)]
pub struct CompressedCatalog {
    schema: CatalogSchema,
    ids: Vec<String>,
    positions: HashMap<String, u32>,
    pub(crate) columns: Vec<Column>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LoadStats {
    pub loaded: usize,
    /// Lines skipped as unparseable, id-less, or with values of the wrong type.
    pub malformed: usize,
    /// Null count per attribute, in schema order.
    pub nulls: Vec<(String, usize)>,
}

impl CompressedCatalog {
    pub fn empty(schema: CatalogSchema) -> Self {
        let columns = schema
            .attrs()
            .iter()
            .map(|(_, t)| Column::empty(*t))
            .collect();
        Self {
            schema,
            ids: Vec::new(),
            positions: HashMap::new(),
            columns,
        }
    }

    /// Appends one row. Fails on a duplicate id or a value of the wrong type.
    pub fn push(&mut self, record: &ItemRecord) -> Result<u32, IqlError> {
        if record.values.len() != self.schema.len() {
            return Err(IqlError::Schema(format!(
                "record has {} values, schema has {}",
                record.values.len(),
                self.schema.len()
            )));
        }
        for ((name, ty), v) in self.schema.attrs().iter().zip(&record.values) {
            let ok = matches!(
                (ty, v),
                (_, None)
                    | (AttrType::Numeric, Some(Value::Number(_)))
                    | (AttrType::String, Some(Value::Str(_)))
                    | (AttrType::StringList, Some(Value::List(_)))
                    | (AttrType::Boolean, Some(Value::Bool(_)))
            );
            if !ok {
                return Err(IqlError::Schema(format!("value for {name:?} is not {ty}")));
            }
        }
        if self.positions.contains_key(&record.id) {
            return Err(IqlError::DuplicateId(record.id.clone()));
        }
        let pos = self.ids.len() as u32;
        self.positions.insert(record.id.clone(), pos);
        self.ids.push(record.id.clone());
        for (col, v) in self.columns.iter_mut().zip(&record.values) {
            col.push(v.as_ref());
        }
        Ok(pos)
    }

    pub fn schema(&self) -> &CatalogSchema {
        &self.schema
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn position(&self, id: &str) -> Option<u32> {
        self.positions.get(id).copied()
    }

    pub fn null_count(&self, attr: &str) -> Option<usize> {
        let (i, _) = self.schema.lookup(attr)?;
        let valid = self.columns[i].valid();
        Some(self.len() - valid.count_ones())
    }

    pub fn record(&self, row: usize) -> ItemRecord {
        ItemRecord {
            id: self.ids[row].clone(),
            values: self.columns.iter().map(|c| c.value(row)).collect(),
        }
    }

    pub fn decode(&self) -> Vec<ItemRecord> {
        (0..self.len()).map(|r| self.record(r)).collect()
    }

    /// One JSON object per item; null attributes are omitted.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), IqlError> {
        for r in 0..self.len() {
            let mut obj = Map::new();
            obj.insert("id".into(), Json::from(self.ids[r].as_str()));
            for ((name, _), col) in self.schema.attrs().iter().zip(&self.columns) {
                if let Some(v) = col.value(r) {
                    obj.insert(name.clone(), v.to_json());
                }
            }
            serde_json::to_writer(&mut w, &Json::Object(obj))?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_binary(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn write_binary<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        write_magic(&mut w, MAGIC)?;
        write_u64(&mut w, self.len() as u64)?;
        write_u32(&mut w, self.schema.len() as u32)?;
        for (name, ty) in self.schema.attrs() {
            write_str(&mut w, name)?;
            write_u8(&mut w, ty.tag())?;
        }
        for id in &self.ids {
            write_str(&mut w, id)?;
        }
        let write_dict = |w: &mut W, d: &Dictionary| -> std::io::Result<()> {
            write_u64(w, d.entries.len() as u64)?;
            d.entries.iter().try_for_each(|s| write_str(w, s))
        };
        for col in &self.columns {
            col.valid().write_words(&mut w)?;
            match col {
                Column::Numeric { values, .. } => write_f64s(&mut w, values)?,
                Column::String { dict, codes, .. } => {
                    write_dict(&mut w, dict)?;
                    codes.iter().try_for_each(|&c| write_u32(&mut w, c))?;
                }
                Column::StringList {
                    dict,
                    offsets,
                    codes,
                    ..
                } => {
                    write_dict(&mut w, dict)?;
                    offsets.iter().try_for_each(|&o| write_u64(&mut w, o))?;
                    write_u64(&mut w, codes.len() as u64)?;
                    codes.iter().try_for_each(|&c| write_u32(&mut w, c))?;
                }
                Column::Boolean { values, .. } => values.write_words(&mut w)?,
            }
        }
        w.flush()
    }

    pub fn read_binary<R: Read>(mut r: R) -> Result<Self, IqlError> {
        read_magic(&mut r, MAGIC)?;
        let n = read_len(&mut r, "item")?;
        let n_attrs = read_u32(&mut r)? as usize;
        let mut attrs = Vec::with_capacity(n_attrs);
        for _ in 0..n_attrs {
            let name = read_str(&mut r)?;
            let tag = read_u8(&mut r)?;
            let ty = AttrType::from_tag(tag)
                .ok_or_else(|| FormatError::Corrupt(format!("attribute type {tag}")))?;
            attrs.push((name, ty));
        }
        let schema = CatalogSchema::new(attrs)?;
        let ids = (0..n)
            .map(|_| read_str(&mut r))
            .collect::<FormatResult<Vec<_>>>()?;
        let positions: HashMap<String, u32> = ids
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i as u32))
            .collect();
        if positions.len() != n {
            return Err(FormatError::Corrupt("duplicate item id".into()).into());
        }
        let read_dict = |r: &mut R| -> FormatResult<Dictionary> {
            let len = read_len(r, "dictionary")?;
            Dictionary::from_entries((0..len).map(|_| read_str(r)).collect::<FormatResult<_>>()?)
        };
        let read_codes = |r: &mut R, m: usize, dict: &Dictionary| -> FormatResult<Vec<u32>> {
            (0..m)
                .map(|_| {
                    let c = read_u32(r)?;
                    if c as usize >= dict.entries.len().max(1) {
                        return Err(FormatError::Corrupt(format!(
                            "dictionary code {c} out of range"
                        )));
                    }
                    Ok(c)
                })
                .collect()
        };
        let mut columns = Vec::with_capacity(n_attrs);
        for (_, ty) in schema.attrs() {
            let valid = Bitset::read_words(&mut r, n)?;
            columns.push(match ty {
                AttrType::Numeric => Column::Numeric {
                    valid,
                    values: read_f64s(&mut r, n)?,
                },
                AttrType::String => {
                    let dict = read_dict(&mut r)?;
                    let codes = read_codes(&mut r, n, &dict)?;
                    Column::String { valid, dict, codes }
                }
                AttrType::StringList => {
                    let dict = read_dict(&mut r)?;
                    let offsets = (0..=n)
                        .map(|_| read_u64(&mut r))
                        .collect::<std::io::Result<Vec<_>>>()?;
                    let m = read_len(&mut r, "list code")?;
                    if offsets[0] != 0
                        || offsets.windows(2).any(|w| w[0] > w[1])
                        || offsets[n] != m as u64
                    {
                        return Err(FormatError::Corrupt("bad list offsets".into()).into());
                    }
                    let codes = read_codes(&mut r, m, &dict)?;
                    Column::StringList {
                        valid,
                        dict,
                        offsets,
                        codes,
                    }
                }
                AttrType::Boolean => Column::Boolean {
                    valid,
                    values: Bitset::read_words(&mut r, n)?,
                },
            });
        }
        Ok(Self {
            schema,
            ids,
            positions,
            columns,
        })
    }
}

fn parse_line(line: &str, schema: &CatalogSchema) -> Option<ItemRecord> {
    let obj: Map<String, Json> = serde_json::from_str(line).ok()?;
    let id = match obj.get("id")? {
        Json::String(s) => s.clone(),
        Json::Number(n) if n.is_u64() || n.is_i64() => n.to_string(),
        _ => return None,
    };
    let values = schema
        .attrs()
        .iter()
        .map(|(name, ty)| match obj.get(name) {
            None => Some(None),
            Some(v) => Value::from_json(v, *ty),
        })
        .collect::<Option<Vec<_>>>()?;
    Some(ItemRecord { id, values })
}

/// Loads one JSON object per line. Missing or null attributes become nulls.
/// Lines that do not parse, lack an id, or carry a value of the wrong type
/// are skipped and counted; a repeated id is an error.
pub fn load_catalog<R: BufRead>(
    r: R,
    schema: &CatalogSchema,
) -> Result<(CompressedCatalog, LoadStats), IqlError> {
    let mut catalog = CompressedCatalog::empty(schema.clone());
    let mut stats = LoadStats::default();
    let mut seen = HashSet::new();
    for (lineno, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let Some(record) = parse_line(&line, schema) else {
            stats.malformed += 1;
            continue;
        };
        if !seen.insert(record.id.clone()) {
            return Err(IqlError::DuplicateIdAt {
                id: record.id,
                line: lineno + 1,
            });
        }
        catalog.push(&record)?;
    }
    stats.loaded = catalog.len();
    stats.nulls = schema
        .attrs()
        .iter()
        .map(|(name, _)| (name.clone(), catalog.null_count(name).unwrap_or(0)))
        .collect();
    Ok((catalog, stats))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> CatalogSchema {
        CatalogSchema::from_json(
            r#"{"price":"numeric","brand":"string","tags":"string_list","in_stock":"boolean"}"#,
        )
        .unwrap()
    }

    const ROWS: &str = r#"{"id":"a","price":5,"brand":"acme","tags":["x","y"],"in_stock":true}
{"id":"b","price":10,"tags":[]}
not json
{"id":"c","price":20,"brand":"zen","tags":["y"],"in_stock":false}
{"id":"d","price":"cheap"}
"#;

    #[test]
    fn loads_columns_and_nulls() {
        let (c, stats) = load_catalog(ROWS.as_bytes(), &schema()).unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(stats.malformed, 2);
        assert_eq!(c.ids(), ["a", "b", "c"]);
        let (pi, _) = c.schema().lookup("price").unwrap();
        match &c.columns[pi] {
            Column::Numeric { values, .. } => assert_eq!(values, &[5.0, 10.0, 20.0]),
            _ => unreachable!(),
        }
        assert_eq!(c.null_count("brand"), Some(1));
        assert_eq!(c.null_count("tags"), Some(0));
        assert_eq!(
            c.record(1).values[c.schema().lookup("tags").unwrap().0],
            Some(Value::List(vec![]))
        );
        assert!(stats.nulls.contains(&("in_stock".to_string(), 1)));
    }

    #[test]
    fn duplicate_id_is_an_error() {
        let text = "{\"id\":\"a\"}\n{\"id\":\"a\"}\n";
        assert!(matches!(
            load_catalog(text.as_bytes(), &schema()),
            Err(IqlError::DuplicateIdAt { line: 2, .. })
        ));
    }

    #[test]
    fn schema_validation() {
        assert!(CatalogSchema::from_json(r#"{"id":"string"}"#).is_err());
        assert!(CatalogSchema::from_json(r#"{"x":"float"}"#).is_err());
        assert!(CatalogSchema::from_json(r#"{"":"string"}"#).is_err());
        let s = schema();
        assert_eq!(CatalogSchema::from_json(&s.to_json()).unwrap(), s);
        assert_eq!(s.lookup("brand"), Some((0, AttrType::String)));
    }

    #[test]
    fn reload_is_byte_identical() {
        let (c, _) = load_catalog(ROWS.as_bytes(), &schema()).unwrap();
        let mut jsonl = Vec::new();
        c.write_jsonl(&mut jsonl).unwrap();
        let (again, stats) = load_catalog(jsonl.as_slice(), &schema()).unwrap();
        assert_eq!(stats.malformed, 0);
        assert_eq!(again.to_bytes(), c.to_bytes());
        assert_eq!(again.decode(), c.decode());
        let back = CompressedCatalog::read_binary(c.to_bytes().as_slice()).unwrap();
        assert_eq!(back, c);
    }
}
