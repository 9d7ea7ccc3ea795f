//! Sketch-related binary formats.
//!
//! `FRS1` (one sketch):
//! ```text
//! magic "FRS1"
//! u32 depth, u32 bits, u64 input_dim, u64 seed    layout header
//! u8  kind (0 = counts, 1 = probabilities)
//! depth * 2^bits f64 cells, row-major
//! ```
//! `FRK1` (item code table): layout header, `u64 N`, then `N x {str label,
//! depth x u32 bucket}`.
//!
//! `FRU1` (user sketches): `u64 N`, then `N x {str user, FRS1 record}`.

use std::collections::HashMap;
use std::io::{Read, Write};

use rayon::prelude::*;

use super::{CodeSet, LayoutKey, Result, Sketch, SketchKind, SketchLayout, MAX_BITS};
use crate::codec::*;
use crate::embedding::NodeEmbeddings;

const SKETCH_MAGIC: &[u8; 4] = b"FRS1";
const CODES_MAGIC: &[u8; 4] = b"FRK1";
const USERS_MAGIC: &[u8; 4] = b"FRU1";

pub(crate) fn write_layout_key<W: Write>(w: &mut W, key: &LayoutKey) -> std::io::Result<()> {
    write_u32(w, key.depth as u32)?;
    write_u32(w, key.bits)?;
    write_u64(w, key.input_dim as u64)?;
    write_u64(w, key.seed)
}

pub(crate) fn read_layout_key<R: Read>(r: &mut R) -> FormatResult<LayoutKey> {
    let depth = read_u32(r)? as usize;
    let bits = read_u32(r)?;
    let input_dim = read_len(r, "input_dim")?;
    let seed = read_u64(r)?;
    if depth == 0 || bits == 0 || bits > MAX_BITS {
        return Err(FormatError::Corrupt(format!(
            "bad layout header D={depth} b={bits}"
        )));
    }
    Ok(LayoutKey {
        depth,
        bits,
        input_dim,
        seed,
    })
}

pub fn write_sketch<W: Write>(s: &Sketch, mut w: W) -> Result<()> {
    write_magic(&mut w, SKETCH_MAGIC)?;
    write_layout_key(&mut w, &s.key())?;
    write_u8(&mut w, matches!(s.kind(), SketchKind::Probabilities) as u8)?;
    write_f64s(&mut w, s.cells())?;
    Ok(())
}

pub fn read_sketch<R: Read>(mut r: R) -> Result<Sketch> {
    read_magic(&mut r, SKETCH_MAGIC)?;
    let key = read_layout_key(&mut r)?;
    let kind = match read_u8(&mut r)? {
        0 => SketchKind::Counts,
        1 => SketchKind::Probabilities,
        k => return Err(FormatError::Corrupt(format!("unknown sketch kind {k}")).into()),
    };
    let cells = read_f64s(&mut r, key.cells())?;
    Sketch::from_cells(key, kind, cells)
}

/// Code set of every (non-virtual) item, in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCodes {
    key: LayoutKey,
    labels: Vec<String>,
    codes: Vec<CodeSet>,
    positions: HashMap<String, usize>,
}

impl ItemCodes {
    pub fn new(key: LayoutKey, labels: Vec<String>, codes: Vec<CodeSet>) -> Self {
        let positions = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.clone(), i))
            .collect();
        Self {
            key,
            labels,
            codes,
            positions,
        }
    }

    /// Encodes every non-virtual embedding row.
    pub fn encode_embeddings(emb: &NodeEmbeddings, layout: &SketchLayout) -> Result<Self> {
        let rows: Vec<(u32, &str)> = emb
            .index
            .iter()
            .filter(|(_, _, is_virtual)| !is_virtual)
            .map(|(id, l, _)| (id, l.as_str()))
            .collect();
        let codes = rows
            .par_iter()
            .map(|(id, _)| layout.encode(emb.matrix.row(*id as usize)))
            .collect::<Result<Vec<_>>>()?;
        let labels = rows.iter().map(|(_, l)| l.to_string()).collect();
        Ok(Self::new(layout.key(), labels, codes))
    }

    pub fn key(&self) -> LayoutKey {
        self.key
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn codes(&self) -> &[CodeSet] {
        &self.codes
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.positions.get(label).copied()
    }

    pub fn get(&self, label: &str) -> Option<&CodeSet> {
        self.position(label).map(|i| &self.codes[i])
    }
}

pub fn write_item_codes<W: Write>(codes: &ItemCodes, mut w: W) -> Result<()> {
    write_magic(&mut w, CODES_MAGIC)?;
    write_layout_key(&mut w, &codes.key)?;
    write_u64(&mut w, codes.len() as u64)?;
    for (label, c) in codes.labels.iter().zip(&codes.codes) {
        write_str(&mut w, label)?;
        for &b in c.buckets() {
            write_u32(&mut w, b)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_item_codes<R: Read>(mut r: R) -> Result<ItemCodes> {
    read_magic(&mut r, CODES_MAGIC)?;
    let key = read_layout_key(&mut r)?;
    let n = read_len(&mut r, "item")?;
    let mut labels = Vec::with_capacity(n);
    let mut codes = Vec::with_capacity(n);
    for _ in 0..n {
        labels.push(read_str(&mut r)?);
        let mut buckets = Vec::with_capacity(key.depth);
        for _ in 0..key.depth {
            let b = read_u32(&mut r)?;
            if b as usize >= key.width() {
                return Err(FormatError::Corrupt(format!(
                    "bucket {b} outside width {}",
                    key.width()
                ))
                .into());
            }
            buckets.push(b);
        }
        codes.push(CodeSet::new(buckets));
    }
    Ok(ItemCodes::new(key, labels, codes))
}

pub fn write_user_sketches<W: Write>(users: &[(String, Sketch)], mut w: W) -> Result<()> {
    write_magic(&mut w, USERS_MAGIC)?;
    write_u64(&mut w, users.len() as u64)?;
    for (user, s) in users {
        write_str(&mut w, user)?;
        write_sketch(s, &mut w)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_user_sketches<R: Read>(mut r: R) -> Result<Vec<(String, Sketch)>> {
    read_magic(&mut r, USERS_MAGIC)?;
    let n = read_len(&mut r, "user")?;
    (0..n)
        .map(|_| Ok((read_str(&mut r)?, read_sketch(&mut r)?)))
        .collect()
}
