//! Embedding export formats.
//!
//! Text: a header line `N d`, then one line per node with the label and
//! `d` values at 9 significant digits, tab-separated. Virtual star hubs are
//! skipped.
//!
//! Binary `FRE1`: `u64 N`, `u64 d`, `N x {u8 flags, str label}`, then
//! `N * d` row-major `f64`. Keeps every row, so it round-trips exactly.

use std::io::{BufRead, Read, Write};

use super::{EmbedError, EmbeddingMatrix, NodeEmbeddings, Result};
use crate::codec::*;
use crate::graph::{NodeIndex, NodeLabel};

const MAGIC: &[u8; 4] = b"FRE1";

pub fn export_text<W: Write>(emb: &NodeEmbeddings, mut w: W) -> Result<()> {
    let dim = emb.matrix.dim();
    writeln!(w, "{} {}", emb.index.real_len(), dim)?;
    let mut line = String::new();
    for (id, label, is_virtual) in emb.index.iter() {
        if is_virtual {
            continue;
        }
        line.clear();
        line.push_str(label.as_str());
        for v in emb.matrix.row(id as usize) {
            use std::fmt::Write as _;
            write!(line, "\t{v:.8e}").unwrap();
        }
        line.push('\n');
        w.write_all(line.as_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn import_text<R: BufRead>(r: R) -> Result<NodeEmbeddings> {
    let mut lines = r.lines();
    let header = lines.next().ok_or(EmbedError::Parse {
        line: 1,
        msg: "missing header".into(),
    })??;
    let (n, dim) = header
        .split_once(' ')
        .and_then(|(a, b)| {
            Some((
                a.trim().parse::<usize>().ok()?,
                b.trim().parse::<usize>().ok()?,
            ))
        })
        .ok_or_else(|| EmbedError::Parse {
            line: 1,
            msg: format!("bad header {header:?}"),
        })?;
    let mut index = NodeIndex::new();
    let mut data = Vec::with_capacity(n * dim);
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let lineno = i + 2;
        let mut fields = line.split('\t');
        let label = NodeLabel::new(fields.next().unwrap_or_default())?;
        let before = data.len();
        for f in fields {
            let v = f.parse::<f64>().map_err(|e| EmbedError::Parse {
                line: lineno,
                msg: format!("bad value {f:?}: {e}"),
            })?;
            data.push(v);
        }
        if data.len() - before != dim {
            return Err(EmbedError::Parse {
                line: lineno,
                msg: format!("expected {dim} values, got {}", data.len() - before),
            });
        }
        index.insert(&label);
    }
    if index.len() != n {
        return Err(EmbedError::Parse {
            line: 1,
            msg: format!("header says {n} rows, found {}", index.len()),
        });
    }
    let matrix = EmbeddingMatrix::from_row_major(n, dim, data)?;
    Ok(NodeEmbeddings { index, matrix })
}

pub fn export_binary<W: Write>(emb: &NodeEmbeddings, mut w: W) -> Result<()> {
    write_magic(&mut w, MAGIC)?;
    write_u64(&mut w, emb.matrix.n_rows() as u64)?;
    write_u64(&mut w, emb.matrix.dim() as u64)?;
    for (_, label, is_virtual) in emb.index.iter() {
        write_u8(&mut w, is_virtual as u8)?;
        write_str(&mut w, label.as_str())?;
    }
    write_f64s(&mut w, emb.matrix.as_slice())?;
    w.flush()?;
    Ok(())
}

pub fn import_binary<R: Read>(mut r: R) -> Result<NodeEmbeddings> {
    read_magic(&mut r, MAGIC)?;
    let n = read_len(&mut r, "row")?;
    let dim = read_len(&mut r, "dim")?;
    let mut index = NodeIndex::new();
    for _ in 0..n {
        let flags = read_u8(&mut r)?;
        let label = NodeLabel::new(read_str(&mut r)?)?;
        if flags & 1 == 1 {
            index.insert_virtual(&label);
        } else {
            index.insert(&label);
        }
    }
    if index.len() != n {
        return Err(FormatError::Corrupt("duplicate labels in embedding file".into()).into());
    }
    let data = read_f64s(&mut r, n * dim)?;
    let matrix = EmbeddingMatrix::from_row_major(n, dim, data)?;
    Ok(NodeEmbeddings { index, matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::{embed, EmbedConfig};
    use crate::graph::{build_transition, parse_interactions, ExpansionMode, ParseConfig};

    fn sample(mode: ExpansionMode) -> NodeEmbeddings {
        let p = parse_interactions("a\tb\tc\nc\td\n".as_bytes(), &ParseConfig::default()).unwrap();
        let g = build_transition(&p.edges, &p.index, mode).unwrap();
        embed(
            &g,
            &EmbedConfig {
                dim: 5,
                iterations: 3,
                ..Default::default()
            },
        )
        .unwrap()
    }

    #[test]
    fn one_node_text_file() {
        let mut index = NodeIndex::new();
        index.insert(&NodeLabel::new("x").unwrap());
        let emb = NodeEmbeddings {
            index,
            matrix: EmbeddingMatrix::from_row_major(1, 2, vec![0.5, -0.25]).unwrap(),
        };
        let mut out = Vec::new();
        export_text(&emb, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "1 2\nx\t5.00000000e-1\t-2.50000000e-1\n");
    }

    #[test]
    fn binary_round_trip_is_exact() {
        let emb = sample(ExpansionMode::Star);
        let mut out = Vec::new();
        export_binary(&emb, &mut out).unwrap();
        let back = import_binary(out.as_slice()).unwrap();
        assert!(back.matrix.bit_eq(&emb.matrix));
        assert_eq!(back.index, emb.index);
    }

    #[test]
    fn text_round_trip_within_precision() {
        let emb = sample(ExpansionMode::Clique);
        let mut out = Vec::new();
        export_text(&emb, &mut out).unwrap();
        let back = import_text(out.as_slice()).unwrap();
        for (label, v) in emb.index.labels().iter().zip(emb.matrix.rows()) {
            for (x, y) in v.iter().zip(back.vector(label.as_str()).unwrap()) {
                assert!((x - y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn text_export_skips_virtual_nodes() {
        let emb = sample(ExpansionMode::Star);
        let mut out = Vec::new();
        export_text(&emb, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.starts_with("4 5\n"));
        assert!(!text.contains("__star::"));
        assert_eq!(text.lines().count(), 5);
    }

    #[test]
    fn text_import_errors() {
        assert!(import_text("".as_bytes()).is_err());
        assert!(import_text("1 2\nx\t0.1\n".as_bytes()).is_err());
        assert!(import_text("2 1\nx\t0.1\n".as_bytes()).is_err());
    }
}
