//! `FRG1` persisted graph.
//!
//! ```text
//! magic  "FRG1"
//! u8     mode (0 = clique, 1 = star)
//! u64    node count N
//! u64    triplet count T
//! N x    { u8 flags (bit 0 = virtual), str label }
//! T x    { u32 row, u32 col, f64 weight }     sorted by (row, col), normalized
//! N x    f64 weighted degree (pre-normalization row sum)
//! ```

use std::io::{Read, Write};

use super::{ExpansionMode, Graph, GraphError, NodeIndex, NodeLabel, Result, TransitionMatrix};
use crate::codec::*;

const MAGIC: &[u8; 4] = b"FRG1";

pub fn write_graph<W: Write>(graph: &Graph, mut w: W) -> Result<()> {
    write_magic(&mut w, MAGIC)?;
    write_u8(&mut w, matches!(graph.mode, ExpansionMode::Star) as u8)?;
    write_u64(&mut w, graph.index.len() as u64)?;
    write_u64(&mut w, graph.matrix.nnz() as u64)?;
    for (_, label, is_virtual) in graph.index.iter() {
        write_u8(&mut w, is_virtual as u8)?;
        write_str(&mut w, label.as_str())?;
    }
    let (rows, cols, vals, degree) = graph.matrix.raw_parts();
    let mut buf = Vec::with_capacity(rows.len() * 16);
    for ((r, c), v) in rows.iter().zip(cols).zip(vals) {
        buf.extend_from_slice(&r.to_le_bytes());
        buf.extend_from_slice(&c.to_le_bytes());
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    write_f64s(&mut w, degree)?;
    w.flush()?;
    Ok(())
}

pub fn read_graph<R: Read>(mut r: R) -> Result<Graph> {
    read_magic(&mut r, MAGIC)?;
    let mode = match read_u8(&mut r)? {
        0 => ExpansionMode::Clique,
        1 => ExpansionMode::Star,
        m => return Err(FormatError::Corrupt(format!("unknown mode byte {m}")).into()),
    };
    let n = read_len(&mut r, "node")?;
    let nnz = read_len(&mut r, "triplet")?;
    let mut index = NodeIndex::new();
    for _ in 0..n {
        let flags = read_u8(&mut r)?;
        let label = NodeLabel::new(read_str(&mut r)?)?;
        let before = index.len();
        if flags & 1 == 1 {
            index.insert_virtual(&label);
        } else {
            index.insert(&label);
        }
        if index.len() == before {
            return Err(FormatError::Corrupt(format!("duplicate label {label}")).into());
        }
    }
    let mut buf = vec![0u8; nnz * 16];
    r.read_exact(&mut buf).map_err(GraphError::Io)?;
    let mut rows = Vec::with_capacity(nnz);
    let mut cols = Vec::with_capacity(nnz);
    let mut vals = Vec::with_capacity(nnz);
    for t in buf.chunks_exact(16) {
        rows.push(u32::from_le_bytes(t[0..4].try_into().unwrap()));
        cols.push(u32::from_le_bytes(t[4..8].try_into().unwrap()));
        vals.push(f64::from_le_bytes(t[8..16].try_into().unwrap()));
    }
    let degree = read_f64s(&mut r, n)?;
    let matrix = TransitionMatrix::from_normalized_parts(n, n, rows, cols, vals, degree)
        .map_err(FormatError::Corrupt)?;
    Ok(Graph {
        index,
        matrix,
        mode,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_transition, parse_interactions, ParseConfig};

    #[test]
    fn round_trip_star_graph() {
        let p = parse_interactions("a\tb\tc\nc\td\n".as_bytes(), &ParseConfig::default()).unwrap();
        let g = build_transition(&p.edges, &p.index, ExpansionMode::Star).unwrap();
        let mut bytes = Vec::new();
        write_graph(&g, &mut bytes).unwrap();
        assert_eq!(&bytes[..4], b"FRG1");
        let back = read_graph(bytes.as_slice()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn rejects_wrong_magic() {
        assert!(matches!(
            read_graph(&b"FRE1\0\0\0\0"[..]),
            Err(GraphError::Format(FormatError::BadMagic { .. }))
        ));
    }
}
