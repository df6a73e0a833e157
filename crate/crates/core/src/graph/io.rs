//! Graph files: the `GLSW` binary container and a `i j w` text dump.
//!
//! Binary layout (little-endian):
//!
//! ```text
//! 0   4  magic "GLSW"
//! 4   4  u32 version (1)
//! 8   4  u32 flags (bit 0: normalized Laplacian)
//! 12  4  u32 reserved (0)
//! 16  8  u64 n
//! 24  8  u64 nnz
//! 32     (n + 1) x u64 row offsets, nnz x u32 column indices, nnz x f64 values
//! ```

use std::io::{BufRead, Read, Write};

use super::laplacian::Normalization;
use super::sparse::SparseSym;
use crate::error::{Error, Result};

pub const GRAPH_MAGIC: &[u8; 4] = b"GLSW";
pub const GRAPH_VERSION: u32 = 1;
const FLAG_NORMALIZED: u32 = 1;

pub fn write_graph<W: Write>(w: &SparseSym, mode: Normalization, mut out: W) -> Result<()> {
    let flags = match mode {
        Normalization::Normalized => FLAG_NORMALIZED,
        Normalization::Unnormalized => 0,
    };
    out.write_all(GRAPH_MAGIC)?;
    out.write_all(&GRAPH_VERSION.to_le_bytes())?;
    out.write_all(&flags.to_le_bytes())?;
    out.write_all(&0u32.to_le_bytes())?;
    out.write_all(&(w.num_nodes() as u64).to_le_bytes())?;
    out.write_all(&(w.nnz() as u64).to_le_bytes())?;
    let mut buf = Vec::with_capacity(8 * (w.num_nodes() + 1) + 12 * w.nnz());
    for &o in w.row_offsets() {
        buf.extend_from_slice(&(o as u64).to_le_bytes());
    }
    for &c in w.col_indices() {
        buf.extend_from_slice(&c.to_le_bytes());
    }
    for &v in w.values() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    out.flush()?;
    Ok(())
}

fn read_exact_or<R: Read>(r: &mut R, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| match e.kind() {
        std::io::ErrorKind::UnexpectedEof => Error::format("GLSW", format!("truncated {what}")),
        _ => Error::Io(e),
    })
}

fn u32_at(b: &[u8], k: usize) -> u32 {
    u32::from_le_bytes(b[k..k + 4].try_into().unwrap())
}

fn u64_at(b: &[u8], k: usize) -> u64 {
    u64::from_le_bytes(b[k..k + 8].try_into().unwrap())
}

pub fn read_graph<R: Read>(mut input: R) -> Result<(SparseSym, Normalization)> {
    let mut head = [0u8; 32];
    read_exact_or(&mut input, &mut head, "header")?;
    if &head[0..4] != GRAPH_MAGIC {
        return Err(Error::format("GLSW", "bad magic"));
    }
    let version = u32_at(&head, 4);
    if version != GRAPH_VERSION {
        return Err(Error::format("GLSW", format!("unsupported version {version}")));
    }
    let flags = u32_at(&head, 8);
    if flags & !FLAG_NORMALIZED != 0 {
        return Err(Error::format("GLSW", format!("unknown flags {flags:#x}")));
    }
    let mode = if flags & FLAG_NORMALIZED != 0 {
        Normalization::Normalized
    } else {
        Normalization::Unnormalized
    };
    let n = usize::try_from(u64_at(&head, 16)).map_err(|_| Error::format("GLSW", "n too large"))?;
    let nnz = usize::try_from(u64_at(&head, 24)).map_err(|_| Error::format("GLSW", "nnz too large"))?;
    if n > u32::MAX as usize {
        return Err(Error::format("GLSW", "n exceeds 32-bit index range"));
    }
    let body_len = (n + 1)
        .checked_mul(8)
        .and_then(|a| nnz.checked_mul(12).and_then(|b| a.checked_add(b)))
        .ok_or_else(|| Error::format("GLSW", "size overflow"))?;
    let mut body = Vec::new();
    input.take(body_len as u64).read_to_end(&mut body)?;
    if body.len() != body_len {
        return Err(Error::format("GLSW", "truncated payload"));
    }
    let offs = (0..=n).map(|i| u64_at(&body, 8 * i) as usize).collect();
    let base = 8 * (n + 1);
    let cols = (0..nnz).map(|k| u32_at(&body, base + 4 * k)).collect();
    let base = base + 4 * nnz;
    let vals = (0..nnz)
        .map(|k| f64::from_le_bytes(body[base + 8 * k..base + 8 * k + 8].try_into().unwrap()))
        .collect();
    let w = SparseSym::from_csr(n, offs, cols, vals)?;
    Ok((w, mode))
}

/// Writes `# n <n>` followed by one `i j w` line per stored entry.
pub fn write_triplets<W: Write>(w: &SparseSym, mut out: W) -> Result<()> {
    writeln!(out, "# n {}", w.num_nodes())?;
    for (i, j, v) in w.triplets() {
        writeln!(out, "{i} {j} {v}")?;
    }
    out.flush()?;
    Ok(())
}

/// Reads the text dump. Both `(i, j)` and `(j, i)` must be listed; without a
/// `# n` header the node count is one past the largest index.
pub fn read_triplets<R: BufRead>(input: R) -> Result<SparseSym> {
    let mut n: Option<usize> = None;
    let mut entries: Vec<(usize, usize, f64)> = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        if let Some(rest) = t.strip_prefix('#') {
            let mut it = rest.split_whitespace();
            if it.next() == Some("n") {
                let v = it
                    .next()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| Error::format("triplet", format!("bad header on line {}", lineno + 1)))?;
                n = Some(v);
            }
            continue;
        }
        let mut it = t.split_whitespace();
        let bad = || Error::format("triplet", format!("cannot parse line {}: {t:?}", lineno + 1));
        let i: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let j: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        let v: f64 = it.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
        if it.next().is_some() {
            return Err(bad());
        }
        entries.push((i, j, v));
    }
    let n = n.unwrap_or_else(|| entries.iter().map(|&(i, j, _)| i.max(j) + 1).max().unwrap_or(0));
    let mut rows: Vec<Vec<(u32, f64)>> = vec![Vec::new(); n];
    for (i, j, v) in entries {
        if i >= n || j >= n {
            return Err(Error::format("triplet", format!("entry ({i}, {j}) out of range for n = {n}")));
        }
        rows[i].push((j as u32, v));
    }
    SparseSym::from_rows(n, rows)
}
