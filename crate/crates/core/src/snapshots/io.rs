//! Snapshot file layout (all integers little-endian):
//!
//! ```text
//! "GNATSNAP" | u32 version | u32 kind | u64 rows | u64 cols
//! | rows·cols f64, column-major | u64 trailer length | JSON trailer
//! ```
//!
//! The trailer is an object with a `columns` array of provenance records
//! plus any extra fields.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use faer::Mat;
use serde::{Deserialize, Serialize};

use super::{Provenance, SnapshotKind, SnapshotMatrix};
use crate::error::{GnatError, Result};

pub const MAGIC: &[u8; 8] = b"GNATSNAP";
pub const VERSION: u32 = 1;
/// Bytes before the payload.
pub const HEADER_LEN: u64 = 8 + 4 + 4 + 8 + 8;

#[derive(Serialize, Deserialize)]
struct Trailer {
    columns: Vec<Provenance>,
    #[serde(flatten)]
    extras: BTreeMap<String, serde_json::Value>,
}

pub fn persist(matrix: &SnapshotMatrix, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| GnatError::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    let mut header = Vec::with_capacity(HEADER_LEN as usize);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&VERSION.to_le_bytes());
    header.extend_from_slice(&matrix.kind.tag().to_le_bytes());
    header.extend_from_slice(&(matrix.nrows() as u64).to_le_bytes());
    header.extend_from_slice(&(matrix.ncols() as u64).to_le_bytes());
    w.write_all(&header).map_err(io)?;
    for j in 0..matrix.ncols() {
        let col = matrix.columns.col_as_slice(j);
        let bytes: Vec<u8> = col.iter().flat_map(|v| v.to_le_bytes()).collect();
        w.write_all(&bytes).map_err(io)?;
    }
    let trailer = serde_json::to_vec(&Trailer {
        columns: matrix.provenance.clone(),
        extras: matrix.extras.clone(),
    })
    .map_err(|e| GnatError::format(path, e.to_string()))?;
    w.write_all(&(trailer.len() as u64).to_le_bytes())
        .map_err(io)?;
    w.write_all(&trailer).map_err(io)?;
    w.flush().map_err(io)
}

pub fn load(path: impl AsRef<Path>) -> Result<SnapshotMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| GnatError::io(path, e))?;
    let mut r = BufReader::new(file);
    let mut read = |buf: &mut [u8], what: &str| {
        r.read_exact(buf).map_err(|e| {
            if e.kind() == std::io::ErrorKind::UnexpectedEof {
                GnatError::format(path, format!("truncated {what}"))
            } else {
                GnatError::io(path, e)
            }
        })
    };
    let mut header = [0u8; HEADER_LEN as usize];
    read(&mut header, "header")?;
    if &header[..8] != MAGIC {
        return Err(GnatError::format(path, "bad magic"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(header[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(header[o..o + 8].try_into().unwrap());
    let version = u32_at(8);
    if version != VERSION {
        return Err(GnatError::format(
            path,
            format!("unsupported version {version}"),
        ));
    }
    let kind = SnapshotKind::from_tag(u32_at(12))
        .ok_or_else(|| GnatError::format(path, format!("unknown kind tag {}", u32_at(12))))?;
    let (rows, cols) = (u64_at(16) as usize, u64_at(24) as usize);
    let len = rows
        .checked_mul(cols)
        .and_then(|n| n.checked_mul(8))
        .ok_or_else(|| GnatError::format(path, "payload size overflows"))?;
    let mut payload = vec![0u8; len];
    read(&mut payload, "payload")?;
    let mut tlen = [0u8; 8];
    read(&mut tlen, "trailer length")?;
    let mut trailer = vec![0u8; u64::from_le_bytes(tlen) as usize];
    read(&mut trailer, "trailer")?;
    let trailer: Trailer = serde_json::from_slice(&trailer)
        .map_err(|e| GnatError::format(path, format!("trailer: {e}")))?;
    if trailer.columns.len() != cols {
        return Err(GnatError::format(
            path,
            format!(
                "{} provenance records for {cols} columns",
                trailer.columns.len()
            ),
        ));
    }
    let columns = Mat::from_fn(rows, cols, |i, j| {
        let o = 8 * (j * rows + i);
        f64::from_le_bytes(payload[o..o + 8].try_into().unwrap())
    });
    Ok(SnapshotMatrix {
        kind,
        columns,
        provenance: trailer.columns,
        extras: trailer.extras,
    })
}
