//! `DBPF1` field snapshots, their JSON sidecars and the on-disk kernel cache.
//!
//! Layout (little-endian): magic `DBPF1`, `u32 m`, `u32 q` (`u32::MAX` for a
//! mixed-degree form), `m × (u32 ny, u32 nx)`, `m × 4 f64` boxes
//! `[x_min, y_min, x_max, y_max]`, `u32` component count, then per component
//! `u32 len`, `len × u32` 1-based factor indices and the row-major
//! `complex128` array over `[ny₁, nx₁, …, ny_m, nx_m]`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use byteorder::{LittleEndian as LE, ReadBytesExt, WriteBytesExt};
use ndarray::{ArrayD, IxDyn};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::domain::{BoundingBox, PlanarDomain, ProductDomain, Shape};
use crate::error::{DbpError, Result};
use crate::form::FormField;
use crate::multi_index::MultiIndex;
use crate::planar::CauchyKernelTable;

pub const MAGIC: &[u8; 5] = b"DBPF1";
pub const SIDECAR_SCHEMA: &str = "dbp-field/1";
const MIXED: u32 = u32::MAX;

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub m: usize,
    pub q: Option<usize>,
    pub dims: Vec<(usize, usize)>,
    pub boxes: Vec<[f64; 4]>,
    pub components: Vec<(MultiIndex, ArrayD<C64>)>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub schema: String,
    pub label: String,
    pub shapes: Vec<Shape>,
    pub boxes: Vec<BoundingBox>,
    pub n: Vec<usize>,
    pub degrees: Vec<usize>,
    #[serde(default)]
    pub provenance: Vec<String>,
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| DbpError::Io(e.error))?;
    Ok(())
}

fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

impl Snapshot {
    /// Dense snapshot of a form; fails above the dense node limit.
    pub fn from_form(f: &FormField) -> Result<Self> {
        let dom = f.domain();
        let mut components = Vec::new();
        for (i, c) in f.components() {
            components.push((*i, c.to_dense()?));
        }
        Ok(Snapshot {
            m: dom.m(),
            q: f.pure_degree(),
            dims: f.dims(),
            boxes: dom.factors().iter().map(|d| d.grid().bbox.to_array()).collect(),
            components,
        })
    }

    pub fn component(&self, i: MultiIndex) -> Option<&ArrayD<C64>> {
        self.components.iter().find(|(k, _)| *k == i).map(|(_, a)| a)
    }

    fn shape(&self) -> Vec<usize> {
        self.dims.iter().flat_map(|&(a, b)| [a, b]).collect()
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = Vec::new();
        w.write_all(MAGIC)?;
        w.write_u32::<LE>(self.m as u32)?;
        w.write_u32::<LE>(self.q.map_or(MIXED, |q| q as u32))?;
        for &(a, b) in &self.dims {
            w.write_u32::<LE>(a as u32)?;
            w.write_u32::<LE>(b as u32)?;
        }
        for bx in &self.boxes {
            for v in bx {
                w.write_f64::<LE>(*v)?;
            }
        }
        w.write_u32::<LE>(self.components.len() as u32)?;
        let shape = self.shape();
        for (i, a) in &self.components {
            if a.shape() != shape.as_slice() {
                return Err(DbpError::ShapeMismatch {
                    expected: shape.clone(),
                    got: a.shape().to_vec(),
                });
            }
            w.write_u32::<LE>(i.len() as u32)?;
            for j in i.iter() {
                w.write_u32::<LE>(j as u32 + 1)?;
            }
            for v in a.as_standard_layout().iter() {
                w.write_f64::<LE>(v.re)?;
                w.write_f64::<LE>(v.im)?;
            }
        }
        Ok(w)
    }

    pub fn read_from(r: &mut impl Read) -> Result<Self> {
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(DbpError::Format("bad magic, expected DBPF1".into()));
        }
        let m = r.read_u32::<LE>()? as usize;
        if m == 0 || m > crate::multi_index::MAX_FACTORS {
            return Err(DbpError::Format(format!("factor count {m} out of range")));
        }
        let q = match r.read_u32::<LE>()? {
            MIXED => None,
            q if (q as usize) <= m => Some(q as usize),
            q => return Err(DbpError::Format(format!("degree {q} exceeds m = {m}"))),
        };
        let mut dims = Vec::with_capacity(m);
        for _ in 0..m {
            dims.push((r.read_u32::<LE>()? as usize, r.read_u32::<LE>()? as usize));
        }
        let nodes: u128 = dims.iter().map(|&(a, b)| (a * b) as u128).product();
        if nodes > crate::field::DENSE_NODE_LIMIT {
            return Err(DbpError::TooLarge {
                nodes,
                limit: crate::field::DENSE_NODE_LIMIT,
            });
        }
        let mut boxes = Vec::with_capacity(m);
        for _ in 0..m {
            let mut b = [0.0; 4];
            for v in &mut b {
                *v = r.read_f64::<LE>()?;
            }
            boxes.push(b);
        }
        let count = r.read_u32::<LE>()? as usize;
        if count > 1usize << m {
            return Err(DbpError::Format(format!("{count} components for m = {m}")));
        }
        let shape: Vec<usize> = dims.iter().flat_map(|&(a, b)| [a, b]).collect();
        let mut components = Vec::with_capacity(count);
        for _ in 0..count {
            let len = r.read_u32::<LE>()? as usize;
            if len > m {
                return Err(DbpError::Format(format!("index of length {len} for m = {m}")));
            }
            let mut idx = Vec::with_capacity(len);
            for _ in 0..len {
                let j = r.read_u32::<LE>()? as usize;
                if j == 0 || j > m {
                    return Err(DbpError::Format(format!("factor index {j} outside 1..={m}")));
                }
                idx.push(j - 1);
            }
            let i = MultiIndex::from_slice(&idx).map_err(|e| DbpError::Format(e.to_string()))?;
            if let Some(q) = q {
                if i.len() != q {
                    return Err(DbpError::Format(format!("component of degree {} in a degree-{q} snapshot", i.len())));
                }
            }
            let mut data = Vec::with_capacity(nodes as usize);
            for _ in 0..nodes {
                let re = r.read_f64::<LE>()?;
                let im = r.read_f64::<LE>()?;
                data.push(C64::new(re, im));
            }
            let arr = ArrayD::from_shape_vec(IxDyn(&shape), data).expect("sized");
            components.push((i, arr));
        }
        Ok(Snapshot {
            m,
            q,
            dims,
            boxes,
            components,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let s = Self::read_from(&mut r)?;
        let mut rest = [0u8; 1];
        if r.read(&mut rest)? != 0 {
            return Err(DbpError::Format("trailing bytes after last component".into()));
        }
        Ok(s)
    }
}

/// Writes the snapshot and its `<path>.json` sidecar.
pub fn write_form(path: &Path, f: &FormField, label: &str, provenance: Vec<String>) -> Result<()> {
    let snap = Snapshot::from_form(f)?;
    snap.write(path)?;
    let dom = f.domain();
    let side = Sidecar {
        schema: SIDECAR_SCHEMA.into(),
        label: label.into(),
        shapes: dom.factors().iter().map(|d| d.shape().clone()).collect(),
        boxes: dom.factors().iter().map(|d| d.grid().bbox).collect(),
        n: dom.factors().iter().map(|d| d.n()).collect(),
        degrees: f.degrees(),
        provenance,
    };
    write_atomic(&sidecar_path(path), &serde_json::to_vec_pretty(&side)?)
}

/// Reads a snapshot and rebuilds its product domain from the sidecar.
pub fn read_form(path: &Path) -> Result<(Snapshot, ProductDomain, Sidecar)> {
    let snap = Snapshot::read(path)?;
    let side_path = sidecar_path(path);
    let side: Sidecar = serde_json::from_reader(BufReader::new(File::open(&side_path).map_err(|e| {
        DbpError::Format(format!("missing sidecar {}: {e}", side_path.display()))
    })?))?;
    if side.shapes.len() != snap.m || side.n.len() != snap.m || side.boxes.len() != snap.m {
        return Err(DbpError::Format("sidecar factor count disagrees with snapshot".into()));
    }
    let mut factors = Vec::with_capacity(snap.m);
    for j in 0..snap.m {
        let d = PlanarDomain::with_box(side.shapes[j].clone(), side.boxes[j], side.n[j])?;
        if d.dims() != snap.dims[j] || d.grid().bbox.to_array() != snap.boxes[j] {
            return Err(DbpError::Format(format!("sidecar grid for factor {} disagrees with snapshot", j + 1)));
        }
        factors.push(std::sync::Arc::new(d));
    }
    Ok((snap, ProductDomain::new(factors)?, side))
}

/// File name for a cached kernel table, keyed by the bits of `h` and the sizes.
pub fn kernel_cache_name(h: f64, n: usize, padded: usize) -> String {
    format!("kernel-h{:016x}-n{n}-M{padded}.dbpf", h.to_bits())
}

pub fn save_kernel_table(dir: &Path, table: &CauchyKernelTable) -> Result<PathBuf> {
    let path = dir.join(kernel_cache_name(table.h(), table.n(), table.padded()));
    let m = table.padded();
    let half = m as f64 * table.h() / 2.0;
    let snap = Snapshot {
        m: 1,
        q: Some(0),
        dims: vec![(m, m)],
        boxes: vec![[-half, -half, half, half]],
        components: vec![(MultiIndex::EMPTY, table.values().clone().into_dyn())],
    };
    snap.write(&path)?;
    Ok(path)
}

/// Loads a cached table, building and caching it when absent.
pub fn cached_kernel_table(dir: &Path, h: f64, n: usize) -> Result<CauchyKernelTable> {
    let path = dir.join(kernel_cache_name(h, n, 2 * n));
    if path.exists() {
        let snap = Snapshot::read(&path)?;
        let values = snap
            .component(MultiIndex::EMPTY)
            .ok_or_else(|| DbpError::Format("kernel cache without values".into()))?
            .clone()
            .into_dimensionality::<ndarray::Ix2>()
            .map_err(|e| DbpError::Format(e.to_string()))?;
        return CauchyKernelTable::from_values(h, n, values);
    }
    let table = CauchyKernelTable::for_grid(h, n)?;
    save_kernel_table(dir, &table)?;
    Ok(table)
}

/// Writes any serialisable value as pretty JSON, atomically.
pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut buf = BufWriter::new(Vec::new());
    serde_json::to_writer_pretty(&mut buf, value)?;
    buf.write_all(b"\n")?;
    write_atomic(path, &buf.into_inner().map_err(|e| DbpError::Io(e.into_error()))?)
}
