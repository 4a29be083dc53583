//! Binary snapshot and model files. All integers and floats are
//! little-endian; matrices are stored column-major.
//!
//! Snapshot file: `"QMSM"`, `u32` version, `u64` rows, `u64` cols, payload.
//!
//! Model file: `"QMRM"`, `u32` version, a UTF-8 `key=value` header ended by
//! an empty line, then the encoder basis, decoder basis, `W`, `A` and `H`,
//! each as `u64` rows, `u64` cols and payload. Singular-vector indices in
//! the header are 1-based.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::greedy::{InLoopModel, Mode};
use crate::manifold::{feature_count, Coordinates, ManifoldKind, QuadraticManifold};
use crate::numerics::DenseMatrix;
use crate::opinf::ReducedModel;

pub const SNAPSHOT_MAGIC: &[u8; 4] = b"QMSM";
pub const MODEL_MAGIC: &[u8; 4] = b"QMRM";
pub const FORMAT_VERSION: u32 = 1;

/// Shortest text that parses back to the same `f64`; `inf` for infinity.
pub fn format_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse::<f64>()
        .map_err(|_| Error::Format(format!("bad number `{s}`")))
}

fn push_matrix(buf: &mut Vec<u8>, m: &DenseMatrix) {
    buf.extend_from_slice(&(m.nrows() as u64).to_le_bytes());
    buf.extend_from_slice(&(m.ncols() as u64).to_le_bytes());
    buf.reserve(8 * m.len());
    for v in m.iter() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
}

/// Cursor over a byte buffer with format-error reporting.
struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8]) -> Self {
        Self { bytes, pos: 0 }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(len)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Format("unexpected end of file".into()))?;
        let out = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn preamble(&mut self, magic: &[u8; 4]) -> Result<()> {
        if self.take(4)? != magic {
            return Err(Error::Format(format!(
                "missing `{}` signature",
                String::from_utf8_lossy(magic)
            )));
        }
        let version = self.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported format version {version}")));
        }
        Ok(())
    }

    fn matrix_with_shape(&mut self, rows: u64, cols: u64) -> Result<DenseMatrix> {
        let len = rows
            .checked_mul(cols)
            .and_then(|l| usize::try_from(l).ok())
            .filter(|l| l.checked_mul(8).is_some())
            .ok_or_else(|| Error::Format(format!("matrix shape {rows}x{cols} is too large")))?;
        let payload = self.take(8 * len)?;
        let data: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(DenseMatrix::from_vec(rows as usize, cols as usize, data))
    }

    fn matrix(&mut self) -> Result<DenseMatrix> {
        let rows = self.u64()?;
        let cols = self.u64()?;
        self.matrix_with_shape(rows, cols)
    }

    fn finish(&self) -> Result<()> {
        if self.pos != self.bytes.len() {
            return Err(Error::Format(format!("{} trailing bytes", self.bytes.len() - self.pos)));
        }
        Ok(())
    }
}

pub fn encode_snapshots(m: &DenseMatrix) -> Vec<u8> {
    let mut buf = Vec::with_capacity(24 + 8 * m.len());
    buf.extend_from_slice(SNAPSHOT_MAGIC);
    buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    push_matrix(&mut buf, m);
    buf
}

pub fn decode_snapshots(bytes: &[u8]) -> Result<DenseMatrix> {
    let mut r = Reader::new(bytes);
    r.preamble(SNAPSHOT_MAGIC)?;
    let m = r.matrix()?;
    r.finish()?;
    if m.is_empty() {
        return Err(Error::Format("snapshot matrix is empty".into()));
    }
    Ok(m)
}

pub fn write_snapshots(path: &Path, m: &DenseMatrix) -> Result<()> {
    let mut file = fs::File::create(path)?;
    file.write_all(&encode_snapshots(m))?;
    Ok(())
}

pub fn read_snapshots(path: &Path) -> Result<DenseMatrix> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    decode_snapshots(&bytes)
}

/// Training method recorded in a model file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Linear,
    QmLeading,
    QmGreedy,
    QmOiAware,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Linear, Method::QmLeading, Method::QmGreedy, Method::QmOiAware];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::QmLeading => "qm-leading",
            Method::QmGreedy => "qm-greedy",
            Method::QmOiAware => "qm-oiaware",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::invalid(format!("unknown method `{s}`")))
    }

    /// Greedy mode, for the two greedy methods.
    pub fn mode(self) -> Option<Mode> {
        match self {
            Method::QmGreedy => Some(Mode::ReconstructionOnly),
            Method::QmOiAware => Some(Mode::OiAware),
            _ => None,
        }
    }
}

/// Training settings stored next to the arrays of a model file.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub method: Method,
    /// Candidate pool used by greedy methods.
    pub q: Option<usize>,
    pub gamma_op: f64,
    pub in_loop: InLoopModel,
    /// Divergence guard for rollouts of the stored model.
    pub guard: f64,
}

/// Manifold, reduced model and metadata as stored on disk.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub manifold: QuadraticManifold,
    pub model: ReducedModel,
    pub meta: ModelMeta,
}

fn in_loop_str(v: InLoopModel) -> &'static str {
    match v {
        InLoopModel::Augmented => "augmented",
        InLoopModel::Previous => "previous",
    }
}

impl ModelFile {
    fn header(&self) -> Vec<(&'static str, String)> {
        let m = &self.manifold;
        let indices: Vec<String> = m.indices().iter().map(|j| (j + 1).to_string()).collect();
        vec![
            ("method", self.meta.method.as_str().to_string()),
            ("kind", m.kind().as_str().to_string()),
            ("coordinates", m.coordinates().as_str().to_string()),
            ("n", m.state_dim().to_string()),
            ("r", m.dim().to_string()),
            ("p", feature_count(m.dim()).to_string()),
            ("indices", indices.join(",")),
            ("gamma", format_f64(m.gamma())),
            ("gamma_a", format_f64(self.model.gamma_a())),
            ("gamma_h", format_f64(self.model.gamma_h())),
            ("gamma_op", format_f64(self.meta.gamma_op)),
            ("mode", self.meta.method.mode().map_or("none", Mode::as_str).to_string()),
            ("q", self.meta.q.map_or("none".to_string(), |q| q.to_string())),
            ("in_loop", in_loop_str(self.meta.in_loop).to_string()),
            ("guard", format_f64(self.meta.guard)),
        ]
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        buf.extend_from_slice(MODEL_MAGIC);
        buf.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        for (k, v) in self.header() {
            buf.extend_from_slice(format!("{k}={v}\n").as_bytes());
        }
        buf.push(b'\n');
        let m = &self.manifold;
        for array in [
            m.encoder_basis(),
            m.decoder_basis(),
            m.coeffs(),
            self.model.linear(),
            self.model.quadratic(),
        ] {
            push_matrix(&mut buf, array);
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut reader = Reader::new(bytes);
        reader.preamble(MODEL_MAGIC)?;
        let rest = &bytes[reader.pos..];
        let end = rest
            .windows(2)
            .position(|w| w == b"\n\n")
            .ok_or_else(|| Error::Format("model header is not terminated".into()))?;
        let text = std::str::from_utf8(&rest[..end + 1]).map_err(|_| Error::Format("header is not UTF-8".into()))?;
        reader.take(end + 2)?;

        let mut header = std::collections::HashMap::new();
        for line in text.lines() {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad header line `{line}`")))?;
            header.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| {
            header
                .get(k)
                .map(String::as_str)
                .ok_or_else(|| Error::Format(format!("missing header key `{k}`")))
        };
        let count = |k: &str| -> Result<usize> {
            get(k)?
                .parse()
                .map_err(|_| Error::Format(format!("bad value for `{k}`")))
        };

        let method = Method::parse(get("method")?).map_err(|e| Error::Format(e.to_string()))?;
        let kind = ManifoldKind::parse(get("kind")?).map_err(|e| Error::Format(e.to_string()))?;
        let coordinates = Coordinates::parse(get("coordinates")?).map_err(|e| Error::Format(e.to_string()))?;
        let n = count("n")?;
        let r = count("r")?;
        let p = count("p")?;
        if p != feature_count(r) {
            return Err(Error::Format(format!("p = {p} does not match r = {r}")));
        }
        let indices = get("indices")?
            .split(',')
            .map(|s| match s.parse::<usize>() {
                Ok(j) if j >= 1 => Ok(j - 1),
                _ => Err(Error::Format(format!("bad singular-vector index `{s}`"))),
            })
            .collect::<Result<Vec<_>>>()?;
        if indices.len() != r {
            return Err(Error::Format(format!("{} indices listed for r = {r}", indices.len())));
        }
        let gamma = parse_f64(get("gamma")?)?;
        let gamma_a = parse_f64(get("gamma_a")?)?;
        let gamma_h = parse_f64(get("gamma_h")?)?;
        let gamma_op = parse_f64(get("gamma_op")?)?;
        let q = match get("q")? {
            "none" => None,
            s => Some(s.parse().map_err(|_| Error::Format(format!("bad q `{s}`")))?),
        };
        let in_loop = match get("in_loop")? {
            "augmented" => InLoopModel::Augmented,
            "previous" => InLoopModel::Previous,
            s => return Err(Error::Format(format!("bad in_loop `{s}`"))),
        };
        let guard = parse_f64(get("guard")?)?;
        let mode = get("mode")?;
        if mode != method.mode().map_or("none", Mode::as_str) {
            return Err(Error::Format(format!(
                "mode `{mode}` does not match method `{}`",
                method.as_str()
            )));
        }

        let mut expect = |rows: usize, cols: usize, what: &str| -> Result<DenseMatrix> {
            let m = reader.matrix()?;
            if m.shape() != (rows, cols) {
                return Err(Error::Format(format!(
                    "{what} has shape {:?}, header declares {rows}x{cols}",
                    m.shape()
                )));
            }
            Ok(m)
        };
        let encoder = expect(n, r, "encoder basis")?;
        let decoder = expect(n, r, "decoder basis")?;
        let coeffs = expect(n, p, "coefficient matrix")?;
        let a = expect(r, r, "linear operator")?;
        let h = expect(r, p, "quadratic operator")?;
        reader.finish()?;

        let fmt = |e: Error| match e {
            Error::Io(e) => Error::Io(e),
            other => Error::Format(other.to_string()),
        };
        let manifold =
            QuadraticManifold::from_parts(indices, encoder, decoder, coeffs, gamma, kind, coordinates).map_err(fmt)?;
        let model = ReducedModel::new(a, h, gamma_a, gamma_h).map_err(fmt)?;
        Ok(Self {
            manifold,
            model,
            meta: ModelMeta {
                method,
                q,
                gamma_op,
                in_loop,
                guard,
            },
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}
