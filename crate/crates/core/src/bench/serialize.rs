//! Binary model files.
//!
//! Layout, all integers little-endian:
//! `"RBWS"`, version `u32`, kind `u32`, dimension `u64`, `N u64`, `K_max u64`,
//! aux `u64`, matrix count `u64` then `(rows, cols)` as `u64` pairs, index
//! array count `u64` then lengths as `u64`, the matrices as column-major
//! `f64`, the index arrays as `u64`, and finally a `u64` checksum made of the
//! first 8 bytes of the SHA-256 of everything before it.

use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid_fem::ParamPoint;
use crate::msrb::MsrbHierarchy;
use crate::reduced_basis::{L1rocModel, PodBasis};

const MAGIC: &[u8; 4] = b"RBWS";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u32)]
pub enum ModelKind {
    Pod = 1,
    L1roc = 2,
    Msrb = 3,
}

impl ModelKind {
    fn from_u32(v: u32) -> Result<Self> {
        match v {
            1 => Ok(ModelKind::Pod),
            2 => Ok(ModelKind::L1roc),
            3 => Ok(ModelKind::Msrb),
            _ => Err(Error::Format(format!("unknown model kind {v}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Pod(PodBasis),
    L1roc(L1rocModel),
    Msrb(MsrbHierarchy),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Pod(_) => ModelKind::Pod,
            Model::L1roc(_) => ModelKind::L1roc,
            Model::Msrb(_) => ModelKind::Msrb,
        }
    }
}

struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    fn from_columns(rows: usize, cols: &[Vec<f64>]) -> Self {
        Self { rows, cols: cols.len(), data: cols.concat() }
    }

    fn vector(v: &[f64]) -> Self {
        Self { rows: v.len(), cols: 1, data: v.to_vec() }
    }

    fn columns(&self) -> Vec<Vec<f64>> {
        if self.rows == 0 {
            return vec![Vec::new(); self.cols];
        }
        self.data.chunks(self.rows).map(<[f64]>::to_vec).collect()
    }
}

struct Container {
    kind: ModelKind,
    dim: u64,
    n: u64,
    k_max: u64,
    aux: u64,
    matrices: Vec<Matrix>,
    indices: Vec<Vec<u64>>,
}

fn checksum(bytes: &[u8]) -> u64 {
    let digest = Sha256::digest(bytes);
    u64::from_le_bytes(digest[..8].try_into().unwrap())
}

fn encode(c: &Container) -> Vec<u8> {
    let mut out = Vec::new();
    let put = |v: u64, out: &mut Vec<u8>| out.extend_from_slice(&v.to_le_bytes());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(c.kind as u32).to_le_bytes());
    for v in [c.dim, c.n, c.k_max, c.aux, c.matrices.len() as u64] {
        put(v, &mut out);
    }
    for m in &c.matrices {
        put(m.rows as u64, &mut out);
        put(m.cols as u64, &mut out);
    }
    put(c.indices.len() as u64, &mut out);
    for ix in &c.indices {
        put(ix.len() as u64, &mut out);
    }
    for m in &c.matrices {
        for x in &m.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
    }
    for ix in &c.indices {
        for &v in ix {
            put(v, &mut out);
        }
    }
    let sum = checksum(&out);
    put(sum, &mut out);
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| Error::Format("truncated model file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("size does not fit in memory".into()))
    }
}

fn decode(bytes: &[u8]) -> Result<Container> {
    if bytes.len() < 4 + 4 + 4 + 8 * 5 + 8 + 8 {
        return Err(Error::Format("truncated model file".into()));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let (body, tail) = bytes.split_at(bytes.len() - 8);
    let stored = u64::from_le_bytes(tail.try_into().unwrap());
    let computed = checksum(body);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let mut r = Reader { bytes: body, pos: 4 };
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(Error::Format(format!("unsupported format version {version}")));
    }
    let kind = ModelKind::from_u32(r.u32()?)?;
    let (dim, n, k_max, aux) = (r.u64()?, r.u64()?, r.u64()?, r.u64()?);
    let n_mat = r.usize()?;
    let mut shapes = Vec::new();
    for _ in 0..n_mat {
        shapes.push((r.usize()?, r.usize()?));
    }
    let n_idx = r.usize()?;
    let mut lens = Vec::new();
    for _ in 0..n_idx {
        lens.push(r.usize()?);
    }
    let mut matrices = Vec::with_capacity(n_mat);
    for (rows, cols) in shapes {
        let len = rows.checked_mul(cols).ok_or_else(|| Error::Format("matrix too large".into()))?;
        let raw = r.take(len.checked_mul(8).ok_or_else(|| Error::Format("matrix too large".into()))?)?;
        let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
        matrices.push(Matrix { rows, cols, data });
    }
    let mut indices = Vec::with_capacity(n_idx);
    for len in lens {
        let mut ix = Vec::with_capacity(len);
        for _ in 0..len {
            ix.push(r.u64()?);
        }
        indices.push(ix);
    }
    if r.pos != body.len() {
        return Err(Error::Format("trailing bytes in model file".into()));
    }
    Ok(Container { kind, dim, n, k_max, aux, matrices, indices })
}

fn pod_matrices(p: &PodBasis) -> [Matrix; 2] {
    [Matrix::from_columns(p.dim(), p.columns()), Matrix::vector(p.eigenvalues())]
}

fn pod_from(dim: usize, basis: &Matrix, eig: &Matrix, n_snapshots: u64) -> Result<PodBasis> {
    if basis.rows != dim && basis.cols > 0 {
        return Err(Error::Format("basis rows differ from the stored dimension".into()));
    }
    PodBasis::from_parts(dim, basis.columns(), eig.data.clone(), n_snapshots as usize)
}

fn to_container(model: &Model) -> Container {
    match model {
        Model::Pod(p) => Container {
            kind: ModelKind::Pod,
            dim: p.dim() as u64,
            n: p.len() as u64,
            k_max: 0,
            aux: p.n_snapshots() as u64,
            matrices: pod_matrices(p).into(),
            indices: Vec::new(),
        },
        Model::L1roc(m) => {
            let params: Vec<Vec<f64>> = m.parameters().iter().map(|p| p.0.clone()).collect();
            let p_dim = params.first().map_or(0, Vec::len);
            Container {
                kind: ModelKind::L1roc,
                dim: m.dim() as u64,
                n: m.len() as u64,
                k_max: 0,
                aux: m.saturated() as u64,
                matrices: vec![
                    Matrix::from_columns(m.dim(), m.basis()),
                    Matrix { rows: m.len(), cols: m.len(), data: m.transform().to_vec() },
                    Matrix::from_columns(p_dim, &params),
                    Matrix::vector(m.indicator_history()),
                    Matrix::vector(m.offline_times()),
                ],
                indices: vec![
                    m.solution_points().iter().map(|&i| i as u64).collect(),
                    m.residual_points().iter().map(|&i| i as u64).collect(),
                ],
            }
        }
        Model::Msrb(h) => {
            let mut matrices: Vec<Matrix> = pod_matrices(h.initial()).into();
            let mut counts = vec![h.initial().n_snapshots() as u64];
            for b in h.bases() {
                matrices.extend(pod_matrices(b));
                counts.push(b.n_snapshots() as u64);
            }
            Container {
                kind: ModelKind::Msrb,
                dim: h.dim() as u64,
                n: h.rb_dim() as u64,
                k_max: h.k_max() as u64,
                aux: 0,
                matrices,
                indices: vec![counts],
            }
        }
    }
}

fn from_container(c: Container) -> Result<Model> {
    let dim = c.dim as usize;
    let bad = |what: &str| Error::Format(format!("malformed {what} model"));
    match c.kind {
        ModelKind::Pod => {
            let [basis, eig] = <[Matrix; 2]>::try_from(c.matrices).map_err(|_| bad("POD"))?;
            let pod = pod_from(dim, &basis, &eig, c.aux)?;
            if pod.len() as u64 != c.n {
                return Err(bad("POD"));
            }
            Ok(Model::Pod(pod))
        }
        ModelKind::L1roc => {
            let [basis, transform, params, hist, times] = <[Matrix; 5]>::try_from(c.matrices).map_err(|_| bad("L1ROC"))?;
            let [sol, res] = <[Vec<u64>; 2]>::try_from(c.indices).map_err(|_| bad("L1ROC"))?;
            if basis.cols as u64 != c.n || (basis.rows != dim && basis.cols > 0) {
                return Err(bad("L1ROC"));
            }
            let to_usize = |v: Vec<u64>| v.into_iter().map(|i| i as usize).collect::<Vec<_>>();
            let model = L1rocModel::from_parts(
                dim,
                basis.columns(),
                transform.data,
                to_usize(sol),
                to_usize(res),
                params.columns().into_iter().map(ParamPoint::new).collect(),
                hist.data,
                times.data,
                c.aux != 0,
            )?;
            Ok(Model::L1roc(model))
        }
        ModelKind::Msrb => {
            let k = c.k_max as usize;
            let [counts] = <[Vec<u64>; 1]>::try_from(c.indices).map_err(|_| bad("MSRB"))?;
            if c.matrices.len() != 2 * (k + 1) || counts.len() != k + 1 {
                return Err(bad("MSRB"));
            }
            let mut pods = c.matrices.chunks(2).zip(&counts).map(|(m, &s)| pod_from(dim, &m[0], &m[1], s)).collect::<Result<Vec<_>>>()?;
            let bases = pods.split_off(1);
            let initial = pods.pop().unwrap();
            Ok(Model::Msrb(MsrbHierarchy::new(initial, bases, c.n as usize)?))
        }
    }
}

pub fn model_to_bytes(model: &Model) -> Vec<u8> {
    encode(&to_container(model))
}

/// Parses a model; nothing is returned unless the whole file is valid.
pub fn model_from_bytes(bytes: &[u8]) -> Result<Model> {
    from_container(decode(bytes)?)
}

pub fn save_model(model: &Model, path: &Path) -> Result<()> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

pub fn load_model(path: &Path) -> Result<Model> {
    model_from_bytes(&std::fs::read(path)?)
}
