//! Spatial covariance matrices.
//!
//! Per sub-band the receiver gains are normalized to unit norm and turned
//! into the rank-1 outer product `C_k = q q†`. For a localization model the
//! complex matrices are folded into real ones (real part of the upper
//! triangle plus the transposed imaginary part) and standardized per
//! sub-band.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use crate::channel::ChannelSnapshot;
use crate::error::{Error, ParseErrorKind, Result};

/// Dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_rows(rows: &[Vec<Complex64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimensionMismatch("ragged rows".into()));
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data: rows.concat(),
        })
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.rows.min(self.cols)).map(|i| self.get(i, i)).sum()
    }

    /// Largest `|C_ij − conj(C_ji)|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.rows {
            for j in 0..self.cols {
                worst = worst.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        worst
    }
}

/// Dense real matrix, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl RMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

/// `q / ‖q‖₂`.
pub fn normalize_gains(q: &[Complex64]) -> Result<Vec<Complex64>> {
    let norm = q.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0 && norm.is_finite()) {
        return Err(Error::Degenerate(format!("gain vector norm {norm}")));
    }
    Ok(q.iter().map(|z| z / norm).collect())
}

/// Outer product `q q†` of a (unit-norm) gain vector.
pub fn scm_at_subband(q: &[Complex64]) -> CMatrix {
    let n = q.len();
    let mut c = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            c.set(i, j, q[i] * q[j].conj());
        }
    }
    c
}

/// Stack of per-sub-band covariance matrices, sub-band order preserved.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScmTensor {
    pub n_rx: usize,
    pub slices: Vec<CMatrix>,
}

impl ScmTensor {
    pub fn k(&self) -> usize {
        self.slices.len()
    }

    pub fn unstack(self) -> Vec<CMatrix> {
        self.slices
    }
}

pub fn stack_scm(slices: Vec<CMatrix>) -> Result<ScmTensor> {
    let first = slices.first().ok_or_else(|| Error::EmptyInput("no covariance slices".into()))?;
    let n = first.rows;
    if let Some((k, bad)) = slices.iter().enumerate().find(|(_, c)| c.rows != n || c.cols != n) {
        return Err(Error::DimensionMismatch(format!(
            "slice {k} is {}x{}, expected {n}x{n}",
            bad.rows, bad.cols
        )));
    }
    Ok(ScmTensor { n_rx: n, slices })
}

/// Normalized covariance of every sub-band of a snapshot.
pub fn scm_from_snapshot(snapshot: &ChannelSnapshot) -> Result<ScmTensor> {
    let slices = (0..snapshot.k)
        .map(|k| normalize_gains(&snapshot.column(k)).map(|q| scm_at_subband(&q)))
        .collect::<Result<Vec<_>>>()?;
    stack_scm(slices)
}

/// `Ĉ = Re(U) + Im(U)ᵀ` with `U` the upper triangle of `C`, diagonal
/// included.
pub fn real_fold(c: &CMatrix) -> Result<RMatrix> {
    if !c.is_square() {
        return Err(Error::DimensionMismatch(format!("{}x{} is not square", c.rows, c.cols)));
    }
    let n = c.rows;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let u = c.get(i, j);
            data[i * n + j] += u.re;
            data[j * n + i] += u.im;
        }
    }
    Ok(RMatrix { n, data })
}

/// Hermitian matrix whose fold is `folded`.
pub fn real_unfold(folded: &RMatrix) -> CMatrix {
    let n = folded.n;
    let mut c = CMatrix::zeros(n, n);
    for i in 0..n {
        c.set(i, i, Complex64::new(folded.get(i, i), 0.0));
        for j in i + 1..n {
            let z = Complex64::new(folded.get(i, j), folded.get(j, i));
            c.set(i, j, z);
            c.set(j, i, z.conj());
        }
    }
    c
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldedTensor {
    pub n_rx: usize,
    pub slices: Vec<RMatrix>,
}

impl FoldedTensor {
    pub fn fold(tensor: &ScmTensor) -> Result<Self> {
        Ok(Self {
            n_rx: tensor.n_rx,
            slices: tensor.slices.iter().map(real_fold).collect::<Result<_>>()?,
        })
    }

    /// Slice-major, row-major flattening.
    pub fn flatten(&self) -> Vec<f64> {
        self.slices.iter().flat_map(|s| s.data.iter().copied()).collect()
    }
}

/// Shift and scale one slice to zero mean and unit sample standard
/// deviation (n − 1 denominator).
pub fn standardize_slice(slice: &RMatrix) -> Result<RMatrix> {
    let n = slice.data.len();
    if n < 2 {
        return Err(Error::Degenerate("slice needs at least two entries".into()));
    }
    let mean = slice.data.iter().sum::<f64>() / n as f64;
    let var = slice.data.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(Error::Degenerate("constant slice has zero variance".into()));
    }
    Ok(RMatrix {
        n: slice.n,
        data: slice.data.iter().map(|x| (x - mean) / std).collect(),
    })
}

/// Per-sub-band standardization of a folded tensor.
pub fn standardize(tensor: &FoldedTensor) -> Result<FoldedTensor> {
    Ok(FoldedTensor {
        n_rx: tensor.n_rx,
        slices: tensor.slices.iter().map(standardize_slice).collect::<Result<_>>()?,
    })
}

/// Fold and standardize in one go.
pub fn preprocess(tensor: &ScmTensor) -> Result<FoldedTensor> {
    standardize(&FoldedTensor::fold(tensor)?)
}

/// Sidecar describing a binary tensor file: `n_samples` tensors of `k`
/// folded slices, each `n_rx x n_rx` row-major little-endian `f64`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorFileHeader {
    pub n_rx: usize,
    pub k: usize,
    pub layout: String,
    pub n_samples: usize,
}

pub const TENSOR_LAYOUT: &str = "row-major";

/// Writes `tensors` to `bin` and the sidecar to `sidecar`.
pub fn write_tensors(bin: &Path, sidecar: &Path, tensors: &[FoldedTensor]) -> Result<()> {
    let first = tensors.first().ok_or_else(|| Error::EmptyInput("no tensors to write".into()))?;
    let (n_rx, k) = (first.n_rx, first.slices.len());
    let io = |e| Error::io(bin, e);
    let mut out = BufWriter::new(File::create(bin).map_err(io)?);
    for (i, t) in tensors.iter().enumerate() {
        if t.n_rx != n_rx || t.slices.len() != k {
            return Err(Error::DimensionMismatch(format!(
                "tensor {i} has {} receivers and {} slices, expected {n_rx} and {k}",
                t.n_rx,
                t.slices.len()
            )));
        }
        for v in t.flatten() {
            out.write_all(&v.to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)?;
    let header = TensorFileHeader {
        n_rx,
        k,
        layout: TENSOR_LAYOUT.into(),
        n_samples: tensors.len(),
    };
    let text = serde_json::to_string_pretty(&header).expect("header serializes");
    std::fs::write(sidecar, text + "\n").map_err(|e| Error::io(sidecar, e))
}

/// Reads a tensor file written by [`write_tensors`].
pub fn read_tensors(bin: &Path, sidecar: &Path) -> Result<Vec<FoldedTensor>> {
    let text = std::fs::read_to_string(sidecar).map_err(|e| Error::io(sidecar, e))?;
    let header: TensorFileHeader = serde_json::from_str(&text)
        .map_err(|e| Error::parse(sidecar, e.line(), ParseErrorKind::Malformed(e.to_string())))?;
    if header.layout != TENSOR_LAYOUT {
        return Err(Error::parse(sidecar, 0, ParseErrorKind::Malformed(format!("layout `{}`", header.layout))));
    }
    let mut bytes = Vec::new();
    File::open(bin)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(bin, e))?;
    let side = header.n_rx;
    let per_tensor = header.k * side * side;
    if bytes.len() != 8 * per_tensor * header.n_samples {
        return Err(Error::parse(
            bin,
            0,
            ParseErrorKind::Malformed(format!("{} bytes, sidecar implies {}", bytes.len(), 8 * per_tensor * header.n_samples)),
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    Ok(values
        .chunks_exact(per_tensor.max(1))
        .take(header.n_samples)
        .map(|chunk| FoldedTensor {
            n_rx: header.n_rx,
            slices: chunk
                .chunks_exact(side * side)
                .map(|d| RMatrix { n: side, data: d.to_vec() })
                .collect(),
        })
        .collect())
}
