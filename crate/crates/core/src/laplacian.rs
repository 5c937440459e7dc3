//! Graph Laplacians built from zero-diagonal affinities: bi-stochastic and
//! alpha = 1/2 (diffusion-map) normalizations, each in unnormalized
//! (`D(K) - K`) and random-walk (`I - D(K)^{-1} K`) form.

use std::sync::Once;

use crate::error::{domain, Error, Result};
use crate::kernel::{degree, Affinity};
use crate::matrix::Matrix;
use crate::sinkhorn::{approx_sym_sk, ScalingResult, SkConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LaplacianForm {
    Unnormalized,
    RandomWalk,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum LaplacianKind {
    BistochUn,
    BistochRw,
    DmUn,
    DmRw,
}

impl LaplacianKind {
    pub const ALL: [LaplacianKind; 4] = [Self::BistochUn, Self::BistochRw, Self::DmUn, Self::DmRw];

    pub fn form(self) -> LaplacianForm {
        match self {
            Self::BistochUn | Self::DmUn => LaplacianForm::Unnormalized,
            Self::BistochRw | Self::DmRw => LaplacianForm::RandomWalk,
        }
    }

    pub fn is_bistochastic(self) -> bool {
        matches!(self, Self::BistochUn | Self::BistochRw)
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::BistochUn => "bistoch-un",
            Self::BistochRw => "bistoch-rw",
            Self::DmUn => "dm-un",
            Self::DmRw => "dm-rw",
        }
    }
}

impl std::str::FromStr for LaplacianKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Parse(format!("unknown laplacian kind `{s}`")))
    }
}

/// A Laplacian together with the affinity it was formed from.
#[derive(Clone, Debug)]
pub struct LaplacianOp {
    pub matrix: Matrix,
    pub kind: LaplacianKind,
    pub epsilon: f64,
    /// The normalized affinity `K`.
    pub affinity: Matrix,
    /// Row sums of `K`.
    pub degrees: Vec<f64>,
}

impl LaplacianOp {
    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }
}

#[derive(Clone, Debug)]
pub struct EigenPairs {
    /// Ascending.
    pub values: Vec<f64>,
    /// Column `k` is the eigenvector of `values[k]`, unit 2-norm.
    pub vectors: Matrix,
}

impl EigenPairs {
    pub fn vector(&self, k: usize) -> Vec<f64> {
        (0..self.vectors.nrows()).map(|i| self.vectors[(i, k)]).collect()
    }
}

fn symmetric_from_pairs(a: &Affinity, mut entry: impl FnMut(usize, usize, f64) -> f64) -> Affinity {
    let n = a.n();
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        m[(i, i)] = entry(i, i, a.matrix[(i, i)]);
        for j in (i + 1)..n {
            let v = entry(i, j, a.matrix[(i, j)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    Affinity { matrix: m, ..a.clone() }
}

/// `D_eta A D_eta`.
pub fn bistochastic_affinity(a: &Affinity, eta: &[f64]) -> Result<Affinity> {
    if eta.len() != a.n() {
        return domain(format!("scaling vector has length {}, matrix has {} rows", eta.len(), a.n()));
    }
    Ok(symmetric_from_pairs(a, |i, j, w| eta[i] * w * eta[j]))
}

/// `W_ij / sqrt(D_i D_j)` with `D` the degrees of `W`.
pub fn dm_affinity(a: &Affinity) -> Result<Affinity> {
    let d = degree(a);
    if let Some(i) = d.values().iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateInput(format!("row {i} has zero degree")));
    }
    let d = d.values();
    Ok(symmetric_from_pairs(a, |i, j, w| w / (d[i] * d[j]).sqrt()))
}

pub fn laplacian_from_affinity(k: &Affinity, kind: LaplacianKind) -> Result<LaplacianOp> {
    let n = k.n();
    let degrees = degree(k).0;
    let mut l = Matrix::zeros(n, n);
    match kind.form() {
        LaplacianForm::Unnormalized => {
            for i in 0..n {
                let (src, dst) = (k.matrix.row(i), l.row_mut(i));
                for (o, &w) in dst.iter_mut().zip(src) {
                    *o = -w;
                }
                dst[i] += degrees[i];
            }
        }
        LaplacianForm::RandomWalk => {
            if let Some(i) = degrees.iter().position(|&v| !(v > 0.0)) {
                return Err(Error::DegenerateInput(format!("row {i} has zero degree")));
            }
            for i in 0..n {
                let inv = 1.0 / degrees[i];
                let (src, dst) = (k.matrix.row(i), l.row_mut(i));
                for (o, &w) in dst.iter_mut().zip(src) {
                    *o = -w * inv;
                }
                dst[i] += 1.0;
            }
        }
    }
    Ok(LaplacianOp {
        matrix: l,
        kind,
        epsilon: k.epsilon,
        affinity: k.matrix.clone(),
        degrees,
    })
}

/// Normalizes a zero-diagonal affinity as `kind` requires and forms the
/// Laplacian. Bi-stochastic kinds also return the Sinkhorn result; `sk` is
/// interpreted in the convention of `w0`.
pub fn build_laplacian(
    w0: &Affinity,
    kind: LaplacianKind,
    sk: &SkConfig,
) -> Result<(LaplacianOp, Option<ScalingResult>)> {
    if kind.is_bistochastic() {
        let scaling = approx_sym_sk(w0, sk)?;
        let k = bistochastic_affinity(w0, &scaling.eta)?;
        Ok((laplacian_from_affinity(&k, kind)?, Some(scaling)))
    } else {
        let k = dm_affinity(w0)?;
        Ok((laplacian_from_affinity(&k, kind)?, None))
    }
}

/// `-(1/eps) L f`.
pub fn apply_rescaled(l: &LaplacianOp, f: &[f64]) -> Result<Vec<f64>> {
    if f.len() != l.n() {
        return domain(format!("vector length {} does not match operator size {}", f.len(), l.n()));
    }
    let c = -1.0 / l.epsilon;
    Ok(l.matrix.matvec(f).into_iter().map(|v| c * v).collect())
}

static SEQUENTIAL_FAER: Once = Once::new();

/// `k` smallest eigenpairs of a random-walk Laplacian, through the symmetric
/// matrix `I - D^{-1/2} K D^{-1/2}`.
pub fn smallest_eigenpairs(l: &LaplacianOp, k: usize) -> Result<EigenPairs> {
    if l.kind.form() != LaplacianForm::RandomWalk {
        return domain("eigenpairs are only extracted from random-walk Laplacians");
    }
    let n = l.n();
    if k == 0 || k > n {
        return domain(format!("requested {k} eigenpairs from an operator of size {n}"));
    }
    if let Some(i) = l.degrees.iter().position(|&v| !(v > 0.0)) {
        return Err(Error::DegenerateInput(format!("row {i} has zero degree")));
    }
    // deterministic output regardless of thread count
    SEQUENTIAL_FAER.call_once(|| faer::set_global_parallelism(faer::Par::Seq));

    let inv_sqrt: Vec<f64> = l.degrees.iter().map(|v| 1.0 / v.sqrt()).collect();
    let mut sym = faer::Mat::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = l.affinity[(i, j)] * inv_sqrt[i] * inv_sqrt[j];
            let v = if i == j { 1.0 - s } else { -s };
            sym[(i, j)] = v;
            sym[(j, i)] = v;
        }
    }
    let evd = sym
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|e| Error::NumericalFailure {
            iteration: 0,
            message: format!("symmetric eigensolver failed: {e:?}"),
        })?;
    let s = evd.S().column_vector();
    let u = evd.U();
    let mut values = Vec::with_capacity(k);
    let mut vectors = Matrix::zeros(n, k);
    for c in 0..k {
        values.push(s[c]);
        let mut psi: Vec<f64> = (0..n).map(|i| u[(i, c)] * inv_sqrt[i]).collect();
        let norm = psi.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: 0,
                message: format!("eigenvector {c} has invalid norm {norm}"),
            });
        }
        let pivot = psi.iter().fold(0.0_f64, |m, &v| if v.abs() > m.abs() { v } else { m });
        let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
        for v in psi.iter_mut() {
            *v *= sign / norm;
        }
        for (i, v) in psi.into_iter().enumerate() {
            vectors[(i, c)] = v;
        }
    }
    Ok(EigenPairs { values, vectors })
}
