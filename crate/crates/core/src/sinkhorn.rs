//! Accelerated symmetric Sinkhorn-Knopp scaling with a lower-bound
//! projection and early termination.
//!
//! Given a symmetric non-negative `A`, find `eta > 0` with
//! `|| D_eta A D_eta 1 - 1 ||_inf < eps_sk` and `min eta >= c_sk`.
//! Each iteration tests the residual first, then applies
//! `u = 1 / (A eta)`, `v = 1 / (A u)`, `eta = sqrt(u v)` and clamps entries
//! below `c_sk` up to `c_sk`.

use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::kernel::Affinity;
use crate::manifold::{density, Dataset};
use crate::matrix::{norm_inf, Matrix};

/// Starting point of the iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SkInit {
    /// `eta_i = 1 / sqrt((A 1)_i)`.
    #[default]
    RowSum,
    /// `eta = 1`.
    Ones,
}

impl std::str::FromStr for SkInit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rowsum" | "row-sum" => Ok(SkInit::RowSum),
            "ones" => Ok(SkInit::Ones),
            other => Err(Error::Parse(format!("unknown SK initialization `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SkConfig {
    /// Lower bound on the scaling factor, in the convention of the input
    /// affinity. Zero disables the projection.
    pub c_sk: f64,
    /// Tolerance on the infinity-norm residual.
    pub eps_sk: f64,
    pub max_iter: usize,
    pub init: SkInit,
}

impl Default for SkConfig {
    fn default() -> Self {
        Self {
            c_sk: 0.01,
            eps_sk: 1e-3,
            max_iter: 50,
            init: SkInit::RowSum,
        }
    }
}

impl SkConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_sk > 0.0) {
            return domain(format!("eps_sk must be positive, got {}", self.eps_sk));
        }
        if !(self.c_sk >= 0.0) || !self.c_sk.is_finite() {
            return domain(format!("c_sk must be finite and non-negative, got {}", self.c_sk));
        }
        if self.max_iter == 0 {
            return domain("max_iter must be at least one");
        }
        Ok(())
    }

    /// Same settings with `c_sk` moved from the normalized kernel convention to
    /// the convention of `a` (scaling factors of `c A` are those of `A` over
    /// `sqrt(c)`).
    pub fn in_convention_of(&self, a: &Affinity) -> Self {
        Self {
            c_sk: self.c_sk * a.normalization_factor().sqrt(),
            ..*self
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalingResult {
    pub eta: Vec<f64>,
    /// Number of loop entries; an exactly bi-stochastic input reports 1.
    pub iterations: usize,
    /// Residual tested at each loop entry.
    pub residual_history: Vec<f64>,
    /// Entries clamped to `c_sk`, summed over all projection steps.
    pub projection_hits: usize,
    pub converged: bool,
}

impl ScalingResult {
    pub fn final_residual(&self) -> f64 {
        self.residual_history.last().copied().unwrap_or(f64::INFINITY)
    }
}

fn matvec(a: &Matrix, x: &[f64]) -> Vec<f64> {
    let n = a.ncols();
    a.as_slice()
        .par_chunks(n)
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

fn residual_unchecked(a: &Matrix, eta: &[f64]) -> Vec<f64> {
    matvec(a, eta)
        .into_iter()
        .zip(eta)
        .map(|(s, e)| e * s - 1.0)
        .collect()
}

/// `e_i = eta_i (A eta)_i - 1`.
pub fn scaling_residual(a: &Affinity, eta: &[f64]) -> Result<Vec<f64>> {
    if eta.len() != a.n() {
        return domain(format!("scaling vector has length {}, matrix has {} rows", eta.len(), a.n()));
    }
    if let Some(v) = eta.iter().find(|&&v| !(v > 0.0)) {
        return domain(format!("scaling factor entries must be positive, found {v}"));
    }
    Ok(residual_unchecked(&a.matrix, eta))
}

fn reciprocal(x: Vec<f64>, iteration: usize, what: &str) -> Result<Vec<f64>> {
    x.into_iter()
        .map(|v| {
            let r = 1.0 / v;
            if r.is_finite() && r > 0.0 {
                Ok(r)
            } else {
                Err(Error::NumericalFailure {
                    iteration,
                    message: format!("{what} has a non-positive or non-finite entry {v}"),
                })
            }
        })
        .collect()
}

fn update(a: &Matrix, eta: &[f64], iteration: usize) -> Result<Vec<f64>> {
    let u = reciprocal(matvec(a, eta), iteration, "A eta")?;
    let v = reciprocal(matvec(a, &u), iteration, "A u")?;
    Ok(u.iter().zip(&v).map(|(x, y)| (x * y).sqrt()).collect())
}

/// One unprojected accelerated update `eta -> sqrt(u v)`.
pub fn sk_update(a: &Affinity, eta: &[f64]) -> Result<Vec<f64>> {
    scaling_residual(a, eta)?;
    update(&a.matrix, eta, 0)
}

fn project(eta: &mut [f64], c_sk: f64) -> usize {
    if c_sk <= 0.0 {
        return 0;
    }
    let mut hits = 0;
    for v in eta.iter_mut().filter(|v| **v < c_sk) {
        *v = c_sk;
        hits += 1;
    }
    hits
}

pub fn approx_sym_sk(a: &Affinity, cfg: &SkConfig) -> Result<ScalingResult> {
    cfg.validate()?;
    let n = a.n();
    if n == 0 {
        return domain("empty matrix");
    }
    let row_sums = a.matrix.row_sums();
    if let Some(i) = row_sums.iter().position(|&s| !(s > 0.0)) {
        return Err(Error::DegenerateInput(format!("row {i} of the affinity has no positive entry")));
    }
    let mut eta: Vec<f64> = match cfg.init {
        SkInit::RowSum => row_sums.iter().map(|s| 1.0 / s.sqrt()).collect(),
        SkInit::Ones => vec![1.0; n],
    };
    let mut hits = project(&mut eta, cfg.c_sk);
    let mut history = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=cfg.max_iter {
        iterations = k;
        let res = norm_inf(&residual_unchecked(&a.matrix, &eta));
        if !res.is_finite() {
            return Err(Error::NumericalFailure {
                iteration: k,
                message: "residual is not finite".into(),
            });
        }
        history.push(res);
        if res < cfg.eps_sk {
            converged = true;
            break;
        }
        eta = update(&a.matrix, &eta, k)?;
        hits += project(&mut eta, cfg.c_sk);
    }
    Ok(ScalingResult {
        eta,
        iterations,
        residual_history: history,
        projection_hits: hits,
        converged,
    })
}

/// Leading-order population scaling factor `p^{-1/2}` at each sample.
pub fn population_reference(ds: &Dataset) -> Vec<f64> {
    ds.t.iter().map(|&t| density(t, ds.spec).powf(-0.5)).collect()
}
