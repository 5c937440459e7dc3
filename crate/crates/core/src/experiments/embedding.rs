//! Spectral embedding of the noisy uniform circle: compare the first two
//! pairs of non-trivial random-walk eigenvectors with the circle harmonics.

use std::f64::consts::PI;

use rayon::prelude::*;

use super::align::align_pair;
use super::metrics::mean_std;
use super::pointwise::noise_seed;
use crate::error::{domain, Result};
use crate::kernel::{build_affinity, KernelConvention};
use crate::laplacian::{build_laplacian, smallest_eigenpairs, EigenPairs, LaplacianKind};
use crate::manifold::{sample_dataset, Dataset, DensitySpec};
use crate::matrix::Matrix;
use crate::noise::{add_noise, HetPhase, NoiseKind, NoiseModel};
use crate::sinkhorn::SkConfig;

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingConfig {
    pub n: usize,
    pub m: usize,
    /// `None` runs the noise-free control.
    pub noise: Option<NoiseKind>,
    pub sigma_out: f64,
    pub p_out: f64,
    pub het_phase: HetPhase,
    pub epsilon: f64,
    /// `c_sk` in the normalized convention.
    pub sk: SkConfig,
    pub replicas: usize,
    pub base_seed: u64,
}

impl Default for EmbeddingConfig {
    fn default() -> Self {
        Self {
            n: 1000,
            m: 2000,
            noise: Some(NoiseKind::Heteroskedastic),
            sigma_out: 0.1,
            p_out: 0.1,
            het_phase: HetPhase::PerSample,
            epsilon: 5e-4,
            sk: SkConfig { c_sk: 0.0, ..SkConfig::default() },
            replicas: 20,
            base_seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EmbeddingMethod {
    Sk,
    Dm,
}

impl EmbeddingMethod {
    pub fn name(self) -> &'static str {
        match self {
            EmbeddingMethod::Sk => "sk",
            EmbeddingMethod::Dm => "dm",
        }
    }

    fn kind(self) -> LaplacianKind {
        match self {
            EmbeddingMethod::Sk => LaplacianKind::BistochRw,
            EmbeddingMethod::Dm => LaplacianKind::DmRw,
        }
    }
}

/// Alignment errors of one replica.
#[derive(Clone, Debug, PartialEq)]
pub struct ReplicaEmbedding {
    pub seed: u64,
    /// `[pair1, pair2]`.
    pub sk_mse: [f64; 2],
    pub dm_mse: [f64; 2],
    pub sk_iters: usize,
    pub projection_hits: usize,
    pub outliers: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingRow {
    pub method: EmbeddingMethod,
    /// 1 or 2.
    pub pair: usize,
    pub mse_mean: f64,
    pub mse_std: f64,
    pub replicas: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingReport {
    pub rows: Vec<EmbeddingRow>,
    pub per_replica: Vec<ReplicaEmbedding>,
}

impl EmbeddingReport {
    pub fn row(&self, method: EmbeddingMethod, pair: usize) -> Option<&EmbeddingRow> {
        self.rows.iter().find(|r| r.method == method && r.pair == pair)
    }
}

/// `[sin 2 pi k t, cos 2 pi k t]` at the clean coordinates.
pub fn harmonic_block(t: &[f64], k: usize) -> Matrix {
    Matrix::from_fn(t.len(), 2, |i, c| {
        let a = 2.0 * PI * k as f64 * t[i];
        if c == 0 { a.sin() } else { a.cos() }
    })
}

fn pair_block(e: &EigenPairs, first: usize) -> Matrix {
    Matrix::from_fn(e.vectors.nrows(), 2, |i, c| e.vectors[(i, first + c)])
}

/// The (possibly corrupted) circle sample used by replica `seed`.
pub fn embedding_dataset(cfg: &EmbeddingConfig, seed: u64) -> Result<Dataset> {
    let clean = sample_dataset(cfg.n, DensitySpec::UniformCircle, seed)?;
    Ok(match cfg.noise {
        Some(kind) => {
            let model = NoiseModel {
                kind,
                m: cfg.m,
                sigma_out: cfg.sigma_out,
                p_out: cfg.p_out,
                phase: cfg.het_phase,
            };
            add_noise(&clean.embedded(cfg.m)?, &model, noise_seed(seed))?
        }
        None => clean,
    })
}

pub fn embedding_replica(cfg: &EmbeddingConfig, seed: u64) -> Result<ReplicaEmbedding> {
    let ds = embedding_dataset(cfg, seed)?;
    let w0 = build_affinity(ds.observed(), cfg.epsilon, 1, true, KernelConvention::Unscaled)?;
    let refs = [harmonic_block(&ds.t, 1), harmonic_block(&ds.t, 2)];
    let mut out = ReplicaEmbedding {
        seed,
        sk_mse: [0.0; 2],
        dm_mse: [0.0; 2],
        sk_iters: 0,
        projection_hits: 0,
        outliers: ds.outlier_count(),
    };
    for method in [EmbeddingMethod::Sk, EmbeddingMethod::Dm] {
        let (l, scaling) = build_laplacian(&w0, method.kind(), &cfg.sk.in_convention_of(&w0))?;
        if let Some(s) = scaling {
            out.sk_iters = s.iterations;
            out.projection_hits = s.projection_hits;
        }
        let eig = smallest_eigenpairs(&l, 5)?;
        let mut mse = [0.0; 2];
        for (p, reference) in refs.iter().enumerate() {
            mse[p] = align_pair(&pair_block(&eig, 1 + 2 * p), reference)?.mse;
        }
        match method {
            EmbeddingMethod::Sk => out.sk_mse = mse,
            EmbeddingMethod::Dm => out.dm_mse = mse,
        }
    }
    Ok(out)
}

pub fn embedding_experiment(cfg: &EmbeddingConfig) -> Result<EmbeddingReport> {
    if cfg.replicas == 0 {
        return domain("need at least one replica");
    }
    if cfg.n < 6 {
        return domain("need at least six samples for two eigenvector pairs");
    }
    if !(cfg.epsilon > 0.0) {
        return domain("kernel bandwidth must be positive");
    }
    cfg.sk.validate()?;
    let per_replica: Vec<ReplicaEmbedding> = (0..cfg.replicas)
        .into_par_iter()
        .map(|r| embedding_replica(cfg, cfg.base_seed.wrapping_add(r as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for method in [EmbeddingMethod::Dm, EmbeddingMethod::Sk] {
        for pair in 1..=2 {
            let values: Vec<f64> = per_replica
                .iter()
                .map(|r| match method {
                    EmbeddingMethod::Sk => r.sk_mse[pair - 1],
                    EmbeddingMethod::Dm => r.dm_mse[pair - 1],
                })
                .collect();
            let (mse_mean, mse_std) = mean_std(&values);
            rows.push(EmbeddingRow {
                method,
                pair,
                mse_mean,
                mse_std,
                replicas: cfg.replicas,
            });
        }
    }
    Ok(EmbeddingReport { rows, per_replica })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_block_values() {
        let b = harmonic_block(&[0.0, 0.25], 1);
        assert_eq!(b[(0, 0)], 0.0);
        assert_eq!(b[(0, 1)], 1.0);
        assert!((b[(1, 0)] - 1.0).abs() < 1e-15);
        assert!(b[(1, 1)].abs() < 1e-15);
    }

    #[test]
    fn clean_control_is_accurate() {
        let cfg = EmbeddingConfig {
            n: 400,
            noise: None,
            epsilon: 2e-3,
            replicas: 2,
            ..EmbeddingConfig::default()
        };
        let rep = embedding_experiment(&cfg).unwrap();
        assert_eq!(rep.rows.len(), 4);
        for r in &rep.rows {
            if r.pair == 1 {
                assert!(r.mse_mean < 0.005, "{r:?}");
            }
        }
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = EmbeddingConfig { replicas: 0, ..EmbeddingConfig::default() };
        assert!(embedding_experiment(&cfg).is_err());
        let cfg = EmbeddingConfig { n: 3, ..EmbeddingConfig::default() };
        assert!(embedding_experiment(&cfg).is_err());
    }
}
