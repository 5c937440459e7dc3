//! Point-wise convergence of `-(1/eps) L f` to the weighted Laplacian of the
//! test function, and bandwidth sweeps over replicas.

use rayon::prelude::*;

use super::metrics::{mean_std, rel_errors, slope_fit};
use crate::error::{domain, Result};
use crate::kernel::{affinity_from_sq_dists, pairwise_sq_dists, Affinity, KernelConvention};
use crate::laplacian::{bistochastic_affinity, dm_affinity, LaplacianForm, LaplacianKind};
use crate::manifold::{sample_dataset, Dataset, DensitySpec};
use crate::matrix::Matrix;
use crate::noise::{add_noise, NoiseModel};
use crate::sinkhorn::{approx_sym_sk, SkConfig};

/// Offset separating the noise stream of a replica from its sampling stream.
const NOISE_STREAM: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn noise_seed(seed: u64) -> u64 {
    seed.wrapping_add(NOISE_STREAM)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseConfig {
    pub n: usize,
    pub spec: DensitySpec,
    pub intrinsic_dim: usize,
    pub kind: LaplacianKind,
    /// `c_sk` is given in the normalized kernel convention and converted to
    /// `convention` before the iteration.
    pub sk: SkConfig,
    pub convention: KernelConvention,
    pub noise: Option<NoiseModel>,
}

impl PointwiseConfig {
    pub fn clean(n: usize, spec: DensitySpec, kind: LaplacianKind) -> Self {
        Self {
            n,
            spec,
            intrinsic_dim: 1,
            kind,
            sk: SkConfig::default(),
            convention: KernelConvention::Unscaled,
            noise: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return domain(format!("need at least two samples, got {}", self.n));
        }
        if self.intrinsic_dim == 0 {
            return domain("intrinsic dimension must be positive");
        }
        self.sk.validate()?;
        if let Some(model) = &self.noise {
            model.validate()?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointwiseOutcome {
    pub epsilon: f64,
    pub relerr2: f64,
    pub relerrinf: f64,
    /// Zero for diffusion-map kinds.
    pub sk_iters: usize,
    pub sk_converged: bool,
    pub projection_hits: usize,
    /// Smallest scaling factor over inliers, normalized convention
    /// (`NaN` for diffusion-map kinds).
    pub min_inlier_eta: f64,
    pub estimate: Vec<f64>,
    pub reference: Vec<f64>,
    /// Scaling factor in the normalized convention (empty for diffusion maps).
    pub eta: Vec<f64>,
}

/// Sampled (and possibly corrupted) data plus its pairwise squared distances.
pub struct ReplicaData {
    pub dataset: Dataset,
    pub sq_dists: Matrix,
}

pub fn prepare_replica(cfg: &PointwiseConfig, seed: u64) -> Result<ReplicaData> {
    cfg.validate()?;
    let mut ds = sample_dataset(cfg.n, cfg.spec, seed)?;
    if let Some(model) = &cfg.noise {
        ds = add_noise(&ds.embedded(model.m)?, model, noise_seed(seed))?;
    }
    let sq_dists = pairwise_sq_dists(ds.observed());
    Ok(ReplicaData { dataset: ds, sq_dists })
}

/// `-(1/eps) L f` with `L` formed from the normalized affinity `k`.
fn rescaled_action(k: &Affinity, form: LaplacianForm, f: &[f64]) -> Vec<f64> {
    let c = -1.0 / k.epsilon;
    k.matrix
        .rows_iter()
        .zip(f)
        .map(|(row, &fi)| {
            let deg: f64 = row.iter().sum();
            let kf: f64 = row.iter().zip(f).map(|(w, x)| w * x).sum();
            let lf = match form {
                LaplacianForm::Unnormalized => deg * fi - kf,
                LaplacianForm::RandomWalk => fi - kf / deg,
            };
            c * lf
        })
        .collect()
}

pub fn evaluate_replica(data: &ReplicaData, cfg: &PointwiseConfig, epsilon: f64) -> Result<PointwiseOutcome> {
    let ds = &data.dataset;
    let w0 = affinity_from_sq_dists(&data.sq_dists, epsilon, cfg.intrinsic_dim, true, cfg.convention)?;
    let f = ds.test_function_values();
    let reference = ds.delta_p_f_values();
    let (k, scaling) = if cfg.kind.is_bistochastic() {
        let scaling = approx_sym_sk(&w0, &cfg.sk.in_convention_of(&w0))?;
        (bistochastic_affinity(&w0, &scaling.eta)?, Some(scaling))
    } else {
        (dm_affinity(&w0)?, None)
    };
    let estimate = rescaled_action(&k, cfg.kind.form(), &f);
    let (relerr2, relerrinf) = rel_errors(&estimate, &reference)?;
    let to_normalized = 1.0 / w0.normalization_factor().sqrt();
    let (sk_iters, sk_converged, projection_hits, eta) = match scaling {
        Some(s) => (
            s.iterations,
            s.converged,
            s.projection_hits,
            s.eta.iter().map(|e| e * to_normalized).collect::<Vec<_>>(),
        ),
        None => (0, true, 0, Vec::new()),
    };
    let min_inlier_eta = if eta.is_empty() {
        f64::NAN
    } else {
        eta.iter()
            .enumerate()
            .filter(|(i, _)| !ds.outlier_flags.as_ref().is_some_and(|fl| fl[*i]))
            .map(|(_, &e)| e)
            .fold(f64::INFINITY, f64::min)
    };
    Ok(PointwiseOutcome {
        epsilon,
        relerr2,
        relerrinf,
        sk_iters,
        sk_converged,
        projection_hits,
        min_inlier_eta,
        estimate,
        reference,
        eta,
    })
}

/// One replica: sample, optionally corrupt, normalize, and compare.
pub fn pointwise_experiment(cfg: &PointwiseConfig, epsilon: f64, seed: u64) -> Result<PointwiseOutcome> {
    let data = prepare_replica(cfg, seed)?;
    evaluate_replica(&data, cfg, epsilon)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRecord {
    pub epsilon: f64,
    pub relerr2_mean: f64,
    pub relerr2_std: f64,
    pub relerrinf_mean: f64,
    pub relerrinf_std: f64,
    pub mean_sk_iters: f64,
    pub replicas: usize,
}

/// Per-replica outcomes of a sweep, indexed `[replica][epsilon]`.
pub struct SweepRun {
    pub records: Vec<SweepRecord>,
    pub outcomes: Vec<Vec<PointwiseOutcome>>,
}

/// Runs every bandwidth on every replica. Replica `r` uses seed
/// `base_seed + r` for all bandwidths, so the curves share datasets.
pub fn epsilon_sweep_full(
    cfg: &PointwiseConfig,
    epsilons: &[f64],
    replicas: usize,
    base_seed: u64,
) -> Result<SweepRun> {
    if epsilons.is_empty() {
        return domain("empty bandwidth list");
    }
    if epsilons.iter().any(|&e| !(e > 0.0)) {
        return domain("bandwidths must be positive");
    }
    if epsilons.windows(2).any(|w| w[1] < w[0]) {
        return domain("bandwidths must be ascending");
    }
    if replicas == 0 {
        return domain("need at least one replica");
    }
    cfg.validate()?;
    let outcomes: Vec<Vec<PointwiseOutcome>> = (0..replicas)
        .into_par_iter()
        .map(|r| {
            let data = prepare_replica(cfg, base_seed.wrapping_add(r as u64))?;
            epsilons
                .iter()
                .map(|&eps| {
                    let mut o = evaluate_replica(&data, cfg, eps)?;
                    // keep only summary numbers across the sweep
                    o.estimate = Vec::new();
                    o.reference = Vec::new();
                    o.eta = Vec::new();
                    Ok(o)
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let records = epsilons
        .iter()
        .enumerate()
        .map(|(k, &epsilon)| {
            let column: Vec<&PointwiseOutcome> = outcomes.iter().map(|row| &row[k]).collect();
            let e2: Vec<f64> = column.iter().map(|o| o.relerr2).collect();
            let einf: Vec<f64> = column.iter().map(|o| o.relerrinf).collect();
            let iters: Vec<f64> = column.iter().map(|o| o.sk_iters as f64).collect();
            let (relerr2_mean, relerr2_std) = mean_std(&e2);
            let (relerrinf_mean, relerrinf_std) = mean_std(&einf);
            SweepRecord {
                epsilon,
                relerr2_mean,
                relerr2_std,
                relerrinf_mean,
                relerrinf_std,
                mean_sk_iters: mean_std(&iters).0,
                replicas,
            }
        })
        .collect();
    Ok(SweepRun { records, outcomes })
}

pub fn epsilon_sweep(
    cfg: &PointwiseConfig,
    epsilons: &[f64],
    replicas: usize,
    base_seed: u64,
) -> Result<Vec<SweepRecord>> {
    Ok(epsilon_sweep_full(cfg, epsilons, replicas, base_seed)?.records)
}

/// Log-log slopes of the two branches of a sweep.
///
/// The small-bandwidth branch fits `RelErr_2` over the first `points`
/// bandwidths. The large-bandwidth branch fits `RelErr_inf` over the `points`
/// bandwidths that follow the `RelErr_2` minimum (shifted left if the grid
/// runs out), which keeps the fit inside the bias-dominated regime: at the far
/// end of a wide grid the kernel reaches across the curve and the error
/// saturates instead of growing like a power of `eps`.
pub fn branch_slopes(records: &[SweepRecord], points: usize) -> Result<(f64, f64)> {
    let k = records.len();
    if points < 2 || points > k {
        return domain(format!("cannot fit {points} points out of {k}"));
    }
    let log_eps: Vec<f64> = records.iter().map(|r| r.epsilon.ln()).collect();
    let log_e2: Vec<f64> = records.iter().map(|r| r.relerr2_mean.ln()).collect();
    let log_einf: Vec<f64> = records.iter().map(|r| r.relerrinf_mean.ln()).collect();
    let argmin = (0..k)
        .min_by(|&a, &b| records[a].relerr2_mean.total_cmp(&records[b].relerr2_mean))
        .unwrap_or(0);
    let start = (argmin + 1).min(k - points);
    Ok((
        slope_fit(&log_eps, &log_e2, 0..points)?,
        slope_fit(&log_eps, &log_einf, start..start + points)?,
    ))
}

/// `k` log-spaced values from `start` to `stop` inclusive.
pub fn log_grid(start: f64, stop: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![start];
    }
    let (a, b) = (start.ln(), stop.ln());
    (0..k)
        .map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp())
        .collect()
}

pub fn lin_grid(start: f64, stop: f64, k: usize) -> Vec<f64> {
    if k == 1 {
        return vec![start];
    }
    (0..k)
        .map(|i| start + (stop - start) * i as f64 / (k - 1) as f64)
        .collect()
}
