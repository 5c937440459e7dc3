//! Outlier noise in the ambient space.
//!
//! Sample `i` becomes an outlier with probability `p_i`; outliers get an
//! additive `N(0, (sigma_i^2 / m) I_m)` vector, inliers are left untouched.
//!
//! Draw order per sample (index order, one stream per seed): the phase
//! `u_i` (heteroskedastic only), the Bernoulli flag `b_i`, the variance
//! multiplier components (heteroskedastic and i.i.d. kinds), then the `m`
//! Gaussian coordinates of `z_i` if `b_i = 1`. With [`HetPhase::Shared`] the
//! phase is drawn once, before the first sample, and skipped per sample.

use std::f64::consts::PI;

use crate::error::{domain, Error, Result};
use crate::manifold::Dataset;
use crate::matrix::Matrix;
use crate::rng::SeededRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NoiseKind {
    /// Constant outlier probability `p_out` and scale `sigma_out`.
    Simple,
    /// Outlier probability and variance depend on the intrinsic coordinate.
    Heteroskedastic,
    /// `p_i = 0.95`, random variance multiplier per sample.
    Iid,
}

impl NoiseKind {
    pub fn name(self) -> &'static str {
        match self {
            NoiseKind::Simple => "simple",
            NoiseKind::Heteroskedastic => "heteroskedastic",
            NoiseKind::Iid => "iid",
        }
    }
}

impl std::str::FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "simple" => Ok(NoiseKind::Simple),
            "heteroskedastic" | "hetero" => Ok(NoiseKind::Heteroskedastic),
            "iid" => Ok(NoiseKind::Iid),
            other => Err(Error::Parse(format!("unknown noise kind `{other}`"))),
        }
    }
}

/// How the phase `u` of the heteroskedastic outlier probability
/// `0.05 + 0.9 ((1 - t + u) mod 1)` is drawn.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum HetPhase {
    /// Fresh `u_i` for every sample. The probability is then uniform on
    /// `[0.05, 0.95]` whatever `t` is.
    #[default]
    PerSample,
    /// One `u` per dataset, so the outlier probability varies along the
    /// curve (a random rotation of a linear ramp).
    Shared,
}

impl HetPhase {
    pub fn name(self) -> &'static str {
        match self {
            HetPhase::PerSample => "per-sample",
            HetPhase::Shared => "shared",
        }
    }
}

impl std::str::FromStr for HetPhase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "per-sample" | "per_sample" => Ok(HetPhase::PerSample),
            "shared" => Ok(HetPhase::Shared),
            other => Err(Error::Parse(format!("unknown phase mode `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseModel {
    pub kind: NoiseKind,
    /// Ambient dimension.
    pub m: usize,
    pub sigma_out: f64,
    /// Outlier probability, used by [`NoiseKind::Simple`] only.
    pub p_out: f64,
    /// Used by [`NoiseKind::Heteroskedastic`] only.
    pub phase: HetPhase,
}

const IID_OUTLIER_PROB: f64 = 0.95;
const GAMMA_MAX: f64 = 3.0;

impl NoiseModel {
    pub fn new(kind: NoiseKind, m: usize) -> Self {
        Self {
            kind,
            m,
            sigma_out: 0.1,
            p_out: 0.1,
            phase: HetPhase::PerSample,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 4 {
            return domain(format!("ambient dimension must be at least 4, got {}", self.m));
        }
        if !(self.sigma_out > 0.0) || !self.sigma_out.is_finite() {
            return domain(format!("sigma_out must be positive, got {}", self.sigma_out));
        }
        if !(0.0..1.0).contains(&self.p_out) {
            return domain(format!("p_out must lie in [0, 1), got {}", self.p_out));
        }
        Ok(())
    }
}

/// Outlier probability of the heteroskedastic model.
pub fn heteroskedastic_outlier_prob(t: f64, u: f64) -> f64 {
    0.05 + 0.9 * (1.0 - t + u).rem_euclid(1.0)
}

/// Deterministic part of the heteroskedastic variance multiplier.
pub fn heteroskedastic_gamma_profile(t: f64) -> f64 {
    let s = (1.0 + (2.0 * PI * t).sin()) / 2.0;
    10f64.powf(1.0 - s * s)
}

pub fn add_noise(ds: &Dataset, model: &NoiseModel, seed: u64) -> Result<Dataset> {
    model.validate()?;
    if ds.ambient_dim() != model.m {
        return domain(format!(
            "dataset has {} columns but the noise model expects {}",
            ds.ambient_dim(),
            model.m
        ));
    }
    let n = ds.n();
    let m = model.m;
    let mut rng = SeededRng::new(seed);
    let mut noisy = ds.clean_points.clone();
    let mut flags = vec![false; n];
    let shared_u = (model.kind == NoiseKind::Heteroskedastic && model.phase == HetPhase::Shared).then(|| rng.uniform());
    for i in 0..n {
        let t = ds.t[i];
        let (p_i, gamma) = match model.kind {
            NoiseKind::Simple => {
                let b = rng.bernoulli(model.p_out);
                flags[i] = b;
                (model.p_out, 1.0)
            }
            NoiseKind::Heteroskedastic => {
                let u = match shared_u {
                    Some(u) => u,
                    None => rng.uniform(),
                };
                let p = heteroskedastic_outlier_prob(t, u);
                flags[i] = rng.bernoulli(p);
                let g2 = rng.uniform_in(0.0, GAMMA_MAX);
                (p, 0.9 * heteroskedastic_gamma_profile(t) + 0.1 * g2)
            }
            NoiseKind::Iid => {
                flags[i] = rng.bernoulli(IID_OUTLIER_PROB);
                (IID_OUTLIER_PROB, rng.uniform_in(0.0, GAMMA_MAX))
            }
        };
        debug_assert!((0.0..=1.0).contains(&p_i));
        if flags[i] {
            let std = model.sigma_out * gamma.sqrt() / (m as f64).sqrt();
            for x in noisy.row_mut(i) {
                *x += std * rng.standard_normal();
            }
        }
    }
    Ok(Dataset {
        noisy_points: Some(noisy),
        outlier_flags: Some(flags),
        ..ds.clone()
    })
}

fn support_len(row: &[f64]) -> usize {
    row.iter().rposition(|&v| v != 0.0).map_or(0, |k| k + 1)
}

/// Largest cross term `|r_ij|` over pairs `i != j`, and the inlier fraction.
///
/// `r_ij = -2 (x_i^c - x_j^c)^T (xi_i - xi_j) - 2 xi_i^T xi_j` with
/// `xi = noisy - clean`.
pub fn cross_term_stats(ds: &Dataset) -> Result<(f64, f64)> {
    let (Some(noisy), Some(flags)) = (&ds.noisy_points, &ds.outlier_flags) else {
        return domain("cross-term statistics need a noisy dataset");
    };
    let n = ds.n();
    let m = ds.ambient_dim();
    let clean = &ds.clean_points;
    let mut xi = Matrix::zeros(n, m);
    for i in 0..n {
        for ((o, a), b) in xi.row_mut(i).iter_mut().zip(noisy.row(i)).zip(clean.row(i)) {
            *o = a - b;
        }
    }
    let clean_support: Vec<usize> = clean.rows_iter().map(support_len).collect();
    let noisy_rows: Vec<usize> = (0..n).filter(|&i| xi.row(i).iter().any(|&v| v != 0.0)).collect();
    let mut rank = vec![usize::MAX; n];
    for (a, &i) in noisy_rows.iter().enumerate() {
        rank[i] = a;
    }

    let mut max_abs = 0.0_f64;
    for (a, &i) in noisy_rows.iter().enumerate() {
        for j in 0..n {
            // noisy pairs are visited once, from the lower-ranked row
            if j == i || rank[j] < a {
                continue;
            }
            let len = clean_support[i].max(clean_support[j]);
            let (ci, cj) = (clean.row(i), clean.row(j));
            let (zi, zj) = (xi.row(i), xi.row(j));
            let mut data_noise = 0.0;
            for k in 0..len {
                data_noise += (ci[k] - cj[k]) * (zi[k] - zj[k]);
            }
            // clean coordinates vanish beyond `len`, so the data-noise term is complete
            let r = if rank[j] != usize::MAX {
                let noise_noise: f64 = zi.iter().zip(zj).map(|(p, q)| p * q).sum();
                -2.0 * data_noise - 2.0 * noise_noise
            } else {
                -2.0 * data_noise
            };
            max_abs = max_abs.max(r.abs());
        }
    }
    let inliers = flags.iter().filter(|&&b| !b).count();
    Ok((max_abs, inliers as f64 / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{sample_dataset, DensitySpec};

    fn curve(n: usize, m: usize, seed: u64) -> Dataset {
        sample_dataset(n, DensitySpec::Sinusoidal1D, seed)
            .unwrap()
            .embedded(m)
            .unwrap()
    }

    fn brute_force_cross_terms(ds: &Dataset) -> f64 {
        let noisy = ds.noisy_points.as_ref().unwrap();
        let n = ds.n();
        let xi: Vec<Vec<f64>> = (0..n)
            .map(|i| noisy.row(i).iter().zip(ds.clean_points.row(i)).map(|(a, b)| a - b).collect())
            .collect();
        let mut best = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                if i == j {
                    continue;
                }
                let mut r = 0.0;
                for k in 0..ds.ambient_dim() {
                    let dc = ds.clean_points[(i, k)] - ds.clean_points[(j, k)];
                    r += -2.0 * dc * (xi[i][k] - xi[j][k]) - 2.0 * xi[i][k] * xi[j][k];
                }
                best = best.max(r.abs());
            }
        }
        best
    }

    #[test]
    fn zero_outlier_probability_is_identity() {
        let ds = curve(200, 50, 1);
        let model = NoiseModel { p_out: 0.0, ..NoiseModel::new(NoiseKind::Simple, 50) };
        let noisy = add_noise(&ds, &model, 3).unwrap();
        assert_eq!(noisy.noisy_points.as_ref().unwrap(), &ds.clean_points);
        assert_eq!(noisy.outlier_count(), 0);
        assert_eq!(cross_term_stats(&noisy).unwrap(), (0.0, 1.0));
    }

    #[test]
    fn simple_outlier_count_concentrates() {
        let n = 3000;
        let ds = curve(n, 8, 2);
        let noisy = add_noise(&ds, &NoiseModel::new(NoiseKind::Simple, 8), 5).unwrap();
        let count = noisy.outlier_count() as f64;
        let bound = 3.0 * (n as f64 * 0.1 * 0.9).sqrt();
        assert!((count - 300.0).abs() <= bound, "{count}");
    }

    #[test]
    fn inlier_rows_untouched_and_deterministic() {
        let ds = curve(300, 40, 4);
        for kind in [NoiseKind::Simple, NoiseKind::Heteroskedastic, NoiseKind::Iid] {
            let model = NoiseModel::new(kind, 40);
            let a = add_noise(&ds, &model, 9).unwrap();
            let b = add_noise(&ds, &model, 9).unwrap();
            assert_eq!(a, b);
            let noisy = a.noisy_points.as_ref().unwrap();
            let flags = a.outlier_flags.as_ref().unwrap();
            for i in 0..300 {
                if flags[i] {
                    assert_ne!(noisy.row(i), ds.clean_points.row(i));
                } else {
                    assert_eq!(noisy.row(i), ds.clean_points.row(i));
                }
            }
        }
    }

    #[test]
    fn heteroskedastic_probabilities_bounded() {
        let mut rng = SeededRng::new(0);
        for _ in 0..10_000 {
            let p = heteroskedastic_outlier_prob(rng.uniform(), rng.uniform());
            assert!((0.05..=0.95).contains(&p));
        }
        assert!((heteroskedastic_gamma_profile(0.75) - 10.0).abs() < 1e-12);
        assert!((heteroskedastic_gamma_profile(0.25) - 1.0).abs() < 1e-12);
    }

    fn binned_outlier_spread(ds: &Dataset) -> f64 {
        let flags = ds.outlier_flags.as_ref().unwrap();
        let mut hits = [0.0; 10];
        let mut counts = [0.0; 10];
        for (t, &b) in ds.t.iter().zip(flags) {
            let k = ((t * 10.0) as usize).min(9);
            counts[k] += 1.0;
            hits[k] += f64::from(u8::from(b));
        }
        let fr: Vec<f64> = hits.iter().zip(&counts).map(|(h, c)| h / c).collect();
        fr.iter().cloned().fold(f64::MIN, f64::max) - fr.iter().cloned().fold(f64::MAX, f64::min)
    }

    #[test]
    fn heteroskedastic_phase_modes() {
        let ds = curve(5000, 4, 3);
        let per_sample = add_noise(&ds, &NoiseModel::new(NoiseKind::Heteroskedastic, 4), 5).unwrap();
        let shared = NoiseModel { phase: HetPhase::Shared, ..NoiseModel::new(NoiseKind::Heteroskedastic, 4) };
        let shared = add_noise(&ds, &shared, 5).unwrap();
        // per-sample phases wash out the dependence on t
        assert!(binned_outlier_spread(&per_sample) < 0.12);
        assert!(binned_outlier_spread(&shared) > 0.5);
        assert_eq!("shared".parse::<HetPhase>().unwrap(), HetPhase::Shared);
    }

    #[test]
    fn iid_mostly_outliers() {
        let ds = curve(2000, 6, 1);
        let a = add_noise(&ds, &NoiseModel::new(NoiseKind::Iid, 6), 2).unwrap();
        let frac = a.outlier_count() as f64 / 2000.0;
        assert!((frac - 0.95).abs() < 0.03, "{frac}");
    }

    #[test]
    fn rejects_bad_models_and_shapes() {
        let ds = curve(20, 10, 1);
        assert!(add_noise(&ds, &NoiseModel::new(NoiseKind::Simple, 12), 0).is_err());
        assert!(add_noise(&ds, &NoiseModel { p_out: 1.0, ..NoiseModel::new(NoiseKind::Simple, 10) }, 0).is_err());
        assert!(add_noise(&ds, &NoiseModel { sigma_out: 0.0, ..NoiseModel::new(NoiseKind::Simple, 10) }, 0).is_err());
        let small = curve(20, 4, 1);
        assert!(add_noise(&small.embedded(4).unwrap(), &NoiseModel::new(NoiseKind::Simple, 3), 0).is_err());
        assert!(cross_term_stats(&ds).is_err());
    }

    #[test]
    fn noise_inner_products_small_in_high_dimension() {
        let m = 2000;
        let ds = curve(3000, m, 6);
        let noisy = add_noise(&ds, &NoiseModel::new(NoiseKind::Simple, m), 8).unwrap();
        let pts = noisy.noisy_points.as_ref().unwrap();
        let flags = noisy.outlier_flags.as_ref().unwrap();
        let out: Vec<Vec<f64>> = (0..3000)
            .filter(|&i| flags[i])
            .map(|i| pts.row(i).iter().zip(ds.clean_points.row(i)).map(|(a, b)| a - b).collect())
            .collect();
        let mut worst = 0.0_f64;
        for a in 0..out.len() {
            for b in (a + 1)..out.len() {
                let d: f64 = out[a].iter().zip(&out[b]).map(|(x, y)| x * y).sum();
                worst = worst.max(d.abs());
            }
        }
        let bound = 5.0 * 0.01 * ((m as f64).ln() / m as f64).sqrt();
        assert!((bound - 0.0031).abs() < 1e-4);
        assert!(worst < bound, "{worst} >= {bound}");
    }

    #[test]
    fn single_outlier_cross_terms_match_brute_force() {
        let ds = curve(40, 12, 3);
        let mut noisy = ds.clone();
        let mut pts = ds.clean_points.clone();
        let mut rng = SeededRng::new(1);
        for x in pts.row_mut(7) {
            *x += 0.05 * rng.standard_normal();
        }
        let mut flags = vec![false; 40];
        flags[7] = true;
        noisy.noisy_points = Some(pts);
        noisy.outlier_flags = Some(flags);
        let (r, frac) = cross_term_stats(&noisy).unwrap();
        let want = brute_force_cross_terms(&noisy);
        assert!((r - want).abs() <= 1e-14 * want, "{r} vs {want}");
        assert!((frac - 39.0 / 40.0).abs() < 1e-15);
    }

    #[test]
    fn cross_terms_match_brute_force_with_many_outliers() {
        let ds = curve(60, 30, 8);
        for kind in [NoiseKind::Simple, NoiseKind::Heteroskedastic, NoiseKind::Iid] {
            let noisy = add_noise(&ds, &NoiseModel::new(kind, 30), 2).unwrap();
            let (r, _) = cross_term_stats(&noisy).unwrap();
            let want = brute_force_cross_terms(&noisy);
            assert!((r - want).abs() <= 1e-12 * want.max(1e-300), "{kind:?}: {r} vs {want}");
        }
    }

    #[test]
    fn cross_terms_shrink_with_dimension() {
        let stats = |m: usize| {
            let ds = curve(600, m, 1);
            let noisy = add_noise(&ds, &NoiseModel::new(NoiseKind::Simple, m), 1).unwrap();
            cross_term_stats(&noisy).unwrap().0
        };
        let small = stats(2000);
        let large = stats(8000);
        assert!(large < small, "{large} vs {small}");
        assert!(small < 0.05);
    }
}
