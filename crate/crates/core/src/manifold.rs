//! Synthetic manifold data: a closed unit-length curve in R^4 sampled with a
//! non-uniform density, and the uniformly sampled circle.
//!
//! Both manifolds are parameterized by arclength `t` in `[0, 1)`, so the
//! intrinsic Laplacian is `d^2/dt^2` and the weighted Laplacian of a test
//! function has a closed form.

use std::f64::consts::PI;

use crate::error::{domain, Result};
use crate::matrix::Matrix;
use crate::rng::SeededRng;

/// Frequency of the second winding of the curve.
const CURVE_OMEGA: f64 = 2.0;
/// Amplitude of the sinusoidal density modulation.
const DENSITY_AMPLITUDE: f64 = 0.6;
/// Phase shift of the test function.
const TEST_PHASE: f64 = 0.05;

const BISECTION_TOL: f64 = 1e-12;
const BISECTION_MAX_ITER: usize = 60;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DensitySpec {
    /// `p(t) = 1 - 0.6 sin(6 pi t)` on the closed curve in R^4.
    Sinusoidal1D,
    /// Uniform density on a circle of length one in R^2.
    UniformCircle,
}

impl DensitySpec {
    /// Dimension of the clean embedding.
    pub fn clean_dim(self) -> usize {
        match self {
            DensitySpec::Sinusoidal1D => 4,
            DensitySpec::UniformCircle => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DensitySpec::Sinusoidal1D => "sinusoidal1d",
            DensitySpec::UniformCircle => "uniform-circle",
        }
    }

    /// Clean ambient point at arclength `t`.
    pub fn point(self, t: f64) -> Result<Vec<f64>> {
        match self {
            DensitySpec::Sinusoidal1D => curve_point(t).map(|p| p.to_vec()),
            DensitySpec::UniformCircle => circle_point(t).map(|p| p.to_vec()),
        }
    }
}

impl std::str::FromStr for DensitySpec {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sinusoidal1d" | "sinusoidal" | "curve" => Ok(DensitySpec::Sinusoidal1D),
            "uniform-circle" | "uniformcircle" | "circle" => Ok(DensitySpec::UniformCircle),
            other => Err(crate::Error::Parse(format!("unknown density `{other}`"))),
        }
    }
}

fn check_coord(t: f64) -> Result<()> {
    if (0.0..1.0).contains(&t) {
        Ok(())
    } else {
        domain(format!("intrinsic coordinate {t} outside [0, 1)"))
    }
}

/// Point on the unit-speed closed curve in R^4.
pub fn curve_point(t: f64) -> Result<[f64; 4]> {
    check_coord(t)?;
    Ok(curve_point_unchecked(t))
}

pub(crate) fn curve_point_unchecked(t: f64) -> [f64; 4] {
    let scale = 1.0 / (2.0 * PI * 5.0_f64.sqrt());
    let a = 2.0 * PI * t;
    let b = CURVE_OMEGA * a;
    let r = 2.0 / CURVE_OMEGA;
    [
        scale * a.cos(),
        scale * a.sin(),
        scale * r * b.cos(),
        scale * r * b.sin(),
    ]
}

/// Point on the circle of length one (radius `1 / 2 pi`).
pub fn circle_point(t: f64) -> Result<[f64; 2]> {
    check_coord(t)?;
    let a = 2.0 * PI * t;
    let r = 1.0 / (2.0 * PI);
    Ok([r * a.cos(), r * a.sin()])
}

pub fn density(t: f64, spec: DensitySpec) -> f64 {
    match spec {
        DensitySpec::Sinusoidal1D => 1.0 - DENSITY_AMPLITUDE * (6.0 * PI * t).sin(),
        DensitySpec::UniformCircle => 1.0,
    }
}

pub fn density_derivative(t: f64, spec: DensitySpec) -> f64 {
    match spec {
        DensitySpec::Sinusoidal1D => -DENSITY_AMPLITUDE * 6.0 * PI * (6.0 * PI * t).cos(),
        DensitySpec::UniformCircle => 0.0,
    }
}

/// Cumulative distribution of the sinusoidal density on `[0, 1]`.
pub fn density_cdf(t: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&t) {
        return domain(format!("cdf argument {t} outside [0, 1]"));
    }
    Ok(cdf_unchecked(t))
}

fn cdf_unchecked(t: f64) -> f64 {
    t - (DENSITY_AMPLITUDE / (6.0 * PI)) * (1.0 - (6.0 * PI * t).cos())
}

/// Inverse of [`density_cdf`] by bisection.
pub fn density_cdf_inverse(u: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&u) {
        return domain(format!("probability {u} outside [0, 1]"));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..BISECTION_MAX_ITER {
        if hi - lo <= BISECTION_TOL {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if cdf_unchecked(mid) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn test_function(t: f64) -> f64 {
    (2.0 * PI * (t + TEST_PHASE)).sin()
}

pub fn test_function_derivative(t: f64) -> f64 {
    2.0 * PI * (2.0 * PI * (t + TEST_PHASE)).cos()
}

/// Weighted Laplacian `f'' + (p'/p) f'` of the test function along the curve.
pub fn delta_p_f(t: f64, spec: DensitySpec) -> f64 {
    let phase = 2.0 * PI * (t + TEST_PHASE);
    let second = -4.0 * PI * PI * phase.sin();
    let drift = density_derivative(t, spec) / density(t, spec);
    second + drift * 2.0 * PI * phase.cos()
}

/// Zero-pads each row of `points` to `m` columns.
pub fn embed_ambient(points: &Matrix, m: usize) -> Result<Matrix> {
    let k = points.ncols();
    if m < k {
        return domain(format!("ambient dimension {m} smaller than point dimension {k}"));
    }
    let mut out = Matrix::zeros(points.nrows(), m);
    for i in 0..points.nrows() {
        out.row_mut(i)[..k].copy_from_slice(points.row(i));
    }
    Ok(out)
}

/// Sampled manifold data, optionally with outlier noise.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub spec: DensitySpec,
    pub seed: u64,
    /// Arclength coordinates of the clean samples.
    pub t: Vec<f64>,
    pub clean_points: Matrix,
    pub noisy_points: Option<Matrix>,
    pub outlier_flags: Option<Vec<bool>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.t.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.clean_points.ncols()
    }

    /// Points the kernel should see: noisy if present, clean otherwise.
    pub fn observed(&self) -> &Matrix {
        self.noisy_points.as_ref().unwrap_or(&self.clean_points)
    }

    pub fn is_noisy(&self) -> bool {
        self.noisy_points.is_some()
    }

    pub fn outlier_count(&self) -> usize {
        self.outlier_flags
            .as_ref()
            .map_or(0, |f| f.iter().filter(|&&b| b).count())
    }

    /// Same samples with the clean points zero-padded to `m` columns.
    /// Noise, if any, is dropped.
    pub fn embedded(&self, m: usize) -> Result<Dataset> {
        Ok(Dataset {
            clean_points: embed_ambient(&self.clean_points, m)?,
            noisy_points: None,
            outlier_flags: None,
            ..self.clone()
        })
    }

    /// Test function values at the clean coordinates.
    pub fn test_function_values(&self) -> Vec<f64> {
        self.t.iter().map(|&t| test_function(t)).collect()
    }

    pub fn delta_p_f_values(&self) -> Vec<f64> {
        self.t.iter().map(|&t| delta_p_f(t, self.spec)).collect()
    }
}

/// Draws `n` i.i.d. samples from `spec` with a seeded stream.
pub fn sample_dataset(n: usize, spec: DensitySpec, seed: u64) -> Result<Dataset> {
    if n < 2 {
        return domain(format!("need at least two samples, got {n}"));
    }
    let mut rng = SeededRng::new(seed);
    let mut t = Vec::with_capacity(n);
    for _ in 0..n {
        let u = rng.uniform();
        let ti = match spec {
            DensitySpec::Sinusoidal1D => density_cdf_inverse(u)?,
            DensitySpec::UniformCircle => u,
        };
        // bisection midpoint can round up to 1.0 for u near one
        t.push(if ti >= 1.0 { 1.0 - f64::EPSILON / 2.0 } else { ti });
    }
    let dim = spec.clean_dim();
    let mut clean = Matrix::zeros(n, dim);
    for (i, &ti) in t.iter().enumerate() {
        clean.row_mut(i).copy_from_slice(&spec.point(ti)?);
    }
    Ok(Dataset {
        spec,
        seed,
        t,
        clean_points: clean,
        noisy_points: None,
        outlier_flags: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const S: f64 = 1.0 / (2.0 * PI * 2.236_067_977_499_79);

    fn speed(t: f64, h: f64) -> f64 {
        let a = curve_point_unchecked(t);
        let b = curve_point_unchecked(t + h);
        a.iter().zip(&b).map(|(x, y)| (y - x).powi(2)).sum::<f64>().sqrt() / h
    }

    #[test]
    fn curve_point_known_values() {
        let p = curve_point(0.0).unwrap();
        let want = [S, 0.0, S, 0.0];
        for (a, b) in p.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15);
        }
        let p = curve_point(0.25).unwrap();
        let want = [0.0, S, -S, 0.0];
        for (a, b) in p.iter().zip(&want) {
            assert!((a - b).abs() < 1e-15, "{p:?}");
        }
    }

    #[test]
    fn curve_is_unit_speed() {
        assert!((speed(0.137, 1e-6) - 1.0).abs() < 1e-5);
        let mut rng = SeededRng::new(11);
        for _ in 0..1000 {
            let t = rng.uniform() * 0.999;
            assert!((speed(t, 1e-6) - 1.0).abs() < 1e-5);
        }
    }

    #[test]
    fn curve_rejects_out_of_range() {
        assert!(curve_point(1.0).is_err());
        assert!(curve_point(-0.1).is_err());
        assert!(circle_point(1.5).is_err());
    }

    #[test]
    fn density_values() {
        let s = DensitySpec::Sinusoidal1D;
        assert!((density(0.0, s) - 1.0).abs() < 1e-15);
        assert!((density(1.0 / 12.0, s) - 0.4).abs() < 1e-15);
        assert!((density(0.25, s) - 1.6).abs() < 1e-15);
        assert_eq!(density(0.3, DensitySpec::UniformCircle), 1.0);
    }

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let h = (b - a) / n as f64;
        let mut s = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * f(a + i as f64 * h);
        }
        s * h / 3.0
    }

    #[test]
    fn density_integrates_to_one() {
        for spec in [DensitySpec::Sinusoidal1D, DensitySpec::UniformCircle] {
            let v = simpson(|t| density(t, spec), 0.0, 1.0, 2000);
            assert!((v - 1.0).abs() < 1e-10, "{spec:?}: {v}");
        }
    }

    #[test]
    fn cdf_values_and_quadrature() {
        assert_eq!(density_cdf(0.0).unwrap(), 0.0);
        assert!((density_cdf(1.0).unwrap() - 1.0).abs() < 1e-15);
        let want = 1.0 / 6.0 - 0.2 / PI;
        assert!((density_cdf(1.0 / 6.0).unwrap() - want).abs() < 1e-15);
        assert!((want - 0.103005).abs() < 1e-6);
        let quad = simpson(|t| density(t, DensitySpec::Sinusoidal1D), 0.0, 1.0 / 6.0, 2000);
        assert!((quad - want).abs() < 1e-12);
        assert!(density_cdf(1.1).is_err());
    }

    #[test]
    fn cdf_monotone_and_invertible() {
        let grid: Vec<f64> = (0..=10_000).map(|i| density_cdf(i as f64 / 1e4).unwrap()).collect();
        assert!(grid.windows(2).all(|w| w[1] > w[0]));
        let mut rng = SeededRng::new(5);
        for _ in 0..100 {
            let u = rng.uniform();
            let t = density_cdf_inverse(u).unwrap();
            assert!((density_cdf(t).unwrap() - u).abs() < 1e-10);
        }
    }

    #[test]
    fn test_function_values() {
        assert!((test_function(0.2) - 1.0).abs() < 1e-15);
        assert!(test_function(0.45).abs() < 1e-15);
        assert!((test_function(0.0) - 0.309_016_994_374_947_4).abs() < 1e-12);
    }

    #[test]
    fn weighted_laplacian_closed_form() {
        let v = delta_p_f(0.2, DensitySpec::Sinusoidal1D);
        assert!((v + 4.0 * PI * PI).abs() < 1e-9, "{v}");
        assert!((v + 39.478).abs() < 1e-3);
        for t in [0.0, 0.1, 0.33, 0.77] {
            let want = -4.0 * PI * PI * (2.0 * PI * (t + 0.05)).sin();
            assert!((delta_p_f(t, DensitySpec::UniformCircle) - want).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_laplacian_matches_finite_differences() {
        // (1/p) d/dt (p f') by central differences
        let spec = DensitySpec::Sinusoidal1D;
        let h = 1e-5;
        let flux = |t: f64| density(t, spec) * (test_function(t + h / 2.0) - test_function(t - h / 2.0)) / h;
        for i in 0..1000 {
            let t = i as f64 / 1000.0;
            let fd = (flux(t + h / 2.0) - flux(t - h / 2.0)) / h / density(t, spec);
            let exact = delta_p_f(t, spec);
            let scale = exact.abs().max(1.0);
            assert!((fd - exact).abs() / scale < 1e-4, "t={t}: fd={fd}, exact={exact}");
        }
    }

    #[test]
    fn embedding_pads_with_zeros() {
        let p = Matrix::from_rows(&[vec![1.0, 2.0]]);
        let e = embed_ambient(&p, 4).unwrap();
        assert_eq!(e.row(0), &[1.0, 2.0, 0.0, 0.0]);
        let q = Matrix::from_rows(&[vec![1.0, 2.0, 3.0, 4.0], vec![0.5, 0.0, -1.0, 2.0]]);
        assert_eq!(embed_ambient(&q, 4).unwrap(), q);
        let e = embed_ambient(&q, 9).unwrap();
        for i in 0..2 {
            let a: f64 = q.row(i).iter().map(|v| v * v).sum();
            let b: f64 = e.row(i).iter().map(|v| v * v).sum();
            assert_eq!(a, b);
        }
        assert!(embed_ambient(&q, 3).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = sample_dataset(500, DensitySpec::Sinusoidal1D, 9).unwrap();
        let b = sample_dataset(500, DensitySpec::Sinusoidal1D, 9).unwrap();
        assert_eq!(a, b);
        let c = sample_dataset(500, DensitySpec::Sinusoidal1D, 10).unwrap();
        assert_ne!(a.t, c.t);
        assert!(sample_dataset(1, DensitySpec::UniformCircle, 0).is_err());
    }

    #[test]
    fn sampled_rows_lie_on_manifold() {
        let ds = sample_dataset(200, DensitySpec::Sinusoidal1D, 2).unwrap();
        for i in 0..ds.n() {
            assert!((0.0..1.0).contains(&ds.t[i]));
            assert_eq!(ds.clean_points.row(i), &curve_point(ds.t[i]).unwrap());
        }
    }

    #[test]
    fn circle_samples_centered() {
        let n = 4000;
        let ds = sample_dataset(n, DensitySpec::UniformCircle, 4).unwrap();
        let r = 1.0 / (2.0 * PI);
        for k in 0..2 {
            let mean = (0..n).map(|i| ds.clean_points[(i, k)]).sum::<f64>() / n as f64;
            // coordinate std is r / sqrt(2)
            assert!(mean.abs() < 4.0 * r / (2.0 * n as f64).sqrt(), "coordinate {k}: {mean}");
        }
    }

    #[test]
    fn sinusoidal_histogram_matches_density() {
        let n = 100_000;
        let ds = sample_dataset(n, DensitySpec::Sinusoidal1D, 123).unwrap();
        let bins = 20;
        let mut counts = vec![0usize; bins];
        for &t in &ds.t {
            counts[((t * bins as f64) as usize).min(bins - 1)] += 1;
        }
        for (b, &c) in counts.iter().enumerate() {
            let lo = b as f64 / bins as f64;
            let hi = (b + 1) as f64 / bins as f64;
            let expected = (density_cdf(hi).unwrap() - density_cdf(lo).unwrap()) * n as f64;
            let rel = (c as f64 - expected).abs() / expected;
            assert!(rel < 0.05, "bin {b}: {c} vs {expected}");
        }
    }
}
