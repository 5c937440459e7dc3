//! Gaussian kernel affinities and degrees.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::matrix::Matrix;

/// Which constant multiplies `exp(-|x - y|^2 / 4 eps)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum KernelConvention {
    /// `n^{-1} (4 pi eps)^{-d/2}`: row sums approximate the sampling density.
    Normalized,
    /// No prefactor. Normalizations that cancel global constants use this.
    #[default]
    Unscaled,
}

impl std::str::FromStr for KernelConvention {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normalized" => Ok(Self::Normalized),
            "unscaled" => Ok(Self::Unscaled),
            other => Err(crate::Error::Parse(format!("unknown kernel convention `{other}`"))),
        }
    }
}

/// Dense symmetric non-negative affinity matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Affinity {
    pub matrix: Matrix,
    pub epsilon: f64,
    pub intrinsic_dim: usize,
    pub zero_diag: bool,
    pub convention: KernelConvention,
}

impl Affinity {
    /// Wraps an arbitrary matrix. Checks squareness, symmetry and sign.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        if !matrix.is_square() {
            return domain("affinity matrix must be square");
        }
        if !matrix.is_symmetric() {
            return domain("affinity matrix must be exactly symmetric");
        }
        if matrix.as_slice().iter().any(|&v| !(v >= 0.0)) {
            return domain("affinity entries must be finite and non-negative");
        }
        let n = matrix.nrows();
        let zero_diag = (0..n).all(|i| matrix[(i, i)] == 0.0);
        Ok(Self {
            matrix,
            epsilon: 1.0,
            intrinsic_dim: 1,
            zero_diag,
            convention: KernelConvention::Unscaled,
        })
    }

    pub fn n(&self) -> usize {
        self.matrix.nrows()
    }

    /// Factor that turns this affinity's entries into the normalized convention.
    pub fn normalization_factor(&self) -> f64 {
        match self.convention {
            KernelConvention::Normalized => 1.0,
            KernelConvention::Unscaled => normalized_prefactor(self.n(), self.epsilon, self.intrinsic_dim),
        }
    }

    pub fn degree(&self) -> DegreeVector {
        degree(self)
    }
}

/// `n^{-1} (4 pi eps)^{-d/2}`.
pub fn normalized_prefactor(n: usize, epsilon: f64, d: usize) -> f64 {
    (4.0 * PI * epsilon).powf(-(d as f64) / 2.0) / n as f64
}

/// Row sums of an affinity.
#[derive(Clone, Debug, PartialEq)]
pub struct DegreeVector(pub Vec<f64>);

impl DegreeVector {
    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn all_positive(&self) -> bool {
        self.0.iter().all(|&v| v > 0.0)
    }
}

/// `g(xi) = (4 pi)^{-d/2} exp(-xi / 4)`.
pub fn gaussian_kernel(xi: f64, d: usize) -> f64 {
    (4.0 * PI).powf(-(d as f64) / 2.0) * (-xi / 4.0).exp()
}

/// Index one past the last nonzero entry of `row`.
fn support_len(row: &[f64]) -> usize {
    row.iter().rposition(|&v| v != 0.0).map_or(0, |k| k + 1)
}

/// Pairwise squared Euclidean distances, one evaluation per unordered pair.
///
/// Trailing zero coordinates shared by both rows contribute exactly zero and
/// are skipped, which makes padded low-dimensional rows cheap.
pub fn pairwise_sq_dists(points: &Matrix) -> Matrix {
    let n = points.nrows();
    let support: Vec<usize> = points.rows_iter().map(support_len).collect();
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let xi = points.row(i);
            ((i + 1)..n)
                .map(|j| {
                    let len = support[i].max(support[j]);
                    let xj = points.row(j);
                    xi[..len]
                        .iter()
                        .zip(&xj[..len])
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut out = Matrix::zeros(n, n);
    for (i, row) in upper.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + 1 + off;
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}

/// Affinity from precomputed squared distances (must be exactly symmetric).
pub fn affinity_from_sq_dists(
    sq_dists: &Matrix,
    epsilon: f64,
    d: usize,
    zero_diag: bool,
    convention: KernelConvention,
) -> Result<Affinity> {
    if !(epsilon > 0.0) || !epsilon.is_finite() {
        return domain(format!("kernel bandwidth must be positive, got {epsilon}"));
    }
    if d == 0 {
        return domain("intrinsic dimension must be positive");
    }
    let n = sq_dists.nrows();
    if n < 2 || !sq_dists.is_square() {
        return domain("need a square distance matrix with at least two points");
    }
    let prefactor = match convention {
        KernelConvention::Normalized => normalized_prefactor(n, epsilon, d),
        KernelConvention::Unscaled => 1.0,
    };
    let inv4e = 1.0 / (4.0 * epsilon);
    let mut matrix = Matrix::zeros(n, n);
    for i in 0..n {
        matrix[(i, i)] = if zero_diag { 0.0 } else { prefactor };
        for j in (i + 1)..n {
            let w = prefactor * (-sq_dists[(i, j)] * inv4e).exp();
            matrix[(i, j)] = w;
            matrix[(j, i)] = w;
        }
    }
    Ok(Affinity {
        matrix,
        epsilon,
        intrinsic_dim: d,
        zero_diag,
        convention,
    })
}

pub fn build_affinity(
    points: &Matrix,
    epsilon: f64,
    d: usize,
    zero_diag: bool,
    convention: KernelConvention,
) -> Result<Affinity> {
    if !(epsilon > 0.0) {
        return domain(format!("kernel bandwidth must be positive, got {epsilon}"));
    }
    if points.nrows() < 2 {
        return domain("need at least two points");
    }
    affinity_from_sq_dists(&pairwise_sq_dists(points), epsilon, d, zero_diag, convention)
}

pub fn degree(a: &Affinity) -> DegreeVector {
    DegreeVector(a.matrix.row_sums())
}

/// Surface area of the unit sphere in R^d.
fn sphere_area(d: usize) -> f64 {
    match d {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => unreachable!(),
    }
}

fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        recurse(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + recurse(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }
    let (fa, fb) = (f(a), f(b));
    let fm = f(0.5 * (a + b));
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    recurse(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Zeroth and second moments of `g` over R^d, by radial quadrature truncated
/// at `|u|^2 = 200`.
pub fn kernel_moments(d: usize) -> Result<(f64, f64)> {
    if !(1..=3).contains(&d) {
        return domain(format!("moment quadrature supports d = 1, 2, 3; got {d}"));
    }
    let r_max = 200.0_f64.sqrt();
    let area = sphere_area(d);
    let di = d as i32;
    let m0_integrand = |r: f64| r.powi(di - 1) * gaussian_kernel(r * r, d);
    let m2_integrand = |r: f64| r.powi(di + 1) * gaussian_kernel(r * r, d);
    let m0 = area * adaptive_simpson(&m0_integrand, 0.0, r_max, 1e-14);
    let m2 = area * adaptive_simpson(&m2_integrand, 0.0, r_max, 1e-14) / d as f64;
    Ok((m0, m2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manifold::{sample_dataset, DensitySpec, density};

    #[test]
    fn kernel_closed_form() {
        assert!((gaussian_kernel(0.0, 1) - 0.282_094_8).abs() < 1e-7);
        assert!((gaussian_kernel(4.0, 1) - gaussian_kernel(0.0, 1) * (-1.0_f64).exp()).abs() < 1e-16);
        assert!((gaussian_kernel(0.0, 2) - 0.079_577_5).abs() < 1e-7);
    }

    #[test]
    fn identical_points_give_constant_matrix() {
        let pts = Matrix::from_rows(&[vec![0.3, -1.0], vec![0.3, -1.0]]);
        let eps = 0.01;
        let a = build_affinity(&pts, eps, 1, false, KernelConvention::Normalized).unwrap();
        let want = 0.5 * eps.powf(-0.5) * (4.0 * PI).powf(-0.5);
        for v in a.matrix.as_slice() {
            assert!((v - want).abs() < 1e-12 * want);
        }
    }

    #[test]
    fn diagonal_and_zero_diagonal() {
        let ds = sample_dataset(50, DensitySpec::Sinusoidal1D, 1).unwrap();
        let eps = 1e-3;
        for d in 1..=3 {
            let a = build_affinity(&ds.clean_points, eps, d, false, KernelConvention::Normalized).unwrap();
            let beta = (4.0 * PI * eps).powf(-(d as f64) / 2.0) / 50.0;
            for i in 0..50 {
                assert!((a.matrix[(i, i)] - beta).abs() <= 1e-14 * beta);
            }
        }
        let z = build_affinity(&ds.clean_points, eps, 1, true, KernelConvention::Unscaled).unwrap();
        assert!((0..50).all(|i| z.matrix[(i, i)] == 0.0));
        assert!(z.zero_diag);
    }

    #[test]
    fn symmetry_exact_and_entries_positive() {
        let ds = sample_dataset(120, DensitySpec::Sinusoidal1D, 8).unwrap();
        let pts = crate::manifold::embed_ambient(&ds.clean_points, 30).unwrap();
        let a = build_affinity(&pts, 5e-3, 1, true, KernelConvention::Unscaled).unwrap();
        assert!(a.matrix.is_symmetric());
        for i in 0..120 {
            for j in 0..120 {
                if i != j {
                    assert!(a.matrix[(i, j)] > 0.0);
                }
            }
        }
    }

    #[test]
    fn convention_scale_relation() {
        let ds = sample_dataset(80, DensitySpec::UniformCircle, 3).unwrap();
        let eps = 2e-3;
        let u = build_affinity(&ds.clean_points, eps, 1, false, KernelConvention::Unscaled).unwrap();
        let n = build_affinity(&ds.clean_points, eps, 1, false, KernelConvention::Normalized).unwrap();
        let c = normalized_prefactor(80, eps, 1);
        for (a, b) in u.matrix.as_slice().iter().zip(n.matrix.as_slice()) {
            let want = a * c;
            assert!((b - want).abs() <= 1e-14 * want.abs().max(f64::MIN_POSITIVE));
        }
        assert!((u.normalization_factor() - c).abs() < 1e-15 * c);
    }

    #[test]
    fn bandwidth_must_be_positive() {
        let pts = Matrix::from_rows(&[vec![0.0], vec![1.0]]);
        assert!(build_affinity(&pts, 0.0, 1, false, KernelConvention::Unscaled).is_err());
        assert!(build_affinity(&pts, -1.0, 1, false, KernelConvention::Unscaled).is_err());
    }

    #[test]
    fn degree_small_cases() {
        let a = Affinity::from_matrix(Matrix::from_rows(&[vec![0.0, 0.7], vec![0.7, 0.0]])).unwrap();
        assert_eq!(degree(&a).0, vec![0.7, 0.7]);
        let b = Affinity::from_matrix(Matrix::from_fn(3, 3, |_, _| 0.25)).unwrap();
        assert_eq!(degree(&b).0, vec![0.75, 0.75, 0.75]);
    }

    #[test]
    fn degree_tracks_density() {
        let n = 3000;
        let ds = sample_dataset(n, DensitySpec::Sinusoidal1D, 21).unwrap();
        let a = build_affinity(&ds.clean_points, 5e-4, 1, false, KernelConvention::Normalized).unwrap();
        let deg = degree(&a);
        assert!(deg.all_positive());
        let close = deg
            .values()
            .iter()
            .zip(&ds.t)
            .filter(|(d, &t)| (*d - density(t, DensitySpec::Sinusoidal1D)).abs() < 0.15)
            .count();
        assert!(close as f64 >= 0.99 * n as f64, "{close} of {n} within 0.15");
    }

    #[test]
    fn moments_match_identities() {
        for (d, tol) in [(1, 1e-8), (2, 1e-8), (3, 1e-6)] {
            let (m0, m2) = kernel_moments(d).unwrap();
            assert!((m0 - 1.0).abs() < tol, "d={d}: m0={m0}");
            assert!((m2 - 2.0).abs() < tol, "d={d}: m2={m2}");
        }
        assert!(kernel_moments(4).is_err());
    }
}
