use bistoch::sinkhorn::sk_update;
use bistoch::{approx_sym_sk, scaling_residual, Affinity, Matrix, SeededRng, SkConfig};
use proptest::prelude::*;

fn affinity(m: Matrix) -> Affinity {
    Affinity::from_matrix(m).unwrap()
}

/// Symmetric matrix with entries in `[lo, 1]`.
fn sym_positive(n: usize, entries: &[f64], lo: f64) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in i..n {
            let v = lo + (1.0 - lo) * entries[k % entries.len()];
            k += 1;
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn sym_matrix_strategy(lo: f64) -> impl Strategy<Value = Matrix> {
    (2usize..10).prop_flat_map(move |n| {
        prop::collection::vec(0.0f64..1.0, n * (n + 1) / 2).prop_map(move |e| sym_positive(n, &e, lo))
    })
}

/// Exactly representable instance with a known scaling factor: a symmetric
/// doubly stochastic `S` with dyadic entries and `eta` made of powers of two,
/// so `A = D_eta^{-1} S D_eta^{-1}` is scaled by `eta` without rounding.
fn dyadic_instance(n: usize, perm_seed: u64, exps: &[i32]) -> (Matrix, Vec<f64>) {
    let mut rng = SeededRng::new(perm_seed);
    let mut s = Matrix::zeros(n, n);
    // four symmetrized permutations with weight 1/4 each
    for _ in 0..4 {
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = (rng.uniform() * (i + 1) as f64) as usize;
            perm.swap(i, j.min(i));
        }
        for (i, &j) in perm.iter().enumerate() {
            s[(i, j)] += 0.125;
            s[(j, i)] += 0.125;
        }
    }
    let eta: Vec<f64> = (0..n).map(|i| 2f64.powi(exps[i % exps.len()])).collect();
    let a = Matrix::from_fn(n, n, |i, j| s[(i, j)] / eta[i] / eta[j]);
    (a, eta)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn fixed_point_is_preserved(n in 2usize..12, seed in any::<u64>(), exps in prop::collection::vec(-6i32..6, 12)) {
        let (a, eta) = dyadic_instance(n, seed, &exps);
        let a = affinity(a);
        let res = scaling_residual(&a, &eta).unwrap();
        prop_assert!(res.iter().all(|&e| e == 0.0));
        let next = sk_update(&a, &eta).unwrap();
        for (x, y) in next.iter().zip(&eta) {
            prop_assert!((x - y).abs() <= 1e-14 * y);
        }
    }

    #[test]
    fn scale_equivariance(m in sym_matrix_strategy(0.01), c in 1e-3f64..1e3, iters in 1usize..25) {
        // eps_sk tiny: runs stop early only when the residual is exactly zero
        let cfg = SkConfig { c_sk: 0.0, eps_sk: 1e-300, max_iter: iters, ..SkConfig::default() };
        let base = approx_sym_sk(&affinity(m.clone()), &cfg).unwrap();
        let scaled = approx_sym_sk(&affinity(m.scaled(c)), &cfg).unwrap();
        prop_assert!(base.iterations.abs_diff(scaled.iterations) <= 1 || base.final_residual() == 0.0 || scaled.final_residual() == 0.0);
        for (x, y) in base.eta.iter().zip(&scaled.eta) {
            prop_assert!((y * c.sqrt() - x).abs() <= 1e-12 * x, "{} vs {}", x, y * c.sqrt());
        }
        for (x, y) in base.residual_history.iter().zip(&scaled.residual_history) {
            prop_assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()), "{} vs {}", x, y);
        }
    }

    #[test]
    fn permutation_equivariance(m in sym_matrix_strategy(0.0), seed in any::<u64>()) {
        let n = m.nrows();
        let mut rng = SeededRng::new(seed);
        let mut perm: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = ((rng.uniform() * (i + 1) as f64) as usize).min(i);
            perm.swap(i, j);
        }
        let cfg = SkConfig { c_sk: 0.0, eps_sk: 1e-10, max_iter: 200, ..SkConfig::default() };
        let a = approx_sym_sk(&affinity(m.clone()), &cfg).unwrap();
        let b = approx_sym_sk(&affinity(m.permuted(&perm)), &cfg).unwrap();
        for (i, &p) in perm.iter().enumerate() {
            prop_assert!((b.eta[i] - a.eta[p]).abs() <= 1e-9 * a.eta[p]);
        }
    }

    #[test]
    fn converged_means_small_residual(m in sym_matrix_strategy(0.0), eps_sk in 1e-8f64..1e-1, c_sk in 0.0f64..0.5) {
        let a = affinity(m);
        let cfg = SkConfig { c_sk, eps_sk, max_iter: 50, ..SkConfig::default() };
        let r = approx_sym_sk(&a, &cfg).unwrap();
        prop_assert_eq!(r.residual_history.len(), r.iterations);
        prop_assert!(r.eta.iter().all(|&e| e > 0.0 && (c_sk == 0.0 || e >= c_sk)));
        if r.converged {
            let res = scaling_residual(&a, &r.eta).unwrap();
            prop_assert!(res.iter().all(|e| e.abs() < eps_sk));
        }
        prop_assert_eq!(r.converged, r.final_residual() < eps_sk);
    }
}

/// Damped fixed point `eta <- sqrt(eta / (A eta))`, the geometric mean of
/// `eta` and the plain Sinkhorn map, run for a fixed number of sweeps.
pub fn brute_force_scaling(a: &Matrix, sweeps: usize) -> Vec<f64> {
    let n = a.nrows();
    let mut eta = vec![1.0; n];
    for _ in 0..sweeps {
        let ae = a.matvec(&eta);
        eta = eta.iter().zip(&ae).map(|(e, s)| (e / s).sqrt()).collect();
    }
    eta
}

#[test]
fn matches_brute_force_oracle_on_small_matrices() {
    let mut rng = SeededRng::new(2024);
    let cfg = SkConfig { c_sk: 0.0, eps_sk: 1e-12, max_iter: 10_000, ..SkConfig::default() };
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let n = if case % 2 == 0 { 4 } else { 8 };
        let entries: Vec<f64> = (0..n * (n + 1) / 2).map(|_| rng.uniform()).collect();
        let m = sym_positive(n, &entries, 0.05);
        let fast = approx_sym_sk(&affinity(m.clone()), &cfg).unwrap();
        assert!(fast.converged, "case {case} did not converge");
        let slow = brute_force_scaling(&m, 100_000);
        for (x, y) in fast.eta.iter().zip(&slow) {
            worst = worst.max((x - y).abs() / y);
        }
    }
    assert!(worst < 1e-8, "worst relative gap {worst}");
}
