//! Two-dimensional eigenspace alignment: fit `s V Q ~ R` over orthogonal
//! 2x2 `Q` (rotations and reflections) and a scalar `s`.

use crate::error::{domain, Result};
use crate::matrix::Matrix;

const GRID_ANGLES: usize = 3600;
const RANK_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct AlignmentResult {
    /// `||s V Q - R||_F^2 / (2 n)`.
    pub mse: f64,
    pub scale: f64,
    pub rotation: [[f64; 2]; 2],
}

fn rotation(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, -s], [s, c]]
}

fn reflection(theta: f64) -> [[f64; 2]; 2] {
    let (s, c) = theta.sin_cos();
    [[c, s], [s, -c]]
}

fn trace_qt_m(q: &[[f64; 2]; 2], m: &[[f64; 2]; 2]) -> f64 {
    (0..2).map(|i| (0..2).map(|j| q[j][i] * m[j][i]).sum::<f64>()).sum()
}

fn residual_mse(v: &Matrix, r: &Matrix, s: f64, q: &[[f64; 2]; 2]) -> f64 {
    let n = v.nrows();
    let mut total = 0.0;
    for i in 0..n {
        let (a, b) = (v[(i, 0)], v[(i, 1)]);
        for c in 0..2 {
            let fitted = s * (a * q[0][c] + b * q[1][c]);
            total += (fitted - r[(i, c)]).powi(2);
        }
    }
    total / (2 * n) as f64
}

/// Optimal alignment of `v` onto `r`, both `n x 2`.
pub fn align_pair(v: &Matrix, r: &Matrix) -> Result<AlignmentResult> {
    let n = v.nrows();
    if v.ncols() != 2 || r.ncols() != 2 || r.nrows() != n {
        return domain("alignment needs two n x 2 matrices");
    }
    if n < 2 {
        return domain("alignment needs at least two rows");
    }
    if r.max_abs() == 0.0 {
        return domain("reference block is zero");
    }
    let v_norm2: f64 = v.as_slice().iter().map(|x| x * x).sum();
    // M = V^T R
    let mut m = [[0.0; 2]; 2];
    for i in 0..n {
        for a in 0..2 {
            for b in 0..2 {
                m[a][b] += v[(i, a)] * r[(i, b)];
            }
        }
    }
    // best trace over rotations and over reflections; their sum and
    // difference are twice the singular values of M
    let rot_best = (m[0][0] + m[1][1]).hypot(m[1][0] - m[0][1]);
    let refl_best = (m[0][0] - m[1][1]).hypot(m[0][1] + m[1][0]);
    let sigma_max = 0.5 * (rot_best + refl_best);
    let sigma_min = 0.5 * (rot_best - refl_best).abs();

    let q = if v_norm2 > 0.0 && sigma_min > RANK_TOL * sigma_max {
        if rot_best >= refl_best {
            rotation((m[1][0] - m[0][1]).atan2(m[0][0] + m[1][1]))
        } else {
            reflection((m[0][1] + m[1][0]).atan2(m[0][0] - m[1][1]))
        }
    } else {
        grid_search(&m)
    };
    let scale = if v_norm2 > 0.0 { trace_qt_m(&q, &m) / v_norm2 } else { 0.0 };
    Ok(AlignmentResult {
        mse: residual_mse(v, r, scale, &q),
        scale,
        rotation: q,
    })
}

/// Rank-deficient `V^T R`: scan angles for both orientation classes.
fn grid_search(m: &[[f64; 2]; 2]) -> [[f64; 2]; 2] {
    let mut best = (f64::NEG_INFINITY, rotation(0.0));
    for k in 0..GRID_ANGLES {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / GRID_ANGLES as f64;
        for q in [rotation(theta), reflection(theta)] {
            let t = trace_qt_m(&q, m);
            if t > best.0 {
                best = (t, q);
            }
        }
    }
    best.1
}
