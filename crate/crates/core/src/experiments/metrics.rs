use std::ops::Range;

use crate::error::{domain, Result};
use crate::matrix::{norm2, norm_inf};

/// Relative 2-norm and infinity-norm discrepancy of `estimate` from `reference`.
pub fn rel_errors(estimate: &[f64], reference: &[f64]) -> Result<(f64, f64)> {
    if estimate.len() != reference.len() {
        return domain(format!("length mismatch: {} vs {}", estimate.len(), reference.len()));
    }
    let (r2, rinf) = (norm2(reference), norm_inf(reference));
    if !(r2 > 0.0) {
        return domain("reference vector has zero norm");
    }
    let diff: Vec<f64> = estimate.iter().zip(reference).map(|(a, b)| a - b).collect();
    Ok((norm2(&diff) / r2, norm_inf(&diff) / rinf))
}

/// Ordinary least-squares slope of `y` against `x` over `range`.
pub fn slope_fit(x: &[f64], y: &[f64], range: Range<usize>) -> Result<f64> {
    if x.len() != y.len() {
        return domain(format!("length mismatch: {} vs {}", x.len(), y.len()));
    }
    if range.end > x.len() || range.len() < 2 {
        return domain(format!("slope range {range:?} needs at least two points within {}", x.len()));
    }
    let (xs, ys) = (&x[range.clone()], &y[range]);
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|v| (v - mx).powi(2)).sum();
    if !(sxx > 0.0) {
        return domain("slope range has no spread in x");
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - mx) * (b - my)).sum();
    Ok(sxy / sxx)
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let k = values.len() as f64;
    let mean = values.iter().sum::<f64>() / k;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / k;
    (mean, var.sqrt())
}
