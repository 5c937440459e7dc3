//! CSV and JSON emission. Floats are written with 17 significant digits,
//! which round-trips every `f64` exactly.

use std::io::{BufRead, Write};

use crate::error::{Error, Result};
use crate::experiments::{EmbeddingReport, SweepRecord};
use crate::laplacian::EigenPairs;
use crate::manifold::{embed_ambient, Dataset, DensitySpec};
use crate::matrix::Matrix;

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(fmt_f64).collect::<Vec<_>>().join(",")
}

fn parse_f64(s: &str, line: usize) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Parse(format!("line {line}: cannot parse `{s}` as a number")))
}

/// `t,x1..xm,outlier` with the observed (noisy if present) coordinates.
pub fn write_dataset_csv<W: Write>(ds: &Dataset, mut w: W) -> Result<()> {
    let m = ds.ambient_dim();
    let header: Vec<String> = std::iter::once("t".to_string())
        .chain((1..=m).map(|k| format!("x{k}")))
        .chain(std::iter::once("outlier".to_string()))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    let pts = ds.observed();
    for i in 0..ds.n() {
        let flag = ds.outlier_flags.as_ref().is_some_and(|f| f[i]);
        writeln!(w, "{},{},{}", fmt_f64(ds.t[i]), join(pts.row(i).iter().copied()), u8::from(flag))?;
    }
    Ok(())
}

/// Reads a dataset CSV. Clean coordinates of outlier rows are recomputed from
/// `t` and `spec`; inlier rows are taken as written.
pub fn read_dataset_csv<R: BufRead>(r: R, spec: DensitySpec) -> Result<Dataset> {
    let mut lines = r.lines().enumerate();
    let (_, header) = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let header = header?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.len() < 3 || cols[0] != "t" || cols[cols.len() - 1] != "outlier" {
        return Err(Error::Parse(format!("unexpected dataset header `{header}`")));
    }
    let m = cols.len() - 2;
    let (mut t, mut rows, mut flags) = (Vec::new(), Vec::new(), Vec::new());
    for (no, line) in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != m + 2 {
            return Err(Error::Parse(format!("line {}: expected {} fields", no + 1, m + 2)));
        }
        t.push(parse_f64(fields[0], no + 1)?);
        rows.push(fields[1..=m].iter().map(|s| parse_f64(s, no + 1)).collect::<Result<Vec<_>>>()?);
        flags.push(match fields[m + 1].trim() {
            "0" => false,
            "1" => true,
            other => return Err(Error::Parse(format!("line {}: bad outlier flag `{other}`", no + 1))),
        });
    }
    let observed = Matrix::from_rows(&rows);
    let mut clean = observed.clone();
    for (i, &flag) in flags.iter().enumerate() {
        if flag {
            let p = Matrix::from_rows(&[spec.point(t[i])?]);
            clean.row_mut(i).copy_from_slice(embed_ambient(&p, m)?.row(0));
        }
    }
    let noisy = flags.iter().any(|&b| b);
    Ok(Dataset {
        spec,
        seed: 0,
        t,
        clean_points: clean,
        noisy_points: noisy.then_some(observed),
        outlier_flags: noisy.then_some(flags),
    })
}

/// Row-major matrix dump without header.
pub fn write_matrix_csv<W: Write>(m: &Matrix, mut w: W) -> Result<()> {
    for row in m.rows_iter() {
        writeln!(w, "{}", join(row.iter().copied()))?;
    }
    Ok(())
}

pub fn read_matrix_csv<R: BufRead>(r: R) -> Result<Matrix> {
    let mut rows = Vec::new();
    for (no, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        rows.push(line.split(',').map(|s| parse_f64(s, no + 1)).collect::<Result<Vec<_>>>()?);
    }
    if rows.is_empty() || rows.iter().any(|r| r.len() != rows[0].len()) {
        return Err(Error::Parse("matrix file is empty or ragged".into()));
    }
    Ok(Matrix::from_rows(&rows))
}

/// `iter,residual_inf`.
pub fn write_residuals_csv<W: Write>(history: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "iter,residual_inf")?;
    for (k, r) in history.iter().enumerate() {
        writeln!(w, "{},{}", k + 1, fmt_f64(*r))?;
    }
    Ok(())
}

/// `mode,eigenvalue,v1..vn`, one row per mode.
pub fn write_eigenpairs_csv<W: Write>(e: &EigenPairs, mut w: W) -> Result<()> {
    let n = e.vectors.nrows();
    let header: Vec<String> = ["mode".to_string(), "eigenvalue".to_string()]
        .into_iter()
        .chain((1..=n).map(|i| format!("v{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (k, &lambda) in e.values.iter().enumerate() {
        writeln!(w, "{},{},{}", k + 1, fmt_f64(lambda), join(e.vector(k)))?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(records: &[SweepRecord], mut w: W) -> Result<()> {
    writeln!(w, "epsilon,relerr2_mean,relerr2_std,relerrinf_mean,relerrinf_std,mean_sk_iters,replicas")?;
    for r in records {
        writeln!(
            w,
            "{},{},{}",
            join([r.epsilon, r.relerr2_mean, r.relerr2_std, r.relerrinf_mean, r.relerrinf_std]),
            fmt_f64(r.mean_sk_iters),
            r.replicas
        )?;
    }
    Ok(())
}

pub fn write_embedding_csv<W: Write>(report: &EmbeddingReport, mut w: W) -> Result<()> {
    writeln!(w, "method,pair,mse_mean,mse_std,replicas")?;
    for r in &report.rows {
        writeln!(
            w,
            "{},{},{},{},{}",
            r.method.name(),
            r.pair,
            fmt_f64(r.mse_mean),
            fmt_f64(r.mse_std),
            r.replicas
        )?;
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct SlopeReport {
    pub branch: String,
    pub slope: f64,
}

pub fn write_slopes_json<W: Write>(slopes: &[SlopeReport], mut w: W) -> Result<()> {
    let text = serde_json::to_string_pretty(slopes).map_err(|e| Error::Parse(e.to_string()))?;
    writeln!(w, "{text}")?;
    Ok(())
}
