//! CSV persistence. Joint batches use the header
//! `theta_0,...,theta_{d-1},x_0,...,x_{e-1}`; generic matrices use
//! `{prefix}_0,...`. Values are written in shortest round-trip form, so a
//! write/read cycle is bitwise exact.

use std::path::Path;

use super::JointBatch;
use crate::{Error, Matrix, Result};

pub fn write_matrix_csv(path: &Path, m: &Matrix, prefix: &str) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record((0..m.cols()).map(|j| format!("{prefix}_{j}")))?;
    for row in m.row_iter().take(m.rows()) {
        w.write_record(row.iter().map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_records(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(|s| s.trim().to_string()).collect();
    let mut rows = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Format(format!("{}: row {}: bad number {s:?}", path.display(), i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        if row.len() != header.len() {
            return Err(Error::Format(format!("{}: row {} has {} fields", path.display(), i + 1, row.len())));
        }
        rows.push(row);
    }
    Ok((header, rows))
}

pub fn read_matrix_csv(path: &Path) -> Result<Matrix> {
    let (header, rows) = parse_records(path)?;
    let mut m = Matrix::from_rows(&rows)?;
    if rows.is_empty() {
        m = Matrix::zeros(0, header.len());
    }
    Ok(m)
}

pub fn write_joint_csv(path: &Path, batch: &JointBatch) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let header: Vec<String> = (0..batch.theta.cols())
        .map(|j| format!("theta_{j}"))
        .chain((0..batch.x.cols()).map(|j| format!("x_{j}")))
        .collect();
    w.write_record(&header)?;
    for i in 0..batch.len() {
        w.write_record(batch.theta.row(i).iter().chain(batch.x.row(i)).map(|v| v.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_joint_csv(path: &Path) -> Result<JointBatch> {
    let (header, rows) = parse_records(path)?;
    let dt = header.iter().take_while(|h| h.starts_with("theta_")).count();
    if dt == 0 || !header[dt..].iter().all(|h| h.starts_with("x_")) || header.len() == dt {
        return Err(Error::Format(format!(
            "{}: expected columns theta_0.. followed by x_0..",
            path.display()
        )));
    }
    let dx = header.len() - dt;
    let mut theta = Matrix::zeros(rows.len(), dt);
    let mut x = Matrix::zeros(rows.len(), dx);
    for (i, r) in rows.iter().enumerate() {
        theta.row_mut(i).copy_from_slice(&r[..dt]);
        x.row_mut(i).copy_from_slice(&r[dt..]);
    }
    Ok(JointBatch { theta, x })
}
