use std::path::Path;

use crate::error::{Error, Result};
use crate::market::RegimeModel;

/// Returns with a regime label per observation.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledReturns {
    pub assets: Vec<String>,
    pub returns: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
}

/// Column holding regime labels in a returns table.
pub const LABEL_COLUMN: &str = "regime";

/// Reads a CSV with one column per asset and an integer `regime` column.
pub fn read_labeled_returns(path: impl AsRef<Path>) -> Result<LabeledReturns> {
    let path = path.as_ref();
    let table_err = |line: usize, reason: String| Error::Table { path: path.to_path_buf(), line, reason };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => table_err(1, format!("{other:?}")),
        })?;
    let headers = reader.headers().map_err(|e| table_err(1, e.to_string()))?.clone();
    let label_col = headers
        .iter()
        .position(|h| h == LABEL_COLUMN)
        .ok_or_else(|| table_err(1, format!("no `{LABEL_COLUMN}` column")))?;
    let assets: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != label_col)
        .map(|(_, h)| h.to_string())
        .collect();
    let mut out = LabeledReturns { assets, returns: Vec::new(), labels: Vec::new() };
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            table_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let mut row = Vec::with_capacity(out.assets.len());
        for (i, field) in record.iter().enumerate() {
            if i == label_col {
                let k = field.parse::<usize>().map_err(|_| table_err(line, format!("label `{field}` is not a regime index")))?;
                out.labels.push(k);
            } else {
                let v = field.parse::<f64>().map_err(|_| table_err(line, format!("`{field}` is not a number")))?;
                row.push(v);
            }
        }
        out.returns.push(row);
    }
    Ok(out)
}

/// Per-label sample moments and row-normalized label transition counts. A
/// regime never left in the data keeps all its mass on itself.
pub fn estimate_labeled(returns: &[Vec<f64>], labels: &[usize], n_regimes: usize, rf: Vec<f64>) -> Result<RegimeModel> {
    estimate_segments(&[(returns, labels)], n_regimes, rf)
}

/// Like `estimate_labeled` over several disjoint histories. No transition is
/// counted across a segment boundary.
pub fn estimate_segments(segments: &[(&[Vec<f64>], &[usize])], n_regimes: usize, rf: Vec<f64>) -> Result<RegimeModel> {
    if let Some(i) = segments.iter().position(|(r, l)| r.len() != l.len()) {
        let (r, l) = segments[i];
        return Err(Error::invalid("labels", format!("{} labels for {} observations in segment {i}", l.len(), r.len())));
    }
    let returns: Vec<Vec<f64>> = segments.iter().flat_map(|(r, _)| r.iter().cloned()).collect();
    let labels: Vec<usize> = segments.iter().flat_map(|(_, l)| l.iter().copied()).collect();
    let n = returns.first().map_or(0, |r| r.len());
    if n == 0 {
        return Err(Error::invalid("returns", "no observations"));
    }
    if let Some(i) = returns.iter().position(|r| r.len() != n) {
        return Err(Error::invalid(format!("returns[{i}]"), format!("has {} columns, expected {n}", returns[i].len())));
    }
    if let Some(i) = labels.iter().position(|k| *k >= n_regimes) {
        return Err(Error::invalid(format!("labels[{i}]"), format!("label {} outside 0..{n_regimes}", labels[i])));
    }
    let mut mu = vec![vec![0.0; n]; n_regimes];
    let mut cov = vec![vec![vec![0.0; n]; n]; n_regimes];
    for k in 0..n_regimes {
        let rows: Vec<&Vec<f64>> = returns.iter().zip(&labels).filter(|(_, l)| **l == k).map(|(r, _)| r).collect();
        if rows.len() < n + 2 {
            return Err(Error::invalid(
                format!("regime {k}"),
                format!("{} observations, at least {} needed", rows.len(), n + 2),
            ));
        }
        let m = rows.len() as f64;
        for r in &rows {
            for i in 0..n {
                mu[k][i] += r[i] / m;
            }
        }
        for r in &rows {
            for i in 0..n {
                for j in 0..n {
                    cov[k][i][j] += (r[i] - mu[k][i]) * (r[j] - mu[k][j]) / (m - 1.0);
                }
            }
        }
    }
    let mut trans = vec![vec![0.0; n_regimes]; n_regimes];
    for (_, seg) in segments {
        for w in seg.windows(2) {
            trans[w[0]][w[1]] += 1.0;
        }
    }
    for (k, row) in trans.iter_mut().enumerate() {
        let total: f64 = row.iter().sum();
        if total == 0.0 {
            row[k] = 1.0;
        } else {
            row.iter_mut().for_each(|p| *p /= total);
        }
    }
    RegimeModel::new(mu, cov, trans, rf)
}
