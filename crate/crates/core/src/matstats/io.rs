//! Text formats for operators.
//!
//! Spectrum files hold one eigenvalue per line. Dense matrices are CSV with one
//! row per line. In both formats blank lines are skipped and `#` starts a
//! comment that runs to the end of the line.

use nalgebra::DMatrix;

use super::Spectrum;
use crate::error::{Error, Result};

fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().filter_map(|(i, line)| {
        let body = line.split('#').next().unwrap_or("").trim();
        (!body.is_empty()).then_some((i + 1, body))
    })
}

fn parse_number(token: &str, line: usize) -> Result<f64> {
    let value: f64 = token.trim().parse().map_err(|_| {
        Error::Validation(format!("line {line}: cannot parse {token:?} as a number"))
    })?;
    if !value.is_finite() {
        return Err(Error::Validation(format!(
            "line {line}: non-finite value {token:?}"
        )));
    }
    Ok(value)
}

/// Eigenvalue list, in file order.
pub fn parse_eigenvalues(text: &str) -> Result<Vec<f64>> {
    content_lines(text)
        .map(|(line, body)| parse_number(body, line))
        .collect()
}

pub fn parse_spectrum(text: &str) -> Result<Spectrum> {
    Spectrum::new(parse_eigenvalues(text)?)
}

pub fn parse_dense_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, body) in content_lines(text) {
        let row = body
            .split(',')
            .map(|tok| parse_number(tok, line))
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::Validation(format!(
                    "line {line}: expected {} columns, found {}",
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Validation("matrix file has no rows".into()));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

/// True if the text looks like a CSV matrix rather than an eigenvalue list.
pub fn looks_like_csv(text: &str) -> bool {
    content_lines(text).any(|(_, body)| body.contains(','))
}

/// Parses either format; a CSV matrix is eigendecomposed.
pub fn parse_operator(text: &str) -> Result<Spectrum> {
    if looks_like_csv(text) {
        Spectrum::from_dense(&parse_dense_csv(text)?)
    } else {
        parse_spectrum(text)
    }
}

/// Parses either format into a dense matrix; an eigenvalue list becomes the
/// diagonal matrix with entries in file order.
pub fn parse_operator_dense(text: &str) -> Result<DMatrix<f64>> {
    if looks_like_csv(text) {
        parse_dense_csv(text)
    } else {
        let values = parse_eigenvalues(text)?;
        if values.is_empty() {
            return Err(Error::Validation("spectrum is empty".into()));
        }
        Ok(super::diag_matrix(&values))
    }
}

pub fn format_spectrum(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:e}\n")).collect()
}
