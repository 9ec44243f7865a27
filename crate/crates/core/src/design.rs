//! Coefficient matrix `A` and its coherence.
//!
//! Columns are always normalized to unit Euclidean norm. The partial DFT
//! matrix keeps `M` distinct rows of the `N`-point DFT `[F]_{rn} = e^{i2πrn/N}`
//! scaled by `1/√M`; row 0 is selectable.

use std::f64::consts::PI;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixKind {
    Identity,
    PartialDft,
    Custom,
}

impl MatrixKind {
    pub fn as_str(self) -> &'static str {
        match self {
            MatrixKind::Identity => "identity",
            MatrixKind::PartialDft => "partial-dft",
            MatrixKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMatrix {
    a: DMatrix<C64>,
    kind: MatrixKind,
    rows: Option<Vec<usize>>,
}

impl MeasurementMatrix {
    /// Number of correlators `M`.
    pub fn correlators(&self) -> usize {
        self.a.nrows()
    }

    /// Number of users `N`.
    pub fn users(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.a
    }

    pub fn kind(&self) -> MatrixKind {
        self.kind
    }

    /// DFT row indices, for partial DFT matrices.
    pub fn rows(&self) -> Option<&[usize]> {
        self.rows.as_deref()
    }

    pub fn is_identity(&self) -> bool {
        self.kind == MatrixKind::Identity
            || (self.a.is_square() && self.a == DMatrix::identity(self.a.nrows(), self.a.ncols()))
    }
}

fn twiddles(n: usize) -> Vec<C64> {
    (0..n)
        .map(|k| C64::from_polar(1.0, 2.0 * PI * k as f64 / n as f64))
        .collect()
}

/// Random partial DFT with `m` distinct rows drawn uniformly from `0..n`.
pub fn partial_dft<R: Rng + ?Sized>(n: usize, m: usize, rng: &mut R) -> Result<MeasurementMatrix> {
    if n == 0 || m == 0 || m > n {
        return Err(Error::InvalidDimensions(format!("partial DFT needs 1 <= M <= N, got N={n}, M={m}")));
    }
    let mut rows = rand::seq::index::sample(rng, n, m).into_vec();
    rows.sort_unstable();
    partial_dft_from_rows(n, rows)
}

/// Partial DFT built from an explicit list of distinct row indices.
pub fn partial_dft_from_rows(n: usize, rows: Vec<usize>) -> Result<MeasurementMatrix> {
    let m = rows.len();
    if n == 0 || m == 0 || m > n {
        return Err(Error::InvalidDimensions(format!("partial DFT needs 1 <= M <= N, got N={n}, M={m}")));
    }
    let mut seen = vec![false; n];
    for &r in &rows {
        if r >= n || std::mem::replace(&mut seen[r], true) {
            return Err(Error::InvalidDimensions(format!("row index {r} out of range or repeated")));
        }
    }
    let table = twiddles(n);
    let scale = 1.0 / (m as f64).sqrt();
    let a = DMatrix::from_fn(m, n, |i, col| table[(rows[i] * col) % n] * scale);
    Ok(MeasurementMatrix { a, kind: MatrixKind::PartialDft, rows: Some(rows) })
}

pub fn identity_matrix(n: usize) -> MeasurementMatrix {
    MeasurementMatrix {
        a: DMatrix::identity(n, n),
        kind: MatrixKind::Identity,
        rows: None,
    }
}

/// Accepts an arbitrary `M x N` matrix and rescales its columns to unit norm.
pub fn custom(mut a: DMatrix<C64>) -> Result<MeasurementMatrix> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Err(Error::InvalidDimensions("empty coefficient matrix".into()));
    }
    for (n, mut col) in a.column_iter_mut().enumerate() {
        let norm = col.norm();
        if !(norm > 0.0 && norm.is_finite()) {
            return Err(Error::InvalidDimensions(format!("column {n} has norm {norm}")));
        }
        if (norm - 1.0).abs() > 1e-6 {
            warn!("rescaling column {n} of custom A by 1/{norm}");
        }
        col /= C64::new(norm, 0.0);
    }
    Ok(MeasurementMatrix { a, kind: MatrixKind::Custom, rows: None })
}

/// Reads a custom `A` from CSV: `2M` rows of `N` values, the real block
/// followed by the imaginary block.
pub fn read_custom_csv(path: &Path) -> Result<MeasurementMatrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let row = record
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| Error::MatrixFile(format!("{}: bad value {s:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() || !rows.len().is_multiple_of(2) {
        return Err(Error::MatrixFile(format!(
            "{}: expected an even, nonzero number of rows, got {}",
            path.display(),
            rows.len()
        )));
    }
    let n = rows[0].len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(Error::MatrixFile(format!("{}: ragged rows", path.display())));
    }
    let m = rows.len() / 2;
    let a = DMatrix::from_fn(m, n, |i, j| C64::new(rows[i][j], rows[m + i][j]));
    custom(a)
}

pub fn write_custom_csv(path: &Path, a: &MeasurementMatrix) -> Result<()> {
    let mut writer = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for part in [|c: &C64| c.re, |c: &C64| c.im] {
        for row in a.matrix().row_iter() {
            writer.write_record(row.iter().map(|c| part(c).to_string()))?;
        }
    }
    writer.flush().map_err(|source| Error::Io { path: path.to_owned(), source })?;
    Ok(())
}

/// `μ = max_{n≠l} |a_nᴴ a_l|`.
///
/// For partial DFT matrices `a_nᴴ a_l` depends only on `(l - n) mod N`, so the
/// maximum is taken over `N - 1` lags instead of all pairs.
pub fn coherence(a: &MeasurementMatrix) -> f64 {
    match (a.kind, a.rows()) {
        (MatrixKind::Identity, _) => 0.0,
        (MatrixKind::PartialDft, Some(rows)) => partial_dft_coherence(a.users(), rows),
        _ => pairwise_coherence(a.matrix()),
    }
}

fn partial_dft_coherence(n: usize, rows: &[usize]) -> f64 {
    let table = twiddles(n);
    let m = rows.len() as f64;
    (1..n)
        .map(|lag| {
            let s: C64 = rows.iter().map(|&r| table[(r * lag) % n]).sum();
            s.norm() / m
        })
        .fold(0.0, f64::max)
}

fn pairwise_coherence(a: &DMatrix<C64>) -> f64 {
    let n = a.ncols();
    let mut mu = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            mu = mu.max(a.column(i).dotc(&a.column(j)).norm());
        }
    }
    mu
}

/// `max_n a_nᴴ A Aᴴ a_n = max_n ‖Aᴴ a_n‖²`.
pub fn max_column_energy(a: &MeasurementMatrix) -> f64 {
    match a.kind {
        MatrixKind::Identity => 1.0,
        _ => {
            let gram = a.matrix().adjoint() * a.matrix();
            gram.column_iter().map(|c| c.norm_squared()).fold(0.0, f64::max)
        }
    }
}

/// Welch lower bound `sqrt((N - M) / (M (N - 1)))` on the coherence of any
/// `M x N` unit-norm frame.
pub fn welch_bound(n: usize, m: usize) -> f64 {
    if n <= 1 || m >= n {
        return 0.0;
    }
    ((n - m) as f64 / (m as f64 * (n - 1) as f64)).sqrt()
}
