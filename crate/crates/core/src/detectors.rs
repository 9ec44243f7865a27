//! Digital detectors operating on the front-end output `y`.
//!
//! All statistics use `Re[a_nᴴ v]`; the imaginary part carries only noise and
//! interference. Top-K and argmax selections break ties toward the lowest
//! index, and `sgn(0)` is taken as `+1`.

use nalgebra::{Cholesky, DMatrix, DVector};
use serde::Deserialize;

use crate::design::{MatrixKind, MeasurementMatrix};
use crate::model::{Scenario, TransmitState};
use crate::{Error, Result, C64};

/// Default cap on `C(N, K) 2^K` for the exhaustive ML search.
pub const DEFAULT_ML_BUDGET: u64 = 1_000_000;

/// Relative pivot floor below which a Hermitian system is treated as singular.
const SINGULAR_PIVOT_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceStep {
    pub index: usize,
    pub statistic: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionResult {
    /// Detected active set, ascending.
    pub support: Vec<usize>,
    /// Detected symbols, nonzero exactly on `support`.
    pub symbols: Vec<i8>,
    /// Selection order and statistic per iteration (RDDF only).
    pub trace: Vec<TraceStep>,
}

impl DetectionResult {
    fn from_decisions(n: usize, mut decisions: Vec<(usize, i8)>, trace: Vec<TraceStep>) -> Self {
        decisions.sort_unstable_by_key(|&(i, _)| i);
        let mut symbols = vec![0i8; n];
        for &(i, b) in &decisions {
            symbols[i] = b;
        }
        DetectionResult {
            support: decisions.into_iter().map(|(i, _)| i).collect(),
            symbols,
            trace,
        }
    }

    /// Block error: wrong active set or any wrong symbol.
    pub fn is_block_error(&self, truth: &TransmitState) -> bool {
        self.support != truth.support() || self.symbols != truth.symbols()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorKind {
    Rdd,
    Rddf,
    RdMmse,
    Ml,
    Decorrelator,
}

impl DetectorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DetectorKind::Rdd => "rdd",
            DetectorKind::Rddf => "rddf",
            DetectorKind::RdMmse => "rd-mmse",
            DetectorKind::Ml => "ml",
            DetectorKind::Decorrelator => "decorrelator",
        }
    }
}

impl std::fmt::Display for DetectorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for DetectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "rdd" => DetectorKind::Rdd,
            "rddf" => DetectorKind::Rddf,
            "rd-mmse" => DetectorKind::RdMmse,
            "ml" => DetectorKind::Ml,
            "decorrelator" => DetectorKind::Decorrelator,
            other => return Err(Error::InvalidConfig(format!("unknown detector {other:?}"))),
        })
    }
}

/// Which support estimate feeds RD-MMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SupportRule {
    #[default]
    Rdd,
    Rddf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectorOptions {
    pub mmse_support: SupportRule,
    pub ml_budget: u64,
}

impl Default for DetectorOptions {
    fn default() -> Self {
        DetectorOptions { mmse_support: SupportRule::Rdd, ml_budget: DEFAULT_ML_BUDGET }
    }
}

pub fn detect(kind: DetectorKind, scn: &Scenario, y: &DVector<C64>, opts: &DetectorOptions) -> Result<DetectionResult> {
    match kind {
        DetectorKind::Rdd => rdd_detect(scn, y),
        DetectorKind::Rddf => rddf_detect(scn, y),
        DetectorKind::RdMmse => {
            let support = match opts.mmse_support {
                SupportRule::Rdd => rdd_detect(scn, y)?.support,
                SupportRule::Rddf => rddf_detect(scn, y)?.support,
            };
            rd_mmse_detect(scn, y, &support)
        }
        DetectorKind::Ml => ml_detect(scn, y, opts.ml_budget),
        DetectorKind::Decorrelator => decorrelating_baseline(scn, y),
    }
}

fn sgn(x: f64) -> i8 {
    if x < 0.0 {
        -1
    } else {
        1
    }
}

fn check_output(scn: &Scenario, y: &DVector<C64>) -> Result<()> {
    if y.len() != scn.m() {
        return Err(Error::DimensionMismatch { context: "front-end output", expected: scn.m(), actual: y.len() });
    }
    Ok(())
}

/// `Re[a_nᴴ v]` for every column of `A`.
pub fn correlation_statistics(a: &MeasurementMatrix, v: &DVector<C64>) -> Vec<f64> {
    if a.kind() == MatrixKind::Identity {
        return v.iter().map(|c| c.re).collect();
    }
    a.matrix()
        .column_iter()
        .map(|col| col.iter().zip(v.iter()).map(|(a, v)| a.re * v.re + a.im * v.im).sum())
        .collect()
}

fn argmax_abs(stats: &[f64], excluded: &[bool]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, s) in stats.iter().enumerate() {
        if excluded[i] {
            continue;
        }
        match best {
            Some(b) if stats[b].abs() >= s.abs() => {}
            _ => best = Some(i),
        }
    }
    best
}

/// Reduced-dimension decorrelating detector: the `K` largest `|Re[a_nᴴ y]|`
/// form the active set, symbols are `sgn(r_n Re[a_nᴴ y])`.
pub fn rdd_detect(scn: &Scenario, y: &DVector<C64>) -> Result<DetectionResult> {
    check_output(scn, y)?;
    let stats = correlation_statistics(scn.matrix(), y);
    let mut order: Vec<usize> = (0..stats.len()).collect();
    order.sort_by(|&i, &j| stats[j].abs().total_cmp(&stats[i].abs()).then(i.cmp(&j)));
    let gains = scn.gains();
    let decisions = order[..scn.k()].iter().map(|&i| (i, sgn(gains[i] * stats[i]))).collect();
    Ok(DetectionResult::from_decisions(scn.n(), decisions, Vec::new()))
}

/// Reduced-dimension decision-feedback detector (decision-feedback OMP).
///
/// Each of the `K` iterations picks the unselected column most correlated
/// with the residual, decides its symbol, and subtracts `a_n r_n b_n` from
/// the residual.
pub fn rddf_detect(scn: &Scenario, y: &DVector<C64>) -> Result<DetectionResult> {
    check_output(scn, y)?;
    let a = scn.matrix();
    let gains = scn.gains();
    let mut selected = vec![false; scn.n()];
    let mut residual = y.clone();
    let mut decisions = Vec::with_capacity(scn.k());
    let mut trace = Vec::with_capacity(scn.k());
    for _ in 0..scn.k() {
        let stats = correlation_statistics(a, &residual);
        let idx = argmax_abs(&stats, &selected).expect("K <= N leaves a candidate");
        let b = sgn(gains[idx] * stats[idx]);
        selected[idx] = true;
        decisions.push((idx, b));
        trace.push(TraceStep { index: idx, statistic: stats[idx] });
        let scale = gains[idx] * b as f64;
        for (v, c) in residual.iter_mut().zip(a.matrix().column(idx).iter()) {
            *v -= c * scale;
        }
    }
    Ok(DetectionResult::from_decisions(scn.n(), decisions, trace))
}

fn cholesky_checked(m: DMatrix<C64>, what: &str) -> Result<Cholesky<C64, nalgebra::Dyn>> {
    let chol = Cholesky::new(m).ok_or_else(|| Error::SingularSystem(format!("{what} is not positive definite")))?;
    let diag = chol.l_dirty().diagonal();
    let max = diag.iter().map(|c| c.re).fold(0.0, f64::max);
    let min = diag.iter().map(|c| c.re).fold(f64::INFINITY, f64::min);
    if !(min > 0.0) || (min / max).powi(2) < SINGULAR_PIVOT_RATIO {
        return Err(Error::SingularSystem(format!("{what} is numerically singular")));
    }
    Ok(chol)
}

/// RD-MMSE symbol decisions on a given support:
/// `sgn(Re[R_Î A_Iᴴ (A_Î R_Î² A_Îᴴ + σ² A G⁻¹ Aᴴ)⁻¹ y])`.
pub fn rd_mmse_detect(scn: &Scenario, y: &DVector<C64>, support: &[usize]) -> Result<DetectionResult> {
    check_output(scn, y)?;
    if support.len() != scn.k() {
        return Err(Error::DimensionMismatch { context: "RD-MMSE support", expected: scn.k(), actual: support.len() });
    }
    if let Some(&bad) = support.iter().find(|&&i| i >= scn.n()) {
        return Err(Error::InvalidDimensions(format!("support index {bad} >= N={}", scn.n())));
    }
    let a = scn.matrix().matrix();
    let gains = scn.gains();
    let sigma2 = scn.sigma() * scn.sigma();

    let mut system = scn.noise_covariance() * C64::new(sigma2, 0.0);
    for &i in support {
        let col = a.column(i);
        system += col * col.adjoint() * C64::new(gains[i] * gains[i], 0.0);
    }
    let x = cholesky_checked(system, "RD-MMSE system")?.solve(y);

    let decisions = support
        .iter()
        .map(|&i| {
            let est = a.column(i).dotc(&x) * gains[i];
            (i, sgn(est.re))
        })
        .collect();
    Ok(DetectionResult::from_decisions(scn.n(), decisions, Vec::new()))
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc.saturating_mul((n - i) as u128) / (i as u128 + 1))
}

/// Exhaustive maximum-likelihood detection over all `K`-sparse sign vectors.
///
/// Maximizes `2 Re[yᴴ W A R b] - bᵀ R Aᴴ W A R b` with `W = (A G⁻¹ Aᴴ)⁻¹`.
/// Supports are visited in lexicographic order and sign patterns in binary
/// counting order (`-1` before `+1`); only strict improvements replace the
/// incumbent, so ties resolve to the lexicographically smallest candidate.
pub fn ml_detect(scn: &Scenario, y: &DVector<C64>, budget: u64) -> Result<DetectionResult> {
    check_output(scn, y)?;
    let (n, k) = (scn.n(), scn.k());
    let candidates = binomial(n, k).saturating_mul(1u128 << k.min(127));
    if candidates > budget as u128 {
        return Err(Error::BudgetExceeded { candidates, budget });
    }

    let chol = cholesky_checked(scn.noise_covariance(), "A G⁻¹ Aᴴ")?;
    let gains = scn.gains();
    let mut phi = scn.matrix().matrix().clone();
    for (mut col, &r) in phi.column_iter_mut().zip(gains) {
        col *= C64::new(r, 0.0);
    }
    let w_phi = chol.solve(&phi);
    let linear: Vec<f64> = w_phi.column_iter().map(|c| c.dotc(y).re).collect();
    let quad = (phi.adjoint() * &w_phi).map(|c| c.re);

    let mut support: Vec<usize> = (0..k).collect();
    let mut signs = vec![0.0f64; k];
    let mut best_value = f64::NEG_INFINITY;
    let mut best: Vec<(usize, i8)> = Vec::new();
    loop {
        for pattern in 0u64..(1u64 << k) {
            for (j, s) in signs.iter_mut().enumerate() {
                *s = if pattern >> (k - 1 - j) & 1 == 1 { 1.0 } else { -1.0 };
            }
            let mut value = 0.0;
            for (j, &i) in support.iter().enumerate() {
                value += 2.0 * linear[i] * signs[j];
                for (jj, &ii) in support.iter().enumerate() {
                    value -= quad[(i, ii)] * signs[j] * signs[jj];
                }
            }
            if value > best_value {
                best_value = value;
                best = support.iter().zip(&signs).map(|(&i, &s)| (i, s as i8)).collect();
            }
        }
        if !next_combination(&mut support, n) {
            break;
        }
    }
    Ok(DetectionResult::from_decisions(n, best, Vec::new()))
}

/// Advances `c` to the next `k`-subset of `0..n` in lexicographic order.
fn next_combination(c: &mut [usize], n: usize) -> bool {
    let k = c.len();
    for i in (0..k).rev() {
        if c[i] < n - k + i {
            c[i] += 1;
            for j in i + 1..k {
                c[j] = c[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Conventional decorrelating detector: RDD with `A = I`.
pub fn decorrelating_baseline(scn: &Scenario, y: &DVector<C64>) -> Result<DetectionResult> {
    if !scn.matrix().is_identity() {
        return Err(Error::NotIdentityMatrix);
    }
    rdd_detect(scn, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{coherence, custom, identity_matrix, partial_dft};
    use crate::model::{random_transmit_state, synthesize, synthesize_with_noise};
    use crate::rng::StreamKey;
    use crate::waveforms::GramMatrix;
    use proptest::prelude::*;
    use std::sync::Arc;

    fn scenario(a: MeasurementMatrix, k: usize, gains: Vec<f64>, sigma: f64) -> Scenario {
        let n = a.users();
        Scenario::new(k, Arc::new(GramMatrix::identity(n)), a, gains, sigma).unwrap()
    }

    #[test]
    fn rdd_noiseless_identity() {
        let scn = scenario(identity_matrix(6), 2, vec![1.0; 6], 0.0);
        let state = TransmitState::new(6, &[0, 1], &[1, -1]).unwrap();
        let y = synthesize_with_noise(&scn, &state, DVector::zeros(6)).unwrap().y;
        let det = rdd_detect(&scn, &y).unwrap();
        assert_eq!(det.support, vec![0, 1]);
        assert_eq!(det.symbols, state.symbols());
        assert!(!det.is_block_error(&state));
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let scn = scenario(identity_matrix(4), 2, vec![1.0; 4], 0.0);
        let y = DVector::from_vec(vec![C64::new(0.5, 0.0), C64::new(-1.0, 0.0), C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        assert_eq!(rdd_detect(&scn, &y).unwrap().support, vec![1, 2]);
        assert_eq!(rddf_detect(&scn, &y).unwrap().support, vec![1, 2]);
        let zero = DVector::from_element(4, C64::new(0.0, 0.0));
        let det = rdd_detect(&scn, &zero).unwrap();
        assert_eq!(det.support, vec![0, 1]);
        assert_eq!(det.symbols, vec![1, 1, 0, 0]);
    }

    #[test]
    fn negative_gain_flips_decision() {
        let scn = scenario(identity_matrix(3), 1, vec![-2.0, 1.0, 1.0], 0.0);
        let state = TransmitState::new(3, &[0], &[1]).unwrap();
        let y = synthesize_with_noise(&scn, &state, DVector::zeros(3)).unwrap().y;
        assert_eq!(y[0].re, -2.0);
        assert_eq!(rdd_detect(&scn, &y).unwrap().symbols, vec![1, 0, 0]);
        assert_eq!(rddf_detect(&scn, &y).unwrap().symbols, vec![1, 0, 0]);
    }

    #[test]
    fn rddf_trace_records_selection_order() {
        let scn = scenario(identity_matrix(5), 2, vec![1.0, 1.0, 1.0, 1.0, 3.0], 0.0);
        let state = TransmitState::new(5, &[1, 4], &[-1, 1]).unwrap();
        let y = synthesize_with_noise(&scn, &state, DVector::zeros(5)).unwrap().y;
        let det = rddf_detect(&scn, &y).unwrap();
        assert_eq!(det.trace.iter().map(|t| t.index).collect::<Vec<_>>(), vec![4, 1]);
        assert_eq!(det.trace[0].statistic, 3.0);
        assert_eq!(det.support, vec![1, 4]);
    }

    /// Equal-gain users on near-coherent columns with one frozen noisy output:
    /// RDD picks the inactive column 0, decision feedback recovers user 1.
    /// Found by randomized search over rounded 3x5 real frames.
    #[test]
    fn rddf_cancels_interference_where_rdd_fails() {
        let raw = DMatrix::from_row_slice(
            3,
            5,
            &[
                0.05, 0.39, -0.18, 0.22, 0.23, //
                -0.35, 0.27, -0.16, 0.34, -0.06, //
                -0.31, -0.06, 0.2, -0.41, 0.37,
            ],
        )
        .map(|v| C64::new(v, 0.0));
        let a = custom(raw).unwrap();
        assert!(coherence(&a) > 0.97);
        let scn = scenario(a, 2, vec![1.0; 5], 0.3);
        let y = DVector::from_vec(vec![C64::new(0.81, 0.0), C64::new(-0.01, 0.0), C64::new(1.02, 0.0)]);
        let state = TransmitState::new(5, &[1, 4], &[1, 1]).unwrap();

        let rdd = rdd_detect(&scn, &y).unwrap();
        assert_eq!(rdd.support, vec![0, 4]);
        assert!(rdd.is_block_error(&state));
        let rddf = rddf_detect(&scn, &y).unwrap();
        assert!(!rddf.is_block_error(&state));
        assert_eq!(rddf.trace.iter().map(|t| t.index).collect::<Vec<_>>(), vec![4, 1]);
    }

    #[test]
    fn noiseless_equal_gain_pairs_never_separate_rdd_and_rddf() {
        // both active statistics equal |1 ± ρ|, so a noiseless equal-gain K=2
        // instance defeats RDD only when the top statistic is inactive
        let key = StreamKey::new(2024);
        for t in 0..2000 {
            let mut rng = key.rng(t);
            let raw = DMatrix::from_fn(3, 5, |_, _| C64::new(rand::Rng::random::<f64>(&mut rng) - 0.5, 0.0));
            let scn = scenario(custom(raw).unwrap(), 2, vec![1.0; 5], 0.0);
            let state = random_transmit_state(5, 2, &mut rng).unwrap();
            let y = synthesize_with_noise(&scn, &state, DVector::zeros(5)).unwrap().y;
            assert_eq!(
                rdd_detect(&scn, &y).unwrap().is_block_error(&state),
                rddf_detect(&scn, &y).unwrap().is_block_error(&state)
            );
        }
    }

    #[test]
    fn decorrelator_requires_identity() {
        let mut rng = StreamKey::new(1).rng(0);
        let scn = scenario(partial_dft(8, 4, &mut rng).unwrap(), 2, vec![1.0; 8], 0.1);
        let y = DVector::from_element(4, C64::new(0.0, 0.0));
        assert!(matches!(decorrelating_baseline(&scn, &y), Err(Error::NotIdentityMatrix)));
    }

    #[test]
    fn mmse_small_noise_matches_conventional_decisions() {
        let gains = vec![1.0, -2.0, 0.5, 1.5];
        let scn = scenario(identity_matrix(4), 4, gains.clone(), 1e-6);
        let y = DVector::from_vec(vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.0), C64::new(-0.7, 2.0), C64::new(0.01, 0.0)]);
        let det = rd_mmse_detect(&scn, &y, &[0, 1, 2, 3]).unwrap();
        let expected: Vec<i8> = (0..4).map(|i| sgn(gains[i] * y[i].re)).collect();
        assert_eq!(det.symbols, expected);
    }

    #[test]
    fn mmse_noiseless_overcomplete_is_singular() {
        let mut rng = StreamKey::new(2).rng(0);
        let scn = scenario(partial_dft(8, 4, &mut rng).unwrap(), 2, vec![1.0; 8], 0.0);
        let y = DVector::from_element(4, C64::new(1.0, 0.0));
        assert!(matches!(rd_mmse_detect(&scn, &y, &[0, 1]), Err(Error::SingularSystem(_))));
        assert!(matches!(rd_mmse_detect(&scn, &y, &[0]), Err(Error::DimensionMismatch { .. })));
    }

    /// Independent dense solve: Gaussian elimination with partial pivoting on
    /// the explicitly formed M x M system.
    fn gauss_solve(mut m: Vec<Vec<C64>>, mut rhs: Vec<C64>) -> Vec<C64> {
        let n = rhs.len();
        for col in 0..n {
            let piv = (col..n).max_by(|&a, &b| m[a][col].norm().total_cmp(&m[b][col].norm())).unwrap();
            m.swap(col, piv);
            rhs.swap(col, piv);
            for row in col + 1..n {
                let f = m[row][col] / m[col][col];
                for c in col..n {
                    let v = m[col][c];
                    m[row][c] -= f * v;
                }
                let r = rhs[col];
                rhs[row] -= f * r;
            }
        }
        let mut x = vec![C64::new(0.0, 0.0); n];
        for row in (0..n).rev() {
            let mut acc = rhs[row];
            for c in row + 1..n {
                acc -= m[row][c] * x[c];
            }
            x[row] = acc / m[row][row];
        }
        x
    }

    #[test]
    fn mmse_matches_dense_solve_oracle() {
        let key = StreamKey::new(77);
        for t in 0..50 {
            let mut rng = key.rng(t);
            let a = partial_dft(8, 4, &mut rng).unwrap();
            let gram = Arc::new(GramMatrix::equicorrelated(8, 0.3).unwrap());
            let gains: Vec<f64> = (0..8).map(|_| 0.5 + rand::Rng::random::<f64>(&mut rng)).collect();
            let scn = Scenario::new(2, gram.clone(), a.clone(), gains.clone(), 0.4).unwrap();
            let state = random_transmit_state(8, 2, &mut rng).unwrap();
            let y = synthesize(&scn, &state, &mut rng).unwrap().y;
            let support = rdd_detect(&scn, &y).unwrap().support;
            let det = rd_mmse_detect(&scn, &y, &support).unwrap();

            let am = a.matrix();
            let gi = gram.inverse();
            let mut sys = vec![vec![C64::new(0.0, 0.0); 4]; 4];
            for (p, row) in sys.iter_mut().enumerate() {
                for (q, entry) in row.iter_mut().enumerate() {
                    for i in 0..8 {
                        for j in 0..8 {
                            *entry += am[(p, i)] * gi[(i, j)] * am[(q, j)].conj() * 0.16;
                        }
                    }
                    for &i in &support {
                        *entry += am[(p, i)] * am[(q, i)].conj() * gains[i] * gains[i];
                    }
                }
            }
            let x = gauss_solve(sys, y.iter().copied().collect());
            for &i in &support {
                let mut est = C64::new(0.0, 0.0);
                for p in 0..4 {
                    est += am[(p, i)].conj() * x[p];
                }
                let b = if (est * gains[i]).re < 0.0 { -1 } else { 1 };
                assert_eq!(det.symbols[i], b, "trial {t}");
            }
        }
    }

    #[test]
    fn ml_budget_is_enforced() {
        let scn = scenario(identity_matrix(30), 5, vec![1.0; 30], 0.1);
        let y = DVector::from_element(30, C64::new(0.0, 0.0));
        assert!(matches!(ml_detect(&scn, &y, DEFAULT_ML_BUDGET), Err(Error::BudgetExceeded { .. })));
        assert_eq!(binomial(8, 2), 28);
        assert_eq!(binomial(100, 2), 4950);
    }

    #[test]
    fn ml_noiseless_recovers_truth() {
        let key = StreamKey::new(5);
        for t in 0..50 {
            let mut rng = key.rng(t);
            let scn = scenario(partial_dft(8, 4, &mut rng).unwrap(), 2, vec![1.0; 8], 0.0);
            let state = random_transmit_state(8, 2, &mut rng).unwrap();
            let y = synthesize_with_noise(&scn, &state, DVector::zeros(8)).unwrap().y;
            let det = ml_detect(&scn, &y, DEFAULT_ML_BUDGET).unwrap();
            // partial DFT columns can coincide (e.g. all-even rows), so check
            // that the winner explains y exactly rather than that it is unique
            let diff: Vec<usize> = (0..8).filter(|&i| det.symbols[i] != state.symbols()[i]).collect();
            let mut residual = y.clone();
            for i in 0..8 {
                let b = det.symbols[i] as f64;
                residual -= scn.matrix().matrix().column(i) * C64::new(b, 0.0);
            }
            assert!(residual.norm() < 1e-9, "trial {t}: {diff:?}");
            // unique when no other 2-sparse sign vector also explains y
            let mut exact = 0;
            let mut c = vec![0, 1];
            loop {
                for p in 0..4 {
                    let mut r = y.clone();
                    for (j, &i) in c.iter().enumerate() {
                        let b = if p >> (1 - j) & 1 == 1 { 1.0 } else { -1.0 };
                        r -= scn.matrix().matrix().column(i) * C64::new(b, 0.0);
                    }
                    exact += (r.norm() < 1e-9) as usize;
                }
                if !next_combination(&mut c, 8) {
                    break;
                }
            }
            if exact == 1 {
                assert!(!det.is_block_error(&state), "trial {t}");
            }
        }
    }

    #[test]
    fn combinations_are_lexicographic() {
        let mut c = vec![0, 1];
        let mut all = vec![c.clone()];
        while next_combination(&mut c, 4) {
            all.push(c.clone());
        }
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
    }

    #[test]
    fn detect_dispatch() {
        let scn = scenario(identity_matrix(6), 2, vec![1.0; 6], 0.2);
        let mut rng = StreamKey::new(8).rng(0);
        let state = random_transmit_state(6, 2, &mut rng).unwrap();
        let y = synthesize(&scn, &state, &mut rng).unwrap().y;
        let opts = DetectorOptions::default();
        for kind in [DetectorKind::Rdd, DetectorKind::Rddf, DetectorKind::RdMmse, DetectorKind::Ml, DetectorKind::Decorrelator] {
            let det = detect(kind, &scn, &y, &opts).unwrap();
            assert_eq!(det.support.len(), 2);
            assert_eq!(kind.as_str().parse::<DetectorKind>().unwrap(), kind);
        }
        let wrong = DVector::from_element(5, C64::new(0.0, 0.0));
        assert!(rdd_detect(&scn, &wrong).is_err());
    }

    fn random_case(seed: u64, n: usize, m: usize, k: usize, sigma: f64) -> (Scenario, DVector<C64>) {
        let mut rng = StreamKey::new(seed).rng(0);
        let a = partial_dft(n, m, &mut rng).unwrap();
        let gains: Vec<f64> = (0..n).map(|_| 0.5 + rand::Rng::random::<f64>(&mut rng)).collect();
        let scn = scenario(a, k, gains, sigma);
        let state = random_transmit_state(n, k, &mut rng).unwrap();
        let y = synthesize(&scn, &state, &mut rng).unwrap().y;
        (scn, y)
    }

    proptest! {
        #[test]
        fn outputs_are_well_formed(seed in any::<u64>(), n in 4usize..24, k in 1usize..4, sigma in 0.0f64..2.0) {
            let (scn, y) = random_case(seed, n, n / 2, k, sigma);
            for det in [rdd_detect(&scn, &y).unwrap(), rddf_detect(&scn, &y).unwrap()] {
                prop_assert_eq!(det.support.len(), k);
                prop_assert!(det.support.windows(2).all(|w| w[0] < w[1]));
                for (i, &b) in det.symbols.iter().enumerate() {
                    prop_assert_eq!(b != 0, det.support.contains(&i));
                }
            }
        }

        #[test]
        fn single_user_rdd_equals_rddf(seed in any::<u64>(), n in 2usize..32, sigma in 0.0f64..2.0) {
            let (scn, y) = random_case(seed, n, (n / 3).max(1), 1, sigma);
            let a = rdd_detect(&scn, &y).unwrap();
            let b = rddf_detect(&scn, &y).unwrap();
            prop_assert_eq!(a.support, b.support);
            prop_assert_eq!(a.symbols, b.symbols);
        }

        #[test]
        fn positive_scaling_is_invisible(seed in any::<u64>(), c in 0.01f64..100.0) {
            let (scn, y) = random_case(seed, 16, 8, 3, 0.5);
            let scaled = &y * C64::new(c, 0.0);
            prop_assert_eq!(rdd_detect(&scn, &y).unwrap().symbols, rdd_detect(&scn, &scaled).unwrap().symbols);
            // decision feedback subtracts r_n a_n, so the gains scale with y
            let gains: Vec<f64> = scn.gains().iter().map(|r| r * c).collect();
            let scn_scaled = Scenario::new(scn.k(), scn.gram_arc().clone(), scn.matrix().clone(), gains, 0.5 * c).unwrap();
            prop_assert_eq!(rddf_detect(&scn, &y).unwrap().symbols, rddf_detect(&scn_scaled, &scaled).unwrap().symbols);
        }

        #[test]
        fn noiseless_recovery_under_coherence_condition(seed in any::<u64>(), n in 8usize..48, k in 1usize..4) {
            let mut rng = StreamKey::new(seed).rng(1);
            let a = partial_dft(n, n - n / 8, &mut rng).unwrap();
            let mu = coherence(&a);
            let gains: Vec<f64> = (0..n).map(|_| 1.0 + rand::Rng::random::<f64>(&mut rng)).collect();
            let scn = scenario(a, k, gains, 0.0);
            let state = random_transmit_state(n, k, &mut rng).unwrap();
            let y = synthesize(&scn, &state, &mut rng).unwrap().y;
            let odd = (2 * k - 1) as f64;
            if scn.rmin() > odd * mu * scn.rmax() {
                prop_assert!(!rdd_detect(&scn, &y).unwrap().is_block_error(&state));
            }
            if scn.rmin() > odd * mu * scn.rmin() {
                prop_assert!(!rddf_detect(&scn, &y).unwrap().is_block_error(&state));
            }
        }
    }
}
