//! Vector-domain front-end output `y = A (R b + z)`, where `z` is the
//! matched-filter-domain noise with covariance `σ² G⁻¹`, so `w = A z` has
//! covariance `σ² A G⁻¹ Aᴴ`.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::design::{MatrixKind, MeasurementMatrix};
use crate::waveforms::GramMatrix;
use crate::{Error, Result, C64};

/// One problem instance: users, sparsity, gains, signatures, `A`, noise level.
#[derive(Debug, Clone)]
pub struct Scenario {
    k: usize,
    gram: Arc<GramMatrix>,
    a: MeasurementMatrix,
    gains: Arc<[f64]>,
    sigma: f64,
    rmin: f64,
    rmax: f64,
}

impl Scenario {
    pub fn new(
        k: usize,
        gram: Arc<GramMatrix>,
        a: MeasurementMatrix,
        gains: impl Into<Arc<[f64]>>,
        sigma: f64,
    ) -> Result<Self> {
        let gains = gains.into();
        let n = gram.dim();
        if a.users() != n {
            return Err(Error::DimensionMismatch { context: "scenario A columns", expected: n, actual: a.users() });
        }
        if gains.len() != n {
            return Err(Error::DimensionMismatch { context: "scenario gains", expected: n, actual: gains.len() });
        }
        if k == 0 || k > n {
            return Err(Error::InvalidScenario(format!("need 1 <= K <= N, got K={k}, N={n}")));
        }
        if gains.iter().any(|r| *r == 0.0 || !r.is_finite()) {
            return Err(Error::InvalidScenario("gains must be finite and nonzero".into()));
        }
        if !(sigma >= 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidScenario(format!("sigma must be finite and >= 0, got {sigma}")));
        }
        let rmin = gains.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
        let rmax = gains.iter().map(|r| r.abs()).fold(0.0, f64::max);
        Ok(Scenario { k, gram, a, gains, sigma, rmin, rmax })
    }

    /// Same users, gains and noise with a different coefficient matrix.
    pub fn with_matrix(&self, a: MeasurementMatrix) -> Result<Self> {
        if a.users() != self.n() {
            return Err(Error::DimensionMismatch { context: "scenario A columns", expected: self.n(), actual: a.users() });
        }
        Ok(Scenario { a, ..self.clone() })
    }

    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Scenario::new(self.k, self.gram.clone(), self.a.clone(), self.gains.clone(), sigma)
    }

    pub fn n(&self) -> usize {
        self.gram.dim()
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.a.correlators()
    }

    pub fn gram(&self) -> &GramMatrix {
        &self.gram
    }

    pub fn gram_arc(&self) -> &Arc<GramMatrix> {
        &self.gram
    }

    pub fn matrix(&self) -> &MeasurementMatrix {
        &self.a
    }

    pub fn gains(&self) -> &[f64] {
        &self.gains
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn rmin(&self) -> f64 {
        self.rmin
    }

    pub fn rmax(&self) -> f64 {
        self.rmax
    }

    /// `|r_min|² / σ²` (infinite when noiseless).
    pub fn snr(&self) -> f64 {
        self.rmin * self.rmin / (self.sigma * self.sigma)
    }

    /// `A G⁻¹ Aᴴ`, the noise covariance up to the factor `σ²`.
    pub fn noise_covariance(&self) -> DMatrix<C64> {
        let a = self.a.matrix();
        let g_inv = self.gram.inverse().map(|v| C64::new(v, 0.0));
        a * g_inv * a.adjoint()
    }
}

/// `σ = |r_min| / 10^(snr_db/20)`.
pub fn sigma_from_snr_db(rmin: f64, snr_db: f64) -> f64 {
    rmin.abs() / 10f64.powf(snr_db / 20.0)
}

/// Ground truth: active set and symbols in `{-1, 0, +1}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmitState {
    support: Vec<usize>,
    symbols: Vec<i8>,
}

impl TransmitState {
    /// Builds a state from a support and the `±1` symbols of its members,
    /// given in the same order as `support`.
    pub fn new(n: usize, support: &[usize], active_symbols: &[i8]) -> Result<Self> {
        if support.len() != active_symbols.len() {
            return Err(Error::DimensionMismatch {
                context: "transmit symbols",
                expected: support.len(),
                actual: active_symbols.len(),
            });
        }
        let mut symbols = vec![0i8; n];
        for (&idx, &b) in support.iter().zip(active_symbols) {
            if idx >= n {
                return Err(Error::InvalidDimensions(format!("active index {idx} >= N={n}")));
            }
            if b != 1 && b != -1 {
                return Err(Error::InvalidDimensions(format!("symbol {b} is not ±1")));
            }
            if symbols[idx] != 0 {
                return Err(Error::InvalidDimensions(format!("index {idx} repeated")));
            }
            symbols[idx] = b;
        }
        let mut support = support.to_vec();
        support.sort_unstable();
        Ok(TransmitState { support, symbols })
    }

    pub fn support(&self) -> &[usize] {
        &self.support
    }

    pub fn symbols(&self) -> &[i8] {
        &self.symbols
    }

    pub fn users(&self) -> usize {
        self.symbols.len()
    }
}

/// Uniform support among all `C(N, K)` subsets, i.i.d. uniform `±1` symbols.
pub fn random_transmit_state<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> Result<TransmitState> {
    if k > n {
        return Err(Error::InvalidDimensions(format!("K={k} exceeds N={n}")));
    }
    let mut support = rand::seq::index::sample(rng, n, k).into_vec();
    support.sort_unstable();
    let mut symbols = vec![0i8; n];
    for &idx in &support {
        symbols[idx] = if rng.random::<bool>() { 1 } else { -1 };
    }
    Ok(TransmitState { support, symbols })
}

/// Matched-filter-domain noise `z = σ L u` with `L Lᵀ = G⁻¹`.
pub fn draw_noise<R: Rng + ?Sized>(gram: &GramMatrix, sigma: f64, rng: &mut R) -> DVector<f64> {
    let n = gram.dim();
    if sigma == 0.0 {
        return DVector::zeros(n);
    }
    let u = DVector::from_fn(n, |_, _| rng.sample::<f64, _>(StandardNormal));
    if gram.is_identity() {
        return u * sigma;
    }
    let l = gram.inverse_factor();
    let mut z = DVector::zeros(n);
    for j in 0..n {
        let uj = u[j];
        for i in j..n {
            z[i] += l[(i, j)] * uj;
        }
    }
    z * sigma
}

/// Front-end output and, when known, the matched-filter noise that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct FrontEndOutput {
    pub y: DVector<C64>,
    pub z: Option<DVector<f64>>,
}

pub fn synthesize<R: Rng + ?Sized>(scn: &Scenario, state: &TransmitState, rng: &mut R) -> Result<FrontEndOutput> {
    let z = draw_noise(scn.gram(), scn.sigma(), rng);
    synthesize_with_noise(scn, state, z)
}

/// `y = A (R b + z)` for a given matched-filter noise realization.
pub fn synthesize_with_noise(scn: &Scenario, state: &TransmitState, z: DVector<f64>) -> Result<FrontEndOutput> {
    let n = scn.n();
    if state.users() != n {
        return Err(Error::DimensionMismatch { context: "transmit state", expected: n, actual: state.users() });
    }
    if z.len() != n {
        return Err(Error::DimensionMismatch { context: "noise vector", expected: n, actual: z.len() });
    }
    let mut x = z.clone();
    for &idx in state.support() {
        x[idx] += scn.gains()[idx] * state.symbols()[idx] as f64;
    }
    let y = apply_matrix(scn.matrix(), &x);
    Ok(FrontEndOutput { y, z: Some(z) })
}

/// `A x` for a real `x`.
pub fn apply_matrix(a: &MeasurementMatrix, x: &DVector<f64>) -> DVector<C64> {
    if a.kind() == MatrixKind::Identity {
        return x.map(|v| C64::new(v, 0.0));
    }
    let am = a.matrix();
    let mut y = DVector::from_element(am.nrows(), C64::new(0.0, 0.0));
    for (col, &xn) in am.column_iter().zip(x.iter()) {
        if xn != 0.0 {
            for (yi, ai) in y.iter_mut().zip(col.iter()) {
                *yi += ai * xn;
            }
        }
    }
    y
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{identity_matrix, partial_dft};
    use crate::rng::StreamKey;

    fn scenario(a: MeasurementMatrix, gram: GramMatrix, sigma: f64) -> Scenario {
        let n = gram.dim();
        let gains: Vec<f64> = (0..n).map(|i| 1.0 + 0.1 * i as f64).collect();
        Scenario::new(2, Arc::new(gram), a, gains, sigma).unwrap()
    }

    #[test]
    fn transmit_state_edge_cases() {
        let mut rng = StreamKey::new(0).rng(0);
        let empty = random_transmit_state(5, 0, &mut rng).unwrap();
        assert!(empty.support().is_empty());
        assert!(empty.symbols().iter().all(|&b| b == 0));
        let full = random_transmit_state(5, 5, &mut rng).unwrap();
        assert!(full.symbols().iter().all(|&b| b == 1 || b == -1));
        assert_eq!(full.support(), &[0, 1, 2, 3, 4]);
        assert!(random_transmit_state(3, 4, &mut rng).is_err());
        assert!(TransmitState::new(4, &[1, 1], &[1, 1]).is_err());
        assert!(TransmitState::new(4, &[1], &[0]).is_err());
        let s = TransmitState::new(4, &[3, 0], &[-1, 1]).unwrap();
        assert_eq!(s.support(), &[0, 3]);
        assert_eq!(s.symbols(), &[1, 0, 0, -1]);
    }

    #[test]
    fn support_is_uniform() {
        let (n, k, draws) = (100usize, 2usize, 100_000usize);
        let mut counts = vec![0usize; n];
        let mut rng = StreamKey::new(11).rng(0);
        let mut plus = 0usize;
        for _ in 0..draws {
            let s = random_transmit_state(n, k, &mut rng).unwrap();
            for &i in s.support() {
                counts[i] += 1;
                plus += (s.symbols()[i] == 1) as usize;
            }
        }
        let p = k as f64 / n as f64;
        let se = (p * (1.0 - p) / draws as f64).sqrt();
        // 3 std errors per index would flag ~27% of runs over 100 indices;
        // use the Bonferroni-style 4.5 for the family.
        for &c in &counts {
            assert!((c as f64 / draws as f64 - p).abs() < 4.5 * se, "count {c}");
        }
        let frac_plus = plus as f64 / (k * draws) as f64;
        assert!((frac_plus - 0.5).abs() < 4.0 * (0.25 / (k * draws) as f64).sqrt());
    }

    #[test]
    fn noiseless_noise_is_zero() {
        let g = GramMatrix::equicorrelated(4, 0.3).unwrap();
        let z = draw_noise(&g, 0.0, &mut StreamKey::new(1).rng(0));
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn white_noise_covariance() {
        let g = GramMatrix::identity(4);
        let sigma = 0.7;
        let draws = 100_000;
        let mut rng = StreamKey::new(2).rng(0);
        let mut cov = DMatrix::<f64>::zeros(4, 4);
        for _ in 0..draws {
            let z = draw_noise(&g, sigma, &mut rng);
            cov += &z * z.transpose();
        }
        cov /= draws as f64;
        let target = DMatrix::<f64>::identity(4, 4) * sigma * sigma;
        assert!((cov - &target).norm() / target.norm() < 0.05);
    }

    #[test]
    fn noiseless_identity_output_is_rb() {
        let scn = scenario(identity_matrix(5), GramMatrix::identity(5), 0.0);
        let state = TransmitState::new(5, &[1, 4], &[1, -1]).unwrap();
        let out = synthesize(&scn, &state, &mut StreamKey::new(0).rng(0)).unwrap();
        let expected = [0.0, 1.1, 0.0, 0.0, -1.4];
        for (y, e) in out.y.iter().zip(expected) {
            assert_eq!(*y, C64::new(e, 0.0));
        }
    }

    #[test]
    fn noiseless_partial_dft_output_is_column_sum() {
        let mut rng = StreamKey::new(4).rng(0);
        let a = partial_dft(8, 4, &mut rng).unwrap();
        let scn = scenario(a.clone(), GramMatrix::identity(8), 0.0);
        let state = TransmitState::new(8, &[2, 5], &[-1, 1]).unwrap();
        let out = synthesize(&scn, &state, &mut rng).unwrap();
        let expected = a.matrix().column(2) * C64::new(-1.2, 0.0) + a.matrix().column(5) * C64::new(1.5, 0.0);
        assert!((out.y - expected).camax() < 1e-12);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let scn = scenario(identity_matrix(5), GramMatrix::identity(5), 0.1);
        let state = TransmitState::new(4, &[1], &[1]).unwrap();
        assert!(matches!(
            synthesize(&scn, &state, &mut StreamKey::new(0).rng(0)),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(Scenario::new(0, Arc::new(GramMatrix::identity(3)), identity_matrix(3), vec![1.0; 3], 0.1).is_err());
        assert!(Scenario::new(1, Arc::new(GramMatrix::identity(3)), identity_matrix(3), vec![1.0, 0.0, 1.0], 0.1).is_err());
        assert!(Scenario::new(1, Arc::new(GramMatrix::identity(3)), identity_matrix(4), vec![1.0; 3], 0.1).is_err());
    }

    #[test]
    fn snr_conversion() {
        assert!((sigma_from_snr_db(1.0, 20.0) - 0.1).abs() < 1e-15);
        let scn = scenario(identity_matrix(3), GramMatrix::identity(3), sigma_from_snr_db(1.0, 10.0));
        assert!((scn.snr() - 10.0).abs() < 1e-12);
        assert_eq!(scn.rmin(), 1.0);
        assert!((scn.rmax() - 1.2).abs() < 1e-15);
    }

    #[test]
    fn empirical_mean_matches_signal() {
        let mut rng = StreamKey::new(21).rng(0);
        let a = partial_dft(8, 4, &mut rng).unwrap();
        let gram = GramMatrix::equicorrelated(8, 0.4).unwrap();
        let scn = scenario(a, gram, 0.5);
        let state = TransmitState::new(8, &[1, 6], &[1, -1]).unwrap();
        let draws = 100_000;
        let mut sum = DVector::from_element(4, C64::new(0.0, 0.0));
        for _ in 0..draws {
            sum += synthesize(&scn, &state, &mut rng).unwrap().y;
        }
        let mean = sum / C64::new(draws as f64, 0.0);
        let clean = synthesize_with_noise(&scn, &state, DVector::zeros(8)).unwrap().y;
        let cov = scn.noise_covariance();
        for i in 0..4 {
            // real and imaginary parts each carry at most the full variance
            let se = (0.25 * cov[(i, i)].re / draws as f64).sqrt();
            assert!((mean[i].re - clean[i].re).abs() < 4.0 * se);
            assert!((mean[i].im - clean[i].im).abs() < 4.0 * se);
        }
    }
}
