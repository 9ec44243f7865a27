//! Sampled signature waveforms and the waveform-domain front-end.
//!
//! A waveform on `[0, T]` is represented by `L` uniformly spaced samples and
//! the inner product `T^-1 ∫ x(t) y(t) dt` becomes `(1/L) Σ_i x_i y_i`, so unit
//! energy and Gram entries carry over unchanged.
//!
//! Continuous white noise of variance `σ²` is sampled as i.i.d. Gaussians of
//! variance `L σ²`. Then for any two sampled waveforms `u`, `v`:
//!
//! ```text
//! E[<u,w><v,w>] = (1/L²) Σ_i u_i v_i · L σ² = σ² <u,v>
//! ```
//!
//! so `<s_n, w>` has covariance `σ² G` and `<ŝ_n, w>` has covariance `σ² G⁻¹`,
//! exactly as in the analog model.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::design::MeasurementMatrix;
use crate::{Error, Result, C64};

/// Rejection threshold on the Gram condition number for randomly drawn chips.
pub const SIGNATURE_MAX_CONDITION: f64 = 1e6;

/// Sampled signature waveforms, one unit-energy row per user.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureSet {
    chips: DMatrix<f64>,
}

impl SignatureSet {
    /// Wraps an `N x L` sample matrix. Rows must already have unit energy.
    pub fn new(chips: DMatrix<f64>) -> Result<Self> {
        if chips.nrows() == 0 || chips.ncols() == 0 {
            return Err(Error::InvalidDimensions("empty signature set".into()));
        }
        let l = chips.ncols() as f64;
        for (n, row) in chips.row_iter().enumerate() {
            let energy = row.norm_squared() / l;
            if (energy - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidDimensions(format!(
                    "signature {n} has energy {energy}, expected 1"
                )));
            }
        }
        Ok(SignatureSet { chips })
    }

    /// Rescales every row of `raw` to unit energy.
    pub fn normalized(mut raw: DMatrix<f64>) -> Result<Self> {
        let l = raw.ncols() as f64;
        for mut row in raw.row_iter_mut() {
            let energy = row.norm_squared() / l;
            if energy <= 0.0 || !energy.is_finite() {
                return Err(Error::InvalidDimensions("zero-energy signature".into()));
            }
            row /= energy.sqrt();
        }
        Self::new(raw)
    }

    /// Random ±1 chip sequences, redrawn until the Gram condition number is
    /// at most [`SIGNATURE_MAX_CONDITION`].
    pub fn random_binary<R: Rng + ?Sized>(n: usize, l: usize, rng: &mut R) -> Result<Self> {
        if n == 0 || l < n {
            return Err(Error::InvalidDimensions(format!(
                "need 1 <= N <= L for independent chip rows, got N={n}, L={l}"
            )));
        }
        for _ in 0..1000 {
            let chips = DMatrix::from_fn(n, l, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 });
            let sigs = SignatureSet { chips };
            if gram_with_threshold(&sigs, SIGNATURE_MAX_CONDITION).is_ok() {
                return Ok(sigs);
            }
        }
        Err(Error::InvalidDimensions(format!(
            "could not draw a well-conditioned N={n}, L={l} chip set"
        )))
    }

    pub fn users(&self) -> usize {
        self.chips.nrows()
    }

    pub fn samples(&self) -> usize {
        self.chips.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.chips
    }

    /// Noiseless received waveform `Σ_n r_n b_n s_n`.
    pub fn transmit(&self, gains: &[f64], symbols: &[i8]) -> Result<DVector<f64>> {
        check_len("transmit gains", self.users(), gains.len())?;
        check_len("transmit symbols", self.users(), symbols.len())?;
        let mut out = DVector::zeros(self.samples());
        for (n, (&r, &b)) in gains.iter().zip(symbols).enumerate() {
            if b != 0 {
                out.axpy(r * b as f64, &self.chips.row(n).transpose(), 1.0);
            }
        }
        Ok(out)
    }
}

/// Crosscorrelation matrix of the signature waveforms with cached factors.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    // lower triangular, L Lᵀ = G⁻¹
    inv_factor: DMatrix<f64>,
    lambda_min: f64,
    lambda_max: f64,
    identity: bool,
}

impl GramMatrix {
    pub const DEFAULT_MAX_CONDITION: f64 = 1e10;

    pub fn identity(n: usize) -> Self {
        let eye = DMatrix::identity(n, n);
        GramMatrix {
            g: eye.clone(),
            g_inv: eye.clone(),
            inv_factor: eye,
            lambda_min: 1.0,
            lambda_max: 1.0,
            identity: true,
        }
    }

    /// `G = (1-ρ) I + ρ 11ᵀ`, positive definite for `-1/(N-1) < ρ < 1`.
    pub fn equicorrelated(n: usize, rho: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidDimensions("N must be positive".into()));
        }
        let g = DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { rho });
        Self::from_matrix(g)
    }

    pub fn from_matrix(g: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix_with_threshold(g, Self::DEFAULT_MAX_CONDITION)
    }

    pub fn from_matrix_with_threshold(g: DMatrix<f64>, max_condition: f64) -> Result<Self> {
        let n = g.nrows();
        if n == 0 || g.ncols() != n {
            return Err(Error::InvalidGram(format!("{}x{} is not square", n, g.ncols())));
        }
        for i in 0..n {
            if (g[(i, i)] - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidGram(format!("diagonal entry {i} is {}", g[(i, i)])));
            }
            for j in 0..i {
                if (g[(i, j)] - g[(j, i)]).abs() > 1e-12 {
                    return Err(Error::InvalidGram(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        let g = (&g + g.transpose()) * 0.5;

        let eig = SymmetricEigen::new(g.clone());
        let lambda_min = eig.eigenvalues.min();
        let lambda_max = eig.eigenvalues.max();
        let condition = if lambda_min > 0.0 { lambda_max / lambda_min } else { f64::INFINITY };
        if condition > max_condition {
            return Err(Error::NearSingularGram { condition, threshold: max_condition });
        }

        let chol = Cholesky::new(g.clone()).ok_or(Error::NearSingularGram {
            condition,
            threshold: max_condition,
        })?;
        let inv = chol.inverse();
        let g_inv = (&inv + inv.transpose()) * 0.5;
        let inv_factor = Cholesky::new(g_inv.clone())
            .ok_or(Error::NearSingularGram { condition, threshold: max_condition })?
            .unpack();
        let identity = g == DMatrix::identity(n, n);

        Ok(GramMatrix { g, g_inv, inv_factor, lambda_min, lambda_max, identity })
    }

    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.g_inv
    }

    /// Lower-triangular `L` with `L Lᵀ = G⁻¹`.
    pub fn inverse_factor(&self) -> &DMatrix<f64> {
        &self.inv_factor
    }

    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    /// `λ_max(G⁻¹)`, evaluated as `1 / λ_min(G)`.
    pub fn lambda_max_inverse(&self) -> f64 {
        1.0 / self.lambda_min
    }

    pub fn condition(&self) -> f64 {
        self.lambda_max / self.lambda_min
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }
}

pub fn gram(sigs: &SignatureSet) -> Result<GramMatrix> {
    gram_with_threshold(sigs, GramMatrix::DEFAULT_MAX_CONDITION)
}

pub fn gram_with_threshold(sigs: &SignatureSet, max_condition: f64) -> Result<GramMatrix> {
    let s = sigs.matrix();
    let mut g = (s * s.transpose()) / sigs.samples() as f64;
    // rows are unit energy up to rounding; pin the diagonal
    for i in 0..g.nrows() {
        g[(i, i)] = 1.0;
    }
    GramMatrix::from_matrix_with_threshold(g, max_condition)
}

/// Biorthogonal waveforms `Ŝ = G⁻¹ S`, satisfying `<s_n, ŝ_m> = δ_nm`.
pub fn biorthogonal(sigs: &SignatureSet, gram: &GramMatrix) -> Result<DMatrix<f64>> {
    check_len("biorthogonal Gram", sigs.users(), gram.dim())?;
    Ok(gram.inverse() * sigs.matrix())
}

/// Sampled correlating signals `h_m = Σ_n a_mn ŝ_n`, split into real and
/// imaginary banks since the received signal is real.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatorBank {
    re: DMatrix<f64>,
    im: DMatrix<f64>,
}

impl CorrelatorBank {
    pub fn correlators(&self) -> usize {
        self.re.nrows()
    }

    pub fn samples(&self) -> usize {
        self.re.ncols()
    }

    pub fn real(&self) -> &DMatrix<f64> {
        &self.re
    }

    pub fn imag(&self) -> &DMatrix<f64> {
        &self.im
    }

    /// Sample `i` of `h_m`.
    pub fn sample(&self, m: usize, i: usize) -> C64 {
        C64::new(self.re[(m, i)], self.im[(m, i)])
    }
}

pub fn build_correlators(biorth: &DMatrix<f64>, a: &MeasurementMatrix) -> Result<CorrelatorBank> {
    correlators_from_coefficients(biorth, a.matrix())
}

/// Like [`build_correlators`] for an arbitrary (not necessarily normalized)
/// coefficient matrix.
pub fn correlators_from_coefficients(biorth: &DMatrix<f64>, coeffs: &DMatrix<C64>) -> Result<CorrelatorBank> {
    check_len("correlator coefficients", biorth.nrows(), coeffs.ncols())?;
    let re = coeffs.map(|c| c.re) * biorth;
    let im = coeffs.map(|c| c.im) * biorth;
    Ok(CorrelatorBank { re, im })
}

/// Correlator outputs `y_m = <h_m, received>`.
pub fn frontend_correlate(bank: &CorrelatorBank, received: &DVector<f64>) -> Result<DVector<C64>> {
    check_len("received samples", bank.samples(), received.len())?;
    let l = bank.samples() as f64;
    let re = &bank.re * received / l;
    let im = &bank.im * received / l;
    Ok(DVector::from_fn(bank.correlators(), |m, _| C64::new(re[m], im[m])))
}

/// Sampled white noise with per-sample variance `L σ²`.
pub fn white_noise<R: Rng + ?Sized>(samples: usize, sigma: f64, rng: &mut R) -> DVector<f64> {
    let scale = sigma * (samples as f64).sqrt();
    DVector::from_fn(samples, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Matched-filter-domain noise `z_n = <ŝ_n, w>` for a sampled noise waveform.
pub fn matched_filter_noise(biorth: &DMatrix<f64>, noise: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("noise samples", biorth.ncols(), noise.len())?;
    Ok(biorth * noise / biorth.ncols() as f64)
}

fn check_len(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { context, expected, actual });
    }
    Ok(())
}
