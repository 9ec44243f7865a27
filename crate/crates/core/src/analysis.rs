//! Coherence conditions and error-probability bounds for RDD and RDDF.
//!
//! `log` is the natural logarithm throughout.

use crate::design::{coherence, max_column_energy};
use crate::model::Scenario;
use crate::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_C: f64 = 1.0;

/// Noise threshold
/// `τ = σ sqrt(2(1+α) log N) · sqrt(λ_max(G⁻¹)) · sqrt(max_n a_nᴴ A Aᴴ a_n)`.
pub fn compute_tau(scn: &Scenario, alpha: f64) -> f64 {
    tau_from_parts(
        scn.sigma(),
        alpha,
        scn.n(),
        scn.gram().lambda_max_inverse(),
        max_column_energy(scn.matrix()),
    )
}

pub fn tau_from_parts(sigma: f64, alpha: f64, n: usize, lambda_max_inv: f64, column_energy: f64) -> f64 {
    sigma * (2.0 * (1.0 + alpha) * (n as f64).ln()).sqrt() * lambda_max_inv.sqrt() * column_energy.sqrt()
}

/// `N^-α [π(1+α) log N]^-1/2`.
pub fn pe_bound(n: usize, alpha: f64) -> f64 {
    let n = n as f64;
    n.powf(-alpha) / (std::f64::consts::PI * (1.0 + alpha) * n.ln()).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub sigma: f64,
    pub alpha: f64,
    pub tau: f64,
    pub mu: f64,
    /// `|r_min| - (2K-1) μ |r_max| - 2τ`; the RDD condition holds when `>= 0`.
    pub rdd_margin: f64,
    /// `|r_min| - (2K-1) μ |r_min| - 2τ`; the RDDF condition holds when `>= 0`.
    pub rddf_margin: f64,
    pub rdd_condition_met: bool,
    pub rddf_condition_met: bool,
    /// `N^-(1+α) [π(1+α) log N]^-1/2 <= 1`.
    pub side_condition_met: bool,
    pub pe_bound: f64,
}

impl BoundReport {
    pub const CSV_HEADER: [&'static str; 13] = [
        "N", "K", "M", "sigma", "alpha", "tau", "mu", "rdd_margin", "rddf_margin",
        "rdd_condition", "rddf_condition", "side_condition", "pe_bound",
    ];

    pub fn csv_record(&self) -> Vec<String> {
        vec![
            self.n.to_string(),
            self.k.to_string(),
            self.m.to_string(),
            self.sigma.to_string(),
            self.alpha.to_string(),
            self.tau.to_string(),
            self.mu.to_string(),
            self.rdd_margin.to_string(),
            self.rddf_margin.to_string(),
            self.rdd_condition_met.to_string(),
            self.rddf_condition_met.to_string(),
            self.side_condition_met.to_string(),
            self.pe_bound.to_string(),
        ]
    }
}

impl std::fmt::Display for BoundReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let yes = |b: bool| if b { "met" } else { "not met" };
        writeln!(f, "N={} K={} M={} sigma={:.6e} alpha={}", self.n, self.k, self.m, self.sigma, self.alpha)?;
        writeln!(f, "  {:<16} {:.6e}", "tau", self.tau)?;
        writeln!(f, "  {:<16} {:.6}", "coherence", self.mu)?;
        writeln!(f, "  {:<16} {:<8} (margin {:+.6e})", "RDD condition", yes(self.rdd_condition_met), self.rdd_margin)?;
        writeln!(f, "  {:<16} {:<8} (margin {:+.6e})", "RDDF condition", yes(self.rddf_condition_met), self.rddf_margin)?;
        writeln!(f, "  {:<16} {}", "side condition", yes(self.side_condition_met))?;
        write!(f, "  {:<16} {:.6e}", "Pe bound", self.pe_bound)
    }
}

pub fn check_conditions(scn: &Scenario, alpha: f64) -> BoundReport {
    let n = scn.n();
    let tau = compute_tau(scn, alpha);
    let mu = coherence(scn.matrix());
    let spread = (2 * scn.k() - 1) as f64 * mu;
    let rdd_margin = scn.rmin() - spread * scn.rmax() - 2.0 * tau;
    let rddf_margin = scn.rmin() - spread * scn.rmin() - 2.0 * tau;
    let side = (n as f64).powf(-(1.0 + alpha))
        / (std::f64::consts::PI * (1.0 + alpha) * (n as f64).ln()).sqrt();
    BoundReport {
        n,
        k: scn.k(),
        m: scn.m(),
        sigma: scn.sigma(),
        alpha,
        tau,
        mu,
        rdd_margin,
        rddf_margin,
        rdd_condition_met: rdd_margin >= 0.0,
        rddf_condition_met: rddf_margin >= 0.0,
        side_condition_met: side <= 1.0,
        pe_bound: pe_bound(n, alpha),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundDetector {
    Rdd,
    Rddf,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelatorBound {
    /// Smallest integer `M` satisfying the lower bound.
    pub m_min: usize,
    /// Error-probability bound `1 - (1 - N^-α [π(1+α) log N]^-1/2)(1 - 2e^-c)`.
    pub pe_bound: f64,
}

/// Correlator-count lower bound for a random partial DFT `A`:
/// `M >= 4 [(2K-1) r / (|r_min| - 2τ)]² (2 log N + c)` with `r = |r_max|`
/// for RDD and `r = |r_min|` for RDDF.
pub fn min_correlators(scn: &Scenario, alpha: f64, c: f64, detector: BoundDetector) -> Result<CorrelatorBound> {
    let tau = compute_tau(scn, alpha);
    correlator_bound(scn.n(), scn.k(), scn.rmin(), scn.rmax(), tau, alpha, c, detector)
}

#[allow(clippy::too_many_arguments)]
pub fn correlator_bound(
    n: usize,
    k: usize,
    rmin: f64,
    rmax: f64,
    tau: f64,
    alpha: f64,
    c: f64,
    detector: BoundDetector,
) -> Result<CorrelatorBound> {
    if rmin <= 2.0 * tau {
        return Err(Error::HypothesisViolated { rmin, two_tau: 2.0 * tau });
    }
    if !(c > 0.0) {
        return Err(Error::InvalidConfig(format!("c must be positive, got {c}")));
    }
    let numerator = match detector {
        BoundDetector::Rdd => rmax,
        BoundDetector::Rddf => rmin,
    };
    let ratio = (2 * k - 1) as f64 * numerator / (rmin - 2.0 * tau);
    let required = 4.0 * ratio * ratio * (2.0 * (n as f64).ln() + c);
    // absorb rounding so exact integers are not pushed up by one
    let m_min = (required * (1.0 - 1e-12)).ceil().max(1.0) as usize;
    let pe = 1.0 - (1.0 - pe_bound(n, alpha)) * (1.0 - 2.0 * (-c).exp());
    Ok(CorrelatorBound { m_min, pe_bound: pe })
}
