//! Seeded, parallel Monte Carlo estimation of the block-error probability.
//!
//! A trial's random numbers come from the stream
//! `(master seed, matrix kind, M, snr_db) / trial index`. The detector is not
//! part of the key, so every detector at a grid point sees the same
//! `(A, b, noise)` realizations and comparisons between detectors are paired.

use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::design::{self, coherence, MeasurementMatrix};
use crate::detectors::{detect, DetectorKind, DetectorOptions};
use crate::model::{random_transmit_state, sigma_from_snr_db, synthesize, Scenario, TransmitState};
use crate::rng::StreamKey;
use crate::waveforms::GramMatrix;
use crate::{Error, Result};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959963984540054;

pub const CSV_HEADER: [&str; 13] = [
    "detector", "N", "K", "M", "L", "snr_db", "trials", "errors", "pe", "ci_lo", "ci_hi", "mu_mean", "seed",
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PeEstimate {
    pub errors: u64,
    pub trials: u64,
    pub pe: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl PeEstimate {
    /// Binomial standard error `sqrt(pe (1 - pe) / trials)`.
    pub fn std_error(&self) -> f64 {
        (self.pe * (1.0 - self.pe) / self.trials as f64).sqrt()
    }

    pub fn overlaps(&self, other: &PeEstimate) -> bool {
        self.ci_lo <= other.ci_hi && other.ci_lo <= self.ci_hi
    }
}

/// Point estimate with a Wilson score 95% interval.
pub fn estimate_pe(errors: u64, trials: u64) -> PeEstimate {
    assert!(trials > 0 && errors <= trials, "need 0 <= errors <= trials, trials > 0");
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let ci_lo = if errors == 0 { 0.0 } else { (center - half).max(0.0) };
    let ci_hi = if errors == trials { 1.0 } else { (center + half).min(1.0) };
    PeEstimate { errors, trials, pe: p, ci_lo, ci_hi }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointResult {
    pub detector: DetectorKind,
    pub n: usize,
    pub k: usize,
    pub m: usize,
    pub chips: Option<usize>,
    pub snr_db: f64,
    pub estimate: PeEstimate,
    pub mu_mean: f64,
    pub seed: u64,
}

impl PointResult {
    pub fn csv_record(&self) -> [String; 13] {
        let e = &self.estimate;
        [
            self.detector.to_string(),
            self.n.to_string(),
            self.k.to_string(),
            self.m.to_string(),
            self.chips.unwrap_or(0).to_string(),
            self.snr_db.to_string(),
            e.trials.to_string(),
            e.errors.to_string(),
            e.pe.to_string(),
            e.ci_lo.to_string(),
            e.ci_hi.to_string(),
            self.mu_mean.to_string(),
            self.seed.to_string(),
        ]
    }
}

/// A validated configuration with its shared, immutable ingredients built.
pub struct Experiment {
    cfg: ExperimentConfig,
    gram: Arc<GramMatrix>,
    gains: Arc<[f64]>,
    custom: Option<MeasurementMatrix>,
    fixed_state: Option<TransmitState>,
    options: DetectorOptions,
    pool: rayon::ThreadPool,
}

enum MatrixSource {
    Fresh,
    Fixed(MeasurementMatrix),
}

impl Experiment {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build()
            .map_err(|e| Error::InvalidConfig(format!("worker pool: {e}")))?;
        Ok(Experiment {
            gram: cfg.build_gram()?,
            gains: cfg.gains_vec().into(),
            custom: cfg.custom_matrix()?,
            fixed_state: cfg.fixed_state()?,
            options: cfg.detector_options(),
            cfg,
            pool,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn workers(&self) -> usize {
        self.pool.current_num_threads()
    }

    /// Correlator counts this experiment sweeps for non-baseline detectors.
    pub fn m_values(&self) -> Vec<usize> {
        match (&self.cfg.matrix, &self.custom) {
            (_, Some(a)) => vec![a.correlators()],
            (crate::config::MatrixSpec::Identity, _) => vec![self.cfg.n],
            _ => self.cfg.m.clone(),
        }
    }

    /// Every `(detector, M, snr_db)` point of the sweep, in output order:
    /// detectors outermost, then M, then SNR; baseline rows last.
    pub fn grid(&self) -> Vec<(DetectorKind, usize, f64)> {
        let mut points = Vec::new();
        for &det in &self.cfg.detectors {
            let ms = if det == DetectorKind::Decorrelator { vec![self.cfg.n] } else { self.m_values() };
            for m in ms {
                for &snr in &self.cfg.snr_db {
                    points.push((det, m, snr));
                }
            }
        }
        if self.cfg.baseline && !self.cfg.detectors.contains(&DetectorKind::Decorrelator) {
            for &snr in &self.cfg.snr_db {
                points.push((DetectorKind::Decorrelator, self.cfg.n, snr));
            }
        }
        points
    }

    fn matrix_source(&self, m: usize, detector: DetectorKind) -> Result<MatrixSource> {
        use crate::config::MatrixSpec;
        if detector == DetectorKind::Decorrelator {
            return Ok(MatrixSource::Fixed(design::identity_matrix(self.cfg.n)));
        }
        Ok(match &self.cfg.matrix {
            MatrixSpec::Identity => MatrixSource::Fixed(design::identity_matrix(self.cfg.n)),
            MatrixSpec::Custom { .. } => MatrixSource::Fixed(self.custom.clone().expect("loaded in new")),
            MatrixSpec::PartialDft { fresh_per_trial: true, .. } => MatrixSource::Fresh,
            MatrixSpec::PartialDft { fresh_per_trial: false, seed } => {
                MatrixSource::Fixed(fixed_partial_dft(self.cfg.n, m, seed.unwrap_or(self.cfg.seed))?)
            }
        })
    }

    pub fn run_point(&self, m: usize, snr_db: f64, detector: DetectorKind) -> Result<PointResult> {
        let cfg = &self.cfg;
        let source = self.matrix_source(m, detector)?;
        let (kind_tag, base_matrix) = match &source {
            MatrixSource::Fresh => ("partial-dft", design::identity_matrix(cfg.n)),
            MatrixSource::Fixed(a) => (a.kind().as_str(), a.clone()),
        };
        let m = match &source {
            MatrixSource::Fresh => m,
            MatrixSource::Fixed(a) => a.correlators(),
        };
        let fixed_mu = coherence(&base_matrix);

        let rmin = self.gains.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
        let sigma = sigma_from_snr_db(rmin, snr_db);
        let base = Scenario::new(cfg.k, self.gram.clone(), base_matrix, self.gains.clone(), sigma)?;
        let key = StreamKey::new(cfg.seed).with_str(kind_tag).with(m as u64).with_f64(snr_db);

        let run_trial = |t: u64| -> Result<(bool, f64)> {
            let mut rng = key.rng(t);
            let (scn, mu) = match source {
                MatrixSource::Fresh => {
                    let a = design::partial_dft(cfg.n, m, &mut rng)?;
                    let mu = coherence(&a);
                    (std::borrow::Cow::Owned(base.with_matrix(a)?), mu)
                }
                MatrixSource::Fixed(_) => (std::borrow::Cow::Borrowed(&base), fixed_mu),
            };
            let state = match &self.fixed_state {
                Some(s) => s.clone(),
                None => random_transmit_state(cfg.n, cfg.k, &mut rng)?,
            };
            let out = synthesize(&scn, &state, &mut rng)?;
            let det = detect(detector, &scn, &out.y, &self.options)?;
            Ok((det.is_block_error(&state), mu))
        };

        let outcomes: Vec<(bool, f64)> = self.pool.install(|| {
            (0..cfg.trials)
                .into_par_iter()
                .map(|t| run_trial(t).map_err(|e| Error::Trial { trial: t, m, snr_db, source: Box::new(e) }))
                .collect::<Result<_>>()
        })?;

        // sequential reduction keeps the floating-point sum order fixed
        let errors = outcomes.iter().filter(|(e, _)| *e).count() as u64;
        let mu_mean = outcomes.iter().map(|(_, mu)| mu).sum::<f64>() / cfg.trials as f64;
        Ok(PointResult {
            detector,
            n: cfg.n,
            k: cfg.k,
            m,
            chips: cfg.chips(),
            snr_db,
            estimate: estimate_pe(errors, cfg.trials),
            mu_mean,
            seed: cfg.seed,
        })
    }

    /// Runs every grid point, writing and flushing one CSV row per point.
    pub fn run_sweep<W: Write>(&self, out: W) -> Result<Vec<PointResult>> {
        self.run_sweep_with(out, |_| {})
    }

    pub fn run_sweep_with<W: Write>(&self, out: W, mut on_point: impl FnMut(&PointResult)) -> Result<Vec<PointResult>> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(CSV_HEADER)?;
        writer.flush().map_err(io_err)?;
        let mut results = Vec::new();
        for (det, m, snr) in self.grid() {
            let point = self.run_point(m, snr, det)?;
            writer.write_record(point.csv_record())?;
            writer.flush().map_err(io_err)?;
            on_point(&point);
            results.push(point);
        }
        Ok(results)
    }
}

fn io_err(source: std::io::Error) -> Error {
    Error::Io { path: "<csv output>".into(), source }
}

/// The fixed-A draw used when `fresh_per_trial` is off.
pub fn fixed_partial_dft(n: usize, m: usize, seed: u64) -> Result<MeasurementMatrix> {
    let mut rng = StreamKey::new(seed).with_str("fixed-matrix").with(m as u64).rng(0);
    design::partial_dft(n, m, &mut rng)
}

pub fn run_point(cfg: &ExperimentConfig, m: usize, snr_db: f64, detector: DetectorKind) -> Result<PointResult> {
    Experiment::new(cfg.clone())?.run_point(m, snr_db, detector)
}

pub fn run_sweep<W: Write>(cfg: &ExperimentConfig, out: W) -> Result<Vec<PointResult>> {
    Experiment::new(cfg.clone())?.run_sweep(out)
}
