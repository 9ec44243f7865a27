use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::info;

use rdmud::analysis::{check_conditions, min_correlators, BoundDetector, BoundReport};
use rdmud::config::{ExperimentConfig, MatrixSpec};
use rdmud::design::{self, coherence, welch_bound};
use rdmud::harness::{fixed_partial_dft, Experiment};
use rdmud::model::{sigma_from_snr_db, Scenario};
use rdmud::rng::StreamKey;
use rdmud::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "rdmud", version, about = "Reduced-dimension multiuser detection simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo sweep and write the Pe table as CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `output`; "-" writes to stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Overrides the config's worker count.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Evaluate the coherence conditions and Pe bound for each (M, SNR).
    Bound {
        #[arg(long)]
        config: PathBuf,
        /// Also write the reports as CSV rows.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Coherence statistics of random partial DFT matrices.
    Coherence {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        m: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        samples: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Simulate { config, output, workers } => simulate(config, output, workers),
        Command::Bound { config, csv } => bound(config, csv),
        Command::Coherence { n, m, seed, samples } => coherence_stats(n, m, seed, samples),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn simulate(config: PathBuf, output: Option<PathBuf>, workers: Option<usize>) -> Result<()> {
    let mut cfg = ExperimentConfig::from_path(&config)?;
    if let Some(w) = workers {
        cfg.workers = w;
    }
    let target = output.or_else(|| cfg.output.clone());
    let exp = Experiment::new(cfg)?;
    info!(
        "{} points, {} trials each, state mode {}, {} worker(s)",
        exp.grid().len(),
        exp.config().trials,
        exp.config().state_mode(),
        exp.workers()
    );
    let sink: Box<dyn Write> = match &target {
        None => Box::new(io::stdout().lock()),
        Some(p) if p.as_os_str() == "-" => Box::new(io::stdout().lock()),
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|source| Error::Io { path: p.clone(), source })?,
        )),
    };
    exp.run_sweep_with(sink, |p| {
        info!(
            "{:<12} M={:<4} snr={:>6} dB  pe={:.3e} [{:.3e}, {:.3e}]",
            p.detector, p.m, p.snr_db, p.estimate.pe, p.estimate.ci_lo, p.estimate.ci_hi
        );
    })?;
    Ok(())
}

fn bound(config: PathBuf, csv_path: Option<PathBuf>) -> Result<()> {
    let cfg = ExperimentConfig::from_path(&config)?;
    let gram = cfg.build_gram()?;
    let gains = cfg.gains_vec();
    let rmin = gains.iter().map(|r| r.abs()).fold(f64::INFINITY, f64::min);
    let (alpha, c) = (cfg.analysis.alpha, cfg.analysis.c);

    let matrices = match &cfg.matrix {
        MatrixSpec::Identity => vec![design::identity_matrix(cfg.n)],
        MatrixSpec::Custom { .. } => vec![cfg.custom_matrix()?.expect("custom")],
        MatrixSpec::PartialDft { seed, .. } => cfg
            .m
            .iter()
            .map(|&m| fixed_partial_dft(cfg.n, m, seed.unwrap_or(cfg.seed)))
            .collect::<Result<_>>()?,
    };

    let mut writer = match &csv_path {
        Some(p) => {
            let mut w = csv::Writer::from_path(p)?;
            w.write_record(BoundReport::CSV_HEADER)?;
            Some(w)
        }
        None => None,
    };
    let mut stdout = io::stdout().lock();
    for a in matrices {
        for &snr in &cfg.snr_db {
            let scn = Scenario::new(cfg.k, gram.clone(), a.clone(), gains.clone(), sigma_from_snr_db(rmin, snr))?;
            let report = check_conditions(&scn, alpha);
            let _ = writeln!(stdout, "snr={snr} dB\n{report}");
            for (name, det) in [("RDD", BoundDetector::Rdd), ("RDDF", BoundDetector::Rddf)] {
                match min_correlators(&scn, alpha, c, det) {
                    Ok(b) => {
                        let _ = writeln!(stdout, "  {:<16} M >= {} (Pe <= {:.6e})", format!("{name} M bound"), b.m_min, b.pe_bound);
                    }
                    Err(e) => {
                        let _ = writeln!(stdout, "  {:<16} {e}", format!("{name} M bound"));
                    }
                }
            }
            let _ = writeln!(stdout);
            if let Some(w) = writer.as_mut() {
                w.write_record(report.csv_record())?;
            }
        }
    }
    if let (Some(w), Some(p)) = (writer.as_mut(), &csv_path) {
        w.flush().map_err(|source| Error::Io { path: p.clone(), source })?;
    }
    Ok(())
}

fn coherence_stats(n: usize, m: usize, seed: u64, samples: u64) -> Result<()> {
    if samples == 0 {
        return Err(Error::InvalidConfig("samples must be >= 1".into()));
    }
    let key = StreamKey::new(seed).with_str("coherence");
    let mut mus = (0..samples)
        .map(|s| design::partial_dft(n, m, &mut key.rng(s)).map(|a| coherence(&a)))
        .collect::<Result<Vec<f64>>>()?;
    mus.sort_by(f64::total_cmp);
    let mean = mus.iter().sum::<f64>() / mus.len() as f64;
    let median = if mus.len() % 2 == 1 {
        mus[mus.len() / 2]
    } else {
        (mus[mus.len() / 2 - 1] + mus[mus.len() / 2]) / 2.0
    };
    println!("N={n} M={m} seed={seed} samples={samples}");
    println!("  {:<8} {:.6}", "min", mus[0]);
    println!("  {:<8} {:.6}", "median", median);
    println!("  {:<8} {:.6}", "mean", mean);
    println!("  {:<8} {:.6}", "max", mus[mus.len() - 1]);
    println!("  {:<8} {:.6}", "welch", welch_bound(n, m));
    Ok(())
}
