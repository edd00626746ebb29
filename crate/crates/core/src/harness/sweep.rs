//! Monte Carlo trials and CSV records.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;
use std::time::Instant;

use super::baselines::{ls_baseline, polar_omp};
use super::config::{draw_paths, Algorithm, SimConfig};
use super::metrics::{nmse, parameter_errors, to_db};
use super::rng::{stream, Stream};
use crate::error::{Error, Result};
use crate::estimator::{reconstruct_channel, run_dps, PathEstimate, StoppingRule};
use crate::frontend::{
    add_noise, noise_variance_for_snr, observe, random_combiner, AnalogCombiner, ReceivedSignal,
};
use crate::model::{
    apply_impairments, synthesize_channel_exact, ArrayGeometry, PathParams, SubcarrierGrid,
    WidebandChannel,
};
use crate::runtime::{run_distributed, RuntimeConfig, Trace};

/// One row of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub seed: u64,
    pub trial: usize,
    pub snr_db: f64,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "K")]
    pub k: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "L_hat")]
    pub l_hat: usize,
    pub algorithm: String,
    pub nmse_db: f64,
    /// RMS over paired paths; NaN when no paths were estimated.
    pub theta_err: f64,
    pub d_err_m: f64,
    pub r_err_m: f64,
    /// Zero unless timing is enabled.
    pub runtime_ms: f64,
    pub fallback: bool,
    /// Dictionary correlations summed over iterations.
    pub corr_count: usize,
}

pub const CSV_HEADER: &str = "seed,trial,snr_db,N,K,M,L,L_hat,algorithm,nmse_db,theta_err,d_err_m,r_err_m,runtime_ms,fallback,corr_count";

/// Noiseless part of one trial.
#[derive(Debug, Clone)]
pub struct Trial {
    pub index: usize,
    pub paths: Vec<PathParams>,
    pub channel: WidebandChannel,
    pub combiner: AnalogCombiner,
}

pub fn draw_trial(
    cfg: &SimConfig,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    index: usize,
) -> Result<Trial> {
    let seed = cfg.run.seed;
    let paths = draw_paths(
        cfg,
        geom,
        grid,
        &mut stream(seed, index as u64, Stream::Paths),
    )?;
    let channel = synthesize_channel_exact(&paths, geom, grid);
    let combiner = random_combiner(geom, &mut stream(seed, index as u64, Stream::Combiner));
    Ok(Trial {
        index,
        paths,
        channel,
        combiner,
    })
}

/// `Y` at the `snr_index`-th SNR point, with impairments applied before
/// the noise.
pub fn observe_trial(
    cfg: &SimConfig,
    grid: &SubcarrierGrid,
    trial: &Trial,
    snr_index: usize,
) -> Result<ReceivedSignal> {
    let power = cfg.run.power_w;
    let snr = cfg.run.snr_db[snr_index];
    let noise_variance = noise_variance_for_snr(&trial.channel, &trial.combiner, power, snr)?;
    let mut rng = stream(
        cfg.run.seed,
        trial.index as u64,
        Stream::Noise(snr_index as u16),
    );
    let mut signal = observe(&trial.channel, &trial.combiner, power, 0.0, &mut rng)?;
    if let Some(imp) = &cfg.impairments {
        signal.rows =
            apply_impairments(&signal.rows, imp, trial.channel.geometry.carrier_hz(), grid)?;
    }
    add_noise(&mut signal.rows, noise_variance, &mut rng);
    signal.noise_variance = noise_variance;
    Ok(signal)
}

#[derive(Debug, Clone)]
pub struct Estimate {
    pub paths: Vec<PathEstimate>,
    pub channel: WidebandChannel,
    pub fallback: bool,
    pub corr_count: usize,
    pub trace: Option<Trace>,
}

pub fn estimate(
    cfg: &SimConfig,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    signal: &ReceivedSignal,
    comb: &AnalogCombiner,
    algorithm: Algorithm,
) -> Result<Estimate> {
    let pfa = cfg.run.false_alarm_rate;
    let (mut paths, mut corr_count, fallback, residual, trace) = match algorithm {
        Algorithm::Ls => {
            return Ok(Estimate {
                paths: Vec::new(),
                channel: ls_baseline(signal, comb, geom, grid)?,
                fallback: false,
                corr_count: 0,
                trace: None,
            })
        }
        Algorithm::Omp => {
            let out = polar_omp(signal, comb, geom, grid, pfa, &cfg.omp)?;
            (out.paths, out.correlations.iter().sum(), false, None, None)
        }
        Algorithm::Dps | Algorithm::DpsDistributed => {
            let rule = StoppingRule::new(signal.noise_variance, grid.num_subcarriers(), pfa)?;
            let (out, trace) = if algorithm == Algorithm::Dps {
                (
                    run_dps(signal, comb, geom, grid, &rule, &cfg.estimator)?,
                    None,
                )
            } else {
                let rt = RuntimeConfig {
                    trace: cfg.run.trace,
                    parallel: false,
                };
                let d = run_distributed(signal, comb, geom, grid, &rule, &cfg.estimator, &rt)?;
                (d.output, d.trace)
            };
            let corr = out.correlations.iter().sum();
            (out.paths, corr, out.fallback, Some(out.residual), trace)
        }
    };
    if fallback && cfg.run.fallback {
        let rest = ReceivedSignal {
            rows: residual.expect("dps residual"),
            power: signal.power,
            noise_variance: signal.noise_variance,
        };
        let out = polar_omp(&rest, comb, geom, grid, pfa, &cfg.omp)?;
        corr_count += out.correlations.iter().sum::<usize>();
        paths.extend(out.paths);
    }
    let channel = reconstruct_channel(&paths, geom, grid, &cfg.reconstruction);
    Ok(Estimate {
        paths,
        channel,
        fallback,
        corr_count,
        trace,
    })
}

/// Runs every algorithm at every SNR point of one trial.
pub fn run_trial(
    cfg: &SimConfig,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    index: usize,
) -> Result<Vec<RunRecord>> {
    let trial = draw_trial(cfg, geom, grid, index)?;
    let mut out = Vec::with_capacity(cfg.run.snr_db.len() * cfg.run.algorithms.len());
    for (si, &snr) in cfg.run.snr_db.iter().enumerate() {
        let signal = observe_trial(cfg, grid, &trial, si)?;
        for &alg in &cfg.run.algorithms {
            let start = Instant::now();
            let est = estimate(cfg, geom, grid, &signal, &trial.combiner, alg)?;
            let runtime_ms = if cfg.run.timing {
                start.elapsed().as_secs_f64() * 1e3
            } else {
                0.0
            };
            let errs = parameter_errors(&trial.paths, &est.paths).unwrap_or([f64::NAN; 3]);
            out.push(RunRecord {
                seed: cfg.run.seed,
                trial: index,
                snr_db: snr,
                n: geom.num_antennas(),
                k: geom.num_subarrays(),
                m: grid.num_subcarriers(),
                l: trial.paths.len(),
                l_hat: est.paths.len(),
                algorithm: alg.name().to_string(),
                nmse_db: to_db(nmse(&trial.channel, &est.channel)?),
                theta_err: errs[0],
                d_err_m: errs[1],
                r_err_m: errs[2],
                runtime_ms,
                fallback: est.fallback,
                corr_count: est.corr_count,
            });
        }
    }
    Ok(out)
}

/// Records in `(trial, snr, algorithm)` order; trials run on the rayon pool.
pub fn monte_carlo_sweep(cfg: &SimConfig) -> Result<Vec<RunRecord>> {
    cfg.validate()?;
    let geom = cfg.geometry()?;
    let grid = cfg.grid()?;
    let d = cfg.derived()?;
    log::info!(
        "N_s={} s={:.6e} m Δf={:.6e} Hz B={:.6e} Hz M_s={} ς/σ²={:.6} c/(MΔf)={:.6} m",
        d.antennas_per_subarray,
        d.spacing_m,
        d.subcarrier_spacing_hz,
        d.bandwidth_hz,
        d.search_halfwidth,
        d.threshold_per_noise,
        d.delay_resolution_m
    );
    let per_trial: Vec<Vec<RunRecord>> = (0..cfg.run.trials)
        .into_par_iter()
        .map(|t| run_trial(cfg, &geom, &grid, t))
        .collect::<Result<_>>()?;
    Ok(per_trial.into_iter().flatten().collect())
}

pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(CSV_HEADER.split(',')).map_err(csv_err)?;
    for r in records {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
