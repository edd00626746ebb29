//! Deterministic in-process simulation of the LPU/CPU exchange.
//!
//! Each LPU sees only its own combined row; the CPU sees only the scalar
//! messages of [`Message`]. Per iteration: the CPU queries the central LPU's
//! residual peak, the central LPU seeds two serial extrapolation chains, every
//! LPU reports its delay, the CPU decouples and broadcasts `(θ̂, d̂, r̂)`, and
//! every LPU fits, reports and cancels its gain. A seed whose track fails
//! decoupling is sent back to the central LPU and excluded from later scans.

pub mod message;
pub mod nodes;

pub use message::{Message, Trace, TraceEntry};
pub use nodes::{detect_fallback, CpuState, LpuState};

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::estimator::dps::{check_inputs, decouple_track};
use crate::estimator::{
    geometry_only, search_halfwidth, DelayDictionary, DpsConfig, DpsOutput, PathEstimate,
    StoppingRule, SubarrayDelayTrack, Termination,
};
use crate::frontend::{AnalogCombiner, ReceivedSignal};
use crate::model::{ArrayGeometry, SubcarrierGrid};

/// Hops of the two outward chains, 1-based as `(source, target)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtrapolationSchedule {
    pub upward: Vec<(usize, usize)>,
    pub downward: Vec<(usize, usize)>,
}

impl ExtrapolationSchedule {
    pub fn hop_count(&self) -> usize {
        self.upward.len() + self.downward.len()
    }
}

/// Chains `k̂ → … → K` and `k̂ → … → 1` for 1-based `central`.
pub fn schedule_extrapolation(
    num_subarrays: usize,
    central: usize,
) -> Result<ExtrapolationSchedule> {
    if num_subarrays == 0 || num_subarrays % 2 != 0 {
        return Err(Error::Geometry(format!(
            "subarray count {num_subarrays} must be even"
        )));
    }
    if central == 0 || central > num_subarrays {
        return Err(Error::IndexOutOfRange {
            index: central,
            total: num_subarrays,
        });
    }
    Ok(ExtrapolationSchedule {
        upward: (central..num_subarrays).map(|k| (k, k + 1)).collect(),
        downward: (2..=central).rev().map(|k| (k, k - 1)).collect(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RuntimeConfig {
    pub trace: bool,
    /// Run per-LPU stages on the rayon pool.
    pub parallel: bool,
}

#[derive(Debug, Clone)]
pub struct DistributedOutput {
    pub output: DpsOutput,
    pub trace: Option<Trace>,
    /// Total dictionary correlations per LPU, 0-based by subarray.
    pub lpu_correlations: Vec<usize>,
    /// Per-iteration correlation count of every LPU.
    pub lpu_correlations_per_iteration: Vec<Vec<usize>>,
}

struct Recorder {
    trace: Option<Trace>,
    iteration: usize,
}

impl Recorder {
    fn send(&mut self, m: Message) {
        if let Some(t) = self.trace.as_mut() {
            t.push(self.iteration, m);
        }
    }
}

fn for_each_lpu<F, T>(lpus: &mut [LpuState], parallel: bool, f: F) -> Vec<T>
where
    F: Fn(&mut LpuState) -> T + Sync + Send,
    T: Send,
{
    if parallel {
        lpus.par_iter_mut().map(f).collect()
    } else {
        lpus.iter_mut().map(f).collect()
    }
}

/// Serial chain over `lpus` starting from `seed`; returns `(index, κ)` per hop.
fn run_chain(lpus: &mut [&mut LpuState], seed: i64, halfwidth: usize) -> Vec<(i64, i64)> {
    let mut prev = seed;
    lpus.iter_mut()
        .map(|lpu| {
            let idx = lpu.extrapolate(prev, halfwidth);
            let kappa = idx - prev;
            prev = idx;
            (idx, kappa)
        })
        .collect()
}

/// Same estimates as [`crate::estimator::run_dps`], computed through the
/// LPU/CPU protocol.
pub fn run_distributed(
    signal: &ReceivedSignal,
    comb: &AnalogCombiner,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    rule: &StoppingRule,
    config: &DpsConfig,
    runtime: &RuntimeConfig,
) -> Result<DistributedOutput> {
    check_inputs(signal, comb, geom, grid)?;
    let k = geom.num_subarrays();
    let dict = Arc::new(DelayDictionary::new(grid.num_subcarriers())?);
    let halfwidth = config
        .search_halfwidth
        .unwrap_or_else(|| search_halfwidth(geom, grid));
    let central = geom.central_subarray();
    let mut lpus: Vec<LpuState> = (0..k)
        .map(|i| {
            LpuState::new(
                i,
                signal.rows.row(i).to_vec(),
                comb.vector(i),
                Arc::clone(&dict),
            )
        })
        .collect();
    let mut cpu = CpuState::new(k);
    let mut rec = Recorder {
        trace: runtime.trace.then(Trace::default),
        iteration: 0,
    };
    let mut correlations = Vec::new();
    let mut per_iteration = Vec::new();
    let mut skipped = 0;

    let termination = loop {
        if cpu.paths.len() >= config.max_paths {
            break Termination::PathLimit;
        }
        cpu.clear_iteration();
        let before: Vec<usize> = lpus.iter().map(LpuState::correlations).collect();

        rec.send(Message::StopQuery { to: central });
        let det = lpus[central].scan();
        rec.send(Message::StopReport {
            from: central,
            score: det.score,
        });
        if rule.is_exhausted(det.score) {
            break Termination::Threshold;
        }

        let seed = det.index as i64;
        let (lower, upper) = lpus.split_at_mut(central);
        let (centre, upper) = upper.split_first_mut().expect("central LPU exists");
        let mut up: Vec<&mut LpuState> = upper.iter_mut().collect();
        let mut down: Vec<&mut LpuState> = lower.iter_mut().rev().collect();
        let (up_res, down_res) = if runtime.parallel {
            rayon::join(
                || run_chain(&mut up, seed, halfwidth),
                || run_chain(&mut down, seed, halfwidth),
            )
        } else {
            (
                run_chain(&mut up, seed, halfwidth),
                run_chain(&mut down, seed, halfwidth),
            )
        };
        let mut indices = vec![0i64; k];
        let mut coefficients = vec![0i64; k];
        indices[central] = seed;
        let mut prev = (centre.index(), seed);
        for (lpu, (idx, kappa)) in up.iter().zip(&up_res) {
            rec.send(Message::DelaySeed {
                from: prev.0,
                to: lpu.index(),
                index: prev.1,
            });
            indices[lpu.index()] = *idx;
            coefficients[lpu.index()] = *kappa;
            prev = (lpu.index(), *idx);
        }
        let mut prev = (centre.index(), seed);
        for (lpu, (idx, kappa)) in down.iter().zip(&down_res) {
            rec.send(Message::DelaySeed {
                from: prev.0,
                to: lpu.index(),
                index: prev.1,
            });
            indices[lpu.index()] = *idx;
            coefficients[lpu.index()] = *kappa;
            prev = (lpu.index(), *idx);
        }
        for (i, idx) in indices.iter().enumerate() {
            rec.send(Message::DelayReport {
                from: i,
                index: *idx,
            });
            cpu.delays[i] = Some(*idx);
        }
        let spent: Vec<usize> = lpus
            .iter()
            .zip(&before)
            .map(|(l, b)| l.correlations() - b)
            .collect();
        correlations.push(spent.iter().sum());
        per_iteration.push(spent);

        if detect_fallback(&cpu) {
            cpu.fallback = true;
            break Termination::Fallback;
        }
        let track = SubarrayDelayTrack {
            indices,
            coefficients,
            central,
            search_halfwidth: halfwidth,
            num_subcarriers: dict.size(),
        };
        let Some((angle, distance, range, clamped)) = decouple_track(&track, geom, grid)? else {
            rec.send(Message::SkipIndex {
                to: central,
                index: det.index,
            });
            lpus[central].skip(det.index);
            skipped += 1;
            if skipped >= config.max_paths {
                break Termination::Rejected;
            }
            rec.iteration += 1;
            continue;
        };
        rec.send(Message::ParamBroadcast {
            angle_sine: angle,
            distance_m: distance,
            range_m: range,
        });
        let est = geometry_only(angle, distance, range);
        let power = signal.power;
        let mode = config.steering;
        let gains = for_each_lpu(&mut lpus, runtime.parallel, |lpu| {
            lpu.fit_and_cancel(&est, geom, grid, power, mode)
        });
        let mut lpu_gains = Vec::with_capacity(k);
        for (i, g) in gains.into_iter().enumerate() {
            let g = g?;
            rec.send(Message::GainReport { from: i, gain: g });
            cpu.gains[i] = Some(g);
            lpu_gains.push(g);
        }
        let gain = lpu_gains.iter().sum::<Complex64>() / lpu_gains.len() as f64;
        cpu.paths.push(PathEstimate {
            gain,
            angle_sine: angle,
            distance_m: distance,
            range_m: range,
            lpu_gains,
            track: Some(track),
            angle_clamped: clamped,
        });
        rec.iteration += 1;
    };

    let lpu_correlations = lpus.iter().map(LpuState::correlations).collect();
    let m = grid.num_subcarriers();
    let mut residual = ndarray::Array2::zeros((k, m));
    for (i, lpu) in lpus.into_iter().enumerate() {
        residual
            .row_mut(i)
            .assign(&ndarray::Array1::from(lpu.into_row()));
    }
    Ok(DistributedOutput {
        output: DpsOutput {
            paths: cpu.paths,
            fallback: cpu.fallback,
            termination,
            correlations,
            residual,
        },
        trace: rec.trace,
        lpu_correlations,
        lpu_correlations_per_iteration: per_iteration,
    })
}
