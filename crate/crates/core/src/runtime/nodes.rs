//! Local and central processing units.

use ndarray::Array1;
use num_complex::Complex64;
use std::sync::Arc;

use crate::error::Result;
use crate::estimator::{
    estimate_gain_lpu, extrapolation_step, regressor_for, residual_update, DelayDictionary,
    Detection, PathEstimate,
};
use crate::model::{ArrayGeometry, PathParams, SteeringMode, SubcarrierGrid};

/// One subarray's processing unit. It owns its received row and phase-shift
/// vector and nothing else.
#[derive(Debug, Clone)]
pub struct LpuState {
    index: usize,
    row: Vec<Complex64>,
    combiner: Array1<Complex64>,
    dict: Arc<DelayDictionary>,
    pub last_delay: Option<i64>,
    pub last_gain: Option<Complex64>,
    correlations: usize,
    skipped: Vec<usize>,
}

impl LpuState {
    pub fn new(
        index: usize,
        row: Vec<Complex64>,
        combiner: Array1<Complex64>,
        dict: Arc<DelayDictionary>,
    ) -> Self {
        Self {
            index,
            row,
            combiner,
            dict,
            last_delay: None,
            last_gain: None,
            correlations: 0,
            skipped: Vec::new(),
        }
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// Dictionary correlations evaluated so far.
    pub fn correlations(&self) -> usize {
        self.correlations
    }

    /// Full-dictionary ML search; costs `M` correlations.
    pub fn scan(&mut self) -> Detection {
        self.correlations += self.dict.size();
        let det = self.dict.detect_excluding(&self.row, &self.skipped);
        self.last_delay = Some(det.index as i64);
        det
    }

    /// Excludes a rejected seed from later scans.
    pub fn skip(&mut self, index: usize) {
        self.skipped.push(index);
    }

    /// Local search around a neighbour's index; costs `2M_s + 1`.
    pub fn extrapolate(&mut self, seed: i64, halfwidth: usize) -> i64 {
        self.correlations += 2 * halfwidth + 1;
        let idx = seed + extrapolation_step(&self.dict, &self.row, seed, halfwidth);
        self.last_delay = Some(idx);
        idx
    }

    /// Fits this subarray's gain for the broadcast geometry and cancels it.
    pub fn fit_and_cancel(
        &mut self,
        estimate: &PathParams,
        geom: &ArrayGeometry,
        grid: &SubcarrierGrid,
        power: f64,
        mode: SteeringMode,
    ) -> Result<Complex64> {
        let v = regressor_for(self.index, estimate, self.combiner.view(), geom, grid, mode);
        let g = estimate_gain_lpu(&self.row, &v, power, self.index)?;
        residual_update(&mut self.row, g, &v, power);
        self.last_gain = Some(g);
        Ok(g)
    }

    pub(crate) fn into_row(self) -> Vec<Complex64> {
        self.row
    }
}

/// Aggregation point; holds only scalars reported by the LPUs.
#[derive(Debug, Clone, Default)]
pub struct CpuState {
    pub delays: Vec<Option<i64>>,
    pub gains: Vec<Option<Complex64>>,
    pub paths: Vec<PathEstimate>,
    pub fallback: bool,
}

impl CpuState {
    pub fn new(num_lpus: usize) -> Self {
        Self {
            delays: vec![None; num_lpus],
            gains: vec![None; num_lpus],
            paths: Vec::new(),
            fallback: false,
        }
    }

    pub fn clear_iteration(&mut self) {
        self.delays.iter_mut().for_each(|d| *d = None);
        self.gains.iter_mut().for_each(|g| *g = None);
    }
}

/// True iff every LPU has reported and all reported indices coincide.
pub fn detect_fallback(cpu: &CpuState) -> bool {
    let Some(Some(first)) = cpu.delays.first() else {
        return false;
    };
    cpu.delays.iter().all(|d| *d == Some(*first))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_delays(d: &[i64]) -> CpuState {
        let mut cpu = CpuState::new(d.len());
        cpu.delays = d.iter().map(|&x| Some(x)).collect();
        cpu
    }

    #[test]
    fn fallback_predicate() {
        assert!(detect_fallback(&with_delays(&[3, 3, 3, 3])));
        assert!(!detect_fallback(&with_delays(&[3, 3, 4, 4])));
        let mut partial = with_delays(&[3, 3, 3, 3]);
        partial.delays[2] = None;
        assert!(!detect_fallback(&partial));
        assert!(!detect_fallback(&CpuState::new(4)));
    }
}
