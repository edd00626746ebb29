//! TOML simulation configuration. Physical quantities carry their unit in
//! the key name; defaults reproduce the full-scale ULA setting.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::bounds::resolution_predicate;
use crate::error::{Error, Result};
use crate::estimator::{search_halfwidth, stopping_threshold, DpsConfig, Reconstruction};
use crate::harness::baselines::OmpConfig;
use crate::model::{ArrayGeometry, Impairments, PathParams, SubcarrierGrid};
use num_complex::Complex64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Dps,
    /// The same estimator run through the LPU/CPU message runtime.
    DpsDistributed,
    Ls,
    Omp,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Dps => "dps",
            Algorithm::DpsDistributed => "dps_distributed",
            Algorithm::Ls => "ls",
            Algorithm::Omp => "omp",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "dps" => Ok(Algorithm::Dps),
            "dps_distributed" => Ok(Algorithm::DpsDistributed),
            "ls" => Ok(Algorithm::Ls),
            "omp" => Ok(Algorithm::Omp),
            _ => Err(Error::Config(format!(
                "unknown algorithm `{s}` (expected dps, dps_distributed, ls, omp)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub num_antennas: usize,
    pub num_subarrays: usize,
    pub carrier_hz: f64,
    /// Half a carrier wavelength when absent.
    pub spacing_m: Option<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            num_antennas: 1024,
            num_subarrays: 256,
            carrier_hz: 7e9,
            spacing_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub num_subcarriers: usize,
    /// Exactly one of bandwidth and spacing must be given.
    pub bandwidth_hz: Option<f64>,
    pub spacing_hz: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            num_subcarriers: 1024,
            bandwidth_hz: Some(600e6),
            spacing_hz: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExplicitPath {
    pub angle_sine: f64,
    pub distance_m: f64,
    pub range_m: f64,
    #[serde(default = "one")]
    pub gain_re: f64,
    #[serde(default)]
    pub gain_im: f64,
}

fn one() -> f64 {
    1.0
}

impl ExplicitPath {
    pub fn params(&self) -> PathParams {
        PathParams::new(
            Complex64::new(self.gain_re, self.gain_im),
            self.angle_sine,
            self.distance_m,
            self.range_m,
        )
    }

    pub fn from_params(p: &PathParams) -> Self {
        Self {
            angle_sine: p.angle_sine,
            distance_m: p.distance_m,
            range_m: p.range_m,
            gain_re: p.gain.re,
            gain_im: p.gain.im,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub count: usize,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub range_min_m: f64,
    pub range_max_m: f64,
    pub angle_sine_min: f64,
    pub angle_sine_max: f64,
    /// Redraw path sets that violate the delay resolution predicate.
    pub resolvable: bool,
    /// Fixed paths; when non-empty they replace the random draw.
    pub explicit: Vec<ExplicitPath>,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            count: 4,
            distance_min_m: 10.0,
            distance_max_m: 20.0,
            range_min_m: 10.0,
            range_max_m: 20.0,
            angle_sine_min: -1.0,
            angle_sine_max: 1.0,
            resolvable: true,
            explicit: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub power_w: f64,
    pub false_alarm_rate: f64,
    pub algorithms: Vec<Algorithm>,
    pub output: Option<PathBuf>,
    pub trace: bool,
    /// Record wall-clock time per cell. Off by default so that identical
    /// configs give identical CSV bytes.
    pub timing: bool,
    /// Hand flat delay tracks to the polar-grid OMP.
    pub fallback: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            snr_db: vec![10.0],
            trials: 10,
            seed: 0,
            power_w: 1.0,
            false_alarm_rate: 1e-3,
            algorithms: vec![Algorithm::Dps],
            output: None,
            trace: false,
            timing: false,
            fallback: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub geometry: GeometryConfig,
    pub grid: GridConfig,
    pub paths: PathConfig,
    pub run: RunConfig,
    pub estimator: DpsConfig,
    pub reconstruction: Reconstruction,
    pub omp: OmpConfig,
    pub impairments: Option<Impairments>,
}

/// Quantities implied by a configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derived {
    pub antennas_per_subarray: usize,
    pub spacing_m: f64,
    pub subcarrier_spacing_hz: f64,
    pub bandwidth_hz: f64,
    pub search_halfwidth: usize,
    /// `ς / σ²`.
    pub threshold_per_noise: f64,
    pub delay_resolution_m: f64,
}

impl SimConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: SimConfig =
            toml::from_str(s).map_err(|e| Error::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn geometry(&self) -> Result<ArrayGeometry> {
        let g = &self.geometry;
        match g.spacing_m {
            Some(s) => {
                ArrayGeometry::with_spacing(g.num_antennas, g.num_subarrays, g.carrier_hz, s)
            }
            None => ArrayGeometry::new(g.num_antennas, g.num_subarrays, g.carrier_hz),
        }
    }

    pub fn grid(&self) -> Result<SubcarrierGrid> {
        let g = &self.grid;
        match (g.bandwidth_hz, g.spacing_hz) {
            (Some(b), None) => SubcarrierGrid::from_bandwidth(g.num_subcarriers, b),
            (None, Some(df)) => SubcarrierGrid::new(g.num_subcarriers, df),
            _ => Err(Error::Config(
                "grid: set exactly one of bandwidth_hz and spacing_hz".into(),
            )),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let geom = self.geometry()?;
        geom.ensure_even_subarrays()?;
        let grid = self.grid()?;
        if grid.num_subcarriers() < 2 {
            return Err(Error::Config(
                "grid.num_subcarriers must be at least 2".into(),
            ));
        }
        let p = &self.paths;
        if !(p.distance_min_m > 0.0 && p.distance_min_m <= p.distance_max_m) {
            return Err(Error::Config(format!(
                "paths: need 0 < distance_min_m <= distance_max_m, got [{}, {}]",
                p.distance_min_m, p.distance_max_m
            )));
        }
        if !(p.range_min_m >= 0.0 && p.range_min_m <= p.range_max_m) {
            return Err(Error::Config(format!(
                "paths: need 0 <= range_min_m <= range_max_m, got [{}, {}]",
                p.range_min_m, p.range_max_m
            )));
        }
        if !(-1.0 <= p.angle_sine_min
            && p.angle_sine_min <= p.angle_sine_max
            && p.angle_sine_max <= 1.0)
        {
            return Err(Error::Config(format!(
                "paths: need -1 <= angle_sine_min <= angle_sine_max <= 1, got [{}, {}]",
                p.angle_sine_min, p.angle_sine_max
            )));
        }
        for (i, e) in p.explicit.iter().enumerate() {
            e.params()
                .validate(&geom, &grid)
                .map_err(|err| Error::Config(format!("paths.explicit[{i}]: {err}")))?;
        }
        let r = &self.run;
        if r.snr_db.is_empty() || r.snr_db.iter().any(|s| !s.is_finite()) {
            return Err(Error::Config(
                "run.snr_db must be a non-empty list of finite values".into(),
            ));
        }
        if r.snr_db.len() > u16::MAX as usize - 2 {
            return Err(Error::Config("run.snr_db has too many points".into()));
        }
        if !(r.power_w > 0.0 && r.power_w.is_finite()) {
            return Err(Error::Config(format!(
                "run.power_w must be positive, got {}",
                r.power_w
            )));
        }
        if !(r.false_alarm_rate > 0.0 && r.false_alarm_rate < 1.0) {
            return Err(Error::Config(format!(
                "run.false_alarm_rate must lie in (0, 1), got {}",
                r.false_alarm_rate
            )));
        }
        if r.algorithms.is_empty() {
            return Err(Error::Config("run.algorithms is empty".into()));
        }
        if let Some(imp) = &self.impairments {
            imp.validate(geom.num_subarrays())
                .map_err(|e| Error::Config(format!("impairments: {e}")))?;
        }
        Ok(())
    }

    pub fn derived(&self) -> Result<Derived> {
        let geom = self.geometry()?;
        let grid = self.grid()?;
        Ok(Derived {
            antennas_per_subarray: geom.antennas_per_subarray(),
            spacing_m: geom.spacing(),
            subcarrier_spacing_hz: grid.spacing_hz(),
            bandwidth_hz: grid.bandwidth_hz(),
            search_halfwidth: self
                .estimator
                .search_halfwidth
                .unwrap_or_else(|| search_halfwidth(&geom, &grid)),
            threshold_per_noise: stopping_threshold(
                1.0,
                grid.num_subcarriers(),
                self.run.false_alarm_rate,
            )?,
            delay_resolution_m: grid.delay_resolution_m(geom.speed_of_light()),
        })
    }

    /// Number of paths per trial.
    pub fn path_count(&self) -> usize {
        if self.paths.explicit.is_empty() {
            self.paths.count
        } else {
            self.paths.explicit.len()
        }
    }
}

const MAX_DRAWS: usize = 10_000;

/// Draws one path set: uniform `θ, d, r`, `CN(0, 1)` gains, redrawn until
/// every path is valid and, if requested, all pairs are resolvable.
pub fn draw_paths<R: Rng + ?Sized>(
    cfg: &SimConfig,
    geom: &ArrayGeometry,
    grid: &SubcarrierGrid,
    rng: &mut R,
) -> Result<Vec<PathParams>> {
    let p = &cfg.paths;
    if !p.explicit.is_empty() {
        return Ok(p.explicit.iter().map(ExplicitPath::params).collect());
    }
    let c = geom.speed_of_light();
    let uniform = |rng: &mut R, lo: f64, hi: f64| {
        if lo == hi {
            lo
        } else {
            rng.random_range(lo..hi)
        }
    };
    'attempt: for _ in 0..MAX_DRAWS {
        let mut paths: Vec<PathParams> = Vec::with_capacity(p.count);
        for _ in 0..p.count {
            let angle = uniform(rng, p.angle_sine_min, p.angle_sine_max);
            let distance = uniform(rng, p.distance_min_m, p.distance_max_m);
            let range = uniform(rng, p.range_min_m, p.range_max_m);
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let path = PathParams::new(
                Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2,
                angle,
                distance,
                range,
            );
            if path.validate(geom, grid).is_err() {
                continue 'attempt;
            }
            if p.resolvable
                && paths
                    .iter()
                    .any(|q| !resolution_predicate(q, &path, grid, c).resolvable)
            {
                continue 'attempt;
            }
            paths.push(path);
        }
        return Ok(paths);
    }
    Err(Error::Config(format!(
        "could not draw {} valid{} paths in {MAX_DRAWS} attempts",
        p.count,
        if p.resolvable { " resolvable" } else { "" }
    )))
}
