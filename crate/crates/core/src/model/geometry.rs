//! Array and subcarrier geometry.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum (m/s).
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Centred offset `i - (total + 1) / 2` of the 1-based index `i`.
pub fn index_offset(i: usize, total: usize) -> Result<f64> {
    if i == 0 || i > total {
        return Err(Error::IndexOutOfRange { index: i, total });
    }
    Ok(i as f64 - (total as f64 + 1.0) / 2.0)
}

/// Centred offset of the 0-based index `i0`; callers guarantee `i0 < total`.
#[inline]
pub(crate) fn centered(i0: usize, total: usize) -> f64 {
    i0 as f64 - (total as f64 - 1.0) / 2.0
}

/// Subarray-partitioned uniform linear array.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayGeometry {
    num_antennas: usize,
    num_subarrays: usize,
    spacing_m: f64,
    carrier_hz: f64,
    speed_of_light: f64,
}

impl ArrayGeometry {
    /// Half-wavelength spaced array with `num_antennas` elements split into
    /// `num_subarrays` equal subarrays.
    pub fn new(num_antennas: usize, num_subarrays: usize, carrier_hz: f64) -> Result<Self> {
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return Err(Error::Geometry(format!(
                "carrier frequency {carrier_hz} must be positive"
            )));
        }
        Self::with_spacing(
            num_antennas,
            num_subarrays,
            carrier_hz,
            SPEED_OF_LIGHT / (2.0 * carrier_hz),
        )
    }

    pub fn with_spacing(
        num_antennas: usize,
        num_subarrays: usize,
        carrier_hz: f64,
        spacing_m: f64,
    ) -> Result<Self> {
        if num_antennas == 0 || num_subarrays == 0 {
            return Err(Error::Geometry(
                "antenna and subarray counts must be positive".into(),
            ));
        }
        if num_antennas % num_subarrays != 0 {
            return Err(Error::Geometry(format!(
                "{num_subarrays} subarrays do not divide {num_antennas} antennas"
            )));
        }
        if !(spacing_m > 0.0 && spacing_m.is_finite()) {
            return Err(Error::Geometry(format!(
                "element spacing {spacing_m} must be positive"
            )));
        }
        if !(carrier_hz > 0.0 && carrier_hz.is_finite()) {
            return Err(Error::Geometry(format!(
                "carrier frequency {carrier_hz} must be positive"
            )));
        }
        Ok(Self {
            num_antennas,
            num_subarrays,
            spacing_m,
            carrier_hz,
            speed_of_light: SPEED_OF_LIGHT,
        })
    }

    /// Override the propagation speed (tests use round numbers).
    pub fn with_speed_of_light(mut self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::Geometry(format!(
                "speed of light {c} must be positive"
            )));
        }
        self.speed_of_light = c;
        Ok(self)
    }

    /// The estimator pairs subarray `k` with `K - k + 1` and `K/2 + k`.
    pub fn ensure_even_subarrays(&self) -> Result<()> {
        if self.num_subarrays % 2 != 0 {
            return Err(Error::Geometry(format!(
                "estimation requires an even number of subarrays, got {}",
                self.num_subarrays
            )));
        }
        Ok(())
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_subarrays(&self) -> usize {
        self.num_subarrays
    }

    pub fn antennas_per_subarray(&self) -> usize {
        self.num_antennas / self.num_subarrays
    }

    pub fn spacing(&self) -> f64 {
        self.spacing_m
    }

    pub fn carrier_hz(&self) -> f64 {
        self.carrier_hz
    }

    pub fn speed_of_light(&self) -> f64 {
        self.speed_of_light
    }

    pub fn wavelength(&self) -> f64 {
        self.speed_of_light / self.carrier_hz
    }

    /// Distance between adjacent subarray centres, `N_s * s`.
    pub fn subarray_pitch(&self) -> f64 {
        self.antennas_per_subarray() as f64 * self.spacing_m
    }

    /// `δ_{N,n}` for the 0-based antenna index.
    pub fn antenna_offset(&self, n0: usize) -> f64 {
        centered(n0, self.num_antennas)
    }

    /// `δ_{K,k}` for the 0-based subarray index.
    pub fn subarray_offset(&self, k0: usize) -> f64 {
        centered(k0, self.num_subarrays)
    }

    /// 0-based index of the reference subarray, `⌊(K+1)/2⌋ - 1`.
    pub fn central_subarray(&self) -> usize {
        (self.num_subarrays + 1) / 2 - 1
    }

    /// Largest `|δ_{N,n}| * s`, i.e. half the aperture between edge elements.
    pub fn max_antenna_displacement(&self) -> f64 {
        (self.num_antennas as f64 - 1.0) / 2.0 * self.spacing_m
    }
}

/// OFDM subcarrier layout around the carrier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubcarrierGrid {
    num_subcarriers: usize,
    spacing_hz: f64,
}

impl SubcarrierGrid {
    pub fn new(num_subcarriers: usize, spacing_hz: f64) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::Geometry(
                "at least one subcarrier is required".into(),
            ));
        }
        if !(spacing_hz > 0.0 && spacing_hz.is_finite()) {
            return Err(Error::Geometry(format!(
                "subcarrier spacing {spacing_hz} must be positive"
            )));
        }
        Ok(Self {
            num_subcarriers,
            spacing_hz,
        })
    }

    pub fn from_bandwidth(num_subcarriers: usize, bandwidth_hz: f64) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::Geometry(
                "at least one subcarrier is required".into(),
            ));
        }
        Self::new(num_subcarriers, bandwidth_hz / num_subcarriers as f64)
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn spacing_hz(&self) -> f64 {
        self.spacing_hz
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.num_subcarriers as f64 * self.spacing_hz
    }

    /// `δ_{M,m}` for the 0-based subcarrier index.
    pub fn subcarrier_offset(&self, m0: usize) -> f64 {
        centered(m0, self.num_subcarriers)
    }

    pub fn offsets(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.num_subcarriers).map(move |m| self.subcarrier_offset(m))
    }

    /// Absolute frequency of the 0-based subcarrier.
    pub fn frequency(&self, carrier_hz: f64, m0: usize) -> f64 {
        carrier_hz + self.subcarrier_offset(m0) * self.spacing_hz
    }

    /// Normalised delay `(Δf / c) * distance`.
    pub fn normalized_delay(&self, distance_m: f64, c: f64) -> f64 {
        self.spacing_hz / c * distance_m
    }

    /// Distance spanned by one delay bin, `c / (M Δf)`.
    pub fn delay_resolution_m(&self, c: f64) -> f64 {
        c / (self.num_subcarriers as f64 * self.spacing_hz)
    }
}
