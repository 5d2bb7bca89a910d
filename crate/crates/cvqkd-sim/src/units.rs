//! Shot-noise unit conventions, system parameter records and channel
//! geometry.
//!
//! Everything downstream works in shot-noise units: quadratures carry
//! √N₀, variances carry N₀, and N₀ ≡ 1 inside simulations. Voltage-domain
//! quantities appear only in the detector module, which is where raw
//! measurements get renormalised.
//!
//! ```
//! use cvqkd_sim::units::{transmission_from_distance, SystemParams, ChannelSpec};
//!
//! let sys = SystemParams::default();
//! let ch = ChannelSpec::from_distance(25.0, &sys).unwrap();
//! assert!((ch.transmission - 10f64.powf(-0.5)).abs() < 1e-12);
//! assert_eq!(transmission_from_distance(0.0, 0.2).unwrap(), 1.0);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Protocol and device constants, all in shot-noise units.
///
/// The default profile is the simulation set used throughout the crate:
/// η = 0.55, v_ele = 0.015 N₀, ξ_sys = 0.1 N₀, β = 0.95, 0.2 dB/km,
/// α = 20 √N₀ and V_A = 11.58 N₀ (the 25 km working point of the
/// fixed-SNR modulation schedule).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SystemParams {
    /// Alice's modulation variance V_A (N₀).
    pub v_a: f64,
    /// Bob's total optical transmission η ∈ (0, 1], detector efficiency included.
    pub eta: f64,
    /// Electronic noise variance v_ele (N₀).
    pub v_ele: f64,
    /// Technical excess noise ξ_sys (N₀), referred to the channel input.
    pub xi_sys: f64,
    /// Reconciliation efficiency β ∈ (0, 1].
    pub beta_rec: f64,
    /// Fibre attenuation (dB/km).
    pub atten_db_per_km: f64,
    /// Detector linearity bound α (√N₀).
    pub alpha: f64,
}

impl Default for SystemParams {
    fn default() -> Self {
        Self {
            v_a: 11.58,
            eta: 0.55,
            v_ele: 0.015,
            xi_sys: 0.1,
            beta_rec: 0.95,
            atten_db_per_km: 0.2,
            alpha: 20.0,
        }
    }
}

impl SystemParams {
    /// Validate the field invariants.
    pub fn validate(&self) -> Result<()> {
        if !(self.v_a > 0.0) {
            return Err(Error::Domain(format!("v_a must be > 0, got {}", self.v_a)));
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return Err(Error::Domain(format!("eta must be in (0, 1], got {}", self.eta)));
        }
        if !(self.v_ele >= 0.0) {
            return Err(Error::Domain(format!("v_ele must be >= 0, got {}", self.v_ele)));
        }
        if !(self.xi_sys >= 0.0) {
            return Err(Error::Domain(format!("xi_sys must be >= 0, got {}", self.xi_sys)));
        }
        if !(self.beta_rec > 0.0 && self.beta_rec <= 1.0) {
            return Err(Error::Domain(format!(
                "beta_rec must be in (0, 1], got {}",
                self.beta_rec
            )));
        }
        if !(self.alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be > 0, got {}", self.alpha)));
        }
        if !(self.atten_db_per_km >= 0.0) {
            return Err(Error::Domain(format!(
                "atten_db_per_km must be >= 0, got {}",
                self.atten_db_per_km
            )));
        }
        Ok(())
    }
}

/// A fibre span: its length and the derived intensity transmission.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChannelSpec {
    pub distance_km: f64,
    /// T = 10^(−a·L/10), in (0, 1] for finite length.
    pub transmission: f64,
}

impl ChannelSpec {
    /// Build a channel from a length using the system's attenuation.
    pub fn from_distance(distance_km: f64, sys: &SystemParams) -> Result<Self> {
        let transmission = transmission_from_distance(distance_km, sys.atten_db_per_km)?;
        Ok(Self {
            distance_km,
            transmission,
        })
    }

    /// Amplitude transmission t = √(ηT) seen by a quadrature.
    pub fn amplitude_through(&self, sys: &SystemParams) -> f64 {
        (sys.eta * self.transmission).sqrt()
    }
}

/// Intensity transmission of a fibre of length `distance_km` with
/// attenuation `atten` dB/km: T = 10^(−a·L/10).
pub fn transmission_from_distance(distance_km: f64, atten: f64) -> Result<f64> {
    if !(distance_km >= 0.0) {
        return Err(Error::Domain(format!(
            "distance must be >= 0 km, got {distance_km}"
        )));
    }
    if !(atten >= 0.0) {
        return Err(Error::Domain(format!(
            "attenuation must be >= 0 dB/km, got {atten}"
        )));
    }
    Ok(10f64.powf(-atten * distance_km / 10.0))
}

/// Renormalise a voltage-domain measurement into √N₀ units given the
/// calibrated shot-noise variance in V²: x = v / √N₀,ᵥ.
pub fn normalize_to_snu(value_volts: f64, n0_volts_sq: f64) -> Result<f64> {
    if !(n0_volts_sq > 0.0) {
        return Err(Error::Domain(format!(
            "shot noise variance must be > 0 V^2, got {n0_volts_sq}"
        )));
    }
    Ok(value_volts / n0_volts_sq.sqrt())
}

/// A reproducible random stream: `(seed, stream)` pins the sample
/// sequence within one build; distinct streams are independent.
///
/// Streams partition Monte Carlo work: one stream per worker or chunk,
/// no shared mutable state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngHandle {
    pub seed: u64,
    pub stream: u64,
}

impl RngHandle {
    pub fn new(seed: u64) -> Self {
        Self { seed, stream: 0 }
    }

    pub fn with_stream(self, stream: u64) -> Self {
        Self { stream, ..self }
    }

    /// Instantiate the generator for this handle.
    pub fn rng(&self) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}
