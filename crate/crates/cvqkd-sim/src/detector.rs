//! Saturation model of a practical homodyne detector and its
//! characterization from LO-intensity sweeps.
//!
//! A real homodyne front-end is linear only on a finite range: the output
//! clamps at the rails (amplifier or DAQ limits). The model keeps a single
//! symmetric bound α, so the measured quadrature is
//!
//! ```text
//! x_sat = clamp(x_lin, −α, α)
//! ```
//!
//! In the voltage domain the detector is characterised by the linear laws
//! ⟨X⟩ = ε·I_LO (imbalance) and Var(X) = A·I_LO + B (shot + electronic
//! noise), both fitted on the linear domain of an intensity sweep. Once
//! the imbalance drives the mean into the rail, the mean plateaus and the
//! measured variance collapses.
//!
//! ```
//! use cvqkd_sim::detector::saturate;
//!
//! assert_eq!(saturate(5.0, 20.0).unwrap(), 5.0);    // interior point
//! assert_eq!(saturate(25.0, 20.0).unwrap(), 20.0);  // upper rail
//! assert_eq!(saturate(-33.0, 20.0).unwrap(), -20.0);
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::RunningMoments;
use crate::units::RngHandle;

/// Single-parameter clamp model of the detection rails.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SaturationModel {
    /// Linearity bound α (√N₀, or volts in voltage-domain use); output
    /// always lies in [−α, α].
    pub alpha: f64,
}

impl SaturationModel {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) {
            return Err(Error::Domain(format!("alpha must be > 0, got {alpha}")));
        }
        Ok(Self { alpha })
    }

    /// Clamp one sample.
    #[inline]
    pub fn apply(&self, x: f64) -> f64 {
        x.clamp(-self.alpha, self.alpha)
    }

    /// Clamp a block in place.
    pub fn apply_in_place(&self, xs: &mut [f64]) {
        for x in xs {
            *x = x.clamp(-self.alpha, self.alpha);
        }
    }
}

/// Clamp `x` to the linearity domain [−α, α]; identity on the interior.
pub fn saturate(x: f64, alpha: f64) -> Result<f64> {
    Ok(SaturationModel::new(alpha)?.apply(x))
}

/// Default DAQ rail used when the bound is not measured independently.
pub const DEFAULT_ALPHA_VOLTS: f64 = 0.5;

/// Voltage-domain characterization of a homodyne detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorCharacterization {
    /// Variance-vs-LO slope A (V²/μW), shot-noise driven.
    pub fit_slope: f64,
    /// Variance intercept B (V²), electronic noise.
    pub fit_offset: f64,
    /// Imbalance ε (V/μW): residual mean proportional to LO intensity.
    pub imbalance: f64,
    /// Saturation bound in volts.
    pub alpha_volts: f64,
    /// Upper edge of the LO domain on which the linear laws are fitted (μW).
    pub linear_lo_max: f64,
}

impl Default for DetectorCharacterization {
    /// Profile anchored to a 0.5 V DAQ rail with the mean-saturation onset
    /// ε·I = α_V at I ≈ 35 μW, i.e. ε = 1/70 V/μW. A and B keep the noise
    /// trace a few tens of mV wide so the collapse is mean-driven.
    fn default() -> Self {
        Self {
            fit_slope: 2.0e-5,
            fit_offset: 5.0e-5,
            imbalance: 1.0 / 70.0,
            alpha_volts: DEFAULT_ALPHA_VOLTS,
            linear_lo_max: 25.0,
        }
    }
}

impl DetectorCharacterization {
    pub fn validate(&self) -> Result<()> {
        if !(self.fit_slope > 0.0) {
            return Err(Error::Domain(format!(
                "fit_slope must be > 0, got {}",
                self.fit_slope
            )));
        }
        if !(self.fit_offset >= 0.0) {
            return Err(Error::Domain(format!(
                "fit_offset must be >= 0, got {}",
                self.fit_offset
            )));
        }
        if !(self.imbalance >= 0.0) {
            return Err(Error::Domain(format!(
                "imbalance must be >= 0, got {}",
                self.imbalance
            )));
        }
        if !(self.alpha_volts > 0.0) {
            return Err(Error::Domain(format!(
                "alpha_volts must be > 0, got {}",
                self.alpha_volts
            )));
        }
        Ok(())
    }

    /// LO intensity at which the mean output reaches the rail, ε·I = α_V.
    /// Infinite for a perfectly balanced detector.
    pub fn saturation_onset_uw(&self) -> f64 {
        if self.imbalance > 0.0 {
            self.alpha_volts / self.imbalance
        } else {
            f64::INFINITY
        }
    }
}

/// One measured (or simulated) point of an LO-intensity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub i_lo_uw: f64,
    pub mean_v: f64,
    pub var_v: f64,
}

/// Simulate a vacuum-input LO sweep: at each intensity draw
/// `n_per_point` samples from Normal(ε·I, A·I + B), clamp to ±α_V and
/// report the empirical mean and variance.
///
/// One RNG stream per point, so the sweep is order-independent and may
/// be evaluated concurrently; output order follows `lo_points`.
pub fn simulate_lo_sweep(
    char: &DetectorCharacterization,
    lo_points: &[f64],
    n_per_point: usize,
    handle: RngHandle,
) -> Result<Vec<SweepPoint>> {
    char.validate()?;
    if lo_points.is_empty() {
        return Err(Error::Domain("lo_points must not be empty".into()));
    }
    if lo_points.iter().any(|&i| !(i >= 0.0)) {
        return Err(Error::Domain("LO intensities must be >= 0".into()));
    }
    if n_per_point < 1_000 {
        return Err(Error::Domain(format!(
            "need n_per_point >= 1000, got {n_per_point}"
        )));
    }
    let rail = SaturationModel::new(char.alpha_volts)?;
    Ok(lo_points
        .iter()
        .enumerate()
        .map(|(k, &i_lo)| {
            let mut rng = handle.with_stream(k as u64).rng();
            let mu = char.imbalance * i_lo;
            let sigma = (char.fit_slope * i_lo + char.fit_offset).sqrt();
            let mut acc = RunningMoments::new();
            for _ in 0..n_per_point {
                let z: f64 = rng.sample(StandardNormal);
                acc.push(rail.apply(mu + sigma * z));
            }
            SweepPoint {
                i_lo_uw: i_lo,
                mean_v: acc.mean(),
                var_v: acc.variance(),
            }
        })
        .collect())
}

/// Least-squares line fits of mean and variance versus LO intensity,
/// restricted to points with `i_lo < linear_lo_max`: the mean slope is the
/// imbalance ε, the variance slope/intercept are A and B.
///
/// The rail α_V is a DAQ property fixed by calibration, not identifiable
/// from the linear domain; the returned record carries the default rail.
pub fn fit_detector(sweep: &[SweepPoint], linear_lo_max: f64) -> Result<DetectorCharacterization> {
    let pts: Vec<&SweepPoint> = sweep.iter().filter(|p| p.i_lo_uw < linear_lo_max).collect();
    if pts.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "need >= 3 sweep points below {linear_lo_max} uW, got {}",
            pts.len()
        )));
    }
    let xs: Vec<f64> = pts.iter().map(|p| p.i_lo_uw).collect();
    let means: Vec<f64> = pts.iter().map(|p| p.mean_v).collect();
    let vars: Vec<f64> = pts.iter().map(|p| p.var_v).collect();

    let (imbalance, _) = line_fit(&xs, &means)?;
    let (fit_slope, fit_offset) = line_fit(&xs, &vars)?;
    if fit_slope <= 0.0 {
        return Err(Error::FitFailure(format!(
            "fitted variance slope A = {fit_slope:.3e} is not positive"
        )));
    }
    Ok(DetectorCharacterization {
        fit_slope,
        fit_offset,
        imbalance: imbalance.max(0.0),
        alpha_volts: DEFAULT_ALPHA_VOLTS,
        linear_lo_max,
    })
}

/// Ordinary least squares for y = slope·x + intercept.
fn line_fit(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    let m = crate::numeric::BivariateMoments::from_slices(xs, ys)?;
    if m.var_x <= 0.0 {
        return Err(Error::FitFailure("degenerate abscissa in line fit".into()));
    }
    let slope = m.cov_xy / m.var_x;
    let intercept = m.mean_y - slope * m.mean_x;
    Ok((slope, intercept))
}

/// Write a sweep as CSV with header `i_lo_uw,mean_v,var_v`.
pub fn write_sweep_csv<W: std::io::Write>(w: W, sweep: &[SweepPoint]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    for p in sweep {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Read a sweep from CSV with header `i_lo_uw,mean_v,var_v`.
pub fn read_sweep_csv<R: std::io::Read>(r: R) -> Result<Vec<SweepPoint>> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut out = Vec::new();
    for rec in rdr.deserialize() {
        out.push(rec?);
    }
    Ok(out)
}
