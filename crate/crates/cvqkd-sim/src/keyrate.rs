//! Collective-attack secret key rate R = β·I_AB − χ_BE for the
//! Gaussian-modulated coherent-state protocol with homodyne detection and
//! reverse reconciliation, in the realistic model (detector noise trusted,
//! i.e. not attributed to the eavesdropper).
//!
//! The Holevo bound is the standard closed form built from the symplectic
//! spectra of the joint state before and after Bob's measurement. Because
//! the null-key thresholds downstream hinge on this choice, the closed
//! form is verified against a generic covariance-matrix oracle
//! ([`crate::symplectic`]) rather than trusted.
//!
//! ```
//! use cvqkd_sim::keyrate::{key_rate, null_key_threshold, system_at_distance};
//! use cvqkd_sim::units::SystemParams;
//!
//! let sys = system_at_distance(&SystemParams::default(), 25.0, None).unwrap();
//! let report = key_rate(&sys, 10f64.powf(-0.5), 0.1).unwrap();
//! assert!(report.rate > 0.0);
//! // an intercept-resend attack adds two shot-noise units: no key survives
//! let broken = key_rate(&sys, 10f64.powf(-0.5), 2.1).unwrap();
//! assert!(broken.rate < 0.0);
//! let xi_null = null_key_threshold(&sys, 25.0).unwrap();
//! assert!(xi_null > 0.0 && xi_null < 2.0);
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, BisectOptions};
use crate::units::{transmission_from_distance, ChannelSpec, SystemParams};

/// Modulation variance anchor: the 25 km working point of the fixed-SNR
/// schedule.
pub const VA_ANCHOR: f64 = 11.58;
pub const VA_ANCHOR_DISTANCE_KM: f64 = 25.0;

/// Key-rate summary for one (distance, ξ) point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateReport {
    /// Mutual information I_AB (bits/pulse).
    pub i_ab: f64,
    /// Holevo bound χ_BE (bits/pulse).
    pub chi_be: f64,
    /// R = β·I_AB − χ_BE (bits/pulse).
    pub rate: f64,
    /// Signal-to-noise ratio at Bob.
    pub snr: f64,
}

/// Channel- and detector-added noises referred to the channel input;
/// standard bookkeeping for the realistic-model bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseDecomposition {
    /// χ_line = 1/T − 1 + ξ.
    pub chi_line: f64,
    /// χ_hom = (1 + v_ele)/η − 1.
    pub chi_hom: f64,
    /// χ_tot = χ_line + χ_hom/T.
    pub chi_tot: f64,
}

impl NoiseDecomposition {
    pub fn new(sys: &SystemParams, transmission: f64, xi: f64) -> Self {
        let chi_line = 1.0 / transmission - 1.0 + xi;
        let chi_hom = (1.0 + sys.v_ele) / sys.eta - 1.0;
        Self {
            chi_line,
            chi_hom,
            chi_tot: chi_line + chi_hom / transmission,
        }
    }
}

/// g((λ−1)/2) piece of the von Neumann entropy of a thermal mode:
/// G(x) = (x+1)·log₂(x+1) − x·log₂(x), with G(0) = 0.
pub fn holevo_g(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (x + 1.0) * (x + 1.0).log2() - x * x.log2()
    }
}

fn check_params(sys: &SystemParams, transmission: f64, xi: f64) -> Result<()> {
    sys.validate()?;
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(Error::Domain(format!(
            "transmission must be in (0, 1], got {transmission}"
        )));
    }
    if !(xi >= 0.0) {
        return Err(Error::Domain(format!("xi must be >= 0, got {xi}")));
    }
    Ok(())
}

/// Shannon mutual information of the homodyne channel:
/// I_AB = ½·log₂(1 + SNR), SNR = ηT·V_A / (1 + ηTξ + v_ele).
pub fn mutual_information(sys: &SystemParams, transmission: f64, xi: f64) -> Result<f64> {
    check_params(sys, transmission, xi)?;
    Ok(0.5 * (1.0 + snr(sys, transmission, xi)).log2())
}

/// Signal-to-noise ratio at Bob.
pub fn snr(sys: &SystemParams, transmission: f64, xi: f64) -> f64 {
    let et = sys.eta * transmission;
    et * sys.v_a / (1.0 + et * xi + sys.v_ele)
}

fn lambda_from_squared(l2: f64, label: &str) -> Result<f64> {
    let l = l2.max(0.0).sqrt();
    if l < 1.0 - 1e-9 {
        return Err(Error::NumericDomain(format!(
            "symplectic eigenvalue {label} = {l} below 1: covariance matrix not physical"
        )));
    }
    Ok(l.max(1.0))
}

/// Symplectic spectrum {λ₁, λ₂, λ₃, λ₄} of the realistic-model bound.
pub fn holevo_spectrum(
    sys: &SystemParams,
    transmission: f64,
    xi: f64,
) -> Result<(f64, f64, f64, f64)> {
    let t = transmission;
    let v = sys.v_a + 1.0;
    let nd = NoiseDecomposition::new(sys, t, xi);

    // A₁ = V²(1−2T) + 2T + T²(V+χ_line)², written in the cancellation-free
    // form (V − T(V+χ_line))² + 2T(1 + Vχ_line) so the lossless noiseless
    // point gives λ = 1 exactly.
    let a1 = {
        let d = v - t * (v + nd.chi_line);
        d * d + 2.0 * t * (1.0 + v * nd.chi_line)
    };
    let b1 = {
        let r = t * (v * nd.chi_line + 1.0);
        r * r
    };
    let disc1 = (a1 * a1 - 4.0 * b1).max(0.0).sqrt();
    let l1 = lambda_from_squared(0.5 * (a1 + disc1), "lambda1")?;
    let l2 = lambda_from_squared(0.5 * (a1 - disc1), "lambda2")?;

    let sqrt_b1 = b1.sqrt();
    let denom = t * (v + nd.chi_tot);
    let c1 = (a1 * nd.chi_hom + v * sqrt_b1 + t * (v + nd.chi_line)) / denom;
    let d1 = sqrt_b1 * (v + sqrt_b1 * nd.chi_hom) / denom;
    let disc2 = (c1 * c1 - 4.0 * d1).max(0.0).sqrt();
    let l3 = lambda_from_squared(0.5 * (c1 + disc2), "lambda3")?;
    let l4 = lambda_from_squared(0.5 * (c1 - disc2), "lambda4")?;
    Ok((l1, l2, l3, l4))
}

/// Holevo bound χ_BE on Eve's information about Bob's outcomes.
pub fn holevo_bound(sys: &SystemParams, transmission: f64, xi: f64) -> Result<f64> {
    check_params(sys, transmission, xi)?;
    let (l1, l2, l3, l4) = holevo_spectrum(sys, transmission, xi)?;
    Ok(holevo_g((l1 - 1.0) / 2.0) + holevo_g((l2 - 1.0) / 2.0)
        - holevo_g((l3 - 1.0) / 2.0)
        - holevo_g((l4 - 1.0) / 2.0))
}

/// R = β·I_AB − χ_BE.
pub fn key_rate(sys: &SystemParams, transmission: f64, xi: f64) -> Result<KeyRateReport> {
    let i_ab = mutual_information(sys, transmission, xi)?;
    let chi_be = holevo_bound(sys, transmission, xi)?;
    Ok(KeyRateReport {
        i_ab,
        chi_be,
        rate: sys.beta_rec * i_ab - chi_be,
        snr: snr(sys, transmission, xi),
    })
}

/// Excess noise at which the key rate crosses zero for this distance,
/// found by bisection on ξ ∈ (0, 2.5] to 10⁻⁶. Uses the modulation
/// variance carried by `sys` (set it from the schedule first, e.g. via
/// [`system_at_distance`]).
pub fn null_key_threshold(sys: &SystemParams, distance_km: f64) -> Result<f64> {
    let t = transmission_from_distance(distance_km, sys.atten_db_per_km)?;
    let r0 = key_rate(sys, t, 1e-12)?.rate;
    if r0 <= 0.0 {
        return Err(Error::Infeasible(format!(
            "no positive key rate at xi = 0 for {distance_km} km (R = {r0:.4e})"
        )));
    }
    let hi = 2.5;
    let r_hi = key_rate(sys, t, hi)?.rate;
    if r_hi >= 0.0 {
        return Err(Error::NumericDomain(format!(
            "key rate still positive at xi = {hi}; threshold out of range"
        )));
    }
    bisect(
        |xi| key_rate(sys, t, xi).map(|r| r.rate).unwrap_or(f64::NAN),
        1e-12,
        hi,
        BisectOptions {
            x_abs_tol: 1e-9,
            ..Default::default()
        },
    )
}

/// Fixed-SNR modulation schedule: V_A = SNR·(1 + ηT·ξ_sys + v_ele)/(ηT).
pub fn optimize_va(sys: &SystemParams, distance_km: f64, target_snr: f64) -> Result<f64> {
    if !(target_snr > 0.0) {
        return Err(Error::Domain(format!(
            "target SNR must be > 0, got {target_snr}"
        )));
    }
    let t = transmission_from_distance(distance_km, sys.atten_db_per_km)?;
    let et = sys.eta * t;
    Ok(target_snr * (1.0 + et * sys.xi_sys + sys.v_ele) / et)
}

/// The working SNR implied by the V_A = 11.58 anchor at 25 km.
pub fn default_target_snr(sys: &SystemParams) -> f64 {
    let t = transmission_from_distance(VA_ANCHOR_DISTANCE_KM, sys.atten_db_per_km)
        .expect("anchor distance is valid");
    let et = sys.eta * t;
    VA_ANCHOR * et / (1.0 + et * sys.xi_sys + sys.v_ele)
}

/// Copy of `sys` with the modulation variance set by the schedule for
/// `distance_km`. `target_snr = None` uses the anchored default.
pub fn system_at_distance(
    sys: &SystemParams,
    distance_km: f64,
    target_snr: Option<f64>,
) -> Result<SystemParams> {
    let snr = target_snr.unwrap_or_else(|| default_target_snr(sys));
    Ok(SystemParams {
        v_a: optimize_va(sys, distance_km, snr)?,
        ..*sys
    })
}

/// Channel for `sys` at a distance (convenience for sweep loops).
pub fn channel_at(sys: &SystemParams, distance_km: f64) -> Result<ChannelSpec> {
    ChannelSpec::from_distance(distance_km, sys)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symplectic::chi_be_oracle;

    #[test]
    fn mutual_information_snr_points() {
        // SNR = 1 -> 0.5 bits; SNR = 3 -> 1.0 bits
        let sys1 = SystemParams {
            v_a: 1.0,
            eta: 1.0,
            v_ele: 0.0,
            xi_sys: 0.0,
            ..Default::default()
        };
        assert!((mutual_information(&sys1, 1.0, 0.0).unwrap() - 0.5).abs() < 1e-15);
        let sys3 = SystemParams { v_a: 3.0, ..sys1 };
        assert!((mutual_information(&sys3, 1.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn mutual_information_matches_quadrature_oracle() {
        // differential-entropy quadrature: I = h(X_B) − ½log₂(2πe·σ_N²)
        let sys = system_at_distance(&SystemParams::default(), 25.0, None).unwrap();
        let t = 10f64.powf(-0.5);
        let i_closed = mutual_information(&sys, t, 0.1).unwrap();
        let i_numeric = gauss_hermite_mutual_information(&sys, t, 0.1);
        assert!(
            (i_closed - i_numeric).abs() < 1e-9,
            "{i_closed} vs {i_numeric}"
        );
    }

    /// Test-only numeric oracle: h(X_B) by 80-point Gauss–Hermite
    /// quadrature over the two independent Gaussian inputs.
    fn gauss_hermite_mutual_information(sys: &SystemParams, transmission: f64, xi: f64) -> f64 {
        let (nodes, weights) = gauss_hermite(80);
        let et = sys.eta * transmission;
        let tamp = et.sqrt();
        let sa = sys.v_a.sqrt();
        let sn2 = 1.0 + et * xi + sys.v_ele;
        let sn = sn2.sqrt();
        let vb = et * sys.v_a + sn2;
        let ln2 = std::f64::consts::LN_2;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        // h(X_B) = −E log p_B(X_B), X_B = t·σa·√2·u + σn·√2·v with (u, v) GH nodes
        let mut h_b = 0.0;
        for (&xu, &wu) in nodes.iter().zip(&weights) {
            for (&xv, &wv) in nodes.iter().zip(&weights) {
                let xb = tamp * sa * std::f64::consts::SQRT_2 * xu
                    + sn * std::f64::consts::SQRT_2 * xv;
                let log_pb = -0.5 * xb * xb / vb
                    - 0.5 * (2.0 * std::f64::consts::PI * vb).ln();
                h_b += wu * wv * inv_sqrt_pi * inv_sqrt_pi * (-log_pb);
            }
        }
        let h_cond = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * sn2).ln();
        (h_b - h_cond) / ln2
    }

    /// Gauss–Hermite nodes/weights via the Golub–Welsch tridiagonal.
    fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
        use nalgebra::{DMatrix, SymmetricEigen};
        let mut j = DMatrix::<f64>::zeros(n, n);
        for i in 1..n {
            let b = (i as f64 / 2.0).sqrt();
            j[(i - 1, i)] = b;
            j[(i, i - 1)] = b;
        }
        let eig = SymmetricEigen::new(j);
        let mut pairs: Vec<(f64, f64)> = (0..n)
            .map(|k| {
                let node = eig.eigenvalues[k];
                let w = std::f64::consts::PI.sqrt() * eig.eigenvectors[(0, k)].powi(2);
                (node, w)
            })
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        pairs.into_iter().unzip()
    }

    #[test]
    fn holevo_zero_at_lossless_noiseless_point() {
        let sys = SystemParams {
            eta: 1.0,
            v_ele: 0.0,
            ..Default::default()
        };
        let chi = holevo_bound(&sys, 1.0, 0.0).unwrap();
        assert_eq!(chi, 0.0);
    }

    #[test]
    fn holevo_matches_symplectic_oracle_on_grid() {
        let base = SystemParams::default();
        let mut worst: f64 = 0.0;
        for &d in &[1.0, 5.0, 15.0, 25.0, 50.0] {
            let sys = system_at_distance(&base, d, None).unwrap();
            let t = transmission_from_distance(d, base.atten_db_per_km).unwrap();
            for &xi in &[0.0, 0.05, 0.1, 0.5, 2.0] {
                let closed = holevo_bound(&sys, t, xi).unwrap();
                let oracle = chi_be_oracle(&sys, t, xi).unwrap();
                worst = worst.max((closed - oracle).abs());
            }
        }
        assert!(worst < 1e-8, "worst |closed - oracle| = {worst:.3e}");
    }

    #[test]
    fn intercept_resend_noise_kills_the_key() {
        let base = SystemParams::default();
        for &d in &[5.0, 25.0, 50.0] {
            let sys = system_at_distance(&base, d, None).unwrap();
            let t = transmission_from_distance(d, base.atten_db_per_km).unwrap();
            assert!(key_rate(&sys, t, 2.1).unwrap().rate < 0.0, "at {d} km");
        }
    }

    #[test]
    fn rate_decreases_with_excess_noise() {
        let base = SystemParams::default();
        for &d in &[1.0, 10.0, 25.0, 40.0, 60.0] {
            let sys = system_at_distance(&base, d, None).unwrap();
            let t = transmission_from_distance(d, base.atten_db_per_km).unwrap();
            let mut prev = f64::INFINITY;
            for k in 0..=10 {
                let xi = 2.5 * k as f64 / 10.0;
                let r = key_rate(&sys, t, xi).unwrap().rate;
                assert!(r < prev, "xi = {xi}, d = {d}");
                prev = r;
            }
        }
    }

    #[test]
    fn null_threshold_is_a_root_and_below_two() {
        let base = SystemParams::default();
        for &d in &[5.0, 25.0, 31.0, 50.0] {
            let sys = system_at_distance(&base, d, None).unwrap();
            let t = transmission_from_distance(d, base.atten_db_per_km).unwrap();
            let xi_null = null_key_threshold(&sys, d).unwrap();
            let r = key_rate(&sys, t, xi_null).unwrap().rate;
            assert!(r.abs() < 1e-6, "R(xi_null) = {r:.2e} at {d} km");
            assert!(xi_null < 2.0);
        }
    }

    #[test]
    fn va_schedule_algebra_and_anchor() {
        // target_snr = 2 with etaT = 0.5 and no noise -> V_A = 4
        let sys = SystemParams {
            eta: 0.5,
            v_ele: 0.0,
            xi_sys: 0.0,
            ..Default::default()
        };
        assert!((optimize_va(&sys, 0.0, 2.0).unwrap() - 4.0).abs() < 1e-12);

        // the anchored default reproduces V_A = 11.58 at 25 km
        let base = SystemParams::default();
        let snr0 = default_target_snr(&base);
        assert!((optimize_va(&base, 25.0, snr0).unwrap() - VA_ANCHOR).abs() < 1e-9);

        // V_A grows with distance at fixed SNR
        let mut prev = 0.0;
        for &d in &[1.0, 10.0, 25.0, 50.0, 80.0] {
            let va = optimize_va(&base, d, snr0).unwrap();
            assert!(va > prev);
            prev = va;
        }
    }

    #[test]
    fn holevo_g_nonnegative() {
        assert_eq!(holevo_g(0.0), 0.0);
        for k in 0..=1000 {
            let x = k as f64 * 0.01;
            assert!(holevo_g(x) >= 0.0);
        }
    }

    #[test]
    fn chi_be_nonnegative_on_grid() {
        let base = SystemParams::default();
        for &d in &[1.0, 25.0, 60.0] {
            let sys = system_at_distance(&base, d, None).unwrap();
            let t = transmission_from_distance(d, base.atten_db_per_km).unwrap();
            for &xi in &[0.0, 0.3, 1.0, 2.4] {
                assert!(holevo_bound(&sys, t, xi).unwrap() >= 0.0);
            }
        }
    }
}
