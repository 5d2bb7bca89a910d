//! The honest protocol path: Alice's Gaussian modulation, the linear
//! Gaussian channel, shot-noise calibration and covariance-based
//! parameter estimation.
//!
//! The channel model is `X_B = t·X_A + X_N` with `t = √(ηT)` and total
//! noise `X_N ~ Normal(0, 1 + ηTξ + v_ele)` (shot-noise units, N₀ = 1).
//! From a block of correlated data the channel is characterised by
//!
//! ```text
//! T̂ = Cov(X_A, X_B)² / (η·Var(X_A)²)
//! ξ̂ = Var(X_B)/(ηT̂) − Var(X_A) − N₀/(ηT̂) − v_ele/(ηT̂)
//! ```
//!
//! Both are built from second moments with the sample means subtracted,
//! which makes them exactly blind to any constant displacement of Bob's
//! data. That blindness is the loophole the attack module exploits.
//!
//! ```
//! use cvqkd_sim::protocol::{modulate_alice, transmit_linear, estimate_parameters, QuadratureBlock};
//! use cvqkd_sim::units::RngHandle;
//!
//! let mut rng = RngHandle::new(7).rng();
//! let alice = modulate_alice(4.0, 200_000, &mut rng).unwrap();
//! let bob = transmit_linear(&alice, 1.0, 1.0, 0.0, 0.0, &mut rng).unwrap();
//! let block = QuadratureBlock::new(alice, bob).unwrap();
//! let est = estimate_parameters(&block, 1.0, 0.0, 1.0).unwrap();
//! assert!((est.t_hat - 1.0).abs() < 0.01);
//! assert!(est.xi_hat.abs() < 0.02);
//! ```

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{BivariateMoments, HigherMoments};

/// A block of paired quadrature data in √N₀ units.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureBlock {
    pub alice: Vec<f64>,
    pub bob: Vec<f64>,
}

impl QuadratureBlock {
    pub fn new(alice: Vec<f64>, bob: Vec<f64>) -> Result<Self> {
        if alice.len() != bob.len() {
            return Err(Error::Domain(format!(
                "block sides differ in length: {} vs {}",
                alice.len(),
                bob.len()
            )));
        }
        if alice.len() < 2 {
            return Err(Error::InsufficientData(
                "a block needs at least 2 pulses".into(),
            ));
        }
        Ok(Self { alice, bob })
    }

    pub fn len(&self) -> usize {
        self.alice.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alice.is_empty()
    }
}

/// Channel parameters estimated from one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    /// Cov(X_A, X_B) (N₀).
    pub cov_ab: f64,
    /// Var(X_A) (N₀).
    pub var_a: f64,
    /// Var(X_B) (N₀).
    pub var_b: f64,
    /// Transmission estimate T̂ ≥ 0.
    pub t_hat: f64,
    /// Excess-noise estimate ξ̂ (N₀); may be negative — that bias is the
    /// whole point of the saturation attack.
    pub xi_hat: f64,
    pub mean_a: f64,
    pub mean_b: f64,
}

/// Draw `n` i.i.d. Normal(0, v_a) modulation values.
pub fn modulate_alice(v_a: f64, n: usize, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if !(v_a > 0.0) {
        return Err(Error::Domain(format!("v_a must be > 0, got {v_a}")));
    }
    if n == 0 {
        return Err(Error::Domain("need n >= 1 pulses".into()));
    }
    let s = v_a.sqrt();
    Ok((0..n)
        .map(|_| s * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Propagate Alice's quadratures through the linear Gaussian channel:
/// X_B = √(ηT)·X_A + X_N with X_N ~ Normal(0, 1 + ηTξ + v_ele).
pub fn transmit_linear(
    alice: &[f64],
    transmission: f64,
    eta: f64,
    xi: f64,
    v_ele: f64,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    if !(transmission > 0.0 && transmission <= 1.0) {
        return Err(Error::Domain(format!(
            "transmission must be in (0, 1], got {transmission}"
        )));
    }
    if !(xi >= 0.0) || !(v_ele >= 0.0) {
        return Err(Error::Domain("xi and v_ele must be >= 0".into()));
    }
    let t = (eta * transmission).sqrt();
    let sigma_n = (1.0 + eta * transmission * xi + v_ele).sqrt();
    Ok(alice
        .iter()
        .map(|&xa| t * xa + sigma_n * rng.sample::<f64, _>(StandardNormal))
        .collect())
}

/// Empirical variance of vacuum-input homodyne samples ~ Normal(0, 1 + v_ele),
/// i.e. the shot-noise calibration value V_B0 = N₀ + v_ele. The caller
/// subtracts the independently calibrated v_ele.
pub fn calibrate_shot_noise(n: usize, v_ele: f64, rng: &mut impl Rng) -> Result<f64> {
    if n < 1_000 {
        return Err(Error::Domain(format!(
            "shot-noise calibration needs n >= 1000, got {n}"
        )));
    }
    let sigma = (1.0 + v_ele).sqrt();
    let samples: Vec<f64> = (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    Ok(crate::numeric::variance(&samples))
}

/// Covariance-based parameter estimation on one block. All moments are
/// mean-subtracted with 1/n normalisation (the ⟨·⟩ convention).
pub fn estimate_parameters(
    block: &QuadratureBlock,
    eta: f64,
    v_ele: f64,
    n0: f64,
) -> Result<EstimationResult> {
    if !(eta > 0.0) {
        return Err(Error::Domain(format!("eta must be > 0, got {eta}")));
    }
    let m = BivariateMoments::from_slices(&block.alice, &block.bob)?;
    estimate_from_moments(&m, eta, v_ele, n0)
}

/// Estimation from precomputed joint moments (used by sharded pipelines).
pub fn estimate_from_moments(
    m: &BivariateMoments,
    eta: f64,
    v_ele: f64,
    n0: f64,
) -> Result<EstimationResult> {
    if !(m.var_x > 0.0) {
        return Err(Error::Domain(
            "empirical Var(alice) must be > 0 for estimation".into(),
        ));
    }
    let t_hat = m.cov_xy * m.cov_xy / (eta * m.var_x * m.var_x);
    if t_hat == 0.0 {
        return Err(Error::UndefinedEstimate(
            "zero covariance: excess noise is undefined at T-hat = 0".into(),
        ));
    }
    let xi_hat = m.var_y / (eta * t_hat) - m.var_x - n0 / (eta * t_hat) - v_ele / (eta * t_hat);
    Ok(EstimationResult {
        cov_ab: m.cov_xy,
        var_a: m.var_x,
        var_b: m.var_y,
        t_hat,
        xi_hat,
        mean_a: m.mean_x,
        mean_b: m.mean_y,
    })
}

/// Asymptotic (delta-method) standard errors of the estimated quantities,
/// with all moment covariances taken from the empirical fourth-order
/// central moments, so they stay valid for clamped, non-Gaussian Bob data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationErrors {
    pub se_cov: f64,
    pub se_var_b: f64,
    pub se_t_hat: f64,
    pub se_xi_hat: f64,
}

pub fn estimation_standard_errors(
    block: &QuadratureBlock,
    eta: f64,
    v_ele: f64,
    n0: f64,
) -> Result<EstimationErrors> {
    let hm = HigherMoments::from_slices(&block.alice, &block.bob)?;
    let m = hm.base;
    let n = m.n as f64;
    let (va, vb, c) = (m.var_x, m.var_y, m.cov_xy);
    if c == 0.0 || va == 0.0 {
        return Err(Error::UndefinedEstimate(
            "standard errors undefined at zero covariance".into(),
        ));
    }

    // covariance matrix of (V̂a, V̂b, ĉ)
    let s_aa = (hm.m40 - va * va) / n;
    let s_bb = (hm.m04 - vb * vb) / n;
    let s_cc = (hm.m22 - c * c) / n;
    let s_ab = (hm.m22 - va * vb) / n;
    let s_ac = (hm.m31 - va * c) / n;
    let s_bc = (hm.m13 - vb * c) / n;

    let quad = |da: f64, db: f64, dc: f64| -> f64 {
        (da * da * s_aa
            + db * db * s_bb
            + dc * dc * s_cc
            + 2.0 * da * db * s_ab
            + 2.0 * da * dc * s_ac
            + 2.0 * db * dc * s_bc)
            .max(0.0)
    };

    // T̂ = ĉ²/(η V̂a²)
    let dt_da = -2.0 * c * c / (eta * va * va * va);
    let dt_dc = 2.0 * c / (eta * va * va);
    let se_t_hat = quad(dt_da, 0.0, dt_dc).sqrt();

    // ξ̂ = (V̂b − K)·V̂a²/ĉ² − V̂a with K = n0 + v_ele
    let k = n0 + v_ele;
    let dxi_da = 2.0 * (vb - k) * va / (c * c) - 1.0;
    let dxi_db = va * va / (c * c);
    let dxi_dc = -2.0 * (vb - k) * va * va / (c * c * c);
    let se_xi_hat = quad(dxi_da, dxi_db, dxi_dc).sqrt();

    Ok(EstimationErrors {
        se_cov: hm.se_cov(),
        se_var_b: hm.se_var_y(),
        se_t_hat,
        se_xi_hat,
    })
}

/// Export a block as CSV with header `x_a,x_b`.
pub fn write_block_csv<W: std::io::Write>(w: W, block: &QuadratureBlock) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["x_a", "x_b"])?;
    for (a, b) in block.alice.iter().zip(&block.bob) {
        wtr.write_record([format!("{a}"), format!("{b}")])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Import a block from CSV with header `x_a,x_b`.
pub fn read_block_csv<R: std::io::Read>(r: R) -> Result<QuadratureBlock> {
    let mut rdr = csv::Reader::from_reader(r);
    let mut alice = Vec::new();
    let mut bob = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let a: f64 = rec
            .get(0)
            .ok_or_else(|| Error::Domain("missing x_a column".into()))?
            .parse()
            .map_err(|e| Error::Domain(format!("bad x_a value: {e}")))?;
        let b: f64 = rec
            .get(1)
            .ok_or_else(|| Error::Domain("missing x_b column".into()))?
            .parse()
            .map_err(|e| Error::Domain(format!("bad x_b value: {e}")))?;
        alice.push(a);
        bob.push(b);
    }
    QuadratureBlock::new(alice, bob)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::{ChannelSpec, RngHandle, SystemParams};

    #[test]
    fn modulation_variance_and_fourth_moment() {
        let n = 1_000_000usize;
        let mut rng = RngHandle::new(2).rng();
        let xs = modulate_alice(11.58, n, &mut rng).unwrap();
        let v = crate::numeric::variance(&xs);
        let band = 5.0 * (2.0 / n as f64).sqrt() * 11.58;
        assert!((v - 11.58).abs() < band, "var {v}");

        let xs4 = modulate_alice(4.0, n, &mut rng).unwrap();
        let m = crate::numeric::mean(&xs4);
        let m4 = crate::numeric::compensated_sum_by(&xs4, |x| (x - m).powi(4)) / n as f64;
        // Gaussian moment oracle: E[(X−μ)⁴] = 3σ⁴, SE ≈ sqrt(96)·σ⁴/√n
        let se = (96.0f64).sqrt() * 16.0 / (n as f64).sqrt();
        assert!((m4 - 3.0 * 16.0).abs() < 5.0 * se, "m4 {m4}");
    }

    #[test]
    fn modulation_is_reproducible_per_seed() {
        let a = modulate_alice(1.0, 64, &mut RngHandle::new(9).rng()).unwrap();
        let b = modulate_alice(1.0, 64, &mut RngHandle::new(9).rng()).unwrap();
        assert_eq!(a, b);
        let c = modulate_alice(1.0, 64, &mut RngHandle::new(10).rng()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn transmit_matches_variance_relation() {
        let n = 1_000_000usize;
        let mut rng = RngHandle::new(4).rng();

        // unit channel
        let alice = modulate_alice(10.0, n, &mut rng).unwrap();
        let bob = transmit_linear(&alice, 1.0, 1.0, 0.0, 0.0, &mut rng).unwrap();
        let vb = crate::numeric::variance(&bob);
        let se = 11.0 * (2.0 / n as f64).sqrt();
        assert!((vb - 11.0).abs() < 5.0 * se);

        // lossy noisy channel: eta T V_A + 1 + eta T xi + v_ele
        let bob2 = transmit_linear(&alice, 0.5, 0.55, 0.1, 0.015, &mut rng).unwrap();
        let expect = 0.275 * 10.0 + 1.0 + 0.0275 + 0.015;
        let vb2 = crate::numeric::variance(&bob2);
        let se2 = expect * (2.0 / n as f64).sqrt();
        assert!((vb2 - expect).abs() < 5.0 * se2, "{vb2} vs {expect}");

        // noise-only input
        let zeros = vec![0.0; n];
        let bob3 = transmit_linear(&zeros, 0.5, 0.55, 0.1, 0.015, &mut rng).unwrap();
        let expect3 = 1.0 + 0.0275 + 0.015;
        let vb3 = crate::numeric::variance(&bob3);
        assert!((vb3 - expect3).abs() < 5.0 * expect3 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn shot_noise_calibration() {
        let n = 1_000_000usize;
        let mut rng = RngHandle::new(6).rng();
        let v0 = calibrate_shot_noise(n, 0.0, &mut rng).unwrap();
        assert!((v0 - 1.0).abs() < 5.0 * (2.0 / n as f64).sqrt());
        let v1 = calibrate_shot_noise(n, 0.015, &mut rng).unwrap();
        assert!((v1 - 1.015).abs() < 5.0 * 1.015 * (2.0 / n as f64).sqrt());
        // chi-square width of the sample variance at small n
        let v2 = calibrate_shot_noise(1_000, 0.0, &mut rng).unwrap();
        assert!((v2 - 1.0).abs() < 5.0 * (2.0 / 1000.0f64).sqrt());
    }

    #[test]
    fn estimation_identity_channel() {
        let n = 1_000_000usize;
        let mut rng = RngHandle::new(8).rng();
        let alice = modulate_alice(10.0, n, &mut rng).unwrap();
        let bob = transmit_linear(&alice, 1.0, 1.0, 0.0, 0.0, &mut rng).unwrap();
        let est = estimate_parameters(&QuadratureBlock::new(alice, bob).unwrap(), 1.0, 0.0, 1.0)
            .unwrap();
        assert!((est.t_hat - 1.0).abs() < 0.01, "t_hat {}", est.t_hat);
        assert!(est.xi_hat.abs() < 0.02, "xi_hat {}", est.xi_hat);
    }

    #[test]
    fn estimation_25km_profile_self_consistency() {
        let sys = SystemParams::default();
        let ch = ChannelSpec::from_distance(25.0, &sys).unwrap();
        let n = 1_000_000usize;
        let mut rng = RngHandle::new(12).rng();
        let alice = modulate_alice(sys.v_a, n, &mut rng).unwrap();
        let bob =
            transmit_linear(&alice, ch.transmission, sys.eta, sys.xi_sys, sys.v_ele, &mut rng)
                .unwrap();
        let block = QuadratureBlock::new(alice, bob).unwrap();
        let est = estimate_parameters(&block, sys.eta, sys.v_ele, 1.0).unwrap();
        let se = estimation_standard_errors(&block, sys.eta, sys.v_ele, 1.0).unwrap();
        assert!(
            (est.t_hat - ch.transmission).abs() < 5.0 * se.se_t_hat,
            "t_hat {} vs {} (se {})",
            est.t_hat,
            ch.transmission,
            se.se_t_hat
        );
        assert!(
            (est.xi_hat - sys.xi_sys).abs() < 5.0 * se.se_xi_hat,
            "xi_hat {} vs {} (se {})",
            est.xi_hat,
            sys.xi_sys,
            se.se_xi_hat
        );
    }

    #[test]
    fn estimator_is_blind_to_constant_displacement() {
        let n = 100_000usize;
        let mut rng = RngHandle::new(14).rng();
        let alice = modulate_alice(5.0, n, &mut rng).unwrap();
        let bob = transmit_linear(&alice, 0.5, 0.55, 0.1, 0.015, &mut rng).unwrap();
        let shifted: Vec<f64> = bob.iter().map(|&b| b + 37.5).collect();
        let e0 = estimate_parameters(
            &QuadratureBlock::new(alice.clone(), bob).unwrap(),
            0.55,
            0.015,
            1.0,
        )
        .unwrap();
        let e1 = estimate_parameters(
            &QuadratureBlock::new(alice, shifted).unwrap(),
            0.55,
            0.015,
            1.0,
        )
        .unwrap();
        // identical up to floating-point rounding of the per-sample shift
        assert!((e0.cov_ab - e1.cov_ab).abs() <= 1e-10 * e0.cov_ab.abs());
        assert!((e0.var_b - e1.var_b).abs() <= 1e-10 * e0.var_b.abs());
        assert!((e0.t_hat - e1.t_hat).abs() <= 1e-9 * e0.t_hat.abs());
        assert!((e0.xi_hat - e1.xi_hat).abs() <= 1e-7 * e0.var_b.abs());
        assert!((e1.mean_b - e0.mean_b - 37.5).abs() < 1e-9);
    }

    #[test]
    fn estimator_scale_consistency() {
        let n = 50_000usize;
        let mut rng = RngHandle::new(15).rng();
        let alice = modulate_alice(5.0, n, &mut rng).unwrap();
        let bob = transmit_linear(&alice, 0.5, 0.55, 0.1, 0.015, &mut rng).unwrap();
        let s = 2.5f64;
        let scaled: Vec<f64> = bob.iter().map(|&b| s * b).collect();
        let e0 = estimate_parameters(
            &QuadratureBlock::new(alice.clone(), bob).unwrap(),
            0.55,
            0.015,
            1.0,
        )
        .unwrap();
        let e1 = estimate_parameters(
            &QuadratureBlock::new(alice, scaled).unwrap(),
            0.55,
            0.015,
            1.0,
        )
        .unwrap();
        assert!((e1.cov_ab - s * e0.cov_ab).abs() < 1e-9 * e0.cov_ab.abs());
        assert!((e1.var_b - s * s * e0.var_b).abs() < 1e-9 * e0.var_b);
        assert!((e1.t_hat - s * s * e0.t_hat).abs() < 1e-8 * e0.t_hat);
    }

    #[test]
    fn estimator_flags_zero_covariance() {
        let block = QuadratureBlock::new(vec![1.0, -1.0, 1.0, -1.0], vec![2.0, 2.0, 2.0, 2.0])
            .unwrap();
        assert!(matches!(
            estimate_parameters(&block, 1.0, 0.0, 1.0),
            Err(Error::UndefinedEstimate(_))
        ));
    }

    #[test]
    fn block_csv_roundtrip() {
        let block =
            QuadratureBlock::new(vec![1.5, -0.25, 3.0], vec![0.125, 2.0, -7.5]).unwrap();
        let mut buf = Vec::new();
        write_block_csv(&mut buf, &block).unwrap();
        let back = read_block_csv(buf.as_slice()).unwrap();
        assert_eq!(block, back);
    }

    #[test]
    fn asymptotic_unbiasedness_over_repetitions() {
        // mean of T̂ and ξ̂ over R repetitions stays within 5 combined SE
        let sys = SystemParams::default();
        let ch = ChannelSpec::from_distance(25.0, &sys).unwrap();
        let n = 100_000usize;
        let reps = 50usize;
        let mut sum_t = 0.0;
        let mut sum_xi = 0.0;
        let mut se_t = 0.0;
        let mut se_xi = 0.0;
        for r in 0..reps {
            let mut rng = RngHandle::new(1000).with_stream(r as u64).rng();
            let alice = modulate_alice(sys.v_a, n, &mut rng).unwrap();
            let bob = transmit_linear(
                &alice,
                ch.transmission,
                sys.eta,
                sys.xi_sys,
                sys.v_ele,
                &mut rng,
            )
            .unwrap();
            let block = QuadratureBlock::new(alice, bob).unwrap();
            let est = estimate_parameters(&block, sys.eta, sys.v_ele, 1.0).unwrap();
            let se = estimation_standard_errors(&block, sys.eta, sys.v_ele, 1.0).unwrap();
            sum_t += est.t_hat;
            sum_xi += est.xi_hat;
            se_t = se.se_t_hat;
            se_xi = se.se_xi_hat;
        }
        let mean_t = sum_t / reps as f64;
        let mean_xi = sum_xi / reps as f64;
        let band_t = 5.0 * se_t / (reps as f64).sqrt();
        let band_xi = 5.0 * se_xi / (reps as f64).sqrt();
        assert!((mean_t - ch.transmission).abs() < band_t, "{mean_t}");
        assert!((mean_xi - sys.xi_sys).abs() < band_xi, "{mean_xi}");
    }
}
