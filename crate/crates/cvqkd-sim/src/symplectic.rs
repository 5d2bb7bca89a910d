//! Generic Gaussian-state toolkit: covariance matrices, symplectic
//! eigenvalues and conditional states after homodyne measurement.
//!
//! This is the oracle side of the key-rate module: instead of the closed
//! Holevo formula it builds the covariance matrices of the actual mode
//! network (two-mode squeezed source, lossy noisy channel, detector
//! modelled as a beamsplitter fed by an EPR pair that carries the
//! electronic noise) and extracts entropies from symplectic spectra
//! computed by a general eigenvalue solve of iΩγ — no formula shared
//! with the closed form beyond the entropy function itself.
//!
//! Mode ordering is (x₁, p₁, x₂, p₂, ...).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::keyrate::holevo_g;
use crate::units::SystemParams;

/// Symplectic form Ω for `n_modes` modes.
fn symplectic_form(n_modes: usize) -> DMatrix<f64> {
    let mut omega = DMatrix::zeros(2 * n_modes, 2 * n_modes);
    for k in 0..n_modes {
        omega[(2 * k, 2 * k + 1)] = 1.0;
        omega[(2 * k + 1, 2 * k)] = -1.0;
    }
    omega
}

/// Symplectic eigenvalues of a 2n×2n covariance matrix: the positive
/// imaginary parts of the spectrum of Ωγ, paired and averaged.
pub fn symplectic_eigenvalues(gamma: &DMatrix<f64>) -> Result<Vec<f64>> {
    let dim = gamma.nrows();
    if dim == 0 || !dim.is_multiple_of(2) || gamma.ncols() != dim {
        return Err(Error::Domain(format!(
            "covariance matrix must be square with even dimension, got {}x{}",
            gamma.nrows(),
            gamma.ncols()
        )));
    }
    let n = dim / 2;
    let k = symplectic_form(n) * gamma;
    let eigs = k.complex_eigenvalues();
    let mut imags: Vec<f64> = eigs.iter().map(|c| c.im.abs()).collect();
    imags.sort_by(|a, b| a.total_cmp(b));
    // eigenvalues of Ωγ come in ±iλ pairs
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        out.push(0.5 * (imags[2 * j] + imags[2 * j + 1]));
    }
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Von Neumann entropy (bits) of the Gaussian state with covariance γ.
pub fn von_neumann_entropy(gamma: &DMatrix<f64>) -> Result<f64> {
    let mut s = 0.0;
    for lam in symplectic_eigenvalues(gamma)? {
        if lam < 1.0 - 1e-9 {
            return Err(Error::NumericDomain(format!(
                "symplectic eigenvalue {lam} below 1"
            )));
        }
        s += holevo_g((lam.max(1.0) - 1.0) / 2.0);
    }
    Ok(s)
}

/// Conditional covariance of the remaining modes after an x-quadrature
/// homodyne measurement of mode `measured` (0-based):
/// γ' = γ_keep − σ·(Πγ_mΠ)⁺·σᵀ with Π = diag(1, 0).
pub fn condition_on_x_homodyne(gamma: &DMatrix<f64>, measured: usize) -> Result<DMatrix<f64>> {
    let n = gamma.nrows() / 2;
    if measured >= n {
        return Err(Error::Domain(format!(
            "mode index {measured} out of range for {n} modes"
        )));
    }
    let keep: Vec<usize> = (0..2 * n)
        .filter(|&i| i != 2 * measured && i != 2 * measured + 1)
        .collect();
    let g_keep = gamma.select_rows(keep.iter()).select_columns(keep.iter());
    let cross = gamma
        .select_rows(keep.iter())
        .select_columns([2 * measured, 2 * measured + 1].iter());
    let vxx = gamma[(2 * measured, 2 * measured)];
    if !(vxx > 0.0) {
        return Err(Error::NumericDomain(format!(
            "measured-quadrature variance {vxx} not positive"
        )));
    }
    // (Π γ_m Π)⁺ keeps only the 1/Vxx entry
    let mut pinv = DMatrix::zeros(2, 2);
    pinv[(0, 0)] = 1.0 / vxx;
    Ok(g_keep.clone() - &cross * pinv * cross.transpose())
}

/// Two-mode covariance of the EPR-equivalent source after the channel:
/// mode A kept by Alice (variance V), mode B attenuated to T with
/// line noise χ_line.
pub fn channel_output_cm(v: f64, transmission: f64, chi_line: f64) -> DMatrix<f64> {
    let c = (transmission * (v * v - 1.0)).sqrt();
    let tb = transmission * (v + chi_line);
    DMatrix::from_row_slice(
        4,
        4,
        &[
            v, 0.0, c, 0.0, //
            0.0, v, 0.0, -c, //
            c, 0.0, tb, 0.0, //
            0.0, -c, 0.0, tb,
        ],
    )
}

/// χ_BE oracle: S(AB) − S(AFG | x_B'), built purely from covariance
/// matrices and generic symplectic spectra.
///
/// For η < 1 the detector is a beamsplitter of transmission η whose idle
/// port carries one arm of an EPR pair of variance v = 1 + v_ele/(1−η);
/// the pair purifies the electronic noise. For the ideal detector
/// (η = 1, v_ele = 0) no auxiliary modes are needed.
pub fn chi_be_oracle(sys: &SystemParams, transmission: f64, xi: f64) -> Result<f64> {
    let v = sys.v_a + 1.0;
    let chi_line = 1.0 / transmission - 1.0 + xi;
    let g_ab = channel_output_cm(v, transmission, chi_line);
    let s_e = von_neumann_entropy(&g_ab)?;

    if sys.eta == 1.0 && sys.v_ele == 0.0 {
        let g_cond = condition_on_x_homodyne(&g_ab, 1)?;
        return Ok(s_e - von_neumann_entropy(&g_cond)?);
    }
    if sys.eta >= 1.0 {
        return Err(Error::NumericDomain(
            "oracle purifies electronic noise through a beamsplitter; needs eta < 1 \
             when v_ele > 0"
                .into(),
        ));
    }

    // modes (A, B, F, G)
    let v_epr = 1.0 + sys.v_ele / (1.0 - sys.eta);
    let c_epr = (v_epr * v_epr - 1.0).sqrt();
    let mut g8 = DMatrix::<f64>::zeros(8, 8);
    g8.view_mut((0, 0), (4, 4)).copy_from(&g_ab);
    for m in 2..4 {
        g8[(2 * m, 2 * m)] = v_epr;
        g8[(2 * m + 1, 2 * m + 1)] = v_epr;
    }
    g8[(4, 6)] = c_epr;
    g8[(6, 4)] = c_epr;
    g8[(5, 7)] = -c_epr;
    g8[(7, 5)] = -c_epr;

    // beamsplitter on (B, F): B' = √η·B + √(1−η)·F, F' = −√(1−η)·B + √η·F
    let mut s = DMatrix::<f64>::identity(8, 8);
    let (se, sr) = (sys.eta.sqrt(), (1.0 - sys.eta).sqrt());
    for q in 0..2 {
        let (b, f) = (2 + q, 4 + q);
        s[(b, b)] = se;
        s[(b, f)] = sr;
        s[(f, b)] = -sr;
        s[(f, f)] = se;
    }
    let g8 = &s * g8 * s.transpose();

    // condition (A, F, G) on the x-homodyne of B' (mode index 1)
    let g_cond = condition_on_x_homodyne(&g8, 1)?;
    Ok(s_e - von_neumann_entropy(&g_cond)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vacuum_and_thermal_eigenvalues() {
        let vac = DMatrix::<f64>::identity(2, 2);
        assert!((symplectic_eigenvalues(&vac).unwrap()[0] - 1.0).abs() < 1e-12);

        let th = DMatrix::<f64>::identity(4, 4) * 3.0;
        let e = symplectic_eigenvalues(&th).unwrap();
        assert!((e[0] - 3.0).abs() < 1e-12 && (e[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_mode_squeezed_state_is_pure() {
        // EPR state: both symplectic eigenvalues equal 1
        let g = channel_output_cm(5.0, 1.0, 0.0);
        let e = symplectic_eigenvalues(&g).unwrap();
        assert!((e[0] - 1.0).abs() < 1e-10 && (e[1] - 1.0).abs() < 1e-10);
        assert!(von_neumann_entropy(&g).unwrap().abs() < 1e-8);
    }

    #[test]
    fn conditioning_reduces_entropy() {
        // physical line noise: chi_line = 1/T - 1 + xi
        let g = channel_output_cm(5.0, 0.4, 1.0 / 0.4 - 1.0 + 0.6);
        let s_joint = von_neumann_entropy(&g).unwrap();
        let g_cond = condition_on_x_homodyne(&g, 1).unwrap();
        let s_cond = von_neumann_entropy(&g_cond).unwrap();
        assert!(s_cond < s_joint);
    }

    #[test]
    fn homodyne_of_epr_leaves_near_pure_remainder() {
        // measuring one arm of a strongly correlated pure pair localises
        // the other arm: conditional entropy stays small
        let g = channel_output_cm(40.0, 1.0, 0.0);
        let g_cond = condition_on_x_homodyne(&g, 1).unwrap();
        let s = von_neumann_entropy(&g_cond).unwrap();
        assert!(s < 0.1, "conditional entropy {s}");
    }
}
