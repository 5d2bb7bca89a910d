//! Numerical building blocks: compensated summation, two-pass sample
//! moments, mergeable streaming moments, bracketed bisection and a small
//! Nelder–Mead simplex.
//!
//! Sample statistics are computed with a two-pass mean-then-moment scheme
//! on top of Neumaier-compensated sums so that blocks of 10⁶–10⁷ samples
//! keep ~15 significant digits.

use crate::error::{Error, Result};

/// Neumaier-compensated sum of a slice.
pub fn compensated_sum(xs: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let t = sum + x;
        if sum.abs() >= x.abs() {
            comp += (sum - t) + x;
        } else {
            comp += (x - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Compensated sum of an arbitrary mapped term, `Σ f(xᵢ)`.
pub fn compensated_sum_by(xs: &[f64], f: impl Fn(f64) -> f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &x in xs {
        let v = f(x);
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean via compensated summation.
pub fn mean(xs: &[f64]) -> f64 {
    compensated_sum(xs) / xs.len() as f64
}

/// Population-style (1/n) central variance, two-pass.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    compensated_sum_by(xs, |x| {
        let d = x - m;
        d * d
    }) / xs.len() as f64
}

/// Joint second-order central moments of a paired sample, two-pass, 1/n
/// normalisation (the ⟨·⟩ convention of the covariance relations used
/// throughout the crate).
#[derive(Debug, Clone, Copy)]
pub struct BivariateMoments {
    pub n: usize,
    pub mean_x: f64,
    pub mean_y: f64,
    pub var_x: f64,
    pub var_y: f64,
    pub cov_xy: f64,
}

impl BivariateMoments {
    pub fn from_slices(xs: &[f64], ys: &[f64]) -> Result<Self> {
        if xs.len() != ys.len() {
            return Err(Error::Domain(format!(
                "paired sample length mismatch: {} vs {}",
                xs.len(),
                ys.len()
            )));
        }
        if xs.len() < 2 {
            return Err(Error::InsufficientData(
                "need at least 2 paired samples for moments".into(),
            ));
        }
        let n = xs.len() as f64;
        let mx = mean(xs);
        let my = mean(ys);
        let mut sxx = Kahan::new();
        let mut syy = Kahan::new();
        let mut sxy = Kahan::new();
        for (&x, &y) in xs.iter().zip(ys) {
            let dx = x - mx;
            let dy = y - my;
            sxx.add(dx * dx);
            syy.add(dy * dy);
            sxy.add(dx * dy);
        }
        Ok(Self {
            n: xs.len(),
            mean_x: mx,
            mean_y: my,
            var_x: sxx.value() / n,
            var_y: syy.value() / n,
            cov_xy: sxy.value() / n,
        })
    }
}

/// Central moments up to fourth order of a paired sample, for asymptotic
/// standard errors of empirical variances and covariances:
///
///   Var(V̂ᵧ) ≈ (m₀₄ − m₀₂²)/n,  Var(ĉ) ≈ (m₂₂ − m₁₁²)/n, ...
#[derive(Debug, Clone, Copy)]
pub struct HigherMoments {
    pub base: BivariateMoments,
    /// E[(x−x̄)⁴]
    pub m40: f64,
    /// E[(y−ȳ)⁴]
    pub m04: f64,
    /// E[(x−x̄)²(y−ȳ)²]
    pub m22: f64,
    /// E[(x−x̄)³(y−ȳ)]
    pub m31: f64,
    /// E[(x−x̄)(y−ȳ)³]
    pub m13: f64,
}

impl HigherMoments {
    pub fn from_slices(xs: &[f64], ys: &[f64]) -> Result<Self> {
        let base = BivariateMoments::from_slices(xs, ys)?;
        let n = xs.len() as f64;
        let (mut s40, mut s04, mut s22, mut s31, mut s13) =
            (Kahan::new(), Kahan::new(), Kahan::new(), Kahan::new(), Kahan::new());
        for (&x, &y) in xs.iter().zip(ys) {
            let dx = x - base.mean_x;
            let dy = y - base.mean_y;
            let dx2 = dx * dx;
            let dy2 = dy * dy;
            s40.add(dx2 * dx2);
            s04.add(dy2 * dy2);
            s22.add(dx2 * dy2);
            s31.add(dx2 * dx * dy);
            s13.add(dx * dy * dy2);
        }
        Ok(Self {
            base,
            m40: s40.value() / n,
            m04: s04.value() / n,
            m22: s22.value() / n,
            m31: s31.value() / n,
            m13: s13.value() / n,
        })
    }

    /// Standard error of the empirical covariance ĉ.
    pub fn se_cov(&self) -> f64 {
        let v = (self.m22 - self.base.cov_xy * self.base.cov_xy) / self.base.n as f64;
        v.max(0.0).sqrt()
    }

    /// Standard error of the empirical variance of y.
    pub fn se_var_y(&self) -> f64 {
        let v = (self.m04 - self.base.var_y * self.base.var_y) / self.base.n as f64;
        v.max(0.0).sqrt()
    }

    /// Standard error of the empirical variance of x.
    pub fn se_var_x(&self) -> f64 {
        let v = (self.m40 - self.base.var_x * self.base.var_x) / self.base.n as f64;
        v.max(0.0).sqrt()
    }
}

/// Kahan–Neumaier accumulator.
#[derive(Debug, Clone, Copy, Default)]
pub struct Kahan {
    sum: f64,
    comp: f64,
}

impl Kahan {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Streaming mean/variance accumulator (Welford update) with pairwise
/// merge, so sharded workers can reduce partial moments in any order.
/// Merge order perturbs results only at rounding level (≲10⁻¹⁰ relative).
#[derive(Debug, Clone, Copy, Default)]
pub struct RunningMoments {
    n: u64,
    mean: f64,
    m2: f64,
}

impl RunningMoments {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n1 = self.n as f64;
        let n2 = other.n as f64;
        let d = other.mean - self.mean;
        let n = n1 + n2;
        self.mean += d * n2 / n;
        self.m2 += other.m2 + d * d * n1 * n2 / n;
        self.n += other.n;
    }

    pub fn count(&self) -> u64 {
        self.n
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Population-style (1/n) variance.
    pub fn variance(&self) -> f64 {
        if self.n == 0 {
            f64::NAN
        } else {
            self.m2 / self.n as f64
        }
    }
}

/// Options for [`bisect`].
#[derive(Debug, Clone, Copy)]
pub struct BisectOptions {
    /// Stop when the bracket width falls below `x_abs_tol + x_rel_tol·|x|`.
    pub x_abs_tol: f64,
    pub x_rel_tol: f64,
    /// If positive, also stop as soon as |f(mid)| drops below this.
    pub f_tol: f64,
    pub max_iter: usize,
}

impl Default for BisectOptions {
    fn default() -> Self {
        Self {
            x_abs_tol: 1e-15,
            x_rel_tol: 4.0 * f64::EPSILON,
            f_tol: 0.0,
            max_iter: 200,
        }
    }
}

/// Bracketed bisection: requires `f(lo)` and `f(hi)` of opposite sign (or
/// zero at an endpoint). Returns the bracket midpoint at convergence.
pub fn bisect(f: impl Fn(f64) -> f64, lo: f64, hi: f64, opts: BisectOptions) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.is_nan() || fhi.is_nan() {
        return Err(Error::NoRoot(format!(
            "NaN at bracket endpoints: f({lo}) = {flo}, f({hi}) = {fhi}"
        )));
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::NoRoot(format!(
            "no sign change on [{lo}, {hi}]: f(lo) = {flo:.3e}, f(hi) = {fhi:.3e}"
        )));
    }
    let mut mid = 0.5 * (lo + hi);
    for _ in 0..opts.max_iter {
        mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if opts.f_tol > 0.0 && fm.abs() < opts.f_tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if (hi - lo).abs() < opts.x_abs_tol + opts.x_rel_tol * mid.abs() {
            return Ok(0.5 * (lo + hi));
        }
    }
    Ok(mid)
}

/// Expand `hi` geometrically until `f` changes sign, then bisect.
pub fn bisect_with_expansion(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi0: f64,
    hi_max: f64,
    opts: BisectOptions,
) -> Result<f64> {
    let flo = f(lo);
    if flo == 0.0 {
        return Ok(lo);
    }
    let mut hi = hi0;
    let mut fhi = f(hi);
    while fhi.signum() == flo.signum() {
        hi *= 1.5;
        if hi > hi_max {
            return Err(Error::NoRoot(format!(
                "no sign change up to hi_max = {hi_max}"
            )));
        }
        fhi = f(hi);
    }
    bisect(f, lo, hi, opts)
}

/// Minimise `f` with a Nelder–Mead simplex. `x0` is the start point and
/// `scale` the initial simplex edge per coordinate. Convergence: relative
/// spread of simplex function values below `f_rel_tol`.
pub fn nelder_mead(
    f: impl Fn(&[f64]) -> f64,
    x0: &[f64],
    scale: &[f64],
    f_rel_tol: f64,
    max_iter: usize,
) -> (Vec<f64>, f64) {
    let dim = x0.len();
    let mut simplex: Vec<Vec<f64>> = Vec::with_capacity(dim + 1);
    simplex.push(x0.to_vec());
    for i in 0..dim {
        let mut p = x0.to_vec();
        p[i] += scale[i];
        simplex.push(p);
    }
    let mut fvals: Vec<f64> = simplex.iter().map(|p| f(p)).collect();

    let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
    for _ in 0..max_iter {
        let mut order: Vec<usize> = (0..=dim).collect();
        order.sort_by(|&a, &b| fvals[a].total_cmp(&fvals[b]));
        let best = order[0];
        let worst = order[dim];
        let second_worst = order[dim - 1];

        let spread = (fvals[worst] - fvals[best]).abs();
        if spread <= f_rel_tol * (fvals[best].abs().max(1e-30)) {
            break;
        }

        // centroid of all but the worst vertex
        let mut centroid = vec![0.0; dim];
        for (i, p) in simplex.iter().enumerate() {
            if i == worst {
                continue;
            }
            for (c, &v) in centroid.iter_mut().zip(p) {
                *c += v / dim as f64;
            }
        }

        let reflect: Vec<f64> = centroid
            .iter()
            .zip(&simplex[worst])
            .map(|(&c, &w)| c + alpha * (c - w))
            .collect();
        let f_reflect = f(&reflect);

        if f_reflect < fvals[best] {
            let expand: Vec<f64> = centroid
                .iter()
                .zip(&reflect)
                .map(|(&c, &r)| c + gamma * (r - c))
                .collect();
            let f_expand = f(&expand);
            if f_expand < f_reflect {
                simplex[worst] = expand;
                fvals[worst] = f_expand;
            } else {
                simplex[worst] = reflect;
                fvals[worst] = f_reflect;
            }
        } else if f_reflect < fvals[second_worst] {
            simplex[worst] = reflect;
            fvals[worst] = f_reflect;
        } else {
            let contract: Vec<f64> = centroid
                .iter()
                .zip(&simplex[worst])
                .map(|(&c, &w)| c + rho * (w - c))
                .collect();
            let f_contract = f(&contract);
            if f_contract < fvals[worst] {
                simplex[worst] = contract;
                fvals[worst] = f_contract;
            } else {
                // shrink toward the best vertex
                let best_point = simplex[best].clone();
                for i in 0..=dim {
                    if i == best {
                        continue;
                    }
                    for (v, &b) in simplex[i].iter_mut().zip(&best_point) {
                        *v = b + sigma * (*v - b);
                    }
                    fvals[i] = f(&simplex[i]);
                }
            }
        }
    }

    let mut best = 0;
    for i in 1..=dim {
        if fvals[i] < fvals[best] {
            best = i;
        }
    }
    (simplex[best].clone(), fvals[best])
}

/// Standard normal density.
pub fn normal_pdf(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Upper tail P(Z > z) of the standard normal.
pub fn normal_upper_tail(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_handles_cancellation() {
        let xs = [1e16, 1.0, -1e16];
        assert_eq!(compensated_sum(&xs), 1.0);
    }

    #[test]
    fn bivariate_moments_match_hand_values() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [2.0, 4.0, 6.0, 8.0];
        let m = BivariateMoments::from_slices(&xs, &ys).unwrap();
        assert!((m.mean_x - 2.5).abs() < 1e-15);
        assert!((m.var_x - 1.25).abs() < 1e-15);
        assert!((m.cov_xy - 2.5).abs() < 1e-15);
    }

    #[test]
    fn running_moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.7).sin() * 3.0 + 1.0).collect();
        let mut whole = RunningMoments::new();
        for &x in &xs {
            whole.push(x);
        }
        let mut a = RunningMoments::new();
        let mut b = RunningMoments::new();
        for &x in &xs[..333] {
            a.push(x);
        }
        for &x in &xs[333..] {
            b.push(x);
        }
        a.merge(&b);
        assert!((a.mean() - whole.mean()).abs() < 1e-12);
        assert!((a.variance() - whole.variance()).abs() / whole.variance() < 1e-10);
    }

    #[test]
    fn bisect_finds_sqrt2() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, BisectOptions::default()).unwrap();
        assert!((r - std::f64::consts::SQRT_2).abs() < 1e-14);
    }

    #[test]
    fn bisect_rejects_bad_bracket() {
        assert!(bisect(|x| x * x + 1.0, -1.0, 1.0, BisectOptions::default()).is_err());
    }

    #[test]
    fn nelder_mead_minimises_quadratic_bowl() {
        let (x, fv) = nelder_mead(
            |p| (p[0] - 3.0).powi(2) + 2.0 * (p[1] + 1.0).powi(2),
            &[0.0, 0.0],
            &[0.5, 0.5],
            1e-12,
            500,
        );
        assert!(fv < 1e-8);
        assert!((x[0] - 3.0).abs() < 1e-4);
        assert!((x[1] + 1.0).abs() < 1e-4);
    }
}
