//! Port correlation of the fluid antenna and correlated channel sampling.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{FasError, Result};
use crate::specfun;

/// Largest correlation accepted; `mu = 1` makes every port identical.
pub const MU_MAX: f64 = 1.0 - 1e-12;

/// Uniform port correlation: every pair of ports has covariance `mu^2 sigma_h2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationModel {
    mu: f64,
    w: Option<f64>,
    sigma_h2: f64,
}

impl CorrelationModel {
    /// Correlation induced by an aperture of `w` wavelengths.
    pub fn from_w(w: f64, sigma_h2: f64) -> Result<Self> {
        check_sigma(sigma_h2)?;
        let mu = mu_from_w(w)?;
        Ok(CorrelationModel {
            mu,
            w: Some(w),
            sigma_h2,
        })
    }

    /// Correlation given directly.
    pub fn from_mu(mu: f64, sigma_h2: f64) -> Result<Self> {
        check_sigma(sigma_h2)?;
        if !(0.0..1.0).contains(&mu) {
            return Err(FasError::invalid(
                "mu",
                format!("must lie in [0, 1), got {mu}"),
            ));
        }
        Ok(CorrelationModel {
            mu: mu.min(MU_MAX),
            w: None,
            sigma_h2,
        })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn w(&self) -> Option<f64> {
        self.w
    }

    pub fn sigma_h2(&self) -> f64 {
        self.sigma_h2
    }
}

fn check_sigma(sigma_h2: f64) -> Result<()> {
    if !(sigma_h2 > 0.0) || !sigma_h2.is_finite() {
        return Err(FasError::invalid(
            "sigma_h2",
            format!("must be positive, got {sigma_h2}"),
        ));
    }
    Ok(())
}

/// Port correlation coefficient for an aperture of `w` wavelengths:
/// `mu = sqrt(2 [1F2(1/2; 1; 3/2; -pi^2 W^2) - J1(2 pi W) / (2 pi W)])`.
pub fn mu_from_w(w: f64) -> Result<f64> {
    if !(w > 0.0) || !w.is_finite() {
        return Err(FasError::invalid(
            "W",
            format!("W must be positive, got {w}"),
        ));
    }
    let pi = std::f64::consts::PI;
    let f = specfun::hyp1f2_half(-pi * pi * w * w)?;
    let j = specfun::bessel_j1_over_x(2.0 * pi * w);
    let radicand = 2.0 * (f - j);
    if !(-1e-12..=1.0 + 1e-9).contains(&radicand) {
        return Err(FasError::NumericInconsistency(format!(
            "correlation radicand {radicand} outside [0, 1] at W = {w}"
        )));
    }
    Ok(radicand.clamp(0.0, 1.0).sqrt().min(MU_MAX))
}

/// Entry `(i, j)` (1-based) of the `n x n` port covariance matrix.
pub fn covariance_entry(i: usize, j: usize, n: usize, model: &CorrelationModel) -> Result<f64> {
    if i == 0 || i > n {
        return Err(FasError::invalid("i", format!("index {i} outside 1..={n}")));
    }
    if j == 0 || j > n {
        return Err(FasError::invalid("j", format!("index {j} outside 1..={n}")));
    }
    if i == j {
        Ok(model.sigma_h2)
    } else {
        Ok(model.mu * model.mu * model.sigma_h2)
    }
}

/// Complex channel gains of the N ports.
#[derive(Debug, Clone, PartialEq)]
pub struct FadingVector {
    pub h: Vec<Complex64>,
}

/// Circularly symmetric complex Gaussian with unit variance.
pub fn standard_complex<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Fills `out` with one draw of `h_k = sigma_h (mu x_0 + sqrt(1 - mu^2) x_k)`.
pub fn sample_fading_into<R: Rng + ?Sized>(
    model: &CorrelationModel,
    rng: &mut R,
    out: &mut [Complex64],
) {
    let s = model.sigma_h2.sqrt();
    let a = s * model.mu;
    let b = s * (1.0 - model.mu * model.mu).sqrt();
    let x0 = standard_complex(rng);
    for h in out.iter_mut() {
        *h = x0 * a + standard_complex(rng) * b;
    }
}

/// One draw of the N correlated port gains.
pub fn sample_fading<R: Rng + ?Sized>(
    n: usize,
    model: &CorrelationModel,
    rng: &mut R,
) -> FadingVector {
    let mut h = vec![Complex64::new(0.0, 0.0); n];
    sample_fading_into(model, rng, &mut h);
    FadingVector { h }
}
