//! Characteristic function of the combined SNR on the non-positive real axis.
//!
//! Two exact evaluation routes are provided: the p-series over compositions
//! and a route that conditions on the fading component shared by all ports.

use crate::compositions::EtaSignature;
use crate::correlation::CorrelationModel;
use crate::error::{FasError, Result};
use crate::quad::{self, ChebPanel, QuadOptions};
use crate::specfun;

/// Highest series order evaluated unless overridden.
pub const DEFAULT_P_CAP: usize = 40;
/// Largest supported number of ports for the series and closed form.
pub const MAX_PORTS: usize = 16;

/// Receiver configuration: N ports, best K combined.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FasConfig {
    pub n: usize,
    pub k: usize,
    pub model: CorrelationModel,
    pub e_av: f64,
    pub sigma_n2: f64,
}

impl FasConfig {
    pub fn new(
        n: usize,
        k: usize,
        model: CorrelationModel,
        e_av: f64,
        sigma_n2: f64,
    ) -> Result<Self> {
        if n == 0 {
            return Err(FasError::invalid("N", "must be at least 1"));
        }
        if k == 0 || k > n {
            return Err(FasError::invalid(
                "K",
                format!("must satisfy 1 <= K <= N = {n}, got {k}"),
            ));
        }
        if !(e_av > 0.0) || !e_av.is_finite() {
            return Err(FasError::invalid(
                "E_av",
                format!("must be positive, got {e_av}"),
            ));
        }
        if !(sigma_n2 > 0.0) || !sigma_n2.is_finite() {
            return Err(FasError::invalid(
                "sigma_n2",
                format!("must be positive, got {sigma_n2}"),
            ));
        }
        Ok(FasConfig {
            n,
            k,
            model,
            e_av,
            sigma_n2,
        })
    }

    /// Configuration with unit noise power and the given average SNR.
    pub fn with_gamma(n: usize, k: usize, model: CorrelationModel, gamma_av: f64) -> Result<Self> {
        if !(gamma_av > 0.0) || !gamma_av.is_finite() {
            return Err(FasError::invalid(
                "gamma_av",
                format!("must be positive, got {gamma_av}"),
            ));
        }
        FasConfig::new(n, k, model, gamma_av / model.sigma_h2(), 1.0)
    }

    /// Average SNR per port, `E_av sigma_h^2 / sigma_n^2`.
    pub fn gamma_av(&self) -> f64 {
        self.e_av * self.model.sigma_h2() / self.sigma_n2
    }

    pub fn mu(&self) -> f64 {
        self.model.mu()
    }

    /// `N - K + 1`, the number of distinct poles.
    pub fn n_tilde(&self) -> usize {
        self.n - self.k + 1
    }

    /// Pole scale of the `j`-th distinct pole (`j = 1..=N-K+1`):
    /// `(1 - mu^2) K Gamma / (K + j - 1)`.
    pub fn pole_scale(&self, j: usize) -> f64 {
        let m2 = self.mu() * self.mu();
        (1.0 - m2) * self.k as f64 * self.gamma_av() / (self.k + j - 1) as f64
    }

    /// Mixture weights of the series: `(w0, w)` with
    /// `w0 = (1-mu^2)/(1+(N-1)mu^2)`, `w = mu^2/(1+(N-1)mu^2)`.
    pub fn series_weights(&self) -> (f64, f64) {
        let m2 = self.mu() * self.mu();
        let d = 1.0 + (self.n as f64 - 1.0) * m2;
        ((1.0 - m2) / d, m2 / d)
    }

    /// Geometric ratio `rho = N mu^2 / (1 + (N-1) mu^2)` of the series.
    pub fn rho(&self) -> f64 {
        self.n as f64 * self.series_weights().1
    }
}

/// Truncation report of the p-series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CfTruncation {
    pub p_max: usize,
    pub tail_bound: f64,
    pub tol: f64,
}

/// Upper bound of the series remainder after order `p`:
/// `w0 beta^N (rho beta)^{p+1} / (1 - rho beta)`, with `beta` the largest pole factor.
pub fn tail_bound(x: f64, cfg: &FasConfig, p: usize) -> f64 {
    let (w0, _) = cfg.series_weights();
    let beta = 1.0 / (1.0 - x * cfg.pole_scale(cfg.n_tilde()));
    let r = cfg.rho() * beta;
    if r == 0.0 {
        return 0.0;
    }
    w0 * beta.powi(cfg.n as i32) * r.powi(p as i32 + 1) / (1.0 - r)
}

/// Smallest order whose remainder bound is below `tol`, if at most `cap`.
pub fn order_needed(x: f64, cfg: &FasConfig, tol: f64, cap: usize) -> Option<usize> {
    (0..=cap).find(|&p| tail_bound(x, cfg, p) < tol)
}

/// Pole factor product `prod_j (1 - x s_j)^{-eta_j}` of one signature.
pub fn cf_term_i(x: f64, sig: &EtaSignature, cfg: &FasConfig) -> f64 {
    sig.eta
        .iter()
        .enumerate()
        .map(|(j, &e)| (1.0 - x * cfg.pole_scale(j + 1)).powi(-(e as i32)))
        .product()
}

/// Series terms `T_0..=T_p_max` at `x` by dynamic programming over ports.
pub fn series_terms(x: f64, cfg: &FasConfig, p_max: usize) -> Vec<f64> {
    let n = cfg.n;
    let k = cfg.k;
    let dim = p_max + 1;
    let m2 = cfg.mu() * cfg.mu();
    let g = cfg.gamma_av();
    let inv_fact: Vec<f64> = (0..=p_max)
        .map(|i| 1.0 / specfun::factorial(i as u64))
        .collect();
    let binom: Vec<Vec<f64>> = (0..=2 * p_max)
        .map(|a| {
            (0..=p_max)
                .map(|b| specfun::binomial(a as u64, b as u64))
                .collect()
        })
        .collect();
    let mut a = vec![0.0; dim * dim];
    a[0] = 1.0;
    let mut b = vec![0.0; dim * dim];
    for stage in 1..=n {
        let scale = if stage <= k {
            (1.0 - m2) * g
        } else {
            (1.0 - m2) * g * k as f64 / stage as f64
        };
        let beta = 1.0 / (1.0 - x * scale);
        let factor = beta / stage as f64;
        b.iter_mut().for_each(|v| *v = 0.0);
        for big_l in 0..dim {
            for s in 0..=big_l {
                let v = a[big_l * dim + s];
                if v == 0.0 {
                    continue;
                }
                for l in 0..(dim - big_l) {
                    b[(big_l + l) * dim + s + l] += v * binom[l + s][l] * inv_fact[l];
                }
            }
        }
        a.iter_mut().for_each(|v| *v = 0.0);
        for big_l in 0..dim {
            for s in 0..=big_l {
                let v = b[big_l * dim + s];
                if v == 0.0 {
                    continue;
                }
                if stage == n {
                    a[big_l * dim] += v * beta * factor.powi(s as i32);
                } else {
                    let mut w = v * beta;
                    for q in 0..=s {
                        a[big_l * dim + s - q] += w;
                        w *= factor;
                    }
                }
            }
        }
    }
    let (w0, w) = cfg.series_weights();
    let mut wp = w0;
    let mut fact = 1.0;
    (0..dim)
        .map(|p| {
            if p > 0 {
                wp *= w;
                fact *= p as f64;
            }
            wp * fact * a[p * dim]
        })
        .collect()
}

fn kahan_sum(values: &[f64]) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for &v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// `Psi(x)` by the p-series with an absolute tolerance and a default order cap of 40.
pub fn cf_value(x: f64, cfg: &FasConfig, tol: f64) -> Result<(f64, CfTruncation)> {
    cf_value_capped(x, cfg, tol, DEFAULT_P_CAP)
}

/// `Psi(x)` by the p-series: stops at the first order where the remainder
/// bound is below `tol` and the last term is below `tol / 10`.
pub fn cf_value_capped(
    x: f64,
    cfg: &FasConfig,
    tol: f64,
    cap: usize,
) -> Result<(f64, CfTruncation)> {
    if !(x <= 0.0) {
        return Err(FasError::invalid("x", format!("must be <= 0, got {x}")));
    }
    if cfg.n > MAX_PORTS {
        return Err(FasError::invalid(
            "N",
            format!("series supports N <= {MAX_PORTS}"),
        ));
    }
    if x == 0.0 {
        return Ok((
            1.0,
            CfTruncation {
                p_max: 0,
                tail_bound: 0.0,
                tol,
            },
        ));
    }
    let start = order_needed(x, cfg, tol, cap);
    let p = start.unwrap_or(cap);
    let terms = series_terms(x, cfg, cap.max(p));
    let mut p_stop = None;
    for q in p..=cap {
        if tail_bound(x, cfg, q) < tol && (q == 0 || terms[q] < tol / 10.0) {
            p_stop = Some(q);
            break;
        }
    }
    match p_stop {
        Some(q) => Ok((
            kahan_sum(&terms[..=q]),
            CfTruncation {
                p_max: q,
                tail_bound: tail_bound(x, cfg, q),
                tol,
            },
        )),
        None => Err(FasError::Truncation {
            partial: kahan_sum(&terms[..=cap]),
            tail_bound: tail_bound(x, cfg, cap),
            tol,
            p_max: cap,
        }),
    }
}

/// `Psi(x)` by the p-series to relative accuracy `rel_tol`, or `None` when
/// more than `cap` orders would be needed.
pub fn cf_series_relative(x: f64, cfg: &FasConfig, rel_tol: f64, cap: usize) -> Option<f64> {
    if x == 0.0 {
        return Some(1.0);
    }
    let (w0, _) = cfg.series_weights();
    let t0: f64 = w0
        * (1..=cfg.n)
            .map(|j| 1.0 / (1.0 - x * stage_scale(cfg, j)))
            .product::<f64>();
    let p = order_needed(x, cfg, rel_tol * t0, cap)?;
    let terms = series_terms(x, cfg, p);
    let s = kahan_sum(&terms);
    if tail_bound(x, cfg, p) <= rel_tol * s {
        Some(s)
    } else {
        let p2 = order_needed(x, cfg, rel_tol * s, cap)?;
        Some(kahan_sum(&series_terms(x, cfg, p2)))
    }
}

fn stage_scale(cfg: &FasConfig, stage: usize) -> f64 {
    let m2 = cfg.mu() * cfg.mu();
    if stage <= cfg.k {
        (1.0 - m2) * cfg.gamma_av()
    } else {
        (1.0 - m2) * cfg.gamma_av() * cfg.k as f64 / stage as f64
    }
}

/// `Psi(x)` assembled from aggregated signature weights (reference path).
pub fn cf_value_from_signatures(x: f64, cfg: &FasConfig, p_max: u32) -> Result<f64> {
    let weights = crate::compositions::signature_weights(p_max, cfg.n, cfg.k)?;
    let (w0, w) = cfg.series_weights();
    Ok(weights
        .iter()
        .map(|sw| w0 * w.powi(sw.p as i32) * sw.weight * cf_term_i(x, &sw.eta, cfg))
        .sum())
}

const WINDOW: f64 = 8.5;
/// Panel width in units of the Gaussian scale.
const PANEL: f64 = 0.75;

/// Laplace transform `E[exp(-sigma Z)]` of the sum `Z` of the K largest of N
/// independent unit-mean noncentral exponential variables with noncentrality
/// `lambda`, divided by `exp(-K lambda sigma / (1 + sigma))`.
fn conditional_transform(sigma: f64, lambda: f64, n: usize, k: usize) -> f64 {
    conditional_transform_with(sigma, lambda, n, k, PANEL)
}

fn conditional_transform_with(
    sigma: f64,
    lambda: f64,
    n: usize,
    k: usize,
    panel_width: f64,
) -> f64 {
    let s1 = 1.0 + sigma;
    if k == n {
        return s1.powi(-(n as i32));
    }
    let a = lambda.sqrt();
    let s = 1.0 / s1.sqrt();
    let cg = a / s1;
    let nk = (n - k) as f64;
    let v_star = a * (1.0 + nk) / (s1 + nk);
    let lo = (cg - WINDOW * s).max(0.0);
    let hi = cg.max(v_star) + WINDOW * s;
    let panel = ChebPanel::standard();
    let w = panel.weights();
    let np = panel.len();
    // f~(v) = 2v exp(-(v-a)^2) I0e(2av): density of sqrt(Z_i) given lambda.
    let f_tilde = |v: f64| 2.0 * v * (-(v - a) * (v - a)).exp() * specfun::bessel_i0e(2.0 * a * v);
    // g~(v) = f~(v) exp(-sigma v^2) exp(lambda sigma / (1+sigma))
    let f_and_g = |v: f64| {
        let base = 2.0 * v * specfun::bessel_i0e(2.0 * a * v);
        let d = v - cg;
        (
            base * (-(v - a) * (v - a)).exp(),
            base * (-s1 * d * d).exp(),
        )
    };
    // Mass of f below the window.
    let f_lo = (a - WINDOW).max(0.0);
    let mut f0 = 0.0;
    if lo > f_lo {
        let pieces = (lo - f_lo).ceil().max(1.0) as usize;
        let width = (lo - f_lo) / pieces as f64;
        for p in 0..pieces {
            let c = f_lo + (p as f64 + 0.5) * width;
            let h = 0.5 * width;
            f0 += h * panel
                .nodes
                .iter()
                .zip(w)
                .map(|(x, wj)| wj * f_tilde(c + h * x))
                .sum::<f64>();
        }
    }
    let pieces = (((hi - lo) / (panel_width * s)).ceil() as usize).clamp(1, 4000);
    let width = (hi - lo) / pieces as f64;
    let h = 0.5 * width;
    let total = pieces * np;
    let mut fv = vec![0.0; total];
    let mut gv = vec![0.0; total];
    for p in 0..pieces {
        let c = lo + (p as f64 + 0.5) * width;
        for (j, x) in panel.nodes.iter().enumerate() {
            let v = c + h * x;
            (fv[p * np + j], gv[p * np + j]) = f_and_g(v);
        }
    }
    // Running integrals.
    let mut big_f = vec![0.0; total];
    let mut big_m = vec![0.0; total];
    let mut acc = f0;
    for p in 0..pieces {
        let base = p * np;
        for i in 0..np {
            let row = &panel.cum[i];
            let v: f64 = row
                .iter()
                .zip(&fv[base..base + np])
                .map(|(c, f)| c * f)
                .sum();
            big_f[base + i] = (acc + h * v).min(1.0);
        }
        acc = big_f[base + np - 1];
    }
    let mut right = 0.0;
    for p in (0..pieces).rev() {
        let base = p * np;
        let cum: Vec<f64> = (0..np)
            .map(|i| {
                panel.cum[i]
                    .iter()
                    .zip(&gv[base..base + np])
                    .map(|(c, g)| c * g)
                    .sum::<f64>()
            })
            .collect();
        let tot = cum[np - 1];
        for i in 0..np {
            big_m[base + i] = right + h * (tot - cum[i]).max(0.0);
        }
        right += h * tot;
    }
    let mut sum = 0.0;
    for p in 0..pieces {
        let base = p * np;
        let mut part = 0.0;
        for j in 0..np {
            let idx = base + j;
            part +=
                w[j] * gv[idx] * big_f[idx].powi((n - k) as i32) * big_m[idx].powi((k - 1) as i32);
        }
        sum += h * part;
    }
    let coef = n as f64 * specfun::binomial((n - 1) as u64, (k - 1) as u64);
    coef * sum
}

/// `Psi(x)` by conditioning on the shared fading component: given it, the
/// per-port SNRs are independent noncentral exponentials, and the selection
/// statistics reduce to one-dimensional integrals.
pub fn cf_value_conditional(x: f64, cfg: &FasConfig, rel_tol: f64) -> Result<f64> {
    if !(x <= 0.0) {
        return Err(FasError::invalid("x", format!("must be <= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok(1.0);
    }
    let m2 = cfg.mu() * cfg.mu();
    let sigma = -x * (1.0 - m2) * cfg.gamma_av();
    let kappa = m2 / (1.0 - m2);
    let (n, k) = (cfg.n, cfg.k);
    if kappa == 0.0 {
        return Ok(conditional_transform(sigma, 0.0, n, k));
    }
    if k == n {
        let s1 = 1.0 + sigma;
        return Ok(s1.powi(-(n as i32)) / (1.0 + n as f64 * kappa * sigma / s1));
    }
    // With t the normalized power of the shared component, lambda = kappa t and
    // the transform carries exp(-K kappa t sigma / (1 + sigma)); substituting
    // u = r t with r = 1 + K kappa sigma / (1 + sigma) leaves a slowly varying factor.
    let r = 1.0 + k as f64 * kappa * sigma / (1.0 + sigma);
    let integrand = |u: f64| (-u).exp() * conditional_transform(sigma, kappa * u / r, n, k);
    let breaks = [0.0, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0, 32.0, 64.0, 120.0];
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol,
        max_intervals: 400,
    };
    let res = quad::integrate_breaks(integrand, &breaks, opts)?;
    Ok(res.value / r)
}

/// Which exact route evaluated `Psi`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfRoute {
    Series,
    Conditional,
}

/// `Psi(x)` to relative accuracy `rel_tol`: the p-series when it converges
/// within the order cap, the conditional route otherwise.
pub fn cf_value_auto(x: f64, cfg: &FasConfig, rel_tol: f64) -> Result<(f64, CfRoute)> {
    if cfg.n <= MAX_PORTS {
        if let Some(v) = cf_series_relative(x, cfg, rel_tol, DEFAULT_P_CAP) {
            return Ok((v, CfRoute::Series));
        }
    }
    Ok((cf_value_conditional(x, cfg, rel_tol)?, CfRoute::Conditional))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::compositions::{enumerate_l, enumerate_q, eta_signature, CompositionIndex};
    use proptest::prelude::*;

    fn cfg(n: usize, k: usize, mu: f64, gamma: f64) -> FasConfig {
        FasConfig::with_gamma(n, k, CorrelationModel::from_mu(mu, 1.0).unwrap(), gamma).unwrap()
    }

    /// Term-by-term evaluation of the double sum from the streams.
    fn stream_series(x: f64, c: &FasConfig, p_max: u32) -> f64 {
        let (w0, w) = c.series_weights();
        let mut total = 0.0;
        for p in 0..=p_max {
            for l in enumerate_l(p, c.n) {
                let parts: Vec<u64> = l.iter().map(|&v| v as u64).collect();
                let multi = specfun::multinomial(p as u64, &parts).unwrap();
                for q in enumerate_q(&l) {
                    let sig = eta_signature(&q, c.k, c.n).unwrap();
                    let idx = CompositionIndex::new(l.clone(), q).unwrap();
                    total +=
                        w0 * w.powi(p as i32) * multi * idx.inner_weight() * cf_term_i(x, &sig, c);
                }
            }
        }
        total
    }

    #[test]
    fn origin_is_one() {
        for (n, k, mu) in [(1, 1, 0.0), (4, 2, 0.7), (10, 4, 0.968)] {
            let (v, t) = cf_value(0.0, &cfg(n, k, mu, 3.0), 1e-10).unwrap();
            assert_eq!(v, 1.0);
            assert_eq!(t.p_max, 0);
        }
    }

    #[test]
    fn single_port_closed_form() {
        for mu in [0.0, 0.3, 0.7] {
            let c = cfg(1, 1, mu, 4.0);
            for x in [-0.01, -0.3, -2.0] {
                let (v, t) = cf_value(x, &c, 1e-12).unwrap();
                let want = 1.0 / (1.0 - x * 4.0);
                assert!((v - want).abs() <= 1e-12, "mu={mu} x={x}");
                assert!(t.tail_bound <= t.tol);
            }
        }
    }

    #[test]
    fn uncorrelated_product() {
        let c = cfg(5, 2, 0.0, 3.0);
        for x in [-0.1, -1.0, -7.0] {
            let (v, t) = cf_value(x, &c, 1e-12).unwrap();
            let mut want = (1.0 - x * 3.0).powi(-2);
            for j in 3..=5 {
                want /= 1.0 - x * 2.0 * 3.0 / j as f64;
            }
            assert!((v - want).abs() <= 1e-14 * want.max(1.0));
            assert_eq!(t.p_max, 0);
        }
    }

    #[test]
    fn term_examples() {
        let c = cfg(3, 2, 0.0, 1.0);
        let sig = EtaSignature { eta: vec![2, 1] };
        let want = 0.5 * 0.5 * (1.0 / (1.0 + 2.0 / 3.0));
        assert!((cf_term_i(-1.0, &sig, &c) - want).abs() < 1e-15);
        assert!((cf_term_i(-1.0, &sig, &c) - 0.15).abs() < 1e-15);
        assert_eq!(cf_term_i(0.0, &sig, &c), 1.0);
        let c = cfg(4, 4, 0.5, 2.0);
        let sig = EtaSignature { eta: vec![4] };
        let want = (1.0 + 0.75 * 2.0 * 0.7f64).powi(-4);
        assert!((cf_term_i(-0.7, &sig, &c) - want).abs() < 1e-15);
    }

    #[test]
    fn dp_matches_streams() {
        for (n, k, mu) in [
            (3, 1, 0.5),
            (3, 2, 0.7),
            (4, 2, 0.6),
            (4, 4, 0.6),
            (5, 3, 0.4),
        ] {
            let c = cfg(n, k, mu, 2.0);
            for x in [-0.2, -1.5] {
                let dp: f64 = series_terms(x, &c, 6).iter().sum();
                let st = stream_series(x, &c, 6);
                let sg = cf_value_from_signatures(x, &c, 6).unwrap();
                assert!(((dp - st) / st).abs() < 1e-13, "n={n} k={k}");
                assert!(((sg - st) / st).abs() < 1e-13, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn full_selection_is_mrc() {
        // K = N: every port is combined; the c.f. of a sum of equicorrelated
        // exponentials is (1 - x(1-mu^2)G)^{-(N-1)} (1 - x(1+(N-1)mu^2)G)^{-1}.
        for (n, mu) in [(2, 0.5), (4, 0.7), (6, 0.3)] {
            let c = cfg(n, n, mu, 2.5);
            for x in [-0.05, -0.5, -3.0] {
                let v = cf_series_relative(x, &c, 1e-14, 400).unwrap();
                let m2 = mu * mu;
                let want = (1.0 - x * (1.0 - m2) * 2.5).powi(-(n as i32 - 1))
                    / (1.0 - x * (1.0 + (n as f64 - 1.0) * m2) * 2.5);
                assert!(
                    ((v - want) / want).abs() < 1e-11,
                    "n={n} x={x}: {v} vs {want}"
                );
                let cond = cf_value_conditional(x, &c, 1e-13).unwrap();
                assert!(((cond - want) / want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn conditional_matches_series() {
        for (n, k, mu, g) in [
            (3, 1, 0.5, 2.0),
            (4, 2, 0.7, 5.0),
            (6, 3, 0.7, 50.0),
            (5, 1, 0.3, 0.5),
            (6, 5, 0.6, 5.0),
        ] {
            let c = cfg(n, k, mu, g);
            for x in [-0.01, -0.3, -4.0] {
                let s = cf_series_relative(x, &c, 1e-14, 200).unwrap();
                let v = cf_value_conditional(x, &c, 1e-12).unwrap();
                assert!(
                    ((v - s) / s).abs() < 1e-10,
                    "n={n} k={k} mu={mu} x={x}: {v} vs {s}"
                );
            }
        }
    }

    #[test]
    fn conditional_matches_long_series() {
        for (n, k, mu, g, x) in [
            (4, 2, 0.95, 10.0, -1.0),
            (8, 3, 0.9, 20.0, -0.5),
            (10, 4, 0.9, 10.0, -0.5),
        ] {
            let c = cfg(n, k, mu, g);
            let s = cf_series_relative(x, &c, 1e-14, 300).unwrap();
            let v = cf_value_conditional(x, &c, 1e-12).unwrap();
            assert!(((v - s) / s).abs() < 1e-10, "n={n} k={k}: {v} vs {s}");
        }
    }

    #[test]
    fn conditional_runtime_sample() {
        let model = CorrelationModel::from_w(0.2, 1.0).unwrap();
        let c = FasConfig::with_gamma(10, 4, model, 100.0).unwrap();
        let t = std::time::Instant::now();
        let mut acc = 0.0;
        for i in 1..=50 {
            acc += cf_value_conditional(-0.02 * i as f64, &c, 1e-11).unwrap();
        }
        eprintln!("50 conditional evaluations: {:?} (sum {acc})", t.elapsed());
        assert!(acc > 0.0);
    }

    #[test]
    fn truncation_failure_reported() {
        let c = cfg(10, 4, 0.968, 10.0);
        match cf_value(-0.01, &c, 1e-10) {
            Err(FasError::Truncation {
                partial,
                tail_bound,
                ..
            }) => {
                assert!(partial > 0.0 && partial < 1.0);
                assert!(tail_bound > 1e-10);
            }
            other => panic!("expected truncation failure, got {other:?}"),
        }
    }

    #[test]
    fn larger_cap_moves_less_than_bound() {
        let c = cfg(4, 2, 0.7, 3.0);
        let (v1, t1) = cf_value_capped(-0.4, &c, 1e-6, 40).unwrap();
        let s = cf_series_relative(-0.4, &c, 1e-15, 200).unwrap();
        assert!((v1 - s).abs() <= t1.tail_bound);
    }

    proptest! {
        #[test]
        fn decreasing_in_magnitude(n in 1usize..6, kk in 0usize..6, mu in 0.0f64..0.8, g in 0.1f64..20.0) {
            let k = 1 + kk % n;
            let c = cfg(n, k, mu, g);
            let mut prev = 1.0;
            for i in 1..12 {
                let x = -0.05 * (1.6f64).powi(i);
                let (v, _) = cf_value_auto(x, &c, 1e-12).unwrap();
                prop_assert!(v > 0.0 && v < prev);
                prev = v;
            }
        }

        #[test]
        fn tail_bound_respected(n in 1usize..5, kk in 0usize..5, mu in 0.0f64..0.7, x in -5.0f64..-0.01) {
            let k = 1 + kk % n;
            let c = cfg(n, k, mu, 3.0);
            let (v, t) = cf_value_capped(x, &c, 1e-9, 200).unwrap();
            let exact = cf_series_relative(x, &c, 1e-15, 300).unwrap();
            prop_assert!((v - exact).abs() <= t.tail_bound + 1e-15);
            prop_assert!(t.tail_bound <= t.tol);
        }
    }
}
