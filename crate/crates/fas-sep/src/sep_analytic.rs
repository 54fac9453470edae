//! Symbol error probability: closed form, quadrature reference and high-SNR
//! asymptotics.
//!
//! Every scheme reduces to `J(c, Theta) = (1/pi) int_0^Theta Psi(-c / sin^2 t) dt`.
//! The closed form expands `Psi` in the composition series, splits each
//! rational term into partial fractions over the distinct poles and
//! integrates each basis function exactly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cf_engine::{self, FasConfig, DEFAULT_P_CAP, MAX_PORTS};
use crate::compositions::EtaSignature;
use crate::dd::Dd;
use crate::error::{FasError, Result};
use crate::fixed::Wide;
use crate::modem::{ModulationScheme, SchemeKind};
use crate::quad::{self, QuadOptions};
use crate::specfun;

/// Relative truncation target of the closed-form series.
pub const CF_REL_TOL: f64 = 1e-11;
/// Largest accepted rounding amplification of the closed form, relative to the result.
pub const CF_MAX_CANCELLATION: f64 = 1e-10;

/// Arguments of `J(c, Theta)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegralSpec {
    pub c: f64,
    pub theta: f64,
    pub cfg: FasConfig,
}

impl IntegralSpec {
    pub fn new(c: f64, theta: f64, cfg: FasConfig) -> Result<Self> {
        if !(c > 0.0) || !c.is_finite() {
            return Err(FasError::invalid("c", format!("must be positive, got {c}")));
        }
        if !(theta > 0.0 && theta < std::f64::consts::PI) {
            return Err(FasError::invalid(
                "Theta",
                format!("must lie in (0, pi), got {theta}"),
            ));
        }
        Ok(IntegralSpec { c, theta, cfg })
    }

    /// `c (1 - mu^2) K Gamma`: the pole scale common to all poles.
    fn pole_base(&self) -> Dd {
        let mu = Dd::new(self.cfg.mu());
        let one_m = Dd::ONE - mu * mu;
        one_m * self.c * self.cfg.k as f64 * self.cfg.gamma_av()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SepMethod {
    ClosedForm,
    Quadrature,
    Asymptotic,
    MonteCarlo,
}

impl SepMethod {
    pub fn name(self) -> &'static str {
        match self {
            SepMethod::ClosedForm => "closed_form",
            SepMethod::Quadrature => "quadrature",
            SepMethod::Asymptotic => "asymptotic",
            SepMethod::MonteCarlo => "monte_carlo",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Diagnostics {
    ClosedForm {
        p_max: usize,
        tail_bound: f64,
        cancellation: f64,
    },
    Quadrature {
        abs_err: f64,
        evals: usize,
        note: Option<String>,
    },
    Asymptotic,
    Trials {
        trials: u64,
        errors: u64,
    },
}

impl Diagnostics {
    /// Compact single-field description.
    pub fn summary(&self) -> String {
        match self {
            Diagnostics::ClosedForm {
                p_max,
                tail_bound,
                cancellation,
            } => format!("p_max={p_max} tail={tail_bound:.3e} cancel={cancellation:.1e}"),
            Diagnostics::Quadrature {
                abs_err,
                evals,
                note,
            } => match note {
                Some(n) => format!("abs_err={abs_err:.3e} evals={evals} note={n}"),
                None => format!("abs_err={abs_err:.3e} evals={evals}"),
            },
            Diagnostics::Asymptotic => "high-snr".to_string(),
            Diagnostics::Trials { trials, errors } => format!("trials={trials} errors={errors}"),
        }
    }

    fn merge(self, other: Diagnostics) -> Diagnostics {
        match (self, other) {
            (
                Diagnostics::ClosedForm {
                    p_max: p1,
                    tail_bound: t1,
                    cancellation: c1,
                },
                Diagnostics::ClosedForm {
                    p_max: p2,
                    tail_bound: t2,
                    cancellation: c2,
                },
            ) => Diagnostics::ClosedForm {
                p_max: p1.max(p2),
                tail_bound: t1 + t2,
                cancellation: c1.max(c2),
            },
            (
                Diagnostics::Quadrature {
                    abs_err: e1,
                    evals: n1,
                    note,
                },
                Diagnostics::Quadrature {
                    abs_err: e2,
                    evals: n2,
                    note: note2,
                },
            ) => Diagnostics::Quadrature {
                abs_err: e1 + e2,
                evals: n1 + n2,
                note: note.or(note2),
            },
            (a, _) => a,
        }
    }
}

/// Probability with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SepResult {
    pub value: f64,
    pub method: SepMethod,
    pub diagnostics: Diagnostics,
}

fn dd_binomial(n: u64, k: u64) -> Dd {
    if k > n {
        return Dd::ZERO;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        match acc.checked_mul((n - i) as u128) {
            Some(v) => acc = v / (i + 1) as u128,
            None => {
                let mut d = Dd::from_u128(acc);
                for j in i..k {
                    d = d * (n - j) as f64 / (j + 1) as f64;
                }
                return d;
            }
        }
    }
    Dd::from_u128(acc)
}

/// Integrals of the partial-fraction basis on one pole.
struct PoleKernels {
    /// `G_n = (1/pi) int_0^Theta (sin^2 t / (sin^2 t + a))^n dt`, `n = 0..`.
    g: Vec<Dd>,
    /// Magnitude of the terms summed to form each `G_n`.
    g_mag: Vec<f64>,
}

/// `H_i = (1/pi) int_0^Theta (1 + c sin^2 t)^{-i} dt` for `i = 0..=n_max`.
fn h_kernels(c: Dd, theta: f64, n_max: usize) -> Vec<Dd> {
    let th = Dd::new(theta);
    let (s, co) = th.sin_cos();
    let one_c = Dd::ONE + c;
    let root = one_c.sqrt();
    let big_a = Dd::atan2(root * s, co);
    let d = co * co + one_c * s * s;
    let cos2_d = co * co / d;
    // T_l = A + (sqrt(1+c)/2) sum_{p=1}^{l} 4^p / (C(2p,p) p) sin cos^{2p-1} / D^p
    let mut t = Vec::with_capacity(n_max);
    t.push(big_a);
    let mut q = s * co / d;
    let mut acc = Dd::ZERO;
    for p in 1..n_max.max(1) {
        let coef = Dd::new(4f64.powi(p as i32)) / (dd_binomial(2 * p as u64, p as u64) * p as f64);
        acc += coef * q;
        t.push(big_a + root * acc * 0.5);
        q = q * cos2_d;
    }
    // H_i = (1 / (pi sqrt(1+c))) sum_l C(i-1,l) C(2l,l) z^l v^{i-1-l} T_l,
    // z = c / (4(1+c)), v = 1/(1+c): both bounded, so no overflow for extreme c.
    let v = one_c.recip();
    let z = c * v / 4.0;
    let mut zp = vec![Dd::ONE; n_max.max(1)];
    let mut vp = vec![Dd::ONE; n_max.max(1)];
    for l in 1..n_max {
        zp[l] = zp[l - 1] * z;
        vp[l] = vp[l - 1] * v;
    }
    let lead = root.recip() / Dd::PI;
    let mut h = Vec::with_capacity(n_max + 1);
    h.push(th / Dd::PI);
    for i in 1..=n_max {
        let mut sum = Dd::ZERO;
        for (l, tl) in t.iter().enumerate().take(i) {
            sum += dd_binomial((i - 1) as u64, l as u64)
                * dd_binomial(2 * l as u64, l as u64)
                * zp[l]
                * vp[i - 1 - l]
                * *tl;
        }
        h.push(sum * lead);
    }
    h
}

fn pole_kernels(a: Dd, theta: f64, n_max: usize) -> PoleKernels {
    let h = h_kernels(a.recip(), theta, n_max);
    let mut g = Vec::with_capacity(n_max + 1);
    let mut g_mag = Vec::with_capacity(n_max + 1);
    for n in 0..=n_max {
        let mut v = h[0];
        let mut mag = h[0].to_f64().abs();
        for (i, hi) in h.iter().enumerate().take(n + 1).skip(1) {
            let term = dd_binomial(n as u64, i as u64) * *hi;
            mag += term.to_f64().abs();
            if i % 2 == 1 {
                v = v - term;
            } else {
                v += term;
            }
        }
        g.push(v);
        g_mag.push(mag);
    }
    PoleKernels { g, g_mag }
}

/// Partial-fraction split of one rational term
/// `prod_k (1 + x / c_k)^{-eta_k} = sum_{k,n} alpha_{k,n} (1 + x / c_k)^{-n}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartialFractionCoeffs {
    /// `alpha[k][n - 1]`.
    pub alpha: Vec<Vec<f64>>,
    /// Reciprocal pole scales `c_k`.
    pub poles: Vec<f64>,
    alpha_dd: Vec<Vec<Dd>>,
    scale_dd: Vec<Dd>,
}

impl PartialFractionCoeffs {
    /// Coefficients for signature `eta` of configuration `spec`, validated by
    /// reconstructing the rational function at five random points.
    pub fn new(sig: &EtaSignature, spec: &IntegralSpec) -> Result<Self> {
        let k_sel = spec.cfg.k;
        let nt = spec.cfg.n_tilde();
        if sig.eta.len() != nt {
            return Err(FasError::invalid(
                "eta",
                format!("expected {nt} multiplicities, got {}", sig.eta.len()),
            ));
        }
        let base = spec.pole_base();
        let lam: Vec<f64> = (0..nt).map(|j| (k_sel + j) as f64).collect();
        let scale_dd: Vec<Dd> = lam.iter().map(|&l| base / l).collect();
        let mut alpha_dd = Vec::with_capacity(nt);
        for k in 0..nt {
            let eta_k = sig.eta[k] as usize;
            if eta_k == 0 {
                alpha_dd.push(Vec::new());
                continue;
            }
            // Leading constant prod_{p != k} ((K+p-1)/(p-k))^{eta_p}.
            let mut lead = Dd::ONE;
            for p in 0..nt {
                if p != k {
                    let r = Dd::new(lam[p]) / (p as f64 - k as f64);
                    lead = lead * r.powi(sig.eta[p]);
                }
            }
            // exp(sum_q e_q u^q) with e_q = (1/q) sum_{p != k} eta_p ((K+k-1)/(k-p))^q.
            let m = eta_k - 1;
            let ratios: Vec<(Dd, u32)> = (0..nt)
                .filter(|&p| p != k && sig.eta[p] > 0)
                .map(|p| (Dd::new(lam[k]) / (k as f64 - p as f64), sig.eta[p]))
                .collect();
            let mut pw: Vec<Dd> = ratios.iter().map(|(r, _)| *r).collect();
            let mut e = vec![Dd::ZERO; m + 1];
            for (q, eq) in e.iter_mut().enumerate().skip(1) {
                let mut acc = Dd::ZERO;
                for (i, (r, eta_p)) in ratios.iter().enumerate() {
                    acc += pw[i] * *eta_p as f64;
                    pw[i] = pw[i] * *r;
                }
                *eq = acc / q as f64;
            }
            let mut b = vec![Dd::ZERO; m + 1];
            b[0] = Dd::ONE;
            for j in 1..=m {
                let mut acc = Dd::ZERO;
                for i in 1..=j {
                    acc += e[i] * b[j - i] * i as f64;
                }
                b[j] = acc / j as f64;
            }
            alpha_dd.push((1..=eta_k).map(|n| lead * b[eta_k - n]).collect());
        }
        let pf = PartialFractionCoeffs {
            alpha: alpha_dd
                .iter()
                .map(|v| v.iter().map(|x| x.to_f64()).collect())
                .collect(),
            poles: scale_dd.iter().map(|a| a.recip().to_f64()).collect(),
            alpha_dd,
            scale_dd,
        };
        pf.check(sig)?;
        Ok(pf)
    }

    fn check(&self, sig: &EtaSignature) -> Result<()> {
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
        let a_mid = self.scale_dd[self.scale_dd.len() / 2].to_f64();
        for _ in 0..5 {
            let y = (rng.random_range(-2.0..2.0f64)).exp() / a_mid;
            let want: Dd = self
                .scale_dd
                .iter()
                .zip(&sig.eta)
                .fold(Dd::ONE, |acc, (a, &e)| acc / (Dd::ONE + *a * y).powi(e));
            let got = self.evaluate(y);
            let rel = ((got - want) / want).to_f64().abs();
            if !(rel <= 1e-8) {
                return Err(FasError::NumericInconsistency(format!(
                    "partial-fraction reconstruction off by {rel:.3e} for eta {:?}",
                    sig.eta
                )));
            }
        }
        Ok(())
    }

    fn evaluate(&self, y: f64) -> Dd {
        let mut total = Dd::ZERO;
        for (a, row) in self.scale_dd.iter().zip(&self.alpha_dd) {
            let base = (Dd::ONE + *a * y).recip();
            let mut pw = base;
            for al in row {
                total += *al * pw;
                pw = pw * base;
            }
        }
        total
    }
}

/// `F(eta) = (1/pi) int_0^Theta prod_k (sin^2 t / (sin^2 t + a_k))^{eta_k} dt`
/// from the partial fractions of one signature.
pub fn integral_f(sig: &EtaSignature, spec: &IntegralSpec) -> Result<f64> {
    let pf = PartialFractionCoeffs::new(sig, spec)?;
    let mut total = Dd::ZERO;
    for (a, row) in pf.scale_dd.iter().zip(&pf.alpha_dd) {
        let ker = pole_kernels(*a, spec.theta, row.len());
        for (n, al) in row.iter().enumerate() {
            total += *al * ker.g[n + 1];
        }
    }
    Ok(total.to_f64())
}

/// `J` assembled signature by signature (reference path for small cases).
pub fn integral_j_by_signatures(spec: &IntegralSpec, p_max: u32) -> Result<f64> {
    let weights = crate::compositions::signature_weights(p_max, spec.cfg.n, spec.cfg.k)?;
    let (w0, w) = spec.cfg.series_weights();
    let mut total = 0.0;
    for sw in &weights {
        total += w0 * w.powi(sw.p as i32) * sw.weight * integral_f(&sw.eta, spec)?;
    }
    Ok(total)
}

/// Partial-fraction coefficients of the series for `Psi`, aggregated over all
/// signatures of each order: for order `p`, pole `j` and power `n`,
/// `coef[p][j][n - 1]` multiplies `(1 + a_j y)^{-n}`.
#[derive(Debug)]
struct PfTable {
    coef: Vec<Vec<Vec<Dd>>>,
}

/// Raw Laurent coefficients before the `w0 w^p` weights (the `p!` is folded
/// in); they depend on `(N, K)` only.
#[derive(Debug)]
struct RawTable {
    p_max: usize,
    coef: Vec<Vec<Vec<Dd>>>,
}

fn raw_cache() -> &'static Mutex<HashMap<(usize, usize), Arc<RawTable>>> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<RawTable>>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

fn raw_table(n: usize, k: usize, p_max: usize) -> Option<Arc<RawTable>> {
    let key = (n, k);
    if let Some(t) = raw_cache().lock().expect("cache poisoned").get(&key) {
        if t.p_max >= p_max {
            return Some(t.clone());
        }
    }
    // Round up so that neighbouring requests share one table.
    let build_p = (p_max.div_ceil(8) * 8).min(DEFAULT_P_CAP).max(p_max);
    let table = Arc::new(build_raw_table(n, k, build_p)?);
    let mut cache = raw_cache().lock().expect("cache poisoned");
    let entry = cache.entry(key).or_insert_with(|| table.clone());
    if entry.p_max < table.p_max {
        *entry = table.clone();
    }
    Some(entry.clone())
}

fn pf_table(cfg: &FasConfig, p_max: usize) -> Result<PfTable> {
    let raw = raw_table(cfg.n, cfg.k, p_max).ok_or_else(|| {
        FasError::NumericInconsistency(
            "partial-fraction table exceeds the fixed-point range".into(),
        )
    })?;
    let mu_d = Dd::new(cfg.mu());
    let m2 = mu_d * mu_d;
    let den = Dd::ONE + m2 * (cfg.n as f64 - 1.0);
    let w0 = (Dd::ONE - m2) / den;
    let w = m2 / den;
    let mut wp = w0;
    let coef = raw
        .coef
        .iter()
        .take(p_max + 1)
        .enumerate()
        .map(|(p, row)| {
            if p > 0 {
                wp = wp * w;
            }
            row.iter()
                .map(|c| c.iter().map(|v| wp * *v).collect())
                .collect()
        })
        .collect();
    Ok(PfTable { coef })
}

/// Fixed-point numbers with `FX_BITS` fractional bits.
const FX_BITS: u64 = 256;
const HEADROOM_BITS: u64 = 128;

/// Laurent series in `u = 1 + a_j y` on the exponent window `[-e, e)`.
struct Laurent {
    e: usize,
}

impl Laurent {
    fn len(&self) -> usize {
        2 * self.e
    }

    /// `out += s * x`.
    fn axpy(&self, out: &mut [Wide], s: u128, x: &[Wide]) {
        for (o, v) in out.iter_mut().zip(x) {
            if !v.is_zero() {
                o.add_mul_u128(v, s);
            }
        }
    }

    /// Multiplication by `u^{-1}`.
    fn shift_down(&self, x: &mut [Wide]) {
        x.rotate_left(1);
        if let Some(last) = x.last_mut() {
            *last = Wide::ZERO;
        }
    }

    /// Division by `(1 - r) + r u` with `r = lam_j / lam_t`.
    fn divide_linear(&self, x: &mut [Wide], lam_t: i64, lam_j: i64) {
        let d = lam_t - lam_j;
        let mut prev = Wide::ZERO;
        for v in x.iter_mut() {
            let y = v.mul_i64(lam_t).sub(&prev.mul_i64(lam_j)).div_i64(d);
            *v = y;
            prev = y;
        }
    }
}

/// Laurent coefficients at every pole, in fixed point so that the heavy
/// cancellation between paths of the recursion is resolved exactly. State
/// `(L, s)` is scaled by `L!`, which makes every transition weight the integer
/// `C(l + s, l) C(L + l, l)`.
fn build_raw_table(n: usize, k: usize, p_max: usize) -> Option<RawTable> {
    let nt = n - k + 1;
    let dim = p_max + 1;
    let mut binom = vec![vec![0u128; dim + 1]; dim + 1];
    for i in 0..=dim {
        binom[i][0] = 1;
        for j in 1..=i {
            binom[i][j] = binom[i - 1][j - 1] + if j < i { binom[i - 1][j] } else { 0 };
        }
    }
    let per_pole: Option<Vec<Vec<Vec<Dd>>>> = (0..nt)
        .into_par_iter()
        .map(|j| {
            let lam_j = (k + j) as i64;
            let e = if j == 0 { k + p_max } else { p_max + 1 };
            let lr = Laurent { e };
            let len = lr.len();
            let mut a = vec![Wide::ZERO; dim * dim * len];
            let mut b = vec![Wide::ZERO; dim * dim * len];
            let mut live_a = vec![false; dim * dim];
            let mut live_b = vec![false; dim * dim];
            a[e] = Wide::pow2(FX_BITS);
            live_a[0] = true;
            for stage in 1..=n {
                let lam_t = stage.max(k) as i64;
                let own = lam_t == lam_j;
                let t = stage as i64;
                b.iter_mut().for_each(|v| *v = Wide::ZERO);
                live_b.iter_mut().for_each(|v| *v = false);
                for big_l in 0..dim {
                    for s in 0..=big_l {
                        let idx = big_l * dim + s;
                        if !live_a[idx] {
                            continue;
                        }
                        let src = a[idx * len..(idx + 1) * len].to_vec();
                        for l in 0..(dim - big_l) {
                            let tgt = (big_l + l) * dim + s + l;
                            let weight = binom[l + s][l] * binom[big_l + l][l];
                            lr.axpy(&mut b[tgt * len..(tgt + 1) * len], weight, &src);
                            live_b[tgt] = true;
                        }
                    }
                }
                a.iter_mut().for_each(|v| *v = Wide::ZERO);
                live_a.iter_mut().for_each(|v| *v = false);
                let apply_beta = |x: &mut [Wide]| {
                    if own {
                        lr.shift_down(x);
                    } else {
                        lr.divide_linear(x, lam_t, lam_j);
                    }
                };
                for big_l in 0..dim {
                    if !(0..=big_l).any(|s| live_b[big_l * dim + s]) {
                        continue;
                    }
                    if stage == n {
                        // beta * sum_s b_s (beta / t)^s by Horner.
                        let mut h = vec![Wide::ZERO; len];
                        for s in (0..=big_l).rev() {
                            if s < big_l {
                                apply_beta(&mut h);
                                h.iter_mut().for_each(|v| *v = v.div_i64(t));
                            }
                            let idx = big_l * dim + s;
                            if live_b[idx] {
                                for (hv, bv) in h.iter_mut().zip(&b[idx * len..(idx + 1) * len]) {
                                    hv.add_assign(bv);
                                }
                            }
                        }
                        apply_beta(&mut h);
                        let idx = big_l * dim;
                        a[idx * len..(idx + 1) * len].copy_from_slice(&h);
                        live_a[idx] = true;
                    } else {
                        // a'_s = beta (b_s + a'_{s+1} / t).
                        let mut next: Option<Vec<Wide>> = None;
                        for s in (0..=big_l).rev() {
                            let idx = big_l * dim + s;
                            let mut h = if live_b[idx] {
                                b[idx * len..(idx + 1) * len].to_vec()
                            } else {
                                vec![Wide::ZERO; len]
                            };
                            if let Some(nx) = &next {
                                for (hv, nv) in h.iter_mut().zip(nx) {
                                    hv.add_assign(&nv.div_i64(t));
                                }
                            } else if !live_b[idx] {
                                continue;
                            }
                            apply_beta(&mut h);
                            a[idx * len..(idx + 1) * len].copy_from_slice(&h);
                            live_a[idx] = true;
                            next = Some(h);
                        }
                    }
                }
                if a.iter().any(|v| v.bits() + HEADROOM_BITS > Wide::BITS) {
                    return None;
                }
            }
            Some(
                (0..dim)
                    .map(|p| {
                        let series = &a[p * dim * len..(p * dim + 1) * len];
                        (1..=e).map(|nn| series[e - nn].to_dd(FX_BITS)).collect()
                    })
                    .collect(),
            )
        })
        .collect();
    let per_pole = per_pole?;
    let coef = (0..dim)
        .map(|p| per_pole.iter().map(|pole| pole[p].clone()).collect())
        .collect();
    Some(RawTable { p_max, coef })
}

/// Reconstruct the truncated series for `Psi` from the table at normalized
/// argument `y` (pole `j` sits at `y = -(K + j - 1)`).
fn table_value(table: &PfTable, p_upto: usize, k: usize, y: f64) -> Dd {
    let mut total = Dd::ZERO;
    for row in table.coef.iter().take(p_upto + 1) {
        for (j, c) in row.iter().enumerate() {
            let base = (Dd::ONE + Dd::new(y) / (k + j) as f64).recip();
            let mut pw = base;
            for v in c {
                total += *v * pw;
                pw = pw * base;
            }
        }
    }
    total
}

fn check_table(table: &PfTable, cfg: &FasConfig, p_upto: usize) -> Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x7ab1e);
    let unit = (1.0 - cfg.mu() * cfg.mu()) * cfg.k as f64 * cfg.gamma_av();
    for _ in 0..5 {
        let y = rng.random_range(-2.0..2.0f64).exp() * cfg.k as f64;
        let got = table_value(table, p_upto, cfg.k, y).to_f64();
        let want: f64 = cf_engine::series_terms(-y / unit, cfg, p_upto).iter().sum();
        let rel = ((got - want) / want).abs();
        if !(rel <= 1e-10) {
            return Err(FasError::NumericInconsistency(format!(
                "aggregated partial fractions off by {rel:.3e} at y = {y}"
            )));
        }
    }
    Ok(())
}

/// `(1/pi) int_0^Theta f(-c / sin^2 t) dt` for a smooth bound function `f`.
fn theta_average(spec: &IntegralSpec, f: impl Fn(f64) -> f64) -> f64 {
    let g = |t: f64| {
        let s = t.sin();
        if s == 0.0 {
            0.0
        } else {
            f(-spec.c / (s * s))
        }
    };
    let opts = QuadOptions {
        abs_tol: 0.0,
        rel_tol: 1e-6,
        max_intervals: 200,
    };
    match quad::integrate(g, 0.0, spec.theta, opts) {
        Ok(r) => r.value / std::f64::consts::PI,
        Err(FasError::QuadratureNonConvergence { estimate, error }) => {
            (estimate + error) / std::f64::consts::PI
        }
        Err(_) => f64::INFINITY,
    }
}

/// Order of the closed-form series and its truncation bound, or `None` when
/// the cap is exceeded (then the bound at the cap is returned).
fn closed_form_order(spec: &IntegralSpec) -> (Option<usize>, f64, f64) {
    let cfg = spec.cfg;
    let (w0, _) = cfg.series_weights();
    let j0_lower = theta_average(spec, |x| {
        w0 * (1..=cfg.n)
            .map(|t| {
                1.0 / (1.0
                    - x * (1.0 - cfg.mu() * cfg.mu()) * cfg.gamma_av() * cfg.k as f64
                        / t.max(cfg.k) as f64)
            })
            .product::<f64>()
    });
    let tol = CF_REL_TOL * j0_lower;
    let mut tail = 0.0;
    for p in 0..=DEFAULT_P_CAP {
        tail = theta_average(spec, |x| cf_engine::tail_bound(x, &cfg, p));
        if tail <= tol {
            return (Some(p), tail, tol);
        }
    }
    (None, tail, tol)
}

fn closed_form_sum(spec: &IntegralSpec, table: &PfTable, p_upto: usize) -> (f64, f64) {
    let base = spec.pole_base();
    let k = spec.cfg.k;
    let nt = spec.cfg.n_tilde();
    let mut total = Dd::ZERO;
    let mut mag = 0.0;
    for j in 0..nt {
        let n_max = table.coef[p_upto][j].len();
        let ker = pole_kernels(base / (k + j) as f64, spec.theta, n_max);
        for row in table.coef.iter().take(p_upto + 1) {
            for (n, c) in row[j].iter().enumerate() {
                if c.hi == 0.0 {
                    continue;
                }
                total += *c * ker.g[n + 1];
                mag += c.hi.abs() * ker.g_mag[n + 1];
            }
        }
    }
    let value = total.to_f64();
    (value, mag)
}

/// `J(c, Theta)` by the closed-form chain.
pub fn integral_j(spec: &IntegralSpec) -> Result<SepResult> {
    let cfg = spec.cfg;
    if cfg.n > MAX_PORTS {
        return Err(FasError::invalid(
            "N",
            format!("closed form supports N <= {MAX_PORTS}, got {}", cfg.n),
        ));
    }
    let (order, tail, tol) = closed_form_order(spec);
    let p = match order {
        Some(p) => p,
        None => {
            // Leading terms only; a full-order table is not worth building here.
            let cached = raw_cache()
                .lock()
                .expect("cache poisoned")
                .get(&(cfg.n, cfg.k))
                .map_or(0, |t| t.p_max);
            let shown = cached.max(8).min(DEFAULT_P_CAP);
            let table = pf_table(&cfg, shown)?;
            let (partial, _) = closed_form_sum(spec, &table, shown);
            return Err(FasError::Truncation {
                partial,
                tail_bound: tail,
                tol,
                p_max: DEFAULT_P_CAP,
            });
        }
    };
    let table = pf_table(&cfg, p)?;
    check_table(&table, &cfg, p)?;
    let (value, mag) = closed_form_sum(spec, &table, p);
    // Rounding of double-double terms is about 2^-104 of their magnitude.
    let cancellation = mag * 2f64.powi(-100) / value.abs().max(f64::MIN_POSITIVE);
    if !(cancellation <= CF_MAX_CANCELLATION) || !value.is_finite() {
        return Err(FasError::NumericInconsistency(format!(
            "closed form lost precision: estimated relative rounding {cancellation:.3e}"
        )));
    }
    Ok(SepResult {
        value: value.clamp(0.0, 1.0),
        method: SepMethod::ClosedForm,
        diagnostics: Diagnostics::ClosedForm {
            p_max: p,
            tail_bound: tail,
            cancellation,
        },
    })
}

/// `J(c, Theta)` by adaptive quadrature of the characteristic function.
pub fn integral_j_quadrature(spec: &IntegralSpec) -> Result<SepResult> {
    let cfg = spec.cfg;
    let first_err = std::cell::RefCell::new(None);
    let f = |t: f64| {
        let s = t.sin();
        if s == 0.0 {
            return 0.0;
        }
        match cf_engine::cf_value_auto(-spec.c / (s * s), &cfg, 1e-13) {
            Ok((v, _)) => v,
            Err(e) => {
                first_err.borrow_mut().get_or_insert(e);
                0.0
            }
        }
    };
    let mut breaks: Vec<f64> = (0..8)
        .rev()
        .map(|i| spec.theta / 2f64.powi(i + 1))
        .collect();
    breaks.insert(0, 0.0);
    breaks.push(spec.theta);
    let opts = QuadOptions {
        abs_tol: 1e-300,
        rel_tol: 1e-11,
        max_intervals: 2000,
    };
    let res = quad::integrate_breaks(f, &breaks, opts);
    if let Some(e) = first_err.into_inner() {
        return Err(e);
    }
    let res = res?;
    let pi = std::f64::consts::PI;
    Ok(SepResult {
        value: (res.value / pi).clamp(0.0, 1.0),
        method: SepMethod::Quadrature,
        diagnostics: Diagnostics::Quadrature {
            abs_err: res.abs_err / pi,
            evals: res.evals,
            note: None,
        },
    })
}

/// Evaluation route for the exact SEP.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExactMethod {
    /// Closed form when admissible, quadrature otherwise.
    Auto,
    ClosedForm,
    Quadrature,
}

/// `J` by the requested route; `Auto` falls back to quadrature with a note.
pub fn integral_j_with(spec: &IntegralSpec, method: ExactMethod) -> Result<SepResult> {
    match method {
        ExactMethod::ClosedForm => integral_j(spec),
        ExactMethod::Quadrature => integral_j_quadrature(spec),
        ExactMethod::Auto => match integral_j(spec) {
            Ok(r) => Ok(r),
            Err(
                e @ (FasError::Truncation { .. }
                | FasError::NumericInconsistency(_)
                | FasError::InvalidParameter { name: "N", .. }),
            ) => {
                let mut r = integral_j_quadrature(spec)?;
                if let Diagnostics::Quadrature { note, .. } = &mut r.diagnostics {
                    *note = Some(fallback_note(&e));
                }
                Ok(r)
            }
            Err(e) => Err(e),
        },
    }
}

fn fallback_note(e: &FasError) -> String {
    match e {
        FasError::Truncation { p_max, .. } => format!("series-order-above-{p_max}"),
        FasError::NumericInconsistency(_) => "closed-form-precision".to_string(),
        _ => "ports-above-closed-form-limit".to_string(),
    }
}

fn scaled(r: SepResult, factor: f64) -> SepResult {
    SepResult {
        value: (r.value * factor).clamp(0.0, 1.0),
        ..r
    }
}

fn check_order(m: usize) -> Result<()> {
    if m < 2 {
        return Err(FasError::invalid(
            "M",
            format!("order must be at least 2, got {m}"),
        ));
    }
    Ok(())
}

pub fn sep_ask_with(m: usize, cfg: &FasConfig, method: ExactMethod) -> Result<SepResult> {
    check_order(m)?;
    let mf = m as f64;
    let spec = IntegralSpec::new(3.0 / (mf * mf - 1.0), std::f64::consts::FRAC_PI_2, *cfg)?;
    Ok(scaled(
        integral_j_with(&spec, method)?,
        2.0 * (mf - 1.0) / mf,
    ))
}

pub fn sep_psk_with(m: usize, cfg: &FasConfig, method: ExactMethod) -> Result<SepResult> {
    check_order(m)?;
    let mf = m as f64;
    let pi = std::f64::consts::PI;
    let c = (pi / mf).sin().powi(2);
    let theta = if m == 2 {
        std::f64::consts::FRAC_PI_2
    } else {
        pi * (mf - 1.0) / mf
    };
    let spec = IntegralSpec::new(c, theta, *cfg)?;
    integral_j_with(&spec, method)
}

pub fn sep_qam_with(m: usize, cfg: &FasConfig, method: ExactMethod) -> Result<SepResult> {
    let side = crate::modem::integer_sqrt(m);
    if m < 4 || side * side != m {
        return Err(FasError::invalid(
            "M",
            format!("QAM order must be a perfect square >= 4, got {m}"),
        ));
    }
    let c = 3.0 / (2.0 * (m as f64 - 1.0));
    let g = 1.0 - 1.0 / side as f64;
    let half = integral_j_with(
        &IntegralSpec::new(c, std::f64::consts::FRAC_PI_2, *cfg)?,
        method,
    )?;
    let quarter = integral_j_with(
        &IntegralSpec::new(c, std::f64::consts::FRAC_PI_4, *cfg)?,
        method,
    )?;
    let value = 4.0 * g * half.value - 4.0 * g * g * quarter.value;
    let method = if half.method == quarter.method {
        half.method
    } else {
        SepMethod::Quadrature
    };
    Ok(SepResult {
        value: value.clamp(0.0, 1.0),
        method,
        diagnostics: half.diagnostics.merge(quarter.diagnostics),
    })
}

pub fn sep_bfsk_with(cfg: &FasConfig, method: ExactMethod) -> Result<SepResult> {
    let spec = IntegralSpec::new(0.5, std::f64::consts::FRAC_PI_2, *cfg)?;
    integral_j_with(&spec, method)
}

/// M-ASK symbol error probability.
pub fn sep_ask(m: usize, cfg: &FasConfig) -> Result<SepResult> {
    sep_ask_with(m, cfg, ExactMethod::Auto)
}

/// M-PSK symbol error probability.
pub fn sep_psk(m: usize, cfg: &FasConfig) -> Result<SepResult> {
    sep_psk_with(m, cfg, ExactMethod::Auto)
}

/// Square M-QAM symbol error probability.
pub fn sep_qam(m: usize, cfg: &FasConfig) -> Result<SepResult> {
    sep_qam_with(m, cfg, ExactMethod::Auto)
}

/// Orthogonal BFSK symbol error probability.
pub fn sep_bfsk(cfg: &FasConfig) -> Result<SepResult> {
    sep_bfsk_with(cfg, ExactMethod::Auto)
}

/// Exact SEP of any scheme.
pub fn sep_exact(
    scheme: ModulationScheme,
    cfg: &FasConfig,
    method: ExactMethod,
) -> Result<SepResult> {
    match scheme.kind() {
        SchemeKind::Ask => sep_ask_with(scheme.order(), cfg, method),
        SchemeKind::Psk => sep_psk_with(scheme.order(), cfg, method),
        SchemeKind::Qam => sep_qam_with(scheme.order(), cfg, method),
        SchemeKind::Bfsk => sep_bfsk_with(cfg, method),
    }
}

/// `(1 + (N-1) mu^2) (K-1)! K^{N-K+1} (1 - mu^2)^{N-1}`.
pub fn calk(cfg: &FasConfig) -> f64 {
    let m2 = cfg.mu() * cfg.mu();
    (1.0 + (cfg.n as f64 - 1.0) * m2)
        * specfun::factorial(cfg.k as u64 - 1)
        * (cfg.k as f64).powi(cfg.n_tilde() as i32)
        * (1.0 - m2).powi(cfg.n as i32 - 1)
}

/// High-SNR approximation `J(c, Theta) ~ N! int_0^Theta sin^{2N} / (pi calK c^N Gamma^N)`.
pub fn integral_j_asymptotic(c: f64, theta: f64, cfg: &FasConfig) -> f64 {
    let n = cfg.n as u32;
    specfun::factorial(n as u64) * specfun::sin_power_integral(n, theta)
        / (std::f64::consts::PI * calk(cfg) * (c * cfg.gamma_av()).powi(n as i32))
}

/// High-SNR SEP of the scheme.
pub fn sep_asymptotic(scheme: ModulationScheme, cfg: &FasConfig) -> Result<SepResult> {
    let n = cfg.n as i32;
    let nf = specfun::factorial(cfg.n as u64);
    let n2f = specfun::factorial(2 * cfg.n as u64);
    let kk = calk(cfg);
    let g = cfg.gamma_av().powi(n);
    let mf = scheme.order() as f64;
    let pi = std::f64::consts::PI;
    let value = match scheme.kind() {
        SchemeKind::Ask => {
            (mf - 1.0).powi(n + 1) * (mf + 1.0).powi(n) * n2f
                / (4f64.powi(n) * 3f64.powi(n) * mf * nf * kk * g)
        }
        SchemeKind::Psk => {
            let theta = if scheme.order() == 2 {
                std::f64::consts::FRAC_PI_2
            } else {
                pi * (mf - 1.0) / mf
            };
            nf * specfun::sin_power_integral(cfg.n as u32, theta)
                / (pi * (pi / mf).sin().powi(2 * n) * kk * g)
        }
        SchemeKind::Qam => {
            let a = 1.0 - 1.0 / mf.sqrt();
            let beta = specfun::incomplete_beta_half(cfg.n as f64 + 0.5, 0.5)?;
            a * 2f64.powi(n + 1) * (mf - 1.0).powi(n) * nf / (pi * 3f64.powi(n) * kk * g)
                * (pi * n2f / (4f64.powi(n) * nf * nf) - a * beta)
        }
        SchemeKind::Bfsk => n2f / (2f64.powi(n + 1) * nf * kk * g),
    };
    Ok(SepResult {
        value,
        method: SepMethod::Asymptotic,
        diagnostics: Diagnostics::Asymptotic,
    })
}
