//! Link-level Monte Carlo simulation: correlated fading, best-K port
//! selection, maximal-ratio combining and ML detection.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;

use crate::cf_engine::FasConfig;
use crate::correlation::{sample_fading_into, standard_complex, FadingVector};
use crate::error::{FasError, Result};
use crate::modem::{build_constellation, detect, Constellation, ModulationScheme};

/// Two-sided 95% standard normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Chunks evaluated per parallel round.
const CHUNKS_PER_ROUND: u64 = 64;

/// Error counts, SER estimate and Wilson 95% interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub trials: u64,
    pub errors: u64,
    pub ser: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub seed: u64,
}

impl McEstimate {
    pub fn from_counts(errors: u64, trials: u64, seed: u64) -> Self {
        let ser = if trials == 0 {
            0.0
        } else {
            errors as f64 / trials as f64
        };
        let (ci_low, ci_high) = wilson_interval(errors, trials);
        McEstimate {
            trials,
            errors,
            ser,
            ci_low,
            ci_high,
            seed,
        }
    }
}

/// Wilson score interval at 95% confidence.
pub fn wilson_interval(errors: u64, trials: u64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = errors as f64 / n;
    let z2 = Z95 * Z95;
    let den = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / den;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / den;
    // Clamp so that the point estimate is always inside despite rounding.
    ((centre - half).clamp(0.0, p), (centre + half).clamp(p, 1.0))
}

/// Stopping rule for `simulate_ser`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McStop {
    pub max_trials: u64,
    pub target_errors: u64,
    pub chunk_size: u64,
}

impl Default for McStop {
    fn default() -> Self {
        McStop {
            max_trials: 100_000_000,
            target_errors: 200,
            chunk_size: 10_000,
        }
    }
}

/// One pass through the receive chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiveSample {
    pub h: FadingVector,
    pub r: Vec<Complex64>,
    /// Selected ports in descending SNR order.
    pub selected: Vec<usize>,
    pub z: Complex64,
    pub gamma_fas: f64,
}

/// Indices of the `k` largest values, in descending order; lower index
/// first on ties.
pub fn select_best_k(snrs: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > snrs.len() {
        return Err(FasError::invalid(
            "K",
            format!("must satisfy 1 <= K <= {}, got {k}", snrs.len()),
        ));
    }
    let mut idx: Vec<usize> = (0..snrs.len()).collect();
    let order = |a: &usize, b: &usize| snrs[*b].total_cmp(&snrs[*a]).then(a.cmp(b));
    if k < idx.len() {
        idx.select_nth_unstable_by(k - 1, order);
        idx.truncate(k);
    }
    idx.sort_unstable_by(order);
    Ok(idx)
}

/// `sum_k conj(h_k) r_k / ||h||`.
pub fn mrc_combine(h_sel: &[Complex64], r_sel: &[Complex64]) -> Result<Complex64> {
    if h_sel.len() != r_sel.len() {
        return Err(FasError::invalid(
            "r_sel",
            format!(
                "length {} differs from h_sel length {}",
                r_sel.len(),
                h_sel.len()
            ),
        ));
    }
    let norm = h_sel.iter().map(|h| h.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(FasError::invalid("h_sel", "zero channel vector"));
    }
    let acc: Complex64 = h_sel.iter().zip(r_sel).map(|(h, r)| h.conj() * r).sum();
    Ok(acc / norm)
}

/// Passes symbol `s` through the channel and combiner.
pub fn receive<R: Rng + ?Sized>(cfg: &FasConfig, s: Complex64, rng: &mut R) -> ReceiveSample {
    let mut h = vec![Complex64::new(0.0, 0.0); cfg.n];
    sample_fading_into(&cfg.model, rng, &mut h);
    let sn = cfg.sigma_n2.sqrt();
    let r: Vec<Complex64> = h
        .iter()
        .map(|hk| hk * s + standard_complex(rng) * sn)
        .collect();
    let snrs: Vec<f64> = h
        .iter()
        .map(|hk| cfg.e_av * hk.norm_sqr() / cfg.sigma_n2)
        .collect();
    let selected = select_best_k(&snrs, cfg.k).expect("K validated by FasConfig");
    let gamma_fas = selected.iter().map(|&i| snrs[i]).sum();
    let h_sel: Vec<Complex64> = selected.iter().map(|&i| h[i]).collect();
    let r_sel: Vec<Complex64> = selected.iter().map(|&i| r[i]).collect();
    let z = mrc_combine(&h_sel, &r_sel).unwrap_or_default();
    ReceiveSample {
        h: FadingVector { h },
        r,
        selected,
        z,
        gamma_fas,
    }
}

/// Generator for chunk `chunk` of the run seeded with `seed`.
pub fn chunk_rng(seed: u64, chunk: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(chunk);
    rng
}

struct Scratch {
    h: Vec<Complex64>,
    r: Vec<Complex64>,
    snr: Vec<f64>,
    idx: Vec<usize>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            h: vec![Complex64::new(0.0, 0.0); n],
            r: vec![Complex64::new(0.0, 0.0); n],
            snr: vec![0.0; n],
            idx: (0..n).collect(),
        }
    }
}

/// Error count over `trials` symbols drawn from `rng`.
fn run_chunk(
    cfg: &FasConfig,
    scheme: ModulationScheme,
    cons: &Constellation,
    trials: u64,
    rng: &mut ChaCha12Rng,
    sc: &mut Scratch,
) -> u64 {
    let m = cons.len();
    let sn = cfg.sigma_n2.sqrt();
    let k = cfg.k;
    let mut errors = 0;
    for _ in 0..trials {
        let tx = rng.random_range(0..m);
        let s = cons.points[tx];
        sample_fading_into(&cfg.model, rng, &mut sc.h);
        for ((r, h), snr) in sc.r.iter_mut().zip(&sc.h).zip(sc.snr.iter_mut()) {
            *r = h * s + standard_complex(rng) * sn;
            *snr = h.norm_sqr();
        }
        let snr = &sc.snr;
        let order = |a: &usize, b: &usize| snr[*b].total_cmp(&snr[*a]).then(a.cmp(b));
        for (i, v) in sc.idx.iter_mut().enumerate() {
            *v = i;
        }
        if k < cfg.n {
            sc.idx.select_nth_unstable_by(k - 1, order);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        let mut norm2 = 0.0;
        for &i in &sc.idx[..k] {
            acc += sc.h[i].conj() * sc.r[i];
            norm2 += snr[i];
        }
        let norm = norm2.sqrt();
        let rx = if norm > 0.0 {
            detect(scheme, acc / norm, norm, cons)
        } else {
            usize::MAX
        };
        if rx != tx {
            errors += 1;
        }
    }
    errors
}

/// Monte Carlo symbol error rate.
///
/// Chunk `i` draws from stream `i` of the generator seeded with `seed`.
/// Chunks are accumulated in index order and the run stops after the first
/// chunk at which `target_errors` is reached, or at `max_trials`, so the
/// result depends only on `(seed, chunk_size)` and not on the worker count.
pub fn simulate_ser(
    cfg: &FasConfig,
    scheme: ModulationScheme,
    stop: McStop,
    seed: u64,
) -> Result<McEstimate> {
    if stop.max_trials == 0 {
        return Err(FasError::invalid("max_trials", "must be at least 1"));
    }
    if stop.chunk_size == 0 {
        return Err(FasError::invalid("chunk_size", "must be at least 1"));
    }
    let cons = build_constellation(scheme, cfg.e_av)?;
    let n_chunks = stop.max_trials.div_ceil(stop.chunk_size);
    let chunk_trials = |c: u64| stop.chunk_size.min(stop.max_trials - c * stop.chunk_size);
    let mut trials = 0u64;
    let mut errors = 0u64;
    let mut next = 0u64;
    while next < n_chunks {
        let end = (next + CHUNKS_PER_ROUND).min(n_chunks);
        let counts: Vec<(u64, u64)> = (next..end)
            .into_par_iter()
            .map_init(
                || Scratch::new(cfg.n),
                |sc, c| {
                    let t = chunk_trials(c);
                    let mut rng = chunk_rng(seed, c);
                    (t, run_chunk(cfg, scheme, &cons, t, &mut rng, sc))
                },
            )
            .collect();
        for (t, e) in counts {
            trials += t;
            errors += e;
            if errors >= stop.target_errors {
                return Ok(McEstimate::from_counts(errors, trials, seed));
            }
        }
        next = end;
    }
    Ok(McEstimate::from_counts(errors, trials, seed))
}

/// Sample mean and standard error of `exp(x gamma_FAS)` for each `x`.
pub fn empirical_cf(cfg: &FasConfig, xs: &[f64], trials: u64, seed: u64) -> Vec<(f64, f64)> {
    const CHUNK: u64 = 10_000;
    let n_chunks = trials.div_ceil(CHUNK);
    let sums: Vec<Vec<(f64, f64)>> = (0..n_chunks)
        .into_par_iter()
        .map(|c| {
            let t = CHUNK.min(trials - c * CHUNK);
            let mut rng = chunk_rng(seed, c);
            let mut h = vec![Complex64::new(0.0, 0.0); cfg.n];
            let mut snr = vec![0.0; cfg.n];
            let mut acc = vec![(0.0, 0.0); xs.len()];
            for _ in 0..t {
                sample_fading_into(&cfg.model, &mut rng, &mut h);
                for (s, hk) in snr.iter_mut().zip(&h) {
                    *s = cfg.e_av * hk.norm_sqr() / cfg.sigma_n2;
                }
                snr.sort_unstable_by(|a, b| b.total_cmp(a));
                let g: f64 = snr[..cfg.k].iter().sum();
                for (a, &x) in acc.iter_mut().zip(xs) {
                    let v = (x * g).exp();
                    a.0 += v;
                    a.1 += v * v;
                }
            }
            acc
        })
        .collect();
    let n = trials as f64;
    (0..xs.len())
        .map(|i| {
            let (s, s2) = sums
                .iter()
                .fold((0.0, 0.0), |acc, v| (acc.0 + v[i].0, acc.1 + v[i].1));
            let mean = s / n;
            let var = (s2 / n - mean * mean).max(0.0) * n / (n - 1.0).max(1.0);
            (mean, (var / n).sqrt())
        })
        .collect()
}
