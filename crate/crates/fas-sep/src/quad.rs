//! Adaptive Gauss-Kronrod integration and Chebyshev panel rules.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

use crate::error::{FasError, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_958_109_831_074,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];

/// Outcome of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

/// Tolerances and limits for [`integrate`].
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.err == other.err
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.err.total_cmp(&other.err)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut e = err.abs();
    if res_asc != 0.0 && e != 0.0 {
        let scale = (200.0 * e / res_asc).powf(1.5);
        e = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        e = e.max(50.0 * f64::EPSILON * res_abs);
    }
    e
}

/// 21-point Kronrod rule with embedded 10-point Gauss rule on `[a, b]`.
/// Returns `(value, error_estimate)`.
pub fn qk21<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut res_g = 0.0;
    let mut res_k = WGK[10] * fc;
    let mut res_abs = res_k.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
    }
    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let h = half.abs();
    let err = rescale_error((res_k - res_g) * half, res_abs * h, res_asc * h);
    (res_k * half, err)
}

/// Globally adaptive integration of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: QuadOptions,
) -> Result<QuadResult> {
    integrate_breaks(f, &[a, b], opts)
}

/// Globally adaptive integration over consecutive intervals given by `breaks`.
pub fn integrate_breaks<F: FnMut(f64) -> f64>(
    mut f: F,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult> {
    if breaks.len() < 2 {
        return Ok(QuadResult {
            value: 0.0,
            abs_err: 0.0,
            evals: 0,
        });
    }
    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    let mut evals = 0;
    // Segments that can no longer be split are retired here.
    let mut frozen_value = 0.0;
    let mut frozen_err = 0.0;
    for w in breaks.windows(2) {
        if w[1] == w[0] {
            continue;
        }
        let (v, e) = qk21(&mut f, w[0], w[1]);
        evals += 21;
        total += v;
        total_err += e;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value: v,
            err: e,
        });
    }
    let mut count = heap.len();
    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        let Some(seg) = heap.pop() else { break };
        if count >= opts.max_intervals {
            return Err(FasError::QuadratureNonConvergence {
                estimate: total,
                error: total_err,
            });
        }
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a || mid >= seg.b || (seg.b - seg.a) <= 1e-14 * seg.a.abs().max(seg.b.abs()) {
            frozen_value += seg.value;
            frozen_err += seg.err;
            continue;
        }
        let (v1, e1) = qk21(&mut f, seg.a, mid);
        let (v2, e2) = qk21(&mut f, mid, seg.b);
        evals += 42;
        count += 1;
        total += v1 + v2 - seg.value;
        total_err += e1 + e2 - seg.err;
        heap.push(Segment {
            a: seg.a,
            b: mid,
            value: v1,
            err: e1,
        });
        heap.push(Segment {
            a: mid,
            b: seg.b,
            value: v2,
            err: e2,
        });
    }
    // Recompute from the pieces to shed drift from incremental updates.
    let mut value = frozen_value;
    let mut err = frozen_err;
    for s in heap.iter() {
        value += s.value;
        err += s.err;
    }
    let tol = opts.abs_tol.max(opts.rel_tol * value.abs());
    if err > tol * 1.01 {
        return Err(FasError::QuadratureNonConvergence {
            estimate: value,
            error: err,
        });
    }
    Ok(QuadResult {
        value,
        abs_err: err,
        evals,
    })
}

/// Chebyshev points of the second kind on `[-1, 1]` in ascending order,
/// with the matrix mapping samples to the running integral from -1.
#[derive(Debug, Clone)]
pub struct ChebPanel {
    pub nodes: Vec<f64>,
    /// `cum[i][j]`: weight of sample `j` in the integral from -1 to `nodes[i]`.
    pub cum: Vec<Vec<f64>>,
}

impl ChebPanel {
    pub fn new(n: usize) -> Self {
        assert!(n >= 2);
        let pi = std::f64::consts::PI;
        let nodes: Vec<f64> = (0..=n).map(|j| -(pi * j as f64 / n as f64).cos()).collect();
        let angles: Vec<f64> = (0..=n).map(|j| pi - pi * j as f64 / n as f64).collect();
        let mut cum = vec![vec![0.0; n + 1]; n + 1];
        for m in 0..=n {
            // Chebyshev coefficients of the m-th cardinal function.
            let mut a = vec![0.0; n + 3];
            for (k, ak) in a.iter_mut().enumerate().take(n + 1) {
                let mut v = 2.0 / n as f64 * (k as f64 * angles[m]).cos();
                if m == 0 || m == n {
                    v *= 0.5;
                }
                if k == 0 || k == n {
                    v *= 0.5;
                }
                *ak = v;
            }
            let mut b = vec![0.0; n + 2];
            b[1] = a[0] - 0.5 * a[2];
            for k in 2..=n + 1 {
                b[k] = (a[k - 1] - a[k + 1]) / (2.0 * k as f64);
            }
            let at_left: f64 = b
                .iter()
                .enumerate()
                .map(|(k, bk)| if k % 2 == 0 { *bk } else { -*bk })
                .sum();
            for i in 0..=n {
                let v: f64 = b
                    .iter()
                    .enumerate()
                    .map(|(k, bk)| bk * (k as f64 * angles[i]).cos())
                    .sum();
                cum[i][m] = v - at_left;
            }
        }
        cum[0].iter_mut().for_each(|v| *v = 0.0);
        ChebPanel { nodes, cum }
    }

    /// Shared 17-point panel.
    pub fn standard() -> &'static ChebPanel {
        static PANEL: OnceLock<ChebPanel> = OnceLock::new();
        PANEL.get_or_init(|| ChebPanel::new(16))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Clenshaw-Curtis weights on `[-1, 1]`.
    pub fn weights(&self) -> &[f64] {
        &self.cum[self.cum.len() - 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| 3.0 * x * x, 0.0, 2.0, QuadOptions::default()).unwrap();
        assert!((r.value - 8.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_peak() {
        let r = integrate(|x: f64| (-x * x).exp(), -10.0, 10.0, QuadOptions::default()).unwrap();
        assert!((r.value - std::f64::consts::PI.sqrt()).abs() < 1e-13);
    }

    #[test]
    fn endpoint_singularity() {
        let r = integrate(|x: f64| 1.0 / x.sqrt(), 0.0, 1.0, QuadOptions::default()).unwrap();
        assert!((r.value - 2.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn breakpoints_split_work() {
        let r =
            integrate_breaks(|x: f64| x.abs(), &[-1.0, 0.0, 1.0], QuadOptions::default()).unwrap();
        assert!((r.value - 1.0).abs() < 1e-15);
    }

    #[test]
    fn nonconvergence_reported() {
        let opts = QuadOptions {
            abs_tol: 1e-15,
            rel_tol: 1e-15,
            max_intervals: 3,
        };
        let r = integrate(|x: f64| (1.0 / x).sin(), 1e-3, 1.0, opts);
        assert!(matches!(r, Err(FasError::QuadratureNonConvergence { .. })));
    }

    #[test]
    fn cheb_running_integral() {
        let p = ChebPanel::new(16);
        let f: Vec<f64> = p.nodes.iter().map(|x| x.exp()).collect();
        for (i, x) in p.nodes.iter().enumerate() {
            let v: f64 = p.cum[i].iter().zip(&f).map(|(w, y)| w * y).sum();
            let want = x.exp() - (-1.0f64).exp();
            assert!((v - want).abs() < 1e-14, "{i}: {v} vs {want}");
        }
        let total: f64 = p.weights().iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
    }
}
