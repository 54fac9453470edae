//! Constellations and maximum-likelihood detectors.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;

use crate::error::{FasError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SchemeKind {
    Ask,
    Psk,
    Qam,
    Bfsk,
}

impl SchemeKind {
    pub fn name(self) -> &'static str {
        match self {
            SchemeKind::Ask => "ask",
            SchemeKind::Psk => "psk",
            SchemeKind::Qam => "qam",
            SchemeKind::Bfsk => "bfsk",
        }
    }
}

impl fmt::Display for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SchemeKind {
    type Err = FasError;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "ask" => Ok(SchemeKind::Ask),
            "psk" => Ok(SchemeKind::Psk),
            "qam" => Ok(SchemeKind::Qam),
            "bfsk" => Ok(SchemeKind::Bfsk),
            _ => Err(FasError::invalid(
                "mod",
                format!("unknown modulation `{s}` (expected ask, psk, qam or bfsk)"),
            )),
        }
    }
}

/// Modulation format and order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ModulationScheme {
    kind: SchemeKind,
    m: usize,
}

impl ModulationScheme {
    pub fn new(kind: SchemeKind, m: usize) -> Result<Self> {
        if m < 2 {
            return Err(FasError::invalid(
                "M",
                format!("order must be at least 2, got {m}"),
            ));
        }
        match kind {
            SchemeKind::Qam => {
                let r = integer_sqrt(m);
                if r * r != m {
                    return Err(FasError::invalid(
                        "M",
                        format!("QAM order must be a perfect square, got {m}"),
                    ));
                }
                if m < 4 {
                    return Err(FasError::invalid(
                        "M",
                        format!("QAM order must be at least 4, got {m}"),
                    ));
                }
            }
            SchemeKind::Bfsk if m != 2 => {
                return Err(FasError::invalid("M", format!("BFSK has order 2, got {m}")));
            }
            _ => {}
        }
        Ok(ModulationScheme { kind, m })
    }

    pub fn bfsk() -> Self {
        ModulationScheme {
            kind: SchemeKind::Bfsk,
            m: 2,
        }
    }

    pub fn kind(&self) -> SchemeKind {
        self.kind
    }

    pub fn order(&self) -> usize {
        self.m
    }
}

impl fmt::Display for ModulationScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            SchemeKind::Bfsk => f.write_str("BFSK"),
            k => write!(f, "{}-{}", self.m, k.name().to_ascii_uppercase()),
        }
    }
}

pub(crate) fn integer_sqrt(m: usize) -> usize {
    let mut r = (m as f64).sqrt() as usize;
    while r * r > m {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= m {
        r += 1;
    }
    r
}

/// Equiprobable symbol set.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    pub points: Vec<Complex64>,
    pub e_av: f64,
}

impl Constellation {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn mean_energy(&self) -> f64 {
        self.points.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.points.len() as f64
    }
}

fn ask_levels(m: usize, e_av: f64) -> Vec<f64> {
    let scale = (3.0 * e_av / ((m * m - 1) as f64)).sqrt();
    (1..=m)
        .map(|i| scale * (2.0 * i as f64 - 1.0 - m as f64))
        .collect()
}

/// Symbols of the scheme at average energy `e_av`, ordered by index
/// (row-major for QAM).
pub fn build_constellation(scheme: ModulationScheme, e_av: f64) -> Result<Constellation> {
    if !(e_av > 0.0) || !e_av.is_finite() {
        return Err(FasError::invalid(
            "E_av",
            format!("must be positive, got {e_av}"),
        ));
    }
    let m = scheme.order();
    let points = match scheme.kind() {
        SchemeKind::Ask => ask_levels(m, e_av)
            .into_iter()
            .map(|a| Complex64::new(a, 0.0))
            .collect(),
        SchemeKind::Psk => {
            let r = e_av.sqrt();
            (0..m)
                .map(|i| {
                    let (s, c) = (2.0 * std::f64::consts::PI * i as f64 / m as f64).sin_cos();
                    // Snap the axis points so that QPSK is exactly {1, j, -1, -j}.
                    let snap = |v: f64| if v.abs() < 1e-15 { 0.0 } else { v };
                    Complex64::new(r * snap(c), r * snap(s))
                })
                .collect()
        }
        SchemeKind::Qam => {
            let side = integer_sqrt(m);
            // Per-axis energy is half the symbol energy.
            let levels = ask_levels(side, e_av / 2.0);
            let mut pts = Vec::with_capacity(m);
            for &re in &levels {
                for &im in &levels {
                    pts.push(Complex64::new(re, im));
                }
            }
            pts
        }
        SchemeKind::Bfsk => {
            let r = e_av.sqrt();
            vec![Complex64::new(r, 0.0), Complex64::new(0.0, r)]
        }
    };
    Ok(Constellation { points, e_av })
}

/// `argmin_s |z - h_norm s|^2`, lowest index on ties.
pub fn detect_ml_generic(
    z: Complex64,
    h_norm: f64,
    constellation: &Constellation,
) -> Result<usize> {
    if constellation.is_empty() {
        return Err(FasError::invalid("constellation", "is empty"));
    }
    if !(h_norm >= 0.0) {
        return Err(FasError::invalid(
            "h_norm",
            format!("must be non-negative, got {h_norm}"),
        ));
    }
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, s) in constellation.points.iter().enumerate() {
        let d = (z - s * h_norm).norm_sqr();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    Ok(best)
}

/// ASK detector: maximizes `s Re{z} - s^2 h_norm / 2` over the real levels.
pub fn detect_ask(z: Complex64, h_norm: f64, constellation: &Constellation) -> usize {
    let pts = &constellation.points;
    let m = pts.len();
    if m == 0 || h_norm <= 0.0 {
        return 0;
    }
    // Levels are uniformly spaced; the nearest level of Re{z}/h_norm wins.
    let y = z.re / h_norm;
    let first = pts[0].re;
    let step = pts[1].re - first;
    let pos = ((y - first) / step).clamp(0.0, (m - 1) as f64);
    let lo = pos.floor() as usize;
    if lo + 1 < m {
        let mid = 0.5 * (pts[lo].re + pts[lo + 1].re);
        if y > mid {
            lo + 1
        } else {
            lo
        }
    } else {
        lo
    }
}

/// PSK detector: maximizes `Re{z s^*}`.
pub fn detect_psk(z: Complex64, constellation: &Constellation) -> usize {
    let m = constellation.len();
    if m == 0 {
        return 0;
    }
    let sector = 2.0 * std::f64::consts::PI / m as f64;
    let mut angle = z.im.atan2(z.re);
    if angle < 0.0 {
        angle += 2.0 * std::f64::consts::PI;
    }
    let idx = (angle / sector).round() as usize % m;
    // Resolve boundary cases exactly with the metric.
    let neighbours = [idx, (idx + 1) % m, (idx + m - 1) % m];
    let mut best = idx;
    let mut best_v = f64::NEG_INFINITY;
    for &i in &neighbours {
        let v = (z * constellation.points[i].conj()).re;
        if v > best_v || (v == best_v && i < best) {
            best_v = v;
            best = i;
        }
    }
    best
}

/// BFSK detector: index 0 when `Re{z} > Im{z}`, else index 1.
pub fn detect_bfsk(z: Complex64) -> usize {
    if z.re >= z.im {
        0
    } else {
        1
    }
}

/// QAM detector: independent ASK decisions on the two axes.
pub fn detect_qam(z: Complex64, h_norm: f64, constellation: &Constellation) -> usize {
    let side = integer_sqrt(constellation.len());
    if side < 2 || h_norm <= 0.0 {
        return 0;
    }
    let levels: Vec<f64> = (0..side)
        .map(|i| constellation.points[i * side].re)
        .collect();
    let axis = |y: f64| {
        let step = levels[1] - levels[0];
        let pos = ((y - levels[0]) / step).clamp(0.0, (side - 1) as f64);
        let lo = pos.floor() as usize;
        if lo + 1 < side && y > 0.5 * (levels[lo] + levels[lo + 1]) {
            lo + 1
        } else {
            lo
        }
    };
    axis(z.re / h_norm) * side + axis(z.im / h_norm)
}

/// Scheme-specific fast ML decision.
pub fn detect(
    scheme: ModulationScheme,
    z: Complex64,
    h_norm: f64,
    constellation: &Constellation,
) -> usize {
    match scheme.kind() {
        SchemeKind::Ask => detect_ask(z, h_norm, constellation),
        SchemeKind::Psk => detect_psk(z, constellation),
        SchemeKind::Qam => detect_qam(z, h_norm, constellation),
        SchemeKind::Bfsk => detect_bfsk(z),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn all_schemes() -> Vec<ModulationScheme> {
        let mut v = Vec::new();
        for m in [2, 4, 8] {
            v.push(ModulationScheme::new(SchemeKind::Ask, m).unwrap());
            v.push(ModulationScheme::new(SchemeKind::Psk, m).unwrap());
        }
        v.push(ModulationScheme::new(SchemeKind::Psk, 16).unwrap());
        for m in [4, 16, 64] {
            v.push(ModulationScheme::new(SchemeKind::Qam, m).unwrap());
        }
        v.push(ModulationScheme::bfsk());
        v
    }

    #[test]
    fn scheme_validation() {
        assert!(ModulationScheme::new(SchemeKind::Qam, 8).is_err());
        assert!(ModulationScheme::new(SchemeKind::Qam, 2).is_err());
        assert!(ModulationScheme::new(SchemeKind::Bfsk, 4).is_err());
        assert!(ModulationScheme::new(SchemeKind::Ask, 1).is_err());
        assert_eq!("QAM".parse::<SchemeKind>().unwrap(), SchemeKind::Qam);
        assert!("fsk".parse::<SchemeKind>().is_err());
    }

    #[test]
    fn constellation_examples() {
        let c =
            build_constellation(ModulationScheme::new(SchemeKind::Ask, 2).unwrap(), 1.0).unwrap();
        assert_eq!(
            c.points,
            vec![Complex64::new(-1.0, 0.0), Complex64::new(1.0, 0.0)]
        );
        let c =
            build_constellation(ModulationScheme::new(SchemeKind::Ask, 4).unwrap(), 1.0).unwrap();
        let want = [
            -1.341_640_786_499_874,
            -0.447_213_595_499_958,
            0.447_213_595_499_958,
            1.341_640_786_499_874,
        ];
        for (p, w) in c.points.iter().zip(want) {
            assert!((p.re - w).abs() < 1e-12 && p.im == 0.0);
        }
        let c =
            build_constellation(ModulationScheme::new(SchemeKind::Psk, 4).unwrap(), 1.0).unwrap();
        let want = [
            Complex64::new(1.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(-1.0, 0.0),
            Complex64::new(0.0, -1.0),
        ];
        assert_eq!(c.points, want);
        let c = build_constellation(ModulationScheme::bfsk(), 4.0).unwrap();
        assert_eq!(
            c.points,
            vec![Complex64::new(2.0, 0.0), Complex64::new(0.0, 2.0)]
        );
    }

    #[test]
    fn energy_contract() {
        for s in all_schemes() {
            for e in [0.5, 1.0, 7.0] {
                let c = build_constellation(s, e).unwrap();
                assert_eq!(c.len(), s.order());
                assert!((c.mean_energy() - e).abs() <= 1e-12 * e, "{s}");
                if matches!(s.kind(), SchemeKind::Psk | SchemeKind::Bfsk) {
                    for p in &c.points {
                        assert!((p.norm_sqr() - e).abs() <= 1e-12 * e);
                    }
                }
                if s.kind() == SchemeKind::Ask {
                    for (a, b) in c.points.iter().zip(c.points.iter().rev()) {
                        assert!((a.re + b.re).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn noiseless_and_ties() {
        for s in all_schemes() {
            let c = build_constellation(s, 1.0).unwrap();
            for (i, p) in c.points.iter().enumerate() {
                let z = p * 0.8;
                assert_eq!(detect_ml_generic(z, 0.8, &c).unwrap(), i);
                assert_eq!(detect(s, z, 0.8, &c), i, "{s} symbol {i}");
            }
        }
        let c =
            build_constellation(ModulationScheme::new(SchemeKind::Psk, 2).unwrap(), 1.0).unwrap();
        assert_eq!(
            detect_ml_generic(Complex64::new(0.0, 0.0), 1.0, &c).unwrap(),
            0
        );
        let empty = Constellation {
            points: vec![],
            e_av: 1.0,
        };
        assert!(detect_ml_generic(Complex64::new(0.0, 0.0), 1.0, &empty).is_err());
    }

    #[test]
    fn boundary_examples() {
        let c =
            build_constellation(ModulationScheme::new(SchemeKind::Ask, 4).unwrap(), 1.0).unwrap();
        let h = 1.3;
        for m in 0..3 {
            let t = h * (c.points[m].re + c.points[m + 1].re) / 2.0;
            assert_eq!(detect_ask(Complex64::new(t + 1e-9, 0.3), h, &c), m + 1);
            assert_eq!(detect_ask(Complex64::new(t - 1e-9, 0.3), h, &c), m);
        }
        assert_eq!(
            detect_ask(
                Complex64::new(0.2, -5.0),
                1.0,
                &build_constellation(ModulationScheme::new(SchemeKind::Ask, 2).unwrap(), 1.0)
                    .unwrap()
            ),
            1
        );
        let c =
            build_constellation(ModulationScheme::new(SchemeKind::Psk, 8).unwrap(), 1.0).unwrap();
        let boundary = std::f64::consts::PI / 8.0;
        assert_eq!(
            detect_psk(Complex64::from_polar(2.0, boundary + 1e-9), &c),
            1
        );
        assert_eq!(
            detect_psk(Complex64::from_polar(2.0, boundary - 1e-9), &c),
            0
        );
        assert_eq!(detect_bfsk(Complex64::new(1.0, 0.0)), 0);
        assert_eq!(detect_bfsk(Complex64::new(0.0, 1.0)), 1);
    }

    fn margin(z: Complex64, h: f64, c: &Constellation) -> f64 {
        let mut d: Vec<f64> = c.points.iter().map(|s| (z - s * h).norm_sqr()).collect();
        d.sort_by(f64::total_cmp);
        d[1] - d[0]
    }

    #[test]
    fn fast_detectors_match_generic() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for s in all_schemes() {
            let c = build_constellation(s, 1.0).unwrap();
            for _ in 0..100_000 {
                let h: f64 = rng.random_range(0.01..3.0);
                let z = Complex64::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
                if margin(z, h, &c) <= 1e-12 {
                    continue;
                }
                assert_eq!(
                    detect(s, z, h, &c),
                    detect_ml_generic(z, h, &c).unwrap(),
                    "{s} z={z} h={h}"
                );
            }
        }
    }

    #[test]
    fn scale_covariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let c =
            build_constellation(ModulationScheme::new(SchemeKind::Qam, 16).unwrap(), 1.0).unwrap();
        for _ in 0..10_000 {
            let h: f64 = rng.random_range(0.01..3.0);
            let z = Complex64::new(rng.random_range(-4.0..4.0), rng.random_range(-4.0..4.0));
            let l: f64 = rng.random_range(0.1..10.0);
            if margin(z, h, &c) <= 1e-9 {
                continue;
            }
            assert_eq!(
                detect_ml_generic(z * l, h * l, &c).unwrap(),
                detect_ml_generic(z, h, &c).unwrap()
            );
        }
    }
}
