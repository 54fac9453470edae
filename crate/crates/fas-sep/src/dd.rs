//! Double-double arithmetic: an unevaluated sum `hi + lo` with about 32
//! significant digits.

use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub};

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    (s, (a - (s - bb)) + (b - bb))
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };
    pub const PI: Dd = Dd {
        hi: std::f64::consts::PI,
        lo: 1.224_646_799_147_353_2e-16,
    };
    pub const FRAC_PI_2: Dd = Dd {
        hi: std::f64::consts::FRAC_PI_2,
        lo: 6.123_233_995_736_766e-17,
    };

    pub const fn new(hi: f64) -> Dd {
        Dd { hi, lo: 0.0 }
    }

    /// Exact for integers below `2^106`.
    pub fn from_u128(v: u128) -> Dd {
        let hi = v as f64;
        let rest = v as i128 - hi as i128;
        let (hi, lo) = quick_two_sum(hi, rest as f64);
        Dd { hi, lo }
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub fn recip(self) -> Dd {
        Dd::ONE / self
    }

    pub fn powi(self, n: u32) -> Dd {
        let mut base = self;
        let mut acc = Dd::ONE;
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base;
            }
            base = base * base;
            e >>= 1;
        }
        acc
    }

    pub fn sqrt(self) -> Dd {
        if self.hi <= 0.0 {
            return Dd::ZERO;
        }
        let y = Dd::new(self.hi.sqrt());
        y + (self - y * y) / (y * 2.0)
    }

    /// `(sin x, cos x)`.
    pub fn sin_cos(self) -> (Dd, Dd) {
        let k = (self.hi / std::f64::consts::FRAC_PI_2).round();
        let r = self - Dd::FRAC_PI_2 * k;
        let r2 = r * r;
        // Taylor series; |r| <= pi/4.
        let mut term = r;
        let mut s = r;
        let mut i = 1.0;
        loop {
            term = -(term * r2) / ((i + 1.0) * (i + 2.0));
            i += 2.0;
            s += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        let mut term = Dd::ONE;
        let mut c = Dd::ONE;
        let mut i = 0.0;
        loop {
            term = -(term * r2) / ((i + 1.0) * (i + 2.0));
            i += 2.0;
            c += term;
            if term.hi.abs() < 1e-34 {
                break;
            }
        }
        match (k as i64).rem_euclid(4) {
            0 => (s, c),
            1 => (c, -s),
            2 => (-s, -c),
            _ => (-c, s),
        }
    }

    /// Four-quadrant arctangent of `y / x`.
    pub fn atan2(y: Dd, x: Dd) -> Dd {
        let z0 = Dd::new(y.hi.atan2(x.hi));
        let (s, c) = z0.sin_cos();
        let num = y * c - x * s;
        let den = x * c + y * s;
        z0 + num / den
    }
}

impl From<f64> for Dd {
    fn from(v: f64) -> Dd {
        Dd::new(v)
    }
}

impl Neg for Dd {
    type Output = Dd;
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    fn add(self, b: Dd) -> Dd {
        let (s, e) = two_sum(self.hi, b.hi);
        let (t, f) = two_sum(self.lo, b.lo);
        let (s, e) = quick_two_sum(s, e + t);
        let (hi, lo) = quick_two_sum(s, e + f);
        Dd { hi, lo }
    }
}

impl Add<f64> for Dd {
    type Output = Dd;
    fn add(self, b: f64) -> Dd {
        let (s, e) = two_sum(self.hi, b);
        let (hi, lo) = quick_two_sum(s, e + self.lo);
        Dd { hi, lo }
    }
}

impl AddAssign for Dd {
    fn add_assign(&mut self, b: Dd) {
        *self = *self + b;
    }
}

impl Sub for Dd {
    type Output = Dd;
    fn sub(self, b: Dd) -> Dd {
        self + (-b)
    }
}

impl Mul for Dd {
    type Output = Dd;
    fn mul(self, b: Dd) -> Dd {
        let (p, e) = two_prod(self.hi, b.hi);
        let e = e + (self.hi * b.lo + self.lo * b.hi);
        let (hi, lo) = quick_two_sum(p, e);
        Dd { hi, lo }
    }
}

impl Mul<f64> for Dd {
    type Output = Dd;
    fn mul(self, b: f64) -> Dd {
        let (p, e) = two_prod(self.hi, b);
        let (hi, lo) = quick_two_sum(p, e + self.lo * b);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, b: Dd) -> Dd {
        let q1 = self.hi / b.hi;
        let r = self - b * q1;
        let q2 = r.hi / b.hi;
        let r = r - b * q2;
        let q3 = r.hi / b.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Dd { hi, lo } + q3
    }
}

impl Div<f64> for Dd {
    type Output = Dd;
    fn div(self, b: f64) -> Dd {
        self / Dd::new(b)
    }
}
