//! Fixed-width two's-complement integers used as fixed-point numbers.

use crate::dd::Dd;

const LIMBS: usize = 18;

/// Signed integer of `64 * LIMBS` bits.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) struct Wide([u64; LIMBS]);

impl Wide {
    pub const ZERO: Wide = Wide([0; LIMBS]);
    pub const BITS: u64 = 64 * LIMBS as u64;

    /// `2^shift`.
    pub fn pow2(shift: u64) -> Wide {
        let mut w = Wide::ZERO;
        w.0[(shift / 64) as usize] = 1 << (shift % 64);
        w
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&l| l == 0)
    }

    fn is_negative(&self) -> bool {
        (self.0[LIMBS - 1] as i64) < 0
    }

    pub fn neg(&self) -> Wide {
        let mut out = Wide::ZERO;
        let mut carry = 1u64;
        for (o, &l) in out.0.iter_mut().zip(&self.0) {
            let (v, c) = (!l).overflowing_add(carry);
            *o = v;
            carry = c as u64;
        }
        out
    }

    fn abs(&self) -> Wide {
        if self.is_negative() {
            self.neg()
        } else {
            *self
        }
    }

    pub fn add_assign(&mut self, other: &Wide) {
        let mut carry = false;
        for (a, &b) in self.0.iter_mut().zip(&other.0) {
            let (s1, c1) = a.overflowing_add(b);
            let (s2, c2) = s1.overflowing_add(carry as u64);
            *a = s2;
            carry = c1 || c2;
        }
    }

    pub fn sub(&self, other: &Wide) -> Wide {
        let mut out = *self;
        out.add_assign(&other.neg());
        out
    }

    /// Wrapping product with an unsigned word, shifted up by `limb_shift` limbs.
    fn mul_u64_shifted(&self, m: u64, limb_shift: usize) -> Wide {
        let mut out = Wide::ZERO;
        let mut carry = 0u128;
        for i in 0..LIMBS - limb_shift {
            let p = self.0[i] as u128 * m as u128 + carry;
            out.0[i + limb_shift] = p as u64;
            carry = p >> 64;
        }
        out
    }

    /// `self += x * m`.
    pub fn add_mul_u128(&mut self, x: &Wide, m: u128) {
        let lo = m as u64;
        let hi = (m >> 64) as u64;
        if lo != 0 {
            self.add_assign(&x.mul_u64_shifted(lo, 0));
        }
        if hi != 0 {
            self.add_assign(&x.mul_u64_shifted(hi, 1));
        }
    }

    pub fn mul_i64(&self, m: i64) -> Wide {
        let p = self.mul_u64_shifted(m.unsigned_abs(), 0);
        if m < 0 {
            p.neg()
        } else {
            p
        }
    }

    /// Quotient truncated toward zero.
    pub fn div_i64(&self, d: i64) -> Wide {
        let neg = self.is_negative() != (d < 0);
        let mag = self.abs();
        let dv = d.unsigned_abs() as u128;
        let mut out = Wide::ZERO;
        let mut rem = 0u128;
        for i in (0..LIMBS).rev() {
            let cur = (rem << 64) | mag.0[i] as u128;
            out.0[i] = (cur / dv) as u64;
            rem = cur % dv;
        }
        if neg {
            out.neg()
        } else {
            out
        }
    }

    /// Number of significant bits of the magnitude.
    pub fn bits(&self) -> u64 {
        let mag = self.abs();
        for i in (0..LIMBS).rev() {
            if mag.0[i] != 0 {
                return 64 * i as u64 + 64 - mag.0[i].leading_zeros() as u64;
            }
        }
        0
    }

    /// Value divided by `2^frac_bits`.
    pub fn to_dd(&self, frac_bits: u64) -> Dd {
        let mag = self.abs();
        let Some(top) = (0..LIMBS).rev().find(|&i| mag.0[i] != 0) else {
            return Dd::ZERO;
        };
        let mut acc = Dd::ZERO;
        let lowest = top.saturating_sub(2);
        for i in (lowest..=top).rev() {
            for half in [1u32, 0] {
                let part = (mag.0[i] >> (32 * half)) & 0xffff_ffff;
                let exp = 64 * i as i32 + 32 * half as i32 - frac_bits as i32;
                acc += Dd::new(part as f64) * 2f64.powi(exp);
            }
        }
        if self.is_negative() {
            -acc
        } else {
            acc
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn from_i128(v: i128) -> Wide {
        let mut w = Wide::ZERO;
        let u = v.unsigned_abs();
        w.0[0] = u as u64;
        w.0[1] = (u >> 64) as u64;
        if v < 0 {
            w.neg()
        } else {
            w
        }
    }

    #[test]
    fn arithmetic_matches_i128() {
        let vals = [
            0i128,
            1,
            -1,
            12345678901234567,
            -98765432109876543210,
            1 << 80,
        ];
        for &a in &vals {
            for &m in &[1i64, -3, 7, 1 << 40, -(1 << 20)] {
                assert_eq!(from_i128(a).mul_i64(m), from_i128(a * m as i128));
                assert_eq!(from_i128(a).div_i64(m), from_i128(a / m as i128));
            }
            for &b in &vals {
                let mut s = from_i128(a);
                s.add_assign(&from_i128(b >> 2));
                assert_eq!(s, from_i128(a + (b >> 2)));
                assert_eq!(
                    from_i128(a).sub(&from_i128(b >> 2)),
                    from_i128(a - (b >> 2))
                );
            }
            let mut acc = from_i128(5);
            acc.add_mul_u128(&from_i128(a >> 80), 3u128 << 64 | 17);
            let expect = 5 + (a >> 80) * 17 + ((a >> 80) * 3) * (1i128 << 64);
            assert_eq!(acc, from_i128(expect));
        }
    }

    #[test]
    fn conversion() {
        assert_eq!(from_i128(-3 << 20).to_dd(20).to_f64(), -3.0);
        let x = Wide::pow2(700).div_i64(3);
        let v = x.to_dd(700);
        assert!((v - Dd::ONE / 3.0).to_f64().abs() < 1e-31);
        assert_eq!(Wide::pow2(700).bits(), 701);
    }
}
