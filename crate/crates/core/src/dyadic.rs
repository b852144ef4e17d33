//! Exact dyadic rationals `mantissa · 2^exponent`.
//!
//! Mantissas are kept odd (zero is stored as `0 · 2^0`), so equality is
//! structural. The `std::ops` impls are exact and panic when a result would
//! need more than 127 mantissa bits, the same way integer overflow does in
//! debug builds. Code that must keep going past that point uses
//! [`Dyadic::add_capped`] / [`Dyadic::mul_capped`], which round to a mantissa
//! width cap and report whether any bits were lost.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

/// Widest mantissa the capped operations will produce.
pub const MAX_MANTISSA_BITS: u32 = 126;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawDyadic", into = "RawDyadic")]
pub struct Dyadic {
    mantissa: i128,
    exponent: i64,
}

/// Mantissa on the wire: a JSON integer when it fits in `i64`, otherwise a
/// decimal string.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub(crate) enum WireMantissa {
    Small(i64),
    Big(String),
}

impl From<i128> for WireMantissa {
    fn from(m: i128) -> Self {
        match i64::try_from(m) {
            Ok(v) => WireMantissa::Small(v),
            Err(_) => WireMantissa::Big(m.to_string()),
        }
    }
}

impl TryFrom<WireMantissa> for i128 {
    type Error = String;
    fn try_from(w: WireMantissa) -> Result<Self, Self::Error> {
        match w {
            WireMantissa::Small(v) => Ok(v as i128),
            WireMantissa::Big(s) => s.parse().map_err(|e| format!("bad mantissa {s:?}: {e}")),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct RawDyadic {
    mantissa: WireMantissa,
    exponent: i64,
}

impl From<Dyadic> for RawDyadic {
    fn from(d: Dyadic) -> Self {
        RawDyadic {
            mantissa: d.mantissa.into(),
            exponent: d.exponent,
        }
    }
}

impl TryFrom<RawDyadic> for Dyadic {
    type Error = String;
    fn try_from(raw: RawDyadic) -> Result<Self, Self::Error> {
        Ok(Dyadic::new(raw.mantissa.try_into()?, raw.exponent))
    }
}

/// Result of an operation that may have rounded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rounded {
    pub value: Dyadic,
    pub exact: bool,
}

fn bit_len(m: u128) -> u32 {
    128 - m.leading_zeros()
}

/// `mag >> shift`, rounded half to even. Returns the rounded magnitude and
/// whether it was exact.
fn round_shift_right(mag: u128, shift: u64) -> (u128, bool) {
    if shift == 0 {
        return (mag, true);
    }
    if shift > 128 {
        return (0, mag == 0);
    }
    let shift = shift as u32;
    let kept = if shift == 128 { 0 } else { mag >> shift };
    let rem_mask = if shift == 128 {
        u128::MAX
    } else {
        (1u128 << shift) - 1
    };
    let rem = mag & rem_mask;
    if rem == 0 {
        return (kept, true);
    }
    let half = 1u128 << (shift - 1);
    let round_up = rem > half || (rem == half && kept & 1 == 1);
    (if round_up { kept + 1 } else { kept }, false)
}

impl Dyadic {
    pub const ZERO: Dyadic = Dyadic {
        mantissa: 0,
        exponent: 0,
    };
    pub const ONE: Dyadic = Dyadic {
        mantissa: 1,
        exponent: 0,
    };

    pub fn new(mantissa: i128, exponent: i64) -> Self {
        if mantissa == 0 {
            return Dyadic::ZERO;
        }
        let tz = mantissa.trailing_zeros();
        Dyadic {
            mantissa: mantissa >> tz,
            exponent: exponent + tz as i64,
        }
    }

    /// `2^exponent`.
    pub fn pow2(exponent: i64) -> Self {
        Dyadic {
            mantissa: 1,
            exponent,
        }
    }

    pub fn from_int(n: i64) -> Self {
        Dyadic::new(n as i128, 0)
    }

    /// Exact conversion of a finite float. Returns `None` for NaN or infinities.
    pub fn from_f64(x: f64) -> Option<Self> {
        if !x.is_finite() {
            return None;
        }
        if x == 0.0 {
            return Some(Dyadic::ZERO);
        }
        let bits = x.to_bits();
        let sign = if bits >> 63 == 1 { -1i128 } else { 1 };
        let raw_exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = (bits & ((1u64 << 52) - 1)) as i128;
        let (m, e) = if raw_exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1i128 << 52), raw_exp - 1075)
        };
        Some(Dyadic::new(sign * m, e))
    }

    pub fn mantissa(&self) -> i128 {
        self.mantissa
    }

    pub fn exponent(&self) -> i64 {
        self.exponent
    }

    pub fn is_zero(&self) -> bool {
        self.mantissa == 0
    }

    pub fn is_negative(&self) -> bool {
        self.mantissa < 0
    }

    /// True when the value is `±2^e` for some `e`.
    pub fn is_signed_power_of_two(&self) -> bool {
        self.mantissa == 1 || self.mantissa == -1
    }

    pub fn abs(&self) -> Self {
        Dyadic {
            mantissa: self.mantissa.abs(),
            exponent: self.exponent,
        }
    }

    /// Number of significant mantissa bits.
    pub fn mantissa_bits(&self) -> u32 {
        bit_len(self.mantissa.unsigned_abs())
    }

    /// Multiplication by `2^shift`; always exact.
    pub fn mul_pow2(&self, shift: i64) -> Self {
        if self.is_zero() {
            return *self;
        }
        Dyadic {
            mantissa: self.mantissa,
            exponent: self.exponent + shift,
        }
    }

    /// Position one past the most significant bit, i.e. `|x| ∈ [2^(t-1), 2^t)`.
    fn top(&self) -> i64 {
        self.exponent + self.mantissa_bits() as i64
    }

    /// `log2 |x|`, or `-inf` for zero.
    pub fn log2_abs(&self) -> f64 {
        if self.is_zero() {
            return f64::NEG_INFINITY;
        }
        (self.mantissa.unsigned_abs() as f64).log2() + self.exponent as f64
    }

    pub fn to_f64(&self) -> f64 {
        if self.is_zero() {
            return 0.0;
        }
        let m = self.mantissa as f64;
        // Split the scaling so that huge mantissas with very negative exponents
        // do not overflow in an intermediate step.
        let e = self.exponent;
        if e.abs() < 1000 {
            m * 2f64.powi(e as i32)
        } else {
            let half = e / 2;
            m * 2f64.powi(half as i32) * 2f64.powi((e - half) as i32)
        }
    }

    /// Sum rounded to at most `cap_bits` mantissa bits (`cap_bits <= 126`).
    pub fn add_capped(&self, other: &Dyadic, cap_bits: u32) -> Rounded {
        let cap_bits = cap_bits.clamp(2, MAX_MANTISSA_BITS);
        if self.is_zero() {
            return Rounded {
                value: *other,
                exact: true,
            };
        }
        if other.is_zero() {
            return Rounded {
                value: *self,
                exact: true,
            };
        }
        let top = self.top().max(other.top());
        let low = self.exponent.min(other.exponent);
        if top - low < cap_bits as i64 {
            let a = self.mantissa << (self.exponent - low);
            let b = other.mantissa << (other.exponent - low);
            return Rounded {
                value: Dyadic::new(a + b, low),
                exact: true,
            };
        }
        // Align both terms on a common exponent leaving one bit of carry room.
        let target = top + 1 - cap_bits as i64;
        let mut exact = true;
        let mut align = |d: &Dyadic| -> i128 {
            if d.exponent >= target {
                d.mantissa << (d.exponent - target)
            } else {
                let (mag, ok) =
                    round_shift_right(d.mantissa.unsigned_abs(), (target - d.exponent) as u64);
                exact &= ok;
                if d.mantissa < 0 {
                    -(mag as i128)
                } else {
                    mag as i128
                }
            }
        };
        let a = align(self);
        let b = align(other);
        let raw = Dyadic::new(a + b, target);
        let rounded = raw.round_to(cap_bits);
        Rounded {
            value: rounded.value,
            exact: exact && rounded.exact,
        }
    }

    /// Product rounded to at most `cap_bits` mantissa bits.
    pub fn mul_capped(&self, other: &Dyadic, cap_bits: u32) -> Rounded {
        let cap_bits = cap_bits.clamp(2, MAX_MANTISSA_BITS);
        if self.is_zero() || other.is_zero() {
            return Rounded {
                value: Dyadic::ZERO,
                exact: true,
            };
        }
        if self.mantissa_bits() + other.mantissa_bits() <= cap_bits {
            return Rounded {
                value: Dyadic::new(self.mantissa * other.mantissa, self.exponent + other.exponent),
                exact: true,
            };
        }
        let half = cap_bits / 2;
        let a = self.round_to(half);
        let b = other.round_to(cap_bits - half);
        let value = Dyadic::new(
            a.value.mantissa * b.value.mantissa,
            a.value.exponent + b.value.exponent,
        );
        Rounded {
            value,
            exact: a.exact && b.exact,
        }
    }

    /// Rounds the mantissa to at most `bits` significant bits.
    pub fn round_to(&self, bits: u32) -> Rounded {
        let have = self.mantissa_bits();
        if have <= bits {
            return Rounded {
                value: *self,
                exact: true,
            };
        }
        let shift = (have - bits) as u64;
        let (mag, exact) = round_shift_right(self.mantissa.unsigned_abs(), shift);
        let m = if self.mantissa < 0 {
            -(mag as i128)
        } else {
            mag as i128
        };
        // Rounding up may carry into one more bit; renormalising strips it.
        let value = Dyadic::new(m, self.exponent + shift as i64);
        Rounded { value, exact }
    }

    pub fn checked_add(&self, other: &Dyadic) -> Option<Dyadic> {
        let r = self.add_capped(other, MAX_MANTISSA_BITS);
        r.exact.then_some(r.value)
    }

    pub fn checked_mul(&self, other: &Dyadic) -> Option<Dyadic> {
        let r = self.mul_capped(other, MAX_MANTISSA_BITS);
        r.exact.then_some(r.value)
    }
}

impl Default for Dyadic {
    fn default() -> Self {
        Dyadic::ZERO
    }
}

impl From<i64> for Dyadic {
    fn from(n: i64) -> Self {
        Dyadic::from_int(n)
    }
}

impl Neg for Dyadic {
    type Output = Dyadic;
    fn neg(self) -> Dyadic {
        Dyadic {
            mantissa: -self.mantissa,
            exponent: self.exponent,
        }
    }
}

impl Add for Dyadic {
    type Output = Dyadic;
    fn add(self, rhs: Dyadic) -> Dyadic {
        self.checked_add(&rhs)
            .expect("dyadic addition exceeds the exact mantissa width")
    }
}

impl Sub for Dyadic {
    type Output = Dyadic;
    fn sub(self, rhs: Dyadic) -> Dyadic {
        self + (-rhs)
    }
}

impl Mul for Dyadic {
    type Output = Dyadic;
    fn mul(self, rhs: Dyadic) -> Dyadic {
        self.checked_mul(&rhs)
            .expect("dyadic multiplication exceeds the exact mantissa width")
    }
}

impl std::iter::Sum for Dyadic {
    fn sum<I: Iterator<Item = Dyadic>>(iter: I) -> Dyadic {
        iter.fold(Dyadic::ZERO, |acc, x| acc + x)
    }
}

impl Ord for Dyadic {
    fn cmp(&self, other: &Self) -> Ordering {
        let sa = self.mantissa.signum();
        let sb = other.mantissa.signum();
        if sa != sb {
            return sa.cmp(&sb);
        }
        if sa == 0 {
            return Ordering::Equal;
        }
        let mag = match self.top().cmp(&other.top()) {
            Ordering::Equal => {
                // Same leading bit position: align on the smaller exponent.
                // The shift is below the mantissa width, so it cannot overflow.
                let low = self.exponent.min(other.exponent);
                let a = self.mantissa.unsigned_abs() << (self.exponent - low);
                let b = other.mantissa.unsigned_abs() << (other.exponent - low);
                a.cmp(&b)
            }
            o => o,
        };
        if sa > 0 {
            mag
        } else {
            mag.reverse()
        }
    }
}

impl PartialOrd for Dyadic {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Dyadic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.exponent {
            0 => write!(f, "{}", self.mantissa),
            e if e > 0 && e < 64 && self.mantissa_bits() as i64 + e < 127 => {
                write!(f, "{}", self.mantissa << e)
            }
            e if e < 0 => write!(f, "{}/2^{}", self.mantissa, -e),
            e => write!(f, "{}*2^{}", self.mantissa, e),
        }
    }
}
