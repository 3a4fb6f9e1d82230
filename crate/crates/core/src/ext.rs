//! Extended-range reals in level-index form.
//!
//! The constants of the proof chain are explicit but astronomically large:
//! `ℓ` has a natural log in the hundreds of thousands, `K_ℓ` is a double
//! exponential, and `θ` differs from 1 by a double-exponentially small amount.
//! None of these fit in an `f64`. [`Ext`] stores a signed magnitude as
//!
//! ```text
//! |x| = E_k(v)^(±1),   E_0(v) = v,   E_k(v) = exp(E_{k-1}(v))
//! ```
//!
//! Level 0 holds every magnitude in `[e^-700, e^700]` directly. A level
//! `k ≥ 1` holds `v ∈ (700, e^700]`, so levels tile the positive reals without
//! overlap and the representation is unique. Arithmetic goes through `ln` and
//! `exp`, each of which moves exactly one level, so every operation terminates
//! after at most `level` recursions.
//!
//! Accuracy is that of `f64` on the innermost value. That is ample for the
//! ledger, which only needs signs, orderings, and a readable magnitude.

use alloc::format;
use alloc::string::{String, ToString};
use core::cmp::Ordering;
use core::fmt;
use core::ops::{Add, Div, Mul, Neg, Sub};
use core::str::FromStr;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

const LOG_LIMIT: f64 = 700.0;

fn hi() -> f64 {
    libm::exp(LOG_LIMIT)
}

fn lo() -> f64 {
    libm::exp(-LOG_LIMIT)
}

/// Signed extended-range real.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ext {
    sign: i8,
    level: u8,
    recip: bool,
    v: f64,
}

impl Ext {
    pub const ZERO: Ext = Ext { sign: 0, level: 0, recip: false, v: 0.0 };
    pub const ONE: Ext = Ext { sign: 1, level: 0, recip: false, v: 1.0 };

    /// Converts an `f64`. Non-finite input saturates to the largest level-1 value.
    pub fn from_f64(x: f64) -> Ext {
        if x == 0.0 || x.is_nan() {
            return Ext::ZERO;
        }
        let sign = if x < 0.0 { -1 } else { 1 };
        let m = libm::fabs(x);
        if m.is_infinite() {
            return Ext { sign, level: 1, recip: false, v: hi() };
        }
        if m > hi() {
            Ext { sign, level: 1, recip: false, v: libm::log(m) }
        } else if m < lo() {
            Ext { sign, level: 1, recip: true, v: -libm::log(m) }
        } else {
            Ext { sign, level: 0, recip: false, v: m }
        }
    }

    /// `exp(x)` for an `f64` exponent that may exceed the `f64` range of `exp`.
    pub fn exp_f64(x: f64) -> Ext {
        Ext::from_f64(x).exp()
    }

    pub fn is_zero(&self) -> bool {
        self.sign == 0
    }

    pub fn is_positive(&self) -> bool {
        self.sign > 0
    }

    pub fn is_negative(&self) -> bool {
        self.sign < 0
    }

    /// Number of exponentials wrapped around the stored value.
    pub fn level(&self) -> u8 {
        self.level
    }

    /// True when the value is representable as a normal-range `f64`.
    pub fn fits_f64(&self) -> bool {
        self.level == 0
    }

    pub fn abs(self) -> Ext {
        Ext { sign: self.sign.abs(), ..self }
    }

    /// Nearest `f64`, saturating to `±inf` or `±0`.
    pub fn to_f64(self) -> f64 {
        let s = f64::from(self.sign);
        match (self.level, self.recip) {
            (0, _) => s * self.v,
            (1, true) => s * libm::exp(-self.v),
            (_, true) => s * 0.0,
            (_, false) => s * f64::INFINITY,
        }
    }

    /// Natural logarithm of a positive value.
    pub fn ln(self) -> Ext {
        debug_assert!(self.sign > 0, "ln of non-positive Ext");
        if self.level == 0 {
            Ext::from_f64(libm::log(self.v))
        } else {
            Ext { sign: if self.recip { -1 } else { 1 }, level: self.level - 1, recip: false, v: self.v }
        }
    }

    /// `ln` as an `f64`, saturating.
    pub fn ln_f64(self) -> f64 {
        self.ln().to_f64()
    }

    pub fn exp(self) -> Ext {
        if self.sign == 0 {
            return Ext::ONE;
        }
        if self.level == 0 {
            let w = f64::from(self.sign) * self.v;
            if libm::fabs(w) <= LOG_LIMIT {
                Ext::from_f64(libm::exp(w))
            } else {
                Ext { sign: 1, level: 1, recip: w < 0.0, v: libm::fabs(w) }
            }
        } else if self.recip {
            // |x| < e^-700: exp(x) = 1 to working precision.
            Ext::ONE
        } else {
            Ext { sign: 1, level: self.level + 1, recip: self.sign < 0, v: self.v }
        }
    }

    pub fn recip(self) -> Ext {
        assert!(self.sign != 0, "reciprocal of zero");
        if self.level == 0 {
            Ext::from_f64(f64::from(self.sign) / self.v)
        } else {
            Ext { recip: !self.recip, ..self }
        }
    }

    /// `ln(1 + x)` for `x ≥ 0`.
    pub fn ln_1p(self) -> Ext {
        debug_assert!(self.sign >= 0);
        if self.sign == 0 {
            return Ext::ZERO;
        }
        match (self.level, self.recip) {
            (0, _) => Ext::from_f64(libm::log1p(self.v)),
            (_, true) => self,
            (_, false) => self.ln() + self.recip().ln_1p(),
        }
    }

    /// `self^p` for positive `self`.
    pub fn powf(self, p: Ext) -> Ext {
        if p.is_zero() {
            return Ext::ONE;
        }
        (p * self.ln()).exp()
    }

    pub fn max(self, other: Ext) -> Ext {
        if other > self { other } else { self }
    }

    pub fn min(self, other: Ext) -> Ext {
        if other < self { other } else { self }
    }

    fn rank(&self) -> i32 {
        match (self.level, self.recip) {
            (0, _) => 0,
            (l, true) => -i32::from(l),
            (l, false) => i32::from(l),
        }
    }

    fn cmp_mag(&self, other: &Ext) -> Ordering {
        match (self.sign == 0, other.sign == 0) {
            (true, true) => return Ordering::Equal,
            (true, false) => return Ordering::Less,
            (false, true) => return Ordering::Greater,
            _ => {}
        }
        let (ra, rb) = (self.rank(), other.rank());
        if ra != rb {
            return ra.cmp(&rb);
        }
        let o = self.v.partial_cmp(&other.v).unwrap_or(Ordering::Equal);
        if ra < 0 { o.reverse() } else { o }
    }

    fn with_sign(self, sign: i8) -> Ext {
        if self.sign == 0 { self } else { Ext { sign, ..self } }
    }
}

impl Default for Ext {
    fn default() -> Self {
        Ext::ZERO
    }
}

impl From<f64> for Ext {
    fn from(x: f64) -> Self {
        Ext::from_f64(x)
    }
}

impl PartialOrd for Ext {
    fn partial_cmp(&self, other: &Ext) -> Option<Ordering> {
        if self.sign != other.sign {
            return Some(self.sign.cmp(&other.sign));
        }
        let m = self.cmp_mag(other);
        Some(if self.sign < 0 { m.reverse() } else { m })
    }
}

impl Neg for Ext {
    type Output = Ext;
    fn neg(self) -> Ext {
        Ext { sign: -self.sign, ..self }
    }
}

impl Mul for Ext {
    type Output = Ext;
    fn mul(self, rhs: Ext) -> Ext {
        if self.sign == 0 || rhs.sign == 0 {
            return Ext::ZERO;
        }
        let sign = self.sign * rhs.sign;
        if self.level == 0 && rhs.level == 0 {
            let p = self.v * rhs.v;
            if p >= lo() && p <= hi() {
                return Ext { sign, level: 0, recip: false, v: p };
            }
        }
        (self.abs().ln() + rhs.abs().ln()).exp().with_sign(sign)
    }
}

impl Div for Ext {
    type Output = Ext;
    #[allow(clippy::suspicious_arithmetic_impl)]
    fn div(self, rhs: Ext) -> Ext {
        self * rhs.recip()
    }
}

impl Add for Ext {
    type Output = Ext;
    fn add(self, rhs: Ext) -> Ext {
        if self.sign == 0 {
            return rhs;
        }
        if rhs.sign == 0 {
            return self;
        }
        if self.level == 0 && rhs.level == 0 {
            return Ext::from_f64(self.to_f64() + rhs.to_f64());
        }
        let (big, small) = if self.cmp_mag(&rhs) != Ordering::Less { (self, rhs) } else { (rhs, self) };
        let ln_big = big.abs().ln();
        let ratio = (small.abs().ln() - ln_big).exp().to_f64();
        if big.sign == small.sign {
            (ln_big + Ext::from_f64(libm::log1p(ratio))).exp().with_sign(big.sign)
        } else if ratio >= 1.0 {
            Ext::ZERO
        } else {
            (ln_big + Ext::from_f64(libm::log1p(-ratio))).exp().with_sign(big.sign)
        }
    }
}

impl Sub for Ext {
    type Output = Ext;
    fn sub(self, rhs: Ext) -> Ext {
        self + (-rhs)
    }
}

fn fmt_f64(x: f64) -> String {
    let a = libm::fabs(x);
    if a != 0.0 && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

impl fmt::Display for Ext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            return f.write_str(&fmt_f64(self.to_f64()));
        }
        let sign = if self.sign < 0 { "-" } else { "" };
        write!(f, "{sign}exp({})", self.abs().ln())
    }
}

/// Parse failure for the textual `Ext` form.
#[derive(Debug, Clone, PartialEq)]
pub struct ParseExtError(pub String);

impl fmt::Display for ParseExtError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cannot parse extended real from `{}`", self.0)
    }
}

impl FromStr for Ext {
    type Err = ParseExtError;

    fn from_str(s: &str) -> Result<Ext, ParseExtError> {
        let t = s.trim();
        if let Ok(x) = t.parse::<f64>() {
            return Ok(Ext::from_f64(x));
        }
        if let Some(rest) = t.strip_prefix('-') {
            return rest.parse::<Ext>().map(|x| -x);
        }
        if let Some(inner) = t.strip_prefix("exp(").and_then(|r| r.strip_suffix(')')) {
            return inner.parse::<Ext>().map(Ext::exp);
        }
        Err(ParseExtError(t.to_string()))
    }
}

impl Serialize for Ext {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if self.level == 0 {
            serializer.serialize_f64(self.to_f64())
        } else {
            serializer.serialize_str(&self.to_string())
        }
    }
}

struct ExtVisitor;

impl Visitor<'_> for ExtVisitor {
    type Value = Ext;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("a number or an `exp(...)` expression")
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Ext, E> {
        Ok(Ext::from_f64(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Ext, E> {
        Ok(Ext::from_f64(v as f64))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Ext, E> {
        Ok(Ext::from_f64(v as f64))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Ext, E> {
        v.parse().map_err(E::custom)
    }
}

impl<'de> Deserialize<'de> for Ext {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Ext, D::Error> {
        deserializer.deserialize_any(ExtVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * a.abs().max(b.abs())
    }

    #[test]
    fn roundtrip_in_range() {
        for x in [1.0, -2.5, 1e-300, 3e300, 0.1] {
            assert_eq!(Ext::from_f64(x).to_f64(), x);
        }
    }

    #[test]
    fn huge_product_and_log() {
        let big = Ext::exp_f64(1e6);
        assert_eq!(big.level(), 1);
        assert!(close(big.ln_f64(), 1e6, 1e-15));
        let sq = big * big;
        assert!(close(sq.ln_f64(), 2e6, 1e-14));
        assert!(close((sq / big).ln_f64(), 1e6, 1e-12));
    }

    #[test]
    fn double_exponential_tiny() {
        let c = Ext::exp_f64(2e6);
        let tiny = (-(c + c)).exp();
        assert!(tiny.is_positive());
        assert!(tiny < Ext::from_f64(1e-300));
        assert_eq!(tiny.to_f64(), 0.0);
        assert_eq!(tiny.ln_1p(), tiny);
        assert!(tiny.to_string().starts_with("exp(-exp(2000000.69"), "{tiny}");
    }

    #[test]
    fn ordering_across_levels() {
        let xs = [
            -Ext::exp_f64(1e6),
            Ext::from_f64(-3.0),
            Ext::ZERO,
            Ext::exp_f64(-1e6),
            Ext::from_f64(1e-10),
            Ext::ONE,
            Ext::exp_f64(800.0),
            Ext::exp_f64(1e6),
            Ext::exp_f64(1e6).exp(),
        ];
        for w in xs.windows(2) {
            assert!(w[0] < w[1], "{} !< {}", w[0], w[1]);
        }
    }

    #[test]
    fn cancellation_to_zero() {
        let a = Ext::exp_f64(1e5);
        assert!((a - a).is_zero());
    }

    #[test]
    fn text_roundtrip() {
        for x in [Ext::exp_f64(5e5), Ext::exp_f64(-5e5), Ext::exp_f64(2e6).exp().recip(), Ext::from_f64(0.25)] {
            let back: Ext = x.to_string().parse().unwrap();
            assert_eq!((back.level, back.recip, back.sign), (x.level, x.recip, x.sign));
            assert!(close(back.v, x.v, 1e-12));
        }
    }
}
