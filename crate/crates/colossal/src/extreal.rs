//! Extended-precision reals with a tracked error radius.
//!
//! Every quantity that feeds an ordering decision or an inequality verdict
//! is carried as a midpoint (an MPFR float at the working precision) plus a
//! rigorous absolute error radius. Arithmetic propagates the radius
//! conservatively: each correctly-rounded MPFR operation contributes at most
//! one ulp of the result, and first-order sensitivity terms account for the
//! input radii.

use std::sync::OnceLock;

use rug::ops::CompleteRound;
use rug::Float;

/// Base working precision in decimal digits, overridable via
/// `COLOSSAL_PRECISION_DIGITS`.
pub const DEFAULT_DIGITS: u32 = 30;

/// Escalation ladder used when an interval comparison is inconclusive.
pub const ESCALATION_DIGITS: [u32; 3] = [30, 60, 120];

/// Decimal digits -> MPFR precision in bits, with guard bits so that the
/// requested decimal precision survives a handful of roundings.
pub fn digits_to_bits(digits: u32) -> u32 {
    (digits as f64 * std::f64::consts::LOG2_10).ceil() as u32 + 12
}

/// Working precision in decimal digits, from the environment or the default.
pub fn working_digits() -> u32 {
    static DIGITS: OnceLock<u32> = OnceLock::new();
    *DIGITS.get_or_init(|| {
        std::env::var("COLOSSAL_PRECISION_DIGITS")
            .ok()
            .and_then(|s| s.parse::<u32>().ok())
            .filter(|&d| (10..=1000).contains(&d))
            .unwrap_or(DEFAULT_DIGITS)
    })
}

/// Working precision in bits.
pub fn working_bits() -> u32 {
    digits_to_bits(working_digits())
}

/// Outcome of a rigorous interval comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalOrder {
    /// Every value of the left interval is below every value of the right.
    Below,
    /// Every value of the left interval is above every value of the right.
    Above,
    /// The intervals overlap; the comparison is inconclusive at this radius.
    Overlap,
}

/// A real number known to lie within `value ± radius`.
#[derive(Debug, Clone)]
pub struct ExtReal {
    value: Float,
    radius: f64,
}

fn ulp_of(value: &Float) -> f64 {
    let a = value.to_f64().abs();
    if a == 0.0 {
        return 0.0;
    }
    let scale = 2f64.powi(1 - value.prec() as i32);
    let u = a * scale;
    if u == 0.0 {
        // Underflowed in f64; fall back to something safely above the true ulp.
        f64::MIN_POSITIVE
    } else {
        u
    }
}

impl ExtReal {
    pub fn new(value: Float, radius: f64) -> Self {
        debug_assert!(radius >= 0.0 && radius.is_finite());
        Self { value, radius }
    }

    pub fn zero(bits: u32) -> Self {
        Self::new(Float::with_val(bits, 0), 0.0)
    }

    /// Exact embedding of an unsigned integer (error-free for any u64 at
    /// >= 64 bits of precision).
    pub fn from_u64(v: u64, bits: u32) -> Self {
        debug_assert!(bits >= 64);
        Self::new(Float::with_val(bits, v), 0.0)
    }

    /// Exact embedding of an f64.
    pub fn from_f64(v: f64, bits: u32) -> Self {
        debug_assert!(v.is_finite());
        Self::new(Float::with_val(bits, v), 0.0)
    }

    pub fn from_integer(v: &rug::Integer, bits: u32) -> Self {
        let value = Float::with_val(bits, v);
        let radius = if *value.to_integer().as_ref().unwrap() == *v {
            0.0
        } else {
            ulp_of(&value)
        };
        Self::new(value, radius)
    }

    pub fn value(&self) -> &Float {
        &self.value
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn prec(&self) -> u32 {
        self.value.prec()
    }

    pub fn to_f64(&self) -> f64 {
        self.value.to_f64()
    }

    pub fn is_sign_positive(&self) -> bool {
        self.value.is_sign_positive()
    }

    /// Widen the radius (used when an external argument carries extra
    /// uncertainty, e.g. "some integer within 1/N of this point").
    pub fn inflate(mut self, extra: f64) -> Self {
        debug_assert!(extra >= 0.0);
        self.radius += extra;
        self
    }

    pub fn add(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let value = (&self.value + &other.value).complete(prec);
        let radius = self.radius + other.radius + ulp_of(&value);
        Self::new(value, radius)
    }

    pub fn sub(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let value = (&self.value - &other.value).complete(prec);
        let radius = self.radius + other.radius + ulp_of(&value);
        Self::new(value, radius)
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let value = (&self.value * &other.value).complete(prec);
        let a = self.value.to_f64().abs();
        let b = other.value.to_f64().abs();
        let radius =
            a * other.radius + b * self.radius + self.radius * other.radius + ulp_of(&value);
        Self::new(value, radius)
    }

    pub fn div(&self, other: &Self) -> Self {
        let prec = self.prec().max(other.prec());
        let b = other.value.to_f64().abs();
        assert!(
            b > 2.0 * other.radius,
            "division by an interval containing or near zero"
        );
        let value = (&self.value / &other.value).complete(prec);
        let res = value.to_f64().abs();
        let radius = (self.radius + res * other.radius) / (b - other.radius) + ulp_of(&value);
        Self::new(value, radius)
    }

    pub fn neg(&self) -> Self {
        Self::new((-&self.value).complete(self.prec()), self.radius)
    }

    pub fn recip(&self) -> Self {
        let one = ExtReal::from_u64(1, self.prec());
        one.div(self)
    }

    pub fn scale_u64(&self, c: u64) -> Self {
        self.mul(&ExtReal::from_u64(c, self.prec()))
    }

    /// Natural logarithm; requires the whole interval to be positive.
    pub fn ln(&self) -> Self {
        let lo = self.value.to_f64() - self.radius;
        assert!(lo > 0.0, "ln of an interval touching zero");
        let value = self.value.ln_ref().complete(self.prec());
        let radius = self.radius / lo + ulp_of(&value);
        Self::new(value, radius)
    }

    /// log(1 + x), accurate for tiny x; requires 1 + x > 0 over the interval.
    pub fn ln_1p(&self) -> Self {
        let lo = 1.0 + self.value.to_f64() - self.radius;
        assert!(lo > 0.0, "ln_1p of an interval touching -1");
        let value = self.value.ln_1p_ref().complete(self.prec());
        let radius = self.radius / lo + ulp_of(&value);
        Self::new(value, radius)
    }

    pub fn exp(&self) -> Self {
        let value = self.value.exp_ref().complete(self.prec());
        let res = value.to_f64().abs();
        let radius = res * self.radius.exp_m1().max(self.radius) + ulp_of(&value);
        Self::new(value, radius)
    }

    pub fn sqrt(&self) -> Self {
        let lo = self.value.to_f64() - self.radius;
        assert!(lo > 0.0, "sqrt of an interval touching zero");
        let value = self.value.sqrt_ref().complete(self.prec());
        let radius = self.radius / (2.0 * lo.sqrt()) + ulp_of(&value);
        Self::new(value, radius)
    }

    /// x^(1/k) for positive x, via exp(ln x / k).
    pub fn root_u32(&self, k: u32) -> Self {
        self.ln().div(&ExtReal::from_u64(k as u64, self.prec())).exp()
    }

    /// Integer power by repeated squaring.
    pub fn pow_u32(&self, mut e: u32) -> Self {
        let mut base = self.clone();
        let mut acc = ExtReal::from_u64(1, self.prec());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    /// Rigorous comparison of two intervals.
    pub fn cmp_interval(&self, other: &Self) -> IntervalOrder {
        let gap = (&other.value - &self.value).complete(self.prec().max(other.prec()));
        let sep = self.radius + other.radius;
        if gap > sep {
            IntervalOrder::Below
        } else if gap < -sep {
            IntervalOrder::Above
        } else {
            IntervalOrder::Overlap
        }
    }

    pub fn certainly_lt(&self, other: &Self) -> bool {
        self.cmp_interval(other) == IntervalOrder::Below
    }

    pub fn certainly_gt(&self, other: &Self) -> bool {
        self.cmp_interval(other) == IntervalOrder::Above
    }

    /// Compare against an exact u64.
    pub fn cmp_u64(&self, other: u64) -> IntervalOrder {
        self.cmp_interval(&ExtReal::from_u64(other, self.prec().max(64)))
    }

    /// Decimal string with enough digits to round-trip exactly at this
    /// precision (the MPFR analog of printing an f64 with 17 digits).
    pub fn to_decimal_string(&self) -> String {
        let digits = (self.prec() as f64 / std::f64::consts::LOG2_10).ceil() as usize + 2;
        format!("{:.*e}", digits - 1, self.value)
    }

    /// Parse a decimal string produced by [`to_decimal_string`]; exact
    /// round-trip when `bits` matches the producing precision.
    pub fn from_decimal_string(s: &str, bits: u32, radius: f64) -> Option<Self> {
        let value = Float::parse(s).ok()?;
        Some(Self::new(Float::with_val(bits, value), radius))
    }
}

impl std::fmt::Display for ExtReal {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} ± {:e}", self.to_f64(), self.radius)
    }
}
