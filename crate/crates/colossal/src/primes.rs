//! Prime sieve and Chebyshev-type prime sums.
//!
//! The sieve is an odd-only bitmap built segment by segment. Alongside the
//! bitmap it stores per-block double-double prefix sums of log p (for the
//! Chebyshev function theta) and of log(1 + 1/p), so that both sums can be
//! queried at any point with a short in-block scan. Summation order is
//! always ascending primes, making repeated queries bit-identical.

use crate::extreal::{working_bits, ExtReal, IntervalOrder};
use crate::{Error, Result};

/// Numbers per prefix block (must be a multiple of 128 so blocks align with
/// whole bitmap words).
const BLOCK: u64 = 4096;

/// Relative error bound for the double-double prefix sums: each f64 `ln`
/// is correctly rounded to ~1.1e-16 relative, and the double-double
/// accumulation itself contributes far less.
const DD_REL_ERR: f64 = 3e-16;

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Double-double accumulator (value = hi + lo, |lo| <= ulp(hi)).
#[derive(Debug, Clone, Copy, Default)]
struct Dd {
    hi: f64,
    lo: f64,
}

impl Dd {
    #[inline]
    fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.hi, x);
        let lo = self.lo + e;
        let (h, l) = two_sum(s, lo);
        self.hi = h;
        self.lo = l;
    }

}

/// Primality table for 2..=limit with theta/psi0 query support.
pub struct PrimeSieve {
    limit: u64,
    /// Bit i set iff 2i+1 is composite (or 1); even numbers handled apart.
    odd_composite: Vec<u64>,
    /// theta prefix per block: entry b = sum of log p over primes < b*BLOCK.
    theta_prefix: Vec<Dd>,
    /// Prefix of sum of log(1 + 1/p) over primes < b*BLOCK.
    r1_prefix: Vec<Dd>,
}

impl PrimeSieve {
    #[inline]
    fn is_odd_composite(&self, n: u64) -> bool {
        let i = (n - 1) / 2;
        self.odd_composite[(i / 64) as usize] >> (i % 64) & 1 == 1
    }

    /// True iff n is prime (n <= limit).
    pub fn is_prime(&self, n: u64) -> bool {
        debug_assert!(n <= self.limit);
        if n < 2 {
            false
        } else if n == 2 {
            true
        } else if n % 2 == 0 {
            false
        } else {
            !self.is_odd_composite(n)
        }
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// Smallest prime strictly greater than x.
    pub fn next_prime(&self, x: u64) -> Result<u64> {
        let mut n = if x < 2 { 2 } else { x + 1 };
        while n <= self.limit {
            if self.is_prime(n) {
                return Ok(n);
            }
            n += 1;
        }
        Err(Error::SieveExhausted {
            needed: x + 1,
            limit: self.limit,
        })
    }

    /// Iterate all primes in ascending order.
    pub fn primes(&self) -> impl Iterator<Item = u64> + '_ {
        (2..=self.limit).filter(move |&n| self.is_prime(n))
    }

    pub fn count_primes(&self) -> u64 {
        self.primes().count() as u64
    }

    /// Sum a per-prime function over primes <= x in ascending order,
    /// starting from the block prefix. Internal helper for theta/r1.
    fn prefix_query(&self, x: u64, prefix: &[Dd], f: impl Fn(u64) -> f64) -> Dd {
        let block = (x / BLOCK) as usize;
        let mut acc = prefix[block.min(prefix.len() - 1)];
        let start = (block as u64) * BLOCK;
        if start <= 2 && x >= 2 {
            acc.add(f(2));
        }
        // Scan odd candidates from the block boundary up to x.
        let mut n = start.max(3) | 1;
        while n <= x {
            if !self.is_odd_composite(n) {
                acc.add(f(n));
            }
            n += 2;
        }
        acc
    }

    fn dd_to_ext(acc: Dd) -> ExtReal {
        let bits = working_bits();
        let hi = ExtReal::from_f64(acc.hi, bits);
        let lo = ExtReal::from_f64(acc.lo, bits);
        let sum = hi.add(&lo);
        let radius = DD_REL_ERR * sum.to_f64().abs();
        sum.inflate(radius)
    }

    /// Chebyshev theta(x) = sum of log p over primes p <= x.
    pub fn theta(&self, x: f64) -> Result<ExtReal> {
        if !(x > 0.0) {
            return Err(Error::InvalidArgument(format!("theta({x}): x must be positive")));
        }
        let xf = x.floor() as u64;
        if xf > self.limit {
            return Err(Error::SieveExhausted {
                needed: xf,
                limit: self.limit,
            });
        }
        if xf < 2 {
            return Ok(ExtReal::zero(working_bits()));
        }
        Ok(Self::dd_to_ext(self.prefix_query(xf, &self.theta_prefix, |p| (p as f64).ln())))
    }

    /// Sum of log(1 + 1/p) over primes p <= x (the level-1 part of log rho).
    pub fn r1(&self, x: u64) -> Result<ExtReal> {
        if x > self.limit {
            return Err(Error::SieveExhausted {
                needed: x,
                limit: self.limit,
            });
        }
        if x < 2 {
            return Ok(ExtReal::zero(working_bits()));
        }
        Ok(Self::dd_to_ext(self.prefix_query(x, &self.r1_prefix, |p| (1.0 / p as f64).ln_1p())))
    }

    /// Floor of (k*x)^(1/k) with a rigorous guard: if the root cannot be
    /// separated from a prime integer the result would be ambiguous and an
    /// error is raised instead of guessing a side.
    fn root_floor(&self, x: f64, k: u32) -> Result<u64> {
        let y = (k as f64 * x).powf(1.0 / k as f64);
        let m = y.round();
        if (y - m).abs() > 1e-6 || m < 2.0 {
            return Ok(y.floor() as u64);
        }
        let mi = m as u64;
        // If x is an integer, k*x vs m^k settles the boundary exactly.
        if x.fract() == 0.0 && x < 2f64.powi(63) {
            let kx = (k as u128) * (x as u128);
            if let Some(mk) = (mi as u128).checked_pow(k) {
                return Ok(if kx >= mk { mi } else { mi - 1 });
            }
        }
        // Re-evaluate in extended precision.
        let bits = working_bits();
        let y_ext = ExtReal::from_f64(x, bits).scale_u64(k as u64).root_u32(k);
        match y_ext.cmp_u64(mi) {
            IntervalOrder::Overlap => {
                if self.limit >= mi && self.is_prime(mi) {
                    Err(Error::AmbiguousBoundary(format!(
                        "({k} * {x})^(1/{k}) = {y_ext} indistinguishable from prime {mi}"
                    )))
                } else {
                    // Whether mi itself is included does not change the sum.
                    Ok(mi)
                }
            }
            IntervalOrder::Above => Ok(mi),
            IntervalOrder::Below => Ok(mi - 1),
        }
    }

    /// psi0(x) = sum over k >= 1 of theta((k*x)^(1/k)), while that root
    /// stays >= 2 (equivalently k*x >= 2^k).
    pub fn psi0(&self, x: f64) -> Result<ExtReal> {
        if !(x >= 2.0) {
            return Err(Error::InvalidArgument(format!("psi0({x}): x must be >= 2")));
        }
        let mut total = self.theta(x)?;
        let mut k = 2u32;
        while k < 64 && k as f64 * x >= 2f64.powi(k as i32) {
            let bound = self.root_floor(x, k)?;
            total = total.add(&self.theta(bound as f64)?);
            k += 1;
        }
        Ok(total)
    }
}

/// Build the sieve (and its prefix sums) up to `limit` inclusive.
pub fn build_sieve(limit: u64) -> Result<PrimeSieve> {
    if limit < 3 {
        return Err(Error::InvalidArgument(format!("sieve limit {limit} < 3")));
    }
    let nbits = (limit / 2 + 1) as usize; // index i <-> odd number 2i+1
    let mut odd_composite = vec![0u64; nbits.div_ceil(64)];
    let mark = |tbl: &mut [u64], i: usize| tbl[i / 64] |= 1u64 << (i % 64);
    mark(&mut odd_composite, 0); // 1 is not prime

    // Base odd primes up to sqrt(limit) by trial marking.
    let root = (limit as f64).sqrt() as u64 + 1;
    let mut base: Vec<u64> = Vec::new();
    {
        let mut p = 3u64;
        while p <= root {
            if odd_composite[(p / 2 / 64) as usize] >> (p / 2 % 64) & 1 == 0 {
                base.push(p);
                let mut m = p * p;
                while m <= root {
                    mark(&mut odd_composite, (m / 2) as usize);
                    m += 2 * p;
                }
            }
            p += 2;
        }
    }
    // Segmented marking of the rest.
    const SEGMENT: u64 = 1 << 20;
    let mut lo = root.max(3);
    while lo <= limit {
        let hi = (lo + SEGMENT - 1).min(limit);
        for &p in &base {
            let mut m = (lo + p - 1) / p * p;
            if m < p * p {
                m = p * p;
            }
            if m % 2 == 0 {
                m += p;
            }
            while m <= hi {
                mark(&mut odd_composite, (m / 2) as usize);
                m += 2 * p;
            }
        }
        lo = hi + 1;
    }

    let mut sieve = PrimeSieve {
        limit,
        odd_composite,
        theta_prefix: Vec::new(),
        r1_prefix: Vec::new(),
    };

    // Per-block prefix sums, ascending primes throughout.
    let nblocks = (limit / BLOCK + 2) as usize;
    let mut theta_prefix = Vec::with_capacity(nblocks);
    let mut r1_prefix = Vec::with_capacity(nblocks);
    let mut theta_acc = Dd::default();
    let mut r1_acc = Dd::default();
    for b in 0..nblocks as u64 {
        theta_prefix.push(theta_acc);
        r1_prefix.push(r1_acc);
        let start = b * BLOCK;
        let end = ((b + 1) * BLOCK - 1).min(limit);
        if start <= 2 && end >= 2 {
            theta_acc.add(2f64.ln());
            r1_acc.add(0.5f64.ln_1p());
        }
        let mut n = start.max(3) | 1;
        while n <= end {
            if sieve.is_prime(n) {
                theta_acc.add((n as f64).ln());
                r1_acc.add((1.0 / n as f64).ln_1p());
            }
            n += 2;
        }
    }
    sieve.theta_prefix = theta_prefix;
    sieve.r1_prefix = r1_prefix;
    Ok(sieve)
}

/// Fully precise theta over a small range, for audits and tests: MPFR
/// summation of log p in ascending order.
pub fn theta_exact(sieve: &PrimeSieve, x: u64, bits: u32) -> ExtReal {
    let mut acc = ExtReal::zero(bits);
    for p in sieve.primes().take_while(|&p| p <= x) {
        acc = acc.add(&ExtReal::from_u64(p, bits).ln());
    }
    acc
}

/// Helper used by tests: trial-division primality.
pub fn is_prime_slow(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sieve_matches_trial_division() {
        let sieve = build_sieve(10_000).unwrap();
        for n in 0..=10_000u64 {
            assert_eq!(sieve.is_prime(n), is_prime_slow(n), "mismatch at {n}");
        }
    }

    #[test]
    fn rejects_tiny_limit() {
        assert!(build_sieve(2).is_err());
    }

    #[test]
    fn prime_counts() {
        let sieve = build_sieve(100).unwrap();
        assert_eq!(sieve.count_primes(), 25);
        let sieve = build_sieve(1_000_000).unwrap();
        assert_eq!(sieve.count_primes(), 78_498);
    }

    #[test]
    fn next_prime_basics() {
        let sieve = build_sieve(1000).unwrap();
        assert_eq!(sieve.next_prime(2).unwrap(), 3);
        assert_eq!(sieve.next_prime(7).unwrap(), 11);
        assert_eq!(sieve.next_prime(89).unwrap(), 97);
        assert_eq!(sieve.next_prime(0).unwrap(), 2);
        assert!(sieve.next_prime(997).is_err());
    }

    #[test]
    fn theta_small_values() {
        let sieve = build_sieve(1000).unwrap();
        assert_eq!(sieve.theta(1.5).unwrap().to_f64(), 0.0);
        assert!((sieve.theta(2.0).unwrap().to_f64() - std::f64::consts::LN_2).abs() < 1e-14);
        // theta(10) = log(2*3*5*7) = log 210
        let t10 = sieve.theta(10.0).unwrap().to_f64();
        assert!((t10 - 5.347107530717468_7).abs() < 1e-13, "theta(10) = {t10}");
        assert!(sieve.theta(2000.0).is_err());
    }

    #[test]
    fn theta_is_deterministic_and_monotone() {
        let sieve = build_sieve(100_000).unwrap();
        let a = sieve.theta(54_321.0).unwrap();
        let b = sieve.theta(54_321.0).unwrap();
        assert_eq!(a.to_f64(), b.to_f64());
        let mut prev = 0.0;
        for x in (2..100).map(|i| i * 1000) {
            let t = sieve.theta(x as f64).unwrap().to_f64();
            assert!(t >= prev);
            assert!(t < x as f64, "theta({x}) = {t} not below x");
            prev = t;
        }
    }

    #[test]
    fn theta_jumps_by_log_p_at_primes() {
        let sieve = build_sieve(1000).unwrap();
        let before = sieve.theta(96.9).unwrap().to_f64();
        let after = sieve.theta(97.0).unwrap().to_f64();
        assert!((after - before - (97f64).ln()).abs() < 1e-12);
    }

    #[test]
    fn theta_agrees_with_exact_summation() {
        let sieve = build_sieve(200_000).unwrap();
        for &x in &[100u64, 9_973, 65_537, 199_999] {
            let fast = sieve.theta(x as f64).unwrap();
            let exact = theta_exact(&sieve, x, working_bits());
            let diff = (fast.to_f64() - exact.to_f64()).abs();
            assert!(
                diff <= 1e-12 * exact.to_f64().max(1.0),
                "theta({x}): {diff}"
            );
            assert!(diff <= fast.radius() + exact.radius());
        }
    }

    #[test]
    fn psi0_hand_values() {
        let sieve = build_sieve(1000).unwrap();
        // x=2: k=1 and k=2 ((4)^(1/2)=2) contribute theta(2) each.
        let p2 = sieve.psi0(2.0).unwrap().to_f64();
        assert!((p2 - 2.0 * std::f64::consts::LN_2).abs() < 1e-13, "psi0(2) = {p2}");
        // x=10: K=5, terms theta(10), theta(4.47..), theta(3.10..), theta(2.51..), theta(2.18..)
        let p10 = sieve.psi0(10.0).unwrap().to_f64();
        assert!((p10 - 10.316920830293469).abs() < 1e-12, "psi0(10) = {p10}");
        assert!(sieve.psi0(1.0).is_err());
    }

    #[test]
    fn psi0_dominates_theta() {
        let sieve = build_sieve(100_000).unwrap();
        for x in [2.0f64, 10.0, 100.0, 12345.6, 99_000.0] {
            assert!(sieve.psi0(x).unwrap().to_f64() >= sieve.theta(x).unwrap().to_f64());
        }
    }

    #[test]
    fn r1_matches_direct_sum() {
        let sieve = build_sieve(100_000).unwrap();
        let fast = sieve.r1(50_000).unwrap().to_f64();
        let direct: f64 = sieve
            .primes()
            .take_while(|&p| p <= 50_000)
            .map(|p| (1.0 / p as f64).ln_1p())
            .sum();
        assert!((fast - direct).abs() < 1e-9);
    }
}
