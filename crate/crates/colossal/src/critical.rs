//! Critical parameters: evaluation of F(x,k), the ordered stream of
//! critical values, and the auxiliary roots x_k and t0.
//!
//! F(p,k) = log(1 + 1/(p + p^2 + ... + p^k)) / log p is the exponent value
//! at which raising prime p from power k-1 to k becomes marginally optimal.
//! Sweeping these values downward yields the CA numbers one step at a time.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rug::ops::Pow;
use rug::{Float, Integer};

use crate::extreal::{digits_to_bits, working_bits, ExtReal, IntervalOrder, ESCALATION_DIGITS};
use crate::primes::PrimeSieve;
use crate::{Error, Result};

/// Exact geometric sum p + p^2 + ... + p^k as an integer.
fn geom_sum(p: u64, k: u32) -> Integer {
    let pi = Integer::from(p);
    let num = Integer::from(pi.clone().pow(k)) - 1u32;
    pi.clone() * num / (pi - 1u32)
}

/// All per-step quantities derived from one (p,k): the critical value
/// F(p,k), the log rho increment log(1 + 1/(p+...+p^k)), and log p.
pub struct FParts {
    pub f: ExtReal,
    pub log_rho_inc: ExtReal,
    pub log_p: ExtReal,
}

/// Evaluate F(p,k) and its companions for integer prime p at the given
/// precision. The geometric sum is exact; only the two logs round.
pub fn eval_f_parts(p: u64, k: u32, bits: u32) -> Result<FParts> {
    if p <= 1 {
        return Err(Error::InvalidArgument(format!("eval_f: x = {p} must exceed 1")));
    }
    if k < 1 {
        return Err(Error::InvalidArgument("eval_f: k must be >= 1".into()));
    }
    let s = geom_sum(p, k);
    let inv = ExtReal::from_integer(&s, bits).recip();
    let log_rho_inc = inv.ln_1p();
    let log_p = ExtReal::from_u64(p, bits).ln();
    let f = log_rho_inc.div(&log_p);
    Ok(FParts { f, log_rho_inc, log_p })
}

/// F(p,k) for integer p at the given precision.
pub fn eval_f(p: u64, k: u32, bits: u32) -> Result<ExtReal> {
    Ok(eval_f_parts(p, k, bits)?.f)
}

/// F(x,k) for a real interval x > 1.
pub fn eval_f_real(x: &ExtReal, k: u32) -> ExtReal {
    // Horner: S = x * (1 + x * (1 + ... )).
    let one = ExtReal::from_u64(1, x.prec());
    let mut s = x.clone();
    for _ in 1..k {
        s = x.mul(&one.add(&s));
    }
    s.recip().ln_1p().div(&x.ln())
}

/// F(x,k) in plain f64, for root-finder seeding.
fn eval_f_f64(x: f64, k: u32) -> f64 {
    let mut s = x;
    for _ in 1..k {
        s = x * (1.0 + s);
    }
    (1.0 / s).ln_1p() / x.ln()
}

/// A critical value together with its provenance, so comparisons can
/// re-evaluate at higher precision when intervals overlap.
#[derive(Debug, Clone)]
pub struct EpsValue {
    pub p: u64,
    pub k: u32,
    pub val: ExtReal,
}

impl EpsValue {
    pub fn new(p: u64, k: u32) -> Result<Self> {
        Ok(Self {
            p,
            k,
            val: eval_f(p, k, working_bits())?,
        })
    }
}

/// Three-way outcome of comparing two critical values.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EpsOrder {
    Less,
    Greater,
    Tie,
}

/// Compare two critical values rigorously, escalating precision when the
/// intervals overlap. A Tie is declared only if the values still cannot be
/// separated at the top of the precision ladder; every escalation and tie
/// is logged for audit.
pub fn compare_eps(a: &EpsValue, b: &EpsValue) -> EpsOrder {
    if a.p == b.p && a.k == b.k {
        return EpsOrder::Tie;
    }
    match a.val.cmp_interval(&b.val) {
        IntervalOrder::Below => return EpsOrder::Less,
        IntervalOrder::Above => return EpsOrder::Greater,
        IntervalOrder::Overlap => {}
    }
    for &digits in ESCALATION_DIGITS.iter().skip(1) {
        log::warn!(
            "precision escalation to {digits} digits comparing F({},{}) and F({},{})",
            a.p, a.k, b.p, b.k
        );
        let bits = digits_to_bits(digits);
        let av = eval_f(a.p, a.k, bits).expect("re-evaluation of valid operand");
        let bv = eval_f(b.p, b.k, bits).expect("re-evaluation of valid operand");
        match av.cmp_interval(&bv) {
            IntervalOrder::Below => return EpsOrder::Less,
            IntervalOrder::Above => return EpsOrder::Greater,
            IntervalOrder::Overlap => {}
        }
    }
    log::warn!(
        "tie declared: F({},{}) = {} vs F({},{}) = {} at maximum precision",
        a.p, a.k, a.val, b.p, b.k, b.val
    );
    EpsOrder::Tie
}

/// One element of the ordered critical set: its value and the (p,k) pairs
/// attaining it (more than one only on a declared tie).
pub struct CriticalStep {
    pub eps: ExtReal,
    pub members: Vec<StepMember>,
}

/// One (prime, level) pair of a step, with its precomputed increments.
pub struct StepMember {
    pub p: u64,
    pub k: u32,
    pub log_p: ExtReal,
    pub log_rho_inc: ExtReal,
}

struct Candidate {
    p: u64,
    k: u32,
    val: ExtReal,
    log_p: ExtReal,
    log_rho_inc: ExtReal,
}

impl Candidate {
    fn eps_value(&self) -> EpsValue {
        EpsValue {
            p: self.p,
            k: self.k,
            val: self.val.clone(),
        }
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.p == other.p && self.k == other.k
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        // Max-heap on the critical value; deterministic tiebreak on (p,k).
        self.val
            .value()
            .partial_cmp(other.val.value())
            .expect("critical values are finite")
            .then_with(|| other.p.cmp(&self.p))
            .then_with(|| other.k.cmp(&self.k))
    }
}

/// Lazily ordered stream of critical steps with level-1 primes <= pmax.
///
/// The frontier holds one candidate per active level (the smallest unused
/// prime at that level) plus the first prime of the next level, so its size
/// stays O(max level).
pub struct ParamStream<'a> {
    sieve: &'a PrimeSieve,
    heap: BinaryHeap<Candidate>,
    pmax: u64,
    eps_min: EpsValue,
    emitted: u64,
    exhausted: bool,
}

impl<'a> ParamStream<'a> {
    pub fn new(sieve: &'a PrimeSieve, pmax: u64) -> Result<Self> {
        if pmax < 2 {
            return Err(Error::InvalidArgument(format!("pmax = {pmax} must be >= 2")));
        }
        let next = sieve.next_prime(pmax)?;
        let mut stream = Self {
            sieve,
            heap: BinaryHeap::new(),
            pmax,
            eps_min: EpsValue::new(next, 1)?,
            emitted: 0,
            exhausted: false,
        };
        stream.push_candidate(2, 1)?;
        Ok(stream)
    }

    /// Rebuild a stream mid-run from level boundaries: boundaries[k-1] is
    /// the largest prime already at exponent >= k. The frontier is exactly
    /// the next prime at each active level plus (2, K+1).
    pub fn resume(sieve: &'a PrimeSieve, pmax: u64, boundaries: &[u64]) -> Result<Self> {
        let mut stream = Self::new(sieve, pmax)?;
        if boundaries.is_empty() {
            return Ok(stream);
        }
        stream.heap.clear();
        for (i, &pi_k) in boundaries.iter().enumerate() {
            let k = (i + 1) as u32;
            stream.push_candidate(sieve.next_prime(pi_k)?, k)?;
        }
        stream.push_candidate(2, boundaries.len() as u32 + 1)?;
        Ok(stream)
    }

    fn push_candidate(&mut self, p: u64, k: u32) -> Result<()> {
        let parts = eval_f_parts(p, k, working_bits())?;
        self.heap.push(Candidate {
            p,
            k,
            val: parts.f,
            log_p: parts.log_p,
            log_rho_inc: parts.log_rho_inc,
        });
        Ok(())
    }

    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn pmax(&self) -> u64 {
        self.pmax
    }

    fn push_successors(&mut self, p: u64, k: u32) -> Result<()> {
        self.push_candidate(self.sieve.next_prime(p)?, k)?;
        if p == 2 {
            self.push_candidate(2, k + 1)?;
        }
        Ok(())
    }

    /// Pop the next-largest critical value, merging exact ties, or None
    /// when the remaining values fall below F(next_prime(pmax), 1).
    pub fn next_step(&mut self) -> Result<Option<CriticalStep>> {
        if self.exhausted {
            return Ok(None);
        }
        let top = match self.heap.pop() {
            Some(c) => c,
            None => {
                self.exhausted = true;
                return Ok(None);
            }
        };
        if top.k == 1 && top.p > self.pmax {
            self.exhausted = true;
            return Ok(None);
        }
        // Strictly above the cutoff, else the stream ends here.
        if compare_eps(&top.eps_value(), &self.eps_min) != EpsOrder::Greater {
            self.exhausted = true;
            return Ok(None);
        }
        let eps = top.val.clone();
        let mut members = vec![top];
        // Merge any frontier candidate indistinguishable from the popped one.
        while let Some(peek) = self.heap.peek() {
            if peek.val.cmp_interval(&members[0].val) != IntervalOrder::Overlap {
                break;
            }
            if compare_eps(&peek.eps_value(), &members[0].eps_value()) != EpsOrder::Tie {
                break;
            }
            members.push(self.heap.pop().expect("peeked"));
        }
        for i in 0..members.len() {
            let (p, k) = (members[i].p, members[i].k);
            self.push_successors(p, k)?;
        }
        self.emitted += 1;
        Ok(Some(CriticalStep {
            eps,
            members: members
                .into_iter()
                .map(|c| StepMember {
                    p: c.p,
                    k: c.k,
                    log_p: c.log_p,
                    log_rho_inc: c.log_rho_inc,
                })
                .collect(),
        }))
    }
}

/// Certify a root of a monotone function: polish a seed by Newton steps in
/// extended precision, then prove a sign change across [x-d, x+d] and
/// return that interval.
fn certify_root(
    eval: impl Fn(&Float) -> ExtReal,
    target: &ExtReal,
    seed: f64,
    bits: u32,
    increasing: bool,
) -> Result<ExtReal> {
    let mut x = Float::with_val(bits, seed);
    for _ in 0..3 {
        let h = Float::with_val(bits, &x) * Float::with_val(bits, 2f64.powi(-40));
        let fx = eval(&x);
        let fxh = eval(&Float::with_val(bits, &x + &h));
        let deriv = fxh.sub(&fx).div(&ExtReal::new(h, 0.0));
        let step = fx.sub(target).div(&deriv);
        x = Float::with_val(bits, &x - step.value());
    }
    // Certification: widen until the function provably changes sign.
    let mut rel = 1e-25f64;
    while rel < 1e-5 {
        let d = Float::with_val(bits, &x * &Float::with_val(bits, rel));
        let lo = Float::with_val(bits, &x - &d);
        let hi = Float::with_val(bits, &x + &d);
        let flo = eval(&lo);
        let fhi = eval(&hi);
        let ok = if increasing {
            flo.certainly_lt(target) && fhi.certainly_gt(target)
        } else {
            flo.certainly_gt(target) && fhi.certainly_lt(target)
        };
        if ok {
            let radius = x.to_f64().abs() * rel;
            return Ok(ExtReal::new(x, radius));
        }
        rel *= 100.0;
    }
    Err(Error::NoSolution(format!(
        "could not certify a sign change around {}",
        x.to_f64()
    )))
}

/// Solve F(x_k, k) = eps for x_k > 1 (F is strictly decreasing in x).
pub fn solve_xk(eps: &ExtReal, k: u32) -> Result<ExtReal> {
    let e = eps.to_f64();
    if !(e > 0.0) {
        return Err(Error::NoSolution(format!("eps = {e} out of range")));
    }
    // f64 bracket and bisection seed.
    let mut lo = 1.0 + 1e-12;
    let mut hi = 2.0;
    while eval_f_f64(hi, k) > e {
        hi *= 2.0;
        if hi > 1e300 {
            return Err(Error::NoSolution("bracket expansion failed".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval_f_f64(mid, k) > e {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let bits = eps.prec();
    certify_root(
        |x| eval_f_real(&ExtReal::new(x.clone(), 0.0), k),
        eps,
        0.5 * (lo + hi),
        bits,
        false,
    )
}

/// Largest K such that x_K >= 2, i.e. F(2,K) >= eps (boundary inclusive).
pub fn max_level(eps: &EpsValue) -> Result<u32> {
    let mut k = 1u32;
    loop {
        let cand = EpsValue {
            p: 2,
            k: k + 1,
            val: eval_f(2, k + 1, working_bits())?,
        };
        match compare_eps(&cand, eps) {
            EpsOrder::Less => return Ok(k),
            EpsOrder::Greater | EpsOrder::Tie => k += 1,
        }
        if k > 200 {
            return Err(Error::NoSolution("max_level runaway".into()));
        }
    }
}

/// Solve eps * u * log u = 1 for u = log t0, the log of the minimizer of
/// t^eps / log log t. Strictly increasing in u on (1, inf).
pub fn solve_t0(eps: &ExtReal) -> Result<ExtReal> {
    let e = eps.to_f64();
    if !(e > 0.0) {
        return Err(Error::NoSolution(format!("eps = {e} out of range")));
    }
    let g = |u: f64| e * u * u.ln();
    let mut lo = 1.0 + 1e-9;
    let mut hi = 4.0;
    while g(hi) < 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if g(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            break;
        }
    }
    let bits = eps.prec();
    let one = ExtReal::from_u64(1, bits);
    certify_root(
        |u| {
            let ue = ExtReal::new(u.clone(), 0.0);
            eps.mul(&ue).mul(&ue.ln())
        },
        &one,
        0.5 * (lo + hi),
        bits,
        true,
    )
}
