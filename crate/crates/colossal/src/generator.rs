//! CA number generation: factored state, incremental accumulators,
//! classification, and record emission.
//!
//! The state keeps only the exponent boundaries pi_k (largest prime with
//! exponent >= k), so a CA number with millions of prime factors occupies
//! O(max level) memory. log n and log rho are accumulated incrementally in
//! extended precision and audited periodically against independent sums.

use rug::Integer;
use rug::ops::Pow;
use serde::{Deserialize, Serialize};

use crate::critical::{CriticalStep, ParamStream};
use crate::extreal::{digits_to_bits, working_bits, ExtReal, IntervalOrder};
use crate::primes::PrimeSieve;
use crate::{Error, Result};

/// How often (in steps) the incremental accumulators are re-derived from
/// independent prefix sums.
const AUDIT_EVERY: u64 = 1 << 20;

/// Allowed relative disagreement between incremental and fresh accumulators.
const AUDIT_REL_TOL: f64 = 1e-12;

/// Classification of a CA number by log n against P(n) and the next prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClassLabel {
    CA1,
    CA2,
    CA3,
}

impl ClassLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassLabel::CA1 => "CA1",
            ClassLabel::CA2 => "CA2",
            ClassLabel::CA3 => "CA3",
        }
    }
}

impl std::fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A CA number in factored form.
#[derive(Debug, Clone)]
pub struct CAState {
    /// 1-based index in the CA sequence; 0 for the empty initial state.
    pub index: u64,
    /// boundaries[k-1] = pi_k, the largest prime with exponent >= k.
    pub boundaries: Vec<u64>,
    pub log_n: ExtReal,
    pub log_rho: ExtReal,
}

impl CAState {
    pub fn initial() -> Self {
        let bits = working_bits();
        Self {
            index: 0,
            boundaries: Vec::new(),
            log_n: ExtReal::zero(bits),
            log_rho: ExtReal::zero(bits),
        }
    }

    /// Largest prime factor P(n); None for the initial state.
    pub fn largest_prime(&self) -> Option<u64> {
        self.boundaries.first().copied()
    }

    /// Exponent of prime p in n (count of levels whose boundary reaches p).
    pub fn exponent(&self, p: u64) -> u32 {
        self.boundaries.partition_point(|&b| b >= p) as u32
    }
}

/// Advance the state by one critical step.
pub fn apply_step(state: &mut CAState, step: &CriticalStep) -> Result<()> {
    for m in &step.members {
        let k = m.k as usize;
        let fits_below = k == 1 || state.boundaries.get(k - 2).is_some_and(|&b| m.p <= b);
        let above_current = state.boundaries.get(k - 1).map_or(k == state.boundaries.len() + 1, |&b| b < m.p);
        if !fits_below || !above_current || k > state.boundaries.len() + 1 {
            return Err(Error::StreamOrderViolation(format!(
                "step ({}, {}) does not extend boundaries {:?}",
                m.p, m.k, state.boundaries
            )));
        }
        if k == state.boundaries.len() + 1 {
            state.boundaries.push(m.p);
        } else {
            state.boundaries[k - 1] = m.p;
        }
        state.log_n = state.log_n.add(&m.log_p);
        state.log_rho = state.log_rho.add(&m.log_rho_inc);
    }
    state.index += 1;
    Ok(())
}

/// G(n) = rho(n) / log log n = exp(log rho) / log(log n).
pub fn compute_g(state: &CAState) -> ExtReal {
    state.log_rho.exp().div(&state.log_n.ln())
}

/// Per-prime contribution to log rho at exponent a:
/// log(1 + 1/p + ... + 1/p^a) = log((p^(a+1) - 1) / (p^a (p - 1))).
fn log_rho_term(p: u64, a: u32, bits: u32) -> ExtReal {
    let pi = Integer::from(p);
    let num = Integer::from(pi.clone().pow(a + 1)) - 1u32;
    let den = Integer::from(pi.clone().pow(a)) * (pi - 1u32);
    ExtReal::from_integer(&num, bits)
        .div(&ExtReal::from_integer(&den, bits))
        .ln()
}

/// Recompute both accumulators from scratch by ascending-prime summation in
/// extended precision. Independent of the incremental path; used as a drift
/// oracle and for precision escalation.
pub fn recompute_fresh(state: &CAState, sieve: &PrimeSieve, bits: u32) -> Result<(ExtReal, ExtReal)> {
    let mut log_n = ExtReal::zero(bits);
    let mut log_rho = ExtReal::zero(bits);
    let Some(p1) = state.largest_prime() else {
        return Ok((log_n, log_rho));
    };
    if p1 > sieve.limit() {
        return Err(Error::SieveExhausted { needed: p1, limit: sieve.limit() });
    }
    for p in sieve.primes().take_while(|&p| p <= p1) {
        let a = state.exponent(p);
        log_n = log_n.add(&ExtReal::from_u64(p, bits).ln().scale_u64(a as u64));
        log_rho = log_rho.add(&log_rho_term(p, a, bits));
    }
    Ok((log_n, log_rho))
}

/// Fast audit of the accumulators against the sieve's compensated prefix
/// sums: log n = sum over k of theta(pi_k), and log rho decomposed by level.
fn quick_audit(state: &CAState, sieve: &PrimeSieve) -> Result<()> {
    let mut log_n = 0.0f64;
    let mut log_rho = 0.0f64;
    for (i, &pi_k) in state.boundaries.iter().enumerate() {
        let k = (i + 1) as u32;
        log_n += sieve.theta(pi_k as f64)?.to_f64();
        if k == 1 {
            log_rho += sieve.r1(pi_k)?.to_f64();
        } else {
            // Increment of moving primes <= pi_k from level k-1 to k.
            for p in sieve.primes().take_while(|&p| p <= pi_k) {
                let mut s = p as f64;
                for _ in 1..k {
                    s = p as f64 * (1.0 + s);
                }
                log_rho += (1.0 / s).ln_1p();
            }
        }
    }
    let inc_n = state.log_n.to_f64();
    if (inc_n - log_n).abs() > AUDIT_REL_TOL * log_n.abs().max(1.0) {
        return Err(Error::Drift { index: state.index, what: "log n", incremental: inc_n, fresh: log_n });
    }
    let inc_r = state.log_rho.to_f64();
    if (inc_r - log_rho).abs() > AUDIT_REL_TOL * log_rho.abs().max(1.0) {
        return Err(Error::Drift { index: state.index, what: "log rho", incremental: inc_r, fresh: log_rho });
    }
    Ok(())
}

/// Classify by the position of log n relative to P(n) and the next prime.
/// Overlapping comparisons trigger a fresh high-precision recomputation of
/// log n before giving up.
pub fn classify(state: &CAState, sieve: &PrimeSieve) -> Result<ClassLabel> {
    let p1 = state.largest_prime().ok_or_else(|| {
        Error::InvalidArgument("classify: empty state".into())
    })?;
    classify_with(&state.log_n, p1, state, sieve, true)
}

fn classify_with(
    log_n: &ExtReal,
    p1: u64,
    state: &CAState,
    sieve: &PrimeSieve,
    may_escalate: bool,
) -> Result<ClassLabel> {
    let escalate = |boundary: u64| -> Result<ClassLabel> {
        if may_escalate {
            log::warn!(
                "classification of index {} within error radius of {boundary}; recomputing log n at high precision",
                state.index
            );
            let bits = digits_to_bits(120);
            let (fresh, _) = recompute_fresh(state, sieve, bits)?;
            classify_with(&fresh, p1, state, sieve, false)
        } else {
            Err(Error::UnresolvedClass {
                index: state.index,
                log_n: log_n.to_string(),
                boundary,
            })
        }
    };
    match log_n.cmp_u64(p1) {
        IntervalOrder::Below => Ok(ClassLabel::CA1),
        IntervalOrder::Overlap => escalate(p1),
        IntervalOrder::Above => {
            let pnext = sieve.next_prime(p1)?;
            match log_n.cmp_u64(pnext) {
                IntervalOrder::Below => Ok(ClassLabel::CA2),
                IntervalOrder::Above => Ok(ClassLabel::CA3),
                IntervalOrder::Overlap => escalate(pnext),
            }
        }
    }
}

/// One emitted CA number with full-precision values for downstream checks.
#[derive(Clone)]
pub struct Record {
    pub index: u64,
    /// The (p,k) pairs added at this step (two or more only on a tie).
    pub step: Vec<(u64, u32)>,
    /// Largest prime factor.
    pub p: u64,
    pub log_n: ExtReal,
    pub g: ExtReal,
    pub class: ClassLabel,
}

/// Run summary, mirroring the CLI's JSON output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenSummary {
    pub pmax: u64,
    pub total: u64,
    pub ca1: u64,
    pub ca2: u64,
    pub ca3: u64,
    pub max_g: f64,
    pub max_g_index: u64,
}

/// Sequential CA record generator over a critical-parameter stream.
pub struct Generator<'a> {
    sieve: &'a PrimeSieve,
    stream: ParamStream<'a>,
    state: CAState,
    counts: [u64; 3],
    max_g: f64,
    max_g_index: u64,
    log_5040: ExtReal,
    above_5040: bool,
}

impl<'a> Generator<'a> {
    pub fn new(sieve: &'a PrimeSieve, pmax: u64) -> Result<Self> {
        Ok(Self {
            sieve,
            stream: ParamStream::new(sieve, pmax)?,
            state: CAState::initial(),
            counts: [0; 3],
            max_g: f64::NEG_INFINITY,
            max_g_index: 0,
            log_5040: ExtReal::from_u64(5040, working_bits()).ln(),
            above_5040: false,
        })
    }

    /// Rebuild a generator mid-run (checkpoint resume). The stream frontier
    /// is derived entirely from the exponent boundaries.
    pub fn from_state(
        sieve: &'a PrimeSieve,
        pmax: u64,
        state: CAState,
        counts: [u64; 3],
        max_g: f64,
        max_g_index: u64,
    ) -> Result<Self> {
        let stream = ParamStream::resume(sieve, pmax, &state.boundaries)?;
        Ok(Self {
            sieve,
            stream,
            state,
            counts,
            max_g,
            max_g_index,
            log_5040: ExtReal::from_u64(5040, working_bits()).ln(),
            above_5040: false,
        })
    }

    pub fn state(&self) -> &CAState {
        &self.state
    }

    pub fn counts(&self) -> [u64; 3] {
        self.counts
    }

    pub fn max_g(&self) -> (f64, u64) {
        (self.max_g, self.max_g_index)
    }

    pub fn summary(&self) -> GenSummary {
        GenSummary {
            pmax: self.stream.pmax(),
            total: self.counts.iter().sum(),
            ca1: self.counts[0],
            ca2: self.counts[1],
            ca3: self.counts[2],
            max_g: self.max_g,
            max_g_index: self.max_g_index,
        }
    }

    /// Produce the next CA record, or None when the stream is exhausted.
    pub fn next_record(&mut self) -> Result<Option<Record>> {
        let Some(step) = self.stream.next_step()? else {
            return Ok(None);
        };
        apply_step(&mut self.state, &step)?;
        if self.state.index % AUDIT_EVERY == 0 {
            quick_audit(&self.state, self.sieve)?;
        }
        let class = classify(&self.state, self.sieve)?;
        let g = compute_g(&self.state);
        self.counts[match class {
            ClassLabel::CA1 => 0,
            ClassLabel::CA2 => 1,
            ClassLabel::CA3 => 2,
        }] += 1;
        // Track the maximum G among records certainly past the Robin
        // threshold n = 5040.
        if !self.above_5040 && self.state.log_n.certainly_gt(&self.log_5040) {
            self.above_5040 = true;
        }
        if self.above_5040 && g.to_f64() > self.max_g {
            self.max_g = g.to_f64();
            self.max_g_index = self.state.index;
        }
        Ok(Some(Record {
            index: self.state.index,
            step: step.members.iter().map(|m| (m.p, m.k)).collect(),
            p: self.state.boundaries[0],
            log_n: self.state.log_n.clone(),
            g,
            class,
        }))
    }
}

/// Drive a full run, feeding every record to `sink`.
pub fn generate(
    sieve: &PrimeSieve,
    pmax: u64,
    mut sink: impl FnMut(&Record) -> Result<()>,
) -> Result<GenSummary> {
    let mut generator = Generator::new(sieve, pmax)?;
    while let Some(record) = generator.next_record()? {
        sink(&record)?;
    }
    Ok(generator.summary())
}
