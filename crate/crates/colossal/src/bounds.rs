//! Numeric verification of the inequalities satisfied by CA numbers:
//! sample-based checks on the auxiliary functions (critical roots, the
//! t0 bracket, the h/g minimizer bounds, the prime-power tail sum f, and
//! the Chebyshev bounds) plus streaming checks over generated records
//! (G-monotonicity per class, the CA3-to-CA2 chain, and the Robin bound).
//!
//! Every pass verdict is interval-rigorous: a strict inequality passes
//! only when the two operand intervals are disjoint in the asserted
//! direction; a non-strict one fails only when they are disjoint in the
//! violating direction. Vacuous outcomes (preconditions unmet, truncation
//! at the end of a run) are recorded, never silently dropped.

use rug::float::Constant;
use rug::{Float, Integer, Rational};
use serde::Serialize;

use crate::critical::{eval_f, max_level, solve_t0, solve_xk, EpsValue, ParamStream};
use crate::extreal::{working_bits, ExtReal};
use crate::generator::{apply_step, CAState, ClassLabel, Record};
use crate::primes::PrimeSieve;
use crate::{Error, Result};

/// Maximum number of failing reports retained verbatim per suite.
const MAX_KEPT_FAILURES: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Vacuous,
}

/// Outcome of one inequality check.
#[derive(Debug, Clone, Serialize)]
pub struct CheckReport {
    pub id: String,
    pub inputs: String,
    pub lhs: f64,
    pub rhs: f64,
    pub verdict: Verdict,
    /// Signed distance in the asserted direction (positive = satisfied).
    pub margin: f64,
}

impl CheckReport {
    /// Strict `lhs < rhs`: pass only when the intervals are disjoint.
    pub fn strict_lt(id: &str, inputs: String, lhs: &ExtReal, rhs: &ExtReal) -> Self {
        let verdict = if lhs.certainly_lt(rhs) { Verdict::Pass } else { Verdict::Fail };
        Self {
            id: id.into(),
            inputs,
            lhs: lhs.to_f64(),
            rhs: rhs.to_f64(),
            verdict,
            margin: rhs.to_f64() - lhs.to_f64(),
        }
    }

    /// Strict `lhs > rhs`.
    pub fn strict_gt(id: &str, inputs: String, lhs: &ExtReal, rhs: &ExtReal) -> Self {
        let verdict = if lhs.certainly_gt(rhs) { Verdict::Pass } else { Verdict::Fail };
        Self {
            id: id.into(),
            inputs,
            lhs: lhs.to_f64(),
            rhs: rhs.to_f64(),
            verdict,
            margin: lhs.to_f64() - rhs.to_f64(),
        }
    }

    /// Non-strict `lhs >= rhs`: equality within the error radii passes
    /// (needed at exact boundary cases such as x_k = x_1).
    pub fn ge(id: &str, inputs: String, lhs: &ExtReal, rhs: &ExtReal) -> Self {
        let verdict = if lhs.certainly_lt(rhs) { Verdict::Fail } else { Verdict::Pass };
        Self {
            id: id.into(),
            inputs,
            lhs: lhs.to_f64(),
            rhs: rhs.to_f64(),
            verdict,
            margin: lhs.to_f64() - rhs.to_f64(),
        }
    }

    /// Non-strict `lhs <= rhs`.
    pub fn le(id: &str, inputs: String, lhs: &ExtReal, rhs: &ExtReal) -> Self {
        let verdict = if lhs.certainly_gt(rhs) { Verdict::Fail } else { Verdict::Pass };
        Self {
            id: id.into(),
            inputs,
            lhs: lhs.to_f64(),
            rhs: rhs.to_f64(),
            verdict,
            margin: rhs.to_f64() - lhs.to_f64(),
        }
    }

    /// Two-sided value check |lhs - target| <= tol (midpoint based; used
    /// for reproducing published table entries).
    pub fn close_to(id: &str, inputs: String, value: f64, target: f64, tol: f64) -> Self {
        let diff = (value - target).abs();
        Self {
            id: id.into(),
            inputs,
            lhs: value,
            rhs: target,
            verdict: if diff <= tol { Verdict::Pass } else { Verdict::Fail },
            margin: tol - diff,
        }
    }

    pub fn vacuous(id: &str, inputs: String) -> Self {
        Self {
            id: id.into(),
            inputs,
            lhs: f64::NAN,
            rhs: f64::NAN,
            verdict: Verdict::Vacuous,
            margin: f64::NAN,
        }
    }

    /// Demote to an informational record that never affects suite status.
    pub fn informational(mut self) -> Self {
        self.inputs = format!("informational (not asserted): {}", self.inputs);
        self.verdict = Verdict::Vacuous;
        self
    }
}

/// Aggregated result of one verification suite.
#[derive(Debug, Clone, Serialize)]
pub struct SuiteSummary {
    pub name: String,
    pub pass: u64,
    pub fail: u64,
    pub vacuous: u64,
    /// Smallest margin observed among asserted checks.
    pub worst_margin: f64,
    pub worst_margin_id: String,
    /// Up to MAX_KEPT_FAILURES failing reports, in input order.
    pub failures: Vec<CheckReport>,
}

impl SuiteSummary {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.into(),
            pass: 0,
            fail: 0,
            vacuous: 0,
            worst_margin: f64::INFINITY,
            worst_margin_id: String::new(),
            failures: Vec::new(),
        }
    }

    pub fn absorb(&mut self, report: CheckReport) {
        match report.verdict {
            Verdict::Pass => self.pass += 1,
            Verdict::Fail => self.fail += 1,
            Verdict::Vacuous => {
                self.vacuous += 1;
                return;
            }
        }
        if report.margin < self.worst_margin {
            self.worst_margin = report.margin;
            self.worst_margin_id = format!("{} [{}]", report.id, report.inputs);
        }
        if report.verdict == Verdict::Fail && self.failures.len() < MAX_KEPT_FAILURES {
            self.failures.push(report);
        }
    }

    pub fn absorb_all(&mut self, reports: impl IntoIterator<Item = CheckReport>) {
        for r in reports {
            self.absorb(r);
        }
    }

    pub fn is_green(&self) -> bool {
        self.fail == 0
    }
}

fn ext(v: f64) -> ExtReal {
    ExtReal::from_f64(v, working_bits())
}

fn ext_u(v: u64) -> ExtReal {
    ExtReal::from_u64(v, working_bits())
}

/// Sum x + x^2 + ... + x^k by Horner.
fn sum_powers(x: &ExtReal, k: u32) -> ExtReal {
    let one = ExtReal::from_u64(1, x.prec());
    let mut s = x.clone();
    for _ in 1..k {
        s = x.mul(&one.add(&s));
    }
    s
}

// ---------------------------------------------------------------------------
// Sample suites over the auxiliary functions
// ---------------------------------------------------------------------------

/// Sandwich bounds on (x_k + ... + x_k^k) log x_k relative to x_1 log x_1,
/// in both refined and simple forms, at every level reachable for
/// eps = F(p,1).
pub fn check_lemma1(p: u64) -> Result<Vec<CheckReport>> {
    let eps = EpsValue::new(p, 1)?;
    let kmax = max_level(&eps)?;
    let bits = working_bits();
    let x1 = ext_u(p);
    let ln_x1 = x1.ln();
    let x1_ln_x1 = x1.mul(&ln_x1);
    let half = ext(0.5);
    let mut out = Vec::new();
    for k in 1..=kmax {
        let xk = if k == 1 { x1.clone() } else { solve_xk(&eps.val, k)? };
        let ln_xk = xk.ln();
        let lhs = sum_powers(&xk, k).mul(&ln_xk);
        let inputs = format!("p={p} k={k}");
        // Simple forms.
        out.push(CheckReport::ge("lemma1.lower-simple", inputs.clone(), &lhs, &x1_ln_x1));
        let upper_simple = x1_ln_x1.add(&ln_x1.mul(&half));
        out.push(CheckReport::strict_lt("lemma1.upper-simple", inputs.clone(), &lhs, &upper_simple));
        // Refined forms with their correction terms.
        let gap = ln_x1.mul(&half).sub(&ln_xk.mul(&half));
        let coeff = ExtReal::from_u64(1, bits).sub(&ExtReal::from_u64(1, bits).div(&x1.scale_u64(2)));
        let lower_full = x1_ln_x1.add(&coeff.mul(&gap));
        out.push(CheckReport::ge("lemma1.lower-full", inputs.clone(), &lhs, &lower_full));
        let upper_full = x1_ln_x1
            .add(&gap)
            .add(&ln_x1.div(&x1.scale_u64(4)));
        out.push(CheckReport::strict_lt("lemma1.upper-full", inputs, &lhs, &upper_full));
    }
    Ok(out)
}

/// The bracket on log t0, the log of the minimizer of t^eps / log log t.
pub fn check_lemma2(p: u64) -> Result<CheckReport> {
    let eps = eval_f(p, 1, working_bits())?;
    let u = solve_t0(&eps)?;
    let pf = ext_u(p);
    let ln_p = pf.ln();
    let half = ext(0.5);
    let lo = pf.add(&half).sub(&ln_p.scale_u64(2).recip());
    let hi = pf
        .add(&half)
        .sub(&pf.scale_u64(12).recip())
        .add(&pf.mul(&pf).scale_u64(24).recip());
    let inputs = format!("p={p} log_t0={:.12}", u.to_f64());
    let left = CheckReport::strict_gt("lemma2.bracket", inputs.clone(), &u, &lo);
    let right = CheckReport::strict_lt("lemma2.bracket", inputs.clone(), &u, &hi);
    let verdict = if left.verdict == Verdict::Pass && right.verdict == Verdict::Pass {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(CheckReport {
        id: "lemma2.bracket".into(),
        inputs,
        lhs: u.to_f64(),
        rhs: hi.to_f64(),
        verdict,
        margin: left.margin.min(right.margin),
    })
}

/// h(u) = exp(eps u) / log u.
fn h_of(eps: &ExtReal, u: &ExtReal) -> ExtReal {
    eps.mul(u).exp().div(&u.ln())
}

/// Bounds around the minimizer of h(u) = e^(eps u)/log u (with u0 > 40),
/// and the derived integer-argument bounds on g(t) = t^eps / log log t.
///
/// Case 1 is asserted as a bound on h(u1)/h0 (the form its derivation
/// actually yields); the literal statement with h(u2) under the u1
/// hypothesis is recorded informationally. The case-3 bound is asserted
/// with the stated (log u0)^2 denominator and also recorded with the
/// stronger single-log form from its derivation. The integer-argument
/// bound is checked with both published constants, 2.754 and 3.2961.
pub fn check_lemma34(p: u64) -> Result<Vec<CheckReport>> {
    let bits = working_bits();
    let eps = eval_f(p, 1, bits)?;
    let u0 = solve_t0(&eps)?;
    let u0f = u0.to_f64();
    if u0f <= 40.0 {
        return Ok(vec![CheckReport::vacuous(
            "lemma3.precondition",
            format!("p={p} u0={u0f:.4} <= 40"),
        )]);
    }
    let mut out = Vec::new();
    let ln_u0 = u0.ln();
    let u0_sq = u0.mul(&u0);
    let h0 = h_of(&eps, &u0);
    let one = ExtReal::from_u64(1, bits);

    // Case 1: u1 slightly below the minimizer.
    for du in [0.05f64, 0.25, 0.45] {
        let u1 = u0.sub(&ext(du));
        let ratio = h_of(&eps, &u1).div(&h0);
        let bound = one
            .add(&ext(0.2532).mul(&ext(du)).div(&u0_sq.mul(&ln_u0)))
            .add(&ext(0.5162).mul(&ext(du * du)).div(&u0_sq.mul(&ln_u0).mul(&ln_u0)));
        let inputs = format!("p={p} u0={u0f:.4} u1=u0-{du}");
        out.push(CheckReport::strict_lt("lemma3.case1", inputs.clone(), &ratio, &bound));
        // Literal reading: same bound applied to h(u2), u2 = u0 + du.
        let u2 = u0.add(&ext(du));
        let ratio2 = h_of(&eps, &u2).div(&h0);
        out.push(
            CheckReport::strict_lt("lemma3.case1-literal-h(u2)", inputs, &ratio2, &bound)
                .informational(),
        );
    }

    // Case 2: u2 above the minimizer. The stated admissible range reaches
    // u0 log u0, but the bound only holds for d = c u0 with c below about
    // 3/log u0: expanding log(h(u2)/h0) minus the log of the claimed bound
    // gives -c^3/(3 log u0) + c^2/(log u0)^2 + O(smaller), which turns
    // negative once c log u0 > 3. Fixed small ratios are asserted together
    // with an adaptive sample at half the critical ratio; one far sample is
    // recorded for the register.
    let case2 = |d: &ExtReal| {
        let d_sq = d.mul(&d);
        let ratio = h_of(&eps, &u0.add(d)).div(&h0);
        let bound = one
            .add(&d_sq.div(&u0_sq.mul(&ln_u0).scale_u64(2)))
            .sub(&d_sq.div(&u0_sq.mul(&ln_u0).mul(&ln_u0).scale_u64(2)));
        let inputs = format!("p={p} u0={u0f:.4} u2=u0+{:.4}", d.to_f64());
        CheckReport::strict_gt("lemma3.case2", inputs, &ratio, &bound)
    };
    for c in [0.02f64, 0.05, 0.1] {
        out.push(case2(&u0.mul(&ext(c))));
    }
    out.push(case2(&u0.mul(&ext(1.5)).div(&ln_u0)));
    let far = u0.mul(&ln_u0).sub(&u0).mul(&ext(0.5));
    out.push(case2(&far).informational());

    // Case 3: both points above the minimizer, gap below log u0.
    for (off1, gapfrac) in [(0.1f64, 0.3f64), (1.0, 0.8), (2.0, 0.95)] {
        let u1 = u0.add(&ext(off1));
        let a = ln_u0.mul(&ext(gapfrac));
        let u2 = u1.add(&a);
        let a_sq = a.mul(&a);
        let ratio = h_of(&eps, &u2).div(&h_of(&eps, &u1));
        let stated = one.add(&ext(0.3337).mul(&a_sq).div(&u0_sq.mul(&ln_u0).mul(&ln_u0)));
        let inputs = format!("p={p} u0={u0f:.4} u1=u0+{off1} a={:.4}", a.to_f64());
        out.push(CheckReport::strict_gt("lemma3.case3", inputs.clone(), &ratio, &stated));
        let stronger = one.add(&ext(0.3337).mul(&a_sq).div(&u0_sq.mul(&ln_u0)));
        out.push(
            CheckReport::strict_gt("lemma3.case3-single-log", inputs, &ratio, &stronger)
                .informational(),
        );
    }

    // Integer-argument bounds on g(N) = N^eps / log log N. Representing N
    // exactly needs about u0/log 2 bits, so this part is restricted to
    // moderate p.
    if u0f < 5.0e4 {
        let gbits = (u0f * std::f64::consts::LOG2_E) as u32 + 64;
        let floor_exp = |u: f64| -> ExtReal {
            let mut v = Float::with_val(gbits, u).exp();
            v.floor_mut();
            ExtReal::new(v, 0.0)
        };
        let g_at = |n: &ExtReal| -> ExtReal {
            let ln_n = n.ln();
            ExtReal::new(Float::with_val(gbits, eps.value()), eps.radius())
                .mul(&ln_n)
                .exp()
                .div(&ln_n.ln())
        };
        let denom = u0_sq.mul(&ln_u0);
        // Part 1: N just below t0, N1 comfortably above.
        let n = floor_exp(u0f - 0.25);
        let n1 = floor_exp(u0f + 2.5);
        let g_n = g_at(&n);
        let g_n1 = g_at(&n1);
        for c in [2.754f64, 3.2961] {
            let bound = g_n.mul(&one.add(&ext(c).div(&denom)));
            let inputs = format!("p={p} u0={u0f:.4} c={c}");
            out.push(CheckReport::strict_gt("lemma4.part1", inputs, &g_n1, &bound));
        }
        // Part 2: both above t0, log-gap below log log t0.
        let n = floor_exp(u0f + 0.5);
        let n1 = floor_exp(u0f + 0.5 + 0.8 * u0f.ln().ln().max(0.5));
        let g_n = g_at(&n);
        let g_n1 = g_at(&n1);
        let lgap = n1.ln().sub(&n.ln());
        let bound = g_n.mul(&one.add(&ext(0.3337).mul(&lgap).mul(&lgap).div(&denom)));
        let inputs = format!("p={p} u0={u0f:.4} log_gap={:.4}", lgap.to_f64());
        out.push(CheckReport::strict_gt("lemma4.part2", inputs, &g_n1, &bound));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// The tail-sum function f and the Chebyshev bounds
// ---------------------------------------------------------------------------

/// Largest K with 2^K / K <= x, decided by exact rational comparison.
fn tail_k(x: &Rational) -> u32 {
    let mut k = 3u32;
    loop {
        let next = Rational::from((Integer::from(1u32) << (k + 1), Integer::from(k + 1)));
        if next <= *x {
            k += 1;
        } else {
            return k;
        }
    }
}

fn f_tail_at(x: &Rational) -> ExtReal {
    let bits = working_bits();
    let kk = tail_k(x);
    let xe = {
        let num = ExtReal::from_integer(x.numer(), bits);
        let den = ExtReal::from_integer(x.denom(), bits);
        num.div(&den)
    };
    let mut sum = ExtReal::zero(bits);
    for k in 3..=kk {
        sum = sum.add(&xe.scale_u64(k as u64).root_u32(k));
    }
    sum.div(&xe.scale_u64(2).sqrt())
}

/// f(x) = (2x)^(-1/2) * sum over k=3..K(x) of (kx)^(1/k), where K(x) is
/// the largest K with 2^K / K <= x.
pub fn f_lemma5(x: f64) -> Result<ExtReal> {
    if !(x > 2.667) {
        return Err(Error::InvalidArgument(format!("f({x}): x must exceed 2.667")));
    }
    Ok(f_tail_at(&Rational::from_f64(x).unwrap()))
}

/// f at the discontinuity point x = 2^K / K, evaluated exactly.
pub fn f_lemma5_at_disc(k: u32) -> ExtReal {
    f_tail_at(&Rational::from((Integer::from(1u32) << k, Integer::from(k))))
}

/// The published two-decimal table of f at its local maxima, K = 3..16.
const F_TABLE_2DP: [f64; 14] = [
    0.87, 1.52, 1.94, 2.15, 2.21, 2.16, 2.03, 1.86, 1.67, 1.48, 1.30, 1.12, 0.97, 0.83,
];

/// All checks on f: the published table, monotonicity of the local maxima,
/// the published point value at 2^31/31, and the resulting tail bound.
pub fn check_lemma5() -> Vec<CheckReport> {
    let mut out = Vec::new();
    for k in 3..=16u32 {
        let v = f_lemma5_at_disc(k);
        let target = F_TABLE_2DP[(k - 3) as usize];
        out.push(CheckReport::close_to(
            "lemma5.table",
            format!("K={k} x=2^{k}/{k}"),
            v.to_f64(),
            target,
            0.01,
        ));
    }
    for k in 7..=30u32 {
        let a = f_lemma5_at_disc(k);
        let b = f_lemma5_at_disc(k + 1);
        out.push(CheckReport::strict_gt(
            "lemma5.local-max-decreasing",
            format!("K={k}"),
            &a,
            &b,
        ));
    }
    // Published point value at x = 2^31/31. See the README discussion: the
    // directly computed value disagrees with the published 0.10923475.
    let v31 = f_lemma5_at_disc(31);
    out.push(CheckReport::close_to(
        "lemma5.point-value",
        "x=2^31/31".into(),
        v31.to_f64(),
        0.10923475,
        1e-6,
    ));
    // Tail bound f(x) < 0.10924 for x >= 2^31/31, sampled.
    let cap = ext(0.10924);
    out.push(CheckReport::strict_lt(
        "lemma5.tail-bound",
        "x=2^31/31".into(),
        &v31,
        &cap,
    ));
    for x in [7.0e7f64, 1.0e8, 1.342e8, 1.0e9, 1.0e10, 1.0e12] {
        out.push(CheckReport::strict_lt(
            "lemma5.tail-bound",
            format!("x={x:e}"),
            &f_lemma5(x).unwrap(),
            &cap,
        ));
    }
    out
}

/// psi0(x) < x (1 + 0.06323/(log x)^2) on a log-spaced sample of x above
/// 1e8; the sieve must cover the sample.
pub fn check_lemma6_sample(sieve: &PrimeSieve, lo: f64, hi: f64, points: usize) -> Result<Vec<CheckReport>> {
    let mut out = Vec::new();
    for i in 0..points {
        let t = i as f64 / (points - 1).max(1) as f64;
        let x = (lo.ln() + t * (hi.ln() - lo.ln())).exp();
        if x <= 1.0e8 {
            out.push(CheckReport::vacuous("lemma6.psi0-bound", format!("x={x:.1} <= 1e8")));
            continue;
        }
        let lhs = sieve.psi0(x)?;
        let xe = ext(x);
        let ln_x = xe.ln();
        let rhs = xe.mul(&ExtReal::from_u64(1, working_bits()).add(&ext(0.06323).div(&ln_x.mul(&ln_x))));
        out.push(CheckReport::strict_lt(
            "lemma6.psi0-bound",
            format!("x={x:.1}"),
            &lhs,
            &rhs,
        ));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Streaming record checks
// ---------------------------------------------------------------------------

/// Per-record chain log n <= psi0(P(n)), plus the sharper bound
/// log n < P (1 + 0.06323/(log P)^2) for records with P above a threshold.
pub struct Lemma7Check<'a> {
    sieve: &'a PrimeSieve,
    /// Check the psi0 chain on every record only when P exceeds this (use 0
    /// to check all records; census-scale runs restrict to the margin).
    pub min_p: u64,
    summary: SuiteSummary,
}

impl<'a> Lemma7Check<'a> {
    pub fn new(sieve: &'a PrimeSieve, min_p: u64) -> Self {
        Self {
            sieve,
            min_p,
            summary: SuiteSummary::new("lemma67"),
        }
    }

    pub fn feed(&mut self, r: &Record) -> Result<()> {
        if r.p < self.min_p {
            return Ok(());
        }
        let psi = self.sieve.psi0(r.p as f64)?;
        self.summary.absorb(CheckReport::le(
            "lemma7.psi0-chain",
            format!("index={} P={}", r.index, r.p),
            &r.log_n,
            &psi,
        ));
        if r.p > 100_000_000 {
            let pe = ext_u(r.p);
            let ln_p = pe.ln();
            let rhs = pe.mul(
                &ExtReal::from_u64(1, working_bits()).add(&ext(0.06323).div(&ln_p.mul(&ln_p))),
            );
            self.summary.absorb(CheckReport::strict_lt(
                "lemma7.log-n-bound",
                format!("index={} P={}", r.index, r.p),
                &r.log_n,
                &rhs,
            ));
        }
        Ok(())
    }

    pub fn finish(self) -> SuiteSummary {
        self.summary
    }
}

/// G decreases into every CA1 record (index >= 3), with the quadratic
/// shrink factor per added prime.
pub struct Thm1Check {
    prev: Option<(u64, ExtReal)>,
    summary: SuiteSummary,
}

impl Thm1Check {
    pub fn new() -> Self {
        Self {
            prev: None,
            summary: SuiteSummary::new("thm1"),
        }
    }

    pub fn feed(&mut self, r: &Record) {
        if r.class == ClassLabel::CA1 && r.index >= 3 {
            if let Some((_, prev_g)) = &self.prev {
                let one = ExtReal::from_u64(1, working_bits());
                let p_ln_p = ext_u(r.p).mul(&ext_u(r.p).ln());
                let mut bound = prev_g.clone();
                for &(q, _) in &r.step {
                    let ratio = ext_u(q).ln().div(&p_ln_p);
                    bound = bound.mul(&one.sub(&ratio.mul(&ratio)));
                }
                let id = if r.step.len() == 1 { "thm1.single" } else { "thm1.tie" };
                self.summary.absorb(CheckReport::strict_lt(
                    id,
                    format!("index={} P={} step={:?}", r.index, r.p, r.step),
                    &r.g,
                    &bound,
                ));
            }
        }
        self.prev = Some((r.index, r.g.clone()));
    }

    pub fn finish(self) -> SuiteSummary {
        self.summary
    }
}

impl Default for Thm1Check {
    fn default() -> Self {
        Self::new()
    }
}

/// For every CA3 record, G grows by at least the fixed t0-dependent factor
/// once the stream reaches the CA number built from F(p,1), p the prime
/// after P(n).
pub struct Thm2Check<'a> {
    sieve: &'a PrimeSieve,
    /// (index, G, prime whose level-1 step resolves this entry)
    pending: Vec<(u64, ExtReal, u64)>,
    summary: SuiteSummary,
}

impl<'a> Thm2Check<'a> {
    pub fn new(sieve: &'a PrimeSieve) -> Self {
        Self {
            sieve,
            pending: Vec::new(),
            summary: SuiteSummary::new("thm2"),
        }
    }

    pub fn feed(&mut self, r: &Record) -> Result<()> {
        // Resolve pendings whose awaited (p,1) step is this record.
        if let Some(&(p, _)) = r.step.iter().find(|&&(_, k)| k == 1) {
            let waiting: Vec<_> = self
                .pending
                .iter()
                .filter(|&&(_, _, wanted)| wanted == p)
                .cloned()
                .collect();
            if !waiting.is_empty() {
                let eps = eval_f(p, 1, working_bits())?;
                let u0 = solve_t0(&eps)?;
                let factor = ExtReal::from_u64(1, working_bits())
                    .add(&ext(3.2961).div(&u0.mul(&u0).mul(&u0.ln())));
                for (idx, g_i, _) in waiting {
                    let bound = g_i.mul(&factor);
                    self.summary.absorb(CheckReport::strict_gt(
                        "thm2.growth",
                        format!("i={idx} j={} p={p}", r.index),
                        &r.g,
                        &bound,
                    ));
                }
                self.pending.retain(|&(_, _, wanted)| wanted != p);
            }
        }
        if r.class == ClassLabel::CA3 {
            let p = self.sieve.next_prime(r.p)?;
            self.pending.push((r.index, r.g.clone(), p));
        }
        Ok(())
    }

    pub fn finish(mut self) -> SuiteSummary {
        for (idx, _, p) in self.pending.drain(..) {
            self.summary.absorb(CheckReport::vacuous(
                "thm2.growth",
                format!("i={idx} awaits p={p} beyond run end"),
            ));
        }
        self.summary
    }
}

/// Successor comparisons after a CA3 record: G grows for q >= 3, with the
/// quantitative factor for q >= 23, and stays under the exp bound once the
/// succeeding prime passes 1e8. The q = 2 direction is open and recorded
/// vacuous.
pub struct Thm34Check<'a> {
    sieve: &'a PrimeSieve,
    prev: Option<Record>,
    summary: SuiteSummary,
}

impl<'a> Thm34Check<'a> {
    pub fn new(sieve: &'a PrimeSieve) -> Self {
        Self {
            sieve,
            prev: None,
            summary: SuiteSummary::new("thm34"),
        }
    }

    pub fn feed(&mut self, r: &Record) -> Result<()> {
        if let Some(prev) = &self.prev {
            if prev.class == ClassLabel::CA3 {
                let p = self.sieve.next_prime(prev.p)?;
                let one = ExtReal::from_u64(1, working_bits());
                let inputs = format!("i={} p={p} step={:?}", prev.index, r.step);
                let small_qs: Vec<u64> = r.step.iter().map(|&(q, _)| q).collect();
                if small_qs.contains(&2) {
                    self.summary
                        .absorb(CheckReport::vacuous("thm3.q2-open", inputs.clone()));
                } else {
                    self.summary.absorb(CheckReport::strict_lt(
                        "thm3.direction",
                        inputs.clone(),
                        &prev.g,
                        &r.g,
                    ));
                    if small_qs.iter().all(|&q| q >= 23) {
                        let pe = ext_u(p);
                        let denom = pe.mul(&pe).mul(&pe.ln()).scale_u64(3);
                        let mut bound = r.g.clone();
                        for &q in &small_qs {
                            let lq = ext_u(q).ln();
                            bound = bound.mul(&one.sub(&lq.mul(&lq).div(&denom)));
                        }
                        let id = if small_qs.len() == 1 { "thm3.quantitative" } else { "thm3.tie" };
                        self.summary.absorb(CheckReport::strict_lt(
                            id,
                            inputs.clone(),
                            &prev.g,
                            &bound,
                        ));
                        // Alternate published form with (log p)^2 in the
                        // denominator and log q unsquared; recorded only.
                        if small_qs.len() == 1 {
                            let pe = ext_u(p);
                            let ln_p = pe.ln();
                            let lq = ext_u(small_qs[0]).ln();
                            let alt = r.g.mul(&one.sub(
                                &lq.div(&pe.mul(&pe).mul(&ln_p).mul(&ln_p).scale_u64(3)),
                            ));
                            self.summary.absorb(
                                CheckReport::strict_lt(
                                    "thm3.alternate-form",
                                    inputs.clone(),
                                    &prev.g,
                                    &alt,
                                )
                                .informational(),
                            );
                        }
                    } else {
                        self.summary
                            .absorb(CheckReport::vacuous("thm3.quantitative", format!("{inputs} (q < 23)")));
                    }
                }
                // Upper bound on the growth, applicable only for p > 1e8
                // and single-prime steps.
                if p > 100_000_000 && r.step.len() == 1 {
                    let q = r.step[0].0;
                    let pe = ext_u(p);
                    let ln_p = pe.ln();
                    let expo = ext(0.12646)
                        .mul(&ext_u(q).ln())
                        .div(&pe.mul(&ln_p).mul(&ln_p).mul(&ln_p));
                    let bound = prev.g.mul(&expo.exp());
                    self.summary.absorb(CheckReport::strict_lt(
                        "thm4.growth-cap",
                        inputs,
                        &r.g,
                        &bound,
                    ));
                }
            }
        }
        self.prev = Some(r.clone());
        Ok(())
    }

    pub fn finish(self) -> SuiteSummary {
        self.summary
    }
}

/// Dataset-level monotone chains: every CA1 record past 5040 sits below the
/// last preceding non-CA1 record, and every CA3 record sits below the next
/// CA2 record.
pub struct ChainCheck {
    last_non_ca1: Option<(u64, ExtReal)>,
    pending_ca3: Vec<(u64, ExtReal)>,
    log_5040: ExtReal,
    summary: SuiteSummary,
}

impl ChainCheck {
    pub fn new() -> Self {
        Self {
            last_non_ca1: None,
            pending_ca3: Vec::new(),
            log_5040: ExtReal::from_u64(5040, working_bits()).ln(),
            summary: SuiteSummary::new("chains"),
        }
    }

    pub fn feed(&mut self, r: &Record) {
        match r.class {
            ClassLabel::CA1 => {
                if r.log_n.certainly_gt(&self.log_5040) {
                    match &self.last_non_ca1 {
                        Some((j, g_j)) => self.summary.absorb(CheckReport::strict_lt(
                            "chains.ca1-vs-last-non-ca1",
                            format!("i={} j={j}", r.index),
                            &r.g,
                            g_j,
                        )),
                        None => self.summary.absorb(CheckReport::vacuous(
                            "chains.ca1-vs-last-non-ca1",
                            format!("i={} has no preceding non-CA1 record", r.index),
                        )),
                    }
                }
            }
            ClassLabel::CA2 => {
                for (i, g_i) in self.pending_ca3.drain(..) {
                    self.summary.absorb(CheckReport::strict_lt(
                        "chains.ca3-vs-next-ca2",
                        format!("i={i} j={}", r.index),
                        &g_i,
                        &r.g,
                    ));
                }
                self.last_non_ca1 = Some((r.index, r.g.clone()));
            }
            ClassLabel::CA3 => {
                self.pending_ca3.push((r.index, r.g.clone()));
                self.last_non_ca1 = Some((r.index, r.g.clone()));
            }
        }
    }

    pub fn finish(mut self) -> SuiteSummary {
        for (i, _) in self.pending_ca3.drain(..) {
            self.summary.absorb(CheckReport::vacuous(
                "chains.ca3-vs-next-ca2",
                format!("i={i}: no CA2 before run end"),
            ));
        }
        self.summary
    }
}

impl Default for ChainCheck {
    fn default() -> Self {
        Self::new()
    }
}

/// G(n) < e^gamma for every record past 5040.
pub struct RobinCheck {
    e_gamma: ExtReal,
    log_5040: ExtReal,
    pub max_g: f64,
    pub max_g_index: u64,
    summary: SuiteSummary,
}

impl RobinCheck {
    pub fn new() -> Self {
        let bits = working_bits();
        let gamma = ExtReal::new(Float::with_val(bits, Constant::Euler), 0.0)
            .inflate(2f64.powi(-(bits as i32)));
        Self {
            e_gamma: gamma.exp(),
            log_5040: ExtReal::from_u64(5040, bits).ln(),
            max_g: f64::NEG_INFINITY,
            max_g_index: 0,
            summary: SuiteSummary::new("robin"),
        }
    }

    pub fn feed(&mut self, r: &Record) {
        if !r.log_n.certainly_gt(&self.log_5040) {
            return;
        }
        if r.g.to_f64() > self.max_g {
            self.max_g = r.g.to_f64();
            self.max_g_index = r.index;
        }
        let report = CheckReport::strict_lt(
            "robin.bound",
            format!("index={}", r.index),
            &r.g,
            &self.e_gamma,
        );
        // Only retain per-record detail on failure; tally otherwise.
        self.summary.absorb(report);
    }

    pub fn finish(self) -> SuiteSummary {
        let mut s = self.summary;
        s.worst_margin_id = format!(
            "{} (max G = {:.15} at index {})",
            s.worst_margin_id, self.max_g, self.max_g_index
        );
        s
    }
}

impl Default for RobinCheck {
    fn default() -> Self {
        Self::new()
    }
}

// ---------------------------------------------------------------------------
// Exhaustive oracle
// ---------------------------------------------------------------------------

/// Verify by exhaustive search that each of the first `first_m` generated
/// numbers maximizes sigma(n)/n^(1+eps_i) over all 2 <= n <= limit, with
/// sigma from an independent divisor-summing sieve.
pub fn brute_force_ca_oracle(
    sieve: &PrimeSieve,
    limit: usize,
    first_m: usize,
) -> Result<Vec<CheckReport>> {
    // sigma(n) for all n <= limit, independent of the factored pipeline.
    let mut sigma = vec![0u64; limit + 1];
    for d in 1..=limit {
        let mut m = d;
        while m <= limit {
            sigma[m] += d as u64;
            m += d;
        }
    }
    let mut stream = ParamStream::new(sieve, 100)?;
    let mut state = CAState::initial();
    let mut n_i: u64 = 1;
    let mut out = Vec::new();
    for _ in 0..first_m {
        let step = stream
            .next_step()?
            .ok_or_else(|| Error::InvalidArgument("stream ended before first_m".into()))?;
        for m in &step.members {
            n_i *= m.p;
        }
        apply_step(&mut state, &step)?;
        let eps = step.eps.to_f64();
        if n_i as usize > limit {
            return Err(Error::InvalidArgument(format!(
                "record {} = {n_i} exceeds oracle limit {limit}",
                state.index
            )));
        }
        // Score log(sigma(n)/n) - eps log n; the winner must be n_i.
        let score = |n: usize| (sigma[n] as f64 / n as f64).ln() - eps * (n as f64).ln();
        let mut best = 2usize;
        let mut best_score = score(2);
        for n in 3..=limit {
            let s = score(n);
            if s > best_score {
                best_score = s;
                best = n;
            }
        }
        let own_score = score(n_i as usize);
        // At the critical value the previous CA number ties exactly;
        // accept n_i whenever it attains the maximum within float slack.
        let ok = best == n_i as usize || own_score >= best_score - 1e-9;
        out.push(CheckReport {
            id: "oracle.ca-maximizer".into(),
            inputs: format!("i={} n={} argmax={} eps={:.6e}", state.index, n_i, best, eps),
            lhs: own_score,
            rhs: best_score,
            verdict: if ok { Verdict::Pass } else { Verdict::Fail },
            margin: own_score - best_score,
        });
    }
    Ok(out)
}
