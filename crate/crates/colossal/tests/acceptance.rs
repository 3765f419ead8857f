//! End-to-end acceptance criteria. Each test prints a single PASS/FAIL line
//! (visible with --nocapture; the test name itself encodes the criterion).
//!
//! Criterion 3 contains one check that is expected to fail: the published
//! point value f(2^31/31) = 0.10923475 is not reproducible (the directly
//! computed value is ~0.0776). That test fails honestly rather than hiding
//! the discrepancy; see the README.

use std::path::Path;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use colossal::bounds::{
    brute_force_ca_oracle, check_lemma1, check_lemma2, check_lemma34, check_lemma5,
    check_lemma6_sample, ChainCheck, CheckReport, Lemma7Check, RobinCheck, SuiteSummary,
    Thm1Check, Thm2Check, Thm34Check, Verdict,
};
use colossal::checkpoint::Checkpoint;
use colossal::generator::{generate, recompute_fresh, GenSummary, Generator};
use colossal::primes::{build_sieve, PrimeSieve};

const E_GAMMA: f64 = 1.7810724179901979;

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_colossal")
}

fn report_line(criterion: u32, ok: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} -- {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
}

fn assert_green(criterion: u32, s: &SuiteSummary) {
    report_line(
        criterion,
        s.is_green(),
        &format!(
            "{}: pass={} fail={} vacuous={} worst_margin={:.3e} [{}]",
            s.name, s.pass, s.fail, s.vacuous, s.worst_margin, s.worst_margin_id
        ),
    );
    assert!(
        s.is_green(),
        "suite {} has {} failures; first: {:?}",
        s.name,
        s.fail,
        s.failures.first()
    );
}

/// Peak resident set size of this process in MiB, from /proc.
fn peak_rss_mib() -> f64 {
    let status = std::fs::read_to_string("/proc/self/status").unwrap_or_default();
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: f64 = rest
                .trim()
                .trim_end_matches("kB")
                .trim()
                .parse()
                .unwrap_or(0.0);
            return kb / 1024.0;
        }
    }
    0.0
}

// ---------------------------------------------------------------------------
// Criterion 1: the reference table reproduces exactly, quickly.
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_reference_table() {
    let start = Instant::now();
    let out = Command::new(bin()).arg("table1").output().unwrap();
    let elapsed = start.elapsed().as_secs_f64();
    let stdout = String::from_utf8_lossy(&out.stdout);
    let rows = stdout.lines().filter(|l| !l.contains("MISMATCH")).count();
    let ok = out.status.success() && !stdout.contains("MISMATCH") && elapsed < 1.0;
    report_line(
        1,
        ok,
        &format!(
            "table1 exit={:?} lines={rows} elapsed={elapsed:.3}s (tolerance 1.5e-4, budget 1s)",
            out.status.code()
        ),
    );
    assert!(out.status.success(), "table1 exited nonzero:\n{stdout}");
    assert!(!stdout.contains("MISMATCH"), "table mismatches:\n{stdout}");
    assert!(elapsed < 1.0, "table1 took {elapsed:.3}s, budget 1s");
}

// ---------------------------------------------------------------------------
// Criteria 2 and 7 share one full census run at pmax = 1e8.
// ---------------------------------------------------------------------------

struct CensusResult {
    summary: GenSummary,
    robin: SuiteSummary,
    robin_max_g: f64,
    robin_max_g_index: u64,
    elapsed_s: f64,
}

fn census() -> &'static CensusResult {
    static RESULT: OnceLock<CensusResult> = OnceLock::new();
    RESULT.get_or_init(|| {
        let start = Instant::now();
        let sieve = build_sieve(100_010_000).unwrap();
        let mut robin = RobinCheck::new();
        let summary = generate(&sieve, 100_000_000, |r| {
            robin.feed(r);
            Ok(())
        })
        .unwrap();
        let (robin_max_g, robin_max_g_index) = (robin.max_g, robin.max_g_index);
        CensusResult {
            summary,
            robin: robin.finish(),
            robin_max_g,
            robin_max_g_index,
            elapsed_s: start.elapsed().as_secs_f64(),
        }
    })
}

#[test]
fn criterion_02_census_counts() {
    let c = census();
    let s = &c.summary;
    let rss = peak_rss_mib();
    let counts_ok = s.total == 5_763_320
        && s.ca1 == 120_529
        && s.ca2 == 5_565
        && s.ca3 == 5_637_226;
    let ok = counts_ok && c.elapsed_s < 900.0 && rss < 512.0;
    report_line(
        2,
        ok,
        &format!(
            "pmax=1e8 total={} ca1={} ca2={} ca3={} elapsed={:.1}s peak_rss={rss:.0}MiB \
             (published 5763320/120529/5565/5637226, budget 900s / 512MiB)",
            s.total, s.ca1, s.ca2, s.ca3, c.elapsed_s
        ),
    );
    assert!(c.elapsed_s < 900.0, "census took {:.1}s, budget 900s", c.elapsed_s);
    assert!(rss < 512.0, "peak RSS {rss:.0}MiB exceeds 512MiB");
    // The published counts are asserted as stated. They do not reproduce:
    // this implementation and an independent one (different language, sieve,
    // summation, and comparison strategy) both obtain exactly
    // 5,763,323 = pi(1e8) + 1,868 higher-level steps, classified
    // 120,357 / 5,531 / 5,637,435, with no tie or precision-escalation
    // events (minimum adjacent relative critical-value gap 4.9e-10, far
    // above the 112-bit working precision) and only one record within 1e-4
    // of a class boundary. See the README for the full audit. This
    // assertion fails deliberately to record the discrepancy.
    assert_eq!(
        (s.total, s.ca1, s.ca2, s.ca3),
        (5_763_320, 120_529, 5_565, 5_637_226),
        "published census counts are not reproducible: computed total/ca1/ca2/ca3 = \
         {}/{}/{}/{}, cross-validated by an independent implementation; \
         no tie or precision-escalation events occurred",
        s.total,
        s.ca1,
        s.ca2,
        s.ca3
    );
}

#[test]
fn criterion_07_robin_inequality_sweep() {
    let c = census();
    let ok = c.robin.is_green() && c.robin_max_g < E_GAMMA;
    report_line(
        7,
        ok,
        &format!(
            "robin pass={} fail={} max G={:.15} at index {} (bound e^gamma={E_GAMMA:.15})",
            c.robin.pass, c.robin.fail, c.robin_max_g, c.robin_max_g_index
        ),
    );
    assert!(c.robin.is_green(), "Robin violations: {:?}", c.robin.failures.first());
    assert!(
        c.robin_max_g < E_GAMMA,
        "max G {} not below e^gamma",
        c.robin_max_g
    );
    // The observed maximum approaches e^gamma from below (7.7e-6 away at
    // this scale) but must stay clearly outside accumulated-error noise.
    assert!(E_GAMMA - c.robin_max_g > 1e-6);
}

// ---------------------------------------------------------------------------
// Criterion 3: the auxiliary tail function f.
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_tail_function_table() {
    let reports = check_lemma5();
    let mut summary = SuiteSummary::new("lemma5");
    summary.absorb_all(reports.iter().cloned());
    let point = reports
        .iter()
        .find(|r| r.id == "lemma5.point-value")
        .unwrap();
    report_line(
        3,
        summary.is_green(),
        &format!(
            "table (+-0.01) and monotonicity pass; point value at 2^31/31: \
             computed {:.8} vs published 0.10923475 (+-1e-6) -> {:?}",
            point.lhs, point.verdict
        ),
    );
    // Everything except the published point value must hold.
    for r in reports.iter().filter(|r| r.id != "lemma5.point-value") {
        assert_eq!(r.verdict, Verdict::Pass, "{} [{}] failed", r.id, r.inputs);
    }
    // The published point value is asserted as stated. It does not
    // reproduce: the direct computation gives ~0.0776, and this assertion
    // fails deliberately to record that.
    assert_eq!(
        point.verdict,
        Verdict::Pass,
        "published value f(2^31/31)=0.10923475 is not reproducible; \
         computed {:.10} (difference {:.3e}); all other checks pass",
        point.lhs,
        (point.lhs - point.rhs).abs()
    );
}

// ---------------------------------------------------------------------------
// Criteria 4, 6, 9 (chain part) and 10 (fresh recomputation) share a run
// at pmax = 1e6.
// ---------------------------------------------------------------------------

struct MillionRun {
    thm1: SuiteSummary,
    thm34: SuiteSummary,
    lemma7: SuiteSummary,
    thm1_elapsed_s: f64,
    fresh_rel_err: f64,
    total: u64,
}

fn million_run() -> &'static MillionRun {
    static RESULT: OnceLock<MillionRun> = OnceLock::new();
    RESULT.get_or_init(|| {
        let start = Instant::now();
        let sieve = build_sieve(1_010_000).unwrap();
        let mut thm1 = Thm1Check::new();
        let mut thm34 = Thm34Check::new(&sieve);
        let mut lemma7 = Lemma7Check::new(&sieve, 0);
        let mut generator = Generator::new(&sieve, 1_000_000).unwrap();
        while let Some(r) = generator.next_record().unwrap() {
            thm1.feed(&r);
            thm34.feed(&r).unwrap();
            lemma7.feed(&r).unwrap();
        }
        let elapsed = start.elapsed().as_secs_f64();
        // Recompute the final accumulators from scratch at higher precision
        // and compare against the incrementally maintained values.
        let state = generator.state();
        let (log_n, log_rho) = recompute_fresh(state, &sieve, 160).unwrap();
        let rel = |a: f64, b: f64| ((a - b) / b).abs();
        let fresh_rel_err = rel(state.log_n.to_f64(), log_n.to_f64())
            .max(rel(state.log_rho.to_f64(), log_rho.to_f64()));
        MillionRun {
            thm1: thm1.finish(),
            thm34: thm34.finish(),
            lemma7: lemma7.finish(),
            thm1_elapsed_s: elapsed,
            fresh_rel_err,
            total: generator.summary().total,
        }
    })
}

#[test]
fn criterion_04_theorem1_decrease() {
    let run = million_run();
    let ok = run.thm1.is_green() && run.thm1.pass > 0 && run.thm1_elapsed_s < 120.0;
    report_line(
        4,
        ok,
        &format!(
            "thm1 at pmax=1e6: pass={} fail={} elapsed={:.1}s (budget 120s) worst_margin={:.3e}",
            run.thm1.pass, run.thm1.fail, run.thm1_elapsed_s, run.thm1.worst_margin
        ),
    );
    assert_green(4, &run.thm1);
    assert!(run.thm1.pass > 100, "too few asserted cases: {}", run.thm1.pass);
    assert!(
        run.thm1_elapsed_s < 120.0,
        "run took {:.1}s, budget 120s",
        run.thm1_elapsed_s
    );
}

#[test]
fn criterion_06_theorem3_growth() {
    let run = million_run();
    // Quantitative checks (q >= 23) and directional checks (q >= 3) must all
    // hold; q = 2 steps are vacuous by construction (open case).
    assert_green(6, &run.thm34);
    assert!(run.thm34.pass > 1000, "too few asserted cases: {}", run.thm34.pass);
    assert!(run.thm34.vacuous > 0, "expected vacuous q=2 cases");
}

#[test]
fn criterion_10a_fresh_recomputation() {
    let run = million_run();
    let ok = run.fresh_rel_err < 1e-12;
    report_line(
        10,
        ok,
        &format!(
            "fresh vs incremental accumulators at pmax=1e6 ({} records): \
             max relative error {:.3e} (tolerance 1e-12)",
            run.total, run.fresh_rel_err
        ),
    );
    assert!(
        run.fresh_rel_err < 1e-12,
        "incremental accumulators drifted: {:.3e}",
        run.fresh_rel_err
    );
}

// ---------------------------------------------------------------------------
// Criterion 5: growth across a classification boundary, plus chain
// comparisons, at pmax = 1e5.
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_theorem2_and_chains() {
    let sieve = build_sieve(1_010_000).unwrap();
    let mut thm2 = Thm2Check::new(&sieve);
    let mut chains = ChainCheck::new();
    generate(&sieve, 100_000, |r| {
        thm2.feed(r)?;
        chains.feed(r);
        Ok(())
    })
    .unwrap();
    let thm2 = thm2.finish();
    let chains = chains.finish();
    assert_green(5, &thm2);
    assert_green(5, &chains);
    assert!(thm2.pass > 100, "too few thm2 cases: {}", thm2.pass);
    assert!(chains.pass > 100, "too few chain cases: {}", chains.pass);
}

// ---------------------------------------------------------------------------
// Criterion 8: per-prime sandwich and bracket bounds over a random sample.
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_lemma12_random_primes() {
    let sieve = build_sieve(1_010_000).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(42);
    let mut primes = std::collections::BTreeSet::new();
    while primes.len() < 500 {
        let x = rng.gen_range(2u64..=1_000_000);
        if let Ok(p) = sieve.next_prime(x.saturating_sub(1)) {
            if p <= 1_000_000 {
                primes.insert(p);
            }
        }
    }
    let primes: Vec<u64> = primes.into_iter().collect();
    let reports: Vec<CheckReport> = primes
        .par_iter()
        .map(|&p| {
            let mut out = check_lemma1(p).unwrap();
            out.push(check_lemma2(p).unwrap());
            out.extend(check_lemma34(p).unwrap());
            out
        })
        .flatten()
        .collect();
    let mut summary = SuiteSummary::new("lemma1234");
    summary.absorb_all(reports);
    report_line(
        8,
        summary.is_green(),
        &format!(
            "{} primes in [2, 1e6] (seed 42): pass={} fail={} vacuous={} worst_margin={:.3e}",
            primes.len(),
            summary.pass,
            summary.fail,
            summary.vacuous,
            summary.worst_margin
        ),
    );
    assert!(
        summary.is_green(),
        "failures: {:?}",
        summary.failures.first()
    );
    assert!(summary.pass > 2000);
}

// ---------------------------------------------------------------------------
// Criterion 9: chains against the Chebyshev function, the explicit psi0
// bound above 1e8, and the single-prime growth cap, from a run just past
// 1e8.
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_chebyshev_bounds() {
    // Chain check on every record at pmax = 1e6 (shared run).
    let run = million_run();
    assert_green(9, &run.lemma7);
    assert_eq!(
        run.lemma7.pass, run.total,
        "psi0 chain must cover every record"
    );

    // Extend just past 1e8 so some records have leading prime above it,
    // exercising the large-prime bounds.
    let sieve = build_sieve(100_110_000).unwrap();
    let mut lemma7 = Lemma7Check::new(&sieve, 100_000_000);
    let mut thm34 = Thm34Check::new(&sieve);
    generate(&sieve, 100_100_000, |r| {
        lemma7.feed(r)?;
        thm34.feed(r)?;
        Ok(())
    })
    .unwrap();
    let lemma7 = lemma7.finish();
    let thm34 = thm34.finish();
    let mut lemma6 = SuiteSummary::new("lemma6");
    lemma6.absorb_all(check_lemma6_sample(&sieve, 1.0e8, 1.001e8, 64).unwrap());
    report_line(
        9,
        lemma7.is_green() && thm34.is_green() && lemma6.is_green(),
        &format!(
            "pmax=1.001e8: lemma7 pass={} fail={} worst={:.3e}; thm4/thm3 pass={} fail={}; \
             lemma6 64-point sample pass={} fail={}",
            lemma7.pass,
            lemma7.fail,
            lemma7.worst_margin,
            thm34.pass,
            thm34.fail,
            lemma6.pass,
            lemma6.fail
        ),
    );
    assert_green(9, &lemma7);
    assert!(lemma7.pass > 1000, "too few large-prime records: {}", lemma7.pass);
    assert_green(9, &thm34);
    assert_green(9, &lemma6);
    assert!(lemma6.pass >= 60, "sample mostly vacuous: {}", lemma6.pass);
}

// ---------------------------------------------------------------------------
// Criterion 10 (remaining parts): exhaustive small-range oracle and
// checkpoint byte-exactness.
// ---------------------------------------------------------------------------

#[test]
fn criterion_10b_brute_force_oracle() {
    let sieve = build_sieve(1_010_000).unwrap();
    let reports = brute_force_ca_oracle(&sieve, 1_000_000, 10).unwrap();
    let mut summary = SuiteSummary::new("oracle");
    summary.absorb_all(reports);
    report_line(
        10,
        summary.is_green() && summary.pass == 10,
        &format!(
            "first 10 records each maximize sigma(n)/n^(1+eps) over n <= 1e6: pass={} fail={}",
            summary.pass, summary.fail
        ),
    );
    assert!(summary.is_green(), "{:?}", summary.failures.first());
    assert_eq!(summary.pass, 10);
}

#[test]
fn criterion_10c_checkpoint_byte_exact() {
    let sieve = build_sieve(20_000).unwrap();
    let pmax = 2_000u64;
    let dir = tempfile::tempdir().unwrap();

    let checkpoint_at = |stop: u64, path: &Path, from: Option<&Path>| {
        let mut generator = match from {
            Some(p) => Checkpoint::load(p).unwrap().resume(&sieve).unwrap(),
            None => Generator::new(&sieve, pmax).unwrap(),
        };
        while generator.state().index < stop {
            generator.next_record().unwrap().unwrap();
        }
        Checkpoint::capture(&generator, pmax).save(path).unwrap();
    };

    // Uninterrupted run to step 150 vs resume-at-75 run to step 150: the
    // serialized checkpoints must be byte-identical.
    let direct = dir.path().join("direct.ckpt");
    let early = dir.path().join("early.ckpt");
    let resumed = dir.path().join("resumed.ckpt");
    checkpoint_at(150, &direct, None);
    checkpoint_at(75, &early, None);
    checkpoint_at(150, &resumed, Some(&early));
    let a = std::fs::read(&direct).unwrap();
    let b = std::fs::read(&resumed).unwrap();
    let ok = a == b;
    report_line(
        10,
        ok,
        &format!(
            "checkpoint at step 150 of pmax=2000: direct {} bytes, via resume-at-75 {} bytes, identical={}",
            a.len(),
            b.len(),
            ok
        ),
    );
    assert_eq!(a, b, "resumed checkpoint differs from direct checkpoint");
}

// ---------------------------------------------------------------------------
// Sanity: the sieve used throughout agrees with an independent primality
// test on a spot sample (guards the shared infrastructure above).
// ---------------------------------------------------------------------------

#[test]
fn sieve_spot_check() {
    let sieve: PrimeSieve = build_sieve(1_010_000).unwrap();
    for (x, expect) in [
        (2u64, true),
        (999_983, true),
        (1_000_003, true),
        (999_999, false),
    ] {
        assert_eq!(sieve.is_prime(x), expect, "primality of {x}");
    }
    assert_eq!(sieve.next_prime(1_000_000).unwrap(), 1_000_003);
}
