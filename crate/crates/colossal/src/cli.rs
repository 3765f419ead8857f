//! Command-line front end: generation runs, verification suites, reference
//! table reproduction, and checkpoint/resume.
//!
//! Exit codes: 0 success, 1 verification failure, 2 I/O or usage error,
//! 3 internal invariant violation.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write as IoWrite};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::bounds::{
    brute_force_ca_oracle, check_lemma1, check_lemma2, check_lemma34, check_lemma5,
    check_lemma6_sample, ChainCheck, CheckReport, Lemma7Check, RobinCheck, SuiteSummary,
    Thm1Check, Thm2Check, Thm34Check,
};
use crate::checkpoint::Checkpoint;
use crate::generator::{generate, GenSummary, Generator, Record};
use crate::primes::{build_sieve, PrimeSieve};
use crate::{Error, Result};

const EXIT_OK: i32 = 0;
const EXIT_VERIFY_FAIL: i32 = 1;
const EXIT_USAGE_IO: i32 = 2;
const EXIT_INTERNAL: i32 = 3;

#[derive(Parser)]
#[command(
    name = "colossal",
    version,
    about = "Enumerate, classify, and verify colossally abundant numbers"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RowFormat {
    Csv,
    Jsonl,
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate CA numbers with largest prime factor up to pmax.
    Generate {
        /// Largest level-1 prime to include (>= 2).
        #[arg(long)]
        pmax: u64,
        /// Write records here; without it, records go to standard output.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: RowFormat,
        /// Periodically save a resumable checkpoint to this path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Steps between checkpoint saves.
        #[arg(long, default_value_t = 1_000_000)]
        checkpoint_every: u64,
    },
    /// Run verification suites over generated records and sampled inputs.
    Verify {
        /// Record-driven suites generate up to this pmax.
        #[arg(long, default_value_t = 100_000)]
        pmax: u64,
        /// Comma-separated subset of: lemma1,lemma2,lemma34,lemma5,lemma67,
        /// thm1,thm2,thm34,chains,robin,oracle. Default: all.
        #[arg(long)]
        suite: Option<String>,
        /// Write the JSON report here instead of standard output.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Worker threads for sample-based suites.
        #[arg(long)]
        threads: Option<usize>,
        /// RNG seed for sampled primes.
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// Print the 26-row reference table and diff against expected values.
    Table1,
    /// Continue generation from a checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        /// New target pmax; defaults to the checkpoint's pmax.
        #[arg(long)]
        pmax: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: RowFormat,
    },
}

/// Map an error to the exit-code contract.
fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Io(_) | Error::Checkpoint(_) | Error::InvalidArgument(_) => EXIT_USAGE_IO,
        Error::SieveExhausted { .. }
        | Error::NoSolution(_)
        | Error::UnresolvedClass { .. }
        | Error::StreamOrderViolation(_)
        | Error::AmbiguousBoundary(_)
        | Error::UnresolvedTie { .. }
        | Error::Drift { .. } => EXIT_INTERNAL,
    }
}

pub fn run() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate {
            pmax,
            out,
            format,
            checkpoint,
            checkpoint_every,
        } => cmd_generate(pmax, out.as_deref(), format, checkpoint.as_deref(), checkpoint_every),
        Command::Verify {
            pmax,
            suite,
            report,
            threads,
            seed,
        } => cmd_verify(pmax, suite.as_deref(), report.as_deref(), threads, seed),
        Command::Table1 => cmd_table1(),
        Command::Resume {
            checkpoint,
            pmax,
            out,
            format,
        } => cmd_resume(&checkpoint, pmax, out.as_deref(), format),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code_for(&e)
        }
    }
}

/// 17 significant digits: lossless round-trip for f64.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn step_string(step: &[(u64, u32)]) -> String {
    step.iter()
        .map(|&(p, k)| format!("{p}^{k}"))
        .collect::<Vec<_>>()
        .join(";")
}

fn write_row(w: &mut dyn IoWrite, format: RowFormat, r: &Record) -> Result<()> {
    match format {
        RowFormat::Csv => writeln!(
            w,
            "{},{},{},{},{},{}",
            r.index,
            step_string(&r.step),
            r.p,
            fmt17(r.log_n.to_f64()),
            fmt17(r.g.to_f64()),
            r.class
        )?,
        RowFormat::Jsonl => {
            let line = serde_json::json!({
                "index": r.index,
                "step": step_string(&r.step),
                "P": r.p,
                "log_n": fmt17(r.log_n.to_f64()),
                "G": fmt17(r.g.to_f64()),
                "class": r.class.as_str(),
            });
            writeln!(w, "{line}")?;
        }
    }
    Ok(())
}

fn write_header(w: &mut dyn IoWrite, format: RowFormat) -> Result<()> {
    if format == RowFormat::Csv {
        writeln!(w, "index,step,P,log_n,G,class")?;
    }
    Ok(())
}

fn summary_json(s: &GenSummary, elapsed: f64) -> serde_json::Value {
    serde_json::json!({
        "pmax": s.pmax,
        "total": s.total,
        "ca1": s.ca1,
        "ca2": s.ca2,
        "ca3": s.ca3,
        "max_G": s.max_g,
        "max_G_index": s.max_g_index,
        "elapsed_seconds": elapsed,
    })
}

/// Sieve limit with headroom for next_prime past pmax and the psi0 queries.
fn sieve_limit_for(pmax: u64) -> u64 {
    (pmax + 10_000).max(20_000)
}

fn cmd_generate(
    pmax: u64,
    out: Option<&Path>,
    format: RowFormat,
    checkpoint: Option<&Path>,
    checkpoint_every: u64,
) -> Result<i32> {
    if pmax < 2 {
        return Err(Error::InvalidArgument(format!("--pmax {pmax} must be >= 2")));
    }
    let sieve = build_sieve(sieve_limit_for(pmax))?;
    let mut generator = Generator::new(&sieve, pmax)?;
    let started = Instant::now();
    let stdout = std::io::stdout();
    let mut writer: Box<dyn IoWrite> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(stdout.lock())),
    };
    write_header(&mut *writer, format)?;
    while let Some(record) = generator.next_record()? {
        write_row(&mut *writer, format, &record)?;
        if let Some(path) = checkpoint {
            if record.index % checkpoint_every.max(1) == 0 {
                Checkpoint::capture(&generator, pmax).save(path)?;
            }
        }
    }
    writer.flush()?;
    drop(writer);
    if let Some(path) = checkpoint {
        Checkpoint::capture(&generator, pmax).save(path)?;
    }
    let summary = summary_json(&generator.summary(), started.elapsed().as_secs_f64());
    if out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(EXIT_OK)
}

fn cmd_resume(
    checkpoint: &Path,
    pmax: Option<u64>,
    out: Option<&Path>,
    format: RowFormat,
) -> Result<i32> {
    let cp = Checkpoint::load(checkpoint)?;
    let pmax = pmax.unwrap_or(cp.pmax);
    if pmax < cp.pmax {
        return Err(Error::InvalidArgument(format!(
            "--pmax {pmax} is below the checkpoint's pmax {}",
            cp.pmax
        )));
    }
    let sieve = build_sieve(sieve_limit_for(pmax))?;
    let mut cp = cp;
    cp.pmax = pmax;
    let mut generator = cp.resume(&sieve)?;
    let started = Instant::now();
    let stdout = std::io::stdout();
    let mut writer: Box<dyn IoWrite> = match out {
        Some(path) => Box::new(BufWriter::new(File::create(path)?)),
        None => Box::new(BufWriter::new(stdout.lock())),
    };
    // No header: resumed output is meant to concatenate onto the original
    // run's file.
    while let Some(record) = generator.next_record()? {
        write_row(&mut *writer, format, &record)?;
    }
    writer.flush()?;
    drop(writer);
    let summary = summary_json(&generator.summary(), started.elapsed().as_secs_f64());
    if out.is_some() {
        println!("{summary}");
    } else {
        eprintln!("{summary}");
    }
    Ok(EXIT_OK)
}

const SUITE_NAMES: &[&str] = &[
    "lemma1", "lemma2", "lemma34", "lemma5", "lemma67", "thm1", "thm2", "thm34", "chains",
    "robin", "oracle",
];

/// Number of sampled primes for the lemma 1/2/3/4 suites.
const SAMPLE_PRIMES: usize = 500;
const SAMPLE_PRIME_MAX: u64 = 1_000_000;

fn sample_primes(sieve: &PrimeSieve, seed: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut set = BTreeSet::new();
    while set.len() < count {
        let candidate = rng.gen_range(2..=SAMPLE_PRIME_MAX);
        if sieve.is_prime(candidate) {
            set.insert(candidate);
        }
    }
    set.into_iter().collect()
}

fn run_sample_suite(
    name: &str,
    primes: &[u64],
    check: impl Fn(u64) -> Result<Vec<CheckReport>> + Sync,
) -> Result<SuiteSummary> {
    let per_prime: Vec<Result<Vec<CheckReport>>> =
        primes.par_iter().map(|&p| check(p)).collect();
    let mut summary = SuiteSummary::new(name);
    for reports in per_prime {
        summary.absorb_all(reports?);
    }
    Ok(summary)
}

fn cmd_verify(
    pmax: u64,
    suite: Option<&str>,
    report: Option<&Path>,
    threads: Option<usize>,
    seed: u64,
) -> Result<i32> {
    let suites: Vec<String> = match suite {
        None => SUITE_NAMES.iter().map(|s| s.to_string()).collect(),
        Some(list) => {
            let parsed: Vec<String> = list
                .split(',')
                .map(|s| s.trim().to_ascii_lowercase())
                .filter(|s| !s.is_empty())
                .collect();
            for s in &parsed {
                if !SUITE_NAMES.contains(&s.as_str()) {
                    return Err(Error::InvalidArgument(format!(
                        "unknown suite {s:?}; valid: {}",
                        SUITE_NAMES.join(",")
                    )));
                }
            }
            if parsed.is_empty() {
                return Err(Error::InvalidArgument("empty --suite list".into()));
            }
            parsed
        }
    };
    if let Some(n) = threads {
        // Ignore the error if a pool was already installed in-process.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let wants = |name: &str| suites.iter().any(|s| s == name);

    let needs_records =
        ["thm1", "thm2", "thm34", "chains", "robin", "lemma67"].iter().any(|s| wants(s));
    let needs_sample_primes = ["lemma1", "lemma2", "lemma34"].iter().any(|s| wants(s));
    let mut sieve_limit = sieve_limit_for(if needs_records { pmax } else { 2 });
    if needs_sample_primes || wants("oracle") {
        sieve_limit = sieve_limit.max(SAMPLE_PRIME_MAX + 10_000);
    }
    let sieve = build_sieve(sieve_limit)?;

    let mut summaries: Vec<SuiteSummary> = Vec::new();

    if needs_sample_primes {
        let primes = sample_primes(&sieve, seed, SAMPLE_PRIMES);
        if wants("lemma1") {
            summaries.push(run_sample_suite("lemma1", &primes, check_lemma1)?);
        }
        if wants("lemma2") {
            summaries.push(run_sample_suite("lemma2", &primes, |p| {
                check_lemma2(p).map(|r| vec![r])
            })?);
        }
        if wants("lemma34") {
            summaries.push(run_sample_suite("lemma34", &primes, check_lemma34)?);
        }
    }

    if wants("lemma5") {
        let mut s = SuiteSummary::new("lemma5");
        s.absorb_all(check_lemma5());
        summaries.push(s);
    }

    if wants("oracle") {
        let mut s = SuiteSummary::new("oracle");
        s.absorb_all(brute_force_ca_oracle(&sieve, 1_000_000, 10)?);
        summaries.push(s);
    }

    if needs_records {
        let mut thm1 = wants("thm1").then(Thm1Check::new);
        let mut thm2 = wants("thm2").then(|| Thm2Check::new(&sieve));
        let mut thm34 = wants("thm34").then(|| Thm34Check::new(&sieve));
        let mut chains = wants("chains").then(ChainCheck::new);
        let mut robin = wants("robin").then(RobinCheck::new);
        let mut lemma7 = wants("lemma67").then(|| {
            // Checking the psi0 chain on every record is affordable only
            // for moderate runs; census-scale runs restrict it to the
            // records with P past 1e8.
            let min_p = if pmax > 2_000_000 { 100_000_000 } else { 0 };
            Lemma7Check::new(&sieve, min_p)
        });
        generate(&sieve, pmax, |r| {
            if let Some(c) = thm1.as_mut() {
                c.feed(r);
            }
            if let Some(c) = thm2.as_mut() {
                c.feed(r)?;
            }
            if let Some(c) = thm34.as_mut() {
                c.feed(r)?;
            }
            if let Some(c) = chains.as_mut() {
                c.feed(r);
            }
            if let Some(c) = robin.as_mut() {
                c.feed(r);
            }
            if let Some(c) = lemma7.as_mut() {
                c.feed(r)?;
            }
            Ok(())
        })?;
        if let Some(c) = thm1 {
            summaries.push(c.finish());
        }
        if let Some(c) = thm2 {
            summaries.push(c.finish());
        }
        if let Some(c) = thm34 {
            summaries.push(c.finish());
        }
        if let Some(c) = chains {
            summaries.push(c.finish());
        }
        if let Some(c) = robin {
            summaries.push(c.finish());
        }
        if let Some(c) = lemma7 {
            let mut s = c.finish();
            // The psi0 upper bound on a sample past 1e8, when the sieve
            // reaches that far.
            if sieve.limit() >= 100_100_000 {
                s.absorb_all(check_lemma6_sample(
                    &sieve,
                    1.0e8,
                    (sieve.limit().min(100_100_000)) as f64,
                    64,
                )?);
            }
            summaries.push(s);
        }
    }

    let failed: u64 = summaries.iter().map(|s| s.fail).sum();
    let report_json = serde_json::json!({
        "pmax": pmax,
        "seed": seed,
        "suites": summaries,
        "total_fail": failed,
    });
    let text = serde_json::to_string_pretty(&report_json)
        .map_err(|e| Error::InvalidArgument(format!("report serialization: {e}")))?;
    match report {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    for s in &summaries {
        eprintln!(
            "suite {:<8} pass {:>8} fail {:>4} vacuous {:>4} worst margin {:+.3e} at {}",
            s.name, s.pass, s.fail, s.vacuous, s.worst_margin, s.worst_margin_id
        );
    }
    Ok(if failed == 0 { EXIT_OK } else { EXIT_VERIFY_FAIL })
}

/// Expected first-26 reference rows: (log n 4dp, P, CA1?, CA2?, G 4dp).
const TABLE1: [(f64, u64, bool, bool, f64); 26] = [
    (0.6931, 2, true, false, -4.0926),
    (1.7918, 3, true, false, 3.4294),
    (2.4849, 3, true, false, 2.5634),
    (4.0943, 5, true, false, 1.9864),
    (4.7875, 5, true, false, 1.9157),
    (5.8861, 5, false, true, 1.8335),
    (7.8320, 7, false, true, 1.8046),
    (8.5252, 7, false, true, 1.7910),
    (10.9231, 11, true, false, 1.7512),
    (13.4880, 13, false, true, 1.7331),
    (14.1812, 13, false, true, 1.7277),
    (15.2798, 13, false, true, 1.7235),
    (16.8892, 13, false, true, 1.7179),
    (19.7224, 17, false, false, 1.7243),
    (22.6669, 19, false, true, 1.7342),
    (25.8023, 23, false, true, 1.7374),
    (26.4955, 23, false, true, 1.7371),
    (29.8628, 29, false, true, 1.7337),
    (33.2968, 31, false, true, 1.7340),
    (35.2427, 31, false, true, 1.7369),
    (36.3413, 31, false, true, 1.7364),
    (39.9522, 37, false, true, 1.7375),
    (43.6658, 41, false, false, 1.7380),
    (47.4270, 43, false, false, 1.7403),
    (48.1201, 43, false, false, 1.7406),
    (51.9703, 47, false, true, 1.7430),
];

const TABLE1_TOL: f64 = 1.5e-4;

fn cmd_table1() -> Result<i32> {
    let sieve = build_sieve(20_000)?;
    let mut rows = Vec::new();
    generate(&sieve, 47, |r| {
        rows.push(r.clone());
        Ok(())
    })?;
    println!("index   log n        P  CA1?  CA2?       G");
    let mut mismatches = 0u32;
    for (i, expected) in TABLE1.iter().enumerate() {
        let idx = i + 1;
        let &(e_logn, e_p, e_ca1, e_ca2, e_g) = expected;
        let Some(r) = rows.get(i) else {
            println!("{idx:>5}  <missing row>");
            mismatches += 1;
            continue;
        };
        let ca1 = r.class.as_str() == "CA1";
        let ca2 = r.class.as_str() == "CA2";
        let log_n = r.log_n.to_f64();
        let g = r.g.to_f64();
        let ok = r.p == e_p
            && ca1 == e_ca1
            && ca2 == e_ca2
            && (log_n - e_logn).abs() <= TABLE1_TOL
            && (g - e_g).abs() <= TABLE1_TOL;
        println!(
            "{idx:>5}  {log_n:>9.4}  {:>5}  {:>4}  {:>4}  {g:>8.4}{}",
            r.p,
            if ca1 { "Y" } else { "N" },
            if ca2 { "Y" } else { "N" },
            if ok {
                String::new()
            } else {
                format!(
                    "   MISMATCH expected ({e_logn:.4}, {e_p}, {}, {}, {e_g:.4})",
                    if e_ca1 { "Y" } else { "N" },
                    if e_ca2 { "Y" } else { "N" }
                )
            }
        );
        if !ok {
            mismatches += 1;
        }
    }
    if rows.len() != TABLE1.len() {
        println!(
            "row count mismatch: got {}, expected {}",
            rows.len(),
            TABLE1.len()
        );
        mismatches += 1;
    }
    Ok(if mismatches == 0 { EXIT_OK } else { EXIT_VERIFY_FAIL })
}
