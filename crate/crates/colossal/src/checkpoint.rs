//! Checkpointing for long generation runs.
//!
//! A checkpoint captures everything needed to resume a run bit-exactly: the
//! exponent boundaries (from which the critical-value frontier is rebuilt),
//! the accumulators as full-precision decimal strings with their error
//! radii, the class counts, and the running maximum of G. The format is
//! versioned JSON.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::extreal::{working_bits, ExtReal};
use crate::generator::{CAState, Generator};
use crate::primes::PrimeSieve;
use crate::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// A full-precision value serialized as decimal strings: midpoint, error
/// radius, and a compensation term (always "0" in this format version,
/// reserved for accumulator schemes that carry one).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedReal {
    pub value: String,
    pub radius: String,
    pub compensation: String,
}

impl SavedReal {
    fn save(x: &ExtReal) -> Self {
        Self {
            value: x.to_decimal_string(),
            radius: format!("{:e}", x.radius()),
            compensation: "0".into(),
        }
    }

    fn load(&self, what: &str) -> Result<ExtReal> {
        let radius: f64 = self
            .radius
            .parse()
            .map_err(|_| Error::Checkpoint(format!("unparseable {what} radius: {:?}", self.radius)))?;
        if self.compensation != "0" {
            return Err(Error::Checkpoint(format!(
                "nonzero {what} compensation {:?} unsupported in format {FORMAT_VERSION}",
                self.compensation
            )));
        }
        ExtReal::from_decimal_string(&self.value, working_bits(), radius)
            .ok_or_else(|| Error::Checkpoint(format!("unparseable {what}: {:?}", self.value)))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub pmax: u64,
    pub step_index: u64,
    /// (k, pi_k) pairs: pi_k is the largest prime with exponent >= k.
    pub boundaries: Vec<(u32, u64)>,
    pub log_n: SavedReal,
    pub log_rho: SavedReal,
    /// [CA1, CA2, CA3] counts so far.
    pub class_counts: [u64; 3],
    /// None until some record certainly exceeds the 5040 threshold
    /// (JSON has no representation for -infinity).
    pub max_g: Option<f64>,
    pub max_g_index: u64,
}

impl Checkpoint {
    pub fn capture(generator: &Generator<'_>, pmax: u64) -> Self {
        let state = generator.state();
        let (max_g, max_g_index) = generator.max_g();
        Self {
            format_version: FORMAT_VERSION,
            pmax,
            step_index: state.index,
            boundaries: state
                .boundaries
                .iter()
                .enumerate()
                .map(|(i, &p)| (i as u32 + 1, p))
                .collect(),
            log_n: SavedReal::save(&state.log_n),
            log_rho: SavedReal::save(&state.log_rho),
            class_counts: generator.counts(),
            max_g: max_g.is_finite().then_some(max_g),
            max_g_index,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        // Write-then-rename so an interrupted save never clobbers the
        // previous checkpoint.
        let tmp = path.with_extension("tmp");
        fs::write(&tmp, json)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cp: Checkpoint = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("parse {}: {e}", path.display())))?;
        if cp.format_version != FORMAT_VERSION {
            return Err(Error::Checkpoint(format!(
                "unsupported format version {} (expected {FORMAT_VERSION})",
                cp.format_version
            )));
        }
        let levels_sequential = cp
            .boundaries
            .iter()
            .enumerate()
            .all(|(i, &(k, _))| k == i as u32 + 1);
        let primes_non_increasing = cp.boundaries.windows(2).all(|w| w[0].1 >= w[1].1);
        if !levels_sequential || !primes_non_increasing {
            return Err(Error::Checkpoint(format!(
                "malformed boundaries: {:?}",
                cp.boundaries
            )));
        }
        Ok(cp)
    }

    /// Rebuild a generator positioned exactly after `step_index` steps.
    pub fn resume<'a>(&self, sieve: &'a PrimeSieve) -> Result<Generator<'a>> {
        let state = CAState {
            index: self.step_index,
            boundaries: self.boundaries.iter().map(|&(_, p)| p).collect(),
            log_n: self.log_n.load("log_n")?,
            log_rho: self.log_rho.load("log_rho")?,
        };
        Generator::from_state(
            sieve,
            self.pmax,
            state,
            self.class_counts,
            self.max_g.unwrap_or(f64::NEG_INFINITY),
            self.max_g_index,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generator::Record;
    use crate::primes::build_sieve;

    fn run_through(pmax: u64, split_at: u64) -> (Vec<Record>, Vec<Record>) {
        let sieve = build_sieve(20_000).unwrap();
        // Uninterrupted reference run.
        let mut full = Vec::new();
        let mut generator = Generator::new(&sieve, pmax).unwrap();
        while let Some(r) = generator.next_record().unwrap() {
            full.push(r);
        }
        // Run to split_at, checkpoint through a file, resume, finish.
        let mut generator = Generator::new(&sieve, pmax).unwrap();
        let mut resumed = Vec::new();
        for _ in 0..split_at {
            resumed.push(generator.next_record().unwrap().unwrap());
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        Checkpoint::capture(&generator, pmax).save(&path).unwrap();
        let cp = Checkpoint::load(&path).unwrap();
        let mut generator = cp.resume(&sieve).unwrap();
        while let Some(r) = generator.next_record().unwrap() {
            resumed.push(r);
        }
        (full, resumed)
    }

    #[test]
    fn resume_reproduces_uninterrupted_run_exactly() {
        for split in [1u64, 9, 14, 25] {
            let (full, resumed) = run_through(47, split);
            assert_eq!(full.len(), resumed.len());
            for (a, b) in full.iter().zip(&resumed) {
                assert_eq!(a.index, b.index);
                assert_eq!(a.step, b.step);
                assert_eq!(a.class, b.class);
                // Accumulators round-trip through decimal strings exactly.
                assert_eq!(a.log_n.value(), b.log_n.value());
                assert_eq!(a.g.value(), b.g.value());
            }
        }
    }

    #[test]
    fn resume_preserves_counts_and_max_g() {
        let sieve = build_sieve(20_000).unwrap();
        let mut reference = Generator::new(&sieve, 100).unwrap();
        while reference.next_record().unwrap().is_some() {}
        let mut generator = Generator::new(&sieve, 100).unwrap();
        for _ in 0..20 {
            generator.next_record().unwrap().unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.ckpt");
        Checkpoint::capture(&generator, 100).save(&path).unwrap();
        let mut resumed = Checkpoint::load(&path).unwrap().resume(&sieve).unwrap();
        while resumed.next_record().unwrap().is_some() {}
        assert_eq!(resumed.counts(), reference.counts());
        assert_eq!(resumed.max_g(), reference.max_g());
        assert_eq!(resumed.summary().total, reference.summary().total);
    }

    #[test]
    fn load_rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.ckpt");
        std::fs::write(&path, "{ truncated").unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
        std::fs::write(
            &path,
            serde_json::json!({
                "format_version": 99, "pmax": 10, "step_index": 0,
                "boundaries": [],
                "log_n": {"value": "0", "radius": "0", "compensation": "0"},
                "log_rho": {"value": "0", "radius": "0", "compensation": "0"},
                "class_counts": [0, 0, 0], "max_g": 0.0, "max_g_index": 0
            })
            .to_string(),
        )
        .unwrap();
        assert!(matches!(Checkpoint::load(&path), Err(Error::Checkpoint(_))));
        assert!(Checkpoint::load(&dir.path().join("missing.ckpt")).is_err());
    }
}
