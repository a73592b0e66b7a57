//! Estimate reports and artifact output (CSV, JSON manifest, config hash).

use crate::{Error, Result};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// One tested ratio sample at a parameter/coordinate point.
#[derive(Debug, Clone, Serialize)]
pub struct RatioSample {
    /// Coordinates of the sample (meaning depends on the inequality).
    pub coords: Vec<f64>,
    pub ratio: f64,
}

/// Named-inequality verification report: ratio samples, supremum, and the
/// refinement-stability flag that operationalizes "finite constant".
#[derive(Debug, Clone, Serialize)]
pub struct EstimateReport {
    pub id: String,
    pub params: BTreeMap<String, f64>,
    pub samples: Vec<RatioSample>,
    pub supremum: f64,
    pub refined_supremum: f64,
    /// Relative change of the supremum under sweep refinement.
    pub drift: f64,
    /// Declared stability threshold the drift is compared against.
    pub threshold: f64,
    pub pass: bool,
}

impl EstimateReport {
    pub fn from_sweeps(
        id: &str,
        params: BTreeMap<String, f64>,
        samples: Vec<RatioSample>,
        refined: Vec<RatioSample>,
        threshold: f64,
    ) -> Self {
        let sup = samples.iter().map(|s| s.ratio).fold(0.0f64, f64::max);
        let sup_ref = refined.iter().map(|s| s.ratio).fold(0.0f64, f64::max);
        let drift = (sup_ref - sup).abs() / sup.max(1.0e-300);
        let pass = sup.is_finite() && sup_ref.is_finite() && drift <= threshold;
        EstimateReport {
            id: id.to_string(),
            params,
            samples,
            supremum: sup,
            refined_supremum: sup_ref,
            drift,
            threshold,
            pass,
        }
    }

    pub fn one_line(&self) -> String {
        format!(
            "{:<34} sup {:>12.5e}  refined {:>12.5e}  drift {:>7.3}%  {}",
            self.id,
            self.supremum,
            self.refined_supremum,
            self.drift * 100.0,
            if self.pass { "PASS" } else { "FAIL" }
        )
    }

    /// CSV of the ratio samples (one coordinate column set plus the ratio).
    pub fn write_samples_csv(&self, path: &Path, coord_names: &[&str]) -> Result<()> {
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(self.samples.len());
        for s in &self.samples {
            let mut row = s.coords.clone();
            row.push(s.ratio);
            rows.push(row);
        }
        let mut header: Vec<String> = coord_names.iter().map(|s| s.to_string()).collect();
        header.push("ratio".into());
        write_csv(path, &header, &rows)
    }
}

/// FNV-1a hash of the normalized config text; embedded in every artifact.
pub fn config_hash(text: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in text.as_bytes() {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Writes a CSV with float columns using shortest-round-trip formatting,
/// so re-running the same config reproduces the file bitwise.
pub fn write_csv(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", line.join(","))?;
    }
    Ok(())
}

/// Top-level JSON manifest wrapping a run's reports.
#[derive(Debug, Serialize)]
pub struct Manifest<T: Serialize> {
    pub schema_version: u32,
    pub tool_version: String,
    pub config_hash: String,
    pub seed: u64,
    pub suite: String,
    pub pass: bool,
    pub body: T,
}

impl<T: Serialize> Manifest<T> {
    pub fn new(config_hash_val: u64, seed: u64, suite: &str, pass: bool, body: T) -> Self {
        Manifest {
            schema_version: 1,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_hash: format!("{config_hash_val:016x}"),
            seed,
            suite: suite.to_string(),
            pass,
            body,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            std::fs::create_dir_all(dir)?;
        }
        let file = std::fs::File::create(path)?;
        serde_json::to_writer_pretty(std::io::BufWriter::new(file), self)
            .map_err(|e| Error::Config(format!("manifest serialization: {e}")))?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn supremum_dominates_samples() {
        let samples = vec![
            RatioSample { coords: vec![0.1], ratio: 0.5 },
            RatioSample { coords: vec![0.2], ratio: 2.5 },
        ];
        let refined = vec![RatioSample { coords: vec![0.15], ratio: 2.6 }];
        let r = EstimateReport::from_sweeps("demo", BTreeMap::new(), samples, refined, 0.10);
        assert_eq!(r.supremum, 2.5);
        assert!(r.samples.iter().all(|s| s.ratio <= r.supremum));
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn hash_is_stable_and_text_sensitive() {
        let a = config_hash("alpha = 0.5\n");
        assert_eq!(a, config_hash("alpha = 0.5\n"));
        assert_ne!(a, config_hash("alpha = 0.6\n"));
    }
}
