//! Declarative experiment configuration: flat-section key-value text,
//! normalization with explicit defaults, and a stable hash embedded in every
//! artifact.

use crate::bernstein::{catalog, BernsteinSpec};
use crate::kernel::FracParams;
use crate::report::config_hash;
use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt::Write as _;

/// Declared stability/accuracy thresholds.  These live in the config (not in
/// library code) so a user can tighten or relax a harness run.
#[derive(Debug, Clone, PartialEq)]
pub struct Tolerances {
    /// Max relative drift of a supremum under sweep refinement.
    pub drift: f64,
    /// Relative tolerance of the kernel mass identity.
    pub mass_rel: f64,
    /// Relative tolerance of the Fourier-vs-subordination route agreement.
    pub route_rel: f64,
    /// Max relative change of truncated-noise second moments at K -> 2K.
    pub truncation_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { drift: 0.10, mass_rel: 1.0e-4, route_rel: 1.0e-3, truncation_rel: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub out_dir: String,
    pub seed: u64,
    pub threads: usize,
    pub bernstein_name: String,
    pub bernstein_params: BTreeMap<String, f64>,
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub dim: usize,
    /// `0` means "choose automatically from the kernel scales".
    pub box_length: f64,
    pub points_per_axis: usize,
    pub t_end: f64,
    pub n_steps: usize,
    pub modes: usize,
    pub n_samples: usize,
    pub tol: Tolerances,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let mut bp = BTreeMap::new();
        bp.insert("beta".to_string(), 0.5);
        ExperimentConfig {
            out_dir: "out".into(),
            seed: 1,
            threads: 0,
            bernstein_name: "stable".into(),
            bernstein_params: bp,
            alpha: 0.8,
            beta: 0.7,
            gamma: 0.0,
            kappa: 0.05,
            dim: 1,
            box_length: 0.0,
            points_per_axis: 256,
            t_end: 1.0,
            n_steps: 128,
            modes: 4,
            n_samples: 1000,
            tol: Tolerances::default(),
        }
    }
}

impl ExperimentConfig {
    /// Parses the flat `[section]` / `key = value` format.  Unknown sections
    /// or keys and malformed values are reported by name.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = ExperimentConfig::default();
        let mut bernstein_params_set = false;
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with('[') && line.ends_with(']') {
                section = line[1..line.len() - 1].trim().to_string();
                match section.as_str() {
                    "experiment" | "bernstein" | "params" | "grid" | "noise" | "tolerances" => {}
                    other => {
                        return Err(Error::Config(format!(
                            "line {}: unknown section [{other}]",
                            lineno + 1
                        )))
                    }
                }
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`, got `{line}`", lineno + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            let fnum = || -> Result<f64> {
                value.parse::<f64>().map_err(|_| {
                    Error::Config(format!(
                        "line {}: [{section}] {key}: `{value}` is not a number",
                        lineno + 1
                    ))
                })
            };
            let unum = || -> Result<u64> {
                value.parse::<u64>().map_err(|_| {
                    Error::Config(format!(
                        "line {}: [{section}] {key}: `{value}` is not a non-negative integer",
                        lineno + 1
                    ))
                })
            };
            match (section.as_str(), key) {
                ("experiment", "out_dir") => cfg.out_dir = value.to_string(),
                ("experiment", "seed") => cfg.seed = unum()?,
                ("experiment", "threads") => cfg.threads = unum()? as usize,
                ("bernstein", "name") => cfg.bernstein_name = value.to_string(),
                ("bernstein", k) => {
                    if !bernstein_params_set {
                        cfg.bernstein_params.clear();
                        bernstein_params_set = true;
                    }
                    cfg.bernstein_params.insert(k.to_string(), fnum()?);
                }
                ("params", "alpha") => cfg.alpha = fnum()?,
                ("params", "beta") => cfg.beta = fnum()?,
                ("params", "gamma") => cfg.gamma = fnum()?,
                ("params", "kappa") => cfg.kappa = fnum()?,
                ("grid", "dim") => cfg.dim = unum()? as usize,
                ("grid", "box_length") => cfg.box_length = fnum()?,
                ("grid", "points_per_axis") => cfg.points_per_axis = unum()? as usize,
                ("grid", "t_end") => cfg.t_end = fnum()?,
                ("grid", "n_steps") => cfg.n_steps = unum()? as usize,
                ("noise", "modes") => cfg.modes = unum()? as usize,
                ("noise", "n_samples") => cfg.n_samples = unum()? as usize,
                ("tolerances", "drift") => cfg.tol.drift = fnum()?,
                ("tolerances", "mass_rel") => cfg.tol.mass_rel = fnum()?,
                ("tolerances", "route_rel") => cfg.tol.route_rel = fnum()?,
                ("tolerances", "truncation_rel") => cfg.tol.truncation_rel = fnum()?,
                (sec, k) => {
                    return Err(Error::Config(format!(
                        "line {}: unknown key `{k}` in section [{sec}]",
                        lineno + 1
                    )))
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!("[params] alpha {} outside (0,1)", self.alpha)));
        }
        if !(self.beta < self.alpha + 0.5) {
            return Err(Error::Config(format!(
                "[params] beta {} violates beta < alpha + 1/2 (alpha - beta > -1/2 is needed \
                 for the stochastic convolution to be square integrable)",
                self.beta
            )));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Config(format!("[params] kappa {} outside (0,1)", self.kappa)));
        }
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("[grid] dim {} outside 1..=3", self.dim)));
        }
        if !self.points_per_axis.is_power_of_two() {
            return Err(Error::Config(format!(
                "[grid] points_per_axis {} must be a power of two",
                self.points_per_axis
            )));
        }
        if self.n_steps < 2 {
            return Err(Error::Config(format!("[grid] n_steps {} < 2", self.n_steps)));
        }
        Ok(())
    }

    /// Canonical rendering with every default made explicit; hashing input.
    pub fn normalized_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[experiment]");
        let _ = writeln!(s, "out_dir = {}", self.out_dir);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "threads = {}", self.threads);
        let _ = writeln!(s, "[bernstein]");
        let _ = writeln!(s, "name = {}", self.bernstein_name);
        for (k, v) in &self.bernstein_params {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "[params]");
        let _ = writeln!(s, "alpha = {}", self.alpha);
        let _ = writeln!(s, "beta = {}", self.beta);
        let _ = writeln!(s, "gamma = {}", self.gamma);
        let _ = writeln!(s, "kappa = {}", self.kappa);
        let _ = writeln!(s, "[grid]");
        let _ = writeln!(s, "dim = {}", self.dim);
        let _ = writeln!(s, "box_length = {}", self.box_length);
        let _ = writeln!(s, "points_per_axis = {}", self.points_per_axis);
        let _ = writeln!(s, "t_end = {}", self.t_end);
        let _ = writeln!(s, "n_steps = {}", self.n_steps);
        let _ = writeln!(s, "[noise]");
        let _ = writeln!(s, "modes = {}", self.modes);
        let _ = writeln!(s, "n_samples = {}", self.n_samples);
        let _ = writeln!(s, "[tolerances]");
        let _ = writeln!(s, "drift = {}", self.tol.drift);
        let _ = writeln!(s, "mass_rel = {}", self.tol.mass_rel);
        let _ = writeln!(s, "route_rel = {}", self.tol.route_rel);
        let _ = writeln!(s, "truncation_rel = {}", self.tol.truncation_rel);
        s
    }

    pub fn hash(&self) -> u64 {
        config_hash(&self.normalized_text())
    }

    pub fn bernstein(&self) -> Result<BernsteinSpec> {
        catalog(&self.bernstein_name, &self.bernstein_params)
    }

    pub fn frac_params(&self) -> Result<FracParams> {
        FracParams::new(self.alpha, self.beta, self.gamma, self.kappa)
    }
}
