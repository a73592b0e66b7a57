//! Catalog, evaluation, and verification of Bernstein functions and the
//! quantities derived from them (inverse, fractional powers, the anisotropic
//! time scale `kappa(b)`).
//!
//! A catalog entry carries the scaling constants `delta0`, `kappa0` of the
//! two-sided sandwich
//!
//! ```text
//! kappa0 (R/r)^{delta0} <= phi(R)/phi(r) <= R/r,   0 < r < R,
//! ```
//!
//! which every operator estimate in this crate leans on.  For the shipped
//! entries `kappa0 = 1` is exact, by monotonicity of `phi(lambda)/lambda^{delta0}`
//! in each case; `verify_scaling` re-checks the sandwich numerically on any
//! grid.

use crate::{Error, Result};
use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// Hard floating-point window for the spectral argument `lambda`.  Outside
/// it, operations error rather than extrapolate.
pub const LAMBDA_MIN: f64 = 1.0e-30;
pub const LAMBDA_MAX: f64 = 1.0e30;

#[derive(Clone)]
enum PhiKind {
    /// `lambda^beta`, `0 < beta <= 1`.
    Stable { beta: f64 },
    /// `lambda^b1 + lambda^b2`.
    SumStable { b1: f64, b2: f64 },
    /// `lambda^beta log(1+lambda)^gamma`, `gamma in (-beta, 1-beta)`.
    StableLog { beta: f64, gamma: f64 },
    /// `(lambda + m^{1/beta})^beta - m`.
    Relativistic { beta: f64, m: f64 },
    /// `lambda / log(1 + lambda^{beta/2})`, `beta in (0,2)`.
    ConjugateGeometric { beta: f64 },
    /// `base(lambda)^gamma`, `gamma in (0,1)`.
    Power { base: Arc<PhiKind>, gamma: f64 },
    /// User-supplied closed form; derivatives fall back to finite differences
    /// and the scaling constants are estimated, not proven.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for PhiKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PhiKind::Stable { beta } => write!(f, "Stable({beta})"),
            PhiKind::SumStable { b1, b2 } => write!(f, "SumStable({b1},{b2})"),
            PhiKind::StableLog { beta, gamma } => write!(f, "StableLog({beta},{gamma})"),
            PhiKind::Relativistic { beta, m } => write!(f, "Relativistic({beta},{m})"),
            PhiKind::ConjugateGeometric { beta } => write!(f, "ConjugateGeometric({beta})"),
            PhiKind::Power { base, gamma } => write!(f, "Power({base:?},{gamma})"),
            PhiKind::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl PhiKind {
    fn eval(&self, lambda: f64) -> f64 {
        match self {
            PhiKind::Stable { beta } => lambda.powf(*beta),
            PhiKind::SumStable { b1, b2 } => lambda.powf(*b1) + lambda.powf(*b2),
            PhiKind::StableLog { beta, gamma } => {
                lambda.powf(*beta) * lambda.ln_1p().powf(*gamma)
            }
            PhiKind::Relativistic { beta, m } => {
                let a = m.powf(1.0 / beta);
                (lambda + a).powf(*beta) - m
            }
            PhiKind::ConjugateGeometric { beta } => {
                let y = lambda.powf(beta / 2.0);
                if y < 1.0e-8 {
                    // log1p(y) = y (1 - y/2 + ...) keeps the ratio stable
                    lambda / (y * (1.0 - 0.5 * y + y * y / 3.0))
                } else {
                    lambda / y.ln_1p()
                }
            }
            PhiKind::Power { base, gamma } => base.eval(lambda).powf(*gamma),
            PhiKind::Custom(f) => f(lambda),
        }
    }

    /// Closed-form n-th derivative where the entry admits one.
    fn closed_deriv(&self, n: usize, lambda: f64) -> Option<f64> {
        fn falling(beta: f64, n: usize) -> f64 {
            (0..n).fold(1.0, |acc, j| acc * (beta - j as f64))
        }
        match self {
            PhiKind::Stable { beta } => Some(falling(*beta, n) * lambda.powf(beta - n as f64)),
            PhiKind::SumStable { b1, b2 } => Some(
                falling(*b1, n) * lambda.powf(b1 - n as f64)
                    + falling(*b2, n) * lambda.powf(b2 - n as f64),
            ),
            PhiKind::Relativistic { beta, m } => {
                let a = m.powf(1.0 / beta);
                Some(falling(*beta, n) * (lambda + a).powf(beta - n as f64))
            }
            PhiKind::Power { base, gamma } => {
                let f = base.eval(lambda);
                let f1 = base.closed_deriv(1, lambda)?;
                match n {
                    1 => Some(gamma * f.powf(gamma - 1.0) * f1),
                    2 => {
                        let f2 = base.closed_deriv(2, lambda)?;
                        Some(
                            gamma * (gamma - 1.0) * f.powf(gamma - 2.0) * f1 * f1
                                + gamma * f.powf(gamma - 1.0) * f2,
                        )
                    }
                    _ => None,
                }
            }
            _ => None,
        }
    }
}

/// A Bernstein function `phi` with drift, scaling constants, and free
/// parameters of its catalog entry.
#[derive(Debug, Clone)]
pub struct BernsteinSpec {
    pub name: String,
    /// Drift coefficient `b` of the representation `b lambda + integral part`.
    pub drift: f64,
    /// Lower scaling exponent of the sandwich.
    pub delta0: f64,
    /// Lower scaling constant of the sandwich.
    pub kappa0: f64,
    /// Free parameters of the catalog entry.
    pub params: BTreeMap<String, f64>,
    kind: PhiKind,
}

fn check_lambda(lambda: f64) -> Result<f64> {
    if !(LAMBDA_MIN..=LAMBDA_MAX).contains(&lambda) {
        return Err(Error::Clamp(format!(
            "lambda {lambda:e} outside [{LAMBDA_MIN:e}, {LAMBDA_MAX:e}]"
        )));
    }
    Ok(lambda)
}

impl BernsteinSpec {
    /// `phi(lambda)` for `lambda` in the supported window; `phi(0) = 0` by
    /// continuity.
    pub fn eval(&self, lambda: f64) -> f64 {
        if lambda == 0.0 {
            return 0.0;
        }
        self.kind.eval(lambda)
    }

    /// Checked evaluation, erroring outside the floating-point window.
    pub fn eval_checked(&self, lambda: f64) -> Result<f64> {
        if lambda == 0.0 {
            return Ok(0.0);
        }
        Ok(self.kind.eval(check_lambda(lambda)?))
    }

    /// n-th derivative, closed form where the entry has one, otherwise
    /// central finite differences with a per-order relative step (the step
    /// grows with the order so the difference stays above roundoff).
    pub fn deriv(&self, n: usize, lambda: f64) -> Result<f64> {
        check_lambda(lambda)?;
        if n == 0 {
            return Ok(self.eval(lambda));
        }
        if n > 4 {
            return Err(Error::Domain(format!("derivative order {n} > 4")));
        }
        if let Some(v) = self.kind.closed_deriv(n, lambda) {
            return Ok(v);
        }
        let f = |x: f64| self.kind.eval(x);
        let h = lambda
            * match n {
                1 => 6.0e-6,
                2 => 2.0e-4,
                3 => 2.0e-3,
                _ => 1.0e-2,
            };
        let v = match n {
            1 => (f(lambda + h) - f(lambda - h)) / (2.0 * h),
            2 => (f(lambda + h) - 2.0 * f(lambda) + f(lambda - h)) / (h * h),
            3 => {
                (f(lambda + 2.0 * h) - 2.0 * f(lambda + h) + 2.0 * f(lambda - h)
                    - f(lambda - 2.0 * h))
                    / (2.0 * h * h * h)
            }
            _ => {
                (f(lambda + 2.0 * h) - 4.0 * f(lambda + h) + 6.0 * f(lambda)
                    - 4.0 * f(lambda - h)
                    + f(lambda - 2.0 * h))
                    / (h * h * h * h)
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Domain(format!(
                "finite-difference derivative order {n} failed at lambda {lambda:e}"
            )))
        }
    }

    /// Builds a user-supplied closed-form entry.  `delta0`/`kappa0` are
    /// estimated by log-log regression over the supported window and should
    /// be treated as heuristic, unlike the proven catalog constants.
    pub fn custom<F>(name: &str, f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        let kind = PhiKind::Custom(Arc::new(f));
        let (delta0, kappa0) = estimate_scaling_kind(&kind);
        BernsteinSpec {
            name: name.to_string(),
            drift: 0.0,
            delta0,
            kappa0,
            params: BTreeMap::new(),
            kind,
        }
    }
}

/// Catalog constructor.  `name` is one of `stable`, `sum_of_stables`,
/// `stable_log`, `relativistic`, `conjugate_geometric`; `params` carries the
/// entry's free parameters.
pub fn catalog(name: &str, params: &BTreeMap<String, f64>) -> Result<BernsteinSpec> {
    let get = |key: &str| -> Result<f64> {
        params
            .get(key)
            .copied()
            .ok_or_else(|| Error::Config(format!("catalog entry {name}: missing parameter {key}")))
    };
    let (kind, drift, delta0, kappa0) = match name {
        "stable" => {
            let beta = get("beta")?;
            if !(beta > 0.0 && beta <= 1.0) {
                return Err(Error::Domain(format!("stable: beta {beta} outside (0,1]")));
            }
            let drift = if beta == 1.0 { 1.0 } else { 0.0 };
            (PhiKind::Stable { beta }, drift, beta, 1.0)
        }
        "sum_of_stables" => {
            let b1 = get("beta1")?;
            let b2 = get("beta2")?;
            if !(b1 > 0.0 && b1 <= 1.0 && b2 > 0.0 && b2 <= 1.0) {
                return Err(Error::Domain(format!(
                    "sum_of_stables: exponents ({b1}, {b2}) outside (0,1]"
                )));
            }
            let drift = (b1 == 1.0) as u8 as f64 + (b2 == 1.0) as u8 as f64;
            (PhiKind::SumStable { b1, b2 }, drift, b1.min(b2), 1.0)
        }
        "stable_log" => {
            let beta = get("beta")?;
            let gamma = get("gamma")?;
            if !(beta > 0.0 && beta < 1.0) || !(gamma > -beta && gamma < 1.0 - beta) {
                return Err(Error::Domain(format!(
                    "stable_log: (beta, gamma) = ({beta}, {gamma}) outside beta in (0,1), gamma in (-beta, 1-beta)"
                )));
            }
            // For gamma >= 0 the log factor only helps the lower bound; for
            // gamma < 0 the exact exponent is beta + gamma.
            let d0 = if gamma >= 0.0 { beta } else { beta + gamma };
            (PhiKind::StableLog { beta, gamma }, 0.0, d0, 1.0)
        }
        "relativistic" => {
            let beta = get("beta")?;
            let m = get("m")?;
            if !(beta > 0.0 && beta < 1.0 && m > 0.0) {
                return Err(Error::Domain(format!(
                    "relativistic: (beta, m) = ({beta}, {m}) outside beta in (0,1), m > 0"
                )));
            }
            (PhiKind::Relativistic { beta, m }, 0.0, beta, 1.0)
        }
        "conjugate_geometric" => {
            let beta = get("beta")?;
            if !(beta > 0.0 && beta < 2.0) {
                return Err(Error::Domain(format!(
                    "conjugate_geometric: beta {beta} outside (0,2)"
                )));
            }
            (PhiKind::ConjugateGeometric { beta }, 0.0, 1.0 - beta / 2.0, 1.0)
        }
        other => return Err(Error::UnknownName(format!("catalog entry {other}"))),
    };
    Ok(BernsteinSpec {
        name: name.to_string(),
        drift,
        delta0,
        kappa0,
        params: params.clone(),
        kind,
    })
}

/// Shorthand for the workhorse entries `phi(lambda) = lambda^beta`.
pub fn stable(beta: f64) -> BernsteinSpec {
    let mut p = BTreeMap::new();
    p.insert("beta".to_string(), beta);
    catalog("stable", &p).expect("stable exponent in (0,1]")
}

/// `phi^{-1}(y)` by safeguarded Newton with bracket expansion; relative
/// residual below `1e-12`.
pub fn inverse(phi: &BernsteinSpec, y: f64) -> Result<f64> {
    if !(y > 0.0) || !y.is_finite() {
        return Err(Error::Domain(format!("inverse at y {y}")));
    }
    let mut lo = 1.0f64;
    let mut hi = 1.0f64;
    while phi.eval(lo) > y {
        lo /= 16.0;
        if lo < LAMBDA_MIN {
            return Err(Error::Clamp(format!("inverse({y:e}) below lambda window")));
        }
    }
    while phi.eval(hi) < y {
        hi *= 16.0;
        if hi > LAMBDA_MAX {
            return Err(Error::Clamp(format!("inverse({y:e}) above lambda window")));
        }
    }
    let mut x = (lo * hi).sqrt();
    for _ in 0..200 {
        let fx = phi.eval(x);
        if (fx - y).abs() <= 1.0e-12 * y {
            return Ok(x);
        }
        if fx < y {
            lo = x;
        } else {
            hi = x;
        }
        let slope = phi.deriv(1, x)?;
        let newton = x - (fx - y) / slope;
        x = if slope > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            // bisect in log scale; phi spans many decades
            (lo * hi).sqrt()
        };
    }
    Err(Error::Quadrature(format!(
        "inverse({y:e}) did not reach tolerance (last lambda {x:e})"
    )))
}

/// Anisotropic time scale `kappa(b) = (phi(b^{-2}))^{-1/alpha}` of the
/// parabolic cubes.
pub fn kappa_scale(phi: &BernsteinSpec, alpha: f64, b: f64) -> Result<f64> {
    if !(b > 0.0) || !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("kappa_scale at b {b}, alpha {alpha}")));
    }
    Ok(phi.eval_checked(b.powi(-2))?.powf(-1.0 / alpha))
}

/// Fractional power `phi^gamma` for `gamma in (0,1)`: again a Bernstein
/// function, with exponent `gamma * delta0`, constant `kappa0^gamma`, and no
/// drift.
pub fn power(phi: &BernsteinSpec, gamma: f64) -> Result<BernsteinSpec> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::Domain(format!("power exponent {gamma} outside (0,1)")));
    }
    Ok(BernsteinSpec {
        name: format!("{}^{}", phi.name, gamma),
        drift: 0.0,
        delta0: phi.delta0 * gamma,
        kappa0: phi.kappa0.powf(gamma),
        params: phi.params.clone(),
        kind: PhiKind::Power { base: Arc::new(phi.kind.clone()), gamma },
    })
}

/// Result of the two-sided sandwich check.
#[derive(Debug, Clone)]
pub struct ScalingReport {
    pub pairs_checked: usize,
    /// Worst slack of `phi(R)/phi(r) - kappa0 (R/r)^{delta0}`, relative.
    pub worst_lower_margin: f64,
    /// Worst slack of `R/r - phi(R)/phi(r)`, relative.
    pub worst_upper_margin: f64,
    pub pass: bool,
}

/// Log-spaced grid of `n` points over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    assert!(lo > 0.0 && hi > lo && n >= 2);
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Asserts the sandwich `kappa0 (R/r)^{delta0} <= phi(R)/phi(r) <= R/r` on
/// every ordered pair of the grid; the grid must span at least 12 decades.
pub fn verify_scaling(
    phi: &BernsteinSpec,
    delta0: f64,
    kappa0: f64,
    grid: &[f64],
) -> Result<ScalingReport> {
    let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = grid.iter().cloned().fold(0.0f64, f64::max);
    if hi / lo < 1.0e12 {
        return Err(Error::Domain(format!(
            "scaling grid spans only {:.1} decades (need >= 12)",
            (hi / lo).log10()
        )));
    }
    let mut report = ScalingReport {
        pairs_checked: 0,
        worst_lower_margin: f64::INFINITY,
        worst_upper_margin: f64::INFINITY,
        pass: true,
    };
    const SLACK: f64 = 1.0e-9;
    for (i, &r) in grid.iter().enumerate() {
        let phi_r = phi.eval_checked(r)?;
        for &rr in &grid[i + 1..] {
            let ratio = phi.eval_checked(rr)? / phi_r;
            let q = rr / r;
            let lower = (ratio - kappa0 * q.powf(delta0)) / ratio;
            let upper = (q - ratio) / q;
            report.pairs_checked += 1;
            report.worst_lower_margin = report.worst_lower_margin.min(lower);
            report.worst_upper_margin = report.worst_upper_margin.min(upper);
            if lower < -SLACK || upper < -SLACK {
                return Err(Error::Domain(format!(
                    "scaling sandwich violated at (r, R) = ({r:e}, {rr:e}): \
                     ratio {ratio:e}, lower margin {lower:e}, upper margin {upper:e}"
                )));
            }
        }
    }
    Ok(report)
}

/// Report of `sup_lambda lambda^n |phi^(n)(lambda)| / phi(lambda)` per order.
#[derive(Debug, Clone)]
pub struct DerivativeBoundReport {
    /// `sup` per order `n = 1..=n_max`.
    pub sup_ratio: Vec<f64>,
    /// Relative change of each sup under grid refinement x2.
    pub drift: Vec<f64>,
    /// Whether the sampled range had to be shrunk for derivative evaluation.
    pub shrunk: bool,
    pub pass: bool,
}

/// Scans the derivative-vs-value ratios over 12 decades; asserts finiteness
/// and refinement stability (<= 10% drift).
pub fn verify_derivative_bound(phi: &BernsteinSpec, n_max: usize) -> Result<DerivativeBoundReport> {
    if n_max == 0 || n_max > 4 {
        return Err(Error::Domain(format!("derivative orders 1..=4, got {n_max}")));
    }
    let mut lo = 1.0e-6;
    let mut hi = 1.0e6;
    let mut shrunk = false;
    // Shrink the window if an extreme-lambda derivative misbehaves.
    for _ in 0..4 {
        let probe_ok = |l: f64| phi.deriv(n_max, l).map(|v| v.is_finite()).unwrap_or(false);
        if probe_ok(lo) && probe_ok(hi) {
            break;
        }
        lo *= 10.0;
        hi /= 10.0;
        shrunk = true;
    }
    let sup_on = |n: usize, grid: &[f64]| -> Result<f64> {
        let mut sup = 0.0f64;
        for &l in grid {
            let d = phi.deriv(n, l)?;
            let ratio = l.powi(n as i32) * d.abs() / phi.eval(l);
            if !ratio.is_finite() {
                return Err(Error::Domain(format!(
                    "derivative ratio non-finite at lambda {l:e}, order {n}"
                )));
            }
            sup = sup.max(ratio);
        }
        Ok(sup)
    };
    let coarse = log_grid(lo, hi, 61);
    let fine = log_grid(lo, hi, 121);
    let mut sup_ratio = Vec::new();
    let mut drift = Vec::new();
    let mut pass = true;
    for n in 1..=n_max {
        let s1 = sup_on(n, &coarse)?;
        let s2 = sup_on(n, &fine)?;
        let d = (s2 - s1).abs() / s1.max(1.0e-300);
        pass &= s2.is_finite() && d <= 0.10;
        sup_ratio.push(s2);
        drift.push(d);
    }
    Ok(DerivativeBoundReport { sup_ratio, drift, shrunk, pass })
}

fn estimate_scaling_kind(kind: &PhiKind) -> (f64, f64) {
    let grid = log_grid(1.0e-8, 1.0e8, 65);
    let mut delta = f64::INFINITY;
    for w in grid.windows(2) {
        let slope =
            (kind.eval(w[1]).ln() - kind.eval(w[0]).ln()) / (w[1].ln() - w[0].ln());
        delta = delta.min(slope);
    }
    let delta = delta.clamp(1.0e-6, 1.0);
    let mut kappa = f64::INFINITY;
    for (i, &r) in grid.iter().enumerate() {
        for &rr in &grid[i + 1..] {
            let k = (kind.eval(rr) / kind.eval(r)) / (rr / r).powf(delta);
            kappa = kappa.min(k);
        }
    }
    (delta, kappa.min(1.0))
}

/// Heuristic `(delta0, kappa0)` estimate for a user-supplied `phi` by
/// log-log slope regression; catalog entries carry proven constants instead.
pub fn estimate_scaling(phi: &BernsteinSpec) -> (f64, f64) {
    estimate_scaling_kind(&phi.kind)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entry(name: &str, kv: &[(&str, f64)]) -> BernsteinSpec {
        let params: BTreeMap<String, f64> =
            kv.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        catalog(name, &params).unwrap()
    }

    #[test]
    fn catalog_sets_documented_constants() {
        let s = entry("stable", &[("beta", 0.5)]);
        assert_eq!(s.delta0, 0.5);
        assert_eq!(s.eval(4.0), 2.0);
        let id = entry("stable", &[("beta", 1.0)]);
        assert_eq!(id.delta0, 1.0);
        assert_eq!(id.kappa0, 1.0);
        assert_eq!(id.drift, 1.0);
        let cg = entry("conjugate_geometric", &[("beta", 1.0)]);
        assert_eq!(cg.delta0, 0.5);
        // phi(4)/phi(1) = 4 ln2 / ln3 >= kappa0 * 2
        let ratio = cg.eval(4.0) / cg.eval(1.0);
        assert!(ratio >= cg.kappa0 * 2.0);
        assert!((ratio - 4.0 * 2f64.ln() / 3f64.ln()).abs() < 1.0e-12);
    }

    #[test]
    fn catalog_rejects_bad_parameters() {
        let mut p = BTreeMap::new();
        p.insert("beta".to_string(), 1.5);
        assert!(matches!(catalog("stable", &p), Err(Error::Domain(_))));
        assert!(matches!(catalog("nope", &p), Err(Error::UnknownName(_))));
    }

    #[test]
    fn inverse_round_trips() {
        assert!((inverse(&stable(1.0), 3.0).unwrap() - 3.0).abs() < 1.0e-12);
        assert!((inverse(&stable(0.5), 2.0).unwrap() - 4.0).abs() < 1.0e-11);
        let phi = BernsteinSpec::custom("lambda_over_log", |l: f64| l / l.ln_1p());
        let root = inverse(&phi, 5.0).unwrap();
        assert!((phi.eval(root) - 5.0).abs() <= 1.0e-12 * 5.0);
    }

    #[test]
    fn inverse_of_eval_is_identity_over_ten_decades() {
        for spec in [
            stable(0.7),
            entry("sum_of_stables", &[("beta1", 0.3), ("beta2", 0.7)]),
            entry("relativistic", &[("beta", 0.5), ("m", 1.0)]),
            entry("conjugate_geometric", &[("beta", 1.2)]),
        ] {
            for &l in &log_grid(1.0e-5, 1.0e5, 21) {
                let y = spec.eval(l);
                let back = inverse(&spec, y).unwrap();
                assert!(
                    (back - l).abs() <= 1.0e-10 * l,
                    "{}: lambda {l:e} -> {back:e}",
                    spec.name
                );
            }
        }
    }

    #[test]
    fn scaling_sandwich_holds_for_all_catalog_entries() {
        let grid = log_grid(1.0e-7, 1.0e7, 29);
        for spec in [
            stable(1.0),
            stable(0.5),
            entry("sum_of_stables", &[("beta1", 0.3), ("beta2", 0.7)]),
            entry("stable_log", &[("beta", 0.5), ("gamma", 0.3)]),
            entry("stable_log", &[("beta", 0.5), ("gamma", -0.2)]),
            entry("relativistic", &[("beta", 0.5), ("m", 1.0)]),
            entry("conjugate_geometric", &[("beta", 1.0)]),
        ] {
            let r = verify_scaling(&spec, spec.delta0, spec.kappa0, &grid)
                .unwrap_or_else(|e| panic!("{}: {e}", spec.name));
            assert!(r.pass, "{}: {r:?}", spec.name);
        }
    }

    #[test]
    fn scaling_violation_names_the_pair() {
        let s = stable(0.5);
        let grid = log_grid(1.0e-7, 1.0e7, 15);
        // delta0 too large: the sandwich must fail and say where.
        let err = verify_scaling(&s, 0.9, 1.0, &grid).unwrap_err();
        assert!(err.to_string().contains("(r, R)"), "{err}");
    }

    #[test]
    fn derivative_ratios_for_powers_are_exact() {
        let r = verify_derivative_bound(&stable(1.0), 1).unwrap();
        assert!((r.sup_ratio[0] - 1.0).abs() < 1.0e-12);
        let r = verify_derivative_bound(&stable(0.5), 1).unwrap();
        assert!((r.sup_ratio[0] - 0.5).abs() < 1.0e-12);
        let rel = entry("relativistic", &[("beta", 0.5), ("m", 1.0)]);
        let r = verify_derivative_bound(&rel, 2).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn complete_monotonicity_sign_pattern() {
        for spec in [
            stable(0.6),
            entry("stable_log", &[("beta", 0.5), ("gamma", 0.2)]),
            entry("conjugate_geometric", &[("beta", 0.8)]),
            entry("relativistic", &[("beta", 0.4), ("m", 2.0)]),
        ] {
            for &l in &log_grid(1.0e-4, 1.0e4, 17) {
                for n in 1..=4 {
                    let d = spec.deriv(n, l).unwrap();
                    let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                    // tolerance absorbs finite-difference noise near zero
                    let slack = 1.0e-3 * spec.eval(l) / l.powi(n as i32);
                    assert!(
                        sign * d <= slack,
                        "{} order {n} at lambda {l:e}: {d:e}",
                        spec.name
                    );
                }
            }
        }
    }

    #[test]
    fn kappa_scale_closed_forms() {
        assert!((kappa_scale(&stable(1.0), 0.5, 1.0).unwrap() - 1.0).abs() < 1.0e-14);
        assert!((kappa_scale(&stable(1.0), 0.5, 2.0).unwrap() - 16.0).abs() < 1.0e-12);
        assert!((kappa_scale(&stable(0.5), 0.5, 4.0).unwrap() - 16.0).abs() < 1.0e-12);
    }

    #[test]
    fn power_composes_and_drops_drift() {
        let p = power(&stable(1.0), 0.5).unwrap();
        assert_eq!(p.drift, 0.0);
        assert_eq!(p.delta0, 0.5);
        assert!((p.eval(9.0) - 3.0).abs() < 1.0e-12);
        let q = power(&stable(0.5), 0.5).unwrap();
        assert!((q.eval(16.0) - 2.0).abs() < 1.0e-12);
        // power(power(phi, g1), g2) == power(phi, g1 g2) pointwise
        let a = power(&power(&stable(0.8), 0.5).unwrap(), 0.6).unwrap();
        let b = power(&stable(0.8), 0.3).unwrap();
        for &l in &log_grid(1.0e-6, 1.0e6, 25) {
            assert!((a.eval(l) - b.eval(l)).abs() <= 1.0e-12 * b.eval(l));
        }
    }

    #[test]
    fn lambda_window_is_enforced() {
        assert!(matches!(stable(0.5).eval_checked(1.0e35), Err(Error::Clamp(_))));
        assert!(matches!(stable(0.5).deriv(1, 1.0e-31), Err(Error::Clamp(_))));
    }

    #[test]
    fn heuristic_estimator_recovers_power_exponent() {
        let phi = BernsteinSpec::custom("plain_power", |l: f64| l.powf(0.62));
        let (d, k) = estimate_scaling(&phi);
        assert!((d - 0.62).abs() < 1.0e-3, "delta {d}");
        assert!(k > 0.9 && k <= 1.0, "kappa {k}");
    }
}
