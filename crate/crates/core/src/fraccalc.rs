//! Riemann-Liouville integrals/derivatives and Caputo derivatives on uniform
//! time grids.
//!
//! The integral `I^a f(t) = (1/Gamma(a)) int_0^t (t-s)^{a-1} f(s) ds` is
//! computed by product integration: `f` is interpolated piecewise-linearly
//! and the singular weight is integrated in closed form per cell, so the
//! `s -> t` singularity is absorbed exactly and the scheme stays second
//! order all the way to the endpoint.

use crate::special::gamma_fn;
use crate::{Error, Result};

/// Uniform partition of `[0, t_end]` into `n_steps` cells (so `n_steps + 1`
/// nodes, the first at zero).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t_end: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    pub fn new(t_end: f64, n_steps: usize) -> Result<Self> {
        if !(t_end > 0.0) || n_steps < 2 {
            return Err(Error::Domain(format!(
                "time grid t_end {t_end}, n_steps {n_steps}"
            )));
        }
        Ok(TimeGrid { t_end, n_steps })
    }

    #[inline]
    pub fn dt(&self) -> f64 {
        self.t_end / self.n_steps as f64
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.t_end * i as f64 / self.n_steps as f64
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..=self.n_steps).map(|i| self.node(i)).collect()
    }

    /// Below this resolution the endpoint stencils dominate the error.
    pub fn is_coarse(&self) -> bool {
        self.n_steps < 64
    }
}

/// Real-valued path sampled on a [`TimeGrid`].
#[derive(Debug, Clone, PartialEq)]
pub struct SampledPath {
    pub grid: TimeGrid,
    pub values: Vec<f64>,
}

impl SampledPath {
    pub fn new(grid: TimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_steps + 1 {
            return Err(Error::Domain(format!(
                "path length {} does not match grid ({} nodes)",
                values.len(),
                grid.n_steps + 1
            )));
        }
        Ok(SampledPath { grid, values })
    }

    pub fn from_fn<F: Fn(f64) -> f64>(grid: TimeGrid, f: F) -> Self {
        let values = (0..=grid.n_steps).map(|i| f(grid.node(i))).collect();
        SampledPath { grid, values }
    }
}

/// Riemann-Liouville fractional integral `I^alpha f`, `alpha >= 0`.
/// `alpha = 0` is the identity.
pub fn rl_integral(f: &SampledPath, alpha: f64) -> Result<SampledPath> {
    if alpha < 0.0 {
        return Err(Error::Domain(format!(
            "rl_integral with alpha {alpha} < 0; use rl_derivative"
        )));
    }
    if alpha == 0.0 {
        return Ok(f.clone());
    }
    let n = f.grid.n_steps;
    let dt = f.grid.dt();
    // Moment tables: P[j] = (j dt)^alpha, Q[j] = (j dt)^(alpha+1).
    let p: Vec<f64> = (0..=n).map(|j| (j as f64 * dt).powf(alpha)).collect();
    let q: Vec<f64> = (0..=n).map(|j| (j as f64 * dt).powf(alpha + 1.0)).collect();
    // Per-lag moments of the weight against 1 and against (b - tau).
    let mut w0 = vec![0.0; n + 1];
    let mut w1 = vec![0.0; n + 1];
    for j in 1..=n {
        let a0 = (p[j] - p[j - 1]) / alpha;
        w0[j] = a0;
        w1[j] = (j as f64 * dt) * a0 - (q[j] - q[j - 1]) / (alpha + 1.0);
    }
    let inv_gamma = 1.0 / gamma_fn(alpha);
    let vals = &f.values;
    let mut out = vec![0.0; n + 1];
    for node in 1..=n {
        let mut acc = 0.0;
        for i in 0..node {
            let j = node - i;
            let slope = (vals[i + 1] - vals[i]) / dt;
            acc += vals[i] * w0[j] + slope * w1[j];
        }
        out[node] = acc * inv_gamma;
    }
    SampledPath::new(f.grid, out)
}

/// Differentiates a sampled path: centered interior stencil, second-order
/// one-sided stencils at both endpoints.
fn differentiate(g: &SampledPath) -> SampledPath {
    let n = g.grid.n_steps;
    let dt = g.grid.dt();
    let v = &g.values;
    let mut out = vec![0.0; n + 1];
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    out[n] = (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * dt);
    for i in 1..n {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
    }
    SampledPath { grid: g.grid, values: out }
}

/// Riemann-Liouville derivative `D^alpha f = d/dt I^{1-alpha} f`,
/// `alpha in (0,1)`.
pub fn rl_derivative(f: &SampledPath, alpha: f64) -> Result<SampledPath> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("rl_derivative order {alpha} outside (0,1)")));
    }
    Ok(differentiate(&rl_integral(f, 1.0 - alpha)?))
}

/// Caputo derivative `d^alpha f = D^alpha (f - f(0))`, `alpha in (0,1)`.
pub fn caputo_derivative(f: &SampledPath, alpha: f64) -> Result<SampledPath> {
    let f0 = f.values[0];
    let shifted = SampledPath {
        grid: f.grid,
        values: f.values.iter().map(|v| v - f0).collect(),
    };
    rl_derivative(&shifted, alpha)
}

/// Discrete `L_p` norm on the grid (right-Riemann weights).
pub fn lp_norm(f: &SampledPath, p: f64) -> f64 {
    let dt = f.grid.dt();
    (f.values.iter().map(|v| v.abs().powf(p) * dt).sum::<f64>()).powf(1.0 / p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::gamma_fn;

    const N: usize = 4096;

    fn grid() -> TimeGrid {
        TimeGrid::new(1.0, N).unwrap()
    }

    fn sup_err(a: &SampledPath, b: &SampledPath, from: usize) -> f64 {
        a.values[from..]
            .iter()
            .zip(&b.values[from..])
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn zero_order_integral_is_identity() {
        let f = SampledPath::from_fn(grid(), |t| (3.0 * t).sin());
        assert_eq!(rl_integral(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn negative_order_redirects_to_derivative() {
        let f = SampledPath::from_fn(grid(), |t| t);
        let err = rl_integral(&f, -0.5).unwrap_err();
        assert!(err.to_string().contains("rl_derivative"));
    }

    #[test]
    fn half_integral_of_one_is_power_rule() {
        let f = SampledPath::from_fn(grid(), |_| 1.0);
        let out = rl_integral(&f, 0.5).unwrap();
        for i in 1..=N {
            let t = out.grid.node(i);
            let exact = t.sqrt() / gamma_fn(1.5);
            assert!(
                (out.values[i] - exact).abs() <= 1.0e-8 * exact,
                "node {i}: {} vs {exact}",
                out.values[i]
            );
        }
    }

    #[test]
    fn integral_semigroup_on_smooth_path() {
        let f = SampledPath::from_fn(grid(), |t| t.sin());
        let lhs = rl_integral(&rl_integral(&f, 0.4).unwrap(), 0.3).unwrap();
        let rhs = rl_integral(&f, 0.7).unwrap();
        assert!(sup_err(&lhs, &rhs, 0) <= 1.0e-6);
    }

    #[test]
    fn half_derivative_of_sqrt_is_constant() {
        let f = SampledPath::from_fn(grid(), |t| t.sqrt());
        let out = rl_derivative(&f, 0.5).unwrap();
        let exact = gamma_fn(1.5);
        for i in (N / 20)..=N {
            assert!(
                (out.values[i] - exact).abs() <= 1.0e-3 * exact,
                "node {i}: {} vs {exact}",
                out.values[i]
            );
        }
    }

    #[test]
    fn derivative_inverts_integral() {
        // f(0) = 0: no cusp at the origin, the identity holds in sup norm
        let f = SampledPath::from_fn(grid(), |t| t.sin());
        let out = rl_derivative(&rl_integral(&f, 0.4).unwrap(), 0.4).unwrap();
        assert!(sup_err(&out, &f, 2) <= 1.0e-5, "sup {}", sup_err(&out, &f, 2));
        // f(0) != 0: I^a f has a t^a cusp; the identity holds at the same
        // tolerance outside an initial layer (the linear interpolant cannot
        // resolve the cusp, and the endpoint stencil dominates there)
        let f = SampledPath::from_fn(grid(), |t| t.cos());
        let out = rl_derivative(&rl_integral(&f, 0.4).unwrap(), 0.4).unwrap();
        let from = (N as f64 * 0.15) as usize;
        assert!(sup_err(&out, &f, from) <= 1.0e-5, "sup {}", sup_err(&out, &f, from));
    }

    #[test]
    fn rl_derivative_of_constant_decays_like_power() {
        let c = 2.5;
        let f = SampledPath::from_fn(grid(), |_| c);
        let out = rl_derivative(&f, 0.3).unwrap();
        for i in (N / 10)..=N {
            let t = out.grid.node(i);
            let exact = c * t.powf(-0.3) / gamma_fn(0.7);
            assert!(
                (out.values[i] - exact).abs() <= 1.0e-6 * exact,
                "node {i}: {} vs {exact}",
                out.values[i]
            );
        }
    }

    #[test]
    fn caputo_of_constant_vanishes() {
        let f = SampledPath::from_fn(grid(), |_| 7.0);
        let out = caputo_derivative(&f, 0.6).unwrap();
        assert!(out.values.iter().all(|v| v.abs() < 1.0e-10));
    }

    #[test]
    fn caputo_power_rule_for_linear_path() {
        let alpha = 0.6;
        let f = SampledPath::from_fn(grid(), |t| t);
        let out = caputo_derivative(&f, alpha).unwrap();
        for i in (N / 10)..=N {
            let t = out.grid.node(i);
            let exact = t.powf(1.0 - alpha) / gamma_fn(2.0 - alpha);
            assert!(
                (out.values[i] - exact).abs() <= 1.0e-5 * exact,
                "node {i}: {} vs {exact}",
                out.values[i]
            );
        }
    }

    #[test]
    fn caputo_equals_rl_when_path_starts_at_zero() {
        let f = SampledPath::from_fn(grid(), |t| t * (2.0 * t).sin());
        let a = caputo_derivative(&f, 0.45).unwrap();
        let b = rl_derivative(&f, 0.45).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn integral_then_caputo_recovers_shifted_path() {
        let alpha = 0.55;
        let f = SampledPath::from_fn(grid(), |t| 1.0 + t.sin());
        let d = caputo_derivative(&f, alpha).unwrap();
        let back = rl_integral(&d, alpha).unwrap();
        let expect = SampledPath::from_fn(grid(), |t| t.sin());
        // skip the first few nodes where the derivative stencil is one-sided
        assert!(sup_err(&back, &expect, 8) <= 1.0e-5);
    }

    #[test]
    fn lp_operator_norm_is_resolution_independent() {
        let alpha = 0.5;
        let p = 2.0;
        let bound = 1.0f64.powf(alpha) / gamma_fn(alpha + 1.0);
        let mut ratios = Vec::new();
        for n in [256usize, 512, 1024, 2048] {
            let g = TimeGrid::new(1.0, n).unwrap();
            let f = SampledPath::from_fn(g, |t| (7.0 * t).cos() + 0.3);
            let inorm = lp_norm(&rl_integral(&f, alpha).unwrap(), p);
            ratios.push(inorm / lp_norm(&f, p));
        }
        for r in &ratios {
            assert!(*r <= bound * 1.01, "ratio {r} vs bound {bound}");
        }
        let spread = ratios.iter().cloned().fold(0.0f64, f64::max)
            - ratios.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(spread < 0.01, "ratios {ratios:?}");
    }
}
