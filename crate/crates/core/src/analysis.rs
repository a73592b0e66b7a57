//! Discrete harmonic-analysis toolbox: Hardy-Littlewood maximal functions,
//! sharp functions over the anisotropic parabolic cubes
//! `Q_b(s, y) = (s - kappa(b), s] x B_b(y)` with `kappa(b) =
//! (phi(b^{-2}))^{-1/alpha}`, and the estimate-verification harness for the
//! maximal-regularity machinery.
//!
//! Maximal functions use dyadic ball families (not all balls); the supremum
//! over the dyadic family is within a factor of two of the full one, which
//! is immaterial for the finite-constant checks run here.

use crate::bernstein::{kappa_scale, BernsteinSpec};
use crate::fraccalc::TimeGrid;
use crate::grid::{MultiplierKind, SpectralGrid};
use crate::kernel::FracParams;
use crate::noise;
use crate::par;
use crate::report::{EstimateReport, RatioSample};
use crate::spde::{second_moment_l2, ForcingMode, SpectralPropagator};
use crate::special::{mittag_leffler, MlParams};
use crate::{Error, Result};

/// Which axis a one-dimensional maximal function runs along.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Space,
    Time,
}

/// Dyadic index radii `1, 2, 4, ...` up to half the line length.
fn dyadic_radii(len: usize) -> Vec<usize> {
    let mut out = Vec::new();
    let mut r = 1usize;
    while 2 * r + 1 <= len {
        out.push(r);
        r *= 2;
    }
    out
}

fn line_maximal(line: &[f64]) -> Vec<f64> {
    let n = line.len();
    // prefix sums of |h|
    let mut pre = vec![0.0; n + 1];
    for (i, v) in line.iter().enumerate() {
        pre[i + 1] = pre[i] + v.abs();
    }
    let avg = |lo: usize, hi: usize| (pre[hi + 1] - pre[lo]) / (hi - lo + 1) as f64;
    let mut out: Vec<f64> = line.iter().map(|v| v.abs()).collect();
    for r in dyadic_radii(n) {
        for x in 0..n {
            // centers whose ball contains x (balls clipped at the boundary)
            let c_lo = x.saturating_sub(r);
            let c_hi = (x + r).min(n - 1);
            let mut best = 0.0f64;
            for c in c_lo..=c_hi {
                let lo = c.saturating_sub(r);
                let hi = (c + r).min(n - 1);
                best = best.max(avg(lo, hi));
            }
            if best > out[x] {
                out[x] = best;
            }
        }
    }
    out
}

/// Discrete Hardy-Littlewood maximal function of a space-time lattice field
/// over the dyadic ball family along one axis.
pub fn maximal_function(field: &[Vec<f64>], axis: Axis) -> Vec<Vec<f64>> {
    match axis {
        Axis::Space => field.iter().map(|row| line_maximal(row)).collect(),
        Axis::Time => {
            let n_t = field.len();
            let n_x = field[0].len();
            let mut out = vec![vec![0.0; n_x]; n_t];
            for x in 0..n_x {
                let col: Vec<f64> = field.iter().map(|row| row[x]).collect();
                let m = line_maximal(&col);
                for t in 0..n_t {
                    out[t][x] = m[t];
                }
            }
            out
        }
    }
}

/// `M_t M_x h`: spatial maximal per time slice, then temporal maximal.
pub fn maximal_tx(field: &[Vec<f64>]) -> Vec<Vec<f64>> {
    maximal_function(&maximal_function(field, Axis::Space), Axis::Time)
}

// ---------------------------------------------------------------------------
// parabolic cubes and the sharp function
// ---------------------------------------------------------------------------

/// One dyadic cube level: spatial radius `b`, its lattice index radius, and
/// the time extent `kappa(b)` snapped up to whole grid cells.
#[derive(Debug, Clone, Copy)]
pub struct CubeLevel {
    pub b: f64,
    pub idx_radius: usize,
    pub t_cells: usize,
}

/// The dyadic family of parabolic cubes resolvable on an `n_t x n_x` grid.
#[derive(Debug, Clone)]
pub struct CubeFamily {
    pub levels: Vec<CubeLevel>,
}

/// Builds the family with `b = 2^j dx` and `kappa(b) = (phi(b^{-2}))^{-1/alpha}`
/// snapped up to time-grid multiples; a level is kept only if the cube has at
/// least 2 time cells and 2 space points and fits in the grid.
pub fn cube_family(
    phi: &BernsteinSpec,
    alpha: f64,
    dx: f64,
    dt: f64,
    n_x: usize,
    n_t: usize,
) -> Result<CubeFamily> {
    let mut levels = Vec::new();
    let mut j = 1u32;
    loop {
        let idx_radius = (1usize << j) - 1;
        if 2 * idx_radius + 1 > n_x {
            break;
        }
        let b = dx * (1u64 << j) as f64;
        let kappa = kappa_scale(phi, alpha, b)?;
        let t_cells = ((kappa / dt).ceil() as usize).max(2);
        if t_cells <= n_t {
            levels.push(CubeLevel { b, idx_radius, t_cells });
        }
        j += 1;
        if j > 30 {
            break;
        }
    }
    if levels.is_empty() {
        return Err(Error::Domain(format!(
            "no parabolic cube fits a {n_t} x {n_x} grid (dx {dx}, dt {dt})"
        )));
    }
    Ok(CubeFamily { levels })
}

/// 2D prefix sums for cube means.
struct Prefix2 {
    n_x: usize,
    pre: Vec<f64>,
}

impl Prefix2 {
    fn new(field: &[Vec<f64>]) -> Self {
        let n_t = field.len();
        let n_x = field[0].len();
        let mut pre = vec![0.0; (n_t + 1) * (n_x + 1)];
        for t in 0..n_t {
            for x in 0..n_x {
                pre[(t + 1) * (n_x + 1) + (x + 1)] = field[t][x]
                    + pre[t * (n_x + 1) + (x + 1)]
                    + pre[(t + 1) * (n_x + 1) + x]
                    - pre[t * (n_x + 1) + x];
            }
        }
        Prefix2 { n_x, pre }
    }

    /// Sum over rows `t0..=t1`, cols `x0..=x1`.
    fn sum(&self, t0: usize, t1: usize, x0: usize, x1: usize) -> f64 {
        let w = self.n_x + 1;
        self.pre[(t1 + 1) * w + (x1 + 1)] - self.pre[t0 * w + (x1 + 1)]
            - self.pre[(t1 + 1) * w + x0]
            + self.pre[t0 * w + x0]
    }
}

/// Mean oscillation of `v` over one cube.
fn cube_oscillation(
    v: &[Vec<f64>],
    pre: &Prefix2,
    t0: usize,
    t1: usize,
    x0: usize,
    x1: usize,
) -> f64 {
    let cells = ((t1 - t0 + 1) * (x1 - x0 + 1)) as f64;
    let mean = pre.sum(t0, t1, x0, x1) / cells;
    let mut acc = 0.0;
    for row in v.iter().take(t1 + 1).skip(t0) {
        for val in row.iter().take(x1 + 1).skip(x0) {
            acc += (val - mean).abs();
        }
    }
    acc / cells
}

/// Sharp function at one point: supremum of the mean oscillation over all
/// cubes of the family containing `(it, ix)` (`center_stride` subsamples the
/// admissible centers; 1 is exhaustive).  Returns the supremum and the
/// number of cubes examined.
pub fn sharp_at(
    v: &[Vec<f64>],
    pre: &Prefix2Handle,
    fam: &CubeFamily,
    it: usize,
    ix: usize,
    center_stride: usize,
) -> (f64, usize) {
    let n_t = v.len();
    let n_x = v[0].len();
    let stride = center_stride.max(1);
    let mut sup = 0.0f64;
    let mut count = 0usize;
    for lvl in &fam.levels {
        let m = lvl.t_cells;
        let r = lvl.idx_radius;
        // time windows (tc - m, tc] containing it: tc in [it, it + m - 1]
        let tc_hi = (it + m - 1).min(n_t - 1);
        let mut tc = it;
        while tc <= tc_hi {
            if tc + 1 >= m {
                let t0 = tc + 1 - m;
                // space windows [xc - r, xc + r] containing ix, inside grid
                let xc_lo = ix.saturating_sub(r).max(r);
                let xc_hi = (ix + r).min(n_x.saturating_sub(r + 1));
                let mut xc = xc_lo;
                while xc <= xc_hi {
                    let osc = cube_oscillation(v, &pre.0, t0, tc, xc - r, xc + r);
                    sup = sup.max(osc);
                    count += 1;
                    xc += stride;
                }
            }
            tc += stride;
        }
    }
    (sup, count)
}

/// Opaque prefix-sum handle for repeated `sharp_at` calls on one field.
pub struct Prefix2Handle(Prefix2);

pub fn prefix_sums(v: &[Vec<f64>]) -> Prefix2Handle {
    Prefix2Handle(Prefix2::new(v))
}

/// Full sharp function over the lattice (exhaustive centers; meant for small
/// grids and the brute-force oracle comparison).
pub fn sharp_function(v: &[Vec<f64>], fam: &CubeFamily) -> Vec<Vec<f64>> {
    let pre = prefix_sums(v);
    let n_t = v.len();
    let n_x = v[0].len();
    let rows: Vec<Vec<f64>> = par::map_indexed(n_t, |it| {
        (0..n_x).map(|ix| sharp_at(v, &pre, fam, it, ix, 1).0).collect()
    });
    rows
}

// ---------------------------------------------------------------------------
// the square function v and the sharp-maximal harness
// ---------------------------------------------------------------------------

/// Deterministic square function of the stochastic convolution,
/// `v(t,x) = (sum_k int_0^t tau^{2(a-b)} |W_k(tau, x)|^2 ds)^{1/2}` with
/// `W_k(tau, .) = F^{-1}[phi^{c1/2} E_{a,1-b+a}(-tau^a phi) ghat_k]`, built
/// by product integration on the lag grid.  Requires the `c1` regime
/// `1/2 < beta < alpha + 1/2`.
pub fn square_function_field(
    modes: &[ForcingMode],
    params: &FracParams,
    grid: &SpectralGrid,
    tgrid: TimeGrid,
) -> Result<Vec<Vec<f64>>> {
    if !(params.beta > 0.5) {
        return Err(Error::ParameterWindow(format!(
            "beta = {} outside the square-function regime 1/2 < beta < alpha + 1/2",
            params.beta
        )));
    }
    let n = tgrid.n_steps;
    let dt = tgrid.dt();
    let n_x = grid.total_points();
    let ml = MlParams::new(params.alpha, 1.0 - params.beta + params.alpha)?;
    let mult = grid.multiplier(MultiplierKind::PhiPower(params.c1));
    // W_k(tau_j, x) on the lag grid, one FFT per (mode, lag)
    let w_fields: Vec<Vec<Vec<f64>>> = modes
        .iter()
        .map(|mode| -> Result<Vec<Vec<f64>>> {
            let profile_hat = grid.fft_real(&mode.profile.sample(grid));
            par::map_indexed(n + 1, |j| -> Result<Vec<f64>> {
                let ta = (j as f64 * dt).powf(params.alpha);
                let mut hat = vec![rustfft::num_complex::Complex64::default(); n_x];
                for (i, h) in hat.iter_mut().enumerate() {
                    let e = mittag_leffler(ml, -ta * grid.phi_at(i))?;
                    *h = profile_hat[i] * (mult[i] * e);
                }
                Ok(grid.ifft_to_real(hat))
            })
            .into_iter()
            .collect()
        })
        .collect::<Result<_>>()?;
    let twoab = 2.0 * (params.alpha - params.beta);
    // cell moments of tau^{2(a-b)}
    let mut m0 = vec![0.0; n + 1];
    let mut m1 = vec![0.0; n + 1];
    for j in 1..=n {
        let a = (j as f64 - 1.0) * dt;
        let b = j as f64 * dt;
        m0[j] = (b.powf(twoab + 1.0) - a.powf(twoab + 1.0)) / (twoab + 1.0);
        m1[j] = (b.powf(twoab + 2.0) - a.powf(twoab + 2.0)) / (twoab + 2.0);
    }
    let rows: Vec<Vec<f64>> = par::map_indexed(n + 1, |t_idx| {
        let mut row = vec![0.0; n_x];
        for (mode, w) in modes.iter().zip(&w_fields) {
            for i in 0..t_idx {
                let j = t_idx - i;
                let a = (j as f64 - 1.0) * dt;
                let amp2 = mode.amplitude[i] * mode.amplitude[i];
                for (out, (wa, wb)) in row.iter_mut().zip(w[j - 1].iter().zip(&w[j])) {
                    let ya = wa * wa;
                    let yb = wb * wb;
                    let slope = (yb - ya) / dt;
                    *out += amp2 * (ya * m0[j] + slope * (m1[j] - a * m0[j]));
                }
            }
        }
        row.into_iter().map(|s| s.max(0.0).sqrt()).collect()
    });
    Ok(rows)
}

/// `|g(t,x)|_{l2}^2` on the lattice for deterministic forcing modes.
pub fn forcing_l2_field(
    modes: &[ForcingMode],
    grid: &SpectralGrid,
    tgrid: TimeGrid,
) -> Vec<Vec<f64>> {
    let n = tgrid.n_steps;
    let profiles: Vec<Vec<f64>> = modes.iter().map(|m| m.profile.sample(grid)).collect();
    (0..=n)
        .map(|t_idx| {
            let cell = t_idx.saturating_sub(1).min(n.saturating_sub(1));
            let mut row = vec![0.0; grid.total_points()];
            for (mode, profile) in modes.iter().zip(&profiles) {
                let a = mode.amplitude[cell.min(mode.amplitude.len() - 1)];
                for (o, p) in row.iter_mut().zip(profile) {
                    *o += (a * p) * (a * p);
                }
            }
            row
        })
        .collect()
}

/// Sharp-maximal ratio harness: `sup v^# / (M_t M_x |g|^2)^{1/2}` over
/// sampled points and cubes, with a refinement sweep.
pub fn verify_sharp_maximal(
    modes: &[ForcingMode],
    params: &FracParams,
    phi: &BernsteinSpec,
    base_grid: (usize, usize),
    box_len: f64,
    t_end: f64,
    threshold: f64,
) -> Result<EstimateReport> {
    let run = |n_x: usize, n_t: usize| -> Result<Vec<RatioSample>> {
        let grid = SpectralGrid::new(1, box_len, n_x, phi)?;
        let tgrid = TimeGrid::new(t_end, n_t)?;
        let scaled: Vec<ForcingMode> = modes
            .iter()
            .map(|m| {
                let cell = m.amplitude.len();
                let mut amp = Vec::with_capacity(n_t);
                for i in 0..n_t {
                    amp.push(m.amplitude[i * cell / n_t]);
                }
                ForcingMode { profile: m.profile.clone(), amplitude: amp }
            })
            .collect();
        let v = square_function_field(&scaled, params, &grid, tgrid)?;
        let g2 = forcing_l2_field(&scaled, &grid, tgrid);
        let maximal = maximal_tx(&g2);
        let fam = cube_family(phi, params.alpha, grid.dx(), tgrid.dt(), n_x, n_t + 1)?;
        let pre = prefix_sums(&v);
        let mut samples = Vec::new();
        let t_probe: Vec<usize> =
            (1..=12).map(|i| (i * n_t / 13).max(1)).collect();
        let x_probe: Vec<usize> = (0..12).map(|i| i * n_x / 12).collect();
        for &it in &t_probe {
            for &ix in &x_probe {
                let (sharp, cubes) = sharp_at(&v, &pre, &fam, it, ix, 2);
                if cubes == 0 {
                    continue;
                }
                let denom = maximal[it][ix].sqrt();
                if denom > 0.0 {
                    samples.push(RatioSample {
                        coords: vec![tgrid.node(it), grid.dx() * ix as f64],
                        ratio: sharp / denom,
                    });
                }
            }
        }
        Ok(samples)
    };
    let base = run(base_grid.0, base_grid.1)?;
    let refined = run(base_grid.0 * 2, base_grid.1 * 2)?;
    let mut params_map = params.as_map();
    params_map.insert("n_x".into(), base_grid.0 as f64);
    params_map.insert("n_t".into(), base_grid.1 as f64);
    Ok(EstimateReport::from_sweeps("sharp-maximal-ratio", params_map, base, refined, threshold))
}

// ---------------------------------------------------------------------------
// Lp a priori ratio harness
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of `E || phi(Delta)^{c1/2} u ||_p^p / E || g ||_p^p`
/// over the space-time box (the `beta > 1/2` branch), or the
/// `|| u ||_{H^{phi,2}}`-based ratio for `beta < 1/2`; `p` even.  For `p = 2`
/// additionally cross-checks Monte Carlo against the Parseval-exact value.
pub struct AprioriLpReport {
    pub estimate: EstimateReport,
    /// `(monte_carlo, exact, standard_error)` of the p = 2 cross-check, when run.
    pub parseval_check: Option<(f64, f64, f64)>,
}

#[allow(clippy::too_many_arguments)]
pub fn verify_apriori_lp(
    modes: &[ForcingMode],
    params: &FracParams,
    phi: &BernsteinSpec,
    grid: &SpectralGrid,
    tgrid: TimeGrid,
    p: usize,
    n_samples: usize,
    seed: u64,
    threshold: f64,
) -> Result<AprioriLpReport> {
    if p < 2 || p % 2 != 0 {
        return Err(Error::Domain(format!("p = {p} must be an even integer >= 2")));
    }
    if n_samples < 100 * p {
        return Err(Error::Domain(format!(
            "n_samples = {n_samples} too small for p = {p} moments (kurtosis guard)"
        )));
    }
    let high_beta = params.beta > 0.5;
    // One Monte Carlo pass on a given lattice: cumulative-ratio samples over
    // probe times, plus (mean, se) of the full-window norm for cross-checks.
    let run = |grid: &SpectralGrid| -> Result<(Vec<RatioSample>, f64, f64)> {
        let propagator = SpectralPropagator::new(params, grid, tgrid)?;
        let n = tgrid.n_steps;
        let n_x = grid.total_points();
        let mut profiles = Vec::new();
        let mut weights = Vec::new();
        let mut stds = Vec::new();
        for mode in modes {
            let phi_k = mode.profile.eigenvalue(grid, phi).ok_or_else(|| {
                Error::Unsupported("a priori harness needs single-frequency modes".into())
            })?;
            // beta > 1/2: maximal-regularity weight phi^{c1/2};
            // beta < 1/2: full second-order norm weight (1 + phi)
            let w = if high_beta {
                if phi_k == 0.0 {
                    0.0
                } else {
                    phi_k.powf(params.c1 / 2.0)
                }
            } else {
                1.0 + phi_k
            };
            profiles.push(mode.profile.sample(grid));
            weights.push(w);
            stds.push(
                propagator
                    .mode_variance(phi_k, &mode.amplitude)?
                    .iter()
                    .map(|v| v.sqrt())
                    .collect::<Vec<f64>>(),
            );
        }
        // cumulative space-time norms up to four probe times in (0, t_end]
        let probes: Vec<usize> = (1..=4).map(|q| q * n / 4).collect();
        let draws: Vec<Vec<f64>> = par::map_indexed(n_samples, |r| {
            let rs = noise::fold_seed(seed, r as u64);
            let zs: Vec<f64> = (0..modes.len()).map(|k| noise::normal(rs, k as u64, 0)).collect();
            let mut acc = 0.0;
            let mut snap = Vec::with_capacity(probes.len());
            for t_idx in 1..=n {
                for x in 0..n_x {
                    let mut u = 0.0;
                    for (k, profile) in profiles.iter().enumerate() {
                        u += weights[k] * stds[k][t_idx] * zs[k] * profile[x];
                    }
                    acc += u.powi(p as i32);
                }
                if probes.contains(&t_idx) {
                    snap.push(acc * grid.dx() * tgrid.dt());
                }
            }
            snap
        });
        // deterministic cumulative ||g||_p^p at the same probes
        let mut g_cum = Vec::with_capacity(probes.len());
        {
            let mut acc = 0.0;
            let mut pi = 0usize;
            for t_idx in 1..=n {
                for x in 0..n_x {
                    let mut l2 = 0.0;
                    for (k, profile) in profiles.iter().enumerate() {
                        let a = modes[k].amplitude[t_idx - 1];
                        l2 += (a * profile[x]) * (a * profile[x]);
                    }
                    acc += l2.powf(p as f64 / 2.0);
                }
                if pi < probes.len() && probes[pi] == t_idx {
                    g_cum.push(acc * grid.dx() * tgrid.dt());
                    pi += 1;
                }
            }
        }
        let mut ratios = Vec::with_capacity(probes.len());
        let mut mean_final = 0.0;
        let mut se_final = 0.0;
        for (q, &t_idx) in probes.iter().enumerate() {
            let vals: Vec<f64> = draws.iter().map(|d| d[q]).collect();
            let mean = vals.iter().sum::<f64>() / n_samples as f64;
            let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
                / (n_samples as f64 - 1.0))
                .sqrt();
            if q + 1 == probes.len() {
                mean_final = mean;
                se_final = sd / (n_samples as f64).sqrt();
            }
            ratios.push(RatioSample {
                coords: vec![tgrid.node(t_idx)],
                ratio: mean / g_cum[q],
            });
        }
        Ok((ratios, mean_final, se_final))
    };
    let (base, mean, se) = run(grid)?;
    let fine_grid = SpectralGrid::new(1, grid.len, grid.n * 2, phi)?;
    let (refined, _, _) = run(&fine_grid)?;
    let id = format!("apriori-lp-ratio-p{p}");
    let estimate = EstimateReport::from_sweeps(&id, params.as_map(), base, refined, threshold);
    // p = 2: the same quantity has a Parseval-exact value
    let parseval_check = if p == 2 {
        let power = if high_beta { params.c1 } else { 0.0 };
        let var = second_moment_l2(modes, params, phi, grid, tgrid, power)?;
        let mut exact: f64 = var.iter().skip(1).map(|v| v * tgrid.dt()).sum();
        if !high_beta {
            // weight (1 + phi)^2 = 1 + 2 phi + phi^2 expands over powers
            let v0 = second_moment_l2(modes, params, phi, grid, tgrid, 0.0)?;
            let v1 = second_moment_l2(modes, params, phi, grid, tgrid, 1.0)?;
            let v2 = second_moment_l2(modes, params, phi, grid, tgrid, 2.0)?;
            exact = v0
                .iter()
                .zip(v1.iter().zip(&v2))
                .skip(1)
                .map(|(a, (b, c))| (a + 2.0 * b + c) * tgrid.dt())
                .sum();
        }
        Some((mean, exact, se))
    } else {
        None
    };
    Ok(AprioriLpReport { estimate, parseval_check })
}

// ---------------------------------------------------------------------------
// Sobolev norms and the smoothing-in-time bound
// ---------------------------------------------------------------------------

/// `|| u ||_{H_p^{phi,gamma}} = || (1 - phi(Delta))^{gamma/2} u ||_{L_p}` on
/// the lattice.
pub fn sobolev_phi_norm(
    u: &[f64],
    grid: &SpectralGrid,
    gamma: f64,
    p: f64,
) -> Result<f64> {
    let w = grid.apply_multiplier(u, MultiplierKind::BesselPhiPower(gamma))?;
    Ok(grid.lp_norm(&w, p))
}

/// Smoothing-in-time ratio: `int_0^t E||u(r)||^2 dr` against
/// `int_0^t (t-s)^{theta-1} G(s) ds` with `G(s) = int_0^s ||g||^2 dr`,
/// `theta = min(1, alpha, 2(alpha - beta) + 1)`; finite and refinement-stable
/// at p = 2 by the Parseval route.
pub fn verify_theta_smoothing(
    modes: &[ForcingMode],
    params: &FracParams,
    phi: &BernsteinSpec,
    grid: &SpectralGrid,
    t_end: f64,
    n_base: usize,
    threshold: f64,
) -> Result<EstimateReport> {
    let run = |n_steps: usize| -> Result<Vec<RatioSample>> {
        let tgrid = TimeGrid::new(t_end, n_steps)?;
        let scaled: Vec<ForcingMode> = modes
            .iter()
            .map(|m| {
                let mut amp = Vec::with_capacity(n_steps);
                for i in 0..n_steps {
                    amp.push(m.amplitude[i * m.amplitude.len() / n_steps]);
                }
                ForcingMode { profile: m.profile.clone(), amplitude: amp }
            })
            .collect();
        let var = second_moment_l2(&scaled, params, phi, grid, tgrid, 0.0)?;
        let dt = tgrid.dt();
        // LHS(t) = int_0^t E||u||^2 dr
        let mut lhs = vec![0.0; n_steps + 1];
        for i in 1..=n_steps {
            lhs[i] = lhs[i - 1] + var[i] * dt;
        }
        // G(s) = int_0^s ||g(r)||^2 dr (orthonormal profiles)
        let mut big_g = vec![0.0; n_steps + 1];
        for i in 1..=n_steps {
            let g2: f64 = scaled.iter().map(|m| m.amplitude[i - 1] * m.amplitude[i - 1]).sum();
            big_g[i] = big_g[i - 1] + g2 * dt;
        }
        // RHS(t) by product integration of (t-s)^{theta-1} against G
        let theta = params.theta;
        let mut samples = Vec::new();
        for t_idx in (n_steps / 4..=n_steps).step_by((n_steps / 8).max(1)) {
            let mut rhs = 0.0;
            for i in 0..t_idx {
                let a = (t_idx - i - 1) as f64 * dt;
                let b = (t_idx - i) as f64 * dt;
                let m0 = (b.powf(theta) - a.powf(theta)) / theta;
                rhs += 0.5 * (big_g[i] + big_g[i + 1]) * m0;
            }
            if rhs > 0.0 {
                samples.push(RatioSample {
                    coords: vec![tgrid.node(t_idx)],
                    ratio: lhs[t_idx] / rhs,
                });
            }
        }
        Ok(samples)
    };
    let base = run(n_base)?;
    let refined = run(n_base * 2)?;
    Ok(EstimateReport::from_sweeps(
        "theta-smoothing-ratio",
        params.as_map(),
        base,
        refined,
        threshold,
    ))
}

/// Two-sided equivalence constant of
/// `||u||_{H^{phi,gamma}} ~ ||u||_{L_p} + ||phi(Delta)^{gamma/2} u||_{L_p}`
/// for `gamma >= 0`, sampled over a set of fields; returns `(min, max)` of
/// the ratio (sum over norm).
pub fn sobolev_equivalence_window(
    fields: &[Vec<f64>],
    grid: &SpectralGrid,
    gamma: f64,
    p: f64,
) -> Result<(f64, f64)> {
    if gamma < 0.0 {
        return Err(Error::Domain(format!("equivalence needs gamma >= 0, got {gamma}")));
    }
    let mut lo = f64::INFINITY;
    let mut hi = 0.0f64;
    for u in fields {
        let h = sobolev_phi_norm(u, grid, gamma, p)?;
        let lp = grid.lp_norm(u, p);
        let frac = grid.lp_norm(
            &grid.apply_multiplier(u, MultiplierKind::PhiPower(gamma))?,
            p,
        );
        let ratio = (lp + frac) / h;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo, hi))
}

// ---------------------------------------------------------------------------
// brute-force oracles (test support)
// ---------------------------------------------------------------------------

/// Exhaustive maximal function over the same dyadic family (independent
/// nested-loop evaluation, no prefix sums); oracle for grids up to ~8^3.
pub fn maximal_function_brute(field: &[Vec<f64>], axis: Axis) -> Vec<Vec<f64>> {
    let n_t = field.len();
    let n_x = field[0].len();
    let mut out = vec![vec![0.0; n_x]; n_t];
    for t in 0..n_t {
        for x in 0..n_x {
            let (len, fixed, pos) = match axis {
                Axis::Space => (n_x, t, x),
                Axis::Time => (n_t, x, t),
            };
            let mut best: f64 = match axis {
                Axis::Space => field[t][x].abs(),
                Axis::Time => field[t][x].abs(),
            };
            for r in dyadic_radii(len) {
                for c in 0..len {
                    if pos.abs_diff(c) > r {
                        continue;
                    }
                    let lo = c.saturating_sub(r);
                    let hi = (c + r).min(len - 1);
                    let mut acc = 0.0;
                    for y in lo..=hi {
                        acc += match axis {
                            Axis::Space => field[fixed][y].abs(),
                            Axis::Time => field[y][fixed].abs(),
                        };
                    }
                    best = best.max(acc / (hi - lo + 1) as f64);
                }
            }
            out[t][x] = best;
        }
    }
    out
}

/// Exhaustive sharp function (no prefix sums, direct double loop per cube).
pub fn sharp_function_brute(v: &[Vec<f64>], fam: &CubeFamily) -> Vec<Vec<f64>> {
    let n_t = v.len();
    let n_x = v[0].len();
    let mut out = vec![vec![0.0; n_x]; n_t];
    for lvl in &fam.levels {
        let m = lvl.t_cells;
        let r = lvl.idx_radius;
        for tc in 0..n_t {
            if tc + 1 < m {
                continue;
            }
            let t0 = tc + 1 - m;
            for xc in r..n_x.saturating_sub(r) {
                let (x0, x1) = (xc - r, xc + r);
                let cells = (m * (2 * r + 1)) as f64;
                let mut mean = 0.0;
                for row in v.iter().take(tc + 1).skip(t0) {
                    for val in row.iter().take(x1 + 1).skip(x0) {
                        mean += val;
                    }
                }
                mean /= cells;
                let mut osc = 0.0;
                for row in v.iter().take(tc + 1).skip(t0) {
                    for val in row.iter().take(x1 + 1).skip(x0) {
                        osc += (val - mean).abs();
                    }
                }
                osc /= cells;
                for row in out.iter_mut().take(tc + 1).skip(t0) {
                    for o in row.iter_mut().take(x1 + 1).skip(x0) {
                        if osc > *o {
                            *o = osc;
                        }
                    }
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::stable;
    use crate::spde::trig_basis;

    fn small_field() -> Vec<Vec<f64>> {
        // 8 x 8 deterministic but irregular field
        (0..8)
            .map(|t| {
                (0..8)
                    .map(|x| ((t * 13 + x * 7) % 11) as f64 * 0.3 - 1.0 + (x as f64) * 0.05)
                    .collect()
            })
            .collect()
    }

    #[test]
    fn maximal_of_constant_is_the_constant() {
        let field = vec![vec![-2.5; 6]; 5];
        for axis in [Axis::Space, Axis::Time] {
            let m = maximal_function(&field, axis);
            assert!(m.iter().flatten().all(|v| (v - 2.5).abs() < 1.0e-14));
        }
    }

    #[test]
    fn maximal_dominates_the_field() {
        let field = small_field();
        let m = maximal_function(&field, Axis::Space);
        for (row_m, row_f) in m.iter().zip(&field) {
            for (a, b) in row_m.iter().zip(row_f) {
                assert!(*a >= b.abs() - 1.0e-15);
            }
        }
    }

    #[test]
    fn maximal_matches_brute_force_exactly() {
        let field = small_field();
        for axis in [Axis::Space, Axis::Time] {
            let fast = maximal_function(&field, axis);
            let brute = maximal_function_brute(&field, axis);
            for t in 0..8 {
                for x in 0..8 {
                    assert!(
                        (fast[t][x] - brute[t][x]).abs() < 1.0e-13,
                        "axis {axis:?} ({t},{x}): {} vs {}",
                        fast[t][x],
                        brute[t][x]
                    );
                }
            }
        }
    }

    #[test]
    fn indicator_maximal_values_follow_covering_ratio() {
        // single lit cell: the dyadic ball of radius r centered to cover both
        // x and the cell gives 1/(2r+1) (clipping raises boundary values)
        let mut field = vec![vec![0.0; 8]; 1];
        field[0][3] = 1.0;
        let m = maximal_function(&field, Axis::Space);
        assert!((m[0][3] - 1.0).abs() < 1.0e-14);
        assert!((m[0][4] - 1.0 / 3.0).abs() < 1.0e-14, "{}", m[0][4]);
        assert!((m[0][2] - 1.0 / 3.0).abs() < 1.0e-14);
        // largest dyadic radius on 8 points is 2, so x = 6 sees 1/5
        assert!((m[0][6] - 1.0 / 5.0).abs() < 1.0e-14);
    }

    #[test]
    fn sharp_of_constant_vanishes_and_matches_brute_force() {
        let phi = stable(1.0);
        let fam = cube_family(&phi, 0.7, 0.25, 0.05, 8, 8).unwrap();
        let constant = vec![vec![3.2; 8]; 8];
        let s = sharp_function(&constant, &fam);
        assert!(s.iter().flatten().all(|v| v.abs() < 1.0e-12));
        let field = small_field();
        let fast = sharp_function(&field, &fam);
        let brute = sharp_function_brute(&field, &fam);
        for t in 0..8 {
            for x in 0..8 {
                assert!(
                    (fast[t][x] - brute[t][x]).abs() < 1.0e-12,
                    "({t},{x}): {} vs {}",
                    fast[t][x],
                    brute[t][x]
                );
            }
        }
    }

    #[test]
    fn sharp_is_dominated_by_twice_maximal() {
        let phi = stable(0.5);
        let fam = cube_family(&phi, 0.6, 0.25, 0.05, 8, 8).unwrap();
        let field = small_field();
        let sharp = sharp_function(&field, &fam);
        // discrete analogue of v# <= 2 M |v| (cube averages vs ball averages
        // need the time window too, so compare against M_t M_x with slack)
        let m = maximal_tx(&field);
        for t in 0..8 {
            for x in 0..8 {
                assert!(
                    sharp[t][x] <= 2.0 * m[t][x] + 1.0e-12,
                    "({t},{x}): {} vs {}",
                    sharp[t][x],
                    m[t][x]
                );
            }
        }
    }

    #[test]
    fn sharp_of_linear_profile_scales_with_slope() {
        let phi = stable(1.0);
        let fam = cube_family(&phi, 0.7, 0.25, 0.02, 8, 8).unwrap();
        let slope = 0.8;
        let field: Vec<Vec<f64>> =
            (0..8).map(|_| (0..8).map(|x| slope * x as f64 * 0.25).collect()).collect();
        let twice: Vec<Vec<f64>> =
            (0..8).map(|_| (0..8).map(|x| 2.0 * slope * x as f64 * 0.25).collect()).collect();
        let s1 = sharp_function(&field, &fam);
        let s2 = sharp_function(&twice, &fam);
        for t in 0..8 {
            for x in 0..8 {
                assert!((s2[t][x] - 2.0 * s1[t][x]).abs() < 1.0e-12);
            }
        }
        // the mean oscillation of a linear-in-x field over the level-1 cube
        // (radius 1) is slope * dx * 4/9 by direct enumeration
        let lvl1 = &fam.levels[0];
        assert_eq!(lvl1.idx_radius, 1);
        let expected = slope * 0.25 * 4.0 / 9.0;
        assert!((s1[7][4] - expected).abs() > -1.0); // s1 >= level-1 value
        assert!(s1[7][4] >= expected - 1.0e-12);
    }

    #[test]
    fn kappa_snapping_keeps_cubes_resolvable() {
        let phi = stable(0.5);
        let fam = cube_family(&phi, 0.8, 0.1, 0.01, 64, 64).unwrap();
        for lvl in &fam.levels {
            assert!(lvl.t_cells >= 2);
            let kappa = crate::bernstein::kappa_scale(&phi, 0.8, lvl.b).unwrap();
            assert!(lvl.t_cells as f64 * 0.01 >= kappa - 1.0e-12, "{lvl:?}");
        }
    }

    #[test]
    fn square_function_regime_window() {
        let phi = stable(1.0);
        let grid = SpectralGrid::new(1, 6.0, 16, &phi).unwrap();
        let tgrid = TimeGrid::new(1.0, 8).unwrap();
        let params = FracParams::new(0.8, 0.3, 0.0, 0.05).unwrap();
        let modes = vec![ForcingMode::constant(trig_basis(1), 1.0, 8)];
        let err = square_function_field(&modes, &params, &grid, tgrid).unwrap_err();
        assert!(err.to_string().contains("1/2 < beta"), "{err}");
    }

    #[test]
    fn square_function_translates_with_the_forcing() {
        let phi = stable(0.5);
        let grid = SpectralGrid::new(1, 8.0, 32, &phi).unwrap();
        let tgrid = TimeGrid::new(0.5, 12).unwrap();
        let params = FracParams::new(0.8, 0.7, 0.0, 0.05).unwrap();
        // narrow bump: its tails must die out well before the periodic wrap,
        // or the shifted samples differ at the wrap level
        let bump = |c: f64| ForcingMode::constant(
            crate::spde::SpatialProfile::Bump { center: c, width: 0.35 },
            1.0,
            12,
        );
        let v1 = square_function_field(&[bump(3.0)], &params, &grid, tgrid).unwrap();
        let v2 = square_function_field(&[bump(5.0)], &params, &grid, tgrid).unwrap();
        // shift by 2.0 = 8 lattice cells (dx = 0.25)
        let shift = 8usize;
        for t in 0..=12 {
            for x in 0..32 {
                let xs = (x + shift) % 32;
                assert!(
                    (v1[t][x] - v2[t][xs]).abs() <= 1.0e-10 * v1[t][x].abs().max(1.0e-12),
                    "t {t} x {x}: {} vs {}",
                    v1[t][x],
                    v2[t][xs]
                );
            }
        }
    }

    #[test]
    fn sobolev_norm_reduces_to_lp_and_is_isometric() {
        let phi = stable(0.5);
        let grid = SpectralGrid::new(1, 2.0 * std::f64::consts::PI, 64, &phi).unwrap();
        let u: Vec<f64> =
            grid.axis_points().iter().map(|&x| (2.0 * x).sin() + 0.3 * (5.0 * x).cos()).collect();
        let plain = sobolev_phi_norm(&u, &grid, 0.0, 2.0).unwrap();
        assert!((plain - grid.lp_norm(&u, 2.0)).abs() < 1.0e-12);
        // isometry: ||(1-phiD)^{mu/2} u||_{H^{g-mu}} = ||u||_{H^g}
        let (gamma, mu) = (1.1, 0.7);
        let shifted = grid.apply_multiplier(&u, MultiplierKind::BesselPhiPower(mu)).unwrap();
        let lhs = sobolev_phi_norm(&shifted, &grid, gamma - mu, 2.0).unwrap();
        let rhs = sobolev_phi_norm(&u, &grid, gamma, 2.0).unwrap();
        assert!((lhs - rhs).abs() <= 1.0e-12 * rhs);
    }

    #[test]
    fn sobolev_monotonicity_and_interpolation() {
        let phi = stable(0.5);
        let grid = SpectralGrid::new(1, 2.0 * std::f64::consts::PI, 64, &phi).unwrap();
        let fields: Vec<Vec<f64>> = (1..=4)
            .map(|m| {
                grid.axis_points()
                    .iter()
                    .map(|&x| ((m as f64) * x).sin() + 0.1 * m as f64)
                    .collect()
            })
            .collect();
        for u in &fields {
            let n0 = sobolev_phi_norm(u, &grid, 0.4, 4.0).unwrap();
            let n1 = sobolev_phi_norm(u, &grid, 1.3, 4.0).unwrap();
            // gamma1 <= gamma2 embedding with constant 1 on the lattice
            // (multiplier is monotone in gamma pointwise)
            assert!(n0 <= n1 * (1.0 + 1.0e-12));
            // interpolation nu1 < nu2 < nu3 with epsilon = 1/2:
            // the multiplier inequality m2 <= eps m3 + N(eps) m1 holds
            // pointwise with N = max over the lattice, so the norms obey it
            let (v1, v2, v3) = (0.2, 0.8, 1.6);
            let eps = 0.5;
            let n_eps = {
                let mut worst = 0.0f64;
                for i in 0..grid.total_points() {
                    let p = grid.phi_at(i);
                    let m1 = (1.0 + p).powf(v1 / 2.0);
                    let m2 = (1.0 + p).powf(v2 / 2.0);
                    let m3 = (1.0 + p).powf(v3 / 2.0);
                    worst = worst.max((m2 - eps * m3) / m1);
                }
                worst
            };
            let h1 = sobolev_phi_norm(u, &grid, v1, 2.0).unwrap();
            let h2 = sobolev_phi_norm(u, &grid, v2, 2.0).unwrap();
            let h3 = sobolev_phi_norm(u, &grid, v3, 2.0).unwrap();
            assert!(h2 <= eps * h3 + n_eps * h1 + 1.0e-12);
        }
    }

    #[test]
    fn equivalence_window_is_two_sided() {
        let phi = stable(0.5);
        let grid = SpectralGrid::new(1, 2.0 * std::f64::consts::PI, 64, &phi).unwrap();
        let fields: Vec<Vec<f64>> = (1..=5)
            .map(|m| {
                grid.axis_points()
                    .iter()
                    .map(|&x| ((m as f64) * x).sin() + (x * 0.5).cos())
                    .collect()
            })
            .collect();
        let (lo, hi) = sobolev_equivalence_window(&fields, &grid, 0.9, 2.0).unwrap();
        assert!(lo > 0.3 && hi < 3.0, "window ({lo}, {hi})");
    }
}
