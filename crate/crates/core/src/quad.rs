//! Adaptive Gauss-Kronrod quadrature plus the oscillatory helpers used by the
//! radial Fourier inversions: piecewise-linear Filon moments, Abel-regularized
//! polynomial tails, and Euler-accelerated half-period summation.

use crate::{Error, Result};
use rustfft::num_complex::Complex64;

/// 15-point Kronrod abscissae on `[-1, 1]` (positive half).
const XGK: [f64; 8] = [
    0.991_455_371_120_813,
    0.949_107_912_342_759,
    0.864_864_423_359_769,
    0.741_531_185_599_394,
    0.586_087_235_467_691,
    0.405_845_151_377_397,
    0.207_784_955_007_898,
    0.000_000_000_000_000,
];

/// Kronrod weights matching [`XGK`].
const WGK: [f64; 8] = [
    0.022_935_322_010_529,
    0.063_092_092_629_979,
    0.104_790_010_322_250,
    0.140_653_259_715_525,
    0.169_004_726_639_267,
    0.190_350_578_064_785,
    0.204_432_940_075_298,
    0.209_482_141_084_728,
];

/// Embedded 7-point Gauss weights (for the odd-indexed Kronrod abscissae).
const WG: [f64; 4] = [
    0.129_484_966_168_870,
    0.279_705_391_489_277,
    0.381_830_050_505_119,
    0.417_959_183_673_469,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub abs_err: f64,
    pub evals: usize,
}

fn qk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let f1 = f(c - x);
        let f2 = f(c + x);
        kron += WGK[j] * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    kron *= h;
    gauss *= h;
    (kron, (kron - gauss).abs())
}

/// Adaptive Gauss-Kronrod integration of `f` over `[a, b]`.
///
/// `seeds` are interior points where the integrand is known to be peaked or
/// kinked; the initial partition is split there.
pub fn gk_adaptive<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    seeds: &[f64],
) -> Result<QuadResult> {
    if !(a.is_finite() && b.is_finite()) || b <= a {
        return Err(Error::Domain(format!("bad interval [{a}, {b}]")));
    }
    let mut cuts: Vec<f64> = std::iter::once(a)
        .chain(seeds.iter().copied().filter(|&s| s > a && s < b))
        .chain(std::iter::once(b))
        .collect();
    cuts.sort_by(|p, q| p.partial_cmp(q).unwrap());
    cuts.dedup();

    // (err, lo, hi, val) max-heap by error, implemented on a Vec.
    let mut segs: Vec<(f64, f64, f64, f64)> = Vec::new();
    let mut evals = 0usize;
    for w in cuts.windows(2) {
        let (v, e) = qk15(&f, w[0], w[1]);
        evals += 15;
        segs.push((e, w[0], w[1], v));
    }
    const MAX_SEGS: usize = 4000;
    loop {
        let total: f64 = segs.iter().map(|s| s.3).sum();
        let err: f64 = segs.iter().map(|s| s.0).sum();
        let sum_abs: f64 = segs.iter().map(|s| s.3.abs()).sum();
        // the rounding floor of a cancelling integral is set by sum_abs; the
        // error estimator itself is noise at that level
        if err <= abs_tol + rel_tol * total.abs() || err <= 2.0e-14 * sum_abs {
            return Ok(QuadResult { value: total, abs_err: err, evals });
        }
        if segs.len() >= MAX_SEGS {
            // Tiny residual error relative to scale still counts as success.
            if err <= 1.0e-7 * total.abs().max(abs_tol.max(1.0e-300)) {
                return Ok(QuadResult { value: total, abs_err: err, evals });
            }
            return Err(Error::Quadrature(format!(
                "gk_adaptive: {MAX_SEGS} segments, err {err:.3e} vs value {total:.6e} on [{a}, {b}]"
            )));
        }
        let worst = segs
            .iter()
            .enumerate()
            .max_by(|p, q| p.1 .0.partial_cmp(&q.1 .0).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let (_, lo, hi, _) = segs.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Quadrature(format!(
                "gk_adaptive: interval [{lo}, {hi}] no longer splittable"
            )));
        }
        let (v1, e1) = qk15(&f, lo, mid);
        let (v2, e2) = qk15(&f, mid, hi);
        evals += 30;
        segs.push((e1, lo, mid, v1));
        segs.push((e2, mid, hi, v2));
    }
}

/// Integrate `f` over `[a, inf)` for an integrand that decays to zero.
///
/// Geometrically growing panels, each resolved adaptively; stops once the
/// running panel contributions fall below the tolerance and below `1e-14`
/// of the largest panel seen.
pub fn gk_to_inf<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    scale: f64,
    rel_tol: f64,
    abs_tol: f64,
) -> Result<QuadResult> {
    let scale = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
    let mut lo = a;
    let mut width = scale;
    let mut total = 0.0;
    let mut err = 0.0;
    let mut evals = 0usize;
    let mut peak = 0.0f64;
    let mut quiet = 0;
    for _ in 0..200 {
        let hi = lo + width;
        let r = gk_adaptive(&f, lo, hi, rel_tol, abs_tol * 0.1, &[])?;
        total += r.value;
        err += r.abs_err;
        evals += r.evals;
        peak = peak.max(r.value.abs());
        let small = r.value.abs() <= (rel_tol * total.abs()).max(abs_tol) * 0.1
            && r.value.abs() <= 1.0e-14_f64.max(rel_tol) * peak.max(1.0e-300);
        quiet = if small { quiet + 1 } else { 0 };
        if quiet >= 3 {
            return Ok(QuadResult { value: total, abs_err: err, evals });
        }
        lo = hi;
        width *= 2.0;
    }
    Err(Error::Quadrature(format!(
        "gk_to_inf: integrand from {a} did not die off (last interval end {lo:.3e})"
    )))
}

/// Oscillation kind for the radial transforms.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trig {
    Cos,
    Sin,
}

/// Incremental van Wijngaarden-Euler summation of an alternating series.
/// Converges to the Abel sum for alternating sequences with polynomially
/// growing or slowly decaying envelopes, which is exactly the distributional
/// value of the oscillatory tails handled here.
#[derive(Debug, Default)]
pub struct EulerSum {
    wksp: Vec<f64>,
    nterm: usize,
    sum: f64,
}

impl EulerSum {
    pub fn new() -> Self {
        Self::default()
    }

    /// Feed the next term; returns the current accelerated estimate.
    pub fn push(&mut self, term: f64) -> f64 {
        if self.wksp.is_empty() {
            self.nterm = 1;
            self.wksp.push(term);
            self.sum = 0.5 * term;
            return self.sum;
        }
        let mut tmp = self.wksp[0];
        self.wksp[0] = term;
        for j in 0..self.nterm - 1 {
            let dum = self.wksp[j + 1];
            self.wksp[j + 1] = 0.5 * (self.wksp[j] + tmp);
            tmp = dum;
        }
        let next = 0.5 * (self.wksp[self.nterm - 1] + tmp);
        if self.wksp.len() <= self.nterm {
            self.wksp.push(next);
        } else {
            self.wksp[self.nterm] = next;
        }
        if next.abs() <= self.wksp[self.nterm - 1].abs() {
            self.sum += 0.5 * next;
            self.nterm += 1;
        } else {
            self.sum += next;
        }
        self.sum
    }

    pub fn value(&self) -> f64 {
        self.sum
    }
}

/// One-shot accelerated limit of an alternating series.
pub fn euler_limit(terms: &[f64]) -> f64 {
    let mut acc = EulerSum::new();
    let mut v = 0.0;
    for &t in terms {
        v = acc.push(t);
    }
    v
}

/// 7-point Gauss-Legendre on `[a, b]` (fixed, non-adaptive).
pub fn gl7<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut s = WG[3] * f(c);
    for j in 0..3 {
        let x = h * XGK[2 * j + 1];
        s += WG[j] * (f(c - x) + f(c + x));
    }
    s * h
}

/// Abel-regularized semi-infinite oscillatory integral
/// `int_a^inf f(x) * trig(omega x) dx` for an `f` that is smooth and at most
/// polynomially growing on half-period scales.  Panels of width `pi/omega`
/// are integrated by fixed Gauss-Legendre and the alternating panel series is
/// Euler-accelerated.
pub fn osc_to_inf<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    omega: f64,
    trig: Trig,
    rel_tol: f64,
    floor: f64,
) -> Result<f64> {
    assert!(omega > 0.0);
    let hp = std::f64::consts::PI / omega;
    let g = |x: f64| {
        let ph = omega * x;
        f(x) * match trig {
            Trig::Cos => ph.cos(),
            Trig::Sin => ph.sin(),
        }
    };
    let mut acc = EulerSum::new();
    let mut lo = a;
    let mut prev = f64::NAN;
    let mut quiet = 0;
    let mut last = f64::NAN;
    for j in 1..=600usize {
        // early panels adaptively (the envelope may still curve), fixed-order
        // Gauss once several periods out
        let panel = if j <= 12 {
            gk_adaptive(&g, lo, lo + hp, 1.0e-13, 1.0e-13 * floor, &[])?.value
        } else {
            gl7(&g, lo, lo + hp)
        };
        let est = acc.push(panel);
        lo += hp;
        if j >= 6 {
            let scale = est.abs().max(floor);
            if prev.is_finite() && (est - prev).abs() <= rel_tol * scale {
                quiet += 1;
                if quiet >= 3 {
                    return Ok(est);
                }
            } else {
                quiet = 0;
            }
            prev = est;
        }
        last = est;
    }
    if prev.is_finite() && (last - prev).abs() <= 1.0e-6 * last.abs().max(floor) {
        return Ok(last);
    }
    Err(Error::Quadrature(format!(
        "osc_to_inf: tail from {a} (omega {omega:.3e}) did not settle"
    )))
}

/// Complex antiderivative of `xi^j e^{i x xi}`, valid for `x != 0`, `j <= 5`.
fn poly_trig_antideriv(xi: f64, j: usize, x: f64) -> Complex64 {
    debug_assert!(j <= 5);
    let ix = Complex64::new(0.0, x);
    let e = Complex64::new(0.0, x * xi).exp();
    let mut s = Complex64::new(0.0, 0.0);
    let mut fact = 1.0; // j! / (j-l)!
    for l in 0..=j {
        let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
        s += sign * fact * xi.powi((j - l) as i32) / ix.powu(l as u32 + 1);
        fact *= (j - l) as f64;
    }
    e * s
}

/// Exact `int_a^b xi^j trig(x xi) dxi` for `j <= 5`, `x != 0`.
pub fn poly_trig_moment(a: f64, b: f64, j: usize, x: f64, trig: Trig) -> f64 {
    let d = poly_trig_antideriv(b, j, x) - poly_trig_antideriv(a, j, x);
    match trig {
        Trig::Cos => d.re,
        Trig::Sin => d.im,
    }
}

/// Abel-regularized `int_xi^inf t^j trig(x t) dt` for `j <= 5`, `x != 0`:
/// the boundary term at infinity is dropped (its Abel limit is zero).
pub fn poly_trig_tail(xi: f64, j: usize, x: f64, trig: Trig) -> f64 {
    let d = -poly_trig_antideriv(xi, j, x);
    match trig {
        Trig::Cos => d.re,
        Trig::Sin => d.im,
    }
}

/// `int_a^b (linear interpolant through (a,fa),(b,fb)) * xi^m * trig(x xi) dxi`.
///
/// Switches between closed-form moments (oscillatory regime) and fixed
/// Gauss-Legendre (sub-oscillatory regime, where the closed forms cancel).
pub fn linear_filon_panel(
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    m: usize,
    x: f64,
    trig: Trig,
) -> f64 {
    debug_assert!(m <= 2);
    let w = b - a;
    if w <= 0.0 {
        return 0.0;
    }
    let c1 = (fb - fa) / w;
    let c0 = fa - c1 * a;
    if x == 0.0 {
        let pm = |j: usize| (b.powi(j as i32 + 1) - a.powi(j as i32 + 1)) / (j as f64 + 1.0);
        let base = c0 * pm(m) + c1 * pm(m + 1);
        return match trig {
            Trig::Cos => base,
            Trig::Sin => 0.0,
        };
    }
    if (x * w).abs() < 0.5 {
        let f = |xi: f64| {
            let lin = c0 + c1 * xi;
            let ph = x * xi;
            lin * xi.powi(m as i32)
                * match trig {
                    Trig::Cos => ph.cos(),
                    Trig::Sin => ph.sin(),
                }
        };
        return gl7(&f, a, b);
    }
    c0 * poly_trig_moment(a, b, m, x, trig) + c1 * poly_trig_moment(a, b, m + 1, x, trig)
}
