//! Periodic lattice with cached Fourier-multiplier tables.

use crate::bernstein::BernsteinSpec;
use crate::{Error, Result};
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::sync::{Arc, Mutex};

/// Which multiplier to apply in frequency space.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MultiplierKind {
    /// `phi(|xi|^2)^{gamma/2}`; zero at the zero frequency for `gamma > 0`
    /// (and, by convention, also for `gamma < 0`, projecting constants out).
    PhiPower(f64),
    /// `(1 + phi(|xi|^2))^{gamma/2}`.
    BesselPhiPower(f64),
}

/// Periodic lattice in `d in {1,2,3}` with `n` points per axis, box length
/// `len`, and the cached table of `phi(|xi|^2)` over the frequency set
/// `xi_k = 2 pi k / len`, `k in [-n/2, n/2)^d`.
pub struct SpectralGrid {
    pub dim: usize,
    pub len: f64,
    pub n: usize,
    phi_xi2: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    // per-(kind, gamma-bits) multiplier tables
    mult_cache: Mutex<Vec<((u8, u64), Arc<Vec<f64>>)>>,
}

impl std::fmt::Debug for SpectralGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "SpectralGrid(dim {}, n {}, len {})", self.dim, self.n, self.len)
    }
}

impl SpectralGrid {
    pub fn new(dim: usize, len: f64, n: usize, phi: &BernsteinSpec) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::Domain(format!("lattice dimension {dim}")));
        }
        if !n.is_power_of_two() || n < 4 {
            return Err(Error::Domain(format!("points per axis {n} must be a power of two >= 4")));
        }
        if !(len > 0.0) {
            return Err(Error::Domain(format!("box length {len}")));
        }
        let total = n.pow(dim as u32);
        let mut phi_xi2 = Vec::with_capacity(total);
        for flat in 0..total {
            let x2 = Self::xi_sq_at(dim, len, n, flat);
            phi_xi2.push(if x2 == 0.0 { 0.0 } else { phi.eval(x2) });
        }
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(SpectralGrid { dim, len, n, phi_xi2, fwd, inv, mult_cache: Mutex::new(Vec::new()) })
    }

    pub fn total_points(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn dx(&self) -> f64 {
        self.len / self.n as f64
    }

    /// Signed frequency index for FFT bin `k` (bins `n/2..n` are negative).
    #[inline]
    fn signed(n: usize, k: usize) -> i64 {
        if k < n / 2 { k as i64 } else { k as i64 - n as i64 }
    }

    fn xi_sq_at(dim: usize, len: f64, n: usize, flat: usize) -> f64 {
        let base = 2.0 * std::f64::consts::PI / len;
        let mut rem = flat;
        let mut s = 0.0;
        for _ in 0..dim {
            let k = rem % n;
            rem /= n;
            let xi = base * Self::signed(n, k) as f64;
            s += xi * xi;
        }
        s
    }

    /// `phi(|xi|^2)` at the flattened frequency index.
    #[inline]
    pub fn phi_at(&self, flat: usize) -> f64 {
        self.phi_xi2[flat]
    }

    pub fn phi_table(&self) -> &[f64] {
        &self.phi_xi2
    }

    /// Spatial lattice coordinates along one axis.
    pub fn axis_points(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.len * j as f64 / self.n as f64).collect()
    }

    /// The multiplier table for `kind`, cached per requested exponent.
    pub fn multiplier(&self, kind: MultiplierKind) -> Arc<Vec<f64>> {
        let (tag, gamma) = match kind {
            MultiplierKind::PhiPower(g) => (0u8, g),
            MultiplierKind::BesselPhiPower(g) => (1u8, g),
        };
        let key = (tag, gamma.to_bits());
        let mut cache = self.mult_cache.lock().unwrap();
        if let Some((_, t)) = cache.iter().find(|(k, _)| *k == key) {
            return t.clone();
        }
        let half = 0.5 * gamma;
        let table: Vec<f64> = self
            .phi_xi2
            .iter()
            .map(|&p| match kind {
                MultiplierKind::PhiPower(_) => {
                    if gamma == 0.0 {
                        1.0
                    } else if p == 0.0 {
                        0.0
                    } else {
                        p.powf(half)
                    }
                }
                MultiplierKind::BesselPhiPower(_) => (1.0 + p).powf(half),
            })
            .collect();
        let arc = Arc::new(table);
        cache.push((key, arc.clone()));
        arc
    }

    /// In-place FFT along every axis of the flattened field.
    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let plan = if inverse { &self.inv } else { &self.fwd };
        match self.dim {
            1 => plan.process(data),
            _ => {
                let total = data.len();
                let mut scratch = vec![Complex64::default(); n];
                for axis in 0..self.dim {
                    let stride = n.pow(axis as u32);
                    let lines = total / n;
                    for line in 0..lines {
                        // decompose line index into (inner, outer) around the axis
                        let inner = line % stride;
                        let outer = line / stride;
                        let base = outer * stride * n + inner;
                        for j in 0..n {
                            scratch[j] = data[base + j * stride];
                        }
                        plan.process(&mut scratch);
                        for j in 0..n {
                            data[base + j * stride] = scratch[j];
                        }
                    }
                }
            }
        }
    }

    /// Forward transform of a real field (unnormalized).
    pub fn fft_real(&self, field: &[f64]) -> Vec<Complex64> {
        assert_eq!(field.len(), self.total_points());
        let mut data: Vec<Complex64> =
            field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, false);
        data
    }

    /// Inverse transform back to a real field (normalized by 1/total).
    pub fn ifft_to_real(&self, mut data: Vec<Complex64>) -> Vec<f64> {
        assert_eq!(data.len(), self.total_points());
        self.transform(&mut data, true);
        let scale = 1.0 / self.total_points() as f64;
        data.iter().map(|c| c.re * scale).collect()
    }

    /// Applies a frequency multiplier to a real lattice field.
    pub fn apply_multiplier(&self, field: &[f64], kind: MultiplierKind) -> Result<Vec<f64>> {
        if field.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite entry in lattice field".into()));
        }
        let table = self.multiplier(kind);
        let mut hat = self.fft_real(field);
        for (h, &m) in hat.iter_mut().zip(table.iter()) {
            *h *= m;
        }
        Ok(self.ifft_to_real(hat))
    }

    /// Discrete `L_p` norm with the cell measure `dx^dim`.
    pub fn lp_norm(&self, field: &[f64], p: f64) -> f64 {
        let cell = self.dx().powi(self.dim as i32);
        field
            .iter()
            .map(|v| v.abs().powf(p) * cell)
            .sum::<f64>()
            .powf(1.0 / p)
    }

    /// Discrete inner product with the cell measure.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        let cell = self.dx().powi(self.dim as i32);
        a.iter().zip(b).map(|(x, y)| x * y * cell).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bernstein::stable;

    fn grid() -> SpectralGrid {
        SpectralGrid::new(1, 2.0 * std::f64::consts::PI, 64, &stable(0.5)).unwrap()
    }

    #[test]
    fn multiplier_vanishes_at_zero_frequency_for_positive_power() {
        let g = grid();
        let t = g.multiplier(MultiplierKind::PhiPower(1.0));
        assert_eq!(t[0], 0.0);
        assert!(t[1] > 0.0);
        let b = g.multiplier(MultiplierKind::BesselPhiPower(1.0));
        assert_eq!(b[0], 1.0);
    }

    #[test]
    fn zero_exponent_multiplier_is_identity() {
        let g = grid();
        let f: Vec<f64> = g.axis_points().iter().map(|x| (3.0 * x).sin() + 0.2).collect();
        let out = g.apply_multiplier(&f, MultiplierKind::PhiPower(0.0)).unwrap();
        for (a, b) in f.iter().zip(&out) {
            assert!((a - b).abs() < 1.0e-12);
        }
    }

    #[test]
    fn bessel_multiplier_round_trips() {
        let g = grid();
        let f: Vec<f64> = g.axis_points().iter().map(|x| (2.0 * x).cos() - 0.7 * x.sin()).collect();
        let fwd = g.apply_multiplier(&f, MultiplierKind::BesselPhiPower(1.3)).unwrap();
        let back = g.apply_multiplier(&fwd, MultiplierKind::BesselPhiPower(-1.3)).unwrap();
        for (a, b) in f.iter().zip(&back) {
            assert!((a - b).abs() < 1.0e-12);
        }
    }

    #[test]
    fn bessel_multiplier_is_self_adjoint() {
        let g = grid();
        let u: Vec<f64> = g.axis_points().iter().map(|x| (5.0 * x).sin()).collect();
        let v: Vec<f64> = g.axis_points().iter().map(|x| (x - 2.0) * (-x).exp()).collect();
        let mu = g.apply_multiplier(&u, MultiplierKind::BesselPhiPower(0.8)).unwrap();
        let mv = g.apply_multiplier(&v, MultiplierKind::BesselPhiPower(0.8)).unwrap();
        let lhs = g.inner(&mu, &v);
        let rhs = g.inner(&u, &mv);
        assert!((lhs - rhs).abs() <= 1.0e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn laplacian_multiplier_matches_eigenvalue_in_2d() {
        let phi = stable(1.0);
        let g = SpectralGrid::new(2, 2.0 * std::f64::consts::PI, 16, &phi).unwrap();
        let pts = g.axis_points();
        let mut f = vec![0.0; g.total_points()];
        for j in 0..16 {
            for i in 0..16 {
                f[j * 16 + i] = (3.0 * pts[i]).cos() * (2.0 * pts[j]).sin();
            }
        }
        // phi = id, so the PhiPower(2.0) multiplier is |xi|^2 = 9 + 4
        let out = g.apply_multiplier(&f, MultiplierKind::PhiPower(2.0)).unwrap();
        for (a, b) in f.iter().zip(&out) {
            assert!((13.0 * a - b).abs() < 1.0e-9, "{a} {b}");
        }
    }

    #[test]
    fn rejects_non_power_of_two() {
        assert!(SpectralGrid::new(1, 1.0, 48, &stable(0.5)).is_err());
    }
}
