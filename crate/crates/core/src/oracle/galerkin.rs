//! Hermite–Galerkin truncation of the linearized operator on one invariant
//! group of transverse Hermite sectors.
//!
//! Coefficients are stored as `u_a = i^{-a} c_a` (`a` the longitudinal
//! Hermite index); in these variables the operator is real.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::hermite::BASIS;
use crate::closure::{MomentVector, LONGITUDINAL_PARITY};
use crate::spectral::{d_r, ModelParams};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SectorGroup {
    Longitudinal,
    TransverseY,
    TransverseZ,
}

impl SectorGroup {
    pub const ALL: [SectorGroup; 3] = [SectorGroup::Longitudinal, SectorGroup::TransverseY, SectorGroup::TransverseZ];

    /// Transverse Hermite indices `(b, c)` of the coupled sectors.
    pub fn sectors(self) -> [[usize; 2]; 3] {
        match self {
            SectorGroup::Longitudinal => [[0, 0], [2, 0], [0, 2]],
            SectorGroup::TransverseY => [[1, 0], [3, 0], [1, 2]],
            SectorGroup::TransverseZ => [[0, 1], [0, 3], [2, 1]],
        }
    }

    /// Basis moments living in this group.
    pub fn moments(self) -> &'static [usize] {
        match self {
            SectorGroup::Longitudinal => &[0, 3, 4, 7],
            SectorGroup::TransverseY => &[1, 5],
            SectorGroup::TransverseZ => &[2, 6],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GalerkinConfig {
    /// Highest longitudinal Hermite index.
    pub n: usize,
    pub group: SectorGroup,
}

impl GalerkinConfig {
    pub fn new(n: usize, group: SectorGroup) -> Self {
        assert!(n >= 32, "truncation below 32 is not supported");
        GalerkinConfig { n, group }
    }
}

/// The truncated operator for fixed `(τ, r, k)`.
#[derive(Clone, Debug)]
pub struct GalerkinSystem {
    pub config: GalerkinConfig,
    pub k: f64,
    pub tau: f64,
    /// `(moment index, d_j, projection vector)` in `u` coordinates.
    proj: Vec<(usize, f64, Vec<f64>)>,
}

impl GalerkinSystem {
    pub fn new(params: &ModelParams, k: f64, config: GalerkinConfig) -> Self {
        let dim = 3 * (config.n + 1);
        let d = d_r(params.r);
        let sectors = config.group.sectors();
        let proj = config
            .group
            .moments()
            .iter()
            .map(|&j| {
                let mut v = vec![0.0; dim];
                let p = LONGITUDINAL_PARITY[j] as i64;
                for &(c, [a, b, g]) in BASIS[j] {
                    let s = sectors.iter().position(|t| *t == [b, g]).expect("moment outside its group");
                    // i^{-p} E[m] i^{a} = (-1)^{(a-p)/2} E[m]
                    let sign = if ((a as i64 - p) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                    v[s * (config.n + 1) + a] += sign * c;
                }
                (j, d[j], v)
            })
            .collect();
        GalerkinSystem { config, k, tau: params.tau, proj }
    }

    pub fn dim(&self) -> usize {
        3 * (self.config.n + 1)
    }

    fn index(&self, i: usize) -> usize {
        i % (self.config.n + 1)
    }

    /// Dense real matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        let dim = self.dim();
        let mut m = DMatrix::zeros(dim, dim);
        for i in 0..dim {
            m[(i, i)] = -1.0 / self.tau;
            let a = self.index(i);
            if a > 0 {
                m[(i, i - 1)] = -self.k * (a as f64).sqrt();
            }
            if a < self.config.n {
                m[(i, i + 1)] = self.k * ((a + 1) as f64).sqrt();
            }
        }
        for (_, d, v) in &self.proj {
            for i in 0..dim {
                if v[i] == 0.0 {
                    continue;
                }
                for j in 0..dim {
                    m[(i, j)] += d / self.tau * v[i] * v[j];
                }
            }
        }
        m
    }

    /// Matrix–vector product without forming the matrix.
    pub fn apply(&self, u: &[Complex64], out: &mut [Complex64]) {
        let n = self.config.n;
        for i in 0..self.dim() {
            let a = self.index(i);
            let mut s = u[i] * (-1.0 / self.tau);
            if a > 0 {
                s -= u[i - 1] * (self.k * (a as f64).sqrt());
            }
            if a < n {
                s += u[i + 1] * (self.k * ((a + 1) as f64).sqrt());
            }
            out[i] = s;
        }
        for (_, d, v) in &self.proj {
            let dot: Complex64 = v.iter().zip(u).filter(|p| *p.0 != 0.0).map(|(a, b)| b * *a).sum();
            let c = dot * (d / self.tau);
            for (o, a) in out.iter_mut().zip(v) {
                if *a != 0.0 {
                    *o += c * *a;
                }
            }
        }
    }

    /// Moments `<f, e_j>` of the state `u`; entries outside the group are 0.
    pub fn moments(&self, u: &[Complex64]) -> MomentVector {
        let mut h = MomentVector::zeros();
        for (j, _, v) in &self.proj {
            let dot: Complex64 = v.iter().zip(u).map(|(a, b)| b * *a).sum();
            h[*j] = dot * I.powi(LONGITUDINAL_PARITY[*j] as i32);
        }
        h
    }

    /// State whose only content is `Σ_j h_j e_j` (components outside the
    /// group are ignored).
    pub fn state_from_moments(&self, h: &MomentVector) -> Vec<Complex64> {
        let mut u = vec![Complex64::new(0.0, 0.0); self.dim()];
        for (j, _, v) in &self.proj {
            let c = h[*j] * I.powi(-(LONGITUDINAL_PARITY[*j] as i32));
            for (x, a) in u.iter_mut().zip(v) {
                *x += c * *a;
            }
        }
        u
    }

    /// All eigenvalues of the truncation.
    pub fn eigenvalues(&self) -> Vec<Complex64> {
        let m = self.matrix();
        // without transport the matrix is symmetric and massively degenerate,
        // which the unsymmetric QR iteration does not resolve
        let mut ev: Vec<Complex64> = if self.k == 0.0 {
            m.symmetric_eigenvalues().iter().map(|&x| Complex64::new(x, 0.0)).collect()
        } else {
            m.complex_eigenvalues().iter().copied().collect()
        };
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        ev
    }

    /// Solve `(R - μ) x = b` by per-sector LU plus a low-rank correction.
    pub fn shifted_solve(&self, mu: Complex64, b: &[Complex64]) -> Option<Vec<Complex64>> {
        let n1 = self.config.n + 1;
        // every sector carries the same tridiagonal transport block
        let lu = DMatrix::from_fn(n1, n1, |i, j| {
            if i == j {
                Complex64::new(-1.0 / self.tau, 0.0) - mu
            } else if j + 1 == i {
                Complex64::new(-self.k * (i as f64).sqrt(), 0.0)
            } else if i + 1 == j {
                Complex64::new(self.k * (j as f64).sqrt(), 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .lu();
        let tsolve = |rhs: &[Complex64]| -> Option<Vec<Complex64>> {
            let mut out = vec![Complex64::new(0.0, 0.0); rhs.len()];
            for s in 0..3 {
                let part = DVector::from_column_slice(&rhs[s * n1..(s + 1) * n1]);
                let x = lu.solve(&part)?;
                out[s * n1..(s + 1) * n1].copy_from_slice(x.as_slice());
            }
            Some(out)
        };
        let p = self.proj.len();
        let y = tsolve(b)?;
        let tu: Vec<Vec<Complex64>> = self
            .proj
            .iter()
            .map(|(_, _, v)| tsolve(&v.iter().map(|&x| Complex64::new(x, 0.0)).collect::<Vec<_>>()))
            .collect::<Option<_>>()?;
        let dot = |v: &[f64], x: &[Complex64]| -> Complex64 { v.iter().zip(x).map(|(a, b)| b * *a).sum() };
        // (I + Uᵀ T⁻¹ U D) z = Uᵀ T⁻¹ b
        let cap = DMatrix::from_fn(p, p, |i, j| {
            let id = if i == j { 1.0 } else { 0.0 };
            id + dot(&self.proj[i].2, &tu[j]) * (self.proj[j].1 / self.tau)
        });
        let rhs = DVector::from_iterator(p, self.proj.iter().map(|(_, _, v)| dot(v, &y)));
        let z = cap.lu().solve(&rhs)?;
        let mut x = y;
        for j in 0..p {
            let c = z[j] * (self.proj[j].1 / self.tau);
            for (xi, ti) in x.iter_mut().zip(&tu[j]) {
                *xi -= c * ti;
            }
        }
        Some(x)
    }

    /// Eigenvector for an eigenvalue estimate `mu` by inverse iteration.
    pub fn eigenvector(&self, mu: Complex64) -> Option<Vec<Complex64>> {
        let dim = self.dim();
        let shift = mu + Complex64::new(1e-10, 1e-10) * (1.0 + mu.norm());
        let mut x: Vec<Complex64> = (0..dim).map(|i| Complex64::new(1.0 + (i % 7) as f64 * 0.1, 0.0)).collect();
        for _ in 0..4 {
            let y = self.shifted_solve(shift, &x)?;
            let nrm = y.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
            if !(nrm.is_finite() && nrm > 0.0) {
                return None;
            }
            x = y.into_iter().map(|c| c / nrm).collect();
        }
        Some(x)
    }

    /// Advance `u` by `t` with Taylor steps of size at most `dt`.
    pub fn propagate(&self, u: &mut Vec<Complex64>, t: f64, dt: f64) {
        if t <= 0.0 {
            return;
        }
        let steps = (t / dt).ceil().max(1.0) as usize;
        let h = t / steps as f64;
        let mut term = vec![Complex64::new(0.0, 0.0); u.len()];
        let mut next = term.clone();
        for _ in 0..steps {
            term.copy_from_slice(u);
            let base = u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-300);
            for j in 1..200 {
                self.apply(&term, &mut next);
                let f = h / j as f64;
                let mut tn = 0.0;
                for (a, b) in term.iter_mut().zip(&next) {
                    *a = b * f;
                    tn += a.norm_sqr();
                }
                for (x, a) in u.iter_mut().zip(&term) {
                    *x += a;
                }
                if tn.sqrt() <= 1e-17 * base {
                    break;
                }
            }
        }
    }

    /// Rough bound on the operator norm, for choosing Taylor steps.
    pub fn norm_bound(&self) -> f64 {
        2.0 * self.k * ((self.config.n + 1) as f64).sqrt() + 2.0 / self.tau
    }
}

/// Eigenvalues of the truncation on one sector group.
pub fn galerkin_spectrum(params: &ModelParams, k: f64, config: GalerkinConfig) -> Vec<Complex64> {
    GalerkinSystem::new(params, k, config).eigenvalues()
}

/// Eigenvalues separated from the discretized essential spectrum: farther
/// from `Re λ = -1/τ` than five times the spread of the cluster around it.
///
/// The cluster is grown outward from the median distance for as long as
/// consecutive distances stay within a factor five; the spread is its
/// outermost distance. Distances below `1e-3/τ` count as on the line.
pub fn isolated_eigenvalues(eigs: &[Complex64], tau: f64) -> (Vec<Complex64>, f64) {
    let line = -1.0 / tau;
    let floor = 1e-3 / tau;
    let mut dev: Vec<f64> = eigs.iter().map(|e| (e.re - line).abs()).collect();
    dev.sort_by(f64::total_cmp);
    let mut i = dev.len() / 2;
    while i + 1 < dev.len() && dev[i + 1] <= 5.0 * dev[i].max(floor) {
        i += 1;
    }
    let spread = dev[i].max(floor);
    let iso = eigs.iter().copied().filter(|e| (e.re - line).abs() > 5.0 * spread).collect();
    (iso, spread)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_wavenumber_spectrum() {
        let p = ModelParams::with_r(0.5, 0.6).unwrap();
        for g in SectorGroup::ALL {
            let ev = galerkin_spectrum(&p, 0.0, GalerkinConfig::new(32, g));
            for e in ev {
                let d = [0.0, -0.8, -2.0].iter().map(|t| (e - t).norm()).fold(f64::INFINITY, f64::min);
                assert!(d < 1e-12, "{e}");
            }
        }
    }

    #[test]
    fn apply_matches_matrix() {
        let p = ModelParams::with_r(0.5, 0.3).unwrap();
        let sys = GalerkinSystem::new(&p, 0.7, GalerkinConfig::new(40, SectorGroup::Longitudinal));
        let m = sys.matrix();
        let u: Vec<Complex64> = (0..sys.dim()).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut out = vec![Complex64::new(0.0, 0.0); sys.dim()];
        sys.apply(&u, &mut out);
        for i in 0..sys.dim() {
            let e: Complex64 = (0..sys.dim()).map(|j| u[j] * m[(i, j)]).sum();
            assert!((e - out[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn moments_round_trip() {
        let p = ModelParams::with_r(0.5, 0.3).unwrap();
        let sys = GalerkinSystem::new(&p, 0.7, GalerkinConfig::new(32, SectorGroup::Longitudinal));
        let mut h = MomentVector::zeros();
        for (i, &j) in [0usize, 3, 4, 7].iter().enumerate() {
            h[j] = Complex64::new(1.0 + i as f64, -0.5 * i as f64);
        }
        let back = sys.moments(&sys.state_from_moments(&h));
        assert!((back - h).norm() < 1e-14);
    }

    #[test]
    fn shifted_solve_inverts() {
        let p = ModelParams::with_r(0.5, 0.6).unwrap();
        let sys = GalerkinSystem::new(&p, 0.6, GalerkinConfig::new(48, SectorGroup::TransverseY));
        let b: Vec<Complex64> = (0..sys.dim()).map(|i| Complex64::new(1.0 / (1.0 + i as f64), 0.2)).collect();
        let mu = Complex64::new(-0.3, 0.4);
        let x = sys.shifted_solve(mu, &b).unwrap();
        let mut rx = vec![Complex64::new(0.0, 0.0); sys.dim()];
        sys.apply(&x, &mut rx);
        for i in 0..sys.dim() {
            assert!((rx[i] - mu * x[i] - b[i]).norm() < 1e-10);
        }
    }
}
