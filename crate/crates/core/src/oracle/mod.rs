//! Independent reference computations: direct quadrature of the resolvent
//! integrals, a Hermite–Galerkin truncation of the operator and a
//! time-domain simulation of that truncation.
//!
//! Nothing here calls into the plasma-function code.

mod galerkin;
mod hermite;
mod quadrature;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub use galerkin::{galerkin_spectrum, isolated_eigenvalues, GalerkinConfig, GalerkinSystem, SectorGroup};
pub use hermite::{psi, transverse_average, BASIS};
pub use quadrature::integrate;

use crate::closure::MomentVector;
use crate::spectral::{kernel_from_resolvent, Matrix8, ModelParams, SpectralError, SpectralPoint, WaveContext};

const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Velocity cut-off; the Gaussian tail beyond it is below 1e-30.
pub const VELOCITY_CUTOFF: f64 = 12.0;
const MAX_PIECES: usize = 20_000;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("quadrature did not reach tolerance")]
    QuadratureFail,
    #[error("rates {0} and {1} are closer than 1e-3; widen the horizon")]
    FitAmbiguous(Complex64, Complex64),
    #[error("fit failed: {0}")]
    FitFailed(String),
    #[error("z lies on the imaginary axis")]
    OnLine,
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

// ---------------------------------------------------------------------------
// Quadrature path

/// Split `[-L, L]` at `c` when it falls inside.
fn pieces(c: f64) -> Vec<(f64, f64)> {
    let l = VELOCITY_CUTOFF;
    if c > -l && c < l {
        vec![(-l, c), (c, l)]
    } else {
        vec![(-l, l)]
    }
}

fn integrate_split<const N: usize, F: Fn(f64) -> [Complex64; N]>(
    f: F,
    at: f64,
    tol: f64,
) -> Result<[Complex64; N], OracleError> {
    let mut total = [Complex64::new(0.0, 0.0); N];
    for (a, b) in pieces(at) {
        let v = integrate(&f, a, b, tol * 1e-3, tol, MAX_PIECES).ok_or(OracleError::QuadratureFail)?;
        for i in 0..N {
            total[i] += v[i];
        }
    }
    Ok(total)
}

/// `∫ e^{-w²/2}/(w - ζ) dw/√(2π)` off the real axis, which is `Z₊` above
/// and `Z₋` below.
pub fn quad_plasma_z(zeta: Complex64) -> Result<Complex64, OracleError> {
    if zeta.im == 0.0 {
        return Err(OracleError::OnLine);
    }
    let v = integrate_split(
        |w| [Complex64::new((-0.5 * w * w).exp() * INV_SQRT_2PI, 0.0) / (w - zeta)],
        zeta.re,
        1e-13,
    )?;
    Ok(v[0])
}

/// `∫ M(w) e^{-w²/2}/(iκw - z) dw/√(2π)`.
pub fn quad_resolvent_matrix(z: Complex64, kappa: f64) -> Result<Matrix8, OracleError> {
    if z.re == 0.0 || !(kappa > 0.0) {
        return Err(OracleError::OnLine);
    }
    let v: [Complex64; 36] = integrate_split(
        |w| {
            let m = transverse_average(w);
            let g = (-0.5 * w * w).exp() * INV_SQRT_2PI / Complex64::new(-z.re, kappa * w - z.im);
            let mut out = [Complex64::new(0.0, 0.0); 36];
            let mut n = 0;
            for i in 0..8 {
                for j in i..8 {
                    out[n] = g * m[i][j];
                    n += 1;
                }
            }
            out
        },
        z.im / kappa,
        1e-12,
    )?;
    let mut g = Matrix8::zeros();
    let mut n = 0;
    for i in 0..8 {
        for j in i..8 {
            g[(i, j)] = v[n];
            g[(j, i)] = v[n];
            n += 1;
        }
    }
    Ok(g)
}

/// `det(D_r G - Id)` with `G` from quadrature.
pub fn quad_kernel_det(lambda: Complex64, params: &ModelParams, wave: &WaveContext) -> Result<Complex64, OracleError> {
    let pt = SpectralPoint::new(lambda, params, wave)?;
    let g = quad_resolvent_matrix(pt.z, wave.kappa)?;
    Ok(kernel_from_resolvent(&g, params.r).determinant())
}

// ---------------------------------------------------------------------------
// Simulation

/// Moments and the Euclidean norm of the Galerkin state on a uniform grid.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub moments: Vec<MomentVector>,
    pub norms: Vec<f64>,
}

fn norm(u: &[Complex64]) -> f64 {
    u.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Integrate from `u0` and record every `sample` time units up to `horizon`.
pub fn simulate(sys: &GalerkinSystem, u0: &[Complex64], horizon: f64, sample: f64) -> Trajectory {
    let dt = 1.0 / sys.norm_bound();
    let steps = (horizon / sample).round() as usize;
    let mut u = u0.to_vec();
    let mut tr = Trajectory { times: vec![0.0], moments: vec![sys.moments(&u)], norms: vec![norm(&u)] };
    for s in 1..=steps {
        sys.propagate(&mut u, sample, dt);
        tr.times.push(s as f64 * sample);
        tr.moments.push(sys.moments(&u));
        tr.norms.push(norm(&u));
    }
    tr
}

/// Initial data for `simulate_and_fit`.
#[derive(Clone, Debug)]
pub enum InitialData {
    /// State carrying exactly these moments.
    Moments(MomentVector),
    /// Seeded random coefficients, decaying with the Hermite index.
    Random(u64),
    /// Sum of truncation eigenvectors at the given eigenvalue estimates.
    Modes(Vec<Complex64>),
}

impl InitialData {
    pub fn state(&self, sys: &GalerkinSystem) -> Option<Vec<Complex64>> {
        match self {
            InitialData::Moments(h) => Some(sys.state_from_moments(h)),
            InitialData::Random(seed) => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let n = sys.config.n as f64;
                Some(
                    (0..sys.dim())
                        .map(|i| {
                            // decaying spectrum keeps the data smooth
                            let a = (i % (sys.config.n + 1)) as f64;
                            let s = (-a / (0.1 * n)).exp();
                            Complex64::new(rng.random_range(-1.0..1.0) * s, rng.random_range(-1.0..1.0) * s)
                        })
                        .collect(),
                )
            }
            InitialData::Modes(mus) => {
                let mut u = vec![Complex64::new(0.0, 0.0); sys.dim()];
                for (i, &mu) in mus.iter().enumerate() {
                    let v = sys.eigenvector(mu)?;
                    let w = Complex64::new(1.0, 0.3 * i as f64);
                    for (x, y) in u.iter_mut().zip(v) {
                        *x += w * y;
                    }
                }
                Some(u)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RateFit {
    /// Sorted by real part, slowest decay first.
    pub rates: Vec<Complex64>,
    /// Relative least-squares residual of the reconstruction.
    pub residual: f64,
}

/// Relative singular-value cut used to pick the model order.
pub const FIT_RANK_TOL: f64 = 1e-8;

/// Multichannel linear prediction: every moment trace from `t_start` on is
/// modelled as one shared sum of exponentials.
pub fn fit_rates(tr: &Trajectory, t_start: f64) -> Result<RateFit, OracleError> {
    let first = tr.times.iter().position(|&t| t >= t_start - 1e-12).unwrap_or(tr.times.len());
    let samples = &tr.moments[first..];
    let n = samples.len();
    if n < 8 {
        return Err(OracleError::FitFailed("too few samples".into()));
    }
    let dt = tr.times[1] - tr.times[0];
    let channels: Vec<usize> = (0..8).filter(|&c| samples.iter().any(|h| h[c].norm() > 0.0)).collect();
    let scale = samples.iter().map(|h| h.norm()).fold(0.0, f64::max);
    let max_order = (n / 3).min(24);

    // model order from the block Hankel matrix
    let rows = channels.len() * (n - max_order);
    let hankel = DMatrix::from_fn(rows, max_order + 1, |r, c| {
        let (ch, t) = (r / (n - max_order), r % (n - max_order));
        samples[t + c][channels[ch]] / scale
    });
    let sv = hankel.singular_values();
    let smax = sv.max();
    let order = sv.iter().filter(|&&s| s > FIT_RANK_TOL * smax).count().min(max_order);
    if order == 0 {
        return Err(OracleError::FitFailed("signal vanished".into()));
    }

    // prediction coefficients shared across channels
    let m = n - order;
    let lp_rows = channels.len() * m;
    let a = DMatrix::from_fn(lp_rows, order, |r, c| samples[r % m + c][channels[r / m]] / scale);
    let b = DVector::from_fn(lp_rows, |r, _| samples[r % m + order][channels[r / m]] / scale);
    let coef = a.svd(true, true).solve(&b, 1e-14).map_err(|e| OracleError::FitFailed(e.into()))?;

    // roots of z^p - Σ c_j z^j via the companion matrix
    let mut comp = DMatrix::zeros(order, order);
    for j in 0..order {
        comp[(0, j)] = coef[order - 1 - j];
        if j + 1 < order {
            comp[(j + 1, j)] = Complex64::new(1.0, 0.0);
        }
    }
    let zs: Vec<Complex64> = comp.eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_else(|| {
        comp.schur().eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
    });
    if zs.len() != order {
        return Err(OracleError::FitFailed("companion eigenvalues".into()));
    }
    let mut rates: Vec<Complex64> = zs.iter().map(|z| z.ln() / dt).collect();
    rates.sort_by(|x, y| y.re.total_cmp(&x.re).then(x.im.total_cmp(&y.im)));

    // amplitudes and residual
    let v = DMatrix::from_fn(n, order, |t, j| zs[j].powu(t as u32));
    let vsvd = v.clone().svd(true, true);
    let mut res = 0.0;
    let mut tot = 0.0;
    for &ch in &channels {
        let y = DVector::from_fn(n, |t, _| samples[t][ch] / scale);
        let amp = vsvd.solve(&y, 1e-14).map_err(|e| OracleError::FitFailed(e.into()))?;
        res += (&v * amp - &y).norm_squared();
        tot += y.norm_squared();
    }

    for i in 0..rates.len() {
        for j in i + 1..rates.len() {
            if (rates[i] - rates[j]).norm() < 1e-3 {
                return Err(OracleError::FitAmbiguous(rates[i], rates[j]));
            }
        }
    }
    Ok(RateFit { rates, residual: (res / tot.max(1e-300)).sqrt() })
}

/// Sampling interval of the simulated traces.
pub const SAMPLE_INTERVAL: f64 = 0.1;

/// Simulate one sector group from `initial` up to `horizon` and fit the
/// decay rates after `t_start`.
pub fn simulate_and_fit(
    params: &ModelParams,
    k: f64,
    config: GalerkinConfig,
    initial: &InitialData,
    horizon: f64,
    t_start: f64,
) -> Result<(Trajectory, RateFit), OracleError> {
    let sys = GalerkinSystem::new(params, k, config);
    let u0 = initial.state(&sys).ok_or_else(|| OracleError::FitFailed("initial state".into()))?;
    let tr = simulate(&sys, &u0, horizon, SAMPLE_INTERVAL);
    let fit = fit_rates(&tr, t_start)?;
    Ok((tr, fit))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::specfun::{plasma_z, HalfPlaneBranch};
    use crate::spectral::SpectralFunction;

    #[test]
    fn quadrature_z_at_origin() {
        let z = quad_plasma_z(Complex64::new(0.0, 1e-3)).unwrap();
        let exact = plasma_z(Complex64::new(0.0, 1e-3), HalfPlaneBranch::Upper);
        assert!((z - exact).norm() < 1e-11 * exact.norm(), "{z} {exact}");
    }

    #[test]
    fn quadrature_resolvent_matches() {
        let p = ModelParams::new(0.5, 0.4).unwrap();
        let w = WaveContext::new(0.7, &p).unwrap();
        let sf = SpectralFunction::new(&p, &w);
        for lam in [Complex64::new(-0.3, 0.5), Complex64::new(-2.6, -1.0), Complex64::new(0.2, 3.0)] {
            let pt = SpectralPoint::new(lam, &p, &w).unwrap();
            let q = quad_resolvent_matrix(pt.z, w.kappa).unwrap();
            let g = sf.resolvent(lam).unwrap();
            assert!((q - g).norm() < 1e-9 * g.norm(), "{lam}: {:e}", (q - g).norm() / g.norm());
        }
    }

    #[test]
    fn fit_recovers_synthetic_rates() {
        let lam = [Complex64::new(-0.1, 0.4), Complex64::new(-0.1, -0.4), Complex64::new(-0.7, 0.0)];
        let times: Vec<f64> = (0..200).map(|i| i as f64 * 0.1).collect();
        let moments = times
            .iter()
            .map(|&t| {
                MomentVector::from_fn(|c, _| {
                    lam.iter().enumerate().map(|(j, l)| (l * t).exp() * (1.0 + (c * j) as f64)).sum()
                })
            })
            .collect();
        let tr = Trajectory { norms: vec![0.0; times.len()], times, moments };
        let fit = fit_rates(&tr, 0.0).unwrap();
        assert_eq!(fit.rates.len(), 3);
        for l in lam {
            assert!(fit.rates.iter().any(|r| (r - l).norm() < 1e-9));
        }
    }
}
