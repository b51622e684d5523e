//! Moment eigenvectors at the discrete eigenvalues and the finite
//! hydrodynamic system they span.

use nalgebra::{DMatrix, DVector, SVector};
use num_complex::Complex64;

use crate::branches::{seed_modes, trace_all, ModeLabel, StepControl, SEED_K};
use crate::rootfind::{RootFindError, RootFinder, RootRecord};
use crate::spectral::{
    kernel_from_resolvent, n_matrix, Matrix8, ModelParams, SpectralError, SpectralFunction, SpectralPoint,
    WaveContext,
};

pub type MomentVector = SVector<Complex64, 8>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Singular values at or below this count as kernel directions.
pub const KERNEL_TOL: f64 = 1e-6;
/// Relative cutoff of the pseudo-inverse.
pub const PINV_TOL: f64 = 1e-10;

/// Parity of each basis moment in the longitudinal velocity.
pub const LONGITUDINAL_PARITY: [u8; 8] = [0, 0, 0, 1, 0, 0, 0, 1];

#[derive(Debug, thiserror::Error)]
pub enum ClosureError {
    #[error("no kernel at λ = {0} (smallest singular value {1:e})")]
    EmptyKernel(Complex64, f64),
    #[error("closure matrix has rank {rank} for {modes} modes")]
    RankDeficient { rank: usize, modes: usize },
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Root(#[from] RootFindError),
}

/// `G_S = N(ζ)/(iκ)` at a spectral point.
pub fn resolvent_matrix(point: &SpectralPoint, _params: &ModelParams, wave: &WaveContext) -> Matrix8 {
    n_matrix(point.zeta, point.branch) / (I * wave.kappa)
}

/// Kernel of `D_r G_S - Id` as measured by the SVD.
#[derive(Clone, Debug)]
pub struct KernelInfo {
    pub lambda: Complex64,
    /// Unit vectors spanning the measured kernel.
    pub vectors: Vec<MomentVector>,
    /// Ascending.
    pub singular_values: [f64; 8],
}

impl KernelInfo {
    pub fn dimension(&self) -> usize {
        self.vectors.len()
    }
}

/// Right singular vectors of `m`, sorted by ascending singular value.
fn svd_ascending(m: &Matrix8) -> Vec<(f64, MomentVector)> {
    let svd = m.svd(false, true);
    let vt = svd.v_t.expect("requested");
    let mut out: Vec<(f64, MomentVector)> = (0..8)
        .map(|i| (svd.singular_values[i], vt.row(i).transpose().map(|c| c.conj())))
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out
}

pub fn eigenvector_alpha(
    root: &RootRecord,
    params: &ModelParams,
    wave: &WaveContext,
) -> Result<KernelInfo, ClosureError> {
    let sf = SpectralFunction::new(params, wave);
    let k = sf.kernel_matrix(root.lambda)?;
    let parts = svd_ascending(&k);
    let singular_values = std::array::from_fn(|i| parts[i].0);
    let vectors: Vec<MomentVector> = parts.iter().filter(|p| p.0 <= KERNEL_TOL).map(|p| p.1).collect();
    if vectors.is_empty() {
        return Err(ClosureError::EmptyKernel(root.lambda, singular_values[0]));
    }
    Ok(KernelInfo { lambda: root.lambda, vectors, singular_values })
}

// ---------------------------------------------------------------------------
// Closure

#[derive(Clone, Debug)]
pub struct ClosureMode {
    pub label: Option<ModeLabel>,
    pub lambda: Complex64,
    /// Kernel vector of `D_r G_S - Id`.
    pub alpha: MomentVector,
    /// Moments `<f_eig, e> = G_S α` of the eigenfunction.
    pub moments: MomentVector,
}

#[derive(Clone, Debug)]
pub struct ClosureSystem {
    pub k: f64,
    pub params: ModelParams,
    /// One entry per column of `a`.
    pub modes: Vec<ClosureMode>,
    /// Columns are the eigenfunction moments.
    pub a: DMatrix<Complex64>,
    pub lambda: Vec<Complex64>,
    pub generator: Matrix8,
    pub rank: usize,
}

fn pseudo_inverse(a: &DMatrix<Complex64>) -> (DMatrix<Complex64>, usize) {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cut = PINV_TOL * smax;
    let rank = svd.singular_values.iter().filter(|&&s| s > cut).count();
    let u = svd.u.expect("requested");
    let vt = svd.v_t.expect("requested");
    let mut pinv = DMatrix::zeros(a.ncols(), a.nrows());
    for (i, &s) in svd.singular_values.iter().enumerate() {
        if s > cut {
            let v = vt.row(i).adjoint();
            let uh = u.column(i).adjoint();
            pinv += v * uh * Complex64::new(1.0 / s, 0.0);
        }
    }
    (pinv, rank)
}

impl ClosureSystem {
    pub fn mode_count(&self) -> usize {
        self.modes.len()
    }

    pub fn check_rank(&self) -> Result<(), ClosureError> {
        if self.rank < self.modes.len() {
            return Err(ClosureError::RankDeficient { rank: self.rank, modes: self.modes.len() });
        }
        Ok(())
    }

    pub fn pseudo_inverse(&self) -> DMatrix<Complex64> {
        pseudo_inverse(&self.a).0
    }

    /// `A e^{Λt} A⁺ h0`.
    pub fn evolve(&self, h0: &MomentVector, t: f64) -> MomentVector {
        let beta = self.pseudo_inverse() * DVector::from_column_slice(h0.as_slice());
        let grown = DVector::from_iterator(beta.len(), beta.iter().zip(&self.lambda).map(|(b, l)| b * (l * t).exp()));
        let h = &self.a * grown;
        MomentVector::from_column_slice(h.as_slice())
    }

    /// Generator in the basis `i^p e_j` (`p` the longitudinal parity), where
    /// a conjugation-closed mode set gives a real matrix.
    pub fn real_form(&self) -> Matrix8 {
        let mut g = self.generator;
        for i in 0..8 {
            for j in 0..8 {
                let p = LONGITUDINAL_PARITY[j] as i32 - LONGITUDINAL_PARITY[i] as i32;
                g[(i, j)] *= I.powi(p);
            }
        }
        g
    }

    /// Eigenvalues of the generator, sorted by real then imaginary part.
    pub fn generator_eigenvalues(&self) -> Vec<Complex64> {
        let mut ev: Vec<Complex64> = self
            .generator
            .schur()
            .eigenvalues()
            .map(|v| v.iter().copied().collect())
            .unwrap_or_default();
        ev.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
        ev
    }
}

/// Discrete roots at `k` (below the essential line too if `ghost`),
/// labelled by the traced branches where a branch reaches `k`.
pub fn labelled_roots(
    k: f64,
    params: &ModelParams,
    ghost: bool,
) -> Result<Vec<(Option<ModeLabel>, RootRecord)>, ClosureError> {
    let wave = WaveContext::new(k, params)?;
    let sf = SpectralFunction::new(params, &wave);
    let roots = RootFinder::new(&sf).all_roots(ghost)?;
    // branch endpoints at k: traced, or the seeds themselves below the
    // first traced wave number
    let ends: Vec<(ModeLabel, Complex64)> = if k < SEED_K / params.tau {
        seed_modes(params, k).map(|s| s.into_iter().map(|(l, _, z)| (l, z)).collect()).unwrap_or_default()
    } else {
        trace_all(params, k, &StepControl::for_tau(params.tau))
            .unwrap_or_default()
            .into_iter()
            .filter(|b| b.last().k == k)
            .map(|b| (b.label, b.last().lambda))
            .collect()
    };
    Ok(roots
        .into_iter()
        .map(|rec| {
            let label = ends
                .iter()
                .filter(|e| e.0.factor() == rec.factor)
                .min_by(|a, b| (a.1 - rec.lambda).norm().total_cmp(&(b.1 - rec.lambda).norm()))
                .filter(|e| (e.1 - rec.lambda).norm() < 1e-6 * (1.0 + rec.lambda.norm()))
                .map(|e| e.0);
            (label, rec)
        })
        .collect())
}

pub fn hydrodynamic_generator(k: f64, params: &ModelParams) -> Result<ClosureSystem, ClosureError> {
    let wave = WaveContext::new(k, params)?;
    let sf = SpectralFunction::new(params, &wave);
    let mut modes = Vec::new();
    for (label, rec) in labelled_roots(k, params, params.r < 0.0)? {
        let info = eigenvector_alpha(&rec, params, &wave)?;
        let g = sf.resolvent(rec.lambda)?;
        // a kernel wider than the zero's multiplicity in Σ is numerical
        // near-degeneracy, not extra modes
        for alpha in info.vectors.into_iter().take(rec.multiplicity_in_sigma) {
            modes.push(ClosureMode { label, lambda: rec.lambda, alpha, moments: g * alpha });
        }
    }
    let m = modes.len();
    let a = DMatrix::from_fn(8, m, |i, j| modes[j].moments[i]);
    let lambda: Vec<Complex64> = modes.iter().map(|md| md.lambda).collect();
    let (pinv, rank) = pseudo_inverse(&a);
    let al = DMatrix::from_fn(8, m, |i, j| a[(i, j)] * lambda[j]);
    let g = al * pinv;
    let generator = Matrix8::from_fn(|i, j| g[(i, j)]);
    Ok(ClosureSystem { k, params: *params, modes, a, lambda, generator, rank })
}

/// `‖(D_r G_S - Id) α‖` for a closure column.
pub fn kernel_residual(mode: &ClosureMode, params: &ModelParams, wave: &WaveContext) -> Result<f64, ClosureError> {
    let sf = SpectralFunction::new(params, wave);
    let g = sf.resolvent(mode.lambda)?;
    Ok((kernel_from_resolvent(&g, params.r) * mode.alpha).norm() / mode.alpha.norm())
}
