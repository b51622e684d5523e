//! The spectral function `Σ(λ) = Σ_shear(λ)^2 · Σ_diff,ac(λ)` and the
//! determinant it comes from.
//!
//! Coordinates: `ζ = i(τλ + 1)/κ`, `z = -τλ - 1`, `κ = τk`. The branch of
//! Z is always the natural one, `Upper` iff `Re λ > -1/τ`.

mod laurent;

use crate::specfun::{self, cdiv, HalfPlaneBranch};
use laurent::{ExactForm, ExactPoly, ASYMPTOTIC_TERMS};
use nalgebra::SMatrix;
use num_complex::Complex64;
use std::sync::OnceLock;

pub type Matrix8 = SMatrix<Complex64, 8, 8>;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Distance from the essential line below which points are rejected.
pub const ESSENTIAL_LINE_GUARD: f64 = 1e-9;

/// `|ζ|` from which the factors are evaluated in exact Laurent form.
pub const LAURENT_RADIUS: f64 = 9.0;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectralError {
    #[error("point lies on the essential line Re λ = -1/τ")]
    EssentialLine,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

// ---------------------------------------------------------------------------
// Parameters and points

/// Relaxation time and Prandtl number; `r = 1 - Pr`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelParams {
    pub tau: f64,
    pub prandtl: f64,
    pub r: f64,
}

impl ModelParams {
    pub fn new(tau: f64, prandtl: f64) -> Result<Self, SpectralError> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(SpectralError::InvalidParams(format!("tau must be positive, got {tau}")));
        }
        if !prandtl.is_finite() {
            return Err(SpectralError::InvalidParams("prandtl must be finite".into()));
        }
        Ok(ModelParams { tau, prandtl, r: 1.0 - prandtl })
    }

    /// Parameters given through `r` directly.
    pub fn with_r(tau: f64, r: f64) -> Result<Self, SpectralError> {
        let mut p = Self::new(tau, 1.0 - r)?;
        p.r = r;
        Ok(p)
    }

    /// Real part of the essential line, `-1/τ`.
    pub fn essential_line(&self) -> f64 {
        -1.0 / self.tau
    }

    /// `τ_slow = τ/(1 - r)`; undefined for `r >= 1`.
    pub fn tau_slow(&self) -> Option<f64> {
        (self.r < 1.0).then(|| self.tau / (1.0 - self.r))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WaveContext {
    pub k: f64,
    pub kappa: f64,
}

impl WaveContext {
    pub fn new(k: f64, params: &ModelParams) -> Result<Self, SpectralError> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(SpectralError::InvalidParams(format!("k must be positive, got {k}")));
        }
        Ok(WaveContext { k, kappa: params.tau * k })
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralPoint {
    pub lambda: Complex64,
    pub zeta: Complex64,
    pub z: Complex64,
    pub branch: HalfPlaneBranch,
}

impl SpectralPoint {
    pub fn new(
        lambda: Complex64,
        params: &ModelParams,
        wave: &WaveContext,
    ) -> Result<Self, SpectralError> {
        let gap = lambda.re - params.essential_line();
        if !(gap.abs() >= ESSENTIAL_LINE_GUARD) || !lambda.im.is_finite() {
            return Err(SpectralError::EssentialLine);
        }
        let a = params.tau * lambda + 1.0;
        let branch = if gap > 0.0 { HalfPlaneBranch::Upper } else { HalfPlaneBranch::Lower };
        Ok(SpectralPoint { lambda, zeta: I * a / wave.kappa, z: -a, branch })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Factor {
    Shear,
    DiffAc,
}

impl Factor {
    pub const ALL: [Factor; 2] = [Factor::Shear, Factor::DiffAc];

    /// Multiplicity a simple zero of the factor has in Σ.
    pub fn multiplicity_in_sigma(self) -> usize {
        match self {
            Factor::Shear => 2,
            Factor::DiffAc => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Factor::Shear => "shear",
            Factor::DiffAc => "diff_ac",
        }
    }

    fn index(self) -> usize {
        match self {
            Factor::Shear => 0,
            Factor::DiffAc => 1,
        }
    }

    /// `(first polynomial index, κ power of the normalization, constant)`
    fn normalization(self) -> (usize, i32, f64) {
        match self {
            Factor::Shear => (0, 2, 10.0),
            Factor::DiffAc => (3, 4, 30.0),
        }
    }
}

// ---------------------------------------------------------------------------
// Coefficient polynomials

/// Σ₀…Σ₅ as coefficient arrays in ascending powers of ζ.
#[derive(Clone, Debug, PartialEq)]
pub struct PolynomialSet {
    pub sigma: [Vec<Complex64>; 6],
}

fn numeric(poly: &ExactPoly, kappa: f64, r: f64, kappa_shift: i32) -> Vec<(i32, Complex64)> {
    let mut out: Vec<(i32, Complex64)> = Vec::new();
    for ((zp, kp, rp), (re, im)) in poly.terms() {
        let s = kappa.powi(kp as i32 - kappa_shift) * r.powi(rp as i32);
        let c = Complex64::new(re as f64, im as f64) * s;
        match out.iter_mut().find(|(p, _)| *p == zp) {
            Some(e) => e.1 += c,
            None => out.push((zp, c)),
        }
    }
    out
}

fn dense(poly: &ExactPoly, kappa: f64, r: f64, kappa_shift: i32, scale: f64) -> Vec<Complex64> {
    let terms = numeric(poly, kappa, r, kappa_shift);
    let deg = terms.iter().map(|t| t.0).max().unwrap_or(0).max(0) as usize;
    let mut c = vec![Complex64::new(0.0, 0.0); deg + 1];
    for (p, v) in terms {
        c[p as usize] += v / scale;
    }
    c
}

pub fn coefficient_polynomials(params: &ModelParams, wave: &WaveContext) -> PolynomialSet {
    let sigma = std::array::from_fn(|i| {
        dense(&ExactPoly::from_monomials(laurent::SIGMA[i]), wave.kappa, params.r, 0, 1.0)
    });
    PolynomialSet { sigma }
}

fn horner(c: &[Complex64], x: Complex64) -> Complex64 {
    c.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, &a| acc * x + a)
}

// ---------------------------------------------------------------------------
// Exact tables, built once

struct ExactTables {
    /// `[factor][0 = value, 1 = d/dζ]`
    forms: [[(ExactForm, ExactPoly); 2]; 2],
}

fn exact_tables() -> &'static ExactTables {
    static T: OnceLock<ExactTables> = OnceLock::new();
    T.get_or_init(|| {
        let build = |f: Factor| {
            let v = ExactForm::factor(f.normalization().0);
            let d = v.derivative();
            let lv = v.laurent();
            let ld = d.laurent();
            [(v, lv), (d, ld)]
        };
        ExactTables { forms: [build(Factor::Shear), build(Factor::DiffAc)] }
    })
}

/// A normalized form `(P + QZ + RZ²)/(c κ^n)` for fixed `(κ, r)`.
#[derive(Clone, Debug)]
struct NumericForm {
    p: Vec<Complex64>,
    q: Vec<Complex64>,
    r: Vec<Complex64>,
    /// `laurent[i]` multiplies `ζ^-i`
    laurent: Vec<Complex64>,
    /// coefficients of positive powers; empty unless the tables are wrong
    growing: Vec<Complex64>,
}

impl NumericForm {
    fn new(form: &ExactForm, laurent: &ExactPoly, kappa: f64, r: f64, f: Factor) -> Self {
        let (_, shift, c) = f.normalization();
        let mut lc = Vec::new();
        let mut gc = Vec::new();
        for (p, v) in numeric(laurent, kappa, r, shift) {
            let (vec, idx) = if p <= 0 { (&mut lc, (-p) as usize) } else { (&mut gc, p as usize) };
            if vec.len() <= idx {
                vec.resize(idx + 1, Complex64::new(0.0, 0.0));
            }
            vec[idx] += v / c;
        }
        NumericForm {
            p: dense(&form.p, kappa, r, shift, c),
            q: dense(&form.q, kappa, r, shift, c),
            r: dense(&form.r, kappa, r, shift, c),
            laurent: lc,
            growing: gc,
        }
    }

    fn direct(&self, zeta: Complex64, zv: Complex64) -> Complex64 {
        horner(&self.p, zeta) + zv * (horner(&self.q, zeta) + zv * horner(&self.r, zeta))
    }

    fn asymptotic(&self, zeta: Complex64) -> Complex64 {
        let u = cdiv(Complex64::new(1.0, 0.0), zeta);
        let mut v = horner(&self.laurent, u);
        if !self.growing.is_empty() {
            v += horner(&self.growing, zeta) - self.growing[0];
        }
        if zeta.norm() < 1e4 {
            let a = specfun::plasma_z_asymptotic(zeta, ASYMPTOTIC_TERMS);
            let t = asymptotic_tail(u);
            let q = horner(&self.q, zeta);
            let r = horner(&self.r, zeta);
            v += (q + 2.0 * r * a) * t + r * t * t;
        }
        v
    }
}

/// `-sum_{j>=M} (2j-1)!! u^(2j+1)` with `u = 1/ζ`.
fn asymptotic_tail(u: Complex64) -> Complex64 {
    let u2 = u * u;
    let mut t = u.powi(2 * ASYMPTOTIC_TERMS as i32 + 1)
        * specfun::gaussian_moment(2 * ASYMPTOTIC_TERMS);
    let mut sum = Complex64::new(0.0, 0.0);
    let mut last = f64::INFINITY;
    for j in ASYMPTOTIC_TERMS..ASYMPTOTIC_TERMS + 200 {
        let m = t.norm();
        if m > last {
            break;
        }
        sum -= t;
        if m <= 1e-18 * sum.norm() {
            break;
        }
        last = m;
        t *= u2 * (2 * j + 1) as f64;
    }
    sum
}

// ---------------------------------------------------------------------------
// N(ζ)

/// Entries of `M(w)` on and above the diagonal: `(row, col, coefficients of
/// w^0..w^6, scale)`.
pub const M_ENTRIES: [(usize, usize, [f64; 7], f64); 16] = {
    const S6: f64 = 0.408_248_290_463_863; // 1/√6
    const S10: f64 = 0.316_227_766_016_837_94; // 1/√10
    const S15: f64 = 0.129_099_444_873_580_55; // 1/(2√15)
    [
        (0, 0, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0),
        (0, 3, [0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0),
        (1, 1, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0),
        (2, 2, [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 1.0),
        (3, 3, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], 1.0),
        (0, 4, [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], S6),
        (0, 7, [0.0, -3.0, 0.0, 1.0, 0.0, 0.0, 0.0], S10),
        (1, 5, [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], S10),
        (2, 6, [-1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], S10),
        (3, 4, [0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0], S6),
        (3, 7, [0.0, 0.0, -3.0, 0.0, 1.0, 0.0, 0.0], S10),
        (4, 4, [5.0, 0.0, -2.0, 0.0, 1.0, 0.0, 0.0], 1.0 / 6.0),
        (4, 7, [0.0, 7.0, 0.0, -4.0, 0.0, 1.0, 0.0], S15),
        (5, 5, [9.0, 0.0, -2.0, 0.0, 1.0, 0.0, 0.0], 0.1),
        (6, 6, [9.0, 0.0, -2.0, 0.0, 1.0, 0.0, 0.0], 0.1),
        (7, 7, [0.0, 0.0, 13.0, 0.0, -6.0, 0.0, 1.0], 0.1),
    ]
};

/// Diagonal of `D_r`.
pub fn d_r(r: f64) -> [f64; 8] {
    [1.0, 1.0, 1.0, 1.0, 1.0, r, r, r]
}

/// `N(ζ) = ∫ M(w) g(w)/(w - ζ) dw` built from Cauchy moments of Z.
pub fn n_matrix(zeta: Complex64, branch: HalfPlaneBranch) -> Matrix8 {
    let moments = specfun::cauchy_moments(zeta, branch, 6);
    let mut n = Matrix8::zeros();
    for &(i, j, c, s) in M_ENTRIES.iter() {
        let v: Complex64 = c.iter().zip(&moments).map(|(a, m)| m * *a).sum::<Complex64>() * s;
        n[(i, j)] = v;
        n[(j, i)] = v;
    }
    n
}

// ---------------------------------------------------------------------------
// Evaluator

/// Σ and its factors for fixed `(τ, Pr, k)`.
#[derive(Clone, Debug)]
pub struct SpectralFunction {
    params: ModelParams,
    wave: WaveContext,
    polys: PolynomialSet,
    forms: [[NumericForm; 2]; 2],
}

impl SpectralFunction {
    pub fn new(params: &ModelParams, wave: &WaveContext) -> Self {
        let t = exact_tables();
        let forms = [Factor::Shear, Factor::DiffAc].map(|f| {
            let e = &t.forms[f.index()];
            [
                NumericForm::new(&e[0].0, &e[0].1, wave.kappa, params.r, f),
                NumericForm::new(&e[1].0, &e[1].1, wave.kappa, params.r, f),
            ]
        });
        SpectralFunction { params: *params, wave: *wave, polys: coefficient_polynomials(params, wave), forms }
    }

    /// Convenience constructor from raw numbers.
    pub fn from_values(tau: f64, prandtl: f64, k: f64) -> Result<Self, SpectralError> {
        let p = ModelParams::new(tau, prandtl)?;
        let w = WaveContext::new(k, &p)?;
        Ok(Self::new(&p, &w))
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn wave(&self) -> &WaveContext {
        &self.wave
    }

    pub fn polynomials(&self) -> &PolynomialSet {
        &self.polys
    }

    pub fn point(&self, lambda: Complex64) -> Result<SpectralPoint, SpectralError> {
        SpectralPoint::new(lambda, &self.params, &self.wave)
    }

    fn eval_form(&self, f: Factor, order: usize, pt: &SpectralPoint, zv: Option<Complex64>) -> Complex64 {
        let form = &self.forms[f.index()][order];
        if pt.zeta.norm() >= LAURENT_RADIUS {
            form.asymptotic(pt.zeta)
        } else {
            let zv = zv.unwrap_or_else(|| specfun::plasma_z(pt.zeta, pt.branch));
            form.direct(pt.zeta, zv)
        }
    }

    fn z_value(&self, pt: &SpectralPoint) -> Option<Complex64> {
        (pt.zeta.norm() < LAURENT_RADIUS).then(|| specfun::plasma_z(pt.zeta, pt.branch))
    }

    /// `dζ/dλ = iτ/κ`
    fn dzeta(&self) -> Complex64 {
        I * self.params.tau / self.wave.kappa
    }

    pub fn factor_at(&self, f: Factor, pt: &SpectralPoint) -> Complex64 {
        self.eval_form(f, 0, pt, self.z_value(pt))
    }

    /// Factor value and its derivative in λ.
    pub fn factor_with_derivative_at(&self, f: Factor, pt: &SpectralPoint) -> (Complex64, Complex64) {
        let zv = self.z_value(pt);
        (self.eval_form(f, 0, pt, zv), self.eval_form(f, 1, pt, zv) * self.dzeta())
    }

    pub fn factor(&self, f: Factor, lambda: Complex64) -> Result<Complex64, SpectralError> {
        Ok(self.factor_at(f, &self.point(lambda)?))
    }

    pub fn factor_with_derivative(
        &self,
        f: Factor,
        lambda: Complex64,
    ) -> Result<(Complex64, Complex64), SpectralError> {
        Ok(self.factor_with_derivative_at(f, &self.point(lambda)?))
    }

    /// `(Σ_shear, Σ_diff,ac)`.
    pub fn factors(&self, lambda: Complex64) -> Result<(Complex64, Complex64), SpectralError> {
        let pt = self.point(lambda)?;
        let zv = self.z_value(&pt);
        Ok((self.eval_form(Factor::Shear, 0, &pt, zv), self.eval_form(Factor::DiffAc, 0, &pt, zv)))
    }

    pub fn sigma(&self, lambda: Complex64) -> Result<Complex64, SpectralError> {
        let (s, d) = self.factors(lambda)?;
        Ok(s * s * d)
    }

    /// `dΣ/dλ = 2 S S' D + S² D'`.
    pub fn sigma_prime(&self, lambda: Complex64) -> Result<Complex64, SpectralError> {
        let pt = self.point(lambda)?;
        let (s, ds) = self.factor_with_derivative_at(Factor::Shear, &pt);
        let (d, dd) = self.factor_with_derivative_at(Factor::DiffAc, &pt);
        Ok(2.0 * s * ds * d + s * s * dd)
    }

    /// `G_S = N(ζ)/(iκ)`.
    pub fn resolvent(&self, lambda: Complex64) -> Result<Matrix8, SpectralError> {
        let pt = self.point(lambda)?;
        Ok(n_matrix(pt.zeta, pt.branch) / (I * self.wave.kappa))
    }

    /// `D_r G_S - Id`, whose kernel holds the moment eigenvectors.
    pub fn kernel_matrix(&self, lambda: Complex64) -> Result<Matrix8, SpectralError> {
        let g = self.resolvent(lambda)?;
        Ok(kernel_from_resolvent(&g, self.params.r))
    }

    /// `det(D_r N(ζ) - iκ Id)/(iκ)^8`.
    pub fn sigma_det(&self, lambda: Complex64) -> Result<Complex64, SpectralError> {
        Ok(self.kernel_matrix(lambda)?.determinant())
    }
}

/// `D_r G - Id`.
pub fn kernel_from_resolvent(g: &Matrix8, r: f64) -> Matrix8 {
    let d = d_r(r);
    let mut k = *g;
    for i in 0..8 {
        for j in 0..8 {
            k[(i, j)] *= d[i];
        }
        k[(i, i)] -= 1.0;
    }
    k
}

// ---------------------------------------------------------------------------
// Free-function surface

pub fn sigma_factors(
    point: &SpectralPoint,
    params: &ModelParams,
    wave: &WaveContext,
) -> Result<(Complex64, Complex64), SpectralError> {
    SpectralFunction::new(params, wave).factors(point.lambda)
}

pub fn sigma(point: &SpectralPoint, params: &ModelParams, wave: &WaveContext) -> Result<Complex64, SpectralError> {
    SpectralFunction::new(params, wave).sigma(point.lambda)
}

pub fn sigma_prime(
    point: &SpectralPoint,
    params: &ModelParams,
    wave: &WaveContext,
) -> Result<Complex64, SpectralError> {
    SpectralFunction::new(params, wave).sigma_prime(point.lambda)
}

pub fn sigma_det(
    point: &SpectralPoint,
    params: &ModelParams,
    wave: &WaveContext,
) -> Result<Complex64, SpectralError> {
    SpectralFunction::new(params, wave).sigma_det(point.lambda)
}
