//! Faddeeva function, plasma dispersion function and friends.
//!
//! `faddeeva_w` uses a Laplace continued fraction outside the ellipse
//! `(x/6.3)^2 + (y/4.4)^2 < 1` and a Taylor expansion about the nearest
//! node of a precomputed table inside it. The table is filled once by
//! stepping the ODE `w' = -2zw + 2i/sqrt(pi)` to the right from the
//! imaginary axis, where `w(iy) = erfcx(y)`.

use num_complex::Complex64;

use std::sync::OnceLock;

pub type ComplexScalar = Complex64;

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// sqrt(pi/2)
pub const SQRT_HALF_PI: f64 = 1.253_314_137_315_500_3;
const TWO_OVER_SQRT_PI: f64 = 1.128_379_167_095_512_6;
const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Which analytic continuation of Z is meant.
///
/// `Upper` continues Z from `Im ζ > 0`, `Lower` from `Im ζ < 0`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum HalfPlaneBranch {
    Upper,
    Lower,
}

impl HalfPlaneBranch {
    /// Natural branch of a point; the real axis counts as `Upper`.
    pub fn natural(zeta: Complex64) -> Self {
        if zeta.im >= 0.0 {
            HalfPlaneBranch::Upper
        } else {
            HalfPlaneBranch::Lower
        }
    }

    pub fn flip(self) -> Self {
        match self {
            HalfPlaneBranch::Upper => HalfPlaneBranch::Lower,
            HalfPlaneBranch::Lower => HalfPlaneBranch::Upper,
        }
    }
}

// ---------------------------------------------------------------------------
// Faddeeva

const STEP: f64 = 0.25;
const NX: usize = 29; // covers x in [0, 7]
const NY: usize = 21; // covers y in [0, 5]

struct Table {
    nodes: Vec<Complex64>,
}

impl Table {
    fn at(&self, i: usize, j: usize) -> Complex64 {
        self.nodes[j * NX + i]
    }
}

fn erfcx(y: f64) -> f64 {
    (y * y).exp() * libm::erfc(y)
}

/// Taylor expansion of w about `c`, where `w0 = w(c)`.
fn taylor(c: Complex64, w0: Complex64, d: Complex64) -> Complex64 {
    let mut prev = w0;
    let mut cur = -2.0 * c * w0 + I * TWO_OVER_SQRT_PI;
    let mut sum = prev + cur * d;
    let mut dp = d;
    for n in 1..60 {
        let next = -2.0 * (c * cur + prev) / (n as f64 + 1.0);
        dp *= d;
        let term = next * dp;
        sum += term;
        if n > 8 && term.norm() < 1e-18 * sum.norm() {
            break;
        }
        prev = cur;
        cur = next;
    }
    sum
}

fn table() -> &'static Table {
    static TABLE: OnceLock<Table> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut nodes = vec![Complex64::new(0.0, 0.0); NX * NY];
        for j in 0..NY {
            let y = j as f64 * STEP;
            let mut w = Complex64::new(erfcx(y), 0.0);
            nodes[j * NX] = w;
            for i in 1..NX {
                let c = Complex64::new((i - 1) as f64 * STEP, y);
                w = taylor(c, w, Complex64::new(STEP, 0.0));
                nodes[j * NX + i] = w;
            }
        }
        Table { nodes }
    })
}

fn continued_fraction(z: Complex64) -> Complex64 {
    let rho = ((z.re / 6.3).powi(2) + (z.im / 4.4).powi(2)).sqrt();
    let nu = (2.0 * (3.0 + 1442.0 / (26.0 * rho + 77.0))) as usize + 10;
    let mut t = Complex64::new(0.0, 0.0);
    for n in (1..=nu).rev() {
        t = cdiv(Complex64::new(n as f64 * 0.5, 0.0), z - t);
    }
    cdiv(I * INV_SQRT_PI, z - t)
}

/// Smith's division, safe for operands near the overflow threshold.
pub fn cdiv(a: Complex64, b: Complex64) -> Complex64 {
    if b.re.abs() >= b.im.abs() {
        let r = b.im / b.re;
        let d = b.re + b.im * r;
        Complex64::new((a.re + a.im * r) / d, (a.im - a.re * r) / d)
    } else {
        let r = b.re / b.im;
        let d = b.re * r + b.im;
        Complex64::new((a.re * r + a.im) / d, (a.im * r - a.re) / d)
    }
}

/// w on the closed first quadrant.
fn w_quadrant(z: Complex64) -> Complex64 {
    if (z.re / 6.3).powi(2) + (z.im / 4.4).powi(2) >= 1.0 {
        return continued_fraction(z);
    }
    let i = (z.re / STEP).round() as usize;
    let j = (z.im / STEP).round() as usize;
    let c = Complex64::new(i as f64 * STEP, j as f64 * STEP);
    taylor(c, table().at(i, j), z - c)
}

/// `exp(-z^2)` with the modulus capped below overflow.
fn gauss_capped(z: Complex64) -> Complex64 {
    let e = -(z * z);
    Complex64::from_polar(e.re.min(709.0).exp(), e.im)
}

/// Faddeeva function `w(z) = exp(-z^2) erfc(-iz)`.
pub fn faddeeva_w(z: Complex64) -> Complex64 {
    if z.im >= 0.0 {
        if z.re >= 0.0 {
            w_quadrant(z)
        } else {
            w_quadrant(Complex64::new(-z.re, z.im)).conj()
        }
    } else {
        2.0 * gauss_capped(z) - faddeeva_w(-z)
    }
}

// ---------------------------------------------------------------------------
// Plasma dispersion function

/// Z on the requested branch; analytic continuation off its half-plane.
pub fn plasma_z(zeta: Complex64, branch: HalfPlaneBranch) -> Complex64 {
    match branch {
        HalfPlaneBranch::Upper => I * SQRT_HALF_PI * faddeeva_w(zeta / std::f64::consts::SQRT_2),
        HalfPlaneBranch::Lower => plasma_z(zeta.conj(), HalfPlaneBranch::Upper).conj(),
    }
}

/// Truncated asymptotic series `-sum_{j<terms} (2j-1)!! / zeta^(2j+1)`.
pub fn plasma_z_asymptotic(zeta: Complex64, terms: usize) -> Complex64 {
    let inv2 = (zeta * zeta).inv();
    let mut t = zeta.inv();
    let mut sum = Complex64::new(0.0, 0.0);
    for j in 0..terms {
        sum -= t;
        t *= inv2 * (2 * j + 1) as f64;
    }
    sum
}

/// `[Z, Z', ..., Z^(n)]` by the recurrence `Z^(m+1) = -zeta Z^(m) - m Z^(m-1)`.
pub fn z_derivative_seq(zeta: Complex64, branch: HalfPlaneBranch, n: usize) -> Vec<Complex64> {
    assert!(n <= 8, "derivatives above order 8 are not supported");
    let mut out = Vec::with_capacity(n + 1);
    let z = plasma_z(zeta, branch);
    out.push(z);
    if n >= 1 {
        out.push(-zeta * z - 1.0);
    }
    for m in 1..n {
        let next = -zeta * out[m] - m as f64 * out[m - 1];
        out.push(next);
    }
    out
}

/// Probabilists' Hermite polynomial `He_n`.
pub fn hermite_he(n: usize, x: Complex64) -> Complex64 {
    let mut a = Complex64::new(1.0, 0.0);
    if n == 0 {
        return a;
    }
    let mut b = x;
    for m in 1..n {
        let c = x * b - m as f64 * a;
        a = b;
        b = c;
    }
    b
}

/// Gaussian moment `E[v^m] = (m-1)!!` for even `m`, zero otherwise.
pub fn gaussian_moment(m: usize) -> f64 {
    if m % 2 == 1 {
        return 0.0;
    }
    (1..m).step_by(2).map(|k| k as f64).product()
}

// ---------------------------------------------------------------------------
// Cauchy moments I_n(zeta) = int v^n g(v) / (v - zeta) dv

/// Radius beyond which moments come from their asymptotic series.
pub const MOMENT_ASYMPTOTIC_RADIUS: f64 = 11.0;

/// `[I_0, ..., I_n]` with `I_0 = Z` and `I_m = zeta I_(m-1) + E[v^(m-1)]`.
///
/// On the natural half-plane with `|zeta| >= 11` the series
/// `I_m ~ -sum_j E[v^(m+j)] zeta^-(j+1)` is used instead, which avoids the
/// cancellation of the forward recurrence.
pub fn cauchy_moments(zeta: Complex64, branch: HalfPlaneBranch, n: usize) -> Vec<Complex64> {
    let natural = HalfPlaneBranch::natural(zeta) == branch || zeta.im == 0.0;
    if natural && zeta.norm() >= MOMENT_ASYMPTOTIC_RADIUS {
        return (0..=n).map(|m| moment_asymptotic(zeta, m)).collect();
    }
    let mut out = Vec::with_capacity(n + 1);
    out.push(plasma_z(zeta, branch));
    for m in 1..=n {
        let next = zeta * out[m - 1] + gaussian_moment(m - 1);
        out.push(next);
    }
    out
}

fn moment_asymptotic(zeta: Complex64, m: usize) -> Complex64 {
    let inv = zeta.inv();
    let inv2 = inv * inv;
    // first nonzero term has j with m + j even
    let mut j = m % 2;
    let mut p = inv.powi(j as i32 + 1);
    let mut mu = gaussian_moment(m + j);
    let mut sum = Complex64::new(0.0, 0.0);
    for _ in 0..400 {
        let term = p * mu;
        sum -= term;
        if term.norm() <= 1e-18 * sum.norm() {
            break;
        }
        mu *= (m + j + 1) as f64;
        j += 2;
        p *= inv2;
    }
    sum
}
