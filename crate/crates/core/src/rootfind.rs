//! Zeros of Σ_shear and Σ_diff,ac by the argument principle.
//!
//! A rectangle's zero count is the winding number of the factor along its
//! boundary. Rectangles are quadrisected until each holds one zero (or has
//! shrunk below 1e-8), then Newton polishes every zero.

use crate::spectral::{Factor, ModelParams, SpectralError, SpectralFunction, WaveContext};
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

/// Upper bound on boundary segments for one winding number.
pub const MAX_SEGMENTS: usize = 1 << 20;
/// Rectangles this small are not split further.
pub const MIN_DIAMETER: f64 = 1e-8;

const JITTER_TRIES: u32 = 5;
const JITTER: f64 = 1e-6;
/// Quadrisection cut, kept off the centre so real roots never sit on a cut.
const CUT: f64 = 0.5 + 0.037_137;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum RootFindError {
    #[error("zero on the rectangle boundary")]
    BoundaryZero,
    #[error("boundary refinement did not converge")]
    NonConvergent,
    #[error("Newton iteration diverged")]
    Diverged,
    #[error("invalid rectangle: {0}")]
    InvalidRect(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SearchRect {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl SearchRect {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Self {
        SearchRect { re_min, re_max, im_min, im_max }
    }

    pub fn diameter(&self) -> f64 {
        (self.re_max - self.re_min).hypot(self.im_max - self.im_min)
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    /// Same centre, each side scaled by `s`.
    pub fn scaled(&self, s: f64) -> Self {
        let c = self.center();
        let hw = 0.5 * s * (self.re_max - self.re_min);
        let hh = 0.5 * s * (self.im_max - self.im_min);
        SearchRect::new(c.re - hw, c.re + hw, c.im - hh, c.im + hh)
    }

    /// Mirror image under complex conjugation.
    pub fn conj(&self) -> Self {
        SearchRect::new(self.re_min, self.re_max, -self.im_max, -self.im_min)
    }

    fn quadrants(&self) -> [SearchRect; 4] {
        let xm = self.re_min + CUT * (self.re_max - self.re_min);
        let ym = self.im_min + CUT * (self.im_max - self.im_min);
        [
            SearchRect::new(self.re_min, xm, self.im_min, ym),
            SearchRect::new(xm, self.re_max, self.im_min, ym),
            SearchRect::new(self.re_min, xm, ym, self.im_max),
            SearchRect::new(xm, self.re_max, ym, self.im_max),
        ]
    }

    fn validate(&self, params: &ModelParams) -> Result<(), RootFindError> {
        let ok = self.re_min < self.re_max && self.im_min < self.im_max;
        if !ok || ![self.re_min, self.re_max, self.im_min, self.im_max].iter().all(|v| v.is_finite()) {
            return Err(RootFindError::InvalidRect(format!("{self:?}")));
        }
        let e = params.essential_line();
        if self.re_min <= e && self.re_max >= e {
            return Err(RootFindError::InvalidRect("rectangle meets the essential line".into()));
        }
        Ok(())
    }

    /// Deterministic offset of all four sides, seeded by the coordinates.
    fn jittered(&self, attempt: u32) -> Self {
        let mut h = 0xcbf2_9ce4_8422_2325u64 ^ attempt as u64;
        for v in [self.re_min, self.re_max, self.im_min, self.im_max] {
            h ^= v.to_bits();
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
        let size = (self.re_max - self.re_min).min(self.im_max - self.im_min);
        let amp = JITTER * size.min(1.0) * (attempt + 1) as f64;
        let mut next = || {
            h ^= h >> 33;
            h = h.wrapping_mul(0xff51_afd7_ed55_8ccd);
            h ^= h >> 29;
            ((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2.0 * amp
        };
        SearchRect::new(self.re_min + next(), self.re_max + next(), self.im_min + next(), self.im_max + next())
    }
}

/// A located zero of one factor.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootRecord {
    pub lambda: Complex64,
    pub factor: Factor,
    /// Multiplicity as a zero of Σ.
    pub multiplicity_in_sigma: usize,
    /// `|factor(λ)|`
    pub residual: f64,
}

impl RootRecord {
    /// Multiplicity as a zero of the factor itself.
    pub fn order(&self) -> usize {
        self.multiplicity_in_sigma / self.factor.multiplicity_in_sigma()
    }
}

/// A rectangle holding `count` zeros (with multiplicity).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Localized {
    pub rect: SearchRect,
    pub count: usize,
}

// ---------------------------------------------------------------------------
// Winding number

#[derive(Clone, Copy)]
struct Sample {
    at: Complex64,
    f: Complex64,
    /// `|f'/f|`
    log_slope: f64,
}

fn sample(sf: &SpectralFunction, factor: Factor, at: Complex64) -> Result<Sample, RootFindError> {
    let (f, df) = sf.factor_with_derivative(factor, at)?;
    if !(f.norm() > 0.0) || !f.re.is_finite() || !f.im.is_finite() {
        return Err(RootFindError::BoundaryZero);
    }
    Ok(Sample { at, f, log_slope: (df / f).norm() })
}

fn winding(sf: &SpectralFunction, factor: Factor, rect: &SearchRect) -> Result<usize, RootFindError> {
    let corners = [
        Complex64::new(rect.re_min, rect.im_min),
        Complex64::new(rect.re_max, rect.im_min),
        Complex64::new(rect.re_max, rect.im_max),
        Complex64::new(rect.re_min, rect.im_max),
    ];
    let min_h = 1e-11 * rect.diameter();
    let mut total = 0.0;
    let mut segments = 0usize;
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        const START: usize = 16;
        let pts = (0..=START)
            .map(|i| sample(sf, factor, a + (b - a) * (i as f64 / START as f64)))
            .collect::<Result<Vec<_>, _>>()?;
        // the total is order independent, so a plain stack will do
        let mut stack: Vec<(Sample, Sample)> = pts.windows(2).map(|w| (w[0], w[1])).collect();
        while let Some((p, q)) = stack.pop() {
            let d = (q.f / p.f).arg();
            let h = (q.at - p.at).norm();
            if d.abs() < PI / 4.0 && h * p.log_slope.max(q.log_slope) < PI / 2.0 {
                total += d;
                segments += 1;
                if segments > MAX_SEGMENTS {
                    return Err(RootFindError::NonConvergent);
                }
                continue;
            }
            if h < min_h {
                return Err(RootFindError::BoundaryZero);
            }
            let m = sample(sf, factor, 0.5 * (p.at + q.at))?;
            stack.push((p, m));
            stack.push((m, q));
        }
    }
    let w = total / (2.0 * PI);
    let n = w.round();
    if (w - n).abs() > 0.05 || n < 0.0 {
        return Err(RootFindError::NonConvergent);
    }
    Ok(n as usize)
}

/// Winding count with jitter retries; returns the rectangle actually used.
fn count_with_rect(
    sf: &SpectralFunction,
    factor: Factor,
    rect: &SearchRect,
) -> Result<(usize, SearchRect), RootFindError> {
    rect.validate(sf.params())?;
    let mut r = *rect;
    for attempt in 0..=JITTER_TRIES {
        match winding(sf, factor, &r) {
            Ok(n) => return Ok((n, r)),
            Err(RootFindError::BoundaryZero) | Err(RootFindError::Spectral(SpectralError::EssentialLine)) => {
                if attempt == JITTER_TRIES {
                    break;
                }
                r = rect.jittered(attempt);
                r.validate(sf.params())?;
            }
            Err(e) => return Err(e),
        }
    }
    Err(RootFindError::BoundaryZero)
}

// ---------------------------------------------------------------------------
// Operations

/// Number of zeros of `factor` inside `rect`, with multiplicity.
pub fn count_zeros(
    rect: &SearchRect,
    factor: Factor,
    params: &ModelParams,
    wave: &WaveContext,
) -> Result<usize, RootFindError> {
    RootFinder::new(&SpectralFunction::new(params, wave)).count(rect, factor)
}

pub fn localize_roots(
    rect: &SearchRect,
    factor: Factor,
    params: &ModelParams,
    wave: &WaveContext,
) -> Result<Vec<Localized>, RootFindError> {
    RootFinder::new(&SpectralFunction::new(params, wave)).localize(rect, factor)
}

pub fn refine_root(
    seed: Complex64,
    factor: Factor,
    params: &ModelParams,
    wave: &WaveContext,
) -> Result<RootRecord, RootFindError> {
    RootFinder::new(&SpectralFunction::new(params, wave)).refine(seed, factor, None, 1)
}

/// Default search regions: the strip right of the essential line, plus the
/// ghost region below it when `ghost` is set and `r < 0`.
///
/// The right edge sits at `-min(1e-6, 1e-3 κ²)/τ`: the slowest modes decay
/// like `κ²/τ`, so a fixed offset would cut them off at small `k`.
pub fn strip_regions(params: &ModelParams, wave: &WaveContext, ghost: bool) -> Vec<SearchRect> {
    let tau = params.tau;
    let delta = 1e-6 / tau;
    let right = (1e-6f64).min(1e-3 * wave.kappa * wave.kappa) / tau;
    let l = (5.0 * wave.kappa / tau).max(10.0);
    let mut out = vec![SearchRect::new(-1.0 / tau + delta, -right, -l, l)];
    if ghost && params.r < 0.0 {
        out.push(SearchRect::new((params.r - 1.0) / tau - delta, -1.0 / tau - delta, -l, l));
    }
    out
}

/// Root search bound to one spectral function.
pub struct RootFinder<'a> {
    sf: &'a SpectralFunction,
}

impl<'a> RootFinder<'a> {
    pub fn new(sf: &'a SpectralFunction) -> Self {
        RootFinder { sf }
    }

    pub fn spectral(&self) -> &SpectralFunction {
        self.sf
    }

    pub fn count(&self, rect: &SearchRect, factor: Factor) -> Result<usize, RootFindError> {
        count_with_rect(self.sf, factor, rect).map(|(n, _)| n)
    }

    pub fn localize(&self, rect: &SearchRect, factor: Factor) -> Result<Vec<Localized>, RootFindError> {
        let (n, r) = count_with_rect(self.sf, factor, rect)?;
        let mut out = self.localize_counted(r, n, factor)?;
        out.sort_by(|a, b| cmp_complex(a.rect.center(), b.rect.center()));
        Ok(out)
    }

    fn localize_counted(&self, rect: SearchRect, n: usize, factor: Factor) -> Result<Vec<Localized>, RootFindError> {
        if n == 0 {
            return Ok(Vec::new());
        }
        if n == 1 || rect.diameter() <= MIN_DIAMETER {
            return Ok(vec![Localized { rect, count: n }]);
        }
        let kids: Vec<(usize, SearchRect)> = rect
            .quadrants()
            .par_iter()
            .map(|q| count_with_rect(self.sf, factor, q))
            .collect::<Result<_, _>>()?;
        let found: usize = kids.iter().map(|k| k.0).sum();
        if found != n {
            // zeros escaped through jittered cuts; fall back to a tiny box
            if rect.diameter() <= 1e3 * MIN_DIAMETER {
                return Ok(vec![Localized { rect, count: n }]);
            }
            return Err(RootFindError::NonConvergent);
        }
        let parts: Vec<Vec<Localized>> = kids
            .into_par_iter()
            .map(|(m, r)| self.localize_counted(r, m, factor))
            .collect::<Result<_, _>>()?;
        Ok(parts.into_iter().flatten().collect())
    }

    /// Newton from `seed`; `bound` limits how far it may wander and
    /// `order` is the known multiplicity of the zero in the factor.
    pub fn refine(
        &self,
        seed: Complex64,
        factor: Factor,
        bound: Option<&SearchRect>,
        order: usize,
    ) -> Result<RootRecord, RootFindError> {
        let sf = self.sf;
        let fallback = {
            let s = 1e-2 * (1.0 + seed.norm());
            SearchRect::new(seed.re - s, seed.re + s, seed.im - s, seed.im + s)
        };
        let limit = bound.copied().unwrap_or(fallback).scaled(2.0);
        let m = order.max(1) as f64;
        let mut x = seed;
        let (mut f, mut df) = sf.factor_with_derivative(factor, x)?;
        let f_seed = f.norm();
        let tol = 1e-12 * f_seed.max(1.0);
        let mut stalls = 0;
        for _ in 0..50 {
            if f.norm() == 0.0 || df.norm() == 0.0 {
                break;
            }
            let step = m * f / df;
            if step.norm() <= 2.0 * f64::EPSILON * x.norm().max(1e-300) {
                break;
            }
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..30 {
                let y = x - step * t;
                if limit.contains(y) {
                    if let Ok((fy, dfy)) = sf.factor_with_derivative(factor, y) {
                        if fy.norm() < f.norm() || (f.norm() <= tol && fy.norm() <= tol) {
                            x = y;
                            f = fy;
                            df = dfy;
                            accepted = true;
                            break;
                        }
                    }
                }
                t *= 0.5;
            }
            if !accepted {
                stalls += 1;
                if f.norm() <= tol || stalls > 1 {
                    break;
                }
            }
        }
        let residual = f.norm();
        if !limit.contains(x) {
            return Err(RootFindError::Diverged);
        }
        if residual > tol.max(1e-10 * f_seed) && residual > 1e-9 {
            return Err(RootFindError::Diverged);
        }
        Ok(RootRecord {
            lambda: x,
            factor,
            multiplicity_in_sigma: order.max(1) * factor.multiplicity_in_sigma(),
            residual,
        })
    }

    /// Localize and refine every zero of `factor` inside `rect`.
    pub fn roots_in(&self, rect: &SearchRect, factor: Factor) -> Result<Vec<RootRecord>, RootFindError> {
        let boxes = self.localize(rect, factor)?;
        let mut out: Vec<RootRecord> = boxes
            .par_iter()
            .map(|b| self.refine_localized(b, factor))
            .collect::<Result<_, RootFindError>>()?;
        // Σ is real on the real axis, so a root this close to it is real
        for r in &mut out {
            if r.lambda.im.abs() <= 1e-13 * (1.0 + r.lambda.norm()) {
                r.lambda.im = 0.0;
            }
        }
        out.sort_by(|a, b| cmp_complex(a.lambda, b.lambda));
        Ok(out)
    }

    /// Newton from the box centre; while it escapes the box, keep
    /// quadrisecting towards the zero.
    pub fn refine_localized(&self, b: &Localized, factor: Factor) -> Result<RootRecord, RootFindError> {
        let mut cur = *b;
        for _ in 0..64 {
            let bound = cur.rect.max_size(1e-9);
            if let Ok(mut rec) = self.refine(cur.rect.center(), factor, Some(&bound), cur.count) {
                if bound.contains(rec.lambda) {
                    rec.multiplicity_in_sigma = cur.count * factor.multiplicity_in_sigma();
                    return Ok(rec);
                }
            }
            if cur.rect.diameter() <= MIN_DIAMETER {
                break;
            }
            let mut next = None;
            for q in cur.rect.quadrants() {
                let (n, r) = count_with_rect(self.sf, factor, &q)?;
                if n == cur.count {
                    next = Some(Localized { rect: r, count: n });
                    break;
                }
                if n > 0 {
                    // a multiple zero split across cuts; refine what we have
                    next = Some(Localized { rect: r, count: n });
                    break;
                }
            }
            cur = next.ok_or(RootFindError::NonConvergent)?;
        }
        Err(RootFindError::Diverged)
    }

    /// All roots of both factors in the default regions.
    pub fn all_roots(&self, ghost: bool) -> Result<Vec<RootRecord>, RootFindError> {
        let mut out = Vec::new();
        for rect in strip_regions(self.sf.params(), self.sf.wave(), ghost) {
            for f in Factor::ALL {
                out.extend(self.roots_in(&rect, f)?);
            }
        }
        out.sort_by(|a, b| a.factor.cmp(&b.factor).then(cmp_complex(a.lambda, b.lambda)));
        Ok(out)
    }
}

impl SearchRect {
    /// Grow a rectangle so that both sides are at least `s`.
    fn max_size(&self, s: f64) -> Self {
        let c = self.center();
        let hw = 0.5 * (self.re_max - self.re_min).max(s);
        let hh = 0.5 * (self.im_max - self.im_min).max(s);
        SearchRect::new(c.re - hw, c.re + hw, c.im - hh, c.im + hh)
    }
}

/// Order by real part, then imaginary part.
pub fn cmp_complex(a: Complex64, b: Complex64) -> std::cmp::Ordering {
    a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sf(tau: f64, pr: f64, k: f64) -> SpectralFunction {
        SpectralFunction::from_values(tau, pr, k).unwrap()
    }

    #[test]
    fn empty_rectangle_localizes_to_nothing() {
        let f = sf(0.5, 0.4, 0.3);
        let rf = RootFinder::new(&f);
        let r = SearchRect::new(-1.9, -1.5, 5.0, 6.0);
        assert_eq!(rf.count(&r, Factor::DiffAc).unwrap(), 0);
        assert!(rf.localize(&r, Factor::DiffAc).unwrap().is_empty());
    }

    #[test]
    fn rejects_straddling_rectangles() {
        let f = sf(0.5, 0.4, 0.3);
        let r = SearchRect::new(-2.5, -1.0, -1.0, 1.0);
        assert!(matches!(RootFinder::new(&f).count(&r, Factor::Shear), Err(RootFindError::InvalidRect(_))));
    }

    #[test]
    fn seed_at_root_is_returned_unchanged() {
        let f = sf(0.5, 0.4, 0.3);
        let rf = RootFinder::new(&f);
        let r = rf.refine(Complex64::new(-0.05, 0.0), Factor::Shear, None, 1).unwrap();
        let again = rf.refine(r.lambda, Factor::Shear, None, 1).unwrap();
        assert_eq!(again.lambda, r.lambda);
    }

    #[test]
    fn jitter_is_deterministic() {
        let r = SearchRect::new(-1.0, -0.1, -2.0, 2.0);
        assert_eq!(r.jittered(2), r.jittered(2));
        assert_ne!(r.jittered(1), r.jittered(2));
    }
}
