//! Mode branches in `k`: seeding from the small-`k` expansion, continuation,
//! merges of real branches into complex pairs, and absorption at the
//! essential line.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;

use crate::rootfind::{RootFindError, RootFinder, SearchRect};
use crate::spectral::{Factor, ModelParams, SpectralError, SpectralFunction, WaveContext};

/// Distance to the essential line (times τ) below which a vanishing root
/// counts as absorbed.
pub const ABSORPTION_DISTANCE: f64 = 1e-6;
/// Closest approach to the line used for counting boxes.
const LINE_OFFSET: f64 = 1e-8;
/// Half-size (times 1/τ) of the box used to look for a newborn pair.
const MERGE_BOX: f64 = 0.02;
/// Bottom of the pair-counting box, relative to its size; keeps the edge
/// clear of real roots under counting jitter.
const PAIR_FLOOR: f64 = 1e-3;
/// Seeding wave number of full traces, times 1/τ.
pub const SEED_K: f64 = 1e-3;
/// Required width of merge brackets.
pub const MERGE_BRACKET: f64 = 1e-6;

#[derive(Debug, thiserror::Error)]
pub enum BranchError {
    #[error("degenerate parameters: {0}")]
    DegenerateParams(String),
    #[error("{label} stalled at k = {k}")]
    StallDetected { label: ModeLabel, k: f64 },
    #[error("branches do not merge")]
    NoMerge,
    #[error("no branch labelled {0}")]
    MissingBranch(ModeLabel),
    #[error(transparent)]
    Root(#[from] RootFindError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

// ---------------------------------------------------------------------------
// Labels

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModeLabel {
    Shear1,
    Shear2,
    Diff1,
    Diff2,
    Ac1,
    Ac1Conj,
    Ac2,
    Ac2Conj,
}

impl ModeLabel {
    pub const ALL: [ModeLabel; 8] = [
        ModeLabel::Shear1,
        ModeLabel::Shear2,
        ModeLabel::Diff1,
        ModeLabel::Diff2,
        ModeLabel::Ac1,
        ModeLabel::Ac1Conj,
        ModeLabel::Ac2,
        ModeLabel::Ac2Conj,
    ];

    pub fn factor(self) -> Factor {
        match self {
            ModeLabel::Shear1 | ModeLabel::Shear2 => Factor::Shear,
            _ => Factor::DiffAc,
        }
    }

    pub fn is_real(self) -> bool {
        matches!(self, ModeLabel::Shear1 | ModeLabel::Shear2 | ModeLabel::Diff1 | ModeLabel::Diff2)
    }

    /// Label of the complex conjugate root; real labels map to themselves.
    pub fn conj(self) -> Self {
        match self {
            ModeLabel::Ac1 => ModeLabel::Ac1Conj,
            ModeLabel::Ac1Conj => ModeLabel::Ac1,
            ModeLabel::Ac2 => ModeLabel::Ac2Conj,
            ModeLabel::Ac2Conj => ModeLabel::Ac2,
            l => l,
        }
    }

    /// Upper half-plane member of a conjugate pair.
    pub fn is_upper(self) -> bool {
        matches!(self, ModeLabel::Ac1 | ModeLabel::Ac2)
    }

    /// The real branch a real branch can collide with.
    pub fn merge_partner(self) -> Option<Self> {
        match self {
            ModeLabel::Shear1 => Some(ModeLabel::Shear2),
            ModeLabel::Shear2 => Some(ModeLabel::Shear1),
            ModeLabel::Diff1 => Some(ModeLabel::Diff2),
            ModeLabel::Diff2 => Some(ModeLabel::Diff1),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ModeLabel::Shear1 => "Shear1",
            ModeLabel::Shear2 => "Shear2",
            ModeLabel::Diff1 => "Diff1",
            ModeLabel::Diff2 => "Diff2",
            ModeLabel::Ac1 => "Ac1",
            ModeLabel::Ac1Conj => "Ac1Conj",
            ModeLabel::Ac2 => "Ac2",
            ModeLabel::Ac2Conj => "Ac2Conj",
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModeLabel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        ModeLabel::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| format!("unknown mode label `{s}`"))
    }
}

// ---------------------------------------------------------------------------
// Branch data

/// `λ(k) ≈ λ0 + λ1 k + λ2 k²`; `order` is the highest coefficient known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeedExpansion {
    pub lambda0: f64,
    pub lambda1: Complex64,
    pub lambda2: f64,
    pub order: usize,
}

impl SeedExpansion {
    pub fn predict(&self, k: f64) -> Complex64 {
        self.lambda0 + self.lambda1 * k + self.lambda2 * k * k
    }

    /// `dλ/dk` of the truncated expansion.
    pub fn slope(&self, k: f64) -> Complex64 {
        self.lambda1 + 2.0 * self.lambda2 * k
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BranchSample {
    pub k: f64,
    pub lambda: Complex64,
    pub residual: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BranchEvent {
    Birth(f64),
    Merge { k: f64, partner: ModeLabel },
    Absorbed(f64),
}

impl BranchEvent {
    pub fn k(&self) -> f64 {
        match *self {
            BranchEvent::Birth(k) | BranchEvent::Absorbed(k) => k,
            BranchEvent::Merge { k, .. } => k,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Branch {
    pub label: ModeLabel,
    pub samples: Vec<BranchSample>,
    pub events: Vec<BranchEvent>,
}

impl Branch {
    pub fn last(&self) -> &BranchSample {
        self.samples.last().expect("branches hold at least one sample")
    }

    pub fn first(&self) -> &BranchSample {
        &self.samples[0]
    }

    /// Wave number where the branch ends, if it ends by an event.
    pub fn end_event(&self) -> Option<&BranchEvent> {
        self.events.iter().find(|e| !matches!(e, BranchEvent::Birth(_)))
    }

    pub fn is_absorbed(&self) -> bool {
        self.events.iter().any(|e| matches!(e, BranchEvent::Absorbed(_)))
    }

    pub fn merge(&self) -> Option<(f64, ModeLabel)> {
        self.events.iter().find_map(|e| match *e {
            BranchEvent::Merge { k, partner } => Some((k, partner)),
            _ => None,
        })
    }

    /// Mirror image under complex conjugation.
    pub fn conj(&self) -> Branch {
        Branch {
            label: self.label.conj(),
            samples: self
                .samples
                .iter()
                .map(|s| BranchSample { lambda: s.lambda.conj(), ..*s })
                .collect(),
            events: self.events.clone(),
        }
    }

    /// Root at wave number `k`, if sampled there.
    pub fn at(&self, k: f64) -> Option<Complex64> {
        self.samples.iter().find(|s| s.k == k).map(|s| s.lambda)
    }
}

/// A refined starting point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Seed {
    pub label: ModeLabel,
    pub k: f64,
    pub lambda: Complex64,
}

/// Step-size rules of the continuation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepControl {
    pub initial: f64,
    pub max: f64,
    pub growth: f64,
    pub floor: f64,
}

impl StepControl {
    pub fn for_tau(tau: f64) -> Self {
        StepControl { initial: 1e-3 / tau, max: 1e-2 / tau, growth: 1.5, floor: 1e-9 }
    }

    pub fn with_max(mut self, max: f64) -> Self {
        self.max = max;
        self.initial = self.initial.min(max);
        self
    }
}

// ---------------------------------------------------------------------------
// Seeds

fn check_seedable(params: &ModelParams) -> Result<(), BranchError> {
    if params.r >= 1.0 {
        return Err(BranchError::DegenerateParams(format!(
            "r = {} >= 1 leaves the slow relaxation time undefined",
            params.r
        )));
    }
    if params.r == 0.0 {
        return Err(BranchError::DegenerateParams(
            "r = 0 puts the fast family on the essential line".into(),
        ));
    }
    Ok(())
}

/// Expansion coefficients at `k = 0` for each tracked label.
pub fn seed_expansion(label: ModeLabel, params: &ModelParams) -> Result<SeedExpansion, BranchError> {
    check_seedable(params)?;
    let (tau, r) = (params.tau, params.r);
    let fast = (r - 1.0) / tau;
    let c = (5.0f64 / 3.0).sqrt();
    let e = |lambda0, lambda1, lambda2, order| SeedExpansion { lambda0, lambda1, lambda2, order };
    Ok(match label {
        ModeLabel::Shear1 | ModeLabel::Diff1 => e(0.0, Complex64::new(0.0, 0.0), 0.0, 1),
        ModeLabel::Ac1 => e(0.0, Complex64::new(0.0, c), 0.0, 1),
        ModeLabel::Ac1Conj => e(0.0, Complex64::new(0.0, -c), 0.0, 1),
        ModeLabel::Shear2 => e(fast, Complex64::new(0.0, 0.0), 0.0, 1),
        ModeLabel::Diff2 => {
            let l2 = (81.0 * r - 56.0) * tau / (15.0 * (1.0 - r) * r);
            e(fast, Complex64::new(0.0, 0.0), l2, 2)
        }
        ModeLabel::Ac2 | ModeLabel::Ac2Conj => {
            return Err(BranchError::DegenerateParams(format!("{label} does not exist at small k")))
        }
    })
}

/// Labels present at small `k`.
pub const SMALL_K_LABELS: [ModeLabel; 6] = [
    ModeLabel::Shear1,
    ModeLabel::Diff1,
    ModeLabel::Ac1,
    ModeLabel::Ac1Conj,
    ModeLabel::Shear2,
    ModeLabel::Diff2,
];

/// Predicted and Newton-refined starting points at `k_seed`.
pub fn seed_modes(
    params: &ModelParams,
    k_seed: f64,
) -> Result<Vec<(ModeLabel, SeedExpansion, Complex64)>, BranchError> {
    check_seedable(params)?;
    if !(k_seed > 0.0 && k_seed <= 0.01 / params.tau * (1.0 + 1e-12)) {
        return Err(BranchError::DegenerateParams(format!("k_seed = {k_seed} outside (0, 0.01/τ]")));
    }
    let wave = WaveContext::new(k_seed, params)?;
    let sf = SpectralFunction::new(params, &wave);
    let finder = RootFinder::new(&sf);
    // neighbouring small-k roots are at least ~1.29 k apart
    let h = 0.4 * k_seed;
    let mut out = Vec::new();
    for label in SMALL_K_LABELS {
        let exp = seed_expansion(label, params)?;
        let mut guess = exp.predict(k_seed);
        if label.is_real() {
            guess.im = 0.0;
        }
        let mut bound = SearchRect::new(guess.re - h, guess.re + h, guess.im - h, guess.im + h);
        let line = params.essential_line();
        if guess.re > line {
            bound.re_min = bound.re_min.max(line + LINE_OFFSET);
        } else {
            bound.re_max = bound.re_max.min(line - LINE_OFFSET);
        }
        let rec = finder.refine(guess, label.factor(), Some(&bound), 1)?;
        out.push((label, exp, rec.lambda));
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Continuation

fn spectral_at(params: &ModelParams, k: f64) -> Result<SpectralFunction, BranchError> {
    Ok(SpectralFunction::new(params, &WaveContext::new(k, params)?))
}

/// `dλ/dk = -∂ₖF/∂_λF` along a root of `factor`.
pub fn root_velocity(
    params: &ModelParams,
    factor: Factor,
    k: f64,
    lambda: Complex64,
) -> Result<Complex64, BranchError> {
    let eps = 1e-3 * k;
    let (_, df) = spectral_at(params, k)?.factor_with_derivative(factor, lambda)?;
    let fp = spectral_at(params, k + eps)?.factor(factor, lambda)?;
    let fm = spectral_at(params, k - eps)?.factor(factor, lambda)?;
    Ok(-(fp - fm) / (2.0 * eps) / df)
}

/// +1 right of the essential line, -1 left of it.
fn side(params: &ModelParams, lambda: Complex64) -> f64 {
    (lambda.re - params.essential_line()).signum()
}

/// Box of half-size `s` around `c`, clipped to one side of the line.
fn side_box(params: &ModelParams, c: Complex64, s: f64, side: f64, im_min: f64, im_max: f64) -> SearchRect {
    let line = params.essential_line();
    let (mut lo, mut hi) = (c.re - s, c.re + s);
    if side > 0.0 {
        lo = lo.max(line + LINE_OFFSET);
    } else {
        hi = hi.min(line - LINE_OFFSET);
    }
    SearchRect::new(lo, hi, im_min, im_max)
}

struct Corrected {
    lambda: Complex64,
    residual: f64,
}

fn correct(
    params: &ModelParams,
    label: ModeLabel,
    k: f64,
    prev: Complex64,
    pred: Complex64,
    h: f64,
) -> Option<Corrected> {
    let sf = spectral_at(params, k).ok()?;
    let trust = 0.3 * (pred - prev).norm() + 0.05 * h;
    let sd = side(params, prev);
    let bound = side_box(params, pred, trust, sd, pred.im - trust, pred.im + trust);
    if bound.re_min >= bound.re_max {
        return None;
    }
    let rec = RootFinder::new(&sf).refine(pred, label.factor(), Some(&bound), 1).ok()?;
    let l = rec.lambda;
    let gap = (l.re - params.essential_line()) * sd;
    if (l - pred).norm() > trust || gap < LINE_OFFSET {
        return None;
    }
    if label.is_real() && l.im.abs() > 1e-8 * (1.0 + l.norm()) {
        return None;
    }
    if !label.is_real() && (l.im > 0.0) != label.is_upper() {
        return None;
    }
    Some(Corrected { lambda: l, residual: rec.residual })
}

/// Root count of `factor` in `rect` at wave number `k`; counting failures
/// read as "unknown".
fn count_at(params: &ModelParams, k: f64, rect: &SearchRect, factor: Factor) -> Option<usize> {
    let sf = spectral_at(params, k).ok()?;
    RootFinder::new(&sf).count(rect, factor).ok()
}

/// Does a non-real pair of `factor` sit near the real point `c` at `k`?
fn pair_near(params: &ModelParams, k: f64, c: Complex64, s: f64, factor: Factor) -> Option<bool> {
    let sd = side(params, c);
    let upper = side_box(params, c, s, sd, PAIR_FLOOR * s, s);
    Some(count_at(params, k, &upper, factor)? >= 1)
}

fn classify_stall(params: &ModelParams, label: ModeLabel, last: &BranchSample, floor: f64) -> Option<BranchEvent> {
    let tau = params.tau;
    let sd = side(params, last.lambda);
    let dist = (last.lambda.re - params.essential_line()).abs();
    let probes = (0..7).map(|j| last.k + 2.0 * floor * 10f64.powi(j));
    if dist < ABSORPTION_DISTANCE / tau {
        let s = 1e-2 / tau;
        let rect = side_box(params, last.lambda, dist + s, sd, last.lambda.im - s, last.lambda.im + s);
        let k_try = last.k + 2.0 * floor;
        if count_at(params, k_try, &rect, label.factor()) == Some(0) {
            return Some(BranchEvent::Absorbed(last.k));
        }
    }
    if let Some(partner) = label.merge_partner() {
        for k_try in probes {
            if pair_near(params, k_try, last.lambda, MERGE_BOX / tau, label.factor()) == Some(true) {
                return Some(BranchEvent::Merge { k: last.k, partner });
            }
        }
    }
    None
}

/// Predictor–corrector continuation of one branch from `seed` up to `k_max`.
pub fn trace_branch(
    seed: &Seed,
    params: &ModelParams,
    k_max: f64,
    ctl: &StepControl,
) -> Result<Branch, BranchError> {
    let label = seed.label;
    let factor = label.factor();
    let sf = spectral_at(params, seed.k)?;
    let residual = sf.factor(factor, seed.lambda)?.norm();
    let branch = Branch {
        label,
        samples: vec![BranchSample { k: seed.k, lambda: seed.lambda, residual }],
        events: Vec::new(),
    };
    continue_branch(branch, params, k_max, ctl)
}

/// Extend an already sampled branch up to `k_max`.
pub fn continue_branch(
    mut branch: Branch,
    params: &ModelParams,
    k_max: f64,
    ctl: &StepControl,
) -> Result<Branch, BranchError> {
    let label = branch.label;
    let factor = label.factor();
    let mut h = ctl.initial.min(ctl.max);
    loop {
        let cur = *branch.last();
        if cur.k >= k_max {
            break;
        }
        let step = h.min(ctl.max).min(k_max - cur.k);
        let k_new = if cur.k + step >= k_max * (1.0 - 1e-15) { k_max } else { cur.k + step };
        // secant once two samples exist, else the local root velocity
        let v = match branch.samples.len() {
            1 => root_velocity(params, factor, cur.k, cur.lambda).ok().filter(|v| v.is_finite()),
            n => {
                let prev = branch.samples[n - 2];
                Some((cur.lambda - prev.lambda) / (cur.k - prev.k))
            }
        };
        let mut pred = match v {
            Some(v) => cur.lambda + v * (k_new - cur.k),
            None => cur.lambda,
        };
        if label.is_real() {
            pred.im = 0.0;
        }
        match correct(params, label, k_new, cur.lambda, pred, k_new - cur.k) {
            Some(c) => {
                branch.samples.push(BranchSample { k: k_new, lambda: c.lambda, residual: c.residual });
                h = step * ctl.growth;
            }
            None => {
                h = step * 0.5;
                if h < ctl.floor {
                    match classify_stall(params, label, &cur, ctl.floor) {
                        Some(ev) => {
                            branch.events.push(ev);
                            break;
                        }
                        None => return Err(BranchError::StallDetected { label, k: cur.k }),
                    }
                }
            }
        }
    }
    Ok(branch)
}

// ---------------------------------------------------------------------------
// Merges

#[derive(Clone, Debug, PartialEq)]
pub struct MergeReport {
    pub k_lo: f64,
    pub k_hi: f64,
    pub k_star: f64,
    /// Double root at the merge.
    pub lambda_star: Complex64,
    /// Ac2 then Ac2Conj, one sample each at `k_hi`.
    pub newborn: [Branch; 2],
}

/// The two real roots of `factor` near `c` at `k`, if still real.
fn real_pair(params: &ModelParams, k: f64, c: Complex64, s: f64, factor: Factor) -> Option<[Complex64; 2]> {
    let sf = spectral_at(params, k).ok()?;
    let sd = side(params, c);
    let rect = side_box(params, c, s, sd, -s, s);
    let roots = RootFinder::new(&sf).roots_in(&rect, factor).ok()?;
    let real: Vec<Complex64> = roots.iter().filter(|r| r.lambda.im.abs() < 1e-9).map(|r| r.lambda).collect();
    let count: usize = roots.iter().filter(|r| r.lambda.im.abs() < 1e-9).map(|r| r.order()).sum();
    match (real.len(), count) {
        (2, 2) => Some([real[0], real[1]]),
        (1, 2) => Some([real[0], real[0]]),
        _ => None,
    }
}

/// Bracket the collision of two real branches on one factor by root
/// counting on a rectangle that shrinks with the pair.
pub fn detect_merge(a: &Branch, b: &Branch, params: &ModelParams) -> Result<MergeReport, BranchError> {
    if !(a.label.is_real() && b.label.is_real()) || a.label.factor() != b.label.factor() || a.label == b.label {
        return Err(BranchError::NoMerge);
    }
    let factor = a.label.factor();
    let tau = params.tau;
    let (la, lb) = (a.last(), b.last());
    let k_lo0 = la.k.min(lb.k);
    if (la.lambda - lb.lambda).norm() > 4.0 * MERGE_BOX / tau || (la.k - lb.k).abs() > 1e-3 / tau {
        return Err(BranchError::NoMerge);
    }
    if a.is_absorbed() || b.is_absorbed() {
        return Err(BranchError::NoMerge);
    }
    let mut c = 0.5 * (la.lambda + lb.lambda);
    let mut s = MERGE_BOX / tau;
    // find a wave number past the collision
    let mut k_hi = None;
    for j in 0..10 {
        let k_try = k_lo0 + 1e-9 * 10f64.powi(j);
        if pair_near(params, k_try, c, s, factor) == Some(true) {
            k_hi = Some(k_try);
            break;
        }
    }
    let mut k_hi = k_hi.ok_or(BranchError::NoMerge)?;
    let mut k_lo = k_lo0;
    while k_hi - k_lo > 1e-3 * MERGE_BRACKET {
        let mid = 0.5 * (k_lo + k_hi);
        if mid <= k_lo || mid >= k_hi {
            break;
        }
        match pair_near(params, mid, c, s, factor) {
            Some(true) => k_hi = mid,
            Some(false) => {
                k_lo = mid;
                if let Some([p, q]) = real_pair(params, mid, c, s, factor) {
                    c = 0.5 * (p + q);
                    s = s.min((8.0 * (p - q).norm()).max(1e-4 / tau));
                }
            }
            None => break,
        }
    }
    // newborn pair, sampled a little past the collision where it is
    // clearly off the axis; two samples give the secant predictor a start
    let sd = side(params, c);
    let wide = MERGE_BOX / tau;
    let upper = side_box(params, c, wide, sd, PAIR_FLOOR * wide, wide);
    let delta = 1e-5 / tau;
    let mut samples = Vec::new();
    for kk in [k_hi, k_hi + delta, k_hi + 2.0 * delta] {
        let sf = spectral_at(params, kk)?;
        let rect = if kk == k_hi { side_box(params, c, s, sd, PAIR_FLOOR * s, s) } else { upper };
        let roots = RootFinder::new(&sf).roots_in(&rect, factor)?;
        let born = roots.first().ok_or(BranchError::NoMerge)?;
        samples.push(BranchSample { k: kk, lambda: born.lambda, residual: born.residual });
    }
    let ac2 = Branch { label: ModeLabel::Ac2, samples, events: vec![BranchEvent::Birth(k_hi)] };
    let ac2c = ac2.conj();
    Ok(MergeReport {
        k_lo,
        k_hi,
        k_star: 0.5 * (k_lo + k_hi),
        lambda_star: Complex64::new(c.re, 0.0),
        newborn: [ac2, ac2c],
    })
}

// ---------------------------------------------------------------------------
// Full inventory

/// All branches from small `k` up to `k_max`, including pairs born in merges.
pub fn trace_all(params: &ModelParams, k_max: f64, ctl: &StepControl) -> Result<Vec<Branch>, BranchError> {
    let k_seed = SEED_K / params.tau;
    let seeds = seed_modes(params, k_seed)?;
    let upper: Vec<Seed> = seeds
        .iter()
        .filter(|(l, _, _)| *l != ModeLabel::Ac1Conj)
        .map(|&(label, _, lambda)| Seed { label, k: k_seed, lambda })
        .collect();
    let mut branches: Vec<Branch> = upper
        .par_iter()
        .map(|s| trace_branch(s, params, k_max, ctl))
        .collect::<Result<_, _>>()?;
    let ac1 = branches.iter().find(|b| b.label == ModeLabel::Ac1).map(Branch::conj);
    branches.extend(ac1);

    for (p, q) in [(ModeLabel::Diff1, ModeLabel::Diff2), (ModeLabel::Shear1, ModeLabel::Shear2)] {
        let ia = branches.iter().position(|b| b.label == p);
        let ib = branches.iter().position(|b| b.label == q);
        let (Some(ia), Some(ib)) = (ia, ib) else { continue };
        if branches[ia].merge().is_none() && branches[ib].merge().is_none() {
            continue;
        }
        let report = detect_merge(&branches[ia], &branches[ib], params)?;
        for (i, partner) in [(ia, q), (ib, p)] {
            let b = &mut branches[i];
            b.events.retain(|e| !matches!(e, BranchEvent::Merge { .. }));
            b.events.push(BranchEvent::Merge { k: report.k_star, partner });
        }
        let [born, _] = report.newborn;
        let mut ac2 = continue_branch(born, params, k_max, ctl)?;
        ac2.events[0] = BranchEvent::Birth(report.k_star);
        let ac2c = ac2.conj();
        branches.push(ac2);
        branches.push(ac2c);
    }
    branches.sort_by_key(|b| b.label);
    Ok(branches)
}

/// Labels alive at wave number `k` according to traced branches.
pub fn modes_at(branches: &[Branch], k: f64) -> Vec<ModeLabel> {
    branches
        .iter()
        .filter(|b| b.first().k <= k && (b.end_event().is_none() || b.last().k >= k))
        .map(|b| b.label)
        .collect()
}

/// Largest wave number at which `label` exists, with the bracket
/// `[last sample, last sample + step floor]` closing on it.
pub fn critical_bracket(label: ModeLabel, params: &ModelParams) -> Result<(f64, f64), BranchError> {
    let ctl = StepControl::for_tau(params.tau);
    let k_max = 10.0 / params.tau;
    let all = trace_all(params, k_max, &ctl)?;
    let b = all.iter().find(|b| b.label == label).ok_or(BranchError::MissingBranch(label))?;
    let last = b.last().k;
    match b.end_event() {
        Some(_) => Ok((last, last + ctl.floor)),
        None => Err(BranchError::StallDetected { label, k: last }),
    }
}

pub fn critical_wavenumber(label: ModeLabel, params: &ModelParams) -> Result<f64, BranchError> {
    critical_bracket(label, params).map(|b| b.0)
}

// ---------------------------------------------------------------------------
// Small-k fits

/// Least-squares fit `λ ≈ c0 + c1 k + c2 k²` over the samples with `k` in
/// `[k_lo, k_hi]`.
pub fn fit_quadratic(samples: &[BranchSample], k_lo: f64, k_hi: f64) -> Option<[Complex64; 3]> {
    let pts: Vec<&BranchSample> = samples.iter().filter(|s| s.k >= k_lo && s.k <= k_hi).collect();
    if pts.len() < 3 {
        return None;
    }
    let scale = k_hi;
    let a = DMatrix::from_fn(pts.len(), 3, |i, j| (pts[i].k / scale).powi(j as i32));
    let svd = a.svd(true, true);
    let solve = |y: DVector<f64>| svd.solve(&y, 1e-14).ok();
    let re = solve(DVector::from_iterator(pts.len(), pts.iter().map(|s| s.lambda.re)))?;
    let im = solve(DVector::from_iterator(pts.len(), pts.iter().map(|s| s.lambda.im)))?;
    Some(std::array::from_fn(|j| Complex64::new(re[j], im[j]) / scale.powi(j as i32)))
}

/// Trace `label` across `[k_lo, k_hi]` with a fine step and fit the
/// expansion coefficients.
pub fn fit_small_k(label: ModeLabel, params: &ModelParams, k_lo: f64, k_hi: f64) -> Result<[Complex64; 3], BranchError> {
    let seeds = seed_modes(params, k_lo)?;
    let &(_, _, lambda) = seeds.iter().find(|s| s.0 == label).ok_or(BranchError::MissingBranch(label))?;
    let step = (k_hi - k_lo) / 16.0;
    let ctl = StepControl { initial: step, max: step, growth: 1.0, floor: 1e-9 };
    let b = trace_branch(&Seed { label, k: k_lo, lambda }, params, k_hi, &ctl)?;
    fit_quadratic(&b.samples, k_lo, k_hi).ok_or(BranchError::StallDetected { label, k: b.last().k })
}
