use num_complex::Complex64;
use proptest::prelude::*;
use shakhov::oracle::{quad_kernel_det, quad_resolvent_matrix};
use shakhov::rootfind::RootFinder;
use shakhov::specfun::plasma_z;
use shakhov::spectral::{
    coefficient_polynomials, n_matrix, Factor, ModelParams, SpectralError, SpectralFunction, SpectralPoint,
    WaveContext,
};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm().max(1e-300)
}

fn sf(tau: f64, pr: f64, k: f64) -> SpectralFunction {
    SpectralFunction::from_values(tau, pr, k).unwrap()
}

fn sf_r(tau: f64, r: f64, k: f64) -> SpectralFunction {
    let p = ModelParams::with_r(tau, r).unwrap();
    SpectralFunction::new(&p, &WaveContext::new(k, &p).unwrap())
}

// ---------------------------------------------------------------------------
// coefficient polynomials

#[test]
fn polynomial_degrees_and_constants() {
    let p = ModelParams::with_r(0.7, 0.35).unwrap();
    let w = WaveContext::new(1.3, &p).unwrap();
    let set = coefficient_polynomials(&p, &w);
    let deg: Vec<usize> = set.sigma.iter().map(|s| s.len() - 1).collect();
    assert_eq!(deg, vec![3, 4, 0, 5, 6, 4]);
    assert!((set.sigma[2][0] - c(-8.0 * 0.35, 0.0)).norm() < 1e-14);
    let kappa = w.kappa;
    assert!((set.sigma[5][0] - c(-20.0 * kappa * kappa, 0.0)).norm() < 1e-12);
}

#[test]
fn bgk_polynomials() {
    let p = ModelParams::with_r(0.5, 0.0).unwrap();
    let w = WaveContext::new(0.8, &p).unwrap();
    let set = coefficient_polynomials(&p, &w);
    let kappa = w.kappa;
    let trim = |v: &[Complex64]| v.iter().rposition(|z| z.norm() > 1e-14).map_or(0, |i| i + 1);
    assert_eq!(trim(&set.sigma[0]), 1);
    assert!((set.sigma[0][0] - c(10.0 * kappa * kappa, 0.0)).norm() < 1e-13);
    assert_eq!(trim(&set.sigma[1]), 1);
    assert!((set.sigma[1][0] - c(0.0, 10.0 * kappa)).norm() < 1e-13);
}

// ---------------------------------------------------------------------------
// Σ and its factors

#[test]
fn factors_tend_to_one_far_up_the_strip() {
    let s = sf(0.5, 0.4, 0.7);
    // both factors approach 1 like 1/λ
    for im in [400.0, 4000.0, 40000.0] {
        let (a, b) = s.factors(c(-1.0, im)).unwrap();
        assert!((a - 1.0).norm() < 10.0 / im && (b - 1.0).norm() < 10.0 / im, "{im}: {a} {b}");
    }
}

#[test]
fn factor_product_identity() {
    let s = sf(0.5, 0.4, 0.7);
    let l = c(-0.4, 0.9);
    let (a, b) = s.factors(l).unwrap();
    assert!(rel(a * a * b, s.sigma(l).unwrap()) < 1e-12);
}

#[test]
fn shear_root_is_double_in_sigma() {
    let s = sf(0.5, 0.4, 0.7);
    let roots = RootFinder::new(&s).all_roots(false).unwrap();
    let shear = roots.iter().find(|r| r.factor == Factor::Shear).unwrap();
    assert_eq!(shear.multiplicity_in_sigma, 2);
    // Σ vanishes quadratically: Σ(λ+h)/h² stays bounded and nonzero
    let l = shear.lambda;
    let q1 = s.sigma(l + 1e-3).unwrap() / 1e-6;
    let q2 = s.sigma(l + 5e-4).unwrap() / 2.5e-7;
    assert!(rel(q1, q2) < 0.05);
    assert!(s.sigma_prime(l).unwrap().norm() < 1e-10);
}

#[test]
fn small_wavenumber_limit() {
    let s = sf_r(0.5, 0.6, 1e-4);
    let l = c(-0.3, 0.0);
    let v = s.sigma(l).unwrap();
    // frozen value, confirmed by the quadrature determinant
    let frozen = -4.354_366_055_692_943e-6;
    assert!((v.re - frozen).abs() < 1e-12 * frozen.abs() + 1e-18 && v.im == 0.0, "{v}");
    let q = quad_kernel_det(l, s.params(), s.wave()).unwrap();
    assert!(rel(q, c(frozen, 0.0)) < 1e-8);
    // λ⁵τ⁵(λτ+1-r)³/(λτ+1)⁸
    let (lt, r) = (l.re * 0.5, 0.6);
    let limit = lt.powi(5) * (lt + 1.0 - r).powi(3) / (lt + 1.0).powi(8);
    assert!(((v.re - limit) / limit).abs() < 1e-6);
}

#[test]
fn real_points_give_real_sigma() {
    let s = sf(0.5, 0.4, 0.6);
    for re in [-1.9, -1.2, -0.5, -0.05] {
        let v = s.sigma(c(re, 0.0)).unwrap();
        assert!(v.im.abs() <= 1e-12 * v.norm(), "{re}: {v}");
    }
}

#[test]
fn rejects_the_essential_line() {
    let s = sf(0.5, 0.4, 0.6);
    assert_eq!(s.sigma(c(-2.0, 0.3)), Err(SpectralError::EssentialLine));
    assert_eq!(s.sigma(c(-2.0 + 5e-10, 0.3)), Err(SpectralError::EssentialLine));
    assert!(s.sigma(c(-2.0 + 1e-8, 0.3)).is_ok());
}

#[test]
fn derivative_against_finite_difference() {
    let s = sf(0.5, 0.4, 0.6);
    let l = c(-0.5, 0.4);
    let h = 1e-6;
    let fd = (s.sigma(l + h).unwrap() - s.sigma(l - h).unwrap()) / (2.0 * h);
    assert!(rel(s.sigma_prime(l).unwrap(), fd) < 1e-5);
}

#[test]
fn derivative_at_simple_root_and_far_away() {
    let s = sf(0.5, 0.4, 0.4);
    let roots = RootFinder::new(&s).all_roots(false).unwrap();
    let r = roots.iter().find(|r| r.factor == Factor::DiffAc).unwrap();
    let (_, d) = s.factor_with_derivative(Factor::DiffAc, r.lambda).unwrap();
    assert!(d.norm() > 1e-3);
    let far = s.sigma_prime(c(-1.0, 1e4)).unwrap().norm();
    let farther = s.sigma_prime(c(-1.0, 1e5)).unwrap().norm();
    assert!(farther < far && farther < 1e-6);
}

// ---------------------------------------------------------------------------
// determinant path

#[test]
fn n_matrix_entries() {
    let zeta = c(0.3, 1.7);
    let b = shakhov::specfun::HalfPlaneBranch::Upper;
    let n = n_matrix(zeta, b);
    let z = plasma_z(zeta, b);
    assert!(rel(n[(0, 0)], z) < 1e-14);
    assert!(rel(n[(0, 3)], zeta * z + 1.0) < 1e-13);
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert_eq!(n[(i, j)], c(0.0, 0.0));
    }
    assert_eq!(n, n.transpose());
}

#[test]
fn quadrature_resolvent_structure() {
    let g = quad_resolvent_matrix(c(-0.8, 0.4), 0.6).unwrap();
    for (i, j) in [(0, 1), (0, 2), (1, 2)] {
        assert!(g[(i, j)].norm() < 1e-15);
    }
    assert_eq!(g, g.transpose());
    assert!(quad_resolvent_matrix(c(0.0, 0.4), 0.6).is_err());
}

/// Deterministic sample in the strip (either side of the line when `r < 0`).
fn strip_point(tau: f64, u: f64, v: f64, below: bool) -> Complex64 {
    let im = (2.0 * v - 1.0) * 4.0 / tau;
    if below {
        c(-1.0 / tau - (0.02 + 0.9 * u) / tau, im)
    } else {
        c(-1.0 / tau + (0.02 + 0.96 * u) / tau, im)
    }
}

#[test]
fn determinant_matches_factors_on_a_thousand_points() {
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let t = i as f64;
        let (tau, r) = (0.3 + 0.7 * ((t * 0.37).sin().abs()), -0.5 + 1.5 * ((t * 0.11).cos().abs()));
        let kappa = 0.05 + 4.95 * ((t * 0.53).sin().abs());
        let s = sf_r(tau, r, kappa / tau);
        let l = strip_point(tau, (t * 0.71).sin().abs(), (t * 0.29).cos().abs(), r < 0.0 && i % 2 == 0);
        worst = worst.max(rel(s.sigma_det(l).unwrap(), s.sigma(l).unwrap()));
    }
    assert!(worst <= 1e-8, "{worst:e}");
}

#[test]
fn quadrature_matches_resolvent_on_random_points() {
    for i in 0..200 {
        let t = i as f64;
        let kappa = 0.05 + 3.0 * ((t * 0.77).sin().abs());
        let z = c(
            if i % 2 == 0 { 1.0 } else { -1.0 } * (0.02 + 2.0 * (t * 0.31).cos().abs()),
            4.0 * (t * 0.13).sin(),
        );
        let q = quad_resolvent_matrix(z, kappa).unwrap();
        let zeta = z / (Complex64::i() * kappa);
        let g = n_matrix(zeta, shakhov::specfun::HalfPlaneBranch::natural(zeta)) / (Complex64::i() * kappa);
        assert!((q - g).norm() <= 1e-8 * g.norm(), "{z} {kappa}: {:e}", (q - g).norm() / g.norm());
    }
}

#[test]
fn point_invariants() {
    let p = ModelParams::new(0.5, 0.4).unwrap();
    let w = WaveContext::new(0.6, &p).unwrap();
    let l = c(-0.7, 0.2);
    let pt = SpectralPoint::new(l, &p, &w).unwrap();
    assert!(rel(pt.zeta, Complex64::i() * (p.tau * l + 1.0) / w.kappa) < 1e-15);
    assert_eq!(pt.z, -(p.tau * l + 1.0));
    assert_eq!(w.kappa, p.tau * 0.6);
    assert_eq!(p.r, 1.0 - p.prandtl);
    assert!(WaveContext::new(0.0, &p).is_err());
    assert!(ModelParams::new(-1.0, 0.4).is_err());
}

/// `|Σ - 1| ≤ 1/2` once `|Im λ| ≥ C`; the bound
/// `C τ = 10 + 7 max(r, 0) + 2κ` was measured on a grid over the strip.
#[test]
fn asymptotic_normalization() {
    for r in [-0.5, 0.0, 0.4, 0.6, 1.0] {
        for kappa in [0.05, 0.5, 2.0, 5.0] {
            let tau = 0.5;
            let s = sf_r(tau, r, kappa / tau);
            let cap = (10.0 + 7.0 * r.max(0.0) + 2.0 * kappa) / tau;
            for i in 0..60 {
                for j in 0..20 {
                    let re = -1.0 / tau + 1e-3 + (1.0 / tau - 2e-3) * i as f64 / 59.0;
                    let im = cap * (1.0 + j as f64 * 0.5);
                    for l in [c(re, im), c(re, -im)] {
                        assert!((s.sigma(l).unwrap() - 1.0).norm() <= 0.5, "r={r} κ={kappa} λ={l}");
                    }
                }
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn conjugate_symmetry(u in 0.0..1.0f64, v in 0.0..1.0f64, k in 0.05..3.0f64) {
        let s = sf(0.5, 0.4, k);
        let l = strip_point(0.5, u, v, false);
        let a = s.sigma(l.conj()).unwrap();
        let b = s.sigma(l).unwrap().conj();
        prop_assert!((a - b).norm() <= 1e-12 * b.norm().max(1e-300));
    }

    #[test]
    fn path_independence(
        u in 0.0..1.0f64, v in 0.0..1.0f64, kappa in 0.05..5.0f64, r in -0.5..1.0f64, below in any::<bool>()
    ) {
        let tau = 0.5;
        let s = sf_r(tau, r, kappa / tau);
        let l = strip_point(tau, u, v, below && r < 0.0);
        prop_assert!(rel(s.sigma_det(l).unwrap(), s.sigma(l).unwrap()) <= 1e-8);
    }

    #[test]
    fn scaling_law(u in 0.0..1.0f64, v in 0.0..1.0f64, k in 0.05..3.0f64, sc in 0.25..4.0f64) {
        let a = sf(0.5, 0.4, k);
        let b = sf(0.5 * sc, 0.4, k / sc);
        let l = strip_point(0.5, u, v, false);
        prop_assert!(rel(b.sigma(l / sc).unwrap(), a.sigma(l).unwrap()) <= 1e-11);
    }

    #[test]
    fn factor_identity_everywhere(u in 0.0..1.0f64, v in 0.0..1.0f64, k in 0.05..3.0f64) {
        let s = sf(0.5, 0.4, k);
        let l = strip_point(0.5, u, v, false);
        let (a, d) = s.factors(l).unwrap();
        prop_assert!(rel(a * a * d, s.sigma(l).unwrap()) <= 1e-12);
    }
}
