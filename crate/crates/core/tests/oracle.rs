use num_complex::Complex64;
use shakhov::closure::{hydrodynamic_generator, labelled_roots};
use shakhov::oracle::{
    galerkin_spectrum, isolated_eigenvalues, simulate, simulate_and_fit, GalerkinConfig, GalerkinSystem,
    InitialData, OracleError, SectorGroup,
};
use shakhov::spectral::{Factor, ModelParams};

fn nearest(set: &[Complex64], z: Complex64) -> f64 {
    set.iter().map(|s| (s - z).norm()).fold(f64::INFINITY, f64::min)
}

fn group_factor(g: SectorGroup) -> Factor {
    if g == SectorGroup::Longitudinal {
        Factor::DiffAc
    } else {
        Factor::Shear
    }
}

#[test]
fn zero_wavenumber_truncation() {
    let p = ModelParams::with_r(0.5, 0.6).unwrap();
    for g in SectorGroup::ALL {
        let ev = galerkin_spectrum(&p, 0.0, GalerkinConfig::new(64, g));
        for e in &ev {
            let d = nearest(&[Complex64::new(0.0, 0.0), Complex64::new(-0.8, 0.0), Complex64::new(-2.0, 0.0)], *e);
            assert!(d <= 1e-12, "{g:?}: {e}");
        }
        for want in [0.0, -0.8] {
            assert!(nearest(&ev, Complex64::new(want, 0.0)) <= 1e-12, "{g:?} lacks {want}");
        }
    }
}

#[test]
fn isolated_eigenvalues_are_the_roots() {
    let p = ModelParams::with_r(0.5, 0.6).unwrap();
    let k = 0.3 / 0.5;
    let roots = labelled_roots(k, &p, false).unwrap();
    for g in SectorGroup::ALL {
        let ev = galerkin_spectrum(&p, k, GalerkinConfig::new(200, g));
        let (iso, spread) = isolated_eigenvalues(&ev, 0.5);
        let mine: Vec<Complex64> =
            roots.iter().filter(|r| r.1.factor == group_factor(g)).map(|r| r.1.lambda).collect();
        assert_eq!(iso.len(), mine.len(), "{g:?}: {iso:?}");
        for e in &iso {
            assert!(nearest(&mine, *e) <= 1e-6, "{g:?}: {e}");
        }
        assert!(spread < 0.1, "{g:?}: {spread}");
    }
}

#[test]
fn spurious_cluster_tightens_with_truncation() {
    let p = ModelParams::with_r(0.5, 0.6).unwrap();
    let spread = |n| {
        let ev = galerkin_spectrum(&p, 0.6, GalerkinConfig::new(n, SectorGroup::TransverseY));
        isolated_eigenvalues(&ev, 0.5).1
    };
    // the cluster width shrinks like N^(-1/2)
    let (a, b, c) = (spread(50), spread(100), spread(200));
    assert!(c < b && b < a, "{a} {b} {c}");
    assert!((0.4..0.6).contains(&(c / a)), "{a} {c}");
}

#[test]
fn simulated_moments_follow_the_closure() {
    let p = ModelParams::new(0.5, 0.4).unwrap();
    let k = 0.3;
    let cl = hydrodynamic_generator(k, &p).unwrap();
    for g in SectorGroup::ALL {
        let mut mus: Vec<Complex64> =
            cl.modes.iter().filter(|m| m.label.map(|l| l.factor()) == Some(group_factor(g))).map(|m| m.lambda).collect();
        mus.dedup_by(|a, b| (*a - *b).norm() < 1e-9);
        let sys = GalerkinSystem::new(&p, k, GalerkinConfig::new(200, g));
        let u0 = InitialData::Modes(mus).state(&sys).unwrap();
        let tr = simulate(&sys, &u0, 5.0 * p.tau, 0.1);
        let h0 = tr.moments[0];
        for (t, h) in tr.times.iter().zip(&tr.moments) {
            let c = cl.evolve(&h0, *t);
            assert!((c - h).norm() <= 1e-6 * h.norm(), "{g:?} t={t}");
        }
    }
}

#[test]
fn fitted_rates_contain_the_slow_diffusion_mode() {
    let p = ModelParams::new(0.5, 0.4).unwrap();
    let k = 0.3;
    let roots = labelled_roots(k, &p, false).unwrap();
    let diff1 = roots.iter().find(|r| r.0.map(|l| l.name()) == Some("Diff1")).unwrap().1.lambda;
    let cfg = GalerkinConfig::new(200, SectorGroup::Longitudinal);
    let (tr, fit) = simulate_and_fit(&p, k, cfg, &InitialData::Random(1), 40.0, 10.0).unwrap();
    assert!(nearest(&fit.rates, diff1) <= 1e-4, "{:?} vs {diff1}", fit.rates);
    assert!(tr.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
}

#[test]
fn norm_is_non_increasing_for_unit_interval_r() {
    for r in [0.0, 0.5, 1.0] {
        let p = ModelParams::with_r(0.5, r).unwrap();
        for g in SectorGroup::ALL {
            let sys = GalerkinSystem::new(&p, 0.8, GalerkinConfig::new(64, g));
            let u0 = InitialData::Random(3).state(&sys).unwrap();
            let tr = simulate(&sys, &u0, 10.0, 0.1);
            assert!(tr.norms.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12)), "r={r} {g:?}");
        }
    }
}

#[test]
fn conserved_moments_at_zero_wavenumber() {
    let p = ModelParams::new(0.5, 0.4).unwrap();
    for g in SectorGroup::ALL {
        let sys = GalerkinSystem::new(&p, 0.0, GalerkinConfig::new(64, g));
        let u0 = InitialData::Random(5).state(&sys).unwrap();
        let tr = simulate(&sys, &u0, 3.0, 0.5);
        let h0 = tr.moments[0];
        for h in &tr.moments {
            for &j in g.moments().iter().filter(|&&j| j < 5) {
                assert!((h[j] - h0[j]).norm() <= 1e-10 * (1.0 + h0[j].norm()), "{g:?} e{j}");
            }
        }
    }
}

#[test]
fn ghost_rates_respect_the_lower_bound() {
    let p = ModelParams::new(0.5, 1.5).unwrap();
    let cfg = GalerkinConfig::new(200, SectorGroup::Longitudinal);
    match simulate_and_fit(&p, 0.4, cfg, &InitialData::Random(2), 30.0, 5.0) {
        Ok((_, fit)) => {
            for l in fit.rates {
                assert!(l.re >= (p.r - 1.0) / p.tau - 1e-6, "{l}");
            }
        }
        Err(OracleError::FitAmbiguous(..)) => {}
        Err(e) => panic!("{e}"),
    }
    let ev = galerkin_spectrum(&p, 0.4, GalerkinConfig::new(200, SectorGroup::Longitudinal));
    assert!(ev.iter().all(|e| e.re >= (p.r - 1.0) / p.tau - 1e-8));
}
