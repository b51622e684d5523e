//! Front end for the `shakhov` library: each subcommand evaluates one
//! piece of the spectrum and writes JSON, CSV or PPM.

pub mod config;
pub mod output;
pub mod plot;

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rayon::prelude::*;
use serde_json::{json, Value};

use shakhov::branches::{trace_all, Branch, BranchEvent, ModeLabel, StepControl};
use shakhov::closure::{hydrodynamic_generator, labelled_roots};
use shakhov::oracle::{
    galerkin_spectrum, isolated_eigenvalues, quad_kernel_det, quad_plasma_z, simulate_and_fit, GalerkinConfig,
    InitialData, SectorGroup,
};
use shakhov::rootfind::{RootFinder, SearchRect};
use shakhov::specfun::{plasma_z, HalfPlaneBranch};
use shakhov::spectral::{ModelParams, SpectralFunction, WaveContext};

use output::{complex, emit, to_json_string, with_params};
use plot::ArgPlotSpec;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Numerical(_) | CliError::Io(_) => 2,
        }
    }
}

fn numerical<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Numerical(e.to_string())
}

// ---------------------------------------------------------------------------
// Argument grammar

#[derive(Parser, Debug)]
#[command(name = "shakhov", version, about = "Discrete spectrum of the linearized Shakhov model")]
struct Cli {
    /// File of `key=value` lines using the flag names; flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Copy)]
struct Model {
    /// Fast relaxation time.
    #[arg(long)]
    tau: f64,
    /// Prandtl number; r = 1 - Pr.
    #[arg(long)]
    pr: f64,
}

impl Model {
    fn params(&self) -> Result<ModelParams, CliError> {
        ModelParams::new(self.tau, self.pr).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate Σ and its factors at one point.
    Eval {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k: f64,
        /// `RE,IM`
        #[arg(long, value_parser = parse_complex, allow_hyphen_values = true)]
        lambda: Complex64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Locate all discrete eigenvalues at one wave number.
    Roots {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k: f64,
        /// Search below the essential line as well.
        #[arg(long)]
        ghost: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace every branch from k = 0 up to `--k-max`.
    Trace {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k_max: f64,
        /// Largest continuation step.
        #[arg(long)]
        step: Option<f64>,
        /// CSV path; events go to the sibling `.events.json`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Wave number at which a branch ends.
    Kcrit {
        #[command(flatten)]
        model: Model,
        /// Mode label, or `all` for the last surviving mode.
        #[arg(long)]
        mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render arg Σ over a rectangle as a PPM image.
    PlotArg {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k: f64,
        /// `re_min,re_max,im_min,im_max`
        #[arg(long, value_parser = parse_rect, allow_hyphen_values = true)]
        rect: SearchRect,
        /// `WxH`
        #[arg(long, value_parser = parse_size)]
        size: (usize, usize),
        #[arg(long)]
        out: PathBuf,
    },
    /// Moment eigenvectors and the hydrodynamic generator.
    Closure {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare against quadrature, Galerkin and simulation references.
    OracleCheck {
        #[command(flatten)]
        model: Model,
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 400)]
        galerkin_n: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn parse_floats(s: &str, n: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<_, _>>()?;
    if v.len() != n {
        return Err(format!("expected {n} comma-separated numbers, got {}", v.len()));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err("numbers must be finite".into());
    }
    Ok(v)
}

fn parse_complex(s: &str) -> Result<Complex64, String> {
    let v = parse_floats(s, 2)?;
    Ok(Complex64::new(v[0], v[1]))
}

fn parse_rect(s: &str) -> Result<SearchRect, String> {
    let v = parse_floats(s, 4)?;
    if !(v[1] > v[0] && v[3] > v[2]) {
        return Err("need re_min < re_max and im_min < im_max".into());
    }
    Ok(SearchRect::new(v[0], v[1], v[2], v[3]))
}

fn parse_size(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or("expected WxH")?;
    let w: usize = w.parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: usize = h.parse().map_err(|_| format!("bad height {h:?}"))?;
    for v in [w, h] {
        if !(plot::MIN_SIDE..=plot::MAX_SIDE).contains(&v) {
            return Err(format!("{v} outside [{}, {}]", plot::MIN_SIDE, plot::MAX_SIDE));
        }
    }
    Ok((w, h))
}

fn wave(k: f64, p: &ModelParams) -> Result<WaveContext, CliError> {
    WaveContext::new(k, p).map_err(|e| CliError::Usage(e.to_string()))
}

// ---------------------------------------------------------------------------

/// Run with the full argument list (program name first); returns the exit
/// status.
pub fn run<I: IntoIterator<Item = String>>(args: I) -> i32 {
    match execute(args.into_iter().collect()) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("shakhov: {e}");
            if let CliError::Usage(_) = e {
                eprintln!("usage: shakhov <eval|roots|trace|kcrit|plot-arg|closure|oracle-check> [--config FILE] [flags]");
            }
            e.exit_code()
        }
    }
}

fn execute(args: Vec<String>) -> Result<(), CliError> {
    let args = config::expand(args)?;
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return Ok(());
            }
            return Err(CliError::Usage(e.to_string().trim_end().to_string()));
        }
    };
    match cli.command {
        Command::Eval { model, k, lambda, out } => eval(&model.params()?, k, lambda, out.as_deref()),
        Command::Roots { model, k, ghost, out } => roots(&model.params()?, k, ghost, out.as_deref()),
        Command::Trace { model, k_max, step, out } => trace(&model.params()?, k_max, step, out.as_deref()),
        Command::Kcrit { model, mode, out } => kcrit(&model.params()?, &mode, out.as_deref()),
        Command::PlotArg { model, k, rect, size, out } => {
            let p = model.params()?;
            let w = wave(k, &p)?;
            let spec = ArgPlotSpec::new(rect, size.0, size.1).map_err(CliError::Usage)?;
            plot::write_argument_plot(&spec, &p, &w, &out)?;
            Ok(())
        }
        Command::Closure { model, k, out } => closure(&model.params()?, k, &out),
        Command::OracleCheck { model, k, galerkin_n, out } => {
            if galerkin_n < 32 {
                return Err(CliError::Usage("--galerkin-n must be at least 32".into()));
            }
            oracle_check(&model.params()?, k, galerkin_n, out.as_deref())
        }
    }
}

fn eval(p: &ModelParams, k: f64, lambda: Complex64, out: Option<&Path>) -> Result<(), CliError> {
    let w = wave(k, p)?;
    let sf = SpectralFunction::new(p, &w);
    let pt = sf.point(lambda).map_err(numerical)?;
    let (s, d) = sf.factors(lambda).map_err(numerical)?;
    let v = with_params(
        p,
        json!({
            "k": k,
            "lambda": complex(lambda),
            "zeta": complex(pt.zeta),
            "branch": match pt.branch { HalfPlaneBranch::Upper => "upper", HalfPlaneBranch::Lower => "lower" },
            "sigma": complex(s * s * d),
            "shear": complex(s),
            "diff_ac": complex(d),
            "sigma_det": complex(sf.sigma_det(lambda).map_err(numerical)?),
        }),
    );
    emit(out, &to_json_string(&v))?;
    Ok(())
}

fn roots(p: &ModelParams, k: f64, ghost: bool, out: Option<&Path>) -> Result<(), CliError> {
    wave(k, p)?;
    let found = labelled_roots(k, p, ghost).map_err(numerical)?;
    let list: Vec<Value> = found
        .iter()
        .map(|(label, r)| {
            json!({
                "re": r.lambda.re,
                "im": r.lambda.im,
                "factor": r.factor.name(),
                "multiplicity": r.multiplicity_in_sigma,
                "residual": r.residual,
                "mode": label.map(|l| l.name()),
            })
        })
        .collect();
    let v = with_params(p, json!({ "k": k, "ghost": ghost, "roots": list }));
    emit(out, &to_json_string(&v))?;
    Ok(())
}

fn traced(p: &ModelParams, k_max: f64, step: Option<f64>) -> Result<Vec<Branch>, CliError> {
    if !(k_max > 0.0 && k_max.is_finite()) {
        return Err(CliError::Usage("--k-max must be positive".into()));
    }
    let mut ctl = StepControl::for_tau(p.tau);
    if let Some(s) = step {
        if !(s > 0.0) {
            return Err(CliError::Usage("--step must be positive".into()));
        }
        ctl = ctl.with_max(s);
    }
    trace_all(p, k_max, &ctl).map_err(numerical)
}

fn trace(p: &ModelParams, k_max: f64, step: Option<f64>, out: Option<&Path>) -> Result<(), CliError> {
    let branches = traced(p, k_max, step)?;
    let csv = output::branches_csv(&branches);
    emit(out, &csv)?;
    if let Some(path) = out {
        let ev = output::events_json(p, &branches);
        std::fs::write(output::events_path(path), to_json_string(&ev))?;
    }
    Ok(())
}

fn kcrit(p: &ModelParams, mode: &str, out: Option<&Path>) -> Result<(), CliError> {
    let wanted: Option<ModeLabel> = if mode.eq_ignore_ascii_case("all") {
        None
    } else {
        Some(mode.parse().map_err(|_| CliError::Usage(format!("unknown mode {mode:?}")))?)
    };
    let ctl = StepControl::for_tau(p.tau);
    let branches = trace_all(p, 10.0 / p.tau, &ctl).map_err(numerical)?;
    let pick = |b: &&Branch| wanted.map_or(true, |l| b.label == l);
    let b = branches
        .iter()
        .filter(pick)
        .max_by(|a, b| a.last().k.total_cmp(&b.last().k))
        .ok_or_else(|| CliError::Numerical(format!("no branch {mode}")))?;
    let end = match b.end_event() {
        Some(BranchEvent::Absorbed(_)) => "absorbed",
        Some(BranchEvent::Merge { .. }) => "merge",
        _ => "none",
    };
    let k = b.last().k;
    let v = with_params(
        p,
        json!({
            "mode": b.label.name(),
            "k_crit": k,
            "bracket": [k, k + ctl.floor],
            "kappa_crit": k * p.tau,
            "end": end,
        }),
    );
    emit(out, &to_json_string(&v))?;
    Ok(())
}

fn closure(p: &ModelParams, k: f64, out: &Path) -> Result<(), CliError> {
    wave(k, p)?;
    let sys = hydrodynamic_generator(k, p).map_err(numerical)?;
    let vec_json = |v: &shakhov::closure::MomentVector| v.iter().map(|c| complex(*c)).collect::<Vec<_>>();
    let modes: Vec<Value> = sys
        .modes
        .iter()
        .map(|m| {
            json!({
                "mode": m.label.map(|l| l.name()),
                "lambda": complex(m.lambda),
                "alpha": vec_json(&m.alpha),
                "moments": vec_json(&m.moments),
            })
        })
        .collect();
    let g = sys.generator;
    let real = sys.real_form();
    let v = with_params(
        p,
        json!({
            "k": k,
            "rank": sys.rank,
            "modes": modes,
            "generator": (0..8).map(|i| (0..8).map(|j| complex(g[(i, j)])).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "generator_real_form": (0..8).map(|i| (0..8).map(|j| real[(i, j)].re).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "generator_eigenvalues": sys.generator_eigenvalues().into_iter().map(complex).collect::<Vec<_>>(),
        }),
    );
    std::fs::write(out, to_json_string(&v))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Oracle report

const TOL_PATH: f64 = 1e-8;
const TOL_GALERKIN: f64 = 1e-6;
const TOL_RATE: f64 = 1e-4;

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
}

fn nearest(z: Complex64, set: &[Complex64]) -> f64 {
    set.iter().map(|r| (r - z).norm()).fold(f64::INFINITY, f64::min)
}

fn oracle_check(p: &ModelParams, k: f64, n: usize, out: Option<&Path>) -> Result<(), CliError> {
    let w = wave(k, p)?;
    let sf = SpectralFunction::new(p, &w);

    // plasma function on a fixed grid off the real axis
    let zetas: Vec<Complex64> = (0..200)
        .map(|i| {
            let t = i as f64 / 200.0;
            Complex64::new(-6.0 + 12.0 * t, (if i % 2 == 0 { 1.0 } else { -1.0 }) * (0.05 + 3.0 * t * t))
        })
        .collect();
    let z_err = zetas
        .par_iter()
        .map(|&z| quad_plasma_z(z).map(|q| rel(q, plasma_z(z, HalfPlaneBranch::natural(z)))))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(numerical)?
        .into_iter()
        .fold(0.0, f64::max);

    // the three Σ paths
    let line = p.essential_line();
    let lambdas: Vec<Complex64> = (0..60)
        .map(|i| {
            let t = i as f64 / 60.0;
            let re = line + (0.05 + 1.4 * t) * if i % 3 == 0 { -1.0 } else { 1.0 } / p.tau;
            Complex64::new(re, 3.0 * (2.0 * t - 1.0) / p.tau)
        })
        .collect();
    let det_err = lambdas
        .par_iter()
        .map(|&l| -> Result<f64, CliError> {
            let a = sf.sigma(l).map_err(numerical)?;
            let b = sf.sigma_det(l).map_err(numerical)?;
            let c = quad_kernel_det(l, p, &w).map_err(numerical)?;
            Ok(rel(a, b).max(rel(a, c)).max(rel(b, c)))
        })
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(0.0, f64::max);

    let roots: Vec<Complex64> = RootFinder::new(&sf)
        .all_roots(p.r < 0.0)
        .map_err(numerical)?
        .into_iter()
        .map(|r| r.lambda)
        .collect();

    let groups: Vec<Value> = SectorGroup::ALL
        .par_iter()
        .map(|&g| {
            let cfg = GalerkinConfig::new(n, g);
            let ev = galerkin_spectrum(p, k, cfg);
            let (iso, spread) = isolated_eigenvalues(&ev, p.tau);
            let gal_err = iso.iter().map(|&e| nearest(e, &roots)).fold(0.0, f64::max);
            let sim = simulate_and_fit(p, k, cfg, &InitialData::Random(1), 40.0, 10.0);
            let (rates, rate_err, monotone, fit_error) = match sim {
                Ok((tr, fit)) => {
                    let err = fit.rates.iter().map(|&r| nearest(r, &roots)).fold(0.0, f64::max);
                    let mono = tr.norms.windows(2).all(|x| x[1] <= x[0] * (1.0 + 1e-12));
                    (fit.rates, err, mono, None)
                }
                Err(e) => (vec![], f64::INFINITY, false, Some(e.to_string())),
            };
            let norm_required = (0.0..=1.0).contains(&p.r);
            json!({
                "group": format!("{g:?}"),
                "isolated": iso.iter().map(|&e| complex(e)).collect::<Vec<_>>(),
                "cluster_spread": spread,
                "galerkin_max_distance": gal_err,
                "fitted_rates": rates.iter().map(|&r| complex(r)).collect::<Vec<_>>(),
                "rate_max_distance": rate_err,
                "fit_error": fit_error,
                "norm_non_increasing": monotone,
                "pass": gal_err <= TOL_GALERKIN && rate_err <= TOL_RATE && (monotone || !norm_required),
            })
        })
        .collect();

    let pass = z_err <= TOL_PATH && det_err <= TOL_PATH && groups.iter().all(|g| g["pass"] == json!(true));
    let v = with_params(
        p,
        json!({
            "k": k,
            "galerkin_n": n,
            "roots": roots.iter().map(|&r| complex(r)).collect::<Vec<_>>(),
            "plasma_z_max_rel": z_err,
            "sigma_paths_max_rel": det_err,
            "groups": groups,
            "pass": pass,
        }),
    );
    emit(out, &to_json_string(&v))?;
    if pass {
        Ok(())
    } else {
        Err(CliError::Numerical("oracle comparison outside tolerance".into()))
    }
}
