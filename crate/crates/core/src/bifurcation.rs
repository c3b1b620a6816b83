//! Bifurcation values `λₙ = −2/kₙ`, trivial-branch stability, and
//! pseudo-arclength continuation of the nontrivial branches.
//!
//! At `u = 0` the linearization is `Id − λ·diag(−kₙ/2)`, so the trivial
//! solution loses stability exactly at `λ₁` and each `λₙ` carries a
//! one-dimensional kernel spanned by `φₙ`, which is used directly as the
//! branch-switching direction.

use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::operator::{finite_rank_eval, jacobian, residual_coeffs, OperatorContext, Pairing};
use crate::spectral::SpectralFn;

/// Refusal band for `trivial_stability` around each `λₙ`.
pub const STABILITY_GUARD: f64 = 1e-9;

/// `det(Id − λ·diag(−kₙ/2)) = Π (1 + λkₙ/2)` over the stored modes.
pub fn trivial_determinant(kernel: &KernelSpec, lambda: f64) -> f64 {
    kernel.coeffs().iter().map(|k| 1.0 + 0.5 * lambda * k).product()
}

/// Sign changes of the trivial determinant on a uniform grid over
/// `[lo, hi]`, each refined by bisection to `tol`.
pub fn detect_sign_changes(kernel: &KernelSpec, lo: f64, hi: f64, step: f64, tol: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let n = ((hi - lo) / step).ceil() as usize;
    let mut a = lo;
    let mut fa = trivial_determinant(kernel, a);
    for i in 1..=n {
        let b = (lo + i as f64 * step).min(hi);
        let fb = trivial_determinant(kernel, b);
        if fa == 0.0 {
            out.push(a);
        } else if fa.signum() != fb.signum() && fb != 0.0 {
            let (mut x0, mut x1, mut f0) = (a, b, fa);
            while x1 - x0 > tol {
                let mid = 0.5 * (x0 + x1);
                let fm = trivial_determinant(kernel, mid);
                if fm.signum() == f0.signum() {
                    x0 = mid;
                    f0 = fm;
                } else {
                    x1 = mid;
                }
            }
            out.push(0.5 * (x0 + x1));
        }
        a = b;
        fa = fb;
    }
    out
}

/// All `λₙ = −2/kₙ ≤ λ_max` in ascending order, cross-checked against
/// sign changes of the trivial determinant.
pub fn bifurcation_points(kernel: &KernelSpec, lambda_max: f64) -> Result<Vec<f64>> {
    let points: Vec<f64> = (1..=kernel.n_modes())
        .map(|n| kernel.lambda_n(n))
        .take_while(|&l| l <= lambda_max)
        .collect();
    let lo = points.first().map_or(0.0, |p| 0.5 * p).min(0.1);
    let step = 1e-3;
    let detected = detect_sign_changes(kernel, lo, lambda_max, step, 1e-9);
    if detected.len() != points.len()
        || points.iter().zip(&detected).any(|(p, d)| (p - d).abs() > 1e-6)
    {
        return Err(Error::CrossCheck(format!(
            "closed-form points {points:?} disagree with determinant sign changes {detected:?}"
        )));
    }
    Ok(points)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrivialStability {
    pub lambda: f64,
    pub stable: bool,
    /// `1 + λkₙ/2` for each stored mode.
    pub spectrum: Vec<f64>,
    pub negative_count: usize,
}

impl TrivialStability {
    pub fn smallest_eigenvalue(&self) -> f64 {
        self.spectrum.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn trivial_stability(kernel: &KernelSpec, lambda: f64) -> Result<TrivialStability> {
    for n in 1..=kernel.n_modes() {
        let ln = kernel.lambda_n(n);
        if (lambda - ln).abs() < STABILITY_GUARD {
            return Err(Error::NearBifurcation {
                lambda,
                mode: n,
                lambda_n: ln,
                band: STABILITY_GUARD,
            });
        }
    }
    let spectrum: Vec<f64> = kernel.coeffs().iter().map(|k| 1.0 + 0.5 * lambda * k).collect();
    let negative_count = spectrum.iter().filter(|&&e| e < 0.0).count();
    Ok(TrivialStability {
        lambda,
        stable: negative_count == 0,
        spectrum,
        negative_count,
    })
}

/// Eigenvalues of `Id − λ·a(u)`, ascending.
///
/// `a = S·diag(k)` with `S = −Cov_μ(cos 2nθ, cos 2mθ)`, so `a` is similar to
/// the symmetric `|K|^{1/2}·Cov·|K|^{1/2}` and its spectrum is real.
pub fn linearization_spectrum(u: &SpectralFn, ctx: &OperatorContext) -> Result<Vec<f64>> {
    let a = jacobian(u, ctx)?;
    let n = ctx.n_trunc();
    let k = ctx.kernel();
    let b = DMatrix::from_fn(n, n, |i, j| {
        let (ki, kj) = (k.k(i + 1), k.k(j + 1));
        let cov = -a[(i, j)] / kj;
        (ki.abs() * kj.abs()).sqrt() * cov
    });
    let b = 0.5 * (&b + b.transpose());
    let mut ev: Vec<f64> = SymmetricEigen::new(b)
        .eigenvalues
        .iter()
        .map(|mu| 1.0 - ctx.lambda() * mu)
        .collect();
    ev.sort_by(f64::total_cmp);
    Ok(ev)
}

/// Image under `θ ↦ θ + π/2`: `uₙ ↦ (−1)ⁿuₙ`.
pub fn quarter_rotation(u: &SpectralFn) -> SpectralFn {
    let c = u
        .coeffs()
        .iter()
        .enumerate()
        .map(|(i, v)| if (i + 1) % 2 == 1 { -v } else { *v })
        .collect();
    SpectralFn::new(c, u.grid_size()).expect("finite coefficients")
}

#[derive(Debug, Clone, PartialEq, Serialize, serde::Deserialize)]
pub struct ContinuationConfig {
    /// Seed amplitude of `±ε·φₙ`.
    pub epsilon: f64,
    /// Initial pseudo-arclength step in `(u, λ)` coefficient space.
    pub step: f64,
    pub max_step: f64,
    pub min_step: f64,
    pub max_samples: usize,
    pub tol: f64,
    pub max_corrector_iter: usize,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-2,
            step: 0.05,
            max_step: 0.2,
            min_step: 1e-7,
            max_samples: 5000,
            tol: 1e-10,
            max_corrector_iter: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchSample {
    pub lambda: f64,
    /// `‖u‖_∞`.
    pub amplitude: f64,
    /// Coefficient of the parent mode.
    pub leading_coeff: f64,
    /// All eigenvalues of `Id − λa(u)` positive (linearization label).
    pub stable: bool,
    pub residual_norm: f64,
    /// Pseudo-arclength step that produced this sample (0 for the seed).
    pub step: f64,
    pub u: SpectralFn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    ReachedEnd,
    MaxSamples,
    LeftDomain,
    StepFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Branch {
    pub parent_mode: usize,
    /// `+1` or `−1`: sign of the seed `±ε·φₙ`.
    pub seed_sign: i32,
    pub lambda_bifurcation: f64,
    pub samples: Vec<BranchSample>,
    /// `λ` values where the tangent's `λ` component changed sign.
    pub folds: Vec<f64>,
    pub termination: Termination,
}

impl Branch {
    pub fn id(&self) -> String {
        format!("m{}{}", self.parent_mode, if self.seed_sign > 0 { '+' } else { '-' })
    }
}

struct Extended<'a> {
    base: &'a OperatorContext,
}

impl Extended<'_> {
    fn n(&self) -> usize {
        self.base.n_trunc()
    }

    /// `H(c, λ) = c − λΓ(c)` and `[∂H/∂c | ∂H/∂λ]`.
    fn eval(&self, x: &[f64]) -> Result<(DVector<f64>, DMatrix<f64>)> {
        let n = self.n();
        let lambda = x[n];
        if !(lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} left the domain")));
        }
        let ctx = self.base.with_lambda(lambda)?;
        let e = finite_rank_eval(&x[..n], &ctx, Pairing::X)?;
        let mut jac = DMatrix::zeros(n, n + 1);
        jac.view_mut((0, 0), (n, n)).copy_from(&e.jacobian);
        for i in 0..n {
            jac[(i, n)] = -e.gamma[i];
        }
        Ok((DVector::from_vec(e.value), jac))
    }

    /// Newton on `[H(x); row·x − rhs] = 0`.
    fn correct(&self, mut x: DVector<f64>, row: &DVector<f64>, rhs: f64, tol: f64, max_iter: usize) -> Option<(DVector<f64>, f64, usize)> {
        let n = self.n();
        for it in 0..max_iter {
            let (h, jac) = self.eval(x.as_slice()).ok()?;
            let g = row.dot(&x) - rhs;
            let res = h.amax();
            if res < tol && g.abs() < tol {
                return Some((x, res, it));
            }
            let mut big = DMatrix::zeros(n + 1, n + 1);
            big.view_mut((0, 0), (n, n + 1)).copy_from(&jac);
            big.set_row(n, &row.transpose());
            let mut f = DVector::zeros(n + 1);
            f.rows_mut(0, n).copy_from(&h);
            f[n] = g;
            let dx = big.lu().solve(&(-f))?;
            if !dx.iter().all(|v| v.is_finite()) {
                return None;
            }
            x += dx;
        }
        let (h, _) = self.eval(x.as_slice()).ok()?;
        (h.amax() < tol && (row.dot(&x) - rhs).abs() < tol).then(|| {
            let r = h.amax();
            (x, r, max_iter)
        })
    }

    /// Unit null vector of `[∂H/∂c | ∂H/∂λ]` with `tᵀ·reference > 0`.
    fn tangent(&self, x: &DVector<f64>, reference: &DVector<f64>) -> Option<DVector<f64>> {
        let n = self.n();
        let (_, jac) = self.eval(x.as_slice()).ok()?;
        let mut big = DMatrix::zeros(n + 1, n + 1);
        big.view_mut((0, 0), (n, n + 1)).copy_from(&jac);
        big.set_row(n, &reference.transpose());
        let mut rhs = DVector::zeros(n + 1);
        rhs[n] = 1.0;
        let t = big.lu().solve(&rhs)?;
        let t = t.normalize();
        t.iter().all(|v| v.is_finite()).then_some(t)
    }

    fn sample(&self, x: &DVector<f64>, mode: usize, residual: f64, step: f64) -> Result<BranchSample> {
        let n = self.n();
        let ctx = self.base.with_lambda(x[n])?;
        let u = SpectralFn::new(x.as_slice()[..n].to_vec(), ctx.grid_size())?;
        let spectrum = linearization_spectrum(&u, &ctx)?;
        Ok(BranchSample {
            lambda: x[n],
            amplitude: u.sup_norm(),
            leading_coeff: u.coeff(mode),
            stable: spectrum.iter().all(|&e| e > 0.0),
            residual_norm: residual,
            step,
            u,
        })
    }
}

/// Traces the branch leaving `(λₙ, 0)` along `seed_sign·φₙ` until `λ`
/// exceeds `lambda_end`. The first sample is the seed, corrected on
/// `{uₙ = ±ε}`; subsequent samples come from a tangent predictor and a
/// pseudo-arclength Newton corrector with step halving.
pub fn continue_branch(
    template: &OperatorContext,
    mode: usize,
    seed_sign: i32,
    lambda_end: f64,
    cfg: &ContinuationConfig,
) -> Result<Branch> {
    let n = template.n_trunc();
    if mode == 0 || mode > n {
        return Err(Error::InvalidParameter(format!("mode {mode} outside 1..={n}")));
    }
    if seed_sign != 1 && seed_sign != -1 {
        return Err(Error::InvalidParameter("seed sign must be +1 or -1".into()));
    }
    let lambda_n = template.kernel().lambda_n(mode);
    if !(lambda_end > lambda_n) {
        return Err(Error::InvalidParameter(format!(
            "continuation end {lambda_end} must exceed lambda_{mode} = {lambda_n}"
        )));
    }
    let sys = Extended { base: template };
    let s = seed_sign as f64;

    let mut branch = Branch {
        parent_mode: mode,
        seed_sign,
        lambda_bifurcation: lambda_n,
        samples: Vec::new(),
        folds: Vec::new(),
        termination: Termination::ReachedEnd,
    };

    // seed: fix uₙ = ±ε, halving ε on failure
    let mut eps = cfg.epsilon;
    let mut e_n = DVector::zeros(n + 1);
    e_n[mode - 1] = 1.0;
    let seeded = loop {
        let mut x0 = DVector::zeros(n + 1);
        x0[mode - 1] = s * eps;
        x0[n] = lambda_n;
        if let Some(r) = sys.correct(x0, &e_n, s * eps, cfg.tol, 4 * cfg.max_corrector_iter) {
            break Some(r);
        }
        eps *= 0.5;
        if eps < 1e-8 {
            break None;
        }
    };
    let Some((mut x, res0, _)) = seeded else {
        return Err(Error::StepFailure {
            lambda: lambda_n,
            samples: 0,
            partial: Box::new(branch),
        });
    };
    branch.samples.push(sys.sample(&x, mode, res0, 0.0)?);
    let orient = e_n.clone() * s;
    let Some(mut t) = sys.tangent(&x, &orient) else {
        return Err(Error::StepFailure {
            lambda: x[n],
            samples: 1,
            partial: Box::new(branch),
        });
    };

    let mut h = cfg.step.min(cfg.max_step);
    while branch.samples.len() < cfg.max_samples {
        let pred = &x + &t * h;
        let rhs = t.dot(&pred);
        match sys.correct(pred, &t, rhs, cfg.tol, cfg.max_corrector_iter) {
            Some((xn, res, iters)) => {
                let Some(tn) = sys.tangent(&xn, &t) else {
                    h *= 0.5;
                    if h < cfg.min_step {
                        branch.termination = Termination::StepFailure;
                        break;
                    }
                    continue;
                };
                if tn[n].signum() != t[n].signum() && t[n] != 0.0 {
                    branch.folds.push(xn[n]);
                }
                branch.samples.push(sys.sample(&xn, mode, res, h)?);
                x = xn;
                t = tn;
                if x[n] >= lambda_end {
                    branch.termination = Termination::ReachedEnd;
                    return Ok(branch);
                }
                if x[n] <= 0.0 {
                    branch.termination = Termination::LeftDomain;
                    return Ok(branch);
                }
                if iters <= 3 {
                    h = (1.5 * h).min(cfg.max_step);
                }
            }
            None => {
                h *= 0.5;
                if h < cfg.min_step {
                    branch.termination = Termination::StepFailure;
                    break;
                }
            }
        }
    }
    if branch.termination == Termination::StepFailure {
        return Err(Error::StepFailure {
            lambda: x[n],
            samples: branch.samples.len(),
            partial: Box::new(branch),
        });
    }
    branch.termination = Termination::MaxSamples;
    Ok(branch)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrivialSample {
    pub lambda: f64,
    pub stable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BifurcationDiagram {
    pub level: usize,
    pub grid_size: usize,
    pub lambda_max: f64,
    pub lambda_points: Vec<f64>,
    pub trivial_branch: Vec<TrivialSample>,
    pub branches: Vec<Branch>,
    pub complete: bool,
    pub notes: Vec<String>,
}

const TRIVIAL_SAMPLES: usize = 400;

/// Trivial branch on `[0, λ_max]` plus both sub-branches from every
/// `λₙ ≤ λ_max` with `n ≤ N`.
pub fn assemble_diagram(template: &OperatorContext, lambda_max: f64, cfg: &ContinuationConfig) -> Result<BifurcationDiagram> {
    if !(lambda_max > 0.0) {
        return Err(Error::InvalidParameter("lambda_max must be positive".into()));
    }
    let kernel = template.kernel();
    let lambda_points = bifurcation_points(kernel, lambda_max)?;
    let mut trivial_branch = Vec::with_capacity(TRIVIAL_SAMPLES + 1);
    for i in 0..=TRIVIAL_SAMPLES {
        let lambda = lambda_max * i as f64 / TRIVIAL_SAMPLES as f64;
        if let Ok(s) = trivial_stability(kernel, lambda) {
            trivial_branch.push(TrivialSample {
                lambda,
                stable: s.stable,
            });
        }
    }

    let mut notes = Vec::new();
    let mut complete = true;
    let jobs: Vec<(usize, i32)> = (1..=lambda_points.len())
        .filter(|&m| {
            let ok = m <= template.n_trunc();
            if !ok {
                notes.push(format!("mode {m} exceeds truncation level {}; branch not traced", template.n_trunc()));
            }
            ok
        })
        .flat_map(|m| [(m, 1), (m, -1)])
        .collect();
    if jobs.len() < 2 * lambda_points.len() {
        complete = false;
    }
    let results: Vec<Result<Branch>> = jobs
        .par_iter()
        .map(|&(m, s)| continue_branch(template, m, s, lambda_max, cfg))
        .collect();
    let mut branches = Vec::new();
    for r in results {
        match r {
            Ok(b) => {
                if b.termination != Termination::ReachedEnd {
                    complete = false;
                    notes.push(format!("branch {} ended with {:?}", b.id(), b.termination));
                }
                branches.push(b);
            }
            Err(Error::StepFailure { partial, lambda, .. }) => {
                complete = false;
                notes.push(format!("branch {} failed near lambda = {lambda}", partial.id()));
                branches.push(*partial);
            }
            Err(e) => return Err(e),
        }
    }
    Ok(BifurcationDiagram {
        level: template.n_trunc(),
        grid_size: template.grid_size(),
        lambda_max,
        lambda_points,
        trivial_branch,
        branches,
        complete,
        notes,
    })
}

/// One row per sample: trivial branch first, then each traced branch.
pub fn diagram_csv(d: &BifurcationDiagram) -> String {
    let mut out = String::from("branch_id,parent_mode,lambda,amplitude,leading_coeff,stable\n");
    for s in &d.trivial_branch {
        let _ = writeln!(out, "trivial,0,{},0,0,{}", s.lambda, s.stable);
    }
    for b in &d.branches {
        for s in &b.samples {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                b.id(),
                b.parent_mode,
                s.lambda,
                s.amplitude,
                s.leading_coeff,
                s.stable
            );
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `y = slope·x + intercept`.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> LinearFit {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    LinearFit {
        slope,
        intercept: my - slope * mx,
        r_squared: sxy * sxy / (sxx * syy),
    }
}

/// `amplitude²` against `λ − λₙ` over the first `count` samples.
pub fn pitchfork_fit(branch: &Branch, count: usize) -> LinearFit {
    let s = &branch.samples[..count.min(branch.samples.len())];
    let xs: Vec<f64> = s.iter().map(|p| p.lambda - branch.lambda_bifurcation).collect();
    let ys: Vec<f64> = s.iter().map(|p| p.amplitude * p.amplitude).collect();
    linear_fit(&xs, &ys)
}

/// `‖A[u]‖_∞` at the sample's own `λ`.
pub fn sample_residual(template: &OperatorContext, lambda: f64, u: &SpectralFn) -> Result<f64> {
    let ctx = template.with_lambda(lambda)?;
    Ok(residual_coeffs(u.coeffs(), &ctx)?
        .iter()
        .fold(0.0f64, |a, v| a.max(v.abs())))
}
