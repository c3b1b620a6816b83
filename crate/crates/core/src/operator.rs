//! The fixed-point map `A[u] = u − λΓ[u]` with
//! `Γ[u](θ) = ∫ K̂(θ − θ′) dμ_u(θ′)`, `dμ_u = e^{−u}/∫e^{−u}`,
//! its Gâteaux derivative and the finite-rank approximations.
//!
//! Everything is factored through the cosine moments of the Boltzmann
//! measure, `c_j = ∫ cos(2jθ) dμ_u`. For even `u` the measure is even, so
//!
//! * `Γ[u]` has `φₙ`-coefficient `√π kₙ cₙ`;
//! * `a_nm = ⟨DΓ[u](φₙ), φₘ⟩ = kₘ (cₙcₘ − ½(c_{n+m} + c_{|n−m|}))`,
//!
//! the last line being the product-to-sum form of
//! `∫cos(2nθ)cos(2mθ)dμ`, which holds pointwise on the grid and therefore
//! matches the direct quadrature of the three-term derivative exactly.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::KernelSpec;
use crate::spectral::{y_weight, CosineTable, SpectralFn};

/// Exponent guard: `‖u‖_∞` above this is refused before `e^{−u}`.
pub const EXP_GUARD: f64 = 700.0;

/// Everything needed to evaluate `A` and its Galerkin truncation.
#[derive(Debug, Clone)]
pub struct OperatorContext {
    kernel: KernelSpec,
    lambda: f64,
    n_trunc: usize,
    table: CosineTable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ContextSummary {
    pub lambda: f64,
    pub n_trunc: usize,
    pub grid_size: usize,
}

impl OperatorContext {
    pub fn new(kernel: KernelSpec, lambda: f64, n_trunc: usize, grid_size: usize) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be non-negative")));
        }
        if n_trunc == 0 {
            return Err(Error::InvalidParameter("truncation level must be positive".into()));
        }
        if n_trunc > kernel.n_modes() {
            return Err(Error::InvalidParameter(format!(
                "truncation level {n_trunc} exceeds the {} kernel modes",
                kernel.n_modes()
            )));
        }
        if grid_size < 4 * n_trunc {
            return Err(Error::GridTooCoarse {
                grid_size,
                n_modes: n_trunc,
            });
        }
        Ok(Self {
            kernel,
            lambda,
            n_trunc,
            table: CosineTable::new(grid_size),
        })
    }

    pub fn kernel(&self) -> &KernelSpec {
        &self.kernel
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn n_trunc(&self) -> usize {
        self.n_trunc
    }

    pub fn grid_size(&self) -> usize {
        self.table.grid_size()
    }

    pub fn table(&self) -> &CosineTable {
        &self.table
    }

    pub fn summary(&self) -> ContextSummary {
        ContextSummary {
            lambda: self.lambda,
            n_trunc: self.n_trunc,
            grid_size: self.grid_size(),
        }
    }

    /// Same kernel, level and grid at another `λ`.
    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!("lambda = {lambda} must be non-negative")));
        }
        let mut out = self.clone();
        out.lambda = lambda;
        Ok(out)
    }

    /// Same kernel and `λ` at another level and grid.
    pub fn with_level(&self, n_trunc: usize, grid_size: usize) -> Result<Self> {
        Self::new(self.kernel.clone(), self.lambda, n_trunc, grid_size)
    }

    /// `‖K̂‖_∞·λ`, the sup-norm bound on every solution.
    pub fn apriori_radius(&self) -> f64 {
        self.lambda * self.kernel.sup_norm()
    }

    /// `Some((n, λₙ))` if `λ` is within `band` of a bifurcation value of
    /// the level-N problem.
    pub fn nearest_bifurcation_within(&self, band: f64) -> Option<(usize, f64)> {
        (1..=self.n_trunc)
            .map(|n| (n, self.kernel.lambda_n(n)))
            .find(|&(_, ln)| (self.lambda - ln).abs() < band)
    }

    fn check_fn(&self, u: &SpectralFn) -> Result<()> {
        self.check_coeffs(u.coeffs())
    }

    fn check_coeffs(&self, c: &[f64]) -> Result<()> {
        if c.len() != self.n_trunc {
            return Err(Error::DimensionMismatch {
                expected: self.n_trunc,
                got: c.len(),
            });
        }
        Ok(())
    }

    fn wrap(&self, coeffs: Vec<f64>) -> SpectralFn {
        SpectralFn::new(coeffs, self.grid_size()).expect("finite coefficients on a valid grid")
    }
}

/// Density of `μ_u` on the grid, normalised so the trapezoid integral is 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoltzmannMeasure {
    pub weights: Vec<f64>,
}

impl BoltzmannMeasure {
    pub fn total(&self) -> f64 {
        crate::spectral::trapezoid(&self.weights)
    }
}

fn boltzmann_weights(coeffs: &[f64], ctx: &OperatorContext) -> Result<Vec<f64>> {
    let u = ctx.table.synthesize(coeffs);
    let sup = u.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if !(sup <= EXP_GUARD) {
        return Err(Error::Range {
            sup,
            limit: EXP_GUARD,
        });
    }
    let umin = u.iter().copied().fold(f64::INFINITY, f64::min);
    let mut w: Vec<f64> = u.iter().map(|v| (umin - v).exp()).collect();
    let z = crate::spectral::trapezoid(&w);
    for x in &mut w {
        *x /= z;
    }
    Ok(w)
}

pub fn boltzmann(u: &SpectralFn, ctx: &OperatorContext) -> Result<BoltzmannMeasure> {
    ctx.check_fn(u)?;
    Ok(BoltzmannMeasure {
        weights: boltzmann_weights(u.coeffs(), ctx)?,
    })
}

/// `c_j = ∫cos(2jθ)dμ_u` for `j = 0..=max_mode` (`c₀ = 1`).
fn moments(coeffs: &[f64], ctx: &OperatorContext, max_mode: usize) -> Result<Vec<f64>> {
    let w = boltzmann_weights(coeffs, ctx)?;
    let h = 2.0 * PI / ctx.grid_size() as f64;
    Ok((0..=max_mode)
        .map(|j| {
            h * w
                .iter()
                .enumerate()
                .map(|(i, wi)| wi * ctx.table.cos_mode(j, i))
                .sum::<f64>()
        })
        .collect())
}

fn gamma_from_moments(c: &[f64], ctx: &OperatorContext) -> Vec<f64> {
    let sqrt_pi = PI.sqrt();
    (1..=ctx.n_trunc)
        .map(|n| sqrt_pi * ctx.kernel.k(n) * c[n])
        .collect()
}

fn a_from_moments(c: &[f64], ctx: &OperatorContext) -> DMatrix<f64> {
    let n = ctx.n_trunc;
    DMatrix::from_fn(n, n, |i, j| {
        let (p, q) = (i + 1, j + 1);
        let second = 0.5 * (c[p + q] + c[p.abs_diff(q)]);
        ctx.kernel.k(q) * (c[p] * c[q] - second)
    })
}

/// Coefficients of `Γ[u]` at level N.
pub fn gamma_coeffs(coeffs: &[f64], ctx: &OperatorContext) -> Result<Vec<f64>> {
    ctx.check_coeffs(coeffs)?;
    let c = moments(coeffs, ctx, ctx.n_trunc)?;
    Ok(gamma_from_moments(&c, ctx))
}

pub fn gamma(u: &SpectralFn, ctx: &OperatorContext) -> Result<SpectralFn> {
    Ok(ctx.wrap(gamma_coeffs(u.coeffs(), ctx)?))
}

/// `Γ[u]` by direct double quadrature of the convolution against the
/// truncated kernel, projected back onto the basis. `O(M²)`; used as an
/// independent route for cross-checks.
pub fn gamma_quadrature(u: &SpectralFn, ctx: &OperatorContext) -> Result<SpectralFn> {
    ctx.check_fn(u)?;
    let m = ctx.grid_size();
    let w = boltzmann_weights(u.coeffs(), ctx)?;
    let h = 2.0 * PI / m as f64;
    let kvals: Vec<f64> = (0..m)
        .map(|d| {
            (1..=ctx.n_trunc)
                .map(|n| ctx.kernel.k(n) * ctx.table.cos_mode(n, d))
                .sum()
        })
        .collect();
    let conv: Vec<f64> = (0..m)
        .map(|i| h * (0..m).map(|j| kvals[(i + m - j) % m] * w[j]).sum::<f64>())
        .collect();
    Ok(ctx.wrap(ctx.table.analyze(&conv, ctx.n_trunc)))
}

/// Coefficients of `A[u] = u − λΓ[u]`.
pub fn residual_coeffs(coeffs: &[f64], ctx: &OperatorContext) -> Result<Vec<f64>> {
    let g = gamma_coeffs(coeffs, ctx)?;
    Ok(coeffs
        .iter()
        .zip(g)
        .map(|(u, g)| u - ctx.lambda * g)
        .collect())
}

pub fn residual(u: &SpectralFn, ctx: &OperatorContext) -> Result<SpectralFn> {
    Ok(ctx.wrap(residual_coeffs(u.coeffs(), ctx)?))
}

/// `a[n][m] = ⟨DΓ[u](φₙ), φₘ⟩` (0-based storage: entry `(n−1, m−1)`).
/// Row index is the direction, column index the test mode.
pub fn jacobian(u: &SpectralFn, ctx: &OperatorContext) -> Result<DMatrix<f64>> {
    ctx.check_fn(u)?;
    let c = moments(u.coeffs(), ctx, 2 * ctx.n_trunc)?;
    Ok(a_from_moments(&c, ctx))
}

/// Derivative of the residual coefficients: `∂A_m/∂u_n = δ_nm − λ a[n][m]`,
/// stored with row `m`, column `n`, i.e. `Id − λ aᵀ`.
pub fn residual_jacobian(u: &SpectralFn, ctx: &OperatorContext) -> Result<DMatrix<f64>> {
    let a = jacobian(u, ctx)?;
    Ok(DMatrix::identity(ctx.n_trunc, ctx.n_trunc) - a.transpose() * ctx.lambda)
}

/// Which duality pairing projects `A[u]` onto the first N directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pairing {
    /// `⟨A[u], φ_k⟩_X`, the L² pairing.
    #[default]
    X,
    /// `⟨A[u], φ_k⟩_Y = (1+4k²)⟨A[u], φ_k⟩_X`.
    Y,
}

impl Pairing {
    #[inline]
    pub fn weight(self, k: usize) -> f64 {
        match self {
            Pairing::X => 1.0,
            Pairing::Y => y_weight(k),
        }
    }
}

/// Value and derivative of the finite-rank map at a coefficient vector.
#[derive(Debug, Clone)]
pub struct FiniteRankEval {
    pub value: Vec<f64>,
    pub jacobian: DMatrix<f64>,
    /// Coefficients of `Γ[u]`, reused by continuation as `−∂A/∂λ`.
    pub gamma: Vec<f64>,
}

/// `value_k = w_k ⟨A[u], φ_k⟩_X` with pairing weight `w_k`, plus its
/// Jacobian `diag(w)(Id − λaᵀ)`. One pass over the grid.
pub fn finite_rank_eval(coeffs: &[f64], ctx: &OperatorContext, pairing: Pairing) -> Result<FiniteRankEval> {
    ctx.check_coeffs(coeffs)?;
    let n = ctx.n_trunc;
    let c = moments(coeffs, ctx, 2 * n)?;
    let gamma = gamma_from_moments(&c, ctx);
    let a = a_from_moments(&c, ctx);
    let value = (0..n)
        .map(|k| pairing.weight(k + 1) * (coeffs[k] - ctx.lambda * gamma[k]))
        .collect();
    let jacobian = DMatrix::from_fn(n, n, |row, col| {
        let delta = if row == col { 1.0 } else { 0.0 };
        pairing.weight(row + 1) * (delta - ctx.lambda * a[(col, row)])
    });
    Ok(FiniteRankEval {
        value,
        jacobian,
        gamma,
    })
}

pub fn finite_rank_values(coeffs: &[f64], ctx: &OperatorContext, pairing: Pairing) -> Result<Vec<f64>> {
    let r = residual_coeffs(coeffs, ctx)?;
    Ok(r.into_iter()
        .enumerate()
        .map(|(k, v)| pairing.weight(k + 1) * v)
        .collect())
}

/// `Aₙ(u)`: `⟨A[u], φ_k⟩_X` for `k = 1..N`.
pub fn finite_rank_x(u: &SpectralFn, ctx: &OperatorContext) -> Result<Vec<f64>> {
    finite_rank_values(u.coeffs(), ctx, Pairing::X)
}

/// `Ãₙ(u)`: `⟨A[u], φ_k⟩_Y` for `k = 1..N`.
pub fn finite_rank_y(u: &SpectralFn, ctx: &OperatorContext) -> Result<Vec<f64>> {
    finite_rank_values(u.coeffs(), ctx, Pairing::Y)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrussReport {
    /// `max_{n,m} |a[n][m]| / |kₘ|`.
    pub max_ratio: f64,
    /// 1-based `(n, m)` attaining the maximum.
    pub argmax: (usize, usize),
}

impl GrussReport {
    pub fn holds(&self) -> bool {
        self.max_ratio <= 1.0 + 1e-8
    }
}

pub fn gruss_check(u: &SpectralFn, ctx: &OperatorContext) -> Result<GrussReport> {
    let a = jacobian(u, ctx)?;
    let mut best = GrussReport {
        max_ratio: f64::NEG_INFINITY,
        argmax: (1, 1),
    };
    for i in 0..ctx.n_trunc {
        for j in 0..ctx.n_trunc {
            let r = a[(i, j)].abs() / ctx.kernel.k(j + 1).abs();
            if r > best.max_ratio {
                best = GrussReport {
                    max_ratio: r,
                    argmax: (i + 1, j + 1),
                };
            }
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundCheck {
    pub value: f64,
    pub bound: f64,
    pub holds: bool,
}

impl BoundCheck {
    fn new(value: f64, bound: f64, slack: f64) -> Self {
        Self {
            value,
            bound,
            holds: value <= bound + slack,
        }
    }
}

/// `‖u‖_∞ ≤ λ‖K̂‖_∞` (+1e−6).
pub fn apriori_check(u: &SpectralFn, ctx: &OperatorContext) -> BoundCheck {
    BoundCheck::new(u.sup_norm(), ctx.apriori_radius(), 1e-6)
}

/// `‖u′‖_{L²} ≤ 2πλ‖K̂′‖_∞` (+1e−6).
pub fn regularity_check(u: &SpectralFn, ctx: &OperatorContext) -> BoundCheck {
    BoundCheck::new(
        u.derivative_l2_norm(),
        2.0 * PI * ctx.lambda * ctx.kernel.deriv_sup_norm(),
        1e-6,
    )
}
