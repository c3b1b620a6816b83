//! Brouwer degree of the finite-rank maps on `Ωₙ` as a sum of Jacobian
//! signs over certified zeros, and the degree-theoretic checks built on it:
//! stabilization in the level, domain decomposition and convex-homotopy
//! invariance.
//!
//! `Ω` is the sup-norm ball `‖u‖_∞ < R` of the synthesized function. It is
//! contained in the coefficient ball of radius `√(2π)·R`
//! (`‖c‖₂ = ‖u‖_{L²} ≤ √(2π)‖u‖_∞`), which is where starts are drawn.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::newton::{self, NewtonSettings};
use crate::operator::{finite_rank_eval, finite_rank_values, OperatorContext, Pairing};
use crate::spectral::{default_grid_size, SpectralFn};

/// `|λ − λₙ|` below which degree computations refuse.
pub const GUARD_BAND: f64 = 1e-6;
/// Zeros whose Jacobian has `σ_min < NONREGULAR_RATIO·σ_max` are refused.
pub const NONREGULAR_RATIO: f64 = 1e-10;
/// Sup-norm distance to `∂Ω` that counts as a boundary zero.
pub const BOUNDARY_TOL: f64 = 1e-6;
/// Default `R − λ‖K̂‖_∞`.
pub const DEFAULT_RADIUS_MARGIN: f64 = 0.5;

const BATCH: usize = 32;
const BOUNDARY_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartConfig {
    /// Number of Newton starts; `None` means `64·N`.
    pub n_starts: Option<usize>,
    pub seed: u64,
    pub newton_tol: f64,
    pub max_iter: usize,
    pub deflation_radius: f64,
}

impl Default for MultistartConfig {
    fn default() -> Self {
        Self {
            n_starts: None,
            seed: 0x5eed,
            newton_tol: 1e-10,
            max_iter: 60,
            deflation_radius: 1e-3,
        }
    }
}

impl MultistartConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_starts == Some(0) {
            return Err(Error::InvalidParameter("n_starts must be at least 1".into()));
        }
        if !(self.newton_tol > 0.0) {
            return Err(Error::InvalidParameter("newton_tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter("max_iter must be positive".into()));
        }
        if !(self.deflation_radius > 0.0) {
            return Err(Error::InvalidParameter("deflation_radius must be positive".into()));
        }
        Ok(())
    }

    pub fn starts_for(&self, level: usize) -> usize {
        self.n_starts.unwrap_or(64 * level)
    }

    pub fn with_starts(mut self, n: usize) -> Self {
        self.n_starts = Some(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// Default domain radius `λ‖K̂‖_∞ + margin`.
pub fn default_radius(ctx: &OperatorContext) -> f64 {
    ctx.apriori_radius() + DEFAULT_RADIUS_MARGIN
}

/// Bounded open set on which the degree is taken.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Domain {
    /// `{u : ‖u‖_∞ < radius}`.
    SupBall { radius: f64 },
    /// `{c : ‖c − center‖₂ < radius}` in coefficient space.
    CoeffBall { center: Vec<f64>, radius: f64 },
}

impl Domain {
    /// Signed distance to the boundary in the domain's own norm; positive
    /// inside.
    fn depth(&self, c: &[f64], grid_size: usize) -> f64 {
        match self {
            Domain::SupBall { radius } => {
                let u = SpectralFn::new(c.to_vec(), grid_size).expect("finite coefficients");
                radius - u.sup_norm()
            }
            Domain::CoeffBall { center, radius } => radius - dist(c, center),
        }
    }

    /// Centre and radius of a coefficient ball covering the domain.
    fn cover(&self, dim: usize) -> (Vec<f64>, f64) {
        match self {
            Domain::SupBall { radius } => (vec![0.0; dim], (2.0 * PI).sqrt() * radius),
            Domain::CoeffBall { center, radius } => (center.clone(), *radius),
        }
    }

    /// Point on `∂Ω` along `dir` from the centre.
    fn boundary_point(&self, dir: &[f64], grid_size: usize) -> Vec<f64> {
        match self {
            Domain::SupBall { radius } => {
                let u = SpectralFn::new(dir.to_vec(), grid_size).expect("finite direction");
                let s = radius / u.sup_norm();
                dir.iter().map(|d| d * s).collect()
            }
            Domain::CoeffBall { center, radius } => {
                let n = norm(dir);
                center.iter().zip(dir).map(|(c, d)| c + radius * d / n).collect()
            }
        }
    }

    fn center(&self, dim: usize) -> Vec<f64> {
        self.cover(dim).0
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// An isolated zero of the finite-rank map with its local index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Zero {
    pub u: SpectralFn,
    pub jacobian_sign: i32,
    pub residual_norm: f64,
    pub sup_norm: f64,
    /// Multistart runs whose undeflated Newton iteration landed here.
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ZeroSearch {
    pub zeros: Vec<Zero>,
    /// Converged zeros lying outside the domain (not counted).
    pub outside: usize,
    pub n_starts: usize,
    pub failed_starts: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeReport {
    pub level: usize,
    pub grid_size: usize,
    pub lambda: f64,
    pub pairing: Pairing,
    pub domain: Domain,
    /// Sup-norm radius `R` when the domain is the sup ball.
    pub domain_radius: f64,
    pub zeros: Vec<Zero>,
    pub degree: i32,
    pub boundary_margin: f64,
    pub min_separation: f64,
    pub certified: bool,
    pub reasons: Vec<String>,
    pub n_starts: usize,
    pub failed_starts: usize,
    pub outside_zeros: usize,
    pub seed: u64,
}

impl DegreeReport {
    pub fn signs(&self) -> Vec<i32> {
        self.zeros.iter().map(|z| z.jacobian_sign).collect()
    }
}

fn guard(ctx: &OperatorContext) -> Result<()> {
    if let Some((mode, lambda_n)) = ctx.nearest_bifurcation_within(GUARD_BAND) {
        return Err(Error::NearBifurcation {
            lambda: ctx.lambda(),
            mode,
            lambda_n,
            band: GUARD_BAND,
        });
    }
    Ok(())
}

fn settings(cfg: &MultistartConfig, cover_radius: f64) -> NewtonSettings {
    NewtonSettings {
        tol: cfg.newton_tol,
        max_iter: cfg.max_iter,
        max_step: cover_radius.max(1.0),
    }
}

fn draw_starts(center: &[f64], radius: f64, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let dim = center.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let dir: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(&mut rng)).collect();
            let n = norm(&dir).max(f64::MIN_POSITIVE);
            let r = radius * rng.random::<f64>().powf(1.0 / dim as f64);
            center.iter().zip(&dir).map(|(c, d)| c + r * d / n).collect()
        })
        .collect()
}

struct StartOutcome {
    plain: Option<newton::Converged>,
    deflated: Option<newton::Converged>,
}

/// Sign of `det J` at a zero, refusing near-singular Jacobians.
fn jacobian_sign(jac: &DMatrix<f64>) -> Result<i32> {
    let sv = jac.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    if !(smin > NONREGULAR_RATIO * smax.max(1.0)) {
        return Err(Error::NonRegularZero {
            sigma_min: smin,
            scale: smax,
        });
    }
    let det = jac.clone().lu().determinant();
    Ok(if det > 0.0 { 1 } else { -1 })
}

/// Multistart Newton with deflation on the chosen finite-rank map, over
/// an arbitrary domain. Results do not depend on the thread schedule:
/// each batch sees the deflation set frozen at its start and is merged
/// in start order.
pub fn find_zeros_in(
    ctx: &OperatorContext,
    domain: &Domain,
    cfg: &MultistartConfig,
    pairing: Pairing,
) -> Result<ZeroSearch> {
    cfg.validate()?;
    guard(ctx)?;
    let n = ctx.n_trunc();
    let (center, cover) = domain.cover(n);
    let n_starts = cfg.starts_for(n);
    let starts = draw_starts(&center, cover, n_starts, cfg.seed);
    let ns = settings(cfg, cover);
    let eval = |x: &[f64]| finite_rank_eval(x, ctx, pairing).map(|e| (e.value, e.jacobian));

    let mut found: Vec<(Vec<f64>, f64, usize)> = Vec::new();
    let mut failed = 0usize;
    let matches = |found: &[(Vec<f64>, f64, usize)], x: &[f64]| {
        found.iter().position(|(z, _, _)| dist(z, x) < cfg.deflation_radius)
    };
    for batch in starts.chunks(BATCH) {
        let known: Vec<Vec<f64>> = found.iter().map(|(z, _, _)| z.clone()).collect();
        let outcomes: Vec<StartOutcome> = batch
            .par_iter()
            .map(|x0| {
                let plain = newton::solve(x0, eval, ns, &[]);
                let needs_deflation = match &plain {
                    None => !known.is_empty(),
                    Some(c) => known.iter().any(|z| dist(z, &c.x) < cfg.deflation_radius),
                };
                let deflated = if needs_deflation {
                    newton::solve(x0, eval, ns, &known)
                        .and_then(|c| newton::solve(&c.x, eval, ns, &[]))
                } else {
                    None
                };
                StartOutcome { plain, deflated }
            })
            .collect();
        for o in outcomes {
            match o.plain {
                Some(c) => match matches(&found, &c.x) {
                    Some(i) => found[i].2 += 1,
                    None => found.push((c.x, c.residual, 1)),
                },
                None => failed += 1,
            }
            if let Some(c) = o.deflated {
                if matches(&found, &c.x).is_none() {
                    found.push((c.x, c.residual, 0));
                }
            }
        }
    }

    let mut zeros = Vec::new();
    let mut outside = 0;
    for (x, residual, hits) in found {
        let depth = domain.depth(&x, ctx.grid_size());
        if depth.abs() < BOUNDARY_TOL {
            let u = SpectralFn::new(x.clone(), ctx.grid_size())?;
            return Err(Error::BoundaryZero {
                sup_norm: u.sup_norm(),
                radius: match domain {
                    Domain::SupBall { radius } => *radius,
                    Domain::CoeffBall { radius, .. } => *radius,
                },
            });
        }
        if depth < 0.0 {
            outside += 1;
            continue;
        }
        let e = finite_rank_eval(&x, ctx, pairing)?;
        let sign = jacobian_sign(&e.jacobian)?;
        let u = SpectralFn::new(x, ctx.grid_size())?;
        zeros.push(Zero {
            sup_norm: u.sup_norm(),
            u,
            jacobian_sign: sign,
            residual_norm: residual,
            starts: hits,
        });
    }
    zeros.sort_by(|a, b| canonical_cmp(a.u.coeffs(), b.u.coeffs()));
    Ok(ZeroSearch {
        zeros,
        outside,
        n_starts,
        failed_starts: failed,
    })
}

fn canonical_cmp(a: &[f64], b: &[f64]) -> std::cmp::Ordering {
    let q = |v: f64| (v * 1e8).round();
    for (x, y) in a.iter().zip(b) {
        let o = q(*x).total_cmp(&q(*y));
        if o.is_ne() {
            return o;
        }
    }
    std::cmp::Ordering::Equal
}

/// Zeros of `Aₙ` (X pairing) in the sup ball of radius `R`.
pub fn find_zeros(ctx: &OperatorContext, radius: f64, cfg: &MultistartConfig) -> Result<Vec<Zero>> {
    Ok(find_zeros_in(ctx, &Domain::SupBall { radius }, cfg, Pairing::X)?.zeros)
}

/// Degree over an arbitrary domain with either pairing.
pub fn degree_in(
    ctx: &OperatorContext,
    domain: &Domain,
    cfg: &MultistartConfig,
    pairing: Pairing,
) -> Result<DegreeReport> {
    let search = find_zeros_in(ctx, domain, cfg, pairing)?;
    let n = ctx.n_trunc();
    let m = ctx.grid_size();

    // boundary sample: ±coordinate axes, rays through zeros, random directions
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for k in 0..n {
        for s in [1.0, -1.0] {
            let mut d = vec![0.0; n];
            d[k] = s;
            dirs.push(d);
        }
    }
    let center = domain.center(n);
    for z in &search.zeros {
        let d: Vec<f64> = z.u.coeffs().iter().zip(&center).map(|(a, b)| a - b).collect();
        if norm(&d) > 1e-8 {
            dirs.push(d);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xb0_4d_a7);
    for _ in 0..BOUNDARY_SAMPLES {
        dirs.push((0..n).map(|_| StandardNormal.sample(&mut rng)).collect());
    }
    let margins: Vec<Result<f64>> = dirs
        .par_iter()
        .map(|d| {
            let p = domain.boundary_point(d, m);
            finite_rank_values(&p, ctx, pairing).map(|v| norm(&v))
        })
        .collect();
    let mut boundary_margin = f64::INFINITY;
    for r in margins {
        boundary_margin = boundary_margin.min(r?);
    }

    let mut min_separation = f64::INFINITY;
    for (i, a) in search.zeros.iter().enumerate() {
        for b in &search.zeros[i + 1..] {
            min_separation = min_separation.min(dist(a.u.coeffs(), b.u.coeffs()));
        }
    }

    let tol = cfg.newton_tol;
    let mut reasons = Vec::new();
    if !(boundary_margin > 10.0 * tol) {
        reasons.push(format!("boundary margin {boundary_margin:.3e} <= 10 x tolerance"));
    }
    if !(min_separation > 10.0 * tol) {
        reasons.push(format!("zero separation {min_separation:.3e} <= 10 x tolerance"));
    }
    if let Some(z) = search.zeros.iter().find(|z| !(z.residual_norm < tol)) {
        reasons.push(format!("zero residual {:.3e} above tolerance", z.residual_norm));
    }
    let degree: i32 = search.zeros.iter().map(|z| z.jacobian_sign).sum();
    // a ball containing every solution carries the global degree 1
    if let Domain::SupBall { radius } = domain {
        if *radius > ctx.apriori_radius() + BOUNDARY_TOL && degree != 1 {
            reasons.push(format!("degree {degree} on a ball containing all solutions, expected 1"));
        }
    }
    Ok(DegreeReport {
        level: n,
        grid_size: m,
        lambda: ctx.lambda(),
        pairing,
        domain_radius: match domain {
            Domain::SupBall { radius } | Domain::CoeffBall { radius, .. } => *radius,
        },
        domain: domain.clone(),
        zeros: search.zeros,
        degree,
        boundary_margin,
        min_separation,
        certified: reasons.is_empty(),
        reasons,
        n_starts: search.n_starts,
        failed_starts: search.failed_starts,
        outside_zeros: search.outside,
        seed: cfg.seed,
    })
}

/// `deg(Aₙ, Ωₙ, 0)` on the sup ball of radius `R` (X pairing).
pub fn brouwer_degree(ctx: &OperatorContext, radius: f64, cfg: &MultistartConfig) -> Result<DegreeReport> {
    degree_in(ctx, &Domain::SupBall { radius }, cfg, Pairing::X)
}

pub fn brouwer_degree_with(
    ctx: &OperatorContext,
    radius: f64,
    cfg: &MultistartConfig,
    pairing: Pairing,
) -> Result<DegreeReport> {
    degree_in(ctx, &Domain::SupBall { radius }, cfg, pairing)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationRow {
    pub level: usize,
    pub grid_size: usize,
    pub degree: i32,
    pub n_zeros: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StabilizationTable {
    pub lambda: f64,
    pub radius: f64,
    pub pairing: Pairing,
    pub rows: Vec<StabilizationRow>,
    /// Smallest level from which the degree is constant over the range.
    pub stable_from: Option<usize>,
}

impl StabilizationTable {
    pub fn is_constant(&self) -> bool {
        self.rows.windows(2).all(|w| w[0].degree == w[1].degree)
    }
}

/// Degree at each level in `levels`, grid `max(256, 8N)`.
pub fn degree_stabilization(
    ctx: &OperatorContext,
    radius: f64,
    cfg: &MultistartConfig,
    levels: impl IntoIterator<Item = usize>,
    pairing: Pairing,
) -> Result<StabilizationTable> {
    let mut rows = Vec::new();
    for level in levels {
        let c = ctx.with_level(level, default_grid_size(level))?;
        let r = brouwer_degree_with(&c, radius, cfg, pairing)?;
        rows.push(StabilizationRow {
            level,
            grid_size: r.grid_size,
            degree: r.degree,
            n_zeros: r.zeros.len(),
            certified: r.certified,
        });
    }
    let stable_from = rows.last().map(|last| {
        let d = last.degree;
        rows.iter()
            .rev()
            .take_while(|r| r.degree == d)
            .last()
            .map(|r| r.level)
            .unwrap_or(last.level)
    });
    Ok(StabilizationTable {
        lambda: ctx.lambda(),
        radius,
        pairing,
        rows,
        stable_from,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SubDomain {
    pub center: Vec<f64>,
    pub radius: f64,
    pub degree: i32,
    pub n_zeros: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub total_degree: i32,
    pub parts: Vec<SubDomain>,
    /// Signed count of zeros found by an independent search outside every part.
    pub remainder_degree: i32,
    pub consistent: bool,
}

/// Splits `Ω` into disjoint coefficient balls around the zeros plus the
/// remainder, and checks additivity of the degree.
pub fn domain_decomposition_check(
    ctx: &OperatorContext,
    radius: f64,
    cfg: &MultistartConfig,
) -> Result<DecompositionReport> {
    let total = brouwer_degree(ctx, radius, cfg)?;
    let n = ctx.n_trunc();
    let centers: Vec<Vec<f64>> = total.zeros.iter().map(|z| z.u.coeffs().to_vec()).collect();
    // disjoint and strictly inside Ω
    let mut r = if centers.len() > 1 {
        total.min_separation / 3.0
    } else {
        f64::INFINITY
    };
    for z in &total.zeros {
        // ‖u‖_∞ ≤ √(N/π)‖c‖₂ keeps each ball inside Ω
        let depth = radius - z.sup_norm;
        r = r.min(0.5 * depth / (n as f64 / PI).sqrt());
    }
    let r = r.min(1.0);
    let local_cfg = cfg.clone().with_starts(cfg.starts_for(n).div_ceil(4).max(16));
    let mut parts = Vec::new();
    for c in &centers {
        let rep = degree_in(
            ctx,
            &Domain::CoeffBall {
                center: c.clone(),
                radius: r,
            },
            &local_cfg,
            Pairing::X,
        )?;
        parts.push(SubDomain {
            center: c.clone(),
            radius: r,
            degree: rep.degree,
            n_zeros: rep.zeros.len(),
            certified: rep.certified,
        });
    }
    let fresh = find_zeros_in(
        ctx,
        &Domain::SupBall { radius },
        &cfg.clone().with_seed(cfg.seed.wrapping_add(1)),
        Pairing::X,
    )?;
    let remainder_degree = fresh
        .zeros
        .iter()
        .filter(|z| centers.iter().all(|c| dist(c, z.u.coeffs()) >= r))
        .map(|z| z.jacobian_sign)
        .sum();
    let parts_sum: i32 = parts.iter().map(|p| p.degree).sum();
    Ok(DecompositionReport {
        total_degree: total.degree,
        consistent: parts_sum + remainder_degree == total.degree
            && remainder_degree == 0
            && parts.iter().all(|p| p.certified),
        parts,
        remainder_degree,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyStep {
    pub t: f64,
    pub degree: i32,
    pub n_zeros: usize,
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HomotopyReport {
    pub lambda: f64,
    pub radius: f64,
    pub steps: Vec<HomotopyStep>,
    pub constant: bool,
}

/// Degree of `Id − tλΓ` on a fixed `Ω` at the given `t` values.
pub fn convex_homotopy_at(
    ctx: &OperatorContext,
    radius: f64,
    cfg: &MultistartConfig,
    ts: &[f64],
) -> Result<HomotopyReport> {
    let mut steps = Vec::new();
    for &t in ts {
        let inadmissible = |e: Error| Error::HomotopyInadmissible { t, source: Box::new(e) };
        let c = ctx.with_lambda(t * ctx.lambda())?;
        let r = brouwer_degree(&c, radius, cfg).map_err(|e| match e {
            Error::NearBifurcation { .. } | Error::BoundaryZero { .. } | Error::NonRegularZero { .. } => {
                inadmissible(e)
            }
            other => other,
        })?;
        steps.push(HomotopyStep {
            t,
            degree: r.degree,
            n_zeros: r.zeros.len(),
            certified: r.certified,
        });
    }
    let constant = steps.windows(2).all(|w| w[0].degree == w[1].degree);
    Ok(HomotopyReport {
        lambda: ctx.lambda(),
        radius,
        steps,
        constant,
    })
}

/// `n_steps` uniform values of `t` on `[0, 1]`.
pub fn convex_homotopy_check(
    ctx: &OperatorContext,
    radius: f64,
    cfg: &MultistartConfig,
    n_steps: usize,
) -> Result<HomotopyReport> {
    if n_steps < 2 {
        return Err(Error::InvalidParameter("homotopy needs at least two steps".into()));
    }
    let ts: Vec<f64> = (0..n_steps).map(|i| i as f64 / (n_steps - 1) as f64).collect();
    convex_homotopy_at(ctx, radius, cfg, &ts)
}
