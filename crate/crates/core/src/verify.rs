//! End-to-end invariant suite: every check is deterministic for a fixed
//! configuration and seed, so the serialized report is reproducible.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bifurcation::{
    bifurcation_points, continue_branch, pitchfork_fit, quarter_rotation, sample_residual, trivial_stability,
    ContinuationConfig,
};
use crate::degree::{
    brouwer_degree, brouwer_degree_with, convex_homotopy_check, default_radius, degree_stabilization,
    MultistartConfig,
};
use crate::error::Result;
use crate::kernel::KernelSpec;
use crate::operator::{
    apriori_check, gamma, gamma_coeffs, gamma_quadrature, gruss_check, jacobian, regularity_check, OperatorContext,
    Pairing,
};
use crate::spectral::{default_grid_size, SpectralFn};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyConfig {
    /// `λ` of the headline degree check.
    pub lambda: f64,
    pub level: usize,
    pub grid_size: usize,
    pub radius_margin: f64,
    pub multistart: MultistartConfig,
    /// Random samples for the Grüss and finite-difference checks.
    pub random_samples: usize,
    pub max_stabilization_level: usize,
    pub max_pairing_level: usize,
    pub homotopy_steps: usize,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        Self {
            lambda: 6.0,
            level: 8,
            grid_size: default_grid_size(8),
            radius_margin: crate::degree::DEFAULT_RADIUS_MARGIN,
            multistart: MultistartConfig::default(),
            random_samples: 100,
            max_stabilization_level: 16,
            max_pairing_level: 12,
            homotopy_steps: 11,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Worst observed value of the checked quantity.
    pub value: f64,
    /// Threshold the value is compared against.
    pub threshold: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub checks: Vec<CheckResult>,
    pub all_passed: bool,
}

fn check(name: &str, passed: bool, value: f64, threshold: f64, detail: impl Into<String>) -> CheckResult {
    CheckResult {
        name: name.to_string(),
        passed,
        value,
        threshold,
        detail: detail.into(),
    }
}

/// Random coefficients with decaying scale, rescaled to `‖u‖_∞ = sup`.
pub fn random_in_ball(rng: &mut ChaCha8Rng, n: usize, grid: usize, sup: f64) -> SpectralFn {
    let c: Vec<f64> = (0..n)
        .map(|i| rng.random_range(-1.0..1.0) / (1 + i) as f64)
        .collect();
    let u = SpectralFn::new(c, grid).expect("finite");
    let s = u.sup_norm();
    u.scaled(sup * rng.random::<f64>() / s)
}

/// `max |a(u)[n][m]|/|kₘ|` over seeded random `u` in the a-priori ball.
pub fn gruss_sweep(ctx: &OperatorContext, samples: usize, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..samples {
        let u = random_in_ball(&mut rng, ctx.n_trunc(), ctx.grid_size(), ctx.apriori_radius());
        worst = worst.max(gruss_check(&u, ctx)?.max_ratio);
    }
    Ok(worst)
}

/// Worst relative error between a column of `a(u)` contracted with a
/// random direction and the central difference of `Γ` with step `h`.
pub fn jacobian_fd_sweep(ctx: &OperatorContext, pairs: usize, h: f64, seed: u64) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = ctx.n_trunc();
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let u = random_in_ball(&mut rng, n, ctx.grid_size(), ctx.apriori_radius().max(1.0));
        let mut dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dn = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
        dir.iter_mut().for_each(|d| *d /= dn);
        let a = jacobian(&u, ctx)?;
        // DΓ[u](v) in coefficients: Σₙ vₙ a[n][m]
        let exact: Vec<f64> = (0..n).map(|m| (0..n).map(|k| dir[k] * a[(k, m)]).sum()).collect();
        let plus: Vec<f64> = u.coeffs().iter().zip(&dir).map(|(c, d)| c + h * d).collect();
        let minus: Vec<f64> = u.coeffs().iter().zip(&dir).map(|(c, d)| c - h * d).collect();
        let gp = gamma_coeffs(&plus, ctx)?;
        let gm = gamma_coeffs(&minus, ctx)?;
        let err: f64 = gp
            .iter()
            .zip(&gm)
            .zip(&exact)
            .map(|((p, m), e)| ((p - m) / (2.0 * h) - e).powi(2))
            .sum::<f64>()
            .sqrt();
        let scale = exact.iter().map(|e| e * e).sum::<f64>().sqrt();
        worst = worst.max(err / scale);
    }
    Ok(worst)
}

/// Runs the full suite. Refusals (guards, invalid kernels) propagate as
/// errors; failed checks are reported, not raised.
pub fn run_suite(kernel: &KernelSpec, cfg: &VerifyConfig) -> Result<VerifyReport> {
    cfg.multistart.validate()?;
    let base = OperatorContext::new(kernel.clone(), cfg.lambda, cfg.level, cfg.grid_size)?;
    let seed = cfg.multistart.seed;
    let mut checks = Vec::new();

    // headline degree at the configured λ
    let radius = base.apriori_radius() + cfg.radius_margin;
    let rep = brouwer_degree(&base, radius, &cfg.multistart)?;
    checks.push(check(
        "degree_at_lambda",
        rep.certified && rep.degree == 1 && !rep.zeros.is_empty(),
        rep.degree as f64,
        1.0,
        format!("lambda = {}, zeros = {}, signs = {:?}, certified = {}", cfg.lambda, rep.zeros.len(), rep.signs(), rep.certified),
    ));

    // bounds on every zero found
    let mut worst_apriori = f64::NEG_INFINITY;
    let mut worst_regularity = f64::NEG_INFINITY;
    for z in &rep.zeros {
        let a = apriori_check(&z.u, &base);
        let r = regularity_check(&z.u, &base);
        worst_apriori = worst_apriori.max(a.value - a.bound);
        worst_regularity = worst_regularity.max(r.value - r.bound);
    }
    checks.push(check("apriori_bound", worst_apriori <= 1e-6, worst_apriori, 1e-6, "max of sup|u| - lambda*|K|_inf over zeros"));
    checks.push(check(
        "regularity_bound",
        worst_regularity <= 1e-6,
        worst_regularity,
        1e-6,
        "max of |u'|_L2 - 2*pi*lambda*|K'|_inf over zeros",
    ));

    // linearization at zero
    let wide = base.with_level(cfg.level.max(12).min(kernel.n_modes()), 512)?;
    let a0 = jacobian(&SpectralFn::zeros(wide.n_trunc(), 512)?, &wide)?;
    let mut diag_err = 0.0f64;
    for i in 0..wide.n_trunc() {
        for j in 0..wide.n_trunc() {
            let want = if i == j { -kernel.k(i + 1) / 2.0 } else { 0.0 };
            diag_err = diag_err.max((a0[(i, j)] - want).abs());
        }
    }
    checks.push(check("linearization_diagonal", diag_err < 1e-10, diag_err, 1e-10, "max |a(0) - diag(-k_n/2)|"));

    // Grüss bound
    let gruss_ctx = base.with_lambda(1.4)?;
    let worst = gruss_sweep(&gruss_ctx, cfg.random_samples, seed)?;
    checks.push(check("gruss_bound", worst <= 1.0 + 1e-8, worst, 1.0 + 1e-8, "max |a_nm|/|k_m| at lambda = 1.4"));

    // Jacobian against finite differences
    let fd = jacobian_fd_sweep(&base, 20, 1e-5, seed ^ 0xfd)?;
    checks.push(check("jacobian_vs_fd", fd < 1e-6, fd, 1e-6, "relative error, h = 1e-5, 20 pairs"));

    // two routes to Γ
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9a);
    let mut route_err = 0.0f64;
    for _ in 0..5 {
        let u = random_in_ball(&mut rng, base.n_trunc(), base.grid_size(), base.apriori_radius());
        let g1 = gamma(&u, &base)?;
        let g2 = gamma_quadrature(&u, &base)?;
        for (x, y) in g1.coeffs().iter().zip(g2.coeffs()) {
            route_err = route_err.max((x - y).abs());
        }
    }
    checks.push(check("gamma_two_routes", route_err < 1e-9, route_err, 1e-9, "mode formula vs double quadrature"));

    // bifurcation values and trivial stability
    let pts = bifurcation_points(kernel, 30.0)?;
    let l1 = kernel.lambda_n(1);
    let closed = pts.first().map_or(f64::INFINITY, |p| (p - l1).abs());
    checks.push(check("bifurcation_points", !pts.is_empty() && closed < 1e-9, closed, 1e-9, format!("{pts:?}")));
    let below = trivial_stability(kernel, 0.9 * l1)?;
    let above = trivial_stability(kernel, 1.1 * l1)?;
    checks.push(check(
        "trivial_stability_flip",
        below.stable && !above.stable && above.negative_count == 1,
        above.smallest_eigenvalue(),
        0.0,
        "stable below lambda_1, one negative eigenvalue above",
    ));

    // degree stabilization in N
    let c6 = base.with_lambda(6.0)?;
    let r6 = default_radius(&c6);
    let table = degree_stabilization(&c6, r6, &cfg.multistart, 2..=cfg.max_stabilization_level, Pairing::X)?;
    let all_one = table.rows.iter().all(|r| r.degree == 1 && r.certified);
    checks.push(check(
        "degree_stabilization",
        table.is_constant() && all_one,
        table.rows.iter().filter(|r| r.degree != 1).count() as f64,
        0.0,
        format!(
            "lambda = 6, N = 2..={}, degrees {:?}",
            cfg.max_stabilization_level,
            table.rows.iter().map(|r| r.degree).collect::<Vec<_>>()
        ),
    ));

    // X and Y pairings give the same degree
    let mut mismatches = 0usize;
    for lambda in [1.0, 6.0] {
        let c = base.with_lambda(lambda)?;
        let r = default_radius(&c);
        for level in 2..=cfg.max_pairing_level {
            let cl = c.with_level(level, default_grid_size(level))?;
            let dx = brouwer_degree_with(&cl, r, &cfg.multistart, Pairing::X)?;
            let dy = brouwer_degree_with(&cl, r, &cfg.multistart, Pairing::Y)?;
            if dx.degree != dy.degree || dx.zeros.len() != dy.zeros.len() {
                mismatches += 1;
            }
        }
    }
    checks.push(check(
        "pairing_equivalence",
        mismatches == 0,
        mismatches as f64,
        0.0,
        format!("lambda in {{1, 6}}, N = 2..={}", cfg.max_pairing_level),
    ));

    // convex homotopy Id - t*lambda*Γ
    let h = convex_homotopy_check(&c6, r6, &cfg.multistart, cfg.homotopy_steps)?;
    checks.push(check(
        "homotopy_constancy",
        h.constant && h.steps.iter().all(|s| s.degree == 1),
        h.steps.iter().filter(|s| s.degree != 1).count() as f64,
        0.0,
        format!("lambda = 6, {} steps", cfg.homotopy_steps),
    ));

    // pitchfork branch: scaling, symmetry, bounds
    let ccfg = ContinuationConfig::default();
    let branch = continue_branch(&base, 1, 1, l1 + 3.0, &ccfg)?;
    let fit = pitchfork_fit(&branch, 10);
    checks.push(check("pitchfork_scaling", fit.r_squared > 0.99, fit.r_squared, 0.99, "R^2 of amplitude^2 vs lambda - lambda_1"));
    let mut worst_rot = 0.0f64;
    let mut bound_excess = f64::NEG_INFINITY;
    for s in &branch.samples {
        worst_rot = worst_rot.max(sample_residual(&base, s.lambda, &quarter_rotation(&s.u))?);
        let cs = base.with_lambda(s.lambda)?;
        let a = apriori_check(&s.u, &cs);
        let r = regularity_check(&s.u, &cs);
        bound_excess = bound_excess.max(a.value - a.bound).max(r.value - r.bound);
    }
    checks.push(check(
        "branch_rotation_symmetry",
        worst_rot < 10.0 * ccfg.tol,
        worst_rot,
        10.0 * ccfg.tol,
        "residual of quarter-rotated + branch",
    ));
    checks.push(check("branch_bounds", bound_excess <= 1e-6, bound_excess, 1e-6, "a-priori and regularity bounds on branch samples"));

    let all_passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport { checks, all_passed })
}
