//! Even, π-periodic, zero-mean functions on `[0, 2π)` in the orthonormal
//! cosine basis `φₙ(θ) = cos(2nθ)/√π`, `n ≥ 1`.
//!
//! Only the `cos(2nθ)` modes are stored, so zero mean, evenness and
//! π-periodicity hold by construction. Grid values live on the uniform
//! periodic nodes `θ_j = 2πj/M`; all integrals use the periodic trapezoid
//! rule on those nodes.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `1/√π`, the basis normalisation.
pub const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// Default grid size for `n_modes` retained modes: `max(256, 8N)`.
pub fn default_grid_size(n_modes: usize) -> usize {
    256.max(8 * n_modes)
}

/// Uniform periodic nodes `θ_j = 2πj/M`.
pub fn grid_nodes(grid_size: usize) -> Vec<f64> {
    (0..grid_size)
        .map(|j| 2.0 * PI * j as f64 / grid_size as f64)
        .collect()
}

/// Periodic trapezoid rule `(2π/M) Σ f(θ_j)` over `[0, 2π)`.
pub fn trapezoid(values: &[f64]) -> f64 {
    2.0 * PI * values.iter().sum::<f64>() / values.len() as f64
}

/// Table of `cos(2πk/M)` used to evaluate `cos(2nθ_j)` through the exact
/// integer reduction `2nj mod M`.
#[derive(Debug, Clone)]
pub struct CosineTable {
    grid_size: usize,
    base: Vec<f64>,
}

impl CosineTable {
    pub fn new(grid_size: usize) -> Self {
        let base = (0..grid_size)
            .map(|k| (2.0 * PI * k as f64 / grid_size as f64).cos())
            .collect();
        Self { grid_size, base }
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    /// `cos(2nθ_j)` on the grid.
    #[inline]
    pub fn cos_mode(&self, n: usize, j: usize) -> f64 {
        self.base[(2 * n * j) % self.grid_size]
    }

    /// Grid values of `Σₙ uₙ φₙ`.
    pub fn synthesize(&self, coeffs: &[f64]) -> Vec<f64> {
        let m = self.grid_size;
        let mut out = vec![0.0; m];
        for (j, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (idx, &c) in coeffs.iter().enumerate() {
                acc += c * self.cos_mode(idx + 1, j);
            }
            *slot = acc * INV_SQRT_PI;
        }
        out
    }

    /// Trapezoid projection of grid values onto `φ₁..φ_N`.
    pub fn analyze(&self, values: &[f64], n_modes: usize) -> Vec<f64> {
        let m = self.grid_size;
        let h = 2.0 * PI / m as f64;
        (1..=n_modes)
            .map(|n| {
                let s: f64 = values
                    .iter()
                    .enumerate()
                    .map(|(j, &f)| f * self.cos_mode(n, j))
                    .sum();
                h * s * INV_SQRT_PI
            })
            .collect()
    }
}

/// An element of the space of even, π-periodic, zero-mean functions,
/// stored as coefficients `u₁..u_N` against `φₙ`, together with the grid
/// size used for its sampled view.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "SpectralFnRepr", try_from = "SpectralFnRepr")]
pub struct SpectralFn {
    coeffs: Vec<f64>,
    grid_size: usize,
}

#[derive(Serialize, Deserialize)]
struct SpectralFnRepr {
    n_modes: usize,
    coeffs: Vec<f64>,
    grid_size: usize,
}

impl From<SpectralFn> for SpectralFnRepr {
    fn from(u: SpectralFn) -> Self {
        Self {
            n_modes: u.coeffs.len(),
            coeffs: u.coeffs,
            grid_size: u.grid_size,
        }
    }
}

impl TryFrom<SpectralFnRepr> for SpectralFn {
    type Error = Error;

    fn try_from(r: SpectralFnRepr) -> Result<Self> {
        if r.n_modes != r.coeffs.len() {
            return Err(Error::DimensionMismatch {
                expected: r.n_modes,
                got: r.coeffs.len(),
            });
        }
        SpectralFn::new(r.coeffs, r.grid_size)
    }
}

impl SpectralFn {
    pub fn new(coeffs: Vec<f64>, grid_size: usize) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidParameter("a spectral function needs at least one mode".into()));
        }
        if grid_size < 2 {
            return Err(Error::InvalidParameter(format!("grid size {grid_size} < 2")));
        }
        if let Some(bad) = coeffs.iter().find(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!("non-finite coefficient {bad}")));
        }
        Ok(Self { coeffs, grid_size })
    }

    pub fn zeros(n_modes: usize, grid_size: usize) -> Result<Self> {
        Self::new(vec![0.0; n_modes], grid_size)
    }

    /// `amplitude · φ_mode` (mode is 1-based).
    pub fn basis(n_modes: usize, grid_size: usize, mode: usize, amplitude: f64) -> Result<Self> {
        if mode == 0 || mode > n_modes {
            return Err(Error::InvalidParameter(format!(
                "mode {mode} outside 1..={n_modes}"
            )));
        }
        let mut c = vec![0.0; n_modes];
        c[mode - 1] = amplitude;
        Self::new(c, grid_size)
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    /// Coefficient of `φ_mode` (1-based); zero beyond the stored modes.
    pub fn coeff(&self, mode: usize) -> f64 {
        mode.checked_sub(1)
            .and_then(|i| self.coeffs.get(i))
            .copied()
            .unwrap_or(0.0)
    }

    pub fn with_grid_size(mut self, grid_size: usize) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::InvalidParameter(format!("grid size {grid_size} < 2")));
        }
        self.grid_size = grid_size;
        Ok(self)
    }

    /// Point evaluation of the series.
    pub fn eval(&self, theta: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * (2.0 * (i + 1) as f64 * theta).cos())
            .sum::<f64>()
            * INV_SQRT_PI
    }

    pub fn eval_derivative(&self, theta: f64) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = 2.0 * (i + 1) as f64;
                -c * k * (k * theta).sin()
            })
            .sum::<f64>()
            * INV_SQRT_PI
    }

    /// `‖u‖_{L²}`; exact by orthonormality.
    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// `‖u′‖_{L²} = (Σ 4n² uₙ²)^{1/2}`; exact since `φₙ′` are orthogonal.
    pub fn derivative_l2_norm(&self) -> f64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let k = 2.0 * (i + 1) as f64;
                k * k * c * c
            })
            .sum::<f64>()
            .sqrt()
    }

    /// `‖u‖_∞` from a dense scan followed by golden-section refinement
    /// around the largest sample. Only `[0, π/2]` is scanned: evenness
    /// and π-periodicity cover the rest.
    pub fn sup_norm(&self) -> f64 {
        let samples = (64 * self.n_modes()).max(512);
        let h = 0.5 * PI / samples as f64;
        let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
        for i in 0..=samples {
            let v = self.eval(i as f64 * h).abs();
            if v > best {
                best = v;
                best_i = i;
            }
        }
        let centre = best_i as f64 * h;
        let refined = golden_max(|t| self.eval(t).abs(), centre - h, centre + h, 1e-13);
        best.max(refined)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
            grid_size: self.grid_size,
        }
    }
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    fc.max(fd)
}

/// Grid values of `u` at its own grid size.
pub fn synthesize(u: &SpectralFn) -> Vec<f64> {
    CosineTable::new(u.grid_size).synthesize(&u.coeffs)
}

/// Periodic-trapezoid projection of `values` onto `φ₁..φ_N`.
/// Requires `M ≥ 4N`; the constant mode is discarded.
pub fn analyze(values: &[f64], n_modes: usize) -> Result<SpectralFn> {
    let m = values.len();
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be positive".into()));
    }
    if m < 4 * n_modes {
        return Err(Error::GridTooCoarse {
            grid_size: m,
            n_modes,
        });
    }
    let coeffs = CosineTable::new(m).analyze(values, n_modes);
    SpectralFn::new(coeffs, m)
}

fn check_dims(u: &SpectralFn, v: &SpectralFn) -> Result<()> {
    if u.n_modes() != v.n_modes() {
        return Err(Error::DimensionMismatch {
            expected: u.n_modes(),
            got: v.n_modes(),
        });
    }
    Ok(())
}

/// `⟨u, v⟩_X = Σ uₙvₙ` (the L² pairing).
pub fn inner_x(u: &SpectralFn, v: &SpectralFn) -> Result<f64> {
    check_dims(u, v)?;
    Ok(u.coeffs.iter().zip(&v.coeffs).map(|(a, b)| a * b).sum())
}

/// `⟨u, v⟩_Y = Σ (1+4n²) uₙvₙ` (the H¹ pairing).
pub fn inner_y(u: &SpectralFn, v: &SpectralFn) -> Result<f64> {
    check_dims(u, v)?;
    Ok(u.coeffs
        .iter()
        .zip(&v.coeffs)
        .enumerate()
        .map(|(i, (a, b))| y_weight(i + 1) * a * b)
        .sum())
}

/// Mode weight `1 + 4n²` relating the Y and X pairings.
#[inline]
pub fn y_weight(n: usize) -> f64 {
    let n = n as f64;
    1.0 + 4.0 * n * n
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_coeffs_synthesize_to_zero() {
        let u = SpectralFn::zeros(4, 16).unwrap();
        assert!(synthesize(&u).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_mode_synthesizes_to_cos_2theta() {
        let u = SpectralFn::basis(3, 8, 1, PI.sqrt()).unwrap();
        for (v, t) in synthesize(&u).iter().zip(grid_nodes(8)) {
            assert!((v - (2.0 * t).cos()).abs() < 1e-15);
        }
    }

    #[test]
    fn constant_grid_projects_to_zero() {
        let u = analyze(&[3.5; 64], 8).unwrap();
        assert!(u.coeffs().iter().all(|c| c.abs() < 1e-13));
    }

    #[test]
    fn cos4_projects_to_second_mode() {
        let vals: Vec<f64> = grid_nodes(64).iter().map(|t| (4.0 * t).cos()).collect();
        let u = analyze(&vals, 8).unwrap();
        for (i, c) in u.coeffs().iter().enumerate() {
            let want = if i == 1 { PI.sqrt() } else { 0.0 };
            assert!((c - want).abs() < 1e-13, "mode {} = {c}", i + 1);
        }
    }

    #[test]
    fn analyze_rejects_aliasing_grid() {
        assert!(matches!(
            analyze(&[0.0; 31], 8),
            Err(Error::GridTooCoarse { grid_size: 31, n_modes: 8 })
        ));
    }

    #[test]
    fn abs_sin_matches_dense_fourier_integral() {
        // Oracle: composite Simpson on [0, π] (|sin| is smooth there),
        // doubled for the second half period.
        let m = 256;
        let vals: Vec<f64> = grid_nodes(m).iter().map(|t| t.sin().abs()).collect();
        let u = analyze(&vals, 8).unwrap();
        for n in 1..=8 {
            // Same M = 256 rule evaluated naively with libm cosines.
            let direct: f64 = grid_nodes(m)
                .iter()
                .map(|t| t.sin().abs() * (2.0 * n as f64 * t).cos())
                .sum::<f64>()
                * (2.0 * PI / m as f64)
                / PI.sqrt();
            assert!((u.coeff(n) - direct).abs() < 1e-10, "mode {n}");
            let panels = 20_000;
            let h = PI / panels as f64;
            let f = |t: f64| t.sin() * (2.0 * n as f64 * t).cos() * INV_SQRT_PI;
            let mut s = f(0.0) + f(PI);
            for i in 1..panels {
                s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
            }
            let oracle = 2.0 * s * h / 3.0;
            // The kink at θ = 0, π sits on grid nodes, so the trapezoid
            // error is O(h²) (about 1.1e-4 here) rather than spectral.
            assert!((u.coeff(n) - oracle).abs() < 2e-4, "mode {n}");
        }
    }

    #[test]
    fn inner_products_of_first_basis_function() {
        let p = SpectralFn::basis(4, 32, 1, 1.0).unwrap();
        assert_eq!(inner_x(&p, &p).unwrap(), 1.0);
        assert_eq!(inner_y(&p, &p).unwrap(), 5.0);
        let q = SpectralFn::basis(4, 32, 3, 2.0).unwrap();
        assert_eq!(inner_x(&p, &q).unwrap(), 0.0);
        assert_eq!(inner_y(&p, &q).unwrap(), 0.0);
    }

    #[test]
    fn inner_product_dimension_mismatch() {
        let p = SpectralFn::zeros(4, 32).unwrap();
        let q = SpectralFn::zeros(5, 32).unwrap();
        assert!(matches!(inner_x(&p, &q), Err(Error::DimensionMismatch { .. })));
        assert!(inner_y(&p, &q).is_err());
    }

    #[test]
    fn inner_y_matches_h1_quadrature() {
        let u = SpectralFn::new(vec![0.7, -0.3, 0.2, 0.05, -0.01], 256).unwrap();
        let vals = synthesize(&u);
        let dvals: Vec<f64> = grid_nodes(256).iter().map(|&t| u.eval_derivative(t)).collect();
        let q: Vec<f64> = vals.iter().zip(&dvals).map(|(a, b)| a * a + b * b).collect();
        assert!((trapezoid(&q) - inner_y(&u, &u).unwrap()).abs() < 1e-8);
    }

    #[test]
    fn weight_ratio_is_one_plus_four_n_squared() {
        for n in 1..=10 {
            let p = SpectralFn::basis(10, 64, n, 1.3).unwrap();
            let r = inner_y(&p, &p).unwrap() / inner_x(&p, &p).unwrap();
            assert!((r - (1.0 + 4.0 * (n * n) as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn sup_norm_of_single_mode() {
        let u = SpectralFn::basis(2, 64, 2, 1.0).unwrap();
        assert!((u.sup_norm() - INV_SQRT_PI).abs() < 1e-12);
    }

    #[test]
    fn json_shape() {
        let u = SpectralFn::new(vec![1.0, 2.0], 16).unwrap();
        let s = serde_json::to_string(&u).unwrap();
        assert_eq!(s, r#"{"n_modes":2,"coeffs":[1.0,2.0],"grid_size":16}"#);
        let back: SpectralFn = serde_json::from_str(&s).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<SpectralFn>(r#"{"n_modes":3,"coeffs":[1.0],"grid_size":16}"#).is_err());
    }
}
