//! Interaction kernel `K̂(θ) = Σ kₙ cos(2nθ)` with `kₙ < 0` and
//! `k₁ < k₂ < ⋯`, plus the built-in Onsager kernel `|sin θ| − 2/π`.

use std::f64::consts::{FRAC_2_PI, PI};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense-grid size for kernel norm maximisation.
const NORM_GRID: usize = 100_000;
/// Gaps `k_{n+1} − kₙ` below this are reported as near-degenerate.
const DEGENERATE_GAP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Onsager,
    Custom,
}

/// Truncated cosine expansion of the interaction kernel.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelSpec {
    kind: KernelKind,
    coeffs: Vec<f64>,
    sup_norm: f64,
    deriv_sup_norm: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    warnings: Vec<String>,
}

/// On-disk kernel description.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KernelFile {
    pub coeffs: Vec<f64>,
    pub sup_norm: f64,
    pub deriv_sup_norm: f64,
}

impl KernelSpec {
    /// Validates the sign and ordering assumptions and builds the kernel.
    pub fn new(coeffs: Vec<f64>, sup_norm: f64, deriv_sup_norm: f64) -> Result<Self> {
        Self::build(KernelKind::Custom, coeffs, sup_norm, deriv_sup_norm)
    }

    fn build(kind: KernelKind, coeffs: Vec<f64>, sup_norm: f64, deriv_sup_norm: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidKernel("no coefficients".into()));
        }
        for (i, &k) in coeffs.iter().enumerate() {
            if !(k.is_finite() && k < 0.0) {
                return Err(Error::InvalidKernel(format!("k_{} = {k} is not negative", i + 1)));
            }
        }
        let mut warnings = Vec::new();
        for (i, w) in coeffs.windows(2).enumerate() {
            if w[0] >= w[1] {
                return Err(Error::InvalidKernel(format!(
                    "k_{} = {} is not below k_{} = {}",
                    i + 1,
                    w[0],
                    i + 2,
                    w[1]
                )));
            }
            if w[1] - w[0] < DEGENERATE_GAP {
                warnings.push(format!(
                    "near-degenerate gap between k_{} and k_{}: {:e}",
                    i + 1,
                    i + 2,
                    w[1] - w[0]
                ));
            }
        }
        if !(sup_norm.is_finite() && sup_norm > 0.0) {
            return Err(Error::InvalidKernel(format!("sup_norm = {sup_norm} must be positive")));
        }
        if !(deriv_sup_norm.is_finite() && deriv_sup_norm >= 0.0) {
            return Err(Error::InvalidKernel(format!(
                "deriv_sup_norm = {deriv_sup_norm} must be finite and non-negative"
            )));
        }
        Ok(Self {
            kind,
            coeffs,
            sup_norm,
            deriv_sup_norm,
            warnings,
        })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let file: KernelFile = serde_json::from_slice(&std::fs::read(path)?)?;
        Self::new(file.coeffs, file.sup_norm, file.deriv_sup_norm)
    }

    pub fn to_file(&self) -> KernelFile {
        KernelFile {
            coeffs: self.coeffs.clone(),
            sup_norm: self.sup_norm,
            deriv_sup_norm: self.deriv_sup_norm,
        }
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n_modes(&self) -> usize {
        self.coeffs.len()
    }

    /// `kₙ` for 1-based `n`.
    pub fn k(&self, n: usize) -> f64 {
        self.coeffs[n - 1]
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// `(‖K̂‖_∞, ‖K̂′‖_∞)` of the kernel itself, not of its truncation.
    pub fn norms(&self) -> (f64, f64) {
        (self.sup_norm, self.deriv_sup_norm)
    }

    pub fn sup_norm(&self) -> f64 {
        self.sup_norm
    }

    pub fn deriv_sup_norm(&self) -> f64 {
        self.deriv_sup_norm
    }

    /// `λ₀ = 1/‖K̂‖_∞`, below which the trivial solution is the only one.
    pub fn lambda_zero(&self) -> f64 {
        1.0 / self.sup_norm
    }

    /// `λₙ = −2/kₙ`.
    pub fn lambda_n(&self, n: usize) -> f64 {
        -2.0 / self.k(n)
    }

    /// Truncated series `Σ kₙ cos(2nθ)` over the stored modes.
    pub fn eval(&self, theta: f64) -> f64 {
        self.eval_truncated(theta, self.coeffs.len())
    }

    pub fn eval_truncated(&self, theta: f64, n_modes: usize) -> f64 {
        self.coeffs
            .iter()
            .take(n_modes)
            .enumerate()
            .map(|(i, k)| k * (2.0 * (i + 1) as f64 * theta).cos())
            .sum()
    }

    /// Keeps only the first `n_modes` coefficients.
    pub fn truncated(&self, n_modes: usize) -> Result<Self> {
        if n_modes == 0 || n_modes > self.coeffs.len() {
            return Err(Error::InvalidParameter(format!(
                "cannot truncate {} modes to {n_modes}",
                self.coeffs.len()
            )));
        }
        let mut out = self.clone();
        out.coeffs.truncate(n_modes);
        Ok(out)
    }
}

/// Functions free of the truncation: `|sin θ| − 2/π` and its derivative.
pub fn onsager_analytic(theta: f64) -> f64 {
    theta.sin().abs() - FRAC_2_PI
}

pub fn onsager_analytic_derivative(theta: f64) -> f64 {
    let s = theta.sin();
    if s == 0.0 {
        // one-sided limit from the right
        theta.cos().signum()
    } else {
        s.signum() * theta.cos()
    }
}

/// Onsager kernel truncated to `n_modes`. Coefficients come from dense
/// quadrature of the Fourier integral; norms from dense maximisation of
/// the analytic kernel.
pub fn onsager_kernel(n_modes: usize) -> Result<KernelSpec> {
    if n_modes == 0 {
        return Err(Error::InvalidParameter("n_modes must be at least 1".into()));
    }
    let coeffs = (1..=n_modes).map(onsager_coefficient).collect();
    let sup = dense_sup(|t| onsager_analytic(t).abs());
    let dsup = dense_sup(|t| onsager_analytic_derivative(t).abs());
    KernelSpec::build(KernelKind::Onsager, coeffs, sup, dsup)
}

/// `kₙ = (1/π)∫₀^{2π}(|sin θ| − 2/π)cos(2nθ)dθ`. The integrand is
/// π-periodic and smooth on `[0, π]`, so composite Simpson on that half
/// period is doubled.
fn onsager_coefficient(n: usize) -> f64 {
    let panels = (400 * n).max(20_000);
    let h = PI / panels as f64;
    let f = |t: f64| (t.sin() - FRAC_2_PI) * (2.0 * n as f64 * t).cos();
    let mut s = f(0.0) + f(PI);
    for i in 1..panels {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(i as f64 * h);
    }
    2.0 * (s * h / 3.0) / PI
}

/// Maximum of `f` over `[0, 2π]`: uniform scan then golden-section
/// refinement on the bracketing cell of the best sample.
fn dense_sup(f: impl Fn(f64) -> f64) -> f64 {
    let h = 2.0 * PI / NORM_GRID as f64;
    let (mut best_i, mut best) = (0usize, f64::NEG_INFINITY);
    for i in 0..=NORM_GRID {
        let v = f(i as f64 * h);
        if v > best {
            best = v;
            best_i = i;
        }
    }
    let c = best_i as f64 * h;
    let lo = (c - h).max(0.0);
    let hi = (c + h).min(2.0 * PI);
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    for _ in 0..80 {
        let x1 = b - inv_phi * (b - a);
        let x2 = a + inv_phi * (b - a);
        let (f1, f2) = (f(x1), f(x2));
        best = best.max(f1).max(f2);
        if f1 > f2 {
            b = x2;
        } else {
            a = x1;
        }
    }
    best
}

/// Command-line kernel selector: `onsager:<n_modes>` or `file:<path>`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum KernelSelector {
    Onsager(usize),
    File(PathBuf),
}

impl KernelSelector {
    pub fn load(&self) -> Result<KernelSpec> {
        match self {
            KernelSelector::Onsager(n) => onsager_kernel(*n),
            KernelSelector::File(p) => KernelSpec::from_file(p),
        }
    }
}

impl Default for KernelSelector {
    fn default() -> Self {
        KernelSelector::Onsager(32)
    }
}

impl fmt::Display for KernelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KernelSelector::Onsager(n) => write!(f, "onsager:{n}"),
            KernelSelector::File(p) => write!(f, "file:{}", p.display()),
        }
    }
}

impl FromStr for KernelSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            Some(("onsager", n)) => n
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .map(KernelSelector::Onsager)
                .ok_or_else(|| Error::InvalidParameter(format!("bad mode count in kernel selector {s:?}"))),
            Some(("file", p)) if !p.is_empty() => Ok(KernelSelector::File(PathBuf::from(p))),
            _ => Err(Error::InvalidParameter(format!(
                "kernel selector {s:?} is neither onsager:<n> nor file:<path>"
            ))),
        }
    }
}

impl TryFrom<String> for KernelSelector {
    type Error = Error;
    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<KernelSelector> for String {
    fn from(k: KernelSelector) -> Self {
        k.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn closed_form(n: usize) -> f64 {
        let n = n as f64;
        -4.0 / (PI * (4.0 * n * n - 1.0))
    }

    #[test]
    fn first_coefficient() {
        let k = onsager_kernel(1).unwrap();
        assert!((k.k(1) - -0.424_413_2).abs() < 1e-7);
        assert!((k.k(1) - closed_form(1)).abs() < 1e-12);
    }

    #[test]
    fn coefficients_match_closed_form() {
        let k = onsager_kernel(32).unwrap();
        for n in 1..=32 {
            assert!((k.k(n) - closed_form(n)).abs() < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn onsager_satisfies_ordering() {
        let k = onsager_kernel(40).unwrap();
        assert!(k.coeffs().windows(2).all(|w| w[0] < w[1] && w[1] < 0.0));
        assert!(k.warnings().is_empty());
    }

    #[test]
    fn analytic_kernel_has_zero_mean() {
        // Composite Simpson on each smooth half period [0, π], [π, 2π].
        let panels = 20_000;
        let h = PI / panels as f64;
        let mut total = 0.0;
        for half in 0..2 {
            let a = half as f64 * PI;
            let mut s = onsager_analytic(a) + onsager_analytic(a + PI);
            for i in 1..panels {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                s += w * onsager_analytic(a + i as f64 * h);
            }
            total += s * h / 3.0;
        }
        assert!(total.abs() < 1e-12, "{total}");
    }

    #[test]
    fn single_mode_vanishes_at_quarter_period() {
        let k = onsager_kernel(1).unwrap();
        assert!(k.eval(PI / 4.0).abs() < 1e-16);
    }

    #[test]
    fn eval_is_even() {
        let k = onsager_kernel(16).unwrap();
        for t in [0.1, 0.7, 2.3, 5.9] {
            assert_eq!(k.eval(t), k.eval(-t));
        }
    }

    #[test]
    fn truncation_error_at_origin() {
        // Σ_{n≤N} kₙ = −2/π + (2/π)/(2N+1) from the telescoping sum of
        // 1/(4n²−1).
        let k = onsager_kernel(64).unwrap();
        let err = (k.eval(0.0) - onsager_analytic(0.0)).abs();
        assert!((err - FRAC_2_PI / 129.0).abs() < 1e-10);
        assert!(err < 5e-3);
    }

    #[test]
    fn truncation_error_decreases() {
        let full = onsager_kernel(32).unwrap();
        let grid: Vec<f64> = (0..=4000).map(|i| PI * i as f64 / 4000.0).collect();
        let mut prev = f64::INFINITY;
        for n in 1..=32 {
            let err = grid
                .iter()
                .map(|&t| (full.eval_truncated(t, n) - onsager_analytic(t)).abs())
                .fold(0.0, f64::max);
            assert!(err < prev, "n = {n}");
            prev = err;
        }
        assert!(prev < 1e-2);
    }

    #[test]
    fn norms_from_analytic_kernel() {
        let k = onsager_kernel(8).unwrap();
        let (s, d) = k.norms();
        assert!((s - FRAC_2_PI).abs() < 1e-12);
        assert!((d - 1.0).abs() < 1e-9);
        assert!((k.lambda_zero() - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn rejects_positive_or_unordered() {
        assert!(KernelSpec::new(vec![-0.4, 0.1], 1.0, 1.0).is_err());
        assert!(KernelSpec::new(vec![-0.1, -0.4], 1.0, 1.0).is_err());
        assert!(KernelSpec::new(vec![-0.4, -0.1], 0.0, 1.0).is_err());
        assert!(KernelSpec::new(vec![], 1.0, 1.0).is_err());
        assert!(KernelSpec::new(vec![-0.4, -0.1], 1.0, 1.0).is_ok());
    }

    #[test]
    fn near_degenerate_gap_warns() {
        let k = KernelSpec::new(vec![-0.4, -0.4 + 1e-13], 1.0, 1.0).unwrap();
        assert_eq!(k.warnings().len(), 1);
    }

    #[test]
    fn selector_parsing() {
        assert_eq!("onsager:12".parse::<KernelSelector>().unwrap(), KernelSelector::Onsager(12));
        assert_eq!(
            "file:/tmp/k.json".parse::<KernelSelector>().unwrap(),
            KernelSelector::File("/tmp/k.json".into())
        );
        assert!("onsager:0".parse::<KernelSelector>().is_err());
        assert!("gauss:3".parse::<KernelSelector>().is_err());
        assert_eq!(KernelSelector::Onsager(7).to_string(), "onsager:7");
    }

    #[test]
    fn file_roundtrip() {
        let dir = std::env::temp_dir().join(format!("kfile-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let p = dir.join("k.json");
        let k = onsager_kernel(4).unwrap();
        std::fs::write(&p, serde_json::to_vec(&k.to_file()).unwrap()).unwrap();
        let back = KernelSpec::from_file(&p).unwrap();
        assert_eq!(back.coeffs(), k.coeffs());
        assert_eq!(back.kind(), KernelKind::Custom);
        std::fs::write(&p, br#"{"coeffs":[0.2,-0.1],"sup_norm":1,"deriv_sup_norm":1}"#).unwrap();
        assert!(matches!(KernelSpec::from_file(&p), Err(Error::InvalidKernel(_))));
    }
}
