//! Damped Newton with optional deflation of known roots.
//!
//! Deflation multiplies the residual by
//! `M(x) = Π_i (‖x − r_i‖^{−2} + 1)`; the Newton step of `M·F` is the
//! undeflated step `d` rescaled by `1/(1 − ∇ln M · d)`.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

#[derive(Debug, Clone, Copy)]
pub(crate) struct NewtonSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub max_step: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct Converged {
    pub x: Vec<f64>,
    pub residual: f64,
}

const SHIFT: f64 = 1.0;
const MAX_HALVINGS: usize = 40;

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, x| a.max(x.abs()))
}

fn two_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn deflation_factor(x: &[f64], roots: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let mut m = 1.0;
    let mut grad_log = vec![0.0; x.len()];
    for r in roots {
        let d2: f64 = x.iter().zip(r).map(|(a, b)| (a - b).powi(2)).sum();
        let mi = 1.0 / d2 + SHIFT;
        m *= mi;
        // ∇m_i / m_i with ∇m_i = −2(x − r)/d⁴
        let scale = -2.0 / (d2 * d2 * mi);
        for ((g, a), b) in grad_log.iter_mut().zip(x).zip(r) {
            *g += scale * (a - b);
        }
    }
    (m, grad_log)
}

/// Solves `F(x) = 0` from `x0`. `eval` returns `(F, ∂F/∂x)`; an `Err`
/// (e.g. the exponent guard) is treated as a rejected trial point.
/// Returns `None` when the iteration fails to reach `tol` in `‖F‖_∞`.
pub(crate) fn solve<E>(x0: &[f64], eval: E, settings: NewtonSettings, deflate: &[Vec<f64>]) -> Option<Converged>
where
    E: Fn(&[f64]) -> Result<(Vec<f64>, DMatrix<f64>)>,
{
    let mut x = x0.to_vec();
    let (mut f, mut jac) = eval(&x).ok()?;
    let merit = |x: &[f64], f: &[f64]| deflation_factor(x, deflate).0 * two_norm(f);
    let mut phi = merit(&x, &f);
    for _ in 0..settings.max_iter {
        if inf_norm(&f) < settings.tol {
            // one polishing step, kept only if it helps
            if let Some(d) = newton_step(&jac, &f) {
                let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + b).collect();
                if let Ok((ft, _)) = eval(&trial) {
                    if inf_norm(&ft) < inf_norm(&f) {
                        return Some(Converged {
                            residual: inf_norm(&ft),
                            x: trial,
                        });
                    }
                }
            }
            return Some(Converged {
                residual: inf_norm(&f),
                x,
            });
        }
        let mut d = newton_step(&jac, &f)?;
        if !deflate.is_empty() {
            let (_, eta) = deflation_factor(&x, deflate);
            let eta_d: f64 = eta.iter().zip(d.iter()).map(|(a, b)| a * b).sum();
            let denom = 1.0 - eta_d;
            if denom.abs() < 1e-14 {
                return None;
            }
            d /= denom;
        }
        let len = d.norm();
        if len > settings.max_step {
            d *= settings.max_step / len;
        }
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(a, b)| a + alpha * b).collect();
            if let Ok((ft, jt)) = eval(&trial) {
                let pt = merit(&trial, &ft);
                if pt.is_finite() && pt <= (1.0 - 1e-4 * alpha) * phi {
                    x = trial;
                    f = ft;
                    jac = jt;
                    phi = pt;
                    accepted = true;
                    break;
                }
            }
            alpha *= 0.5;
        }
        if !accepted {
            return None;
        }
    }
    (inf_norm(&f) < settings.tol).then(|| Converged {
        residual: inf_norm(&f),
        x,
    })
}

fn newton_step(jac: &DMatrix<f64>, f: &[f64]) -> Option<DVector<f64>> {
    let rhs = -DVector::from_column_slice(f);
    let d = jac.clone().lu().solve(&rhs)?;
    d.iter().all(|v| v.is_finite()).then_some(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cubic(x: &[f64]) -> Result<(Vec<f64>, DMatrix<f64>)> {
        let v = x[0];
        Ok((vec![v * v * v - v], DMatrix::from_element(1, 1, 3.0 * v * v - 1.0)))
    }

    const S: NewtonSettings = NewtonSettings {
        tol: 1e-12,
        max_iter: 100,
        max_step: 10.0,
    };

    #[test]
    fn finds_a_root() {
        let r = solve(&[2.0], cubic, S, &[]).unwrap();
        assert!((r.x[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn deflation_reveals_other_roots() {
        let mut roots: Vec<Vec<f64>> = Vec::new();
        for _ in 0..3 {
            let r = solve(&[2.0], cubic, S, &roots).unwrap();
            assert!(roots.iter().all(|k| (k[0] - r.x[0]).abs() > 1e-6));
            roots.push(r.x);
        }
        let mut found: Vec<f64> = roots.iter().map(|r| r[0]).collect();
        found.sort_by(f64::total_cmp);
        for (a, b) in found.iter().zip([-1.0, 0.0, 1.0]) {
            assert!((a - b).abs() < 1e-10);
        }
        assert!(solve(&[2.0], cubic, S, &roots).is_none());
    }
}
