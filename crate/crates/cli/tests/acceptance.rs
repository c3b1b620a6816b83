//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if
//! any criterion fails.

use std::f64::consts::PI;
use std::process::Command;
use std::time::Instant;

use onsager_degree::bifurcation::{linear_fit, pitchfork_fit, quarter_rotation, sample_residual};
use onsager_degree::degree::{brouwer_degree_with, degree_stabilization, default_radius, find_zeros_in, Domain};
use onsager_degree::kernel::onsager_analytic;
use onsager_degree::operator::{apriori_check, jacobian, regularity_check};
use onsager_degree::spectral::default_grid_size;
use onsager_degree::verify::{gruss_sweep, jacobian_fd_sweep};
use onsager_degree::{
    assemble_diagram, bifurcation_points, brouwer_degree, onsager_kernel, trivial_stability, ContinuationConfig,
    KernelSpec, MultistartConfig, OperatorContext, Pairing, SpectralFn,
};

type Outcome = Result<String, String>;

fn ctx(kernel: &KernelSpec, lambda: f64, n: usize) -> OperatorContext {
    OperatorContext::new(kernel.clone(), lambda, n, default_grid_size(n)).unwrap()
}

/// `kₙ` by composite Simpson on 10⁴ intervals of `[0, 2π]`.
fn simpson_coefficient(n: usize) -> f64 {
    let m = 10_000;
    let h = 2.0 * PI / m as f64;
    let f = |t: f64| onsager_analytic(t) * (2.0 * n as f64 * t).cos();
    let mut s = f(0.0) + f(2.0 * PI);
    for i in 1..m {
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
    }
    s * h / 3.0 / PI
}

fn c1() -> Outcome {
    let t = Instant::now();
    let kernel = onsager_kernel(32).map_err(|e| e.to_string())?;
    let pts = bifurcation_points(&kernel, 30.0).map_err(|e| e.to_string())?;
    let elapsed = t.elapsed().as_secs_f64();
    if pts.len() < 2 {
        return Err(format!("found {} bifurcation points below 30", pts.len()));
    }
    let targets = [4.71238898, 23.5619449];
    for (i, want) in targets.iter().enumerate() {
        let n = i + 1;
        let closed = PI * (4.0 * (n * n) as f64 - 1.0) / 2.0;
        let quad = -2.0 / simpson_coefficient(n);
        for (label, v) in [("published", *want), ("closed form", closed), ("quadrature", quad)] {
            if (pts[i] - v).abs() > 1e-6 {
                return Err(format!("lambda_{n} = {:.10} vs {label} {v:.10}", pts[i]));
            }
        }
    }
    if elapsed >= 1.0 {
        return Err(format!("runtime {elapsed:.3} s"));
    }
    Ok(format!("lambda_1 = {:.9}, lambda_2 = {:.8}, {elapsed:.3} s", pts[0], pts[1]))
}

fn c2(kernel: &KernelSpec) -> Outcome {
    let t = Instant::now();
    let cfg = MultistartConfig::default().with_starts(500);
    let mut notes = Vec::new();
    for lambda in [0.5, 1.0, 1.4] {
        let c = ctx(kernel, lambda, 8);
        let r = default_radius(&c);
        let s = find_zeros_in(&c, &Domain::SupBall { radius: r }, &cfg, Pairing::X).map_err(|e| e.to_string())?;
        let trivial = s.zeros.len() == 1 && s.zeros[0].u.coeffs().iter().all(|v| v.abs() < 1e-9);
        if !trivial || s.zeros[0].jacobian_sign != 1 {
            return Err(format!(
                "lambda = {lambda}: {} zeros, signs {:?}",
                s.zeros.len(),
                s.zeros.iter().map(|z| z.jacobian_sign).collect::<Vec<_>>()
            ));
        }
        notes.push(format!("{lambda}: 1 zero"));
    }
    let elapsed = t.elapsed().as_secs_f64();
    if elapsed >= 30.0 {
        return Err(format!("runtime {elapsed:.1} s"));
    }
    Ok(format!("{}, {elapsed:.1} s", notes.join(", ")))
}

fn c3(kernel: &KernelSpec, solutions: &mut Vec<(f64, SpectralFn)>) -> Outcome {
    let cfg = MultistartConfig::default();
    let mut degrees = Vec::new();
    for lambda in [0.5, 1.0, 3.0, 6.0, 10.0] {
        let c = ctx(kernel, lambda, 8);
        let rep = brouwer_degree(&c, default_radius(&c), &cfg).map_err(|e| e.to_string())?;
        solutions.extend(rep.zeros.iter().map(|z| (lambda, z.u.clone())));
        if rep.degree != 1 || !rep.certified {
            return Err(format!("lambda = {lambda}: degree {}, certified {} {:?}", rep.degree, rep.certified, rep.reasons));
        }
        degrees.push(format!("{lambda}:{}({})", rep.degree, rep.zeros.len()));
    }
    Ok(format!("degree(zeros) {}", degrees.join(" ")))
}

fn c4(kernel: &KernelSpec, solutions: &mut Vec<(f64, SpectralFn)>) -> Outcome {
    let cfg = MultistartConfig::default();
    let c6 = ctx(kernel, 6.0, 8);
    let r6 = brouwer_degree(&c6, default_radius(&c6), &cfg).map_err(|e| e.to_string())?;
    let c4 = ctx(kernel, 4.0, 8);
    let r4 = brouwer_degree(&c4, default_radius(&c4), &cfg).map_err(|e| e.to_string())?;
    solutions.extend(r4.zeros.iter().map(|z| (4.0, z.u.clone())));
    let mut s6 = r6.signs();
    s6.sort();
    if s6 != [-1, 1, 1] {
        return Err(format!("lambda = 6 signs {:?}", r6.signs()));
    }
    // the trivial zero carries the -1
    let trivial = r6.zeros.iter().find(|z| z.sup_norm < 1e-9).ok_or("no trivial zero at lambda = 6")?;
    if trivial.jacobian_sign != -1 {
        return Err("trivial zero at lambda = 6 has index +1".into());
    }
    if r4.signs() != [1] {
        return Err(format!("lambda = 4 signs {:?}", r4.signs()));
    }
    let smallest = trivial_stability(kernel, 6.0).map_err(|e| e.to_string())?.smallest_eigenvalue();
    let want = 1.0 - 4.0 / PI;
    if (smallest - want).abs() > 1e-6 {
        return Err(format!("smallest trivial eigenvalue {smallest} vs {want}"));
    }
    Ok(format!("lambda = 6 signs (-1, +1, +1), lambda = 4 signs (+1), mu_min = {smallest:.8}"))
}

fn c5(kernel: &KernelSpec) -> Outcome {
    let c = OperatorContext::new(kernel.clone(), 1.0, 12, 512).map_err(|e| e.to_string())?;
    let a = jacobian(&SpectralFn::zeros(12, 512).unwrap(), &c).map_err(|e| e.to_string())?;
    let mut err = 0.0f64;
    for i in 0..12 {
        for j in 0..12 {
            let want = if i == j { -kernel.k(i + 1) / 2.0 } else { 0.0 };
            err = err.max((a[(i, j)] - want).abs());
        }
    }
    if err < 1e-10 {
        Ok(format!("max deviation {err:.2e}"))
    } else {
        Err(format!("max deviation {err:.2e}"))
    }
}

fn c6(kernel: &KernelSpec) -> Outcome {
    let worst = gruss_sweep(&ctx(kernel, 1.4, 8), 100, 0x5eed).map_err(|e| e.to_string())?;
    if worst <= 1.0 + 1e-8 {
        Ok(format!("max |a_nm|/|k_m| = {worst:.6}"))
    } else {
        Err(format!("max |a_nm|/|k_m| = {worst:.12}"))
    }
}

fn c7(kernel: &KernelSpec) -> Outcome {
    let worst = jacobian_fd_sweep(&ctx(kernel, 6.0, 8), 20, 1e-5, 0x5eed).map_err(|e| e.to_string())?;
    if worst < 1e-6 {
        Ok(format!("max relative error {worst:.2e}"))
    } else {
        Err(format!("max relative error {worst:.2e}"))
    }
}

fn c8(kernel: &KernelSpec) -> Outcome {
    let cfg = MultistartConfig::default();
    let c = ctx(kernel, 6.0, 8);
    let r = default_radius(&c);
    let table = degree_stabilization(&c, r, &cfg, 2..=16, Pairing::X).map_err(|e| e.to_string())?;
    let degrees: Vec<i32> = table.rows.iter().map(|r| r.degree).collect();
    if !table.is_constant() {
        return Err(format!("degrees over N = 2..16: {degrees:?}"));
    }
    for level in 2..=12 {
        let cl = c.with_level(level, default_grid_size(level)).map_err(|e| e.to_string())?;
        let dx = brouwer_degree_with(&cl, r, &cfg, Pairing::X).map_err(|e| e.to_string())?;
        let dy = brouwer_degree_with(&cl, r, &cfg, Pairing::Y).map_err(|e| e.to_string())?;
        if dx.degree != dy.degree {
            return Err(format!("N = {level}: X degree {} vs Y degree {}", dx.degree, dy.degree));
        }
    }
    Ok(format!("degree {} for N = 2..16, X = Y for N = 2..12", degrees[0]))
}

fn c9(kernel: &KernelSpec, solutions: &[(f64, SpectralFn)]) -> Outcome {
    let template = ctx(kernel, 0.0, 8);
    let d = assemble_diagram(&template, 30.0, &ContinuationConfig::default()).map_err(|e| e.to_string())?;
    let mut all: Vec<(f64, SpectralFn)> = solutions.to_vec();
    for b in &d.branches {
        all.extend(b.samples.iter().map(|s| (s.lambda, s.u.clone())));
    }
    let mut worst_sup = f64::NEG_INFINITY;
    let mut worst_reg = f64::NEG_INFINITY;
    for (lambda, u) in &all {
        let c = template.with_lambda(*lambda).map_err(|e| e.to_string())?;
        let a = apriori_check(u, &c);
        let r = regularity_check(u, &c);
        // explicit Onsager constants, independent of the kernel's stored norms
        worst_sup = worst_sup.max(a.value - lambda * 2.0 / PI);
        worst_reg = worst_reg.max(r.value - 2.0 * PI * lambda);
    }
    let line = format!(
        "{} states, max sup excess {worst_sup:.3e}, max L2' excess {worst_reg:.3e}",
        all.len()
    );
    if worst_sup <= 1e-6 && worst_reg <= 1e-6 {
        Ok(line)
    } else {
        Err(line)
    }
}

fn c10(kernel: &KernelSpec) -> Outcome {
    let template = ctx(kernel, 0.0, 8);
    let ccfg = ContinuationConfig::default();
    let l1 = kernel.lambda_n(1);
    let branch = onsager_degree::continue_branch(&template, 1, 1, l1 + 3.0, &ccfg).map_err(|e| e.to_string())?;
    let fit = pitchfork_fit(&branch, 10);
    // the same fit, recomputed by hand from the samples
    let take = &branch.samples[..branch.samples.len().min(10)];
    let xs: Vec<f64> = take.iter().map(|s| s.lambda - l1).collect();
    let ys: Vec<f64> = take.iter().map(|s| s.amplitude * s.amplitude).collect();
    let refit = linear_fit(&xs, &ys);
    if !(fit.r_squared > 0.99 && refit.r_squared > 0.99) {
        return Err(format!("R^2 = {:.6}", fit.r_squared));
    }
    let mut worst = 0.0f64;
    for s in &branch.samples {
        worst = worst.max(sample_residual(&template, s.lambda, &quarter_rotation(&s.u)).map_err(|e| e.to_string())?);
    }
    if !(worst < 10.0 * ccfg.tol) {
        return Err(format!("rotated residual {worst:.2e}"));
    }
    Ok(format!("R^2 = {:.6}, rotated residual {worst:.2e} over {} samples", fit.r_squared, branch.samples.len()))
}

fn c11() -> Outcome {
    let dir = std::env::temp_dir().join(format!("onsager-acceptance-{}", std::process::id()));
    let mut outputs = Vec::new();
    for run in 0..2 {
        let out = dir.join(format!("run{run}"));
        let status = Command::new(env!("CARGO_BIN_EXE_onsager-degree"))
            .args(["verify", "--lambda", "6", "--n", "4", "--starts", "64", "--seed", "7", "--out"])
            .arg(&out)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("verify exited with {:?}: {}", status.status.code(), String::from_utf8_lossy(&status.stderr)));
        }
        outputs.push(std::fs::read(out.join("verify.json")).map_err(|e| e.to_string())?);
    }
    let _ = std::fs::remove_dir_all(&dir);
    if outputs[0] == outputs[1] {
        Ok(format!("two runs, {} identical bytes", outputs[0].len()))
    } else {
        Err("verify.json differs between runs".into())
    }
}

fn main() {
    let kernel = onsager_kernel(32).expect("Onsager kernel");
    let mut solutions = Vec::new();
    let criteria: Vec<(&str, Box<dyn FnOnce(&mut Vec<(f64, SpectralFn)>) -> Outcome + '_>)> = vec![
        ("bifurcation points", Box::new(|_| c1())),
        ("uniqueness below lambda_0", Box::new(|_| c2(&kernel))),
        ("degree constancy", Box::new(|s| c3(&kernel, s))),
        ("index bookkeeping", Box::new(|s| c4(&kernel, s))),
        ("linearization diagonality", Box::new(|_| c5(&kernel))),
        ("Gruss bound", Box::new(|_| c6(&kernel))),
        ("Jacobian vs finite differences", Box::new(|_| c7(&kernel))),
        ("degree stabilization", Box::new(|_| c8(&kernel))),
        ("solution bounds", Box::new(|s| c9(&kernel, s))),
        ("pitchfork scaling and symmetry", Box::new(|_| c10(&kernel))),
        ("determinism", Box::new(|_| c11())),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.into_iter().enumerate() {
        let t = Instant::now();
        let outcome = f(&mut solutions);
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Ok(msg) => println!("criterion {:>2} PASS  {name}: {msg} [{secs:.1} s]", i + 1),
            Err(msg) => {
                failed += 1;
                println!("criterion {:>2} FAIL  {name}: {msg} [{secs:.1} s]", i + 1);
            }
        }
    }
    println!("acceptance: {} of 11 criteria passed", 11 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
