//! Command implementations behind the `onsager-degree` binary. Every
//! command returns an [`Artifact`] whose JSON serialization depends only on
//! the resolved configuration, so repeated runs are byte-identical.

pub mod config;
pub mod svg;

use std::path::{Path, PathBuf};

use onsager_degree::bifurcation::{diagram_csv, linearization_spectrum};
use onsager_degree::degree::{brouwer_degree, degree_stabilization, find_zeros_in, Domain, StabilizationTable};
use onsager_degree::operator::{apriori_check, regularity_check, BoundCheck};
use onsager_degree::verify::{run_suite, VerifyConfig, VerifyReport};
use onsager_degree::{
    assemble_diagram, BifurcationDiagram, ContinuationConfig, DegreeReport, KernelSpec, OperatorContext, Pairing,
    SpectralFn,
};
use serde::Serialize;
use thiserror::Error;

pub use config::{resolve, Format, LevelRange, RunConfig, RunFlags};

pub const TOOL: &str = "onsager-degree";

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] onsager_degree::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for refusals grounded in the mathematics, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(e) if e.is_mathematical_refusal() => 2,
            _ => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Solve,
    Degree,
    Bifurcate,
    Verify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Degree => "degree",
            Command::Bifurcate => "bifurcate",
            Command::Verify => "verify",
        }
    }

    pub fn default_formats(self) -> &'static [Format] {
        match self {
            Command::Bifurcate => &[Format::Json, Format::Csv, Format::Svg],
            _ => &[Format::Json],
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct KernelInfo {
    pub selector: String,
    pub n_modes: usize,
    pub sup_norm: f64,
    pub deriv_sup_norm: f64,
    pub lambda_zero: f64,
    pub warnings: Vec<String>,
}

impl KernelInfo {
    fn new(cfg: &RunConfig, k: &KernelSpec) -> Self {
        Self {
            selector: cfg.kernel.to_string(),
            n_modes: k.n_modes(),
            sup_norm: k.sup_norm(),
            deriv_sup_norm: k.deriv_sup_norm(),
            lambda_zero: k.lambda_zero(),
            warnings: k.warnings().to_vec(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolutionEntry {
    pub u: SpectralFn,
    pub jacobian_sign: i32,
    pub residual_norm: f64,
    pub sup_norm: f64,
    pub stable: bool,
    /// Eigenvalues of `Id − λa(u)`, ascending.
    pub spectrum: Vec<f64>,
    pub apriori: BoundCheck,
    pub regularity: BoundCheck,
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    pub lambda: f64,
    pub level: usize,
    pub grid_size: usize,
    pub radius: f64,
    pub solutions: Vec<SolutionEntry>,
    pub n_starts: usize,
    pub failed_starts: usize,
    pub outside_zeros: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct DegreeResult {
    pub report: DegreeReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stabilization: Option<StabilizationTable>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CommandResult {
    Solve(SolveResult),
    Degree(Box<DegreeResult>),
    Bifurcate(BifurcationDiagram),
    Verify(VerifyReport),
}

#[derive(Debug, Clone, Serialize)]
pub struct Artifact {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: Command,
    pub config: RunConfig,
    pub kernel: KernelInfo,
    pub result: CommandResult,
}

impl Artifact {
    /// Whether the run met its own success criterion: certified degree,
    /// all checks passing, a complete diagram. Solve always succeeds.
    pub fn succeeded(&self) -> bool {
        match &self.result {
            CommandResult::Solve(_) => true,
            CommandResult::Degree(d) => {
                d.report.certified
                    && d.stabilization
                        .as_ref()
                        .is_none_or(|t| t.rows.iter().all(|r| r.certified))
            }
            CommandResult::Bifurcate(d) => d.complete,
            CommandResult::Verify(v) => v.all_passed,
        }
    }

    pub fn to_json(&self) -> Result<String, CliError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Writes `<command>.json|csv|svg` into `dir` for each requested
    /// format the command supports, returning the written paths.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)?;
        let stem = self.command.name();
        let mut written = Vec::new();
        for f in &self.config.formats {
            let (ext, body) = match (f, &self.result) {
                (Format::Json, _) => ("json", self.to_json()?),
                (Format::Csv, CommandResult::Bifurcate(d)) => ("csv", diagram_csv(d)),
                (Format::Svg, CommandResult::Bifurcate(d)) => ("svg", svg::diagram_svg(d)),
                _ => continue,
            };
            let path = dir.join(format!("{stem}.{ext}"));
            std::fs::write(&path, body)?;
            written.push(path);
        }
        Ok(written)
    }
}

fn context(cfg: &RunConfig, kernel: &KernelSpec) -> Result<OperatorContext, CliError> {
    Ok(OperatorContext::new(kernel.clone(), cfg.lambda, cfg.n, cfg.grid)?)
}

fn radius(cfg: &RunConfig, ctx: &OperatorContext) -> f64 {
    cfg.radius.unwrap_or_else(|| ctx.apriori_radius() + cfg.radius_margin)
}

pub fn solve(cfg: &RunConfig, kernel: &KernelSpec) -> Result<SolveResult, CliError> {
    let ctx = context(cfg, kernel)?;
    let r = radius(cfg, &ctx);
    let search = find_zeros_in(&ctx, &Domain::SupBall { radius: r }, &cfg.multistart, Pairing::X)?;
    let mut solutions = Vec::with_capacity(search.zeros.len());
    for z in search.zeros {
        let spectrum = linearization_spectrum(&z.u, &ctx)?;
        solutions.push(SolutionEntry {
            stable: spectrum.first().is_none_or(|&e| e > 0.0),
            spectrum,
            apriori: apriori_check(&z.u, &ctx),
            regularity: regularity_check(&z.u, &ctx),
            jacobian_sign: z.jacobian_sign,
            residual_norm: z.residual_norm,
            sup_norm: z.sup_norm,
            u: z.u,
        });
    }
    Ok(SolveResult {
        lambda: cfg.lambda,
        level: cfg.n,
        grid_size: cfg.grid,
        radius: r,
        solutions,
        n_starts: search.n_starts,
        failed_starts: search.failed_starts,
        outside_zeros: search.outside,
    })
}

pub fn degree(cfg: &RunConfig, kernel: &KernelSpec) -> Result<DegreeResult, CliError> {
    let ctx = context(cfg, kernel)?;
    let r = radius(cfg, &ctx);
    let report = brouwer_degree(&ctx, r, &cfg.multistart)?;
    let stabilization = match cfg.levels {
        Some(l) => Some(degree_stabilization(&ctx, r, &cfg.multistart, l.from..=l.to, Pairing::X)?),
        None => None,
    };
    Ok(DegreeResult { report, stabilization })
}

pub fn bifurcate(cfg: &RunConfig, kernel: &KernelSpec) -> Result<BifurcationDiagram, CliError> {
    let ctx = context(cfg, kernel)?;
    Ok(assemble_diagram(&ctx, cfg.lambda_max, &ContinuationConfig::default())?)
}

pub fn verify(cfg: &RunConfig, kernel: &KernelSpec) -> Result<VerifyReport, CliError> {
    let vc = VerifyConfig {
        lambda: cfg.lambda,
        level: cfg.n,
        grid_size: cfg.grid,
        radius_margin: cfg.radius_margin,
        multistart: cfg.multistart.clone(),
        ..VerifyConfig::default()
    };
    Ok(run_suite(kernel, &vc)?)
}

/// Loads the kernel and runs `command` on a resolved configuration.
pub fn run(command: Command, cfg: RunConfig) -> Result<Artifact, CliError> {
    let kernel = cfg.kernel.load()?;
    let result = match command {
        Command::Solve => CommandResult::Solve(solve(&cfg, &kernel)?),
        Command::Degree => CommandResult::Degree(Box::new(degree(&cfg, &kernel)?)),
        Command::Bifurcate => CommandResult::Bifurcate(bifurcate(&cfg, &kernel)?),
        Command::Verify => CommandResult::Verify(verify(&cfg, &kernel)?),
    };
    Ok(Artifact {
        tool: TOOL,
        version: onsager_degree::VERSION,
        command,
        kernel: KernelInfo::new(&cfg, &kernel),
        config: cfg,
        result,
    })
}
