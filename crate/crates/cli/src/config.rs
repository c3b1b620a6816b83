//! Run configuration: defaults, overlaid by an optional JSON file, overlaid
//! by command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, ValueEnum};
use onsager_degree::degree::MultistartConfig;
use onsager_degree::spectral::default_grid_size;
use onsager_degree::KernelSelector;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Svg,
}

/// Inclusive range of truncation levels, written `A..B`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct LevelRange {
    pub from: usize,
    pub to: usize,
}

impl FromStr for LevelRange {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (a, b) = s
            .split_once("..")
            .ok_or_else(|| format!("level range {s:?} is not of the form A..B"))?;
        let from: usize = a.trim().parse().map_err(|_| format!("bad level {a:?}"))?;
        let to: usize = b.trim().trim_start_matches('=').parse().map_err(|_| format!("bad level {b:?}"))?;
        if from == 0 || to < from {
            return Err(format!("level range {s:?} is empty or starts at 0"));
        }
        Ok(Self { from, to })
    }
}

impl fmt::Display for LevelRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.from, self.to)
    }
}

impl TryFrom<String> for LevelRange {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        s.parse()
    }
}

impl From<LevelRange> for String {
    fn from(r: LevelRange) -> Self {
        r.to_string()
    }
}

/// Fully resolved configuration, embedded verbatim in every artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub kernel: KernelSelector,
    pub lambda: f64,
    pub lambda_max: f64,
    pub n: usize,
    pub grid: usize,
    pub radius_margin: f64,
    /// Explicit sup-norm radius of `Ω`; overrides `λ‖K̂‖_∞ + margin`.
    pub radius: Option<f64>,
    pub levels: Option<LevelRange>,
    pub multistart: MultistartConfig,
    /// Not serialized: artifacts must not depend on where they are written.
    #[serde(skip_serializing, default = "default_out")]
    pub out: PathBuf,
    pub formats: Vec<Format>,
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: KernelSelector::default(),
            lambda: 1.0,
            lambda_max: 10.0,
            n: 8,
            grid: default_grid_size(8),
            radius_margin: 0.5,
            radius: None,
            levels: None,
            multistart: MultistartConfig::default(),
            out: default_out(),
            formats: vec![Format::Json],
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return bad(format!("lambda = {} must be non-negative", self.lambda));
        }
        if !(self.lambda_max.is_finite() && self.lambda_max > 0.0) {
            return bad(format!("lambda_max = {} must be positive", self.lambda_max));
        }
        if self.n == 0 {
            return bad("n must be positive".into());
        }
        if self.grid < 4 * self.n {
            return bad(format!("grid {} must be at least 4n = {}", self.grid, 4 * self.n));
        }
        if !(self.radius_margin > 0.0) {
            return bad("radius margin must be positive".into());
        }
        if let Some(r) = self.radius {
            if !(r > 0.0) {
                return bad("radius must be positive".into());
            }
        }
        self.multistart.validate().map_err(|e| CliError::Config(e.to_string()))?;
        Ok(())
    }
}

/// Flags shared by every subcommand. Anything left unset falls back to
/// the config file, then to the defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct RunFlags {
    /// JSON config file (or a previous artifact, whose embedded config is used).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `onsager:<n_modes>` or `file:<path>`.
    #[arg(long)]
    pub kernel: Option<KernelSelector>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long = "lambda-max")]
    pub lambda_max: Option<f64>,
    /// Galerkin truncation level N.
    #[arg(long)]
    pub n: Option<usize>,
    /// Quadrature grid size M (default max(256, 8N)).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long = "radius-margin")]
    pub radius_margin: Option<f64>,
    /// Explicit sup-norm radius of the degree domain.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Level range for a degree stabilization table, e.g. 2..12.
    #[arg(long)]
    pub levels: Option<LevelRange>,
    /// Multistart Newton starts (default 64·N).
    #[arg(long)]
    pub starts: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Output formats, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub format: Option<Vec<Format>>,
}

/// Config-file shape: every key optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub kernel: Option<KernelSelector>,
    pub lambda: Option<f64>,
    pub lambda_max: Option<f64>,
    pub n: Option<usize>,
    pub grid: Option<usize>,
    pub radius_margin: Option<f64>,
    pub radius: Option<f64>,
    pub levels: Option<LevelRange>,
    pub multistart: Option<MultistartConfig>,
    pub starts: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub formats: Option<Vec<Format>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        // artifacts carry their config under "config"
        let inner = match value.get("config") {
            Some(c) if value.get("tool").is_some() => c.clone(),
            _ => value,
        };
        serde_json::from_value(inner).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

/// Resolves defaults ← file ← flags. `default_formats` applies when
/// neither source names formats.
pub fn resolve(flags: &RunFlags, default_formats: &[Format]) -> Result<RunConfig, CliError> {
    let file = match &flags.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let mut cfg = RunConfig {
        formats: default_formats.to_vec(),
        ..RunConfig::default()
    };
    if let Some(ms) = file.multistart {
        cfg.multistart = ms;
    }
    macro_rules! overlay {
        ($field:ident, $src:ident) => {
            if let Some(v) = $src.$field.clone() {
                cfg.$field = v;
            }
        };
    }
    overlay!(kernel, file);
    overlay!(lambda, file);
    overlay!(lambda_max, file);
    overlay!(n, file);
    overlay!(radius_margin, file);
    overlay!(out, file);
    overlay!(formats, file);
    if file.radius.is_some() {
        cfg.radius = file.radius;
    }
    if file.levels.is_some() {
        cfg.levels = file.levels;
    }
    if file.starts.is_some() {
        cfg.multistart.n_starts = file.starts;
    }
    if let Some(s) = file.seed {
        cfg.multistart.seed = s;
    }

    overlay!(kernel, flags);
    overlay!(lambda, flags);
    overlay!(lambda_max, flags);
    overlay!(n, flags);
    overlay!(radius_margin, flags);
    overlay!(out, flags);
    if let Some(f) = &flags.format {
        cfg.formats = f.clone();
    }
    if flags.radius.is_some() {
        cfg.radius = flags.radius;
    }
    if flags.levels.is_some() {
        cfg.levels = flags.levels;
    }
    if flags.starts.is_some() {
        cfg.multistart.n_starts = flags.starts;
    }
    if let Some(s) = flags.seed {
        cfg.multistart.seed = s;
    }
    cfg.grid = flags
        .grid
        .or(file.grid)
        .unwrap_or_else(|| default_grid_size(cfg.n));
    cfg.formats.sort();
    cfg.formats.dedup();
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_range_parsing() {
        assert_eq!("2..12".parse::<LevelRange>().unwrap(), LevelRange { from: 2, to: 12 });
        assert_eq!("2..=12".parse::<LevelRange>().unwrap(), LevelRange { from: 2, to: 12 });
        assert!("0..3".parse::<LevelRange>().is_err());
        assert!("5..3".parse::<LevelRange>().is_err());
        assert!("5".parse::<LevelRange>().is_err());
    }

    #[test]
    fn defaults_resolve() {
        let c = resolve(&RunFlags::default(), &[Format::Json]).unwrap();
        assert_eq!(c.n, 8);
        assert_eq!(c.grid, 256);
        assert_eq!(c.kernel, KernelSelector::Onsager(32));
    }

    #[test]
    fn grid_follows_n() {
        let flags = RunFlags {
            n: Some(40),
            ..Default::default()
        };
        assert_eq!(resolve(&flags, &[]).unwrap().grid, 320);
    }

    #[test]
    fn flags_override_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"lambda": 3.0, "n": 6, "seed": 9}"#).unwrap();
        let flags = RunFlags {
            config: Some(p),
            lambda: Some(4.0),
            ..Default::default()
        };
        let c = resolve(&flags, &[]).unwrap();
        assert_eq!(c.lambda, 4.0);
        assert_eq!(c.n, 6);
        assert_eq!(c.multistart.seed, 9);
    }

    #[test]
    fn unknown_keys_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"lamda": 3.0}"#).unwrap();
        let flags = RunFlags {
            config: Some(p),
            ..Default::default()
        };
        assert!(matches!(resolve(&flags, &[]), Err(CliError::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let flags = RunFlags {
            lambda: Some(-1.0),
            ..Default::default()
        };
        assert!(resolve(&flags, &[]).is_err());
        let flags = RunFlags {
            n: Some(8),
            grid: Some(16),
            ..Default::default()
        };
        assert!(resolve(&flags, &[]).is_err());
    }
}
