//! Run configuration: a JSON file merged under explicit command-line flags.

use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Serialize};

use partlin::catalog::{self, CATALOG_NAMES};
use partlin::lp::LPConfig;
use partlin::spec_file::MapSpec;
use partlin::verify::VerifyConfig;
use partlin::{DiscreteMap, MapModel};

/// Raised for anything the user can fix by changing the configuration.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "configuration error: {}", self.0)
    }
}

impl std::error::Error for ConfigError {}

fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Catalog map name (LIN3, POLY3, POLY3b, TWOU4, CEX1).
    #[arg(long)]
    pub map: Option<String>,
    /// Map specification file (JSON).
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Grid budget: about grid^3 points in any dimension.
    #[arg(long)]
    pub grid: Option<usize>,
    /// Stopping tolerance of the conjugacy limits.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Iteration horizon of the limits and of the leaf oracle.
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Weight of the unstable Lyapunov-Perron sequence space.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Seed of the random directions and sample points.
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with any of the fields above; explicit flags win.
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

impl RunConfig {
    /// Loads `--config` (when given) and overlays the explicit flags.
    pub fn resolve(self) -> anyhow::Result<Self> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let text = std::fs::read_to_string(&path)
            .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
        let file: RunConfig = serde_json::from_str(&text)
            .map_err(|e| config_error(format!("{}: {e}", path.display())))?;
        Ok(Self {
            map: self.map.or(file.map),
            spec: self.spec.or(file.spec),
            grid: self.grid.or(file.grid),
            tol: self.tol.or(file.tol),
            horizon: self.horizon.or(file.horizon),
            rho: self.rho.or(file.rho),
            out: self.out.or(file.out),
            seed: self.seed.or(file.seed),
            config: Some(path),
        })
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("partlin-out"))
    }

    /// The map named by `--map` or described by `--spec`.
    pub fn model(&self) -> anyhow::Result<MapModel> {
        match (&self.map, &self.spec) {
            (Some(_), Some(_)) => Err(config_error("give either --map or --spec, not both")),
            (None, None) => Err(config_error("no map: pass --map <name> or --spec <file>")),
            (Some(name), None) => catalog::by_name(name).map_err(|_| {
                config_error(format!("unknown map {name:?}; catalog: {}", CATALOG_NAMES.join(", ")))
            }),
            (None, Some(path)) => load_spec(path),
        }
    }

    /// Verification settings after validating every numeric flag against
    /// `model`.
    pub fn verify_config(&self, model: &MapModel) -> anyhow::Result<VerifyConfig> {
        let mut cfg = VerifyConfig::default();
        let s = model.structure();
        if let Some(g) = self.grid {
            if g < 2 {
                return Err(config_error(format!("--grid must be at least 2, got {g}")));
            }
            cfg.grid = g;
            cfg.leaf_samples = partlin::verify::points_per_axis(g, s.dim()).pow(s.dim() as u32);
        }
        if let Some(t) = self.tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(config_error(format!("--tol must be positive, got {t}")));
            }
            cfg.linearize.tol = t;
        }
        if let Some(h) = self.horizon {
            if h == 0 {
                return Err(config_error("--horizon must be positive"));
            }
            cfg.linearize.horizon = h;
            cfg.oracle_horizon = h;
        }
        if let Some(r) = self.rho {
            if s.dim_u() > 0 {
                LPConfig::unstable_default(&s.envelopes)
                    .with_rho(r)
                    .check_unstable(&s.envelopes)
                    .map_err(|e| config_error(e.to_string()))?;
            }
            cfg.linearize.rho = Some(r);
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

fn load_spec(path: &Path) -> anyhow::Result<MapModel> {
    MapSpec::from_path(path)
        .and_then(|s| s.build())
        .map_err(|e| config_error(format!("{}: {e}", path.display())))
}
