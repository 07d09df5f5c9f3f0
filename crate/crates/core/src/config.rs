//! Serializable description of a complete run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::freeboundary::ClassifyConfig;
use crate::grid::{ExtensionGrid, GridParams};
use crate::obstacle::{ObstacleParams, ObstacleSpec};
use crate::solver::SolverConfig;
use crate::stopping::{StableProcessConfig, Strategy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct McConfig {
    pub dt: f64,
    pub n_paths: usize,
    pub max_time: f64,
    /// Start points; empty means ten points spread over the continuation region.
    pub points: Vec<Vec<f64>>,
    pub strategies: Vec<Strategy>,
    pub martingale_delta: Option<f64>,
}

impl Default for McConfig {
    fn default() -> Self {
        McConfig {
            dt: 1e-4,
            n_paths: 100_000,
            max_time: 4.0,
            points: Vec::new(),
            strategies: vec![
                Strategy::StopOnContact,
                Strategy::StopImmediately,
                Strategy::FixedTime { t: 0.01 },
                Strategy::FixedTime { t: 0.05 },
            ],
            martingale_delta: Some(1e-3),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub grid: GridParams,
    pub obstacle: ObstacleParams,
    pub solver: SolverConfig,
    /// Replace `solver.omega` by the spectral estimate for the grid.
    pub tune_omega: bool,
    /// Refreshes of the far-field boundary data; `0` keeps zero data.
    pub far_field_passes: usize,
    pub classify: ClassifyConfig,
    pub mc: McConfig,
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            grid: GridParams {
                n: 1,
                s: 0.5,
                x_box: 1.0,
                y_max: 1.0,
                nx: 257,
                ny: 129,
                trace_window: None,
            },
            obstacle: ObstacleParams::Cap {
                h0: 0.2,
                kappa: 1.0,
                rho: 0.6,
                blend_width: 0.25,
            },
            solver: SolverConfig::default(),
            tune_omega: true,
            far_field_passes: 0,
            classify: ClassifyConfig::default(),
            mc: McConfig::default(),
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Canonical JSON, the input of the manifest hash.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn build_grid(&self) -> Result<ExtensionGrid> {
        self.grid.build()
    }

    pub fn build_obstacle(&self) -> Result<ObstacleSpec> {
        self.obstacle.build(self.grid.n, self.grid.x_box)
    }

    pub fn solver_config(&self, grid: &ExtensionGrid) -> Result<SolverConfig> {
        self.solver.validate()?;
        Ok(if self.tune_omega {
            self.solver.with_tuned_omega(grid)
        } else {
            self.solver
        })
    }

    pub fn process_config(&self) -> Result<StableProcessConfig> {
        if self.mc.n_paths == 0 {
            return invalid("mc.n_paths must be positive");
        }
        let cfg = StableProcessConfig {
            alpha: 2.0 * self.grid.s,
            dt: self.mc.dt,
            n_paths: self.mc.n_paths,
            max_time: self.mc.max_time,
            seed: self.seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks every section without running anything.
    pub fn validate(&self) -> Result<()> {
        let g = self.build_grid()?;
        self.build_obstacle()?;
        self.solver_config(&g)?;
        self.classify.diagnostics.validate()?;
        self.process_config()?;
        Ok(())
    }
}
