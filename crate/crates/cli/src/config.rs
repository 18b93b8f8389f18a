//! Human-editable run configuration (TOML) and its content hash.
//!
//! Parameters the analysis names directly (s, gamma, sigma, delta, epsilon,
//! R) live under the `paper` section under their own symbols so a run is
//! auditable against the write-up it came from.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use prandtl_core::grid::{Grading, GridSpec};
use prandtl_core::norms::NormParams;
use prandtl_core::solver::{CutoffChi, Integrator, SchemeConfig};
use prandtl_core::{Error, Result};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct GridSection {
    pub nx: usize,
    pub ny: usize,
    #[serde(rename = "Y")]
    pub y_max: f64,
    #[serde(default = "default_grading")]
    pub grading: String,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_grading() -> String {
    "uniform".into()
}

fn default_beta() -> f64 {
    3.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PaperSection {
    pub s: usize,
    pub gamma: f64,
    pub sigma: f64,
    pub delta: f64,
    pub epsilon: f64,
    #[serde(rename = "R", default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SchemeSection {
    #[serde(default = "default_integrator")]
    pub integrator: String,
    pub dt: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    #[serde(default = "default_matching_tol")]
    pub matching_tol: f64,
    /// Unrecorded spin-up before the monitored window; absorbs the
    /// wall-compatibility transient of the standard datum.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
}

fn default_burn_in() -> f64 {
    5e-3
}

fn default_integrator() -> String {
    "imex_euler".into()
}

fn default_matching_tol() -> f64 {
    1e-3
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DatumSection {
    #[serde(default = "default_amplitude")]
    pub amplitude: f64,
    #[serde(default = "default_scale")]
    pub scale: f64,
}

fn default_amplitude() -> f64 {
    0.2
}

fn default_scale() -> f64 {
    1.0
}

impl Default for DatumSection {
    fn default() -> Self {
        DatumSection { amplitude: default_amplitude(), scale: default_scale() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<String>,
    #[serde(default = "default_sample_every")]
    pub sample_every: usize,
}

fn default_sample_every() -> usize {
    10
}

/// Optional parameter grids for `sweep`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct SweepSection {
    #[serde(default)]
    pub epsilon: Vec<f64>,
    #[serde(rename = "R", default)]
    pub r: Vec<f64>,
    /// Pairs [nx, ny].
    #[serde(default)]
    pub grids: Vec<[usize; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunConfig {
    #[serde(default = "default_scenario")]
    pub scenario: String,
    pub grid: GridSection,
    pub paper: PaperSection,
    pub scheme: SchemeSection,
    #[serde(default)]
    pub datum: DatumSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_scenario() -> String {
    "standard".into()
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: default_scenario(),
            grid: GridSection {
                nx: 16,
                ny: 129,
                y_max: 30.0,
                grading: "exponential".into(),
                beta: 3.0,
            },
            paper: PaperSection {
                s: 4,
                gamma: 1.0,
                sigma: 2.6,
                delta: 0.05,
                epsilon: 0.1,
                r: None,
            },
            scheme: SchemeSection {
                integrator: default_integrator(),
                dt: 5e-4,
                t_end: 0.05,
                matching_tol: default_matching_tol(),
                burn_in: default_burn_in(),
            },
            datum: DatumSection::default(),
            output: OutputSection::default(),
            sweep: None,
        }
    }
}

impl RunConfig {
    pub fn from_path(path: &std::path::Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| Error::InvalidSpec(format!("config parse failed: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Full validation; class-emptiness is rejected here so a bad config
    /// never reaches the solver.
    pub fn validate(&self) -> Result<()> {
        self.norm_params()?;
        self.grid_spec()?;
        self.integrator()?;
        if !(self.scheme.dt > 0.0) || !(self.scheme.t_end >= 0.0) {
            return Err(Error::InvalidSpec("need dt > 0 and T >= 0".into()));
        }
        if !(self.scheme.burn_in >= 0.0) {
            return Err(Error::InvalidSpec("burn_in must be >= 0".into()));
        }
        if !(self.paper.epsilon >= 0.0) {
            return Err(Error::InvalidSpec("epsilon must be >= 0".into()));
        }
        if let Some(r) = self.paper.r {
            if !(r >= 1.0) {
                return Err(Error::InvalidSpec("R must be >= 1 when present".into()));
            }
        }
        Ok(())
    }

    pub fn norm_params(&self) -> Result<NormParams> {
        NormParams::new(self.paper.s, self.paper.gamma, self.paper.sigma, self.paper.delta)
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        let grading = match self.grid.grading.as_str() {
            "uniform" => Grading::Uniform,
            "exponential" => Grading::Exponential { beta: self.grid.beta },
            other => {
                return Err(Error::InvalidSpec(format!("unknown grading '{other}'")));
            }
        };
        Ok(GridSpec {
            nx: self.grid.nx,
            ny: self.grid.ny,
            y_max: self.grid.y_max,
            dt: self.scheme.dt,
            grading,
        })
    }

    pub fn integrator(&self) -> Result<Integrator> {
        match self.scheme.integrator.as_str() {
            "imex_euler" => Ok(Integrator::ImexEuler),
            "strang" => Ok(Integrator::Strang),
            other => Err(Error::InvalidSpec(format!("unknown integrator '{other}'"))),
        }
    }

    pub fn scheme_config(&self) -> Result<SchemeConfig> {
        let mut cfg = SchemeConfig::new(self.integrator()?, self.scheme.dt)?;
        cfg.matching_tol = self.scheme.matching_tol;
        cfg.cutoff = CutoffChi::default();
        if let Some(r) = self.paper.r {
            cfg = cfg.with_truncation(r)?;
        }
        Ok(cfg)
    }

    /// Content hash over the canonical JSON serialization of the config;
    /// a pure function of the configuration fields.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config always serializes");
        let mut hasher = Sha256::new();
        hasher.update(&bytes);
        let digest = hasher.finalize();
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config always serializes")
    }
}
