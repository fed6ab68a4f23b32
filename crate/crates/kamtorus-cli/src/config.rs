//! Run configuration: a JSON document whose fields all have defaults.

use std::path::Path;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use kamtorus::certificate::CertificateOptions;
use kamtorus::cohomology::DiophantineParams;
use kamtorus::iso::FrequencyRay;
use kamtorus::solver::NewtonSchedule;
use kamtorus::system::{builtin_system, Conserved, HamiltonianSystem};

pub const GOLDEN: f64 = 1.618_033_988_749_895;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Ordinary,
    Iso,
}

/// Box around the torus used as the domain of the global constants.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightDomain {
    pub radius: f64,
    pub imag_width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CertifyConfig {
    /// Strip width of the check; defaults to the solve strip `rho`.
    pub rho: Option<f64>,
    #[serde(flatten)]
    pub options: CertificateOptions,
    pub domain: Option<TightDomain>,
    pub lattice_density: usize,
    pub random_points: usize,
    pub seed: u64,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            rho: None,
            options: CertificateOptions::default(),
            domain: None,
            lattice_density: 3,
            random_points: 2000,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ValidateConfig {
    pub samples: usize,
    pub seed: u64,
}

impl Default for ValidateConfig {
    fn default() -> Self {
        Self { samples: 200, seed: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub system: String,
    pub epsilon: f64,
    pub omega: Vec<f64>,
    pub tau: f64,
    /// Diophantine constant; estimated from the divisors when absent.
    pub gamma: Option<f64>,
    pub scan_limit: usize,
    pub bands: usize,
    pub rho: f64,
    pub mode: Mode,
    pub conserved: Conserved,
    /// Target level `c₀`; defaults to the seed level plus `target_offset`.
    pub target: Option<f64>,
    pub target_offset: f64,
    pub sigma_omega: f64,
    pub schedule: NewtonSchedule,
    pub certificate: CertifyConfig,
    pub validation: ValidateConfig,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            system: "symmetric_rotors".into(),
            epsilon: 0.01,
            omega: vec![1.0, GOLDEN],
            tau: 1.0,
            gamma: None,
            scan_limit: 1000,
            bands: 32,
            rho: 0.01,
            mode: Mode::Ordinary,
            conserved: Conserved::Energy,
            target: None,
            target_offset: 1e-3,
            sigma_omega: 2.0,
            schedule: NewtonSchedule::default(),
            certificate: CertifyConfig::default(),
            validation: ValidateConfig::default(),
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub mode: Option<Mode>,
    pub epsilon: Option<f64>,
    pub bands: Option<usize>,
}

impl Config {
    pub fn load(path: Option<&Path>, overrides: &Overrides) -> Result<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).with_context(|| format!("reading config {}", p.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing config {}", p.display()))?
            }
            None => Config::default(),
        };
        if let Some(m) = overrides.mode {
            cfg.mode = m;
        }
        if let Some(e) = overrides.epsilon {
            cfg.epsilon = e;
        }
        if let Some(b) = overrides.bands {
            cfg.bands = b;
        }
        cfg.schedule.rho0 = cfg.rho;
        Ok(cfg)
    }

    pub fn build_system(&self) -> Result<Arc<HamiltonianSystem>> {
        Ok(Arc::new(builtin_system(&self.system, self.epsilon)?))
    }

    /// Checks everything that can be checked before any numerics run.
    pub fn validate(&self, sys: &HamiltonianSystem) -> Result<()> {
        let d = sys.torus_dim();
        if self.omega.len() != d {
            bail!("omega has {} components but system {} carries {d}-dimensional tori", self.omega.len(), self.system);
        }
        if self.bands == 0 {
            bail!("bands must be positive");
        }
        if !(self.rho > 0.0) {
            bail!("rho must be positive, got {}", self.rho);
        }
        if !(self.sigma_omega > 1.0) {
            bail!("sigma_omega must exceed 1, got {}", self.sigma_omega);
        }
        sys.check_conserved(self.conserved)?;
        self.schedule.validate()?;
        Ok(())
    }

    pub fn diophantine(&self) -> Result<DiophantineParams> {
        Ok(match self.gamma {
            Some(g) => DiophantineParams::new(&self.omega, g, self.tau, self.scan_limit)?,
            None => DiophantineParams::scan(&self.omega, self.tau, self.scan_limit)?,
        })
    }

    pub fn ray(&self) -> Result<FrequencyRay> {
        Ok(FrequencyRay::through(&self.diophantine()?, self.sigma_omega)?)
    }

    pub fn band_vec(&self) -> Vec<usize> {
        vec![self.bands; self.omega.len()]
    }
}
