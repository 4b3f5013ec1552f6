//! Declarative run configuration, read from TOML and overridable by flags.

use serde::{Deserialize, Serialize};

use energy_exchange::numerics::QuadratureSpec;
use energy_exchange::simulator::SimConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub kernel: String,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    pub out_dir: String,
    pub quadrature: QuadratureSpec,
    pub conditions: ConditionsConfig,
    pub static_report: StaticConfig,
    pub variational: VariationalConfig,
    pub simulation: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsConfig {
    pub samples: usize,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StaticConfig {
    pub gradient_tol: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VariationalConfig {
    pub window: usize,
    pub degree: u32,
    pub half_power: bool,
    pub n_samples: usize,
    pub table_cells: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            kernel: "gg3".into(),
            seed: 1,
            threads: 0,
            out_dir: "out".into(),
            quadrature: QuadratureSpec::default(),
            conditions: ConditionsConfig::default(),
            static_report: StaticConfig::default(),
            variational: VariationalConfig::default(),
            simulation: SimConfig::default(),
        }
    }
}

impl Default for ConditionsConfig {
    fn default() -> Self {
        Self {
            samples: 10_000,
            tolerance: energy_exchange::kernels::DEFAULT_CONDITION_TOL,
        }
    }
}

impl Default for StaticConfig {
    fn default() -> Self {
        Self {
            gradient_tol: energy_exchange::observables::DEFAULT_GRADIENT_TOL,
        }
    }
}

impl Default for VariationalConfig {
    fn default() -> Self {
        Self {
            window: 2,
            degree: 3,
            half_power: true,
            n_samples: 10_000_000,
            table_cells: energy_exchange::simulator::DEFAULT_CELLS,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> anyhow::Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn to_toml(&self) -> anyhow::Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Copies the shared fields into the sections that use them.
    pub fn resolve(mut self) -> Self {
        self.simulation.kernel = self.kernel.clone();
        self.simulation.seed = self.seed;
        self
    }
}
