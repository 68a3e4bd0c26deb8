//! Run configuration: a single TOML document tying together the mesh,
//! the density family, the energy parameters, and the minimizer
//! settings.

use crate::energy::{DensityFamily, DensitySpec, EnergyParams};
use crate::error::{Error, Result};
use crate::minimizer::MinimizerConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    /// Body mesh in `tetmesh 1` format.
    pub mesh: PathBuf,
    pub density: DensityFamily,
    /// Perturbation weight for the quadratic / concave families.
    pub kappa: f64,
    pub energy: EnergyParams,
    pub minimizer: MinimizerConfig,
    /// Skip the minimization and only analyze the crack surface.
    pub varifold_only: bool,
    /// Not echoed into reports: output location must not affect the
    /// byte-identical determinism of report.json.
    #[serde(skip_serializing)]
    pub output_dir: PathBuf,
    pub seed: u64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            mesh: PathBuf::new(),
            density: DensityFamily::Reference,
            kappa: 0.0,
            energy: EnergyParams::default(),
            minimizer: MinimizerConfig::default(),
            varifold_only: false,
            output_dir: PathBuf::from("out"),
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<RunConfig> {
        let config: RunConfig =
            toml::from_str(text).map_err(|e| Error::Config(format!("bad config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = std::fs::read_to_string(path)?;
        let mut config = RunConfig::from_toml(&text)?;
        // relative mesh paths resolve next to the config file
        if config.mesh.is_relative() {
            if let Some(dir) = path.parent() {
                config.mesh = dir.join(&config.mesh);
            }
        }
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        self.energy.validate()?;
        self.minimizer.validate()?;
        if self.density == DensityFamily::ConcaveTest {
            return Err(Error::Config(
                "the concave test density is not admissible for runs".into(),
            ));
        }
        Ok(())
    }

    pub fn density_spec(&self) -> DensitySpec {
        match self.density {
            DensityFamily::Reference => DensitySpec::reference(&self.energy),
            DensityFamily::ReferenceQuadratic => {
                DensitySpec::reference_quadratic(&self.energy, self.kappa)
            }
            DensityFamily::ConcaveTest => DensitySpec {
                family: DensityFamily::ConcaveTest,
                kappa: self.kappa,
                ..DensitySpec::reference(&self.energy)
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let config = RunConfig {
            mesh: PathBuf::from("bar.tetmesh"),
            ..RunConfig::default()
        };
        let text = toml::to_string(&config).unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back.mesh, config.mesh);
        assert_eq!(back.seed, config.seed);
        assert_eq!(back.minimizer.max_candidates, config.minimizer.max_candidates);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let config = RunConfig::from_toml("mesh = \"m.tetmesh\"\nseed = 7\n").unwrap();
        assert_eq!(config.seed, 7);
        assert_eq!(config.energy.p, EnergyParams::default().p);
    }

    #[test]
    fn invalid_parameters_are_rejected() {
        let text = "mesh = \"m.tetmesh\"\n[energy]\np = 1.0\n";
        assert!(RunConfig::from_toml(text).is_err());
        let text = "mesh = \"m.tetmesh\"\ndensity = \"concave-test\"\n";
        assert!(RunConfig::from_toml(text).is_err());
    }
}
