//! TOML run configuration. Every key has a default; unknown keys are errors.
//!
//! ```toml
//! seed = 7
//! problems = 100
//! conditioning = "at_least_one_valid"
//!
//! [dataset]
//! kind = "synthetic"
//! num_regions = 500
//!
//! [bench]
//! baseline = "bisect:unconstrained"
//! policies = ["bisect:unconstrained", "random:unconstrained"]
//! resamples = 10000
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bench::BenchParams;
use crate::datasets::synthetic::SyntheticParams;
use crate::datasets::DatasetSpec;
use crate::error::{Error, Result};
use crate::runner::Conditioning;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub problems: usize,
    pub conditioning: Conditioning,
    /// Clamp loaded biases into `[1e-6, 1 - 1e-6]` instead of rejecting them.
    pub clamp_bias: bool,
    pub dataset: DatasetSpec,
    pub bench: BenchParams,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: None,
            threads: None,
            problems: 100,
            conditioning: Conditioning::default(),
            clamp_bias: false,
            dataset: DatasetSpec::Synthetic(SyntheticParams::default()),
            bench: BenchParams::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidParams(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    /// The fully resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicySpec;

    #[test]
    fn defaults_and_round_trip() {
        let c = Config::from_toml_str("").unwrap();
        assert_eq!(c, Config::default());
        let c = Config {
            seed: Some(3),
            ..Default::default()
        };
        assert_eq!(Config::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(Config::from_toml_str("sed = 1").is_err());
        assert!(Config::from_toml_str("[dataset]\nkind = \"synthetic\"\nregions = 5").is_err());
        assert!(Config::from_toml_str("[bench]\nresample = 5").is_err());
    }

    #[test]
    fn example_document_parses() {
        let text = r#"
            seed = 7
            problems = 50
            conditioning = "all"
            [dataset]
            kind = "world"
            library_size = 40
            [dataset.world]
            kind = "forest"
            clusters = 4
            [bench]
            baseline = "bisect:unconstrained"
            policies = ["bisect:unconstrained", "mvoi:maxprob"]
        "#;
        let c = Config::from_toml_str(text).unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.conditioning, Conditioning::All);
        let DatasetSpec::World(p) = &c.dataset else { panic!() };
        assert_eq!(p.library_size, 40);
        assert_eq!(p.world.clusters, 4);
        assert_eq!(c.bench.policies[1], "mvoi:maxprob".parse::<PolicySpec>().unwrap());
    }
}
