//! Command-line front end: config parsing and validation, engine dispatch,
//! artifact output with embedded provenance headers.

mod config;
mod run;

pub use config::{
    parse_artifact_header, ArtifactHeader, ConfigError, ExactLaw, ExperimentConfig,
    GeneratorConfig, GrowthTestConfig, Mode, RationalParam, ReinforcementConfig, WeightOverride,
};
pub use run::{exact_law_for, rerun_into, run, verify_identities, RunError, RunReport};
