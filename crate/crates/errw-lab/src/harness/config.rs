//! Experiment configuration: one JSON document per run, strict about unknown
//! keys, hashed into every output artifact so any data file can be traced
//! back to (and re-run from) the exact configuration that produced it.

use crate::model::{EdgeIndex, ReinforcementScheme, Scheduler, WeightTable};
use crate::sequence::{Generator, GrowthTest, SequenceSpec};
use num_rational::BigRational;
use num_traits::Signed;
use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to parse config JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{field}`: {message}")]
    Invalid { field: &'static str, message: String },
    #[error("artifact header not recognized")]
    BadHeader,
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

// ---------------------------------------------------------------------------
// Exact numbers in JSON
// ---------------------------------------------------------------------------

/// Exact rational config value. Accepts JSON integers, floats (converted via
/// their exact binary expansion) and `"p/q"` strings; always serializes as a
/// `"p/q"` string so the canonical form is stable.
#[derive(Debug, Clone, PartialEq)]
pub struct RationalParam(pub BigRational);

impl Serialize for RationalParam {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&format!("{}/{}", self.0.numer(), self.0.denom()))
    }
}

impl<'de> Deserialize<'de> for RationalParam {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        struct ParamVisitor;
        impl Visitor<'_> for ParamVisitor {
            type Value = RationalParam;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                write!(f, "a number or a \"p/q\" string")
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Self::Value, E> {
                Ok(RationalParam(BigRational::from_integer(v.into())))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Self::Value, E> {
                Ok(RationalParam(BigRational::from_integer(v.into())))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Self::Value, E> {
                BigRational::from_float(v)
                    .map(RationalParam)
                    .ok_or_else(|| E::custom("float is not finite"))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Self::Value, E> {
                parse_rational(v).map(RationalParam).map_err(E::custom)
            }
        }
        deserializer.deserialize_any(ParamVisitor)
    }
}

fn parse_rational(text: &str) -> Result<BigRational, String> {
    let text = text.trim();
    if let Some((num, den)) = text.split_once('/') {
        let num = num_bigint::BigInt::from_str(num.trim())
            .map_err(|e| format!("bad numerator: {e}"))?;
        let den = num_bigint::BigInt::from_str(den.trim())
            .map_err(|e| format!("bad denominator: {e}"))?;
        if den == 0.into() {
            return Err("denominator is zero".into());
        }
        return Ok(BigRational::new(num, den));
    }
    if let Ok(int) = num_bigint::BigInt::from_str(text) {
        return Ok(BigRational::from_integer(int));
    }
    let float: f64 = text.parse().map_err(|e| format!("bad number: {e}"))?;
    BigRational::from_float(float).ok_or_else(|| "number is not finite".into())
}

// ---------------------------------------------------------------------------
// Schema
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    SimulateSegment,
    ExactSegment,
    SimulateZ,
    Classify,
    ReproduceFigures,
    VerifyIdentities,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::SimulateSegment => "simulate-segment",
            Mode::ExactSegment => "exact-segment",
            Mode::SimulateZ => "simulate-z",
            Mode::Classify => "classify",
            Mode::ReproduceFigures => "reproduce-figures",
            Mode::VerifyIdentities => "verify-identities",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ReinforcementConfig {
    Linear,
    Sequence {
        generator: GeneratorConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label: Option<String>,
    },
    PerEdge {
        tables: BTreeMap<i64, Vec<RationalParam>>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeneratorConfig {
    Constant { value: RationalParam },
    Polynomial { degree: u32, coefficient: RationalParam },
    Geometric { ratio: RationalParam },
    Explicit { increments: Vec<RationalParam> },
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GrowthTestConfig {
    None,
    RatioAtLeast { ratio: f64 },
    PowerAtLeast { exponent: f64, coefficient: f64 },
    LinearAtMost { factor: f64 },
}

impl Default for GrowthTestConfig {
    fn default() -> Self {
        GrowthTestConfig::None
    }
}

impl From<GrowthTestConfig> for GrowthTest {
    fn from(config: GrowthTestConfig) -> Self {
        match config {
            GrowthTestConfig::None => GrowthTest::None,
            GrowthTestConfig::RatioAtLeast { ratio } => GrowthTest::RatioAtLeast { ratio },
            GrowthTestConfig::PowerAtLeast { exponent, coefficient } => {
                GrowthTest::PowerAtLeast { exponent, coefficient }
            }
            GrowthTestConfig::LinearAtMost { factor } => GrowthTest::LinearAtMost { factor },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WeightOverride {
    pub edge: i64,
    pub weight: RationalParam,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExactLaw {
    /// Cycle-time fraction of the alternating pair.
    Alternating,
    /// Excursion-time fraction of a single walker (two-color urn).
    SingleWalker,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default = "defaults::walkers")]
    pub walkers: usize,
    #[serde(default = "defaults::scheduler")]
    pub scheduler: Scheduler,
    #[serde(default = "defaults::reinforcement")]
    pub reinforcement: ReinforcementConfig,
    #[serde(default = "defaults::steps")]
    pub steps: u64,
    #[serde(default = "defaults::replicas")]
    pub replicas: u64,
    #[serde(default = "defaults::base_seed")]
    pub base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_positions: Option<Vec<i64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub weight_overrides: Vec<WeightOverride>,
    /// Horizon (in four-step cycles or urn draws) for the exact laws.
    #[serde(default = "defaults::exact_cycles")]
    pub exact_cycles: u64,
    #[serde(default = "defaults::exact_law")]
    pub exact_law: ExactLaw,
    #[serde(default = "defaults::stall_window")]
    pub stall_window: u64,
    #[serde(default = "defaults::return_threshold")]
    pub return_threshold: u64,
    /// Series terms computed by `classify`.
    #[serde(default = "defaults::k_max")]
    pub k_max: u64,
    #[serde(default)]
    pub growth_test: GrowthTestConfig,
    /// 0 = use all available cores. Thread count never changes the output,
    /// so it is an execution detail: accepted from config files but excluded
    /// from the canonical form and the hash.
    #[serde(default, skip_serializing)]
    pub threads: usize,
    /// Also an execution detail, excluded from the canonical form so that a
    /// replayed header reproduces artifacts byte-identically anywhere.
    #[serde(default = "defaults::out_dir", skip_serializing)]
    pub out_dir: PathBuf,
}

mod defaults {
    use super::*;

    pub fn walkers() -> usize {
        2
    }
    pub fn scheduler() -> Scheduler {
        Scheduler::Alternating
    }
    pub fn reinforcement() -> ReinforcementConfig {
        ReinforcementConfig::Linear
    }
    pub fn steps() -> u64 {
        4_003
    }
    pub fn replicas() -> u64 {
        20_000
    }
    pub fn base_seed() -> u64 {
        1
    }
    pub fn exact_cycles() -> u64 {
        1_000
    }
    pub fn exact_law() -> ExactLaw {
        ExactLaw::Alternating
    }
    pub fn stall_window() -> u64 {
        crate::zline::DEFAULT_STALL_WINDOW
    }
    pub fn return_threshold() -> u64 {
        crate::zline::DEFAULT_RETURN_THRESHOLD
    }
    pub fn k_max() -> u64 {
        256
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl ExperimentConfig {
    /// Built-in configuration for a mode, used when no config file is given.
    pub fn default_for(mode: Mode) -> Self {
        let mut config = Self {
            mode,
            walkers: defaults::walkers(),
            scheduler: defaults::scheduler(),
            reinforcement: defaults::reinforcement(),
            steps: defaults::steps(),
            replicas: defaults::replicas(),
            base_seed: defaults::base_seed(),
            initial_positions: None,
            weight_overrides: Vec::new(),
            exact_cycles: defaults::exact_cycles(),
            exact_law: defaults::exact_law(),
            stall_window: defaults::stall_window(),
            return_threshold: defaults::return_threshold(),
            k_max: defaults::k_max(),
            growth_test: GrowthTestConfig::None,
            threads: 0,
            out_dir: defaults::out_dir(),
        };
        match mode {
            Mode::SimulateZ => {
                config.scheduler = Scheduler::UniformRandom;
                config.steps = 100_000;
                config.replicas = 200;
            }
            Mode::Classify => {
                config.reinforcement = ReinforcementConfig::Sequence {
                    generator: GeneratorConfig::Constant {
                        value: RationalParam(BigRational::from_integer(1.into())),
                    },
                    label: Some("linear".into()),
                };
                config.growth_test = GrowthTestConfig::LinearAtMost { factor: 2.0 };
            }
            _ => {}
        }
        config
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: ExperimentConfig = serde_json::from_str(text)?;
        Ok(config)
    }

    /// Canonical single-line JSON form; this is what gets hashed and embedded
    /// into artifact headers.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        format!("{:016x}", fnv1a(self.canonical_json().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.walkers == 0 {
            return Err(invalid("walkers", "need at least one walker"));
        }
        if self.scheduler == Scheduler::Alternating && self.walkers != 2 {
            return Err(invalid(
                "scheduler",
                format!("alternating selection needs exactly 2 walkers, got {}", self.walkers),
            ));
        }
        if let Some(positions) = &self.initial_positions {
            if positions.len() != self.walkers {
                return Err(invalid(
                    "initial_positions",
                    format!("expected {} entries, got {}", self.walkers, positions.len()),
                ));
            }
        }
        for o in &self.weight_overrides {
            if !o.weight.0.is_positive() {
                return Err(invalid("weight_overrides", format!("edge {}: weight must be positive", o.edge)));
            }
        }
        match self.mode {
            Mode::SimulateSegment | Mode::ReproduceFigures => {
                if !(1..=2).contains(&self.walkers) {
                    return Err(invalid("walkers", "segment experiments use 1 or 2 walkers"));
                }
                if let Some(positions) = &self.initial_positions {
                    if positions.iter().any(|p| p.abs() > 1) {
                        return Err(invalid(
                            "initial_positions",
                            "segment nodes are -1, 0, 1",
                        ));
                    }
                }
                if self.replicas == 0 {
                    return Err(invalid("replicas", "need at least one replica"));
                }
            }
            Mode::SimulateZ => {
                if self.scheduler != Scheduler::UniformRandom {
                    return Err(invalid(
                        "scheduler",
                        "line-walk experiments use uniform-random selection",
                    ));
                }
                if self.replicas == 0 {
                    return Err(invalid("replicas", "need at least one replica"));
                }
            }
            Mode::Classify => {
                if self.k_max < 16 {
                    return Err(invalid("k_max", "need at least 16 series terms"));
                }
                match &self.reinforcement {
                    ReinforcementConfig::Linear | ReinforcementConfig::Sequence { .. } => {}
                    ReinforcementConfig::PerEdge { .. } => {
                        return Err(invalid(
                            "reinforcement",
                            "classification needs a location-independent increment sequence",
                        ))
                    }
                }
            }
            Mode::ExactSegment | Mode::VerifyIdentities => {}
        }
        // conversion must succeed too (nonnegative increments etc.)
        self.reinforcement_scheme()?;
        Ok(())
    }

    pub fn initial_positions(&self) -> Vec<i64> {
        self.initial_positions
            .clone()
            .unwrap_or_else(|| vec![0; self.walkers])
    }

    pub fn override_map(&self) -> BTreeMap<EdgeIndex, BigRational> {
        self.weight_overrides
            .iter()
            .map(|o| (EdgeIndex(o.edge), o.weight.0.clone()))
            .collect()
    }

    pub fn reinforcement_scheme(&self) -> Result<ReinforcementScheme, ConfigError> {
        match &self.reinforcement {
            ReinforcementConfig::Linear => Ok(ReinforcementScheme::Linear),
            ReinforcementConfig::Sequence { generator, label } => {
                let spec = self.sequence_spec_from(generator, label)?;
                Ok(ReinforcementScheme::SequenceType(spec))
            }
            ReinforcementConfig::PerEdge { tables } => {
                let mut map = BTreeMap::new();
                for (&edge, weights) in tables {
                    let table =
                        WeightTable::new(weights.iter().map(|w| w.0.clone()).collect())
                            .map_err(|e| invalid("reinforcement", e.to_string()))?;
                    map.insert(EdgeIndex(edge), table);
                }
                Ok(ReinforcementScheme::PerEdge(map))
            }
        }
    }

    /// The increment sequence used for classification; linear reinforcement
    /// is the constant-one sequence.
    pub fn sequence_spec(&self) -> Result<SequenceSpec, ConfigError> {
        match &self.reinforcement {
            ReinforcementConfig::Linear => Ok(SequenceSpec::linear()),
            ReinforcementConfig::Sequence { generator, label } => {
                self.sequence_spec_from(generator, label)
            }
            ReinforcementConfig::PerEdge { .. } => Err(invalid(
                "reinforcement",
                "per-edge tables have no increment sequence",
            )),
        }
    }

    fn sequence_spec_from(
        &self,
        generator: &GeneratorConfig,
        label: &Option<String>,
    ) -> Result<SequenceSpec, ConfigError> {
        let gen = match generator {
            GeneratorConfig::Constant { value } => Generator::Constant(value.0.clone()),
            GeneratorConfig::Polynomial { degree, coefficient } => Generator::Polynomial {
                degree: *degree,
                coefficient: coefficient.0.clone(),
            },
            GeneratorConfig::Geometric { ratio } => Generator::Geometric { ratio: ratio.0.clone() },
            GeneratorConfig::Explicit { increments } => {
                Generator::Explicit(increments.iter().map(|x| x.0.clone()).collect())
            }
        };
        let label = label.clone().unwrap_or_else(|| "sequence".into());
        SequenceSpec::new(gen, label).map_err(|e| invalid("reinforcement", e.to_string()))
    }
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

// ---------------------------------------------------------------------------
// Artifact headers
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct ArtifactHeader {
    pub config_hash: String,
    pub base_seed: u64,
    pub config: ExperimentConfig,
}

impl ArtifactHeader {
    pub fn for_config(config: &ExperimentConfig) -> Self {
        Self {
            config_hash: config.hash(),
            base_seed: config.base_seed,
            config: config.clone(),
        }
    }

    /// Comment-style header, the first line of every CSV artifact.
    pub fn csv_line(&self) -> String {
        format!(
            "# errw-lab config_hash={} base_seed={} config={}",
            self.config_hash,
            self.base_seed,
            self.config.canonical_json()
        )
    }

    /// JSON header record, the first line of every JSONL artifact.
    pub fn jsonl_line(&self) -> String {
        serde_json::to_string(&JsonHeader {
            record: "header",
            config_hash: &self.config_hash,
            base_seed: self.base_seed,
            config: &self.config,
        })
        .expect("header serializes")
    }
}

#[derive(Serialize)]
struct JsonHeader<'a> {
    record: &'static str,
    config_hash: &'a str,
    base_seed: u64,
    config: &'a ExperimentConfig,
}

#[derive(Deserialize)]
struct JsonHeaderOwned {
    record: String,
    config_hash: String,
    base_seed: u64,
    config: ExperimentConfig,
}

/// Reads back the header embedded in the first line of an artifact, in
/// either the CSV-comment or the JSONL form. The returned config replays the
/// run that produced the artifact.
pub fn parse_artifact_header(first_line: &str) -> Result<ArtifactHeader, ConfigError> {
    let line = first_line.trim_end_matches(['\r', '\n']);
    if let Some(rest) = line.strip_prefix("# errw-lab ") {
        let rest = rest.trim_start();
        let hash_part = rest
            .strip_prefix("config_hash=")
            .ok_or(ConfigError::BadHeader)?;
        let (config_hash, rest) = hash_part.split_once(' ').ok_or(ConfigError::BadHeader)?;
        let seed_part = rest
            .trim_start()
            .strip_prefix("base_seed=")
            .ok_or(ConfigError::BadHeader)?;
        let (seed, rest) = seed_part.split_once(' ').ok_or(ConfigError::BadHeader)?;
        let base_seed: u64 = seed.parse().map_err(|_| ConfigError::BadHeader)?;
        let config_json = rest
            .trim_start()
            .strip_prefix("config=")
            .ok_or(ConfigError::BadHeader)?;
        let config = ExperimentConfig::from_json(config_json)?;
        return Ok(ArtifactHeader {
            config_hash: config_hash.to_string(),
            base_seed,
            config,
        });
    }
    if line.starts_with('{') {
        let header: JsonHeaderOwned = serde_json::from_str(line)?;
        if header.record != "header" {
            return Err(ConfigError::BadHeader);
        }
        return Ok(ArtifactHeader {
            config_hash: header.config_hash,
            base_seed: header.base_seed,
            config: header.config,
        });
    }
    Err(ConfigError::BadHeader)
}
